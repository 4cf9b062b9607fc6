use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::implicit::{GeometryMode, ImplicitFn};
use crate::geometry::state::StateVector;
use crate::scalar::Scalar;

/// Unsafe boundary `h` and sensing boundary `s` of one obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle<T> {
    pub h: ImplicitFn<T>,
    pub s: ImplicitFn<T>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Unsafe,
    Sensing,
    Free,
}

impl<T: Scalar> Obstacle<T> {
    pub fn new(h: ImplicitFn<T>, s: ImplicitFn<T>, label: impl Into<String>) -> Result<Self> {
        if h.dim() != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                got: s.dim(),
            });
        }
        Ok(Self {
            h,
            s,
            label: label.into(),
        })
    }

    /// Sensing boundary chosen as `h - sigma`.
    pub fn with_margin(h: ImplicitFn<T>, sigma: T, label: impl Into<String>) -> Result<Self> {
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(invalid("sigma", "sensing margin must be > 0"));
        }
        let s = h.with_margin(sigma);
        Self::new(h, s, label)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn region_in(&self, x: &[T], mode: GeometryMode) -> Region {
        let h = self.h.value_unchecked(x, mode);
        if h <= T::zero() {
            Region::Unsafe
        } else if self.s.value_unchecked(x, mode) <= T::zero() {
            Region::Sensing
        } else {
            Region::Free
        }
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> DomainBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(invalid("domain", "lo and hi must have the same nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(invalid("domain", "require finite lo < hi on every axis"));
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    pub fn volume(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(T::one(), |acc, (&a, &b)| acc * (b - a))
    }

    /// Uniform draw inside the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                let u: f64 = rng.random();
                a + (b - a) * T::lit(u)
            })
            .collect::<Vec<_>>()
            .into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment<T> {
    pub target: StateVector<T>,
    pub obstacles: Vec<Obstacle<T>>,
    pub domain: DomainBox<T>,
    /// Radius of the target neighbourhood in which the controller blends to
    /// a linear stabiliser.
    pub delta: T,
    pub mode: GeometryMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TargetInsideSensingSet { obstacle: usize },
    DeltaBallIntersectsSensingSet { obstacle: usize },
    TargetTooCloseToUnsafeSet { obstacle: usize, distance: f64 },
    SensingDoesNotEncloseUnsafe { obstacle: usize, at: Vec<f64> },
    DegenerateTransition { obstacle: usize, at: Vec<f64>, gap: f64 },
    TargetOutsideDomain,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::TargetInsideSensingSet { obstacle } => {
                write!(f, "obstacle {obstacle}: target inside sensing set")
            }
            Violation::DeltaBallIntersectsSensingSet { obstacle } => {
                write!(f, "obstacle {obstacle}: delta ball intersects sensing set")
            }
            Violation::TargetTooCloseToUnsafeSet { obstacle, distance } => write!(
                f,
                "obstacle {obstacle}: unsafe set within {distance:.3e} of target"
            ),
            Violation::SensingDoesNotEncloseUnsafe { obstacle, at } => write!(
                f,
                "obstacle {obstacle}: sensing set does not enclose unsafe set (at {at:?})"
            ),
            Violation::DegenerateTransition { obstacle, at, gap } => write!(
                f,
                "obstacle {obstacle}: h - s = {gap:.3e} <= 0 in sensing closure (at {at:?})"
            ),
            Violation::TargetOutsideDomain => write!(f, "target outside domain box"),
        }
    }
}

impl<T: Scalar> Environment<T> {
    pub fn new(
        target: StateVector<T>,
        obstacles: Vec<Obstacle<T>>,
        domain: DomainBox<T>,
        delta: T,
        mode: GeometryMode,
    ) -> Result<Self> {
        let n = target.dim();
        if domain.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        for o in &obstacles {
            if o.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: o.dim(),
                });
            }
        }
        if !(delta.is_finite() && delta > T::zero()) {
            return Err(invalid("delta", "must be > 0"));
        }
        Ok(Self {
            target,
            obstacles,
            domain,
            delta,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Per-obstacle region label of `x`.
    pub fn classify(&self, x: &StateVector<T>) -> Result<Vec<Region>> {
        x.check_dim(self.dim())?;
        Ok(self
            .obstacles
            .iter()
            .map(|o| o.region_in(x.as_slice(), self.mode))
            .collect())
    }

    /// Smallest unsafe-field value over all obstacles (`+inf` when there are none).
    pub fn h_min(&self, x: &[T]) -> T {
        self.obstacles
            .iter()
            .map(|o| o.h.value_unchecked(x, self.mode))
            .fold(T::infinity(), T::min)
    }

    /// Offset from the target, wrapped in toroidal mode.
    pub fn offset_from_target(&self, x: &[T]) -> StateVector<T> {
        self.mode.offset(x, self.target.as_slice()).into()
    }

    pub fn distance_to_target(&self, x: &[T]) -> T {
        self.offset_from_target(x).norm()
    }

    pub fn in_unsafe_set(&self, x: &[T]) -> Option<usize> {
        self.obstacles
            .iter()
            .position(|o| o.h.value_unchecked(x, self.mode) <= T::zero())
    }

    /// Monte Carlo check of the obstacle and environment invariants over
    /// `samples` uniform draws in the domain box. Returns every violation
    /// found (at most one of each kind per obstacle); empty when all hold.
    pub fn validate(&self, samples: usize, seed: u64) -> Vec<Violation> {
        let mut out = Vec::new();
        let tgt = self.target.as_slice();
        if !self.domain.contains(tgt) {
            out.push(Violation::TargetOutsideDomain);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<StateVector<T>> =
            (0..samples.max(1)).map(|_| self.domain.sample(&mut rng)).collect();
        // Points inside the delta ball: the ball must stay clear of every sensing set.
        let ball: Vec<Vec<T>> = (0..samples.clamp(1, 4096))
            .map(|_| {
                let mut v: Vec<T> = (0..self.dim())
                    .map(|_| T::lit(rng.random::<f64>() * 2.0 - 1.0))
                    .collect();
                let n = v.iter().fold(T::zero(), |a, &c| a + c * c).sqrt();
                let r = T::lit(rng.random::<f64>()).powf(T::one() / T::lit(self.dim() as f64));
                if n > T::zero() {
                    for c in v.iter_mut() {
                        *c = *c / n * r * self.delta;
                    }
                }
                v.iter().zip(tgt).map(|(&a, &b)| a + b).collect()
            })
            .collect();

        for (k, o) in self.obstacles.iter().enumerate() {
            if o.s.value_unchecked(tgt, self.mode) <= T::zero() {
                out.push(Violation::TargetInsideSensingSet { obstacle: k });
            } else if ball
                .iter()
                .any(|p| o.s.value_unchecked(p, self.mode) <= T::zero())
            {
                out.push(Violation::DeltaBallIntersectsSensingSet { obstacle: k });
            }

            let mut enclose: Option<Vec<f64>> = None;
            let mut degenerate: Option<(Vec<f64>, f64)> = None;
            let mut unsafe_hits = 0usize;
            let mut sensing_hits = 0usize;
            let mut min_dist = f64::INFINITY;
            for x in &draws {
                let xs = x.as_slice();
                let h = o.h.value_unchecked(xs, self.mode);
                let s = o.s.value_unchecked(xs, self.mode);
                if h <= T::zero() {
                    unsafe_hits += 1;
                    min_dist = min_dist.min(self.distance_to_target(xs).as_f64());
                    if s >= T::zero() && enclose.is_none() {
                        enclose = Some(x.to_f64());
                    }
                } else if s <= T::zero() {
                    sensing_hits += 1;
                }
                if h >= T::zero() && s <= T::zero() && h - s <= T::zero() && degenerate.is_none() {
                    degenerate = Some((x.to_f64(), (h - s).as_f64()));
                }
            }
            if enclose.is_none() && unsafe_hits > 0 && sensing_hits == 0 {
                // An unsafe set with an empty transition region cannot be strictly enclosed.
                enclose = draws
                    .iter()
                    .find(|x| o.h.value_unchecked(x.as_slice(), self.mode) <= T::zero())
                    .map(|x| x.to_f64());
            }
            if let Some(at) = enclose {
                out.push(Violation::SensingDoesNotEncloseUnsafe { obstacle: k, at });
            }
            if let Some((at, gap)) = degenerate {
                out.push(Violation::DegenerateTransition {
                    obstacle: k,
                    at,
                    gap,
                });
            }
            if o.h.value_unchecked(tgt, self.mode) <= T::zero() {
                out.push(Violation::TargetTooCloseToUnsafeSet {
                    obstacle: k,
                    distance: 0.0,
                });
            } else if min_dist <= self.delta.as_f64() {
                out.push(Violation::TargetTooCloseToUnsafeSet {
                    obstacle: k,
                    distance: min_dist,
                });
            }
        }
        out
    }
}
