//! Implicit scalar fields whose zero level set bounds an obstacle or a
//! sensing region. Negative inside, zero on the boundary, positive outside.
//!
//! Every kind carries an analytic gradient so the density gradient can be
//! assembled exactly by the chain rule.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::state::StateVector;
use crate::scalar::{wrap_angle, Scalar};

/// How coordinate differences are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryMode {
    #[default]
    Euclidean,
    /// Every coordinate is an angle; differences wrap into `(-pi, pi]`.
    Toroidal,
}

impl GeometryMode {
    #[inline]
    pub fn diff<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            GeometryMode::Euclidean => a - b,
            GeometryMode::Toroidal => wrap_angle(a - b),
        }
    }

    pub fn offset<T: Scalar>(self, x: &[T], center: &[T]) -> Vec<T> {
        x.iter()
            .zip(center)
            .map(|(&a, &b)| self.diff(a, b))
            .collect()
    }
}

/// `coeff * prod_i d_i^exponents[i]`
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<T> {
    pub coeff: T,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImplicitKind<T> {
    /// `|x - c|^2 - r^2`
    Sphere { center: Vec<T>, radius: T },
    /// `|a o (x - c)|^2 - r^2`
    Ellipsoid {
        center: Vec<T>,
        scale: Vec<T>,
        radius: T,
    },
    /// `(sum_i |x_i - c_i|^m)^(p/m) - r^p` with `m = norm_order`, `p = power`.
    ///
    /// `m = 2, p = 4` is `|x|^4 - r^4`; `m = p = 4` gives a rounded square.
    Superellipse {
        center: Vec<T>,
        radius: T,
        norm_order: T,
        power: T,
    },
    /// Infinite cylinder along coordinate `axis`; the axis entry of `center`
    /// is ignored.
    AxisCylinder {
        center: Vec<T>,
        axis: usize,
        radius: T,
    },
    /// Solid torus in three dimensions, quartic form
    /// `(|d|^2 + R^2 - r^2)^2 - 4 R^2 (|d|^2 - d_axis^2)`.
    Torus {
        center: Vec<T>,
        axis: usize,
        major: T,
        minor: T,
    },
    /// Polynomial in the offsets `d = x - center`.
    Polynomial {
        center: Vec<T>,
        terms: Vec<Monomial<T>>,
    },
    /// Planar egg shape `a^2 d1^2 + b^2 d2^2 c^d1 - r^2`.
    SkewedOval {
        center: Vec<T>,
        a: T,
        b: T,
        c: T,
        radius: T,
    },
}

/// An implicit field: the kind's value minus a constant `shift`.
///
/// A sensing boundary built as `h - sigma` is the same kind with
/// `shift = sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitFn<T> {
    pub kind: ImplicitKind<T>,
    pub shift: T,
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn finite_all<T: Scalar>(name: &'static str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(name, "empty"));
    }
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(invalid(name, "non-finite entry"))
    }
}

impl<T: Scalar> ImplicitFn<T> {
    pub fn new(kind: ImplicitKind<T>) -> Result<Self> {
        let f = Self {
            kind,
            shift: T::zero(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn sphere(center: Vec<T>, radius: T) -> Result<Self> {
        Self::new(ImplicitKind::Sphere { center, radius })
    }

    pub fn ellipsoid(center: Vec<T>, scale: Vec<T>, radius: T) -> Result<Self> {
        Self::new(ImplicitKind::Ellipsoid {
            center,
            scale,
            radius,
        })
    }

    /// C-shaped planar obstacle opening towards `+x1`.
    ///
    /// `(|d|^2 - R^2)^2 - w^4 + cut (d1 + R)^p` with even `p >= 2`: a ring of
    /// mean radius `R` and half-width about `w^2 / 2R`, with the wall removed
    /// where the cut term exceeds `w^4`. Larger `p` sharpens the cut so the
    /// field rises quickly across the opening.
    pub fn c_shape(center: Vec<T>, ring_radius: T, half_width: T, cut: T, cut_power: u32) -> Result<Self> {
        positive("ring_radius", ring_radius)?;
        positive("half_width", half_width)?;
        positive("cut", cut)?;
        if center.len() != 2 {
            return Err(invalid("center", "c-shape is planar"));
        }
        if cut_power < 2 || cut_power % 2 != 0 {
            return Err(invalid("cut_power", "must be even and >= 2"));
        }
        let r2 = ring_radius * ring_radius;
        let two = T::lit(2.0);
        let m = |coeff: T, e0: u32, e1: u32| Monomial {
            coeff,
            exponents: vec![e0, e1],
        };
        let mut terms = vec![
            m(T::one(), 4, 0),
            m(two, 2, 2),
            m(T::one(), 0, 4),
            m(-two * r2, 2, 0),
            m(-two * r2, 0, 2),
            m(r2 * r2 - half_width.powi(4), 0, 0),
        ];
        // cut (d1 + R)^p expanded binomially
        let mut binom = T::one();
        for k in 0..=cut_power {
            let coeff = cut * binom * ring_radius.powi((cut_power - k) as i32);
            terms.push(m(coeff, k, 0));
            binom = binom * T::from_u32(cut_power - k).unwrap() / T::from_u32(k + 1).unwrap();
        }
        Self::new(ImplicitKind::Polynomial { center, terms })
    }

    /// The same field shifted down by `sigma`: `f(x) - sigma`.
    pub fn with_margin(&self, sigma: T) -> Self {
        Self {
            kind: self.kind.clone(),
            shift: self.shift + sigma,
        }
    }

    /// A polynomial field multiplied by `k > 0`. The zero set is unchanged.
    pub fn scaled(&self, k: T) -> Result<Self> {
        positive("scale", k)?;
        match &self.kind {
            ImplicitKind::Polynomial { center, terms } => Ok(Self {
                kind: ImplicitKind::Polynomial {
                    center: center.clone(),
                    terms: terms
                        .iter()
                        .map(|t| Monomial {
                            coeff: t.coeff * k,
                            exponents: t.exponents.clone(),
                        })
                        .collect(),
                },
                shift: self.shift * k,
            }),
            _ => Err(invalid("scale", "only polynomial fields can be scaled")),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ImplicitKind::Sphere { center, .. }
            | ImplicitKind::Ellipsoid { center, .. }
            | ImplicitKind::Superellipse { center, .. }
            | ImplicitKind::AxisCylinder { center, .. }
            | ImplicitKind::Torus { center, .. }
            | ImplicitKind::Polynomial { center, .. }
            | ImplicitKind::SkewedOval { center, .. } => center.len(),
        }
    }

    /// Whether the sublevel set `{f <= 0}` is bounded for this kind.
    pub fn is_bounded(&self) -> bool {
        !matches!(self.kind, ImplicitKind::AxisCylinder { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.shift.is_finite() {
            return Err(invalid("shift", "non-finite"));
        }
        match &self.kind {
            ImplicitKind::Sphere { center, radius } => {
                finite_all("center", center)?;
                positive("radius", *radius)
            }
            ImplicitKind::Ellipsoid {
                center,
                scale,
                radius,
            } => {
                finite_all("center", center)?;
                finite_all("scale", scale)?;
                if scale.len() != center.len() {
                    return Err(invalid("scale", "length differs from center"));
                }
                if scale.iter().any(|s| *s == T::zero()) {
                    return Err(invalid("scale", "zero entry makes the set unbounded"));
                }
                positive("radius", *radius)
            }
            ImplicitKind::Superellipse {
                center,
                radius,
                norm_order,
                power,
            } => {
                finite_all("center", center)?;
                positive("radius", *radius)?;
                if !(norm_order.is_finite() && *norm_order >= T::lit(2.0)) {
                    return Err(invalid("norm_order", "must be >= 2"));
                }
                if !(power.is_finite() && *power >= *norm_order) {
                    return Err(invalid("power", "must be >= norm_order"));
                }
                Ok(())
            }
            ImplicitKind::AxisCylinder {
                center,
                axis,
                radius,
            } => {
                finite_all("center", center)?;
                if center.len() < 2 || *axis >= center.len() {
                    return Err(invalid("axis", "out of range"));
                }
                positive("radius", *radius)
            }
            ImplicitKind::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                finite_all("center", center)?;
                if center.len() != 3 || *axis >= 3 {
                    return Err(invalid("torus", "defined in three dimensions only"));
                }
                positive("major", *major)?;
                positive("minor", *minor)?;
                if *minor >= *major {
                    return Err(invalid("minor", "must be < major"));
                }
                Ok(())
            }
            ImplicitKind::Polynomial { center, terms } => {
                finite_all("center", center)?;
                if terms.is_empty() {
                    return Err(invalid("terms", "empty polynomial"));
                }
                for t in terms {
                    if t.exponents.len() != center.len() {
                        return Err(invalid("terms", "exponent length differs from dimension"));
                    }
                    if !t.coeff.is_finite() {
                        return Err(invalid("terms", "non-finite coefficient"));
                    }
                }
                Ok(())
            }
            ImplicitKind::SkewedOval {
                center,
                a,
                b,
                c,
                radius,
            } => {
                finite_all("center", center)?;
                if center.len() != 2 {
                    return Err(invalid("skewed_oval", "planar only"));
                }
                positive("a", *a)?;
                positive("b", *b)?;
                positive("c", *c)?;
                positive("radius", *radius)
            }
        }
    }

    /// Field value at `x` with Euclidean differences.
    pub fn eval(&self, x: &StateVector<T>) -> Result<T> {
        self.eval_in(x, GeometryMode::Euclidean)
    }

    pub fn grad(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        self.grad_in(x, GeometryMode::Euclidean)
    }

    pub fn eval_in(&self, x: &StateVector<T>, mode: GeometryMode) -> Result<T> {
        x.check_dim(self.dim())?;
        Ok(self.value_unchecked(x.as_slice(), mode))
    }

    pub fn grad_in(&self, x: &StateVector<T>, mode: GeometryMode) -> Result<StateVector<T>> {
        x.check_dim(self.dim())?;
        Ok(self.grad_unchecked(x.as_slice(), mode).into())
    }

    pub(crate) fn value_unchecked(&self, x: &[T], mode: GeometryMode) -> T {
        let v = match &self.kind {
            ImplicitKind::Sphere { center, radius } => {
                let d = mode.offset(x, center);
                sum_sq(&d) - *radius * *radius
            }
            ImplicitKind::Ellipsoid {
                center,
                scale,
                radius,
            } => {
                let d = mode.offset(x, center);
                d.iter()
                    .zip(scale)
                    .fold(T::zero(), |acc, (&di, &ai)| acc + (ai * di) * (ai * di))
                    - *radius * *radius
            }
            ImplicitKind::Superellipse {
                center,
                radius,
                norm_order,
                power,
            } => {
                let d = mode.offset(x, center);
                let s = d
                    .iter()
                    .fold(T::zero(), |acc, di| acc + di.abs().powf(*norm_order));
                s.powf(*power / *norm_order) - radius.powf(*power)
            }
            ImplicitKind::AxisCylinder {
                center,
                axis,
                radius,
            } => {
                let d = mode.offset(x, center);
                d.iter()
                    .enumerate()
                    .filter(|(i, _)| i != axis)
                    .fold(T::zero(), |acc, (_, &di)| acc + di * di)
                    - *radius * *radius
            }
            ImplicitKind::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                let d = mode.offset(x, center);
                let n2 = sum_sq(&d);
                let z = d[*axis];
                let rho2 = n2 - z * z;
                let q = n2 + *major * *major - *minor * *minor;
                q * q - T::lit(4.0) * *major * *major * rho2
            }
            ImplicitKind::Polynomial { center, terms } => {
                let d = mode.offset(x, center);
                terms.iter().fold(T::zero(), |acc, t| {
                    acc + t.coeff * monomial(&d, &t.exponents, None)
                })
            }
            ImplicitKind::SkewedOval {
                center,
                a,
                b,
                c,
                radius,
            } => {
                let d = mode.offset(x, center);
                *a * *a * d[0] * d[0] + *b * *b * d[1] * d[1] * c.powf(d[0]) - *radius * *radius
            }
        };
        v - self.shift
    }

    pub(crate) fn grad_unchecked(&self, x: &[T], mode: GeometryMode) -> Vec<T> {
        let two = T::lit(2.0);
        match &self.kind {
            ImplicitKind::Sphere { center, .. } => {
                mode.offset(x, center).into_iter().map(|d| two * d).collect()
            }
            ImplicitKind::Ellipsoid { center, scale, .. } => mode
                .offset(x, center)
                .into_iter()
                .zip(scale)
                .map(|(d, &a)| two * a * a * d)
                .collect(),
            ImplicitKind::Superellipse {
                center,
                norm_order,
                power,
                ..
            } => {
                let d = mode.offset(x, center);
                let m = *norm_order;
                let p = *power;
                let s = d.iter().fold(T::zero(), |acc, di| acc + di.abs().powf(m));
                if s == T::zero() {
                    return vec![T::zero(); d.len()];
                }
                // p * N^(p-m) * |d_i|^(m-1) * sign(d_i), with N = s^(1/m)
                let lead = p * s.powf((p - m) / m);
                d.iter()
                    .map(|&di| {
                        if di == T::zero() {
                            T::zero()
                        } else {
                            lead * di.abs().powf(m - T::one()) * di.signum()
                        }
                    })
                    .collect()
            }
            ImplicitKind::AxisCylinder { center, axis, .. } => mode
                .offset(x, center)
                .into_iter()
                .enumerate()
                .map(|(i, d)| if i == *axis { T::zero() } else { two * d })
                .collect(),
            ImplicitKind::Torus {
                center,
                axis,
                major,
                minor,
            } => {
                let d = mode.offset(x, center);
                let n2 = sum_sq(&d);
                let q = n2 + *major * *major - *minor * *minor;
                let four = T::lit(4.0);
                d.iter()
                    .enumerate()
                    .map(|(i, &di)| {
                        if i == *axis {
                            four * q * di
                        } else {
                            four * di * (q - two * *major * *major)
                        }
                    })
                    .collect()
            }
            ImplicitKind::Polynomial { center, terms } => {
                let d = mode.offset(x, center);
                (0..d.len())
                    .map(|i| {
                        terms.iter().fold(T::zero(), |acc, t| {
                            acc + t.coeff * monomial(&d, &t.exponents, Some(i))
                        })
                    })
                    .collect()
            }
            ImplicitKind::SkewedOval {
                center, a, b, c, ..
            } => {
                let d = mode.offset(x, center);
                let cp = c.powf(d[0]);
                vec![
                    two * *a * *a * d[0] + *b * *b * d[1] * d[1] * cp * c.ln(),
                    two * *b * *b * d[1] * cp,
                ]
            }
        }
    }
}

fn sum_sq<T: Scalar>(d: &[T]) -> T {
    d.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// Monomial value, or its partial derivative along `diff` when given.
fn monomial<T: Scalar>(d: &[T], exps: &[u32], diff: Option<usize>) -> T {
    let mut out = T::one();
    for (i, (&di, &e)) in d.iter().zip(exps).enumerate() {
        if Some(i) == diff {
            if e == 0 {
                return T::zero();
            }
            out = out * T::lit(e as f64) * di.powi(e as i32 - 1);
        } else {
            out = out * di.powi(e as i32);
        }
    }
    out
}
