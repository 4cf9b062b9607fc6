use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{ImplicitFn, Obstacle};
use crate::scalar::{wrap_angle, Scalar};

use super::arm::TwoLinkArm;

/// A disc obstacle in the arm's task space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskDisc<T> {
    pub center: [T; 2],
    pub radius: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMapConfig<T> {
    /// Grid cells per joint axis, at least 64.
    pub resolution: usize,
    /// Largest radius of a single covering circle (rad).
    pub max_circle_radius: T,
    /// Radial gap between each covering circle and its sensing circle (rad).
    pub sensing_margin: T,
}

impl<T: Scalar> JointMapConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 64 {
            return Err(invalid("resolution", "must be >= 64"));
        }
        if !(self.max_circle_radius.is_finite() && self.max_circle_radius > T::zero()) {
            return Err(invalid("max_circle_radius", "must be > 0"));
        }
        if !(self.sensing_margin.is_finite() && self.sensing_margin > T::zero()) {
            return Err(invalid("sensing_margin", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JointMapStats {
    pub resolution: usize,
    pub colliding_cells: usize,
    pub circles: usize,
    /// Fraction of colliding cells lying entirely inside the cover.
    pub coverage: f64,
    /// Cells whose center the cover contains, over colliding cells.
    pub overapprox_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct JointObstacleMap<T> {
    /// One sphere obstacle (toroidal geometry) per covering circle.
    pub obstacles: Vec<Obstacle<T>>,
    pub circles: Vec<([T; 2], T)>,
    pub stats: JointMapStats,
    /// Set when the disc is out of reach and no obstacle was produced.
    pub notice: Option<String>,
}

fn segment_distance<T: Scalar>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > T::zero() {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Whether either link touches the disc at configuration `q`.
pub fn arm_collides<T: Scalar>(arm: &TwoLinkArm<T>, q: [T; 2], disc: &TaskDisc<T>) -> bool {
    let [base, elbow, tip] = arm.link_points(q);
    segment_distance(disc.center, base, elbow) <= disc.radius
        || segment_distance(disc.center, elbow, tip) <= disc.radius
}

fn torus_dist<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    let d0 = wrap_angle(a[0] - b[0]);
    let d1 = wrap_angle(a[1] - b[1]);
    (d0 * d0 + d1 * d1).sqrt()
}

/// Rasterize the joint-space collision set of `disc` and cover it with
/// circles on the torus.
pub fn map_task_obstacle_to_joint_space<T: Scalar>(
    arm: &TwoLinkArm<T>,
    disc: &TaskDisc<T>,
    cfg: &JointMapConfig<T>,
) -> Result<JointObstacleMap<T>> {
    cfg.validate()?;
    if !(disc.radius.is_finite() && disc.radius > T::zero()) {
        return Err(invalid("radius", "must be > 0"));
    }
    let n = cfg.resolution;
    let pi = T::PI();
    let cell = (pi + pi) / T::from_usize(n).unwrap();
    let center_of = |i: usize| -pi + (T::from_usize(i).unwrap() + T::lit(0.5)) * cell;
    let half_diag = cell * T::lit(std::f64::consts::FRAC_1_SQRT_2);

    let mut hits: Vec<[T; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let q = [center_of(i), center_of(j)];
            if arm_collides(arm, q, disc) {
                hits.push(q);
            }
        }
    }
    let total = n * n;
    if hits.is_empty() {
        return Ok(JointObstacleMap {
            obstacles: Vec::new(),
            circles: Vec::new(),
            stats: JointMapStats {
                resolution: n,
                colliding_cells: 0,
                circles: 0,
                coverage: 1.0,
                overapprox_ratio: 0.0,
            },
            notice: Some("task obstacle is out of reach; no joint-space obstacle produced".into()),
        });
    }
    if hits.len() == total {
        return Err(Error::ObstacleRejected(
            "every configuration collides with the task obstacle".into(),
        ));
    }

    let reach = cfg.max_circle_radius - half_diag;
    if !(reach > T::zero()) {
        return Err(invalid("max_circle_radius", "smaller than a grid cell"));
    }
    let mut covered = vec![false; hits.len()];
    let mut circles: Vec<([T; 2], T)> = Vec::new();
    while let Some(seed) = covered.iter().position(|c| !c) {
        let s = hits[seed];
        let members: Vec<usize> = (0..hits.len())
            .filter(|&k| !covered[k] && torus_dist(hits[k], s) <= reach)
            .collect();
        let m = T::from_usize(members.len()).unwrap();
        let mut c = [T::zero(); 2];
        for &k in &members {
            c[0] = c[0] + wrap_angle(hits[k][0] - s[0]);
            c[1] = c[1] + wrap_angle(hits[k][1] - s[1]);
        }
        let center = [wrap_angle(s[0] + c[0] / m), wrap_angle(s[1] + c[1] / m)];
        let radius = members
            .iter()
            .map(|&k| torus_dist(hits[k], center))
            .fold(T::zero(), |a, b| a.max(b))
            + half_diag;
        for k in 0..hits.len() {
            if !covered[k] && torus_dist(hits[k], center) + half_diag <= radius {
                covered[k] = true;
            }
        }
        circles.push((center, radius));
    }

    let inside_cover = |q: [T; 2], slack: T| circles.iter().any(|&(c, r)| torus_dist(q, c) + slack <= r);
    let fully = hits.iter().filter(|&&q| inside_cover(q, half_diag)).count();
    let mut claimed = 0usize;
    for i in 0..n {
        for j in 0..n {
            if inside_cover([center_of(i), center_of(j)], T::zero()) {
                claimed += 1;
            }
        }
    }

    let obstacles = circles
        .iter()
        .enumerate()
        .map(|(k, &(c, r))| {
            Obstacle::new(
                ImplicitFn::sphere(c.to_vec(), r)?,
                ImplicitFn::sphere(c.to_vec(), r + cfg.sensing_margin)?,
                format!("joint_{k}"),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointObstacleMap {
        obstacles,
        stats: JointMapStats {
            resolution: n,
            colliding_cells: hits.len(),
            circles: circles.len(),
            coverage: fully as f64 / hits.len() as f64,
            overapprox_ratio: claimed as f64 / hits.len() as f64,
        },
        circles,
        notice: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> JointMapConfig<f64> {
        JointMapConfig {
            resolution: 64,
            max_circle_radius: 0.5,
            sensing_margin: 0.3,
        }
    }

    #[test]
    fn unreachable_disc_is_empty() {
        let arm = TwoLinkArm::<f64>::unity();
        let m = map_task_obstacle_to_joint_space(&arm, &TaskDisc { center: [5.0, 0.0], radius: 0.2 }, &cfg()).unwrap();
        assert!(m.obstacles.is_empty());
        assert!(m.notice.is_some());
    }

    #[test]
    fn disc_on_base_rejected() {
        let arm = TwoLinkArm::<f64>::unity();
        let r = map_task_obstacle_to_joint_space(&arm, &TaskDisc { center: [0.0, 0.0], radius: 0.2 }, &cfg());
        assert!(matches!(r, Err(Error::ObstacleRejected(_))));
    }

    #[test]
    fn low_resolution_rejected() {
        let arm = TwoLinkArm::<f64>::unity();
        let mut c = cfg();
        c.resolution = 32;
        assert!(map_task_obstacle_to_joint_space(&arm, &TaskDisc { center: [1.0, 1.0], radius: 0.2 }, &c).is_err());
    }
}
