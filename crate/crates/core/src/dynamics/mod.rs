//! Closed-loop simulation: the single integrator `xdot = u` and the fully
//! actuated two-link arm, plus the task-to-joint-space obstacle map.

mod arm;
mod integrator;
mod joint_map;

pub use arm::{generate_reference, simulate_arm, ArmGains, ArmRunConfig, Reference, TwoLinkArm};
pub use integrator::{
    simulate_integrator, step_euler, step_rk4, IntegratorConfig, Method, Outcome, SimOptions, Trajectory,
};
pub use joint_map::{arm_collides, map_task_obstacle_to_joint_space, JointMapConfig, JointMapStats, JointObstacleMap, TaskDisc};
