//! The five subcommands. Each writes its artifacts under the output
//! directory and returns its report; nothing here reads the clock.

use std::path::{Path, PathBuf};

use densnav_core::baseline_nf::{run_comparison, ComparisonRow, Method as CompareMethod};
use densnav_core::dynamics::{generate_reference, simulate_arm};
use densnav_core::verify::{
    alpha_sweep, convergence_monte_carlo, divergence_check, divergence_field, gradient_audit, occupancy_audit,
    run_batch, sample_initial_set, summarize_runs, ConvergenceStats, DivergenceOptions, GridSpec, OccupancyReport,
    VerificationReport,
};
use densnav_core::{
    derive_seed, theta_bound, wrap_angle, CompensatedSum, DensityParams, Environment, Outcome, Region, StateVector,
    ThetaBound, Trajectory,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::output::{ensure_dir, num, write_csv, write_json, write_text};
use crate::plot::{draw_density_levels, draw_obstacles, draw_path, draw_target, lift, plane_box};
use crate::scenario::{IcSpec, Scenario};
use crate::svg::{diverging, Frame, ScalarGrid, Svg, DARK, GRAY, GREEN};

const PLOT_GRID: usize = 200;

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub seed: u64,
    pub dt_override: Option<f64>,
}

/// The scenario with `--dt-override` applied, revalidated.
pub fn effective(scenario: &Scenario, opts: &Options) -> Result<Scenario> {
    let mut s = scenario.clone();
    if let Some(dt) = opts.dt_override {
        s.integrator.dt = dt;
        s.validate()?;
    }
    Ok(s)
}

fn region_label(env: &Environment<f64>, x: &[f64]) -> &'static str {
    let mut label = "free";
    for o in &env.obstacles {
        match o.region_in(x, env.mode) {
            Region::Unsafe => return "unsafe",
            Region::Sensing => label = "sensing",
            Region::Free => {}
        }
    }
    label
}

fn h_min(env: &Environment<f64>, x: &[f64]) -> f64 {
    if env.obstacles.is_empty() {
        f64::INFINITY
    } else {
        env.h_min(x)
    }
}

/// `t, x1..xn, u1..un, h_min, region`
pub fn write_trajectory_csv(path: &Path, env: &Environment<f64>, t: &Trajectory<f64>) -> Result<()> {
    let n = env.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("u{i}")));
    header.push("h_min".into());
    header.push("region".into());
    let rows = t.times.iter().zip(&t.states).zip(&t.controls).map(|((&time, x), u)| {
        let mut r = vec![num(time)];
        r.extend(x.iter().map(|&v| num(v)));
        r.extend(u.iter().map(|&v| num(v)));
        r.push(num(h_min(env, x.as_slice())));
        r.push(region_label(env, x.as_slice()).to_string());
        r
    });
    write_csv(path, &header, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    pub stats: ConvergenceStats,
}

pub fn cmd_run(scenario: &Scenario, opts: &Options) -> Result<RunReport> {
    let s = effective(scenario, opts)?;
    let env = s.working_environment()?;
    let params = s.density_params()?;
    let ctrl = s.controller_config()?;
    let cfg = s.integrator_config()?;
    let ics = s.initial_conditions(&env)?;
    let results = run_batch(&env, params, &ctrl, &cfg, &ics, opts.seed, false);
    let stats = summarize_runs(&ics, &results);

    ensure_dir(&opts.out)?;
    let dir = opts.out.join("trajectories");
    ensure_dir(&dir)?;
    for (i, (r, _)) in results.iter().enumerate() {
        if let Ok(t) = r {
            write_trajectory_csv(&dir.join(format!("traj_{i:04}.csv")), &env, t)?;
        }
    }
    if env.dim() >= 2 {
        let (lo, hi) = plane_box(&env);
        let mut svg = Svg::new(640.0, 660.0);
        let f = Frame::fit(lo, hi, 20.0, 40.0, 600.0, 600.0);
        draw_density_levels(&mut svg, &f, &env, params, PLOT_GRID);
        draw_obstacles(&mut svg, &f, &env, PLOT_GRID);
        for (r, _) in &results {
            if let Ok(t) = r {
                draw_path(&mut svg, &f, &t.states, t.outcome == Outcome::Converged);
            }
        }
        svg.border(&f);
        svg.text(
            20.0,
            26.0,
            14.0,
            &format!("{}: {}/{} converged", s.name, stats.converged, stats.runs),
        );
        write_text(&opts.out.join("plot.svg"), &svg.finish())?;
    }
    let report = RunReport {
        scenario: s.name.clone(),
        seed: opts.seed,
        dt: cfg.dt,
        stats,
    };
    write_json(&opts.out.join("summary.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub scenario: String,
    pub report: VerificationReport,
    pub theta_bounds: Vec<ThetaBound>,
    pub environment_violations: Vec<String>,
}

pub fn cmd_verify(scenario: &Scenario, opts: &Options, grid_override: Option<usize>) -> Result<VerifyOutput> {
    let s = effective(scenario, opts)?;
    let v = s.verify.clone().unwrap_or_default();
    let env = s.working_environment()?;
    let params = s.density_params()?;
    let n = env.dim();
    let lo = v.grid_lo.clone().unwrap_or_else(|| env.domain.lo.clone());
    let hi = v.grid_hi.clone().unwrap_or_else(|| env.domain.hi.clone());
    let grid = GridSpec::new(lo, hi, grid_override.unwrap_or(v.grid_resolution)).map_err(CliError::core("verify.grid"))?;
    let mut dopts = DivergenceOptions::for_grid(&grid, env.delta);
    if let Some(b) = v.band {
        dopts.band = b;
        dopts.fd_step = (b / 4.0).min(1e-3);
    }
    if let Some(t) = v.target_exclusion {
        dopts.target_exclusion = t;
    }
    let main = DensityParams::new(v.alpha.unwrap_or(params.alpha), params.theta, params.distance)
        .map_err(CliError::core("verify.alpha"))?;
    let x0 = sample_initial_set(&env, v.x0_samples, derive_seed(opts.seed, 0));
    let divergence = divergence_check(&env, main, &grid, &dopts, &x0).map_err(CliError::core("divergence"))?;
    let sweep = alpha_sweep(&env, params, &v.alphas, &grid, &dopts, &x0).map_err(CliError::core("alpha sweep"))?;
    let gradient = gradient_audit(&env, params, v.gradient_points, derive_seed(opts.seed, 1), v.gradient_band, false)
        .map_err(CliError::core("gradient audit"))?;

    let needs_runs = v.convergence || v.occupancy;
    let (convergence, occupancy) = if needs_runs {
        let ctrl = s.controller_config()?;
        let cfg = s.integrator_config()?;
        let ics = s.initial_conditions(&env)?;
        let conv = v
            .convergence
            .then(|| convergence_monte_carlo(&env, params, &ctrl, &cfg, &ics, opts.seed));
        let occ: Option<OccupancyReport> = if v.occupancy {
            Some(
                occupancy_audit(
                    &env,
                    params,
                    &ctrl,
                    &cfg,
                    &ics,
                    s.initial_conditions.measure(),
                    opts.seed,
                    v.bound_samples,
                    false,
                )
                .map_err(CliError::core("occupancy audit"))?,
            )
        } else {
            None
        };
        (conv, occ)
    } else {
        (None, None)
    };
    let theta_bounds = (0..env.obstacles.len())
        .map(|j| theta_bound(&env, params.distance, j, 1.0, v.bound_samples, derive_seed(opts.seed, 2 + j as u64)))
        .collect::<densnav_core::Result<Vec<_>>>()
        .map_err(CliError::core("theta bound"))?;
    let environment_violations = env
        .validate(100_000, derive_seed(opts.seed, u64::MAX))
        .iter()
        .map(|v| v.to_string())
        .collect();

    ensure_dir(&opts.out)?;
    if n == 2 {
        let field = divergence_field(&env, main, &grid, &dopts);
        write_text(&opts.out.join("divergence.svg"), &divergence_svg(&env, &grid, &field, main.alpha))?;
    }
    let out = VerifyOutput {
        scenario: s.name.clone(),
        report: VerificationReport {
            seed: opts.seed,
            divergence,
            alpha_sweep: sweep,
            convergence,
            occupancy,
            gradient,
        },
        theta_bounds,
        environment_violations,
    };
    write_json(&opts.out.join("report.json"), &out)?;
    Ok(out)
}

/// Heat map of `div / scale`: blue where the inequality holds, red where
/// it fails, grey in the exclusion bands.
fn divergence_svg(env: &Environment<f64>, grid: &GridSpec, field: &[Option<(f64, f64)>], alpha: f64) -> String {
    let lo = [grid.lo[0], grid.lo[1]];
    let hi = [grid.hi[0], grid.hi[1]];
    let mut svg = Svg::new(640.0, 660.0);
    let f = Frame::fit(lo, hi, 20.0, 40.0, 600.0, 600.0);
    let res = grid.resolution;
    let (cw, ch) = (f.w / res as f64, f.h / res as f64);
    let colour = |k: usize| -> String {
        match field[k] {
            None => "#e0e0e0".to_string(),
            Some((d, sc)) => {
                if sc > 0.0 {
                    diverging((d / sc) * 5.0)
                } else {
                    diverging(0.0)
                }
            }
        }
    };
    for j in 0..res {
        let mut i = 0;
        while i < res {
            let c = colour(j * res + i);
            let start = i;
            while i < res && colour(j * res + i) == c {
                i += 1;
            }
            svg.rect(
                f.x0 + start as f64 * cw,
                f.y0 + (res - 1 - j) as f64 * ch,
                (i - start) as f64 * cw,
                ch,
                &c,
            );
        }
    }
    for o in &env.obstacles {
        let h = ScalarGrid::sample(lo, hi, PLOT_GRID, |p| o.h.eval_in(&lift(env, p), env.mode).unwrap_or(f64::NAN));
        svg.segments(&f, &h.contour(0.0), DARK, 1.2, None);
        let s = ScalarGrid::sample(lo, hi, PLOT_GRID, |p| o.s.eval_in(&lift(env, p), env.mode).unwrap_or(f64::NAN));
        svg.segments(&f, &s.contour(0.0), DARK, 0.8, Some("4 3"));
    }
    draw_target(&mut svg, &f, env);
    svg.border(&f);
    svg.text(20.0, 26.0, 14.0, &format!("div(rho grad rho) / scale, alpha = {alpha}"));
    svg.finish()
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub initial_conditions: Vec<Vec<f64>>,
    pub discs: Vec<(Vec<f64>, f64)>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    pub kappas: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub runs: Option<usize>,
}

pub fn cmd_compare_nf(scenario: &Scenario, opts: &Options, args: &CompareArgs) -> Result<CompareReport> {
    let s = effective(scenario, opts)?;
    let spec = s
        .comparison
        .clone()
        .ok_or_else(|| CliError::Invalid {
            field: "comparison".into(),
            message: "section missing; compare-nf needs a c_shape scenario".into(),
        })?;
    let setup = s.comparison_setup()?;
    let kappas = args.kappas.clone().unwrap_or(spec.kappas.clone());
    let radii = args.radii.clone().unwrap_or(spec.radii.clone());
    let ic_spec = match args.runs {
        Some(n) => s.initial_conditions.with_count(n),
        None => s.initial_conditions.clone(),
    };
    let ics = match &ic_spec {
        IcSpec::Cavity {
            center,
            radius,
            count,
            seed,
        } if center.len() == 2 => setup
            .sample_cavity([center[0], center[1]], *radius, *count, *seed)
            .map_err(CliError::core("initial_conditions"))?,
        _ => {
            let mut t = s.clone();
            t.initial_conditions = ic_spec.clone();
            t.initial_conditions(&setup.density_environment(radii.first().copied().unwrap_or(1.0)).map_err(CliError::core("comparison"))?)?
        }
    };
    let result = run_comparison(&setup, &kappas, &radii, &ics).map_err(CliError::core("comparison"))?;

    ensure_dir(&opts.out)?;
    let header: Vec<String> = [
        "method",
        "parameter",
        "runs",
        "converged",
        "trapped",
        "unsafe_entered",
        "failed",
        "fraction_converged",
        "fraction_trapped",
        "mean_path_length",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows = result.rows.iter().map(|r| {
        vec![
            match r.method {
                CompareMethod::Density => "density".to_string(),
                CompareMethod::Nf => "nf".to_string(),
            },
            num(r.parameter),
            r.runs.to_string(),
            r.converged.to_string(),
            r.trapped.to_string(),
            r.unsafe_entered.to_string(),
            r.failed.to_string(),
            num(r.fraction_converged),
            num(r.fraction_trapped),
            num(r.mean_path_length),
        ]
    });
    write_csv(&opts.out.join("comparison.csv"), &header, rows)?;

    // panels: one per row, two per line
    let cols = 2usize;
    let nrows = result.rows.len().div_ceil(cols).max(1);
    let mut svg = Svg::new(20.0 + 420.0 * cols as f64, 20.0 + 440.0 * nrows as f64);
    let (lo, hi) = plane_box(&setup.density_environment(radii.first().copied().unwrap_or(1.0)).map_err(CliError::core("comparison"))?);
    for (k, (row, runs)) in result.rows.iter().zip(&result.trajectories).enumerate() {
        let x0 = 20.0 + 420.0 * (k % cols) as f64;
        let y0 = 20.0 + 440.0 * (k / cols) as f64;
        let f = Frame::fit(lo, hi, x0, y0 + 30.0, 400.0, 400.0);
        let title = match row.method {
            CompareMethod::Density => {
                let env = setup.density_environment(row.parameter).map_err(CliError::core("comparison"))?;
                draw_obstacles(&mut svg, &f, &env, PLOT_GRID);
                format!("density, sensing r = {}", row.parameter)
            }
            CompareMethod::Nf => {
                let env = setup.density_environment(radii.first().copied().unwrap_or(1.0)).map_err(CliError::core("comparison"))?;
                let h = ScalarGrid::sample(lo, hi, PLOT_GRID, |p| {
                    env.obstacles[0].h.eval_in(&StateVector::from(p.to_vec()), env.mode).unwrap_or(f64::NAN)
                });
                svg.fill_negative(&f, &h, GRAY);
                for (c, r) in &setup.world.obstacles {
                    svg.circle(&f, [c[0], c[1]], *r, "none", DARK, Some("3 2"));
                }
                draw_target(&mut svg, &f, &env);
                format!("NF, kappa = {}", row.parameter)
            }
        };
        for t in runs.iter().flatten() {
            draw_path(&mut svg, &f, &t.states, t.outcome == Outcome::Converged);
        }
        svg.border(&f);
        svg.text(x0, y0 + 20.0, 13.0, &format!("{title}: {}/{} converged", row.converged, row.runs));
    }
    write_text(&opts.out.join("comparison.svg"), &svg.finish())?;

    let report = CompareReport {
        scenario: s.name.clone(),
        initial_conditions: ics.iter().map(|x| x.to_f64()).collect(),
        discs: setup.world.obstacles.clone(),
        rows: result.rows,
    };
    write_json(&opts.out.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    pub scenario: String,
    pub outcome: Outcome,
    pub goal: Vec<f64>,
    pub final_q: [f64; 2],
    pub final_qdot: [f64; 2],
    /// Wrapped joint distance from the final configuration to the goal.
    pub final_error: f64,
    pub plan_outcome: Outcome,
    pub plan_duration: f64,
    pub occupancy_time_unsafe: Vec<f64>,
    pub min_h: f64,
    pub max_torque: f64,
    pub samples: usize,
    pub joint_circles: Vec<([f64; 2], f64)>,
    pub notices: Vec<String>,
}

pub fn cmd_arm(scenario: &Scenario, opts: &Options) -> Result<ArmReport> {
    let s = effective(scenario, opts)?;
    let p = s.arm_problem()?;
    let params = s.density_params()?;
    let ctrl = s.controller_config()?;
    let cfg = s.integrator_config()?;
    let reference = generate_reference(&p.env, params, &ctrl, &cfg, p.q0).map_err(CliError::core("reference"))?;
    let traj = simulate_arm(&p.arm, &p.gains, &p.env, params, &reference, &p.run, p.q0, p.qdot0)
        .map_err(CliError::core("arm simulation"))?;
    let fs = traj.final_state.to_f64();
    let goal = p.env.target.to_f64();
    let final_error = (wrap_angle(fs[0] - goal[0]).powi(2) + wrap_angle(fs[1] - goal[1]).powi(2)).sqrt();

    ensure_dir(&opts.out)?;
    let hdr = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    write_csv(
        &opts.out.join("states.csv"),
        &hdr(&["t", "q1", "q2", "qdot1", "qdot2", "h_min", "region"]),
        traj.times.iter().zip(&traj.states).map(|(&t, x)| {
            let q = &x.as_slice()[..2];
            let mut r = vec![num(t)];
            r.extend(x.iter().map(|&v| num(v)));
            r.push(num(h_min(&p.env, q)));
            r.push(region_label(&p.env, q).to_string());
            r
        }),
    )?;
    write_csv(
        &opts.out.join("torques.csv"),
        &hdr(&["t", "tau1", "tau2"]),
        traj.times
            .iter()
            .zip(&traj.controls)
            .map(|(&t, u)| vec![num(t), num(u[0]), num(u[1])]),
    )?;
    write_csv(
        &opts.out.join("reference.csv"),
        &hdr(&["t", "q1", "q2", "qdot1", "qdot2", "qddot1", "qddot2"]),
        (0..reference.q.len()).map(|i| {
            let t = reference.spacing * i as f64;
            let (q, qd, qdd) = (reference.q[i], reference.qd[i], reference.qdd[i]);
            vec![num(t), num(q[0]), num(q[1]), num(qd[0]), num(qd[1]), num(qdd[0]), num(qdd[1])]
        }),
    )?;

    // joint-space picture
    {
        let pi = std::f64::consts::PI;
        let mut svg = Svg::new(640.0, 660.0);
        let f = Frame::fit([-pi, -pi], [pi, pi], 20.0, 40.0, 600.0, 600.0);
        draw_obstacles(&mut svg, &f, &p.env, PLOT_GRID);
        let split = |pts: &[[f64; 2]]| -> Vec<Vec<[f64; 2]>> {
            // break the path where it wraps around the torus
            let mut out: Vec<Vec<[f64; 2]>> = vec![Vec::new()];
            for w in pts {
                if let Some(last) = out.last().unwrap().last() {
                    if (w[0] - last[0]).abs() > pi || (w[1] - last[1]).abs() > pi {
                        out.push(Vec::new());
                    }
                }
                out.last_mut().unwrap().push(*w);
            }
            out
        };
        let refq: Vec<[f64; 2]> = reference.q.iter().map(|q| [wrap_angle(q[0]), wrap_angle(q[1])]).collect();
        for part in split(&refq) {
            svg.polyline(&f, &part, GREEN, 1.0, 2000);
        }
        let q: Vec<[f64; 2]> = traj.states.iter().map(|x| [x[0], x[1]]).collect();
        for part in split(&q) {
            svg.polyline(&f, &part, crate::svg::BLUE, 1.2, 2000);
        }
        svg.border(&f);
        svg.text(20.0, 26.0, 14.0, &format!("{}: joint space, {:?}", s.name, traj.outcome));
        write_text(&opts.out.join("joint_plot.svg"), &svg.finish())?;
    }

    let frames_dir = opts.out.join("frames");
    ensure_dir(&frames_dir)?;
    let nframes = s.arm.as_ref().map(|a| a.frames).unwrap_or(0);
    let reach = p.arm.reach() * 1.15;
    for k in 0..nframes {
        let i = if nframes == 1 {
            traj.states.len() - 1
        } else {
            k * (traj.states.len() - 1) / (nframes - 1)
        };
        let x = &traj.states[i];
        let mut svg = Svg::new(440.0, 460.0);
        let f = Frame::fit([-reach, -reach], [reach, reach], 20.0, 40.0, 400.0, 400.0);
        for d in &p.discs {
            svg.circle(&f, d.center, d.radius, GRAY, DARK, None);
        }
        let ghost = p.arm.link_points([goal[0], goal[1]]);
        svg.line(&f, ghost[0], ghost[1], "#b7dfb9", 4.0);
        svg.line(&f, ghost[1], ghost[2], "#b7dfb9", 4.0);
        let pts = p.arm.link_points([x[0], x[1]]);
        svg.line(&f, pts[0], pts[1], crate::svg::BLUE, 5.0);
        svg.line(&f, pts[1], pts[2], crate::svg::BLUE, 5.0);
        for q in pts {
            svg.dot(&f, q, 4.0, DARK);
        }
        svg.border(&f);
        svg.text(20.0, 26.0, 14.0, &format!("t = {:.3}", traj.times[i]));
        write_text(&frames_dir.join(format!("frame_{k:03}.svg")), &svg.finish())?;
    }

    let report = ArmReport {
        scenario: s.name.clone(),
        outcome: traj.outcome,
        goal,
        final_q: [fs[0], fs[1]],
        final_qdot: [fs[2], fs[3]],
        final_error,
        plan_outcome: reference.planning.outcome,
        plan_duration: reference.duration(),
        occupancy_time_unsafe: traj.occupancy_time_unsafe.clone(),
        min_h: traj.min_h,
        max_torque: traj.max_control,
        samples: traj.states.len(),
        joint_circles: p.circles.clone(),
        notices: p.notices.clone(),
    };
    write_json(&opts.out.join("summary.json"), &report)?;
    Ok(report)
}

/// Values swept per axis; `None` keeps the scenario's value.
#[derive(Debug, Clone, Default)]
pub struct SweepGrid {
    pub alphas: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub margins: Option<Vec<f64>>,
    pub u_maxes: Option<Vec<f64>>,
}

impl SweepGrid {
    /// No axis given means no cells.
    pub fn is_empty(&self) -> bool {
        [&self.alphas, &self.thetas, &self.margins, &self.u_maxes]
            .iter()
            .all(|a| a.as_ref().is_none_or(|v| v.is_empty()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub theta: f64,
    pub margin: Option<f64>,
    pub u_max: Option<f64>,
    pub runs: usize,
    pub converged: usize,
    pub fraction_converged: f64,
    pub mean_path_length: f64,
    pub mean_min_clearance: f64,
    pub error: Option<String>,
}

fn sweep_cell(s: &Scenario, seed: u64) -> Result<ConvergenceStats> {
    s.validate()?;
    let env = s.working_environment()?;
    let ics = s.initial_conditions(&env)?;
    Ok(convergence_monte_carlo(
        &env,
        s.density_params()?,
        &s.controller_config()?,
        &s.integrator_config()?,
        &ics,
        seed,
    ))
}

pub fn cmd_sweep(scenario: &Scenario, opts: &Options, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let s = effective(scenario, opts)?;
    let axis = |v: &Option<Vec<f64>>, default: Option<f64>| -> Vec<Option<f64>> {
        match v {
            Some(v) => v.iter().map(|x| Some(*x)).collect(),
            None => vec![default],
        }
    };
    let mut rows = Vec::new();
    if !grid.is_empty() {
        for a in axis(&grid.alphas, Some(s.density.alpha)) {
            for th in axis(&grid.thetas, Some(s.density.theta)) {
                for m in axis(&grid.margins, None) {
                    for u in axis(&grid.u_maxes, s.controller.u_max) {
                        let mut c = s.clone();
                        c.density.alpha = a.unwrap();
                        c.density.theta = th.unwrap();
                        if let Some(m) = m {
                            for o in &mut c.obstacles {
                                o.sensing = None;
                                o.margin = Some(m);
                            }
                        }
                        c.controller.u_max = u;
                        let (stats, error) = match sweep_cell(&c, opts.seed) {
                            Ok(st) => (Some(st), None),
                            Err(e) => (None, Some(e.to_string())),
                        };
                        let (runs, converged, frac, len, clear) = match &stats {
                            Some(st) => {
                                let done: Vec<f64> = st
                                    .runs_detail
                                    .iter()
                                    .filter(|d| d.outcome.is_some())
                                    .map(|d| d.min_h)
                                    .collect();
                                let sum: CompensatedSum = done.iter().copied().collect();
                                let clear = if done.is_empty() { f64::NAN } else { sum.value() / done.len() as f64 };
                                (st.runs, st.converged, st.fraction_converged, st.mean_path_length, clear)
                            }
                            None => (0, 0, f64::NAN, f64::NAN, f64::NAN),
                        };
                        rows.push(SweepRow {
                            alpha: c.density.alpha,
                            theta: c.density.theta,
                            margin: m,
                            u_max: u,
                            runs,
                            converged,
                            fraction_converged: frac,
                            mean_path_length: len,
                            mean_min_clearance: clear,
                            error,
                        });
                    }
                }
            }
        }
    }
    ensure_dir(&opts.out)?;
    let header: Vec<String> = [
        "alpha",
        "theta",
        "margin",
        "u_max",
        "runs",
        "converged",
        "fraction_converged",
        "mean_path_length",
        "mean_min_clearance",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    write_csv(
        &opts.out.join("sweep.csv"),
        &header,
        rows.iter().map(|r| {
            vec![
                num(r.alpha),
                num(r.theta),
                opt(r.margin),
                opt(r.u_max),
                r.runs.to_string(),
                r.converged.to_string(),
                num(r.fraction_converged),
                num(r.mean_path_length),
                num(r.mean_min_clearance),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    Ok(rows)
}
