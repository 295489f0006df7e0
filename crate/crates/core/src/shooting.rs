//! Neural shooting for the Euler-Lagrange two-point problem: learn the map
//! from endpoint to initial velocity, then pick the reachable target on the
//! cycle whose path has least action.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{action, el_rhs_raw, ActionReport};
use crate::dynamics::{carbon_portrait, discretize_cycle, step, step_count, LimitCycle, Path, PhasePortrait, Scheme, BLOWUP_LIMIT};
use crate::error::{Error, Result};
use crate::model::{CarbonParams, CarbonSystem, State, System};
use crate::nn::{train, Mlp, ModelFile, Normalizer, TrainReport};
use crate::rng::{derive, shuffle, stream, uniform_in};

pub const SHOOT_LAYERS: [usize; 5] = [2, 8, 16, 8, 2];

/// Default retention band as a fraction of the cycle's bounding-box diagonal.
pub const DEFAULT_MARGIN_FRACTION: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityBox {
    pub center: [f64; 2],
    pub half: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    /// Reachability threshold in state units.
    pub epsilon: f64,
    pub n_targets: usize,
    /// `None` calibrates the box with a pilot run.
    pub velocity_box: Option<VelocityBox>,
    /// Initial velocities drawn for the dataset.
    pub n_samples: usize,
    pub dt: f64,
    pub scheme: Scheme,
    /// Endpoint retention band around the cycle; `None` takes 0.25% of the
    /// cycle's bounding-box diagonal.
    pub annulus_margin: Option<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub holdout: f64,
    /// Newton refinement of predicted velocities.
    pub refine: bool,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            epsilon: 0.5,
            n_targets: 3600,
            velocity_box: None,
            n_samples: 4000,
            dt: 1e-3,
            scheme: Scheme::Euler,
            annulus_margin: None,
            epochs: 3000,
            lr: 1e-3,
            holdout: 0.2,
            refine: false,
        }
    }
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.n_samples < 100 {
            return Err(Error::Config(format!("n_samples must be >= 100, got {}", self.n_samples)));
        }
        if self.n_targets < 4 {
            return Err(Error::Config(format!("n_targets must be >= 4, got {}", self.n_targets)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::Config(format!("holdout must be in [0, 1), got {}", self.holdout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootRecord {
    pub v0: [f64; 2],
    pub end: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootDataset {
    pub records: Vec<ShootRecord>,
    pub z_star: State,
    pub horizon: f64,
    /// Carbon forcing, when the system is the carbon model.
    pub nu: Option<f64>,
    pub dt: f64,
    pub scheme: Scheme,
    pub velocity_box: VelocityBox,
    pub annulus_margin: f64,
    pub attempted: usize,
}

impl ShootDataset {
    pub fn retention(&self) -> f64 {
        self.records.len() as f64 / self.attempted as f64
    }
}

fn el_field<S: System>(sys: &S) -> impl Fn([f64; 4]) -> [f64; 4] + '_ {
    move |y: [f64; 4]| {
        let a = el_rhs_raw(sys, [y[0], y[1]], [y[2], y[3]]);
        [y[2], y[3], a[0], a[1]]
    }
}

fn check_el_state<S: System>(sys: &S, y: &[f64; 4], t: f64) -> Result<()> {
    if !sys.in_domain([y[0], y[1]]) || y[0].is_nan() {
        return Err(Error::MetricSingular { c: y[0], t: Some(t) });
    }
    if y.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LIMIT) {
        return Err(Error::Divergence { t });
    }
    Ok(())
}

/// Endpoint `(x, y, vx, vy)` of the Euler-Lagrange Cauchy problem.
pub fn shoot<S: System>(sys: &S, z0: State, v0: [f64; 2], horizon: f64, dt: f64, scheme: Scheme) -> Result<[f64; 4]> {
    let n = step_count(horizon, dt)?;
    let f = el_field(sys);
    let mut y = [z0.c, z0.w, v0[0], v0[1]];
    check_el_state(sys, &y, 0.0)?;
    for i in 1..=n {
        y = step(scheme, y, dt, &f);
        check_el_state(sys, &y, dt * i as f64)?;
    }
    Ok(y)
}

/// Integrate `(ż, v̇) = (v, el_rhs(z, v))`, keeping positions and velocities.
pub fn integrate_el<S: System>(
    sys: &S,
    z0: State,
    v0: [f64; 2],
    horizon: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Path> {
    let n = step_count(horizon, dt)?;
    let f = el_field(sys);
    let mut y = [z0.c, z0.w, v0[0], v0[1]];
    check_el_state(sys, &y, 0.0)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut vel = Vec::with_capacity(n + 1);
    states.push(z0);
    vel.push(v0);
    for i in 1..=n {
        y = step(scheme, y, dt, &f);
        check_el_state(sys, &y, dt * i as f64)?;
        states.push(State::new(y[0], y[1]));
        vel.push([y[2], y[3]]);
    }
    let mut p = Path::new(0.0, dt, states);
    p.velocities = Some(vel);
    Ok(p)
}

/// Euclidean distance from `p` to the closed polyline.
pub fn distance_to_polyline(poly: &[State], p: State) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (dx, dy) = (b.c - a.c, b.w - a.w);
        let len2 = dx * dx + dy * dy;
        let s = if len2 > 0.0 { (((p.c - a.c) * dx + (p.w - a.w) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = (p.c - a.c - s * dx).hypot(p.w - a.w - s * dy);
        best = best.min(d);
    }
    best
}

fn bbox_diagonal(poly: &[State]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        lo = [lo[0].min(p.c), lo[1].min(p.w)];
        hi = [hi[0].max(p.c), hi[1].max(p.w)];
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

/// Center the box on the modified drift at `z*` and size each axis from the
/// smallest velocity offset whose endpoint leaves the cycle, found by
/// doubling then bisection along ±vx and ±vy.
pub fn calibrate_velocity_box<S: System>(
    sys: &S,
    z_star: State,
    cycle: &LimitCycle,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<VelocityBox> {
    let center = crate::action::modified_drift(sys, z_star)?;
    let inside = |v: [f64; 2]| match shoot(sys, z_star, v, horizon, dt, scheme) {
        Ok(y) => cycle.contains(State::new(y[0], y[1])),
        Err(_) => false,
    };
    if !inside(center) {
        return Err(Error::NoConvergence("drift-velocity shot already leaves the cycle; cannot calibrate".into()));
    }
    let dirs = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    let radii: Vec<Result<f64>> = dirs
        .par_iter()
        .map(|d| {
            let at = |r: f64| [center[0] + r * d[0], center[1] + r * d[1]];
            let mut lo = 0.0;
            let mut hi = 1.0;
            while inside(at(hi)) {
                lo = hi;
                hi *= 2.0;
                if hi > 1e7 {
                    return Err(Error::NoConvergence("no velocity along an axis leaves the cycle".into()));
                }
            }
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                if inside(at(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(hi)
        })
        .collect();
    let r: Vec<f64> = radii.into_iter().collect::<Result<_>>()?;
    Ok(VelocityBox { center, half: [1.25 * r[0].max(r[1]), 1.25 * r[2].max(r[3])] })
}

/// Sample initial velocities uniformly in the box, integrate, and keep the
/// records whose endpoint lands within the margin of the cycle.
pub fn generate_dataset<S: System>(
    sys: &S,
    z_star: State,
    cycle: &LimitCycle,
    horizon: f64,
    cfg: &ShootConfig,
    seed: u64,
) -> Result<ShootDataset> {
    cfg.validate()?;
    let vbox = match cfg.velocity_box {
        Some(b) => b,
        None => calibrate_velocity_box(sys, z_star, cycle, horizon, cfg.dt, cfg.scheme)?,
    };
    let margin = cfg.annulus_margin.unwrap_or(DEFAULT_MARGIN_FRACTION * bbox_diagonal(&cycle.points));
    let sample_seed = derive(seed, 0);
    let records: Vec<Option<ShootRecord>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(sample_seed, i as u64);
            let v0 = [
                uniform_in(&mut rng, vbox.center[0] - vbox.half[0], vbox.center[0] + vbox.half[0]),
                uniform_in(&mut rng, vbox.center[1] - vbox.half[1], vbox.center[1] + vbox.half[1]),
            ];
            let y = shoot(sys, z_star, v0, horizon, cfg.dt, cfg.scheme).ok()?;
            let end = State::new(y[0], y[1]);
            (distance_to_polyline(&cycle.points, end) <= margin).then_some(ShootRecord { v0, end })
        })
        .collect();
    let records: Vec<ShootRecord> = records.into_iter().flatten().collect();
    let ds = ShootDataset {
        records,
        z_star,
        horizon,
        nu: None,
        dt: cfg.dt,
        scheme: cfg.scheme,
        velocity_box: vbox,
        annulus_margin: margin,
        attempted: cfg.n_samples,
    };
    if ds.retention() < 0.01 {
        return Err(Error::LowRetention { fraction: ds.retention() });
    }
    Ok(ds)
}

/// Endpoint-to-velocity regressor with its normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootModel {
    pub mlp: Mlp,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
    pub report: TrainReport,
    /// Normalized MSE on the held-out split.
    pub val_nmse: Option<f64>,
    /// Set when the held-out error exceeds 0.1.
    pub warning: Option<String>,
}

impl ShootModel {
    pub fn predict(&self, target: State) -> [f64; 2] {
        let x = self.input_norm.apply(&[target.c, target.w]);
        let y = self.mlp.forward(&x).expect("2-input network");
        let v = self.output_norm.invert(&y);
        [v[0], v[1]]
    }

    pub fn to_file(&self) -> ModelFile {
        self.mlp.to_file(Some((&self.input_norm, &self.output_norm)))
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        let mlp = Mlp::from_file(f)?;
        if mlp.n_in() != 2 || mlp.n_out() != 2 {
            return Err(Error::Shape("shooting model must map 2 -> 2".into()));
        }
        Ok(ShootModel {
            mlp,
            input_norm: f.input_norm.clone().unwrap_or_else(|| Normalizer::identity(2)),
            output_norm: f.output_norm.clone().unwrap_or_else(|| Normalizer::identity(2)),
            report: TrainReport { epochs: 0, train_loss: f64::NAN, val_loss: None, history: vec![] },
            val_nmse: None,
            warning: None,
        })
    }
}

/// Train the 2-8-16-8-2 regressor on a shuffled split, with inputs and
/// targets normalized by training-set statistics.
pub fn train_shoot_net(ds: &ShootDataset, cfg: &ShootConfig, seed: u64) -> Result<ShootModel> {
    if ds.records.len() < 100 {
        return Err(Error::Config(format!("need >= 100 records to train, got {}", ds.records.len())));
    }
    let mut idx: Vec<usize> = (0..ds.records.len()).collect();
    shuffle(&mut stream(derive(seed, 2), 0), &mut idx);
    let n_val = (cfg.holdout * idx.len() as f64).round() as usize;
    let (val_idx, train_idx) = idx.split_at(n_val);
    let rows = |ix: &[usize], f: &dyn Fn(&ShootRecord) -> Vec<f64>| ix.iter().map(|&i| f(&ds.records[i])).collect::<Vec<_>>();
    let end = |r: &ShootRecord| vec![r.end.c, r.end.w];
    let vel = |r: &ShootRecord| vec![r.v0[0], r.v0[1]];
    let (xt, yt) = (rows(train_idx, &end), rows(train_idx, &vel));
    let (xv, yv) = (rows(val_idx, &end), rows(val_idx, &vel));
    let input_norm = Normalizer::fit(&xt);
    let output_norm = Normalizer::fit(&yt);
    let norm = |n: &Normalizer, r: &[Vec<f64>]| r.iter().map(|x| n.apply(x)).collect::<Vec<_>>();
    let (xt, yt) = (norm(&input_norm, &xt), norm(&output_norm, &yt));
    let (xv, yv) = (norm(&input_norm, &xv), norm(&output_norm, &yv));
    let mut mlp = Mlp::new(&SHOOT_LAYERS, derive(seed, 1))?;
    let report = train(&mut mlp, &xt, &yt, Some((&xv, &yv)), cfg.epochs, cfg.lr)?;
    let val_nmse = report.val_loss;
    let warning = val_nmse
        .filter(|&v| v > 0.1)
        .map(|v| format!("validation normalized MSE {v:.4} exceeds 0.1"));
    Ok(ShootModel { mlp, input_norm, output_norm, report, val_nmse, warning })
}

pub fn predict_velocity(model: &ShootModel, target: State) -> [f64; 2] {
    model.predict(target)
}

/// Eq.-style reachability: strictly closer than `epsilon`.
pub fn reachable(path: &Path, target: State, epsilon: f64) -> bool {
    path.endpoint().distance(target) < epsilon
}

/// Newton iterations on `endpoint(v0) − target` with a finite-difference
/// Jacobian; returns the best velocity seen.
pub fn refine_velocity<S: System>(
    sys: &S,
    z0: State,
    target: State,
    v0: [f64; 2],
    horizon: f64,
    dt: f64,
    scheme: Scheme,
    tol: f64,
) -> [f64; 2] {
    let resid = |v: [f64; 2]| -> Option<[f64; 2]> {
        shoot(sys, z0, v, horizon, dt, scheme).ok().map(|y| [y[0] - target.c, y[1] - target.w])
    };
    let norm = |r: [f64; 2]| r[0].hypot(r[1]);
    let mut v = v0;
    let Some(mut r) = resid(v) else { return v0 };
    for _ in 0..10 {
        if norm(r) < tol {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * v[k].abs().max(1.0);
            let mut vp = v;
            vp[k] += h;
            let Some(rp) = resid(vp) else { return v };
            jac[0][k] = (rp[0] - r[0]) / h;
            jac[1][k] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dv = [(jac[1][1] * r[0] - jac[0][1] * r[1]) / det, (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det];
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let trial = [v[0] - lambda * dv[0], v[1] - lambda * dv[1]];
            if let Some(rt) = resid(trial) {
                if norm(rt) < norm(r) {
                    v = trial;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    v
}

/// One row of the per-target table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub index: usize,
    pub target: State,
    pub v0: [f64; 2],
    pub endpoint: Option<State>,
    pub distance: f64,
    pub reachable: bool,
    pub action: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub winner: ActionReport,
    pub table: Vec<TargetRow>,
}

impl Selection {
    pub fn reachable_count(&self) -> usize {
        self.table.iter().filter(|r| r.reachable).count()
    }
}

/// Integration settings for the per-target shots; the dataset's own, so
/// predicted velocities are replayed under the scheme they were learned from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSettings {
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
}

impl From<&ShootDataset> for ShotSettings {
    fn from(ds: &ShootDataset) -> Self {
        ShotSettings { horizon: ds.horizon, dt: ds.dt, scheme: ds.scheme }
    }
}

/// Reachable row of least action; ties go to the lowest target index.
pub fn select_winner(table: &[TargetRow]) -> Option<&TargetRow> {
    table
        .iter()
        .filter(|r| r.reachable && r.action.is_some())
        .min_by(|a, b| a.action.unwrap().total_cmp(&b.action.unwrap()).then(a.index.cmp(&b.index)))
}

/// For every target on the discretized cycle: predict, integrate, test
/// reachability, score. The winner is the reachable path of least action
/// (lowest index on ties).
pub fn most_probable_path<S: System>(
    sys: &S,
    z_star: State,
    cycle: &LimitCycle,
    model: &ShootModel,
    shot: ShotSettings,
    cfg: &ShootConfig,
) -> Result<Selection> {
    let targets = if cycle.len() == cfg.n_targets { cycle.clone() } else { discretize_cycle(cycle, cfg.n_targets) };
    let table: Vec<TargetRow> = targets
        .points
        .par_iter()
        .enumerate()
        .map(|(index, &target)| {
            let mut v0 = model.predict(target);
            if cfg.refine {
                v0 = refine_velocity(sys, z_star, target, v0, shot.horizon, shot.dt, shot.scheme, 1e-3 * cfg.epsilon);
            }
            let mut row = TargetRow { index, target, v0, endpoint: None, distance: f64::INFINITY, reachable: false, action: None };
            if let Ok(y) = shoot(sys, z_star, v0, shot.horizon, shot.dt, shot.scheme) {
                let end = State::new(y[0], y[1]);
                row.endpoint = Some(end);
                row.distance = end.distance(target);
                row.reachable = row.distance < cfg.epsilon;
                if row.reachable {
                    row.action = integrate_el(sys, z_star, v0, shot.horizon, shot.dt, shot.scheme)
                        .and_then(|p| action(sys, &p))
                        .ok();
                    row.reachable = row.action.is_some();
                }
            }
            row
        })
        .collect();
    let Some(best) = select_winner(&table) else {
        let min_distance = table.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
        return Err(Error::NoReachable { min_distance });
    };
    let path = integrate_el(sys, z_star, best.v0, shot.horizon, shot.dt, shot.scheme)?;
    let winner = ActionReport { path, action: best.action.unwrap(), target_index: best.index, reachable: true };
    Ok(Selection { winner, table })
}

/// Everything one run of the shooting pipeline produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub dataset: ShootDataset,
    pub model: ShootModel,
    pub selection: Selection,
}

/// Dataset, training and selection against a precomputed portrait.
pub fn run_pipeline<S: System>(
    sys: &S,
    portrait: &PhasePortrait,
    horizon: f64,
    cfg: &ShootConfig,
    seed: u64,
) -> Result<PipelineRun> {
    let z_star = portrait.fixed_point.location;
    let dataset = generate_dataset(sys, z_star, &portrait.stable, horizon, cfg, seed)?;
    let model = train_shoot_net(&dataset, cfg, seed)?;
    let selection = most_probable_path(sys, z_star, &portrait.stable, &model, ShotSettings::from(&dataset), cfg)?;
    Ok(PipelineRun { dataset, model, selection })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Nu,
    Time,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nu" => Ok(SweepAxis::Nu),
            "time" => Ok(SweepAxis::Time),
            other => Err(Error::Config(format!("unknown sweep axis `{other}` (nu|time)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: f64,
    pub endpoint: Option<State>,
    pub action: Option<f64>,
    pub target_index: Option<usize>,
    pub reachable_count: usize,
    pub error: Option<String>,
}

/// Re-run the whole pipeline for each value on one axis (ν, or the horizon
/// T with ν from `params`). Point `i` is seeded from `(seed, i)`; failures
/// are recorded in their row.
pub fn sweep(
    params: &CarbonParams,
    axis: SweepAxis,
    values: &[f64],
    horizon: f64,
    cfg: &ShootConfig,
    seed: u64,
) -> Vec<SweepRow> {
    values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let (p, t) = match axis {
                SweepAxis::Nu => (params.with_nu(value), horizon),
                SweepAxis::Time => (*params, value),
            };
            let sys = CarbonSystem::new(p);
            let run = carbon_portrait(&sys, cfg.n_targets.max(100))
                .and_then(|portrait| run_pipeline(&sys, &portrait, t, cfg, derive(seed, i as u64)))
                .map(|mut run| {
                    run.dataset.nu = Some(p.nu);
                    run
                });
            match run {
                Ok(run) => {
                    let w = &run.selection.winner;
                    SweepRow {
                        axis: value,
                        endpoint: Some(w.path.endpoint()),
                        action: Some(w.action),
                        target_index: Some(w.target_index),
                        reachable_count: run.selection.reachable_count(),
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    axis: value,
                    endpoint: None,
                    action: None,
                    target_index: None,
                    reachable_count: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
