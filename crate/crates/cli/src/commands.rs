use std::fs;
use std::path::{Path as FsPath, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use transpath::action::{action, stationarity_residual};
use transpath::dynamics::{carbon_portrait, LimitCycle, PhasePortrait, Scheme};
use transpath::io::{self, write_table};
use transpath::nn::ModelFile;
use transpath::pinn::{argmin_time, solve_path_pinn, time_curve, uniform_grid, PinnConfig};
use transpath::sde::{escape_fraction, euler_maruyama, SimConfig};
use transpath::shooting::{
    generate_dataset, most_probable_path, run_pipeline, sweep, train_shoot_net, ShootConfig, ShootModel, ShotSettings,
    SweepAxis,
};
use transpath::{CarbonParams, CarbonSystem, State};

use crate::svg::{self, Mark, Series};
use crate::{Cli, Command, Common, PinnArgs, ShootArgs};

/// What a finished command reports to the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub params: Option<CarbonParams>,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

impl Outcome {
    fn new(params: Option<CarbonParams>) -> Self {
        Outcome { params, files: Vec::new(), summary: Value::Null }
    }

    fn table(&mut self, out: &FsPath, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
        let path = out.join(name);
        write_table(&path, header, rows).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn json(&mut self, out: &FsPath, name: &str, value: &Value) -> Result<PathBuf> {
        let path = out.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn svg(&mut self, out: &FsPath, name: &str, plot: &svg::Plot) -> Result<()> {
        let path = out.join(name);
        fs::write(&path, plot.render()).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }
}

/// Parameters from `--config`: a plain parameter object, or a run manifest
/// whose `params` field is used.
pub fn load_params(path: &FsPath) -> Result<CarbonParams> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let params = match value.get("params") {
        Some(p) if value.get("command").is_some() => p.to_string(),
        _ => text,
    };
    Ok(CarbonParams::from_json_str(&params)?)
}

fn resolve(common: &Common, nu: Option<f64>) -> Result<CarbonParams> {
    let mut p = load_params(&common.config)?;
    if let Some(nu) = nu {
        p = p.with_nu(nu);
    }
    p.validate()?;
    Ok(p)
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(common.out.clone())
}

fn shoot_config(common: &Common, a: &ShootArgs) -> ShootConfig {
    let d = ShootConfig::default();
    ShootConfig {
        epsilon: a.epsilon,
        n_targets: a.targets,
        n_samples: a.samples,
        dt: common.dt.unwrap_or(d.dt),
        scheme: common.scheme.unwrap_or(d.scheme),
        annulus_margin: a.margin,
        epochs: a.epochs,
        refine: a.refine,
        ..d
    }
}

/// `A:B:STEP` with both ends included.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("--values `{spec}` is not A:B:STEP"))?;
    let [a, b, step] = parts[..] else { bail!("--values `{spec}` is not A:B:STEP") };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        bail!("--values `{spec}` needs A <= B and STEP > 0");
    }
    let n = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| a + step * i as f64).map(|v| (v * 1e12).round() / 1e12).collect())
}

/// `A:B` with A < B.
pub fn parse_range(spec: &str) -> Result<(f64, f64)> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("--t-range `{spec}` is not A:B"))?;
    let [a, b] = parts[..] else { bail!("--t-range `{spec}` is not A:B") };
    if !(a > 0.0 && b > a && b.is_finite()) {
        bail!("--t-range `{spec}` needs 0 < A < B");
    }
    Ok((a, b))
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

fn pairs(rows: &[Vec<f64>], x: usize, y: usize) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r[x], r[y])).filter(|p| p.0.is_finite() && p.1.is_finite()).collect()
}

/// Numeric columns of a written CSV; empty cells read as NaN.
fn read_csv(path: &FsPath, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| header.iter().position(|h| h == *n).with_context(|| format!("{}: no column {n}", path.display())))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(idx.iter().map(|&i| rec.get(i).and_then(|s| s.parse().ok()).unwrap_or(f64::NAN)).collect());
    }
    Ok(rows)
}

fn closed(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if let Some(&first) = pts.first() {
        pts.push(first);
    }
    pts
}

fn cycle_series(path: &FsPath, label: &str, color: &'static str) -> Result<Series> {
    let rows = read_csv(path, &["c", "w"])?;
    Ok(Series::line(label, color, closed(pairs(&rows, 0, 1))))
}

fn state_json(s: State) -> Value {
    json!({ "c": s.c, "w": s.w })
}

fn portrait(sys: &CarbonSystem, n: usize) -> Result<PhasePortrait> {
    let p = carbon_portrait(sys, n)?;
    if !p.is_nested() {
        eprintln!("warning: fixed point and cycles are not nested; the configuration may be outside the bistable range");
    }
    Ok(p)
}

fn write_cycles(o: &mut Outcome, out: &FsPath, p: &PhasePortrait) -> Result<(PathBuf, PathBuf)> {
    let s = o.table(out, "stable_cycle.csv", &io::CYCLE_HEADER, io::cycle_rows(&p.stable))?;
    let u = o.table(out, "unstable_cycle.csv", &io::CYCLE_HEADER, io::cycle_rows(&p.unstable))?;
    Ok((s, u))
}

fn pick_target(sys: &CarbonSystem, cycle: &LimitCycle, a: &PinnArgs) -> Result<usize> {
    match (a.target_index, a.phase) {
        (Some(i), _) if i >= cycle.len() => bail!("--target-index {i} out of range (cycle has {} points)", cycle.len()),
        (Some(i), _) => Ok(i),
        (None, Some(f)) => Ok(cycle.index_at_phase(f)),
        (None, None) => Ok(cycle.max_dc_rate_index(sys)),
    }
}

fn pinn_config(a: &PinnArgs, start: State, end: State, horizon: f64) -> PinnConfig {
    PinnConfig { lambda: a.lambda, m: a.m, epochs: a.epochs, ..PinnConfig::new(start, end, horizon) }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let c = &cli.common;
    match &cli.command {
        Command::Analyze { nu, targets } => analyze(c, *nu, *targets),
        Command::Gendata(a) => gendata(c, a),
        Command::Train { dataset, epochs, lr } => train(c, dataset, *epochs, *lr),
        Command::Path { shoot, model, dataset } => path(c, shoot, model.as_deref().zip(dataset.as_deref())),
        Command::Sweep { shoot, axis, values } => run_sweep(c, shoot, axis, values),
        Command::PinnPath { pinn, horizon } => pinn_path(c, pinn, *horizon),
        Command::PinnTime { pinn, t_range, t_count } => pinn_time(c, pinn, t_range, *t_count),
        Command::Simulate { nu, horizon, noise_scale, runs } => simulate(c, *nu, *horizon, *noise_scale, *runs),
        Command::Action { path, nu } => rescore(c, path, *nu),
    }
}

fn analyze(c: &Common, nu: Option<f64>, n: usize) -> Result<Outcome> {
    let params = resolve(c, nu)?;
    let out = out_dir(c)?;
    let sys = CarbonSystem::new(params);
    let p = portrait(&sys, n)?;
    let mut o = Outcome::new(Some(params));
    let mut fp = p.fixed_point.to_json();
    fp["nested"] = json!(p.is_nested());
    o.json(&out, "fixed_point.json", &fp)?;
    let (s, u) = write_cycles(&mut o, &out, &p)?;
    let k = p.stable.max_dc_rate_index(&sys);
    let targets = json!({
        "n": p.stable.len(),
        "stable_period": p.stable.period,
        "unstable_period": p.unstable.period,
        "max_dc_rate_index": k,
        "max_dc_rate_target": state_json(p.stable.points[k]),
        "max_dc_rate_phase": k as f64 / p.stable.len() as f64,
    });
    o.json(&out, "targets.json", &targets)?;
    let z = p.fixed_point.location;
    let plot = svg::Plot::new("Phase portrait", "c", "w")
        .with(cycle_series(&s, "stable cycle", svg::BLUE)?)
        .with(cycle_series(&u, "unstable cycle", svg::RED)?)
        .with(Series::points("fixed point", svg::BLACK, Mark::Dot, vec![(z.c, z.w)]));
    o.svg(&out, "portrait.svg", &plot)?;
    println!(
        "fixed point c = {:.6}, w = {:.6}; stable period {:.4}; unstable period {:.4}; nested: {}",
        z.c,
        z.w,
        p.stable.period,
        p.unstable.period,
        p.is_nested()
    );
    o.summary = json!({ "fixed_point": fp, "targets": targets });
    Ok(o)
}

fn gendata(c: &Common, a: &ShootArgs) -> Result<Outcome> {
    let params = resolve(c, a.nu)?;
    let out = out_dir(c)?;
    let cfg = shoot_config(c, a);
    cfg.validate()?;
    let sys = CarbonSystem::new(params);
    let p = portrait(&sys, cfg.n_targets)?;
    let mut ds = generate_dataset(&sys, p.fixed_point.location, &p.stable, a.horizon, &cfg, c.seed)?;
    ds.nu = Some(params.nu);
    let mut o = Outcome::new(Some(params));
    let file = out.join("dataset.csv");
    io::write_dataset(&file, &ds)?;
    o.files.push(file.clone());
    o.files.push(io::meta_path(&file));
    let (s, _) = write_cycles(&mut o, &out, &p)?;
    let rows = read_csv(&file, &["end_c", "end_w"])?;
    let plot = svg::Plot::new("Shooting endpoints", "c", "w")
        .with(cycle_series(&s, "stable cycle", svg::BLUE)?)
        .with(Series::points("endpoints", svg::RED, Mark::Dot, pairs(&rows, 0, 1)));
    o.svg(&out, "dataset.svg", &plot)?;
    println!("{} of {} samples retained ({:.2}%)", ds.records.len(), ds.attempted, 100.0 * ds.retention());
    o.summary = serde_json::to_value(io::DatasetMeta::of(&ds))?;
    Ok(o)
}

fn save_model(o: &mut Outcome, out: &FsPath, model: &ShootModel) -> Result<()> {
    o.json(out, "model.json", &serde_json::to_value(model.to_file())?)?;
    let history = model.report.history.iter().enumerate().map(|(i, l)| vec![i.to_string(), l.to_string()]).collect();
    let f = o.table(out, "training_loss.csv", &["epoch", "loss"], history)?;
    let rows = read_csv(&f, &["epoch", "loss"])?;
    let plot = svg::Plot::new("Training loss", "epoch", "normalized MSE")
        .log_y()
        .with(Series::line("train", svg::BLUE, pairs(&rows, 0, 1)));
    o.svg(out, "training_loss.svg", &plot)?;
    if let Some(w) = &model.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn model_summary(model: &ShootModel) -> Value {
    json!({
        "epochs": model.report.epochs,
        "train_loss": model.report.train_loss,
        "val_nmse": model.val_nmse,
        "warning": model.warning,
    })
}

fn train(c: &Common, dataset: &FsPath, epochs: usize, lr: f64) -> Result<Outcome> {
    let out = out_dir(c)?;
    let ds = io::read_dataset(dataset).with_context(|| format!("loading dataset {}", dataset.display()))?;
    let cfg = ShootConfig { epochs, lr, ..ShootConfig::default() };
    cfg.validate()?;
    let model = train_shoot_net(&ds, &cfg, c.seed)?;
    let mut o = Outcome::new(None);
    save_model(&mut o, &out, &model)?;
    let summary = model_summary(&model);
    o.json(&out, "train_report.json", &summary)?;
    println!("train loss {:.4e}, validation nmse {:?}", model.report.train_loss, model.val_nmse);
    o.summary = summary;
    Ok(o)
}

fn path(c: &Common, a: &ShootArgs, saved: Option<(&FsPath, &FsPath)>) -> Result<Outcome> {
    let out = out_dir(c)?;
    let cfg = shoot_config(c, a);
    cfg.validate()?;
    let (params, p, selection, model_info, trained) = match saved {
        Some((model_path, ds_path)) => {
            let ds = io::read_dataset(ds_path).with_context(|| format!("loading dataset {}", ds_path.display()))?;
            let params = resolve(c, a.nu.or(ds.nu))?;
            let text = fs::read_to_string(model_path).with_context(|| format!("reading {}", model_path.display()))?;
            let model = ShootModel::from_file(&serde_json::from_str::<ModelFile>(&text)?)?;
            let sys = CarbonSystem::new(params);
            let p = portrait(&sys, cfg.n_targets)?;
            if p.fixed_point.location.distance(ds.z_star) > 1e-6 * ds.z_star.c.abs().max(1.0) {
                bail!("dataset was generated from a different fixed point; check --nu and --config");
            }
            let sel = most_probable_path(&sys, ds.z_star, &p.stable, &model, ShotSettings::from(&ds), &cfg)?;
            (params, p, sel, json!({ "model": model_path, "dataset": ds_path }), None)
        }
        None => {
            let params = resolve(c, a.nu)?;
            let sys = CarbonSystem::new(params);
            let p = portrait(&sys, cfg.n_targets)?;
            let mut run = run_pipeline(&sys, &p, a.horizon, &cfg, c.seed)?;
            run.dataset.nu = Some(params.nu);
            let info = json!({ "dataset": io::DatasetMeta::of(&run.dataset), "model": model_summary(&run.model) });
            (params, p, run.selection, info, Some((run.dataset, run.model)))
        }
    };
    let mut o = Outcome::new(Some(params));
    if let Some((ds, model)) = &trained {
        let file = out.join("dataset.csv");
        io::write_dataset(&file, ds)?;
        o.files.push(file.clone());
        o.files.push(io::meta_path(&file));
        save_model(&mut o, &out, model)?;
    }
    o.table(&out, "targets.csv", &io::TARGETS_HEADER, io::target_rows(&selection.table))?;
    let w = &selection.winner;
    let f = o.table(&out, "path.csv", &io::PATH_HEADER, io::path_rows(&w.path))?;
    let (s, u) = write_cycles(&mut o, &out, &p)?;
    let target = selection.table[w.target_index].target;
    let end = w.path.endpoint();
    let summary = json!({
        "T": w.path.t_end(),
        "target_index": w.target_index,
        "target": state_json(target),
        "endpoint": state_json(end),
        "action": w.action,
        "reachable_count": selection.reachable_count(),
        "n_targets": selection.table.len(),
        "epsilon": cfg.epsilon,
        "source": model_info,
    });
    o.json(&out, "winner.json", &summary)?;
    let rows = read_csv(&f, &["c", "w"])?;
    let z = p.fixed_point.location;
    let plot = svg::Plot::new("Most probable path", "c", "w")
        .with(cycle_series(&s, "stable cycle", svg::BLUE)?)
        .with(cycle_series(&u, "unstable cycle", svg::GREY)?)
        .with(Series::line("path", svg::RED, pairs(&rows, 0, 1)))
        .with(Series::points("fixed point", svg::BLACK, Mark::Dot, vec![(z.c, z.w)]))
        .with(Series::points("target", svg::RED, Mark::Cross, vec![(target.c, target.w)]));
    o.svg(&out, "path.svg", &plot)?;
    println!(
        "winner: target {} at c = {:.4}, w = {:.4}; endpoint c = {:.4}; action {:.6}; {} of {} targets reachable",
        w.target_index,
        target.c,
        target.w,
        end.c,
        w.action,
        selection.reachable_count(),
        selection.table.len()
    );
    o.summary = summary;
    Ok(o)
}

fn run_sweep(c: &Common, a: &ShootArgs, axis: &str, values: &str) -> Result<Outcome> {
    let axis: SweepAxis = axis.parse()?;
    let values = parse_values(values)?;
    let params = resolve(c, a.nu)?;
    let out = out_dir(c)?;
    let cfg = shoot_config(c, a);
    cfg.validate()?;
    let rows = sweep(&params, axis, &values, a.horizon, &cfg, c.seed);
    let mut o = Outcome::new(Some(params));
    let f = o.table(&out, "sweep.csv", &io::SWEEP_HEADER, io::sweep_rows(&rows))?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("warning: sweep point {}: {}", r.axis, r.error.as_deref().unwrap_or_default());
    }
    let name = match axis {
        SweepAxis::Nu => "nu",
        SweepAxis::Time => "T",
    };
    let data = read_csv(&f, &["axis", "endpoint_c", "action"])?;
    let ends = svg::Plot::new("Winning endpoint", name, "endpoint c").with(Series::line_points(
        "endpoint c",
        svg::BLUE,
        pairs(&data, 0, 1),
    ));
    o.svg(&out, "sweep_endpoint.svg", &ends)?;
    let acts = svg::Plot::new("Winning action", name, "action").with(Series::line_points("action", svg::RED, pairs(&data, 0, 2)));
    o.svg(&out, "sweep_action.svg", &acts)?;
    for r in &rows {
        match (r.endpoint, r.action) {
            (Some(e), Some(s)) => println!("{name} = {}: endpoint c = {:.4}, w = {:.4}, action {:.6}", r.axis, e.c, e.w, s),
            _ => println!("{name} = {}: failed", r.axis),
        }
    }
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    o.summary = json!({ "axis": name, "points": rows.len(), "failed": failed, "values": column(&data, 0) });
    if failed == rows.len() {
        return Err(transpath::Error::NoConvergence("every sweep point failed".into()).into());
    }
    Ok(o)
}

fn pinn_setup(c: &Common, a: &PinnArgs) -> Result<(CarbonSystem, PhasePortrait, usize)> {
    let params = resolve(c, a.nu)?;
    let sys = CarbonSystem::new(params);
    let p = portrait(&sys, a.targets)?;
    let k = pick_target(&sys, &p.stable, a)?;
    Ok((sys, p, k))
}

fn pinn_path(c: &Common, a: &PinnArgs, horizon: f64) -> Result<Outcome> {
    let out = out_dir(c)?;
    let (sys, p, k) = pinn_setup(c, a)?;
    let (start, end) = (p.fixed_point.location, p.stable.points[k]);
    let cfg = pinn_config(a, start, end, horizon);
    cfg.validate()?;
    let r = solve_path_pinn(&sys, &cfg, c.seed)?;
    let mut o = Outcome::new(Some(sys.params));
    let f = o.table(&out, "pinn_path.csv", &io::PATH_HEADER, io::path_rows(&r.path))?;
    let (s, u) = write_cycles(&mut o, &out, &p)?;
    let residual = if r.converged { stationarity_residual(&sys, &r.path).ok() } else { None };
    let summary = json!({
        "T": r.horizon,
        "target_index": k,
        "target": state_json(end),
        "action": r.action,
        "residual_loss": r.residual_loss,
        "boundary_loss": r.boundary_loss,
        "converged": r.converged,
        "singular": r.singular,
        "epochs": r.epochs,
        "stationarity_residual": residual,
    });
    o.json(&out, "pinn_report.json", &summary)?;
    let rows = read_csv(&f, &["c", "w"])?;
    let plot = svg::Plot::new("PINN path", "c", "w")
        .with(cycle_series(&s, "stable cycle", svg::BLUE)?)
        .with(cycle_series(&u, "unstable cycle", svg::GREY)?)
        .with(Series::line("path", svg::RED, pairs(&rows, 0, 1)))
        .with(Series::points("fixed point", svg::BLACK, Mark::Dot, vec![(start.c, start.w)]))
        .with(Series::points("target", svg::RED, Mark::Cross, vec![(end.c, end.w)]));
    o.svg(&out, "pinn_path.svg", &plot)?;
    if !r.converged {
        eprintln!(
            "warning: not converged after {} epochs (boundary loss {:.3e}, residual loss {:.3e})",
            r.epochs, r.boundary_loss, r.residual_loss
        );
    }
    println!("T = {}: action {:?}, converged {}", r.horizon, r.action, r.converged);
    o.summary = summary;
    Ok(o)
}

fn pinn_time(c: &Common, a: &PinnArgs, range: &str, count: usize) -> Result<Outcome> {
    let (lo, hi) = parse_range(range)?;
    if count == 0 {
        bail!("--t-count must be positive");
    }
    let out = out_dir(c)?;
    let (sys, p, k) = pinn_setup(c, a)?;
    let (start, end) = (p.fixed_point.location, p.stable.points[k]);
    let base = pinn_config(a, start, end, lo);
    base.validate()?;
    let grid = uniform_grid(lo, hi, count);
    let curve = time_curve(&sys, &base, &grid, c.seed);
    let mut o = Outcome::new(Some(sys.params));
    let f = o.table(&out, "time_curve.csv", &io::CURVE_HEADER, io::curve_rows(&curve))?;
    let best = argmin_time(curve)?;
    let converged = best.curve.iter().filter(|r| r.converged).count();
    let summary = json!({
        "t_star": best.t_star,
        "best_index": best.best_index,
        "action": best.curve[best.best_index].action,
        "target_index": k,
        "target": state_json(end),
        "grid": { "lo": lo, "hi": hi, "count": count },
        "converged_points": converged,
    });
    o.json(&out, "optimal_time.json", &summary)?;
    let rows = read_csv(&f, &["T", "action"])?;
    let plot = svg::Plot::new("Action against transition time", "T", "action")
        .with(Series::line_points("action", svg::BLUE, pairs(&rows, 0, 1)))
        .with(Series::points(
            "optimum",
            svg::RED,
            Mark::Cross,
            best.curve[best.best_index].action.map(|s| vec![(best.t_star, s)]).unwrap_or_default(),
        ));
    o.svg(&out, "time_curve.svg", &plot)?;
    println!("optimal T = {} ({} of {} grid points converged)", best.t_star, converged, count);
    o.summary = summary;
    Ok(o)
}

fn simulate(c: &Common, nu: Option<f64>, horizon: f64, noise_scale: f64, runs: usize) -> Result<Outcome> {
    let params = resolve(c, nu)?;
    let out = out_dir(c)?;
    let sys = CarbonSystem::new(params);
    let p = portrait(&sys, 3600)?;
    let z = p.fixed_point.location;
    let cfg = SimConfig { dt: c.dt.unwrap_or(1e-3), horizon, seed: c.seed, noise_scale, runs };
    cfg.validate()?;
    if let Some(s) = c.scheme.filter(|s| *s != Scheme::Euler) {
        bail!("simulate uses Euler-Maruyama; --scheme {s} is not supported");
    }
    let sample = euler_maruyama(&sys, z, &cfg)?;
    let summary = escape_fraction(&sys, z, &p.unstable, &cfg)?;
    let mut o = Outcome::new(Some(params));
    let f = o.table(&out, "trajectory.csv", &io::TRAJECTORY_HEADER, io::trajectory_rows(&sample.path))?;
    let mut js = serde_json::to_value(summary)?;
    js["escape_boundary"] = json!("unstable cycle");
    js["sample_terminated"] = json!(sample.terminated);
    o.json(&out, "summary.json", &js)?;
    let (s, u) = write_cycles(&mut o, &out, &p)?;
    let rows = read_csv(&f, &["t", "c", "w"])?;
    let phase = svg::Plot::new("Sample path", "c", "w")
        .with(Series::line("sample", svg::GREY, pairs(&rows, 1, 2)))
        .with(cycle_series(&s, "stable cycle", svg::BLUE)?)
        .with(cycle_series(&u, "unstable cycle", svg::RED)?);
    o.svg(&out, "trajectory.svg", &phase)?;
    let series = svg::Plot::new("Carbonate against time", "t", "c").with(Series::line("c", svg::BLUE, pairs(&rows, 0, 1)));
    o.svg(&out, "trajectory_c.svg", &series)?;
    println!("{} of {} runs escaped by T = {} ({:.3})", summary.escapes, summary.n_runs, horizon, summary.fraction);
    o.summary = js;
    Ok(o)
}

fn rescore(c: &Common, file: &FsPath, nu: Option<f64>) -> Result<Outcome> {
    let params = resolve(c, nu)?;
    let out = out_dir(c)?;
    let sys = CarbonSystem::new(params);
    let path = io::read_path(file)?;
    let s = action(&sys, &path)?;
    let mut o = Outcome::new(Some(params));
    let summary = json!({
        "path": file,
        "samples": path.len(),
        "T": path.t_end() - path.time(0),
        "action": s,
        "start": state_json(path.start()),
        "end": state_json(path.endpoint()),
    });
    o.json(&out, "action.json", &summary)?;
    println!("{s}");
    o.summary = summary;
    Ok(o)
}
