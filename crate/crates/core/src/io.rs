//! CSV tables: `.` decimals, comma separator, header row, LF endings.
//! Floats are written in shortest round-trip form so files reload bitwise.

use std::fs::File;
use std::io::Write;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LimitCycle, Path, Scheme};
use crate::error::{Error, Result};
use crate::model::State;
use crate::pinn::PinnResult;
use crate::shooting::{ShootDataset, ShootRecord, SweepRow, TargetRow, VelocityBox};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write `header` and `rows` to any sink.
pub fn write_rows<W: Write>(sink: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(sink);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Shape(format!("row of {} fields under a {}-column header", row.len(), header.len())));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(path: impl AsRef<FsPath>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_rows(File::create(path)?, header, rows)
}

pub const CYCLE_HEADER: [&str; 4] = ["index", "t", "c", "w"];
pub const DATASET_HEADER: [&str; 4] = ["vx", "vy", "end_c", "end_w"];
pub const SWEEP_HEADER: [&str; 6] = ["axis", "endpoint_c", "endpoint_w", "action", "target_index", "reachable_count"];
pub const PATH_HEADER: [&str; 5] = ["t", "c", "w", "vc", "vw"];
pub const CURVE_HEADER: [&str; 5] = ["T", "action", "residual_loss", "boundary_loss", "converged"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "c", "w"];
pub const TARGETS_HEADER: [&str; 10] =
    ["index", "target_c", "target_w", "vx", "vy", "end_c", "end_w", "distance", "reachable", "action"];

pub fn cycle_rows(cycle: &LimitCycle) -> Vec<Vec<String>> {
    cycle
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), cycle.time_of(i).to_string(), p.c.to_string(), p.w.to_string()])
        .collect()
}

pub fn dataset_rows(ds: &ShootDataset) -> Vec<Vec<String>> {
    ds.records
        .iter()
        .map(|r| vec![r.v0[0].to_string(), r.v0[1].to_string(), r.end.c.to_string(), r.end.w.to_string()])
        .collect()
}

pub fn sweep_rows(rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.axis.to_string(),
                opt(r.endpoint.map(|e| e.c)),
                opt(r.endpoint.map(|e| e.w)),
                opt(r.action),
                opt(r.target_index),
                r.reachable_count.to_string(),
            ]
        })
        .collect()
}

/// Path rows; velocities are the stored ones when present, otherwise
/// finite differences of the samples.
pub fn path_rows(path: &Path) -> Vec<Vec<String>> {
    let vel = match &path.velocities {
        Some(v) => v.clone(),
        None if path.len() >= 3 => crate::action::fd_velocities(&path.states, path.dt),
        None => vec![[f64::NAN; 2]; path.len()],
    };
    path.states
        .iter()
        .zip(&vel)
        .enumerate()
        .map(|(i, (s, v))| vec![path.time(i).to_string(), s.c.to_string(), s.w.to_string(), v[0].to_string(), v[1].to_string()])
        .collect()
}

pub fn trajectory_rows(path: &Path) -> Vec<Vec<String>> {
    path.states.iter().enumerate().map(|(i, s)| vec![path.time(i).to_string(), s.c.to_string(), s.w.to_string()]).collect()
}

pub fn curve_rows(curve: &[PinnResult]) -> Vec<Vec<String>> {
    curve
        .iter()
        .map(|r| {
            vec![
                r.horizon.to_string(),
                opt(r.action),
                r.residual_loss.to_string(),
                r.boundary_loss.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect()
}

pub fn target_rows(rows: &[TargetRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.target.c.to_string(),
                r.target.w.to_string(),
                r.v0[0].to_string(),
                r.v0[1].to_string(),
                opt(r.endpoint.map(|e| e.c)),
                opt(r.endpoint.map(|e| e.w)),
                r.distance.to_string(),
                r.reachable.to_string(),
                opt(r.action),
            ]
        })
        .collect()
}

fn read_numeric(path: impl AsRef<FsPath>, required: &[&str]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().from_path(path.as_ref())?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let idx: Vec<usize> = required
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Shape(format!("{}: missing column `{name}`", path.as_ref().display())))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = idx
            .iter()
            .map(|&i| {
                rec.get(i).unwrap_or("").parse::<f64>().map_err(|_| {
                    Error::Shape(format!("{}: row {}: `{}` is not a number", path.as_ref().display(), line + 2, rec.get(i).unwrap_or("")))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Samples of a `t,c,w[,...]` file as a uniform path.
pub fn read_path(path: impl AsRef<FsPath>) -> Result<Path> {
    let (_, rows) = read_numeric(path.as_ref(), &["t", "c", "w"])?;
    if rows.len() < 2 {
        return Err(Error::Shape(format!("{}: need at least 2 samples", path.as_ref().display())));
    }
    let dt = rows[1][0] - rows[0][0];
    let uniform = rows.windows(2).all(|w| ((w[1][0] - w[0][0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
    if !(dt > 0.0) || !uniform {
        return Err(Error::Shape(format!("{}: time column must be uniform and increasing", path.as_ref().display())));
    }
    Ok(Path::new(rows[0][0], dt, rows.iter().map(|r| State::new(r[1], r[2])).collect()))
}

/// Integration settings and origin of a dataset, stored next to its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub z_star: State,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub nu: Option<f64>,
    pub dt: f64,
    pub scheme: Scheme,
    pub velocity_box: VelocityBox,
    pub annulus_margin: f64,
    pub attempted: usize,
    pub retained: usize,
}

impl DatasetMeta {
    pub fn of(ds: &ShootDataset) -> Self {
        DatasetMeta {
            z_star: ds.z_star,
            horizon: ds.horizon,
            nu: ds.nu,
            dt: ds.dt,
            scheme: ds.scheme,
            velocity_box: ds.velocity_box,
            annulus_margin: ds.annulus_margin,
            attempted: ds.attempted,
            retained: ds.records.len(),
        }
    }
}

/// Sidecar file name for a dataset CSV: `x.csv` → `x.meta.json`.
pub fn meta_path(csv_path: &FsPath) -> std::path::PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_dataset(csv_path: impl AsRef<FsPath>, ds: &ShootDataset) -> Result<()> {
    let csv_path = csv_path.as_ref();
    write_table(csv_path, &DATASET_HEADER, dataset_rows(ds))?;
    std::fs::write(meta_path(csv_path), serde_json::to_string_pretty(&DatasetMeta::of(ds))? + "\n")?;
    Ok(())
}

pub fn read_dataset(csv_path: impl AsRef<FsPath>) -> Result<ShootDataset> {
    let csv_path = csv_path.as_ref();
    let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(meta_path(csv_path))?)?;
    let (_, rows) = read_numeric(csv_path, &DATASET_HEADER)?;
    let records = rows.iter().map(|r| ShootRecord { v0: [r[0], r[1]], end: State::new(r[2], r[3]) }).collect();
    Ok(ShootDataset {
        records,
        z_star: meta.z_star,
        horizon: meta.horizon,
        nu: meta.nu,
        dt: meta.dt,
        scheme: meta.scheme,
        velocity_box: meta.velocity_box,
        annulus_margin: meta.annulus_margin,
        attempted: meta.attempted,
    })
}
