//! Physics-informed solution of the Euler-Lagrange two-point problem: a
//! network `τ ↦ z` on `τ = t/T ∈ [0, 1]` trained so that the finite-difference
//! residual `el_rhs(z, ż) − z̈` vanishes on a uniform grid and the ends match
//! the boundary states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{action, el_rhs_jacobian};
use crate::dynamics::Path;
use crate::error::{Error, Result};
use crate::model::{State, System};
use crate::nn::{Adam, Mlp, Tape};
use crate::rng::derive;

/// Residual assigned, per unit of constraint violation, at collocation
/// points outside the domain.
pub const SINGULAR_PENALTY: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnConfig {
    /// Boundary weight λ.
    pub lambda: f64,
    /// Collocation points, including both ends.
    pub m: usize,
    pub layers: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub horizon: f64,
    pub start: State,
    pub end: State,
    /// Relative change of the residual loss over `plateau_window` epochs
    /// below which training stops.
    pub plateau_tol: f64,
    pub plateau_window: usize,
    pub boundary_tol: f64,
}

impl PinnConfig {
    pub fn new(start: State, end: State, horizon: f64) -> Self {
        PinnConfig {
            lambda: 60.0,
            m: 501,
            layers: vec![1, 20, 20, 20, 20, 2],
            lr: 1e-3,
            epochs: 20_000,
            horizon,
            start,
            end,
            plateau_tol: 1e-4,
            plateau_window: 500,
            boundary_tol: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.m < 4 {
            return Err(Error::Config(format!("need at least 4 collocation points, got {}", self.m)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("T must be positive, got {}", self.horizon)));
        }
        if self.layers.first() != Some(&1) || self.layers.last() != Some(&2) {
            return Err(Error::Config(format!("layers must map 1 -> 2, got {:?}", self.layers)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.horizon / (self.m - 1) as f64
    }

    /// Affine output map `z = center + scale ⊙ y` so that the network works
    /// in O(1) units whatever the magnitudes of the states.
    pub fn output_scaling(&self) -> ([f64; 2], [f64; 2]) {
        let (a, b) = (self.start.arr(), self.end.arr());
        let center = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let scale = [0, 1].map(|k| (0.5 * (b[k] - a[k]).abs()).max(1e-2 * center[k].abs()).max(1.0));
        (center, scale)
    }
}

/// Residual and boundary losses in state units, the training objective,
/// and whether any collocation point left the domain.
///
/// The objective is the same loss written in the network's coordinates:
/// time `τ = t/T` and each state component divided by its output scale, so
/// `objective = mean |T² r ⊘ s|² + λ·½(|e₀ ⊘ s|² + |e_T ⊘ s|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub residual: f64,
    pub boundary: f64,
    pub objective: f64,
    pub singular: bool,
}

/// First derivative weights of the grid stencil at node `j` (second order,
/// one-sided at the ends), as `(node, weight·h)` pairs.
fn d1(j: usize, m: usize) -> [(usize, f64); 3] {
    if j == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if j == m - 1 {
        [(m - 1, 1.5), (m - 2, -2.0), (m - 3, 0.5)]
    } else {
        [(j - 1, -0.5), (j + 1, 0.5), (j, 0.0)]
    }
}

/// Second derivative weights `(node, weight·h²)`, one-sided at the ends.
fn d2(j: usize, m: usize) -> [(usize, f64); 4] {
    if j == 0 {
        [(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if j == m - 1 {
        [(m - 1, 2.0), (m - 2, -5.0), (m - 3, 4.0), (m - 4, -1.0)]
    } else {
        [(j - 1, 1.0), (j, -2.0), (j + 1, 1.0), (j, 0.0)]
    }
}

/// Grid derivatives of a sampled path.
pub fn grid_derivatives(z: &[[f64; 2]], h: f64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let m = z.len();
    let apply = |w: &[(usize, f64)], k: usize, s: f64| w.iter().map(|&(i, c)| c * z[i][k]).sum::<f64>() / s;
    let v = (0..m).map(|j| [0, 1].map(|k| apply(&d1(j, m), k, h))).collect();
    let a = (0..m).map(|j| [0, 1].map(|k| apply(&d2(j, m), k, h * h))).collect();
    (v, a)
}

/// Loss of the sampled path `z` and, if `dz` is given, the gradient of the
/// objective with respect to every sample.
pub fn path_loss<S: System>(sys: &S, cfg: &PinnConfig, z: &[[f64; 2]], mut dz: Option<&mut [[f64; 2]]>) -> LossParts {
    let m = z.len();
    let h = cfg.step();
    let (_, scale) = cfg.output_scaling();
    let t2 = cfg.horizon * cfg.horizon;
    let wr = [0, 1].map(|k| (t2 / scale[k]).powi(2));
    let wb = [0, 1].map(|k| scale[k].powi(-2));
    let (vel, acc) = grid_derivatives(z, h);
    let mut residual = 0.0;
    let mut objective = 0.0;
    let mut singular = false;
    let inv_m = 1.0 / m as f64;
    if let Some(d) = dz.as_deref_mut() {
        d.iter_mut().for_each(|g| *g = [0.0; 2]);
    }
    for j in 0..m {
        if !sys.in_domain(z[j]) || !z[j][0].is_finite() || !z[j][1].is_finite() {
            singular = true;
            // push the sample back towards c = 1 from wherever it went
            let r = SINGULAR_PENALTY * (1.0 + (1.0 - z[j][0]).abs());
            residual += r * r * inv_m;
            objective += r * r * inv_m;
            if let Some(d) = dz.as_deref_mut() {
                let sign = if z[j][0] < 1.0 { -1.0 } else { 1.0 };
                d[j][0] += 2.0 * r * inv_m * SINGULAR_PENALTY * sign;
            }
            continue;
        }
        let (a, jac) = el_rhs_jacobian(sys, z[j], vel[j]);
        let r = [a[0] - acc[j][0], a[1] - acc[j][1]];
        residual += (r[0] * r[0] + r[1] * r[1]) * inv_m;
        objective += (wr[0] * r[0] * r[0] + wr[1] * r[1] * r[1]) * inv_m;
        if let Some(d) = dz.as_deref_mut() {
            let gr = [2.0 * wr[0] * r[0] * inv_m, 2.0 * wr[1] * r[1] * inv_m];
            // ∂/∂z_j through the position arguments
            for k in 0..2 {
                d[j][k] += gr[0] * jac[0][k] + gr[1] * jac[1][k];
            }
            // through the velocity stencil
            for &(i, c) in &d1(j, m) {
                if c != 0.0 {
                    for k in 0..2 {
                        d[i][k] += (gr[0] * jac[0][2 + k] + gr[1] * jac[1][2 + k]) * c / h;
                    }
                }
            }
            // through −z̈
            for &(i, c) in &d2(j, m) {
                if c != 0.0 {
                    for k in 0..2 {
                        d[i][k] -= gr[k] * c / (h * h);
                    }
                }
            }
        }
    }
    let (a, b) = (cfg.start.arr(), cfg.end.arr());
    let e0 = [z[0][0] - a[0], z[0][1] - a[1]];
    let e1 = [z[m - 1][0] - b[0], z[m - 1][1] - b[1]];
    let boundary = 0.5 * (e0[0] * e0[0] + e0[1] * e0[1] + e1[0] * e1[0] + e1[1] * e1[1]);
    objective += cfg.lambda * 0.5 * (0..2).map(|k| wb[k] * (e0[k] * e0[k] + e1[k] * e1[k])).sum::<f64>();
    if let Some(d) = dz {
        for k in 0..2 {
            d[0][k] += cfg.lambda * wb[k] * e0[k];
            d[m - 1][k] += cfg.lambda * wb[k] * e1[k];
        }
    }
    LossParts { residual, boundary, objective, singular }
}

fn collocation_inputs(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// Path samples produced by `net` on the collocation grid.
pub fn net_path(net: &Mlp, cfg: &PinnConfig, tape: &mut Tape<f64>) -> Result<Vec<[f64; 2]>> {
    let (center, scale) = cfg.output_scaling();
    net.forward_batch(&collocation_inputs(cfg.m), cfg.m, tape)?;
    Ok(net.outputs(tape).chunks(2).map(|y| [center[0] + scale[0] * y[0], center[1] + scale[1] * y[1]]).collect())
}

/// Loss of `net` and its gradient with respect to the network parameters
/// (layout of [`Mlp::params`]).
pub fn pinn_loss<S: System>(sys: &S, net: &Mlp, cfg: &PinnConfig) -> Result<(LossParts, Vec<f64>)> {
    let mut tape = Tape::new();
    let mut grad = vec![0.0; net.n_params()];
    let parts = loss_and_grad(sys, net, cfg, &mut tape, &mut grad)?;
    Ok((parts, grad))
}

fn loss_and_grad<S: System>(sys: &S, net: &Mlp, cfg: &PinnConfig, tape: &mut Tape<f64>, grad: &mut [f64]) -> Result<LossParts> {
    let (_, scale) = cfg.output_scaling();
    let z = net_path(net, cfg, tape)?;
    let mut dz = vec![[0.0; 2]; z.len()];
    let parts = path_loss(sys, cfg, &z, Some(&mut dz));
    let douts: Vec<f64> = dz.iter().flat_map(|d| [d[0] * scale[0], d[1] * scale[1]]).collect();
    grad.iter_mut().for_each(|g| *g = 0.0);
    net.backward(tape, &douts, grad, false);
    Ok(parts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinnResult {
    pub horizon: f64,
    /// `None` when the final path crosses the singular set.
    pub action: Option<f64>,
    pub residual_loss: f64,
    pub boundary_loss: f64,
    pub converged: bool,
    pub singular: bool,
    pub epochs: usize,
    pub path: Path,
}

impl PinnResult {
    /// Boundary loss recomputed from the stored samples.
    pub fn recompute_boundary(&self, start: State, end: State) -> f64 {
        let (a, b) = (self.path.start(), self.path.endpoint());
        0.5 * ((a.c - start.c).powi(2) + (a.w - start.w).powi(2) + (b.c - end.c).powi(2) + (b.w - end.w).powi(2))
    }
}

/// Train the path network with full-batch Adam. Stops once the boundary
/// loss is below tolerance and the residual loss has plateaued; otherwise
/// runs the full budget and returns the result flagged as not converged.
pub fn solve_path_pinn<S: System>(sys: &S, cfg: &PinnConfig, seed: u64) -> Result<PinnResult> {
    cfg.validate()?;
    let mut net = Mlp::new(&cfg.layers, seed)?;
    let mut params = net.params();
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), cfg.lr);
    let mut tape = Tape::new();
    let mut history: Vec<f64> = Vec::with_capacity(cfg.epochs);
    let mut converged = false;
    let mut epochs = 0;
    for epoch in 0..cfg.epochs {
        let parts = loss_and_grad(sys, &net, cfg, &mut tape, &mut grad)?;
        if !parts.objective.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(parts.residual);
        epochs = epoch;
        if !parts.singular && parts.boundary < cfg.boundary_tol && epoch >= cfg.plateau_window {
            let old = history[epoch - cfg.plateau_window];
            if (old - parts.residual).abs() <= cfg.plateau_tol * old.abs() {
                converged = true;
                break;
            }
        }
        adam.step(&mut params, &grad);
        net.set_params(&params);
        epochs = epoch + 1;
    }
    let z = net_path(&net, cfg, &mut tape)?;
    let parts = path_loss(sys, cfg, &z, None);
    let path = Path::new(0.0, cfg.step(), z.iter().map(|p| State::new(p[0], p[1])).collect());
    let action = if parts.singular { None } else { action(sys, &path).ok() };
    Ok(PinnResult {
        horizon: cfg.horizon,
        action,
        residual_loss: parts.residual,
        boundary_loss: parts.boundary,
        converged: converged && !parts.singular,
        singular: parts.singular,
        epochs,
        path,
    })
}

/// `n` uniform points on `[lo, hi]`, both ends included.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalTime {
    pub t_star: f64,
    pub best_index: usize,
    pub curve: Vec<PinnResult>,
}

/// Solve the boundary problem at every horizon in `grid`, in parallel, the
/// point at index `i` seeded from `(seed, i)`. A failed solve is recorded as
/// a non-converged point with NaN losses.
pub fn time_curve<S: System>(sys: &S, base: &PinnConfig, grid: &[f64], seed: u64) -> Vec<PinnResult> {
    grid.par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let cfg = PinnConfig { horizon: t, ..base.clone() };
            solve_path_pinn(sys, &cfg, derive(seed, i as u64)).unwrap_or_else(|_| PinnResult {
                horizon: t,
                action: None,
                residual_loss: f64::NAN,
                boundary_loss: f64::NAN,
                converged: false,
                singular: false,
                epochs: 0,
                path: Path::new(0.0, cfg.step(), vec![]),
            })
        })
        .collect()
}

/// Horizon of least action among converged points (lowest index on ties).
pub fn argmin_time(curve: Vec<PinnResult>) -> Result<OptimalTime> {
    let best = curve
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged && r.action.is_some())
        .min_by(|a, b| a.1.action.unwrap().total_cmp(&b.1.action.unwrap()).then(a.0.cmp(&b.0)));
    match best {
        Some((i, r)) => Ok(OptimalTime { t_star: r.horizon, best_index: i, curve }),
        None => Err(Error::NoConvergence(format!("none of the {} horizons converged", curve.len()))),
    }
}

/// [`time_curve`] followed by [`argmin_time`].
pub fn optimal_time<S: System>(sys: &S, base: &PinnConfig, grid: &[f64], seed: u64) -> Result<OptimalTime> {
    argmin_time(time_curve(sys, base, grid, seed))
}
