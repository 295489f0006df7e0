//! Euler-Maruyama simulation of `dz = b̃(z) dt + diag(g1(c), g2) dB`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_count, LimitCycle, Path};
use crate::error::{Error, Result};
use crate::model::{State, System};
use crate::rng::{derive, stream, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Multiplier on the diffusion; 1 is the model as written.
    pub noise_scale: f64,
    pub runs: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::Config(format!("noise scale must be >= 0, got {}", self.noise_scale)));
        }
        step_count(self.horizon, self.dt)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub path: Path,
    /// Set when a step took `c ≤ 0`; the path ends at that state.
    pub terminated: bool,
}

/// One sample path driven by the stream `seed`.
pub fn euler_maruyama<S: System>(sys: &S, z0: State, cfg: &SimConfig) -> Result<SamplePath> {
    let mut states = Vec::new();
    let terminated = simulate(sys, z0, cfg, cfg.seed, |z| {
        states.push(z);
        true
    })?;
    Ok(SamplePath { path: Path::new(0.0, cfg.dt, states), terminated })
}

/// Drive one path, handing every state (the initial one included) to
/// `visit`; stops early when `visit` returns false. Returns whether the path
/// was terminated by `c ≤ 0`.
fn simulate<S: System>(sys: &S, z0: State, cfg: &SimConfig, seed: u64, mut visit: impl FnMut(State) -> bool) -> Result<bool> {
    cfg.validate()?;
    if !(z0.c > 0.0) {
        return Err(Error::Domain(format!("initial c must be positive, got {}", z0.c)));
    }
    let n = step_count(cfg.horizon, cfg.dt)?;
    let mut normal = Normal::new(stream(seed, 0));
    let noisy = cfg.noise_scale > 0.0;
    let amp = cfg.noise_scale * cfg.dt.sqrt();
    let mut z = z0.arr();
    if !visit(z0) {
        return Ok(false);
    }
    for _ in 0..n {
        let b = sys.drift(z);
        let mut next = [z[0] + cfg.dt * b[0], z[1] + cfg.dt * b[1]];
        if noisy {
            let g = sys.diffusion(z);
            let xi = [normal.sample(), normal.sample()];
            next = [next[0] + g[0] * amp * xi[0], next[1] + g[1] * amp * xi[1]];
        }
        z = next;
        if !(z[0] > 0.0) {
            visit(State::from(z));
            return Ok(true);
        }
        if !visit(State::from(z)) {
            return Ok(false);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_runs: usize,
    pub escapes: usize,
    pub fraction: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

/// Fraction of `cfg.runs` paths from `z_star` that leave the region bounded
/// by `boundary` before `cfg.horizon`. Run `r` uses the stream derived from
/// `(seed, r)`, so the same runs are reused across horizons.
pub fn escape_fraction<S: System>(sys: &S, z_star: State, boundary: &LimitCycle, cfg: &SimConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    let escapes: Vec<bool> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let mut escaped = false;
            simulate(sys, z_star, cfg, derive(cfg.seed, r as u64), |z| {
                escaped = !boundary.contains(z);
                !escaped
            })?;
            Ok(escaped)
        })
        .collect::<Result<_>>()?;
    let escapes = escapes.into_iter().filter(|&e| e).count();
    Ok(EnsembleSummary {
        n_runs: cfg.runs,
        escapes,
        fraction: if cfg.runs == 0 { 0.0 } else { escapes as f64 / cfg.runs as f64 },
        horizon: cfg.horizon,
        noise_scale: cfg.noise_scale,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, Scheme};
    use crate::toys::LinearSystem;

    fn cfg(noise: f64) -> SimConfig {
        SimConfig { dt: 1e-2, horizon: 1.0, seed: 4, noise_scale: noise, runs: 1 }
    }

    #[test]
    fn zero_noise_is_deterministic_euler() {
        let sys = LinearSystem::ou();
        let z0 = State::new(1.5, -0.7);
        let sde = euler_maruyama(&sys, z0, &cfg(0.0)).unwrap();
        let ode = integrate(&sys, z0, 1.0, 1e-2, Scheme::Euler).unwrap();
        assert_eq!(sde.path.states, ode.states);
        assert!(!sde.terminated);
    }

    #[test]
    fn fixed_seed_reproduces() {
        let sys = LinearSystem::ou();
        let z0 = State::new(1.0, 0.0);
        let a = euler_maruyama(&sys, z0, &cfg(1.0)).unwrap();
        let b = euler_maruyama(&sys, z0, &cfg(1.0)).unwrap();
        assert_eq!(a, b);
        let c = euler_maruyama(&sys, z0, &SimConfig { seed: 5, ..cfg(1.0) }).unwrap();
        assert_ne!(a.path.states, c.path.states);
    }

    #[test]
    fn crossing_zero_terminates() {
        let sys = LinearSystem { shift: [-100.0, 0.0], ..LinearSystem::free() };
        let p = euler_maruyama(&sys, State::new(1.0, 0.0), &cfg(0.0)).unwrap();
        assert!(p.terminated);
        assert_eq!(p.path.len(), 2);
        assert!(p.path.endpoint().c <= 0.0);
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(-1.0).validate().is_err());
        assert!(SimConfig { dt: 0.0, ..cfg(1.0) }.validate().is_err());
        let sys = LinearSystem::ou();
        assert!(euler_maruyama(&sys, State::new(0.0, 0.0), &cfg(1.0)).is_err());
    }
}
