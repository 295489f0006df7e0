use transpath::dynamics::carbon_portrait;
use transpath::sde::*;
use transpath::toys::LinearSystem;
use transpath::{CarbonParams, CarbonSystem, State};

fn endpoints(sys: &LinearSystem, z0: State, horizon: f64, runs: u64) -> Vec<State> {
    (0..runs)
        .map(|s| {
            let cfg = SimConfig { dt: 1e-2, horizon, seed: s, noise_scale: 1.0, runs: 1 };
            euler_maruyama(sys, z0, &cfg).unwrap().path.endpoint()
        })
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn brownian_variance_law() {
    let sys = LinearSystem::free();
    let ends = endpoints(&sys, State::new(5.0, 5.0), 2.0, 10_000);
    for k in 0..2 {
        let xs: Vec<f64> = ends.iter().map(|e| e.arr()[k]).collect();
        let (_, var) = mean_var(&xs);
        assert!((var - 2.0).abs() <= 0.05 * 2.0, "coordinate {k}: variance {var}");
    }
}

#[test]
fn ou_weak_mean_matches_deterministic() {
    let sys = LinearSystem::ou();
    let z0 = State::new(2.0, 1.0);
    let horizon = 1.0;
    let ends = endpoints(&sys, z0, horizon, 10_000);
    // Euler mean recursion m ← (1 − dt) m, the deterministic scheme's value
    let decay = (1.0f64 - 1e-2).powi(100);
    for (k, x0) in [z0.c, z0.w].into_iter().enumerate() {
        let xs: Vec<f64> = ends.iter().map(|e| e.arr()[k]).collect();
        let (m, var) = mean_var(&xs);
        let se = (var / xs.len() as f64).sqrt();
        assert!((m - x0 * decay).abs() <= 3.0 * se, "coordinate {k}: mean {m} vs {}", x0 * decay);
        assert!((m - x0 * (-horizon).exp()).abs() <= 3.0 * se + 0.01);
    }
}

#[test]
fn disjoint_seeds_are_uncorrelated() {
    let sys = LinearSystem::free();
    let a = endpoints(&sys, State::new(1.0, 1.0), 1.0, 4000);
    let b: Vec<State> = (4000..8000u64)
        .map(|s| {
            let cfg = SimConfig { dt: 1e-2, horizon: 1.0, seed: s, noise_scale: 1.0, runs: 1 };
            euler_maruyama(&sys, State::new(1.0, 1.0), &cfg).unwrap().path.endpoint()
        })
        .collect();
    let xa: Vec<f64> = a.iter().map(|e| e.c).collect();
    let xb: Vec<f64> = b.iter().map(|e| e.c).collect();
    let (ma, va) = mean_var(&xa);
    let (mb, vb) = mean_var(&xb);
    let cov = xa.iter().zip(&xb).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (xa.len() as f64 - 1.0);
    let rho = cov / (va * vb).sqrt();
    // |ρ| under independence is ~ 1/√4000 ≈ 0.016
    assert!(rho.abs() < 0.06, "{rho}");
}

fn carbon() -> (CarbonSystem, transpath::dynamics::PhasePortrait) {
    let sys = CarbonSystem::new(CarbonParams::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/params.json")).unwrap());
    let portrait = carbon_portrait(&sys, 720).unwrap();
    (sys, portrait)
}

#[test]
fn escape_fraction_limits_and_monotonicity() {
    let (sys, portrait) = carbon();
    let z = portrait.fixed_point.location;
    let base = SimConfig { dt: 1e-3, horizon: 0.5, seed: 11, noise_scale: 0.0, runs: 200 };
    let none = escape_fraction(&sys, z, &portrait.unstable, &base).unwrap();
    assert_eq!(none.escapes, 0);
    let loud = escape_fraction(&sys, z, &portrait.unstable, &SimConfig { noise_scale: 10.0, ..base }).unwrap();
    assert!(loud.fraction >= 0.9, "{loud:?}");
    let mut last = 0.0;
    let mut seen = vec![];
    for horizon in [0.05, 0.1, 0.2, 0.4] {
        let s = escape_fraction(&sys, z, &portrait.unstable, &SimConfig { noise_scale: 0.3, horizon, ..base }).unwrap();
        assert!(s.fraction >= last, "{horizon}: {} < {last}", s.fraction);
        last = s.fraction;
        seen.push(s.fraction);
    }
    assert!(seen[0] < seen[3], "{seen:?}");
    let json = serde_json::to_value(none).unwrap();
    for key in ["n_runs", "escapes", "fraction", "T", "noise_scale", "seed"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}
