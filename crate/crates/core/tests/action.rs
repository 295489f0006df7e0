use transpath::action::{action, action_scale, lagrangian, stationarity_residual};
use transpath::dynamics::{find_fixed_point, Path, Scheme};
use transpath::shooting::integrate_el;
use transpath::toys::LinearSystem;
use transpath::{CarbonParams, CarbonSystem, State, System};

fn carbon() -> CarbonSystem {
    CarbonSystem::new(CarbonParams::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/params.json")).unwrap())
}

fn sampled(n: usize, horizon: f64, f: impl Fn(f64) -> State) -> Path {
    let dt = horizon / (n - 1) as f64;
    Path::new(0.0, dt, (0..n).map(|i| f(i as f64 * dt)).collect())
}

// OU extremal from the origin to (1, 0): x = sinh t / sinh T
fn ou_escape(n: usize, horizon: f64) -> Path {
    sampled(n, horizon, |t| State::new(t.sinh() / horizon.sinh(), 0.0))
}

fn ou_escape_action(horizon: f64) -> f64 {
    let s = horizon.sinh();
    ((2.0 * horizon).exp() - 1.0) / (4.0 * s * s) - horizon
}

#[test]
fn ou_lagrangian_by_hand() {
    let ou = LinearSystem::ou();
    // |v − b|² + div b with b = −z, div b = −2
    let z = State::new(0.5, -2.0);
    let v = [1.0, 3.0];
    let want = (1.0f64 + 0.5).powi(2) + (3.0f64 - 2.0).powi(2) - 2.0;
    assert!((lagrangian(&ou, z, v).unwrap() - want).abs() < 1e-14);
}

#[test]
fn ou_escape_action_converges_at_second_order() {
    let ou = LinearSystem::ou();
    for horizon in [0.5, 1.0, 3.0] {
        let exact = ou_escape_action(horizon);
        let err = |n: usize| (action(&ou, &ou_escape(n, horizon)).unwrap() - exact).abs();
        assert!(err(401) < 1e-4, "T={horizon}: {}", err(401));
        let ratio = err(101) / err(201);
        assert!((3.0..5.0).contains(&ratio), "T={horizon}: ratio {ratio}");
    }
}

#[test]
fn carbon_action_richardson_ratio() {
    let sys = carbon();
    let z = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap().location;
    let end = State::new(120.0, 4600.0);
    let path = |n: usize| {
        sampled(n, 3.0, |t| {
            // smooth, non-polynomial in t so no rule is exact
            let u = (1.0 - (-t).exp()) / (1.0 - (-3.0f64).exp());
            State::new(z.c + u * (end.c - z.c), z.w + u * (end.w - z.w) + 50.0 * (std::f64::consts::PI * t / 3.0).sin())
        })
    };
    let s: Vec<f64> = [201, 401, 801].iter().map(|&n| action(&sys, &path(n)).unwrap()).collect();
    let ratio = (s[0] - s[1]) / (s[1] - s[2]);
    assert!((3.0..5.0).contains(&ratio), "{s:?} ratio {ratio}");
}

#[test]
fn exact_extremals_are_stationary() {
    let ou = LinearSystem::ou();
    for n in [101, 1001] {
        let p = ou_escape(n, 2.0);
        let r = stationarity_residual(&ou, &p).unwrap();
        assert!(r <= 1e-3 * action_scale(&ou, &p).unwrap(), "n={n}: {r}");
    }
    // a non-extremal with the same ends is not
    let line = sampled(1001, 2.0, |t| State::new(t / 2.0, 0.0));
    assert!(stationarity_residual(&ou, &line).unwrap() > 0.1);
}

#[test]
fn integrated_carbon_extremal_is_stationary() {
    let sys = carbon();
    let z = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap().location;
    let drift = sys.drift(z.arr());
    assert!(drift[0].abs() < 1e-9);
    let p = integrate_el(&sys, z, [20.0, -150.0], 2.0, 1e-3, Scheme::Rk4).unwrap();
    assert!(p.states.iter().all(|s| s.c > 0.0));
    let scale = action_scale(&sys, &p).unwrap();
    let r = stationarity_residual(&sys, &p).unwrap();
    assert!(r <= 1e-3 * scale, "residual {r}, scale {scale}");
    // the same velocity integrated with a much coarser Euler step is a worse extremal
    let coarse = integrate_el(&sys, z, [20.0, -150.0], 2.0, 1e-2, Scheme::Euler).unwrap();
    assert!(stationarity_residual(&sys, &coarse).unwrap() > r);
}
