use transpath::dynamics::{carbon_portrait, find_fixed_point, integrate, PhasePortrait, Scheme};
use transpath::{CarbonParams, CarbonSystem, State, System};

fn carbon() -> CarbonSystem {
    CarbonSystem::new(CarbonParams::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/params.json")).unwrap())
}

fn portrait(sys: &CarbonSystem) -> PhasePortrait {
    carbon_portrait(sys, 3600).unwrap()
}

#[test]
fn carbon_structure() {
    let sys = carbon();
    let p = portrait(&sys);
    assert!(p.is_nested());
    assert!(p.fixed_point.stable);
    // complex pair: a stable spiral
    let [e0, e1] = p.fixed_point.eigenvalues;
    assert!(e0.0 < 0.0 && e1.0 < 0.0 && e0.1 != 0.0 && e0.1 == -e1.1);
    assert!(p.stable.stable && !p.unstable.stable);
    assert!(p.stable.period > p.unstable.period);
}

#[test]
fn fixed_point_is_unique() {
    let sys = carbon();
    let z = find_fixed_point(&sys, sys.fixed_point_guess()).unwrap().location;
    for c in [5.0, 20.0, 50.0, 90.0, 150.0] {
        for w in [2500.0, 4500.0, 6500.0] {
            if let Ok(r) = find_fixed_point(&sys, State::new(c, w)) {
                assert!(r.location.distance(z) < 1e-6, "second root {:?} from ({c}, {w})", r.location);
            }
        }
    }
}

#[test]
fn cycle_detection_is_deterministic() {
    let sys = carbon();
    let a = portrait(&sys);
    let b = portrait(&sys);
    assert_eq!(a, b);
}

#[test]
fn cycles_close_and_are_well_sampled() {
    let sys = carbon();
    let p = portrait(&sys);
    for cycle in [&p.stable, &p.unstable] {
        assert_eq!(cycle.len(), 3600);
        let cmax = cycle.points.iter().map(|z| z.c).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(cycle.points[0].c, cmax);
        // uniform in time: each gap is at most the peak speed times the time step
        let vmax = cycle.points.iter().map(|z| {
            let b = sys.drift(z.arr());
            b[0].hypot(b[1])
        }).fold(0.0, f64::max);
        let h = cycle.period / cycle.len() as f64;
        assert!(cycle.max_gap() <= 1.01 * vmax * h);
        assert!(cycle.max_gap() >= 0.9 * vmax * h);
        // one period of the flow returns to the start
        let orbit = integrate(&sys, cycle.points[0], cycle.period, cycle.period / 20_000.0, Scheme::Rk4).unwrap();
        let miss = orbit.endpoint().distance(cycle.points[0]);
        assert!(miss < 1e-6 * cycle.arc_length(), "miss {miss}");
        // and a tenth of a period lands on the sample at that phase
        let k = cycle.len() / 10;
        let part = integrate(&sys, cycle.points[0], cycle.time_of(k), cycle.time_of(k) / 2000.0, Scheme::Rk4).unwrap();
        assert!(part.endpoint().distance(cycle.points[k]) < 1e-5 * cycle.arc_length());
    }
}

#[test]
fn rk4_error_drops_sixteenfold_on_halving() {
    let sys = carbon();
    let z0 = State::new(60.0, 5000.0);
    let horizon = 0.5;
    let reference = integrate(&sys, z0, horizon, 1e-4, Scheme::Rk4).unwrap().endpoint();
    let err = |dt: f64| integrate(&sys, z0, horizon, dt, Scheme::Rk4).unwrap().endpoint().distance(reference);
    let ratio = err(1e-2) / err(5e-3);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    let ratio = err(2e-2) / err(1e-2);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}
