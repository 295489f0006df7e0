//! Deterministic phase-space analysis: fixed-step integration, fixed points,
//! and limit cycles located on a Poincaré section.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::model::{CarbonSystem, State, System};
use crate::scalar::Real;

/// States beyond this magnitude count as a blow-up.
pub const BLOWUP_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Rk4,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(Error::Config(format!("unknown scheme `{other}` (euler|rk4)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// One fixed step of `ẏ = f(y)`.
#[inline]
pub fn step<T: Real, const N: usize>(
    scheme: Scheme,
    y: [T; N],
    dt: T,
    f: impl Fn([T; N]) -> [T; N],
) -> [T; N] {
    let axpy = |a: [T; N], s: T, b: [T; N]| -> [T; N] {
        let mut out = a;
        for i in 0..N {
            out[i] = a[i] + s * b[i];
        }
        out
    };
    match scheme {
        Scheme::Euler => axpy(y, dt, f(y)),
        Scheme::Rk4 => {
            let half = dt * T::cst(0.5);
            let k1 = f(y);
            let k2 = f(axpy(y, half, k1));
            let k3 = f(axpy(y, half, k2));
            let k4 = f(axpy(y, dt, k3));
            let sixth = dt / T::cst(6.0);
            let mut out = y;
            for i in 0..N {
                out[i] = y[i] + sixth * (k1[i] + T::cst(2.0) * (k2[i] + k3[i]) + k4[i]);
            }
            out
        }
    }
}

/// Number of fixed steps covering `[0, horizon]`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T > 0, got dt = {dt}, T = {horizon}")));
    }
    Ok((horizon / dt).round().max(1.0) as usize)
}

/// A uniformly sampled trajectory; unit of time is 10⁴ years for the carbon model.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T = f64> {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<State<T>>,
    pub velocities: Option<Vec<[T; 2]>>,
}

impl<T: Real> Path<T> {
    pub fn new(t0: f64, dt: f64, states: Vec<State<T>>) -> Self {
        Path { t0, dt, states, velocities: None }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.states.len().saturating_sub(1)) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn start(&self) -> State<T> {
        self.states[0]
    }

    pub fn endpoint(&self) -> State<T> {
        *self.states.last().expect("non-empty path")
    }
}

impl Path<f64> {
    /// Straight-line samples from `a` to `b` over `[0, horizon]`.
    pub fn linear(a: State, b: State, horizon: f64, n: usize) -> Self {
        assert!(n >= 2);
        let dt = horizon / (n - 1) as f64;
        let states = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                State::new(a.c + s * (b.c - a.c), a.w + s * (b.w - a.w))
            })
            .collect();
        Path::new(0.0, dt, states)
    }
}

fn check_blowup(z: &[f64], t: f64) -> Result<()> {
    if z.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LIMIT) {
        return Err(Error::Divergence { t });
    }
    Ok(())
}

/// Integrate the deterministic flow `ż = b̃(z)` from `z0` over `[0, horizon]`.
pub fn integrate<T: Real, S: System>(
    sys: &S,
    z0: State<T>,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Path<T>> {
    let n = step_count(horizon, dt)?;
    let h = T::cst(dt);
    let mut states = Vec::with_capacity(n + 1);
    let mut z = z0.arr();
    states.push(z0);
    for i in 1..=n {
        z = step(scheme, z, h, |y| sys.drift(y));
        check_blowup(&[z[0].re(), z[1].re()], dt * i as f64)?;
        states.push(State::from(z));
    }
    Ok(Path::new(0.0, dt, states))
}

/// Exact drift Jacobian `∂b̃ᵢ/∂zⱼ` by dual numbers.
pub fn drift_jacobian<S: System>(sys: &S, z: [f64; 2]) -> [[f64; 2]; 2] {
    let dx = sys.drift([Dual::variable(z[0]), Dual::constant(z[1])]);
    let dy = sys.drift([Dual::constant(z[0]), Dual::variable(z[1])]);
    [[dx[0].eps, dy[0].eps], [dx[1].eps, dy[1].eps]]
}

fn fd_jacobian<S: System>(sys: &S, z: [f64; 2]) -> [[f64; 2]; 2] {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let h = 1e-6 * z[j].abs().max(1.0);
        let mut zp = z;
        let mut zm = z;
        zp[j] += h;
        zm[j] -= h;
        let fp = sys.drift(zp);
        let fm = sys.drift(zm);
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Eigenvalues `(re, im)` of a real 2×2 matrix.
pub fn eigenvalues2(m: [[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [(half + r, 0.0), (half - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [(half, r), (half, -r)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: State,
    pub eigenvalues: [(f64, f64); 2],
    pub stable: bool,
}

impl FixedPointReport {
    /// `{c, w, eig_re, eig_im, stable}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "c": self.location.c,
            "w": self.location.w,
            "eig_re": [self.eigenvalues[0].0, self.eigenvalues[1].0],
            "eig_im": [self.eigenvalues[0].1, self.eigenvalues[1].1],
            "stable": self.stable,
        })
    }
}

/// Newton iteration on the drift with a finite-difference Jacobian and
/// step halving; eigenvalues come from the exact Jacobian at the root.
pub fn find_fixed_point<S: System>(sys: &S, guess: State) -> Result<FixedPointReport> {
    const TOL: f64 = 1e-9;
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);
    let mut z = guess.arr();
    if !sys.in_domain(z) {
        return Err(Error::Domain(format!("fixed-point guess {z:?} outside the working domain")));
    }
    let mut r = sys.drift(z);
    for _ in 0..100 {
        let j = fd_jacobian(sys, z);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence("singular Jacobian in Newton iteration".into()));
        }
        let dz = [
            (j[1][1] * r[0] - j[0][1] * r[1]) / det,
            (-j[1][0] * r[0] + j[0][0] * r[1]) / det,
        ];
        // a small residual alone also holds where the drift merely flattens
        // out (f(c) -> 0 as c -> 0); the Newton step must vanish too
        let settled = (0..2).all(|k| dz[k].abs() <= (1e-6 * z[k].abs()).max(1e-12));
        if norm(r) <= TOL && settled {
            let eig = eigenvalues2(drift_jacobian(sys, z));
            return Ok(FixedPointReport {
                location: State::from(z),
                eigenvalues: eig,
                stable: eig.iter().all(|e| e.0 < 0.0),
            });
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [z[0] - lambda * dz[0], z[1] - lambda * dz[1]];
            if sys.in_domain(trial) {
                let rt = sys.drift(trial);
                if norm(rt) < norm(r) || norm(rt) <= TOL {
                    z = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // plain step; the residual test decides
            z = [z[0] - dz[0], z[1] - dz[1]];
            if !sys.in_domain(z) {
                return Err(Error::NoConvergence("Newton iterate left the domain".into()));
            }
            r = sys.drift(z);
        }
    }
    Err(Error::NoConvergence(format!("Newton did not converge in 100 iterations (|b| = {})", norm(r))))
}

/// A periodic orbit sampled uniformly in time; `points[k]` sits at phase
/// `k·period/N` after the anchor, and indices follow the forward flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub period: f64,
    pub points: Vec<State>,
    pub stable: bool,
    pub anchor_index: usize,
}

impl LimitCycle {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.period * index as f64 / self.points.len() as f64
    }

    /// Closed polyline length.
    pub fn arc_length(&self) -> f64 {
        let n = self.points.len();
        (0..n).map(|i| self.points[i].distance(self.points[(i + 1) % n])).sum()
    }

    /// Index whose phase is closest to `fraction` of a period past the anchor.
    pub fn index_at_phase(&self, fraction: f64) -> usize {
        let n = self.points.len();
        ((fraction.rem_euclid(1.0) * n as f64).round() as usize) % n
    }

    /// Index of the point where `|dc/dt|` is largest.
    pub fn max_dc_rate_index<S: System>(&self, sys: &S) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let r = sys.drift(p.arr())[0].abs();
            if r > best.1 {
                best = (i, r);
            }
        }
        best.0
    }

    /// Whether `p` lies inside the closed polyline (nonzero winding number).
    pub fn contains(&self, p: State) -> bool {
        winding_number(&self.points, p) != 0
    }

    pub fn max_gap(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| self.points[i].distance(self.points[(i + 1) % n]))
            .fold(0.0, f64::max)
    }
}

/// Winding number of a closed polygon around `p`.
pub fn winding_number(poly: &[State], p: State) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.c - a.c) * (p.w - a.w) - (p.c - a.c) * (b.w - a.w);
        if a.w <= p.w {
            if b.w > p.w && cross > 0.0 {
                wn += 1;
            }
        } else if b.w <= p.w && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions {
    /// Poincaré section `c = section_c` (the fixed point's c).
    pub section_c: f64,
    pub dt: f64,
    /// Budget of integration time before giving up.
    pub max_time: f64,
    /// Relative convergence of successive crossings (position and return time).
    pub tol: f64,
    /// Samples per period in the returned cycle.
    pub samples: usize,
    /// Orbits with a smaller c-range are treated as a fixed point.
    pub min_amplitude: f64,
}

impl CycleOptions {
    pub fn new(section_c: f64) -> Self {
        CycleOptions {
            section_c,
            dt: 1e-3,
            max_time: 5000.0,
            tol: 1e-6,
            samples: 3600,
            min_amplitude: 1e-3,
        }
    }
}

struct Crossing {
    t: f64,
    z: [f64; 2],
}

/// Hénon's trick: one RK4 step in `c` as the independent variable lands
/// exactly on the section.
fn land_on_section<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, z: [f64; 2], t: f64, target_c: f64) -> Crossing {
    let g = |y: [f64; 3]| -> [f64; 3] {
        let d = f([y[0], y[1]]);
        [1.0, d[1] / d[0], 1.0 / d[0]]
    };
    let y = step(Scheme::Rk4, [z[0], z[1], t], target_c - z[0], g);
    Crossing { t: y[2], z: [target_c, y[1]] }
}

/// Locate a limit cycle by iterating upward crossings (`ċ > 0`) of the
/// section until position and return time settle, then sample one period.
/// A `Backward` search follows the reversed flow, which makes repelling
/// cycles attracting; the returned points still follow the forward flow.
pub fn detect_limit_cycle<S: System>(
    sys: &S,
    z0: State,
    direction: TimeDirection,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    if opts.samples < 100 {
        return Err(Error::Domain(format!("need at least 100 samples, got {}", opts.samples)));
    }
    let sign = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Backward => -1.0,
    };
    let f = |z: [f64; 2]| {
        let d = sys.drift(z);
        [sign * d[0], sign * d[1]]
    };
    let cs = opts.section_c;
    let n_max = (opts.max_time / opts.dt).ceil() as usize;
    let mut z = z0.arr();
    let mut t = 0.0;
    let mut last: Option<Crossing> = None;
    let mut last_period: Option<f64> = None;
    let mut settled: Option<(Crossing, f64)> = None;
    for _ in 0..n_max {
        let next = step(Scheme::Rk4, z, opts.dt, f);
        let t_next = t + opts.dt;
        check_blowup(&next, t_next)?;
        if !sys.in_domain(next) {
            return Err(Error::MetricSingular { c: next[0], t: Some(t_next) });
        }
        if z[0] < cs && next[0] >= cs {
            let cross = land_on_section(&f, z, t, cs);
            if let Some(prev) = &last {
                let period = cross.t - prev.t;
                let dw = (cross.z[1] - prev.z[1]).abs();
                if let Some(pp) = last_period {
                    let pos_ok = dw <= opts.tol * cross.z[1].abs().max(1.0);
                    let per_ok = (period - pp).abs() <= opts.tol * period.max(1.0);
                    if pos_ok && per_ok {
                        settled = Some((cross, period));
                        break;
                    }
                }
                last_period = Some(period);
            }
            last = Some(cross);
        }
        z = next;
        t = t_next;
    }
    let (anchor, period) = settled.ok_or_else(|| {
        Error::NoConvergence(format!("no settled limit cycle within time budget {}", opts.max_time))
    })?;

    // sample one period along the (possibly reversed) flow
    let n = opts.samples;
    let sub = (period / n as f64 / opts.dt).ceil().max(1.0) as usize;
    let h = period / (n * sub) as f64;
    let mut pts = Vec::with_capacity(n + 1);
    let mut y = anchor.z;
    pts.push(State::from(y));
    for _ in 0..n {
        for _ in 0..sub {
            y = step(Scheme::Rk4, y, h, f);
        }
        pts.push(State::from(y));
    }
    let closure = pts[0].distance(pts[n]);
    if closure > 1e-4 {
        return Err(Error::NoConvergence(format!("cycle failed to close: gap {closure}")));
    }
    pts.truncate(n);
    let (cmin, cmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.c), hi.max(p.c))
    });
    if cmax - cmin < opts.min_amplitude {
        return Err(Error::NoConvergence("orbit collapsed onto a fixed point".into()));
    }
    if direction == TimeDirection::Backward {
        // reversed-time samples at t_k = -k h; reorder to forward time
        pts[1..].reverse();
    }
    let cycle = LimitCycle {
        period,
        points: pts,
        stable: direction == TimeDirection::Forward,
        anchor_index: 0,
    };
    Ok(discretize_cycle(&cycle, n))
}

/// Fixed point with the cycles around it.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePortrait {
    pub fixed_point: FixedPointReport,
    pub stable: LimitCycle,
    pub unstable: LimitCycle,
}

impl PhasePortrait {
    /// Fixed point inside the unstable cycle, which lies inside the stable one.
    pub fn is_nested(&self) -> bool {
        self.unstable.contains(self.fixed_point.location)
            && self.stable.contains(self.fixed_point.location)
            && self.unstable.points.iter().all(|p| self.stable.contains(*p))
    }
}

/// Stable cycle forward from `outer`, unstable cycle backward from `inner`.
pub fn phase_portrait<S: System>(
    sys: &S,
    guess: State,
    outer: State,
    inner: State,
    samples: usize,
) -> Result<PhasePortrait> {
    let fixed_point = find_fixed_point(sys, guess)?;
    let mut opts = CycleOptions::new(fixed_point.location.c);
    opts.samples = samples;
    let stable = detect_limit_cycle(sys, outer, TimeDirection::Forward, &opts)?;
    let unstable = detect_limit_cycle(sys, inner, TimeDirection::Backward, &opts)?;
    Ok(PhasePortrait { fixed_point, stable, unstable })
}

/// Phase portrait of the carbon model, started from offsets in w scaled by μ.
pub fn carbon_portrait(sys: &CarbonSystem, samples: usize) -> Result<PhasePortrait> {
    let guess = sys.fixed_point_guess();
    let mu = sys.params.mu;
    let fp = find_fixed_point(sys, guess)?.location;
    phase_portrait(
        sys,
        fp,
        State::new(fp.c, fp.w + 5.0 * mu),
        State::new(fp.c, fp.w + 0.05 * mu),
        samples,
    )
}

/// Periodic Catmull-Rom interpolation at fractional sample position `s`.
fn interpolate(points: &[State], s: f64) -> State {
    let n = points.len() as isize;
    let i = s.floor() as isize;
    let u = s - i as f64;
    let at = |k: isize| points[(k.rem_euclid(n)) as usize];
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let cr = |a: f64, b: f64, c: f64, d: f64| {
        0.5 * (2.0 * b
            + (-a + c) * u
            + (2.0 * a - 5.0 * b + 4.0 * c - d) * u * u
            + (-a + 3.0 * b - 3.0 * c + d) * u * u * u)
    };
    State::new(cr(p0.c, p1.c, p2.c, p3.c), cr(p0.w, p1.w, p2.w, p3.w))
}

/// Resample to exactly `n` points uniform in time, with index 0 at the point
/// of maximum c and indices increasing along the flow.
pub fn discretize_cycle(cycle: &LimitCycle, n: usize) -> LimitCycle {
    let m = cycle.points.len();
    assert!(m >= 4, "cycle needs at least 4 samples");
    let (imax, _) = cycle
        .points
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p.c > best.1 { (i, p.c) } else { best });
    // parabolic refinement of the max-c phase
    let c = |k: isize| cycle.points[k.rem_euclid(m as isize) as usize].c;
    let k = imax as isize;
    let (a, b, d) = (c(k - 1), c(k), c(k + 1));
    let denom = a - 2.0 * b + d;
    let shift = if denom != 0.0 { (0.5 * (a - d) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let s0 = imax as f64 + shift;
    let points = (0..n)
        .map(|j| interpolate(&cycle.points, s0 + j as f64 * m as f64 / n as f64))
        .collect();
    LimitCycle { period: cycle.period, points, stable: cycle.stable, anchor_index: 0 }
}
