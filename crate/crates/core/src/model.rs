//! The carbonate model: parameters, scalar primitives, drift and diffusion,
//! and the derivative oracle every downstream module relies on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dual::{lift2, lift3, mixed2, mixed3, taylor3, taylor4, Dual2, Dual3, Dual4};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point `(c, w)` in concentration space, μmol·kg⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State<T = f64> {
    pub c: T,
    pub w: T,
}

impl<T: Real> State<T> {
    pub fn new(c: T, w: T) -> Self {
        State { c, w }
    }

    #[inline]
    pub fn arr(self) -> [T; 2] {
        [self.c, self.w]
    }

    pub fn distance(self, other: Self) -> T {
        (self.c - other.c).hypot(self.w - other.w)
    }
}

impl<T: Real> From<[T; 2]> for State<T> {
    #[inline]
    fn from(z: [T; 2]) -> Self {
        State { c: z[0], w: z[1] }
    }
}

/// A 2-D stochastic system `dz = b̃(z) dt + diag(g1(c), g2) dB`.
///
/// The first diffusion entry may depend on the first coordinate only and the
/// second is constant; this is the class whose Onsager-Machlup geometry is
/// handled in closed form by [`crate::action`].
pub trait System: Send + Sync {
    fn drift<T: Real>(&self, z: [T; 2]) -> [T; 2];

    fn g1<T: Real>(&self, c: T) -> T;

    fn g2(&self) -> f64;

    /// Whether `z` is inside the working domain.
    fn in_domain(&self, z: [f64; 2]) -> bool {
        let g = self.g1(z[0]);
        g.is_finite() && g != 0.0
    }

    fn diffusion(&self, z: [f64; 2]) -> [f64; 2] {
        [self.g1(z[0]), self.g2()]
    }

    /// Drift partials up to third order when `third`, else second.
    fn drift_jet(&self, z: [f64; 2], third: bool) -> DriftJet
    where
        Self: Sized,
    {
        if third {
            drift_jet3(self, z)
        } else {
            drift_jet2(self, z)
        }
    }

    /// `[g1, g1', g1'', g1''', g1'''']` at `c`.
    fn g1_jet(&self, c: f64) -> [f64; 5]
    where
        Self: Sized,
    {
        g1_jet4(self, c)
    }
}

impl<S: System> System for &S {
    fn drift<T: Real>(&self, z: [T; 2]) -> [T; 2] {
        (**self).drift(z)
    }
    fn g1<T: Real>(&self, c: T) -> T {
        (**self).g1(c)
    }
    fn g2(&self) -> f64 {
        (**self).g2()
    }
    fn in_domain(&self, z: [f64; 2]) -> bool {
        (**self).in_domain(z)
    }
    fn drift_jet(&self, z: [f64; 2], third: bool) -> DriftJet {
        (**self).drift_jet(z, third)
    }
    fn g1_jet(&self, c: f64) -> [f64; 5] {
        (**self).g1_jet(c)
    }
}

/// Carbonate-model parameters. Values are configuration inputs; nothing here
/// has a built-in default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonParams {
    /// Characteristic concentration μ.
    pub mu: f64,
    /// Maximum burial rate.
    pub b: f64,
    /// Maximum respiration feedback.
    pub theta: f64,
    /// CO₂ injection rate.
    pub nu: f64,
    pub c_p: f64,
    pub c_x: f64,
    pub c_f: f64,
    pub w0: f64,
    pub gamma: f64,
    pub beta: f64,
    pub f0: f64,
}

const PARAM_KEYS: [&str; 11] =
    ["mu", "b", "theta", "nu", "c_p", "c_x", "c_f", "w0", "gamma", "beta", "f0"];
const POSITIVE_KEYS: [&str; 7] = ["mu", "c_p", "c_x", "c_f", "f0", "gamma", "beta"];

/// Lower/upper bounds of `c_x` for which the model is bistable.
pub const BISTABLE_CX: (f64, f64) = (56.0, 62.61);

impl CarbonParams {
    /// Parse a JSON object with exactly the keys
    /// `mu, b, theta, nu, c_p, c_x, c_f, w0, gamma, beta, f0`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("parameter file must be a JSON object".into()))?;
        for key in obj.keys() {
            if !PARAM_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown parameter key `{key}`")));
            }
        }
        let mut vals = [0.0; 11];
        for (slot, key) in vals.iter_mut().zip(PARAM_KEYS) {
            let v = obj
                .get(key)
                .ok_or_else(|| Error::Config(format!("missing parameter `{key}`")))?;
            *slot = v
                .as_f64()
                .ok_or_else(|| Error::Config(format!("parameter `{key}` must be a number")))?;
        }
        let [mu, b, theta, nu, c_p, c_x, c_f, w0, gamma, beta, f0] = vals;
        let p = CarbonParams { mu, b, theta, nu, c_p, c_x, c_f, w0, gamma, beta, f0 };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn validate(&self) -> Result<()> {
        for key in POSITIVE_KEYS {
            let v = self.get(key);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("parameter `{key}` must be positive, got {v}")));
            }
        }
        for key in ["b", "theta", "w0", "nu"] {
            if !self.get(key).is_finite() {
                return Err(Error::Config(format!("parameter `{key}` must be finite")));
            }
        }
        if self.nu < 0.0 {
            return Err(Error::Config(format!("parameter `nu` must be >= 0, got {}", self.nu)));
        }
        Ok(())
    }

    /// Guard for runs labeled bistable.
    pub fn check_bistable(&self) -> Result<()> {
        let (lo, hi) = BISTABLE_CX;
        if self.c_x > lo && self.c_x < hi {
            Ok(())
        } else {
            Err(Error::Config(format!("c_x = {} outside the bistable window ({lo}, {hi})", self.c_x)))
        }
    }

    fn get(&self, key: &str) -> f64 {
        match key {
            "mu" => self.mu,
            "b" => self.b,
            "theta" => self.theta,
            "nu" => self.nu,
            "c_p" => self.c_p,
            "c_x" => self.c_x,
            "c_f" => self.c_f,
            "w0" => self.w0,
            "gamma" => self.gamma,
            "beta" => self.beta,
            "f0" => self.f0,
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_cx(mut self, c_x: f64) -> Self {
        self.c_x = c_x;
        self
    }
}

#[inline]
fn pow_param<T: Real>(x: T, p: f64) -> T {
    if p.fract() == 0.0 && p.abs() <= 16.0 {
        x.powi(p as i32)
    } else {
        x.powf(T::cst(p))
    }
}

// Evaluated as 1/(1 + (k/c)^γ) for c > 0, which is monotone in floating
// point; the c^γ/(c^γ + k^γ) form is not once c^γ dwarfs k^γ.
#[inline]
fn sigmoid_raw<T: Real>(c: T, c_half: f64, gamma: f64) -> T {
    if c.re() > 0.0 {
        T::one() / (T::one() + pow_param(T::cst(c_half) / c, gamma))
    } else {
        let cg = pow_param(c, gamma);
        cg / (cg + T::cst(c_half.powf(gamma)))
    }
}

#[inline]
fn buffer_raw<T: Real>(c: T, p: &CarbonParams) -> T {
    T::cst(p.f0) * sigmoid_raw(c, p.c_f, p.beta)
}

/// `s(c, c_half) = c^γ / (c^γ + c_half^γ)`.
pub fn sigmoid<T: Real>(c: T, c_half: f64, gamma: f64) -> Result<T> {
    if !(c.re() >= 0.0) {
        return Err(Error::Domain(format!("sigmoid needs c >= 0, got {}", c.re())));
    }
    if !(c_half > 0.0 && gamma > 0.0) {
        return Err(Error::Domain(format!(
            "sigmoid needs c_half > 0 and gamma > 0, got {c_half}, {gamma}"
        )));
    }
    Ok(sigmoid_raw(c, c_half, gamma))
}

/// `s̄ = 1 − s`.
pub fn sigmoid_complement<T: Real>(c: T, c_half: f64, gamma: f64) -> Result<T> {
    Ok(T::one() - sigmoid(c, c_half, gamma)?)
}

/// Buffer function `f(c) = f₀ c^β / (c^β + c_f^β)`.
pub fn buffer<T: Real>(c: T, params: &CarbonParams) -> Result<T> {
    if !(c.re() >= 0.0) {
        return Err(Error::Domain(format!("buffer needs c >= 0, got {}", c.re())));
    }
    Ok(buffer_raw(c, params))
}

/// The carbonate system `dc = b̃¹ dt − μ f(c) dB¹`, `dw = b̃² dt + μ dB²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarbonSystem {
    pub params: CarbonParams,
}

impl CarbonSystem {
    pub fn new(params: CarbonParams) -> Self {
        CarbonSystem { params }
    }

    /// Checked drift: `c > 0` is required.
    pub fn drift_checked(&self, z: State) -> Result<[f64; 2]> {
        if !(z.c > 0.0) {
            return Err(Error::Domain(format!("drift needs c > 0, got {}", z.c)));
        }
        Ok(self.drift(z.arr()))
    }

    /// Starting guess for the fixed point: the drift vanishes where
    /// `s(c, c_p) = 1/b` on the nullcline `b̃¹ = 0`.
    pub fn fixed_point_guess(&self) -> State {
        let p = &self.params;
        let c = if p.b > 1.0 { p.c_p * (p.b - 1.0).powf(-1.0 / p.gamma) } else { p.c_p };
        let s = sigmoid_raw(c, p.c_p, p.gamma);
        let sbar = 1.0 - sigmoid_raw(c, p.c_x, p.gamma);
        let w = p.w0 - p.mu * (1.0 - p.b * s - p.theta * sbar - p.nu);
        State::new(c, w)
    }

    /// `(g1, g2) = (−μ f(c), μ)` plus whether the metric is singular there.
    pub fn diffusion_checked(&self, z: State) -> Result<([f64; 2], bool)> {
        let f = buffer(z.c, &self.params)?;
        Ok(([-self.params.mu * f, self.params.mu], f == 0.0))
    }
}

impl System for CarbonSystem {
    #[inline]
    fn drift<T: Real>(&self, z: [T; 2]) -> [T; 2] {
        let p = &self.params;
        let [c, w] = z;
        let mu = T::cst(p.mu);
        let one = T::one();
        let s_p = sigmoid_raw(c, p.c_p, p.gamma);
        let sbar_x = one - sigmoid_raw(c, p.c_x, p.gamma);
        let dw = w - T::cst(p.w0);
        let nu = T::cst(p.nu);
        let bs = T::cst(p.b) * s_p;
        let th = T::cst(p.theta) * sbar_x;
        [
            buffer_raw(c, p) * (mu * (one - bs - th - nu) + dw),
            mu * (one - bs + th + nu) - dw,
        ]
    }

    #[inline]
    fn g1<T: Real>(&self, c: T) -> T {
        -T::cst(self.params.mu) * buffer_raw(c, &self.params)
    }

    fn g2(&self) -> f64 {
        self.params.mu
    }

    fn in_domain(&self, z: [f64; 2]) -> bool {
        z[0] > 0.0 && z[0].is_finite() && z[1].is_finite()
    }

    // b̃¹ = f(c)·P(c, w) and b̃² = μB(c) − (w − w0) are built from univariate
    // jets of f, s(·, c_p) and s(·, c_x); much cheaper than bivariate duals.
    fn drift_jet(&self, z: [f64; 2], _third: bool) -> DriftJet {
        const BINOM: [[f64; 4]; 4] =
            [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        let p = &self.params;
        let [c, w] = z;
        let sp = taylor3(|v: Dual3| sigmoid_raw(v, p.c_p, p.gamma), c);
        let sx = taylor3(|v: Dual3| sigmoid_raw(v, p.c_x, p.gamma), c);
        let f = taylor3(|v: Dual3| buffer_raw(v, p), c);
        let mut pc = [0.0; 4];
        let mut bc = [0.0; 4];
        pc[0] = p.mu * (1.0 - p.b * sp[0] - p.theta * (1.0 - sx[0]) - p.nu) + w - p.w0;
        bc[0] = p.mu * (1.0 - p.b * sp[0] + p.theta * (1.0 - sx[0]) + p.nu) - w + p.w0;
        for k in 1..4 {
            pc[k] = p.mu * (-p.b * sp[k] + p.theta * sx[k]);
            bc[k] = p.mu * (-p.b * sp[k] - p.theta * sx[k]);
        }
        let fp = |k: usize| -> f64 { (0..=k).map(|j| BINOM[k][j] * f[k - j] * pc[j]).sum() };
        DriftJet {
            b: [fp(0), bc[0]],
            bx: [fp(1), bc[1]],
            by: [f[0], -1.0],
            bxx: [fp(2), bc[2]],
            bxy: [f[1], 0.0],
            byy: [0.0, 0.0],
            bxxx: [fp(3), bc[3]],
            bxxy: [f[2], 0.0],
            bxyy: [0.0, 0.0],
            byyy: [0.0, 0.0],
        }
    }

    fn g1_jet(&self, c: f64) -> [f64; 5] {
        taylor4(|v: Dual4| buffer_raw(v, &self.params), c).map(|d| -self.params.mu * d)
    }
}

/// Scalar primitives whose derivatives the action layer needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    SigmoidP,
    SigmoidX,
    Buffer,
}

/// `d^order/dx^order` of a model primitive at `x`, exact up to rounding.
pub fn scalar_derivative(
    prim: Primitive,
    x: f64,
    order: usize,
    params: &CarbonParams,
) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::Domain(format!("unsupported derivative order {order}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("primitive needs x >= 0, got {x}")));
    }
    let t = match prim {
        Primitive::SigmoidP => taylor3(|c| sigmoid_raw(c, params.c_p, params.gamma), x),
        Primitive::SigmoidX => taylor3(|c| sigmoid_raw(c, params.c_x, params.gamma), x),
        Primitive::Buffer => taylor3(|c| buffer_raw(c, params), x),
    };
    Ok(t[order])
}

/// Partials of the drift at a point, up to second or third order.
///
/// Index convention: `b`, `bx`, `bxy`, ... are 2-vectors over the drift
/// components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DriftJet {
    pub b: [f64; 2],
    pub bx: [f64; 2],
    pub by: [f64; 2],
    pub bxx: [f64; 2],
    pub bxy: [f64; 2],
    pub byy: [f64; 2],
    /// Third-order partials; zero unless requested.
    pub bxxx: [f64; 2],
    pub bxxy: [f64; 2],
    pub bxyy: [f64; 2],
    pub byyy: [f64; 2],
}

/// All drift partials up to second order (three two-level dual evaluations).
pub fn drift_jet2<S: System>(sys: &S, z: [f64; 2]) -> DriftJet {
    let [x, y] = z;
    let eval = |ax: (f64, f64), ay: (f64, f64)| -> [Dual2; 2] {
        sys.drift([lift2(x, ax.0, ax.1), lift2(y, ay.0, ay.1)])
    };
    let xx = eval((1.0, 1.0), (0.0, 0.0));
    let yy = eval((0.0, 0.0), (1.0, 1.0));
    let xy = eval((1.0, 0.0), (0.0, 1.0));
    let mut j = DriftJet::default();
    for k in 0..2 {
        j.b[k] = xx[k].re.re;
        j.bx[k] = xx[k].re.eps;
        j.bxx[k] = mixed2(xx[k]);
        j.by[k] = yy[k].re.eps;
        j.byy[k] = mixed2(yy[k]);
        j.bxy[k] = mixed2(xy[k]);
    }
    j
}

/// All drift partials up to third order (four three-level dual evaluations).
pub fn drift_jet3<S: System>(sys: &S, z: [f64; 2]) -> DriftJet {
    let [x, y] = z;
    let eval = |ax: [f64; 3], ay: [f64; 3]| -> [Dual3; 2] {
        sys.drift([lift3(x, ax[0], ax[1], ax[2]), lift3(y, ay[0], ay[1], ay[2])])
    };
    let xxx = eval([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]);
    let yyy = eval([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
    let xxy = eval([1.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
    let xyy = eval([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]);
    let mut j = DriftJet::default();
    for k in 0..2 {
        let a = xxx[k];
        j.b[k] = a.re.re.re;
        j.bx[k] = a.re.re.eps;
        j.bxx[k] = a.re.eps.eps;
        j.bxxx[k] = mixed3(a);
        let a = yyy[k];
        j.by[k] = a.re.re.eps;
        j.byy[k] = a.re.eps.eps;
        j.byyy[k] = mixed3(a);
        // x + ε₁ + ε₂, y + ε₃: the ε₁ε₃ coefficient is b_xy
        let a = xxy[k];
        j.bxy[k] = a.eps.re.eps;
        j.bxxy[k] = mixed3(a);
        j.bxyy[k] = mixed3(xyy[k]);
    }
    j
}

/// `[g1, g1', g1'', g1''']` at `c`.
pub fn g1_jet3<S: System>(sys: &S, c: f64) -> [f64; 4] {
    taylor3(|v: Dual3| sys.g1(v), c)
}

/// `[g1, g1', g1'', g1''', g1'''']` at `c`.
pub fn g1_jet4<S: System>(sys: &S, c: f64) -> [f64; 5] {
    taylor4(|v: Dual4| sys.g1(v), c)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn params() -> CarbonParams {
        CarbonParams::from_json_str(include_str!("../../../configs/params.json")).unwrap()
    }

    #[test]
    fn sigmoid_examples() {
        let p = params();
        assert_eq!(sigmoid(p.c_p, p.c_p, 4.0).unwrap(), 0.5);
        assert_eq!(sigmoid(p.c_p, p.c_p, 1.3).unwrap(), 0.5);
        assert_eq!(sigmoid(0.0, p.c_p, p.gamma).unwrap(), 0.0);
        let v: f64 = sigmoid(2.0 * 7.0, 7.0, 4.0).unwrap();
        assert!((v - 16.0 / 17.0).abs() < 1e-15);
        assert!(sigmoid(-1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn buffer_examples() {
        let p = params();
        assert!((buffer(p.c_f, &p).unwrap() - p.f0 / 2.0).abs() < 1e-15);
        assert_eq!(buffer(0.0, &p).unwrap(), 0.0);
        let q = CarbonParams { beta: 2.0, ..p };
        assert!((buffer(3.0 * q.c_f, &q).unwrap() / q.f0 - 0.9).abs() < 1e-14);
        assert!(buffer(-0.5, &p).is_err());
    }

    #[test]
    fn diffusion_examples() {
        let p = params();
        let sys = CarbonSystem::new(p);
        let (g, singular) = sys.diffusion_checked(State::new(p.c_f, 0.0)).unwrap();
        assert!((g[0] + p.mu * p.f0 / 2.0).abs() < 1e-12);
        assert_eq!(g[1], p.mu);
        assert!(!singular);
        let (g, singular) = sys.diffusion_checked(State::new(0.0, 0.0)).unwrap();
        assert_eq!(g, [0.0, p.mu]);
        assert!(singular);
    }

    #[test]
    fn drift_bracket_vanishes() {
        // w − w0 = −μ(1 − b s − θ s̄ − ν) zeroes b̃¹ for any c
        let p = params();
        let sys = CarbonSystem::new(p);
        for c in [5.0, 46.0, 120.0, 300.0] {
            let bracket = 1.0
                - p.b * sigmoid(c, p.c_p, p.gamma).unwrap()
                - p.theta * (1.0 - sigmoid(c, p.c_x, p.gamma).unwrap())
                - p.nu;
            let d = sys.drift_checked(State::new(c, p.w0 - p.mu * bracket)).unwrap();
            assert!(d[0].abs() < 1e-9, "{d:?}");
        }
    }

    #[test]
    fn carbon_jet_matches_generic_duals() {
        let sys = CarbonSystem::new(params());
        for z in [[12.0, 2400.0], [46.0, 3100.0], [150.0, 1900.0]] {
            let fast = sys.drift_jet(z, true);
            let slow = drift_jet3(&sys, z);
            let pairs = [
                (fast.b, slow.b),
                (fast.bx, slow.bx),
                (fast.by, slow.by),
                (fast.bxx, slow.bxx),
                (fast.bxy, slow.bxy),
                (fast.byy, slow.byy),
                (fast.bxxx, slow.bxxx),
                (fast.bxxy, slow.bxxy),
                (fast.bxyy, slow.bxyy),
                (fast.byyy, slow.byyy),
            ];
            for (a, b) in pairs {
                for k in 0..2 {
                    assert!((a[k] - b[k]).abs() <= 1e-10 * (1.0 + b[k].abs()), "{a:?} vs {b:?}");
                }
            }
            let g = sys.g1_jet(z[0]);
            let h = g1_jet4(&sys, z[0]);
            for k in 0..5 {
                assert!((g[k] - h[k]).abs() <= 1e-12 * (1.0 + h[k].abs()));
            }
        }
    }

    #[test]
    fn loader_rejects_bad_input() {
        let good = include_str!("../../../configs/params.json");
        assert!(CarbonParams::from_json_str(good).is_ok());
        let missing = good.replace("\"c_f\": 132.0,", "");
        let err = CarbonParams::from_json_str(&missing).unwrap_err().to_string();
        assert!(err.contains("c_f"), "{err}");
        let nonpos = good.replace("\"gamma\": 4.0", "\"gamma\": 0.0");
        let err = CarbonParams::from_json_str(&nonpos).unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
        let neg_nu = good.replace("\"nu\": 0.0", "\"nu\": -0.1");
        assert!(CarbonParams::from_json_str(&neg_nu).is_err());
    }

    #[test]
    fn bistable_guard() {
        let p = params();
        assert!(p.check_bistable().is_ok());
        assert!(p.with_cx(55.0).check_bistable().is_err());
        assert!(p.with_cx(62.61).check_bistable().is_err());
    }

    #[test]
    fn scalar_derivative_orders() {
        let p = params();
        assert!(scalar_derivative(Primitive::Buffer, 10.0, 0, &p).is_err());
        assert!(scalar_derivative(Primitive::Buffer, 10.0, 4, &p).is_err());
        let h = 1e-4;
        let c = p.c_f;
        let fd = (buffer(c + h, &p).unwrap() - buffer(c - h, &p).unwrap()) / (2.0 * h);
        let d = scalar_derivative(Primitive::Buffer, c, 1, &p).unwrap();
        assert!(((d - fd) / d).abs() < 1e-6);
    }

    #[test]
    fn drift_jet_orders_agree() {
        let sys = CarbonSystem::new(params());
        let z = [47.0, 2900.0];
        let j2 = drift_jet2(&sys, z);
        let j3 = drift_jet3(&sys, z);
        for k in 0..2 {
            for (a, b) in [
                (j2.b[k], j3.b[k]),
                (j2.bx[k], j3.bx[k]),
                (j2.by[k], j3.by[k]),
                (j2.bxx[k], j3.bxx[k]),
                (j2.bxy[k], j3.bxy[k]),
                (j2.byy[k], j3.byy[k]),
            ] {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }
}
