//! The Onsager-Machlup layer: modified drift, Riemannian geometry terms,
//! Lagrangian, discrete action, and the Euler-Lagrange right-hand side.
//!
//! For diffusion `diag(g1(x), g2)` the metric is `V = diag(1/g1², 1/g2²)`.
//! With `h = g1'/g1` the only nonzero Christoffel symbol is `Γ¹₁₁ = −h`, the
//! modified drift is `b = (b̃¹ + ½ g1 g1', b̃²)`, the divergence is
//! `b¹ₓ + b²ᵧ − h b¹`, and the scalar curvature vanishes.

use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::dynamics::Path;
use crate::error::{Error, Result};
use crate::model::{State, System};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryTerms {
    pub gamma111: f64,
    pub div_b: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionReport {
    pub path: Path,
    pub action: f64,
    pub target_index: usize,
    pub reachable: bool,
}

fn check<S: System>(sys: &S, z: [f64; 2], t: Option<f64>) -> Result<f64> {
    let g = sys.g1(z[0]);
    if !sys.in_domain(z) || g == 0.0 || !g.is_finite() {
        return Err(Error::MetricSingular { c: z[0], t });
    }
    Ok(g)
}

/// Modified drift at any scalar type; no domain check.
#[inline]
pub fn modified_drift_g<T: Real, S: System>(sys: &S, z: [T; 2]) -> [T; 2] {
    let b = sys.drift(z);
    let g = sys.g1(Dual::variable(z[0]));
    [b[0] + T::cst(0.5) * g.re * g.eps, b[1]]
}

/// Riemannian divergence of the modified drift at any scalar type.
pub fn div_b_g<T: Real, S: System>(sys: &S, z: [T; 2]) -> T {
    let bx = modified_drift_g(sys, [Dual::variable(z[0]), Dual::constant(z[1])]);
    let by = modified_drift_g(sys, [Dual::constant(z[0]), Dual::variable(z[1])]);
    let g = sys.g1(Dual::variable(z[0]));
    bx[0].eps + by[1].eps - bx[0].re * g.eps / g.re
}

/// `L = (v − b)ᵀV(v − b) + div b` at any scalar type; no domain check.
pub fn lagrangian_g<T: Real, S: System>(sys: &S, z: [T; 2], v: [T; 2]) -> T {
    let b = modified_drift_g(sys, z);
    let g1 = sys.g1(z[0]);
    let g2 = T::cst(sys.g2());
    let u = v[0] - b[0];
    let w = v[1] - b[1];
    u * u / (g1 * g1) + w * w / (g2 * g2) + div_b_g(sys, z)
}

pub fn modified_drift<S: System>(sys: &S, z: State) -> Result<[f64; 2]> {
    check(sys, z.arr(), None)?;
    Ok(modified_drift_g(sys, z.arr()))
}

pub fn geometry<S: System>(sys: &S, z: State) -> Result<GeometryTerms> {
    check(sys, z.arr(), None)?;
    let g = sys.g1(Dual::variable(z.c));
    Ok(GeometryTerms { gamma111: -g.eps / g.re, div_b: div_b_g(sys, z.arr()), curvature: 0.0 })
}

pub fn lagrangian<S: System>(sys: &S, z: State, v: [f64; 2]) -> Result<f64> {
    check(sys, z.arr(), None)?;
    Ok(lagrangian_g(sys, z.arr(), v))
}

/// Velocities by second-order differences: central inside, one-sided at the ends.
pub fn fd_velocities(states: &[State], dt: f64) -> Vec<[f64; 2]> {
    let n = states.len();
    assert!(n >= 3, "need at least 3 samples");
    let z = |i: usize| states[i].arr();
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            let (a, b, c) = (z(0), z(1), z(2));
            [(-3.0 * a[0] + 4.0 * b[0] - c[0]) / (2.0 * dt), (-3.0 * a[1] + 4.0 * b[1] - c[1]) / (2.0 * dt)]
        } else if i == n - 1 {
            let (a, b, c) = (z(n - 1), z(n - 2), z(n - 3));
            [(3.0 * a[0] - 4.0 * b[0] + c[0]) / (2.0 * dt), (3.0 * a[1] - 4.0 * b[1] + c[1]) / (2.0 * dt)]
        } else {
            let (a, b) = (z(i - 1), z(i + 1));
            [(b[0] - a[0]) / (2.0 * dt), (b[1] - a[1]) / (2.0 * dt)]
        };
        v.push(d);
    }
    v
}

/// Discrete action `S = ½∫L dt` by composite trapezoid.
pub fn action<S: System>(sys: &S, path: &Path) -> Result<f64> {
    action_of_states(sys, &path.states, path.dt, path.t0)
}

pub fn action_of_states<S: System>(sys: &S, states: &[State], dt: f64, t0: f64) -> Result<f64> {
    if states.len() < 3 {
        return Err(Error::Shape(format!("action needs >= 3 samples, got {}", states.len())));
    }
    let v = fd_velocities(states, dt);
    let n = states.len();
    let mut sum = 0.0;
    for i in 0..n {
        let z = states[i].arr();
        check(sys, z, Some(t0 + dt * i as f64))?;
        let l = lagrangian_g(sys, z, v[i]);
        sum += if i == 0 || i == n - 1 { 0.5 * l } else { l };
    }
    Ok(0.5 * sum * dt)
}

/// Local data the Euler-Lagrange right-hand side is assembled from:
/// the modified drift with its first partials, `∂e/∂x`, `∂e/∂y` for
/// `e = div b`, and `g1` with `h = g1'/g1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElJet<T> {
    pub b: [T; 2],
    pub bx: [T; 2],
    pub by: [T; 2],
    pub ex: T,
    pub ey: T,
    pub g: T,
    pub h: T,
}

/// Euler-Lagrange accelerations of `L = a(x)u² + u₂²/g2² + e(x, y)` with
/// `a = 1/g1²`, `u = ẋ − b¹`, `u₂ = ẏ − b²`.
#[inline]
pub fn assemble<T: Real>(j: &ElJet<T>, v: [T; 2], g2: f64) -> [T; 2] {
    let two = T::cst(2.0);
    let half = T::cst(0.5);
    let g2s = T::cst(g2 * g2);
    let gs = j.g * j.g;
    let u = v[0] - j.b[0];
    let w = v[1] - j.b[1];
    let ax = j.bx[0] * v[0] + j.by[0] * v[1] + two * j.h * v[0] * u - j.h * u * u - u * j.bx[0]
        - gs / g2s * w * j.bx[1]
        + half * gs * j.ex;
    let ay = j.bx[1] * v[0] + j.by[1] * v[1] - g2s / gs * u * j.by[0] - w * j.by[1] + half * g2s * j.ey;
    [ax, ay]
}

/// Reference right-hand side: every partial of `b` and `e` comes from dual
/// numbers applied to the modified-drift and divergence closures.
pub fn el_rhs_reference<T: Real, S: System>(sys: &S, z: [T; 2], v: [T; 2]) -> [T; 2] {
    let bx = modified_drift_g(sys, [Dual::variable(z[0]), Dual::constant(z[1])]);
    let by = modified_drift_g(sys, [Dual::constant(z[0]), Dual::variable(z[1])]);
    let ex = div_b_g(sys, [Dual::variable(z[0]), Dual::constant(z[1])]);
    let ey = div_b_g(sys, [Dual::constant(z[0]), Dual::variable(z[1])]);
    let g = sys.g1(Dual::variable(z[0]));
    let jet = ElJet {
        b: [bx[0].re, bx[1].re],
        bx: [bx[0].eps, bx[1].eps],
        by: [by[0].eps, by[1].eps],
        ex: ex.eps,
        ey: ey.eps,
        g: g.re,
        h: g.eps / g.re,
    };
    assemble(&jet, v, sys.g2())
}

/// The jet with, when `grad`, its partials along x and along y.
pub fn el_jet<S: System>(sys: &S, z: [f64; 2], grad: bool) -> (ElJet<f64>, Option<[ElJet<f64>; 2]>) {
    let d = sys.drift_jet(z, grad);
    let [g, g1, g2, g3, g4] = sys.g1_jet(z[0]);
    let h = g1 / g;
    let hp = g2 / g - h * h;
    // x-derivatives of the correction ½ g g'
    let m = 0.5 * g * g1;
    let m1 = 0.5 * (g1 * g1 + g * g2);
    let m2 = 0.5 * (3.0 * g1 * g2 + g * g3);
    let b1 = d.b[0] + m;
    let b1x = d.bx[0] + m1;
    let b1xx = d.bxx[0] + m2;
    let ex = b1xx + d.bxy[1] - b1x * h - b1 * hp;
    let ey = d.bxy[0] + d.byy[1] - d.by[0] * h;
    let jet = ElJet { b: [b1, d.b[1]], bx: [b1x, d.bx[1]], by: d.by, ex, ey, g, h };
    if !grad {
        return (jet, None);
    }
    let m3 = 0.5 * (3.0 * g2 * g2 + 4.0 * g1 * g3 + g * g4);
    let hpp = g3 / g - g1 * g2 / (g * g) - 2.0 * h * hp;
    let b1xxx = d.bxxx[0] + m3;
    let exx = b1xxx + d.bxxy[1] - b1xx * h - 2.0 * b1x * hp - b1 * hpp;
    let exy = d.bxxy[0] + d.bxyy[1] - d.bxy[0] * h - d.by[0] * hp;
    let eyy = d.bxyy[0] + d.byyy[1] - d.byy[0] * h;
    let along_x = ElJet {
        b: [b1x, d.bx[1]],
        bx: [b1xx, d.bxx[1]],
        by: d.bxy,
        ex: exx,
        ey: exy,
        g: g1,
        h: hp,
    };
    let along_y = ElJet { b: d.by, bx: d.bxy, by: d.byy, ex: exy, ey: eyy, g: 0.0, h: 0.0 };
    (jet, Some([along_x, along_y]))
}

/// Unchecked fast right-hand side.
#[inline]
pub fn el_rhs_raw<S: System>(sys: &S, z: [f64; 2], v: [f64; 2]) -> [f64; 2] {
    assemble(&el_jet(sys, z, false).0, v, sys.g2())
}

/// Euler-Lagrange accelerations `(ẍ, ÿ)` at `(z, v)`.
pub fn el_rhs<S: System>(sys: &S, z: State, v: [f64; 2]) -> Result<[f64; 2]> {
    check(sys, z.arr(), None)?;
    Ok(el_rhs_raw(sys, z.arr(), v))
}

/// Right-hand side and its Jacobian with respect to `(x, y, vx, vy)`.
pub fn el_rhs_jacobian<S: System>(sys: &S, z: [f64; 2], v: [f64; 2]) -> ([f64; 2], [[f64; 4]; 2]) {
    let (jet, grads) = el_jet(sys, z, true);
    let [gx, gy] = grads.expect("gradient requested");
    let lift = |a: &ElJet<f64>, da: &ElJet<f64>| ElJet {
        b: [Dual::new(a.b[0], da.b[0]), Dual::new(a.b[1], da.b[1])],
        bx: [Dual::new(a.bx[0], da.bx[0]), Dual::new(a.bx[1], da.bx[1])],
        by: [Dual::new(a.by[0], da.by[0]), Dual::new(a.by[1], da.by[1])],
        ex: Dual::new(a.ex, da.ex),
        ey: Dual::new(a.ey, da.ey),
        g: Dual::new(a.g, da.g),
        h: Dual::new(a.h, da.h),
    };
    let g2 = sys.g2();
    let vc = [Dual::constant(v[0]), Dual::constant(v[1])];
    let rx = assemble(&lift(&jet, &gx), vc, g2);
    let ry = assemble(&lift(&jet, &gy), vc, g2);
    let zero = ElJet { b: [0.0; 2], bx: [0.0; 2], by: [0.0; 2], ex: 0.0, ey: 0.0, g: 0.0, h: 0.0 };
    let jc = lift(&jet, &zero);
    let rvx = assemble(&jc, [Dual::variable(v[0]), Dual::constant(v[1])], g2);
    let rvy = assemble(&jc, [Dual::constant(v[0]), Dual::variable(v[1])], g2);
    let val = [rx[0].re, rx[1].re];
    let jac = [
        [rx[0].eps, ry[0].eps, rvx[0].eps, rvy[0].eps],
        [rx[1].eps, ry[1].eps, rvx[1].eps, rvy[1].eps],
    ];
    (val, jac)
}

/// Brute-force gradient of the discrete action with respect to every
/// interior node, by central differences on the node coordinates.
///
/// The action here is the midpoint rule `½ Σ L((zᵢ + zᵢ₊₁)/2, (zᵢ₊₁ − zᵢ)/dt) dt`.
/// The trapezoid form of [`action`] uses one-sided end velocities, which
/// leaves an O(1) gradient at the nodes next to each end even on exact
/// extremals, so it cannot serve as a stationarity test there.
pub fn action_node_gradient<S: System>(sys: &S, path: &Path) -> Result<Vec<[f64; 2]>> {
    let n = path.len();
    if n < 3 {
        return Err(Error::Shape(format!("need >= 3 samples, got {n}")));
    }
    let mut states = path.states.clone();
    let mut out = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let mut gi = [0.0; 2];
        let orig = states[i].arr();
        for k in 0..2 {
            let h = 1e-6 * orig[k].abs().max(1.0);
            let mut eval = |val: f64| -> Result<f64> {
                let mut z = orig;
                z[k] = val;
                states[i] = State::from(z);
                let s = segment_action(sys, &states, path.dt, i - 1)? + segment_action(sys, &states, path.dt, i)?;
                states[i] = State::from(orig);
                Ok(s)
            };
            let sp = eval(orig[k] + h)?;
            let sm = eval(orig[k] - h)?;
            gi[k] = (sp - sm) / (2.0 * h);
        }
        out.push(gi);
    }
    Ok(out)
}

/// Midpoint-rule contribution of the segment `i → i + 1`.
fn segment_action<S: System>(sys: &S, states: &[State], dt: f64, i: usize) -> Result<f64> {
    let (a, b) = (states[i].arr(), states[i + 1].arr());
    let z = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let v = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
    check(sys, z, None)?;
    Ok(0.5 * lagrangian_g(sys, z, v) * dt)
}

/// Mean `|L|` along the path (finite-difference velocities), floored at 1;
/// the natural unit for [`stationarity_residual`].
pub fn action_scale<S: System>(sys: &S, path: &Path) -> Result<f64> {
    if path.len() < 3 {
        return Err(Error::Shape(format!("need >= 3 samples, got {}", path.len())));
    }
    let vel = fd_velocities(&path.states, path.dt);
    let mut sum = 0.0;
    for (z, v) in path.states.iter().zip(&vel) {
        sum += lagrangian(sys, *z, *v)?.abs();
    }
    Ok((sum / path.len() as f64).max(1.0))
}

/// Largest interior action gradient divided by `dt`; small for discrete
/// extremals.
pub fn stationarity_residual<S: System>(sys: &S, path: &Path) -> Result<f64> {
    let g = action_node_gradient(sys, path)?;
    Ok(g.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max) / path.dt)
}

/// Generic finite-difference evaluations of the Riemannian quantities for a
/// metric `V(z) = (σσᵀ)⁻¹`, independent of the closed forms above.
pub mod numeric {
    use crate::model::System;

    pub type Mat = [[f64; 2]; 2];

    pub fn metric<S: System>(sys: &S, z: [f64; 2]) -> Mat {
        let [g1, g2] = sys.diffusion(z);
        [[1.0 / (g1 * g1), 0.0], [0.0, 1.0 / (g2 * g2)]]
    }

    fn inverse(m: Mat) -> Mat {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
    }

    fn step(z: [f64; 2], k: usize) -> f64 {
        1e-4 * z[k].abs().max(1.0)
    }

    /// `∂ₖ V_ij` by central differences.
    fn metric_derivative<S: System>(sys: &S, z: [f64; 2]) -> [Mat; 2] {
        let mut out = [[[0.0; 2]; 2]; 2];
        for (k, slot) in out.iter_mut().enumerate() {
            let h = step(z, k);
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let (a, b) = (metric(sys, zp), metric(sys, zm));
            for i in 0..2 {
                for j in 0..2 {
                    slot[i][j] = (a[i][j] - b[i][j]) / (2.0 * h);
                }
            }
        }
        out
    }

    /// `Γᵏᵢⱼ = ½ Vᵏˡ(∂ᵢVⱼₗ + ∂ⱼVᵢₗ − ∂ₗVᵢⱼ)`, indexed `[k][i][j]`.
    pub fn christoffel<S: System>(sys: &S, z: [f64; 2]) -> [Mat; 2] {
        let inv = inverse(metric(sys, z));
        let d = metric_derivative(sys, z);
        let mut out = [[[0.0; 2]; 2]; 2];
        for (k, gk) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    gk[i][j] = (0..2)
                        .map(|l| 0.5 * inv[k][l] * (d[i][j][l] + d[j][i][l] - d[l][i][j]))
                        .sum();
                }
            }
        }
        out
    }

    /// `bⁱ = b̃ⁱ − ½ Vˡʲ Γⁱₗⱼ`.
    pub fn modified_drift<S: System>(sys: &S, z: [f64; 2]) -> [f64; 2] {
        let b = sys.drift(z);
        let inv = inverse(metric(sys, z));
        let gam = christoffel(sys, z);
        let mut out = b;
        for i in 0..2 {
            for l in 0..2 {
                for j in 0..2 {
                    out[i] -= 0.5 * inv[l][j] * gam[i][l][j];
                }
            }
        }
        out
    }

    /// `div b = (1/√|V|) ∂ᵢ(√|V| bⁱ)`.
    pub fn divergence<S: System>(sys: &S, z: [f64; 2]) -> f64 {
        let vol = |z: [f64; 2]| {
            let m = metric(sys, z);
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]).sqrt()
        };
        let mut sum = 0.0;
        for k in 0..2 {
            let h = step(z, k);
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            sum += (vol(zp) * modified_drift(sys, zp)[k] - vol(zm) * modified_drift(sys, zm)[k]) / (2.0 * h);
        }
        sum / vol(z)
    }

    /// Scalar curvature `R = Vⁱʲ Rᵢⱼ` from differenced Christoffel symbols.
    pub fn curvature<S: System>(sys: &S, z: [f64; 2]) -> f64 {
        let gam = christoffel(sys, z);
        // dgam[m][k][i][j] = ∂ₘ Γᵏᵢⱼ
        let mut dgam = [[[[0.0; 2]; 2]; 2]; 2];
        for (m, slot) in dgam.iter_mut().enumerate() {
            let h = 10.0 * step(z, m);
            let mut zp = z;
            let mut zm = z;
            zp[m] += h;
            zm[m] -= h;
            let (a, b) = (christoffel(sys, zp), christoffel(sys, zm));
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        slot[k][i][j] = (a[k][i][j] - b[k][i][j]) / (2.0 * h);
                    }
                }
            }
        }
        let inv = inverse(metric(sys, z));
        let mut r = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut ric = 0.0;
                for k in 0..2 {
                    ric += dgam[k][k][i][j] - dgam[j][k][i][k];
                    for l in 0..2 {
                        ric += gam[k][k][l] * gam[l][i][j] - gam[k][j][l] * gam[l][i][k];
                    }
                }
                r += inv[i][j] * ric;
            }
        }
        r
    }
}
