//! Small systems with known solutions, used as oracles throughout the tests
//! and by the acceptance suite.

use crate::model::System;
use crate::scalar::Real;

/// Linear drift `A z + shift` with constant diagonal diffusion.
///
/// `A = −I` with unit diffusion is the Ornstein-Uhlenbeck toy; `A = 0` is the
/// free system whose Euler-Lagrange extremals are straight lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSystem {
    pub a: [[f64; 2]; 2],
    pub shift: [f64; 2],
    pub g1: f64,
    pub g2: f64,
}

impl LinearSystem {
    pub fn ou() -> Self {
        LinearSystem { a: [[-1.0, 0.0], [0.0, -1.0]], shift: [0.0; 2], g1: 1.0, g2: 1.0 }
    }

    pub fn free() -> Self {
        LinearSystem { a: [[0.0; 2]; 2], shift: [0.0; 2], g1: 1.0, g2: 1.0 }
    }
}

impl System for LinearSystem {
    #[inline]
    fn drift<T: Real>(&self, z: [T; 2]) -> [T; 2] {
        let a = |i: usize, j: usize| T::cst(self.a[i][j]);
        [
            a(0, 0) * z[0] + a(0, 1) * z[1] + T::cst(self.shift[0]),
            a(1, 0) * z[0] + a(1, 1) * z[1] + T::cst(self.shift[1]),
        ]
    }

    fn g1<T: Real>(&self, _c: T) -> T {
        T::cst(self.g1)
    }

    fn g2(&self) -> f64 {
        self.g2
    }
}

/// Hopf normal form `ṙ = r(1 − r²)`, `θ̇ = 1`, centred at `center`:
/// an unstable focus inside a stable unit-radius cycle of period 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfNormalForm {
    pub center: [f64; 2],
}

impl Default for HopfNormalForm {
    fn default() -> Self {
        HopfNormalForm { center: [0.0, 0.0] }
    }
}

impl System for HopfNormalForm {
    fn drift<T: Real>(&self, z: [T; 2]) -> [T; 2] {
        let x = z[0] - T::cst(self.center[0]);
        let y = z[1] - T::cst(self.center[1]);
        let k = T::one() - (x * x + y * y);
        [x * k - y, y * k + x]
    }

    fn g1<T: Real>(&self, _c: T) -> T {
        T::one()
    }

    fn g2(&self) -> f64 {
        1.0
    }
}

/// A system with state-dependent `g1(c) = 1 + c²/2` on top of an OU drift;
/// exercises the geometry terms without the carbonate model's stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VaryingDiffusion;

impl System for VaryingDiffusion {
    fn drift<T: Real>(&self, z: [T; 2]) -> [T; 2] {
        [-z[0] + T::cst(0.3) * z[1], -z[1] + (z[0] * T::cst(0.5)).sin()]
    }

    fn g1<T: Real>(&self, c: T) -> T {
        T::one() + c * c * T::cst(0.5)
    }

    fn g2(&self) -> f64 {
        0.8
    }
}
