//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Model code is written once against [`Real`] and evaluated with `f64`,
//! `f32`, or nested [`Dual`](crate::dual::Dual) numbers when exact
//! derivatives are needed.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32`, `f64`, or a (nested) dual number over them.
pub trait Real: Float + FromPrimitive + Debug + Send + Sync + 'static {
    /// Lift an `f64` constant into this scalar type.
    #[inline]
    fn cst(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// The innermost real part as `f64`, dropping any derivative parts.
    fn re(&self) -> f64;

    /// `C = A·B + β·C` for strided `m × k` and `k × n` operands, `β ∈ {0, 1}`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: (&[Self], isize, isize), b: (&[Self], isize, isize), accumulate: bool, c: (&mut [Self], isize, isize)) {
        let (a, rsa, csa) = a;
        let (b, rsb, csb) = b;
        let (c, rsc, csc) = c;
        let at = |x: &[Self], r: usize, cc: usize, rs: isize, cs: isize| x[(r as isize * rs + cc as isize * cs) as usize];
        for i in 0..m {
            for j in 0..n {
                let mut acc = Self::zero();
                for l in 0..k {
                    acc = acc + at(a, i, l, rsa, csa) * at(b, l, j, rsb, csb);
                }
                let idx = (i as isize * rsc + j as isize * csc) as usize;
                c[idx] = if accumulate { c[idx] + acc } else { acc };
            }
        }
    }
}

/// Largest linear index touched by a strided `rows × cols` view.
fn extent(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
}

macro_rules! blas_gemm {
    ($t:ty, $f:path) => {
        fn gemm(m: usize, k: usize, n: usize, a: (&[$t], isize, isize), b: (&[$t], isize, isize), accumulate: bool, c: (&mut [$t], isize, isize)) {
            assert!(a.1 >= 0 && a.2 >= 0 && b.1 >= 0 && b.2 >= 0 && c.1 >= 0 && c.2 >= 0);
            assert!(a.0.len() >= extent(m, k, a.1, a.2));
            assert!(b.0.len() >= extent(k, n, b.1, b.2));
            assert!(c.0.len() >= extent(m, n, c.1, c.2));
            let beta = if accumulate { 1.0 } else { 0.0 };
            // SAFETY: every index reached by the strides was bounds-checked above.
            unsafe { $f(m, k, n, 1.0, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta, c.0.as_mut_ptr(), c.1, c.2) }
        }
    };
}

impl Real for f64 {
    #[inline]
    fn re(&self) -> f64 {
        *self
    }

    blas_gemm!(f64, matrixmultiply::dgemm);
}

impl Real for f32 {
    #[inline]
    fn re(&self) -> f64 {
        *self as f64
    }

    blas_gemm!(f32, matrixmultiply::sgemm);
}

/// Euclidean norm of a 2-vector.
#[inline]
pub fn norm2<T: Real>(v: [T; 2]) -> T {
    v[0].hypot(v[1])
}

#[inline]
pub fn sub2<T: Real>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add2<T: Real>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale2<T: Real>(a: [T; 2], s: T) -> [T; 2] {
    [a[0] * s, a[1] * s]
}

/// `a + s * b`
#[inline]
pub fn axpy2<T: Real>(a: [T; 2], s: T, b: [T; 2]) -> [T; 2] {
    [a[0] + s * b[0], a[1] + s * b[1]]
}
