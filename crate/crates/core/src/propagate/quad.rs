//! Interpolation and quadrature on trace samples.
//!
//! Between two accepted steps the solution is represented by the quintic
//! Hermite interpolant of `(u, u', u'')`, with `u'' = (V - z) u` supplied by
//! the equation itself; products of two such interpolants are integrated
//! exactly by six-point Gauss-Legendre.

use num_complex::Complex64;

const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_4,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691,
    0.467_913_934_572_691,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_4,
];

/// Value, first and second derivative at one end of a Hermite cell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jet {
    pub y: Complex64,
    pub dy: Complex64,
    pub ddy: Complex64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuinticCell {
    pub x0: f64,
    pub x1: f64,
    pub left: Jet,
    pub right: Jet,
}

impl QuinticCell {
    pub(crate) fn eval(&self, x: f64) -> Complex64 {
        let h = self.x1 - self.x0;
        let t = (x - self.x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        let h3 = 0.5 * t3 - t4 + 0.5 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        self.left.y * h0
            + self.left.dy * (h * h1)
            + self.left.ddy * (h * h * h2)
            + self.right.ddy * (h * h * h3)
            + self.right.dy * (h * h4)
            + self.right.y * h5
    }
}

/// `∫_lo^hi f` by six-point Gauss-Legendre.
pub(crate) fn gauss_legendre(lo: f64, hi: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    GL_NODES.iter().zip(GL_WEIGHTS.iter()).map(|(&t, &w)| f(mid + half * t) * w).sum::<Complex64>() * half
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn reproduces_quintics() {
        // p(x) = x^5 - 2x^2 + 1 on [0.5, 1.25]
        let p = |x: f64| x.powi(5) - 2.0 * x * x + 1.0;
        let dp = |x: f64| 5.0 * x.powi(4) - 4.0 * x;
        let ddp = |x: f64| 20.0 * x.powi(3) - 4.0;
        let jet = |x: f64| Jet { y: c(p(x)), dy: c(dp(x)), ddy: c(ddp(x)) };
        let cell = QuinticCell { x0: 0.5, x1: 1.25, left: jet(0.5), right: jet(1.25) };
        for x in [0.5, 0.6, 0.9, 1.1, 1.25] {
            assert!((cell.eval(x).re - p(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_degree_eleven() {
        let v = gauss_legendre(0.0, 2.0, |x| c(x.powi(11)));
        assert!((v.re - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }
}
