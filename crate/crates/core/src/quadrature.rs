//! Gauss–Legendre rules on `[0, 1]`, applied per direction and per cell.

use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `q`-point Gauss–Legendre rule mapped to `[0, 1]`; exact for
    /// polynomials of degree `2q - 1`.
    pub fn gauss_legendre(q: usize) -> Self {
        assert!(q >= 1, "quadrature needs at least one point");
        let mut nodes = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        let n = q as f64;
        for i in 0..q {
            // Newton on P_q from the Tricomi initial guess
            let mut x = math::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(q, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(q, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        Self { nodes, weights }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes on `[0, 1]`, increasing.
    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights on `[0, 1]`; they sum to one.
    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f` with the rule on a single interval.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(a + t * len)).sum::<f64>() * len
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one_and_nodes_are_ordered() {
        for q in 1..=12 {
            let r = QuadratureRule::gauss_legendre(q);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "q={q}");
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_degree_2q_minus_1() {
        for q in 1..=8 {
            let r = QuadratureRule::gauss_legendre(q);
            for deg in 0..2 * q {
                let got = r.integrate(-0.5, 1.25, |x| crate::math::powi(x, deg as i32));
                let exact = (crate::math::powi(1.25, deg as i32 + 1) - crate::math::powi(-0.5, deg as i32 + 1))
                    / (deg as f64 + 1.0);
                assert!((got - exact).abs() < 1e-13 * exact.abs().max(1.0), "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn three_point_nodes() {
        let r = QuadratureRule::gauss_legendre(3);
        let s = libm::sqrt(0.6) / 2.0;
        assert!((r.nodes()[0] - (0.5 - s)).abs() < 1e-15);
        assert!((r.nodes()[1] - 0.5).abs() < 1e-15);
        assert!((r.weights()[1] - 4.0 / 9.0).abs() < 1e-15);
    }
}
