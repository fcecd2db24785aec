//! Thin float shims over `libm`; `core` has no transcendental functions.

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut e = n.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// `|z|^{p-2} z`, the porous-medium nonlinearity.
#[inline]
pub(crate) fn alpha(z: f64, p: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if p == 3.0 {
        return z.abs() * z;
    }
    if p == 2.0 {
        return z;
    }
    powf(z.abs(), p - 2.0) * z
}

/// `α'(z) = (p-1)|z|^{p-2}`; for `p < 2` the singularity at zero is
/// regularized as `(p-1)(|z| + δ)^{p-2}`.
#[inline]
pub(crate) fn alpha_prime(z: f64, p: f64, delta: f64) -> f64 {
    if p == 3.0 {
        return 2.0 * z.abs();
    }
    if p == 2.0 {
        return 1.0;
    }
    if p < 2.0 {
        (p - 1.0) * powf(z.abs() + delta, p - 2.0)
    } else if z == 0.0 {
        0.0
    } else {
        (p - 1.0) * powf(z.abs(), p - 2.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_repeated_multiplication() {
        assert_eq!(powi(1.5, 3), 1.5 * 1.5 * 1.5);
        assert_eq!(powi(2.0, -2), 0.25);
        assert_eq!(powi(7.0, 0), 1.0);
    }

    #[test]
    fn alpha_is_odd_and_matches_power_law() {
        for &p in &[1.5, 2.0, 2.5, 3.0, 4.0] {
            for &z in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
                let expected = if z == 0.0 { 0.0 } else { libm::pow(libm::fabs(z), p - 2.0) * z };
                assert!((alpha(z, p) - expected).abs() <= 1e-14 * expected.abs().max(1.0));
                assert_eq!(alpha(-z, p), -alpha(z, p));
            }
        }
    }
}
