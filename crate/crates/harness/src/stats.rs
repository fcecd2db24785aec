//! Compensated sums, sample statistics and log-log slope fits.

/// Kahan–Babuška (Neumaier) compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = Self::new();
        iter.into_iter().for_each(|x| k.add(x));
        k
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl SampleStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self { count, mean: f64::NAN, std_error: f64::NAN };
        }
        let mean = xs.iter().copied().collect::<KahanSum>().value() / count as f64;
        let std_error = if count > 1 {
            let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value();
            (ss / (count as f64 - 1.0) / count as f64).sqrt()
        } else {
            0.0
        };
        Self { count, mean, std_error }
    }
}

/// Least-squares fit `log y = slope · log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log y`.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / nf).sqrt();
    Some(SlopeFit { slope, intercept, residual, points: n })
}

/// Fit over the last `levels` points (all of them if fewer).
pub fn fit_last(points: &[(f64, f64)], levels: usize) -> Option<SlopeFit> {
    let start = points.len().saturating_sub(levels);
    fit_loglog(&points[start..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1f64, 0.05, 0.025, 0.0125].iter().map(|&h| (h, 3.0 * h * h.sqrt())).collect();
        let f = fit_loglog(&pts).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert_eq!(fit_last(&pts, 3).unwrap().points, 3);
        assert!(fit_loglog(&pts[..1]).is_none());
    }

    #[test]
    fn stats_of_known_sample() {
        let s = SampleStats::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-13)).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn summation_order_barely_matters(mut xs in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let a = xs.iter().copied().collect::<KahanSum>().value();
            xs.reverse();
            let b = xs.iter().copied().collect::<KahanSum>().value();
            let scale = xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }
}
