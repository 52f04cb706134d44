//! Statistical test helpers: Kolmogorov-Smirnov distances (one- and
//! two-sample), asymptotic critical values, empirical characteristic
//! functions with exact standard errors, and basic summary statistics.

use num_complex::Complex64;

use crate::numeric::CompensatedSum;

/// One-sample KS statistic D_n = sup_x |F_n(x) - F(x)| against a cdf closure.
/// `samples` need not be sorted.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample KS statistic via a sorted merge walk. Ties are consumed on
/// both sides before the gap is recorded, since empirical cdfs only jump at
/// distinct values.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic one-sample KS critical value at significance `level`:
/// c(level) / sqrt(n) with c = sqrt(-ln(level/2) / 2).
pub fn ks_critical(n: usize, level: f64) -> f64 {
    ((-(level / 2.0).ln()) / 2.0).sqrt() / (n as f64).sqrt()
}

/// Asymptotic two-sample KS critical value at significance `level`.
pub fn ks_two_sample_critical(n: usize, m: usize, level: f64) -> f64 {
    let c = ((-(level / 2.0).ln()) / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Empirical characteristic function at one frequency, with its exact
/// standard error: E|phi_hat - phi|^2 = (1 - |phi|^2)/n, estimated by
/// plugging in |phi_hat|.
pub fn empirical_cf(samples: &[f64], xi: f64) -> (Complex64, f64) {
    let n = samples.len() as f64;
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for &x in samples {
        let (s, c) = (xi * x).sin_cos();
        re.add(c);
        im.add(s);
    }
    let phi = Complex64::new(re.total() / n, im.total() / n);
    let se = ((1.0 - phi.norm_sqr()).max(0.0) / n).sqrt();
    (phi, se)
}

/// Mean and standard error of the mean.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = compensated_mean(samples);
    let mut var = CompensatedSum::new();
    for &x in samples {
        let d = x - mean;
        var.add(d * d);
    }
    let v = var.total() / (n - 1.0).max(1.0);
    (mean, (v / n).sqrt())
}

pub fn compensated_mean(samples: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in samples {
        acc.add(x);
    }
    acc.total() / samples.len() as f64
}

/// Sample variance (unbiased).
pub fn sample_variance(samples: &[f64]) -> f64 {
    let mean = compensated_mean(samples);
    let mut var = CompensatedSum::new();
    for &x in samples {
        let d = x - mean;
        var.add(d * d);
    }
    var.total() / (samples.len() as f64 - 1.0).max(1.0)
}

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = q * (xs.len() as f64 - 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        xs[lo]
    } else {
        xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ks_statistic_of_perfect_grid_is_half_spacing() {
        // Points at (i + 0.5)/n against the uniform cdf give D = 1/(2n).
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert_abs_diff_eq!(d, 0.5 / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
    }

    #[test]
    fn ks_two_sample_disjoint_is_one() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..50).map(|i| 1000.0 + i as f64).collect();
        assert_abs_diff_eq!(ks_two_sample(&xs, &ys), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_critical_at_one_percent() {
        // c(0.01) = sqrt(-ln 0.005 / 2) = 1.62762...
        let c = ks_critical(1, 0.01);
        assert_abs_diff_eq!(c, 1.6276236307187293, epsilon = 1e-12);
    }

    #[test]
    fn empirical_cf_of_constant_sample() {
        let xs = vec![2.0; 1000];
        let (phi, se) = empirical_cf(&xs, 0.7);
        let expected = Complex64::new((1.4f64).cos(), (1.4f64).sin());
        assert_abs_diff_eq!(phi.re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.im, expected.im, epsilon = 1e-12);
        assert_abs_diff_eq!(se, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn mean_se_and_variance_basics() {
        let xs = vec![1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_se(&xs);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-15);
        let var = sample_variance(&xs);
        assert_abs_diff_eq!(var, 5.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(se, (5.0 / 12.0f64).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        assert_abs_diff_eq!(quantile(&xs, 0.5), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(&xs, 0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile(&xs, 1.0), 3.0, epsilon = 1e-15);
    }
}
