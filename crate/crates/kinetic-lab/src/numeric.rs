//! Shared numerical primitives: compensated summation, Gauss-Legendre rules,
//! bracketing bisection, monotone clipping, and oscillatory power-law tail
//! integrals used by heavy-tailed characteristic functions.

/// Neumaier-compensated accumulator. Exact for sums of dyadic rationals whose
/// exponents span less than the compensation range, which is what keeps the
/// leaf-weight mass statistics at 1.0 to bit level for conservative kernels.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.total()
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial. Exact for polynomials of degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pd(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Legendre polynomial P_n(x) and its derivative by the three-term recurrence.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b]; weights sum to b - a.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Gauss-Legendre points on [a, b] over dyadic panels graded toward both
/// endpoints (panel widths halve toward each end, down to ~1e-13 of the
/// interval). Integrates functions with integrable endpoint branch points,
/// e.g. x^e for fractional e, to near machine precision. Weights sum to
/// b - a up to round-off.
pub fn graded_gl_points(a: f64, b: f64, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    const LEVELS: usize = 44;
    let per_panel = per_panel.clamp(4, 48);
    let mid = 0.5 * (a + b);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    let mut push_range = |lo: f64, hi: f64| {
        let (x, w) = gauss_legendre_on(per_panel, lo, hi);
        xs.extend(x);
        ws.extend(w);
    };
    // Left half, graded toward a.
    let mut hi = mid;
    for _ in 0..LEVELS {
        let lo = a + 0.5 * (hi - a);
        push_range(lo, hi);
        hi = lo;
    }
    push_range(a, hi);
    // Right half, graded toward b.
    let mut lo = mid;
    for _ in 0..LEVELS {
        let hi2 = b - 0.5 * (b - lo);
        push_range(lo, hi2);
        lo = hi2;
    }
    push_range(lo, b);
    (xs, ws)
}

/// Bisection for a sign change of `f` on [a, b]. Requires f(a) and f(b) of
/// opposite (weak) sign; returns the midpoint once the bracket is below `tol`.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, String> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(format!("no sign change on [{a}, {b}]"));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection for the left boundary of a predicate that is false at `a` and
/// true at `b` (entry point of a plateau). Returns a point within `tol` of the
/// boundary, biased to the true side.
pub fn bisect_predicate<F: Fn(f64) -> bool>(
    pred: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    debug_assert!(!pred(a) && pred(b));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if pred(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    b
}

/// In-place isotonic clip: running maximum, then clamp into [0, 1]. Turns a
/// noisy near-cdf into a valid one without moving values that already conform.
pub fn isotonic_clip_unit(values: &mut [f64]) {
    let mut run = f64::NEG_INFINITY;
    for v in values.iter_mut() {
        run = run.max(*v);
        *v = run.clamp(0.0, 1.0);
    }
}

/// Oscillatory power-law tail integrals
///   C_p(a) = ∫_a^∞ cos(u) u^{-p} du,   S_p(a) = ∫_a^∞ sin(u) u^{-p} du
/// for p > 0, a > 0. Panels of Gauss-Legendre up to a fixed cutoff, then a
/// three-term integration-by-parts asymptotic tail whose error is below
/// ~1e-12 at the cutoff used. These are the building blocks of power-tail
/// characteristic functions.
pub fn trig_tail_integrals(p: f64, a: f64) -> (f64, f64) {
    assert!(a > 0.0 && p > 0.0, "trig_tail_integrals needs a > 0, p > 0");
    const CUTOFF: f64 = 240.0;
    if a >= CUTOFF {
        return trig_tail_asymptotic(p, a);
    }
    let mut cos_acc = CompensatedSum::new();
    let mut sin_acc = CompensatedSum::new();
    // Log-spaced panels through the possibly steep region below 1, then
    // half-period panels through the oscillatory region.
    let first_stop = 1.0_f64.max(a).min(CUTOFF);
    if a < first_stop {
        let decades = (first_stop / a).log10().max(0.0);
        let panels = (decades * 6.0).ceil().max(1.0) as usize;
        let ratio = (first_stop / a).powf(1.0 / panels as f64);
        let mut lo = a;
        for _ in 0..panels {
            let hi = (lo * ratio).min(first_stop);
            let (xs, ws) = gauss_legendre_on(16, lo, hi);
            for (x, w) in xs.iter().zip(ws.iter()) {
                let f = w * x.powf(-p);
                cos_acc.add(f * x.cos());
                sin_acc.add(f * x.sin());
            }
            lo = hi;
        }
    }
    let mut lo = first_stop;
    let step = std::f64::consts::FRAC_PI_2;
    while lo < CUTOFF {
        let hi = (lo + step).min(CUTOFF);
        let (xs, ws) = gauss_legendre_on(12, lo, hi);
        for (x, w) in xs.iter().zip(ws.iter()) {
            let f = w * x.powf(-p);
            cos_acc.add(f * x.cos());
            sin_acc.add(f * x.sin());
        }
        lo = hi;
    }
    let (ct, st) = trig_tail_asymptotic(p, CUTOFF);
    (cos_acc.total() + ct, sin_acc.total() + st)
}

/// Integration-by-parts asymptotic for the tails beyond a large cutoff b:
///   ∫_b^∞ cos(u) u^{-p} du = -sin(b) b^{-p} ... truncated after three levels;
/// remainder is O(b^{-p-5}).
fn trig_tail_asymptotic(p: f64, b: f64) -> (f64, f64) {
    // One level: C_p(b) = -b^{-p} sin b + p [ b^{-p-1} cos b - (p+1) C_{p+2}(b) ]
    //            S_p(b) =  b^{-p} cos b + p [ b^{-p-1} sin b - (p+1) S_{p+2}(b) ]
    fn level(p: f64, b: f64, depth: usize) -> (f64, f64) {
        let bp = b.powf(-p);
        let (s, c) = b.sin_cos();
        if depth == 0 {
            // Truncate: |C_p(b)|, |S_p(b)| <= b^{-p} each; dropped entirely.
            return (0.0, 0.0);
        }
        let (c2, s2) = level(p + 2.0, b, depth - 1);
        let cp = -bp * s + p * (bp / b * c - (p + 1.0) * c2);
        let sp = bp * c + p * (bp / b * s - (p + 1.0) * s2);
        (cp, sp)
    }
    level(p, b, 3)
}

/// Uniform-grid 4-point (cubic) Lagrange interpolation weights for a query
/// point expressed as cell index `k` plus fractional offset `t` in [0, 1],
/// using the stencil {k-1, k, k+1, k+2} clamped into [0, len-1]. Returns the
/// four stencil indices and weights.
#[inline]
pub fn cubic_stencil(len: usize, k: usize, t: f64) -> ([usize; 4], [f64; 4]) {
    debug_assert!(len >= 2);
    if len < 4 {
        // Fall back to linear interpolation on tiny grids.
        let i0 = k.min(len - 2);
        return ([i0, i0 + 1, i0 + 1, i0 + 1], [1.0 - t, t, 0.0, 0.0]);
    }
    // Shift the stencil inward at the boundaries, re-expressing t in the
    // shifted frame so the cubic still passes through the stored nodes.
    let (base, s) = if k == 0 {
        (0, t)
    } else if k + 2 >= len {
        (len - 4, t + (k - (len - 3)) as f64 + 1.0)
    } else {
        (k - 1, t + 1.0)
    };
    // Lagrange basis on integer abscissae {0,1,2,3} at point s.
    let s0 = s;
    let s1 = s - 1.0;
    let s2 = s - 2.0;
    let s3 = s - 3.0;
    let w0 = -s1 * s2 * s3 / 6.0;
    let w1 = s0 * s2 * s3 / 2.0;
    let w2 = -s0 * s1 * s3 / 2.0;
    let w3 = s0 * s1 * s2 / 6.0;
    ([base, base + 1, base + 2, base + 3], [w0, w1, w2, w3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn compensated_sum_recovers_tiny_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-16);
        }
        assert_abs_diff_eq!(acc.total(), 1.0 + 1e-10, epsilon = 1e-22);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [2usize, 5, 16, 64] {
            let (xs, ws) = gauss_legendre(n);
            let total: f64 = ws.iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
            // Degree 2n-1 monomial: odd, integrates to 0.
            let odd: f64 = xs
                .iter()
                .zip(&ws)
                .map(|(x, w)| w * x.powi(2 * n as i32 - 1))
                .sum();
            assert_abs_diff_eq!(odd, 0.0, epsilon = 1e-13);
            let quad: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
            assert_abs_diff_eq!(quad, 2.0 / 3.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_on_interval_matches_cosine() {
        let (xs, ws) = gauss_legendre_on(24, 0.0, std::f64::consts::FRAC_PI_2);
        let integral: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.cos()).sum();
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn bisect_finds_cosine_root() {
        let root = bisect(|x| x.cos(), 0.0, 2.0, 1e-13, 200).unwrap();
        assert_abs_diff_eq!(root, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn bisect_predicate_finds_plateau_entry() {
        let entry = bisect_predicate(|x| x >= 0.7, 0.0, 1.0, 1e-12, 200);
        assert_abs_diff_eq!(entry, 0.7, epsilon = 1e-11);
    }

    #[test]
    fn isotonic_clip_monotone_and_bounded() {
        let mut v = vec![-0.1, 0.2, 0.15, 0.5, 0.49, 1.2];
        isotonic_clip_unit(&mut v);
        assert_eq!(v[0], 0.0);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*v.last().unwrap(), 1.0);
    }

    #[test]
    fn trig_tail_integrals_match_references() {
        // Reference values from 30-digit oscillatory quadrature, frozen here.
        let cases: [(f64, f64, f64, f64); 4] = [
            (2.0, 0.5, 0.67747621502891550216, 1.1366351560150189019),
            (1.5, 0.01, 17.493705057511858915, 2.3066289412958153182),
            (2.7, 3.0, -0.025752661516566242836, -0.027670633921278810555),
            (3.0, 0.2, 11.233056098191475003, 4.2479129604070375964),
        ];
        for (p, a, c_ref, s_ref) in cases {
            let (c, s) = trig_tail_integrals(p, a);
            assert_abs_diff_eq!(c, c_ref, epsilon = 1e-10 * (1.0 + c_ref.abs()));
            assert_abs_diff_eq!(s, s_ref, epsilon = 1e-10 * (1.0 + s_ref.abs()));
        }
    }

    #[test]
    fn graded_points_integrate_endpoint_singularities() {
        // x^{0.16} on [0, 1]: exact integral 1/1.16.
        let (xs, ws) = graded_gl_points(0.0, 1.0, 12);
        let got: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powf(0.16)).sum();
        assert_abs_diff_eq!(got, 1.0 / 1.16, epsilon = 1e-12);
        // sqrt(1-x^2) on [-1, 1]: pi/2, singular slope at both ends.
        let (xs, ws) = graded_gl_points(-1.0, 1.0, 12);
        let got: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * (1.0 - x * x).max(0.0).sqrt())
            .sum();
        assert_abs_diff_eq!(got, std::f64::consts::FRAC_PI_2, epsilon = 1e-10);
    }

    #[test]
    fn trig_tail_small_a_divergence_scale() {
        // C_p(a) ~ a^{1-p}/(p-1) as a -> 0 for p > 1 (cos u ~ 1 region dominates).
        let p = 2.0;
        let a = 1e-6;
        let (c, _) = trig_tail_integrals(p, a);
        assert!((c * a.powf(p - 1.0) * (p - 1.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cubic_stencil_reproduces_cubics() {
        // Sample x^3 on integers 0..8 and interpolate at interior points.
        let vals: Vec<f64> = (0..8).map(|i| (i as f64).powi(3)).collect();
        for &q in &[0.5f64, 1.25, 3.75, 6.5, 6.99] {
            let k = q.floor() as usize;
            let t = q - k as f64;
            let (idx, w) = cubic_stencil(vals.len(), k, t);
            let est: f64 = idx.iter().zip(&w).map(|(&i, &wi)| wi * vals[i]).sum();
            assert_abs_diff_eq!(est, q.powi(3), epsilon = 1e-10);
        }
    }
}
