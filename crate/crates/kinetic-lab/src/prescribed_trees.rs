//! Deterministic comb-tree constructions that hit prescribed leaf weights.
//! A single split turns a node of weight 1/c into one "deep" leaf and a run
//! of leaves of weight exactly 1/x; iterating the split level by level over
//! an increasing target sequence concentrates the alpha-mass on leaves of
//! prescribed size while the remainder mass stays below a chosen epsilon.

use thiserror::Error;

use crate::numeric::compensated_sum;

/// Total-leaf guard for one level of a plan.
pub const PLAN_LEAF_LIMIT: u64 = 1_000_000;
/// Leaf guard for one standalone split.
pub const SPLIT_LEAF_LIMIT: u64 = 10_000_000;
/// Relative snap distance for treating (x/c)^alpha as an integer.
const INTEGER_SNAP: f64 = 1e-9;
/// Absolute tolerance for construction invariants checked on every build.
const INVARIANT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PrescribedError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("construction would produce {n} leaves, over the limit {limit}")]
    SizeGuard { n: u64, limit: u64 },
    #[error("construction invariant failed: {0}")]
    Invariant(String),
}

/// One comb split of a node of weight 1/c into N leaves.
///
/// `pairs[k] = (l, r)` is the k-th branching: the left factor continues the
/// comb, the right factor closes a leaf of weight 1/x. `leaf_weights[0]` is
/// the deep leaf at depth N-1; the remaining N-1 entries are exactly 1/x.
#[derive(Clone, Debug)]
pub struct Step1Split {
    pub c: f64,
    pub x: f64,
    pub alpha: f64,
    pub n: usize,
    pub pairs: Vec<(f64, f64)>,
    pub leaf_weights: Vec<f64>,
}

/// Number of leaves for a node of weight 1/c split against target x: the
/// ceiling of (x/c)^alpha, snapped down when the power is an integer up to
/// floating-point noise.
fn leaf_count(c: f64, x: f64, alpha: f64) -> f64 {
    let r = (x / c).powf(alpha);
    let nearest = r.round();
    if (r - nearest).abs() <= INTEGER_SNAP * nearest.max(1.0) {
        nearest.max(1.0)
    } else {
        r.floor() + 1.0
    }
}

/// Split a node of weight 1/c into N leaves: N-1 of weight exactly 1/x plus
/// one deep leaf carrying the remainder, so that the alpha-mass telescopes
/// to c^{-alpha} exactly.
pub fn step1_split(c: f64, x: f64, alpha: f64) -> Result<Step1Split, PrescribedError> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(PrescribedError::InvalidParameter(format!(
            "need c >= 1 finite, got {c}"
        )));
    }
    if !(x > c && x.is_finite()) {
        return Err(PrescribedError::InvalidParameter(format!(
            "need x > c, got x = {x}, c = {c}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PrescribedError::InvalidParameter(format!(
            "need alpha > 0, got {alpha}"
        )));
    }
    let count = leaf_count(c, x, alpha);
    if count > SPLIT_LEAF_LIMIT as f64 {
        return Err(PrescribedError::SizeGuard {
            n: count as u64,
            limit: SPLIT_LEAF_LIMIT,
        });
    }
    let n = count as usize;
    let x_a = x.powf(alpha);
    let c_a = c.powf(alpha);
    let mut pairs = Vec::with_capacity(n - 1);
    for k in 1..n {
        // Remaining alpha-mass ahead of branching k is x^a - (k-1)c^a.
        let rem = x_a - (k - 1) as f64 * c_a;
        let r = c / rem.powf(1.0 / alpha);
        let l = (1.0 - r.powf(alpha)).powf(1.0 / alpha);
        if !(r > 0.0 && r < 1.0 + INVARIANT_TOL && l >= 0.0 && l < 1.0) {
            return Err(PrescribedError::Invariant(format!(
                "branching factors out of range at k = {k}: l = {l}, r = {r}"
            )));
        }
        pairs.push((l, r));
    }
    let deep = (x_a - (n - 1) as f64 * c_a).max(0.0).powf(1.0 / alpha) / (c * x);
    let one_over_x = 1.0 / x;
    let mut leaf_weights = Vec::with_capacity(n);
    leaf_weights.push(deep);
    leaf_weights.resize(n, one_over_x);

    if deep > one_over_x + INVARIANT_TOL {
        return Err(PrescribedError::Invariant(format!(
            "deep leaf {deep} exceeds 1/x = {one_over_x}"
        )));
    }
    let mass = compensated_sum(leaf_weights.iter().map(|w| w.powf(alpha)));
    let target = c.powf(-alpha);
    if (mass - target).abs() > INVARIANT_TOL {
        return Err(PrescribedError::Invariant(format!(
            "alpha-mass {mass} != c^-alpha = {target}"
        )));
    }
    Ok(Step1Split {
        c,
        x,
        alpha,
        n,
        pairs,
        leaf_weights,
    })
}

/// True iff the sequence is strictly increasing, positive, and satisfies
/// y_1^alpha > 1/eps and y_{n+1}^alpha > (1/eps) * sum_{j<=n} (y_j^alpha + 1).
pub fn validate_y_sequence(y: &[f64], eps: f64, alpha: f64) -> bool {
    if y.is_empty() || !(eps > 0.0) || !(alpha > 0.0) {
        return false;
    }
    let mut prev = 0.0;
    for &v in y {
        if !(v > prev && v.is_finite()) {
            return false;
        }
        prev = v;
    }
    let pow: Vec<f64> = y.iter().map(|v| v.powf(alpha)).collect();
    if pow[0] <= 1.0 / eps {
        return false;
    }
    let mut running = 0.0;
    for n in 1..y.len() {
        running += pow[n - 1] + 1.0;
        if pow[n] <= running / eps {
            return false;
        }
    }
    true
}

/// Level-by-level plan: counts, remainder index sets, and weight vectors.
///
/// `n_seq[0] = 1` is the root; `level_weights[n-1]` and `r_sets[n-1]` (leaf
/// indices, zero-based) describe level n.
#[derive(Clone, Debug)]
pub struct TreePlan {
    pub y: Vec<f64>,
    pub eps: f64,
    pub alpha: f64,
    pub n_seq: Vec<u64>,
    pub r_sets: Vec<Vec<usize>>,
    pub level_weights: Vec<Vec<f64>>,
}

/// Grow the full plan: level n applies the comb split with target y_n to
/// every leaf of level n-1. Each parent leaves exactly one remainder (its
/// deep leaf, or itself when too light to produce even one 1/y_n leaf), so
/// |R_n| equals the previous level count. All invariants are re-checked on
/// the constructed object; a violation is reported, never returned silently.
pub fn build_plan(y: &[f64], eps: f64, alpha: f64) -> Result<TreePlan, PrescribedError> {
    if !validate_y_sequence(y, eps, alpha) {
        return Err(PrescribedError::InvalidParameter(
            "target sequence fails the growth inequalities for this eps and alpha".into(),
        ));
    }
    // Deepest level is the largest; its count bound caps the whole plan.
    let cap_total: f64 = y.iter().map(|v| v.powf(alpha) + 1.0).sum();
    if cap_total > PLAN_LEAF_LIMIT as f64 {
        return Err(PrescribedError::SizeGuard {
            n: cap_total as u64,
            limit: PLAN_LEAF_LIMIT,
        });
    }
    let mut n_seq = vec![1u64];
    let mut r_sets = Vec::with_capacity(y.len());
    let mut level_weights: Vec<Vec<f64>> = Vec::with_capacity(y.len());
    let mut parents = vec![1.0f64];

    for (level, &target) in y.iter().enumerate() {
        let mut weights = Vec::new();
        let mut remainder = Vec::with_capacity(parents.len());
        for &w in &parents {
            if leaf_count(1.0 / w, target, alpha) <= 1.0 {
                // Too light to emit a 1/target leaf: passes through unchanged
                // and stays in the remainder set.
                remainder.push(weights.len());
                weights.push(w);
            } else {
                let split = step1_split(1.0 / w, target, alpha)?;
                remainder.push(weights.len());
                weights.extend_from_slice(&split.leaf_weights);
            }
        }
        check_level_invariants(level, target, eps, alpha, &parents, &weights, &remainder)?;
        n_seq.push(weights.len() as u64);
        r_sets.push(remainder);
        parents = weights.clone();
        level_weights.push(weights);
    }

    // Global count bound: N_n <= sum_{i<=n} (y_i^alpha + 1).
    let mut cap = 0.0;
    for (n, &target) in y.iter().enumerate() {
        cap += target.powf(alpha) + 1.0;
        if n_seq[n + 1] as f64 > cap + INVARIANT_TOL {
            return Err(PrescribedError::Invariant(format!(
                "count {} at level {} exceeds bound {cap}",
                n_seq[n + 1],
                n + 1
            )));
        }
    }
    Ok(TreePlan {
        y: y.to_vec(),
        eps,
        alpha,
        n_seq,
        r_sets,
        level_weights,
    })
}

fn check_level_invariants(
    level: usize,
    target: f64,
    eps: f64,
    alpha: f64,
    parents: &[f64],
    weights: &[f64],
    remainder: &[usize],
) -> Result<(), PrescribedError> {
    if remainder.len() != parents.len() {
        return Err(PrescribedError::Invariant(format!(
            "level {level}: remainder set size {} != parent count {}",
            remainder.len(),
            parents.len()
        )));
    }
    let total = compensated_sum(weights.iter().map(|w| w.powf(alpha)));
    if (total - 1.0).abs() > INVARIANT_TOL {
        return Err(PrescribedError::Invariant(format!(
            "level {level}: alpha-mass {total} != 1"
        )));
    }
    let one_over = 1.0 / target;
    let mut is_rem = vec![false; weights.len()];
    for &j in remainder {
        is_rem[j] = true;
    }
    for (j, &w) in weights.iter().enumerate() {
        if is_rem[j] {
            if w > one_over + INVARIANT_TOL {
                return Err(PrescribedError::Invariant(format!(
                    "level {level}: remainder leaf {j} weight {w} > 1/y"
                )));
            }
        } else if (w - one_over).abs() > INVARIANT_TOL {
            return Err(PrescribedError::Invariant(format!(
                "level {level}: regular leaf {j} weight {w} != 1/y"
            )));
        }
    }
    let rem_mass = compensated_sum(remainder.iter().map(|&j| weights[j].powf(alpha)));
    if rem_mass >= eps {
        return Err(PrescribedError::Invariant(format!(
            "level {level}: remainder mass {rem_mass} >= eps = {eps}"
        )));
    }
    // Growth lower bound used downstream: new-leaf count over y^alpha
    // exceeds 1 - eps.
    let new_leaves = (weights.len() - parents.len()) as f64;
    if new_leaves / target.powf(alpha) <= 1.0 - eps {
        return Err(PrescribedError::Invariant(format!(
            "level {level}: growth ratio {} not above 1 - eps",
            new_leaves / target.powf(alpha)
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn split_two_equal_halves() {
        let s = step1_split(1.0, 2.0, 1.0).unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.pairs.len(), 1);
        assert_abs_diff_eq!(s.pairs[0].1, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.pairs[0].0, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.leaf_weights[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.leaf_weights[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn split_integer_power_gives_equal_leaves() {
        let s = step1_split(1.0, 2.0, 2.0).unwrap();
        assert_eq!(s.n, 4);
        for &w in &s.leaf_weights {
            assert_abs_diff_eq!(w, 0.5, epsilon = 1e-12);
        }
        let mass: f64 = s.leaf_weights.iter().map(|w| w * w).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);

        let s = step1_split(1.0, 3.0, 1.0).unwrap();
        assert_eq!(s.n, 3);
        for &w in &s.leaf_weights {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(step1_split(2.0, 2.0, 1.0).is_err());
        assert!(step1_split(0.5, 2.0, 1.0).is_err());
        assert!(step1_split(1.0, 2.0, 0.0).is_err());
        assert!(matches!(
            step1_split(1.0, 1e9, 1.0),
            Err(PrescribedError::SizeGuard { .. })
        ));
    }

    #[test]
    fn split_pairs_replay_to_leaf_weights() {
        // Multiplying branch factors along the comb reproduces every leaf.
        let s = step1_split(1.5, 7.3, 1.7).unwrap();
        let mut carry = 1.0 / s.c;
        for (k, &(l, r)) in s.pairs.iter().enumerate() {
            assert_abs_diff_eq!(carry * r, s.leaf_weights[k + 1], epsilon = 1e-13);
            carry *= l;
        }
        assert_abs_diff_eq!(carry, s.leaf_weights[0], epsilon = 1e-13);
    }

    #[test]
    fn validate_examples() {
        assert!(validate_y_sequence(&[3.0, 10.0, 200.0], 0.5, 1.0));
        assert!(!validate_y_sequence(&[1.0, 2.0, 3.0], 0.5, 1.0));
        assert!(!validate_y_sequence(&[3.0, 10.0, 29.0], 0.5, 1.0));
        assert!(!validate_y_sequence(&[3.0, 3.0, 200.0], 0.5, 1.0));
    }

    #[test]
    fn single_level_plan() {
        let plan = build_plan(&[3.0], 0.5, 1.0).unwrap();
        assert_eq!(plan.n_seq, vec![1, 3]);
        assert_eq!(plan.r_sets[0], vec![0]);
        for &w in &plan.level_weights[0] {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_level_plan_counts_and_mass() {
        let plan = build_plan(&[3.0, 10.0], 0.5, 1.0).unwrap();
        assert_eq!(plan.n_seq, vec![1, 3, 12]);
        assert_eq!(plan.r_sets[1].len(), 3);
        let total = compensated_sum(plan.level_weights[1].iter().copied());
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let rem: f64 = plan.r_sets[1]
            .iter()
            .map(|&j| plan.level_weights[1][j])
            .sum();
        assert_abs_diff_eq!(rem, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn plan_rejects_invalid_sequence_and_oversize() {
        assert!(matches!(
            build_plan(&[1.0, 2.0], 0.5, 1.0),
            Err(PrescribedError::InvalidParameter(_))
        ));
        assert!(matches!(
            build_plan(&[2_000_001.0], 1e-6, 1.0),
            Err(PrescribedError::SizeGuard { .. })
        ));
    }

    /// Smallest admissible next target, padded by the given factor.
    fn next_target(prev_pows: &[f64], eps: f64, alpha: f64, pad: f64) -> f64 {
        let s: f64 = prev_pows.iter().map(|p| p + 1.0).sum();
        ((s / eps) * pad).powf(1.0 / alpha)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn split_mass_telescopes(
            c in 1.0f64..5.0,
            gap in 1.1f64..20.0,
            alpha in 0.3f64..3.0,
        ) {
            let x = c * gap;
            let s = step1_split(c, x, alpha).unwrap();
            let mass = compensated_sum(s.leaf_weights.iter().map(|w| w.powf(alpha)));
            prop_assert!((mass - c.powf(-alpha)).abs() <= 1e-12);
            prop_assert!(s.leaf_weights[0] <= 1.0 / x + 1e-12);
            for &w in &s.leaf_weights[1..] {
                prop_assert_eq!(w, 1.0 / x);
            }
        }

        #[test]
        fn validator_agrees_with_brute_force(
            raw in proptest::collection::vec(0.5f64..50.0, 1..5),
            eps in 0.05f64..0.9,
            alpha in 0.4f64..2.5,
        ) {
            let mut y = raw.clone();
            y.sort_by(f64::total_cmp);
            y.dedup();
            let got = validate_y_sequence(&y, eps, alpha);
            let pows: Vec<f64> = y.iter().map(|v| v.powf(alpha)).collect();
            let mut want = pows[0] > 1.0 / eps;
            for n in 1..y.len() {
                let s: f64 = pows[..n].iter().map(|p| p + 1.0).sum();
                want &= pows[n] > s / eps;
            }
            prop_assert_eq!(got, want);
        }

        #[test]
        fn plans_satisfy_all_level_invariants(
            eps in 0.08f64..0.6,
            alpha in 0.5f64..2.2,
            pad1 in 1.05f64..3.0,
            pad2 in 1.05f64..2.0,
            pad3 in 1.05f64..1.5,
        ) {
            let y1 = (1.0 / eps).powf(1.0 / alpha) * pad1;
            let mut pows = vec![y1.powf(alpha)];
            let y2 = next_target(&pows, eps, alpha, pad2);
            pows.push(y2.powf(alpha));
            let y3 = next_target(&pows, eps, alpha, pad3);
            let y = vec![y1, y2, y3];
            prop_assume!(validate_y_sequence(&y, eps, alpha));
            prop_assume!(y3.powf(alpha) < 1e5);
            // build_plan re-checks every invariant internally and refuses to
            // return a plan that violates any of them.
            let plan = build_plan(&y, eps, alpha).unwrap();
            prop_assert_eq!(plan.n_seq[0], 1);
            for (lvl, target) in y.iter().enumerate() {
                let new = plan.n_seq[lvl + 1] - plan.n_seq[lvl];
                prop_assert!(new as f64 <= target.powf(alpha) + 1e-12);
                prop_assert!(new as f64 / target.powf(alpha) > 1.0 - eps);
                prop_assert_eq!(plan.r_sets[lvl].len() as u64, plan.n_seq[lvl]);
            }
        }
    }
}
