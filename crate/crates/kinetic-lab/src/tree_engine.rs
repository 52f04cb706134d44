//! Weighted random binary trees behind the velocity representation: a Yule
//! birth count selects the tree size, a uniform-index splitting chain grows
//! the leaf weights, and weighted sums of i.i.d. initial draws produce
//! velocity samples. The alpha-mass of the leaves is the martingale whose
//! almost-sure limit the fixed-depth ensembles approximate.

use rand::Rng;

use crate::initial_data::InitialLaw;
use crate::kernels::KernelModel;
use crate::numeric::CompensatedSum;
use crate::rng::par_map_replicates;

/// Leaf weights of one grown tree, in splice order, with an audit log of
/// (split index, weight pair) sufficient to reconstruct the tree.
#[derive(Clone, Debug)]
pub struct LeafWeights {
    pub n: usize,
    pub betas: Vec<f64>,
    pub split_log: Option<Vec<(usize, (f64, f64))>>,
}

/// Tree size at time t: geometric on {1, 2, ...} with success probability
/// e^{-t}, by inverse cdf from a single uniform.
pub fn sample_yule_count<R: Rng>(t: f64, rng: &mut R) -> u64 {
    debug_assert!(t >= 0.0, "time must be nonnegative");
    let u: f64 = rng.random();
    let v = 1.0 - u; // in (0, 1]
    let q = -(-t).exp_m1(); // 1 - e^{-t}, accurate for small t
    if q <= 0.0 {
        return 1;
    }
    let n = (v.ln() / q.ln()).ceil();
    (n as u64).max(1)
}

/// Grow leaf weights by n-1 splice splits: the split index is uniform over
/// the current leaves, the chosen leaf beta is replaced in place by the
/// adjacent pair (beta*L, beta*R), and every other leaf keeps its position.
pub fn grow_weights<R: Rng>(n: usize, kernel: &KernelModel, rng: &mut R) -> LeafWeights {
    assert!(n >= 1, "tree needs at least one leaf");
    let mut betas = Vec::with_capacity(n);
    betas.push(1.0);
    let mut log = Vec::with_capacity(n - 1);
    for k in 1..n {
        let i = rng.random_range(0..k);
        let (l, r) = kernel.sample_pair(rng);
        let b = betas[i];
        betas[i] = b * l;
        betas.insert(i + 1, b * r);
        log.push((i, (l, r)));
    }
    LeafWeights {
        n,
        betas,
        split_log: Some(log),
    }
}

/// Order-free grower for sampling hot paths: same index and pair draws as
/// `grow_weights`, but the right child is pushed to the back instead of
/// spliced in, making each split O(1). The leaf-weight multiset has the same
/// law (leaves are exchangeable under the uniform-index chain); positions and
/// the audit log are not preserved.
pub fn grow_weights_fast<R: Rng>(n: usize, kernel: &KernelModel, rng: &mut R, buf: &mut Vec<f64>) {
    debug_assert!(n >= 1);
    buf.clear();
    buf.push(1.0);
    for k in 1..n {
        let i = rng.random_range(0..k);
        let (l, r) = kernel.sample_pair(rng);
        let b = buf[i];
        buf[i] = b * l;
        buf.push(b * r);
    }
}

/// Sum of |beta_j|^alpha over a weight slice, compensated. Exact powers for
/// alpha = 1 and alpha = 2 keep conservative kernels at 1.0 to round-off.
pub fn mass_stat_slice(betas: &[f64], alpha: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    if alpha == 1.0 {
        for &b in betas {
            acc.add(b.abs());
        }
    } else if alpha == 2.0 {
        for &b in betas {
            acc.add(b * b);
        }
    } else {
        for &b in betas {
            acc.add(b.abs().powf(alpha));
        }
    }
    acc.total()
}

/// Alpha-mass of a grown tree.
pub fn mass_stat(w: &LeafWeights, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    mass_stat_slice(&w.betas, alpha)
}

/// One velocity draw with its tree size and optional alpha-mass.
#[derive(Clone, Copy, Debug)]
pub struct VelocityDraw {
    pub v: f64,
    pub nu: u64,
    pub mass_alpha: Option<f64>,
}

/// Velocity at time t: weighted sum of i.i.d. initial draws over the leaves
/// of a Yule-sized tree. Optionally reports the alpha-mass of the same tree.
pub fn sample_velocity_draw<R: Rng>(
    t: f64,
    kernel: &KernelModel,
    initial: &InitialLaw,
    alpha: Option<f64>,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> VelocityDraw {
    let nu = sample_yule_count(t, rng);
    let n = usize::try_from(nu).expect("tree size exceeds address space");
    grow_weights_fast(n, kernel, rng, buf);
    let mut acc = CompensatedSum::new();
    for &b in buf.iter() {
        acc.add(b * initial.sample(rng));
    }
    VelocityDraw {
        v: acc.total(),
        nu,
        mass_alpha: alpha.map(|a| mass_stat_slice(buf, a)),
    }
}

/// Velocity at time t (value only).
pub fn sample_velocity<R: Rng>(
    t: f64,
    kernel: &KernelModel,
    initial: &InitialLaw,
    rng: &mut R,
) -> f64 {
    let mut buf = Vec::new();
    sample_velocity_draw(t, kernel, initial, None, rng, &mut buf).v
}

/// Independent velocity replicates, worker-count independent.
pub fn sample_velocities(
    t: f64,
    kernel: &KernelModel,
    initial: &InitialLaw,
    replicates: u64,
    master_seed: u64,
) -> Vec<f64> {
    par_map_replicates(master_seed, replicates, |_, rng| {
        let mut buf = Vec::new();
        sample_velocity_draw(t, kernel, initial, None, rng, &mut buf).v
    })
}

/// Fixed-depth ensemble of the alpha-mass martingale: replicate trees grown
/// to exactly n_big leaves, one mass value each. Approximates the law of the
/// almost-sure limit; the depth is a parameter precisely so ensembles at
/// n_big and 2*n_big can be compared for stability.
pub fn sample_m_infinity(
    kernel: &KernelModel,
    alpha: f64,
    n_big: usize,
    replicates: u64,
    master_seed: u64,
) -> Vec<f64> {
    par_map_replicates(master_seed, replicates, |_, rng| {
        let mut buf = Vec::with_capacity(n_big);
        grow_weights_fast(n_big, kernel, rng, &mut buf);
        mass_stat_slice(&buf, alpha)
    })
}
