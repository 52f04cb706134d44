//! Collision kernels: the joint law of the pre-collision weight pair (L, R).
//!
//! A kernel exposes pair sampling, the moment functional
//! S(p) = E[|L|^p + |R|^p] - 1, the index alpha (smallest positive root of
//! S), a negative-moment ("smallness") probe, and a statistical check that
//! samples actually cover the curve |x|^alpha + |y|^alpha = 1.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::numeric::{bisect, bisect_predicate, graded_gl_points};
use crate::rng::substream;
use crate::stats::{ks_two_sample, ks_two_sample_critical};

/// Sampler signature for user-supplied kernels.
pub type PairSampler = Arc<dyn Fn(&mut dyn RngCore) -> (f64, f64) + Send + Sync>;
/// Optional closed-form moment S(p) for user-supplied kernels.
pub type MomentFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    /// (L, R) = (cos T, sin T), T uniform on [0, 2pi).
    Kac,
    /// (L, R) = (sgn(cos T)|cos T|^{2/a0}, sgn(sin T)|sin T|^{2/a0}).
    InelasticKac { alpha0: f64 },
    /// (L, R) = (U^{1/a0}, (1-U)^{1/a0}), U uniform on [0, 1].
    NonnegativeSimplex { alpha0: f64 },
    /// Deterministic pair (l0, r0).
    PointMass { l0: f64, r0: f64 },
    /// User-supplied sampler, identified by a label.
    Custom { label: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KernelFlags {
    pub nonnegative_support: bool,
    pub quarter_turn_invariant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MomentForm {
    ClosedForm,
    /// Gauss-Legendre over the kernel's natural parameter (angle or simplex
    /// coordinate) with the given node count.
    Quadrature {
        nodes: usize,
    },
    /// Fixed-seed Monte Carlo average of |L|^p + |R|^p.
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

/// S(p) evaluation result; stderr is zero for deterministic forms.
#[derive(Clone, Copy, Debug)]
pub struct SMoment {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SmallnessReport {
    pub holds: bool,
    pub witness_p: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SupportProbe {
    pub x: f64,
    pub y: f64,
    pub hits: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct QuarterTurnTest {
    pub statistic: f64,
    pub critical: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug)]
pub struct SupportReport {
    pub alpha: f64,
    pub probes: Vec<SupportProbe>,
    pub all_probes_hit: bool,
    pub missed_probes: Vec<usize>,
    pub probe_radius: f64,
    pub samples_used: usize,
    pub declared: KernelFlags,
    pub quarter_turn: QuarterTurnTest,
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("moment functional diverges at p = {p}")]
    MomentDiverges { p: f64 },
    #[error("moment form `{form}` is not available for kernel `{kernel}`")]
    UnsupportedMomentForm { form: String, kernel: String },
    #[error("moment functional has no root in (0, {p_max}]; index hypothesis fails")]
    NoAlphaRoot { p_max: f64 },
    #[error("unrecognized kernel spec `{0}` (expected kac | inelastickac:a | simplex:a | pointmass:l,r)")]
    SpecParse(String),
}

#[derive(Clone)]
pub struct KernelModel {
    pub kind: KernelKind,
    pub declared_flags: KernelFlags,
    pub moment_form: MomentForm,
    custom_sampler: Option<PairSampler>,
    custom_moment: Option<MomentFn>,
}

impl fmt::Debug for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelModel")
            .field("kind", &self.kind)
            .field("declared_flags", &self.declared_flags)
            .field("moment_form", &self.moment_form)
            .finish()
    }
}

impl fmt::Display for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            KernelKind::Kac => write!(f, "kac"),
            KernelKind::InelasticKac { alpha0 } => write!(f, "inelastickac:{alpha0}"),
            KernelKind::NonnegativeSimplex { alpha0 } => write!(f, "simplex:{alpha0}"),
            KernelKind::PointMass { l0, r0 } => write!(f, "pointmass:{l0},{r0}"),
            KernelKind::Custom { label } => write!(f, "custom:{label}"),
        }
    }
}

impl KernelModel {
    pub fn kac() -> Self {
        Self {
            kind: KernelKind::Kac,
            declared_flags: KernelFlags {
                nonnegative_support: false,
                quarter_turn_invariant: true,
            },
            moment_form: MomentForm::ClosedForm,
            custom_sampler: None,
            custom_moment: None,
        }
    }

    pub fn inelastic_kac(alpha0: f64) -> Result<Self, KernelError> {
        if !(alpha0 > 0.0) || !alpha0.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "inelastickac exponent must be positive, got {alpha0}"
            )));
        }
        Ok(Self {
            kind: KernelKind::InelasticKac { alpha0 },
            declared_flags: KernelFlags {
                nonnegative_support: false,
                quarter_turn_invariant: true,
            },
            moment_form: MomentForm::ClosedForm,
            custom_sampler: None,
            custom_moment: None,
        })
    }

    pub fn nonnegative_simplex(alpha0: f64) -> Result<Self, KernelError> {
        if !(alpha0 > 0.0) || !alpha0.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "simplex exponent must be positive, got {alpha0}"
            )));
        }
        Ok(Self {
            kind: KernelKind::NonnegativeSimplex { alpha0 },
            declared_flags: KernelFlags {
                nonnegative_support: true,
                quarter_turn_invariant: false,
            },
            moment_form: MomentForm::ClosedForm,
            custom_sampler: None,
            custom_moment: None,
        })
    }

    pub fn point_mass(l0: f64, r0: f64) -> Result<Self, KernelError> {
        if !l0.is_finite() || !r0.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "point mass weights must be finite, got ({l0}, {r0})"
            )));
        }
        Ok(Self {
            kind: KernelKind::PointMass { l0, r0 },
            declared_flags: KernelFlags {
                nonnegative_support: l0 >= 0.0 && r0 >= 0.0,
                quarter_turn_invariant: false,
            },
            moment_form: MomentForm::ClosedForm,
            custom_sampler: None,
            custom_moment: None,
        })
    }

    /// User-supplied kernel. With no closed moment the default moment form is
    /// fixed-seed Monte Carlo.
    pub fn custom(
        label: impl Into<String>,
        sampler: PairSampler,
        closed_moment: Option<MomentFn>,
        flags: KernelFlags,
    ) -> Self {
        let moment_form = if closed_moment.is_some() {
            MomentForm::ClosedForm
        } else {
            MomentForm::MonteCarlo {
                samples: 200_000,
                seed: 0x5EED_0001,
            }
        };
        Self {
            kind: KernelKind::Custom {
                label: label.into(),
            },
            declared_flags: flags,
            moment_form,
            custom_sampler: Some(sampler),
            custom_moment: closed_moment,
        }
    }

    pub fn with_moment_form(mut self, form: MomentForm) -> Self {
        self.moment_form = form;
        self
    }

    /// Parse a kernel spec string:
    /// `kac | inelastickac:a | simplex:a | pointmass:l,r`.
    pub fn parse_spec(spec: &str) -> Result<Self, KernelError> {
        let s = spec.trim().to_ascii_lowercase();
        if s == "kac" {
            return Ok(Self::kac());
        }
        let (head, args) = match s.split_once(':') {
            Some(t) => t,
            None => return Err(KernelError::SpecParse(spec.to_string())),
        };
        let parse_f64 = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| KernelError::SpecParse(spec.to_string()))
        };
        match head {
            "inelastickac" | "inelastic" => Self::inelastic_kac(parse_f64(args)?),
            "simplex" | "nonnegativesimplex" => Self::nonnegative_simplex(parse_f64(args)?),
            "pointmass" => {
                let (l, r) = args
                    .split_once(',')
                    .ok_or_else(|| KernelError::SpecParse(spec.to_string()))?;
                Self::point_mass(parse_f64(l)?, parse_f64(r)?)
            }
            _ => Err(KernelError::SpecParse(spec.to_string())),
        }
    }

    /// The identity exponent a0 with |L|^{a0} + |R|^{a0} = 1 a.s., when the
    /// kernel has one by construction.
    pub fn identity_exponent(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Kac => Some(2.0),
            KernelKind::InelasticKac { alpha0 } | KernelKind::NonnegativeSimplex { alpha0 } => {
                Some(alpha0)
            }
            _ => None,
        }
    }

    /// Draw one (L, R) pair.
    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        match &self.kind {
            KernelKind::Kac => {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let (s, c) = theta.sin_cos();
                (c, s)
            }
            KernelKind::InelasticKac { alpha0 } => {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let (s, c) = theta.sin_cos();
                let e = 2.0 / alpha0;
                (signed_pow(c, e), signed_pow(s, e))
            }
            KernelKind::NonnegativeSimplex { alpha0 } => {
                let u: f64 = rng.random();
                if *alpha0 == 1.0 {
                    (u, 1.0 - u)
                } else {
                    let inv = 1.0 / alpha0;
                    (u.powf(inv), (1.0 - u).powf(inv))
                }
            }
            KernelKind::PointMass { l0, r0 } => (*l0, *r0),
            KernelKind::Custom { .. } => {
                let sampler = self
                    .custom_sampler
                    .as_ref()
                    .expect("custom kernel carries a sampler");
                let mut dyn_rng: &mut dyn RngCore = rng;
                sampler(&mut dyn_rng)
            }
        }
    }

    /// Closed form of S(p) when one exists.
    fn closed_s(&self, p: f64) -> Option<f64> {
        match &self.kind {
            // E|cos T|^q = Gamma((q+1)/2) / (sqrt(pi) Gamma(q/2 + 1)); here
            // q = 2p/a0, giving S(p) = 2 Gamma(p/a0 + 1/2)/(sqrt(pi) Gamma(p/a0 + 1)) - 1.
            KernelKind::Kac => Some(trig_power_s(p / 2.0)),
            KernelKind::InelasticKac { alpha0 } => Some(trig_power_s(p / alpha0)),
            // E U^{p/a0} = a0/(p + a0).
            KernelKind::NonnegativeSimplex { alpha0 } => Some(2.0 * alpha0 / (p + alpha0) - 1.0),
            KernelKind::PointMass { l0, r0 } => Some(l0.abs().powf(p) + r0.abs().powf(p) - 1.0),
            KernelKind::Custom { .. } => self.custom_moment.as_ref().map(|m| m(p)),
        }
    }

    /// Quadrature form of S(p) over the kernel's natural parameterization.
    /// Endpoint-graded panels handle the branch points |cos|^e, u^e for
    /// fractional e; `nodes` is the per-panel Gauss-Legendre order.
    fn quadrature_s(&self, p: f64, nodes: usize) -> Result<f64, KernelError> {
        let per_panel = nodes.clamp(8, 48);
        match &self.kind {
            KernelKind::Kac | KernelKind::InelasticKac { .. } => {
                let alpha0 = match self.kind {
                    KernelKind::InelasticKac { alpha0 } => alpha0,
                    _ => 2.0,
                };
                // |cos|, |sin| are symmetric across quadrants: integrate the
                // quarter period and average with weight 2/pi.
                let (xs, ws) = graded_gl_points(0.0, std::f64::consts::FRAC_PI_2, per_panel);
                let e = 2.0 * p / alpha0;
                let mut acc = crate::numeric::CompensatedSum::new();
                for (x, w) in xs.iter().zip(ws.iter()) {
                    acc.add(w * (x.cos().powf(e) + x.sin().powf(e)));
                }
                Ok(acc.total() * std::f64::consts::FRAC_2_PI - 1.0)
            }
            KernelKind::NonnegativeSimplex { alpha0 } => {
                let (xs, ws) = graded_gl_points(0.0, 1.0, per_panel);
                let e = p / alpha0;
                let mut acc = crate::numeric::CompensatedSum::new();
                for (x, w) in xs.iter().zip(ws.iter()) {
                    acc.add(w * (x.powf(e) + (1.0 - x).powf(e)));
                }
                Ok(acc.total() - 1.0)
            }
            KernelKind::PointMass { .. } => Ok(self.closed_s(p).unwrap()),
            KernelKind::Custom { .. } => Err(KernelError::UnsupportedMomentForm {
                form: "quadrature".into(),
                kernel: self.to_string(),
            }),
        }
    }

    fn monte_carlo_s(&self, p: f64, samples: usize, seed: u64) -> SMoment {
        let mut rng = substream(seed, 0);
        let n = samples as f64;
        let mut sum = crate::numeric::CompensatedSum::new();
        let mut sq = crate::numeric::CompensatedSum::new();
        for _ in 0..samples {
            let (l, r) = self.sample_pair(&mut rng);
            let v = l.abs().powf(p) + r.abs().powf(p);
            sum.add(v);
            sq.add(v * v);
        }
        let mean = sum.total() / n;
        let var = (sq.total() / n - mean * mean).max(0.0) * n / (n - 1.0);
        SMoment {
            value: mean - 1.0,
            stderr: (var / n).sqrt(),
        }
    }

    /// Moment functional S(p) = E[|L|^p + |R|^p] - 1 under the configured
    /// moment form.
    pub fn s_moment(&self, p: f64) -> Result<SMoment, KernelError> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "moment order must be positive and finite, got {p}"
            )));
        }
        let m = match &self.moment_form {
            MomentForm::ClosedForm => match self.closed_s(p) {
                Some(v) => SMoment {
                    value: v,
                    stderr: 0.0,
                },
                None => {
                    return Err(KernelError::UnsupportedMomentForm {
                        form: "closed-form".into(),
                        kernel: self.to_string(),
                    })
                }
            },
            MomentForm::Quadrature { nodes } => SMoment {
                value: self.quadrature_s(p, (*nodes).max(8))?,
                stderr: 0.0,
            },
            MomentForm::MonteCarlo { samples, seed } => {
                self.monte_carlo_s(p, (*samples).max(1_000), *seed)
            }
        };
        if !m.value.is_finite() {
            return Err(KernelError::MomentDiverges { p });
        }
        Ok(m)
    }

    /// Smallest positive root of S on (0, p_max], within `tol`.
    ///
    /// Scans a geometric grid from the left and resolves the first event:
    /// either a sign change (bisected) or entry into a |S| <= tol_S plateau
    /// (predicate-bisected), where tol_S is 1e-10 for deterministic moment
    /// forms and 3x the pointwise standard error for Monte Carlo.
    pub fn find_alpha(&self, p_max: f64, tol: f64) -> Result<f64, KernelError> {
        if !(p_max > 0.0) || !(tol > 0.0) {
            return Err(KernelError::InvalidParameter(format!(
                "find_alpha needs positive p_max and tol, got ({p_max}, {tol})"
            )));
        }
        const GRID: usize = 256;
        const TOL_FLOOR: f64 = 1e-10;
        let p_min = (1e-3_f64).min(p_max / 2.0);
        let ratio = (p_max / p_min).powf(1.0 / (GRID as f64 - 1.0));
        let zeroish = |m: &SMoment| m.value.abs() <= TOL_FLOOR.max(3.0 * m.stderr);

        let mut prev_p = p_min;
        let mut prev = self.s_moment(prev_p)?;
        if zeroish(&prev) {
            // Plateau reaches the left end of the scan; report the scan start.
            return Ok(prev_p);
        }
        for i in 1..GRID {
            let p = if i == GRID - 1 {
                p_max
            } else {
                p_min * ratio.powi(i as i32)
            };
            let cur = self.s_moment(p)?;
            if zeroish(&cur) {
                let entry = bisect_predicate(
                    |q| self.s_moment(q).map(|m| zeroish(&m)).unwrap_or(false),
                    prev_p,
                    p,
                    tol,
                    200,
                );
                return Ok(entry);
            }
            if prev.value.signum() != cur.value.signum() {
                let root = bisect(
                    |q| self.s_moment(q).map(|m| m.value).unwrap_or(f64::NAN),
                    prev_p,
                    p,
                    tol,
                    200,
                )
                .map_err(|_| KernelError::NoAlphaRoot { p_max })?;
                return Ok(self.snap_root(root, tol));
            }
            prev_p = p;
            prev = cur;
        }
        Err(KernelError::NoAlphaRoot { p_max })
    }

    /// Replace a bisection root by a nearby distinguished exponent (the
    /// kernel's identity exponent, or a half-integer) when the moment form
    /// is deterministic and vanishes there to machine precision. Exact
    /// roots let callers branch exactly on special indices such as 1 and 2.
    fn snap_root(&self, root: f64, tol: f64) -> f64 {
        const SNAP_S: f64 = 1e-12;
        let window = (4.0 * tol).max(1e-9);
        let mut candidates = [self.identity_exponent(), Some((2.0 * root).round() / 2.0)];
        for c in candidates.iter_mut().flatten() {
            if *c > 0.0 && (*c - root).abs() <= window {
                if let Ok(m) = self.s_moment(*c) {
                    if m.stderr == 0.0 && m.value.abs() <= SNAP_S {
                        return *c;
                    }
                }
            }
        }
        root
    }

    /// True iff S(p) is significantly negative at some grid point
    /// (threshold -3x stderr; strict negativity for deterministic forms).
    /// Grid points where the moment is not evaluable are skipped.
    pub fn check_smallness(&self, p_grid: &[f64]) -> SmallnessReport {
        for &p in p_grid {
            if let Ok(m) = self.s_moment(p) {
                if m.value < -3.0 * m.stderr {
                    return SmallnessReport {
                        holds: true,
                        witness_p: Some(p),
                    };
                }
            }
        }
        SmallnessReport {
            holds: false,
            witness_p: None,
        }
    }

    /// Statistical support check on the curve |x|^alpha + |y|^alpha = 1,
    /// restricted to the nonnegative quadrant when the kernel declares
    /// nonnegative support, plus a two-sample quarter-turn symmetry test of
    /// (L, R) against (R, -L).
    pub fn support_conditions(
        &self,
        alpha: f64,
        probe_count: usize,
        rng_seed: u64,
    ) -> Result<SupportReport, KernelError> {
        if !(alpha > 0.0) || probe_count == 0 {
            return Err(KernelError::InvalidParameter(format!(
                "support check needs alpha > 0 and probes >= 1, got ({alpha}, {probe_count})"
            )));
        }
        const SUPPORT_SAMPLES: usize = 200_000;
        const QUARTER_SAMPLES: usize = 50_000;
        let arc = if self.declared_flags.nonnegative_support {
            std::f64::consts::FRAC_PI_2
        } else {
            std::f64::consts::TAU
        };
        let curve_point = |phi: f64| {
            let (s, c) = phi.sin_cos();
            let t = (c.abs().powf(alpha) + s.abs().powf(alpha)).powf(-1.0 / alpha);
            (t * c, t * s)
        };
        let mut probes: Vec<SupportProbe> = (0..probe_count)
            .map(|j| {
                let phi = (j as f64 + 0.5) / probe_count as f64 * arc;
                let (x, y) = curve_point(phi);
                SupportProbe { x, y, hits: 0 }
            })
            .collect();
        // Probe radius: three quarters of the widest gap between consecutive
        // probes, so a covering law hits every probe while an atom cannot.
        let mut max_gap: f64 = 0.0;
        for j in 0..probe_count {
            let a = &probes[j];
            let b = &probes[(j + 1) % probe_count.max(2)];
            let gap = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            max_gap = max_gap.max(gap);
        }
        if probe_count == 1 {
            max_gap = 1.0;
        }
        let delta = 0.75 * max_gap;

        let mut rng = substream(rng_seed, 0);
        for _ in 0..SUPPORT_SAMPLES {
            let (l, r) = self.sample_pair(&mut rng);
            let mut best = usize::MAX;
            let mut best_d2 = delta * delta;
            for (j, pr) in probes.iter().enumerate() {
                let d2 = (l - pr.x).powi(2) + (r - pr.y).powi(2);
                if d2 <= best_d2 {
                    best_d2 = d2;
                    best = j;
                }
            }
            if best != usize::MAX {
                probes[best].hits += 1;
            }
        }
        let missed_probes: Vec<usize> = probes
            .iter()
            .enumerate()
            .filter(|(_, p)| p.hits == 0)
            .map(|(j, _)| j)
            .collect();

        // Quarter-turn test: angles of (L, R) against angles of (R, -L) from
        // an independent draw.
        let mut rng_a = substream(rng_seed, 1);
        let mut rng_b = substream(rng_seed, 2);
        let angles_a: Vec<f64> = (0..QUARTER_SAMPLES)
            .map(|_| {
                let (l, r) = self.sample_pair(&mut rng_a);
                r.atan2(l)
            })
            .collect();
        let angles_b: Vec<f64> = (0..QUARTER_SAMPLES)
            .map(|_| {
                let (l, r) = self.sample_pair(&mut rng_b);
                (-l).atan2(r)
            })
            .collect();
        let statistic = ks_two_sample(&angles_a, &angles_b);
        let critical = ks_two_sample_critical(QUARTER_SAMPLES, QUARTER_SAMPLES, 0.01);

        Ok(SupportReport {
            alpha,
            all_probes_hit: missed_probes.is_empty(),
            missed_probes,
            probes,
            probe_radius: delta,
            samples_used: SUPPORT_SAMPLES,
            declared: self.declared_flags,
            quarter_turn: QuarterTurnTest {
                statistic,
                critical,
                consistent: statistic <= critical,
            },
        })
    }
}

#[inline]
fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// S(p) for trig-power kernels in terms of q = p/a0:
/// 2 Gamma(q + 1/2) / (sqrt(pi) Gamma(q + 1)) - 1, via log-gamma.
fn trig_power_s(q: f64) -> f64 {
    (std::f64::consts::LN_2 + ln_gamma(q + 0.5)
        - ln_gamma(q + 1.0)
        - 0.5 * std::f64::consts::PI.ln())
    .exp()
        - 1.0
}
