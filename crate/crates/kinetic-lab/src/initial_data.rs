//! Catalog of initial laws: samplers, cdfs, characteristic functions,
//! moments, symmetrization, tail functionals x^a(1-F(x)) / x^a F(-x), and
//! membership classification for the standard domain of attraction of stable
//! laws. Includes a piecewise power-law construction whose upper tail
//! functional oscillates between two prescribed values forever, so the tail
//! limits fail to exist while the symmetrized law has exact constant tails.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use statrs::function::erf::{erf, erfc};
use thiserror::Error;

use crate::numeric::{bisect, trig_tail_integrals};

#[derive(Debug, Error)]
pub enum InitialError {
    #[error("invalid initial-law parameter: {0}")]
    InvalidParameter(String),
    #[error("unrecognized initial-law spec `{0}` (expected gaussian:m,v | pointmass:x | cauchy:l,s | pareto:a,c1,c2[,shift] | appendixb:low,high,k,s1,alpha | symmetrized:<inner>)")]
    SpecParse(String),
    #[error("oscillating-tail law has a decreasing bridge (needs s1^alpha >= low + high, got s1^alpha = {got} < {needed}); cdf/sampler unavailable")]
    ImproperBridge { got: f64, needed: f64 },
}

/// Piecewise power-law with prescribed oscillating upper tail functional:
/// x^alpha (1 - F(x)) equals `tail_high` at the points s_m and `tail_low` at
/// the points i_m, forever. Mass sits on the "waves" (s_m, i_m) with density
/// k*alpha/x^{alpha+1}, separated by flats; the negative side is defined by
/// F(x) = 2c|x|^{-alpha} - 1 + F(-x), c = (low + high)/2, which makes the
/// two-sided combined functional x^alpha(1-F(x)) + x^alpha F(-x) exactly 2c
/// for every x >= s1.
#[derive(Clone, Debug)]
pub struct AppendixBLaw {
    pub tail_low: f64,
    pub tail_high: f64,
    pub k: f64,
    pub s1: f64,
    pub alpha: f64,
    /// c = (tail_low + tail_high)/2; the symmetrized tail constant.
    pub c: f64,
    /// Whether the linear bridge on (-s1, s1) is nondecreasing
    /// (s1^alpha >= low + high); required for a samplable cdf.
    pub proper_bridge: bool,
    /// Whether F(s1) = 0 exactly (no positive mass below s1).
    pub zero_at_s1: bool,
    /// Wave starts s_1 < s_2 < ...; interleaved with i_seq.
    pub s_seq: Vec<f64>,
    /// Wave ends i_1 < i_2 < ... with s_m < i_m < s_{m+1}.
    pub i_seq: Vec<f64>,
}

/// Build the oscillating-tail law. Sequences are extended past `m_max` until
/// the remaining tail mass is negligible, so cdf and sampler cover the line.
pub fn build_appendix_b(
    tail_low: f64,
    tail_high: f64,
    k: f64,
    s1: f64,
    alpha: f64,
    m_max: usize,
) -> Result<AppendixBLaw, InitialError> {
    if !(tail_low > 0.0 && tail_high > tail_low) {
        return Err(InitialError::InvalidParameter(format!(
            "requires 0 < low < high, got low={tail_low}, high={tail_high}"
        )));
    }
    if !(k > tail_high && k < tail_high + tail_low) {
        return Err(InitialError::InvalidParameter(format!(
            "requires k in (high, high+low) = ({tail_high}, {}), got k={k}",
            tail_high + tail_low
        )));
    }
    if !(s1 > 1.0) {
        return Err(InitialError::InvalidParameter(format!(
            "requires s1 > 1, got s1={s1}"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(InitialError::InvalidParameter(format!(
            "requires alpha > 0, got alpha={alpha}"
        )));
    }
    if m_max == 0 {
        return Err(InitialError::InvalidParameter("requires m_max >= 1".into()));
    }
    let s1a = s1.powf(alpha);
    if s1a < tail_high {
        return Err(InitialError::InvalidParameter(format!(
            "requires high <= s1^alpha (so F(s1) >= 0), got s1^alpha={s1a} < {tail_high}"
        )));
    }
    // Wave end:   i_m = s_m ((k - low)/(k - high))^{1/alpha}, from
    //             F(s_m) + k(s_m^{-a} - i_m^{-a}) = 1 - low * i_m^{-a}.
    // Next start: s_{m+1} = i_m (high/low)^{1/alpha}, from the flat
    //             1 - low * i_m^{-a} = 1 - high * s_{m+1}^{-a}.
    let ratio_i = ((k - tail_low) / (k - tail_high)).powf(1.0 / alpha);
    let ratio_s = (tail_high / tail_low).powf(1.0 / alpha);
    let mut s_seq = vec![s1];
    let mut i_seq = Vec::new();
    loop {
        let s_m = *s_seq.last().unwrap();
        let i_m = s_m * ratio_i;
        i_seq.push(i_m);
        let s_next = i_m * ratio_s;
        let covered = tail_high * s_next.powf(-alpha) < 1e-300 || s_next > 1e290;
        if (s_seq.len() >= m_max && covered) || s_seq.len() >= 4000 {
            break;
        }
        s_seq.push(s_next);
    }
    Ok(AppendixBLaw {
        tail_low,
        tail_high,
        k,
        s1,
        alpha,
        c: 0.5 * (tail_low + tail_high),
        proper_bridge: s1a >= tail_low + tail_high,
        zero_at_s1: s1a == tail_high,
        s_seq,
        i_seq,
    })
}

impl AppendixBLaw {
    /// Survival 1 - F on the positive carrier [s1, infinity), computed in
    /// small-number arithmetic so the tail keeps full relative precision.
    fn positive_sf(&self, x: f64) -> f64 {
        debug_assert!(x >= self.s1);
        let m = match self.s_seq.binary_search_by(|s| s.partial_cmp(&x).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let s_m = self.s_seq[m];
        let i_m = self.i_seq[m];
        if x <= i_m {
            self.k * x.powf(-self.alpha) - (self.k - self.tail_high) * s_m.powf(-self.alpha)
        } else {
            self.tail_low * i_m.powf(-self.alpha)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x >= self.s1 {
            1.0 - self.positive_sf(x)
        } else if x > -self.s1 {
            let sa = self.s1.powf(-self.alpha);
            let f_lo = self.tail_low * sa;
            let f_hi = 1.0 - self.tail_high * sa;
            f_lo + (x + self.s1) / (2.0 * self.s1) * (f_hi - f_lo)
        } else {
            // F(x) = 2c|x|^{-a} - (1 - F(|x|)); both terms stay small.
            let u = -x;
            (2.0 * self.c * u.powf(-self.alpha) - self.positive_sf(u)).max(0.0)
        }
    }

    /// Survival function 1 - F, cancellation-free on both tails.
    pub fn sf(&self, x: f64) -> f64 {
        if x >= self.s1 {
            self.positive_sf(x)
        } else {
            1.0 - self.cdf(x)
        }
    }

    /// Density; on the negative tail it is 2 c a |x|^{-a-1} - f(|x|), which
    /// stays nonnegative because k < 2c.
    pub fn density(&self, x: f64) -> f64 {
        if x >= self.s1 {
            let m = match self.s_seq.binary_search_by(|s| s.partial_cmp(&x).unwrap()) {
                Ok(i) => i,
                Err(0) => 0,
                Err(i) => i - 1,
            };
            if x <= self.i_seq[m] {
                self.k * self.alpha * x.powf(-self.alpha - 1.0)
            } else {
                0.0
            }
        } else if x > -self.s1 {
            let sa = self.s1.powf(-self.alpha);
            (1.0 - (self.tail_low + self.tail_high) * sa) / (2.0 * self.s1)
        } else {
            let u = -x;
            2.0 * self.c * self.alpha * u.powf(-self.alpha - 1.0) - self.density(u)
        }
    }

    /// The two-sided combined tail functional
    /// x^alpha (1 - F(x)) + x^alpha F(-x), identically 2c on [s1, inf).
    pub fn combined_tail(&self, x: f64) -> f64 {
        let xa = x.powf(self.alpha);
        xa * self.sf(x) + xa * self.cdf(-x)
    }

    /// Inverse-cdf sampler. Requires a proper bridge.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        debug_assert!(self.proper_bridge, "sampling needs a nondecreasing cdf");
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        let sa = self.s1.powf(-self.alpha);
        let f_neg = self.tail_low * sa;
        let f_pos = 1.0 - self.tail_high * sa;
        if u < f_neg {
            // Negative tail: g(w) = F(-w) is continuous and strictly
            // decreasing in w (density positive there), so bisect.
            let mut hi = self.s1;
            while self.cdf(-hi) > u && hi < 1e290 {
                hi *= 64.0;
            }
            let w = bisect(|w| self.cdf(-w) - u, self.s1, hi, 1e-13 * hi, 250)
                .expect("negative tail inverse bracket");
            -w
        } else if u <= f_pos {
            let t = (u - f_neg) / (f_pos - f_neg);
            -self.s1 + 2.0 * self.s1 * t
        } else {
            // Wave starts have cdf 1 - high * s_m^{-a}, increasing in m; find
            // the last start at or below u. Flats carry no mass, so u falls
            // inside the found wave (clamp guards the boundary).
            let height = |s: f64| 1.0 - self.tail_high * s.powf(-self.alpha);
            let mut lo = 0usize;
            let mut hi = self.s_seq.len();
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if height(self.s_seq[mid]) <= u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s_m = self.s_seq[lo];
            let i_m = self.i_seq[lo];
            let denom = 1.0 + (self.k - self.tail_high) * s_m.powf(-self.alpha) - u;
            if denom <= 0.0 {
                return i_m;
            }
            (self.k / denom).powf(1.0 / self.alpha).clamp(s_m, i_m)
        }
    }

    /// Characteristic function, assembled from oscillatory power-tail
    /// integrals over the waves plus the bridge and the negative side.
    pub fn cf(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let s = xi.abs();
        let p = self.alpha + 1.0;
        // A = integral of e^{isu} over the positive-side density.
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 0..self.s_seq.len() {
            let s_m = self.s_seq[m];
            let i_m = self.i_seq[m];
            if self.k * s_m.powf(-self.alpha) < 1e-15 && m > 0 {
                break;
            }
            let (c_s, s_s) = trig_tail_integrals(p, s * s_m);
            let (c_i, s_i) = trig_tail_integrals(p, s * i_m);
            acc += Complex64::new(c_s - c_i, s_s - s_i);
        }
        let a_pos = self.k * self.alpha * s.powf(self.alpha) * acc;
        // B = integral of e^{-isu} u^{-a-1} over (s1, inf).
        let (cb, sb) = trig_tail_integrals(p, s * self.s1);
        let b_neg = s.powf(self.alpha) * Complex64::new(cb, -sb);
        let bridge_mass = 1.0 - 2.0 * self.c * self.s1.powf(-self.alpha);
        let z = s * self.s1;
        let sinc = if z < 1e-8 {
            1.0 - z * z / 6.0
        } else {
            z.sin() / z
        };
        let phi = Complex64::new(0.0, 2.0 * a_pos.im)
            + 2.0 * self.c * self.alpha * b_neg
            + Complex64::new(bridge_mass * sinc, 0.0);
        if xi < 0.0 {
            phi.conj()
        } else {
            phi
        }
    }
}

#[derive(Clone, Debug)]
pub enum InitialKind {
    PointMass {
        x0: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    Cauchy {
        location: f64,
        scale: f64,
    },
    /// Two-sided power tail: 1 - F(y) = c2 y^{-a} for y >= x_min,
    /// F(y) = c1 |y|^{-a} for y <= -x_min, x_min = (c1+c2)^{1/a}, flat
    /// between; optionally shifted.
    ParetoTail {
        exponent: f64,
        c1: f64,
        c2: f64,
        shift: f64,
    },
    AppendixB(AppendixBLaw),
    Symmetrized(Box<InitialLaw>),
}

/// An initial law: sampler, cdf, characteristic function, first two moments
/// (None when undefined/unknown, +inf when divergent), and closed-form tail
/// limits where available.
#[derive(Clone, Debug)]
pub struct InitialLaw {
    pub kind: InitialKind,
    pub m01: Option<f64>,
    pub m02: Option<f64>,
}

/// Tail limits of x^a(1-F(x)) (upper) and x^a F(-x) (lower); liminf/limsup
/// coincide exactly when the limits exist.
#[derive(Clone, Copy, Debug)]
pub struct TailLimits {
    pub upper_liminf: f64,
    pub upper_limsup: f64,
    pub lower_liminf: f64,
    pub lower_limsup: f64,
}

impl TailLimits {
    fn constant(v: f64) -> Self {
        Self {
            upper_liminf: v,
            upper_limsup: v,
            lower_liminf: v,
            lower_limsup: v,
        }
    }
    fn exact(&self) -> bool {
        self.upper_liminf == self.upper_limsup && self.lower_liminf == self.lower_limsup
    }
    fn all_finite(&self) -> bool {
        self.upper_liminf.is_finite()
            && self.upper_limsup.is_finite()
            && self.lower_liminf.is_finite()
            && self.lower_limsup.is_finite()
    }
}

#[derive(Clone, Debug)]
pub struct TailFunctional {
    pub x: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper_liminf: f64,
    pub upper_limsup: f64,
    pub lower_liminf: f64,
    pub lower_limsup: f64,
    pub upper_spread: f64,
    pub lower_spread: f64,
    /// True when grid points were dropped to avoid x^alpha overflow.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Member,
    NotMember,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassificationBasis {
    ClosedForm,
    Numeric,
}

#[derive(Clone, Copy, Debug)]
pub struct SdaClassification {
    pub membership: Membership,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub basis: ClassificationBasis,
}

impl fmt::Display for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            InitialKind::PointMass { x0 } => write!(f, "pointmass:{x0}"),
            InitialKind::Gaussian { mean, var } => write!(f, "gaussian:{mean},{var}"),
            InitialKind::Cauchy { location, scale } => write!(f, "cauchy:{location},{scale}"),
            InitialKind::ParetoTail {
                exponent,
                c1,
                c2,
                shift,
            } => {
                if *shift == 0.0 {
                    write!(f, "pareto:{exponent},{c1},{c2}")
                } else {
                    write!(f, "pareto:{exponent},{c1},{c2},{shift}")
                }
            }
            InitialKind::AppendixB(b) => write!(
                f,
                "appendixb:{},{},{},{},{}",
                b.tail_low, b.tail_high, b.k, b.s1, b.alpha
            ),
            InitialKind::Symmetrized(inner) => write!(f, "symmetrized:{inner}"),
        }
    }
}

fn nonzero_uniform<R: Rng>(rng: &mut R) -> f64 {
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    u
}

impl InitialLaw {
    pub fn point_mass(x0: f64) -> Result<Self, InitialError> {
        if !x0.is_finite() {
            return Err(InitialError::InvalidParameter(format!(
                "point mass location must be finite, got {x0}"
            )));
        }
        Ok(Self {
            kind: InitialKind::PointMass { x0 },
            m01: Some(x0),
            m02: Some(x0 * x0),
        })
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self, InitialError> {
        if !(var > 0.0) || !mean.is_finite() || !var.is_finite() {
            return Err(InitialError::InvalidParameter(format!(
                "gaussian needs finite mean and var > 0, got ({mean}, {var})"
            )));
        }
        Ok(Self {
            kind: InitialKind::Gaussian { mean, var },
            m01: Some(mean),
            m02: Some(var + mean * mean),
        })
    }

    pub fn cauchy(location: f64, scale: f64) -> Result<Self, InitialError> {
        if !(scale > 0.0) || !location.is_finite() || !scale.is_finite() {
            return Err(InitialError::InvalidParameter(format!(
                "cauchy needs finite location and scale > 0, got ({location}, {scale})"
            )));
        }
        Ok(Self {
            kind: InitialKind::Cauchy { location, scale },
            m01: None,
            m02: Some(f64::INFINITY),
        })
    }

    pub fn pareto_tail(exponent: f64, c1: f64, c2: f64, shift: f64) -> Result<Self, InitialError> {
        if !(exponent > 0.0) || !(c1 >= 0.0) || !(c2 >= 0.0) || c1 + c2 <= 0.0 || !shift.is_finite()
        {
            return Err(InitialError::InvalidParameter(format!(
                "pareto needs exponent > 0, c1,c2 >= 0 with c1+c2 > 0, got ({exponent}, {c1}, {c2}, {shift})"
            )));
        }
        let a = exponent;
        let x_min = (c1 + c2).powf(1.0 / a);
        let mean_y = if a > 1.0 {
            Some(a * (c2 - c1) / (a - 1.0) * x_min.powf(1.0 - a))
        } else {
            None
        };
        let m01 = mean_y.map(|m| m + shift);
        let m02 = if a > 2.0 {
            let ey2 = a * (c1 + c2) / (a - 2.0) * x_min.powf(2.0 - a);
            Some(ey2 + 2.0 * shift * mean_y.unwrap() + shift * shift)
        } else {
            Some(f64::INFINITY)
        };
        Ok(Self {
            kind: InitialKind::ParetoTail {
                exponent,
                c1,
                c2,
                shift,
            },
            m01,
            m02,
        })
    }

    /// Wrap the oscillating-tail law; requires a nondecreasing cdf.
    pub fn appendix_b(law: AppendixBLaw) -> Result<Self, InitialError> {
        if !law.proper_bridge {
            return Err(InitialError::ImproperBridge {
                got: law.s1.powf(law.alpha),
                needed: law.tail_low + law.tail_high,
            });
        }
        let m02 = if law.alpha <= 2.0 {
            Some(f64::INFINITY)
        } else {
            None
        };
        Ok(Self {
            kind: InitialKind::AppendixB(law),
            m01: None,
            m02,
        })
    }

    /// The symmetrized law with cdf {F(x) + 1 - F((-x)^-)}/2 and CF Re(phi).
    pub fn symmetrize(&self) -> InitialLaw {
        let m01 = match (self.m01, self.m02) {
            (Some(m), _) if m.is_finite() => Some(0.0),
            (_, Some(v)) if v.is_finite() => Some(0.0),
            _ => None,
        };
        InitialLaw {
            kind: InitialKind::Symmetrized(Box::new(self.clone())),
            m01,
            m02: self.m02,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            InitialKind::PointMass { x0 } => *x0,
            InitialKind::Gaussian { mean, var } => {
                let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
                mean + var.sqrt() * z
            }
            InitialKind::Cauchy { location, scale } => {
                let u = nonzero_uniform(rng);
                location + scale * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            InitialKind::ParetoTail {
                exponent,
                c1,
                c2,
                shift,
            } => {
                let u = nonzero_uniform(rng);
                let split = c1 / (c1 + c2);
                let y = if u < split {
                    -(c1 / u).powf(1.0 / exponent)
                } else {
                    (c2 / (1.0 - u)).powf(1.0 / exponent)
                };
                y + shift
            }
            InitialKind::AppendixB(b) => b.sample(rng),
            InitialKind::Symmetrized(inner) => {
                let x = inner.sample(rng);
                if rng.random::<bool>() {
                    x
                } else {
                    -x
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            InitialKind::PointMass { x0 } => {
                if x >= *x0 {
                    1.0
                } else {
                    0.0
                }
            }
            InitialKind::Gaussian { mean, var } => {
                let z = (x - mean) / (2.0 * var).sqrt();
                if z < 0.0 {
                    0.5 * erfc(-z)
                } else {
                    0.5 * (1.0 + erf(z))
                }
            }
            InitialKind::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    (-1.0 / z).atan() / std::f64::consts::PI
                } else {
                    0.5 + z.atan() / std::f64::consts::PI
                }
            }
            InitialKind::ParetoTail {
                exponent,
                c1,
                c2,
                shift,
            } => {
                let y = x - shift;
                let x_min = (c1 + c2).powf(1.0 / exponent);
                if y >= x_min {
                    1.0 - c2 * y.powf(-exponent)
                } else if y <= -x_min {
                    c1 * (-y).powf(-exponent)
                } else {
                    c1 / (c1 + c2)
                }
            }
            InitialKind::AppendixB(b) => b.cdf(x),
            InitialKind::Symmetrized(inner) => 0.5 * (inner.cdf(x) + inner.sf_left(-x)),
        }
    }

    /// Survival function 1 - F(x), with cancellation-free upper tails.
    pub fn sf(&self, x: f64) -> f64 {
        match &self.kind {
            InitialKind::PointMass { x0 } => {
                if x >= *x0 {
                    0.0
                } else {
                    1.0
                }
            }
            InitialKind::Gaussian { mean, var } => {
                let z = (x - mean) / (2.0 * var).sqrt();
                if z > 0.0 {
                    0.5 * erfc(z)
                } else {
                    0.5 * (1.0 + erf(-z))
                }
            }
            InitialKind::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                if z > 0.0 {
                    (1.0 / z).atan() / std::f64::consts::PI
                } else {
                    0.5 + (-z).atan() / std::f64::consts::PI
                }
            }
            InitialKind::ParetoTail {
                exponent,
                c1,
                c2,
                shift,
            } => {
                let y = x - shift;
                let x_min = (c1 + c2).powf(1.0 / exponent);
                if y >= x_min {
                    c2 * y.powf(-exponent)
                } else if y <= -x_min {
                    1.0 - c1 * (-y).powf(-exponent)
                } else {
                    c2 / (c1 + c2)
                }
            }
            InitialKind::AppendixB(b) => b.sf(x),
            InitialKind::Symmetrized(inner) => 0.5 * (inner.sf(x) + inner.cdf_left(-x)),
        }
    }

    /// Left limit F(x^-); differs from cdf only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.kind {
            InitialKind::PointMass { x0 } => {
                if x > *x0 {
                    1.0
                } else {
                    0.0
                }
            }
            InitialKind::Symmetrized(inner) => 0.5 * (inner.cdf_left(x) + inner.sf(-x)),
            _ => self.cdf(x),
        }
    }

    /// Left limit of the survival function, 1 - F(x^-).
    fn sf_left(&self, x: f64) -> f64 {
        match &self.kind {
            InitialKind::PointMass { x0 } => {
                if x > *x0 {
                    0.0
                } else {
                    1.0
                }
            }
            InitialKind::Symmetrized(inner) => 0.5 * (inner.sf_left(x) + inner.cdf(-x)),
            _ => self.sf(x),
        }
    }

    pub fn cf(&self, xi: f64) -> Complex64 {
        match &self.kind {
            InitialKind::PointMass { x0 } => Complex64::from_polar(1.0, x0 * xi),
            InitialKind::Gaussian { mean, var } => {
                Complex64::from_polar((-0.5 * var * xi * xi).exp(), mean * xi)
            }
            InitialKind::Cauchy { location, scale } => {
                Complex64::from_polar((-scale * xi.abs()).exp(), location * xi)
            }
            InitialKind::ParetoTail {
                exponent,
                c1,
                c2,
                shift,
            } => {
                if xi == 0.0 {
                    return Complex64::new(1.0, 0.0);
                }
                let s = xi.abs();
                let x_min = (c1 + c2).powf(1.0 / exponent);
                let (cc, ss) = trig_tail_integrals(exponent + 1.0, s * x_min);
                let fac = exponent * s.powf(*exponent);
                let phi = Complex64::new(fac * (c1 + c2) * cc, fac * (c2 - c1) * ss);
                let phi = if xi < 0.0 { phi.conj() } else { phi };
                phi * Complex64::from_polar(1.0, shift * xi)
            }
            InitialKind::AppendixB(b) => b.cf(xi),
            InitialKind::Symmetrized(inner) => Complex64::new(inner.cf(xi).re, 0.0),
        }
    }

    /// Closed-form tail limits at exponent `alpha`, when derivable.
    pub fn closed_tail_limits(&self, alpha: f64) -> Option<TailLimits> {
        fn side(c: f64, law_exp: f64, alpha: f64) -> f64 {
            if c == 0.0 || alpha < law_exp {
                0.0
            } else if alpha == law_exp {
                c
            } else {
                f64::INFINITY
            }
        }
        match &self.kind {
            InitialKind::PointMass { .. } | InitialKind::Gaussian { .. } => {
                Some(TailLimits::constant(0.0))
            }
            InitialKind::Cauchy { scale, .. } => {
                let v = side(scale / std::f64::consts::PI, 1.0, alpha);
                Some(TailLimits::constant(v))
            }
            InitialKind::ParetoTail {
                exponent, c1, c2, ..
            } => Some(TailLimits {
                upper_liminf: side(*c2, *exponent, alpha),
                upper_limsup: side(*c2, *exponent, alpha),
                lower_liminf: side(*c1, *exponent, alpha),
                lower_limsup: side(*c1, *exponent, alpha),
            }),
            InitialKind::AppendixB(b) => {
                if alpha < b.alpha {
                    Some(TailLimits::constant(0.0))
                } else if alpha == b.alpha {
                    // Both sides oscillate between low and high forever.
                    Some(TailLimits {
                        upper_liminf: b.tail_low,
                        upper_limsup: b.tail_high,
                        lower_liminf: b.tail_low,
                        lower_limsup: b.tail_high,
                    })
                } else {
                    Some(TailLimits::constant(f64::INFINITY))
                }
            }
            InitialKind::Symmetrized(inner) => {
                // x^a(1-F*(x)) = x^a F*(-x) = (upper_in + lower_in)/2.
                if let InitialKind::AppendixB(b) = &inner.kind {
                    if alpha == b.alpha {
                        // Combined two-sided functional is exactly 2c.
                        return Some(TailLimits::constant(b.c));
                    }
                }
                let lim = inner.closed_tail_limits(alpha)?;
                if lim.exact() {
                    let m = 0.5 * (lim.upper_liminf + lim.lower_liminf);
                    Some(TailLimits::constant(m))
                } else {
                    None
                }
            }
        }
    }

    /// Closed-form (c1, c2) when both tail limits exist and are finite.
    pub fn tail_constants(&self, alpha: f64) -> Option<(f64, f64)> {
        let lim = self.closed_tail_limits(alpha)?;
        if lim.exact() && lim.all_finite() {
            Some((lim.lower_liminf, lim.upper_liminf))
        } else {
            None
        }
    }

    /// Evaluate the tail functionals on a grid; liminf/limsup estimated over
    /// the last three decades.
    pub fn tail_functional(&self, alpha: f64, grid: &[f64]) -> TailFunctional {
        let mut x = Vec::new();
        let mut truncated = false;
        for &g in grid {
            if g > 0.0 && g.powf(alpha).is_finite() {
                x.push(g);
            } else {
                truncated = true;
            }
        }
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let upper: Vec<f64> = x.iter().map(|&v| v.powf(alpha) * self.sf(v)).collect();
        let lower: Vec<f64> = x.iter().map(|&v| v.powf(alpha) * self.cdf(-v)).collect();
        let window_start = x.last().map(|&m| m / 1000.0).unwrap_or(0.0);
        let mut up_min = f64::INFINITY;
        let mut up_max = f64::NEG_INFINITY;
        let mut lo_min = f64::INFINITY;
        let mut lo_max = f64::NEG_INFINITY;
        for (i, &v) in x.iter().enumerate() {
            if v >= window_start {
                up_min = up_min.min(upper[i]);
                up_max = up_max.max(upper[i]);
                lo_min = lo_min.min(lower[i]);
                lo_max = lo_max.max(lower[i]);
            }
        }
        TailFunctional {
            x,
            upper,
            lower,
            upper_liminf: up_min,
            upper_limsup: up_max,
            lower_liminf: lo_min,
            lower_limsup: lo_max,
            upper_spread: up_max - up_min,
            lower_spread: lo_max - lo_min,
            truncated,
        }
    }

    /// Default tail grid: dyadic points over ten decades.
    pub fn default_tail_grid() -> Vec<f64> {
        (0..=33).map(|j| (2.0f64).powi(j)).collect()
    }

    /// Stable-attraction classification at exponent alpha in (0, 2]:
    /// alpha = 2 reduces to finiteness of the second moment; alpha < 2 asks
    /// for existing finite tail limits (closed form preferred, numeric
    /// fallback with an undetermined verdict when the window has not
    /// stabilized within tol).
    pub fn classify_sda(&self, alpha: f64, tol: f64) -> SdaClassification {
        if alpha == 2.0 {
            return match self.m02 {
                Some(v) if v.is_finite() => SdaClassification {
                    membership: Membership::Member,
                    c1: None,
                    c2: None,
                    basis: ClassificationBasis::ClosedForm,
                },
                Some(_) => SdaClassification {
                    membership: Membership::NotMember,
                    c1: None,
                    c2: None,
                    basis: ClassificationBasis::ClosedForm,
                },
                None => SdaClassification {
                    membership: Membership::Undetermined,
                    c1: None,
                    c2: None,
                    basis: ClassificationBasis::Numeric,
                },
            };
        }
        if let Some(lim) = self.closed_tail_limits(alpha) {
            if lim.exact() && lim.all_finite() {
                return SdaClassification {
                    membership: Membership::Member,
                    c1: Some(lim.lower_liminf),
                    c2: Some(lim.upper_liminf),
                    basis: ClassificationBasis::ClosedForm,
                };
            }
            return SdaClassification {
                membership: Membership::NotMember,
                c1: None,
                c2: None,
                basis: ClassificationBasis::ClosedForm,
            };
        }
        let tf = self.tail_functional(alpha, &Self::default_tail_grid());
        if tf.upper_spread <= tol && tf.lower_spread <= tol {
            SdaClassification {
                membership: Membership::Member,
                c1: Some(0.5 * (tf.lower_liminf + tf.lower_limsup)),
                c2: Some(0.5 * (tf.upper_liminf + tf.upper_limsup)),
                basis: ClassificationBasis::Numeric,
            }
        } else {
            SdaClassification {
                membership: Membership::Undetermined,
                c1: None,
                c2: None,
                basis: ClassificationBasis::Numeric,
            }
        }
    }

    /// Parse an initial-law spec:
    /// `gaussian:m,v | pointmass:x | cauchy:l,s | pareto:a,c1,c2[,shift] |
    ///  appendixb:low,high,k,s1,alpha | symmetrized:<inner>`.
    pub fn parse_spec(spec: &str) -> Result<Self, InitialError> {
        let s = spec.trim();
        let lower = s.to_ascii_lowercase();
        let (head, args) = match lower.split_once(':') {
            Some(t) => t,
            None => return Err(InitialError::SpecParse(spec.to_string())),
        };
        let nums =
            |args: &str, want: std::ops::RangeInclusive<usize>| -> Result<Vec<f64>, InitialError> {
                let vals: Result<Vec<f64>, _> =
                    args.split(',').map(|v| v.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|_| InitialError::SpecParse(spec.to_string()))?;
                if want.contains(&vals.len()) {
                    Ok(vals)
                } else {
                    Err(InitialError::SpecParse(spec.to_string()))
                }
            };
        match head {
            "gaussian" | "normal" => {
                let v = nums(args, 2..=2)?;
                Self::gaussian(v[0], v[1])
            }
            "pointmass" | "delta" => {
                let v = nums(args, 1..=1)?;
                Self::point_mass(v[0])
            }
            "cauchy" => {
                let v = nums(args, 2..=2)?;
                Self::cauchy(v[0], v[1])
            }
            "pareto" => {
                let v = nums(args, 3..=4)?;
                Self::pareto_tail(v[0], v[1], v[2], v.get(3).copied().unwrap_or(0.0))
            }
            "appendixb" => {
                let v = nums(args, 5..=5)?;
                let law = build_appendix_b(v[0], v[1], v[2], v[3], v[4], 32)?;
                Self::appendix_b(law)
            }
            "symmetrized" => Ok(Self::parse_spec(args)?.symmetrize()),
            _ => Err(InitialError::SpecParse(spec.to_string())),
        }
    }
}
