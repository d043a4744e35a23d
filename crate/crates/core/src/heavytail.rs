//! Heavy-tailed step laws with exact power tails.
//!
//! A [`StepLaw`] is a one-sided or symmetric Pareto law with tail index
//! `alpha` and tail onset `x_min`, optionally modulated by a slowly varying
//! factor `(1 + ln(x / x_min))^p`. The modulated laws are only used for tail
//! evaluation and Potter checks; sampling requires the pure power family,
//! see [`StepLaw::sampler`].

use std::fmt;
use std::str::FromStr;

use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    OneSided,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowFactor {
    None,
    /// Multiplies the tail by `(1 + ln(x / x_min))^p`.
    LogPower(f64),
}

/// Which tail a quantity refers to: `P(X > x)` or `P(|X| > x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailMode {
    Pos,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLaw {
    alpha: f64,
    shape: Shape,
    x_min: f64,
    slow: SlowFactor,
}

impl StepLaw {
    pub fn new(alpha: f64, shape: Shape, x_min: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(x_min > 0.0 && x_min.is_finite()) {
            return Err(Error::invalid(format!(
                "x_min must be positive, got {x_min}"
            )));
        }
        Ok(StepLaw {
            alpha,
            shape,
            x_min,
            slow: SlowFactor::None,
        })
    }

    pub fn one_sided(alpha: f64) -> Result<Self> {
        Self::new(alpha, Shape::OneSided, 1.0)
    }

    pub fn symmetric(alpha: f64) -> Result<Self> {
        Self::new(alpha, Shape::Symmetric, 1.0)
    }

    /// Attach a slowly varying modulation. `p <= alpha` keeps the tail
    /// monotone on `[x_min, inf)`.
    pub fn with_slow_factor(mut self, slow: SlowFactor) -> Result<Self> {
        if let SlowFactor::LogPower(p) = slow {
            if !p.is_finite() || p > self.alpha {
                return Err(Error::invalid(format!(
                    "log-power exponent must be finite and <= alpha, got {p}"
                )));
            }
        }
        self.slow = slow;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn slow_factor(&self) -> SlowFactor {
        self.slow
    }

    /// Symmetric laws with a finite mean are centered; everything else goes
    /// to the "otherwise" branch of the scale exponent and `D_crit`.
    pub fn is_centered(&self) -> bool {
        self.shape == Shape::Symmetric && self.alpha > 1.0
    }

    fn slow_value(&self, x: f64) -> f64 {
        match self.slow {
            SlowFactor::None => 1.0,
            SlowFactor::LogPower(p) => (1.0 + (x / self.x_min).ln()).powf(p),
        }
    }

    /// `P(|X| > x)` restricted to `x >= x_min`.
    fn magnitude_tail(&self, x: f64) -> f64 {
        ((x / self.x_min).powf(-self.alpha) * self.slow_value(x)).clamp(0.0, 1.0)
    }

    /// `P(X > x)`.
    pub fn tail_pos(&self, x: f64) -> f64 {
        match self.shape {
            Shape::OneSided => {
                if x < self.x_min {
                    1.0
                } else {
                    self.magnitude_tail(x)
                }
            }
            Shape::Symmetric => {
                if x >= self.x_min {
                    0.5 * self.magnitude_tail(x)
                } else if x >= -self.x_min {
                    0.5
                } else {
                    1.0 - 0.5 * self.magnitude_tail(-x)
                }
            }
        }
    }

    /// `P(|X| > x)`.
    pub fn tail_abs(&self, x: f64) -> f64 {
        if x < self.x_min {
            1.0
        } else {
            self.magnitude_tail(x)
        }
    }

    pub fn tail(&self, x: f64, mode: TailMode) -> f64 {
        match mode {
            TailMode::Pos => self.tail_pos(x),
            TailMode::Abs => self.tail_abs(x),
        }
    }

    /// Exact `a` with `tail(a) = 1/n`, taken on the upper power branch
    /// `[x_min, inf)`.
    pub fn quantile_an(&self, n: u64, mode: TailMode) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("quantile_an needs n >= 1"));
        }
        let target = 1.0 / n as f64;
        // tail(a) = weight * magnitude_tail(a)
        let weight = match (self.shape, mode) {
            (Shape::Symmetric, TailMode::Pos) => 0.5,
            _ => 1.0,
        };
        if target > weight {
            return Err(Error::invalid(format!(
                "1/n = {target} exceeds the largest upper-tail value {weight}"
            )));
        }
        let level = target / weight;
        match self.slow {
            SlowFactor::None => Ok(self.x_min * level.powf(-1.0 / self.alpha)),
            SlowFactor::LogPower(_) => Ok(self.invert_magnitude_tail(level)),
        }
    }

    /// Bisection in log space for a non-increasing modulated tail.
    fn invert_magnitude_tail(&self, level: f64) -> f64 {
        if level >= 1.0 {
            return self.x_min;
        }
        let mut lo = self.x_min;
        let mut hi = self.x_min * 2.0;
        while self.magnitude_tail(hi) > level {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.magnitude_tail(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn scale(&self, epsilon: f64) -> Result<ScaleSpec> {
        ScaleSpec::for_law(self, epsilon)
    }

    /// `b_n = n^(eta + epsilon)`.
    pub fn natural_scale(&self, epsilon: f64, n: u64) -> f64 {
        (n as f64).powf(scale_exponent(self) + epsilon)
    }

    /// `max(1, alpha/2)` for centered laws, `max(1, alpha)` otherwise.
    pub fn d_crit(&self) -> f64 {
        if self.is_centered() {
            (self.alpha / 2.0).max(1.0)
        } else {
            self.alpha.max(1.0)
        }
    }

    /// Inverse-CDF sampler; fails for slowly modulated laws.
    pub fn sampler(&self) -> Result<ParetoSampler> {
        if self.slow != SlowFactor::None {
            return Err(Error::invalid("slowly modulated step laws are not sampled"));
        }
        Ok(ParetoSampler {
            neg_inv_alpha: -1.0 / self.alpha,
            x_min: self.x_min,
            symmetric: self.shape == Shape::Symmetric,
        })
    }
}

fn scale_exponent(law: &StepLaw) -> f64 {
    if law.is_centered() {
        1.0 / law.alpha.min(2.0)
    } else {
        1.0 / law.alpha.min(1.0)
    }
}

impl fmt::Display for StepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            Shape::OneSided => "one_sided",
            Shape::Symmetric => "symmetric",
        };
        write!(
            f,
            "kind=pareto;shape={shape};alpha={};xmin={}",
            self.alpha, self.x_min
        )?;
        if let SlowFactor::LogPower(p) = self.slow {
            write!(f, ";slow=logpow:{p}")?;
        }
        Ok(())
    }
}

/// Grammar: `;`-separated `key=value` pairs. Keys: `kind` (only `pareto`),
/// `shape` (`one_sided` | `symmetric`), `alpha`, optional `xmin`
/// (default 1) and optional `slow=logpow:<p>`.
impl FromStr for StepLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut kind = None;
        let mut shape = None;
        let mut alpha = None;
        let mut x_min = 1.0;
        let mut slow = SlowFactor::None;
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::parse("step law", format!("expected key=value, got `{part}`"))
            })?;
            let value = value.trim();
            match key.trim() {
                "kind" => kind = Some(value.to_string()),
                "shape" => {
                    shape = Some(match value {
                        "one_sided" | "onesided" | "one-sided" => Shape::OneSided,
                        "symmetric" => Shape::Symmetric,
                        other => {
                            return Err(Error::parse(
                                "step law",
                                format!("unknown shape `{other}`"),
                            ))
                        }
                    })
                }
                "alpha" => alpha = Some(parse_f64("step law", value)?),
                "xmin" | "x_min" => x_min = parse_f64("step law", value)?,
                "slow" => {
                    let p = value.strip_prefix("logpow:").ok_or_else(|| {
                        Error::parse("step law", format!("unknown slow factor `{value}`"))
                    })?;
                    slow = SlowFactor::LogPower(parse_f64("step law", p)?);
                }
                other => return Err(Error::parse("step law", format!("unknown key `{other}`"))),
            }
        }
        match kind.as_deref() {
            Some("pareto") => {}
            Some(other) => return Err(Error::parse("step law", format!("unknown kind `{other}`"))),
            None => return Err(Error::parse("step law", "missing `kind`")),
        }
        let shape = shape.ok_or_else(|| Error::parse("step law", "missing `shape`"))?;
        let alpha = alpha.ok_or_else(|| Error::parse("step law", "missing `alpha`"))?;
        StepLaw::new(alpha, shape, x_min)?.with_slow_factor(slow)
    }
}

pub(crate) fn parse_f64(what: &'static str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(what, format!("`{s}`: {e}")))
}

/// Natural scale sequence `b_n = n^(eta + epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSpec {
    pub eta: f64,
    pub epsilon: f64,
}

impl ScaleSpec {
    pub fn for_law(law: &StepLaw, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(ScaleSpec {
            eta: scale_exponent(law),
            epsilon,
        })
    }

    pub fn b(&self, n: u64) -> f64 {
        (n as f64).powf(self.eta + self.epsilon)
    }
}

/// Exact inverse-survival sampler for the pure Pareto families.
#[derive(Debug, Clone, Copy)]
pub struct ParetoSampler {
    neg_inv_alpha: f64,
    x_min: f64,
    symmetric: bool,
}

impl ParetoSampler {
    /// Maps a survival level `u` in `(0, 1]` to the `x` with `P(X > x) = u`.
    pub fn inverse_survival(&self, u: f64) -> f64 {
        if self.symmetric {
            if u <= 0.5 {
                self.x_min * (2.0 * u).powf(self.neg_inv_alpha)
            } else {
                -self.x_min * (2.0 * (1.0 - u)).powf(self.neg_inv_alpha)
            }
        } else {
            self.x_min * u.powf(self.neg_inv_alpha)
        }
    }
}

/// Uniform in the open interval (0, 1) with 53 random bits.
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

impl Distribution<f64> for ParetoSampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.inverse_survival(open_unit(rng))
    }
}

/// Outcome of [`potter_certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotterReport {
    pub holds: bool,
    /// Largest value of `(f(y)/f(x)) / (C max((y/x)^(l+d), (y/x)^(l-d)))`.
    pub worst_ratio: f64,
    pub worst_pair: (f64, f64),
}

/// Checks Potter's inequality
/// `f(y)/f(x) <= C max((y/x)^(lambda+delta), (y/x)^(lambda-delta))`
/// over all pairs of grid points `>= x0`.
pub fn potter_certify<F: Fn(f64) -> f64>(
    f: F,
    lambda: f64,
    c: f64,
    delta: f64,
    x0: f64,
    grid: &[f64],
) -> PotterReport {
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&x| x >= x0)
        .map(|&x| (x, f(x)))
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pair = (x0, x0);
    for &(x, fx) in &pts {
        for &(y, fy) in &pts {
            let r = y / x;
            let envelope = c * r.powf(lambda + delta).max(r.powf(lambda - delta));
            let ratio = (fy / fx) / envelope;
            if ratio > worst {
                worst = ratio;
                worst_pair = (x, y);
            }
        }
    }
    PotterReport {
        holds: worst <= 1.0 + 1e-12,
        worst_ratio: worst,
        worst_pair,
    }
}

/// `points` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && points >= 1);
    if points == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect()
}
