//! Critical offspring laws and their generating-function toolkit.
//!
//! Two built-in families are in the domain of attraction of a stable law:
//!
//! * `geometric_half`: `p_k = 2^-(k+1)`, variance 2, `alpha_T = 2`, `lambda = 1`;
//! * `zeta(alpha_T)`: `p_k = k^-(1+alpha_T) / zeta(alpha_T)` for `k >= 1`
//!   with `p_0` fixing the total mass. The mean is 1 by construction and the
//!   tail `k^-(1+alpha_T)` puts the law in the `alpha_T`-stable domain.
//!
//! A finite-support family is also available, mostly for tests.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::heavytail::{open_unit, parse_f64};
use crate::special::{power_tail_sum, zeta, Polylog};

/// Values `0..=TABLE` are sampled by table inversion; larger ones by an
/// exact rejection sampler on the power tail.
const TABLE: usize = 1 << 16;
/// `P(Z = k | Z >= k)` is tabulated for `k < HAZARD_TABLE`.
const HAZARD_TABLE: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    GeometricHalf,
    Zeta { alpha_t: f64 },
    Finite { pmf: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct OffspringLaw {
    family: Family,
    inner: Arc<Inner>,
}

#[derive(Debug)]
enum Inner {
    Geometric,
    Zeta(ZetaLaw),
    Finite(FiniteLaw),
}

#[derive(Debug)]
struct ZetaLaw {
    alpha: f64,
    nu: f64,
    /// 1 / zeta(alpha)
    norm: f64,
    p0: f64,
    polylog: Polylog,
    cdf: Vec<f64>,
    sb_cdf: Vec<f64>,
    hazard: Vec<f64>,
}

#[derive(Debug)]
struct FiniteLaw {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    tails: Vec<f64>,
    mean: f64,
    variance: f64,
    /// size-biased cdf, `k p_k / mean`
    sb_cdf: Vec<f64>,
}

impl OffspringLaw {
    pub fn geometric_half() -> Self {
        OffspringLaw {
            family: Family::GeometricHalf,
            inner: Arc::new(Inner::Geometric),
        }
    }

    /// The zeta family with stable index `alpha_t` in `(1, 2)`.
    pub fn zeta_stable(alpha_t: f64) -> Result<Self> {
        if !(alpha_t > 1.0 && alpha_t < 2.0) {
            return Err(Error::invalid(format!(
                "alpha_T must lie in (1, 2), got {alpha_t}"
            )));
        }
        let nu = 1.0 + alpha_t;
        let zeta_alpha = zeta(alpha_t);
        let zeta_nu = zeta(nu);
        let norm = 1.0 / zeta_alpha;
        let p0 = 1.0 - zeta_nu / zeta_alpha;

        // cdf[k] = P(Z <= k) = 1 - norm * sum_{j > k} j^-nu
        let mut cdf = Vec::with_capacity(TABLE + 1);
        for k in 0..=TABLE as u64 {
            cdf.push(1.0 - norm * power_tail_sum(nu, k + 1));
        }
        // size-biased law b p_b = norm * b^-alpha, b >= 1
        let mut sb_cdf = Vec::with_capacity(TABLE + 1);
        sb_cdf.push(0.0);
        for b in 1..=TABLE as u64 {
            sb_cdf.push(1.0 - norm * power_tail_sum(alpha_t, b + 1));
        }
        let mut hazard = Vec::with_capacity(HAZARD_TABLE);
        hazard.push(p0);
        for k in 1..HAZARD_TABLE as u64 {
            hazard.push((k as f64).powf(-nu) / power_tail_sum(nu, k));
        }
        let law = ZetaLaw {
            alpha: alpha_t,
            nu,
            norm,
            p0,
            polylog: Polylog::new(nu),
            cdf,
            sb_cdf,
            hazard,
        };
        Ok(OffspringLaw {
            family: Family::Zeta { alpha_t },
            inner: Arc::new(Inner::Zeta(law)),
        })
    }

    /// Finite-support law from an explicit pmf. Criticality is not required;
    /// see [`OffspringLaw::is_critical`].
    pub fn finite(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid(
                "pmf entries must be finite and non-negative",
            ));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("pmf sums to {total}, not 1")));
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        let mut tails = vec![0.0; pmf.len() + 1];
        for k in (0..pmf.len()).rev() {
            tails[k] = tails[k + 1] + pmf[k];
        }
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let second: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k) as f64 * p)
            .sum();
        let mut sb_cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for (k, p) in pmf.iter().enumerate() {
            if mean > 0.0 {
                acc += k as f64 * p / mean;
            }
            sb_cdf.push(acc);
        }
        let law = FiniteLaw {
            cdf,
            tails,
            mean,
            variance: second - mean * mean,
            sb_cdf,
            pmf: pmf.clone(),
        };
        Ok(OffspringLaw {
            family: Family::Finite { pmf },
            inner: Arc::new(Inner::Finite(law)),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match &*self.inner {
            Inner::Geometric => 0.5f64.powf(k as f64 + 1.0),
            Inner::Zeta(z) => {
                if k == 0 {
                    z.p0
                } else {
                    z.norm * (k as f64).powf(-z.nu)
                }
            }
            Inner::Finite(f) => f.pmf.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P(Z >= k)`.
    pub fn tail_from(&self, k: u64) -> f64 {
        match &*self.inner {
            Inner::Geometric => 0.5f64.powf(k as f64),
            Inner::Zeta(z) => {
                if k == 0 {
                    1.0
                } else {
                    z.norm * power_tail_sum(z.nu, k)
                }
            }
            Inner::Finite(f) => f.tails.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P(Z = k | Z >= k)`.
    pub fn hazard(&self, k: u64) -> f64 {
        match &*self.inner {
            Inner::Geometric => 0.5,
            Inner::Zeta(z) => match z.hazard.get(k as usize) {
                Some(&h) => h,
                None => (k as f64).powf(-z.nu) / power_tail_sum(z.nu, k),
            },
            Inner::Finite(f) => {
                let tail = self.tail_from(k);
                if tail > 0.0 {
                    (f.pmf.get(k as usize).copied().unwrap_or(0.0) / tail).min(1.0)
                } else {
                    1.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &*self.inner {
            Inner::Finite(f) => f.mean,
            _ => 1.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match &*self.inner {
            Inner::Geometric => 2.0,
            Inner::Zeta(_) => f64::INFINITY,
            Inner::Finite(f) => f.variance,
        }
    }

    pub fn is_critical(&self) -> bool {
        (self.mean() - 1.0).abs() < 1e-12
    }

    /// Stable index of the domain of attraction.
    pub fn alpha_t(&self) -> f64 {
        match &*self.inner {
            Inner::Zeta(z) => z.alpha,
            _ => 2.0,
        }
    }

    /// `D = alpha_T / (alpha_T - 1)`.
    pub fn dimension(&self) -> f64 {
        let a = self.alpha_t();
        a / (a - 1.0)
    }

    /// `lambda` with `kappa(t) ~ lambda t^alpha_T` as `t -> 0`, when known in
    /// closed form (`sigma^2 / 2` for finite variance).
    pub fn lambda(&self) -> Option<f64> {
        match &*self.inner {
            Inner::Geometric => Some(1.0),
            Inner::Zeta(_) => None,
            Inner::Finite(f) => (f.variance > 0.0).then_some(f.variance / 2.0),
        }
    }

    /// Numerical limit of `kappa(t) / t^alpha_T`: the ratio is sampled at
    /// `t = 1e-4, 1e-5, 1e-6` and the two leading corrections
    /// (`t^(2 - alpha_T)` and `t`) are eliminated.
    pub fn estimate_lambda(&self) -> f64 {
        let a = self.alpha_t();
        let ts = [1e-4, 1e-5, 1e-6];
        let r: Vec<f64> = ts.iter().map(|&t| self.kappa(t) / t.powf(a)).collect();
        let e = 2.0 - a;
        if e.abs() < 1e-9 || (e - 1.0).abs() < 1e-9 {
            // corrections degenerate to a single power of t
            let (t0, t1) = (ts[1], ts[2]);
            return (r[2] * t0 - r[1] * t1) / (t0 - t1);
        }
        // solve r_i = lambda + b t_i^e + c t_i
        let m = ts.map(|t| [1.0, t.powf(e), t]);
        solve3(m, [r[0], r[1], r[2]])[0]
    }

    /// `lambda` if known, otherwise the numerical estimate.
    pub fn lambda_or_estimate(&self) -> f64 {
        self.lambda().unwrap_or_else(|| self.estimate_lambda())
    }

    /// Generating function `g_Z(s)`.
    pub fn gen_z(&self, s: f64) -> f64 {
        match &*self.inner {
            Inner::Geometric => 1.0 / (2.0 - s),
            Inner::Zeta(z) => z.p0 + z.norm * z.polylog.eval(s),
            Inner::Finite(f) => f.pmf.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `g_Z(s) - 1` without cancellation near `s = 1`.
    pub fn gen_z_minus_one(&self, s: f64) -> f64 {
        match &*self.inner {
            Inner::Geometric => (s - 1.0) / (2.0 - s),
            // 1 - p0 = norm * zeta(nu)
            Inner::Zeta(z) => z.norm * z.polylog.eval_minus_zeta(s),
            Inner::Finite(f) => {
                // sum_k p_k (s^k - 1) = (s - 1) sum_k P(Z > k) s^k
                let poly = f.tails[1..].iter().rev().fold(0.0, |acc, p| acc * s + p);
                (s - 1.0) * poly
            }
        }
    }

    /// `g_Z(e^mu) - 1` for `mu <= 0`, exact in `mu` near 0.
    fn gen_z_minus_one_log(&self, mu: f64) -> f64 {
        let sm1 = mu.exp_m1();
        match &*self.inner {
            Inner::Geometric => sm1 / (1.0 - sm1),
            Inner::Zeta(z) => z.norm * z.polylog.eval_minus_zeta_log(mu),
            Inner::Finite(f) => {
                let s = mu.exp();
                sm1 * f.tails[1..].iter().rev().fold(0.0, |acc, p| acc * s + p)
            }
        }
    }

    /// `kappa_{Z-1}(t) = log E[exp(-t (Z - 1))] = t + log g_Z(e^-t)`.
    pub fn kappa(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        t + self.gen_z_minus_one_log(-t).ln_1p()
    }

    /// Inverse of `kappa` on `[0, inf)` by bracketing and bisection.
    pub fn kappa_inv(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::invalid(format!("kappa_inv needs u >= 0, got {u}")));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let tol = 1e-12 * u.max(1.0);
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut expansions = 0;
        while self.kappa(hi) < u {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 1100 || !hi.is_finite() {
                return Err(Error::invalid(format!("kappa does not reach {u}")));
            }
        }
        loop {
            let mid = 0.5 * (lo + hi);
            let k = self.kappa(mid);
            if (k - u).abs() < tol || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if k < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// `P(H < i)` through `q_0 = 0`, `q_i = g_Z(q_{i-1})`.
    pub fn height_cdf(&self, i: usize) -> f64 {
        let mut q = 0.0;
        for _ in 0..i {
            q = self.gen_z(q);
        }
        q
    }

    /// `[q_0, ..., q_k]`.
    pub fn height_cdf_table(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(k + 1);
        let mut q = 0.0;
        out.push(q);
        for _ in 0..k {
            q = self.gen_z(q);
            out.push(q);
        }
        out
    }

    /// Generating function of `B - A` where `P(A = a, B = b) = p_b 1{1 <= a <= b}`:
    /// `(1 - g_Z(s)) / (1 - s)`.
    pub fn gen_ba(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return self.mean();
        }
        -self.gen_z_minus_one(s) / (1.0 - s)
    }

    /// Draws from the size-biased law `b p_b / E[Z]`.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &*self.inner {
            Inner::Geometric => 1 + geometric_half(rng) + geometric_half(rng),
            Inner::Zeta(z) => {
                let u = open_unit(rng);
                if u <= z.sb_cdf[TABLE] {
                    z.sb_cdf.partition_point(|&c| c < u) as u64
                } else {
                    power_tail_sample(z.alpha, TABLE as u64 + 1, rng)
                }
            }
            Inner::Finite(f) => {
                let u = open_unit(rng);
                f.sb_cdf.partition_point(|&c| c < u).min(f.pmf.len() - 1) as u64
            }
        }
    }

    /// Draws from the law of `Z` conditioned on `Z >= k`.
    pub fn sample_at_least<R: Rng + ?Sized>(&self, k: u64, rng: &mut R) -> u64 {
        if k == 0 {
            return self.sample(rng);
        }
        match &*self.inner {
            Inner::Geometric => k + geometric_half(rng),
            Inner::Zeta(z) => {
                if k as usize > TABLE {
                    return power_tail_sample(z.nu, k, rng);
                }
                let base = z.cdf[k as usize - 1];
                let u = base + (1.0 - base) * open_unit(rng);
                if u <= z.cdf[TABLE] {
                    (z.cdf.partition_point(|&c| c < u) as u64).max(k)
                } else {
                    power_tail_sample(z.nu, TABLE as u64 + 1, rng)
                }
            }
            Inner::Finite(f) => {
                let base = f.cdf[(k as usize - 1).min(f.cdf.len() - 1)];
                let u = base + (1.0 - base) * open_unit(rng);
                (f.cdf.partition_point(|&c| c < u) as u64).clamp(k, f.pmf.len() as u64 - 1)
            }
        }
    }

    /// Attempt budget for size-conditioned rejection: `1e5 * ceil(n^(1/alpha_T))`.
    pub fn default_attempt_budget(&self, n: u64) -> u64 {
        let a_n = (n as f64).powf(1.0 / self.alpha_t()).ceil() as u64;
        100_000u64.saturating_mul(a_n.max(1))
    }
}

impl Distribution<u64> for OffspringLaw {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &*self.inner {
            Inner::Geometric => geometric_half(rng),
            Inner::Zeta(z) => {
                let u = open_unit(rng);
                if u <= z.cdf[0] {
                    0
                } else if u <= z.cdf[1] {
                    1
                } else if u <= z.cdf[TABLE] {
                    z.cdf.partition_point(|&c| c < u) as u64
                } else {
                    power_tail_sample(z.nu, TABLE as u64 + 1, rng)
                }
            }
            Inner::Finite(f) => {
                let u = open_unit(rng);
                f.cdf.partition_point(|&c| c < u).min(f.pmf.len() - 1) as u64
            }
        }
    }
}

/// `P(G = k) = 2^-(k+1)` from the trailing zeros of random words.
#[inline]
pub(crate) fn geometric_half<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    let mut k = 0;
    loop {
        let x = rng.next_u64();
        if x != 0 {
            return k + x.trailing_zeros() as u64;
        }
        k += 64;
    }
}

/// Draws `k >= first` with `P(k)` proportional to `k^-e`, `e > 1`.
///
/// Proposal: `floor(Y)` with `Y` continuous Pareto of index `e - 1` on
/// `[first, inf)`. The target/proposal ratio `1 / (k (1 - (1 + 1/k)^(1-e)))`
/// is decreasing in `k`, so its value at `first` bounds it.
pub(crate) fn power_tail_sample<R: Rng + ?Sized>(e: f64, first: u64, rng: &mut R) -> u64 {
    let a = e - 1.0;
    let ratio = |k: f64| 1.0 / (k * -(-a * (1.0 / k).ln_1p()).exp_m1());
    let f = first as f64;
    let bound = ratio(f);
    loop {
        let y = f * open_unit(rng).powf(-1.0 / a);
        if y >= 1.8e19 {
            return u64::MAX;
        }
        let k = y.floor().max(f);
        if open_unit(rng) * bound <= ratio(k) {
            return k as u64;
        }
    }
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        *o = det(mc) / d;
    }
    out
}

impl fmt::Display for OffspringLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::GeometricHalf => write!(f, "family=geometric_half"),
            Family::Zeta { alpha_t } => write!(f, "family=zeta;alphaT={alpha_t}"),
            Family::Finite { pmf } => {
                let parts: Vec<String> = pmf.iter().map(|p| p.to_string()).collect();
                write!(f, "family=finite;pmf={}", parts.join(","))
            }
        }
    }
}

/// `family=geometric_half`, `family=zeta;alphaT=<a>` or
/// `family=finite;pmf=<p0>,<p1>,...`.
impl FromStr for OffspringLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut family = None;
        let mut alpha_t = None;
        let mut pmf = None;
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::parse("offspring law", format!("expected key=value, got `{part}`"))
            })?;
            let value = value.trim();
            match key.trim() {
                "family" => family = Some(value.to_string()),
                "alphaT" | "alpha_t" => alpha_t = Some(parse_f64("offspring law", value)?),
                "pmf" => {
                    let ps = value
                        .split(',')
                        .map(|p| parse_f64("offspring law", p))
                        .collect::<Result<Vec<_>>>()?;
                    pmf = Some(ps);
                }
                other => {
                    return Err(Error::parse(
                        "offspring law",
                        format!("unknown key `{other}`"),
                    ))
                }
            }
        }
        match family.as_deref() {
            Some("geometric_half") => {
                if alpha_t.is_some() || pmf.is_some() {
                    return Err(Error::parse(
                        "offspring law",
                        "geometric_half takes no parameters",
                    ));
                }
                Ok(OffspringLaw::geometric_half())
            }
            Some("zeta") => {
                let a =
                    alpha_t.ok_or_else(|| Error::parse("offspring law", "zeta needs alphaT"))?;
                OffspringLaw::zeta_stable(a)
            }
            Some("finite") => {
                let p = pmf.ok_or_else(|| Error::parse("offspring law", "finite needs pmf"))?;
                OffspringLaw::finite(p)
            }
            Some(other) => Err(Error::parse(
                "offspring law",
                format!("unknown family `{other}`"),
            )),
            None => Err(Error::parse("offspring law", "missing `family`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geo() -> OffspringLaw {
        OffspringLaw::geometric_half()
    }

    #[test]
    fn generating_function_values() {
        let g = geo();
        assert_eq!(g.gen_z(0.0), 0.5);
        assert_eq!(g.gen_z(1.0), 1.0);
        assert!((g.gen_z(0.5) - 1.0 / 1.5).abs() < 1e-15);
        let z = OffspringLaw::zeta_stable(1.5).unwrap();
        assert!((z.gen_z(1.0) - 1.0).abs() < 1e-13);
        assert!((z.gen_z(0.0) - z.pmf(0)).abs() < 1e-15);
    }

    #[test]
    fn zeta_pmf_values() {
        let z = OffspringLaw::zeta_stable(1.5).unwrap();
        // zeta(1.5) = 2.612375348685488, zeta(2.5) = 1.341487257250917
        assert!((z.pmf(0) - (1.0 - 1.341_487_257_250_917 / 2.612_375_348_685_488)).abs() < 1e-12);
        assert!((z.pmf(0) - 0.486_488).abs() < 1e-6);
        assert!((z.pmf(1) - 0.382_793).abs() < 1e-6);
        let z12 = OffspringLaw::zeta_stable(1.2).unwrap();
        assert!((z12.pmf(0) - (1.0 - zeta(2.2) / zeta(1.2))).abs() < 1e-15);
        assert!(OffspringLaw::zeta_stable(2.0).is_err());
        assert!(OffspringLaw::zeta_stable(1.0).is_err());
    }

    #[test]
    fn criticality_by_truncated_summation() {
        for law in [
            OffspringLaw::zeta_stable(1.5).unwrap(),
            OffspringLaw::zeta_stable(1.2).unwrap(),
        ] {
            let a = law.alpha_t();
            let n = 200_000u64;
            let (mut mass, mut mean) = (0.0, 0.0);
            for k in (0..n).rev() {
                let p = law.pmf(k);
                mass += p;
                mean += k as f64 * p;
            }
            // analytic tails beyond n
            mass += law.tail_from(n);
            mean += power_tail_sum(a, n) / zeta(a);
            assert!((mass - 1.0).abs() < 1e-12, "mass {mass}");
            assert!((mean - 1.0).abs() < 1e-12, "mean {mean}");
        }
        let g = geo();
        let mean: f64 = (0..200u64).map(|k| k as f64 * g.pmf(k)).sum();
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_values_and_inverse() {
        let g = geo();
        assert_eq!(g.kappa(0.0), 0.0);
        let expect = 1.0 - (2.0 - (-1.0f64).exp()).ln();
        assert!((g.kappa(1.0) - expect).abs() < 1e-14);
        assert!((g.kappa(1.0) - 0.51012).abs() < 1e-5);
        assert!((g.kappa(0.01) / 1e-4 - 1.0).abs() < 0.02);
        assert_eq!(g.kappa_inv(0.0).unwrap(), 0.0);
        assert!((g.kappa_inv(expect).unwrap() - 1.0).abs() < 1e-10);
        for law in [g, OffspringLaw::zeta_stable(1.5).unwrap()] {
            let mut u = 0.001;
            while u <= 10.0 {
                let t = law.kappa_inv(u).unwrap();
                assert!((law.kappa(t) - u).abs() < 1e-10, "u={u}");
                u *= 1.7;
            }
        }
        assert!(geo().kappa_inv(-1.0).is_err());
    }

    #[test]
    fn kappa_convex_and_increasing() {
        for law in [geo(), OffspringLaw::zeta_stable(1.5).unwrap()] {
            let h = 1e-3;
            let ts: Vec<f64> = (1..4000).map(|i| i as f64 * h).collect();
            for w in ts.windows(3) {
                let (a, b, c) = (law.kappa(w[0]), law.kappa(w[1]), law.kappa(w[2]));
                assert!(a > 0.0 && b > a && c > b);
                assert!(a - 2.0 * b + c >= -1e-10);
            }
        }
    }

    #[test]
    fn kappa_small_t_limit() {
        let g = geo();
        for t in [1e-2, 1e-3] {
            assert!((g.kappa(t) / (t * t) - 1.0).abs() < 0.03);
        }
        assert!((g.estimate_lambda() - 1.0).abs() < 1e-6);
        // closed form for the zeta family: lambda = Gamma(-alpha) / zeta(alpha)
        for a in [1.3, 1.5, 1.8] {
            let z = OffspringLaw::zeta_stable(a).unwrap();
            let oracle = statrs::function::gamma::gamma(-a) / zeta(a);
            let est = z.estimate_lambda();
            assert!(
                (est / oracle - 1.0).abs() < 1e-4,
                "alpha={a}: {est} vs {oracle}"
            );
        }
    }

    #[test]
    fn height_cdf_geometric_closed_form() {
        let g = geo();
        assert_eq!(g.height_cdf(0), 0.0);
        assert_eq!(g.height_cdf(1), 0.5);
        assert!((g.height_cdf(5) - 5.0 / 6.0).abs() < 1e-15);
        let table = g.height_cdf_table(1000);
        for (i, q) in table.iter().enumerate() {
            assert!((q - i as f64 / (i as f64 + 1.0)).abs() < 1e-12);
        }
        let z = OffspringLaw::zeta_stable(1.5).unwrap();
        let t = z.height_cdf_table(200);
        assert!(t.windows(2).all(|w| w[1] >= w[0]) && t[200] < 1.0);
    }

    #[test]
    fn gen_ba_identity_and_values() {
        let g = geo();
        assert!((g.gen_ba(0.5) - 1.0 / 1.5).abs() < 1e-15);
        assert!((g.gen_ba(0.0) - 0.5).abs() < 1e-15);
        for law in [g, OffspringLaw::zeta_stable(1.5).unwrap()] {
            for i in 0..100 {
                let s = i as f64 / 100.0;
                assert!((law.gen_ba(s) * (1.0 - s) + law.gen_z(s) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gen_ba_zeta_double_sum_oracle() {
        let z = OffspringLaw::zeta_stable(1.5).unwrap();
        let s = 0.9f64;
        // P(B - A = j) = sum_{l > j} p_l, summed over (a, b) with b <= 1e6
        let bmax = 1_000_000usize;
        let mut tail = vec![0.0; bmax + 2];
        // mass beyond bmax by the integral estimate of sum_{l > bmax} l^-2.5
        let bf = bmax as f64 + 0.5;
        tail[bmax + 1] = bf.powf(-1.5) / 1.5 / zeta(1.5);
        for l in (1..=bmax).rev() {
            tail[l] = tail[l + 1] + z.pmf(l as u64);
        }
        let mut acc = 0.0;
        let mut sj = 1.0;
        for j in 0..bmax {
            acc += tail[j + 1] * sj;
            sj *= s;
            if sj < 1e-30 {
                break;
            }
        }
        assert!(
            (z.gen_ba(s) - acc).abs() < 1e-10,
            "{} vs {acc}",
            z.gen_ba(s)
        );
    }

    #[test]
    fn samplers_match_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for law in [geo(), OffspringLaw::zeta_stable(1.5).unwrap()] {
            let m = 400_000;
            let mut counts = [0u64; 6];
            let mut sb_counts = [0u64; 6];
            for _ in 0..m {
                let k = law.sample(&mut rng) as usize;
                if k < 6 {
                    counts[k] += 1;
                }
                let b = law.sample_size_biased(&mut rng) as usize;
                if b < 6 {
                    sb_counts[b] += 1;
                }
            }
            for k in 0..6 {
                let p = law.pmf(k as u64);
                let sd = (p * (1.0 - p) / m as f64).sqrt();
                assert!(
                    (counts[k] as f64 / m as f64 - p).abs() < 4.5 * sd + 1e-9,
                    "k={k}"
                );
                let q = k as f64 * p;
                let sd = (q * (1.0 - q) / m as f64).sqrt();
                assert!(
                    (sb_counts[k] as f64 / m as f64 - q).abs() < 4.5 * sd + 1e-9,
                    "sb k={k}"
                );
            }
        }
    }

    #[test]
    fn conditional_sampler_respects_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = OffspringLaw::zeta_stable(1.5).unwrap();
        let m = 200_000;
        let k0 = 3u64;
        let mut at_k0 = 0;
        for _ in 0..m {
            let v = z.sample_at_least(k0, &mut rng);
            assert!(v >= k0);
            if v == k0 {
                at_k0 += 1;
            }
        }
        let p = z.hazard(k0);
        let sd = (p * (1.0 - p) / m as f64).sqrt();
        assert!((at_k0 as f64 / m as f64 - p).abs() < 4.5 * sd);
        assert!(z.sample_at_least(100_000, &mut rng) >= 100_000);
    }

    #[test]
    fn power_tail_sampler_law() {
        // P(k = first | k >= first) for exponent 2.5
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = 10u64;
        let p = (first as f64).powf(-2.5) / power_tail_sum(2.5, first);
        let m = 300_000;
        let hits = (0..m)
            .filter(|_| power_tail_sample(2.5, first, &mut rng) == first)
            .count();
        let sd = (p * (1.0 - p) / m as f64).sqrt();
        assert!((hits as f64 / m as f64 - p).abs() < 4.5 * sd);
    }

    #[test]
    fn parse_and_display() {
        let g: OffspringLaw = "family=geometric_half".parse().unwrap();
        assert_eq!(g.family(), &Family::GeometricHalf);
        let z: OffspringLaw = "family=zeta;alphaT=1.5".parse().unwrap();
        assert_eq!(z.family(), &Family::Zeta { alpha_t: 1.5 });
        let back: OffspringLaw = z.to_string().parse().unwrap();
        assert_eq!(back.family(), z.family());
        let f: OffspringLaw = "family=finite;pmf=0.25,0.5,0.25".parse().unwrap();
        assert!(f.is_critical());
        assert!((f.lambda().unwrap() - 0.25).abs() < 1e-15);
        assert!("family=zeta".parse::<OffspringLaw>().is_err());
        assert!("family=zeta;alphaT=2.5".parse::<OffspringLaw>().is_err());
        assert!("family=poisson".parse::<OffspringLaw>().is_err());
        assert!("family=finite;pmf=0.5,0.6".parse::<OffspringLaw>().is_err());
    }

    #[test]
    fn dimension_values() {
        assert_eq!(geo().dimension(), 2.0);
        assert!((OffspringLaw::zeta_stable(1.5).unwrap().dimension() - 3.0).abs() < 1e-12);
    }
}
