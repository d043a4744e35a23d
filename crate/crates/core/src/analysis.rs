//! Closed-form and numeric oracles: the total-progeny generating function
//! through Good's fixed point, the exact law of the largest jump on a free
//! tree, the big-jump event bounds, the truncated-walk constant and
//! Tauberian cross-checks of the size tail.

use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::harness::stats::Proportion;
use crate::heavytail::{ScaleSpec, StepLaw, TailMode};
use crate::offspring::{Family, OffspringLaw};

/// Whether the size variable counts the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `g_V(s) = E[s^V]`, root included.
    Root,
    /// `h(s) = g_V(s) / s = E[s^(V-1)]`, one term per non-root vertex.
    Nonroot,
}

/// Evaluates `g_V`, the smallest fixed point of `g = s g_Z(g)`.
#[derive(Debug, Clone)]
pub struct GvEvaluator {
    law: OffspringLaw,
    tol: f64,
    max_iter: u64,
}

impl GvEvaluator {
    pub fn new(law: OffspringLaw) -> Self {
        GvEvaluator {
            law,
            tol: 1e-13,
            max_iter: 1_000_000,
        }
    }

    pub fn with_limits(law: OffspringLaw, tol: f64, max_iter: u64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1e-6) || max_iter == 0 {
            return Err(Error::invalid(format!(
                "need tol in (0, 1e-6] and max_iter >= 1, got {tol}, {max_iter}"
            )));
        }
        Ok(GvEvaluator { law, tol, max_iter })
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Monotone iteration `g <- s g_Z(g)` from 0.
    pub fn gv(&self, s: f64) -> Result<f64> {
        check_unit(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        if s == 1.0 {
            return Ok(1.0);
        }
        let mut g = 0.0;
        for _ in 0..self.max_iter {
            let next = s * self.law.gen_z(g);
            if (next - g).abs() < self.tol {
                return Ok(next);
            }
            g = next;
        }
        Err(Error::NonConvergence {
            s,
            iterations: self.max_iter,
        })
    }

    /// `1 - g_V(1 - t)`, iterated on the complement so that small values keep
    /// their relative precision: `u <- t - (1 - t)(g_Z(1 - u) - 1)` from 1.
    /// Stops once a step changes `u` by less than `tol * u`.
    pub fn gv_complement(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if t == 1.0 {
            return Ok(1.0);
        }
        let mut u = 1.0;
        for _ in 0..self.max_iter {
            let next = t - (1.0 - t) * self.law.gen_z_minus_one(1.0 - u);
            if (next - u).abs() < self.tol * next {
                return Ok(next);
            }
            u = next;
        }
        Err(Error::NonConvergence {
            s: 1.0 - t,
            iterations: self.max_iter,
        })
    }

    /// `E[s^(V-1)]`.
    pub fn gv_nonroot(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            // P(V = 1)
            return Ok(self.law.pmf(0));
        }
        Ok(self.gv(s)? / s)
    }

    pub fn gv_with(&self, s: f64, convention: Convention) -> Result<f64> {
        match convention {
            Convention::Root => self.gv(s),
            Convention::Nonroot => self.gv_nonroot(s),
        }
    }

    /// `1 - E[(1 - t)^N]` with `N = V` or `V - 1` per the convention.
    pub fn complement_with(&self, t: f64, convention: Convention) -> Result<f64> {
        let u = self.gv_complement(t)?;
        Ok(match convention {
            Convention::Root => u,
            Convention::Nonroot if t < 1.0 => (u - t) / (1.0 - t),
            Convention::Nonroot => 1.0 - self.law.pmf(0),
        })
    }

    /// Probability that the largest jump of a walk on a free tree exceeds `x`:
    /// `1 - E[(1 - tail(x))^N]`.
    pub fn xmax_tail_exact(
        &self,
        step: &StepLaw,
        x: f64,
        mode: TailMode,
        convention: Convention,
    ) -> Result<f64> {
        self.complement_with(step.tail(x, mode), convention)
    }
}

fn check_unit(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("argument {s} is outside [0, 1]")));
    }
    Ok(())
}

/// Leading term of `1 - g_V(1 - s)` as `s -> 0`: `(s / lambda)^(1 / alpha_T)`.
/// For finite variance this is `sqrt(2 s) / sigma`.
pub fn gv_tail_asymptotic(law: &OffspringLaw, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 0.1) {
        return Err(Error::invalid(format!(
            "asymptotic needs 0 < s <= 0.1, got {s}"
        )));
    }
    Ok((s / law.lambda_or_estimate()).powf(1.0 / law.alpha_t()))
}

/// `(H V / 2) P(|X| > z)^2 + C V exp(-y / z)`.
pub fn prop1_rhs(h: u64, v: u64, z: f64, y: f64, c: f64, step: &StepLaw) -> f64 {
    let t = step.tail_abs(z);
    (h as f64 * v as f64 / 2.0) * t * t + c * v as f64 * (-y / z).exp()
}

/// `C H V y^(-(2 - epsilon) alpha)`.
pub fn corollary_rhs(h: u64, v: u64, y: f64, epsilon: f64, c: f64, step: &StepLaw) -> f64 {
    c * h as f64 * v as f64 * y.powf(-(2.0 - epsilon) * step.alpha())
}

/// One `(n, x)` cell of the truncated-walk calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdsCell {
    pub n: u64,
    pub y: f64,
    pub x: f64,
    pub exceed: Proportion,
    /// `exp(x / y) * estimate`
    pub point: f64,
    /// `exp(x / y) * upper Wilson bound`
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdsCalibration {
    /// Largest `upper` over all cells.
    pub c_hat: f64,
    /// Largest `point` over all cells.
    pub c_point: f64,
    pub cells: Vec<DdsCell>,
}

/// Estimates the constant `C` in `P(|S_n^(y)| > x) <= C exp(-x / y)`, where
/// `S_n^(y)` sums `n` steps with those of modulus above `y` removed.
///
/// For each `n`, `y = y_rule(n)` must be at least `b_n`; `x` runs over
/// `x_multipliers * y`; every cell uses `reps` independent walks.
pub fn calibrate_dds_constant<F, R>(
    step: &StepLaw,
    scale: &ScaleSpec,
    n_grid: &[u64],
    x_multipliers: &[f64],
    y_rule: F,
    reps: u64,
    rng: &mut R,
) -> Result<DdsCalibration>
where
    F: Fn(u64) -> f64,
    R: Rng + ?Sized,
{
    if reps == 0 || n_grid.is_empty() || x_multipliers.is_empty() {
        return Err(Error::invalid(
            "calibration needs reps >= 1 and non-empty grids",
        ));
    }
    let sampler = step.sampler()?;
    let mut cells = Vec::new();
    for &n in n_grid {
        let y = y_rule(n);
        let b = scale.b(n);
        if !(y >= b) {
            return Err(Error::invalid(format!(
                "y = {y} is below b_n = {b} at n = {n}"
            )));
        }
        let mut counts = vec![0u64; x_multipliers.len()];
        for _ in 0..reps {
            let mut s = 0.0f64;
            for _ in 0..n {
                let x: f64 = sampler.sample(rng);
                if x.abs() <= y {
                    s += x;
                }
            }
            for (c, m) in counts.iter_mut().zip(x_multipliers) {
                if s.abs() > m * y {
                    *c += 1;
                }
            }
        }
        for (&c, &m) in counts.iter().zip(x_multipliers) {
            let exceed = Proportion::new(c, reps);
            let w = m.exp();
            cells.push(DdsCell {
                n,
                y,
                x: m * y,
                exceed,
                point: w * exceed.estimate,
                upper: w * exceed.hi,
            });
        }
    }
    let c_hat = cells.iter().map(|c| c.upper).fold(0.0, f64::max);
    let c_point = cells.iter().map(|c| c.point).fold(0.0, f64::max);
    Ok(DdsCalibration {
        c_hat,
        c_point,
        cells,
    })
}

/// Exact `P(V > n)` when available in closed form (the geometric family:
/// `binom(2n, n) / 4^n`).
pub fn size_tail_exact(law: &OffspringLaw, n: u64) -> Option<f64> {
    match law.family() {
        Family::GeometricHalf => {
            if n == 0 {
                return Some(1.0);
            }
            let nf = n as f64;
            if n <= 1000 {
                let mut r = 1.0;
                for k in 1..=n {
                    r *= (2 * k - 1) as f64 / (2 * k) as f64;
                }
                Some(r)
            } else {
                Some((ln_gamma(2.0 * nf + 1.0) - 2.0 * ln_gamma(nf + 1.0) - nf * 4f64.ln()).exp())
            }
        }
        _ => None,
    }
}

/// Tauberian asymptotic of `P(V > n)`: `lambda^-beta / (n^beta Gamma(1 - beta))`
/// with `beta = 1 / alpha_T`.
pub fn size_tail_asymptotic(law: &OffspringLaw, n: f64) -> f64 {
    let beta = 1.0 / law.alpha_t();
    law.lambda_or_estimate().powf(-beta) / (n.powf(beta) * gamma(1.0 - beta))
}

/// `P(V > n)`, exact if known, otherwise asymptotic.
pub fn size_tail_oracle(law: &OffspringLaw, n: u64) -> f64 {
    size_tail_exact(law, n).unwrap_or_else(|| size_tail_asymptotic(law, n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaramataRow {
    pub n: u64,
    pub empirical: f64,
    pub target: f64,
    /// `empirical / target - 1`
    pub rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaramataReport {
    pub beta: f64,
    pub rows: Vec<KaramataRow>,
    pub max_abs_rel_dev: f64,
}

/// Compares an empirical size tail with its Tauberian asymptotic.
pub fn karamata_crosscheck<F: Fn(u64) -> f64>(
    law: &OffspringLaw,
    n_grid: &[u64],
    sample_tail: F,
) -> Result<KaramataReport> {
    let beta = 1.0 / law.alpha_t();
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!(
            "Tauberian transform needs 0 < beta < 1, got {beta}"
        )));
    }
    let rows: Vec<KaramataRow> = n_grid
        .iter()
        .map(|&n| {
            let empirical = sample_tail(n);
            let target = size_tail_asymptotic(law, n as f64);
            KaramataRow {
                n,
                empirical,
                target,
                rel_dev: empirical / target - 1.0,
            }
        })
        .collect();
    let max_abs_rel_dev = rows.iter().map(|r| r.rel_dev.abs()).fold(0.0, f64::max);
    Ok(KaramataReport {
        beta,
        rows,
        max_abs_rel_dev,
    })
}
