//! Riemann zeta, Hurwitz-type power tails and the polylogarithm `Li_s(x)`
//! for real arguments.
//!
//! Everything is built on an Euler-Maclaurin evaluation of `sum_{k>=m} k^-s`:
//! a short directly summed head plus the integral tail and Bernoulli
//! corrections. This gives the analytic continuation of zeta for all
//! `s != 1` on the positive side; negative arguments go through the
//! functional equation.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

/// Terms summed directly before the Euler-Maclaurin tail takes over.
const HEAD: u64 = 20;

/// `B_{2j} / (2j)!` for j = 1..=10.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
    43_867.0 / 798.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
];

/// Euler-Maclaurin value of `sum_{k>=n} k^-s` (analytically continued for
/// `s < 1`).
fn em_tail(s: f64, n: f64) -> f64 {
    let mut acc = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial (s)_{2j-1} and n^{-s-2j+1}
    let mut rising = s;
    let mut npow = n.powf(-s - 1.0);
    for (j, coef) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if j > 0 {
            let a = s + (2 * j - 1) as f64;
            rising *= a * (a + 1.0);
            npow /= n * n;
        }
        let term = coef * rising * npow;
        acc += term;
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
    }
    acc
}

/// `sum_{k >= m} k^-s` for `s > 1`, `m >= 1`.
pub fn power_tail_sum(s: f64, m: u64) -> f64 {
    assert!(s > 1.0 && m >= 1, "power_tail_sum needs s > 1, m >= 1");
    let start = m.max(HEAD);
    let mut head = 0.0;
    // smallest terms first
    for k in (m..start).rev() {
        head += (k as f64).powf(-s);
    }
    head + em_tail(s, start as f64)
}

/// Riemann zeta for real `s != 1`.
pub fn zeta(s: f64) -> f64 {
    assert!(s != 1.0, "zeta has a pole at 1");
    if s >= 0.0 {
        let mut head = 0.0;
        for k in (1..HEAD).rev() {
            head += (k as f64).powf(-s);
        }
        head + em_tail(s, HEAD as f64)
    } else {
        // functional equation: zeta(s) = 2^s pi^(s-1) sin(pi s / 2) Gamma(1-s) zeta(1-s)
        let t = 1.0 - s;
        let sine = (PI * s / 2.0).sin();
        if sine == 0.0 || (s / 2.0).fract() == 0.0 {
            return 0.0;
        }
        2f64.powf(s) * PI.powf(s - 1.0) * sine * gamma(t) * zeta(t)
    }
}

/// Polylogarithm `Li_s(x) = sum_{k>=1} x^k / k^s` for non-integer `s > 1`
/// and `x` in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Polylog {
    s: f64,
    gamma_one_minus_s: f64,
    /// zeta(s - k) / k!
    coeffs: Vec<f64>,
}

impl Polylog {
    const TERMS: usize = 40;

    pub fn new(s: f64) -> Self {
        assert!(
            s > 1.0 && s.fract() != 0.0,
            "Polylog needs non-integer s > 1"
        );
        let mut coeffs = Vec::with_capacity(Self::TERMS);
        let mut fact = 1.0;
        for k in 0..Self::TERMS {
            if k > 0 {
                fact *= k as f64;
            }
            coeffs.push(zeta(s - k as f64) / fact);
        }
        Polylog {
            s,
            gamma_one_minus_s: gamma(1.0 - s),
            coeffs,
        }
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// `Li_s(x) - zeta(s)`, computed without cancellation near `x = 1`.
    pub fn eval_minus_zeta(&self, x: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        if x <= 0.0 {
            return -self.coeffs[0];
        }
        self.eval_minus_zeta_log(x.ln())
    }

    /// `Li_s(e^mu) - zeta(s)` for `mu <= 0`, avoiding the rounding of `e^mu`.
    pub fn eval_minus_zeta_log(&self, mu: f64) -> f64 {
        debug_assert!(mu <= 0.0);
        if mu < -1.0 {
            return self.eval(mu.exp()) - self.coeffs[0];
        }
        let mut acc = 0.0;
        let mut mupow = mu;
        for c in &self.coeffs[1..] {
            let term = c * mupow;
            acc += term;
            mupow *= mu;
            if term.abs() < 1e-19 * acc.abs().max(1e-300) && mupow.abs() < 1e-19 {
                break;
            }
        }
        if mu < 0.0 {
            acc += self.gamma_one_minus_s * (-mu).powf(self.s - 1.0);
        }
        acc
    }

    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        if x <= 0.0 {
            return 0.0;
        }
        let mu = x.ln();
        if mu < -1.0 {
            // direct series; x < 1/e so it converges geometrically
            let mut acc = 0.0;
            let mut xk = 1.0;
            for k in 1..200u32 {
                xk *= x;
                let term = xk * (k as f64).powf(-self.s);
                acc += term;
                if term < 1e-18 * acc {
                    break;
                }
            }
            acc
        } else {
            // expansion around x = 1, valid for |ln x| < 2 pi
            let mut acc = 0.0;
            let mut mupow = 1.0;
            for c in &self.coeffs {
                let term = c * mupow;
                acc += term;
                mupow *= mu;
                if term.abs() < 1e-19 && mupow.abs() < 1e-19 {
                    break;
                }
            }
            if mu < 0.0 {
                acc += self.gamma_one_minus_s * (-mu).powf(self.s - 1.0);
            }
            acc
        }
    }
}
