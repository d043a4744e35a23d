use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Binomial;

use super::{LukPath, Tree};
use crate::error::{Error, Result};
use crate::heavytail::open_unit;
use crate::offspring::OffspringLaw;

/// Outcome of a sampler that stops once a tree exceeds `cap` vertices.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampled<T> {
    Complete(T),
    CapExceeded,
}

impl<T> Sampled<T> {
    pub fn complete(self) -> Option<T> {
        match self {
            Sampled::Complete(t) => Some(t),
            Sampled::CapExceeded => None,
        }
    }

    pub fn is_capped(&self) -> bool {
        matches!(self, Sampled::CapExceeded)
    }
}

/// Conditioned subtrees give up after this many rejected attempts.
const SUBTREE_ATTEMPTS: u64 = 10_000_000;
/// Above this offspring count a height-limited attempt is treated as capped
/// without being explored.
const ABSURD_DEGREE: u64 = 1 << 40;

enum Grow {
    Done,
    Rejected,
    Capped,
}

/// Appends the preorder offspring counts of one Galton–Watson tree to `out`.
///
/// With `height_limit = Some(m)` the attempt is rejected (and `out` restored)
/// as soon as a vertex appears at depth `m`. The tree is capped once the
/// vertices emitted so far plus those known to exist exceed `cap`; a capped
/// height-limited attempt keeps drawing without storing until it is either
/// rejected or complete, so the cap does not bias the rejection step.
fn grow<R: Rng + ?Sized>(
    law: &OffspringLaw,
    rng: &mut R,
    out: &mut Vec<u32>,
    cap: usize,
    height_limit: Option<usize>,
) -> Grow {
    let start = out.len();
    let mut emitted = start as u64;
    let mut pending = 0u64;
    let mut capped = false;
    // stack[d] = children of the open vertex at depth d not yet started
    let mut stack: Vec<u64> = Vec::new();
    let mut first = true;
    loop {
        if !first {
            while let Some(&0) = stack.last() {
                stack.pop();
            }
            let Some(top) = stack.last_mut() else {
                return if capped { Grow::Capped } else { Grow::Done };
            };
            *top -= 1;
            pending -= 1;
        }
        first = false;
        let depth = stack.len();
        let z = law.sample(rng);
        if let Some(m) = height_limit {
            if z > 0 && depth + 1 >= m {
                out.truncate(start);
                return Grow::Rejected;
            }
        }
        emitted += 1;
        if !capped {
            if z > cap as u64 || emitted + pending + z > cap as u64 {
                capped = true;
                out.truncate(start);
                if height_limit.is_none() || z > ABSURD_DEGREE {
                    return Grow::Capped;
                }
            } else {
                out.push(z as u32);
            }
        } else if z > ABSURD_DEGREE {
            return Grow::Capped;
        }
        pending += z;
        if z > 0 {
            stack.push(z);
        }
    }
}

/// Unconditioned Galton–Watson tree, or `CapExceeded` if it has more than
/// `cap` vertices.
pub fn sample_free<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R, cap: usize) -> Sampled<Tree> {
    let mut counts = Vec::new();
    match grow(law, rng, &mut counts, cap, None) {
        Grow::Done => {
            Sampled::Complete(Tree::from_offspring(&counts).expect("generated sequence is a tree"))
        }
        _ => Sampled::CapExceeded,
    }
}

/// Size of an unconditioned tree without building it. Consumes the stream
/// exactly as [`sample_free`] does.
pub fn sample_free_size<R: Rng + ?Sized>(
    law: &OffspringLaw,
    rng: &mut R,
    cap: usize,
) -> Sampled<u64> {
    let cap = cap as u64;
    let mut emitted = 0u64;
    let mut pending = 1u64;
    while pending > 0 {
        pending -= 1;
        let z = law.sample(rng);
        emitted += 1;
        if z > cap || emitted + pending + z > cap {
            return Sampled::CapExceeded;
        }
        pending += z;
    }
    Sampled::Complete(emitted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeMethod {
    /// Counts of each offspring value by sequential binomials, then a uniform
    /// arrangement. Same law as `Direct`, with early rejection.
    #[default]
    Multinomial,
    /// `n` iid offspring draws, rejected unless they sum to `n - 1`.
    Direct,
}

/// Tree conditioned on `size_total = n`, with the law's default attempt budget.
pub fn sample_size_conditioned<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
) -> Result<Tree> {
    sample_size_conditioned_with(
        law,
        n,
        SizeMethod::default(),
        law.default_attempt_budget(n as u64),
        rng,
    )
}

pub fn sample_size_conditioned_with<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    method: SizeMethod,
    budget: u64,
    rng: &mut R,
) -> Result<Tree> {
    if n == 0 {
        return Err(Error::invalid("size-conditioned trees need n >= 1"));
    }
    if n > u32::MAX as usize {
        return Err(Error::invalid(format!(
            "n = {n} exceeds the vertex index range"
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..budget {
        let accepted = match method {
            SizeMethod::Multinomial => multinomial_attempt(law, n, rng, &mut values),
            SizeMethod::Direct => direct_attempt(law, n, rng, &mut values),
        };
        if accepted {
            if method == SizeMethod::Multinomial {
                values.shuffle(rng);
            }
            let shift = cycle_lemma_shift(&values);
            values.rotate_left(shift);
            let path = LukPath {
                increments: values.iter().map(|&z| z as i64 - 1).collect(),
            };
            path.validate()?;
            return Tree::from_offspring(&values);
        }
    }
    Err(Error::BudgetExhausted {
        attempts: budget,
        context: format!("size-conditioned tree with n = {n}"),
    })
}

fn direct_attempt<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
    values: &mut Vec<u32>,
) -> bool {
    values.clear();
    let target = n as u64 - 1;
    let mut sum = 0u64;
    for _ in 0..n {
        let z = law.sample(rng);
        sum = sum.saturating_add(z);
        if sum > target {
            return false;
        }
        values.push(z as u32);
    }
    sum == target
}

const BINOMIAL_MIN: u64 = 16;
const BINOMIAL_MAX_K: u64 = 1024;

fn multinomial_attempt<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
    values: &mut Vec<u32>,
) -> bool {
    values.clear();
    // m draws remain, all known to be >= k, and they must sum to r
    let mut m = n as u64;
    let mut r = n as u64 - 1;
    let mut k = 0u64;
    loop {
        if m == 0 {
            return r == 0;
        }
        if k.saturating_mul(m) > r {
            return false;
        }
        if m <= BINOMIAL_MIN || k >= BINOMIAL_MAX_K {
            for _ in 0..m {
                let z = law.sample_at_least(k, rng);
                if z > r {
                    return false;
                }
                r -= z;
                values.push(z as u32);
            }
            return r == 0;
        }
        let h = law.hazard(k);
        let c = if h >= 1.0 {
            m
        } else {
            Binomial::new(m, h)
                .expect("hazard is a probability")
                .sample(rng)
        };
        values.extend(std::iter::repeat_n(k as u32, c as usize));
        m -= c;
        r -= k * c;
        k += 1;
    }
}

/// Start index of the unique rotation of `counts` (offspring values summing
/// to `len - 1`) whose Łukasiewicz path first reaches -1 at the last step:
/// the first position where the partial sums attain their minimum.
pub(crate) fn cycle_lemma_shift(counts: &[u32]) -> usize {
    let mut sum = 0i64;
    let mut min = i64::MAX;
    let mut arg = 0;
    for (j, &z) in counts.iter().enumerate() {
        sum += z as i64 - 1;
        if sum < min {
            min = sum;
            arg = j + 1;
        }
    }
    arg % counts.len()
}

/// Tree conditioned on `height >= k` by the spine construction.
///
/// The spine vertex at depth `d` has `(A, B)` drawn with weight
/// `p_b q_{i-1}^(a-1)`, `i = k - d`, `1 <= a <= b`; its `a`-th child carries
/// the spine, the `a - 1` children before it grow trees of height `< i - 1`
/// and the `b - a` after it grow free trees. The spine tip grows a free tree.
pub fn sample_height_conditioned<R: Rng + ?Sized>(
    law: &OffspringLaw,
    k: usize,
    rng: &mut R,
    cap: usize,
) -> Result<Sampled<Tree>> {
    let q = law.height_cdf_table(k);
    let mut out: Vec<u32> = Vec::new();
    let mut right = Vec::with_capacity(k);
    for d in 0..k {
        let i = k - d;
        let (a, b) = sample_spine_pair(law, q[i - 1], rng);
        if b > cap as u64 || out.len() as u64 + b + 1 > cap as u64 {
            return Ok(Sampled::CapExceeded);
        }
        out.push(b as u32);
        for _ in 1..a {
            if !grow_height_limited(law, rng, &mut out, cap, i - 1)? {
                return Ok(Sampled::CapExceeded);
            }
        }
        right.push(b - a);
    }
    if !matches!(grow(law, rng, &mut out, cap, None), Grow::Done) {
        return Ok(Sampled::CapExceeded);
    }
    for &r in right.iter().rev() {
        for _ in 0..r {
            if !matches!(grow(law, rng, &mut out, cap, None), Grow::Done) {
                return Ok(Sampled::CapExceeded);
            }
        }
    }
    Ok(Sampled::Complete(Tree::from_offspring(&out)?))
}

/// Proposal `B` size-biased and `A` uniform on `1..=B`, accepted with
/// probability `q^(A-1)`.
fn sample_spine_pair<R: Rng + ?Sized>(law: &OffspringLaw, q: f64, rng: &mut R) -> (u64, u64) {
    loop {
        let b = law.sample_size_biased(rng);
        let a = rng.random_range(1..=b);
        if a == 1 || (q > 0.0 && open_unit(rng) < q.powf((a - 1) as f64)) {
            return (a, b);
        }
    }
}

/// Appends a tree conditioned on `height < m`; `false` when capped.
fn grow_height_limited<R: Rng + ?Sized>(
    law: &OffspringLaw,
    rng: &mut R,
    out: &mut Vec<u32>,
    cap: usize,
    m: usize,
) -> Result<bool> {
    if m == 0 {
        return Err(Error::invalid("no tree has height < 0"));
    }
    for _ in 0..SUBTREE_ATTEMPTS {
        match grow(law, rng, out, cap, Some(m)) {
            Grow::Done => return Ok(true),
            Grow::Capped => return Ok(false),
            Grow::Rejected => {}
        }
    }
    Err(Error::BudgetExhausted {
        attempts: SUBTREE_ATTEMPTS,
        context: format!("subtree of height < {m}"),
    })
}
