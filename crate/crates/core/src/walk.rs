//! Tree-indexed random walks: `S_v` is the sum of the steps on the path from
//! the root (exclusive) to `v` (inclusive), so `S_root = 0`.
//!
//! Steps live on non-root vertices; `steps[v - 1]` belongs to vertex `v`.

use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavytail::StepLaw;
use crate::offspring::OffspringLaw;
use crate::treegen::{Sampled, Tree};

/// The six maxima of one walk and the discrepancy `delta` between the walk
/// maxima and the jump maxima.
///
/// `s_max` and `sabs_max` range over all vertices including the root, the
/// leaf variants over leaves, and the jump maxima over non-root vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub s_max: f64,
    #[serde(rename = "sL_max")]
    pub s_leaf_max: f64,
    pub sabs_max: f64,
    #[serde(rename = "sLabs_max")]
    pub s_leaf_abs_max: f64,
    pub x_max: f64,
    pub xabs_max: f64,
    pub delta: f64,
}

impl WalkSummary {
    fn from_maxima(
        s_max: f64,
        s_leaf_max: f64,
        sabs_max: f64,
        s_leaf_abs_max: f64,
        x_max: f64,
        xabs_max: f64,
    ) -> Self {
        let delta = (s_max - x_max)
            .abs()
            .max((s_leaf_max - x_max).abs())
            .max((sabs_max - xabs_max).abs())
            .max((s_leaf_abs_max - xabs_max).abs());
        WalkSummary {
            s_max,
            s_leaf_max,
            sabs_max,
            s_leaf_abs_max,
            x_max,
            xabs_max,
            delta,
        }
    }

    /// Orderings that hold for every walk.
    pub fn is_consistent(&self) -> bool {
        self.s_leaf_max <= self.s_max
            && self.s_leaf_abs_max <= self.sabs_max
            && self.s_max >= 0.0
            && self.sabs_max >= self.s_max
            && self.xabs_max >= self.x_max
            && self.delta >= 0.0
    }

    /// Ratios `S_max / X_max`, `S^L_max / X_max`, `|S|_max / |X|_max`,
    /// `|S^L|_max / |X|_max`.
    pub fn ratios(&self) -> [f64; 4] {
        [
            self.s_max / self.x_max,
            self.s_leaf_max / self.x_max,
            self.sabs_max / self.xabs_max,
            self.s_leaf_abs_max / self.xabs_max,
        ]
    }
}

/// Running maxima, fed one vertex at a time.
struct Maxima {
    s: f64,
    s_leaf: f64,
    sabs: f64,
    s_leaf_abs: f64,
    x: f64,
    xabs: f64,
}

impl Maxima {
    fn new() -> Self {
        // the root contributes S = 0 to the all-vertex maxima
        Maxima {
            s: 0.0,
            s_leaf: f64::NEG_INFINITY,
            sabs: 0.0,
            s_leaf_abs: f64::NEG_INFINITY,
            x: f64::NEG_INFINITY,
            xabs: f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn push(&mut self, s: f64, x: f64, leaf: bool) {
        let sa = s.abs();
        self.s = self.s.max(s);
        self.sabs = self.sabs.max(sa);
        self.x = self.x.max(x);
        self.xabs = self.xabs.max(x.abs());
        if leaf {
            self.s_leaf = self.s_leaf.max(s);
            self.s_leaf_abs = self.s_leaf_abs.max(sa);
        }
    }

    fn finish(self) -> WalkSummary {
        WalkSummary::from_maxima(
            self.s,
            self.s_leaf,
            self.sabs,
            self.s_leaf_abs,
            self.x,
            self.xabs,
        )
    }
}

fn check_steps(tree: &Tree, steps: &[f64]) -> Result<()> {
    if tree.size_total() < 2 {
        return Err(Error::EmptyWalk);
    }
    if steps.len() != tree.nonroot() {
        return Err(Error::LengthMismatch {
            expected: tree.nonroot(),
            got: steps.len(),
        });
    }
    Ok(())
}

/// Summary of the walk with the given steps.
pub fn run_walk_with_steps(tree: &Tree, steps: &[f64]) -> Result<WalkSummary> {
    check_steps(tree, steps)?;
    let parents = tree.parents();
    let leaf = tree.leaf_flags();
    let mut s = vec![0.0f64; tree.size_total()];
    let mut m = Maxima::new();
    for v in 1..s.len() {
        let x = steps[v - 1];
        let sv = s[parents[v] as usize] + x;
        s[v] = sv;
        m.push(sv, x, leaf[v]);
    }
    Ok(m.finish())
}

/// Draws one step per non-root vertex, in vertex order.
pub fn sample_steps<D: Distribution<f64>, R: Rng + ?Sized>(
    tree: &Tree,
    step: &D,
    rng: &mut R,
) -> Vec<f64> {
    (0..tree.nonroot()).map(|_| step.sample(rng)).collect()
}

pub fn run_walk<R: Rng + ?Sized>(tree: &Tree, law: &StepLaw, rng: &mut R) -> Result<WalkSummary> {
    let sampler = law.sampler()?;
    run_walk_with(tree, &sampler, rng)
}

/// [`run_walk`] with a prebuilt step sampler.
pub fn run_walk_with<D: Distribution<f64>, R: Rng + ?Sized>(
    tree: &Tree,
    step: &D,
    rng: &mut R,
) -> Result<WalkSummary> {
    if tree.size_total() < 2 {
        return Err(Error::EmptyWalk);
    }
    run_walk_with_steps(tree, &sample_steps(tree, step, rng))
}

/// `S_v^(z)`: prefix sums that keep only steps with `|X| <= z`.
pub fn truncated_prefix_sums(tree: &Tree, steps: &[f64], z: f64) -> Result<Vec<f64>> {
    if steps.len() != tree.nonroot() {
        return Err(Error::LengthMismatch {
            expected: tree.nonroot(),
            got: steps.len(),
        });
    }
    let parents = tree.parents();
    let mut s = vec![0.0f64; tree.size_total()];
    for v in 1..s.len() {
        let x = steps[v - 1];
        let kept = if x.abs() <= z { x } else { 0.0 };
        s[v] = s[parents[v] as usize] + kept;
    }
    Ok(s)
}

/// The events of the single-big-jump argument for one walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigJumpEvents {
    /// No root-to-vertex path carries two steps with `|X| > z`.
    pub g1: bool,
    /// `max_v |S_v^(z)| <= y`.
    pub g2: bool,
    pub delta: f64,
    pub x_max: f64,
    /// `g1 && g2 && delta > y`.
    pub violation: bool,
    /// `g1 && g2 && x_max > z && delta > y`; never true.
    pub violation_with_big_jump: bool,
}

pub fn big_jump_events(tree: &Tree, steps: &[f64], z: f64, y: f64) -> Result<BigJumpEvents> {
    let summary = run_walk_with_steps(tree, steps)?;
    let parents = tree.parents();
    let n = tree.size_total();
    let mut big = vec![0u32; n];
    let mut trunc = vec![0.0f64; n];
    let mut g1 = true;
    let mut trunc_max = 0.0f64;
    for v in 1..n {
        let x = steps[v - 1];
        let p = parents[v] as usize;
        let is_big = x.abs() > z;
        big[v] = big[p] + is_big as u32;
        g1 &= big[v] <= 1;
        trunc[v] = trunc[p] + if is_big { 0.0 } else { x };
        trunc_max = trunc_max.max(trunc[v].abs());
    }
    let g2 = trunc_max <= y;
    let violation = g1 && g2 && summary.delta > y;
    let violation_with_big_jump = violation && summary.x_max > z;
    debug_assert!(!violation_with_big_jump, "big-jump implication failed");
    Ok(BigJumpEvents {
        g1,
        g2,
        delta: summary.delta,
        x_max: summary.x_max,
        violation,
        violation_with_big_jump,
    })
}

/// Number of ordered pairs `(u, v)` of non-root vertices with `u` a strict
/// ancestor of `v`: the exact number of terms in the union bound for `G1`.
pub fn ancestor_pairs(tree: &Tree) -> u64 {
    tree.depths()[1..].iter().map(|&d| d as u64 - 1).sum()
}

/// A free tree generated together with its walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeWalk {
    pub size_total: u64,
    pub height: u64,
    /// `None` for the single-vertex tree.
    pub summary: Option<WalkSummary>,
}

/// Grows a free Galton–Watson tree depth first and walks on it without
/// storing the tree. Tree and step streams are consumed exactly as by
/// [`crate::treegen::sample_free`] followed by [`run_walk_with`].
pub fn run_free_walk<D, R1, R2>(
    law: &OffspringLaw,
    step: &D,
    tree_rng: &mut R1,
    step_rng: &mut R2,
    cap: usize,
) -> Sampled<FreeWalk>
where
    D: Distribution<f64>,
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let cap = cap as u64;
    // (S of an open vertex, children not yet started)
    let mut stack: Vec<(f64, u64)> = Vec::new();
    let mut m = Maxima::new();
    let mut emitted = 0u64;
    let mut pending = 0u64;
    let mut height = 0u64;
    loop {
        let (s, x, depth) = if emitted == 0 {
            (0.0, 0.0, 0)
        } else {
            while let Some(&(_, 0)) = stack.last() {
                stack.pop();
            }
            let depth = stack.len() as u64;
            let Some(top) = stack.last_mut() else { break };
            top.1 -= 1;
            pending -= 1;
            let x = step.sample(step_rng);
            (top.0 + x, x, depth)
        };
        let z = law.sample(tree_rng);
        emitted += 1;
        if z > cap || emitted + pending + z > cap {
            return Sampled::CapExceeded;
        }
        if emitted > 1 {
            m.push(s, x, z == 0);
            height = height.max(depth);
        }
        pending += z;
        if z > 0 {
            stack.push((s, z));
        }
    }
    let summary = (emitted > 1).then(|| m.finish());
    Sampled::Complete(FreeWalk {
        size_total: emitted,
        height,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treegen::{sample_free, ROOT_PARENT};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3() -> Tree {
        Tree::path(3).unwrap()
    }

    #[test]
    fn path_hand_trace() {
        let w = run_walk_with_steps(&path3(), &[5.0, -2.0]).unwrap();
        assert_eq!(
            (
                w.s_max,
                w.s_leaf_max,
                w.sabs_max,
                w.s_leaf_abs_max,
                w.x_max,
                w.xabs_max,
                w.delta
            ),
            (5.0, 3.0, 5.0, 3.0, 5.0, 5.0, 2.0)
        );
        assert!(w.is_consistent());
    }

    #[test]
    fn single_negative_child() {
        let w = run_walk_with_steps(&Tree::path(2).unwrap(), &[-7.0]).unwrap();
        assert_eq!(
            (w.s_max, w.s_leaf_max, w.x_max, w.xabs_max),
            (0.0, -7.0, -7.0, 7.0)
        );
        assert_eq!((w.sabs_max, w.s_leaf_abs_max, w.delta), (7.0, 7.0, 7.0));
    }

    #[test]
    fn zero_steps() {
        let t = Tree::from_parents(vec![ROOT_PARENT, 0, 0, 1]).unwrap();
        let w = run_walk_with_steps(&t, &[0.0; 3]).unwrap();
        assert_eq!(
            (w.s_max, w.sabs_max, w.x_max, w.xabs_max, w.delta),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        let e = big_jump_events(&t, &[0.0; 3], 0.0, 0.0).unwrap();
        assert!(e.g1 && e.g2);
    }

    #[test]
    fn walk_errors() {
        assert!(matches!(
            run_walk_with_steps(&Tree::single_root(), &[]),
            Err(Error::EmptyWalk)
        ));
        assert!(matches!(
            run_walk_with_steps(&path3(), &[1.0]),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(truncated_prefix_sums(&path3(), &[1.0, 2.0, 3.0], 1.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_walk(
            &Tree::single_root(),
            &StepLaw::symmetric(3.0).unwrap(),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn truncated_sums_hand_trace() {
        let s = truncated_prefix_sums(&path3(), &[5.0, -2.0], 4.0).unwrap();
        assert_eq!(s, vec![0.0, 0.0, -2.0]);
        let s = truncated_prefix_sums(&path3(), &[5.0, -2.0], f64::INFINITY).unwrap();
        assert_eq!(s, vec![0.0, 5.0, 3.0]);
        let s = truncated_prefix_sums(&path3(), &[1.5, -1.0], 0.0).unwrap();
        assert_eq!(s, vec![0.0; 3]);
    }

    #[test]
    fn event_examples() {
        let e = big_jump_events(&path3(), &[5.0, -2.0], 4.0, 3.0).unwrap();
        assert!(e.g1 && e.g2 && e.delta == 2.0 && !e.violation);
        let e = big_jump_events(&path3(), &[5.0, -2.0], 1.0, 3.0).unwrap();
        assert!(!e.g1);
        let e = big_jump_events(&path3(), &[5.0, -2.0], f64::INFINITY, 100.0).unwrap();
        assert!(e.g1);
    }

    #[test]
    fn implication_needs_a_positive_big_jump() {
        // lone negative jump: G1 and G2 hold with y = 0, yet delta = 7
        let e = big_jump_events(&Tree::path(2).unwrap(), &[-7.0], 4.0, 0.0).unwrap();
        assert!(e.g1 && e.g2 && e.violation && !e.violation_with_big_jump);
        // no positive step exceeds z; the leaf sits at -8 while X_max = 4
        let e = big_jump_events(&Tree::path(4).unwrap(), &[-2.0, -10.0, 4.0], 4.0, 2.0).unwrap();
        assert!(e.g1 && e.g2 && e.violation && !e.violation_with_big_jump);
        assert_eq!(e.delta, 12.0);
    }

    #[test]
    fn ancestor_pair_count() {
        assert_eq!(ancestor_pairs(&Tree::path(4).unwrap()), 3);
        assert_eq!(ancestor_pairs(&Tree::star(5).unwrap()), 0);
    }

    #[test]
    fn serializes_with_short_names() {
        let w = run_walk_with_steps(&path3(), &[5.0, -2.0]).unwrap();
        let j = serde_json::to_value(w).unwrap();
        let keys: Vec<&str> = j.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "s_max",
            "sL_max",
            "sabs_max",
            "sLabs_max",
            "x_max",
            "xabs_max",
            "delta",
        ] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(keys.len(), 7);
        let back: WalkSummary = serde_json::from_value(j).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn fused_free_walk_matches_two_step_version() {
        let step = StepLaw::symmetric(3.0).unwrap().sampler().unwrap();
        for law in [
            OffspringLaw::geometric_half(),
            OffspringLaw::zeta_stable(1.5).unwrap(),
        ] {
            for seed in 0..400 {
                let mut t1 = ChaCha8Rng::seed_from_u64(seed);
                let mut s1 = ChaCha8Rng::seed_from_u64(seed + 10_000);
                let mut t2 = t1.clone();
                let mut s2 = s1.clone();
                let fused = run_free_walk(&law, &step, &mut t1, &mut s1, 500);
                match (fused, sample_free(&law, &mut t2, 500)) {
                    (Sampled::Complete(f), Sampled::Complete(tree)) => {
                        assert_eq!(f.size_total, tree.size_total() as u64);
                        assert_eq!(f.height, tree.height() as u64);
                        let direct = if tree.size_total() > 1 {
                            Some(run_walk_with(&tree, &step, &mut s2).unwrap())
                        } else {
                            None
                        };
                        assert_eq!(f.summary, direct);
                    }
                    (Sampled::CapExceeded, Sampled::CapExceeded) => {}
                    other => panic!("disagreement {other:?}"),
                }
            }
        }
    }

    /// Same tree with every sibling list reversed, relabelled in preorder,
    /// together with the map old vertex -> new vertex.
    fn mirror(tree: &Tree) -> (Tree, Vec<usize>) {
        let n = tree.size_total();
        let mut children = vec![Vec::new(); n];
        for v in 1..n {
            children[tree.parent(v).unwrap()].push(v);
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(children[v].iter().copied());
        }
        let mut new_id = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            new_id[v] = i;
        }
        let mut parent = vec![ROOT_PARENT; n];
        for v in 1..n {
            parent[new_id[v]] = new_id[tree.parent(v).unwrap()] as u32;
        }
        (Tree::from_parents(parent).unwrap(), new_id)
    }

    proptest! {
        #[test]
        fn summaries_are_consistent_and_order_free(seed in any::<u64>(), z in 0.5f64..20.0, y in 0.0f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let law = OffspringLaw::geometric_half();
            let tree = loop {
                if let Sampled::Complete(t) = sample_free(&law, &mut rng, 300) {
                    if t.size_total() > 1 {
                        break t;
                    }
                }
            };
            let steps = sample_steps(&tree, &StepLaw::symmetric(1.5).unwrap().sampler().unwrap(), &mut rng);
            let w = run_walk_with_steps(&tree, &steps).unwrap();
            prop_assert!(w.is_consistent());

            let (m, new_id) = mirror(&tree);
            let mut msteps = vec![0.0; steps.len()];
            for v in 1..tree.size_total() {
                msteps[new_id[v] - 1] = steps[v - 1];
            }
            prop_assert_eq!(run_walk_with_steps(&m, &msteps).unwrap(), w);

            let e = big_jump_events(&tree, &steps, z, y).unwrap();
            prop_assert!(!e.violation_with_big_jump);
            prop_assert_eq!(e.delta, w.delta);
        }
    }
}
