//! Rooted ordered trees in flat parent/depth form, their Łukasiewicz
//! encoding, and Galton–Watson samplers.
//!
//! Vertex 0 is the root and every non-root vertex has `parent[v] < v`.
//! Sampled trees are labelled in depth-first preorder.

mod sampling;

pub use sampling::{
    sample_free, sample_free_size, sample_height_conditioned, sample_size_conditioned,
    sample_size_conditioned_with, Sampled, SizeMethod,
};

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parent entry of the root.
pub const ROOT_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    parent: Vec<u32>,
    depth: Vec<u32>,
    leaf: Vec<bool>,
    height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub size_total: u64,
    pub nonroot: u64,
    pub height: u64,
    pub leaf_count: u64,
}

impl Tree {
    pub fn single_root() -> Self {
        Tree {
            parent: vec![ROOT_PARENT],
            depth: vec![0],
            leaf: vec![true],
            height: 0,
        }
    }

    /// Builds a tree from a parent array with `parent[0] == ROOT_PARENT` and
    /// `parent[v] < v` otherwise.
    pub fn from_parents(parent: Vec<u32>) -> Result<Self> {
        if parent.is_empty() {
            return Err(Error::InvalidTree("empty parent array".into()));
        }
        if parent.len() > u32::MAX as usize {
            return Err(Error::InvalidTree("too many vertices".into()));
        }
        if parent[0] != ROOT_PARENT {
            return Err(Error::InvalidTree("vertex 0 must be the root".into()));
        }
        let n = parent.len();
        let mut depth = vec![0u32; n];
        let mut leaf = vec![true; n];
        let mut height = 0;
        for v in 1..n {
            let p = parent[v];
            if p as usize >= v {
                return Err(Error::InvalidTree(format!(
                    "parent[{v}] = {p} is not an earlier vertex"
                )));
            }
            depth[v] = depth[p as usize] + 1;
            leaf[p as usize] = false;
            height = height.max(depth[v]);
        }
        Ok(Tree {
            parent,
            depth,
            leaf,
            height,
        })
    }

    /// Path with `n` vertices.
    pub fn path(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("a tree needs at least one vertex"));
        }
        let parent = std::iter::once(ROOT_PARENT)
            .chain(0..n as u32 - 1)
            .collect();
        Tree::from_parents(parent)
    }

    /// Root with `leaves` children.
    pub fn star(leaves: usize) -> Result<Self> {
        let parent = std::iter::once(ROOT_PARENT)
            .chain(std::iter::repeat_n(0, leaves))
            .collect();
        Tree::from_parents(parent)
    }

    /// Decodes a preorder sequence of offspring counts.
    pub fn from_offspring(counts: &[u32]) -> Result<Self> {
        let n = counts.len();
        if n == 0 {
            return Err(Error::InvalidTree("empty offspring sequence".into()));
        }
        let mut parent = Vec::with_capacity(n);
        let mut depth = Vec::with_capacity(n);
        let mut leaf = Vec::with_capacity(n);
        let mut height = 0;
        // (vertex, children still to attach)
        let mut stack: Vec<(u32, u32)> = Vec::new();
        for (v, &c) in counts.iter().enumerate() {
            let (p, d) = if v == 0 {
                (ROOT_PARENT, 0)
            } else {
                let Some(top) = stack.last_mut() else {
                    return Err(Error::InvalidTree(format!(
                        "sequence completes a tree before vertex {v}"
                    )));
                };
                let p = top.0;
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
                (p, depth[p as usize] + 1)
            };
            parent.push(p);
            depth.push(d);
            leaf.push(c == 0);
            height = height.max(d);
            if c > 0 {
                stack.push((v as u32, c));
            }
        }
        if !stack.is_empty() {
            return Err(Error::InvalidTree(
                "sequence ends before the tree is complete".into(),
            ));
        }
        Ok(Tree {
            parent,
            depth,
            leaf,
            height,
        })
    }

    pub fn size_total(&self) -> usize {
        self.parent.len()
    }

    /// Number of non-root vertices.
    pub fn nonroot(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn parents(&self) -> &[u32] {
        &self.parent
    }

    pub fn depths(&self) -> &[u32] {
        &self.depth
    }

    pub fn leaf_flags(&self) -> &[bool] {
        &self.leaf
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.leaf[v]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        let p = self.parent[v];
        (p != ROOT_PARENT).then_some(p as usize)
    }

    /// Number of children of the root.
    pub fn root_degree(&self) -> usize {
        self.parent[1..].iter().filter(|&&p| p == 0).count()
    }

    /// Offspring count of every vertex.
    pub fn offspring_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.parent.len()];
        for &p in &self.parent[1..] {
            counts[p as usize] += 1;
        }
        counts
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            size_total: self.size_total() as u64,
            nonroot: self.nonroot() as u64,
            height: self.height as u64,
            leaf_count: self.leaf.iter().filter(|&&l| l).count() as u64,
        }
    }

    /// Rechecks every structural invariant from scratch.
    pub fn validate(&self) -> Result<()> {
        let n = self.parent.len();
        if n == 0 || self.depth.len() != n || self.leaf.len() != n {
            return Err(Error::InvalidTree("array lengths disagree".into()));
        }
        if self.parent[0] != ROOT_PARENT || self.depth[0] != 0 {
            return Err(Error::InvalidTree("bad root".into()));
        }
        let mut has_child = vec![false; n];
        let mut height = 0;
        for v in 1..n {
            let p = self.parent[v] as usize;
            if p >= v {
                return Err(Error::InvalidTree(format!(
                    "parent[{v}] = {p} is not an earlier vertex"
                )));
            }
            if self.depth[v] != self.depth[p] + 1 {
                return Err(Error::InvalidTree(format!("depth[{v}] inconsistent")));
            }
            has_child[p] = true;
            height = height.max(self.depth[v]);
        }
        if height != self.height {
            return Err(Error::InvalidTree("height is not the maximal depth".into()));
        }
        if has_child.iter().zip(&self.leaf).any(|(&c, &l)| c == l) {
            return Err(Error::InvalidTree(
                "leaf flags disagree with parents".into(),
            ));
        }
        Ok(())
    }

    /// Depth-first encoding, children visited in increasing index order.
    pub fn encode_luk(&self) -> LukPath {
        let n = self.parent.len();
        let counts = self.offspring_counts();
        // children in CSR form
        let mut start = vec![0usize; n + 1];
        for v in 0..n {
            start[v + 1] = start[v] + counts[v] as usize;
        }
        let mut fill = start.clone();
        let mut children = vec![0u32; n.saturating_sub(1)];
        for v in 1..n {
            let p = self.parent[v] as usize;
            children[fill[p]] = v as u32;
            fill[p] += 1;
        }
        let mut increments = Vec::with_capacity(n);
        let mut stack = vec![0u32];
        while let Some(v) = stack.pop() {
            let v = v as usize;
            increments.push(counts[v] as i64 - 1);
            stack.extend(children[start[v]..start[v + 1]].iter().rev());
        }
        LukPath { increments }
    }

    /// Inverse of [`Tree::encode_luk`] for preorder-labelled trees.
    pub fn decode_luk(path: &LukPath) -> Result<Self> {
        path.validate()?;
        let counts: Vec<u32> = path.increments.iter().map(|&x| (x + 1) as u32).collect();
        Tree::from_offspring(&counts)
    }

    /// `size_total` on the first line, parents on the second (root = -1).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.size_total())?;
        let mut line = String::with_capacity(self.parent.len() * 7);
        for (v, &p) in self.parent.iter().enumerate() {
            if v > 0 {
                line.push(' ');
            }
            if p == ROOT_PARENT {
                line.push_str("-1");
            } else {
                line.push_str(&p.to_string());
            }
        }
        writeln!(w, "{line}")?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let size_line = lines
            .next()
            .ok_or_else(|| Error::parse("tree", "missing size line"))??;
        let size: usize = size_line
            .trim()
            .parse()
            .map_err(|e| Error::parse("tree", format!("bad size `{}`: {e}", size_line.trim())))?;
        let parent_line = lines
            .next()
            .ok_or_else(|| Error::parse("tree", "missing parent line"))??;
        let mut parent = Vec::with_capacity(size);
        for tok in parent_line.split_whitespace() {
            let p: i64 = tok
                .parse()
                .map_err(|e| Error::parse("tree", format!("bad parent `{tok}`: {e}")))?;
            parent.push(if p == -1 {
                ROOT_PARENT
            } else if p >= 0 && p < u32::MAX as i64 {
                p as u32
            } else {
                return Err(Error::parse("tree", format!("bad parent `{tok}`")));
            });
        }
        if parent.len() != size {
            return Err(Error::parse(
                "tree",
                format!("declared {size} vertices, found {}", parent.len()),
            ));
        }
        Tree::from_parents(parent)
    }
}

/// Increments `Z_v - 1` in depth-first order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LukPath {
    pub increments: Vec<i64>,
}

impl LukPath {
    /// Every increment is at least -1 and the partial sums first reach -1 at
    /// the last step.
    pub fn validate(&self) -> Result<()> {
        if self.increments.is_empty() {
            return Err(Error::InvalidPath("empty path".into()));
        }
        let last = self.increments.len() - 1;
        let mut sum = 0i64;
        for (i, &x) in self.increments.iter().enumerate() {
            if x < -1 {
                return Err(Error::InvalidPath(format!(
                    "increment {x} at step {i} is below -1"
                )));
            }
            sum += x;
            if sum < 0 && i != last {
                return Err(Error::InvalidPath(format!(
                    "path hits -1 early, at step {}",
                    i + 1
                )));
            }
        }
        if sum != -1 {
            return Err(Error::InvalidPath(format!("path ends at {sum}, not -1")));
        }
        Ok(())
    }
}

impl fmt::Display for LukPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.increments.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl FromStr for LukPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let increments = s
            .split_whitespace()
            .map(|t| {
                t.parse::<i64>()
                    .map_err(|e| Error::parse("Łukasiewicz path", format!("`{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LukPath { increments })
    }
}
