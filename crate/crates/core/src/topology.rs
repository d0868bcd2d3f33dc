//! Banded trusted-node segments.
//!
//! A segment is `N` serially ordered nodes, numbered from 1, where node `i`
//! holds a QKD link to each of the next `c` nodes. Links only point forward.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(N, c)` descriptor of a banded segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSegment", into = "RawSegment")]
pub struct NetworkSegment {
    n_nodes: usize,
    density: usize,
}

#[derive(Serialize, Deserialize)]
struct RawSegment {
    n: usize,
    c: usize,
}

impl TryFrom<RawSegment> for NetworkSegment {
    type Error = Error;

    fn try_from(raw: RawSegment) -> Result<Self> {
        make_segment(raw.n, raw.c)
    }
}

impl From<NetworkSegment> for RawSegment {
    fn from(seg: NetworkSegment) -> Self {
        RawSegment {
            n: seg.n_nodes,
            c: seg.density,
        }
    }
}

/// Directed QKD link between two nodes, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
}

impl Link {
    pub const fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }

    /// Number of nodes skipped plus one.
    pub fn span(&self) -> usize {
        self.to - self.from
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.from, self.to)
    }
}

/// Validates `(n_nodes, density)` and builds the segment.
pub fn make_segment(n_nodes: usize, density: usize) -> Result<NetworkSegment> {
    if n_nodes < 3 {
        return Err(Error::TooFewNodes(n_nodes));
    }
    if density < 1 || density > n_nodes - 1 {
        return Err(Error::DensityOutOfRange {
            n_nodes,
            density,
            max: n_nodes - 1,
        });
    }
    Ok(NetworkSegment { n_nodes, density })
}

impl NetworkSegment {
    pub fn new(n_nodes: usize, density: usize) -> Result<Self> {
        make_segment(n_nodes, density)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn density(&self) -> usize {
        self.density
    }

    /// Nodes `2..=N-1`.
    pub fn interior_count(&self) -> usize {
        self.n_nodes - 2
    }

    pub fn interior_nodes(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.n_nodes - 1
    }

    /// `c(2N - c - 1) / 2`, which equals `c(N - (c+1)/2)`.
    pub fn edge_count(&self) -> usize {
        let c = self.density;
        c * (2 * self.n_nodes - c - 1) / 2
    }

    pub fn contains_node(&self, node: usize) -> bool {
        (1..=self.n_nodes).contains(&node)
    }

    pub fn contains_link(&self, link: &Link) -> bool {
        self.contains_node(link.from)
            && self.contains_node(link.to)
            && link.to > link.from
            && link.span() <= self.density
    }

    /// All links ordered by `from`, then `to`.
    pub fn edges(&self) -> Vec<Link> {
        let mut out = Vec::with_capacity(self.edge_count());
        for from in 1..self.n_nodes {
            for to in from + 1..=(from + self.density).min(self.n_nodes) {
                out.push(Link::new(from, to));
            }
        }
        out
    }

    /// `{node+1, ..., min(node+c, N)}`.
    pub fn out_neighbors(&self, node: usize) -> Result<Vec<usize>> {
        self.check_node(node)?;
        Ok((node + 1..=(node + self.density).min(self.n_nodes)).collect())
    }

    /// `{max(node-c, 1), ..., node-1}`.
    pub fn in_neighbors(&self, node: usize) -> Result<Vec<usize>> {
        self.check_node(node)?;
        Ok((node.saturating_sub(self.density).max(1)..node).collect())
    }

    /// Links leaving node 1.
    pub fn source_links(&self) -> Vec<Link> {
        (2..=1 + self.density).map(|to| Link::new(1, to)).collect()
    }

    /// Links entering node N.
    pub fn sink_links(&self) -> Vec<Link> {
        let n = self.n_nodes;
        (n - self.density..n).map(|from| Link::new(from, n)).collect()
    }

    /// Position of `link` in [`edges`](Self::edges).
    pub fn edge_index(&self, link: &Link) -> Option<usize> {
        if !self.contains_link(link) {
            return None;
        }
        let c = self.density;
        let n = self.n_nodes;
        // Nodes before `from` each contribute min(c, N - node) links.
        let before: usize = (1..link.from).map(|node| c.min(n - node)).sum();
        Some(before + link.span() - 1)
    }

    /// Forward sweep over node order: is there a 1→N path whose interior
    /// nodes satisfy `node_ok` and whose links satisfy `link_ok`?
    ///
    /// Runs in `O(N·c)`; endpoints are never tested against `node_ok`.
    pub fn has_clean_path(
        &self,
        mut node_ok: impl FnMut(usize) -> bool,
        mut link_ok: impl FnMut(Link) -> bool,
    ) -> bool {
        let n = self.n_nodes;
        let mut reach = vec![false; n + 1];
        reach[1] = true;
        for to in 2..=n {
            if to != n && !node_ok(to) {
                continue;
            }
            let lo = to.saturating_sub(self.density).max(1);
            reach[to] = (lo..to).any(|from| reach[from] && link_ok(Link::new(from, to)));
        }
        reach[n]
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if self.contains_node(node) {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node,
                n_nodes: self.n_nodes,
            })
        }
    }

    pub(crate) fn check_link(&self, link: &Link) -> Result<()> {
        if self.contains_link(link) {
            Ok(())
        } else {
            Err(Error::NotAnEdge {
                from: link.from,
                to: link.to,
            })
        }
    }
}

/// Free-function form of [`NetworkSegment::edges`].
pub fn edges(seg: &NetworkSegment) -> Vec<Link> {
    seg.edges()
}

/// Free-function form of [`NetworkSegment::out_neighbors`].
pub fn out_neighbors(seg: &NetworkSegment, node: usize) -> Result<Vec<usize>> {
    seg.out_neighbors(node)
}

/// Edge list as `from,to` CSV rows with a header.
pub fn edges_csv(seg: &NetworkSegment) -> String {
    let mut out = String::from("from,to\n");
    for link in seg.edges() {
        out.push_str(&format!("{},{}\n", link.from, link.to));
    }
    out
}
