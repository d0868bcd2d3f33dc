//! First-to-last routes, their count, and the per-link routing scheme.
//!
//! A route is a strictly increasing node sequence `1 = v0 < v1 < ... = N`
//! with hops of length `1..=c`, i.e. a composition of `N - 1` into parts of
//! size at most `c`. Their number is the `N`-th `c`-annacci number.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::topology::{make_segment, Link, NetworkSegment};

/// Default ceiling on materialized routes.
pub const DEFAULT_ROUTE_CAP: u64 = 1 << 20;

/// One route, as its node sequence.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Route {
    pub nodes: Vec<usize>,
}

impl Route {
    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.nodes.windows(2).map(|w| Link::new(w[0], w[1]))
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn uses_link(&self, link: &Link) -> bool {
        self.links().any(|l| l == *link)
    }

    pub fn visits(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// Node that follows `node` on this route.
    pub fn next_hop(&self, node: usize) -> Option<usize> {
        let pos = self.nodes.binary_search(&node).ok()?;
        self.nodes.get(pos + 1).copied()
    }
}

/// Every route of a segment, in lexicographic order. Route `i` (1-based)
/// carries the key `K_i`.
#[derive(Clone, Debug, Serialize)]
pub struct RouteSet {
    pub segment: NetworkSegment,
    pub routes: Vec<Route>,
    #[serde(serialize_with = "biguint_as_string")]
    pub count: BigUint,
}

impl RouteSet {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Route by 1-based key index.
    pub fn route(&self, index: usize) -> Option<&Route> {
        index.checked_sub(1).and_then(|i| self.routes.get(i))
    }

    /// `(index, route)` pairs with 1-based indices.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, &Route)> {
        self.routes.iter().enumerate().map(|(i, r)| (i + 1, r))
    }
}

fn biguint_as_string<S: Serializer>(value: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&value.to_str_radix(10))
}

/// `G(0..=len)` for the order-`c` recurrence `G(k) = G(k-1) + ... + G(k-c)`
/// with `G(0) = 1` and `G(k < 0) = 0`. `G(k)` counts compositions of `k`
/// into parts `<= c`.
pub fn cannacci_sequence(density: usize, len: usize) -> Vec<BigUint> {
    let mut seq: Vec<BigUint> = Vec::with_capacity(len + 1);
    seq.push(BigUint::from(1u32));
    // Sliding window sum of the last `density` terms.
    let mut window = BigUint::from(1u32);
    for k in 1..=len {
        let next = window.clone();
        window += &next;
        if k >= density {
            window -= &seq[k - density];
        }
        seq.push(next);
    }
    seq
}

/// Number of 1→N routes, `F^(c)_N = G(N - 1)`. Exact for any size.
pub fn cannacci_count(n_nodes: usize, density: usize) -> Result<BigUint> {
    let seg = make_segment(n_nodes, density)?;
    Ok(route_count(&seg))
}

pub fn route_count(seg: &NetworkSegment) -> BigUint {
    cannacci_sequence(seg.density(), seg.n_nodes() - 1)
        .pop()
        .unwrap_or_else(BigUint::zero)
}

pub fn enumerate_routes(seg: &NetworkSegment) -> Result<RouteSet> {
    enumerate_routes_capped(seg, DEFAULT_ROUTE_CAP)
}

/// Materializes all routes in lexicographic order, refusing when there are
/// more than `cap` of them.
pub fn enumerate_routes_capped(seg: &NetworkSegment, cap: u64) -> Result<RouteSet> {
    let count = route_count(seg);
    let fits = count.to_u64().is_some_and(|c| c <= cap);
    if !fits {
        return Err(Error::CapExceeded {
            what: "route enumeration",
            needed: count.to_str_radix(10),
            cap,
        });
    }
    let mut routes = Vec::with_capacity(count.to_usize().unwrap_or(0));
    let mut path = vec![1usize];
    extend_routes(seg, &mut path, &mut routes);
    debug_assert_eq!(BigUint::from(routes.len()), count);
    Ok(RouteSet {
        segment: *seg,
        routes,
        count,
    })
}

fn extend_routes(seg: &NetworkSegment, path: &mut Vec<usize>, out: &mut Vec<Route>) {
    let last = *path.last().expect("path starts at node 1");
    if last == seg.n_nodes() {
        out.push(Route { nodes: path.clone() });
        return;
    }
    for next in last + 1..=(last + seg.density()).min(seg.n_nodes()) {
        path.push(next);
        extend_routes(seg, path, out);
        path.pop();
    }
}

/// For every link, the ascending list of route indices whose key travels
/// over it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingScheme {
    pub segment: NetworkSegment,
    pub per_link_bundles: BTreeMap<Link, Vec<usize>>,
}

impl RoutingScheme {
    pub fn bundle(&self, link: &Link) -> &[usize] {
        self.per_link_bundles
            .get(link)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Links in ascending `(from, to)` order.
    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.per_link_bundles.keys()
    }

    /// Outgoing links of `node` with their bundles.
    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = (&Link, &Vec<usize>)> {
        self.per_link_bundles
            .range(Link::new(node, 0)..Link::new(node + 1, 0))
    }

    pub fn route_count(&self) -> usize {
        self.outgoing(1).map(|(_, b)| b.len()).sum()
    }
}

impl Serialize for RoutingScheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.per_link_bundles.len()))?;
        for (link, bundle) in &self.per_link_bundles {
            map.serialize_entry(&link.to_string(), bundle)?;
        }
        map.end()
    }
}

pub fn build_routing_scheme(rs: &RouteSet) -> RoutingScheme {
    let mut per_link_bundles: BTreeMap<Link, Vec<usize>> = rs
        .segment
        .edges()
        .into_iter()
        .map(|l| (l, Vec::new()))
        .collect();
    for (index, route) in rs.indexed() {
        for link in route.links() {
            per_link_bundles
                .get_mut(&link)
                .expect("route links are segment edges")
                .push(index);
        }
    }
    per_link_bundles.retain(|_, b| !b.is_empty());
    RoutingScheme {
        segment: rs.segment,
        per_link_bundles,
    }
}

/// Size of the smallest link set meeting every route.
///
/// Computed as a unit-capacity max flow from node 1 to node N (Menger), so
/// the result is independent of the structural claim that it equals `c`.
pub fn min_link_cut_size(seg: &NetworkSegment) -> usize {
    let n = seg.n_nodes();
    let mut used = vec![false; seg.edge_count()];
    let edge = |from: usize, to: usize| seg.edge_index(&Link::new(from, to)).expect("band edge");
    let mut flow = 0;
    loop {
        let mut parent: Vec<Option<usize>> = vec![None; n + 1];
        parent[1] = Some(1);
        let mut queue = VecDeque::from([1usize]);
        while let Some(u) = queue.pop_front() {
            if u == n {
                break;
            }
            let forward = u + 1..=(u + seg.density()).min(n);
            let backward = u.saturating_sub(seg.density()).max(1)..u;
            for v in forward {
                if parent[v].is_none() && !used[edge(u, v)] {
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
            for w in backward {
                if parent[w].is_none() && used[edge(w, u)] {
                    parent[w] = Some(u);
                    queue.push_back(w);
                }
            }
        }
        if parent[n].is_none() {
            return flow;
        }
        let mut v = n;
        while v != 1 {
            let u = parent[v].expect("on augmenting path");
            if u < v {
                used[edge(u, v)] = true;
            } else {
                used[edge(v, u)] = false;
            }
            v = u;
        }
        flow += 1;
    }
}
