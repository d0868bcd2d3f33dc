//! Monte Carlo attack simulation.
//!
//! Each trial compromises every interior node independently with
//! probability `p_node` and intercepts every link independently with
//! probability `p_link`. The two attacks are scored separately: a node
//! attack succeeds when no route avoids the compromised nodes, a link attack
//! when every route uses an intercepted link.
//!
//! Trial `i` draws from its own ChaCha8 stream (`stream = i`) keyed by the
//! seed, so results do not depend on how trials are split across threads.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::topology::{Link, NetworkSegment};

/// Identifier of the random source, recorded in every [`TrialStats`].
pub const RNG_ALGORITHM: &str = "chacha8-stream-per-trial/v1";

/// What an adversary holds in one session.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CompromiseScenario {
    pub compromised_nodes: BTreeSet<usize>,
    pub intercepted_links: BTreeSet<Link>,
}

impl CompromiseScenario {
    pub fn new(
        seg: &NetworkSegment,
        compromised_nodes: impl IntoIterator<Item = usize>,
        intercepted_links: impl IntoIterator<Item = Link>,
    ) -> Result<Self> {
        let compromised_nodes: BTreeSet<usize> = compromised_nodes.into_iter().collect();
        let intercepted_links: BTreeSet<Link> = intercepted_links.into_iter().collect();
        for &node in &compromised_nodes {
            if !seg.interior_nodes().contains(&node) {
                return Err(Error::param("compromised node", node, "interior node 2..=N-1"));
            }
        }
        for link in &intercepted_links {
            seg.check_link(link)?;
        }
        Ok(Self {
            compromised_nodes,
            intercepted_links,
        })
    }

    pub fn nodes(seg: &NetworkSegment, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(seg, nodes, [])
    }

    pub fn links(seg: &NetworkSegment, links: impl IntoIterator<Item = Link>) -> Result<Self> {
        Self::new(seg, [], links)
    }

    pub fn is_empty(&self) -> bool {
        self.compromised_nodes.is_empty() && self.intercepted_links.is_empty()
    }
}

/// True iff some `c` consecutive interior nodes are all compromised.
///
/// Endpoints are never attacked and are ignored if present.
pub fn has_compromised_run(seg: &NetworkSegment, compromised: &BTreeSet<usize>) -> bool {
    let mut run = 0;
    for node in seg.interior_nodes() {
        run = if compromised.contains(&node) { run + 1 } else { 0 };
        if run >= seg.density() {
            return true;
        }
    }
    false
}

/// True iff no 1→N route passes only through uncompromised interior nodes.
pub fn no_clean_node_path(seg: &NetworkSegment, compromised: &BTreeSet<usize>) -> bool {
    !seg.has_clean_path(|node| !compromised.contains(&node), |_| true)
}

/// Node-attack success. Computed from the run condition; the path condition
/// is checked against it in debug builds.
pub fn node_attack_succeeds(seg: &NetworkSegment, compromised: &BTreeSet<usize>) -> bool {
    let by_run = has_compromised_run(seg, compromised);
    debug_assert_eq!(by_run, no_clean_node_path(seg, compromised));
    by_run
}

/// Link-attack success: every route contains an intercepted link.
pub fn link_attack_succeeds(seg: &NetworkSegment, intercepted: &BTreeSet<Link>) -> bool {
    !seg.has_clean_path(|_| true, |link| !intercepted.contains(&link))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialStats {
    pub segment: NetworkSegment,
    pub p_node: f64,
    pub p_link: f64,
    pub trials: u64,
    pub successes_auth: u64,
    pub successes_link: u64,
    /// Both attacks succeeded in the same trial. Diagnostic only.
    pub successes_joint: u64,
    pub estimate_auth: f64,
    pub estimate_link: f64,
    pub stderr_auth: f64,
    pub stderr_link: f64,
    pub seed: u64,
    pub rng: &'static str,
}

/// Running estimates after each batch of trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchPoint {
    pub trials: u64,
    pub estimate_auth: f64,
    pub estimate_link: f64,
    pub stderr_auth: f64,
    pub stderr_link: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    auth: u64,
    link: u64,
    joint: u64,
    disagreements: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            auth: self.auth + o.auth,
            link: self.link + o.link,
            joint: self.joint + o.joint,
            disagreements: self.disagreements + o.disagreements,
        }
    }
}

fn estimate(successes: u64, trials: u64) -> (f64, f64) {
    let est = successes as f64 / trials as f64;
    (est, (est * (1.0 - est) / trials as f64).sqrt())
}

struct TrialRunner<'a> {
    seg: &'a NetworkSegment,
    edges: Vec<Link>,
    p_node: f64,
    p_link: f64,
    base: ChaCha8Rng,
}

impl<'a> TrialRunner<'a> {
    fn new(seg: &'a NetworkSegment, p_node: f64, p_link: f64, seed: u64) -> Self {
        Self {
            seg,
            edges: seg.edges(),
            p_node,
            p_link,
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn run(&self, trial: u64) -> Tally {
        let mut rng = self.base.clone();
        rng.set_stream(trial);
        rng.set_word_pos(0);

        let n = self.seg.n_nodes();
        let c = self.seg.density();
        let mut compromised = vec![false; n + 1];
        let mut run = 0;
        let mut has_run = false;
        for node in self.seg.interior_nodes() {
            compromised[node] = rng.gen::<f64>() < self.p_node;
            run = if compromised[node] { run + 1 } else { 0 };
            has_run |= run >= c;
        }
        let mut intercepted = vec![false; self.edges.len()];
        for slot in intercepted.iter_mut() {
            *slot = rng.gen::<f64>() < self.p_link;
        }

        let path_blocked = !self.seg.has_clean_path(|node| !compromised[node], |_| true);
        let link_cut = !self.seg.has_clean_path(
            |_| true,
            |link| !intercepted[self.seg.edge_index(&link).expect("band edge")],
        );
        Tally {
            trials: 1,
            auth: has_run as u64,
            link: link_cut as u64,
            joint: (has_run && link_cut) as u64,
            disagreements: (has_run != path_blocked) as u64,
        }
    }

    fn run_range(&self, range: std::ops::Range<u64>) -> Tally {
        range
            .into_par_iter()
            .map(|t| self.run(t))
            .reduce(Tally::default, |a, b| a + b)
    }
}

fn check_inputs(p_node: f64, p_link: f64, trials: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_node) {
        return Err(Error::param("p_node", p_node, "0 <= p_node <= 1"));
    }
    if !(0.0..=1.0).contains(&p_link) {
        return Err(Error::param("p_link", p_link, "0 <= p_link <= 1"));
    }
    if trials == 0 {
        return Err(Error::param("trials", trials, "trials >= 1"));
    }
    Ok(())
}

fn stats_from(seg: &NetworkSegment, p_node: f64, p_link: f64, seed: u64, t: Tally) -> Result<TrialStats> {
    if t.disagreements > 0 {
        return Err(Error::Inconsistency(format!(
            "run-of-c and path predicates disagreed in {} trials",
            t.disagreements
        )));
    }
    let (estimate_auth, stderr_auth) = estimate(t.auth, t.trials);
    let (estimate_link, stderr_link) = estimate(t.link, t.trials);
    Ok(TrialStats {
        segment: *seg,
        p_node,
        p_link,
        trials: t.trials,
        successes_auth: t.auth,
        successes_link: t.link,
        successes_joint: t.joint,
        estimate_auth,
        estimate_link,
        stderr_auth,
        stderr_link,
        seed,
        rng: RNG_ALGORITHM,
    })
}

/// Runs `trials` independent sessions. Deterministic in `seed`.
pub fn run_trials(
    seg: &NetworkSegment,
    p_node: f64,
    p_link: f64,
    trials: u64,
    seed: u64,
) -> Result<TrialStats> {
    check_inputs(p_node, p_link, trials)?;
    let runner = TrialRunner::new(seg, p_node, p_link, seed);
    let tally = runner.run_range(0..trials);
    stats_from(seg, p_node, p_link, seed, tally)
}

/// Like [`run_trials`], also returning cumulative estimates after every
/// `batch_size` trials. The final statistics are identical to
/// [`run_trials`] with the same arguments.
pub fn run_trials_batched(
    seg: &NetworkSegment,
    p_node: f64,
    p_link: f64,
    trials: u64,
    seed: u64,
    batch_size: u64,
) -> Result<(TrialStats, Vec<BatchPoint>)> {
    check_inputs(p_node, p_link, trials)?;
    if batch_size == 0 {
        return Err(Error::param("batch_size", batch_size, "batch_size >= 1"));
    }
    let runner = TrialRunner::new(seg, p_node, p_link, seed);
    let mut total = Tally::default();
    let mut points = Vec::new();
    let mut start = 0;
    while start < trials {
        let end = (start + batch_size).min(trials);
        total = total + runner.run_range(start..end);
        let (estimate_auth, stderr_auth) = estimate(total.auth, total.trials);
        let (estimate_link, stderr_link) = estimate(total.link, total.trials);
        points.push(BatchPoint {
            trials: total.trials,
            estimate_auth,
            estimate_link,
            stderr_auth,
            stderr_link,
        });
        start = end;
    }
    Ok((stats_from(seg, p_node, p_link, seed, total)?, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::make_segment;

    fn seg(n: usize, c: usize) -> NetworkSegment {
        make_segment(n, c).unwrap()
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn links(v: &[(usize, usize)]) -> BTreeSet<Link> {
        v.iter().map(|&(a, b)| Link::new(a, b)).collect()
    }

    #[test]
    fn node_examples() {
        let s = seg(6, 2);
        assert!(node_attack_succeeds(&s, &set(&[3, 4])));
        assert!(no_clean_node_path(&s, &set(&[3, 4])));
        assert!(!node_attack_succeeds(&s, &set(&[2, 4])));
        assert!(!no_clean_node_path(&s, &set(&[2, 4])));
        assert!(!node_attack_succeeds(&s, &BTreeSet::new()));
    }

    #[test]
    fn link_examples() {
        let s = seg(6, 2);
        assert!(link_attack_succeeds(&s, &links(&[(1, 2), (1, 3)])));
        assert!(link_attack_succeeds(&s, &links(&[(4, 6), (5, 6)])));
        assert!(!link_attack_succeeds(&s, &links(&[(1, 2)])));
        assert!(link_attack_succeeds(&s, &s.edges().into_iter().collect()));
        assert!(!link_attack_succeeds(&s, &BTreeSet::new()));
    }

    #[test]
    fn predicates_agree_exhaustively() {
        for n in 3..=12 {
            for c in 1..=4usize.min(n - 1) {
                let s = seg(n, c);
                let interior: Vec<usize> = s.interior_nodes().collect();
                for mask in 0u32..(1 << interior.len()) {
                    let chosen: BTreeSet<usize> = interior
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, &v)| v)
                        .collect();
                    assert_eq!(
                        has_compromised_run(&s, &chosen),
                        no_clean_node_path(&s, &chosen),
                        "N={n} c={c} {chosen:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn scenario_validation() {
        let s = seg(6, 2);
        assert!(CompromiseScenario::nodes(&s, [1]).is_err());
        assert!(CompromiseScenario::nodes(&s, [6]).is_err());
        assert!(CompromiseScenario::links(&s, [Link::new(1, 4)]).is_err());
        let ok = CompromiseScenario::new(&s, [2, 5], [Link::new(4, 6)]).unwrap();
        assert!(!ok.is_empty());
        assert!(CompromiseScenario::default().is_empty());
    }

    #[test]
    fn zero_probabilities_never_succeed() {
        let stats = run_trials(&seg(10, 3), 0.0, 0.0, 2000, 1).unwrap();
        assert_eq!((stats.successes_auth, stats.successes_link), (0, 0));
        assert_eq!(stats.stderr_auth, 0.0);
    }

    #[test]
    fn certain_compromise_always_succeeds() {
        let stats = run_trials(&seg(10, 3), 1.0, 1.0, 500, 9).unwrap();
        assert_eq!(stats.estimate_auth, 1.0);
        assert_eq!(stats.estimate_link, 1.0);
    }

    #[test]
    fn reproducible_for_seed() {
        let s = seg(12, 3);
        let a = run_trials(&s, 0.3, 0.2, 5000, 42).unwrap();
        let b = run_trials(&s, 0.3, 0.2, 5000, 42).unwrap();
        assert_eq!(a, b);
        let c = run_trials(&s, 0.3, 0.2, 5000, 43).unwrap();
        assert_ne!(a.successes_auth, c.successes_auth);
    }

    #[test]
    fn batching_does_not_change_results() {
        let s = seg(9, 2);
        let whole = run_trials(&s, 0.25, 0.15, 3001, 7).unwrap();
        let (batched, points) = run_trials_batched(&s, 0.25, 0.15, 3001, 7, 1000).unwrap();
        assert_eq!(whole, batched);
        assert_eq!(points.len(), 4);
        assert_eq!(points.last().unwrap().trials, 3001);
        assert_eq!(points.last().unwrap().estimate_auth, whole.estimate_auth);
    }

    #[test]
    fn input_validation() {
        let s = seg(6, 2);
        assert!(run_trials(&s, 1.5, 0.0, 10, 0).is_err());
        assert!(run_trials(&s, 0.5, -0.1, 10, 0).is_err());
        assert!(run_trials(&s, 0.5, 0.1, 0, 0).is_err());
        assert!(run_trials_batched(&s, 0.5, 0.1, 10, 0, 0).is_err());
    }

    #[test]
    fn stderr_formula() {
        let stats = run_trials(&seg(8, 2), 0.4, 0.3, 4000, 5).unwrap();
        let e = stats.estimate_auth;
        assert_eq!(e, stats.successes_auth as f64 / 4000.0);
        assert!((stats.stderr_auth - (e * (1.0 - e) / 4000.0).sqrt()).abs() < 1e-15);
    }
}
