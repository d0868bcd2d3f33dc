//! Scaling of per-element failure probabilities to the whole segment.
//!
//! `ε₁` is the chance that node authentication fails on `c` consecutive
//! interior nodes, `ε₂` the chance that intercepted QKD links cover every
//! route, and `ε_qn = ε₁ + ε₂` bounds the segment's failure by composition.
//! Each component comes as a lowest-order estimate and an exact value.
//!
//! The second half of the module is the hash-length trade-off: the
//! reduction factor `c·log_{N-2}(N-c-1)` and the density maximizing it.

use num_bigint::BigUint;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{lowest_order_attack, p_success_exact};
use crate::error::{Error, Result};
use crate::roots::bisect;
use crate::scalar::{CompensatedSum, Scalar};
use crate::topology::NetworkSegment;

/// Largest density [`epsilon2_exact`] accepts; its state space is `2^c`.
pub const DEFAULT_FRONTIER_DENSITY_CAP: usize = 20;

/// Largest edge count [`epsilon2_exhaustive`] accepts by default.
pub const DEFAULT_EXHAUSTIVE_EDGE_CAP: usize = 24;

/// Absolute tolerance of [`optimal_c_root`].
pub const ROOT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams<T> {
    pub eps_auth: T,
    pub eps_qkd: T,
}

impl<T: Scalar> SecurityParams<T> {
    pub fn new(eps_auth: T, eps_qkd: T) -> Result<Self> {
        check_probability("eps_auth", &eps_auth)?;
        check_probability("eps_qkd", &eps_qkd)?;
        Ok(Self { eps_auth, eps_qkd })
    }
}

/// A lowest-order estimate and whether it is inside its validity regime.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Approximation<T> {
    pub value: T,
    pub regime_valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Approx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RegimeFlags {
    pub eps1: bool,
    pub eps2: bool,
}

/// Segment failure bound with both components. Every probability is clamped
/// to `[0, 1]`; `saturated` records whether any clamping happened.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecurityReport<T> {
    pub segment: NetworkSegment,
    pub mode: Mode,
    pub eps1_approx: T,
    pub eps1_exact: Option<T>,
    pub eps2_approx: T,
    pub eps2_exact: Option<T>,
    pub eps_qn: T,
    /// `ε₁ + ε₂` for the chosen mode before clamping.
    pub eps_qn_unclamped: T,
    pub regime_flags: RegimeFlags,
    pub saturated: bool,
}

impl<T: Scalar> SecurityReport<T> {
    pub fn to_f64(&self) -> SecurityReport<f64> {
        SecurityReport {
            segment: self.segment,
            mode: self.mode,
            eps1_approx: self.eps1_approx.as_f64(),
            eps1_exact: self.eps1_exact.as_ref().map(Scalar::as_f64),
            eps2_approx: self.eps2_approx.as_f64(),
            eps2_exact: self.eps2_exact.as_ref().map(Scalar::as_f64),
            eps_qn: self.eps_qn.as_f64(),
            eps_qn_unclamped: self.eps_qn_unclamped.as_f64(),
            regime_flags: self.regime_flags,
            saturated: self.saturated,
        }
    }
}

fn check_probability<T: Scalar>(name: &'static str, p: &T) -> Result<()> {
    if p.is_probability() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{p:?}"), "0 <= value <= 1"))
    }
}

fn check_has_interior_run(seg: &NetworkSegment) -> Result<()> {
    let n = seg.n_nodes();
    if seg.density() > n - 2 {
        return Err(Error::param(
            "c",
            seg.density(),
            format!("c <= N-2 = {} for node attacks", n - 2),
        ));
    }
    Ok(())
}

/// `ε₁ ≈ (N-c-1) ε_auth^c`.
pub fn epsilon1_approx<T: Scalar>(seg: &NetworkSegment, eps_auth: &T) -> Result<Approximation<T>> {
    check_has_interior_run(seg)?;
    check_probability("eps_auth", eps_auth)?;
    let (value, regime_valid) = lowest_order_attack(seg.n_nodes(), seg.density(), eps_auth)?;
    Ok(Approximation { value, regime_valid })
}

/// Exact authentication-attack probability with `p = ε_auth`.
pub fn epsilon1_exact<T: Scalar>(seg: &NetworkSegment, eps_auth: &T) -> Result<T> {
    check_has_interior_run(seg)?;
    check_probability("eps_auth", eps_auth)?;
    p_success_exact(seg.n_nodes(), seg.density(), eps_auth)
}

/// `ε₂ ≈ 2 ε_qkd^c` for `c > 1`, and `(N-1) ε_qkd` for the serial chain.
pub fn epsilon2_approx<T: Scalar>(seg: &NetworkSegment, eps_qkd: &T) -> Result<Approximation<T>> {
    check_probability("eps_qkd", eps_qkd)?;
    let value = if seg.density() == 1 {
        T::from_count(seg.n_nodes() - 1) * eps_qkd.clone()
    } else {
        T::from_count(2) * eps_qkd.powu(seg.density())
    };
    let regime_valid = value <= T::one();
    Ok(Approximation { value, regime_valid })
}

/// Probability that independently intercepted links (each with
/// probability `eps_qkd`) leave no clean 1→N path.
///
/// Sweeps nodes in order, tracking the distribution over which of the last
/// `c` nodes are reachable through clean links. Cost is `O(N·2^c)`.
pub fn epsilon2_exact<T: Scalar>(seg: &NetworkSegment, eps_qkd: &T) -> Result<T> {
    epsilon2_exact_capped(seg, eps_qkd, DEFAULT_FRONTIER_DENSITY_CAP)
}

pub fn epsilon2_exact_capped<T: Scalar>(
    seg: &NetworkSegment,
    eps_qkd: &T,
    density_cap: usize,
) -> Result<T> {
    check_probability("eps_qkd", eps_qkd)?;
    let c = seg.density();
    if c > density_cap {
        return Err(Error::CapExceeded {
            what: "link-reliability frontier states",
            needed: format!("2^{c}"),
            cap: 1u64 << density_cap.min(63),
        });
    }
    // miss[k] = q^k: every one of k candidate links is intercepted.
    let miss: Vec<T> = (0..=c).map(|k| eps_qkd.powu(k)).collect();
    let full = (1usize << c) - 1;
    // Bit k set: node (j-1-k) is reachable over clean links.
    let mut dist = vec![T::zero(); full + 1];
    dist[1] = T::one();
    for _node in 2..seg.n_nodes() {
        let mut next = vec![T::zero(); full + 1];
        for (mask, weight) in dist.iter().enumerate() {
            if weight.is_zero() {
                continue;
            }
            let reachable_preds = mask.count_ones() as usize;
            let blocked = weight.clone() * miss[reachable_preds].clone();
            let open = weight.clone() - blocked.clone();
            let shifted = (mask << 1) & full;
            next[shifted] = next[shifted].clone() + blocked;
            next[shifted | 1] = next[shifted | 1].clone() + open;
        }
        dist = next;
    }
    let mut fail = CompensatedSum::default();
    for (mask, weight) in dist.into_iter().enumerate() {
        if !weight.is_zero() {
            fail.add(weight * miss[mask.count_ones() as usize].clone());
        }
    }
    Ok(fail.total())
}

/// Number of intercepted-link sets of each size that cut every route,
/// by visiting all `2^E` subsets.
pub fn link_cut_counts(seg: &NetworkSegment, edge_cap: usize) -> Result<Vec<u64>> {
    let edges = seg.edges();
    let e = edges.len();
    if e > edge_cap {
        return Err(Error::CapExceeded {
            what: "link subset enumeration",
            needed: format!("2^{e}"),
            cap: 1u64 << edge_cap.min(63),
        });
    }
    let mut counts = vec![0u64; e + 1];
    for mask in 0u64..(1u64 << e) {
        let clean = |link| {
            let i = seg.edge_index(&link).expect("band edge");
            mask & (1 << i) == 0
        };
        if !seg.has_clean_path(|_| true, clean) {
            counts[mask.count_ones() as usize] += 1;
        }
    }
    Ok(counts)
}

/// `ε₂` by exhaustive subset enumeration: `Σ_k cuts_k q^k (1-q)^{E-k}`.
pub fn epsilon2_exhaustive<T: Scalar>(seg: &NetworkSegment, eps_qkd: &T) -> Result<T> {
    check_probability("eps_qkd", eps_qkd)?;
    let counts = link_cut_counts(seg, DEFAULT_EXHAUSTIVE_EDGE_CAP)?;
    let e = counts.len() - 1;
    let keep = T::one() - eps_qkd.clone();
    let mut acc = CompensatedSum::default();
    for (k, count) in counts.iter().enumerate() {
        if *count > 0 {
            acc.add(T::from_biguint(&BigUint::from(*count)) * eps_qkd.powu(k) * keep.powu(e - k));
        }
    }
    Ok(acc.total())
}

fn clamp_unit<T: Scalar>(value: T, saturated: &mut bool) -> T {
    if value > T::one() {
        *saturated = true;
        T::one()
    } else if value < T::zero() {
        *saturated = true;
        T::zero()
    } else {
        value
    }
}

/// `ε_qn = ε₁ + ε₂`.
///
/// Exact components that cannot be evaluated are reported as `None` in
/// approximate mode and as an error in exact mode.
pub fn epsilon_qn<T: Scalar>(
    seg: &NetworkSegment,
    params: &SecurityParams<T>,
    mode: Mode,
) -> Result<SecurityReport<T>> {
    let e1 = epsilon1_approx(seg, &params.eps_auth)?;
    let e2 = epsilon2_approx(seg, &params.eps_qkd)?;
    let e1_exact = epsilon1_exact(seg, &params.eps_auth);
    let e2_exact = epsilon2_exact(seg, &params.eps_qkd);
    let (eps1, eps2, e1_exact, e2_exact) = match mode {
        Mode::Exact => {
            let (a, b) = (e1_exact?, e2_exact?);
            (a.clone(), b.clone(), Some(a), Some(b))
        }
        Mode::Approx => (e1.value.clone(), e2.value.clone(), e1_exact.ok(), e2_exact.ok()),
    };
    let unclamped = eps1 + eps2;
    let mut saturated = false;
    let eps1_approx = clamp_unit(e1.value, &mut saturated);
    let eps2_approx = clamp_unit(e2.value, &mut saturated);
    let eps1_exact = e1_exact.map(|v| clamp_unit(v, &mut saturated));
    let eps2_exact = e2_exact.map(|v| clamp_unit(v, &mut saturated));
    let eps_qn = clamp_unit(unclamped.clone(), &mut saturated);
    Ok(SecurityReport {
        segment: *seg,
        mode,
        eps1_approx,
        eps1_exact,
        eps2_approx,
        eps2_exact,
        eps_qn,
        eps_qn_unclamped: unclamped,
        regime_flags: RegimeFlags {
            eps1: e1.regime_valid,
            eps2: e2.regime_valid,
        },
        saturated,
    })
}

/// `(N-c-1) ln(N-c-1) - c`; zero at the optimal real density.
pub fn optimal_c_residual<F: Float>(n: usize, c: F) -> F {
    let rest = F::from(n).expect("node count fits") - c - F::one();
    rest * rest.ln() - c
}

/// Real root of `(N-c-1) ln(N-c-1) = c` on `[1, N-2]`.
pub fn optimal_c_root<F: Float>(n: usize) -> Result<F> {
    if n < 4 {
        return Err(Error::param("N", n, "N >= 4"));
    }
    let lo = F::one();
    let hi = F::from(n - 2).expect("node count fits");
    let tol = F::from(ROOT_TOLERANCE).expect("tolerance fits");
    Ok(bisect(|c| optimal_c_residual(n, c), lo, hi, tol, 200)?.root)
}

/// `(N-1) ln(N-1) / (ln(N-1) + 2)`, a closed-form estimate of the root.
pub fn optimal_c_estimate<F: Float>(n: usize) -> F {
    let m = F::from(n - 1).expect("node count fits");
    let two = F::one() + F::one();
    m * m.ln() / (m.ln() + two)
}

/// Factor by which hash output may shrink at equal security,
/// `c·log_{N-2}(N-c-1)`.
pub fn hash_reduction_factor<F: Float>(n: usize, c: usize) -> Result<F> {
    if n < 5 {
        return Err(Error::param("N", n, "N >= 5"));
    }
    if c < 1 || c >= n - 2 {
        return Err(Error::param("c", c, format!("1 <= c < N-2 = {}", n - 2)));
    }
    let base = F::from(n - 2).expect("node count fits").ln();
    let rest = F::from(n - c - 1).expect("node count fits").ln();
    Ok(F::from(c).expect("density fits") * rest / base)
}

/// Integer density in `[1, N-3]` with the largest reduction factor; ties go
/// to the smaller density.
pub fn optimal_c_integer(n: usize) -> Result<usize> {
    if n < 5 {
        return Err(Error::param("N", n, "N >= 5"));
    }
    let mut best = (1usize, hash_reduction_factor::<f64>(n, 1)?);
    for c in 2..n - 2 {
        let factor = hash_reduction_factor::<f64>(n, c)?;
        if factor > best.1 {
            best = (c, factor);
        }
    }
    Ok(best.0)
}

/// Summary of the density optimization for one segment length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityOptimum {
    #[serde(rename = "N")]
    pub n: usize,
    pub c_root: f64,
    pub c_integer: usize,
    pub factor: f64,
    pub c_estimate: f64,
}

pub fn optimize_density(n: usize) -> Result<DensityOptimum> {
    let c_integer = optimal_c_integer(n)?;
    Ok(DensityOptimum {
        n,
        c_root: optimal_c_root(n)?,
        c_integer,
        factor: hash_reduction_factor(n, c_integer)?,
        c_estimate: optimal_c_estimate(n),
    })
}
