//! Counting compromised-node configurations that sever a segment.
//!
//! Only the `N - 2` interior nodes can be compromised. With `m` of them
//! compromised, the attack succeeds iff at least `c` consecutive interior
//! nodes are compromised; `f(N, m, c)` counts those placements. Two closed
//! forms are provided (inclusion-exclusion and a generating-function
//! coefficient) along with a brute-force enumerator used as the oracle.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

/// Default ceiling on the number of subsets [`f_bruteforce`] will visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 26;

/// `f(N, m, c)` together with its arguments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunCountResult {
    pub n_nodes: usize,
    pub compromised: usize,
    pub density: usize,
    #[serde(serialize_with = "biguint_str")]
    pub count: BigUint,
}

fn biguint_str<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(10))
}

impl RunCountResult {
    pub fn compute(n_nodes: usize, compromised: usize, density: usize) -> Result<Self> {
        Ok(Self {
            n_nodes,
            compromised,
            density,
            count: f_inclusion_exclusion(n_nodes, compromised, density)?,
        })
    }
}

/// Exact and lowest-order attack probability.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackProbability<T> {
    pub exact: T,
    pub approx: T,
    /// `p <= (1/(N-c-1))^(1/c)`, i.e. `approx <= 1`.
    pub regime_valid: bool,
}

/// `C(a, b)`, zero when `b < 0` or `b > a`.
pub fn binomial(a: usize, b: i64) -> BigUint {
    if b < 0 || b as u64 > a as u64 {
        return BigUint::zero();
    }
    let b = (b as usize).min(a - b as usize);
    let mut acc = BigUint::one();
    for i in 0..b {
        acc *= a - i;
        acc /= i + 1;
    }
    acc
}

fn check_count_args(n: usize, m: usize, c: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::TooFewNodes(n));
    }
    if c < 1 || c > n - 2 {
        return Err(Error::param("c", c, format!("1 <= c <= N-2 = {}", n - 2)));
    }
    if m > n - 2 {
        return Err(Error::param("m", m, format!("0 <= m <= N-2 = {}", n - 2)));
    }
    Ok(())
}

/// `Σ_{j=1}^{⌊m/c⌋} (-1)^{j+1} C(N-m-1, j) C(N-2-cj, m-cj)`.
pub fn f_inclusion_exclusion(n: usize, m: usize, c: usize) -> Result<BigUint> {
    check_count_args(n, m, c)?;
    let mut total = BigInt::zero();
    for j in 1..=m / c {
        let term = BigInt::from(binomial(n - m - 1, j as i64))
            * BigInt::from(binomial(n - 2 - c * j, (m - c * j) as i64));
        if j % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    match total.sign() {
        Sign::Minus => Err(Error::Inconsistency(format!(
            "negative run count {total} for N={n} m={m} c={c}"
        ))),
        _ => Ok(total.magnitude().clone()),
    }
}

/// `C(N-2, m) - [x^m] (1 + x + ... + x^{c-1})^{N-m-1}`.
pub fn f_generating_function(n: usize, m: usize, c: usize) -> Result<BigUint> {
    check_count_args(n, m, c)?;
    let all = binomial(n - 2, m as i64);
    let avoiding = truncated_power_coefficient(c, n - m - 1, m);
    if avoiding > all {
        return Err(Error::Inconsistency(format!(
            "coefficient exceeds C(N-2, m) for N={n} m={m} c={c}"
        )));
    }
    Ok(all - avoiding)
}

/// `[x^degree] (1 + x + ... + x^{width-1})^power`, expanding only the
/// coefficients up to `degree`.
fn truncated_power_coefficient(width: usize, power: usize, degree: usize) -> BigUint {
    let mut coeffs = vec![BigUint::zero(); degree + 1];
    coeffs[0] = BigUint::one();
    let mut prefix = vec![BigUint::zero(); degree + 2];
    for _ in 0..power {
        for d in 0..=degree {
            prefix[d + 1] = &prefix[d] + &coeffs[d];
        }
        // new[d] = old[d-width+1] + ... + old[d]
        for d in 0..=degree {
            let lo = (d + 1).saturating_sub(width);
            coeffs[d] = &prefix[d + 1] - &prefix[lo];
        }
    }
    coeffs.swap_remove(degree)
}

pub fn f_bruteforce(n: usize, m: usize, c: usize) -> Result<BigUint> {
    f_bruteforce_capped(n, m, c, DEFAULT_ENUMERATION_CAP)
}

/// Visits every `m`-subset of the interior positions and counts those with
/// a run of at least `c` consecutive positions.
pub fn f_bruteforce_capped(n: usize, m: usize, c: usize, cap: u64) -> Result<BigUint> {
    check_count_args(n, m, c)?;
    let slots = n - 2;
    let subsets = binomial(slots, m as i64);
    if subsets > BigUint::from(cap) {
        return Err(Error::CapExceeded {
            what: "subset enumeration",
            needed: subsets.to_str_radix(10),
            cap,
        });
    }
    let mut hits: u64 = 0;
    let mut chosen: Vec<usize> = (0..m).collect();
    loop {
        if longest_run(&chosen) >= c {
            hits += 1;
        }
        if !next_combination(&mut chosen, slots) {
            break;
        }
    }
    Ok(BigUint::from(hits))
}

/// Longest block of consecutive values in a sorted slice.
fn longest_run(sorted: &[usize]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<usize> = None;
    for &x in sorted {
        run = match prev {
            Some(p) if p + 1 == x => run + 1,
            _ => 1,
        };
        best = best.max(run);
        prev = Some(x);
    }
    best
}

/// Advances to the next `k`-combination of `0..slots` in lexicographic
/// order; false once exhausted.
fn next_combination(chosen: &mut [usize], slots: usize) -> bool {
    let k = chosen.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if chosen[i] < slots - k + i {
            chosen[i] += 1;
            for j in i + 1..k {
                chosen[j] = chosen[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn check_probability<T: Scalar>(name: &'static str, p: &T) -> Result<()> {
    if p.is_probability() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{p:?}"), "0 <= value <= 1"))
    }
}

/// Bernoulli mass `C(N-2, m) p^m (1-p)^{N-m-2}`.
pub fn p_compromise_m<T: Scalar>(n: usize, m: usize, p: &T) -> Result<T> {
    if n < 3 {
        return Err(Error::TooFewNodes(n));
    }
    if m > n - 2 {
        return Err(Error::param("m", m, format!("0 <= m <= N-2 = {}", n - 2)));
    }
    check_probability("p", p)?;
    let q = T::one() - p.clone();
    Ok(T::from_biguint(&binomial(n - 2, m as i64)) * p.powu(m) * q.powu(n - 2 - m))
}

/// `f(N, m, c) / C(N-2, m)`.
pub fn p_success_given_m<T: Scalar>(n: usize, m: usize, c: usize) -> Result<T> {
    let hits = f_inclusion_exclusion(n, m, c)?;
    Ok(T::from_ratio(&hits, &binomial(n - 2, m as i64)))
}

/// `Σ_{m=0}^{N-2} p(s|m) p_m`.
pub fn p_success_exact<T: Scalar>(n: usize, c: usize, p: &T) -> Result<T> {
    check_count_args(n, 0, c)?;
    check_probability("p", p)?;
    let mut acc = CompensatedSum::default();
    // p(s|m) = 0 below m = c.
    for m in c..=n - 2 {
        acc.add(p_success_given_m::<T>(n, m, c)? * p_compromise_m(n, m, p)?);
    }
    // Rounding can push a float sum a few ulps past 1.
    let total = acc.total();
    Ok(if total > T::one() { T::one() } else { total })
}

/// `(N-c-1) p^c`, valid iff it does not exceed 1.
pub fn lowest_order_attack<T: Scalar>(n: usize, c: usize, p: &T) -> Result<(T, bool)> {
    check_count_args(n, 0, c)?;
    check_probability("p", p)?;
    let value = T::from_count(n - c - 1) * p.powu(c);
    let valid = value <= T::one();
    Ok((value, valid))
}

pub fn p_success_approx<T: Scalar>(n: usize, c: usize, p: &T) -> Result<AttackProbability<T>> {
    let (approx, regime_valid) = lowest_order_attack(n, c, p)?;
    Ok(AttackProbability {
        exact: p_success_exact(n, c, p)?,
        approx,
        regime_valid,
    })
}

/// `(1/(N-c-1))^(1/c)`, the largest `p` for which the lowest-order term is
/// a reasonable estimate.
pub fn attack_regime_bound(n: usize, c: usize) -> Result<f64> {
    check_count_args(n, 0, c)?;
    Ok((1.0 / (n - c - 1) as f64).powf(1.0 / c as f64))
}
