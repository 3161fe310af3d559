//! Exact integer evaluation of the closed-form topological lower bounds.
//!
//! All arithmetic is checked; inputs outside the stated hypotheses of the
//! formulas are rejected rather than extrapolated.

use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoundsError {
    #[error("{0}")]
    OutOfStatedRange(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("integer overflow while evaluating a bound")]
    Overflow,
}

pub type BoundsResult<T> = Result<T, BoundsError>;

fn checked(expr: Option<u64>) -> BoundsResult<u64> {
    expr.ok_or(BoundsError::Overflow)
}

/// Genus of the orthonormal k-frame manifold in R^n under the signed
/// permutation action: `n k - k(k+1)/2 + 1` (equals dimension + 1).
/// Stated for `n >= 3`, `1 <= k <= n`.
pub fn stiefel_genus(n: u64, k: u64) -> BoundsResult<u64> {
    if n < 3 {
        return Err(BoundsError::OutOfStatedRange(format!("n = {n}, need n >= 3")));
    }
    if k < 1 || k > n {
        return Err(BoundsError::OutOfStatedRange(format!("k = {k}, need 1 <= k <= n = {n}")));
    }
    let nk = checked(n.checked_mul(k))?;
    let tri = checked(k.checked_mul(k + 1))? / 2;
    checked(nk.checked_sub(tri).and_then(|v| v.checked_add(1)))
}

/// Category lower bound for unordered k-point configurations of projective
/// d-space: `d k - k(k-1)/2 + 1`. Stated for `d >= 3`, `k >= 1`.
pub fn config_cat_lower(d: u64, k: u64) -> BoundsResult<u64> {
    if d < 3 {
        return Err(BoundsError::OutOfStatedRange(format!("d = {d}, need d >= 3")));
    }
    if k < 1 {
        return Err(BoundsError::OutOfStatedRange("k must be >= 1".into()));
    }
    let dk = checked(d.checked_mul(k))?;
    let tri = checked(k.checked_mul(k - 1))? / 2;
    checked(dk.checked_sub(tri).and_then(|v| v.checked_add(1)))
}

/// Sum of the base-p digits of k.
pub fn digit_sum(mut k: u64, p: u64) -> u64 {
    let mut sum = 0;
    while k > 0 {
        sum += k % p;
        k /= p;
    }
    sum
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Digit-sum configuration bound `(d-1)(k - D_p(k)) + 1` where `D_p(k)` is
/// the base-p digit sum of k. Stated for prime p, `k >= 1`, `d >= 2`.
pub fn padic_digit_bound(d: u64, k: u64, p: u64) -> BoundsResult<u64> {
    if !is_prime(p) {
        return Err(BoundsError::NotPrime(p));
    }
    if k < 1 {
        return Err(BoundsError::OutOfStatedRange("k must be >= 1".into()));
    }
    if d < 2 {
        return Err(BoundsError::OutOfStatedRange(format!("d = {d}, need d >= 2")));
    }
    // D_p(k) <= k always, so the subtraction cannot underflow.
    let inner = k - digit_sum(k, p);
    checked((d - 1).checked_mul(inner).and_then(|v| v.checked_add(1)))
}

/// Guaranteed number of critical orbits in dimension n: `n(n-1)/2 + 1`.
/// Stated for `n >= 2`; agrees with `stiefel_genus(n, n)` for `n >= 3`.
pub fn critical_count_lower(n: u64) -> BoundsResult<u64> {
    if n < 2 {
        return Err(BoundsError::OutOfStatedRange(format!("n = {n}, need n >= 2")));
    }
    let tri = checked(n.checked_mul(n - 1))? / 2;
    checked(tri.checked_add(1))
}

/// Evaluated bounds for one (n, k) instance, optionally with configuration
/// bounds for a given d and prime set.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct BoundsReport {
    pub n: u64,
    pub k: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    pub primes: Vec<u64>,
    pub genus: u64,
    pub cat_quotient: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_cat_lower: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub digit_sum_bounds: BTreeMap<u64, u64>,
    pub critical_count_lower: u64,
    /// Largest of the bounds evaluated in this report.
    pub best_bound: u64,
}

pub fn bounds_report(n: u64, k: u64, d: Option<u64>, primes: &[u64]) -> BoundsResult<BoundsReport> {
    let genus = stiefel_genus(n, k)?;
    let config = d.map(|d| config_cat_lower(d, k)).transpose()?;
    let mut digit_sum_bounds = BTreeMap::new();
    if let Some(d) = d {
        for &p in primes {
            digit_sum_bounds.insert(p, padic_digit_bound(d, k, p)?);
        }
    }
    let critical = critical_count_lower(n)?;
    let best_bound = [Some(genus), config, Some(critical)]
        .into_iter()
        .flatten()
        .chain(digit_sum_bounds.values().copied())
        .max()
        .expect("at least the genus is present");
    Ok(BoundsReport {
        n,
        k,
        d,
        primes: primes.to_vec(),
        genus,
        cat_quotient: genus,
        config_cat_lower: config,
        digit_sum_bounds,
        critical_count_lower: critical,
        best_bound,
    })
}
