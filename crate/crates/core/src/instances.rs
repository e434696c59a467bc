//! Instance model and the density functions used throughout the crate.
//!
//! A [`TaskPeriods`] is a sorted multiset of positive periods tagged with the
//! problem it belongs to. Periods are exact rationals: solvers only ever see
//! integral instances, but fold outputs and covering intermediates may carry
//! fractional periods such as `7/2`.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::{self, int, Ratio};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstanceError {
    #[error("period {0} is not strictly positive")]
    NonPositive(String),
    #[error("cannot parse period {0:?}")]
    Parse(String),
    #[error("period {0} is not an integer")]
    NotInteger(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no power of two p up to {limit} satisfies D(A <= p) > D(W <= p)")]
    NoThreshold { limit: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Packing,
    Covering,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Packing => "packing",
            Kind::Covering => "covering",
        })
    }
}

impl FromStr for Kind {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "packing" => Ok(Kind::Packing),
            "covering" => Ok(Kind::Covering),
            other => Err(InstanceError::InvalidArgument(format!("unknown kind {other:?}"))),
        }
    }
}

/// A multiset of task periods kept in nondecreasing order.
///
/// Job `i` of an instance (0-based internally, 1-based in every external
/// format) is the `i`-th smallest period.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskPeriods {
    kind: Kind,
    #[serde(with = "crate::ratio::serde_vec_str")]
    periods: Vec<Ratio>,
}

impl TaskPeriods {
    pub fn new(kind: Kind, periods: impl IntoIterator<Item = Ratio>) -> Result<Self, InstanceError> {
        let mut periods: Vec<Ratio> = periods.into_iter().collect();
        if let Some(bad) = periods.iter().find(|p| !p.is_positive()) {
            return Err(InstanceError::NonPositive(bad.to_string()));
        }
        periods.sort();
        Ok(TaskPeriods { kind, periods })
    }

    pub fn from_ints(kind: Kind, periods: &[u64]) -> Result<Self, InstanceError> {
        Self::new(kind, periods.iter().map(|&p| Ratio::from_integer(p.into())))
    }

    /// Convenience constructor for literal integer packing instances.
    ///
    /// Panics on a zero period.
    pub fn packing(periods: &[u64]) -> Self {
        Self::from_ints(Kind::Packing, periods).expect("positive periods")
    }

    /// Convenience constructor for literal integer covering instances.
    ///
    /// Panics on a zero period.
    pub fn covering(periods: &[u64]) -> Self {
        Self::from_ints(Kind::Covering, periods).expect("positive periods")
    }

    /// Parses a comma-separated list such as `2,3,7/2`.
    pub fn parse(kind: Kind, list: &str) -> Result<Self, InstanceError> {
        let list = list.trim().trim_start_matches('(').trim_end_matches(')');
        if list.trim().is_empty() {
            return Self::new(kind, []);
        }
        let periods = list
            .split(',')
            .map(|s| ratio::parse(s).ok_or_else(|| InstanceError::Parse(s.trim().to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(kind, periods)
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn periods(&self) -> &[Ratio] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn max(&self) -> Option<&Ratio> {
        self.periods.last()
    }

    pub fn min(&self) -> Option<&Ratio> {
        self.periods.first()
    }

    pub fn is_integral(&self) -> bool {
        self.periods.iter().all(|p| p.is_integer())
    }

    /// The periods as machine integers, or an error naming the first
    /// fractional period.
    pub fn integer_periods(&self) -> Result<Vec<u64>, InstanceError> {
        self.periods
            .iter()
            .map(|p| ratio::to_u64(p).ok_or_else(|| InstanceError::NotInteger(p.to_string())))
            .collect()
    }

    pub fn with_kind(&self, kind: Kind) -> Self {
        TaskPeriods { kind, periods: self.periods.clone() }
    }

    /// `A ⊔ (p)`.
    pub fn with(&self, p: Ratio) -> Result<Self, InstanceError> {
        let mut periods = self.periods.clone();
        periods.push(p);
        Self::new(self.kind, periods)
    }

    /// `A ⊖ (p)`; `None` when `p` is absent.
    pub fn without(&self, p: &Ratio) -> Option<Self> {
        let pos = self.periods.iter().position(|q| q == p)?;
        let mut periods = self.periods.clone();
        periods.remove(pos);
        Some(TaskPeriods { kind: self.kind, periods })
    }

    /// `A ⊖ max(A)`.
    pub fn without_max(&self) -> Self {
        let mut periods = self.periods.clone();
        periods.pop();
        TaskPeriods { kind: self.kind, periods }
    }

    pub fn contains(&self, p: &Ratio) -> bool {
        self.periods.binary_search(p).is_ok()
    }
}

impl fmt::Display for TaskPeriods {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, p) in self.periods.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// `D(A) = Σ 1/a_i`.
pub fn density(a: &TaskPeriods) -> Ratio {
    a.periods.iter().map(|p| p.recip()).fold(Ratio::zero(), |acc, x| acc + x)
}

/// `D'(A)`: periods above 8 are charged as `1/(a_i − 1)`.
pub fn density_prime(a: &TaskPeriods) -> Ratio {
    shifted_sum(a, &int(8))
}

/// `D_c(A)`: periods above `c` are charged as `1/(a_i − 1)`.
pub fn density_shifted(a: &TaskPeriods, c: u64) -> Result<Ratio, InstanceError> {
    if c == 0 {
        return Err(InstanceError::InvalidArgument("shift cutoff must be at least 1".into()));
    }
    Ok(shifted_sum(a, &Ratio::from_integer(c.into())))
}

fn shifted_sum(a: &TaskPeriods, cutoff: &Ratio) -> Ratio {
    let one = Ratio::one();
    a.periods
        .iter()
        .map(|p| if p <= cutoff { p.recip() } else { (p - &one).recip() })
        .fold(Ratio::zero(), |acc, x| acc + x)
}

/// Weight of one integer period under `D_mod`.
pub fn density_mod_weight(p: u64) -> Ratio {
    match p {
        0 => panic!("zero period"),
        1..=5 => Ratio::new(1.into(), p.into()),
        6 => ratio::frac(3, 17),
        7 => ratio::frac(3, 19),
        8 => ratio::frac(1, 8),
        _ => Ratio::new(2.into(), (2 * p - 1).into()),
    }
}

/// `D_mod(A)`, defined on integer periods only.
pub fn density_mod(a: &TaskPeriods) -> Result<Ratio, InstanceError> {
    let ints = a.integer_periods()?;
    Ok(ints.into_iter().map(density_mod_weight).fold(Ratio::zero(), |acc, x| acc + x))
}

/// The terms `2, 3, 5, 9, …, 2^i + 1` of the reference instance `W` that do
/// not exceed `limit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferencePrefix {
    pub limit: Ratio,
    pub terms: Vec<u64>,
}

impl ReferencePrefix {
    pub fn new(limit: &Ratio) -> Self {
        let mut terms = Vec::new();
        let mut pow = 1u64;
        while Ratio::from_integer((pow + 1).into()) <= *limit {
            terms.push(pow + 1);
            pow = pow.checked_mul(2).expect("reference prefix limit too large");
        }
        ReferencePrefix { limit: limit.clone(), terms }
    }

    pub fn density(&self) -> Ratio {
        self.terms
            .iter()
            .map(|&t| Ratio::new(1.into(), t.into()))
            .fold(Ratio::zero(), |acc, x| acc + x)
    }
}

/// `D(W ≤ p)`.
pub fn w_prefix_density(p: &Ratio) -> Ratio {
    ReferencePrefix::new(p).density()
}

/// `Σ_{i=0}^{k} 1/(2^i + 1)`, the finite surrogates of the reference series.
pub fn w_partial_sum(k: u32) -> Ratio {
    (0..=k)
        .map(|i| Ratio::new(1.into(), ((1u64 << i) + 1).into()))
        .fold(Ratio::zero(), |acc, x| acc + x)
}

/// `A ≤ r`: the sub-multiset of periods not exceeding `r`.
pub fn restrict(a: &TaskPeriods, r: &Ratio) -> TaskPeriods {
    TaskPeriods {
        kind: a.kind,
        periods: a.periods.iter().filter(|p| *p <= r).cloned().collect(),
    }
}

/// `N_i(A) = |{a ∈ A : i < a ≤ 2i}|`, counted with multiplicity.
pub fn count_in_range(a: &TaskPeriods, i: &Ratio) -> usize {
    let hi = i * int(2);
    a.periods.iter().filter(|p| *p > i && **p <= hi).count()
}

/// The threshold `E`: the least power of two `p ≥ 1` with
/// `D(A ≤ p) > D(W ≤ p)`.
///
/// The scan stops at `2^⌈log2 max(A)⌉`; failing to find `p` by then means the
/// instance is below the reference density.
pub fn compute_e(a: &TaskPeriods) -> Result<Ratio, InstanceError> {
    let Some(max) = a.max() else {
        return Err(InstanceError::NoThreshold { limit: "1".into() });
    };
    let top = ratio::ceil_log2(max).max(0);
    for k in 0..=top {
        let p = ratio::pow2(k);
        if density(&restrict(a, &p)) > w_prefix_density(&p) {
            return Ok(p);
        }
    }
    Err(InstanceError::NoThreshold { limit: ratio::pow2(top).to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn cov(p: &[u64]) -> TaskPeriods {
        TaskPeriods::covering(p)
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&TaskPeriods::packing(&[2, 3, 6])), int(1));
        assert_eq!(density(&cov(&[])), int(0));
        assert_eq!(density(&cov(&[4, 4, 4, 4])), int(1));
    }

    #[test]
    fn density_prime_examples() {
        assert_eq!(density_prime(&cov(&[8])), frac(1, 8));
        assert_eq!(density_prime(&cov(&[9])), frac(1, 8));
        assert_eq!(density_prime(&cov(&[2, 9, 16])), frac(83, 120));
    }

    #[test]
    fn density_shifted_examples() {
        assert_eq!(density_shifted(&cov(&[9]), 10).unwrap(), frac(1, 9));
        assert_eq!(density_shifted(&cov(&[11]), 10).unwrap(), frac(1, 10));
        assert_eq!(density_shifted(&cov(&[2, 9, 16]), 8).unwrap(), frac(83, 120));
        assert!(density_shifted(&cov(&[2]), 0).is_err());
    }

    #[test]
    fn density_mod_examples() {
        assert_eq!(density_mod(&cov(&[6])).unwrap(), frac(3, 17));
        assert_eq!(density_mod(&cov(&[5])).unwrap(), frac(1, 5));
        assert_eq!(density_mod(&cov(&[9])).unwrap(), frac(2, 17));
        assert_eq!(density_mod(&cov(&[7])).unwrap(), frac(3, 19));
        assert_eq!(density_mod(&cov(&[8])).unwrap(), frac(1, 8));
        let half = TaskPeriods::new(Kind::Covering, [frac(7, 2)]).unwrap();
        assert!(matches!(density_mod(&half), Err(InstanceError::NotInteger(_))));
    }

    #[test]
    fn reference_prefix_values() {
        assert_eq!(w_prefix_density(&int(4)), frac(5, 6));
        assert_eq!(w_prefix_density(&int(8)), frac(31, 30));
        assert_eq!(w_prefix_density(&int(16)), frac(103, 90));
        assert_eq!(w_prefix_density(&int(32)), frac(1841, 1530));
        assert_eq!(w_prefix_density(&int(1)), int(0));
        assert_eq!(w_prefix_density(&int(2)), frac(1, 2));
        assert_eq!(ReferencePrefix::new(&int(17)).terms, vec![2, 3, 5, 9, 17]);
    }

    #[test]
    fn restrict_and_ranges() {
        assert_eq!(restrict(&cov(&[2, 3, 17]), &int(16)), cov(&[2, 3]));
        assert_eq!(restrict(&cov(&[2, 3]), &int(16)), cov(&[2, 3]));
        assert_eq!(restrict(&cov(&[16]), &int(16)), cov(&[16]));
        assert_eq!(count_in_range(&cov(&[9, 16, 17]), &int(8)), 2);
        assert_eq!(count_in_range(&cov(&[8]), &int(8)), 0);
        assert_eq!(count_in_range(&cov(&[16, 16]), &int(8)), 2);
    }

    #[test]
    fn threshold_e() {
        assert_eq!(compute_e(&cov(&[1, 5, 7])).unwrap(), int(1));
        assert_eq!(compute_e(&cov(&[2, 2])).unwrap(), int(2));
        // (2,3,5,9,17,33) plus enough mass to clear the reference series
        let a = cov(&[2, 3, 5, 9, 17, 33, 40, 40]);
        let e = compute_e(&a).unwrap();
        assert!(e <= int(64));
        assert!(matches!(compute_e(&cov(&[3, 100])), Err(InstanceError::NoThreshold { .. })));
        assert!(compute_e(&cov(&[])).is_err());
    }

    #[test]
    fn parse_and_display() {
        let a = TaskPeriods::parse(Kind::Covering, "7/2, 2,3").unwrap();
        assert_eq!(a.to_string(), "(2,3,7/2)");
        assert!(TaskPeriods::parse(Kind::Packing, "2,0").is_err());
        assert!(TaskPeriods::parse(Kind::Packing, "2,x").is_err());
        assert!(TaskPeriods::parse(Kind::Packing, "").unwrap().is_empty());
    }

    #[test]
    fn multiset_ops() {
        let a = cov(&[3, 2, 3]);
        assert_eq!(a.without(&int(3)).unwrap(), cov(&[2, 3]));
        assert_eq!(a.without(&int(9)), None);
        assert_eq!(a.with(int(1)).unwrap(), cov(&[1, 2, 3, 3]));
        assert_eq!(a.without_max(), cov(&[2, 3]));
        assert_eq!(cov(&[3, 2]), cov(&[2, 3]));
    }
}
