//! Family specifications and the built-in families.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EnumerateError;
use crate::instances::{w_partial_sum, Kind};
use crate::ratio::{self, frac, Ratio};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "fn", content = "c", rename_all = "lowercase")]
pub enum DensityFn {
    D,
    Dprime,
    Dmod,
    Dc(u64),
}

/// Which rule applies to a candidate; the first matching rule wins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "if", rename_all = "snake_case")]
pub enum Condition {
    Always,
    Contains { value: u64 },
    /// The repeated top value lies in `lo..=hi`.
    TopIn { lo: u64, hi: u64 },
}

/// `func(A) > bound` (strict) or `func(A) ≥ bound`, paired with the
/// opposite test on the reduced instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityRule {
    pub when: Condition,
    pub func: DensityFn,
    #[serde(with = "ratio::serde_str")]
    pub bound: Ratio,
    pub strict: bool,
}

/// `D(A ≤ cutoff) > bound`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeConstraint {
    pub cutoff: u64,
    #[serde(with = "ratio::serde_str")]
    pub bound: Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Minimality {
    /// Removing one maximum element must fail the density rule.
    RemoveMax,
    /// Removing the largest element that is at most 16 must fail the rule.
    RemoveMaxBelow17,
    /// No minimality; `max_jobs` bounds the family instead.
    None,
}

/// Three equal top periods `m1 = m2 = m3` in `lo..=hi`, above every other
/// period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopTriple {
    pub lo: u64,
    pub hi: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub kind: Kind,
    /// Largest period allowed outside the top triple.
    pub max_element: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_triple: Option<TopTriple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub range_constraints: Vec<RangeConstraint>,
    pub rules: Vec<DensityRule>,
    pub minimality: Minimality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jobs: Option<usize>,
}

impl FamilySpec {
    pub fn validate(&self) -> Result<(), EnumerateError> {
        let bad = |why: &str| Err(EnumerateError::InvalidSpec(self.name.clone(), why.to_string()));
        if self.max_element == 0 {
            return bad("max_element must be at least 1");
        }
        if self.rules.is_empty() {
            return bad("at least one density rule is required");
        }
        if let Some(t) = self.top_triple {
            if t.lo > t.hi || t.lo <= self.max_element {
                return bad("top triple range must be nonempty and lie above max_element");
            }
        }
        for r in &self.rules {
            if r.func == DensityFn::Dc(0) {
                return bad("D_c needs c >= 1");
            }
            if let Condition::TopIn { .. } = r.when {
                if self.top_triple.is_none() {
                    return bad("top_in conditions need a top triple");
                }
            }
        }
        match self.minimality {
            Minimality::None if self.max_jobs.is_none() => {
                bad("without minimality the family is unbounded; set max_jobs")
            }
            Minimality::RemoveMaxBelow17 if self.top_triple.is_none() || self.max_element > 16 => {
                bad("remove_max_below17 needs a top triple and max_element <= 16")
            }
            _ => Ok(()),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::to_string(self).expect("spec serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    /// The same family with every period outside the top triple capped at
    /// `cap`.
    pub fn truncated(&self, cap: u64) -> FamilySpec {
        let mut s = self.clone();
        s.max_element = s.max_element.min(cap);
        s
    }
}

fn rule(func: DensityFn, bound: Ratio, strict: bool) -> DensityRule {
    DensityRule { when: Condition::Always, func, bound, strict }
}

fn plain(name: &str, func: DensityFn, bound: Ratio, strict: bool, ranges: Vec<RangeConstraint>) -> FamilySpec {
    FamilySpec {
        name: name.to_string(),
        kind: Kind::Covering,
        max_element: 16,
        top_triple: None,
        range_constraints: ranges,
        rules: vec![rule(func, bound, strict)],
        minimality: Minimality::RemoveMax,
        max_jobs: None,
    }
}

fn tripled(name: &str, rules: Vec<DensityRule>, ranges: Vec<RangeConstraint>) -> FamilySpec {
    FamilySpec {
        name: name.to_string(),
        kind: Kind::Covering,
        max_element: 16,
        top_triple: Some(TopTriple { lo: 17, hi: 22 }),
        range_constraints: ranges,
        rules,
        minimality: Minimality::RemoveMaxBelow17,
        max_jobs: None,
    }
}

/// `Σ_{i=0}^{9} 1/(2^i + 1)`.
pub fn s9() -> Ratio {
    w_partial_sum(9)
}

pub fn case7_sub1_bound() -> Ratio {
    frac(1269799, 1077120)
}

pub fn case7_sub2_bound() -> Ratio {
    frac(1252969, 1077120)
}

/// The families behind every computer-checked claim, thresholds exact.
pub fn builtin_specs() -> Vec<FamilySpec> {
    let mut out = Vec::new();
    out.push(plain("CLAIM5", DensityFn::Dprime, frac(13, 10) - frac(2, 16), false, vec![]));

    for (case, cutoff, bound) in [("CASE3", 4, frac(5, 6)), ("CASE4", 8, frac(31, 30))] {
        let range = || vec![RangeConstraint { cutoff, bound: bound.clone() }];
        let loose = s9() - frac(2, 16);
        let tight = s9() - frac(7, 4) * frac(1, 16);
        out.push(plain(&format!("{case}-SUB1"), DensityFn::D, loose, false, range()));
        out.push(plain(&format!("{case}-SUB2"), DensityFn::Dprime, tight.clone(), false, range()));
        out.push(tripled(&format!("{case}-SUB3"), vec![rule(DensityFn::Dprime, tight, false)], range()));
    }

    out.push(plain("CASE5", DensityFn::D, frac(103, 90), true, vec![]));
    out.push(plain("CASE6", DensityFn::Dmod, frac(1841, 1530) - frac(3, 4) * frac(1, 16), true, vec![]));
    out.push(plain("CASE7-SUB1", DensityFn::Dprime, case7_sub1_bound(), true, vec![]));

    let b = case7_sub2_bound();
    let mut sub2 = plain("CASE7-SUB2", DensityFn::Dc(10), b.clone(), true, vec![]);
    sub2.rules = vec![
        DensityRule { when: Condition::Contains { value: 9 }, func: DensityFn::Dc(10), bound: &b - frac(1, 72), strict: true },
        DensityRule { when: Condition::Contains { value: 10 }, func: DensityFn::Dc(10), bound: &b - frac(1, 90), strict: true },
        rule(DensityFn::Dc(10), b.clone(), true),
    ];
    out.push(sub2);

    let top = |lo, hi, c| DensityRule { when: Condition::TopIn { lo, hi }, func: DensityFn::Dc(c), bound: b.clone(), strict: true };
    out.push(tripled("CASE7-SUB3", vec![top(17, 18, 8), top(19, 20, 9), top(21, 22, 10)], vec![]));
    out
}

pub fn builtin_spec(name: &str) -> Option<FamilySpec> {
    builtin_specs().into_iter().find(|s| s.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::int;

    #[test]
    fn thresholds() {
        let c5 = builtin_spec("CLAIM5").unwrap();
        assert_eq!(c5.rules[0].bound, frac(47, 40));
        assert!(!c5.rules[0].strict);
        let case5 = builtin_spec("CASE5").unwrap();
        assert_eq!(case5.rules[0].bound, frac(103, 90));
        assert_eq!(case5.minimality, Minimality::RemoveMax);
        let sub3 = builtin_spec("CASE3-SUB3").unwrap();
        assert_eq!(sub3.top_triple, Some(TopTriple { lo: 17, hi: 22 }));
        assert_eq!(sub3.range_constraints[0].bound, frac(5, 6));
        assert_eq!(builtin_spec("CASE6").unwrap().rules[0].bound, frac(1841, 1530) - frac(3, 64));
        assert_eq!(builtin_specs().len(), 12);
        for s in builtin_specs() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn case7_constants() {
        let w5 = frac(1, 2) + frac(1, 3) + frac(1, 5) + frac(1, 9) + frac(1, 17);
        assert_eq!(w5.clone() - frac(1, 32), frac(28691, 24480));
        assert_eq!(frac(1, 33) - frac(3, 4) * frac(1, 32), frac(29, 4224));
        assert_eq!(frac(28691, 24480) + frac(29, 4224), case7_sub1_bound());
        let sub2 = frac(103, 90) + (frac(1, 17) - frac(3, 64)) + (frac(1, 33) - frac(3, 128));
        assert_eq!(sub2, case7_sub2_bound());
        assert_eq!(frac(1, 8) - frac(1, 9), frac(1, 72));
        assert!(case7_sub1_bound() > int(1));
    }

    #[test]
    fn validation() {
        let mut s = builtin_spec("CASE5").unwrap();
        s.minimality = Minimality::None;
        assert!(s.validate().is_err());
        s.max_jobs = Some(3);
        assert!(s.validate().is_ok());
        let mut t = builtin_spec("CASE3-SUB3").unwrap();
        t.top_triple = Some(TopTriple { lo: 10, hi: 22 });
        assert!(t.validate().is_err());
    }

    #[test]
    fn fingerprint_is_stable() {
        let a = builtin_spec("CASE5").unwrap();
        assert_eq!(a.fingerprint(), builtin_spec("case5").unwrap().fingerprint());
        assert_ne!(a.fingerprint(), builtin_spec("CLAIM5").unwrap().fingerprint());
        let back: FamilySpec = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
