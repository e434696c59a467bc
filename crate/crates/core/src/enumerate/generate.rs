//! Canonical-order generation of family members.
//!
//! Candidates are nondecreasing period vectors visited in lexicographic
//! order by a pre-order walk. All density arithmetic runs on integers scaled
//! by the common denominator of every weight and bound the spec can touch.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use super::spec::{Condition, DensityFn, FamilySpec, Minimality};
use super::EnumerateError;
use crate::instances::{density_mod_weight, TaskPeriods};
use crate::ratio::Ratio;

/// Exact weight of one period under `func`.
pub fn weight(func: DensityFn, v: u64) -> Ratio {
    let inv = |x: u64| Ratio::new(BigInt::one(), x.into());
    match func {
        DensityFn::D => inv(v),
        DensityFn::Dprime => {
            if v <= 8 {
                inv(v)
            } else {
                inv(v - 1)
            }
        }
        DensityFn::Dc(c) => {
            if v <= c {
                inv(v)
            } else {
                inv(v - 1)
            }
        }
        DensityFn::Dmod => density_mod_weight(v),
    }
}

struct Compiled {
    spec: FamilySpec,
    triple: Option<(u64, u64)>,
    /// `rule_w[r][v]`, scaled.
    rule_w: Vec<Vec<i128>>,
    rule_b: Vec<i128>,
    /// `range_w[c][v]` is the scaled `1/v` when `v ≤ cutoff`, else 0.
    range_w: Vec<Vec<i128>>,
    range_b: Vec<i128>,
    /// Range constraints that become final once the tail passes the cutoff.
    range_settles: Vec<bool>,
}

impl Compiled {
    fn new(spec: &FamilySpec) -> Result<Self, EnumerateError> {
        spec.validate()?;
        let triple = spec.top_triple.map(|t| (t.lo, t.hi));
        let vmax = triple.map_or(spec.max_element, |(_, hi)| hi.max(spec.max_element));

        let mut rule_r: Vec<Vec<Ratio>> = Vec::new();
        for r in &spec.rules {
            rule_r.push((0..=vmax).map(|v| if v == 0 { Ratio::from_integer(0.into()) } else { weight(r.func, v) }).collect());
        }
        let mut range_r: Vec<Vec<Ratio>> = Vec::new();
        for c in &spec.range_constraints {
            range_r.push(
                (0..=vmax)
                    .map(|v| if v == 0 || v > c.cutoff { Ratio::from_integer(0.into()) } else { weight(DensityFn::D, v) })
                    .collect(),
            );
        }
        let mut scale = BigInt::one();
        let all = rule_r
            .iter()
            .chain(&range_r)
            .flatten()
            .chain(spec.rules.iter().map(|r| &r.bound))
            .chain(spec.range_constraints.iter().map(|c| &c.bound));
        for x in all {
            scale = scale.lcm(x.denom());
        }
        if scale.bits() > 100 {
            return Err(EnumerateError::InvalidSpec(spec.name.clone(), "common denominator too large".into()));
        }
        let to_i = |x: &Ratio| -> i128 { (x.numer() * (&scale / x.denom())).to_i128().expect("scaled value fits") };
        Ok(Compiled {
            spec: spec.clone(),
            triple,
            rule_w: rule_r.iter().map(|w| w.iter().map(to_i).collect()).collect(),
            rule_b: spec.rules.iter().map(|r| to_i(&r.bound)).collect(),
            range_w: range_r.iter().map(|w| w.iter().map(to_i).collect()).collect(),
            range_b: spec.range_constraints.iter().map(|c| to_i(&c.bound)).collect(),
            range_settles: spec
                .range_constraints
                .iter()
                .map(|c| triple.is_none_or(|(lo, _)| c.cutoff < lo))
                .collect(),
        })
    }

    fn meets(&self, r: usize, x: i128) -> bool {
        if self.spec.rules[r].strict {
            x > self.rule_b[r]
        } else {
            x >= self.rule_b[r]
        }
    }

    fn width(&self) -> usize {
        self.rule_w.len() + self.range_w.len()
    }

    fn add(&self, sums: &[i128], v: u64, out: &mut Vec<i128>) {
        out.clear();
        let v = v as usize;
        let nr = self.rule_w.len();
        for (i, s) in sums.iter().enumerate() {
            let w = if i < nr { self.rule_w[i][v] } else { self.range_w[i - nr][v] };
            out.push(s + w);
        }
    }

    /// Whether every extension of a node with these sums already fails
    /// minimality.
    fn subtree_exhausted(&self, sums: &[i128]) -> bool {
        self.spec.minimality != Minimality::None && (0..self.rule_w.len()).all(|r| self.meets(r, sums[r]))
    }

    /// A settled range constraint that fails kills the node and its subtree.
    fn dead(&self, sums: &[i128], last: u64) -> bool {
        let nr = self.rule_w.len();
        self.spec.range_constraints.iter().enumerate().any(|(c, rc)| {
            self.range_settles[c] && rc.cutoff < last && sums[nr + c] <= self.range_b[c]
        })
    }

    fn is_member(&self, tail: &[u64], sums: &[i128], top: Option<u64>) -> bool {
        let Some(&last) = tail.last() else { return false };
        let jobs = tail.len() + if top.is_some() { 3 } else { 0 };
        if self.spec.max_jobs.is_some_and(|m| jobs > m) {
            return false;
        }
        let nr = self.rule_w.len();
        let contains = |x: u64| top == Some(x) || tail.binary_search(&x).is_ok();
        let Some(r) = self.spec.rules.iter().position(|rule| match rule.when {
            Condition::Always => true,
            Condition::Contains { value } => contains(value),
            Condition::TopIn { lo, hi } => top.is_some_and(|t| lo <= t && t <= hi),
        }) else {
            return false;
        };
        let w = &self.rule_w[r];
        let full = sums[r] + top.map_or(0, |t| 3 * w[t as usize]);
        if !self.meets(r, full) {
            return false;
        }
        let removed = match (self.spec.minimality, top) {
            (Minimality::None, _) => None,
            (Minimality::RemoveMax, Some(t)) => Some(t),
            (Minimality::RemoveMax, None) | (Minimality::RemoveMaxBelow17, _) => Some(last),
        };
        if let Some(m) = removed {
            if self.meets(r, full - w[m as usize]) {
                return false;
            }
        }
        self.spec.range_constraints.iter().enumerate().all(|(c, _)| {
            let extra = top.map_or(0, |t| 3 * self.range_w[c][t as usize]);
            sums[nr + c] + extra > self.range_b[c]
        })
    }

    fn instance(&self, tail: &[u64], top: Option<u64>) -> TaskPeriods {
        let mut p = tail.to_vec();
        if let Some(t) = top {
            p.extend([t, t, t]);
        }
        TaskPeriods::from_ints(self.spec.kind, &p).expect("positive periods")
    }
}

struct Frame {
    emitted: bool,
    children: bool,
    next_v: u64,
    next_t: u64,
}

/// Lazily yields the members of a family in canonical order.
pub struct FamilyIter {
    c: Compiled,
    tail: Vec<u64>,
    sums: Vec<Vec<i128>>,
    frames: Vec<Frame>,
    scratch: Vec<i128>,
    visited: u64,
}

impl FamilyIter {
    /// Nodes of the candidate tree visited so far.
    pub fn visited(&self) -> u64 {
        self.visited
    }

    fn children_allowed(&self, sums: &[i128]) -> bool {
        let reserved = if self.c.triple.is_some() { 3 } else { 0 };
        let room = self.c.spec.max_jobs.is_none_or(|m| self.tail.len() + 1 + reserved <= m);
        room && !self.c.subtree_exhausted(sums)
    }
}

impl Iterator for FamilyIter {
    type Item = TaskPeriods;

    fn next(&mut self) -> Option<TaskPeriods> {
        let max_el = self.c.spec.max_element;
        let (lo, hi) = self.c.triple.unwrap_or((1, 0));
        loop {
            let f = self.frames.last_mut()?;
            let sums = self.sums.last().unwrap();
            if !f.emitted {
                f.emitted = true;
                if self.c.triple.is_none() && self.c.is_member(&self.tail, sums, None) {
                    return Some(self.c.instance(&self.tail, None));
                }
            }
            if f.children && f.next_v <= max_el {
                let v = f.next_v;
                f.next_v += 1;
                self.visited += 1;
                let mut next = std::mem::take(&mut self.scratch);
                self.c.add(sums, v, &mut next);
                if self.c.dead(&next, v) {
                    self.scratch = next;
                    continue;
                }
                self.tail.push(v);
                let children = self.children_allowed(&next);
                self.frames.push(Frame { emitted: false, children, next_v: v, next_t: lo });
                self.sums.push(next);
                continue;
            }
            if f.next_t <= hi && !self.tail.is_empty() {
                let t = f.next_t;
                f.next_t += 1;
                if self.c.is_member(&self.tail, sums, Some(t)) {
                    return Some(self.c.instance(&self.tail, Some(t)));
                }
                continue;
            }
            self.frames.pop();
            self.tail.pop();
            self.scratch = self.sums.pop().unwrap();
        }
    }
}

/// Streams the members of `spec` in canonical (lexicographic) order.
pub fn generate_family(spec: &FamilySpec) -> Result<FamilyIter, EnumerateError> {
    let c = Compiled::new(spec)?;
    let root = vec![0i128; c.width()];
    let children = c.spec.max_jobs.is_none_or(|m| m >= 1);
    Ok(FamilyIter {
        c,
        tail: Vec::new(),
        sums: vec![root],
        frames: vec![Frame { emitted: true, children, next_v: 1, next_t: u64::MAX }],
        scratch: Vec::new(),
        visited: 0,
    })
}

/// Exact membership test, independent of generation order.
pub fn is_member(spec: &FamilySpec, a: &TaskPeriods) -> Result<bool, EnumerateError> {
    let c = Compiled::new(spec)?;
    if a.kind() != spec.kind {
        return Ok(false);
    }
    let Ok(p) = a.integer_periods() else { return Ok(false) };
    let (tail, top) = match c.triple {
        None => (p.as_slice(), None),
        Some((lo, hi)) => {
            let n = p.len();
            if n < 4 || p[n - 1] != p[n - 3] || p[n - 1] < lo || p[n - 1] > hi {
                return Ok(false);
            }
            (&p[..n - 3], Some(p[n - 1]))
        }
    };
    if tail.iter().any(|&v| v == 0 || v > spec.max_element) {
        return Ok(false);
    }
    let mut sums = vec![0i128; c.width()];
    let mut next = Vec::new();
    for &v in tail {
        c.add(&sums, v, &mut next);
        std::mem::swap(&mut sums, &mut next);
    }
    Ok(c.is_member(tail, &sums, top))
}
