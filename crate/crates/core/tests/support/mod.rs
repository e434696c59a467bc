//! Independent oracles for the integration tests. Nothing here calls the
//! library's deciders or generators.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use pinwheel::enumerate::{Condition, DensityFn, FamilySpec, Minimality};
use pinwheel::ratio::{frac, Ratio};

/// Greatest fixpoint over an explicit state graph: the states from which an
/// infinite walk exists. `succ` lists successors of a state.
fn has_infinite_walk(start: Vec<u16>, succ: impl Fn(&[u16]) -> Vec<Vec<u16>>) -> bool {
    let mut ids: HashMap<Vec<u16>, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    ids.insert(start, 0);
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let mut out = Vec::new();
        for n in succ(&states[i]) {
            let id = *ids.entry(n.clone()).or_insert_with(|| {
                states.push(n);
                states.len() - 1
            });
            out.push(id);
        }
        edges.push(out);
        i += 1;
    }
    let mut alive = vec![true; states.len()];
    loop {
        let mut changed = false;
        for s in 0..states.len() {
            if alive[s] && !edges[s].iter().any(|&t| alive[t]) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            return alive[0];
        }
    }
}

/// Packing: state is days since each job last ran; it must stay below the
/// period. An idle move is always allowed.
pub fn packs(periods: &[u64]) -> bool {
    let p: Vec<u16> = periods.iter().map(|&x| x as u16).collect();
    if p.contains(&0) {
        return false;
    }
    let pc = p.clone();
    has_infinite_walk(vec![0; p.len()], move |s| {
        let mut out = Vec::new();
        for choice in 0..=s.len() {
            let next: Vec<u16> = s.iter().enumerate().map(|(i, &c)| if i == choice { 0 } else { c + 1 }).collect();
            if next.iter().zip(&pc).all(|(c, a)| c < a) {
                out.push(next);
            }
        }
        out
    })
}

/// Covering: state is days since each job last ran, capped at the period;
/// a job may run only once its period has elapsed, and every day runs a job.
pub fn covers(periods: &[u64]) -> bool {
    let p: Vec<u16> = periods.iter().map(|&x| x as u16).collect();
    let pc = p.clone();
    has_infinite_walk(p.clone(), move |s| {
        (0..s.len())
            .filter(|&j| s[j] >= pc[j])
            .map(|j| s.iter().enumerate().map(|(i, &c)| if i == j { 1 } else { (c + 1).min(pc[i]) }).collect())
            .collect()
    })
}

/// Smallest `H` whose trimming periods `⌊H/h_i⌋` can be packed: a plant
/// trimmed every `g` days peaks at `h·g`.
pub fn bgt_optimum(rates: &[u64]) -> u64 {
    let mut h = *rates.iter().max().unwrap();
    loop {
        let periods: Vec<u64> = rates.iter().map(|r| h / r).collect();
        if packs(&periods) {
            return h;
        }
        h += 1;
    }
}

fn weight(func: DensityFn, v: u64) -> Ratio {
    let inv = |x: u64| frac(1, x as i64);
    match func {
        DensityFn::D => inv(v),
        DensityFn::Dprime if v > 8 => inv(v - 1),
        DensityFn::Dprime => inv(v),
        DensityFn::Dc(c) if v > c => inv(v - 1),
        DensityFn::Dc(_) => inv(v),
        DensityFn::Dmod => match v {
            1..=5 => inv(v),
            6 => frac(3, 17),
            7 => frac(3, 19),
            8 => frac(1, 8),
            _ => frac(2, 2 * v as i64 - 1),
        },
    }
}

fn sum(func: DensityFn, a: &[u64]) -> Ratio {
    a.iter().fold(frac(0, 1), |acc, &v| acc + weight(func, v))
}

/// Direct membership test on a full sorted instance.
pub fn member(spec: &FamilySpec, a: &[u64]) -> bool {
    let n = a.len();
    let (tail, top) = match spec.top_triple {
        Some(t) => {
            if n < 4 || a[n - 1] != a[n - 3] || a[n - 1] < t.lo || a[n - 1] > t.hi || a[n - 4] >= a[n - 1] {
                return false;
            }
            (&a[..n - 3], Some(a[n - 1]))
        }
        None => (a, None),
    };
    if tail.is_empty() || tail.iter().any(|&v| v > spec.max_element) {
        return false;
    }
    if spec.max_jobs.is_some_and(|m| n > m) {
        return false;
    }
    let Some(rule) = spec.rules.iter().find(|r| match r.when {
        Condition::Always => true,
        Condition::Contains { value } => a.contains(&value),
        Condition::TopIn { lo, hi } => top.is_some_and(|t| lo <= t && t <= hi),
    }) else {
        return false;
    };
    let meets = |x: &Ratio| if rule.strict { *x > rule.bound } else { *x >= rule.bound };
    if !meets(&sum(rule.func, a)) {
        return false;
    }
    let drop = match spec.minimality {
        Minimality::None => None,
        Minimality::RemoveMax => Some(a[n - 1]),
        Minimality::RemoveMaxBelow17 => tail.iter().rev().find(|&&v| v <= 16).copied(),
    };
    if let Some(m) = drop {
        let pos = a.iter().position(|&v| v == m).unwrap();
        let mut rest = a.to_vec();
        rest.remove(pos);
        if meets(&sum(rule.func, &rest)) {
            return false;
        }
    }
    spec.range_constraints.iter().all(|c| {
        let small: Vec<u64> = a.iter().copied().filter(|&v| v <= c.cutoff).collect();
        sum(DensityFn::D, &small) > c.bound
    })
}

/// Every member, by walking all multisets small enough to possibly belong.
pub fn brute_family(spec: &FamilySpec) -> BTreeSet<Vec<u64>> {
    let max_bound = spec.rules.iter().map(|r| r.bound.clone()).max().unwrap();
    let w_min = spec
        .rules
        .iter()
        .flat_map(|r| (1..=spec.max_element).map(move |v| weight(r.func, v)))
        .min()
        .unwrap();
    // Minimality leaves the tail below bound + 1; `max_jobs` caps the rest.
    let by_density = ((max_bound + frac(1, 1)) / w_min).to_integer().to_string().parse::<usize>().unwrap() + 1;
    let size = match spec.max_jobs {
        Some(m) => m.min(by_density),
        None => by_density,
    };
    let tops: Vec<Option<u64>> = match spec.top_triple {
        Some(t) => (t.lo..=t.hi).map(Some).collect(),
        None => vec![None],
    };
    let mut out = BTreeSet::new();
    let mut cur = Vec::new();
    multisets(1, spec.max_element, size, &mut cur, &mut |tail| {
        for &top in &tops {
            let mut a = tail.to_vec();
            if let Some(t) = top {
                a.extend([t, t, t]);
            }
            if member(spec, &a) {
                out.insert(a);
            }
        }
    });
    out
}

fn multisets(lo: u64, hi: u64, left: usize, cur: &mut Vec<u64>, f: &mut impl FnMut(&[u64])) {
    f(cur);
    if left == 0 {
        return;
    }
    for v in lo..=hi {
        cur.push(v);
        multisets(v, hi, left - 1, cur, f);
        cur.pop();
    }
}
