//! Exact deciders and constructive heuristics.
//!
//! Both deciders search the finite automaton whose states are per-job
//! counters. Packing counters hold the days left before the job's deadline;
//! covering counters hold the days since the job last ran, saturated at its
//! period. A valid infinite schedule exists iff a cycle is reachable from the
//! start state, and that cycle on its own is a valid schedule.
//!
//! Jobs with equal periods are interchangeable, so states are hashed with the
//! counters of each equal-period group sorted.

use std::hash::Hash;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::schedule::{verify_covering, verify_packing, CyclicSchedule, ScheduleError};

use crate::instances::{density, InstanceError, Kind, TaskPeriods};
use crate::ratio::Ratio;

pub const DEFAULT_STATE_BUDGET: u64 = 500_000_000;
pub const STATE_BUDGET_ENV: &str = "PINWHEEL_STATE_BUDGET";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("search exceeded the state budget of {budget} states")]
    Indeterminate { budget: u64 },
    #[error("{0} decider called on a {1} instance")]
    WrongKind(Kind, Kind),
    #[error("period {0} is too large for the state search")]
    PeriodTooLarge(u64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("internal error: produced schedule failed verification")]
    Unverified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub state_budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { state_budget: DEFAULT_STATE_BUDGET }
    }
}

impl SolverConfig {
    /// Default config with `PINWHEEL_STATE_BUDGET` applied when set.
    pub fn from_env() -> Self {
        let state_budget = std::env::var(STATE_BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_STATE_BUDGET);
        SolverConfig { state_budget }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", content = "schedule", rename_all = "lowercase")]
pub enum Outcome {
    Schedulable(CyclicSchedule),
    Unschedulable,
}

impl Outcome {
    pub fn is_schedulable(&self) -> bool {
        matches!(self, Outcome::Schedulable(_))
    }

    pub fn schedule(&self) -> Option<&CyclicSchedule> {
        match self {
            Outcome::Schedulable(s) => Some(s),
            Outcome::Unschedulable => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub states: u64,
    #[serde(with = "duration_micros")]
    pub elapsed: Duration,
}

mod duration_micros {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_micros() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_micros(u64::deserialize(d)?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub stats: SearchStats,
}

pub fn decide_packing(a: &TaskPeriods) -> Result<Verdict, SolverError> {
    decide_packing_with(a, &SolverConfig::from_env())
}

pub fn decide_covering(a: &TaskPeriods) -> Result<Verdict, SolverError> {
    decide_covering_with(a, &SolverConfig::from_env())
}

/// Dispatches on the instance kind.
pub fn decide(a: &TaskPeriods, cfg: &SolverConfig) -> Result<Verdict, SolverError> {
    match a.kind() {
        Kind::Packing => decide_packing_with(a, cfg),
        Kind::Covering => decide_covering_with(a, cfg),
    }
}

pub fn decide_packing_with(a: &TaskPeriods, cfg: &SolverConfig) -> Result<Verdict, SolverError> {
    if a.kind() != Kind::Packing {
        return Err(SolverError::WrongKind(Kind::Packing, a.kind()));
    }
    let periods = small_periods(a)?;
    let start = Instant::now();
    let done = |outcome, states| Verdict { outcome, stats: SearchStats { states, elapsed: start.elapsed() } };
    if periods.is_empty() {
        return Ok(done(Outcome::Schedulable(CyclicSchedule { prefix: vec![], cycle: vec![None] }), 0));
    }
    if periods.len() == 1 {
        return Ok(done(Outcome::Schedulable(CyclicSchedule::cycle([0])), 0));
    }
    if periods[0] == 1 || density(a) > Ratio::one() {
        return Ok(done(Outcome::Unschedulable, 0));
    }
    let (outcome, states) = search(&Packing, &periods, cfg)?;
    if let Outcome::Schedulable(s) = &outcome {
        if !verify_packing(a, s)? {
            return Err(SolverError::Unverified);
        }
    }
    Ok(done(outcome, states))
}

pub fn decide_covering_with(a: &TaskPeriods, cfg: &SolverConfig) -> Result<Verdict, SolverError> {
    if a.kind() != Kind::Covering {
        return Err(SolverError::WrongKind(Kind::Covering, a.kind()));
    }
    let periods = small_periods(a)?;
    let start = Instant::now();
    let done = |outcome, states| Verdict { outcome, stats: SearchStats { states, elapsed: start.elapsed() } };
    if periods.is_empty() || density(a) < Ratio::one() {
        return Ok(done(Outcome::Unschedulable, 0));
    }
    if periods[0] == 1 {
        return Ok(done(Outcome::Schedulable(CyclicSchedule::cycle([0])), 0));
    }
    let (outcome, states) = search(&Covering, &periods, cfg)?;
    if let Outcome::Schedulable(s) = &outcome {
        if !verify_covering(a, s)? {
            return Err(SolverError::Unverified);
        }
    }
    Ok(done(outcome, states))
}

fn small_periods(a: &TaskPeriods) -> Result<Vec<u16>, SolverError> {
    a.integer_periods()?
        .into_iter()
        .map(|p| u16::try_from(p).map_err(|_| SolverError::PeriodTooLarge(p)))
        .collect()
}

/// Transition rules of one automaton. Counters are stored minus one, so a
/// job with period `a` has counters in `0..a`.
trait Rules {
    fn start(&self, periods: &[u16]) -> Vec<u16>;
    /// Candidate jobs from `state`, best first. Only one representative per
    /// equal-period group is offered when the choice is symmetric.
    fn moves(&self, periods: &[u16], groups: &[(usize, usize)], state: &[u16], out: &mut Vec<usize>);
    /// Successor after running `job` (`None`: idle), or `None` if a
    /// constraint breaks.
    fn step(&self, periods: &[u16], state: &[u16], job: usize, out: &mut Vec<u16>) -> bool;
}

struct Packing;
struct Covering;

impl Rules for Packing {
    fn start(&self, periods: &[u16]) -> Vec<u16> {
        periods.iter().map(|p| p - 1).collect()
    }

    fn moves(&self, _periods: &[u16], groups: &[(usize, usize)], state: &[u16], out: &mut Vec<usize>) {
        out.clear();
        // A job at its deadline is forced; two at once is a dead end.
        let urgent: Vec<usize> = (0..state.len()).filter(|&j| state[j] == 0).collect();
        match urgent.len() {
            0 => {}
            1 => {
                out.push(urgent[0]);
                return;
            }
            _ => return,
        }
        // Within a group only the job closest to its deadline is worth
        // running: the other choices leave pointwise smaller counters.
        for &(lo, hi) in groups {
            out.push((lo..hi).min_by_key(|&j| state[j]).unwrap());
        }
        out.sort_by_key(|&j| state[j]);
    }

    fn step(&self, periods: &[u16], state: &[u16], job: usize, out: &mut Vec<u16>) -> bool {
        out.clear();
        for (j, (&c, &p)) in state.iter().zip(periods).enumerate() {
            if j == job {
                out.push(p - 1);
            } else if c == 0 {
                return false;
            } else {
                out.push(c - 1);
            }
        }
        demand_fits(periods, out)
    }
}

/// Necessary condition on a packing state: for every horizon `h` up to twice
/// the largest period, the runs forced into the next `h` days fit in `h`
/// days.
fn demand_fits(periods: &[u16], state: &[u16]) -> bool {
    let horizon = 2 * *periods.iter().max().unwrap_or(&0) as u32;
    let mut need = [0u32; 512];
    let horizon = horizon.min(need.len() as u32 - 1);
    for (&c, &p) in state.iter().zip(periods) {
        let mut t = c as u32 + 1;
        while t <= horizon {
            need[t as usize] += 1;
            t += p as u32;
        }
    }
    let mut total = 0;
    for h in 1..=horizon {
        total += need[h as usize];
        if total > h {
            return false;
        }
    }
    true
}

impl Rules for Covering {
    fn start(&self, periods: &[u16]) -> Vec<u16> {
        periods.iter().map(|p| p - 1).collect()
    }

    fn moves(&self, periods: &[u16], groups: &[(usize, usize)], state: &[u16], out: &mut Vec<usize>) {
        out.clear();
        // Largest period first; eligible jobs of a group are identical.
        for &(lo, hi) in groups.iter().rev() {
            if let Some(j) = (lo..hi).find(|&j| state[j] == periods[j] - 1) {
                out.push(j);
            }
        }
    }

    fn step(&self, periods: &[u16], state: &[u16], job: usize, out: &mut Vec<u16>) -> bool {
        out.clear();
        for (j, (&e, &p)) in state.iter().zip(periods).enumerate() {
            out.push(if j == job { 0 } else { (e + 1).min(p - 1) });
        }
        true
    }
}

fn groups_of(periods: &[u16]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut lo = 0;
    for j in 1..=periods.len() {
        if j == periods.len() || periods[j] != periods[lo] {
            groups.push((lo, j));
            lo = j;
        }
    }
    groups
}

fn canonicalize(state: &mut [u16], groups: &[(usize, usize)]) {
    for &(lo, hi) in groups {
        if hi - lo > 1 {
            state[lo..hi].sort_unstable();
        }
    }
}

/// A move recorded independently of job identity inside a group.
#[derive(Clone, Copy, Debug)]
struct Move {
    group: usize,
    counter: u16,
}

const BLACK: u32 = u32::MAX;

fn search<R: Rules>(rules: &R, periods: &[u16], cfg: &SolverConfig) -> Result<(Outcome, u64), SolverError> {
    // Mixed-radix keys when they fit, raw vectors otherwise.
    let mut radix_ok = true;
    let mut prod: u128 = 1;
    for &p in periods {
        match prod.checked_mul(p as u128) {
            Some(x) => prod = x,
            None => {
                radix_ok = false;
                break;
            }
        }
    }
    if radix_ok {
        search_keyed(rules, periods, cfg, |s: &[u16]| {
            s.iter().zip(periods).fold(0u128, |acc, (&c, &p)| acc * p as u128 + c as u128)
        })
    } else {
        search_keyed(rules, periods, cfg, |s: &[u16]| Box::<[u16]>::from(s))
    }
}

struct Frame {
    state: Vec<u16>,
    moves: Vec<usize>,
    next: usize,
}

fn search_keyed<R: Rules, K: Hash + Eq, F: Fn(&[u16]) -> K>(
    rules: &R,
    periods: &[u16],
    cfg: &SolverConfig,
    key: F,
) -> Result<(Outcome, u64), SolverError> {
    let groups = groups_of(periods);
    let group_of: Vec<usize> = {
        let mut g = vec![0; periods.len()];
        for (gi, &(lo, hi)) in groups.iter().enumerate() {
            g[lo..hi].fill(gi);
        }
        g
    };
    let mut status: FxHashMap<K, u32> = FxHashMap::default();
    let mut stack: Vec<Frame> = Vec::new();
    let mut path: Vec<Move> = Vec::new();
    let mut scratch = Vec::with_capacity(periods.len());

    let mut s0 = rules.start(periods);
    canonicalize(&mut s0, &groups);
    status.insert(key(&s0), 0);
    let mut moves = Vec::new();
    rules.moves(periods, &groups, &s0, &mut moves);
    stack.push(Frame { state: s0, moves, next: 0 });
    let mut visited: u64 = 1;

    while let Some(top) = stack.last_mut() {
        if top.next >= top.moves.len() {
            let done = stack.pop().unwrap();
            status.insert(key(&done.state), BLACK);
            path.pop();
            continue;
        }
        let job = top.moves[top.next];
        top.next += 1;
        if !rules.step(periods, &top.state, job, &mut scratch) {
            continue;
        }
        let mv = Move { group: group_of[job], counter: top.state[job] };
        canonicalize(&mut scratch, &groups);
        let k = key(&scratch);
        match status.get(&k) {
            Some(&BLACK) => continue,
            Some(&depth) => {
                path.push(mv);
                let entry = stack[depth as usize].state.clone();
                let cycle_moves = &path[depth as usize..];
                let schedule = concretize(rules, periods, &groups, &entry, cycle_moves);
                return Ok((Outcome::Schedulable(schedule), visited));
            }
            None => {}
        }
        visited += 1;
        if visited > cfg.state_budget {
            return Err(SolverError::Indeterminate { budget: cfg.state_budget });
        }
        status.insert(k, stack.len() as u32);
        path.push(mv);
        let mut moves = Vec::new();
        rules.moves(periods, &groups, &scratch, &mut moves);
        stack.push(Frame { state: scratch.clone(), moves, next: 0 });
    }
    Ok((Outcome::Unschedulable, visited))
}

/// Replays a canonical cycle on concrete jobs until the concrete state at a
/// pass boundary repeats, and returns the periodic part.
fn concretize<R: Rules>(
    rules: &R,
    periods: &[u16],
    groups: &[(usize, usize)],
    entry: &[u16],
    moves: &[Move],
) -> CyclicSchedule {
    let mut state = entry.to_vec();
    let mut seen: FxHashMap<Vec<u16>, usize> = FxHashMap::default();
    let mut days: Vec<usize> = Vec::new();
    let mut next = Vec::with_capacity(state.len());
    loop {
        if let Some(&start) = seen.get(&state) {
            return CyclicSchedule::cycle(days[start..].iter().copied());
        }
        seen.insert(state.clone(), days.len());
        for mv in moves {
            let (lo, hi) = groups[mv.group];
            let job = (lo..hi).find(|&j| state[j] == mv.counter).expect("move applies to canonical replay");
            let ok = rules.step(periods, &state, job, &mut next);
            debug_assert!(ok);
            std::mem::swap(&mut state, &mut next);
            days.push(job);
        }
    }
}

/// Assigns each job a residue class modulo its period (a power of two),
/// taking jobs in nondecreasing period order. Returns the class of each job
/// that received one and the cycle length.
fn binary_carousel(pow: &[u64]) -> (Vec<Option<(u64, u64)>>, u64) {
    let len = pow.iter().copied().max().unwrap_or(1);
    let mut order: Vec<usize> = (0..pow.len()).collect();
    order.sort_by_key(|&j| pow[j]);
    let mut free: Vec<(u64, u64)> = vec![(0, 1)];
    let mut class = vec![None; pow.len()];
    for j in order {
        let Some((r, mut m)) = free.pop() else { break };
        while m < pow[j] {
            free.push((r + m, 2 * m));
            m *= 2;
        }
        class[j] = Some((r, m));
    }
    (class, len)
}

fn carousel_cycle(class: &[Option<(u64, u64)>], len: u64) -> CyclicSchedule {
    let mut cycle = vec![None; len as usize];
    for (j, c) in class.iter().enumerate() {
        if let Some((r, m)) = c {
            let mut t = *r;
            while t < len {
                cycle[t as usize] = Some(j);
                t += m;
            }
        }
    }
    CyclicSchedule { prefix: vec![], cycle }
}

/// Covering fast path: round periods up to powers of two and, when the
/// rounded density still reaches 1, give each job its own residue class.
pub fn kraft_covering_heuristic(a: &TaskPeriods) -> Result<Option<CyclicSchedule>, SolverError> {
    let periods = a.integer_periods()?;
    let pow: Vec<u64> = periods.iter().map(|&p| p.next_power_of_two()).collect();
    let mass: Ratio = pow.iter().map(|&p| Ratio::new(1.into(), p.into())).fold(Ratio::zero(), |x, y| x + y);
    if periods.is_empty() || mass < Ratio::one() {
        return Ok(None);
    }
    let (class, len) = binary_carousel(&pow);
    let s = carousel_cycle(&class, len);
    if !verify_covering(a, &s)? {
        return Err(SolverError::Unverified);
    }
    Ok(Some(s))
}

/// Packing fast path: round periods down to powers of two and, when the
/// rounded density is at most 1, give each job its own residue class.
pub fn powtwo_packing_heuristic(a: &TaskPeriods) -> Result<Option<CyclicSchedule>, SolverError> {
    let periods = a.integer_periods()?;
    let pow: Vec<u64> = periods.iter().map(|&p| 1u64 << (63 - p.leading_zeros())).collect();
    let mass: Ratio = pow.iter().map(|&p| Ratio::new(1.into(), p.into())).fold(Ratio::zero(), |x, y| x + y);
    if mass > Ratio::one() {
        return Ok(None);
    }
    let (class, len) = binary_carousel(&pow);
    let s = carousel_cycle(&class, len);
    if !verify_packing(a, &s)? {
        return Err(SolverError::Unverified);
    }
    Ok(Some(s))
}

/// Heuristic first, exact search second. Returns the outcome and the name of
/// the method that settled it.
pub fn solve(a: &TaskPeriods, cfg: &SolverConfig) -> Result<(Verdict, &'static str), SolverError> {
    let start = Instant::now();
    let quick = match a.kind() {
        Kind::Packing => powtwo_packing_heuristic(a)?,
        Kind::Covering => kraft_covering_heuristic(a)?,
    };
    if let Some(s) = quick {
        let stats = SearchStats { states: 0, elapsed: start.elapsed() };
        let name = match a.kind() {
            Kind::Packing => "powtwo",
            Kind::Covering => "kraft",
        };
        return Ok((Verdict { outcome: Outcome::Schedulable(s), stats }, name));
    }
    Ok((decide(a, cfg)?, "search"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pk(p: &[u64]) -> TaskPeriods {
        TaskPeriods::packing(p)
    }

    fn cv(p: &[u64]) -> TaskPeriods {
        TaskPeriods::covering(p)
    }

    fn packs(p: &[u64]) -> bool {
        decide_packing(&pk(p)).unwrap().outcome.is_schedulable()
    }

    fn covers(p: &[u64]) -> bool {
        decide_covering(&cv(p)).unwrap().outcome.is_schedulable()
    }

    #[test]
    fn packing_examples() {
        assert!(!packs(&[2, 3, 6]));
        for a in 4..=12 {
            assert!(!packs(&[2, 3, a]), "(2,3,{a})");
        }
        assert!(packs(&[2, 4, 4]));
        assert!(packs(&[2, 3]));
        assert!(packs(&[]));
        assert!(packs(&[1]));
        assert!(!packs(&[1, 5]));
        assert!(packs(&[3, 3, 3]));
        assert!(!packs(&[2, 2, 2]));
        // density 1 but needs a non-carousel pattern
        assert!(packs(&[2, 6, 6, 6]));
    }

    #[test]
    fn covering_examples() {
        assert!(!covers(&[2, 3, 5]));
        assert!(!covers(&[2, 3, 5, 9]));
        assert!(!covers(&[2, 3, 5, 9, 17]));
        assert!(covers(&[2, 2]));
        assert!(covers(&[1]));
        assert!(!covers(&[]));
        assert!(!covers(&[2]));
        assert!(covers(&[2, 3, 4]));
        assert!(covers(&[3, 3, 3]));
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = SolverConfig { state_budget: 3 };
        let err = decide_covering_with(&cv(&[2, 3, 5, 9, 17]), &cfg).unwrap_err();
        assert_eq!(err, SolverError::Indeterminate { budget: 3 });
    }

    #[test]
    fn kind_mismatch() {
        assert!(matches!(decide_packing(&cv(&[2])), Err(SolverError::WrongKind(..))));
        let frac = TaskPeriods::parse(Kind::Packing, "5/2").unwrap();
        assert!(matches!(decide_packing(&frac), Err(SolverError::Instance(_))));
    }

    #[test]
    fn heuristics() {
        assert_eq!(kraft_covering_heuristic(&cv(&[2, 2])).unwrap(), Some(CyclicSchedule::cycle([0, 1])));
        assert_eq!(kraft_covering_heuristic(&cv(&[2, 3, 5, 9, 17])).unwrap(), None);
        assert_eq!(
            kraft_covering_heuristic(&cv(&[2, 4, 4])).unwrap(),
            Some(CyclicSchedule::cycle([0, 1, 0, 2]))
        );
        assert!(powtwo_packing_heuristic(&pk(&[2, 4, 4])).unwrap().is_some());
        assert_eq!(powtwo_packing_heuristic(&pk(&[2, 3, 6])).unwrap(), None);
        assert_eq!(powtwo_packing_heuristic(&pk(&[8])).unwrap().unwrap().cycle.len(), 8);
    }

    #[test]
    fn solve_prefers_heuristic() {
        let cfg = SolverConfig::default();
        let (v, how) = solve(&cv(&[2, 4, 4]), &cfg).unwrap();
        assert_eq!(how, "kraft");
        assert!(v.outcome.is_schedulable());
        let (v, how) = solve(&cv(&[2, 3, 5]), &cfg).unwrap();
        assert_eq!(how, "search");
        assert!(!v.outcome.is_schedulable());
    }

    #[test]
    fn verdict_json() {
        let o = Outcome::Schedulable(CyclicSchedule::cycle([0, 1]));
        let text = serde_json::to_string(&o).unwrap();
        assert_eq!(text, r#"{"result":"schedulable","schedule":{"prefix":[],"cycle":[1,2]}}"#);
        assert_eq!(serde_json::to_string(&Outcome::Unschedulable).unwrap(), r#"{"result":"unschedulable"}"#);
    }
}
