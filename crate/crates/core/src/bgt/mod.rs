//! Bamboo garden trimming through relaxed pinwheel packing.
//!
//! [`m_scheduler`] maps an integer packing instance `A` either to a proof of
//! unschedulability (density above the barrier of `A`) or to a schedule for
//! `relax(A)`, every period stretched to `⌊9a/7⌋`. A height `H` turns into
//! the instance `(⌊H/h_i⌋)`, so a boundary height for `m_scheduler` gives a
//! trimming schedule within 9/7 of the optimum.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{density_barrier, CertifyError};
use crate::folds::{lift_structural, pfold, FoldError, FoldOp, FoldStep, FoldTrace};
use crate::instances::{density, InstanceError, Kind, TaskPeriods};
use crate::ratio::{self, int, Ratio};
use crate::schedule::{verify_packing, CyclicSchedule, ScheduleError, Slot};
use crate::solvers::SolverError;

pub mod tables;

pub use tables::{build_tables, Lookup, ScheduleTable, TableConfig, TableId, Tables};

#[derive(Debug, Error)]
pub enum BgtError {
    #[error("no table {table} entry covers {key}")]
    MissingTableEntry { table: TableId, key: String },
    #[error("table {table}: reachable key {key} is unschedulable")]
    UnschedulableReachable { table: TableId, key: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal error: schedule for {0} failed verification")]
    Unverified(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("tables {path}: {why}")]
    Corrupt { path: String, why: String },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct BgtInstance {
    rates: Vec<u64>,
}

impl BgtInstance {
    pub fn new(rates: &[u64]) -> Result<Self, BgtError> {
        if rates.is_empty() {
            return Err(BgtError::Precondition("a grove needs at least one plant".into()));
        }
        if rates.contains(&0) {
            return Err(BgtError::Precondition("growth rates must be positive".into()));
        }
        Ok(BgtInstance { rates: rates.to_vec() })
    }

    pub fn rates(&self) -> &[u64] {
        &self.rates
    }
}

impl TryFrom<Vec<u64>> for BgtInstance {
    type Error = BgtError;

    fn try_from(v: Vec<u64>) -> Result<Self, BgtError> {
        BgtInstance::new(&v)
    }
}

impl From<BgtInstance> for Vec<u64> {
    fn from(g: BgtInstance) -> Self {
        g.rates
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", content = "schedule", rename_all = "lowercase")]
pub enum RelaxedResult {
    Unschedulable,
    Relaxed(CyclicSchedule),
}

impl RelaxedResult {
    pub fn schedule(&self) -> Option<&CyclicSchedule> {
        match self {
            RelaxedResult::Relaxed(s) => Some(s),
            RelaxedResult::Unschedulable => None,
        }
    }
}

pub fn relax_period(a: u64) -> u64 {
    (9 * a as u128 / 7) as u64
}

pub fn relax(a: &TaskPeriods) -> Result<TaskPeriods, BgtError> {
    let p = a.integer_periods()?;
    Ok(TaskPeriods::from_ints(a.kind(), &p.into_iter().map(relax_period).collect::<Vec<_>>())?)
}

fn packing_periods(a: &TaskPeriods) -> Result<Vec<u64>, BgtError> {
    if a.kind() != Kind::Packing {
        return Err(BgtError::Precondition("expected a packing instance".into()));
    }
    Ok(a.integer_periods()?)
}

fn checked(p: &[u64], out: Option<CyclicSchedule>) -> Result<RelaxedResult, BgtError> {
    match out {
        None => Ok(RelaxedResult::Unschedulable),
        Some(s) => {
            let r: Vec<u64> = p.iter().map(|&a| relax_period(a)).collect();
            if !verify_packing(&TaskPeriods::packing(&r), &s)? {
                return Err(BgtError::Unverified(format!("{:?}", p)));
            }
            Ok(RelaxedResult::Relaxed(s))
        }
    }
}

/// Algorithm 4: the barrier check, then fold, relax and look the result up.
pub fn m_helper(a: &TaskPeriods, tables: &Tables) -> Result<RelaxedResult, BgtError> {
    let p = packing_periods(a)?;
    if p.is_empty() {
        return Err(BgtError::Precondition("empty instance".into()));
    }
    if p[0] == 2 || p.starts_with(&[3, 3]) || p.starts_with(&[3, 6, 6, 6]) {
        return Err(BgtError::Precondition(format!("{a} starts with a prefix handled by the recursion")));
    }
    checked(&p, helper(&p, tables)?)
}

fn helper(p: &[u64], tables: &Tables) -> Result<Option<CyclicSchedule>, BgtError> {
    let a = TaskPeriods::packing(p);
    if density(&a) > density_barrier(&a)?.value {
        return Ok(None);
    }
    if p[0] == 3 {
        if let Some(s) = fold_and_look_up(p, TableId::T1, tables)? {
            return Ok(Some(s));
        }
        return fold_and_look_up(p, TableId::T2, tables)?
            .map(Some)
            .ok_or_else(|| BgtError::MissingTableEntry { table: TableId::T2, key: format!("{a}") });
    }
    fold_and_look_up(p, TableId::T3, tables)?
        .map(Some)
        .ok_or_else(|| BgtError::MissingTableEntry { table: TableId::T3, key: format!("{a}") })
}

/// A folded period together with the unfolded periods merged into it.
struct Piece {
    /// Value in the fold.
    real: Ratio,
    /// Value of the same merges applied to the relaxed periods; never below
    /// `⌊9·real/7⌋`.
    relaxed: Ratio,
    leaves: Vec<usize>,
    steps: Vec<FoldStep>,
}

/// Replays `trace` keeping track of which input periods end up in which
/// output period.
fn pieces(p: &[u64], trace: &FoldTrace) -> Result<Vec<Piece>, BgtError> {
    let mut work: BTreeMap<Ratio, Vec<Piece>> = BTreeMap::new();
    for (i, &a) in p.iter().enumerate() {
        let piece = Piece { real: int(a as i64), relaxed: int(relax_period(a) as i64), leaves: vec![i], steps: vec![] };
        work.entry(piece.real.clone()).or_default().push(piece);
    }
    let take = |work: &mut BTreeMap<Ratio, Vec<Piece>>, v: &Ratio| -> Result<Piece, BgtError> {
        let bucket = work.get_mut(v).ok_or_else(|| FoldError::BadTrace(format!("no piece {v}")))?;
        let piece = bucket.pop().expect("buckets are never empty");
        if bucket.is_empty() {
            work.remove(v);
        }
        Ok(piece)
    };
    for step in &trace.steps {
        let piece = match step {
            FoldStep::PackHalve { a, b } => {
                let x = take(&mut work, a)?;
                let y = take(&mut work, b)?;
                let (hi, lo) = if x.relaxed >= y.relaxed { (x, y) } else { (y, x) };
                let relaxed = &lo.relaxed / int(2);
                let mut steps = hi.steps;
                steps.extend(lo.steps);
                steps.push(FoldStep::PackHalve { a: hi.relaxed, b: lo.relaxed });
                let mut leaves = hi.leaves;
                leaves.extend(lo.leaves);
                Piece { real: step.added(), relaxed, leaves, steps }
            }
            FoldStep::PackClamp { a, theta } => Piece { real: theta.clone(), ..take(&mut work, a)? },
            other => return Err(FoldError::BadTrace(format!("unexpected step {other:?}")).into()),
        };
        work.entry(piece.real.clone()).or_default().push(piece);
    }
    Ok(work.into_values().flatten().collect())
}

fn floor_u64(r: &Ratio) -> u64 {
    ratio::floor(r).to_u64().expect("periods fit in u64")
}

/// Folds at the table's θ, relaxes, looks the key up and lifts the table
/// schedule back to `relax(p)`. `None` when the table records the key as
/// unschedulable.
fn fold_and_look_up(p: &[u64], id: TableId, tables: &Tables) -> Result<Option<CyclicSchedule>, BgtError> {
    let a = TaskPeriods::packing(p);
    let trace = pfold(&a, &int(id.theta() as i64))?;
    let pieces = pieces(p, &trace)?;
    let key: Vec<u64> = pieces.iter().map(|x| floor_u64(&(&x.real * ratio::frac(9, 7)))).collect();
    let s = match tables.table(id).lookup(&key) {
        Lookup::Found(s) => s,
        Lookup::Unschedulable => return Ok(None),
        Lookup::Absent => {
            return Err(BgtError::MissingTableEntry { table: id, key: format!("{key:?}") });
        }
    };
    Ok(Some(lift_pieces(p, &pieces, &key, &s)?))
}

/// Splits each key job's days among the periods merged into it.
fn lift_pieces(p: &[u64], pieces: &[Piece], key: &[u64], s: &CyclicSchedule) -> Result<CyclicSchedule, BgtError> {
    let mut lanes = Vec::with_capacity(pieces.len());
    for (i, piece) in pieces.iter().enumerate() {
        if piece.relaxed < int(key[i] as i64) {
            return Err(BgtError::Unverified(format!("{p:?}: merged relaxed period below key")));
        }
        let lane_of = |v: &Vec<Slot>| v.iter().map(|x| (*x == Some(i)).then_some(0)).collect();
        let lane = CyclicSchedule { prefix: lane_of(&s.prefix), cycle: lane_of(&s.cycle) };
        let mut leaves = piece.leaves.clone();
        leaves.sort_by_key(|&j| (p[j], j));
        let input: Vec<u64> = leaves.iter().map(|&j| relax_period(p[j])).collect();
        let trace = FoldTrace {
            op: FoldOp::Pfold1,
            theta: piece.relaxed.clone(),
            input: TaskPeriods::packing(&input),
            steps: piece.steps.clone(),
            output: TaskPeriods::new(Kind::Packing, [piece.relaxed.clone()])?,
            levels: Vec::new(),
        };
        let lifted = lift_structural(&trace, &lane)?;
        lanes.push((lifted, leaves));
    }
    let len = lanes.iter().fold(1usize, |acc, (l, _)| acc.lcm(&l.cycle.len()));
    let merge = |at: &dyn Fn(&CyclicSchedule, usize) -> Slot, n: usize| -> Vec<Slot> {
        (0..n).map(|t| lanes.iter().find_map(|(l, leaves)| at(l, t).map(|j| leaves[j]))).collect()
    };
    let prefix = merge(&|l: &CyclicSchedule, t| l.prefix[t], s.prefix.len());
    let cycle = merge(&|l: &CyclicSchedule, t| l.cycle[t % l.cycle.len()], len);
    Ok(CyclicSchedule { prefix, cycle })
}

/// Algorithm 5: peels off the prefixes the tables do not cover and recurses
/// on the rest with periods divided down.
pub fn m_scheduler(a: &TaskPeriods, tables: &Tables) -> Result<RelaxedResult, BgtError> {
    let p = packing_periods(a)?;
    checked(&p, recurse(&p, tables)?)
}

fn recurse(p: &[u64], tables: &Tables) -> Result<Option<CyclicSchedule>, BgtError> {
    match p {
        [] => Ok(Some(CyclicSchedule { prefix: vec![], cycle: vec![None] })),
        [_] => Ok(Some(CyclicSchedule::cycle([0]))),
        [2, rest @ ..] => interleave(rest, 2, &[Some(0)], 1, tables),
        [3, 3, rest @ ..] => interleave(rest, 3, &[Some(0), Some(1)], 2, tables),
        [3, 6, 6, 6, rest @ ..] => interleave(rest, 6, &[Some(0), Some(1), Some(2), Some(0), Some(3)], 4, tables),
        _ => helper(p, tables),
    }
}

/// Day `t` with `t ≡ 0 (mod m)` runs the sub-schedule for `⌊rest/m⌋` (jobs
/// shifted by `shift`); day `t ≡ r` runs `fixed[r − 1]`.
fn interleave(
    rest: &[u64],
    m: usize,
    fixed: &[Slot],
    shift: usize,
    tables: &Tables,
) -> Result<Option<CyclicSchedule>, BgtError> {
    let sub: Vec<u64> = rest.iter().map(|&a| a / m as u64).collect();
    let Some(s) = recurse(&sub, tables)? else {
        return Ok(None);
    };
    let spread = |v: &Vec<Slot>| {
        v.iter().flat_map(|x| std::iter::once(x.map(|j| j + shift)).chain(fixed.iter().copied())).collect()
    };
    Ok(Some(CyclicSchedule { prefix: spread(&s.prefix), cycle: spread(&s.cycle) }))
}

/// `(⌊H/h_i⌋)` sorted, with the plant behind each sorted job.
fn periods_at(g: &BgtInstance, h: u64) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..g.rates.len()).collect();
    order.sort_by_key(|&i| (h / g.rates[i], i));
    (order.iter().map(|&i| h / g.rates[i]).collect(), order)
}

fn schedule_at(g: &BgtInstance, h: u64, tables: &Tables) -> Result<Option<CyclicSchedule>, BgtError> {
    let (p, order) = periods_at(g, h);
    if p[0] == 0 {
        return Ok(None);
    }
    let Some(s) = recurse(&p, tables)? else {
        return Ok(None);
    };
    let RelaxedResult::Relaxed(s) = checked(&p, Some(s))? else { unreachable!() };
    let plant = |v: &Vec<Slot>| v.iter().map(|x| x.map(|j| order[j])).collect();
    Ok(Some(CyclicSchedule { prefix: plant(&s.prefix), cycle: plant(&s.cycle) }))
}

/// Finds `H` with no schedule from [`m_scheduler`] at `H − 1` and one at
/// `H`, and returns that schedule over plant indices.
pub fn bgt_approximate(g: &BgtInstance, tables: &Tables) -> Result<(u64, CyclicSchedule), BgtError> {
    let top = *g.rates.iter().max().expect("nonempty");
    // Below the fastest rate that plant gets period 0.
    let mut lo = top - 1;
    let mut hi = top;
    let mut best = loop {
        if let Some(s) = schedule_at(g, hi, tables)? {
            break s;
        }
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| BgtError::Precondition("height search overflowed".into()))?;
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match schedule_at(g, mid, tables)? {
            Some(s) => {
                hi = mid;
                best = s;
            }
            None => lo = mid,
        }
    }
    Ok((hi, best))
}

/// Days needed to see every steady-state height of `s`.
pub fn steady_horizon(s: &CyclicSchedule) -> usize {
    s.prefix.len() + 2 * s.cycle.len()
}

/// Grows every plant, then trims the day's plant; returns the tallest
/// height seen just before a trim.
pub fn simulate_bgt(g: &BgtInstance, s: &CyclicSchedule, horizon: usize) -> Result<u64, BgtError> {
    s.check_shape(g.rates.len())?;
    if horizon < steady_horizon(s) {
        return Err(BgtError::Precondition(format!("horizon {horizon} is shorter than {}", steady_horizon(s))));
    }
    let mut heights = vec![0u64; g.rates.len()];
    let mut tallest = 0;
    for t in 0..horizon {
        for (h, r) in heights.iter_mut().zip(&g.rates) {
            *h += r;
            tallest = tallest.max(*h);
        }
        if let Some(j) = s.at(t) {
            heights[j] = 0;
        }
    }
    Ok(tallest)
}

/// First `a` in `m..=upto` with `m·⌊9⌊a/m⌋/7⌋ > ⌊9a/7⌋`, if any.
pub fn branch_scan(m: u64, upto: u64) -> Option<u64> {
    (m..=upto).find(|&a| m * relax_period(a / m) > relax_period(a))
}
