//! Fold operations and the schedule lifting that undoes them.
//!
//! Every fold records its rewrites as a [`FoldTrace`]. The trace is enough
//! to replay the fold and, in reverse, to turn a schedule of the folded
//! instance into one for the original instance.

use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::{InstanceError, Kind, TaskPeriods};
use crate::ratio::{self, int, Ratio};
use crate::schedule::{verify_covering_fractional, verify_packing, CyclicSchedule, ScheduleError, Slot};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FoldError {
    #[error("invalid theta {0}: {1}")]
    InvalidTheta(String, &'static str),
    #[error("{0} expects a {1} instance")]
    WrongKind(&'static str, Kind),
    #[error("instance is empty")]
    EmptyInstance,
    #[error("schedule does not verify against the folded instance")]
    InvalidWitness,
    #[error("step {0} cannot be lifted")]
    Unliftable(String),
    #[error("trace is inconsistent: {0}")]
    BadTrace(String),
    #[error("lifted schedule failed verification")]
    LiftFailed,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// One rewrite. Field names follow the operands of the originating line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum FoldStep {
    /// `(a, b) → b/2`, both above θ.
    PackHalve {
        #[serde(with = "ratio::serde_str")]
        a: Ratio,
        #[serde(with = "ratio::serde_str")]
        b: Ratio,
    },
    /// `(a) → θ`.
    PackClamp {
        #[serde(with = "ratio::serde_str")]
        a: Ratio,
        #[serde(with = "ratio::serde_str")]
        theta: Ratio,
    },
    /// `(a, b) → a/2` when `a < 2b`.
    CovHalve {
        #[serde(with = "ratio::serde_str")]
        a: Ratio,
        #[serde(with = "ratio::serde_str")]
        b: Ratio,
    },
    /// `(a, b) → b` when `a ≥ 2b`.
    CovDrop {
        #[serde(with = "ratio::serde_str")]
        a: Ratio,
        #[serde(with = "ratio::serde_str")]
        b: Ratio,
    },
    /// `(a) → a/2` for a covering instance with a single element.
    CovSplitLone {
        #[serde(with = "ratio::serde_str")]
        a: Ratio,
    },
    /// `(m1, m2, m3) → m3/3`.
    Third {
        #[serde(with = "ratio::serde_str")]
        m1: Ratio,
        #[serde(with = "ratio::serde_str")]
        m2: Ratio,
        #[serde(with = "ratio::serde_str")]
        m3: Ratio,
    },
}

impl FoldStep {
    pub fn removed(&self) -> Vec<Ratio> {
        match self {
            FoldStep::PackHalve { a, b } | FoldStep::CovHalve { a, b } | FoldStep::CovDrop { a, b } => {
                vec![a.clone(), b.clone()]
            }
            FoldStep::PackClamp { a, .. } | FoldStep::CovSplitLone { a } => vec![a.clone()],
            FoldStep::Third { m1, m2, m3 } => vec![m1.clone(), m2.clone(), m3.clone()],
        }
    }

    pub fn added(&self) -> Ratio {
        match self {
            FoldStep::PackHalve { b, .. } => b / int(2),
            FoldStep::PackClamp { theta, .. } => theta.clone(),
            FoldStep::CovHalve { a, .. } | FoldStep::CovSplitLone { a } => a / int(2),
            FoldStep::CovDrop { b, .. } => b.clone(),
            FoldStep::Third { m3, .. } => m3 / int(3),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldOp {
    Pfold,
    Pfold1,
    Cfold,
    Cfoldimp,
}

impl std::str::FromStr for FoldOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pfold" => Ok(FoldOp::Pfold),
            "pfold1" => Ok(FoldOp::Pfold1),
            "cfold" => Ok(FoldOp::Cfold),
            "cfoldimp" => Ok(FoldOp::Cfoldimp),
            other => Err(format!("unknown fold op {other:?}")),
        }
    }
}

/// One pass of the improved covering fold's outer loop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldLevel {
    #[serde(with = "ratio::serde_str")]
    pub theta: Ratio,
    /// Elements in `(theta, 2·theta]` when the level starts.
    pub n: usize,
    /// Index into `steps` of the first rewrite made at this level.
    pub first_step: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldTrace {
    pub op: FoldOp,
    #[serde(with = "ratio::serde_str")]
    pub theta: Ratio,
    pub input: TaskPeriods,
    pub steps: Vec<FoldStep>,
    pub output: TaskPeriods,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<FoldLevel>,
}

impl FoldTrace {
    /// Applies `steps` to `input` from scratch.
    pub fn replay(&self) -> Result<TaskPeriods, FoldError> {
        let mut work = Work::new(self.input.periods());
        for (i, step) in self.steps.iter().enumerate() {
            for r in step.removed() {
                if !work.remove(&r) {
                    return Err(FoldError::BadTrace(format!("step {i} removes absent {r}")));
                }
            }
            work.insert(step.added());
        }
        Ok(TaskPeriods::new(self.input.kind(), work.0)?)
    }

    /// Steps taken at each level of a `cfold_improved` trace.
    pub fn level_steps(&self) -> Vec<&[FoldStep]> {
        let mut out = Vec::with_capacity(self.levels.len());
        for (k, lvl) in self.levels.iter().enumerate() {
            let end = self.levels.get(k + 1).map_or(self.steps.len(), |n| n.first_step);
            out.push(&self.steps[lvl.first_step..end]);
        }
        out
    }
}

/// Sorted working multiset.
struct Work(Vec<Ratio>);

impl Work {
    fn new(p: &[Ratio]) -> Self {
        Work(p.to_vec())
    }

    fn max(&self) -> Option<&Ratio> {
        self.0.last()
    }

    fn pop(&mut self) -> Option<Ratio> {
        self.0.pop()
    }

    fn insert(&mut self, r: Ratio) {
        let pos = self.0.partition_point(|x| *x <= r);
        self.0.insert(pos, r);
    }

    fn remove(&mut self, r: &Ratio) -> bool {
        match self.0.binary_search(r) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }
}

fn positive_theta(theta: &Ratio) -> Result<(), FoldError> {
    if theta.is_positive() {
        Ok(())
    } else {
        Err(FoldError::InvalidTheta(theta.to_string(), "must be positive"))
    }
}

fn finish(op: FoldOp, theta: &Ratio, a: &TaskPeriods, steps: Vec<FoldStep>, work: Work) -> FoldTrace {
    FoldTrace {
        op,
        theta: theta.clone(),
        input: a.clone(),
        steps,
        output: TaskPeriods::new(a.kind(), work.0).expect("fold keeps periods positive"),
        levels: Vec::new(),
    }
}

/// Packing fold: caps every period at `theta`.
pub fn pfold(a: &TaskPeriods, theta: &Ratio) -> Result<FoldTrace, FoldError> {
    positive_theta(theta)?;
    let mut work = Work::new(a.periods());
    let mut steps = Vec::new();
    while work.max().is_some_and(|m| m > theta) {
        let top = work.pop().unwrap();
        let step = match work.max() {
            Some(b) if b > theta => {
                let b = work.pop().unwrap();
                FoldStep::PackHalve { a: top, b }
            }
            _ => FoldStep::PackClamp { a: top, theta: theta.clone() },
        };
        work.insert(step.added());
        steps.push(step);
    }
    Ok(finish(FoldOp::Pfold, theta, a, steps, work))
}

/// Packing fold that halves the two largest periods until one remains.
pub fn pfold_to_single(a: &TaskPeriods) -> Result<(Ratio, FoldTrace), FoldError> {
    if a.is_empty() {
        return Err(FoldError::EmptyInstance);
    }
    let mut work = Work::new(a.periods());
    let mut steps = Vec::new();
    while work.0.len() > 1 {
        let top = work.pop().unwrap();
        let b = work.pop().unwrap();
        let step = FoldStep::PackHalve { a: top, b };
        work.insert(step.added());
        steps.push(step);
    }
    let last = work.0[0].clone();
    let theta = last.clone();
    Ok((last, finish(FoldOp::Pfold1, &theta, a, steps, work)))
}

/// Covering fold: caps every period at `theta`.
///
/// A lone element above `theta` is halved, which keeps unschedulability
/// only when `theta >= 2`.
pub fn cfold(a: &TaskPeriods, theta: &Ratio) -> Result<FoldTrace, FoldError> {
    positive_theta(theta)?;
    let mut work = Work::new(a.periods());
    let mut steps = Vec::new();
    cfold_into(&mut work, theta, &mut steps);
    Ok(finish(FoldOp::Cfold, theta, a, steps, work))
}

fn cfold_into(work: &mut Work, theta: &Ratio, steps: &mut Vec<FoldStep>) {
    while work.max().is_some_and(|m| m > theta) {
        let top = work.pop().unwrap();
        let step = match work.pop() {
            None => FoldStep::CovSplitLone { a: top },
            Some(b) if top < &b * int(2) => FoldStep::CovHalve { a: top, b },
            Some(b) => FoldStep::CovDrop { a: top, b },
        };
        work.insert(step.added());
        steps.push(step);
    }
}

/// Improved covering fold with one optional thirding per level.
///
/// `theta` must be `2^i` with `i ≥ 2`.
pub fn cfold_improved(a: &TaskPeriods, theta: &Ratio) -> Result<FoldTrace, FoldError> {
    let ok = theta.is_integer() && *theta >= int(4) && ratio::pow2(ratio::ceil_log2(theta)) == *theta;
    if !ok {
        return Err(FoldError::InvalidTheta(theta.to_string(), "must be a power of two at least 4"));
    }
    let mut work = Work::new(a.periods());
    let mut steps = Vec::new();
    let mut levels = Vec::new();
    let Some(max) = work.max().cloned() else {
        return Ok(finish(FoldOp::Cfoldimp, theta, a, steps, work));
    };
    let mut current = ratio::pow2(ratio::ceil_log2(&max) - 1);
    while current >= *theta {
        let hi = &current * int(2);
        let in_range: Vec<Ratio> = work.0.iter().filter(|x| **x > current && **x <= hi).cloned().collect();
        let n = in_range.len();
        levels.push(FoldLevel { theta: current.clone(), n, first_step: steps.len() });
        if n % 2 == 1 && n >= 3 && in_range[2] <= &current * ratio::frac(4, 3) {
            let step = FoldStep::Third {
                m1: in_range[0].clone(),
                m2: in_range[1].clone(),
                m3: in_range[2].clone(),
            };
            for r in step.removed() {
                work.remove(&r);
            }
            work.insert(step.added());
            steps.push(step);
        }
        cfold_into(&mut work, &current, &mut steps);
        current /= int(2);
    }
    let mut trace = finish(FoldOp::Cfoldimp, theta, a, steps, work);
    trace.levels = levels;
    Ok(trace)
}

/// Runs the fold named by `op`. `theta` is ignored for `pfold1`.
pub fn run_fold(op: FoldOp, a: &TaskPeriods, theta: &Ratio) -> Result<FoldTrace, FoldError> {
    let need = match op {
        FoldOp::Pfold | FoldOp::Pfold1 => Kind::Packing,
        FoldOp::Cfold | FoldOp::Cfoldimp => Kind::Covering,
    };
    let name = match op {
        FoldOp::Pfold => "pfold",
        FoldOp::Pfold1 => "pfold1",
        FoldOp::Cfold => "cfold",
        FoldOp::Cfoldimp => "cfoldimp",
    };
    if a.kind() != need {
        return Err(FoldError::WrongKind(name, need));
    }
    match op {
        FoldOp::Pfold => pfold(a, theta),
        FoldOp::Pfold1 => pfold_to_single(a).map(|(_, t)| t),
        FoldOp::Cfold => cfold(a, theta),
        FoldOp::Cfoldimp => cfold_improved(a, theta),
    }
}

/// Floors every period, the integer instance with the same packing windows.
pub fn floor_instance(a: &TaskPeriods) -> Result<TaskPeriods, FoldError> {
    let periods = a.periods().iter().map(|p| Ratio::from_integer(ratio::floor(p)));
    Ok(TaskPeriods::new(a.kind(), periods)?)
}

/// Turns a schedule of `trace.output` into a schedule of `trace.input`.
///
/// The witness is checked first (covering windows for covering traces,
/// packing windows on floored periods for packing traces), and so is the
/// result.
pub fn lift_schedule(trace: &FoldTrace, folded: &CyclicSchedule) -> Result<CyclicSchedule, FoldError> {
    let check = |inst: &TaskPeriods, s: &CyclicSchedule| -> Result<bool, FoldError> {
        Ok(match inst.kind() {
            Kind::Covering => verify_covering_fractional(inst, s)?,
            Kind::Packing => verify_packing(&floor_instance(inst)?, s)?,
        })
    };
    if !check(&trace.output, folded)? {
        return Err(FoldError::InvalidWitness);
    }
    let lifted = lift_structural(trace, folded)?;
    if !check(&trace.input, &lifted)? {
        return Err(FoldError::LiftFailed);
    }
    Ok(lifted)
}

/// The reverse replay behind [`lift_schedule`], without any verification.
///
/// Job `i` of `folded` is the `i`-th smallest period of `trace.output`; job
/// `i` of the result is the `i`-th smallest period of `trace.input`.
pub fn lift_structural(trace: &FoldTrace, folded: &CyclicSchedule) -> Result<CyclicSchedule, FoldError> {
    let mut jobs: Vec<Ratio> = trace.output.periods().to_vec();
    let mut s = folded.clone();
    if let Some(&j) = s.prefix.iter().chain(&s.cycle).flatten().find(|&&j| j >= jobs.len()) {
        return Err(ScheduleError::IndexOutOfRange { index: j + 1, jobs: jobs.len() }.into());
    }
    for step in trace.steps.iter().rev() {
        let host_value = step.added();
        let host = jobs
            .iter()
            .position(|v| *v == host_value)
            .ok_or_else(|| FoldError::BadTrace(format!("no job with period {host_value}")))?;
        match step {
            FoldStep::PackHalve { a, b } | FoldStep::CovHalve { a, b } => {
                jobs[host] = a.clone();
                jobs.push(b.clone());
                s = split_round_robin(&s, host, &[host, jobs.len() - 1]);
            }
            FoldStep::PackClamp { a, .. } => jobs[host] = a.clone(),
            FoldStep::CovDrop { a, .. } => jobs.push(a.clone()),
            FoldStep::Third { m1, m2, m3 } => {
                jobs[host] = m1.clone();
                jobs.push(m2.clone());
                jobs.push(m3.clone());
                let n = jobs.len();
                s = split_round_robin(&s, host, &[host, n - 2, n - 1]);
            }
            FoldStep::CovSplitLone { a } => {
                return Err(FoldError::Unliftable(format!("lone split of {a}")));
            }
        }
    }
    // Relabel to sorted input order.
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&x, &y| jobs[x].cmp(&jobs[y]));
    let mut rank = vec![0; jobs.len()];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos;
    }
    let sorted: Vec<Ratio> = order.iter().map(|&j| jobs[j].clone()).collect();
    if sorted != trace.input.periods() {
        return Err(FoldError::BadTrace("reverse replay does not reach the input".into()));
    }
    let map = |v: &Vec<Slot>| v.iter().map(|x| x.map(|j| rank[j])).collect();
    Ok(CyclicSchedule { prefix: map(&s.prefix), cycle: map(&s.cycle) })
}

/// Hands the occurrences of `host` to `targets` in turn, repeating the cycle
/// until the hand-off is periodic.
fn split_round_robin(s: &CyclicSchedule, host: usize, targets: &[usize]) -> CyclicSchedule {
    let q = targets.len();
    let per_cycle = s.cycle.iter().filter(|x| **x == Some(host)).count();
    let reps = q / num_integer::gcd(per_cycle.max(1), q).max(1);
    let reps = if per_cycle == 0 { 1 } else { reps };
    let mut turn = 0usize;
    let mut assign = |slot: &Slot| -> Slot {
        match slot {
            Some(j) if *j == host => {
                let t = targets[turn % q];
                turn += 1;
                Some(t)
            }
            other => *other,
        }
    };
    let prefix: Vec<Slot> = s.prefix.iter().map(&mut assign).collect();
    // Line the cycle up with the prefix's hand-off position.
    let mut cycle = Vec::with_capacity(s.cycle.len() * reps);
    for _ in 0..reps {
        for slot in &s.cycle {
            cycle.push(assign(slot));
        }
    }
    CyclicSchedule { prefix, cycle }
}
