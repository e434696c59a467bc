//! Unschedulability certificates that avoid a full search: instance
//! dependent density barriers, and the exhaustive left-push window count
//! that backs the `(3,6,6,8)` barrier.

use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::{density, InstanceError, Kind, TaskPeriods};
use crate::ratio::{self, Ratio};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error("coprime bound needs 1 < a < b with gcd(a, b) = 1, got ({0}, {1})")]
    NotCoprimePair(u64, u64),
    #[error("window length must be at least 1")]
    EmptyWindow,
    #[error("fixed job set has {0} states, above the limit of {1}")]
    TooManyStates(u128, u64),
    #[error("expected a packing instance")]
    NotPacking,
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BarrierOrigin {
    General1,
    Coprime { a: u64, b: u64 },
    Window3668,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Barrier {
    #[serde(with = "ratio::serde_str")]
    pub value: Ratio,
    pub origin: BarrierOrigin,
}

/// `1 − 1/(a·b²)` for coprime `1 < a < b`.
pub fn coprime_pair_bound(a: u64, b: u64) -> Result<Ratio, CertifyError> {
    if !(1 < a && a < b && a.gcd(&b) == 1) {
        return Err(CertifyError::NotCoprimePair(a, b));
    }
    let denom = Ratio::from_integer((a as u128 * b as u128 * b as u128).into());
    Ok(Ratio::one() - denom.recip())
}

/// The density above which `A` is certainly unschedulable.
pub fn density_barrier(a: &TaskPeriods) -> Result<Barrier, CertifyError> {
    if a.kind() != Kind::Packing {
        return Err(CertifyError::NotPacking);
    }
    let p = a.integer_periods()?;
    if p.len() >= 2 && p[0] == 3 && matches!(p[1], 4 | 5 | 7) {
        let value = coprime_pair_bound(3, p[1])?;
        return Ok(Barrier { value, origin: BarrierOrigin::Coprime { a: 3, b: p[1] } });
    }
    if p.starts_with(&[3, 6, 6, 8]) {
        return Ok(Barrier { value: ratio::frac(95, 96), origin: BarrierOrigin::Window3668 });
    }
    Ok(Barrier { value: Ratio::one(), origin: BarrierOrigin::General1 })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certification {
    Certified,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub instance: TaskPeriods,
    #[serde(with = "ratio::serde_str")]
    pub density: Ratio,
    pub barrier: Barrier,
    pub verdict: Certification,
}

/// `Certified` iff `D(A)` exceeds the barrier. Never claims schedulability.
pub fn certify_unschedulable(a: &TaskPeriods) -> Result<CertifyReport, CertifyError> {
    let barrier = density_barrier(a)?;
    let d = density(a);
    let verdict = if d > barrier.value { Certification::Certified } else { Certification::Unknown };
    Ok(CertifyReport { instance: a.clone(), density: d, barrier, verdict })
}

pub const DEFAULT_WINDOW_STATE_LIMIT: u64 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowReport {
    pub jobs: TaskPeriods,
    pub window: u64,
    pub min_leftpushes: u64,
    /// States of the fixed-job automaton that lie on a bi-infinite run.
    pub live_states: u64,
}

/// Minimum number of left-pushes, over every `window`-day stretch of every
/// valid bi-infinite schedule of `fixed`, counting only gaps whose two ends
/// both fall inside the stretch. A gap of `a − k` counts `k` times.
///
/// Days not used by the fixed jobs are free.
pub fn min_leftpush_per_window(fixed: &TaskPeriods, window: u64) -> Result<WindowReport, CertifyError> {
    min_leftpush_per_window_with(fixed, window, DEFAULT_WINDOW_STATE_LIMIT)
}

pub fn min_leftpush_per_window_with(
    fixed: &TaskPeriods,
    window: u64,
    state_limit: u64,
) -> Result<WindowReport, CertifyError> {
    if window == 0 {
        return Err(CertifyError::EmptyWindow);
    }
    let periods = fixed.integer_periods()?;
    let n = periods.len();
    let total: u128 = periods.iter().map(|&p| p as u128).product();
    if total > state_limit as u128 || n > 16 {
        return Err(CertifyError::TooManyStates(total, state_limit));
    }
    let total = total as usize;
    if n == 0 {
        return Ok(WindowReport { jobs: fixed.clone(), window, min_leftpushes: 0, live_states: 1 });
    }

    // State: days since each job last ran, d_i in 1..=a_i, stored as d_i − 1
    // in mixed radix.
    let decode = |mut code: usize| -> Vec<u64> {
        let mut d = vec![0; n];
        for i in (0..n).rev() {
            d[i] = (code % periods[i] as usize) as u64 + 1;
            code /= periods[i] as usize;
        }
        d
    };
    let encode = |d: &[u64]| -> usize { d.iter().zip(&periods).fold(0, |acc, (&x, &p)| acc * p as usize + (x - 1) as usize) };

    // Successors: (next state, job run or usize::MAX for a free day).
    let mut succ: Vec<Vec<(usize, usize)>> = vec![Vec::new(); total];
    for code in 0..total {
        let d = decode(code);
        let forced: Vec<usize> = (0..n).filter(|&i| d[i] == periods[i]).collect();
        let choices: Vec<usize> = match forced.len() {
            0 => (0..n).chain([usize::MAX]).collect(),
            1 => forced,
            _ => Vec::new(),
        };
        for j in choices {
            let next: Vec<u64> = (0..n).map(|i| if i == j { 1 } else { d[i] + 1 }).collect();
            succ[code].push((encode(&next), j));
        }
    }

    // Keep states with both a live successor and a live predecessor.
    let mut live = vec![true; total];
    loop {
        let mut has_pred = vec![false; total];
        let mut changed = false;
        for s in 0..total {
            if live[s] {
                for &(t, _) in &succ[s] {
                    if live[t] {
                        has_pred[t] = true;
                    }
                }
            }
        }
        for s in 0..total {
            if live[s] && (!has_pred[s] || !succ[s].iter().any(|&(t, _)| live[t])) {
                live[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let live_states = live.iter().filter(|&&x| x).count() as u64;

    // dp[state][mask]: fewest pushes over the days so far, where mask marks
    // jobs already seen inside the stretch.
    const INF: u64 = u64::MAX;
    let masks = 1usize << n;
    let mut dp = vec![INF; total * masks];
    for s in 0..total {
        if live[s] {
            dp[s * masks] = 0;
        }
    }
    for _ in 0..window {
        let mut next = vec![INF; total * masks];
        for s in 0..total {
            if !live[s] {
                continue;
            }
            let d = decode(s);
            for mask in 0..masks {
                let cur = dp[s * masks + mask];
                if cur == INF {
                    continue;
                }
                for &(t, j) in &succ[s] {
                    if !live[t] {
                        continue;
                    }
                    let (cost, m2) = if j == usize::MAX {
                        (0, mask)
                    } else if mask & (1 << j) != 0 {
                        (periods[j] - d[j], mask)
                    } else {
                        (0, mask | (1 << j))
                    };
                    let slot = &mut next[t * masks + m2];
                    *slot = (*slot).min(cur + cost);
                }
            }
        }
        dp = next;
    }
    let min_leftpushes = dp.into_iter().min().unwrap_or(INF);
    Ok(WindowReport { jobs: fixed.clone(), window, min_leftpushes, live_states })
}
