//! Eventually periodic schedules and their verifiers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::{InstanceError, TaskPeriods};
use crate::ratio::int;

/// One day of a schedule: a 0-based job index, or `None` for an idle day.
pub type Slot = Option<usize>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("schedule cycle is empty")]
    EmptyCycle,
    #[error("slot refers to job {index} but the instance has {jobs} jobs")]
    IndexOutOfRange { index: usize, jobs: usize },
    #[error("covering schedules may not contain idle days")]
    IdleInCovering,
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A prefix followed by a cycle repeated forever.
///
/// Serialized as `{"prefix":[…],"cycle":[…]}` with 1-based job numbers and
/// `0` for an idle day.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct CyclicSchedule {
    pub prefix: Vec<Slot>,
    pub cycle: Vec<Slot>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    #[serde(default)]
    prefix: Vec<usize>,
    cycle: Vec<usize>,
}

impl TryFrom<RawSchedule> for CyclicSchedule {
    type Error = ScheduleError;

    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        if raw.cycle.is_empty() {
            return Err(ScheduleError::EmptyCycle);
        }
        let conv = |v: Vec<usize>| v.into_iter().map(|x| x.checked_sub(1)).collect();
        Ok(CyclicSchedule { prefix: conv(raw.prefix), cycle: conv(raw.cycle) })
    }
}

impl From<CyclicSchedule> for RawSchedule {
    fn from(s: CyclicSchedule) -> Self {
        let conv = |v: Vec<Slot>| v.into_iter().map(|x| x.map_or(0, |j| j + 1)).collect();
        RawSchedule { prefix: conv(s.prefix), cycle: conv(s.cycle) }
    }
}

impl CyclicSchedule {
    /// A pure cycle over 0-based job indices.
    pub fn cycle(jobs: impl IntoIterator<Item = usize>) -> Self {
        CyclicSchedule { prefix: Vec::new(), cycle: jobs.into_iter().map(Some).collect() }
    }

    /// Parses the 1-based external notation, `0` meaning idle.
    pub fn from_one_based(prefix: &[usize], cycle: &[usize]) -> Result<Self, ScheduleError> {
        RawSchedule { prefix: prefix.to_vec(), cycle: cycle.to_vec() }.try_into()
    }

    pub fn to_one_based(&self) -> (Vec<usize>, Vec<usize>) {
        let raw: RawSchedule = self.clone().into();
        (raw.prefix, raw.cycle)
    }

    /// Job on day `t` (0-based) of the infinite unrolling.
    pub fn at(&self, t: usize) -> Slot {
        if t < self.prefix.len() {
            self.prefix[t]
        } else {
            self.cycle[(t - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn check_shape(&self, jobs: usize) -> Result<(), ScheduleError> {
        if self.cycle.is_empty() {
            return Err(ScheduleError::EmptyCycle);
        }
        for j in self.prefix.iter().chain(&self.cycle).flatten() {
            if *j >= jobs {
                return Err(ScheduleError::IndexOutOfRange { index: j + 1, jobs });
            }
        }
        Ok(())
    }

    /// Positions of each job in `prefix + cycle + cycle`.
    fn occurrences(&self, jobs: usize) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); jobs];
        let span = self.prefix.len() + 2 * self.cycle.len();
        for t in 0..span {
            if let Some(j) = self.at(t) {
                occ[j].push(t);
            }
        }
        occ
    }

    fn cycle_counts(&self, jobs: usize) -> Vec<usize> {
        let mut counts = vec![0; jobs];
        for j in self.cycle.iter().flatten() {
            counts[*j] += 1;
        }
        counts
    }
}

/// Packing validity: every window of `a_i` consecutive days contains job `i`.
pub fn verify_packing(a: &TaskPeriods, s: &CyclicSchedule) -> Result<bool, ScheduleError> {
    let periods = a.integer_periods()?;
    s.check_shape(periods.len())?;
    let counts = s.cycle_counts(periods.len());
    let occ = s.occurrences(periods.len());
    for (i, &p) in periods.iter().enumerate() {
        if counts[i] == 0 {
            return Ok(false);
        }
        let p = p as usize;
        let pos = &occ[i];
        if pos[0] >= p {
            return Ok(false);
        }
        if pos.windows(2).any(|w| w[1] - w[0] > p) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Covering validity for integer periods: every day is assigned and two
/// occurrences of job `i` are at least `a_i` days apart.
pub fn verify_covering(a: &TaskPeriods, s: &CyclicSchedule) -> Result<bool, ScheduleError> {
    let periods = a.integer_periods()?;
    s.check_shape(periods.len())?;
    if s.prefix.iter().chain(&s.cycle).any(Option::is_none) {
        return Err(ScheduleError::IdleInCovering);
    }
    let occ = s.occurrences(periods.len());
    for (i, &p) in periods.iter().enumerate() {
        if occ[i].windows(2).any(|w| ((w[1] - w[0]) as u64) < p) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Covering validity for rational periods: every window of `d` days holds job
/// `i` at most `⌈d/a_i⌉` times.
///
/// On integer periods this agrees with [`verify_covering`].
pub fn verify_covering_fractional(a: &TaskPeriods, s: &CyclicSchedule) -> Result<bool, ScheduleError> {
    s.check_shape(a.len())?;
    if s.prefix.iter().chain(&s.cycle).any(Option::is_none) {
        return Err(ScheduleError::IdleInCovering);
    }
    let counts = s.cycle_counts(a.len());
    let occ = s.occurrences(a.len());
    let head = s.prefix.len() + s.cycle.len();
    for (i, p) in a.periods().iter().enumerate() {
        // k + 1 occurrences spanning g + 1 days need g + 1 > k·a.
        if int(s.cycle.len() as i64) < int(counts[i] as i64) * p {
            return Ok(false);
        }
        let pos = &occ[i];
        for x in 0..pos.len() {
            if pos[x] >= head {
                break;
            }
            for y in x + 1..pos.len() {
                let span = int((pos[y] - pos[x] + 1) as i64);
                if span <= int((y - x) as i64) * p {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Number of days job `j` appears in one cycle.
pub fn cycle_frequency(s: &CyclicSchedule, j: usize) -> usize {
    s.cycle.iter().filter(|x| **x == Some(j)).count()
}

/// Longest gap between consecutive occurrences of each job, cyclic, over the
/// cycle only. `None` for a job that never appears.
pub fn max_cyclic_gaps(s: &CyclicSchedule, jobs: usize) -> Vec<Option<usize>> {
    let l = s.cycle.len();
    (0..jobs)
        .map(|j| {
            let pos: Vec<usize> = (0..l).filter(|&t| s.cycle[t] == Some(j)).collect();
            let first = *pos.first()?;
            let mut best = l - pos[pos.len() - 1] + first;
            for w in pos.windows(2) {
                best = best.max(w[1] - w[0]);
            }
            Some(best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::Kind;
    use crate::ratio::frac;

    fn cyc(v: &[usize]) -> CyclicSchedule {
        CyclicSchedule::from_one_based(&[], v).unwrap()
    }

    #[test]
    fn packing_examples() {
        let a = TaskPeriods::packing(&[2, 4, 4]);
        assert!(verify_packing(&a, &cyc(&[1, 2, 1, 3])).unwrap());
        assert!(verify_packing(&TaskPeriods::packing(&[2, 3]), &cyc(&[1, 2])).unwrap());
        assert!(verify_packing(&TaskPeriods::packing(&[2, 2]), &cyc(&[1, 2])).unwrap());
        assert!(!verify_packing(&TaskPeriods::packing(&[3]), &cyc(&[0, 0, 0, 1])).unwrap());
        assert!(verify_packing(&TaskPeriods::packing(&[5]), &cyc(&[1])).unwrap());
        assert!(verify_packing(&TaskPeriods::packing(&[2]), &cyc(&[3])).is_err());
    }

    #[test]
    fn packing_prefix_first_window() {
        let a = TaskPeriods::packing(&[3]);
        let late = CyclicSchedule::from_one_based(&[0, 0, 0], &[1]).unwrap();
        assert!(!verify_packing(&a, &late).unwrap());
        let ok = CyclicSchedule::from_one_based(&[0, 0], &[1]).unwrap();
        assert!(verify_packing(&a, &ok).unwrap());
    }

    #[test]
    fn covering_examples() {
        assert!(verify_covering(&TaskPeriods::covering(&[2, 2]), &cyc(&[1, 2])).unwrap());
        assert!(!verify_covering(&TaskPeriods::covering(&[2, 3]), &cyc(&[1, 2])).unwrap());
        assert!(verify_covering(&TaskPeriods::covering(&[1]), &cyc(&[1])).unwrap());
        assert_eq!(
            verify_covering(&TaskPeriods::covering(&[1]), &cyc(&[1, 0])),
            Err(ScheduleError::IdleInCovering)
        );
    }

    #[test]
    fn fractional_covering() {
        let half = TaskPeriods::new(Kind::Covering, [frac(3, 2)]).unwrap();
        // (3/2): gaps alternating 1,2 give 2 in 3 days = ⌈3/(3/2)⌉
        let two = TaskPeriods::new(Kind::Covering, [frac(3, 2), int(3)]).unwrap();
        assert!(verify_covering_fractional(&two, &cyc(&[1, 1, 2])).unwrap());
        // cycle too dense for 3/2
        assert!(!verify_covering_fractional(&half, &cyc(&[1])).unwrap());
        let a = TaskPeriods::covering(&[2, 3, 6]);
        for s in [cyc(&[1, 2, 1, 3, 1, 2]), cyc(&[1, 2, 1, 2, 1, 3]), cyc(&[1, 2, 3])] {
            assert_eq!(verify_covering_fractional(&a, &s).unwrap(), verify_covering(&a, &s).unwrap());
        }
    }

    #[test]
    fn json_roundtrip() {
        let s = CyclicSchedule::from_one_based(&[2], &[1, 0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"prefix":[2],"cycle":[1,0]}"#);
        assert_eq!(serde_json::from_str::<CyclicSchedule>(&text).unwrap(), s);
        assert!(serde_json::from_str::<CyclicSchedule>(r#"{"cycle":[]}"#).is_err());
    }

    #[test]
    fn gaps() {
        let s = cyc(&[1, 2, 1, 3]);
        assert_eq!(max_cyclic_gaps(&s, 4), vec![Some(2), Some(4), Some(4), None]);
    }
}
