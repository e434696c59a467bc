//! A quick invariant suite that exercises every module on small inputs.

use serde::Serialize;

use crate::bgt::branch_scan;
use crate::certify::{certify_unschedulable, min_leftpush_per_window, Certification};
use crate::enumerate::{builtin_spec, generate_family, is_member};
use crate::folds::{cfold, cfold_improved, lift_schedule, pfold};
use crate::instances::{density, density_mod, density_prime, Kind, TaskPeriods};
use crate::ratio::{frac, int, Ratio};
use crate::schedule::{verify_covering, verify_packing};
use crate::solvers::{decide, solve, SolverConfig};

#[derive(Clone, Debug, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

type Check = fn(&SolverConfig) -> Result<String, String>;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn densities(_: &SolverConfig) -> Result<String, String> {
    let d = density(&TaskPeriods::packing(&[2, 3, 6]));
    ensure(d == int(1), || format!("D(2,3,6) = {d}"))?;
    let dp = density_prime(&TaskPeriods::covering(&[2, 9, 16]));
    ensure(dp == frac(83, 120), || format!("D'(2,9,16) = {dp}"))?;
    let dm = density_mod(&TaskPeriods::covering(&[6])).map_err(|e| e.to_string())?;
    ensure(dm == frac(3, 17), || format!("Dmod(6) = {dm}"))?;
    Ok("D, D', Dmod".into())
}

fn small_verdicts(cfg: &SolverConfig) -> Result<String, String> {
    let mut n = 0;
    for a in 3..=12 {
        let inst = TaskPeriods::packing(&[2, 3, a]);
        let v = decide(&inst, cfg).map_err(|e| e.to_string())?;
        ensure(!v.outcome.is_schedulable(), || format!("{inst} packed"))?;
        n += 1;
    }
    let inst = TaskPeriods::covering(&[2, 3, 5]);
    ensure(!decide(&inst, cfg).map_err(|e| e.to_string())?.outcome.is_schedulable(), || format!("{inst} covered"))?;
    for inst in [TaskPeriods::packing(&[2, 4, 8]), TaskPeriods::covering(&[2, 2])] {
        let (v, _) = solve(&inst, cfg).map_err(|e| e.to_string())?;
        let s = v.outcome.schedule().ok_or_else(|| format!("{inst} has no schedule"))?;
        let good = match inst.kind() {
            Kind::Packing => verify_packing(&inst, s),
            Kind::Covering => verify_covering(&inst, s),
        }
        .map_err(|e| e.to_string())?;
        ensure(good, || format!("schedule for {inst} fails its verifier"))?;
    }
    Ok(format!("{} unschedulable, 2 verified schedules", n + 1))
}

fn fold_bounds(cfg: &SolverConfig) -> Result<String, String> {
    let mut checked = 0;
    let mut x: u64 = 0x9e37_79b9;
    for _ in 0..200 {
        let mut periods = Vec::new();
        for _ in 0..1 + x % 6 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            periods.push(2 + (x >> 33) % 40);
        }
        let a = TaskPeriods::covering(&periods);
        for theta in [4i64, 8, 16] {
            let th = int(theta);
            let t = cfold(&a, &th).map_err(|e| e.to_string())?;
            let loss = density(&a) - density(&t.output);
            ensure(TaskPeriods::max(&t.output).is_none_or(|m| *m <= th), || format!("cfold {a} at {theta} exceeds theta"))?;
            ensure(loss <= frac(2, theta), || format!("cfold {a} at {theta} loses {loss}"))?;
            let imp = cfold_improved(&a, &th).map_err(|e| e.to_string())?;
            ensure(TaskPeriods::max(&imp.output).is_none_or(|m| *m <= th), || format!("cfold_improved {a} at {theta}"))?;
            let p = pfold(&a.with_kind(Kind::Packing), &th).map_err(|e| e.to_string())?;
            ensure(TaskPeriods::max(&p.output).is_none_or(|m| *m <= th), || format!("pfold {a} at {theta}"))?;
            checked += 1;
        }
    }
    // A covering schedule of the folded instance lifts to one of the input.
    let a = TaskPeriods::covering(&[2, 5, 7]);
    let t = cfold(&a, &int(4)).map_err(|e| e.to_string())?;
    let ceil = TaskPeriods::new(Kind::Covering, t.output.periods().iter().map(Ratio::ceil)).map_err(|e| e.to_string())?;
    if let Some(s) = solve(&ceil, cfg).map_err(|e| e.to_string())?.0.outcome.schedule() {
        let lifted = lift_schedule(&t, s).map_err(|e| e.to_string())?;
        ensure(verify_covering(&a, &lifted).map_err(|e| e.to_string())?, || "lifted schedule invalid".into())?;
    }
    Ok(format!("{checked} fold runs"))
}

fn barriers(_: &SolverConfig) -> Result<String, String> {
    let r = certify_unschedulable(&TaskPeriods::packing(&[3, 4, 5, 5])).map_err(|e| e.to_string())?;
    ensure(r.verdict == Certification::Certified, || format!("(3,4,5,5) not certified: {r:?}"))?;
    let w = min_leftpush_per_window(&TaskPeriods::packing(&[3, 6, 6, 8]), 24).map_err(|e| e.to_string())?;
    ensure(w.min_leftpushes >= 2, || format!("(3,6,6,8) window 24 has {} left-pushes", w.min_leftpushes))?;
    Ok(format!("(3,6,6,8)/24 min left-pushes {}", w.min_leftpushes))
}

fn branches(_: &SolverConfig) -> Result<String, String> {
    for m in [2, 3, 6] {
        if let Some(a) = branch_scan(m, 10_000) {
            return Err(format!("branch x{m} fails at {a}"));
        }
    }
    Ok("x2, x3, x6 up to 10000".into())
}

fn generator(_: &SolverConfig) -> Result<String, String> {
    let spec = builtin_spec("CASE5").ok_or("CASE5 missing")?.truncated(6);
    let mut prev: Option<TaskPeriods> = None;
    let mut n = 0;
    for a in generate_family(&spec).map_err(|e| e.to_string())? {
        ensure(is_member(&spec, &a).map_err(|e| e.to_string())?, || format!("{a} is not a member"))?;
        ensure(prev.as_ref().is_none_or(|p| p.periods() < a.periods()), || format!("{a} out of order"))?;
        prev = Some(a);
        n += 1;
    }
    Ok(format!("{n} CASE5 members up to 6"))
}

const CHECKS: &[(&str, Check)] = &[
    ("densities", densities),
    ("small-verdicts", small_verdicts),
    ("fold-bounds", fold_bounds),
    ("barriers", barriers),
    ("branch-scans", branches),
    ("generator", generator),
];

/// Runs every check; a failing check does not stop the others.
pub fn run(cfg: &SolverConfig) -> Vec<SelfCheck> {
    CHECKS
        .iter()
        .map(|&(name, f)| match f(cfg) {
            Ok(detail) => SelfCheck { name, ok: true, detail },
            Err(detail) => SelfCheck { name, ok: false, detail },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run(&SolverConfig::default()) {
            assert!(c.ok, "{}: {}", c.name, c.detail);
        }
    }
}
