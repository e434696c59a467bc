//! Solve every member of a family and persist one certificate per member.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::generate_family;
use super::spec::FamilySpec;
use super::store::{read_store, CertificateStore};
use super::EnumerateError;
use crate::instances::{Kind, TaskPeriods};
use crate::schedule::{verify_covering, verify_packing};
use crate::solvers::{decide, solve, Outcome, SolverConfig, SolverError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub spec: String,
    pub instance: TaskPeriods,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub solver: String,
    pub elapsed_us: u64,
}

impl Certificate {
    /// Re-checks the certificate from scratch: a schedule must pass the
    /// verifier, an unschedulable verdict must be reproduced by the exact
    /// decider.
    pub fn verify(&self, cfg: &SolverConfig) -> Result<bool, EnumerateError> {
        match &self.outcome {
            Outcome::Schedulable(s) => Ok(match self.instance.kind() {
                Kind::Packing => verify_packing(&self.instance, s).map_err(SolverError::from)?,
                Kind::Covering => verify_covering(&self.instance, s).map_err(SolverError::from)?,
            }),
            Outcome::Unschedulable => Ok(!decide(&self.instance, cfg)?.outcome.is_schedulable()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignOptions {
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Stop after this many members in canonical order.
    pub limit: Option<u64>,
    pub solver: SolverConfig,
    /// Members handed to the pool at a time.
    pub chunk: usize,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions { workers: None, limit: None, solver: SolverConfig::from_env(), chunk: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub spec: String,
    pub fingerprint: String,
    pub members: u64,
    pub schedulable: u64,
    pub unschedulable: Vec<TaskPeriods>,
    pub indeterminate: Vec<TaskPeriods>,
    /// Members solved in this run; the rest came from the store.
    pub new_solves: u64,
    pub wall_ms: u64,
    pub pass: bool,
}

impl CampaignReport {
    fn new(spec: &FamilySpec) -> Self {
        CampaignReport {
            spec: spec.name.clone(),
            fingerprint: spec.fingerprint(),
            members: 0,
            schedulable: 0,
            unschedulable: Vec::new(),
            indeterminate: Vec::new(),
            new_solves: 0,
            wall_ms: 0,
            pass: false,
        }
    }

    fn count(&mut self, a: &TaskPeriods, outcome: Option<&Outcome>) {
        self.members += 1;
        match outcome {
            Some(Outcome::Schedulable(_)) => self.schedulable += 1,
            Some(Outcome::Unschedulable) => self.unschedulable.push(a.clone()),
            None => self.indeterminate.push(a.clone()),
        }
    }

    fn finish(&mut self, start: Instant) {
        self.wall_ms = start.elapsed().as_millis() as u64;
        self.pass = self.unschedulable.is_empty() && self.indeterminate.is_empty();
    }
}

fn certify(spec: &str, a: &TaskPeriods, cfg: &SolverConfig) -> Result<Option<Certificate>, EnumerateError> {
    match solve(a, cfg) {
        Ok((v, solver)) => Ok(Some(Certificate {
            spec: spec.to_string(),
            instance: a.clone(),
            outcome: v.outcome,
            solver: solver.to_string(),
            elapsed_us: v.stats.elapsed.as_micros() as u64,
        })),
        Err(SolverError::Indeterminate { budget }) => {
            log::error!("{spec}: {a} is indeterminate within {budget} states");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Generates the family in canonical order, solves members not yet in the
/// store on a worker pool, and appends certificates in canonical order.
/// Indeterminate members are reported, never stored, and fail the campaign.
pub fn run_campaign(
    spec: &FamilySpec,
    store_path: impl AsRef<Path>,
    opts: &CampaignOptions,
) -> Result<CampaignReport, EnumerateError> {
    let start = Instant::now();
    let (mut store, existing) = CertificateStore::open(&store_path, spec)?;
    let mut done: std::collections::HashMap<TaskPeriods, Outcome> =
        existing.into_iter().map(|c| (c.instance, c.outcome)).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| EnumerateError::Pool(e.to_string()))?;

    let mut report = CampaignReport::new(spec);
    let mut members = generate_family(spec)?;
    let limit = opts.limit.unwrap_or(u64::MAX);
    let chunk = opts.chunk.max(1);
    let mut taken = 0u64;
    loop {
        let batch: Vec<TaskPeriods> = members.by_ref().take(chunk.min((limit - taken) as usize)).collect();
        if batch.is_empty() {
            break;
        }
        taken += batch.len() as u64;
        let todo: Vec<&TaskPeriods> = batch.iter().filter(|a| !done.contains_key(*a)).collect();
        let solved: Vec<Result<Option<Certificate>, EnumerateError>> =
            pool.install(|| todo.par_iter().map(|a| certify(&spec.name, a, &opts.solver)).collect());
        for (a, r) in todo.iter().zip(solved) {
            report.new_solves += 1;
            if let Some(cert) = r? {
                store.append(&cert)?;
                done.insert((*a).clone(), cert.outcome);
            }
        }
        for a in &batch {
            report.count(a, done.get(a));
        }
        log::info!(
            "{}: {} members, {} schedulable, {} unschedulable, {} indeterminate, {} new",
            spec.name,
            report.members,
            report.schedulable,
            report.unschedulable.len(),
            report.indeterminate.len(),
            report.new_solves
        );
        if taken >= limit {
            break;
        }
    }
    report.finish(start);
    Ok(report)
}

/// Rebuilds a report from a store alone, optionally re-verifying each
/// certificate. A certificate that fails verification counts as
/// indeterminate.
pub fn summarize_store(path: impl AsRef<Path>, verify: Option<&SolverConfig>) -> Result<CampaignReport, EnumerateError> {
    let start = Instant::now();
    let (header, certs) = read_store(path)?;
    let mut report = CampaignReport::new(&header.spec);
    let mut seen = HashSet::new();
    for c in &certs {
        if !seen.insert(&c.instance) {
            continue;
        }
        let ok = match verify {
            Some(cfg) => c.verify(cfg)?,
            None => true,
        };
        report.count(&c.instance, ok.then_some(&c.outcome));
    }
    report.finish(start);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::spec::builtin_spec;

    #[test]
    fn certificate_json_shape() {
        let a = TaskPeriods::covering(&[2, 2]);
        let c = certify("toy", &a, &SolverConfig::default()).unwrap().unwrap();
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["result"], "schedulable");
        assert!(v["schedule"]["cycle"].is_array());
        assert!(c.verify(&SolverConfig::default()).unwrap());
        let back: Certificate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn small_campaign_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let spec = builtin_spec("CASE5").unwrap().truncated(5);
        let opts = CampaignOptions { workers: Some(2), chunk: 7, ..Default::default() };
        let first = run_campaign(&spec, &path, &opts).unwrap();
        assert!(first.pass);
        assert_eq!(first.new_solves, first.members);
        let again = run_campaign(&spec, &path, &opts).unwrap();
        assert_eq!(again.new_solves, 0);
        assert_eq!(again.members, first.members);
        let summary = summarize_store(&path, Some(&SolverConfig::default())).unwrap();
        assert_eq!(summary.schedulable, first.schedulable);
    }
}
