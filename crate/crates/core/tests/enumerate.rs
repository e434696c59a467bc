mod support;

use std::collections::BTreeSet;

use pinwheel::enumerate::{
    builtin_spec, builtin_specs, generate_family, is_member, read_store, run_campaign, summarize_store,
    CampaignOptions, CertificateStore, Condition, DensityFn, DensityRule, EnumerateError, FamilySpec, Minimality,
};
use pinwheel::ratio::frac;
use pinwheel::solvers::SolverConfig;
use pinwheel::Kind;

fn generated(spec: &FamilySpec) -> Vec<Vec<u64>> {
    generate_family(spec).unwrap().map(|a| a.integer_periods().unwrap()).collect()
}

fn toy() -> FamilySpec {
    FamilySpec {
        name: "toy".into(),
        kind: Kind::Covering,
        max_element: 3,
        top_triple: None,
        range_constraints: vec![],
        rules: vec![DensityRule { when: Condition::Always, func: DensityFn::D, bound: frac(3, 2), strict: false }],
        minimality: Minimality::RemoveMax,
        max_jobs: None,
    }
}

#[test]
fn builtin_specs_agree_with_brute_force_up_to_six() {
    for spec in builtin_specs() {
        let spec = spec.truncated(6);
        let gen = generated(&spec);
        let set: BTreeSet<Vec<u64>> = gen.iter().cloned().collect();
        assert_eq!(set.len(), gen.len(), "{}: duplicates", spec.name);
        assert!(gen.windows(2).all(|w| w[0] < w[1]), "{}: not in canonical order", spec.name);
        assert_eq!(set, support::brute_family(&spec), "{}", spec.name);
    }
}

#[test]
fn toy_family_matches_brute_force() {
    let spec = toy();
    let gen: BTreeSet<Vec<u64>> = generated(&spec).into_iter().collect();
    assert!(!gen.is_empty());
    assert_eq!(gen, support::brute_family(&spec));
    for a in &gen {
        assert!(is_member(&spec, &pinwheel::TaskPeriods::covering(a)).unwrap());
    }
}

#[test]
fn claim5_at_four_matches_brute_force() {
    let spec = builtin_spec("CLAIM5").unwrap().truncated(4);
    let gen: BTreeSet<Vec<u64>> = generated(&spec).into_iter().collect();
    assert!(gen.iter().any(|a| a.starts_with(&[2, 2])));
    assert_eq!(gen, support::brute_family(&spec));
}

#[test]
fn contradictory_spec_is_empty_and_its_campaign_passes() {
    let spec = FamilySpec {
        name: "empty".into(),
        max_element: 2,
        rules: vec![DensityRule { when: Condition::Always, func: DensityFn::D, bound: frac(2, 1), strict: true }],
        minimality: Minimality::None,
        max_jobs: Some(2),
        ..toy()
    };
    assert!(generated(&spec).is_empty());
    let dir = tempfile::tempdir().unwrap();
    let r = run_campaign(&spec, dir.path().join("e.jsonl"), &CampaignOptions::default()).unwrap();
    assert_eq!(r.members, 0);
    assert!(r.pass);
}

#[test]
fn toy_campaign_round_trips_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.jsonl");
    let opts = CampaignOptions { workers: Some(2), chunk: 3, ..Default::default() };
    let first = run_campaign(&toy(), &path, &opts).unwrap();
    assert!(first.pass && first.unschedulable.is_empty());
    assert_eq!(first.members, generated(&toy()).len() as u64);

    let (header, certs) = read_store(&path).unwrap();
    assert_eq!(header.fingerprint, toy().fingerprint());
    assert_eq!(certs.len() as u64, first.members);
    for c in &certs {
        assert!(c.verify(&SolverConfig::default()).unwrap(), "{}", c.instance);
    }
    let again = run_campaign(&toy(), &path, &opts).unwrap();
    assert_eq!(again.new_solves, 0);
    assert_eq!(again.schedulable, first.schedulable);
    let summary = summarize_store(&path, Some(&SolverConfig::default())).unwrap();
    assert_eq!(summary.members, first.members);
}

#[test]
fn store_refuses_a_different_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.jsonl");
    run_campaign(&toy(), &path, &CampaignOptions::default()).unwrap();
    let other = builtin_spec("CASE5").unwrap();
    assert!(matches!(CertificateStore::open(&path, &other), Err(EnumerateError::FingerprintMismatch { .. })));
}

#[test]
fn first_claim5_members_are_schedulable() {
    let dir = tempfile::tempdir().unwrap();
    let opts = CampaignOptions { limit: Some(300), ..Default::default() };
    let r = run_campaign(&builtin_spec("CLAIM5").unwrap(), dir.path().join("c.jsonl"), &opts).unwrap();
    assert_eq!(r.members, 300);
    assert!(r.pass, "{:?}", r.unschedulable);
}
