use eps_core::dataset::{build_scenario, ScenarioKind, ScenarioSpec};
use eps_core::registry::{
    load_registry, save_registry, AuditLog, Registry, RegistryConfig, Screening, Session, Verdict,
};
use eps_core::sim::{draw_population, draw_rogues, IQFrame, PopulationConfig};

fn frames_of(plan: &eps_core::dataset::ScenarioPlan, device: u16) -> Vec<IQFrame> {
    (0..plan.len())
        .map(|i| plan.frame(i).unwrap())
        .filter(|f| f.device_id == Some(device))
        .collect()
}

#[test]
fn enroll_persist_verify_and_audit() {
    let pop_cfg = PopulationConfig {
        device_count: 3,
        ..PopulationConfig::default()
    };
    let pop = draw_population(&pop_cfg, 21).unwrap();
    let spec = ScenarioSpec::of_kind(ScenarioKind::RandomLocation);
    let plan = build_scenario(&pop, &spec, 26, 22).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("audit.jsonl");

    let mut reg = Registry::new(RegistryConfig::default())
        .unwrap()
        .with_audit_log(AuditLog::new(&log));
    for d in &pop {
        let f = frames_of(&plan, d.device_id);
        reg.enroll(d.device_id, &f[..20], 1_700_000_000).unwrap();
    }
    let path = dir.path().join("reg.epsr");
    save_registry(&reg, &path).unwrap();
    let back = load_registry(&path).unwrap();
    assert_eq!(back.len(), 3);

    for d in &pop {
        let probes = &frames_of(&plan, d.device_id)[20..];
        for f in probes {
            let a = reg.verify(f, d.device_id, None).unwrap();
            let b = back.verify(f, d.device_id, None).unwrap();
            assert_eq!(a, b, "a stored registry decides like the original");
            assert_eq!(a.verdict, Verdict::Accepted);
        }
        let session =
            Session::bind("s", &reg.verify(&probes[0], d.device_id, None).unwrap()).unwrap();
        let run = reg.continuous_auth(probes, &session, 3, None).unwrap();
        assert!(run.iter().all(|v| v.verdict == Verdict::Accepted));
    }

    let rogues = draw_rogues(&pop_cfg, 2, 3_000.0, 100, 23);
    let rogue_plan = build_scenario(&rogues, &spec, 3, 24).unwrap();
    for i in 0..rogue_plan.len() {
        let f = rogue_plan.frame(i).unwrap();
        assert_eq!(reg.screen_rogue(&f, None).unwrap(), Screening::Rogue);
        let claim = pop[0].device_id;
        assert!(Session::bind("x", &reg.verify(&f, claim, None).unwrap()).is_err());
    }

    let events = AuditLog::new(&log).read().unwrap();
    let count = |e: &str| events.iter().filter(|x| x.event == e).count();
    assert_eq!(count("enroll"), 3);
    assert_eq!(count("screen"), rogue_plan.len());
    assert!(events.iter().all(|e| e.input_sha256.len() == 64));
}
