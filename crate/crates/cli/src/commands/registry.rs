use std::collections::BTreeMap;

use eps_core::dataset::{PayloadKind, Record};
use eps_core::registry::{
    hash_vectors, load_registry, save_registry, AuditLog, AuthDecision, Registry, Screening,
    Session, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cli::{AuthArgs, EnrollArgs, VerifyArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Outcome};
use crate::output::{Input, Output};

const AUDIT_LOG: &str = "audit.jsonl";

/// Flattened EPS of every record in file order, with the records' labels.
/// IQ records are converted chunk by chunk so frames never pile up.
fn eps_vectors(reg: &Registry, input: Input) -> CliResult<Vec<(u16, Vec<f64>)>> {
    let fs = input.header.sample_rate_hz;
    let kind = input.header.payload_kind;
    let n_fft = reg.config.eps.n_fft;
    if kind == PayloadKind::Eps && input.header.frame_len as usize != n_fft {
        return Err(CliError::Usage(format!(
            "EPS records have {} bins, the registry expects {n_fft}",
            input.header.frame_len
        )));
    }
    let mut out = Vec::new();
    let mut chunk: Vec<Record> = Vec::new();
    let mut it = input.reader.peekable();
    while it.peek().is_some() {
        chunk.clear();
        for r in it.by_ref().take(128) {
            chunk.push(r?);
        }
        let v: Vec<(u16, Vec<f64>)> = chunk
            .par_iter()
            .map(|r| {
                let e = match kind {
                    PayloadKind::Iq => reg.eps_vector(&r.to_frame(fs)?)?,
                    PayloadKind::Eps => r.payload.iter().map(|&x| x as f64).collect(),
                };
                Ok((r.device_id, e))
            })
            .collect::<eps_core::Result<_>>()?;
        out.extend(v);
    }
    Ok(out)
}

pub fn enroll(args: &EnrollArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    let reg = match &args.registry {
        Some(p) => load_registry(p)?,
        None => Registry::new(cfg.registry.registry_config())?,
    };
    let mut reg = reg.with_audit_log(AuditLog::new(out.path(AUDIT_LOG)));
    let input = Input::open(&args.input)?;
    let mut per: BTreeMap<u16, Vec<Vec<f64>>> = BTreeMap::new();
    for (id, e) in eps_vectors(&reg, input)? {
        let v = per.entry(id).or_default();
        if args.frames.is_none_or(|n| v.len() < n) {
            v.push(e);
        }
    }
    if per.is_empty() {
        return Err(CliError::Usage("dataset has no records to enroll".into()));
    }
    for (id, eps) in &per {
        let t = reg.enroll_eps(*id, eps, args.enrolled_at)?;
        println!(
            "device {id}: {} frames, dispersion {:.2e}, calibrated tau {:.4}",
            t.n_enroll_frames, t.dispersion, t.calibrated_tau
        );
    }
    let path = out.path("registry.epsr");
    save_registry(&reg, &path)?;
    println!(
        "{} devices enrolled; registry {}",
        reg.len(),
        path.display()
    );
    out.write_run(
        "enroll",
        cfg,
        json!({
            "input": args.input,
            "base_registry": args.registry,
            "frames": args.frames,
            "enrolled_at": args.enrolled_at,
            "registry": path,
        }),
    )?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct DecisionRow {
    record: usize,
    label: u16,
    #[serde(flatten)]
    decision: AuthDecision,
}

#[derive(Serialize)]
struct ScreenRow {
    record: usize,
    label: u16,
    screening: Screening,
    best_score: f64,
    threshold: f64,
}

pub fn verify(args: &VerifyArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    let reg = load_registry(&args.registry)?.with_audit_log(AuditLog::new(out.path(AUDIT_LOG)));
    let tau = args.tau.or(cfg.registry.tau);
    let eps = eps_vectors(&reg, Input::open(&args.input)?)?;
    if args.screen {
        let rows: Vec<ScreenRow> = eps
            .iter()
            .enumerate()
            .map(|(i, (label, e))| {
                let (screening, best_score, threshold) = reg.screen_rogue_eps(e, tau)?;
                reg.audit_screening(screening, best_score, threshold, hash_vectors([e]))?;
                Ok(ScreenRow {
                    record: i,
                    label: *label,
                    screening,
                    best_score,
                    threshold,
                })
            })
            .collect::<eps_core::Result<_>>()?;
        let rogue = rows
            .iter()
            .filter(|r| r.screening == Screening::Rogue)
            .count();
        let path = out.write_json_lines("screening.jsonl", &rows)?;
        println!(
            "{rogue}/{} frames screened as rogue; details in {}",
            rows.len(),
            path.display()
        );
    } else {
        let mut rows = Vec::with_capacity(eps.len());
        for (i, (label, e)) in eps.iter().enumerate() {
            let d = reg.verify_eps(e, args.claim.unwrap_or(*label), tau)?;
            reg.audit_decision("verify", &d, hash_vectors([e]))?;
            rows.push(DecisionRow {
                record: i,
                label: *label,
                decision: d,
            });
        }
        let accepted = rows
            .iter()
            .filter(|r| r.decision.verdict == Verdict::Accepted)
            .count();
        let path = out.write_json_lines("decisions.jsonl", &rows)?;
        println!(
            "{accepted}/{} claims accepted; decisions in {}",
            rows.len(),
            path.display()
        );
    }
    out.write_run(
        "verify",
        cfg,
        json!({
            "registry": args.registry,
            "input": args.input,
            "claim": args.claim,
            "tau": tau,
            "screen": args.screen,
        }),
    )?;
    Ok(Outcome::Success)
}

pub fn auth(args: &AuthArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    if let Some(w) = args.window {
        cfg.registry.window = w;
    }
    let window = cfg.registry.window;
    let tau = args.tau.or(cfg.registry.tau);
    let reg = load_registry(&args.registry)?.with_audit_log(AuditLog::new(out.path(AUDIT_LOG)));
    let eps = eps_vectors(&reg, Input::open(&args.input)?)?;
    let Some((first_label, first)) = eps.first() else {
        return Err(CliError::Usage("stream has no frames".into()));
    };
    let opening = reg.verify_eps(first, args.claim, tau)?;
    reg.audit_decision("verify", &opening, hash_vectors([first]))?;
    let mut rows = vec![DecisionRow {
        record: 0,
        label: *first_label,
        decision: opening.clone(),
    }];
    let inputs = json!({
        "registry": args.registry,
        "input": args.input,
        "claim": args.claim,
        "window": window,
        "tau": tau,
    });
    let Ok(session) = Session::bind("session-0", &opening) else {
        out.write_json_lines("auth.jsonl", &rows)?;
        println!(
            "opening frame rejected for claimed device {} (score {:.4}, threshold {:.4}); no session",
            args.claim, opening.score, opening.threshold_used
        );
        out.write_run("auth", cfg, inputs)?;
        return Ok(Outcome::Failure);
    };
    let rest: Vec<Vec<f64>> = eps[1..].iter().map(|(_, e)| e.clone()).collect();
    let decisions = reg.continuous_auth_eps(&rest, &session, window, tau)?;
    for (k, d) in decisions.into_iter().enumerate() {
        if d.verdict == Verdict::Alert {
            reg.audit_decision("alert", &d, hash_vectors([&rest[k]]))?;
        }
        rows.push(DecisionRow {
            record: k + 1,
            label: eps[k + 1].0,
            decision: d,
        });
    }
    let path = out.write_json_lines("auth.jsonl", &rows)?;
    match rows.iter().find(|r| r.decision.verdict == Verdict::Alert) {
        Some(r) => println!(
            "session for device {}: first alert at frame {} (window mean {:.4} < {:.4}); details in {}",
            args.claim,
            r.record,
            r.decision.score,
            r.decision.threshold_used,
            path.display()
        ),
        None => println!(
            "session for device {}: {} frames, no alert; details in {}",
            args.claim,
            rows.len(),
            path.display()
        ),
    }
    out.write_run("auth", cfg, inputs)?;
    Ok(Outcome::Success)
}
