use eps_core::acceptance::{AcceptanceSuite, CheckOutcome, Status, CRITERIA};

use crate::cli::AcceptArgs;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Outcome};
use crate::output::Output;

/// Overrides applied on top of the `[accept]` section.
fn apply_profile(name: &str, cfg: &mut RunConfig) -> CliResult<()> {
    match name {
        "full" => {}
        "quick" => {
            cfg.accept.frames_per_device = 30;
            cfg.accept.transfer_models = 1;
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown profile `{other}` (expected full or quick)"
            )))
        }
    }
    cfg.profile = Some(name.to_string());
    Ok(())
}

pub fn accept(args: &AcceptArgs, cfg: &mut RunConfig, out: Option<&Output>) -> CliResult<Outcome> {
    let profile = args
        .profile
        .clone()
        .or_else(|| cfg.profile.clone())
        .unwrap_or_else(|| "full".into());
    apply_profile(&profile, cfg)?;
    if args.no_cnn {
        cfg.accept.cnn = false;
    }
    for id in &args.only {
        if !CRITERIA.iter().any(|(c, _)| c.eq_ignore_ascii_case(id)) {
            return Err(CliError::Usage(format!("unknown criterion `{id}`")));
        }
    }
    let suite = AcceptanceSuite::new(cfg.accept.clone())?;
    let report = |o: &CheckOutcome| println!("{o}");
    let outcomes: Vec<CheckOutcome> = if args.only.is_empty() {
        suite.run_all(report)
    } else {
        let mut v = Vec::new();
        for id in &args.only {
            let o = suite.run(id)?;
            report(&o);
            v.push(o);
        }
        v
    };
    let count = |s: Status| outcomes.iter().filter(|o| o.status == s).count();
    let failed = count(Status::Fail);
    println!(
        "acceptance ({profile}): {} passed, {failed} failed, {} skipped",
        count(Status::Pass),
        count(Status::Skip)
    );
    if let Some(out) = out {
        let path = out.path("acceptance.json");
        std::fs::write(&path, serde_json::to_string_pretty(&outcomes)? + "\n")?;
        out.write_run(
            "accept",
            cfg,
            serde_json::json!({ "only": args.only, "no_cnn": args.no_cnn }),
        )?;
    }
    Ok(if failed == 0 {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}
