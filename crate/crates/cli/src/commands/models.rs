use eps_core::classifier::save_checkpoint;
use eps_core::eval::{
    domain_matrix, emit_reports, evaluate_transfer, featurize_records, input_scale_for, CnnLearner,
    EvalReport, LabeledSet, Learner, ModelKind,
};
use eps_core::sim::DomainLabel;
use serde_json::json;

use crate::cli::{EvaluateArgs, TrainArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Outcome};
use crate::output::{Input, Output};

fn load_sets(
    path: &std::path::Path,
    kind: ModelKind,
    cfg: &RunConfig,
) -> CliResult<Vec<LabeledSet>> {
    let input = Input::open(path)?;
    let ids = input.record_ids();
    let header = input.header;
    Ok(featurize_records(
        &header,
        input.reader,
        ids.as_deref(),
        kind,
        &cfg.eval,
    )?)
}

/// Accepts the printed form (`day0-locA-wireless`) or anything the domain
/// parser takes.
fn select_domain(sets: Vec<LabeledSet>, want: &str) -> CliResult<LabeledSet> {
    let canonical = want
        .parse::<DomainLabel>()
        .map(|d| d.to_string())
        .unwrap_or_else(|_| want.to_string());
    let names: Vec<String> = sets.iter().map(|s| s.domain.clone()).collect();
    sets.into_iter()
        .find(|s| s.domain == canonical)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "domain `{want}` not in dataset (has {})",
                names.join(", ")
            ))
        })
}

fn merge(sets: Vec<LabeledSet>) -> CliResult<LabeledSet> {
    let domain = sets
        .iter()
        .map(|s| s.domain.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let (mut ids, mut labels, mut feats) = (Vec::new(), Vec::new(), Vec::new());
    for s in sets {
        ids.extend(s.record_ids);
        labels.extend(s.device_ids);
        feats.extend(s.features);
    }
    Ok(LabeledSet::new(domain, ids, labels, feats)?)
}

pub fn train(args: &TrainArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    if args.model == ModelKind::NearestCentroid {
        return Err(CliError::Usage(
            "train fits CNN models (eps-cnn or iq-cnn); nearest-centroid has nothing to save"
                .into(),
        ));
    }
    if let Some(e) = args.epochs {
        cfg.eval.train.epochs = e;
    }
    cfg.eval.train.validate()?;
    let sets = load_sets(&args.input, args.model, cfg)?;
    let set = match &args.domain {
        Some(d) => select_domain(sets, d)?,
        None => merge(sets)?,
    };
    if set.is_empty() {
        return Err(CliError::Usage("no training records".into()));
    }
    let classes: Vec<u16> = set.devices().into_iter().collect();
    let y: Vec<usize> = set
        .device_ids
        .iter()
        .map(|d| classes.binary_search(d).expect("label is a class"))
        .collect();
    let e = &cfg.eval;
    let mut learner = CnnLearner {
        preset: e.cnn,
        input_rows: 2,
        input_width: if args.model.uses_eps() {
            e.eps.n_fft
        } else {
            e.iq_window_len
        },
        input_scale: input_scale_for(args.model, e.eps.n_fft),
        train: e.train.clone(),
        model: None,
    };
    learner.fit(&set.features, &y, classes.len(), e.seed)?;
    let model = learner.model.as_ref().expect("fit stores the model");
    let ck = out.path("model.epsc");
    save_checkpoint(model, &ck)?;
    let pred = learner.predict(&set.features)?;
    let acc = pred.iter().zip(&y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64;
    let info = json!({
        "model_kind": args.model,
        "class_ids": classes,
        "train_domain": set.domain,
        "records": set.len(),
        "train_accuracy": acc,
        "parameters": model.config.parameter_count(),
    });
    std::fs::write(
        out.path("model.json"),
        serde_json::to_string_pretty(&info)? + "\n",
    )?;
    println!(
        "trained {} on {} records of {}: train accuracy {:.2}%, checkpoint {}",
        args.model,
        set.len(),
        set.domain,
        100.0 * acc,
        ck.display()
    );
    out.write_run(
        "train",
        cfg,
        json!({ "input": args.input, "model": args.model, "domain": args.domain }),
    )?;
    Ok(Outcome::Success)
}

pub fn evaluate(args: &EvaluateArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    if let Some(k) = args.folds {
        cfg.eval.folds = k;
    }
    if let Some(m) = args.min_accuracy {
        if !(0.0..=1.0).contains(&m) {
            return Err(CliError::Usage("--min-accuracy must be in [0, 1]".into()));
        }
    }
    cfg.eval.train.validate()?;
    let sets = load_sets(&args.input, args.model, cfg)?;
    let reports: Vec<EvalReport> = match &args.test {
        None => {
            let sets = match &args.train_domain {
                Some(d) => vec![select_domain(sets, d)?],
                None => sets,
            };
            domain_matrix(&sets, args.model, &cfg.eval)?
        }
        Some(test) => {
            let train = match &args.train_domain {
                Some(d) => select_domain(sets, d)?,
                None => merge(sets)?,
            };
            let tests = load_sets(test, args.model, cfg)?;
            let refs: Vec<&LabeledSet> = tests.iter().collect();
            evaluate_transfer(&train, &refs, args.model, &cfg.eval)?
        }
    };
    let path = out.path("report.tsv");
    emit_reports(&reports, &path)?;
    let mut ok = true;
    for r in &reports {
        println!(
            "{} {} -> {}: {:.2}%",
            r.model_kind,
            r.train_domain,
            r.test_domain,
            100.0 * r.mean_accuracy
        );
        ok &= args.min_accuracy.is_none_or(|m| r.mean_accuracy >= m);
    }
    println!("report written to {}", path.display());
    out.write_run(
        "evaluate",
        cfg,
        json!({
            "input": args.input,
            "test": args.test,
            "model": args.model,
            "train_domain": args.train_domain,
            "min_accuracy": args.min_accuracy,
        }),
    )?;
    Ok(if ok {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}
