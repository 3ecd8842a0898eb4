use std::io::Write;

use eps_core::dataset::{
    build_scenario, DatasetHeader, DatasetWriter, Manifest, PayloadKind, Record,
};
use eps_core::rng::derive_seed;
use eps_core::sim::{
    apply_impairments, count_envelope_humps, draw_population, generate_dsss_baseband,
    random_payload, DeviceProfile, DsssConfig, HumpConfig,
};
use rayon::prelude::*;
use serde_json::json;

use crate::cli::{EpsArgs, Figure3Args, SimulateArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Outcome};
use crate::output::{file_stem, slug, Input, Output};

const STREAM_POPULATION: u64 = 1;
const STREAM_PLAN: u64 = 2;
const STREAM_HUMP_DEMO: u64 = 3;

pub fn simulate(args: &SimulateArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    let sc = &mut cfg.simulate;
    if let Some(k) = args.scenario {
        sc.scenario.kind = k;
    }
    if let Some(n) = args.devices {
        sc.population.device_count = n;
    }
    if let Some(n) = args.frames {
        sc.frames_per_device = n;
    }
    if let Some(s) = args.snr {
        sc.scenario.base_snr_db = Some(s);
    }
    let seed = cfg.seed.unwrap_or(0);
    let sc = &cfg.simulate;
    let pop = draw_population(&sc.population, derive_seed(seed, &[STREAM_POPULATION]))?;
    let plan = build_scenario(
        &pop,
        &sc.scenario,
        sc.frames_per_device,
        derive_seed(seed, &[STREAM_PLAN]),
    )?;
    let path = out.path(&format!("{}.epsf", sc.scenario.kind));
    plan.write_iq(&path)?;
    Manifest::for_plan(&plan, PayloadKind::Iq, None).save(&path)?;
    let domains: Vec<String> = sc
        .scenario
        .domains()
        .iter()
        .map(|d| d.to_string())
        .collect();
    println!(
        "wrote {} frames ({} devices, domains {}) to {}",
        plan.len(),
        pop.len(),
        domains.join(", "),
        path.display()
    );
    out.write_run(
        "simulate",
        cfg,
        json!({ "dataset": path, "domains": domains }),
    )?;
    Ok(Outcome::Success)
}

pub fn eps(args: &EpsArgs, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    let mut input = Input::open(&args.input)?;
    input.require(PayloadKind::Iq, "eps")?;
    let ecfg = cfg.eval.eps.clone();
    let g = eps_core::Eps::new(ecfg.clone())?;
    let fs = input.header.sample_rate_hz;
    let n = input.header.record_count as usize;
    let header = DatasetHeader::new(PayloadKind::Eps, fs, ecfg.n_fft, n)?;
    let path = out.path(&format!("{}-eps.epsf", file_stem(&args.input)));
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    let mut w = DatasetWriter::new(file, header)?;
    let plots = out.path("plots");
    std::fs::create_dir_all(&plots)?;
    let mut plotted = std::collections::BTreeSet::new();
    let mut chunk = Vec::new();
    let mut reader = input.reader.by_ref().peekable();
    while reader.peek().is_some() {
        chunk.clear();
        for r in reader.by_ref().take(128) {
            chunk.push(r?);
        }
        let tensors: Vec<eps_core::EpsTensor> = chunk
            .par_iter()
            .map(|r| g.eps_of_frame(&r.to_frame(fs)?))
            .collect::<eps_core::Result<_>>()?;
        for t in &tensors {
            w.write(&Record::from_eps(t)?)?;
            let (Some(d), Some(dom)) = (t.source_device, t.source_domain) else {
                continue;
            };
            if plotted.insert((dom.to_string(), d)) {
                let p = plots.join(format!("eps_{}_dev{d}.tsv", slug(&dom.to_string())));
                let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
                t.write_plot_text(&mut f)?;
                f.flush()?;
            }
        }
    }
    w.finish()?;
    if let Some(mut m) = input.manifest.take() {
        m.payload_kind = PayloadKind::Eps;
        m.frame_len = ecfg.n_fft;
        m.eps = Some(ecfg);
        m.save(&path)?;
    }
    println!(
        "wrote {n} EPS tensors to {} and {} plot tables to {}",
        path.display(),
        plotted.len(),
        plots.display()
    );
    out.write_run("eps", cfg, json!({ "input": args.input, "dataset": path }))?;
    Ok(Outcome::Success)
}

const HUMP_DEMO_CFOS_HZ: [f64; 4] = [0.0, 50.0, 100.0, 200.0];

pub fn figure3(args: &Figure3Args, cfg: &mut RunConfig, out: &Output) -> CliResult<Outcome> {
    if !(args.duration_ms > 0.0 && args.duration_ms.is_finite()) {
        return Err(CliError::Usage("--duration-ms must be positive".into()));
    }
    let seed = cfg.seed.unwrap_or(0);
    let dsss = DsssConfig::default();
    let fs = dsss.sample_rate_hz;
    let t = args.duration_ms / 1e3;
    let cfg_long = DsssConfig {
        target_len: (fs * t).round() as usize,
        ..dsss
    };
    let base = generate_dsss_baseband(
        &random_payload(120, derive_seed(seed, &[STREAM_HUMP_DEMO])),
        &cfg_long,
    )?;
    let front = eps_core::FrontEnd::standard()?;
    let max_cfo = HUMP_DEMO_CFOS_HZ.iter().copied().fold(0.0, f64::max) * 2.0;
    let hump_cfg = HumpConfig::for_max_cfo(max_cfo);
    let dir = out.path("figure3");
    std::fs::create_dir_all(&dir)?;
    let mut table = String::from("cfo_hz\texpected_humps\tcounted_humps\n");
    let mut ok = true;
    for cfo in HUMP_DEMO_CFOS_HZ {
        let frame = apply_impairments(
            &base,
            &DeviceProfile::ideal(0).with_cfo(cfo),
            derive_seed(seed, &[STREAM_HUMP_DEMO, cfo as u64]),
        )?;
        let i = frame.i_rail();
        let env = front.smoothed_envelope(&i)?;
        let counted = count_envelope_humps(&i, &front, &hump_cfg)?;
        let expected = (2.0 * cfo * t).round() as usize;
        ok &= if expected == 0 {
            counted == 0
        } else {
            counted.abs_diff(expected) <= 1
        };
        table.push_str(&format!("{cfo}\t{expected}\t{counted}\n"));

        // Raw I samples are thinned to the envelope rate; envelope times are
        // centered on the samples each output averages.
        let n = i.len();
        let step = n / env.len().max(1);
        let offset = (n - step * env.len()) / 2;
        let mut w = std::io::BufWriter::new(std::fs::File::create(
            dir.join(format!("trace_{cfo}hz.tsv")),
        )?);
        writeln!(w, "time_s\ti_component\tenvelope")?;
        for (k, e) in env.samples().iter().enumerate() {
            let idx = offset + k * step;
            writeln!(w, "{:e}\t{:e}\t{:e}", idx as f64 / fs, i.samples()[idx], e)?;
        }
        w.flush()?;
        println!("CFO {cfo:>5} Hz: {counted} humps (2*cfo*T = {expected})");
    }
    std::fs::write(dir.join("humps.tsv"), table)?;
    out.write_run(
        "figure3",
        cfg,
        json!({ "duration_ms": args.duration_ms, "cfos_hz": HUMP_DEMO_CFOS_HZ }),
    )?;
    Ok(if ok {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}
