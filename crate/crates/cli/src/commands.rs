use std::path::{Path, PathBuf};

use grda_core::data::{build_tpt_task, builtin_split, generate_dg, load_tpt_csv, Dataset, SplitConfig};
use grda_core::eval::{
    config_digest, emit_report, metrics_csv, per_domain_metrics, run_experiment, MetricTable, RunManifest,
};
use grda_core::graph::{pretrain_embeddings, NodeEmbeddingTable, PretrainConfig};
use grda_core::model::{History, Method, Model, Trainer};
use grda_core::theory::{analytic_from_json, estimate_density, lemma_self_test, verify_all, GridSpec};
use serde_json::Value;

use crate::config::{apply_overrides, train_config};
use crate::{Cli, CliError, Command, GenData};

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult {
    let out = cli.out.as_path();
    let verbose = cli.verbose;
    match cli.command {
        Command::GenData(GenData::Dg(a)) => gen_dg(&a, out),
        Command::GenData(GenData::Tpt(a)) => gen_tpt(&a, out),
        Command::PretrainEmbed(a) => pretrain(&a, out),
        Command::Train(a) => train(&a, out, verbose),
        Command::Eval(a) => eval(&a, out),
        Command::VerifyTheory(a) => verify(&a, out),
        Command::Report(a) => report(&a, out),
        Command::RunExperiment(a) => experiment(&a),
    }
}

fn create(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, body: &str) -> CliResult {
    std::fs::write(path, body).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_data(dir: &Path) -> CliResult<Dataset> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!("--data {}: no such directory", dir.display())));
    }
    Ok(Dataset::load_dir(dir)?)
}

fn summary_line(ds: &Dataset) -> String {
    format!(
        "{} domains ({} sources, {} targets), {} samples, {} labeled, {} edges",
        ds.n_domains(),
        ds.source_domains.len(),
        ds.target_domains.len(),
        ds.samples.len(),
        ds.labeled_count(),
        ds.graph.edge_count()
    )
}

fn gen_dg(a: &crate::DgArgs, out: &Path) -> CliResult {
    if a.domains < 2 {
        return Err(CliError::Input(format!("--domains must be at least 2, got {}", a.domains)));
    }
    if a.per_domain == 0 || a.per_domain % 2 != 0 {
        return Err(CliError::Input(format!("--per-domain must be even and positive, got {}", a.per_domain)));
    }
    if a.sources == 0 || a.sources >= a.domains {
        return Err(CliError::Input(format!("--sources must lie in 1..{}, got {}", a.domains, a.sources)));
    }
    let ds = generate_dg(a.domains, a.per_domain, a.sources, a.seed)?;
    create(out)?;
    ds.save_dir(out)?;
    println!("wrote {}: {}", out.display(), summary_line(&ds));
    Ok(())
}

fn gen_tpt(a: &crate::TptArgs, out: &Path) -> CliResult {
    if !a.csv.is_file() {
        return Err(CliError::Input(format!("--csv {}: no such file", a.csv.display())));
    }
    let split = match a.split.as_str() {
        "ew" | "ns" => builtin_split(&a.split)?,
        path if Path::new(path).is_file() => SplitConfig::load(Path::new(path))?,
        other => return Err(CliError::Input(format!("--split {other}: not a file, `ew` or `ns`"))),
    };
    let ds = build_tpt_task(&load_tpt_csv(&a.csv)?, &split)?;
    create(out)?;
    ds.save_dir(out)?;
    println!("wrote {}: {}", out.display(), summary_line(&ds));
    Ok(())
}

fn pretrain(a: &crate::PretrainArgs, out: &Path) -> CliResult {
    if a.k == 0 || a.steps == 0 || !(a.lr > 0.0) {
        return Err(CliError::Input("--k, --steps and --lr must be positive".into()));
    }
    let ds = load_data(&a.data)?;
    let cfg = PretrainConfig { k: a.k, lr: a.lr, steps: a.steps, seed: a.seed };
    let table = pretrain_embeddings(&ds.graph, &cfg)?;
    create(out)?;
    let path = out.join("embeddings.csv");
    table.save(&path)?;
    let auc = table.reconstruction_auc(&ds.graph).map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("wrote {}: k={} reconstruction AUC {auc}", path.display(), a.k);
    Ok(())
}

fn train(a: &crate::TrainArgs, out: &Path, verbose: u8) -> CliResult {
    let method = Method::parse(&a.method).map_err(|e| CliError::Input(format!("--method: {e}")))?;
    let flags = [
        ("lambda_d", a.lambda_d.map(Value::from)),
        ("lr", a.lr.map(Value::from)),
        ("lr_disc", a.lr_disc.map(Value::from)),
        ("epochs", a.epochs.map(Value::from)),
        ("batch_size", a.batch_size.map(Value::from)),
        ("seed", a.seed.map(Value::from)),
    ];
    let cfg = train_config(a.config.as_deref(), &a.set, &flags)?;
    let ds = load_data(&a.data)?;
    let embeddings = match &a.embeddings {
        Some(p) => NodeEmbeddingTable::load(p)?,
        None => pretrain_embeddings(&ds.graph, &PretrainConfig { seed: cfg.seed, ..Default::default() })?,
    };
    let model = Model::new(method, ds.task, ds.input_dim(), embeddings, cfg.hidden, cfg.seed)?;
    let mut trainer = Trainer::new(model, &ds, &cfg)?;
    for _ in 0..cfg.epochs {
        let r = trainer.run_epoch()?;
        if verbose > 0 {
            let ld = r.l_d.map_or("-".to_string(), |v| format!("{v:.4}"));
            eprintln!("epoch {:>4}  L_f {:.4}  L_d {ld}  ceiling {:.4}", r.epoch, r.l_f, r.ceiling);
        }
    }
    let (model, history) = trainer.finish();
    create(out)?;
    let stem = format!("{}_seed{}", method.name(), cfg.seed);
    let ckpt = out.join(format!("{stem}.ckpt"));
    model.save(&ckpt, Some(&cfg))?;
    write(&out.join(format!("history_{stem}.csv")), &history.to_csv())?;
    let last = history.records.last().expect("at least one epoch");
    println!("wrote {}: {} epochs, final L_f {:.4}", ckpt.display(), history.len(), last.l_f);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |x| format!("{x:.4}"))
}

fn print_table(t: &MetricTable) {
    let a = &t.aggregates;
    println!(
        "{} seed {}: target {} {}  level1 {}  level2 {}  level3 {}",
        t.method,
        t.seed,
        t.metric.name(),
        fmt_opt(a.target_mean),
        fmt_opt(a.levels[0]),
        fmt_opt(a.levels[1]),
        fmt_opt(a.levels[2])
    );
}

fn eval(a: &crate::EvalArgs, out: &Path) -> CliResult {
    let ds = load_data(&a.data)?;
    let mut tables = Vec::new();
    for path in &a.checkpoint {
        if !path.is_file() {
            return Err(CliError::Input(format!("--checkpoint {}: no such file", path.display())));
        }
        let (model, cfg) = Model::load(path)?;
        let cfg = cfg.unwrap_or_default();
        let t = per_domain_metrics(&model, &ds, model.method.name(), cfg.seed, &config_digest(&cfg))?;
        print_table(&t);
        tables.push(t);
    }
    create(out)?;
    for t in &tables {
        let body = serde_json::to_string_pretty(t).expect("table serializes");
        write(&out.join(format!("table_{}_seed{}.json", t.method, t.seed)), &body)?;
    }
    write(&out.join("metrics.csv"), &metrics_csv(&tables.iter().collect::<Vec<_>>()))?;
    Ok(())
}

fn verify(a: &crate::VerifyArgs, out: &Path) -> CliResult {
    if !(a.tol >= 0.0) {
        return Err(CliError::Input(format!("--tol must be non-negative, got {}", a.tol)));
    }
    let (graph, density) = match (&a.analytic, &a.checkpoint, &a.data) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("--analytic {}: {e}", path.display())))?;
            analytic_from_json(&text).map_err(|e| CliError::Input(format!("--analytic {}: {e}", path.display())))?
        }
        (None, Some(ckpt), Some(data)) => {
            let ds = load_data(data)?;
            let (model, _) = Model::load(ckpt)?;
            let spec = GridSpec { bins_per_axis: a.bins, reweight: a.reweight, ..Default::default() };
            (ds.graph.clone(), estimate_density(&model.encode_by_domain(&ds)?, &spec)?)
        }
        _ => return Err(CliError::Input("pass --analytic, or --checkpoint with --data".into())),
    };
    let mut reports = vec![lemma_self_test()?];
    reports.extend(verify_all(&density, &graph, a.tol)?);
    create(out)?;
    let mut failed = Vec::new();
    for r in &reports {
        let name = serde_json::to_value(r.kind).expect("kind serializes");
        let name = name.as_str().expect("kind is a string");
        write(&out.join(format!("theory_{name}.json")), &r.to_json()?)?;
        println!("{name:<13} residual {:.3e}  tolerance {:.1e}  {}", r.residual, r.tolerance, if r.verdict { "pass" } else { "FAIL" });
        if !r.verdict {
            failed.push(name.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("failed checks: {}", failed.join(", "))))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(flag: &str, path: &Path) -> CliResult<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{flag} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{flag} {}: {e}", path.display())))
}

fn report(a: &crate::ReportArgs, out: &Path) -> CliResult {
    let ds = load_data(&a.data)?;
    let tables: Vec<MetricTable> = a.tables.iter().map(|p| read_json("--tables", p)).collect::<CliResult<_>>()?;
    let mut histories = Vec::new();
    for p in &a.history {
        let text =
            std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("--history {}: {e}", p.display())))?;
        let name = p.file_stem().map_or("history".into(), |s| s.to_string_lossy().trim_start_matches("history_").to_string());
        histories.push((name, History::from_csv(&text, p)?));
    }
    let labels = ds.tpt.as_ref().map(|t| t.states.as_slice());
    let files = emit_report(&ds.graph, &ds.source_domains, labels, &tables, &histories, ds.seed, out)?;
    for row in grda_core::eval::summarize(&tables) {
        println!("{} ({} runs): target {} {} ± {}", row.method, row.runs, row.metric.name(), fmt_opt(row.target_mean), fmt_opt(row.target_std));
    }
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(())
}

fn experiment(a: &crate::ExperimentArgs) -> CliResult {
    let mut raw: Value = read_json("--manifest", &a.manifest)?;
    if !a.set.is_empty() {
        let train = raw
            .as_object_mut()
            .ok_or_else(|| CliError::Input("--manifest: expected a JSON object".into()))?
            .entry("train")
            .or_insert_with(|| Value::Object(Default::default()));
        let map = train.as_object_mut().ok_or_else(|| CliError::Input("--manifest: train must be an object".into()))?;
        apply_overrides(map, &a.set)?;
    }
    let manifest: RunManifest =
        serde_json::from_value(raw).map_err(|e| CliError::Input(format!("--manifest {}: {e}", a.manifest.display())))?;
    let manifest = relative_to(manifest, a.manifest.parent().unwrap_or(Path::new(".")));
    let result = run_experiment(&manifest)?;
    for f in &result.failures {
        eprintln!("run {} seed {} failed: {}", f.method, f.seed, f.error);
    }
    if result.runs.is_empty() {
        return Err(CliError::Input("every run failed".into()));
    }
    let tables: Vec<MetricTable> = result.runs.iter().map(|r| r.table.clone()).collect();
    result.emit_report(&manifest.out_dir)?;
    for row in grda_core::eval::summarize(&tables) {
        println!("{} ({} runs): target {} {} ± {}", row.method, row.runs, row.metric.name(), fmt_opt(row.target_mean), fmt_opt(row.target_std));
    }
    Ok(())
}

/// Resolves relative dataset paths against the manifest's directory; the
/// output directory stays relative to the working directory.
fn relative_to(mut m: RunManifest, base: &Path) -> RunManifest {
    use grda_core::eval::DatasetSpec;
    let fix = |p: &PathBuf| if p.is_relative() && !p.exists() { base.join(p) } else { p.clone() };
    m.dataset = match &m.dataset {
        DatasetSpec::Tpt { csv, split } => DatasetSpec::Tpt { csv: fix(csv), split: fix(split) },
        DatasetSpec::Dir { path } => DatasetSpec::Dir { path: fix(path) },
        other => other.clone(),
    };
    m
}
