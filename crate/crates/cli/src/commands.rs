use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use acbr::dataset::{load_csv, save_csv, sniff_schema, stratified_split, synth_generate, SynthConfig};
use acbr::explain::{local_function_curve, Explainer, ShapleyMode, EXACT_LIMIT};
use acbr::metrics::{compute_metrics, confusion, Metric, MetricTable};
use acbr::retrieval::default_k_grid;
use acbr::seed::derive;
use acbr::service::WHATIF_RANKING_PERMUTATIONS;
use acbr::training::{design, TrainingConfig};
use acbr::weighting::ScoringMethod;
use acbr::{Case, Dataset, ParseOptions, TrainedModel, Variant};

use crate::render;
use crate::{
    BenchmarkArgs, Cli, CliError, CliResult, Command, CurveArgs, ExplainArgs, PredictArgs, SynthArgs, TrainArgs,
    TrainingFlags,
};

pub fn run(cli: Cli) -> CliResult {
    let jobs = cli.jobs.unwrap_or_else(acbr::parallel::default_workers).max(1);
    match cli.command {
        Command::Train(args) => train(&args, cli.seed, jobs),
        Command::Predict(args) => predict(&args, jobs),
        Command::Explain(args) => explain(&args, cli.seed, jobs),
        Command::Benchmark(args) => benchmark(&args, cli.seed, jobs),
        Command::Serve(args) => crate::serve::serve(&args, jobs),
        Command::Synth(args) => synth(&args, cli.seed),
        Command::Curve(args) => curve(&args),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

fn emit(out: Option<&Path>, contents: &str) -> CliResult {
    match out {
        Some(path) => write_file(path, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .map_err(|source| CliError::Output { path: "<stdout>".into(), source })
        }
    }
}

fn parse<T: FromStr<Err = acbr::Error>>(s: &str) -> CliResult<T> {
    T::from_str(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_labeled(path: &Path) -> CliResult<Dataset> {
    let schema = sniff_schema(path)?;
    Ok(load_csv(path, &schema, &ParseOptions::default())?)
}

pub fn training_config(flags: &TrainingFlags, seed: u64, jobs: usize) -> CliResult<TrainingConfig> {
    let methods = flags.methods.iter().map(|m| parse::<ScoringMethod>(m)).collect::<CliResult<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(CliError::Usage("at least one scoring method is required".into()));
    }
    Ok(TrainingConfig {
        methods,
        metric: parse::<Metric>(&flags.metric)?,
        folds: flags.folds,
        swarm: flags.swarm,
        iterations: flags.pso_iters,
        k_grid: flags.k_grid.clone().unwrap_or_else(default_k_grid),
        undersample: !flags.no_undersample,
        fit_probability: !flags.no_probability,
        seed,
        workers: jobs,
        ..TrainingConfig::default()
    })
}

fn train(args: &TrainArgs, seed: u64, jobs: usize) -> CliResult {
    let config = training_config(&args.training, seed, jobs)?;
    let variant = parse::<Variant>(&args.variant)?;
    let data = load_labeled(&args.data)?;
    let (solvent, insolvent) = data.class_counts();
    eprintln!("training {variant} on {} cases ({solvent} solvent, {insolvent} insolvent)", data.len());
    let model = design(&data, variant, &config)?;
    model.save(&args.out)?;
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&model.training).map_err(acbr::Error::from)?;
        write_file(path, &(json + "\n"))?;
    }
    print!("{}", render::training_summary(&model));
    println!("model written to {}", args.out.display());
    Ok(())
}

fn predict(args: &PredictArgs, jobs: usize) -> CliResult {
    let model = TrainedModel::load(&args.model)?;
    let data = load_csv(&args.data, &model.schema, &ParseOptions { require_labels: false })?;
    let predictions = model.predict_batch(&data, args.exclude_self, jobs)?;
    let has_truth = data.cases.iter().any(|c| c.label.is_some());

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id", "label", "probability", "probability_exact", "neighbors"];
    if has_truth {
        header.push("truth");
    }
    let mut write = |row: Vec<String>| w.write_record(&row).map_err(|e| CliError::Internal(e.to_string()));
    write(header.into_iter().map(String::from).collect())?;
    for (p, case) in predictions.iter().zip(&data.cases) {
        let neighbors: Vec<&str> = p.neighbors.iter().map(|n| model.references()[n.index].id.as_str()).collect();
        let mut row = vec![
            p.id.clone(),
            p.label.as_u8().to_string(),
            format!("{:.4}", p.probability),
            p.probability.to_string(),
            neighbors.join(";"),
        ];
        if has_truth {
            row.push(case.label.map(|l| l.as_u8().to_string()).unwrap_or_default());
        }
        write(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    emit(args.out.as_deref(), &String::from_utf8_lossy(&bytes))?;

    let scored: Vec<_> = predictions.iter().zip(&data.cases).filter_map(|(p, c)| c.label.map(|t| (p.label, t))).collect();
    if !scored.is_empty() {
        let correct = scored.iter().filter(|(p, t)| p == t).count();
        eprintln!("accuracy {:.4} on {} labeled rows", correct as f64 / scored.len() as f64, scored.len());
    }
    Ok(())
}

fn find_case(model: &TrainedModel, data: Option<&Dataset>, id: &str) -> CliResult<Case> {
    let found = match data {
        Some(d) => d.find(id).cloned(),
        None => model.references().iter().find(|c| c.id == id).cloned(),
    };
    found.ok_or_else(|| acbr::Error::UnknownCase(id.to_string()).into())
}

fn explain(args: &ExplainArgs, seed: u64, jobs: usize) -> CliResult {
    let model = TrainedModel::load(&args.model)?;
    let data = match &args.data {
        Some(path) => Some(load_csv(path, &model.schema, &ParseOptions { require_labels: false })?),
        None => None,
    };
    let query = find_case(&model, data.as_ref(), &args.case)?;
    let explainer = Explainer::new(&model).with_workers(jobs).excluding_self(args.exclude_self);
    let mc_seed = derive(seed, "shapley");
    let mode = match args.shapley.as_deref() {
        None => None,
        Some("exact") => Some(ShapleyMode::Exact),
        Some("mc") => Some(ShapleyMode::MonteCarlo { samples: args.samples, seed: mc_seed }),
        Some(other) => return Err(CliError::Usage(format!("unknown Shapley mode `{other}` (exact or mc)"))),
    };

    let target = args.whatif_target.as_deref().map(|id| find_case(&model, data.as_ref(), id)).transpose()?;
    let ordering = match &target {
        None => Vec::new(),
        Some(_) => match args.order.as_str() {
            "shapley" => {
                let shapley = if model.n_features() <= EXACT_LIMIT {
                    explainer.shapley_exact(&query)?
                } else {
                    explainer.shapley_mc(&query, WHATIF_RANKING_PERMUTATIONS, mc_seed)?
                };
                rank_desc(&shapley.values.iter().map(|v| v.abs()).collect::<Vec<_>>())
            }
            "relevance" => rank_desc(&explainer.relevance().iter().map(|r| r.percent).collect::<Vec<_>>()),
            list => list
                .split(',')
                .map(|key| {
                    model.schema.position(key).ok_or_else(|| acbr::Error::UnknownFeature(key.trim().into()).into())
                })
                .collect::<CliResult<Vec<_>>>()?,
        },
    };
    let report = explainer.report(&query, mode, target.as_ref().map(|t| (t, ordering.as_slice())))?;
    print!("{}", render::explanation(&model, &report));
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&report).map_err(acbr::Error::from)?;
        write_file(path, &(json + "\n"))?;
    }
    Ok(())
}

/// Indices sorted by decreasing value, ties by index.
fn rank_desc(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

fn benchmark(args: &BenchmarkArgs, seed: u64, jobs: usize) -> CliResult {
    let config = training_config(&args.training, seed, jobs)?;
    let variants = args.variants.iter().map(|v| parse::<Variant>(v)).collect::<CliResult<Vec<_>>>()?;
    if variants.is_empty() {
        return Err(CliError::Usage("at least one variant is required".into()));
    }
    let data = load_labeled(&args.data)?;
    let (train, test) = stratified_split(&data, args.test_fraction, derive(seed, "split"))?;
    let truth = test.labels()?;
    let mut table = MetricTable::default();
    for variant in variants {
        eprintln!("training {variant}");
        let model = design(&train, variant, &config)?;
        let predicted: Vec<_> = model.predict_batch(&test, false, jobs)?.into_iter().map(|p| p.label).collect();
        let report = compute_metrics(&confusion(&predicted, &truth)?, args.beta);
        table.rows.push((variant.to_string(), report));
    }
    println!("{} training / {} test cases, seed {seed}", train.len(), test.len());
    print!("{}", table.to_text());
    if let Some(path) = &args.csv {
        write_file(path, &table.to_csv())?;
    }
    Ok(())
}

fn synth(args: &SynthArgs, seed: u64) -> CliResult {
    let mut config = if args.benchmark {
        SynthConfig::asymmetric_benchmark()
    } else {
        SynthConfig::new(args.features, 1000, 1000, args.skew)
    };
    config.solvent = args.solvent.unwrap_or(config.solvent);
    config.insolvent = args.insolvent.unwrap_or(config.insolvent);
    config.missing_rate = args.missing_rate;
    let data = synth_generate(&config, seed)?;
    save_csv(&data, &args.out)?;
    let (solvent, insolvent) = data.class_counts();
    eprintln!("wrote {} cases ({solvent} solvent, {insolvent} insolvent) to {}", data.len(), args.out.display());
    Ok(())
}

fn curve(args: &CurveArgs) -> CliResult {
    let model = TrainedModel::load(&args.model)?;
    let j = model.schema.position(&args.feature).ok_or_else(|| acbr::Error::UnknownFeature(args.feature.clone()))?;
    let mut out = String::from("diff,similarity\n");
    for (d, s) in local_function_curve(&model, j, args.points)? {
        out.push_str(&format!("{d},{s}\n"));
    }
    emit(args.out.as_deref(), &out)
}
