use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rbml_core::data::{
    dataset_fingerprint, load_features, read_label_map, save_features, stratified_split, synth_blobs,
    uniform_split, BlobSpec, FileFormat,
};
use rbml_core::experiment::{detailed_row, train_and_report, GridOutcome, LoadedData, LoadedPool, RunConfig};
use rbml_core::persist::{load_model, save_model, write_atomic, ModelPayload, Provenance};
use rbml_core::planner::{BlockKind, InputShape, NetConfig, NetPlan, Preset};
use rbml_core::projection::{pca2_fit, pca2_project, scatter_svg, write_scatter_csv};
use rbml_core::rebalance::{build_variant, VariantKind, VariantManifest};
use rbml_core::report::{emit_report, ReportFormat, ResultsTable};
use rbml_core::{plan_network, run_gridsearch, FeatureDataset, GridPreset};
use serde::Serialize;

use crate::{Cli, Command, Format};

/// A flag combination the argument parser cannot reject on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Inspect(a) => inspect(cli, &a.data, a.label_map.as_deref()),
        Command::Split(a) => split(cli, a),
        Command::Synth(a) => synth(cli, a),
        Command::Rebalance(a) => rebalance(cli, a),
        Command::Train(a) => train(cli, a.variant.as_deref()),
        Command::Gridsearch(a) => gridsearch(cli, a),
        Command::Eval(a) => eval(cli, &a.model, &a.data),
        Command::Pca(a) => pca(cli, &a.data, a.label_map.as_deref()),
        Command::PlanCnn(a) => plan_cnn(cli, a),
        Command::Report(a) => report(cli, &a.input, a.top_k),
    }
}

fn load(path: &Path, label_map: Option<&Path>) -> Result<FeatureDataset> {
    let map = label_map.map(read_label_map).transpose()?;
    Ok(load_features(path, FileFormat::from_path(path), map.as_deref())?)
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_deref().ok_or_else(|| usage("--config is required"))?;
    Ok(RunConfig::from_file(path)?)
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn report_ext(format: Format) -> &'static str {
    match format {
        Format::Markdown => "md",
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct Summary<'a> {
    path: String,
    rows: usize,
    features: usize,
    classes: Vec<ClassCount<'a>>,
    synthetic_rows: usize,
    imbalance_ratio: Option<f64>,
    fingerprint: String,
}

#[derive(Serialize)]
struct ClassCount<'a> {
    name: &'a str,
    count: usize,
}

fn inspect(cli: &Cli, path: &Path, label_map: Option<&Path>) -> Result<()> {
    let ds = load(path, label_map)?;
    let dist = ds.distribution();
    let minority = dist.counts.iter().copied().filter(|&c| c > 0).min();
    let summary = Summary {
        path: path.display().to_string(),
        rows: ds.n_rows(),
        features: ds.n_features(),
        classes: ds
            .class_names()
            .iter()
            .zip(&dist.counts)
            .map(|(name, &count)| ClassCount { name, count })
            .collect(),
        synthetic_rows: (0..ds.n_rows()).filter(|&i| ds.is_synthetic(i)).count(),
        imbalance_ratio: minority.map(|m| dist.majority() as f64 / m as f64),
        fingerprint: dataset_fingerprint(&ds),
    };
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Csv => {
            println!("class,count");
            for c in &summary.classes {
                println!("{},{}", c.name, c.count);
            }
        }
        Format::Markdown => {
            println!("{}: {} rows x {} features", summary.path, summary.rows, summary.features);
            for c in &summary.classes {
                println!("  {:<20} {:>8}", c.name, c.count);
            }
            if let Some(r) = summary.imbalance_ratio {
                println!("imbalance ratio {r:.2}");
            }
            println!("synthetic rows {}", summary.synthetic_rows);
            println!("fingerprint {}", summary.fingerprint);
        }
    }
    Ok(())
}

fn split(cli: &Cli, a: &crate::SplitArgs) -> Result<()> {
    let ds = load(&a.data, a.label_map.as_deref())?;
    let seed = cli.seed.unwrap_or(0);
    let pair = if a.uniform {
        uniform_split(&ds, a.fraction, seed)?
    } else {
        stratified_split(&ds, a.fraction, seed)?
    };
    let dir = out_dir(cli, None)?;
    let format = FileFormat::from_path(&a.data);
    let ext = a.data.extension().map_or("bin".into(), |e| e.to_string_lossy().into_owned());
    let name = stem(&a.data);
    for (part, data) in [("train", &pair.train), ("val", &pair.val)] {
        let path = dir.join(format!("{name}.{part}.{ext}"));
        save_features(data, &path, format)?;
        println!("{} rows -> {}", data.n_rows(), path.display());
    }
    Ok(())
}

fn synth(cli: &Cli, a: &crate::SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let specs: Vec<BlobSpec> =
        serde_json::from_str(&text).map_err(|e| usage(format!("bad blob spec {}: {e}", a.spec.display())))?;
    let ds = synth_blobs(&specs, cli.seed.unwrap_or(0))?;
    let path = out_dir(cli, None)?.join(&a.name);
    save_features(&ds, &path, FileFormat::from_path(&path))?;
    println!("{} rows -> {}", ds.n_rows(), path.display());
    Ok(())
}

fn rebalance(cli: &Cli, a: &crate::RebalanceArgs) -> Result<()> {
    let cfg = cli.config.as_ref().map(|_| config(cli)).transpose()?;
    let kind: VariantKind = match (&a.variant, cfg.as_ref().and_then(|c| c.variant)) {
        (Some(v), _) => v.parse()?,
        (None, Some(v)) => v,
        (None, None) => return Err(usage("--variant is required without a config variant")),
    };
    let input = a
        .input
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.train.original.clone()))
        .ok_or_else(|| usage("--input is required without --config"))?;
    let extras_path = a
        .extras
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.train.extras.clone()));
    let label_map = cfg.as_ref().and_then(|c| c.label_map.clone());
    let original = load(&input, label_map.as_deref())?;
    let extras = extras_path
        .as_deref()
        .map(|p| load_features(p, FileFormat::from_path(p), Some(original.class_names())))
        .transpose()?;

    let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let defaults = cfg.as_ref().map(|c| c.variant_params).unwrap_or_default();
    let mut spec = defaults.spec(kind, seed);
    if let Some(k) = a.smote_k {
        spec.smote_k = k;
    }
    if let Some(t) = a.theta {
        spec.partial_theta = t;
    }
    if let Some(t) = a.target {
        spec.balanced_target = t;
    }
    let out = build_variant(&original, extras.as_ref(), &spec)?;
    let dir = out_dir(cli, cfg.as_ref())?;
    let path = dir.join(format!("{}.{}", kind.name(), a.ext));
    save_features(&out, &path, FileFormat::from_path(&path))?;
    let manifest = VariantManifest::describe(&spec, &original, extras.as_ref(), &out);
    write_json(&dir.join(format!("{}.manifest.json", kind.name())), &manifest)?;
    println!("{kind}: {} rows -> {}", out.n_rows(), path.display());
    Ok(())
}

fn train(cli: &Cli, variant: Option<&str>) -> Result<()> {
    let mut cfg = config(cli)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let spec = cfg
        .model
        .clone()
        .ok_or_else(|| usage("config has no `model` to train"))?
        .with_seed(cfg.seed);
    let kind = match variant {
        Some(v) => v.parse()?,
        None => cfg.variant.unwrap_or(VariantKind::Original),
    };
    let data = LoadedData::load(&cfg)?;
    let variant_spec = cfg.variant_params.spec(kind, cfg.seed);
    let (model, trained_on, table) = train_and_report(&data, &spec, &variant_spec)?;

    let dir = out_dir(cli, Some(&cfg))?;
    let payload = ModelPayload::new(
        model,
        Some(spec),
        Provenance {
            variant: Some(variant_spec),
            seed: cfg.seed,
            dataset_fingerprint: Some(dataset_fingerprint(&trained_on)),
            class_names: trained_on.class_names().to_vec(),
        },
    );
    let model_path = dir.join("model.json");
    save_model(&payload, &model_path)?;
    let report_path = dir.join(format!("train.{}", report_ext(cli.format)));
    emit_report(&table, cli.format.into(), &report_path)?;
    print!("{}", table.to_markdown());
    println!("model -> {}", model_path.display());
    Ok(())
}

fn gridsearch(cli: &Cli, a: &crate::GridArgs) -> Result<()> {
    let mut cfg = config(cli)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &a.preset {
        let preset: GridPreset = serde_json::from_value(serde_json::Value::String(p.clone()))
            .map_err(|_| usage(format!("unknown grid preset {p:?}")))?;
        cfg.grid = None;
        cfg.grid_preset = Some(preset);
    }
    let top_k = a.top_k.unwrap_or(cfg.top_k);
    let outcome = run_gridsearch(&cfg)?;
    if outcome.failed_cells == outcome.n_cells {
        let first = outcome.cells.first().and_then(|c| c.error.clone()).unwrap_or_default();
        return Err(rbml_core::Error::Training(format!("every grid cell failed; first: {first}")).into());
    }
    let dir = out_dir(cli, Some(&cfg))?;
    write_json(&dir.join("grid.json"), &outcome)?;
    let table = outcome.table("grid search", top_k);
    emit_report(&table, cli.format.into(), &dir.join(format!("grid.{}", report_ext(cli.format))))?;
    print!("{}", table.to_markdown());
    if outcome.failed_cells > 0 {
        log::warn!("{} of {} cells failed", outcome.failed_cells, outcome.n_cells);
    }
    Ok(())
}

fn eval(cli: &Cli, model_path: &Path, data: &[PathBuf]) -> Result<()> {
    let payload = load_model(model_path)?;
    let names = payload.provenance.class_names.clone();
    let pools: Vec<LoadedPool> = data
        .iter()
        .map(|p| {
            Ok(LoadedPool {
                name: stem(p),
                val: None,
                test: Some(load_features(p, FileFormat::from_path(p), Some(&names))?),
            })
        })
        .collect::<Result<_>>()?;
    let row = detailed_row(&stem(model_path), &payload.model, &pools)?;
    let table = ResultsTable {
        title: format!("{} model evaluation", payload.kind),
        pools: pools.iter().map(|p| p.name.clone()).collect(),
        rows: vec![row],
        notes: Vec::new(),
    };
    let path = out_dir(cli, None)?.join(format!("eval.{}", report_ext(cli.format)));
    emit_report(&table, cli.format.into(), &path)?;
    print!("{}", table.to_markdown());
    Ok(())
}

fn pca(cli: &Cli, data: &[PathBuf], label_map: Option<&Path>) -> Result<()> {
    let dir = out_dir(cli, None)?;
    for path in data {
        let ds = load(path, label_map)?;
        let model = pca2_fit(&ds)?;
        let proj = pca2_project(&model, &ds)?;
        let name = stem(path);
        let mut csv = Vec::new();
        write_scatter_csv(&proj, &mut csv)?;
        write_atomic(&dir.join(format!("{name}.pca.csv")), &csv)?;
        let svg = scatter_svg(&proj, &format!("{name}: PC1 vs PC2"));
        write_atomic(&dir.join(format!("{name}.pca.svg")), svg.as_bytes())?;
        println!(
            "{name}: explained variance {:.6} / {:.6}",
            model.explained_variance[0], model.explained_variance[1]
        );
    }
    Ok(())
}

fn parse_input(s: &str) -> Result<InputShape> {
    let dims: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("input shape must look like 224x224x3, got {s:?}")))?;
    match dims[..] {
        [height, width, channels] => Ok(InputShape {
            height,
            width,
            channels,
        }),
        _ => Err(usage(format!("input shape must have three dimensions, got {s:?}"))),
    }
}

fn plan_cnn(cli: &Cli, a: &crate::PlanArgs) -> Result<()> {
    let mut cfg = match &a.preset {
        Some(p) => p.parse::<Preset>()?.config(),
        None => {
            let nresb = a.nresb.clone().ok_or_else(|| usage("give --preset or --nresb"))?;
            if nresb.len() != 3 {
                return Err(usage("--nresb takes three comma-separated counts"));
            }
            NetConfig {
                nf: a.nf.ok_or_else(|| usage("--nf is required without --preset"))?,
                block_kind: a.block.as_deref().unwrap_or("plain").parse::<BlockKind>()?,
                nresb: [nresb[0], nresb[1], nresb[2]],
                batchnorm: !a.no_batchnorm,
                n_classes: a.classes,
                input: parse_input(&a.input)?,
            }
        }
    };
    if a.preset.is_some() {
        cfg.n_classes = a.classes;
        cfg.input = parse_input(&a.input)?;
        if a.no_batchnorm {
            cfg.batchnorm = false;
        }
    }
    let plan: NetPlan = plan_network(&cfg)?;
    let text = match cli.format {
        Format::Markdown => plan.to_table(),
        Format::Csv => plan.to_csv(),
        Format::Json => serde_json::to_string_pretty(&plan)? + "\n",
    };
    print!("{text}");
    Ok(())
}

fn report(cli: &Cli, input: &Path, top_k: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let table = if let Ok(t) = serde_json::from_str::<ResultsTable>(&text) {
        let mut t = t;
        if let Some(k) = top_k {
            t.rows.truncate(k);
        }
        t
    } else {
        let outcome: GridOutcome = serde_json::from_str(&text)
            .map_err(|e| rbml_core::Error::Format(format!("{} is neither a results table nor a grid outcome: {e}", input.display())))?;
        outcome.table("grid search", top_k.unwrap_or(outcome.cells.len()))
    };
    let format: ReportFormat = cli.format.into();
    let path = out_dir(cli, None)?.join(format!("{}.{}", stem(input), report_ext(cli.format)));
    if path == input {
        return Err(usage("report output would overwrite its input; pick another --out or --format"));
    }
    let written = emit_report(&table, format, &path)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_shape_parsing() {
        let s = parse_input("32x16x3").unwrap();
        assert_eq!((s.height, s.width, s.channels), (32, 16, 3));
        assert!(parse_input("32x16").is_err());
        assert!(parse_input("axbxc").is_err());
    }
}
