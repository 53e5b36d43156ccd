use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rfa_core::config::{DataConfig, ExperimentConfig, LanguageSource, RunConfig, TableFormat};
use rfa_core::data::{save_long_csv, save_outcome_csv, save_wide_csv, GroupLabel, OutcomeVector};
use rfa_core::experiments::{
    bench_default, bench_pipeline, compare_fs_strategies, generate_synthetic, render_curves_csv, render_table, run_cv,
    sweep_factors, sweep_kbest, ExperimentReport, FoldPlan, ModelSpec, SyntheticSpec,
};
use rfa_core::pipelines::{self, Family, FittedModel};
use rfa_core::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum Sweep {
    Kbest,
    Factors,
    Fs,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn finish(mut report: ExperimentReport, cfg: &RunConfig, out: &Path, curves: bool) -> Result<()> {
    report.config = Some(serde_json::to_value(cfg)?);
    report.timestamp_unix = timestamp();
    write(&out.join("report.json"), &report.to_json()?)?;
    write(&out.join("table.txt"), &render_table(&report))?;
    if curves {
        write(&out.join("curves.csv"), &render_curves_csv(&report.curves))?;
    }
    log::info!("wrote results to {}", out.display());
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<(rfa_core::data::Dataset, FoldPlan)> {
    let (data, drops) = cfg.load_dataset()?;
    log::info!(
        "{} instances after alignment; dropped per source: {:?}",
        drops.kept,
        drops.dropped
    );
    let plan = FoldPlan::new(data.instance_ids(), cfg.experiment.folds, cfg.experiment.seed)?;
    Ok((data, plan))
}

pub fn run(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<()> {
    let (data, plan) = load(cfg)?;
    let specs = ModelSpec::families(&cfg.experiment.families, &cfg.pipeline_config());
    let report = run_cv(&data, &specs, &plan, jobs)?;
    finish(report, cfg, out, false)
}

/// `families` replaces the sweep's own family list when given.
pub fn sweep(kind: Sweep, cfg: &RunConfig, families: Option<&[Family]>, out: &Path, jobs: usize) -> Result<()> {
    let (data, plan) = load(cfg)?;
    let base = cfg.pipeline_config();
    let s = &cfg.sweep;
    let report = match kind {
        Sweep::Kbest => sweep_kbest(
            &data,
            &s.kbest,
            families.unwrap_or(&s.kbest_families),
            &base,
            &plan,
            jobs,
        )?,
        Sweep::Factors => {
            let d = data.factors().n_features();
            let pool = if s.interactions {
                d + d * d.saturating_sub(1) / 2
            } else {
                d
            };
            let counts = if s.factor_counts.is_empty() {
                (1..=pool).collect()
            } else {
                s.factor_counts.clone()
            };
            sweep_factors(
                &data,
                s.factor_method,
                &counts,
                families.unwrap_or(&s.factor_families),
                s.interactions,
                &base,
                &plan,
                jobs,
            )?
        }
        Sweep::Fs => compare_fs_strategies(
            &data,
            families.unwrap_or(&s.fs_families),
            &s.strategies,
            &base,
            &plan,
            jobs,
        )?,
    };
    finish(report, cfg, out, true)
}

pub fn synth(spec_path: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => SyntheticSpec::from_toml_str(&read(p)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
            other => other,
        })?,
        None => bench_default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (data, truth) = generate_synthetic(&spec)?;

    let mut language = Vec::new();
    for table in data.language() {
        let (name, format) = match table.group() {
            GroupLabel::Topics => ("topics.csv", TableFormat::Wide),
            _ => ("ngrams.csv", TableFormat::Long),
        };
        let path = out.join(name);
        match format {
            TableFormat::Long => save_long_csv(table, &path)?,
            TableFormat::Wide => save_wide_csv(table, &path)?,
        }
        language.push(LanguageSource {
            group: table.group(),
            path: PathBuf::from(name),
            format,
        });
    }
    save_wide_csv(data.factors(), out.join("factors.csv"))?;
    save_outcome_csv(data.outcome(), out.join("outcome.csv"))?;
    write(&out.join("truth.json"), &serde_json::to_string_pretty(&truth)?)?;

    let cfg = RunConfig {
        data: DataConfig {
            language,
            factors: Some(PathBuf::from("factors.csv")),
            factor_columns: None,
            outcome: PathBuf::from("outcome.csv"),
            outcome_column: None,
            wordcount: None,
            wordcount_column: None,
        },
        preprocessing: Default::default(),
        pipeline: bench_pipeline(),
        experiment: ExperimentConfig {
            families: Family::ALL.to_vec(),
            folds: 10,
            seed: spec.seed,
        },
        sweep: Default::default(),
        base_dir: PathBuf::new(),
    }
    .with_seed(spec.seed);
    write(&out.join("config.toml"), &cfg.to_toml_string()?)?;
    log::info!("wrote {} instances to {}", data.n_instances(), out.display());
    Ok(())
}

pub fn fit(cfg: &RunConfig, family: Family, out: &Path) -> Result<()> {
    let (data, _) = cfg.load_dataset()?;
    let model = pipelines::fit(family, &data, &cfg.pipeline_config())?;
    write(&out.join("model.json"), &model.to_json()?)
}

pub fn predict(model_path: &Path, config: &Path, out: &Path) -> Result<()> {
    let model = FittedModel::from_json(&read(model_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", model_path.display())))?;
    let cfg = RunConfig::load(config)?;
    let data = cfg.load_features()?;
    let preds = pipelines::predict(&model, &data)?;
    let path = out.join("predictions.csv");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_outcome_csv(
        &OutcomeVector::new("prediction", data.instance_ids().to_vec(), preds)?,
        path,
    )
}
