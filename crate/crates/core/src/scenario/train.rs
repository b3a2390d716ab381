//! Offline model comparison on a two-path bandwidth dataset.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{to_json_pretty, Manifest, Result, ScenarioError};
use crate::predictor::{evaluate, EvalReport, Hyperparams, ModelKind};
use crate::telemetry::{generate_synthetic_wireless, WideTable};

/// Named bandwidth series, one per path.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub table: WideTable,
}

impl Dataset {
    pub fn series(&self) -> Result<Vec<(String, Vec<f64>)>> {
        self.table
            .columns
            .iter()
            .map(|c| Ok((c.clone(), self.table.column(c)?)))
            .collect()
    }
}

/// `synthetic` or `synthetic:<seed>` generates the two-regime wireless
/// traces; anything else is read as a wide CSV with a leading `t` column.
pub fn load_dataset(spec: &str, default_seed: u64) -> Result<Dataset> {
    if let Some(rest) = spec.strip_prefix("synthetic") {
        let seed = match rest.strip_prefix(':') {
            Some(s) => s
                .parse()
                .map_err(|_| ScenarioError::Dataset(format!("bad seed in {spec:?}")))?,
            None if rest.is_empty() => default_seed,
            None => return load_csv(spec),
        };
        return Ok(Dataset {
            name: format!("synthetic:{seed}"),
            table: generate_synthetic_wireless(seed).to_wide(),
        });
    }
    load_csv(spec)
}

fn load_csv(path: &str) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| ScenarioError::Dataset(format!("{path}: {e}")))?;
    let table = WideTable::read_csv(file)?;
    if table.columns.len() < 2 {
        return Err(ScenarioError::Dataset(format!(
            "{path}: need at least two path columns, found {}",
            table.columns.len()
        )));
    }
    Ok(Dataset {
        name: path.to_string(),
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub kinds: Vec<ModelKind>,
    pub n_lags: usize,
    pub seed: u64,
    pub hyperparams: Hyperparams,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            kinds: ModelKind::ALL.to_vec(),
            n_lags: 10,
            seed: 42,
            hyperparams: Hyperparams::default(),
        }
    }
}

pub fn train_eval(dataset: &Dataset, opts: &TrainOptions) -> Result<EvalReport> {
    let series = dataset.series()?;
    let paths: Vec<(&str, &[f64])> = series.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    Ok(evaluate(&paths, &opts.kinds, &opts.hyperparams, opts.n_lags, opts.seed)?)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    report: &'a EvalReport,
}

/// Writes `report.csv`, `scatter.csv`, `summary.json` and `manifest.json`.
pub fn write_train_outputs(report: &EvalReport, dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    report.write_report_csv(fs::File::create(dir.join("report.csv"))?)?;
    report.write_scatter_csv(fs::File::create(dir.join("scatter.csv"))?)?;
    let summary = TrainSummary {
        dataset: &dataset.name,
        report,
    };
    fs::write(dir.join("summary.json"), to_json_pretty(&summary)? + "\n")?;
    Manifest {
        schema_version: crate::SCHEMA_VERSION,
        kind: "train".into(),
        name: dataset.name.clone(),
        seed: report.seed,
        files: vec!["report.csv".into(), "scatter.csv".into(), "summary.json".into()],
    }
    .write(dir)
}
