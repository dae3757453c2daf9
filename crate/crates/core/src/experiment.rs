//! End-to-end experiment orchestration: train the two anchor networks,
//! calibrate the bound constants from their test MAEs, train the deep
//! roster, and emit the error-decomposition report with per-model curves.
//!
//! Every random choice derives from one master seed, artifacts carry no
//! timestamps, and collections serialize in fixed order, so a rerun with the
//! same configuration is byte-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{calibrate, BoundInputs, BoundReport, Calibration};
use crate::config::{config_hash, parse_widths, KvConfig};
use crate::curves::emit_curves;
use crate::data::{corrupt_agrn, load_idx, split, synth_teacher_dataset, Dataset};
use crate::error::{Error, Result};
use crate::network::{init_network, LossKind, Network, NetworkSpec, TopMode};
use crate::numerics::SeededRng;
use crate::training::{format_significant, train, TrainConfig, TrainLog};

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    /// Teacher-generated vectors on the unit ball.
    Synthetic {
        input_dim: usize,
        output_dim: usize,
        samples: usize,
        teacher_width: usize,
        noise_variance: f64,
        test_fraction: f64,
    },
    /// IDX image corpora corrupted with additive Gaussian noise. With no
    /// separate test file, train and test subsets are consecutive slices of
    /// the train corpus.
    Idx {
        train_images: PathBuf,
        test_images: Option<PathBuf>,
        train_count: usize,
        test_count: usize,
        agrn_variance: f64,
    },
}

/// One non-anchor roster entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterModel {
    pub name: String,
    pub hidden_widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub anchor1_width: usize,
    pub anchor2_width: usize,
    pub dnns: Vec<RosterModel>,
    pub train: TrainConfig,
    pub sharpness: f64,
    /// Differential order `r` of the bound; no default, the choice is the
    /// experimenter's and the report echoes `r / d`.
    pub differential_order: f64,
    pub delta: f64,
    pub per_dimension_mae: bool,
    pub include_hoeffding: bool,
    pub master_seed: u64,
    /// Raw configuration text when parsed from a file; the canonical
    /// rendering otherwise. Hashed into the report.
    #[serde(skip)]
    pub config_text: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.anchor2_width <= self.anchor1_width {
            return Err(Error::Config(format!(
                "anchor widths must satisfy l2 > l1, got {} and {}",
                self.anchor1_width, self.anchor2_width
            )));
        }
        if self.anchor1_width == 0 {
            return Err(Error::Config("anchor widths must be positive".into()));
        }
        for m in &self.dnns {
            if m.hidden_widths.is_empty() || m.hidden_widths.contains(&0) {
                return Err(Error::Config(format!(
                    "model {:?} needs positive hidden widths",
                    m.name
                )));
            }
        }
        if !(self.differential_order > 0.0) || !self.differential_order.is_finite() {
            return Err(Error::Config(format!(
                "differential order must be positive, got {}",
                self.differential_order
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.sharpness > 0.0) || !self.sharpness.is_finite() {
            return Err(Error::Config(format!(
                "sharpness must be positive, got {}",
                self.sharpness
            )));
        }
        match &self.source {
            DataSource::Synthetic {
                input_dim,
                output_dim,
                samples,
                teacher_width,
                noise_variance,
                test_fraction,
            } => {
                if *input_dim == 0 || *output_dim == 0 || *samples < 2 || *teacher_width == 0 {
                    return Err(Error::Config("synthetic source needs positive dims/width and at least 2 samples".into()));
                }
                if *noise_variance < 0.0 {
                    return Err(Error::Config("noise variance must be nonnegative".into()));
                }
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return Err(Error::Config("test fraction must be in (0, 1)".into()));
                }
            }
            DataSource::Idx {
                train_count,
                test_count,
                agrn_variance,
                ..
            } => {
                if *train_count == 0 || *test_count == 0 {
                    return Err(Error::Config("subset counts must be positive".into()));
                }
                if *agrn_variance < 0.0 {
                    return Err(Error::Config("noise variance must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    /// Reads the dotted key-value form produced by [`Self::canonical_text`]
    /// (and written by hand in config files).
    pub fn from_kv(cfg: &KvConfig) -> Result<ExperimentConfig> {
        let source = match cfg.require("data.source")? {
            "synthetic" => DataSource::Synthetic {
                input_dim: cfg.get_usize("data.input_dim", 16)?,
                output_dim: cfg.get_usize("data.output_dim", 16)?,
                samples: cfg.get_usize("data.samples", 2000)?,
                teacher_width: cfg.get_usize("data.teacher_width", 96)?,
                noise_variance: cfg.get_f64("data.noise_variance", 0.0)?,
                test_fraction: cfg.get_f64("data.test_fraction", 0.2)?,
            },
            "idx" => DataSource::Idx {
                train_images: PathBuf::from(cfg.require("data.train_images")?),
                test_images: cfg.get("data.test_images").map(PathBuf::from),
                train_count: cfg.get_usize("data.train_count", 2000)?,
                test_count: cfg.get_usize("data.test_count", 500)?,
                agrn_variance: cfg.get_f64("data.agrn_variance", 1.0)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "data.source must be synthetic or idx, got {other:?}"
                )))
            }
        };
        let top_mode = match cfg.get("train.top_mode").unwrap_or("normalize") {
            "normalize" => TopMode::Normalize,
            "measure" => TopMode::Measure,
            other => {
                return Err(Error::Config(format!(
                    "train.top_mode must be normalize or measure, got {other:?}"
                )))
            }
        };
        let loss = match cfg.get("train.loss").unwrap_or("mae") {
            "mae" => LossKind::Mae,
            "mse" => LossKind::Mse,
            other => {
                return Err(Error::Config(format!(
                    "train.loss must be mae or mse, got {other:?}"
                )))
            }
        };
        let mut dnns = Vec::new();
        for (key, value) in cfg.with_prefix("roster.dnn") {
            dnns.push(RosterModel {
                name: key.trim_start_matches("roster.").to_string(),
                hidden_widths: parse_widths(value)?,
            });
        }
        let r = cfg
            .require("bounds.r")?
            .parse::<f64>()
            .map_err(|_| Error::Config("bounds.r must be a number".into()))?;
        let config = ExperimentConfig {
            source,
            anchor1_width: cfg.require("roster.anchor1")?.parse().map_err(|_| {
                Error::Config("roster.anchor1 must be a positive integer".into())
            })?,
            anchor2_width: cfg.require("roster.anchor2")?.parse().map_err(|_| {
                Error::Config("roster.anchor2 must be a positive integer".into())
            })?,
            dnns,
            train: TrainConfig {
                learning_rate: cfg.get_f64("train.learning_rate", 0.02)?,
                momentum: cfg.get_f64("train.momentum", 0.2)?,
                epochs: cfg.get_usize("train.epochs", 30)?,
                batch_size: cfg.get_usize("train.batch_size", 64)?,
                seed: 0,
                lambda_hidden: cfg.get_f64("train.lambda_hidden", 1.0)?,
                top_mode,
                loss,
            },
            sharpness: cfg.get_f64("train.sharpness", crate::network::DEFAULT_SHARPNESS)?,
            differential_order: r,
            delta: cfg.get_f64("bounds.delta", 0.95)?,
            per_dimension_mae: cfg.get_bool("bounds.per_dimension", false)?,
            include_hoeffding: cfg.get_bool("bounds.include_hoeffding", false)?,
            master_seed: cfg.get_u64("experiment.seed", 42)?,
            config_text: Some(cfg.raw().to_string()),
        };
        config.validate()?;
        Ok(config)
    }

    /// Renders the configuration in the key-value file format; parsing the
    /// result reproduces the configuration.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        match &self.source {
            DataSource::Synthetic {
                input_dim,
                output_dim,
                samples,
                teacher_width,
                noise_variance,
                test_fraction,
            } => {
                out.push_str("data.source = synthetic\n");
                out.push_str(&format!("data.input_dim = {input_dim}\n"));
                out.push_str(&format!("data.output_dim = {output_dim}\n"));
                out.push_str(&format!("data.samples = {samples}\n"));
                out.push_str(&format!("data.teacher_width = {teacher_width}\n"));
                out.push_str(&format!("data.noise_variance = {noise_variance}\n"));
                out.push_str(&format!("data.test_fraction = {test_fraction}\n"));
            }
            DataSource::Idx {
                train_images,
                test_images,
                train_count,
                test_count,
                agrn_variance,
            } => {
                out.push_str("data.source = idx\n");
                out.push_str(&format!("data.train_images = {}\n", train_images.display()));
                if let Some(t) = test_images {
                    out.push_str(&format!("data.test_images = {}\n", t.display()));
                }
                out.push_str(&format!("data.train_count = {train_count}\n"));
                out.push_str(&format!("data.test_count = {test_count}\n"));
                out.push_str(&format!("data.agrn_variance = {agrn_variance}\n"));
            }
        }
        out.push_str(&format!("roster.anchor1 = {}\n", self.anchor1_width));
        out.push_str(&format!("roster.anchor2 = {}\n", self.anchor2_width));
        for m in &self.dnns {
            let widths: Vec<String> = m.hidden_widths.iter().map(|w| w.to_string()).collect();
            out.push_str(&format!("roster.{} = {}\n", m.name, widths.join("-")));
        }
        out.push_str(&format!("train.learning_rate = {}\n", self.train.learning_rate));
        out.push_str(&format!("train.momentum = {}\n", self.train.momentum));
        out.push_str(&format!("train.epochs = {}\n", self.train.epochs));
        out.push_str(&format!("train.batch_size = {}\n", self.train.batch_size));
        out.push_str(&format!("train.lambda_hidden = {}\n", self.train.lambda_hidden));
        out.push_str(&format!(
            "train.top_mode = {}\n",
            match self.train.top_mode {
                TopMode::Normalize => "normalize",
                TopMode::Measure => "measure",
            }
        ));
        out.push_str(&format!(
            "train.loss = {}\n",
            match self.train.loss {
                LossKind::Mae => "mae",
                LossKind::Mse => "mse",
            }
        ));
        out.push_str(&format!("train.sharpness = {}\n", self.sharpness));
        out.push_str(&format!("bounds.r = {}\n", self.differential_order));
        out.push_str(&format!("bounds.delta = {}\n", self.delta));
        out.push_str(&format!(
            "bounds.per_dimension = {}\n",
            self.per_dimension_mae
        ));
        out.push_str(&format!(
            "bounds.include_hoeffding = {}\n",
            self.include_hoeffding
        ));
        out.push_str(&format!("experiment.seed = {}\n", self.master_seed));
        out
    }
}

/// One roster row of the report. Bound fields are absent when training
/// failed; the pipeline keeps going either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub name: String,
    pub hidden_widths: Vec<usize>,
    pub seed: u64,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub test_mae: Option<f64>,
    pub initial_train_mae: Option<f64>,
    pub final_train_mae: Option<f64>,
    #[serde(rename = "AE")]
    pub approximation_error: Option<f64>,
    #[serde(rename = "EE")]
    pub estimation_error: Option<f64>,
    #[serde(rename = "OE")]
    pub optimization_error: Option<f64>,
    #[serde(rename = "MAE_B")]
    pub mae_bound: Option<f64>,
    pub hoeffding_term: Option<f64>,
    pub b_clamped: Option<bool>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ModelRow>,
    pub calibration: Calibration,
    /// Norm budgets used in the DNN bound rows (per-row values live in the
    /// row inputs when the top mode is `measure`).
    pub lambda: f64,
    pub lambda_prime: f64,
    pub s_nominal: f64,
    pub s_measured: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub master_seed: u64,
    pub per_dimension_mae: bool,
    pub include_hoeffding: bool,
    /// Clean targets are rescaled by the same factor as their noisy inputs.
    pub targets_scaled_with_inputs: bool,
    pub config_echo: String,
    pub config_hash: String,
}

impl ExperimentReport {
    /// Re-asserts the construction invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() < 2 {
            return Err(Error::Parameter("report needs at least the anchors".into()));
        }
        for row in &self.rows {
            if let (Some(ae), Some(ee), Some(oe), Some(mae_b)) = (
                row.approximation_error,
                row.estimation_error,
                row.optimization_error,
                row.mae_bound,
            ) {
                let h = row.hoeffding_term.unwrap_or(0.0);
                if mae_b != ae + ee + oe + h {
                    return Err(Error::Numeric(format!(
                        "row {:?} breaks MAE_B = AE + EE + OE{}",
                        row.name,
                        if h != 0.0 { " + hoeffding" } else { "" }
                    )));
                }
            }
        }
        if config_hash(&self.config_echo) != self.config_hash {
            return Err(Error::Numeric("config echo does not match its hash".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<ExperimentReport> {
        let report: ExperimentReport = serde_json::from_str(text)
            .map_err(|e| Error::Format {
                offset: 0,
                message: format!("report JSON: {e}"),
            })?;
        report.validate()?;
        Ok(report)
    }

    /// The decomposition table in CSV form.
    pub fn decomposition_csv(&self) -> String {
        let mut out = String::from("model,test_mae,AE,EE,OE,MAE_B,b_clamped\n");
        let fmt = |v: Option<f64>| v.map_or(String::from("failed"), |x| format_significant(x, 10));
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.name,
                fmt(row.test_mae),
                fmt(row.approximation_error),
                fmt(row.estimation_error),
                fmt(row.optimization_error),
                fmt(row.mae_bound),
                row.b_clamped.map_or(String::from("failed"), |b| b.to_string()),
            ));
        }
        out
    }
}

/// Report plus the in-memory training logs (row-aligned).
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub logs: Vec<Option<TrainLog>>,
}

/// Builds the train/test datasets for a source, every stream derived from
/// the master seed.
pub fn load_datasets(source: &DataSource, master_seed: u64) -> Result<(Dataset, Dataset)> {
    match source {
        DataSource::Synthetic {
            input_dim,
            output_dim,
            samples,
            teacher_width,
            noise_variance,
            test_fraction,
        } => {
            let (ds, _teacher) = synth_teacher_dataset(
                *input_dim,
                *output_dim,
                *teacher_width,
                *samples,
                crate::numerics::derive_seed(master_seed, "teacher", 0),
                crate::numerics::derive_seed(master_seed, "data", 0),
                *noise_variance,
            )?;
            split(
                &ds,
                *test_fraction,
                &mut SeededRng::derived(master_seed, "split", 0),
            )
        }
        DataSource::Idx {
            train_images,
            test_images,
            train_count,
            test_count,
            agrn_variance,
        } => {
            let train_corpus = load_idx(train_images)?;
            let slice = |imgs: &crate::data::RawImages,
                         from: usize,
                         count: usize|
             -> Result<crate::data::RawImages> {
                if from + count > imgs.images.len() {
                    return Err(Error::Config(format!(
                        "requested images {}..{} but corpus has {}",
                        from,
                        from + count,
                        imgs.images.len()
                    )));
                }
                Ok(crate::data::RawImages {
                    rows: imgs.rows,
                    cols: imgs.cols,
                    images: imgs.images[from..from + count].to_vec(),
                })
            };
            let (train_clean, test_clean) = match test_images {
                Some(path) => {
                    let test_corpus = load_idx(path)?;
                    (
                        slice(&train_corpus, 0, *train_count)?,
                        slice(&test_corpus, 0, *test_count)?,
                    )
                }
                None => (
                    slice(&train_corpus, 0, *train_count)?,
                    slice(&train_corpus, *train_count, *test_count)?,
                ),
            };
            let train_ds = corrupt_agrn(
                &train_clean,
                *agrn_variance,
                crate::numerics::derive_seed(master_seed, "agrn", 0),
            )?;
            let test_ds = corrupt_agrn(
                &test_clean,
                *agrn_variance,
                crate::numerics::derive_seed(master_seed, "agrn", 1),
            )?;
            Ok((train_ds, test_ds))
        }
    }
}

struct TrainedModel {
    name: String,
    hidden_widths: Vec<usize>,
    seed: u64,
    result: Result<(Network, TrainLog)>,
}

/// Runs the whole pipeline. Anchor failures abort (no calibration is
/// possible without them); DNN failures mark their row and continue.
/// Artifacts are written under `out_dir` when given: `report.json`,
/// `decomposition.csv`, and `curves/<model>.{csv,svg}`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let (train_ds, test_ds) = load_datasets(&config.source, config.master_seed)?;
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(Error::Config("experiment needs nonempty train and test sets".into()));
    }
    let q = train_ds.output_dim;
    let d = train_ds.input_dim;
    let s_measured = train_ds.max_input_norm();
    let mae_scale = if config.per_dimension_mae {
        1.0 / q as f64
    } else {
        1.0
    };

    // Roster: anchors first, then the configured deep models.
    let mut roster: Vec<(String, Vec<usize>)> = vec![
        ("ann1".to_string(), vec![config.anchor1_width]),
        ("ann2".to_string(), vec![config.anchor2_width]),
    ];
    for m in &config.dnns {
        roster.push((m.name.clone(), m.hidden_widths.clone()));
    }

    let mut trained: Vec<TrainedModel> = Vec::with_capacity(roster.len());
    for (idx, (name, hidden)) in roster.iter().enumerate() {
        let seed = crate::numerics::derive_seed(config.master_seed, "train", idx as u64);
        let result = (|| {
            let spec = NetworkSpec::new(d, q, hidden.clone())?.with_sharpness(config.sharpness)?;
            let mut init_rng = SeededRng::derived(config.master_seed, "init", idx as u64);
            let net = init_network(spec, &mut init_rng)?;
            let train_config = TrainConfig {
                seed,
                ..config.train.clone()
            };
            train(net, &train_ds, &test_ds, &train_config)
        })();
        trained.push(TrainedModel {
            name: name.clone(),
            hidden_widths: hidden.clone(),
            seed,
            result,
        });
    }

    // Anchors must have trained.
    for anchor in &trained[..2] {
        if let Err(e) = &anchor.result {
            return Err(Error::Numeric(format!(
                "anchor {:?} failed to train: {e}",
                anchor.name
            )));
        }
    }
    let anchor_mae = |i: usize| -> f64 {
        match &trained[i].result {
            Ok((_, log)) => log.final_test_mae() * mae_scale,
            Err(_) => unreachable!("anchor failures abort above"),
        }
    };
    let mae1 = anchor_mae(0);
    let mae2 = anchor_mae(1);

    // Norm budgets for the bound arithmetic. Under `normalize` they are the
    // enforced constants; under `measure` the calibration takes the larger
    // anchor measurement and each row carries its own.
    let measured = |i: usize| -> (f64, f64) {
        match &trained[i].result {
            Ok((_, log)) => (log.final_lambda, log.final_lambda_prime),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let (cal_lambda, cal_lambda_prime) = match config.train.top_mode {
        TopMode::Normalize => (config.train.lambda_hidden, 1.0),
        TopMode::Measure => {
            let (l1, p1) = measured(0);
            let (l2, p2) = measured(1);
            (l1.max(l2), p1.max(p2))
        }
    };

    let base_inputs = BoundInputs {
        output_dim: q,
        input_dim: d,
        train_samples: train_ds.len(),
        hidden_depth: 1,
        top_width: config.anchor1_width,
        differential_order: config.differential_order,
        lambda: cal_lambda,
        lambda_prime: cal_lambda_prime,
        input_norm_bound: s_measured,
        delta: config.delta,
    };
    let calibration = calibrate(
        mae1,
        mae2,
        config.anchor1_width,
        config.anchor2_width,
        &base_inputs,
    )?;

    let bound_for = |hidden: &[usize], lambda: f64, lambda_prime: f64| -> Result<BoundReport> {
        let inputs = BoundInputs {
            hidden_depth: hidden.len(),
            top_width: *hidden.last().expect("validated nonempty"),
            lambda,
            lambda_prime,
            ..base_inputs.clone()
        };
        if config.include_hoeffding {
            crate::bounds::mae_upper_bound_with_hoeffding(&calibration, &inputs)
        } else {
            crate::bounds::mae_upper_bound(&calibration, &inputs)
        }
    };

    let mut rows = Vec::with_capacity(trained.len());
    let mut logs = Vec::with_capacity(trained.len());
    for (idx, model) in trained.iter().enumerate() {
        match &model.result {
            Ok((_, log)) => {
                let (row_lambda, row_lambda_prime) = match config.train.top_mode {
                    TopMode::Normalize => (config.train.lambda_hidden, 1.0),
                    TopMode::Measure => measured(idx),
                };
                let bound = bound_for(&model.hidden_widths, row_lambda, row_lambda_prime)?;
                rows.push(ModelRow {
                    name: model.name.clone(),
                    hidden_widths: model.hidden_widths.clone(),
                    seed: model.seed,
                    failed: false,
                    error: None,
                    test_mae: Some(log.final_test_mae() * mae_scale),
                    initial_train_mae: Some(log.initial_train_mae * mae_scale),
                    final_train_mae: Some(log.final_train_mae() * mae_scale),
                    approximation_error: Some(bound.approximation_error),
                    estimation_error: Some(bound.estimation_error),
                    optimization_error: Some(bound.optimization_error),
                    mae_bound: Some(bound.mae_bound),
                    hoeffding_term: Some(bound.hoeffding_term),
                    b_clamped: Some(bound.b_clamped),
                    violations: bound.violations,
                });
                logs.push(Some(log.clone()));
            }
            Err(e) => {
                rows.push(ModelRow {
                    name: model.name.clone(),
                    hidden_widths: model.hidden_widths.clone(),
                    seed: model.seed,
                    failed: true,
                    error: Some(e.to_string()),
                    test_mae: None,
                    initial_train_mae: None,
                    final_train_mae: None,
                    approximation_error: None,
                    estimation_error: None,
                    optimization_error: None,
                    mae_bound: None,
                    hoeffding_term: None,
                    b_clamped: None,
                    violations: Vec::new(),
                });
                logs.push(None);
            }
        }
    }

    let config_echo = config
        .config_text
        .clone()
        .unwrap_or_else(|| config.canonical_text());
    let report = ExperimentReport {
        rows,
        calibration,
        lambda: cal_lambda,
        lambda_prime: cal_lambda_prime,
        s_nominal: 1.0,
        s_measured,
        train_samples: train_ds.len(),
        test_samples: test_ds.len(),
        master_seed: config.master_seed,
        per_dimension_mae: config.per_dimension_mae,
        include_hoeffding: config.include_hoeffding,
        targets_scaled_with_inputs: true,
        config_hash: config_hash(&config_echo),
        config_echo,
    };

    if let Some(dir) = out_dir {
        write_artifacts(&report, &logs, dir)?;
    }
    Ok(ExperimentOutcome { report, logs })
}

fn write_artifacts(report: &ExperimentReport, logs: &[Option<TrainLog>], dir: &Path) -> Result<()> {
    crate::write_atomic(&dir.join("report.json"), report.to_json().as_bytes())?;
    crate::write_atomic(
        &dir.join("decomposition.csv"),
        report.decomposition_csv().as_bytes(),
    )?;
    let curve_dir = dir.join("curves");
    for (row, log) in report.rows.iter().zip(logs) {
        if let Some(log) = log {
            if !log.epochs.is_empty() {
                emit_curves(log, &curve_dir, &row.name)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            source: DataSource::Synthetic {
                input_dim: 4,
                output_dim: 4,
                samples: 200,
                teacher_width: 12,
                noise_variance: 0.0,
                test_fraction: 0.2,
            },
            anchor1_width: 8,
            anchor2_width: 16,
            dnns: vec![RosterModel {
                name: "dnn1".into(),
                hidden_widths: vec![8, 16],
            }],
            train: TrainConfig {
                epochs: 4,
                ..TrainConfig::default()
            },
            sharpness: 50.0,
            differential_order: 6.0,
            delta: 0.95,
            per_dimension_mae: false,
            include_hoeffding: false,
            master_seed: 7,
            config_text: None,
        }
    }

    #[test]
    fn tiny_experiment_report_shape() {
        let outcome = run_experiment(&tiny_config(), None).unwrap();
        let report = &outcome.report;
        report.validate().unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.rows[0].name, "ann1");
        assert_eq!(report.rows[2].name, "dnn1");
        for row in &report.rows {
            assert!(!row.failed);
            let mae_b = row.mae_bound.unwrap();
            let sum = row.approximation_error.unwrap()
                + row.estimation_error.unwrap()
                + row.optimization_error.unwrap();
            assert_eq!(mae_b, sum);
        }
        // Anchor rows round-trip their measured MAE when b is unclamped.
        if !report.calibration.b_clamped {
            for (i, anchor) in report.rows[..2].iter().enumerate() {
                let mae = [
                    report.calibration.anchor_low.mae,
                    report.calibration.anchor_high.mae,
                ][i];
                assert!((anchor.mae_bound.unwrap() - mae).abs() <= 1e-12 * mae.max(1.0));
            }
        }
    }

    #[test]
    fn anchors_only_roster_is_valid() {
        let mut config = tiny_config();
        config.dnns.clear();
        let outcome = run_experiment(&config, None).unwrap();
        assert_eq!(outcome.report.rows.len(), 2);
        assert!(outcome.report.calibration.c.is_finite());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let config = tiny_config();
        let a = run_experiment(&config, None).unwrap().report.to_json();
        let b = run_experiment(&config, None).unwrap().report.to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn failed_dnn_row_keeps_pipeline_alive() {
        let mut config = tiny_config();
        // A hidden budget of 1e80 compounds per layer: depth-1 anchors stay
        // finite (~1e80) but four hidden layers overflow to infinity, so only
        // the deep row diverges.
        config.train.lambda_hidden = 1e80;
        config.train.epochs = 1;
        config.dnns = vec![RosterModel {
            name: "dnn1".into(),
            hidden_widths: vec![8, 8, 8, 8],
        }];
        let outcome = run_experiment(&config, None).unwrap();
        let rows = &outcome.report.rows;
        assert!(!rows[0].failed && !rows[1].failed);
        assert!(rows[2].failed);
        assert!(rows[2].error.is_some());
        assert!(rows[2].mae_bound.is_none());
        outcome.report.validate().unwrap();
    }

    #[test]
    fn config_file_round_trip() {
        let config = tiny_config();
        let text = config.canonical_text();
        let parsed = ExperimentConfig::from_kv(&KvConfig::parse(&text).unwrap()).unwrap();
        assert_eq!(parsed.anchor1_width, config.anchor1_width);
        assert_eq!(parsed.dnns, config.dnns);
        assert_eq!(parsed.train.epochs, config.train.epochs);
        assert_eq!(parsed.master_seed, config.master_seed);
        assert_eq!(parsed.source, config.source);
        // Echo hash matches a recomputation from the text.
        let outcome = run_experiment(&parsed, None).unwrap();
        assert_eq!(outcome.report.config_hash, config_hash(&text));
    }

    #[test]
    fn per_dimension_flag_rescales_maes() {
        let base = run_experiment(&tiny_config(), None).unwrap();
        let mut config = tiny_config();
        config.per_dimension_mae = true;
        let scaled = run_experiment(&config, None).unwrap();
        let q = 4.0;
        let a = base.report.rows[0].test_mae.unwrap();
        let b = scaled.report.rows[0].test_mae.unwrap();
        assert!((a / q - b).abs() < 1e-15);
    }

    #[test]
    fn artifacts_are_written_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_experiment(&tiny_config(), Some(dir.path())).unwrap();
        let report_text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert_eq!(report_text, outcome.report.to_json());
        let reloaded = ExperimentReport::from_json(&report_text).unwrap();
        assert_eq!(reloaded, outcome.report);
        let table = std::fs::read_to_string(dir.path().join("decomposition.csv")).unwrap();
        assert!(table.starts_with("model,test_mae,AE,EE,OE,MAE_B,b_clamped"));
        assert_eq!(table.trim_end().lines().count(), 4);
        for name in ["ann1", "ann2", "dnn1"] {
            assert!(dir.path().join("curves").join(format!("{name}.csv")).exists());
            assert!(dir.path().join("curves").join(format!("{name}.svg")).exists());
        }
    }
}
