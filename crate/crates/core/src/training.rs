//! Losses, SGD with momentum, the epoch loop with per-step renormalization,
//! and the per-epoch diagnostics feeding the bound arithmetic.
//!
//! Training is deterministic per seed: shuffles come from a stream derived
//! from `(seed, "shuffle", epoch)`, batches are visited in shuffle order, and
//! gradient reduction is plain left-to-right accumulation.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{backprop, Gradients, LossKind, Network, TopMode};
use crate::numerics::{DenseVector, SeededRng};

/// Optimizer hyperparameters and bookkeeping seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Momentum coefficient in `[0, 1)`.
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// L2 budget applied to hidden rows after every step.
    pub lambda_hidden: f64,
    pub top_mode: TopMode,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            momentum: 0.2,
            epochs: 30,
            batch_size: 64,
            seed: 0,
            lambda_hidden: 1.0,
            top_mode: TopMode::Normalize,
            loss: LossKind::Mae,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if !(self.lambda_hidden > 0.0) || !self.lambda_hidden.is_finite() {
            return Err(Error::Parameter(format!(
                "hidden norm budget must be positive, got {}",
                self.lambda_hidden
            )));
        }
        Ok(())
    }
}

/// Per-epoch curve point. Wall-clock time is informational only and never
/// reaches the CSV or report artifacts, which must be byte-reproducible;
/// equality ignores it for the same reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_mae: f64,
    pub test_mae: f64,
    /// Largest flattened-gradient L2 norm seen in any step of this epoch.
    pub max_grad_norm: f64,
    #[serde(skip)]
    pub wall_secs: f64,
}

impl PartialEq for EpochStats {
    fn eq(&self, other: &Self) -> bool {
        self.train_mae == other.train_mae
            && self.test_mae == other.test_mae
            && self.max_grad_norm == other.max_grad_norm
    }
}

/// Everything a training run reports back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    /// MAE of the freshly renormalized network before any step.
    pub initial_train_mae: f64,
    pub initial_test_mae: f64,
    pub epochs: Vec<EpochStats>,
    /// Largest hidden-row L2 norm after training.
    pub final_lambda: f64,
    /// Largest top-row L1 norm after training.
    pub final_lambda_prime: f64,
    /// Largest training-input L2 norm (the measured `s`).
    pub measured_s: f64,
    /// First epoch whose train MAE dropped below the initial value.
    /// Diagnostic only; never enters bound arithmetic.
    pub pl_onset_epoch: Option<usize>,
}

impl TrainLog {
    pub fn final_train_mae(&self) -> f64 {
        self.epochs
            .last()
            .map_or(self.initial_train_mae, |e| e.train_mae)
    }

    pub fn final_test_mae(&self) -> f64 {
        self.epochs
            .last()
            .map_or(self.initial_test_mae, |e| e.test_mae)
    }

    /// CSV export: `epoch,train_mae,test_mae,max_grad_norm`, one row per
    /// trained epoch, 10 significant digits in plain decimal notation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mae,test_mae,max_grad_norm\n");
        for (i, e) in self.epochs.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                i + 1,
                format_significant(e.train_mae, 10),
                format_significant(e.test_mae, 10),
                format_significant(e.max_grad_norm, 10)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Plain decimal notation with the given number of significant digits.
pub fn format_significant(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return format!("{:.*}", sig - 1, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Parses the CSV emitted by [`TrainLog::to_csv`] back into curve series
/// `(train_mae, test_mae, max_grad_norm)`.
pub fn parse_curve_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format {
            offset: 0,
            message: "empty curve CSV".into(),
        })?
        .trim();
    if header != "epoch,train_mae,test_mae,max_grad_norm" {
        return Err(Error::Format {
            offset: 0,
            message: format!("unexpected CSV header {header:?}"),
        });
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut grad = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Format {
                offset: lineno + 2,
                message: format!("expected 4 CSV fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Format {
                offset: lineno + 2,
                message: format!("bad float {s:?}"),
            })
        };
        train.push(parse(fields[1])?);
        test.push(parse(fields[2])?);
        grad.push(parse(fields[3])?);
    }
    Ok((train, test, grad))
}

fn check_prediction_pairs(predictions: &[DenseVector], targets: &[DenseVector]) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::Parameter(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Parameter("loss of an empty sequence".into()));
    }
    for (i, (p, t)) in predictions.iter().zip(targets).enumerate() {
        if p.dim() != t.dim() {
            return Err(Error::Shape(format!(
                "pair {i} has dims {} vs {}",
                p.dim(),
                t.dim()
            )));
        }
    }
    Ok(())
}

/// Mean absolute error: the average L1 distance between paired vectors.
pub fn mae_loss(predictions: &[DenseVector], targets: &[DenseVector]) -> Result<f64> {
    check_prediction_pairs(predictions, targets)?;
    let mut acc = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        for (&a, &b) in p.as_slice().iter().zip(t.as_slice()) {
            acc += (a - b).abs();
        }
    }
    Ok(acc / predictions.len() as f64)
}

/// Mean squared error: the average squared L2 distance between paired vectors.
pub fn mse_loss(predictions: &[DenseVector], targets: &[DenseVector]) -> Result<f64> {
    check_prediction_pairs(predictions, targets)?;
    let mut acc = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        for (&a, &b) in p.as_slice().iter().zip(t.as_slice()) {
            acc += (a - b) * (a - b);
        }
    }
    Ok(acc / predictions.len() as f64)
}

/// One momentum-SGD update: `v <- momentum v + g; w <- w - lr v`.
/// Renormalization is the caller's job (the train loop applies it after
/// every step).
pub fn sgd_step(
    net: &mut Network,
    grads: &Gradients,
    velocity: &mut Gradients,
    learning_rate: f64,
    momentum: f64,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradients in SGD step".into()));
    }
    for ((w, g), v) in net
        .weights_mut()
        .iter_mut()
        .zip(&grads.weights)
        .zip(&mut velocity.weights)
    {
        let vs = v.as_mut_slice();
        let gs = g.as_slice();
        let ws = w.as_mut_slice();
        for i in 0..ws.len() {
            vs[i] = momentum * vs[i] + gs[i];
            ws[i] -= learning_rate * vs[i];
        }
    }
    // Biases, when enabled, update the same way but stay outside norm budgets.
    if let (Some(gb), Some(vb)) = (&grads.biases, &mut velocity.biases) {
        if let Some(bs) = net.biases_mut() {
            for ((b, g), v) in bs.iter_mut().zip(gb).zip(vb) {
                for i in 0..b.len() {
                    v[i] = momentum * v[i] + g[i];
                    b[i] -= learning_rate * v[i];
                }
            }
        }
    }
    Ok(())
}

/// Mean per-vector MAE of the network over a dataset.
pub fn dataset_mae(net: &Network, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Parameter("MAE of an empty dataset".into()));
    }
    let mut acc = 0.0;
    for p in &ds.pairs {
        let out = net.forward(&p.input)?;
        for (&a, &b) in out.as_slice().iter().zip(p.target.as_slice()) {
            acc += (a - b).abs();
        }
    }
    Ok(acc / ds.len() as f64)
}

/// Runs mini-batch SGD with per-step renormalization, logging train/test MAE
/// per epoch and the largest flattened gradient norm.
pub fn train(
    net: Network,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    train_with_observer(net, train_set, test_set, config, |_, _| {})
}

/// [`train`] with a per-step hook receiving the network right after each
/// renormalized SGD step; used by constraint-enforcement checks.
pub fn train_with_observer<F>(
    mut net: Network,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    mut observer: F,
) -> Result<(Network, TrainLog)>
where
    F: FnMut(&Network, usize),
{
    config.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Parameter("datasets must be nonempty".into()));
    }
    if train_set.input_dim != net.spec().input_dim
        || train_set.output_dim != net.spec().output_dim
        || test_set.input_dim != net.spec().input_dim
        || test_set.output_dim != net.spec().output_dim
    {
        return Err(Error::Shape(
            "dataset dims do not match the network spec".into(),
        ));
    }

    net.renormalize(config.lambda_hidden, config.top_mode);
    let initial_train_mae = dataset_mae(&net, train_set)?;
    let initial_test_mae = dataset_mae(&net, test_set)?;
    let measured_s = train_set.max_input_norm();

    let mut velocity = Gradients::zeros_like(&net);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut pl_onset_epoch = None;
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        SeededRng::derived(config.seed, "shuffle", epoch as u64).shuffle(&mut order);

        let mut max_grad_norm: f64 = 0.0;
        for batch in order.chunks(config.batch_size) {
            let grads = backprop(
                &net,
                batch
                    .iter()
                    .map(|&i| (&train_set.pairs[i].input, &train_set.pairs[i].target)),
                config.loss,
            )
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
            if !grads.is_finite() {
                return Err(Error::Numeric(format!(
                    "epoch {epoch}: gradients diverged"
                )));
            }
            max_grad_norm = max_grad_norm.max(grads.flat_l2_norm());
            sgd_step(
                &mut net,
                &grads,
                &mut velocity,
                config.learning_rate,
                config.momentum,
            )
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
            net.renormalize(config.lambda_hidden, config.top_mode);
            observer(&net, step);
            step += 1;
        }

        let train_mae = dataset_mae(&net, train_set)
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        let test_mae = dataset_mae(&net, test_set)
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        if !train_mae.is_finite() || !test_mae.is_finite() {
            return Err(Error::Numeric(format!("epoch {epoch}: loss diverged")));
        }
        if pl_onset_epoch.is_none() && train_mae < initial_train_mae {
            pl_onset_epoch = Some(epoch);
        }
        epochs.push(EpochStats {
            train_mae,
            test_mae,
            max_grad_norm,
            wall_secs: started.elapsed().as_secs_f64(),
        });
    }

    let (final_lambda, final_lambda_prime) = net.measure_norm_budget();
    let log = TrainLog {
        seed: config.seed,
        initial_train_mae,
        initial_test_mae,
        epochs,
        final_lambda,
        final_lambda_prime,
        measured_s,
        pl_onset_epoch,
    };
    Ok((net, log))
}

/// Largest gradient norm over all logged epochs: the empirical stand-in for
/// the gradient-norm bound `M`.
pub fn grad_norm_bound(log: &TrainLog) -> Result<f64> {
    if log.epochs.is_empty() {
        return Err(Error::Parameter(
            "gradient bound of a log with no trained epochs".into(),
        ));
    }
    Ok(log
        .epochs
        .iter()
        .map(|e| e.max_grad_norm)
        .fold(0.0, f64::max))
}
