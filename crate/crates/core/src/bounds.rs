//! Closed-form MAE bound arithmetic: the estimation bound from the weight
//! norm budgets, the approximation bound in the effective top width, the
//! optimization bound under a gradient-dominance constant, the two-anchor
//! calibration of the free constants, and assembly of the AE/EE/OE
//! decomposition report.
//!
//! Depth convention: `hidden_depth` counts hidden layers, so a network with
//! `m` weight matrices has `hidden_depth = m - 1`. A single-hidden-layer
//! anchor therefore has `hidden_depth = 1`, which makes its estimation term
//! `2 q lambda' s / sqrt(N)` (no hidden-budget factor) and its approximation
//! base exactly its width — the same form the anchor calibration solves, so
//! evaluating the calibrated bound back at an anchor reproduces that anchor's
//! MAE whenever the floor `b` did not clamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything the closed-form bounds need to know about one architecture and
/// its data regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Output dimensionality `q`.
    pub output_dim: usize,
    /// Input dimensionality `d`.
    pub input_dim: usize,
    /// Number of training samples `N`.
    pub train_samples: usize,
    /// Number of hidden layers entering the bound (`m - 1` for `m` weight
    /// matrices).
    pub hidden_depth: usize,
    /// Width of the top hidden layer.
    pub top_width: usize,
    /// Differential order `r` of the target; enters only through `r / d`.
    pub differential_order: f64,
    /// L2 budget of hidden rows.
    pub lambda: f64,
    /// L1 budget of top (output) rows.
    pub lambda_prime: f64,
    /// Bound on the input L2 norm `s`.
    pub input_norm_bound: f64,
    /// Confidence level for the deviation term, in (0, 1).
    pub delta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.output_dim == 0 || self.input_dim == 0 {
            return Err(Error::Parameter("dims must be positive".into()));
        }
        if self.train_samples == 0 {
            return Err(Error::Parameter("sample count must be positive".into()));
        }
        if self.hidden_depth == 0 || self.top_width == 0 {
            return Err(Error::Parameter(
                "hidden depth and top width must be positive".into(),
            ));
        }
        if !(self.differential_order > 0.0) || !self.differential_order.is_finite() {
            return Err(Error::Parameter(format!(
                "differential order must be positive, got {}",
                self.differential_order
            )));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda_prime", self.lambda_prime),
            ("input_norm_bound", self.input_norm_bound),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Smoothness-to-dimension ratio `r / d`.
    pub fn order_ratio(&self) -> f64 {
        self.differential_order / self.input_dim as f64
    }

    /// Effective unit count in the approximation bound: top width plus one
    /// per hidden layer below the top.
    pub fn effective_units(&self) -> f64 {
        (self.top_width + self.hidden_depth - 1) as f64
    }

    /// Assumptions of the bound derivation that this instance breaks. These
    /// are reported alongside results, never fatal.
    pub fn validity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hidden_depth < 2 {
            out.push(format!(
                "hidden depth {} below the 2 the approximation bound assumes",
                self.hidden_depth
            ));
        }
        let min_width = self.input_dim + 2;
        if self.top_width < min_width {
            out.push(format!(
                "top width {} below input_dim + 2 = {min_width}",
                self.top_width
            ));
        }
        out
    }
}

/// Estimation-error bound `2 q lambda' lambda^(depth-1) s / sqrt(N)`.
pub fn estimation_error_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let q = inputs.output_dim as f64;
    let n = inputs.train_samples as f64;
    Ok(2.0 * q * inputs.lambda_prime * inputs.lambda.powi(inputs.hidden_depth as i32 - 1)
        * inputs.input_norm_bound
        / n.sqrt())
}

/// Deviation term `sqrt(ln(2 / (1 - delta)) / (2N))` from the concentration
/// step of the error decomposition. Excluded from the aggregate bound by
/// default; a flag re-includes it.
pub fn hoeffding_deviation(samples: usize, delta: f64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Parameter("sample count must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    Ok(((2.0 / (1.0 - delta)).ln() / (2.0 * samples as f64)).sqrt())
}

/// Approximation-error bound `c q / (top_width + depth - 1)^(r/d)`.
pub fn approximation_error_bound(c: f64, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !c.is_finite() {
        return Err(Error::Parameter(format!("constant must be finite, got {c}")));
    }
    let q = inputs.output_dim as f64;
    Ok(c * q / inputs.effective_units().powf(inputs.order_ratio()))
}

/// Constants of the optimization-error bound: learning rate, gradient-norm
/// bound, smoothness, and the gradient-dominance constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptErrorInputs {
    pub learning_rate: f64,
    pub grad_norm_bound: f64,
    pub smoothness: f64,
    pub pl_constant: f64,
}

impl OptErrorInputs {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("smoothness", self.smoothness),
            ("pl_constant", self.pl_constant),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.grad_norm_bound < 0.0 || !self.grad_norm_bound.is_finite() {
            return Err(Error::Parameter(format!(
                "grad_norm_bound must be nonnegative, got {}",
                self.grad_norm_bound
            )));
        }
        Ok(())
    }
}

/// Optimization-error bound `mu M^2 beta / (2 gamma)`.
pub fn optimization_error_bound(inputs: &OptErrorInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.learning_rate * inputs.grad_norm_bound * inputs.grad_norm_bound * inputs.smoothness
        / (2.0 * inputs.pl_constant))
}

/// Decaying optimization-gap envelope after `iterations` SGD steps:
/// `exp(-mu gamma (T+1)) initial_gap + mu M^2 beta / (2 gamma)`.
///
/// Requires `0 < mu gamma < 1`, the regime in which the geometric recursion
/// behind the envelope is valid.
pub fn sgd_convergence_envelope(
    initial_gap: f64,
    inputs: &OptErrorInputs,
    iterations: u64,
) -> Result<f64> {
    inputs.validate()?;
    if initial_gap < 0.0 || !initial_gap.is_finite() {
        return Err(Error::Parameter(format!(
            "initial gap must be nonnegative, got {initial_gap}"
        )));
    }
    let rate = inputs.learning_rate * inputs.pl_constant;
    if rate >= 1.0 {
        return Err(Error::Parameter(format!(
            "mu * gamma must be below 1 for the envelope, got {rate}"
        )));
    }
    let decay = (-rate * (iterations as f64 + 1.0)).exp();
    Ok(decay * initial_gap + optimization_error_bound(inputs)?)
}

/// One calibration anchor: a single-hidden-layer network's width and its
/// measured test MAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub width: usize,
    pub mae: f64,
}

/// The two calibrated constants of the practical bound plus the anchor data
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Scale of the approximation term.
    pub c: f64,
    /// Constant floor standing in for the optimization error.
    pub b: f64,
    /// True when the nonnegativity clamp on `b` engaged; the anchor
    /// round-trip identity is lost in that case and consumers must know.
    pub b_clamped: bool,
    pub anchor_low: AnchorPoint,
    pub anchor_high: AnchorPoint,
    pub inputs: BoundInputs,
}

/// Solves the two-anchor system for the constants `c` and `b`:
///
/// ```text
/// c = (MAE1 - MAE2) l1^(r/d) l2^(r/d) / (q (l2^(r/d) - l1^(r/d)))
/// b = max(MAE1 - (MAE1 - MAE2) l2^(r/d) / (l2^(r/d) - l1^(r/d))
///         - 2 q lambda' s / sqrt(N), 0)
/// ```
pub fn calibrate(
    mae1: f64,
    mae2: f64,
    l1: usize,
    l2: usize,
    inputs: &BoundInputs,
) -> Result<Calibration> {
    inputs.validate()?;
    if l1 == 0 {
        return Err(Error::Parameter("anchor widths must be positive".into()));
    }
    if l1 == l2 {
        return Err(Error::DegenerateAnchors(format!(
            "anchor widths are both {l1}"
        )));
    }
    if l2 < l1 {
        return Err(Error::Parameter(format!(
            "anchors must be ordered, got l1 = {l1} > l2 = {l2}"
        )));
    }
    for (name, v) in [("mae1", mae1), ("mae2", mae2)] {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::Parameter(format!(
                "{name} must be nonnegative and finite, got {v}"
            )));
        }
    }

    let e = inputs.order_ratio();
    let p1 = (l1 as f64).powf(e);
    let p2 = (l2 as f64).powf(e);
    let q = inputs.output_dim as f64;
    let c = (mae1 - mae2) * p1 * p2 / (q * (p2 - p1));
    let estimation_at_anchor = 2.0 * q * inputs.lambda_prime * inputs.input_norm_bound
        / (inputs.train_samples as f64).sqrt();
    let b_raw = mae1 - (mae1 - mae2) * p2 / (p2 - p1) - estimation_at_anchor;
    let b_clamped = b_raw < 0.0;
    Ok(Calibration {
        c,
        b: b_raw.max(0.0),
        b_clamped,
        anchor_low: AnchorPoint {
            width: l1,
            mae: mae1,
        },
        anchor_high: AnchorPoint {
            width: l2,
            mae: mae2,
        },
        inputs: inputs.clone(),
    })
}

/// The AE/EE/OE decomposition for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub architecture: String,
    #[serde(rename = "AE")]
    pub approximation_error: f64,
    #[serde(rename = "EE")]
    pub estimation_error: f64,
    #[serde(rename = "OE")]
    pub optimization_error: f64,
    #[serde(rename = "MAE_B")]
    pub mae_bound: f64,
    /// Deviation term added to the aggregate when requested, else zero.
    pub hoeffding_term: f64,
    pub b_clamped: bool,
    pub violations: Vec<String>,
    pub inputs: BoundInputs,
}

impl BoundReport {
    /// The construction invariant: the aggregate is exactly the sum of its
    /// parts (plus the optional deviation term).
    pub fn is_consistent(&self) -> bool {
        self.mae_bound
            == self.approximation_error
                + self.estimation_error
                + self.optimization_error
                + self.hoeffding_term
    }
}

/// Evaluates the calibrated bound at one architecture:
/// `AE = c q / units^(r/d)`, `EE` per the norm budgets, `OE = b`, and
/// `MAE_B` their sum. Validity violations are listed, never fatal.
pub fn mae_upper_bound(cal: &Calibration, inputs: &BoundInputs) -> Result<BoundReport> {
    mae_bound_report(cal, inputs, false)
}

/// [`mae_upper_bound`] with the finite-sample deviation term added to the
/// aggregate.
pub fn mae_upper_bound_with_hoeffding(
    cal: &Calibration,
    inputs: &BoundInputs,
) -> Result<BoundReport> {
    mae_bound_report(cal, inputs, true)
}

fn mae_bound_report(
    cal: &Calibration,
    inputs: &BoundInputs,
    include_hoeffding: bool,
) -> Result<BoundReport> {
    inputs.validate()?;
    if cal.inputs.output_dim != inputs.output_dim
        || cal.inputs.input_dim != inputs.input_dim
        || cal.inputs.train_samples != inputs.train_samples
        || cal.inputs.differential_order != inputs.differential_order
    {
        return Err(Error::Parameter(
            "calibration and evaluation inputs disagree on q, d, N, or r".into(),
        ));
    }
    let approximation_error = approximation_error_bound(cal.c, inputs)?;
    let estimation_error = estimation_error_bound(inputs)?;
    let optimization_error = cal.b;
    let hoeffding_term = if include_hoeffding {
        hoeffding_deviation(inputs.train_samples, inputs.delta)?
    } else {
        0.0
    };
    Ok(BoundReport {
        architecture: format!("depth{}-top{}", inputs.hidden_depth, inputs.top_width),
        approximation_error,
        estimation_error,
        optimization_error,
        mae_bound: approximation_error + estimation_error + optimization_error + hoeffding_term,
        hoeffding_term,
        b_clamped: cal.b_clamped,
        violations: inputs.validity_violations(),
        inputs: inputs.clone(),
    })
}
