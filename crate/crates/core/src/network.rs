//! Feed-forward vector-to-vector regression networks.
//!
//! A network is a chain of weight matrices with a smooth-ReLU activation
//! between consecutive matrices and a linear output: for matrices
//! `W_1 .. W_m`,
//!
//! ```text
//! f(x) = W_m g( W_{m-1} g( ... g(W_1 x) ... ) )
//! ```
//!
//! Rows of every matrix below the top are constrained in L2 norm, rows of the
//! top (output) matrix in L1 norm; [`Network::renormalize`] enforces the
//! constraints by dividing, and [`Network::measure_norm_budget`] reads the
//! budgets back. Biases exist as an ablation flag, default off, and are never
//! part of the norm budgets.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector, Norm, SeededRng};

/// Default activation sharpness: deviates from a hard ReLU by at most
/// `ln 2 / 50` while keeping gradients smooth.
pub const DEFAULT_SHARPNESS: f64 = 50.0;

/// Relative slack under which a row is considered already normalized and left
/// untouched. Makes renormalization bit-exactly idempotent.
const RENORM_SKIP_REL: f64 = 1e-14;

/// How the top (output) matrix is treated during renormalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopMode {
    /// Divide each top row by its L1 norm (budget forced to 1).
    Normalize,
    /// Leave the top rows alone; the budget is measured instead.
    Measure,
}

/// Architecture description: dimensions, hidden widths, activation sharpness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    /// Widths of the hidden layers, bottom to top. May be empty, which gives
    /// a single linear map (useful for gradient tests; bound arithmetic wants
    /// at least one hidden layer).
    pub hidden_widths: Vec<usize>,
    /// Smooth-ReLU sharpness `t` in `ln(1 + exp(t x)) / t`.
    pub sharpness: f64,
    pub bias_enabled: bool,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, output_dim: usize, hidden_widths: Vec<usize>) -> Result<Self> {
        let spec = NetworkSpec {
            input_dim,
            output_dim,
            hidden_widths,
            sharpness: DEFAULT_SHARPNESS,
            bias_enabled: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sharpness(mut self, sharpness: f64) -> Result<Self> {
        self.sharpness = sharpness;
        self.validate()?;
        Ok(self)
    }

    pub fn with_bias(mut self, enabled: bool) -> Self {
        self.bias_enabled = enabled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Shape("input and output dims must be positive".into()));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::Shape("hidden widths must be positive".into()));
        }
        if !(self.sharpness > 0.0) || !self.sharpness.is_finite() {
            return Err(Error::Parameter(format!(
                "sharpness must be positive and finite, got {}",
                self.sharpness
            )));
        }
        Ok(())
    }

    /// Number of weight matrices in the chain.
    pub fn matrix_count(&self) -> usize {
        self.hidden_widths.len() + 1
    }

    /// Number of hidden layers.
    pub fn hidden_layer_count(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Width of the hidden layer directly under the output matrix.
    pub fn top_hidden_width(&self) -> Option<usize> {
        self.hidden_widths.last().copied()
    }

    /// Shape of matrix `j` (0-based) as (rows, cols).
    pub fn matrix_dims(&self, j: usize) -> (usize, usize) {
        let cols = if j == 0 {
            self.input_dim
        } else {
            self.hidden_widths[j - 1]
        };
        let rows = if j == self.hidden_widths.len() {
            self.output_dim
        } else {
            self.hidden_widths[j]
        };
        (rows, cols)
    }

    /// Constraints the bound derivation assumes but the implementation does
    /// not enforce: at least two weight matrices, and hidden widths of at
    /// least `input_dim + 2`. Violations are reported, never fatal.
    pub fn bound_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.matrix_count() < 2 {
            out.push("fewer than two weight matrices".to_string());
        }
        let min_width = self.input_dim + 2;
        for (i, &w) in self.hidden_widths.iter().enumerate() {
            if w < min_width {
                out.push(format!("hidden layer {} width {w} < {min_width}", i + 1));
            }
        }
        out
    }
}

/// Smooth ReLU `ln(1 + exp(t x)) / t`, computed overflow-safely.
pub fn smooth_relu(x: f64, sharpness: f64) -> Result<f64> {
    check_sharpness(sharpness)?;
    Ok(splus(x, sharpness))
}

/// Derivative of the smooth ReLU: the logistic function of `t x`.
pub fn smooth_relu_grad(x: f64, sharpness: f64) -> Result<f64> {
    check_sharpness(sharpness)?;
    Ok(logistic(x * sharpness))
}

fn check_sharpness(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Parameter(format!(
            "sharpness must be positive and finite, got {t}"
        )));
    }
    Ok(())
}

#[inline]
fn splus(x: f64, t: f64) -> f64 {
    let z = t * x;
    if z > 0.0 {
        x + (-z).exp().ln_1p() / t
    } else {
        z.exp().ln_1p() / t
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A spec plus its weight matrices (and optional biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    weights: Vec<DenseMatrix>,
    biases: Option<Vec<Vec<f64>>>,
}

/// Per-layer gradients, same shapes as the network weights.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Option<Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Gradients {
        Gradients {
            weights: net
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net
                .biases
                .as_ref()
                .map(|bs| bs.iter().map(|b| vec![0.0; b.len()]).collect()),
        }
    }

    /// L2 norm of all entries flattened into one parameter vector.
    pub fn flat_l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for w in &self.weights {
            for &x in w.as_slice() {
                acc += x * x;
            }
        }
        if let Some(bs) = &self.biases {
            for b in bs {
                for &x in b {
                    acc += x * x;
                }
            }
        }
        acc.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.as_slice().iter().all(|x| x.is_finite()))
            && self
                .biases
                .as_ref()
                .is_none_or(|bs| bs.iter().all(|b| b.iter().all(|x| x.is_finite())))
    }

    fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for x in w.as_mut_slice() {
                *x *= factor;
            }
        }
        if let Some(bs) = &mut self.biases {
            for b in bs {
                for x in b {
                    *x *= factor;
                }
            }
        }
    }
}

/// Which training loss a gradient is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    Mse,
}

/// Scratch space for a forward pass with stored activations.
#[derive(Debug, Default)]
struct ForwardTrace {
    /// Pre-activation values per non-output matrix.
    pre: Vec<Vec<f64>>,
    /// Post-activation values per non-output matrix.
    act: Vec<Vec<f64>>,
    /// Output of the top matrix.
    out: Vec<f64>,
}

impl Network {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.weights
    }

    pub fn biases(&self) -> Option<&[Vec<f64>]> {
        self.biases.as_deref()
    }

    pub fn biases_mut(&mut self) -> Option<&mut [Vec<f64>]> {
        self.biases.as_deref_mut()
    }

    /// Builds a network from explicit matrices, checking the shape chain.
    pub fn from_weights(spec: NetworkSpec, weights: Vec<DenseMatrix>) -> Result<Network> {
        spec.validate()?;
        if weights.len() != spec.matrix_count() {
            return Err(Error::Shape(format!(
                "expected {} weight matrices, got {}",
                spec.matrix_count(),
                weights.len()
            )));
        }
        for (j, w) in weights.iter().enumerate() {
            let (rows, cols) = spec.matrix_dims(j);
            if (w.rows(), w.cols()) != (rows, cols) {
                return Err(Error::Shape(format!(
                    "matrix {j} is {}x{}, expected {rows}x{cols}",
                    w.rows(),
                    w.cols()
                )));
            }
        }
        let biases = if spec.bias_enabled {
            Some(
                (0..spec.matrix_count())
                    .map(|j| vec![0.0; spec.matrix_dims(j).0])
                    .collect(),
            )
        } else {
            None
        };
        Ok(Network {
            spec,
            weights,
            biases,
        })
    }

    fn run_forward(&self, x: &[f64], trace: &mut ForwardTrace) {
        let m = self.weights.len();
        let hidden = m - 1;
        trace.pre.resize(hidden, Vec::new());
        trace.act.resize(hidden, Vec::new());
        let t = self.spec.sharpness;
        for j in 0..hidden {
            let w = &self.weights[j];
            {
                let input: &[f64] = if j == 0 { x } else { &trace.act[j - 1] };
                let pre = &mut trace.pre[j];
                pre.resize(w.rows(), 0.0);
                w.matvec(input, pre);
            }
            if let Some(bs) = &self.biases {
                for (p, b) in trace.pre[j].iter_mut().zip(&bs[j]) {
                    *p += b;
                }
            }
            let act = &mut trace.act[j];
            act.resize(w.rows(), 0.0);
            for (a, &p) in act.iter_mut().zip(trace.pre[j].iter()) {
                *a = splus(p, t);
            }
        }
        let top = &self.weights[m - 1];
        let input: &[f64] = if hidden == 0 { x } else { &trace.act[hidden - 1] };
        trace.out.resize(top.rows(), 0.0);
        top.matvec(input, &mut trace.out);
        if let Some(bs) = &self.biases {
            for (o, b) in trace.out.iter_mut().zip(&bs[m - 1]) {
                *o += b;
            }
        }
    }

    /// Evaluates the network on one input.
    pub fn forward(&self, x: &DenseVector) -> Result<DenseVector> {
        if x.dim() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "input has dim {}, network expects {}",
                x.dim(),
                self.spec.input_dim
            )));
        }
        let mut trace = ForwardTrace::default();
        self.run_forward(x.as_slice(), &mut trace);
        DenseVector::new(trace.out)
    }

    /// Divides hidden rows by their L2 norm (times `lambda_hidden`) and, in
    /// [`TopMode::Normalize`], top rows by their L1 norm. Zero rows and rows
    /// already within `1e-14` relative of the target are left untouched, so
    /// applying this twice is bit-exactly the same as applying it once.
    pub fn renormalize(&mut self, lambda_hidden: f64, top_mode: TopMode) {
        let m = self.weights.len();
        for w in &mut self.weights[..m - 1] {
            for r in 0..w.rows() {
                renormalize_row(w.row_mut(r), Norm::L2, lambda_hidden);
            }
        }
        if top_mode == TopMode::Normalize {
            let top = &mut self.weights[m - 1];
            for r in 0..top.rows() {
                renormalize_row(top.row_mut(r), Norm::L1, 1.0);
            }
        }
    }

    /// Largest hidden-row L2 norm and largest top-row L1 norm.
    pub fn measure_norm_budget(&self) -> (f64, f64) {
        let m = self.weights.len();
        let mut lambda: f64 = 0.0;
        for w in &self.weights[..m - 1] {
            for r in 0..w.rows() {
                let mut acc = 0.0;
                for &x in w.row(r) {
                    acc += x * x;
                }
                lambda = lambda.max(acc.sqrt());
            }
        }
        let top = &self.weights[m - 1];
        let mut lambda_prime: f64 = 0.0;
        for r in 0..top.rows() {
            let mut acc = 0.0;
            for &x in top.row(r) {
                acc += x.abs();
            }
            lambda_prime = lambda_prime.max(acc);
        }
        (lambda, lambda_prime)
    }
}

fn renormalize_row(row: &mut [f64], norm: Norm, target: f64) {
    let mut acc = 0.0;
    match norm {
        Norm::L1 => {
            for &x in row.iter() {
                acc += x.abs();
            }
        }
        Norm::L2 => {
            for &x in row.iter() {
                acc += x * x;
            }
            acc = acc.sqrt();
        }
    }
    if acc == 0.0 || (acc - target).abs() <= target * RENORM_SKIP_REL {
        return;
    }
    let scale = target / acc;
    for x in row.iter_mut() {
        *x *= scale;
    }
}

/// Gaussian `N(0, 1/fan_in)` weights, then one renormalization pass so the
/// norm constraints hold from step zero.
pub fn init_network(spec: NetworkSpec, rng: &mut SeededRng) -> Result<Network> {
    spec.validate()?;
    let mut weights = Vec::with_capacity(spec.matrix_count());
    for j in 0..spec.matrix_count() {
        let (rows, cols) = spec.matrix_dims(j);
        let variance = 1.0 / cols as f64;
        weights.push(crate::numerics::gaussian_matrix(
            rows, cols, 0.0, variance, rng,
        )?);
    }
    let mut net = Network::from_weights(spec, weights)?;
    net.renormalize(1.0, TopMode::Normalize);
    Ok(net)
}

/// Gradient of the batch loss with respect to every weight (and bias).
///
/// For MAE the output subgradient is `sign(residual) / batch`, with
/// `sign(0) = 0`; for MSE it is `2 residual / batch`.
pub fn backprop<'a, I>(net: &Network, batch: I, loss: LossKind) -> Result<Gradients>
where
    I: IntoIterator<Item = (&'a DenseVector, &'a DenseVector)>,
{
    let spec = net.spec();
    let m = net.weights.len();
    let mut grads = Gradients::zeros_like(net);
    let mut trace = ForwardTrace::default();
    let mut count = 0usize;

    // delta and a scratch buffer for propagating through each matrix.
    let mut delta: Vec<f64> = Vec::new();
    let mut delta_next: Vec<f64> = Vec::new();

    for (x, y) in batch {
        if x.dim() != spec.input_dim || y.dim() != spec.output_dim {
            return Err(Error::Shape(format!(
                "sample dims ({}, {}) do not match network ({}, {})",
                x.dim(),
                y.dim(),
                spec.input_dim,
                spec.output_dim
            )));
        }
        count += 1;
        net.run_forward(x.as_slice(), &mut trace);

        // Output-layer sensitivity.
        delta.clear();
        delta.extend(
            trace
                .out
                .iter()
                .zip(y.as_slice())
                .map(|(&o, &t)| match loss {
                    LossKind::Mae => {
                        let r = o - t;
                        if r > 0.0 {
                            1.0
                        } else if r < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    LossKind::Mse => 2.0 * (o - t),
                }),
        );

        let sharp = spec.sharpness;
        for j in (0..m).rev() {
            let below: &[f64] = if j == 0 {
                x.as_slice()
            } else {
                &trace.act[j - 1]
            };
            // dL/dW_j += delta * below^T
            let gw = &mut grads.weights[j];
            for r in 0..gw.rows() {
                let d = delta[r];
                if d != 0.0 {
                    let row = gw.row_mut(r);
                    for (g, &a) in row.iter_mut().zip(below) {
                        *g += d * a;
                    }
                }
            }
            if let Some(gb) = &mut grads.biases {
                for (g, &d) in gb[j].iter_mut().zip(&delta) {
                    *g += d;
                }
            }
            if j > 0 {
                delta_next.clear();
                delta_next.resize(below.len(), 0.0);
                net.weights[j].matvec_transpose_add(&delta, &mut delta_next);
                for (dn, &p) in delta_next.iter_mut().zip(&trace.pre[j - 1]) {
                    *dn *= logistic(p * sharp);
                }
                std::mem::swap(&mut delta, &mut delta_next);
            }
        }
    }

    if count == 0 {
        return Err(Error::Parameter("batch must be nonempty".into()));
    }
    grads.scale(1.0 / count as f64);
    Ok(grads)
}

/// Batch-MAE gradient; the subgradient of `|r|` at `r = 0` is taken as 0, so
/// a perfect fit yields all-zero gradients.
pub fn backprop_mae<'a, I>(net: &Network, batch: I) -> Result<Gradients>
where
    I: IntoIterator<Item = (&'a DenseVector, &'a DenseVector)>,
{
    backprop(net, batch, LossKind::Mae)
}

// --- binary container ------------------------------------------------------
//
// Layout (integers u32 little-endian, floats f64 little-endian):
//   magic "MAEB" | version | matrix_count | input_dim | output_dim |
//   bias flag | sharpness | hidden widths | per-matrix row-major weights |
//   per-layer biases when the flag is set.

const NETWORK_MAGIC: &[u8; 4] = b"MAEB";
const FORMAT_VERSION: u32 = 1;

pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        ByteWriter { buf }
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8], magic: &[u8; 4], what: &str) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let got = r.take(4, "magic")?;
        if got != magic {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad {what} magic {got:02x?}"),
            });
        }
        let version = r.u32("format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported {what} version {version}"),
            });
        }
        Ok(r)
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos,
                message: format!("truncated while reading {what}"),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos,
                message: format!("{} trailing bytes", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new(NETWORK_MAGIC);
        w.u32(self.spec.matrix_count() as u32);
        w.u32(self.spec.input_dim as u32);
        w.u32(self.spec.output_dim as u32);
        w.u32(u32::from(self.spec.bias_enabled));
        w.f64(self.spec.sharpness);
        for &width in &self.spec.hidden_widths {
            w.u32(width as u32);
        }
        for mat in &self.weights {
            for &x in mat.as_slice() {
                w.f64(x);
            }
        }
        if let Some(bs) = &self.biases {
            for b in bs {
                for &x in b {
                    w.f64(x);
                }
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
        let mut r = ByteReader::new(bytes, NETWORK_MAGIC, "network")?;
        let matrix_count = r.u32("matrix count")? as usize;
        if matrix_count == 0 {
            return Err(Error::Format {
                offset: r.offset(),
                message: "matrix count must be positive".into(),
            });
        }
        let input_dim = r.u32("input dim")? as usize;
        let output_dim = r.u32("output dim")? as usize;
        let bias_enabled = match r.u32("bias flag")? {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Format {
                    offset: r.offset(),
                    message: format!("bias flag must be 0 or 1, got {other}"),
                })
            }
        };
        let sharpness = r.f64("sharpness")?;
        let mut hidden_widths = Vec::with_capacity(matrix_count - 1);
        for _ in 0..matrix_count - 1 {
            hidden_widths.push(r.u32("hidden width")? as usize);
        }
        let spec = NetworkSpec {
            input_dim,
            output_dim,
            hidden_widths,
            sharpness,
            bias_enabled,
        };
        spec.validate().map_err(|e| Error::Format {
            offset: r.offset(),
            message: format!("invalid stored spec: {e}"),
        })?;
        let mut weights = Vec::with_capacity(matrix_count);
        for j in 0..matrix_count {
            let (rows, cols) = spec.matrix_dims(j);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(r.f64("weight")?);
            }
            weights.push(DenseMatrix::new(rows, cols, data).map_err(|e| Error::Format {
                offset: r.offset(),
                message: format!("invalid weights: {e}"),
            })?);
        }
        let biases = if bias_enabled {
            let mut bs = Vec::with_capacity(matrix_count);
            for j in 0..matrix_count {
                let rows = spec.matrix_dims(j).0;
                let mut b = Vec::with_capacity(rows);
                for _ in 0..rows {
                    b.push(r.f64("bias")?);
                }
                bs.push(b);
            }
            Some(bs)
        } else {
            None
        };
        r.finish()?;
        Ok(Network {
            spec,
            weights,
            biases,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Network> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Network::from_bytes(&bytes)
    }
}
