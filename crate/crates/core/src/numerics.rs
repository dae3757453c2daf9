//! Dense vectors and matrices, vector norms, seeded randomness, and
//! finite-difference gradients.
//!
//! Storage is row-major `Vec<f64>` and every accumulation (norms, dot
//! products, matrix-vector products) runs in a fixed left-to-right order, so
//! results are bit-identical across runs and platforms. Randomness comes from
//! ChaCha12 seeded by a `u64`; independent streams for different purposes are
//! derived with [`derive_seed`].

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Which vector norm to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// Sum of absolute values.
    L1,
    /// Euclidean norm.
    L2,
}

fn norm_of(xs: &[f64], p: Norm) -> f64 {
    match p {
        Norm::L1 => {
            let mut acc = 0.0;
            for &x in xs {
                acc += x.abs();
            }
            acc
        }
        Norm::L2 => {
            let mut acc = 0.0;
            for &x in xs {
                acc += x * x;
            }
            acc.sqrt()
        }
    }
}

/// L1 or L2 norm of a slice. Errors on an empty slice.
pub fn vector_norm(xs: &[f64], p: Norm) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Shape("norm of an empty vector".into()));
    }
    Ok(norm_of(xs, p))
}

/// A dense real vector: at least one entry, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Shape("vector must have at least one entry".into()));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite vector entry {bad}")));
        }
        Ok(DenseVector { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        DenseVector {
            data: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self, p: Norm) -> f64 {
        norm_of(&self.data, p)
    }
}

/// A dense row-major real matrix with positive dimensions and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite matrix entry {bad}")));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out = self * x`, accumulated left to right along each row.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec input length");
        assert_eq!(out.len(), self.rows, "matvec output length");
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += row[c] * x[c];
            }
            out[r] = acc;
        }
    }

    /// `out += self^T * x`, accumulated in row order (used by backprop).
    pub fn matvec_transpose_add(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.rows, "matvec_transpose input length");
        assert_eq!(out.len(), self.cols, "matvec_transpose output length");
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            for c in 0..self.cols {
                out[c] += row[c] * xr;
            }
        }
    }
}

/// Mixes a master seed, a purpose tag, and an index into a fresh sub-seed.
///
/// The tag is hashed with FNV-1a and the result is passed through the
/// splitmix64 finalizer, so distinct purposes and indices give independent
/// streams while staying reproducible everywhere.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic random source: ChaCha12 keyed by a 64-bit seed.
///
/// The same seed yields the same stream on every platform. A generator is
/// single-owner; concurrent work should use independent instances built with
/// [`SeededRng::derived`].
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Generator seeded by `derive_seed(master, purpose, index)`.
    pub fn derived(master: u64, purpose: &str, index: u64) -> Self {
        SeededRng::new(derive_seed(master, purpose, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// One Gaussian draw.
    pub fn gaussian(&mut self, mean: f64, std_dev: f64) -> f64 {
        if std_dev == 0.0 {
            return mean;
        }
        let normal = Normal::new(mean, std_dev).expect("finite mean and std dev");
        normal.sample(&mut self.inner)
    }

    /// In-place Fisher-Yates shuffle with a fixed visiting order.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        if xs.len() < 2 {
            return;
        }
        for i in (1..xs.len()).rev() {
            let j = self.inner.random_range(0..=i);
            xs.swap(i, j);
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        self.inner.random_range(0..n)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Matrix with i.i.d. Gaussian entries drawn row-major from `rng`.
pub fn gaussian_matrix(
    rows: usize,
    cols: usize,
    mean: f64,
    variance: f64,
    rng: &mut SeededRng,
) -> Result<DenseMatrix> {
    if !mean.is_finite() || !variance.is_finite() {
        return Err(Error::Parameter("gaussian parameters must be finite".into()));
    }
    if variance < 0.0 {
        return Err(Error::Parameter(format!(
            "variance must be nonnegative, got {variance}"
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let std_dev = variance.sqrt();
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(rng.gaussian(mean, std_dev));
    }
    DenseMatrix::new(rows, cols, data)
}

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / (2h)`.
///
/// Used as the independent oracle for analytic gradients.
pub fn finite_diff_grad<F>(mut f: F, x: &DenseVector, h: f64) -> Result<DenseVector>
where
    F: FnMut(&DenseVector) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Parameter(format!("step must be positive, got {h}")));
    }
    let mut grad = Vec::with_capacity(x.dim());
    let mut probe = x.clone();
    for i in 0..x.dim() {
        let base = x.as_slice()[i];
        probe.data[i] = base + h;
        let plus = f(&probe);
        probe.data[i] = base - h;
        let minus = f(&probe);
        probe.data[i] = base;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "objective returned a non-finite value near coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    DenseVector::new(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_pythagorean() {
        let v = DenseVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.norm(Norm::L2), 5.0);
    }

    #[test]
    fn norm_l1_sums_magnitudes() {
        let v = DenseVector::new(vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(v.norm(Norm::L1), 6.0);
    }

    #[test]
    fn norm_zero_vector() {
        let v = DenseVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(v.norm(Norm::L2), 0.0);
    }

    #[test]
    fn norm_empty_slice_is_error() {
        assert!(vector_norm(&[], Norm::L1).is_err());
        assert!(vector_norm(&[], Norm::L2).is_err());
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
        assert!(DenseVector::new(vec![]).is_err());
    }

    #[test]
    fn norm_ordering_l1_dominates_l2() {
        let mut rng = SeededRng::new(31);
        for _ in 0..200 {
            let dim = 1 + rng.index(12);
            let data: Vec<f64> = (0..dim).map(|_| rng.gaussian(0.0, 3.0)).collect();
            let v = DenseVector::new(data).unwrap();
            assert!(v.norm(Norm::L1) >= v.norm(Norm::L2) - 1e-12);
        }
    }

    #[test]
    fn triangle_inequality_holds() {
        let mut rng = SeededRng::new(77);
        for _ in 0..200 {
            let dim = 1 + rng.index(10);
            let a: Vec<f64> = (0..dim).map(|_| rng.gaussian(0.0, 2.0)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.gaussian(0.0, 2.0)).collect();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            for p in [Norm::L1, Norm::L2] {
                let lhs = norm_of(&sum, p);
                let rhs = norm_of(&a, p) + norm_of(&b, p);
                assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn matrix_shape_validation() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn matvec_small_case() {
        let m = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut out = [0.0; 2];
        m.matvec(&[1.0, 1.0, 1.0], &mut out);
        assert_eq!(out, [6.0, 15.0]);
    }

    #[test]
    fn gaussian_zero_variance_is_constant() {
        let mut rng = SeededRng::new(5);
        let m = gaussian_matrix(2, 2, 0.0, 0.0, &mut rng).unwrap();
        assert!(m.as_slice().iter().all(|&x| x == 0.0));
        let m = gaussian_matrix(2, 2, 1.5, 0.0, &mut rng).unwrap();
        assert!(m.as_slice().iter().all(|&x| x == 1.5));
    }

    #[test]
    fn gaussian_negative_variance_is_error() {
        let mut rng = SeededRng::new(5);
        assert!(gaussian_matrix(2, 2, 0.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian_sample_mean_near_zero() {
        let mut rng = SeededRng::new(7);
        let m = gaussian_matrix(1000, 1, 0.0, 1.0, &mut rng).unwrap();
        let mean: f64 = m.as_slice().iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 0.1, "sample mean {mean}");
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let mut a = SeededRng::new(99);
        let mut b = SeededRng::new(99);
        let xs: Vec<u64> = (0..32).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..32).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);

        let mut r1 = SeededRng::new(123);
        let mut r2 = SeededRng::new(123);
        let m1 = gaussian_matrix(4, 3, 0.0, 2.0, &mut r1).unwrap();
        let m2 = gaussian_matrix(4, 3, 0.0, 2.0, &mut r2).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn derived_seeds_separate_purposes() {
        let a = derive_seed(42, "data-noise", 0);
        let b = derive_seed(42, "weight-init", 0);
        let c = derive_seed(42, "data-noise", 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, "data-noise", 0));
    }

    #[test]
    fn shuffle_is_seed_deterministic() {
        let mut xs: Vec<u32> = (0..16).collect();
        let mut ys: Vec<u32> = (0..16).collect();
        SeededRng::new(3).shuffle(&mut xs);
        SeededRng::new(3).shuffle(&mut ys);
        assert_eq!(xs, ys);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn finite_diff_square() {
        let f = |v: &DenseVector| v.as_slice()[0] * v.as_slice()[0];
        let x = DenseVector::new(vec![3.0]).unwrap();
        let g = finite_diff_grad(f, &x, 1e-5).unwrap();
        assert!((g.as_slice()[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let f = |_: &DenseVector| 4.25;
        let x = DenseVector::new(vec![0.3, -0.7, 1.1]).unwrap();
        let g = finite_diff_grad(f, &x, 1e-4).unwrap();
        assert!(g.as_slice().iter().all(|&gi| gi.abs() < 1e-9));
    }

    #[test]
    fn finite_diff_linear() {
        let f = |v: &DenseVector| v.as_slice()[0] + 2.0 * v.as_slice()[1];
        let x = DenseVector::new(vec![0.0, 0.0]).unwrap();
        let g = finite_diff_grad(f, &x, 1e-4).unwrap();
        assert!((g.as_slice()[0] - 1.0).abs() < 1e-8);
        assert!((g.as_slice()[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn finite_diff_rejects_non_finite_objective() {
        let x = DenseVector::new(vec![1.0]).unwrap();
        assert!(finite_diff_grad(|_| f64::NAN, &x, 1e-6).is_err());
        assert!(finite_diff_grad(|_| 1.0, &x, 0.0).is_err());
    }
}
