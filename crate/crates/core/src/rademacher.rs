//! Empirical Rademacher complexity over explicitly finite hypothesis
//! families, exactly (sign enumeration) or by Monte Carlo, plus executable
//! checks of the contraction, loss-domination, additivity, and
//! symmetrization facts the estimation bound rests on.
//!
//! The supremum is always a max over a finite family. Infinite families are
//! represented by finite subsets, which lower-bounds the true complexity, so
//! the checks test inequalities only in the direction that remains valid for
//! a subset.

use crate::error::{Error, Result};
use crate::numerics::{DenseVector, SeededRng};

/// Hard cap on exact sign enumeration (2^N patterns).
pub const MAX_EXACT_SAMPLES: usize = 20;

/// Guard on the cartesian product of family sizes in the additivity check.
const MAX_SUM_FAMILY: usize = 1_000_000;

/// Absolute slack absorbing floating-point association error in exact-mode
/// comparisons; equalities checked through it are exact for the small
/// integer-valued instances the suite uses.
const EXACT_SLACK: f64 = 1e-12;

type Hypothesis = Box<dyn Fn(&DenseVector) -> DenseVector + Send + Sync>;

/// A finite, explicitly enumerated family of vector-to-vector hypotheses
/// sharing input and output dimensions (`output_dim == 1` for scalar
/// families).
pub struct FiniteFamily {
    label: String,
    input_dim: usize,
    output_dim: usize,
    hypotheses: Vec<Hypothesis>,
}

impl FiniteFamily {
    pub fn new(label: impl Into<String>, input_dim: usize, output_dim: usize) -> Self {
        FiniteFamily {
            label: label.into(),
            input_dim,
            output_dim,
            hypotheses: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        h: impl Fn(&DenseVector) -> DenseVector + Send + Sync + 'static,
    ) -> &mut Self {
        self.hypotheses.push(Box::new(h));
        self
    }

    /// Scalar family from plain `R^d -> R` closures.
    pub fn from_scalar_fns<F>(label: impl Into<String>, input_dim: usize, fs: Vec<F>) -> Self
    where
        F: Fn(&DenseVector) -> f64 + Send + Sync + 'static,
    {
        let mut fam = FiniteFamily::new(label, input_dim, 1);
        for f in fs {
            fam.push(move |x: &DenseVector| {
                DenseVector::new(vec![f(x)]).expect("finite scalar hypothesis value")
            });
        }
        fam
    }

    /// Scalar family of constant functions.
    pub fn from_constants(label: impl Into<String>, input_dim: usize, values: &[f64]) -> Self {
        let mut fam = FiniteFamily::new(label, input_dim, 1);
        for &v in values {
            fam.push(move |_: &DenseVector| DenseVector::new(vec![v]).expect("finite constant"));
        }
        fam
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.hypotheses.is_empty() {
            return Err(Error::Parameter(format!(
                "family {:?} has no hypotheses",
                self.label
            )));
        }
        Ok(())
    }

    /// Evaluates hypothesis `h` on `x` and folds the output to the scalar the
    /// sign correlation uses: the coordinate sum (for scalar families this is
    /// the value itself).
    fn scalarize(&self, h: usize, x: &DenseVector) -> Result<f64> {
        if x.dim() != self.input_dim {
            return Err(Error::Shape(format!(
                "sample dim {} vs family input dim {}",
                x.dim(),
                self.input_dim
            )));
        }
        let y = (self.hypotheses[h])(x);
        if y.dim() != self.output_dim {
            return Err(Error::Shape(format!(
                "hypothesis {h} of {:?} returned dim {}, family says {}",
                self.label,
                y.dim(),
                self.output_dim
            )));
        }
        let mut acc = 0.0;
        for &v in y.as_slice() {
            acc += v;
        }
        Ok(acc)
    }

    /// Value matrix `values[h][i]` of scalarized hypothesis outputs.
    fn value_matrix(&self, samples: &[DenseVector]) -> Result<Vec<Vec<f64>>> {
        self.check_nonempty()?;
        self.hypotheses
            .iter()
            .enumerate()
            .map(|(h, _)| {
                samples
                    .iter()
                    .map(|x| self.scalarize(h, x))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    }
}

impl std::fmt::Debug for FiniteFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteFamily")
            .field("label", &self.label)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("len", &self.hypotheses.len())
            .finish()
    }
}

/// How to take the expectation over sign vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadMode {
    /// Enumerate all 2^N sign patterns; exact, std error 0.
    Exact,
    /// Average over seeded draws; each draw's signs come from a stream
    /// derived from `(seed, "rademacher-draw", index)`, so draws are
    /// schedule-independent.
    MonteCarlo { draws: usize, seed: u64 },
}

/// An estimate with its Monte-Carlo standard error (0 in exact mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `E_sigma[(1/N) max_h sum_i sigma_i v[h][i]]` over a value matrix.
fn expected_sup_correlation(values: &[Vec<f64>], n: usize, mode: RadMode) -> Result<RadEstimate> {
    debug_assert!(values.iter().all(|row| row.len() == n));
    if n == 0 {
        return Err(Error::Parameter("sample set must be nonempty".into()));
    }
    match mode {
        RadMode::Exact => {
            if n > MAX_EXACT_SAMPLES {
                return Err(Error::Mode(format!(
                    "exact enumeration caps at {MAX_EXACT_SAMPLES} samples, got {n}"
                )));
            }
            let patterns = 1u64 << n;
            let mut total = 0.0;
            for pattern in 0..patterns {
                total += sup_for_signs(values, n, |i| (pattern >> i) & 1 == 1);
            }
            Ok(RadEstimate {
                value: total / patterns as f64 / n as f64,
                std_error: 0.0,
            })
        }
        RadMode::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::Parameter("draw count must be positive".into()));
            }
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for draw in 0..draws {
                let mut rng = SeededRng::derived(seed, "rademacher-draw", draw as u64);
                let signs: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
                let v = sup_for_signs(values, n, |i| signs[i]) / n as f64;
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / draws as f64;
            let std_error = if draws > 1 {
                let var = ((sum_sq - sum * sum / draws as f64) / (draws as f64 - 1.0)).max(0.0);
                (var / draws as f64).sqrt()
            } else {
                0.0
            };
            Ok(RadEstimate {
                value: mean,
                std_error,
            })
        }
    }
}

fn sup_for_signs(values: &[Vec<f64>], n: usize, positive: impl Fn(usize) -> bool) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for row in values {
        let mut acc = 0.0;
        for i in 0..n {
            if positive(i) {
                acc += row[i];
            } else {
                acc -= row[i];
            }
        }
        best = best.max(acc);
    }
    best
}

/// Empirical Rademacher complexity of a finite family on a sample set.
///
/// Scalar families use the sign correlation of their values; vector families
/// use the correlation of the coordinate sums (the all-ones contraction of
/// the outputs), which is the form the estimation bound controls.
pub fn empirical_rademacher(
    family: &FiniteFamily,
    samples: &[DenseVector],
    mode: RadMode,
) -> Result<RadEstimate> {
    let values = family.value_matrix(samples)?;
    expected_sup_correlation(&values, samples.len(), mode)
}

/// Outcome of one inequality or identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub lhs: f64,
    pub rhs: f64,
    /// Combined standard error of the two sides.
    pub std_error: f64,
    pub holds: bool,
}

/// Contraction check: composing a scalar family with per-sample L-Lipschitz
/// functions scales the complexity by at most L.
///
/// Each function is spot-checked for the claimed Lipschitz constant on a
/// probe grid spanning the family's value range before the comparison runs.
pub fn check_talagrand(
    family: &FiniteFamily,
    samples: &[DenseVector],
    phis: &[Box<dyn Fn(f64) -> f64 + Send + Sync>],
    lipschitz: f64,
    mode: RadMode,
) -> Result<CheckOutcome> {
    if family.output_dim != 1 {
        return Err(Error::Mode(
            "contraction check applies to scalar families".into(),
        ));
    }
    if phis.len() != samples.len() {
        return Err(Error::Parameter(format!(
            "{} wrappers for {} samples",
            phis.len(),
            samples.len()
        )));
    }
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::Parameter(format!(
            "lipschitz constant must be nonnegative, got {lipschitz}"
        )));
    }
    let values = family.value_matrix(samples)?;
    spot_check_lipschitz(phis, &values, lipschitz)?;

    let composed: Vec<Vec<f64>> = values
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(i, &v)| (phis[i])(v))
                .collect()
        })
        .collect();
    let lhs = expected_sup_correlation(&composed, samples.len(), mode)?;
    let base = expected_sup_correlation(&values, samples.len(), mode)?;
    let rhs = lipschitz * base.value;
    let std_error = lhs.std_error + lipschitz * base.std_error;
    Ok(CheckOutcome {
        lhs: lhs.value,
        rhs,
        std_error,
        holds: lhs.value <= rhs + 3.0 * std_error + EXACT_SLACK,
    })
}

fn spot_check_lipschitz(
    phis: &[Box<dyn Fn(f64) -> f64 + Send + Sync>],
    values: &[Vec<f64>],
    lipschitz: f64,
) -> Result<()> {
    let mut range: f64 = 1.0;
    for row in values {
        for &v in row {
            range = range.max(v.abs());
        }
    }
    range *= 1.5;
    let probes: Vec<f64> = (-10..=10).map(|i| i as f64 * range / 10.0).collect();
    for (idx, phi) in phis.iter().enumerate() {
        for (a_i, &a) in probes.iter().enumerate() {
            for &b in &probes[a_i + 1..] {
                let gap = (phi(a) - phi(b)).abs();
                let allowed = lipschitz * (a - b).abs();
                if gap > allowed * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Parameter(format!(
                        "wrapper {idx} violates the {lipschitz}-Lipschitz claim \
                         between {a} and {b}: |diff| = {gap}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Loss-domination check: the complexity of the absolute-error losses
/// `x -> ||f(x) - target(x)||_1` is at most the family's own complexity.
pub fn check_loss_domination(
    family: &FiniteFamily,
    target: impl Fn(&DenseVector) -> DenseVector,
    samples: &[DenseVector],
    mode: RadMode,
) -> Result<CheckOutcome> {
    family.check_nonempty()?;
    let mut loss_values = Vec::with_capacity(family.len());
    for h in 0..family.len() {
        let mut row = Vec::with_capacity(samples.len());
        for x in samples {
            let y = (family.hypotheses[h])(x);
            if y.dim() != family.output_dim {
                return Err(Error::Shape(format!(
                    "hypothesis {h} returned dim {}, family says {}",
                    y.dim(),
                    family.output_dim
                )));
            }
            let t = target(x);
            if t.dim() != family.output_dim {
                return Err(Error::Shape(format!(
                    "target returned dim {}, family says {}",
                    t.dim(),
                    family.output_dim
                )));
            }
            let mut acc = 0.0;
            for (&a, &b) in y.as_slice().iter().zip(t.as_slice()) {
                acc += (a - b).abs();
            }
            row.push(acc);
        }
        loss_values.push(row);
    }
    let r_loss = expected_sup_correlation(&loss_values, samples.len(), mode)?;
    let r_family = empirical_rademacher(family, samples, mode)?;
    let std_error = r_loss.std_error + r_family.std_error;
    Ok(CheckOutcome {
        lhs: r_loss.value,
        rhs: r_family.value,
        std_error,
        holds: r_loss.value <= r_family.value + 3.0 * std_error + EXACT_SLACK,
    })
}

/// Additivity check: the complexity of the sum family
/// `{f_1 + ... + f_k : f_j in family_j}` equals the sum of the individual
/// complexities. Both sides see the same sign patterns, so the identity is
/// exact up to floating-point association even in Monte-Carlo mode.
pub fn check_additivity(
    families: &[FiniteFamily],
    samples: &[DenseVector],
    mode: RadMode,
) -> Result<CheckOutcome> {
    if families.is_empty() {
        return Err(Error::Parameter("need at least one family".into()));
    }
    let mut combos: usize = 1;
    for f in families {
        f.check_nonempty()?;
        if f.input_dim != families[0].input_dim || f.output_dim != families[0].output_dim {
            return Err(Error::Shape(
                "families must share input and output dims".into(),
            ));
        }
        combos = combos.saturating_mul(f.len());
        if combos > MAX_SUM_FAMILY {
            return Err(Error::Parameter(format!(
                "sum family would exceed {MAX_SUM_FAMILY} members"
            )));
        }
    }

    let per_family: Vec<Vec<Vec<f64>>> = families
        .iter()
        .map(|f| f.value_matrix(samples))
        .collect::<Result<_>>()?;

    // Mixed-radix walk over all hypothesis combinations.
    let n = samples.len();
    let mut sum_values = vec![vec![0.0; n]; combos];
    for (slot, row) in sum_values.iter_mut().enumerate() {
        let mut rem = slot;
        for fam_vals in &per_family {
            let pick = rem % fam_vals.len();
            rem /= fam_vals.len();
            for (acc, &v) in row.iter_mut().zip(&fam_vals[pick]) {
                *acc += v;
            }
        }
    }

    let lhs = expected_sup_correlation(&sum_values, n, mode)?;
    let mut rhs = 0.0;
    let mut rhs_err = 0.0;
    for fam_vals in &per_family {
        let est = expected_sup_correlation(fam_vals, n, mode)?;
        rhs += est.value;
        rhs_err += est.std_error;
    }
    let std_error = lhs.std_error + rhs_err;
    Ok(CheckOutcome {
        lhs: lhs.value,
        rhs,
        std_error,
        holds: (lhs.value - rhs).abs() <= 3.0 * std_error + EXACT_SLACK,
    })
}

/// A finitely supported input distribution; expectations over it are exact
/// sums, which is what lets the symmetrization check compute population
/// values in closed form.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    pub atoms: Vec<DenseVector>,
    pub probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn uniform(atoms: Vec<DenseVector>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("distribution needs atoms".into()));
        }
        let p = 1.0 / atoms.len() as f64;
        let probs = vec![p; atoms.len()];
        DiscreteDistribution { atoms, probs }.validated()
    }

    pub fn new(atoms: Vec<DenseVector>, probs: Vec<f64>) -> Result<Self> {
        DiscreteDistribution { atoms, probs }.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.atoms.is_empty() || self.atoms.len() != self.probs.len() {
            return Err(Error::Parameter(
                "atoms and probabilities must align and be nonempty".into(),
            ));
        }
        if self.probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Parameter("probabilities must be nonnegative".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let dim = self.atoms[0].dim();
        if self.atoms.iter().any(|a| a.dim() != dim) {
            return Err(Error::Shape("atoms must share a dimension".into()));
        }
        Ok(self)
    }

    fn sample_index(&self, rng: &mut SeededRng) -> usize {
        let u = rng.next_f64();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Symmetrization check: the expected supremum deviation between population
/// and empirical means is at most twice the expected empirical complexity.
///
/// The family members are treated as the (scalarized) loss values
/// themselves; the population mean per hypothesis is the exact atom-weighted
/// sum. Exact mode enumerates every possible N-sample draw; Monte-Carlo mode
/// averages over `trials` seeded draws.
pub fn check_symmetrization(
    family: &FiniteFamily,
    sampler: &DiscreteDistribution,
    n: usize,
    trials: usize,
    mode: RadMode,
) -> Result<CheckOutcome> {
    family.check_nonempty()?;
    if n == 0 {
        return Err(Error::Parameter("sample size must be positive".into()));
    }
    // Scalarized values on the atoms and exact population means.
    let atom_values = family.value_matrix(&sampler.atoms)?;
    let population: Vec<f64> = atom_values
        .iter()
        .map(|row| {
            row.iter()
                .zip(&sampler.probs)
                .map(|(&v, &p)| v * p)
                .sum::<f64>()
        })
        .collect();

    let deviation_and_complexity = |atom_idx: &[usize], rad_mode: RadMode| -> Result<(f64, f64)> {
        let mut dev: f64 = 0.0;
        let mut values = vec![vec![0.0; atom_idx.len()]; family.len()];
        for (h, row) in atom_values.iter().enumerate() {
            let mut emp = 0.0;
            for (slot, &a) in atom_idx.iter().enumerate() {
                emp += row[a];
                values[h][slot] = row[a];
            }
            emp /= atom_idx.len() as f64;
            dev = dev.max((population[h] - emp).abs());
        }
        let rad = expected_sup_correlation(&values, atom_idx.len(), rad_mode)?;
        Ok((dev, rad.value))
    };

    match mode {
        RadMode::Exact => {
            let draws = sampler
                .atoms
                .len()
                .checked_pow(n as u32)
                .filter(|&d| d <= MAX_SUM_FAMILY)
                .ok_or_else(|| {
                    Error::Mode(format!(
                        "exact draw enumeration needs |atoms|^N <= {MAX_SUM_FAMILY}"
                    ))
                })?;
            if n > MAX_EXACT_SAMPLES {
                return Err(Error::Mode(format!(
                    "exact enumeration caps at {MAX_EXACT_SAMPLES} samples"
                )));
            }
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            let mut idx = vec![0usize; n];
            for draw in 0..draws {
                let mut rem = draw;
                let mut prob = 1.0;
                for slot in idx.iter_mut() {
                    *slot = rem % sampler.atoms.len();
                    rem /= sampler.atoms.len();
                    prob *= sampler.probs[*slot];
                }
                let (dev, rad) = deviation_and_complexity(&idx, RadMode::Exact)?;
                lhs += prob * dev;
                rhs += prob * 2.0 * rad;
            }
            Ok(CheckOutcome {
                lhs,
                rhs,
                std_error: 0.0,
                holds: lhs <= rhs + EXACT_SLACK,
            })
        }
        RadMode::MonteCarlo { draws, seed } => {
            if trials < 30 {
                return Err(Error::Parameter(format!(
                    "need at least 30 trials for a meaningful mean, got {trials}"
                )));
            }
            let mut dev_sum = 0.0;
            let mut dev_sq = 0.0;
            let mut rad_sum = 0.0;
            let mut rad_sq = 0.0;
            for trial in 0..trials {
                let mut rng = SeededRng::derived(seed, "symmetrization-trial", trial as u64);
                let idx: Vec<usize> = (0..n).map(|_| sampler.sample_index(&mut rng)).collect();
                let inner = if n <= MAX_EXACT_SAMPLES {
                    RadMode::Exact
                } else {
                    RadMode::MonteCarlo {
                        draws,
                        seed: crate::numerics::derive_seed(seed, "symmetrization-inner", trial as u64),
                    }
                };
                let (dev, rad) = deviation_and_complexity(&idx, inner)?;
                dev_sum += dev;
                dev_sq += dev * dev;
                rad_sum += rad;
                rad_sq += rad * rad;
            }
            let t = trials as f64;
            let se = |sum: f64, sq: f64| ((sq - sum * sum / t) / (t - 1.0)).max(0.0).sqrt() / t.sqrt();
            let lhs = dev_sum / t;
            let rhs = 2.0 * rad_sum / t;
            let std_error = se(dev_sum, dev_sq) + 2.0 * se(rad_sum, rad_sq);
            Ok(CheckOutcome {
                lhs,
                rhs,
                std_error,
                holds: lhs <= rhs + 3.0 * std_error + EXACT_SLACK,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(xs: &[f64]) -> Vec<DenseVector> {
        xs.iter()
            .map(|&x| DenseVector::new(vec![x]).unwrap())
            .collect()
    }

    fn sign_family() -> FiniteFamily {
        FiniteFamily::from_scalar_fns(
            "x and -x",
            1,
            vec![
                Box::new(|x: &DenseVector| x.as_slice()[0]) as Box<dyn Fn(&DenseVector) -> f64 + Send + Sync>,
                Box::new(|x: &DenseVector| -x.as_slice()[0]),
            ],
        )
    }

    #[test]
    fn singleton_family_has_zero_complexity() {
        let fam = FiniteFamily::from_constants("singleton", 1, &[0.7]);
        let s = scalars(&[1.0, 2.0, 3.0]);
        let est = empirical_rademacher(&fam, &s, RadMode::Exact).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn two_constant_family_at_two_samples() {
        let fam = FiniteFamily::from_constants("pm1", 1, &[1.0, -1.0]);
        let s = scalars(&[5.0, -3.0]);
        let est = empirical_rademacher(&fam, &s, RadMode::Exact).unwrap();
        assert_eq!(est.value, 0.5);
    }

    #[test]
    fn sign_family_on_one_two() {
        let s = scalars(&[1.0, 2.0]);
        let est = empirical_rademacher(&sign_family(), &s, RadMode::Exact).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn exact_mode_rejects_large_samples() {
        let fam = FiniteFamily::from_constants("pm1", 1, &[1.0, -1.0]);
        let s = scalars(&vec![1.0; MAX_EXACT_SAMPLES + 1]);
        assert!(matches!(
            empirical_rademacher(&fam, &s, RadMode::Exact),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn monte_carlo_matches_exact_within_three_sigma() {
        let s = scalars(&[1.0, 2.0, -0.5, 0.25]);
        let exact = empirical_rademacher(&sign_family(), &s, RadMode::Exact).unwrap();
        let mc = empirical_rademacher(
            &sign_family(),
            &s,
            RadMode::MonteCarlo {
                draws: 4000,
                seed: 5,
            },
        )
        .unwrap();
        assert!(mc.std_error > 0.0);
        assert!(
            (mc.value - exact.value).abs() <= 3.0 * mc.std_error,
            "mc {} vs exact {} (se {})",
            mc.value,
            exact.value,
            mc.std_error
        );
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let s = scalars(&[1.0, 2.0]);
        let mode = RadMode::MonteCarlo { draws: 64, seed: 9 };
        let a = empirical_rademacher(&sign_family(), &s, mode).unwrap();
        let b = empirical_rademacher(&sign_family(), &s, mode).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_a_family_scales_its_complexity() {
        let s = scalars(&[0.5, -1.5, 2.0]);
        let base = empirical_rademacher(&sign_family(), &s, RadMode::Exact).unwrap();
        let scaled_fam = FiniteFamily::from_scalar_fns(
            "3x and -3x",
            1,
            vec![
                Box::new(|x: &DenseVector| 3.0 * x.as_slice()[0])
                    as Box<dyn Fn(&DenseVector) -> f64 + Send + Sync>,
                Box::new(|x: &DenseVector| -3.0 * x.as_slice()[0]),
            ],
        );
        let scaled = empirical_rademacher(&scaled_fam, &s, RadMode::Exact).unwrap();
        assert_eq!(scaled.value, 3.0 * base.value);
    }

    #[test]
    fn negation_closed_family_has_nonnegative_complexity() {
        let s = scalars(&[0.3, -0.9, 1.7, 0.02]);
        let est = empirical_rademacher(&sign_family(), &s, RadMode::Exact).unwrap();
        assert!(est.value >= 0.0);
    }

    fn identity_phis(n: usize) -> Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        (0..n)
            .map(|_| Box::new(|v: f64| v) as Box<dyn Fn(f64) -> f64 + Send + Sync>)
            .collect()
    }

    #[test]
    fn talagrand_identity_is_tight() {
        let s = scalars(&[1.0, 2.0, -0.75]);
        let out = check_talagrand(&sign_family(), &s, &identity_phis(3), 1.0, RadMode::Exact)
            .unwrap();
        assert_eq!(out.lhs, out.rhs);
        assert!(out.holds);
    }

    #[test]
    fn talagrand_absolute_value_case() {
        let s = scalars(&[1.0]);
        let phis: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> =
            vec![Box::new(|v: f64| v.abs())];
        let out = check_talagrand(&sign_family(), &s, &phis, 1.0, RadMode::Exact).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.rhs, 1.0);
        assert!(out.holds);
    }

    #[test]
    fn talagrand_scaling_case() {
        let s = scalars(&[1.0, 2.0]);
        let phis: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> =
            vec![Box::new(|v: f64| 0.5 * v), Box::new(|v: f64| 0.5 * v)];
        let out = check_talagrand(&sign_family(), &s, &phis, 0.5, RadMode::Exact).unwrap();
        assert!((out.lhs - out.rhs).abs() < 1e-15);
        assert!(out.holds);
    }

    #[test]
    fn talagrand_rejects_false_lipschitz_claims() {
        let s = scalars(&[1.0]);
        let phis: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> =
            vec![Box::new(|v: f64| 5.0 * v)];
        assert!(check_talagrand(&sign_family(), &s, &phis, 1.0, RadMode::Exact).is_err());
    }

    #[test]
    fn loss_domination_target_in_family() {
        let mut fam = FiniteFamily::new("just target", 1, 1);
        fam.push(|x: &DenseVector| DenseVector::new(vec![x.as_slice()[0] * 2.0]).unwrap());
        let s = scalars(&[1.0, -2.0]);
        let out = check_loss_domination(
            &fam,
            |x: &DenseVector| DenseVector::new(vec![x.as_slice()[0] * 2.0]).unwrap(),
            &s,
            RadMode::Exact,
        )
        .unwrap();
        assert_eq!(out.lhs, 0.0);
        assert!(out.rhs >= 0.0);
        assert!(out.holds);
    }

    #[test]
    fn loss_domination_sign_family() {
        let s = scalars(&[1.0, 2.0]);
        let out = check_loss_domination(
            &sign_family(),
            |x: &DenseVector| DenseVector::new(vec![x.as_slice()[0] * 0.0 + 0.0]).unwrap(),
            &s,
            RadMode::Exact,
        )
        .unwrap();
        // Both hypotheses have identical losses |x|, so the loss complexity
        // collapses to zero while the family complexity is 1.
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.rhs, 1.0);
        assert!(out.holds);
    }

    #[test]
    fn loss_domination_single_sample_enumeration() {
        let s = scalars(&[0.8]);
        let out =
            check_loss_domination(&sign_family(), |_x| DenseVector::new(vec![0.1]).unwrap(), &s, RadMode::Exact)
                .unwrap();
        assert!(out.holds);
    }

    #[test]
    fn additivity_two_singletons() {
        let a = FiniteFamily::from_constants("a", 1, &[0.4]);
        let b = FiniteFamily::from_constants("b", 1, &[-0.3]);
        let s = scalars(&[1.0, 2.0]);
        let out = check_additivity(&[a, b], &s, RadMode::Exact).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.rhs, 0.0);
        assert!(out.holds);
    }

    #[test]
    fn additivity_two_sign_constant_families() {
        let a = FiniteFamily::from_constants("pm1 a", 1, &[1.0, -1.0]);
        let b = FiniteFamily::from_constants("pm1 b", 1, &[1.0, -1.0]);
        let s = scalars(&[3.0, -1.0]);
        let out = check_additivity(&[a, b], &s, RadMode::Exact).unwrap();
        assert_eq!(out.lhs, 1.0);
        assert_eq!(out.rhs, 1.0);
        assert!(out.holds);
    }

    #[test]
    fn additivity_singletons_do_not_contribute() {
        let families = vec![
            FiniteFamily::from_constants("s1", 1, &[0.2]),
            FiniteFamily::from_constants("s2", 1, &[-0.1]),
            FiniteFamily::from_constants("s3", 1, &[0.05]),
            FiniteFamily::from_constants("pm1", 1, &[1.0, -1.0]),
        ];
        let s = scalars(&[1.0, -2.0]);
        let out = check_additivity(&families, &s, RadMode::Exact).unwrap();
        let alone = empirical_rademacher(
            &FiniteFamily::from_constants("pm1", 1, &[1.0, -1.0]),
            &s,
            RadMode::Exact,
        )
        .unwrap();
        assert!((out.lhs - alone.value).abs() < 1e-15);
        assert!(out.holds);
    }

    #[test]
    fn additivity_guards_combinatorial_blowup() {
        let families: Vec<FiniteFamily> = (0..4)
            .map(|i| {
                let values: Vec<f64> = (0..40).map(|j| (i * 40 + j) as f64 * 0.01).collect();
                FiniteFamily::from_constants(format!("big{i}"), 1, &values)
            })
            .collect();
        // 40^4 = 2.56 million combinations exceeds the guard.
        let s = scalars(&[1.0]);
        assert!(matches!(
            check_additivity(&families, &s, RadMode::Exact),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn symmetrization_constant_loss_is_tight_at_zero() {
        let fam = FiniteFamily::from_constants("const", 1, &[0.6]);
        let dist = DiscreteDistribution::uniform(scalars(&[0.0, 1.0])).unwrap();
        let out = check_symmetrization(&fam, &dist, 3, 0, RadMode::Exact).unwrap();
        assert_eq!(out.lhs, 0.0);
        assert_eq!(out.rhs, 0.0);
        assert!(out.holds);
    }

    #[test]
    fn symmetrization_exhaustive_two_point_case() {
        let fam = FiniteFamily::from_scalar_fns(
            "two hypotheses",
            1,
            vec![
                Box::new(|x: &DenseVector| x.as_slice()[0])
                    as Box<dyn Fn(&DenseVector) -> f64 + Send + Sync>,
                Box::new(|x: &DenseVector| 1.0 - x.as_slice()[0]),
            ],
        );
        let dist = DiscreteDistribution::uniform(scalars(&[0.0, 1.0])).unwrap();
        let out = check_symmetrization(&fam, &dist, 4, 0, RadMode::Exact).unwrap();
        assert!(out.holds, "lhs {} rhs {}", out.lhs, out.rhs);
        assert!(out.lhs > 0.0);
    }

    #[test]
    fn symmetrization_monte_carlo_deviation_shrinks_with_n() {
        let fam = sign_family();
        let dist = DiscreteDistribution::uniform(scalars(&[-1.0, 1.0])).unwrap();
        let mode = RadMode::MonteCarlo {
            draws: 400,
            seed: 31,
        };
        let small = check_symmetrization(&fam, &dist, 8, 60, mode).unwrap();
        let large = check_symmetrization(&fam, &dist, 256, 60, mode).unwrap();
        assert!(small.holds && large.holds);
        assert!(large.lhs < small.lhs);
        assert!(large.rhs >= 0.0);
    }

    #[test]
    fn symmetrization_requires_enough_trials() {
        let fam = sign_family();
        let dist = DiscreteDistribution::uniform(scalars(&[-1.0, 1.0])).unwrap();
        assert!(check_symmetrization(
            &fam,
            &dist,
            4,
            10,
            RadMode::MonteCarlo { draws: 10, seed: 1 }
        )
        .is_err());
    }

    #[test]
    fn vector_family_uses_coordinate_sums() {
        // Hypotheses R -> R^2; the correlation uses the coordinate sum.
        let mut fam = FiniteFamily::new("vector pair", 1, 2);
        fam.push(|x: &DenseVector| {
            let v = x.as_slice()[0];
            DenseVector::new(vec![v, v]).unwrap()
        });
        fam.push(|x: &DenseVector| {
            let v = x.as_slice()[0];
            DenseVector::new(vec![-v, -v]).unwrap()
        });
        let s = scalars(&[1.0, 2.0]);
        let est = empirical_rademacher(&fam, &s, RadMode::Exact).unwrap();
        // Twice the scalar sign-family complexity on the same sample.
        assert_eq!(est.value, 2.0);
    }

    #[test]
    fn empty_family_and_empty_sample_are_errors() {
        let fam = FiniteFamily::new("empty", 1, 1);
        let s = scalars(&[1.0]);
        assert!(empirical_rademacher(&fam, &s, RadMode::Exact).is_err());
        let fam = FiniteFamily::from_constants("c", 1, &[1.0]);
        assert!(empirical_rademacher(&fam, &[], RadMode::Exact).is_err());
    }
}
