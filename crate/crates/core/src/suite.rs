//! The built-in Rademacher check suite: a fixed zoo of enumerable instances
//! (constant families, linear families, tiny networks) run through every
//! check, each exact-mode result paired with a Monte-Carlo rerun, exported
//! as JSON lines.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{init_network, NetworkSpec};
use crate::numerics::{DenseVector, SeededRng};
use crate::rademacher::{
    check_additivity, check_loss_domination, check_symmetrization, check_talagrand,
    empirical_rademacher, CheckOutcome, DiscreteDistribution, FiniteFamily, RadMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Sign draws per Monte-Carlo rerun.
    pub draws: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 2718,
            draws: 10_000,
        }
    }
}

/// One JSON-lines record of the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub std_error: f64,
    pub holds: bool,
    pub seed: u64,
    pub params: String,
}

impl CheckRecord {
    fn from_outcome(check: &str, out: CheckOutcome, seed: u64, params: String) -> CheckRecord {
        CheckRecord {
            check: check.to_string(),
            lhs: out.lhs,
            rhs: out.rhs,
            std_error: out.std_error,
            holds: out.holds,
            seed,
            params,
        }
    }
}

pub fn records_to_json_lines(records: &[CheckRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn scalars(xs: &[f64]) -> Vec<DenseVector> {
    xs.iter()
        .map(|&x| DenseVector::new(vec![x]).unwrap())
        .collect()
}

fn sign_family() -> FiniteFamily {
    FiniteFamily::from_scalar_fns(
        "x,-x",
        1,
        vec![
            Box::new(|x: &DenseVector| x.as_slice()[0])
                as Box<dyn Fn(&DenseVector) -> f64 + Send + Sync>,
            Box::new(|x: &DenseVector| -x.as_slice()[0]),
        ],
    )
}

/// A pair of tiny seeded two-matrix networks as a vector-valued family.
fn tiny_network_family(seed: u64) -> Result<FiniteFamily> {
    let mut fam = FiniteFamily::new("tiny nets", 2, 2);
    for i in 0..2u64 {
        let spec = NetworkSpec::new(2, 2, vec![4])?;
        let net = init_network(spec, &mut SeededRng::derived(seed, "suite-net", i))?;
        fam.push(move |x: &DenseVector| net.forward(x).expect("forward on suite input"));
    }
    Ok(fam)
}

/// Runs every check on the built-in instances. Exact values first, then
/// Monte-Carlo agreement records (estimate vs exact within three standard
/// errors); every record carries its own `holds` verdict.
pub fn run_rademacher_suite(config: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let mut records = Vec::new();
    let mc = RadMode::MonteCarlo {
        draws: config.draws,
        seed: config.seed,
    };

    // Exact complexity values with closed-form expectations.
    let expect = |label: &str, fam: &FiniteFamily, s: &[DenseVector], expected: f64| -> Result<CheckRecord> {
        let est = empirical_rademacher(fam, s, RadMode::Exact)?;
        Ok(CheckRecord {
            check: format!("complexity_exact/{label}"),
            lhs: est.value,
            rhs: expected,
            std_error: 0.0,
            holds: (est.value - expected).abs() <= 1e-12,
            seed: config.seed,
            params: format!("n={}", s.len()),
        })
    };

    let singleton = FiniteFamily::from_constants("singleton", 1, &[0.7]);
    let s3 = scalars(&[1.0, 2.0, 3.0]);
    records.push(expect("singleton", &singleton, &s3, 0.0)?);

    let two_const = FiniteFamily::from_constants("pm1", 1, &[1.0, -1.0]);
    let s2 = scalars(&[5.0, -3.0]);
    records.push(expect("two_constants", &two_const, &s2, 0.5)?);

    let s12 = scalars(&[1.0, 2.0]);
    records.push(expect("sign_family", &sign_family(), &s12, 1.0)?);

    // Monte-Carlo agreement with the exact values.
    let mc_agree = |label: &str, fam: &FiniteFamily, s: &[DenseVector]| -> Result<CheckRecord> {
        let exact = empirical_rademacher(fam, s, RadMode::Exact)?;
        let est = empirical_rademacher(fam, s, mc)?;
        Ok(CheckRecord {
            check: format!("complexity_monte_carlo/{label}"),
            lhs: est.value,
            rhs: exact.value,
            std_error: est.std_error,
            holds: (est.value - exact.value).abs() <= 3.0 * est.std_error + 1e-12,
            seed: config.seed,
            params: format!("n={} draws={}", s.len(), config.draws),
        })
    };
    records.push(mc_agree("two_constants", &two_const, &s2)?);
    records.push(mc_agree("sign_family", &sign_family(), &s12)?);

    // Contraction: identity case is an equality, absolute value contracts.
    let identity: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = (0..2)
        .map(|_| Box::new(|v: f64| v) as Box<dyn Fn(f64) -> f64 + Send + Sync>)
        .collect();
    let out = check_talagrand(&sign_family(), &s12, &identity, 1.0, RadMode::Exact)?;
    records.push(CheckRecord {
        holds: out.holds && out.lhs == out.rhs,
        ..CheckRecord::from_outcome("talagrand/identity", out, config.seed, "L=1".into())
    });

    let abs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> =
        vec![Box::new(|v: f64| v.abs())];
    let out = check_talagrand(&sign_family(), &scalars(&[1.0]), &abs, 1.0, RadMode::Exact)?;
    records.push(CheckRecord::from_outcome(
        "talagrand/absolute_value",
        out,
        config.seed,
        "L=1 n=1".into(),
    ));

    let halves: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = (0..2)
        .map(|_| Box::new(|v: f64| 0.5 * v) as Box<dyn Fn(f64) -> f64 + Send + Sync>)
        .collect();
    let out = check_talagrand(&sign_family(), &s12, &halves, 0.5, RadMode::Exact)?;
    records.push(CheckRecord::from_outcome(
        "talagrand/half_scale",
        out,
        config.seed,
        "L=0.5".into(),
    ));

    // Additivity: the two-family constant case and the singleton-padding case.
    let out = check_additivity(
        &[
            FiniteFamily::from_constants("pm1 a", 1, &[1.0, -1.0]),
            FiniteFamily::from_constants("pm1 b", 1, &[1.0, -1.0]),
        ],
        &s2,
        RadMode::Exact,
    )?;
    records.push(CheckRecord::from_outcome(
        "additivity/two_sign_constants",
        out,
        config.seed,
        "n=2".into(),
    ));

    let out = check_additivity(
        &[
            FiniteFamily::from_constants("s1", 1, &[0.2]),
            FiniteFamily::from_constants("s2", 1, &[-0.1]),
            FiniteFamily::from_constants("s3", 1, &[0.05]),
            FiniteFamily::from_constants("pm1", 1, &[1.0, -1.0]),
        ],
        &s12,
        RadMode::Exact,
    )?;
    records.push(CheckRecord::from_outcome(
        "additivity/singletons_plus_signs",
        out,
        config.seed,
        "n=2".into(),
    ));

    // Loss domination on the scalar sign family and on tiny networks.
    let out = check_loss_domination(
        &sign_family(),
        |_x| DenseVector::new(vec![0.0]).unwrap(),
        &s12,
        RadMode::Exact,
    )?;
    records.push(CheckRecord::from_outcome(
        "loss_domination/sign_family",
        out,
        config.seed,
        "target=0 n=2".into(),
    ));

    let nets = tiny_network_family(config.seed)?;
    let target_spec = NetworkSpec::new(2, 2, vec![4])?;
    let target_net = init_network(
        target_spec,
        &mut SeededRng::derived(config.seed, "suite-net", 99),
    )?;
    let mut probe_rng = SeededRng::derived(config.seed, "suite-probe", 0);
    let probes: Vec<DenseVector> = (0..3)
        .map(|_| {
            DenseVector::new(vec![
                probe_rng.gaussian(0.0, 0.5),
                probe_rng.gaussian(0.0, 0.5),
            ])
            .unwrap()
        })
        .collect();
    let out = check_loss_domination(
        &nets,
        move |x| target_net.forward(x).expect("target forward"),
        &probes,
        RadMode::Exact,
    )?;
    records.push(CheckRecord::from_outcome(
        "loss_domination/tiny_networks",
        out,
        config.seed,
        "n=3".into(),
    ));

    // Symmetrization: tight constant case, exhaustive two-point case, and a
    // Monte-Carlo shrink check at larger N.
    let dist = DiscreteDistribution::uniform(scalars(&[0.0, 1.0]))?;
    let out = check_symmetrization(
        &FiniteFamily::from_constants("const", 1, &[0.6]),
        &dist,
        3,
        0,
        RadMode::Exact,
    )?;
    records.push(CheckRecord::from_outcome(
        "symmetrization/constant_loss",
        out,
        config.seed,
        "n=3 exact".into(),
    ));

    let two_hyp = FiniteFamily::from_scalar_fns(
        "two hypotheses",
        1,
        vec![
            Box::new(|x: &DenseVector| x.as_slice()[0])
                as Box<dyn Fn(&DenseVector) -> f64 + Send + Sync>,
            Box::new(|x: &DenseVector| 1.0 - x.as_slice()[0]),
        ],
    );
    let out = check_symmetrization(&two_hyp, &dist, 4, 0, RadMode::Exact)?;
    records.push(CheckRecord::from_outcome(
        "symmetrization/two_point_exhaustive",
        out,
        config.seed,
        "n=4 exact".into(),
    ));

    let pm = DiscreteDistribution::uniform(scalars(&[-1.0, 1.0]))?;
    let out = check_symmetrization(&sign_family(), &pm, 64, 60, mc)?;
    records.push(CheckRecord::from_outcome(
        "symmetrization/monte_carlo",
        out,
        config.seed,
        format!("n=64 trials=60 draws={}", config.draws),
    ));

    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_all_hold() {
        let records = run_rademacher_suite(&SuiteConfig::default()).unwrap();
        assert!(records.len() >= 12);
        for r in &records {
            assert!(r.holds, "{} failed: lhs {} rhs {}", r.check, r.lhs, r.rhs);
        }
    }

    #[test]
    fn tiny_draw_suite_reports_positive_std_errors() {
        let records = run_rademacher_suite(&SuiteConfig {
            seed: 11,
            draws: 10,
        })
        .unwrap();
        let mc: Vec<_> = records
            .iter()
            .filter(|r| r.check.starts_with("complexity_monte_carlo"))
            .collect();
        assert!(!mc.is_empty());
        for r in mc {
            assert!(r.std_error > 0.0, "{:?}", r);
        }
    }

    #[test]
    fn suite_output_is_seed_deterministic() {
        let cfg = SuiteConfig {
            seed: 5,
            draws: 200,
        };
        let a = records_to_json_lines(&run_rademacher_suite(&cfg).unwrap());
        let b = records_to_json_lines(&run_rademacher_suite(&cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.lines().count() >= 12);
        for line in a.lines() {
            let back: CheckRecord = serde_json::from_str(line).unwrap();
            assert_eq!(back.seed, 5);
        }
    }
}
