//! Classification quality on rings: `Q(n)`, the error curve `err(k/n)` and
//! its binomial aggregate `E(n)`.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::{replicas, ExperimentError};
use crate::configuration::{bernoulli, Configuration, Symbol};
use crate::engine::{run_prepared, Kernel, Prepared, RunOptions, Verdict};
use crate::rules::Rule;
use crate::seeding::replica_rng;
use crate::stats::{binomial_pmf, Proportion};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    pub rule: Rule,
    pub n: usize,
    pub p: f64,
    pub samples: u64,
    /// Defaults to `2n`.
    pub max_steps: Option<usize>,
    pub master_seed: u64,
    pub kernel: Kernel,
    /// Keep one [`RunRecord`] per replica.
    pub keep_runs: bool,
}

impl QSpec {
    pub fn new(rule: Rule, n: usize, p: f64, samples: u64, master_seed: u64) -> Self {
        QSpec {
            rule,
            n,
            p,
            samples,
            max_steps: None,
            master_seed,
            kernel: Kernel::Auto,
            keep_runs: false,
        }
    }

    pub fn budget(&self) -> usize {
        self.max_steps.unwrap_or(2 * self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub replica: u64,
    pub ones: usize,
    pub verdict: Verdict,
    pub steps: usize,
    pub good: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QEstimate {
    pub rule: &'static str,
    pub n: usize,
    pub p: f64,
    pub samples: u64,
    pub budget: usize,
    /// Uniform on the majority symbol of the initial configuration.
    pub good: u64,
    /// Uniform on the minority symbol.
    pub wrong: u64,
    pub budget_exhausted: u64,
    /// Cycles and non-uniform fixed points.
    pub stuck: u64,
    /// Initial configurations with density exactly 1/2 that were redrawn.
    pub ties_resampled: u64,
    pub mean_steps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<Vec<RunRecord>>,
}

impl QEstimate {
    /// Budget-exhausted and stuck runs count as failures.
    pub fn q(&self) -> Proportion {
        Proportion::new(self.good, self.samples)
    }
}

fn tally(verdict: Verdict, majority: Symbol) -> (bool, bool, bool, bool) {
    match verdict.symbol() {
        Some(s) if s == majority => (true, false, false, false),
        Some(_) => (false, true, false, false),
        None if verdict == Verdict::StepBudgetExhausted => (false, false, true, false),
        None => (false, false, false, true),
    }
}

/// A ring configuration for `rule`: the first tape is given, a second tape
/// (two-tape rule only) is i.i.d. Bernoulli(1/2).
fn with_second_tape<R: Rng + ?Sized>(
    rule: Rule,
    first: Configuration,
    rng: &mut R,
) -> Result<Configuration, ExperimentError> {
    if rule.tapes() == 1 {
        return Ok(first);
    }
    let second: Vec<Symbol> = (0..first.len()).map(|_| bernoulli(rng, 0.5)).collect();
    Ok(Configuration::two_tape(first.topology().clone(), first.symbols(), &second)?)
}

/// Fraction of Bernoulli(`p`) rings (density exactly 1/2 redrawn) that the
/// rule drives to the uniform configuration of their majority symbol.
pub fn estimate_q(spec: &QSpec) -> Result<QEstimate, ExperimentError> {
    if spec.samples == 0 {
        return Err(ExperimentError::Invalid("samples must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(ExperimentError::Invalid(format!("p = {} is outside [0, 1]", spec.p)));
    }
    let topo = Arc::new(Topology::ring(spec.n)?);
    let prepared = Prepared::new(spec.rule, topo.clone())?;
    let budget = spec.budget();
    let options = RunOptions::new(budget).kernel(spec.kernel);
    let results = replicas(spec.samples, |r| -> Result<(RunRecord, u64), ExperimentError> {
        let mut rng = replica_rng(spec.master_seed, r);
        let mut ties = 0u64;
        let first = loop {
            let c = Configuration::sample_bernoulli(topo.clone(), spec.p, &mut rng)?;
            if 2 * c.density().ones != spec.n {
                break c;
            }
            ties += 1;
            if ties > 10_000 {
                return Err(ExperimentError::Invalid("could not draw a configuration without a tie".into()));
            }
        };
        let ones = first.density().ones;
        let majority = (2 * ones > spec.n) as Symbol;
        let config = with_second_tape(spec.rule, first, &mut rng)?;
        let t = run_prepared(&prepared, &config, options, &mut rng)?;
        let good = t.verdict.symbol() == Some(majority);
        Ok((
            RunRecord {
                replica: r,
                ones,
                verdict: t.verdict,
                steps: t.steps,
                good,
            },
            ties,
        ))
    });
    let mut est = QEstimate {
        rule: spec.rule.name(),
        n: spec.n,
        p: spec.p,
        samples: spec.samples,
        budget,
        good: 0,
        wrong: 0,
        budget_exhausted: 0,
        stuck: 0,
        ties_resampled: 0,
        mean_steps: 0.0,
        runs: None,
    };
    let mut runs = Vec::with_capacity(results.len());
    let mut total_steps = 0u64;
    for res in results {
        let (rec, ties) = res?;
        let majority = (2 * rec.ones > spec.n) as Symbol;
        let (g, w, b, s) = tally(rec.verdict, majority);
        est.good += g as u64;
        est.wrong += w as u64;
        est.budget_exhausted += b as u64;
        est.stuck += s as u64;
        est.ties_resampled += ties;
        total_steps += rec.steps as u64;
        runs.push(rec);
    }
    est.mean_steps = total_steps as f64 / spec.samples as f64;
    if spec.keep_runs {
        est.runs = Some(runs);
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrSpec {
    pub rule: Rule,
    pub n: usize,
    pub samples_per_k: u64,
    /// Ones counts to sample; all of `0..=n` by default.
    pub ks: Option<Vec<usize>>,
    /// Defaults to `2n`.
    pub max_steps: Option<usize>,
    pub master_seed: u64,
    pub kernel: Kernel,
}

impl ErrSpec {
    pub fn new(rule: Rule, n: usize, samples_per_k: u64, master_seed: u64) -> Self {
        ErrSpec {
            rule,
            n,
            samples_per_k,
            ks: None,
            max_steps: None,
            master_seed,
            kernel: Kernel::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrPoint {
    pub k: usize,
    pub density: f64,
    pub samples: u64,
    /// Runs not ending on the majority symbol (budget exhaustion included).
    pub errors: u64,
    pub budget_exhausted: u64,
}

impl ErrPoint {
    pub fn err(&self) -> Proportion {
        Proportion::new(self.errors, self.samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrCurve {
    pub rule: &'static str,
    pub n: usize,
    pub budget: usize,
    pub samples_per_k: u64,
    pub points: Vec<ErrPoint>,
}

impl ErrCurve {
    pub fn point(&self, k: usize) -> Option<&ErrPoint> {
        self.points.iter().find(|p| p.k == k)
    }

    /// Mean of `k/n` weighted by `err(k/n)`.
    pub fn centre(&self) -> f64 {
        let total: f64 = self.points.iter().map(|p| p.err().estimate()).sum();
        let weighted: f64 = self.points.iter().map(|p| p.err().estimate() * p.density).sum();
        weighted / total
    }
}

/// Error rate at each exact ones count `k`: initial rings are uniform among
/// those with exactly `k` ones. Replica `k * samples_per_k + s` serves sample
/// `s` of count `k`. With `n` even the tie `k = n/2` has no correct answer
/// and is skipped.
pub fn estimate_err_curve(spec: &ErrSpec) -> Result<ErrCurve, ExperimentError> {
    let n = spec.n;
    let ks: Vec<usize> = match &spec.ks {
        Some(ks) => ks.clone(),
        None => (0..=n).collect(),
    };
    if let Some(&k) = ks.iter().find(|&&k| k > n) {
        return Err(ExperimentError::Invalid(format!("ones count {k} exceeds ring length {n}")));
    }
    let ks: Vec<usize> = ks.into_iter().filter(|&k| 2 * k != n).collect();
    let topo = Arc::new(Topology::ring(n)?);
    let prepared = Prepared::new(spec.rule, topo.clone())?;
    let budget = spec.max_steps.unwrap_or(2 * n);
    let options = RunOptions::new(budget).kernel(spec.kernel);
    let s = spec.samples_per_k;
    let mut points = Vec::with_capacity(ks.len());
    for &k in &ks {
        let majority = (2 * k > n) as Symbol;
        let outcomes = replicas(s, |i| -> Result<(bool, bool), ExperimentError> {
            let mut rng = replica_rng(spec.master_seed, k as u64 * s + i);
            let first = Configuration::with_exact_ones(topo.clone(), k, &mut rng)?;
            let config = with_second_tape(spec.rule, first, &mut rng)?;
            let t = run_prepared(&prepared, &config, options, &mut rng)?;
            Ok((
                t.verdict.symbol() != Some(majority),
                t.verdict == Verdict::StepBudgetExhausted,
            ))
        });
        let mut point = ErrPoint {
            k,
            density: k as f64 / n as f64,
            samples: s,
            errors: 0,
            budget_exhausted: 0,
        };
        for o in outcomes {
            let (err, budget_out) = o?;
            point.errors += err as u64;
            point.budget_exhausted += budget_out as u64;
        }
        points.push(point);
    }
    Ok(ErrCurve {
        rule: spec.rule.name(),
        n,
        budget,
        samples_per_k: s,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EAggregate {
    pub n: usize,
    pub p: f64,
    pub e: f64,
    pub std_err: f64,
    /// Binomial mass of the skipped tie `k = n/2` (0 for odd `n`).
    pub tie_mass: f64,
}

/// `E(n) = sum_k err(k/n) P(Binomial(n, p) = k)`, renormalised over the
/// non-tie counts so that it matches `1 - Q(n)` with ties redrawn.
pub fn aggregate_e(curve: &ErrCurve, p: f64) -> Result<EAggregate, ExperimentError> {
    let n = curve.n;
    let pmf = binomial_pmf(n, p);
    let tie_mass = if n.is_multiple_of(2) { pmf[n / 2] } else { 0.0 };
    let mut e = 0.0;
    let mut var = 0.0;
    for (k, &w) in pmf.iter().enumerate() {
        if 2 * k == n {
            continue;
        }
        let point = curve
            .point(k)
            .ok_or_else(|| ExperimentError::Invalid(format!("error table has no entry for k = {k}")))?;
        let err = point.err();
        e += w * err.estimate();
        var += w * w * err.estimate() * (1.0 - err.estimate()) / err.trials as f64;
    }
    let scale = 1.0 - tie_mass;
    Ok(EAggregate {
        n,
        p,
        e: e / scale,
        std_err: var.sqrt() / scale,
        tie_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ControlReport {
    pub runs: u64,
    pub reached_uniform: u64,
    pub budget_exhausted: u64,
    pub stuck: u64,
}

/// Maj5 on a `size x size` torus from Bernoulli(`p`) with a 2x2 block of 1s
/// and a 2x2 block of 0s planted; both blocks are fixed, so no run may end
/// uniform.
pub fn maj5_negative_control(
    size: usize,
    p: f64,
    samples: u64,
    max_steps: usize,
    master_seed: u64,
) -> Result<ControlReport, ExperimentError> {
    if size < 4 {
        return Err(ExperimentError::Invalid("maj5 control needs a torus of side at least 4".into()));
    }
    let topo = Arc::new(Topology::torus(size, size)?);
    let prepared = Prepared::new(Rule::Maj5, topo.clone())?;
    let half = size / 2;
    let outcomes = replicas(samples, |r| -> Result<Verdict, ExperimentError> {
        let mut rng = replica_rng(master_seed, r);
        let c = Configuration::sample_bernoulli(topo.clone(), p, &mut rng)?;
        let mut symbols = c.symbols().to_vec();
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            symbols[dj * size + di] = 1;
            symbols[(half + dj) * size + half + di] = 0;
        }
        let c = Configuration::new(topo.clone(), symbols)?;
        Ok(run_prepared(&prepared, &c, RunOptions::new(max_steps), &mut rng)?.verdict)
    });
    let mut report = ControlReport {
        runs: samples,
        reached_uniform: 0,
        budget_exhausted: 0,
        stuck: 0,
    };
    for v in outcomes {
        match v? {
            v if v.symbol().is_some() => report.reached_uniform += 1,
            Verdict::StepBudgetExhausted => report.budget_exhausted += 1,
            _ => report.stuck += 1,
        }
    }
    Ok(report)
}

/// `Q` of the identity rule on mixed rings; every run is stuck.
pub fn identity_control(n: usize, p: f64, samples: u64, master_seed: u64) -> Result<QEstimate, ExperimentError> {
    estimate_q(&QSpec::new(Rule::Identity, n, p, samples, master_seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_never_classifies() {
        let q = identity_control(21, 0.5, 50, 3).unwrap();
        assert_eq!(q.good, 0);
        assert_eq!(q.stuck, 50);
    }

    #[test]
    fn ties_are_redrawn() {
        let q = estimate_q(&QSpec::new(Rule::Gkl, 4, 0.5, 200, 1)).unwrap();
        assert!(q.ties_resampled > 0);
        assert_eq!(q.good + q.wrong + q.budget_exhausted + q.stuck, 200);
    }

    #[test]
    fn extremes_of_err_curve() {
        let mut spec = ErrSpec::new(Rule::Gkl, 15, 20, 5);
        spec.ks = Some(vec![0, 15]);
        let curve = estimate_err_curve(&spec).unwrap();
        assert!(curve.points.iter().all(|p| p.errors == 0));
    }

    #[test]
    fn e_of_constant_curves() {
        let n = 9;
        for errs in [0u64, 10] {
            let curve = ErrCurve {
                rule: "x",
                n,
                budget: 0,
                samples_per_k: 10,
                points: (0..=n)
                    .map(|k| ErrPoint {
                        k,
                        density: k as f64 / n as f64,
                        samples: 10,
                        errors: errs,
                        budget_exhausted: 0,
                    })
                    .collect(),
            };
            let e = aggregate_e(&curve, 0.3).unwrap();
            assert!((e.e - errs as f64 / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn incomplete_table_rejected() {
        let mut spec = ErrSpec::new(Rule::Gkl, 9, 2, 5);
        spec.ks = Some(vec![0, 1]);
        let curve = estimate_err_curve(&spec).unwrap();
        assert!(aggregate_e(&curve, 0.4).is_err());
    }
}
