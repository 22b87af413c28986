//! Convergence of the classifying dynamics on tori, trees, the two-tape ring
//! and lifted products.

use std::sync::Arc;

use serde::Serialize;

use super::{replicas, ExperimentError};
use crate::analysis::tree_law::h_iterate;
use crate::configuration::{bernoulli, Configuration, Symbol};
use crate::engine::{run_async_prepared, run_prepared, Kernel, Prepared, RunOptions, SyncStepper, Verdict};
use crate::rules::Rule;
use crate::seeding::replica_rng;
use crate::topology::{BoundaryPolicy, Topology, TreeFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConvergenceKind {
    Toom { width: usize, height: usize },
    ToomIps { width: usize, height: usize },
    LiftedToom { width: usize, height: usize, layers: usize },
    /// Majority on `{a, ab, ab^-1}` over the free group on two generators.
    Tree4 { depth: usize },
    /// Majority on `{ab, ac, acbc}` over three involutions.
    Tree3 { depth: usize },
    TwoTape { n: usize },
}

impl ConvergenceKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConvergenceKind::Toom { .. } => "toom",
            ConvergenceKind::ToomIps { .. } => "toom_ips",
            ConvergenceKind::LiftedToom { .. } => "lifted_toom",
            ConvergenceKind::Tree4 { .. } => "tree4",
            ConvergenceKind::Tree3 { .. } => "tree3",
            ConvergenceKind::TwoTape { .. } => "two_tape",
        }
    }

    pub fn rule(&self) -> Rule {
        match self {
            ConvergenceKind::Toom { .. } | ConvergenceKind::LiftedToom { .. } => Rule::Toom,
            ConvergenceKind::ToomIps { .. } => Rule::ToomIps,
            ConvergenceKind::Tree4 { .. } => Rule::Tree4,
            ConvergenceKind::Tree3 { .. } => Rule::Tree3,
            ConvergenceKind::TwoTape { .. } => Rule::TwoTape,
        }
    }

    /// Steps (or time units) allowed when none are given: `50 (w + h)` on
    /// tori, `2n` on the two-tape ring, and for trees the number of steps
    /// whose root value cannot see the frozen boundary.
    pub fn default_budget(&self) -> usize {
        match *self {
            ConvergenceKind::Toom { width, height }
            | ConvergenceKind::ToomIps { width, height }
            | ConvergenceKind::LiftedToom { width, height, .. } => 50 * (width + height),
            ConvergenceKind::TwoTape { n } => 2 * n,
            ConvergenceKind::Tree4 { .. } | ConvergenceKind::Tree3 { .. } => self.horizon().unwrap_or(0),
        }
    }

    /// Steps after which the root of a truncated tree first depends on the
    /// boundary.
    pub fn horizon(&self) -> Option<usize> {
        match *self {
            ConvergenceKind::Tree4 { depth } => Some(depth / 2),
            ConvergenceKind::Tree3 { depth } => Some(depth / 4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub kind: ConvergenceKind,
    pub p: f64,
    pub samples: u64,
    pub max_steps: Option<usize>,
    pub master_seed: u64,
}

impl ConvergenceSpec {
    pub fn new(kind: ConvergenceKind, p: f64, samples: u64, master_seed: u64) -> Self {
        ConvergenceSpec {
            kind,
            p,
            samples,
            max_steps: None,
            master_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootRow {
    pub t: usize,
    pub ones: u64,
    pub samples: u64,
    /// `h^t(p)`.
    pub exact: f64,
}

impl RootRow {
    pub fn frequency(&self) -> f64 {
        self.ones as f64 / self.samples as f64
    }

    /// Distance from `exact` in binomial standard deviations.
    pub fn z_score(&self) -> f64 {
        let sd = (self.exact * (1.0 - self.exact) / self.samples as f64).sqrt();
        let d = (self.frequency() - self.exact).abs();
        if sd > 0.0 {
            d / sd
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Lifted runs against per-layer runs from the same initial layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCheck {
    pub layers: usize,
    pub comparisons: u64,
    pub mismatches: u64,
    pub first_mismatch: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub kind: ConvergenceKind,
    pub rule: &'static str,
    pub p: f64,
    pub samples: u64,
    pub budget: usize,
    /// Runs (layers, for lifted runs) absorbed on the expected symbol.
    pub reached_target: u64,
    pub reached_other: u64,
    pub budget_exhausted: u64,
    pub stuck: u64,
    pub runs: u64,
    pub mean_steps: f64,
    pub root_rows: Vec<RootRow>,
    pub horizon: Option<usize>,
    pub layers: Option<LayerCheck>,
}

impl ConvergenceReport {
    pub fn success_fraction(&self) -> f64 {
        self.reached_target as f64 / self.runs as f64
    }
}

struct Outcome {
    verdicts: Vec<(Verdict, Symbol)>,
    steps: usize,
    roots: Vec<Symbol>,
    mismatch: Option<String>,
    comparisons: u64,
}

impl Outcome {
    fn single(verdict: Verdict, target: Symbol, steps: usize) -> Self {
        Outcome {
            verdicts: vec![(verdict, target)],
            steps,
            roots: Vec::new(),
            mismatch: None,
            comparisons: 0,
        }
    }
}

fn p_target(p: f64) -> Result<Symbol, ExperimentError> {
    if p == 0.5 {
        return Err(ExperimentError::Invalid("p = 1/2 has no majority to converge to".into()));
    }
    Ok((p > 0.5) as Symbol)
}

/// Runs `samples` replicas of one of the convergence settings.
///
/// Tori count runs absorbed on the `p`-majority symbol. The two-tape ring
/// counts runs whose second tape settles on the majority symbol of the
/// first tape. Trees record the root after each of `1..=budget` steps
/// against `h^t(p)`. Lifted Toom also replays every layer on its own and
/// requires the same absorbing symbol at the same step.
pub fn convergence_experiment(spec: &ConvergenceSpec) -> Result<ConvergenceReport, ExperimentError> {
    let kind = spec.kind;
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(ExperimentError::Invalid(format!("p = {} is outside [0, 1]", spec.p)));
    }
    if spec.samples == 0 {
        return Err(ExperimentError::Invalid("samples must be positive".into()));
    }
    let budget = spec.max_steps.unwrap_or_else(|| kind.default_budget());
    let p = spec.p;
    let seed = spec.master_seed;
    let outcomes: Vec<Result<Outcome, ExperimentError>> = match kind {
        ConvergenceKind::Toom { width, height } | ConvergenceKind::ToomIps { width, height } => {
            let target = p_target(p)?;
            let topo = Arc::new(Topology::torus(width, height)?);
            let prepared = Prepared::new(kind.rule(), topo.clone())?;
            replicas(spec.samples, |r| {
                let mut rng = replica_rng(seed, r);
                let c = Configuration::sample_bernoulli(topo.clone(), p, &mut rng)?;
                if kind.rule() == Rule::Toom {
                    let t = run_prepared(&prepared, &c, RunOptions::new(budget), &mut rng)?;
                    Ok(Outcome::single(t.verdict, target, t.steps))
                } else {
                    let run = run_async_prepared(&prepared, &c, budget, &mut rng, |_, _| true)?;
                    Ok(Outcome::single(run.verdict, target, run.time_units))
                }
            })
        }
        ConvergenceKind::LiftedToom { width, height, layers } => {
            let target = p_target(p)?;
            let base = Topology::torus(width, height)?;
            let base_topo = Arc::new(base.clone());
            let lifted = Arc::new(Topology::lift_to_product(base, layers)?);
            let base_prepared = Prepared::new(Rule::Toom, base_topo.clone())?;
            let lifted_prepared = Prepared::new(Rule::Toom, lifted.clone())?;
            replicas(spec.samples, |r| {
                let mut rng = replica_rng(seed, r);
                let c = Configuration::sample_bernoulli(lifted.clone(), p, &mut rng)?;
                lifted_run(&c, &base_prepared, &lifted_prepared, budget, target)
            })
        }
        ConvergenceKind::Tree4 { depth } | ConvergenceKind::Tree3 { depth } => {
            let family = if matches!(kind, ConvergenceKind::Tree4 { .. }) {
                TreeFamily::free(4)?
            } else {
                TreeFamily::involutions(3)?
            };
            let topo = Arc::new(Topology::tree(family, depth, BoundaryPolicy::IidBernoulli(p))?);
            let prepared = Prepared::new(kind.rule(), topo.clone())?;
            replicas(spec.samples, |r| {
                let mut rng = replica_rng(seed, r);
                let c = Configuration::sample_bernoulli(topo.clone(), p, &mut rng)?;
                let mut stepper = SyncStepper::from_prepared(&prepared, &c, Kernel::Dense, &mut rng)?;
                let mut roots = Vec::with_capacity(budget);
                for _ in 0..budget {
                    stepper.step(&mut rng);
                    roots.push(stepper.symbol(0));
                }
                Ok(Outcome {
                    verdicts: Vec::new(),
                    steps: budget,
                    roots,
                    mismatch: None,
                    comparisons: 0,
                })
            })
        }
        ConvergenceKind::TwoTape { n } => {
            let topo = Arc::new(Topology::ring(n)?);
            let prepared = Prepared::new(Rule::TwoTape, topo.clone())?;
            replicas(spec.samples, |r| {
                let mut rng = replica_rng(seed, r);
                let first: Vec<Symbol> = (0..n).map(|_| bernoulli(&mut rng, p)).collect();
                let second: Vec<Symbol> = (0..n).map(|_| bernoulli(&mut rng, 0.5)).collect();
                let ones = first.iter().filter(|&&s| s == 1).count();
                let target = (2 * ones > n) as Symbol;
                let c = Configuration::two_tape(topo.clone(), &first, &second)?;
                let t = run_prepared(&prepared, &c, RunOptions::new(budget), &mut rng)?;
                Ok(Outcome::single(t.verdict, target, t.steps))
            })
        }
    };
    let mut report = ConvergenceReport {
        kind,
        rule: kind.rule().name(),
        p,
        samples: spec.samples,
        budget,
        reached_target: 0,
        reached_other: 0,
        budget_exhausted: 0,
        stuck: 0,
        runs: 0,
        mean_steps: 0.0,
        root_rows: Vec::new(),
        horizon: kind.horizon(),
        layers: None,
    };
    let mut ones = vec![0u64; budget];
    let mut total_steps = 0u64;
    let mut layer_check = match kind {
        ConvergenceKind::LiftedToom { layers, .. } => Some(LayerCheck {
            layers,
            comparisons: 0,
            mismatches: 0,
            first_mismatch: None,
        }),
        _ => None,
    };
    for o in outcomes {
        let o = o?;
        total_steps += o.steps as u64;
        for (v, target) in o.verdicts {
            report.runs += 1;
            match v.symbol() {
                Some(s) if s == target => report.reached_target += 1,
                Some(_) => report.reached_other += 1,
                None if v == Verdict::StepBudgetExhausted => report.budget_exhausted += 1,
                None => report.stuck += 1,
            }
        }
        for (t, &s) in o.roots.iter().enumerate() {
            ones[t] += s as u64;
        }
        if let Some(check) = layer_check.as_mut() {
            check.comparisons += o.comparisons;
            if let Some(m) = o.mismatch {
                check.mismatches += 1;
                check.first_mismatch.get_or_insert(m);
            }
        }
    }
    report.mean_steps = total_steps as f64 / spec.samples as f64;
    if kind.horizon().is_some() {
        report.runs = spec.samples;
        report.root_rows = ones
            .iter()
            .enumerate()
            .map(|(t, &o)| RootRow {
                t: t + 1,
                ones: o,
                samples: spec.samples,
                exact: h_iterate(p, t + 1),
            })
            .collect();
    }
    report.layers = layer_check;
    Ok(report)
}

/// Steps the lifted configuration, noting when each layer first becomes
/// uniform, and compares with independent runs of each layer.
fn lifted_run(
    c: &Configuration,
    base: &Prepared,
    lifted: &Prepared,
    budget: usize,
    target: Symbol,
) -> Result<Outcome, ExperimentError> {
    let topo = c.topology();
    let size = topo.layer_size();
    let layers = topo.layer_count();
    // Toom draws no randomness; the stream only has to exist
    let mut rng = replica_rng(0, 0);
    let uniform = |s: &[Symbol]| s.iter().all(|&v| v == s[0]).then_some(s[0]);
    let mut stepper = SyncStepper::from_prepared(lifted, c, Kernel::Dense, &mut rng)?;
    let mut absorbed: Vec<Option<(Symbol, usize)>> = (0..layers)
        .map(|l| uniform(&c.symbols()[l * size..(l + 1) * size]).map(|s| (s, 0)))
        .collect();
    while stepper.steps() < budget && absorbed.iter().any(Option::is_none) {
        stepper.step(&mut rng);
        let symbols = stepper.symbols();
        for (l, slot) in absorbed.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = uniform(&symbols[l * size..(l + 1) * size]).map(|s| (s, stepper.steps()));
            }
        }
    }
    let mut verdicts = Vec::with_capacity(layers);
    let mut mismatch = None;
    for (l, lifted_outcome) in absorbed.iter().enumerate() {
        let layer = Configuration::new(base.topology().clone(), c.symbols()[l * size..(l + 1) * size].to_vec())?;
        let t = run_prepared(base, &layer, RunOptions::new(budget), &mut rng)?;
        let alone = t.verdict.symbol().map(|s| (s, t.steps));
        if alone != *lifted_outcome && mismatch.is_none() {
            mismatch = Some(format!(
                "layer {l}: lifted run gives {lifted_outcome:?}, layer alone gives {alone:?}"
            ));
        }
        verdicts.push((t.verdict, target));
    }
    Ok(Outcome {
        verdicts,
        steps: stepper.steps(),
        roots: Vec::new(),
        mismatch,
        comparisons: layers as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toom_small_torus_converges() {
        let spec = ConvergenceSpec::new(ConvergenceKind::Toom { width: 16, height: 16 }, 0.8, 20, 1);
        let r = convergence_experiment(&spec).unwrap();
        assert_eq!(r.reached_target, 20);
    }

    #[test]
    fn half_rejected_on_tori() {
        let spec = ConvergenceSpec::new(ConvergenceKind::Toom { width: 4, height: 4 }, 0.5, 2, 1);
        assert!(convergence_experiment(&spec).is_err());
    }

    #[test]
    fn tree_rows_follow_recursion_shape() {
        let spec = ConvergenceSpec::new(ConvergenceKind::Tree4 { depth: 4 }, 0.5, 50, 2);
        let r = convergence_experiment(&spec).unwrap();
        assert_eq!(r.root_rows.len(), 2);
        assert_eq!(r.root_rows[1].exact, 0.5);
    }

    #[test]
    fn lifted_layers_agree() {
        let kind = ConvergenceKind::LiftedToom {
            width: 8,
            height: 8,
            layers: 3,
        };
        let r = convergence_experiment(&ConvergenceSpec::new(kind, 0.6, 5, 3)).unwrap();
        let check = r.layers.unwrap();
        assert_eq!(check.comparisons, 15);
        assert_eq!(check.mismatches, 0, "{:?}", check.first_mismatch);
    }
}
