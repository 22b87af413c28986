use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use densilab::engine::{Kernel, Raster, SyncStepper};
use densilab::experiments::{
    aggregate_e, convergence_experiment, estimate_err_curve, estimate_q, invariance_suite, maj5_negative_control,
    ConvergenceSpec, ErrSpec, ExperimentError, ExperimentReport, QEstimate, QSpec, ReportMeta, ReportRow, SuiteOptions,
    SuiteReport,
};
use densilab::seeding::replica_rng;
use densilab::{Configuration, Rule, Symbol, Topology};

use crate::config::{self, ExperimentKind, Plan, Target};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Invariant(m) => write!(f, "invariant failure: {m}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(_)
            | ExperimentError::Rule(_)
            | ExperimentError::Topology(_)
            | ExperimentError::Config(_) => CliError::Validation(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub struct RunArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Runs one configured experiment and writes `report.json`, `report.csv` and
/// optionally `raster.pbm` to the output directory. Returns the written paths.
pub fn run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let text = read(&args.config)?;
    let cfg = config::parse(&text).map_err(CliError::Validation)?;
    let plan = cfg
        .validate(args.seed, args.samples, args.out.clone())
        .map_err(CliError::Validation)?;
    let started = Instant::now();
    let mut report = build_report(&plan)?;
    report.meta = Some(ReportMeta {
        generated_at: chrono::Utc::now().to_rfc3339(),
        elapsed_ms: started.elapsed().as_millis() as u64,
    });
    let raster = match (plan.raster_steps, plan.target) {
        (Some(steps), Target::Ring { n }) => {
            let p = plan.ps.first().copied().unwrap_or(0.5);
            Some(ring_raster(plan.rule, n, p, steps, plan.master_seed, plan.kernel)?)
        }
        _ => None,
    };
    fs::create_dir_all(&plan.output_dir).map_err(|e| CliError::Io(format!("{}: {e}", plan.output_dir.display())))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Invariant(e.to_string()))?;
    let mut written = vec![plan.output_dir.join("report.json"), plan.output_dir.join("report.csv")];
    write(&written[0], &(json + "\n"))?;
    write(&written[1], &report.to_csv())?;
    if let Some(r) = raster {
        let path = plan.output_dir.join("raster.pbm");
        write(&path, &r.to_pbm())?;
        written.push(path);
    }
    Ok(written)
}

/// The report without its wall-clock metadata.
pub fn build_report(plan: &Plan) -> Result<ExperimentReport, CliError> {
    let name = match plan.kind {
        ExperimentKind::Q => "q",
        ExperimentKind::Err => "err",
        ExperimentKind::Convergence => "convergence",
        ExperimentKind::Control => "control",
    };
    let mut report = ExperimentReport::new(name, plan.rule.name(), plan.rule.parameters(), plan.master_seed);
    report.topology = Some(plan.topology.clone());
    match (plan.kind, plan.target) {
        (ExperimentKind::Q, Target::Ring { n }) | (ExperimentKind::Control, Target::Ring { n }) => {
            for &p in &plan.ps {
                let mut spec = QSpec::new(plan.rule, n, p, plan.samples, plan.master_seed);
                spec.max_steps = plan.max_steps;
                spec.kernel = plan.kernel;
                let q = estimate_q(&spec)?;
                if plan.kind == ExperimentKind::Control && q.good != 0 {
                    return Err(CliError::Invariant(format!(
                        "identity control classified {} of {} rings at p = {p}",
                        q.good, q.samples
                    )));
                }
                report.rows.push(ReportRow::from_q(&q));
            }
            report.notes.push(format!("budget={}", plan.max_steps.unwrap_or(2 * n)));
        }
        (ExperimentKind::Err, Target::Ring { n }) => {
            let mut spec = ErrSpec::new(plan.rule, n, plan.samples, plan.master_seed);
            spec.max_steps = plan.max_steps;
            spec.kernel = plan.kernel;
            let curve = estimate_err_curve(&spec)?;
            report.rows.extend(ReportRow::from_err(&curve));
            report.notes.push(format!("budget={}", curve.budget));
            for &p in &plan.ps {
                let e = aggregate_e(&curve, p)?;
                report
                    .notes
                    .push(format!("E(p={p})={} std_err={} tie_mass={}", e.e, e.std_err, e.tie_mass));
            }
        }
        (ExperimentKind::Convergence, Target::Convergence(kind)) => {
            let mut spec = ConvergenceSpec::new(kind, plan.ps[0], plan.samples, plan.master_seed);
            spec.max_steps = plan.max_steps;
            let r = convergence_experiment(&spec)?;
            report.rows.extend(ReportRow::from_convergence(&r));
            report.notes.push(format!(
                "budget={} reached_other={} stuck={} mean_steps={}",
                r.budget, r.reached_other, r.stuck, r.mean_steps
            ));
            if let Some(h) = r.horizon {
                report.notes.push(format!("horizon={h}"));
            }
            if let Some(l) = &r.layers {
                report.notes.push(format!(
                    "layers={} comparisons={} mismatches={}",
                    l.layers, l.comparisons, l.mismatches
                ));
                if l.mismatches > 0 {
                    return Err(CliError::Invariant(format!(
                        "lifted layers disagree with the base torus: {}",
                        l.first_mismatch.clone().unwrap_or_default()
                    )));
                }
            }
        }
        (ExperimentKind::Control, Target::Maj5 { size }) => {
            let budget = plan.max_steps.unwrap_or(50 * size);
            let c = maj5_negative_control(size, plan.ps[0], plan.samples, budget, plan.master_seed)?;
            report.notes.push(format!(
                "budget={budget} reached_uniform={} budget_exhausted={} stuck={}",
                c.reached_uniform, c.budget_exhausted, c.stuck
            ));
            let mut row = ReportRow::from_q(&QEstimate {
                rule: plan.rule.name(),
                n: size * size,
                p: plan.ps[0],
                samples: c.runs,
                budget,
                good: c.reached_uniform,
                wrong: 0,
                budget_exhausted: c.budget_exhausted,
                stuck: c.stuck,
                ties_resampled: 0,
                mean_steps: 0.0,
                runs: None,
            });
            row.experiment = "control".into();
            row.topology = "torus".into();
            report.rows.push(row);
            if c.reached_uniform != 0 {
                return Err(CliError::Invariant(format!(
                    "maj5 reached a uniform configuration in {} of {} runs",
                    c.reached_uniform, c.runs
                )));
            }
        }
        _ => return Err(CliError::Validation("experiment and topology do not match".into())),
    }
    Ok(report)
}

/// Space-time diagram of a Bernoulli(`p`) ring drawn from replica 0 of `seed`:
/// `steps + 1` rows of `n` cells. Two-tape rings stack the second tape below
/// the first.
pub fn ring_raster(rule: Rule, n: usize, p: f64, steps: usize, seed: u64, kernel: Kernel) -> Result<Raster, CliError> {
    let topo = Arc::new(Topology::ring(n).map_err(|e| CliError::Validation(format!("n: {e}")))?);
    let mut rng = replica_rng(seed, 0);
    let start = if rule.tapes() == 2 {
        Configuration::sample_two_tape(topo, p, 0.5, &mut rng)
    } else {
        Configuration::sample_bernoulli(topo, p, &mut rng)
    }
    .map_err(|e| CliError::Validation(format!("p: {e}")))?;
    let mut stepper =
        SyncStepper::new(rule, &start, kernel, &mut rng).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut snaps: Vec<Vec<Symbol>> = vec![stepper.symbols()];
    for _ in 0..steps {
        stepper.step(&mut rng);
        snaps.push(stepper.symbols());
    }
    let tape = |k: usize| {
        let rows = snaps.iter().map(|s| s.iter().map(|&x| (x >> k) & 1).collect()).collect();
        Raster::new(n, rows).map_err(|e| CliError::Invariant(e.to_string()))
    };
    let first = tape(0)?;
    if rule.tapes() == 2 {
        Ok(first.stack(&tape(1)?).expect("tapes share a width"))
    } else {
        Ok(first)
    }
}

pub struct DiagramArgs {
    pub rule: String,
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    pub p: f64,
    pub steps: usize,
    pub seed: u64,
    pub kernel: Kernel,
    pub out: Option<PathBuf>,
}

/// Writes the PBM to `out`, or returns it when there is none.
pub fn diagram(args: &DiagramArgs) -> Result<Option<String>, CliError> {
    let rule = Rule::from_name(&args.rule, &args.params).map_err(|e| CliError::Validation(e.to_string()))?;
    if !(0.0..=1.0).contains(&args.p) {
        return Err(CliError::Validation(format!("p: {} is not a probability", args.p)));
    }
    let pbm = ring_raster(rule, args.n, args.p, args.steps, args.seed, args.kernel)?.to_pbm();
    match &args.out {
        Some(path) => write(path, &pbm).map(|_| None),
        None => Ok(Some(pbm)),
    }
}

pub struct SuiteArgs {
    pub traf_code: u8,
    pub rule: Option<String>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn suite(args: &SuiteArgs) -> Result<SuiteReport, CliError> {
    let only = match &args.rule {
        Some(name) => {
            Some(Rule::from_name(name, &BTreeMap::new()).map_err(|e| CliError::Validation(format!("rule: {e}")))?)
        }
        None => None,
    };
    let opts = SuiteOptions {
        traf_code: args.traf_code,
        seed: args.seed,
        only,
        ..SuiteOptions::default()
    };
    let report = invariance_suite(&opts)?;
    if let Some(path) = &args.out {
        write(path, &report.ledger())?;
    }
    Ok(report)
}
