//! Flat experiment reports and their CSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{ConvergenceReport, ErrCurve, QEstimate};
use crate::stats::Proportion;
use crate::topology::TopologySpec;

pub const CSV_MAGIC: &str = "# densilab-csv v1";

pub const CSV_HEADER: &str = "experiment,rule,topology,cells,p,k,t,samples,successes,estimate,ci_low,ci_high,budget_exhausted,ties,reference";

/// One estimated proportion. Unused coordinates (`p` for a fixed-`k` error
/// point, `t` outside tree rows) are left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub rule: String,
    pub topology: String,
    pub cells: usize,
    pub p: Option<f64>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub samples: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub budget_exhausted: u64,
    pub ties: u64,
    pub reference: Option<f64>,
}

impl ReportRow {
    fn proportion(experiment: &str, rule: &str, topology: &str, cells: usize, q: Proportion) -> Self {
        let (lo, hi) = q.wilson95();
        ReportRow {
            experiment: experiment.to_string(),
            rule: rule.to_string(),
            topology: topology.to_string(),
            cells,
            p: None,
            k: None,
            t: None,
            samples: q.trials,
            successes: q.successes,
            estimate: q.estimate(),
            ci_low: lo,
            ci_high: hi,
            budget_exhausted: 0,
            ties: 0,
            reference: None,
        }
    }

    pub fn from_q(q: &QEstimate) -> Self {
        let mut row = Self::proportion("q", q.rule, "ring", q.n, q.q());
        row.p = Some(q.p);
        row.budget_exhausted = q.budget_exhausted;
        row.ties = q.ties_resampled;
        row
    }

    /// One row per `k`, successes counting wrong classifications.
    pub fn from_err(curve: &ErrCurve) -> Vec<Self> {
        curve
            .points
            .iter()
            .map(|pt| {
                let mut row = Self::proportion("err", curve.rule, "ring", curve.n, pt.err());
                row.k = Some(pt.k);
                row.budget_exhausted = pt.budget_exhausted;
                row
            })
            .collect()
    }

    /// The absorption row, then one row per recorded root time with
    /// `h^t(p)` as reference.
    pub fn from_convergence(r: &ConvergenceReport) -> Vec<Self> {
        let topology = match r.kind {
            super::ConvergenceKind::Toom { .. } | super::ConvergenceKind::ToomIps { .. } => "torus",
            super::ConvergenceKind::LiftedToom { .. } => "product",
            super::ConvergenceKind::Tree4 { .. } | super::ConvergenceKind::Tree3 { .. } => "tree",
            super::ConvergenceKind::TwoTape { .. } => "ring",
        };
        let cells = match r.kind {
            super::ConvergenceKind::Toom { width, height } | super::ConvergenceKind::ToomIps { width, height } => {
                width * height
            }
            super::ConvergenceKind::LiftedToom { width, height, layers } => width * height * layers,
            super::ConvergenceKind::Tree4 { depth } => 2 * 3usize.pow(depth as u32) - 1,
            super::ConvergenceKind::Tree3 { depth } => 3 * 2usize.pow(depth as u32) - 2,
            super::ConvergenceKind::TwoTape { n } => n,
        };
        let mut rows = Vec::new();
        if r.root_rows.is_empty() {
            let mut row = Self::proportion(
                r.kind.name(),
                r.rule,
                topology,
                cells,
                Proportion::new(r.reached_target, r.runs),
            );
            row.p = Some(r.p);
            row.budget_exhausted = r.budget_exhausted;
            rows.push(row);
        }
        for root in &r.root_rows {
            let mut row = Self::proportion(
                r.kind.name(),
                r.rule,
                topology,
                cells,
                Proportion::new(root.ones, root.samples),
            );
            row.p = Some(r.p);
            row.t = Some(root.t);
            row.reference = Some(root.exact);
            rows.push(row);
        }
        rows
    }

    fn csv_line(&self) -> String {
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.rule,
            self.topology,
            self.cells,
            opt_f(self.p),
            opt_u(self.k),
            opt_u(self.t),
            self.samples,
            self.successes,
            self.estimate,
            self.ci_low,
            self.ci_high,
            self.budget_exhausted,
            self.ties,
            opt_f(self.reference),
        )
    }
}

/// Wall-clock data, the only part of a report that differs between two runs
/// with the same seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportMeta {
    pub generated_at: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rule: String,
    pub parameters: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySpec>,
    pub master_seed: u64,
    pub seeding: String,
    pub interval: String,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<ReportMeta>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, rule: &str, parameters: BTreeMap<String, f64>, master_seed: u64) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            rule: rule.to_string(),
            parameters,
            topology: None,
            master_seed,
            seeding: "replica r draws from ChaCha8(key = master_seed LE || \"densilab\", stream = r)".to_string(),
            interval: "wilson 95%".to_string(),
            rows: Vec::new(),
            notes: Vec::new(),
            meta: None,
        }
    }

    /// Magic line, metadata comments, header and one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_MAGIC);
        out.push('\n');
        let _ = writeln!(out, "# experiment={} rule={} master_seed={}", self.experiment, self.rule, self.master_seed);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "# {k}={v}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "# {note}");
        }
        if let Some(meta) = &self.meta {
            let _ = writeln!(out, "# generated_at={} elapsed_ms={}", meta.generated_at, meta.elapsed_ms);
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }
}
