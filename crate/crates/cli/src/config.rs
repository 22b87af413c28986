//! Experiment configuration files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use densilab::engine::Kernel;
use densilab::experiments::ConvergenceKind;
use densilab::rules::RuleError;
use densilab::topology::{BoundarySpec, TopologySpec, TreeFamilyName};
use densilab::{Mode, Rule};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Quality `Q(n)` on rings, one row per `p`.
    Q,
    /// Error rate per exact density, with `E(n)` at each `p` given.
    Err,
    /// Convergence on tori, trees, lifted tori and the two-tape ring.
    Convergence,
    /// Maj5 with planted blocks, or the identity rule.
    Control,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub rule: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub topology: TopologySpec,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub p_grid: Option<Vec<f64>>,
    /// Per point; per ones count for `err`.
    pub samples: u64,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub kernel: Kernel,
    /// Also write `raster.pbm`, the space-time diagram of replica 0.
    #[serde(default)]
    pub raster_steps: Option<usize>,
}

/// A configuration that passed every check.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub rule: Rule,
    pub topology: TopologySpec,
    pub ps: Vec<f64>,
    pub samples: u64,
    pub max_steps: Option<usize>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub kernel: Kernel,
    pub raster_steps: Option<usize>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Ring { n: usize },
    Convergence(ConvergenceKind),
    Maj5 { size: usize },
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))
}

fn rule_error(e: RuleError) -> String {
    match e {
        RuleError::ParameterRange { key, .. } => format!("parameters.{key}: {e}"),
        RuleError::UnknownParameter { ref key, .. } => format!("parameters.{key}: {e}"),
        RuleError::UnknownRule(_) => format!("rule: {e}"),
        other => format!("topology: {other}"),
    }
}

impl ExperimentConfig {
    /// Checks everything that can be checked without running. `seed` and
    /// `samples` are command-line overrides.
    pub fn validate(&self, seed: Option<u64>, samples: Option<u64>, out: Option<PathBuf>) -> Result<Plan, String> {
        let rule = Rule::from_name(&self.rule, &self.parameters).map_err(rule_error)?;
        let ps = match (self.p, &self.p_grid) {
            (Some(_), Some(_)) => return Err("p_grid: give either p or p_grid, not both".into()),
            (Some(p), None) => vec![p],
            (None, Some(g)) if g.is_empty() => return Err("p_grid: empty".into()),
            (None, Some(g)) => g.clone(),
            (None, None) => Vec::new(),
        };
        for (i, &p) in ps.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                let key = if self.p.is_some() { "p".to_string() } else { format!("p_grid[{i}]") };
                return Err(format!("{key}: {p} is not a probability"));
            }
        }
        let samples = samples.unwrap_or(self.samples);
        if samples == 0 {
            return Err("samples: must be positive".into());
        }
        if self.max_steps == Some(0) {
            return Err("max_steps: must be positive".into());
        }
        let topo = self
            .topology
            .build(ps.first().copied().unwrap_or(0.5))
            .map_err(|e| format!("topology: {e}"))?;
        rule.check_topology(&topo).map_err(rule_error)?;
        let target = self.target(rule, &ps)?;
        if self.raster_steps.is_some() && !matches!(target, Target::Ring { .. }) {
            return Err("raster_steps: only ring experiments write rasters".into());
        }
        Ok(Plan {
            kind: self.experiment,
            rule,
            topology: self.topology.clone(),
            ps,
            samples,
            max_steps: self.max_steps,
            master_seed: seed.or(self.master_seed).unwrap_or(0),
            output_dir: out.or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from(".")),
            kernel: self.kernel,
            raster_steps: self.raster_steps,
            target,
        })
    }

    fn target(&self, rule: Rule, ps: &[f64]) -> Result<Target, String> {
        let single_p = || -> Result<f64, String> {
            match ps {
                [p] => Ok(*p),
                _ => Err("p: this experiment needs exactly one p".into()),
            }
        };
        match self.experiment {
            ExperimentKind::Q | ExperimentKind::Err => {
                let TopologySpec::Ring { n } = self.topology else {
                    return Err("topology: q and err experiments run on rings".into());
                };
                if rule.mode() == Mode::Ips {
                    return Err(format!("rule: {} has no synchronous ring dynamics", rule.name()));
                }
                if self.experiment == ExperimentKind::Q && ps.is_empty() {
                    return Err("p: q experiments need p or p_grid".into());
                }
                Ok(Target::Ring { n })
            }
            ExperimentKind::Convergence => {
                single_p()?;
                let kind = match (rule, &self.topology) {
                    (Rule::Toom, TopologySpec::Torus { width, height }) => ConvergenceKind::Toom {
                        width: *width,
                        height: *height,
                    },
                    (Rule::ToomIps, TopologySpec::Torus { width, height }) => ConvergenceKind::ToomIps {
                        width: *width,
                        height: *height,
                    },
                    (Rule::Toom, TopologySpec::Product { base, layers }) => match **base {
                        TopologySpec::Torus { width, height } => ConvergenceKind::LiftedToom {
                            width,
                            height,
                            layers: *layers,
                        },
                        _ => return Err("topology.base: lifted Toom needs a torus base".into()),
                    },
                    (
                        Rule::Tree4,
                        TopologySpec::Tree {
                            family: TreeFamilyName::Free,
                            degree: 4,
                            depth,
                            boundary: BoundarySpec::Iid,
                        },
                    ) => ConvergenceKind::Tree4 { depth: *depth },
                    (
                        Rule::Tree3,
                        TopologySpec::Tree {
                            family: TreeFamilyName::Involutions,
                            degree: 3,
                            depth,
                            boundary: BoundarySpec::Iid,
                        },
                    ) => ConvergenceKind::Tree3 { depth: *depth },
                    (Rule::TwoTape, TopologySpec::Ring { n }) => ConvergenceKind::TwoTape { n: *n },
                    (r, _) => {
                        return Err(format!(
                            "topology: no convergence experiment for {} on this topology \
                             (toom or toom_ips on a torus, toom on a product of tori, tree4 on an iid free tree of degree 4, \
                             tree3 on an iid involution tree of degree 3, two_tape on a ring)",
                            r.name()
                        ))
                    }
                };
                Ok(Target::Convergence(kind))
            }
            ExperimentKind::Control => {
                single_p()?;
                match (rule, &self.topology) {
                    (Rule::Maj5, TopologySpec::Torus { width, height }) if width == height && *width >= 4 => {
                        Ok(Target::Maj5 { size: *width })
                    }
                    (Rule::Maj5, _) => Err("topology: the maj5 control needs a square torus of side at least 4".into()),
                    (Rule::Identity, TopologySpec::Ring { n }) => Ok(Target::Ring { n: *n }),
                    _ => Err("rule: controls are maj5 on a square torus or identity on a ring".into()),
                }
            }
        }
    }
}
