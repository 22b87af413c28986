//! Exact and statistical checks on the invariant measures of the rules.
//!
//! The traffic table used by the local checks is given as a Wolfram code so
//! that a corrupted table can be fed in and seen to fail.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::{replicas, ExperimentError};
use crate::analysis::{check_no_merge_split, eroder_time, particle_step, recode_psi, ErodeRule};
use crate::configuration::{Configuration, Symbol};
use crate::engine::{step_sync, Kernel, SyncStepper};
use crate::rules::{maj3, majority_traffic_local, Rule};
use crate::seeding::replica_rng;
use crate::topology::{BoundaryPolicy, Topology, TreeFamily, TreeWord};

/// Wolfram code of the traffic rule.
pub const TRAFFIC_CODE: u8 = 184;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub traf_code: u8,
    pub seed: u64,
    /// Only the checks attached to this rule; all checks when `None`.
    pub only: Option<Rule>,
    pub mt_replicas: u64,
    pub mt_cells: usize,
    pub mt_steps: usize,
    pub alpha: f64,
    pub p: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            traf_code: TRAFFIC_CODE,
            seed: 0,
            only: None,
            mt_replicas: 100,
            mt_cells: 10_000,
            mt_steps: 50,
            alpha: 0.1,
            p: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub rule: &'static str,
    pub passed: bool,
    /// What was checked, or the first witness of a failure.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn ledger(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{tag} ({}) {} [{}]: {}", c.id, c.name, c.rule, c.detail);
        }
        out
    }
}

type Check = fn(&SuiteOptions) -> Result<Result<String, String>, ExperimentError>;

const CHECKS: &[(&str, &str, &str, Check)] = &[
    ("a", "toom_ne_paths_fixed", "toom", ne_paths_fixed),
    ("b", "toom_checkerboard_period_2", "toom", checkerboard_orbit),
    ("c", "gkl_001_011_rings_fixed", "gkl", gkl_rings_fixed),
    ("d1", "majority_traffic_alternating_shift", "majority_traffic", mt_alternating),
    ("d2", "kari_alternating_shift", "kari", kari_alternating),
    ("e", "maj5_block_fixed", "maj5", maj5_block),
    ("f", "maj5_tree_path_fixed", "maj5", maj5_tree_path),
    ("g", "majority_traffic_100_non_increasing", "majority_traffic", mt_cylinder_100),
    ("h", "traffic_conserves_ones", "traffic", traffic_conserves),
    ("i", "traffic_is_ballistic_annihilation", "traffic", traffic_annihilation),
    ("j", "toom_eroder_small_rectangles", "toom", toom_eroder),
    ("k", "toom_ips_eroder_small_rectangles", "toom_ips", toom_ips_eroder),
    ("l", "toom_no_merge_split", "toom", toom_merge_split),
];

/// Runs every check (or those of `opts.only`) in a fixed order.
pub fn invariance_suite(opts: &SuiteOptions) -> Result<SuiteReport, ExperimentError> {
    if let Some(rule) = opts.only {
        let name = rule.name();
        if !CHECKS.iter().any(|c| c.2 == name) {
            return Err(ExperimentError::Invalid(format!("no invariance checks for rule {name}")));
        }
    }
    let mut checks = Vec::new();
    for &(id, name, rule, f) in CHECKS {
        if opts.only.is_some_and(|r| r.name() != rule) {
            continue;
        }
        let (passed, detail) = match f(opts)? {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(CheckOutcome {
            id,
            name,
            rule,
            passed,
            detail,
        });
    }
    Ok(SuiteReport { checks })
}

fn table(code: u8, x: Symbol, y: Symbol, z: Symbol) -> Symbol {
    (code >> (4 * x + 2 * y + z)) & 1
}

fn table_step(code: u8, x: &[Symbol]) -> Vec<Symbol> {
    let n = x.len();
    (0..n)
        .map(|i| table(code, x[(i + n - 1) % n], x[i], x[(i + 1) % n]))
        .collect()
}

fn bits(n: usize, v: u32) -> Vec<Symbol> {
    (0..n).map(|i| ((v >> i) & 1) as Symbol).collect()
}

fn ring(symbols: Vec<Symbol>) -> Result<Configuration, ExperimentError> {
    let topo = Arc::new(Topology::ring(symbols.len())?);
    Ok(Configuration::new(topo, symbols)?)
}

fn torus(w: usize, h: usize, f: impl Fn(usize, usize) -> Symbol) -> Result<Configuration, ExperimentError> {
    let topo = Arc::new(Topology::torus(w, h)?);
    let symbols = (0..w * h).map(|c| f(c % w, c / w)).collect();
    Ok(Configuration::new(topo, symbols)?)
}

fn render(s: &[Symbol]) -> String {
    s.iter().map(|&b| char::from(b'0' + b)).collect()
}

fn ne_paths_fixed(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let w = 12;
    let mut rng = replica_rng(opts.seed, 0);
    let mut tried = 0;
    for _ in 0..20 {
        let f: Vec<Symbol> = (0..w).map(|_| rng.random_range(0..2)).collect();
        let g = f.clone();
        let stripes = [
            torus(w, w, |_, j| f[j])?,
            torus(w, w, |i, _| g[i])?,
            torus(w, w, |i, j| f[((i + w - j) % w) / 2])?,
        ];
        for c in &stripes {
            tried += 1;
            let next = step_sync(c, Rule::Toom, &mut rng)?;
            if next.symbols() != c.symbols() {
                return Ok(Err(format!("{w}x{w} configuration {} moved", render(c.symbols()))));
            }
        }
    }
    Ok(Ok(format!("{tried} stripe and staircase configurations on {w}x{w} are fixed")))
}

fn checkerboard_orbit(_: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let mut rng = replica_rng(0, 0);
    for w in [2, 4, 8, 16] {
        let c = torus(w, w, |i, j| ((i + j) % 2) as Symbol)?;
        let once = step_sync(&c, Rule::Toom, &mut rng)?;
        let twice = step_sync(&once, Rule::Toom, &mut rng)?;
        if once.symbols() == c.symbols() || twice.symbols() != c.symbols() {
            return Ok(Err(format!("checkerboard on {w}x{w} is not a 2-cycle")));
        }
    }
    Ok(Ok("period exactly 2 on 2x2 .. 16x16".into()))
}

fn gkl_rings_fixed(_: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let mut rng = replica_rng(0, 0);
    let mut count = 0;
    for n in [9usize, 12, 15] {
        let blocks = n / 3;
        for mask in 0u32..(1 << blocks) {
            let mut x = Vec::with_capacity(n);
            for b in 0..blocks {
                x.extend_from_slice(if (mask >> b) & 1 == 1 { &[0, 1, 1] } else { &[0, 0, 1] });
            }
            let c = ring(x)?;
            let next = step_sync(&c, Rule::Gkl, &mut rng)?;
            count += 1;
            if next.symbols() != c.symbols() {
                return Ok(Err(format!("ring {} moved to {}", render(c.symbols()), render(next.symbols()))));
            }
        }
    }
    Ok(Ok(format!("all {count} concatenations for n = 9, 12, 15 are fixed")))
}

fn alternating(n: usize, first: Symbol) -> Vec<Symbol> {
    (0..n).map(|i| first ^ (i % 2) as Symbol).collect()
}

fn mt_alternating(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let rule = Rule::MajorityTraffic { alpha: opts.alpha };
    let n = 64;
    let x = alternating(n, 0);
    let want = alternating(n, 1);
    for (k, &y) in x.iter().enumerate() {
        let (l, r) = (x[(k + n - 1) % n], x[(k + 1) % n]);
        if maj3(l, y, r) != table(opts.traf_code, l, y, r) {
            return Ok(Err(format!("branches disagree at window {l}{y}{r}")));
        }
    }
    let start = ring(x.clone())?;
    for stream in 0..100u64 {
        let mut local_rng = replica_rng(opts.seed, stream);
        let coins: Vec<f64> = (0..n).map(|_| local_rng.random::<f64>()).collect();
        let local: Vec<Symbol> = (0..n)
            .map(|k| {
                let (l, y, r) = (x[(k + n - 1) % n], x[k], x[(k + 1) % n]);
                if coins[k] < opts.alpha {
                    maj3(l, y, r)
                } else {
                    table(opts.traf_code, l, y, r)
                }
            })
            .collect();
        if local != want {
            return Ok(Err(format!("coin stream {stream}: (01) went to {}", render(&local))));
        }
        for kernel in [Kernel::Dense, Kernel::Packed] {
            let mut rng = replica_rng(opts.seed, stream);
            let mut stepper = SyncStepper::new(rule, &start, kernel, &mut rng)?;
            stepper.step(&mut rng);
            if stepper.symbols() != local {
                return Ok(Err(format!("coin stream {stream}: {kernel:?} engine differs from the local table")));
            }
        }
        debug_assert_eq!(
            majority_traffic_local(x[n - 1], x[0], x[1], opts.alpha, coins[0]),
            want[0]
        );
    }
    Ok(Ok("(01) -> (10) on n = 64 for 100 coin streams; both branches agree".into()))
}

fn kari_alternating(_: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let mut rng = replica_rng(0, 0);
    for n in (4..=32).step_by(2) {
        let c = ring(alternating(n, 0))?;
        let next = step_sync(&c, Rule::Kari, &mut rng)?;
        if next.symbols() != alternating(n, 1) {
            return Ok(Err(format!("n = {n}: (01) went to {}", render(next.symbols()))));
        }
    }
    Ok(Ok("(01) -> (10) for even n in 4..=32".into()))
}

fn maj5_block(_: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let mut rng = replica_rng(0, 0);
    for bg in [0, 1] {
        let c = torus(16, 16, |i, j| if (7..9).contains(&i) && (7..9).contains(&j) { 1 - bg } else { bg })?;
        let next = step_sync(&c, Rule::Maj5, &mut rng)?;
        if next.symbols() != c.symbols() {
            return Ok(Err(format!("2x2 block of {} on 16x16 moved", 1 - bg)));
        }
    }
    Ok(Ok("2x2 blocks of either symbol on 16x16 are fixed".into()))
}

fn maj5_tree_path(_: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let depth = 6;
    let family = TreeFamily::free(4)?;
    let topo = Arc::new(Topology::tree(family, depth, BoundaryPolicy::Frozen(0))?);
    let tree = topo.as_tree().expect("tree");
    let mut symbols = vec![0; topo.cell_count()];
    for k in 0..=depth {
        for letter in ["a", "A"] {
            let cell = tree.node(&TreeWord::parse(&letter.repeat(k))?)?;
            symbols[cell] = 1;
        }
    }
    let start = Configuration::new(topo.clone(), symbols.clone())?;
    let mut rng = replica_rng(0, 0);
    let mut stepper = SyncStepper::new(Rule::Maj5Tree, &start, Kernel::Dense, &mut rng)?;
    // cells of depth <= depth - t cannot yet see the frozen boundary
    for t in 1..=depth {
        stepper.step(&mut rng);
        let now = stepper.symbols();
        for cell in 0..topo.cell_count() {
            if tree.word(cell).len() + t <= depth && now[cell] != symbols[cell] {
                return Ok(Err(format!("cell {} changed at step {t}", tree.word(cell).len())));
            }
        }
    }
    Ok(Ok(format!("the a-axis of T'_4 stays 1 up to the horizon of a depth {depth} tree")))
}

fn mt_cylinder_100(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let rule = Rule::MajorityTraffic { alpha: opts.alpha };
    let topo = Arc::new(Topology::ring(opts.mt_cells)?);
    let steps = opts.mt_steps;
    let runs: Vec<Result<Vec<f64>, ExperimentError>> = replicas(opts.mt_replicas, |r| {
        let mut rng = replica_rng(opts.seed, r);
        let c = Configuration::sample_bernoulli(topo.clone(), opts.p, &mut rng)?;
        let mut stepper = SyncStepper::new(rule, &c, Kernel::Auto, &mut rng)?;
        let mut freq = vec![c.count_pattern(&[1, 0, 0])?.frequency()];
        for _ in 0..steps {
            stepper.step(&mut rng);
            freq.push(stepper.snapshot().count_pattern(&[1, 0, 0])?.frequency());
        }
        Ok(freq)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let m = runs.len() as f64;
    let mean_se = |v: &dyn Fn(&Vec<f64>) -> f64| {
        let mean = runs.iter().map(v).sum::<f64>() / m;
        let var = runs.iter().map(|x| (v(x) - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    };
    let mut worst = f64::NEG_INFINITY;
    for t in 0..steps {
        let (d, se) = mean_se(&|x: &Vec<f64>| x[t + 1] - x[t]);
        let z = if se > 0.0 { d / se } else if d > 0.0 { f64::INFINITY } else { 0.0 };
        worst = worst.max(z);
        if z > 3.0 {
            return Ok(Err(format!("mu P^t[100] rose by {d:.3e} ({z:.1} sigma) between t = {t} and {}", t + 1)));
        }
    }
    // one-step identity for a Bernoulli start
    let (p, a) = (opts.p, opts.alpha);
    let q = 1.0 - p;
    let exact = p * q * q - (1.0 - a) * p.powi(3) * q * q - a * p * q.powi(4);
    let (f1, se1) = mean_se(&|x: &Vec<f64>| x[1]);
    let z1 = (f1 - exact).abs() / se1;
    if z1 > 4.0 {
        return Ok(Err(format!("mu P[100] = {f1:.5} but the cylinder identity gives {exact:.5} ({z1:.1} sigma)")));
    }
    let (f0, _) = mean_se(&|x: &Vec<f64>| x[0]);
    let (fl, _) = mean_se(&|x: &Vec<f64>| x[steps]);
    Ok(Ok(format!(
        "{} replicas of n = {}: [100] from {f0:.4} to {fl:.4} over {steps} steps, largest rise {worst:.2} sigma; t = 1 within {z1:.2} sigma of the identity",
        opts.mt_replicas, opts.mt_cells
    )))
}

fn traffic_conserves(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    for n in 1..=12 {
        for v in 0u32..(1 << n) {
            let x = bits(n, v);
            let y = table_step(opts.traf_code, &x);
            let ones = |s: &[Symbol]| s.iter().filter(|&&b| b == 1).count();
            if ones(&x) != ones(&y) {
                return Ok(Err(format!("{} -> {}", render(&x), render(&y))));
            }
        }
    }
    Ok(Ok("every ring with n <= 12".into()))
}

fn traffic_annihilation(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    for n in 3..=12 {
        for v in 0u32..(1 << n) {
            let x = bits(n, v);
            let y = table_step(opts.traf_code, &x);
            let lhs = recode_psi(&ring(y.clone())?)?;
            let rhs = particle_step(&recode_psi(&ring(x.clone())?)?);
            if lhs != rhs {
                return Ok(Err(format!("{} -> {}: psi does not annihilate ballistically", render(&x), render(&y))));
            }
        }
    }
    Ok(Ok("psi(traf(x)) = annihilation(psi(x)) for every ring with 3 <= n <= 12".into()))
}

fn rectangle(w: usize, h: usize) -> Vec<(i64, i64)> {
    (0..w as i64).flat_map(|i| (0..h as i64).map(move |j| (i, j))).collect()
}

fn toom_eroder(_: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let mut rng = replica_rng(0, 0);
    for w in 1..=5 {
        for h in 1..=5 {
            let out = eroder_time(&rectangle(w, h), ErodeRule::Ca, 4 * (w + h), &mut rng)?;
            if out.vanished_at != Some(w + h - 1) || out.left_rectangle {
                return Ok(Err(format!("{w}x{h} rectangle: {out:?}")));
            }
        }
    }
    Ok(Ok("every w x h rectangle with w, h <= 5 vanishes in w + h - 1 steps inside itself".into()))
}

fn toom_ips_eroder(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    for r in 0..10u64 {
        let mut rng = replica_rng(opts.seed, r);
        let size = rng.random_range(1..=12);
        let cells = crate::analysis::random_cluster(size, &mut rng);
        let out = eroder_time(&cells, ErodeRule::Ips, 10_000, &mut rng)?;
        if out.vanished_at.is_none() || out.left_rectangle || out.v_increased {
            return Ok(Err(format!("cluster {cells:?}: {out:?}")));
        }
    }
    Ok(Ok("10 random clusters of size <= 12 vanish inside their rectangles with v non-increasing".into()))
}

fn toom_merge_split(opts: &SuiteOptions) -> Result<Result<String, String>, ExperimentError> {
    let topo = Arc::new(Topology::torus(32, 32)?);
    for r in 0..5u64 {
        let mut rng = replica_rng(opts.seed, r);
        let c = Configuration::sample_bernoulli(topo.clone(), 0.5, &mut rng)?;
        let report = check_no_merge_split(&c)?;
        if !report.passed() {
            return Ok(Err(format!("replica {r}: {:?}", report.witness)));
        }
    }
    Ok(Ok("5 random 32x32 configurations at p = 1/2".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteOptions {
        SuiteOptions {
            mt_replicas: 20,
            mt_cells: 2000,
            mt_steps: 10,
            ..SuiteOptions::default()
        }
    }

    #[test]
    fn table_184_is_traffic() {
        for v in 0..8u8 {
            let (x, y, z) = (v >> 2, (v >> 1) & 1, v & 1);
            assert_eq!(table(TRAFFIC_CODE, x, y, z), crate::rules::traf(x, y, z));
        }
    }

    #[test]
    fn suite_passes() {
        let report = invariance_suite(&quick()).unwrap();
        assert!(report.passed(), "{}", report.ledger());
        assert!(report.checks.len() >= 7);
    }

    #[test]
    fn mutated_table_fails_by_name() {
        let opts = SuiteOptions {
            traf_code: TRAFFIC_CODE ^ 0b0001_0000,
            only: Some(Rule::Traffic),
            ..quick()
        };
        let report = invariance_suite(&opts).unwrap();
        assert!(report.failures().any(|c| c.name == "traffic_conserves_ones"));
    }
}
