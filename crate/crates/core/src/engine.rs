//! Running rules: synchronous CA/PCA stepping, Poisson-clock IPS dynamics,
//! termination verdicts and space-time rasters.
//!
//! Three synchronous kernels share one semantics:
//!
//! * [`Kernel::Dense`] walks a precomputed neighbour table and works on every
//!   topology. PCA coins are drawn one per cell, in cell-id order, before any
//!   cell is evaluated.
//! * [`Kernel::Packed`] stores ring configurations 64 cells per word and
//!   evaluates radius-3 rules with word-wide boolean formulas. Coins for the
//!   majority-traffic PCA are drawn exactly as in the dense kernel, so both
//!   kernels produce the same trajectory from the same stream.
//! * [`Kernel::Sparse`] tracks the boundaries between runs on a ring and only
//!   evaluates cells whose window is not constant. It draws coins for those
//!   cells only (in increasing cell order), so its trajectories agree with the
//!   dense kernel in law but not path by path.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::configuration::{bernoulli, ConfigError, Configuration, Symbol};
use crate::rules::{Mode, Rule, RuleError};
use crate::topology::{BoundaryPolicy, CellId, NeighborTable, Topology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rule {rule} runs in {mode:?} mode and cannot be used here")]
    Mode { rule: &'static str, mode: Mode },
    #[error("rule {rule} works on {expected} tape(s), configuration has {got}")]
    Tapes {
        rule: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("kernel {kernel:?} does not support rule {rule} on this topology")]
    Kernel { kernel: Kernel, rule: &'static str },
    #[error("duration {0} is negative or not finite")]
    Duration(f64),
    #[error("trajectory was run without recording snapshots")]
    NotRecorded,
    #[error("cell selector {0} is out of range")]
    Selector(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Packed on rings when the rule allows it, sparse for the Fukś rule,
    /// dense otherwise.
    #[default]
    Auto,
    Dense,
    Packed,
    Sparse,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Verdict {
    FixedPointZero,
    FixedPointOne,
    OtherFixedPoint,
    Cycle { period: usize },
    StepBudgetExhausted,
}

impl Verdict {
    /// The uniform symbol reached, if any.
    pub fn symbol(self) -> Option<Symbol> {
        match self {
            Verdict::FixedPointZero => Some(0),
            Verdict::FixedPointOne => Some(1),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::FixedPointZero => "fixed_point_zero",
            Verdict::FixedPointOne => "fixed_point_one",
            Verdict::OtherFixedPoint => "other_fixed_point",
            Verdict::Cycle { .. } => "cycle",
            Verdict::StepBudgetExhausted => "step_budget_exhausted",
        }
    }

    fn from_symbol(s: Symbol) -> Self {
        if s == 0 {
            Verdict::FixedPointZero
        } else {
            Verdict::FixedPointOne
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Cycle { period } => write!(f, "cycle({period})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_steps: usize,
    /// Keep every configuration for [`record_spacetime`].
    pub record: bool,
    pub kernel: Kernel,
}

impl RunOptions {
    pub fn new(max_steps: usize) -> Self {
        RunOptions {
            max_steps,
            record: false,
            kernel: Kernel::Auto,
        }
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rule: Rule,
    pub initial: Configuration,
    pub final_config: Configuration,
    pub steps: usize,
    pub verdict: Verdict,
    /// Raw symbols after each step, starting with the initial configuration.
    pub snapshots: Option<Vec<Vec<Symbol>>>,
}

/// Uniformity of the classifying tape: the configuration itself, or for the
/// two-tape rule the second tape once the first can no longer rewrite it.
pub fn absorbed_symbol(config: &Configuration) -> Option<Symbol> {
    if config.tapes() == 1 {
        return config.is_uniform().symbol();
    }
    two_tape_absorbed(config.symbols(), ring_len(config.topology()))
}

fn ring_len(topology: &Topology) -> usize {
    match topology {
        Topology::Ring { n } => *n,
        other => other.cell_count(),
    }
}

fn two_tape_absorbed(symbols: &[Symbol], n: usize) -> Option<Symbol> {
    let second = symbols[0] >> 1;
    if symbols.iter().any(|s| s >> 1 != second) {
        return None;
    }
    // the second tape can only be rewritten to v where the first shows vv
    let opposite = 1 - second;
    let blocked = (0..n).any(|k| symbols[k] & 1 == opposite && symbols[(k + 1) % n] & 1 == opposite);
    (!blocked).then_some(second)
}

fn check_rule(rule: &Rule, config: &Configuration) -> Result<(), EngineError> {
    rule.validate()?;
    rule.check_topology(config.topology())?;
    if config.tapes() != rule.tapes() {
        return Err(EngineError::Tapes {
            rule: rule.name(),
            expected: rule.tapes(),
            got: config.tapes(),
        });
    }
    Ok(())
}

/// Boundary slot values for a neighbour table, drawn once from `rng` when the
/// tree boundary is i.i.d.
fn boundary_values<R: Rng + ?Sized>(topology: &Topology, slots: usize, rng: &mut R) -> Vec<Symbol> {
    match topology.as_tree().map(|t| t.boundary()) {
        Some(BoundaryPolicy::Frozen(v)) => vec![v; slots],
        Some(BoundaryPolicy::IidBernoulli(p)) => (0..slots).map(|_| bernoulli(rng, p)).collect(),
        None => vec![0; slots],
    }
}

struct Dense {
    rule: Rule,
    table: Arc<NeighborTable>,
    cells: usize,
    // current symbols followed by boundary values
    cur: Vec<Symbol>,
    next: Vec<Symbol>,
    prev: Vec<Symbol>,
    coins: Vec<f64>,
}

impl Dense {
    fn new<R: Rng + ?Sized>(
        rule: Rule,
        table: Arc<NeighborTable>,
        config: &Configuration,
        rng: &mut R,
    ) -> Self {
        let cells = config.len();
        let mut cur = config.symbols().to_vec();
        cur.extend(boundary_values(config.topology(), table.boundary_slots(), rng));
        let coins = if rule.coins_per_update() > 0 {
            vec![0.0; cells]
        } else {
            Vec::new()
        };
        Dense {
            rule,
            table,
            cells,
            next: cur.clone(),
            prev: cur.clone(),
            cur,
            coins,
        }
    }

    fn eval(&self, cell: CellId) -> Symbol {
        let mut w = [0u8; 8];
        let row = self.table.row(cell);
        for (slot, &e) in w.iter_mut().zip(row) {
            *slot = self.cur[e as usize];
        }
        let coin = self.coins.get(cell).copied().unwrap_or(0.0);
        self.rule.apply(&w[..row.len()], coin)
    }

    fn draw_coins<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for c in &mut self.coins {
            *c = rng.random::<f64>();
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.draw_coins(rng);
        let mut next = std::mem::take(&mut self.next);
        self.fill(&mut next[..self.cells]);
        self.rotate(next);
    }

    #[cfg(feature = "parallel")]
    fn fill(&self, out: &mut [Symbol]) {
        use rayon::prelude::*;
        const CHUNK: usize = 1 << 14;
        if out.len() >= 4 * CHUNK {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                for (k, s) in chunk.iter_mut().enumerate() {
                    *s = self.eval(c * CHUNK + k);
                }
            });
            return;
        }
        for (k, s) in out.iter_mut().enumerate() {
            *s = self.eval(k);
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn fill(&self, out: &mut [Symbol]) {
        for (k, s) in out.iter_mut().enumerate() {
            *s = self.eval(k);
        }
    }

    fn step_in_order<R: Rng + ?Sized>(&mut self, rng: &mut R, order: &[CellId]) {
        self.draw_coins(rng);
        let mut next = std::mem::take(&mut self.next);
        for &cell in order {
            next[cell] = self.eval(cell);
        }
        self.rotate(next);
    }

    fn rotate(&mut self, next: Vec<Symbol>) {
        let old_prev = std::mem::replace(&mut self.prev, std::mem::replace(&mut self.cur, next));
        // boundary values live past `cells` and never change
        self.next = old_prev;
    }

    fn symbols(&self) -> &[Symbol] {
        &self.cur[..self.cells]
    }

    fn repeats(&self) -> (bool, bool) {
        // after rotate: cur = new, prev = old, next = two steps ago
        let c = &self.cur[..self.cells];
        (c == &self.prev[..self.cells], c == &self.next[..self.cells])
    }
}

/// Bits `x[(start + i) mod n]` for `i in 0..64`.
fn cyclic_extract(x: &[u64], n: usize, start: usize) -> u64 {
    let mut out = 0u64;
    let mut got = 0usize;
    let mut pos = start % n;
    while got < 64 {
        let take = (64 - got).min(n - pos);
        let (q, b) = (pos / 64, pos % 64);
        let mut v = x[q] >> b;
        if b > 0 && q + 1 < x.len() {
            v |= x[q + 1] << (64 - b);
        }
        if take < 64 {
            v &= (1u64 << take) - 1;
        }
        out |= v << got;
        got += take;
        pos = 0;
    }
    out
}

fn pack(symbols: &[Symbol]) -> Vec<u64> {
    let mut words = vec![0u64; symbols.len().div_ceil(64)];
    for (k, &s) in symbols.iter().enumerate() {
        words[k / 64] |= ((s & 1) as u64) << (k % 64);
    }
    words
}

fn unpack(words: &[u64], n: usize) -> Vec<Symbol> {
    (0..n).map(|k| ((words[k / 64] >> (k % 64)) & 1) as Symbol).collect()
}

fn tail_mask(n: usize) -> u64 {
    match n % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

struct Packed {
    rule: Rule,
    n: usize,
    cur: Vec<u64>,
    next: Vec<u64>,
    prev: Vec<u64>,
    coin_mask: Vec<u64>,
}

impl Packed {
    fn supports(rule: &Rule, topology: &Topology) -> bool {
        matches!(topology, Topology::Ring { .. })
            && matches!(
                rule,
                Rule::Identity | Rule::Traffic | Rule::Gkl | Rule::Kari | Rule::MajorityTraffic { .. }
            )
    }

    fn new(rule: Rule, config: &Configuration) -> Self {
        let cur = pack(config.symbols());
        let len = cur.len();
        Packed {
            rule,
            n: config.len(),
            next: vec![0; len],
            prev: cur.clone(),
            coin_mask: vec![0; len],
            cur,
        }
    }

    fn view(&self, w: usize, offset: i64) -> u64 {
        let n = self.n as i64;
        let start = (64 * w as i64 + offset).rem_euclid(n) as usize;
        cyclic_extract(&self.cur, self.n, start)
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let Rule::MajorityTraffic { alpha } = self.rule {
            self.coin_mask.fill(0);
            for k in 0..self.n {
                if rng.random::<f64>() < alpha {
                    self.coin_mask[k / 64] |= 1 << (k % 64);
                }
            }
        }
        let words = self.cur.len();
        for w in 0..words {
            let v = |d: i64| self.view(w, d);
            let out = match self.rule {
                Rule::Identity => self.cur[w],
                Rule::Traffic => {
                    let (x, y, z) = (v(-1), self.cur[w], v(1));
                    (x & !y) | (y & z)
                }
                Rule::Gkl => {
                    let y = self.cur[w];
                    (y & (v(1) | v(3))) | (!y & v(-1) & v(-3))
                }
                Rule::Kari => {
                    let x: [u64; 7] = std::array::from_fn(|d| v(d as i64 - 3));
                    let t: [u64; 5] = std::array::from_fn(|d| (x[d] & !x[d + 1]) | (x[d + 1] & x[d + 2]));
                    let (tm2, tm1, t0, tp1, tp2) = (t[0], t[1], t[2], t[3], t[4]);
                    let erase = !tm2 & !tm1 & t0 & !tp1;
                    let fill = tm1 & !t0 & tp1 & tp2;
                    (t0 & !erase) | fill
                }
                Rule::MajorityTraffic { .. } => {
                    let (x, y, z) = (v(-1), self.cur[w], v(1));
                    let maj = (x & y) | (x & z) | (y & z);
                    let traf = (x & !y) | (y & z);
                    let m = self.coin_mask[w];
                    (m & maj) | (!m & traf)
                }
                _ => unreachable!("packed kernel built for unsupported rule"),
            };
            self.next[w] = out;
        }
        if let Some(last) = self.next.last_mut() {
            *last &= tail_mask(self.n);
        }
        let next = std::mem::take(&mut self.next);
        let old_prev = std::mem::replace(&mut self.prev, std::mem::replace(&mut self.cur, next));
        self.next = old_prev;
    }

    fn uniform(&self) -> Option<Symbol> {
        let last = self.cur.len() - 1;
        let mask = tail_mask(self.n);
        let zeros = self.cur.iter().all(|&w| w == 0);
        if zeros {
            return Some(0);
        }
        let ones = self.cur[..last].iter().all(|&w| w == u64::MAX) && self.cur[last] == mask;
        ones.then_some(1)
    }

    fn repeats(&self) -> (bool, bool) {
        (self.cur == self.prev, self.cur == self.next)
    }

    fn symbols(&self) -> Vec<Symbol> {
        unpack(&self.cur, self.n)
    }
}

/// Ring kernel that only touches cells next to a boundary between runs.
/// Valid for radius-1 rules with `f(a, a, a) = a`.
struct Sparse {
    rule: Rule,
    n: usize,
    x: Vec<Symbol>,
    // sorted positions k with x[k] != x[k + 1]
    edges: Vec<usize>,
    is_edge: Vec<bool>,
    active: Vec<usize>,
    updates: Vec<(usize, Symbol)>,
    // cells changed by the previous step
    previous: Vec<usize>,
    repeats: (bool, bool),
}

impl Sparse {
    fn supports(rule: &Rule, topology: &Topology) -> bool {
        matches!(topology, Topology::Ring { .. })
            && matches!(
                rule,
                Rule::Identity | Rule::Traffic | Rule::MajorityTraffic { .. } | Rule::Fuks { .. }
            )
    }

    fn new(rule: Rule, config: &Configuration) -> Self {
        let x = config.symbols().to_vec();
        let n = x.len();
        let is_edge: Vec<bool> = (0..n).map(|k| x[k] != x[(k + 1) % n]).collect();
        let edges = (0..n).filter(|&k| is_edge[k]).collect();
        Sparse {
            rule,
            n,
            x,
            edges,
            is_edge,
            active: Vec::new(),
            updates: Vec::new(),
            previous: Vec::new(),
            repeats: (false, false),
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.n;
        if self.rule == Rule::Identity {
            self.repeats = (true, true);
            return;
        }
        self.active.clear();
        for &k in &self.edges {
            self.active.push(k);
            self.active.push((k + 1) % n);
        }
        self.active.sort_unstable();
        self.active.dedup();
        let draws = self.rule.coins_per_update() > 0;
        self.updates.clear();
        for &k in &self.active {
            let coin = if draws { rng.random::<f64>() } else { 0.0 };
            let w = [self.x[(k + n - 1) % n], self.x[k], self.x[(k + 1) % n]];
            let s = self.rule.apply(&w, coin);
            if s != w[1] {
                self.updates.push((k, s));
            }
        }
        let period_two = self.updates.len() == self.previous.len()
            && self.updates.iter().zip(&self.previous).all(|(u, &p)| u.0 == p);
        self.repeats = (self.updates.is_empty(), period_two);
        self.previous.clear();
        self.previous.extend(self.updates.iter().map(|u| u.0));
        if self.updates.is_empty() {
            return;
        }
        for &(k, s) in &self.updates {
            self.x[k] = s;
        }
        for &(k, _) in &self.updates {
            for e in [(k + n - 1) % n, k] {
                let now = self.x[e] != self.x[(e + 1) % n];
                if now && !self.is_edge[e] {
                    self.edges.push(e);
                }
                self.is_edge[e] = now;
            }
        }
        let is_edge = &self.is_edge;
        self.edges.retain(|&e| is_edge[e]);
        self.edges.sort_unstable();
        self.edges.dedup();
    }

    fn uniform(&self) -> Option<Symbol> {
        self.edges.is_empty().then_some(self.x[0])
    }
}

/// A rule checked against a topology, with its neighbour table. Cloning is
/// cheap, so replicas of one experiment share a single table.
#[derive(Debug, Clone)]
pub struct Prepared {
    rule: Rule,
    topology: Arc<Topology>,
    table: Arc<NeighborTable>,
}

impl Prepared {
    pub fn new(rule: Rule, topology: Arc<Topology>) -> Result<Self, EngineError> {
        rule.validate()?;
        rule.check_topology(&topology)?;
        let table = Arc::new(topology.neighbor_table(&rule.neighborhood())?);
        Ok(Prepared { rule, topology, table })
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn table(&self) -> &NeighborTable {
        &self.table
    }

    fn check(&self, config: &Configuration) -> Result<(), EngineError> {
        if !Arc::ptr_eq(&self.topology, config.topology()) && *self.topology != **config.topology() {
            return Err(RuleError::Topology {
                rule: self.rule.name(),
                topology: config.topology().kind_name(),
            }
            .into());
        }
        check_rule(&self.rule, config)
    }
}

enum Inner {
    Dense(Dense),
    Packed(Packed),
    Sparse(Sparse),
}

/// Synchronous stepper holding the current configuration in the layout of
/// its kernel.
pub struct SyncStepper {
    rule: Rule,
    topology: Arc<Topology>,
    tapes: usize,
    inner: Inner,
    steps: usize,
}

impl fmt::Debug for SyncStepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyncStepper")
            .field("rule", &self.rule)
            .field("kernel", &self.kernel())
            .field("steps", &self.steps)
            .finish()
    }
}

impl SyncStepper {
    /// `rng` supplies the frozen boundary of i.i.d. trees; other topologies
    /// draw nothing here.
    pub fn new<R: Rng + ?Sized>(
        rule: Rule,
        config: &Configuration,
        kernel: Kernel,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        Self::build(rule, None, config, kernel, rng)
    }

    /// Like [`SyncStepper::new`], reusing the table of `prepared`.
    pub fn from_prepared<R: Rng + ?Sized>(
        prepared: &Prepared,
        config: &Configuration,
        kernel: Kernel,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        prepared.check(config)?;
        Self::build(prepared.rule, Some(prepared.table.clone()), config, kernel, rng)
    }

    fn build<R: Rng + ?Sized>(
        rule: Rule,
        table: Option<Arc<NeighborTable>>,
        config: &Configuration,
        kernel: Kernel,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        check_rule(&rule, config)?;
        if rule.mode() == Mode::Ips {
            return Err(EngineError::Mode {
                rule: rule.name(),
                mode: Mode::Ips,
            });
        }
        let topo = config.topology();
        let dense = |rng: &mut R| -> Result<Inner, EngineError> {
            let table = match table {
                Some(t) => t,
                None => Arc::new(topo.neighbor_table(&rule.neighborhood())?),
            };
            Ok(Inner::Dense(Dense::new(rule, table, config, rng)))
        };
        let inner = match kernel {
            Kernel::Auto if matches!(rule, Rule::Fuks { .. }) && Sparse::supports(&rule, topo) => {
                Inner::Sparse(Sparse::new(rule, config))
            }
            Kernel::Auto if Packed::supports(&rule, topo) => Inner::Packed(Packed::new(rule, config)),
            Kernel::Auto | Kernel::Dense => dense(rng)?,
            Kernel::Packed if Packed::supports(&rule, topo) => Inner::Packed(Packed::new(rule, config)),
            Kernel::Sparse if Sparse::supports(&rule, topo) => Inner::Sparse(Sparse::new(rule, config)),
            _ => {
                return Err(EngineError::Kernel {
                    kernel,
                    rule: rule.name(),
                })
            }
        };
        Ok(SyncStepper {
            rule,
            topology: topo.clone(),
            tapes: config.tapes(),
            inner,
            steps: 0,
        })
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn kernel(&self) -> Kernel {
        match self.inner {
            Inner::Dense(_) => Kernel::Dense,
            Inner::Packed(_) => Kernel::Packed,
            Inner::Sparse(_) => Kernel::Sparse,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match &mut self.inner {
            Inner::Dense(d) => d.step(rng),
            Inner::Packed(p) => p.step(rng),
            Inner::Sparse(s) => s.step(rng),
        }
        self.steps += 1;
    }

    /// Dense kernel only: evaluates cells in `order` (a permutation of all
    /// cell ids). The result must not depend on the order.
    pub fn step_in_order<R: Rng + ?Sized>(&mut self, rng: &mut R, order: &[CellId]) -> Result<(), EngineError> {
        match &mut self.inner {
            Inner::Dense(d) if order.len() == d.cells => {
                d.step_in_order(rng, order);
                self.steps += 1;
                Ok(())
            }
            _ => Err(EngineError::Kernel {
                kernel: self.kernel(),
                rule: self.rule.name(),
            }),
        }
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        match &self.inner {
            Inner::Dense(d) => d.symbols().to_vec(),
            Inner::Packed(p) => p.symbols(),
            Inner::Sparse(s) => s.x.clone(),
        }
    }

    /// Current symbol of one cell.
    pub fn symbol(&self, cell: CellId) -> Symbol {
        match &self.inner {
            Inner::Dense(d) => d.cur[cell],
            Inner::Packed(p) => ((p.cur[cell / 64] >> (cell % 64)) & 1) as Symbol,
            Inner::Sparse(s) => s.x[cell],
        }
    }

    pub fn snapshot(&self) -> Configuration {
        let symbols = self.symbols();
        if self.tapes == 2 {
            let first: Vec<Symbol> = symbols.iter().map(|s| s & 1).collect();
            let second: Vec<Symbol> = symbols.iter().map(|s| s >> 1).collect();
            Configuration::two_tape(self.topology.clone(), &first, &second)
                .expect("stepper keeps a valid configuration")
        } else {
            Configuration::new(self.topology.clone(), symbols).expect("stepper keeps a valid configuration")
        }
    }

    /// Symbol of the classifying tape once it is absorbed.
    pub fn absorbed(&self) -> Option<Symbol> {
        match &self.inner {
            Inner::Packed(p) => p.uniform(),
            Inner::Sparse(s) => s.uniform(),
            Inner::Dense(d) if self.tapes == 2 => two_tape_absorbed(d.symbols(), ring_len(&self.topology)),
            Inner::Dense(d) => {
                let s = d.symbols();
                let first = s[0];
                s.iter().all(|&v| v == first).then_some(first)
            }
        }
    }

    /// `(same as one step ago, same as two steps ago)`. Only meaningful for
    /// deterministic rules.
    fn repeats(&self) -> (bool, bool) {
        if self.steps == 0 {
            return (false, false);
        }
        let (p1, p2) = match &self.inner {
            Inner::Dense(d) => d.repeats(),
            Inner::Packed(p) => p.repeats(),
            Inner::Sparse(s) => s.repeats,
        };
        (p1, p2 && self.steps >= 2)
    }
}

/// One synchronous step from a fresh stepper. Trees with an i.i.d. boundary
/// draw their boundary from `rng` first.
pub fn step_sync<R: Rng + ?Sized>(config: &Configuration, rule: Rule, rng: &mut R) -> Result<Configuration, EngineError> {
    let mut stepper = SyncStepper::new(rule, config, Kernel::Dense, rng)?;
    stepper.step(rng);
    Ok(stepper.snapshot())
}

/// Runs until the classifying tape is uniform, a deterministic rule repeats
/// with period one or two, or `max_steps` steps have been taken.
pub fn run_sync<R: Rng + ?Sized>(
    config: &Configuration,
    rule: Rule,
    options: RunOptions,
    rng: &mut R,
) -> Result<Trajectory, EngineError> {
    let stepper = SyncStepper::new(rule, config, options.kernel, rng)?;
    run_stepper(stepper, config, options, rng)
}

/// [`run_sync`] with the neighbour table of `prepared`.
pub fn run_prepared<R: Rng + ?Sized>(
    prepared: &Prepared,
    config: &Configuration,
    options: RunOptions,
    rng: &mut R,
) -> Result<Trajectory, EngineError> {
    let stepper = SyncStepper::from_prepared(prepared, config, options.kernel, rng)?;
    run_stepper(stepper, config, options, rng)
}

fn run_stepper<R: Rng + ?Sized>(
    mut stepper: SyncStepper,
    config: &Configuration,
    options: RunOptions,
    rng: &mut R,
) -> Result<Trajectory, EngineError> {
    let rule = stepper.rule();
    let deterministic = rule.mode() == Mode::Ca;
    let mut snapshots = options.record.then(|| vec![config.symbols().to_vec()]);
    let mut verdict = None;
    if let Some(s) = stepper.absorbed() {
        verdict = Some(Verdict::from_symbol(s));
    }
    while verdict.is_none() && stepper.steps() < options.max_steps {
        stepper.step(rng);
        if let Some(snaps) = snapshots.as_mut() {
            snaps.push(stepper.symbols());
        }
        if let Some(s) = stepper.absorbed() {
            verdict = Some(Verdict::from_symbol(s));
        } else if deterministic {
            match stepper.repeats() {
                (true, _) => verdict = Some(Verdict::OtherFixedPoint),
                (false, true) => verdict = Some(Verdict::Cycle { period: 2 }),
                _ => {}
            }
        }
    }
    Ok(Trajectory {
        rule,
        initial: config.clone(),
        final_config: stepper.snapshot(),
        steps: stepper.steps(),
        verdict: verdict.unwrap_or(Verdict::StepBudgetExhausted),
        snapshots,
    })
}

/// One IPS update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsyncEvent {
    pub index: u64,
    pub cell: CellId,
    pub old: Symbol,
    pub new: Symbol,
}

/// Asynchronous stepper: each event updates one uniformly chosen cell in place.
pub struct AsyncStepper {
    rule: Rule,
    topology: Arc<Topology>,
    table: Arc<NeighborTable>,
    cells: usize,
    state: Vec<Symbol>,
    ones: usize,
    events: u64,
    time: f64,
}

impl fmt::Debug for AsyncStepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsyncStepper")
            .field("rule", &self.rule)
            .field("events", &self.events)
            .field("time", &self.time)
            .finish()
    }
}

impl AsyncStepper {
    pub fn new<R: Rng + ?Sized>(rule: Rule, config: &Configuration, rng: &mut R) -> Result<Self, EngineError> {
        let prepared = Prepared::new(rule, config.topology().clone())?;
        Self::from_prepared(&prepared, config, rng)
    }

    pub fn from_prepared<R: Rng + ?Sized>(
        prepared: &Prepared,
        config: &Configuration,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        prepared.check(config)?;
        let rule = prepared.rule;
        if rule.mode() != Mode::Ips {
            return Err(EngineError::Mode {
                rule: rule.name(),
                mode: rule.mode(),
            });
        }
        let topology = config.topology().clone();
        let table = prepared.table.clone();
        let mut state = config.symbols().to_vec();
        state.extend(boundary_values(&topology, table.boundary_slots(), rng));
        let cells = config.len();
        let ones = state[..cells].iter().filter(|&&s| s == 1).count();
        Ok(AsyncStepper {
            rule,
            topology,
            table,
            cells,
            state,
            ones,
            events: 0,
            time: 0.0,
        })
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.state[..self.cells]
    }

    pub fn snapshot(&self) -> Configuration {
        Configuration::new(self.topology.clone(), self.symbols().to_vec()).expect("stepper keeps a valid configuration")
    }

    pub fn uniform(&self) -> Option<Symbol> {
        match self.ones {
            0 => Some(0),
            k if k == self.cells => Some(1),
            _ => None,
        }
    }

    /// Updates one uniformly chosen cell.
    pub fn event<R: Rng + ?Sized>(&mut self, rng: &mut R) -> AsyncEvent {
        let cell = rng.random_range(0..self.cells);
        let coin = if self.rule.coins_per_update() > 0 {
            rng.random::<f64>()
        } else {
            0.0
        };
        let mut w = [0u8; 8];
        let row = self.table.row(cell);
        for (slot, &e) in w.iter_mut().zip(row) {
            *slot = self.state[e as usize];
        }
        let old = self.state[cell];
        let new = self.rule.apply(&w[..row.len()], coin);
        self.state[cell] = new;
        self.ones = self.ones + new as usize - old as usize;
        self.events += 1;
        AsyncEvent {
            index: self.events - 1,
            cell,
            old,
            new,
        }
    }

    /// Advances the clock by `duration`: `K ~ Poisson(cells * duration)`
    /// events. `observer` sees every event after it is applied and may
    /// return `false` to stop early. Returns the number of events applied.
    pub fn advance<R, F>(&mut self, duration: f64, rng: &mut R, mut observer: F) -> Result<u64, EngineError>
    where
        R: Rng + ?Sized,
        F: FnMut(&AsyncEvent, &[Symbol]) -> bool,
    {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(EngineError::Duration(duration));
        }
        let mean = self.cells as f64 * duration;
        let k = if mean > 0.0 {
            Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
        } else {
            0
        };
        for done in 0..k {
            let ev = self.event(rng);
            if !observer(&ev, &self.state[..self.cells]) {
                self.time += duration * (done + 1) as f64 / k as f64;
                return Ok(done + 1);
            }
        }
        self.time += duration;
        Ok(k)
    }
}

/// Applies `duration` time units of IPS dynamics.
pub fn step_async<R: Rng + ?Sized>(
    config: &Configuration,
    rule: Rule,
    duration: f64,
    rng: &mut R,
) -> Result<(Configuration, u64), EngineError> {
    let mut stepper = AsyncStepper::new(rule, config, rng)?;
    let events = stepper.advance(duration, rng, |_, _| true)?;
    Ok((stepper.snapshot(), events))
}

#[derive(Debug, Clone)]
pub struct AsyncRun {
    pub final_config: Configuration,
    /// Whole time units started before the run stopped.
    pub time_units: usize,
    pub events: u64,
    pub verdict: Verdict,
    /// Set when the observer asked to stop.
    pub stopped: bool,
}

/// Runs unit time intervals until the configuration is uniform, the observer
/// stops the run, or `max_time` units have elapsed.
pub fn run_async<R, F>(
    config: &Configuration,
    rule: Rule,
    max_time: usize,
    rng: &mut R,
    observer: F,
) -> Result<AsyncRun, EngineError>
where
    R: Rng + ?Sized,
    F: FnMut(&AsyncEvent, &[Symbol]) -> bool,
{
    let prepared = Prepared::new(rule, config.topology().clone())?;
    run_async_prepared(&prepared, config, max_time, rng, observer)
}

/// [`run_async`] with the neighbour table of `prepared`.
pub fn run_async_prepared<R, F>(
    prepared: &Prepared,
    config: &Configuration,
    max_time: usize,
    rng: &mut R,
    mut observer: F,
) -> Result<AsyncRun, EngineError>
where
    R: Rng + ?Sized,
    F: FnMut(&AsyncEvent, &[Symbol]) -> bool,
{
    let mut stepper = AsyncStepper::from_prepared(prepared, config, rng)?;
    let mut units = 0;
    let mut stopped = false;
    while stepper.uniform().is_none() && units < max_time && !stopped {
        units += 1;
        let mut absorbed = false;
        let cells = stepper.cells;
        let mut ones = stepper.ones;
        stepper.advance(1.0, rng, |ev, state| {
            ones = ones + ev.new as usize - ev.old as usize;
            if !observer(ev, state) {
                stopped = true;
                return false;
            }
            absorbed = ones == 0 || ones == cells;
            !absorbed
        })?;
    }
    let verdict = match stepper.uniform() {
        Some(s) => Verdict::from_symbol(s),
        None => Verdict::StepBudgetExhausted,
    };
    Ok(AsyncRun {
        final_config: stepper.snapshot(),
        time_units: units,
        events: stepper.events(),
        verdict,
        stopped,
    })
}

/// Rows are time, columns are cells; symbols are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<Symbol>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PbmError {
    #[error("missing P1 magic number")]
    Magic,
    #[error("malformed PBM header")]
    Header,
    #[error("expected {expected} pixels, found {got}")]
    Pixels { expected: usize, got: usize },
}

impl Raster {
    pub fn new(width: usize, rows: Vec<Vec<Symbol>>) -> Result<Self, EngineError> {
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(EngineError::Selector(format!("row of length {} in raster of width {width}", r.len())));
        }
        Ok(Raster {
            width,
            height: rows.len(),
            data: rows.concat(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn row(&self, t: usize) -> &[Symbol] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    /// Places `other` below `self`. Widths must agree.
    pub fn stack(&self, other: &Raster) -> Option<Raster> {
        if self.width != other.width {
            return None;
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Some(Raster {
            width: self.width,
            height: self.height + other.height,
            data,
        })
    }

    /// Plain PBM, one character per pixel, lines at most 70 characters.
    pub fn to_pbm(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.width, self.height);
        for t in 0..self.height {
            let row = self.row(t);
            if row.is_empty() {
                out.push('\n');
            }
            for chunk in row.chunks(70) {
                out.extend(chunk.iter().map(|&s| if s == 1 { '1' } else { '0' }));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_pbm(text: &str) -> Result<Raster, PbmError> {
        let mut body = String::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            body.push_str(line);
            body.push('\n');
        }
        let mut tokens = body.split_whitespace();
        if tokens.next() != Some("P1") {
            return Err(PbmError::Magic);
        }
        let mut dim = || -> Result<usize, PbmError> {
            tokens.next().and_then(|t| t.parse().ok()).ok_or(PbmError::Header)
        };
        let (width, height) = (dim()?, dim()?);
        let data: Vec<Symbol> = tokens
            .flat_map(|t| t.chars())
            .filter_map(|c| match c {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect();
        if data.len() != width * height {
            return Err(PbmError::Pixels {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Raster { width, height, data })
    }
}

/// Which cells become raster columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellSelector {
    All,
    /// Cell ids `start..end`.
    Range(usize, usize),
    /// Row `j` of a torus (or of the first layer of a torus product).
    TorusRow(usize),
    Cells(Vec<CellId>),
}

/// Space-time raster of `tape` over the recorded snapshots.
pub fn record_spacetime(trajectory: &Trajectory, selector: &CellSelector, tape: usize) -> Result<Raster, EngineError> {
    let snaps = trajectory.snapshots.as_ref().ok_or(EngineError::NotRecorded)?;
    let topo = trajectory.initial.topology();
    let n = topo.cell_count();
    if tape >= trajectory.initial.tapes() {
        return Err(EngineError::Selector(format!("tape {tape}")));
    }
    let cells: Vec<CellId> = match selector {
        CellSelector::All => (0..n).collect(),
        CellSelector::Range(a, b) if a <= b && *b <= n => (*a..*b).collect(),
        CellSelector::TorusRow(j) => match topo.torus_dims() {
            Some((w, h)) if *j < h => (0..w).map(|i| j * w + i).collect(),
            _ => return Err(EngineError::Selector(format!("torus row {j}"))),
        },
        CellSelector::Cells(v) if v.iter().all(|&c| c < n) => v.clone(),
        other => return Err(EngineError::Selector(format!("{other:?}"))),
    };
    let rows = snaps
        .iter()
        .map(|s| cells.iter().map(|&c| (s[c] >> tape) & 1).collect())
        .collect();
    Raster::new(cells.len(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::replica_rng;

    fn ring(text: &str) -> Configuration {
        Configuration::ring_from_str(text).unwrap()
    }

    fn checkerboard(w: usize, h: usize, phase: usize) -> Configuration {
        let topo = Arc::new(Topology::torus(w, h).unwrap());
        let symbols = (0..w * h).map(|c| ((c % w + c / w + phase) % 2) as Symbol).collect();
        Configuration::new(topo, symbols).unwrap()
    }

    #[test]
    fn toom_checkerboard_swaps() {
        let mut rng = replica_rng(1, 0);
        let y = checkerboard(6, 6, 0);
        let z = checkerboard(6, 6, 1);
        assert_eq!(step_sync(&y, Rule::Toom, &mut rng).unwrap(), z);
        assert_eq!(step_sync(&z, Rule::Toom, &mut rng).unwrap(), y);
        let t = run_sync(&y, Rule::Toom, RunOptions::new(100), &mut rng).unwrap();
        assert_eq!(t.verdict, Verdict::Cycle { period: 2 });
        assert_eq!(t.steps, 2);
    }

    #[test]
    fn uniform_stops_at_zero() {
        let mut rng = replica_rng(1, 0);
        let zero = ring("000000");
        for rule in [Rule::Gkl, Rule::Traffic, Rule::Kari, Rule::Fuks { p_copy: 0.2 }] {
            let t = run_sync(&zero, rule, RunOptions::new(10), &mut rng).unwrap();
            assert_eq!((t.verdict, t.steps), (Verdict::FixedPointZero, 0));
        }
    }

    #[test]
    fn identity_reports_fixed_point() {
        let mut rng = replica_rng(1, 0);
        let t = run_sync(&ring("0110"), Rule::Identity, RunOptions::new(10), &mut rng).unwrap();
        assert_eq!(t.verdict, Verdict::OtherFixedPoint);
        assert_eq!(t.steps, 1);
    }

    #[test]
    fn budget_exhausted() {
        let mut rng = replica_rng(1, 0);
        let t = run_sync(&ring("0001101"), Rule::Traffic, RunOptions::new(3), &mut rng).unwrap();
        assert_eq!(t.verdict, Verdict::StepBudgetExhausted);
        assert_eq!(t.steps, 3);
    }

    #[test]
    fn cyclic_extract_wraps() {
        let x = pack(&[1, 0, 1, 1, 0]);
        let v = cyclic_extract(&x, 5, 3);
        let bits: Vec<u64> = (0..10).map(|i| (v >> i) & 1).collect();
        assert_eq!(bits, vec![1, 0, 1, 0, 1, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn packed_matches_dense() {
        for rule in [Rule::Traffic, Rule::Gkl, Rule::Kari, Rule::MajorityTraffic { alpha: 0.3 }] {
            for n in [4usize, 7, 63, 64, 65, 130] {
                let topo = Arc::new(Topology::ring(n).unwrap());
                let c = Configuration::sample_bernoulli(topo, 0.5, &mut replica_rng(n as u64, 0)).unwrap();
                let mut r1 = replica_rng(9, n as u64);
                let mut r2 = replica_rng(9, n as u64);
                let mut dense = SyncStepper::new(rule, &c, Kernel::Dense, &mut r1).unwrap();
                let mut packed = SyncStepper::new(rule, &c, Kernel::Packed, &mut r2).unwrap();
                for _ in 0..20 {
                    dense.step(&mut r1);
                    packed.step(&mut r2);
                    assert_eq!(dense.symbols(), packed.symbols(), "{rule} n={n}");
                }
            }
        }
    }

    #[test]
    fn sparse_matches_dense_for_ca() {
        let topo = Arc::new(Topology::ring(50).unwrap());
        let c = Configuration::sample_bernoulli(topo, 0.4, &mut replica_rng(3, 0)).unwrap();
        let mut rng = replica_rng(0, 0);
        let mut dense = SyncStepper::new(Rule::Traffic, &c, Kernel::Dense, &mut rng).unwrap();
        let mut sparse = SyncStepper::new(Rule::Traffic, &c, Kernel::Sparse, &mut rng).unwrap();
        for _ in 0..60 {
            dense.step(&mut rng);
            sparse.step(&mut rng);
            assert_eq!(dense.symbols(), sparse.symbols());
        }
    }

    #[test]
    fn fuks_absorbs_sparse() {
        let mut rng = replica_rng(5, 0);
        let c = ring("0001110000111");
        let t = run_sync(&c, Rule::Fuks { p_copy: 0.25 }, RunOptions::new(100_000), &mut rng).unwrap();
        assert!(t.verdict.symbol().is_some());
        assert!(absorbed_symbol(&t.final_config).is_some());
    }

    #[test]
    fn ips_rejected_by_sync() {
        let c = checkerboard(4, 4, 0);
        let err = step_sync(&c, Rule::ToomIps, &mut replica_rng(0, 0)).unwrap_err();
        assert!(matches!(err, EngineError::Mode { .. }));
        let err = step_async(&c, Rule::Toom, 1.0, &mut replica_rng(0, 0)).unwrap_err();
        assert!(matches!(err, EngineError::Mode { .. }));
    }

    #[test]
    fn async_zero_duration() {
        let c = checkerboard(4, 4, 0);
        let (out, events) = step_async(&c, Rule::ToomIps, 0.0, &mut replica_rng(0, 0)).unwrap();
        assert_eq!((out, events), (c.clone(), 0));
        assert!(step_async(&c, Rule::ToomIps, -1.0, &mut replica_rng(0, 0)).is_err());
    }

    #[test]
    fn two_tape_verdict() {
        let topo = Arc::new(Topology::ring(6).unwrap());
        // second tape all ones, first tape has a 00: not absorbed yet
        let c = Configuration::two_tape(topo.clone(), &[0, 0, 1, 0, 1, 0], &[1; 6]).unwrap();
        assert_eq!(absorbed_symbol(&c), None);
        let c = Configuration::two_tape(topo, &[0, 1, 1, 0, 1, 1], &[1; 6]).unwrap();
        assert_eq!(absorbed_symbol(&c), Some(1));
    }

    #[test]
    fn pbm_roundtrip() {
        let r = Raster::new(75, vec![vec![1; 75], (0..75).map(|k| (k % 2) as u8).collect()]).unwrap();
        let text = r.to_pbm();
        assert!(text.starts_with("P1\n75 2\n"));
        assert!(text.lines().all(|l| l.len() <= 70));
        assert_eq!(Raster::from_pbm(&text).unwrap(), r);
    }

    #[test]
    fn spacetime_rows() {
        let mut rng = replica_rng(0, 0);
        let c = ring("0110100");
        let t = run_sync(&c, Rule::Traffic, RunOptions::new(1).recording(), &mut rng).unwrap();
        let r = record_spacetime(&t, &CellSelector::All, 0).unwrap();
        assert_eq!(r.height(), 2);
        assert_eq!(r.row(0), c.symbols());
        assert!(record_spacetime(&t, &CellSelector::Range(0, 9), 0).is_err());
    }
}
