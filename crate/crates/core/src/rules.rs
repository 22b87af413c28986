//! Local rules: pure functions of a neighbourhood window plus, for
//! probabilistic rules, one uniform `[0, 1)` coin.
//!
//! Lattice coordinates follow the crate convention: `i` grows eastward and
//! `j` northward, so North is `(0, 1)` and East is `(1, 0)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::configuration::{ConfigError, Configuration, Symbol};
use crate::topology::{Offset, Topology, TreeFamily};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
    #[error("rule {rule} does not take parameter {key:?}")]
    UnknownParameter { rule: &'static str, key: String },
    #[error("parameter {key} = {value} is out of range ({range})")]
    ParameterRange {
        key: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("rule {rule} cannot run on a {topology} topology")]
    Topology {
        rule: &'static str,
        topology: &'static str,
    },
    #[error("kari traffic needs a ring of at least 4 cells, got {0}")]
    KariRing(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// `maj(x, y, z) = 0` if `x + y + z < 2`, else `1`.
#[inline]
pub fn maj3(x: Symbol, y: Symbol, z: Symbol) -> Symbol {
    (x + y + z >= 2) as Symbol
}

/// Rule 184. `x` is the left neighbour, `y` the cell, `z` the right one.
#[inline]
pub fn traf(x: Symbol, y: Symbol, z: Symbol) -> Symbol {
    (x & (1 - y)) | (y & z)
}

/// Toom's North-East-Centre majority.
#[inline]
pub fn toom_local(centre: Symbol, north: Symbol, east: Symbol) -> Symbol {
    maj3(centre, north, east)
}

#[inline]
pub fn maj5(a: Symbol, b: Symbol, c: Symbol, d: Symbol, e: Symbol) -> Symbol {
    (a + b + c + d + e >= 3) as Symbol
}

/// Majority of the four lattice neighbours; a 2-2 tie is broken by the coin
/// (`coin < 0.5` gives 0).
#[inline]
pub fn glauber4(n: Symbol, e: Symbol, s: Symbol, w: Symbol, coin: f64) -> Symbol {
    match n + e + s + w {
        0 | 1 => 0,
        3 | 4 => 1,
        _ => (coin >= 0.5) as Symbol,
    }
}

/// The seven cells read by the triangular-lattice IPS around `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangularWindow {
    pub centre: Symbol,
    /// `(i, j+1)`
    pub north: Symbol,
    /// `(i+1, j)`
    pub east: Symbol,
    /// `(i, j-1)`
    pub south: Symbol,
    /// `(i-1, j)`
    pub west: Symbol,
    /// `(i+1, j-1)`
    pub south_east: Symbol,
    /// `(i-1, j+1)`
    pub north_west: Symbol,
}

impl TriangularWindow {
    /// Offsets in the order of [`TriangularWindow::from_slice`].
    pub fn offsets() -> Vec<Offset> {
        [(0, 0), (0, 1), (1, 0), (0, -1), (-1, 0), (1, -1), (-1, 1)]
            .into_iter()
            .map(|(a, b)| Offset::Lattice(a, b))
            .collect()
    }

    pub fn from_slice(w: &[Symbol]) -> Self {
        TriangularWindow {
            centre: w[0],
            north: w[1],
            east: w[2],
            south: w[3],
            west: w[4],
            south_east: w[5],
            north_west: w[6],
        }
    }

    /// Bit `k` of `bits` is the `k`-th cell in offset order.
    pub fn from_bits(bits: u8) -> Self {
        let w: Vec<Symbol> = (0..7).map(|k| (bits >> k) & 1).collect();
        Self::from_slice(&w)
    }

    /// Whether one of the three guarded patterns holds, in which case the
    /// centre keeps its state.
    pub fn is_guarded(&self) -> bool {
        let c = self.centre;
        let other = 1 - c;
        let north_east_flipped = self.north == other && self.east == other;
        if !north_east_flipped {
            return false;
        }
        let first = self.north_west == c
            && self.south_east == c
            && (self.south == other || self.west == other);
        let second = self.north_west == c
            && self.south == c
            && self.south_east == other
            && self.west == other;
        let third = self.west == c
            && self.south_east == c
            && self.north_west == other
            && self.south == other;
        first || second || third
    }
}

/// Majority on North-East-Centre unless a guarded pattern would let the
/// update merge or split clusters.
pub fn toom_ips_local(w: &TriangularWindow) -> Symbol {
    if w.is_guarded() {
        w.centre
    } else {
        maj3(w.centre, w.north, w.east)
    }
}

/// `maj(x_{ga}, x_{gab}, x_{gab⁻¹})` on `T'_4`.
#[inline]
pub fn tree4_local(ga: Symbol, gab: Symbol, gab_inv: Symbol) -> Symbol {
    maj3(ga, gab, gab_inv)
}

/// `maj(x_{gab}, x_{gac}, x_{gacbc})` on `T_3`.
#[inline]
pub fn tree3_local(gab: Symbol, gac: Symbol, gacbc: Symbol) -> Symbol {
    maj3(gab, gac, gacbc)
}

/// GKL on the window `x_{k-3}, x_{k-1}, x_k, x_{k+1}, x_{k+3}`.
#[inline]
pub fn gkl_local(l3: Symbol, l1: Symbol, x: Symbol, r1: Symbol, r3: Symbol) -> Symbol {
    if x == 1 {
        maj3(x, r1, r3)
    } else {
        maj3(x, l1, l3)
    }
}

#[inline]
pub fn majority_traffic_local(x: Symbol, y: Symbol, z: Symbol, alpha: f64, coin: f64) -> Symbol {
    if coin < alpha {
        maj3(x, y, z)
    } else {
        traf(x, y, z)
    }
}

/// Copy the left cell with probability `p_copy`, the right one with
/// probability `p_copy`, keep the centre otherwise.
#[inline]
pub fn fuks_local(x: Symbol, y: Symbol, z: Symbol, p_copy: f64, coin: f64) -> Symbol {
    if coin < p_copy {
        x
    } else if coin < 2.0 * p_copy {
        z
    } else {
        y
    }
}

/// Two-tape rule on packed pairs (bit 0 first tape, bit 1 second tape).
/// The first tape runs traffic; the second records the last `00` or `11`
/// seen on the first tape at `(k-1, k)`.
#[inline]
pub fn two_tape_local(x: Symbol, y: Symbol, z: Symbol) -> Symbol {
    let (x1, y1, z1) = (x & 1, y & 1, z & 1);
    let y2 = (y >> 1) & 1;
    let first = traf(x1, y1, z1);
    let second = if x1 == 0 && y1 == 0 {
        0
    } else if x1 == 1 && y1 == 1 {
        1
    } else {
        y2
    };
    first | (second << 1)
}

/// Second phase of Kari's rule applied to a traffic image `t`: the lone `1`
/// of each `0010` becomes `0` and the lone `0` of each `1011` becomes `1`.
/// Matches are located on `t` and applied simultaneously.
pub fn kari_cleanup(t: &[Symbol]) -> Vec<Symbol> {
    let n = t.len();
    let at = |k: usize, d: usize| t[(k + d) % n];
    let mut out = t.to_vec();
    for k in 0..n {
        if at(k, 0) == 0 && at(k, 1) == 0 && at(k, 2) == 1 && at(k, 3) == 0 {
            out[(k + 2) % n] = 0;
        }
        if at(k, 0) == 1 && at(k, 1) == 0 && at(k, 2) == 1 && at(k, 3) == 1 {
            out[(k + 1) % n] = 1;
        }
    }
    out
}

/// One step of Kari's traffic rule on a ring: traffic, then the cleanup pass.
pub fn kari_step(config: &Configuration) -> Result<Configuration, RuleError> {
    let n = match **config.topology() {
        Topology::Ring { n } => n,
        ref other => {
            return Err(RuleError::Topology {
                rule: "kari",
                topology: other.kind_name(),
            })
        }
    };
    if n < 4 {
        return Err(RuleError::KariRing(n));
    }
    let x = config.symbols();
    let t: Vec<Symbol> = (0..n)
        .map(|k| traf(x[(k + n - 1) % n], x[k], x[(k + 1) % n]))
        .collect();
    Ok(Configuration::new(config.topology().clone(), kari_cleanup(&t))?)
}

/// Kari's rule folded into a single radius-3 local function on
/// `x_{k-3} ..= x_{k+3}`.
pub fn kari_local(w: &[Symbol; 7]) -> Symbol {
    // traffic image at k-2 ..= k+2
    let t: [Symbol; 5] = std::array::from_fn(|d| traf(w[d], w[d + 1], w[d + 2]));
    let (tm2, tm1, t0, tp1, tp2) = (t[0], t[1], t[2], t[3], t[4]);
    if tm2 == 0 && tm1 == 0 && t0 == 1 && tp1 == 0 {
        0
    } else if tm1 == 1 && t0 == 0 && tp1 == 1 && tp2 == 1 {
        1
    } else {
        t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Deterministic synchronous.
    Ca,
    /// Probabilistic synchronous.
    Pca,
    /// Asynchronous, rate-1 Poisson clocks.
    Ips,
}

/// Every rule in the catalogue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Identity,
    Traffic,
    Gkl,
    Kari,
    MajorityTraffic { alpha: f64 },
    Fuks { p_copy: f64 },
    TwoTape,
    Toom,
    ToomIps,
    Maj5,
    Glauber,
    Maj5Tree,
    Tree4,
    Tree3,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The names accepted by [`Rule::from_name`].
pub const RULE_NAMES: &[&str] = &[
    "identity",
    "traffic",
    "gkl",
    "kari",
    "majority_traffic",
    "fuks",
    "two_tape",
    "toom",
    "toom_ips",
    "maj5",
    "glauber",
    "maj5_tree",
    "tree4",
    "tree3",
];

impl Rule {
    /// Looks a rule up by name. `majority_traffic` takes `alpha` (default
    /// 0.1), `fuks` takes `p_copy` (default 0.1); other keys are rejected.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Rule, RuleError> {
        let rule = match name {
            "identity" => Rule::Identity,
            "traffic" => Rule::Traffic,
            "gkl" => Rule::Gkl,
            "kari" => Rule::Kari,
            "majority_traffic" => Rule::MajorityTraffic {
                alpha: params.get("alpha").copied().unwrap_or(0.1),
            },
            "fuks" => Rule::Fuks {
                p_copy: params.get("p_copy").copied().unwrap_or(0.1),
            },
            "two_tape" => Rule::TwoTape,
            "toom" => Rule::Toom,
            "toom_ips" => Rule::ToomIps,
            "maj5" => Rule::Maj5,
            "glauber" => Rule::Glauber,
            "maj5_tree" => Rule::Maj5Tree,
            "tree4" => Rule::Tree4,
            "tree3" => Rule::Tree3,
            other => return Err(RuleError::UnknownRule(other.to_string())),
        };
        let allowed = rule.parameter_names();
        if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(RuleError::UnknownParameter {
                rule: rule.name(),
                key: key.clone(),
            });
        }
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        match *self {
            Rule::MajorityTraffic { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(RuleError::ParameterRange {
                    key: "alpha",
                    value: alpha,
                    range: "0 < alpha < 1",
                })
            }
            Rule::Fuks { p_copy } if !(p_copy > 0.0 && p_copy < 0.5) => {
                Err(RuleError::ParameterRange {
                    key: "p_copy",
                    value: p_copy,
                    range: "0 < p_copy < 1/2",
                })
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Rule::Identity => "identity",
            Rule::Traffic => "traffic",
            Rule::Gkl => "gkl",
            Rule::Kari => "kari",
            Rule::MajorityTraffic { .. } => "majority_traffic",
            Rule::Fuks { .. } => "fuks",
            Rule::TwoTape => "two_tape",
            Rule::Toom => "toom",
            Rule::ToomIps => "toom_ips",
            Rule::Maj5 => "maj5",
            Rule::Glauber => "glauber",
            Rule::Maj5Tree => "maj5_tree",
            Rule::Tree4 => "tree4",
            Rule::Tree3 => "tree3",
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Rule::MajorityTraffic { .. } => &["alpha"],
            Rule::Fuks { .. } => &["p_copy"],
            _ => &[],
        }
    }

    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match *self {
            Rule::MajorityTraffic { alpha } => {
                out.insert("alpha".to_string(), alpha);
            }
            Rule::Fuks { p_copy } => {
                out.insert("p_copy".to_string(), p_copy);
            }
            _ => {}
        }
        out
    }

    pub fn mode(&self) -> Mode {
        match self {
            Rule::MajorityTraffic { .. } | Rule::Fuks { .. } => Mode::Pca,
            Rule::ToomIps | Rule::Glauber => Mode::Ips,
            _ => Mode::Ca,
        }
    }

    /// Uniform draws consumed per cell update.
    pub fn coins_per_update(&self) -> usize {
        match self {
            Rule::MajorityTraffic { .. } | Rule::Fuks { .. } | Rule::Glauber => 1,
            _ => 0,
        }
    }

    pub fn tapes(&self) -> usize {
        match self {
            Rule::TwoTape => 2,
            _ => 1,
        }
    }

    /// Offsets read by the local function, in window order.
    pub fn neighborhood(&self) -> Vec<Offset> {
        let ring = |v: &[i64]| v.iter().map(|&d| Offset::Ring(d)).collect();
        let lattice = |v: &[(i64, i64)]| v.iter().map(|&(a, b)| Offset::Lattice(a, b)).collect();
        let words = |v: &[&str]| v.iter().map(|w| Offset::word(w)).collect();
        match self {
            Rule::Identity => ring(&[0]),
            Rule::Traffic | Rule::MajorityTraffic { .. } | Rule::Fuks { .. } | Rule::TwoTape => {
                ring(&[-1, 0, 1])
            }
            Rule::Gkl => ring(&[-3, -1, 0, 1, 3]),
            Rule::Kari => ring(&[-3, -2, -1, 0, 1, 2, 3]),
            Rule::Toom => lattice(&[(0, 0), (0, 1), (1, 0)]),
            Rule::ToomIps => TriangularWindow::offsets(),
            Rule::Maj5 => lattice(&[(0, 0), (0, 1), (1, 0), (0, -1), (-1, 0)]),
            Rule::Glauber => lattice(&[(0, 1), (1, 0), (0, -1), (-1, 0)]),
            Rule::Maj5Tree => words(&["1", "a", "b", "a⁻¹", "b⁻¹"]),
            Rule::Tree4 => words(&["a", "ab", "ab⁻¹"]),
            Rule::Tree3 => words(&["ab", "ac", "acbc"]),
        }
    }

    /// Half-width of a ring neighbourhood.
    pub fn ring_radius(&self) -> Option<usize> {
        self.neighborhood()
            .iter()
            .map(|o| match o {
                Offset::Ring(d) => Some(d.unsigned_abs() as usize),
                _ => None,
            })
            .try_fold(0usize, |acc, r| r.map(|r| acc.max(r)))
    }

    /// Applies the local function to a window laid out as [`Rule::neighborhood`].
    /// Kari is evaluated through its folded radius-3 form.
    #[inline]
    pub fn apply(&self, w: &[Symbol], coin: f64) -> Symbol {
        match *self {
            Rule::Identity => w[0],
            Rule::Traffic => traf(w[0], w[1], w[2]),
            Rule::Gkl => gkl_local(w[0], w[1], w[2], w[3], w[4]),
            Rule::Kari => kari_local(&[w[0], w[1], w[2], w[3], w[4], w[5], w[6]]),
            Rule::MajorityTraffic { alpha } => majority_traffic_local(w[0], w[1], w[2], alpha, coin),
            Rule::Fuks { p_copy } => fuks_local(w[0], w[1], w[2], p_copy, coin),
            Rule::TwoTape => two_tape_local(w[0], w[1], w[2]),
            Rule::Toom => toom_local(w[0], w[1], w[2]),
            Rule::ToomIps => toom_ips_local(&TriangularWindow::from_slice(w)),
            Rule::Maj5 | Rule::Maj5Tree => maj5(w[0], w[1], w[2], w[3], w[4]),
            Rule::Glauber => glauber4(w[0], w[1], w[2], w[3], coin),
            Rule::Tree4 => tree4_local(w[0], w[1], w[2]),
            Rule::Tree3 => tree3_local(w[0], w[1], w[2]),
        }
    }

    /// Checks that the rule's offsets make sense on `topology`.
    pub fn check_topology(&self, topology: &Topology) -> Result<(), RuleError> {
        let base = match topology {
            Topology::Product { base, .. } => base.as_ref(),
            other => other,
        };
        let ok = match self {
            Rule::Identity
            | Rule::Traffic
            | Rule::Gkl
            | Rule::MajorityTraffic { .. }
            | Rule::Fuks { .. }
            | Rule::TwoTape => matches!(base, Topology::Ring { .. }),
            Rule::Kari => match base {
                Topology::Ring { n } if matches!(topology, Topology::Ring { .. }) => {
                    if *n < 4 {
                        return Err(RuleError::KariRing(*n));
                    }
                    true
                }
                _ => false,
            },
            Rule::Toom | Rule::ToomIps | Rule::Maj5 | Rule::Glauber => {
                matches!(base, Topology::Torus { .. })
            }
            Rule::Maj5Tree | Rule::Tree4 => matches!(
                topology.as_tree().map(|t| t.family()),
                Some(TreeFamily::Free { generators }) if generators >= 2
            ),
            Rule::Tree3 => matches!(
                topology.as_tree().map(|t| t.family()),
                Some(TreeFamily::Involutions { generators }) if generators >= 3
            ),
        };
        if ok {
            Ok(())
        } else {
            Err(RuleError::Topology {
                rule: self.name(),
                topology: topology.kind_name(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn majority_values() {
        assert_eq!(maj3(0, 0, 1), 0);
        assert_eq!(maj3(1, 1, 0), 1);
        assert_eq!(maj3(0, 0, 0), 0);
    }

    #[test]
    fn traffic_table() {
        // (x, y, z) -> traf as printed for rule 184
        let table = [
            ((1, 1, 1), 1),
            ((1, 1, 0), 0),
            ((1, 0, 1), 1),
            ((1, 0, 0), 1),
            ((0, 1, 1), 1),
            ((0, 1, 0), 0),
            ((0, 0, 1), 0),
            ((0, 0, 0), 0),
        ];
        for ((x, y, z), out) in table {
            assert_eq!(traf(x, y, z), out, "traf({x},{y},{z})");
            let idx = (x << 2) | (y << 1) | z;
            assert_eq!((184u8 >> idx) & 1, out);
        }
    }

    #[test]
    fn toom_cases() {
        assert_eq!(toom_local(0, 1, 1), 1);
        assert_eq!(toom_local(0, 0, 0), 0);
        assert_eq!(toom_local(1, 0, 0), 0);
    }

    #[test]
    fn glauber_ties() {
        assert_eq!(glauber4(1, 1, 1, 0, 0.1), 1);
        assert_eq!(glauber4(0, 0, 0, 0, 0.9), 0);
        assert_eq!(glauber4(1, 1, 0, 0, 0.7), 1);
        assert_eq!(glauber4(1, 1, 0, 0, 0.2), 0);
    }

    #[test]
    fn toom_ips_first_guard() {
        let w = TriangularWindow {
            centre: 1,
            north: 0,
            east: 0,
            south: 0,
            west: 1,
            south_east: 1,
            north_west: 1,
        };
        assert!(w.is_guarded());
        assert_eq!(toom_ips_local(&w), 1);
        for v in 0..2 {
            let all = TriangularWindow::from_bits(if v == 1 { 0x7f } else { 0 });
            assert_eq!(toom_ips_local(&all), v);
        }
    }

    #[test]
    fn gkl_cases() {
        assert_eq!(gkl_local(1, 1, 1, 1, 1), 1);
        // a 1 looks right, a 0 looks left
        assert_eq!(gkl_local(1, 1, 0, 0, 0), 1);
        assert_eq!(gkl_local(0, 0, 1, 1, 0), 1);
        assert_eq!(gkl_local(1, 1, 1, 0, 0), 0);
    }

    #[test]
    fn majority_traffic_branches() {
        for coin in [0.0, 0.05, 0.5, 0.99] {
            assert_eq!(majority_traffic_local(1, 1, 1, 0.1, coin), 1);
            assert_eq!(majority_traffic_local(1, 0, 1, 0.1, coin), 1);
        }
        assert_eq!(majority_traffic_local(1, 1, 0, 0.3, 0.1), 1);
        assert_eq!(majority_traffic_local(1, 1, 0, 0.3, 0.5), 0);
    }

    #[test]
    fn fuks_branches() {
        assert_eq!(fuks_local(1, 0, 0, 0.1, 0.05), 1);
        assert_eq!(fuks_local(0, 0, 1, 0.1, 0.15), 1);
        assert_eq!(fuks_local(1, 0, 1, 0.1, 0.5), 0);
        for coin in [0.0, 0.15, 0.9] {
            assert_eq!(fuks_local(1, 1, 1, 0.2, coin), 1);
            assert_eq!(fuks_local(0, 0, 0, 0.2, coin), 0);
        }
    }

    #[test]
    fn two_tape_cases() {
        for y2 in 0..2 {
            for z in 0..4 {
                let out = two_tape_local(1 | (y2 << 1), 1, z);
                assert_eq!(out >> 1, 1);
            }
        }
        // x1 = 0, y1 = 1, y2 = 0 keeps the second tape
        assert_eq!(two_tape_local(0, 1, 0) >> 1, 0);
        assert_eq!(two_tape_local(0, 1 | 2, 0) >> 1, 1);
    }

    #[test]
    fn kari_fixed_and_alternating() {
        let ones = Configuration::ring_from_str("11111111").unwrap();
        assert_eq!(kari_step(&ones).unwrap(), ones);
        let alt = Configuration::ring_from_str("01010101").unwrap();
        let expected = Configuration::ring_from_str("10101010").unwrap();
        assert_eq!(kari_step(&alt).unwrap(), expected);
        let small = Configuration::ring_from_str("010").unwrap();
        assert_eq!(kari_step(&small), Err(RuleError::KariRing(3)));
    }

    #[test]
    fn registry() {
        let mut params = BTreeMap::new();
        for name in RULE_NAMES {
            let rule = Rule::from_name(name, &BTreeMap::new()).unwrap();
            assert_eq!(rule.name(), *name);
            assert_eq!(rule.coins_per_update() == 0, rule.mode() == Mode::Ca || rule == Rule::ToomIps);
        }
        params.insert("alpha".to_string(), 1.5);
        assert!(matches!(
            Rule::from_name("majority_traffic", &params),
            Err(RuleError::ParameterRange { key: "alpha", .. })
        ));
        assert!(matches!(
            Rule::from_name("gkl", &params),
            Err(RuleError::UnknownParameter { .. })
        ));
        params.clear();
        params.insert("p_copy".to_string(), 0.5);
        assert!(Rule::from_name("fuks", &params).is_err());
        assert!(Rule::from_name("rule30", &params).is_err());
    }

    #[test]
    fn topology_checks() {
        let ring = Topology::ring(9).unwrap();
        let torus = Topology::torus(4, 4).unwrap();
        assert!(Rule::Gkl.check_topology(&ring).is_ok());
        assert!(Rule::Gkl.check_topology(&torus).is_err());
        assert!(Rule::Toom.check_topology(&torus).is_ok());
        let lifted = Topology::lift_to_product(torus, 3).unwrap();
        assert!(Rule::Toom.check_topology(&lifted).is_ok());
        let t4 = Topology::tree(
            TreeFamily::free(4).unwrap(),
            2,
            crate::topology::BoundaryPolicy::Frozen(0),
        )
        .unwrap();
        assert!(Rule::Tree4.check_topology(&t4).is_ok());
        assert!(Rule::Tree3.check_topology(&t4).is_err());
        let _ = Arc::new(ring);
    }
}
