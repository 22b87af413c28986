//! Configurations: one symbol per cell, Bernoulli sampling and counting
//! statistics.
//!
//! Single-tape configurations hold `0`/`1`. Two-tape configurations pack a
//! pair into one byte: bit 0 is the first tape, bit 1 the second.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::topology::Topology;

pub type Symbol = u8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("expected {expected} symbols, got {got}")]
    Length { expected: usize, got: usize },
    #[error("symbol {symbol} at cell {cell} is outside the alphabet")]
    Symbol { cell: usize, symbol: u8 },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("pattern word must not be empty")]
    EmptyWord,
    #[error("pattern of length {len} exceeds {cells} cells")]
    WordTooLong { len: usize, cells: usize },
    #[error("operation needs a ring topology, got {0}")]
    NotRing(&'static str),
    #[error("tape {0} does not exist")]
    Tape(usize),
    #[error("cannot have {ones} ones on {cells} cells")]
    OnesCount { ones: usize, cells: usize },
    #[error("invalid character {0:?} in configuration text")]
    Parse(char),
    #[error("expected {expected} tape lines, got {got}")]
    TapeLines { expected: usize, got: usize },
}

#[derive(Clone, PartialEq, Eq)]
pub struct Configuration {
    topology: Arc<Topology>,
    symbols: Vec<Symbol>,
    tapes: usize,
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Configuration")
            .field("topology", &self.topology.kind_name())
            .field("tapes", &self.tapes)
            .field("lines", &self.to_lines())
            .finish()
    }
}

impl Configuration {
    pub fn new(topology: Arc<Topology>, symbols: Vec<Symbol>) -> Result<Self, ConfigError> {
        Self::with_tapes(topology, symbols, 1)
    }

    pub fn two_tape(
        topology: Arc<Topology>,
        first: &[Symbol],
        second: &[Symbol],
    ) -> Result<Self, ConfigError> {
        let cells = topology.cell_count();
        for tape in [first, second] {
            if tape.len() != cells {
                return Err(ConfigError::Length {
                    expected: cells,
                    got: tape.len(),
                });
            }
        }
        let symbols = first
            .iter()
            .zip(second)
            .map(|(&a, &b)| a | (b << 1))
            .collect();
        Self::with_tapes(topology, symbols, 2)
    }

    fn with_tapes(
        topology: Arc<Topology>,
        symbols: Vec<Symbol>,
        tapes: usize,
    ) -> Result<Self, ConfigError> {
        let expected = topology.cell_count();
        if symbols.len() != expected {
            return Err(ConfigError::Length {
                expected,
                got: symbols.len(),
            });
        }
        let limit = 1u8 << tapes;
        if let Some((cell, &symbol)) = symbols.iter().enumerate().find(|(_, &s)| s >= limit) {
            return Err(ConfigError::Symbol { cell, symbol });
        }
        Ok(Configuration {
            topology,
            symbols,
            tapes,
        })
    }

    pub fn uniform(topology: Arc<Topology>, symbol: Symbol) -> Self {
        let n = topology.cell_count();
        Configuration {
            topology,
            symbols: vec![symbol & 1; n],
            tapes: 1,
        }
    }

    /// I.i.d. Bernoulli(p) symbols drawn in cell-id order.
    pub fn sample_bernoulli<R: Rng + ?Sized>(
        topology: Arc<Topology>,
        p: f64,
        rng: &mut R,
    ) -> Result<Self, ConfigError> {
        check_probability(p)?;
        let symbols = (0..topology.cell_count())
            .map(|_| bernoulli(rng, p))
            .collect();
        Ok(Configuration {
            topology,
            symbols,
            tapes: 1,
        })
    }

    pub fn sample_bernoulli_seeded(
        topology: Arc<Topology>,
        p: f64,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        Self::sample_bernoulli(topology, p, &mut crate::seeding::replica_rng(seed, 0))
    }

    /// First tape Bernoulli(p), second tape Bernoulli(`second_p`), drawn cell
    /// by cell (first then second).
    pub fn sample_two_tape<R: Rng + ?Sized>(
        topology: Arc<Topology>,
        p: f64,
        second_p: f64,
        rng: &mut R,
    ) -> Result<Self, ConfigError> {
        check_probability(p)?;
        check_probability(second_p)?;
        let symbols = (0..topology.cell_count())
            .map(|_| {
                let a = bernoulli(rng, p);
                let b = bernoulli(rng, second_p);
                a | (b << 1)
            })
            .collect();
        Ok(Configuration {
            topology,
            symbols,
            tapes: 2,
        })
    }

    /// Uniformly random configuration with exactly `ones` ones.
    pub fn with_exact_ones<R: Rng + ?Sized>(
        topology: Arc<Topology>,
        ones: usize,
        rng: &mut R,
    ) -> Result<Self, ConfigError> {
        let cells = topology.cell_count();
        if ones > cells {
            return Err(ConfigError::OnesCount { ones, cells });
        }
        let mut symbols = vec![0u8; cells];
        symbols[..ones].fill(1);
        symbols.shuffle(rng);
        Ok(Configuration {
            topology,
            symbols,
            tapes: 1,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn tapes(&self) -> usize {
        self.tapes
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, cell: usize) -> Symbol {
        self.symbols[cell]
    }

    pub fn set(&mut self, cell: usize, symbol: Symbol) {
        assert!(symbol < (1 << self.tapes), "symbol outside alphabet");
        self.symbols[cell] = symbol;
    }

    /// Projection onto one tape (0-based).
    pub fn tape(&self, tape: usize) -> Result<Vec<Symbol>, ConfigError> {
        if tape >= self.tapes {
            return Err(ConfigError::Tape(tape));
        }
        Ok(self.symbols.iter().map(|&s| (s >> tape) & 1).collect())
    }

    /// Counts on the first tape.
    pub fn density(&self) -> DensityStats {
        DensityStats::count(self.symbols.iter().map(|&s| s & 1))
    }

    pub fn tape_density(&self, tape: usize) -> Result<DensityStats, ConfigError> {
        if tape >= self.tapes {
            return Err(ConfigError::Tape(tape));
        }
        Ok(DensityStats::count(
            self.symbols.iter().map(|&s| (s >> tape) & 1),
        ))
    }

    /// Occurrences of `word` on the first tape of a ring, starting at every
    /// position (wrapping).
    pub fn count_pattern(&self, word: &[Symbol]) -> Result<PatternCount, ConfigError> {
        let n = match *self.topology {
            Topology::Ring { n } => n,
            ref other => return Err(ConfigError::NotRing(other.kind_name())),
        };
        if word.is_empty() {
            return Err(ConfigError::EmptyWord);
        }
        if word.len() > n {
            return Err(ConfigError::WordTooLong {
                len: word.len(),
                cells: n,
            });
        }
        let count = (0..n)
            .filter(|&k| {
                word.iter()
                    .enumerate()
                    .all(|(i, &w)| self.symbols[(k + i) % n] & 1 == w)
            })
            .count();
        Ok(PatternCount { count, cells: n })
    }

    /// Uniformity of the whole configuration; a two-tape configuration is
    /// uniform only when both tapes agree everywhere.
    pub fn is_uniform(&self) -> Uniformity {
        let full = (1u8 << self.tapes) - 1;
        uniformity_of(&self.symbols, full)
    }

    pub fn tape_uniformity(&self, tape: usize) -> Result<Uniformity, ConfigError> {
        Ok(uniformity_of(&self.tape(tape)?, 1))
    }

    /// One ASCII line of `0`/`1` per tape.
    pub fn to_lines(&self) -> Vec<String> {
        (0..self.tapes)
            .map(|t| {
                self.symbols
                    .iter()
                    .map(|&s| if (s >> t) & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }

    pub fn from_lines(topology: Arc<Topology>, lines: &[&str]) -> Result<Self, ConfigError> {
        let tapes: Vec<Vec<u8>> = lines
            .iter()
            .map(|l| {
                l.trim()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        other => Err(ConfigError::Parse(other)),
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        match tapes.as_slice() {
            [one] => Self::new(topology, one.clone()),
            [a, b] => Self::two_tape(topology, a, b),
            _ => Err(ConfigError::TapeLines {
                expected: 1,
                got: tapes.len(),
            }),
        }
    }

    /// Parses a single-tape ring configuration, e.g. `"0101"`.
    pub fn ring_from_str(text: &str) -> Result<Self, ConfigError> {
        let n = text.trim().chars().count();
        let topology = Topology::ring(n).map_err(|_| ConfigError::Length {
            expected: 1,
            got: 0,
        })?;
        Self::from_lines(Arc::new(topology), &[text])
    }
}

fn uniformity_of(symbols: &[Symbol], full: u8) -> Uniformity {
    if symbols.iter().all(|&s| s == 0) {
        Uniformity::AllZeros
    } else if symbols.iter().all(|&s| s == full) {
        Uniformity::AllOnes
    } else {
        Uniformity::Mixed
    }
}

fn check_probability(p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError::Probability(p))
    }
}

#[inline]
pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> Symbol {
    (rng.random::<f64>() < p) as Symbol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Uniformity {
    AllZeros,
    AllOnes,
    Mixed,
}

impl Uniformity {
    pub fn symbol(self) -> Option<Symbol> {
        match self {
            Uniformity::AllZeros => Some(0),
            Uniformity::AllOnes => Some(1),
            Uniformity::Mixed => None,
        }
    }
}

/// Exact ones/zeros counts. The density `ones / (ones + zeros)` is kept as
/// the pair of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DensityStats {
    pub ones: usize,
    pub zeros: usize,
}

impl DensityStats {
    fn count(it: impl Iterator<Item = Symbol>) -> Self {
        let (mut ones, mut zeros) = (0, 0);
        for s in it {
            if s == 1 {
                ones += 1;
            } else {
                zeros += 1;
            }
        }
        DensityStats { ones, zeros }
    }

    pub fn cells(&self) -> usize {
        self.ones + self.zeros
    }

    pub fn density(&self) -> f64 {
        self.ones as f64 / self.cells() as f64
    }

    /// The strict majority symbol, `None` on an exact tie.
    pub fn majority(&self) -> Option<Symbol> {
        match self.ones.cmp(&self.zeros) {
            std::cmp::Ordering::Greater => Some(1),
            std::cmp::Ordering::Less => Some(0),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternCount {
    pub count: usize,
    pub cells: usize,
}

impl PatternCount {
    /// Empirical cylinder measure.
    pub fn frequency(&self) -> f64 {
        self.count as f64 / self.cells as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Arc<Topology> {
        Arc::new(Topology::ring(n).unwrap())
    }

    #[test]
    fn degenerate_bernoulli() {
        let t = Arc::new(Topology::torus(7, 5).unwrap());
        let zeros = Configuration::sample_bernoulli_seeded(t.clone(), 0.0, 1).unwrap();
        assert_eq!(zeros.is_uniform(), Uniformity::AllZeros);
        let ones = Configuration::sample_bernoulli_seeded(t.clone(), 1.0, 1).unwrap();
        assert_eq!(ones.is_uniform(), Uniformity::AllOnes);
        assert!(Configuration::sample_bernoulli_seeded(t, 1.5, 1).is_err());
    }

    #[test]
    fn same_seed_same_sample() {
        let t = ring(1000);
        let a = Configuration::sample_bernoulli_seeded(t.clone(), 0.3, 9).unwrap();
        let b = Configuration::sample_bernoulli_seeded(t.clone(), 0.3, 9).unwrap();
        let c = Configuration::sample_bernoulli_seeded(t, 0.3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn density_counts() {
        let z = Configuration::uniform(ring(6), 0);
        assert_eq!(z.density().ones, 0);
        assert_eq!(z.density().density(), 0.0);
        let x = Configuration::ring_from_str("0101").unwrap();
        assert_eq!(x.density().density(), 0.5);
        assert_eq!(x.density().majority(), None);
        let y = Configuration::ring_from_str("011").unwrap();
        let d = y.density();
        assert_eq!((d.ones, d.zeros), (2, 1));
        assert_eq!(d.majority(), Some(1));
    }

    #[test]
    fn pattern_counts() {
        let x = Configuration::ring_from_str("0101").unwrap();
        let c = x.count_pattern(&[0, 1]).unwrap();
        assert_eq!(c.count, 2);
        assert_eq!(c.frequency(), 0.5);
        let ones = Configuration::ring_from_str("1111").unwrap();
        assert_eq!(ones.count_pattern(&[0, 0]).unwrap().count, 0);
        assert_eq!(ones.count_pattern(&[]), Err(ConfigError::EmptyWord));
        assert!(ones.count_pattern(&[1; 5]).is_err());
    }

    #[test]
    fn uniform_verdicts() {
        assert_eq!(
            Configuration::ring_from_str("000").unwrap().is_uniform(),
            Uniformity::AllZeros
        );
        assert_eq!(
            Configuration::ring_from_str("111").unwrap().is_uniform(),
            Uniformity::AllOnes
        );
        assert_eq!(
            Configuration::ring_from_str("0101").unwrap().is_uniform(),
            Uniformity::Mixed
        );
    }

    #[test]
    fn two_tape_lines() {
        let t = ring(4);
        let c = Configuration::two_tape(t.clone(), &[1, 0, 1, 1], &[0, 0, 1, 0]).unwrap();
        assert_eq!(c.to_lines(), vec!["1011".to_string(), "0010".to_string()]);
        let back = Configuration::from_lines(t, &["1011", "0010"]).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.tape_density(1).unwrap().ones, 1);
        assert!(c.tape(2).is_err());
    }

    #[test]
    fn exact_ones() {
        let mut rng = crate::seeding::replica_rng(3, 0);
        for k in [0, 1, 17, 40] {
            let c = Configuration::with_exact_ones(ring(40), k, &mut rng).unwrap();
            assert_eq!(c.density().ones, k);
        }
        assert!(Configuration::with_exact_ones(ring(4), 5, &mut rng).is_err());
    }

    #[test]
    fn rejects_bad_symbols() {
        assert!(matches!(
            Configuration::new(ring(3), vec![0, 2, 1]),
            Err(ConfigError::Symbol { cell: 1, .. })
        ));
        assert!(Configuration::new(ring(3), vec![0, 1]).is_err());
    }
}
