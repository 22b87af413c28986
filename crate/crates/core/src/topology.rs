//! Finite cell spaces standing in for the infinite groups: rings for `Z`,
//! tori for `Z^2`, depth-truncated Cayley trees for `T_n` / `T'_2k`, and
//! layered products built from a ring or torus base.
//!
//! Every cell has a dense integer id in `[0, cell_count)`. Torus cells are
//! stored row-major with `i` the east axis and `j` the north axis, so
//! `id = j * width + i`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CellId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("{what} must be at least {min}, got {got}")]
    TooSmall {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("cell {cell} out of range ({count} cells)")]
    CellOutOfRange { cell: CellId, count: usize },
    #[error("offset {offset} does not apply to a {kind} topology")]
    OffsetKind { offset: String, kind: &'static str },
    #[error("word {0} is not reduced")]
    Unreduced(String),
    #[error("letter {letter} is not a generator of this tree")]
    UnknownGenerator { letter: String },
    #[error("word {0} lies beyond the truncation depth")]
    BeyondDepth(String),
    #[error("product layers require a ring or torus base")]
    ProductBase,
    #[error("degree {0} is invalid for this tree family")]
    Degree(usize),
    #[error("boundary probability {0} is outside [0, 1]")]
    BoundaryProbability(f64),
    #[error("cannot parse tree word {0:?}")]
    Parse(String),
    #[error("too many cells for a neighbour table")]
    TooLarge,
}

/// Group presentation of a regular tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeFamily {
    /// `T_n = <a_1..a_n | a_i^2 = 1>`.
    Involutions { generators: u8 },
    /// `T'_2k`, the free group on `k` generators.
    Free { generators: u8 },
}

impl TreeFamily {
    /// `T_n`, `n >= 3`.
    pub fn involutions(degree: usize) -> Result<Self, TopologyError> {
        if !(3..=26).contains(&degree) {
            return Err(TopologyError::Degree(degree));
        }
        Ok(TreeFamily::Involutions {
            generators: degree as u8,
        })
    }

    /// `T'_2k` from its degree `2k`.
    pub fn free(degree: usize) -> Result<Self, TopologyError> {
        if degree < 2 || !degree.is_multiple_of(2) || degree > 52 {
            return Err(TopologyError::Degree(degree));
        }
        Ok(TreeFamily::Free {
            generators: (degree / 2) as u8,
        })
    }

    /// Number of neighbours of every node in the infinite tree.
    pub fn degree(&self) -> usize {
        match *self {
            TreeFamily::Involutions { generators } => generators as usize,
            TreeFamily::Free { generators } => 2 * generators as usize,
        }
    }

    /// All single-letter steps in canonical order (`a, a⁻¹, b, b⁻¹, ...`).
    pub fn alphabet(&self) -> Vec<Letter> {
        match *self {
            TreeFamily::Involutions { generators } => (0..generators)
                .map(|g| Letter {
                    generator: g,
                    inverse: false,
                })
                .collect(),
            TreeFamily::Free { generators } => (0..generators)
                .flat_map(|g| {
                    [
                        Letter {
                            generator: g,
                            inverse: false,
                        },
                        Letter {
                            generator: g,
                            inverse: true,
                        },
                    ]
                })
                .collect(),
        }
    }

    fn generator_count(&self) -> u8 {
        match *self {
            TreeFamily::Involutions { generators } | TreeFamily::Free { generators } => generators,
        }
    }

    fn normalize(&self, letter: Letter) -> Result<Letter, TopologyError> {
        if letter.generator >= self.generator_count() {
            return Err(TopologyError::UnknownGenerator {
                letter: letter.to_string(),
            });
        }
        Ok(match self {
            TreeFamily::Involutions { .. } => Letter {
                generator: letter.generator,
                inverse: false,
            },
            TreeFamily::Free { .. } => letter,
        })
    }

    fn inverse(&self, letter: Letter) -> Letter {
        match self {
            TreeFamily::Involutions { .. } => letter,
            TreeFamily::Free { .. } => Letter {
                generator: letter.generator,
                inverse: !letter.inverse,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub generator: u8,
    pub inverse: bool,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = (b'a' + self.generator) as char;
        if self.inverse {
            write!(f, "{c}⁻¹")
        } else {
            write!(f, "{c}")
        }
    }
}

/// A word over the tree generators. Node words are always stored reduced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeWord(Vec<Letter>);

impl TreeWord {
    pub fn identity() -> Self {
        TreeWord(Vec::new())
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        TreeWord(letters)
    }

    /// Parses `""`, `"1"`, `"ab"`, `"ab⁻¹"`, `"ab^-1"`. An upper-case letter is
    /// shorthand for the inverse of its lower-case generator.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let text = text.trim();
        if text.is_empty() || text == "1" || text == "e" {
            return Ok(Self::identity());
        }
        let mut letters: Vec<Letter> = Vec::new();
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            rest = &rest[c.len_utf8()..];
            if rest.starts_with("⁻¹") || rest.starts_with("^-1") {
                let skip = if rest.starts_with("⁻¹") {
                    "⁻¹".len()
                } else {
                    3
                };
                rest = &rest[skip..];
                if !c.is_ascii_lowercase() {
                    return Err(TopologyError::Parse(text.to_string()));
                }
                letters.push(Letter {
                    generator: c as u8 - b'a',
                    inverse: true,
                });
            } else if c.is_ascii_lowercase() {
                letters.push(Letter {
                    generator: c as u8 - b'a',
                    inverse: false,
                });
            } else if c.is_ascii_uppercase() {
                letters.push(Letter {
                    generator: c as u8 - b'A',
                    inverse: true,
                });
            } else {
                return Err(TopologyError::Parse(text.to_string()));
            }
        }
        Ok(TreeWord(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self, family: TreeFamily) -> bool {
        self.0
            .windows(2)
            .all(|w| family.inverse(w[0]) != w[1])
    }

    /// Free reduction (and `a a = 1` for involution trees).
    pub fn reduce(&self, family: TreeFamily) -> Result<TreeWord, TopologyError> {
        let mut out: Vec<Letter> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            let l = family.normalize(l)?;
            if out.last().is_some_and(|&last| family.inverse(last) == l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Ok(TreeWord(out))
    }

    /// `self · other`, reduced.
    pub fn mul(&self, other: &TreeWord, family: TreeFamily) -> Result<TreeWord, TopologyError> {
        let mut joined = self.0.clone();
        joined.extend_from_slice(&other.0);
        TreeWord(joined).reduce(family)
    }
}

impl fmt::Display for TreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// What a tree neighbour beyond the truncation depth reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// A constant symbol.
    Frozen(u8),
    /// I.i.d. Bernoulli(p) symbols drawn once when a run starts, then frozen.
    IidBernoulli(f64),
}

#[derive(Debug)]
pub struct Tree {
    family: TreeFamily,
    depth: usize,
    boundary: BoundaryPolicy,
    words: Vec<TreeWord>,
    index: HashMap<TreeWord, CellId>,
}

impl Tree {
    pub fn family(&self) -> TreeFamily {
        self.family
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn word(&self, cell: CellId) -> &TreeWord {
        &self.words[cell]
    }

    /// Node id of a reduced word; unreduced words are rejected.
    pub fn node(&self, word: &TreeWord) -> Result<CellId, TopologyError> {
        let normalized = TreeWord(
            word.0
                .iter()
                .map(|&l| self.family.normalize(l))
                .collect::<Result<_, _>>()?,
        );
        if !normalized.is_reduced(self.family) {
            return Err(TopologyError::Unreduced(word.to_string()));
        }
        self.index
            .get(&normalized)
            .copied()
            .ok_or_else(|| TopologyError::BeyondDepth(word.to_string()))
    }
}

/// Where a neighbour lookup lands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Neighbor {
    Cell(CellId),
    /// Beyond a truncated tree; carries the reduced word that was requested.
    Boundary(TreeWord),
}

/// A displacement in the group: an integer shift on rings, a vector on tori,
/// a word on trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Offset {
    Ring(i64),
    Lattice(i64, i64),
    Word(TreeWord),
}

impl Offset {
    pub fn word(text: &str) -> Self {
        Offset::Word(TreeWord::parse(text).expect("static tree word"))
    }

    pub fn negated(&self) -> Offset {
        match self {
            Offset::Ring(v) => Offset::Ring(-v),
            Offset::Lattice(a, b) => Offset::Lattice(-a, -b),
            Offset::Word(w) => Offset::Word(TreeWord(
                w.0.iter()
                    .rev()
                    .map(|l| Letter {
                        generator: l.generator,
                        inverse: !l.inverse,
                    })
                    .collect(),
            )),
        }
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offset::Ring(v) => write!(f, "{v:+}"),
            Offset::Lattice(a, b) => write!(f, "({a},{b})"),
            Offset::Word(w) => write!(f, "{w}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Topology {
    Ring { n: usize },
    Torus { width: usize, height: usize },
    Tree(Arc<Tree>),
    Product { base: Box<Topology>, layers: usize },
}

impl Topology {
    pub fn ring(n: usize) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::TooSmall {
                what: "ring length",
                min: 1,
                got: n,
            });
        }
        Ok(Topology::Ring { n })
    }

    pub fn torus(width: usize, height: usize) -> Result<Self, TopologyError> {
        for (what, v) in [("torus width", width), ("torus height", height)] {
            if v == 0 {
                return Err(TopologyError::TooSmall { what, min: 1, got: v });
            }
        }
        Ok(Topology::Torus { width, height })
    }

    /// Reduced words of length `<= depth`, enumerated breadth-first in
    /// canonical letter order (so the root is cell 0).
    pub fn tree(
        family: TreeFamily,
        depth: usize,
        boundary: BoundaryPolicy,
    ) -> Result<Self, TopologyError> {
        match boundary {
            BoundaryPolicy::Frozen(v) if v > 1 => {
                return Err(TopologyError::BoundaryProbability(v as f64))
            }
            BoundaryPolicy::IidBernoulli(p) if !(0.0..=1.0).contains(&p) => {
                return Err(TopologyError::BoundaryProbability(p))
            }
            _ => {}
        }
        let alphabet = family.alphabet();
        let mut words = vec![TreeWord::identity()];
        let mut start = 0;
        for _ in 0..depth {
            let end = words.len();
            for idx in start..end {
                let last = words[idx].0.last().copied();
                for &l in &alphabet {
                    if last.is_some_and(|last| family.inverse(last) == l) {
                        continue;
                    }
                    let mut next = words[idx].0.clone();
                    next.push(l);
                    words.push(TreeWord(next));
                }
            }
            start = end;
        }
        if words.len() >= (u32::MAX / 2) as usize {
            return Err(TopologyError::TooLarge);
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Topology::Tree(Arc::new(Tree {
            family,
            depth,
            boundary,
            words,
            index,
        })))
    }

    /// `layers` disjoint copies of a ring or torus; neighbourhoods never cross
    /// layers. Cell id is `layer * base_cells + base_id`.
    pub fn lift_to_product(base: Topology, layers: usize) -> Result<Self, TopologyError> {
        if layers == 0 {
            return Err(TopologyError::TooSmall {
                what: "layer count",
                min: 1,
                got: 0,
            });
        }
        match base {
            Topology::Ring { .. } | Topology::Torus { .. } => Ok(Topology::Product {
                base: Box::new(base),
                layers,
            }),
            _ => Err(TopologyError::ProductBase),
        }
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Topology::Ring { n } => *n,
            Topology::Torus { width, height } => width * height,
            Topology::Tree(t) => t.words.len(),
            Topology::Product { base, layers } => base.cell_count() * layers,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Topology::Ring { .. } => "ring",
            Topology::Torus { .. } => "torus",
            Topology::Tree(_) => "tree",
            Topology::Product { .. } => "product",
        }
    }

    pub fn as_tree(&self) -> Option<&Tree> {
        match self {
            Topology::Tree(t) => Some(t),
            _ => None,
        }
    }

    /// `(width, height)` of the underlying lattice, for tori and tori products.
    pub fn torus_dims(&self) -> Option<(usize, usize)> {
        match self {
            Topology::Torus { width, height } => Some((*width, *height)),
            Topology::Product { base, .. } => base.torus_dims(),
            _ => None,
        }
    }

    /// Number of cells in one layer (the whole space when not a product).
    pub fn layer_size(&self) -> usize {
        match self {
            Topology::Product { base, .. } => base.cell_count(),
            other => other.cell_count(),
        }
    }

    pub fn layer_count(&self) -> usize {
        match self {
            Topology::Product { layers, .. } => *layers,
            _ => 1,
        }
    }

    pub fn layer_of(&self, cell: CellId) -> usize {
        cell / self.layer_size()
    }

    /// Torus id of `(i, j)` with periodic wrap.
    pub fn torus_cell(&self, i: i64, j: i64) -> Option<CellId> {
        let (w, h) = self.torus_dims()?;
        let i = i.rem_euclid(w as i64) as usize;
        let j = j.rem_euclid(h as i64) as usize;
        Some(j * w + i)
    }

    /// `(i, j)` of a torus cell (within its layer for products).
    pub fn torus_coords(&self, cell: CellId) -> Option<(usize, usize)> {
        let (w, _) = self.torus_dims()?;
        let local = cell % self.layer_size();
        Some((local % w, local / w))
    }

    pub fn resolve_neighbor(&self, cell: CellId, offset: &Offset) -> Result<Neighbor, TopologyError> {
        let count = self.cell_count();
        if cell >= count {
            return Err(TopologyError::CellOutOfRange { cell, count });
        }
        match (self, offset) {
            (Topology::Ring { n }, Offset::Ring(v)) => {
                let n = *n as i64;
                Ok(Neighbor::Cell((cell as i64 + v).rem_euclid(n) as usize))
            }
            (Topology::Torus { width, height }, Offset::Lattice(di, dj)) => {
                let (w, h) = (*width as i64, *height as i64);
                let i = (cell as i64 % w + di).rem_euclid(w);
                let j = (cell as i64 / w + dj).rem_euclid(h);
                Ok(Neighbor::Cell((j * w + i) as usize))
            }
            (Topology::Product { base, .. }, _) => {
                let size = base.cell_count();
                let layer = cell / size;
                match base.resolve_neighbor(cell % size, offset)? {
                    Neighbor::Cell(c) => Ok(Neighbor::Cell(layer * size + c)),
                    b @ Neighbor::Boundary(_) => Ok(b),
                }
            }
            (Topology::Tree(tree), Offset::Word(step)) => {
                let target = tree.words[cell].mul(step, tree.family)?;
                Ok(match tree.index.get(&target) {
                    Some(&c) => Neighbor::Cell(c),
                    None => Neighbor::Boundary(target),
                })
            }
            _ => Err(TopologyError::OffsetKind {
                offset: offset.to_string(),
                kind: self.kind_name(),
            }),
        }
    }

    /// Resolves `offsets` for every cell. Boundary words are numbered as extra
    /// slots after the last cell, in order of first appearance.
    pub fn neighbor_table(&self, offsets: &[Offset]) -> Result<NeighborTable, TopologyError> {
        let cells = self.cell_count();
        if cells + 1 >= (u32::MAX / 2) as usize {
            return Err(TopologyError::TooLarge);
        }
        let mut entries = Vec::with_capacity(cells * offsets.len());
        let mut slots: HashMap<TreeWord, u32> = HashMap::new();
        let mut boundary_words = Vec::new();
        for cell in 0..cells {
            for off in offsets {
                let e = match self.resolve_neighbor(cell, off)? {
                    Neighbor::Cell(c) => c as u32,
                    Neighbor::Boundary(w) => {
                        let next = (cells + boundary_words.len()) as u32;
                        *slots.entry(w.clone()).or_insert_with(|| {
                            boundary_words.push(w);
                            next
                        })
                    }
                };
                entries.push(e);
            }
        }
        Ok(NeighborTable {
            arity: offsets.len(),
            cells,
            entries,
            boundary_words,
        })
    }

    pub fn spec(&self) -> TopologySpec {
        match self {
            Topology::Ring { n } => TopologySpec::Ring { n: *n },
            Topology::Torus { width, height } => TopologySpec::Torus {
                width: *width,
                height: *height,
            },
            Topology::Tree(t) => TopologySpec::Tree {
                family: match t.family {
                    TreeFamily::Involutions { .. } => TreeFamilyName::Involutions,
                    TreeFamily::Free { .. } => TreeFamilyName::Free,
                },
                degree: t.family.degree(),
                depth: t.depth,
                boundary: match t.boundary {
                    BoundaryPolicy::Frozen(0) => BoundarySpec::Zero,
                    BoundaryPolicy::Frozen(_) => BoundarySpec::One,
                    BoundaryPolicy::IidBernoulli(_) => BoundarySpec::Iid,
                },
            },
            Topology::Product { base, layers } => TopologySpec::Product {
                base: Box::new(base.spec()),
                layers: *layers,
            },
        }
    }
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Topology::Tree(a), Topology::Tree(b)) => {
                Arc::ptr_eq(a, b)
                    || (a.family() == b.family()
                        && a.depth() == b.depth()
                        && a.boundary() == b.boundary())
            }
            _ => self.spec() == other.spec(),
        }
    }
}

impl Eq for Topology {}

/// Neighbour ids for every cell, `arity` entries per cell. Entries at or
/// beyond `cells` are boundary slots.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    arity: usize,
    cells: usize,
    entries: Vec<u32>,
    boundary_words: Vec<TreeWord>,
}

impl NeighborTable {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn row(&self, cell: CellId) -> &[u32] {
        &self.entries[cell * self.arity..(cell + 1) * self.arity]
    }

    pub fn boundary_slots(&self) -> usize {
        self.boundary_words.len()
    }

    pub fn boundary_words(&self) -> &[TreeWord] {
        &self.boundary_words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeFamilyName {
    Involutions,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    Iid,
    Zero,
    One,
}

/// Serializable description of a topology (experiment configs, reports).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Ring {
        n: usize,
    },
    Torus {
        width: usize,
        height: usize,
    },
    Tree {
        family: TreeFamilyName,
        degree: usize,
        depth: usize,
        #[serde(default)]
        boundary: BoundarySpec,
    },
    Product {
        base: Box<TopologySpec>,
        layers: usize,
    },
}

impl TopologySpec {
    /// `p` feeds an i.i.d. tree boundary; other kinds ignore it.
    pub fn build(&self, p: f64) -> Result<Topology, TopologyError> {
        match self {
            TopologySpec::Ring { n } => Topology::ring(*n),
            TopologySpec::Torus { width, height } => Topology::torus(*width, *height),
            TopologySpec::Tree {
                family,
                degree,
                depth,
                boundary,
            } => {
                let fam = match family {
                    TreeFamilyName::Involutions => TreeFamily::involutions(*degree)?,
                    TreeFamilyName::Free => TreeFamily::free(*degree)?,
                };
                let policy = match boundary {
                    BoundarySpec::Iid => BoundaryPolicy::IidBernoulli(p),
                    BoundarySpec::Zero => BoundaryPolicy::Frozen(0),
                    BoundarySpec::One => BoundaryPolicy::Frozen(1),
                };
                Topology::tree(fam, *depth, policy)
            }
            TopologySpec::Product { base, layers } => {
                Topology::lift_to_product(base.build(p)?, *layers)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(n: Neighbor) -> CellId {
        match n {
            Neighbor::Cell(c) => c,
            Neighbor::Boundary(w) => panic!("unexpected boundary {w}"),
        }
    }

    #[test]
    fn ring_wraps() {
        let r = Topology::ring(5).unwrap();
        assert_eq!(cell(r.resolve_neighbor(4, &Offset::Ring(1)).unwrap()), 0);
        assert_eq!(cell(r.resolve_neighbor(0, &Offset::Ring(-3)).unwrap()), 2);
        let one = Topology::ring(1).unwrap();
        for v in -4..=4 {
            assert_eq!(cell(one.resolve_neighbor(0, &Offset::Ring(v)).unwrap()), 0);
        }
        let r7 = Topology::ring(7).unwrap();
        assert_eq!(cell(r7.resolve_neighbor(2, &Offset::Ring(3)).unwrap()), 5);
        assert!(Topology::ring(0).is_err());
    }

    #[test]
    fn torus_wraps() {
        let t = Topology::torus(4, 4).unwrap();
        let c = t.torus_cell(3, 3).unwrap();
        let n = cell(t.resolve_neighbor(c, &Offset::Lattice(1, 0)).unwrap());
        assert_eq!(t.torus_coords(n), Some((0, 3)));
        assert_eq!(Topology::torus(2, 3).unwrap().cell_count(), 6);
        let single = Topology::torus(1, 1).unwrap();
        for off in [(1, 0), (0, 1), (-1, 5)] {
            let n = single
                .resolve_neighbor(0, &Offset::Lattice(off.0, off.1))
                .unwrap();
            assert_eq!(cell(n), 0);
        }
        let t8 = Topology::torus(8, 8).unwrap();
        let n = cell(t8.resolve_neighbor(0, &Offset::Lattice(0, 1)).unwrap());
        assert_eq!(t8.torus_coords(n), Some((0, 1)));
        assert!(Topology::torus(0, 3).is_err());
    }

    #[test]
    fn offset_kind_mismatch() {
        let r = Topology::ring(5).unwrap();
        assert!(matches!(
            r.resolve_neighbor(0, &Offset::Lattice(0, 1)),
            Err(TopologyError::OffsetKind { .. })
        ));
    }

    #[test]
    fn tree_reduction() {
        let t3 = Topology::tree(
            TreeFamily::involutions(3).unwrap(),
            2,
            BoundaryPolicy::Frozen(0),
        )
        .unwrap();
        let tree = t3.as_tree().unwrap();
        let a = tree.node(&TreeWord::parse("a").unwrap()).unwrap();
        assert_eq!(cell(t3.resolve_neighbor(a, &Offset::word("a")).unwrap()), 0);

        let t4 = Topology::tree(TreeFamily::free(4).unwrap(), 2, BoundaryPolicy::Frozen(0)).unwrap();
        let tree = t4.as_tree().unwrap();
        assert_eq!(t4.cell_count(), 17);
        let ab = tree.node(&TreeWord::parse("ab").unwrap()).unwrap();
        let back = cell(t4.resolve_neighbor(ab, &Offset::word("b⁻¹")).unwrap());
        assert_eq!(tree.word(back).to_string(), "a");
        assert!(matches!(
            tree.node(&TreeWord::parse("aA").unwrap()),
            Err(TopologyError::Unreduced(_))
        ));
    }

    #[test]
    fn tree_boundary_beyond_depth() {
        let t4 = Topology::tree(TreeFamily::free(4).unwrap(), 3, BoundaryPolicy::Frozen(0)).unwrap();
        let tree = t4.as_tree().unwrap();
        let deep = tree.node(&TreeWord::parse("abb").unwrap()).unwrap();
        assert!(matches!(
            t4.resolve_neighbor(deep, &Offset::word("a")).unwrap(),
            Neighbor::Boundary(_)
        ));
    }

    #[test]
    fn tree_level_sizes() {
        for degree in 3..=5 {
            let t = Topology::tree(
                TreeFamily::involutions(degree).unwrap(),
                6,
                BoundaryPolicy::Frozen(0),
            )
            .unwrap();
            let tree = t.as_tree().unwrap();
            for d in 1..=6 {
                let count = (0..t.cell_count())
                    .filter(|&c| tree.word(c).len() == d)
                    .count();
                assert_eq!(count, degree * (degree - 1).pow(d as u32 - 1));
            }
        }
    }

    #[test]
    fn tree_nodes_have_full_degree() {
        let t = Topology::tree(
            TreeFamily::involutions(3).unwrap(),
            4,
            BoundaryPolicy::Frozen(0),
        )
        .unwrap();
        let tree = t.as_tree().unwrap();
        let alphabet = tree.family().alphabet();
        for c in 0..t.cell_count() {
            if tree.word(c).len() >= 4 {
                continue;
            }
            let mut seen: Vec<CellId> = alphabet
                .iter()
                .map(|&l| cell(t.resolve_neighbor(c, &Offset::Word(TreeWord(vec![l]))).unwrap()))
                .collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 3);
        }
    }

    #[test]
    fn parse_forms() {
        let w1 = TreeWord::parse("ab⁻¹").unwrap();
        let w2 = TreeWord::parse("ab^-1").unwrap();
        let w3 = TreeWord::parse("aB").unwrap();
        assert_eq!(w1, w2);
        assert_eq!(w1, w3);
        assert_eq!(w1.to_string(), "ab⁻¹");
        assert!(TreeWord::parse("a?").is_err());
    }

    #[test]
    fn lifted_layers() {
        let lifted = Topology::lift_to_product(Topology::torus(8, 8).unwrap(), 4).unwrap();
        assert_eq!(lifted.cell_count(), 256);
        for c in 0..lifted.cell_count() {
            let n = cell(lifted.resolve_neighbor(c, &Offset::Lattice(0, 1)).unwrap());
            assert_eq!(lifted.layer_of(n), lifted.layer_of(c));
        }
        let ring = Topology::ring(5).unwrap();
        let lifted = Topology::lift_to_product(ring.clone(), 1).unwrap();
        for c in 0..5 {
            for v in -3..=3 {
                assert_eq!(
                    lifted.resolve_neighbor(c, &Offset::Ring(v)).unwrap(),
                    ring.resolve_neighbor(c, &Offset::Ring(v)).unwrap()
                );
            }
        }
        let tree = Topology::tree(TreeFamily::free(4).unwrap(), 1, BoundaryPolicy::Frozen(0)).unwrap();
        assert_eq!(
            Topology::lift_to_product(tree, 2).unwrap_err(),
            TopologyError::ProductBase
        );
    }

    #[test]
    fn spec_roundtrip() {
        let json = r#"{"kind":"tree","family":"free","degree":4,"depth":3}"#;
        let spec: TopologySpec = serde_json::from_str(json).unwrap();
        let topo = spec.build(0.6).unwrap();
        assert_eq!(topo.cell_count(), 1 + 4 + 12 + 36);
        assert_eq!(topo.spec(), spec);
        let bad = r#"{"kind":"ring","n":5,"extra":1}"#;
        assert!(serde_json::from_str::<TopologySpec>(bad).is_err());
    }
}
