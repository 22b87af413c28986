//! Clusters on the triangular lattice.
//!
//! Sites `(i, j)` use `i` as the eastward and `j` as the northward axis.
//! Two sites are adjacent when they differ by `(±1, 0)`, `(0, ±1)`,
//! `(1, -1)` or `(-1, 1)`.
//!
//! Bounded windows behave as if every site outside the window held `1`,
//! which is the setting of finite 0-islands in a sea of 1s.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::configuration::{Configuration, Symbol};
use crate::engine::{run_async, EngineError, Kernel, SyncStepper};
use crate::rules::{maj3, Rule};
use crate::topology::Topology;

pub const TRIANGULAR: [(i64, i64); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("cluster analysis needs a torus, got {0}")]
    NotTorus(&'static str),
    #[error("cluster is empty")]
    EmptyCluster,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Enveloping rectangle, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub i_min: i64,
    pub i_max: i64,
    pub j_min: i64,
    pub j_max: i64,
}

impl Rect {
    pub fn of(cells: &[(i64, i64)]) -> Option<Rect> {
        let (&(i0, j0), rest) = cells.split_first()?;
        let mut r = Rect {
            i_min: i0,
            i_max: i0,
            j_min: j0,
            j_max: j0,
        };
        for &(i, j) in rest {
            r.i_min = r.i_min.min(i);
            r.i_max = r.i_max.max(i);
            r.j_min = r.j_min.min(j);
            r.j_max = r.j_max.max(j);
        }
        Some(r)
    }

    pub fn contains(&self, (i, j): (i64, i64)) -> bool {
        (self.i_min..=self.i_max).contains(&i) && (self.j_min..=self.j_max).contains(&j)
    }

    pub fn width(&self) -> usize {
        (self.i_max - self.i_min + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Smallest cell id in the cluster.
    pub label: usize,
    pub target: Symbol,
    /// Sites in increasing cell-id order.
    pub cells: Vec<(i64, i64)>,
    pub rect: Rect,
    pub v: (i64, i64),
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Lexicographic maximum, `i` first: the upmost site among the rightmost
/// ones. `None` stands for the empty cluster, which sorts below every site.
pub fn v_point(cells: &[(i64, i64)]) -> Option<(i64, i64)> {
    cells.iter().copied().max()
}

fn neighbours(i: i64, j: i64, width: usize, height: usize, periodic: bool) -> impl Iterator<Item = usize> {
    let (w, h) = (width as i64, height as i64);
    TRIANGULAR.into_iter().filter_map(move |(di, dj)| {
        let (mut a, mut b) = (i + di, j + dj);
        if periodic {
            a = a.rem_euclid(w);
            b = b.rem_euclid(h);
        } else if a < 0 || b < 0 || a >= w || b >= h {
            return None;
        }
        Some((b * w + a) as usize)
    })
}

/// Per-cell cluster index (`usize::MAX` off target) and the cluster count.
fn label_array(symbols: &[Symbol], width: usize, height: usize, target: Symbol, periodic: bool) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; symbols.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..symbols.len() {
        if symbols[start] != target || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            let (i, j) = ((c % width) as i64, (c / width) as i64);
            for nb in neighbours(i, j, width, height, periodic) {
                if symbols[nb] == target && label[nb] == usize::MAX {
                    label[nb] = count;
                    queue.push_back(nb);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn collect(labels: &[usize], count: usize, width: usize, target: Symbol) -> Vec<Cluster> {
    let mut cells: Vec<Vec<(i64, i64)>> = vec![Vec::new(); count];
    let mut first = vec![usize::MAX; count];
    for (c, &l) in labels.iter().enumerate() {
        if l != usize::MAX {
            if cells[l].is_empty() {
                first[l] = c;
            }
            cells[l].push(((c % width) as i64, (c / width) as i64));
        }
    }
    cells
        .into_iter()
        .zip(first)
        .map(|(cells, label)| Cluster {
            label,
            target,
            rect: Rect::of(&cells).expect("clusters are nonempty"),
            v: v_point(&cells).expect("clusters are nonempty"),
            cells,
        })
        .collect()
}

/// Clusters of `target` in a `width x height` row-major window, in order of
/// their smallest cell id. With `periodic` the window wraps as a torus
/// (rectangles of wrapping clusters then span the raw coordinates).
pub fn label_window(symbols: &[Symbol], width: usize, height: usize, target: Symbol, periodic: bool) -> Vec<Cluster> {
    let (labels, count) = label_array(symbols, width, height, target, periodic);
    collect(&labels, count, width, target)
}

/// Clusters of `target` on a torus configuration, with periodic adjacency.
pub fn label_clusters(config: &Configuration, target: Symbol) -> Result<Vec<Cluster>, AnalysisError> {
    match **config.topology() {
        Topology::Torus { width, height } => Ok(label_window(config.symbols(), width, height, target, true)),
        ref other => Err(AnalysisError::NotTorus(other.kind_name())),
    }
}

/// Cluster sizes and how many clusters have each size.
pub fn size_histogram(clusters: &[Cluster]) -> Vec<(usize, usize)> {
    let mut sizes: Vec<usize> = clusters.iter().map(Cluster::len).collect();
    sizes.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for s in sizes {
        match out.last_mut() {
            Some((size, n)) if *size == s => *n += 1,
            _ => out.push((s, 1)),
        }
    }
    out
}

/// One Toom step on a bounded window padded with 1s.
pub fn toom_image_window(symbols: &[Symbol], width: usize, height: usize) -> Vec<Symbol> {
    let at = |i: usize, j: usize| -> Symbol {
        if i < width && j < height {
            symbols[j * width + i]
        } else {
            1
        }
    };
    (0..symbols.len())
        .map(|c| {
            let (i, j) = (c % width, c / width);
            maj3(at(i, j), at(i, j + 1), at(i + 1, j))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeSplitReport {
    pub clusters: usize,
    pub image_clusters: usize,
    /// First inconsistency found, if any.
    pub witness: Option<String>,
}

impl MergeSplitReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks that one Toom step maps the 0-clusters of a 1-padded window one by
/// one: the image of each cluster, computed as if it were alone, is empty or
/// a single cluster; those images are disjoint; and together they are
/// exactly the 0-clusters of the image of the whole window.
pub fn check_window_no_merge_split(symbols: &[Symbol], width: usize, height: usize) -> MergeSplitReport {
    let (labels, count) = label_array(symbols, width, height, 0, false);
    let clusters = collect(&labels, count, width, 0);
    let mut owner = vec![usize::MAX; symbols.len()];
    let mut image_sizes = vec![0usize; count];
    let mut witness = None;
    let inside = |k: usize, i: i64, j: i64| -> Symbol {
        if i < width as i64 && j < height as i64 && labels[j as usize * width + i as usize] == k {
            0
        } else {
            1
        }
    };
    'clusters: for (k, cl) in clusters.iter().enumerate() {
        // the isolated image never leaves the enveloping rectangle
        for j in cl.rect.j_min..=cl.rect.j_max {
            for i in cl.rect.i_min..=cl.rect.i_max {
                if maj3(inside(k, i, j), inside(k, i, j + 1), inside(k, i + 1, j)) != 0 {
                    continue;
                }
                let c = j as usize * width + i as usize;
                if owner[c] != usize::MAX {
                    witness = Some(format!(
                        "images of clusters {} and {} overlap at ({i}, {j})",
                        clusters[owner[c]].label, cl.label
                    ));
                    break 'clusters;
                }
                owner[c] = k;
                image_sizes[k] += 1;
            }
        }
    }
    let image = toom_image_window(symbols, width, height);
    let (image_labels, image_count) = label_array(&image, width, height, 0, false);
    if witness.is_none() {
        if let Some(c) = (0..image.len()).find(|&c| (image[c] == 0) != (owner[c] != usize::MAX)) {
            witness = Some(format!(
                "site ({}, {}) is {} in the image but {} in the union of isolated images",
                c % width,
                c / width,
                image[c],
                if owner[c] == usize::MAX { 1 } else { 0 }
            ));
        }
    }
    if witness.is_none() {
        // each image cluster inside one isolated image, each isolated image one cluster
        let mut cluster_owner = vec![usize::MAX; image_count];
        let mut image_cluster_of = vec![usize::MAX; count];
        for c in 0..image.len() {
            let l = image_labels[c];
            if l == usize::MAX {
                continue;
            }
            let k = owner[c];
            if cluster_owner[l] == usize::MAX {
                cluster_owner[l] = k;
            } else if cluster_owner[l] != k {
                witness = Some(format!(
                    "images of clusters {} and {} connect at ({}, {})",
                    clusters[cluster_owner[l]].label,
                    clusters[k].label,
                    c % width,
                    c / width
                ));
                break;
            }
            if image_cluster_of[k] == usize::MAX {
                image_cluster_of[k] = l;
            } else if image_cluster_of[k] != l {
                witness = Some(format!("image of cluster {} breaks up", clusters[k].label));
                break;
            }
        }
    }
    MergeSplitReport {
        clusters: count,
        image_clusters: image_count,
        witness,
    }
}

/// [`check_window_no_merge_split`] on the cells of a torus configuration,
/// read as a window padded with 1s.
pub fn check_no_merge_split(config: &Configuration) -> Result<MergeSplitReport, AnalysisError> {
    match **config.topology() {
        Topology::Torus { width, height } => Ok(check_window_no_merge_split(config.symbols(), width, height)),
        ref other => Err(AnalysisError::NotTorus(other.kind_name())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErodeRule {
    /// Toom's synchronous CA; time counts steps.
    Ca,
    /// The guarded seven-neighbour IPS; time counts whole time units.
    Ips,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EroderOutcome {
    /// Steps (or time units) until no 0 is left; `None` when the budget ran out.
    pub vanished_at: Option<usize>,
    pub events: u64,
    /// Some 0 appeared outside the initial enveloping rectangle.
    pub left_rectangle: bool,
    /// For the IPS: some event raised the v-point of the 0-set.
    pub v_increased: bool,
}

/// The `cells` (any coordinates) as 0s on a 1-background torus with one
/// padding row and column on every side. Returns the configuration and the
/// shifted rectangle.
pub fn embed_cluster(cells: &[(i64, i64)]) -> Result<(Configuration, Rect), AnalysisError> {
    let r = Rect::of(cells).ok_or(AnalysisError::EmptyCluster)?;
    let (w, h) = (r.width() + 2, r.height() + 2);
    let topo = Arc::new(Topology::torus(w, h).map_err(EngineError::from)?);
    let mut symbols = vec![1u8; w * h];
    for &(i, j) in cells {
        let (a, b) = ((i - r.i_min + 1) as usize, (j - r.j_min + 1) as usize);
        symbols[b * w + a] = 0;
    }
    let config = Configuration::new(topo, symbols).map_err(EngineError::from)?;
    let shifted = Rect {
        i_min: 1,
        i_max: r.width() as i64,
        j_min: 1,
        j_max: r.height() as i64,
    };
    Ok((config, shifted))
}

/// Runs a finite 0-island on a 1-background until it disappears or the
/// budget runs out, checking containment in its rectangle at every step
/// (every event for the IPS) and, for the IPS, that the v-point of the
/// remaining 0s never increases.
pub fn eroder_time<R: Rng + ?Sized>(
    cells: &[(i64, i64)],
    rule: ErodeRule,
    budget: usize,
    rng: &mut R,
) -> Result<EroderOutcome, AnalysisError> {
    let (config, rect) = embed_cluster(cells)?;
    let w = rect.width() + 2;
    let coords = |c: usize| ((c % w) as i64, (c / w) as i64);
    match rule {
        ErodeRule::Ca => {
            let mut stepper = SyncStepper::new(Rule::Toom, &config, Kernel::Dense, rng)?;
            let mut left = false;
            while stepper.absorbed().is_none() && stepper.steps() < budget {
                stepper.step(rng);
                left |= stepper
                    .symbols()
                    .iter()
                    .enumerate()
                    .any(|(c, &s)| s == 0 && !rect.contains(coords(c)));
            }
            Ok(EroderOutcome {
                vanished_at: (stepper.absorbed() == Some(1)).then_some(stepper.steps()),
                events: 0,
                left_rectangle: left,
                v_increased: false,
            })
        }
        ErodeRule::Ips => {
            let mut zeros: BTreeSet<(i64, i64)> = (0..config.len())
                .filter(|&c| config.get(c) == 0)
                .map(coords)
                .collect();
            let mut v = zeros.last().copied();
            let mut left = false;
            let mut raised = false;
            let run = run_async(&config, Rule::ToomIps, budget, rng, |ev, _| {
                let site = coords(ev.cell);
                match (ev.old, ev.new) {
                    (1, 0) => {
                        zeros.insert(site);
                        left |= !rect.contains(site);
                    }
                    (0, 1) => {
                        zeros.remove(&site);
                    }
                    _ => return true,
                }
                let now = zeros.last().copied();
                raised |= now > v;
                v = now;
                true
            })?;
            Ok(EroderOutcome {
                vanished_at: (run.verdict.symbol() == Some(1)).then_some(run.time_units),
                events: run.events,
                left_rectangle: left,
                v_increased: raised,
            })
        }
    }
}

/// A random connected set of `size` sites grown from the origin by adding
/// triangular neighbours of already chosen sites.
pub fn random_cluster<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<(i64, i64)> {
    let mut cells = Vec::with_capacity(size);
    let mut seen = BTreeSet::new();
    if size == 0 {
        return cells;
    }
    cells.push((0, 0));
    seen.insert((0, 0));
    while cells.len() < size {
        let (i, j) = cells[rng.random_range(0..cells.len())];
        let (di, dj) = TRIANGULAR[rng.random_range(0..TRIANGULAR.len())];
        let site = (i + di, j + dj);
        if seen.insert(site) {
            cells.push(site);
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::replica_rng;

    #[test]
    fn all_zero_one_cluster() {
        let c = label_window(&[0; 12], 4, 3, 0, true);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 12);
    }

    #[test]
    fn single_zero() {
        let mut s = vec![1; 25];
        s[0] = 0;
        let c = label_window(&s, 5, 5, 0, false);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].v, (0, 0));
        assert_eq!(c[0].rect, Rect::of(&[(0, 0)]).unwrap());
    }

    #[test]
    fn diagonal_is_adjacent() {
        // (1, 1) and (2, 0): differ by (1, -1)
        let mut s = vec![1; 16];
        s[4 + 1] = 0;
        s[2] = 0;
        assert_eq!(label_window(&s, 4, 4, 0, false).len(), 1);
        // (1, 1) and (2, 2) are not adjacent
        let mut s = vec![1; 16];
        s[4 + 1] = 0;
        s[2 * 4 + 2] = 0;
        assert_eq!(label_window(&s, 4, 4, 0, false).len(), 2);
    }

    #[test]
    fn v_point_order() {
        assert_eq!(v_point(&[(0, 0), (0, 1)]), Some((0, 1)));
        assert_eq!(v_point(&[(0, 5), (1, 0)]), Some((1, 0)));
        assert_eq!(v_point(&[]), None);
        assert!(v_point(&[]) < Some((i64::MIN, i64::MIN)));
    }

    #[test]
    fn separated_rectangles_stay_apart() {
        let (w, h) = (12, 8);
        let mut s = vec![1; w * h];
        for (i, j) in [(1, 1), (2, 1), (1, 2), (2, 2), (7, 4), (8, 4), (9, 4), (7, 5)] {
            s[j * w + i] = 0;
        }
        let r = check_window_no_merge_split(&s, w, h);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.clusters, 2);
        assert_eq!(r.image_clusters, 2);
    }

    #[test]
    fn single_cell_erodes_in_one_step() {
        let out = eroder_time(&[(0, 0)], ErodeRule::Ca, 10, &mut replica_rng(0, 0)).unwrap();
        assert_eq!(out.vanished_at, Some(1));
    }

    #[test]
    fn random_cluster_connected() {
        let mut rng = replica_rng(4, 0);
        for size in [1, 5, 40] {
            let cells = random_cluster(size, &mut rng);
            let (config, _) = embed_cluster(&cells).unwrap();
            let clusters = label_clusters(&config, 0).unwrap();
            assert_eq!(clusters.len(), 1);
            assert_eq!(clusters[0].len(), size);
        }
    }

    #[test]
    fn histogram() {
        let mut s = vec![1; 16];
        s[0] = 0;
        s[10] = 0;
        s[11] = 0;
        let c = label_window(&s, 4, 4, 0, false);
        assert_eq!(size_histogram(&c), vec![(1, 1), (2, 1)]);
    }
}
