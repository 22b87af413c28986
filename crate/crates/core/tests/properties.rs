use std::sync::Arc;

use densilab::analysis::{check_no_merge_split, particle_step, recode_psi, v_point};
use densilab::engine::{run_sync, step_sync, Kernel, Raster, RunOptions, SyncStepper};
use densilab::experiments::{estimate_q, QSpec};
use densilab::rules::Rule;
use densilab::seeding::replica_rng;
use densilab::topology::{Neighbor, TreeWord};
use densilab::{BoundaryPolicy, Configuration, Offset, Topology, TreeFamily};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn ring(symbols: Vec<u8>) -> Configuration {
    let topo = Arc::new(Topology::ring(symbols.len()).unwrap());
    Configuration::new(topo, symbols).unwrap()
}

fn ring_symbols(min: usize, max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, min..=max)
}

fn tree_word(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["a", "A", "b", "B"]), 0..=max).prop_map(|v| v.concat())
}

fn reversed(x: &[u8]) -> Vec<u8> {
    x.iter().rev().map(|&b| 1 - b).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn ring_and_torus_offsets_invert(n in 1usize..40, w in 1usize..12, h in 1usize..12, d in -50i64..50, e in -50i64..50, seed: u64) {
        let r = Topology::ring(n).unwrap();
        let c = (seed as usize) % n;
        let Neighbor::Cell(m) = r.resolve_neighbor(c, &Offset::Ring(d)).unwrap() else { panic!() };
        prop_assert_eq!(r.resolve_neighbor(m, &Offset::Ring(-d)).unwrap(), Neighbor::Cell(c));
        let t = Topology::torus(w, h).unwrap();
        let c = (seed as usize) % (w * h);
        let o = Offset::Lattice(d, e);
        let Neighbor::Cell(m) = t.resolve_neighbor(c, &o).unwrap() else { panic!() };
        prop_assert_eq!(t.resolve_neighbor(m, &o.negated()).unwrap(), Neighbor::Cell(c));
        let (i, j) = t.torus_coords(c).unwrap();
        prop_assert_eq!(t.torus_cell(i as i64, j as i64), Some(c));
    }

    #[test]
    fn tree_offsets_invert_inside(word in tree_word(3), step in tree_word(3)) {
        let fam = TreeFamily::free(4).unwrap();
        let topo = Topology::tree(fam, 7, BoundaryPolicy::Frozen(0)).unwrap();
        let tree = topo.as_tree().unwrap();
        let node = tree.node(&TreeWord::parse(&word).unwrap().reduce(fam).unwrap()).unwrap();
        let o = Offset::Word(TreeWord::parse(&step).unwrap());
        if let Neighbor::Cell(m) = topo.resolve_neighbor(node, &o).unwrap() {
            prop_assert_eq!(topo.resolve_neighbor(m, &o.negated()).unwrap(), Neighbor::Cell(node));
        }
    }

    #[test]
    fn reduction_is_idempotent(word in tree_word(12), involutions: bool) {
        let fam = if involutions { TreeFamily::involutions(3).unwrap() } else { TreeFamily::free(4).unwrap() };
        let text = if involutions { word.replace('A', "c").replace('B', "b") } else { word };
        let w = TreeWord::parse(&text).unwrap();
        let once = w.reduce(fam).unwrap();
        prop_assert!(once.is_reduced(fam));
        prop_assert_eq!(once.reduce(fam).unwrap(), once.clone());
        prop_assert!(once.len() <= w.len());
    }

    #[test]
    fn lifted_layers_are_closed(w in 1usize..8, h in 1usize..8, layers in 1usize..5, d in -9i64..9, e in -9i64..9) {
        let topo = Topology::lift_to_product(Topology::torus(w, h).unwrap(), layers).unwrap();
        for c in 0..topo.cell_count() {
            let Neighbor::Cell(m) = topo.resolve_neighbor(c, &Offset::Lattice(d, e)).unwrap() else { panic!() };
            prop_assert_eq!(topo.layer_of(m), topo.layer_of(c));
        }
    }

    #[test]
    fn traffic_conserves_and_annihilates(x in ring_symbols(3, 200)) {
        let c = ring(x.clone());
        let mut rng = replica_rng(0, 0);
        let y = step_sync(&c, Rule::Traffic, &mut rng).unwrap();
        prop_assert_eq!(y.density().ones, c.density().ones);
        prop_assert_eq!(recode_psi(&y).unwrap(), particle_step(&recode_psi(&c).unwrap()));
    }

    #[test]
    fn density_counts_cover_cells(x in ring_symbols(1, 100)) {
        let c = ring(x);
        let d = c.density();
        prop_assert_eq!(d.ones + d.zeros, c.len());
    }

    #[test]
    fn evaluation_order_does_not_matter(x in ring_symbols(8, 60), seed: u64, rule_ix in 0usize..4) {
        let rule = [Rule::Gkl, Rule::Kari, Rule::MajorityTraffic { alpha: 0.3 }, Rule::Fuks { p_copy: 0.2 }][rule_ix];
        let c = ring(x);
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.shuffle(&mut replica_rng(seed, 1));
        let mut r1 = replica_rng(seed, 0);
        let mut r2 = replica_rng(seed, 0);
        let mut a = SyncStepper::new(rule, &c, Kernel::Dense, &mut r1).unwrap();
        let mut b = SyncStepper::new(rule, &c, Kernel::Dense, &mut r2).unwrap();
        for _ in 0..3 {
            a.step(&mut r1);
            b.step_in_order(&mut r2, &order).unwrap();
        }
        prop_assert_eq!(a.symbols(), b.symbols());
    }

    #[test]
    fn toom_order_invariance_on_tori(w in 2usize..10, h in 2usize..10, seed: u64) {
        let topo = Arc::new(Topology::torus(w, h).unwrap());
        let c = Configuration::sample_bernoulli_seeded(topo, 0.5, seed).unwrap();
        let mut order: Vec<usize> = (0..c.len()).collect();
        order.shuffle(&mut replica_rng(seed, 1));
        let mut rng = replica_rng(seed, 0);
        let mut a = SyncStepper::new(Rule::Toom, &c, Kernel::Dense, &mut rng).unwrap();
        let mut b = SyncStepper::new(Rule::Toom, &c, Kernel::Dense, &mut rng).unwrap();
        a.step(&mut rng);
        b.step_in_order(&mut rng, &order).unwrap();
        prop_assert_eq!(a.symbols(), b.symbols());
    }

    #[test]
    fn kernels_agree(x in ring_symbols(4, 150), seed: u64, rule_ix in 0usize..5) {
        let rule = [Rule::Identity, Rule::Traffic, Rule::Gkl, Rule::Kari, Rule::MajorityTraffic { alpha: 0.1 }][rule_ix];
        let c = ring(x);
        let dense = run_sync(&c, rule, RunOptions::new(40).kernel(Kernel::Dense), &mut replica_rng(seed, 0)).unwrap();
        let packed = run_sync(&c, rule, RunOptions::new(40).kernel(Kernel::Packed), &mut replica_rng(seed, 0)).unwrap();
        prop_assert_eq!(dense.final_config.symbols(), packed.final_config.symbols());
        prop_assert_eq!(dense.verdict, packed.verdict);
        prop_assert_eq!(dense.steps, packed.steps);
    }

    #[test]
    fn sparse_matches_dense_for_deterministic_rules(x in ring_symbols(4, 150), identity: bool) {
        let rule = if identity { Rule::Identity } else { Rule::Traffic };
        let c = ring(x);
        let dense = run_sync(&c, rule, RunOptions::new(60).kernel(Kernel::Dense), &mut replica_rng(0, 0)).unwrap();
        let sparse = run_sync(&c, rule, RunOptions::new(60).kernel(Kernel::Sparse), &mut replica_rng(0, 0)).unwrap();
        prop_assert_eq!(dense.final_config.symbols(), sparse.final_config.symbols());
    }

    #[test]
    fn colour_reflection_symmetry(x in ring_symbols(7, 80), kari: bool) {
        let rule = if kari { Rule::Kari } else { Rule::Gkl };
        let mut rng = replica_rng(0, 0);
        let fx = step_sync(&ring(x.clone()), rule, &mut rng).unwrap();
        let fy = step_sync(&ring(reversed(&x)), rule, &mut rng).unwrap();
        prop_assert_eq!(reversed(fx.symbols()), fy.symbols().to_vec());
    }

    #[test]
    fn no_merge_split_on_small_tori(w in 3usize..24, h in 3usize..24, p in 0.2f64..0.8, seed: u64) {
        let topo = Arc::new(Topology::torus(w, h).unwrap());
        let c = Configuration::sample_bernoulli_seeded(topo, p, seed).unwrap();
        let report = check_no_merge_split(&c).unwrap();
        prop_assert!(report.passed(), "{:?}", report.witness);
    }

    #[test]
    fn v_point_is_lexicographic_max(cells in prop::collection::vec((-20i64..20, -20i64..20), 0..30)) {
        prop_assert_eq!(v_point(&cells), cells.iter().copied().max());
    }

    #[test]
    fn pbm_round_trip(width in 1usize..90, rows in 1usize..6, seed: u64) {
        let mut rng = replica_rng(seed, 0);
        let data: Vec<Vec<u8>> = (0..rows)
            .map(|_| (0..width).map(|_| rand::Rng::random_range(&mut rng, 0..2)).collect())
            .collect();
        let r = Raster::new(width, data).unwrap();
        prop_assert_eq!(Raster::from_pbm(&r.to_pbm()).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(8) })]

    #[test]
    fn replicas_do_not_depend_on_sample_count(seed: u64, extra in 1u64..20) {
        let mut small = QSpec::new(Rule::Gkl, 21, 0.45, 10, seed);
        small.keep_runs = true;
        let mut large = small.clone();
        large.samples = 10 + extra;
        let a = estimate_q(&small).unwrap().runs.unwrap();
        let b = estimate_q(&large).unwrap().runs.unwrap();
        prop_assert_eq!(&a[..], &b[..10]);
    }
}
