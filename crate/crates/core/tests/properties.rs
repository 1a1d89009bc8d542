use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use selfsim::bimodule::{xi0, ModuleElement, SampledFunction};
use selfsim::classify::{registry, RegistryEntry};
use selfsim::cograph::{branch_index, check_graph_separation, Verdict};
use selfsim::ifs::{attractor_cells, IfsSystem, SampleGrid, Word};
use selfsim::random;
use selfsim::transfer::{beta, transfer_op};
use selfsim::C64;

const GRID_POINTS: usize = 1024;

fn entries() -> &'static [RegistryEntry] {
    static E: OnceLock<Vec<RegistryEntry>> = OnceLock::new();
    E.get_or_init(registry)
}

fn grids() -> &'static [Arc<SampleGrid>] {
    static G: OnceLock<Vec<Arc<SampleGrid>>> = OnceLock::new();
    G.get_or_init(|| {
        entries()
            .iter()
            .map(|e| {
                let m = selfsim::verify::grid_depth(&e.system, GRID_POINTS);
                SampleGrid::new(Arc::new(e.system.clone()), m).unwrap()
            })
            .collect()
    })
}

fn system(k: usize) -> &'static IfsSystem {
    &entries()[k % entries().len()].system
}

fn word_of(sys: &IfsSystem, raw: &[usize]) -> Word {
    Word(raw.iter().map(|s| s % sys.len()).collect())
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn word_maps_compose(k in 0usize..10, u in prop::collection::vec(0usize..8, 0..5),
                         v in prop::collection::vec(0usize..8, 0..5)) {
        let sys = system(k);
        let (u, v) = (word_of(sys, &u), word_of(sys, &v));
        let x = sys.hull().center.clone();
        let lhs = sys.apply_word(&u.concat(&v), &x).unwrap();
        let rhs = sys.apply_word(&u, &sys.apply_word(&v, &x).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn word_index_round_trips(k in 0usize..10, w in prop::collection::vec(0usize..8, 0..6)) {
        let sys = system(k);
        let w = word_of(sys, &w);
        prop_assert_eq!(Word::from_index(w.index(sys.len()), w.len(), sys.len()), w);
    }

    #[test]
    fn cells_nest_and_shrink(k in 0usize..10, w in prop::collection::vec(0usize..8, 0..6)) {
        let sys = system(k);
        let w = word_of(sys, &w);
        let hull = sys.hull();
        let c = sys.max_contraction();
        let center = |w: &Word| sys.apply_word(w, &hull.center).unwrap();
        let radius = |w: &Word| sys.word_lipschitz(w) * hull.radius;
        prop_assert!(radius(&w) <= c.powi(w.len() as i32) * hull.radius * (1.0 + 1e-12));
        for i in 0..sys.len() {
            let child = w.concat(&Word(vec![i]));
            let gap = (center(&child) - center(&w)).norm() + radius(&child);
            prop_assert!(gap <= radius(&w) + 1e-12, "child {i} leaves its parent ball");
        }
    }

    #[test]
    fn coding_points_lie_in_their_cells(k in 0usize..10, w in prop::collection::vec(0usize..8, 1..6)) {
        let sys = system(k);
        let w = word_of(sys, &w);
        let (p, _) = sys.coding_point(&w).unwrap();
        let c = sys.apply_word(&w, &sys.hull().center).unwrap();
        prop_assert!((p - c).norm() <= sys.word_lipschitz(&w) * sys.hull().radius + 1e-12);
    }

    #[test]
    fn branch_indices_partition_the_symbols(k in 0usize..10, y in 0usize..1024) {
        let grid = &grids()[k % grids().len()];
        let sys = grid.system();
        let groups = branch_index(sys, grid.point(y % grid.len())).unwrap();
        prop_assert_eq!(groups.iter().map(|g| g.e).sum::<usize>(), sys.len());
        let mut all: Vec<usize> = groups.iter().flat_map(|g| g.indices.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=sys.len()).collect::<Vec<_>>());
    }

    #[test]
    fn merges_are_symmetric(k in 0usize..10, y in 0usize..1024) {
        let grid = &grids()[k % grids().len()];
        let sys = grid.system();
        let y = y % grid.len();
        for i in 0..sys.len() {
            for j in 0..sys.len() {
                let same = (grid.exact_image(i, y) - grid.exact_image(j, y)).norm() <= sys.merge_tol();
                let merged = grid.representative(i, y) == grid.representative(j, y);
                prop_assert_eq!(same, merged);
            }
        }
    }

    #[test]
    fn grid_images_track_exact_images(k in 0usize..10, y in 0usize..1024) {
        let grid = &grids()[k % grids().len()];
        let y = y % grid.len();
        for i in 0..grid.system().len() {
            let d = (grid.point(grid.image(i, y)) - grid.exact_image(i, y)).norm();
            prop_assert!(d <= grid.tol(), "image {i} off by {d:e}");
        }
    }

    #[test]
    fn inner_product_is_sesquilinear(k in 0usize..10, seed in any::<u64>(),
                                      re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let grid = &grids()[k % grids().len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random::cograph_function(&mut rng, grid);
        let g = random::cograph_function(&mut rng, grid);
        let h = random::cograph_function(&mut rng, grid);
        let a = random::function(&mut rng, grid);
        let lam = C64::new(re, im);
        let fg = f.inner(&g).unwrap();
        let gf = g.inner(&f).unwrap();
        prop_assert!(fg.distance(&gf.conj()).unwrap() <= 1e-12);
        let lhs = f.inner(&g.scale(lam).add(&h).unwrap()).unwrap();
        let rhs = fg.map(|v| v * lam).zip(&f.inner(&h).unwrap(), |x, y| x + y).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-11);
        let right = f.inner(&g.right(&a).unwrap()).unwrap();
        prop_assert!(right.distance(&fg.mul(&a).unwrap()).unwrap() <= 1e-11);
        // φ(a)* = φ(a*)
        let adj = f.left(&a).unwrap().inner(&g).unwrap();
        let star = f.inner(&g.left(&a.conj()).unwrap()).unwrap();
        prop_assert!(adj.distance(&star).unwrap() <= 1e-11);
        for v in f.inner(&f).unwrap().values() {
            prop_assert!(v.re >= 0.0 && v.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn transfer_is_unital_positive_average(k in 0usize..10, seed in any::<u64>()) {
        let grid = &grids()[k % grids().len()];
        let n = grid.system().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random::function(&mut rng, grid);
        let b = random::function(&mut rng, grid);
        let one = SampledFunction::constant(grid, C64::new(1.0, 0.0));
        prop_assert!(transfer_op(&one).distance(&one).unwrap() <= 1e-15);
        let e = transfer_op(&a);
        let betas: Vec<SampledFunction> = (0..n).map(|i| beta(i, &a).unwrap()).collect();
        for y in 0..grid.len() {
            let avg: C64 = betas.iter().map(|b| b.value(y)).sum::<C64>() / n as f64;
            prop_assert!(close(e.value(y), avg, 1e-14));
        }
        let pos = transfer_op(&a.mul(&a.conj()).unwrap());
        prop_assert!(pos.values().iter().all(|v| v.re >= 0.0 && v.im.abs() <= 1e-12));
        let xi = xi0(grid);
        let form = xi.inner(&xi.left(&a).unwrap()).unwrap();
        prop_assert!(e.distance(&form).unwrap() <= 1e-12);
        for i in 0..n {
            let lhs = beta(i, &a.mul(&b).unwrap()).unwrap();
            let rhs = beta(i, &a).unwrap().mul(&beta(i, &b).unwrap()).unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn norm_equivalence_holds(k in 0usize..10, seed in any::<u64>()) {
        let grid = &grids()[k % grids().len()];
        let n = grid.system().len() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random::cograph_function(&mut rng, grid);
        let sup = f.sup_norm();
        let two = selfsim::bimodule::norm2(&f).unwrap();
        prop_assert!(sup <= two * (1.0 + 1e-12));
        prop_assert!(two <= n.sqrt() * sup * (1.0 + 1e-12));
    }

    #[test]
    fn ifs_files_round_trip(k in 0usize..10) {
        let sys = system(k);
        let text = serde_json::to_string(&sys.to_file()).unwrap();
        let back = IfsSystem::from_json(&text).unwrap();
        prop_assert_eq!(back.content_hash(), sys.content_hash());
        for (a, b) in back.maps().iter().zip(sys.maps()) {
            prop_assert_eq!(a.matrix(), b.matrix());
            prop_assert_eq!(a.offset(), b.offset());
        }
    }
}

#[test]
fn cell_counts_are_powers_of_n() {
    for e in entries() {
        for n in 0..4 {
            let cells = attractor_cells(&e.system, n, 1 << 16).unwrap();
            assert_eq!(cells.len(), e.system.len().pow(n as u32), "{}", e.name);
        }
    }
}

/// Graph-separation verdicts never flip from holds to fails as depth grows.
#[test]
fn graph_verdicts_are_depth_stable() {
    for e in entries() {
        let verdicts: Vec<Verdict> = (6..=10)
            .map(|d| check_graph_separation(&e.system, d, 1e-9).unwrap().verdict)
            .collect();
        assert!(
            verdicts.windows(2).all(|w| !(w[0] == Verdict::Holds && w[1] == Verdict::Fails)),
            "{}: {verdicts:?}",
            e.name
        );
        assert!(verdicts.windows(2).all(|w| w[0] == w[1]), "{}: {verdicts:?}", e.name);
    }
}

#[test]
fn fixed_points_are_fixed() {
    for e in entries() {
        for i in 0..e.system.len() {
            let p = e.system.fixed_point(i);
            assert!((e.system.map(i).apply(&p) - &p).norm() <= 1e-12, "{} map {i}", e.name);
        }
    }
}
