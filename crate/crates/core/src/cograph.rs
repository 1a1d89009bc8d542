//! Cographs, branch sets and separation conditions.
//!
//! For affine maps the branch equation `γ_i(y) = γ_j(y)` is linear, so the
//! candidate set is solved exactly; only membership of the solutions in `K`
//! is approximate, and it is resolved by cell-tree refinement at a stated
//! depth.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::ifs::{IfsSystem, Point, SampleGrid, Word};
use crate::region::{Region, Shape};

/// Node budget for one refinement run.
pub const REFINE_BUDGET: usize = 1 << 22;

/// Cap on cell pairs tracked by the strong-separation search.
pub const PAIR_BUDGET: usize = 1 << 18;

fn to_vec(p: &Point) -> Vec<f64> {
    p.iter().cloned().collect()
}

/// `𝒢` over a sample grid: keys `(i, y)` stored at `y * N + i`.
#[derive(Clone, Debug)]
pub struct CographSample {
    grid: Arc<SampleGrid>,
}

impl CographSample {
    pub fn new(grid: Arc<SampleGrid>) -> Self {
        CographSample { grid }
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.grid
    }

    pub fn symbols(&self) -> usize {
        self.grid.system().len()
    }

    pub fn len(&self) -> usize {
        self.grid.len() * self.symbols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn key(&self, i: usize, y: usize) -> usize {
        y * self.symbols() + i
    }

    /// Merge classes `{i : γ_i(y) equal}` at grid point `y`, in symbol order.
    pub fn merge_classes(&self, y: usize) -> Vec<Vec<usize>> {
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.symbols() {
            let rep = self.grid.representative(i, y);
            match classes.iter_mut().find(|c| c[0] == rep) {
                Some(c) => c.push(i),
                None => classes.push(vec![i]),
            }
        }
        classes
    }

    pub fn same(&self, other: &CographSample) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
    }
}

/// `x = γ_i(y)` for every `i` in `indices`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BranchPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// One-based symbols.
    pub indices: Vec<usize>,
    pub index: usize,
}

/// Solution set of `γ_i(y) = γ_j(y)` intersected with `K`.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PairSolution {
    Empty,
    /// Unique linear solution; `in_attractor` records the membership test.
    Isolated {
        y: Vec<f64>,
        x: Vec<f64>,
        in_attractor: bool,
    },
    /// Solution set is an affine subspace `base + span(directions)`.
    Subspace {
        base: Vec<f64>,
        directions: Vec<Vec<f64>>,
        /// Depth reached by the refinement and surviving cells there.
        depth: usize,
        cells: usize,
        /// Diameter of the detected part of `γ_i(solution ∩ K)`.
        extent: f64,
        #[serde(skip)]
        x_points: Vec<Point>,
        #[serde(skip)]
        y_points: Vec<Point>,
    },
    /// The two maps coincide; every point of `γ_i(K)` is a branch point.
    Identical,
}

impl PairSolution {
    pub fn is_empty(&self) -> bool {
        match self {
            PairSolution::Empty => true,
            PairSolution::Isolated { in_attractor, .. } => !in_attractor,
            PairSolution::Subspace { cells, .. } => *cells == 0,
            PairSolution::Identical => false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    /// One-based pair `{i, j}`.
    pub pair: [usize; 2],
    pub solution: PairSolution,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Cardinality {
    Empty,
    Finite { count: usize },
    InfiniteAtResolution { depth: usize },
}

/// The detected branch set `B`.
#[derive(Clone, Debug, Serialize)]
pub struct BranchReport {
    pub depth: usize,
    pub tol: f64,
    pub resolution: f64,
    pub pairs: Vec<PairReport>,
    /// Isolated branch points, deduplicated by `x`.
    pub points: Vec<BranchPoint>,
    /// Number of thinned sample points on positive-dimensional pieces.
    pub sampled_count: usize,
    #[serde(skip)]
    pub sampled: Vec<Point>,
    pub cardinality: Cardinality,
}

impl BranchReport {
    pub fn is_empty(&self) -> bool {
        self.cardinality == Cardinality::Empty
    }

    /// Every detected point of `B`: isolated points followed by samples.
    pub fn all_points(&self) -> Vec<Point> {
        self.points
            .iter()
            .map(|p| DVector::from_vec(p.x.clone()))
            .chain(self.sampled.iter().cloned())
            .collect()
    }

    /// Distance from `x` to the detected branch set.
    pub fn distance(&self, x: &Point) -> f64 {
        self.points
            .iter()
            .map(|p| crate::ifs::dist(&p.x, x.as_slice()))
            .chain(self.sampled.iter().map(|p| (p - x).norm()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Particular solution and null-space basis of `D y = rhs`.
fn affine_solution(d: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<(DVector<f64>, Vec<DVector<f64>>)> {
    let n = d.ncols();
    let svd = d.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref()?, svd.v_t.as_ref()?);
    let smax = svd.singular_values.max();
    let cut = 1e-12 * smax.max(1.0);
    let mut y = DVector::zeros(n);
    let mut null = Vec::new();
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        let v = vt.row(k).transpose();
        if s > cut {
            y += &v * (u.column(k).dot(rhs) / s);
        } else {
            null.push(v);
        }
    }
    let residual = (d * &y - rhs).norm();
    (residual <= 1e-12 * rhs.norm().max(1.0)).then_some((y, null))
}

fn distance_to_subspace(p: &Point, base: &Point, null: &[DVector<f64>]) -> (f64, Point) {
    let mut proj = base.clone();
    let delta = p - base;
    for v in null {
        proj += v * v.dot(&delta);
    }
    ((p - &proj).norm(), proj)
}

fn bucket(p: &Point, size: f64) -> Vec<i64> {
    p.iter().map(|v| (v / size).floor() as i64).collect()
}

/// Solves `γ_i(y) = γ_j(y)` and intersects the solutions with `K` at cell
/// depth `depth`; `tol` is the membership slack.
pub fn branch_solve(
    system: &IfsSystem,
    i: usize,
    j: usize,
    depth: usize,
    tol: f64,
) -> Result<PairSolution> {
    if i == j || i >= system.len() || j >= system.len() {
        return invalid("branch_solve needs two distinct valid symbols");
    }
    let (a, b) = (system.map(i), system.map(j));
    let d = a.matrix() - b.matrix();
    let rhs = b.offset() - a.offset();
    let scale = a.matrix().abs().max().max(b.matrix().abs().max()).max(1.0);
    if d.abs().max() <= 1e-15 * scale {
        return Ok(if rhs.abs().max() <= 1e-15 * scale {
            PairSolution::Identical
        } else {
            PairSolution::Empty
        });
    }
    let Some((base, null)) = affine_solution(&d, &rhs) else {
        return Ok(PairSolution::Empty);
    };
    if null.is_empty() {
        let in_attractor = system.near_attractor(&base, depth, tol);
        let x = a.apply(&base);
        return Ok(PairSolution::Isolated {
            y: to_vec(&base),
            x: to_vec(&x),
            in_attractor,
        });
    }
    let refinement = system.refine(depth, REFINE_BUDGET, |_, c, r| {
        distance_to_subspace(c, &base, &null).0 <= r + tol
    });
    let resolution = system.tolerance(refinement.depth);
    let mut seen = HashSet::new();
    let mut x_points = Vec::new();
    let mut y_points = Vec::new();
    for cell in &refinement.cells {
        let (_, y) = distance_to_subspace(&cell.center, &base, &null);
        let x = a.apply(&y);
        if seen.insert(bucket(&x, resolution / 2.0)) {
            x_points.push(x);
            y_points.push(y);
        }
    }
    let extent = diameter(&x_points);
    Ok(PairSolution::Subspace {
        base: to_vec(&base),
        directions: null.iter().map(to_vec).collect(),
        depth: refinement.depth,
        cells: refinement.cells.len(),
        extent,
        x_points,
        y_points,
    })
}

fn diameter(points: &[Point]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let d = first.len();
    (0..d)
        .map(|k| {
            let lo = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn subspace_of(solution: &PairSolution) -> (Point, Vec<DVector<f64>>) {
    match solution {
        PairSolution::Subspace {
            base, directions, ..
        } => (
            DVector::from_vec(base.clone()),
            directions.iter().map(|d| DVector::from_vec(d.clone())).collect(),
        ),
        _ => unreachable!("only called on subspace solutions"),
    }
}

/// Looks for an exact point `γ_w(p_k)` (fixed point `p_k`, `|w| ≤ 4`) on the
/// solution subspace within `radius` of `near`.
fn snap_to_coding_point(
    system: &IfsSystem,
    base: &Point,
    null: &[DVector<f64>],
    near: &Point,
    radius: f64,
) -> Option<Point> {
    let n = system.len();
    let exact = system.merge_tol();
    let mut frontier: Vec<Point> = (0..n).map(|k| system.fixed_point(k)).collect();
    for _ in 0..=4 {
        let mut hits: Vec<&Point> = frontier
            .iter()
            .filter(|p| (*p - near).norm() <= radius && distance_to_subspace(p, base, null).0 <= exact)
            .collect();
        hits.sort_by(|a, b| (*a - near).norm().total_cmp(&(*b - near).norm()));
        if let Some(p) = hits.first() {
            return Some((*p).clone());
        }
        frontier = system
            .maps()
            .iter()
            .flat_map(|g| frontier.iter().map(move |p| g.apply(p)))
            .collect();
    }
    None
}

/// One group of `{γ_i(y)}` with its multiplicity `e(x, y)`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct IndexGroup {
    pub x: Vec<f64>,
    pub e: usize,
    pub indices: Vec<usize>,
}

/// Groups the images `γ_i(y)` by coincidence.
pub fn branch_index(system: &IfsSystem, y: &Point) -> Result<Vec<IndexGroup>> {
    if y.len() != system.dimension() {
        return invalid("point dimension mismatch");
    }
    let tol = system.merge_tol();
    let mut groups: Vec<(Point, Vec<usize>)> = Vec::new();
    for (i, map) in system.maps().iter().enumerate() {
        let x = map.apply(y);
        match groups.iter_mut().find(|(p, _)| (p - &x).norm() <= tol) {
            Some((_, idx)) => idx.push(i + 1),
            None => groups.push((x, vec![i + 1])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(x, indices)| IndexGroup {
            x: to_vec(&x),
            e: indices.len(),
            indices,
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct IndexSet {
    /// One-based symbols `i` with `x ∈ γ_i(K)`.
    pub members: Vec<usize>,
    /// Symbols whose map could not be inverted.
    pub undetermined: Vec<usize>,
    pub depth: usize,
    pub tol: f64,
}

/// `I(x) = {i : x = γ_i(y) for some y ∈ K}` at cell depth `depth`.
pub fn index_set(system: &IfsSystem, x: &Point, depth: usize, tol: f64) -> Result<IndexSet> {
    if x.len() != system.dimension() {
        return invalid("point dimension mismatch");
    }
    let mut members = Vec::new();
    let mut undetermined = Vec::new();
    for (i, map) in system.maps().iter().enumerate() {
        match map.affine().invert_point(x) {
            Some(y) => {
                if system.near_attractor(&y, depth, tol) {
                    members.push(i + 1);
                }
            }
            None => undetermined.push(i + 1),
        }
    }
    Ok(IndexSet {
        members,
        undetermined,
        depth,
        tol,
    })
}

/// Aggregates [`branch_solve`] over all pairs `i < j`.
pub fn branch_scan(system: &IfsSystem, depth: usize, tol: f64) -> Result<BranchReport> {
    let n = system.len();
    let resolution = system.tolerance(depth);
    let mut pairs = Vec::new();
    let mut points: Vec<BranchPoint> = Vec::new();
    let mut sampled = Vec::new();
    let mut sampled_seen = HashSet::new();
    let mut infinite = false;

    let add_point = |x: &Point, y: &Point, points: &mut Vec<BranchPoint>| -> Result<()> {
        if points.iter().any(|p| crate::ifs::dist(&p.x, x.as_slice()) <= 1e-9) {
            return Ok(());
        }
        let groups = branch_index(system, y)?;
        let g = groups
            .into_iter()
            .min_by(|a, b| {
                let da = crate::ifs::dist(&a.x, x.as_slice());
                let db = crate::ifs::dist(&b.x, x.as_slice());
                da.total_cmp(&db)
            })
            .ok_or_else(|| Error::Internal("no image groups".into()))?;
        points.push(BranchPoint {
            x: to_vec(x),
            y: to_vec(y),
            index: g.e,
            indices: g.indices,
        });
        Ok(())
    };

    for i in 0..n {
        for j in i + 1..n {
            let solution = branch_solve(system, i, j, depth, tol)?;
            match &solution {
                PairSolution::Isolated {
                    y, x, in_attractor: true,
                } => {
                    add_point(
                        &DVector::from_vec(x.clone()),
                        &DVector::from_vec(y.clone()),
                        &mut points,
                    )?;
                }
                PairSolution::Subspace {
                    x_points,
                    y_points,
                    extent,
                    depth: reached,
                    ..
                } if !x_points.is_empty() => {
                    let reach = 4.0 * system.tolerance(*reached);
                    if *extent <= reach {
                        // a single touching point seen through the subspace
                        let (base, null) = subspace_of(&solution);
                        let y = snap_to_coding_point(system, &base, &null, &y_points[0], reach)
                            .unwrap_or_else(|| y_points[0].clone());
                        add_point(&system.map(i).apply(&y), &y, &mut points)?;
                    } else {
                        infinite = true;
                        for x in x_points {
                            if sampled_seen.insert(bucket(x, resolution / 2.0)) {
                                sampled.push(x.clone());
                            }
                        }
                    }
                }
                PairSolution::Identical => infinite = true,
                _ => {}
            }
            pairs.push(PairReport {
                pair: [i + 1, j + 1],
                solution,
            });
        }
    }
    let cardinality = if infinite {
        Cardinality::InfiniteAtResolution { depth }
    } else if points.is_empty() {
        Cardinality::Empty
    } else {
        Cardinality::Finite {
            count: points.len(),
        }
    };
    Ok(BranchReport {
        depth,
        tol,
        resolution,
        pairs,
        points,
        sampled_count: sampled.len(),
        sampled,
        cardinality,
    })
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Undetermined,
}

impl Verdict {
    /// Exit code vocabulary shared with the command line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Holds => 0,
            Verdict::Fails => 1,
            Verdict::Undetermined => 3,
        }
    }
}

/// A separation verdict with its witness and resolution metadata.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub verdict: Verdict,
    pub depth: usize,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Smallest separation found between cell balls (negative = overlap).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Witness {
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub words: Vec<Word>,
}

/// Graph separation: holds iff the detected branch set is empty.
pub fn check_graph_separation(system: &IfsSystem, depth: usize, tol: f64) -> Result<Check> {
    let report = branch_scan(system, depth, tol)?;
    Ok(graph_check_from(&report))
}

pub fn graph_check_from(report: &BranchReport) -> Check {
    let witness = report
        .points
        .first()
        .map(|p| Witness {
            x: p.x.clone(),
            y: Some(p.y.clone()),
            words: Vec::new(),
        })
        .or_else(|| {
            report.pairs.iter().find_map(|p| match &p.solution {
                PairSolution::Subspace {
                    x_points, y_points, ..
                } if !x_points.is_empty() => Some(Witness {
                    x: to_vec(&x_points[0]),
                    y: Some(to_vec(&y_points[0])),
                    words: Vec::new(),
                }),
                _ => None,
            })
        });
    let (verdict, detail) = if report.is_empty() {
        (Verdict::Holds, "no branch points".to_string())
    } else {
        (Verdict::Fails, format!("branch set {:?}", report.cardinality))
    };
    Check {
        verdict,
        depth: report.depth,
        tol: report.tol,
        witness,
        gap: None,
        detail,
    }
}

struct CellState {
    word: Word,
    affine: crate::ifs::Affine,
    lip: f64,
}

impl CellState {
    fn child(&self, system: &IfsSystem, k: usize) -> CellState {
        CellState {
            word: self.word.concat(&Word(vec![k])),
            affine: self.affine.compose(system.map(k).affine()),
            lip: self.lip * system.bounds()[k].upper,
        }
    }
}

/// Strong separation: `γ_i(K) ∩ γ_j(K) = ∅` for `i ≠ j`.
///
/// Cell pairs under different first symbols are refined while their balls
/// overlap. At every level, images of fixed points of all maps are compared
/// to find exact touching points.
pub fn check_strong_separation(system: &IfsSystem, depth: usize, tol: f64) -> Result<Check> {
    let n = system.len();
    let hull = system.hull();
    let fixed: Vec<Point> = (0..n).map(|k| system.fixed_point(k)).collect();
    let root = CellState {
        word: Word::empty(),
        affine: crate::ifs::Affine::identity(system.dimension()),
        lip: 1.0,
    };
    let mut pairs: Vec<(CellState, CellState)> = Vec::new();
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((root.child(system, i), root.child(system, j)));
        }
    }
    for level in 1..=depth {
        let mut next = Vec::new();
        for (u, v) in pairs {
            let cu = u.affine.apply(&hull.center);
            let cv = v.affine.apply(&hull.center);
            let sep = (&cu - &cv).norm() - (u.lip + v.lip) * hull.radius;
            if sep > 0.0 {
                gap = gap.min(sep);
                continue;
            }
            for p in &fixed {
                let a = u.affine.apply(p);
                for q in &fixed {
                    let b = v.affine.apply(q);
                    if (&a - &b).norm() <= tol {
                        return Ok(Check {
                            verdict: Verdict::Fails,
                            depth: level,
                            tol,
                            witness: Some(Witness {
                                x: to_vec(&a),
                                y: None,
                                words: vec![u.word.clone(), v.word.clone()],
                            }),
                            gap: Some(sep),
                            detail: format!("images of cells {} and {} touch", u.word, v.word),
                        });
                    }
                }
            }
            next.push((u, v));
        }
        if next.is_empty() {
            return Ok(Check {
                verdict: Verdict::Holds,
                depth: level,
                tol,
                witness: None,
                gap: Some(gap),
                detail: format!("all first-level images separated by cells at depth {level}"),
            });
        }
        if level == depth || next.len() * n * n > PAIR_BUDGET {
            let tightest = next
                .iter()
                .map(|(u, v)| {
                    (u.affine.apply(&hull.center) - v.affine.apply(&hull.center)).norm()
                        - (u.lip + v.lip) * hull.radius
                })
                .fold(f64::INFINITY, f64::min);
            return Ok(Check {
                verdict: Verdict::Undetermined,
                depth: level,
                tol,
                witness: None,
                gap: Some(tightest),
                detail: format!("{} overlapping cell pairs remain", next.len()),
            });
        }
        pairs = Vec::with_capacity(next.len() * n * n);
        for (u, v) in next {
            for a in 0..n {
                for b in 0..n {
                    pairs.push((u.child(system, a), v.child(system, b)));
                }
            }
        }
    }
    Ok(Check {
        verdict: Verdict::Undetermined,
        depth,
        tol,
        witness: None,
        gap: None,
        detail: "depth 0 decides nothing".into(),
    })
}

/// Open set condition with a supplied witness `V`.
///
/// Containment and disjointness are decided exactly for convex pieces whose
/// images are again representable; otherwise `samples` random points are
/// used to look for a counterexample.
pub fn check_open_set_condition(
    system: &IfsSystem,
    region: &Region,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<Check> {
    let hull = system.hull();
    let pieces = region.pieces(hull)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_v = |x: &Point| pieces.iter().any(|s| s.contains_open(x));
    let tol = crate::region::GEOM_SLACK;
    let result = |verdict, witness: Option<Point>, detail: String| Check {
        verdict,
        depth,
        tol,
        witness: witness.map(|x| Witness {
            x: to_vec(&x),
            y: None,
            words: Vec::new(),
        }),
        gap: None,
        detail,
    };

    // V must meet K.
    let m = (0..=depth)
        .take_while(|&m| system.len().pow(m as u32) <= 1 << 14)
        .last()
        .unwrap_or(0);
    let probe = SampleGrid::new(Arc::new(system.clone()), m)?;
    if !probe.points().iter().any(&in_v) {
        return Ok(result(
            Verdict::Fails,
            None,
            format!("no depth-{m} coding point lies in V"),
        ));
    }

    let mut undetermined = Vec::new();
    let images: Vec<Vec<Option<Shape>>> = system
        .maps()
        .iter()
        .map(|g| pieces.iter().map(|s| s.map(g.affine())).collect())
        .collect();

    // (a) γ_i(V) ⊂ V
    for (i, g) in system.maps().iter().enumerate() {
        for (k, piece) in pieces.iter().enumerate() {
            if let Some(img) = &images[i][k] {
                if pieces.iter().any(|s| img.within(s) == Some(true)) {
                    continue;
                }
            }
            let mut candidates: Vec<Point> = vec![g.apply(&piece.interior_point())];
            candidates.extend((0..samples).map(|_| g.apply(&piece.sample(&mut rng))));
            if let Some(x) = candidates.into_iter().find(|x| !in_v(x)) {
                return Ok(result(
                    Verdict::Fails,
                    Some(x),
                    format!("image of V under map {} leaves V", i + 1),
                ));
            }
            undetermined.push(format!("containment of map {} image of piece {}", i + 1, k + 1));
        }
    }

    // (b) γ_i(V) ∩ γ_j(V) = ∅
    let n = system.len();
    for i in 0..n {
        for j in i + 1..n {
            for (ka, pa) in pieces.iter().enumerate() {
                for (kb, _) in pieces.iter().enumerate() {
                    let exact = match (&images[i][ka], &images[j][kb]) {
                        (Some(a), Some(b)) => a.disjoint(b),
                        _ => None,
                    };
                    if exact == Some(true) {
                        continue;
                    }
                    let gj = system.map(j).affine();
                    let hit = (0..samples.max(1)).find_map(|s| {
                        let p = if s == 0 {
                            pa.interior_point()
                        } else {
                            pa.sample(&mut rng)
                        };
                        let x = system.map(i).apply(&p);
                        let pre = gj.invert_point(&x)?;
                        pieces[kb].contains_open(&pre).then_some(x)
                    });
                    if let Some(x) = hit {
                        return Ok(result(
                            Verdict::Fails,
                            Some(x),
                            format!("images under maps {} and {} overlap", i + 1, j + 1),
                        ));
                    }
                    undetermined.push(format!(
                        "disjointness of maps {} and {} on pieces {} and {}",
                        i + 1,
                        j + 1,
                        ka + 1,
                        kb + 1
                    ));
                }
            }
        }
    }
    if undetermined.is_empty() {
        Ok(result(Verdict::Holds, None, "all images contained and disjoint".into()))
    } else {
        Ok(result(
            Verdict::Undetermined,
            None,
            format!("not decided: {}", undetermined.join("; ")),
        ))
    }
}

/// All three separation verdicts.
#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub strong: Check,
    pub graph: Check,
    pub open_set: Check,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_region: Option<Region>,
}

/// Path space `P_n` over a sample grid, keyed by `y * N^n + index(w)`.
///
/// Each key stores its chain of grid indices `c_0, ..., c_n` with `c_n = y`
/// and `c_{k-1}` the grid point standing for `γ_{w_k}(c_k)`, plus the exact
/// first coordinate `γ_w(y)`.
#[derive(Debug)]
pub struct PathSample {
    grid: Arc<SampleGrid>,
    depth: usize,
    words: usize,
    chains: Vec<usize>,
    endpoints: Vec<Point>,
}

impl PathSample {
    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.grid
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `N^n`.
    pub fn words(&self) -> usize {
        self.words
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn key(&self, w: usize, y: usize) -> usize {
        y * self.words + w
    }

    pub fn word(&self, w: usize) -> Word {
        Word::from_index(w, self.depth, self.grid.system().len())
    }

    /// Grid chain `c_0, ..., c_n` of a key.
    pub fn chain(&self, key: usize) -> &[usize] {
        let s = self.depth + 1;
        &self.chains[key * s..(key + 1) * s]
    }

    /// Exact `γ_w(y)`.
    pub fn endpoint(&self, key: usize) -> &Point {
        &self.endpoints[key]
    }

    /// Exact tuple `(γ_{w_1..w_n}(y), γ_{w_2..w_n}(y), ..., y)`.
    pub fn tuple(&self, key: usize) -> Vec<Point> {
        let (w, y) = (key % self.words, key / self.words);
        let word = self.word(w);
        let system = self.grid.system();
        let mut out = vec![self.grid.point(y).clone()];
        for &s in word.0.iter().rev() {
            let next = system.map(s).apply(out.last().unwrap());
            out.push(next);
        }
        out.reverse();
        out
    }

    pub fn same(&self, other: &PathSample) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) && self.depth == other.depth
    }

    /// For each word, the smallest word with the same exact endpoint
    /// `γ_w(y)`, i.e. the point of `𝒢_n` the key belongs to.
    pub fn endpoint_reps(&self, y: usize) -> Vec<usize> {
        let tol = self.grid.system().merge_tol();
        let base = y * self.words;
        let mut order: Vec<usize> = (0..self.words).collect();
        order.sort_by(|&a, &b| {
            self.endpoints[base + a][0]
                .total_cmp(&self.endpoints[base + b][0])
                .then(a.cmp(&b))
        });
        let mut parent: Vec<usize> = (0..self.words).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (pos, &w) in order.iter().enumerate() {
            let p = &self.endpoints[base + w];
            for &v in order[..pos].iter().rev() {
                let q = &self.endpoints[base + v];
                if p[0] - q[0] > tol {
                    break;
                }
                if (p - q).norm() <= tol {
                    let (a, b) = (find(&mut parent, w), find(&mut parent, v));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let reps: Vec<usize> = (0..self.words).map(|w| find(&mut parent, w)).collect();
        reps
    }
}

/// Materializes `P_n` over `grid`; refuses when `N^n · |grid|` exceeds `cap`.
pub fn build_path_sample(grid: Arc<SampleGrid>, n: usize, cap: usize) -> Result<Arc<PathSample>> {
    let system = grid.system().clone();
    let big_n = system.len();
    let words = (big_n as u128).pow(n as u32);
    let required = words * grid.len() as u128;
    if required > cap as u128 {
        return Err(Error::Resource {
            what: format!("depth-{n} path sample"),
            required,
            cap: cap as u128,
        });
    }
    let words = words as usize;
    let total = words * grid.len();
    let mut chains = Vec::with_capacity(total * (n + 1));
    let mut endpoints = Vec::with_capacity(total);
    for y in 0..grid.len() {
        for w in 0..words {
            let word = Word::from_index(w, n, big_n);
            let start = chains.len();
            chains.resize(start + n + 1, 0);
            chains[start + n] = y;
            for k in (0..n).rev() {
                chains[start + k] = grid.image(word.0[k], chains[start + k + 1]);
            }
            endpoints.push(system.apply_word(&word, grid.point(y))?);
        }
    }
    Ok(Arc::new(PathSample {
        grid,
        depth: n,
        words,
        chains,
        endpoints,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{ContractionMap, Hull};

    fn line(maps: &[(f64, f64)]) -> IfsSystem {
        let maps = maps
            .iter()
            .map(|&(m, t)| ContractionMap::from_rows(&[vec![m]], &[t]).unwrap())
            .collect();
        IfsSystem::new(
            None,
            Hull {
                center: DVector::from_vec(vec![0.5]),
                radius: 0.5,
            },
            maps,
        )
        .unwrap()
    }

    fn pt(v: f64) -> Point {
        DVector::from_vec(vec![v])
    }

    #[test]
    fn cantor_pair_is_empty() {
        let c = line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]);
        assert!(matches!(branch_solve(&c, 0, 1, 8, 1e-9).unwrap(), PairSolution::Empty));
        assert!(branch_scan(&c, 8, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn tent_branch_point() {
        let t = line(&[(0.5, 0.0), (-0.5, 1.0)]);
        match branch_solve(&t, 0, 1, 10, 1e-9).unwrap() {
            PairSolution::Isolated { y, x, in_attractor } => {
                assert_eq!(y, vec![1.0]);
                assert_eq!(x, vec![0.5]);
                assert!(in_attractor);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = branch_scan(&t, 10, 1e-9).unwrap();
        assert_eq!(r.cardinality, Cardinality::Finite { count: 1 });
        assert_eq!(r.points[0].indices, vec![1, 2]);
    }

    #[test]
    fn branch_indices_on_tent() {
        let t = line(&[(0.5, 0.0), (-0.5, 1.0)]);
        let g = branch_index(&t, &pt(1.0)).unwrap();
        assert_eq!(g, vec![IndexGroup { x: vec![0.5], e: 2, indices: vec![1, 2] }]);
        let g = branch_index(&t, &pt(0.0)).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].e, g[1].e), (1, 1));
    }

    #[test]
    fn index_sets() {
        let c = line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]);
        assert!(index_set(&c, &pt(0.5), 12, 1e-9).unwrap().members.is_empty());
        // 0.25 = γ_1(0.75) and 0.75 lies in the Cantor set
        assert_eq!(index_set(&c, &pt(0.25), 12, 1e-9).unwrap().members, vec![1]);
        // 0.2 = γ_1(0.6) but 0.6 lies in a removed interval
        assert!(index_set(&c, &pt(0.2), 12, 1e-9).unwrap().members.is_empty());
        let t = line(&[(0.5, 0.0), (-0.5, 1.0)]);
        assert_eq!(index_set(&t, &pt(0.5), 10, 1e-9).unwrap().members, vec![1, 2]);
    }

    #[test]
    fn strong_separation_cases() {
        let c = line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]);
        let s = check_strong_separation(&c, 10, 1e-9).unwrap();
        assert_eq!(s.verdict, Verdict::Holds);
        assert!((s.gap.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let m = line(&[(0.5, 0.0), (0.5, 0.5)]);
        let s = check_strong_separation(&m, 10, 1e-9).unwrap();
        assert_eq!(s.verdict, Verdict::Fails);
        assert_eq!(s.witness.unwrap().x, vec![0.5]);
    }

    #[test]
    fn open_set_intervals() {
        let t = line(&[(0.5, 0.0), (-0.5, 1.0)]);
        let ok = check_open_set_condition(&t, &Region::interval(0.0, 1.0), 8, 50, 1).unwrap();
        assert_eq!(ok.verdict, Verdict::Holds);
        let bad = check_open_set_condition(&t, &Region::interval(0.0, 0.4), 8, 50, 1).unwrap();
        assert_eq!(bad.verdict, Verdict::Fails);
        let x = bad.witness.unwrap().x[0];
        assert!(x > 0.8 && x < 1.0);
    }

    #[test]
    fn path_sample_counts_and_endpoints() {
        let t = Arc::new(line(&[(0.5, 0.0), (-0.5, 1.0)]));
        let g = SampleGrid::new(t.clone(), 2).unwrap();
        assert_eq!(build_path_sample(g.clone(), 1, 1 << 20).unwrap().len(), 8);
        let p0 = build_path_sample(g.clone(), 0, 1 << 20).unwrap();
        assert_eq!(p0.len(), g.len());

        let c = Arc::new(line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]));
        let g = SampleGrid::new(c.clone(), 1).unwrap();
        let p = build_path_sample(g.clone(), 2, 1 << 20).unwrap();
        assert_eq!(p.len(), 8);
        let w = Word::from_symbols(&[1, 2]).unwrap().index(2);
        for y in 0..g.len() {
            let key = p.key(w, y);
            let expected = c.map(0).apply(&c.map(1).apply(g.point(y)));
            assert!((p.endpoint(key) - &expected).norm() < 1e-15);
            assert!((&p.tuple(key)[0] - &expected).norm() < 1e-15);
        }
        assert!(matches!(
            build_path_sample(g, 2, 4),
            Err(Error::Resource { required: 8, .. })
        ));
    }
}
