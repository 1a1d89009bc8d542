//! Systems of proper affine contractions and their attractors.
//!
//! Every map is `x -> M x + t` on `R^d`. Words are stored with zero-based
//! symbols; they are displayed and serialized one-based, matching the usual
//! `{1, ..., N}` alphabet.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Point = DVector<f64>;

/// Default cap on materialized cells / grid points.
pub const DEFAULT_CELL_CAP: usize = 1 << 22;

/// Two images `gamma_i(y)`, `gamma_j(y)` closer than this (relative to the
/// hull radius) are treated as the same point of the cograph.
pub const MERGE_TOL: f64 = 1e-12;

/// Slack used when testing hull invariance.
const HULL_SLACK: f64 = 1e-12;

/// An affine map `x -> matrix * x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl Affine {
    pub fn identity(dim: usize) -> Self {
        Affine {
            matrix: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }

    pub fn apply(&self, x: &Point) -> Point {
        &self.matrix * x + &self.offset
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine {
            matrix: &self.matrix * &other.matrix,
            offset: &self.matrix * &other.offset + &self.offset,
        }
    }

    /// Solves `self(y) = x`; `None` when the linear part is singular.
    pub fn invert_point(&self, x: &Point) -> Option<Point> {
        self.matrix.clone().lu().solve(&(x - &self.offset))
    }

    pub fn singular_values(&self) -> DVector<f64> {
        self.matrix.clone().svd(false, false).singular_values
    }
}

/// One contraction `gamma_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionMap {
    affine: Affine,
}

/// Best constants `c d(x,y) <= d(γx, γy) <= c' d(x,y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ContractionBounds {
    pub fn is_proper(&self) -> bool {
        self.lower > 0.0 && self.upper < 1.0
    }
}

impl ContractionMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return invalid(format!(
                "matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.nrows() != offset.len() {
            return invalid(format!(
                "offset has length {}, matrix is {}x{}",
                offset.len(),
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        if matrix.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return invalid("non-finite matrix or offset entry");
        }
        Ok(ContractionMap {
            affine: Affine { matrix, offset },
        })
    }

    /// Builds a map from row-major rows.
    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("matrix rows have inconsistent lengths");
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(matrix, DVector::from_column_slice(offset))
    }

    pub fn dimension(&self) -> usize {
        self.affine.offset.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.affine.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.affine.offset
    }

    pub fn affine(&self) -> &Affine {
        &self.affine
    }

    pub fn apply(&self, x: &Point) -> Point {
        self.affine.apply(x)
    }
}

/// Singular-value contraction constants of an affine map.
pub fn contraction_bounds(map: &ContractionMap) -> ContractionBounds {
    let sv = map.affine.singular_values();
    let lower = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = sv.iter().cloned().fold(0.0, f64::max);
    ContractionBounds {
        lower: if lower.is_finite() { lower } else { 0.0 },
        upper,
    }
}

/// Closed ball mapped into itself by every map.
#[derive(Clone, Debug, PartialEq)]
pub struct Hull {
    pub center: Point,
    pub radius: f64,
}

/// A word `w = (w_1, ..., w_m)`; `γ_w = γ_{w_1} ∘ ... ∘ γ_{w_m}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// From one-based symbols as written in the literature.
    pub fn from_symbols(symbols: &[usize]) -> Result<Self> {
        if symbols.contains(&0) {
            return invalid("symbols are one-based");
        }
        Ok(Word(symbols.iter().map(|s| s - 1).collect()))
    }

    pub fn repeat(symbol: usize, len: usize) -> Self {
        Word(vec![symbol; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prepend(&self, symbol: usize) -> Word {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(symbol);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// Base-`n` index with the first symbol most significant.
    pub fn index(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &s| acc * n + s)
    }

    pub fn from_index(mut index: usize, len: usize, n: usize) -> Word {
        let mut v = vec![0; len];
        for slot in v.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        Word(v)
    }

    /// One-based symbols.
    pub fn symbols(&self) -> Vec<usize> {
        self.0.iter().map(|s| s + 1).collect()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s + 1)?;
        }
        write!(f, ")")
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.symbols().serialize(s)
    }
}

/// Outcome of [`IfsSystem::verify_proper`].
#[derive(Clone, Debug, Serialize)]
pub struct PropernessReport {
    pub bounds: Vec<ContractionBounds>,
    pub max_upper: f64,
    pub hull_invariant: bool,
    pub proper: bool,
    pub offending_maps: Vec<usize>,
}

impl PropernessReport {
    pub fn pass(&self) -> bool {
        self.proper && self.hull_invariant
    }
}

/// `γ = (γ_1, ..., γ_N)` together with an invariant hull ball.
#[derive(Clone, Debug)]
pub struct IfsSystem {
    name: Option<String>,
    maps: Vec<ContractionMap>,
    hull: Hull,
    bounds: Vec<ContractionBounds>,
    base_point: Point,
}

impl IfsSystem {
    /// Shape checks only; see [`IfsSystem::new`] for the validated constructor.
    pub fn from_parts(
        name: Option<String>,
        hull: Hull,
        maps: Vec<ContractionMap>,
    ) -> Result<Self> {
        if maps.len() < 2 {
            return invalid(format!("need at least 2 maps, got {}", maps.len()));
        }
        let d = hull.center.len();
        if d == 0 {
            return invalid("dimension must be positive");
        }
        if let Some(k) = maps.iter().position(|m| m.dimension() != d) {
            return invalid(format!(
                "map {} has dimension {}, hull has dimension {}",
                k + 1,
                maps[k].dimension(),
                d
            ));
        }
        if !(hull.radius.is_finite() && hull.radius > 0.0) || hull.center.iter().any(|v| !v.is_finite())
        {
            return invalid("hull radius must be positive and finite");
        }
        let bounds: Vec<_> = maps.iter().map(contraction_bounds).collect();
        let first = &maps[0].affine;
        let lhs = DMatrix::identity(d, d) - &first.matrix;
        let base_point = lhs.lu().solve(&first.offset).ok_or_else(|| {
            Error::InvalidInput("first map has no unique fixed point".into())
        })?;
        Ok(IfsSystem {
            name,
            maps,
            hull,
            bounds,
            base_point,
        })
    }

    /// Builds a system and rejects it unless every map is proper and the
    /// hull is invariant.
    pub fn new(name: Option<String>, hull: Hull, maps: Vec<ContractionMap>) -> Result<Self> {
        let sys = Self::from_parts(name, hull, maps)?;
        let report = sys.verify_proper()?;
        if !report.proper {
            let k = report.offending_maps[0];
            return Err(Error::Improper {
                map: k + 1,
                lower: report.bounds[k].lower,
                upper: report.bounds[k].upper,
            });
        }
        Ok(sys)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.hull.center.len()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[ContractionMap] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &ContractionMap {
        &self.maps[i]
    }

    pub fn hull(&self) -> &Hull {
        &self.hull
    }

    pub fn bounds(&self) -> &[ContractionBounds] {
        &self.bounds
    }

    /// `max_i c'_i`.
    pub fn max_contraction(&self) -> f64 {
        self.bounds.iter().map(|b| b.upper).fold(0.0, f64::max)
    }

    /// Fixed point of `γ_1`, the base point of every sample grid.
    pub fn base_point(&self) -> &Point {
        &self.base_point
    }

    /// Scale used for merge comparisons.
    pub fn merge_tol(&self) -> f64 {
        MERGE_TOL * self.hull.radius.max(1.0)
    }

    /// `tol_m = 2 (max c')^m · diam(hull)`.
    pub fn tolerance(&self, m: usize) -> f64 {
        2.0 * self.max_contraction().powi(m as i32) * 2.0 * self.hull.radius
    }

    pub fn verify_proper(&self) -> Result<PropernessReport> {
        let offending: Vec<usize> = self
            .bounds
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_proper())
            .map(|(k, _)| k)
            .collect();
        let r = self.hull.radius;
        for (k, map) in self.maps.iter().enumerate() {
            let moved = (map.apply(&self.hull.center) - &self.hull.center).norm();
            let excess = moved + self.bounds[k].upper * r - r;
            if excess > HULL_SLACK * r.max(1.0) {
                return Err(Error::HullViolation { map: k + 1, excess });
            }
        }
        Ok(PropernessReport {
            bounds: self.bounds.clone(),
            max_upper: self.max_contraction(),
            hull_invariant: true,
            proper: offending.is_empty(),
            offending_maps: offending,
        })
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        match w.0.iter().find(|&&s| s >= self.len()) {
            Some(s) => invalid(format!("symbol {} out of range 1..={}", s + 1, self.len())),
            None => Ok(()),
        }
    }

    /// `γ_w(x)`, innermost symbol applied first.
    pub fn apply_word(&self, w: &Word, x: &Point) -> Result<Point> {
        self.check_word(w)?;
        if x.len() != self.dimension() {
            return invalid("point dimension mismatch");
        }
        Ok(w.0.iter().rev().fold(x.clone(), |acc, &s| self.maps[s].apply(&acc)))
    }

    /// The composed affine map `γ_w`.
    pub fn word_affine(&self, w: &Word) -> Result<Affine> {
        self.check_word(w)?;
        Ok(w.0.iter().fold(Affine::identity(self.dimension()), |acc, &s| {
            acc.compose(&self.maps[s].affine)
        }))
    }

    /// Product of the `c'` constants along a word.
    pub fn word_lipschitz(&self, w: &Word) -> f64 {
        w.0.iter().map(|&s| self.bounds[s].upper).product()
    }

    /// Fixed point of `γ_i`.
    pub fn fixed_point(&self, i: usize) -> Point {
        let a = &self.maps[i].affine;
        let d = self.dimension();
        (DMatrix::identity(d, d) - &a.matrix)
            .lu()
            .solve(&a.offset)
            .unwrap_or_else(|| a.offset.clone())
    }

    /// `γ_prefix(p★)` with the bound `(max c')^ℓ · diam(hull)` on the
    /// distance to `π(x)` for any infinite extension `x` of the prefix.
    pub fn coding_point(&self, prefix: &Word) -> Result<(Point, f64)> {
        if prefix.is_empty() {
            return invalid("coding prefix must be nonempty");
        }
        let p = self.apply_word(prefix, &self.base_point)?;
        let bound = self.max_contraction().powi(prefix.len() as i32) * 2.0 * self.hull.radius;
        Ok((p, bound))
    }

    /// `d(π(i·prefix), γ_i(π(prefix)))` evaluated on coding points.
    pub fn semiconjugacy_residual(&self, i: usize, prefix: &Word) -> Result<f64> {
        if i >= self.len() {
            return invalid("symbol out of range");
        }
        let (lhs, _) = self.coding_point(&prefix.prepend(i))?;
        let (inner, _) = self.coding_point(prefix)?;
        Ok((lhs - self.maps[i].apply(&inner)).norm())
    }

    /// Deterministic chaos-game sampler.
    pub fn chaos_game(&self, seed: u64, iterations: usize, burn_in: usize) -> Result<Vec<Point>> {
        if iterations <= burn_in {
            return invalid("iterations must exceed burn_in");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = self.base_point.clone();
        let mut out = Vec::with_capacity(iterations - burn_in);
        for step in 0..iterations {
            let k = rng.gen_range(0..self.len());
            x = self.maps[k].apply(&x);
            if step >= burn_in {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    /// Breadth-first refinement of the cell tree keeping only cells accepted
    /// by `keep(center, radius)`. Stops early when `budget` nodes would be
    /// exceeded at the next level.
    pub fn refine<F>(&self, max_depth: usize, budget: usize, mut keep: F) -> Refinement
    where
        F: FnMut(&Word, &Point, f64) -> bool,
    {
        let root = Node {
            word: Word::empty(),
            affine: Affine::identity(self.dimension()),
            lip: 1.0,
        };
        let mut level = Vec::new();
        if keep(&root.word, &self.hull.center, self.hull.radius) {
            level.push(root);
        }
        let mut depth = 0;
        while depth < max_depth && !level.is_empty() {
            if level.len().saturating_mul(self.len()) > budget {
                return self.finish(level, depth, true);
            }
            let mut next = Vec::with_capacity(level.len() * 2);
            for node in &level {
                for (i, map) in self.maps.iter().enumerate() {
                    let affine = node.affine.compose(&map.affine);
                    let lip = node.lip * self.bounds[i].upper;
                    let center = affine.apply(&self.hull.center);
                    let word = node.word.concat(&Word(vec![i]));
                    if keep(&word, &center, lip * self.hull.radius) {
                        next.push(Node { word, affine, lip });
                    }
                }
            }
            level = next;
            depth += 1;
        }
        self.finish(level, depth, false)
    }

    fn finish(&self, level: Vec<Node>, depth: usize, truncated: bool) -> Refinement {
        let cells = level
            .into_iter()
            .map(|n| RefinedCell {
                center: n.affine.apply(&self.hull.center),
                radius: n.lip * self.hull.radius,
                word: n.word,
                affine: n.affine,
            })
            .collect();
        Refinement {
            depth,
            truncated,
            cells,
        }
    }

    /// Cell-tree membership test: `y` lies within `slack` of some depth-`depth`
    /// cell ball. Never rejects a point of `K`.
    pub fn near_attractor(&self, y: &Point, depth: usize, slack: f64) -> bool {
        let r = self.refine(depth, usize::MAX, |_, c, rad| (y - c).norm() <= rad + slack);
        !r.cells.is_empty() && r.depth == depth
    }

    /// Stable 64-bit FNV-1a hash of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(&self.to_file()).unwrap_or_default();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    pub fn to_file(&self) -> IfsFile {
        IfsFile {
            name: self.name.clone().unwrap_or_default(),
            dimension: self.dimension(),
            hull: HullFile {
                center: self.hull.center.iter().cloned().collect(),
                radius: self.hull.radius,
            },
            maps: self
                .maps
                .iter()
                .map(|m| MapFile {
                    matrix: m
                        .matrix()
                        .row_iter()
                        .map(|r| r.iter().cloned().collect())
                        .collect(),
                    offset: m.offset().iter().cloned().collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &IfsFile) -> Result<Self> {
        if file.hull.center.len() != file.dimension {
            return invalid("hull center does not match dimension");
        }
        let maps = file
            .maps
            .iter()
            .enumerate()
            .map(|(k, m)| {
                if m.matrix.len() != file.dimension {
                    return invalid(format!("map {} matrix has wrong size", k + 1));
                }
                ContractionMap::from_rows(&m.matrix, &m.offset)
            })
            .collect::<Result<Vec<_>>>()?;
        let name = (!file.name.is_empty()).then(|| file.name.clone());
        IfsSystem::new(
            name,
            Hull {
                center: DVector::from_vec(file.hull.center.clone()),
                radius: file.hull.radius,
            },
            maps,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: IfsFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }
}

struct Node {
    word: Word,
    affine: Affine,
    lip: f64,
}

#[derive(Clone, Debug)]
pub struct RefinedCell {
    pub word: Word,
    pub affine: Affine,
    pub center: Point,
    pub radius: f64,
}

/// Surviving cells of [`IfsSystem::refine`].
#[derive(Clone, Debug)]
pub struct Refinement {
    pub depth: usize,
    pub truncated: bool,
    pub cells: Vec<RefinedCell>,
}

/// On-disk IFS definition.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IfsFile {
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    pub hull: HullFile,
    pub maps: Vec<MapFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HullFile {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MapFile {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

/// `K_w ⊂ ball(center, radius)`.
#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub word: Word,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// All cells of one depth in lexicographic word order.
#[derive(Clone, Debug, Serialize)]
pub struct CellTree {
    pub depth: usize,
    pub cells: Vec<Cell>,
}

impl CellTree {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Whether `y` lies in the union of cell balls (with `slack`).
    pub fn covers(&self, y: &[f64], slack: f64) -> bool {
        self.cells.iter().any(|c| dist(&c.center, y) <= c.radius + slack)
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Materializes every depth-`n` cell, refusing when `N^n > cap`.
pub fn attractor_cells(system: &IfsSystem, n: usize, cap: usize) -> Result<CellTree> {
    let required = (system.len() as u128).saturating_pow(n as u32);
    if required > cap as u128 {
        return Err(Error::Resource {
            what: format!("depth-{n} cell tree"),
            required,
            cap: cap as u128,
        });
    }
    let r = system.refine(n, usize::MAX, |_, _, _| true);
    Ok(CellTree {
        depth: n,
        cells: r
            .cells
            .into_iter()
            .map(|c| Cell {
                word: c.word,
                center: c.center.iter().cloned().collect(),
                radius: c.radius,
            })
            .collect(),
    })
}

/// Grid of coding points `γ_w(p★)`, `w ∈ W_m`, in lexicographic order.
///
/// Images `γ_i(y)` of grid points are looked up symbolically: the grid point
/// for `w` is sent to the grid point for `(i, w_1, ..., w_{m-1})`, which lies
/// within `tol_m / 2` of the exact image. Symbols whose exact images
/// coincide at `y` share the lookup of the smallest such symbol.
#[derive(Debug)]
pub struct SampleGrid {
    system: Arc<IfsSystem>,
    depth: usize,
    points: Vec<Point>,
    tol: f64,
    images: Vec<usize>,
    reps: Vec<usize>,
    exact_images: Vec<Point>,
}

impl SampleGrid {
    pub fn new(system: Arc<IfsSystem>, depth: usize) -> Result<Arc<Self>> {
        Self::with_cap(system, depth, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(system: Arc<IfsSystem>, depth: usize, cap: usize) -> Result<Arc<Self>> {
        let n = system.len();
        let required = (n as u128).saturating_pow(depth as u32);
        if required.saturating_mul(n as u128) > cap as u128 {
            return Err(Error::Resource {
                what: format!("depth-{depth} sample grid"),
                required: required * n as u128,
                cap: cap as u128,
            });
        }
        // level k from level k-1 by prepending a symbol
        let mut points = vec![system.base_point().clone()];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(points.len() * n);
            for map in system.maps() {
                for p in &points {
                    next.push(map.apply(p));
                }
            }
            points = next;
        }
        let size = points.len();
        let shift = if depth == 0 { 0 } else { size / n };
        let mtol = system.merge_tol();
        let mut images = Vec::with_capacity(size * n);
        let mut reps = Vec::with_capacity(size * n);
        let mut exact_images = Vec::with_capacity(size * n);
        for (y, p) in points.iter().enumerate() {
            let base = exact_images.len();
            for map in system.maps() {
                exact_images.push(map.apply(p));
            }
            for i in 0..n {
                let rep = (0..i)
                    .find(|&j| (&exact_images[base + j] - &exact_images[base + i]).norm() <= mtol)
                    .map(|j| reps[y * n + j])
                    .unwrap_or(i);
                reps.push(rep);
                images.push(if depth == 0 { 0 } else { rep * shift + y / n });
            }
        }
        let tol = system.tolerance(depth);
        Ok(Arc::new(SampleGrid {
            system,
            depth,
            points,
            tol,
            images,
            reps,
            exact_images,
        }))
    }

    pub fn system(&self) -> &Arc<IfsSystem> {
        &self.system
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn point(&self, y: usize) -> &Point {
        &self.points[y]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn word(&self, y: usize) -> Word {
        Word::from_index(y, self.depth, self.system.len())
    }

    /// Grid index standing for `γ_i(y)`.
    pub fn image(&self, i: usize, y: usize) -> usize {
        self.images[y * self.system.len() + i]
    }

    /// Exact `γ_i(y)` for a grid point.
    pub fn exact_image(&self, i: usize, y: usize) -> &Point {
        &self.exact_images[y * self.system.len() + i]
    }

    /// Smallest symbol `j` with `γ_j(y) = γ_i(y)`.
    pub fn representative(&self, i: usize, y: usize) -> usize {
        self.reps[y * self.system.len() + i]
    }

    /// Grid index standing for `γ_w(y)` (iterated lookups, innermost first).
    pub fn word_image(&self, w: &Word, y: usize) -> usize {
        w.0.iter().rev().fold(y, |acc, &s| self.image(s, acc))
    }

    /// Nearest grid point, ties broken by the lexicographically first word.
    pub fn nearest(&self, x: &Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (p - x).norm();
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            system_hash: self.system.content_hash(),
            depth: self.depth,
            size: self.len(),
            tol: self.tol,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GridDescriptor {
    pub system_hash: String,
    pub depth: usize,
    pub size: usize,
    pub tol: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn cantor() -> IfsSystem {
        line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)])
    }

    fn tent() -> IfsSystem {
        line(&[(0.5, 0.0), (-0.5, 1.0)])
    }

    fn pt(v: f64) -> Point {
        DVector::from_vec(vec![v])
    }

    #[test]
    fn bounds_of_line_maps() {
        let c = cantor();
        let b = contraction_bounds(c.map(0));
        assert!((b.lower - 1.0 / 3.0).abs() < 1e-15 && (b.upper - 1.0 / 3.0).abs() < 1e-15);
        let t = tent();
        let b = contraction_bounds(t.map(1));
        assert_eq!((b.lower, b.upper), (0.5, 0.5));
        let z = ContractionMap::from_rows(&[vec![0.0]], &[0.0]).unwrap();
        let b = contraction_bounds(&z);
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert!(!b.is_proper());
    }

    #[test]
    fn non_square_matrix_rejected() {
        let m = DMatrix::from_row_slice(1, 2, &[0.5, 0.0]);
        assert!(matches!(
            ContractionMap::new(m, DVector::zeros(1)),
            Err(Error::InvalidInput(_))
        ));
        assert!(ContractionMap::from_rows(&[vec![f64::NAN]], &[0.0]).is_err());
    }

    #[test]
    fn identity_map_is_improper() {
        let maps = vec![
            ContractionMap::from_rows(&[vec![0.5]], &[0.0]).unwrap(),
            ContractionMap::from_rows(&[vec![1.0]], &[0.0]).unwrap(),
        ];
        let hull = Hull {
            center: pt(0.5),
            radius: 0.5,
        };
        let sys = IfsSystem::from_parts(None, hull.clone(), maps.clone()).unwrap();
        let report = sys.verify_proper().unwrap();
        assert!(!report.pass());
        assert_eq!(report.offending_maps, vec![1]);
        assert!(matches!(
            IfsSystem::new(None, hull, maps),
            Err(Error::Improper { map: 2, .. })
        ));
    }

    #[test]
    fn hull_violation_names_map() {
        let maps = vec![
            ContractionMap::from_rows(&[vec![0.5]], &[0.0]).unwrap(),
            ContractionMap::from_rows(&[vec![0.5]], &[0.9]).unwrap(),
        ];
        let hull = Hull {
            center: pt(0.5),
            radius: 0.5,
        };
        let sys = IfsSystem::from_parts(None, hull, maps).unwrap();
        assert!(matches!(sys.verify_proper(), Err(Error::HullViolation { map: 2, .. })));
    }

    #[test]
    fn word_application() {
        let t = tent();
        let w = Word::from_symbols(&[1, 2]).unwrap();
        assert_eq!(t.apply_word(&w, &pt(0.0)).unwrap()[0], 0.5);
        assert_eq!(t.apply_word(&Word::empty(), &pt(0.3)).unwrap()[0], 0.3);
        let c = cantor();
        let w = Word::from_symbols(&[2, 1]).unwrap();
        assert!((c.apply_word(&w, &pt(0.0)).unwrap()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(c.apply_word(&Word(vec![2]), &pt(0.0)).is_err());
    }

    #[test]
    fn cells_of_cantor_and_gasket() {
        let c = cantor();
        let tree = attractor_cells(&c, 1, 1 << 10).unwrap();
        assert_eq!(tree.len(), 2);
        let lo: Vec<_> = tree.cells.iter().map(|c| c.center[0] - c.radius).collect();
        let hi: Vec<_> = tree.cells.iter().map(|c| c.center[0] + c.radius).collect();
        assert!((lo[0] - 0.0).abs() < 1e-15 && (hi[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((lo[1] - 2.0 / 3.0).abs() < 1e-15 && (hi[1] - 1.0).abs() < 1e-15);

        let root = attractor_cells(&c, 0, 1).unwrap();
        assert_eq!(root.len(), 1);
        assert_eq!(root.cells[0].radius, 0.5);

        assert!(matches!(
            attractor_cells(&c, 11, 1024),
            Err(Error::Resource { required: 2048, .. })
        ));
    }

    #[test]
    fn coding_points_and_bounds() {
        let c = cantor();
        let (p, _) = c.coding_point(&Word::repeat(0, 20)).unwrap();
        assert!(p[0].abs() < 1e-12);
        let (p, _) = c.coding_point(&Word::repeat(1, 30)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let (_, bound) = c.coding_point(&Word::from_symbols(&[2, 1]).unwrap()).unwrap();
        assert!((bound - 1.0 / 9.0).abs() < 1e-15);
        assert!(c.coding_point(&Word::empty()).is_err());
    }

    #[test]
    fn semiconjugacy_examples() {
        let c = cantor();
        let r = c.semiconjugacy_residual(0, &Word::repeat(1, 6)).unwrap();
        assert!(r <= 2.0 * (1.0f64 / 3.0).powi(6));
        let t = tent();
        let r = t.semiconjugacy_residual(1, &Word::repeat(0, 4)).unwrap();
        assert!(r <= 2.0 * 0.5f64.powi(4));
        // fixed-point word of γ_2
        let r = t.semiconjugacy_residual(1, &Word::repeat(1, 40)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn chaos_game_contract() {
        let c = cantor();
        assert!(c.chaos_game(1, 10, 10).is_err());
        let a = c.chaos_game(7, 200, 20).unwrap();
        let b = c.chaos_game(7, 200, 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 180);
    }

    #[test]
    fn grid_lookup_is_truncated_prepend() {
        let sys = Arc::new(cantor());
        let g = SampleGrid::new(sys.clone(), 3).unwrap();
        assert_eq!(g.len(), 8);
        for y in 0..g.len() {
            for i in 0..2 {
                let img = g.image(i, y);
                let expected = g.word(y).prepend(i);
                assert_eq!(g.word(img).0[..], expected.0[..3]);
                assert!((g.point(img) - g.exact_image(i, y)).norm() <= g.tol() / 2.0);
            }
        }
    }

    #[test]
    fn grid_merges_branch_images() {
        let sys = Arc::new(tent());
        let g = SampleGrid::new(sys, 4).unwrap();
        // y = 1 is the grid word (2,1,1,1)
        let y = Word::from_symbols(&[2, 1, 1, 1]).unwrap().index(2);
        assert_eq!(g.point(y)[0], 1.0);
        assert_eq!(g.representative(1, y), 0);
        assert_eq!(g.image(0, y), g.image(1, y));
    }
}
