//! Sampled function spaces `A = C(K)`, `X = C(𝒢)` and `Y_n = C(P_n)` with
//! the bimodule operations.
//!
//! Values live on the canonical grids of [`crate::ifs::SampleGrid`]. The left
//! action evaluates `a` at the grid point standing for `γ_i(y)`, so all
//! algebraic identities hold exactly on the grid.

mod compact;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cograph::{CographSample, PathSample};
use crate::error::{Error, Result};
use crate::ifs::{GridDescriptor, Point, SampleGrid};
use crate::C64;

pub use compact::{compact_approx, probe_lower_bound, CompactApprox, Probe, ProbeKind};

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-9;

fn mismatch<T>(what: &str) -> Result<T> {
    Err(Error::Mismatch(what.into()))
}

fn check_finite(values: &[C64]) -> Result<()> {
    match values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(k) => Err(Error::InvalidInput(format!("non-finite value at index {k}"))),
        None => Ok(()),
    }
}

/// Element of `A = C(K)`, one value per grid word.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    grid: Arc<SampleGrid>,
    values: Vec<C64>,
}

impl SampledFunction {
    pub fn new(grid: Arc<SampleGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values)?;
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: &Arc<SampleGrid>, f: impl Fn(&Point) -> C64) -> Self {
        let values = grid.points().iter().map(f).collect();
        SampledFunction {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real(grid: &Arc<SampleGrid>, f: impl Fn(&Point) -> f64) -> Self {
        Self::from_fn(grid, |p| C64::new(f(p), 0.0))
    }

    pub fn constant(grid: &Arc<SampleGrid>, c: C64) -> Self {
        SampledFunction {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn value(&self, y: usize) -> C64 {
        self.values[y]
    }

    /// Value at the nearest grid point (ties to the lexicographically first).
    pub fn eval_at(&self, x: &Point) -> C64 {
        self.values[self.grid.nearest(x)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sup |self - other|`.
    pub fn distance(&self, other: &SampledFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn same_grid(&self, other: &SampledFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) {
            Ok(())
        } else {
            mismatch("functions live on different grids")
        }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        SampledFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &SampledFunction, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(SampledFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Index of the maximum of `|a|`, first in grid order.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if v.norm() > self.values[best].norm() {
                best = k;
            }
        }
        best
    }

    pub fn to_file(&self) -> FunctionFile {
        FunctionFile {
            grid: self.grid.descriptor(),
            space: "A",
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
}

/// Serialized function values paired with their grid.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionFile {
    pub grid: GridDescriptor,
    pub space: &'static str,
    pub values: Vec<[f64; 2]>,
}

/// Element of `X = C(𝒢)`, keyed by `y * N + i`.
///
/// Keys `(i, y)` and `(j, y)` with `γ_i(y) = γ_j(y)` name the same point of
/// the cograph union and always carry the same value.
#[derive(Clone, Debug)]
pub struct CographFunction {
    sample: CographSample,
    values: Vec<C64>,
}

impl CographFunction {
    /// Builds from `f(i, y)`; merged keys take the value of their
    /// representative symbol.
    pub fn from_fn(grid: &Arc<SampleGrid>, f: impl Fn(usize, usize) -> C64) -> Self {
        let n = grid.system().len();
        let mut values = Vec::with_capacity(grid.len() * n);
        for y in 0..grid.len() {
            for i in 0..n {
                let rep = grid.representative(i, y);
                values.push(if rep == i { f(i, y) } else { values[y * n + rep] });
            }
        }
        CographFunction {
            sample: CographSample::new(grid.clone()),
            values,
        }
    }

    /// Builds from a function of the exact point `(γ_i(y), y)`.
    pub fn from_points(grid: &Arc<SampleGrid>, f: impl Fn(&Point, &Point) -> C64) -> Self {
        Self::from_fn(grid, |i, y| f(grid.exact_image(i, y), grid.point(y)))
    }

    pub fn constant(grid: &Arc<SampleGrid>, c: C64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    /// Validates length, finiteness and branch consistency.
    pub fn from_values(grid: &Arc<SampleGrid>, values: Vec<C64>) -> Result<Self> {
        let n = grid.system().len();
        if values.len() != grid.len() * n {
            return Err(Error::InvalidInput(format!(
                "{} values for {} cograph keys",
                values.len(),
                grid.len() * n
            )));
        }
        check_finite(&values)?;
        for y in 0..grid.len() {
            for i in 0..n {
                let rep = grid.representative(i, y);
                if values[y * n + i] != values[y * n + rep] {
                    return Err(Error::InvalidInput(format!(
                        "values differ at merged keys ({}, {y}) and ({}, {y})",
                        i + 1,
                        rep + 1
                    )));
                }
            }
        }
        Ok(CographFunction {
            sample: CographSample::new(grid.clone()),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        self.sample.grid()
    }

    pub fn sample(&self) -> &CographSample {
        &self.sample
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn value(&self, i: usize, y: usize) -> C64 {
        self.values[self.sample.key(i, y)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Whether merged keys carry identical values.
    pub fn is_branch_consistent(&self) -> bool {
        let grid = self.grid();
        let n = grid.system().len();
        (0..grid.len()).all(|y| {
            (0..n).all(|i| self.values[y * n + i] == self.values[y * n + grid.representative(i, y)])
        })
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        CographFunction {
            sample: self.sample.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &CographFunction, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.check(other)?;
        Ok(CographFunction {
            sample: self.sample.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    fn check(&self, other: &CographFunction) -> Result<()> {
        if self.sample.same(&other.sample) {
            Ok(())
        } else {
            mismatch("cograph functions live on different grids")
        }
    }

    fn check_grid(&self, a: &SampledFunction) -> Result<()> {
        if Arc::ptr_eq(self.grid(), a.grid()) {
            Ok(())
        } else {
            mismatch("function and coefficient live on different grids")
        }
    }

    pub fn to_file(&self) -> FunctionFile {
        FunctionFile {
            grid: self.grid().descriptor(),
            space: "X",
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
}

/// Element of `Y_n = C(P_n)`, keyed by `y * N^n + index(w)`.
#[derive(Clone, Debug)]
pub struct PathFunction {
    sample: Arc<PathSample>,
    values: Vec<C64>,
}

impl PathFunction {
    pub fn new(sample: &Arc<PathSample>, values: Vec<C64>) -> Result<Self> {
        if values.len() != sample.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} path keys",
                values.len(),
                sample.len()
            )));
        }
        check_finite(&values)?;
        Ok(PathFunction {
            sample: sample.clone(),
            values,
        })
    }

    pub fn from_fn(sample: &Arc<PathSample>, f: impl Fn(usize) -> C64) -> Self {
        PathFunction {
            sample: sample.clone(),
            values: (0..sample.len()).map(f).collect(),
        }
    }

    pub fn constant(sample: &Arc<PathSample>, c: C64) -> Self {
        Self::from_fn(sample, |_| c)
    }

    pub fn sample(&self) -> &Arc<PathSample> {
        &self.sample
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        self.sample.grid()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn value(&self, key: usize) -> C64 {
        self.values[key]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        PathFunction {
            sample: self.sample.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &PathFunction, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.check(other)?;
        Ok(PathFunction {
            sample: self.sample.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    fn check(&self, other: &PathFunction) -> Result<()> {
        if self.sample.same(&other.sample) {
            Ok(())
        } else {
            mismatch("path functions live on different path samples")
        }
    }

    fn check_grid(&self, a: &SampledFunction) -> Result<()> {
        if Arc::ptr_eq(self.grid(), a.grid()) {
            Ok(())
        } else {
            mismatch("function and coefficient live on different grids")
        }
    }

    /// Fiber over grid point `y`, indexed by word.
    pub fn fiber(&self, y: usize) -> &[C64] {
        let w = self.sample.words();
        &self.values[y * w..(y + 1) * w]
    }
}

/// Right Hilbert module operations shared by `X` and `Y_n`.
pub trait ModuleElement: Clone {
    fn grid(&self) -> &Arc<SampleGrid>;
    /// `A`-valued inner product, conjugate-linear in `self`.
    fn inner(&self, other: &Self) -> Result<SampledFunction>;
    /// `f · a`, multiplication by `a(y)`.
    fn right(&self, a: &SampledFunction) -> Result<Self>;
    /// `φ(a) f`, multiplication by `a` at the first coordinate.
    fn left(&self, a: &SampledFunction) -> Result<Self>;
    fn add(&self, other: &Self) -> Result<Self>;
    fn scale(&self, c: C64) -> Self;
    fn zeros_like(&self) -> Self {
        self.scale(C64::new(0.0, 0.0))
    }
}

impl ModuleElement for CographFunction {
    fn grid(&self) -> &Arc<SampleGrid> {
        self.sample.grid()
    }

    fn inner(&self, other: &Self) -> Result<SampledFunction> {
        self.check(other)?;
        let n = self.sample.symbols();
        let values = self
            .values
            .chunks(n)
            .zip(other.values.chunks(n))
            .map(|(f, g)| f.iter().zip(g).map(|(a, b)| a.conj() * b).sum())
            .collect();
        Ok(SampledFunction {
            grid: self.grid().clone(),
            values,
        })
    }

    fn right(&self, a: &SampledFunction) -> Result<Self> {
        self.check_grid(a)?;
        let n = self.sample.symbols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * a.values[k / n])
            .collect();
        Ok(CographFunction {
            sample: self.sample.clone(),
            values,
        })
    }

    fn left(&self, a: &SampledFunction) -> Result<Self> {
        self.check_grid(a)?;
        let grid = self.grid();
        let n = self.sample.symbols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * a.values[grid.image(k % n, k / n)])
            .collect();
        Ok(CographFunction {
            sample: self.sample.clone(),
            values,
        })
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }
}

impl ModuleElement for PathFunction {
    fn grid(&self) -> &Arc<SampleGrid> {
        self.sample.grid()
    }

    fn inner(&self, other: &Self) -> Result<SampledFunction> {
        self.check(other)?;
        let w = self.sample.words();
        let values = self
            .values
            .chunks(w)
            .zip(other.values.chunks(w))
            .map(|(f, g)| f.iter().zip(g).map(|(a, b)| a.conj() * b).sum())
            .collect();
        Ok(SampledFunction {
            grid: self.grid().clone(),
            values,
        })
    }

    fn right(&self, a: &SampledFunction) -> Result<Self> {
        self.check_grid(a)?;
        let w = self.sample.words();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * a.values[k / w])
            .collect();
        Ok(PathFunction {
            sample: self.sample.clone(),
            values,
        })
    }

    fn left(&self, a: &SampledFunction) -> Result<Self> {
        self.check_grid(a)?;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * a.values[self.sample.chain(k)[0]])
            .collect();
        Ok(PathFunction {
            sample: self.sample.clone(),
            values,
        })
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }
}

pub fn inner_product(f: &CographFunction, g: &CographFunction) -> Result<SampledFunction> {
    f.inner(g)
}

pub fn path_inner_product(f: &PathFunction, g: &PathFunction) -> Result<SampledFunction> {
    f.inner(g)
}

pub fn left_action<T: ModuleElement>(a: &SampledFunction, f: &T) -> Result<T> {
    f.left(a)
}

pub fn right_action<T: ModuleElement>(f: &T, a: &SampledFunction) -> Result<T> {
    f.right(a)
}

/// `‖f‖₂ = sup_y (f|f)_A(y)^{1/2}`.
pub fn norm2<T: ModuleElement>(f: &T) -> Result<f64> {
    Ok(f.inner(f)?
        .values
        .iter()
        .map(|v| v.re.max(0.0))
        .fold(0.0, f64::max)
        .sqrt())
}

/// `θ_{ξ,η}(ζ) = ξ (η|ζ)_A`.
pub fn rank_one_apply<T: ModuleElement>(xi: &T, eta: &T, zeta: &T) -> Result<T> {
    xi.right(&eta.inner(zeta)?)
}

/// `Σ_k θ_{ξ_k, η_k}`.
#[derive(Clone, Debug)]
pub struct FiniteRankOperator<T> {
    pub pairs: Vec<(T, T)>,
}

impl<T: ModuleElement> FiniteRankOperator<T> {
    pub fn new(pairs: Vec<(T, T)>) -> Result<Self> {
        if let Some((first, _)) = pairs.first() {
            let grid = first.grid();
            if pairs
                .iter()
                .any(|(x, e)| !Arc::ptr_eq(x.grid(), grid) || !Arc::ptr_eq(e.grid(), grid))
            {
                return mismatch("finite-rank pairs live on different grids");
            }
        }
        Ok(FiniteRankOperator { pairs })
    }

    pub fn zero() -> Self {
        FiniteRankOperator { pairs: Vec::new() }
    }

    pub fn rank_bound(&self) -> usize {
        self.pairs.len()
    }

    pub fn apply(&self, zeta: &T) -> Result<T> {
        let mut out = zeta.zeros_like();
        for (xi, eta) in &self.pairs {
            out = out.add(&rank_one_apply(xi, eta, zeta)?)?;
        }
        Ok(out)
    }
}

/// `ξ₀ = 1/√N`.
pub fn xi0(grid: &Arc<SampleGrid>) -> CographFunction {
    let n = grid.system().len() as f64;
    CographFunction::constant(grid, C64::new(1.0 / n.sqrt(), 0.0))
}

/// Image of `f_1 ⊗ ... ⊗ f_n` in `C(P_n)`:
/// `(w, y) -> ∏_k f_k(γ_{w_k..w_n}(y), γ_{w_{k+1}..w_n}(y))`.
pub fn tensor_to_path(factors: &[CographFunction], path: &Arc<PathSample>) -> Result<PathFunction> {
    if factors.len() != path.depth() || factors.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} factors for a depth-{} path sample",
            factors.len(),
            path.depth()
        )));
    }
    if factors.iter().any(|f| !Arc::ptr_eq(f.grid(), path.grid())) {
        return mismatch("factors and path sample live on different grids");
    }
    let n = path.depth();
    let words = path.words();
    let symbols = path.grid().system().len();
    let mut values = Vec::with_capacity(path.len());
    for key in 0..path.len() {
        let chain = path.chain(key);
        let mut w = key % words;
        let mut v = C64::new(1.0, 0.0);
        for k in (0..n).rev() {
            let s = w % symbols;
            w /= symbols;
            v *= factors[k].value(s, chain[k + 1]);
        }
        values.push(v);
    }
    Ok(PathFunction {
        sample: path.clone(),
        values,
    })
}

/// `(f_1 ⊗ ... ⊗ f_n | g_1 ⊗ ... ⊗ g_n)_A` by the recursion
/// `s_k = (f_k | φ(s_{k-1}) g_k)_A`.
pub fn tensor_inner(f: &[CographFunction], g: &[CographFunction]) -> Result<SampledFunction> {
    if f.len() != g.len() || f.is_empty() {
        return Err(Error::InvalidInput("factor lists must be nonempty and equal length".into()));
    }
    let mut s = f[0].inner(&g[0])?;
    for k in 1..f.len() {
        s = f[k].inner(&g[k].left(&s)?)?;
    }
    Ok(s)
}

/// Pulls back a function on `𝒢_n`, given through its exact first
/// coordinate `γ_w(y)`, to `C(P_n)`. Words with coinciding endpoints share
/// the value computed for the first of them.
pub fn pullback_fn(path: &Arc<PathSample>, f: impl Fn(&Point, usize) -> C64) -> PathFunction {
    let words = path.words();
    let mut values = vec![C64::new(0.0, 0.0); path.len()];
    for y in 0..path.grid().len() {
        let reps = path.endpoint_reps(y);
        for w in 0..words {
            let key = path.key(w, y);
            values[key] = if reps[w] == w {
                f(path.endpoint(key), y)
            } else {
                values[path.key(reps[w], y)]
            };
        }
    }
    PathFunction {
        sample: path.clone(),
        values,
    }
}

/// `ρ*`: accepts values keyed like a path function and checks they are
/// well defined on `𝒢_n`.
pub fn cograph_pullback(path: &Arc<PathSample>, values: Vec<C64>) -> Result<PathFunction> {
    let f = PathFunction::new(path, values)?;
    for y in 0..path.grid().len() {
        let reps = path.endpoint_reps(y);
        for (w, &r) in reps.iter().enumerate() {
            let (a, b) = (f.value(path.key(w, y)), f.value(path.key(r, y)));
            if (a - b).norm() > EXACT_TOL {
                return Err(Error::InvalidInput(format!(
                    "not a function on the cograph: words {} and {} share an endpoint at grid point {y}",
                    path.word(w),
                    path.word(r)
                )));
            }
        }
    }
    Ok(f)
}

/// Element of `L(X^{⊗n})` acting fiberwise over grid points.
#[derive(Clone, Debug)]
pub enum PathOperator {
    Identity,
    /// `φ(a)`.
    Multiplication(SampledFunction),
    /// `Σ_k θ_{ξ_k, η_k}`.
    FiniteRank(FiniteRankOperator<PathFunction>),
    /// Explicit `N^n × N^n` matrix per grid point.
    Fibers(Vec<DMatrix<C64>>),
}

impl PathOperator {
    pub fn apply(&self, f: &PathFunction) -> Result<PathFunction> {
        match self {
            PathOperator::Identity => Ok(f.clone()),
            PathOperator::Multiplication(a) => f.left(a),
            PathOperator::FiniteRank(t) => t.apply(f),
            PathOperator::Fibers(m) => {
                if m.len() != f.grid().len() {
                    return mismatch("fiber count differs from grid size");
                }
                let w = f.sample.words();
                let mut values = Vec::with_capacity(f.values.len());
                for (y, mat) in m.iter().enumerate() {
                    if mat.nrows() != w || mat.ncols() != w {
                        return mismatch("fiber matrix has the wrong size");
                    }
                    let v = DVector::from_column_slice(f.fiber(y));
                    values.extend((mat * v).iter().cloned());
                }
                Ok(PathFunction {
                    sample: f.sample.clone(),
                    values,
                })
            }
        }
    }

    /// Matrix of the operator on the fiber over `y`.
    pub fn fiber_matrix(&self, path: &PathSample, y: usize) -> DMatrix<C64> {
        let w = path.words();
        match self {
            PathOperator::Identity => DMatrix::identity(w, w),
            PathOperator::Multiplication(a) => DMatrix::from_fn(w, w, |r, c| {
                if r == c {
                    a.value(path.chain(path.key(r, y))[0])
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
            PathOperator::FiniteRank(t) => {
                let mut m = DMatrix::zeros(w, w);
                for (xi, eta) in &t.pairs {
                    let (x, e) = (xi.fiber(y), eta.fiber(y));
                    for r in 0..w {
                        for c in 0..w {
                            m[(r, c)] += x[r] * e[c].conj();
                        }
                    }
                }
                m
            }
            PathOperator::Fibers(m) => m[y].clone(),
        }
    }

    /// `sup_y ‖T_y‖` with the top right singular vector of each fiber.
    pub fn fiber_norms(&self, path: &PathSample) -> Vec<(f64, Vec<C64>)> {
        let w = path.words();
        (0..path.grid().len())
            .map(|y| match self {
                PathOperator::Identity => {
                    let mut v = vec![C64::new(0.0, 0.0); w];
                    v[0] = C64::new(1.0, 0.0);
                    (1.0, v)
                }
                PathOperator::Multiplication(a) => {
                    let (best, val) = (0..w)
                        .map(|r| (r, a.value(path.chain(path.key(r, y))[0]).norm()))
                        .fold((0, -1.0), |acc, (r, v)| if v > acc.1 { (r, v) } else { acc });
                    let mut v = vec![C64::new(0.0, 0.0); w];
                    v[best] = C64::new(1.0, 0.0);
                    (val, v)
                }
                _ => top_singular(&self.fiber_matrix(path, y)),
            })
            .collect()
    }

    pub fn norm(&self, path: &PathSample) -> f64 {
        self.fiber_norms(path).iter().map(|(s, _)| *s).fold(0.0, f64::max)
    }
}

/// Largest singular value and its right singular vector, from the
/// Hermitian eigenproblem of `MᴴM` (the complex SVD in nalgebra does not
/// always converge to the right values on rank-deficient fibers).
pub(crate) fn top_singular(m: &DMatrix<C64>) -> (f64, Vec<C64>) {
    let w = m.ncols();
    let eig = (m.adjoint() * m).symmetric_eigen();
    let mut k = 0;
    for j in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[j] > eig.eigenvalues[k] {
            k = j;
        }
    }
    if w == 0 || eig.eigenvalues[k] <= 0.0 {
        let mut v = vec![C64::new(0.0, 0.0); w];
        if w > 0 {
            v[0] = C64::new(1.0, 0.0);
        }
        return (0.0, v);
    }
    let v: Vec<C64> = eig.eigenvectors.column(k).iter().cloned().collect();
    let mv = m * DVector::from_column_slice(&v);
    (mv.norm(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{cantor, tent};
    use crate::cograph::build_path_sample;

    fn grid_of(sys: crate::ifs::IfsSystem, m: usize) -> Arc<SampleGrid> {
        SampleGrid::new(Arc::new(sys), m).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_inner_products() {
        let g = grid_of(tent(), 6);
        let one = CographFunction::constant(&g, c(1.0));
        let ip = inner_product(&one, &one).unwrap();
        assert!(ip.values().iter().all(|v| *v == c(2.0)));
        assert!((norm2(&one).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let zero = one.zeros_like();
        assert_eq!(norm2(&zero).unwrap(), 0.0);
        let x0 = xi0(&g);
        assert!(inner_product(&x0, &x0).unwrap().values().iter().all(|v| (v - c(1.0)).norm() < 1e-15));
    }

    #[test]
    fn tent_identity_function() {
        let g = grid_of(tent(), 8);
        let f = CographFunction::from_points(&g, |x, _| c(x[0]));
        let ip = inner_product(&f, &f).unwrap();
        for y in 0..g.len() {
            let t = g.point(y)[0];
            let expected = (t / 2.0).powi(2) + (1.0 - t / 2.0).powi(2);
            assert!((ip.value(y).re - expected).abs() < 1e-12);
        }
        assert!(f.is_branch_consistent());
    }

    #[test]
    fn merged_values_are_validated() {
        let g = grid_of(tent(), 4);
        let y = crate::ifs::Word::from_symbols(&[2, 1, 1, 1]).unwrap().index(2);
        let mut values = vec![c(0.0); g.len() * 2];
        values[y * 2 + 1] = c(1.0);
        assert!(CographFunction::from_values(&g, values).is_err());
    }

    #[test]
    fn left_action_by_identity_coordinate() {
        let g = grid_of(tent(), 8);
        let a = SampledFunction::from_real(&g, |p| p[0]);
        let one = CographFunction::constant(&g, c(1.0));
        let f = left_action(&a, &one).unwrap();
        for y in 0..g.len() {
            for i in 0..2 {
                let exact = g.exact_image(i, y)[0];
                assert!((f.value(i, y).re - exact).abs() <= g.tol() / 2.0);
            }
        }
        assert!(f.is_branch_consistent());
    }

    #[test]
    fn rank_one_with_normalized_constant() {
        let g = grid_of(cantor(), 5);
        let eta = xi0(&g);
        let xi = CographFunction::from_points(&g, |x, y| C64::new(x[0], y[0]));
        let out = rank_one_apply(&xi, &eta, &eta).unwrap();
        assert!(out.values().iter().zip(xi.values()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn tensor_of_ones_is_one() {
        let g = grid_of(tent(), 4);
        let p = build_path_sample(g.clone(), 2, 1 << 20).unwrap();
        let one = CographFunction::constant(&g, c(1.0));
        let t = tensor_to_path(&[one.clone(), one.clone()], &p).unwrap();
        assert!(t.values().iter().all(|v| *v == c(1.0)));
        let ip = path_inner_product(&t, &t).unwrap();
        assert!(ip.values().iter().all(|v| *v == c(4.0)));
    }

    #[test]
    fn cantor_level_two_pullback_is_bijective() {
        let g = grid_of(cantor(), 3);
        let p = build_path_sample(g, 2, 1 << 20).unwrap();
        for y in 0..p.grid().len() {
            let reps = p.endpoint_reps(y);
            assert_eq!(reps, (0..4).collect::<Vec<_>>());
        }
    }

    #[test]
    fn operator_norms() {
        let g = grid_of(tent(), 4);
        let p = build_path_sample(g.clone(), 1, 1 << 20).unwrap();
        assert_eq!(PathOperator::Identity.norm(&p), 1.0);
        let a = SampledFunction::from_real(&g, |x| x[0]);
        let m = PathOperator::Multiplication(a);
        let dense = PathOperator::Fibers((0..g.len()).map(|y| m.fiber_matrix(&p, y)).collect());
        assert!((m.norm(&p) - dense.norm(&p)).abs() < 1e-12);
    }
}
