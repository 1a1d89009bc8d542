//! Endomorphisms `β_i`, the transfer map `E_γ`, invariant functions and the
//! constructive witnesses used for simplicity of the Cuntz-Pimsner algebra.
//!
//! All compositions use the grid image table, so `β_i(a)(y) = a(γ_i(y))` is
//! evaluated at the grid point standing for `γ_i(y)`.

use std::sync::Arc;

use serde::Serialize;

use crate::bimodule::{
    norm2, pullback_fn, CographFunction, ModuleElement, PathFunction, PathOperator,
    SampledFunction, EXACT_TOL,
};
use crate::cograph::{build_path_sample, PathSample};
use crate::error::{Error, Result};
use crate::ifs::{Point, SampleGrid, Word};
use crate::region::Region;
use crate::C64;

/// Largest path sample built by the witnesses.
pub const PATH_CAP: usize = 1 << 22;


/// `β_i(a)(y) = a(γ_i(y))`.
pub fn beta(i: usize, a: &SampledFunction) -> Result<SampledFunction> {
    let grid = a.grid();
    if i >= grid.system().len() {
        return Err(Error::InvalidInput(format!("symbol {} out of range", i + 1)));
    }
    SampledFunction::new(
        grid.clone(),
        (0..grid.len()).map(|y| a.value(grid.image(i, y))).collect(),
    )
}

/// `E_γ(a) = (1/N) Σ_i β_i(a)`.
pub fn transfer_op(a: &SampledFunction) -> SampledFunction {
    let grid = a.grid();
    let n = grid.system().len();
    let values = (0..grid.len())
        .map(|y| (0..n).map(|i| a.value(grid.image(i, y))).sum::<C64>() / n as f64)
        .collect();
    SampledFunction::new(grid.clone(), values).expect("transfer of finite values")
}

/// Grid indices standing for `γ_w(y)` for all words of length `k`, in word
/// index order.
fn word_images(grid: &SampleGrid, k: usize, y: usize) -> Vec<usize> {
    let n = grid.system().len();
    let mut level = vec![y];
    // innermost symbol is the last one, so extend words on the left
    for _ in 0..k {
        let mut next = Vec::with_capacity(level.len() * n);
        for s in 0..n {
            next.extend(level.iter().map(|&c| grid.image(s, c)));
        }
        level = next;
    }
    level
}

/// A function certified `(γ_w)_{w ∈ W_n}`-invariant on the grid, with its
/// iterates `β^k(a)` for `k ≤ n`.
#[derive(Clone, Debug)]
pub struct InvariantFunction {
    pub function: SampledFunction,
    pub depth: usize,
    pub tol: f64,
    /// `spreads[k-1]`: worst spread of `a(γ_w(y))` over `w ∈ W_k`.
    pub spreads: Vec<f64>,
    /// `iterates[k] = β^k(a)`, `iterates[0] = a`.
    pub iterates: Vec<SampledFunction>,
}

impl InvariantFunction {
    pub fn beta_power(&self, k: usize) -> &SampledFunction {
        &self.iterates[k]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceViolation {
    pub length: usize,
    pub words: [Word; 2],
    pub y: Vec<f64>,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub enum Certificate {
    Certified(InvariantFunction),
    Violated(InvarianceViolation),
}

impl Certificate {
    pub fn certified(self) -> Option<InvariantFunction> {
        match self {
            Certificate::Certified(f) => Some(f),
            Certificate::Violated(_) => None,
        }
    }
}

/// Checks `a(γ_w(y)) = a(γ_v(y))` for all words of each length `k ≤ n` and
/// all grid points.
pub fn certify_invariant(a: &SampledFunction, n: usize, tol: f64) -> Result<Certificate> {
    let grid = a.grid();
    let big_n = grid.system().len();
    let words = (big_n as u128).pow(n as u32) * grid.len() as u128;
    if words > PATH_CAP as u128 {
        return Err(Error::Resource {
            what: format!("invariance check at depth {n}"),
            required: words,
            cap: PATH_CAP as u128,
        });
    }
    let mut spreads = Vec::with_capacity(n);
    let mut iterates = vec![a.clone()];
    for k in 1..=n {
        let mut worst = (0.0, 0, 0, 0);
        let mut first = Vec::with_capacity(grid.len());
        for y in 0..grid.len() {
            let imgs = word_images(grid, k, y);
            let v0 = a.value(imgs[0]);
            first.push(v0);
            for (w, &x) in imgs.iter().enumerate().skip(1) {
                let gap = (a.value(x) - v0).norm();
                if gap > worst.0 {
                    worst = (gap, 0, w, y);
                }
            }
        }
        if worst.0 > tol {
            let (gap, w, v, y) = worst;
            return Ok(Certificate::Violated(InvarianceViolation {
                length: k,
                words: [
                    Word::from_index(w, k, big_n),
                    Word::from_index(v, k, big_n),
                ],
                y: grid.point(y).iter().cloned().collect(),
                gap,
            }));
        }
        spreads.push(worst.0);
        iterates.push(SampledFunction::new(grid.clone(), first)?);
    }
    Ok(Certificate::Certified(InvariantFunction {
        function: a.clone(),
        depth: n,
        tol,
        spreads,
        iterates,
    }))
}

/// `‖φ(a) f - f β(a)‖₂` for an invariant `a`.
pub fn commutation_check(a: &InvariantFunction, f: &CographFunction) -> Result<f64> {
    if a.depth < 1 {
        return Err(Error::InvalidInput("commutation needs invariance depth ≥ 1".into()));
    }
    let lhs = f.left(&a.function)?;
    let rhs = f.right(a.beta_power(1))?;
    norm2(&lhs.zip(&rhs, |p, q| p - q)?)
}

/// Iterated form `‖φ(a) F - F β^n(a)‖₂` with `F` the image of
/// `f_1 ⊗ ... ⊗ f_n` in `C(P_n)`.
pub fn commutation_check_path(a: &InvariantFunction, f: &PathFunction) -> Result<f64> {
    let n = f.sample().depth();
    if a.depth < n {
        return Err(Error::InvalidInput(format!(
            "invariance depth {} below path depth {n}",
            a.depth
        )));
    }
    let lhs = f.left(&a.function)?;
    let rhs = f.right(a.beta_power(n))?;
    norm2(&lhs.zip(&rhs, |p, q| p - q)?)
}

/// Output of [`amplify`].
#[derive(Clone, Debug)]
pub struct Amplification {
    pub depth: usize,
    pub word: Word,
    pub peak: Point,
    pub norm: f64,
    pub epsilon: f64,
    /// Radius of the neighbourhood `U_0` of the peak on the grid.
    pub radius: f64,
    pub path: Arc<PathSample>,
    pub f: PathFunction,
}

/// Real part of a function that must be nonnegative.
fn positive_values(a: &SampledFunction) -> Result<Vec<f64>> {
    let scale = a.sup_norm().max(1.0);
    a.values()
        .iter()
        .map(|v| {
            if v.im.abs() > EXACT_TOL * scale || v.re < -EXACT_TOL * scale {
                Err(Error::InvalidInput("function is not positive".into()))
            } else {
                Ok(v.re.max(0.0))
            }
        })
        .collect()
}

/// Shortest word `v` with `γ_v(y)` inside the open ball `B(p, rho)` for
/// every grid point `y`. Candidates are the cells of grid points in the ball.
fn cell_in_ball(grid: &SampleGrid, p: &Point, rho: f64) -> Result<Word> {
    let system = grid.system();
    let n = system.len();
    let m = grid.depth();
    let near: Vec<usize> = (0..grid.len())
        .filter(|&x| (grid.point(x) - p).norm() < rho)
        .collect();
    for r in 1..=m {
        let block = n.pow((m - r) as u32);
        let mut cells: Vec<usize> = near.iter().map(|&x| x / block).collect();
        cells.dedup();
        let mut best: Option<(Word, f64)> = None;
        for k in cells {
            let v = Word::from_index(k, r, n);
            let map = system.word_affine(&v)?;
            let reach = grid
                .points()
                .iter()
                .map(|y| (map.apply(y) - p).norm())
                .fold(0.0, f64::max);
            if reach < rho && best.as_ref().is_none_or(|(_, d)| reach < *d) {
                best = Some((v, reach));
            }
        }
        if let Some((v, _)) = best {
            return Ok(v);
        }
    }
    Err(Error::Resource {
        what: format!("cell inside a ball of radius {rho:.3e}"),
        required: m as u128 + 1,
        cap: m as u128,
    })
}

/// Finds `n` and `f ∈ C(P_n)` with `(f|f)_A = 1` and
/// `‖a‖ - ε ≤ (f|φ(a)f)_A ≤ ‖a‖`.
pub fn amplify(a: &SampledFunction, epsilon: f64) -> Result<Amplification> {
    let grid = a.grid();
    let values = positive_values(a)?;
    let norm = values.iter().cloned().fold(0.0, f64::max);
    if norm == 0.0 || !(epsilon > 0.0 && epsilon < norm) {
        return Err(Error::InvalidInput(format!(
            "need 0 < ε < ‖a‖, got ε = {epsilon}, ‖a‖ = {norm}"
        )));
    }
    let x0 = a.argmax();
    let peak = grid.point(x0).clone();
    // U_0: grid points with a > ‖a‖ - ε, as a ball around the peak
    let hull = grid.system().hull();
    let radius = 0.99
        * (0..grid.len())
            .filter(|&x| values[x] <= norm - epsilon)
            .map(|x| (grid.point(x) - &peak).norm())
            .fold(4.0 * hull.radius, f64::min);
    // a is read at the grid point standing for γ_w(y), within `slack` of the
    // exact endpoint; the cutoff support must stay that far inside U_0.
    // Try the merge-free bound c^m·diam first, then the general one.
    let c = grid.system().max_contraction();
    let cm = c.powi(grid.depth() as i32) * 2.0 * hull.radius;
    let mut last = None;
    let mut found = None;
    for slack in [1.01 * cm, 1.01 * cm / (1.0 - c)] {
        let outer = radius - slack;
        let inner = 0.9 * outer;
        if inner <= 0.0 {
            last = Some(Error::Resource {
                what: format!("grid resolution: slack {slack:.3e} vs neighbourhood {radius:.3e}"),
                required: grid.depth() as u128 + 1,
                cap: grid.depth() as u128,
            });
            continue;
        }
        let word = match cell_in_ball(grid, &peak, inner) {
            Ok(w) => w,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let path = match build_path_sample(grid.clone(), word.len(), PATH_CAP) {
            Ok(p) => p,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let drift = (0..path.len())
            .map(|k| (grid.point(path.chain(k)[0]) - path.endpoint(k)).norm())
            .fold(0.0, f64::max);
        if drift > slack {
            last = Some(Error::Resource {
                what: format!("grid drift {drift:.3e} above its bound {slack:.3e}"),
                required: grid.depth() as u128 + 1,
                cap: grid.depth() as u128,
            });
            continue;
        }
        found = Some((outer, inner, word, path));
        break;
    }
    let (outer, inner, word, path) = match found {
        Some(f) => f,
        None => return Err(last.expect("at least one slack tried")),
    };
    let cutoff = |x: &Point| {
        let d = (x - &peak).norm();
        ((outer - d) / (outer - inner)).clamp(0.0, 1.0)
    };
    let g = pullback_fn(&path, |x, _| C64::new(cutoff(x), 0.0));
    let b = g.inner(&g)?;
    if let Some(y) = (0..grid.len()).find(|&y| b.value(y).re < 1.0 - EXACT_TOL) {
        return Err(Error::Internal(format!(
            "cutoff misses the cell at grid point {y}"
        )));
    }
    let f = g.right(&b.map(|v| C64::new(1.0 / v.re.sqrt(), 0.0)))?;
    Ok(Amplification {
        depth: word.len(),
        word,
        peak,
        norm,
        epsilon,
        radius,
        path,
        f,
    })
}

/// `u = f c^{-1/2}` with `c = (f|φ(a)f)_A`, so that `(u|φ(a)u)_A = 1`.
pub fn normalize_witness(a: &SampledFunction, amp: &Amplification) -> Result<PathFunction> {
    let c = amp.f.inner(&amp.f.left(a)?)?;
    let floor = amp.norm - amp.epsilon;
    if let Some(y) = (0..c.grid().len()).find(|&y| c.value(y).re < floor - EXACT_TOL) {
        return Err(Error::Internal(format!(
            "(f|af) = {} below ‖a‖ - ε = {floor} at grid point {y}",
            c.value(y).re
        )));
    }
    amp.f.right(&c.map(|v| C64::new(1.0 / v.re.sqrt(), 0.0)))
}

/// Output of [`separating_function`].
#[derive(Clone, Debug)]
pub struct Separation {
    pub invariant: InvariantFunction,
    /// `j_1 ... j_{r+n}`.
    pub word: Word,
    /// Fiberwise witness `f` with `‖f‖₂ = 1`.
    pub f: PathFunction,
    /// Grid point `y₂ = γ_J(p★)` where `a(γ_w(y₂)) = 1` for all `w`.
    pub center: usize,
    /// `‖φ(a) T f‖₂²`.
    pub value: f64,
    /// `‖T‖²`.
    pub norm_sq: f64,
    pub epsilon: f64,
}

/// Builds a positive `W_n`-invariant `a` with `β^p(a) β^q(a) = 0` for
/// `1 ≤ p < q ≤ n` and `‖φ(a) T f‖₂² > ‖T‖² - ε`.
///
/// `path` fixes `n` and the grid; `region` is an open set witness `V`.
/// The grid must be deep enough to resolve `n + |J|` symbols.
pub fn separating_function(
    path: &Arc<PathSample>,
    t: &PathOperator,
    epsilon: f64,
    region: &Region,
) -> Result<Separation> {
    let grid = path.grid();
    let system = grid.system();
    let big_n = system.len();
    let n = path.depth();
    let m = grid.depth();
    if big_n < 2 || n == 0 || epsilon <= 0.0 {
        return Err(Error::InvalidInput(
            "need at least two maps, n ≥ 1 and ε > 0".into(),
        ));
    }
    let pieces = region.pieces(system.hull())?;
    let fibers = t.fiber_norms(path);
    let norm_sq = fibers.iter().map(|(s, _)| s * s).fold(0.0, f64::max);
    let y0 = (0..fibers.len())
        .max_by(|&p, &q| fibers[p].0.total_cmp(&fibers[q].0).then(q.cmp(&p)))
        .unwrap_or(0);
    let v = fibers[y0].1.clone();
    let words = path.words();
    let f = PathFunction::from_fn(path, |key| v[key % words]);
    let tf = t.apply(&f)?;
    let fiber_sq = tf.inner(&tf)?;
    // U_0 on the grid
    let in_u0: Vec<bool> = (0..grid.len())
        .map(|y| fiber_sq.value(y).re > norm_sq - epsilon)
        .collect();

    // shortest cell γ_{J_0}(K) inside U_0; the open set condition gives
    // γ_{J_0}(V) ⊂ V, so the cell also sits in V ∩ U_0
    let mut found: Option<(Word, f64)> = None;
    for r in 1..=m {
        let block = big_n.pow((m - r) as u32);
        for k in 0..big_n.pow(r as u32) {
            let cell = k * block..(k + 1) * block;
            if !cell.clone().all(|y| in_u0[y]) {
                continue;
            }
            let floor = cell.map(|y| fiber_sq.value(y).re).fold(f64::INFINITY, f64::min);
            if found.as_ref().is_none_or(|(_, f)| floor > *f) {
                found = Some((Word::from_index(k, r, big_n), floor));
            }
        }
        if found.is_some() {
            break;
        }
    }
    let (j0, _) = found.ok_or_else(|| Error::Resource {
        what: "cell inside U_0".into(),
        required: m as u128 + 1,
        cap: m as u128,
    })?;
    if j0.len() + 2 * n > m {
        return Err(Error::Resource {
            what: format!("grid depth for a length-{} cell and n = {n}", j0.len()),
            required: (j0.len() + 2 * n) as u128,
            cap: m as u128,
        });
    }
    if let Some(piece) = pieces.first() {
        let inside = system.apply_word(&j0, &piece.interior_point())?;
        if !pieces.iter().any(|s| s.contains_open(&inside)) {
            return Err(Error::InvalidInput(format!(
                "region is not an open set witness: γ_{j0} maps V outside itself"
            )));
        }
    }
    let mut j = j0.0.clone();
    j.push(1);
    j.extend(std::iter::repeat_n(0, n - 1));
    let word = Word(j);
    let len = word.len();

    // bump b around γ_J(p★) inside γ_J(hull), read through tail_n
    let shift = big_n.pow((m - n - len) as u32);
    let j_index = word.index(big_n);
    let y2_point = system.apply_word(&word, system.base_point())?;
    let bump_radius = system.word_lipschitz(&word) * system.hull().radius;
    let tail = big_n.pow((m - n) as u32);
    let values: Vec<C64> = (0..grid.len())
        .map(|x| {
            let s = x % tail;
            if s / shift != j_index {
                return C64::new(0.0, 0.0);
            }
            // grid point with word s at depth m - n: γ_s(p★) = γ_{s 1^n}(p★)
            let q = grid.point(s * big_n.pow(n as u32));
            C64::new((1.0 - (q - &y2_point).norm() / bump_radius).max(0.0), 0.0)
        })
        .collect();
    let a = SampledFunction::new(grid.clone(), values)?;
    let invariant = match certify_invariant(&a, n, 0.0)? {
        Certificate::Certified(inv) => inv,
        Certificate::Violated(v) => {
            return Err(Error::Internal(format!(
                "constructed function not invariant at length {}",
                v.length
            )))
        }
    };
    let center = j_index * big_n.pow((m - len) as u32);
    let atf = tf.left(&a)?;
    let value = norm2(&atf)?.powi(2);
    Ok(Separation {
        invariant,
        word,
        f,
        center,
        value,
        norm_sq,
        epsilon,
    })
}

/// Largest `|β^p(a) β^q(a)|` over the grid and `1 ≤ p < q ≤ n`.
pub fn disjointness_defect(a: &InvariantFunction) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 1..=a.depth {
        for q in p + 1..=a.depth {
            let (bp, bq) = (a.beta_power(p), a.beta_power(q));
            for y in 0..bp.values().len() {
                worst = worst.max((bp.value(y) * bq.value(y)).norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{cantor, tent};
    use crate::ifs::IfsSystem;

    fn grid_of(sys: IfsSystem, m: usize) -> Arc<SampleGrid> {
        SampleGrid::new(Arc::new(sys), m).unwrap()
    }

    fn identity(g: &Arc<SampleGrid>) -> SampledFunction {
        SampledFunction::from_real(g, |p| p[0])
    }

    #[test]
    fn beta_and_transfer_on_tent() {
        let g = grid_of(tent(), 10);
        let a = identity(&g);
        let b = beta(0, &a).unwrap();
        for y in 0..g.len() {
            assert!((b.value(y).re - g.point(y)[0] / 2.0).abs() <= g.tol());
        }
        let e = transfer_op(&a);
        assert!(e.values().iter().all(|v| (v.re - 0.5).abs() <= g.tol()));
        let one = SampledFunction::constant(&g, C64::new(1.0, 0.0));
        assert!(transfer_op(&one).distance(&one).unwrap() < 1e-15);
    }

    #[test]
    fn identity_is_not_invariant_on_tent() {
        let g = grid_of(tent(), 8);
        match certify_invariant(&identity(&g), 1, 1e-9).unwrap() {
            Certificate::Violated(v) => {
                assert_eq!(v.length, 1);
                assert!(v.gap > 0.9);
            }
            Certificate::Certified(_) => panic!("identity certified"),
        }
    }

    #[test]
    fn constants_are_invariant_and_commute() {
        let g = grid_of(cantor(), 8);
        let a = SampledFunction::constant(&g, C64::new(2.0, 0.0));
        let inv = certify_invariant(&a, 3, 0.0).unwrap().certified().unwrap();
        let f = CographFunction::from_points(&g, |x, y| C64::new(x[0], y[0]));
        assert_eq!(commutation_check(&inv, &f).unwrap(), 0.0);
    }

    #[test]
    fn non_invariant_function_does_not_commute() {
        let g = grid_of(tent(), 8);
        let a = identity(&g);
        let fake = InvariantFunction {
            function: a.clone(),
            depth: 1,
            tol: 0.0,
            spreads: vec![1.0],
            iterates: vec![a.clone(), beta(0, &a).unwrap()],
        };
        let one = CographFunction::constant(&g, C64::new(1.0, 0.0));
        assert!(commutation_check(&fake, &one).unwrap() > 0.1);
    }

    #[test]
    fn amplify_tent_identity() {
        let g = grid_of(tent(), 10);
        let a = identity(&g);
        let amp = amplify(&a, 0.1).unwrap();
        let ff = amp.f.inner(&amp.f).unwrap();
        let faf = amp.f.inner(&amp.f.left(&a).unwrap()).unwrap();
        for y in 0..g.len() {
            assert!((ff.value(y).re - 1.0).abs() <= 1e-9);
            let v = faf.value(y).re;
            assert!((0.9..=1.0 + 1e-9).contains(&v), "{v}");
        }
        let u = normalize_witness(&a, &amp).unwrap();
        let uau = u.inner(&u.left(&a).unwrap()).unwrap();
        assert!(uau.values().iter().all(|v| (v.re - 1.0).abs() <= 1e-9));
        assert!(norm2(&u).unwrap() <= 0.9f64.powf(-0.5) + 1e-9);
    }

    #[test]
    fn amplify_cantor_bump_finds_left_word() {
        let g = grid_of(cantor(), 10);
        let a = SampledFunction::from_real(&g, |p| (1.0 - 3.0 * p[0]).max(0.0).powi(2));
        let amp = amplify(&a, 0.2).unwrap();
        assert!(amp.word.0.iter().all(|&s| s == 0), "{}", amp.word);
    }

    #[test]
    fn separating_identity_on_tent() {
        let g = grid_of(tent(), 12);
        let path = build_path_sample(g, 2, PATH_CAP).unwrap();
        let sep = separating_function(&path, &PathOperator::Identity, 0.1, &Region::interval(0.0, 1.0))
            .unwrap();
        assert_eq!(sep.invariant.depth, 2);
        assert_eq!(disjointness_defect(&sep.invariant), 0.0);
        assert!(sep.value > sep.norm_sq - sep.epsilon);
        assert_eq!(sep.word.0[sep.word.len() - 2..], [1, 0]);
    }
}
