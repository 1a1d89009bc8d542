//! Partition-of-unity approximation of `φ(a)` by finite-rank operators and
//! the probe functions that obstruct it at branch points.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{norm2, CographFunction, FiniteRankOperator, ModuleElement, SampledFunction};
use crate::cograph::{BranchReport, Check, PairSolution, Verdict};
use crate::error::{Error, Result};
use crate::ifs::{Point, Word};
use crate::C64;

/// Random probes added to the branch probes.
pub const RANDOM_PROBES: usize = 50;

/// Hat support radius relative to the cell radius.
const HAT_SCALE: f64 = 1.5;

/// Grid points per sheet probed next to each branch point.
const SHEET_PROBES: usize = 3;

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Indicator of one key `(i, y)` on a single sheet near a branch point.
    Sheet { symbol: usize, y: Vec<f64> },
    /// Indicator of the merged keys over the branch point `(c, d)`.
    Branch { symbols: Vec<usize>, y: Vec<f64> },
    Random { index: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct Probe {
    pub kind: ProbeKind,
    /// `‖(φ(a) - T)ζ‖₂ / ‖ζ‖₂`.
    pub ratio: f64,
    #[serde(skip)]
    pub function: CographFunction,
}

/// Outcome of [`compact_approx`].
#[derive(Clone, Debug, Serialize)]
pub struct CompactApprox {
    pub partition_depth: usize,
    /// Number of cells in the cover of `supp(a)`.
    pub cells: usize,
    /// `‖φ(a) - T‖`, computed fiberwise.
    pub residual: f64,
    /// `sup` of the probe ratios, a lower bound for `residual`.
    pub probe_residual: f64,
    /// Set when `a` does not vanish on the detected branch set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstruction: Option<Obstruction>,
    pub probes: Vec<Probe>,
    #[serde(skip)]
    pub operator: FiniteRankOperator<CographFunction>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Obstruction {
    pub branch_point: Vec<f64>,
    pub value: f64,
    /// Largest probe ratio among the branch probes: a lower bound for
    /// `‖φ(a) - T‖` of the constructed candidate `T`.
    pub probe_lower_bound: f64,
    /// `1 / (4 √N)`.
    pub reference_bound: f64,
}

/// Branch points `(c, d)` known to the report, with merged symbol sets.
fn branch_pairs(branch: &BranchReport) -> Vec<(Point, Point)> {
    let mut out: Vec<(Point, Point)> = branch
        .points
        .iter()
        .map(|p| (Point::from_vec(p.x.clone()), Point::from_vec(p.y.clone())))
        .collect();
    for pair in &branch.pairs {
        if let PairSolution::Subspace {
            x_points, y_points, ..
        } = &pair.solution
        {
            let step = (x_points.len() / 8).max(1);
            for k in (0..x_points.len()).step_by(step) {
                out.push((x_points[k].clone(), y_points[k].clone()));
            }
        }
    }
    out
}

/// Builds the branch and random probes for the grid of `a`.
fn probes(a: &SampledFunction, branch: &BranchReport, seed: u64) -> Vec<(ProbeKind, CographFunction)> {
    let grid = a.grid();
    let n = grid.system().len();
    let mut out = Vec::new();
    for (_, d) in branch_pairs(branch) {
        let yd = grid.nearest(&d);
        // symbols whose images coincide at the grid point standing for d
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let rep = grid.representative(i, yd);
            match classes.iter_mut().find(|c| c[0] == rep) {
                Some(c) => c.push(i),
                None => classes.push(vec![i]),
            }
        }
        let dvec: Vec<f64> = grid.point(yd).iter().cloned().collect();
        // nearest other grid points, lexicographic tie-break
        let mut others: Vec<(f64, usize)> = (0..grid.len())
            .filter(|&y| y != yd)
            .map(|y| ((grid.point(y) - grid.point(yd)).norm(), y))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for class in classes.iter().filter(|c| c.len() >= 2) {
            let members = class.clone();
            let f = CographFunction::from_fn(grid, |i, y| {
                if y == yd && members.contains(&i) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            out.push((
                ProbeKind::Branch {
                    symbols: class.iter().map(|s| s + 1).collect(),
                    y: dvec.clone(),
                },
                f,
            ));
            for &i0 in class {
                for &(_, yn) in others
                    .iter()
                    .filter(|(_, y)| grid.representative(i0, *y) == i0)
                    .take(SHEET_PROBES)
                {
                    let f = CographFunction::from_fn(grid, |i, y| {
                        if y == yn && grid.representative(i, y) == i0 {
                            C64::new(1.0, 0.0)
                        } else {
                            C64::new(0.0, 0.0)
                        }
                    });
                    out.push((
                        ProbeKind::Sheet {
                            symbol: i0 + 1,
                            y: grid.point(yn).iter().cloned().collect(),
                        },
                        f,
                    ));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for index in 0..RANDOM_PROBES {
        out.push((ProbeKind::Random { index }, crate::random::cograph_function(&mut rng, grid)));
    }
    out
}

fn ratio(a: &SampledFunction, t: &FiniteRankOperator<CographFunction>, z: &CographFunction) -> Result<f64> {
    let nz = norm2(z)?;
    if nz == 0.0 {
        return Ok(0.0);
    }
    let diff = z.left(a)?.zip(&t.apply(z)?, |p, q| p - q)?;
    Ok(norm2(&diff)? / nz)
}

/// `‖φ(a) - t‖` exactly: both operators act fiberwise, and on the fiber over
/// `y` the module is the space of vectors constant on merged symbols.
pub fn operator_distance(a: &SampledFunction, t: &FiniteRankOperator<CographFunction>) -> Result<f64> {
    let grid = a.grid();
    let n = grid.system().len();
    if t.pairs.iter().any(|(x, e)| !Arc::ptr_eq(x.grid(), grid) || !Arc::ptr_eq(e.grid(), grid)) {
        return Err(Error::Mismatch("operator and function live on different grids".into()));
    }
    let mut worst: f64 = 0.0;
    for y in 0..grid.len() {
        let mut m = DMatrix::<C64>::from_fn(n, n, |i, j| {
            if i == j {
                a.value(grid.image(i, y))
            } else {
                C64::new(0.0, 0.0)
            }
        });
        for (xi, eta) in &t.pairs {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] -= xi.value(i, y) * eta.value(j, y).conj();
                }
            }
        }
        // orthonormal basis of the vectors constant on merge classes
        let reps: Vec<usize> = (0..n).map(|i| grid.representative(i, y)).collect();
        let mut classes: Vec<usize> = reps.clone();
        classes.sort_unstable();
        classes.dedup();
        let q = DMatrix::<C64>::from_fn(n, classes.len(), |i, c| {
            if reps[i] == classes[c] {
                let size = reps.iter().filter(|&&r| r == classes[c]).count() as f64;
                C64::new(1.0 / size.sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let restricted = q.adjoint() * m * q;
        worst = worst.max(super::top_singular(&restricted).0);
    }
    Ok(worst)
}

/// Largest probe ratio for an arbitrary candidate `t`, over the branch
/// probes only. Any finite-rank `t` has `‖φ(a) - t‖` at least this large.
pub fn probe_lower_bound(
    a: &SampledFunction,
    t: &FiniteRankOperator<CographFunction>,
    branch: &BranchReport,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (kind, z) in probes(a, branch, 0) {
        if !matches!(kind, ProbeKind::Random { .. }) {
            best = best.max(ratio(a, t, &z)?);
        }
    }
    Ok(best)
}

/// Covers `supp(a)` by depth-`partition_depth` cells, builds hat functions
/// `f_c` summing to one on the support, and returns
/// `T = Σ_c θ_{a√f_c, √f_c}` with its probe residual.
///
/// Requires a verified open set condition. When `a` does not vanish on the
/// branch set the candidate is still built and the branch probes give a
/// lower bound for its distance to `φ(a)`.
pub fn compact_approx(
    a: &SampledFunction,
    branch: &BranchReport,
    open_set: &Check,
    partition_depth: usize,
    seed: u64,
) -> Result<CompactApprox> {
    if open_set.verdict != Verdict::Holds {
        return Err(Error::Unsupported(
            "compactness probe needs a verified open set condition".into(),
        ));
    }
    let grid = a.grid();
    let system = grid.system();
    let n = system.len();
    let m = grid.depth();
    if partition_depth > m {
        return Err(Error::InvalidInput(format!(
            "partition depth {partition_depth} exceeds grid depth {m}"
        )));
    }
    let shift = n.pow((m - partition_depth) as u32);
    let mut cells: Vec<usize> = (0..grid.len())
        .filter(|&y| a.value(y).norm() > 0.0)
        .map(|y| y / shift)
        .collect();
    cells.dedup();
    let hull = system.hull();
    let hats: Vec<(Point, f64)> = cells
        .iter()
        .map(|&c| {
            let w = Word::from_index(c, partition_depth, n);
            let center = system.apply_word(&w, &hull.center)?;
            Ok((center, HAT_SCALE * system.word_lipschitz(&w) * hull.radius))
        })
        .collect::<Result<_>>()?;
    // f_c on grid points
    let mut f: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; hats.len()];
    for x in 0..grid.len() {
        let p = grid.point(x);
        let psi: Vec<f64> = hats
            .iter()
            .map(|(c, r)| (1.0 - (p - c).norm() / r).max(0.0))
            .collect();
        let total = psi.iter().sum::<f64>().max(1.0 / 3.0);
        for (k, v) in psi.iter().enumerate() {
            f[k][x] = v / total;
        }
    }
    let pairs = f
        .iter()
        .map(|fk| {
            let eta = CographFunction::from_fn(grid, |i, y| {
                C64::new(fk[grid.image(i, y)].sqrt(), 0.0)
            });
            let xi = CographFunction::from_fn(grid, |i, y| {
                let x = grid.image(i, y);
                a.value(x) * fk[x].sqrt()
            });
            (xi, eta)
        })
        .collect();
    let operator = FiniteRankOperator::new(pairs)?;

    let mut probe_list = Vec::new();
    for (kind, z) in probes(a, branch, seed) {
        let r = ratio(a, &operator, &z)?;
        probe_list.push(Probe {
            kind,
            ratio: r,
            function: z,
        });
    }
    let probe_residual = probe_list.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let residual = operator_distance(a, &operator)?;

    let mut obstruction = None;
    for (c, _) in branch_pairs(branch) {
        let v = a.eval_at(&c).norm();
        if v > super::EXACT_TOL {
            let bound = probe_list
                .iter()
                .filter(|p| !matches!(p.kind, ProbeKind::Random { .. }))
                .map(|p| p.ratio)
                .fold(0.0, f64::max);
            obstruction = Some(Obstruction {
                branch_point: c.iter().cloned().collect(),
                value: v,
                probe_lower_bound: bound,
                reference_bound: 1.0 / (4.0 * (n as f64).sqrt()),
            });
            break;
        }
    }
    Ok(CompactApprox {
        partition_depth,
        cells: cells.len(),
        residual,
        probe_residual,
        obstruction,
        probes: probe_list,
        operator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{cantor, tent};
    use crate::cograph::{branch_scan, check_open_set_condition};
    use crate::ifs::SampleGrid;
    use crate::region::Region;
    use std::sync::Arc;

    fn setup(sys: crate::ifs::IfsSystem, m: usize) -> (Arc<SampleGrid>, BranchReport, Check) {
        let b = branch_scan(&sys, 10, 1e-9).unwrap();
        let osc = check_open_set_condition(&sys, &Region::interval(0.0, 1.0), 8, 50, 0).unwrap();
        (SampleGrid::new(Arc::new(sys), m).unwrap(), b, osc)
    }

    #[test]
    fn zero_function_gives_zero_operator() {
        let (g, b, osc) = setup(tent(), 8);
        let a = SampledFunction::constant(&g, C64::new(0.0, 0.0));
        let r = compact_approx(&a, &b, &osc, 4, 1).unwrap();
        assert_eq!(r.cells, 0);
        assert_eq!(r.residual, 0.0);
        assert!(r.obstruction.is_none());
    }

    #[test]
    fn branch_point_obstructs() {
        let (g, b, osc) = setup(tent(), 10);
        let a = SampledFunction::constant(&g, C64::new(1.0, 0.0));
        let r = compact_approx(&a, &b, &osc, 6, 1).unwrap();
        let obs = r.obstruction.unwrap();
        assert!(obs.probe_lower_bound >= obs.reference_bound - 0.05);
    }

    #[test]
    fn separated_system_has_exact_approximant() {
        let (g, b, osc) = setup(cantor(), 8);
        let a = SampledFunction::constant(&g, C64::new(1.0, 0.0));
        let r = compact_approx(&a, &b, &osc, 3, 1).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
    }

    #[test]
    fn open_set_required() {
        let (g, b, mut osc) = setup(tent(), 6);
        osc.verdict = Verdict::Undetermined;
        let a = SampledFunction::constant(&g, C64::new(1.0, 0.0));
        assert!(matches!(compact_approx(&a, &b, &osc, 3, 1), Err(Error::Unsupported(_))));
    }
}
