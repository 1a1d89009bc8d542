//! Seeded random smooth test functions on sample grids.
//!
//! All functions are short random Fourier sums, so they are continuous with
//! moderate Lipschitz constants and well resolved by the grids.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::bimodule::{CographFunction, PathFunction, SampledFunction};
use crate::cograph::PathSample;
use crate::ifs::{Point, SampleGrid};
use crate::C64;

const TERMS: usize = 4;
const MAX_FREQ: f64 = 6.0;
/// Frequency cap for [`positive`], kept low so peaks are broad.
const POSITIVE_FREQ: f64 = 3.0;

/// Random complex Fourier sum in the variables of dimension `dim`.
#[derive(Clone, Debug)]
pub struct FourierSum {
    terms: Vec<(C64, DVector<f64>)>,
}

impl FourierSum {
    pub fn new<R: Rng>(rng: &mut R, dim: usize) -> Self {
        let terms = (0..TERMS)
            .map(|_| {
                let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let w = DVector::from_fn(dim, |_, _| rng.gen_range(-MAX_FREQ..MAX_FREQ));
                (c, w)
            })
            .collect();
        FourierSum { terms }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|(c, w)| {
                let phase: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                c * C64::from_polar(1.0, phase)
            })
            .sum()
    }
}

fn concat(x: &Point, y: &Point) -> Vec<f64> {
    x.iter().chain(y.iter()).cloned().collect()
}

/// Random element of `A`.
pub fn function<R: Rng>(rng: &mut R, grid: &Arc<SampleGrid>) -> SampledFunction {
    let f = FourierSum::new(rng, grid.system().dimension());
    SampledFunction::from_fn(grid, |p| f.eval(p.as_slice()))
}

/// Random real function with values in `[0.5, 1.5]`.
pub fn positive<R: Rng>(rng: &mut R, grid: &Arc<SampleGrid>) -> SampledFunction {
    let d = grid.system().dimension();
    let terms: Vec<(f64, DVector<f64>, f64)> = (0..TERMS)
        .map(|_| {
            (
                rng.gen_range(0.1..1.0),
                DVector::from_fn(d, |_, _| rng.gen_range(-POSITIVE_FREQ..POSITIVE_FREQ)),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let total: f64 = terms.iter().map(|t| t.0).sum();
    SampledFunction::from_real(grid, |p| {
        let s: f64 = terms.iter().map(|(u, w, phi)| u * (w.dot(p) + phi).cos()).sum();
        1.0 + 0.5 * s / total
    })
}

/// Random element of `X`, a smooth function of `(x, y)`.
pub fn cograph_function<R: Rng>(rng: &mut R, grid: &Arc<SampleGrid>) -> CographFunction {
    let f = FourierSum::new(rng, 2 * grid.system().dimension());
    CographFunction::from_points(grid, |x, y| f.eval(&concat(x, y)))
}

/// Random element of `Y_n`, a smooth function of `(γ_w(y), y)` times a
/// random word weight.
pub fn path_function<R: Rng>(rng: &mut R, path: &Arc<PathSample>) -> PathFunction {
    let f = FourierSum::new(rng, 2 * path.grid().system().dimension());
    let weights: Vec<C64> = (0..path.words())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    PathFunction::from_fn(path, |key| {
        let y = key / path.words();
        weights[key % path.words()] * f.eval(&concat(path.endpoint(key), path.grid().point(y)))
    })
}
