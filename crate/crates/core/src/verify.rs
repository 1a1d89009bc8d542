//! Property suites behind `selfsim verify` and the acceptance tests.
//!
//! Every property is evaluated on seeded random inputs over the builtin
//! registry and reports its worst observed value against its bound.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bimodule::{
    compact_approx, norm2, probe_lower_bound, tensor_inner, tensor_to_path, xi0, CographFunction,
    FiniteRankOperator, ModuleElement, PathOperator, SampledFunction,
};
use crate::classify::{classify, registry, registry_entry, registry_verify, ClassVerdict, RegistryTable};
use crate::cograph::{branch_scan, build_path_sample, check_open_set_condition, PathSample};
use crate::error::{Error, Result};
use crate::ifs::{IfsSystem, SampleGrid};
use crate::random;
use crate::transfer::{
    amplify, beta, certify_invariant, commutation_check, commutation_check_path,
    disjointness_defect, normalize_witness, separating_function, transfer_op, Certificate,
    PATH_CAP,
};
use crate::C64;

/// Grid size aimed for by the suites.
pub const GRID_TARGET: usize = 4096;
/// Path samples built by the suites stay below this many keys.
pub const SUITE_PATH_CAP: usize = 1 << 18;
/// Registry depth and tolerance.
pub const REGISTRY_DEPTH: usize = 10;
pub const REGISTRY_TOL: f64 = 1e-9;
/// Identities that hold exactly in real arithmetic.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Property {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub pass: bool,
    pub count: usize,
    /// Worst observed value, compared against `bound`.
    pub worst: f64,
    pub bound: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Property {
    fn upper(name: &str, system: Option<&str>, count: usize, worst: f64, bound: f64) -> Self {
        Property {
            name: name.into(),
            system: system.map(str::to_string),
            pass: worst <= bound,
            count,
            worst,
            bound,
            detail: String::new(),
        }
    }

    fn lower(name: &str, system: Option<&str>, count: usize, worst: f64, bound: f64) -> Self {
        Property {
            pass: worst >= bound,
            ..Property::upper(name, system, count, worst, bound)
        }
    }

    fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub version: &'static str,
    pub suite: String,
    pub seed: u64,
    pub depth: usize,
    pub tol: f64,
    pub pass: bool,
    pub properties: Vec<Property>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registry: Option<RegistryTable>,
}

/// Random sample counts of the suites.
#[derive(Clone, Copy, Debug)]
pub struct Counts {
    pub cograph: usize,
    pub tensor: usize,
    pub adjoint: usize,
    pub positive: usize,
    pub transfer: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            cograph: 200,
            tensor: 50,
            adjoint: 20,
            positive: 10,
            transfer: 100,
        }
    }
}

/// Deepest grid with at most `target` points.
pub fn grid_depth(system: &IfsSystem, target: usize) -> usize {
    let n = system.len();
    let mut m = 1;
    while n.pow(m as u32 + 1) <= target {
        m += 1;
    }
    m
}

pub fn suite_grid(system: &IfsSystem, target: usize) -> Result<Arc<SampleGrid>> {
    SampleGrid::new(Arc::new(system.clone()), grid_depth(system, target))
}

fn rng_for(seed: u64, salt: &str) -> ChaCha8Rng {
    let h = salt.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn systems() -> Vec<(&'static str, IfsSystem)> {
    registry().into_iter().map(|e| (e.name, e.system)).collect()
}

/// `‖f‖_∞ ≤ ‖f‖₂ ≤ √N ‖f‖_∞` on random cograph functions. The upper bound
/// allows one part in 10¹² for rounding in the sum.
pub fn norm_equivalence(seed: u64, count: usize) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for (name, system) in systems() {
        let grid = suite_grid(&system, GRID_TARGET)?;
        let mut rng = rng_for(seed, name);
        let root_n = (system.len() as f64).sqrt();
        let mut violations = 0;
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let f = random::cograph_function(&mut rng, &grid);
            let (sup, two) = (f.sup_norm(), norm2(&f)?);
            if sup > two || two > root_n * sup * (1.0 + 1e-12) {
                violations += 1;
            }
            worst = worst.max(sup / two).max(two / (root_n * sup));
        }
        out.push(
            Property::upper("norm-equivalence", Some(name), count, violations as f64, 0.0)
                .detail(format!("largest ratio {worst:.6}")),
        );
    }
    Ok(out)
}

/// `|(f_1⊗…⊗f_n | g_1⊗…⊗g_n)_A - (F | G)_A|` for `n ∈ {1,2,3}`, with `F, G`
/// the images in `C(P_n)`.
pub fn tensor_isometry(seed: u64, count: usize) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for (name, system) in systems() {
        let mut rng = rng_for(seed, name);
        for n in 1..=3usize {
            let target = (SUITE_PATH_CAP / system.len().pow(n as u32)).min(GRID_TARGET);
            let grid = suite_grid(&system, target)?;
            let path = build_path_sample(grid.clone(), n, SUITE_PATH_CAP)?;
            let mut worst: f64 = 0.0;
            for _ in 0..count {
                let f: Vec<_> = (0..n).map(|_| random::cograph_function(&mut rng, &grid)).collect();
                let g: Vec<_> = (0..n).map(|_| random::cograph_function(&mut rng, &grid)).collect();
                let lhs = tensor_inner(&f, &g)?;
                let (pf, pg) = (tensor_to_path(&f, &path)?, tensor_to_path(&g, &path)?);
                worst = worst.max(lhs.distance(&pf.inner(&pg)?)?);
            }
            out.push(
                Property::upper(&format!("tensor-isometry-n{n}"), Some(name), count, worst, IDENTITY_TOL)
                    .detail(format!("grid depth {}", grid.depth())),
            );
        }
    }
    Ok(out)
}

/// Adjoint and module identities:
/// `(θ_{ξ,η} ζ | ζ')_A = (ζ | θ_{η,ξ} ζ')_A`, `(φ(a) f | g)_A = (f | φ(ā) g)_A`
/// and `(f | g b)_A = (f | g)_A b`.
pub fn adjoint_identities(seed: u64, count: usize) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for (name, system) in systems() {
        let grid = suite_grid(&system, GRID_TARGET)?;
        let mut rng = rng_for(seed, name);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let mut cf = || random::cograph_function(&mut rng, &grid);
            let (xi, eta, z, z2) = (cf(), cf(), cf(), cf());
            let (f, g) = (cf(), cf());
            let a = random::function(&mut rng, &grid);
            let b = random::function(&mut rng, &grid);
            let t = FiniteRankOperator::new(vec![(xi.clone(), eta.clone())])?;
            let t_adj = FiniteRankOperator::new(vec![(eta, xi)])?;
            let lhs = t.apply(&z)?.inner(&z2)?;
            let rhs = z.inner(&t_adj.apply(&z2)?)?;
            let scale = 1.0 + lhs.sup_norm();
            worst = worst.max(lhs.distance(&rhs)? / scale);
            let lhs = f.left(&a)?.inner(&g)?;
            let rhs = f.inner(&g.left(&a.conj())?)?;
            worst = worst.max(lhs.distance(&rhs)? / (1.0 + lhs.sup_norm()));
            let lhs = f.inner(&g.right(&b)?)?;
            let rhs = f.inner(&g)?.mul(&b)?;
            worst = worst.max(lhs.distance(&rhs)? / (1.0 + lhs.sup_norm()));
        }
        out.push(Property::upper("adjoint-identities", Some(name), count, worst, IDENTITY_TOL));
    }
    Ok(out)
}

/// Residuals of the partition-of-unity approximant on the tent system.
#[derive(Clone, Debug, Serialize)]
pub struct CompactnessRun {
    /// `(partition depth, residual)` for `a` supported in `[0.6, 0.9]`.
    pub residuals: Vec<(usize, f64)>,
    /// `(candidate, probe lower bound)` for `a` with `a(1/2) = 1`.
    pub lower_bounds: Vec<(String, f64)>,
}

pub const COMPACT_DEPTHS: std::ops::RangeInclusive<usize> = 2..=8;

pub fn compactness_run(seed: u64) -> Result<CompactnessRun> {
    let entry = registry_entry("tent").ok_or_else(|| Error::Internal("tent missing".into()))?;
    let witness = entry.witness.clone().ok_or_else(|| Error::Internal("tent witness".into()))?;
    let system = entry.system;
    let branch = branch_scan(&system, REGISTRY_DEPTH, REGISTRY_TOL)?;
    let osc = check_open_set_condition(&system, &witness, REGISTRY_DEPTH, 200, seed)?;
    let grid = SampleGrid::new(Arc::new(system.clone()), 12)?;
    let pi = std::f64::consts::PI;
    let smooth = SampledFunction::from_real(&grid, |p| {
        let x = p[0];
        if (0.6..=0.9).contains(&x) {
            (pi * (x - 0.6) / 0.3).sin().powi(2)
        } else {
            0.0
        }
    });
    let mut residuals = Vec::new();
    for p in COMPACT_DEPTHS {
        residuals.push((p, compact_approx(&smooth, &branch, &osc, p, seed)?.residual));
    }
    let peaked = SampledFunction::from_real(&grid, |p| (1.0 - 2.0 * (p[0] - 0.5).abs()).max(0.0));
    let mut lower_bounds = Vec::new();
    for p in COMPACT_DEPTHS {
        let r = compact_approx(&peaked, &branch, &osc, p, seed)?;
        lower_bounds.push((
            format!("partition-depth-{p}"),
            probe_lower_bound(&peaked, &r.operator, &branch)?,
        ));
    }
    lower_bounds.push((
        "zero".into(),
        probe_lower_bound(&peaked, &FiniteRankOperator::zero(), &branch)?,
    ));
    let mut rng = rng_for(seed, "compact");
    for k in 0..5 {
        let pairs = (0..3)
            .map(|_| {
                (
                    random::cograph_function(&mut rng, &grid),
                    random::cograph_function(&mut rng, &grid),
                )
            })
            .collect();
        let t = FiniteRankOperator::new(pairs)?;
        lower_bounds.push((format!("random-rank-3-{k}"), probe_lower_bound(&peaked, &t, &branch)?));
    }
    Ok(CompactnessRun {
        residuals,
        lower_bounds,
    })
}

pub const COMPACT_RESIDUAL_BOUND: f64 = 0.02;

pub fn compact_lower_bound_target() -> f64 {
    1.0 / (4.0 * 2f64.sqrt()) - 0.05
}

pub fn compactness(seed: u64) -> Result<Vec<Property>> {
    let run = compactness_run(seed)?;
    let last = run.residuals.last().map(|r| r.1).unwrap_or(f64::INFINITY);
    let monotone = run.residuals.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let mut residual = Property::upper(
        "compact-residual",
        Some("tent"),
        run.residuals.len(),
        last,
        COMPACT_RESIDUAL_BOUND,
    )
    .detail(format!("{:?}", run.residuals));
    residual.pass &= monotone;
    let worst = run.lower_bounds.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let lower = Property::lower(
        "compact-obstruction",
        Some("tent"),
        run.lower_bounds.len(),
        worst,
        compact_lower_bound_target(),
    );
    Ok(vec![residual, lower])
}

/// `#B = dim(A / I_X)` for registry systems with finite branch set.
pub fn branch_dimension() -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for entry in registry() {
        let report = classify(&entry.system, REGISTRY_DEPTH, REGISTRY_TOL, entry.witness.as_ref())?;
        if let ClassVerdict::NotGraphSeparated {
            branch_points: Some(count),
            quotient_dimension: Some(dim),
            ..
        } = report.verdict
        {
            let listed = report.branch.points.len();
            let p = Property::upper(entry.name, Some(entry.name), 1, 0.0, 0.0);
            out.push(Property {
                name: "branch-dimension".into(),
                pass: count == dim && listed == count,
                worst: (count as f64 - dim as f64).abs(),
                ..p
            }
            .detail(format!("#B = {count}, dim A/I = {dim}")));
        }
    }
    Ok(out)
}

/// `E_γ(a) = (ξ₀ | φ(a) ξ₀)_A`, unitality, positivity and multiplicativity
/// of `β_i`.
pub fn transfer_identities(seed: u64, count: usize) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for (name, system) in systems() {
        let grid = suite_grid(&system, GRID_TARGET)?;
        let mut rng = rng_for(seed, name);
        let xi = xi0(&grid);
        let one = SampledFunction::constant(&grid, C64::new(1.0, 0.0));
        let mut module: f64 = 0.0;
        let mut positivity: f64 = 0.0;
        let mut multiplicative: f64 = 0.0;
        for _ in 0..count {
            let a = random::function(&mut rng, &grid);
            let e = transfer_op(&a);
            module = module.max(e.distance(&xi.inner(&xi.left(&a)?)?)?);
            let p = transfer_op(&a.mul(&a.conj())?);
            positivity = positivity.max(p.values().iter().map(|v| (-v.re).max(v.im.abs())).fold(0.0, f64::max));
            let b = random::function(&mut rng, &grid);
            for i in 0..system.len() {
                let lhs = beta(i, &a.mul(&b)?)?;
                let rhs = beta(i, &a)?.mul(&beta(i, &b)?)?;
                multiplicative = multiplicative.max(lhs.distance(&rhs)?);
            }
        }
        out.push(Property::upper("transfer-module-form", Some(name), count, module, 1e-12));
        out.push(Property::upper(
            "transfer-unital",
            Some(name),
            1,
            transfer_op(&one).distance(&one)?,
            1e-12,
        ));
        out.push(Property::upper("transfer-positive", Some(name), count, positivity, 1e-12));
        out.push(Property::upper("beta-multiplicative", Some(name), count, multiplicative, 1e-12));
    }
    Ok(out)
}

/// Random `W_n`-invariant function: a random `b` read through the coding
/// truncation that drops the first `n` symbols.
pub fn random_invariant(rng: &mut ChaCha8Rng, grid: &Arc<SampleGrid>, n: usize) -> SampledFunction {
    let b = random::function(rng, grid);
    let big_n = grid.system().len();
    let tail = big_n.pow((grid.depth() - n) as u32);
    let lift = big_n.pow(n as u32);
    SampledFunction::new(
        grid.clone(),
        (0..grid.len()).map(|x| b.value((x % tail) * lift)).collect(),
    )
    .expect("finite values")
}

/// `φ(a) f = f β(a)` and its iterated form on `C(P_n)` for random invariant
/// `a`; the negative control `a(y) = y` on the tent system must not commute.
pub fn commutation(seed: u64, count: usize) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for (name, system) in systems() {
        let mut rng = rng_for(seed, name);
        for n in 1..=3usize {
            let target = (SUITE_PATH_CAP / system.len().pow(n as u32)).min(GRID_TARGET);
            let grid = suite_grid(&system, target)?;
            if grid.depth() <= n {
                continue;
            }
            let path = build_path_sample(grid.clone(), n, SUITE_PATH_CAP)?;
            let mut worst: f64 = 0.0;
            let mut certified = true;
            for _ in 0..count {
                let a = random_invariant(&mut rng, &grid, n);
                let Some(inv) = certify_invariant(&a, n, 0.0)?.certified() else {
                    certified = false;
                    continue;
                };
                // descent: W_n-invariance gives W_k-invariance for k < n
                certified &= inv.spreads.iter().all(|&s| s == 0.0);
                let f = random::cograph_function(&mut rng, &grid);
                worst = worst.max(commutation_check(&inv, &f)?);
                let factors: Vec<_> = (0..n).map(|_| random::cograph_function(&mut rng, &grid)).collect();
                worst = worst.max(commutation_check_path(&inv, &tensor_to_path(&factors, &path)?)?);
            }
            let mut p = Property::upper(
                &format!("commutation-n{n}"),
                Some(name),
                count,
                worst,
                grid.tol(),
            );
            p.pass &= certified;
            out.push(p);
        }
    }
    let tent = registry_entry("tent").ok_or_else(|| Error::Internal("tent missing".into()))?;
    let grid = suite_grid(&tent.system, GRID_TARGET)?;
    let a = SampledFunction::from_real(&grid, |p| p[0]);
    let fake = crate::transfer::InvariantFunction {
        iterates: vec![a.clone(), beta(0, &a)?],
        function: a,
        depth: 1,
        tol: 0.0,
        spreads: vec![],
    };
    let one = CographFunction::constant(&grid, C64::new(1.0, 0.0));
    out.push(Property::lower(
        "commutation-negative-control",
        Some("tent"),
        1,
        commutation_check(&fake, &one)?,
        0.1,
    ));
    Ok(out)
}

pub const WITNESS_EPSILONS: [f64; 3] = [0.05, 0.1, 0.2];

/// Amplification and normalization witnesses on random positive functions.
pub fn witnesses(seed: u64, count: usize) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for (name, system) in systems() {
        let grid = suite_grid(&system, GRID_TARGET)?;
        let mut rng = rng_for(seed, name);
        let mut worst: f64 = 0.0;
        let mut max_depth = 0;
        let mut failure = None;
        for _ in 0..count {
            let a = random::positive(&mut rng, &grid);
            for &eps in &WITNESS_EPSILONS {
                match witness_defect(&a, eps) {
                    Ok((defect, depth)) => {
                        worst = worst.max(defect);
                        max_depth = max_depth.max(depth);
                    }
                    Err(e) => failure = Some(format!("ε = {eps}: {e}")),
                }
            }
        }
        let mut p = Property::upper("amplify-normalize", Some(name), count * WITNESS_EPSILONS.len(), worst, 1e-9)
            .detail(format!("grid depth {}, deepest amplification word {max_depth}", grid.depth()));
        if let Some(f) = failure {
            p.pass = false;
            p.detail = f;
        }
        out.push(p);
    }
    Ok(out)
}

/// Largest violation of the amplification and normalization contracts for
/// one `(a, ε)`, with the amplification depth.
pub fn witness_defect(a: &SampledFunction, eps: f64) -> Result<(f64, usize)> {
    let grid = a.grid();
    let norm = a.sup_norm();
    let amp = amplify(a, eps)?;
    let mut worst: f64 = 0.0;
    let ff = amp.f.inner(&amp.f)?;
    let faf = amp.f.inner(&amp.f.left(a)?)?;
    for y in 0..grid.len() {
        worst = worst.max((ff.value(y) - 1.0).norm());
        let v = faf.value(y).re;
        worst = worst.max(norm - eps - v).max(v - norm);
    }
    let u = normalize_witness(a, &amp)?;
    let uau = u.inner(&u.left(a)?)?;
    for y in 0..grid.len() {
        worst = worst.max((uau.value(y) - 1.0).norm());
    }
    worst = worst.max(norm2(&u)? - (norm - eps).powf(-0.5));
    Ok((worst, amp.depth))
}

/// Grid depths for the separating-function checks.
pub fn separation_grid_depth(name: &str) -> usize {
    match name {
        "gasket-modified" => 10,
        _ => 12,
    }
}

/// The three separating-function contracts for `n ∈ {1,2,3}` on the tent,
/// Cantor and modified gasket systems with `T` the identity, a
/// multiplication operator and a random rank-2 operator.
/// `ε = 0.1 · max(‖T‖², 1)`.
/// Relative `ε` of the separating-function checks.
pub const SEPARATION_EPS: f64 = 0.25;

pub fn separation(seed: u64) -> Result<Vec<Property>> {
    let mut out = Vec::new();
    for name in ["tent", "cantor", "gasket-modified"] {
        let entry = registry_entry(name).ok_or_else(|| Error::Internal(format!("{name} missing")))?;
        let witness = entry.witness.clone().ok_or_else(|| Error::Internal(format!("{name} witness")))?;
        let grid = SampleGrid::new(Arc::new(entry.system.clone()), separation_grid_depth(name))?;
        let mut rng = rng_for(seed, name);
        for n in 1..=3usize {
            let path = build_path_sample(grid.clone(), n, PATH_CAP)?;
            let ops = operators(&mut rng, &path);
            for (label, t) in ops {
                let name_n = format!("separating-n{n}-{label}");
                let eps = SEPARATION_EPS * t.norm(&path).powi(2).max(1.0);
                let sep = match separating_function(&path, &t, eps, &witness) {
                    Ok(sep) => sep,
                    Err(e) => {
                        out.push(
                            Property::upper(&name_n, Some(name), 1, f64::INFINITY, 0.0)
                                .detail(e.to_string()),
                        );
                        continue;
                    }
                };
                let invariant = matches!(
                    certify_invariant(&sep.invariant.function, n, 0.0)?,
                    Certificate::Certified(_)
                );
                let defect = disjointness_defect(&sep.invariant);
                let margin = sep.value - (sep.norm_sq - eps);
                out.push(Property {
                    name: name_n,
                    system: Some(name.into()),
                    pass: invariant && defect == 0.0 && margin > 0.0,
                    count: 1,
                    worst: margin,
                    bound: 0.0,
                    detail: format!(
                        "word {}, invariant {invariant}, disjointness defect {defect}, ‖φ(a)Tf‖² = {:.6}, ‖T‖² = {:.6}",
                        sep.word, sep.value, sep.norm_sq
                    ),
                });
            }
        }
    }
    Ok(out)
}

fn operators(rng: &mut ChaCha8Rng, path: &Arc<PathSample>) -> Vec<(&'static str, PathOperator)> {
    let grid = path.grid();
    let pairs = (0..2)
        .map(|_| (random::path_function(rng, path), random::path_function(rng, path)))
        .collect();
    vec![
        ("identity", PathOperator::Identity),
        ("multiplication", PathOperator::Multiplication(random::function(rng, grid))),
        (
            "finite-rank",
            PathOperator::FiniteRank(FiniteRankOperator::new(pairs).expect("same sample")),
        ),
    ]
}

fn report(suite: &str, seed: u64, properties: Vec<Property>, registry: Option<RegistryTable>) -> SuiteReport {
    let pass = properties.iter().all(|p| p.pass) && registry.as_ref().is_none_or(|r| r.pass);
    SuiteReport {
        schema_version: crate::SCHEMA_VERSION,
        version: crate::VERSION,
        suite: suite.into(),
        seed,
        depth: REGISTRY_DEPTH,
        tol: REGISTRY_TOL,
        pass,
        properties,
        registry,
    }
}

pub fn bimodule_suite(seed: u64, counts: Counts) -> Result<SuiteReport> {
    let mut props = norm_equivalence(seed, counts.cograph)?;
    props.extend(tensor_isometry(seed, counts.tensor)?);
    props.extend(adjoint_identities(seed, counts.adjoint)?);
    props.extend(compactness(seed)?);
    props.extend(branch_dimension()?);
    Ok(report("bimodule", seed, props, None))
}

pub fn transfer_suite(seed: u64, counts: Counts) -> Result<SuiteReport> {
    let mut props = transfer_identities(seed, counts.transfer)?;
    props.extend(commutation(seed, counts.adjoint)?);
    props.extend(witnesses(seed, counts.positive)?);
    props.extend(separation(seed)?);
    Ok(report("transfer", seed, props, None))
}

pub fn registry_suite(seed: u64) -> Result<SuiteReport> {
    let table = registry_verify(REGISTRY_DEPTH, REGISTRY_TOL)?;
    Ok(report("registry", seed, Vec::new(), Some(table)))
}
