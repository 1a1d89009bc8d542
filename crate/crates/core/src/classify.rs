//! Cuntz-algebra classification and the built-in example registry.

use nalgebra::DVector;
use serde::Serialize;

use crate::cograph::{
    branch_scan, check_open_set_condition, check_strong_separation, graph_check_from,
    BranchReport, Cardinality, Check, SeparationReport, Verdict,
};
use crate::error::Result;
use crate::ifs::{ContractionMap, Hull, IfsSystem, Point};
use crate::region::Region;

/// Qualitative tag for non-graph-separated systems with a verified open set.
pub const SIMPLE_TAG: &str = "simple, purely infinite";

/// Random samples used by the sampled parts of the open-set check.
pub const OSC_SAMPLES: usize = 200;

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassVerdict {
    CuntzAlgebra {
        n: usize,
    },
    NotGraphSeparated {
        /// `#B` when the branch set is finite.
        branch_points: Option<usize>,
        infinite_at_resolution: bool,
        /// `dim(A / I_X)`, equal to `#B` for finite branch sets.
        quotient_dimension: Option<usize>,
        ideal: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    Undetermined {
        reason: String,
    },
}

impl ClassVerdict {
    pub fn label(&self) -> String {
        match self {
            ClassVerdict::CuntzAlgebra { n } => format!("O_{n}"),
            ClassVerdict::NotGraphSeparated {
                branch_points: Some(k),
                ..
            } => format!("not graph separated, #B = {k}"),
            ClassVerdict::NotGraphSeparated { .. } => {
                "not graph separated, B infinite at resolution".into()
            }
            ClassVerdict::Undetermined { .. } => "undetermined".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub depth: usize,
    pub tol: f64,
    pub separation: SeparationReport,
    pub branch: BranchReport,
    pub verdict: ClassVerdict,
    pub finitely_generated_projective: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub metadata: Vec<String>,
}

/// `X` is finitely generated projective iff `B = ∅`.
pub fn finite_projectivity_flag(branch: &BranchReport) -> bool {
    branch.is_empty()
}

/// Runs all separation checks and derives the verdict. Only graph
/// separation licenses a Cuntz-algebra label.
pub fn classify(
    system: &IfsSystem,
    depth: usize,
    tol: f64,
    witness: Option<&Region>,
) -> Result<ClassificationReport> {
    let branch = branch_scan(system, depth, tol)?;
    let graph = graph_check_from(&branch);
    let strong = check_strong_separation(system, depth, tol)?;
    let open_set = match witness {
        Some(v) => check_open_set_condition(system, v, depth, OSC_SAMPLES, 0)?,
        None => Check {
            verdict: Verdict::Undetermined,
            depth,
            tol,
            witness: None,
            gap: None,
            detail: "no witness region supplied".into(),
        },
    };
    let verdict = match (&graph.verdict, &branch.cardinality) {
        (Verdict::Holds, _) => ClassVerdict::CuntzAlgebra { n: system.len() },
        (Verdict::Fails, card) => {
            let (count, infinite) = match card {
                Cardinality::Finite { count } => (Some(*count), false),
                Cardinality::InfiniteAtResolution { .. } => (None, true),
                Cardinality::Empty => (Some(0), false),
            };
            ClassVerdict::NotGraphSeparated {
                branch_points: count,
                infinite_at_resolution: infinite,
                quotient_dimension: count,
                ideal: "functions vanishing on B".into(),
                tag: (open_set.verdict == Verdict::Holds).then(|| SIMPLE_TAG.to_string()),
            }
        }
        (Verdict::Undetermined, _) => ClassVerdict::Undetermined {
            reason: graph.detail.clone(),
        },
    };
    Ok(ClassificationReport {
        name: system.name().map(str::to_string),
        depth,
        tol,
        finitely_generated_projective: finite_projectivity_flag(&branch),
        separation: SeparationReport {
            strong,
            graph,
            open_set,
            witness_region: witness.cloned(),
        },
        branch,
        verdict,
        metadata: Vec::new(),
    })
}

/// Expected shape of the branch set of a registry system.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExpectedBranch {
    Empty,
    Points { points: Vec<Vec<f64>> },
    /// Union of closed segments `[a, b]`.
    Segments { segments: Vec<[Vec<f64>; 2]> },
}

#[derive(Clone, Debug, Serialize)]
pub struct Expected {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong: Option<Verdict>,
    pub graph: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub open_set: Option<Verdict>,
    /// Label as produced by [`ClassVerdict::label`].
    pub verdict: String,
    pub branch: ExpectedBranch,
    /// Touching point expected as the strong-separation witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong_witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub system: IfsSystem,
    pub witness: Option<Region>,
    pub expected: Expected,
    /// Algebra and K-theory statements echoed verbatim, never recomputed.
    pub metadata: Vec<&'static str>,
}

fn line(name: &str, maps: &[(f64, f64)]) -> IfsSystem {
    let maps = maps
        .iter()
        .map(|&(m, t)| ContractionMap::from_rows(&[vec![m]], &[t]).expect("builtin map"))
        .collect();
    IfsSystem::new(
        Some(name.into()),
        Hull {
            center: DVector::from_vec(vec![0.5]),
            radius: 0.5,
        },
        maps,
    )
    .expect("builtin system")
}

fn plane(name: &str, center: [f64; 2], radius: f64, maps: Vec<([f64; 4], [f64; 2])>) -> IfsSystem {
    let maps = maps
        .into_iter()
        .map(|(m, t)| {
            ContractionMap::from_rows(&[vec![m[0], m[1]], vec![m[2], m[3]]], &t)
                .expect("builtin map")
        })
        .collect();
    IfsSystem::new(
        Some(name.into()),
        Hull {
            center: DVector::from_vec(center.to_vec()),
            radius,
        },
        maps,
    )
    .expect("builtin system")
}

/// `z -> c + R(θ)(A z + t - c)` as a matrix/offset pair.
fn rotate_after(m: [f64; 4], t: [f64; 2], c: [f64; 2], theta: f64) -> ([f64; 4], [f64; 2]) {
    let (s, co) = theta.sin_cos();
    let r = [co, -s, s, co];
    let rm = [
        r[0] * m[0] + r[1] * m[2],
        r[0] * m[1] + r[1] * m[3],
        r[2] * m[0] + r[3] * m[2],
        r[2] * m[1] + r[3] * m[3],
    ];
    let d = [t[0] - c[0], t[1] - c[1]];
    (
        rm,
        [c[0] + r[0] * d[0] + r[1] * d[1], c[1] + r[2] * d[0] + r[3] * d[1]],
    )
}

fn unit_interval() -> Option<Region> {
    Some(Region::interval(0.0, 1.0))
}

fn expected(graph: Verdict, verdict: &str, branch: ExpectedBranch) -> Expected {
    Expected {
        strong: None,
        graph,
        open_set: None,
        verdict: verdict.into(),
        branch,
        strong_witness: None,
    }
}

pub fn cantor() -> IfsSystem {
    line("cantor", &[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)])
}

/// Geometric model of the full 3-shift: three disjoint copies at ratio 1/5.
pub fn full_shift() -> IfsSystem {
    line("full-shift", &[(0.2, 0.0), (0.2, 0.4), (0.2, 0.8)])
}

pub fn tent() -> IfsSystem {
    line("tent", &[(0.5, 0.0), (-0.5, 1.0)])
}

pub fn tent_modified() -> IfsSystem {
    line("tent-modified", &[(0.5, 0.0), (0.5, 0.5)])
}

const SQRT3: f64 = 1.7320508075688772;

fn koch_parts() -> (([f64; 4], [f64; 2]), ([f64; 4], [f64; 2])) {
    // z -> ω z̄ and z -> (1 - ω) z̄ + ω with ω = 1/2 + i √3/6
    let (a, b) = (0.5, SQRT3 / 6.0);
    (
        ([a, b, b, -a], [0.0, 0.0]),
        ([1.0 - a, -b, -b, -(1.0 - a)], [a, b]),
    )
}

pub fn koch() -> IfsSystem {
    let (g1, g2) = koch_parts();
    plane("koch", [0.5, 0.0], 0.7, vec![g1, g2])
}

/// Second map composed with the flip `z -> 1 - z̄` of the curve.
pub fn koch_modified() -> IfsSystem {
    let (g1, _) = koch_parts();
    let (a, b) = (0.5, SQRT3 / 6.0);
    // z -> 1 + (ω - 1) z
    let g2 = ([a - 1.0, -b, b, a - 1.0], [1.0, 0.0]);
    plane("koch-modified", [0.5, 0.0], 0.7, vec![g1, g2])
}

fn gasket_parts() -> Vec<([f64; 4], [f64; 2])> {
    let h = [0.5, 0.0, 0.0, 0.5];
    vec![(h, [0.25, SQRT3 / 4.0]), (h, [0.0, 0.0]), (h, [0.5, 0.0])]
}

const GASKET_CENTROID: [f64; 2] = [0.5, SQRT3 / 6.0];

pub fn gasket() -> IfsSystem {
    plane("gasket", GASKET_CENTROID, 0.6, gasket_parts())
}

/// Second and third maps followed by rotations of their sub-triangles by
/// `∓2π/3` about the sub-triangle centroids.
pub fn gasket_modified() -> IfsSystem {
    let p = gasket_parts();
    let centroid = |(m, t): ([f64; 4], [f64; 2])| {
        [
            m[0] * GASKET_CENTROID[0] + m[1] * GASKET_CENTROID[1] + t[0],
            m[2] * GASKET_CENTROID[0] + m[3] * GASKET_CENTROID[1] + t[1],
        ]
    };
    let third = 2.0 * std::f64::consts::PI / 3.0;
    let g2 = rotate_after(p[1].0, p[1].1, centroid(p[1]), -third);
    let g3 = rotate_after(p[2].0, p[2].1, centroid(p[2]), third);
    plane("gasket-modified", GASKET_CENTROID, 0.6, vec![p[0], g2, g3])
}

fn carpet_offsets() -> [[f64; 2]; 8] {
    let (t1, t2) = (1.0 / 3.0, 2.0 / 3.0);
    [
        [0.0, 0.0],
        [t1, 0.0],
        [t2, 0.0],
        [0.0, t1],
        [t2, t1],
        [0.0, t2],
        [t1, t2],
        [t2, t2],
    ]
}

pub fn carpet() -> IfsSystem {
    let s = 1.0 / 3.0;
    let maps = carpet_offsets()
        .iter()
        .map(|t| ([s, 0.0, 0.0, s], *t))
        .collect();
    plane("carpet", [0.5, 0.5], 0.75, maps)
}

pub fn carpet_modified() -> IfsSystem {
    let s = 1.0 / 3.0;
    let t2 = 2.0 / 3.0;
    let id = [s, 0.0, 0.0, s];
    let fx = [-s, 0.0, 0.0, s];
    let fy = [s, 0.0, 0.0, -s];
    let maps = vec![
        (id, [0.0, 0.0]),
        (fx, [t2, 0.0]),
        (id, [t2, 0.0]),
        (fy, [0.0, t2]),
        (fy, [t2, t2]),
        (id, [0.0, t2]),
        (fx, [t2, t2]),
        (id, [t2, t2]),
    ];
    plane("carpet-modified", [0.5, 0.5], 0.75, maps)
}

fn triangle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<Region> {
    Some(Region::Polygon {
        vertices: vec![a, b, c],
    })
}

fn unit_square() -> Option<Region> {
    Some(Region::Box {
        lo: vec![0.0, 0.0],
        hi: vec![1.0, 1.0],
    })
}

/// Segment union `(([0,1/3] ∪ [2/3,1]) × {1/3,2/3}) ∪ ({1/3,2/3} × ([0,1/3] ∪ [2/3,1]))`.
pub fn carpet_modified_branch_segments() -> Vec<[Vec<f64>; 2]> {
    let (t1, t2) = (1.0 / 3.0, 2.0 / 3.0);
    let spans = [(0.0, t1), (t2, 1.0)];
    let mut out = Vec::new();
    for level in [t1, t2] {
        for (a, b) in spans {
            out.push([vec![a, level], vec![b, level]]);
        }
    }
    for level in [t1, t2] {
        for (a, b) in spans {
            out.push([vec![level, a], vec![level, b]]);
        }
    }
    out
}

/// The ten example systems with their stated classification data.
pub fn registry() -> Vec<RegistryEntry> {
    let omega = [0.5, SQRT3 / 6.0];
    let koch_v = triangle([0.0, 0.0], [1.0, 0.0], omega);
    let gasket_v = triangle([0.0, 0.0], [1.0, 0.0], [0.5, SQRT3 / 2.0]);
    let gasket_mod = gasket_modified();
    let gasket_mod_points = gasket_modified_branch_points(&gasket_mod);
    vec![
        RegistryEntry {
            name: "cantor",
            system: cantor(),
            witness: unit_interval(),
            expected: Expected {
                strong: Some(Verdict::Holds),
                open_set: Some(Verdict::Holds),
                ..expected(Verdict::Holds, "O_2", ExpectedBranch::Empty)
            },
            metadata: vec!["O_2"],
        },
        RegistryEntry {
            name: "full-shift",
            system: full_shift(),
            witness: unit_interval(),
            expected: Expected {
                strong: Some(Verdict::Holds),
                open_set: Some(Verdict::Holds),
                ..expected(Verdict::Holds, "O_3", ExpectedBranch::Empty)
            },
            metadata: vec!["O_N", "Lip(sigma_j) = 1/2 in the sequence-space metric"],
        },
        RegistryEntry {
            name: "tent",
            system: tent(),
            witness: unit_interval(),
            expected: Expected {
                strong: Some(Verdict::Fails),
                open_set: Some(Verdict::Holds),
                ..expected(
                    Verdict::Fails,
                    "not graph separated, #B = 1",
                    ExpectedBranch::Points {
                        points: vec![vec![0.5]],
                    },
                )
            },
            metadata: vec!["O_{z^2-2}", "O_infinity"],
        },
        RegistryEntry {
            name: "tent-modified",
            system: tent_modified(),
            witness: unit_interval(),
            expected: Expected {
                strong: Some(Verdict::Fails),
                open_set: Some(Verdict::Holds),
                strong_witness: Some(vec![0.5]),
                ..expected(Verdict::Holds, "O_2", ExpectedBranch::Empty)
            },
            metadata: vec!["O_2"],
        },
        RegistryEntry {
            name: "koch",
            system: koch(),
            witness: koch_v.clone(),
            expected: Expected {
                strong: Some(Verdict::Fails),
                open_set: Some(Verdict::Holds),
                strong_witness: Some(omega.to_vec()),
                ..expected(Verdict::Holds, "O_2", ExpectedBranch::Empty)
            },
            metadata: vec!["O_2", "O_{(gamma_w), w in W_n} = O_{2^n}"],
        },
        RegistryEntry {
            name: "koch-modified",
            system: koch_modified(),
            witness: koch_v,
            expected: Expected {
                open_set: Some(Verdict::Holds),
                ..expected(
                    Verdict::Fails,
                    "not graph separated, #B = 1",
                    ExpectedBranch::Points {
                        points: vec![omega.to_vec()],
                    },
                )
            },
            metadata: vec![
                "O_{T_{2^n}}([0,1])",
                "K_0 = Z^{2^n-1}",
                "K_1 = 0",
            ],
        },
        RegistryEntry {
            name: "gasket",
            system: gasket(),
            witness: gasket_v.clone(),
            expected: Expected {
                strong: Some(Verdict::Fails),
                open_set: Some(Verdict::Holds),
                ..expected(Verdict::Holds, "O_3", ExpectedBranch::Empty)
            },
            metadata: vec!["O_3"],
        },
        RegistryEntry {
            name: "gasket-modified",
            system: gasket_mod,
            witness: gasket_v,
            expected: Expected {
                open_set: Some(Verdict::Holds),
                ..expected(
                    Verdict::Fails,
                    "not graph separated, #B = 3",
                    ExpectedBranch::Points {
                        points: gasket_mod_points,
                    },
                )
            },
            metadata: vec![
                "O_R with R(z) = (z^3 - 16/27)/z",
                "K_0(O_R) contains a torsion free element (as stated; a torsion element may be meant)",
                "not isomorphic to O_3",
            ],
        },
        RegistryEntry {
            name: "carpet",
            system: carpet(),
            witness: unit_square(),
            expected: Expected {
                strong: Some(Verdict::Fails),
                open_set: Some(Verdict::Holds),
                ..expected(Verdict::Holds, "O_8", ExpectedBranch::Empty)
            },
            metadata: vec!["O_8"],
        },
        RegistryEntry {
            name: "carpet-modified",
            system: carpet_modified(),
            witness: unit_square(),
            expected: Expected {
                open_set: Some(Verdict::Holds),
                ..expected(
                    Verdict::Fails,
                    "not graph separated, B infinite at resolution",
                    ExpectedBranch::Segments {
                        segments: carpet_modified_branch_segments(),
                    },
                )
            },
            metadata: vec![
                "K_0(C(B)) = Z^4",
                "K_1(C(B)) = 0",
                "K_0(C(K)) = Z",
                "K_1(C(K)) = Z^infinity",
                "K_0 contains a torsion free element",
                "not isomorphic to O_8",
            ],
        },
    ]
}

/// Midpoints of the three inner edges of the gasket, where two rotated
/// copies meet with matching orientation.
fn gasket_modified_branch_points(_system: &IfsSystem) -> Vec<Vec<f64>> {
    vec![
        vec![0.25, SQRT3 / 4.0],
        vec![0.5, 0.0],
        vec![0.75, SQRT3 / 4.0],
    ]
}

pub fn registry_entry(name: &str) -> Option<RegistryEntry> {
    registry().into_iter().find(|e| e.name == name)
}

/// Registry entry whose system has the same content hash, if any.
pub fn registry_match(system: &IfsSystem) -> Option<RegistryEntry> {
    let h = system.content_hash();
    registry().into_iter().find(|e| e.system.content_hash() == h)
}

/// Samples of a segment union, `per_segment` evenly spaced points each.
pub fn segment_samples(segments: &[[Vec<f64>; 2]], per_segment: usize) -> Vec<Point> {
    let mut out = Vec::new();
    for [a, b] in segments {
        let (a, b) = (DVector::from_vec(a.clone()), DVector::from_vec(b.clone()));
        for k in 0..per_segment {
            let t = k as f64 / (per_segment - 1) as f64;
            out.push(&a + (&b - &a) * t);
        }
    }
    out
}

fn segment_distance(x: &Point, segments: &[[Vec<f64>; 2]]) -> f64 {
    segments
        .iter()
        .map(|[a, b]| {
            let (a, b) = (DVector::from_vec(a.clone()), DVector::from_vec(b.clone()));
            let d = &b - &a;
            let t = ((x - &a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (x - (&a + d * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Comparison of a detected branch set with a segment union.
#[derive(Clone, Debug, Serialize)]
pub struct SegmentMatch {
    /// `max` distance of a detected point to the union.
    pub outward: f64,
    /// Fraction of union samples within `resolution` of a detected point.
    pub coverage: f64,
    /// `max` distance of a union sample to the detected set.
    pub inward: f64,
    pub resolution: f64,
}

pub fn match_segments(branch: &BranchReport, segments: &[[Vec<f64>; 2]]) -> SegmentMatch {
    let detected = branch.all_points();
    let outward = detected
        .iter()
        .map(|x| segment_distance(x, segments))
        .fold(0.0, f64::max);
    let samples = segment_samples(segments, 250);
    // bucket the detected points for fast nearest-neighbour lookups
    let cell = branch.resolution.max(1e-12);
    let mut grid: std::collections::HashMap<Vec<i64>, Vec<usize>> = Default::default();
    for (k, p) in detected.iter().enumerate() {
        grid.entry(p.iter().map(|v| (v / cell).floor() as i64).collect())
            .or_default()
            .push(k);
    }
    let nearest = |x: &Point| -> f64 {
        let base: Vec<i64> = x.iter().map(|v| (v / cell).floor() as i64).collect();
        let mut best = f64::INFINITY;
        let d = base.len();
        for offs in 0..3usize.pow(d as u32) {
            let mut key = base.clone();
            let mut o = offs;
            for slot in key.iter_mut() {
                *slot += (o % 3) as i64 - 1;
                o /= 3;
            }
            if let Some(list) = grid.get(&key) {
                for &k in list {
                    best = best.min((&detected[k] - x).norm());
                }
            }
        }
        best
    };
    let dists: Vec<f64> = samples.iter().map(nearest).collect();
    let covered = dists.iter().filter(|&&d| d <= branch.resolution).count();
    SegmentMatch {
        outward,
        coverage: covered as f64 / samples.len() as f64,
        inward: dists.iter().cloned().fold(0.0, f64::max),
        resolution: branch.resolution,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegistryRow {
    pub name: String,
    pub pass: bool,
    pub verdict: String,
    pub deltas: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<SegmentMatch>,
    pub metadata: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegistryTable {
    pub depth: usize,
    pub tol: f64,
    pub pass: bool,
    pub rows: Vec<RegistryRow>,
}

/// Compares one classification against the stored expectations.
pub fn verify_entry(entry: &RegistryEntry, depth: usize, tol: f64) -> Result<RegistryRow> {
    let report = classify(&entry.system, depth, tol, entry.witness.as_ref())?;
    let exp = &entry.expected;
    let mut deltas = Vec::new();
    let sep = &report.separation;
    let mut cmp = |what: &str, want: Option<Verdict>, got: Verdict| {
        if let Some(w) = want {
            if w != got {
                deltas.push(format!("{what}: expected {w:?}, got {got:?}"));
            }
        }
    };
    cmp("graph", Some(exp.graph), sep.graph.verdict);
    cmp("strong", exp.strong, sep.strong.verdict);
    cmp("open set", exp.open_set, sep.open_set.verdict);
    let label = report.verdict.label();
    if label != exp.verdict {
        deltas.push(format!("verdict: expected {}, got {label}", exp.verdict));
    }
    if let Some(w) = &exp.strong_witness {
        match &sep.strong.witness {
            Some(got) if crate::ifs::dist(&got.x, w) <= tol => {}
            other => deltas.push(format!("strong witness: expected {w:?}, got {other:?}")),
        }
    }
    let mut segments = None;
    match &exp.branch {
        ExpectedBranch::Empty => {
            if !report.branch.is_empty() {
                deltas.push("branch set should be empty".into());
            }
        }
        ExpectedBranch::Points { points } => {
            let got = &report.branch.points;
            if got.len() != points.len() || !report.branch.sampled.is_empty() {
                deltas.push(format!(
                    "expected {} branch points, got {:?}",
                    points.len(),
                    report.branch.cardinality
                ));
            }
            for p in points {
                if !got.iter().any(|g| crate::ifs::dist(&g.x, p) <= tol) {
                    deltas.push(format!("missing branch point {p:?}"));
                }
            }
            if let ClassVerdict::NotGraphSeparated {
                branch_points: Some(k),
                quotient_dimension: Some(q),
                ..
            } = &report.verdict
            {
                if k != q {
                    deltas.push(format!("#B = {k} but dim(A/I_X) = {q}"));
                }
            }
        }
        ExpectedBranch::Segments { segments: segs } => {
            let m = match_segments(&report.branch, segs);
            if m.outward > m.resolution {
                deltas.push(format!("detected point {:e} away from the segments", m.outward));
            }
            if m.coverage < 0.99 {
                deltas.push(format!("segment coverage {:.4} < 0.99", m.coverage));
            }
            segments = Some(m);
        }
    }
    Ok(RegistryRow {
        name: entry.name.to_string(),
        pass: deltas.is_empty(),
        verdict: label,
        deltas,
        segments,
        metadata: entry.metadata.iter().map(|s| s.to_string()).collect(),
    })
}

pub fn registry_verify(depth: usize, tol: f64) -> Result<RegistryTable> {
    let rows = registry()
        .iter()
        .map(|e| verify_entry(e, depth, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(RegistryTable {
        depth,
        tol,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

/// Registry as written to `registry.json`.
pub fn registry_json() -> serde_json::Value {
    let entries: Vec<_> = registry()
        .iter()
        .map(|e| {
            serde_json::json!({
                "name": e.name,
                "system": e.system.to_file(),
                "witness": e.witness,
                "expected": e.expected,
                "metadata": e.metadata,
            })
        })
        .collect();
    serde_json::json!({
        "schema_version": crate::SCHEMA_VERSION,
        "entries": entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_ten_proper_systems() {
        let r = registry();
        assert_eq!(r.len(), 10);
        for e in &r {
            assert!(e.system.verify_proper().unwrap().pass(), "{}", e.name);
        }
    }

    #[test]
    fn contraction_constants_of_examples() {
        for b in gasket().bounds() {
            assert!((b.lower - 0.5).abs() < 1e-15 && (b.upper - 0.5).abs() < 1e-15);
        }
        for b in carpet().bounds().iter().chain(carpet_modified().bounds()) {
            assert!((b.lower - 1.0 / 3.0).abs() < 1e-15);
        }
        for b in koch_modified().bounds() {
            assert!((b.upper - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn koch_touching_and_flip() {
        let k = koch();
        let one = DVector::from_vec(vec![1.0, 0.0]);
        let zero = DVector::from_vec(vec![0.0, 0.0]);
        let a = k.map(0).apply(&one);
        let b = k.map(1).apply(&zero);
        assert!((a - &b).norm() < 1e-15);
        let m = koch_modified();
        let c = m.map(1).apply(&one);
        assert!((c - b).norm() < 1e-15);
    }

    #[test]
    fn cantor_is_o2_and_projective() {
        let r = classify(&cantor(), 8, 1e-9, unit_interval().as_ref()).unwrap();
        assert_eq!(r.verdict, ClassVerdict::CuntzAlgebra { n: 2 });
        assert!(r.finitely_generated_projective);
    }

    #[test]
    fn tent_is_not_graph_separated() {
        let r = classify(&tent(), 10, 1e-9, unit_interval().as_ref()).unwrap();
        assert_eq!(r.verdict.label(), "not graph separated, #B = 1");
        assert!(!r.finitely_generated_projective);
        match r.verdict {
            ClassVerdict::NotGraphSeparated { tag, quotient_dimension, .. } => {
                assert_eq!(tag.as_deref(), Some(SIMPLE_TAG));
                assert_eq!(quotient_dimension, Some(1));
            }
            _ => unreachable!(),
        }
    }
}
