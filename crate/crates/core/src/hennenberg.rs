//! Edge additions and `d`-dimensional Hennenberg operations, together with the
//! steps that carry a stress certificate across them.
//!
//! A Hennenberg operation deletes an edge `{x, y}`, adds a vertex `z` joined to
//! `x`, `y` and `d − 1` further vertices. To transfer a certificate, `z` is first
//! placed on the line through `x` and `y` with `z − x = (y − x)/a`, the stress on
//! `{x, y}` is split as `a·ω` on `{x, z}` and `b·ω` on `{z, y}` (`1/a + 1/b = 1`),
//! and the new matrix differs from the old one by a rank-one block `M`. The
//! sign of `a` decides whether `M` is PSD (certificate preserved) or NSD
//! (certificate broken). The collinear framework is then jiggled to a
//! generic one and the stress re-projected onto its stress space.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::graph::{self, Edge, Framework, Graph};
use crate::linalg;
use crate::rigidity;
use crate::stress::{self, Classification, SpectralReport, StressVector};
use crate::tolerance::Tolerances;

/// Delete `remove`, add a new vertex joined to both its ends and to `extra`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HennenbergStep {
    remove: Edge,
    extra: Vec<usize>,
}

impl HennenbergStep {
    pub fn new(x: usize, y: usize, extra: Vec<usize>) -> Result<Self> {
        let remove = Edge::new(x, y)?;
        for (k, &w) in extra.iter().enumerate() {
            if remove.contains(w) {
                return Err(Error::invalid(alloc::format!(
                    "extra neighbour {w} is an end of the removed edge"
                )));
            }
            if extra[..k].contains(&w) {
                return Err(Error::invalid(alloc::format!(
                    "extra neighbour {w} repeated"
                )));
            }
        }
        Ok(Self { remove, extra })
    }

    pub fn remove(&self) -> Edge {
        self.remove
    }

    pub fn extra(&self) -> &[usize] {
        &self.extra
    }

    /// The dimension this step belongs to: `extra.len() + 1`.
    pub fn dimension(&self) -> usize {
        self.extra.len() + 1
    }
}

/// Graph produced by a Hennenberg step; the new vertex gets index `v`.
pub fn apply_hennenberg_graph(g: &Graph, step: &HennenbergStep) -> Result<Graph> {
    let d = step.dimension();
    let v = g.num_vertices();
    if v < d + 1 {
        return Err(Error::invalid(alloc::format!(
            "Hennenberg steps in dimension {d} need at least {} vertices, graph has {v}",
            d + 1
        )));
    }
    let (x, y) = step.remove.pair();
    if !g.has_edge(x, y) {
        return Err(Error::invalid(alloc::format!(
            "edge {} is not in the graph",
            step.remove
        )));
    }
    if let Some(&w) = step.extra.iter().find(|&&w| w >= v) {
        return Err(Error::invalid(alloc::format!(
            "extra neighbour {w} out of range"
        )));
    }
    let z = v;
    let pairs = g
        .edges()
        .iter()
        .filter(|&&e| e != step.remove)
        .map(|e| e.pair())
        .chain([(x, z), (y, z)])
        .chain(step.extra.iter().map(|&w| (w, z)));
    Graph::new(v + 1, pairs)
}

/// A framework carrying a stress together with its spectral report.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedFramework {
    pub framework: Framework,
    pub stress: StressVector,
    pub report: SpectralReport,
}

impl CertifiedFramework {
    /// Computes the report for `stress`; fails if it is not an equilibrium.
    pub fn new(framework: Framework, stress: StressVector, tol: &Tolerances) -> Result<Self> {
        let residual = stress::equilibrium_residual(&framework, &stress);
        if residual > tol.residual {
            return Err(Error::CertificationFailed(alloc::format!(
                "equilibrium residual {residual:e} exceeds {:e}",
                tol.residual
            )));
        }
        let report = stress::stress_report(framework.graph(), &stress, tol.spectral)?;
        Ok(Self {
            framework,
            stress,
            report,
        })
    }

    pub fn dimension(&self) -> usize {
        self.framework.dimension()
    }

    /// PSD with nullity exactly `d + 1`.
    pub fn is_gur_certificate(&self) -> bool {
        self.report.is_psd_with_nullity(self.dimension() + 1)
    }
}

/// Adds an edge carrying zero stress; the stress matrix is unchanged.
pub fn apply_edge_addition(
    c: &CertifiedFramework,
    a: usize,
    b: usize,
) -> Result<CertifiedFramework> {
    let g = c.framework.graph().with_edge(a, b)?;
    let idx = g.edge_index(a, b).expect("edge just added");
    let mut values = c.stress.values().to_vec();
    values.insert(idx, 0.0);
    Ok(CertifiedFramework {
        framework: c.framework.with_graph(g)?,
        stress: StressVector::new(values),
        report: c.report.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressSign {
    Positive,
    Negative,
}

impl StressSign {
    pub fn of(omega: f64) -> Option<Self> {
        if omega > 0.0 {
            Some(StressSign::Positive)
        } else if omega < 0.0 {
            Some(StressSign::Negative)
        } else {
            None
        }
    }
}

/// Which sign the rank-one correction block should have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    /// `M` positive semidefinite: preserves a PSD certificate.
    Gur,
    /// `M` negative semidefinite: produces an indefinite stress matrix.
    Sur,
}

/// Split ratios and the collinear position of the new vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParameters {
    pub a: f64,
    pub b: f64,
    pub z_position: Vec<f64>,
}

impl SplitParameters {
    /// `b = a / (a − 1)`, so that `1/a + 1/b = 1`.
    pub fn from_a(a: f64, x: &[f64], y: &[f64]) -> Result<Self> {
        if a == 0.0 || a == 1.0 || !a.is_finite() {
            return Err(Error::invalid(
                "split ratio must be finite and differ from 0 and 1",
            ));
        }
        let b = a / (a - 1.0);
        let z_position = x.iter().zip(y).map(|(xi, yi)| xi + (yi - xi) / a).collect();
        Ok(Self { a, b, z_position })
    }
}

/// `a = 2` gives a PSD block for positive `ω_xy`, `a = −2` (so `b = 2/3`) for
/// negative `ω_xy`; SUR mode swaps the two.
pub fn split_placement(
    f: &Framework,
    x: usize,
    y: usize,
    sign: StressSign,
    mode: PlacementMode,
) -> Result<SplitParameters> {
    if x == y {
        return Err(Error::invalid("split needs two distinct vertices"));
    }
    if f.squared_distance(x, y) == 0.0 {
        return Err(Error::DegenerateInput(alloc::format!(
            "edge ({x}, {y}) has zero length"
        )));
    }
    let a =
        match (mode, sign) {
            (PlacementMode::Gur, StressSign::Positive)
            | (PlacementMode::Sur, StressSign::Negative) => 2.0,
            (PlacementMode::Gur, StressSign::Negative)
            | (PlacementMode::Sur, StressSign::Positive) => -2.0,
        };
    SplitParameters::from_a(a, f.point(x), f.point(y))
}

/// Stress on the Hennenberg graph: surviving edges copy `w`, `{x, z}` gets
/// `a·ω_xy`, `{y, z}` gets `b·ω_xy`, the extra edges get zero.
pub fn transfer_stress(
    g: &Graph,
    w: &StressVector,
    step: &HennenbergStep,
    params: &SplitParameters,
) -> Result<(Graph, StressVector)> {
    if w.len() != g.num_edges() {
        return Err(Error::invalid("stress length does not match edge count"));
    }
    let h = apply_hennenberg_graph(g, step)?;
    let (x, y) = step.remove.pair();
    let omega = w.values()[g
        .edge_index(x, y)
        .expect("checked by apply_hennenberg_graph")];
    if omega == 0.0 {
        return Err(Error::invalid("stress on the removed edge is zero"));
    }
    let z = g.num_vertices();
    let values = h
        .edges()
        .iter()
        .map(|e| match e.pair() {
            (i, j) if j == z && i == x => params.a * omega,
            (i, j) if j == z && i == y => params.b * omega,
            (_, j) if j == z => 0.0,
            (i, j) => w.values()[g.edge_index(i, j).expect("surviving edge")],
        })
        .collect();
    Ok((h, StressVector::new(values)))
}

/// The nonzero `3 × 3` block (rows `x, y, z`) of the difference between the
/// new stress matrix and the zero-padded old one.
pub fn m_block(omega_xy: f64, a: f64, b: f64) -> Result<[[f64; 3]; 3]> {
    let defect = 1.0 / a + 1.0 / b - 1.0;
    if !defect.is_finite() || defect.abs() > 1e-12 {
        return Err(Error::invalid(alloc::format!(
            "1/a + 1/b = 1 violated by {defect:e}"
        )));
    }
    let w = omega_xy;
    Ok([
        [w * (a - 1.0), w, -w * a],
        [w, w * (b - 1.0), -w * b],
        [-w * a, -w * b, w * (a + b)],
    ])
}

pub fn m_block_matrix(omega_xy: f64, a: f64, b: f64) -> Result<DMatrix<f64>> {
    let m = m_block(omega_xy, a, b)?;
    Ok(DMatrix::from_fn(3, 3, |r, c| m[r][c]))
}

/// Everything the split step measured on the way, kept for provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub mode: PlacementMode,
    pub removed: Edge,
    pub new_vertex: usize,
    pub omega_xy: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub combine_draws: usize,
    /// `max |Ω' + M − Ω_H(q)|` relative to `max(1, max |Ω_H(q)|)`.
    pub identity_residual: f64,
    pub padded_nullity: usize,
    pub collinear_report: SpectralReport,
    /// `|λ_m|` of the collinear stress matrix.
    pub lambda_min: f64,
    pub perturbation_scope: PerturbationScope,
    pub delta: f64,
    pub perturb_iterations: usize,
    /// `‖Ω_H(q') − Ω_H(q)‖₂` of the accepted perturbation.
    pub perturbation_norm: f64,
    /// Accepted reconditioning moves after the first perturbation.
    pub recondition_moves: usize,
    /// Conditioning score of the returned certificate.
    pub conditioning: f64,
    /// `e_zᵀ Ω_H(q) e_z` (SUR mode).
    pub diagonal_probe: Option<f64>,
    /// `ω_xy (a + b)` (SUR mode).
    pub diagonal_formula: Option<f64>,
    /// `vᵀ Ω_H(q) v` for some `v ∈ Ker(M) ∖ Ker(Ω')` (SUR mode).
    pub kernel_probe: Option<f64>,
}

/// Transfers a GUR certificate across a Hennenberg step.
pub fn gur_step(
    c: &CertifiedFramework,
    step: &HennenbergStep,
    seed: u64,
    tol: &Tolerances,
) -> Result<(CertifiedFramework, StepDiagnostics)> {
    split_step(c, step, seed, tol, PlacementMode::Gur)
}

/// Produces a generic framework of the Hennenberg graph whose unique stress
/// matrix is indefinite.
pub fn sur_witness_step(
    c: &CertifiedFramework,
    step: &HennenbergStep,
    seed: u64,
    tol: &Tolerances,
) -> Result<(CertifiedFramework, StepDiagnostics)> {
    split_step(c, step, seed, tol, PlacementMode::Sur)
}

const MAX_SHRINKS: usize = 40;
const INITIAL_DELTA: f64 = 1e-2;
/// Continuation walks the certified framework up to this many shortest-edge
/// lengths along the noise direction.
const RECONDITION_TRIALS: usize = 80;
/// Largest reconditioning moves of all vertices and of the new vertex alone,
/// in shortest-edge lengths.
const RECONDITION_ALL: f64 = 0.05;
const RECONDITION_FOCUS: f64 = 0.25;
const IDENTITY_TOL: f64 = 1e-12;

fn split_step(
    c: &CertifiedFramework,
    step: &HennenbergStep,
    seed: u64,
    tol: &Tolerances,
    mode: PlacementMode,
) -> Result<(CertifiedFramework, StepDiagnostics)> {
    let f = &c.framework;
    let g = f.graph();
    let d = f.dimension();
    let v = g.num_vertices();
    if step.dimension() != d {
        return Err(Error::invalid(alloc::format!(
            "step has {} extra neighbours, dimension {d} needs {}",
            step.extra.len(),
            d - 1
        )));
    }
    if v < d + 2 {
        return Err(Error::PreconditionViolation(alloc::format!(
            "framework has {v} vertices, need at least {}",
            d + 2
        )));
    }
    if !c.is_gur_certificate() {
        return Err(Error::PreconditionViolation(
            "input is not a PSD certificate of nullity d+1".into(),
        ));
    }
    // validates the step against the graph
    apply_hennenberg_graph(g, step)?;

    let mut seeds = graph::rng(seed);
    let combine_seed = seeds.next_u64();
    let perturb_seed = seeds.next_u64();
    let recondition_seed = seeds.next_u64();

    // (i) a PSD stress of nullity d+1 that is nonzero on every edge
    let basis = stress::stress_space_basis(f, tol.rank);
    if mode == PlacementMode::Sur && basis.len() != 1 {
        return Err(Error::StressSpaceNotUnique {
            dimension: basis.len(),
        });
    }
    let combined = stress::combine_for_nonzero_psd(f, &c.stress, &basis, combine_seed, tol)?;
    let omega = combined.stress.normalized();

    // (ii) collinear placement and stress transfer
    let (x, y) = step.remove.pair();
    let omega_xy = omega.values()[g.edge_index(x, y).expect("validated")];
    let sign = StressSign::of(omega_xy).ok_or(Error::NotRedundant)?;
    let params = split_placement(f, x, y, sign, mode)?;
    let (h, collinear_stress) = transfer_stress(g, &omega, step, &params)?;
    let mut coords = f.coordinates().to_vec();
    coords.extend_from_slice(&params.z_position);
    let collinear = Framework::from_flat(h.clone(), d, coords)?;
    let residual = stress::equilibrium_residual(&collinear, &collinear_stress);
    if residual > tol.residual {
        return Err(Error::CertificationFailed(alloc::format!(
            "transferred stress residual {residual:e}"
        )));
    }

    // (iii) Ω' + M = Ω_H(q) and the spectrum of Ω_H(q)
    let z = v;
    let omega_h = stress::stress_matrix_from_vector(&h, &collinear_stress)?.into_matrix();
    let mut padded = DMatrix::zeros(v + 1, v + 1);
    padded
        .view_mut((0, 0), (v, v))
        .copy_from(stress::stress_matrix_from_vector(g, &omega)?.matrix());
    let block = m_block(omega_xy, params.a, params.b)?;
    let idx = [x, y, z];
    let mut m = DMatrix::zeros(v + 1, v + 1);
    for r in 0..3 {
        for s in 0..3 {
            m[(idx[r], idx[s])] = block[r][s];
        }
    }
    let identity_residual =
        linalg::max_abs(&(&padded + &m - &omega_h)) / linalg::max_abs(&omega_h).max(1.0);
    if identity_residual > IDENTITY_TOL {
        return Err(Error::CertificationFailed(alloc::format!(
            "Ω' + M differs from Ω_H(q) by {identity_residual:e}"
        )));
    }
    let padded_report = stress::spectral_report(&padded, tol.spectral)?;
    let collinear_report = stress::spectral_report(&omega_h, tol.spectral)?;

    let mut diagonal_probe = None;
    let mut diagonal_formula = None;
    let mut kernel_probe = None;
    match mode {
        PlacementMode::Gur => {
            if !collinear_report.is_psd_with_nullity(d + 1)
                || collinear_report.nullity + 1 != padded_report.nullity
            {
                return Err(Error::CertificationFailed(alloc::format!(
                    "collinear stress matrix is {} with nullity {} (padded nullity {})",
                    collinear_report.classification.as_str(),
                    collinear_report.nullity,
                    padded_report.nullity
                )));
            }
        }
        PlacementMode::Sur => {
            let probe = omega_h[(z, z)];
            let formula = omega_xy * (params.a + params.b);
            let vq = kernel_m_probe(&padded, &omega_h, &idx, &params, tol.spectral);
            if !(probe < 0.0 && vq > 0.0)
                || collinear_report.classification != Classification::Indefinite
            {
                return Err(Error::CertificationFailed(alloc::format!(
                    "collinear stress matrix is {} (diagonal probe {probe:e}, kernel probe {vq:e})",
                    collinear_report.classification.as_str()
                )));
            }
            diagonal_probe = Some(probe);
            diagonal_formula = Some(formula);
            kernel_probe = Some(vq);
        }
    }

    // (iv) the subdivided edge and the extra edges must not share a (d−1)-flat
    let mut pts: Vec<&[f64]> = Vec::with_capacity(d + 1);
    pts.push(f.point(x));
    pts.push(f.point(y));
    pts.extend(step.extra.iter().map(|&w| f.point(w)));
    if !linalg::affinely_independent(&pts, tol.rank)
        || !rigidity::is_infinitesimally_rigid(&collinear, tol.rank).rigid
    {
        return Err(Error::AffineDegeneracy);
    }

    // (v) jiggle to a generic framework and re-project the stress
    let lambda_min = collinear_report
        .smallest_nonzero_magnitude()
        .ok_or_else(|| Error::CertificationFailed("collinear stress matrix is zero".into()))?;
    let shortest = collinear.shortest_edge_length().unwrap_or(0.0);
    let mut noise_rng = graph::rng(perturb_seed);
    let noise: Vec<f64> = (0..collinear.coordinates().len())
        .map(|_| noise_rng.random_range(-1.0..=1.0))
        .collect();
    // Fallback: the same noise on the new vertex only. Every other vertex is
    // already generic, and moving only `z` disturbs the stress matrix far less
    // per unit of displacement, which matters when |λ_m| is small.
    let mut local_noise = alloc::vec![0.0; noise.len()];
    local_noise[z * d..(z + 1) * d].copy_from_slice(&noise[z * d..(z + 1) * d]);

    let mut rejections = Rejections::default();
    for (scope, noise) in [
        (PerturbationScope::AllVertices, &noise),
        (PerturbationScope::NewVertex, &local_noise),
    ] {
        let mut delta = INITIAL_DELTA * shortest;
        for iteration in 1..=MAX_SHRINKS {
            match try_perturbation(
                &collinear,
                &collinear_stress,
                &omega_h,
                &collinear_report,
                noise,
                delta,
                lambda_min,
                mode,
                tol,
            ) {
                Ok((cert, perturbation_norm)) => {
                    let (cert, recondition_moves, conditioning) =
                        recondition(cert, z, shortest, recondition_seed, mode, tol);
                    let diagnostics = StepDiagnostics {
                        mode,
                        removed: step.remove,
                        new_vertex: z,
                        omega_xy,
                        a: params.a,
                        b: params.b,
                        epsilon: combined.epsilon,
                        combine_draws: combined.draws,
                        identity_residual,
                        padded_nullity: padded_report.nullity,
                        collinear_report,
                        lambda_min,
                        perturbation_scope: scope,
                        delta,
                        perturb_iterations: iteration,
                        perturbation_norm,
                        recondition_moves,
                        conditioning,
                        diagonal_probe,
                        diagonal_formula,
                        kernel_probe,
                    };
                    return Ok((cert, diagnostics));
                }
                Err(reason) => rejections.push(scope, iteration, reason),
            }
            delta *= 0.5;
        }
    }
    Err(Error::PerturbationFailure {
        iterations: 2 * MAX_SHRINKS,
        reason: rejections.summary(),
    })
}

/// Which vertices the δ loop moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationScope {
    AllVertices,
    NewVertex,
}

impl PerturbationScope {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationScope::AllVertices => "all-vertices",
            PerturbationScope::NewVertex => "new-vertex",
        }
    }
}

/// Rejection reasons of the δ loop, with consecutive rejections of the same
/// kind merged into one run.
#[derive(Default)]
struct Rejections {
    runs: Vec<(PerturbationScope, usize, usize, String)>,
}

impl Rejections {
    fn push(&mut self, scope: PerturbationScope, iteration: usize, reason: String) {
        let kind = |r: &str| -> String { r.chars().take_while(|c| !c.is_ascii_digit()).collect() };
        if let Some(last) = self.runs.last_mut() {
            if last.0 == scope && kind(&last.3) == kind(&reason) {
                last.2 = iteration;
                return;
            }
        }
        self.runs.push((scope, iteration, iteration, reason));
    }

    /// `"all-vertices 1-12: <first reason>; all-vertices 13-40: ..."`.
    fn summary(&self) -> String {
        let mut out = String::new();
        for (k, (scope, first, last, reason)) in self.runs.iter().enumerate() {
            if k > 0 {
                out.push_str("; ");
            }
            out.push_str(&alloc::format!(
                "{} {first}-{last}: {reason}",
                scope.as_str()
            ));
        }
        if out.is_empty() {
            out.push_str("no iteration ran");
        }
        out
    }
}

/// Improves the conditioning of a certified generic framework by a gated
/// random search.
///
/// Each trial moves every vertex by seeded uniform noise of size `step` and
/// applies the same acceptance test as the first perturbation, with the
/// current framework's stress matrix in place of the collinear one, so every
/// accepted framework is itself certified. A trial is kept only if it raises
/// [`conditioning`]. Left alone, a framework fresh out of the collinear
/// placement carries near-zero stresses on the new edges and a small
/// eigenvalue gap, and random moves can drift towards flexible
/// configurations; all of these would be inherited by every later step.
fn recondition(
    start: CertifiedFramework,
    focus: usize,
    scale: f64,
    seed: u64,
    mode: PlacementMode,
    tol: &Tolerances,
) -> (CertifiedFramework, usize, f64) {
    let mut rng = graph::rng(seed);
    let mut cert = start;
    let mut score = conditioning(&cert);
    let mut accepted = 0;
    let d = cert.framework.dimension();
    let n = cert.framework.coordinates().len();
    let cap = [RECONDITION_ALL * scale, RECONDITION_FOCUS * scale];
    let mut steps = cap;
    for trial in 0..RECONDITION_TRIALS {
        // alternate between moving every vertex and moving only the new one,
        // whose edges carry small stresses and so tolerate much larger moves
        let kind = trial % 2;
        let mut noise = alloc::vec![0.0; n];
        let moved = if kind == 0 {
            0..n
        } else {
            focus * d..(focus + 1) * d
        };
        for k in moved {
            noise[k] = rng.random_range(-1.0..=1.0);
        }
        let Some(lambda_min) = cert.report.smallest_nonzero_magnitude() else {
            break;
        };
        let base_matrix =
            match stress::stress_matrix_from_vector(cert.framework.graph(), &cert.stress) {
                Ok(m) => m.into_matrix(),
                Err(_) => break,
            };
        // try the direction and, if it only made things worse, its opposite
        let mut outcome = None;
        for sign in [1.0, -1.0] {
            let signed: Vec<f64> = noise.iter().map(|x| sign * x).collect();
            match try_perturbation(
                &cert.framework,
                &cert.stress,
                &base_matrix,
                &cert.report,
                &signed,
                steps[kind],
                lambda_min,
                mode,
                tol,
            ) {
                Ok((next, _)) => {
                    let next_score = conditioning(&next);
                    if next_score > score {
                        outcome = Some(Ok((next, next_score)));
                        break;
                    }
                    outcome = Some(Err(false));
                }
                Err(_) => {
                    outcome = Some(Err(true));
                    break;
                }
            }
        }
        match outcome {
            Some(Ok((next, next_score))) => {
                score = next_score;
                cert = next;
                accepted += 1;
                steps[kind] = (steps[kind] * 1.5).min(cap[kind]);
            }
            // rejected by the acceptance test: the move was too large
            Some(Err(true)) | None => steps[kind] *= 0.5,
            // accepted but no better either way: mostly a matter of direction
            Some(Err(false)) => steps[kind] *= 0.9,
        }
    }
    (cert, accepted, score)
}

/// `min(min |ω_e| / max |ω_e|, |λ_m| / max |λ|, σ_r / σ_1)`, with `σ_r` the
/// last singular value of the rigidity matrix that infinitesimal rigidity
/// needs: the distance of a certificate from losing an edge of its support,
/// an eigenvalue, or rigidity.
fn conditioning(c: &CertifiedFramework) -> f64 {
    let gap = match (
        c.report.smallest_nonzero_magnitude(),
        c.report.largest_magnitude(),
    ) {
        (Some(m), l) if l > 0.0 => m / l,
        _ => 0.0,
    };
    let f = &c.framework;
    let target = rigidity::generic_rank_target(f.num_vertices(), f.dimension());
    let sv = linalg::singular_values(rigidity::rigidity_matrix(f).matrix());
    let rigid = match (sv.first(), target.checked_sub(1).and_then(|k| sv.get(k))) {
        (Some(&top), Some(&last)) if top > 0.0 => last / top,
        _ => 0.0,
    };
    support_ratio(&c.stress).min(gap).min(rigid)
}

/// `min |ω_e| / max |ω_e|`: how far a stress is from vanishing on some edge.
fn support_ratio(w: &StressVector) -> f64 {
    let max = w.max_abs();
    if max == 0.0 {
        return 0.0;
    }
    w.values().iter().fold(f64::INFINITY, |m, x| m.min(x.abs())) / max
}

/// Largest `vᵀ Ω_H v` over `v` in the range of `Ω'` projected onto `Ker(M)`.
fn kernel_m_probe(
    padded: &DMatrix<f64>,
    omega_h: &DMatrix<f64>,
    idx: &[usize; 3],
    params: &SplitParameters,
    tol: f64,
) -> f64 {
    let n = padded.nrows();
    // M is a multiple of u uᵀ with u ∝ (a − 1, 1, −a) on (x, y, z)
    let mut u = DVector::zeros(n);
    u[idx[0]] = params.a - 1.0;
    u[idx[1]] = 1.0;
    u[idx[2]] = -params.a;
    let u = u.normalize();
    let eig = linalg::sym_eigen(padded);
    let thr = tol * eig.values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    eig.values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > thr)
        .map(|(k, _)| {
            let r = eig.vectors.column(k).into_owned();
            let v = &r - &u * u.dot(&r);
            v.dot(&(omega_h * &v))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn try_perturbation(
    collinear: &Framework,
    collinear_stress: &StressVector,
    omega_h: &DMatrix<f64>,
    collinear_report: &SpectralReport,
    noise: &[f64],
    delta: f64,
    lambda_min: f64,
    mode: PlacementMode,
    tol: &Tolerances,
) -> core::result::Result<(CertifiedFramework, f64), String> {
    let d = collinear.dimension();
    let coords: Vec<f64> = collinear
        .coordinates()
        .iter()
        .zip(noise)
        .map(|(p, n)| p + delta * n)
        .collect();
    let q = Framework::from_flat(collinear.graph().clone(), d, coords)
        .map_err(|e| alloc::format!("{e}"))?;
    if !rigidity::is_infinitesimally_rigid(&q, tol.rank).rigid {
        return Err("perturbed framework is not infinitesimally rigid".into());
    }
    if !graph::in_general_position(&q, tol.rank) {
        return Err("perturbed framework is not in general position".into());
    }
    let w = stress::project_stress_to_kernel(&q, collinear_stress, tol.rank)
        .map_err(|e| alloc::format!("{e}"))?;
    if mode == PlacementMode::Sur {
        let dim = stress::stress_space_basis(&q, tol.rank).len();
        if dim != 1 {
            return Err(alloc::format!("perturbed stress space has dimension {dim}"));
        }
    }
    let w = w.normalized();
    let scale = collinear_stress.norm();
    let omega_q = stress::stress_matrix_from_vector(q.graph(), &w.scaled(scale))
        .map_err(|e| alloc::format!("{e}"))?;
    let gap = linalg::spectral_norm(&(omega_q.matrix() - omega_h));
    if gap >= lambda_min {
        return Err(alloc::format!(
            "perturbation norm {gap:e} not below |λ_m| = {lambda_min:e}"
        ));
    }
    let cert = CertifiedFramework::new(q, w, tol).map_err(|e| alloc::format!("{e}"))?;
    let ok = match mode {
        PlacementMode::Gur => {
            cert.report.is_psd_with_nullity(d + 1) && cert.report.same_signature(collinear_report)
        }
        PlacementMode::Sur => {
            cert.report.classification == Classification::Indefinite
                && cert.report.dominates(collinear_report)
        }
    };
    if !ok {
        return Err(alloc::format!(
            "perturbed stress matrix is {} with nullity {}",
            cert.report.classification.as_str(),
            cert.report.nullity
        ));
    }
    Ok((cert, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_complete;
    use alloc::vec;

    fn line(graph: Graph, xs: &[f64]) -> Framework {
        Framework::from_flat(graph, 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn hennenberg_on_triangle_gives_four_cycle() {
        let k3 = make_complete(3).unwrap();
        let h = apply_hennenberg_graph(&k3, &HennenbergStep::new(0, 1, vec![]).unwrap()).unwrap();
        let pairs: Vec<_> = h.edges().iter().map(|e| e.pair()).collect();
        assert_eq!(pairs, [(0, 2), (0, 3), (1, 2), (1, 3)]);
    }

    #[test]
    fn hennenberg_on_k4_in_plane() {
        let k4 = make_complete(4).unwrap();
        let h = apply_hennenberg_graph(&k4, &HennenbergStep::new(0, 1, vec![2]).unwrap()).unwrap();
        assert_eq!((h.num_vertices(), h.num_edges()), (5, 8));
        assert!(h.has_edge(2, 4) && !h.has_edge(0, 1));
    }

    #[test]
    fn invalid_steps() {
        assert!(HennenbergStep::new(0, 1, vec![1]).is_err());
        assert!(HennenbergStep::new(0, 1, vec![2, 2]).is_err());
        assert!(HennenbergStep::new(1, 1, vec![]).is_err());
        let c4 = Graph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert!(apply_hennenberg_graph(&c4, &HennenbergStep::new(0, 2, vec![]).unwrap()).is_err());
        assert!(apply_hennenberg_graph(&c4, &HennenbergStep::new(0, 1, vec![9]).unwrap()).is_err());
        // dimension 3 needs four vertices
        let k3 = make_complete(3).unwrap();
        assert!(
            apply_hennenberg_graph(&k3, &HennenbergStep::new(0, 1, vec![2, 3]).unwrap()).is_err()
        );
    }

    #[test]
    fn placements() {
        let f = line(Graph::new(2, [(0, 1)]).unwrap(), &[0.0, 1.0]);
        let p = split_placement(&f, 0, 1, StressSign::Positive, PlacementMode::Gur).unwrap();
        assert_eq!((p.a, p.b, p.z_position.as_slice()), (2.0, 2.0, &[0.5][..]));
        let p = split_placement(&f, 0, 1, StressSign::Negative, PlacementMode::Gur).unwrap();
        assert_eq!((p.a, p.z_position.as_slice()), (-2.0, &[-0.5][..]));
        assert!((p.b - 2.0 / 3.0).abs() < 1e-15);
        let p = split_placement(&f, 0, 1, StressSign::Positive, PlacementMode::Sur).unwrap();
        assert_eq!(p.a, -2.0);
        let m = m_block_matrix(1.0, p.a, p.b).unwrap();
        assert_eq!(
            stress::spectral_report(&m, 1e-8).unwrap().classification,
            Classification::Nsd
        );

        let flat = line(Graph::new(2, [(0, 1)]).unwrap(), &[3.0, 3.0]);
        assert!(matches!(
            split_placement(&flat, 0, 1, StressSign::Positive, PlacementMode::Gur),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn m_block_values() {
        assert_eq!(
            m_block(1.0, 2.0, 2.0).unwrap(),
            [[1.0, 1.0, -2.0], [1.0, 1.0, -2.0], [-2.0, -2.0, 4.0]]
        );
        assert!(m_block(0.0, 2.0, 2.0)
            .unwrap()
            .iter()
            .flatten()
            .all(|&x| x == 0.0));
        let neg = m_block_matrix(-1.0, 2.0, 2.0).unwrap();
        let r = stress::spectral_report(&neg, 1e-8).unwrap();
        assert_eq!((r.classification, r.n_neg), (Classification::Nsd, 1));
        assert!(m_block(1.0, 3.0, 3.0).is_err());
    }

    #[test]
    fn transfer_on_triangle() {
        let k3 = make_complete(3).unwrap();
        let f = line(k3.clone(), &[0.0, 1.0, 2.0]);
        // ω_01 = 2 as in the hand example
        let w = StressVector::new(vec![2.0, -1.0, 2.0]);
        let step = HennenbergStep::new(0, 1, vec![]).unwrap();
        let params = split_placement(&f, 0, 1, StressSign::Positive, PlacementMode::Gur).unwrap();
        let (h, wq) = transfer_stress(&k3, &w, &step, &params).unwrap();
        assert_eq!(wq.values()[h.edge_index(0, 3).unwrap()], 4.0);
        assert_eq!(wq.values()[h.edge_index(1, 3).unwrap()], 4.0);
        let mut coords = f.coordinates().to_vec();
        coords.extend(params.z_position);
        let q = Framework::from_flat(h, 1, coords).unwrap();
        assert!(stress::equilibrium_residual(&q, &wq) <= 1e-12);

        let zero = StressVector::new(vec![0.0, -1.0, 2.0]);
        assert!(transfer_stress(
            &k3,
            &zero,
            &step,
            &split_placement(&f, 0, 1, StressSign::Positive, PlacementMode::Gur).unwrap()
        )
        .is_err());
    }

    #[test]
    fn edge_addition_keeps_matrix() {
        // K3 stress on vertices 0, 1, 2 with vertex 3 hanging on two zero-stress edges
        let g = Graph::new(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let f = line(g, &[0.0, 1.0, 2.0, 5.0]);
        let w = StressVector::new(vec![2.0, -1.0, 0.0, 2.0, 0.0]);
        let tol = Tolerances::default();
        let c = CertifiedFramework::new(f, w, &tol).unwrap();
        let added = apply_edge_addition(&c, 3, 2).unwrap();
        assert_eq!(added.stress.values(), [2.0, -1.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(added.report, c.report);
        let rerun =
            stress::stress_report(added.framework.graph(), &added.stress, tol.spectral).unwrap();
        assert_eq!(rerun, c.report);
        assert!(apply_edge_addition(&c, 0, 1).is_err());
    }
}
