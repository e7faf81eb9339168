//! Sequence-driven construction from `K_{d+2}` and the end-to-end pipelines.

use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::graph::{self, make_complete, Edge, Framework, Graph};
use crate::hennenberg::{self, CertifiedFramework, HennenbergStep, StepDiagnostics};
use crate::rigidity;
use crate::stress::{self, Classification, SpectralReport, StressVector};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    Hennenberg(HennenbergStep),
    AddEdge(Edge),
}

/// A build recipe: apply `steps` in order, starting from `K_{d+2}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpSequence {
    pub dimension: usize,
    pub steps: Vec<Step>,
}

impl OpSequence {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            steps: Vec::new(),
        }
    }

    pub fn hennenberg_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Hennenberg(_)))
            .count()
    }

    pub fn is_pure_hennenberg(&self) -> bool {
        self.hennenberg_count() == self.steps.len()
    }

    /// Vertex count after all steps.
    pub fn num_vertices(&self) -> usize {
        self.dimension + 2 + self.hennenberg_count()
    }

    /// Appends a path addition: the edge `{u, w}` followed by `interior`
    /// Hennenberg subdivisions of it (1-dimensional sequences only).
    pub fn push_path(&mut self, u: usize, w: usize, interior: usize) -> Result<()> {
        if self.dimension != 1 {
            return Err(Error::invalid("path additions are defined for dimension 1"));
        }
        self.steps.push(Step::AddEdge(Edge::new(u, w)?));
        let mut end = w;
        for _ in 0..interior {
            let z = self.num_vertices();
            self.steps
                .push(Step::Hennenberg(HennenbergStep::new(u, end, Vec::new())?));
            end = z;
        }
        Ok(())
    }
}

/// Replays `seq` combinatorially.
pub fn build_graph(seq: &OpSequence) -> Result<Graph> {
    if seq.dimension == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut g = make_complete(seq.dimension + 2)?;
    for (index, step) in seq.steps.iter().enumerate() {
        g = apply_step_graph(&g, step, seq.dimension).map_err(|e| Error::InvalidSequence {
            index,
            source: alloc::boxed::Box::new(e),
        })?;
    }
    Ok(g)
}

fn apply_step_graph(g: &Graph, step: &Step, d: usize) -> Result<Graph> {
    match step {
        Step::AddEdge(e) => g.with_edge(e.i(), e.j()),
        Step::Hennenberg(h) => {
            if h.dimension() != d {
                return Err(Error::invalid(alloc::format!(
                    "step has {} extra neighbours, dimension {d} needs {}",
                    h.extra().len(),
                    d - 1
                )));
            }
            hennenberg::apply_hennenberg_graph(g, h)
        }
    }
}

/// The 1-dimensional sequence turning `K_3` into the cycle `C_n` by `n − 3`
/// subdivisions.
pub fn cycle_sequence(n: usize) -> Result<OpSequence> {
    if n < 3 {
        return Err(Error::invalid("cycles need at least three vertices"));
    }
    let mut seq = OpSequence::new(1);
    let mut other = 1;
    for z in 3..n {
        seq.steps
            .push(Step::Hennenberg(HennenbergStep::new(0, other, Vec::new())?));
        other = z;
    }
    Ok(seq)
}

/// A seeded random valid sequence with `hennenberg` Hennenberg steps and up to
/// `additions` edge additions.
///
/// Removed edges and extra neighbours are drawn uniformly. Edge additions are
/// interleaved at random positions; an addition whose turn comes while the
/// graph is complete is dropped, so fewer than `additions` may appear.
pub fn random_sequence(
    dimension: usize,
    hennenberg: usize,
    additions: usize,
    seed: u64,
) -> Result<OpSequence> {
    use rand::seq::{IndexedRandom, SliceRandom};
    use rand::Rng;

    if dimension == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut rng = graph::rng(seed);
    let mut kinds: Vec<bool> = core::iter::repeat_n(true, hennenberg)
        .chain(core::iter::repeat_n(false, additions))
        .collect();
    kinds.shuffle(&mut rng);

    let mut seq = OpSequence::new(dimension);
    let mut g = make_complete(dimension + 2)?;
    for is_split in kinds {
        let n = g.num_vertices();
        let step = if is_split {
            let e = *g
                .edges()
                .choose(&mut rng)
                .expect("graphs in a sequence have edges");
            let mut pool: Vec<usize> = (0..n).filter(|&u| !e.contains(u)).collect();
            let mut extra = pool.partial_shuffle(&mut rng, dimension - 1).0.to_vec();
            extra.sort_unstable();
            Step::Hennenberg(HennenbergStep::new(e.i(), e.j(), extra)?)
        } else {
            let missing: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| !g.has_edge(i, j))
                .collect();
            if missing.is_empty() {
                continue;
            }
            let (i, j) = missing[rng.random_range(0..missing.len())];
            Step::AddEdge(Edge::new(i, j)?)
        };
        g = apply_step_graph(&g, &step, dimension)?;
        seq.steps.push(step);
    }
    Ok(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Gur,
    SurWitness,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::Gur => "gur",
            CertificateKind::SurWitness => "sur-witness",
        }
    }
}

/// What happened at one step of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub index: usize,
    pub step: Step,
    pub seed: u64,
    /// `None` for edge additions.
    pub diagnostics: Option<StepDiagnostics>,
}

/// The GUR framework of the same graph that accompanies a SUR witness.
#[derive(Debug, Clone, PartialEq)]
pub struct GurCompanion {
    pub framework: Framework,
    pub stress: StressVector,
    pub report: SpectralReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub sequence: OpSequence,
    pub base_seed: u64,
    pub steps: Vec<StepRecord>,
    pub stress_space_dimension: usize,
    pub gur_companion: Option<GurCompanion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub framework: Framework,
    pub stress: StressVector,
    pub report: SpectralReport,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub provenance: Provenance,
}

impl Certificate {
    pub fn graph(&self) -> &Graph {
        self.framework.graph()
    }

    pub fn dimension(&self) -> usize {
        self.framework.dimension()
    }
}

/// Per-step seeds drawn from one stream seeded by the user seed.
struct SeedPlan {
    base: u64,
    steps: Vec<u64>,
}

impl SeedPlan {
    fn new(seed: u64, steps: usize) -> Self {
        let mut rng = graph::rng(seed);
        let base = rng.next_u64();
        let steps = (0..steps).map(|_| rng.next_u64()).collect();
        Self { base, steps }
    }
}

/// A generic `K_{d+2}` with its unique stress, signed so that `Ω` is PSD.
fn base_certificate(d: usize, seed: u64, tol: &Tolerances) -> Result<CertifiedFramework> {
    let k = make_complete(d + 2)?;
    let f = graph::sample_generic_framework_with(&k, d, seed, tol)?;
    let basis = stress::stress_space_basis(&f, tol.rank);
    if basis.len() != 1 {
        return Err(Error::StressSpaceNotUnique {
            dimension: basis.len(),
        });
    }
    let mut w = basis[0].clone();
    let report = stress::stress_report(&k, &w, tol.spectral)?;
    let dominant = report
        .eigenvalues
        .iter()
        .copied()
        .reduce(|a, b| if b.abs() > a.abs() { b } else { a })
        .unwrap_or(0.0);
    if dominant < 0.0 {
        w = w.scaled(-1.0);
    }
    let c = CertifiedFramework::new(f, w, tol)?;
    if !c.is_gur_certificate() {
        return Err(Error::CertificationFailed(alloc::format!(
            "base stress matrix is {} with nullity {}",
            c.report.classification.as_str(),
            c.report.nullity
        )));
    }
    Ok(c)
}

fn run_gur(
    seq: &OpSequence,
    steps: &[Step],
    plan: &SeedPlan,
    tol: &Tolerances,
) -> Result<(CertifiedFramework, Vec<StepRecord>)> {
    let d = seq.dimension;
    let mut current = base_certificate(d, plan.base, tol)?;
    let mut records = Vec::with_capacity(steps.len());
    for (index, step) in steps.iter().enumerate() {
        let seed = plan.steps[index];
        let diagnostics = match step {
            Step::AddEdge(e) => {
                current = hennenberg::apply_edge_addition(&current, e.i(), e.j())
                    .map_err(|e| e.at_step(index))?;
                None
            }
            Step::Hennenberg(h) => {
                if h.dimension() != d {
                    return Err(
                        Error::invalid("step dimension does not match sequence").at_step(index)
                    );
                }
                let (next, diag) =
                    hennenberg::gur_step(&current, h, seed, tol).map_err(|e| e.at_step(index))?;
                current = next;
                Some(diag)
            }
        };
        records.push(StepRecord {
            index,
            step: step.clone(),
            seed,
            diagnostics,
        });
    }
    Ok((current, records))
}

/// Certifies that the graph built by `seq` has a generic universally rigid
/// framework, returning that framework with its PSD stress of nullity `d+1`.
pub fn certify_gur(seq: &OpSequence, seed: u64, tol: &Tolerances) -> Result<Certificate> {
    build_graph(seq)?;
    let plan = SeedPlan::new(seed, seq.steps.len());
    let (cert, records) = run_gur(seq, &seq.steps, &plan, tol)?;
    let stress_space_dimension = stress::stress_space_basis(&cert.framework, tol.rank).len();
    Ok(Certificate {
        kind: CertificateKind::Gur,
        framework: cert.framework,
        stress: cert.stress,
        report: cert.report,
        seed,
        tolerances: *tol,
        provenance: Provenance {
            sequence: seq.clone(),
            base_seed: plan.base,
            steps: records,
            stress_space_dimension,
            gur_companion: None,
        },
    })
}

/// Builds a generic framework of the graph of `seq` whose unique stress
/// matrix is indefinite, and records the GUR framework of the same graph.
pub fn witness_sur(seq: &OpSequence, seed: u64, tol: &Tolerances) -> Result<Certificate> {
    if seq.steps.is_empty() {
        return Err(Error::invalid(
            "complete graphs are universally rigid; the sequence needs a Hennenberg step",
        ));
    }
    if !seq.is_pure_hennenberg() {
        let extra = seq.steps.len() - seq.hennenberg_count();
        return Err(Error::StressSpaceNotUnique {
            dimension: 1 + extra,
        });
    }
    build_graph(seq)?;
    let plan = SeedPlan::new(seed, seq.steps.len());
    let last = seq.steps.len() - 1;
    let (prefix, mut records) = run_gur(seq, &seq.steps[..last], &plan, tol)?;
    let Step::Hennenberg(step) = &seq.steps[last] else {
        unreachable!("pure Hennenberg sequence")
    };
    let seed_last = plan.steps[last];
    let (companion, _) =
        hennenberg::gur_step(&prefix, step, seed_last, tol).map_err(|e| e.at_step(last))?;
    let (witness, diag) =
        hennenberg::sur_witness_step(&prefix, step, seed_last, tol).map_err(|e| e.at_step(last))?;
    records.push(StepRecord {
        index: last,
        step: seq.steps[last].clone(),
        seed: seed_last,
        diagnostics: Some(diag),
    });
    let stress_space_dimension = stress::stress_space_basis(&witness.framework, tol.rank).len();
    Ok(Certificate {
        kind: CertificateKind::SurWitness,
        framework: witness.framework,
        stress: witness.stress,
        report: witness.report,
        seed,
        tolerances: *tol,
        provenance: Provenance {
            sequence: seq.clone(),
            base_seed: plan.base,
            steps: records,
            stress_space_dimension,
            gur_companion: Some(GurCompanion {
                framework: companion.framework,
                stress: companion.stress,
                report: companion.report,
            }),
        },
    })
}

/// Hendrickson's necessary conditions for global rigidity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HendricksonReport {
    pub redundant: bool,
    pub connectivity: usize,
    pub pass: bool,
}

pub fn verify_hendrickson(f: &Framework, tol: f64) -> HendricksonReport {
    let redundant = rigidity::is_redundantly_rigid(f, tol).is_ok_and(|r| r.redundant);
    let connectivity = rigidity::vertex_connectivity(f.graph());
    HendricksonReport {
        redundant,
        connectivity,
        pass: redundant && connectivity > f.dimension(),
    }
}

/// Stress-space dimension of a generic framework at every prefix of `seq`.
///
/// Each edge addition raises the dimension by one and each Hennenberg step
/// keeps it. A prefix made only of Hennenberg steps must therefore have
/// dimension exactly 1; anything else is reported as an error.
pub fn stress_dimension_audit(seq: &OpSequence, seed: u64, tol: &Tolerances) -> Result<Vec<usize>> {
    let d = seq.dimension;
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let plan = SeedPlan::new(seed, seq.steps.len());
    let mut g = make_complete(d + 2)?;
    let mut dims = Vec::with_capacity(seq.steps.len() + 1);
    let mut pure = true;
    for index in 0..=seq.steps.len() {
        if index > 0 {
            let step = &seq.steps[index - 1];
            pure &= matches!(step, Step::Hennenberg(_));
            g = apply_step_graph(&g, step, d).map_err(|e| Error::InvalidSequence {
                index: index - 1,
                source: alloc::boxed::Box::new(e),
            })?;
        }
        let sample_seed = if index == 0 {
            plan.base
        } else {
            plan.steps[index - 1]
        };
        let f = graph::sample_generic_framework_with(&g, d, sample_seed, tol)?;
        let dim = stress::stress_space_basis(&f, tol.rank).len();
        if pure && dim != 1 {
            return Err(Error::StressDimension {
                index,
                dimension: dim,
            });
        }
        dims.push(dim);
    }
    Ok(dims)
}

/// One named check of [`verify_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            name,
            passed,
            detail,
        });
    }
}

/// What a certificate asserts, independent of how it was produced.
#[derive(Debug, Clone, Copy)]
pub struct Claim<'a> {
    pub kind: CertificateKind,
    pub framework: &'a Framework,
    pub stress: &'a StressVector,
    pub report: &'a SpectralReport,
    pub tolerances: &'a Tolerances,
    pub companion: Option<&'a GurCompanion>,
}

impl<'a> From<&'a Certificate> for Claim<'a> {
    fn from(c: &'a Certificate) -> Self {
        Claim {
            kind: c.kind,
            framework: &c.framework,
            stress: &c.stress,
            report: &c.report,
            tolerances: &c.tolerances,
            companion: c.provenance.gur_companion.as_ref(),
        }
    }
}

/// Re-checks a certificate's claims from its own data: graph consistency,
/// equilibrium, and the spectrum of the stress matrix. Nothing randomized is
/// re-run.
pub fn verify_certificate(cert: &Certificate) -> VerificationReport {
    verify_claim(&Claim::from(cert))
}

pub fn verify_claim(claim: &Claim<'_>) -> VerificationReport {
    let tol = claim.tolerances;
    let mut out = VerificationReport { checks: Vec::new() };
    let f = claim.framework;
    let d = f.dimension();

    if !consistent(&mut out, "graph-consistency", f, claim.stress) {
        return out;
    }
    check_stress(&mut out, "", f, claim.stress, claim.report, tol);

    match claim.kind {
        CertificateKind::Gur => {
            let ok = claim.report.is_psd_with_nullity(d + 1) && f.num_vertices() >= d + 2;
            out.push(
                "gur-claim",
                ok,
                alloc::format!(
                    "claimed {} with nullity {} on {} vertices, need psd with nullity {}",
                    claim.report.classification.as_str(),
                    claim.report.nullity,
                    f.num_vertices(),
                    d + 1
                ),
            );
        }
        CertificateKind::SurWitness => {
            let ok = claim.report.classification == Classification::Indefinite;
            out.push(
                "sur-claim",
                ok,
                alloc::format!("claimed {}", claim.report.classification.as_str()),
            );
            let dim = stress::stress_space_basis(f, tol.rank).len();
            out.push(
                "stress-uniqueness",
                dim == 1,
                alloc::format!("stress space dimension {dim}"),
            );
            match claim.companion {
                Some(c) => {
                    let same = c.framework.graph() == f.graph() && c.framework.dimension() == d;
                    out.push(
                        "companion-graph",
                        same,
                        String::from("companion framework has the witness graph"),
                    );
                    if same
                        && consistent(&mut out, "companion-consistency", &c.framework, &c.stress)
                    {
                        check_stress(
                            &mut out,
                            "companion-",
                            &c.framework,
                            &c.stress,
                            &c.report,
                            tol,
                        );
                        out.push(
                            "companion-gur-claim",
                            c.report.is_psd_with_nullity(d + 1),
                            alloc::format!(
                                "companion claimed {} with nullity {}",
                                c.report.classification.as_str(),
                                c.report.nullity
                            ),
                        );
                    }
                }
                None => out.push(
                    "companion-graph",
                    false,
                    String::from("missing GUR companion"),
                ),
            }
        }
    }
    out
}

fn consistent(
    out: &mut VerificationReport,
    name: &'static str,
    f: &Framework,
    w: &StressVector,
) -> bool {
    let ok = w.len() == f.graph().num_edges();
    out.push(
        name,
        ok,
        alloc::format!(
            "{} stress entries for {} edges",
            w.len(),
            f.graph().num_edges()
        ),
    );
    ok
}

fn check_stress(
    out: &mut VerificationReport,
    prefix: &'static str,
    f: &Framework,
    w: &StressVector,
    claimed: &SpectralReport,
    tol: &Tolerances,
) {
    let (res_name, spec_name) = if prefix.is_empty() {
        ("equilibrium", "spectrum")
    } else {
        ("companion-equilibrium", "companion-spectrum")
    };
    let residual = stress::equilibrium_residual(f, w);
    out.push(
        res_name,
        residual <= tol.residual,
        alloc::format!("residual {residual:e} (bound {:e})", tol.residual),
    );
    match stress::stress_report(f.graph(), w, claimed.tol_used) {
        Ok(actual) => {
            let scale = actual.largest_magnitude().max(f64::MIN_POSITIVE);
            let drift = actual
                .eigenvalues
                .iter()
                .zip(&claimed.eigenvalues)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / scale;
            let ok = actual.classification == claimed.classification
                && actual.nullity == claimed.nullity
                && actual.eigenvalues.len() == claimed.eigenvalues.len()
                && drift <= claimed.tol_used;
            out.push(
                spec_name,
                ok,
                alloc::format!(
                    "recomputed {} nullity {} (claimed {} nullity {}), eigenvalue drift {drift:e}",
                    actual.classification.as_str(),
                    actual.nullity,
                    claimed.classification.as_str(),
                    claimed.nullity
                ),
            );
        }
        Err(e) => out.push(spec_name, false, alloc::format!("{e}")),
    }
}
