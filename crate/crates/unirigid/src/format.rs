//! JSON documents: graphs, frameworks, operation sequences and certificates.
//!
//! Every document carries `"version": 1` at the top level. Reals are written
//! with the shortest decimal representation that round-trips exactly, and
//! edges are written 0-indexed as `[i, j]` with `i < j` in lexicographic order.

use serde::{Deserialize, Serialize};
use unirigid_core::{
    Certificate, CertificateKind, Classification, Edge, Framework, Graph, GurCompanion,
    HennenbergStep, OpSequence, PerturbationScope, PlacementMode, SpectralReport, Step,
    StepDiagnostics, StepRecord, StressVector, Tolerances,
};

pub const VERSION: u32 = 1;

/// A document that parsed but does not describe a valid object.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SchemaError {}

fn schema<T>(msg: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError(msg.into()))
}

fn check_version(version: u32, what: &str) -> Result<(), SchemaError> {
    if version != VERSION {
        return schema(format!(
            "{what}: unsupported version {version}, expected {VERSION}"
        ));
    }
    Ok(())
}

fn edge_pairs(g: &Graph) -> Vec<[usize; 2]> {
    g.edges().iter().map(|e| [e.i(), e.j()]).collect()
}

fn graph_from_pairs(n: usize, edges: &[[usize; 2]], what: &str) -> Result<Graph, SchemaError> {
    Graph::new(n, edges.iter().map(|&[i, j]| (i, j)))
        .map_err(|e| SchemaError(format!("{what}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub version: u32,
    pub num_vertices: usize,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Graph> for GraphDoc {
    fn from(g: &Graph) -> Self {
        Self {
            version: VERSION,
            num_vertices: g.num_vertices(),
            edges: edge_pairs(g),
        }
    }
}

impl GraphDoc {
    pub fn to_graph(&self) -> Result<Graph, SchemaError> {
        check_version(self.version, "graph")?;
        graph_from_pairs(self.num_vertices, &self.edges, "graph")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameworkDoc {
    pub version: u32,
    pub num_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub dimension: usize,
    pub coordinates: Vec<Vec<f64>>,
}

impl From<&Framework> for FrameworkDoc {
    fn from(f: &Framework) -> Self {
        Self {
            version: VERSION,
            num_vertices: f.num_vertices(),
            edges: edge_pairs(f.graph()),
            dimension: f.dimension(),
            coordinates: f.points(),
        }
    }
}

impl FrameworkDoc {
    pub fn to_framework(&self) -> Result<Framework, SchemaError> {
        check_version(self.version, "framework")?;
        let g = graph_from_pairs(self.num_vertices, &self.edges, "framework")?;
        Framework::new(g, self.dimension, &self.coordinates)
            .map_err(|e| SchemaError(format!("framework: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepDoc {
    Hennenberg {
        remove: [usize; 2],
        extra: Vec<usize>,
    },
    AddEdge {
        edge: [usize; 2],
    },
}

impl From<&Step> for StepDoc {
    fn from(s: &Step) -> Self {
        match s {
            Step::Hennenberg(h) => StepDoc::Hennenberg {
                remove: [h.remove().i(), h.remove().j()],
                extra: h.extra().to_vec(),
            },
            Step::AddEdge(e) => StepDoc::AddEdge {
                edge: [e.i(), e.j()],
            },
        }
    }
}

impl StepDoc {
    pub fn to_step(&self, index: usize) -> Result<Step, SchemaError> {
        let step = match self {
            StepDoc::Hennenberg {
                remove: [x, y],
                extra,
            } => HennenbergStep::new(*x, *y, extra.clone()).map(Step::Hennenberg),
            StepDoc::AddEdge { edge: [i, j] } => Edge::new(*i, *j).map(Step::AddEdge),
        };
        step.map_err(|e| SchemaError(format!("steps[{index}]: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDoc {
    pub version: u32,
    pub dimension: usize,
    pub steps: Vec<StepDoc>,
}

impl From<&OpSequence> for SequenceDoc {
    fn from(s: &OpSequence) -> Self {
        Self {
            version: VERSION,
            dimension: s.dimension,
            steps: s.steps.iter().map(StepDoc::from).collect(),
        }
    }
}

impl SequenceDoc {
    pub fn to_sequence(&self) -> Result<OpSequence, SchemaError> {
        check_version(self.version, "sequence")?;
        if self.dimension == 0 {
            return schema("sequence: dimension must be positive");
        }
        let steps = self
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| s.to_step(k))
            .collect::<Result<_, _>>()?;
        Ok(OpSequence {
            dimension: self.dimension,
            steps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesDoc {
    pub rank: f64,
    pub spectral: f64,
    pub residual: f64,
    pub retries: usize,
}

impl From<&Tolerances> for TolerancesDoc {
    fn from(t: &Tolerances) -> Self {
        Self {
            rank: t.rank,
            spectral: t.spectral,
            residual: t.residual,
            retries: t.retries,
        }
    }
}

impl TolerancesDoc {
    pub fn to_tolerances(&self) -> Result<Tolerances, SchemaError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !(positive(self.rank) && positive(self.spectral) && positive(self.residual))
            || self.retries == 0
        {
            return schema("tolerances must be positive and retries at least 1");
        }
        Ok(Tolerances {
            rank: self.rank,
            spectral: self.spectral,
            residual: self.residual,
            retries: self.retries,
        })
    }
}

fn parse_classification(s: &str, what: &str) -> Result<Classification, SchemaError> {
    Classification::parse(s)
        .ok_or_else(|| SchemaError(format!("{what}: unknown classification {s:?}")))
}

/// A spectrum as written in certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDoc {
    pub eigenvalues: Vec<f64>,
    pub nullity: usize,
    pub classification: String,
}

impl From<&SpectralReport> for SpectrumDoc {
    fn from(r: &SpectralReport) -> Self {
        Self {
            eigenvalues: r.eigenvalues.clone(),
            nullity: r.nullity,
            classification: r.classification.as_str().into(),
        }
    }
}

/// The claimed report: eigenvalues, nullity and classification exactly as
/// written, so that verification compares them against a recomputation.
fn claimed_report(
    eigenvalues: &[f64],
    nullity: usize,
    classification: &str,
    tol: f64,
    what: &str,
) -> Result<SpectralReport, SchemaError> {
    let mut report = SpectralReport::from_eigenvalues(eigenvalues.to_vec(), tol);
    report.nullity = nullity;
    report.classification = parse_classification(classification, what)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDoc {
    pub mode: String,
    pub new_vertex: usize,
    pub omega_xy: f64,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub combine_draws: usize,
    pub identity_residual: f64,
    pub padded_nullity: usize,
    pub collinear: SpectrumDoc,
    pub lambda_min: f64,
    pub perturbation_scope: String,
    pub delta: f64,
    pub perturb_iterations: usize,
    pub perturbation_norm: f64,
    pub recondition_moves: usize,
    pub conditioning: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_probe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_formula: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_probe: Option<f64>,
}

impl From<&StepDiagnostics> for SplitDoc {
    fn from(d: &StepDiagnostics) -> Self {
        Self {
            mode: match d.mode {
                PlacementMode::Gur => "gur",
                PlacementMode::Sur => "sur",
            }
            .into(),
            new_vertex: d.new_vertex,
            omega_xy: d.omega_xy,
            a: d.a,
            b: d.b,
            epsilon: d.epsilon,
            combine_draws: d.combine_draws,
            identity_residual: d.identity_residual,
            padded_nullity: d.padded_nullity,
            collinear: SpectrumDoc::from(&d.collinear_report),
            lambda_min: d.lambda_min,
            perturbation_scope: match d.perturbation_scope {
                PerturbationScope::AllVertices => "all-vertices",
                PerturbationScope::NewVertex => "new-vertex",
            }
            .into(),
            delta: d.delta,
            perturb_iterations: d.perturb_iterations,
            perturbation_norm: d.perturbation_norm,
            recondition_moves: d.recondition_moves,
            conditioning: d.conditioning,
            diagonal_probe: d.diagonal_probe,
            diagonal_formula: d.diagonal_formula,
            kernel_probe: d.kernel_probe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecordDoc {
    pub index: usize,
    pub step: StepDoc,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDoc>,
}

impl From<&StepRecord> for StepRecordDoc {
    fn from(r: &StepRecord) -> Self {
        Self {
            index: r.index,
            step: StepDoc::from(&r.step),
            seed: r.seed,
            split: r.diagnostics.as_ref().map(SplitDoc::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionDoc {
    pub framework: FrameworkDoc,
    pub stress: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub nullity: usize,
    pub classification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceDoc {
    pub sequence: SequenceDoc,
    pub base_seed: u64,
    pub tolerances: TolerancesDoc,
    pub stress_space_dimension: usize,
    pub steps: Vec<StepRecordDoc>,
    #[serde(default)]
    pub gur_companion: Option<CompanionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub version: u32,
    pub kind: String,
    pub graph: GraphDoc,
    pub framework: FrameworkDoc,
    pub stress: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub nullity: usize,
    pub classification: String,
    pub tolerance: f64,
    pub seed: u64,
    pub provenance: ProvenanceDoc,
}

impl From<&Certificate> for CertificateDoc {
    fn from(c: &Certificate) -> Self {
        let p = &c.provenance;
        Self {
            version: VERSION,
            kind: c.kind.as_str().into(),
            graph: GraphDoc::from(c.graph()),
            framework: FrameworkDoc::from(&c.framework),
            stress: c.stress.values().to_vec(),
            eigenvalues: c.report.eigenvalues.clone(),
            nullity: c.report.nullity,
            classification: c.report.classification.as_str().into(),
            tolerance: c.report.tol_used,
            seed: c.seed,
            provenance: ProvenanceDoc {
                sequence: SequenceDoc::from(&p.sequence),
                base_seed: p.base_seed,
                tolerances: TolerancesDoc::from(&c.tolerances),
                stress_space_dimension: p.stress_space_dimension,
                steps: p.steps.iter().map(StepRecordDoc::from).collect(),
                gur_companion: p.gur_companion.as_ref().map(|g| CompanionDoc {
                    framework: FrameworkDoc::from(&g.framework),
                    stress: g.stress.values().to_vec(),
                    eigenvalues: g.report.eigenvalues.clone(),
                    nullity: g.report.nullity,
                    classification: g.report.classification.as_str().into(),
                }),
            },
        }
    }
}

/// The parts of a certificate document that verification re-checks.
#[derive(Debug, Clone)]
pub struct ClaimParts {
    pub kind: CertificateKind,
    pub framework: Framework,
    pub stress: StressVector,
    pub report: SpectralReport,
    pub tolerances: Tolerances,
    pub companion: Option<GurCompanion>,
    /// The top-level `graph` agrees with the framework's graph.
    pub graph_matches: bool,
}

impl ClaimParts {
    pub fn claim(&self) -> unirigid_core::Claim<'_> {
        unirigid_core::Claim {
            kind: self.kind,
            framework: &self.framework,
            stress: &self.stress,
            report: &self.report,
            tolerances: &self.tolerances,
            companion: self.companion.as_ref(),
        }
    }
}

impl CertificateDoc {
    pub fn to_claim(&self) -> Result<ClaimParts, SchemaError> {
        check_version(self.version, "certificate")?;
        let kind = match self.kind.as_str() {
            "gur" => CertificateKind::Gur,
            "sur-witness" => CertificateKind::SurWitness,
            other => return schema(format!("certificate: unknown kind {other:?}")),
        };
        let graph = self.graph.to_graph()?;
        let framework = self.framework.to_framework()?;
        let tolerances = self.provenance.tolerances.to_tolerances()?;
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return schema("certificate: tolerance must be positive");
        }
        let report = claimed_report(
            &self.eigenvalues,
            self.nullity,
            &self.classification,
            self.tolerance,
            "certificate",
        )?;
        let companion = match &self.provenance.gur_companion {
            Some(c) => Some(GurCompanion {
                framework: c.framework.to_framework()?,
                stress: StressVector::new(c.stress.clone()),
                report: claimed_report(
                    &c.eigenvalues,
                    c.nullity,
                    &c.classification,
                    self.tolerance,
                    "gur_companion",
                )?,
            }),
            None => None,
        };
        Ok(ClaimParts {
            kind,
            graph_matches: &graph == framework.graph(),
            framework,
            stress: StressVector::new(self.stress.clone()),
            report,
            tolerances,
            companion,
        })
    }
}

/// `serde_json` pretty printing with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}
