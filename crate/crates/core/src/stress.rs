//! Equilibrium stresses, stress matrices and their spectra.
//!
//! A stress assigns a scalar `ω_ij` to every edge; it is in equilibrium when
//! `Σ_j ω_ij (p_i − p_j) = 0` at every vertex, i.e. when it lies in the kernel
//! of the transposed rigidity matrix. The stress matrix `Ω` has `−ω_ij` off
//! the diagonal and zero row sums, so it always annihilates the all-ones
//! vector and (for equilibrium stresses) every coordinate projection.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{self, Framework, Graph};
use crate::linalg;
use crate::rigidity;
use crate::tolerance::Tolerances;

/// Per-edge stress values in canonical edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct StressVector(Vec<f64>);

impl StressVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(alloc::vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|x| x * factor).collect())
    }

    /// Rescaled to unit Euclidean norm; zero stays zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(1.0 / n)
        }
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

/// A symmetric `v × v` stress matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StressMatrix(DMatrix<f64>);

impl StressMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Psd,
    Nsd,
    Indefinite,
    Zero,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Psd => "psd",
            Classification::Nsd => "nsd",
            Classification::Indefinite => "indefinite",
            Classification::Zero => "zero",
        }
    }

    /// Inverse of [`Classification::as_str`].
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "psd" => Some(Classification::Psd),
            "nsd" => Some(Classification::Nsd),
            "indefinite" => Some(Classification::Indefinite),
            "zero" => Some(Classification::Zero),
            _ => None,
        }
    }
}

/// Eigenvalues of a symmetric matrix with a zero threshold applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub nullity: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub classification: Classification,
    pub tol_used: f64,
}

impl SpectralReport {
    /// Classifies `eigenvalues` (ascending) with the zero threshold
    /// `tol · max |λ|`.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, tol: f64) -> Self {
        report_from_eigenvalues(eigenvalues, tol)
    }

    pub fn largest_magnitude(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    fn threshold(&self) -> f64 {
        self.tol_used * self.largest_magnitude()
    }

    /// `|λ_m|`: the smallest magnitude among eigenvalues above the threshold.
    pub fn smallest_nonzero_magnitude(&self) -> Option<f64> {
        let thr = self.threshold();
        self.eigenvalues
            .iter()
            .map(|x| x.abs())
            .filter(|&x| x > thr)
            .reduce(f64::min)
    }

    pub fn is_psd_with_nullity(&self, nullity: usize) -> bool {
        self.classification == Classification::Psd && self.nullity == nullity
    }

    /// At least as many positive and as many negative eigenvalues as `other`.
    pub fn dominates(&self, other: &SpectralReport) -> bool {
        self.n_pos >= other.n_pos && self.n_neg >= other.n_neg
    }

    pub fn same_signature(&self, other: &SpectralReport) -> bool {
        self.n_pos == other.n_pos && self.n_neg == other.n_neg
    }
}

/// Orthonormal basis of the equilibrium stresses of `f`.
pub fn stress_space_basis(f: &Framework, tol: f64) -> Vec<StressVector> {
    let dft = rigidity::rigidity_matrix(f).into_matrix().transpose();
    linalg::right_null_space(&dft, tol)
        .into_iter()
        .map(|v| StressVector(v.iter().copied().collect()))
        .collect()
}

pub fn stress_matrix_from_vector(g: &Graph, w: &StressVector) -> Result<StressMatrix> {
    if w.len() != g.num_edges() {
        return Err(Error::invalid(alloc::format!(
            "stress has {} entries for {} edges",
            w.len(),
            g.num_edges()
        )));
    }
    let n = g.num_vertices();
    let mut m = DMatrix::zeros(n, n);
    for (e, &omega) in g.edges().iter().zip(w.values()) {
        let (i, j) = e.pair();
        m[(i, j)] = -omega;
        m[(j, i)] = -omega;
        m[(i, i)] += omega;
        m[(j, j)] += omega;
    }
    Ok(StressMatrix(m))
}

/// `max_i ‖Σ_j ω_ij (p_i − p_j)‖`, normalized by `max(1, ‖ω‖·longest edge)`.
/// A length mismatch yields `+∞`.
pub fn equilibrium_residual(f: &Framework, w: &StressVector) -> f64 {
    let g = f.graph();
    if w.len() != g.num_edges() {
        return f64::INFINITY;
    }
    let d = f.dimension();
    let mut force = alloc::vec![0.0; g.num_vertices() * d];
    for (e, &omega) in g.edges().iter().zip(w.values()) {
        let (i, j) = e.pair();
        for k in 0..d {
            let diff = omega * (f.point(i)[k] - f.point(j)[k]);
            force[i * d + k] += diff;
            force[j * d + k] -= diff;
        }
    }
    let worst = force.chunks(d).map(linalg::norm).fold(0.0, f64::max);
    worst / (w.norm() * f.longest_edge_length()).max(1.0)
}

pub fn spectral_report(m: &DMatrix<f64>, tol: f64) -> Result<SpectralReport> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("matrix is not square"));
    }
    let scale = linalg::max_abs(m);
    let asym = linalg::max_abs(&(m - m.transpose()));
    if asym > 1e-12 * scale {
        return Err(Error::invalid(alloc::format!(
            "matrix is not symmetric (defect {asym:e})"
        )));
    }
    let values = linalg::sym_eigen(m).values;
    Ok(report_from_eigenvalues(values, tol))
}

pub(crate) fn report_from_eigenvalues(eigenvalues: Vec<f64>, tol: f64) -> SpectralReport {
    let max = eigenvalues.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let thr = tol * max;
    let n_pos = eigenvalues.iter().filter(|&&x| x > thr).count();
    let n_neg = eigenvalues.iter().filter(|&&x| x < -thr).count();
    let nullity = eigenvalues.len() - n_pos - n_neg;
    let classification = match (n_pos, n_neg) {
        (0, 0) => Classification::Zero,
        (_, 0) => Classification::Psd,
        (0, _) => Classification::Nsd,
        _ => Classification::Indefinite,
    };
    SpectralReport {
        eigenvalues,
        nullity,
        n_pos,
        n_neg,
        classification,
        tol_used: tol,
    }
}

/// Spectral report of the stress matrix of `w` on `g`.
pub fn stress_report(g: &Graph, w: &StressVector, tol: f64) -> Result<SpectralReport> {
    spectral_report(stress_matrix_from_vector(g, w)?.matrix(), tol)
}

/// `Σ_ij ω_ij ‖p_i − p_j‖²` summed over edges.
pub fn energy(f: &Framework, w: &StressVector) -> f64 {
    f.graph()
        .edges()
        .iter()
        .zip(w.values())
        .map(|(e, omega)| omega * f.squared_distance(e.i(), e.j()))
        .sum()
}

/// The same energy as the quadratic form `Σ_m (p^m)ᵀ Ω p^m`.
pub fn energy_quadratic_form(f: &Framework, w: &StressVector) -> Result<f64> {
    let omega = stress_matrix_from_vector(f.graph(), w)?;
    Ok((0..f.dimension())
        .map(|m| {
            let pm = DVector::from_vec(f.coordinate_projection(m));
            pm.dot(&(omega.matrix() * &pm))
        })
        .sum())
}

/// Result of [`combine_for_nonzero_psd`].
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub stress: StressVector,
    pub epsilon: f64,
    /// Random directions drawn before one was accepted.
    pub draws: usize,
    pub report: SpectralReport,
}

const NONZERO_RELATIVE: f64 = 1e-6;

/// Turns a PSD stress of nullity `d+1` into one that is also nonzero on every
/// edge by adding a small multiple of a random stress `B` from `basis`.
///
/// `ε = min(ε₀, ε₁)` where `ε₀` keeps every nonzero entry of `A` at least half
/// its size and `ε₁ = |λ_m| / (2‖Ω_B‖₂)` keeps the signature of `Ω_A`.
pub fn combine_for_nonzero_psd(
    f: &Framework,
    a: &StressVector,
    basis: &[StressVector],
    seed: u64,
    tol: &Tolerances,
) -> Result<Combination> {
    let g = f.graph();
    let d = f.dimension();
    let report = stress_report(g, a, tol.spectral)?;
    if !report.is_psd_with_nullity(d + 1) {
        return Err(Error::PreconditionViolation(alloc::format!(
            "stress matrix is {} with nullity {}, expected psd with nullity {}",
            report.classification.as_str(),
            report.nullity,
            d + 1
        )));
    }
    let a_max = a.max_abs();
    if a_max == 0.0 {
        return Err(Error::NoStress);
    }
    let eta = NONZERO_RELATIVE * a_max;
    if a.values().iter().all(|x| x.abs() > eta) {
        return Ok(Combination {
            stress: a.clone(),
            epsilon: 0.0,
            draws: 0,
            report,
        });
    }
    let lambda_m = report.smallest_nonzero_magnitude().ok_or(Error::NoStress)?;

    let mut rng = graph::rng(seed);
    for draw in 1..=tol.retries.max(1) {
        let mut b = alloc::vec![0.0; a.len()];
        for basis_vec in basis {
            let weight: f64 = StandardNormal.sample(&mut rng);
            for (acc, x) in b.iter_mut().zip(basis_vec.values()) {
                *acc += weight * x;
            }
        }
        let b_max = b.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if b_max == 0.0 {
            continue;
        }
        let b = StressVector(b).scaled(a_max / b_max);
        if b.values().iter().any(|x| x.abs() <= eta) {
            continue;
        }
        let eps0 = a
            .values()
            .iter()
            .zip(b.values())
            .filter(|(x, y)| x.abs() > eta && x.signum() != y.signum())
            .map(|(x, y)| x.abs() / (2.0 * y.abs()))
            .fold(f64::INFINITY, f64::min);
        let b_norm = linalg::spectral_norm(stress_matrix_from_vector(g, &b)?.matrix());
        let eps1 = lambda_m / (2.0 * b_norm);
        let epsilon = eps0.min(eps1);
        let combined = StressVector(
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x + epsilon * y)
                .collect(),
        );
        if combined.values().iter().any(|x| x.abs() <= 0.5 * eta) {
            continue;
        }
        let combined_report = stress_report(g, &combined, tol.spectral)?;
        if !combined_report.is_psd_with_nullity(d + 1) {
            continue;
        }
        return Ok(Combination {
            stress: combined,
            epsilon,
            draws: draw,
            report: combined_report,
        });
    }
    Err(Error::NotRedundant)
}

/// Orthogonal projection of `w` onto the stress space of `f`, rescaled to
/// `‖w‖`.
pub fn project_stress_to_kernel(f: &Framework, w: &StressVector, tol: f64) -> Result<StressVector> {
    if w.len() != f.graph().num_edges() {
        return Err(Error::invalid("stress length does not match edge count"));
    }
    let basis = stress_space_basis(f, tol);
    if basis.is_empty() {
        return Err(Error::NoStress);
    }
    let mut proj = alloc::vec![0.0; w.len()];
    for b in &basis {
        let c: f64 = b.values().iter().zip(w.values()).map(|(x, y)| x * y).sum();
        for (acc, x) in proj.iter_mut().zip(b.values()) {
            *acc += c * x;
        }
    }
    let proj = StressVector(proj);
    let (pn, wn) = (proj.norm(), w.norm());
    if wn == 0.0 || pn <= 1e-8 * wn {
        return Err(Error::ProjectionCollapse);
    }
    Ok(proj.scaled(wn / pn))
}

/// Numerical check of `Ker(A + B) = Ker(A) ∩ Ker(B)` for PSD `A`, `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelIntersection {
    pub sum_kernel_dim: usize,
    pub intersection_dim: usize,
    /// `max ‖A v‖, ‖B v‖` over the kernel basis of `A + B`, relative to scale.
    pub max_annihilation: f64,
    pub holds: bool,
}

pub fn kernel_intersection_check(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
) -> Result<KernelIntersection> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::invalid("matrices must be square and of equal size"));
    }
    let ea = linalg::sym_eigen(a);
    let eb = linalg::sym_eigen(b);
    let sum = a + b;
    let es = linalg::sym_eigen(&sum);
    let mag = |e: &linalg::SymEigen| e.values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let scale = mag(&ea).max(mag(&eb));
    let thr = tol * scale;
    for (name, e) in [("A", &ea), ("B", &eb)] {
        if e.values.first().is_some_and(|&x| x < -thr) {
            return Err(Error::invalid(alloc::format!(
                "{name} is not positive semidefinite"
            )));
        }
    }
    let kernel = |e: &linalg::SymEigen| -> Vec<DVector<f64>> {
        e.values
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() <= thr)
            .map(|(k, _)| e.vectors.column(k).into_owned())
            .collect()
    };
    let (ka, kb, ks) = (kernel(&ea), kernel(&eb), kernel(&es));
    let union: Vec<DVector<f64>> = ka.iter().chain(&kb).cloned().collect();
    let intersection_dim = ka.len() + kb.len() - linalg::span_dimension(&union, 1e-8);
    let max_annihilation = ks
        .iter()
        .map(|v| (a * v).norm().max((b * v).norm()))
        .fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE);
    Ok(KernelIntersection {
        sum_kernel_dim: ks.len(),
        intersection_dim,
        max_annihilation,
        holds: ks.len() == intersection_dim && max_annihilation <= tol,
    })
}

/// Hausdorff distance between the unit spheres of two subspaces given by
/// orthonormal bases.
///
/// For a unit `u`, the nearest unit vector of the other span is at distance
/// `sqrt(2 − 2‖P u‖)`, so the directed distance is governed by the smallest
/// principal-angle cosine (zero when the source span is larger).
pub fn subspace_distance(u: &[DVector<f64>], v: &[DVector<f64>]) -> f64 {
    match (u.is_empty(), v.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let um = DMatrix::from_columns(u);
    let vm = DMatrix::from_columns(v);
    let directed = |from: &DMatrix<f64>, to: &DMatrix<f64>| -> f64 {
        let c_min = if from.ncols() > to.ncols() {
            0.0
        } else {
            let s = linalg::singular_values(&(to.transpose() * from));
            s.get(from.ncols() - 1).copied().unwrap_or(0.0).min(1.0)
        };
        linalg::sqrt((2.0 - 2.0 * c_min).max(0.0))
    };
    directed(&um, &vm).max(directed(&vm, &um))
}
