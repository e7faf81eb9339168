/// Numerical thresholds shared by the pipelines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value threshold for numerical rank.
    pub rank: f64,
    /// Relative eigenvalue threshold for zero eigenvalues in spectral reports.
    pub spectral: f64,
    /// Bound on the normalized equilibrium residual of emitted stresses.
    pub residual: f64,
    /// Retry budget for every randomized sub-step.
    pub retries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-9,
            spectral: 1e-8,
            residual: 1e-10,
            retries: 16,
        }
    }
}

impl Tolerances {
    pub fn with_spectral(mut self, spectral: f64) -> Self {
        self.spectral = spectral;
        self
    }

    pub fn with_retries(mut self, retries: usize) -> Self {
        self.retries = retries;
        self
    }
}
