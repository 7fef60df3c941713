//! Non-negative matrix factorization with a fixed mixing matrix and a
//! sparse-group-sparsity penalty.
//!
//! The observation `Y` (`F x N` magnitudes) is modeled as `A X`, where
//! `A = [diag(H_1) W, ..., diag(H_D) W]` stacks the source dictionary `W`
//! filtered by every direction's response and `X` holds one block of `K`
//! activation rows per direction. Only `X` is optimized:
//!
//! ```text
//! min_{X >= 0}  D(Y | A X) + lambda * sum_d log(eps + |vec(X_d)|_1) + gamma * |vec(X)|_1
//! ```
//!
//! with `D` the Itakura-Saito divergence or half the squared Euclidean
//! distance. Directions whose block keeps the most energy are the estimates.

mod dictionary;
mod divergence;
mod mixing;
mod solver;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use dictionary::{learn_dictionary, prototype_dictionary, Dictionary, TrainingSpectrogram};
pub use divergence::{beta_divergence, itakura_saito};
pub use mixing::{build_mixing_matrix, MixingMatrix};
pub use solver::{factorize, factorize_from, mu_step, objective, Factorization};

use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Divergence {
    /// beta = 0
    ItakuraSaito,
    /// beta = 2
    Euclidean,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Divergence::ItakuraSaito => "itakura-saito",
            Divergence::Euclidean => "euclidean",
        })
    }
}

impl std::str::FromStr for Divergence {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "itakura-saito" | "is" => Ok(Self::ItakuraSaito),
            "euclidean" | "eu" => Ok(Self::Euclidean),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown divergence `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub divergence: Divergence,
    /// Weight of the log/l1 group penalty.
    pub lambda: f64,
    /// Weight of the l1 penalty.
    pub gamma: f64,
    pub iters: usize,
    /// Offset inside the group penalty's logarithm.
    pub eps_group: f64,
    /// Floor for model values and for the Euclidean update ratio.
    pub eps_floor: f64,
    /// Stop early once the relative objective change drops below this.
    pub tol: Option<f64>,
    /// Column-parallel updates; results are bit-identical to serial.
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            divergence: Divergence::ItakuraSaito,
            lambda: 0.0,
            gamma: 0.0,
            iters: 100,
            eps_group: 1e-12,
            eps_floor: 1e-20,
            tol: None,
            exec: Exec::Serial,
        }
    }
}

impl SolverConfig {
    pub fn new(divergence: Divergence, lambda: f64, gamma: f64) -> Self {
        Self {
            divergence,
            lambda,
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.iters == 0 {
            return crate::error::invalid("iters must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return crate::error::invalid("lambda and gamma must be non-negative");
        }
        if !(self.eps_group > 0.0 && self.eps_floor > 0.0) {
            return crate::error::invalid("epsilons must be positive");
        }
        Ok(())
    }
}

/// Activations `X`, `(K D) x N`, rows grouped by direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub values: Array2<f64>,
    pub k: usize,
    pub d: usize,
}

impl Activations {
    pub fn new(values: Array2<f64>, k: usize, d: usize) -> crate::Result<Self> {
        if values.nrows() != k * d {
            return crate::error::invalid(format!(
                "activations have {} rows, expected K*D = {}",
                values.nrows(),
                k * d
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return crate::error::invalid("activations must be finite and non-negative");
        }
        Ok(Self { values, k, d })
    }

    pub fn group(&self, d: usize) -> ArrayView2<'_, f64> {
        self.values
            .slice_axis(Axis(0), (d * self.k..(d + 1) * self.k).into())
    }
}

/// `|vec(X_d)|_1` for every group of `k` consecutive rows.
pub(crate) fn group_l1(x: ArrayView2<'_, f64>, k: usize) -> Vec<f64> {
    x.axis_chunks_iter(Axis(0), k)
        .map(|g| g.iter().sum())
        .collect()
}
