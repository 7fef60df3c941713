//! Localization of white sources by subspace projection.
//!
//! The PSD of a mixture of white sources is a non-negative combination of the
//! power responses `|H_j|^2` of the active directions. Every candidate set of
//! `J` directions is scored by how far the observed PSD lies from the span of
//! its power responses, and the closest span wins.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::scatter::DirectionalResponseSet;

pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Relative tolerance under which a Gram-Schmidt column is treated as
/// linearly dependent on the previous ones.
const RANK_TOL: f64 = 1e-10;
/// Relative gap under which two residuals count as tied.
const TIE_TOL: f64 = 1e-12;

/// One candidate direction subset and its projection residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCandidate {
    /// Strictly increasing direction indices.
    pub subset: Vec<usize>,
    pub residual: f64,
}

impl SubspaceCandidate {
    /// The `F x J` basis `[|H_j|^2]` of this candidate.
    pub fn basis(&self, set: &DirectionalResponseSet) -> Array2<f64> {
        let power = set.power();
        Array2::from_shape_fn((set.n_bins(), self.subset.len()), |(f, j)| {
            power[[self.subset[j], f]]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteLocResult {
    pub indices: Vec<usize>,
    pub azimuths_deg: Vec<f64>,
    pub residual: f64,
    /// Every candidate in lexicographic subset order.
    pub candidates: Vec<SubspaceCandidate>,
    /// Another subset reached the same residual; the lexicographically
    /// smallest one was returned.
    pub tied: bool,
}

/// Norm of the least-squares residual of `psd` against the columns of
/// `basis` (`F x J`), i.e. `|(I - P) psd|` with `P` the orthogonal projector
/// onto the column span. Rank-deficient bases are handled by dropping
/// dependent columns.
pub fn projection_residual(psd: ArrayView1<'_, f64>, basis: ArrayView2<'_, f64>) -> Result<f64> {
    if basis.nrows() != psd.len() {
        return invalid(format!(
            "basis has {} rows, PSD has {} bins",
            basis.nrows(),
            psd.len()
        ));
    }
    let cols: Vec<Vec<f64>> = basis.columns().into_iter().map(|c| c.to_vec()).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    Ok(residual_of(&psd.to_vec(), &refs))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass, then the
/// residual of `y` after removing its component in the span.
fn residual_of(y: &[f64], columns: &[&[f64]]) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for col in columns {
        let norm0 = dot(col, col).sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = col.to_vec();
        for _ in 0..2 {
            for qi in &q {
                let c = dot(qi, &v);
                axpy(-c, qi, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > RANK_TOL * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            q.push(v);
        }
    }
    let mut r = y.to_vec();
    for _ in 0..2 {
        for qi in &q {
            let c = dot(qi, &r);
            axpy(-c, qi, &mut r);
        }
    }
    dot(&r, &r).sqrt()
}

/// `C(n, k)` without overflow for any realistic grid.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Localizes `j` white sources from an empirical PSD on `set`'s frequency
/// grid by exhaustive search over all `C(D, j)` direction subsets.
pub fn localize_white(
    psd: ArrayView1<'_, f64>,
    set: &DirectionalResponseSet,
    j: usize,
    budget: u128,
    exec: Exec,
) -> Result<WhiteLocResult> {
    let d = set.n_directions();
    let f = set.n_bins();
    if psd.len() != f {
        return invalid(format!("PSD has {} bins, device has {f}", psd.len()));
    }
    if j == 0 || j > d {
        return invalid(format!("need 1 <= J <= D, got J = {j}, D = {d}"));
    }
    if j >= f {
        return invalid(format!("need J < F, got J = {j}, F = {f}"));
    }
    let count = binomial(d, j);
    if count > budget {
        return Err(Error::BudgetExceeded {
            d,
            j,
            count,
            budget,
        });
    }
    let power: Vec<Vec<f64>> = set.power().rows().into_iter().map(|r| r.to_vec()).collect();
    let y = psd.to_vec();

    let all = subsets(d, j);
    let residuals = exec.map(all.chunks(256).collect(), |chunk: &[Vec<usize>]| {
        chunk
            .iter()
            .map(|s| {
                let cols: Vec<&[f64]> = s.iter().map(|&i| power[i].as_slice()).collect();
                residual_of(&y, &cols)
            })
            .collect::<Vec<_>>()
    });
    let candidates: Vec<SubspaceCandidate> = all
        .into_iter()
        .zip(residuals.into_iter().flatten())
        .map(|(subset, residual)| SubspaceCandidate { subset, residual })
        .collect();

    // Lexicographic order of `candidates` makes the first minimum the
    // tie-break winner.
    let (best_idx, best) = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual).then(a.0.cmp(&b.0)))
        .expect("at least one subset");
    let slack = TIE_TOL * best.residual.max(TIE_TOL * dot(&y, &y).sqrt());
    let tied = candidates
        .iter()
        .enumerate()
        .any(|(i, c)| i != best_idx && c.residual <= best.residual + slack);

    let indices = best.subset.clone();
    Ok(WhiteLocResult {
        azimuths_deg: indices.iter().map(|&i| set.azimuths_deg()[i]).collect(),
        residual: best.residual,
        indices,
        candidates,
        tied,
    })
}
