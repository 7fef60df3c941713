//! Multiplicative updates for the group-sparse objective.
//!
//! Columns of `X` are updated independently given the per-group penalty
//! weights, which are computed once per iteration from the whole of `X`.
//! Work is split into fixed column blocks in both serial and parallel mode,
//! so the two produce bit-identical iterates.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::divergence::{beta_divergence, itakura_saito};
use super::{group_l1, Activations, Divergence, MixingMatrix, SolverConfig};
use crate::error::{invalid, Error, Result};

const COL_BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub x: Activations,
    /// Objective of every iterate, starting with the initialization.
    pub trace: Vec<f64>,
}

fn check_shapes(y: ArrayView2<'_, f64>, a: &MixingMatrix, x_rows: usize) -> Result<()> {
    if y.nrows() != a.n_bins() {
        return invalid(format!(
            "observation has {} bins, mixing matrix {}",
            y.nrows(),
            a.n_bins()
        ));
    }
    if x_rows != a.values.ncols() {
        return invalid(format!(
            "activations have {x_rows} rows, mixing matrix {} columns",
            a.values.ncols()
        ));
    }
    if y.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return invalid("observation must be finite and non-negative");
    }
    Ok(())
}

/// Itakura-Saito is undefined at zero, so observations are floored.
fn prepared(y: ArrayView2<'_, f64>, cfg: &SolverConfig) -> Array2<f64> {
    match cfg.divergence {
        Divergence::ItakuraSaito => y.mapv(|v| v.max(cfg.eps_floor)),
        Divergence::Euclidean => y.to_owned(),
    }
}

fn penalty_value(groups: &[f64], total: f64, cfg: &SolverConfig) -> f64 {
    let group: f64 = groups.iter().map(|g| (cfg.eps_group + g).ln()).sum();
    cfg.lambda * group + cfg.gamma * total
}

/// `lambda P + gamma` per row of `X`.
fn row_penalties(groups: &[f64], k: usize, cfg: &SolverConfig) -> Vec<f64> {
    groups
        .iter()
        .flat_map(|g| std::iter::repeat_n(cfg.lambda / (cfg.eps_group + g) + cfg.gamma, k))
        .collect()
}

/// `D(Y | A X) + lambda sum_d log(eps + |X_d|_1) + gamma |X|_1`.
pub fn objective(
    y: ArrayView2<'_, f64>,
    a: &MixingMatrix,
    x: &Activations,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_shapes(y, a, x.values.nrows())?;
    if y.ncols() != x.values.ncols() {
        return invalid("observation and activations disagree on frame count");
    }
    let y_hat = a.values.dot(&x.values);
    let data = beta_divergence(y, y_hat.view(), cfg.divergence, cfg.eps_floor)?;
    let groups = group_l1(x.values.view(), x.k);
    Ok(data + penalty_value(&groups, x.values.sum(), cfg))
}

struct Context<'a> {
    a: &'a Array2<f64>,
    y: &'a Array2<f64>,
    /// `A^T Y`, Euclidean only.
    aty: Option<&'a Array2<f64>>,
    pen: &'a [f64],
    cfg: &'a SolverConfig,
}

/// Updates one block of columns in place; returns the data term of the
/// block before the update.
fn update_block(ctx: &Context<'_>, cols: (usize, usize), x: &mut Array2<f64>) -> f64 {
    let cfg = ctx.cfg;
    let y = ctx.y.slice(s![.., cols.0..cols.1]);
    let y_hat = ctx.a.dot(&*x).mapv(|v| v.max(cfg.eps_floor));
    let b = x.ncols();
    match cfg.divergence {
        Divergence::ItakuraSaito => {
            let data = y
                .iter()
                .zip(y_hat.iter())
                .map(|(&v, &vh)| itakura_saito(v, vh))
                .sum();
            let ratio = Array2::from_shape_fn(y.dim(), |(i, j)| y[[i, j]] / (y_hat[[i, j]] * y_hat[[i, j]]));
            let inv = y_hat.mapv(f64::recip);
            let g = ctx.a.t().dot(&concatenate![Axis(1), ratio, inv]);
            for ((r, c), v) in x.indexed_iter_mut() {
                *v *= (g[[r, c]] / (g[[r, b + c]] + ctx.pen[r])).sqrt();
            }
            data
        }
        Divergence::Euclidean => {
            let data = 0.5
                * y.iter()
                    .zip(y_hat.iter())
                    .map(|(v, vh)| (v - vh).powi(2))
                    .sum::<f64>();
            let aty = ctx.aty.expect("A^T Y is precomputed for Euclidean updates");
            let den = ctx.a.t().dot(&y_hat);
            for ((r, c), v) in x.indexed_iter_mut() {
                let ratio = (aty[[r, cols.0 + c]] - ctx.pen[r]) / den[[r, c]];
                // `max` would swallow a NaN from a vanishing denominator.
                *v *= if ratio.is_nan() { ratio } else { ratio.max(cfg.eps_floor) };
            }
            data
        }
    }
}

/// One multiplicative update over all columns. Returns the data term of the
/// iterate before the update.
fn sweep(
    x: &mut Array2<f64>,
    a: &MixingMatrix,
    y: &Array2<f64>,
    aty: Option<&Array2<f64>>,
    pen: &[f64],
    cfg: &SolverConfig,
) -> Result<f64> {
    let n = x.ncols();
    let blocks: Vec<(usize, usize)> = (0..n)
        .step_by(COL_BLOCK)
        .map(|s| (s, (s + COL_BLOCK).min(n)))
        .collect();
    let ctx = Context {
        a: &a.values,
        y,
        aty,
        pen,
        cfg,
    };
    let x_ref = &*x;
    let updated = cfg.exec.map(blocks.clone(), |cols| {
        let mut xb = x_ref.slice(s![.., cols.0..cols.1]).to_owned();
        let data = update_block(&ctx, cols, &mut xb);
        (xb, data)
    });
    let mut data = 0.0;
    for (cols, (xb, d)) in blocks.into_iter().zip(updated) {
        x.slice_mut(s![.., cols.0..cols.1]).assign(&xb);
        data += d;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverAbort(
            "non-finite activations after a multiplicative update; check eps_floor and eps_group"
                .into(),
        ));
    }
    Ok(data)
}

/// A single multiplicative update of `X`.
pub fn mu_step(
    x: &Activations,
    a: &MixingMatrix,
    y: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) -> Result<Activations> {
    cfg.validate()?;
    check_shapes(y, a, x.values.nrows())?;
    if x.k != a.k || x.d != a.d || y.ncols() != x.values.ncols() {
        return invalid("activations do not match the mixing matrix or observation");
    }
    let y = prepared(y, cfg);
    let aty = (cfg.divergence == Divergence::Euclidean).then(|| a.values.t().dot(&y));
    let pen = row_penalties(&group_l1(x.values.view(), x.k), x.k, cfg);
    let mut next = x.values.clone();
    sweep(&mut next, a, &y, aty.as_ref(), &pen, cfg)?;
    Ok(Activations {
        values: next,
        k: x.k,
        d: x.d,
    })
}

/// Runs `cfg.iters` updates from the deterministic start `X = A^T Y`.
pub fn factorize(y: ArrayView2<'_, f64>, a: &MixingMatrix, cfg: &SolverConfig) -> Result<Factorization> {
    check_shapes(y, a, a.values.ncols())?;
    let x0 = a.values.t().dot(&prepared(y, cfg));
    factorize_from(y, a, Activations::new(x0, a.k, a.d)?, cfg)
}

/// Runs `cfg.iters` updates from a given start.
pub fn factorize_from(
    y: ArrayView2<'_, f64>,
    a: &MixingMatrix,
    x0: Activations,
    cfg: &SolverConfig,
) -> Result<Factorization> {
    cfg.validate()?;
    check_shapes(y, a, x0.values.nrows())?;
    if x0.k != a.k || x0.d != a.d || y.ncols() != x0.values.ncols() {
        return invalid("initial activations do not match the mixing matrix or observation");
    }
    let y = prepared(y, cfg);
    let aty = (cfg.divergence == Divergence::Euclidean).then(|| a.values.t().dot(&y));
    let k = a.k;
    let mut x = x0.values;
    let mut trace = Vec::with_capacity(cfg.iters + 1);
    for _ in 0..cfg.iters {
        let groups = group_l1(x.view(), k);
        let pen_value = penalty_value(&groups, x.sum(), cfg);
        let pen = row_penalties(&groups, k, cfg);
        let data = sweep(&mut x, a, &y, aty.as_ref(), &pen, cfg)?;
        trace.push(data + pen_value);
        if let (Some(tol), [.., prev, last]) = (cfg.tol, trace.as_slice()) {
            if (prev - last).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    let y_hat = a.values.dot(&x).mapv(|v| v.max(cfg.eps_floor));
    let data = beta_divergence(y.view(), y_hat.view(), cfg.divergence, cfg.eps_floor)?;
    trace.push(data + penalty_value(&group_l1(x.view(), k), x.sum(), cfg));
    Ok(Factorization {
        x: Activations { values: x, k, d: a.d },
        trace,
    })
}
