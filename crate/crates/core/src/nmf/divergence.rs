use ndarray::ArrayView2;

use super::Divergence;
use crate::error::{invalid, Result};

/// `d_IS(v | v_hat) = v / v_hat - ln(v / v_hat) - 1`
pub fn itakura_saito(v: f64, v_hat: f64) -> f64 {
    let q = v / v_hat;
    q - q.ln() - 1.0
}

/// Sum of entrywise divergences. For Itakura-Saito, observed values are
/// clamped to `eps_floor` (the divergence is infinite at zero) and a zero or
/// negative model value is an error.
pub fn beta_divergence(
    v: ArrayView2<'_, f64>,
    v_hat: ArrayView2<'_, f64>,
    divergence: Divergence,
    eps_floor: f64,
) -> Result<f64> {
    if v.dim() != v_hat.dim() {
        return invalid(format!("shape mismatch {:?} vs {:?}", v.dim(), v_hat.dim()));
    }
    match divergence {
        Divergence::ItakuraSaito => {
            let mut sum = 0.0;
            for (&a, &b) in v.iter().zip(v_hat.iter()) {
                if !(b > 0.0) {
                    return invalid("Itakura-Saito divergence needs a strictly positive model");
                }
                sum += itakura_saito(a.max(eps_floor), b);
            }
            Ok(sum)
        }
        Divergence::Euclidean => Ok(0.5
            * v.iter()
                .zip(v_hat.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()),
    }
}
