use ndarray::Array2;

use super::Dictionary;
use crate::error::{invalid, Result};
use crate::scatter::DirectionalResponseSet;

/// `A = [diag(|H_1|) W, ..., diag(|H_D|) W]`, `F x (K D)`. Column `c`
/// belongs to direction `c / K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub values: Array2<f64>,
    pub k: usize,
    pub d: usize,
}

impl MixingMatrix {
    pub fn new(values: Array2<f64>, k: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 || values.ncols() != k * d {
            return invalid(format!(
                "mixing matrix has {} columns, expected K*D = {k}*{d}",
                values.ncols()
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("mixing matrix must be finite and non-negative");
        }
        Ok(Self { values, k, d })
    }

    pub fn group_of_column(&self, c: usize) -> usize {
        c / self.k
    }

    pub fn n_bins(&self) -> usize {
        self.values.nrows()
    }
}

pub fn build_mixing_matrix(set: &DirectionalResponseSet, w: &Dictionary) -> Result<MixingMatrix> {
    let f = set.n_bins();
    if w.atoms.nrows() != f
        || set
            .freq_axis()
            .iter()
            .zip(&w.freq_axis)
            .any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return invalid(format!(
            "device has {f} bins, dictionary {}; frequency grids must match",
            w.atoms.nrows()
        ));
    }
    let k = w.n_atoms();
    let d = set.n_directions();
    let h = set.mags();
    let values = Array2::from_shape_fn((f, k * d), |(i, c)| h[[c / k, i]] * w.atoms[[i, c % k]]);
    MixingMatrix::new(values, k, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scatter::{uniform_grid, ScattererParams};
    use crate::signal::freq_axis;
    use ndarray::s;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict(f: usize, k: usize, seed: u64, axis: Vec<f64>) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dictionary::new(
            Array2::from_shape_fn((f, k), |_| rng.random_range(0.01..1.0)),
            (0..k).map(|i| format!("a{i}")).collect(),
            axis,
        )
        .unwrap()
    }

    #[test]
    fn flat_responses_repeat_dictionary() {
        let axis = freq_axis(16000, 64);
        let set = DirectionalResponseSet::new(
            uniform_grid(4),
            Array2::ones((4, 33)),
            axis.clone(),
            None,
            "flat",
            16000,
            64,
        )
        .unwrap();
        let w = dict(33, 3, 1, axis);
        let a = build_mixing_matrix(&set, &w).unwrap();
        assert_eq!(a.values.dim(), (33, 12));
        for d in 0..4 {
            assert_eq!(a.values.slice(s![.., d * 3..(d + 1) * 3]), w.atoms);
        }
        assert_eq!(a.group_of_column(7), 2);
    }

    #[test]
    fn matches_loop_oracle() {
        let set = crate::scatter::synth_scatterer(&ScattererParams::rough(5, 16000, 64, 2)).unwrap();
        let w = dict(33, 4, 3, set.freq_axis().to_vec());
        let a = build_mixing_matrix(&set, &w).unwrap();
        for d in 0..5 {
            for k in 0..4 {
                for f in 0..33 {
                    assert_eq!(a.values[[f, d * 4 + k]], set.mags()[[d, f]] * w.atoms[[f, k]]);
                }
            }
        }
        let single = set.select_directions(&[2]).unwrap();
        let a1 = build_mixing_matrix(&single, &w).unwrap();
        assert_eq!(a1.values, a.values.slice(s![.., 8..12]));
    }

    #[test]
    fn grid_mismatch() {
        let set = crate::scatter::synth_scatterer(&ScattererParams::rough(3, 16000, 64, 2)).unwrap();
        let w = dict(20, 2, 3, (0..20).map(|i| i as f64).collect());
        assert!(build_mixing_matrix(&set, &w).is_err());
    }
}
