//! Direction-of-arrival estimation by group-sparse NMF, with optional
//! coarse-to-fine refinement.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nmf::{
    build_mixing_matrix, factorize, factorize_from, group_l1, Activations, Dictionary, MixingMatrix, SolverConfig,
};
use crate::scatter::{band_select, BandSelection, DirectionalResponseSet};
use crate::signal::{magnitude, stft, TimeSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Coarse,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoAResult {
    /// Estimated azimuths, strongest group first.
    pub estimates_deg: Vec<f64>,
    /// `|vec(X_d)|_1` for every direction of the stage's grid.
    pub group_energies: Vec<f64>,
    /// Azimuth of every entry of `group_energies`.
    pub energy_azimuths: Vec<f64>,
    pub stage: Stage,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiresConfig {
    /// Number of coarse candidates kept (T).
    pub candidates: usize,
    pub fine_step_deg: f64,
    /// Neighbours per candidate (R), split evenly on both sides.
    pub neighbors: usize,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for MultiresConfig {
    fn default() -> Self {
        Self {
            candidates: 7,
            fine_step_deg: 2.0,
            neighbors: 4,
            lambda: 0.0,
            gamma: 0.0,
        }
    }
}

impl MultiresConfig {
    pub fn validate(&self, j: usize) -> Result<()> {
        if self.candidates < j {
            return invalid(format!("need T >= J, got T = {}, J = {j}", self.candidates));
        }
        if !(self.fine_step_deg > 0.0) {
            return invalid("fine step must be positive");
        }
        if !self.neighbors.is_multiple_of(2) {
            return invalid("neighbour count must be even");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return invalid("lambda and gamma must be non-negative");
        }
        Ok(())
    }

    /// Offsets around a candidate, the candidate itself first.
    pub fn offsets_deg(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for i in 1..=self.neighbors / 2 {
            let o = i as f64 * self.fine_step_deg;
            out.push(-o);
            out.push(o);
        }
        out
    }
}

/// Activation starting point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum Init {
    /// `X = A^T Y`.
    Deterministic,
    /// Uniform entries with the same mean as `A^T Y`.
    Random { seed: u64 },
}

/// Per-direction `l1` norms of the activation groups.
pub fn score_groups(x: &Activations) -> Vec<f64> {
    group_l1(x.values.view(), x.k)
}

/// Indices of the `j` largest energies; ties go to the smaller azimuth.
pub fn top_indices(energies: &[f64], azimuths_deg: &[f64], j: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| {
        energies[b]
            .total_cmp(&energies[a])
            .then(azimuths_deg[a].total_cmp(&azimuths_deg[b]))
    });
    order.truncate(j);
    order
}

/// Azimuths of the fine stage, candidate-major and without duplicates.
pub fn fine_candidates(candidates_deg: &[f64], mr: &MultiresConfig) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &c in candidates_deg {
        for o in mr.offsets_deg() {
            let a = (c + o).rem_euclid(360.0);
            if !out.iter().any(|b| crate::scatter::circular_distance(a, *b) < 1e-6) {
                out.push(a);
            }
        }
    }
    out
}

/// Restricts a set to the band unless it is already on it.
pub fn on_band(set: &DirectionalResponseSet, band: &BandSelection) -> Result<DirectionalResponseSet> {
    if set.n_bins() == band.len() {
        return Ok(set.clone());
    }
    let (restricted, sel) = band_select(set, band.fmin, band.fmax)?;
    if sel.bin_indices != band.bin_indices {
        return invalid("device frequency grid does not match the band");
    }
    Ok(restricted)
}

/// Band-restricted magnitude spectrogram of a signal, hop of half a window.
pub fn band_magnitudes(y: &TimeSignal, window_len: usize, band: &BandSelection) -> Result<Array2<f64>> {
    let spec = magnitude(&stft(y, window_len, window_len / 2)?);
    if band.bin_indices.iter().any(|&r| r >= spec.n_bins()) {
        return invalid("band exceeds the STFT grid");
    }
    Ok(spec.select_rows(&band.bin_indices).values)
}

fn start(a: &MixingMatrix, y: ArrayView2<'_, f64>, init: Init, cfg: &SolverConfig) -> Result<Option<Activations>> {
    match init {
        Init::Deterministic => Ok(None),
        Init::Random { seed } => {
            let y = match cfg.divergence {
                crate::nmf::Divergence::ItakuraSaito => y.mapv(|v| v.max(cfg.eps_floor)),
                crate::nmf::Divergence::Euclidean => y.to_owned(),
            };
            let mean = a.values.t().dot(&y).mean().unwrap_or(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((a.values.ncols(), y.ncols()), |_| 2.0 * mean * rng.random::<f64>());
            Ok(Some(Activations::new(x, a.k, a.d)?))
        }
    }
}

fn solve(
    y: ArrayView2<'_, f64>,
    set: &DirectionalResponseSet,
    a: &MixingMatrix,
    j: usize,
    cfg: &SolverConfig,
    init: Init,
    stage: Stage,
) -> Result<DoAResult> {
    let fit = match start(a, y, init, cfg)? {
        None => factorize(y, a, cfg)?,
        Some(x0) => factorize_from(y, a, x0, cfg)?,
    };
    let energies = score_groups(&fit.x);
    let az = set.azimuths_deg().to_vec();
    let estimates_deg = top_indices(&energies, &az, j).into_iter().map(|i| az[i]).collect();
    Ok(DoAResult {
        estimates_deg,
        group_energies: energies,
        energy_azimuths: az,
        stage,
        objective_trace: fit.trace,
    })
}

/// Second stage: the `T` strongest coarse directions and their neighbours on
/// the fine grid compete jointly in one mixing matrix.
pub fn refine(
    y: ArrayView2<'_, f64>,
    coarse: &DoAResult,
    fine_device: &DirectionalResponseSet,
    w: &Dictionary,
    j: usize,
    mr: &MultiresConfig,
    cfg: &SolverConfig,
) -> Result<DoAResult> {
    mr.validate(j)?;
    let t = mr.candidates.min(coarse.group_energies.len());
    let cand: Vec<f64> = top_indices(&coarse.group_energies, &coarse.energy_azimuths, t)
        .into_iter()
        .map(|i| coarse.energy_azimuths[i])
        .collect();
    let azimuths = fine_candidates(&cand, mr);
    let mut rows = azimuths
        .iter()
        .map(|&a| {
            fine_device
                .index_of(a)
                .ok_or_else(|| Error::InvalidArgument(format!("fine device has no direction at {a} deg")))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_unstable();
    rows.dedup();
    let set = fine_device.select_directions(&rows)?;
    let a = build_mixing_matrix(&set, w)?;
    let fine_cfg = SolverConfig {
        lambda: mr.lambda,
        gamma: mr.gamma,
        ..cfg.clone()
    };
    solve(y, &set, &a, j, &fine_cfg, Init::Deterministic, Stage::Refined)
}

/// A device, dictionary and band prepared for repeated localization.
#[derive(Debug, Clone)]
pub struct NmfLocalizer {
    device: DirectionalResponseSet,
    dictionary: Dictionary,
    mixing: MixingMatrix,
    band: BandSelection,
    window_len: usize,
    pub cfg: SolverConfig,
    pub init: Init,
    fine: Option<(MultiresConfig, DirectionalResponseSet)>,
}

impl NmfLocalizer {
    /// `device` and `dictionary` may be on the full STFT grid or already on
    /// the band.
    pub fn new(
        device: &DirectionalResponseSet,
        dictionary: &Dictionary,
        band: &BandSelection,
        cfg: SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let device = on_band(device, band)?;
        let dictionary = dictionary.restricted_to(band)?;
        let mixing = build_mixing_matrix(&device, &dictionary)?;
        Ok(Self {
            window_len: device.window_len(),
            device,
            dictionary,
            mixing,
            band: band.clone(),
            cfg,
            init: Init::Deterministic,
            fine: None,
        })
    }

    pub fn with_multires(mut self, mr: MultiresConfig, fine_device: &DirectionalResponseSet) -> Result<Self> {
        if fine_device.window_len() != self.window_len {
            return invalid("fine and coarse devices use different window lengths");
        }
        self.fine = Some((mr, on_band(fine_device, &self.band)?));
        Ok(self)
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn device(&self) -> &DirectionalResponseSet {
        &self.device
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn band(&self) -> &BandSelection {
        &self.band
    }

    pub fn magnitudes(&self, y: &TimeSignal) -> Result<Array2<f64>> {
        band_magnitudes(y, self.window_len, &self.band)
    }

    /// Coarse stage only, on a band-restricted magnitude spectrogram.
    pub fn coarse(&self, y: ArrayView2<'_, f64>, j: usize) -> Result<DoAResult> {
        let d = self.device.n_directions();
        if j == 0 || j > d {
            return invalid(format!("need 1 <= J <= D, got J = {j}, D = {d}"));
        }
        solve(y, &self.device, &self.mixing, j, &self.cfg, self.init, Stage::Coarse)
    }

    /// Coarse stage followed by refinement when configured. Returns the
    /// coarse result too.
    pub fn localize_magnitudes(&self, y: ArrayView2<'_, f64>, j: usize) -> Result<(DoAResult, Option<DoAResult>)> {
        let coarse = self.coarse(y, j)?;
        let refined = match &self.fine {
            None => None,
            Some((mr, fine)) => Some(refine(y, &coarse, fine, &self.dictionary, j, mr, &self.cfg)?),
        };
        Ok((coarse, refined))
    }

    /// The final estimate for a time signal.
    pub fn localize(&self, y: &TimeSignal, j: usize) -> Result<DoAResult> {
        let (coarse, refined) = self.localize_magnitudes(self.magnitudes(y)?.view(), j)?;
        Ok(refined.unwrap_or(coarse))
    }
}

/// One-shot localization of `j` sources in `y`.
pub fn localize(
    y: &TimeSignal,
    device: &DirectionalResponseSet,
    w: &Dictionary,
    j: usize,
    cfg: &SolverConfig,
    band: &BandSelection,
    multires: Option<(&MultiresConfig, &DirectionalResponseSet)>,
) -> Result<DoAResult> {
    let mut loc = NmfLocalizer::new(device, w, band, cfg.clone())?;
    if let Some((mr, fine)) = multires {
        loc = loc.with_multires(mr.clone(), fine)?;
    }
    loc.localize(y, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmf::{Divergence, TrainingSpectrogram};
    use crate::scatter::{interpolate_to_grid, synth_scatterer, uniform_grid, ScattererParams};
    use crate::signal::MagSpectrogram;
    use crate::simulate::{make_source, render_mixture, render_signals, Scene, SourceKind, SourceSpec};
    use crate::whiteloc::{localize_white, DEFAULT_BUDGET};
    use crate::Exec;

    const SR: u32 = 16000;
    const WL: usize = 1024;

    fn devices(seed: u64) -> (DirectionalResponseSet, DirectionalResponseSet) {
        let fine = synth_scatterer(&ScattererParams::rough(360, SR, WL, seed)).unwrap();
        let coarse = interpolate_to_grid(&fine, &uniform_grid(36)).unwrap();
        (fine, coarse)
    }

    fn flat_atom(f_axis: &[f64]) -> Dictionary {
        Dictionary::new(Array2::ones((f_axis.len(), 1)), vec!["flat".into()], f_axis.to_vec()).unwrap()
    }

    #[test]
    fn score_groups_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Activations::new(Array2::from_shape_fn((12, 7), |_| rng.random::<f64>()), 3, 4).unwrap();
        let s = score_groups(&x);
        for d in 0..4 {
            let mut want = 0.0;
            for r in d * 3..d * 3 + 3 {
                for c in 0..7 {
                    want += x.values[[r, c]];
                }
            }
            assert_eq!(s[d], want);
        }
        let zero = Activations::new(Array2::zeros((12, 7)), 3, 4).unwrap();
        assert_eq!(score_groups(&zero), vec![0.0; 4]);
        let mut one = Array2::zeros((12, 7));
        one[[4, 2]] = 2.5;
        let s = score_groups(&Activations::new(one, 3, 4).unwrap());
        assert_eq!(s, vec![0.0, 2.5, 0.0, 0.0]);
    }

    #[test]
    fn ties_prefer_smaller_azimuth() {
        let e = [1.0, 3.0, 3.0, 0.5];
        let az = [0.0, 90.0, 30.0, 270.0];
        assert_eq!(top_indices(&e, &az, 2), vec![2, 1]);
        assert_eq!(top_indices(&e, &az, 1), vec![2]);
    }

    #[test]
    fn fine_candidates_around_a_bin() {
        let mr = MultiresConfig::default();
        let fine = fine_candidates(&[120.0], &mr);
        assert_eq!(fine, vec![120.0, 118.0, 122.0, 116.0, 124.0]);
        let wrap = fine_candidates(&[0.0, 10.0], &mr);
        assert_eq!(wrap.len(), 10);
        assert!(wrap.contains(&356.0));
        assert_eq!(MultiresConfig { neighbors: 0, ..mr.clone() }.offsets_deg(), vec![0.0]);
        assert!(MultiresConfig { candidates: 1, ..mr.clone() }.validate(2).is_err());
        assert!(MultiresConfig { neighbors: 3, ..mr }.validate(1).is_err());
    }

    #[test]
    fn white_source_flat_atom_finds_its_bin() {
        let (fine, coarse) = devices(11);
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        let w = flat_atom(fine.freq_axis());
        let loc = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::new(Divergence::ItakuraSaito, 0.0, 0.0)).unwrap();
        let mut hits = 0;
        for t in 0..100u64 {
            let d = (t * 7 % 36) as usize;
            let scene = Scene {
                azimuths_deg: vec![d as f64 * 10.0],
                sources: vec![SourceSpec::white(0.5, 1000 + t)],
                snr_db: f64::INFINITY,
                seed: t,
            };
            let y = render_mixture(&scene, &fine).unwrap();
            let r = loc.localize(&y, 1).unwrap();
            hits += usize::from(r.estimates_deg[0] == d as f64 * 10.0);
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn agrees_with_white_localization() {
        let (fine, coarse) = devices(12);
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        let w = flat_atom(fine.freq_axis());
        let loc = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::new(Divergence::ItakuraSaito, 0.0, 0.0)).unwrap();
        let mut agree = 0;
        for t in 0..100u64 {
            let scene = Scene {
                azimuths_deg: vec![((t * 7) % 36) as f64 * 10.0],
                sources: vec![SourceSpec::white(1.0, 2000 + t)],
                snr_db: 30.0,
                seed: t,
            };
            let y = render_mixture(&scene, &fine).unwrap();
            let nmf = loc.localize(&y, 1).unwrap();
            let psd = crate::signal::empirical_psd(&stft(&y, WL, WL / 2).unwrap());
            let white = localize_white(psd.view(), &coarse, 1, DEFAULT_BUDGET, Exec::Serial).unwrap();
            agree += usize::from(white.azimuths_deg == nmf.estimates_deg);
        }
        assert!(agree >= 90, "{agree}/100");
    }

    fn prototype(spec: &SourceSpec) -> Dictionary {
        let s = make_source(spec, SR).unwrap();
        let m = magnitude(&stft(&s, WL, WL / 2).unwrap());
        crate::nmf::prototype_dictionary(
            &[TrainingSpectrogram {
                spectrogram: MagSpectrogram::new(m.values, m.freq_axis).unwrap(),
                speaker: spec.label.clone(),
            }],
            None,
        )
        .unwrap()
    }

    #[test]
    fn duplicate_directions_share_energy() {
        let (_, coarse) = devices(13);
        let mut mags = coarse.mags().clone();
        let row = mags.row(5).to_owned();
        mags.row_mut(20).assign(&row);
        let dup = DirectionalResponseSet::new(
            coarse.azimuths_deg().to_vec(),
            mags,
            coarse.freq_axis().to_vec(),
            None,
            "dup",
            SR,
            WL,
        )
        .unwrap();
        let spec = SourceSpec::white(0.5, 5);
        let w = prototype(&spec);
        let band = BandSelection::for_stft(SR, WL, 3000.0, 8000.0).unwrap();
        let loc = NmfLocalizer::new(&dup, &w, &band, SolverConfig::new(Divergence::ItakuraSaito, 1.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = Array2::from_shape_fn((band.len(), 20), |_| rng.random_range(0.1..1.0));
        let r = loc.coarse(y.view(), 2).unwrap();
        let (a, b) = (r.group_energies[5], r.group_energies[20]);
        assert!((a - b).abs() <= 1e-6 * a.max(b), "{a} vs {b}");
    }

    #[test]
    fn scaling_the_signal_keeps_the_winner() {
        let (fine, coarse) = devices(14);
        let spec = SourceSpec {
            kind: SourceKind::PrototypeColored { envelope_seed: 3 },
            duration_s: 0.5,
            seed: 8,
            label: "p".into(),
        };
        let w = prototype(&spec);
        let band = BandSelection::for_stft(SR, WL, 3000.0, 8000.0).unwrap();
        let s = make_source(&spec, SR).unwrap();
        for div in [Divergence::ItakuraSaito, Divergence::Euclidean] {
            let loc = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::new(div, 0.0, 0.0)).unwrap();
            for az in [40.0, 200.0] {
                let y = render_signals(&[az], std::slice::from_ref(&s), 30.0, 1, &fine).unwrap();
                let base = loc.localize(&y, 1).unwrap().estimates_deg;
                for c in [0.1, 10.0] {
                    assert_eq!(loc.localize(&y.scaled(c), 1).unwrap().estimates_deg, base, "{div} {c}");
                }
            }
        }
    }

    #[test]
    fn permuting_directions_permutes_estimates() {
        let (fine, coarse) = devices(15);
        // Direction i of the permuted device responds like direction 35 - i.
        let mut mags = coarse.mags().clone();
        mags.invert_axis(ndarray::Axis(0));
        let permuted = DirectionalResponseSet::new(
            coarse.azimuths_deg().to_vec(),
            mags,
            coarse.freq_axis().to_vec(),
            None,
            "reversed",
            SR,
            WL,
        )
        .unwrap();
        let w = flat_atom(fine.freq_axis());
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        let y = render_signals(&[130.0], &[make_source(&SourceSpec::white(0.5, 9), SR).unwrap()], 20.0, 2, &fine).unwrap();
        let cfg = SolverConfig::new(Divergence::ItakuraSaito, 0.0, 0.0);
        let a = localize(&y, &coarse, &w, 1, &cfg, &band, None).unwrap();
        let b = localize(&y, &permuted, &w, 1, &cfg, &band, None).unwrap();
        let ia = coarse.index_of(a.estimates_deg[0]).unwrap();
        assert_eq!(b.estimates_deg[0], coarse.azimuths_deg()[35 - ia]);
        let mut ea = a.group_energies.clone();
        ea.reverse();
        for (p, q) in ea.iter().zip(&b.group_energies) {
            assert!((p - q).abs() <= 1e-9 * p.abs().max(1e-300));
        }
    }

    #[test]
    fn trivial_refinement_returns_coarse_estimates() {
        let (fine, coarse) = devices(16);
        let w = flat_atom(fine.freq_axis());
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        let y = render_signals(
            &[50.0, 250.0],
            &[
                make_source(&SourceSpec::white(0.5, 1), SR).unwrap(),
                make_source(&SourceSpec::white(0.5, 2), SR).unwrap(),
            ],
            30.0,
            3,
            &fine,
        )
        .unwrap();
        let mr = MultiresConfig {
            candidates: 2,
            neighbors: 0,
            ..MultiresConfig::default()
        };
        let loc = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::new(Divergence::ItakuraSaito, 0.0, 0.0))
            .unwrap()
            .with_multires(mr, &fine)
            .unwrap();
        let (c, r) = loc.localize_magnitudes(loc.magnitudes(&y).unwrap().view(), 2).unwrap();
        let r = r.unwrap();
        assert_eq!(r.stage, Stage::Refined);
        let mut a = c.estimates_deg.clone();
        let mut b = r.estimates_deg.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_needs_the_neighbours() {
        let (_, coarse) = devices(17);
        let w = flat_atom(coarse.freq_axis());
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        // The coarse grid has no 2 degree neighbours.
        let loc = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::default())
            .unwrap()
            .with_multires(MultiresConfig::default(), &coarse)
            .unwrap();
        let y = Array2::from_elem((band.len(), 4), 1.0);
        assert!(loc.localize_magnitudes(y.view(), 1).is_err());
    }

    #[test]
    fn random_init_is_seeded() {
        let (fine, coarse) = devices(18);
        let w = flat_atom(fine.freq_axis());
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        let y = render_signals(&[70.0], &[make_source(&SourceSpec::white(0.5, 4), SR).unwrap()], 30.0, 5, &fine).unwrap();
        let base = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::default()).unwrap();
        let a = base.clone().with_init(Init::Random { seed: 1 }).localize(&y, 1).unwrap();
        let b = base.clone().with_init(Init::Random { seed: 1 }).localize(&y, 1).unwrap();
        let c = base.with_init(Init::Random { seed: 2 }).localize(&y, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.group_energies, c.group_energies);
    }

    #[test]
    fn argument_errors() {
        let (_, coarse) = devices(19);
        let w = flat_atom(coarse.freq_axis());
        let band = BandSelection::for_stft(SR, WL, 0.0, 8000.0).unwrap();
        let loc = NmfLocalizer::new(&coarse, &w, &band, SolverConfig::default()).unwrap();
        let y = Array2::from_elem((band.len(), 4), 1.0);
        assert!(loc.coarse(y.view(), 37).is_err());
        assert!(loc.coarse(y.view(), 0).is_err());
        let narrow = BandSelection::for_stft(SR, 512, 0.0, 8000.0).unwrap();
        assert!(NmfLocalizer::new(&coarse, &w, &narrow, SolverConfig::default()).is_err());
    }
}
