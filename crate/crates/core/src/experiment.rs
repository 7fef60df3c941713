//! Seeded trial batches: scene drawing, rendering, localization and records.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::doa::{DoAResult, NmfLocalizer, Stage};
use crate::error::{invalid, Result};
use crate::eval::{evaluate_trial, Tally, TrialOutcome};
use crate::exec::Exec;
use crate::nmf::{prototype_dictionary, Dictionary, TrainingSpectrogram};
use crate::scatter::{BandSelection, DirectionalResponseSet};
use crate::signal::{empirical_psd, magnitude, stft, TimeSignal};
use crate::simulate::{make_source, random_scene, render_mixture, Scene, SourceSpec};
use crate::whiteloc::localize_white;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    White,
    NmfPrototype,
    NmfUsm,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::White => "white",
            Method::NmfPrototype => "nmf-prototype",
            Method::NmfUsm => "nmf-usm",
        })
    }
}

/// Deterministic per-trial seed.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub j: usize,
    /// `None` for noiseless trials.
    pub snr_db: Option<f64>,
    pub truth_deg: Vec<f64>,
    pub estimates_deg: Vec<f64>,
    pub group_energies: Vec<f64>,
    pub stage: Stage,
    /// Coarse estimates when a refinement stage ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_estimates_deg: Option<Vec<f64>>,
    pub timing_ms: f64,
}

impl TrialRecord {
    pub fn outcome(&self, bin_width_deg: f64) -> Result<TrialOutcome> {
        evaluate_trial(&self.truth_deg, &self.estimates_deg, bin_width_deg)
    }

    /// The same trial judged by its coarse estimates, if refined.
    pub fn coarse_outcome(&self, bin_width_deg: f64) -> Result<Option<TrialOutcome>> {
        self.coarse_estimates_deg
            .as_ref()
            .map(|c| evaluate_trial(&self.truth_deg, c, bin_width_deg))
            .transpose()
    }

    /// JSON line without the timing field, for reproducibility checks.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("records serialize");
        if let Some(m) = v.as_object_mut() {
            m.remove("timing_ms");
        }
        v.to_string()
    }
}

/// A localization method ready to run on rendered mixtures.
#[derive(Debug, Clone)]
pub enum Estimator {
    White {
        /// Band-restricted model device.
        device: DirectionalResponseSet,
        band: BandSelection,
        budget: u128,
    },
    Nmf(Box<NmfLocalizer>),
}

impl Estimator {
    pub fn white(device: &DirectionalResponseSet, band: &BandSelection, budget: u128) -> Result<Self> {
        Ok(Self::White {
            device: crate::doa::on_band(device, band)?,
            band: band.clone(),
            budget,
        })
    }

    pub fn nmf(localizer: NmfLocalizer) -> Self {
        Self::Nmf(Box::new(localizer))
    }

    /// Final result and, when refined, the coarse one.
    pub fn estimate(&self, y: &TimeSignal, j: usize) -> Result<(DoAResult, Option<DoAResult>)> {
        match self {
            Estimator::White {
                device,
                band,
                budget,
            } => {
                let spec = stft(y, device.window_len(), device.window_len() / 2)?;
                let psd = empirical_psd(&spec);
                if band.bin_indices.iter().any(|&k| k >= psd.len()) {
                    return invalid("band exceeds the STFT grid");
                }
                let psd = psd.select(ndarray::Axis(0), &band.bin_indices);
                let r = localize_white(psd.view(), device, j, *budget, Exec::Serial)?;
                Ok((
                    DoAResult {
                        estimates_deg: r.azimuths_deg,
                        group_energies: Vec::new(),
                        energy_azimuths: Vec::new(),
                        stage: Stage::Coarse,
                        objective_trace: vec![r.residual],
                    },
                    None,
                ))
            }
            Estimator::Nmf(loc) => {
                let (coarse, refined) = loc.localize_magnitudes(loc.magnitudes(y)?.view(), j)?;
                Ok(match refined {
                    Some(r) => (r, Some(coarse)),
                    None => (coarse, None),
                })
            }
        }
    }
}

/// A batch of random scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub j: usize,
    /// `f64::INFINITY` for noiseless trials.
    pub snr_db: f64,
    pub trials: u64,
    pub seed: u64,
    /// Trial indices start here, so batches can be split and merged.
    #[serde(default)]
    pub first_trial: u64,
    /// Re-seed source content per trial. Off, every draw of a pool entry
    /// plays the same signal, which is what exact prototypes need.
    #[serde(default = "yes")]
    pub fresh_content: bool,
}

fn yes() -> bool {
    true
}

impl TrialPlan {
    pub fn scene(&self, trial: u64, pool: &[SourceSpec], d_fine: usize) -> Result<Scene> {
        let mut scene = random_scene(self.j, d_fine, pool, self.snr_db, trial_seed(self.seed, trial))?;
        if self.fresh_content {
            for (i, s) in scene.sources.iter_mut().enumerate() {
                s.seed = trial_seed(s.seed ^ scene.seed, i as u64);
            }
        }
        Ok(scene)
    }
}

/// Runs every trial of `plan`; records come back in trial order.
pub fn run_trials(
    plan: &TrialPlan,
    pool: &[SourceSpec],
    fine: &DirectionalResponseSet,
    estimator: &Estimator,
    exec: Exec,
) -> Result<Vec<TrialRecord>> {
    if plan.trials == 0 {
        return invalid("a batch needs at least one trial");
    }
    let ids: Vec<u64> = (plan.first_trial..plan.first_trial + plan.trials).collect();
    let results = exec.map(ids, |trial| -> Result<TrialRecord> {
        let scene = plan.scene(trial, pool, fine.n_directions())?;
        let y = render_mixture(&scene, fine)?;
        let t0 = Instant::now();
        let (result, coarse) = estimator.estimate(&y, plan.j)?;
        let timing_ms = t0.elapsed().as_secs_f64() * 1e3;
        Ok(TrialRecord {
            trial,
            j: plan.j,
            snr_db: plan.snr_db.is_finite().then_some(plan.snr_db),
            truth_deg: scene.azimuths_deg,
            estimates_deg: result.estimates_deg,
            group_energies: result.group_energies,
            stage: result.stage,
            coarse_estimates_deg: coarse.map(|c| c.estimates_deg),
            timing_ms,
        })
    });
    results.into_iter().collect()
}

/// Accuracy counts of a batch.
pub fn tally(records: &[TrialRecord], bin_width_deg: f64) -> Result<Tally> {
    let mut t = Tally::default();
    for r in records {
        t.add(&r.outcome(bin_width_deg)?, bin_width_deg);
    }
    Ok(t)
}

/// Magnitude spectrogram of a source on the full STFT grid.
pub fn source_spectrogram(spec: &SourceSpec, sample_rate: u32, window_len: usize) -> Result<TrainingSpectrogram> {
    let s = make_source(spec, sample_rate)?;
    Ok(TrainingSpectrogram {
        spectrogram: magnitude(&stft(&s, window_len, window_len / 2)?),
        speaker: spec.label.clone(),
    })
}

/// Spectrograms of many sources, in order.
pub fn source_spectrograms(
    specs: &[SourceSpec],
    sample_rate: u32,
    window_len: usize,
    exec: Exec,
) -> Result<Vec<TrainingSpectrogram>> {
    exec.map(specs.to_vec(), |s| source_spectrogram(&s, sample_rate, window_len))
        .into_iter()
        .collect()
}

/// One atom per source: its exact long-term magnitude spectrum.
pub fn prototypes_for(
    pool: &[SourceSpec],
    sample_rate: u32,
    window_len: usize,
    band: Option<&BandSelection>,
) -> Result<Dictionary> {
    let spectra = source_spectrograms(pool, sample_rate, window_len, Exec::Serial)?;
    prototype_dictionary(&spectra, band)
}
