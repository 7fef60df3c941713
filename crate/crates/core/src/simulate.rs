//! Synthetic sources and noisy monaural mixtures.
//!
//! Mixtures are rendered in the time domain (convolution with impulse
//! responses from a fine direction grid) so that the STFT-domain model used by
//! the localizers is only an approximation of the data, never its generator.

use std::f64::consts::{LN_10, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scatter::{circular_distance, DirectionalResponseSet};
use crate::signal::{add_noise_at_snr, convolve, TimeSignal};

/// Female-like fundamental frequency range in Hz.
pub const FEMALE_F0: (f64, f64) = (165.0, 255.0);
/// Male-like fundamental frequency range in Hz.
pub const MALE_F0: (f64, f64) = (85.0, 155.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SourceKind {
    White,
    /// Noise through a fixed random magnitude envelope drawn from
    /// `envelope_seed`; the noise itself comes from the spec seed.
    PrototypeColored { envelope_seed: u64 },
    /// Voiced-speech stand-in: syllables of harmonics of `f0` under random
    /// formant envelopes, with occasional unvoiced bursts and pauses.
    HarmonicSpeaker {
        f0: f64,
        tilt_db_per_octave: f64,
        /// Relative f0 excursion per syllable; zero keeps every harmonic at
        /// an exact multiple of `f0`.
        #[serde(default)]
        intonation: f64,
        /// Formant frequency scale (vocal tract length).
        #[serde(default = "one")]
        formant_scale: f64,
        /// Aspiration noise to harmonic power ratio at 4 kHz in voiced
        /// segments; the ratio grows with the square of frequency below that.
        #[serde(default)]
        aspiration: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub duration_s: f64,
    pub seed: u64,
    /// Free-form label, e.g. speaker identity.
    #[serde(default)]
    pub label: String,
}

impl SourceSpec {
    pub fn white(duration_s: f64, seed: u64) -> Self {
        Self {
            kind: SourceKind::White,
            duration_s,
            seed,
            label: "white".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeakerClass {
    Female,
    Male,
}

/// Aspiration level used by [`synthetic_speaker`].
pub const SPEAKER_ASPIRATION: f64 = 1.0;

/// A synthetic speaker: f0, spectral tilt and formant scale drawn from the
/// class ranges. `identity` picks the speaker, `utterance_seed` the content.
pub fn synthetic_speaker(
    class: SpeakerClass,
    identity: u64,
    duration_s: f64,
    utterance_seed: u64,
) -> SourceSpec {
    let salt = match class {
        SpeakerClass::Female => 0xF0_F0,
        SpeakerClass::Male => 0x0A_0A,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(identity ^ (salt << 32));
    let ((lo, hi), tilt, scale) = match class {
        SpeakerClass::Female => (FEMALE_F0, (-5.0, -3.0), (1.05, 1.2)),
        SpeakerClass::Male => (MALE_F0, (-7.0, -5.0), (0.9, 1.02)),
    };
    let f0 = rng.random_range(lo..=hi);
    let tilt_db_per_octave = rng.random_range(tilt.0..=tilt.1);
    let formant_scale = rng.random_range(scale.0..=scale.1);
    let tag = match class {
        SpeakerClass::Female => "f",
        SpeakerClass::Male => "m",
    };
    SourceSpec {
        kind: SourceKind::HarmonicSpeaker {
            f0,
            tilt_db_per_octave,
            intonation: 0.04,
            formant_scale,
            aspiration: SPEAKER_ASPIRATION,
        },
        duration_s,
        seed: utterance_seed,
        label: format!("{tag}{identity}"),
    }
}

/// Speakers `0..n_female` and `0..n_male` of each class, identities offset by
/// `first_identity`, one utterance each.
pub fn speaker_corpus(
    n_female: usize,
    n_male: usize,
    first_identity: u64,
    duration_s: f64,
    seed: u64,
) -> Vec<SourceSpec> {
    let mut out = Vec::with_capacity(n_female + n_male);
    for (class, n) in [(SpeakerClass::Female, n_female), (SpeakerClass::Male, n_male)] {
        for i in 0..n as u64 {
            let id = first_identity + i;
            out.push(synthetic_speaker(
                class,
                id,
                duration_s,
                seed.wrapping_mul(0x9E37_79B9)
                    .wrapping_add(id)
                    .wrapping_add(class as u64 * 0x1_0000_0000),
            ));
        }
    }
    out
}

pub fn make_source(spec: &SourceSpec, sample_rate: u32) -> Result<TimeSignal> {
    if !(spec.duration_s > 0.0) {
        return invalid("source duration must be positive");
    }
    let n = (spec.duration_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = match &spec.kind {
        SourceKind::White => gaussian(&mut rng, n),
        SourceKind::PrototypeColored { envelope_seed } => {
            colored_noise(&mut rng, n, sample_rate, *envelope_seed)
        }
        SourceKind::HarmonicSpeaker {
            f0,
            tilt_db_per_octave,
            intonation,
            formant_scale,
            aspiration,
        } => {
            if !(*f0 > 0.0) {
                return invalid("f0 must be positive");
            }
            harmonic_speech(
                &mut rng,
                n,
                sample_rate as f64,
                *f0,
                *tilt_db_per_octave,
                *intonation,
                *formant_scale,
                *aspiration,
            )
        }
    };
    TimeSignal::new(samples, sample_rate)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn colored_noise(rng: &mut ChaCha8Rng, n: usize, sample_rate: u32, envelope_seed: u64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let noise = gaussian(rng, n);
    // Envelope: a handful of random log-gain control points interpolated
    // linearly on a 500 Hz lattice, fixed by `envelope_seed`.
    let mut env_rng = ChaCha8Rng::seed_from_u64(envelope_seed);
    let nyquist = sample_rate as f64 / 2.0;
    let n_points = (nyquist / 500.0).ceil() as usize + 1;
    let points: Vec<f64> = (0..n_points)
        .map(|_| env_rng.random_range(-12.0..12.0) * LN_10 / 20.0)
        .collect();
    let envelope = |f: f64| {
        let x = f / 500.0;
        let i = (x.floor() as usize).min(n_points - 2);
        let t = x - i as f64;
        ((1.0 - t) * points[i] + t * points[i + 1]).exp()
    };
    let mut buf: Vec<Complex64> = noise.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = k.min(n - k);
        *c *= envelope(kk as f64 * sample_rate as f64 / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn taper(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn harmonic_speech(
    rng: &mut ChaCha8Rng,
    n: usize,
    fs: f64,
    f0: f64,
    tilt_db_per_octave: f64,
    intonation: f64,
    formant_scale: f64,
    aspiration: f64,
) -> Vec<f64> {
    const BASE_FORMANTS: [(f64, f64); 4] = [
        (300.0, 850.0),
        (850.0, 2300.0),
        (2200.0, 3200.0),
        (3300.0, 4500.0),
    ];
    let nyquist = fs / 2.0;
    let ramp = (0.015 * fs) as usize;
    let mut out = vec![0.0; n];
    let mut planner = FftPlanner::new();
    let mut pos = 0;
    while pos < n {
        let len = (rng.random_range(0.12..0.25) * fs) as usize;
        let end = (pos + len).min(n);
        let seg = end - pos;
        let roll: f64 = rng.random();
        if roll < 0.08 {
            // Short pause.
            pos = end.min(pos + seg / 3 + 1);
            continue;
        }
        let gain = rng.random_range(0.4..1.0);
        if roll < 0.25 {
            // Unvoiced burst: pre-emphasized noise, mostly high frequency.
            let mut prev = 0.0;
            for t in 0..seg {
                let x: f64 = StandardNormal.sample(rng);
                let y = x - 0.9 * prev;
                prev = x;
                out[pos + t] += 0.08 * gain * taper(t, seg, ramp) * y;
            }
            pos = end;
            continue;
        }
        let f_start = f0 * (1.0 + intonation * rng.random_range(-1.0..1.0));
        let f_end = f0 * (1.0 + intonation * rng.random_range(-1.0..1.0));
        let formants: Vec<(f64, f64, f64)> = BASE_FORMANTS
            .iter()
            .map(|&(lo, hi)| {
                (
                    formant_scale * rng.random_range(lo..hi),
                    rng.random_range(80.0..250.0),
                    rng.random_range(0.3..1.0),
                )
            })
            .collect();
        let envelope = |f: f64| {
            0.05 + formants
                .iter()
                .map(|&(fc, bw, w)| w / (1.0 + ((f - fc) / (0.5 * bw)).powi(2)))
                .sum::<f64>()
        };
        let f_hi = f_start.max(f_end);
        let dur = seg as f64 / fs;
        let mut k = 1usize;
        while k as f64 * f_hi < 0.98 * nyquist {
            let kf = k as f64;
            let mean_f = kf * 0.5 * (f_start + f_end);
            let amp = 10f64.powf(tilt_db_per_octave * kf.log2() / 20.0) * envelope(mean_f);
            let phase0 = rng.random_range(0.0..2.0 * PI);
            for t in 0..seg {
                let tau = t as f64 / fs;
                let phi = 2.0 * PI * kf * (f_start * tau + (f_end - f_start) * tau * tau / (2.0 * dur));
                out[pos + t] += gain * amp * taper(t, seg, ramp) * (phi + phase0).sin();
            }
            k += 1;
        }
        if aspiration > 0.0 && seg > 1 {
            let f_mid = 0.5 * (f_start + f_end);
            let scale = (aspiration * fs / (4.0 * f_mid)).sqrt();
            let mut buf: Vec<Complex64> = (0..seg)
                .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
                .collect();
            planner.plan_fft_forward(seg).process(&mut buf);
            for (i, c) in buf.iter_mut().enumerate() {
                let f = i.min(seg - i) as f64 * fs / seg as f64;
                let h = (f / f_mid).max(1.0);
                let amp = 10f64.powf(tilt_db_per_octave * h.log2() / 20.0) * envelope(f);
                *c *= scale * amp * (f / 4000.0).min(2.0);
            }
            planner.plan_fft_inverse(seg).process(&mut buf);
            for (t, c) in buf.iter().enumerate() {
                out[pos + t] += gain * taper(t, seg, ramp) * c.re / seg as f64;
            }
        }
        pos = end;
    }
    out
}

/// A multi-source scene on the fine direction grid. Serializes to the JSON
/// scene-batch format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub azimuths_deg: Vec<f64>,
    pub sources: Vec<SourceSpec>,
    /// `f64::INFINITY` (serialized as `null`) disables noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub seed: u64,
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.azimuths_deg.is_empty() {
            return invalid("a scene needs at least one source");
        }
        if self.azimuths_deg.len() != self.sources.len() {
            return invalid("one azimuth per source is required");
        }
        for (i, a) in self.azimuths_deg.iter().enumerate() {
            if self.azimuths_deg[..i]
                .iter()
                .any(|b| circular_distance(*a, *b) < 1e-9)
            {
                return invalid("scene azimuths must be distinct");
            }
        }
        Ok(())
    }
}

/// Draws `j` distinct azimuths uniformly from a `d_fine`-point grid and `j`
/// sources from `pool` (distinct when the pool is large enough).
pub fn random_scene(
    j: usize,
    d_fine: usize,
    pool: &[SourceSpec],
    snr_db: f64,
    seed: u64,
) -> Result<Scene> {
    if j == 0 || j > d_fine {
        return invalid(format!("need 1 <= J <= {d_fine}, got {j}"));
    }
    if pool.is_empty() {
        return invalid("source pool is empty");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = rand::seq::index::sample(&mut rng, d_fine, j);
    let azimuths_deg = dirs
        .iter()
        .map(|i| i as f64 * 360.0 / d_fine as f64)
        .collect();
    let sources = if pool.len() >= j {
        rand::seq::index::sample(&mut rng, pool.len(), j)
            .iter()
            .map(|i| pool[i].clone())
            .collect()
    } else {
        (0..j)
            .map(|_| pool[rng.random_range(0..pool.len())].clone())
            .collect()
    };
    Ok(Scene {
        azimuths_deg,
        sources,
        snr_db,
        seed,
    })
}

/// Renders `y = sum_j s_j * h(theta_j) + e`. Sources are truncated to the
/// shortest one and peak-normalized before convolution; noise is white
/// Gaussian at the scene SNR relative to the noiseless mixture.
pub fn render_mixture(scene: &Scene, fine: &DirectionalResponseSet) -> Result<TimeSignal> {
    let sources = scene
        .sources
        .iter()
        .map(|s| make_source(s, fine.sample_rate()))
        .collect::<Result<Vec<_>>>()?;
    render_signals(&scene.azimuths_deg, &sources, scene.snr_db, scene.seed, fine)
}

/// As [`render_mixture`] with already synthesized source signals.
pub fn render_signals(
    azimuths_deg: &[f64],
    sources: &[TimeSignal],
    snr_db: f64,
    seed: u64,
    fine: &DirectionalResponseSet,
) -> Result<TimeSignal> {
    if azimuths_deg.is_empty() || azimuths_deg.len() != sources.len() {
        return invalid("need one azimuth per source and at least one source");
    }
    if sources.iter().any(|s| s.sample_rate() != fine.sample_rate()) {
        return invalid("sources and responses must share a sample rate");
    }
    let Some(irs) = fine.impulse_responses() else {
        return invalid("rendering needs impulse responses");
    };
    let shortest = sources.iter().map(TimeSignal::len).min().unwrap_or(0);
    if shortest == 0 {
        return invalid("sources must be nonempty");
    }
    let mut mix: Vec<f64> = Vec::new();
    for (&az, src) in azimuths_deg.iter().zip(sources) {
        let d = fine
            .index_of(az)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("azimuth {az} is not on the fine grid")))?;
        let s = src.truncated(shortest).peak_normalized();
        let y = convolve(&s, &irs[d])?;
        if mix.len() < y.len() {
            mix.resize(y.len(), 0.0);
        }
        for (m, v) in mix.iter_mut().zip(y.samples()) {
            *m += v;
        }
    }
    let clean = TimeSignal::new(mix, fine.sample_rate())?;
    add_noise_at_snr(&clean, snr_db, seed ^ 0x5EED_0F_A015E)
}
