//! Time-domain and time-frequency primitives.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// A sampled mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl TimeSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return invalid("sample rate must be positive");
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return invalid("signal contains non-finite samples");
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn norm(&self) -> f64 {
        l2(&self.samples)
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Scales the signal so its peak absolute value is one. Silent signals are
    /// returned unchanged.
    pub fn peak_normalized(&self) -> Self {
        let peak = self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        if peak > 0.0 {
            self.scaled(1.0 / peak)
        } else {
            self.clone()
        }
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// STFT output: one-sided complex spectra, `F x N` (bins x frames).
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub bins: Array2<Complex64>,
    pub freq_axis: Vec<f64>,
    pub frame_hop: usize,
    pub window_len: usize,
    pub sample_rate: u32,
}

/// Non-negative magnitude spectrogram, `F x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagSpectrogram {
    pub values: Array2<f64>,
    pub freq_axis: Vec<f64>,
}

impl MagSpectrogram {
    pub fn new(values: Array2<f64>, freq_axis: Vec<f64>) -> Result<Self> {
        if values.nrows() != freq_axis.len() {
            return invalid(format!(
                "spectrogram has {} rows but {} frequencies",
                values.nrows(),
                freq_axis.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("magnitude spectrogram entries must be finite and non-negative");
        }
        Ok(Self { values, freq_axis })
    }

    pub fn n_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps only the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            freq_axis: rows.iter().map(|&r| self.freq_axis[r]).collect(),
        }
    }
}

/// Frequencies of the one-sided DFT grid, `window_len / 2 + 1` bins.
pub fn freq_axis(sample_rate: u32, window_len: usize) -> Vec<f64> {
    let df = sample_rate as f64 / window_len as f64;
    (0..=window_len / 2).map(|k| k as f64 * df).collect()
}

/// Periodic Hann window. With a hop of half the window the shifted copies sum
/// to exactly one.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Window length in samples for a duration, e.g. 64 ms at 16 kHz is 1024.
pub fn window_len_for(sample_rate: u32, duration_s: f64) -> usize {
    (sample_rate as f64 * duration_s).round() as usize
}

const DIRECT_CONV_LIMIT: usize = 1 << 14;

/// Full linear convolution, output length `len(x) + len(h) - 1`.
pub fn convolve(x: &TimeSignal, h: &[f64]) -> Result<TimeSignal> {
    if x.is_empty() || h.is_empty() {
        return invalid("convolution inputs must be nonempty");
    }
    let samples = if x.len().min(h.len()) <= 32 || x.len() * h.len() <= DIRECT_CONV_LIMIT {
        convolve_direct(x.samples(), h)
    } else {
        convolve_fft(x.samples(), h)
    };
    TimeSignal::new(samples, x.sample_rate())
}

fn convolve_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}

fn convolve_fft(x: &[f64], h: &[f64]) -> Vec<f64> {
    let out_len = x.len() + h.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut a: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    a.resize(n, Complex64::default());
    let mut b: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    b.resize(n, Complex64::default());
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Adds white Gaussian noise scaled so that `20 log10(|clean| / |noise|)`
/// equals `snr_db` for the realized noise. `f64::INFINITY` means no noise.
pub fn add_noise_at_snr(clean: &TimeSignal, snr_db: f64, seed: u64) -> Result<TimeSignal> {
    if snr_db.is_nan() {
        return invalid("SNR must not be NaN");
    }
    if snr_db == f64::INFINITY {
        return Ok(clean.clone());
    }
    let clean_norm = clean.norm();
    if clean_norm == 0.0 {
        return invalid("SNR undefined for an all-zero signal");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..clean.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise_norm = l2(&noise);
    let target = clean_norm / 10f64.powf(snr_db / 20.0);
    let gain = target / noise_norm;
    let samples = clean
        .samples()
        .iter()
        .zip(&noise)
        .map(|(s, e)| s + gain * e)
        .collect();
    TimeSignal::new(samples, clean.sample_rate())
}

/// Number of frames after zero-padding the tail to complete the last frame.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> usize {
    if len <= window_len {
        1
    } else {
        (len - window_len).div_ceil(hop) + 1
    }
}

/// Hann-windowed STFT with one-sided spectra. No normalization is applied to
/// the DFT.
pub fn stft(x: &TimeSignal, window_len: usize, hop: usize) -> Result<ComplexSpectrogram> {
    if window_len == 0 || !window_len.is_multiple_of(2) {
        return invalid("window length must be positive and even");
    }
    if hop == 0 || hop > window_len {
        return invalid("hop must be in 1..=window_len");
    }
    let n_frames = frame_count(x.len(), window_len, hop);
    let n_bins = window_len / 2 + 1;
    let window = hann_window(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_len);

    let samples = x.samples();
    let mut bins = Array2::<Complex64>::zeros((n_bins, n_frames));
    let mut buf = vec![Complex64::default(); window_len];
    for frame in 0..n_frames {
        let start = frame * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = samples.get(start + i).copied().unwrap_or(0.0);
            *slot = Complex64::new(v * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, v) in buf[..n_bins].iter().enumerate() {
            bins[[k, frame]] = *v;
        }
    }
    Ok(ComplexSpectrogram {
        bins,
        freq_axis: freq_axis(x.sample_rate(), window_len),
        frame_hop: hop,
        window_len,
        sample_rate: x.sample_rate(),
    })
}

pub fn magnitude(s: &ComplexSpectrogram) -> MagSpectrogram {
    MagSpectrogram {
        values: s.bins.mapv(|c| c.norm()),
        freq_axis: s.freq_axis.clone(),
    }
}

/// Per-bin mean of squared magnitudes over frames.
pub fn empirical_psd(s: &ComplexSpectrogram) -> Array1<f64> {
    let n = s.bins.ncols().max(1) as f64;
    s.bins
        .map_axis(Axis(1), |row| row.iter().map(|c| c.norm_sqr()).sum::<f64>() / n)
}

/// Reads a PCM16 or float32 WAV file. Multichannel files are reduced to their
/// first channel.
pub fn read_wav(path: impl AsRef<Path>) -> Result<TimeSignal> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(crate::Error::Format(format!(
                "unsupported WAV sample format {fmt:?}/{bits} bits"
            )))
        }
    };
    let samples = interleaved.into_iter().step_by(channels).collect();
    TimeSignal::new(samples, spec.sample_rate)
}

/// Writes a mono float32 WAV file.
pub fn write_wav(path: impl AsRef<Path>, x: &TimeSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: x.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in x.samples() {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}
