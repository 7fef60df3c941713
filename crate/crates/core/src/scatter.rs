//! Directional response sets: the magnitude responses `|H_d|` a scattering
//! device imprints on sound arriving from each azimuth.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{invalid, Error, Result};
use crate::signal::freq_axis as dft_freq_axis;

const CONSISTENCY_TOL: f64 = 1e-9;
const AZIMUTH_TOL: f64 = 1e-6;

/// Per-direction magnitude responses on an STFT frequency grid, plus the
/// impulse responses they came from when available.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalResponseSet {
    azimuths_deg: Vec<f64>,
    /// `D x F`
    mags: Array2<f64>,
    freq_axis: Vec<f64>,
    impulse_responses: Option<Vec<Vec<f64>>>,
    label: String,
    sample_rate: u32,
    window_len: usize,
}

impl DirectionalResponseSet {
    /// Builds a set and checks every invariant, including agreement between
    /// `mags` and the DFT magnitudes of the impulse responses.
    pub fn new(
        azimuths_deg: Vec<f64>,
        mags: Array2<f64>,
        freq_axis: Vec<f64>,
        impulse_responses: Option<Vec<Vec<f64>>>,
        label: impl Into<String>,
        sample_rate: u32,
        window_len: usize,
    ) -> Result<Self> {
        let set = Self {
            azimuths_deg,
            mags,
            freq_axis,
            impulse_responses,
            label: label.into(),
            sample_rate,
            window_len,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.azimuths_deg.len();
        if d == 0 {
            return invalid("a response set needs at least one direction");
        }
        if self.sample_rate == 0 || self.window_len == 0 {
            return invalid("sample rate and window length must be positive");
        }
        if self
            .azimuths_deg
            .iter()
            .any(|a| !(0.0..360.0).contains(a))
        {
            return invalid("azimuths must lie in [0, 360)");
        }
        if self.azimuths_deg.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("azimuths must be strictly increasing");
        }
        if self.mags.dim() != (d, self.freq_axis.len()) {
            return invalid(format!(
                "mags are {:?}, expected ({d}, {})",
                self.mags.dim(),
                self.freq_axis.len()
            ));
        }
        if self.freq_axis.is_empty() || self.freq_axis.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("frequency axis must be nonempty and strictly increasing");
        }
        if self.mags.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("magnitudes must be finite and non-negative");
        }
        self.bin_indices()?;
        if let Some(irs) = &self.impulse_responses {
            if irs.len() != d {
                return invalid("one impulse response per direction is required");
            }
            self.check_consistency()?;
        }
        Ok(())
    }

    /// Indices of `freq_axis` entries on the full one-sided DFT grid.
    pub fn bin_indices(&self) -> Result<Vec<usize>> {
        let df = self.sample_rate as f64 / self.window_len as f64;
        let n_bins = self.window_len / 2 + 1;
        self.freq_axis
            .iter()
            .map(|&f| {
                let k = (f / df).round();
                if (k * df - f).abs() > 1e-6 * df || k < 0.0 || k as usize >= n_bins {
                    invalid(format!("frequency {f} Hz is not on the DFT grid"))
                } else {
                    Ok(k as usize)
                }
            })
            .collect()
    }

    /// Verifies `mags` against the DFT magnitudes of the stored impulse
    /// responses. A no-op when there are none.
    pub fn check_consistency(&self) -> Result<()> {
        let Some(irs) = &self.impulse_responses else {
            return Ok(());
        };
        let bins = self.bin_indices()?;
        let mut planner = FftPlanner::new();
        for (d, ir) in irs.iter().enumerate() {
            let full = ir_magnitudes(ir, self.window_len, &mut planner);
            let row = self.mags.row(d);
            let scale = row.iter().fold(0.0_f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
            for (&k, &m) in bins.iter().zip(row.iter()) {
                if (full[k] - m).abs() > CONSISTENCY_TOL * scale {
                    return invalid(format!(
                        "direction {d}: stored magnitude {m} disagrees with impulse response ({})",
                        full[k]
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn azimuths_deg(&self) -> &[f64] {
        &self.azimuths_deg
    }

    pub fn mags(&self) -> &Array2<f64> {
        &self.mags
    }

    pub fn response(&self, d: usize) -> ArrayView1<'_, f64> {
        self.mags.row(d)
    }

    /// Squared magnitudes `|H_d|^2`, `D x F`.
    pub fn power(&self) -> Array2<f64> {
        self.mags.mapv(|v| v * v)
    }

    pub fn freq_axis(&self) -> &[f64] {
        &self.freq_axis
    }

    pub fn impulse_responses(&self) -> Option<&[Vec<f64>]> {
        self.impulse_responses.as_deref()
    }

    pub fn impulse_response(&self, d: usize) -> Option<&[f64]> {
        self.impulse_responses.as_ref().map(|irs| irs[d].as_slice())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn n_directions(&self) -> usize {
        self.azimuths_deg.len()
    }

    pub fn n_bins(&self) -> usize {
        self.freq_axis.len()
    }

    /// Index of the direction at `azimuth_deg` (compared modulo 360).
    pub fn index_of(&self, azimuth_deg: f64) -> Option<usize> {
        let a = azimuth_deg.rem_euclid(360.0);
        self.azimuths_deg
            .iter()
            .position(|&b| circular_distance(a, b) < AZIMUTH_TOL)
    }

    /// Keeps the listed directions, in the listed order. The order must keep
    /// azimuths increasing.
    pub fn select_directions(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            rows.iter().map(|&r| self.azimuths_deg[r]).collect(),
            self.mags.select(Axis(0), rows),
            self.freq_axis.clone(),
            self.impulse_responses
                .as_ref()
                .map(|irs| rows.iter().map(|&r| irs[r].clone()).collect()),
            self.label.clone(),
            self.sample_rate,
            self.window_len,
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// CSV with one row per direction: azimuth then one column per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("azimuth_deg");
        for f in &self.freq_axis {
            write!(out, ",{f}").expect("writing to a String");
        }
        out.push('\n');
        for (az, row) in self.azimuths_deg.iter().zip(self.mags.rows()) {
            write!(out, "{az}").expect("writing to a String");
            for v in row {
                write!(out, ",{v}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_container(&self) -> Container {
        let mut matrices = vec![("mags".to_string(), self.mags.clone())];
        let mut ir_lengths = Vec::new();
        if let Some(irs) = &self.impulse_responses {
            let max_len = irs.iter().map(Vec::len).max().unwrap_or(0);
            let mut m = Array2::zeros((irs.len(), max_len));
            for (d, ir) in irs.iter().enumerate() {
                m.row_mut(d)
                    .slice_mut(ndarray::s![..ir.len()])
                    .assign(&ArrayView1::from(ir));
                ir_lengths.push(ir.len());
            }
            matrices.push(("irs".to_string(), m));
        }
        Container {
            kind: "device".into(),
            meta: serde_json::to_value(DeviceMeta {
                label: self.label.clone(),
                sample_rate: self.sample_rate,
                window_len: self.window_len,
                azimuths_deg: self.azimuths_deg.clone(),
                freq_axis: self.freq_axis.clone(),
                has_irs: self.impulse_responses.is_some(),
                ir_lengths,
            })
            .expect("device metadata serializes"),
            matrices,
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "device" {
            return Err(Error::Format(format!("expected a device file, got `{}`", c.kind)));
        }
        let meta: DeviceMeta = serde_json::from_value(c.meta.clone())?;
        let irs = if meta.has_irs {
            let m = c.matrix("irs")?;
            if m.nrows() != meta.ir_lengths.len() {
                return Err(Error::Format("impulse response count mismatch".into()));
            }
            Some(
                m.rows()
                    .into_iter()
                    .zip(&meta.ir_lengths)
                    .map(|(row, &len)| row.iter().take(len).copied().collect())
                    .collect(),
            )
        } else {
            None
        };
        Self::new(
            meta.azimuths_deg,
            c.matrix("mags")?.clone(),
            meta.freq_axis,
            irs,
            meta.label,
            meta.sample_rate,
            meta.window_len,
        )
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DeviceMeta {
    label: String,
    sample_rate: u32,
    window_len: usize,
    azimuths_deg: Vec<f64>,
    freq_axis: Vec<f64>,
    has_irs: bool,
    #[serde(default)]
    ir_lengths: Vec<usize>,
}

/// Absolute angular difference on the circle, in `[0, 180]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// `D` evenly spaced azimuths starting at 0.
pub fn uniform_grid(d: usize) -> Vec<f64> {
    (0..d).map(|i| i as f64 * 360.0 / d as f64).collect()
}

/// Full one-sided DFT magnitudes of an impulse response on a `window_len`
/// grid. Responses longer than the window are folded (time-aliased), which
/// evaluates the DTFT at the grid frequencies exactly.
fn ir_magnitudes(ir: &[f64], window_len: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf = vec![Complex64::default(); window_len];
    for (n, &v) in ir.iter().enumerate() {
        buf[n % window_len].re += v;
    }
    planner.plan_fft_forward(window_len).process(&mut buf);
    buf[..window_len / 2 + 1].iter().map(|c| c.norm()).collect()
}

/// Builds a set from measured impulse responses: `|H_d|` is the magnitude of
/// the DFT of each response zero-padded to `window_len`.
pub fn from_impulse_responses(
    irs: Vec<Vec<f64>>,
    azimuths_deg: Vec<f64>,
    sample_rate: u32,
    window_len: usize,
) -> Result<DirectionalResponseSet> {
    if irs.len() != azimuths_deg.len() {
        return invalid("need one impulse response per azimuth");
    }
    if irs.iter().any(Vec::is_empty) {
        return invalid("impulse responses must be nonempty");
    }
    if window_len == 0 || !window_len.is_multiple_of(2) {
        return invalid("window length must be positive and even");
    }
    if let Some(longest) = irs.iter().map(Vec::len).max().filter(|&l| l > window_len) {
        log::warn!(
            "impulse response of {longest} samples exceeds the {window_len}-sample window; \
             the narrowband model will be less accurate"
        );
    }
    let mut planner = FftPlanner::new();
    let f = window_len / 2 + 1;
    let mut mags = Array2::zeros((irs.len(), f));
    for (d, ir) in irs.iter().enumerate() {
        mags.row_mut(d)
            .assign(&Array1::from(ir_magnitudes(ir, window_len, &mut planner)));
    }
    DirectionalResponseSet::new(
        azimuths_deg,
        mags,
        dft_freq_axis(sample_rate, window_len),
        Some(irs),
        "measured",
        sample_rate,
        window_len,
    )
}

/// Minimum-phase impulse response (length `window_len`) whose DFT magnitude
/// equals the given one-sided magnitude response, via the folded real
/// cepstrum.
pub fn minimum_phase_ir(mag: ArrayView1<'_, f64>, window_len: usize) -> Vec<f64> {
    let n = window_len;
    assert_eq!(mag.len(), n / 2 + 1, "one-sided magnitude length");
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let k = if k <= n / 2 { k } else { n - k };
            Complex64::new(mag[k].max(1e-300).ln(), 0.0)
        })
        .collect();
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    for (i, c) in buf.iter_mut().enumerate() {
        let w = if i == 0 || i == n / 2 {
            1.0
        } else if i < n / 2 {
            2.0
        } else {
            0.0
        };
        *c = Complex64::new(c.re * scale * w, 0.0);
    }
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = c.exp();
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re * scale).collect()
}

/// Parameters of the synthetic scatterer generator.
///
/// The log-magnitude field is Gaussian noise smoothed over direction and
/// frequency, so that the field correlation at lag `t` is roughly
/// `exp(-t^2 / (2 l^2))` with `l` the roughness length on that axis. An
/// infinite length makes the field constant along that axis. The field is
/// scaled to a standard deviation of `depth_db` and exponentiated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererParams {
    pub n_directions: usize,
    pub sample_rate: u32,
    pub window_len: usize,
    pub flat_below_hz: f64,
    pub roughness_freq_hz: f64,
    pub roughness_dir_deg: f64,
    pub depth_db: f64,
    pub seed: u64,
}

impl ScattererParams {
    /// LEGO-like: flat below 3 kHz, strongly direction dependent above.
    pub const ROUGH_FLAT_BELOW_HZ: f64 = 3000.0;
    pub const ROUGH_FREQ_HZ: f64 = 100.0;
    pub const ROUGH_DIR_DEG: f64 = 25.0;
    pub const ROUGH_DEPTH_DB: f64 = 6.0;
    /// HRTF-like: responses vary slowly with direction.
    pub const SMOOTH_FLAT_BELOW_HZ: f64 = 1000.0;
    pub const SMOOTH_FREQ_HZ: f64 = 500.0;
    pub const SMOOTH_DIR_DEG: f64 = 90.0;
    pub const SMOOTH_DEPTH_DB: f64 = 6.0;

    pub fn rough(n_directions: usize, sample_rate: u32, window_len: usize, seed: u64) -> Self {
        Self {
            n_directions,
            sample_rate,
            window_len,
            flat_below_hz: Self::ROUGH_FLAT_BELOW_HZ,
            roughness_freq_hz: Self::ROUGH_FREQ_HZ,
            roughness_dir_deg: Self::ROUGH_DIR_DEG,
            depth_db: Self::ROUGH_DEPTH_DB,
            seed,
        }
    }

    pub fn smooth(n_directions: usize, sample_rate: u32, window_len: usize, seed: u64) -> Self {
        Self {
            n_directions,
            sample_rate,
            window_len,
            flat_below_hz: Self::SMOOTH_FLAT_BELOW_HZ,
            roughness_freq_hz: Self::SMOOTH_FREQ_HZ,
            roughness_dir_deg: Self::SMOOTH_DIR_DEG,
            depth_db: Self::SMOOTH_DEPTH_DB,
            seed,
        }
    }
}

/// Recovers `(sample_rate, window_len)` from a full one-sided DFT grid.
fn grid_params(freq_axis: &[f64]) -> Result<(u32, usize)> {
    if freq_axis.len() < 2 || freq_axis[0] != 0.0 {
        return invalid("frequency axis must be a full one-sided DFT grid starting at 0 Hz");
    }
    let window_len = 2 * (freq_axis.len() - 1);
    let sample_rate = (2.0 * freq_axis[freq_axis.len() - 1]).round() as u32;
    if dft_freq_axis(sample_rate, window_len)
        .iter()
        .zip(freq_axis)
        .any(|(a, b)| (a - b).abs() > 1e-9 * sample_rate as f64)
    {
        return invalid("frequency axis is not evenly spaced from 0 to Nyquist");
    }
    Ok((sample_rate, window_len))
}

/// Synthetic LEGO-like scatterer.
pub fn synth_rough_scatterer(
    d: usize,
    freq_axis: &[f64],
    flat_below_hz: f64,
    roughness_freq: f64,
    roughness_dir: f64,
    seed: u64,
) -> Result<DirectionalResponseSet> {
    if d < 2 {
        return invalid("a rough scatterer needs at least two directions");
    }
    let (sample_rate, window_len) = grid_params(freq_axis)?;
    synth_scatterer(&ScattererParams {
        n_directions: d,
        sample_rate,
        window_len,
        flat_below_hz,
        roughness_freq_hz: roughness_freq,
        roughness_dir_deg: roughness_dir,
        depth_db: ScattererParams::ROUGH_DEPTH_DB,
        seed,
    })
    .map(|s| s.with_label("synthetic-rough"))
}

/// Synthetic HRTF-like scatterer with slowly varying responses.
pub fn synth_smooth_scatterer(
    d: usize,
    freq_axis: &[f64],
    seed: u64,
) -> Result<DirectionalResponseSet> {
    let (sample_rate, window_len) = grid_params(freq_axis)?;
    synth_scatterer(&ScattererParams::smooth(d, sample_rate, window_len, seed))
        .map(|s| s.with_label("synthetic-smooth"))
}

pub fn synth_scatterer(p: &ScattererParams) -> Result<DirectionalResponseSet> {
    let d = p.n_directions;
    if d == 0 {
        return invalid("need at least one direction");
    }
    if p.window_len == 0 || !p.window_len.is_multiple_of(2) {
        return invalid("window length must be positive and even");
    }
    let freq = dft_freq_axis(p.sample_rate, p.window_len);
    let nyquist = *freq.last().expect("nonempty grid");
    if !(0.0..nyquist).contains(&p.flat_below_hz) {
        return invalid("flat_below_hz must lie in [0, Nyquist)");
    }
    if p.roughness_freq_hz <= 0.0 || p.roughness_dir_deg <= 0.0 || p.depth_db < 0.0 {
        return invalid("roughness lengths must be positive and depth non-negative");
    }
    let f = freq.len();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut field = Array2::from_shape_simple_fn((d, f), || StandardNormal.sample(&mut rng));

    let dir_sigma = p.roughness_dir_deg / SQRT_2 / (360.0 / d as f64);
    smooth_axis(&mut field, Axis(0), dir_sigma, true);
    let df = p.sample_rate as f64 / p.window_len as f64;
    let freq_sigma = p.roughness_freq_hz / SQRT_2 / df;
    smooth_axis(&mut field, Axis(1), freq_sigma, false);

    let first_rough = freq.iter().position(|&v| v >= p.flat_below_hz).unwrap_or(f);
    let rough = field.slice(ndarray::s![.., first_rough..]);
    let n = rough.len() as f64;
    let mean = rough.sum() / n;
    let std = (rough.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let target = p.depth_db * std::f64::consts::LN_10 / 20.0;
    let gain = if std > 1e-12 { target / std } else { 0.0 };

    let mags = Array2::from_shape_fn((d, f), |(i, k)| {
        if k < first_rough {
            1.0
        } else {
            ((field[[i, k]] - mean) * gain).exp()
        }
    });
    let irs = (0..d)
        .map(|i| minimum_phase_ir(mags.row(i), p.window_len))
        .collect();
    DirectionalResponseSet::new(
        uniform_grid(d),
        mags,
        freq,
        Some(irs),
        "synthetic",
        p.sample_rate,
        p.window_len,
    )
}

/// Gaussian smoothing of every lane along `axis`. Circular lanes wrap (with
/// periodic summation when the kernel is wider than the lane); open lanes
/// renormalize the truncated kernel at the edges. An infinite `sigma`
/// replaces each lane by its mean.
fn smooth_axis(field: &mut Array2<f64>, axis: Axis, sigma: f64, circular: bool) {
    if sigma < 1e-9 {
        return;
    }
    for mut lane in field.lanes_mut(axis) {
        let len = lane.len() as isize;
        if sigma.is_infinite() {
            let mean = lane.sum() / len as f64;
            lane.fill(mean);
            continue;
        }
        let reach = (4.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-reach..=reach)
            .map(|m| (-(m * m) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let src = lane.to_vec();
        for i in 0..len {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (m, w) in (-reach..=reach).zip(&kernel) {
                let j = i + m;
                let j = if circular {
                    j.rem_euclid(len)
                } else if (0..len).contains(&j) {
                    j
                } else {
                    continue;
                };
                acc += w * src[j as usize];
                wsum += w;
            }
            lane[i as usize] = acc / wsum;
        }
    }
}

/// Contiguous frequency band on a device grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    pub fmin: f64,
    pub fmax: f64,
    /// Indices into the frequency axis the band was selected from.
    pub bin_indices: Vec<usize>,
}

impl BandSelection {
    pub fn for_axis(freq_axis: &[f64], fmin: f64, fmax: f64) -> Result<Self> {
        if fmin.is_nan() || fmax.is_nan() || fmin > fmax {
            return invalid(format!("empty band {fmin}..{fmax} Hz"));
        }
        let bin_indices: Vec<usize> = freq_axis
            .iter()
            .enumerate()
            .filter(|(_, &f)| fmin <= f && f <= fmax)
            .map(|(k, _)| k)
            .collect();
        if bin_indices.is_empty() {
            return invalid(format!("band {fmin}..{fmax} Hz contains no bins"));
        }
        Ok(Self {
            fmin,
            fmax,
            bin_indices,
        })
    }

    /// The band on a full one-sided STFT grid.
    pub fn for_stft(sample_rate: u32, window_len: usize, fmin: f64, fmax: f64) -> Result<Self> {
        Self::for_axis(&dft_freq_axis(sample_rate, window_len), fmin, fmax)
    }

    pub fn len(&self) -> usize {
        self.bin_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_indices.is_empty()
    }
}

/// Restricts a set to `fmin <= f <= fmax`.
pub fn band_select(
    set: &DirectionalResponseSet,
    fmin: f64,
    fmax: f64,
) -> Result<(DirectionalResponseSet, BandSelection)> {
    let band = BandSelection::for_axis(&set.freq_axis, fmin, fmax)?;
    let restricted = DirectionalResponseSet {
        azimuths_deg: set.azimuths_deg.clone(),
        mags: set.mags.select(Axis(1), &band.bin_indices),
        freq_axis: band.bin_indices.iter().map(|&k| set.freq_axis[k]).collect(),
        impulse_responses: set.impulse_responses.clone(),
        label: set.label.clone(),
        sample_rate: set.sample_rate,
        window_len: set.window_len,
    };
    Ok((restricted, band))
}

/// Nearest-neighbour resampling of a set onto other azimuths. Used to
/// subsample a fine generation grid down to the model grid.
pub fn interpolate_to_grid(
    set: &DirectionalResponseSet,
    target_azimuths_deg: &[f64],
) -> Result<DirectionalResponseSet> {
    if target_azimuths_deg.is_empty() {
        return invalid("target grid is empty");
    }
    if target_azimuths_deg.iter().any(|a| !(0.0..360.0).contains(a)) {
        return invalid("target azimuths must lie in [0, 360)");
    }
    let rows: Vec<usize> = target_azimuths_deg
        .iter()
        .map(|&t| {
            set.azimuths_deg
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    circular_distance(t, *a.1)
                        .total_cmp(&circular_distance(t, *b.1))
                        .then(a.0.cmp(&b.0))
                })
                .map(|(i, _)| i)
                .expect("set has at least one direction")
        })
        .collect();
    DirectionalResponseSet::new(
        target_azimuths_deg.to_vec(),
        set.mags.select(Axis(0), &rows),
        set.freq_axis.clone(),
        set.impulse_responses
            .as_ref()
            .map(|irs| rows.iter().map(|&r| irs[r].clone()).collect()),
        set.label.clone(),
        set.sample_rate,
        set.window_len,
    )
}

/// Mean Pearson correlation between `|H_d|^2` rows over all direction pairs.
/// Rows with zero variance are skipped.
pub fn mean_pairwise_correlation(set: &DirectionalResponseSet) -> f64 {
    let rows: Vec<Vec<f64>> = set
        .power()
        .rows()
        .into_iter()
        .filter_map(|r| {
            let n = r.len() as f64;
            let mean = r.sum() / n;
            let centered: Vec<f64> = r.iter().map(|v| v - mean).collect();
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 0.0).then(|| centered.into_iter().map(|v| v / norm).collect())
        })
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            sum += rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>();
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

/// Mean cosine similarity between the magnitude responses of neighbouring
/// directions (circularly).
pub fn adjacent_cosine_similarity(set: &DirectionalResponseSet) -> f64 {
    let d = set.n_directions();
    if d < 2 {
        return 1.0;
    }
    let cos = |a: ArrayView1<f64>, b: ArrayView1<f64>| a.dot(&b) / (a.dot(&a) * b.dot(&b)).sqrt();
    (0..d)
        .map(|i| cos(set.response(i), set.response((i + 1) % d)))
        .sum::<f64>()
        / d as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn grid() -> Vec<f64> {
        dft_freq_axis(16000, 1024)
    }

    fn brute_dft_mag(ir: &[f64], n: usize) -> Vec<f64> {
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in ir.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn delta_and_delay_are_flat() {
        let mut delay = vec![0.0; 40];
        delay[39] = 1.0;
        let set =
            from_impulse_responses(vec![vec![1.0], delay], vec![0.0, 90.0], 16000, 1024).unwrap();
        assert_eq!(set.n_bins(), 513);
        for v in set.mags().iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ir_magnitudes_match_brute_force_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ir: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let set = from_impulse_responses(vec![ir.clone()], vec![0.0], 16000, 1024).unwrap();
        let oracle = brute_dft_mag(&ir, 1024);
        for (a, b) in set.response(0).iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn long_ir_is_accepted() {
        let set = from_impulse_responses(vec![vec![0.5; 1500]], vec![0.0], 16000, 1024).unwrap();
        let oracle = brute_dft_mag(&vec![0.5; 1500], 1024);
        for (a, b) in set.response(0).iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn construction_rejects_inconsistent_mags() {
        let set = from_impulse_responses(vec![vec![1.0, 0.5]], vec![0.0], 16000, 1024).unwrap();
        let mut mags = set.mags().clone();
        mags[[0, 10]] *= 1.0 + 1e-6;
        let r = DirectionalResponseSet::new(
            vec![0.0],
            mags,
            grid(),
            Some(vec![vec![1.0, 0.5]]),
            "x",
            16000,
            1024,
        );
        assert!(r.is_err());
    }

    #[test]
    fn construction_rejects_bad_azimuths() {
        let mags = Array2::ones((2, 513));
        for az in [vec![10.0, 5.0], vec![0.0, 360.0], vec![-1.0, 5.0]] {
            assert!(
                DirectionalResponseSet::new(az, mags.clone(), grid(), None, "x", 16000, 1024)
                    .is_err()
            );
        }
    }

    #[test]
    fn minimum_phase_reproduces_magnitude() {
        let set = synth_scatterer(&ScattererParams::rough(8, 16000, 1024, 1)).unwrap();
        set.check_consistency().unwrap();
        let ir = set.impulse_response(3).unwrap();
        let oracle = brute_dft_mag(ir, 1024);
        for (a, b) in set.response(3).iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
        // Minimum phase puts most of the energy up front.
        let total: f64 = ir.iter().map(|v| v * v).sum();
        let head: f64 = ir[..256].iter().map(|v| v * v).sum();
        assert!(head / total > 0.99, "head energy {}", head / total);
    }

    #[test]
    fn rough_flat_region() {
        let set = synth_rough_scatterer(36, &grid(), 3000.0, 200.0, 7.0, 5).unwrap();
        for row in set.mags().rows() {
            for k in 0..192 {
                assert!((row[k] - 1.0).abs() < 1e-9);
            }
            assert!(row.iter().skip(192).any(|v| (v - 1.0).abs() > 1e-3));
        }
    }

    #[test]
    fn rough_rows_are_weakly_correlated() {
        let set = synth_rough_scatterer(36, &grid(), 3000.0, 200.0, 7.0, 11).unwrap();
        let (upper, _) = band_select(&set, 3000.0, 8000.0).unwrap();
        let c = mean_pairwise_correlation(&upper);
        assert!(c < 0.5, "mean pairwise correlation {c}");
    }

    #[test]
    fn smooth_neighbours_are_similar() {
        let smooth = synth_smooth_scatterer(36, &grid(), 11).unwrap();
        let s = adjacent_cosine_similarity(&smooth);
        assert!(s >= 0.95, "adjacent similarity {s}");
        let rough = synth_rough_scatterer(36, &grid(), 3000.0, 200.0, 7.0, 11).unwrap();
        let (ru, _) = band_select(&rough, 1000.0, 8000.0).unwrap();
        let (su, _) = band_select(&smooth, 1000.0, 8000.0).unwrap();
        assert!(mean_pairwise_correlation(&ru) < mean_pairwise_correlation(&su));
        assert!(adjacent_cosine_similarity(&rough) < s);
    }

    #[test]
    fn single_direction_smooth_set() {
        let set = synth_smooth_scatterer(1, &grid(), 2).unwrap();
        assert_eq!(set.n_directions(), 1);
        assert_eq!(set.azimuths_deg(), &[0.0]);
    }

    #[test]
    fn infinite_roughness_gives_identical_directions() {
        let set =
            synth_rough_scatterer(12, &grid(), 0.0, f64::INFINITY, f64::INFINITY, 4).unwrap();
        for row in set.mags().rows() {
            for (a, b) in row.iter().zip(set.response(0).iter()) {
                assert_eq!(a, b);
            }
        }
        // Infinite in direction only still gives identical rows.
        let set = synth_rough_scatterer(12, &grid(), 0.0, 200.0, f64::INFINITY, 4).unwrap();
        for row in set.mags().rows() {
            for (a, b) in row.iter().zip(set.response(0).iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = synth_scatterer(&ScattererParams::rough(36, 16000, 1024, 9)).unwrap();
        let b = synth_scatterer(&ScattererParams::rough(36, 16000, 1024, 9)).unwrap();
        assert_eq!(a, b);
        let c = synth_scatterer(&ScattererParams::rough(36, 16000, 1024, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn band_selection_bins() {
        let set = synth_scatterer(&ScattererParams::rough(4, 16000, 1024, 1)).unwrap();
        let (sub, band) = band_select(&set, 3000.0, 8000.0).unwrap();
        assert_eq!(band.bin_indices, (192..=512).collect::<Vec<_>>());
        assert_eq!(sub.n_bins(), 321);
        sub.validate().unwrap();
        let (full, band) = band_select(&set, 0.0, 8000.0).unwrap();
        assert_eq!(band.len(), 513);
        assert_eq!(full, set);
        assert!(band_select(&set, 5000.0, 4000.0).is_err());
        assert!(band_select(&set, 100.0, 105.0).is_err());
        let (again, _) = band_select(&sub, 3000.0, 8000.0).unwrap();
        assert_eq!(again, sub);
    }

    #[test]
    fn subsampling() {
        let fine = synth_scatterer(&ScattererParams::rough(360, 16000, 256, 2)).unwrap();
        let same = interpolate_to_grid(&fine, fine.azimuths_deg()).unwrap();
        assert_eq!(same, fine);
        let coarse = interpolate_to_grid(&fine, &uniform_grid(36)).unwrap();
        for (i, row) in coarse.mags().rows().into_iter().enumerate() {
            assert_eq!(row, fine.response(10 * i));
        }
        let coarser = interpolate_to_grid(&coarse, &uniform_grid(12)).unwrap();
        assert_eq!(coarser, interpolate_to_grid(&fine, &uniform_grid(12)).unwrap());
    }

    #[test]
    fn index_lookup_wraps() {
        let set = synth_scatterer(&ScattererParams::rough(36, 16000, 256, 2)).unwrap();
        assert_eq!(set.index_of(20.0), Some(2));
        assert_eq!(set.index_of(380.0), Some(2));
        assert_eq!(set.index_of(-10.0), Some(35));
        assert_eq!(set.index_of(25.0), None);
    }

    #[test]
    fn device_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dev.bin");
        let set = synth_scatterer(&ScattererParams::rough(36, 16000, 1024, 3)).unwrap();
        set.write(&path).unwrap();
        assert_eq!(DirectionalResponseSet::read(&path).unwrap(), set);

        let (sub, _) = band_select(&set, 3000.0, 8000.0).unwrap();
        sub.write(&path).unwrap();
        assert_eq!(DirectionalResponseSet::read(&path).unwrap(), sub);

        let csv = set.to_csv();
        assert_eq!(csv.lines().count(), 37);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 514);
    }
}
