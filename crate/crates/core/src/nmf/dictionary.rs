use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Divergence;
use crate::container::Container;
use crate::error::{invalid, Error, Result};
use crate::scatter::BandSelection;
use crate::signal::MagSpectrogram;

const FLOOR: f64 = 1e-20;

/// Source dictionary `W`, `F x K`, with unit-norm columns after learning.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atoms: Array2<f64>,
    /// Source label of every atom.
    pub atom_meta: Vec<String>,
    pub freq_axis: Vec<f64>,
}

impl Dictionary {
    pub fn new(atoms: Array2<f64>, atom_meta: Vec<String>, freq_axis: Vec<f64>) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return invalid("dictionary is empty");
        }
        if atom_meta.len() != atoms.ncols() || freq_axis.len() != atoms.nrows() {
            return invalid(format!(
                "dictionary is {}x{} but has {} labels and {} frequencies",
                atoms.nrows(),
                atoms.ncols(),
                atom_meta.len(),
                freq_axis.len()
            ));
        }
        if atoms.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("dictionary atoms must be finite and non-negative");
        }
        if let Some(c) = atoms.columns().into_iter().position(|c| c.iter().all(|v| *v == 0.0)) {
            return invalid(format!("dictionary atom {c} is all zero"));
        }
        Ok(Self {
            atoms,
            atom_meta,
            freq_axis,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn n_bins(&self) -> usize {
        self.atoms.nrows()
    }

    /// Keeps only the given frequency rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.iter().any(|&r| r >= self.n_bins()) {
            return invalid("row index out of range");
        }
        Self::new(
            self.atoms.select(Axis(0), rows),
            self.atom_meta.clone(),
            rows.iter().map(|&r| self.freq_axis[r]).collect(),
        )
    }

    /// Restricts a full-grid dictionary to a band. A dictionary already on
    /// the band grid is returned unchanged.
    pub fn restricted_to(&self, band: &BandSelection) -> Result<Self> {
        if self.n_bins() == band.len() {
            return Ok(self.clone());
        }
        self.select_rows(&band.bin_indices)
    }

    pub fn to_container(&self) -> Container {
        Container {
            kind: "dictionary".into(),
            meta: serde_json::to_value(DictionaryMeta {
                atom_meta: self.atom_meta.clone(),
                freq_axis: self.freq_axis.clone(),
            })
            .expect("dictionary metadata serializes"),
            matrices: vec![("atoms".into(), self.atoms.clone())],
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "dictionary" {
            return Err(Error::Format(format!(
                "expected a dictionary file, got `{}`",
                c.kind
            )));
        }
        let meta: DictionaryMeta = serde_json::from_value(c.meta.clone())?;
        Self::new(c.matrix("atoms")?.clone(), meta.atom_meta, meta.freq_axis)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().write(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DictionaryMeta {
    atom_meta: Vec<String>,
    freq_axis: Vec<f64>,
}

/// One training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSpectrogram {
    pub spectrogram: MagSpectrogram,
    pub speaker: String,
}

fn restrict(s: &MagSpectrogram, band: Option<&BandSelection>) -> Result<MagSpectrogram> {
    match band {
        None => Ok(s.clone()),
        Some(b) => {
            if b.bin_indices.iter().any(|&r| r >= s.n_bins()) {
                return invalid("band exceeds the spectrogram's frequency grid");
            }
            Ok(s.select_rows(&b.bin_indices))
        }
    }
}

fn check_grid(items: &[MagSpectrogram]) -> Result<()> {
    let first = &items[0].freq_axis;
    if items
        .iter()
        .any(|s| s.freq_axis.len() != first.len() || s.freq_axis.iter().zip(first).any(|(a, b)| (a - b).abs() > 1e-9))
    {
        return invalid("training spectrograms use different frequency grids");
    }
    Ok(())
}

fn normalize_columns(w: &mut Array2<f64>) {
    for mut c in w.columns_mut() {
        let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            c /= n;
        }
    }
}

/// Plain NMF `V ~ W H` by multiplicative updates, both factors free.
fn nmf(v: ArrayView2<'_, f64>, k: usize, divergence: Divergence, iters: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (f, n) = v.dim();
    let scale = v.mean().unwrap_or(1.0).max(FLOOR).sqrt();
    let mut w = Array2::from_shape_fn((f, k), |_| scale * rng.random_range(0.5..1.5));
    let mut h = Array2::from_shape_fn((k, n), |_| scale * rng.random_range(0.5..1.5));
    let v = match divergence {
        Divergence::ItakuraSaito => v.mapv(|x| x.max(FLOOR)),
        Divergence::Euclidean => v.to_owned(),
    };
    for _ in 0..iters {
        match divergence {
            Divergence::Euclidean => {
                let num = w.t().dot(&v);
                let den = w.t().dot(&w).dot(&h);
                h.zip_mut_with(&(num / den.mapv(|x| x.max(FLOOR))), |x, r| *x = (*x * r).max(FLOOR));
                let num = v.dot(&h.t());
                let den = w.dot(&h.dot(&h.t()));
                w.zip_mut_with(&(num / den.mapv(|x| x.max(FLOOR))), |x, r| *x = (*x * r).max(FLOOR));
            }
            Divergence::ItakuraSaito => {
                let vh = w.dot(&h).mapv(|x| x.max(FLOOR));
                let num = w.t().dot(&(&v / &vh.mapv(|x| x * x)));
                let den = w.t().dot(&vh.mapv(f64::recip));
                h.zip_mut_with(&(num / den), |x, r| *x = (*x * r.sqrt()).max(FLOOR));
                let vh = w.dot(&h).mapv(|x| x.max(FLOOR));
                let num = (&v / &vh.mapv(|x| x * x)).dot(&h.t());
                let den = vh.mapv(f64::recip).dot(&h.t());
                w.zip_mut_with(&(num / den), |x, r| *x = (*x * r.sqrt()).max(FLOOR));
            }
        }
    }
    w
}

/// Learns `k_per_speaker` atoms from each speaker's concatenated utterances
/// and stacks them, speakers in order of first appearance. With a band, the
/// spectrograms are restricted to it first and so is the dictionary.
pub fn learn_dictionary(
    training: &[TrainingSpectrogram],
    k_per_speaker: usize,
    divergence: Divergence,
    iters: usize,
    seed: u64,
    band: Option<&BandSelection>,
) -> Result<Dictionary> {
    if training.is_empty() {
        return invalid("no training material");
    }
    if k_per_speaker == 0 || iters == 0 {
        return invalid("k_per_speaker and iters must be at least 1");
    }
    let restricted: Vec<MagSpectrogram> = training
        .iter()
        .map(|t| restrict(&t.spectrogram, band))
        .collect::<Result<_>>()?;
    check_grid(&restricted)?;
    if restricted.iter().any(|s| s.n_frames() == 0) {
        return invalid("empty training spectrogram");
    }
    let mut speakers: Vec<&str> = Vec::new();
    for t in training {
        if !speakers.contains(&t.speaker.as_str()) {
            speakers.push(&t.speaker);
        }
    }
    let mut blocks = Vec::with_capacity(speakers.len());
    let mut meta = Vec::new();
    for (i, spk) in speakers.iter().enumerate() {
        let views: Vec<_> = training
            .iter()
            .zip(&restricted)
            .filter(|(t, _)| t.speaker == *spk)
            .map(|(_, s)| s.values.view())
            .collect();
        let v = concatenate(Axis(1), &views).expect("rows agree after the grid check");
        if v.iter().all(|x| *x == 0.0) {
            return invalid(format!("training material for `{spk}` is all zero"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut w = nmf(v.view(), k_per_speaker, divergence, iters, &mut rng);
        normalize_columns(&mut w);
        blocks.push(w);
        meta.extend((0..k_per_speaker).map(|_| spk.to_string()));
    }
    let views: Vec<_> = blocks.iter().map(Array2::view).collect();
    Dictionary::new(
        concatenate(Axis(1), &views).expect("blocks share rows"),
        meta,
        restricted[0].freq_axis.clone(),
    )
}

/// One unit-norm atom per entry: its mean magnitude spectrum.
pub fn prototype_dictionary(sources: &[TrainingSpectrogram], band: Option<&BandSelection>) -> Result<Dictionary> {
    if sources.is_empty() {
        return invalid("no prototype sources");
    }
    let restricted: Vec<MagSpectrogram> = sources
        .iter()
        .map(|t| restrict(&t.spectrogram, band))
        .collect::<Result<_>>()?;
    check_grid(&restricted)?;
    let f = restricted[0].n_bins();
    let mut w = Array2::zeros((f, sources.len()));
    for (j, s) in restricted.iter().enumerate() {
        let mean = s
            .values
            .mean_axis(Axis(1))
            .ok_or_else(|| Error::InvalidArgument("empty prototype spectrogram".into()))?;
        w.column_mut(j).assign(&mean);
    }
    normalize_columns(&mut w);
    Dictionary::new(
        w,
        sources.iter().map(|s| s.speaker.clone()).collect(),
        restricted[0].freq_axis.clone(),
    )
}
