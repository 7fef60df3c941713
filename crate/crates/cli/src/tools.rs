//! The single-artifact subcommands: device, corpus, train, localize.

use std::fs;
use std::path::{Path, PathBuf};

use monoloc::doa::NmfLocalizer;
use monoloc::experiment::{source_spectrograms, Estimator};
use monoloc::nmf::{learn_dictionary, Dictionary, SolverConfig};
use monoloc::scatter::{synth_scatterer, BandSelection, DirectionalResponseSet, ScattererParams};
use monoloc::signal::{read_wav, write_wav};
use monoloc::simulate::{make_source, speaker_corpus, SourceSpec};
use monoloc::whiteloc::DEFAULT_BUDGET;
use monoloc::Exec;
use ndarray::Array2;

use crate::config::output_root;
use crate::{io_err, CliError, CorpusArgs, DeviceArgs, LocalizeArgs, LocalizeMethod, SynthKind, TrainArgs};

pub(crate) fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(io_err(format!("cannot create {}", p.display())))
        }
        _ => Ok(()),
    }
}

fn or_default(out: &Option<PathBuf>, name: String) -> PathBuf {
    out.clone().unwrap_or_else(|| output_root().join(name))
}

/// `None` for the full grid, so dictionaries keep every bin.
fn band_option(sample_rate: u32, window_len: usize, fmin: f64, fmax: f64) -> Result<Option<BandSelection>, CliError> {
    if fmin <= 0.0 && fmax >= sample_rate as f64 / 2.0 {
        return Ok(None);
    }
    Ok(Some(BandSelection::for_stft(sample_rate, window_len, fmin, fmax)?))
}

pub fn device(a: &DeviceArgs) -> Result<(), CliError> {
    let params = match a.kind {
        SynthKind::Rough => ScattererParams::rough(a.directions, a.sample_rate, a.window_len, a.seed),
        SynthKind::Smooth => ScattererParams::smooth(a.directions, a.sample_rate, a.window_len, a.seed),
    };
    let kind = match a.kind {
        SynthKind::Rough => "rough",
        SynthKind::Smooth => "smooth",
    };
    let set = synth_scatterer(&params)?;
    let out = or_default(&a.out, format!("device-{kind}-{}-{}.mlc", a.directions, a.seed));
    ensure_parent(&out)?;
    set.write(&out)?;
    let csv = out.with_extension("csv");
    fs::write(&csv, set.to_csv()).map_err(io_err(format!("cannot write {}", csv.display())))?;
    println!("{}", out.display());
    Ok(())
}

pub fn corpus(a: &CorpusArgs) -> Result<(), CliError> {
    if a.female + a.male + a.white == 0 {
        return Err(CliError::Config("the corpus needs at least one source".into()));
    }
    let mut specs = speaker_corpus(a.female, a.male, a.first_identity, a.duration, a.seed);
    for i in 0..a.white as u64 {
        let mut s = SourceSpec::white(a.duration, a.seed.wrapping_add(i));
        s.label = format!("white{i}");
        specs.push(s);
    }
    let out = or_default(&a.out, "corpus.json".into());
    ensure_parent(&out)?;
    let json = serde_json::to_string_pretty(&specs).expect("source specs serialize");
    fs::write(&out, json + "\n").map_err(io_err(format!("cannot write {}", out.display())))?;
    if a.wav {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let dir = out.with_file_name(format!("{stem}-wav"));
        fs::create_dir_all(&dir).map_err(io_err(format!("cannot create {}", dir.display())))?;
        for s in &specs {
            write_wav(dir.join(format!("{}.wav", s.label)), &make_source(s, a.sample_rate)?.peak_normalized())?;
        }
    }
    println!("{}", out.display());
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<SourceSpec>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("cannot read {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn train(a: &TrainArgs, exec: Exec) -> Result<(), CliError> {
    let specs = read_corpus(&a.corpus)?;
    let band = band_option(a.sample_rate, a.window_len, a.fmin, a.fmax)?;
    let spectra = source_spectrograms(&specs, a.sample_rate, a.window_len, exec)?;
    let dict = learn_dictionary(&spectra, a.k, a.divergence, a.iters, a.seed, band.as_ref())?;
    let out = or_default(&a.out, "dictionary.mlc".into());
    ensure_parent(&out)?;
    dict.write(&out)?;
    println!("{} ({} atoms x {} bins)", out.display(), dict.n_atoms(), dict.n_bins());
    Ok(())
}

/// A single all-ones atom on the device's frequency grid.
pub fn flat_dictionary(device: &DirectionalResponseSet) -> Result<Dictionary, CliError> {
    Ok(Dictionary::new(
        Array2::ones((device.n_bins(), 1)),
        vec!["flat".into()],
        device.freq_axis().to_vec(),
    )?)
}

pub fn localize(a: &LocalizeArgs) -> Result<(), CliError> {
    let device = DirectionalResponseSet::read(&a.device)?;
    let y = read_wav(&a.wav)?;
    if y.sample_rate() != device.sample_rate() {
        return Err(CliError::Config(format!(
            "recording is at {} Hz, device at {} Hz",
            y.sample_rate(),
            device.sample_rate()
        )));
    }
    let band = BandSelection::for_axis(device.freq_axis(), a.fmin, a.fmax)?;
    let estimator = match a.method {
        LocalizeMethod::White => Estimator::white(&device, &band, DEFAULT_BUDGET)?,
        LocalizeMethod::Nmf => {
            let dict = match &a.dictionary {
                Some(p) => Dictionary::read(p)?,
                None => flat_dictionary(&device)?,
            };
            let cfg = SolverConfig::new(a.divergence, a.lambda, a.gamma);
            Estimator::nmf(NmfLocalizer::new(&device, &dict, &band, cfg)?)
        }
    };
    let (result, _) = estimator.estimate(&y, a.j)?;
    println!("{}", serde_json::to_string(&result).expect("results serialize"));
    Ok(())
}
