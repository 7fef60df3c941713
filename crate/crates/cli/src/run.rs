//! `monoloc run`: a configured experiment from devices to results.

use std::fs;
use std::io::Write;
use std::path::Path;

use monoloc::doa::NmfLocalizer;
use monoloc::experiment::{prototypes_for, run_trials, source_spectrograms, trial_seed, Estimator, Method, TrialPlan};
use monoloc::nmf::{learn_dictionary, Dictionary, SolverConfig};
use monoloc::scatter::{interpolate_to_grid, synth_scatterer, uniform_grid, BandSelection, DirectionalResponseSet, ScattererParams};
use monoloc::simulate::{speaker_corpus, SourceSpec};
use monoloc::whiteloc::DEFAULT_BUDGET;
use monoloc::Exec;

use crate::config::{DeviceKind, ExperimentConfig, SourceKindConfig};
use crate::report::{summarize, Manifest, ResultLine};
use crate::{io_err, CliError, RunArgs};

pub struct Devices {
    pub fine: DirectionalResponseSet,
    pub model: DirectionalResponseSet,
}

pub fn devices(cfg: &ExperimentConfig) -> Result<Devices, CliError> {
    let d = &cfg.device;
    let fine = match d.kind {
        DeviceKind::Rough => synth_scatterer(&ScattererParams::rough(d.fine_directions, d.sample_rate, d.window_len, d.seed))?,
        DeviceKind::Smooth => {
            synth_scatterer(&ScattererParams::smooth(d.fine_directions, d.sample_rate, d.window_len, d.seed))?
        }
        DeviceKind::File => {
            let path = d.path.as_ref().expect("validated");
            let set = DirectionalResponseSet::read(path)?;
            if set.impulse_responses().is_none() {
                return Err(CliError::Config(format!(
                    "{} has no impulse responses to render scenes with",
                    path.display()
                )));
            }
            set
        }
    };
    let model = interpolate_to_grid(&fine, &uniform_grid(d.model_directions))?;
    Ok(Devices { fine, model })
}

pub fn source_pool(cfg: &ExperimentConfig) -> Vec<SourceSpec> {
    let s = &cfg.sources;
    match s.kind {
        SourceKindConfig::White => (0..s.count as u64)
            .map(|i| {
                let mut spec = SourceSpec::white(s.duration_s, s.seed.wrapping_add(i));
                spec.label = format!("white{i}");
                spec
            })
            .collect(),
        SourceKindConfig::Speakers => speaker_corpus(s.female, s.male, s.first_identity, s.duration_s, s.seed),
    }
}

fn band(cfg: &ExperimentConfig) -> Result<BandSelection, CliError> {
    Ok(BandSelection::for_stft(
        cfg.device.sample_rate,
        cfg.device.window_len,
        cfg.band.fmin_hz,
        cfg.band.fmax_hz,
    )?)
}

fn usm(cfg: &ExperimentConfig, band: &BandSelection, exec: Exec) -> Result<Dictionary, CliError> {
    let m = &cfg.method;
    if let Some(p) = &m.dictionary {
        return Ok(Dictionary::read(p)?);
    }
    let t = m.train.as_ref().expect("validated");
    let speakers = speaker_corpus(t.female, t.male, t.first_identity, t.duration_s, t.seed);
    let spectra = source_spectrograms(&speakers, cfg.device.sample_rate, cfg.device.window_len, exec)?;
    Ok(learn_dictionary(&spectra, t.k, m.divergence, t.iters, t.seed, Some(band))?)
}

pub fn estimator(
    cfg: &ExperimentConfig,
    devices: &Devices,
    pool: &[SourceSpec],
    exec: Exec,
) -> Result<Estimator, CliError> {
    let band = band(cfg)?;
    let m = &cfg.method;
    let dict = match m.kind {
        Method::White => return Ok(Estimator::white(&devices.model, &band, DEFAULT_BUDGET)?),
        Method::NmfPrototype => prototypes_for(pool, cfg.device.sample_rate, cfg.device.window_len, Some(&band))?,
        Method::NmfUsm => usm(cfg, &band, exec)?,
    };
    let solver = SolverConfig {
        iters: m.iters,
        ..SolverConfig::new(m.divergence, m.lambda, m.gamma)
    };
    let mut loc = NmfLocalizer::new(&devices.model, &dict, &band, solver)?.with_init(m.init);
    if let Some(mr) = &cfg.multires {
        loc = loc.with_multires(mr.clone(), &devices.fine)?;
    }
    Ok(Estimator::nmf(loc))
}

/// Batch seed of one (J, SNR) cell.
pub fn cell_seed(seed: u64, j: usize, snr_index: usize) -> u64 {
    trial_seed(seed, ((j as u64) << 32) | snr_index as u64)
}

pub fn run(a: &RunArgs, exec: Exec) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    let raw = fs::read_to_string(&a.config).map_err(io_err(format!("cannot read {}", a.config.display())))?;
    if let Some(t) = a.trials {
        cfg.trials.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.trials.seed = s;
    }
    if let Some(d) = &a.out_dir {
        cfg.output_dir = Some(d.clone());
    }
    cfg.validate()?;
    let hash = cfg.hash();
    let out = cfg.output_dir();
    fs::create_dir_all(&out).map_err(io_err(format!("cannot create {}", out.display())))?;

    let devices = devices(&cfg)?;
    let pool = source_pool(&cfg);
    let est = estimator(&cfg, &devices, &pool, exec)?;
    let manifest = Manifest {
        name: cfg.name.clone(),
        config_hash: hash.clone(),
        device: devices.fine.label().to_string(),
        method: cfg.method.kind,
        model_directions: cfg.device.model_directions,
        bin_width_deg: cfg.trials.bin_width_deg,
    };

    let mut lines = Vec::new();
    for &j in &cfg.trials.j {
        for (si, &snr_db) in cfg.trials.snr_db.iter().enumerate() {
            let plan = TrialPlan {
                j,
                snr_db,
                trials: cfg.trials.trials,
                seed: cell_seed(cfg.trials.seed, j, si),
                first_trial: 0,
                fresh_content: cfg.fresh_content(),
            };
            log::info!("J = {j}, SNR = {snr_db} dB: {} trials", plan.trials);
            for record in run_trials(&plan, &pool, &devices.fine, &est, exec)? {
                lines.push(ResultLine {
                    config_hash: hash.clone(),
                    device: manifest.device.clone(),
                    method: cfg.method.kind,
                    record,
                });
            }
        }
    }

    write_text(&out.join("config.toml"), &raw)?;
    write_text(
        &out.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    let path = out.join("results.jsonl");
    let mut f = fs::File::create(&path).map_err(io_err(format!("cannot create {}", path.display())))?;
    for l in &lines {
        writeln!(f, "{}", serde_json::to_string(l).expect("records serialize"))
            .map_err(io_err(format!("cannot write {}", path.display())))?;
    }
    let summary = summarize(&lines, &manifest)?;
    write_text(&out.join("summary.csv"), &summary.csv())?;
    print!("{}", summary.csv());
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(format!("cannot write {}", path.display())))
}
