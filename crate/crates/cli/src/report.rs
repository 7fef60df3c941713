//! Summaries and confusion matrices, computed from result records only.

use std::fs;
use std::path::Path;

use monoloc::eval::{summary_csv, ConfusionMatrix, SummaryRow, Tally};
use monoloc::experiment::{Method, TrialRecord};
use serde::{Deserialize, Serialize};

use crate::run::write_text;
use crate::{io_err, CliError, ReportArgs};

/// Run metadata written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub device: String,
    pub method: Method,
    pub model_directions: usize,
    pub bin_width_deg: f64,
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultLine {
    pub config_hash: String,
    pub device: String,
    pub method: Method,
    #[serde(flatten)]
    pub record: TrialRecord,
}

/// One (J, SNR) cell of a run.
pub struct Cell {
    pub row: SummaryRow,
    pub confusion: ConfusionMatrix,
}

pub struct Summary {
    pub cells: Vec<Cell>,
}

impl Summary {
    pub fn csv(&self) -> String {
        let rows: Vec<SummaryRow> = self.cells.iter().map(|c| c.row.clone()).collect();
        summary_csv(&rows)
    }
}

fn same_snr(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

/// Groups records by (J, SNR) in order of first appearance.
pub fn summarize(lines: &[ResultLine], m: &Manifest) -> Result<Summary, CliError> {
    let mut keys: Vec<(usize, Option<f64>)> = Vec::new();
    for l in lines {
        let k = (l.record.j, l.record.snr_db);
        if !keys.iter().any(|(j, s)| *j == k.0 && same_snr(*s, k.1)) {
            keys.push(k);
        }
    }
    let mut cells = Vec::with_capacity(keys.len());
    for (j, snr) in keys {
        let mut tally = Tally::default();
        let mut confusion = ConfusionMatrix::new(m.model_directions);
        for l in lines.iter().filter(|l| l.record.j == j && same_snr(l.record.snr_db, snr)) {
            let o = l.record.outcome(m.bin_width_deg)?;
            tally.add(&o, m.bin_width_deg);
            confusion.add(&o);
        }
        let s = tally.summary();
        cells.push(Cell {
            row: SummaryRow {
                device: m.device.clone(),
                method: m.method.to_string(),
                j,
                snr_db: snr,
                trials: s.trials,
                accuracy: s.accuracy,
                mean_error_deg: s.mean_error_of_hits,
                per_source_accuracy: s.per_source_accuracy,
            },
            confusion,
        });
    }
    Ok(Summary { cells })
}

pub fn read_results(dir: &Path) -> Result<(Vec<ResultLine>, Manifest), CliError> {
    let mpath = dir.join("manifest.json");
    let text = fs::read_to_string(&mpath).map_err(io_err(format!("cannot read {}", mpath.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", mpath.display())))?;
    let rpath = dir.join("results.jsonl");
    let text = fs::read_to_string(&rpath).map_err(io_err(format!("cannot read {}", rpath.display())))?;
    let mut lines = Vec::new();
    for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line: ResultLine = serde_json::from_str(l)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", rpath.display(), i + 1)))?;
        if line.config_hash != manifest.config_hash {
            return Err(CliError::Config(format!(
                "{}:{}: record from a different configuration",
                rpath.display(),
                i + 1
            )));
        }
        lines.push(line);
    }
    if lines.is_empty() {
        return Err(CliError::Config(format!("{} holds no records", rpath.display())));
    }
    Ok((lines, manifest))
}

fn snr_tag(snr: Option<f64>) -> String {
    snr.map(|s| s.to_string()).unwrap_or_else(|| "inf".into())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    if a.cell == 0 {
        return Err(CliError::Config("--cell must be at least 1".into()));
    }
    let (lines, manifest) = read_results(&a.results)?;
    let out = a.out_dir.clone().unwrap_or_else(|| a.results.clone());
    fs::create_dir_all(&out).map_err(io_err(format!("cannot create {}", out.display())))?;
    let summary = summarize(&lines, &manifest)?;
    write_text(&out.join("summary.csv"), &summary.csv())?;
    for c in &summary.cells {
        let stem = format!("confusion_j{}_snr{}", c.row.j, snr_tag(c.row.snr_db));
        write_text(&out.join(format!("{stem}.csv")), &c.confusion.to_csv())?;
        write_text(&out.join(format!("{stem}.svg")), &c.confusion.to_svg(a.cell))?;
    }
    print!("{}", summary.csv());
    Ok(())
}
