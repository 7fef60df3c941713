//! Localization metrics: permutation-matched circular error, bin accuracy
//! and confusion matrices.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scatter::uniform_grid;

/// Largest source count for the exhaustive permutation search.
pub const MAX_SOURCES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub truth_deg: Vec<f64>,
    pub estimates_deg: Vec<f64>,
    /// `matched_deg[j]` is the estimate paired with `truth_deg[j]`.
    pub matched_deg: Vec<f64>,
    pub matched_error_deg: f64,
    pub hit: bool,
    pub per_source_hits: Vec<bool>,
}

/// `|((est - truth + 180) mod 360) - 180|`, in `[0, 180]`.
pub fn angular_error(truth: f64, est: f64) -> f64 {
    ((est - truth + 180.0).rem_euclid(360.0) - 180.0).abs()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Best pairing of estimates to truths; the lexicographically first
/// permutation wins ties.
fn best_matching(truth: &[f64], estimates: &[f64]) -> Result<(Vec<usize>, f64)> {
    if truth.len() != estimates.len() {
        return invalid(format!(
            "{} truths but {} estimates",
            truth.len(),
            estimates.len()
        ));
    }
    if truth.is_empty() || truth.len() > MAX_SOURCES {
        return invalid(format!("need 1 to {MAX_SOURCES} sources, got {}", truth.len()));
    }
    if truth.iter().chain(estimates).any(|a| !a.is_finite()) {
        return invalid("angles must be finite");
    }
    let j = truth.len() as f64;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in permutations(truth.len()) {
        let e = p
            .iter()
            .enumerate()
            .map(|(t, &i)| angular_error(truth[t], estimates[i]))
            .sum::<f64>()
            / j;
        if best.as_ref().is_none_or(|(_, b)| e < *b) {
            best = Some((p, e));
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// `min_pi (1/J) sum_j |((est_pi(j) - truth_j + 180) mod 360) - 180|`.
pub fn matched_circular_error(truth: &[f64], estimates: &[f64]) -> Result<f64> {
    Ok(best_matching(truth, estimates)?.1)
}

fn within(truth: f64, est: f64, bin_width_deg: f64) -> bool {
    angular_error(truth, est) <= bin_width_deg / 2.0 + 1e-9
}

pub fn evaluate_trial(truth: &[f64], estimates: &[f64], bin_width_deg: f64) -> Result<TrialOutcome> {
    let (perm, err) = best_matching(truth, estimates)?;
    let matched_deg: Vec<f64> = perm.iter().map(|&i| estimates[i]).collect();
    let per_source_hits: Vec<bool> = truth
        .iter()
        .zip(&matched_deg)
        .map(|(t, e)| within(*t, *e, bin_width_deg))
        .collect();
    Ok(TrialOutcome {
        truth_deg: truth.to_vec(),
        estimates_deg: estimates.to_vec(),
        matched_deg,
        matched_error_deg: err,
        hit: per_source_hits.iter().all(|h| *h),
        per_source_hits,
    })
}

/// Mergeable accuracy counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub hits: u64,
    pub hit_error_sum: f64,
    pub sources: u64,
    pub source_hits: u64,
}

impl Tally {
    pub fn add(&mut self, o: &TrialOutcome, bin_width_deg: f64) {
        let hits: Vec<bool> = o
            .truth_deg
            .iter()
            .zip(&o.matched_deg)
            .map(|(t, e)| within(*t, *e, bin_width_deg))
            .collect();
        self.trials += 1;
        if hits.iter().all(|h| *h) {
            self.hits += 1;
            self.hit_error_sum += o.matched_error_deg;
        }
        self.sources += hits.len() as u64;
        self.source_hits += hits.iter().filter(|h| **h).count() as u64;
    }

    pub fn merge(mut self, other: Tally) -> Self {
        self.trials += other.trials;
        self.hits += other.hits;
        self.hit_error_sum += other.hit_error_sum;
        self.sources += other.sources;
        self.source_hits += other.source_hits;
        self
    }

    pub fn summary(&self) -> BinAccuracy {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        BinAccuracy {
            trials: self.trials,
            accuracy: ratio(self.hits, self.trials),
            mean_error_of_hits: (self.hits > 0).then(|| self.hit_error_sum / self.hits as f64),
            per_source_accuracy: ratio(self.source_hits, self.sources),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinAccuracy {
    pub trials: u64,
    /// Fraction of trials with every source inside its bin.
    pub accuracy: f64,
    /// Matched error averaged over hit trials; `None` without hits.
    pub mean_error_of_hits: Option<f64>,
    /// Fraction of individual sources inside their bin.
    pub per_source_accuracy: f64,
}

/// Hits are re-derived at `bin_width_deg` from the stored matching.
pub fn bin_accuracy(outcomes: &[TrialOutcome], bin_width_deg: f64) -> Result<BinAccuracy> {
    if outcomes.is_empty() {
        return invalid("no outcomes to summarize");
    }
    let mut t = Tally::default();
    for o in outcomes {
        t.add(o, bin_width_deg);
    }
    Ok(t.summary())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    /// `counts[[true_bin, estimated_bin]]`.
    pub counts: Array2<u64>,
    pub labels_deg: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn new(d: usize) -> Self {
        Self {
            counts: Array2::zeros((d, d)),
            labels_deg: uniform_grid(d),
        }
    }

    /// Nearest bin on the uniform grid; halfway points go to the lower bin.
    pub fn bin_of(&self, azimuth_deg: f64) -> usize {
        let d = self.labels_deg.len();
        let step = 360.0 / d as f64;
        let x = azimuth_deg.rem_euclid(360.0) / step;
        let lower = x.floor();
        let b = if x - lower > 0.5 { lower + 1.0 } else { lower };
        (b as usize) % d
    }

    pub fn add(&mut self, o: &TrialOutcome) {
        for (t, e) in o.truth_deg.iter().zip(&o.matched_deg) {
            let (i, j) = (self.bin_of(*t), self.bin_of(*e));
            self.counts[[i, j]] += 1;
        }
    }

    pub fn merge(mut self, other: &ConfusionMatrix) -> Result<Self> {
        if self.counts.dim() != other.counts.dim() {
            return invalid("confusion matrices differ in size");
        }
        self.counts += &other.counts;
        Ok(self)
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true_deg");
        for l in &self.labels_deg {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (i, row) in self.counts.rows().into_iter().enumerate() {
            let _ = write!(out, "{}", self.labels_deg[i]);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    /// Heatmap with one `cell`-pixel square per bin pair, rows by true bin.
    pub fn to_svg(&self, cell: usize) -> String {
        let d = self.labels_deg.len();
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let size = d * cell;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
        );
        for ((i, j), &c) in self.counts.indexed_iter() {
            let shade = 255 - (255.0 * c as f64 / max).round() as u8;
            let _ = writeln!(
                out,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\"><title>{} -> {}: {c}</title></rect>",
                j * cell,
                i * cell,
                self.labels_deg[i],
                self.labels_deg[j]
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Confusion counts on a `d`-bin grid; every matched pair adds one count.
pub fn accumulate_confusion(outcomes: &[TrialOutcome], d: usize) -> Result<ConfusionMatrix> {
    if d == 0 {
        return invalid("confusion matrix needs at least one bin");
    }
    let mut m = ConfusionMatrix::new(d);
    for o in outcomes {
        m.add(o);
    }
    Ok(m)
}

/// One line of an experiment summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub device: String,
    pub method: String,
    pub j: usize,
    /// `None` for noiseless runs.
    pub snr_db: Option<f64>,
    pub trials: u64,
    pub accuracy: f64,
    pub mean_error_deg: Option<f64>,
    pub per_source_accuracy: f64,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("device,method,j,snr_db,trials,accuracy,mean_error_deg,per_source_accuracy\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{},{:.6}",
            r.device,
            r.method,
            r.j,
            r.snr_db.map(|x| x.to_string()).unwrap_or_else(|| "inf".into()),
            r.trials,
            r.accuracy,
            opt(r.mean_error_deg),
            r.per_source_accuracy
        );
    }
    out
}
