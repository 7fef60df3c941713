use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use monoloc::nmf::Dictionary;
use monoloc::scatter::{synth_scatterer, DirectionalResponseSet, ScattererParams};
use monoloc::signal::write_wav;
use monoloc::simulate::{make_source, render_signals, SourceSpec};
use ndarray::Array2;
use serde_json::Value;

fn monoloc(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monoloc"))
        .args(args)
        .env("MONOLOC_OUTPUT", out_root)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn white_config(dir: &Path, trials: u64, j: &str, snr: &str) -> PathBuf {
    let path = dir.join("white.toml");
    fs::write(
        &path,
        format!(
            r#"
name = "white"

[device]
kind = "rough"
seed = 2024

[method]
kind = "white"

[sources]
kind = "white"
duration_s = 1.0
count = 8
seed = 3

[trials]
j = {j}
snr_db = {snr}
trials = {trials}
seed = 11
"#
        ),
    )
    .unwrap();
    path
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn without_timing(records: &[Value]) -> Vec<Value> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.as_object_mut().unwrap().remove("timing_ms");
            r
        })
        .collect()
}

#[test]
fn device_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rough36.mlc");
    ok(&monoloc(tmp.path(), &["device", "--kind", "rough", "--directions", "36", "--seed", "5", "--out", out.to_str().unwrap()]));
    let read = DirectionalResponseSet::read(&out).unwrap();
    let expected = synth_scatterer(&ScattererParams::rough(36, 16000, 1024, 5)).unwrap();
    assert_eq!(read.n_directions(), 36);
    assert_eq!(read.n_bins(), 513);
    assert_eq!(read, expected);
    let csv = fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 37);
}

#[test]
fn device_generation_is_reproducible_and_kind_matters() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |kind: &str, name: &str| {
        let out = tmp.path().join(name);
        ok(&monoloc(tmp.path(), &["device", "--kind", kind, "--directions", "36", "--seed", "9", "--out", out.to_str().unwrap()]));
        fs::read(out).unwrap()
    };
    let a = run("rough", "a.mlc");
    let b = run("rough", "b.mlc");
    let c = run("smooth", "c.mlc");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let smooth = DirectionalResponseSet::read(tmp.path().join("c.mlc")).unwrap();
    assert_eq!(smooth, synth_scatterer(&ScattererParams::smooth(36, 16000, 1024, 9)).unwrap());
}

#[test]
fn default_output_root_comes_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&monoloc(tmp.path(), &["device", "--directions", "12", "--seed", "1"]));
    assert!(tmp.path().join("device-rough-12-1.mlc").is_file());
}

#[test]
fn training_counts_atoms_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.json");
    ok(&monoloc(
        tmp.path(),
        &["corpus", "--female", "25", "--male", "25", "--duration", "0.25", "--seed", "4", "--out", corpus.to_str().unwrap()],
    ));
    let specs: Vec<SourceSpec> = serde_json::from_str(&fs::read_to_string(&corpus).unwrap()).unwrap();
    assert_eq!(specs.len(), 50);

    let train = |name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec!["train", "--corpus", corpus.to_str().unwrap(), "--k", "10", "--iters", "15", "--seed", "2"];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        ok(&monoloc(tmp.path(), &args));
        out
    };
    let full = train("full.mlc", &[]);
    let again = train("again.mlc", &["--workers", "1"]);
    let band = train("band.mlc", &["--fmin", "3000", "--fmax", "8000"]);

    let d = Dictionary::read(&full).unwrap();
    assert_eq!(d.n_atoms(), 500);
    assert_eq!(d.n_bins(), 513);
    assert_eq!(fs::read(&full).unwrap(), fs::read(&again).unwrap());
    let b = Dictionary::read(&band).unwrap();
    let expected_bins = (0..513).map(|k| k as f64 * 16000.0 / 1024.0).filter(|f| (3000.0..=8000.0).contains(f)).count();
    assert_eq!(b.n_bins(), expected_bins);
}

#[test]
fn corpus_can_render_wavs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c.json");
    ok(&monoloc(tmp.path(), &["corpus", "--white", "2", "--duration", "0.1", "--wav", "--out", corpus.to_str().unwrap()]));
    assert!(tmp.path().join("c-wav/white0.wav").is_file());
    assert!(tmp.path().join("c-wav/white1.wav").is_file());
}

#[test]
fn white_smoke_run_is_fast_accurate_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = white_config(tmp.path(), 10, "[1]", "[30.0]");
    let t0 = Instant::now();
    ok(&monoloc(tmp.path(), &["run", "--config", cfg.to_str().unwrap()]));
    assert!(t0.elapsed().as_secs_f64() < 60.0);

    let dir = tmp.path().join("white");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    let records = jsonl(&dir.join("results.jsonl"));
    assert_eq!(records.len(), 10);
    assert!(records.iter().all(|r| r["config_hash"] == hash.as_str()));
    let trials: Vec<u64> = records.iter().map(|r| r["trial"].as_u64().unwrap()).collect();
    assert_eq!(trials, (0..10).collect::<Vec<_>>());

    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let accuracy: f64 = row[5].parse().unwrap();
    assert!(accuracy >= 0.9, "{summary}");
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = white_config(tmp.path(), 6, "[1, 2]", "[20.0]");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&monoloc(tmp.path(), &["run", "--config", cfg.to_str().unwrap(), "--out-dir", a.to_str().unwrap(), "--workers", "1"]));
    ok(&monoloc(tmp.path(), &["run", "--config", cfg.to_str().unwrap(), "--out-dir", b.to_str().unwrap(), "--workers", "3"]));
    let ra = without_timing(&jsonl(&a.join("results.jsonl")));
    let rb = without_timing(&jsonl(&b.join("results.jsonl")));
    assert_eq!(ra, rb);
    assert_eq!(fs::read(a.join("summary.csv")).unwrap(), fs::read(b.join("summary.csv")).unwrap());
}

#[test]
fn report_tables_match_a_recount() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = white_config(tmp.path(), 5, "[1, 2]", "[10.0, inf]");
    ok(&monoloc(tmp.path(), &["run", "--config", cfg.to_str().unwrap()]));
    let dir = tmp.path().join("white");
    let rep = tmp.path().join("report");
    ok(&monoloc(tmp.path(), &["report", "--results", dir.to_str().unwrap(), "--out-dir", rep.to_str().unwrap(), "--cell", "4"]));

    let summary = fs::read_to_string(rep.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    assert_eq!(summary, fs::read_to_string(dir.join("summary.csv")).unwrap());

    let records = jsonl(&dir.join("results.jsonl"));
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let j: u64 = f[2].parse().unwrap();
        let snr = f[3];
        let cell: Vec<&Value> = records
            .iter()
            .filter(|r| {
                r["j"].as_u64() == Some(j)
                    && match snr {
                        "inf" => r["snr_db"].is_null(),
                        s => r["snr_db"].as_f64() == Some(s.parse().unwrap()),
                    }
            })
            .collect();
        assert_eq!(f[4].parse::<usize>().unwrap(), cell.len());
        let hits = cell
            .iter()
            .filter(|r| {
                let t: Vec<f64> = r["truth_deg"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                let e: Vec<f64> = r["estimates_deg"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                monoloc::eval::evaluate_trial(&t, &e, 10.0).unwrap().hit
            })
            .count();
        let accuracy: f64 = f[5].parse().unwrap();
        assert!((accuracy - hits as f64 / cell.len() as f64).abs() < 1e-6);

        let stem = format!("confusion_j{j}_snr{snr}");
        let csv = fs::read_to_string(rep.join(format!("{stem}.csv"))).unwrap();
        let total: u64 = csv
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').skip(1).map(|c| c.parse::<u64>().unwrap()).collect::<Vec<_>>())
            .sum();
        assert_eq!(total, cell.len() as u64 * j);
        let svg = fs::read_to_string(rep.join(format!("{stem}.svg"))).unwrap();
        assert_eq!(svg.matches("<rect class=\"cell\"").count(), 36 * 36);
        assert!(svg.contains("width=\"144\""));
    }
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\n[device]\nkind = \"rough\"\n").unwrap();
    let o = monoloc(tmp.path(), &["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = white_config(tmp.path(), 1, "[0]", "[30.0]");
    assert_eq!(monoloc(tmp.path(), &["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(monoloc(tmp.path(), &["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(monoloc(tmp.path(), &["run"]).status.code(), Some(2));
}

#[test]
fn solver_abort_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let good = synth_scatterer(&ScattererParams::rough(4, 16000, 1024, 1)).unwrap();
    let mut mags: Array2<f64> = good.mags().clone();
    mags.row_mut(2).fill(0.0);
    let dead = DirectionalResponseSet::new(
        good.azimuths_deg().to_vec(),
        mags,
        good.freq_axis().to_vec(),
        None,
        "dead",
        16000,
        1024,
    )
    .unwrap();
    let device = tmp.path().join("dead.mlc");
    dead.write(&device).unwrap();

    let source = make_source(&SourceSpec::white(0.5, 1), 16000).unwrap();
    let y = render_signals(&[0.0], &[source], f64::INFINITY, 0, &good).unwrap();
    let wav = tmp.path().join("y.wav");
    write_wav(&wav, &y).unwrap();

    let args = ["localize", "--wav", wav.to_str().unwrap(), "--device", device.to_str().unwrap()];
    let o = monoloc(tmp.path(), &[&args[..], &["--method", "nmf"]].concat());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let o = monoloc(tmp.path(), &[&args[..], &["--method", "white"]].concat());
    ok(&o);
    let result: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(result["estimates_deg"].as_array().unwrap().len(), 1);
}

#[test]
fn nmf_methods_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let common = r#"
[device]
kind = "rough"
seed = 2024

[band]
fmin_hz = 3000.0
fmax_hz = 8000.0

[sources]
kind = "speakers"
duration_s = 0.3
female = 3
first_identity = 1000
seed = 2

[trials]
j = [1]
snr_db = [30.0]
trials = 3
seed = 5
"#;
    let proto = tmp.path().join("proto.toml");
    fs::write(
        &proto,
        format!(
            "name = \"proto\"\n{common}\n[method]\nkind = \"nmf-prototype\"\nlambda = 10.0\ngamma = 1.0\n\n[multires]\nlambda = 10.0\ngamma = 1.0\n"
        ),
    )
    .unwrap();
    ok(&monoloc(tmp.path(), &["run", "--config", proto.to_str().unwrap()]));
    let records = jsonl(&tmp.path().join("proto/results.jsonl"));
    assert_eq!(records.len(), 3);
    for r in &records {
        assert_eq!(r["stage"], "refined");
        assert_eq!(r["coarse_estimates_deg"].as_array().unwrap().len(), 1);
        assert_eq!(r["method"], "nmf-prototype");
    }

    let usm = tmp.path().join("usm.toml");
    fs::write(
        &usm,
        format!(
            "name = \"usm\"\n{common}\n[method]\nkind = \"nmf-usm\"\ndivergence = \"euclidean\"\nlambda = 1.0\ngamma = 1.0\ninit = {{ type = \"random\", seed = 3 }}\ntrain = {{ female = 2, k = 2, duration_s = 0.3, iters = 10 }}\n"
        ),
    )
    .unwrap();
    ok(&monoloc(tmp.path(), &["run", "--config", usm.to_str().unwrap()]));
    let records = jsonl(&tmp.path().join("usm/results.jsonl"));
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r["stage"] == "coarse" && r["group_energies"].as_array().unwrap().len() == 36));
}
