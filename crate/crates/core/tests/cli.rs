use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_nis-calib");

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn config(&self, name: &str, body: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn run(&self, config: &Path, args: &[&str]) -> Output {
        Command::new(BIN)
            .arg("--config")
            .arg(config)
            .args(args)
            .output()
            .unwrap()
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.path(rel)).unwrap()).unwrap()
    }
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const FIVE_BIASES: &str = "reflection_bias_2delta = [1.5, 3.0, 5.0, 7.0, 9.0]\n";

fn synthesize(ws: &Workspace, extra: &str) {
    let extra = if extra.contains("reflection_bias_2delta") {
        extra.to_string()
    } else {
        format!("{FIVE_BIASES}{extra}")
    };
    let cfg = ws.config(
        "synth.toml",
        &format!("seed = 7\noutput_dir = \"data\"\n[synthesis]\nfrequency_points = 201\n{extra}"),
    );
    ok(&ws.run(&cfg, &["synthesize"]));
}

fn calibrate_config(ws: &Workspace, name: &str, out: &str, extra: &str) -> PathBuf {
    ws.config(
        name,
        &format!(
            "output_dir = \"{out}\"\n[inputs]\nreflection_csv = \"data/reflection.csv\"\npower_csv = \"data/power.csv\"\n{extra}"
        ),
    )
}

#[test]
fn help_works_for_every_subcommand() {
    for sub in ["fit-reflection", "calibrate", "synthesize", "range-study"] {
        let out = Command::new(BIN).args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub}");
        assert!(!out.stdout.is_empty());
    }
    assert!(Command::new(BIN)
        .arg("--help")
        .output()
        .unwrap()
        .status
        .success());
}

#[test]
fn synthesize_then_calibrate_recovers_gain() {
    let ws = Workspace::new();
    synthesize(&ws, "");
    let truth = ws.json("data/truth.json");
    let cfg = calibrate_config(&ws, "cal.toml", "run", "");
    ok(&ws.run(&cfg, &["calibrate"]));
    let report = ws.json("run/report.json");
    let g = report["calibration"]["gain_dB"].as_f64().unwrap();
    let sigma = report["calibration"]["gain_sigma_dB"].as_f64().unwrap();
    let expect = truth["gain_dB"].as_f64().unwrap();
    assert!(
        (g - expect).abs() < 4.0 * sigma.max(0.05),
        "{g} ± {sigma} vs {expect}"
    );
    assert!(ws.path("run/power_fit.csv").exists());
    assert!(ws.path("run/rates.json").exists());
    assert!(ws.path("run/residuals/trace_00.csv").exists());
    let hashes = report["input_hashes_sha256"].as_object().unwrap();
    assert_eq!(hashes.len(), 2);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let ws = Workspace::new();
    synthesize(&ws, "");
    let first: Vec<Vec<u8>> = [
        "reflection.csv",
        "power.csv",
        "zero_bias_spectrum.csv",
        "truth.json",
    ]
    .iter()
    .map(|f| std::fs::read(ws.path("data").join(f)).unwrap())
    .collect();
    synthesize(&ws, "");
    for (k, f) in [
        "reflection.csv",
        "power.csv",
        "zero_bias_spectrum.csv",
        "truth.json",
    ]
    .iter()
    .enumerate()
    {
        assert!(
            std::fs::read(ws.path("data").join(f)).unwrap() == first[k],
            "{f}"
        );
    }
    let cfg = calibrate_config(&ws, "c.toml", "run", "");
    ok(&ws.run(&cfg, &["calibrate"]));
    let report = std::fs::read(ws.path("run/report.json")).unwrap();
    ok(&ws.run(&cfg, &["calibrate"]));
    assert!(std::fs::read(ws.path("run/report.json")).unwrap() == report);
}

#[test]
fn empty_reflection_file_is_an_input_error() {
    let ws = Workspace::new();
    std::fs::write(ws.path("empty.csv"), "").unwrap();
    let cfg = ws.config("c.toml", "[inputs]\nreflection_csv = \"empty.csv\"\n");
    let out = ws.run(&cfg, &["fit-reflection"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn missing_zero_bias_trace_is_reported() {
    let ws = Workspace::new();
    synthesize(&ws, "");
    let text = std::fs::read_to_string(ws.path("data/reflection.csv")).unwrap();
    let kept: String = text
        .lines()
        .filter(|l| {
            let first = l.split(',').next().unwrap_or("");
            first.parse::<f64>().map_or(true, |v| v != 0.0)
        })
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(ws.path("nozero.csv"), kept).unwrap();
    let cfg = ws.config("c.toml", "[inputs]\nreflection_csv = \"nozero.csv\"\n");
    let out = ws.run(&cfg, &["fit-reflection"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("normalization requires V_b = 0 trace"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn invalid_config_fails_before_writing() {
    let ws = Workspace::new();
    for (name, body) in [
        (
            "neg.toml",
            "output_dir = \"never\"\n[junction]\ngap_energy_ueV = -1.0\n",
        ),
        (
            "unknown.toml",
            "output_dir = \"never\"\n[junction]\ngap = 1.0\n",
        ),
        (
            "window.toml",
            "output_dir = \"never\"\n[fit]\nwindow_2delta = [5.0, 2.0]\n",
        ),
    ] {
        let cfg = ws.config(name, body);
        let out = ws.run(&cfg, &["synthesize"]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", stderr(&out));
        assert!(!ws.path("never").exists(), "{name}");
    }
    let out = Command::new(BIN)
        .args(["--window", "oops", "synthesize"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_bias_point_leaves_gamma_x_uncertainty_open() {
    let ws = Workspace::new();
    synthesize(&ws, "reflection_bias_2delta = [5.0]\n");
    let cfg = ws.config(
        "c.toml",
        "output_dir = \"run\"\n[inputs]\nreflection_csv = \"data/reflection.csv\"\n",
    );
    let out = ws.run(&cfg, &["fit-reflection"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("uncertainty not estimable"));
    let rates = ws.json("run/rates.json");
    assert!(rates["rates"]["gamma_x"]["sigma_over_2pi_MHz"].is_null());
    assert!(rates["rates"]["gamma_tr"]["sigma_over_2pi_MHz"].is_number());
}

#[test]
fn unit_gain_without_noise_is_recovered() {
    let ws = Workspace::new();
    synthesize(
        &ws,
        "reflection_noise_rel = 1e-6\npower_noise_pW = 0.0\n[chain]\ngain_dB = 0.0\nnoise_temperature_K = 0.0\n",
    );
    let cfg = calibrate_config(
        &ws,
        "c.toml",
        "run",
        "[chain]\ngain_dB = 0.0\nnoise_temperature_K = 0.0\n",
    );
    ok(&ws.run(&cfg, &["calibrate"]));
    let report = ws.json("run/report.json");
    let g = report["calibration"]["gain_dB"].as_f64().unwrap();
    assert!(g.abs() < 0.05, "{g}");
}

#[test]
fn calibrate_accepts_precomputed_rates() {
    let ws = Workspace::new();
    synthesize(&ws, "");
    let cfg = ws.config(
        "c.toml",
        "output_dir = \"run\"\n[inputs]\npower_csv = \"data/power.csv\"\nrates_json = \"data/truth.json\"\n",
    );
    ok(&ws.run(&cfg, &["calibrate"]));
    let report = ws.json("run/report.json");
    let truth = ws.json("data/truth.json");
    let g = report["calibration"]["gain_dB"].as_f64().unwrap();
    assert!((g - truth["gain_dB"].as_f64().unwrap()).abs() < 0.5, "{g}");
    assert!(!ws.path("run/rates.json").exists());
}

#[test]
fn window_and_band_flags_take_effect() {
    let ws = Workspace::new();
    synthesize(&ws, "");
    let cfg = calibrate_config(&ws, "c.toml", "run", "");
    ok(&ws.run(
        &cfg,
        &["--window", "2:6", "--band", "4.55:4.8", "calibrate"],
    ));
    let report = ws.json("run/report.json");
    let w = report["fit_window_2delta"].as_array().unwrap();
    assert_eq!(w[0].as_f64(), Some(2.0));
    assert_eq!(w[1].as_f64(), Some(6.0));
    let bw = report["bandwidth_Hz"].as_f64().unwrap();
    assert!((bw - 0.25e9).abs() < 1.0, "{bw}");
}

#[test]
fn range_study_writes_readable_table() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "c.toml",
        "output_dir = \"rs\"\n[montecarlo]\nrepetitions = 1\nupper_bounds_2delta = [5.0, 8.83]\n",
    );
    let out = ws.run(&cfg, &["--seed", "3", "range-study"]);
    ok(&out);
    let lines = nis_calib::io::read_range_study_file(&ws.path("rs/range_study.csv")).unwrap();
    assert_eq!(lines.len(), 2);
    let meta = ws.json("rs/range_study.json");
    assert_eq!(meta["seed"].as_u64(), Some(3));
    for row in meta["study"]["rows"].as_array().unwrap() {
        assert_eq!(row["spread_rel_error"].as_f64(), Some(0.0));
    }
}
