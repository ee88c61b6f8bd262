use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nis_calib::config::{parse_range, RunConfig};
use nis_calib::constants::ordinary;
use nis_calib::pipeline::{cmd_calibrate, cmd_fit_reflection, cmd_range_study, cmd_synthesize};
use nis_calib::reflection::{Estimate, RateEstimates};
use nis_calib::{Error, Result};

/// Gain and noise-temperature calibration of a cryogenic amplification chain from an NIS
/// junction noise source.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Power-fit window `lo:hi` in units of 2Δ/e.
    #[arg(long, global = true, value_name = "LO:HI")]
    window: Option<String>,
    /// Integration band `lo:hi` in GHz.
    #[arg(long, global = true, value_name = "LO:HI")]
    band: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit reflection traces and extract γ_tr, γ̄_T and γ_x.
    FitReflection,
    /// Fit output power vs bias and report gain and noise temperature.
    Calibrate,
    /// Write synthetic reflection, power and spectrum files.
    Synthesize,
    /// Relative error of the slope coefficient vs the upper edge of the fit window.
    RangeStudy,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = &cli.window {
        cfg.fit.window_2delta = parse_range(w)?;
    }
    if let Some(b) = &cli.band {
        cfg.fit.band_GHz = parse_range(b)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn show(name: &str, e: &Estimate) {
    let mhz = |w: f64| ordinary(w) * 1e-6;
    match e.sigma {
        Some(s) => println!("{name:>12} = {:.4} ± {:.4} MHz·2π", mhz(e.value), mhz(s)),
        None => println!(
            "{name:>12} = {:.4} MHz·2π (uncertainty not estimable)",
            mhz(e.value)
        ),
    }
}

fn show_rates(r: &RateEstimates) {
    show("gamma_tr", &r.gamma_tr);
    show("gamma_bar_T", &r.gamma_bar_t);
    show("gamma_x", &r.gamma_x);
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let out = cfg.output_dir.display();
    match cli.command {
        Command::FitReflection => {
            let fit = cmd_fit_reflection(&cfg)?;
            show_rates(&fit.analysis.rates);
            println!("wrote {out}/rates.json and {out}/residuals/");
        }
        Command::Calibrate => {
            let r = cmd_calibrate(&cfg)?;
            show_rates(&(&r.rates).into());
            let c = &r.calibration;
            println!(
                "           a = {:.6e} ± {:.2e} W/V (V = V_b/2)",
                c.a, r.sigma_a_W_per_V
            );
            println!(
                "         a_b = {:.6e} W/V (full bias)",
                r.a_full_bias_W_per_V
            );
            println!(
                "           G = {:.3} ± {:.3} dB",
                c.gain_db, c.gain_sigma_db
            );
            println!("       T_amp = {:.3} K", c.noise_temperature);
            println!("wrote {out}/report.json and {out}/power_fit.csv");
        }
        Command::Synthesize => {
            let f = cmd_synthesize(&cfg)?;
            for p in [
                &f.reflection_csv,
                &f.power_csv,
                &f.zero_bias_spectrum_csv,
                &f.truth_json,
            ] {
                println!("wrote {}", p.display());
            }
        }
        Command::RangeStudy => {
            let study = cmd_range_study(&cfg)?;
            let gap = cfg.gap_energy();
            println!(
                "{:>10} {:>12} {:>12} {:>7}",
                "eVb/2Δ", "mean|δa|/a", "σ_a/a", "failed"
            );
            for row in &study.rows {
                let pct = |v: Option<f64>| v.map_or("-".into(), |v| format!("{:.3}%", 100.0 * v));
                println!(
                    "{:>10.3} {:>12} {:>12} {:>7}",
                    row.upper_bound.reduced(gap),
                    pct(row.mean_rel_error),
                    pct(row.mean_reported_sigma),
                    row.n_failed
                );
            }
            println!("wrote {out}/range_study.csv and {out}/range_study.json");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
