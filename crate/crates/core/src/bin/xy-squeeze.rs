use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xy_squeeze::analysis::output::{self, OutputDir};
use xy_squeeze::analysis::{self, RunConfig};
use xy_squeeze::measurement::{Readout, ShotMeta, ShotSet};
use xy_squeeze::Result;

#[derive(Parser)]
#[command(name = "xy-squeeze", version, about = "Spin squeezing in dipolar XY arrays")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Shots per readout and time point.
    #[arg(long, global = true)]
    shots: Option<usize>,
    /// Exact moments only (same as --shots 0).
    #[arg(long, global = true)]
    exact_only: bool,
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Squeezing time series of the configured protocol.
    Simulate,
    /// Variance versus analysis angle.
    ThetaScan {
        /// Evolution time; the ideal optimum when omitted.
        #[arg(long)]
        t_us: Option<f64>,
    },
    /// Optima and power-law exponents over array sizes.
    Scaling,
    /// WAHUHA cycles inserted at the optimum.
    Floquet {
        /// Cycle counts, e.g. 0,1,2,3.
        #[arg(long, value_delimiter = ',')]
        cycles: Option<Vec<usize>>,
    },
    /// Single-step versus multi-step twisting.
    Multistep,
    /// One-axis-twisting optima versus N.
    Oat,
    /// Entanglement-depth bound curves.
    SmBounds,
    /// Classical point-cloud model.
    Semiclassical,
    /// Detection correction of imported shot files.
    Correct {
        /// Headerless CSV of spin-length shots (+1/-1 per atom).
        #[arg(long)]
        spin_length: PathBuf,
        /// Headerless CSV of variance shots.
        #[arg(long)]
        variance: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.shots {
        cfg.shots = s;
    }
    if cli.exact_only {
        cfg.shots = 0;
    }
    if let Some(d) = &cli.out_dir {
        cfg.output.dir = d.clone();
    }
    cfg.output.svg |= cli.svg;
    cfg.validate()?;
    Ok(cfg)
}

fn fmt_opt(o: &Option<analysis::Optimum>) -> String {
    o.map_or("n/a".into(), |o| format!("{:.3} dB at {:.3} us", o.xi2_db, o.t_us))
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let out = OutputDir::create(&cfg.output.dir, cfg.output.svg)?;
    match &cli.command {
        Command::Simulate => {
            let s = analysis::simulate(&cfg)?;
            output::write_simulation(&out, &cfg, &s)?;
            println!("ideal optimum: {}", fmt_opt(&s.optima.exact));
            println!("raw optimum: {}", fmt_opt(&s.optima.raw));
            println!("corrected optimum: {}", fmt_opt(&s.optima.corrected));
        }
        Command::ThetaScan { t_us } => {
            let s = analysis::theta_scan(&cfg, *t_us)?;
            output::write_theta_scan(&out, &cfg, &s)?;
            println!("t = {:.3} us: fitted theta* = {:.4} (exact {:.4})", s.t_us, s.fit.theta_min, s.exact_theta_star);
        }
        Command::Scaling => {
            let s = analysis::scaling_sweep(&cfg)?;
            output::write_scaling(&out, &cfg, &s)?;
            if let Some(f) = s.exact {
                println!("nu = {:.3} +- {:.3}, mu = {:.3} +- {:.3}", f.nu.value, f.nu.se, f.mu.value, f.mu.se);
            }
        }
        Command::Floquet { cycles } => {
            let cycles = cycles.clone().unwrap_or_else(|| cfg.floquet.cycles.clone());
            let f = analysis::floquet_experiment(&cfg, &cycles)?;
            output::write_floquet(&out, &cfg, &f)?;
            for s in &f.series {
                println!(
                    "n = {}: xi2 < 1 for {:.3} us{}",
                    s.n_cycles,
                    s.squeezed_duration_us,
                    if s.censored { " (censored)" } else { "" }
                );
            }
        }
        Command::Multistep => {
            let m = analysis::multistep_experiment(&cfg)?;
            output::write_multistep(&out, &cfg, &m)?;
            println!("single: {}", fmt_opt(&m.single_optimum));
            println!(
                "multi:  {} (rotation {:.4} rad at {:.3} us)",
                fmt_opt(&m.multi_optimum),
                m.angle_rad,
                m.t_rotate_us
            );
        }
        Command::Oat => {
            let o = analysis::oat_scaling(&cfg.oat.sizes, cfg.oat.chi_n_mhz)?;
            output::write_oat(&out, &cfg, &o)?;
            println!(
                "nu = {:.3} +- {:.3}, mu = {:.3} +- {:.3}",
                o.fit.nu.value, o.fit.nu.se, o.fit.mu.value, o.fit.mu.se
            );
        }
        Command::SmBounds => {
            let s = analysis::sm_bounds(&cfg)?;
            output::write_sm(&out, &cfg, &s)?;
            let d = s.trajectory.iter().filter_map(|p| p.depth_exceeds).max();
            println!("largest bound violated: k = {}", d.map_or("none".into(), |k| k.to_string()));
        }
        Command::Semiclassical => {
            let r = analysis::semiclassical_run(&cfg)?;
            output::write_semiclassical(&out, &cfg, &r)?;
            println!("single: {}", fmt_opt(&r.single_optimum));
            println!("multi:  {}", fmt_opt(&r.multi_optimum));
        }
        Command::Correct { spin_length, variance } => {
            let sl =
                ShotSet::read_csv(spin_length, ShotMeta { readout: Some(Readout::SpinLength), ..Default::default() })?;
            let vs = ShotSet::read_csv(
                variance,
                ShotMeta { readout: Some(Readout::Variance { theta: 0.0 }), ..Default::default() },
            )?;
            let c = analysis::correct_shots(&sl, &vs, &cfg.errors, &cfg)?;
            output::write_correction(&out, &cfg, &c)?;
            println!("xi2 raw = {:.4}, corrected = {:.4}", c.xi2_raw, c.xi2_corrected);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
