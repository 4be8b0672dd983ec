//! Command-line surface of the simulator: `run`, `sweep`, `ode` and `presets`.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 on a usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};

use gbm_core::experiments::{default_sweep_values, param_range, DEFAULT_PARAMS, RING_SWEEP_PARAMS};
use gbm_core::experiments::{sweep, VasculatureIc};
use gbm_core::io::{
    format_number, read_config, write_metrics_csv, write_snapshot, write_snapshot_vtk, RunConfig,
};
use gbm_core::{run_homogeneous, Error, FieldTriple, ParamName, Result, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Header of the homogeneous-mode trajectory file.
pub const ODE_HEADER: &str = "t,T,N,Phi";

#[derive(Debug, Parser)]
#[command(
    name = "gbm",
    version,
    about = "Glioblastoma growth simulator (tumor, necrosis, vasculature)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv plus field snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `[output] dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one simulation per value of a rate, each into its own subdirectory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of kappa1, alpha, beta1, beta2, gamma, delta.
        #[arg(long)]
        param: String,
        /// Comma-separated values; defaults to the rate's range minimum, default and maximum.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the spatially homogeneous system and write ode.csv.
    Ode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default rates and their study ranges.
    Presets,
}

/// Entry point shared by the binary and the tests. `argv[0]` is the program name.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => cmd_sweep(&config, &param, values, out.as_deref()),
        Command::Ode { config, out } => cmd_ode(&config, out.as_deref()),
        Command::Presets => {
            print!("{}", presets_text());
            Ok(())
        }
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Human-readable listing of the default rates and study ranges.
pub fn presets_text() -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# rate=default  [min, max]");
    for name in ParamName::ALL {
        let (lo, mid, hi) = param_range(name);
        debug_assert_eq!(mid, DEFAULT_PARAMS.get(name));
        let tag = if RING_SWEEP_PARAMS.contains(&name) {
            "ring and surface studies"
        } else {
            "surface study"
        };
        let _ = writeln!(out, "{name}={mid}  [{lo}, {hi}]  varied in the {tag}");
    }
    out
}

fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| {
            Error::param("out", "no output directory: pass --out or set [output] dir")
        })?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Write `metrics.csv` and one snapshot per stored state into `dir`.
pub fn write_run(cfg: &RunConfig, output: &RunOutput, dir: &Path) -> Result<()> {
    write_metrics_csv(&output.metrics, &dir.join("metrics.csv"))?;
    let mesh = cfg.scenario.build_mesh()?;
    let every = cfg.scenario.solver.snapshot_every;
    let last = output.snapshots.len().saturating_sub(1);
    for (i, state) in output.snapshots.iter().enumerate() {
        // all snapshots but the last are evenly spaced; the last is the final step
        let step = if i == last { output.steps } else { i * every };
        let stem = format!("snapshot_{step:08}");
        write_snapshot(state, &mesh, &dir.join(format!("{stem}.csv")))?;
        if cfg.write_vtk {
            write_snapshot_vtk(state, &mesh, &dir.join(format!("{stem}.vtk")))?;
        }
    }
    if !output.bounds.is_clean() {
        warn!(
            "{} bound-monitor violations; first: {:?}",
            output.bounds.violations, output.bounds.first_violation
        );
    }
    Ok(())
}

fn cmd_run(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = read_config(config)?;
    let dir = output_dir(&cfg, out)?;
    info!(
        "running {:?} scenario to t={} ({} steps)",
        cfg.kind,
        cfg.scenario.solver.t_final,
        cfg.scenario.solver.n_steps()
    );
    let output = cfg.scenario.run()?;
    info!("done: {} CG iterations in total", output.cg_iterations);
    write_run(&cfg, &output, &dir)
}

fn cmd_sweep(
    config: &Path,
    param: &str,
    values: Option<Vec<f64>>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = read_config(config)?;
    let name: ParamName = param.parse()?;
    let values = values.unwrap_or_else(|| default_sweep_values(name));
    let dir = output_dir(&cfg, out)?;
    info!("sweeping {name} over {values:?}");
    let result = sweep(&cfg.scenario, name, &values)?;
    for entry in &result.entries {
        let sub = dir.join(format!("{name}={}", format_number(entry.value)));
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mut entry_cfg = cfg.clone();
        entry_cfg.scenario.params.set(name, entry.value);
        write_run(&entry_cfg, &entry.output, &sub)?;
    }
    Ok(())
}

/// Homogeneous initial value from a config: tumor peak, necrosis level and
/// the uniform vasculature level (the base level for a zoned layout).
pub fn homogeneous_initial(cfg: &RunConfig) -> FieldTriple {
    let s = &cfg.scenario;
    let phi = match &s.vasculature_ic {
        VasculatureIc::Uniform(level) => *level,
        VasculatureIc::Zones { base, .. } => *base,
    };
    FieldTriple::new(s.tumor_ic.peak, s.necrosis_ic, phi)
}

/// `t,T,N,Phi` rows, one every `every` steps plus the final one.
pub fn format_trajectory(trajectory: &[FieldTriple], dt: f64, every: usize) -> String {
    let mut out = String::from(ODE_HEADER);
    out.push('\n');
    let last = trajectory.len().saturating_sub(1);
    for (k, s) in trajectory.iter().enumerate() {
        if k % every == 0 || k == last {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                format_number(k as f64 * dt),
                format_number(s.t_density),
                format_number(s.n_density),
                format_number(s.phi_density)
            );
        }
    }
    out
}

fn cmd_ode(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = read_config(config)?;
    let dir = output_dir(&cfg, out)?;
    let s = &cfg.scenario;
    let initial = homogeneous_initial(&cfg);
    info!("homogeneous run from {initial:?} to t={}", s.solver.t_final);
    let trajectory = run_homogeneous(initial, &s.params, s.solver.dt, s.solver.t_final)?;
    let path = dir.join("ode.csv");
    std::fs::write(
        &path,
        format_trajectory(&trajectory, s.solver.dt, s.solver.metrics_every),
    )
    .map_err(|e| Error::io(&path, e))
}
