use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::{BlindSection, Lowpass, OpticsSection, SimulationSection, SolverSection};
use error::CliError;

/// Atmospheric turbulence deblurring with the Fried kernel.
#[derive(Parser, Debug)]
#[command(name = "fried", version)]
struct Cli {
    /// JSON run configuration; flags override its values. A manifest
    /// written by an earlier run is a valid configuration.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    /// Worker threads for TV-curve sampling (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Export the 1-D kernel profile `omega,m0,msa,mf` over omega in [0, 1.2].
    Kernel {
        /// Output CSV.
        output: Option<PathBuf>,
        #[command(flatten)]
        optics: OpticsFlags,
        /// Number of omega samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Blur an image with the Fried kernel, optionally adding Gaussian noise.
    Blur {
        input: Option<PathBuf>,
        output: Option<PathBuf>,
        #[command(flatten)]
        optics: OpticsFlags,
        #[command(flatten)]
        noise: NoiseFlags,
    },
    /// Nonblind deconvolution at a known Cn².
    Deblur {
        input: Option<PathBuf>,
        output: Option<PathBuf>,
        #[command(flatten)]
        optics: OpticsFlags,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Estimate Cn² from the image itself, then deconvolve.
    BlindDeblur {
        input: Option<PathBuf>,
        output: Option<PathBuf>,
        #[command(flatten)]
        optics: OpticsFlags,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        blind: BlindFlags,
        /// Write the sampled TV curve as CSV.
        #[arg(long, value_name = "CSV")]
        curve_out: Option<PathBuf>,
    },
    /// Regenerate the simulated blind-estimation table from the bundled scene.
    ReproTable1 {
        /// Directory for the CSV/Markdown tables and TV curves.
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        optics: OpticsFlags,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        blind: BlindFlags,
        #[command(flatten)]
        noise: NoiseFlags,
    },
}

#[derive(Args, Debug, Default)]
struct OpticsFlags {
    /// Aperture diameter D in meters.
    #[arg(long)]
    diameter_m: Option<f64>,
    /// Propagation path length L in meters.
    #[arg(long)]
    path_m: Option<f64>,
    /// Wavelength in nanometers.
    #[arg(long)]
    wavelength_nm: Option<f64>,
    /// Turbulence strength Cn² in m^(-2/3), e.g. 5e-14.
    #[arg(long)]
    cn2: Option<f64>,
    /// Place the diffraction cutoff at this fraction of Nyquist.
    #[arg(long)]
    cutoff_scale: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SolverFlags {
    /// Data-fidelity weight.
    #[arg(long)]
    mu: Option<f64>,
    /// Splitting weight; the shrink threshold is 1/eta.
    #[arg(long)]
    eta: Option<f64>,
    /// Bregman iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Whether the framelet lowpass band is thresholded.
    #[arg(long, value_parser = parse_lowpass)]
    lowpass: Option<Lowpass>,
}

#[derive(Args, Debug, Default)]
struct BlindFlags {
    #[arg(long)]
    cn2_min: Option<f64>,
    #[arg(long)]
    cn2_max: Option<f64>,
    /// Number of equidistant Cn² samples on the TV curve.
    #[arg(long)]
    samples: Option<usize>,
    /// Degree of the least-squares fit to the TV curve.
    #[arg(long)]
    poly_degree: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct NoiseFlags {
    /// Standard deviation of additive Gaussian noise (intensities in [0, 1]).
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_lowpass(s: &str) -> Result<Lowpass, String> {
    match s {
        "exempt" => Ok(Lowpass::Exempt),
        "shrink" => Ok(Lowpass::Shrink),
        _ => Err(format!("expected `exempt` or `shrink`, got `{s}`")),
    }
}

impl From<OpticsFlags> for OpticsSection {
    fn from(f: OpticsFlags) -> Self {
        OpticsSection {
            diameter_m: f.diameter_m,
            path_m: f.path_m,
            wavelength_nm: f.wavelength_nm,
            cn2: f.cn2,
            cutoff_scale: f.cutoff_scale,
        }
    }
}

impl From<SolverFlags> for SolverSection {
    fn from(f: SolverFlags) -> Self {
        SolverSection {
            mu: f.mu,
            eta: f.eta,
            n_iter: f.iters,
            lowpass: f.lowpass,
        }
    }
}

impl From<BlindFlags> for BlindSection {
    fn from(f: BlindFlags) -> Self {
        BlindSection {
            cn2_min: f.cn2_min,
            cn2_max: f.cn2_max,
            n_samples: f.samples,
            poly_degree: f.poly_degree,
        }
    }
}

impl From<NoiseFlags> for SimulationSection {
    fn from(f: NoiseFlags) -> Self {
        SimulationSection {
            noise_sigma: f.noise_sigma,
            seed: f.seed,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };
    match cli.command {
        Command::Kernel {
            output,
            optics,
            samples,
        } => commands::kernel(file, output, optics.into(), samples),
        Command::Blur {
            input,
            output,
            optics,
            noise,
        } => commands::blur(file, input, output, optics.into(), noise.into()),
        Command::Deblur {
            input,
            output,
            optics,
            solver,
        } => commands::deblur(file, input, output, optics.into(), solver.into()),
        Command::BlindDeblur {
            input,
            output,
            optics,
            solver,
            blind,
            curve_out,
        } => commands::blind_deblur(
            file,
            input,
            output,
            curve_out,
            optics.into(),
            solver.into(),
            blind.into(),
        ),
        Command::ReproTable1 {
            out_dir,
            optics,
            solver,
            blind,
            noise,
        } => commands::repro_table1(
            file,
            out_dir,
            optics.into(),
            solver.into(),
            blind.into(),
            noise.into(),
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fried: {e}");
            e.exit_code()
        }
    }
}
