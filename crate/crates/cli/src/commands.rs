use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fried_core::blind::{blind_deconvolve, Cn2Estimate, Saturation};
use fried_core::deconv::deconvolve_fried;
use fried_core::fried_kernel::{kernel_profile, write_profile_csv};
use fried_core::imaging::{bundled_scene, load_image, save_image, simulate_blur};
use serde_json::json;

use crate::config::{
    BlindSection, KernelSection, OpticsSection, RunConfig, SimulationSection, SolverSection,
    DEFAULT_KERNEL_SAMPLES,
};
use crate::error::{io_error, CliError};

/// True turbulence strengths of the three simulated cases.
pub const TABLE1_CN2: [f64; 3] = [1.5e-14, 7.6e-14, 13.8e-14];

const OMEGA_MAX: f64 = 1.2;

fn required(
    path: Option<PathBuf>,
    file: &Option<PathBuf>,
    what: &str,
) -> Result<PathBuf, CliError> {
    path.or_else(|| file.clone())
        .ok_or_else(|| CliError::Config(format!("missing {what} path")))
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn optics_of(file: &RunConfig, flags: &OpticsSection) -> OpticsSection {
    file.optics
        .clone()
        .unwrap_or_default()
        .overlay(flags)
        .resolved()
}

fn solver_of(file: &RunConfig, flags: &SolverSection) -> SolverSection {
    file.solver
        .clone()
        .unwrap_or_default()
        .overlay(flags)
        .resolved()
}

fn blind_of(file: &RunConfig, flags: &BlindSection) -> BlindSection {
    file.blind
        .clone()
        .unwrap_or_default()
        .overlay(flags)
        .resolved()
}

fn simulation_of(file: &RunConfig, flags: &SimulationSection) -> SimulationSection {
    file.simulation
        .clone()
        .unwrap_or_default()
        .overlay(flags)
        .resolved()
}

fn reject_cn2(optics: &OpticsSection, command: &str) -> Result<(), CliError> {
    match optics.cn2 {
        Some(_) => Err(CliError::Config(format!(
            "`{command}` estimates Cn²; do not set cn2"
        ))),
        None => Ok(()),
    }
}

pub fn kernel(
    file: RunConfig,
    output: Option<PathBuf>,
    optics: OpticsSection,
    samples: Option<usize>,
) -> Result<(), CliError> {
    file.check_command("kernel")?;
    let output = required(output, &file.output, "output")?;
    let optics = optics_of(&file, &optics);
    let samples = samples
        .or(file.kernel.as_ref().and_then(|k| k.samples))
        .unwrap_or(DEFAULT_KERNEL_SAMPLES);
    let params = optics.params()?;
    if samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    let omegas: Vec<f64> = match samples {
        1 => vec![0.0],
        n => (0..n)
            .map(|i| OMEGA_MAX * i as f64 / (n - 1) as f64)
            .collect(),
    };
    let rows = kernel_profile(&params, &omegas)?;
    let mut out = create(&output)?;
    write_profile_csv(&mut out, &rows)
        .and_then(|_| out.flush())
        .map_err(|e| io_error(&output, e))?;
    let manifest = RunConfig {
        command: Some("kernel".into()),
        output: Some(output.clone()),
        optics: Some(optics),
        kernel: Some(KernelSection {
            samples: Some(samples),
        }),
        ..Default::default()
    };
    write_text(&manifest_path(&output), &manifest.to_json())
}

pub fn blur(
    file: RunConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    optics: OpticsSection,
    simulation: SimulationSection,
) -> Result<(), CliError> {
    file.check_command("blur")?;
    let input = required(input, &file.input, "input")?;
    let output = required(output, &file.output, "output")?;
    let optics = optics_of(&file, &optics);
    let simulation = simulation_of(&file, &simulation);
    let params = optics.params()?;
    let image = load_image(&input)?;
    let blurred = simulate_blur(
        &image,
        &params,
        simulation.noise_sigma.unwrap(),
        simulation.seed.unwrap(),
    )?;
    save_image(&blurred, &output)?;
    let manifest = RunConfig {
        command: Some("blur".into()),
        input: Some(input),
        output: Some(output.clone()),
        optics: Some(optics),
        simulation: Some(simulation),
        ..Default::default()
    };
    write_text(&manifest_path(&output), &manifest.to_json())
}

pub fn deblur(
    file: RunConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    optics: OpticsSection,
    solver: SolverSection,
) -> Result<(), CliError> {
    file.check_command("deblur")?;
    let input = required(input, &file.input, "input")?;
    let output = required(output, &file.output, "output")?;
    let optics = optics_of(&file, &optics);
    let solver = solver_of(&file, &solver);
    let params = optics.params()?;
    let config = solver.config()?;
    let image = load_image(&input)?;
    let restored = deconvolve_fried(&image, &params, &config)?;
    save_image(&restored, &output)?;
    let manifest = RunConfig {
        command: Some("deblur".into()),
        input: Some(input),
        output: Some(output.clone()),
        optics: Some(optics),
        solver: Some(solver),
        ..Default::default()
    };
    write_text(&manifest_path(&output), &manifest.to_json())
}

fn saturation_label(estimate: &Cn2Estimate) -> Option<&'static str> {
    estimate.saturation.map(|s| match s {
        Saturation::Lower => "lower",
        Saturation::Upper => "upper",
    })
}

pub fn blind_deblur(
    file: RunConfig,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    curve_out: Option<PathBuf>,
    optics: OpticsSection,
    solver: SolverSection,
    blind: BlindSection,
) -> Result<(), CliError> {
    file.check_command("blind-deblur")?;
    let input = required(input, &file.input, "input")?;
    let output = required(output, &file.output, "output")?;
    let curve_out = curve_out.or_else(|| file.curve_out.clone());
    let optics = optics_of(&file, &optics);
    reject_cn2(&optics, "blind-deblur")?;
    let solver = solver_of(&file, &solver);
    let blind = blind_of(&file, &blind);
    let system = optics.system()?;
    let config = blind.config(solver.config()?)?;
    let image = load_image(&input)?;
    let result = blind_deconvolve(&image, &system, &config)?;
    save_image(&result.restored, &output)?;
    if let Some(path) = &curve_out {
        let mut out = create(path)?;
        result
            .curve
            .write_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(path, e))?;
    }
    let manifest = RunConfig {
        command: Some("blind-deblur".into()),
        input: Some(input),
        output: Some(output.clone()),
        curve_out,
        optics: Some(optics),
        solver: Some(solver),
        blind: Some(blind),
        ..Default::default()
    };
    write_text(&manifest_path(&output), &manifest.to_json())?;
    let line = json!({
        "cn2_estimate": result.estimate.cn2,
        "saturated": result.estimate.saturated(),
        "saturation": saturation_label(&result.estimate),
        "cn2_min": config.cn2_min,
        "cn2_max": config.cn2_max,
        "n_samples": config.n_samples,
    });
    println!("{line}");
    Ok(())
}

pub fn repro_table1(
    file: RunConfig,
    out_dir: Option<PathBuf>,
    optics: OpticsSection,
    solver: SolverSection,
    blind: BlindSection,
    simulation: SimulationSection,
) -> Result<(), CliError> {
    file.check_command("repro-table1")?;
    let out_dir = required(out_dir, &file.output, "output directory")?;
    let optics = optics_of(&file, &optics);
    reject_cn2(&optics, "repro-table1")?;
    let solver = solver_of(&file, &solver);
    let blind = blind_of(&file, &blind);
    let simulation = simulation_of(&file, &simulation);
    let system = optics.system()?;
    let config = blind.config(solver.config()?)?;
    fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;

    let scene = bundled_scene();
    let mut csv = String::from("true_cn2,estimated_cn2,ratio,saturated\n");
    let mut md = String::from(
        "| true Cn² (m^-2/3) | estimated Cn² (m^-2/3) | ratio | saturated |\n|---|---|---|---|\n",
    );
    for (i, &truth) in TABLE1_CN2.iter().enumerate() {
        let blurred = simulate_blur(
            &scene,
            &system.with_cn2(truth)?,
            simulation.noise_sigma.unwrap(),
            simulation.seed.unwrap().wrapping_add(i as u64),
        )?;
        let result = blind_deconvolve(&blurred, &system, &config)?;
        let est = result.estimate.cn2;
        let ratio = est / truth;
        let saturated = result.estimate.saturated();
        csv.push_str(&format!("{truth:e},{est:e},{ratio},{saturated}\n"));
        md.push_str(&format!(
            "| {truth:.3e} | {est:.3e} | {ratio:.3} | {saturated} |\n"
        ));
        let curve_path = out_dir.join(format!("curve_{}.csv", i + 1));
        let mut out = create(&curve_path)?;
        result
            .curve
            .write_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(&curve_path, e))?;
    }
    write_text(&out_dir.join("table1.csv"), &csv)?;
    write_text(&out_dir.join("table1.md"), &md)?;
    let manifest = RunConfig {
        command: Some("repro-table1".into()),
        output: Some(out_dir.clone()),
        optics: Some(optics),
        solver: Some(solver),
        blind: Some(blind),
        simulation: Some(simulation),
        ..Default::default()
    };
    write_text(&out_dir.join("manifest.json"), &manifest.to_json())?;
    print!("{md}");
    Ok(())
}
