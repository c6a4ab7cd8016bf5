//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Every criterion runs even when an
//! earlier one fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fried_core::blind::{blind_deconvolve, sample_tv_curve, BlindConfig};
use fried_core::deconv::{apply_blur, deconvolve_fried, u_update, SolverConfig};
use fried_core::fft::Fft2;
use fried_core::framelet::{decompose, reconstruct};
use fried_core::fried_kernel::{build_kernel, coeff_a, mtf_diffraction, mtf_short_exposure, sigma};
use fried_core::imaging::{
    bar_chart, bundled_scene, psnr, save_image, simulate_blur, textured_scene,
};
use fried_core::{GrayImage, OpticalParams, OpticalSystem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WAVELENGTH_M: f64 = 700e-9;
const PATH_M: f64 = 500.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
}

fn table1_system() -> OpticalSystem {
    OpticalSystem::new(0.07, PATH_M, WAVELENGTH_M, 1.0).unwrap()
}

fn table1_config() -> BlindConfig {
    BlindConfig {
        cn2_min: 0.5e-14,
        cn2_max: 2.5e-13,
        n_samples: 10,
        poly_degree: 5,
        solver: SolverConfig::new(1e5, 10.0, 3).unwrap(),
    }
}

fn tight_frame() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut odd = 0;
    for _ in 0..100 {
        let w = rng.random_range(1..=48);
        let h = rng.random_range(1..=48);
        if w % 2 == 1 || h % 2 == 1 {
            odd += 1;
        }
        let u = random_image(&mut rng, w, h);
        worst = worst.max(reconstruct(&decompose(&u)).max_abs_diff(&u).unwrap());
    }
    outcome(
        worst < 1e-10 && odd > 0,
        format!("max |D^T D u - u| = {worst:.2e} over 100 images ({odd} with an odd side)"),
    )
}

fn mtf_analytics() -> Outcome {
    let tol = 1e-12;
    let mut worst = 0.0f64;
    worst = worst.max((mtf_diffraction(0.0).unwrap() - 1.0).abs());
    for w in [1.0, 1.0 + 1e-9, 1.2, 2.0, 50.0] {
        worst = worst.max(mtf_diffraction(w).unwrap().abs());
    }
    for q in [0.1, 1.0, 2.67, 10.0] {
        for x in [1e-3, 0.5, 1.59, 5.0, 30.0] {
            worst = worst.max((mtf_short_exposure(0.0, q, x).unwrap() - 1.0).abs());
        }
    }
    let q0 = -1.5;
    for eps in [1e-13, 1e-14] {
        worst = worst.max((coeff_a(q0 - eps) - coeff_a(q0 + eps)).abs());
    }
    worst = worst.max((coeff_a(q0) - 0.840).abs());
    for i in 0..=400 {
        let q = -20.0 + 0.1 * i as f64;
        worst = worst.max((sigma(q) + sigma(-q)).abs());
    }
    outcome(
        worst < tol,
        format!("worst analytic deviation {worst:.2e} (tol {tol:e})"),
    )
}

fn dense_blur_matrix(kernel: &fried_core::FriedKernel, w: usize, h: usize) -> DMatrix<f64> {
    let n = w * h;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let e = GrayImage::from_fn(w, h, |x, y| if y * w + x == j { 1.0 } else { 0.0 }).unwrap();
        let col = apply_blur(&e, kernel).unwrap();
        for (i, v) in col.data().iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    a
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &(w, h) in &[(8, 8), (16, 16)] {
        for &(d, cn2, mu, eta) in &[
            (0.07, 5e-14, 1e5, 10.0),
            (0.5, 2e-13, 1e3, 10.0),
            (0.05, 1e-13, 10.0, 2.0),
        ] {
            let optics = OpticalParams::new(d, PATH_M, WAVELENGTH_M, cn2, 1.0).unwrap();
            let kernel = build_kernel(&optics, w, h).unwrap();
            let g = random_image(&mut rng, w, h);
            let frame = random_image(&mut rng, w, h);
            let config = SolverConfig::new(mu, eta, 1).unwrap();
            let fast =
                u_update(&Fft2::new(w, h).forward_real(&g), &kernel, &frame, &config).unwrap();

            let a = dense_blur_matrix(&kernel, w, h);
            let n = w * h;
            let lhs = a.transpose() * &a * mu + DMatrix::identity(n, n) * eta;
            let gv = DVector::from_column_slice(g.data());
            let fv = DVector::from_column_slice(frame.data());
            let rhs = a.transpose() * gv * mu + fv * eta;
            let dense = lhs.lu().solve(&rhs).expect("normal matrix is invertible");
            for (x, y) in fast.data().iter().zip(dense.iter()) {
                worst = worst.max((x - y).abs());
            }
            cases += 1;
        }
    }
    outcome(
        worst < 1e-8,
        format!("max |FFT u-update - dense solve| = {worst:.2e} over {cases} instances"),
    )
}

fn nonblind_gain() -> Outcome {
    let scene = bundled_scene();
    let config = SolverConfig::new(1e5, 10.0, 3).unwrap();
    let mut gains = Vec::new();
    for cn2 in [7e-14, 2e-13, 5e-13] {
        let optics = OpticalParams::new(0.5, PATH_M, WAVELENGTH_M, cn2, 1.0).unwrap();
        let blurred = simulate_blur(&scene, &optics, 0.0, 0).unwrap();
        let restored = deconvolve_fried(&blurred, &optics, &config).unwrap();
        gains.push(psnr(&restored, &scene).unwrap().db() - psnr(&blurred, &scene).unwrap().db());
    }
    let all_above = gains.iter().all(|&g| g >= 3.0);
    let non_increasing = gains.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        all_above && non_increasing,
        format!(
            "PSNR gains {:.2} / {:.2} / {:.2} dB at Cn² 7e-14 / 2e-13 / 5e-13 (need >= 3 dB, non-increasing)",
            gains[0], gains[1], gains[2]
        ),
    )
}

fn blurred_scene(cn2: f64) -> GrayImage {
    simulate_blur(
        &bundled_scene(),
        &table1_system().with_cn2(cn2).unwrap(),
        0.0,
        0,
    )
    .unwrap()
}

fn tv_curve_shape() -> Outcome {
    let config = table1_config();
    let curve = sample_tv_curve(&blurred_scene(5e-14), &table1_system(), &config).unwrap();
    let argmax = curve.sample_argmax().unwrap();
    let interior = argmax != 0 && argmax + 1 != curve.samples.len();
    let tvs: Vec<String> = curve
        .samples
        .iter()
        .map(|s| format!("{:.3}", s.1))
        .collect();
    outcome(
        interior,
        format!(
            "sampled TV maximum at index {argmax} (Cn² {:.3e}); normalized TV = [{}]",
            curve.samples[argmax].0,
            tvs.join(", ")
        ),
    )
}

fn estimate_reproduction() -> Outcome {
    let truth = 5e-14;
    let result =
        blind_deconvolve(&blurred_scene(truth), &table1_system(), &table1_config()).unwrap();
    let err = (result.estimate.cn2 - truth).abs() / truth;
    outcome(
        err <= 0.4,
        format!(
            "estimate {:.3e} for true {truth:e}: relative error {err:.3} (tol 0.4), saturated = {}",
            result.estimate.cn2,
            result.estimate.saturated()
        ),
    )
}

fn table1_pattern() -> Outcome {
    let mut estimates = Vec::new();
    let mut ratios_ok = true;
    let mut detail = Vec::new();
    for truth in [1.5e-14, 7.6e-14, 13.8e-14] {
        let result =
            blind_deconvolve(&blurred_scene(truth), &table1_system(), &table1_config()).unwrap();
        let ratio = result.estimate.cn2 / truth;
        ratios_ok &= (0.5..=2.0).contains(&ratio);
        detail.push(format!(
            "{truth:.2e} -> {:.3e} (ratio {ratio:.2})",
            result.estimate.cn2
        ));
        estimates.push(result.estimate.cn2);
    }
    let increasing = estimates.windows(2).all(|w| w[1] > w[0]);
    outcome(
        ratios_ok && increasing,
        format!("{}; strictly increasing = {increasing}", detail.join(", ")),
    )
}

fn saturation() -> Outcome {
    let system = table1_system();
    let config = table1_config();
    let chart = bar_chart(256).unwrap();
    let blurred = simulate_blur(&chart, &system.with_cn2(5e-14).unwrap(), 0.0, 0).unwrap();
    let result = blind_deconvolve(&blurred, &system, &config).unwrap();
    outcome(
        result.estimate.cn2 == config.cn2_max && result.estimate.saturated(),
        format!(
            "bar chart estimate {:.3e}, saturation {:?}",
            result.estimate.cn2, result.estimate.saturation
        ),
    )
}

struct Run {
    stdout: Vec<u8>,
}

fn fried(dir: &Path, args: &[&str]) -> Result<Run, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fried"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`fried {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(Run { stdout: out.stdout })
}

fn same_bytes(dir: &Path, a: &str, b: &str) -> Result<(), String> {
    let read = |p: &str| std::fs::read(dir.join(p)).map_err(|e| format!("{p}: {e}"));
    if read(a)? == read(b)? {
        Ok(())
    } else {
        Err(format!("{a} and {b} differ"))
    }
}

fn manifest_reruns() -> Result<usize, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir: PathBuf = tmp.path().to_path_buf();
    save_image(&bundled_scene(), dir.join("scene.png")).map_err(|e| e.to_string())?;
    save_image(&textured_scene(64, 9).unwrap(), dir.join("small.pgm"))
        .map_err(|e| e.to_string())?;
    let mut checked = 0;

    fried(
        &dir,
        &[
            "kernel",
            "k1.csv",
            "--diameter-m",
            "0.05",
            "--cn2",
            "5e-14",
            "--samples",
            "50",
        ],
    )?;
    fried(
        &dir,
        &["kernel", "k2.csv", "--config", "k1.csv.manifest.json"],
    )?;
    same_bytes(&dir, "k1.csv", "k2.csv")?;
    checked += 1;

    fried(
        &dir,
        &[
            "blur",
            "scene.png",
            "b1.png",
            "--diameter-m",
            "0.5",
            "--cn2",
            "7e-14",
            "--noise-sigma",
            "0.01",
            "--seed",
            "42",
        ],
    )?;
    fried(
        &dir,
        &[
            "blur",
            "scene.png",
            "b2.png",
            "--config",
            "b1.png.manifest.json",
        ],
    )?;
    same_bytes(&dir, "b1.png", "b2.png")?;
    checked += 1;

    fried(
        &dir,
        &[
            "deblur",
            "b1.png",
            "d1.png",
            "--diameter-m",
            "0.5",
            "--cn2",
            "7e-14",
            "--iters",
            "2",
        ],
    )?;
    fried(
        &dir,
        &[
            "deblur",
            "b1.png",
            "d2.png",
            "--config",
            "d1.png.manifest.json",
        ],
    )?;
    same_bytes(&dir, "d1.png", "d2.png")?;
    checked += 1;

    let first = fried(
        &dir,
        &[
            "blind-deblur",
            "small.pgm",
            "r1.pgm",
            "--curve-out",
            "c1.csv",
            "--threads",
            "3",
        ],
    )?;
    let second = fried(
        &dir,
        &[
            "blind-deblur",
            "small.pgm",
            "r2.pgm",
            "--curve-out",
            "c2.csv",
            "--threads",
            "1",
            "--config",
            "r1.pgm.manifest.json",
        ],
    )?;
    same_bytes(&dir, "r1.pgm", "r2.pgm")?;
    same_bytes(&dir, "c1.csv", "c2.csv")?;
    if first.stdout != second.stdout {
        return Err("blind-deblur JSON lines differ".into());
    }
    checked += 1;

    fried(&dir, &["repro-table1", "t1"])?;
    fried(
        &dir,
        &["repro-table1", "t2", "--config", "t1/manifest.json"],
    )?;
    for name in [
        "table1.csv",
        "table1.md",
        "curve_1.csv",
        "curve_2.csv",
        "curve_3.csv",
    ] {
        same_bytes(&dir, &format!("t1/{name}"), &format!("t2/{name}"))?;
    }
    checked += 1;
    Ok(checked)
}

fn determinism() -> Outcome {
    match manifest_reruns() {
        Ok(n) => outcome(
            true,
            format!("{n} commands rerun from their manifests, outputs bit-identical"),
        ),
        Err(e) => outcome(false, e),
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            1,
            "tight-frame identity",
            Duration::from_secs(5),
            tight_frame,
        ),
        (2, "MTF analytics", Duration::from_secs(5), mtf_analytics),
        (
            3,
            "solver oracle equivalence",
            Duration::from_secs(10),
            solver_oracle,
        ),
        (
            4,
            "nonblind restoration gain",
            Duration::from_secs(30),
            nonblind_gain,
        ),
        (
            5,
            "TV-curve interior maximum",
            Duration::from_secs(60),
            tv_curve_shape,
        ),
        (
            6,
            "blind estimate at 5e-14",
            Duration::from_secs(60),
            estimate_reproduction,
        ),
        (
            7,
            "three-case estimate pattern",
            Duration::from_secs(180),
            table1_pattern,
        ),
        (
            8,
            "saturation on bar chart",
            Duration::from_secs(60),
            saturation,
        ),
        (
            9,
            "manifest determinism",
            Duration::from_secs(600),
            determinism,
        ),
    ];
    let mut failures = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        let timing = if in_time {
            format!("{:.1} s", elapsed.as_secs_f64())
        } else {
            format!(
                "{:.1} s, over the {} s limit",
                elapsed.as_secs_f64(),
                limit.as_secs()
            )
        };
        println!(
            "{} criterion {id} ({name}): {} [{timing}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
