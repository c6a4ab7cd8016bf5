//! JSON run configuration. Every field is optional in a file; flags override
//! file values and defaults fill the rest. The resolved form is written back
//! as the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use fried_core::blind::BlindConfig;
use fried_core::deconv::SolverConfig;
use fried_core::framelet::LowpassPolicy;
use fried_core::fried_kernel::{OpticalParams, OpticalSystem};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_DIAMETER_M: f64 = 0.07;
pub const DEFAULT_PATH_M: f64 = 500.0;
pub const DEFAULT_WAVELENGTH_NM: f64 = 700.0;
pub const DEFAULT_KERNEL_SAMPLES: usize = 241;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optics: Option<OpticsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blind: Option<BlindSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lowpass {
    Exempt,
    Shrink,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowpass: Option<Lowpass>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn2_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn2_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly_degree: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    pub fn check_command(&self, command: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != command => Err(CliError::Config(format!(
                "config was written for `{c}`, not `{command}`"
            ))),
            _ => Ok(()),
        }
    }
}

/// Overlays `flag` on `file`: a flag always wins.
pub fn pick<T: Copy>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

impl OpticsSection {
    pub fn overlay(&self, flags: &OpticsSection) -> OpticsSection {
        OpticsSection {
            diameter_m: pick(flags.diameter_m, self.diameter_m),
            path_m: pick(flags.path_m, self.path_m),
            wavelength_nm: pick(flags.wavelength_nm, self.wavelength_nm),
            cn2: pick(flags.cn2, self.cn2),
            cutoff_scale: pick(flags.cutoff_scale, self.cutoff_scale),
        }
    }

    /// Fills geometry defaults. `cn2` is left as given.
    pub fn resolved(&self) -> OpticsSection {
        OpticsSection {
            diameter_m: Some(self.diameter_m.unwrap_or(DEFAULT_DIAMETER_M)),
            path_m: Some(self.path_m.unwrap_or(DEFAULT_PATH_M)),
            wavelength_nm: Some(self.wavelength_nm.unwrap_or(DEFAULT_WAVELENGTH_NM)),
            cn2: self.cn2,
            cutoff_scale: Some(self.cutoff_scale.unwrap_or(1.0)),
        }
    }

    pub fn system(&self) -> Result<OpticalSystem, CliError> {
        let r = self.resolved();
        Ok(OpticalSystem::new(
            r.diameter_m.unwrap(),
            r.path_m.unwrap(),
            r.wavelength_nm.unwrap() * 1e-9,
            r.cutoff_scale.unwrap(),
        )?)
    }

    pub fn params(&self) -> Result<OpticalParams, CliError> {
        let cn2 = self
            .cn2
            .ok_or_else(|| CliError::Config("cn2 is required (use --cn2 or optics.cn2)".into()))?;
        Ok(self.system()?.with_cn2(cn2)?)
    }
}

impl SolverSection {
    pub fn overlay(&self, flags: &SolverSection) -> SolverSection {
        SolverSection {
            mu: pick(flags.mu, self.mu),
            eta: pick(flags.eta, self.eta),
            n_iter: pick(flags.n_iter, self.n_iter),
            lowpass: pick(flags.lowpass, self.lowpass),
        }
    }

    pub fn resolved(&self) -> SolverSection {
        let d = SolverConfig::synthetic();
        SolverSection {
            mu: Some(self.mu.unwrap_or(d.mu)),
            eta: Some(self.eta.unwrap_or(d.eta)),
            n_iter: Some(self.n_iter.unwrap_or(d.n_iter)),
            lowpass: Some(self.lowpass.unwrap_or(Lowpass::Exempt)),
        }
    }

    pub fn config(&self) -> Result<SolverConfig, CliError> {
        let r = self.resolved();
        let lowpass = match r.lowpass.unwrap() {
            Lowpass::Exempt => LowpassPolicy::Exempt,
            Lowpass::Shrink => LowpassPolicy::Shrink,
        };
        Ok(
            SolverConfig::new(r.mu.unwrap(), r.eta.unwrap(), r.n_iter.unwrap())?
                .with_lowpass(lowpass),
        )
    }
}

impl BlindSection {
    pub fn overlay(&self, flags: &BlindSection) -> BlindSection {
        BlindSection {
            cn2_min: pick(flags.cn2_min, self.cn2_min),
            cn2_max: pick(flags.cn2_max, self.cn2_max),
            n_samples: pick(flags.n_samples, self.n_samples),
            poly_degree: pick(flags.poly_degree, self.poly_degree),
        }
    }

    pub fn resolved(&self) -> BlindSection {
        let d = BlindConfig::default();
        BlindSection {
            cn2_min: Some(self.cn2_min.unwrap_or(d.cn2_min)),
            cn2_max: Some(self.cn2_max.unwrap_or(d.cn2_max)),
            n_samples: Some(self.n_samples.unwrap_or(d.n_samples)),
            poly_degree: Some(self.poly_degree.unwrap_or(d.poly_degree)),
        }
    }

    pub fn config(&self, solver: SolverConfig) -> Result<BlindConfig, CliError> {
        let r = self.resolved();
        let config = BlindConfig {
            cn2_min: r.cn2_min.unwrap(),
            cn2_max: r.cn2_max.unwrap(),
            n_samples: r.n_samples.unwrap(),
            poly_degree: r.poly_degree.unwrap(),
            solver,
        };
        config.validate()?;
        Ok(config)
    }
}

impl SimulationSection {
    pub fn overlay(&self, flags: &SimulationSection) -> SimulationSection {
        SimulationSection {
            noise_sigma: pick(flags.noise_sigma, self.noise_sigma),
            seed: pick(flags.seed, self.seed),
        }
    }

    pub fn resolved(&self) -> SimulationSection {
        SimulationSection {
            noise_sigma: Some(self.noise_sigma.unwrap_or(0.0)),
            seed: Some(self.seed.unwrap_or(0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err =
            serde_json::from_str::<RunConfig>(r#"{"optics": {"diameter": 0.1}}"#).unwrap_err();
        assert!(err.to_string().contains("`diameter`"), "{err}");
        let err = serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("`bogus`"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = OpticsSection {
            diameter_m: Some(0.5),
            cn2: Some(1e-14),
            ..Default::default()
        };
        let flags = OpticsSection {
            cn2: Some(2e-14),
            ..Default::default()
        };
        let merged = file.overlay(&flags).resolved();
        assert_eq!(merged.diameter_m, Some(0.5));
        assert_eq!(merged.cn2, Some(2e-14));
        assert_eq!(merged.path_m, Some(DEFAULT_PATH_M));
    }

    #[test]
    fn resolved_round_trips_through_json() {
        let cfg = RunConfig {
            command: Some("deblur".into()),
            optics: Some(
                OpticsSection {
                    cn2: Some(7e-14),
                    ..Default::default()
                }
                .resolved(),
            ),
            solver: Some(SolverSection::default().resolved()),
            ..Default::default()
        };
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn command_mismatch_rejected() {
        let cfg = RunConfig {
            command: Some("blur".into()),
            ..Default::default()
        };
        assert!(cfg.check_command("blur").is_ok());
        assert!(cfg.check_command("deblur").is_err());
    }
}
