//! TOML run configuration. Every key is optional and falls back to the
//! default system parameters; angles are in degrees and lengths carry their
//! unit in the key name.

use std::path::Path;

use anyhow::{bail, Context, Result};
use lwa_orient::estimators::{EstimatorConfig, EstimatorKind};
use lwa_orient::experiments::{ExperimentSpec, LinkBudget};
use lwa_orient::radiation::{AntennaDesign, DEFAULT_GRID_SIZE};
use lwa_orient::special::FitMode;
use lwa_orient::{wavelength, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub antenna: AntennaSection,
    pub scene: SceneSection,
    pub signal: SignalSection,
    pub estimators: EstimatorSection,
    pub loglik: LoglikSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, trials: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaSection {
    pub length_mm: f64,
    pub width_mm: f64,
    pub grating_period_mm: f64,
    pub eps_eff: f64,
    pub leakage_peak: f64,
    pub leakage_edge: f64,
    pub table_grid: usize,
}

impl Default for AntennaSection {
    fn default() -> Self {
        let d = AntennaDesign::default();
        Self {
            length_mm: d.length * 1e3,
            width_mm: d.width * 1e3,
            grating_period_mm: d.grating_period * 1e3,
            eps_eff: d.eps_eff,
            leakage_peak: d.leakage_peak,
            leakage_edge: d.leakage_edge,
            table_grid: DEFAULT_GRID_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub antennas: usize,
    /// Element spacing; defaults to one wavelength at the first subcarrier.
    pub spacing_mm: Option<f64>,
    pub range_m: f64,
    pub sigma_cm: f64,
    pub psi_deg: f64,
    pub phi_deg: f64,
    pub phi_az_deg: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            antennas: 4,
            spacing_mm: None,
            range_m: 20.0,
            sigma_cm: 10.0,
            psi_deg: 60.0,
            phi_deg: 30.0,
            phi_az_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub subcarriers: usize,
    pub f_first_ghz: f64,
    pub f_last_ghz: f64,
    pub samples: usize,
    pub gamma_total_db: f64,
    pub noise: bool,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            subcarriers: 11,
            f_first_ghz: 34.0,
            f_last_ghz: 54.0,
            samples: 20,
            gamma_total_db: 150.0,
            noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub select: Vec<String>,
    pub grid_size: usize,
    pub mc_samples: usize,
    pub fit_mode: FitMode,
    pub mle_budget: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let e = EstimatorConfig::default();
        Self {
            select: EstimatorKind::ALL.iter().map(|k| k.id().to_string()).collect(),
            grid_size: e.grid_size,
            mc_samples: e.mc_samples,
            fit_mode: e.fit_mode,
            mle_budget: 2e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoglikSection {
    pub estimators: Vec<String>,
}

impl Default for LoglikSection {
    fn default() -> Self {
        Self {
            estimators: vec!["mle".into(), "pmle".into(), "amle".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sigma: SigmaSweep,
    pub heatmap: HeatmapSweep,
    #[serde(rename = "F")]
    pub f: FSweepSection,
    pub coverage: CoverageSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaSweep {
    pub values_cm: Vec<f64>,
    pub subcarriers: Vec<usize>,
}

impl Default for SigmaSweep {
    fn default() -> Self {
        Self {
            values_cm: vec![0.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            subcarriers: vec![6, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSweep {
    pub grid: usize,
    pub mle_stride: usize,
}

impl Default for HeatmapSweep {
    fn default() -> Self {
        Self {
            grid: 25,
            mle_stride: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FSweepSection {
    pub subcarriers: Vec<usize>,
    pub samples: Vec<usize>,
    pub band_points: usize,
    pub estimators: Vec<String>,
}

impl Default for FSweepSection {
    fn default() -> Self {
        Self {
            subcarriers: vec![2, 4, 6, 8, 10, 12, 14, 16, 20, 24, 28, 32, 40, 45, 52, 64, 80, 100],
            samples: vec![2, 20],
            band_points: 40,
            estimators: vec!["rpa".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSweep {
    pub subcarriers: Vec<usize>,
    pub links: Vec<LinkSection>,
    pub targets_deg: Vec<f64>,
    pub band_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub gamma_db: f64,
    pub antennas: usize,
}

impl Default for CoverageSweep {
    fn default() -> Self {
        Self {
            subcarriers: vec![4, 16, 64, 256],
            links: vec![
                LinkSection {
                    gamma_db: 150.0,
                    antennas: 4,
                },
                LinkSection {
                    gamma_db: 160.0,
                    antennas: 8,
                },
            ],
            targets_deg: vec![0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0, 90.0],
            band_points: 40,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorKind>> {
        let kinds = names
            .iter()
            .map(|n| n.parse::<EstimatorKind>().map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?;
        if kinds.is_empty() {
            bail!("estimator list is empty");
        }
        Ok(kinds)
    }

    pub fn links(&self) -> Vec<LinkBudget> {
        self.sweep
            .coverage
            .links
            .iter()
            .map(|l| LinkBudget {
                gamma_total_db: l.gamma_db,
                antennas: l.antennas,
            })
            .collect()
    }

    /// Converts to the library's SI/radian experiment spec.
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let a = &self.antenna;
        let s = &self.signal;
        let sc = &self.scene;
        let e = &self.estimators;
        let f_first = s.f_first_ghz * 1e9;
        let f_last = s.f_last_ghz * 1e9;
        let spec = ExperimentSpec {
            design: AntennaDesign {
                length: a.length_mm / 1e3,
                width: a.width_mm / 1e3,
                grating_period: a.grating_period_mm / 1e3,
                eps_eff: a.eps_eff,
                lambda_min: wavelength(f_last),
                lambda_max: wavelength(f_first),
                leakage_peak: a.leakage_peak,
                leakage_edge: a.leakage_edge,
            },
            antennas: sc.antennas,
            spacing: sc.spacing_mm.map(|d| d / 1e3).unwrap_or(SPEED_OF_LIGHT / f_first),
            range: sc.range_m,
            sigma: sc.sigma_cm / 1e2,
            psi: sc.psi_deg.to_radians(),
            phi: sc.phi_deg.to_radians(),
            phi_az: sc.phi_az_deg.to_radians(),
            f_first,
            f_last,
            subcarriers: s.subcarriers,
            samples: s.samples,
            gamma_total_db: s.gamma_total_db,
            table_grid: a.table_grid,
            estimator: EstimatorConfig {
                grid_size: e.grid_size,
                mc_samples: e.mc_samples,
                fit_mode: e.fit_mode,
                ..EstimatorConfig::default()
            },
            estimators: Self::parse_estimators(&e.select).context("estimators.select")?,
            trials: self.run.trials,
            seed: self.run.seed,
            noise: s.noise,
            mle_budget: e.mle_budget,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        let mut spec = cfg.to_spec().unwrap();
        let want = ExperimentSpec::default();
        // mm -> m is not exact in binary floating point
        for (got, exp) in [
            (&mut spec.design.length, want.design.length),
            (&mut spec.design.width, want.design.width),
            (&mut spec.design.grating_period, want.design.grating_period),
        ] {
            assert!((*got / exp - 1.0).abs() < 1e-12);
            *got = exp;
        }
        assert_eq!(spec, want);
    }

    #[test]
    fn sections_override_fields() {
        let cfg = RunConfig::parse(
            "[signal]\nsubcarriers = 16\n[scene]\nsigma_cm = 0\n[sweep.F]\nsamples = [5]\n[sweep.coverage]\nlinks = [{ gamma_db = 140, antennas = 2 }]\n",
        )
        .unwrap();
        let spec = cfg.to_spec().unwrap();
        assert_eq!(spec.subcarriers, 16);
        assert_eq!(spec.sigma, 0.0);
        assert_eq!(cfg.sweep.f.samples, vec![5]);
        assert_eq!(cfg.links()[0].antennas, 2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::parse("[scene]\nsigma = 3\n").unwrap_err();
        assert!(format!("{err:#}").contains("sigma"));
        assert!(RunConfig::parse("[estimators]\nselect = [\"xyz\"]\n")
            .unwrap()
            .to_spec()
            .is_err());
    }
}
