//! The TOML configuration file.
//!
//! Every key is optional; anything omitted takes the value of the
//! three-channel frequency-multiplexing demonstrator. Unknown keys are
//! rejected. Frequencies are given as wavelengths in nm or offsets in GHz.
//!
//! ```toml
//! [detection]            # analytic sweeps
//! eta_h = 1.0
//! eta_d = 1.0
//!
//! [network]
//! scheme = "fixed_loss"
//! eta_s = 0.85
//! n_modes = 10
//!
//! [sweep]
//! n_max = 40
//! loss_n_modes = 30
//!
//! [fiber]
//! zdw_nm = 1405.0
//! length_m = 100.0
//! calibration_bandwidth_ghz = 160.0   # used when beta3 is absent
//!
//! [pumps]
//! input_nm = 1280.65
//! target_nm = 1284.45
//! power_w = 10.0
//!
//! [experiment]
//! n_bins = 1000000
//! switch_loss_db = 1.3
//!
//! [experiment.detection]
//! eta_d = 0.53
//!
//! [[experiment.channels]]
//! xi_sq = 0.01
//! strength = 0.65
//! at_target = true
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bsfwm::{
    calibrate_beta3, omega_from_nm, FiberSpec, PumpConfig, REFERENCE_BANDWIDTH_HZ,
    REFERENCE_INPUT_NM, REFERENCE_LENGTH_M, REFERENCE_PUMP_POWER_W, REFERENCE_TARGET_NM,
    REFERENCE_ZDW_NM,
};
use crate::error::check_unit;
use crate::mux::{MuPolicy, Scheme, SwitchNetwork};
use crate::photon_stats::{DetectionChain, LossEntry};
use crate::sim::{self, Channel, ExperimentConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub detection: DetectionSection,
    pub network: NetworkSection,
    pub sweep: SweepSection,
    pub fiber: FiberSection,
    pub pumps: PumpSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub eta_h: f64,
    pub eta_d: f64,
    pub dark_click_prob: f64,
    pub loss_budget: Vec<LossEntry>,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            eta_h: 1.0,
            eta_d: 1.0,
            dark_click_prob: 0.0,
            loss_budget: Vec::new(),
        }
    }
}

impl DetectionSection {
    fn chain(&self) -> DetectionChain {
        DetectionChain {
            eta_h: self.eta_h,
            eta_d: self.eta_d,
            dark_click_prob: self.dark_click_prob,
            loss_budget_db: self.loss_budget.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub scheme: Scheme,
    pub eta_s: f64,
    pub n_modes: usize,
    pub mu_policy: MuPolicy,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::FixedLoss,
            eta_s: 0.85,
            n_modes: 10,
            mu_policy: MuPolicy::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub schemes: Vec<Scheme>,
    /// Largest N of `sweep-n`.
    pub n_max: usize,
    /// N of `sweep-loss`.
    pub loss_n_modes: usize,
    /// Switch efficiencies of `sweep-loss`.
    pub eta_grid: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            n_max: 40,
            loss_n_modes: 30,
            eta_grid: (0..=50).map(|i| 0.5 + 0.01 * i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub zdw_nm: f64,
    /// s³/m; fitted to `calibration_bandwidth_ghz` when absent.
    pub beta3: Option<f64>,
    /// s⁴/m
    pub beta4: f64,
    /// 1/(W·m); defaults to complete conversion at the configured power.
    pub gamma: Option<f64>,
    pub length_m: f64,
    pub calibration_bandwidth_ghz: f64,
}

impl Default for FiberSection {
    fn default() -> Self {
        Self {
            zdw_nm: REFERENCE_ZDW_NM,
            beta3: None,
            beta4: 0.0,
            gamma: None,
            length_m: REFERENCE_LENGTH_M,
            calibration_bandwidth_ghz: REFERENCE_BANDWIDTH_HZ / 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSection {
    /// Input wavelength of the first channel.
    pub input_nm: f64,
    pub target_nm: f64,
    pub power_w: f64,
    pub channels: usize,
    pub spacing_ghz: f64,
    /// Half-width of the efficiency curves written by `phasematch`.
    pub spectrum_span_ghz: f64,
    pub spectrum_points: usize,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            input_nm: REFERENCE_INPUT_NM,
            target_nm: REFERENCE_TARGET_NM,
            power_w: REFERENCE_PUMP_POWER_W,
            channels: 10,
            spacing_ghz: 100.0,
            spectrum_span_ghz: 400.0,
            spectrum_points: 161,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_bins: u64,
    pub bin_period_s: f64,
    pub switch_loss_db: f64,
    pub conversion_eff: f64,
    pub noise_per_pulse: f64,
    pub dark_click_prob: f64,
    pub rng_seed: u64,
    pub workers: usize,
    pub detection: ExperimentDetection,
    pub channels: Vec<Channel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentDetection {
    pub eta_h: f64,
    pub eta_d: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        Self {
            n_bins: d.n_bins,
            bin_period_s: d.bin_period,
            switch_loss_db: d.switch_loss_db,
            conversion_eff: d.conversion_eff,
            noise_per_pulse: d.noise_per_pulse,
            dark_click_prob: d.chain.dark_click_prob,
            rng_seed: d.rng_seed,
            workers: d.workers,
            detection: ExperimentDetection {
                eta_h: d.chain.eta_h,
                eta_d: d.chain.eta_d,
            },
            channels: d.channels,
        }
    }
}

impl Default for ExperimentDetection {
    fn default() -> Self {
        ExperimentSection::default().detection
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.chain().validate()?;
        self.network()?;
        if self.sweep.n_max == 0 {
            return Err(Error::domain("sweep.n_max", 0.0, "[1, inf)"));
        }
        if self.sweep.schemes.is_empty() {
            return Err(Error::Config("sweep.schemes is empty".into()));
        }
        if self.sweep.loss_n_modes == 0 {
            return Err(Error::domain("sweep.loss_n_modes", 0.0, "[1, inf)"));
        }
        for &eta in &self.sweep.eta_grid {
            check_unit("sweep.eta_grid", eta)?;
        }
        self.fiber_uncalibrated().validate()?;
        self.pump_geometry(&self.fiber_uncalibrated()).validate()?;
        if self.pumps.channels == 0 {
            return Err(Error::domain("pumps.channels", 0.0, "[1, inf)"));
        }
        if !(self.fiber.calibration_bandwidth_ghz > 0.0) {
            return Err(Error::domain(
                "fiber.calibration_bandwidth_ghz",
                self.fiber.calibration_bandwidth_ghz,
                "(0, inf) GHz",
            ));
        }
        self.experiment().validate()
    }

    /// Detection chain for the analytic modules.
    pub fn chain(&self) -> DetectionChain {
        self.detection.chain()
    }

    pub fn network(&self) -> Result<SwitchNetwork> {
        SwitchNetwork::new(
            self.network.scheme,
            self.network.eta_s,
            self.network.n_modes,
        )
    }

    fn fiber_uncalibrated(&self) -> FiberSpec {
        let f = &self.fiber;
        FiberSpec {
            omega_zdw: omega_from_nm(f.zdw_nm),
            beta3: f.beta3.unwrap_or(0.0),
            beta4: f.beta4,
            gamma: f
                .gamma
                .unwrap_or(PI / (4.0 * self.pumps.power_w * f.length_m)),
            length: f.length_m,
        }
    }

    fn pump_geometry(&self, fiber: &FiberSpec) -> PumpConfig {
        PumpConfig::phase_matched(
            fiber,
            omega_from_nm(self.pumps.input_nm),
            omega_from_nm(self.pumps.target_nm),
            self.pumps.power_w,
        )
    }

    /// Fibre and first-channel pumps, fitting β³ to the calibration
    /// bandwidth unless it is given explicitly.
    pub fn fiber_and_pumps(&self) -> Result<(FiberSpec, PumpConfig)> {
        let fiber = self.fiber_uncalibrated();
        let pumps = self.pump_geometry(&fiber);
        let beta3 = match self.fiber.beta3 {
            Some(b) => b,
            None => calibrate_beta3(self.fiber.calibration_bandwidth_ghz * 1e9, &pumps, &fiber)?,
        };
        Ok((fiber.with_beta3(beta3), pumps))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            n_bins: e.n_bins,
            bin_period: e.bin_period_s,
            channels: e.channels.clone(),
            chain: DetectionChain {
                eta_h: e.detection.eta_h,
                eta_d: e.detection.eta_d,
                dark_click_prob: e.dark_click_prob,
                loss_budget_db: Vec::new(),
            },
            switch_loss_db: e.switch_loss_db,
            conversion_eff: e.conversion_eff,
            noise_per_pulse: e.noise_per_pulse,
            rng_seed: e.rng_seed,
            workers: e.workers,
        }
    }
}

/// A default value together with where it comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefaultEntry {
    pub key: &'static str,
    pub value: String,
    pub source: &'static str,
}

/// Every default of the configuration file with its origin.
pub fn default_catalog() -> Vec<DefaultEntry> {
    let c = Config::default();
    let e = &c.experiment;
    let entry = |key, value: String, source| DefaultEntry { key, value, source };
    vec![
        entry(
            "detection.eta_h",
            c.detection.eta_h.to_string(),
            "ideal heralding for the scaling analysis",
        ),
        entry(
            "detection.eta_d",
            c.detection.eta_d.to_string(),
            "ideal detection for the scaling analysis",
        ),
        entry(
            "detection.dark_click_prob",
            "0".into(),
            "dark counts neglected in the scaling analysis",
        ),
        entry(
            "network.scheme",
            c.network.scheme.to_string(),
            "frequency switching: loss independent of N",
        ),
        entry(
            "network.eta_s",
            c.network.eta_s.to_string(),
            "switch transmission of the scaled-source scenario",
        ),
        entry(
            "network.n_modes",
            c.network.n_modes.to_string(),
            "10-mode scaled source scenario",
        ),
        entry(
            "network.mu_policy",
            "shared".into(),
            "mu optimised against the lossless network for every scheme",
        ),
        entry(
            "sweep.schemes",
            "all".into(),
            "fixed-loss, log-tree, multi-pass and ideal networks",
        ),
        entry(
            "sweep.n_max",
            c.sweep.n_max.to_string(),
            "N range of the scaling curves",
        ),
        entry(
            "sweep.loss_n_modes",
            c.sweep.loss_n_modes.to_string(),
            "mode count of the loss-tolerance comparison",
        ),
        entry(
            "sweep.eta_grid",
            "0.50..=1.00 step 0.01".into(),
            "switch-efficiency axis of the loss-tolerance comparison",
        ),
        entry(
            "fiber.zdw_nm",
            c.fiber.zdw_nm.to_string(),
            "zero-dispersion wavelength of the dispersion-shifted fiber",
        ),
        entry(
            "fiber.length_m",
            c.fiber.length_m.to_string(),
            "100 m dispersion-shifted fiber",
        ),
        entry(
            "fiber.beta3",
            "calibrated".into(),
            "fitted to the measured acceptance bandwidth",
        ),
        entry(
            "fiber.beta4",
            "0".into(),
            "fourth-order dispersion neglected",
        ),
        entry(
            "fiber.gamma",
            "pi/(4 P L)".into(),
            "complete conversion at 2 gamma P L = pi/2",
        ),
        entry(
            "fiber.calibration_bandwidth_ghz",
            c.fiber.calibration_bandwidth_ghz.to_string(),
            "measured BS-FWM acceptance bandwidth, first channel",
        ),
        entry(
            "pumps.input_nm",
            c.pumps.input_nm.to_string(),
            "first converted heralded channel",
        ),
        entry(
            "pumps.target_nm",
            c.pumps.target_nm.to_string(),
            "target frequency channel",
        ),
        entry(
            "pumps.power_w",
            c.pumps.power_w.to_string(),
            "pump power per pump",
        ),
        entry(
            "pumps.channels",
            c.pumps.channels.to_string(),
            "channel count of the scaled frequency sweep",
        ),
        entry(
            "pumps.spacing_ghz",
            c.pumps.spacing_ghz.to_string(),
            "channel spacing of the scaled frequency sweep",
        ),
        entry(
            "experiment.n_bins",
            e.n_bins.to_string(),
            "simulation length",
        ),
        entry(
            "experiment.bin_period_s",
            e.bin_period_s.to_string(),
            "1 MHz pump trigger rate",
        ),
        entry(
            "experiment.switch_loss_db",
            e.switch_loss_db.to_string(),
            "total loss of the BS-FWM switch",
        ),
        entry(
            "experiment.conversion_eff",
            e.conversion_eff.to_string(),
            "measured BS-FWM internal conversion efficiency",
        ),
        entry(
            "experiment.noise_per_pulse",
            e.noise_per_pulse.to_string(),
            "background photons per pump pulse in the target filter",
        ),
        entry(
            "experiment.dark_click_prob",
            e.dark_click_prob.to_string(),
            "dark counts neglected",
        ),
        entry(
            "experiment.rng_seed",
            e.rng_seed.to_string(),
            "arbitrary fixed seed",
        ),
        entry(
            "experiment.detection.eta_h",
            e.detection.eta_h.to_string(),
            "heralding losses folded into the per-channel pair rate",
        ),
        entry(
            "experiment.detection.eta_d",
            e.detection.eta_d.to_string(),
            "SNSPD quantum efficiency of 53 %",
        ),
        entry(
            "experiment.channels.xi_sq",
            sim::DEFAULT_XI_SQ.to_string(),
            "low-gain regime, about 1 % pairs per pulse and channel",
        ),
        entry(
            "experiment.channels[0].strength",
            sim::DEFAULT_CH0_STRENGTH.to_string(),
            "CH0 pair production lower by a factor of 0.65",
        ),
        entry(
            "experiment.channels[0].at_target",
            "true".into(),
            "CH0 is generated at the target frequency",
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg, Config::default());
        let exp = cfg.experiment();
        assert_eq!(exp.chain.eta_d, 0.53);
        assert_eq!(exp.switch_loss_db, 1.3);
        assert_eq!(exp.noise_per_pulse, 3e-3);
        assert_eq!(exp.channels.len(), 3);
        assert_eq!(exp.channels[0].strength, 0.65);
    }

    #[test]
    fn efficiency_out_of_range() {
        let err = Config::from_toml_str("[network]\neta_s = 1.2\n").unwrap_err();
        assert!(err.to_string().contains("efficiency out of [0,1]"), "{err}");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = Config::from_toml_str("[network]\netas = 0.9\n").unwrap_err();
        assert!(err.to_string().contains("etas"), "{err}");
        assert!(Config::from_toml_str("[nonsense]\n").is_err());
    }

    #[test]
    fn overrides() {
        let cfg = Config::from_toml_str(
            "[network]\nn_modes = 10\neta_s = 0.85\nscheme = \"log-tree\"\n\
             [[experiment.channels]]\nxi_sq = 0.02\n",
        )
        .unwrap();
        let net = cfg.network().unwrap();
        assert_eq!(
            (net.n_modes, net.eta_s, net.scheme),
            (10, 0.85, Scheme::LogTree)
        );
        assert_eq!(
            cfg.experiment().channels,
            vec![Channel::new(0.02, 1.0, false)]
        );
    }

    #[test]
    fn explicit_beta3_skips_calibration() {
        let cfg = Config::from_toml_str("[fiber]\nbeta3 = 5e-41\n").unwrap();
        let (fiber, pumps) = cfg.fiber_and_pumps().unwrap();
        assert_eq!(fiber.beta3, 5e-41);
        assert!((2.0 * fiber.gamma * pumps.power * fiber.length - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn catalog_covers_sections() {
        let cat = default_catalog();
        for prefix in [
            "detection.",
            "network.",
            "sweep.",
            "fiber.",
            "pumps.",
            "experiment.",
        ] {
            assert!(cat.iter().any(|e| e.key.starts_with(prefix)), "{prefix}");
        }
        assert!(cat.iter().all(|e| !e.source.is_empty()));
    }
}
