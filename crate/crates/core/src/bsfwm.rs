//! Bragg-scattering four-wave mixing (BS-FWM) as a frequency switch.
//!
//! Two pumps at `ω_P1`, `ω_P2` translate a single photon from `ω_i` to
//! `ω_t = ω_i + Δω`, with `Δω = ω_P1 - ω_P2`. All frequencies are handled as
//! angular frequencies in rad/s. Around the zero-dispersion frequency
//! `ω_ZDW` the four waves are laid out as detunings
//!
//! ```text
//! pump 1  = ω_ZDW + ΔΩ + Δω/2
//! pump 2  = ω_ZDW + ΔΩ - Δω/2
//! input   = ω_ZDW - ΔΩ - ω̃ - Δω/2
//! target  = ω_ZDW - ΔΩ - ω̃ + Δω/2
//! ```
//!
//! where `ΔΩ = (ω_P1 + ω_P2)/2 - ω_ZDW` and `ω̃` is the offset of the input
//! from the mirror image of the pumps. With the phase mismatch defined as
//! `k = β(ω_t) - β(ω_i) - β(ω_P1) + β(ω_P2)` and a cubic dispersion profile,
//! `k = (β³/2) ω̃ Δω (ω̃ + 2ΔΩ)`, so `ω̃ = 0` is always phase matched.
//! The conversion efficiency depends on `k²` only, so the sign convention of
//! `k` does not affect any observable.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::bisect;
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn omega_from_nm(wavelength_nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

pub fn nm_from_omega(omega: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / omega * 1e9
}

pub fn omega_from_ghz(ghz: f64) -> f64 {
    TAU * ghz * 1e9
}

pub fn ghz_from_omega(omega: f64) -> f64 {
    omega / TAU / 1e9
}

/// Zero-dispersion wavelength of the dispersion-shifted fibre.
pub const REFERENCE_ZDW_NM: f64 = 1405.0;
pub const REFERENCE_LENGTH_M: f64 = 100.0;
/// Peak power per pump.
pub const REFERENCE_PUMP_POWER_W: f64 = 10.0;
/// Target channel and first converted input channel of the demonstrator.
pub const REFERENCE_TARGET_NM: f64 = 1284.45;
pub const REFERENCE_INPUT_NM: f64 = 1280.65;
/// Acceptance bandwidth of the first channel, used to fit β³.
pub const REFERENCE_BANDWIDTH_HZ: f64 = 160e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    /// rad/s
    pub omega_zdw: f64,
    /// s³/m
    pub beta3: f64,
    /// s⁴/m
    pub beta4: f64,
    /// 1/(W·m)
    pub gamma: f64,
    /// m
    pub length: f64,
}

impl FiberSpec {
    /// 100 m of dispersion-shifted fibre with the ZDW at 1405 nm, and γ set
    /// so the reference pumps reach complete conversion (`2γPL = π/2`).
    pub fn reference(beta3: f64) -> Self {
        Self {
            omega_zdw: omega_from_nm(REFERENCE_ZDW_NM),
            beta3,
            beta4: 0.0,
            gamma: PI / (4.0 * REFERENCE_PUMP_POWER_W * REFERENCE_LENGTH_M),
            length: REFERENCE_LENGTH_M,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::domain("length", self.length, "(0, inf) m"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::domain("gamma", self.gamma, "[0, inf) 1/(W m)"));
        }
        if !(self.omega_zdw > 0.0) {
            return Err(Error::domain("omega_zdw", self.omega_zdw, "(0, inf) rad/s"));
        }
        if !self.beta3.is_finite() || !self.beta4.is_finite() {
            return Err(Error::domain("beta3/beta4", self.beta3, "finite"));
        }
        Ok(())
    }

    pub fn with_beta3(self, beta3: f64) -> Self {
        Self { beta3, ..self }
    }

    /// `β(ω) - β(ω_ZDW) - β¹(ω - ω_ZDW)` for a detuning `x = ω - ω_ZDW`.
    /// β² vanishes at the ZDW; the constant and linear terms cancel in any
    /// energy-conserving mismatch.
    pub fn dispersion_offset(&self, x: f64) -> f64 {
        let x3 = x * x * x;
        self.beta3 / 6.0 * x3 + self.beta4 / 24.0 * x3 * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub omega_p1: f64,
    pub omega_p2: f64,
    /// Power per pump in W.
    pub power: f64,
}

impl PumpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) {
            return Err(Error::domain("pump_power", self.power, "[0, inf) W"));
        }
        Ok(())
    }

    /// Pumps that translate `omega_input` to `omega_target` with `ω̃ = 0`.
    /// Pump 2 sits at the mirror image of the target about the ZDW.
    pub fn phase_matched(
        fiber: &FiberSpec,
        omega_input: f64,
        omega_target: f64,
        power: f64,
    ) -> Self {
        let omega_p2 = 2.0 * fiber.omega_zdw - omega_target;
        Self {
            omega_p1: omega_p2 + (omega_target - omega_input),
            omega_p2,
            power,
        }
    }

    /// Pumps converting the 1280.65 nm channel onto the 1284.45 nm target.
    pub fn reference(fiber: &FiberSpec) -> Self {
        Self::phase_matched(
            fiber,
            omega_from_nm(REFERENCE_INPUT_NM),
            omega_from_nm(REFERENCE_TARGET_NM),
            REFERENCE_PUMP_POWER_W,
        )
    }

    /// `Δω = ω_P1 - ω_P2`.
    pub fn delta_omega(&self) -> f64 {
        self.omega_p1 - self.omega_p2
    }

    /// `ΔΩ = (ω_P1 + ω_P2)/2 - ω_ZDW`.
    pub fn delta_big_omega(&self, fiber: &FiberSpec) -> f64 {
        0.5 * (self.omega_p1 + self.omega_p2) - fiber.omega_zdw
    }

    /// Nonlinear coupling `κ = 2γP`.
    pub fn kappa(&self, fiber: &FiberSpec) -> f64 {
        2.0 * fiber.gamma * self.power
    }
}

/// The four interacting waves as detunings from the ZDW, in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourWaves {
    pub input: f64,
    pub target: f64,
    pub pump1: f64,
    pub pump2: f64,
}

pub fn wave_layout(fiber: &FiberSpec, pumps: &PumpConfig, omega_tilde: f64) -> FourWaves {
    let big = pumps.delta_big_omega(fiber);
    let half = 0.5 * pumps.delta_omega();
    FourWaves {
        input: -big - omega_tilde - half,
        target: -big - omega_tilde + half,
        pump1: big + half,
        pump2: big - half,
    }
}

/// Absolute input frequency at offset `ω̃`.
pub fn input_omega(fiber: &FiberSpec, pumps: &PumpConfig, omega_tilde: f64) -> f64 {
    fiber.omega_zdw + wave_layout(fiber, pumps, omega_tilde).input
}

/// Inverse of [`input_omega`].
pub fn omega_tilde_of_input(fiber: &FiberSpec, pumps: &PumpConfig, omega_input: f64) -> f64 {
    fiber.omega_zdw - pumps.delta_big_omega(fiber) - 0.5 * pumps.delta_omega() - omega_input
}

/// Phase mismatch in rad/m: `(β³/2) ω̃ Δω (ω̃ + 2ΔΩ)` plus the fourth-order
/// Taylor term when `beta4 != 0`.
pub fn phase_mismatch(fiber: &FiberSpec, pumps: &PumpConfig, omega_tilde: f64) -> f64 {
    let dw = pumps.delta_omega();
    let big = pumps.delta_big_omega(fiber);
    let cubic = 0.5 * fiber.beta3 * omega_tilde * dw * (omega_tilde + 2.0 * big);
    if fiber.beta4 == 0.0 {
        return cubic;
    }
    // x_t⁴ - x_i⁴ - x_P1⁴ + x_P2⁴, factored as differences of squares.
    let w = wave_layout(fiber, pumps, omega_tilde);
    let signal = dw * (w.target + w.input) * (w.target * w.target + w.input * w.input);
    let pump = -dw * (w.pump2 + w.pump1) * (w.pump2 * w.pump2 + w.pump1 * w.pump1);
    cubic + fiber.beta4 / 24.0 * (signal + pump)
}

/// Phase mismatch evaluated directly from the dispersion profile at the four
/// wave frequencies.
pub fn mismatch_from_dispersion(fiber: &FiberSpec, waves: &FourWaves) -> f64 {
    fiber.dispersion_offset(waves.target)
        - fiber.dispersion_offset(waves.input)
        - fiber.dispersion_offset(waves.pump1)
        + fiber.dispersion_offset(waves.pump2)
}

/// Fraction of the input converted to the target,
/// `κ²/(k² + κ²) · sin²(√(k² + κ²) L)` with `κ = 2γP`.
pub fn conversion_efficiency(k: f64, pumps: &PumpConfig, fiber: &FiberSpec) -> f64 {
    let kappa = pumps.kappa(fiber);
    let g = k.hypot(kappa);
    if g == 0.0 {
        return 0.0;
    }
    let s = (g * fiber.length).sin();
    (kappa / g).powi(2) * s * s
}

/// Efficiency as a function of `ω̃` for fixed pumps.
pub fn efficiency_at(fiber: &FiberSpec, pumps: &PumpConfig, omega_tilde: f64) -> f64 {
    conversion_efficiency(phase_mismatch(fiber, pumps, omega_tilde), pumps, fiber)
}

/// Half-width of the outward scan for the half-maximum crossing.
pub const BANDWIDTH_SCAN_HZ: f64 = 10e12;
/// Bisection tolerance on each crossing.
pub const BANDWIDTH_TOL_HZ: f64 = 1e6;

/// Input-frequency offsets (Hz) of the lower and upper half-maximum
/// crossings around the phase-matched input.
pub fn half_max_crossings(fiber: &FiberSpec, pumps: &PumpConfig) -> Result<(f64, f64)> {
    fiber.validate()?;
    pumps.validate()?;
    let half = 0.5 * efficiency_at(fiber, pumps, 0.0);
    let below = |wt: f64| efficiency_at(fiber, pumps, wt) - half;
    let scan = TAU * BANDWIDTH_SCAN_HZ;
    let tol = TAU * BANDWIDTH_TOL_HZ;

    let crossing = |side: f64| -> Result<f64> {
        let mut inner = 0.0;
        let mut outer = TAU * 10e6;
        loop {
            if below(side * outer) < 0.0 {
                break;
            }
            if outer >= scan {
                return Err(Error::NoHalfCrossing {
                    scan_hz: BANDWIDTH_SCAN_HZ,
                });
            }
            inner = outer;
            outer = (2.0 * outer).min(scan);
        }
        let wt = bisect(|d| below(side * d), inner, outer, tol)?;
        Ok(side * wt)
    };

    // Input frequency moves opposite to ω̃.
    let upper = -crossing(-1.0)? / TAU;
    let lower = -crossing(1.0)? / TAU;
    Ok((lower, upper))
}

/// Full width at half maximum of the efficiency versus input frequency, in Hz.
pub fn acceptance_bandwidth(fiber: &FiberSpec, pumps: &PumpConfig) -> Result<f64> {
    let (lower, upper) = half_max_crossings(fiber, pumps)?;
    Ok(upper - lower)
}

/// Efficiency at input-frequency offsets (Hz) from the phase-matched input.
pub fn efficiency_spectrum(fiber: &FiberSpec, pumps: &PumpConfig, offsets_hz: &[f64]) -> Vec<f64> {
    offsets_hz
        .iter()
        .map(|&nu| efficiency_at(fiber, pumps, -TAU * nu))
        .collect()
}

/// Pumps for channel `index` (1-based) of a sweep that keeps pump 2 and the
/// target fixed and grows `|Δω|` by `spacing_hz` per channel.
pub fn channel_pumps(base: &PumpConfig, index: usize, spacing_hz: f64) -> PumpConfig {
    let dw0 = base.delta_omega();
    let step = TAU * spacing_hz * (index.saturating_sub(1)) as f64;
    let dw = dw0 + if dw0 < 0.0 { -step } else { step };
    PumpConfig {
        omega_p1: base.omega_p2 + dw,
        ..*base
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub channel: usize,
    pub delta_omega_ghz: f64,
    pub peak_efficiency: f64,
    pub bandwidth_ghz: f64,
}

/// Peak efficiency and acceptance bandwidth for `n_channels` channels spaced
/// by `spacing_hz`, each phase matched by symmetric placement.
pub fn channel_sweep(
    fiber: &FiberSpec,
    base_pumps: &PumpConfig,
    n_channels: usize,
    spacing_hz: f64,
) -> Result<Vec<ChannelRow>> {
    if n_channels == 0 {
        return Err(Error::domain("n_channels", 0.0, "[1, inf)"));
    }
    (1..=n_channels)
        .into_par_iter()
        .map(|j| {
            let pumps = channel_pumps(base_pumps, j, spacing_hz);
            Ok(ChannelRow {
                channel: j,
                delta_omega_ghz: ghz_from_omega(pumps.delta_omega()),
                peak_efficiency: efficiency_at(fiber, &pumps, 0.0),
                bandwidth_ghz: acceptance_bandwidth(fiber, &pumps)? / 1e9,
            })
        })
        .collect()
}

/// Search range of β³ in s³/m.
pub const BETA3_BRACKET: (f64, f64) = (1e-44, 1e-38);
/// Accepted calibration residual.
pub const CALIBRATION_TOL_HZ: f64 = 1e9;

/// Fits β³ so the acceptance bandwidth of `pumps` equals `target_hz`.
/// The `beta3` already stored in `fiber` is ignored.
pub fn calibrate_beta3(target_hz: f64, pumps: &PumpConfig, fiber: &FiberSpec) -> Result<f64> {
    if !(target_hz > 0.0) {
        return Err(Error::domain("target_bandwidth", target_hz, "(0, inf) Hz"));
    }
    pumps.validate()?;
    if efficiency_at(&fiber.with_beta3(0.0), pumps, 0.0) <= 0.0 {
        return Err(Error::NoSolution("pumps give zero peak efficiency".into()));
    }
    // Too little dispersion pushes the half-maximum beyond the scan window:
    // that counts as "wider than any target".
    let residual =
        |log_b3: f64| match acceptance_bandwidth(&fiber.with_beta3(10f64.powf(log_b3)), pumps) {
            Ok(bw) => bw - target_hz,
            Err(_) => f64::INFINITY,
        };
    let (lo, hi) = (BETA3_BRACKET.0.log10(), BETA3_BRACKET.1.log10());
    let log_b3 = bisect(residual, lo, hi, 1e-7)?;
    let beta3 = 10f64.powf(log_b3);
    let achieved = acceptance_bandwidth(&fiber.with_beta3(beta3), pumps)?;
    if (achieved - target_hz).abs() > CALIBRATION_TOL_HZ {
        return Err(Error::NoSolution(format!(
            "calibrated bandwidth {achieved:e} Hz misses target {target_hz:e} Hz"
        )));
    }
    Ok(beta3)
}
