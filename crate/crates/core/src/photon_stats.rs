//! Photon-number statistics of a heralded two-mode squeezed source.
//!
//! A single SPDC channel emits `n` pairs with the thermal distribution
//! `p(n) = (1 - |ξ|²) |ξ|^{2n}`. Both arms are read out with bucket
//! (click/no-click) detectors. The closed forms here omit dark counts; those
//! only enter the Monte Carlo simulator in [`crate::sim`].

use serde::{Deserialize, Serialize};

use crate::error::check_unit;
use crate::{Error, Result};

/// One SPDC channel, parameterised by the squeezing magnitude squared `|ξ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedSource {
    xi_sq: f64,
}

impl SqueezedSource {
    pub fn new(xi_sq: f64) -> Result<Self> {
        check_xi_sq(xi_sq)?;
        Ok(Self { xi_sq })
    }

    pub fn from_mu(mu: f64) -> Result<Self> {
        Self::new(xi_from_mu(mu)?)
    }

    pub fn vacuum() -> Self {
        Self { xi_sq: 0.0 }
    }

    pub fn xi_sq(&self) -> f64 {
        self.xi_sq
    }

    /// Mean photon number per mode.
    pub fn mu(&self) -> f64 {
        self.xi_sq / (1.0 - self.xi_sq)
    }
}

/// A named loss contribution in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossEntry {
    pub label: String,
    pub db: f64,
}

impl LossEntry {
    pub fn new(label: impl Into<String>, db: f64) -> Self {
        Self {
            label: label.into(),
            db,
        }
    }
}

/// Efficiencies of the heralding arm (`eta_h`) and the heralded signal arm
/// (`eta_d`), plus the per-bin dark-click probability used by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    pub eta_h: f64,
    pub eta_d: f64,
    pub dark_click_prob: f64,
    pub loss_budget_db: Vec<LossEntry>,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectionChain {
    pub fn new(eta_h: f64, eta_d: f64) -> Result<Self> {
        let chain = Self {
            eta_h,
            eta_d,
            dark_click_prob: 0.0,
            loss_budget_db: Vec::new(),
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Lossless detection on both arms.
    pub fn ideal() -> Self {
        Self {
            eta_h: 1.0,
            eta_d: 1.0,
            dark_click_prob: 0.0,
            loss_budget_db: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta_h", self.eta_h)?;
        check_unit("eta_d", self.eta_d)?;
        check_unit("dark_click_prob", self.dark_click_prob)?;
        for entry in &self.loss_budget_db {
            if !(entry.db >= 0.0) {
                return Err(Error::domain("loss_budget_db", entry.db, "[0, inf) dB"));
            }
        }
        Ok(())
    }

    /// Total transmission of the loss budget, `10^(-ΣdB/10)`.
    pub fn budget_efficiency(&self) -> f64 {
        db_to_efficiency(self.loss_budget_db.iter().map(|e| e.db).sum())
    }

    /// Loss budget of the heralded arm of the three-channel demonstrator:
    /// source collection, BS-FWM switch, free-space grating, fibre coupling
    /// and detection.
    pub fn reference_signal_budget() -> Vec<LossEntry> {
        vec![
            LossEntry::new("source collection", 8.0),
            LossEntry::new("bs-fwm switch", 1.3),
            LossEntry::new("filter grating", 1.0),
            LossEntry::new("fiber coupling", 2.5),
            LossEntry::new("detector", 3.0),
        ]
    }
}

pub fn db_to_efficiency(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn efficiency_to_db(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

fn check_xi_sq(xi_sq: f64) -> Result<()> {
    if (0.0..1.0).contains(&xi_sq) {
        Ok(())
    } else {
        Err(Error::domain("xi_sq", xi_sq, "[0, 1)"))
    }
}

/// `μ = |ξ|² / (1 - |ξ|²)`.
pub fn mu_from_xi(xi_sq: f64) -> Result<f64> {
    check_xi_sq(xi_sq)?;
    Ok(xi_sq / (1.0 - xi_sq))
}

/// `|ξ|² = μ / (1 + μ)`.
pub fn xi_from_mu(mu: f64) -> Result<f64> {
    if !(mu >= 0.0) || mu.is_infinite() {
        return Err(Error::domain("mu", mu, "[0, inf)"));
    }
    Ok(mu / (1.0 + mu))
}

/// Probability that a bucket detector with efficiency `eta_h` clicks on the
/// heralding arm: `η_h|ξ|² / (1 - (1 - η_h)|ξ|²)`.
pub fn herald_prob(src: &SqueezedSource, eta_h: f64) -> f64 {
    let x = src.xi_sq;
    eta_h * x / (1.0 - (1.0 - eta_h) * x)
}

/// Probability that a heralded event delivers exactly one detected signal
/// photon, `η_d η_h |ξ|² (1 - |ξ|²) / p_h`.
pub fn conditional_single_prob(src: &SqueezedSource, chain: &DetectionChain) -> Result<f64> {
    let p_h = herald_prob(src, chain.eta_h);
    if p_h <= 0.0 {
        return Err(Error::UndefinedConditional("herald probability is zero"));
    }
    let x = src.xi_sq;
    Ok(chain.eta_d * chain.eta_h * x * (1.0 - x) / p_h)
}

/// Multi-photon probability `|ξ|⁴`, ignoring switching losses.
pub fn multi_photon_prob(src: &SqueezedSource) -> f64 {
    src.xi_sq * src.xi_sq
}

/// Largest Fock tail mass the oracle accepts.
pub const FOCK_TAIL_LIMIT: f64 = 1e-10;
pub const FOCK_DEFAULT_N_MAX: usize = 60;

/// Result of the brute-force Fock summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockEstimate {
    pub herald_prob: f64,
    /// Joint probability of a herald click from a single pair whose partner
    /// reaches the signal detector.
    pub joint_single_prob: f64,
    /// `E[m | click]` and `E[m(m-1) | click]` of the signal-arm photon number.
    pub signal_mean: f64,
    pub signal_factorial2: f64,
    /// Probability mass beyond `n_max`.
    pub tail_mass: f64,
}

impl FockEstimate {
    pub fn conditional_single_prob(&self) -> Result<f64> {
        if self.herald_prob <= 0.0 {
            return Err(Error::UndefinedConditional("herald probability is zero"));
        }
        Ok(self.joint_single_prob / self.herald_prob)
    }

    /// Heralded second-order correlation of the signal-arm photon number.
    pub fn heralded_g2(&self) -> Result<f64> {
        if self.herald_prob <= 0.0 {
            return Err(Error::UndefinedConditional("herald probability is zero"));
        }
        if self.signal_mean <= 0.0 {
            return Err(Error::UndefinedConditional("no heralded signal photons"));
        }
        Ok(self.signal_factorial2 / (self.signal_mean * self.signal_mean))
    }
}

/// Binomial pmf row `C(n, k) η^k (1-η)^(n-k)` for `k = 0..=n`.
fn binomial_row(n: usize, eta: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    // Pascal-style recursion keeps every entry a proper probability.
    for m in 1..=n {
        for k in (1..=m).rev() {
            row[k] = row[k] * (1.0 - eta) + row[k - 1] * eta;
        }
        row[0] *= 1.0 - eta;
    }
    row
}

/// Brute-force photon statistics by explicit summation over Fock terms
/// `|ξ|^{2n}(1 - |ξ|²)` with binomial loss on each arm.
pub fn fock_oracle(
    src: &SqueezedSource,
    chain: &DetectionChain,
    n_max: usize,
) -> Result<FockEstimate> {
    if n_max < 20 {
        return Err(Error::domain("n_max", n_max as f64, "[20, inf)"));
    }
    if src.xi_sq > 0.6 {
        return Err(Error::domain(
            "xi_sq",
            src.xi_sq,
            "[0, 0.6] for truncated summation",
        ));
    }
    chain.validate()?;
    let x = src.xi_sq;
    let tail_mass = x.powi(n_max as i32 + 1);
    if tail_mass > FOCK_TAIL_LIMIT {
        return Err(Error::TruncationInadequate {
            tail: tail_mass,
            limit: FOCK_TAIL_LIMIT,
            n_max,
        });
    }

    let mut herald = 0.0;
    let mut joint_single = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut p_n = 1.0 - x;
    for n in 0..=n_max {
        let herald_row = binomial_row(n, chain.eta_h);
        let p_click: f64 = herald_row[1..].iter().sum();
        let w = p_n * p_click;
        herald += w;
        if n == 1 {
            joint_single += w * chain.eta_d;
        }
        let signal_row = binomial_row(n, chain.eta_d);
        for (k, pk) in signal_row.iter().enumerate() {
            let k = k as f64;
            m1 += w * pk * k;
            m2 += w * pk * k * (k - 1.0);
        }
        p_n *= x;
    }

    let (signal_mean, signal_factorial2) = if herald > 0.0 {
        (m1 / herald, m2 / herald)
    } else {
        (0.0, 0.0)
    };
    Ok(FockEstimate {
        herald_prob: herald,
        joint_single_prob: joint_single,
        signal_mean,
        signal_factorial2,
        tail_mass,
    })
}
