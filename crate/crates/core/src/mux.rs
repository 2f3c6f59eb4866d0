//! Switching-network loss models for N×1 multiplexed sources.
//!
//! `N` identical heralded sources feed an N×1 switch. The network routes one
//! heralded photon to the output; its transmission depends on the
//! architecture:
//!
//! | scheme       | transmission                                   |
//! |--------------|------------------------------------------------|
//! | `FixedLoss`  | `η_s` regardless of `N` (frequency switching)   |
//! | `LogTree`    | `η_s^⌈log₂N⌉`                                   |
//! | `MultiPass`  | last heralded slot, `η_s^(N-j)` for slot `j`    |
//! | `Ideal`      | 1                                              |

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_unit;
use crate::numeric::golden_section_max;
use crate::photon_stats::{
    conditional_single_prob, herald_prob, multi_photon_prob, DetectionChain, SqueezedSource,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[serde(alias = "fixed-loss")]
    FixedLoss,
    #[serde(alias = "log-tree")]
    LogTree,
    #[serde(alias = "multi-pass")]
    MultiPass,
    Ideal,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::FixedLoss,
        Scheme::LogTree,
        Scheme::MultiPass,
        Scheme::Ideal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::FixedLoss => "fixed_loss",
            Scheme::LogTree => "log_tree",
            Scheme::MultiPass => "multi_pass",
            Scheme::Ideal => "ideal",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_loss" | "fixed-loss" => Ok(Scheme::FixedLoss),
            "log_tree" | "log-tree" => Ok(Scheme::LogTree),
            "multi_pass" | "multi-pass" => Ok(Scheme::MultiPass),
            "ideal" => Ok(Scheme::Ideal),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchNetwork {
    pub scheme: Scheme,
    pub eta_s: f64,
    pub n_modes: usize,
}

impl SwitchNetwork {
    pub fn new(scheme: Scheme, eta_s: f64, n_modes: usize) -> Result<Self> {
        let net = Self {
            scheme,
            eta_s,
            n_modes,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn ideal(n_modes: usize) -> Self {
        Self {
            scheme: Scheme::Ideal,
            eta_s: 1.0,
            n_modes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta_s", self.eta_s)?;
        if self.n_modes == 0 {
            return Err(Error::domain("n_modes", 0.0, "[1, inf)"));
        }
        Ok(())
    }

    /// Per-switch efficiency actually applied; the ideal scheme ignores `eta_s`.
    fn effective_eta_s(&self) -> f64 {
        match self.scheme {
            Scheme::Ideal => 1.0,
            _ => self.eta_s,
        }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn tree_depth(n: usize) -> u32 {
    debug_assert!(n >= 1);
    usize::BITS - (n - 1).leading_zeros()
}

/// Net transmission of the switching network for the single-factor schemes.
pub fn switch_efficiency(net: &SwitchNetwork) -> Result<f64> {
    match net.scheme {
        Scheme::FixedLoss => Ok(net.eta_s),
        Scheme::LogTree => Ok(net.eta_s.powi(tree_depth(net.n_modes) as i32)),
        Scheme::Ideal => Ok(1.0),
        Scheme::MultiPass => Err(Error::UnsupportedScheme("multi_pass")),
    }
}

/// Probability that at least one of `n_modes` sources heralds, `1 - (1 - p_h)^N`.
pub fn mux_herald_prob(p_h: f64, n_modes: usize) -> f64 {
    -(n_modes as f64 * (-p_h).ln_1p()).exp_m1()
}

/// Probability that a single photon is heralded at the network output.
pub fn mux_single_prob(
    src: &SqueezedSource,
    chain: &DetectionChain,
    net: &SwitchNetwork,
) -> Result<f64> {
    let p_h = herald_prob(src, chain.eta_h);
    if p_h <= 0.0 {
        return Ok(0.0);
    }
    let p_s = conditional_single_prob(src, chain)?;
    let n = net.n_modes;
    match net.scheme {
        Scheme::MultiPass => {
            // Σ_j (1-p_h)^(N-j) p_h p_s η_s^(N-j) = p_h p_s (1 - r^N) / (1 - r)
            let eta_s = net.effective_eta_s();
            let one_minus_r = p_h * eta_s + (1.0 - eta_s);
            let geometric = if one_minus_r <= f64::EPSILON * n as f64 {
                n as f64
            } else {
                -(n as f64 * (-one_minus_r).ln_1p()).exp_m1() / one_minus_r
            };
            Ok(p_h * p_s * geometric)
        }
        _ => Ok(switch_efficiency(net)? * p_s * mux_herald_prob(p_h, n)),
    }
}

/// Bracket of the mean-photon-number search.
pub const MU_BRACKET: (f64, f64) = (1e-4, 10.0);
/// Target absolute precision of the optimised μ.
pub const MU_TOL: f64 = 1e-8;

/// Maximises [`mux_single_prob`] over μ by golden-section search on `log μ`.
/// Returns `(mu_opt, p_opt)`.
pub fn optimize_mu(
    chain: &DetectionChain,
    n_modes: usize,
    objective: &SwitchNetwork,
) -> Result<(f64, f64)> {
    chain.validate()?;
    let net = SwitchNetwork {
        n_modes,
        ..*objective
    };
    net.validate()?;
    let objective = |log_mu: f64| {
        SqueezedSource::from_mu(log_mu.exp())
            .and_then(|src| mux_single_prob(&src, chain, &net))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (lo, hi) = (MU_BRACKET.0.ln(), MU_BRACKET.1.ln());
    // A log-space step of MU_TOL / μ_max bounds the μ-space error by MU_TOL.
    let (log_mu, p) = golden_section_max(objective, lo, hi, MU_TOL / MU_BRACKET.1);
    Ok((log_mu.exp(), p))
}

/// How μ is chosen when sweeping several schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuPolicy {
    /// Optimise once per N against the lossless network and reuse it for
    /// every scheme.
    #[default]
    Shared,
    /// Optimise separately for each scheme.
    PerScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub scheme: Scheme,
    pub n_modes: usize,
    pub eta_s: f64,
    pub mu_opt: f64,
    pub p_mux_single: f64,
    /// `|ξ|⁴` at `mu_opt`, without switching losses.
    pub p_multi: f64,
}

fn evaluate_point(
    chain: &DetectionChain,
    scheme: Scheme,
    eta_s: f64,
    n_modes: usize,
    shared_mu: Option<f64>,
) -> Result<ScalingPoint> {
    let net = SwitchNetwork::new(scheme, eta_s, n_modes)?;
    let mu = match shared_mu {
        Some(mu) => mu,
        None => optimize_mu(chain, n_modes, &net)?.0,
    };
    let src = SqueezedSource::from_mu(mu)?;
    Ok(ScalingPoint {
        scheme,
        n_modes,
        eta_s,
        mu_opt: mu,
        p_mux_single: mux_single_prob(&src, chain, &net)?,
        p_multi: multi_photon_prob(&src),
    })
}

fn points_for(
    chain: &DetectionChain,
    schemes: &[Scheme],
    eta_s: f64,
    n_modes: usize,
    policy: MuPolicy,
) -> Result<Vec<ScalingPoint>> {
    let shared = match policy {
        MuPolicy::Shared => Some(optimize_mu(chain, n_modes, &SwitchNetwork::ideal(n_modes))?.0),
        MuPolicy::PerScheme => None,
    };
    schemes
        .iter()
        .map(|&s| evaluate_point(chain, s, eta_s, n_modes, shared))
        .collect()
}

/// One point per `N ∈ [1, n_max]` for every scheme in `schemes`, ordered by
/// scheme then N.
pub fn sweep_n(
    chain: &DetectionChain,
    schemes: &[Scheme],
    eta_s: f64,
    n_max: usize,
    policy: MuPolicy,
) -> Result<Vec<ScalingPoint>> {
    if n_max == 0 {
        return Err(Error::domain("n_max", 0.0, "[1, inf)"));
    }
    check_unit("eta_s", eta_s)?;
    let per_n: Vec<Vec<ScalingPoint>> = (1..=n_max)
        .into_par_iter()
        .map(|n| points_for(chain, schemes, eta_s, n, policy))
        .collect::<Result<_>>()?;
    Ok(transpose(per_n))
}

/// `p_mux_single` for every scheme at fixed `n_modes`, for each `η_s` in the
/// grid, ordered by scheme then grid position.
pub fn sweep_loss(
    chain: &DetectionChain,
    schemes: &[Scheme],
    n_modes: usize,
    eta_grid: &[f64],
    policy: MuPolicy,
) -> Result<Vec<ScalingPoint>> {
    for &eta in eta_grid {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::domain("eta_s", eta, "(0, 1]"));
        }
    }
    let per_eta: Vec<Vec<ScalingPoint>> = eta_grid
        .par_iter()
        .map(|&eta| points_for(chain, schemes, eta, n_modes, policy))
        .collect::<Result<_>>()?;
    Ok(transpose(per_eta))
}

fn transpose(groups: Vec<Vec<ScalingPoint>>) -> Vec<ScalingPoint> {
    let width = groups.first().map_or(0, Vec::len);
    (0..width)
        .flat_map(|s| groups.iter().map(move |g| g[s]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn net(scheme: Scheme, eta_s: f64, n: usize) -> SwitchNetwork {
        SwitchNetwork::new(scheme, eta_s, n).unwrap()
    }

    /// Closed-form optimum for ideal detection and network:
    /// p = q(1 - q^N), maximised at q = (N+1)^(-1/N) with q = 1 - |ξ|².
    fn ideal_optimum(n: usize) -> (f64, f64) {
        let q = (n as f64 + 1.0).powf(-1.0 / n as f64);
        ((1.0 - q) / q, q * (1.0 - q.powi(n as i32)))
    }

    #[test]
    fn tree_depth_values() {
        let depths: Vec<u32> = (1..=9).map(tree_depth).collect();
        assert_eq!(depths, [0, 1, 2, 2, 3, 3, 3, 3, 4]);
        assert_eq!(tree_depth(64), 6);
        assert_eq!(tree_depth(65), 7);
    }

    #[test]
    fn switch_efficiency_examples() {
        assert_eq!(
            switch_efficiency(&net(Scheme::FixedLoss, 0.85, 40)).unwrap(),
            0.85
        );
        assert_abs_diff_eq!(
            switch_efficiency(&net(Scheme::LogTree, 0.85, 4)).unwrap(),
            0.7225,
            epsilon = 1e-15
        );
        assert_eq!(switch_efficiency(&net(Scheme::Ideal, 0.2, 7)).unwrap(), 1.0);
        assert!(matches!(
            switch_efficiency(&net(Scheme::MultiPass, 0.9, 3)),
            Err(Error::UnsupportedScheme(_))
        ));
    }

    #[test]
    fn mux_herald_examples() {
        assert_abs_diff_eq!(mux_herald_prob(0.5, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            mux_herald_prob(0.108, 30),
            1.0 - 0.892f64.powi(30),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(mux_herald_prob(0.108, 30), 0.9679, epsilon = 5e-4);
        assert_eq!(mux_herald_prob(1.0, 17), 1.0);
        assert_eq!(mux_herald_prob(0.0, 17), 0.0);
    }

    #[test]
    fn schemes_coincide_at_single_mode_lossless() {
        let src = SqueezedSource::new(0.23).unwrap();
        let chain = DetectionChain::new(0.7, 0.6).unwrap();
        let expected = herald_prob(&src, 0.7) * conditional_single_prob(&src, &chain).unwrap();
        for s in Scheme::ALL {
            let p = mux_single_prob(&src, &chain, &net(s, 1.0, 1)).unwrap();
            assert_abs_diff_eq!(p, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn telescoping_identity() {
        let src = SqueezedSource::new(0.17).unwrap();
        let chain = DetectionChain::ideal();
        for n in 1..=100 {
            let mp = mux_single_prob(&src, &chain, &net(Scheme::MultiPass, 1.0, n)).unwrap();
            let fl = mux_single_prob(&src, &chain, &net(Scheme::FixedLoss, 1.0, n)).unwrap();
            assert_abs_diff_eq!(mp, fl, epsilon = 1e-12);
        }
    }

    #[test]
    fn multi_pass_matches_direct_sum() {
        let src = SqueezedSource::new(0.12).unwrap();
        let chain = DetectionChain::new(0.9, 0.8).unwrap();
        let p_h = herald_prob(&src, 0.9);
        let p_s = conditional_single_prob(&src, &chain).unwrap();
        for n in [1, 2, 7, 30] {
            let direct: f64 = (1..=n)
                .map(|j| (1.0 - p_h).powi((n - j) as i32) * p_h * p_s * 0.8f64.powi((n - j) as i32))
                .sum();
            let p = mux_single_prob(&src, &chain, &net(Scheme::MultiPass, 0.8, n)).unwrap();
            assert_abs_diff_eq!(p, direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn optimizer_matches_closed_form() {
        for n in [1, 2, 5, 10, 30, 40, 64] {
            let (mu, p) =
                optimize_mu(&DetectionChain::ideal(), n, &SwitchNetwork::ideal(n)).unwrap();
            let (mu_ref, p_ref) = ideal_optimum(n);
            assert_abs_diff_eq!(mu, mu_ref, epsilon = 1e-6);
            assert_abs_diff_eq!(p, p_ref, epsilon = 1e-12);
        }
    }

    #[test]
    fn optimizer_stationarity() {
        let chain = DetectionChain::new(0.9, 0.9).unwrap();
        for (scheme, n) in [
            (Scheme::Ideal, 10),
            (Scheme::FixedLoss, 40),
            (Scheme::MultiPass, 8),
        ] {
            let objective = net(scheme, 0.85, n);
            let (mu, p) = optimize_mu(&chain, n, &objective).unwrap();
            let f = |m: f64| {
                mux_single_prob(&SqueezedSource::from_mu(m).unwrap(), &chain, &objective).unwrap()
            };
            let h = 1e-5 * mu;
            let slope = (f(mu + h) - f(mu - h)) / (2.0 * h);
            assert!((slope * mu / p).abs() < 1e-6, "{scheme}: slope {slope}");
        }
    }

    #[test]
    fn optimize_examples() {
        let ideal = DetectionChain::ideal();
        let (mu, p) = optimize_mu(&ideal, 1, &SwitchNetwork::ideal(1)).unwrap();
        assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 1.0, epsilon = 1e-6);

        let (_, p40) = optimize_mu(&ideal, 40, &SwitchNetwork::ideal(40)).unwrap();
        assert_abs_diff_eq!(p40, 0.89, epsilon = 0.01);

        let (mu10, _) = optimize_mu(&ideal, 10, &SwitchNetwork::ideal(10)).unwrap();
        let p = mux_single_prob(
            &SqueezedSource::from_mu(mu10).unwrap(),
            &ideal,
            &net(Scheme::FixedLoss, 0.85, 10),
        )
        .unwrap();
        assert_abs_diff_eq!(p, 0.60, epsilon = 0.01);
    }

    #[test]
    fn sweep_loss_limits() {
        let rows = sweep_loss(
            &DetectionChain::ideal(),
            &Scheme::ALL,
            30,
            &[1e-9, 0.75, 1.0],
            MuPolicy::Shared,
        )
        .unwrap();
        assert_eq!(rows.len(), 12);
        let ideal_at_one = rows
            .iter()
            .find(|r| r.scheme == Scheme::Ideal && r.eta_s == 1.0)
            .unwrap()
            .p_mux_single;
        for r in &rows {
            if r.eta_s == 1.0 {
                assert_abs_diff_eq!(r.p_mux_single, ideal_at_one, epsilon = 1e-12);
            }
            if r.eta_s == 1e-9 {
                match r.scheme {
                    Scheme::Ideal => {}
                    // The last slot reaches the output without any switch pass.
                    Scheme::MultiPass => {
                        let src = SqueezedSource::from_mu(r.mu_opt).unwrap();
                        let single = herald_prob(&src, 1.0)
                            * conditional_single_prob(&src, &DetectionChain::ideal()).unwrap();
                        assert_abs_diff_eq!(r.p_mux_single, single, epsilon = 1e-8);
                    }
                    _ => assert!(r.p_mux_single < 1e-6),
                }
            }
        }
        assert!(sweep_loss(
            &DetectionChain::ideal(),
            &Scheme::ALL,
            30,
            &[0.0],
            MuPolicy::Shared
        )
        .is_err());
    }

    #[test]
    fn sweep_n_shape_and_ordering() {
        let rows = sweep_n(
            &DetectionChain::ideal(),
            &Scheme::ALL,
            0.85,
            12,
            MuPolicy::Shared,
        )
        .unwrap();
        assert_eq!(rows.len(), 48);
        assert!(rows[..12].iter().all(|r| r.scheme == Scheme::FixedLoss));
        assert_eq!(rows[0].n_modes, 1);
        assert_eq!(rows[11].n_modes, 12);
        let per_scheme = sweep_n(
            &DetectionChain::ideal(),
            &Scheme::ALL,
            0.85,
            12,
            MuPolicy::PerScheme,
        )
        .unwrap();
        for (shared, own) in rows.iter().zip(&per_scheme) {
            assert!(own.p_mux_single >= shared.p_mux_single - 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn scheme_ordering(x in 0.001f64..0.6, eta_s in 0.05f64..0.999, n in 2usize..80, eh in 0.1f64..1.0, ed in 0.1f64..1.0) {
            let src = SqueezedSource::new(x).unwrap();
            let chain = DetectionChain::new(eh, ed).unwrap();
            let p = |s| mux_single_prob(&src, &chain, &net(s, eta_s, n)).unwrap();
            let ideal = p(Scheme::Ideal);
            proptest::prop_assert!(p(Scheme::FixedLoss) >= p(Scheme::LogTree) - 1e-15);
            for s in [Scheme::FixedLoss, Scheme::LogTree, Scheme::MultiPass] {
                proptest::prop_assert!(ideal >= p(s) - 1e-15);
                proptest::prop_assert!((0.0..=1.0).contains(&p(s)));
            }
        }

        #[test]
        fn monotone_in_switch_efficiency(x in 0.001f64..0.6, a in 0.0f64..1.0, b in 0.0f64..1.0, n in 1usize..64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let src = SqueezedSource::new(x).unwrap();
            let chain = DetectionChain::ideal();
            for s in Scheme::ALL {
                let p_lo = mux_single_prob(&src, &chain, &net(s, lo, n)).unwrap();
                let p_hi = mux_single_prob(&src, &chain, &net(s, hi, n)).unwrap();
                proptest::prop_assert!(p_hi >= p_lo - 1e-15);
            }
        }
    }
}
