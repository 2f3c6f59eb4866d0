//! Monte Carlo simulation of a frequency-multiplexed heralded source.
//!
//! Time is divided into trigger slots ("bins"). In each bin every channel
//! emits a thermal number of pairs; each heralding detector is a bucket
//! detector. The lowest-index heralding channel wins the switch. Its signal
//! photons pass the switch (fixed loss) and, unless the channel already sits
//! at the target frequency, the BS-FWM conversion. Firing the pumps also adds
//! Poisson background photons and swaps away any target-frequency photons not
//! belonging to the selected channel with the conversion efficiency.
//! Photons at the output are split 50/50 onto the two arms of a
//! Hanbury-Brown-Twiss pair of bucket detectors.
//!
//! Every bin draws from its own counter-based stream keyed by
//! `(seed, bin index)`, so counters are bit-identical for any worker count.
//!
//! [`analytic_expectation`] evaluates the same model in closed form through
//! the thermal generating function `E[z^n] = (1 - x)/(1 - x z)`.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_unit;
use crate::photon_stats::{
    conditional_single_prob, db_to_efficiency, herald_prob, mu_from_xi, DetectionChain,
    SqueezedSource,
};
use crate::rng::{mix64, BinRng};
use crate::{Error, Result};

/// One frequency channel of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub xi_sq: f64,
    /// Pair-production strength relative to `xi_sq`; scales μ.
    #[serde(default = "one")]
    pub strength: f64,
    /// The channel is already at the target frequency and bypasses conversion.
    #[serde(default)]
    pub at_target: bool,
}

fn one() -> f64 {
    1.0
}

impl Channel {
    pub fn new(xi_sq: f64, strength: f64, at_target: bool) -> Self {
        Self {
            xi_sq,
            strength,
            at_target,
        }
    }

    /// Source with `μ_eff = strength · μ(xi_sq)`.
    pub fn effective_source(&self) -> Result<SqueezedSource> {
        SqueezedSource::from_mu(self.strength * mu_from_xi(self.xi_sq)?)
    }
}

/// Default squeezing per channel of the reference scenario.
pub const DEFAULT_XI_SQ: f64 = 0.01;
/// Pair production of CH0 relative to CH1 and CH2.
pub const DEFAULT_CH0_STRENGTH: f64 = 0.65;
pub const DEFAULT_SNSPD_EFFICIENCY: f64 = 0.53;
pub const DEFAULT_SWITCH_LOSS_DB: f64 = 1.3;
pub const DEFAULT_CONVERSION_EFF: f64 = 0.93;
/// Background photons per pump pulse within the target filter.
pub const DEFAULT_NOISE_PER_PULSE: f64 = 3e-3;
/// 1 MHz pump trigger rate.
pub const DEFAULT_BIN_PERIOD: f64 = 1e-6;
pub const DEFAULT_N_BINS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_bins: u64,
    /// s
    pub bin_period: f64,
    pub channels: Vec<Channel>,
    pub chain: DetectionChain,
    pub switch_loss_db: f64,
    pub conversion_eff: f64,
    pub noise_per_pulse: f64,
    pub rng_seed: u64,
    /// Worker threads; 0 uses the rayon default. Never affects results.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    /// The three-channel demonstrator: CH0 at the target with 0.65 relative
    /// pair production, CH1 and CH2 converted.
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_N_BINS,
            bin_period: DEFAULT_BIN_PERIOD,
            channels: vec![
                Channel::new(DEFAULT_XI_SQ, DEFAULT_CH0_STRENGTH, true),
                Channel::new(DEFAULT_XI_SQ, 1.0, false),
                Channel::new(DEFAULT_XI_SQ, 1.0, false),
            ],
            chain: DetectionChain {
                eta_h: 1.0,
                eta_d: DEFAULT_SNSPD_EFFICIENCY,
                dark_click_prob: 0.0,
                loss_budget_db: Vec::new(),
            },
            switch_loss_db: DEFAULT_SWITCH_LOSS_DB,
            conversion_eff: DEFAULT_CONVERSION_EFF,
            noise_per_pulse: DEFAULT_NOISE_PER_PULSE,
            rng_seed: DEFAULT_SEED,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins == 0 {
            return Err(Error::domain("n_bins", 0.0, "[1, inf)"));
        }
        if !(self.bin_period > 0.0) {
            return Err(Error::domain("bin_period", self.bin_period, "(0, inf) s"));
        }
        if self.channels.is_empty() {
            return Err(Error::Config("channel list is empty".into()));
        }
        for ch in &self.channels {
            if !(ch.strength >= 0.0) {
                return Err(Error::domain("strength", ch.strength, "[0, inf)"));
            }
            ch.effective_source()?;
        }
        self.chain.validate()?;
        if !(self.switch_loss_db >= 0.0) {
            return Err(Error::domain(
                "switch_loss_db",
                self.switch_loss_db,
                "[0, inf) dB",
            ));
        }
        check_unit("conversion_eff", self.conversion_eff)?;
        if !(self.noise_per_pulse >= 0.0) || self.noise_per_pulse.is_infinite() {
            return Err(Error::domain(
                "noise_per_pulse",
                self.noise_per_pulse,
                "[0, inf)",
            ));
        }
        Ok(())
    }

    pub fn switch_efficiency(&self) -> f64 {
        db_to_efficiency(self.switch_loss_db)
    }

    /// Transmission from the source to the output port for photons of
    /// `channel` when `selected` won the switch.
    fn transmission(&self, channel: usize, selected: Option<usize>) -> f64 {
        let eta_sw = self.switch_efficiency();
        let pumps = self.pumps_fire(selected);
        if self.channels[channel].at_target {
            if pumps {
                eta_sw * (1.0 - self.conversion_eff)
            } else {
                eta_sw
            }
        } else if selected == Some(channel) {
            eta_sw * self.conversion_eff
        } else {
            0.0
        }
    }

    fn pumps_fire(&self, selected: Option<usize>) -> bool {
        selected.is_some_and(|s| !self.channels[s].at_target)
    }
}

/// Thermal pair number `n` with `P(n) = (1 - x) x^n`.
pub fn sample_pair_count<R: Rng + ?Sized>(xi_sq: f64, rng: &mut R) -> Result<u64> {
    Ok(pair_distribution(xi_sq)?.sample(rng))
}

fn pair_distribution(xi_sq: f64) -> Result<Geometric> {
    if !(0.0..1.0).contains(&xi_sq) {
        return Err(Error::domain("xi_sq", xi_sq, "[0, 1)"));
    }
    Geometric::new(1.0 - xi_sq).map_err(|e| Error::Format(e.to_string()))
}

/// Bucket detector: clicks with probability `1 - (1 - η)^n (1 - dark)`.
pub fn bucket_click<R: Rng + ?Sized>(n: u64, eta: f64, dark_click_prob: f64, rng: &mut R) -> bool {
    let exponent = i32::try_from(n).unwrap_or(i32::MAX);
    let p_miss = (1.0 - eta).powi(exponent) * (1.0 - dark_click_prob);
    if p_miss >= 1.0 {
        return false;
    }
    if p_miss <= 0.0 {
        return true;
    }
    rng.random::<f64>() >= p_miss
}

/// Raw event counters; merged across shards by addition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub bins: u64,
    /// Bins with at least one herald click (`N_c`).
    pub heralds: u64,
    /// Bins with a click on either output arm.
    pub signal_singles: u64,
    /// Herald and output click in the same bin.
    pub coincidences: u64,
    /// Herald in bin `i` and output click in bin `i + 1` (cyclic).
    pub accidentals: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    pub singles_ab: u64,
    /// `N_ac`, `N_bc`, `N_abc` with `c` the herald.
    pub herald_a: u64,
    pub herald_b: u64,
    pub herald_ab: u64,
    pub per_channel_heralds: Vec<u64>,
    pub per_channel_coincidences: Vec<u64>,
}

impl Counters {
    fn zero(n_channels: usize) -> Self {
        Self {
            per_channel_heralds: vec![0; n_channels],
            per_channel_coincidences: vec![0; n_channels],
            ..Self::default()
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.bins += other.bins;
        self.heralds += other.heralds;
        self.signal_singles += other.signal_singles;
        self.coincidences += other.coincidences;
        self.accidentals += other.accidentals;
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        self.singles_ab += other.singles_ab;
        self.herald_a += other.herald_a;
        self.herald_b += other.herald_b;
        self.herald_ab += other.herald_ab;
        for (a, b) in self
            .per_channel_heralds
            .iter_mut()
            .zip(other.per_channel_heralds)
        {
            *a += b;
        }
        for (a, b) in self
            .per_channel_coincidences
            .iter_mut()
            .zip(other.per_channel_coincidences)
        {
            *a += b;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BinOutcome {
    selected: Option<usize>,
    arm_a: bool,
    arm_b: bool,
}

impl BinOutcome {
    fn signal(&self) -> bool {
        self.arm_a || self.arm_b
    }
}

/// Pre-built distributions shared by all bins.
struct Model<'a> {
    cfg: &'a ExperimentConfig,
    pairs: Vec<Geometric>,
    background: Option<Poisson<f64>>,
}

impl<'a> Model<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let pairs = cfg
            .channels
            .iter()
            .map(|c| pair_distribution(c.effective_source()?.xi_sq()))
            .collect::<Result<_>>()?;
        let background = if cfg.noise_per_pulse > 0.0 {
            Some(Poisson::new(cfg.noise_per_pulse).map_err(|e| Error::Format(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            cfg,
            pairs,
            background,
        })
    }

    fn bin(&self, bin: u64) -> BinOutcome {
        let cfg = self.cfg;
        let chain = &cfg.chain;
        let mut rng = BinRng::new(cfg.rng_seed, bin);

        let mut counts = [0u64; 8];
        let mut counts_heap;
        let counts: &mut [u64] = if self.pairs.len() <= counts.len() {
            &mut counts[..self.pairs.len()]
        } else {
            counts_heap = vec![0u64; self.pairs.len()];
            &mut counts_heap
        };
        for (n, dist) in counts.iter_mut().zip(&self.pairs) {
            *n = dist.sample(&mut rng);
        }
        let mut selected = None;
        for (c, &n) in counts.iter().enumerate() {
            if bucket_click(n, chain.eta_h, chain.dark_click_prob, &mut rng) && selected.is_none() {
                selected = Some(c);
            }
        }

        let (mut arm_a, mut arm_b) = (false, false);
        let mut route = |photons: u64, t: f64, rng: &mut BinRng| {
            let p = t * chain.eta_d;
            if p <= 0.0 {
                return;
            }
            for _ in 0..photons {
                let u: f64 = rng.random();
                if u < 0.5 * p {
                    arm_a = true;
                } else if u < p {
                    arm_b = true;
                }
            }
        };
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                route(n, cfg.transmission(c, selected), &mut rng);
            }
        }
        if cfg.pumps_fire(selected) {
            if let Some(bg) = &self.background {
                let k = bg.sample(&mut rng) as u64;
                route(k, 1.0, &mut rng);
            }
        }
        if chain.dark_click_prob > 0.0 {
            arm_a |= rng.random::<f64>() < chain.dark_click_prob;
            arm_b |= rng.random::<f64>() < chain.dark_click_prob;
        }
        BinOutcome {
            selected,
            arm_a,
            arm_b,
        }
    }

    fn shard(&self, start: u64, end: u64) -> Counters {
        let n_bins = self.cfg.n_bins;
        let mut c = Counters::zero(self.cfg.channels.len());
        let mut current = self.bin(start);
        for i in start..end {
            let next = if i + 1 < end {
                self.bin(i + 1)
            } else {
                self.bin((i + 1) % n_bins)
            };
            let o = current;
            c.bins += 1;
            if o.signal() {
                c.signal_singles += 1;
            }
            c.singles_a += o.arm_a as u64;
            c.singles_b += o.arm_b as u64;
            c.singles_ab += (o.arm_a && o.arm_b) as u64;
            if let Some(s) = o.selected {
                c.heralds += 1;
                c.per_channel_heralds[s] += 1;
                if o.signal() {
                    c.coincidences += 1;
                    c.per_channel_coincidences[s] += 1;
                }
                c.herald_a += o.arm_a as u64;
                c.herald_b += o.arm_b as u64;
                c.herald_ab += (o.arm_a && o.arm_b) as u64;
                if next.signal() {
                    c.accidentals += 1;
                }
            }
            current = next;
        }
        c
    }
}

const SHARD_BINS: u64 = 1 << 16;

fn shard_ranges(n: u64) -> Vec<(u64, u64)> {
    (0..n.div_ceil(SHARD_BINS))
        .map(|s| (s * SHARD_BINS, ((s + 1) * SHARD_BINS).min(n)))
        .collect()
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(pool.install(job))
}

/// Runs the Monte Carlo and returns the raw counters.
pub fn simulate_counters(cfg: &ExperimentConfig) -> Result<Counters> {
    let model = Model::new(cfg)?;
    let n_channels = cfg.channels.len();
    with_workers(cfg.workers, || {
        shard_ranges(cfg.n_bins)
            .into_par_iter()
            .map(|(a, b)| model.shard(a, b))
            .reduce(|| Counters::zero(n_channels), Counters::merge)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    /// Number of standard errors separating `self` from `reference`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.value - reference) / self.std_err
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Hz
    pub herald_rate: Estimate,
    pub coincidence_rate: Estimate,
    pub accidental_rate: Estimate,
    pub car: Estimate,
    pub g2_heralded: Estimate,
    /// Coincidence rate attributed to each channel, Hz.
    pub per_channel_rates: Vec<f64>,
    pub counters: Counters,
}

fn binomial_rate(k: u64, n: u64, period: f64) -> Estimate {
    let (kf, nf) = (k as f64, n as f64);
    Estimate {
        value: kf / (nf * period),
        std_err: (kf * (1.0 - kf / nf)).max(1.0).sqrt() / (nf * period),
    }
}

impl SimReport {
    pub fn from_counters(counters: Counters, bin_period: f64) -> Result<Self> {
        let c = &counters;
        if c.accidentals == 0 {
            return Err(Error::InsufficientStatistics {
                reason: "no accidental coincidences",
                counters: Box::new(counters),
            });
        }
        if c.herald_a == 0 || c.herald_b == 0 {
            return Err(Error::InsufficientStatistics {
                reason: "no herald-arm coincidences for g2",
                counters: Box::new(counters),
            });
        }
        let n = c.bins;
        let (co, acc) = (c.coincidences as f64, c.accidentals as f64);
        let car = co / acc;
        let car_err = car * (1.0 / co.max(1.0) + 1.0 / acc).sqrt();

        let (abc, ac, bc, nc) = (
            c.herald_ab as f64,
            c.herald_a as f64,
            c.herald_b as f64,
            c.heralds as f64,
        );
        let scale = nc / (ac * bc);
        let g2 = abc * scale;
        let g2_err = scale * (abc.max(1.0) + abc * abc * (1.0 / ac + 1.0 / bc + 1.0 / nc)).sqrt();

        let per_channel_rates = c
            .per_channel_coincidences
            .iter()
            .map(|&k| k as f64 / (n as f64 * bin_period))
            .collect();
        Ok(Self {
            herald_rate: binomial_rate(c.heralds, n, bin_period),
            coincidence_rate: binomial_rate(c.coincidences, n, bin_period),
            accidental_rate: binomial_rate(c.accidentals, n, bin_period),
            car: Estimate {
                value: car,
                std_err: car_err,
            },
            g2_heralded: Estimate {
                value: g2,
                std_err: g2_err,
            },
            per_channel_rates,
            counters,
        })
    }

    /// Flat `(key, value)` record with full-precision numbers.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut est = |name: &str, e: &Estimate| {
            kv.push((name.to_string(), format!("{:e}", e.value)));
            kv.push((format!("{name}_err"), format!("{:e}", e.std_err)));
        };
        est("herald_rate_hz", &self.herald_rate);
        est("coincidence_rate_hz", &self.coincidence_rate);
        est("accidental_rate_hz", &self.accidental_rate);
        est("car", &self.car);
        est("g2_heralded", &self.g2_heralded);
        for (i, r) in self.per_channel_rates.iter().enumerate() {
            kv.push((format!("channel{i}_coincidence_rate_hz"), format!("{r:e}")));
        }
        kv.extend(counter_key_values(&self.counters));
        kv
    }
}

pub fn counter_key_values(c: &Counters) -> Vec<(String, String)> {
    let mut kv = vec![
        ("bins", c.bins),
        ("heralds", c.heralds),
        ("signal_singles", c.signal_singles),
        ("coincidences", c.coincidences),
        ("accidentals", c.accidentals),
        ("singles_a", c.singles_a),
        ("singles_b", c.singles_b),
        ("singles_ab", c.singles_ab),
        ("n_ac", c.herald_a),
        ("n_bc", c.herald_b),
        ("n_abc", c.herald_ab),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect::<Vec<_>>();
    for (i, (h, co)) in c
        .per_channel_heralds
        .iter()
        .zip(&c.per_channel_coincidences)
        .enumerate()
    {
        kv.push((format!("channel{i}_heralds"), h.to_string()));
        kv.push((format!("channel{i}_coincidences"), co.to_string()));
    }
    kv
}

/// Runs the simulation and forms rates, CAR and heralded g².
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimReport> {
    SimReport::from_counters(simulate_counters(cfg)?, cfg.bin_period)
}

/// Closed-form expectations of the simulated observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub herald_prob: f64,
    pub signal_prob: f64,
    pub coincidence_prob: f64,
    /// Heralded exactly-one-pair events whose photon survives, summed over
    /// channels with the switch priority and transmissions applied.
    pub single_photon_prob: f64,
    pub herald_rate: f64,
    pub coincidence_rate: f64,
    pub accidental_rate: f64,
    pub car: f64,
    pub g2_heralded: f64,
    pub per_channel_rates: Vec<f64>,
}

/// `E[z^n]` of the thermal distribution.
fn thermal_gf(x: f64, z: f64) -> f64 {
    (1.0 - x) / (1.0 - x * z)
}

struct Oracle<'a> {
    cfg: &'a ExperimentConfig,
    xs: Vec<f64>,
}

impl Oracle<'_> {
    /// `P(no click on the detector set ∧ selection = s)`, where each output
    /// photon is caught by the set with probability `fraction · t · η_d` and
    /// the set holds `darks` independent dark-count sources.
    fn no_click(&self, selected: Option<usize>, fraction: f64, darks: i32) -> f64 {
        let cfg = self.cfg;
        let chain = &cfg.chain;
        let d = chain.dark_click_prob;
        let mut p = (1.0 - d).powi(darks);
        if cfg.pumps_fire(selected) {
            p *= (-cfg.noise_per_pulse * chain.eta_d * fraction).exp();
        }
        for (c, &x) in self.xs.iter().enumerate() {
            let z = 1.0 - fraction * chain.eta_d * cfg.transmission(c, selected);
            let silent = (1.0 - d) * thermal_gf(x, z * (1.0 - chain.eta_h));
            p *= match selected {
                Some(s) if c == s => thermal_gf(x, z) - silent,
                Some(s) if c > s => thermal_gf(x, z),
                _ => silent,
            };
        }
        p
    }

    fn selection_prob(&self, selected: Option<usize>) -> f64 {
        self.no_click(selected, 0.0, 0)
    }
}

/// Expected rates, CAR and heralded g² of [`run_simulation`] for `cfg`.
pub fn analytic_expectation(cfg: &ExperimentConfig) -> Result<Expectation> {
    cfg.validate()?;
    let xs = cfg
        .channels
        .iter()
        .map(|c| Ok(c.effective_source()?.xi_sq()))
        .collect::<Result<Vec<_>>>()?;
    let oracle = Oracle { cfg, xs };
    let n = cfg.channels.len();

    let mut herald = 0.0;
    let mut coinc = 0.0;
    let mut signal = 0.0;
    let mut herald_a = 0.0;
    let mut herald_ab = 0.0;
    let mut per_channel = Vec::with_capacity(n);
    for s in std::iter::once(None).chain((0..n).map(Some)) {
        let p_sel = oracle.selection_prob(s);
        let none_out = oracle.no_click(s, 1.0, 2);
        let none_a = oracle.no_click(s, 0.5, 1);
        signal += p_sel - none_out;
        if s.is_some() {
            herald += p_sel;
            coinc += p_sel - none_out;
            herald_a += p_sel - none_a;
            herald_ab += p_sel - 2.0 * none_a + none_out;
            per_channel.push((p_sel - none_out) / cfg.bin_period);
        }
    }

    // Exactly-one-pair heralds: p_h · p_s per channel, times the probability
    // that no lower-index channel heralded and the routing transmission.
    let mut single = 0.0;
    let mut none_before = 1.0;
    for (c, &x) in oracle.xs.iter().enumerate() {
        let src = SqueezedSource::new(x)?;
        let p_h = herald_prob(&src, cfg.chain.eta_h);
        if p_h > 0.0 {
            single += none_before
                * p_h
                * conditional_single_prob(&src, &cfg.chain)?
                * cfg.transmission(c, Some(c));
        }
        none_before *= 1.0 - p_h;
    }

    let rate = 1.0 / cfg.bin_period;
    let accidental = herald * signal;
    let g2 = if herald_a > 0.0 {
        herald_ab * herald / (herald_a * herald_a)
    } else {
        f64::NAN
    };
    Ok(Expectation {
        herald_prob: herald,
        signal_prob: signal,
        coincidence_prob: coinc,
        single_photon_prob: single,
        herald_rate: herald * rate,
        coincidence_rate: coinc * rate,
        accidental_rate: accidental * rate,
        car: if accidental > 0.0 {
            coinc / accidental
        } else {
            f64::NAN
        },
        g2_heralded: g2,
        per_channel_rates: per_channel,
    })
}

/// Multiplexing gain in dB relative to the mean of the individual channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub db: f64,
    pub std_err_db: f64,
    pub mux_rate: f64,
    pub mean_single_rate: f64,
}

/// The channel measured on its own, directly at the target frequency and
/// without the switching setup.
pub fn single_channel_config(cfg: &ExperimentConfig, channel: usize) -> ExperimentConfig {
    ExperimentConfig {
        channels: vec![Channel {
            at_target: true,
            ..cfg.channels[channel]
        }],
        switch_loss_db: 0.0,
        rng_seed: mix64(cfg.rng_seed ^ (channel as u64 + 1)),
        ..cfg.clone()
    }
}

fn db_ratio(num: f64, den: f64) -> f64 {
    10.0 * (num / den).log10()
}

/// Simulated multiplexing enhancement `10 log₁₀(R_mux / mean R_single)`.
pub fn mux_enhancement(cfg: &ExperimentConfig) -> Result<Enhancement> {
    cfg.validate()?;
    let mux = simulate_counters(cfg)?;
    let period = cfg.bin_period;
    if cfg.channels.len() == 1 {
        let r = binomial_rate(mux.coincidences, mux.bins, period).value;
        return Ok(Enhancement {
            db: 0.0,
            std_err_db: 0.0,
            mux_rate: r,
            mean_single_rate: r,
        });
    }
    let mux_rate = binomial_rate(mux.coincidences, mux.bins, period);
    let singles = (0..cfg.channels.len())
        .map(|c| simulate_counters(&single_channel_config(cfg, c)))
        .collect::<Result<Vec<_>>>()?;
    let total: u64 = singles.iter().map(|s| s.coincidences).sum();
    let bins: u64 = singles.iter().map(|s| s.bins).sum();
    let mean = binomial_rate(total, bins, period);
    if mux.coincidences == 0 || total == 0 {
        return Err(Error::InsufficientStatistics {
            reason: "no coincidences for the enhancement ratio",
            counters: Box::new(mux),
        });
    }
    let rel =
        ((mux_rate.std_err / mux_rate.value).powi(2) + (mean.std_err / mean.value).powi(2)).sqrt();
    Ok(Enhancement {
        db: db_ratio(mux_rate.value, mean.value),
        std_err_db: 10.0 / std::f64::consts::LN_10 * rel,
        mux_rate: mux_rate.value,
        mean_single_rate: mean.value,
    })
}

/// Closed-form counterpart of [`mux_enhancement`].
pub fn expected_enhancement(cfg: &ExperimentConfig) -> Result<f64> {
    if cfg.channels.len() == 1 {
        cfg.validate()?;
        return Ok(0.0);
    }
    let mux = analytic_expectation(cfg)?.coincidence_rate;
    let singles = (0..cfg.channels.len())
        .map(|c| Ok(analytic_expectation(&single_channel_config(cfg, c))?.coincidence_rate))
        .collect::<Result<Vec<_>>>()?;
    let mean = singles.iter().sum::<f64>() / singles.len() as f64;
    Ok(db_ratio(mux, mean))
}

/// `⟨n(n-1)⟩/⟨n⟩²` of sampled thermal pair numbers, one sample per bin.
pub fn thermal_marginal_g2(xi_sq: f64, n_bins: u64, seed: u64, workers: usize) -> Result<Estimate> {
    let dist = pair_distribution(xi_sq)?;
    if n_bins < 2 {
        return Err(Error::domain("n_bins", n_bins as f64, "[2, inf)"));
    }
    // Σn, Σn(n-1), Σ[n(n-1)]², Σ n²(n-1)
    let sums = with_workers(workers, || {
        shard_ranges(n_bins)
            .into_par_iter()
            .map(|(a, b)| {
                let mut s = [0u128; 4];
                for bin in a..b {
                    let n = dist.sample(&mut BinRng::new(seed, bin)) as u128;
                    let f = n * n.saturating_sub(1);
                    s[0] += n;
                    s[1] += f;
                    s[2] += f * f;
                    s[3] += n * f;
                }
                s
            })
            .reduce(
                || [0; 4],
                |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]],
            )
    })?;
    let nf = n_bins as f64;
    let [m1, m2, m22, m12] = sums.map(|s| s as f64 / nf);
    if m1 <= 0.0 {
        return Err(Error::UndefinedConditional("no photons sampled"));
    }
    let g2 = m2 / (m1 * m1);
    // Delta method for A/B² with A = ⟨n(n-1)⟩, B = ⟨n⟩.
    let var_a = m22 - m2 * m2;
    let var_b = sums_var(&sums, nf);
    let cov = m12 - m2 * m1;
    let var = (var_a / m1.powi(4) + 4.0 * m2 * m2 * var_b / m1.powi(6)
        - 4.0 * m2 * cov / m1.powi(5))
        / nf;
    Ok(Estimate {
        value: g2,
        std_err: var.max(0.0).sqrt(),
    })
}

fn sums_var(sums: &[u128; 4], nf: f64) -> f64 {
    // Var(n) = ⟨n(n-1)⟩ + ⟨n⟩ - ⟨n⟩²
    let m1 = sums[0] as f64 / nf;
    sums[1] as f64 / nf + m1 - m1 * m1
}
