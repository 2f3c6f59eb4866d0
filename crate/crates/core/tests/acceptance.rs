//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test -p freqmux --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use freqmux::bsfwm::{
    calibrate_beta3, channel_sweep, conversion_efficiency, phase_mismatch, FiberSpec, PumpConfig,
    REFERENCE_BANDWIDTH_HZ,
};
use freqmux::mux::{
    mux_single_prob, optimize_mu, sweep_loss, sweep_n, MuPolicy, Scheme, SwitchNetwork,
};
use freqmux::photon_stats::{
    conditional_single_prob, db_to_efficiency, fock_oracle, herald_prob, FOCK_DEFAULT_N_MAX,
};
use freqmux::sim::{
    analytic_expectation, mux_enhancement, run_simulation, thermal_marginal_g2, Channel,
    ExperimentConfig,
};
use freqmux::{DetectionChain, SqueezedSource};

/// Collects the individual checks of one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn within(&mut self, what: &str, value: f64, target: f64, tol: f64) {
        let ok = (value - target).abs() <= tol;
        self.record(ok, format!("{what} = {value:.5} (want {target} ± {tol})"));
    }

    fn holds(&mut self, what: &str, ok: bool) {
        self.record(ok, what.to_string());
    }

    fn faster_than(&mut self, what: &str, elapsed: Duration, limit: Duration) {
        self.record(
            elapsed < limit,
            format!(
                "{what} took {:.2} s (limit {:.0} s)",
                elapsed.as_secs_f64(),
                limit.as_secs_f64()
            ),
        );
    }

    fn record(&mut self, ok: bool, line: String) {
        if ok {
            self.notes.push(line);
        } else {
            self.failures.push(line);
        }
    }
}

type Criterion = (&'static str, fn(&mut Checks));

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 scaling with mode count", scaling_with_mode_count),
        ("2 tolerance to switch loss", tolerance_to_switch_loss),
        ("3 ten-mode source with 90% detection", ten_mode_source),
        ("4 BS-FWM phase matching and bandwidth", bsfwm_physics),
        ("5 heralding loss budget", loss_budget),
        ("6 Monte Carlo versus closed form", monte_carlo_vs_oracle),
        (
            "7 physical properties of the simulated source",
            physics_properties,
        ),
        ("8 closed forms versus brute-force sums", oracle_equivalence),
    ];
    let verbose = std::env::args().any(|a| a == "--nocapture" || a == "-v");
    let mut failed = 0;
    for (name, check) in criteria {
        let mut c = Checks::default();
        let start = Instant::now();
        check(&mut c);
        let secs = start.elapsed().as_secs_f64();
        if c.failures.is_empty() {
            println!(
                "PASS  criterion {name} ({} checks, {secs:.2} s)",
                c.notes.len()
            );
        } else {
            failed += 1;
            println!("FAIL  criterion {name}: {}", c.failures.join("; "));
        }
        if verbose {
            for n in &c.notes {
                println!("        ok: {n}");
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn point(rows: &[freqmux::mux::ScalingPoint], scheme: Scheme, n: usize) -> f64 {
    rows.iter()
        .find(|r| r.scheme == scheme && r.n_modes == n)
        .map(|r| r.p_mux_single)
        .expect("sweep point present")
}

fn scaling_with_mode_count(c: &mut Checks) {
    let start = Instant::now();
    let rows = sweep_n(
        &DetectionChain::ideal(),
        &Scheme::ALL,
        0.85,
        64,
        MuPolicy::Shared,
    )
    .unwrap();
    c.faster_than(
        "sweep over N <= 64",
        start.elapsed(),
        Duration::from_secs(1),
    );

    c.within("ideal, N = 1", point(&rows, Scheme::Ideal, 1), 0.25, 0.005);
    c.within(
        "fixed-loss, N = 10",
        point(&rows, Scheme::FixedLoss, 10),
        0.60,
        0.01,
    );
    c.within(
        "fixed-loss, N = 40",
        point(&rows, Scheme::FixedLoss, 40),
        0.75,
        0.01,
    );
    c.within("ideal, N = 40", point(&rows, Scheme::Ideal, 40), 0.89, 0.01);
    let max_of = |s: Scheme| {
        rows.iter()
            .filter(|r| r.scheme == s)
            .map(|r| r.p_mux_single)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    c.within("log-tree maximum", max_of(Scheme::LogTree), 0.41, 0.01);
    c.within("multi-pass maximum", max_of(Scheme::MultiPass), 0.50, 0.02);
    let multi = rows
        .iter()
        .find(|r| r.n_modes == 40)
        .map(|r| r.p_multi)
        .unwrap();
    c.holds(
        &format!("p_multi(N = 40) = {multi:.5} < 0.01"),
        multi < 0.01,
    );
}

fn tolerance_to_switch_loss(c: &mut Checks) {
    let start = Instant::now();
    let rows = sweep_loss(
        &DetectionChain::ideal(),
        &Scheme::ALL,
        30,
        &[0.75],
        MuPolicy::Shared,
    )
    .unwrap();
    c.faster_than("loss sweep", start.elapsed(), Duration::from_secs(1));
    c.within(
        "fixed-loss",
        point(&rows, Scheme::FixedLoss, 30),
        0.65,
        0.01,
    );
    c.within(
        "multi-pass",
        point(&rows, Scheme::MultiPass, 30),
        0.29,
        0.01,
    );
    c.within("log-tree", point(&rows, Scheme::LogTree, 30), 0.21, 0.01);
    c.within("ideal", point(&rows, Scheme::Ideal, 30), 0.86, 0.01);
}

fn ten_mode_source(c: &mut Checks) {
    let chain = DetectionChain::new(0.9, 0.9).unwrap();
    let net = SwitchNetwork::new(Scheme::FixedLoss, 0.85, 10).unwrap();
    let (_, p) = optimize_mu(&chain, 10, &net).unwrap();
    c.within("optimised p_single", p, 0.50, 0.03);
}

fn bsfwm_physics(c: &mut Checks) {
    let start = Instant::now();
    let fiber = FiberSpec::reference(4e-41);
    let pumps = PumpConfig::reference(&fiber);
    c.holds("k(ω̃ = 0) == 0", phase_mismatch(&fiber, &pumps, 0.0) == 0.0);
    c.within(
        "η at k = 0, 2γPL = π/2",
        conversion_efficiency(0.0, &pumps, &fiber),
        1.0,
        1e-12,
    );

    let beta3 = match calibrate_beta3(REFERENCE_BANDWIDTH_HZ, &pumps, &fiber) {
        Ok(b) => b,
        Err(e) => {
            c.holds(&format!("calibration failed: {e}"), false);
            return;
        }
    };
    let fiber = fiber.with_beta3(beta3);
    let rows = channel_sweep(&fiber, &pumps, 10, 100e9).unwrap();
    let (first, tenth) = (rows[0], rows[9]);
    c.within("channel 1 bandwidth (GHz)", first.bandwidth_ghz, 160.0, 1.0);
    c.within(
        "channel 10 bandwidth (GHz)",
        tenth.bandwidth_ghz,
        70.0,
        14.0,
    );
    c.holds(
        &format!(
            "channel 10 peak {:.6} >= 0.99 x channel 1 peak {:.6}",
            tenth.peak_efficiency, first.peak_efficiency
        ),
        tenth.peak_efficiency >= 0.99 * first.peak_efficiency,
    );
    c.faster_than(
        "calibration and sweep",
        start.elapsed(),
        Duration::from_secs(5),
    );
}

fn loss_budget(c: &mut Checks) {
    let budget = DetectionChain::reference_signal_budget();
    let chain = DetectionChain {
        loss_budget_db: budget.clone(),
        ..DetectionChain::ideal()
    };
    let full = chain.budget_efficiency();
    c.holds(
        &format!("full budget {:.3} % in [2.0, 3.0] %", 100.0 * full),
        (0.02..=0.03).contains(&full),
    );
    let without_switch: f64 = budget.iter().filter(|e| e.db != 1.3).map(|e| e.db).sum();
    let reduced = db_to_efficiency(without_switch);
    // Same relative band as the full budget around its reported 2.3 %.
    let (lo, hi) = (0.03 * 2.0 / 2.3, 0.03 * 3.0 / 2.3);
    c.holds(
        &format!(
            "without the switch {:.3} % in [{:.2}, {:.2}] %",
            100.0 * reduced,
            100.0 * lo,
            100.0 * hi
        ),
        (lo..=hi).contains(&reduced),
    );
    c.holds(
        "switch term raises the efficiency by 1.3 dB",
        (reduced / full - db_to_efficiency(-1.3)).abs() < 1e-12,
    );
}

fn lossy_three_channel(n_bins: u64) -> ExperimentConfig {
    ExperimentConfig {
        n_bins,
        channels: vec![
            Channel::new(0.02, 0.65, true),
            Channel::new(0.02, 1.0, false),
            Channel::new(0.02, 1.0, false),
        ],
        chain: DetectionChain {
            eta_h: 0.6,
            eta_d: 0.53,
            dark_click_prob: 1e-5,
            loss_budget_db: Vec::new(),
        },
        rng_seed: 2024,
        ..ExperimentConfig::default()
    }
}

fn monte_carlo_vs_oracle(c: &mut Checks) {
    let start = Instant::now();
    let cfg = lossy_three_channel(10_000_000);
    let rep = run_simulation(&ExperimentConfig {
        workers: 1,
        ..cfg.clone()
    })
    .unwrap();
    let exp = analytic_expectation(&cfg).unwrap();
    let mut z = |name: &str, e: freqmux::sim::Estimate, reference: f64| {
        let score = e.z_score(reference);
        c.holds(
            &format!(
                "{name}: {:.6e} ± {:.1e} vs {reference:.6e} (z = {score:+.2})",
                e.value, e.std_err
            ),
            score.abs() < 3.0,
        );
    };
    z("herald rate", rep.herald_rate, exp.herald_rate);
    z(
        "coincidence rate",
        rep.coincidence_rate,
        exp.coincidence_rate,
    );
    z("CAR", rep.car, exp.car);
    z("heralded g2", rep.g2_heralded, exp.g2_heralded);

    let reference = rep.key_values();
    for workers in [2, 8] {
        let other = run_simulation(&ExperimentConfig {
            workers,
            ..cfg.clone()
        })
        .unwrap();
        c.holds(
            &format!("identical report with {workers} workers"),
            other.key_values() == reference && other.counters == rep.counters,
        );
    }
    c.faster_than(
        "three runs of 10^7 bins",
        start.elapsed(),
        Duration::from_secs(60),
    );
}

fn scaled(cfg: &ExperimentConfig, factor: f64) -> ExperimentConfig {
    ExperimentConfig {
        channels: cfg
            .channels
            .iter()
            .map(|ch| Channel {
                xi_sq: factor * ch.xi_sq,
                ..*ch
            })
            .collect(),
        ..cfg.clone()
    }
}

fn physics_properties(c: &mut Checks) {
    let g2 = thermal_marginal_g2(0.5, 10_000_000, 7, 0).unwrap();
    c.within("unheralded thermal g2", g2.value, 2.0, 0.05);

    // Heralded g2 well below one for μ up to 0.1.
    let single = ExperimentConfig {
        n_bins: 2_000_000,
        channels: vec![Channel::new(0.1 / 1.1, 1.0, true)],
        switch_loss_db: 0.0,
        ..ExperimentConfig::default()
    };
    let low = scaled(&single, 0.2);
    let g_high = run_simulation(&single).unwrap().g2_heralded;
    let g_low = run_simulation(&ExperimentConfig {
        n_bins: 10_000_000,
        ..low
    })
    .unwrap()
    .g2_heralded;
    c.holds(
        &format!(
            "heralded g2 at μ = 0.1: {:.4} ± {:.4} < 1",
            g_high.value, g_high.std_err
        ),
        g_high.value + 3.0 * g_high.std_err < 1.0,
    );
    c.holds(
        &format!(
            "heralded g2 decreases with μ: {:.4} < {:.4}",
            g_low.value, g_high.value
        ),
        g_low.value < g_high.value,
    );

    // CAR roughly halves when every μ doubles.
    let base = ExperimentConfig {
        n_bins: 10_000_000,
        ..ExperimentConfig::default()
    };
    let car1 = run_simulation(&scaled(&base, 0.9)).unwrap().car;
    let car2 = run_simulation(&scaled(&base, 1.8)).unwrap().car;
    c.within("CAR ratio for doubled μ", car1.value / car2.value, 2.0, 0.4);

    let lossless = ExperimentConfig {
        switch_loss_db: 0.0,
        conversion_eff: 1.0,
        noise_per_pulse: 0.0,
        channels: vec![
            Channel::new(0.01, 1.0, true),
            Channel::new(0.01, 1.0, false),
            Channel::new(0.01, 1.0, false),
        ],
        ..base.clone()
    };
    let e = mux_enhancement(&lossless).unwrap();
    c.within(
        "lossless three-channel enhancement (dB)",
        e.db,
        10.0 * 3f64.log10(),
        0.2,
    );

    let e = mux_enhancement(&base).unwrap();
    c.within("demonstrator enhancement (dB)", e.db, 3.5, 0.5);
}

fn oracle_equivalence(c: &mut Checks) {
    let mut worst: f64 = 0.0;
    for i in 1..=10 {
        let src = SqueezedSource::new(0.05 * i as f64).unwrap();
        for eta_h in [0.25, 0.5, 0.75, 1.0] {
            for eta_d in [0.25, 0.5, 0.75, 1.0] {
                let chain = DetectionChain::new(eta_h, eta_d).unwrap();
                let fock = fock_oracle(&src, &chain, FOCK_DEFAULT_N_MAX).unwrap();
                worst = worst.max((fock.herald_prob - herald_prob(&src, eta_h)).abs());
                worst = worst.max(
                    (fock.conditional_single_prob().unwrap()
                        - conditional_single_prob(&src, &chain).unwrap())
                    .abs(),
                );
            }
        }
    }
    c.holds(
        &format!("largest closed-form deviation {worst:.1e} <= 1e-9"),
        worst <= 1e-9,
    );

    let mut worst: f64 = 0.0;
    for mu in [0.01, 0.1, 0.5, 2.0] {
        let src = SqueezedSource::from_mu(mu).unwrap();
        let p_h = herald_prob(&src, 1.0);
        for n in 1..=100 {
            let multi = mux_single_prob(
                &src,
                &DetectionChain::ideal(),
                &SwitchNetwork::new(Scheme::MultiPass, 1.0, n).unwrap(),
            )
            .unwrap();
            let ideal =
                mux_single_prob(&src, &DetectionChain::ideal(), &SwitchNetwork::ideal(n)).unwrap();
            let direct: f64 = (1..=n)
                .map(|j| (1.0 - p_h).powi((n - j) as i32) * p_h)
                .sum();
            let closed = 1.0 - (1.0 - p_h).powi(n as i32);
            worst = worst
                .max((multi - ideal).abs())
                .max((direct - closed).abs());
        }
    }
    c.holds(
        &format!("telescoping identity deviation {worst:.1e} <= 1e-12"),
        worst <= 1e-12,
    );
}
