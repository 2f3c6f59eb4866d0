use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use freqmux::bsfwm::{self, channel_pumps, channel_sweep, efficiency_spectrum};
use freqmux::config::{default_catalog, Config};
use freqmux::mux::{optimize_mu, sweep_loss, sweep_n, ScalingPoint, Scheme, SwitchNetwork};
use freqmux::report::{Format, Table, Value};
use freqmux::sim::{self, counter_key_values};

/// Design and simulation of frequency-multiplexed heralded single-photon sources.
#[derive(Debug, Parser)]
#[command(name = "freqmux", version)]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when absent.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[arg(short, long, global = true, default_value = "csv")]
    format: Format,

    /// Overrides `experiment.rng_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Print every default value with its origin and exit.
    #[arg(long)]
    show_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimised single-photon probability versus mode count, all schemes.
    SweepN {
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        eta_s: Option<f64>,
    },
    /// Single-photon probability versus switch efficiency at fixed N.
    SweepLoss {
        #[arg(long)]
        n_modes: Option<usize>,
    },
    /// Optimal mean photon number for the configured network.
    OptimizeMu {
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        n_modes: Option<usize>,
        #[arg(long)]
        eta_s: Option<f64>,
    },
    /// Conversion efficiency versus input detuning for each channel.
    Phasematch {
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        spacing_ghz: Option<f64>,
    },
    /// Peak efficiency and acceptance bandwidth per channel.
    Channels {
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        spacing_ghz: Option<f64>,
    },
    /// Monte Carlo run of the multiplexed source.
    Simulate {
        #[arg(long)]
        n_bins: Option<u64>,
    },
    /// Multiplexed versus mean single-channel coincidence rate.
    Enhancement {
        #[arg(long)]
        n_bins: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<freqmux::Error>() {
                Some(e) => {
                    if let freqmux::Error::InsufficientStatistics { counters, .. } = e {
                        for (k, v) in counter_key_values(counters) {
                            eprintln!("  {k} = {v}");
                        }
                    }
                    exit_code(e)
                }
                None => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn exit_code(e: &freqmux::Error) -> u8 {
    use freqmux::Error::*;
    match e {
        Config(_) | Domain { .. } | Efficiency { .. } => 2,
        UndefinedConditional(_)
        | TruncationInadequate { .. }
        | UnsupportedScheme(_)
        | NoHalfCrossing { .. }
        | NoSolution(_) => 3,
        InsufficientStatistics { .. } => 4,
        Io { .. } | Format(_) => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.show_defaults {
        let mut t = Table::new(["key", "value", "source"]);
        for d in default_catalog() {
            t.push(vec![d.key.into(), d.value.into(), d.source.into()]);
        }
        return emit(&t, &cli);
    }
    let Some(command) = &cli.command else {
        anyhow::bail!("no subcommand given; see --help");
    };
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let (table, summary) = match command {
        Command::SweepN { n_max, eta_s } => {
            let n_max = n_max.unwrap_or(config.sweep.n_max);
            let eta_s = eta_s.unwrap_or(config.network.eta_s);
            let rows = sweep_n(
                &config.chain(),
                &config.sweep.schemes,
                eta_s,
                n_max,
                config.network.mu_policy,
            )
            .context("sweep-n")?;
            let best = rows
                .iter()
                .max_by(|a, b| a.p_mux_single.total_cmp(&b.p_mux_single));
            let summary = match best {
                Some(b) => format!(
                    "sweep-n: {} points, best {} at N = {} with p = {:.4}",
                    rows.len(),
                    b.scheme,
                    b.n_modes,
                    b.p_mux_single
                ),
                None => "sweep-n: no points".to_string(),
            };
            (scaling_table(&rows), summary)
        }
        Command::SweepLoss { n_modes } => {
            let n = n_modes.unwrap_or(config.sweep.loss_n_modes);
            let rows = sweep_loss(
                &config.chain(),
                &config.sweep.schemes,
                n,
                &config.sweep.eta_grid,
                config.network.mu_policy,
            )
            .context("sweep-loss")?;
            let summary = format!("sweep-loss: {} points at N = {n}", rows.len());
            (scaling_table(&rows), summary)
        }
        Command::OptimizeMu {
            scheme,
            n_modes,
            eta_s,
        } => {
            let base = config.network()?;
            let net = SwitchNetwork::new(
                scheme.unwrap_or(base.scheme),
                eta_s.unwrap_or(base.eta_s),
                n_modes.unwrap_or(base.n_modes),
            )?;
            let chain = config.chain();
            let (mu, p) = optimize_mu(&chain, net.n_modes, &net).context("optimize-mu")?;
            let mut t = Table::new([
                "scheme", "N", "eta_s", "eta_h", "eta_d", "mu_opt", "p_single",
            ]);
            t.push(vec![
                net.scheme.as_str().into(),
                net.n_modes.into(),
                net.eta_s.into(),
                chain.eta_h.into(),
                chain.eta_d.into(),
                mu.into(),
                p.into(),
            ]);
            let summary = format!(
                "optimize-mu: {} N = {}: mu = {mu:.6}, p = {p:.6}",
                net.scheme, net.n_modes
            );
            (t, summary)
        }
        Command::Phasematch {
            channels,
            spacing_ghz,
        } => {
            let (fiber, pumps) = config.fiber_and_pumps().context("phasematch")?;
            let n = channels.unwrap_or(config.pumps.channels);
            let spacing = spacing_ghz.unwrap_or(config.pumps.spacing_ghz) * 1e9;
            let points = config.pumps.spectrum_points.max(2);
            let span = config.pumps.spectrum_span_ghz * 1e9;
            let offsets: Vec<f64> = (0..points)
                .map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64)
                .collect();
            let mut t = Table::new(["channel", "delta_omega_ghz", "offset_ghz", "efficiency"]);
            for j in 1..=n {
                let p = channel_pumps(&pumps, j, spacing);
                let dw = bsfwm::ghz_from_omega(p.delta_omega());
                for (nu, eta) in offsets
                    .iter()
                    .zip(efficiency_spectrum(&fiber, &p, &offsets))
                {
                    t.push(vec![j.into(), dw.into(), (nu / 1e9).into(), eta.into()]);
                }
            }
            let summary = format!(
                "phasematch: {n} channels x {points} points, beta3 = {:.4e} s^3/m",
                fiber.beta3
            );
            (t, summary)
        }
        Command::Channels {
            channels,
            spacing_ghz,
        } => {
            let (fiber, pumps) = config.fiber_and_pumps().context("channels")?;
            let n = channels.unwrap_or(config.pumps.channels);
            let spacing = spacing_ghz.unwrap_or(config.pumps.spacing_ghz) * 1e9;
            let rows = channel_sweep(&fiber, &pumps, n, spacing).context("channels")?;
            let mut t = Table::new([
                "channel",
                "delta_omega_ghz",
                "peak_efficiency",
                "bandwidth_ghz",
            ]);
            for r in &rows {
                t.push(vec![
                    r.channel.into(),
                    r.delta_omega_ghz.into(),
                    r.peak_efficiency.into(),
                    r.bandwidth_ghz.into(),
                ]);
            }
            let (first, last) = (&rows[0], &rows[rows.len() - 1]);
            let summary = format!(
                "channels: bandwidth {:.1} GHz (channel 1) to {:.1} GHz (channel {})",
                first.bandwidth_ghz, last.bandwidth_ghz, last.channel
            );
            (t, summary)
        }
        Command::Simulate { n_bins } => {
            let exp = experiment(&config, &cli, *n_bins);
            let report = sim::run_simulation(&exp).context("simulate")?;
            let expected = sim::analytic_expectation(&exp)?;
            let mut kv = report.key_values();
            kv.push((
                "expected_herald_rate_hz".into(),
                format!("{:e}", expected.herald_rate),
            ));
            kv.push((
                "expected_coincidence_rate_hz".into(),
                format!("{:e}", expected.coincidence_rate),
            ));
            kv.push(("expected_car".into(), format!("{:e}", expected.car)));
            kv.push((
                "expected_g2_heralded".into(),
                format!("{:e}", expected.g2_heralded),
            ));
            let summary = format!(
                "simulate: {} bins, coincidence rate {:.4e} Hz, CAR {:.1} +- {:.1}, g2 {:.4} +- {:.4}",
                exp.n_bins,
                report.coincidence_rate.value,
                report.car.value,
                report.car.std_err,
                report.g2_heralded.value,
                report.g2_heralded.std_err
            );
            (Table::from_key_values(&kv), summary)
        }
        Command::Enhancement { n_bins } => {
            let exp = experiment(&config, &cli, *n_bins);
            let e = sim::mux_enhancement(&exp).context("enhancement")?;
            let expected = sim::expected_enhancement(&exp)?;
            let mut t = Table::new([
                "mux_rate_hz",
                "mean_single_rate_hz",
                "enhancement_db",
                "std_err_db",
                "expected_db",
            ]);
            t.push(vec![
                e.mux_rate.into(),
                e.mean_single_rate.into(),
                e.db.into(),
                e.std_err_db.into(),
                expected.into(),
            ]);
            let summary = format!(
                "enhancement: {:.3} +- {:.3} dB (expected {expected:.3} dB)",
                e.db, e.std_err_db
            );
            (t, summary)
        }
    };
    emit(&table, &cli)?;
    eprintln!("{summary}");
    Ok(())
}

fn experiment(config: &Config, cli: &Cli, n_bins: Option<u64>) -> sim::ExperimentConfig {
    let mut exp = config.experiment();
    if let Some(seed) = cli.seed {
        exp.rng_seed = seed;
    }
    if let Some(w) = cli.workers {
        exp.workers = w;
    }
    if let Some(n) = n_bins {
        exp.n_bins = n;
    }
    exp
}

fn scaling_table(rows: &[ScalingPoint]) -> Table {
    let mut t = Table::new(["scheme", "N", "eta_s", "mu_opt", "p_single", "p_multi"]);
    for r in rows {
        t.push(vec![
            Value::from(r.scheme.as_str()),
            r.n_modes.into(),
            r.eta_s.into(),
            r.mu_opt.into(),
            r.p_mux_single.into(),
            r.p_multi.into(),
        ]);
    }
    t
}

fn emit(table: &Table, cli: &Cli) -> Result<()> {
    match &cli.output {
        Some(path) => {
            let file = File::create(path).map_err(|source| freqmux::Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let mut w = BufWriter::new(file);
            table.write(cli.format, &mut w)?;
            w.flush()
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let stdout = io::stdout();
            table.write(cli.format, stdout.lock())?;
        }
    }
    Ok(())
}
