use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use stablefee_core::harness::experiments::{fee_ratio_experiment, fee_stability_experiment, TxTemplate};
use stablefee_core::harness::report::GovernanceStatus;
use stablefee_core::harness::scenario::{build_world, run_scenario, run_world, ScenarioConfig, ScenarioError};
use stablefee_core::harness::series::{format_price_series, load_price_series, stable_series, volatile_series};
use stablefee_core::rpc::{serve, spawn_driver, ChainBackend, Gateway, WorldNode};
use stablefee_core::types::{format_fixed, parse_fixed, Amount, CurrencyUnit, Rate};

/// Exit code for a run that completed but broke a safety property.
const EXIT_SAFETY: u8 = 2;

#[derive(Parser)]
#[command(name = "stablefee", version, about = "Multi-stablecoin fee chain: simulator, experiments and endpoints")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run or serve a simulated validator network.
    #[command(subcommand)]
    Node(NodeCmd),
    /// Fee experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Governance state queries.
    #[command(subcommand)]
    Gov(GovCmd),
}

#[derive(Subcommand)]
enum NodeCmd {
    /// Run a scenario to its target height and print the metrics report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the report path prefix from the scenario file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print the JSON report instead of the text one.
        #[arg(long)]
        json: bool,
    },
    /// Serve one JSON-RPC endpoint per currency unit over a live simulated network.
    Serve {
        /// Scenario to boot from; workload entries are ignored.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Port of the first unit; later units take the following ports. 0 picks free ports.
        #[arg(long, default_value_t = 8545)]
        port: u16,
        /// Simulated milliseconds advanced per tick.
        #[arg(long, default_value_t = 100)]
        sim_ms: u64,
        #[arg(long, default_value_t = 100)]
        tick_ms: u64,
        /// Stop after this many seconds instead of waiting for Ctrl-C.
        #[arg(long)]
        seconds: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesKind {
    Stable,
    Volatile,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Send the same transfer through two endpoints and compare the fees.
    FeeRatio {
        /// Units of `to` per unit of `from`, decimal.
        #[arg(long)]
        rate: String,
        #[arg(long, default_value = "USD")]
        from: String,
        #[arg(long, default_value = "CNY")]
        to: String,
        #[arg(long)]
        json: bool,
    },
    /// Max/min reference-currency fee for a stablecoin and a volatile token.
    FeeStability {
        /// `day,price` CSV for the stablecoin.
        #[arg(long)]
        stable: PathBuf,
        /// `day,price` CSV for the volatile token.
        #[arg(long)]
        volatile: PathBuf,
        /// Gas price in token gigasubunits.
        #[arg(long, default_value = "30")]
        gas_price: String,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded synthetic `day,price` series.
    GenSeries {
        #[arg(long, value_enum)]
        kind: SeriesKind,
        #[arg(long, default_value_t = 182)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Volatile: lowest price.
        #[arg(long, default_value = "2000")]
        min: String,
        /// Volatile: highest price.
        #[arg(long, default_value = "3680")]
        max: String,
        /// Stable: largest deviation from 1.0 in parts per million.
        #[arg(long, default_value_t = 1_800)]
        deviation_ppm: u64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GovCmd {
    /// Run a scenario and show one unit's committee, supply and proposals.
    Status {
        #[arg(long)]
        unit: String,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn unit(code: &str) -> Result<CurrencyUnit> {
    CurrencyUnit::new(code).with_context(|| format!("bad currency unit `{code}`"))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn node_run(scenario: PathBuf, report: Option<PathBuf>, json: bool) -> Result<ExitCode> {
    let mut cfg = ScenarioConfig::load(&scenario)?;
    if report.is_some() {
        cfg.report = report;
    }
    match run_scenario(&cfg) {
        Ok(r) => {
            if json {
                print!("{}", r.to_json());
            } else {
                print!("{}", r.to_text());
            }
            if !r.reached_target {
                eprintln!("warning: target height {} not reached", r.target_height);
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(ScenarioError::Diverged { violations, report }) => {
            print!("{}", if json { report.to_json() } else { report.to_text() });
            eprintln!("safety violated: {} violation(s)", violations.len());
            Ok(ExitCode::from(EXIT_SAFETY))
        }
        Err(e) => Err(e.into()),
    }
}

fn node_serve(scenario: Option<PathBuf>, host: IpAddr, port: u16, sim_ms: u64, tick_ms: u64, seconds: Option<u64>) -> Result<ExitCode> {
    let mut cfg = match scenario {
        Some(p) => ScenarioConfig::load(&p)?,
        None => ScenarioConfig::from_toml(DEFAULT_SERVE_SCENARIO)?,
    };
    cfg.workload.clear();
    let (world, gateway) = build_world(&cfg)?;
    let units = world.node(gateway).context("gateway node")?.app.config.units.clone();
    let world = Arc::new(Mutex::new(world));
    let backend: Arc<dyn ChainBackend> = Arc::new(WorldNode { world: world.clone(), node: gateway });
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        for (i, u) in units.iter().enumerate() {
            let addr = SocketAddr::new(host, if port == 0 { 0 } else { port + i as u16 });
            let (bound, _) = serve(addr, Arc::new(Gateway::new(*u, backend.clone()))).await.with_context(|| format!("binding {addr}"))?;
            println!("{u} endpoint on http://{bound}");
        }
        let _driver = spawn_driver(world.clone(), sim_ms, Duration::from_millis(tick_ms));
        match seconds {
            Some(s) => tokio::time::sleep(Duration::from_secs(s)).await,
            None => tokio::signal::ctrl_c().await?,
        }
        let w = world.lock().expect("world lock");
        println!("stopped at simulated {} ms, height {}", w.now, w.min_honest_height());
        if w.violations.is_empty() {
            Ok(ExitCode::SUCCESS)
        } else {
            for v in &w.violations {
                eprintln!("safety violated: {v}");
            }
            Ok(ExitCode::from(EXIT_SAFETY))
        }
    })
}

/// Four validators and a wallet holding 100,000 USD and 200,000 CNY.
const DEFAULT_SERVE_SCENARIO: &str = r#"
seed = 1
target_height = 0

[timeouts]
block_interval_ms = 1000

[[accounts]]
name = "wallet"
balances = { USD = "100000", CNY = "200000" }
"#;

fn experiment(cmd: ExperimentCmd) -> Result<ExitCode> {
    match cmd {
        ExperimentCmd::FeeRatio { rate, from, to, json } => {
            let rate = Rate::parse(unit(&from)?, unit(&to)?, &rate).context("bad rate")?;
            let r = fee_ratio_experiment(rate, &TxTemplate::default())?;
            if json {
                print_json(&r)?;
            } else {
                println!("rate            {}", format_fixed(rate.value, 9));
                println!("fee {:<11} {} (gas {})", r.reference_receipt.unit, r.reference_receipt.fee_charged, r.reference_receipt.gas_used);
                println!("fee {:<11} {} (gas {})", r.unit_receipt.unit, r.unit_receipt.fee_charged, r.unit_receipt.gas_used);
                println!("ratio           {}", r.ratio_decimal());
            }
        }
        ExperimentCmd::FeeStability { stable, volatile, gas_price, json } => {
            let s = load_price_series(&stable).with_context(|| format!("reading {}", stable.display()))?;
            let v = load_price_series(&volatile).with_context(|| format!("reading {}", volatile.display()))?;
            let price = Amount::parse_giga(&gas_price).context("bad gas price")?;
            let r = fee_stability_experiment(&s, &v, &TxTemplate::default(), price)?;
            if json {
                print_json(&r)?;
            } else {
                println!("days            {}", r.days);
                println!("token fee       {}", r.token_fee);
                println!("stable ratio    {}", r.stable.ratio_decimal());
                println!("volatile ratio  {}", r.volatile.ratio_decimal());
            }
        }
        ExperimentCmd::GenSeries { kind, days, seed, min, max, deviation_ppm, out } => {
            if days < 2 {
                bail!("need at least 2 days");
            }
            let prices = match kind {
                SeriesKind::Volatile => {
                    let lo = parse_fixed(&min, 9).context("bad --min")?;
                    let hi = parse_fixed(&max, 9).context("bad --max")?;
                    if lo == 0 || hi < lo {
                        bail!("need 0 < min <= max");
                    }
                    volatile_series(seed, days, lo, hi)
                }
                SeriesKind::Stable => {
                    if deviation_ppm >= 1_000_000 {
                        bail!("deviation must be below 1,000,000 ppm");
                    }
                    stable_series(seed, days, deviation_ppm)
                }
            };
            let text = format_price_series(&prices);
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn gov_status(code: &str, scenario: PathBuf, json: bool) -> Result<ExitCode> {
    let u = unit(code)?;
    let mut cfg = ScenarioConfig::load(&scenario)?;
    cfg.report = None;
    let run = run_world(&cfg)?;
    let status = GovernanceStatus::of(&run, u).with_context(|| format!("unit {u} is not active at the end of the run"))?;
    if json {
        print_json(&status)?;
    } else {
        print!("{}", status.to_text());
    }
    if !run.world.violations.is_empty() {
        eprintln!("safety violated: {} violation(s)", run.world.violations.len());
        return Ok(ExitCode::from(EXIT_SAFETY));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Node(NodeCmd::Run { scenario, report, json }) => node_run(scenario, report, json),
        Cmd::Node(NodeCmd::Serve { scenario, host, port, sim_ms, tick_ms, seconds }) => {
            node_serve(scenario, host, port, sim_ms, tick_ms, seconds)
        }
        Cmd::Experiment(cmd) => experiment(cmd),
        Cmd::Gov(GovCmd::Status { unit, scenario, json }) => gov_status(&unit, scenario, json),
    }
}
