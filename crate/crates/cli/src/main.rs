mod output;
mod serve;

use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tokenmorph::config::{apply_overrides, ScenarioConfig};
use tokenmorph::scenario::{self, Amputation};

#[derive(Parser)]
#[command(
    name = "tokenmorph",
    version,
    about = "Token-exchange morphogenesis on a periodic hex lattice"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write metrics, snapshots and a summary.
    Run(Common),
    /// Run every combination of the `sweep.*` axes to the checkpoint step.
    Sweep(Common),
    /// Amputation experiment; defaults to cutting rows 0..64 at step 200.
    Regen(Common),
    /// Run and report connected components over time.
    Replicate(Common),
    /// Serve the steering protocol over WebSocket at /ws.
    Serve(ServeArgs),
    /// Re-run a command log saved from a steering session.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    /// Config file in `key = value` form.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "N")]
    snapshot_every: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 7788)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    /// Events a client may fall behind before stepping pauses for it.
    #[arg(long, default_value_t = 256)]
    buffer: usize,
}

#[derive(Args)]
struct ReplayArgs {
    /// Command log JSON as returned by `get_log`.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            apply_overrides(&mut cfg, &text).with_context(|| format!("in {}", path.display()))?;
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got `{kv}`");
            };
            cfg.set(k, v)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(s) = self.snapshot_every {
            cfg.snapshot_every = s;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Run(c) => {
            let cfg = c.load()?;
            cfg.validate()?;
            let result = scenario::run(&cfg)?;
            output::write_run(&c.out, &cfg, &result)?;
            let last = result.metrics.last().expect("steps >= 1");
            println!(
                "step {} area {} regime {}",
                last.step, last.area, result.regime
            );
        }
        Cmd::Sweep(c) => {
            let cfg = c.load()?;
            cfg.validate()?;
            if cfg.sweep.is_empty() {
                bail!("no sweep axes; add e.g. `--set sweep.G=1.30:2.00:0.05`");
            }
            let table = scenario::sweep(&cfg, &cfg.sweep)?;
            output::write_sweep(&c.out, &cfg, &table)?;
            for cell in &table {
                let vals: Vec<String> = cell
                    .values
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                println!(
                    "{} area {} regime {}",
                    vals.join(" "),
                    cell.record.area,
                    cell.regime
                );
            }
        }
        Cmd::Regen(c) => {
            let mut cfg = c.load()?;
            if cfg.amputation.is_none() {
                cfg.amputation = Some(Amputation {
                    step: 200,
                    rows: 0..65,
                });
            }
            cfg.validate()?;
            let result = scenario::run(&cfg)?;
            let report = result.regeneration.as_ref().expect("amputation set");
            if report.status == scenario::RegenStatus::Degenerate {
                bail!("cut at step {} left dispersion unchanged", report.cut_step);
            }
            output::write_run(&c.out, &cfg, &result)?;
            output::write_ri(&c.out, report)?;
            match report.steps_to_recover() {
                Some(n) => println!("recovered (RI >= 0.8) {n} steps after the cut"),
                None => println!("not recovered: {:?}", report.status),
            }
        }
        Cmd::Replicate(c) => {
            let cfg = c.load()?;
            cfg.validate()?;
            let result = scenario::run(&cfg)?;
            output::write_run(&c.out, &cfg, &result)?;
            output::write_components(&c.out, &result)?;
            let rep = scenario::replication_monitor(&result);
            println!(
                "max components {} births {} longest-lived birth {} steps",
                rep.max_count(),
                rep.births.len(),
                rep.max_birth_persistence()
            );
        }
        Cmd::Serve(a) => serve::serve(a.bind, a.port, a.buffer)?,
        Cmd::Replay(a) => replay(&a.log, &a.out)?,
    }
    Ok(())
}

fn replay(log: &Path, out: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
    let log: tokenmorph::steer::CommandLog =
        serde_json::from_str(&text).context("parsing command log")?;
    let sim = tokenmorph::steer::replay(&log)?;
    let hash = tokenmorph::config::parse_config(&log.config)?.hash();
    let snap = tokenmorph::io::Snapshot::capture(sim.state(), hash);
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("step_{:06}.txt", snap.step));
    std::fs::write(&path, snap.encode())?;
    println!(
        "step {} area {} hash {:016x} -> {}",
        snap.step,
        sim.lattice().active_count(),
        tokenmorph::steer::lattice_hash(sim.lattice()),
        path.display()
    );
    Ok(())
}
