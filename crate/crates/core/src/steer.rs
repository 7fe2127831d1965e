//! Steering protocol: commands in, events out, applied at step boundaries.
//!
//! Messages are JSON objects tagged by `type`. Every command carries a
//! client-chosen `id` (any JSON value) that is echoed in the `ack` or `error`
//! event answering it. Unknown fields are ignored.
//!
//! ```text
//! -> {"id": 1, "type": "start", "config": "w = 0.47\nG = 1.42"}
//! <- {"v": 1, "type": "full_snapshot", "snapshot": {...}}
//! <- {"v": 1, "type": "ack", "id": 1}
//! -> {"id": 2, "type": "step", "n": 2}
//! <- {"v": 1, "type": "state_delta", "step": 1, "changed": [...], "metrics": {...}, "lattice_hash": "..."}
//! <- {"v": 1, "type": "state_delta", "step": 2, ...}
//! <- {"v": 1, "type": "ack", "id": 2}
//! -> {"id": 3, "type": "amputate", "rows": {"first": 0, "last": 64}}
//! ```
//!
//! The session records every state-changing command with the step it was
//! applied at. Replaying that [`CommandLog`] headlessly reproduces the run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{apply_overrides, parse_config, ScenarioConfig, PARAM_KEYS};
use crate::error::{Error, Result};
use crate::io::Snapshot;
use crate::lattice::{CellCoord, Lattice};
use crate::metrics::{compute_metrics, MetricsRecord};
use crate::morph::Simulation;

pub const PROTOCOL_VERSION: u32 = 1;

/// Inclusive row band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowBand {
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Metrics,
    Snapshots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    /// Starts (or restarts) the session from a flat config text.
    Start {
        #[serde(default)]
        config: String,
    },
    Pause,
    Resume,
    Step {
        n: u64,
    },
    /// Partial parameter update; keys as in the config format.
    SetParams {
        params: BTreeMap<String, Value>,
    },
    /// Removes a row band or a list of cells.
    Amputate {
        #[serde(default)]
        rows: Option<RowBand>,
        #[serde(default)]
        cells: Option<Vec<CellCoord>>,
    },
    Snapshot,
    Subscribe {
        stream: Stream,
        #[serde(default = "one")]
        cadence: u64,
    },
    /// Requests the command log of the current session.
    GetLog,
}

fn one() -> u64 {
    1
}

/// A command with its client id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default)]
    pub id: Value,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// One executed step: cells whose state flipped, and metrics when due.
    StateDelta {
        step: u64,
        changed: Vec<CellCoord>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metrics: Option<MetricsRecord>,
        /// [`lattice_hash`] of the lattice after the step, hex.
        lattice_hash: String,
    },
    FullSnapshot {
        snapshot: Snapshot,
    },
    CommandLog {
        log: CommandLog,
    },
    Ack {
        id: Value,
    },
    Error {
        id: Value,
        reason: String,
    },
}

/// Wire form of an event: the event plus the protocol version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    #[serde(flatten)]
    pub event: Event,
}

impl From<Event> for Envelope {
    fn from(event: Event) -> Self {
        Envelope {
            v: PROTOCOL_VERSION,
            event,
        }
    }
}

/// Parses one incoming message.
pub fn parse_request(text: &str) -> Result<Request> {
    serde_json::from_str(text).map_err(|e| Error::Protocol(e.to_string()))
}

/// Best-effort id of a message that failed to parse as a request.
pub fn request_id(text: &str) -> Value {
    serde_json::from_str::<Value>(text)
        .ok()
        .and_then(|v| v.get("id").cloned())
        .unwrap_or(Value::Null)
}

/// FNV-1a over the cell states, for client-side coherence checks.
pub fn lattice_hash(lattice: &Lattice) -> u64 {
    lattice.states().iter().fold(0xcbf2_9ce4_8422_2325, |h, s| {
        (h ^ s.is_active() as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// State-changing action recorded in a [`CommandLog`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    SetParams { params: BTreeMap<String, Value> },
    Amputate { cells: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Step count at which the action was applied.
    pub step: u64,
    #[serde(flatten)]
    pub action: Action,
}

/// Everything needed to replay a session: its start config, the actions in
/// order, and the step it had reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandLog {
    pub config: String,
    pub entries: Vec<LogEntry>,
    pub final_step: u64,
}

struct Live {
    config: ScenarioConfig,
    sim: Simulation,
    log: CommandLog,
    metrics_cadence: Option<u64>,
    snapshot_cadence: Option<u64>,
}

/// One steering session. Not thread-safe by itself; a server owns it on a
/// single task and feeds it commands between steps.
#[derive(Default)]
pub struct Session {
    live: Option<Live>,
    running: bool,
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn merged_params(
    config: &ScenarioConfig,
    params: &BTreeMap<String, Value>,
) -> Result<ScenarioConfig> {
    let mut next = config.clone();
    for (k, v) in params {
        let canonical = PARAM_KEYS.iter().find(|p| p.eq_ignore_ascii_case(k.trim()));
        match canonical {
            Some(key) => next.set(key, &value_text(v))?,
            None => {
                return Err(Error::UnknownKey {
                    key: k.clone(),
                    valid: PARAM_KEYS.join(", "),
                })
            }
        }
    }
    next.params.validate()?;
    Ok(next)
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_running(&self) -> bool {
        self.running && self.live.is_some()
    }

    pub fn simulation(&self) -> Option<&Simulation> {
        self.live.as_ref().map(|l| &l.sim)
    }

    pub fn log(&self) -> Option<&CommandLog> {
        self.live.as_ref().map(|l| &l.log)
    }

    /// Applies one command and returns the events it produced, ending with
    /// its `ack` or `error`.
    pub fn handle(&mut self, req: Request) -> Vec<Event> {
        let mut events = Vec::new();
        match self.apply(req.command, &mut events) {
            Ok(()) => events.push(Event::Ack { id: req.id }),
            Err(e) => events.push(Event::Error {
                id: req.id,
                reason: e.to_string(),
            }),
        }
        events
    }

    /// Executes one step if the session is running.
    pub fn tick(&mut self) -> Vec<Event> {
        if !self.is_running() {
            return Vec::new();
        }
        let live = self.live.as_mut().expect("running implies live");
        Self::advance(live)
    }

    fn advance(live: &mut Live) -> Vec<Event> {
        let before = live.sim.lattice().clone();
        live.sim.step();
        let after = live.sim.lattice();
        let step = live.sim.step_count();
        live.log.final_step = step;
        let changed = before
            .states()
            .iter()
            .zip(after.states())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| after.topology().coord(i))
            .collect();
        let metrics = live
            .metrics_cadence
            .filter(|c| step.is_multiple_of(*c))
            .map(|_| compute_metrics(step, after, &live.sim.state().potentials));
        let mut out = vec![Event::StateDelta {
            step,
            changed,
            metrics,
            lattice_hash: format!("{:016x}", lattice_hash(after)),
        }];
        if live
            .snapshot_cadence
            .is_some_and(|c| step.is_multiple_of(c))
        {
            out.push(Event::FullSnapshot {
                snapshot: Snapshot::capture(live.sim.state(), live.config.hash()),
            });
        }
        out
    }

    fn apply(&mut self, cmd: Command, events: &mut Vec<Event>) -> Result<()> {
        if let Command::Start { config } = &cmd {
            let cfg = parse_config(config)?;
            let sim = Simulation::new(cfg.params, cfg.initial_lattice()?, cfg.seed)?;
            let hash = cfg.hash();
            events.push(Event::FullSnapshot {
                snapshot: Snapshot::capture(sim.state(), hash),
            });
            self.live = Some(Live {
                log: CommandLog {
                    config: config.clone(),
                    entries: Vec::new(),
                    final_step: 0,
                },
                config: cfg,
                sim,
                metrics_cadence: None,
                snapshot_cadence: None,
            });
            self.running = false;
            return Ok(());
        }
        let live = self
            .live
            .as_mut()
            .ok_or_else(|| Error::Protocol("no session; send `start` first".into()))?;
        match cmd {
            Command::Start { .. } => unreachable!(),
            Command::Pause => self.running = false,
            Command::Resume => self.running = true,
            Command::Step { n } => {
                for _ in 0..n {
                    events.extend(Self::advance(live));
                }
            }
            Command::SetParams { params } => {
                let next = merged_params(&live.config, &params)?;
                live.sim.set_params(next.params)?;
                live.config = next;
                let step = live.sim.step_count();
                live.log.entries.push(LogEntry {
                    step,
                    action: Action::SetParams { params },
                });
            }
            Command::Amputate { rows, cells } => {
                let topo = live.sim.lattice().topology();
                let (w, h) = (topo.width(), topo.height());
                let mut targets: Vec<CellCoord> = Vec::new();
                if let Some(b) = rows {
                    if b.first > b.last || b.last >= h {
                        return Err(Error::Protocol(format!(
                            "row band {}..{} outside 0..{}",
                            b.first,
                            b.last,
                            h - 1
                        )));
                    }
                    targets.extend(
                        (b.first..=b.last).flat_map(|r| (0..w).map(move |c| CellCoord::new(r, c))),
                    );
                }
                for c in cells.unwrap_or_default() {
                    if c.row >= h || c.col >= w {
                        return Err(Error::Protocol(format!(
                            "cell ({}, {}) out of bounds",
                            c.row, c.col
                        )));
                    }
                    targets.push(c);
                }
                let removed: Vec<usize> = targets
                    .iter()
                    .map(|&c| live.sim.lattice().topology().index(c))
                    .filter(|&i| live.sim.lattice().is_active_at(i))
                    .collect();
                live.sim.amputate_indices(&removed);
                let step = live.sim.step_count();
                live.log.entries.push(LogEntry {
                    step,
                    action: Action::Amputate { cells: removed },
                });
                events.push(Event::FullSnapshot {
                    snapshot: Snapshot::capture(live.sim.state(), live.config.hash()),
                });
            }
            Command::Snapshot => {
                events.push(Event::FullSnapshot {
                    snapshot: Snapshot::capture(live.sim.state(), live.config.hash()),
                });
            }
            Command::Subscribe { stream, cadence } => {
                if cadence == 0 {
                    return Err(Error::Protocol("cadence must be >= 1".into()));
                }
                match stream {
                    Stream::Metrics => live.metrics_cadence = Some(cadence),
                    Stream::Snapshots => live.snapshot_cadence = Some(cadence),
                }
                events.push(Event::FullSnapshot {
                    snapshot: Snapshot::capture(live.sim.state(), live.config.hash()),
                });
            }
            Command::GetLog => events.push(Event::CommandLog {
                log: live.log.clone(),
            }),
        }
        Ok(())
    }
}

/// Re-runs a logged session headlessly and returns the simulation at the
/// log's final step.
pub fn replay(log: &CommandLog) -> Result<Simulation> {
    let mut cfg = ScenarioConfig::default();
    apply_overrides(&mut cfg, &log.config)?;
    cfg.validate()?;
    let mut sim = Simulation::new(cfg.params, cfg.initial_lattice()?, cfg.seed)?;
    for entry in &log.entries {
        if entry.step < sim.step_count() {
            return Err(Error::Protocol(format!(
                "log entry at step {} is out of order",
                entry.step
            )));
        }
        sim.run(entry.step - sim.step_count());
        match &entry.action {
            Action::SetParams { params } => {
                cfg = merged_params(&cfg, params)?;
                sim.set_params(cfg.params)?;
            }
            Action::Amputate { cells } => {
                if cells.iter().any(|&i| i >= sim.lattice().len()) {
                    return Err(Error::Protocol(
                        "logged amputation outside the lattice".into(),
                    ));
                }
                sim.amputate_indices(cells);
            }
        }
    }
    if log.final_step < sim.step_count() {
        return Err(Error::Protocol("final step precedes the last entry".into()));
    }
    sim.run(log.final_step - sim.step_count());
    Ok(sim)
}
