//! Experiment protocols: single runs, sweeps, regeneration and replication.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::config::{Amputation, ClassifyThresholds, ScenarioConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::io::Snapshot;
use crate::metrics::{
    compute_metrics, dispersion, recovery_index, track_components, ComponentTrack, MetricsRecord,
};
use crate::morph::Simulation;
use crate::rng::derive_seed;

/// Regeneration counts as successful once RI reaches this value.
pub const RECOVERY_THRESHOLD: f64 = 0.8;

/// Morphological regime read off a metrics history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Extinct,
    SmallFixedCluster,
    LimbExtension,
    MeshExpansion,
    FullExpansion,
    /// Not growing and not changing, but too large for a small cluster.
    StationaryForm,
    Unclassified,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

/// Classifies the last record of `history`.
///
/// `cells` is the lattice size. Rules, first match wins: area 0 is
/// `Extinct`; fewer than `window + 1` records is `Unclassified`; area above
/// `full_fraction * cells` is `FullExpansion`; area below `small_area` and
/// constant over the window is `SmallFixedCluster`. If area grew over the
/// window, circularity below `limb_circularity` with an active/boundary ratio
/// in `[limb_ratio_min, limb_ratio_max]` is `LimbExtension` and a ratio above
/// the range is `MeshExpansion`. A constant area is `StationaryForm`.
pub fn classify(history: &[MetricsRecord], cells: usize, t: &ClassifyThresholds) -> Regime {
    let Some(last) = history.last() else {
        return Regime::Unclassified;
    };
    if last.area == 0 {
        return Regime::Extinct;
    }
    if history.len() <= t.window {
        return Regime::Unclassified;
    }
    let window = &history[history.len() - 1 - t.window..];
    let unchanged = window.iter().all(|r| r.area == last.area);
    let growing = last.area > window[0].area;
    if last.area as f64 > t.full_fraction * cells as f64 {
        return Regime::FullExpansion;
    }
    if last.area < t.small_area && unchanged {
        return Regime::SmallFixedCluster;
    }
    if growing {
        let ratio = last.active_boundary_ratio().unwrap_or(0.0);
        let circ = last.circularity.unwrap_or(f64::INFINITY);
        if circ < t.limb_circularity && (t.limb_ratio_min..=t.limb_ratio_max).contains(&ratio) {
            return Regime::LimbExtension;
        }
        if ratio > t.limb_ratio_max {
            return Regime::MeshExpansion;
        }
    }
    if unchanged {
        return Regime::StationaryForm;
    }
    Regime::Unclassified
}

/// Outcome of an amputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegenStatus {
    /// RI reached the threshold at this step.
    Recovered {
        step: u64,
    },
    NotRecovered,
    /// The cut, or the dynamics afterwards, left nothing alive.
    Extinct,
    /// The cut did not change dispersion, so RI is undefined.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenReport {
    pub cut_step: u64,
    pub removed: usize,
    pub v_pre: f64,
    pub v_post: f64,
    /// `(step, RI)` from the cut step (RI 0) to the end of the run.
    pub ri: Vec<(u64, f64)>,
    pub status: RegenStatus,
}

impl RegenReport {
    /// Steps from the cut to recovery.
    pub fn steps_to_recover(&self) -> Option<u64> {
        match self.status {
            RegenStatus::Recovered { step } => Some(step - self.cut_step),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Birth {
    pub id: u64,
    pub step: u64,
    pub parent: Option<u64>,
}

/// Component bookkeeping over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationReport {
    /// Component count per recorded step.
    pub counts: Vec<usize>,
    /// Components that appeared after the first recorded step.
    pub births: Vec<Birth>,
    /// Longest observed persistence per track id.
    pub persistence: BTreeMap<u64, u64>,
}

impl ReplicationReport {
    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Longest persistence among components born during the run.
    pub fn max_birth_persistence(&self) -> u64 {
        self.births
            .iter()
            .filter_map(|b| self.persistence.get(&b.id).copied())
            .max()
            .unwrap_or(0)
    }

    /// More than one component at some step, and a born component that
    /// lasted at least `min_persistence` steps.
    pub fn replicated(&self, min_persistence: u64) -> bool {
        self.max_count() > 1 && self.max_birth_persistence() >= min_persistence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// One record per executed step, steps `1..=steps`.
    pub metrics: Vec<MetricsRecord>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
    pub regime: Regime,
    pub regeneration: Option<RegenReport>,
    pub replication: ReplicationReport,
}

/// Runs `config` to completion.
///
/// Metrics are recorded after every step. Snapshots are taken at step 0 and
/// at every multiple of `snapshot_every`, plus a post-cut snapshot after an
/// amputation when snapshots are enabled. An amputation configured for step
/// `s` is applied after step `s` is recorded, so record `s` is the pre-cut
/// state.
pub fn run(config: &ScenarioConfig) -> Result<RunResult> {
    config.validate()?;
    let mut sim = Simulation::new(config.params, config.initial_lattice()?, config.seed)?;
    let hash = config.hash();
    let cells = sim.lattice().len();
    let mut metrics = Vec::with_capacity(config.steps as usize);
    let mut snapshots = Vec::new();
    if config.snapshot_every > 0 {
        snapshots.push(Snapshot::capture(sim.state(), hash));
    }
    let mut tracks: Vec<ComponentTrack> = Vec::new();
    let mut next_id = 0;
    let mut replication = ReplicationReport::default();
    let mut regen: Option<RegenReport> = None;

    for _ in 0..config.steps {
        sim.step();
        let step = sim.step_count();
        let record = compute_metrics(step, sim.lattice(), &sim.state().potentials);

        let update = track_components(&tracks, sim.lattice(), step, &mut next_id);
        for t in &update.tracks {
            if t.birth_step == step && step > 1 {
                replication.births.push(Birth {
                    id: t.id,
                    step,
                    parent: t.parent,
                });
            }
            let p = replication.persistence.entry(t.id).or_default();
            *p = (*p).max(t.persistence);
        }
        tracks = update.tracks;
        replication.counts.push(record.components);

        if let Some(r) = regen.as_mut() {
            if r.status == RegenStatus::NotRecovered {
                if record.area == 0 {
                    r.status = RegenStatus::Extinct;
                } else if let Some(ri) = recovery_index(r.v_pre, r.v_post, record.dispersion) {
                    r.ri.push((step, ri));
                    if ri >= RECOVERY_THRESHOLD {
                        r.status = RegenStatus::Recovered { step };
                    }
                }
            } else if matches!(r.status, RegenStatus::Recovered { .. }) {
                if let Some(ri) = recovery_index(r.v_pre, r.v_post, record.dispersion) {
                    r.ri.push((step, ri));
                }
            }
        }
        let v_pre = record.dispersion;
        metrics.push(record);
        if config.snapshot_every > 0 && step % config.snapshot_every == 0 {
            snapshots.push(Snapshot::capture(sim.state(), hash));
        }

        if let Some(a) = config.amputation.as_ref().filter(|a| a.step == step) {
            let removed = sim.amputate_rows(a.rows.clone())?;
            let v_post = dispersion(sim.lattice());
            let status = if sim.lattice().active_count() == 0 {
                RegenStatus::Extinct
            } else if v_pre == v_post {
                RegenStatus::Degenerate
            } else {
                RegenStatus::NotRecovered
            };
            let ri = if status == RegenStatus::NotRecovered {
                vec![(step, 0.0)]
            } else {
                Vec::new()
            };
            regen = Some(RegenReport {
                cut_step: step,
                removed,
                v_pre,
                v_post,
                ri,
                status,
            });
            // Tracks keep only their surviving cells; the next update re-labels.
            for t in &mut tracks {
                t.cells.retain(|&c| sim.lattice().is_active_at(c));
            }
            tracks.retain(|t| !t.cells.is_empty());
            if config.snapshot_every > 0 {
                snapshots.push(Snapshot::capture(sim.state(), hash));
            }
        }
    }

    let regime = classify(&metrics, cells, &config.classify);
    Ok(RunResult {
        metrics,
        snapshots,
        regime,
        regeneration: regen,
        replication,
    })
}

/// Runs an amputation experiment and reports its recovery.
///
/// Fails if `config` has no amputation or the cut leaves dispersion unchanged.
pub fn regeneration_experiment(config: &ScenarioConfig) -> Result<RegenReport> {
    if config.amputation.is_none() {
        return Err(Error::Scenario(
            "regeneration experiment needs cut_step and cut_rows".into(),
        ));
    }
    let report = run(config)?.regeneration.expect("amputation configured");
    if report.status == RegenStatus::Degenerate {
        return Err(Error::Scenario(format!(
            "cut at step {} left dispersion unchanged ({} cells removed)",
            report.cut_step, report.removed
        )));
    }
    Ok(report)
}

/// Component report of a finished run.
pub fn replication_monitor(result: &RunResult) -> &ReplicationReport {
    &result.replication
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// `(key, value)` per axis, in axis order.
    pub values: Vec<(String, f64)>,
    pub seed: u64,
    /// Metrics at the checkpoint step.
    pub record: MetricsRecord,
    pub regime: Regime,
}

/// Parameter combinations of `axes` in row-major order, last axis fastest.
pub fn sweep_points(axes: &[SweepAxis]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

/// Configuration of sweep cell `index` at `point`: parameter values set,
/// seed derived from the base seed and the index, run up to the checkpoint.
pub fn sweep_cell_config(
    base: &ScenarioConfig,
    index: usize,
    point: &[(String, f64)],
) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    cfg.sweep.clear();
    for (k, v) in point {
        cfg.set_numeric(k, *v)?;
    }
    cfg.seed = derive_seed(base.seed, index as u64);
    cfg.steps = base.checkpoint;
    cfg.snapshot_every = 0;
    if cfg.amputation.as_ref().is_some_and(|a| a.step >= cfg.steps) {
        cfg.amputation = None;
    }
    Ok(cfg)
}

/// Runs every combination of `axes` in parallel and measures each at the
/// checkpoint. Cells are independent: re-running one with
/// [`sweep_cell_config`] reproduces it exactly.
pub fn sweep(base: &ScenarioConfig, axes: &[SweepAxis]) -> Result<Vec<SweepCell>> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(Error::Scenario(
            "sweep needs at least one non-empty axis".into(),
        ));
    }
    if base.checkpoint < 1 {
        return Err(Error::param("checkpoint", "checkpoint must be >= 1"));
    }
    let size = axes
        .iter()
        .try_fold(1usize, |n, a| n.checked_mul(a.values.len()))
        .unwrap_or(usize::MAX);
    if size > base.sweep_cap {
        return Err(Error::Scenario(format!(
            "sweep has {size} cells, more than sweep_cap = {}",
            base.sweep_cap
        )));
    }
    let configs = sweep_points(axes)
        .into_iter()
        .enumerate()
        .map(|(i, p)| sweep_cell_config(base, i, &p).map(|c| (p, c)))
        .collect::<Result<Vec<_>>>()?;
    for (_, c) in &configs {
        c.validate()?;
    }
    configs
        .into_par_iter()
        .map(|(values, cfg)| {
            let r = run(&cfg)?;
            Ok(SweepCell {
                values,
                seed: cfg.seed,
                record: r.metrics.last().cloned().expect("checkpoint >= 1"),
                regime: r.regime,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: u64, area: usize, perimeter: usize) -> MetricsRecord {
        MetricsRecord {
            area,
            perimeter,
            circularity: crate::metrics::circularity(area, perimeter),
            ..MetricsRecord::empty(step)
        }
    }

    fn history(areas: impl Fn(u64) -> (usize, usize)) -> Vec<MetricsRecord> {
        (1..=400)
            .map(|s| {
                let (a, p) = areas(s);
                rec(s, a, p)
            })
            .collect()
    }

    #[test]
    fn classify_examples() {
        let t = ClassifyThresholds::default();
        assert_eq!(classify(&[rec(1, 0, 0)], 22500, &t), Regime::Extinct);
        assert_eq!(
            classify(&history(|s| (1000 - s as usize, 300)), 22500, &t),
            Regime::Unclassified
        );
        let limb = history(|s| (494 + s as usize, 353));
        assert_eq!(limb.last().unwrap().area, 894);
        assert_eq!(classify(&limb, 22500, &t), Regime::LimbExtension);
        assert_eq!(
            classify(&history(|_| (22465, 56)), 22500, &t),
            Regime::FullExpansion
        );
        assert_eq!(
            classify(&history(|_| (46, 24)), 22500, &t),
            Regime::SmallFixedCluster
        );
        assert_eq!(
            classify(&history(|_| (1006, 395)), 22500, &t),
            Regime::StationaryForm
        );
        assert_eq!(
            classify(&history(|s| (5000 + s as usize, 1000)), 22500, &t),
            Regime::MeshExpansion
        );
        assert_eq!(
            classify(
                &history(|_| (100, 50))
                    .into_iter()
                    .take(40)
                    .collect::<Vec<_>>(),
                22500,
                &t
            ),
            Regime::Unclassified
        );
    }

    #[test]
    fn run_records_every_step() {
        let cfg = ScenarioConfig {
            steps: 12,
            snapshot_every: 5,
            width: 40,
            height: 40,
            radius: 6.0,
            ..Default::default()
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.metrics.len(), 12);
        assert_eq!(
            r.metrics.iter().map(|m| m.step).collect::<Vec<_>>(),
            (1..=12).collect::<Vec<_>>()
        );
        assert_eq!(
            r.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(),
            vec![0, 5, 10]
        );
        assert_eq!(r.replication.counts.len(), 12);
        assert_eq!(run(&cfg).unwrap(), r);
    }

    #[test]
    fn one_step_from_nothing() {
        let cfg = ScenarioConfig {
            steps: 1,
            radius: 0.0,
            width: 10,
            height: 10,
            ..Default::default()
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.metrics, vec![MetricsRecord::empty(1)]);
        assert_eq!(r.regime, Regime::Extinct);
        assert_eq!(r.replication.counts, vec![0]);
        let zero = ScenarioConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(run(&zero).is_err());
    }

    #[test]
    fn degenerate_cut_is_rejected() {
        let mut cfg = ScenarioConfig {
            steps: 20,
            width: 40,
            height: 40,
            radius: 5.0,
            ..Default::default()
        };
        cfg.amputation = Some(Amputation {
            step: 5,
            rows: 0..2,
        });
        let err = regeneration_experiment(&cfg).unwrap_err();
        assert!(err.to_string().contains("unchanged"), "{err}");
        cfg.amputation = Some(Amputation {
            step: 5,
            rows: 0..40,
        });
        assert_eq!(
            regeneration_experiment(&cfg).unwrap().status,
            RegenStatus::Extinct
        );
    }

    #[test]
    fn cut_starts_ri_at_zero() {
        let mut cfg = ScenarioConfig {
            steps: 30,
            width: 60,
            height: 60,
            radius: 10.0,
            ..Default::default()
        };
        cfg.amputation = Some(Amputation {
            step: 10,
            rows: 0..30,
        });
        let r = regeneration_experiment(&cfg).unwrap();
        assert!(r.removed > 0);
        assert_eq!(r.ri[0], (10, 0.0));
        assert!(r.ri.windows(2).all(|w| w[1].0 == w[0].0 + 1));
    }

    #[test]
    fn sweep_points_and_cap() {
        let axes = vec![
            SweepAxis {
                key: "G".into(),
                values: vec![1.3, 1.4],
            },
            SweepAxis {
                key: "w".into(),
                values: vec![0.46, 0.47, 0.48],
            },
        ];
        let pts = sweep_points(&axes);
        assert_eq!(pts.len(), 6);
        assert_eq!(
            pts[1],
            vec![("G".to_string(), 1.3), ("w".to_string(), 0.47)]
        );
        let base = ScenarioConfig {
            sweep_cap: 5,
            ..Default::default()
        };
        let err = sweep(&base, &axes).unwrap_err().to_string();
        assert!(err.contains("6 cells"), "{err}");
        assert!(sweep(&base, &[]).is_err());
    }

    #[test]
    fn sweep_cell_reproduces_with_its_config() {
        let base = ScenarioConfig {
            width: 40,
            height: 40,
            radius: 6.0,
            checkpoint: 15,
            ..Default::default()
        };
        let axes = vec![SweepAxis {
            key: "G".into(),
            values: vec![1.35, 1.45],
        }];
        let table = sweep(&base, &axes).unwrap();
        assert_eq!(table.len(), 2);
        for (i, cell) in table.iter().enumerate() {
            let cfg = sweep_cell_config(&base, i, &cell.values).unwrap();
            assert_eq!(cfg.params.morph.g, cell.values[0].1);
            let r = run(&cfg).unwrap();
            assert_eq!(r.metrics.last(), Some(&cell.record));
            assert_eq!(r.regime, cell.regime);
        }
        assert_ne!(table[0].seed, table[1].seed);
    }
}
