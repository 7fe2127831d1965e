use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;
use tokenmorph::config::ScenarioConfig;
use tokenmorph::io::write_metrics_csv;
use tokenmorph::scenario::{RegenReport, RunResult, SweepCell};

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn summary(cfg: &ScenarioConfig, result: &RunResult) -> serde_json::Value {
    let rep = &result.replication;
    json!({
        "config_hash": format!("{:016x}", cfg.hash()),
        "seed": cfg.seed,
        "steps": cfg.steps,
        "final": result.metrics.last(),
        "regime": result.regime,
        "regeneration": result.regeneration.as_ref().map(|r| json!({
            "cut_step": r.cut_step,
            "removed": r.removed,
            "v_pre": r.v_pre,
            "v_post": r.v_post,
            "status": r.status,
            "steps_to_recover": r.steps_to_recover(),
        })),
        "components": {
            "max_count": rep.max_count(),
            "births": rep.births,
            "max_birth_persistence": rep.max_birth_persistence(),
        },
    })
}

/// `metrics.csv`, `result.json`, `config.txt` and `snapshots/`.
pub fn write_run(out: &Path, cfg: &ScenarioConfig, result: &RunResult) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("metrics.csv"), write_metrics_csv(&result.metrics))?;
    write(&out.join("config.txt"), cfg.to_text())?;
    write(
        &out.join("result.json"),
        serde_json::to_string_pretty(&summary(cfg, result))? + "\n",
    )?;
    if !result.snapshots.is_empty() {
        let dir = out.join("snapshots");
        fs::create_dir_all(&dir)?;
        for (i, snap) in result.snapshots.iter().enumerate() {
            // An amputation step has a pre-cut and a post-cut snapshot; the
            // latter gets a suffix.
            let dup = i > 0 && result.snapshots[i - 1].step == snap.step;
            let stem = format!("step_{:06}{}", snap.step, if dup { "_cut" } else { "" });
            write(&dir.join(format!("{stem}.txt")), snap.encode())?;
            write(&dir.join(format!("{stem}.pgm")), snap.to_pgm())?;
        }
    }
    Ok(())
}

pub fn write_ri(out: &Path, report: &RegenReport) -> Result<()> {
    let mut s = String::from("step,ri\n");
    for (step, ri) in &report.ri {
        let _ = writeln!(s, "{step},{ri}");
    }
    write(&out.join("ri.csv"), s)
}

pub fn write_components(out: &Path, result: &RunResult) -> Result<()> {
    let mut s = String::from("step,components\n");
    for (r, n) in result.metrics.iter().zip(&result.replication.counts) {
        let _ = writeln!(s, "{},{n}", r.step);
    }
    write(&out.join("components.csv"), s)
}

/// `sweep.csv` (one row per cell) and `result.json`.
pub fn write_sweep(out: &Path, cfg: &ScenarioConfig, table: &[SweepCell]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let keys: Vec<&str> = cfg.sweep.iter().map(|a| a.key.as_str()).collect();
    let metrics = write_metrics_csv(&table.iter().map(|c| c.record.clone()).collect::<Vec<_>>());
    let mut lines = metrics.lines();
    let mut s = format!(
        "{},seed,regime,{}\n",
        keys.join(","),
        lines.next().unwrap_or_default()
    );
    for (cell, row) in table.iter().zip(lines) {
        let vals: Vec<String> = cell.values.iter().map(|(_, v)| v.to_string()).collect();
        let _ = writeln!(s, "{},{},{},{row}", vals.join(","), cell.seed, cell.regime);
    }
    write(&out.join("sweep.csv"), s)?;
    write(&out.join("config.txt"), cfg.to_text())?;
    let doc = json!({
        "config_hash": format!("{:016x}", cfg.hash()),
        "checkpoint": cfg.checkpoint,
        "cells": table,
    });
    write(
        &out.join("result.json"),
        serde_json::to_string_pretty(&doc)? + "\n",
    )
}
