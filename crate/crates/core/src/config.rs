//! Scenario configuration and its flat `key = value` text form.
//!
//! One assignment per line, or several per line separated by commas. `#`
//! starts a comment. Keys are case-insensitive. Example:
//!
//! ```text
//! # limb regime, cut at step 200
//! w = 0.47, G = 1.42, R = 1.2
//! steps = 600
//! cut_step = 200
//! cut_rows = 0..64
//! sweep.G = 1.30:2.00:0.05
//! ```
//!
//! Sweep axes take either a list (`1.5, 1.75, 2.0`) or an inclusive
//! `start:stop:step` range. `cut_rows = a..b` includes both ends.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{init_disk, CellCoord, Lattice};
use crate::params::ModelParams;

/// Scalar keys accepted by [`ScenarioConfig::set`], in canonical spelling.
pub const KEYS: &[&str] = &[
    "width",
    "height",
    "radius",
    "seed",
    "steps",
    "snapshot_every",
    "Z",
    "X",
    "Y",
    "w",
    "k",
    "G",
    "R",
    "Ro",
    "scope",
    "death_scope",
    "cut_step",
    "cut_rows",
    "checkpoint",
    "sweep_cap",
    "classify.small_area",
    "classify.window",
    "classify.full_fraction",
    "classify.limb_circularity",
    "classify.limb_ratio_min",
    "classify.limb_ratio_max",
];

/// Model parameter keys, the ones a sweep axis or a live update may touch.
pub const PARAM_KEYS: &[&str] = &[
    "Z",
    "X",
    "Y",
    "w",
    "k",
    "G",
    "R",
    "Ro",
    "scope",
    "death_scope",
];

/// Row band removed at one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amputation {
    pub step: u64,
    /// Half-open row range.
    pub rows: Range<usize>,
}

/// Thresholds of the regime classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    /// Areas below this count as a small cluster.
    pub small_area: usize,
    /// Steps of history compared for "unchanged" and "growing".
    pub window: usize,
    /// Area fraction of the lattice counted as full expansion.
    pub full_fraction: f64,
    pub limb_circularity: f64,
    pub limb_ratio_min: f64,
    pub limb_ratio_max: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            small_area: 200,
            window: 50,
            full_fraction: 0.8,
            limb_circularity: 0.2,
            limb_ratio_min: 2.0,
            limb_ratio_max: 3.5,
        }
    }
}

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub width: usize,
    pub height: usize,
    pub radius: f64,
    pub params: ModelParams,
    pub seed: u64,
    pub steps: u64,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: u64,
    pub amputation: Option<Amputation>,
    pub sweep: Vec<SweepAxis>,
    /// Step at which sweep cells are measured and classified.
    pub checkpoint: u64,
    /// Largest accepted sweep product.
    pub sweep_cap: usize,
    pub classify: ClassifyThresholds,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            width: 150,
            height: 150,
            radius: 20.0,
            params: ModelParams::default(),
            seed: 1,
            steps: 400,
            snapshot_every: 0,
            amputation: None,
            sweep: Vec::new(),
            checkpoint: 400,
            sweep_cap: 10_000,
            classify: ClassifyThresholds::default(),
        }
    }
}

fn canonical(key: &str) -> Option<&'static str> {
    let lower = key.trim().to_ascii_lowercase();
    let alias = match lower.as_str() {
        "r_surv" => "r",
        "r_over" => "ro",
        "growth_scope" => "scope",
        other => other,
    };
    KEYS.iter()
        .copied()
        .find(|k| k.to_ascii_lowercase() == alias)
}

fn unknown(key: &str) -> Error {
    Error::UnknownKey {
        key: key.to_string(),
        valid: KEYS.join(", ") + ", sweep.<param>",
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(key, format!("cannot parse `{}`", value.trim())))
}

fn parse_rows(key: &str, value: &str) -> Result<Range<usize>> {
    let (a, b) = value
        .split_once("..")
        .ok_or_else(|| Error::param(key, format!("expected `first..last`, got `{value}`")))?;
    let b = b.trim().trim_start_matches('=');
    let (a, b): (usize, usize) = (num(key, a)?, num(key, b)?);
    if b < a {
        return Err(Error::param(key, format!("empty row range {a}..{b}")));
    }
    Ok(a..b + 1)
}

fn parse_axis_values(key: &str, value: &str) -> Result<Vec<f64>> {
    let value = value.trim();
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step): (f64, f64, f64) = (
            num(key, parts[0])?,
            num(key, parts[1])?,
            num(key, parts[2])?,
        );
        if !(step > 0.0) || stop < start {
            return Err(Error::param(key, format!("bad range `{value}`")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Round to the step's precision so 1.30 + 4 * 0.05 prints as 1.5.
        return Ok((0..=n).map(|i| round12(start + i as f64 * step)).collect());
    }
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<Vec<f64>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(Error::param(key, "sweep axis has no values"))
            } else {
                Ok(v)
            }
        })
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl ScenarioConfig {
    /// Assigns one key. The result is not validated; call [`Self::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(param) = key.trim().strip_prefix("sweep.") {
            let name = canonical(param)
                .filter(|k| PARAM_KEYS.contains(k) && !k.ends_with("scope"))
                .ok_or_else(|| unknown(key))?;
            let values = parse_axis_values(key, value)?;
            self.sweep.retain(|a| a.key != name);
            self.sweep.push(SweepAxis {
                key: name.to_string(),
                values,
            });
            return Ok(());
        }
        let name = canonical(key).ok_or_else(|| unknown(key))?;
        let v = value.trim();
        let p = &mut self.params;
        match name {
            "width" => self.width = num(name, v)?,
            "height" => self.height = num(name, v)?,
            "radius" => self.radius = num(name, v)?,
            "seed" => self.seed = num(name, v)?,
            "steps" => self.steps = num(name, v)?,
            "snapshot_every" => self.snapshot_every = num(name, v)?,
            "Z" => p.propagation.z = num(name, v)?,
            "X" => p.propagation.x = num(name, v)?,
            "Y" => p.propagation.y = num(name, v)?,
            "w" => p.propagation.w = num(name, v)?,
            "k" => p.propagation.k = num(name, v)?,
            "G" => p.morph.g = num(name, v)?,
            "R" => p.morph.r_surv = num(name, v)?,
            "Ro" => p.morph.r_over = num(name, v)?,
            "scope" => p.morph.scope = v.parse()?,
            "death_scope" => p.morph.death_scope = v.parse()?,
            "cut_step" => {
                let step = num(name, v)?;
                let rows = self.amputation.take().map_or(0..0, |a| a.rows);
                self.amputation = Some(Amputation { step, rows });
            }
            "cut_rows" => {
                let rows = parse_rows(name, v)?;
                let step = self.amputation.take().map_or(0, |a| a.step);
                self.amputation = Some(Amputation { step, rows });
            }
            "checkpoint" => self.checkpoint = num(name, v)?,
            "sweep_cap" => self.sweep_cap = num(name, v)?,
            "classify.small_area" => self.classify.small_area = num(name, v)?,
            "classify.window" => self.classify.window = num(name, v)?,
            "classify.full_fraction" => self.classify.full_fraction = num(name, v)?,
            "classify.limb_circularity" => self.classify.limb_circularity = num(name, v)?,
            "classify.limb_ratio_min" => self.classify.limb_ratio_min = num(name, v)?,
            "classify.limb_ratio_max" => self.classify.limb_ratio_max = num(name, v)?,
            _ => unreachable!("key list and setter out of sync: {name}"),
        }
        Ok(())
    }

    /// Assigns a numeric value to a model parameter, as a sweep axis does.
    pub fn set_numeric(&mut self, key: &str, value: f64) -> Result<()> {
        let name = canonical(key).ok_or_else(|| unknown(key))?;
        if matches!(name, "Z" | "X" | "Y") {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::param(
                    name,
                    format!("expected a non-negative integer, got {value}"),
                ));
            }
            return self.set(name, &format!("{}", value as u64));
        }
        self.set(name, &format!("{value}"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::param("steps", "steps must be >= 1"));
        }
        if !(self.radius >= 0.0) {
            return Err(Error::param(
                "radius",
                format!("radius must be >= 0, got {}", self.radius),
            ));
        }
        self.params.validate()?;
        // Lattice dimensions and radius are checked by building the disk.
        self.initial_lattice()?;
        if let Some(a) = &self.amputation {
            if a.step >= self.steps {
                return Err(Error::param(
                    "cut_step",
                    format!("amputation step {} must be < steps {}", a.step, self.steps),
                ));
            }
            if a.rows.is_empty() || a.rows.end > self.height {
                return Err(Error::param(
                    "cut_rows",
                    format!("row range {:?} outside 0..{}", a.rows, self.height),
                ));
            }
        }
        for axis in &self.sweep {
            let mut probe = self.clone();
            for &v in &axis.values {
                probe.set_numeric(&axis.key, v)?;
            }
        }
        Ok(())
    }

    /// Disk of `radius` centred at (height/2, width/2). Radius 0 gives an
    /// empty lattice.
    pub fn initial_lattice(&self) -> Result<Lattice> {
        if self.radius == 0.0 {
            return Lattice::new(self.width, self.height);
        }
        init_disk(
            self.width,
            self.height,
            CellCoord::new(self.height / 2, self.width / 2),
            self.radius,
        )
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = format!(
            "width = {}\nheight = {}\nradius = {}\nseed = {}\nsteps = {}\nsnapshot_every = {}\n\
             Z = {}\nX = {}\nY = {}\nw = {}\nk = {}\nG = {}\nR = {}\nRo = {}\nscope = {}\ndeath_scope = {}\n",
            self.width,
            self.height,
            self.radius,
            self.seed,
            self.steps,
            self.snapshot_every,
            p.propagation.z,
            p.propagation.x,
            p.propagation.y,
            p.propagation.w,
            p.propagation.k,
            p.morph.g,
            p.morph.r_surv,
            p.morph.r_over,
            p.morph.scope,
            p.morph.death_scope,
        );
        if let Some(a) = &self.amputation {
            s += &format!(
                "cut_step = {}\ncut_rows = {}..{}\n",
                a.step,
                a.rows.start,
                a.rows.end - 1
            );
        }
        let c = &self.classify;
        s += &format!(
            "checkpoint = {}\nsweep_cap = {}\nclassify.small_area = {}\nclassify.window = {}\n\
             classify.full_fraction = {}\nclassify.limb_circularity = {}\n\
             classify.limb_ratio_min = {}\nclassify.limb_ratio_max = {}\n",
            self.checkpoint,
            self.sweep_cap,
            c.small_area,
            c.window,
            c.full_fraction,
            c.limb_circularity,
            c.limb_ratio_min,
            c.limb_ratio_max,
        );
        for axis in &self.sweep {
            let vals: Vec<String> = axis.values.iter().map(|v| v.to_string()).collect();
            s += &format!("sweep.{} = {}\n", axis.key, vals.join(", "));
        }
        s
    }

    /// FNV-1a hash of [`Self::to_text`], recorded in snapshots.
    pub fn hash(&self) -> u64 {
        self.to_text().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

/// Parses a config, filling unspecified keys with defaults, and validates it.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    apply_overrides(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies the assignments in `text` to `cfg` without validating.
pub fn apply_overrides(cfg: &mut ScenarioConfig, text: &str) -> Result<()> {
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for (key, value) in assignments(line).map_err(|reason| Error::Parse {
            line: n + 1,
            reason,
        })? {
            cfg.set(&key, &value).map_err(|e| match e {
                Error::Parse { reason, .. } => Error::Parse {
                    line: n + 1,
                    reason,
                },
                other => other,
            })?;
        }
    }
    Ok(())
}

/// Splits one line into assignments. A comma-separated fragment without `=`
/// continues the previous value, which is how list values are written.
fn assignments(line: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for frag in line.split(',') {
        match frag.split_once('=') {
            Some((k, v)) if !k.contains("..") => {
                let k = k.trim();
                if k.is_empty() {
                    return Err(format!("missing key before `=` in `{}`", frag.trim()));
                }
                out.push((k.to_string(), v.trim().to_string()));
            }
            _ if frag.trim().is_empty() => {}
            _ => match out.last_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(frag.trim());
                }
                None => return Err(format!("expected `key = value`, got `{}`", frag.trim())),
            },
        }
    }
    Ok(out)
}
