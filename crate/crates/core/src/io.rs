//! Metrics CSV, text snapshots and PGM rasters.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CellState, Lattice};
use crate::metrics::MetricsRecord;
use crate::morph::SimState;
use crate::tokens::PotentialMap;

/// Frozen column order of the metrics CSV.
pub const CSV_HEADER: &str =
    "step,area,perimeter,circularity,dispersion,p_min,p_max,p_avg,components";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One header line plus one line per record. Undefined values are empty
/// fields; reals use Rust's shortest round-trip formatting.
pub fn write_metrics_csv(series: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (series.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in series {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            r.area,
            r.perimeter,
            opt(r.circularity),
            r.dispersion,
            opt(r.p_min),
            opt(r.p_max),
            opt(r.p_avg),
            r.components
        );
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Parse {
            line: n + 1,
            reason,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {}", f.len())));
        }
        fn req<T: std::str::FromStr>(s: &str, n: usize) -> Result<T> {
            s.parse().map_err(|_| Error::Parse {
                line: n,
                reason: format!("bad number `{s}`"),
            })
        }
        let optf = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                req(s, n + 1).map(Some)
            }
        };
        out.push(MetricsRecord {
            step: req(f[0], n + 1)?,
            area: req(f[1], n + 1)?,
            perimeter: req(f[2], n + 1)?,
            circularity: optf(f[3])?,
            dispersion: req(f[4], n + 1)?,
            p_min: optf(f[5])?,
            p_max: optf(f[6])?,
            p_avg: optf(f[7])?,
            components: req(f[8], n + 1)?,
        });
    }
    Ok(out)
}

/// Lattice states plus potentials of active cells at one step.
///
/// Potentials are stored in row-major order of the active cells and quantised
/// to three decimals when encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub config_hash: u64,
    pub lattice: Lattice,
    pub potentials: Vec<Option<f64>>,
}

const MAGIC: &str = "tokenmorph-snapshot 1";

impl Snapshot {
    pub fn capture(state: &SimState, config_hash: u64) -> Self {
        Self {
            step: state.step,
            config_hash,
            potentials: state
                .lattice
                .active_indices()
                .map(|i| state.potentials.get(i))
                .collect(),
            lattice: state.lattice.clone(),
        }
    }

    /// Potentials spread back onto the lattice.
    pub fn potential_map(&self) -> PotentialMap {
        let mut values = vec![None; self.lattice.len()];
        for (i, p) in self.lattice.active_indices().zip(&self.potentials) {
            values[i] = *p;
        }
        PotentialMap::from_values(values)
    }

    /// Run-length encoding of the states, e.g. `0×70 1×3 0×27`.
    pub fn cells_rle(&self) -> String {
        rle_encode(self.lattice.states())
    }

    /// Text form:
    ///
    /// ```text
    /// tokenmorph-snapshot 1
    /// step 200
    /// config 00c0ffee00c0ffee
    /// size 150 150
    /// cells 0×11175 1×3 0×147 ...
    /// potentials 1.403 1.377 - ...
    /// ```
    ///
    /// `size` is width then height. `-` marks an undefined potential.
    pub fn encode(&self) -> String {
        let mut s = format!(
            "{MAGIC}\nstep {}\nconfig {:016x}\nsize {} {}\ncells {}\npotentials",
            self.step,
            self.config_hash,
            self.lattice.width(),
            self.lattice.height(),
            self.cells_rle()
        );
        for p in &self.potentials {
            match p {
                Some(v) => {
                    let _ = write!(s, " {}", quantize(*v));
                }
                None => s.push_str(" -"),
            }
        }
        s.push('\n');
        s
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |want: &str| -> Result<(usize, String)> {
            let (n, l) = lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count() + 1,
                reason: format!("missing `{want}` line"),
            })?;
            let l = l.trim();
            if want == MAGIC {
                return if l == MAGIC {
                    Ok((n + 1, String::new()))
                } else {
                    Err(Error::Parse {
                        line: n + 1,
                        reason: format!("expected `{MAGIC}`"),
                    })
                };
            }
            match l
                .split_once(' ')
                .map(|(k, v)| (k, v.trim()))
                .or((l == want).then_some((l, "")))
            {
                Some((k, v)) if k == want => Ok((n + 1, v.to_string())),
                _ => Err(Error::Parse {
                    line: n + 1,
                    reason: format!("expected `{want}` line"),
                }),
            }
        };
        next(MAGIC)?;
        let (ln, v) = next("step")?;
        let step = v.parse().map_err(|_| Error::Parse {
            line: ln,
            reason: format!("bad step `{v}`"),
        })?;
        let (ln, v) = next("config")?;
        let config_hash = u64::from_str_radix(&v, 16).map_err(|_| Error::Parse {
            line: ln,
            reason: format!("bad config hash `{v}`"),
        })?;
        let (ln, v) = next("size")?;
        let dims: Vec<usize> = v
            .split_whitespace()
            .filter_map(|x| x.parse().ok())
            .collect();
        let [width, height] = dims[..] else {
            return Err(Error::Parse {
                line: ln,
                reason: format!("bad size `{v}`"),
            });
        };
        let (ln, v) = next("cells")?;
        let states =
            rle_decode(&v, width * height).map_err(|reason| Error::Parse { line: ln, reason })?;
        let lattice = Lattice::from_states(width, height, states).map_err(|e| Error::Parse {
            line: ln,
            reason: e.to_string(),
        })?;
        let (ln, v) = next("potentials")?;
        let potentials = v
            .split_whitespace()
            .map(|t| match t {
                "-" => Ok(None),
                t => t.parse().map(Some).map_err(|_| Error::Parse {
                    line: ln,
                    reason: format!("bad potential `{t}`"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if potentials.len() != lattice.active_count() {
            return Err(Error::Parse {
                line: ln,
                reason: format!(
                    "{} potentials for {} active cells",
                    potentials.len(),
                    lattice.active_count()
                ),
            });
        }
        Ok(Self {
            step,
            config_hash,
            lattice,
            potentials,
        })
    }

    /// Binary PGM (P5), one pixel per cell in row-major order. Empty cells
    /// are black; active cells range from 64 (lowest potential in the frame)
    /// to 255 (highest).
    pub fn to_pgm(&self) -> Vec<u8> {
        let (w, h) = (self.lattice.width(), self.lattice.height());
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        let defined = self.potentials.iter().flatten();
        let lo = defined.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = defined.copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pots = self.potentials.iter();
        for s in self.lattice.states() {
            let px = match s {
                CellState::Empty => 0,
                CellState::Active => match pots.next().copied().flatten() {
                    Some(p) if hi > lo => 64 + ((p - lo) / (hi - lo) * 191.0).round() as u8,
                    _ => 160,
                },
            };
            out.push(px);
        }
        out
    }
}

fn quantize(v: f64) -> f64 {
    let q = (v * 1000.0).round() / 1000.0;
    // Avoid printing "-0".
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

fn rle_encode(states: &[CellState]) -> String {
    let mut runs: Vec<String> = Vec::new();
    let mut iter = states.iter().peekable();
    while let Some(&s) = iter.next() {
        let mut n = 1;
        while iter.peek() == Some(&&s) {
            iter.next();
            n += 1;
        }
        runs.push(format!("{}×{}", s.is_active() as u8, n));
    }
    runs.join(" ")
}

fn rle_decode(text: &str, expected: usize) -> std::result::Result<Vec<CellState>, String> {
    let mut out = Vec::with_capacity(expected);
    for tok in text.split_whitespace() {
        let (s, n) = tok
            .split_once('×')
            .or_else(|| tok.split_once('x'))
            .ok_or_else(|| format!("bad run `{tok}`"))?;
        let state = match s {
            "0" => CellState::Empty,
            "1" => CellState::Active,
            _ => return Err(format!("bad state in run `{tok}`")),
        };
        let n: usize = n
            .parse()
            .map_err(|_| format!("bad length in run `{tok}`"))?;
        if n == 0 || out.len() + n > expected {
            return Err(format!("run `{tok}` does not fit {expected} cells"));
        }
        out.extend(std::iter::repeat_n(state, n));
    }
    if out.len() != expected {
        return Err(format!("runs cover {} of {expected} cells", out.len()));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct SnapshotWire {
    step: u64,
    config_hash: String,
    width: usize,
    height: usize,
    cells: String,
    potentials: Vec<Option<f64>>,
}

impl Serialize for Snapshot {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SnapshotWire {
            step: self.step,
            config_hash: format!("{:016x}", self.config_hash),
            width: self.lattice.width(),
            height: self.lattice.height(),
            cells: self.cells_rle(),
            potentials: self.potentials.iter().map(|p| p.map(quantize)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Snapshot {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = SnapshotWire::deserialize(d)?;
        let states = rle_decode(&w.cells, w.width * w.height).map_err(D::Error::custom)?;
        let lattice = Lattice::from_states(w.width, w.height, states).map_err(D::Error::custom)?;
        if w.potentials.len() != lattice.active_count() {
            return Err(D::Error::custom(
                "potential count does not match active cells",
            ));
        }
        Ok(Self {
            step: w.step,
            config_hash: u64::from_str_radix(&w.config_hash, 16).map_err(D::Error::custom)?,
            lattice,
            potentials: w.potentials,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{init_disk, CellCoord};
    use crate::metrics::compute_metrics;
    use crate::morph::Simulation;
    use crate::params::ModelParams;

    fn record(step: u64) -> MetricsRecord {
        MetricsRecord {
            step,
            area: 46,
            perimeter: 24,
            circularity: Some(1.0035),
            dispersion: 3.25,
            p_min: Some(-0.1),
            p_max: Some(1.9),
            p_avg: Some(1.0 / 3.0),
            components: 1,
        }
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let one = write_metrics_csv(&[record(0)]);
        assert_eq!(one.lines().count(), 2);
        assert_eq!(one.lines().next(), Some(CSV_HEADER));
        let empty = MetricsRecord::empty(3);
        let text = write_metrics_csv(&[record(0), empty.clone()]);
        assert_eq!(text.lines().nth(2), Some("3,0,0,,0,,,,0"));
        assert_eq!(parse_metrics_csv(&text).unwrap(), vec![record(0), empty]);
        assert!(matches!(
            parse_metrics_csv("step\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(matches!(
            parse_metrics_csv(&bad),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn all_empty_is_one_run() {
        let l = Lattice::new(150, 150).unwrap();
        let snap = Snapshot {
            step: 0,
            config_hash: 1,
            potentials: vec![],
            lattice: l,
        };
        assert_eq!(snap.cells_rle(), "0×22500");
        assert_eq!(Snapshot::decode(&snap.encode()).unwrap(), snap);
    }

    #[test]
    fn half_radius_disk_is_one_active_run() {
        let l = init_disk(20, 20, CellCoord::new(10, 10), 0.5).unwrap();
        let runs: Vec<String> = Snapshot {
            step: 0,
            config_hash: 0,
            potentials: vec![None],
            lattice: l,
        }
        .cells_rle()
        .split(' ')
        .map(String::from)
        .collect();
        assert_eq!(runs, ["0×210", "1×1", "0×189"]);
    }

    #[test]
    fn snapshot_round_trip_quantizes_potentials() {
        let l = init_disk(40, 40, CellCoord::new(20, 20), 6.0).unwrap();
        let mut sim = Simulation::new(ModelParams::default(), l, 5).unwrap();
        sim.run(3);
        let snap = Snapshot::capture(sim.state(), 0xdead_beef);
        let back = Snapshot::decode(&snap.encode()).unwrap();
        assert_eq!(back.lattice, snap.lattice);
        assert_eq!((back.step, back.config_hash), (3, 0xdead_beef));
        for (a, b) in snap.potentials.iter().zip(&back.potentials) {
            assert!((a.unwrap() - b.unwrap()).abs() <= 5e-4);
        }
        let json = serde_json::to_string(&snap).unwrap();
        let from_json: Snapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(from_json.lattice, snap.lattice);
        let m = compute_metrics(3, &back.lattice, &back.potential_map());
        assert_eq!(m.area, snap.lattice.active_count());
    }

    #[test]
    fn decode_errors_carry_line_numbers() {
        let good = Snapshot {
            step: 0,
            config_hash: 0,
            potentials: vec![],
            lattice: Lattice::new(4, 4).unwrap(),
        }
        .encode();
        let cases = [
            (good.replace("step 0", "step x"), 2),
            (good.replace("0×16", "0×15"), 5),
            (good.replace("0×16", "2×16"), 5),
            (good.replace("size 4 4", "size 4"), 4),
            (good.replace("potentials", "potentials 1.0"), 6),
            ("garbage".to_string(), 1),
        ];
        for (text, line) in cases {
            match Snapshot::decode(&text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn pgm_layout() {
        let l = Lattice::from_fn(4, 4, |c| c.row == 1 && c.col < 2).unwrap();
        let snap = Snapshot {
            step: 0,
            config_hash: 0,
            potentials: vec![Some(0.5), Some(1.5)],
            lattice: l,
        };
        let pgm = snap.to_pgm();
        let header = b"P5\n4 4\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        let px = &pgm[header.len()..];
        assert_eq!(px.len(), 16);
        assert_eq!((px[4], px[5], px[0]), (64, 255, 0));
    }
}
