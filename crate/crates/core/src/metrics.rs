//! Shape indices, component tracking and the recovery index.

use serde::{Deserialize, Serialize};

use crate::lattice::{to_cartesian, wrap_delta, CartesianPoint, CellState, Lattice};
use crate::regions;
use crate::tokens::PotentialMap;

/// Per-step shape and potential summary. `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    /// Active cell count.
    pub area: usize,
    /// Active cells with at least one empty neighbour.
    pub perimeter: usize,
    /// `4 pi area / perimeter^2`; boundary cells are counted, not edges, so
    /// values above 1 are legitimate.
    pub circularity: Option<f64>,
    /// Mean distance of active cells from the wrap-aware centroid.
    pub dispersion: f64,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub p_avg: Option<f64>,
    /// 6-connected active components.
    pub components: usize,
}

impl MetricsRecord {
    /// Record of an empty lattice.
    pub fn empty(step: u64) -> Self {
        Self {
            step,
            area: 0,
            perimeter: 0,
            circularity: None,
            dispersion: 0.0,
            p_min: None,
            p_max: None,
            p_avg: None,
            components: 0,
        }
    }

    /// Active cells per boundary cell.
    pub fn active_boundary_ratio(&self) -> Option<f64> {
        (self.perimeter > 0).then(|| self.area as f64 / self.perimeter as f64)
    }
}

pub fn circularity(area: usize, perimeter: usize) -> Option<f64> {
    (perimeter > 0).then(|| 4.0 * std::f64::consts::PI * area as f64 / (perimeter as f64).powi(2))
}

/// Active cells with at least one empty neighbour of any kind.
pub fn perimeter(lattice: &Lattice) -> usize {
    let topo = lattice.topology();
    lattice
        .active_indices()
        .filter(|&i| {
            topo.neighbor_indices(i)
                .iter()
                .any(|&n| !lattice.is_active_at(n as usize))
        })
        .count()
}

/// Centroid of the active cells on the torus: each axis is averaged as an
/// angle so the result does not depend on where the seam is.
pub fn centroid(lattice: &Lattice) -> Option<CartesianPoint> {
    let (px, py) = lattice.topology().periods();
    let tau = std::f64::consts::TAU;
    let (mut cx, mut sx, mut cy, mut sy, mut n) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for i in lattice.active_indices() {
        let p = to_cartesian(lattice.topology().coord(i));
        let (ax, ay) = (tau * p.x / px, tau * p.y / py);
        cx += ax.cos();
        sx += ax.sin();
        cy += ay.cos();
        sy += ay.sin();
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let back = |s: f64, c: f64, period: f64| (s.atan2(c) / tau * period).rem_euclid(period);
    let rough = CartesianPoint {
        x: back(sx, cx, px),
        y: back(sy, cy, py),
    };
    // Re-centre on the plain mean of minimum-image offsets around the angular
    // estimate; this removes the trigonometric round-off.
    let (mut dx, mut dy) = (0.0, 0.0);
    for i in lattice.active_indices() {
        let p = to_cartesian(lattice.topology().coord(i));
        dx += wrap_delta(p.x - rough.x, px);
        dy += wrap_delta(p.y - rough.y, py);
    }
    Some(CartesianPoint {
        x: rough.x + dx / n as f64,
        y: rough.y + dy / n as f64,
    })
}

/// Mean minimum-image distance of active cells from [`centroid`].
pub fn dispersion(lattice: &Lattice) -> f64 {
    let Some(c) = centroid(lattice) else {
        return 0.0;
    };
    let (px, py) = lattice.topology().periods();
    let mut total = 0.0;
    let mut n = 0usize;
    for i in lattice.active_indices() {
        let p = to_cartesian(lattice.topology().coord(i));
        total += wrap_delta(p.x - c.x, px).hypot(wrap_delta(p.y - c.y, py));
        n += 1;
    }
    total / n as f64
}

pub fn compute_metrics(step: u64, lattice: &Lattice, potentials: &PotentialMap) -> MetricsRecord {
    let area = lattice.active_count();
    let perimeter = perimeter(lattice);
    let (mut p_min, mut p_max, mut p_sum, mut p_n) =
        (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for i in lattice.active_indices() {
        if let Some(p) = potentials.get(i) {
            p_min = p_min.min(p);
            p_max = p_max.max(p);
            p_sum += p;
            p_n += 1;
        }
    }
    let defined = p_n > 0;
    MetricsRecord {
        step,
        area,
        perimeter,
        circularity: circularity(area, perimeter),
        dispersion: dispersion(lattice),
        p_min: defined.then_some(p_min),
        p_max: defined.then_some(p_max),
        p_avg: defined.then(|| p_sum / p_n as f64),
        components: regions::label(lattice, CellState::Active).count(),
    }
}

/// `(v_t - v_post) / (v_pre - v_post)`; `None` when the cut did not change
/// the reference value.
pub fn recovery_index(v_pre: f64, v_post: f64, v_t: f64) -> Option<f64> {
    let span = v_pre - v_post;
    (span != 0.0).then(|| (v_t - v_post) / span)
}

/// An active component followed across steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentTrack {
    pub id: u64,
    /// Row-major cell indices.
    pub cells: Vec<usize>,
    pub birth_step: u64,
    /// Consecutive steps this component has been observed.
    pub persistence: u64,
    /// Track this component split from, if it was born from a split.
    pub parent: Option<u64>,
}

/// Result of one tracking update.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackUpdate {
    pub tracks: Vec<ComponentTrack>,
    /// Tracks that were not matched and ended at this step.
    pub ended: Vec<ComponentTrack>,
}

/// Matches the current active components against `prev`.
///
/// Each current component continues the previous track it overlaps most
/// (ties: larger previous component, then lowest id). When several current
/// components claim the same track, the one with the largest overlap keeps
/// it (ties: lowest current label) and the others are born as new tracks.
/// `next_id` supplies fresh ids and is advanced.
pub fn track_components(
    prev: &[ComponentTrack],
    lattice: &Lattice,
    step: u64,
    next_id: &mut u64,
) -> TrackUpdate {
    let comps = regions::label(lattice, CellState::Active);
    let mut owner = vec![usize::MAX; lattice.len()];
    for (t, track) in prev.iter().enumerate() {
        for &c in &track.cells {
            owner[c] = t;
        }
    }

    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); comps.count()];
    let mut overlaps: Vec<Vec<usize>> = vec![vec![0; prev.len()]; comps.count()];
    for (i, l) in comps.labels.iter().enumerate() {
        if let Some(l) = l {
            cells[*l as usize].push(i);
            if owner[i] != usize::MAX {
                overlaps[*l as usize][owner[i]] += 1;
            }
        }
    }

    // Preferred previous track per current component.
    let choice: Vec<Option<(usize, usize)>> = overlaps
        .iter()
        .map(|ov| {
            let mut best: Option<(usize, usize)> = None;
            for (t, &o) in ov.iter().enumerate() {
                if o == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bt, bo)) => {
                        (o, prev[t].cells.len(), std::cmp::Reverse(prev[t].id))
                            > (bo, prev[bt].cells.len(), std::cmp::Reverse(prev[bt].id))
                    }
                };
                if better {
                    best = Some((t, o));
                }
            }
            best
        })
        .collect();

    // Resolve components competing for the same track.
    let mut winner: Vec<Option<usize>> = vec![None; prev.len()];
    for (c, ch) in choice.iter().enumerate() {
        if let Some((t, o)) = *ch {
            match winner[t] {
                Some(w) if choice[w].unwrap().1 >= o => {}
                _ => winner[t] = Some(c),
            }
        }
    }

    let mut tracks = Vec::with_capacity(comps.count());
    for (c, cells) in cells.into_iter().enumerate() {
        match choice[c] {
            Some((t, _)) if winner[t] == Some(c) => tracks.push(ComponentTrack {
                id: prev[t].id,
                cells,
                birth_step: prev[t].birth_step,
                persistence: prev[t].persistence + 1,
                parent: prev[t].parent,
            }),
            ch => {
                let id = *next_id;
                *next_id += 1;
                tracks.push(ComponentTrack {
                    id,
                    cells,
                    birth_step: step,
                    persistence: 1,
                    parent: ch.map(|(t, _)| prev[t].id),
                });
            }
        }
    }
    let ended = prev
        .iter()
        .enumerate()
        .filter(|(t, _)| winner[*t].is_none())
        .map(|(_, tr)| tr.clone())
        .collect();
    TrackUpdate { tracks, ended }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CellCoord;

    #[test]
    fn circularity_of_published_pairs() {
        let round2 = |x: f64| (x * 100.0).round() / 100.0;
        assert_eq!(round2(circularity(894, 353).unwrap()), 0.09);
        assert_eq!(round2(circularity(46, 24).unwrap()), 1.00);
        assert!((circularity(894, 353).unwrap() - 0.090_157).abs() < 1e-5);
        assert_eq!(circularity(5, 0), None);
    }

    #[test]
    fn single_cell_record() {
        let l = Lattice::from_fn(10, 10, |c| c == CellCoord::new(5, 5)).unwrap();
        let p = PotentialMap::from_values((0..100).map(|i| (i == 55).then_some(0.53)).collect());
        let r = compute_metrics(0, &l, &p);
        assert_eq!((r.area, r.perimeter, r.components), (1, 1, 1));
        assert_eq!(r.dispersion, 0.0);
        assert_eq!(r.p_avg, Some(0.53));
    }

    #[test]
    fn empty_record() {
        let l = Lattice::new(10, 10).unwrap();
        let r = compute_metrics(3, &l, &PotentialMap::empty(100));
        assert_eq!((r.area, r.perimeter, r.components), (0, 0, 0));
        assert_eq!(r.circularity, None);
        assert_eq!(r.p_min, None);
        assert_eq!(r.dispersion, 0.0);
    }

    #[test]
    fn dispersion_across_seam() {
        // Two cells adjacent through the horizontal seam.
        let l = Lattice::from_fn(10, 10, |c| c.row == 4 && (c.col == 0 || c.col == 9)).unwrap();
        assert!((dispersion(&l) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn recovery_index_values() {
        assert_eq!(recovery_index(10.0, 4.0, 10.0), Some(1.0));
        assert_eq!(recovery_index(10.0, 4.0, 4.0), Some(0.0));
        assert!((recovery_index(10.0, 4.0, 8.8).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(recovery_index(3.0, 3.0, 5.0), None);
    }

    fn blob(
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> impl Fn(CellCoord) -> bool {
        move |c| rows.contains(&c.row) && cols.contains(&c.col)
    }

    #[test]
    fn tracking_split_and_merge() {
        let mut next = 0;
        let whole = Lattice::from_fn(20, 20, blob(4..8, 2..16)).unwrap();
        let t0 = track_components(&[], &whole, 0, &mut next).tracks;
        assert_eq!(t0.len(), 1);

        let same = track_components(&t0, &whole, 1, &mut next).tracks;
        assert_eq!(same[0].id, t0[0].id);
        assert_eq!(same[0].persistence, 2);

        // Split into a wide left part and a narrow right part.
        let split = Lattice::from_fn(20, 20, |c| blob(4..8, 2..16)(c) && c.col != 11).unwrap();
        let t2 = track_components(&same, &split, 2, &mut next);
        assert_eq!(t2.tracks.len(), 2);
        let old = t2.tracks.iter().find(|t| t.id == t0[0].id).unwrap();
        assert!(old.cells.len() > 20);
        let born = t2.tracks.iter().find(|t| t.id != t0[0].id).unwrap();
        assert_eq!((born.birth_step, born.parent), (2, Some(t0[0].id)));
        assert!(t2.ended.is_empty());

        // And merge back: the survivor is the track with the larger overlap.
        let t3 = track_components(&t2.tracks, &whole, 3, &mut next);
        assert_eq!(t3.tracks.len(), 1);
        assert_eq!(t3.tracks[0].id, t0[0].id);
        assert_eq!(t3.ended.len(), 1);
        assert_eq!(t3.ended[0].id, born.id);
    }
}
