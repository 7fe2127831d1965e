//! Connected-component labelling on the periodic hex lattice.

use std::collections::VecDeque;

use crate::lattice::{CellState, Lattice};

/// Component labels for all cells of one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    /// Component id per cell, `None` for cells of the other state.
    pub labels: Vec<Option<u32>>,
    /// Cell count per component id.
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Cell indices of component `id`, in row-major order.
    pub fn cells_of(&self, id: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| (*l == Some(id)).then_some(i))
            .collect()
    }
}

/// Labels 6-connected components of cells in `state`.
///
/// Ids are assigned in order of each component's smallest row-major index.
pub fn label(lattice: &Lattice, state: CellState) -> Components {
    let topo = lattice.topology();
    let states = lattice.states();
    let mut labels = vec![None; lattice.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..lattice.len() {
        if states[start] != state || labels[start].is_some() {
            continue;
        }
        let id = sizes.len() as u32;
        labels[start] = Some(id);
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for &nb in topo.neighbor_indices(i) {
                let nb = nb as usize;
                if states[nb] == state && labels[nb].is_none() {
                    labels[nb] = Some(id);
                    queue.push_back(nb);
                }
            }
        }
        sizes.push(size);
    }
    Components { labels, sizes }
}

/// Mask of the exterior empty region: the largest empty component, ties
/// going to the component containing the lowest row-major index.
///
/// A torus has no true outside, so "largest" stands in for it. Every other
/// empty cell is an enclosed void.
pub fn exterior_mask(lattice: &Lattice) -> Vec<bool> {
    let comps = label(lattice, CellState::Empty);
    let mut best: Option<(u32, usize)> = None;
    for (id, &size) in comps.sizes.iter().enumerate() {
        // Strict comparison keeps the earliest id on ties.
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((id as u32, size));
        }
    }
    match best {
        None => vec![false; lattice.len()],
        Some((id, _)) => comps.labels.iter().map(|l| *l == Some(id)).collect(),
    }
}
