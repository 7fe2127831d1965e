//! Token generation, label-by-label propagation and potentials.
//!
//! Every active cell seeds one unit of tokens at label 1. Tokens at label `v`
//! are split in six equal shares, one per neighbour; a share sent to an active
//! neighbour is accumulated there at label `v + 1`, a share sent to an empty
//! cell is lost. Senders keep their own accumulated amount, so after
//! propagation `T[i, v]` is the total that ever arrived at `i` with label `v`.
//!
//! Token amounts are `f64`. The model speaks of integer tokens but every hop
//! divides by six, so fractional amounts are what the rules actually produce.

use crate::lattice::Lattice;

/// Accumulated token amounts per (label, cell). Labels are 1-based in the
/// accessors and stored label-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenField {
    labels: usize,
    cells: usize,
    amounts: Vec<f64>,
}

impl TokenField {
    pub fn zeros(labels: usize, cells: usize) -> Self {
        Self {
            labels,
            cells,
            amounts: vec![0.0; labels * cells],
        }
    }

    #[inline]
    pub fn labels(&self) -> usize {
        self.labels
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Amount at `cell` with 1-based label `label`.
    #[inline]
    pub fn get(&self, cell: usize, label: usize) -> f64 {
        self.amounts[(label - 1) * self.cells + cell]
    }

    /// All amounts carrying 1-based label `label`, indexed by cell.
    #[inline]
    pub fn layer(&self, label: usize) -> &[f64] {
        let start = (label - 1) * self.cells;
        &self.amounts[start..start + self.cells]
    }

    pub fn layer_mut(&mut self, label: usize) -> &mut [f64] {
        let start = (label - 1) * self.cells;
        &mut self.amounts[start..start + self.cells]
    }

    /// Sum over labels `1..=upto` at `cell`.
    pub fn sum_upto(&self, cell: usize, upto: usize) -> f64 {
        (1..=upto).map(|v| self.get(cell, v)).sum()
    }

    /// Sum over all labels at `cell`.
    pub fn total(&self, cell: usize) -> f64 {
        self.sum_upto(cell, self.labels)
    }

    /// Zeroes every label at `cell`.
    pub fn discard(&mut self, cell: usize) {
        for v in 0..self.labels {
            self.amounts[v * self.cells + cell] = 0.0;
        }
    }
}

/// Per-cell carryover totals for the next seed: `k` times the accumulated
/// total of every cell that is active in `lattice`, zero elsewhere.
pub fn carryover(field: &TokenField, lattice: &Lattice, k: f64) -> Vec<f64> {
    let mut carry = vec![0.0; lattice.len()];
    if k == 0.0 {
        return carry;
    }
    for i in lattice.active_indices() {
        carry[i] = k * field.total(i);
    }
    carry
}

/// Fresh field for this step: `1 + carry[i]` at label 1 of every active cell.
///
/// `carry` is the inheritance term (see [`carryover`]); pass `None` for the
/// basic model.
pub fn seed_tokens(lattice: &Lattice, labels: usize, carry: Option<&[f64]>) -> TokenField {
    let mut field = TokenField::zeros(labels, lattice.len());
    let first = field.layer_mut(1);
    for i in lattice.active_indices() {
        first[i] = 1.0 + carry.map_or(0.0, |c| c[i]);
    }
    field
}

/// Runs the label loop `v = 1..Z-1` in place.
///
/// Each label layer is computed from the previous one only, so the result is
/// independent of cell visiting order. Shares are summed per receiver in fixed
/// neighbour order, which makes the output bit-reproducible.
pub fn propagate(field: &mut TokenField, lattice: &Lattice) {
    let n = field.cells;
    assert_eq!(n, lattice.len(), "token field does not match lattice");
    let topo = lattice.topology();
    let states = lattice.states();
    let active: Vec<usize> = lattice.active_indices().collect();
    for v in 0..field.labels.saturating_sub(1) {
        let (lower, upper) = field.amounts.split_at_mut((v + 1) * n);
        let src = &lower[v * n..];
        let dst = &mut upper[..n];
        for &i in &active {
            let mut received = 0.0;
            for &nb in topo.neighbor_indices(i) {
                let nb = nb as usize;
                // Only active neighbours hold tokens; shares aimed at empty
                // cells never arrive anywhere.
                if states[nb].is_active() {
                    received += src[nb];
                }
            }
            dst[i] += received / 6.0;
        }
    }
}

/// Potentials of active cells: `sumX - w * sumY`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMap {
    values: Vec<Option<f64>>,
}

impl PotentialMap {
    pub fn empty(cells: usize) -> Self {
        Self {
            values: vec![None; cells],
        }
    }

    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        Self { values }
    }

    #[inline]
    pub fn get(&self, cell: usize) -> Option<f64> {
        self.values[cell]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn remove(&mut self, cell: usize) {
        self.values[cell] = None;
    }

    pub fn iter_defined(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p)))
    }
}

pub fn compute_potentials(
    field: &TokenField,
    lattice: &Lattice,
    x: usize,
    y: usize,
    w: f64,
) -> PotentialMap {
    let mut values = vec![None; lattice.len()];
    for i in lattice.active_indices() {
        let sum_x = field.sum_upto(i, x);
        let sum_y = field.sum_upto(i, y);
        values[i] = Some(sum_x - sum_y * w);
    }
    PotentialMap { values }
}
