//! Periodic hexagonal lattice.
//!
//! Cells are addressed in "odd-r" offset coordinates: every odd row is shifted
//! half a cell to the right. With that convention the six neighbours of a cell
//! are fixed per row parity, and wrapping in both directions keeps the
//! topology a proper hexagonal torus as long as the height is even.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertical spacing between rows, in units of the inter-cell distance.
pub const ROW_SPACING: f64 = 0.866_025_403_784_438_6;

/// Neighbour directions, in the order returned by [`Lattice::neighbors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    E,
    W,
    NE,
    NW,
    SE,
    SW,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::E,
        Direction::W,
        Direction::NE,
        Direction::NW,
        Direction::SE,
        Direction::SW,
    ];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::E => Direction::W,
            Direction::W => Direction::E,
            Direction::NE => Direction::SW,
            Direction::NW => Direction::SE,
            Direction::SE => Direction::NW,
            Direction::SW => Direction::NE,
        }
    }

    /// (row, col) offset for a cell in a row of the given parity.
    fn offset(self, odd_row: bool) -> (isize, isize) {
        // "N" is row - 1.
        match (self, odd_row) {
            (Direction::E, _) => (0, 1),
            (Direction::W, _) => (0, -1),
            (Direction::NE, false) => (-1, 0),
            (Direction::NW, false) => (-1, -1),
            (Direction::SE, false) => (1, 0),
            (Direction::SW, false) => (1, -1),
            (Direction::NE, true) => (-1, 1),
            (Direction::NW, true) => (-1, 0),
            (Direction::SE, true) => (1, 1),
            (Direction::SW, true) => (1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub row: usize,
    pub col: usize,
}

impl CellCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
}

impl CartesianPoint {
    pub fn distance(self, other: CartesianPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Position of a cell in the plane, spacing 1 between adjacent cells.
pub fn to_cartesian(cell: CellCoord) -> CartesianPoint {
    let shift = if cell.row % 2 == 1 { 0.5 } else { 0.0 };
    CartesianPoint {
        x: cell.col as f64 + shift,
        y: cell.row as f64 * ROW_SPACING,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CellState {
    #[default]
    Empty,
    Active,
}

impl CellState {
    #[inline]
    pub fn is_active(self) -> bool {
        self == CellState::Active
    }
}

/// Lattice dimensions together with a precomputed neighbour table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    width: usize,
    height: usize,
    neighbors: Vec<[u32; 6]>,
}

impl Topology {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::InvalidLattice(format!(
                "lattice must be at least 3x3, got {width}x{height}"
            )));
        }
        if !height.is_multiple_of(2) {
            return Err(Error::InvalidLattice(format!(
                "height must be even for a periodic odd-r lattice, got {height}"
            )));
        }
        if width
            .checked_mul(height)
            .is_none_or(|n| n > u32::MAX as usize)
        {
            return Err(Error::InvalidLattice("lattice too large".into()));
        }
        let mut neighbors = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                let mut entry = [0u32; 6];
                for (slot, dir) in entry.iter_mut().zip(Direction::ALL) {
                    let n = step_coord(width, height, CellCoord::new(row, col), dir);
                    *slot = (n.row * width + n.col) as u32;
                }
                neighbors.push(entry);
            }
        }
        Ok(Self {
            width,
            height,
            neighbors,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, cell: CellCoord) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn coord(&self, index: usize) -> CellCoord {
        CellCoord::new(index / self.width, index % self.width)
    }

    /// Canonicalises arbitrary (possibly negative) coordinates by wrapping.
    pub fn wrap(&self, row: isize, col: isize) -> CellCoord {
        CellCoord::new(
            row.rem_euclid(self.height as isize) as usize,
            col.rem_euclid(self.width as isize) as usize,
        )
    }

    /// Neighbour indices of the cell at `index`, ordered E, W, NE, NW, SE, SW.
    #[inline]
    pub fn neighbor_indices(&self, index: usize) -> &[u32; 6] {
        &self.neighbors[index]
    }

    pub fn neighbor(&self, cell: CellCoord, dir: Direction) -> CellCoord {
        step_coord(self.width, self.height, cell, dir)
    }

    /// Horizontal and vertical period of the Cartesian embedding.
    pub fn periods(&self) -> (f64, f64) {
        (self.width as f64, self.height as f64 * ROW_SPACING)
    }
}

fn step_coord(width: usize, height: usize, cell: CellCoord, dir: Direction) -> CellCoord {
    let (dr, dc) = dir.offset(cell.row % 2 == 1);
    CellCoord::new(
        (cell.row as isize + dr).rem_euclid(height as isize) as usize,
        (cell.col as isize + dc).rem_euclid(width as isize) as usize,
    )
}

/// Cell states on a periodic hexagonal torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    topology: std::sync::Arc<Topology>,
    states: Vec<CellState>,
}

impl Lattice {
    /// An all-empty lattice.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        let topology = Topology::new(width, height)?;
        Ok(Self::with_topology(std::sync::Arc::new(topology)))
    }

    pub fn with_topology(topology: std::sync::Arc<Topology>) -> Self {
        let states = vec![CellState::Empty; topology.len()];
        Self { topology, states }
    }

    pub fn from_states(width: usize, height: usize, states: Vec<CellState>) -> Result<Self> {
        let topology = Topology::new(width, height)?;
        if states.len() != topology.len() {
            return Err(Error::InvalidLattice(format!(
                "expected {} cell states, got {}",
                topology.len(),
                states.len()
            )));
        }
        Ok(Self {
            topology: std::sync::Arc::new(topology),
            states,
        })
    }

    /// Builds a lattice from a predicate over cell coordinates.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut active: impl FnMut(CellCoord) -> bool,
    ) -> Result<Self> {
        let mut lattice = Self::new(width, height)?;
        for i in 0..lattice.len() {
            if active(lattice.topology.coord(i)) {
                lattice.states[i] = CellState::Active;
            }
        }
        Ok(lattice)
    }

    #[inline]
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn shared_topology(&self) -> std::sync::Arc<Topology> {
        self.topology.clone()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.topology.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.topology.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    #[inline]
    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    #[inline]
    pub fn state(&self, cell: CellCoord) -> CellState {
        self.states[self.topology.index(cell)]
    }

    #[inline]
    pub fn is_active_at(&self, index: usize) -> bool {
        self.states[index].is_active()
    }

    pub fn set(&mut self, cell: CellCoord, state: CellState) {
        let i = self.topology.index(cell);
        self.states[i] = state;
    }

    #[inline]
    pub fn set_index(&mut self, index: usize, state: CellState) {
        self.states[index] = state;
    }

    pub fn active_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_active()).count()
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.is_active().then_some(i))
    }

    /// The six neighbours of `cell`, ordered E, W, NE, NW, SE, SW.
    pub fn neighbors(&self, cell: CellCoord) -> [CellCoord; 6] {
        Direction::ALL.map(|d| self.topology.neighbor(cell, d))
    }

    pub fn clear(&mut self) {
        self.states.fill(CellState::Empty);
    }

    /// Same lattice shape, all cells empty.
    pub fn empty_like(&self) -> Self {
        Self::with_topology(self.topology.clone())
    }
}

/// Lattice where every cell whose Cartesian distance to `center` is at most
/// `radius` is active.
///
/// Distances are measured with the periodic minimum image, and the radius is
/// rejected when the disk would overlap itself through the wrap.
pub fn init_disk(width: usize, height: usize, center: CellCoord, radius: f64) -> Result<Lattice> {
    let mut lattice = Lattice::new(width, height)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidLattice(format!(
            "disk radius must be positive, got {radius}"
        )));
    }
    let (px, py) = lattice.topology().periods();
    if radius >= px.min(py) / 2.0 {
        return Err(Error::InvalidLattice(format!(
            "disk radius {radius} wraps around a {width}x{height} lattice"
        )));
    }
    if center.row >= height || center.col >= width {
        return Err(Error::InvalidLattice(format!(
            "disk center ({}, {}) out of bounds",
            center.row, center.col
        )));
    }
    let c = to_cartesian(center);
    // Tolerance keeps cells at exactly the radius (e.g. the 6 neighbours of a
    // radius-1 disk) inside despite sqrt(3)/2 rounding.
    let limit = radius + 1e-9;
    for i in 0..lattice.len() {
        let p = to_cartesian(lattice.topology().coord(i));
        let dx = wrap_delta(p.x - c.x, px);
        let dy = wrap_delta(p.y - c.y, py);
        if dx.hypot(dy) <= limit {
            lattice.states[i] = CellState::Active;
        }
    }
    Ok(lattice)
}

/// Minimum-image displacement along a periodic axis.
pub(crate) fn wrap_delta(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}
