//! One simulation step: death, then growth at the boundary of the body.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::lattice::{CellCoord, CellState, Lattice};
use crate::params::{DeathScope, GrowthScope, ModelParams};
use crate::regions;
use crate::rng::Rng;
use crate::tokens::{self, PotentialMap, TokenField};

/// Empty cells of the exterior region, row-major.
pub fn exterior_empty(lattice: &Lattice) -> Vec<CellCoord> {
    regions::exterior_mask(lattice)
        .iter()
        .enumerate()
        .filter(|&(_, &e)| e)
        .map(|(i, _)| lattice.topology().coord(i))
        .collect()
}

fn boundary_mask(lattice: &Lattice, scope: GrowthScope, exterior: Option<&[bool]>) -> Vec<bool> {
    let topo = lattice.topology();
    let states = lattice.states();
    (0..lattice.len())
        .map(|i| {
            states[i].is_active()
                && topo.neighbor_indices(i).iter().any(|&n| {
                    let n = n as usize;
                    match (scope, exterior) {
                        (GrowthScope::BoundaryOnly, Some(ext)) => ext[n],
                        _ => !states[n].is_active(),
                    }
                })
        })
        .collect()
}

/// Active cells that may grow under `scope`, row-major.
///
/// `BoundaryOnly` keeps cells touching the exterior empty region;
/// `IncludeInternal` keeps every active cell with any empty neighbour.
pub fn boundary_cells(lattice: &Lattice, scope: GrowthScope) -> Vec<CellCoord> {
    let exterior = (scope == GrowthScope::BoundaryOnly).then(|| regions::exterior_mask(lattice));
    boundary_mask(lattice, scope, exterior.as_deref())
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b)
        .map(|(i, _)| lattice.topology().coord(i))
        .collect()
}

#[inline]
fn dies(p: f64, r_surv: f64, r_over: f64) -> bool {
    p <= r_surv || p >= r_over
}

/// Removes every examined active cell whose potential is at or below
/// `r_surv`, or at or above `r_over`. `scope` picks the examined cells. All
/// decisions read the same potential map and the same pre-death lattice.
pub fn apply_death(
    lattice: &Lattice,
    potentials: &PotentialMap,
    r_surv: f64,
    r_over: f64,
    scope: DeathScope,
) -> Lattice {
    let topo = lattice.topology();
    let states = lattice.states();
    let mut next = lattice.clone();
    for i in lattice.active_indices() {
        if scope == DeathScope::Boundary
            && topo
                .neighbor_indices(i)
                .iter()
                .all(|&n| states[n as usize].is_active())
        {
            continue;
        }
        let p = potentials
            .get(i)
            .expect("potential missing for active cell");
        if dies(p, r_surv, r_over) {
            next.set_index(i, CellState::Empty);
        }
    }
    next
}

/// Grows one new cell next to every eligible boundary cell.
///
/// `lattice` already reflects this step's deaths; `potentials` are the values
/// computed before death. Growers are visited in row-major order and each
/// draws one target uniformly from its admissible empty neighbours. A cell
/// picked by several growers is activated once.
pub fn apply_growth(
    lattice: &Lattice,
    potentials: &PotentialMap,
    g: f64,
    scope: GrowthScope,
    rng: &mut Rng,
) -> Lattice {
    let topo = lattice.topology();
    let states = lattice.states();
    let exterior = (scope == GrowthScope::BoundaryOnly).then(|| regions::exterior_mask(lattice));
    let admissible = |n: usize| match &exterior {
        Some(ext) => ext[n],
        None => !states[n].is_active(),
    };
    let mut next = lattice.clone();
    let mut targets = Vec::with_capacity(6);
    for i in lattice.active_indices() {
        match potentials.get(i) {
            Some(p) if p >= g => {}
            _ => continue,
        }
        targets.clear();
        targets.extend(
            topo.neighbor_indices(i)
                .iter()
                .map(|&n| n as usize)
                .filter(|&n| admissible(n)),
        );
        if targets.is_empty() {
            continue;
        }
        let pick = targets[rng.index(targets.len())];
        next.set_index(pick, CellState::Active);
    }
    next
}

/// Lattice, tokens and potentials at a step boundary.
///
/// `tokens` and `potentials` always belong to the current `lattice`: they are
/// what the next step's death and growth decisions read.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub lattice: Lattice,
    pub tokens: TokenField,
    pub potentials: PotentialMap,
    pub step: u64,
    pub rng: Rng,
    /// Accumulated totals of the previous field, restricted to cells active
    /// now. The inheritance term is `k` times this.
    inherited: Vec<f64>,
}

/// Cell changes made by one step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub died: Vec<usize>,
    pub grown: Vec<usize>,
}

/// A running simulation: parameters plus state.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    params: ModelParams,
    state: SimState,
}

impl Simulation {
    pub fn new(params: ModelParams, lattice: Lattice, seed: u64) -> Result<Self> {
        params.validate()?;
        let n = lattice.len();
        let z = params.propagation.z;
        let mut sim = Self {
            params,
            state: SimState {
                tokens: TokenField::zeros(z, n),
                potentials: PotentialMap::empty(n),
                lattice,
                step: 0,
                rng: Rng::new(seed),
                inherited: vec![0.0; n],
            },
        };
        sim.refresh();
        Ok(sim)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn lattice(&self) -> &Lattice {
        &self.state.lattice
    }

    pub fn step_count(&self) -> u64 {
        self.state.step
    }

    /// Replaces the parameters; the new values apply from the next seeding,
    /// so the current potentials are recomputed right away.
    pub fn set_params(&mut self, params: ModelParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        if self.state.tokens.labels() != params.propagation.z {
            self.state.tokens = TokenField::zeros(params.propagation.z, self.state.lattice.len());
        }
        self.refresh();
        Ok(())
    }

    /// Seeds and propagates tokens on the current lattice.
    fn refresh(&mut self) {
        let p = self.params.propagation;
        let st = &mut self.state;
        let carry: Option<Vec<f64>> =
            (p.k > 0.0).then(|| st.inherited.iter().map(|t| p.k * t).collect());
        let mut field = tokens::seed_tokens(&st.lattice, p.z, carry.as_deref());
        tokens::propagate(&mut field, &st.lattice);
        st.potentials = tokens::compute_potentials(&field, &st.lattice, p.x, p.y, p.w);
        st.tokens = field;
    }

    /// Advances one step: death, growth, then the next token cycle.
    pub fn step(&mut self) -> StepOutcome {
        let m = self.params.morph;
        let st = &mut self.state;
        let after_death = apply_death(
            &st.lattice,
            &st.potentials,
            m.r_surv,
            m.r_over,
            m.death_scope,
        );
        let after_growth = apply_growth(&after_death, &st.potentials, m.g, m.scope, &mut st.rng);

        let mut outcome = StepOutcome::default();
        for i in 0..st.lattice.len() {
            match (st.lattice.is_active_at(i), after_growth.is_active_at(i)) {
                (true, false) => outcome.died.push(i),
                (false, true) => outcome.grown.push(i),
                // A cell that died and was regrown in the same step starts
                // over with no inherited tokens.
                (true, true) if !after_death.is_active_at(i) => {
                    outcome.died.push(i);
                    outcome.grown.push(i);
                }
                _ => {}
            }
        }

        for i in 0..st.lattice.len() {
            st.inherited[i] = if after_death.is_active_at(i) {
                st.tokens.total(i)
            } else {
                0.0
            };
        }
        st.lattice = after_growth;
        st.step += 1;
        self.refresh();
        outcome
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Empties every cell in `rows`, discarding its tokens. The step counter
    /// is unchanged. Returns the number of active cells removed.
    pub fn amputate_rows(&mut self, rows: Range<usize>) -> Result<usize> {
        let h = self.state.lattice.height();
        if rows.end > h {
            return Err(Error::Scenario(format!(
                "amputation rows {}..{} exceed lattice height {h}",
                rows.start, rows.end
            )));
        }
        let w = self.state.lattice.width();
        let cells: Vec<usize> = rows.flat_map(|r| (0..w).map(move |c| r * w + c)).collect();
        Ok(self.amputate_indices(&cells))
    }

    /// Empties the given cells (row-major indices).
    pub fn amputate_cells(&mut self, cells: &[CellCoord]) -> Result<usize> {
        let topo = self.state.lattice.topology();
        let mut idx = Vec::with_capacity(cells.len());
        for c in cells {
            if c.row >= topo.height() || c.col >= topo.width() {
                return Err(Error::Scenario(format!(
                    "cell ({}, {}) out of bounds",
                    c.row, c.col
                )));
            }
            idx.push(topo.index(*c));
        }
        Ok(self.amputate_indices(&idx))
    }

    /// Empties the given row-major indices. Panics on an index outside the
    /// lattice.
    pub fn amputate_indices(&mut self, cells: &[usize]) -> usize {
        let st = &mut self.state;
        let mut removed = 0;
        for &i in cells {
            if st.lattice.is_active_at(i) {
                st.lattice.set_index(i, CellState::Empty);
                removed += 1;
            }
            st.inherited[i] = 0.0;
        }
        if removed > 0 {
            self.refresh();
        }
        removed
    }
}
