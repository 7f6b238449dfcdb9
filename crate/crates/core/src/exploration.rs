//! Frontier detection and waypoint choice.
//!
//! The grid is reduced to a three-level field (free 0, unknown 0.5,
//! occupied 1) and run through a Roberts cross. Only windows mixing free and
//! unknown cells without any occupied cell keep their gradient, which leaves
//! the free/unknown boundary. That frontier strength is weighted by inverse
//! distance to the agent (saturating at a cutoff) and by squared distance to
//! every known neighbor; the waypoint is the free cell with the largest
//! weighted value.

use thiserror::Error;

use crate::mapping::{CellIndex, CellState, Classifier, OccupancyGrid, Thresholds};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorationError {
    #[error("cutoff distance must be positive, got {0}")]
    NonpositiveCutoff(f64),
}

fn level(state: CellState) -> f64 {
    match state {
        CellState::Free => 0.0,
        CellState::Unknown => 0.5,
        CellState::Occupied => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierField {
    rows: usize,
    cols: usize,
    resolution: f64,
    values: Vec<f64>,
    support: Vec<usize>,
}

impl FrontierField {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn get(&self, cell: CellIndex) -> f64 {
        self.values[cell.row * self.cols + cell.col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flat indices with nonzero strength, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Multiplies every value by a positive factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Masked Roberts cross over the classified grid. The window
/// `(r, c), (r, c+1), (r+1, c), (r+1, c+1)` writes to `(r, c)`; the last row
/// and column have no window and stay zero.
pub fn frontier_field(grid: &OccupancyGrid, thresholds: &Thresholds) -> FrontierField {
    let (rows, cols) = (grid.rows(), grid.cols());
    let classifier = Classifier::new(thresholds);
    let states: Vec<CellState> = grid
        .log_odds_slice()
        .iter()
        .map(|&l| classifier.classify(l))
        .collect();
    let mut values = vec![0.0; rows * cols];
    let mut support = Vec::new();
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols - 1 {
            let i = r * cols + c;
            let window = [states[i], states[i + 1], states[i + cols], states[i + cols + 1]];
            let mut free = false;
            let mut unknown = false;
            let mut occupied = false;
            for s in window {
                match s {
                    CellState::Free => free = true,
                    CellState::Unknown => unknown = true,
                    CellState::Occupied => occupied = true,
                }
            }
            if !(free && unknown) || occupied {
                continue;
            }
            let [c1, c2, c3, c4] = window.map(level);
            let g = ((c1 - c4).powi(2) + (c2 - c3).powi(2)).sqrt();
            if g > 0.0 {
                values[i] = g;
                support.push(i);
            }
        }
    }
    FrontierField {
        rows,
        cols,
        resolution: grid.resolution(),
        values,
        support,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    rows: usize,
    cols: usize,
    cutoff: f64,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn get(&self, cell: CellIndex) -> f64 {
        self.values[cell.row * self.cols + cell.col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

/// Preference potential over cell centers. A cell containing a neighbor's
/// position gets zero. The distance to self is floored at half a cell so the
/// self cell stays finite.
pub fn preference_potential(
    frontier: &FrontierField,
    self_position: Vec2,
    neighbors: &[Vec2],
    cutoff: f64,
) -> Result<PotentialField, ExplorationError> {
    if !(cutoff > 0.0) {
        return Err(ExplorationError::NonpositiveCutoff(cutoff));
    }
    let res = frontier.resolution;
    let eps = res / 2.0;
    let cols = frontier.cols;
    let cell_of = |p: &Vec2| {
        let c = (p.x / res).floor();
        let r = (p.y / res).floor();
        (c >= 0.0 && r >= 0.0).then(|| (r as usize, c as usize))
    };
    let neighbor_cells: Vec<_> = neighbors.iter().map(cell_of).collect();
    let mut values = vec![0.0; frontier.values.len()];
    for &i in &frontier.support {
        let (row, col) = (i / cols, i % cols);
        let center = Vec2::new((col as f64 + 0.5) * res, (row as f64 + 0.5) * res);
        let d_self = (center - self_position).norm().max(eps);
        let mut v = frontier.values[i] / d_self.min(cutoff);
        for (pos, cell) in neighbors.iter().zip(&neighbor_cells) {
            if *cell == Some((row, col)) {
                v = 0.0;
                break;
            }
            v *= (center - pos).norm_squared();
        }
        values[i] = v;
    }
    Ok(PotentialField {
        rows: frontier.rows,
        cols,
        cutoff,
        values,
    })
}

/// Center of the free cell with the largest potential, ties going to the
/// smallest `(row, col)`. `None` when no free cell has positive potential.
pub fn select_waypoint(
    field: &PotentialField,
    grid: &OccupancyGrid,
    thresholds: &Thresholds,
) -> Option<Vec2> {
    let classifier = Classifier::new(thresholds);
    let mut best: Option<(usize, f64)> = None;
    for (i, (&v, &l)) in field.values.iter().zip(grid.log_odds_slice()).enumerate() {
        if v > 0.0
            && classifier.classify(l) == CellState::Free
            && best.is_none_or(|(_, bv)| v > bv)
        {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| grid.cell_center(grid.unflat(i)))
}

/// Frontier, potential and argmax in one call.
pub fn choose_waypoint(
    grid: &OccupancyGrid,
    thresholds: &Thresholds,
    self_position: Vec2,
    neighbors: &[Vec2],
    cutoff: f64,
) -> Result<Option<Vec2>, ExplorationError> {
    let frontier = frontier_field(grid, thresholds);
    let potential = preference_potential(&frontier, self_position, neighbors, cutoff)?;
    Ok(select_waypoint(&potential, grid, thresholds))
}
