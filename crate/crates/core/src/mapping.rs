//! Per-agent Bayesian occupancy grid in log-odds form.
//!
//! Cells start at the 0.5 prior (log-odds 0). Each beam lowers the log-odds
//! of every cell strictly between the sensor cell and the beam's endpoint
//! cell and, for a hit, raises the endpoint cell. Updates are additive so
//! fusing a set of scans does not depend on their order as long as no cell
//! saturates at the clamp.

use thiserror::Error;

use crate::world::Scan;
use crate::Vec2;

pub const DEFAULT_RESOLUTION: f64 = 1.0 / 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("scan from agent {source_agent} at tick {tick} originates outside the grid")]
    OriginOutOfGrid { source_agent: u32, tick: u64 },
    #[error("cell (row {row}, col {col}) outside {rows}x{cols} grid")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("invalid sensor model: {0}")]
    InvalidModel(String),
}

/// Rounds a log-odds increment to a multiple of 2^-32. Sums of such values
/// stay exact in f64 up to magnitude 2^20, so integrating the same scans in
/// any order gives bit-identical grids as long as nothing is clamped.
pub fn quantize(l: f64) -> f64 {
    const SCALE: f64 = (1u64 << 32) as f64;
    (l * SCALE).round() / SCALE
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Inverse sensor model in log-odds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub l_hit: f64,
    pub l_miss: f64,
    pub l_max: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            l_hit: logit(0.8),
            l_miss: logit(0.35),
            l_max: 10.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), MappingError> {
        if !(self.l_hit > 0.0) {
            return Err(MappingError::InvalidModel("l_hit must be positive".into()));
        }
        if !(self.l_miss < 0.0) {
            return Err(MappingError::InvalidModel("l_miss must be negative".into()));
        }
        if !(self.l_max > self.l_hit.max(-self.l_miss)) {
            return Err(MappingError::InvalidModel(
                "l_max must exceed both increments".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub p_occ: f64,
    pub p_free: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p_occ: 0.65,
            p_free: 0.35,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), MappingError> {
        if !(0.0 < self.p_free && self.p_free < self.p_occ && self.p_occ < 1.0) {
            return Err(MappingError::InvalidModel(
                "thresholds must satisfy 0 < p_free < p_occ < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

/// Grid index. Rows grow with `y`, columns with `x`; ordering is `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Classifier that compares in log-odds space, where `p <= t` is exactly
/// `logit(p) <= logit(t)`.
#[derive(Debug, Clone, Copy)]
pub struct Classifier {
    occ: f64,
    free: f64,
}

impl Classifier {
    pub fn new(thresholds: &Thresholds) -> Self {
        Self {
            occ: logit(thresholds.p_occ),
            free: logit(thresholds.p_free),
        }
    }

    #[inline]
    pub fn classify(&self, log_odds: f64) -> CellState {
        if log_odds >= self.occ {
            CellState::Occupied
        } else if log_odds <= self.free {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    owner: u32,
    resolution: f64,
    rows: usize,
    cols: usize,
    log_odds: Vec<f64>,
    touched: Vec<bool>,
    touched_count: usize,
}

impl OccupancyGrid {
    /// Grid covering `[0, width] x [0, height]`.
    pub fn new(owner: u32, width: f64, height: f64, resolution: f64) -> Self {
        let cols = ((width / resolution) - 1e-6).ceil().max(1.0) as usize;
        let rows = ((height / resolution) - 1e-6).ceil().max(1.0) as usize;
        Self::with_dims(owner, rows, cols, resolution)
    }

    pub fn with_dims(owner: u32, rows: usize, cols: usize, resolution: f64) -> Self {
        Self {
            owner,
            resolution,
            rows,
            cols,
            log_odds: vec![0.0; rows * cols],
            touched: vec![false; rows * cols],
            touched_count: 0,
        }
    }

    pub fn owner(&self) -> u32 {
        self.owner
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.log_odds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_odds.is_empty()
    }

    #[inline]
    pub fn flat(&self, cell: CellIndex) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn unflat(&self, idx: usize) -> CellIndex {
        CellIndex::new(idx / self.cols, idx % self.cols)
    }

    fn check(&self, cell: CellIndex) -> Result<usize, MappingError> {
        if cell.row < self.rows && cell.col < self.cols {
            Ok(self.flat(cell))
        } else {
            Err(MappingError::IndexOutOfRange {
                row: cell.row,
                col: cell.col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn cell_of(&self, p: Vec2) -> Option<CellIndex> {
        let col = (p.x / self.resolution).floor();
        let row = (p.y / self.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= self.cols as f64 || row >= self.rows as f64 {
            None
        } else {
            Some(CellIndex::new(row as usize, col as usize))
        }
    }

    pub fn cell_center(&self, cell: CellIndex) -> Vec2 {
        Vec2::new(
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn log_odds(&self, cell: CellIndex) -> Result<f64, MappingError> {
        Ok(self.log_odds[self.check(cell)?])
    }

    pub fn log_odds_slice(&self) -> &[f64] {
        &self.log_odds
    }

    pub fn probability(&self, cell: CellIndex) -> Result<f64, MappingError> {
        Ok(sigmoid(self.log_odds(cell)?))
    }

    pub fn is_touched(&self, cell: CellIndex) -> Result<bool, MappingError> {
        Ok(self.touched[self.check(cell)?])
    }

    pub fn touched_slice(&self) -> &[bool] {
        &self.touched
    }

    pub fn classify(
        &self,
        cell: CellIndex,
        thresholds: &Thresholds,
    ) -> Result<CellState, MappingError> {
        let l = self.log_odds(cell)?;
        Ok(Classifier::new(thresholds).classify(l))
    }

    /// Number of cells ever updated.
    pub fn count_explored(&self) -> usize {
        self.touched_count
    }

    /// Overwrites one cell. Intended for building synthetic maps.
    pub fn set_log_odds(&mut self, cell: CellIndex, value: f64) -> Result<(), MappingError> {
        let i = self.check(cell)?;
        self.log_odds[i] = value;
        if !self.touched[i] {
            self.touched[i] = true;
            self.touched_count += 1;
        }
        Ok(())
    }

    #[inline]
    fn bump(&mut self, i: usize, delta: f64, l_max: f64, fresh: &mut Vec<usize>) {
        self.log_odds[i] = (self.log_odds[i] + delta).clamp(-l_max, l_max);
        if !self.touched[i] {
            self.touched[i] = true;
            self.touched_count += 1;
            fresh.push(i);
        }
    }

    fn in_grid(&self, col: i64, row: i64) -> Option<usize> {
        (col >= 0 && row >= 0 && (col as usize) < self.cols && (row as usize) < self.rows)
            .then(|| row as usize * self.cols + col as usize)
    }

    /// Integrates one scan. Returns the flat indices of cells touched for the
    /// first time.
    pub fn update(&mut self, scan: &Scan, model: &SensorModel) -> Result<Vec<usize>, MappingError> {
        let origin = scan.origin.position();
        if self.cell_of(origin).is_none() {
            return Err(MappingError::OriginOutOfGrid {
                source_agent: scan.source_agent,
                tick: scan.timestamp,
            });
        }
        let res = self.resolution;
        let origin_cell = grid_coords(origin, res);
        let (l_hit, l_miss) = (quantize(model.l_hit), quantize(model.l_miss));
        let mut fresh = Vec::new();
        for beam in &scan.beams {
            let dir = Vec2::new(beam.bearing.cos(), beam.bearing.sin());
            let end = origin + dir * beam.range;
            // nudge past the surface so the endpoint lands in the struck cell
            let end_cell = if beam.hit {
                grid_coords(origin + dir * (beam.range + 1e-9), res)
            } else {
                grid_coords(end, res)
            };
            for (col, row) in supercover(origin, end, res) {
                if (col, row) == origin_cell || (col, row) == end_cell {
                    continue;
                }
                if let Some(i) = self.in_grid(col, row) {
                    self.bump(i, l_miss, model.l_max, &mut fresh);
                }
            }
            if beam.hit {
                if let Some(i) = self.in_grid(end_cell.0, end_cell.1) {
                    self.bump(i, l_hit, model.l_max, &mut fresh);
                }
            }
        }
        Ok(fresh)
    }

    /// Folds `update` over `scans`. Scans whose origin lies outside the grid
    /// are skipped and reported; the rest are applied.
    pub fn fuse<'a, I>(&mut self, scans: I, model: &SensorModel) -> (Vec<usize>, Vec<MappingError>)
    where
        I: IntoIterator<Item = &'a Scan>,
    {
        let mut fresh = Vec::new();
        let mut errors = Vec::new();
        for scan in scans {
            match self.update(scan, model) {
                Ok(mut f) => fresh.append(&mut f),
                Err(e) => errors.push(e),
            }
        }
        (fresh, errors)
    }
}

fn grid_coords(p: Vec2, res: f64) -> (i64, i64) {
    ((p.x / res).floor() as i64, (p.y / res).floor() as i64)
}

/// Every cell `(col, row)` whose closed square intersects the closed segment
/// `a -> b`, for square cells of side `res` anchored at the origin.
pub fn supercover(a: Vec2, b: Vec2, res: f64) -> Vec<(i64, i64)> {
    let (ax, ay) = (a.x / res, a.y / res);
    let (bx, by) = (b.x / res, b.y / res);
    let mut out = Vec::new();
    let (x_lo, x_hi) = (ax.min(bx), ax.max(bx));
    let first_col = x_lo.ceil() as i64 - 1;
    let last_col = x_hi.floor() as i64;
    let vertical = ax == bx;
    for col in first_col..=last_col {
        let (y_lo, y_hi) = if vertical {
            (ay.min(by), ay.max(by))
        } else {
            let xs = x_lo.max(col as f64);
            let xe = x_hi.min(col as f64 + 1.0);
            if xs > xe {
                continue;
            }
            let slope = (by - ay) / (bx - ax);
            let y0 = ay + (xs - ax) * slope;
            let y1 = ay + (xe - ax) * slope;
            (y0.min(y1), y0.max(y1))
        };
        for row in (y_lo.ceil() as i64 - 1)..=(y_hi.floor() as i64) {
            out.push((col, row));
        }
    }
    out
}
