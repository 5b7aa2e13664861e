//! Boundary lattice for quantizer design.
//!
//! Design moves boundaries on a finite grid of candidate positions: the
//! step-size grid for histogram supports, or the midpoints between adjacent
//! atoms for exact pmfs (real-valued steps are meaningless between atoms).
//! The first and last grid entries are `-inf`/`+inf` sentinels, so outermost
//! cell edges are ordinary indices.
//!
//! `DesignState` tracks the per-atom classification of both axes and the
//! aggregate rectangle-mass matrix incrementally: moving a boundary one slot
//! reclassifies only the swept atoms, costing one row/column update each
//! instead of a full grid pass.

use super::joint::{JointDistribution, SupportKind};
use super::{Cell, MultiLevelQuantizer, QuantizerError};

#[derive(Debug, Clone)]
pub(crate) struct StepGrid {
    positions: Vec<f64>,
}

impl StepGrid {
    pub fn build(p: &JointDistribution, step: f64) -> Self {
        let mut merged: Vec<f64> = p
            .x_support()
            .iter()
            .chain(p.y_support())
            .copied()
            .collect();
        merged.sort_by(|a, b| a.partial_cmp(b).expect("finite supports"));
        merged.dedup();
        let first = *merged.first().expect("nonempty support");
        let last = *merged.last().expect("nonempty support");

        let mut positions = vec![f64::NEG_INFINITY];
        match p.kind() {
            SupportKind::ExactPmf => {
                positions.push(first - 1.0);
                positions.extend(merged.windows(2).map(|w| 0.5 * (w[0] + w[1])));
                positions.push(last + 1.0);
            }
            SupportKind::Histogram => {
                let lo = first - step;
                let n = ((last + step - lo) / step).ceil() as usize;
                positions.extend((0..=n).map(|k| lo + k as f64 * step));
            }
        }
        positions.push(f64::INFINITY);
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn pos(&self, i: usize) -> f64 {
        self.positions[i]
    }

    /// Grid index whose position is closest to `x`, restricted to the finite
    /// interior.
    pub fn nearest_interior_index(&self, x: f64) -> usize {
        let first = 1usize;
        let last = self.positions.len() - 2;
        let below = self.positions[first..=last].partition_point(|&p| p < x);
        let hi = (first + below).min(last);
        let lo = (first + below).saturating_sub(1).max(first);
        if (x - self.positions[lo]).abs() <= (self.positions[hi] - x).abs() {
            lo
        } else {
            hi
        }
    }
}

/// Atom indices of `support` lying in the half-open interval `(a, b]`.
fn atoms_in(support: &[f64], a: f64, b: f64) -> std::ops::Range<usize> {
    let lo = support.partition_point(|&x| x <= a);
    let hi = support.partition_point(|&x| x <= b);
    lo..hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BlockStatus {
    Satisfied,
    /// First guard/cell index where the block ran out of room.
    Exhausted(usize),
}

impl BlockStatus {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, BlockStatus::Satisfied)
    }
}

pub(crate) struct DesignState<'a> {
    p: &'a JointDistribution,
    grid: StepGrid,
    levels: usize,
    marg_x: Vec<f64>,
    /// Boundary grid indices; `lo[0]` is the `-inf` sentinel and
    /// `hi[levels-1]` the `+inf` sentinel.
    lo: Vec<usize>,
    hi: Vec<usize>,
    cls_x: Vec<usize>,
    cls_y: Vec<usize>,
    /// Rectangle-mass aggregate, `(levels+1) x (levels+1)` with the erased
    /// class last.
    agg: Vec<f64>,
    /// Number of positive-mass x atoms per class; guards cell-emptiness
    /// checks without float cancellation.
    cell_count_x: Vec<usize>,
}

impl<'a> DesignState<'a> {
    fn erased(&self) -> usize {
        self.levels
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn distribution(&self) -> &JointDistribution {
        self.p
    }

    /// Number of positive-mass x atoms currently classified into cell `j`.
    pub fn cell_count(&self, j: usize) -> usize {
        self.cell_count_x[j]
    }

    fn assemble(
        p: &'a JointDistribution,
        grid: StepGrid,
        levels: usize,
        lo: Vec<usize>,
        hi: Vec<usize>,
    ) -> Self {
        let mut st = Self {
            p,
            grid,
            levels,
            marg_x: p.marginal_x(),
            lo,
            hi,
            cls_x: Vec::new(),
            cls_y: Vec::new(),
            agg: Vec::new(),
            cell_count_x: Vec::new(),
        };
        st.reclassify_all();
        st.refresh();
        st
    }

    fn class_of(&self, x: f64) -> usize {
        for j in 0..self.levels {
            if x > self.grid.pos(self.lo[j]) && x <= self.grid.pos(self.hi[j]) {
                return j;
            }
        }
        self.erased()
    }

    fn reclassify_all(&mut self) {
        self.cls_x = self.p.x_support().iter().map(|&x| self.class_of(x)).collect();
        self.cls_y = self.p.y_support().iter().map(|&y| self.class_of(y)).collect();
    }

    /// Recomputes the aggregate and cell counts from the classifications,
    /// discarding incremental floating-point drift.
    pub fn refresh(&mut self) {
        let n = self.levels + 1;
        self.agg = vec![0.0; n * n];
        for (u, &cx) in self.cls_x.iter().enumerate() {
            let row = self.p.row(u);
            for (v, &cy) in self.cls_y.iter().enumerate() {
                self.agg[cx * n + cy] += row[v];
            }
        }
        self.cell_count_x = vec![0; n];
        for (u, &cx) in self.cls_x.iter().enumerate() {
            if self.marg_x[u] > 0.0 {
                self.cell_count_x[cx] += 1;
            }
        }
    }

    /// Builds the initial maximum-entropy zero-guard state: boundaries
    /// advance until each cell carries its `1/2^b` share of the marginal.
    ///
    /// On atomic supports the exact share is usually not hittable; the
    /// boundary stops at the nearest atom edge (consuming the next atom only
    /// while it brings the cell mass closer to the share), which keeps the
    /// later cells from starving when an empirical mass sits just under the
    /// quantile.
    pub fn init(p: &'a JointDistribution, bits: u32, step: f64) -> Result<Self, QuantizerError> {
        let levels = 1usize << bits;
        let grid = StepGrid::build(p, step);
        let marg = p.marginal_x();
        let xs = p.x_support();
        let target = 1.0 / levels as f64;

        let mut lo = vec![0usize; levels];
        let mut hi = vec![0usize; levels];
        let mut atom = 0usize;
        let mut prev_idx = 0usize;
        for j in 0..levels - 1 {
            let mut cum = 0.0;
            let mut consumed = 0usize;
            loop {
                if atom >= xs.len() {
                    return Err(QuantizerError::InitUnreachable { bits });
                }
                let delta = marg[atom];
                if consumed > 0 && cum >= target - 0.5 * delta - 1e-12 {
                    break;
                }
                cum += delta;
                atom += 1;
                consumed += 1;
            }
            // First grid slot at or above the last consumed atom: the atom
            // stays inside the half-open cell.
            let idx = grid
                .positions
                .partition_point(|&pos| pos < xs[atom - 1])
                .min(grid.len() - 2)
                .max(prev_idx + 1);
            lo[j] = prev_idx;
            hi[j] = idx;
            prev_idx = idx;
        }
        lo[levels - 1] = prev_idx;
        hi[levels - 1] = grid.len() - 1;
        lo[0] = 0;

        // Skip atoms swallowed by a forced boundary bump, then require the
        // last cell to keep positive mass.
        let last_bound = grid.pos(prev_idx);
        if !(0..xs.len()).any(|u| xs[u] > last_bound && marg[u] > 0.0) {
            return Err(QuantizerError::InitUnreachable { bits });
        }
        Ok(Self::assemble(p, grid, levels, lo, hi))
    }

    /// Maps an existing quantizer onto the lattice; boundaries snap to the
    /// nearest grid position.
    pub fn from_quantizer(
        p: &'a JointDistribution,
        q: &MultiLevelQuantizer,
        step: f64,
    ) -> Result<Self, QuantizerError> {
        let grid = StepGrid::build(p, step);
        let levels = q.level_count();
        let mut lo = vec![0usize; levels];
        let mut hi = vec![0usize; levels];
        for (j, c) in q.cells().iter().enumerate() {
            lo[j] = if j == 0 {
                0
            } else {
                grid.nearest_interior_index(c.lo)
            };
            hi[j] = if j == levels - 1 {
                grid.len() - 1
            } else {
                grid.nearest_interior_index(c.hi)
            };
        }
        // Snapping can merge nearby bounds; restore strict ordering.
        for j in 0..levels {
            if j > 0 && lo[j] < hi[j - 1] {
                lo[j] = hi[j - 1];
            }
            if hi[j] <= lo[j] && j < levels - 1 {
                hi[j] = lo[j] + 1;
            }
            if hi[j] >= grid.len() - 1 && j < levels - 1 {
                return Err(QuantizerError::InvalidCells(
                    "quantizer does not fit the design grid".into(),
                ));
            }
            if lo[j] >= grid.len() - 1 {
                return Err(QuantizerError::InvalidCells(
                    "quantizer does not fit the design grid".into(),
                ));
            }
        }
        Ok(Self::assemble(p, grid, levels, lo, hi))
    }

    /// Atoms in `(a, b]` switch between cell `class` and the erased class.
    fn reclassify(&mut self, a: f64, b: f64, from: usize, to: usize) {
        let n = self.levels + 1;
        let x_range = atoms_in(self.p.x_support(), a, b);
        for u in x_range {
            debug_assert_eq!(self.cls_x[u], from);
            let row = self.p.row(u);
            for (v, &cy) in self.cls_y.iter().enumerate() {
                let w = row[v];
                if w != 0.0 {
                    self.agg[from * n + cy] -= w;
                    self.agg[to * n + cy] += w;
                }
            }
            if self.marg_x[u] > 0.0 {
                self.cell_count_x[from] -= 1;
                self.cell_count_x[to] += 1;
            }
            self.cls_x[u] = to;
        }
        let y_range = atoms_in(self.p.y_support(), a, b);
        for v in y_range {
            debug_assert_eq!(self.cls_y[v], from);
            for (u, &cx) in self.cls_x.iter().enumerate() {
                let w = self.p.mass(u, v);
                if w != 0.0 {
                    self.agg[cx * n + from] -= w;
                    self.agg[cx * n + to] += w;
                }
            }
            self.cls_y[v] = to;
        }
    }

    /// Number of positive x atoms the move `(a, b]` out of cell `j` would
    /// sweep.
    fn positive_swept_x(&self, a: f64, b: f64) -> usize {
        atoms_in(self.p.x_support(), a, b)
            .filter(|&u| self.marg_x[u] > 0.0)
            .count()
    }

    /// Raises `a^+_j` one slot (cell `j` absorbs one guard slot).
    pub fn raise_hi(&mut self, j: usize) -> bool {
        if j + 1 >= self.levels {
            return false;
        }
        let cur = self.hi[j];
        if cur + 1 > self.lo[j + 1] {
            return false;
        }
        let (a, b) = (self.grid.pos(cur), self.grid.pos(cur + 1));
        self.hi[j] = cur + 1;
        let erased = self.erased();
        self.reclassify(a, b, erased, j);
        true
    }

    /// Lowers `a^+_j` one slot (cell `j` cedes one slot to the guard).
    pub fn lower_hi(&mut self, j: usize, keep_mass: bool) -> bool {
        if j + 1 >= self.levels {
            return false;
        }
        let cur = self.hi[j];
        if cur <= self.lo[j] + 1 {
            return false;
        }
        let (a, b) = (self.grid.pos(cur - 1), self.grid.pos(cur));
        if keep_mass && self.cell_count_x[j] <= self.positive_swept_x(a, b) {
            return false;
        }
        self.hi[j] = cur - 1;
        let erased = self.erased();
        self.reclassify(a, b, j, erased);
        true
    }

    /// Raises `a^-_j` one slot (cell `j` cedes one slot to the guard).
    pub fn raise_lo(&mut self, j: usize, keep_mass: bool) -> bool {
        if j == 0 {
            return false;
        }
        let cur = self.lo[j];
        if cur + 1 >= self.hi[j] {
            return false;
        }
        let (a, b) = (self.grid.pos(cur), self.grid.pos(cur + 1));
        if keep_mass && self.cell_count_x[j] <= self.positive_swept_x(a, b) {
            return false;
        }
        self.lo[j] = cur + 1;
        let erased = self.erased();
        self.reclassify(a, b, j, erased);
        true
    }

    /// Lowers `a^-_j` one slot (cell `j` absorbs one guard slot).
    pub fn lower_lo(&mut self, j: usize) -> bool {
        if j == 0 {
            return false;
        }
        let cur = self.lo[j];
        if cur == 0 || cur - 1 < self.hi[j - 1] {
            return false;
        }
        let (a, b) = (self.grid.pos(cur - 1), self.grid.pos(cur));
        self.lo[j] = cur - 1;
        let erased = self.erased();
        self.reclassify(a, b, erased, j);
        true
    }

    pub fn delta(&self, i: usize) -> f64 {
        let n = self.levels + 1;
        self.agg[i * n + i + 1] + self.agg[(i + 1) * n + i]
    }

    pub fn alpha(&self, j: usize) -> f64 {
        self.agg[j * (self.levels + 1) + j]
    }

    pub fn alpha_sum(&self) -> f64 {
        (0..self.levels).map(|j| self.alpha(j)).sum()
    }

    pub fn g_tilde(&self, j: usize) -> Option<f64> {
        let total = self.alpha_sum();
        if total <= 0.0 {
            None
        } else {
            Some(self.alpha(j) / total)
        }
    }

    pub fn g_tilde_entropy_bits(&self) -> Option<f64> {
        let alphas: Vec<f64> = (0..self.levels).map(|j| self.alpha(j)).collect();
        if alphas.iter().sum::<f64>() <= 0.0 {
            None
        } else {
            Some(crate::math::entropy_bits(&alphas))
        }
    }

    /// Materializes the lattice state, with representatives at the marginal
    /// centroid of each cell (midpoint of the finite bounds when a cell
    /// carries no mass).
    pub fn to_quantizer(&self) -> MultiLevelQuantizer {
        let xs = self.p.x_support();
        let cells: Vec<Cell> = (0..self.levels)
            .map(|j| {
                let lo = self.grid.pos(self.lo[j]);
                let hi = self.grid.pos(self.hi[j]);
                let range = atoms_in(xs, lo, hi);
                let mass: f64 = range.clone().map(|u| self.marg_x[u]).sum();
                let rep = if mass > 0.0 {
                    range.map(|u| self.marg_x[u] * xs[u]).sum::<f64>() / mass
                } else if lo == f64::NEG_INFINITY {
                    hi
                } else if hi == f64::INFINITY {
                    lo + 1.0
                } else {
                    0.5 * (lo + hi)
                };
                Cell { lo, hi, rep }
            })
            .collect();
        let q = MultiLevelQuantizer::new(
            cells.iter().map(|c| (c.lo, c.hi)).collect(),
            cells.iter().map(|c| c.rep).collect(),
        );
        q.expect("lattice invariants imply quantizer invariants")
    }
}
