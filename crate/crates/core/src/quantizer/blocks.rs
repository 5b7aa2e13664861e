//! The four design blocks.
//!
//! * init: zero-guard maximum-entropy boundaries from the marginal;
//! * error: widens each guard until the adjacent-pair confusion mass drops
//!   below its share of the budget (widening a guard can only shrink the
//!   confusion rectangles, so the loop is monotone);
//! * entropy: translates each guard toward the position where the diagonal
//!   mass ratio crosses `1/2^b` (translation moves the ratio monotonically);
//! * refining: shrinks cells until all diagonal masses match the smallest
//!   one, which restores the entropy equality without narrowing any guard.
//!
//! The public functions are strict: they return an error as soon as a
//! constraint is unreachable. The `run_*` drivers used inside the design
//! loop are lenient: they go as far as the support allows and report whether
//! they were exhausted, so the loop can finish and return an honest
//! non-converged report.

use super::joint::JointDistribution;
use super::lattice::{BlockStatus, DesignState};
use super::{MultiLevelQuantizer, QuantizerError};

pub(crate) fn resolve_step(p: &JointDistribution, step: Option<f64>) -> Result<f64, QuantizerError> {
    let step = step.unwrap_or_else(|| p.default_step());
    if !(step.is_finite() && step > 0.0) {
        return Err(QuantizerError::InvalidStep(step));
    }
    Ok(step)
}

fn delta_bound(eta: f64, levels: usize) -> f64 {
    eta / (levels - 1) as f64
}

/// Slack applied when comparing a confusion mass against its bound, so that
/// incremental float drift does not flip a satisfied constraint.
fn loosened(bound: f64) -> f64 {
    bound * (1.0 + 1e-12) + 1e-15
}

pub(crate) fn run_error_block(st: &mut DesignState, eta: f64) -> BlockStatus {
    let bound = loosened(delta_bound(eta, st.levels()));
    let mut status = BlockStatus::Satisfied;
    for i in 0..st.levels() - 1 {
        let cap = 2 * st.grid_len();
        let mut iters = 0usize;
        while st.delta(i) > bound {
            let before = st.delta(i);
            let count_before = st.cell_count(i) + st.cell_count(i + 1);
            let left = st.lower_hi(i, true);
            let right = st.raise_lo(i + 1, true);
            iters += 1;
            if (!left && !right) || iters > cap {
                if status.is_satisfied() {
                    status = BlockStatus::Exhausted(i);
                }
                break;
            }
            // The ring wraparound puts confusion mass between the outermost
            // levels, which no guard can reach: once eroding real mass stops
            // reducing the confusion, the bound is unreachable and further
            // widening only destroys the design. Undo the useless step.
            let swept_positive = st.cell_count(i) + st.cell_count(i + 1) != count_before;
            if swept_positive && st.delta(i) >= before - 1e-15 {
                if left {
                    let undone = st.raise_hi(i);
                    debug_assert!(undone);
                }
                if right {
                    let undone = st.lower_lo(i + 1);
                    debug_assert!(undone);
                }
                if status.is_satisfied() {
                    status = BlockStatus::Exhausted(i);
                }
                break;
            }
        }
    }
    status
}

pub(crate) fn run_entropy_block(st: &mut DesignState) -> BlockStatus {
    let target = 1.0 / st.levels() as f64;
    let mut status = BlockStatus::Satisfied;
    for j in 0..st.levels() - 1 {
        let cap = 2 * st.grid_len();
        let mut iters = 0usize;
        let g = match st.g_tilde(j) {
            Some(g) => g,
            None => return BlockStatus::Exhausted(j),
        };
        if g < target {
            // Translate the guard right: the diagonal mass of cell j grows.
            while st.g_tilde(j).is_some_and(|g| g < target) {
                let moved = st.raise_lo(j + 1, false) && st.raise_hi(j);
                iters += 1;
                if !moved || iters > cap {
                    if status.is_satisfied() {
                        status = BlockStatus::Exhausted(j);
                    }
                    break;
                }
            }
        } else {
            while st.g_tilde(j).is_some_and(|g| g > target) {
                let moved = st.lower_hi(j, false) && st.lower_lo(j + 1);
                iters += 1;
                if !moved || iters > cap {
                    if status.is_satisfied() {
                        status = BlockStatus::Exhausted(j);
                    }
                    break;
                }
            }
        }
    }
    status
}

pub(crate) fn run_refining_block(st: &mut DesignState) -> BlockStatus {
    let alphas: Vec<f64> = (0..st.levels()).map(|j| st.alpha(j)).collect();
    let alpha_min = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = st_resolution(st);
    if alpha_min <= tol {
        // A starved cell cannot be equalized to; shrinking everything toward
        // it would only erase the design.
        let starved = alphas.iter().position(|&a| a <= tol).unwrap_or(0);
        let already_equal = alphas.iter().all(|&a| a <= alpha_min + tol);
        return if already_equal {
            BlockStatus::Satisfied
        } else {
            BlockStatus::Exhausted(starved)
        };
    }
    let mut status = BlockStatus::Satisfied;
    for j in 0..st.levels() {
        let cap = 2 * st.grid_len();
        let mut iters = 0usize;
        while st.alpha(j) > alpha_min + tol {
            let left = st.raise_lo(j, true);
            let right = st.lower_hi(j, true);
            iters += 1;
            if (!left && !right) || iters > cap {
                if status.is_satisfied() {
                    status = BlockStatus::Exhausted(j);
                }
                break;
            }
        }
    }
    status
}

fn st_resolution(st: &DesignState) -> f64 {
    st.distribution().atom_resolution()
}

/// Zero-guard maximum-entropy initialization: boundaries advance in steps
/// until each cell holds at least `1/2^b` of the marginal mass.
pub fn init_block(
    p: &JointDistribution,
    bits: u32,
    step: Option<f64>,
) -> Result<MultiLevelQuantizer, QuantizerError> {
    if bits == 0 || bits > 16 {
        return Err(QuantizerError::InvalidLevelCount(
            1usize.checked_shl(bits).unwrap_or(0),
        ));
    }
    let step = resolve_step(p, step)?;
    Ok(DesignState::init(p, bits, step)?.to_quantizer())
}

/// Widens each guard until its adjacent-pair confusion mass is within the
/// per-guard budget `eta / (2^b - 1)`; guards already inside the budget are
/// untouched.
pub fn error_block(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
    eta: f64,
    step: Option<f64>,
) -> Result<MultiLevelQuantizer, QuantizerError> {
    if !(eta > 0.0) {
        return Err(QuantizerError::InvalidEta(eta));
    }
    let step = resolve_step(p, step)?;
    let mut st = DesignState::from_quantizer(p, q, step)?;
    match run_error_block(&mut st, eta) {
        BlockStatus::Satisfied => Ok(st.to_quantizer()),
        BlockStatus::Exhausted(guard) => Err(QuantizerError::GuardExhausted { guard }),
    }
}

/// Translates each guard until the diagonal mass ratio of the cell to its
/// left crosses `1/2^b`; widths are preserved.
pub fn entropy_block(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
    step: Option<f64>,
) -> Result<MultiLevelQuantizer, QuantizerError> {
    let step = resolve_step(p, step)?;
    let mut st = DesignState::from_quantizer(p, q, step)?;
    match run_entropy_block(&mut st) {
        BlockStatus::Satisfied => Ok(st.to_quantizer()),
        BlockStatus::Exhausted(guard) => Err(QuantizerError::TranslationExhausted { guard }),
    }
}

/// Shrinks every cell toward the smallest diagonal mass, equalizing the
/// retained level law; guards only grow, so the confusion constraint is
/// preserved.
pub fn refining_block(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
    step: Option<f64>,
) -> Result<MultiLevelQuantizer, QuantizerError> {
    let step = resolve_step(p, step)?;
    let mut st = DesignState::from_quantizer(p, q, step)?;
    match run_refining_block(&mut st) {
        BlockStatus::Satisfied => Ok(st.to_quantizer()),
        BlockStatus::Exhausted(cell) => Err(QuantizerError::CellCollapsed { cell }),
    }
}
