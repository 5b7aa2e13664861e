//! Baseline quantizers the design loop is compared against.
//!
//! All three build their levels from the first-axis marginal only — uniform
//! spread over the support span, Lloyd-Max distortion-optimal levels, or
//! maximum-entropy quantile cells — and then grow every guard band
//! symmetrically until the symbol error rate meets the target. None of them
//! re-balances the retained level law, which is why their conditional
//! entropy falls short of `b` bits.

use super::blocks::resolve_step;
use super::emem::DesignReport;
use super::joint::JointDistribution;
use super::metrics::CellMatrix;
use super::{Cell, MultiLevelQuantizer, QuantizerError};

/// Fixed point tolerance of the Lloyd-Max iteration.
const LLOYD_TOL: f64 = 1e-9;
const LLOYD_MAX_ITERS: usize = 10_000;

fn atoms_in(support: &[f64], a: f64, b: f64) -> std::ops::Range<usize> {
    let lo = support.partition_point(|&x| x <= a);
    let hi = support.partition_point(|&x| x <= b);
    lo..hi
}

fn centroid(xs: &[f64], mass: &[f64], range: std::ops::Range<usize>) -> Option<f64> {
    let total: f64 = range.clone().map(|u| mass[u]).sum();
    if total > 0.0 {
        Some(range.map(|u| mass[u] * xs[u]).sum::<f64>() / total)
    } else {
        None
    }
}

/// Levels and interior boundaries of the uniform quantizer: `2^b` equal
/// cells over the support span, representatives at the cell centers.
fn uniform_levels(p: &JointDistribution, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = *p.x_support().first().expect("nonempty support");
    let hi = *p.x_support().last().expect("nonempty support");
    let width = (hi - lo) / levels as f64;
    let bounds: Vec<f64> = (1..levels).map(|k| lo + k as f64 * width).collect();
    let reps: Vec<f64> = (0..levels)
        .map(|k| lo + (k as f64 + 0.5) * width)
        .collect();
    (reps, bounds)
}

/// Standard two-step Lloyd iteration on the marginal to the fixed point:
/// boundaries at level midpoints, levels at cell centroids.
fn lloyd_max_levels(p: &JointDistribution, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let xs = p.x_support();
    let mass = p.marginal_x();
    let (mut reps, _) = uniform_levels(p, levels);
    let mut bounds = vec![0.0; levels - 1];
    for _ in 0..LLOYD_MAX_ITERS {
        for (k, b) in bounds.iter_mut().enumerate() {
            *b = 0.5 * (reps[k] + reps[k + 1]);
        }
        let mut max_shift = 0.0f64;
        for j in 0..levels {
            let lo = if j == 0 { f64::NEG_INFINITY } else { bounds[j - 1] };
            let hi = if j == levels - 1 { f64::INFINITY } else { bounds[j] };
            if let Some(c) = centroid(xs, &mass, atoms_in(xs, lo, hi)) {
                max_shift = max_shift.max((c - reps[j]).abs());
                reps[j] = c;
            }
        }
        if max_shift < LLOYD_TOL {
            break;
        }
    }
    for (k, b) in bounds.iter_mut().enumerate() {
        *b = 0.5 * (reps[k] + reps[k + 1]);
    }
    (reps, bounds)
}

/// Quantile cells of the marginal: each holds at least `1/2^b` of the mass;
/// boundaries sit between atoms. An atom heavy enough to cross several
/// quantile targets gets the corresponding boundaries spread through the gap
/// to its successor, leaving empty sliver cells rather than an invalid
/// structure.
fn maxent_levels(p: &JointDistribution, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let xs = p.x_support();
    let mass = p.marginal_x();
    let target = 1.0 / levels as f64;
    let mut crossings = vec![0usize; xs.len()];
    let mut cum = 0.0;
    let mut next = 1usize;
    for (u, &m) in mass.iter().enumerate() {
        cum += m;
        while next < levels && cum >= next as f64 * target - 1e-12 {
            crossings[u] += 1;
            next += 1;
        }
    }
    let mut bounds = Vec::with_capacity(levels - 1);
    for (u, &c) in crossings.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let gap_end = if u + 1 < xs.len() { xs[u + 1] } else { xs[u] + 2.0 };
        let gap = gap_end - xs[u];
        for t in 0..c {
            bounds.push(xs[u] + gap * (t as f64 + 1.0) / (c as f64 + 1.0));
        }
    }
    while bounds.len() < levels - 1 {
        // Marginal ran out of atoms; stack the remaining boundaries past the
        // support so the quantizer stays structurally valid.
        let last = bounds.last().copied().unwrap_or(*xs.last().unwrap());
        bounds.push(last + 1.0);
    }
    let mut reps = Vec::with_capacity(levels);
    for j in 0..levels {
        let lo = if j == 0 { f64::NEG_INFINITY } else { bounds[j - 1] };
        let hi = if j == levels - 1 { f64::INFINITY } else { bounds[j] };
        let rep = centroid(xs, &mass, atoms_in(xs, lo, hi))
            .unwrap_or(if hi.is_finite() { hi } else { lo + 1.0 });
        reps.push(rep);
    }
    (reps, bounds)
}

fn quantizer_from(reps: &[f64], bounds: &[f64]) -> Result<MultiLevelQuantizer, QuantizerError> {
    let levels = reps.len();
    let cells: Vec<Cell> = (0..levels)
        .map(|j| Cell {
            lo: if j == 0 { f64::NEG_INFINITY } else { bounds[j - 1] },
            hi: if j == levels - 1 { f64::INFINITY } else { bounds[j] },
            rep: reps[j],
        })
        .collect();
    MultiLevelQuantizer::new(
        cells.iter().map(|c| (c.lo, c.hi)).collect(),
        cells.iter().map(|c| c.rep).collect(),
    )
}

/// Grows all guard bands symmetrically until the symbol error rate meets the
/// target; fails if a representative would leave its cell first.
fn grow_guards_to_target(
    reps: Vec<f64>,
    bounds: Vec<f64>,
    p: &JointDistribution,
    step: f64,
    ser_target: f64,
) -> Result<(MultiLevelQuantizer, u32), QuantizerError> {
    let levels = reps.len();
    let mut cell_hi: Vec<f64> = bounds.clone(); // upper edge of cell j
    let mut next_lo: Vec<f64> = bounds; // lower edge of cell j+1
    let mut steps = 0u32;
    loop {
        let q = quantizer_from_edges(&reps, &cell_hi, &next_lo)?;
        let m = CellMatrix::compute(&q, p);
        let pc = m.p_c();
        let ser = if pc > 0.0 { m.p_cm() / pc } else { 0.0 };
        if pc > 0.0 && ser <= ser_target {
            return Ok((q, steps));
        }
        // Widen every guard by one step.
        let mut moved = false;
        for i in 0..levels - 1 {
            if cell_hi[i] - step > reps[i] {
                cell_hi[i] -= step;
                moved = true;
            }
            if next_lo[i] + step < reps[i + 1] {
                next_lo[i] += step;
                moved = true;
            }
        }
        if !moved {
            return Err(QuantizerError::TargetUnreachable);
        }
        steps += 1;
    }
}

fn quantizer_from_edges(
    reps: &[f64],
    cell_hi: &[f64],
    next_lo: &[f64],
) -> Result<MultiLevelQuantizer, QuantizerError> {
    let levels = reps.len();
    let cells: Vec<Cell> = (0..levels)
        .map(|j| Cell {
            lo: if j == 0 {
                f64::NEG_INFINITY
            } else {
                next_lo[j - 1]
            },
            hi: if j == levels - 1 {
                f64::INFINITY
            } else {
                cell_hi[j]
            },
            rep: reps[j],
        })
        .collect();
    MultiLevelQuantizer::new(
        cells.iter().map(|c| (c.lo, c.hi)).collect(),
        cells.iter().map(|c| c.rep).collect(),
    )
}

#[derive(Debug, Clone, Copy)]
enum BaselineKind {
    Uniform,
    MaxLloyd,
    MarginalMaxent,
}

fn run_baseline(
    kind: BaselineKind,
    p: &JointDistribution,
    bits: u32,
    step: Option<f64>,
    ser_target: f64,
) -> Result<DesignReport, QuantizerError> {
    if bits == 0 || bits > 16 {
        return Err(QuantizerError::InvalidLevelCount(if bits == 0 { 1 } else { 0 }));
    }
    if !(ser_target > 0.0) {
        return Err(QuantizerError::InvalidEta(ser_target));
    }
    let step = resolve_step(p, step)?;
    let levels = 1usize << bits;
    let (reps, bounds) = match kind {
        BaselineKind::Uniform => uniform_levels(p, levels),
        BaselineKind::MaxLloyd => lloyd_max_levels(p, levels),
        BaselineKind::MarginalMaxent => maxent_levels(p, levels),
    };
    quantizer_from(&reps, &bounds)?;
    let (quantizer, steps) = grow_guards_to_target(reps, bounds, p, step, ser_target)?;
    let m = CellMatrix::compute(&quantizer, p);
    let p_c = m.p_c();
    let p_cm = m.p_cm();
    let ser = if p_c > 0.0 { p_cm / p_c } else { 0.0 };
    let feasible = ser <= ser_target;
    Ok(DesignReport {
        conditional_entropy_bits: m.conditional_entropy_bits().unwrap_or(0.0),
        quantizer,
        p_c,
        p_cm,
        ser,
        eta_used: ser_target,
        excursion_e: 1,
        feasible,
        converged: feasible,
        iterations: steps,
    })
}

/// `2^b` levels uniformly spread over the support span, then guard growth to
/// the error target.
pub fn baseline_uniform(
    p: &JointDistribution,
    bits: u32,
    step: Option<f64>,
    ser_target: f64,
) -> Result<DesignReport, QuantizerError> {
    run_baseline(BaselineKind::Uniform, p, bits, step, ser_target)
}

/// Lloyd-Max distortion-optimal levels on the marginal, then guard growth to
/// the error target.
pub fn baseline_max_lloyd(
    p: &JointDistribution,
    bits: u32,
    step: Option<f64>,
    ser_target: f64,
) -> Result<DesignReport, QuantizerError> {
    run_baseline(BaselineKind::MaxLloyd, p, bits, step, ser_target)
}

/// Marginal maximum-entropy (quantile) cells, then guard growth to the error
/// target.
pub fn baseline_marginal_maxent(
    p: &JointDistribution,
    bits: u32,
    step: Option<f64>,
    ser_target: f64,
) -> Result<DesignReport, QuantizerError> {
    run_baseline(BaselineKind::MarginalMaxent, p, bits, step, ser_target)
}

#[cfg(test)]
mod tests {
    use super::super::SupportKind;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_two_point_source_all_baselines_coincide() {
        let p = JointDistribution::from_grid(
            vec![-1.0, 1.0],
            vec![-1.0, 1.0],
            vec![0.5, 0.0, 0.0, 0.5],
            SupportKind::ExactPmf,
        )
        .unwrap();
        let target = 1e-3;
        let u = baseline_uniform(&p, 1, None, target).unwrap();
        let l = baseline_max_lloyd(&p, 1, None, target).unwrap();
        let m = baseline_marginal_maxent(&p, 1, None, target).unwrap();
        for r in [&u, &l, &m] {
            assert!(r.feasible);
            // The single boundary sits at the symmetry center.
            let mid = 0.5 * (r.quantizer.cells()[0].hi + r.quantizer.cells()[1].lo);
            assert_abs_diff_eq!(mid, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.conditional_entropy_bits, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lloyd_max_matches_published_gaussian_levels() {
        // Four-level Lloyd-Max on the standard Gaussian: +-0.4528, +-1.510.
        // The marginal must be finely discretized for the fixed point to
        // land within 1e-3 of the continuous one; the y axis is irrelevant
        // to the level construction.
        let bins = 32_768usize;
        let half = 5.0;
        let width = 2.0 * half / bins as f64;
        let xs: Vec<f64> = (0..bins).map(|k| -half + (k as f64 + 0.5) * width).collect();
        let mut mass = Vec::with_capacity(bins * 2);
        for &x in &xs {
            let m = (-0.5 * x * x).exp();
            mass.push(m);
            mass.push(m);
        }
        let p = JointDistribution::from_grid(xs, vec![-1.0, 1.0], mass, SupportKind::Histogram)
            .unwrap();
        let (reps, bounds) = lloyd_max_levels(&p, 4);
        assert_abs_diff_eq!(reps[0], -1.5104, epsilon = 1e-3);
        assert_abs_diff_eq!(reps[1], -0.4528, epsilon = 1e-3);
        assert_abs_diff_eq!(reps[2], 0.4528, epsilon = 1e-3);
        assert_abs_diff_eq!(reps[3], 1.5104, epsilon = 1e-3);
        assert_abs_diff_eq!(bounds[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn unreachable_target_is_reported() {
        // Independent uniform atoms: the error rate cannot be reduced below
        // one half by growing guards.
        let p = JointDistribution::from_grid(
            vec![-1.0, 1.0],
            vec![-1.0, 1.0],
            vec![0.25, 0.25, 0.25, 0.25],
            SupportKind::ExactPmf,
        )
        .unwrap();
        assert!(matches!(
            baseline_uniform(&p, 1, None, 1e-3),
            Err(QuantizerError::TargetUnreachable)
        ));
    }
}
