//! Metric functionals of a quantizer against a joint distribution.
//!
//! Everything reduces to the aggregate mass of cell rectangles: `agg[j][k]`
//! is the probability that the first coordinate quantizes to level `j` and
//! the second to level `k`, with an extra row/column for erased samples.
//! Consensus probability, mismatch mass, the conditional level law `g`, its
//! diagonal approximation `g~`, the diagonal masses `alpha` and the
//! adjacent-pair confusions `delta` all read off this matrix.

use super::{JointDistribution, MultiLevelQuantizer, QuantizedSymbol, QuantizerError};
use crate::math::entropy_bits;

/// Class of a support atom under a quantizer: a level index or erased.
pub(crate) fn classify_axis(support: &[f64], q: &MultiLevelQuantizer) -> Vec<usize> {
    let erased = q.level_count();
    support
        .iter()
        .map(|&x| match q.evaluate(x) {
            QuantizedSymbol::Level(j) => j as usize,
            QuantizedSymbol::Erased => erased,
        })
        .collect()
}

/// Aggregate rectangle masses of a quantizer over a joint grid. Index
/// `levels` holds the erased class.
#[derive(Debug, Clone)]
pub struct CellMatrix {
    levels: usize,
    agg: Vec<f64>,
}

impl CellMatrix {
    pub fn compute(q: &MultiLevelQuantizer, p: &JointDistribution) -> Self {
        let levels = q.level_count();
        let cls_x = classify_axis(p.x_support(), q);
        let cls_y = classify_axis(p.y_support(), q);
        let mut agg = vec![0.0; (levels + 1) * (levels + 1)];
        for (i, &cx) in cls_x.iter().enumerate() {
            let row = p.row(i);
            for (j, &cy) in cls_y.iter().enumerate() {
                agg[cx * (levels + 1) + cy] += row[j];
            }
        }
        Self { levels, agg }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Mass of level rectangle `(j, k)`.
    pub fn level_mass(&self, j: usize, k: usize) -> f64 {
        self.agg[j * (self.levels + 1) + k]
    }

    /// Probability that both samples land in retained cells.
    pub fn p_c(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.levels {
            for k in 0..self.levels {
                s += self.level_mass(j, k);
            }
        }
        s
    }

    /// Off-diagonal retained mass (both retained, different levels).
    pub fn p_cm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.levels {
            for k in 0..self.levels {
                if j != k {
                    s += self.level_mass(j, k);
                }
            }
        }
        s
    }

    /// Diagonal mass of level `j`.
    pub fn alpha(&self, j: usize) -> f64 {
        self.level_mass(j, j)
    }

    pub fn alpha_vector(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.alpha(j)).collect()
    }

    /// Adjacent-pair confusion mass between levels `i` and `i+1`.
    pub fn delta(&self, i: usize) -> f64 {
        self.level_mass(i, i + 1) + self.level_mass(i + 1, i)
    }

    pub fn delta_vector(&self) -> Vec<f64> {
        (0..self.levels.saturating_sub(1)).map(|i| self.delta(i)).collect()
    }

    /// Conditional level law given consensus: row mass over total retained
    /// mass.
    pub fn g_vector(&self) -> Result<Vec<f64>, QuantizerError> {
        let pc = self.p_c();
        if pc <= 0.0 {
            return Err(QuantizerError::ZeroConsensus);
        }
        Ok((0..self.levels)
            .map(|j| (0..self.levels).map(|k| self.level_mass(j, k)).sum::<f64>() / pc)
            .collect())
    }

    /// Diagonal approximation of the level law: `alpha_j / sum(alpha)`.
    pub fn g_tilde_vector(&self) -> Result<Vec<f64>, QuantizerError> {
        let total: f64 = self.alpha_vector().iter().sum();
        if total <= 0.0 {
            return Err(QuantizerError::ZeroConsensus);
        }
        Ok((0..self.levels).map(|j| self.alpha(j) / total).collect())
    }

    /// Entropy in bits of the conditional level law.
    pub fn conditional_entropy_bits(&self) -> Result<f64, QuantizerError> {
        Ok(entropy_bits(&self.g_vector()?))
    }

    /// Entropy in bits of the diagonal approximation.
    pub fn g_tilde_entropy_bits(&self) -> Result<f64, QuantizerError> {
        Ok(entropy_bits(&self.g_tilde_vector()?))
    }
}

/// Probability that both quantized samples are retained.
pub fn consensus_probability(q: &MultiLevelQuantizer, p: &JointDistribution) -> f64 {
    CellMatrix::compute(q, p).p_c()
}

/// Retained-but-disagreeing mass; the symbol error rate is this over the
/// consensus probability.
pub fn mismatch_mass(q: &MultiLevelQuantizer, p: &JointDistribution) -> f64 {
    CellMatrix::compute(q, p).p_cm()
}

/// Conditional entropy in bits of the retained level at the first node given
/// consensus.
pub fn conditional_entropy_bits(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
) -> Result<f64, QuantizerError> {
    CellMatrix::compute(q, p).conditional_entropy_bits()
}

pub fn g_vector(q: &MultiLevelQuantizer, p: &JointDistribution) -> Result<Vec<f64>, QuantizerError> {
    CellMatrix::compute(q, p).g_vector()
}

pub fn g_tilde_vector(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
) -> Result<Vec<f64>, QuantizerError> {
    CellMatrix::compute(q, p).g_tilde_vector()
}

pub fn alpha_vector(q: &MultiLevelQuantizer, p: &JointDistribution) -> Vec<f64> {
    CellMatrix::compute(q, p).alpha_vector()
}

pub fn delta_vector(q: &MultiLevelQuantizer, p: &JointDistribution) -> Vec<f64> {
    CellMatrix::compute(q, p).delta_vector()
}

/// Symbol error rate `p_cm / p_c`; zero when nothing is retained.
pub fn symbol_error_rate(q: &MultiLevelQuantizer, p: &JointDistribution) -> f64 {
    let m = CellMatrix::compute(q, p);
    let pc = m.p_c();
    if pc <= 0.0 {
        0.0
    } else {
        m.p_cm() / pc
    }
}

/// Probability that a window of `e` consecutive positions is retained by
/// both nodes with constant symbols. Samples are independent across
/// positions, so the window probability is the `e`-th power of each
/// rectangle mass.
pub fn excursion_consensus_probability(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
    e: u32,
) -> f64 {
    let m = CellMatrix::compute(q, p);
    let mut s = 0.0;
    for j in 0..m.levels() {
        for k in 0..m.levels() {
            s += m.level_mass(j, k).powi(e as i32);
        }
    }
    s
}

/// Expected retained non-overlapping windows per raw sample at excursion
/// length `e`: each retained start blocks the next `e - 1` positions, so the
/// greedy density is `w / (1 + (e - 1) w)` for window probability `w`.
pub fn excursion_window_rate(q: &MultiLevelQuantizer, p: &JointDistribution, e: u32) -> f64 {
    let w = excursion_consensus_probability(q, p, e);
    w / (1.0 + (e as f64 - 1.0) * w)
}

/// Symbol error rate of the excursion-`e` consensus. Samples are independent
/// across positions, so an excursion of `e` identical symbols at both nodes
/// has probability `level_mass(j, k)^e`.
pub fn excursion_ser(q: &MultiLevelQuantizer, p: &JointDistribution, e: u32) -> f64 {
    let m = CellMatrix::compute(q, p);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..m.levels() {
        for k in 0..m.levels() {
            let w = m.level_mass(j, k).powi(e as i32);
            den += w;
            if j != k {
                num += w;
            }
        }
    }
    if den <= 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Conditional entropy in bits of the excursion-`e` key symbol.
pub fn excursion_conditional_entropy_bits(
    q: &MultiLevelQuantizer,
    p: &JointDistribution,
    e: u32,
) -> Result<f64, QuantizerError> {
    let m = CellMatrix::compute(q, p);
    let rows: Vec<f64> = (0..m.levels())
        .map(|j| {
            (0..m.levels())
                .map(|k| m.level_mass(j, k).powi(e as i32))
                .sum::<f64>()
        })
        .collect();
    if rows.iter().sum::<f64>() <= 0.0 {
        return Err(QuantizerError::ZeroConsensus);
    }
    Ok(entropy_bits(&rows))
}
