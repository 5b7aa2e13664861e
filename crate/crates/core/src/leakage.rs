//! Empirical leakage estimation: how much the phase-4 broadcast tells an
//! eavesdropper about the CSR.
//!
//! The ring exchange is verified two ways. The structural check walks every
//! broadcast symbol and confirms that conditioning on it only permutes the
//! CSR alphabet (group translation is a bijection), which forces the
//! conditional distribution to equal the marginal. The statistical check
//! estimates plug-in mutual information from samples and compares it against
//! the Miller-Madow bias bound plus jackknife standard errors, because a
//! plug-in estimate is never exactly zero at finite sample size.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::constellation::{map_affine_phi, theta_inverse, theta_map, RegularQam, SourceConstellation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LeakageError {
    #[error("cannot compute entropies of an empty tally")]
    EmptyCounts,
}

/// Exact joint frequency grid over two finite alphabets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteJointCounts<SX, SY = SX> {
    alphabet_x: Vec<SX>,
    alphabet_y: Vec<SY>,
    counts: Vec<u64>,
    total: u64,
}

/// Tallies symbol pairs into a joint count grid. Alphabets are the observed
/// distinct symbols in sorted order.
pub fn tally<SX, SY, I>(pairs: I) -> DiscreteJointCounts<SX, SY>
where
    SX: Ord + Clone,
    SY: Ord + Clone,
    I: IntoIterator<Item = (SX, SY)>,
{
    let mut map: BTreeMap<(SX, SY), u64> = BTreeMap::new();
    for pair in pairs {
        *map.entry(pair).or_insert(0) += 1;
    }
    tally_from_counts(map)
}

impl<SX: Ord + Clone, SY: Ord + Clone> DiscreteJointCounts<SX, SY> {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn alphabet_x(&self) -> &[SX] {
        &self.alphabet_x
    }

    pub fn alphabet_y(&self) -> &[SY] {
        &self.alphabet_y
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.alphabet_y.len() + j]
    }

    /// Merges two tallies by elementwise count addition (partitioned sample
    /// streams reduce with this).
    pub fn merge(&self, other: &Self) -> Self {
        let mut map: BTreeMap<(SX, SY), u64> = BTreeMap::new();
        for part in [self, other] {
            for (i, x) in part.alphabet_x.iter().enumerate() {
                for (j, y) in part.alphabet_y.iter().enumerate() {
                    let n = part.count(i, j);
                    if n > 0 {
                        *map.entry((x.clone(), y.clone())).or_insert(0) += n;
                    }
                }
            }
        }
        tally_from_counts(map)
    }

    fn row_sums(&self) -> Vec<u64> {
        (0..self.alphabet_x.len())
            .map(|i| (0..self.alphabet_y.len()).map(|j| self.count(i, j)).sum())
            .collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        (0..self.alphabet_y.len())
            .map(|j| (0..self.alphabet_x.len()).map(|i| self.count(i, j)).sum())
            .collect()
    }

    /// Plug-in marginal entropy `H(X)` in bits.
    pub fn marginal_entropy_x_bits(&self) -> Result<f64, LeakageError> {
        if self.total == 0 {
            return Err(LeakageError::EmptyCounts);
        }
        let n = self.total as f64;
        Ok(-self
            .row_sums()
            .iter()
            .map(|&r| crate::math::xlog2x(r as f64 / n))
            .sum::<f64>())
    }

    /// Plug-in conditional entropy `H(X | Y)` in bits.
    pub fn conditional_entropy_bits(&self) -> Result<f64, LeakageError> {
        if self.total == 0 {
            return Err(LeakageError::EmptyCounts);
        }
        let n = self.total as f64;
        let mut h = 0.0;
        for (j, &c) in self.col_sums().iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut h_col = 0.0;
            for i in 0..self.alphabet_x.len() {
                h_col -= crate::math::xlog2x(self.count(i, j) as f64 / c as f64);
            }
            h += c as f64 / n * h_col;
        }
        Ok(h)
    }

    /// Plug-in mutual information `I(X; Y) = H(X) - H(X | Y)` in bits. The
    /// estimate carries a positive finite-sample bias; compare against
    /// [`Self::bias_bound_bits`].
    pub fn mutual_information_bits(&self) -> Result<f64, LeakageError> {
        Ok(self.marginal_entropy_x_bits()? - self.conditional_entropy_bits()?)
    }

    /// Miller-Madow style bias bound `(|X| - 1)(|Y| - 1) / (2 N ln 2)` bits.
    pub fn bias_bound_bits(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let dx = self.alphabet_x.len().saturating_sub(1) as f64;
        let dy = self.alphabet_y.len().saturating_sub(1) as f64;
        dx * dy / (2.0 * self.total as f64 * std::f64::consts::LN_2)
    }

    /// Leave-one-out jackknife standard error of the plug-in mutual
    /// information, in bits.
    pub fn jackknife_se_bits(&self) -> Result<f64, LeakageError> {
        if self.total < 2 {
            return Err(LeakageError::EmptyCounts);
        }
        // I = [S1 - S2 - S3 + N ln N] / (N ln 2) with S1 = sum n ln n over
        // cells, S2/S3 the same over row/column sums. Removing one sample
        // from cell (i, j) touches one term of each sum, so every
        // leave-one-out estimate is O(1).
        fn xlnx(x: f64) -> f64 {
            if x <= 0.0 {
                0.0
            } else {
                x * x.ln()
            }
        }
        let rows = self.row_sums();
        let cols = self.col_sums();
        let s1: f64 = self.counts.iter().map(|&c| xlnx(c as f64)).sum();
        let s2: f64 = rows.iter().map(|&c| xlnx(c as f64)).sum();
        let s3: f64 = cols.iter().map(|&c| xlnx(c as f64)).sum();
        let n = self.total as f64;
        let n1 = n - 1.0;
        let ln2 = std::f64::consts::LN_2;

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..self.alphabet_x.len() {
            for j in 0..self.alphabet_y.len() {
                let c = self.count(i, j) as f64;
                if c == 0.0 {
                    continue;
                }
                let s1_i = s1 - xlnx(c) + xlnx(c - 1.0);
                let s2_i = s2 - xlnx(rows[i] as f64) + xlnx(rows[i] as f64 - 1.0);
                let s3_i = s3 - xlnx(cols[j] as f64) + xlnx(cols[j] as f64 - 1.0);
                let mi_i = (s1_i - s2_i - s3_i + n1 * n1.ln()) / (n1 * ln2);
                sum += c * mi_i;
                sum_sq += c * mi_i * mi_i;
            }
        }
        let mean = sum / n;
        let var = (n1 / n) * (sum_sq - n * mean * mean).max(0.0);
        Ok(var.sqrt())
    }
}

fn tally_from_counts<SX: Ord + Clone, SY: Ord + Clone>(
    map: BTreeMap<(SX, SY), u64>,
) -> DiscreteJointCounts<SX, SY> {
    let mut xs: Vec<SX> = map.keys().map(|(x, _)| x.clone()).collect();
    xs.dedup();
    let mut ys: Vec<SY> = map.keys().map(|(_, y)| y.clone()).collect();
    ys.sort();
    ys.dedup();
    let mut counts = vec![0u64; xs.len() * ys.len()];
    let mut total = 0u64;
    for ((x, y), n) in &map {
        let i = xs.binary_search(x).expect("alphabet built from keys");
        let j = ys.binary_search(y).expect("alphabet built from keys");
        counts[i * ys.len() + j] = *n;
        total += n;
    }
    DiscreteJointCounts {
        alphabet_x: xs,
        alphabet_y: ys,
        counts,
        total,
    }
}

/// Structural zero-leakage check: for every broadcast symbol `c`, the map
/// `b -> theta_inverse(phi(c) - theta(b))` must permute the source alphabet.
/// When it does, conditioning the CSR on the broadcast only relabels the
/// second estimate's distribution, so no information leaks.
pub fn theorem1_exact_check(a: &SourceConstellation) -> bool {
    let qam = match RegularQam::new(a.m()) {
        Ok(q) => q,
        Err(_) => return false,
    };
    let side = a.side();
    for c in qam.points() {
        let phi_c = match map_affine_phi(c, &qam) {
            Ok(x) => x,
            Err(_) => return false,
        };
        let mut seen = vec![false; side * side];
        for re_rank in 0..side as u16 {
            for im_rank in 0..side as u16 {
                let b = crate::constellation::SourcePoint::new(re_rank, im_rank);
                let tb = match theta_map(b, &qam) {
                    Ok(x) => x,
                    Err(_) => return false,
                };
                let diff = match phi_c.sub(&tb) {
                    Ok(x) => x,
                    Err(_) => return false,
                };
                let image = match theta_inverse(diff, &qam) {
                    Ok(p) => p,
                    Err(_) => return false,
                };
                let idx = image.re_rank as usize * side + image.im_rank as usize;
                if seen[idx] {
                    return false;
                }
                seen[idx] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return false;
        }
    }
    true
}

/// Uniform per-component binning of a complex value onto a
/// `bins x bins` grid covering `[-half_span, half_span]` on each axis;
/// out-of-range values clamp to the edge bins.
pub fn bin_complex(v: Complex64, bins: usize, half_span: f64) -> (u16, u16) {
    let bin = |x: f64| -> u16 {
        let t = (x + half_span) / (2.0 * half_span) * bins as f64;
        (t.floor().clamp(0.0, bins as f64 - 1.0)) as u16
    };
    (bin(v.re), bin(v.im))
}

/// One leakage measurement, ready for JSON export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeakageReport {
    pub protocol: String,
    pub m: u32,
    pub snr_db: f64,
    pub samples: u64,
    pub h_marginal_bits: f64,
    pub h_conditional_bits: f64,
    pub mi_bits: f64,
    pub bias_bound_bits: f64,
    pub jackknife_se_bits: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_tally_rejects_entropies() {
        let t = tally(Vec::<(u8, u8)>::new());
        assert_eq!(t.total(), 0);
        assert_eq!(t.conditional_entropy_bits(), Err(LeakageError::EmptyCounts));
        assert_eq!(t.mutual_information_bits(), Err(LeakageError::EmptyCounts));
    }

    #[test]
    fn repeated_pair_counts() {
        let t = tally(vec![(1u8, 2u8), (1, 2)]);
        assert_eq!(t.count(0, 0), 2);
        assert_eq!(t.total(), 2);
    }

    #[test]
    fn independent_uniform_conditional_entropy() {
        // X uniform over 4 symbols, independent of Y: H(X|Y) = 2 bits.
        let mut pairs = Vec::new();
        for x in 0u8..4 {
            for y in 0u8..3 {
                pairs.push((x, y));
            }
        }
        let t = tally(pairs);
        assert_abs_diff_eq!(t.conditional_entropy_bits().unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.mutual_information_bits().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_coupling() {
        let pairs: Vec<(u8, u8)> = (0..64).map(|i| (i % 4, i % 4)).collect();
        let t = tally(pairs);
        assert_abs_diff_eq!(t.conditional_entropy_bits().unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.mutual_information_bits().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn merge_adds_counts() {
        let t1 = tally(vec![(0u8, 0u8), (0, 1)]);
        let t2 = tally(vec![(0u8, 1u8), (2, 0)]);
        let m = t1.merge(&t2);
        assert_eq!(m.total(), 4);
        let full = tally(vec![(0u8, 0u8), (0, 1), (0, 1), (2, 0)]);
        assert_eq!(m, full);
    }

    #[test]
    fn structural_check_passes_for_small_alphabets() {
        for m in [2u32, 4] {
            let a = SourceConstellation::uniform_inducing(m, 1.0).unwrap();
            assert!(theorem1_exact_check(&a), "m = {m}");
        }
    }

    #[test]
    fn clamped_subtraction_breaks_the_permutation() {
        // Negative control: ordinary subtraction clamped at zero is not a
        // group operation, and the per-symbol image sets collide.
        let a = SourceConstellation::uniform_inducing(2, 1.0).unwrap();
        let qam = RegularQam::new(a.m()).unwrap();
        let side = a.side();
        let mut all_bijective = true;
        for c in qam.points() {
            let phi_c = map_affine_phi(c, &qam).unwrap();
            let mut seen = vec![false; side * side];
            let mut collision = false;
            for re_rank in 0..side as u16 {
                for im_rank in 0..side as u16 {
                    let b = crate::constellation::SourcePoint::new(re_rank, im_rank);
                    let tb = theta_map(b, &qam).unwrap();
                    let clamped_re = phi_c.re().saturating_sub(tb.re());
                    let clamped_im = phi_c.im().saturating_sub(tb.im());
                    let idx = clamped_re as usize * side + clamped_im as usize;
                    if seen[idx] {
                        collision = true;
                    }
                    seen[idx] = true;
                }
            }
            if collision {
                all_bijective = false;
            }
        }
        assert!(!all_bijective);
    }

    #[test]
    fn binning_clamps_to_edges() {
        assert_eq!(bin_complex(Complex64::new(-99.0, 99.0), 64, 3.0), (0, 63));
        let (bx, by) = bin_complex(Complex64::new(0.0, -0.01), 64, 3.0);
        assert_eq!(bx, 32);
        assert_eq!(by, 31);
    }

    proptest! {
        #[test]
        fn tally_is_permutation_invariant(mut pairs in proptest::collection::vec((0u8..6, 0u8..6), 0..200), seed in 0u64..1000) {
            let t1 = tally(pairs.clone());
            // Deterministic shuffle driven by the seed.
            let n = pairs.len();
            let mut state = seed.wrapping_add(0x9E3779B97F4A7C15);
            for i in (1..n).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                pairs.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let t2 = tally(pairs);
            prop_assert_eq!(t1, t2);
        }
    }
}
