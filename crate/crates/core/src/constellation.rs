//! Source and transmit constellations plus the mapping chain between them.
//!
//! Three alphabets of size `2^m` (even `m`) are in play:
//!
//! * the source alphabet `A = A_I + i A_Q` used to quantize channel
//!   estimates, built either to induce a uniform output distribution on a
//!   Gaussian input (quantile decision regions, centroid levels) or as a
//!   regular square QAM with nearest-neighbor regions;
//! * the regular square QAM alphabet with odd-integer coordinates, used for
//!   the broadcast;
//! * the ring `Z_{2^{m/2}}[i]` where the broadcast combination is computed.
//!
//! `psi` maps component ranks of `A` onto QAM coordinates, the affine map
//! takes QAM coordinates onto ring coordinates, and `theta` is their
//! composition. All three are bijections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{normal_pdf, normal_quantile};
use crate::ring::RingElement;

#[derive(Debug, Error, PartialEq)]
pub enum ConstellationError {
    #[error("constellation size exponent must be a positive even integer, got {0}")]
    InvalidSizeExponent(u32),
    #[error("marginal standard deviation must be positive and finite, got {0}")]
    InvalidStd(f64),
    #[error("component rank {0} is outside the 2^(m/2) = {1} levels")]
    RankOutOfRange(u16, usize),
    #[error("{0}+{1}i is not a point of the regular QAM alphabet")]
    NotQamPoint(i64, i64),
    #[error("ring modulus {0} does not match the constellation side {1}")]
    ModulusMismatch(u32, u32),
    #[error("{0} is not a constellation level")]
    NotALevel(f64),
    #[error("invalid constellation document: {0}")]
    InvalidDocument(String),
}

/// Point of the source alphabet, identified by the ranks of its in-phase and
/// quadrature components in the ordered level list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourcePoint {
    pub re_rank: u16,
    pub im_rank: u16,
}

impl SourcePoint {
    pub fn new(re_rank: u16, im_rank: u16) -> Self {
        Self { re_rank, im_rank }
    }
}

/// Point of the regular square QAM alphabet (odd-integer coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QamPoint {
    pub re: i64,
    pub im: i64,
}

impl QamPoint {
    pub fn new(re: i64, im: i64) -> Self {
        Self { re, im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

/// Regular square QAM of size `2^m`: each axis holds the `2^{m/2}` odd
/// integers symmetric about zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegularQam {
    m: u32,
    side: u32,
}

fn check_exponent(m: u32) -> Result<u32, ConstellationError> {
    if m == 0 || m % 2 != 0 || m > 30 {
        return Err(ConstellationError::InvalidSizeExponent(m));
    }
    Ok(1u32 << (m / 2))
}

impl RegularQam {
    pub fn new(m: u32) -> Result<Self, ConstellationError> {
        let side = check_exponent(m)?;
        Ok(Self { m, side })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of levels per axis, `2^{m/2}`.
    pub fn side(&self) -> u32 {
        self.side
    }

    /// `t`-th element (0-based) of the ordered axis `{-side+1, ..., side-1}`.
    pub fn axis_level(&self, t: u16) -> i64 {
        2 * t as i64 - (self.side as i64 - 1)
    }

    pub fn axis(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.side as u16).map(|t| self.axis_level(t))
    }

    pub fn points(&self) -> impl Iterator<Item = QamPoint> + '_ {
        let side = self.side as u16;
        (0..side).flat_map(move |t| (0..side).map(move |u| QamPoint::new(self.axis_level(t), self.axis_level(u))))
    }

    pub fn contains(&self, p: QamPoint) -> bool {
        let max = self.side as i64 - 1;
        [p.re, p.im]
            .into_iter()
            .all(|c| c.abs() <= max && c.rem_euclid(2) == 1)
    }

    /// Average symbol energy over the alphabet, `2 (2^m - 1) / 3`.
    pub fn avg_energy(&self) -> f64 {
        let sq = (self.side as f64) * (self.side as f64);
        2.0 * (sq - 1.0) / 3.0
    }

    /// Index of the nearest axis level to `x`; a tie on a decision midpoint
    /// resolves to the lower level.
    pub fn nearest_axis_rank(&self, x: f64) -> u16 {
        let side = self.side as f64;
        let k = ((x + side - 2.0) / 2.0).ceil();
        let k = k.clamp(0.0, side - 1.0);
        k as u16
    }
}

/// Source alphabet `A` with its per-component decision regions.
///
/// `levels` are the `2^{m/2}` ordered representative values of each axis and
/// `boundaries` the `2^{m/2} - 1` strictly increasing thresholds between
/// them. A value equal to a threshold falls in the lower cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConstellation {
    m: u32,
    levels: Vec<f64>,
    boundaries: Vec<f64>,
    std: f64,
}

impl SourceConstellation {
    /// Builds the alphabet whose quantizer output is uniform when the input
    /// components are zero-mean Gaussian with standard deviation
    /// `marginal_std`: decision regions are the `k / 2^{m/2}` quantiles and
    /// levels are the conditional means of the cells.
    pub fn uniform_inducing(m: u32, marginal_std: f64) -> Result<Self, ConstellationError> {
        let side = check_exponent(m)? as usize;
        if !(marginal_std.is_finite() && marginal_std > 0.0) {
            return Err(ConstellationError::InvalidStd(marginal_std));
        }
        let n = side as f64;
        let boundaries: Vec<f64> = (1..side)
            .map(|k| marginal_std * normal_quantile(k as f64 / n))
            .collect();
        // Cell k spans (q_{k-1}, q_k] with mass exactly 1/side, so the
        // truncated-Gaussian mean has the closed form below.
        let levels: Vec<f64> = (0..side)
            .map(|k| {
                let pdf_lo = if k == 0 {
                    0.0
                } else {
                    normal_pdf(boundaries[k - 1] / marginal_std)
                };
                let pdf_hi = if k == side - 1 {
                    0.0
                } else {
                    normal_pdf(boundaries[k] / marginal_std)
                };
                marginal_std * n * (pdf_lo - pdf_hi)
            })
            .collect();
        Ok(Self {
            m,
            levels,
            boundaries,
            std: marginal_std,
        })
    }

    /// Regular square QAM scaled to unit average symbol energy, with
    /// nearest-neighbor decision regions (midpoint thresholds).
    pub fn regular_qam(m: u32) -> Result<Self, ConstellationError> {
        let qam = RegularQam::new(m)?;
        let scale = 1.0 / qam.avg_energy().sqrt();
        let levels: Vec<f64> = qam.axis().map(|v| v as f64 * scale).collect();
        let boundaries: Vec<f64> = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            m,
            levels,
            boundaries,
            std: scale,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of levels per axis, `2^{m/2}`.
    pub fn side(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Standard deviation the decision regions were designed for (the scale
    /// factor for the regular-QAM variant).
    pub fn marginal_std(&self) -> f64 {
        self.std
    }

    /// Average symbol energy under a uniform distribution on the alphabet.
    pub fn avg_energy(&self) -> f64 {
        2.0 * self.levels.iter().map(|l| l * l).sum::<f64>() / self.side() as f64
    }

    /// Decision cell of a real component: the number of boundaries strictly
    /// below `x`, so a value on a boundary falls in the lower cell.
    pub fn component_cell(&self, x: f64) -> u16 {
        self.boundaries.partition_point(|&b| b < x) as u16
    }

    /// Per-component quantization of a complex value onto the alphabet.
    pub fn quantize(&self, beta: Complex64) -> SourcePoint {
        SourcePoint::new(self.component_cell(beta.re), self.component_cell(beta.im))
    }

    /// Complex value of an alphabet point.
    pub fn value(&self, p: SourcePoint) -> Complex64 {
        Complex64::new(self.levels[p.re_rank as usize], self.levels[p.im_rank as usize])
    }

    pub fn level(&self, rank: u16) -> f64 {
        self.levels[rank as usize]
    }

    /// Recovers the alphabet point of an exact level pair, e.g. when reading
    /// back an exported trace. Components must match levels bit-exactly.
    pub fn point_of_value(&self, v: Complex64) -> Result<SourcePoint, ConstellationError> {
        let rank_of = |x: f64| -> Result<u16, ConstellationError> {
            self.levels
                .iter()
                .position(|&l| l == x)
                .map(|r| r as u16)
                .ok_or(ConstellationError::NotALevel(x))
        };
        Ok(SourcePoint::new(rank_of(v.re)?, rank_of(v.im)?))
    }

    /// Maximum-likelihood detection of an alphabet point from `y = h * value
    /// / sqrt(e_avg) + noise`: equalizes by the channel estimate and picks
    /// the nearest level per component.
    pub fn detect(&self, y: Complex64, h_est: Complex64, e_avg: f64) -> SourcePoint {
        if h_est.norm_sqr() == 0.0 {
            return SourcePoint::new(0, 0);
        }
        let z = y * e_avg.sqrt() / h_est;
        SourcePoint::new(self.nearest_level_rank(z.re), self.nearest_level_rank(z.im))
    }

    fn nearest_level_rank(&self, x: f64) -> u16 {
        // Midpoint thresholds; ties resolve to the lower level.
        let mut rank = 0usize;
        for k in 0..self.levels.len() - 1 {
            let mid = 0.5 * (self.levels[k] + self.levels[k + 1]);
            if x > mid {
                rank = k + 1;
            } else {
                break;
            }
        }
        rank as u16
    }

    /// JSON document `{m, levels, boundaries, std}` for reuse across runs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constellation serializes")
    }

    pub fn from_json(doc: &str) -> Result<Self, ConstellationError> {
        let c: Self = serde_json::from_str(doc)
            .map_err(|e| ConstellationError::InvalidDocument(e.to_string()))?;
        let side = check_exponent(c.m)? as usize;
        let increasing = |xs: &[f64]| xs.windows(2).all(|w| w[0] < w[1]);
        if c.levels.len() != side
            || c.boundaries.len() != side - 1
            || !increasing(&c.levels)
            || !increasing(&c.boundaries)
        {
            return Err(ConstellationError::InvalidDocument(
                "levels/boundaries do not describe 2^(m/2) ordered cells".into(),
            ));
        }
        Ok(c)
    }
}

/// Rank-preserving map from the source alphabet onto the regular QAM
/// alphabet: the `t`-th level of each axis goes to the `t`-th odd integer.
pub fn map_psi(p: SourcePoint, qam: &RegularQam) -> Result<QamPoint, ConstellationError> {
    let side = qam.side() as usize;
    for rank in [p.re_rank, p.im_rank] {
        if rank as usize >= side {
            return Err(ConstellationError::RankOutOfRange(rank, side));
        }
    }
    Ok(QamPoint::new(qam.axis_level(p.re_rank), qam.axis_level(p.im_rank)))
}

/// Inverse of [`map_psi`].
pub fn map_psi_inverse(p: QamPoint, qam: &RegularQam) -> Result<SourcePoint, ConstellationError> {
    if !qam.contains(p) {
        return Err(ConstellationError::NotQamPoint(p.re, p.im));
    }
    let side = qam.side() as i64;
    let rank = |c: i64| ((c + side - 1) / 2) as u16;
    Ok(SourcePoint::new(rank(p.re), rank(p.im)))
}

/// Affine bijection from QAM coordinates onto ring coordinates:
/// `(c + 2^{m/2} - 1) / 2` per component.
pub fn map_affine_phi(p: QamPoint, qam: &RegularQam) -> Result<RingElement, ConstellationError> {
    if !qam.contains(p) {
        return Err(ConstellationError::NotQamPoint(p.re, p.im));
    }
    let side = qam.side() as i64;
    let fold = |c: i64| ((c + side - 1) / 2) as u32;
    RingElement::new(fold(p.re), fold(p.im), qam.side())
        .map_err(|_| ConstellationError::NotQamPoint(p.re, p.im))
}

/// Inverse of [`map_affine_phi`]: `2x - (2^{m/2} - 1)` per component.
pub fn map_affine_phi_inverse(
    x: RingElement,
    qam: &RegularQam,
) -> Result<QamPoint, ConstellationError> {
    if x.modulus() != qam.side() {
        return Err(ConstellationError::ModulusMismatch(x.modulus(), qam.side()));
    }
    let side = qam.side() as i64;
    let unfold = |c: u32| 2 * c as i64 - (side - 1);
    Ok(QamPoint::new(unfold(x.re()), unfold(x.im())))
}

/// Composite map from the source alphabet onto the ring.
pub fn theta_map(p: SourcePoint, qam: &RegularQam) -> Result<RingElement, ConstellationError> {
    map_affine_phi(map_psi(p, qam)?, qam)
}

/// Inverse of [`theta_map`].
pub fn theta_inverse(x: RingElement, qam: &RegularQam) -> Result<SourcePoint, ConstellationError> {
    map_psi_inverse(map_affine_phi_inverse(x, qam)?, qam)
}
