//! Discrete two-dimensional mass grids the quantizer is designed against.
//!
//! Both exact pmfs over finite supports (quantized CSR) and histograms of
//! continuous samples reduce to the same structure: ordered support grids
//! and a normalized mass matrix. Histograms use 512 bins per axis spanning
//! five marginal standard deviations, which resolves guard placement well
//! below the design step size.

use super::QuantizerError;

pub const HISTOGRAM_BINS: usize = 512;
pub const HISTOGRAM_SPAN_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportKind {
    /// Exact pmf on a discrete alphabet; boundaries move between atoms.
    ExactPmf,
    /// Histogram of a continuous source; boundaries move on a uniform step
    /// grid.
    Histogram,
}

/// Joint probability mass grid with strictly increasing supports; the mass
/// matrix is row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    x_support: Vec<f64>,
    y_support: Vec<f64>,
    mass: Vec<f64>,
    kind: SupportKind,
}

fn validate_support(s: &[f64]) -> Result<(), QuantizerError> {
    if s.is_empty() {
        return Err(QuantizerError::InvalidDistribution("empty support".into()));
    }
    if !s.iter().all(|x| x.is_finite()) {
        return Err(QuantizerError::InvalidDistribution(
            "support contains non-finite values".into(),
        ));
    }
    if !s.windows(2).all(|w| w[0] < w[1]) {
        return Err(QuantizerError::InvalidDistribution(
            "support is not strictly increasing".into(),
        ));
    }
    Ok(())
}

impl JointDistribution {
    /// Builds a grid from raw weights, normalizing them to total mass one.
    pub fn from_grid(
        x_support: Vec<f64>,
        y_support: Vec<f64>,
        mass: Vec<f64>,
        kind: SupportKind,
    ) -> Result<Self, QuantizerError> {
        validate_support(&x_support)?;
        validate_support(&y_support)?;
        if mass.len() != x_support.len() * y_support.len() {
            return Err(QuantizerError::InvalidDistribution(format!(
                "mass grid has {} entries for a {}x{} support",
                mass.len(),
                x_support.len(),
                y_support.len()
            )));
        }
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(QuantizerError::InvalidDistribution(
                "mass entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(QuantizerError::InvalidDistribution("total mass is zero".into()));
        }
        let mass = mass.iter().map(|&m| m / total).collect();
        Ok(Self {
            x_support,
            y_support,
            mass,
            kind,
        })
    }

    /// Exact empirical pmf of sample pairs over given supports. Sample
    /// values must match a support point bit-exactly (quantized traces do).
    pub fn from_discrete_pairs_with_support(
        x_support: Vec<f64>,
        y_support: Vec<f64>,
        pairs: &[(f64, f64)],
    ) -> Result<Self, QuantizerError> {
        validate_support(&x_support)?;
        validate_support(&y_support)?;
        if pairs.is_empty() {
            return Err(QuantizerError::InvalidDistribution("no sample pairs".into()));
        }
        let ny = y_support.len();
        let mut mass = vec![0.0; x_support.len() * ny];
        for &(x, y) in pairs {
            let i = x_support
                .binary_search_by(|s| s.partial_cmp(&x).expect("finite support"))
                .map_err(|_| {
                    QuantizerError::InvalidDistribution(format!("{x} is not a support point"))
                })?;
            let j = y_support
                .binary_search_by(|s| s.partial_cmp(&y).expect("finite support"))
                .map_err(|_| {
                    QuantizerError::InvalidDistribution(format!("{y} is not a support point"))
                })?;
            mass[i * ny + j] += 1.0;
        }
        Self::from_grid(x_support, y_support, mass, SupportKind::ExactPmf)
    }

    /// Exact empirical pmf with the support taken from the observed values.
    pub fn from_discrete_pairs(pairs: &[(f64, f64)]) -> Result<Self, QuantizerError> {
        if pairs.is_empty() {
            return Err(QuantizerError::InvalidDistribution("no sample pairs".into()));
        }
        let mut xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            v.dedup();
        }
        Self::from_discrete_pairs_with_support(xs, ys, pairs)
    }

    /// Histogram of continuous sample pairs: `bins` per axis spanning
    /// `span_sigmas` empirical standard deviations around the empirical
    /// means; out-of-range samples clamp to the edge bins.
    pub fn from_continuous_pairs(
        pairs: &[(f64, f64)],
        bins: usize,
        span_sigmas: f64,
    ) -> Result<Self, QuantizerError> {
        if pairs.is_empty() || bins < 2 {
            return Err(QuantizerError::InvalidDistribution(
                "need sample pairs and at least two bins".into(),
            ));
        }
        let n = pairs.len() as f64;
        let stats = |get: &dyn Fn(&(f64, f64)) -> f64| {
            let mean = pairs.iter().map(|p| get(p)).sum::<f64>() / n;
            let var = pairs.iter().map(|p| (get(p) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (mx, sx) = stats(&|p: &(f64, f64)| p.0);
        let (my, sy) = stats(&|p: &(f64, f64)| p.1);
        if sx == 0.0 || sy == 0.0 {
            return Err(QuantizerError::InvalidDistribution(
                "degenerate samples: zero variance axis".into(),
            ));
        }
        let centers = |mean: f64, std: f64| -> Vec<f64> {
            let half = span_sigmas * std;
            let width = 2.0 * half / bins as f64;
            (0..bins)
                .map(|k| mean - half + (k as f64 + 0.5) * width)
                .collect()
        };
        let x_support = centers(mx, sx);
        let y_support = centers(my, sy);
        let index = |v: f64, mean: f64, std: f64| -> usize {
            let half = span_sigmas * std;
            let t = (v - (mean - half)) / (2.0 * half) * bins as f64;
            (t.floor().clamp(0.0, bins as f64 - 1.0)) as usize
        };
        let mut mass = vec![0.0; bins * bins];
        for &(x, y) in pairs {
            mass[index(x, mx, sx) * bins + index(y, my, sy)] += 1.0;
        }
        Self::from_grid(x_support, y_support, mass, SupportKind::Histogram)
    }

    /// Discretized zero-mean bivariate Gaussian with per-axis standard
    /// deviation `std` and correlation `rho`, evaluated at bin centers.
    pub fn discretized_gaussian(
        rho: f64,
        std: f64,
        bins: usize,
        span_sigmas: f64,
    ) -> Result<Self, QuantizerError> {
        if !(rho.abs() < 1.0) || std <= 0.0 || bins < 2 {
            return Err(QuantizerError::InvalidDistribution(format!(
                "invalid bivariate Gaussian: rho={rho}, std={std}, bins={bins}"
            )));
        }
        let half = span_sigmas * std;
        let width = 2.0 * half / bins as f64;
        let support: Vec<f64> = (0..bins)
            .map(|k| -half + (k as f64 + 0.5) * width)
            .collect();
        let det = 1.0 - rho * rho;
        let mut mass = vec![0.0; bins * bins];
        for (i, &x) in support.iter().enumerate() {
            for (j, &y) in support.iter().enumerate() {
                let u = x / std;
                let v = y / std;
                let q = (u * u - 2.0 * rho * u * v + v * v) / det;
                mass[i * bins + j] = (-0.5 * q).exp();
            }
        }
        Self::from_grid(support.clone(), support, mass, SupportKind::Histogram)
    }

    pub fn x_support(&self) -> &[f64] {
        &self.x_support
    }

    pub fn y_support(&self) -> &[f64] {
        &self.y_support
    }

    pub fn kind(&self) -> SupportKind {
        self.kind
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.y_support.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.y_support.len();
        &self.mass[i * ny..(i + 1) * ny]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.x_support.len())
            .map(|i| self.row(i).iter().sum())
            .collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let ny = self.y_support.len();
        (0..ny)
            .map(|j| (0..self.x_support.len()).map(|i| self.mass(i, j)).sum())
            .collect()
    }

    /// Largest single-atom marginal mass over both axes: the resolution at
    /// which any boundary move can change a cell's mass.
    pub fn atom_resolution(&self) -> f64 {
        let max = |m: Vec<f64>| m.into_iter().fold(0.0f64, f64::max);
        max(self.marginal_x()).max(max(self.marginal_y()))
    }

    /// Interquartile range of the x marginal (atom positions where the
    /// cumulative mass crosses 1/4 and 3/4).
    pub fn iqr_x(&self) -> f64 {
        let marginal = self.marginal_x();
        let quantile = |p: f64| -> f64 {
            let mut cum = 0.0;
            for (i, &m) in marginal.iter().enumerate() {
                cum += m;
                if cum >= p {
                    return self.x_support[i];
                }
            }
            *self.x_support.last().expect("nonempty support")
        };
        quantile(0.75) - quantile(0.25)
    }

    /// Default design step: 1e-3 of the marginal interquartile range for
    /// histograms. Exact pmfs ignore the step (boundaries move between
    /// atoms), so any positive value works.
    pub fn default_step(&self) -> f64 {
        match self.kind {
            SupportKind::ExactPmf => 1.0,
            SupportKind::Histogram => {
                let iqr = self.iqr_x();
                let span = self.x_support.last().unwrap() - self.x_support.first().unwrap();
                if iqr > 0.0 {
                    1e-3 * iqr
                } else {
                    1e-3 * span
                }
            }
        }
    }
}
