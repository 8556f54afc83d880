//! Weighted 2D Gaussian kernel density estimation with per-axis bandwidths.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KdeError {
    #[error("bandwidth estimation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("{points} points but {weights} weights")]
    WeightCount { points: usize, weights: usize },
    #[error("weight {index} is {value}; weights must be positive and finite")]
    BadWeight { index: usize, value: f64 },
    #[error("bandwidths must be positive, got ({0}, {1})")]
    BadBandwidth(f64, f64),
    #[error("coordinate {0} is not finite")]
    NonFinite(usize),
    #[error("grid resolution must be at least 16, got {0}")]
    Resolution(usize),
    #[error("language '{0}' has no positive recording hours to weight by")]
    ZeroHours(String),
}

/// Standard normal kernel.
pub fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandwidthRule {
    /// `1.06 σ n^(-1/5)`
    #[default]
    Silverman,
    /// `1.06 min(σ, IQR/1.34) n^(-1/5)`
    SilvermanRobust,
}

/// Bandwidths, weights and family label for one family's density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeParams {
    pub h_x: f64,
    pub h_y: f64,
    pub weights: Vec<f64>,
    pub family: String,
}

impl KdeParams {
    pub fn new(family: &str, h_x: f64, h_y: f64, weights: Vec<f64>) -> Result<Self, KdeError> {
        if !(h_x > 0.0 && h_y > 0.0 && h_x.is_finite() && h_y.is_finite()) {
            return Err(KdeError::BadBandwidth(h_x, h_y));
        }
        check_weights(&weights)?;
        Ok(KdeParams {
            h_x,
            h_y,
            weights,
            family: family.to_string(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Fits Silverman bandwidths to `coords` under the given weights.
    pub fn fit(
        family: &str,
        coords: &[(f64, f64)],
        weights: Vec<f64>,
        rule: BandwidthRule,
    ) -> Result<Self, KdeError> {
        let (h_x, h_y) = silverman_bandwidths_with(coords, &weights, rule)?;
        KdeParams::new(family, h_x, h_y, weights)
    }
}

fn check_weights(weights: &[f64]) -> Result<(), KdeError> {
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(KdeError::BadWeight { index, value });
        }
    }
    Ok(())
}

/// Weights proportional to recording hours, scaled to average one:
/// `w_i = n * hours_i / sum(hours)`.
pub fn hour_weights(codes: &[&str], hours: &[f64]) -> Result<Vec<f64>, KdeError> {
    if let Some(i) = hours.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(KdeError::ZeroHours(
            codes.get(i).unwrap_or(&"?").to_string(),
        ));
    }
    let total: f64 = hours.iter().sum();
    let n = hours.len() as f64;
    Ok(hours.iter().map(|h| n * h / total).collect())
}

fn weighted_std(values: &[f64], weights: &[f64]) -> f64 {
    let wsum: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / wsum;
    let var = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean).powi(2))
        .sum::<f64>()
        / wsum;
    var.max(0.0).sqrt()
}

/// Weighted quantile by linear interpolation over cumulative weight midpoints.
fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .copied()
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut mids = Vec::with_capacity(pairs.len());
    for &(_, w) in &pairs {
        mids.push((acc + 0.5 * w) / total);
        acc += w;
    }
    if q <= mids[0] {
        return pairs[0].0;
    }
    for i in 1..pairs.len() {
        if q <= mids[i] {
            let t = (q - mids[i - 1]) / (mids[i] - mids[i - 1]);
            return pairs[i - 1].0 + t * (pairs[i].0 - pairs[i - 1].0);
        }
    }
    pairs[pairs.len() - 1].0
}

fn range(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

pub fn silverman_bandwidths(
    coords: &[(f64, f64)],
    weights: &[f64],
) -> Result<(f64, f64), KdeError> {
    silverman_bandwidths_with(coords, weights, BandwidthRule::Silverman)
}

/// Per-axis rule-of-thumb bandwidths `1.06 σ_w N^(-1/5)`, with σ_w the
/// weighted (population) standard deviation and N the point count. An axis
/// with zero spread falls back to `max(1e-6, 1e-3 × range of the other axis)`.
pub fn silverman_bandwidths_with(
    coords: &[(f64, f64)],
    weights: &[f64],
    rule: BandwidthRule,
) -> Result<(f64, f64), KdeError> {
    let n = coords.len();
    if n < 2 {
        return Err(KdeError::TooFewPoints(n));
    }
    if weights.len() != n {
        return Err(KdeError::WeightCount {
            points: n,
            weights: weights.len(),
        });
    }
    check_weights(weights)?;
    if let Some(i) = coords
        .iter()
        .position(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(KdeError::NonFinite(i));
    }
    let xs: Vec<f64> = coords.iter().map(|c| c.0).collect();
    let ys: Vec<f64> = coords.iter().map(|c| c.1).collect();
    let factor = 1.06 * (n as f64).powf(-0.2);
    let spread = |v: &[f64]| {
        let sd = weighted_std(v, weights);
        match rule {
            BandwidthRule::Silverman => sd,
            BandwidthRule::SilvermanRobust => {
                let iqr = weighted_quantile(v, weights, 0.75) - weighted_quantile(v, weights, 0.25);
                if iqr > 0.0 {
                    sd.min(iqr / 1.34)
                } else {
                    sd
                }
            }
        }
    };
    let (sx, sy) = (spread(&xs), spread(&ys));
    let fallback = |other: &[f64]| (1e-3 * range(other)).max(1e-6);
    let h_x = if sx > 0.0 { factor * sx } else { fallback(&ys) };
    let h_y = if sy > 0.0 { factor * sy } else { fallback(&xs) };
    Ok((h_x, h_y))
}

/// `f(x, y) = 1/(N h_x h_y) Σ w_i K((x - x_i)/h_x) K((y - y_i)/h_y)`.
pub fn kde_density(point: (f64, f64), coords: &[(f64, f64)], params: &KdeParams) -> f64 {
    let mut sum = 0.0;
    for (&(xi, yi), &w) in coords.iter().zip(&params.weights) {
        let kx = gaussian_kernel((point.0 - xi) / params.h_x);
        let ky = gaussian_kernel((point.1 - yi) / params.h_y);
        sum += w * kx * ky;
    }
    sum / (params.n_points() as f64 * params.h_x * params.h_y)
}

/// Density sampled at cell centers of a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub resolution: usize,
    /// `values[row][col]`, rows along y, columns along x.
    pub values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.resolution as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.resolution as f64
    }

    pub fn cell_x(&self, col: usize) -> f64 {
        cell_center(self.x_min, self.dx(), col)
    }

    pub fn cell_y(&self, row: usize) -> f64 {
        cell_center(self.y_min, self.dy(), row)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Riemann sum of the density over the grid.
    pub fn mass(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() * self.dx() * self.dy()
    }
}

fn cell_center(min: f64, step: f64, idx: usize) -> f64 {
    min + (idx as f64 + 0.5) * step
}

pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_PADDING_BANDWIDTHS: f64 = 3.0;

/// Samples the density at every cell center of a `resolution`² grid
/// covering the data extent padded by `padding` bandwidths on each side.
pub fn rasterize(
    coords: &[(f64, f64)],
    params: &KdeParams,
    resolution: usize,
    padding: f64,
) -> Result<DensityGrid, KdeError> {
    if resolution < 16 {
        return Err(KdeError::Resolution(resolution));
    }
    let xs = coords.iter().map(|c| c.0);
    let ys = coords.iter().map(|c| c.1);
    let x_min = xs.clone().fold(f64::INFINITY, f64::min) - padding * params.h_x;
    let x_max = xs.fold(f64::NEG_INFINITY, f64::max) + padding * params.h_x;
    let y_min = ys.clone().fold(f64::INFINITY, f64::min) - padding * params.h_y;
    let y_max = ys.fold(f64::NEG_INFINITY, f64::max) + padding * params.h_y;
    let mut grid = DensityGrid {
        x_min,
        x_max,
        y_min,
        y_max,
        resolution,
        values: Vec::new(),
    };

    // The kernel is separable, so per-point kernel rows and columns are
    // computed once; each cell then multiplies in the same order as
    // `kde_density`, giving bit-identical values.
    let (dx, dy) = (grid.dx(), grid.dy());
    let kx: Vec<Vec<f64>> = coords
        .iter()
        .map(|&(xi, _)| {
            (0..resolution)
                .map(|c| gaussian_kernel((cell_center(x_min, dx, c) - xi) / params.h_x))
                .collect()
        })
        .collect();
    let ky: Vec<Vec<f64>> = coords
        .iter()
        .map(|&(_, yi)| {
            (0..resolution)
                .map(|r| gaussian_kernel((cell_center(y_min, dy, r) - yi) / params.h_y))
                .collect()
        })
        .collect();
    let norm = params.n_points() as f64 * params.h_x * params.h_y;
    grid.values = (0..resolution)
        .map(|r| {
            (0..resolution)
                .map(|c| {
                    let mut sum = 0.0;
                    for (i, w) in params.weights.iter().enumerate() {
                        sum += w * kx[i][c] * ky[i][r];
                    }
                    sum / norm
                })
                .collect()
        })
        .collect();
    Ok(grid)
}
