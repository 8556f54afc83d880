//! Principal component projection of row embeddings.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::symmetric_eigen;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("PCA needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("PCA to {dims} dimensions needs at least {dims} columns, got {cols}")]
    TooFewColumns { dims: usize, cols: usize },
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{ids} identifiers for {rows} rows")]
    IdMismatch { ids: usize, rows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub ids: Vec<String>,
    /// `coords[i][k]`: coordinate of row `i` on component `k`.
    pub coords: Vec<Vec<f64>>,
    /// Fraction of total variance carried by each component.
    pub explained_variance: Vec<f64>,
}

impl Projection {
    pub fn dims(&self) -> usize {
        self.explained_variance.len()
    }

    /// First two coordinates of every row.
    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.coords
            .iter()
            .map(|c| (c[0], c.get(1).copied().unwrap_or(0.0)))
            .collect()
    }
}

/// Projects mean-centered rows onto their top `dims` principal directions.
///
/// Each component's sign is fixed so that its largest-magnitude coordinate
/// is positive (lowest row index on ties). Data with zero total variance
/// maps to the origin with zero explained variance.
pub fn pca_project(
    rows: &[Vec<f64>],
    ids: &[String],
    dims: usize,
) -> Result<Projection, ProjectionError> {
    let n = rows.len();
    if n < 2 {
        return Err(ProjectionError::TooFewRows(n));
    }
    if ids.len() != n {
        return Err(ProjectionError::IdMismatch {
            ids: ids.len(),
            rows: n,
        });
    }
    let d = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(ProjectionError::Ragged {
                row: i,
                found: r.len(),
                expected: d,
            });
        }
        if let Some(j) = r.iter().position(|x| !x.is_finite()) {
            return Err(ProjectionError::NonFinite { row: i, col: j });
        }
    }
    if d < dims {
        return Err(ProjectionError::TooFewColumns { dims, cols: d });
    }

    let means: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&means).map(|(x, m)| x - m).collect())
        .collect();

    // Decompose whichever of X^T X (d x d) and X X^T (n x n) is smaller;
    // both share their nonzero spectrum.
    let mut coords = vec![vec![0.0; dims]; n];
    let (eigenvalues, total) = if d <= n {
        let mut cov = vec![vec![0.0; d]; d];
        for a in 0..d {
            for b in a..d {
                let s: f64 = centered.iter().map(|r| r[a] * r[b]).sum();
                cov[a][b] = s;
                cov[b][a] = s;
            }
        }
        let total: f64 = (0..d).map(|a| cov[a][a]).sum();
        let (vals, vecs) = symmetric_eigen(&cov);
        for k in 0..dims {
            for (i, r) in centered.iter().enumerate() {
                coords[i][k] = r.iter().enumerate().map(|(j, x)| x * vecs[j][k]).sum();
            }
        }
        (vals, total)
    } else {
        let mut gram = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in a..n {
                let s: f64 = centered[a]
                    .iter()
                    .zip(&centered[b])
                    .map(|(x, y)| x * y)
                    .sum();
                gram[a][b] = s;
                gram[b][a] = s;
            }
        }
        let total: f64 = (0..n).map(|a| gram[a][a]).sum();
        let (vals, vecs) = symmetric_eigen(&gram);
        for k in 0..dims.min(n) {
            let sigma = vals[k].max(0.0).sqrt();
            for (i, c) in coords.iter_mut().enumerate() {
                c[k] = vecs[i][k] * sigma;
            }
        }
        (vals, total)
    };

    if total <= 0.0 {
        return Ok(Projection {
            ids: ids.to_vec(),
            coords: vec![vec![0.0; dims]; n],
            explained_variance: vec![0.0; dims],
        });
    }

    let mut explained = Vec::with_capacity(dims);
    for k in 0..dims {
        let lambda = eigenvalues.get(k).copied().unwrap_or(0.0).max(0.0);
        explained.push((lambda / total).clamp(0.0, 1.0));
        fix_sign(&mut coords, k);
    }
    for k in 1..dims {
        // rounding can leave a later component a hair above its predecessor
        if explained[k] > explained[k - 1] {
            explained[k] = explained[k - 1];
        }
    }

    Ok(Projection {
        ids: ids.to_vec(),
        coords,
        explained_variance: explained,
    })
}

fn fix_sign(coords: &mut [Vec<f64>], k: usize) {
    let mut pivot = 0;
    for i in 1..coords.len() {
        if coords[i][k].abs() > coords[pivot][k].abs() {
            pivot = i;
        }
    }
    if coords[pivot][k] < 0.0 {
        for c in coords.iter_mut() {
            c[k] = -c[k];
        }
    }
    for c in coords.iter_mut() {
        if c[k] == 0.0 {
            c[k] = 0.0; // drop negative zeros
        }
    }
}
