//! Level-set extraction from a density grid by marching squares.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::kde::{
    hour_weights, kde_density, rasterize, BandwidthRule, DensityGrid, KdeError, KdeParams,
    DEFAULT_PADDING_BANDWIDTHS,
};

#[derive(Debug, Error, PartialEq)]
pub enum ContourError {
    #[error("contour level must be positive and finite, got {0}")]
    Level(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    /// False only when the level set runs off the grid edge.
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSet {
    pub family: String,
    pub level: f64,
    pub polylines: Vec<Polyline>,
    /// Set when the grid never reaches `level`.
    pub below_level: bool,
}

/// How the contour level is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelMode {
    /// An absolute density value.
    #[default]
    Absolute,
    /// A fraction of the family's peak grid density.
    Relative,
}

/// A projected language with its family and recording hours.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPoint {
    pub id: String,
    pub family: String,
    pub x: f64,
    pub y: f64,
    pub hours: f64,
}

/// A family's contour together with the inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyContour {
    pub members: Vec<String>,
    pub h_x: f64,
    pub h_y: f64,
    pub contours: ContourSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourOptions {
    pub level: f64,
    pub mode: LevelMode,
    pub resolution: usize,
    pub padding: f64,
    pub bandwidth: BandwidthRule,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions {
            level: 0.1,
            mode: LevelMode::Absolute,
            resolution: crate::kde::DEFAULT_RESOLUTION,
            padding: DEFAULT_PADDING_BANDWIDTHS,
            bandwidth: BandwidthRule::Silverman,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FamilyContourError {
    #[error("family '{family}': {source}")]
    Kde { family: String, source: KdeError },
    #[error("family '{family}': {source}")]
    Contour {
        family: String,
        source: ContourError,
    },
}

/// Hour-weighted KDE contours for every family with at least two members,
/// in family-name order. Smaller families and families whose density never
/// reaches the level produce warnings.
pub fn family_contours(
    points: &[FamilyPoint],
    opts: &ContourOptions,
) -> Result<(Vec<FamilyContour>, Vec<String>), FamilyContourError> {
    let mut families: Vec<&str> = points.iter().map(|p| p.family.as_str()).collect();
    families.sort_unstable();
    families.dedup();

    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for family in families {
        let members: Vec<&FamilyPoint> = points.iter().filter(|p| p.family == family).collect();
        if members.len() < 2 {
            warnings.push(format!(
                "family '{family}' has {} language(s); no contour drawn",
                members.len()
            ));
            continue;
        }
        let kde_err = |source| FamilyContourError::Kde {
            family: family.to_string(),
            source,
        };
        let coords: Vec<(f64, f64)> = members.iter().map(|p| (p.x, p.y)).collect();
        let ids: Vec<&str> = members.iter().map(|p| p.id.as_str()).collect();
        let hours: Vec<f64> = members.iter().map(|p| p.hours).collect();
        let weights = hour_weights(&ids, &hours).map_err(kde_err)?;
        let params = KdeParams::fit(family, &coords, weights, opts.bandwidth).map_err(kde_err)?;
        let grid = rasterize(&coords, &params, opts.resolution, opts.padding).map_err(kde_err)?;
        let level = match opts.mode {
            LevelMode::Absolute => opts.level,
            LevelMode::Relative => opts.level * grid.max_value(),
        };
        let mut set = extract_contours_with(&grid, level, |x, y, _| {
            kde_density((x, y), &coords, &params)
        })
        .map_err(|source| FamilyContourError::Contour {
            family: family.to_string(),
            source,
        })?;
        set.family = family.to_string();
        if set.below_level {
            warnings.push(format!(
                "family '{family}': peak density {:.4} is below level {level}; no contour",
                grid.max_value()
            ));
        }
        out.push(FamilyContour {
            members: ids.iter().map(|s| s.to_string()).collect(),
            h_x: params.h_x,
            h_y: params.h_y,
            contours: set,
        });
    }
    Ok((out, warnings))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Edge {
    /// Between samples (row, col) and (row, col + 1).
    H(usize, usize),
    /// Between samples (row, col) and (row + 1, col).
    V(usize, usize),
}

/// Extracts the `level` set, resolving saddle squares by the mean of the
/// four corner samples.
pub fn extract_contours(grid: &DensityGrid, level: f64) -> Result<ContourSet, ContourError> {
    extract_contours_with(grid, level, |_, _, corners| {
        corners.iter().sum::<f64>() / 4.0
    })
}

/// Like [`extract_contours`], with saddle squares resolved by
/// `center(x, y, corners)`, typically an exact density evaluation at the
/// square's center.
pub fn extract_contours_with(
    grid: &DensityGrid,
    level: f64,
    center: impl Fn(f64, f64, [f64; 4]) -> f64,
) -> Result<ContourSet, ContourError> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(ContourError::Level(level));
    }
    let mut set = ContourSet {
        family: String::new(),
        level,
        polylines: Vec::new(),
        below_level: grid.max_value() < level,
    };
    if set.below_level {
        return Ok(set);
    }

    let v = &grid.values;
    let n = grid.resolution;
    let above = |r: usize, c: usize| v[r][c] >= level;

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            let case = above(r, c) as u8
                | (above(r, c + 1) as u8) << 1
                | (above(r + 1, c + 1) as u8) << 2
                | (above(r + 1, c) as u8) << 3;
            let bottom = Edge::H(r, c);
            let right = Edge::V(r, c + 1);
            let top = Edge::H(r + 1, c);
            let left = Edge::V(r, c);
            let saddle_center = || {
                let x = 0.5 * (grid.cell_x(c) + grid.cell_x(c + 1));
                let y = 0.5 * (grid.cell_y(r) + grid.cell_y(r + 1));
                center(x, y, [v[r][c], v[r][c + 1], v[r + 1][c + 1], v[r + 1][c]]) >= level
            };
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if saddle_center() {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if saddle_center() {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let point = |e: Edge| -> (f64, f64) {
        let ((r0, c0), (r1, c1)) = match e {
            Edge::H(r, c) => ((r, c), (r, c + 1)),
            Edge::V(r, c) => ((r, c), (r + 1, c)),
        };
        let (a, b) = (v[r0][c0], v[r1][c1]);
        let t = (level - a) / (b - a);
        let (x0, y0) = (grid.cell_x(c0), grid.cell_y(r0));
        let (x1, y1) = (grid.cell_x(c1), grid.cell_y(r1));
        (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
    };

    for chain in link(&segments) {
        let closed = chain.len() > 2 && chain.first() == chain.last();
        set.polylines.push(Polyline {
            points: chain.into_iter().map(point).collect(),
            closed,
        });
    }
    Ok(set)
}

/// Joins segments sharing an edge crossing into chains. Closed chains repeat
/// their first edge at the end.
fn link(segments: &[(Edge, Edge)]) -> Vec<Vec<Edge>> {
    let mut at: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        at.entry(a).or_default().push(i);
        at.entry(b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let next = |edge: Edge, used: &[bool]| -> Option<usize> {
        at.get(&edge)?.iter().copied().find(|&s| !used[s])
    };
    let other = |s: usize, e: Edge| {
        let (a, b) = segments[s];
        if a == e {
            b
        } else {
            a
        }
    };

    let mut chains = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];
        let mut tail = b;
        while let Some(s) = next(tail, &used) {
            used[s] = true;
            tail = other(s, tail);
            chain.push(tail);
            if tail == a {
                break;
            }
        }
        if tail != a {
            let mut head = a;
            let mut front = Vec::new();
            while let Some(s) = next(head, &used) {
                used[s] = true;
                head = other(s, head);
                front.push(head);
            }
            front.reverse();
            front.extend(chain);
            chain = front;
        }
        chains.push(chain);
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(f: impl Fn(f64, f64) -> f64, n: usize, half: f64) -> DensityGrid {
        let mut g = DensityGrid {
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
            resolution: n,
            values: Vec::new(),
        };
        g.values = (0..n)
            .map(|r| (0..n).map(|c| f(g.cell_x(c), g.cell_y(r))).collect())
            .collect();
        g
    }

    #[test]
    fn circle_gives_one_closed_loop() {
        let g = grid_from(|x, y| (-(x * x + y * y)).exp(), 64, 3.0);
        let set = extract_contours(&g, 0.5).unwrap();
        assert_eq!(set.polylines.len(), 1);
        let p = &set.polylines[0];
        assert!(p.closed);
        assert_eq!(p.points.first(), p.points.last());
        let r_expect = 2f64.ln().sqrt();
        for &(x, y) in &p.points {
            assert!(((x * x + y * y).sqrt() - r_expect).abs() < 0.02);
        }
    }

    #[test]
    fn below_level_is_flagged_empty() {
        let g = grid_from(|_, _| 0.05, 16, 1.0);
        let set = extract_contours(&g, 0.1).unwrap();
        assert!(set.below_level);
        assert!(set.polylines.is_empty());
        assert_eq!(extract_contours(&g, 0.0), Err(ContourError::Level(0.0)));
    }

    #[test]
    fn two_bumps_two_loops() {
        let bump = |x: f64, y: f64, cx: f64| (-((x - cx).powi(2) + y * y) * 4.0).exp();
        let g = grid_from(|x, y| bump(x, y, -2.0) + bump(x, y, 2.0), 128, 4.0);
        let set = extract_contours(&g, 0.5).unwrap();
        assert_eq!(set.polylines.len(), 2);
        assert!(set.polylines.iter().all(|p| p.closed));
    }

    #[test]
    fn level_set_cut_by_boundary_is_open() {
        let g = grid_from(|x, _| x, 16, 1.0);
        let set = extract_contours(&g, 0.25).unwrap();
        assert_eq!(set.polylines.len(), 1);
        assert!(!set.polylines[0].closed);
        for &(x, _) in &set.polylines[0].points {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn saddle_uses_center_sample() {
        // checkerboard 2x2: corners above at (0,0) and (1,1)
        let g = DensityGrid {
            x_min: 0.0,
            x_max: 2.0,
            y_min: 0.0,
            y_max: 2.0,
            resolution: 2,
            values: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let joined = extract_contours_with(&g, 0.5, |_, _, _| 1.0).unwrap();
        let split = extract_contours_with(&g, 0.5, |_, _, _| 0.0).unwrap();
        assert_eq!(joined.polylines.len(), 2);
        assert_eq!(split.polylines.len(), 2);
        assert_ne!(joined.polylines, split.polylines);
    }
}
