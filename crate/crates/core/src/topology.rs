//! Neuron grid geometry and the Gaussian neighborhood function.
//!
//! Neurons are indexed row-major from 0: neuron `k` sits in grid row
//! `k / cols` and column `k % cols`. Hexagonal grids offset odd rows by half a
//! unit and space rows by `sqrt(3)/2`, so every ring-1 neighbor is at map
//! distance exactly 1.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const ADJACENCY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Hexagonal,
    Rectangular,
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hex" | "hexagonal" => Ok(Topology::Hexagonal),
            "rect" | "rectangular" => Ok(Topology::Rectangular),
            other => domain(format!("unknown topology '{other}'")),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Topology::Hexagonal => "hexagonal",
            Topology::Rectangular => "rectangular",
        })
    }
}

/// Planar position of a neuron, in map units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronCoord {
    pub x: f64,
    pub y: f64,
}

/// Fixed arrangement of `rows * cols` neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
    topology: Topology,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, topology: Topology) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain(format!("grid must be at least 1x1, got {rows}x{cols}"));
        }
        Ok(Self {
            rows,
            cols,
            topology,
        })
    }

    pub fn hexagonal(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, Topology::Hexagonal)
    }

    pub fn rectangular(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, Topology::Rectangular)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Number of neurons `K`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid (row, column) of neuron `k`.
    pub fn position(&self, k: usize) -> Result<(usize, usize)> {
        self.check(k)?;
        Ok((k / self.cols, k % self.cols))
    }

    pub fn coord(&self, k: usize) -> Result<NeuronCoord> {
        let (r, c) = self.position(k)?;
        Ok(self.coord_unchecked(r, c))
    }

    fn coord_unchecked(&self, r: usize, c: usize) -> NeuronCoord {
        match self.topology {
            Topology::Hexagonal => NeuronCoord {
                x: c as f64 + 0.5 * (r % 2) as f64,
                y: r as f64 * (3.0_f64.sqrt() / 2.0),
            },
            Topology::Rectangular => NeuronCoord {
                x: c as f64,
                y: r as f64,
            },
        }
    }

    fn check(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::NeuronOutOfRange {
                index: k,
                size: self.len(),
            });
        }
        Ok(())
    }

    /// Euclidean distance between the planar positions of two neurons.
    pub fn map_distance(&self, a: usize, b: usize) -> Result<f64> {
        let pa = self.coord(a)?;
        let pb = self.coord(b)?;
        Ok(((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt())
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> Result<bool> {
        if a == b {
            return domain(format!("adjacency of neuron {a} with itself is undefined"));
        }
        Ok(self.map_distance(a, b)? <= 1.0 + ADJACENCY_TOLERANCE)
    }

    /// All neurons adjacent to `k`, in increasing index order.
    pub fn neighbors(&self, k: usize) -> Result<Vec<usize>> {
        self.check(k)?;
        let mut out = Vec::new();
        for l in 0..self.len() {
            if l != k && self.are_adjacent(k, l)? {
                out.push(l);
            }
        }
        Ok(out)
    }

    /// Gaussian neighborhood weight `exp(-d^2 / (2 radius^2))`.
    pub fn neighborhood_weight(&self, k: usize, l: usize, radius: f64) -> Result<f64> {
        check_radius(radius)?;
        Ok(gaussian(self.map_distance(k, l)?, radius))
    }

    /// Row-major `K x K` matrix of map distances.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let k = self.len();
        let coords: Vec<NeuronCoord> = (0..k)
            .map(|i| self.coord_unchecked(i / self.cols, i % self.cols))
            .collect();
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let (pa, pb) = (coords[a], coords[b]);
                out[a * k + b] = ((pa.x - pb.x).powi(2) + (pa.y - pb.y).powi(2)).sqrt();
            }
        }
        out
    }

    /// The 2/3 quantile (linear interpolation between order statistics) of
    /// the map distances over all unordered pairs of distinct neurons.
    ///
    /// Returns `None` for a single-neuron map.
    pub fn auto_radius(&self) -> Option<f64> {
        let k = self.len();
        if k < 2 {
            return None;
        }
        let dist = self.distance_matrix();
        let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
        for a in 0..k {
            for b in (a + 1)..k {
                pairs.push(dist[a * k + b]);
            }
        }
        pairs.sort_by(f64::total_cmp);
        let pos = (pairs.len() - 1) as f64 * (2.0 / 3.0);
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        Some(pairs[lo] + frac * (pairs[hi] - pairs[lo]))
    }
}

pub(crate) fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return domain(format!("neighborhood radius must be positive, got {radius}"));
    }
    Ok(())
}

#[inline]
pub(crate) fn gaussian(distance: f64, radius: f64) -> f64 {
    (-(distance * distance) / (2.0 * radius * radius)).exp()
}

/// Neighborhood weights for one radius, cached as a `K x K` table.
///
/// Entries are bitwise equal to [`GridSpec::neighborhood_weight`].
#[derive(Debug, Clone)]
pub struct NeighborhoodTable {
    size: usize,
    weights: Vec<f64>,
}

impl NeighborhoodTable {
    pub fn new(distances: &[f64], size: usize, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        debug_assert_eq!(distances.len(), size * size);
        Ok(Self {
            size,
            weights: distances.iter().map(|&d| gaussian(d, radius)).collect(),
        })
    }

    pub fn for_grid(grid: &GridSpec, radius: f64) -> Result<Self> {
        Self::new(&grid.distance_matrix(), grid.len(), radius)
    }

    /// Weights `V(k, winner)` for every neuron `k`.
    #[inline]
    pub fn row(&self, winner: usize) -> &[f64] {
        &self.weights[winner * self.size..(winner + 1) * self.size]
    }
}
