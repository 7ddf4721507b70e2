//! Uniform phase-space grid geometry.
//!
//! The grid is the tensor product of a position grid and a wave-vector grid,
//! identical along every axis. Positions carry `nx + 1` points per axis
//! (both endpoints included); wave vectors carry `nk` points per axis with
//! the right endpoint excluded, `k_j = -l_k + j * dk`, matching the periodic
//! FFT convention used by the spectral operators.

use crate::error::{ChasmError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    /// Spatial dimension d; phase space is 2d-dimensional. 1 or 3.
    pub dim: usize,
    pub x_min: f64,
    pub x_max: f64,
    /// Number of spatial intervals per axis; nx + 1 grid points.
    pub nx: usize,
    /// Half-width of the wave-vector domain [-l_k, l_k).
    pub l_k: f64,
    /// Number of wave-vector points per axis (even).
    pub nk: usize,
    /// Spatial spacing (x_max - x_min) / nx.
    pub h: f64,
    /// Wave-vector spacing 2 l_k / nk.
    pub dk: f64,
}

impl PhaseSpaceGrid {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.h * i as f64
    }

    pub fn k(&self, j: usize) -> f64 {
        -self.l_k + self.dk * j as f64
    }

    /// Spatial points per axis.
    pub fn nx_points(&self) -> usize {
        self.nx + 1
    }

    /// Total spatial points, (nx + 1)^d.
    pub fn spatial_len(&self) -> usize {
        self.nx_points().pow(self.dim as u32)
    }

    /// Total wave-vector points, nk^d.
    pub fn k_len(&self) -> usize {
        self.nk.pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.spatial_len() * self.k_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element of one phase-space cell, h^d * dk^d.
    pub fn cell_volume(&self) -> f64 {
        (self.h * self.dk).powi(self.dim as i32)
    }

    /// Decode a flat spatial index into per-axis indices (row-major).
    pub fn spatial_multi(&self, mut s: usize) -> [usize; 3] {
        let n = self.nx_points();
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = s % n;
            s /= n;
        }
        out
    }

    /// Decode a flat wave-vector index into per-axis indices (row-major).
    pub fn k_multi(&self, mut q: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = q % self.nk;
            q /= self.nk;
        }
        out
    }

    /// Physical position of a flat spatial index.
    pub fn x_of(&self, s: usize) -> [f64; 3] {
        let m = self.spatial_multi(s);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = self.x(m[a]);
        }
        out
    }

    /// Physical wave vector of a flat index.
    pub fn k_of(&self, q: usize) -> [f64; 3] {
        let m = self.k_multi(q);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = self.k(m[a]);
        }
        out
    }
}

/// Build a uniform grid with identical extents along every axis.
pub fn build_grid(
    dim: usize,
    x_extent: (f64, f64),
    nx: usize,
    l_k: f64,
    nk: usize,
) -> Result<PhaseSpaceGrid> {
    if dim != 1 && dim != 3 {
        return Err(ChasmError::InvalidGrid(format!("dim must be 1 or 3, got {dim}")));
    }
    let (x_min, x_max) = x_extent;
    if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(ChasmError::InvalidGrid(format!(
            "x extent must be finite with x_max > x_min, got [{x_min}, {x_max}]"
        )));
    }
    if !(l_k > 0.0) || !l_k.is_finite() {
        return Err(ChasmError::InvalidGrid(format!("l_k must be positive, got {l_k}")));
    }
    if nx < 4 {
        return Err(ChasmError::InvalidGrid(format!("nx must be >= 4, got {nx}")));
    }
    if nk < 4 {
        return Err(ChasmError::InvalidGrid(format!("nk must be >= 4, got {nk}")));
    }
    if nk % 2 != 0 {
        return Err(ChasmError::InvalidGrid(format!("nk must be even, got {nk}")));
    }
    let h = (x_max - x_min) / nx as f64;
    let dk = 2.0 * l_k / nk as f64;
    Ok(PhaseSpaceGrid {
        dim,
        x_min,
        x_max,
        nx,
        l_k,
        nk,
        h,
        dk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_grid_spacings() {
        let g = build_grid(1, (-12.0, 12.0), 240, 6.4, 512).unwrap();
        assert!((g.h - 0.1).abs() < 1e-15);
        assert!((g.dk - 0.025).abs() < 1e-15);
        assert_eq!(g.nx_points(), 241);
        assert_eq!(g.k_len(), 512);
    }

    #[test]
    fn coarse_3d_grid_spacings() {
        let g = build_grid(3, (-9.0, 9.0), 60, 6.4, 64).unwrap();
        assert!((g.h - 0.3).abs() < 1e-15);
        assert!((g.dk - 0.2).abs() < 1e-15);
        assert_eq!(g.spatial_len(), 61usize.pow(3));
    }

    #[test]
    fn unit_grid_spacings() {
        let g = build_grid(1, (0.0, 1.0), 4, 1.0, 4).unwrap();
        assert!((g.h - 0.25).abs() < 1e-15);
        assert!((g.dk - 0.5).abs() < 1e-15);
    }

    #[test]
    fn k_grid_is_symmetric_and_right_exclusive() {
        let g = build_grid(1, (0.0, 1.0), 4, 2.0, 8).unwrap();
        assert_eq!(g.k(0), -2.0);
        assert_eq!(g.k(4), 0.0);
        assert_eq!(g.k(7), 2.0 - g.dk);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_grid(1, (0.0, 1.0), 4, 1.0, 15).is_err());
        assert!(build_grid(1, (0.0, 1.0), 4, -1.0, 4).is_err());
        assert!(build_grid(1, (1.0, 0.0), 4, 1.0, 4).is_err());
        assert!(build_grid(2, (0.0, 1.0), 4, 1.0, 4).is_err());
        assert!(build_grid(1, (0.0, 1.0), 3, 1.0, 4).is_err());
    }

    #[test]
    fn flat_index_round_trip() {
        let g = build_grid(3, (-1.0, 1.0), 4, 1.0, 4).unwrap();
        let s = (2 * 5 + 3) * 5 + 1;
        assert_eq!(g.spatial_multi(s), [2, 3, 1]);
        let q = (1 * 4 + 0) * 4 + 2;
        assert_eq!(g.k_multi(q), [1, 0, 2]);
    }
}
