//! Wigner-field storage, initial conditions, reductions and error metrics.
//!
//! Values are stored flat with the wave-vector indices fastest-varying
//! within each spatial point, so the nonlocal operators act on contiguous
//! slabs: `values[s * k_len + q]` for flat spatial index `s` and flat
//! wave-vector index `q` (both row-major over their axes).

use crate::error::{ChasmError, Result};
use crate::grid::PhaseSpaceGrid;
use crate::num::Real;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct WignerField<R: Real = f64> {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<R>,
    /// Simulation time in atomic units.
    pub time: f64,
}

/// Error metrics of a numerical field against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub eps_inf: f64,
    pub eps_2: f64,
    pub eps_mass: f64,
    pub time: f64,
}

impl<R: Real> WignerField<R> {
    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        let len = grid.len();
        WignerField {
            grid,
            values: vec![R::zero(); len],
            time: 0.0,
        }
    }

    /// Wave-vector slab of one spatial point.
    #[inline]
    pub fn slab(&self, s: usize) -> &[R] {
        let k = self.grid.k_len();
        &self.values[s * k..(s + 1) * k]
    }

    #[inline]
    pub fn slab_mut(&mut self, s: usize) -> &mut [R] {
        let k = self.grid.k_len();
        &mut self.values[s * k..(s + 1) * k]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.to_f64().abs()))
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(ChasmError::InvalidConfig(
                "field contains non-finite values".into(),
            ))
        }
    }

    /// Quadrature mass with uniform cell weights, h^d dk^d per point.
    pub fn mass(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.to_f64()).sum();
        sum * self.grid.cell_volume()
    }

    pub fn to_f64_field(&self) -> WignerField<f64> {
        WignerField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.to_f64()).collect(),
            time: self.time,
        }
    }
}

/// Gaussian wavepacket `pi^{-d} exp(-a |x - x_c|^2 - b |k - k_c|^2)`,
/// unit continuum mass when a * b = 1 (e.g. a = 1/2, b = 2).
pub fn init_gaussian<R: Real>(
    grid: &PhaseSpaceGrid,
    center_x: &[f64],
    center_k: &[f64],
    a: f64,
    b: f64,
) -> Result<WignerField<R>> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(ChasmError::InvalidConfig(format!(
            "Gaussian widths must be positive, got a={a}, b={b}"
        )));
    }
    if center_x.len() != grid.dim || center_k.len() != grid.dim {
        return Err(ChasmError::InvalidConfig(
            "Gaussian center dimension does not match the grid".into(),
        ));
    }
    let d = grid.dim;
    let norm = PI.powi(-(d as i32));
    let spatial: Vec<f64> = (0..grid.spatial_len())
        .map(|s| {
            let x = grid.x_of(s);
            let r2: f64 = (0..d).map(|a_| (x[a_] - center_x[a_]).powi(2)).sum();
            (-a * r2).exp()
        })
        .collect();
    let momentum: Vec<f64> = (0..grid.k_len())
        .map(|q| {
            let k = grid.k_of(q);
            let r2: f64 = (0..d).map(|a_| (k[a_] - center_k[a_]).powi(2)).sum();
            (-b * r2).exp()
        })
        .collect();
    let klen = grid.k_len();
    let mut field = WignerField::zeros(grid.clone());
    field
        .values
        .par_chunks_mut(klen)
        .zip(spatial.par_iter())
        .for_each(|(slab, g)| {
            for (v, e) in slab.iter_mut().zip(&momentum) {
                *v = R::from_f64(norm * g * e);
            }
        });
    Ok(field)
}

/// Hydrogen 1s orbital in position space, `(1/(2 sqrt(2) pi^2)) e^{-|x|}`.
fn phi_1s_exponent(x: &[f64; 3], u: &[f64; 3], sign: f64) -> f64 {
    let mut n = 0.0;
    for a in 0..3 {
        let d = x[a] + sign * u[a];
        n += d * d;
    }
    n.sqrt()
}

/// Stationary Hydrogen-1s Wigner function via the discrete Weyl transform:
/// for each spatial point the integral over the offset variable is folded
/// onto the nk-periodic lattice (dy * dk = 2 pi / nk) and evaluated with a
/// length-nk FFT per axis, which equals decimating a length-ny transform.
pub fn init_hydrogen_1s<R: Real>(grid: &PhaseSpaceGrid, ny: usize) -> Result<WignerField<R>> {
    if grid.dim != 3 {
        return Err(ChasmError::InvalidConfig(
            "Hydrogen-1s initialization requires dim = 3".into(),
        ));
    }
    if !ny.is_power_of_two() || ny < grid.nk {
        return Err(ChasmError::InvalidConfig(format!(
            "ny must be a power of two >= nk, got ny={ny}, nk={}",
            grid.nk
        )));
    }
    let nk = grid.nk;
    let dy = PI / grid.l_k; // 2 pi / (nk dk)
    let half = (ny / 2) as i64;
    let klen = grid.k_len();
    let amp = 1.0 / (8.0 * PI.powi(4)); // |phi_1s|^2 prefactor
    let weight = dy * dy * dy;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nk);

    let spatial_len = grid.spatial_len();
    let mut values = vec![R::zero(); spatial_len * klen];
    let residues: Vec<(f64, f64)> = values
        .par_chunks_mut(klen)
        .enumerate()
        .map(|(s, out)| {
            let x = grid.x_of(s);
            // Fold the offset window onto the nk-periodic lattice. The
            // unpaired -ny/2 plane is dropped so the window is exactly even
            // in the offset; its weight sits below the window's own tail
            // truncation, and the imaginary-residue check then flags real
            // symmetry defects instead of window size.
            let mut folded = vec![Complex64::new(0.0, 0.0); klen];
            for e1 in (-half + 1)..half {
                let r1 = (e1.rem_euclid(nk as i64)) as usize;
                let u1 = 0.5 * e1 as f64 * dy;
                for e2 in (-half + 1)..half {
                    let r2 = (e2.rem_euclid(nk as i64)) as usize;
                    let u2 = 0.5 * e2 as f64 * dy;
                    let base = (r1 * nk + r2) * nk;
                    for e3 in (-half + 1)..half {
                        let r3 = (e3.rem_euclid(nk as i64)) as usize;
                        let u = [u1, u2, 0.5 * e3 as f64 * dy];
                        let g = amp * (-(phi_1s_exponent(&x, &u, -1.0) + phi_1s_exponent(&x, &u, 1.0))).exp();
                        folded[base + r3].re += g;
                    }
                }
            }
            // Length-nk FFT along each eta axis.
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let mut line = vec![Complex64::new(0.0, 0.0); nk];
            // axis 2 (contiguous)
            for chunk in folded.chunks_mut(nk) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            // axis 1
            for i0 in 0..nk {
                for i2 in 0..nk {
                    for j in 0..nk {
                        line[j] = folded[(i0 * nk + j) * nk + i2];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..nk {
                        folded[(i0 * nk + j) * nk + i2] = line[j];
                    }
                }
            }
            // axis 0
            for i1 in 0..nk {
                for i2 in 0..nk {
                    for j in 0..nk {
                        line[j] = folded[(j * nk + i1) * nk + i2];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..nk {
                        folded[(j * nk + i1) * nk + i2] = line[j];
                    }
                }
            }
            // Extract at the shifted frequencies zeta = j - nk/2.
            let mut max_im: f64 = 0.0;
            let mut max_re: f64 = 0.0;
            for j1 in 0..nk {
                let z1 = (j1 + nk / 2) % nk;
                for j2 in 0..nk {
                    let z2 = (j2 + nk / 2) % nk;
                    for j3 in 0..nk {
                        let z3 = (j3 + nk / 2) % nk;
                        let v = folded[(z1 * nk + z2) * nk + z3] * weight;
                        max_im = max_im.max(v.im.abs());
                        max_re = max_re.max(v.re.abs());
                        out[(j1 * nk + j2) * nk + j3] = R::from_f64(v.re);
                    }
                }
            }
            (max_im, max_re)
        })
        .collect();

    let max_im = residues.iter().fold(0.0f64, |m, r| m.max(r.0));
    let peak = residues.iter().fold(0.0f64, |m, r| m.max(r.1));
    if max_im > 1e-10 * peak {
        return Err(ChasmError::ImaginaryResidue {
            residue: max_im / peak,
            limit: 1e-10,
            context: "Hydrogen-1s Weyl transform; the offset window lost its symmetry".into(),
        });
    }
    Ok(WignerField {
        grid: grid.clone(),
        values,
        time: 0.0,
    })
}

/// Reduced Wigner function on the (x_j, k_j) plane: uniform-weight sum over
/// the other two position and wave-vector axes. Row-major (x index, k index).
pub fn reduced_wigner<R: Real>(field: &WignerField<R>, axis: usize) -> Result<Vec<f64>> {
    let g = &field.grid;
    if g.dim != 3 {
        return Err(ChasmError::InvalidConfig("reduced_wigner requires dim = 3".into()));
    }
    if axis >= 3 {
        return Err(ChasmError::InvalidConfig(format!("axis {axis} out of range")));
    }
    let n = g.nx_points();
    let nk = g.nk;
    let w = (g.h * g.dk).powi(2);
    let mut out = vec![0.0f64; n * nk];
    let klen = g.k_len();
    for s in 0..g.spatial_len() {
        let xi = g.spatial_multi(s)[axis];
        let slab = field.slab(s);
        for (q, v) in slab.iter().enumerate() {
            let kj = match axis {
                0 => q / (nk * nk),
                1 => (q / nk) % nk,
                _ => q % nk,
            };
            out[xi * nk + kj] += v.to_f64();
        }
        let _ = klen;
    }
    for v in &mut out {
        *v *= w;
    }
    Ok(out)
}

/// Spatial marginal P(x1, x2): sum over x3 and all wave vectors, weighted
/// by h dk^3. Row-major (x1, x2).
pub fn spatial_marginal<R: Real>(field: &WignerField<R>) -> Result<Vec<f64>> {
    let g = &field.grid;
    if g.dim != 3 {
        return Err(ChasmError::InvalidConfig("spatial_marginal requires dim = 3".into()));
    }
    let n = g.nx_points();
    let w = g.h * g.dk.powi(3);
    let mut out = vec![0.0f64; n * n];
    for s in 0..g.spatial_len() {
        let m = g.spatial_multi(s);
        let slab = field.slab(s);
        let sum: f64 = slab.iter().map(|v| v.to_f64()).sum();
        out[m[0] * n + m[1]] += sum;
    }
    for v in &mut out {
        *v *= w;
    }
    Ok(out)
}

/// Max, L2 and mass error metrics between fields on identical grids.
pub fn error_metrics<R: Real>(
    numerical: &WignerField<R>,
    reference: &WignerField<R>,
    initial_mass: f64,
) -> Result<ErrorReport> {
    if numerical.grid != reference.grid {
        return Err(ChasmError::GridMismatch(
            "error metrics need identical grids".into(),
        ));
    }
    let mut eps_inf: f64 = 0.0;
    let mut sq_sum = 0.0;
    for (n, r) in numerical.values.iter().zip(&reference.values) {
        let d = n.to_f64() - r.to_f64();
        eps_inf = eps_inf.max(d.abs());
        sq_sum += d * d;
    }
    let vol = numerical.grid.cell_volume();
    Ok(ErrorReport {
        eps_inf,
        eps_2: (sq_sum * vol).sqrt(),
        eps_mass: (numerical.mass() - initial_mass).abs(),
        time: numerical.time,
    })
}
