//! Cubic B-spline basis, global spline solves and constant-shift interpolation.
//!
//! Coefficients are indexed nu = -1..=n+1 (n+3 values for n intervals); the
//! interpolation identity at every node is
//! `(1/6) eta_{i-1} + (2/3) eta_i + (1/6) eta_{i+1} = phi(x_i)`.
//! The two extra unknowns are closed by either a clamped (Hermite) or a
//! natural boundary row, and the resulting system is condensed onto a plain
//! tridiagonal sweep.

use crate::error::{ChasmError, Result};

/// Boundary closure for the spline system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Clamped spline: prescribed first derivatives at both ends.
    Hermite(f64, f64),
    /// Zero second derivative at both ends.
    Natural,
}

/// Cubic spline coefficients over a uniform grid with n intervals.
#[derive(Debug, Clone)]
pub struct SplineCoefficients {
    /// eta_{-1}..eta_{n+1}, stored at offset +1.
    pub eta: Vec<f64>,
    pub h: f64,
    pub n: usize,
}

impl SplineCoefficients {
    /// Coefficient eta_nu; the ghost values eta_{-2} and eta_{n+2} are zero.
    #[inline]
    pub fn eta(&self, nu: isize) -> f64 {
        if nu < -1 || nu > self.n as isize + 1 {
            0.0
        } else {
            self.eta[(nu + 1) as usize]
        }
    }
}

/// Evaluate the cubic B-spline `B_nu` centered on the uniform grid
/// `x_i = origin + i h`. Compact support over `[x_{nu-2}, x_{nu+2}]`.
pub fn bspline_eval(nu: isize, x: f64, origin: f64, h: f64) -> f64 {
    debug_assert!(h > 0.0);
    let t = (x - origin) / h - nu as f64;
    if t <= -2.0 || t >= 2.0 {
        0.0
    } else if t <= -1.0 {
        let u = t + 2.0;
        u * u * u / 6.0
    } else if t <= 0.0 {
        let u = t + 1.0;
        -u * u * u / 2.0 + u * u / 2.0 + u / 2.0 + 1.0 / 6.0
    } else if t <= 1.0 {
        let u = 1.0 - t;
        -u * u * u / 2.0 + u * u / 2.0 + u / 2.0 + 1.0 / 6.0
    } else {
        let u = 2.0 - t;
        u * u * u / 6.0
    }
}

/// Precomputed Thomas factorization of a tridiagonal matrix, reusable across
/// many right-hand sides (one factorization per patch geometry).
#[derive(Debug, Clone)]
pub struct TridiagLU {
    /// Multipliers sub[i]/pivot[i-1], length n (entry 0 unused).
    mult: Vec<f64>,
    /// Modified diagonal after forward elimination.
    pivot: Vec<f64>,
    /// Original superdiagonal, length n - 1.
    sup: Vec<f64>,
}

impl TridiagLU {
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 2 && sub.len() == n - 1 && sup.len() == n - 1);
        let mut mult = vec![0.0; n];
        let mut pivot = diag.to_vec();
        for i in 1..n {
            assert!(pivot[i - 1] != 0.0, "singular tridiagonal system");
            let m = sub[i - 1] / pivot[i - 1];
            mult[i] = m;
            pivot[i] -= m * sup[i - 1];
        }
        assert!(pivot[n - 1] != 0.0, "singular tridiagonal system");
        TridiagLU {
            mult,
            pivot,
            sup: sup.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot.is_empty()
    }

    /// Solve in place: `rhs` enters as the right-hand side, exits as the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.pivot.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.mult[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.sup[i] * rhs[i + 1]) / self.pivot[i];
        }
    }
}

/// Factorization of the condensed spline system for one (n, h, bc) geometry,
/// producing all n+3 coefficients from n+1 samples.
#[derive(Debug, Clone)]
pub struct SplineSolver {
    pub n: usize,
    pub h: f64,
    pub bc_kind: BcKind,
    lu: TridiagLU,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Hermite,
    Natural,
}

impl SplineSolver {
    /// Factorization arrays (multipliers, pivots, superdiagonal) for
    /// plane-structured sweeps.
    pub(crate) fn lu_parts(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.lu.mult, &self.lu.pivot, &self.lu.sup)
    }

    pub fn new(n: usize, h: f64, bc_kind: BcKind) -> Self {
        match bc_kind {
            BcKind::Hermite => assert!(n >= 2, "clamped solve needs at least 2 intervals"),
            BcKind::Natural => assert!(n >= 3, "natural solve needs at least 3 intervals"),
        }
        assert!(h > 0.0);
        let lu = match bc_kind {
            BcKind::Hermite => {
                // Unknowns eta_0..eta_n after eliminating the derivative rows.
                let m = n + 1;
                let mut diag = vec![2.0 / 3.0; m];
                let mut sub = vec![1.0 / 6.0; m - 1];
                let mut sup = vec![1.0 / 6.0; m - 1];
                sup[0] = 1.0 / 3.0;
                sub[m - 2] = 1.0 / 3.0;
                diag[0] = 2.0 / 3.0;
                diag[m - 1] = 2.0 / 3.0;
                TridiagLU::factor(&sub, &diag, &sup)
            }
            BcKind::Natural => {
                // eta_0 and eta_n are pinned to the end samples; solve eta_1..eta_{n-1}.
                let m = n - 1;
                let diag = vec![2.0 / 3.0; m];
                let sub = vec![1.0 / 6.0; m - 1];
                let sup = vec![1.0 / 6.0; m - 1];
                TridiagLU::factor(&sub, &diag, &sup)
            }
        };
        SplineSolver { n, h, bc_kind, lu }
    }

    /// Solve for the full coefficient vector eta_{-1}..eta_{n+1} (length n+3).
    /// For the natural closure the derivative arguments are ignored.
    pub fn solve_into(&self, samples: &[f64], phi_l: f64, phi_r: f64, eta: &mut Vec<f64>) {
        let n = self.n;
        debug_assert_eq!(samples.len(), n + 1);
        eta.clear();
        match self.bc_kind {
            BcKind::Hermite => {
                eta.resize(n + 3, 0.0);
                {
                    let inner = &mut eta[1..n + 2];
                    inner.copy_from_slice(samples);
                    inner[0] += self.h / 3.0 * phi_l;
                    inner[n] -= self.h / 3.0 * phi_r;
                    self.lu.solve_in_place(inner);
                }
                eta[0] = eta[2] - 2.0 * self.h * phi_l;
                eta[n + 2] = eta[n] + 2.0 * self.h * phi_r;
            }
            BcKind::Natural => {
                eta.resize(n + 3, 0.0);
                eta[1] = samples[0];
                eta[n + 1] = samples[n];
                {
                    let inner = &mut eta[2..n + 1];
                    inner.copy_from_slice(&samples[1..n]);
                    inner[0] -= samples[0] / 6.0;
                    inner[n - 2] -= samples[n] / 6.0;
                    self.lu.solve_in_place(inner);
                }
                eta[0] = 2.0 * eta[1] - eta[2];
                eta[n + 2] = 2.0 * eta[n + 1] - eta[n];
            }
        }
    }
}

/// Solve the global spline system for the given samples and boundary condition.
pub fn solve_global_spline(
    samples: &[f64],
    h: f64,
    bc: &BoundaryCondition,
) -> Result<SplineCoefficients> {
    if samples.len() < 4 {
        return Err(ChasmError::InvalidConfig(format!(
            "spline needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len() - 1;
    let (kind, phi_l, phi_r) = match *bc {
        BoundaryCondition::Hermite(l, r) => {
            if !l.is_finite() || !r.is_finite() {
                return Err(ChasmError::InvalidConfig(
                    "Hermite boundary derivatives must be finite".into(),
                ));
            }
            (BcKind::Hermite, l, r)
        }
        BoundaryCondition::Natural => (BcKind::Natural, 0.0, 0.0),
    };
    let solver = SplineSolver::new(n, h, kind);
    let mut eta = Vec::new();
    solver.solve_into(samples, phi_l, phi_r, &mut eta);
    Ok(SplineCoefficients { eta, h, n })
}

/// The four interpolation weights for a constant shift by `alpha` cells.
/// `alpha` is interpreted through its magnitude; orientation of the stencil
/// is the caller's concern. Shifts up to one full cell are accepted.
pub fn shift_weights(alpha: f64) -> Result<(f64, f64, f64, f64)> {
    let a = alpha.abs();
    if !(a <= 1.0) {
        return Err(ChasmError::CflViolation(a));
    }
    let u = 1.0 - a;
    let b1 = u * u * u / 6.0;
    let b2 = -u * u * u / 2.0 + u * u / 2.0 + u / 2.0 + 1.0 / 6.0;
    let b3 = -a * a * a / 2.0 + a * a / 2.0 + a / 2.0 + 1.0 / 6.0;
    let b4 = a * a * a / 6.0;
    Ok((b1, b2, b3, b4))
}

/// Evaluate the spline at every shifted node `x_j - alpha h`, j = 0..=n.
/// Ghost coefficients beyond eta_{-1}, eta_{n+1} are taken as zero.
pub fn interpolate_shifted(coeffs: &SplineCoefficients, alpha: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; coeffs.n + 1];
    interpolate_shifted_into(coeffs, alpha, &mut out)?;
    Ok(out)
}

pub fn interpolate_shifted_into(
    coeffs: &SplineCoefficients,
    alpha: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = coeffs.n;
    debug_assert_eq!(out.len(), n + 1);
    let (b1, b2, b3, b4) = shift_weights(alpha)?;
    if alpha >= 0.0 {
        // x_j - alpha h lands in [x_{j-1}, x_j]: taps eta_{j-2}..eta_{j+1}.
        for (j, slot) in out.iter_mut().enumerate() {
            let j = j as isize;
            *slot = b4 * coeffs.eta(j - 2)
                + b3 * coeffs.eta(j - 1)
                + b2 * coeffs.eta(j)
                + b1 * coeffs.eta(j + 1);
        }
    } else {
        // x_j - alpha h lands in [x_j, x_{j+1}]: taps eta_{j-1}..eta_{j+2}.
        for (j, slot) in out.iter_mut().enumerate() {
            let j = j as isize;
            *slot = b1 * coeffs.eta(j - 1)
                + b2 * coeffs.eta(j)
                + b3 * coeffs.eta(j + 1)
                + b4 * coeffs.eta(j + 2);
        }
    }
    Ok(())
}

/// Solve `A^T w = rhs` where `A` is the (n+3)x(n+3) global spline matrix for
/// the given boundary kind. `rhs` is indexed by coefficient slot (columns of
/// `A`, i.e. eta_{-1}..eta_{n+1} at offset +1); the solution `w` is indexed
/// by equation row (0 = left boundary row, 1..=n+1 = sample rows, n+2 =
/// right boundary row). A linear functional `v . eta` over spline
/// coefficients thus becomes the functional `w . rhs` over the system's
/// right-hand side, with `w = A^{-T} v`.
pub(crate) fn solve_spline_transpose(n: usize, h: f64, kind: BcKind, rhs: &[f64]) -> Vec<f64> {
    assert!(n >= 4);
    assert_eq!(rhs.len(), n + 3);
    let mut w = vec![0.0; n + 3];
    // Reduced tridiagonal on w_1..w_{n+1} (length n+1).
    let m = n + 1;
    let mut diag = vec![2.0 / 3.0; m];
    let mut sub = vec![1.0 / 6.0; m - 1];
    let mut sup = vec![1.0 / 6.0; m - 1];
    let mut b = vec![0.0; m];
    b.copy_from_slice(&rhs[1..n + 2]);
    match kind {
        BcKind::Hermite => {
            // Eliminate w_0 via row 0 and w_{n+2} via row n+2.
            sub[0] = 1.0 / 3.0; // row index 2's coupling to w_1
            b[1] += rhs[0];
            sup[m - 2] = 1.0 / 3.0;
            b[m - 2] += rhs[n + 2];
        }
        BcKind::Natural => {
            diag[0] = 1.0;
            b[0] += 2.0 * rhs[0];
            sub[0] = 0.0;
            b[1] -= rhs[0];
            diag[m - 1] = 1.0;
            b[m - 1] += 2.0 * rhs[n + 2];
            sup[m - 2] = 0.0;
            b[m - 2] -= rhs[n + 2];
        }
    }
    let lu = TridiagLU::factor(&sub, &diag, &sup);
    lu.solve_in_place(&mut b);
    w[1..n + 2].copy_from_slice(&b);
    match kind {
        BcKind::Hermite => {
            let gamma = 1.0 / (2.0 * h);
            w[0] = (w[1] / 6.0 - rhs[0]) / gamma;
            w[n + 2] = (rhs[n + 2] - w[n + 1] / 6.0) / gamma;
        }
        BcKind::Natural => {
            let beta = 1.0 / (h * h);
            w[0] = (rhs[0] - w[1] / 6.0) / beta;
            w[n + 2] = (rhs[n + 2] - w[n + 1] / 6.0) / beta;
        }
    }
    w
}

/// Dense assembly of the global spline matrix; oracle for tests only.
#[cfg(test)]
#[allow(clippy::needless_range_loop)]
pub(crate) fn dense_spline_matrix(n: usize, h: f64, kind: BcKind) -> Vec<Vec<f64>> {
    let size = n + 3;
    let mut a = vec![vec![0.0; size]; size];
    match kind {
        BcKind::Hermite => {
            let gamma = 1.0 / (2.0 * h);
            a[0][0] = -gamma;
            a[0][2] = gamma;
            a[size - 1][size - 3] = -gamma;
            a[size - 1][size - 1] = gamma;
        }
        BcKind::Natural => {
            let beta = 1.0 / (h * h);
            a[0][0] = beta;
            a[0][1] = -2.0 * beta;
            a[0][2] = beta;
            a[size - 1][size - 3] = beta;
            a[size - 1][size - 2] = -2.0 * beta;
            a[size - 1][size - 1] = beta;
        }
    }
    for i in 1..=n + 1 {
        a[i][i - 1] = 1.0 / 6.0;
        a[i][i] = 2.0 / 3.0;
        a[i][i + 1] = 1.0 / 6.0;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn basis_nodal_values() {
        let h = 0.37;
        let origin = -1.2;
        for nu in [-1isize, 0, 3, 7] {
            let xnu = origin + nu as f64 * h;
            assert!((bspline_eval(nu, xnu, origin, h) - 2.0 / 3.0).abs() < 1e-15);
            assert!((bspline_eval(nu, xnu - h, origin, h) - 1.0 / 6.0).abs() < 1e-15);
            assert!((bspline_eval(nu, xnu + h, origin, h) - 1.0 / 6.0).abs() < 1e-15);
            // The support edge lands within one ulp of t = +-2.
            assert!(bspline_eval(nu, xnu + 2.0 * h, origin, h).abs() < 1e-30);
            assert!(bspline_eval(nu, xnu - 2.0 * h, origin, h).abs() < 1e-30);
            assert_eq!(bspline_eval(nu, xnu + 2.5 * h, origin, h), 0.0);
        }
    }

    #[test]
    fn basis_partition_of_unity() {
        // Independent oracle: sum the four overlapping pieces at random points.
        let mut rng = StdRng::seed_from_u64(7);
        let h = 0.25;
        let origin = 0.0;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(2.0 * h..8.0 * h);
            let cell = (x / h).floor() as isize;
            let sum: f64 = (cell - 1..=cell + 2)
                .map(|nu| bspline_eval(nu, x, origin, h))
                .sum();
            assert!((sum - 1.0).abs() < 1e-14, "sum {sum} at x {x}");
        }
    }

    #[test]
    fn constants_reproduce_with_natural_bc() {
        let samples = vec![1.0; 9];
        let c = solve_global_spline(&samples, 0.5, &BoundaryCondition::Natural).unwrap();
        for nu in -1..=9isize {
            assert!((c.eta(nu) - 1.0).abs() < 1e-13, "eta_{nu} = {}", c.eta(nu));
        }
    }

    #[test]
    fn linears_reproduce_with_natural_bc() {
        let h = 0.5;
        let n = 8;
        let samples: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let c = solve_global_spline(&samples, h, &BoundaryCondition::Natural).unwrap();
        for nu in -1..=(n as isize + 1) {
            let expect = nu as f64 * h;
            assert!((c.eta(nu) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_of_global_solve() {
        let mut rng = StdRng::seed_from_u64(11);
        for kind in [BcKind::Hermite, BcKind::Natural] {
            let n = 40;
            let h = 0.21;
            let samples: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bc = match kind {
                BcKind::Hermite => BoundaryCondition::Hermite(0.4, -0.9),
                BcKind::Natural => BoundaryCondition::Natural,
            };
            let c = solve_global_spline(&samples, h, &bc).unwrap();
            let a = dense_spline_matrix(n, h, kind);
            let mut rhs = vec![0.0; n + 3];
            rhs[1..n + 2].copy_from_slice(&samples);
            if let BoundaryCondition::Hermite(l, r) = bc {
                rhs[0] = l;
                rhs[n + 2] = r;
            }
            let scale: f64 = rhs.iter().fold(0.0, |m, v| m.max(v.abs()));
            for (i, row) in a.iter().enumerate() {
                let lhs: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * c.eta[j])
                    .sum();
                assert!(
                    (lhs - rhs[i]).abs() <= 1e-12 * scale.max(1.0),
                    "row {i}: residual {}",
                    lhs - rhs[i]
                );
            }
        }
    }

    #[test]
    fn interpolation_order_on_sine() {
        // Richardson order fit at midpoints; observed order must reach ~4.
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let h = 2.0 * std::f64::consts::PI / n as f64;
            let samples: Vec<f64> = (0..=n).map(|i| (i as f64 * h).sin()).collect();
            let bc = BoundaryCondition::Hermite(1.0, 1.0);
            let c = solve_global_spline(&samples, h, &bc).unwrap();
            let vals = interpolate_shifted(&c, 0.5).unwrap();
            let mut emax: f64 = 0.0;
            for (j, v) in vals.iter().enumerate().take(n).skip(1) {
                let x = j as f64 * h - 0.5 * h;
                emax = emax.max((v - x.sin()).abs());
            }
            errs.push(emax);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 3.9 && order2 >= 3.9, "orders {order1} {order2}");
    }

    #[test]
    fn shift_weight_values() {
        let w0 = shift_weights(0.0).unwrap();
        assert_eq!(w0, (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 0.0));
        let w1 = shift_weights(1.0).unwrap();
        assert!((w1.0).abs() < 1e-15);
        assert!((w1.1 - 1.0 / 6.0).abs() < 1e-15);
        assert!((w1.2 - 2.0 / 3.0).abs() < 1e-15);
        assert!((w1.3 - 1.0 / 6.0).abs() < 1e-15);
        let wh = shift_weights(0.5).unwrap();
        assert!((wh.0 - 1.0 / 48.0).abs() < 1e-16);
        assert!((wh.1 - 23.0 / 48.0).abs() < 1e-16);
        assert!((wh.2 - 23.0 / 48.0).abs() < 1e-16);
        assert!((wh.3 - 1.0 / 48.0).abs() < 1e-16);
        assert!(shift_weights(1.0 + 1e-12).is_err());
    }

    #[test]
    fn zero_shift_is_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        let n = 12;
        let samples: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = solve_global_spline(&samples, 1.0, &BoundaryCondition::Natural).unwrap();
        let vals = interpolate_shifted(&c, 0.0).unwrap();
        for (v, s) in vals.iter().zip(&samples) {
            assert!((v - s).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_samples_shift_to_constant_inside() {
        let samples = vec![2.5; 13];
        let c = solve_global_spline(&samples, 0.3, &BoundaryCondition::Natural).unwrap();
        for alpha in [0.3, -0.45, 0.9] {
            let vals = interpolate_shifted(&c, alpha).unwrap();
            for v in &vals[2..11] {
                assert!((v - 2.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cubic_reproduction_with_exact_hermite_data() {
        let n = 16;
        let h = 0.25;
        let x0 = -2.0;
        let f = |x: f64| 0.3 * x * x * x - x * x + 0.5 * x - 2.0;
        let fp = |x: f64| 0.9 * x * x - 2.0 * x + 0.5;
        let samples: Vec<f64> = (0..=n).map(|i| f(x0 + i as f64 * h)).collect();
        let bc = BoundaryCondition::Hermite(fp(x0), fp(x0 + n as f64 * h));
        let c = solve_global_spline(&samples, h, &bc).unwrap();
        for alpha in [0.31f64, -0.74, 0.995] {
            let vals = interpolate_shifted(&c, alpha).unwrap();
            for j in 2..n - 1 {
                let x = x0 + j as f64 * h - alpha * h;
                let rel = (vals[j] - f(x)).abs() / f(x).abs().max(1.0);
                assert!(rel < 1e-12, "alpha {alpha} j {j} rel {rel}");
            }
        }
    }

    #[test]
    fn transpose_solver_matches_dense() {
        let mut rng = StdRng::seed_from_u64(23);
        for kind in [BcKind::Hermite, BcKind::Natural] {
            let n = 24;
            let h = 0.17;
            let rhs: Vec<f64> = (0..n + 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = solve_spline_transpose(n, h, kind, &rhs);
            let a = dense_spline_matrix(n, h, kind);
            // Verify A^T w = rhs, i.e. for each column c of A: sum_r A[r][c] w[r] = rhs[c].
            for c in 0..n + 3 {
                let lhs: f64 = (0..n + 3).map(|r| a[r][c] * w[r]).sum();
                assert!(
                    (lhs - rhs[c]).abs() < 1e-11,
                    "{kind:?} col {c}: {} vs {}",
                    lhs,
                    rhs[c]
                );
            }
        }
    }

    #[test]
    fn weight_symmetry_and_partition() {
        use proptest::prelude::*;
        proptest!(|(alpha in 0.0f64..=1.0)| {
            let (b1, b2, b3, b4) = shift_weights(alpha).unwrap();
            let (r1, r2, r3, r4) = shift_weights(1.0 - alpha).unwrap();
            prop_assert!((b1 + b2 + b3 + b4 - 1.0).abs() <= 1e-15);
            prop_assert!((b1 - r4).abs() <= 1e-15);
            prop_assert!((b2 - r3).abs() <= 1e-15);
            prop_assert!((b3 - r2).abs() <= 1e-15);
            prop_assert!((b4 - r1).abs() <= 1e-15);
        });
    }
}
