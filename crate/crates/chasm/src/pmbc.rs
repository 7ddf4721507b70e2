//! Perfectly matched boundary conditions for patch-local splines.
//!
//! The rows of the inverse spline matrix decay geometrically away from the
//! diagonal (ratio 2 - sqrt(3) per step), so the first-derivative value of
//! the global spline at a patch interface can be approximated by a short
//! stencil over nearby samples. Each patch evaluates the half of the stencil
//! it stores, the halves are exchanged and summed, and every patch then
//! closes its own (M+3)x(M+3) clamped system with the assembled derivative
//! values. The union of the local splines matches the global spline up to
//! the stencil truncation error.

use crate::bspline::{
    solve_spline_transpose, BcKind, BoundaryCondition, SplineCoefficients, SplineSolver,
};
use crate::error::{ChasmError, Result};

/// Which end of a patch an interface contribution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Truncated inverse-row stencil for one interior interface.
#[derive(Debug, Clone)]
pub struct InterfaceStencil {
    /// Weight of the shared interface sample itself.
    pub c0: f64,
    /// Weights of samples left of the interface, entry j for x_{g-j}, j = 1..=n_nb.
    pub c_minus: Vec<f64>,
    /// Weights of samples right of the interface, entry j for x_{g+j}.
    pub c_plus: Vec<f64>,
    /// Weight of the global left boundary-row slot, nonzero only when the
    /// stencil window reaches it (n_nb close to the domain edge).
    pub phantom_left: f64,
    pub phantom_right: f64,
}

/// Precomputed PMBC stencils and the shared patch factorization for one
/// (n, p, n_nb, bc) layout. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PmbcTable {
    /// Global interval count.
    pub n: usize,
    /// Patches per axis.
    pub p: usize,
    /// Intervals per patch (points per patch is m + 1).
    pub m: usize,
    /// Stencil half-length.
    pub n_nb: usize,
    pub h: f64,
    pub bc_kind: BcKind,
    /// Interior interface stencils, entry l-1 for the interface at node l*m, l = 1..=p-1.
    pub interfaces: Vec<InterfaceStencil>,
    /// Edge derivative stencil over x_0..x_{n_nb} (natural closure only).
    pub c_first: Vec<f64>,
    /// Edge derivative stencil over x_n..x_{n-n_nb} (natural closure only).
    pub c_last: Vec<f64>,
    /// Factorization of the clamped (M+3)x(M+3) patch system.
    pub local_solver: SplineSolver,
}

/// Local spline coefficients for one patch.
#[derive(Debug, Clone)]
pub struct LocalSpline {
    pub coeffs: SplineCoefficients,
    pub patch_id: usize,
}

/// Build the PMBC table. Interface stencils come from transpose solves
/// against the global matrix of the active boundary condition (the clamped
/// matrix for Hermite, the natural matrix otherwise), one O(n) solve per
/// interface; the dense inverse is never formed.
pub fn build_pmbc_table(n: usize, p: usize, n_nb: usize, bc: &BoundaryCondition) -> Result<PmbcTable> {
    build_pmbc_table_with_h(n, p, n_nb, 1.0, bc)
}

pub fn build_pmbc_table_with_h(
    n: usize,
    p: usize,
    n_nb: usize,
    h: f64,
    bc: &BoundaryCondition,
) -> Result<PmbcTable> {
    if p == 0 || n % p != 0 {
        return Err(ChasmError::InvalidConfig(format!(
            "patch count {p} must divide the interval count {n}"
        )));
    }
    let m = n / p;
    if n_nb == 0 || n_nb >= n {
        return Err(ChasmError::InvalidConfig(format!(
            "stencil half-length {n_nb} must lie in 1..{n}"
        )));
    }
    if m < 2 {
        return Err(ChasmError::InvalidConfig(format!(
            "patch has {m} intervals; need at least 2"
        )));
    }
    let bc_kind = match bc {
        BoundaryCondition::Hermite(..) => BcKind::Hermite,
        BoundaryCondition::Natural => BcKind::Natural,
    };
    let gamma = 1.0 / (2.0 * h);
    let size = n + 3;

    let mut interfaces = Vec::with_capacity(p.saturating_sub(1));
    for l in 1..p {
        let g = l * m;
        // Functional v . eta = (eta_{g+1} - eta_{g-1}) / (2h), the spline
        // derivative at the interface node.
        let mut v = vec![0.0; size];
        v[g + 2] = gamma;
        v[g] = -gamma;
        let w = solve_spline_transpose(n, h, bc_kind, &v);
        let c0 = w[g + 1];
        let mut c_minus = vec![0.0; n_nb + 1];
        let mut c_plus = vec![0.0; n_nb + 1];
        for j in 1..=n_nb {
            if g >= j {
                c_minus[j] = w[g + 1 - j];
            }
            if g + j <= n {
                c_plus[j] = w[g + 1 + j];
            }
        }
        // When the window reaches past the samples it picks up the boundary
        // rows; those slots multiply the global Hermite data (zero under the
        // natural closure).
        let phantom_left = if g <= n_nb { w[0] } else { 0.0 };
        let phantom_right = if g + n_nb >= n + 1 { w[size - 1] } else { 0.0 };
        interfaces.push(InterfaceStencil {
            c0,
            c_minus,
            c_plus,
            phantom_left,
            phantom_right,
        });
    }

    let (c_first, c_last) = if bc_kind == BcKind::Natural {
        if n_nb > n {
            return Err(ChasmError::InvalidConfig(format!(
                "edge stencil length {n_nb} exceeds the grid ({n} intervals)"
            )));
        }
        let mut v = vec![0.0; size];
        v[2] = gamma;
        v[0] = -gamma;
        let wl = solve_spline_transpose(n, h, BcKind::Natural, &v);
        let c_first: Vec<f64> = (0..=n_nb).map(|j| wl[j + 1]).collect();
        let mut v = vec![0.0; size];
        v[size - 1] = gamma;
        v[size - 3] = -gamma;
        let wr = solve_spline_transpose(n, h, BcKind::Natural, &v);
        let c_last: Vec<f64> = (0..=n_nb).map(|j| wr[n + 1 - j]).collect();
        (c_first, c_last)
    } else {
        (Vec::new(), Vec::new())
    };

    Ok(PmbcTable {
        n,
        p,
        m,
        n_nb,
        h,
        bc_kind,
        interfaces,
        c_first,
        c_last,
        local_solver: SplineSolver::new(m, h, BcKind::Hermite),
    })
}

impl PmbcTable {
    /// Half-stencil contribution of one patch toward an interface value,
    /// using only the patch's own samples (patch `l` owns global nodes
    /// l*m ..= (l+1)*m). `Side::Left` produces xi_L (the patch's share of its
    /// left interface); `Side::Right` produces xi_R. Requires n_nb <= m so
    /// the stencil never leaves the patch.
    pub fn pmbc_contrib(&self, samples: &[f64], patch: usize, side: Side) -> f64 {
        assert!(self.n_nb <= self.m, "half-stencil exceeds patch width");
        debug_assert_eq!(samples.len(), self.m + 1);
        match side {
            Side::Left => {
                debug_assert!(patch >= 1);
                let st = &self.interfaces[patch - 1];
                let mut acc = 0.5 * st.c0 * samples[0];
                for j in 1..=self.n_nb {
                    acc += st.c_plus[j] * samples[j];
                }
                acc
            }
            Side::Right => {
                debug_assert!(patch + 1 < self.p);
                let st = &self.interfaces[patch];
                let mut acc = 0.5 * st.c0 * samples[self.m];
                for j in 1..=self.n_nb {
                    acc += st.c_minus[j] * samples[self.m - j];
                }
                acc
            }
        }
    }

    /// Edge derivative value for the first patch under the natural closure.
    pub fn edge_left(&self, samples: &[f64]) -> f64 {
        assert_eq!(self.bc_kind, BcKind::Natural);
        assert!(self.n_nb <= self.m);
        self.c_first
            .iter()
            .enumerate()
            .map(|(j, c)| c * samples[j])
            .sum()
    }

    /// Edge derivative value for the last patch under the natural closure.
    pub fn edge_right(&self, samples: &[f64]) -> f64 {
        assert_eq!(self.bc_kind, BcKind::Natural);
        assert!(self.n_nb <= self.m);
        let last = self.m;
        self.c_last
            .iter()
            .enumerate()
            .map(|(j, c)| c * samples[last - j])
            .sum()
    }

    /// Full interface value evaluated from the global sample array; reference
    /// path for single-process assembly and for stencils longer than a patch.
    /// `phi_l`/`phi_r` are the global Hermite data (ignored under natural).
    pub fn interface_value_global(
        &self,
        samples: &[f64],
        interface: usize,
        phi_l: f64,
        phi_r: f64,
    ) -> f64 {
        debug_assert_eq!(samples.len(), self.n + 1);
        let st = &self.interfaces[interface - 1];
        let g = interface * self.m;
        let mut acc = st.c0 * samples[g];
        for j in 1..=self.n_nb {
            if g >= j {
                acc += st.c_minus[j] * samples[g - j];
            }
            if g + j <= self.n {
                acc += st.c_plus[j] * samples[g + j];
            }
        }
        if self.bc_kind == BcKind::Hermite {
            acc += st.phantom_left * phi_l + st.phantom_right * phi_r;
        }
        acc
    }

    /// Edge derivative values from the global sample array (natural closure).
    pub fn edge_values_global(&self, samples: &[f64]) -> (f64, f64) {
        assert_eq!(self.bc_kind, BcKind::Natural);
        let l = self
            .c_first
            .iter()
            .enumerate()
            .map(|(j, c)| c * samples[j])
            .sum();
        let r = self
            .c_last
            .iter()
            .enumerate()
            .map(|(j, c)| c * samples[self.n - j])
            .sum();
        (l, r)
    }

    /// Solve one patch's clamped system with assembled boundary values.
    pub fn assemble_local_spline(
        &self,
        patch_samples: &[f64],
        phi_l: f64,
        phi_r: f64,
        patch_id: usize,
    ) -> LocalSpline {
        let mut eta = Vec::new();
        self.local_solver
            .solve_into(patch_samples, phi_l, phi_r, &mut eta);
        LocalSpline {
            coeffs: SplineCoefficients {
                eta,
                h: self.h,
                n: self.m,
            },
            patch_id,
        }
    }

    /// Assemble every patch from the global sample array: the sequential
    /// reference for the distributed exchange, and the test path for long
    /// stencils.
    pub fn assemble_all_from_global(
        &self,
        samples: &[f64],
        phi_l: f64,
        phi_r: f64,
    ) -> Vec<LocalSpline> {
        debug_assert_eq!(samples.len(), self.n + 1);
        let mut boundary = vec![0.0; self.p + 1];
        boundary[0] = match self.bc_kind {
            BcKind::Hermite => phi_l,
            BcKind::Natural => self.edge_values_global(samples).0,
        };
        boundary[self.p] = match self.bc_kind {
            BcKind::Hermite => phi_r,
            BcKind::Natural => self.edge_values_global(samples).1,
        };
        for l in 1..self.p {
            boundary[l] = self.interface_value_global(samples, l, phi_l, phi_r);
        }
        (0..self.p)
            .map(|l| {
                let lo = l * self.m;
                self.assemble_local_spline(
                    &samples[lo..=lo + self.m],
                    boundary[l],
                    boundary[l + 1],
                    l,
                )
            })
            .collect()
    }
}
