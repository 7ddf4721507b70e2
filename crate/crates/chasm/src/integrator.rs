//! Characteristic advection plus the one-stage Lawson predictor-corrector.
//!
//! One step advances the field through
//!   predictor:  ft = f(A_tau) + tau Theta[f](A_tau)
//!   corrector:  f' = f(A_tau) + (tau/2) Theta[ft] + (tau/2) Theta[f](A_tau)
//! with A_tau(x, k) = (x - k tau, k). Theta[f] is computed once on the
//! unshifted grid and advected alongside f, so a step costs one
//! interpolation pass and two nonlocal-operator evaluations.

use crate::advection::{advect_global, AdvectWork};
use crate::bspline::{BcKind, BoundaryCondition};
use crate::error::{ChasmError, Result};
use crate::field::WignerField;
use crate::grid::PhaseSpaceGrid;
use crate::num::Real;
use crate::tkm::{ConvolutionTensor, HarmonicPdo, PdoWorkspace};
use rayon::prelude::*;
use std::sync::Arc;

pub use crate::advection::advect_global as advect;

/// Fixed point charge of the external potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtonCenter {
    pub position: [f64; 3],
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// V(x) = omega x^2 / 2 in one dimension; the nonlocal operator
    /// degenerates to (omega x) df/dk.
    Harmonic { omega: f64 },
    /// Sum of attractive Coulomb centers in three dimensions.
    Coulomb { centers: Vec<ProtonCenter> },
}

#[derive(Debug, Clone)]
pub struct StepConfig {
    pub tau: f64,
    pub potential: Potential,
    pub n_nb: usize,
    pub bc: BoundaryCondition,
}

impl StepConfig {
    pub fn bc_kind(&self) -> BcKind {
        match self.bc {
            BoundaryCondition::Hermite(..) => BcKind::Hermite,
            BoundaryCondition::Natural => BcKind::Natural,
        }
    }

    pub fn validate(&self, grid: &PhaseSpaceGrid) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(ChasmError::InvalidConfig(format!(
                "time step must be positive, got {}",
                self.tau
            )));
        }
        // Advection must stay within one cell for every wave vector, which
        // also keeps exchanges between adjacent patches only.
        let max_shift = grid.l_k * self.tau;
        if max_shift > grid.h {
            return Err(ChasmError::CflViolation(max_shift / grid.h));
        }
        if self.n_nb < 4 {
            return Err(ChasmError::InvalidConfig(format!(
                "stencil half-length must be at least 4, got {}",
                self.n_nb
            )));
        }
        match &self.potential {
            Potential::Harmonic { omega } => {
                if grid.dim != 1 {
                    return Err(ChasmError::InvalidConfig(
                        "harmonic potential runs in dim = 1".into(),
                    ));
                }
                if !omega.is_finite() || *omega < 0.0 {
                    return Err(ChasmError::InvalidConfig("omega must be nonnegative".into()));
                }
            }
            Potential::Coulomb { centers } => {
                if grid.dim != 3 {
                    return Err(ChasmError::InvalidConfig(
                        "Coulomb potential runs in dim = 3".into(),
                    ));
                }
                if centers.is_empty() {
                    return Err(ChasmError::InvalidConfig(
                        "Coulomb potential needs at least one center".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Nonlocal-operator resources shared by a run.
pub enum PdoResources {
    Harmonic(HarmonicPdo),
    Coulomb {
        tensor: Arc<ConvolutionTensor>,
        centers: Vec<ProtonCenter>,
    },
}

impl PdoResources {
    pub fn build(grid: &PhaseSpaceGrid, potential: &Potential) -> Result<Self> {
        Ok(match potential {
            Potential::Harmonic { omega } => {
                PdoResources::Harmonic(HarmonicPdo::new(grid.nk, grid.l_k, *omega))
            }
            Potential::Coulomb { centers } => PdoResources::Coulomb {
                tensor: Arc::new(ConvolutionTensor::build(grid.nk, grid.l_k)?),
                centers: centers.clone(),
            },
        })
    }

    pub fn with_tensor(tensor: Arc<ConvolutionTensor>, centers: Vec<ProtonCenter>) -> Self {
        PdoResources::Coulomb { tensor, centers }
    }
}

/// Scratch state for the time loop: the Theta-field buffer (which also
/// carries the predictor) and the advection work area.
pub struct Lpc1Context<R: Real> {
    pub theta: WignerField<R>,
    pub work: AdvectWork,
    pub pdo: PdoResources,
}

impl<R: Real> Lpc1Context<R> {
    pub fn new(grid: &PhaseSpaceGrid, config: &StepConfig) -> Result<Self> {
        Ok(Lpc1Context {
            theta: WignerField::zeros(grid.clone()),
            work: AdvectWork::default(),
            pdo: PdoResources::build(grid, &config.potential)?,
        })
    }
}

/// theta := Theta[f] over the whole field.
pub fn compute_theta<R: Real>(
    field: &WignerField<R>,
    pdo: &PdoResources,
    theta: &mut WignerField<R>,
) {
    let grid = &field.grid;
    let klen = grid.k_len();
    match pdo {
        PdoResources::Harmonic(hp) => {
            theta
                .values
                .par_chunks_mut(klen)
                .enumerate()
                .for_each_init(
                    || (hp.make_buffers(), vec![0.0f64; klen], vec![0.0f64; klen]),
                    |(bufs, row, out), (i, orow)| {
                        for (r, v) in row.iter_mut().zip(field.slab(i)) {
                            *r = v.to_f64();
                        }
                        hp.row_into(row, grid.x(i), out, bufs);
                        for (o, v) in orow.iter_mut().zip(out.iter()) {
                            *o = R::from_f64(*v);
                        }
                    },
                );
        }
        PdoResources::Coulomb { tensor, centers } => {
            theta
                .values
                .par_chunks_mut(klen)
                .enumerate()
                .for_each_init(
                    || {
                        (
                            PdoWorkspace::new(grid.nk),
                            vec![0.0f64; klen],
                            vec![0.0f64; klen],
                        )
                    },
                    |(ws, slab, acc), (s, orow)| {
                        for (r, v) in slab.iter_mut().zip(field.slab(s)) {
                            *r = v.to_f64();
                        }
                        acc.iter_mut().for_each(|v| *v = 0.0);
                        let x = grid.x_of(s);
                        for c in centers {
                            ws.accumulate_pdo_coulomb_scaled(
                                tensor, slab, x, c.position, c.charge, acc,
                            );
                        }
                        for (o, v) in orow.iter_mut().zip(acc.iter()) {
                            *o = R::from_f64(*v);
                        }
                    },
                );
        }
    }
    theta.time = field.time;
}

/// f := f + c * Theta[source], evaluated slab-by-slab without a third
/// field-sized buffer.
fn accumulate_theta_of<R: Real>(
    field: &mut WignerField<R>,
    source: &WignerField<R>,
    pdo: &PdoResources,
    c: f64,
) {
    let grid = source.grid.clone();
    let klen = grid.k_len();
    match pdo {
        PdoResources::Harmonic(hp) => {
            field
                .values
                .par_chunks_mut(klen)
                .enumerate()
                .for_each_init(
                    || (hp.make_buffers(), vec![0.0f64; klen], vec![0.0f64; klen]),
                    |(bufs, row, out), (i, frow)| {
                        for (r, v) in row.iter_mut().zip(source.slab(i)) {
                            *r = v.to_f64();
                        }
                        hp.row_into(row, grid.x(i), out, bufs);
                        for (fv, t) in frow.iter_mut().zip(out.iter()) {
                            *fv = R::from_f64(fv.to_f64() + c * t);
                        }
                    },
                );
        }
        PdoResources::Coulomb { tensor, centers } => {
            field
                .values
                .par_chunks_mut(klen)
                .enumerate()
                .for_each_init(
                    || {
                        (
                            PdoWorkspace::new(grid.nk),
                            vec![0.0f64; klen],
                            vec![0.0f64; klen],
                        )
                    },
                    |(ws, slab, acc), (s, frow)| {
                        for (r, v) in slab.iter_mut().zip(source.slab(s)) {
                            *r = v.to_f64();
                        }
                        acc.iter_mut().for_each(|v| *v = 0.0);
                        let x = grid.x_of(s);
                        for cc in centers {
                            ws.accumulate_pdo_coulomb_scaled(
                                tensor, slab, x, cc.position, cc.charge, acc,
                            );
                        }
                        for (fv, t) in frow.iter_mut().zip(acc.iter()) {
                            *fv = R::from_f64(fv.to_f64() + c * t);
                        }
                    },
                );
        }
    }
}

/// Advance the field by one predictor-corrector step (single-patch path).
pub fn lpc1_step<R: Real>(
    field: &mut WignerField<R>,
    config: &StepConfig,
    ctx: &mut Lpc1Context<R>,
) -> Result<()> {
    let tau = config.tau;
    let bc_kind = config.bc_kind();

    // Theta on the unshifted grid, then one joint advection pass.
    compute_theta(field, &ctx.pdo, &mut ctx.theta);
    advect_global(field, tau, bc_kind, &mut ctx.work)?;
    advect_global(&mut ctx.theta, tau, bc_kind, &mut ctx.work)?;

    // f becomes the corrector base f(A) + (tau/2) Theta(A); the theta
    // buffer becomes the predictor f(A) + tau Theta(A).
    for (fv, tv) in field.values.iter_mut().zip(ctx.theta.values.iter_mut()) {
        let t = tv.to_f64();
        let base = fv.to_f64() + 0.5 * tau * t;
        *fv = R::from_f64(base);
        *tv = R::from_f64(base + 0.5 * tau * t);
    }
    ctx.theta.time = field.time + tau;

    // Corrector closes with Theta of the predictor on the unshifted grid.
    let theta_ref = std::mem::replace(&mut ctx.theta, WignerField::zeros(field.grid.clone()));
    accumulate_theta_of(field, &theta_ref, &ctx.pdo, 0.5 * tau);
    ctx.theta = theta_ref;

    // Long-horizon stabilization of the harmonic mode: pin the nonphysical
    // top of the k-spectrum that the corrector would otherwise amplify.
    // Free streaming (omega = 0) stays exactly equal to pure advection.
    if let PdoResources::Harmonic(hp) = &ctx.pdo {
        if hp.omega != 0.0 {
            hp.filter_field(field);
        }
    }

    field.time += tau;
    Ok(())
}

/// Exact harmonic-oscillator evolution: sample the initial profile along
/// the reverse-time Hamiltonian flow
///   x(t) = cos(sw t) x - sin(sw t) k / sw,
///   k(t) = sw sin(sw t) x + cos(sw t) k,     sw = sqrt(omega).
pub fn exact_harmonic_solution<R: Real>(
    f0: &(dyn Fn(f64, f64) -> f64 + Sync),
    t: f64,
    omega: f64,
    grid: &PhaseSpaceGrid,
) -> WignerField<R> {
    assert_eq!(grid.dim, 1);
    let sw = omega.sqrt();
    let (c, s) = ((sw * t).cos(), (sw * t).sin());
    let nk = grid.nk;
    let mut out = WignerField::zeros(grid.clone());
    out.time = t;
    out.values
        .par_chunks_mut(nk)
        .enumerate()
        .for_each(|(i, row)| {
            let x = grid.x(i);
            for (j, v) in row.iter_mut().enumerate() {
                let k = grid.k(j);
                let xt = c * x - s * k / sw;
                let kt = sw * s * x + c * k;
                *v = R::from_f64(f0(xt, kt));
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{error_metrics, init_gaussian};
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn harmonic_f0(x: f64, k: f64) -> f64 {
        (1.0 / PI) * (-0.5 * (x - 1.0) * (x - 1.0) - 2.0 * k * k).exp()
    }

    #[test]
    fn exact_solution_has_period_ten() {
        let omega = (PI / 5.0) * (PI / 5.0);
        let g = build_grid(1, (-12.0, 12.0), 48, 6.4, 32).unwrap();
        let f0: WignerField = exact_harmonic_solution(&harmonic_f0, 0.0, omega, &g);
        let fp: WignerField = exact_harmonic_solution(&harmonic_f0, 10.0, omega, &g);
        for (a, b) in f0.values.iter().zip(&fp.values) {
            assert!((a - b).abs() < 1e-12);
        }
        // t = 0 samples the profile itself.
        for i in 0..g.nx_points() {
            for j in 0..g.nk {
                assert_eq!(f0.values[i * g.nk + j], harmonic_f0(g.x(i), g.k(j)));
            }
        }
    }

    #[test]
    fn exact_solution_quarter_period_swaps_axes() {
        let omega = 4.0; // sw = 2, quarter period pi/4
        let g = build_grid(1, (-3.0, 3.0), 12, 2.0, 8).unwrap();
        let t = PI / 4.0;
        let f: WignerField =
            exact_harmonic_solution(&|x, k| x + 10.0 * k, t, omega, &g);
        // cos = 0: x(t) = -k/2, k(t) = 2x.
        for i in 0..g.nx_points() {
            for j in 0..g.nk {
                let expect = -g.k(j) / 2.0 + 10.0 * 2.0 * g.x(i);
                let got = f.values[i * g.nk + j];
                assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
            }
        }
    }

    #[test]
    fn free_streaming_step_equals_pure_advection() {
        let g = build_grid(1, (-8.0, 8.0), 64, 2.0, 16).unwrap();
        let config = StepConfig {
            tau: 0.05,
            potential: Potential::Harmonic { omega: 0.0 },
            n_nb: 4,
            bc: BoundaryCondition::Natural,
        };
        config.validate(&g).unwrap();
        let mut f: WignerField = init_gaussian(&g, &[0.0], &[0.0], 0.5, 2.0).unwrap();
        let mut reference = f.clone();
        let mut ctx = Lpc1Context::new(&g, &config).unwrap();
        lpc1_step(&mut f, &config, &mut ctx).unwrap();
        let mut work = AdvectWork::default();
        advect_global(&mut reference, config.tau, BcKind::Natural, &mut work).unwrap();
        for (a, b) in f.values.iter().zip(&reference.values) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((f.time - 0.05).abs() < 1e-15);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = build_grid(1, (-8.0, 8.0), 64, 2.0, 16).unwrap();
        let config = StepConfig {
            tau: 1.0, // l_k tau = 2 > h = 0.25
            potential: Potential::Harmonic { omega: 0.0 },
            n_nb: 4,
            bc: BoundaryCondition::Natural,
        };
        assert!(matches!(
            config.validate(&g),
            Err(ChasmError::CflViolation(_))
        ));
    }

    #[test]
    fn short_harmonic_run_tracks_exact_solution() {
        let omega = (PI / 5.0) * (PI / 5.0);
        let g = build_grid(1, (-12.0, 12.0), 80, 6.4, 128).unwrap();
        let config = StepConfig {
            tau: 1e-3,
            potential: Potential::Harmonic { omega },
            n_nb: 20,
            bc: BoundaryCondition::Natural,
        };
        config.validate(&g).unwrap();
        let mut f: WignerField = exact_harmonic_solution(&harmonic_f0, 0.0, omega, &g);
        let m0 = f.mass();
        let mut ctx = Lpc1Context::new(&g, &config).unwrap();
        let steps = 500;
        for _ in 0..steps {
            lpc1_step(&mut f, &config, &mut ctx).unwrap();
        }
        let t = config.tau * steps as f64;
        let exact: WignerField = exact_harmonic_solution(&harmonic_f0, t, omega, &g);
        let rep = error_metrics(&f, &exact, m0).unwrap();
        assert!(rep.eps_inf < 5e-3, "eps_inf {}", rep.eps_inf);
        assert!(rep.eps_inf > 0.0);
        assert!(rep.eps_mass < 1e-10, "eps_mass {}", rep.eps_mass);
    }
}
