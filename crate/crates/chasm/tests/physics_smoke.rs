//! Coarse-grid physics sanity checks and storage-precision coverage.

use chasm::bspline::BoundaryCondition;
use chasm::field::{error_metrics, init_gaussian, spatial_marginal, WignerField};
use chasm::grid::build_grid;
use chasm::harness::harmonic_omega;
use chasm::integrator::{Potential, ProtonCenter, StepConfig};
use chasm::runtime::{run_simulation, ReferenceSpec, SimulationConfig, TransportKind};

fn moments(field: &WignerField<f64>) -> ([f64; 3], [f64; 3], f64) {
    let g = &field.grid;
    let klen = g.k_len();
    let mut mx = [0.0; 3];
    let mut mk = [0.0; 3];
    let mut mass = 0.0;
    for s in 0..g.spatial_len() {
        let x = g.x_of(s);
        let slab = field.slab(s);
        for (q, v) in slab.iter().enumerate() {
            let k = g.k_of(q);
            mass += v;
            for a in 0..3 {
                mx[a] += v * x[a];
                mk[a] += v * k[a];
            }
        }
        let _ = klen;
    }
    for a in 0..3 {
        mx[a] /= mass;
        mk[a] /= mass;
    }
    (mx, mk, mass * g.cell_volume())
}

#[test]
fn proton_attracts_the_wavepacket() {
    // Electron wavepacket displaced along x1 from a proton at the origin:
    // the force turns the mean momentum negative and pulls the mean
    // position toward the origin. Coarse grid; only the drift signs and
    // boundedness are asserted.
    let grid = build_grid(3, (-9.0, 9.0), 8, 4.8, 8).unwrap();
    let f0: WignerField<f64> =
        init_gaussian(&grid, &[1.0, 0.0, 0.0], &[0.0; 3], 0.5, 2.0).unwrap();
    let (mx0, mk0, _) = moments(&f0);
    assert!((mx0[0] - 1.0).abs() < 0.05);
    assert!(mk0[0].abs() < 1e-12);

    let cfg = SimulationConfig {
        grid: grid.clone(),
        step: StepConfig {
            tau: 0.025,
            potential: Potential::Coulomb {
                centers: vec![ProtonCenter {
                    position: [0.0; 3],
                    charge: 1.0,
                }],
            },
            n_nb: 4,
            bc: BoundaryCondition::Natural,
        },
        p: 1,
        steps: 10,
        cadence: 0,
        reference: ReferenceSpec::Initial,
        transport: TransportKind::Channels,
    };
    let out = run_simulation(&cfg, &f0).unwrap();
    out.field.assert_finite().unwrap();
    let (mx, mk, mass) = moments(&out.field);
    assert!(mk[0] < -1e-4, "mean momentum {:.3e} not attracted", mk[0]);
    assert!(
        mx[0] < mx0[0] - 1e-4,
        "mean position did not move inward: {} vs {}",
        mx[0],
        mx0[0]
    );
    // Transverse drift stays small and identical between the two symmetric
    // axes; the residual comes from the unpaired -l_k row of the
    // left-inclusive wave-vector grid, sizeable only at this coarse nk.
    assert!(
        mk[1].abs() < 0.05 * mk[0].abs() && mk[2].abs() < 0.05 * mk[0].abs(),
        "transverse momenta {:.3e}/{:.3e} vs longitudinal {:.3e}",
        mk[1],
        mk[2],
        mk[0]
    );
    assert!(
        (mk[1] - mk[2]).abs() < 1e-10 * mk[0].abs(),
        "axis-2/axis-3 symmetry broken: {:.3e} vs {:.3e}",
        mk[1],
        mk[2]
    );
    // The discrete mass identity holds only to grid accuracy; at this
    // coarse resolution the drift is percent-scale per step.
    assert!((mass - 1.0).abs() < 0.35, "mass {mass} drifted far");

    // Spatial marginal stays normalized to quadrature accuracy.
    let p = spatial_marginal(&out.field).unwrap();
    let total: f64 = p.iter().sum::<f64>() * grid.h * grid.h;
    assert!((total - mass).abs() < 1e-10 * mass.abs().max(1.0));
}

#[test]
fn f32_storage_tracks_f64_run() {
    let grid = build_grid(1, (-12.0, 12.0), 120, 6.4, 64).unwrap();
    let mk_cfg = || SimulationConfig {
        grid: grid.clone(),
        step: StepConfig {
            tau: 5e-4,
            potential: Potential::Harmonic {
                omega: harmonic_omega(),
            },
            n_nb: 20,
            bc: BoundaryCondition::Natural,
        },
        p: 2,
        steps: 200,
        cadence: 0,
        reference: ReferenceSpec::ExactCharacteristics,
        transport: TransportKind::Channels,
    };
    let f64_init: WignerField<f64> = init_gaussian(&grid, &[1.0], &[0.0], 0.5, 2.0).unwrap();
    let f32_init: WignerField<f32> = init_gaussian(&grid, &[1.0], &[0.0], 0.5, 2.0).unwrap();
    let out64 = run_simulation(&mk_cfg(), &f64_init).unwrap();
    let out32 = run_simulation(&mk_cfg(), &f32_init).unwrap();
    let wide = out32.field.to_f64_field();
    let rep = error_metrics(&wide, &out64.field, out64.field.mass()).unwrap();
    // Storage rounding accumulates at the single-precision level.
    assert!(rep.eps_inf < 5e-5, "f32 deviates by {}", rep.eps_inf);
    assert!(rep.eps_inf > 0.0, "precisions cannot agree exactly");
}
