//! Distributed-vs-sequential equivalence of the patch runtime.

use chasm::bspline::BoundaryCondition;
use chasm::field::{error_metrics, init_gaussian, WignerField};
use chasm::grid::build_grid;
use chasm::integrator::{lpc1_step, Lpc1Context, Potential, ProtonCenter, StepConfig};
use chasm::runtime::{run_simulation, ReferenceSpec, SimulationConfig, TransportKind};

fn harmonic_config(grid: &chasm::PhaseSpaceGrid, p: usize, steps: usize) -> SimulationConfig {
    SimulationConfig {
        grid: grid.clone(),
        step: StepConfig {
            tau: 5e-4,
            potential: Potential::Harmonic {
                omega: (std::f64::consts::PI / 5.0).powi(2),
            },
            n_nb: 30,
            bc: BoundaryCondition::Natural,
        },
        p,
        steps,
        cadence: 0,
        reference: ReferenceSpec::ExactCharacteristics,
        transport: TransportKind::Channels,
    }
}

#[test]
fn harmonic_p4_matches_p1_and_the_sequential_integrator() {
    let g = build_grid(1, (-12.0, 12.0), 240, 6.4, 64).unwrap();
    let f0: WignerField = init_gaussian(&g, &[1.0], &[0.0], 0.5, 2.0).unwrap();
    let steps = 5;

    let out1 = run_simulation(&harmonic_config(&g, 1, steps), &f0).unwrap();
    let out2 = run_simulation(&harmonic_config(&g, 2, steps), &f0).unwrap();
    let out4 = run_simulation(&harmonic_config(&g, 4, steps), &f0).unwrap();
    assert_eq!(out4.stats.patches, 4);
    assert!(out4.stats.messages > 0);

    let rep = error_metrics(&out4.field, &out1.field, out1.field.mass()).unwrap();
    assert!(rep.eps_inf <= 1e-9, "p=4 vs p=1 eps_inf {}", rep.eps_inf);
    let rep2 = error_metrics(&out2.field, &out1.field, out1.field.mass()).unwrap();
    assert!(rep2.eps_inf <= 1e-9, "p=2 vs p=1 eps_inf {}", rep2.eps_inf);

    // The single-patch runtime path must agree with the plain integrator
    // loop to the bit.
    let cfg = harmonic_config(&g, 1, steps);
    let mut f = f0.clone();
    let mut ctx = Lpc1Context::new(&g, &cfg.step).unwrap();
    for _ in 0..steps {
        lpc1_step(&mut f, &cfg.step, &mut ctx).unwrap();
    }
    for (a, b) in out1.field.values.iter().zip(&f.values) {
        assert_eq!(a, b, "single-patch runtime diverges from integrator");
    }
}

#[test]
fn free_streaming_corrections_make_p2_match_p1() {
    // Zero-charge Coulomb potential: the step degenerates to pure
    // advection, isolating the shared-plane correction protocol in 3-D
    // (face, edge and corner points all cross patch boundaries).
    let g = build_grid(3, (-4.0, 4.0), 16, 2.0, 4).unwrap();
    let f0: WignerField = init_gaussian(&g, &[0.0; 3], &[0.0; 3], 0.5, 2.0).unwrap();
    let mk = |p: usize| SimulationConfig {
        grid: g.clone(),
        step: StepConfig {
            tau: 0.9 * g.h / g.l_k,
            potential: Potential::Coulomb {
                centers: vec![ProtonCenter {
                    position: [0.0; 3],
                    charge: 0.0,
                }],
            },
            n_nb: 8,
            bc: BoundaryCondition::Natural,
        },
        p,
        steps: 2,
        cadence: 0,
        reference: ReferenceSpec::Initial,
        transport: TransportKind::Channels,
    };
    let out1 = run_simulation::<f64>(&mk(1), &f0).unwrap();
    let out2 = run_simulation::<f64>(&mk(2), &f0).unwrap();
    assert_eq!(out2.stats.patches, 8);
    let rep = error_metrics(&out2.field, &out1.field, out1.field.mass()).unwrap();
    // Differences come from the PMBC stencil truncation alone (r^8 ~ 2.6e-5
    // times the boundary-sample scale); the correction protocol itself is
    // exact.
    assert!(rep.eps_inf <= 1e-6, "p=8-patch vs p=1 eps_inf {}", rep.eps_inf);
    out2.field.assert_finite().unwrap();
}

#[test]
fn per_k_signs_are_corrected_in_both_directions() {
    // Rows with k > 0 and k < 0 cross the interface in opposite directions
    // within the same exchange; against the sequential oracle.
    let g = build_grid(1, (-6.0, 6.0), 48, 3.0, 8).unwrap();
    let f0: WignerField = init_gaussian(&g, &[0.0], &[0.5], 0.5, 2.0).unwrap();
    let mk = |p: usize| SimulationConfig {
        grid: g.clone(),
        step: StepConfig {
            tau: 0.95 * g.h / g.l_k,
            potential: Potential::Harmonic { omega: 0.0 },
            n_nb: 12,
            bc: BoundaryCondition::Natural,
        },
        p,
        steps: 1,
        cadence: 0,
        reference: ReferenceSpec::Initial,
        transport: TransportKind::Channels,
    };
    let out1 = run_simulation::<f64>(&mk(1), &f0).unwrap();
    let out2 = run_simulation::<f64>(&mk(2), &f0).unwrap();
    let rep = error_metrics(&out2.field, &out1.field, out1.field.mass()).unwrap();
    assert!(rep.eps_inf <= 2e-5, "eps_inf {}", rep.eps_inf);
}

#[test]
fn identical_configs_are_bitwise_deterministic() {
    let g = build_grid(1, (-12.0, 12.0), 120, 6.4, 32).unwrap();
    let f0: WignerField = init_gaussian(&g, &[1.0], &[0.0], 0.5, 2.0).unwrap();
    let cfg = harmonic_config(&g, 4, 3);
    let a = run_simulation(&cfg, &f0).unwrap();
    let b = run_simulation(&cfg, &f0).unwrap();
    for (x, y) in a.field.values.iter().zip(&b.field.values) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    for (x, y) in a.metrics.iter().zip(&b.metrics) {
        assert_eq!(x.eps_inf.to_bits(), y.eps_inf.to_bits());
        assert_eq!(x.eps_mass.to_bits(), y.eps_mass.to_bits());
    }
}

#[test]
fn socket_transport_matches_channels() {
    let g = build_grid(1, (-12.0, 12.0), 120, 6.4, 16).unwrap();
    let f0: WignerField = init_gaussian(&g, &[1.0], &[0.0], 0.5, 2.0).unwrap();
    let mut cfg = harmonic_config(&g, 4, 2);
    let via_channels = run_simulation(&cfg, &f0).unwrap();
    cfg.transport = TransportKind::Sockets;
    let via_sockets = run_simulation(&cfg, &f0).unwrap();
    for (x, y) in via_channels
        .field
        .values
        .iter()
        .zip(&via_sockets.field.values)
    {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn communication_volume_scales_with_patch_surface() {
    // Exchanged bytes per step must scale with the interface area, not the
    // global volume.
    let g = build_grid(1, (-12.0, 12.0), 240, 6.4, 64).unwrap();
    let f0: WignerField = init_gaussian(&g, &[1.0], &[0.0], 0.5, 2.0).unwrap();
    let out = run_simulation(&harmonic_config(&g, 4, 1), &f0).unwrap();
    // Per step and tensor: 2 interior interfaces x 2 directions x (pmbc +
    // correction) messages, each O(k_len) doubles; global volume is 241x64.
    let per_message_upper = 2 * g.k_len() * 8; // two fused tensors
    let expected_upper = 4 * 3 * 2 * per_message_upper as u64 + 4096;
    assert!(
        out.stats.bytes < expected_upper,
        "bytes {} exceed surface scaling bound {expected_upper}",
        out.stats.bytes
    );
}

#[test]
fn zero_steps_round_trips_the_initial_field() {
    let g = build_grid(1, (-6.0, 6.0), 24, 2.0, 8).unwrap();
    let f0: WignerField = init_gaussian(&g, &[0.0], &[0.0], 0.5, 2.0).unwrap();
    let mut cfg = harmonic_config(&g, 1, 0);
    cfg.step.n_nb = 6;
    let out = run_simulation(&cfg, &f0).unwrap();
    for (a, b) in out.field.values.iter().zip(&f0.values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
