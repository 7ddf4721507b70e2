//! Ignored diagnostic: per-band growth/decay rates of the harmonic step on
//! a noise field, with the spatial profile of whatever grows. Run with
//! `--ignored --nocapture`; SCRATCH_TAU and SCRATCH_OMEGA override the
//! defaults.

use chasm::bspline::BoundaryCondition;
use chasm::field::WignerField;
use chasm::grid::build_grid;
use chasm::harness::harmonic_omega;
use chasm::integrator::{lpc1_step, Lpc1Context, Potential, StepConfig};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rustfft::FftPlanner;

#[test]
#[ignore]
fn growth_spectrum() {
    let tau: f64 = std::env::var("SCRATCH_TAU")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(5e-4);
    let g = build_grid(1, (-12.0, 12.0), 240, 6.4, 512).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    let mut f: WignerField<f64> = WignerField::zeros(g.clone());
    for v in &mut f.values {
        *v = 1e-12 * rng.gen_range(-1.0..1.0f64);
    }
    let cfg = StepConfig {
        tau,
        potential: Potential::Harmonic {
            omega: std::env::var("SCRATCH_OMEGA").ok().and_then(|v| v.parse().ok()).unwrap_or(harmonic_omega()),
        },
        n_nb: 20,
        bc: BoundaryCondition::Natural,
    };
    let mut ctx = Lpc1Context::new(&g, &cfg).unwrap();
    let band_amp = |f: &WignerField<f64>| -> Vec<f64> {
        // max |f-hat(m)| over x rows, per band of 16 modes
        let nk = g.nk;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(nk);
        let mut bands = vec![0.0f64; nk / 2 / 16 + 1];
        for i in 0..g.nx_points() {
            let mut buf: Vec<Complex64> = f.slab(i)
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            fft.process(&mut buf);
            for (m, v) in buf.iter().enumerate().take(nk / 2) {
                let band = m / 16;
                bands[band] = bands[band].max(v.norm());
            }
        }
        bands
    };
    let b0 = band_amp(&f);
    let steps = 2000;
    for _ in 0..steps {
        lpc1_step(&mut f, &cfg, &mut ctx).unwrap();
    }
    let b1 = band_amp(&f);
    println!("band(mode range): growth-rate-per-step");
    for (i, (a, b)) in b0.iter().zip(&b1).enumerate() {
        let rate = (b / a).ln() / steps as f64;
        println!(
            "modes {:3}-{:3}: amp {:9.2e} -> {:9.2e}, rate {:+.3e}",
            i * 16,
            i * 16 + 15,
            a,
            b,
            rate
        );
    }
    // Spatial profile of the grown field: max |f| per x-column band.
    let n = g.nx_points();
    println!("x-column band: max|f|");
    for lo in (0..n).step_by(20) {
        let hi = (lo + 20).min(n);
        let mut m: f64 = 0.0;
        for i in lo..hi {
            for v in f.slab(i) {
                m = m.max(v.abs());
            }
        }
        println!("x[{:6.2},{:6.2}]: {:9.2e}", g.x(lo), g.x(hi - 1), m);
    }
}
