//! Patch decomposition of position space and the bulk-synchronous run loop.
//!
//! Position space splits into p^d patches that share their interface
//! planes; wave-vector space is never decomposed (the nonlocal operator
//! needs all of it at each position). One worker thread owns each patch;
//! workers share only immutable tables and move boundary data through
//! explicit messages. Reductions merge in ascending patch order, so a run
//! is bitwise reproducible regardless of scheduling.

pub mod transport;
mod worker;

use crate::error::{ChasmError, Result};
use crate::field::{ErrorReport, WignerField};
use crate::grid::PhaseSpaceGrid;
use crate::integrator::{PdoResources, StepConfig};
use crate::num::Real;
use crate::pmbc::{build_pmbc_table_with_h, PmbcTable};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;
use transport::{channel_endpoints, socket_endpoints, TransportCounters, WorkerLink};
use worker::{MetricPartial, Worker};

/// One patch of the position-space decomposition.
#[derive(Debug, Clone)]
pub struct PatchLayout {
    pub dim: usize,
    /// Patches per axis.
    pub p: usize,
    /// Flat patch index, row-major over the axis coordinates.
    pub id: usize,
    pub coords: [usize; 3],
    /// Intervals per patch and axis; the patch owns m+1 nodes per axis.
    pub m: usize,
    /// First owned global node index per axis (coords * m); interface
    /// nodes are shared with the lower neighbor.
    pub lo: [usize; 3],
}

impl PatchLayout {
    /// Flat id of the face neighbor along `axis` (dir = -1 or +1).
    pub fn neighbor(&self, axis: usize, dir: i32) -> Option<usize> {
        let c = self.coords[axis] as i64 + dir as i64;
        if c < 0 || c >= self.p as i64 {
            return None;
        }
        let mut coords = self.coords;
        coords[axis] = c as usize;
        let mut id = 0;
        for a in 0..self.dim {
            id = id * self.p + coords[a];
        }
        Some(id)
    }

    pub fn neighbor_count(&self) -> usize {
        (0..self.dim)
            .map(|a| {
                usize::from(self.neighbor(a, -1).is_some())
                    + usize::from(self.neighbor(a, 1).is_some())
            })
            .sum()
    }
}

/// Split the grid into p^dim patches with shared interface planes.
pub fn decompose(grid: &PhaseSpaceGrid, p: usize) -> Result<Vec<PatchLayout>> {
    if p == 0 || grid.nx % p != 0 {
        return Err(ChasmError::InvalidConfig(format!(
            "patch count {p} must divide nx = {}",
            grid.nx
        )));
    }
    let m = grid.nx / p;
    let count = p.pow(grid.dim as u32);
    let mut out = Vec::with_capacity(count);
    for id in 0..count {
        let mut coords = [0usize; 3];
        let mut rem = id;
        for a in (0..grid.dim).rev() {
            coords[a] = rem % p;
            rem /= p;
        }
        let mut lo = [0usize; 3];
        for a in 0..grid.dim {
            lo[a] = coords[a] * m;
        }
        out.push(PatchLayout {
            dim: grid.dim,
            p,
            id,
            coords,
            m,
            lo,
        });
    }
    Ok(out)
}

/// Reference the error metrics are taken against.
pub(crate) enum RefSampler<R: Real> {
    /// Exact harmonic characteristics applied to a Gaussian profile.
    HarmonicGaussian {
        omega: f64,
        center_x: f64,
        center_k: f64,
        a: f64,
        b: f64,
    },
    /// The initial local cube (stationary or drift-diagnostic references).
    Initial(Vec<R>),
}

impl<R: Real> RefSampler<R> {
    fn sample_row(
        &self,
        grid: &PhaseSpaceGrid,
        layout: &PatchLayout,
        coords_loc: &[usize; 3],
        time: f64,
        s_local: usize,
        out: &mut [f64],
    ) {
        match self {
            RefSampler::HarmonicGaussian {
                omega,
                center_x,
                center_k,
                a,
                b,
            } => {
                let x = grid.x(layout.lo[0] + coords_loc[0]);
                let sw = omega.sqrt();
                let (c, s) = ((sw * time).cos(), (sw * time).sin());
                let norm = 1.0 / std::f64::consts::PI;
                for (j, o) in out.iter_mut().enumerate() {
                    let k = grid.k(j);
                    let xt = c * x - s * k / sw;
                    let kt = sw * s * x + c * k;
                    *o = norm
                        * (-a * (xt - center_x) * (xt - center_x)
                            - b * (kt - center_k) * (kt - center_k))
                            .exp();
                }
            }
            RefSampler::Initial(values) => {
                let klen = grid.k_len();
                for (o, v) in out.iter_mut().zip(&values[s_local * klen..(s_local + 1) * klen]) {
                    *o = v.to_f64();
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    /// In-process channels between worker threads (default).
    Channels,
    /// Loopback TCP sockets, exercising the wire path.
    Sockets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSpec {
    /// Exact harmonic flow of the Gaussian initial condition (dim 1).
    ExactCharacteristics,
    /// Deviation from the initial field (stationary tests, drift reports).
    Initial,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub grid: PhaseSpaceGrid,
    pub step: StepConfig,
    /// Patches per axis.
    pub p: usize,
    pub steps: usize,
    /// Metric cadence in steps (metrics are always taken at start and end).
    pub cadence: usize,
    pub reference: ReferenceSpec,
    pub transport: TransportKind,
}

#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub steps: usize,
    pub patches: usize,
    pub wall_seconds: f64,
    pub messages: u64,
    pub bytes: u64,
    /// Cpu time per phase summed over workers.
    pub phase_seconds: BTreeMap<&'static str, f64>,
}

pub struct SimulationOutput<R: Real> {
    pub field: WignerField<R>,
    pub metrics: Vec<ErrorReport>,
    pub stats: RunStats,
}

/// Scatter a global field into per-patch cubes (interface planes copied to
/// both owners).
pub fn scatter<R: Real>(field: &WignerField<R>, layouts: &[PatchLayout]) -> Vec<Vec<R>> {
    let grid = &field.grid;
    let klen = grid.k_len();
    let n_glob = grid.nx_points();
    layouts
        .iter()
        .map(|l| {
            let npts = l.m + 1;
            let local_spatial = npts.pow(grid.dim as u32);
            let mut out = Vec::with_capacity(local_spatial * klen);
            for s in 0..local_spatial {
                let mut rem = s;
                let mut g = 0usize;
                let mut idx = [0usize; 3];
                for a in (0..grid.dim).rev() {
                    idx[a] = rem % npts;
                    rem /= npts;
                }
                for a in 0..grid.dim {
                    g = g * n_glob + (l.lo[a] + idx[a]);
                }
                out.extend_from_slice(&field.values[g * klen..(g + 1) * klen]);
            }
            out
        })
        .collect()
}

/// Gather per-patch cubes back into a global field; each global point is
/// written by its owner (the lowest-coordinate patch holding it).
pub fn gather<R: Real>(
    grid: &PhaseSpaceGrid,
    layouts: &[PatchLayout],
    cubes: &[(usize, Vec<R>)],
    time: f64,
) -> WignerField<R> {
    let klen = grid.k_len();
    let n_glob = grid.nx_points();
    let mut field = WignerField::zeros(grid.clone());
    field.time = time;
    for (id, cube) in cubes {
        let l = &layouts[*id];
        let npts = l.m + 1;
        let local_spatial = npts.pow(grid.dim as u32);
        for s in 0..local_spatial {
            let mut rem = s;
            let mut idx = [0usize; 3];
            for a in (0..grid.dim).rev() {
                idx[a] = rem % npts;
                rem /= npts;
            }
            // Owner rule: skip the shared low plane unless at the edge.
            let mut owned = true;
            for a in 0..grid.dim {
                if idx[a] == 0 && l.coords[a] > 0 {
                    owned = false;
                }
            }
            if !owned {
                continue;
            }
            let mut g = 0usize;
            for a in 0..grid.dim {
                g = g * n_glob + (l.lo[a] + idx[a]);
            }
            field.values[g * klen..(g + 1) * klen]
                .copy_from_slice(&cube[s * klen..(s + 1) * klen]);
        }
    }
    field
}

fn make_reference<R: Real>(
    cfg: &SimulationConfig,
    initial_cubes: &[Vec<R>],
    id: usize,
) -> Result<RefSampler<R>> {
    match cfg.reference {
        ReferenceSpec::Initial => Ok(RefSampler::Initial(initial_cubes[id].clone())),
        ReferenceSpec::ExactCharacteristics => match &cfg.step.potential {
            crate::integrator::Potential::Harmonic { omega } if *omega > 0.0 => {
                Ok(RefSampler::HarmonicGaussian {
                    omega: *omega,
                    center_x: 1.0,
                    center_k: 0.0,
                    a: 0.5,
                    b: 2.0,
                })
            }
            _ => Err(ChasmError::InvalidConfig(
                "exact-characteristics reference needs the harmonic potential".into(),
            )),
        },
    }
}

/// Run `steps` LPC1 steps on the decomposed domain with the given initial
/// field, returning the final global field, the metric time series and the
/// run statistics. Results are bitwise independent of worker scheduling.
pub fn run_simulation<R: Real>(
    cfg: &SimulationConfig,
    initial: &WignerField<R>,
) -> Result<SimulationOutput<R>> {
    cfg.step.validate(&cfg.grid)?;
    if initial.grid != cfg.grid {
        return Err(ChasmError::GridMismatch("initial field grid".into()));
    }
    let layouts = decompose(&cfg.grid, cfg.p)?;
    let m = cfg.grid.nx / cfg.p;
    if cfg.p > 1 && cfg.step.n_nb > m {
        return Err(ChasmError::InvalidConfig(format!(
            "stencil half-length {} exceeds the patch width {m}",
            cfg.step.n_nb
        )));
    }

    let table: Option<Arc<PmbcTable>> = if cfg.p > 1 {
        Some(Arc::new(build_pmbc_table_with_h(
            cfg.grid.nx,
            cfg.p,
            cfg.step.n_nb,
            cfg.grid.h,
            &cfg.step.bc,
        )?))
    } else {
        None
    };
    let pdo = Arc::new(PdoResources::build(&cfg.grid, &cfg.step.potential)?);

    let initial_mass = initial.mass();
    let cubes = scatter(initial, &layouts);

    // Neighbor edge list for the transport.
    let mut edges = Vec::new();
    for l in &layouts {
        for a in 0..cfg.grid.dim {
            if let Some(nb) = l.neighbor(a, 1) {
                edges.push((l.id, nb));
            }
        }
    }
    let counters = Arc::new(TransportCounters::default());
    let links: Vec<Box<dyn WorkerLink>> = match cfg.transport {
        TransportKind::Channels => channel_endpoints(layouts.len(), &edges, counters.clone())
            .into_iter()
            .map(|e| Box::new(e) as Box<dyn WorkerLink>)
            .collect(),
        TransportKind::Sockets => socket_endpoints(layouts.len(), &edges, counters.clone())?
            .into_iter()
            .map(|e| Box::new(e) as Box<dyn WorkerLink>)
            .collect(),
    };

    let mut references = Vec::with_capacity(layouts.len());
    for id in 0..layouts.len() {
        references.push(make_reference(cfg, &cubes, id)?);
    }
    let mut workers: Vec<Worker<R>> = Vec::with_capacity(layouts.len());
    let mut link_iter = links.into_iter();
    for (id, (cube, reference)) in cubes.into_iter().zip(references).enumerate() {
        workers.push(Worker::new(
            layouts[id].clone(),
            cfg.grid.clone(),
            cfg.step.clone(),
            cube,
            reference,
            table.clone(),
            pdo.clone(),
            link_iter.next().unwrap(),
        ));
    }

    let metric_steps: Vec<usize> = {
        let mut v = vec![0];
        if cfg.cadence > 0 {
            let mut s = cfg.cadence;
            while s < cfg.steps {
                v.push(s);
                s += cfg.cadence;
            }
        }
        v.push(cfg.steps);
        v.dedup();
        v
    };

    let steps = cfg.steps;
    let wall = Instant::now();
    let outputs: Vec<worker::WorkerOutput<R>> = std::thread::scope(|scope| {
        let handles: Vec<_> = workers
            .into_iter()
            .map(|mut w| {
                let metric_steps = metric_steps.clone();
                scope.spawn(move || -> Result<worker::WorkerOutput<R>> {
                    let mut partials: Vec<MetricPartial> = vec![w.metric_partial()];
                    for step in 1..=steps {
                        w.step()?;
                        if metric_steps.contains(&step) {
                            partials.push(w.metric_partial());
                        }
                    }
                    Ok(w.into_output(partials))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let wall_seconds = wall.elapsed().as_secs_f64();

    // Merge in ascending patch order for bitwise determinism.
    let mut ordered: Vec<&worker::WorkerOutput<R>> = outputs.iter().collect();
    ordered.sort_by_key(|o| o.id);
    let vol = cfg.grid.cell_volume();
    let rows = ordered[0].partials.len();
    let mut metrics = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut max_diff: f64 = 0.0;
        let mut sq = 0.0;
        let mut mass = 0.0;
        let mut time = 0.0;
        for o in &ordered {
            let p = o.partials[r];
            max_diff = max_diff.max(p.max_diff);
            sq += p.sq_sum;
            mass += p.mass_sum;
            time = p.time;
        }
        metrics.push(ErrorReport {
            eps_inf: max_diff,
            eps_2: (sq * vol).sqrt(),
            eps_mass: (mass * vol - initial_mass).abs(),
            time,
        });
    }

    let mut phase_seconds: BTreeMap<&'static str, f64> = BTreeMap::new();
    for o in &ordered {
        for (k, v) in &o.phase_nanos {
            *phase_seconds.entry(k).or_insert(0.0) += *v as f64 * 1e-9;
        }
    }
    let final_time = cfg.step.tau * cfg.steps as f64;
    let cube_refs: Vec<(usize, Vec<R>)> = outputs
        .into_iter()
        .map(|o| (o.id, o.values))
        .collect();
    let field = gather(&cfg.grid, &layouts, &cube_refs, final_time);

    Ok(SimulationOutput {
        field,
        metrics,
        stats: RunStats {
            steps: cfg.steps,
            patches: layouts.len(),
            wall_seconds,
            messages: counters.messages.load(std::sync::atomic::Ordering::Relaxed),
            bytes: counters.bytes.load(std::sync::atomic::Ordering::Relaxed),
            phase_seconds,
        },
    })
}
