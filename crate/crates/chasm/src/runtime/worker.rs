//! One patch worker: local field storage, the distributed LPC1 step, and
//! the per-axis exchange protocol.
//!
//! The nonlocal operator is local in position, so a step communicates only
//! during advection: one boundary-contribution exchange per axis while the
//! local splines are closed, and one shared-plane correction exchange per
//! axis while the shifted values are interpolated. Both move data between
//! face neighbors only; corner coupling propagates through the sequential
//! per-axis correction passes.

use super::transport::{ExchangeMessage, MessageKind, WorkerLink};
use super::{PatchLayout, RefSampler};
use crate::advection::{
    axis_tap_table, expand_taps, interp_stage, solve_stage, zero_inflow_lines, PhiSource,
};
use crate::bspline::{BcKind, SplineSolver};
use crate::error::Result;
use crate::grid::PhaseSpaceGrid;
use crate::integrator::{PdoResources, StepConfig};
use crate::num::Real;
use crate::pmbc::PmbcTable;
use crate::tkm::PdoWorkspace;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

/// Per-patch error-metric partial sums over owned points.
#[derive(Debug, Clone, Copy)]
pub struct MetricPartial {
    pub time: f64,
    pub max_diff: f64,
    pub sq_sum: f64,
    pub mass_sum: f64,
}

pub struct WorkerOutput<R: Real> {
    pub id: usize,
    pub values: Vec<R>,
    pub partials: Vec<MetricPartial>,
    pub phase_nanos: BTreeMap<&'static str, u128>,
}

pub(super) struct Worker<R: Real> {
    pub layout: PatchLayout,
    pub grid: PhaseSpaceGrid,
    pub config: StepConfig,
    pub f: Vec<R>,
    theta: Vec<R>,
    reference: RefSampler<R>,
    table: Option<Arc<PmbcTable>>,
    pdo: Arc<PdoResources>,
    link: Box<dyn WorkerLink>,
    solver: SplineSolver,
    time: f64,
    timers: BTreeMap<&'static str, u128>,
}

impl<R: Real> Worker<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layout: PatchLayout,
        grid: PhaseSpaceGrid,
        config: StepConfig,
        values: Vec<R>,
        reference: RefSampler<R>,
        table: Option<Arc<PmbcTable>>,
        pdo: Arc<PdoResources>,
        link: Box<dyn WorkerLink>,
    ) -> Self {
        let solver = if layout.p == 1 {
            // Single-patch mode: the exact global closure.
            SplineSolver::new(layout.m, grid.h, config.bc_kind())
        } else {
            SplineSolver::new(layout.m, grid.h, BcKind::Hermite)
        };
        let len = values.len();
        Worker {
            layout,
            grid,
            config,
            f: values,
            theta: vec![R::zero(); len],
            reference,
            table,
            pdo,
            link,
            solver,
            time: 0.0,
            timers: BTreeMap::new(),
        }
    }

    fn record(&mut self, phase: &'static str, start: Instant) {
        *self.timers.entry(phase).or_insert(0) += start.elapsed().as_nanos();
    }

    fn npts(&self) -> usize {
        self.layout.m + 1
    }

    fn spatial_len(&self) -> usize {
        self.npts().pow(self.grid.dim as u32)
    }

    /// Global position of a local flat spatial index.
    fn x_of_local(&self, s: usize) -> [f64; 3] {
        let n = self.npts();
        let mut out = [0.0; 3];
        let mut rem = s;
        for a in (0..self.grid.dim).rev() {
            let loc = rem % n;
            rem /= n;
            out[a] = self.grid.x(self.layout.lo[a] + loc);
        }
        out
    }

    /// theta := Theta[source] over the local cube.
    fn compute_theta_local(&mut self, predictor: bool) {
        let start = Instant::now();
        let klen = self.grid.k_len();
        let grid = self.grid.clone();
        let source: Vec<f64> = if predictor {
            self.theta.iter().map(|v| v.to_f64()).collect()
        } else {
            self.f.iter().map(|v| v.to_f64()).collect()
        };
        let tau = self.config.tau;
        let xs: Vec<[f64; 3]> = (0..self.spatial_len()).map(|s| self.x_of_local(s)).collect();
        match (&*self.pdo, predictor) {
            (PdoResources::Harmonic(hp), _) => {
                let target: &mut [R] = if predictor {
                    // corrector: f += (tau/2) Theta[predictor]
                    &mut self.f
                } else {
                    &mut self.theta
                };
                target
                    .par_chunks_mut(klen)
                    .enumerate()
                    .for_each_init(
                        || (hp.make_buffers(), vec![0.0f64; klen]),
                        |(bufs, out), (s, row)| {
                            hp.row_into(&source[s * klen..(s + 1) * klen], xs[s][0], out, bufs);
                            if predictor {
                                for (fv, t) in row.iter_mut().zip(out.iter()) {
                                    *fv = R::from_f64(fv.to_f64() + 0.5 * tau * t);
                                }
                            } else {
                                for (fv, t) in row.iter_mut().zip(out.iter()) {
                                    *fv = R::from_f64(*t);
                                }
                            }
                        },
                    );
            }
            (PdoResources::Coulomb { tensor, centers }, _) => {
                let target: &mut [R] = if predictor { &mut self.f } else { &mut self.theta };
                target
                    .par_chunks_mut(klen)
                    .enumerate()
                    .for_each_init(
                        || (PdoWorkspace::new(grid.nk), vec![0.0f64; klen]),
                        |(ws, acc), (s, row)| {
                            acc.iter_mut().for_each(|v| *v = 0.0);
                            for c in centers {
                                ws.accumulate_pdo_coulomb_scaled(
                                    tensor,
                                    &source[s * klen..(s + 1) * klen],
                                    xs[s],
                                    c.position,
                                    c.charge,
                                    acc,
                                );
                            }
                            if predictor {
                                for (fv, t) in row.iter_mut().zip(acc.iter()) {
                                    *fv = R::from_f64(fv.to_f64() + 0.5 * tau * t);
                                }
                            } else {
                                for (fv, t) in row.iter_mut().zip(acc.iter()) {
                                    *fv = R::from_f64(*t);
                                }
                            }
                        },
                    );
            }
        }
        self.record(if predictor { "pdo_corrector" } else { "pdo_theta" }, start);
    }

    /// Weighted combination of line planes: out[b][p] = sum_j c_j in[b][line_j][p].
    fn line_combo(
        input: &[f64],
        blocks: usize,
        npts: usize,
        plane: usize,
        terms: &[(usize, f64)],
    ) -> Vec<f64> {
        let mut out = vec![0.0; blocks * plane];
        out.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(b, oplane)| {
                let block = &input[b * npts * plane..(b + 1) * npts * plane];
                for &(line, c) in terms {
                    for (o, v) in oplane.iter_mut().zip(&block[line * plane..(line + 1) * plane]) {
                        *o += c * v;
                    }
                }
            });
        out
    }

    /// Distributed spline closure for one axis: exchange half-stencil
    /// contributions with the axis neighbors and return per-line clamped
    /// derivative planes (left, right) for each field.
    fn exchange_pmbc(
        &mut self,
        axis: usize,
        cur: &[Vec<f64>],
        blocks: usize,
        plane: usize,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let table = self.table.as_ref().expect("pmbc table in multi-patch mode").clone();
        let m = self.layout.m;
        let npts = m + 1;
        let coords = self.layout.coords[axis];
        let p = self.layout.p;
        let nf = cur.len();

        let mut phi_l: Vec<Vec<f64>> = Vec::with_capacity(nf);
        let mut phi_r: Vec<Vec<f64>> = Vec::with_capacity(nf);

        // Terms for own contributions.
        let xi_terms = |interface: usize, low_side: bool| -> Vec<(usize, f64)> {
            let st = &table.interfaces[interface - 1];
            let mut t = Vec::with_capacity(table.n_nb + 1);
            if low_side {
                // xi_L: own samples from the patch's low edge upward (c_plus).
                t.push((0, 0.5 * st.c0));
                for j in 1..=table.n_nb {
                    t.push((j, st.c_plus[j]));
                }
            } else {
                // xi_R: own samples from the high edge downward (c_minus).
                t.push((m, 0.5 * st.c0));
                for j in 1..=table.n_nb {
                    t.push((m - j, st.c_minus[j]));
                }
            }
            t
        };

        let start = Instant::now();
        let mut xi_l: Vec<Vec<f64>> = Vec::new();
        let mut xi_r: Vec<Vec<f64>> = Vec::new();
        for f in cur {
            if coords > 0 {
                xi_l.push(Self::line_combo(f, blocks, npts, plane, &xi_terms(coords, true)));
            }
            if coords + 1 < p {
                xi_r.push(Self::line_combo(
                    f,
                    blocks,
                    npts,
                    plane,
                    &xi_terms(coords + 1, false),
                ));
            }
        }
        self.record("pmbc_stencil", start);

        let start = Instant::now();
        // Post all sends, then await receives: deadlock-free on the fixed graph.
        if coords > 0 {
            let payload: Vec<f64> = xi_l.iter().flat_map(|v| v.iter().copied()).collect();
            self.link.send(
                self.layout.neighbor(axis, -1).unwrap(),
                ExchangeMessage {
                    kind: MessageKind::PmbcContrib,
                    axis: axis as u8,
                    mask: Vec::new(),
                    payload,
                },
            );
        }
        if coords + 1 < p {
            let payload: Vec<f64> = xi_r.iter().flat_map(|v| v.iter().copied()).collect();
            self.link.send(
                self.layout.neighbor(axis, 1).unwrap(),
                ExchangeMessage {
                    kind: MessageKind::PmbcContrib,
                    axis: axis as u8,
                    mask: Vec::new(),
                    payload,
                },
            );
        }

        // Left boundary planes.
        if coords > 0 {
            let from = self.layout.neighbor(axis, -1).unwrap();
            let msg = self.link.recv(from);
            debug_assert_eq!(msg.kind, MessageKind::PmbcContrib);
            let chunk = blocks * plane;
            for (fi, own) in xi_l.iter().enumerate() {
                let other = &msg.payload[fi * chunk..(fi + 1) * chunk];
                phi_l.push(own.iter().zip(other).map(|(a, b)| a + b).collect());
            }
        } else {
            for f in cur {
                let planes = match table.bc_kind {
                    BcKind::Natural => {
                        let terms: Vec<(usize, f64)> = table
                            .c_first
                            .iter()
                            .enumerate()
                            .map(|(j, &c)| (j, c))
                            .collect();
                        Self::line_combo(f, blocks, npts, plane, &terms)
                    }
                    // Global clamped data: zero end derivatives.
                    BcKind::Hermite => vec![0.0; blocks * plane],
                };
                phi_l.push(planes);
            }
        }
        // Right boundary planes.
        if coords + 1 < p {
            let from = self.layout.neighbor(axis, 1).unwrap();
            let msg = self.link.recv(from);
            debug_assert_eq!(msg.kind, MessageKind::PmbcContrib);
            let chunk = blocks * plane;
            for (fi, own) in xi_r.iter().enumerate() {
                let other = &msg.payload[fi * chunk..(fi + 1) * chunk];
                phi_r.push(own.iter().zip(other).map(|(a, b)| a + b).collect());
            }
        } else {
            for f in cur {
                let planes = match table.bc_kind {
                    BcKind::Natural => {
                        let terms: Vec<(usize, f64)> = table
                            .c_last
                            .iter()
                            .enumerate()
                            .map(|(j, c)| (m - j, *c))
                            .collect();
                        Self::line_combo(f, blocks, npts, plane, &terms)
                    }
                    BcKind::Hermite => vec![0.0; blocks * plane],
                };
                phi_r.push(planes);
            }
        }
        self.record("pmbc_exchange", start);
        (phi_l, phi_r)
    }

    /// Shift-sign per wave-vector component index along one axis:
    /// +1 moves the foot left of the node, -1 right, 0 on the node.
    fn axis_signs(&self, tau: f64) -> Vec<i8> {
        (0..self.grid.nk)
            .map(|mi| {
                let k = self.grid.k(mi);
                let a = k * tau;
                if a > 0.0 {
                    1
                } else if a < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Correction exchange after the interpolation pass along `axis`:
    /// positive shifts make the low shared plane wrong here and right on
    /// the lower neighbor, and mirrored for negative shifts.
    fn exchange_corrections(
        &mut self,
        axis: usize,
        bufs: &mut [Vec<f64>],
        blocks: usize,
        plane: usize,
        tau: f64,
    ) {
        if self.layout.p == 1 {
            return;
        }
        let start = Instant::now();
        let npts = self.npts();
        let m = self.layout.m;
        let k_len = self.grid.k_len();
        let signs = self.axis_signs(tau);
        let stride = self.grid.nk.pow((self.grid.dim - 1 - axis) as u32);
        let keep_pos: Vec<bool> = (0..k_len)
            .map(|q| signs[(q / stride) % self.grid.nk] > 0)
            .collect();
        let keep_neg: Vec<bool> = (0..k_len)
            .map(|q| signs[(q / stride) % self.grid.nk] < 0)
            .collect();
        let mask_bytes: Vec<u8> = signs.iter().map(|&s| (s + 1) as u8).collect();

        let pack = |bufs: &[Vec<f64>], line: usize, keep: &[bool]| -> Vec<f64> {
            let mut out = Vec::new();
            for f in bufs {
                for b in 0..blocks {
                    let pl = &f[(b * npts + line) * plane..(b * npts + line + 1) * plane];
                    for (r, chunk) in pl.chunks(k_len).enumerate() {
                        let _ = r;
                        for (q, v) in chunk.iter().enumerate() {
                            if keep[q] {
                                out.push(*v);
                            }
                        }
                    }
                }
            }
            out
        };

        let coords = self.layout.coords[axis];
        let p = self.layout.p;
        // Send the correct values: high plane to the upper neighbor for
        // positive shifts, low plane to the lower neighbor for negative.
        if coords + 1 < p {
            self.link.send(
                self.layout.neighbor(axis, 1).unwrap(),
                ExchangeMessage {
                    kind: MessageKind::AdvectionCorrection,
                    axis: axis as u8,
                    mask: mask_bytes.clone(),
                    payload: pack(bufs, m, &keep_pos),
                },
            );
        }
        if coords > 0 {
            self.link.send(
                self.layout.neighbor(axis, -1).unwrap(),
                ExchangeMessage {
                    kind: MessageKind::AdvectionCorrection,
                    axis: axis as u8,
                    mask: mask_bytes.clone(),
                    payload: pack(bufs, 0, &keep_neg),
                },
            );
        }

        let unpack = |bufs: &mut [Vec<f64>], line: usize, keep: &[bool], msg: ExchangeMessage| {
            debug_assert_eq!(msg.kind, MessageKind::AdvectionCorrection);
            debug_assert_eq!(msg.mask, mask_bytes);
            let mut it = msg.payload.into_iter();
            for f in bufs.iter_mut() {
                for b in 0..blocks {
                    let pl = &mut f[(b * npts + line) * plane..(b * npts + line + 1) * plane];
                    for chunk in pl.chunks_mut(k_len) {
                        for (q, v) in chunk.iter_mut().enumerate() {
                            if keep[q] {
                                *v = it.next().expect("short correction payload");
                            }
                        }
                    }
                }
            }
            debug_assert!(it.next().is_none(), "oversized correction payload");
        };

        if coords > 0 {
            let from = self.layout.neighbor(axis, -1).unwrap();
            let msg = self.link.recv(from);
            unpack(bufs, 0, &keep_pos, msg);
        }
        if coords + 1 < p {
            let from = self.layout.neighbor(axis, 1).unwrap();
            let msg = self.link.recv(from);
            unpack(bufs, m, &keep_neg, msg);
        }
        self.record("correction_exchange", start);
    }

    /// Advect f and theta jointly by one step.
    fn advect_fields(&mut self, tau: f64) -> Result<()> {
        let d = self.grid.dim;
        let m = self.layout.m;
        let npts = m + 1;
        let k_len = self.grid.k_len();
        let (tab, signs) = axis_tap_table(self.grid.nk, self.grid.l_k, tau, self.grid.h)?;

        // Working copies in f64.
        let mut cur: Vec<Vec<f64>> = vec![
            self.f.iter().map(|v| v.to_f64()).collect(),
            self.theta.iter().map(|v| v.to_f64()).collect(),
        ];

        // Spline solves, one axis at a time; the solved axis becomes the
        // outermost dimension.
        for axis in 0..d {
            let blocks = (m + 3).pow(axis as u32);
            let plane = npts.pow((d - 1 - axis) as u32) * k_len;
            let phi = if self.layout.p > 1 {
                Some(self.exchange_pmbc(axis, &cur, blocks, plane))
            } else {
                None
            };
            let start = Instant::now();
            let mut next: Vec<Vec<f64>> = Vec::with_capacity(cur.len());
            for (fi, f) in cur.iter().enumerate() {
                let mut out = Vec::new();
                match &phi {
                    Some((l, r)) => solve_stage(
                        &self.solver,
                        f,
                        blocks,
                        plane,
                        PhiSource::Planes(&l[fi], &r[fi]),
                        &mut out,
                    ),
                    None => {
                        let src = match self.solver.bc_kind {
                            BcKind::Natural => PhiSource::None,
                            BcKind::Hermite => PhiSource::Const(0.0, 0.0),
                        };
                        solve_stage(&self.solver, f, blocks, plane, src, &mut out)
                    }
                }
                next.push(out);
            }
            cur = next;
            self.record("advect_solve", start);
        }

        // Factorized interpolation with per-axis corrections; true domain
        // edges take zero inflow.
        for axis in 0..d {
            let blocks = npts.pow(axis as u32);
            let plane = (m + 3).pow((d - 1 - axis) as u32) * k_len;
            let wk = expand_taps(&tab, d, axis, k_len);
            let low_edge = self.layout.coords[axis] == 0;
            let high_edge = self.layout.coords[axis] + 1 == self.layout.p;
            let start = Instant::now();
            let mut next: Vec<Vec<f64>> = Vec::with_capacity(cur.len());
            for f in cur.iter() {
                let mut out = Vec::new();
                interp_stage(f, blocks, m, plane, &wk, k_len, &mut out);
                zero_inflow_lines(
                    &mut out, blocks, m, plane, k_len, &signs, d, axis, low_edge, high_edge,
                );
                next.push(out);
            }
            cur = next;
            self.record("advect_interp", start);
            self.exchange_corrections(axis, &mut cur, blocks, plane, tau);
        }

        for (v, o) in self.f.iter_mut().zip(&cur[0]) {
            *v = R::from_f64(*o);
        }
        for (v, o) in self.theta.iter_mut().zip(&cur[1]) {
            *v = R::from_f64(*o);
        }
        Ok(())
    }

    /// One LPC1 step on the local cube.
    pub fn step(&mut self) -> Result<()> {
        let tau = self.config.tau;
        self.compute_theta_local(false);
        self.advect_fields(tau)?;
        // f -> corrector base, theta -> predictor.
        let start = Instant::now();
        for (fv, tv) in self.f.iter_mut().zip(self.theta.iter_mut()) {
            let t = tv.to_f64();
            let base = fv.to_f64() + 0.5 * tau * t;
            *fv = R::from_f64(base);
            *tv = R::from_f64(base + 0.5 * tau * t);
        }
        self.record("combine", start);
        self.compute_theta_local(true);
        if let PdoResources::Harmonic(hp) = &*self.pdo {
            if hp.omega != 0.0 {
                let start = Instant::now();
                hp.filter_rows(&mut self.f);
                self.record("spectral_filter", start);
            }
        }
        self.time += tau;
        Ok(())
    }

    /// Metric partials over owned points against the configured reference.
    pub fn metric_partial(&self) -> MetricPartial {
        let n = self.npts();
        let d = self.grid.dim;
        let klen = self.grid.k_len();
        let own_from: Vec<usize> = (0..d)
            .map(|a| usize::from(self.layout.coords[a] > 0))
            .collect();
        let mut max_diff: f64 = 0.0;
        let mut sq_sum = 0.0;
        let mut mass_sum = 0.0;
        let mut reference_row = vec![0.0f64; klen];
        for s in 0..self.spatial_len() {
            // ownership test
            let mut rem = s;
            let mut owned = true;
            let mut coords_loc = [0usize; 3];
            for a in (0..d).rev() {
                coords_loc[a] = rem % n;
                rem /= n;
            }
            for a in 0..d {
                if coords_loc[a] < own_from[a] {
                    owned = false;
                }
            }
            if !owned {
                continue;
            }
            self.reference.sample_row(
                &self.grid,
                &self.layout,
                &coords_loc,
                self.time,
                s,
                &mut reference_row,
            );
            for (q, r) in reference_row.iter().enumerate() {
                let v = self.f[s * klen + q].to_f64();
                let dd = v - r;
                max_diff = max_diff.max(dd.abs());
                sq_sum += dd * dd;
                mass_sum += v;
            }
        }
        MetricPartial {
            time: self.time,
            max_diff,
            sq_sum,
            mass_sum,
        }
    }

    pub fn into_output(self, partials: Vec<MetricPartial>) -> WorkerOutput<R> {
        WorkerOutput {
            id: self.layout.id,
            values: self.f,
            partials,
            phase_nanos: self.timers,
        }
    }
}
