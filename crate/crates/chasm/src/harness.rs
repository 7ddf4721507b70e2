//! Experiment harness: plain-text configuration, desk-scale experiment
//! drivers, and the TKM/convergence study runners.

use crate::bspline::BoundaryCondition;
use crate::error::{ChasmError, Result};
use crate::field::{init_gaussian, init_hydrogen_1s, ErrorReport, WignerField};
use crate::grid::{build_grid, PhaseSpaceGrid};
use crate::integrator::{Potential, ProtonCenter, StepConfig};
use crate::num::Real;
use crate::runtime::{
    run_simulation, ReferenceSpec, RunStats, SimulationConfig, TransportKind,
};
use crate::tkm::{gaussian_convolution_reference, ConvolutionTensor, PdoWorkspace};
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    TkmGaussianTable,
    Harmonic2d,
    Hydrogen1s,
    OneProton,
    TwoProtons,
}

impl Experiment {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tkm_gaussian_table" | "tkm-table" | "tkm" => Experiment::TkmGaussianTable,
            "harmonic2d" | "harmonic" => Experiment::Harmonic2d,
            "hydrogen1s" | "hydrogen" => Experiment::Hydrogen1s,
            "one_proton" | "one-proton" => Experiment::OneProton,
            "two_protons" | "two-protons" => Experiment::TwoProtons,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::TkmGaussianTable => "tkm_gaussian_table",
            Experiment::Harmonic2d => "harmonic2d",
            Experiment::Hydrogen1s => "hydrogen1s",
            Experiment::OneProton => "one_proton",
            Experiment::TwoProtons => "two_protons",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// Proton separation of the two-center example, in atomic units.
pub const TWO_PROTON_HALF_SEPARATION: f64 = 0.614161;

/// Oscillator constant giving a period of 10 atomic time units.
pub fn harmonic_omega() -> f64 {
    (PI / 5.0) * (PI / 5.0)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub nx: usize,
    pub nk: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub l_k: f64,
    pub tau: f64,
    pub t_final: f64,
    pub n_nb: usize,
    pub p: usize,
    pub bc: BoundaryCondition,
    pub precision: Precision,
    pub out_dir: Option<PathBuf>,
    /// Metric cadence in steps.
    pub cadence: usize,
    /// Offset-window length for the Hydrogen-1s transform.
    pub ny: usize,
    pub transport: TransportKind,
    /// Cap on the TKM table resolutions (table experiment only).
    pub nk_max: usize,
    /// Keys that were given explicitly (everything else is a default).
    provided: BTreeSet<String>,
}

fn defaults_for(experiment: Experiment) -> ExperimentConfig {
    let base = ExperimentConfig {
        experiment,
        nx: 240,
        nk: 512,
        x_min: -12.0,
        x_max: 12.0,
        l_k: 6.4,
        tau: 5e-4,
        t_final: 10.0,
        n_nb: 20,
        p: 4,
        bc: BoundaryCondition::Natural,
        precision: Precision::F64,
        out_dir: None,
        cadence: 20,
        ny: 128,
        transport: TransportKind::Channels,
        nk_max: 128,
        provided: BTreeSet::new(),
    };
    match experiment {
        Experiment::Harmonic2d => base,
        Experiment::TkmGaussianTable => ExperimentConfig {
            l_k: 16.0,
            nk: 128,
            tau: 0.0,
            t_final: 0.0,
            p: 1,
            ..base
        },
        Experiment::Hydrogen1s => ExperimentConfig {
            nx: 20,
            nk: 16,
            x_min: -9.0,
            x_max: 9.0,
            l_k: 6.4,
            tau: 0.025,
            t_final: 1.0,
            n_nb: 15,
            p: 1,
            ..base
        },
        Experiment::OneProton | Experiment::TwoProtons => ExperimentConfig {
            nx: 20,
            nk: 16,
            x_min: -9.0,
            x_max: 9.0,
            l_k: 4.8,
            tau: 0.025,
            t_final: 1.0,
            n_nb: 15,
            p: 1,
            ..base
        },
    }
}

/// Parse `key = value` lines. Blank lines and `#` comments are allowed;
/// unknown keys are rejected with their line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    // First pass: find the experiment so defaults can be filled.
    let mut experiment = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            if k.trim().eq_ignore_ascii_case("experiment") {
                experiment = Some((idx + 1, v.trim().to_string()));
            }
        }
    }
    let (exp_line, exp_name) = experiment.ok_or(ChasmError::ConfigParse {
        line: 0,
        msg: "missing required key: experiment".into(),
    })?;
    let experiment = Experiment::parse(&exp_name).ok_or(ChasmError::ConfigParse {
        line: exp_line,
        msg: format!("unknown experiment '{exp_name}'"),
    })?;

    let mut cfg = defaults_for(experiment);

    let parse_f64 = |line: usize, k: &str, v: &str| -> Result<f64> {
        v.parse::<f64>().map_err(|_| ChasmError::ConfigParse {
            line,
            msg: format!("key '{k}' needs a number, got '{v}'"),
        })
    };
    let parse_usize = |line: usize, k: &str, v: &str| -> Result<usize> {
        v.parse::<usize>().map_err(|_| ChasmError::ConfigParse {
            line,
            msg: format!("key '{k}' needs a nonnegative integer, got '{v}'"),
        })
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ChasmError::ConfigParse {
            line: line_no,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = k.trim().to_ascii_lowercase();
        let v = v.trim();
        match key.as_str() {
            "experiment" => {}
            "nx" => cfg.nx = parse_usize(line_no, &key, v)?,
            "nk" => cfg.nk = parse_usize(line_no, &key, v)?,
            "x_min" => cfg.x_min = parse_f64(line_no, &key, v)?,
            "x_max" => cfg.x_max = parse_f64(line_no, &key, v)?,
            "l_k" => cfg.l_k = parse_f64(line_no, &key, v)?,
            "tau" => cfg.tau = parse_f64(line_no, &key, v)?,
            "t" | "t_final" => cfg.t_final = parse_f64(line_no, &key, v)?,
            "n_nb" => cfg.n_nb = parse_usize(line_no, &key, v)?,
            "p" | "patches" => cfg.p = parse_usize(line_no, &key, v)?,
            "bc" => {
                cfg.bc = match v {
                    "natural" => BoundaryCondition::Natural,
                    "hermite" => BoundaryCondition::Hermite(0.0, 0.0),
                    _ => {
                        return Err(ChasmError::ConfigParse {
                            line: line_no,
                            msg: format!("bc must be 'natural' or 'hermite', got '{v}'"),
                        })
                    }
                }
            }
            "precision" => {
                cfg.precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => {
                        return Err(ChasmError::ConfigParse {
                            line: line_no,
                            msg: format!("precision must be 'f32' or 'f64', got '{v}'"),
                        })
                    }
                }
            }
            "out" | "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
            "cadence" | "dump_every" => cfg.cadence = parse_usize(line_no, &key, v)?,
            "ny" => cfg.ny = parse_usize(line_no, &key, v)?,
            "nk_max" => cfg.nk_max = parse_usize(line_no, &key, v)?,
            "transport" => {
                cfg.transport = match v {
                    "channels" => TransportKind::Channels,
                    "sockets" => TransportKind::Sockets,
                    _ => {
                        return Err(ChasmError::ConfigParse {
                            line: line_no,
                            msg: format!("transport must be 'channels' or 'sockets', got '{v}'"),
                        })
                    }
                }
            }
            _ => {
                return Err(ChasmError::ConfigParse {
                    line: line_no,
                    msg: format!("unknown key '{}'", k.trim()),
                })
            }
        }
        cfg.provided.insert(key);
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.experiment != Experiment::TkmGaussianTable {
            for (key, given) in [
                ("tau", self.provided.contains("tau") || self.tau > 0.0),
                (
                    "t",
                    self.provided.contains("t")
                        || self.provided.contains("t_final")
                        || self.t_final > 0.0,
                ),
            ] {
                if !given {
                    return Err(ChasmError::ConfigParse {
                        line: 0,
                        msg: format!("missing required key: {key}"),
                    });
                }
            }
            if !(self.tau > 0.0) {
                return Err(ChasmError::InvalidConfig("tau must be positive".into()));
            }
            if !(self.t_final > 0.0) {
                return Err(ChasmError::InvalidConfig("t must be positive".into()));
            }
            if self.nk % 2 != 0 {
                return Err(ChasmError::InvalidConfig(format!(
                    "nk must be even, got {}",
                    self.nk
                )));
            }
            // Build the grid now so geometry errors surface at parse time.
            self.grid()?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.experiment {
            Experiment::Harmonic2d => 1,
            _ => 3,
        }
    }

    pub fn grid(&self) -> Result<PhaseSpaceGrid> {
        build_grid(self.dim(), (self.x_min, self.x_max), self.nx, self.l_k, self.nk)
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.tau).round().max(1.0) as usize
    }

    pub fn potential(&self) -> Potential {
        match self.experiment {
            Experiment::Harmonic2d => Potential::Harmonic {
                omega: harmonic_omega(),
            },
            Experiment::Hydrogen1s | Experiment::OneProton => Potential::Coulomb {
                centers: vec![ProtonCenter {
                    position: [0.0; 3],
                    charge: 1.0,
                }],
            },
            Experiment::TwoProtons => Potential::Coulomb {
                centers: vec![
                    ProtonCenter {
                        position: [-TWO_PROTON_HALF_SEPARATION, 0.0, 0.0],
                        charge: 1.0,
                    },
                    ProtonCenter {
                        position: [TWO_PROTON_HALF_SEPARATION, 0.0, 0.0],
                        charge: 1.0,
                    },
                ],
            },
            Experiment::TkmGaussianTable => unreachable!("table experiment has no potential"),
        }
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            grid: self.grid()?,
            step: StepConfig {
                tau: self.tau,
                potential: self.potential(),
                n_nb: self.n_nb,
                bc: self.bc,
            },
            p: self.p,
            steps: self.steps(),
            cadence: self.cadence,
            reference: match self.experiment {
                Experiment::Harmonic2d => ReferenceSpec::ExactCharacteristics,
                _ => ReferenceSpec::Initial,
            },
            transport: self.transport,
        })
    }

    pub fn initial_field<R: Real>(&self, grid: &PhaseSpaceGrid) -> Result<WignerField<R>> {
        match self.experiment {
            Experiment::Harmonic2d => init_gaussian(grid, &[1.0], &[0.0], 0.5, 2.0),
            Experiment::Hydrogen1s => init_hydrogen_1s(grid, self.ny),
            Experiment::OneProton => {
                init_gaussian(grid, &[1.0, 0.0, 0.0], &[0.0; 3], 0.5, 2.0)
            }
            Experiment::TwoProtons => init_gaussian(grid, &[0.0; 3], &[0.0; 3], 0.5, 2.0),
            Experiment::TkmGaussianTable => Err(ChasmError::InvalidConfig(
                "the TKM table experiment has no field".into(),
            )),
        }
    }

    /// Full configuration echo; every line carries whether the value was
    /// given explicitly or filled from the experiment defaults.
    pub fn summary_lines(&self) -> Vec<(String, String)> {
        let mark = |key: &str, value: String| -> (String, String) {
            let origin = if self.provided.contains(key) { "" } else { " (default)" };
            (key.to_string(), format!("{value}{origin}"))
        };
        let mut out = vec![
            ("experiment".to_string(), self.experiment.name().to_string()),
            mark("nx", self.nx.to_string()),
            mark("nk", self.nk.to_string()),
            mark("x_min", self.x_min.to_string()),
            mark("x_max", self.x_max.to_string()),
            mark("l_k", self.l_k.to_string()),
            mark("tau", self.tau.to_string()),
            mark("t", self.t_final.to_string()),
            mark("n_nb", self.n_nb.to_string()),
            mark("p", self.p.to_string()),
            mark(
                "bc",
                match self.bc {
                    BoundaryCondition::Natural => "natural".to_string(),
                    BoundaryCondition::Hermite(..) => "hermite".to_string(),
                },
            ),
            mark(
                "precision",
                match self.precision {
                    Precision::F32 => "f32".to_string(),
                    Precision::F64 => "f64".to_string(),
                },
            ),
            mark("cadence", self.cadence.to_string()),
            mark(
                "transport",
                match self.transport {
                    TransportKind::Channels => "channels".to_string(),
                    TransportKind::Sockets => "sockets".to_string(),
                },
            ),
        ];
        if self.experiment == Experiment::Hydrogen1s {
            out.push(mark("ny", self.ny.to_string()));
        }
        if self.experiment == Experiment::TkmGaussianTable {
            out.push(mark("nk_max", self.nk_max.to_string()));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// TKM Gaussian table.

#[derive(Debug, Clone, Copy)]
pub struct TkmRow {
    pub nk: usize,
    pub l_inf: f64,
    pub l_2: f64,
    pub seconds: f64,
}

/// Convolution accuracy against the closed-form Gaussian potential on
/// [-l_k, l_k)^3 for each resolution (alpha = 1, k0 = 0). `seconds` times
/// the convolution alone; the tensor is treated as precomputed.
pub fn run_tkm_table(l_k: f64, nk_list: &[usize]) -> Result<Vec<TkmRow>> {
    let mut rows = Vec::new();
    for &nk in nk_list {
        let tensor = ConvolutionTensor::build(nk, l_k)?;
        let mut ws = PdoWorkspace::new(nk);
        let dk = 2.0 * l_k / nk as f64;
        let klen = nk * nk * nk;
        let mut fs = vec![Complex64::new(0.0, 0.0); klen];
        let kof = |j: usize| -l_k + dk * j as f64;
        for j0 in 0..nk {
            for j1 in 0..nk {
                for j2 in 0..nk {
                    let k2 = kof(j0).powi(2) + kof(j1).powi(2) + kof(j2).powi(2);
                    fs[(j0 * nk + j1) * nk + j2] = Complex64::new((-k2).exp(), 0.0);
                }
            }
        }
        let start = Instant::now();
        let phi = ws.convolve_truncated(&tensor, &fs);
        let seconds = start.elapsed().as_secs_f64();
        let mut l_inf: f64 = 0.0;
        let mut sq = 0.0;
        for j0 in 0..nk {
            for j1 in 0..nk {
                for j2 in 0..nk {
                    let reference = gaussian_convolution_reference(
                        &[kof(j0), kof(j1), kof(j2)],
                        1.0,
                        &[0.0; 3],
                    );
                    let d = phi[(j0 * nk + j1) * nk + j2].re - reference;
                    l_inf = l_inf.max(d.abs());
                    sq += d * d;
                }
            }
        }
        rows.push(TkmRow {
            nk,
            l_inf,
            l_2: sq.sqrt(),
            seconds,
        });
    }
    Ok(rows)
}

pub const TKM_TABLE_RESOLUTIONS: [usize; 6] = [8, 16, 32, 64, 80, 128];

// ---------------------------------------------------------------------------
// Convergence studies.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyParameter {
    Dx,
    Nk,
    NNb,
}

impl StudyParameter {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dx" => StudyParameter::Dx,
            "nk" => StudyParameter::Nk,
            "n_nb" | "nnb" => StudyParameter::NNb,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ConvergencePoint {
    pub parameter: f64,
    pub eps_inf: f64,
    pub eps_2: f64,
    pub eps_mass: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub parameter: StudyParameter,
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of ln(eps_inf) against ln(parameter)
    /// (against n_nb itself for the stencil study, where decay is
    /// geometric rather than algebraic).
    pub slope: f64,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Run the harmonic experiment once and return its final error report.
fn harmonic_final_report(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    let sim = cfg.simulation_config()?;
    let initial: WignerField<f64> = cfg.initial_field(&sim.grid)?;
    let out = run_simulation(&sim, &initial)?;
    Ok(*out.metrics.last().expect("metric series is never empty"))
}

/// Sweep one discretization parameter of the harmonic experiment (or the
/// TKM table for `Nk`) and fit the observed order.
pub fn run_convergence_study(
    base: &ExperimentConfig,
    parameter: StudyParameter,
) -> Result<ConvergenceStudy> {
    match parameter {
        StudyParameter::Dx => {
            let extent = base.x_max - base.x_min;
            let mut points = Vec::new();
            for dx in [0.3, 0.2, 0.1] {
                let nx = (extent / dx).round() as usize;
                let mut cfg = base.clone();
                cfg.nx = nx;
                let rep = harmonic_final_report(&cfg)?;
                points.push(ConvergencePoint {
                    parameter: dx,
                    eps_inf: rep.eps_inf,
                    eps_2: rep.eps_2,
                    eps_mass: rep.eps_mass,
                });
            }
            let xs: Vec<f64> = points.iter().map(|p| p.parameter.ln()).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.eps_inf.ln()).collect();
            Ok(ConvergenceStudy {
                parameter,
                slope: fit_slope(&xs, &ys),
                points,
            })
        }
        StudyParameter::Nk => {
            let list: Vec<usize> = TKM_TABLE_RESOLUTIONS
                .iter()
                .copied()
                .filter(|&nk| nk <= base.nk_max)
                .collect();
            let rows = run_tkm_table(base.l_k, &list)?;
            let points: Vec<ConvergencePoint> = rows
                .iter()
                .map(|r| ConvergencePoint {
                    parameter: r.nk as f64,
                    eps_inf: r.l_inf,
                    eps_2: r.l_2,
                    eps_mass: 0.0,
                })
                .collect();
            let xs: Vec<f64> = points.iter().map(|p| p.parameter.ln()).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.eps_inf.max(1e-300).ln()).collect();
            Ok(ConvergenceStudy {
                parameter,
                slope: fit_slope(&xs, &ys),
                points,
            })
        }
        StudyParameter::NNb => {
            let m = base.nx / base.p.max(1);
            let mut points = Vec::new();
            for n_nb in [5usize, 10, 15, 20, 30] {
                if n_nb > m {
                    continue;
                }
                let mut cfg = base.clone();
                cfg.n_nb = n_nb;
                let rep = harmonic_final_report(&cfg)?;
                points.push(ConvergencePoint {
                    parameter: n_nb as f64,
                    eps_inf: rep.eps_inf,
                    eps_2: rep.eps_2,
                    eps_mass: rep.eps_mass,
                });
            }
            let xs: Vec<f64> = points.iter().map(|p| p.parameter).collect();
            let ys: Vec<f64> = points
                .iter()
                .map(|p| p.eps_mass.max(1e-300).ln())
                .collect();
            Ok(ConvergenceStudy {
                parameter,
                slope: fit_slope(&xs, &ys),
                points,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment driver.

pub struct RunArtifacts {
    pub summary: Vec<(String, String)>,
    pub metrics: Vec<ErrorReport>,
    pub stats: RunStats,
    pub initial_max_abs: f64,
    pub final_max_abs: f64,
}

fn drive<R: Real>(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let sim = cfg.simulation_config()?;
    let initial: WignerField<R> = cfg.initial_field(&sim.grid)?;
    let initial_max_abs = initial.max_abs();
    let initial_mass = initial.mass();

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        crate::io::dump_field(&initial, &dir.join("initial.chsm"))?;
        write_field_views(&initial, dir, "initial")?;
    }

    let out = run_simulation(&sim, &initial)?;
    out.field.assert_finite()?;
    let final_max_abs = out.field.max_abs();

    let mut summary = cfg.summary_lines();
    summary.push(("steps".into(), sim.steps.to_string()));
    summary.push(("initial_mass".into(), format!("{initial_mass:.17e}")));
    summary.push(("initial_max_abs".into(), format!("{initial_max_abs:.17e}")));
    summary.push(("final_max_abs".into(), format!("{final_max_abs:.17e}")));
    if let Some(last) = out.metrics.last() {
        summary.push(("final_eps_inf".into(), format!("{:.17e}", last.eps_inf)));
        summary.push(("final_eps_2".into(), format!("{:.17e}", last.eps_2)));
        summary.push(("final_eps_mass".into(), format!("{:.17e}", last.eps_mass)));
    }
    summary.push(("patches".into(), out.stats.patches.to_string()));
    summary.push(("messages".into(), out.stats.messages.to_string()));
    summary.push(("bytes_exchanged".into(), out.stats.bytes.to_string()));
    summary.push((
        "wall_seconds".into(),
        format!("{:.3}", out.stats.wall_seconds),
    ));
    for (phase, secs) in &out.stats.phase_seconds {
        summary.push((format!("phase_seconds.{phase}"), format!("{secs:.3}")));
    }

    if let Some(dir) = &cfg.out_dir {
        crate::io::dump_field(&out.field, &dir.join("final.chsm"))?;
        write_field_views(&out.field, dir, "final")?;
        write_metrics(&out.metrics, &dir.join("metrics.tsv"))?;
        write_summary(&summary, &dir.join("summary.txt"))?;
    }

    Ok(RunArtifacts {
        summary,
        metrics: out.metrics,
        stats: out.stats,
        initial_max_abs,
        final_max_abs,
    })
}

/// Run the configured experiment at the configured storage precision.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    match cfg.precision {
        Precision::F64 => drive::<f64>(cfg),
        Precision::F32 => drive::<f32>(cfg),
    }
}

fn write_field_views<R: Real>(
    field: &WignerField<R>,
    dir: &std::path::Path,
    tag: &str,
) -> Result<()> {
    if field.grid.dim == 3 {
        let n = field.grid.nx_points();
        let nk = field.grid.nk;
        for axis in 0..2 {
            let w = crate::field::reduced_wigner(field, axis)?;
            crate::io::write_tsv_matrix(
                &dir.join(format!("{tag}_w{}.tsv", axis + 1)),
                n,
                nk,
                &w,
            )?;
        }
        let p = crate::field::spatial_marginal(field)?;
        crate::io::write_tsv_matrix(&dir.join(format!("{tag}_marginal.tsv")), n, n, &p)?;
    }
    Ok(())
}

pub fn write_metrics(metrics: &[ErrorReport], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "time\teps_inf\teps_2\teps_mass")?;
    for m in metrics {
        writeln!(
            w,
            "{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}",
            m.time, m.eps_inf, m.eps_2, m.eps_mass
        )?;
    }
    Ok(())
}

pub fn write_summary(lines: &[(String, String)], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (k, v) in lines {
        writeln!(w, "{k} = {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg =
            parse_config("experiment=harmonic2d\nNx=240\nNk=512\ntau=5e-4\nT=10").unwrap();
        assert_eq!(cfg.experiment, Experiment::Harmonic2d);
        assert_eq!(cfg.nx, 240);
        assert_eq!(cfg.nk, 512);
        assert_eq!(cfg.tau, 5e-4);
        assert_eq!(cfg.t_final, 10.0);
        // defaults
        assert_eq!(cfg.n_nb, 20);
        assert_eq!(cfg.p, 4);
        assert_eq!(cfg.steps(), 20000);
        let lines = cfg.summary_lines();
        assert!(lines.iter().any(|(k, v)| k == "n_nb" && v.contains("default")));
        assert!(lines.iter().any(|(k, v)| k == "nx" && !v.contains("default")));
    }

    #[test]
    fn odd_nk_is_rejected() {
        let err = parse_config("experiment=harmonic2d\nNk=15\ntau=1e-3\nT=1").unwrap_err();
        assert!(err.to_string().contains("even"), "{err}");
    }

    #[test]
    fn missing_tau_is_named() {
        let cfg = "experiment=harmonic2d\nT=10\ntau=0";
        let err = parse_config(cfg).unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let err = parse_config("experiment=harmonic2d\ntau=1e-3\nT=1\nwibble=2").unwrap_err();
        match err {
            ChasmError::ConfigParse { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("wibble"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = parse_config(
            "# harmonic run\nexperiment = harmonic2d\n\ntau = 1e-3\nT = 0.1\np = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.p, 2);
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let xs: Vec<f64> = [0.3f64, 0.2, 0.1].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [0.3f64, 0.2, 0.1]
            .iter()
            .map(|x| (2.5 * x.powi(4)).ln())
            .collect();
        assert!((fit_slope(&xs, &ys) - 4.0).abs() < 1e-12);
    }
}
