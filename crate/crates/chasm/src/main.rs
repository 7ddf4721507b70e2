use chasm::error::ChasmError;
use chasm::field::error_metrics;
use chasm::harness::{
    parse_config, run_convergence_study, run_experiment, run_tkm_table, write_summary,
    Precision, StudyParameter, TKM_TABLE_RESOLUTIONS,
};
use chasm::io::load_field;
use chasm::runtime::TransportKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chasm", version, about = "Phase-space kinetic solver and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Patches per axis (overrides the config's `p`).
        #[arg(long)]
        patches: Option<usize>,
        /// Field storage precision (overrides the config's `precision`).
        #[arg(long, value_parser = ["f32", "f64"])]
        precision: Option<String>,
        /// Exchange transport (overrides the config's `transport`).
        #[arg(long, value_parser = ["channels", "sockets"])]
        transport: Option<String>,
    },
    /// Reproduce the free-space convolution accuracy table.
    TkmTable {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest resolution to include.
        #[arg(long)]
        nk_max: Option<usize>,
    },
    /// Sweep one discretization parameter and fit the observed order.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["dx", "nk", "n_nb"])]
        parameter: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two field dumps.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Fail (exit 1) when the max difference exceeds this bound.
        #[arg(long)]
        max_eps_inf: Option<f64>,
    },
}

fn exit_code_for(err: &ChasmError) -> u8 {
    match err {
        ChasmError::InvalidGrid(_)
        | ChasmError::InvalidConfig(_)
        | ChasmError::ConfigParse { .. }
        | ChasmError::GridMismatch(_) => 2,
        ChasmError::CflViolation(_) | ChasmError::ImaginaryResidue { .. } => 3,
        ChasmError::Io(_) | ChasmError::BadFormat(_) => 4,
    }
}

fn run() -> Result<u8, ChasmError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            patches,
            precision,
            transport,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = parse_config(&text)?;
            if let Some(dir) = out {
                cfg.out_dir = Some(dir);
            }
            if let Some(p) = patches {
                cfg.p = p;
            }
            match precision.as_deref() {
                Some("f32") => cfg.precision = Precision::F32,
                Some("f64") => cfg.precision = Precision::F64,
                _ => {}
            }
            match transport.as_deref() {
                Some("sockets") => cfg.transport = TransportKind::Sockets,
                Some("channels") => cfg.transport = TransportKind::Channels,
                _ => {}
            }
            let artifacts = run_experiment(&cfg)?;
            for (k, v) in &artifacts.summary {
                println!("{k} = {v}");
            }
            Ok(0)
        }
        Command::TkmTable { config, out, nk_max } => {
            let mut l_k = 16.0;
            let mut cap = 128usize;
            let mut out_dir = out;
            if let Some(path) = config {
                let cfg = parse_config(&std::fs::read_to_string(&path)?)?;
                l_k = cfg.l_k;
                cap = cfg.nk_max;
                if out_dir.is_none() {
                    out_dir = cfg.out_dir.clone();
                }
            }
            if let Some(n) = nk_max {
                cap = n;
            }
            let list: Vec<usize> = TKM_TABLE_RESOLUTIONS
                .iter()
                .copied()
                .filter(|&nk| nk <= cap)
                .collect();
            let rows = run_tkm_table(l_k, &list)?;
            println!("nk\tl_inf\tl_2\tseconds");
            let mut lines = vec![("l_k".to_string(), l_k.to_string())];
            for r in &rows {
                println!("{}\t{:.3e}\t{:.3e}\t{:.3e}", r.nk, r.l_inf, r.l_2, r.seconds);
                lines.push((
                    format!("nk_{}", r.nk),
                    format!("l_inf={:.6e} l_2={:.6e} seconds={:.6e}", r.l_inf, r.l_2, r.seconds),
                ));
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                write_summary(&lines, &dir.join("tkm_table.txt"))?;
            }
            Ok(0)
        }
        Command::Convergence {
            config,
            parameter,
            out,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = parse_config(&text)?;
            if let Some(dir) = out {
                cfg.out_dir = Some(dir);
            }
            let p = StudyParameter::parse(&parameter).expect("clap restricted the values");
            let study = run_convergence_study(&cfg, p)?;
            println!("parameter\teps_inf\teps_2\teps_mass");
            for pt in &study.points {
                println!(
                    "{}\t{:.6e}\t{:.6e}\t{:.6e}",
                    pt.parameter, pt.eps_inf, pt.eps_2, pt.eps_mass
                );
            }
            println!("observed_slope = {:.4}", study.slope);
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                let mut lines: Vec<(String, String)> = study
                    .points
                    .iter()
                    .map(|pt| {
                        (
                            format!("point_{}", pt.parameter),
                            format!(
                                "eps_inf={:.10e} eps_2={:.10e} eps_mass={:.10e}",
                                pt.eps_inf, pt.eps_2, pt.eps_mass
                            ),
                        )
                    })
                    .collect();
                lines.push(("observed_slope".into(), format!("{:.6}", study.slope)));
                write_summary(&lines, &dir.join(format!("convergence_{parameter}.txt")))?;
            }
            Ok(0)
        }
        Command::Diff { a, b, max_eps_inf } => {
            let fa = load_field(&a)?;
            let fb = load_field(&b)?;
            let rep = error_metrics(&fa, &fb, fb.mass())?;
            println!("eps_inf = {:.10e}", rep.eps_inf);
            println!("eps_2 = {:.10e}", rep.eps_2);
            println!("mass_a = {:.10e}", fa.mass());
            println!("mass_b = {:.10e}", fb.mass());
            if let Some(tol) = max_eps_inf {
                if rep.eps_inf > tol {
                    eprintln!("difference {} exceeds bound {tol}", rep.eps_inf);
                    return Ok(1);
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
