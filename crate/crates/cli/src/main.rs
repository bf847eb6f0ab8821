use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use qqlab_core::experiment::{run_experiment, ExperimentConfig, ExperimentReport, GateLibrary};
use qqlab_core::figures::pulse_svg;
use qqlab_core::parity::{classical_single_query_check, oracle_phase, run_parity_algorithm, Permutation};
use qqlab_core::smp::{algorithm_targets, config_for_target, optimize, GateFile};
use qqlab_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "qqlab", version, about = "Single-ququart permutation parity experiment simulator")]
struct Cli {
    /// Replaces every seed in the configuration.
    #[arg(long, global = true, env = "QQLAB_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gate-level one-query circuit on a permutation.
    RunAlgorithm {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// U1..U8, shift:k, reflect:k, or a JSON array such as [2,3,4,1].
        #[arg(long)]
        perm: String,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize the seventeen protocol gates as pulse sequences.
    OptimizeGates {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "gates")]
        out: PathBuf,
        /// Configuration override, e.g. optimizer.max_evals=500.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Also write a pulse-shape SVG next to each gate file.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run the pulse-level experiment with tomography after every step.
    SimulateExperiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Gate library directory; defaults to the configured gates_dir.
        #[arg(long)]
        gates: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Render the bar figures of an experiment report.
    ExportFigures {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Svg)]
        format: Format,
        /// Output directory; defaults to `figures/` next to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Csv,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        let code = match err.downcast_ref::<Error>() {
            Some(Error::Inadmissible { .. } | Error::InvalidPermutation(_)) => 2,
            Some(Error::MissingGate { .. }) => 4,
            Some(Error::RankDeficient { .. }) => 5,
            _ => 1,
        };
        Failure { code, err }
    }
}

fn fail(code: u8, err: anyhow::Error) -> Failure {
    Failure { code, err }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunAlgorithm { dim, perm, json } => run_algorithm(dim, &perm, json),
        Command::OptimizeGates { config, out, set, svg, json } => {
            optimize_gates(config.as_deref(), &out, &set, cli.seed, svg, json)
        }
        Command::SimulateExperiment { config, out, gates, set, json } => {
            simulate_experiment(config.as_deref(), &out, gates.as_deref(), &set, cli.seed, json)
        }
        Command::ExportFigures { report, format, out } => export_figures(&report, format, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&Path>, set: &[String], seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let text = match path {
        Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    ExperimentConfig::load(text.as_deref(), set, seed).context("invalid configuration").map_err(Failure::from)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_algorithm(dim: usize, perm: &str, as_json: bool) -> Result<u8, Failure> {
    let p = match Permutation::parse(perm, dim) {
        Ok(p) => p,
        Err(e) => return Err(fail(2, anyhow::Error::new(e).context(format!("bad permutation {perm:?}")))),
    };
    let run = run_parity_algorithm(&p)?;
    let phase = oracle_phase(&p)?;
    let classical = classical_single_query_check(dim).ok();
    if as_json {
        let doc = json!({
            "dim": dim,
            "permutation": p,
            "verdict": run.class.to_string(),
            "outcome_level": run.outcome_index,
            "probability": run.probability,
            "degenerate": run.degenerate,
            "oracle_phase": { "re": phase.re, "im": phase.im },
            "amplitudes": run.final_state.amplitudes().iter().map(|a| json!({ "re": a.re, "im": a.im })).collect::<Vec<_>>(),
            "classical": classical,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("permutation  {p}");
        println!("verdict      {}", run.class);
        println!("outcome      |{}> with probability {:.12}", run.outcome_index, run.probability);
        println!("oracle phase {:+.12} {:+.12}i", phase.re, phase.im);
        println!("amplitudes");
        for (k, a) in run.final_state.amplitudes().iter().enumerate() {
            println!("  |{}>  {:+.12} {:+.12}i", k + 1, a.re, a.im);
        }
        if run.degenerate {
            println!("note: for d = 2 both classes give the same outcome; no quantum advantage");
        }
    }
    Ok(0)
}

fn optimize_gates(
    config: Option<&Path>,
    out: &Path,
    set: &[String],
    seed: Option<u64>,
    svg: bool,
    as_json: bool,
) -> Result<u8, Failure> {
    let cfg = load_config(config, set, seed)?;
    let sys = cfg.spin_system()?;
    let opt = cfg.optimizer_config()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut rows = Vec::new();
    let mut all_converged = true;
    for (i, target) in algorithm_targets()?.iter().enumerate() {
        let per_target = config_for_target(&opt, i);
        let result = optimize(target, &sys, &per_target)?;
        let file = GateFile::new(target, &sys, &opt, &result);
        write(&GateFile::path_in(out, &target.label), &file.to_json()?)?;
        if svg {
            let title = format!("{} (F = {:.5})", target.label, result.achieved_fidelity);
            write(&out.join(format!("{}.svg", target.label)), &pulse_svg(&result.sequence, opt.bounds.amp_max, &title))?;
        }
        all_converged &= result.converged;
        rows.push((target.label.clone(), result));
    }

    if as_json {
        let doc: Vec<_> = rows
            .iter()
            .map(|(l, r)| {
                json!({
                    "label": l, "achieved_fidelity": r.achieved_fidelity, "converged": r.converged,
                    "evals_used": r.evals_used, "blocks": r.sequence.blocks().len(),
                    "duration_us": r.sequence.total_duration() * 1e6,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("{:<16} {:>10} {:>8} {:>8} {:>12}  converged", "gate", "fidelity", "blocks", "evals", "length (us)");
        for (l, r) in &rows {
            println!(
                "{l:<16} {:>10.6} {:>8} {:>8} {:>12.2}  {}",
                r.achieved_fidelity,
                r.sequence.blocks().len(),
                r.evals_used,
                r.sequence.total_duration() * 1e6,
                if r.converged { "yes" } else { "NO" }
            );
        }
        println!("{} gates written to {}", rows.len(), out.display());
    }
    Ok(if all_converged { 0 } else { 3 })
}

fn simulate_experiment(
    config: Option<&Path>,
    out: &Path,
    gates: Option<&Path>,
    set: &[String],
    seed: Option<u64>,
    as_json: bool,
) -> Result<u8, Failure> {
    let cfg = load_config(config, set, seed)?;
    let gates_dir = match gates {
        Some(g) => g.to_path_buf(),
        // a relative gates_dir is taken relative to the config file
        None => match config.and_then(Path::parent) {
            Some(base) => base.join(&cfg.gates_dir),
            None => PathBuf::from(&cfg.gates_dir),
        },
    };
    let library = GateLibrary::load(&gates_dir, &cfg.required_gates()?)?;
    let report = run_experiment(&cfg, &library)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let text = report.to_json()?;
    write(&out.join("report.json"), &text)?;
    write_figures(&report, &out.join("figures"), Format::Svg)?;
    write_figures(&report, &out.join("figures"), Format::Csv)?;

    if as_json {
        print!("{text}");
    } else {
        println!("epsilon {:.4e} at {} K", report.provenance.epsilon, report.provenance.temperature_k);
        println!("{:<5} {:<16} {:>6} {:>9} {:>9} {:>9}  verdict", "oracle", "expected", "level", "F(i)", "F(ii)", "F(iii)");
        for p in &report.permutations {
            let f: Vec<String> =
                p.steps.iter().map(|s| s.fidelity.map_or("n/a".into(), |f| format!("{f:.5}"))).collect();
            println!(
                "{:<6} {:<16} {:>5} {:>9} {:>9} {:>9}  {}",
                p.label,
                p.expected.to_string(),
                format!("|{}>", p.outcome_level),
                f[0],
                f[1],
                f[2],
                if p.agrees { "ok" } else { "WRONG" }
            );
        }
        println!("{}/{} verdicts correct; report in {}", report.verdicts_correct, report.permutations.len(), out.display());
    }
    Ok(0)
}

fn write_figures(report: &ExperimentReport, dir: &Path, format: Format) -> Result<usize, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let figures = report.figures()?;
    for (name, title, fig) in &figures {
        match format {
            Format::Svg => write(&dir.join(format!("{name}.svg")), &fig.to_svg(title))?,
            Format::Csv => write(&dir.join(format!("{name}.csv")), &fig.to_csv())?,
        }
    }
    Ok(figures.len())
}

fn export_figures(report: &Path, format: Format, out: Option<&Path>) -> Result<u8, Failure> {
    let text = fs::read_to_string(report)
        .with_context(|| format!("reading {}", report.display()))
        .map_err(|e| fail(6, e))?;
    let parsed = ExperimentReport::from_json(&text)
        .with_context(|| format!("malformed report {}", report.display()))
        .map_err(|e| fail(6, e))?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => report.parent().unwrap_or(Path::new(".")).join("figures"),
    };
    let n = write_figures(&parsed, &dir, format)?;
    println!("{n} figures written to {}", dir.display());
    Ok(0)
}
