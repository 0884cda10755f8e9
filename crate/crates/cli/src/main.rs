use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geoweb_cli::config::Job;
use geoweb_cli::corpus;
use geoweb_cli::grid::{emit_grid, grid_path};
use geoweb_cli::run::{grid_fields, run, Report, Sections};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "geoweb", version, about = "Geodesic web checks, Euler-type constructions and envelopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the web functions of a job against its geometry.
    Check(JobArgs),
    /// Solve and verify the Euler-type constructions of a job.
    Construct(JobArgs),
    /// Compute and verify envelopes of a job's web functions.
    Envelope(JobArgs),
    /// Run every section of a job.
    Run(JobArgs),
    /// Built-in example jobs.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// List bundled jobs.
    List,
    /// Run a bundled job (all sections).
    Run {
        name: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Print a bundled job's config.
    Show { name: String },
}

#[derive(Args)]
struct JobArgs {
    /// JSON job config.
    config: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write CSV sample grids here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the residual tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn execute(mut job: Job, sections: Sections, flags: &Flags) -> ExitCode {
    if let Some(seed) = flags.seed {
        job.plan.seed = seed;
        for e in &mut job.euler {
            if let Some(plan) = &mut e.plan {
                plan.seed = seed;
            }
        }
    }
    if let Some(t) = flags.tolerance {
        if !(t > 0.0) {
            eprintln!("error: --tolerance must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        job.tolerances.residual = t;
    }
    let report_path = flags.report.clone().or_else(|| job.outputs.report.as_ref().map(PathBuf::from));
    let csv_path = flags.csv.clone().or_else(|| job.outputs.csv.as_ref().map(PathBuf::from));

    let report = run(&job, sections);
    let json = report.to_json();
    match &report_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("error: cannot write report {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
        None => print!("{json}"),
    }
    if let Some(base) = &csv_path {
        let fields = grid_fields(&job);
        for g in &fields {
            let path = grid_path(base, &g.name, fields.len());
            if let Err(e) = emit_grid(g.field.as_ref(), g.plan, &path) {
                eprintln!("error: cannot write grid {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
    }
    summarize(&report);
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn summarize(report: &Report) {
    eprintln!("job {} ({} points): {}", report.job, report.plan_size, verdict(report.pass));
    if let Some(c) = &report.check {
        for f in &c.geodesic.functions {
            let worst = f.pairs.iter().map(|p| p.summary.max_scaled).fold(0.0, f64::max);
            eprintln!("  web function {}: {} (max scaled residual {worst:.3e})", f.name, verdict(f.pass));
        }
        if c.pass != c.geodesic.pass {
            eprintln!("  auxiliary web checks: {}", verdict(c.pass));
        }
    }
    for e in &report.euler {
        eprintln!(
            "  euler {}: {} (solved {}, failed {})",
            e.name,
            verdict(e.pass),
            e.solver.solved,
            e.solver.failed
        );
    }
    for e in &report.envelopes {
        let detail = match (&e.envelope, e.linear_kind, &e.error) {
            (Some(p), _, _) => format!("{p} = 0"),
            (None, Some(kind), _) => format!("linear family ({kind:?})"),
            (None, None, Some(err)) => err.clone(),
            _ => String::new(),
        };
        eprintln!("  envelope {}: {} ({detail})", e.name, verdict(e.pass));
    }
}

fn load(path: &Path) -> Result<Job, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    Job::from_json(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, sections) = match cli.command {
        Command::Check(a) => (a, Sections::CHECK),
        Command::Construct(a) => (a, Sections::CONSTRUCT),
        Command::Envelope(a) => (a, Sections::ENVELOPE),
        Command::Run(a) => (a, Sections::ALL),
        Command::Corpus(CorpusCommand::List) => {
            for e in corpus::ENTRIES {
                println!("{:<26} {}", e.name, e.description());
            }
            return ExitCode::SUCCESS;
        }
        Command::Corpus(CorpusCommand::Show { name }) => {
            return match corpus::find(&name) {
                Some(e) => {
                    print!("{}", e.config);
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("error: no bundled job named {name:?}");
                    ExitCode::from(EXIT_CONFIG)
                }
            };
        }
        Command::Corpus(CorpusCommand::Run { name, flags }) => {
            let Some(entry) = corpus::find(&name) else {
                eprintln!("error: no bundled job named {name:?}");
                return ExitCode::from(EXIT_CONFIG);
            };
            return match entry.job() {
                Ok(job) => execute(job, Sections::ALL, &flags),
                Err(e) => {
                    eprintln!("error: bundled job {name}: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            };
        }
    };
    match load(&args.config) {
        Ok(job) => execute(job, sections, &args.flags),
        Err(code) => code,
    }
}
