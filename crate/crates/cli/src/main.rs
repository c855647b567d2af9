use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use samplet_graph::datasets::{DatasetKind, DatasetSpec};
use samplet_graph::io;
use samplet_graph::pipeline::{run_pipeline, run_stage, Fault, PipelineConfig, Stage};
use samplet_graph::verify::{verify, Status};

#[derive(Parser, Debug)]
#[command(name = "samplets", version, about = "Samplet compression of signals on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate or load the point cloud.
    Gen,
    /// Build the epsilon-ball graph.
    Graph,
    /// Partition the graph into patches.
    Partition,
    /// Embed every patch with landmark Isomap.
    Embed,
    /// Forward samplet transform of the signal.
    Transform,
    /// Compress the coefficients with AT and NT.
    Compress,
    /// Collect report.json and report.csv.
    Report,
    /// Run every stage in order.
    Pipeline,
    /// Run the invariant suite and write verify.json.
    Verify,
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// JSON configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset when no config is given: unit_square, swiss_roll, deformed_sphere, point_cloud_file.
    #[arg(long, global = true)]
    dataset: Option<String>,
    /// Number of generated points.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Headerless CSV point cloud for point_cloud_file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Graph radius.
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    patches: Option<Vec<usize>>,
    /// Embedding dimension(s) q.
    #[arg(long, global = true, value_delimiter = ',')]
    dim: Option<Vec<usize>>,
    #[arg(long, global = true)]
    landmarks: Option<usize>,
    /// Vanishing-moment counts s+1.
    #[arg(long, global = true, value_delimiter = ',')]
    moments: Option<Vec<usize>>,
    /// Compression epsilon.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall-clock timings in the reports.
    #[arg(long, global = true)]
    timings: bool,
    /// Inject a defect, e.g. skip-qr-sign.
    #[arg(long, global = true)]
    fault: Vec<String>,
}

fn parse_kind(name: &str) -> Result<DatasetKind, String> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| format!("unknown dataset `{name}`"))
}

fn parse_fault(name: &str) -> Result<Fault, String> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| format!("unknown fault `{name}`"))
}

fn build_config(o: &Opts) -> Result<PipelineConfig, String> {
    let mut c = match (&o.config, &o.dataset) {
        (Some(path), _) => PipelineConfig::load(path).map_err(|e| e.to_string())?,
        (None, Some(name)) => {
            let eps = o.eps.ok_or("--eps is required without --config")?;
            PipelineConfig::new(DatasetSpec::new(parse_kind(name)?, o.n.unwrap_or(0)), eps)
        }
        (None, None) => return Err("either --config or --dataset is required".into()),
    };
    if let Some(name) = &o.dataset {
        c.dataset.kind = parse_kind(name)?;
    }
    if let Some(n) = o.n {
        c.dataset.n = n;
    }
    if let Some(p) = &o.input {
        c.dataset.path = Some(p.clone());
    }
    if let Some(v) = o.eps {
        c.graph_eps = v;
    }
    if let Some(v) = &o.patches {
        c.patches = v.clone();
    }
    if let Some(v) = &o.dim {
        c.dims = v.clone();
    }
    if let Some(v) = o.landmarks {
        c.landmarks = v;
    }
    if let Some(v) = &o.moments {
        c.moments = v.clone();
    }
    if let Some(v) = o.threshold {
        c.threshold = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.threads {
        c.threads = Some(v);
    }
    if let Some(v) = &o.out {
        c.out = v.clone();
    }
    c.timings |= o.timings;
    for f in &o.fault {
        let f = parse_fault(f)?;
        if !c.faults.contains(&f) {
            c.faults.push(f);
        }
    }
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn stage_of(command: Command) -> Option<Stage> {
    Some(match command {
        Command::Gen => Stage::Gen,
        Command::Graph => Stage::Graph,
        Command::Partition => Stage::Partition,
        Command::Embed => Stage::Embed,
        Command::Transform => Stage::Transform,
        Command::Compress => Stage::Compress,
        Command::Report => Stage::Report,
        Command::Pipeline | Command::Verify => return None,
    })
}

fn run(cli: &Cli) -> Result<(), (String, String)> {
    let config = build_config(&cli.opts).map_err(|e| ("config".to_string(), e))?;
    match cli.command {
        Command::Pipeline => {
            let rows = run_pipeline(&config).map_err(|e| (e.stage.to_string(), e.source.to_string()))?;
            eprintln!("wrote {} report rows to {}", rows.len(), config.out.display());
            Ok(())
        }
        Command::Verify => {
            let tag = |e: samplet_graph::Error| ("verify".to_string(), e.to_string());
            let report = verify(&config).map_err(tag)?;
            let file = config.out.join("verify.json");
            io::save_json(&file, &report).map_err(tag)?;
            for c in &report.checks {
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::Skipped => "skipped",
                };
                println!("{status:<7} {:<24} p={} q={} s+1={} {}", c.check, c.p, c.q, c.s_plus_1, c.detail);
            }
            if report.passed {
                Ok(())
            } else {
                let failed = report.checks.iter().filter(|c| c.status == Status::Fail).count();
                Err(("verify".into(), format!("{failed} invariant checks failed, see {}", file.display())))
            }
        }
        other => {
            let stage = stage_of(other).expect("stage command");
            run_stage(&config, stage).map_err(|e| (stage.name().to_string(), e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, message)) => {
            eprintln!("samplets: [{stage}] {message}");
            ExitCode::FAILURE
        }
    }
}
