use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tosg_core::benchmark::{read_instances, SynthSpec};
use tosg_core::eval::{write_records, HitMode, PredictionRecord};
use tosg_core::pipeline::{self, RunConfig, RunLayout};
use tosg_core::{exec, Exec};

#[derive(Parser)]
#[command(name = "tosg", version, about = "Reward-guided subgraph generation over layered omic graphs")]
struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic benchmark (graph TSVs, samples, instances).
    Synth(SynthArgs),
    /// Masked-edge link pretraining.
    PretrainEdges(PretrainArgs),
    /// Graph-level classifier training from the link-pretrained checkpoint.
    PretrainClassify(PretrainArgs),
    /// Generate subgraphs for every instance in a file.
    Generate(GenerateArgs),
    /// Score a predictions file.
    Evaluate(EvaluateArgs),
    /// All stages into one run directory, with a manifest.
    Pipeline(PipelineArgs),
}

#[derive(Args, Clone)]
struct Overrides {
    /// Run config JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `default` or a SynthSpec JSON file.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "lambda-rule")]
    lambda_rule: Option<f64>,
    #[arg(long)]
    omega: Option<usize>,
    #[arg(long = "loss-on-rejected")]
    loss_on_rejected: Option<bool>,
    #[arg(long = "max-instances")]
    max_instances: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::read(p)?,
            None => RunConfig::default(),
        };
        match self.spec.as_deref() {
            None | Some("default") => {}
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading spec {p}"))?;
                cfg.spec = serde_json::from_str::<SynthSpec>(&text).with_context(|| format!("parsing spec {p}"))?;
            }
        }
        let seed = self.seed.unwrap_or(cfg.seed);
        cfg = cfg.with_seed(seed);
        if let Some(v) = self.k {
            cfg.spec.k = v;
        }
        if let Some(v) = self.gamma {
            cfg.spec.gamma = v;
        }
        if let Some(v) = self.hops {
            cfg.spec.hops = v;
        }
        if let Some(v) = self.classes {
            cfg.dims.num_classes = v;
            if cfg.spec.samples_per_class.len() != v {
                let per = cfg.spec.samples_per_class.iter().sum::<usize>() / v.max(1);
                cfg.spec.samples_per_class = vec![per; v];
            }
        }
        let g = &mut cfg.generate;
        if let Some(v) = self.eta {
            g.eta = v;
        }
        if let Some(v) = self.rollouts {
            g.rollouts = v;
        }
        if let Some(v) = self.lambda {
            g.lambda = v;
        }
        if let Some(v) = self.lambda_rule {
            g.lambda_rule = v;
        }
        if let Some(v) = self.loss_on_rejected {
            g.loss_on_rejected = v;
        }
        if let Some(v) = self.omega {
            cfg.omega = v;
        }
        if let Some(v) = self.max_instances {
            cfg.max_instances = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct PretrainArgs {
    /// Run directory holding the synth outputs.
    #[arg(long)]
    run: PathBuf,
    /// Checkpoint to start link pretraining from instead of a fresh model.
    #[arg(long)]
    init: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    classifier: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    /// Output directory; defaults to the instance file's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Hit {
    Fraction,
    Binary,
}

#[derive(Args)]
struct EvaluateArgs {
    /// JSON lines, one prediction record per line.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON object mapping instance id to group label.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fraction")]
    hit: Hit,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

fn print_json(path: &Path) -> Result<()> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let mut v = v;
    if let Some(o) = v.as_object_mut() {
        o.remove("loss_history");
    }
    println!("{v}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.jobs == 1 { Exec::Sequential } else { Exec::Parallel };
    if cli.jobs > 1 {
        exec::init_threads(cli.jobs);
    }
    match cli.command {
        Command::Synth(a) => {
            let cfg = a.overrides.resolve()?;
            pipeline::synth_stage(&cfg.spec, &RunLayout::new(&a.out))?;
            println!("{}", a.out.display());
        }
        Command::PretrainEdges(a) => {
            let cfg = a.overrides.resolve()?;
            let layout = RunLayout::new(&a.run);
            pipeline::pretrain_edges_stage(&layout, a.init.as_deref(), &cfg.dims, cfg.init_seed(), &cfg.edges, exec)?;
            print_json(&layout.edge_metrics())?;
        }
        Command::PretrainClassify(a) => {
            let cfg = a.overrides.resolve()?;
            let layout = RunLayout::new(&a.run);
            pipeline::pretrain_classify_stage(&layout, &cfg.classify, exec)?;
            print_json(&layout.classifier_metrics())?;
        }
        Command::Generate(a) => {
            let cfg = a.overrides.resolve()?;
            let graph = pipeline::load_graph(&a.graph, pipeline::GENERATE)?;
            let samples = pipeline::load_samples(&a.samples, pipeline::GENERATE)?;
            let bundle = pipeline::load_bundle(&a.classifier, pipeline::GENERATE)?;
            let instances = read_instances(&a.instance)?;
            if instances.is_empty() {
                bail!("{} holds no instances", a.instance.display());
            }
            let out = match a.out {
                Some(o) => o,
                None => a.instance.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let results = exec.map(&instances, |inst| {
                inst.validate(&graph)?;
                let o = pipeline::generate_one(&graph, &samples, &bundle, inst, &cfg.generate, cfg.omega, Exec::Sequential)?;
                anyhow::Ok(o)
            });
            let mut records = Vec::new();
            for (inst, r) in instances.iter().zip(results) {
                let o = r.with_context(|| format!("generating {}", inst.cell_line_id))?;
                pipeline::write_subgraph(&graph, &out, &o)?;
                println!("{}\t{} edges", inst.cell_line_id, o.edges.len());
                records.push(PredictionRecord {
                    instance: inst.cell_line_id.clone(),
                    predicted: o.ranked,
                    reference: inst.targets(),
                    seed: cfg.generate.seed,
                    group: Some(inst.disease.clone()),
                });
            }
            let mut buf = Vec::new();
            write_records(&mut buf, &records)?;
            std::fs::write(out.join("predictions.jsonl"), buf)?;
        }
        Command::Evaluate(a) => {
            let groups: BTreeMap<String, String> = match &a.groups {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => BTreeMap::new(),
            };
            let mode = match a.hit {
                Hit::Fraction => HitMode::Fraction,
                Hit::Binary => HitMode::Binary,
            };
            let layout = RunLayout::new(&a.out);
            let report = pipeline::evaluate_file(&a.predictions, &layout.report_json(), &layout.report_tsv(), &groups, mode)?;
            print!("{}", tosg_core::eval::report_tsv(&report));
        }
        Command::Pipeline(a) => {
            let cfg = a.overrides.resolve()?;
            let m = pipeline::run_pipeline(&cfg, &a.out, exec)?;
            println!("{}", serde_json::to_string_pretty(&m.metrics)?);
            println!("{} artifacts, manifest at {}", m.artifacts.len(), RunLayout::new(&a.out).manifest().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
