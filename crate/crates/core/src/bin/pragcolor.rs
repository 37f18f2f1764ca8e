use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use pragmatic_color::config::{load_config, load_synthetic_config};
use pragmatic_color::dataset::{
    generate_synthetic, load_samples, load_triples, Partition, SampleStore, SyntheticConfig,
};
use pragmatic_color::embeddings::{detect_dim, embed_modifier, load_embeddings, OovPolicy};
use pragmatic_color::eval::{prepare_samples, run_experiment, ExperimentConfig, ExperimentData};
use pragmatic_color::manifest::{now_unix_ms, HashedFile, RunManifest, MANIFEST_VERSION};
use pragmatic_color::net::{train, Direction, ModelArtifact, TrainConfig, TrainingView};
use pragmatic_color::seeds;
use pragmatic_color::speakers::{
    literal_candidates, listener_scores, pragmatic_select, DistanceMetric, PragmaticConfig,
};
use pragmatic_color::swatch::{parse_rows, render_ppm, render_svg, SwatchLayout};
use pragmatic_color::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "pragcolor", version, about = "Pragmatic color generation")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Train a speaker or listener network.
    Train(TrainArgs),
    /// Generate a color for one reference label and modifier.
    Predict(PredictArgs),
    /// Run the multi-seed training and evaluation protocol.
    Eval(EvalArgs),
    /// Render horizontal color bars.
    Swatch(SwatchArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    triples: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    /// Word vectors in GloVe text format, optionally gzip-compressed.
    #[arg(long)]
    embeddings: PathBuf,
}

/// Overrides applied on top of the config file.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    partition_seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.partition_seed {
            cfg.partition_seed = v;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Flat `key = value` corpus config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Reserve labels so that every split stratum is populated.
    #[arg(long)]
    held_out: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_parser = parse_direction)]
    direction: Direction,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Artifact path; a `.json` extension selects the JSON encoding.
    #[arg(long)]
    out: PathBuf,
    /// Loss trace CSV. Defaults to the artifact path with `.loss.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsetArg {
    All,
    Train,
    Validation,
    Test,
}

impl SubsetArg {
    fn partition(self) -> Option<Partition> {
        match self {
            SubsetArg::All => None,
            SubsetArg::Train => Some(Partition::Train),
            SubsetArg::Validation => Some(Partition::Validation),
            SubsetArg::Test => Some(Partition::Test),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OovArg {
    Zero,
    Strict,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    speaker: PathBuf,
    /// Required unless `--literal-only` is given.
    #[arg(long, required_unless_present = "literal_only")]
    listener: Option<PathBuf>,
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    ref_label: String,
    #[arg(long)]
    modifier: String,
    #[arg(long, default_value_t = 0.33)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = DistanceMetric::DeltaE2000, value_parser = parse_metric)]
    metric: DistanceMetric,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Which vectors of the reference label to sample from.
    #[arg(long, value_enum, default_value_t = SubsetArg::All)]
    subset: SubsetArg,
    #[arg(long, default_value_t = 0)]
    partition_seed: u64,
    #[arg(long, value_enum, default_value_t = OovArg::Zero)]
    oov: OovArg,
    /// Rank by the literal speaker only.
    #[arg(long)]
    literal_only: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    seeds: Vec<u64>,
    /// Skip the grid search and use this lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SwatchFormat {
    Ppm,
    Svg,
}

#[derive(Args)]
struct SwatchArgs {
    /// Rows separated by `;`, colors by `,`. Colors are `#rrggbb` or `r/g/b`.
    #[arg(long, allow_hyphen_values = true)]
    colors: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SwatchFormat::Ppm)]
    format: SwatchFormat,
    #[arg(long, default_value_t = 64)]
    cell_width: usize,
    #[arg(long, default_value_t = 32)]
    row_height: usize,
}

fn parse_direction(s: &str) -> std::result::Result<Direction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<DistanceMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Swatch(a) => cmd_swatch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA })
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io { path: path.into(), source: e })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)
        .and_then(|()| w.flush())
        .map_err(|e| Error::Io { path: path.into(), source: e })
}

fn load_data(args: &DataArgs) -> Result<ExperimentData> {
    let dim = detect_dim(&args.embeddings)?;
    Ok(ExperimentData {
        triples: load_triples(&args.triples)?,
        samples: load_samples(&args.samples)?,
        embeddings: load_embeddings(&args.embeddings, dim)?,
    })
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => load_synthetic_config(path)?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.held_out {
        cfg = cfg.with_held_out();
    }
    let files = generate_synthetic(&cfg)?.write_to(&args.out)?;
    for path in [&files.triples, &files.samples, &files.embeddings] {
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = load_data(&args.data)?;
    let cfg = args.cfg.resolve()?;
    let samples = prepare_samples(&data, &cfg)?;
    let fit: Vec<_> = data.triples.iter().filter(|t| t.is_train()).collect();
    let view = TrainingView {
        triples: &fit,
        samples: &samples,
        partition: Some(Partition::Train),
    };
    let train_cfg = TrainConfig {
        seed: args.seed,
        ..cfg.train
    };
    info!("training {:?} on {} triples", args.direction, fit.len());
    let outcome = train(&view, &data.embeddings, args.direction, &train_cfg)?;

    let trace_path = args
        .trace
        .unwrap_or_else(|| args.out.with_extension("loss.csv"));
    let mut trace = String::from("epoch,loss\n");
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{},{loss:e}\n", epoch + 1));
    }
    write_file(&trace_path, trace.as_bytes())?;

    ModelArtifact::new(args.direction, train_cfg, outcome.net).save(&args.out)?;
    println!("{}", args.out.display());
    println!("{}", trace_path.display());
    Ok(())
}

fn load_model(path: &Path, expected: Direction) -> Result<ModelArtifact> {
    let artifact = ModelArtifact::load(path)?;
    if artifact.direction != expected {
        return Err(Error::Artifact(format!(
            "{} holds a {:?} network, expected {:?}",
            path.display(),
            artifact.direction,
            expected
        )));
    }
    Ok(artifact)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let speaker = load_model(&args.speaker, Direction::Speaker)?;
    let listener = match (&args.listener, args.literal_only) {
        (Some(path), false) => Some(load_model(path, Direction::Listener)?),
        _ => None,
    };
    let dim = detect_dim(&args.embeddings)?;
    let table = load_embeddings(&args.embeddings, dim)?;
    let oov = match args.oov {
        OovArg::Zero => OovPolicy::Zero,
        OovArg::Strict => OovPolicy::Strict,
    };
    let modifier = embed_modifier(&table, &args.modifier, oov)?;

    let all = load_samples(&args.samples)?;
    let mut store = SampleStore::new();
    store.insert(all.get(&args.ref_label)?.clone());
    let partition = args.subset.partition();
    if partition.is_some() {
        store = store.partitioned(ExperimentConfig::default().fractions, args.partition_seed)?;
    }
    let samples = store.get(&args.ref_label)?;

    let cfg = PragmaticConfig {
        lambda: args.lambda,
        n: args.n,
        k: args.k,
        metric: args.metric,
        temperature: args.temperature,
    };
    let mut rng = seeds::rng(seeds::derive_named(args.seed, "predict"));
    let cs = literal_candidates(&speaker.net, samples, partition, &modifier, &cfg, &mut rng)?;

    let (chosen, cs) = match &listener {
        Some(l) => {
            let cs = listener_scores(&l.net, cs, &modifier, &cfg)?;
            pragmatic_select(cs, args.lambda)?
        }
        None => (cs.candidates[cs.literal_choice()], cs),
    };

    let mut out = String::new();
    let [r, g, b] = chosen.to_array();
    out.push_str(&format!("chosen,{r:.4},{g:.4},{b:.4},{}\n", chosen.to_hex()));
    out.push_str("index,r,g,b,hex,s0,l1r,s2r\n");
    let prob = |lp: Option<&Vec<f64>>, i: usize| {
        lp.map_or_else(|| "-".to_string(), |v| format!("{:.6}", v[i].exp()))
    };
    for (i, c) in cs.candidates.iter().enumerate() {
        let [r, g, b] = c.to_array();
        out.push_str(&format!(
            "{i},{r:.4},{g:.4},{b:.4},{},{:.6},{},{}\n",
            c.to_hex(),
            cs.s0_logprob[i].exp(),
            prob(cs.l1r_logprob.as_ref(), i),
            prob(cs.s2r_logprob.as_ref(), i),
        ));
    }
    print!("{out}");
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let started = now_unix_ms();
    let data = load_data(&args.data)?;
    let mut cfg = args.cfg.resolve()?;
    if args.lambda.is_some() {
        cfg.fixed_lambda = args.lambda;
    }
    info!(
        "evaluating {} triples over {} seeds",
        data.triples.len(),
        args.seeds.len()
    );
    let report = run_experiment(&data, &cfg, &args.seeds)?;

    let models_dir = args.out.join("models");
    let mut models = Vec::new();
    for run in &report.runs {
        if let Some((speaker, listener)) = &run.models {
            for (artifact, role) in [(speaker, "speaker"), (listener, "listener")] {
                let path = models_dir.join(format!("seed-{}-{role}.pcg", run.seed));
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
                }
                artifact.save(&path)?;
                models.push(HashedFile::record(format!("seed-{}-{role}", run.seed), &path)?);
            }
        }
    }

    let json_path = args.out.join("metrics.json");
    let csv_path = args.out.join("metrics.csv");
    write_file(&json_path, report.to_json()?.as_bytes())?;
    write_file(&csv_path, report.to_csv().as_bytes())?;

    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        seeds: args.seeds.clone(),
        datasets: vec![
            HashedFile::record("triples", &args.data.triples)?,
            HashedFile::record("samples", &args.data.samples)?,
            HashedFile::record("embeddings", &args.data.embeddings)?,
        ],
        models,
        outputs: vec![
            HashedFile::record("metrics_json", &json_path)?,
            HashedFile::record("metrics_csv", &csv_path)?,
        ],
        started_unix_ms: started,
        finished_unix_ms: now_unix_ms(),
    };
    let manifest_path = args.out.join("manifest.json");
    write_file(&manifest_path, manifest.to_json()?.as_bytes())?;

    print!("{}", report.to_csv());
    println!("{}", json_path.display());
    println!("{}", csv_path.display());
    println!("{}", manifest_path.display());
    Ok(())
}

fn cmd_swatch(args: SwatchArgs) -> Result<()> {
    let rows = parse_rows(&args.colors)?;
    let layout = SwatchLayout {
        cell_width: args.cell_width,
        row_height: args.row_height,
    };
    if layout.cell_width == 0 || layout.row_height == 0 {
        return Err(Error::Input("swatch cells must be at least one pixel".into()));
    }
    let bytes = match args.format {
        SwatchFormat::Ppm => render_ppm(&rows, layout)?,
        SwatchFormat::Svg => render_svg(&rows, layout)?.into_bytes(),
    };
    write_file(&args.out, &bytes)?;
    println!("{}", args.out.display());
    Ok(())
}
