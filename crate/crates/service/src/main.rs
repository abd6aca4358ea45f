use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lighthouse_core::codegen::{generate_solver_bundle, package_archive, routine_bundle, BundleKind, Language};
use lighthouse_core::data;
use lighthouse_core::matfeat::{compute_extended_features, measure_features, read_matrix_market_file};
use lighthouse_core::mlselect::synth::{petsc_corpus, slepc_corpus};
use lighthouse_core::mlselect::{
    cross_validate, derive_labels, export_model, read_runs, write_runs, ClassifierModel, Scoring, SolverConfig,
    Spectrum, Target, TrainerRegistry, TreeParams, DEFAULT_TIME_RATIO,
};
use lighthouse_core::taxonomy::{GuidedSession, Library, Taxonomy};
use lighthouse_core::textsearch::{build_index, Mode};
use lighthouse_service::kernel::{compile_kernel, parse_seed_arg};
use lighthouse_service::recommend::{RequestOptions, TrainedModel, DEFAULT_TOLERANCE};
use lighthouse_service::{config, Config, ModelSlot, Recommender, Server};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "lighthouse",
    version,
    about = "Solver recommendation and code generation for numerical linear algebra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Print the fifteen matrix properties of a Matrix Market file.
    Features {
        file: PathBuf,
        /// Print all thirty properties.
        #[arg(long)]
        extended: bool,
        /// Also print the time spent per property.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        json: bool,
    },
    /// Recommend solver configurations for a Matrix Market file.
    #[command(visible_alias = "predict")]
    Recommend {
        file: PathBuf,
        #[command(flatten)]
        request: RequestArgs,
        /// Model written by `train` instead of the bundled one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Answer guided-search questions on the terminal.
    Guided { library: String },
    /// Write a code bundle archive.
    Bundle(BundleArgs),
    /// Compile a kernel script to C source and a parameter manifest.
    Kernel {
        file: PathBuf,
        /// Fix a variable's type, e.g. `x=column` or `B=matrix:inout`.
        #[arg(long = "seed", value_name = "NAME=SPEC")]
        seeds: Vec<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Train a decision tree on a run corpus.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tree: TreeArgs,
        /// Where to write the model as JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print the tree.
        #[arg(long)]
        print_tree: bool,
    },
    /// Cross-validate a trainer on a run corpus.
    Cv {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "decision_tree")]
        trainer: String,
        /// `best_in_predicted` or `strict`.
        #[arg(long, default_value = "best_in_predicted")]
        scoring: String,
    },
    /// Print a tree as a CSV path table.
    ExportTable {
        /// Model written by `train`.
        #[arg(long, conflicts_with = "library")]
        model: Option<PathBuf>,
        /// Guided-search tree of a library.
        #[arg(long)]
        library: Option<String>,
    },
    /// Keyword search over routine documentation.
    Search {
        #[arg(required = true)]
        query: Vec<String>,
        #[arg(long, default_value = "all")]
        mode: String,
    },
    /// Autocomplete a prefix.
    Complete { prefix: String },
    /// Regenerate the synthetic benchmark corpora.
    Synth {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "LH_ADDR", default_value = config::DEFAULT_ADDR)]
    addr: String,
    #[arg(long, env = "LH_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long, env = "LH_TTL_SECS", default_value_t = config::DEFAULT_TTL_SECS)]
    ttl_secs: u64,
    #[arg(long, env = "LH_UPLOAD_CAP", default_value_t = config::DEFAULT_UPLOAD_CAP)]
    upload_cap: u64,
    #[arg(long, env = "LH_SWEEP_SECS", default_value_t = config::DEFAULT_SWEEP_SECS)]
    sweep_secs: u64,
    #[arg(long, env = "LH_TEMPLATE_DIR")]
    template_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RequestArgs {
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    processors: Option<u32>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Ask for an eigensolver instead of a linear solver.
    #[arg(long)]
    eigen: bool,
    #[arg(long)]
    n_eigenvalues: Option<u32>,
    /// e.g. `largest_magnitude` or `smallest_real`.
    #[arg(long)]
    spectrum: Option<String>,
}

#[derive(Args)]
struct BundleArgs {
    /// Routine id for a driver bundle, e.g. DGBSV.
    #[arg(long, conflicts_with_all = ["kind", "config"])]
    routine: Option<String>,
    #[arg(long, default_value = "fortran90")]
    language: String,
    /// properties_program, default_solver or recommended_solver.
    #[arg(long)]
    kind: Option<String>,
    /// Solver configuration label, e.g. `gmres+ilu(k)[levels=1]`.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    parallel: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// `seq`, `par`, `slepc` or a CSV file of runs.
    #[arg(long, default_value = "seq")]
    corpus: String,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_TIME_RATIO)]
    ratio: f64,
}

#[derive(Args)]
struct TreeArgs {
    /// `entropy` or `gini`.
    #[arg(long, default_value = "entropy")]
    criterion: String,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Predict only the best configuration instead of the near-best set.
    #[arg(long)]
    best_only: bool,
}

impl TreeArgs {
    fn params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf_size: self.min_leaf,
            target: if self.best_only { Target::Best } else { Target::NearBest },
            criterion: self.criterion.clone(),
        }
    }
}

fn corpus_text(name: &str) -> Result<String> {
    Ok(match name {
        "seq" => data::PETSC_SEQ_RUNS.to_string(),
        "par" => data::PETSC_PAR_RUNS.to_string(),
        "slepc" => data::SLEPC_RUNS.to_string(),
        path => fs::read_to_string(path).with_context(|| format!("reading corpus {path}"))?,
    })
}

fn labeled(corpus: &CorpusArgs) -> Result<lighthouse_core::mlselect::LabelReport> {
    let runs = read_runs(corpus_text(&corpus.corpus)?.as_bytes())?;
    Ok(derive_labels(&runs, corpus.tolerance, corpus.ratio)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Features { file, extended, timing, json } => features(&file, extended, timing, json),
        Command::Recommend { file, request, model } => recommend(&file, &request, model.as_deref()),
        Command::Guided { library } => {
            let library: Library = library.parse()?;
            let stdin = io::stdin();
            run_guided(&Taxonomy::bundled(), library, stdin.lock(), io::stdout().lock())
        }
        Command::Bundle(args) => bundle(&args),
        Command::Kernel { file, seeds, out_dir } => kernel(&file, &seeds, &out_dir),
        Command::Train { corpus, tree, output, print_tree } => train(&corpus, &tree, output.as_deref(), print_tree),
        Command::Cv { corpus, tree, folds, seed, trainer, scoring } => {
            let report = labeled(&corpus)?;
            let scoring = match scoring.as_str() {
                "best_in_predicted" => Scoring::BestInPredicted,
                "strict" => Scoring::Strict,
                other => bail!("unknown scoring `{other}`; expected best_in_predicted or strict"),
            };
            let registry = TrainerRegistry::standard();
            let cv = cross_validate(&report.instances, folds, seed, registry.get(&trainer)?, &tree.params(), scoring)?;
            for (i, (acc, n)) in cv.fold_accuracy.iter().zip(&cv.fold_sizes).enumerate() {
                println!("fold {:>2}: {acc:.4} ({n} instances)", i + 1);
            }
            println!("mean accuracy: {:.4}", cv.mean_accuracy);
            Ok(())
        }
        Command::ExportTable { model, library } => {
            let table = match (model, library) {
                (Some(path), None) => export_model(&load_model(&path)?),
                (None, Some(lib)) => Taxonomy::bundled().path_table(lib.parse()?)?,
                _ => bail!("give --model or --library"),
            };
            print!("{}", table.to_csv());
            Ok(())
        }
        Command::Search { query, mode } => {
            let tax = Taxonomy::bundled();
            let index = build_index(tax.routines(), data::VOCABULARY)?;
            let text = query.join(" ");
            let mode: Mode = mode.parse()?;
            if let Some(c) = index.correct_query(&text) {
                println!("did you mean: {c}");
            }
            for hit in index.query(&text, mode) {
                println!("{:<8} {:>3}  {}", hit.name, hit.score, hit.description);
            }
            Ok(())
        }
        Command::Complete { prefix } => {
            let tax = Taxonomy::bundled();
            let index = build_index(tax.routines(), data::VOCABULARY)?;
            index.autocomplete(&prefix).iter().for_each(|s| println!("{s}"));
            Ok(())
        }
        Command::Synth { out_dir, seed } => synth(&out_dir, seed),
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let mut config = Config::new(args.data_dir.unwrap_or_else(|| std::env::temp_dir().join("lighthouse")));
    config.addr = args.addr.parse().with_context(|| format!("bad address `{}`", args.addr))?;
    config.ttl = Duration::from_secs(args.ttl_secs);
    config.upload_cap = args.upload_cap;
    config.sweep_interval = Duration::from_secs(args.sweep_secs.max(1));
    config.template_dir = args.template_dir;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let recommender = Recommender::bundled()?;
        let server = Server::start(config, recommender).await?;
        tracing::info!("listening on http://{}", server.addr);
        tokio::signal::ctrl_c().await?;
        tracing::info!("shutting down");
        server.stop().await?;
        Ok(())
    })
}

fn features(file: &Path, extended: bool, timing: bool, json: bool) -> Result<()> {
    let m = read_matrix_market_file(file).with_context(|| format!("reading {}", file.display()))?;
    let (fv, t) = measure_features(&m)?;
    let entries = if extended { compute_extended_features(&m)?.entries() } else { fv.entries() };
    if json {
        let map: BTreeMap<&str, f64> = entries.into_iter().collect();
        println!("{}", serde_json::to_string_pretty(&map)?);
        return Ok(());
    }
    for (name, value) in entries {
        println!("{name}: {value}");
    }
    if timing {
        println!();
        for (name, secs) in &t.per_feature {
            println!("time {name}: {secs:.6}");
        }
        println!("time total: {:.6}", t.total_seconds);
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<ClassifierModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ClassifierModel::from_json(&text)?)
}

fn recommend(file: &Path, args: &RequestArgs, model: Option<&Path>) -> Result<()> {
    let m = read_matrix_market_file(file).with_context(|| format!("reading {}", file.display()))?;
    let spectrum: Option<Spectrum> = args.spectrum.as_deref().map(str::parse).transpose()?;
    let opts = RequestOptions {
        eigen: args.eigen,
        parallel: args.parallel,
        processors: args.processors,
        tolerance: args.tolerance,
        n_eigenvalues: args.n_eigenvalues,
        spectrum,
    };
    let slot = opts.slot();
    let recommender = match model {
        Some(path) => {
            let mut r = Recommender::empty();
            r.insert(slot, TrainedModel::from_tree(slot, load_model(path)?));
            r
        }
        None => {
            let mut r = Recommender::empty();
            let model = lighthouse_service::recommend::train_corpus(
                slot.corpus(),
                &TreeParams::default(),
                DEFAULT_TOLERANCE,
                DEFAULT_TIME_RATIO,
            )?;
            r.insert(slot, TrainedModel::from_tree(slot, model));
            r
        }
    };
    let features = opts.from_matrix(&compute_extended_features(&m)?);
    let rec = match recommender.recommend(slot, &features) {
        Ok(r) => r,
        Err(lighthouse_service::recommend::RecommendError::MissingFeatures(f)) => {
            bail!("the model needs features this request lacks: {}", f.join(", "))
        }
        Err(lighthouse_service::recommend::RecommendError::Model(e)) => return Err(e.into()),
        Err(lighthouse_service::recommend::RecommendError::NoModel(s)) => bail!("no model for {s}"),
    };
    println!("model: {}", rec.model_version);
    println!("best: {}", rec.best);
    println!("configurations:");
    for c in &rec.configs {
        println!("  {c}");
    }
    println!("options: {}", rec.options.join(" "));
    Ok(())
}

fn bundle(args: &BundleArgs) -> Result<()> {
    let (name, bundle) = match &args.routine {
        Some(id) => {
            let tax = Taxonomy::bundled();
            let language: Language = args.language.parse()?;
            let routine = tax.routine(&id.to_uppercase())?;
            let b = routine_bundle(&tax, &routine.id, language)?;
            (format!("{}_{}.zip", routine.name.to_lowercase(), language.extension()), b)
        }
        None => {
            let config: Option<SolverConfig> = args.config.as_deref().map(str::parse).transpose()?;
            let kind: BundleKind = match (&args.kind, &config) {
                (Some(k), _) => k.parse()?,
                (None, Some(_)) => BundleKind::RecommendedSolver,
                (None, None) => bail!("give --routine, --kind or --config"),
            };
            (format!("petsc_{kind}.zip"), generate_solver_bundle(kind, config.as_ref(), args.parallel)?)
        }
    };
    let out = args.output.clone().unwrap_or_else(|| PathBuf::from(name));
    fs::write(&out, package_archive(&bundle)?).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    for f in bundle.manifest() {
        println!("  {:<24} {:>7} bytes", f.path, f.size);
    }
    Ok(())
}

fn kernel(file: &Path, seed_args: &[String], out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let seeds = seed_args.iter().map(|s| parse_seed_arg(s)).collect::<Result<_, _>>()?;
    let k = compile_kernel(&text, &seeds).map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?;
    fs::create_dir_all(out_dir)?;
    let source = out_dir.join(k.source_file());
    let manifest = out_dir.join(k.manifest_file());
    fs::write(&source, &k.source)?;
    fs::write(&manifest, &k.manifest_json)?;
    println!("wrote {}", source.display());
    println!("wrote {}", manifest.display());
    for p in &k.manifest.parameters {
        let orientation = p.orientation.map(|o| format!(" {o}")).unwrap_or_default();
        println!("  {:<8} {:<5} {}{orientation}", p.name, p.intent.as_str(), p.kind);
    }
    Ok(())
}

fn train(corpus: &CorpusArgs, tree: &TreeArgs, output: Option<&Path>, print_tree: bool) -> Result<()> {
    let report = labeled(corpus)?;
    let model = lighthouse_core::mlselect::induce_tree(&report.instances, &tree.params())?;
    let acc = lighthouse_core::mlselect::accuracy(&model, &report.instances, Scoring::BestInPredicted)?;
    let slot = match corpus.corpus.as_str() {
        "par" => ModelSlot::LinearParallel,
        "slepc" => ModelSlot::Eigen,
        _ => ModelSlot::LinearSequential,
    };
    println!("instances: {} ({} excluded)", report.instances.len(), report.excluded.len());
    println!("depth: {}, leaves: {}", model.depth, model.leaf_count);
    println!("training accuracy: {acc:.4}");
    println!("version: {}", TrainedModel::from_tree(slot, model.clone()).version);
    if print_tree {
        print!("{}", model.render_text());
    }
    if let Some(path) = output {
        fs::write(path, model.to_json()).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn synth(out_dir: &Path, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpora = [
        ("petsc_seq_runs.csv", petsc_corpus(&mut rng, 40, false)),
        ("petsc_par_runs.csv", petsc_corpus(&mut rng, 30, true)),
        ("slepc_runs.csv", slepc_corpus(&mut rng, 24)),
    ];
    fs::create_dir_all(out_dir)?;
    for (name, runs) in corpora {
        let path = out_dir.join(name);
        let mut buf = Vec::new();
        write_runs(&runs, &mut buf)?;
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {} ({} runs)", path.display(), runs.len());
    }
    Ok(())
}

fn option_index(session: &GuidedSession, tax: &Taxonomy, input: &str) -> Option<String> {
    let options = session.options(tax);
    if let Ok(n) = input.parse::<usize>() {
        return options.get(n.checked_sub(1)?).map(|o| o.key.clone());
    }
    options
        .iter()
        .find(|o| o.key.eq_ignore_ascii_case(input) || o.text.eq_ignore_ascii_case(input))
        .map(|o| o.key.clone())
}

/// Prompts on `out` and reads answers from `input` until the search ends.
fn run_guided(tax: &Taxonomy, library: Library, input: impl BufRead, mut out: impl Write) -> Result<()> {
    let mut session = tax.start_session(library, "terminal")?;
    writeln!(
        out,
        "{library} guided search. Answer with an option number, key or text; `back` undoes the last answer."
    )?;
    let mut lines = input.lines();
    loop {
        let view = session.view(tax);
        if view.finished {
            writeln!(out, "{}", view.message.unwrap_or_default())?;
            for id in &view.candidates {
                let r = tax.routine(id)?;
                writeln!(out, "Result: {}  {}", r.name, r.description)?;
            }
            return Ok(());
        }
        writeln!(out)?;
        writeln!(out, "{}", view.question.unwrap_or_default())?;
        for (i, o) in view.options.iter().enumerate() {
            writeln!(out, "  {}. {}", i + 1, o.text)?;
        }
        let shown: Vec<&str> = view.candidates.iter().take(8).map(String::as_str).collect();
        let more = if view.candidates.len() > shown.len() { ", ..." } else { "" };
        writeln!(out, "Candidates ({}): {}{more}", view.candidates.len(), shown.join(", "))?;
        write!(out, "> ")?;
        out.flush()?;
        let Some(line) = lines.next() else { bail!("input ended before the guided search finished") };
        let line = line?;
        let answer = line.trim();
        if answer.eq_ignore_ascii_case("back") {
            match session.back(tax) {
                Ok(s) => session = s,
                Err(e) => writeln!(out, "{e}")?,
            }
            continue;
        }
        if answer.eq_ignore_ascii_case("quit") {
            return Ok(());
        }
        match option_index(&session, tax, answer) {
            Some(key) => session = session.answer(tax, &key)?,
            None => writeln!(out, "`{answer}` is not one of the options")?,
        }
    }
}
