use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use groundmap::corpus_align::{em_train, extract_reference_dataset, generate_corpus, load_corpus, prepare, save_corpus, EmConfig, NEARBY_RADIUS};
use groundmap::embed_metric::{nway_retrieval_eval, train_embedder, LabeledPatch, TrainConfig};
use groundmap::eval::{
    load_resources, run_episode, run_experiment, summarize, write_report, EpisodeResult, ExperimentConfig, PoolChoice, PredictorKind,
    RolloutRecord,
};
use groundmap::exemplar_db::{save_database, WordVectorTable};
use groundmap::grounding::TraceRecord;
use groundmap::instruction_lang::{load_labeled_chunks, save_labeled_chunks, train_objref, Lexicon, ObjRefConfig};
use groundmap::pipeline::{analyze_instruction, scripted_episode, PerceptionAgent};
use groundmap::policy_exec::{gold_distributions, run_rollout, step_rewards, ReturnBreakdown, RolloutStep};
use groundmap::sim_env::{build_exemplar_db, gen_ar_dataset, load_dataset, synthetic_word_vectors, write_dataset, DatasetConfig, LayoutConfig};
use groundmap::util::{canonical_json, config_hash, derive_seed, read_to_string, write_bytes};
use groundmap::{Error, Result};

#[derive(Parser)]
#[command(name = "groundmap", version, about = "Few-shot object grounding and instruction following in a desk-scale simulator")]
struct Cli {
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config for the subcommand; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the annotated dataset, exemplar database, navigation corpus and word vectors.
    GenData,
    /// Train the image embedding on a generated dataset.
    TrainEmbedder {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train the object-reference classifier on labeled chunks.
    TrainObjref {
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Extract labeled object references from a navigation corpus with EM.
    AlignCorpus {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Ground an instruction's references along a scripted episode and write the trace.
    Ground {
        #[arg(long)]
        instruction: Option<String>,
    },
    /// Run one episode and write the per-step record.
    Rollout,
    /// Run an experiment over many episodes.
    Eval,
    /// Rebuild the summary and plots from an eval output directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_str(&read_to_string(p)?)
            .map_err(|e| Error::invalid(format!("config {}", p.display()), e.to_string()))?),
        None => Ok(T::default()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, canonical_json(value)?.as_bytes())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&canonical_json(r)?);
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::invalid(what, "path is required (config field or flag)"))
}

fn lexicon_from(path: Option<&Path>) -> Result<Lexicon> {
    path.map_or_else(|| Ok(Lexicon::builtin()), Lexicon::load)
}

fn word_vectors_from(path: Option<&Path>, lexicon: &Lexicon, seed: u64) -> Result<WordVectorTable> {
    path.map_or_else(|| Ok(synthetic_word_vectors(lexicon, seed)), WordVectorTable::load)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct GenDataConfig {
    seed: u64,
    frames: usize,
    dataset: DatasetConfig,
    /// Objects in the annotated dataset.
    dataset_pool: PoolChoice,
    /// Objects in the exemplar database.
    database_pool: PoolChoice,
    exemplar_images: usize,
    corpus_size: usize,
    corpus_layout: LayoutConfig,
    word_vector_seed: u64,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            seed: 0,
            frames: 200,
            dataset: DatasetConfig::default(),
            dataset_pool: PoolChoice::Training,
            database_pool: PoolChoice::HeldOut,
            exemplar_images: 8,
            corpus_size: 200,
            corpus_layout: LayoutConfig::default(),
            word_vector_seed: 0,
        }
    }
}

fn gen_data(cfg: GenDataConfig, out: &Path) -> Result<()> {
    if cfg.frames == 0 || cfg.exemplar_images == 0 {
        return Err(Error::invalid("gen-data config", "frames and exemplar_images must be positive"));
    }
    let pool = cfg.dataset_pool.types();
    let ds = gen_ar_dataset(derive_seed(cfg.seed, 0), cfg.frames, &pool, &cfg.dataset)?;
    write_dataset(&ds, &pool, &cfg.dataset, &out.join("dataset"))?;
    let db = build_exemplar_db(&cfg.database_pool.types(), cfg.exemplar_images, derive_seed(cfg.seed, 1), &cfg.dataset)?;
    save_database(&db, &out.join("database.json"))?;
    let corpus = generate_corpus(derive_seed(cfg.seed, 2), cfg.corpus_size, &pool, &cfg.corpus_layout)?;
    let examples: Vec<_> = corpus.iter().map(|g| g.example.clone()).collect();
    save_corpus(&examples, &out.join("corpus.jsonl"))?;
    let lexicon = Lexicon::builtin();
    synthetic_word_vectors(&lexicon, cfg.word_vector_seed).save(&out.join("word_vectors.txt"))?;
    write_json(&out.join("gen_data_config.json"), &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct TrainEmbedderConfig {
    data: Option<PathBuf>,
    train: TrainConfig,
    /// Held-out retrieval check after training.
    eval_pool: PoolChoice,
    eval_images: usize,
    trials: usize,
}

impl Default for TrainEmbedderConfig {
    fn default() -> Self {
        TrainEmbedderConfig {
            data: None,
            train: TrainConfig::default(),
            eval_pool: PoolChoice::HeldOut,
            eval_images: 10,
            trials: 500,
        }
    }
}

#[derive(Serialize)]
struct TrainEmbedderReport {
    config_hash: String,
    initial_loss: f64,
    epoch_losses: Vec<f64>,
    retrieval_2way: f64,
    retrieval_8way: Option<f64>,
}

fn train_embedder_cmd(cfg: TrainEmbedderConfig, out: &Path) -> Result<()> {
    let dir = required(cfg.data.clone(), "data")?;
    let ds = load_dataset(&dir)?;
    let patches: Vec<_> = ds.patches.iter().map(|p| p.patch.clone()).collect();
    let rep = train_embedder(&patches, &ds.triplets, &cfg.train, None)?;
    let held = build_exemplar_db(&cfg.eval_pool.types(), cfg.eval_images, derive_seed(cfg.train.seed, 7), &DatasetConfig::default())?;
    let pool: Vec<LabeledPatch> = held
        .entries()
        .iter()
        .flat_map(|e| e.images.iter().map(|p| LabeledPatch { label: e.id.clone(), patch: p.clone() }))
        .collect();
    let r2 = nway_retrieval_eval(&rep.net, &pool, 2, cfg.trials, derive_seed(cfg.train.seed, 8))?;
    let r8 = (held.len() >= 8)
        .then(|| nway_retrieval_eval(&rep.net, &pool, 8, cfg.trials, derive_seed(cfg.train.seed, 9)))
        .transpose()?;
    let hash = config_hash(&cfg)?;
    let ck = rep.net.to_checkpoint(Some(cfg.train.seed), serde_json::to_value(&cfg)?);
    write_json(&out.join("embedder.json"), &ck)?;
    write_json(
        &out.join("train_report.json"),
        &TrainEmbedderReport {
            config_hash: hash,
            initial_loss: rep.initial_loss,
            epoch_losses: rep.epoch_losses,
            retrieval_2way: r2,
            retrieval_8way: r8,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainObjrefConfig {
    labels: Option<PathBuf>,
    word_vectors: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    word_vector_seed: u64,
    objref: ObjRefConfig,
}

#[derive(Serialize)]
struct ObjrefReport {
    config_hash: String,
    losses: Vec<f64>,
    train_accuracy: f64,
    warnings: Vec<String>,
}

fn train_objref_cmd(cfg: TrainObjrefConfig, out: &Path) -> Result<()> {
    let data = load_labeled_chunks(&required(cfg.labels.clone(), "labels")?)?;
    let lexicon = lexicon_from(cfg.lexicon.as_deref())?;
    let table = word_vectors_from(cfg.word_vectors.as_deref(), &lexicon, cfg.word_vector_seed)?;
    let rep = train_objref(&data, &table, &cfg.objref)?;
    write_bytes(&out.join("objref.json"), rep.classifier.to_json()?.as_bytes())?;
    write_json(
        &out.join("objref_report.json"),
        &ObjrefReport {
            config_hash: config_hash(&cfg)?,
            losses: rep.losses,
            train_accuracy: rep.train_accuracy,
            warnings: rep.warnings,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct AlignCorpusConfig {
    corpus: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    radius: f64,
    em: EmConfig,
}

impl Default for AlignCorpusConfig {
    fn default() -> Self {
        AlignCorpusConfig {
            corpus: None,
            lexicon: None,
            radius: NEARBY_RADIUS,
            em: EmConfig::default(),
        }
    }
}

#[derive(Serialize)]
struct EmSummary {
    config_hash: String,
    log_likelihood: Vec<f64>,
    objective: Vec<f64>,
    chunks: usize,
    references: usize,
}

fn align_corpus_cmd(cfg: AlignCorpusConfig, out: &Path) -> Result<()> {
    if cfg.radius <= 0.0 {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let corpus = load_corpus(&required(cfg.corpus.clone(), "corpus")?)?;
    let lexicon = lexicon_from(cfg.lexicon.as_deref())?;
    let rep = em_train(&prepare(&corpus, &lexicon, cfg.radius), &cfg.em)?;
    let labels = extract_reference_dataset(&corpus, &rep.model, &lexicon);
    write_json(&out.join("alignment_model.json"), &rep.model)?;
    save_labeled_chunks(&labels, &out.join("labels.jsonl"))?;
    write_json(
        &out.join("em_report.json"),
        &EmSummary {
            config_hash: config_hash(&cfg)?,
            log_likelihood: rep.log_likelihood,
            objective: rep.objective,
            chunks: labels.len(),
            references: labels.iter().filter(|c| c.label == 1).count(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
struct GroundConfig {
    experiment: ExperimentConfig,
    /// Replaces the scripted instruction.
    instruction: Option<String>,
}

fn ground_cmd(cfg: GroundConfig, out: &Path) -> Result<()> {
    let x = &cfg.experiment;
    x.validate()?;
    let res = load_resources(x)?;
    let ep = scripted_episode(x.seed, &x.pool.types(), &x.episode, &x.pipeline.render)?;
    let text = cfg.instruction.clone().unwrap_or_else(|| ep.instruction.clone());
    let analysis = analyze_instruction(&text, &res.lexicon, &res.classifier, &res.grounder, x.pipeline.context_dim)?;
    write_json(&out.join("analysis.json"), &analysis)?;
    let refs = analysis.references.clone();
    let mut agent = PerceptionAgent::new(&res.grounder, analysis, &x.pipeline, derive_seed(ep.seed, 3));
    let mut trace = Vec::new();
    run_rollout(ep.start, x.pipeline.max_steps, &x.pipeline.controller, |s, t| {
        let p = agent.step(&ep.layout, s, t)?;
        trace.push(TraceRecord::new(t, &p.grounding, &refs));
        Ok(p.dists)
    })?;
    write_jsonl(&out.join("trace.jsonl"), &trace)
}

#[derive(Serialize)]
struct StepLine {
    t: usize,
    #[serde(flatten)]
    step: RolloutStep,
    reward: ReturnBreakdown,
}

#[derive(Serialize)]
struct FinalLine {
    metrics: EpisodeResult,
    instruction: String,
    demo_end: [f64; 2],
}

fn rollout_cmd(cfg: ExperimentConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let res = match cfg.predictor {
        PredictorKind::Oracle => None,
        PredictorKind::Heuristic => Some(load_resources(&cfg)?),
    };
    let ep = scripted_episode(cfg.seed, &cfg.pool.types(), &cfg.episode, &cfg.pipeline.render)?;
    let o = run_episode(&ep, cfg.predictor, res.as_ref(), &cfg.pipeline, &cfg.weights, &config_hash(&cfg)?)?;
    let gold = gold_distributions(&ep.demo, cfg.pipeline.predictor.sigma_goal, cfg.pipeline.predictor.edge)?;
    let rewards = step_rewards(&o.rollout, &gold, &cfg.weights, &cfg.pipeline.map);
    let mut s = String::new();
    for (t, (step, reward)) in o.rollout.steps.iter().zip(rewards).enumerate() {
        s.push_str(&canonical_json(&StepLine { t, step: *step, reward })?);
        s.push('\n');
    }
    s.push_str(&canonical_json(&FinalLine {
        metrics: o.result.clone(),
        instruction: ep.instruction.clone(),
        demo_end: ep.demo_end(),
    })?);
    s.push('\n');
    write_bytes(&out.join("rollout.jsonl"), s.as_bytes())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::invalid(format!("{} line {}", path.display(), n + 1), e.to_string())))
        .collect()
}

fn report_cmd(results: &Path, out: &Path) -> Result<()> {
    let cfg: ExperimentConfig = serde_json::from_str(&read_to_string(&results.join("config.json"))?)?;
    let rows: Vec<EpisodeResult> = read_jsonl(&results.join("results.jsonl"))?;
    let records: Vec<RolloutRecord> = read_jsonl(&results.join("rollouts.jsonl"))?;
    let summary = summarize(cfg.predictor, &rows)?;
    write_report(&summary, &rows, &records, out)
}

fn run(cli: Cli) -> Result<()> {
    let cfg_path = cli.config.as_deref();
    let out = cli.out.as_path();
    match cli.command {
        Command::GenData => {
            let mut c: GenDataConfig = load_config(cfg_path)?;
            c.seed = cli.seed.unwrap_or(c.seed);
            gen_data(c, out)
        }
        Command::TrainEmbedder { data } => {
            let mut c: TrainEmbedderConfig = load_config(cfg_path)?;
            c.train.seed = cli.seed.unwrap_or(c.train.seed);
            c.data = data.or(c.data);
            train_embedder_cmd(c, out)
        }
        Command::TrainObjref { labels } => {
            let mut c: TrainObjrefConfig = load_config(cfg_path)?;
            c.objref.seed = cli.seed.unwrap_or(c.objref.seed);
            c.labels = labels.or(c.labels);
            train_objref_cmd(c, out)
        }
        Command::AlignCorpus { corpus } => {
            let mut c: AlignCorpusConfig = load_config(cfg_path)?;
            c.corpus = corpus.or(c.corpus);
            align_corpus_cmd(c, out)
        }
        Command::Ground { instruction } => {
            let mut c: GroundConfig = load_config(cfg_path)?;
            c.experiment.seed = cli.seed.unwrap_or(c.experiment.seed);
            c.experiment.predictor = PredictorKind::Heuristic;
            c.instruction = instruction.or(c.instruction);
            ground_cmd(c, out)
        }
        Command::Rollout => {
            let mut c: ExperimentConfig = load_config(cfg_path)?;
            c.seed = cli.seed.unwrap_or(c.seed);
            rollout_cmd(c, out)
        }
        Command::Eval => {
            let mut c: ExperimentConfig = load_config(cfg_path)?;
            c.seed = cli.seed.unwrap_or(c.seed);
            let s = run_experiment(&c, out)?;
            println!(
                "{} episodes, SR {:.3}, mean EMD {:.3} m, config {}",
                s.episodes, s.success_rate, s.mean_emd, s.config_hash
            );
            Ok(())
        }
        Command::Report { results } => report_cmd(&results, out),
    }
}

/// Bad inputs exit with 2, internal failures with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::Terminal => 1,
        Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
