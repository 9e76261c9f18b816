use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{emd, success_rate, EMD_POINTS, SUCCESS_THRESHOLD};
use super::report::{summarize, write_report};
use crate::embed_metric::{EmbeddingNet, NetCheckpoint, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN};
use crate::exemplar_db::{load_database, WordVectorTable, PATCH_CHANNELS, PATCH_SIZE};
use crate::grounding::Grounder;
use crate::instruction_lang::{Lexicon, ObjRefClassifier};
use crate::pipeline::{analyze_instruction, scripted_episode, Episode, EpisodeConfig, PerceptionAgent, PipelineConfig};
use crate::policy_exec::{gold_distributions, intrinsic_return, run_rollout, Rollout, RewardWeights};
use crate::sim_env::{build_exemplar_db, held_out_pool, synthetic_word_vectors, training_pool, DatasetConfig, ObjectType};
use crate::util::{canonical_json, config_hash, derive_seed, read_to_string};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Gold distributions from the demonstration.
    Oracle,
    /// Grounding, mapping and the heuristic predictor.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolChoice {
    HeldOut,
    Training,
}

impl PoolChoice {
    pub fn types(self) -> Vec<ObjectType> {
        match self {
            PoolChoice::HeldOut => held_out_pool(),
            PoolChoice::Training => training_pool(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub predictor: PredictorKind,
    pub episodes: usize,
    /// Episode `i` uses seed `seed + i`.
    pub seed: u64,
    pub pool: PoolChoice,
    pub episode: EpisodeConfig,
    pub pipeline: PipelineConfig,
    pub weights: RewardWeights,
    /// Object database JSON; built from the pool when unset.
    pub database: Option<PathBuf>,
    /// Embedder checkpoint; a seeded random network when unset.
    pub embedder: Option<PathBuf>,
    /// Reference classifier; phrase distance alone when unset.
    pub objref: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Exemplar images per object when the database is built in place.
    pub exemplar_images: usize,
    pub word_vector_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut episode = EpisodeConfig::default();
        episode.layout.max_objects = 8;
        ExperimentConfig {
            predictor: PredictorKind::Oracle,
            episodes: 20,
            seed: 0,
            pool: PoolChoice::HeldOut,
            episode,
            pipeline: PipelineConfig::default(),
            weights: RewardWeights::default(),
            database: None,
            embedder: None,
            objref: None,
            word_vectors: None,
            lexicon: None,
            exemplar_images: 8,
            word_vector_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::invalid("episodes", "must be positive"));
        }
        if self.pipeline.max_steps == 0 {
            return Err(Error::invalid("pipeline.max_steps", "must be positive"));
        }
        if self.exemplar_images == 0 {
            return Err(Error::invalid("exemplar_images", "must be positive"));
        }
        for p in [&self.database, &self.embedder, &self.objref, &self.word_vectors, &self.lexicon].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "resource file not found")));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.episodes as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

/// Loaded perception resources for the heuristic predictor.
#[derive(Debug, Clone)]
pub struct Resources {
    pub grounder: Grounder,
    pub lexicon: Lexicon,
    pub classifier: ObjRefClassifier,
}

pub fn load_resources(cfg: &ExperimentConfig) -> Result<Resources> {
    let lexicon = match &cfg.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::builtin(),
    };
    let table = match &cfg.word_vectors {
        Some(p) => WordVectorTable::load(p)?,
        None => synthetic_word_vectors(&lexicon, cfg.word_vector_seed),
    };
    let db = match &cfg.database {
        Some(p) => load_database(p)?,
        None => build_exemplar_db(&cfg.pool.types(), cfg.exemplar_images, derive_seed(cfg.seed, 11), &DatasetConfig::default())?,
    };
    let net = match &cfg.embedder {
        Some(p) => {
            let ck: NetCheckpoint = serde_json::from_str(&read_to_string(p)?)?;
            EmbeddingNet::from_checkpoint(&ck)?
        }
        None => EmbeddingNet::random(PATCH_SIZE * PATCH_SIZE * PATCH_CHANNELS, DEFAULT_HIDDEN, DEFAULT_EMBED_DIM, derive_seed(cfg.seed, 12)),
    };
    let classifier = match &cfg.objref {
        Some(p) => ObjRefClassifier::from_json(&read_to_string(p)?)?,
        None => ObjRefClassifier::constant(table.dim(), 1, 0.0),
    };
    Ok(Resources {
        grounder: Grounder::new(db, table, net)?,
        lexicon,
        classifier,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub success: bool,
    /// Meters.
    pub emd: f64,
    /// Distance from the final position to the demonstration's end, meters.
    pub stop_distance: f64,
    pub steps: usize,
    /// Whether the agent chose to stop before the step limit.
    pub stopped: bool,
    /// Intrinsic return under the gold distributions.
    #[serde(rename = "return")]
    pub return_value: f64,
    pub config_hash: String,
}

/// Trajectories for plotting and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub seed: u64,
    pub instruction: String,
    pub demo: Vec<[f64; 2]>,
    pub trajectory: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub episode: Episode,
    pub rollout: Rollout,
    pub result: EpisodeResult,
}

impl EpisodeOutcome {
    pub fn record(&self) -> RolloutRecord {
        RolloutRecord {
            seed: self.episode.seed,
            instruction: self.episode.instruction.clone(),
            demo: self.episode.demo.clone(),
            trajectory: self.rollout.positions(),
        }
    }
}

/// Roll out one episode; `resources` is required for the heuristic predictor.
pub fn run_episode(
    episode: &Episode,
    predictor: PredictorKind,
    resources: Option<&Resources>,
    pipeline: &PipelineConfig,
    weights: &RewardWeights,
    hash: &str,
) -> Result<EpisodeOutcome> {
    let gold = gold_distributions(&episode.demo, pipeline.predictor.sigma_goal, pipeline.predictor.edge)?;
    let rollout = match predictor {
        PredictorKind::Oracle => run_rollout(episode.start, pipeline.max_steps, &pipeline.controller, |_, _| Ok(gold.clone()))?,
        PredictorKind::Heuristic => {
            let res = resources.ok_or_else(|| Error::invalid("predictor", "heuristic predictor needs perception resources"))?;
            let analysis = analyze_instruction(
                &episode.instruction,
                &res.lexicon,
                &res.classifier,
                &res.grounder,
                pipeline.context_dim,
            )?;
            let mut agent = PerceptionAgent::new(&res.grounder, analysis, pipeline, derive_seed(episode.seed, 3));
            run_rollout(episode.start, pipeline.max_steps, &pipeline.controller, |s, t| {
                Ok(agent.step(&episode.layout, s, t)?.dists)
            })?
        }
    };
    let end = episode.demo_end();
    let fin = rollout.final_position();
    let stop_distance = (fin[0] - end[0]).hypot(fin[1] - end[1]);
    let ret = intrinsic_return(&rollout, &gold, weights, &pipeline.map);
    let result = EpisodeResult {
        seed: episode.seed,
        success: stop_distance <= SUCCESS_THRESHOLD,
        emd: emd(&rollout.positions(), &episode.demo, EMD_POINTS)?,
        stop_distance,
        steps: rollout.steps.len(),
        stopped: rollout.stopped(),
        return_value: ret.total,
        config_hash: hash.to_string(),
    };
    Ok(EpisodeOutcome {
        episode: episode.clone(),
        rollout,
        result,
    })
}

/// Generate and run every episode of `cfg` in parallel; outcomes are sorted by seed.
pub fn run_episodes(cfg: &ExperimentConfig, resources: Option<&Resources>) -> Result<Vec<EpisodeOutcome>> {
    cfg.validate()?;
    let hash = config_hash(cfg)?;
    let pool = cfg.pool.types();
    let mut out = cfg
        .seeds()
        .into_par_iter()
        .map(|seed| {
            let ep = scripted_episode(seed, &pool, &cfg.episode, &cfg.pipeline.render)?;
            run_episode(&ep, cfg.predictor, resources, &cfg.pipeline, &cfg.weights, &hash)
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|o| o.episode.seed);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub predictor: PredictorKind,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_emd: f64,
    pub mean_stop_distance: f64,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub config_hash: String,
}

/// Run the experiment and write `results.jsonl`, `rollouts.jsonl`,
/// `summary.csv`, `report.md` and SVG plots into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let resources = match cfg.predictor {
        PredictorKind::Oracle => None,
        PredictorKind::Heuristic => Some(load_resources(cfg)?),
    };
    let outcomes = run_episodes(cfg, resources.as_ref())?;
    let results: Vec<EpisodeResult> = outcomes.iter().map(|o| o.result.clone()).collect();
    let records: Vec<RolloutRecord> = outcomes.iter().map(EpisodeOutcome::record).collect();
    let mut lines = String::new();
    for r in &results {
        lines.push_str(&canonical_json(r)?);
        lines.push('\n');
    }
    crate::util::write_bytes(&out.join("results.jsonl"), lines.as_bytes())?;
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&canonical_json(r)?);
        lines.push('\n');
    }
    crate::util::write_bytes(&out.join("rollouts.jsonl"), lines.as_bytes())?;
    crate::util::write_bytes(&out.join("config.json"), canonical_json(cfg)?.as_bytes())?;
    let summary = summarize(cfg.predictor, &results)?;
    debug_assert_eq!(summary.success_rate, success_rate(&results.iter().map(|r| r.stop_distance).collect::<Vec<_>>())?);
    write_report(&summary, &results, &records, out)?;
    Ok(summary)
}
