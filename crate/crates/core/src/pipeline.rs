//! Scripted navigation episodes and the per-step perception loop that turns
//! frames into an object context map.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::geo_mapping::{
    accumulate, boundary_mask, build_context_map, fit_context_halves, observability_update, project_mask, ContextMap,
    MapGeometry, PlacedReference, CONTEXT_CHANNELS,
};
use crate::grid::Grid;
use crate::grounding::{propose_regions, Grounder, Grounding, ProposalConfig};
use crate::instruction_lang::{anonymize, chunk, classify_reference, encode_context, Instruction, Lexicon, ObjRefClassifier};
use crate::policy_exec::{heuristic_predictor, ControllerConfig, PredictorConfig, VisitationDistributions};
use crate::sim_env::{generate_layout, render, AgentState, Layout, LayoutConfig, ObjectType, RenderConfig, RenderedScene};
use crate::util::{derive_seed, rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub layout: LayoutConfig,
    /// Range of start distances to the target, meters.
    pub distance: (f64, f64),
    /// Maximum bearing of the target off the start heading, degrees.
    pub bearing_deg: f64,
    /// Demonstrations end this far from the target's surface.
    pub standoff: f64,
    /// Start positions keep this distance from walls and object surfaces.
    pub margin: f64,
    /// Target pixels required in the first frame.
    pub min_visible_pixels: usize,
    /// Demonstration sample spacing, meters.
    pub demo_spacing: f64,
    pub max_tries: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            layout: LayoutConfig::default(),
            distance: (1.6, 3.2),
            bearing_deg: 20.0,
            standoff: 0.3,
            margin: 0.3,
            min_visible_pixels: 20,
            demo_spacing: 0.05,
            max_tries: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub seed: u64,
    pub layout: Layout,
    pub target: usize,
    pub start: AgentState,
    pub instruction: String,
    pub demo: Vec<[f64; 2]>,
}

impl Episode {
    pub fn demo_end(&self) -> [f64; 2] {
        *self.demo.last().expect("demonstrations are non-empty")
    }
}

/// "go to the <color> <noun>" episode: the target is in view at the start and
/// the demonstration is a straight line to a point `standoff` short of it.
pub fn scripted_episode(seed: u64, pool: &[ObjectType], cfg: &EpisodeConfig, render_cfg: &RenderConfig) -> Result<Episode> {
    let layout = generate_layout(derive_seed(seed, 0), pool, &cfg.layout)?;
    let mut r = rng(derive_seed(seed, 1));
    let edge = layout.edge;
    for _ in 0..cfg.max_tries {
        let target = r.random_range(0..layout.objects.len());
        let obj = &layout.objects[target];
        let d = r.random_range(cfg.distance.0..=cfg.distance.1);
        let phi = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (x, y) = (obj.x - d * phi.cos(), obj.y - d * phi.sin());
        if x < cfg.margin || y < cfg.margin || x > edge - cfg.margin || y > edge - cfg.margin {
            continue;
        }
        if layout.objects.iter().any(|o| o.surface_distance(x, y) < cfg.margin) {
            continue;
        }
        let b = cfg.bearing_deg.to_radians();
        let yaw = phi + if b > 0.0 { r.random_range(-b..=b) } else { 0.0 };
        let start = AgentState::new(x, y, crate::util::wrap_angle(yaw));
        let scene = render(&layout, &start.pose(), render_cfg, derive_seed(seed, 2));
        if scene.annotation_for(target).is_none_or(|a| a.pixels < cfg.min_visible_pixels) {
            continue;
        }
        let t = layout.objects.iter().position(|o| o.type_id == obj.type_id);
        if t != Some(target) {
            // Repeated types would make the instruction ambiguous.
            continue;
        }
        let end = standoff_point(obj, (x, y), cfg.standoff);
        let len = (end.0 - x).hypot(end.1 - y);
        let n = (len / cfg.demo_spacing).ceil().max(1.0) as usize;
        let demo = (0..=n)
            .map(|i| {
                let a = i as f64 / n as f64;
                [x + a * (end.0 - x), y + a * (end.1 - y)]
            })
            .collect();
        let ty = pool.iter().find(|p| p.id == obj.type_id).ok_or_else(|| Error::UnknownObject(obj.type_id.clone()))?;
        let noun = ty.shape.nouns().choose(&mut r).copied().expect("every shape has nouns");
        return Ok(Episode {
            seed,
            target,
            start,
            instruction: format!("go to the {} {noun}", ty.color_name),
            demo,
            layout,
        });
    }
    Err(Error::invalid("episode", format!("no feasible start found for seed {seed}")))
}

/// Point on the segment from the object center to `from` whose distance to
/// the object's surface is `standoff` (bisection on the surface distance).
fn standoff_point(obj: &crate::sim_env::PlacedObject, from: (f64, f64), standoff: f64) -> (f64, f64) {
    let at = |a: f64| (obj.x + a * (from.0 - obj.x), obj.y + a * (from.1 - obj.y));
    if obj.surface_distance(from.0, from.1) <= standoff {
        return from;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let p = at(mid);
        if obj.surface_distance(p.0, p.1) < standoff {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// The instruction split into object references and their map context vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionAnalysis {
    pub tokens: Vec<String>,
    pub references: Vec<Vec<String>>,
    pub anonymized: Vec<String>,
    /// One per reference, fitted to the map's context channels.
    pub psi: Vec<Vec<f64>>,
}

pub fn analyze_instruction(
    text: &str,
    lexicon: &Lexicon,
    classifier: &ObjRefClassifier,
    grounder: &Grounder,
    context_dim: usize,
) -> Result<InstructionAnalysis> {
    let ins = Instruction::parse(text)?;
    let chunks = chunk(&ins.tokens, lexicon);
    let mut refs = Vec::new();
    for c in chunks {
        if classify_reference(&c.tokens, classifier, &grounder.db, &grounder.table)?.is_reference {
            refs.push(c);
        }
    }
    let set = anonymize(&ins.tokens, &refs)?;
    let enc = encode_context(&set, &grounder.table)?;
    Ok(InstructionAnalysis {
        psi: enc.psi.iter().map(|p| fit_context_halves(p, context_dim)).collect(),
        references: set.refs.iter().map(|c| c.tokens.clone()).collect(),
        anonymized: set.anonymized,
        tokens: ins.tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub map: MapGeometry,
    pub context_dim: usize,
    pub proposals: ProposalConfig,
    pub render: RenderConfig,
    pub predictor: PredictorConfig,
    pub controller: ControllerConfig,
    pub max_steps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            map: MapGeometry::default(),
            context_dim: CONTEXT_CHANNELS,
            proposals: ProposalConfig::default(),
            render: RenderConfig::default(),
            predictor: PredictorConfig::default(),
            controller: ControllerConfig::default(),
            max_steps: 300,
        }
    }
}

/// Allocentric memory accumulated over an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMemory {
    pub references: Vec<Grid>,
    pub all_objects: Grid,
    pub observability: Grid,
}

impl MapMemory {
    pub fn new(geom: &MapGeometry, references: usize) -> Self {
        MapMemory {
            references: vec![geom.zeros(); references],
            all_objects: geom.zeros(),
            observability: geom.zeros(),
        }
    }

    /// Project this frame's masks and fold them in with a running max.
    pub fn update(&mut self, g: &Grounding, state: &AgentState, geom: &MapGeometry) -> Result<()> {
        let pose = state.pose();
        for (acc, m) in self.references.iter_mut().zip(&g.reference_masks) {
            *acc = accumulate(acc, &project_mask(m, &pose, geom)?.mask)?;
        }
        self.all_objects = accumulate(&self.all_objects, &project_mask(&g.all_objects, &pose, geom)?.mask)?;
        self.observability = observability_update(&self.observability, &pose, geom)?;
        Ok(())
    }

    pub fn context_map(&self, psi: &[Vec<f64>], context_dim: usize) -> Result<ContextMap> {
        let refs: Vec<PlacedReference> = psi.iter().zip(&self.references).map(|(p, m)| PlacedReference { psi: p, mask: m }).collect();
        build_context_map(&refs, &self.all_objects, &boundary_mask(self.all_objects.width()), &self.observability, context_dim)
    }
}

/// What the agent saw and predicted at one step.
#[derive(Debug, Clone)]
pub struct StepPerception {
    pub scene: RenderedScene,
    pub grounding: Grounding,
    pub map: ContextMap,
    pub dists: VisitationDistributions,
}

/// Perception and prediction for one episode.
pub struct PerceptionAgent<'a> {
    pub grounder: &'a Grounder,
    pub instruction: InstructionAnalysis,
    pub memory: MapMemory,
    pub cfg: &'a PipelineConfig,
    pub seed: u64,
}

impl<'a> PerceptionAgent<'a> {
    pub fn new(grounder: &'a Grounder, instruction: InstructionAnalysis, cfg: &'a PipelineConfig, seed: u64) -> Self {
        PerceptionAgent {
            memory: MapMemory::new(&cfg.map, instruction.references.len()),
            grounder,
            instruction,
            cfg,
            seed,
        }
    }

    pub fn step(&mut self, layout: &Layout, state: &AgentState, t: usize) -> Result<StepPerception> {
        let scene = render(layout, &state.pose(), &self.cfg.render, derive_seed(self.seed, 2 * t as u64));
        let proposals = propose_regions(&scene, &self.cfg.proposals, derive_seed(self.seed, 2 * t as u64 + 1));
        let grounding = self.grounder.ground(&scene, proposals, &self.instruction.references)?;
        self.memory.update(&grounding, state, &self.cfg.map)?;
        let map = self.memory.context_map(&self.instruction.psi, self.cfg.context_dim)?;
        let dists = heuristic_predictor(&map, &self.instruction.psi, &self.instruction.anonymized, state, &self.cfg.predictor)?;
        Ok(StepPerception {
            scene,
            grounding,
            map,
            dists,
        })
    }
}
