use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::em::{resolve, AlignmentInstance, AlignmentModel, NULL_OBJECT};
use crate::instruction_lang::{chunk, tokenize, LabeledChunk, Lexicon};
use crate::sim_env::{generate_layout, LayoutConfig, ObjectType};
use crate::util::{canonical_json, derive_seed, read_to_string, rng, write_bytes};
use crate::{Error, Result};

pub const NEARBY_RADIUS: f64 = 1.41;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutObject {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// An instruction with the trajectory that executes it and its environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedExample {
    pub instruction: String,
    pub trajectory: Vec<[f64; 2]>,
    pub layout: Vec<LayoutObject>,
}

/// Ids of the objects within `radius` of any trajectory point, in layout order.
pub fn nearby_objects(layout: &[LayoutObject], trajectory: &[[f64; 2]], radius: f64) -> Vec<String> {
    layout
        .iter()
        .filter(|o| trajectory.iter().any(|p| (p[0] - o.x).hypot(p[1] - o.y) <= radius))
        .map(|o| o.id.clone())
        .collect()
}

fn chunks_of(ex: &AlignedExample, lexicon: &Lexicon) -> Vec<Vec<String>> {
    chunk(&tokenize(&ex.instruction), lexicon).into_iter().map(|c| c.tokens).collect()
}

pub fn prepare(corpus: &[AlignedExample], lexicon: &Lexicon, radius: f64) -> Vec<AlignmentInstance> {
    corpus
        .iter()
        .map(|ex| AlignmentInstance {
            chunks: chunks_of(ex, lexicon),
            candidates: nearby_objects(&ex.layout, &ex.trajectory, radius),
        })
        .collect()
}

/// Label each chunk 1 if it resolves to a real object, 0 for the null object.
pub fn extract_reference_dataset(corpus: &[AlignedExample], model: &AlignmentModel, lexicon: &Lexicon) -> Vec<LabeledChunk> {
    corpus
        .iter()
        .flat_map(|ex| {
            let candidates = nearby_objects(&ex.layout, &ex.trajectory, NEARBY_RADIUS);
            chunks_of(ex, lexicon)
                .into_iter()
                .map(|c| {
                    let label = u8::from(resolve(model, &c, &candidates) != NULL_OBJECT);
                    LabeledChunk { tokens: c, label }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn load_corpus(path: &Path) -> Result<Vec<AlignedExample>> {
    read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::invalid(format!("corpus line {}", n + 1), e.to_string()))
        })
        .collect()
}

pub fn save_corpus(corpus: &[AlignedExample], path: &Path) -> Result<()> {
    let mut s = String::new();
    for ex in corpus {
        s.push_str(&canonical_json(ex)?);
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

/// Chunks that never name an object.
pub const NULL_PHRASES: [&str; 6] = ["the left", "the right", "a full stop", "the right side", "the end", "the middle"];

/// A generated example and the ground truth of each chunk it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedExample {
    pub example: AlignedExample,
    /// Chunk text and the object it names (`None` for null chunks).
    pub truth: Vec<(String, Option<String>)>,
}

fn describe(t: &ObjectType, r: &mut impl rand::Rng) -> String {
    let noun = t.nouns().choose(r).copied().expect("nouns");
    format!("the {} {noun}", t.color_name)
}

/// Templated instructions over random layouts. Each trajectory runs straight
/// from a random start to the mentioned goal object, optionally passing a
/// second mentioned object on the way.
pub fn generate_corpus(seed: u64, size: usize, pool: &[ObjectType], layout_cfg: &LayoutConfig) -> Result<Vec<GeneratedExample>> {
    let mut out = Vec::with_capacity(size);
    for i in 0..size {
        let mut r = rng(derive_seed(seed, i as u64));
        let layout = generate_layout(derive_seed(seed, (1 << 32) + i as u64), pool, layout_cfg)?;
        let type_of = |id: &str| pool.iter().find(|t| t.id == id).expect("layout uses pool types");
        let objs = &layout.objects;
        let goal = r.random_range(0..objs.len());
        let via = (r.random_bool(0.5) && objs.len() > 1).then(|| {
            let mut k = r.random_range(0..objs.len() - 1);
            if k >= goal {
                k += 1;
            }
            k
        });
        let start = [r.random_range(0.3..layout.edge - 0.3), r.random_range(0.3..layout.edge - 0.3)];
        let mut waypoints = vec![start];
        if let Some(v) = via {
            waypoints.push([objs[v].x, objs[v].y]);
        }
        waypoints.push([objs[goal].x, objs[goal].y]);
        let mut trajectory = Vec::new();
        for w in waypoints.windows(2) {
            let steps = 10;
            for s in 0..steps {
                let a = s as f64 / steps as f64;
                trajectory.push([w[0][0] + a * (w[1][0] - w[0][0]), w[0][1] + a * (w[1][1] - w[0][1])]);
            }
        }
        trajectory.push(*waypoints.last().expect("goal"));
        let goal_desc = describe(type_of(&objs[goal].type_id), &mut r);
        let mut truth = Vec::new();
        let mut text = String::new();
        if let Some(v) = via {
            let via_desc = describe(type_of(&objs[v].type_id), &mut r);
            let side = ["the left", "the right"].choose(&mut r).copied().expect("sides");
            text.push_str(&format!("fly past {via_desc} on {side} and "));
            truth.push((via_desc, Some(objs[v].type_id.clone())));
            truth.push((side.to_string(), None));
        }
        let template = r.random_range(0..3);
        match template {
            0 => {
                text.push_str(&format!("go to {goal_desc}"));
                truth.push((goal_desc, Some(objs[goal].type_id.clone())));
            }
            1 => {
                text.push_str(&format!("head toward {goal_desc} and make a full stop"));
                truth.push((goal_desc, Some(objs[goal].type_id.clone())));
                truth.push(("a full stop".into(), None));
            }
            _ => {
                let null = *NULL_PHRASES[3..].choose(&mut r).expect("phrases");
                text.push_str(&format!("turn toward {null} then stop at {goal_desc}"));
                truth.push((null.to_string(), None));
                truth.push((goal_desc, Some(objs[goal].type_id.clone())));
            }
        }
        out.push(GeneratedExample {
            example: AlignedExample {
                instruction: text,
                trajectory,
                layout: objs
                    .iter()
                    .map(|o| LayoutObject {
                        id: o.type_id.clone(),
                        x: o.x,
                        y: o.y,
                    })
                    .collect(),
            },
            truth,
        });
    }
    Ok(out)
}

/// A known generative alignment model over an abstract vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownModelCorpus {
    pub instances: Vec<AlignmentInstance>,
    /// Per instance, per chunk: the generating object (`None` for null).
    pub truth: Vec<Vec<Option<String>>>,
}

/// Sample instances from a known model: each object owns a block of
/// tokens, the null object owns the rest; chunks draw two tokens from their
/// object's block with probability `1 - noise` each, otherwise uniformly
/// from the whole vocabulary.
pub fn sample_known_model(seed: u64, objects: usize, vocab: usize, examples: usize, noise: f64) -> Result<KnownModelCorpus> {
    if objects == 0 || vocab < 2 * (objects + 1) {
        return Err(Error::invalid("known model", format!("vocab {vocab} too small for {objects} objects")));
    }
    let per = vocab / (objects + 1);
    let token = |k: usize| format!("w{k:02}");
    let block = |o: Option<usize>| -> std::ops::Range<usize> {
        match o {
            Some(o) => o * per..(o + 1) * per,
            None => objects * per..vocab,
        }
    };
    let ids: Vec<String> = (0..objects).map(|o| format!("obj{o}")).collect();
    let mut r = rng(seed);
    let mut instances = Vec::with_capacity(examples);
    let mut truth = Vec::with_capacity(examples);
    for _ in 0..examples {
        let k = r.random_range(1..=objects.min(3));
        let mut all: Vec<usize> = (0..objects).collect();
        all.shuffle(&mut r);
        let cands = &all[..k];
        let n_chunks = r.random_range(1..=k);
        let mut chunks = Vec::new();
        let mut t = Vec::new();
        for &o in cands.iter().take(n_chunks) {
            chunks.push(o);
        }
        let mut srcs: Vec<Option<usize>> = chunks.into_iter().map(Some).collect();
        if r.random_bool(0.5) {
            srcs.push(None);
        }
        srcs.shuffle(&mut r);
        let mut toks = Vec::new();
        for s in &srcs {
            let b = block(*s);
            let c: Vec<String> = (0..2)
                .map(|_| {
                    if r.random_bool(noise) {
                        token(r.random_range(0..vocab))
                    } else {
                        token(r.random_range(b.clone()))
                    }
                })
                .collect();
            toks.push(c);
            t.push(s.map(|o| ids[o].clone()));
        }
        instances.push(AlignmentInstance {
            chunks: toks,
            candidates: cands.iter().map(|&o| ids[o].clone()).collect(),
        });
        truth.push(t);
    }
    Ok(KnownModelCorpus { instances, truth })
}
