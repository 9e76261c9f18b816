use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::ObjectType;
use super::layout::{generate_layout, Layout, LayoutConfig, PlacedObject};
use super::render::{render, RenderConfig, RenderedScene};
use crate::embed_metric::{LabeledPatch, TripletIndices};
use crate::exemplar_db::{ObjectDatabase, ObjectEntry, PATCH_SIZE};
use crate::geo_mapping::Pose;
use crate::grid::Grid;
use crate::image::{BBox, Image};
use crate::util::{
    canonical_json, config_hash, derive_seed, f32_from_le_bytes, f32_le_bytes, read_to_string, rng, write_bytes, Rng,
};
use crate::{Error, Result};

/// Where to stand to look at an object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewConfig {
    pub distance: (f64, f64),
    /// Maximum absolute bearing of the object from the optical axis, degrees.
    pub bearing_deg: f64,
    /// Minimum distance of the agent from the walls.
    pub margin: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            distance: (1.2, 3.0),
            bearing_deg: 20.0,
            margin: 0.2,
        }
    }
}

/// Sample an agent pose that has `obj` in view; falls back to the
/// environment center if no in-bounds pose is found.
pub fn sample_view(obj: &PlacedObject, edge: f64, view: &ViewConfig, r: &mut Rng) -> Pose {
    for _ in 0..200 {
        let d = r.random_range(view.distance.0..=view.distance.1);
        let phi = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let (x, y) = (obj.x - d * phi.cos(), obj.y - d * phi.sin());
        if x < view.margin || y < view.margin || x > edge - view.margin || y > edge - view.margin {
            continue;
        }
        let b = view.bearing_deg.to_radians();
        let off = if b > 0.0 { r.random_range(-b..=b) } else { 0.0 };
        return Pose::ground(x, y, phi + off);
    }
    let (cx, cy) = (edge / 2.0, edge / 2.0);
    Pose::ground(cx, cy, (obj.y - cy).atan2(obj.x - cx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub frames_per_layout: usize,
    pub positives: usize,
    pub negatives: usize,
    pub layout: LayoutConfig,
    pub render: RenderConfig,
    pub view: ViewConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            frames_per_layout: 4,
            positives: 4,
            negatives: 4,
            layout: LayoutConfig::default(),
            render: RenderConfig::default(),
            view: ViewConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub object_index: usize,
    pub type_id: String,
    pub bbox: BBox,
    pub pixels: usize,
    /// Row-major run lengths, starting with a run of zeros.
    pub mask_rle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub layout_seed: u64,
    pub pose: [f64; 3],
    pub width: usize,
    pub height: usize,
    pub annotations: Vec<AnnotationRecord>,
    #[serde(skip)]
    pub image: Option<Image>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub id: usize,
    pub frame: usize,
    pub object_index: usize,
    pub type_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArDataset {
    pub seed: u64,
    pub frames: Vec<FrameRecord>,
    pub crops: Vec<CropRecord>,
    pub patches: Vec<LabeledPatch>,
    pub triplets: Vec<TripletIndices>,
}

pub fn rle_encode(mask: &Grid) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut cur = false;
    let mut n = 0u32;
    for &v in mask.data() {
        let on = v > 0.0;
        if on != cur {
            runs.push(n);
            n = 0;
            cur = on;
        }
        n += 1;
    }
    runs.push(n);
    runs
}

pub fn rle_decode(runs: &[u32], width: usize, height: usize) -> Result<Grid> {
    let mut data = Vec::with_capacity(width * height);
    for (i, &n) in runs.iter().enumerate() {
        let v = if i % 2 == 0 { 0.0 } else { 1.0 };
        data.extend(std::iter::repeat_n(v, n as usize));
    }
    Grid::from_vec(width, height, data)
}

fn frame_scene(seed: u64, index: usize, pool: &[ObjectType], cfg: &DatasetConfig) -> Result<(u64, Layout, Pose, RenderedScene)> {
    let per = cfg.frames_per_layout.max(1);
    let layout_seed = derive_seed(seed, (index / per) as u64);
    let layout = generate_layout(layout_seed, pool, &cfg.layout)?;
    let mut r = rng(derive_seed(seed, 1 << 32 | index as u64));
    let target = r.random_range(0..layout.objects.len());
    let pose = sample_view(&layout.objects[target], layout.edge, &cfg.view, &mut r);
    let scene = render(&layout, &pose, &cfg.render, derive_seed(seed, 2 << 32 | index as u64));
    Ok((layout_seed, layout, pose, scene))
}

/// Render `size` annotated frames, crop every annotated object, and pair crops
/// into triplets by object type.
pub fn gen_ar_dataset(seed: u64, size: usize, pool: &[ObjectType], cfg: &DatasetConfig) -> Result<ArDataset> {
    let rendered: Vec<(FrameRecord, Vec<LabeledPatch>)> = (0..size)
        .into_par_iter()
        .map(|i| {
            let (layout_seed, _, pose, scene) = frame_scene(seed, i, pool, cfg)?;
            let patches = scene
                .annotations
                .iter()
                .map(|a| LabeledPatch {
                    label: a.type_id.clone(),
                    patch: scene.image.crop(&a.bbox, PATCH_SIZE),
                })
                .collect();
            let rec = FrameRecord {
                index: i,
                layout_seed,
                pose: [pose.x, pose.y, pose.yaw],
                width: scene.image.width,
                height: scene.image.height,
                annotations: scene
                    .annotations
                    .iter()
                    .map(|a| AnnotationRecord {
                        object_index: a.object_index,
                        type_id: a.type_id.clone(),
                        bbox: a.bbox,
                        pixels: a.pixels,
                        mask_rle: rle_encode(&a.mask),
                    })
                    .collect(),
                image: Some(scene.image),
            };
            Ok((rec, patches))
        })
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(size);
    let mut crops = Vec::new();
    let mut patches = Vec::new();
    for (rec, ps) in rendered {
        for (a, p) in rec.annotations.iter().zip(ps) {
            crops.push(CropRecord {
                id: crops.len(),
                frame: rec.index,
                object_index: a.object_index,
                type_id: a.type_id.clone(),
            });
            patches.push(p);
        }
        frames.push(rec);
    }
    let triplets = make_triplets(&crops, cfg.positives, cfg.negatives, derive_seed(seed, 3 << 32));
    Ok(ArDataset {
        seed,
        frames,
        crops,
        patches,
        triplets,
    })
}

/// Anchors with at least one other crop of the same type; positives share the
/// type, negatives do not.
pub fn make_triplets(crops: &[CropRecord], positives: usize, negatives: usize, seed: u64) -> Vec<TripletIndices> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for a in crops {
        let mut pos: Vec<usize> = crops.iter().filter(|c| c.type_id == a.type_id && c.id != a.id).map(|c| c.id).collect();
        let mut neg: Vec<usize> = crops.iter().filter(|c| c.type_id != a.type_id).map(|c| c.id).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        pos.shuffle(&mut r);
        neg.shuffle(&mut r);
        pos.truncate(positives.max(1));
        neg.truncate(negatives.max(1));
        out.push(TripletIndices {
            anchor: a.id,
            positives: pos,
            negatives: neg,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub size: usize,
    pub config_hash: String,
    pub pool: Vec<String>,
    pub frames: usize,
    pub crops: usize,
    pub triplets: usize,
    pub config: DatasetConfig,
}

#[derive(Serialize, Deserialize)]
struct TripletRecord {
    anchor: usize,
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

/// `manifest.json`, `frames/frame_NNNNN.{bin,json}`, `crops.jsonl`, `triplets.jsonl`.
pub fn write_dataset(ds: &ArDataset, pool: &[ObjectType], cfg: &DatasetConfig, dir: &Path) -> Result<()> {
    let manifest = Manifest {
        seed: ds.seed,
        size: ds.frames.len(),
        config_hash: config_hash(cfg)?,
        pool: pool.iter().map(|t| t.id.clone()).collect(),
        frames: ds.frames.len(),
        crops: ds.crops.len(),
        triplets: ds.triplets.len(),
        config: cfg.clone(),
    };
    write_bytes(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    for f in &ds.frames {
        let stem = dir.join("frames").join(format!("frame_{:05}", f.index));
        let img = f.image.as_ref().ok_or(Error::Empty("frame image"))?;
        write_bytes(&stem.with_extension("bin"), &f32_le_bytes(&img.data))?;
        write_bytes(&stem.with_extension("json"), canonical_json(f)?.as_bytes())?;
    }
    let mut crops = String::new();
    for c in &ds.crops {
        crops.push_str(&canonical_json(c)?);
        crops.push('\n');
    }
    write_bytes(&dir.join("crops.jsonl"), crops.as_bytes())?;
    let mut trip = String::new();
    for t in &ds.triplets {
        trip.push_str(&canonical_json(&TripletRecord {
            anchor: t.anchor,
            positives: t.positives.clone(),
            negatives: t.negatives.clone(),
        })?);
        trip.push('\n');
    }
    write_bytes(&dir.join("triplets.jsonl"), trip.as_bytes())
}

/// Reload a dataset directory, re-cropping patches from the frame images.
pub fn load_dataset(dir: &Path) -> Result<ArDataset> {
    let manifest: Manifest = serde_json::from_str(&read_to_string(&dir.join("manifest.json"))?)?;
    let mut frames = Vec::with_capacity(manifest.frames);
    for i in 0..manifest.frames {
        let stem = dir.join("frames").join(format!("frame_{i:05}"));
        let mut f: FrameRecord = serde_json::from_str(&read_to_string(&stem.with_extension("json"))?)?;
        let bin = stem.with_extension("bin");
        let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        f.image = Some(Image::new(f.width, f.height, f32_from_le_bytes(&bytes)?)?);
        frames.push(f);
    }
    let mut crops = Vec::new();
    let mut patches = Vec::new();
    for line in read_to_string(&dir.join("crops.jsonl"))?.lines().filter(|l| !l.trim().is_empty()) {
        let c: CropRecord = serde_json::from_str(line)?;
        let f = frames.get(c.frame).ok_or_else(|| Error::invalid("crops.jsonl", format!("frame {} missing", c.frame)))?;
        let a = f
            .annotations
            .iter()
            .find(|a| a.object_index == c.object_index)
            .ok_or_else(|| Error::invalid("crops.jsonl", format!("crop {} has no annotation", c.id)))?;
        patches.push(LabeledPatch {
            label: c.type_id.clone(),
            patch: f.image.as_ref().expect("loaded").crop(&a.bbox, PATCH_SIZE),
        });
        crops.push(c);
    }
    let mut triplets = Vec::new();
    for line in read_to_string(&dir.join("triplets.jsonl"))?.lines().filter(|l| !l.trim().is_empty()) {
        let t: TripletRecord = serde_json::from_str(line)?;
        triplets.push(TripletIndices {
            anchor: t.anchor,
            positives: t.positives,
            negatives: t.negatives,
        });
    }
    Ok(ArDataset {
        seed: manifest.seed,
        frames,
        crops,
        patches,
        triplets,
    })
}

/// Exemplar database: `images` crops of each type, each viewed alone at a
/// random size and viewpoint, plus the type's phrases.
pub fn build_exemplar_db(types: &[ObjectType], images: usize, seed: u64, cfg: &DatasetConfig) -> Result<ObjectDatabase> {
    let entries = types
        .par_iter()
        .enumerate()
        .map(|(ti, t)| {
            let mut views = Vec::with_capacity(images);
            let mut r = rng(derive_seed(seed, ti as u64));
            let mut tries = 0;
            while views.len() < images {
                tries += 1;
                if tries > 100 * images {
                    return Err(Error::Numerical(format!("could not render exemplars of {}", t.id)));
                }
                let radius = r.random_range(cfg.layout.radius.0..=cfg.layout.radius.1);
                let height = r.random_range(cfg.layout.height.0..=cfg.layout.height.1);
                let yaw = r.random_range(0.0..std::f64::consts::FRAC_PI_2);
                let e = cfg.layout.edge;
                let obj = PlacedObject::new(t, e / 2.0, e / 2.0, radius, height, yaw);
                let pose = sample_view(&obj, e, &cfg.view, &mut r);
                let layout = Layout { edge: e, objects: vec![obj] };
                let scene = render(&layout, &pose, &cfg.render, r.random());
                if let Some(a) = scene.annotations.first() {
                    views.push(scene.image.crop(&a.bbox, PATCH_SIZE));
                }
            }
            Ok(ObjectEntry {
                id: t.id.clone(),
                images: views,
                phrases: t.phrases(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ObjectDatabase::new(entries)
}
