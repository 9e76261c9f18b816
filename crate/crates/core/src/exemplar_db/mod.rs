//! Object database of image and phrase exemplars, and the word-vector table.

mod wordvec;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::{canonical_json, decode_f32_b64, encode_f32_b64, read_to_string, write_bytes};
use crate::{Error, Result};

pub use wordvec::{phrase_embedding, PhraseEmbedding, WordVectorTable};

pub const PATCH_SIZE: usize = 32;
pub const PATCH_CHANNELS: usize = 3;
pub const MAX_EXEMPLARS: usize = 16;

/// Row-major `h x w x c` float image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl ImagePatch {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::dims(h * w * c, data.len()));
        }
        Ok(ImagePatch { h, w, c, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        ImagePatch {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectEntry {
    pub id: String,
    pub images: Vec<ImagePatch>,
    pub phrases: Vec<Vec<String>>,
}

/// The object database `O`: entries plus a prior over them.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDatabase {
    entries: Vec<ObjectEntry>,
    prior: Vec<f64>,
    explicit_prior: bool,
}

#[derive(Serialize, Deserialize)]
struct ImageRecord {
    h: usize,
    w: usize,
    c: usize,
    data_b64: String,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    id: String,
    images: Vec<ImageRecord>,
    phrases: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct DatabaseRecord {
    objects: Vec<EntryRecord>,
    prior: Option<Vec<f64>>,
}

impl ObjectDatabase {
    /// Build a database with a uniform prior.
    pub fn new(entries: Vec<ObjectEntry>) -> Result<Self> {
        Self::build(entries, None)
    }

    pub fn with_prior(entries: Vec<ObjectEntry>, prior: Vec<f64>) -> Result<Self> {
        Self::build(entries, Some(prior))
    }

    fn build(entries: Vec<ObjectEntry>, prior: Option<Vec<f64>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("object database"));
        }
        let mut seen = HashSet::new();
        let dims = entries[0].images.first().map(ImagePatch::dims);
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            let field = |f: &str, reason: String| Error::invalid(format!("entry {:?} field {f}", e.id), reason);
            if e.images.is_empty() || e.images.len() > MAX_EXEMPLARS {
                return Err(field(
                    "images",
                    format!("expected 1..={MAX_EXEMPLARS} images, got {}", e.images.len()),
                ));
            }
            if e.phrases.is_empty() || e.phrases.len() > MAX_EXEMPLARS {
                return Err(field(
                    "phrases",
                    format!("expected 1..={MAX_EXEMPLARS} phrases, got {}", e.phrases.len()),
                ));
            }
            if e.phrases.iter().any(Vec::is_empty) {
                return Err(field("phrases", "empty phrase".into()));
            }
            for img in &e.images {
                if Some(img.dims()) != dims {
                    return Err(field(
                        "images",
                        format!("patch dims {:?} differ from database dims {:?}", img.dims(), dims),
                    ));
                }
                if img.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(field("images", "values outside [0, 1]".into()));
                }
            }
        }
        let n = entries.len();
        let explicit_prior = prior.is_some();
        let prior = match prior {
            None => vec![1.0 / n as f64; n],
            Some(p) => {
                if p.len() != n {
                    return Err(Error::invalid("prior", format!("{} values for {n} objects", p.len())));
                }
                if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::invalid("prior", "values must be finite and nonnegative"));
                }
                let total: f64 = p.iter().sum();
                if total <= 0.0 {
                    return Err(Error::invalid("prior", "sums to zero"));
                }
                p.iter().map(|v| v / total).collect()
            }
        };
        Ok(ObjectDatabase {
            entries,
            prior,
            explicit_prior,
        })
    }

    pub fn entries(&self) -> &[ObjectEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id)
    }

    pub fn patch_dims(&self) -> (usize, usize, usize) {
        self.entries[0].images[0].dims()
    }

    /// Reorder entries (and the prior) by `order`, a permutation of indices.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let entries = order.iter().map(|&i| self.entries[i].clone()).collect();
        let prior = order.iter().map(|&i| self.prior[i]).collect();
        Self::with_prior(entries, prior)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let rec: DatabaseRecord = serde_json::from_str(s)?;
        let mut entries = Vec::with_capacity(rec.objects.len());
        for (k, o) in rec.objects.into_iter().enumerate() {
            let mut images = Vec::with_capacity(o.images.len());
            for (j, im) in o.images.into_iter().enumerate() {
                let ctx = |reason: String| {
                    Error::invalid(format!("entry {:?} (#{k}) field images[{j}]", o.id), reason)
                };
                let mut data = decode_f32_b64(&im.data_b64).map_err(|e| ctx(e.to_string()))?;
                if data.len() != im.h * im.w * im.c {
                    return Err(ctx(format!(
                        "{} values for declared shape {}x{}x{}",
                        data.len(),
                        im.h,
                        im.w,
                        im.c
                    )));
                }
                if im.h != PATCH_SIZE || im.w != PATCH_SIZE || im.c != PATCH_CHANNELS {
                    return Err(ctx(format!(
                        "shape {}x{}x{} is not {PATCH_SIZE}x{PATCH_SIZE}x{PATCH_CHANNELS}",
                        im.h, im.w, im.c
                    )));
                }
                if data.iter().any(|v| !v.is_finite()) {
                    return Err(ctx("non-finite pixel value".into()));
                }
                normalize_unit_range(&mut data);
                images.push(ImagePatch::new(im.h, im.w, im.c, data)?);
            }
            entries.push(ObjectEntry {
                id: o.id,
                images,
                phrases: o.phrases,
            });
        }
        Self::build(entries, rec.prior)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let rec = DatabaseRecord {
            objects: self
                .entries
                .iter()
                .map(|e| EntryRecord {
                    id: e.id.clone(),
                    images: e
                        .images
                        .iter()
                        .map(|im| ImageRecord {
                            h: im.h,
                            w: im.w,
                            c: im.c,
                            data_b64: encode_f32_b64(&im.data),
                        })
                        .collect(),
                    phrases: e.phrases.clone(),
                })
                .collect(),
            prior: self.explicit_prior.then(|| self.prior.clone()),
        };
        canonical_json(&rec)
    }
}

/// Values on an 8-bit scale are divided by 255; everything is then clamped to `[0, 1]`.
fn normalize_unit_range(data: &mut [f64]) {
    if data.iter().any(|&v| v > 1.0) {
        data.iter_mut().for_each(|v| *v /= 255.0);
    }
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

pub fn load_database(path: &Path) -> Result<ObjectDatabase> {
    ObjectDatabase::from_json_str(&read_to_string(path)?)
}

pub fn save_database(db: &ObjectDatabase, path: &Path) -> Result<()> {
    write_bytes(path, db.to_json_string()?.as_bytes())
}
