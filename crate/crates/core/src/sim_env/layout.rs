use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::catalog::{ObjectType, ShapeKind};
use crate::geo_mapping::ENV_EDGE;
use crate::util::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub type_id: String,
    pub shape: ShapeKind,
    pub rgb: [f64; 3],
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
    pub yaw: f64,
}

impl PlacedObject {
    pub fn new(t: &ObjectType, x: f64, y: f64, radius: f64, height: f64, yaw: f64) -> Self {
        PlacedObject {
            type_id: t.id.clone(),
            shape: t.shape,
            rgb: t.rgb,
            x,
            y,
            radius,
            height,
            yaw,
        }
    }

    /// Horizontal extent from the center to the farthest footprint point.
    pub fn footprint_radius(&self) -> f64 {
        match self.shape {
            ShapeKind::Box => self.half_side() * std::f64::consts::SQRT_2,
            _ => self.radius,
        }
    }

    pub fn half_side(&self) -> f64 {
        0.8 * self.radius
    }

    /// Distance from `(x, y)` to the footprint boundary, 0 inside it.
    pub fn surface_distance(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.x, y - self.y);
        match self.shape {
            ShapeKind::Box => {
                let (s, c) = self.yaw.sin_cos();
                let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
                let a = self.half_side();
                let (ex, ey) = ((lx.abs() - a).max(0.0), (ly.abs() - a).max(0.0));
                ex.hypot(ey)
            }
            _ => (dx.hypot(dy) - self.radius).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub edge: f64,
    pub objects: Vec<PlacedObject>,
}

impl Layout {
    pub fn empty() -> Self {
        Layout {
            edge: ENV_EDGE,
            objects: Vec::new(),
        }
    }

    pub fn index_of(&self, type_id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.type_id == type_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub edge: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Exact object count; drawn from `[min_objects, max_objects]` when unset.
    pub count: Option<usize>,
    pub allow_repeats: bool,
    pub min_spacing: f64,
    /// Clearance added to the sum of radii.
    pub clearance: f64,
    pub wall_margin: f64,
    pub radius: (f64, f64),
    pub height: (f64, f64),
    pub max_attempts: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            edge: ENV_EDGE,
            min_objects: 6,
            max_objects: 16,
            count: None,
            allow_repeats: false,
            min_spacing: 0.3,
            clearance: 0.1,
            wall_margin: 0.3,
            radius: (0.15, 0.25),
            height: (0.15, 0.35),
            max_attempts: 10_000,
        }
    }
}

/// Rejection-sample a layout from `pool`.
pub fn generate_layout(seed: u64, pool: &[ObjectType], cfg: &LayoutConfig) -> Result<Layout> {
    const LO: usize = 6;
    const HI: usize = 16;
    if cfg.min_objects < LO || cfg.max_objects > HI || cfg.min_objects > cfg.max_objects {
        return Err(Error::invalid(
            "layout count range",
            format!("[{}, {}] not within [{LO}, {HI}]", cfg.min_objects, cfg.max_objects),
        ));
    }
    let mut r = rng(seed);
    let n = match cfg.count {
        Some(n) if !(LO..=HI).contains(&n) => {
            return Err(Error::invalid("layout count", format!("{n} not within [{LO}, {HI}]")));
        }
        Some(n) => n,
        None => r.random_range(cfg.min_objects..=cfg.max_objects),
    };
    if pool.is_empty() || (!cfg.allow_repeats && pool.len() < n) {
        return Err(Error::invalid(
            "object pool",
            format!("{} types cannot fill {n} objects without repeats", pool.len()),
        ));
    }
    let types: Vec<&ObjectType> = if cfg.allow_repeats {
        (0..n).map(|_| &pool[r.random_range(0..pool.len())]).collect()
    } else {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut r);
        idx[..n].iter().map(|&i| &pool[i]).collect()
    };
    let mut objects: Vec<PlacedObject> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    for t in types {
        let radius = r.random_range(cfg.radius.0..=cfg.radius.1);
        let height = r.random_range(cfg.height.0..=cfg.height.1);
        let yaw = r.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let lo = cfg.wall_margin + radius;
        let hi = cfg.edge - cfg.wall_margin - radius;
        if lo >= hi {
            return Err(Error::invalid("layout", "environment too small for objects"));
        }
        loop {
            attempts += 1;
            if attempts > cfg.max_attempts {
                return Err(Error::invalid(
                    "layout",
                    format!("spacing unsatisfiable after {} attempts", cfg.max_attempts),
                ));
            }
            let (x, y) = (r.random_range(lo..hi), r.random_range(lo..hi));
            let ok = objects.iter().all(|o| {
                let need = cfg.min_spacing.max(o.radius + radius + cfg.clearance);
                (o.x - x).hypot(o.y - y) >= need
            });
            if ok {
                objects.push(PlacedObject::new(t, x, y, radius, height, yaw));
                break;
            }
        }
    }
    Ok(Layout { edge: cfg.edge, objects })
}
