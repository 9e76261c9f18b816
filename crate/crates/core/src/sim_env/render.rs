use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::catalog::ShapeKind;
use super::layout::{Layout, PlacedObject};
use crate::geo_mapping::Pose;
use crate::grid::Grid;
use crate::image::{BBox, Image};
use crate::util::sub_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub ground_rgb: [f64; 3],
    pub outside_rgb: [f64; 3],
    pub sky_rgb: [f64; 3],
    /// Edge of the ground texture cells, meters.
    pub texture_cell: f64,
    pub texture_amplitude: f64,
    /// Per-object, per-frame multiplicative color jitter half-width.
    pub color_jitter: f64,
    pub light_dir: [f64; 3],
    /// Objects with fewer visible pixels get no annotation.
    pub min_pixels: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            ground_rgb: [0.56, 0.50, 0.42],
            outside_rgb: [0.30, 0.30, 0.32],
            sky_rgb: [0.74, 0.82, 0.94],
            texture_cell: 0.1,
            texture_amplitude: 0.05,
            color_jitter: 0.1,
            light_dir: [0.35, 0.25, 0.9],
            min_pixels: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub object_index: usize,
    pub type_id: String,
    /// Tight box, exclusive max.
    pub bbox: BBox,
    pub mask: Grid,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub image: Image,
    /// Layout index of the object seen at each pixel, row-major.
    pub foreground: Vec<Option<usize>>,
    pub annotations: Vec<Annotation>,
}

impl RenderedScene {
    pub fn annotation_for(&self, object_index: usize) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.object_index == object_index)
    }
}

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Roots of `a t^2 + b t + c` in ascending order.
fn quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a.abs() < 1e-15 {
        if b.abs() < 1e-15 {
            return None;
        }
        let t = -c / b;
        return Some((t, t));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let q = -0.5 * (b + b.signum() * s);
    let (t0, t1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((t0.min(t1), t0.max(t1)))
}

const T_MIN: f64 = 1e-9;

/// Nearest intersection of the ray `o + t d` with the object: `(t, normal)`.
fn intersect(obj: &PlacedObject, o: Vec3, d: Vec3) -> Option<(f64, Vec3)> {
    let (px, py, pz) = (o[0] - obj.x, o[1] - obj.y, o[2]);
    match obj.shape {
        ShapeKind::Disk => {
            let r = obj.radius;
            let h = obj.height;
            let mut best: Option<(f64, Vec3)> = None;
            if let Some((t0, t1)) = quadratic(d[0] * d[0] + d[1] * d[1], 2.0 * (px * d[0] + py * d[1]), px * px + py * py - r * r) {
                for t in [t0, t1] {
                    let z = pz + t * d[2];
                    if t > T_MIN && (0.0..=h).contains(&z) {
                        let (hx, hy) = (px + t * d[0], py + t * d[1]);
                        best = Some((t, [hx / r, hy / r, 0.0]));
                        break;
                    }
                }
            }
            if d[2].abs() > 1e-15 {
                let t = (h - pz) / d[2];
                let (hx, hy) = (px + t * d[0], py + t * d[1]);
                if t > T_MIN && hx * hx + hy * hy <= r * r && best.is_none_or(|b| t < b.0) {
                    best = Some((t, [0.0, 0.0, 1.0]));
                }
            }
            best
        }
        ShapeKind::Box => {
            let (s, c) = obj.yaw.sin_cos();
            let lo = [c * px + s * py, -s * px + c * py, pz];
            let ld = [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]];
            let a = obj.half_side();
            let lo_b = [-a, -a, 0.0];
            let hi_b = [a, a, obj.height];
            let (mut tn, mut tf) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut axis = 0usize;
            let mut sign = 0.0;
            for k in 0..3 {
                if ld[k].abs() < 1e-15 {
                    if lo[k] < lo_b[k] || lo[k] > hi_b[k] {
                        return None;
                    }
                    continue;
                }
                let (mut t0, mut t1) = ((lo_b[k] - lo[k]) / ld[k], (hi_b[k] - lo[k]) / ld[k]);
                let mut sg = -1.0;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                    sg = 1.0;
                }
                if t0 > tn {
                    tn = t0;
                    axis = k;
                    sign = sg;
                }
                tf = tf.min(t1);
            }
            if tn > tf || tn <= T_MIN {
                return None;
            }
            let mut ln = [0.0; 3];
            ln[axis] = sign;
            let n = [c * ln[0] - s * ln[1], s * ln[0] + c * ln[1], ln[2]];
            Some((tn, n))
        }
        ShapeKind::Cone => {
            let h = obj.height * 1.5;
            let k = obj.radius / h;
            let k2 = k * k;
            let qz = h - pz;
            let a = d[0] * d[0] + d[1] * d[1] - k2 * d[2] * d[2];
            let b = 2.0 * (px * d[0] + py * d[1] + k2 * qz * d[2]);
            let cc = px * px + py * py - k2 * qz * qz;
            let (t0, t1) = quadratic(a, b, cc)?;
            for t in [t0, t1] {
                let z = pz + t * d[2];
                if t > T_MIN && (0.0..=h).contains(&z) {
                    let (hx, hy) = (px + t * d[0], py + t * d[1]);
                    return Some((t, normalize([hx, hy, k2 * (h - z)])));
                }
            }
            None
        }
    }
}

fn hash2(a: i64, b: i64) -> f64 {
    let mut z = (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn background(o: Vec3, d: Vec3, edge: f64, cfg: &RenderConfig) -> Vec3 {
    if d[2] >= -1e-12 {
        return cfg.sky_rgb;
    }
    let t = -o[2] / d[2];
    let (x, y) = (o[0] + t * d[0], o[1] + t * d[1]);
    let base = if (0.0..=edge).contains(&x) && (0.0..=edge).contains(&y) {
        cfg.ground_rgb
    } else {
        cfg.outside_rgb
    };
    let n = cfg.texture_amplitude * (2.0 * hash2((x / cfg.texture_cell).floor() as i64, (y / cfg.texture_cell).floor() as i64) - 1.0);
    [base[0] + n, base[1] + n, base[2] + n].map(|v| v.clamp(0.0, 1.0))
}

/// Render the layout from `pose`. `seed` drives the per-frame color jitter.
pub fn render(layout: &Layout, pose: &Pose, cfg: &RenderConfig, seed: u64) -> RenderedScene {
    let (w, h) = (pose.intrinsics.width, pose.intrinsics.height);
    let o = pose.position();
    let light = normalize(cfg.light_dir);
    let tints: Vec<Vec3> = (0..layout.objects.len())
        .map(|i| {
            let mut r = sub_rng(seed, 1000 + i as u64);
            let j = cfg.color_jitter;
            [0; 3].map(|_| if j > 0.0 { r.random_range(1.0 - j..=1.0 + j) } else { 1.0 })
        })
        .collect();
    let mut image = Image::filled(w, h, [0.0; 3]);
    let mut foreground = vec![None; w * h];
    for py in 0..h {
        for px in 0..w {
            let d = pose.pixel_ray(px as f64 + 0.5, py as f64 + 0.5);
            let mut best: Option<(f64, usize, Vec3)> = None;
            for (i, obj) in layout.objects.iter().enumerate() {
                if let Some((t, n)) = intersect(obj, o, d) {
                    if best.is_none_or(|b| t < b.0) {
                        best = Some((t, i, n));
                    }
                }
            }
            let rgb = match best {
                Some((_, i, n)) => {
                    let obj = &layout.objects[i];
                    foreground[py * w + px] = Some(i);
                    let shade = 0.4 + 0.6 * dot(n, light).max(0.0);
                    [0, 1, 2].map(|c| (obj.rgb[c] * tints[i][c] * shade).clamp(0.0, 1.0))
                }
                None => background(o, d, layout.edge, cfg),
            };
            image.set_pixel(px, py, rgb);
        }
    }
    let annotations = annotate(layout, &foreground, w, h, cfg.min_pixels);
    RenderedScene {
        image,
        foreground,
        annotations,
    }
}

fn annotate(layout: &Layout, fg: &[Option<usize>], w: usize, h: usize, min_pixels: usize) -> Vec<Annotation> {
    let mut counts = vec![0usize; layout.objects.len()];
    for i in fg.iter().flatten() {
        counts[*i] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= min_pixels.max(1))
        .map(|(i, &c)| {
            let mask = Grid::from_fn(w, h, |x, y| f64::from(u8::from(fg[y * w + x] == Some(i))));
            Annotation {
                object_index: i,
                type_id: layout.objects[i].type_id.clone(),
                bbox: BBox::tight(&mask).expect("nonempty mask"),
                mask,
                pixels: c,
            }
        })
        .collect()
}

/// Unoccluded silhouette of a single object.
pub fn object_silhouette(obj: &PlacedObject, pose: &Pose) -> Grid {
    let (w, h) = (pose.intrinsics.width, pose.intrinsics.height);
    let o = pose.position();
    Grid::from_fn(w, h, |x, y| {
        let d = pose.pixel_ray(x as f64 + 0.5, y as f64 + 0.5);
        f64::from(u8::from(intersect(obj, o, d).is_some()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim_env::catalog::{catalog, ObjectType};

    fn single(t: &ObjectType, x: f64, y: f64) -> Layout {
        Layout {
            edge: 4.7,
            objects: vec![PlacedObject::new(t, x, y, 0.2, 0.3, 0.3)],
        }
    }

    #[test]
    fn on_axis_object_centroid_is_centered() {
        for t in catalog().iter().take(3) {
            let mut l = single(t, 3.0, 2.35);
            l.objects[0].yaw = 0.0;
            let pose = Pose::ground(1.0, 2.35, 0.0);
            let s = render(&l, &pose, &RenderConfig::default(), 0);
            let a = &s.annotations[0];
            let (mut sx, mut n) = (0.0, 0.0);
            for y in 0..72 {
                for x in 0..128 {
                    if a.mask.get(x, y) > 0.0 {
                        sx += x as f64 + 0.5;
                        n += 1.0;
                    }
                }
            }
            assert!((sx / n - 64.0).abs() <= 1.0, "{:?} centroid {}", t.shape, sx / n);
        }
    }

    #[test]
    fn empty_layout_is_background() {
        let s = render(&Layout::empty(), &Pose::ground(1.0, 1.0, 0.4), &RenderConfig::default(), 3);
        assert!(s.annotations.is_empty());
        assert!(s.foreground.iter().all(Option::is_none));
        assert_eq!(s.image.pixel(0, 0), RenderConfig::default().sky_rgb);
    }

    #[test]
    fn object_behind_camera_not_rendered() {
        let l = single(&catalog()[0], 0.5, 2.35);
        let s = render(&l, &Pose::ground(2.0, 2.35, 0.0), &RenderConfig::default(), 0);
        assert!(s.annotations.is_empty());
    }

    #[test]
    fn boxes_are_tight_and_deterministic() {
        let pool = catalog();
        let l = crate::sim_env::generate_layout(4, &pool, &Default::default()).unwrap();
        let pose = Pose::ground(0.4, 0.4, std::f64::consts::FRAC_PI_4);
        let s = render(&l, &pose, &RenderConfig::default(), 9);
        assert!(!s.annotations.is_empty());
        for a in &s.annotations {
            assert_eq!(BBox::tight(&a.mask), Some(a.bbox));
            assert_eq!(a.mask.sum() as usize, a.pixels);
        }
        assert_eq!(s, render(&l, &pose, &RenderConfig::default(), 9));
    }

    #[test]
    fn nearer_object_occludes() {
        let pool = catalog();
        let l = Layout {
            edge: 4.7,
            objects: vec![
                PlacedObject::new(&pool[0], 3.5, 2.35, 0.2, 0.3, 0.0),
                PlacedObject::new(&pool[3], 2.5, 2.35, 0.2, 0.3, 0.0),
            ],
        };
        let s = render(&l, &Pose::ground(1.0, 2.35, 0.0), &RenderConfig::default(), 0);
        let near = s.annotation_for(1).unwrap();
        let sil = object_silhouette(&l.objects[0], &Pose::ground(1.0, 2.35, 0.0));
        let far_visible = s.annotation_for(0).map_or(0, |a| a.pixels);
        assert!(near.pixels > 0 && (far_visible as f64) < sil.sum());
    }

    #[test]
    fn quadratic_roots() {
        assert_eq!(quadratic(1.0, -3.0, 2.0), Some((1.0, 2.0)));
        assert_eq!(quadratic(1.0, 0.0, 1.0), None);
    }
}
