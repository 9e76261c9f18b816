use std::collections::BTreeMap;

use crate::grid::Grid;
use crate::image::BBox;
use crate::{Error, Result};

pub const FOREGROUND_THRESHOLD: f64 = 0.5;

/// Per-box mask from the renderer's foreground channel: inside the box, the
/// pixels of the object covering the most pixels there (ties to the smaller
/// id). Zero outside the box.
pub fn refine_box(foreground: &[Option<usize>], width: usize, height: usize, bbox: &BBox, tau: f64) -> Result<Grid> {
    if foreground.len() != width * height {
        return Err(Error::dims(width * height, foreground.len()));
    }
    let b = bbox.clipped(width, height);
    let (x0, y0) = (b.x0.floor() as usize, b.y0.floor() as usize);
    let (x1, y1) = ((b.x1.ceil() as usize).min(width), (b.y1.ceil() as usize).min(height));
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for y in y0..y1 {
        for x in x0..x1 {
            if let (true, Some(id)) = (b.contains_pixel(x, y), foreground[y * width + x]) {
                *counts.entry(id).or_default() += 1;
            }
        }
    }
    let mut mask = Grid::zeros(width, height);
    // BTreeMap iterates ids ascending, so strict > keeps the smaller id on ties.
    let Some(target) = counts.iter().fold(None::<(usize, usize)>, |best, (&id, &c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((id, c)),
    }) else {
        return Ok(mask);
    };
    for y in y0..y1 {
        for x in x0..x1 {
            let fg = f64::from(u8::from(foreground[y * width + x] == Some(target.0)));
            if b.contains_pixel(x, y) && fg > tau {
                mask.set(x, y, 1.0);
            }
        }
    }
    Ok(mask)
}

/// `sum_b weights[b] * masks[b]`, clipped to `[0, 1]`.
pub fn segment_reference(weights: &[f64], masks: &[Grid]) -> Result<Grid> {
    if weights.len() != masks.len() {
        return Err(Error::dims(masks.len(), weights.len()));
    }
    let Some(first) = masks.first() else {
        return Err(Error::Empty("box masks"));
    };
    let mut out = Grid::zeros(first.width(), first.height());
    for (w, m) in weights.iter().zip(masks) {
        out.ensure_same_dims(m)?;
        if *w == 0.0 {
            continue;
        }
        out.data_mut().iter_mut().zip(m.data()).for_each(|(o, v)| *o += w * v);
    }
    Ok(out.map(|v| v.clamp(0.0, 1.0)))
}

/// Pixelwise max over the box masks; zero when there are none.
pub fn segment_all(masks: &[Grid], width: usize, height: usize) -> Result<Grid> {
    let mut out = Grid::zeros(width, height);
    for m in masks {
        out = out.zip_with(m, f64::max)?;
    }
    Ok(out)
}
