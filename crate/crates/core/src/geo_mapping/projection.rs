use serde::{Deserialize, Serialize};

use super::camera::Pose;
use crate::grid::Grid;
use crate::{Error, Result};

pub const ENV_EDGE: f64 = 4.7;
pub const MAP_SIZE: usize = 32;

/// Square allocentric grid over `[0, edge]^2`; cell `(ix, iy)` spans
/// `[ix*s, (ix+1)*s) x [iy*s, (iy+1)*s)` with `s = edge / size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub size: usize,
    pub edge: f64,
}

impl Default for MapGeometry {
    fn default() -> Self {
        MapGeometry {
            size: MAP_SIZE,
            edge: ENV_EDGE,
        }
    }
}

impl MapGeometry {
    pub fn new(size: usize, edge: f64) -> Self {
        MapGeometry { size, edge }
    }

    pub fn cell_size(&self) -> f64 {
        self.edge / self.size as f64
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let s = self.cell_size();
        ((ix as f64 + 0.5) * s, (iy as f64 + 0.5) * s)
    }

    /// Cell containing a world point, or `None` outside the environment.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(0.0..self.edge).contains(&x) || !(0.0..self.edge).contains(&y) {
            return None;
        }
        let s = self.cell_size();
        Some((
            ((x / s) as usize).min(self.size - 1),
            ((y / s) as usize).min(self.size - 1),
        ))
    }

    /// Nearest cell, clamping points outside the environment onto the border.
    pub fn clamped_cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let s = self.cell_size();
        let c = |v: f64| ((v / s).floor().max(0.0) as usize).min(self.size - 1);
        (c(x), c(y))
    }

    pub fn zeros(&self) -> Grid {
        Grid::zeros(self.size, self.size)
    }

    pub fn check(&self, g: &Grid) -> Result<()> {
        if g.dims() != (self.size, self.size) {
            return Err(Error::dims(
                format!("{0}x{0}", self.size),
                format!("{}x{}", g.width(), g.height()),
            ));
        }
        Ok(())
    }
}

/// Bilinear sample at continuous pixel coordinates; pixel centers sit at `i + 0.5`.
pub fn bilinear(image: &Grid, u: f64, v: f64) -> f64 {
    let (w, h) = (image.width() as isize, image.height() as isize);
    let (su, sv) = (u - 0.5, v - 0.5);
    let (x0, y0) = (su.floor(), sv.floor());
    let (ax, ay) = (su - x0, sv - y0);
    let px = |x: isize| x.clamp(0, w - 1) as usize;
    let py = |y: isize| y.clamp(0, h - 1) as usize;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let g = |x: isize, y: isize| image.get(px(x), py(y));
    (1.0 - ay) * ((1.0 - ax) * g(x0, y0) + ax * g(x0 + 1, y0)) + ay * ((1.0 - ax) * g(x0, y0 + 1) + ax * g(x0 + 1, y0 + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub mask: Grid,
    /// The pose cannot image the ground plane; `mask` is all zero.
    pub degenerate: bool,
}

/// Inverse-warp a first-person mask onto the ground-plane map.
///
/// Each cell center is projected into the image; cells whose projection is
/// in front of the camera and inside the frame take the bilinear sample of
/// the mask there, every other cell is 0.
pub fn project_mask(mask: &Grid, pose: &Pose, geom: &MapGeometry) -> Result<Projected> {
    pose.intrinsics.validate()?;
    if mask.dims() != (pose.intrinsics.width, pose.intrinsics.height) {
        return Err(Error::dims(
            format!("{}x{}", pose.intrinsics.width, pose.intrinsics.height),
            format!("{}x{}", mask.width(), mask.height()),
        ));
    }
    let mut out = geom.zeros();
    if pose.is_degenerate() {
        return Ok(Projected {
            mask: out,
            degenerate: true,
        });
    }
    for iy in 0..geom.size {
        for ix in 0..geom.size {
            let (x, y) = geom.cell_center(ix, iy);
            if let Some((u, v)) = pose.project([x, y, 0.0]) {
                if pose.in_frame(u, v) {
                    out.set(ix, iy, bilinear(mask, u, v).clamp(0.0, 1.0));
                }
            }
        }
    }
    Ok(Projected {
        mask: out,
        degenerate: false,
    })
}

/// Cellwise max of two allocentric masks.
pub fn accumulate(prev: &Grid, new: &Grid) -> Result<Grid> {
    prev.zip_with(new, f64::max)
}

/// Cells whose centers project into the current frame.
pub fn visible_cells(pose: &Pose, geom: &MapGeometry) -> Grid {
    let mut out = geom.zeros();
    if pose.is_degenerate() {
        return out;
    }
    for iy in 0..geom.size {
        for ix in 0..geom.size {
            let (x, y) = geom.cell_center(ix, iy);
            if let Some((u, v)) = pose.project([x, y, 0.0]) {
                if pose.in_frame(u, v) {
                    out.set(ix, iy, 1.0);
                }
            }
        }
    }
    out
}

/// Mark the cells seen from `pose`; monotone non-decreasing.
pub fn observability_update(prev: &Grid, pose: &Pose, geom: &MapGeometry) -> Result<Grid> {
    geom.check(prev)?;
    accumulate(prev, &visible_cells(pose, geom))
}

/// 1 on the outermost ring of cells, 0 inside.
pub fn boundary_mask(size: usize) -> Grid {
    Grid::from_fn(size, size, |x, y| {
        f64::from(u8::from(x == 0 || y == 0 || x + 1 == size || y + 1 == size))
    })
}
