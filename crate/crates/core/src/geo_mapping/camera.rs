use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole intrinsics. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels, principal point at the image center.
    pub fn from_hfov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let fx = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Intrinsics {
            width,
            height,
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.fx > 0.0) || !(self.fy > 0.0) {
            return Err(Error::invalid("intrinsics", format!("{self:?}")));
        }
        Ok(())
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics::from_hfov(128, 72, 84.0)
    }
}

pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.0;
pub const DEFAULT_PITCH_DEG: f64 = 15.0;

/// Camera pose: position, yaw about +z, fixed downward pitch, intrinsics.
///
/// Roll is always zero. Positive pitch tilts the optical axis toward the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub intrinsics: Intrinsics,
}

/// A point in camera coordinates: right, down, forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPoint {
    pub right: f64,
    pub down: f64,
    pub forward: f64,
}

impl Pose {
    /// Ground-robot pose with the default camera mount.
    pub fn ground(x: f64, y: f64, yaw: f64) -> Self {
        Pose {
            x,
            y,
            z: DEFAULT_CAMERA_HEIGHT,
            yaw,
            pitch: DEFAULT_PITCH_DEG.to_radians(),
            intrinsics: Intrinsics::default(),
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn forward_axis(&self) -> [f64; 3] {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        [cy * cp, sy * cp, -sp]
    }

    pub fn right_axis(&self) -> [f64; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        [sy, -cy, 0.0]
    }

    pub fn down_axis(&self) -> [f64; 3] {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        [-sp * cy, -sp * sy, -cp]
    }

    /// Camera at or below the ground plane: nothing on the plane is imaged.
    pub fn is_degenerate(&self) -> bool {
        self.z <= 1e-9
    }

    pub fn to_camera(&self, p: [f64; 3]) -> CameraPoint {
        let d = [p[0] - self.x, p[1] - self.y, p[2] - self.z];
        let dot = |a: [f64; 3]| a[0] * d[0] + a[1] * d[1] + a[2] * d[2];
        CameraPoint {
            right: dot(self.right_axis()),
            down: dot(self.down_axis()),
            forward: dot(self.forward_axis()),
        }
    }

    /// Continuous pixel coordinates of a world point in front of the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        let c = self.to_camera(p);
        if c.forward <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.cx + k.fx * c.right / c.forward, k.cy + k.fy * c.down / c.forward))
    }

    /// World-frame direction of the ray through continuous pixel `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> [f64; 3] {
        let k = &self.intrinsics;
        let a = (u - k.cx) / k.fx;
        let b = (v - k.cy) / k.fy;
        let (f, r, d) = (self.forward_axis(), self.right_axis(), self.down_axis());
        [
            f[0] + a * r[0] + b * d[0],
            f[1] + a * r[1] + b * d[1],
            f[2] + a * r[2] + b * d[2],
        ]
    }

    pub fn in_frame(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.intrinsics.width as f64 && v < self.intrinsics.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_are_orthonormal() {
        let p = Pose::ground(1.0, 2.0, 0.7);
        let (f, r, d) = (p.forward_axis(), p.right_axis(), p.down_axis());
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        for (a, b) in [(f, r), (f, d), (r, d)] {
            assert!(dot(a, b).abs() < 1e-12);
        }
        for a in [f, r, d] {
            assert!((dot(a, a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let p = Pose::ground(0.5, 0.5, 0.3);
        let f = p.forward_axis();
        let pt = [p.x + 2.0 * f[0], p.y + 2.0 * f[1], p.z + 2.0 * f[2]];
        let (u, v) = p.project(pt).unwrap();
        assert!((u - 64.0).abs() < 1e-9 && (v - 36.0).abs() < 1e-9);
    }

    #[test]
    fn ray_and_projection_agree() {
        let p = Pose::ground(2.0, 1.0, -1.1);
        let ray = p.pixel_ray(17.3, 50.2);
        let pt = [p.x + 3.0 * ray[0], p.y + 3.0 * ray[1], p.z + 3.0 * ray[2]];
        let (u, v) = p.project(pt).unwrap();
        assert!((u - 17.3).abs() < 1e-9 && (v - 50.2).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_not_projected() {
        let p = Pose::ground(2.0, 2.0, 0.0);
        assert!(p.project([1.0, 2.0, 0.0]).is_none());
    }
}
