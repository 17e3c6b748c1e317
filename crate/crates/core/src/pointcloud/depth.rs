use super::LabeledPointCloud;
use crate::error::{Error, Result};

pub const DEFAULT_FOCAL: f64 = 725.0;
pub const DEFAULT_MAX_DEPTH: f64 = 80.0;

/// Pinhole intrinsics without distortion. Pixel `(u, v)` is column `u`,
/// row `v`, with integer coordinates at pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub focal_x: f64,
    pub focal_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(focal_x: f64, focal_y: f64, center_x: f64, center_y: f64, width: usize, height: usize) -> Result<Self> {
        if !(focal_x > 0.0 && focal_y > 0.0) {
            return Err(Error::Argument(format!("focal lengths must be positive, got {focal_x}, {focal_y}")));
        }
        if !(0.0..=width as f64).contains(&center_x) || !(0.0..=height as f64).contains(&center_y) {
            return Err(Error::Argument(format!(
                "principal point ({center_x}, {center_y}) outside a {width}x{height} image"
            )));
        }
        Ok(CameraIntrinsics { focal_x, focal_y, center_x, center_y, width, height })
    }

    /// Focal 725 px, principal point at the image center.
    pub fn default_for(width: usize, height: usize) -> Self {
        CameraIntrinsics {
            focal_x: DEFAULT_FOCAL,
            focal_y: DEFAULT_FOCAL,
            center_x: width as f64 / 2.0,
            center_y: height as f64 / 2.0,
            width,
            height,
        }
    }

    /// Camera-frame point to `(u, v)` pixel coordinates.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (p[0] * self.focal_x / p[2] + self.center_x, p[1] * self.focal_y / p[2] + self.center_y)
    }

    /// Pixel and depth to a camera-frame point.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [(u - self.center_x) * z / self.focal_x, (v - self.center_y) * z / self.focal_y, z]
    }
}

/// Row-major depth image in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(DepthMap { width, height, values })
    }
}

/// Back-projects every pixel with `0 < depth < max_depth` into a labeled point.
pub fn depth_to_cloud(
    depth: &DepthMap,
    semantic: &[usize],
    colors: Option<&[[u8; 3]]>,
    class_names: Vec<String>,
    k: &CameraIntrinsics,
    max_depth: f64,
) -> Result<LabeledPointCloud> {
    let n = depth.width * depth.height;
    if semantic.len() != n {
        return Err(Error::Dimension(format!(
            "semantic map has {} pixels, depth map {}x{}",
            semantic.len(),
            depth.width,
            depth.height
        )));
    }
    if let Some(c) = colors {
        if c.len() != n {
            return Err(Error::Dimension(format!("color image has {} pixels, expected {n}", c.len())));
        }
    }
    if k.width != depth.width || k.height != depth.height {
        return Err(Error::Dimension(format!(
            "intrinsics are for {}x{}, depth map is {}x{}",
            k.width, k.height, depth.width, depth.height
        )));
    }
    if let Some(i) = depth.values.iter().position(|&d| d < 0.0 || d.is_nan()) {
        return Err(Error::Data(format!("negative or NaN depth at pixel {i}")));
    }
    let mut positions = Vec::new();
    let mut labels = Vec::new();
    let mut out_colors = colors.map(|_| Vec::new());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v * depth.width + u;
            let z = depth.values[i];
            if !(z > 0.0 && (z as f64) < max_depth) {
                continue;
            }
            let p = k.unproject(u as f64, v as f64, z as f64);
            positions.push([p[0] as f32, p[1] as f32, z]);
            labels.push(semantic[i]);
            if let (Some(dst), Some(src)) = (out_colors.as_mut(), colors) {
                dst.push(src[i]);
            }
        }
    }
    LabeledPointCloud::new(positions, out_colors, labels, class_names)
}
