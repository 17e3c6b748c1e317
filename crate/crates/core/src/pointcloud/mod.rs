//! Labeled point clouds: representation, file formats, input features,
//! depth-map projection and synthetic scenes.

mod depth;
mod features;
mod io;
mod synth;

pub use depth::{depth_to_cloud, CameraIntrinsics, DepthMap, DEFAULT_FOCAL, DEFAULT_MAX_DEPTH};
pub use features::{assemble_features, FeatureLayout};
pub use io::{load_cloud, read_ascii, read_binary, read_cloud, save_cloud, write_ascii, write_binary, CloudFormat};
pub use synth::{synth_scene, SceneRecipe, COUPLED_CLASSES, PLAIN_CLASSES};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Axis-aligned bounds of a cloud's positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: [f32; 3],
    pub max: [f32; 3],
}

impl Bounds {
    fn of(positions: &[[f32; 3]]) -> Bounds {
        let mut min = [f32::INFINITY; 3];
        let mut max = [f32::NEG_INFINITY; 3];
        for p in positions {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        if positions.is_empty() {
            min = [0.0; 3];
            max = [0.0; 3];
        }
        Bounds { min, max }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] as f64 - self.min[axis] as f64
    }
}

/// A scene: positions in meters, optional 8-bit colors, one label per point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    positions: Vec<[f32; 3]>,
    colors: Option<Vec<[u8; 3]>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    bounds: Bounds,
    tag: Option<String>,
}

impl LabeledPointCloud {
    pub fn new(
        positions: Vec<[f32; 3]>,
        colors: Option<Vec<[u8; 3]>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != positions.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                positions.len()
            )));
        }
        if let Some(c) = &colors {
            if c.len() != positions.len() {
                return Err(Error::Dimension(format!(
                    "{} colors for {} points",
                    c.len(),
                    positions.len()
                )));
            }
        }
        if class_names.is_empty() || class_names.len() > u16::MAX as usize {
            return Err(Error::Data(format!("invalid class count {}", class_names.len())));
        }
        if let Some(i) = positions.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Data(format!("point {i} has a non-finite coordinate")));
        }
        let m = class_names.len();
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= m) {
            return Err(Error::Label { index, label, classes: m });
        }
        let bounds = Bounds::of(&positions);
        Ok(LabeledPointCloud { positions, colors, labels, class_names, bounds, tag: None })
    }

    /// Class names `class0 .. class{m-1}`.
    pub fn default_class_names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("class{i}")).collect()
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn tag(&self) -> Option<&str> {
        self.tag.as_deref()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f32; 3]] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Same points and classes, different labels.
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Self> {
        let mut c = LabeledPointCloud::new(
            self.positions.clone(),
            self.colors.clone(),
            labels,
            self.class_names.clone(),
        )?;
        c.tag = self.tag.clone();
        Ok(c)
    }

    /// Same points and labels with colors replaced (or removed).
    pub fn recolored(&self, colors: Option<Vec<[u8; 3]>>) -> Result<Self> {
        let mut c = LabeledPointCloud::new(
            self.positions.clone(),
            colors,
            self.labels.clone(),
            self.class_names.clone(),
        )?;
        c.tag = self.tag.clone();
        Ok(c)
    }

    /// Hex SHA-256 of the binary encoding; identical for a cloud read from
    /// either file format.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        write_binary(&mut buf, self).expect("writing to memory");
        let hash = Sha256::digest(&buf);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
