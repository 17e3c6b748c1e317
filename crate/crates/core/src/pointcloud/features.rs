use super::LabeledPointCloud;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Column layout of per-point input features.
///
/// With color: `[X, Y, Z, R, G, B, X', Y', Z']`; without: `[X, Y, Z, X', Y', Z']`.
/// `X, Y, Z` are raw positions here; block sampling later shifts X and Y
/// into block-local coordinates. `X', Y', Z'` are positions normalized by
/// the extent of the whole cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub use_color: bool,
}

impl FeatureLayout {
    pub fn dim(self) -> usize {
        if self.use_color {
            9
        } else {
            6
        }
    }

    /// First of the three normalized columns.
    pub fn normalized_offset(self) -> usize {
        self.dim() - 3
    }

    pub fn color_columns(self) -> Option<std::ops::Range<usize>> {
        self.use_color.then_some(3..6)
    }
}

/// Builds the `N x D` feature matrix of a cloud.
pub fn assemble_features(cloud: &LabeledPointCloud, use_color: bool) -> Result<Tensor<f64>> {
    if use_color && cloud.colors().is_none() {
        return Err(Error::Argument("use_color requested but the cloud has no colors".into()));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot assemble features of an empty cloud".into()));
    }
    let layout = FeatureLayout { use_color };
    let b = cloud.bounds();
    let mut data = Vec::with_capacity(cloud.len() * layout.dim());
    for (i, p) in cloud.positions().iter().enumerate() {
        data.extend(p.iter().map(|&v| v as f64));
        if use_color {
            let c = cloud.colors().unwrap()[i];
            data.extend(c.iter().map(|&v| v as f64 / 255.0));
        }
        for a in 0..3 {
            let extent = b.extent(a);
            data.push(if extent > 0.0 { (p[a] as f64 - b.min[a] as f64) / extent } else { 0.5 });
        }
    }
    Tensor::new(vec![cloud.len(), layout.dim()], data)
}
