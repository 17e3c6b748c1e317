//! Depth map round trips.

use ptseg::pointcloud::{depth_to_cloud, CameraIntrinsics, DepthMap, LabeledPointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Projects `maps` random depth maps to clouds and back. Counts points that
/// land more than half a pixel from their source pixel, change depth, get
/// the wrong label, or are kept or dropped wrongly.
pub fn round_trip_violations(seed: u64, maps: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..maps {
        let (w, h) = (rng.gen_range(8..80), rng.gen_range(8..60));
        let f = rng.gen_range(50.0..900.0);
        let k = CameraIntrinsics::new(f, f * rng.gen_range(0.8..1.2), w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap();
        let values: Vec<f32> = (0..w * h)
            .map(|_| match rng.gen_range(0..10) {
                0 => 0.0,
                1 => rng.gen_range(80.0..120.0),
                _ => rng.gen_range(0.1..79.9),
            })
            .collect();
        let labels: Vec<usize> = (0..w * h).map(|_| rng.gen_range(0..3)).collect();
        let expected: Vec<usize> = (0..w * h).filter(|&i| values[i] > 0.0 && values[i] < 80.0).collect();
        let depth = DepthMap::new(w, h, values.clone()).unwrap();
        let cloud = depth_to_cloud(&depth, &labels, None, LabeledPointCloud::default_class_names(3), &k, 80.0).unwrap();
        if cloud.len() != expected.len() {
            bad += cloud.len().abs_diff(expected.len()).max(1);
            continue;
        }
        for ((p, &i), &l) in cloud.positions().iter().zip(&expected).zip(cloud.labels()) {
            let (u, v) = ((i % w) as f64, (i / w) as f64);
            let (pu, pv) = k.project([p[0] as f64, p[1] as f64, p[2] as f64]);
            let off = (pu - u).abs() > 0.5 || (pv - v).abs() > 0.5;
            bad += usize::from(off || p[2] != values[i] || l != labels[i]);
        }
    }
    bad
}
