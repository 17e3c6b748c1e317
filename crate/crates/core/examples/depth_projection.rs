//! Renders a floor and a floating box into a depth image, back-projects it
//! and writes the labeled cloud as ASCII.
//!
//! ```text
//! cargo run --release --example depth_projection -- out.txt
//! ```

use ptseg::pointcloud::{depth_to_cloud, write_ascii, CameraIntrinsics, DepthMap};

fn main() -> ptseg::Result<()> {
    let (w, h) = (160, 120);
    let k = CameraIntrinsics::new(150.0, 150.0, 80.0, 60.0, w, h)?;
    let mut depth = vec![0.0f32; w * h];
    let mut labels = vec![0usize; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            // ground plane one meter below the camera, seen in the lower half
            let dy = (v as f64 - k.center_y) / k.focal_y;
            if dy > 0.0 {
                depth[i] = (1.0 / dy) as f32;
            }
            // a box face at 3 m, 0.6 m wide, centered on the optical axis
            let [x, y, _] = k.unproject(u as f64, v as f64, 3.0);
            if x.abs() <= 0.3 && (-0.3..=0.3).contains(&y) {
                depth[i] = 3.0;
                labels[i] = 1;
            }
        }
    }
    let map = DepthMap::new(w, h, depth)?;
    let cloud = depth_to_cloud(&map, &labels, None, vec!["floor".into(), "box".into()], &k, 20.0)?;
    let boxes = cloud.labels().iter().filter(|&&l| l == 1).count();
    println!("{} points, {boxes} on the box", cloud.len());

    // pixels come back where they started
    let p = cloud.positions()[cloud.len() / 2];
    let (u, v) = k.project([p[0] as f64, p[1] as f64, p[2] as f64]);
    println!("middle point {p:?} projects to pixel ({u:.2}, {v:.2})");

    if let Some(path) = std::env::args().nth(1) {
        write_ascii(std::fs::File::create(&path)?, &cloud)?;
        println!("wrote {path}");
    }
    Ok(())
}
