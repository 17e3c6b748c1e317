//! Procedural rooms for desk-scale experiments.
//!
//! A room is an axis-aligned box starting at the origin, populated with a
//! floor, a ceiling, up to four walls, box-shaped furniture and thin poles.
//! Surfaces are sampled uniformly with a Poisson-distributed point count of
//! `density * area`.
//!
//! With `context_coupling`, the room is tiled into 2x2 groups of 1 m cells.
//! Each tile holds one box in one cell and a marker in the neighbouring cell
//! of the same row. Boxes of both classes are drawn from the same shape and
//! color distribution; only the marker kind (a tall pole or a sphere) tells
//! them apart, and it never enters the box's own cell.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::LabeledPointCloud;
use crate::config::{format_list, KeyValues};
use crate::error::{Error, Result};

pub const PLAIN_CLASSES: [&str; 5] = ["floor", "ceiling", "wall", "furniture", "pole"];
pub const COUPLED_CLASSES: [&str; 7] = ["floor", "ceiling", "wall", "box_a", "box_b", "marker_a", "marker_b"];

const FLOOR: usize = 0;
const CEILING: usize = 1;
const WALL: usize = 2;
const FURNITURE: usize = 3;
const POLE: usize = 4;
const BOX_A: usize = 3;
const BOX_B: usize = 4;
const MARKER_A: usize = 5;
const MARKER_B: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecipe {
    pub seed: u64,
    /// Room size in meters along x, y, z.
    pub extent: [f64; 3],
    pub floor: bool,
    pub ceiling: bool,
    /// Number of walls, 0 to 4, in the order x=0, x=max, y=0, y=max.
    pub walls: usize,
    /// Furniture boxes (ignored with `context_coupling`).
    pub boxes: usize,
    /// Poles (ignored with `context_coupling`).
    pub poles: usize,
    /// Points per square meter of surface.
    pub density: f64,
    pub context_coupling: bool,
    pub color: bool,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        SceneRecipe {
            seed: 0,
            extent: [4.0, 4.0, 3.0],
            floor: true,
            ceiling: true,
            walls: 4,
            boxes: 3,
            poles: 2,
            density: 100.0,
            context_coupling: false,
            color: true,
        }
    }
}

impl SceneRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.extent.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Argument(format!("extent must be positive, got {:?}", self.extent)));
        }
        if !(self.density > 0.0) {
            return Err(Error::Argument(format!("density must be positive, got {}", self.density)));
        }
        if self.walls > 4 {
            return Err(Error::Argument(format!("at most 4 walls, got {}", self.walls)));
        }
        if self.context_coupling && (self.extent[0] < 2.0 || self.extent[1] < 2.0) {
            return Err(Error::Argument("context coupling needs a room of at least 2 x 2 m".into()));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        let names: &[&str] = if self.context_coupling { &COUPLED_CLASSES } else { &PLAIN_CLASSES };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let mut r = SceneRecipe::default();
        if let Some(v) = kv.take("seed")? {
            r.seed = v;
        }
        if let Some(v) = kv.take_list::<f64>("extent")? {
            r.extent = v
                .try_into()
                .map_err(|_| Error::Config("extent needs three values".into()))?;
        }
        if let Some(v) = kv.take_bool("floor")? {
            r.floor = v;
        }
        if let Some(v) = kv.take_bool("ceiling")? {
            r.ceiling = v;
        }
        if let Some(v) = kv.take("walls")? {
            r.walls = v;
        }
        if let Some(v) = kv.take("boxes")? {
            r.boxes = v;
        }
        if let Some(v) = kv.take("poles")? {
            r.poles = v;
        }
        if let Some(v) = kv.take("density")? {
            r.density = v;
        }
        if let Some(v) = kv.take_bool("context_coupling")? {
            r.context_coupling = v;
        }
        if let Some(v) = kv.take_bool("color")? {
            r.color = v;
        }
        kv.finish()?;
        r.validate()?;
        Ok(r)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "seed = {}\nextent = {}\nfloor = {}\nceiling = {}\nwalls = {}\nboxes = {}\npoles = {}\ndensity = {}\ncontext_coupling = {}\ncolor = {}\n",
            self.seed,
            format_list(&self.extent),
            self.floor,
            self.ceiling,
            self.walls,
            self.boxes,
            self.poles,
            self.density,
            self.context_coupling,
            self.color
        )
    }
}

struct Builder {
    rng: ChaCha8Rng,
    density: f64,
    positions: Vec<[f32; 3]>,
    colors: Vec<[u8; 3]>,
    labels: Vec<usize>,
}

fn base_color(class: usize, coupled: bool) -> [u8; 3] {
    match (coupled, class) {
        (_, FLOOR) => [120, 100, 80],
        (_, CEILING) => [230, 230, 225],
        (_, WALL) => [200, 190, 160],
        (false, FURNITURE) | (true, BOX_A) | (true, BOX_B) => [150, 90, 40],
        (false, POLE) => [90, 90, 100],
        (true, MARKER_A) => [200, 40, 40],
        (true, MARKER_B) => [40, 60, 200],
        _ => [128, 128, 128],
    }
}

impl Builder {
    fn count(&mut self, area: f64) -> usize {
        let lambda = area * self.density;
        if lambda <= 0.0 {
            return 0;
        }
        Poisson::new(lambda).map(|p| p.sample(&mut self.rng) as usize).unwrap_or(0)
    }

    fn push(&mut self, p: [f64; 3], class: usize, base: [u8; 3]) {
        let jitter = |c: u8, r: &mut ChaCha8Rng| (c as i32 + r.gen_range(-12..=12)).clamp(0, 255) as u8;
        let color = [jitter(base[0], &mut self.rng), jitter(base[1], &mut self.rng), jitter(base[2], &mut self.rng)];
        self.positions.push([p[0] as f32, p[1] as f32, p[2] as f32]);
        self.colors.push(color);
        self.labels.push(class);
    }

    /// Rectangle spanned by `origin + s*u + t*v`, `s, t` in `[0, 1]`.
    fn rect(&mut self, origin: [f64; 3], u: [f64; 3], v: [f64; 3], class: usize, base: [u8; 3]) {
        let len = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let n = self.count(len(u) * len(v));
        for _ in 0..n {
            let s: f64 = self.rng.gen();
            let t: f64 = self.rng.gen();
            let p = [0, 1, 2].map(|a| origin[a] + s * u[a] + t * v[a]);
            self.push(p, class, base);
        }
    }

    /// Four vertical sides and the top of an axis-aligned box standing on the floor.
    fn cuboid(&mut self, c: [f64; 2], half: [f64; 2], height: f64, class: usize, base: [u8; 3]) {
        let (x0, x1, y0, y1) = (c[0] - half[0], c[0] + half[0], c[1] - half[1], c[1] + half[1]);
        let up = [0.0, 0.0, height];
        self.rect([x0, y0, 0.0], [0.0, y1 - y0, 0.0], up, class, base);
        self.rect([x1, y0, 0.0], [0.0, y1 - y0, 0.0], up, class, base);
        self.rect([x0, y0, 0.0], [x1 - x0, 0.0, 0.0], up, class, base);
        self.rect([x0, y1, 0.0], [x1 - x0, 0.0, 0.0], up, class, base);
        self.rect([x0, y0, height], [x1 - x0, 0.0, 0.0], [0.0, y1 - y0, 0.0], class, base);
    }

    fn cylinder(&mut self, c: [f64; 2], radius: f64, height: f64, class: usize, base: [u8; 3]) {
        let n = self.count(2.0 * std::f64::consts::PI * radius * height);
        for _ in 0..n {
            let a = self.rng.gen_range(0.0..std::f64::consts::TAU);
            let z = self.rng.gen_range(0.0..height);
            self.push([c[0] + radius * a.cos(), c[1] + radius * a.sin(), z], class, base);
        }
    }

    fn sphere(&mut self, c: [f64; 3], radius: f64, class: usize, base: [u8; 3]) {
        let n = self.count(4.0 * std::f64::consts::PI * radius * radius);
        for _ in 0..n {
            let d: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(&mut self.rng));
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-12);
            self.push([0, 1, 2].map(|a| c[a] + radius * d[a] / norm), class, base);
        }
    }
}

/// Generates a labeled room; deterministic in `recipe.seed`.
///
/// Layout decisions and surface sampling draw from separate streams, so a
/// change of density alone keeps the same furniture placement.
pub fn synth_scene(recipe: &SceneRecipe) -> Result<LabeledPointCloud> {
    recipe.validate()?;
    let mut layout = ChaCha8Rng::seed_from_u64(recipe.seed);
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(recipe.seed ^ 0x9e37_79b9_7f4a_7c15),
        density: recipe.density,
        positions: Vec::new(),
        colors: Vec::new(),
        labels: Vec::new(),
    };
    let coupled = recipe.context_coupling;
    let [w, l, h] = recipe.extent;

    if recipe.floor {
        b.rect([0.0; 3], [w, 0.0, 0.0], [0.0, l, 0.0], FLOOR, base_color(FLOOR, coupled));
    }
    if recipe.ceiling {
        b.rect([0.0, 0.0, h], [w, 0.0, 0.0], [0.0, l, 0.0], CEILING, base_color(CEILING, coupled));
    }
    let walls = [
        ([0.0, 0.0, 0.0], [0.0, l, 0.0]),
        ([w, 0.0, 0.0], [0.0, l, 0.0]),
        ([0.0, 0.0, 0.0], [w, 0.0, 0.0]),
        ([0.0, l, 0.0], [w, 0.0, 0.0]),
    ];
    for (origin, u) in walls.iter().take(recipe.walls) {
        b.rect(*origin, *u, [0.0, 0.0, h], WALL, base_color(WALL, coupled));
    }

    if coupled {
        place_coupled(recipe, &mut layout, &mut b);
    } else {
        for _ in 0..recipe.boxes {
            let half = [layout.gen_range(0.15..0.4), layout.gen_range(0.15..0.4)];
            let height = layout.gen_range(0.4..1.0f64).min(h);
            let c = [
                layout.gen_range(half[0] + 0.05..(w - half[0] - 0.05).max(half[0] + 0.06)),
                layout.gen_range(half[1] + 0.05..(l - half[1] - 0.05).max(half[1] + 0.06)),
            ];
            b.cuboid(c, half, height, FURNITURE, base_color(FURNITURE, false));
        }
        for _ in 0..recipe.poles {
            let r = layout.gen_range(0.05..0.1);
            let c = [layout.gen_range(0.2..(w - 0.2).max(0.21)), layout.gen_range(0.2..(l - 0.2).max(0.21))];
            b.cylinder(c, r, h, POLE, base_color(POLE, false));
        }
    }

    let colors = recipe.color.then_some(b.colors);
    LabeledPointCloud::new(b.positions, colors, b.labels, recipe.class_names())
}

fn place_coupled(recipe: &SceneRecipe, layout: &mut ChaCha8Rng, b: &mut Builder) {
    let nx = recipe.extent[0].floor() as usize / 2;
    let ny = recipe.extent[1].floor() as usize / 2;
    let tiles = nx * ny;
    // odd tile counts alternate the surplus class with the seed parity
    let n_a = if tiles % 2 == 1 && recipe.seed % 2 == 1 { tiles / 2 } else { tiles.div_ceil(2) };
    let mut kinds: Vec<bool> = (0..tiles).map(|i| i < n_a).collect();
    kinds.shuffle(layout);
    let box_color = base_color(BOX_A, true);
    for (t, &is_a) in kinds.iter().enumerate() {
        let (tx, ty) = (2 * (t % nx), 2 * (t / nx));
        let col = layout.gen_range(0..2usize);
        let row = layout.gen_range(0..2usize);
        let cell = [(tx + col) as f64 + 0.5, (ty + row) as f64 + 0.5];
        // the marker sits in the other column of the same row
        let dir = if col == 0 { 1.0 } else { -1.0 };

        let half = [layout.gen_range(0.2..0.3), layout.gen_range(0.2..0.3)];
        let height = layout.gen_range(0.5..0.9);
        let c = [cell[0] + layout.gen_range(-0.1..0.1), cell[1] + layout.gen_range(-0.1..0.1)];
        b.cuboid(c, half, height, if is_a { BOX_A } else { BOX_B }, box_color);

        let mx = cell[0] + dir * layout.gen_range(0.8..0.9);
        let my = cell[1] + layout.gen_range(-0.15..0.15);
        if is_a {
            b.cylinder([mx, my], 0.1, 1.5, MARKER_A, base_color(MARKER_A, true));
        } else {
            b.sphere([mx, my, 0.25], 0.25, MARKER_B, base_color(MARKER_B, true));
        }
    }
}
