//! Agent-centric BEV map rasterization.
//!
//! Renders a sample's vector map into an RGB raster for the map encoder and
//! produces the boolean drivable mask used by the off-road metric. Both go
//! through the same polygon fill, so they agree exactly.
//!
//! Pixel mapping: `col = anchor_col + round(x / resolution)`,
//! `row = anchor_row - round(y / resolution)`; x points forward (more
//! columns), y points left (fewer rows). A polygon covers a pixel iff the
//! pixel center lies inside it; centers exactly on an edge count as inside.

use std::path::Path;

use thiserror::Error;

use crate::scene::{Point2, Sample};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid raster config: {0}")]
    InvalidConfig(String),
    #[error("non-finite map vertex in {0}")]
    NonFiniteVertex(String),
    #[error("image io: {0}")]
    Image(String),
}

pub type Rgb = [u8; 3];

/// Raster geometry and layer palette.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RasterConfig {
    pub height_px: usize,
    pub width_px: usize,
    /// Meters per pixel.
    pub resolution: f64,
    /// Pixel of the target agent (row, col).
    pub anchor_row: usize,
    pub anchor_col: usize,
    pub background: Rgb,
    pub drivable: Rgb,
    pub sidewalk: Rgb,
    pub crosswalk: Rgb,
    pub lane_tail: Rgb,
    pub lane_head: Rgb,
    pub target_agent: Rgb,
    pub neighbor_agent: Rgb,
    /// Draw agent footprint boxes on top of the static layers.
    pub draw_agents: bool,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            height_px: 240,
            width_px: 240,
            resolution: 0.5,
            anchor_row: 120,
            anchor_col: 60,
            background: [0, 0, 0],
            drivable: [75, 75, 75],
            sidewalk: [150, 150, 150],
            crosswalk: [255, 255, 255],
            lane_tail: [40, 40, 255],
            lane_head: [40, 255, 255],
            target_agent: [250, 150, 50],
            neighbor_agent: [60, 180, 250],
            draw_agents: false,
        }
    }
}

impl RasterConfig {
    pub fn validate(&self) -> Result<(), RasterError> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(RasterError::InvalidConfig(format!(
                "resolution {}",
                self.resolution
            )));
        }
        if self.height_px == 0 || self.width_px == 0 {
            return Err(RasterError::InvalidConfig("zero raster dimension".into()));
        }
        if self.anchor_row >= self.height_px || self.anchor_col >= self.width_px {
            return Err(RasterError::InvalidConfig("anchor outside image".into()));
        }
        Ok(())
    }

    /// Maps a point in the target frame to its pixel, if inside the window.
    pub fn point_to_pixel(&self, p: Point2) -> Option<(usize, usize)> {
        if !p.is_finite() {
            return None;
        }
        let col = self.anchor_col as f64 + (p.x / self.resolution).round();
        let row = self.anchor_row as f64 - (p.y / self.resolution).round();
        if col < 0.0 || row < 0.0 || col >= self.width_px as f64 || row >= self.height_px as f64 {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }

    /// Continuous coordinates of a pixel center in the target frame.
    pub fn pixel_center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            (col as f64 - self.anchor_col as f64) * self.resolution,
            (self.anchor_row as f64 - row as f64) * self.resolution,
        )
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl RasterImage {
    pub fn filled(height: usize, width: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&color);
        }
        RasterImage {
            height,
            width,
            data,
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> Rgb {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, color: Rgb) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// Lossless PNG export for debugging.
    pub fn save_png<P: AsRef<Path>>(&self, path: P) -> Result<(), RasterError> {
        let buf: image::RgbImage =
            image::ImageBuffer::from_raw(self.width as u32, self.height as u32, self.data.clone())
                .expect("raster buffer matches dimensions");
        buf.save_with_format(path.as_ref(), image::ImageFormat::Png)
            .map_err(|e| RasterError::Image(e.to_string()))
    }
}

/// Boundary-inclusive point-in-polygon (even-odd rule).
fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        // center exactly on the edge counts as inside
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
        {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if xi > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Marks every pixel whose center lies in the polygon. Shared by the color
/// raster and the drivable mask so the two can never disagree.
fn fill_polygon(poly: &[Point2], cfg: &RasterConfig, mut mark: impl FnMut(usize, usize)) {
    if poly.len() < 3 {
        return;
    }
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    // conservative pixel bbox, one pixel of slack
    let col_lo =
        (((min_x / cfg.resolution) + cfg.anchor_col as f64).floor() - 1.0).max(0.0) as usize;
    let col_hi = ((((max_x / cfg.resolution) + cfg.anchor_col as f64).ceil() + 1.0)
        .min(cfg.width_px as f64 - 1.0))
    .max(0.0) as usize;
    let row_lo =
        ((cfg.anchor_row as f64 - (max_y / cfg.resolution)).floor() - 1.0).max(0.0) as usize;
    let row_hi = (((cfg.anchor_row as f64 - (min_y / cfg.resolution)).ceil() + 1.0)
        .min(cfg.height_px as f64 - 1.0))
    .max(0.0) as usize;
    if col_lo > col_hi || row_lo > row_hi {
        return;
    }
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            if point_in_polygon(cfg.pixel_center(row, col), poly) {
                mark(row, col);
            }
        }
    }
}

fn check_finite(name: &str, polys: &[Vec<Point2>]) -> Result<(), RasterError> {
    for poly in polys {
        if poly.iter().any(|p| !p.is_finite()) {
            return Err(RasterError::NonFiniteVertex(name.to_string()));
        }
    }
    Ok(())
}

fn lerp_color(a: Rgb, b: Rgb, t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    [
        (a[0] as f64 + (b[0] as f64 - a[0] as f64) * t).round() as u8,
        (a[1] as f64 + (b[1] as f64 - a[1] as f64) * t).round() as u8,
        (a[2] as f64 + (b[2] as f64 - a[2] as f64) * t).round() as u8,
    ]
}

/// Draws a directed polyline with per-vertex color interpolation from the
/// tail color to the head color, encoding the direction of travel.
fn draw_polyline(line: &[Point2], cfg: &RasterConfig, img: &mut RasterImage) {
    if line.len() < 2 {
        return;
    }
    let total: f64 = line.windows(2).map(|w| w[0].dist(&w[1])).sum();
    if total <= 0.0 {
        return;
    }
    let step = cfg.resolution / 4.0;
    let mut acc = 0.0;
    for w in line.windows(2) {
        let seg = w[0].dist(&w[1]);
        if seg == 0.0 {
            continue;
        }
        let n = (seg / step).ceil() as usize;
        for k in 0..=n {
            let f = k as f64 / n as f64;
            let p = Point2::new(
                w[0].x + f * (w[1].x - w[0].x),
                w[0].y + f * (w[1].y - w[0].y),
            );
            if let Some((row, col)) = cfg.point_to_pixel(p) {
                img.set_pixel(
                    row,
                    col,
                    lerp_color(cfg.lane_tail, cfg.lane_head, (acc + f * seg) / total),
                );
            }
        }
        acc += seg;
    }
}

/// Draws a constant-color trajectory polyline over an existing raster; points
/// outside the window are clipped silently. Waypoints get a small square so
/// they stay visible over the line.
pub fn draw_path(img: &mut RasterImage, pts: &[Point2], cfg: &RasterConfig, color: Rgb) {
    if pts.is_empty() {
        return;
    }
    let step = cfg.resolution / 4.0;
    for w in pts.windows(2) {
        let seg = w[0].dist(&w[1]);
        let n = (seg / step).ceil().max(1.0) as usize;
        for k in 0..=n {
            let f = k as f64 / n as f64;
            let p = Point2::new(
                w[0].x + f * (w[1].x - w[0].x),
                w[0].y + f * (w[1].y - w[0].y),
            );
            if let Some((row, col)) = cfg.point_to_pixel(p) {
                img.set_pixel(row, col, color);
            }
        }
    }
    for p in pts {
        if let Some((row, col)) = cfg.point_to_pixel(*p) {
            for dr in row.saturating_sub(1)..(row + 2).min(cfg.height_px) {
                for dc in col.saturating_sub(1)..(col + 2).min(cfg.width_px) {
                    img.set_pixel(dr, dc, color);
                }
            }
        }
    }
}

fn oriented_box(center: Point2, heading: f64, length: f64, width: f64) -> Vec<Point2> {
    let (s, c) = heading.sin_cos();
    let hl = length / 2.0;
    let hw = width / 2.0;
    [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)]
        .iter()
        .map(|(lx, ly)| Point2::new(center.x + c * lx - s * ly, center.y + s * lx + c * ly))
        .collect()
}

/// Renders the static map layers (background, drivable, sidewalk, crosswalk,
/// lane) back to front. The sample must already be in the target frame.
pub fn rasterize(sample: &Sample, cfg: &RasterConfig) -> Result<RasterImage, RasterError> {
    cfg.validate()?;
    let map = &sample.map;
    check_finite("drivable_polygons", &map.drivable_polygons)?;
    check_finite("sidewalks", &map.sidewalks)?;
    check_finite("crosswalks", &map.crosswalks)?;
    check_finite("lane_centerlines", &map.lane_centerlines)?;

    let mut img = RasterImage::filled(cfg.height_px, cfg.width_px, cfg.background);
    for poly in &map.drivable_polygons {
        fill_polygon(poly, cfg, |r, c| img.set_pixel(r, c, cfg.drivable));
    }
    for poly in &map.sidewalks {
        fill_polygon(poly, cfg, |r, c| img.set_pixel(r, c, cfg.sidewalk));
    }
    for poly in &map.crosswalks {
        fill_polygon(poly, cfg, |r, c| img.set_pixel(r, c, cfg.crosswalk));
    }
    for line in &map.lane_centerlines {
        draw_polyline(line, cfg, &mut img);
    }

    if cfg.draw_agents {
        for n in &sample.neighbors {
            if let Some(st) = n.current_state() {
                let b = oriented_box(
                    Point2::new(st.x, st.y),
                    st.heading,
                    n.info.length,
                    n.info.width,
                );
                fill_polygon(&b, cfg, |r, c| img.set_pixel(r, c, cfg.neighbor_agent));
            }
        }
        if let Some(st) = sample.target.current_state() {
            let b = oriented_box(
                Point2::new(st.x, st.y),
                st.heading,
                sample.target.info.length,
                sample.target.info.width,
            );
            fill_polygon(&b, cfg, |r, c| img.set_pixel(r, c, cfg.target_agent));
        }
    }
    Ok(img)
}

/// True exactly where the pixel center lies inside any drivable polygon.
pub fn drivable_mask(sample: &Sample, cfg: &RasterConfig) -> Result<Vec<bool>, RasterError> {
    cfg.validate()?;
    check_finite("drivable_polygons", &sample.map.drivable_polygons)?;
    let mut mask = vec![false; cfg.height_px * cfg.width_px];
    let width = cfg.width_px;
    for poly in &sample.map.drivable_polygons {
        fill_polygon(poly, cfg, |r, c| mask[r * width + c] = true);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::to_target_frame;
    use crate::synth::{generate_scenario, ScenarioKind, ScenarioSpec, VectorMap};

    fn empty_sample() -> Sample {
        let spec = ScenarioSpec {
            kind: ScenarioKind::Straight,
            target_speed: 5.0,
            n_neighbors: 0,
            noise_std: 0.0,
            seed: 1,
        };
        let mut s = to_target_frame(&generate_scenario(&spec)).unwrap();
        s.map = VectorMap::default();
        s
    }

    #[test]
    fn empty_map_is_uniform_background() {
        let cfg = RasterConfig::default();
        let img = rasterize(&empty_sample(), &cfg).unwrap();
        assert!(img.data.chunks(3).all(|c| c == cfg.background));
        let mask = drivable_mask(&empty_sample(), &cfg).unwrap();
        assert!(mask.iter().all(|m| !m));
    }

    #[test]
    fn full_window_polygon_paints_everything() {
        let cfg = RasterConfig::default();
        let mut s = empty_sample();
        s.map.drivable_polygons.push(vec![
            Point2::new(-200.0, -200.0),
            Point2::new(200.0, -200.0),
            Point2::new(200.0, 200.0),
            Point2::new(-200.0, 200.0),
        ]);
        let img = rasterize(&s, &cfg).unwrap();
        assert!(img.data.chunks(3).all(|c| c == cfg.drivable));
        let mask = drivable_mask(&s, &cfg).unwrap();
        assert!(mask.iter().all(|m| *m));
    }

    #[test]
    fn lane_along_x_axis_hits_anchor_row() {
        let cfg = RasterConfig::default();
        let mut s = empty_sample();
        s.map
            .lane_centerlines
            .push(vec![Point2::new(0.0, 0.0), Point2::new(30.0, 0.0)]);
        let img = rasterize(&s, &cfg).unwrap();
        // (10, 0) -> row 120, col 60 + 10/0.5 = 80
        assert_eq!(cfg.point_to_pixel(Point2::new(10.0, 0.0)), Some((120, 80)));
        for col in 60..=120 {
            assert_ne!(img.pixel(120, col), cfg.background, "col {col} unpainted");
        }
        assert_eq!(img.pixel(120, 59), cfg.background);
    }

    #[test]
    fn half_plane_mask_splits_at_anchor_col() {
        let cfg = RasterConfig::default();
        let mut s = empty_sample();
        s.map.drivable_polygons.push(vec![
            Point2::new(0.0, -1000.0),
            Point2::new(1000.0, -1000.0),
            Point2::new(1000.0, 1000.0),
            Point2::new(0.0, 1000.0),
        ]);
        let mask = drivable_mask(&s, &cfg).unwrap();
        for row in 0..cfg.height_px {
            for col in 0..cfg.width_px {
                let expect = col >= 60;
                assert_eq!(
                    mask[row * cfg.width_px + col],
                    expect,
                    "row {row} col {col}"
                );
            }
        }
    }

    #[test]
    fn mask_equals_thresholded_drivable_raster() {
        let cfg = RasterConfig::default();
        for seed in 0..10u64 {
            let spec = ScenarioSpec {
                kind: ScenarioKind::ALL[seed as usize % 5],
                target_speed: 7.0,
                n_neighbors: 0,
                noise_std: 0.0,
                seed,
            };
            let mut s = to_target_frame(&generate_scenario(&spec)).unwrap();
            // keep only the drivable layer, then threshold the rendered image
            s.map.lane_centerlines.clear();
            s.map.sidewalks.clear();
            s.map.crosswalks.clear();
            let img = rasterize(&s, &cfg).unwrap();
            let mask = drivable_mask(&s, &cfg).unwrap();
            for row in 0..cfg.height_px {
                for col in 0..cfg.width_px {
                    let painted = img.pixel(row, col) == cfg.drivable;
                    assert_eq!(
                        painted,
                        mask[row * cfg.width_px + col],
                        "seed {seed} ({row},{col})"
                    );
                }
            }
        }
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = RasterConfig::default();
        let spec = ScenarioSpec {
            kind: ScenarioKind::LeftTurn,
            target_speed: 8.0,
            n_neighbors: 2,
            noise_std: 0.05,
            seed: 77,
        };
        let s = to_target_frame(&generate_scenario(&spec)).unwrap();
        let a = rasterize(&s, &cfg).unwrap();
        let b = rasterize(&s, &cfg).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn agent_boxes_drawn_when_enabled() {
        let cfg = RasterConfig {
            draw_agents: true,
            ..RasterConfig::default()
        };
        let spec = ScenarioSpec {
            kind: ScenarioKind::Straight,
            target_speed: 6.0,
            n_neighbors: 1,
            noise_std: 0.0,
            seed: 12,
        };
        let s = to_target_frame(&generate_scenario(&spec)).unwrap();
        let img = rasterize(&s, &cfg).unwrap();
        // target box covers the anchor pixel
        assert_eq!(img.pixel(cfg.anchor_row, cfg.anchor_col), cfg.target_agent);
        let off = rasterize(&s, &RasterConfig::default()).unwrap();
        assert_ne!(off.pixel(cfg.anchor_row, cfg.anchor_col), cfg.target_agent);
    }

    #[test]
    fn non_finite_vertex_rejected() {
        let cfg = RasterConfig::default();
        let mut s = empty_sample();
        s.map.drivable_polygons.push(vec![
            Point2::new(f64::NAN, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
        ]);
        assert!(matches!(
            rasterize(&s, &cfg),
            Err(RasterError::NonFiniteVertex(_))
        ));
    }

    #[test]
    fn global_se2_invariance() {
        use crate::scene::{wrap_angle, AgentState};
        let cfg = RasterConfig::default();
        let mut worst = 0.0f64;
        for seed in 0..20u64 {
            let spec = ScenarioSpec {
                kind: ScenarioKind::ALL[seed as usize % 5],
                target_speed: 6.5,
                n_neighbors: 2,
                noise_std: 0.0,
                seed: 1000 + seed,
            };
            let raw = generate_scenario(&spec);
            let base = rasterize(&to_target_frame(&raw).unwrap(), &cfg).unwrap();

            // rigid transform of the whole raw scene
            let ang = 0.7 + seed as f64 * 0.31;
            let (sn, cs) = ang.sin_cos();
            let (tx, ty) = (13.5 - seed as f64, -7.25 + seed as f64 * 0.5);
            let mv = |p: Point2| Point2::new(cs * p.x - sn * p.y + tx, sn * p.x + cs * p.y + ty);
            let mv_state = |st: &AgentState| {
                let p = mv(Point2::new(st.x, st.y));
                AgentState {
                    x: p.x,
                    y: p.y,
                    heading: wrap_angle(st.heading + ang),
                    ..*st
                }
            };
            let mut moved = raw.clone();
            moved.target.states = raw.target.states.iter().map(mv_state).collect();
            for (nb, orig) in moved.neighbors.iter_mut().zip(raw.neighbors.iter()) {
                nb.states = orig.states.iter().map(mv_state).collect();
            }
            moved.future = raw.future.iter().map(|p| mv(*p)).collect();
            moved.map = raw.map.map_points(mv);

            let other = rasterize(&to_target_frame(&moved).unwrap(), &cfg).unwrap();
            let diff = base
                .data
                .chunks(3)
                .zip(other.data.chunks(3))
                .filter(|(a, b)| a != b)
                .count();
            let frac = diff as f64 / (cfg.height_px * cfg.width_px) as f64;
            worst = worst.max(frac);
            assert!(frac <= 0.01, "seed {seed}: {frac} of pixels differ");
        }
        // Aliasing should be far below the budget in practice.
        assert!(worst <= 0.01);
    }
}
