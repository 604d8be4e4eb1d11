use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::traffic_sim::SimState;

pub const BACKGROUND: u8 = 0;
pub const ROAD: u8 = 80;
pub const MARKING: u8 = 160;
pub const VEHICLE: u8 = 200;
pub const EGO: u8 = 255;

/// Single-channel intensity grid, row-major. Rows run across the road (row 0
/// is the Lane-1 side), columns run along it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl ImageFrame {
    pub fn blank(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![BACKGROUND; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self, value: u8) -> usize {
        self.data.iter().filter(|&&v| v == value).count()
    }

    /// Binary PPM (P6); the gray level is replicated into R, G and B.
    pub fn write_ppm<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut rgb = Vec::with_capacity(self.data.len() * 3);
        for &v in &self.data {
            rgb.extend_from_slice(&[v, v, v]);
        }
        out.write_all(&rgb)
    }
}

/// Orthographic top-down window. `center_x = None` centers it on the merge point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub center_x: Option<f64>,
    pub half_length: f64,
    pub center_y: f64,
    pub half_width: f64,
    pub width_px: usize,
    pub height_px: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            center_x: None,
            half_length: 50.0,
            center_y: 0.0,
            half_width: 12.0,
            width_px: 84,
            height_px: 84,
        }
    }
}

impl WindowConfig {
    pub fn meters_per_px_x(&self) -> f64 {
        2.0 * self.half_length / self.width_px as f64
    }

    pub fn meters_per_px_y(&self) -> f64 {
        2.0 * self.half_width / self.height_px as f64
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(crate::Error::config("image dimensions must be positive"));
        }
        if !(self.half_length > 0.0 && self.half_width > 0.0) {
            return Err(crate::Error::config("window extents must be positive"));
        }
        Ok(())
    }
}

struct Raster<'a> {
    frame: &'a mut ImageFrame,
    x0: f64,
    y_top: f64,
    mx: f64,
    my: f64,
}

impl Raster<'_> {
    fn col_center(&self, c: usize) -> f64 {
        self.x0 + (c as f64 + 0.5) * self.mx
    }

    fn row_center(&self, r: usize) -> f64 {
        self.y_top - (r as f64 + 0.5) * self.my
    }

    /// Fills pixels whose centers fall in `[x_lo, x_hi) x [y_lo, y_hi)`.
    fn fill_rect(&mut self, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, value: u8) {
        for r in 0..self.frame.height {
            let y = self.row_center(r);
            if y < y_lo || y >= y_hi {
                continue;
            }
            for c in 0..self.frame.width {
                let x = self.col_center(c);
                if x >= x_lo && x < x_hi {
                    self.frame.set(r, c, value);
                }
            }
        }
    }

    /// One-pixel line at lateral coordinate `y` over `[x_lo, x_hi)`.
    fn hline(&mut self, x_lo: f64, x_hi: f64, y: f64, value: u8) {
        let row = ((self.y_top - y) / self.my).floor();
        if row < 0.0 || row >= self.frame.height as f64 {
            return;
        }
        let r = row as usize;
        for c in 0..self.frame.width {
            let x = self.col_center(c);
            if x >= x_lo && x < x_hi {
                self.frame.set(r, c, value);
            }
        }
    }
}

/// Renders road surface, lane markings and vehicles into a fresh frame.
/// Pure function of the simulation state and the window.
pub fn rasterize(sim: &SimState, window: &WindowConfig) -> ImageFrame {
    let topo = sim.topology();
    let mut frame = ImageFrame::blank(window.width_px, window.height_px);
    let center_x = window.center_x.unwrap_or(topo.merge_start);
    let mut raster = Raster {
        frame: &mut frame,
        x0: center_x - window.half_length,
        y_top: window.center_y + window.half_width,
        mx: window.meters_per_px_x(),
        my: window.meters_per_px_y(),
    };
    let lw = topo.lane_width;
    let end = topo.road_end();

    raster.fill_rect(0.0, end, -lw / 2.0, 1.5 * lw, ROAD);
    raster.fill_rect(topo.ramp_entry, topo.merge_end, -1.5 * lw, -lw / 2.0, ROAD);

    raster.hline(0.0, end, 1.5 * lw, MARKING);
    raster.hline(0.0, end, lw / 2.0, MARKING);
    raster.hline(0.0, topo.merge_start, -lw / 2.0, MARKING);
    raster.hline(topo.merge_end, end, -lw / 2.0, MARKING);
    raster.hline(topo.ramp_entry, topo.merge_end, -1.5 * lw, MARKING);

    let half_w = sim.config().vehicle_width / 2.0;
    for v in sim.background() {
        let y = sim.global_y(v);
        raster.fill_rect(v.rear(), v.pos, y - half_w, y + half_w, VEHICLE);
    }
    if let Some(ego) = sim.ego() {
        let y = sim.global_y(ego);
        raster.fill_rect(ego.rear(), ego.pos, y - half_w, y + half_w, EGO);
    }
    frame
}
