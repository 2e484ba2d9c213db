//! Minimal raster plots: Poincaré scatter panels and filled contour maps.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::diagnostics::ContourGrid;
use crate::dynamics::TrajectoryRecord;
use crate::{Error, Result};

const PANEL: u32 = 560;
const MARGIN: u32 = 20;
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GREY: Rgb<u8> = Rgb([150, 150, 150]);
const RED: Rgb<u8> = Rgb([200, 30, 30]);

/// Data rectangle mapped onto one panel.
#[derive(Debug, Clone, Copy)]
pub struct View {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl View {
    /// Both barrier images `x₀ − 2π` and `x₀` with margin, one period in `y`.
    pub fn around_barrier(x0: f64) -> Self {
        Self {
            x_min: x0 - TAU - PI,
            x_max: x0 + PI / 2.0,
            y_min: 0.0,
            y_max: TAU,
        }
    }

    fn to_pixel(self, x: f64, y: f64, origin: u32) -> Option<(u32, u32)> {
        let u = (x - self.x_min) / (self.x_max - self.x_min);
        let v = (y - self.y_min) / (self.y_max - self.y_min);
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return None;
        }
        let px = origin + MARGIN + (u * (PANEL - 1) as f64).round() as u32;
        let py = MARGIN + ((1.0 - v) * (PANEL - 1) as f64).round() as u32;
        Some((px, py))
    }
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("writing {}: {e}", path.display()))))
}

fn canvas(panels: u32) -> RgbImage {
    let w = panels * (PANEL + 2 * MARGIN);
    RgbImage::from_pixel(w, PANEL + 2 * MARGIN, WHITE)
}

fn panel_origin(i: u32) -> u32 {
    i * (PANEL + 2 * MARGIN)
}

fn frame(img: &mut RgbImage, origin: u32) {
    let (x0, y0) = (origin + MARGIN - 1, MARGIN - 1);
    let (x1, y1) = (origin + MARGIN + PANEL, MARGIN + PANEL);
    for x in x0..=x1 {
        img.put_pixel(x, y0, BLACK);
        img.put_pixel(x, y1, BLACK);
    }
    for y in y0..=y1 {
        img.put_pixel(x0, y, BLACK);
        img.put_pixel(x1, y, BLACK);
    }
}

fn vertical_line(img: &mut RgbImage, view: &View, origin: u32, x: f64, colour: Rgb<u8>) {
    if let (Some((px, _)), true) = (view.to_pixel(x, view.y_min, origin), x <= view.x_max) {
        for py in MARGIN..MARGIN + PANEL {
            if (py / 6) % 2 == 0 {
                img.put_pixel(px, py, colour);
                img.put_pixel(px + 1, py, colour);
            }
        }
    }
}

fn dot(img: &mut RgbImage, px: u32, py: u32, colour: Rgb<u8>) {
    img.put_pixel(px, py, colour);
    img.put_pixel(px + 1, py, colour);
    img.put_pixel(px, py + 1, colour);
    img.put_pixel(px + 1, py + 1, colour);
}

/// A scatter panel: one entry per trajectory set, with dashed markers at the
/// barrier and its periodic image.
pub struct ScatterPanel<'a> {
    pub trajectories: &'a [TrajectoryRecord],
    pub barriers: &'a [f64],
}

/// Poincaré sections side by side, `x` horizontal, `y` (wrapped) vertical.
pub fn write_scatter(path: &Path, view: View, panels: &[ScatterPanel<'_>]) -> Result<()> {
    let mut img = canvas(panels.len() as u32);
    for (i, panel) in panels.iter().enumerate() {
        let origin = panel_origin(i as u32);
        frame(&mut img, origin);
        for (id, rec) in panel.trajectories.iter().enumerate() {
            let shade = (40 + (id * 37) % 140) as u8;
            let colour = Rgb([shade / 3, shade / 2, shade]);
            for p in &rec.poincare_points {
                if let Some((px, py)) = view.to_pixel(p.x, p.y.rem_euclid(TAU), origin) {
                    dot(&mut img, px, py, colour);
                }
            }
        }
        for &b in panel.barriers {
            vertical_line(&mut img, &view, origin, b, RED);
        }
    }
    save(&img, path)
}

// Diverging blue-white-red map on [−1, 1].
fn diverging(s: f64) -> Rgb<u8> {
    let s = s.clamp(-1.0, 1.0);
    let (r, g, b) = if s < 0.0 {
        let a = -s;
        (1.0 - 0.8 * a, 1.0 - 0.7 * a, 1.0)
    } else {
        (1.0, 1.0 - 0.7 * s, 1.0 - 0.8 * s)
    };
    Rgb([(255.0 * r) as u8, (255.0 * g) as u8, (255.0 * b) as u8])
}

/// Filled contour maps side by side; each panel shares one colour scale and
/// draws `levels` isolines.
pub fn write_contours(path: &Path, grids: &[&ContourGrid], levels: usize) -> Result<()> {
    let scale = grids
        .iter()
        .flat_map(|g| g.values.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let step = 2.0 * scale / (levels + 1) as f64;
    let band = |v: f64| ((v + scale) / step).floor() as i64;
    let mut img = canvas(grids.len() as u32);
    for (i, grid) in grids.iter().enumerate() {
        let origin = panel_origin(i as u32);
        // Bilinear lookup, then isolines where the band index changes.
        let sample = |px: u32, py: u32| -> f64 {
            let u = px as f64 / (PANEL - 1) as f64 * (grid.nx - 1) as f64;
            let v = (1.0 - py as f64 / (PANEL - 1) as f64) * (grid.ny - 1) as f64;
            let (i, j) = (
                (u as usize).min(grid.nx.saturating_sub(2)),
                (v as usize).min(grid.ny.saturating_sub(2)),
            );
            let (i1, j1) = ((i + 1).min(grid.nx - 1), (j + 1).min(grid.ny - 1));
            let (a, b) = ((u - i as f64).clamp(0.0, 1.0), (v - j as f64).clamp(0.0, 1.0));
            let lo = grid.get(i, j) * (1.0 - a) + grid.get(i1, j) * a;
            let hi = grid.get(i, j1) * (1.0 - a) + grid.get(i1, j1) * a;
            lo * (1.0 - b) + hi * b
        };
        for py in 0..PANEL {
            for px in 0..PANEL {
                let v = sample(px, py);
                let mut colour = diverging(v / scale);
                let b = band(v);
                if (px + 1 < PANEL && band(sample(px + 1, py)) != b)
                    || (py + 1 < PANEL && band(sample(px, py + 1)) != b)
                {
                    colour = GREY;
                }
                img.put_pixel(origin + MARGIN + px, MARGIN + py, colour);
            }
        }
        frame(&mut img, origin);
    }
    save(&img, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{contour_export, GridWindow};
    use crate::dynamics::{integrate, InitialCondition};
    use crate::field::PotentialSpec;

    #[test]
    fn images_have_one_panel_per_input() {
        let dir = std::env::temp_dir().join(format!("exb-plot-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = PotentialSpec::new(4, 0.3, 1).unwrap();
        let rec = integrate(&spec, InitialCondition::new(-3.5, 1.0, 0.0), 20.0, 1e-8).unwrap();
        let recs = [rec];
        let path = dir.join("scatter.png");
        let panel = ScatterPanel {
            trajectories: &recs,
            barriers: &[2.0 - TAU, 2.0],
        };
        write_scatter(&path, View::around_barrier(2.0), &[panel]).unwrap();
        let img = image::open(&path).unwrap();
        assert_eq!((img.width(), img.height()), (PANEL + 2 * MARGIN, PANEL + 2 * MARGIN));

        let grid = contour_export(
            |x, y, t| spec.potential_value(x, y, t),
            0.5,
            GridWindow::default(),
            9,
            7,
        )
        .unwrap();
        let path = dir.join("contour.png");
        write_contours(&path, &[&grid, &grid], 6).unwrap();
        let img = image::open(&path).unwrap();
        assert_eq!(img.width(), 2 * (PANEL + 2 * MARGIN));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn colour_map_is_white_at_zero_and_saturates() {
        assert_eq!(diverging(0.0), WHITE);
        assert_eq!(diverging(5.0), diverging(1.0));
        assert_eq!(diverging(-5.0), diverging(-1.0));
    }
}
