//! Height fields: procedural terrain, ground-detail sculpting and the plain
//! text grid format.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::geom::{point_segment_distance, Rect, Vec2};
use crate::rng::rng_from_seed;

/// Regular grid of terrain elevations. Node `(row, col)` sits at
/// `origin + (col, row) * cell_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    pub elevations: Vec<f64>,
}

impl HeightField {
    pub fn new(origin: [f64; 2], cell_size: f64, rows: usize, cols: usize, elevations: Vec<f64>) -> Result<Self, SceneError> {
        let hf = HeightField {
            origin,
            cell_size,
            rows,
            cols,
            elevations,
        };
        hf.validate()?;
        Ok(hf)
    }

    pub fn flat(extent: Rect, cell_size: f64, z: f64) -> Result<Self, SceneError> {
        if !(cell_size > 0.0) || extent.is_empty() {
            return Err(SceneError::InvalidParameter(
                "flat height field needs a positive cell size and extent".into(),
            ));
        }
        let cols = (extent.width() / cell_size).ceil() as usize + 1;
        let rows = (extent.height() / cell_size).ceil() as usize + 1;
        HeightField::new(extent.min, cell_size, rows, cols, vec![z; rows * cols])
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(SceneError::InvalidParameter(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.rows < 2 || self.cols < 2 {
            return Err(SceneError::InvalidParameter(
                "height field needs at least 2x2 nodes".into(),
            ));
        }
        if self.elevations.len() != self.rows * self.cols {
            return Err(SceneError::InvalidParameter(format!(
                "expected {} elevations, got {}",
                self.rows * self.cols,
                self.elevations.len()
            )));
        }
        if self.elevations.iter().any(|z| !z.is_finite()) {
            return Err(SceneError::InvalidParameter("non-finite elevation".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.cols + col]
    }

    #[inline]
    pub fn node_xy(&self, row: usize, col: usize) -> Vec2 {
        Vec2::new(
            self.origin[0] + col as f64 * self.cell_size,
            self.origin[1] + row as f64 * self.cell_size,
        )
    }

    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin,
            [
                self.origin[0] + (self.cols - 1) as f64 * self.cell_size,
                self.origin[1] + (self.rows - 1) as f64 * self.cell_size,
            ],
        )
    }

    /// Bilinear height at `(x, y)`, clamped to the grid.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.cell_size).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.origin[1]) / self.cell_size).clamp(0.0, (self.rows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.cols - 2);
        let r0 = (fy.floor() as usize).min(self.rows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let z00 = self.get(r0, c0);
        let z01 = self.get(r0, c0 + 1);
        let z10 = self.get(r0 + 1, c0);
        let z11 = self.get(r0 + 1, c0 + 1);
        let a = z00 + (z01 - z00) * tx;
        let b = z10 + (z11 - z10) * tx;
        a + (b - a) * ty
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.elevations
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)))
    }

    /// Serializes to the text grid format: four header lines (`origin x y`,
    /// `cell_size c`, `rows r`, `cols c`) followed by one line per row.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "origin {} {}", self.origin[0], self.origin[1]);
        let _ = writeln!(s, "cell_size {}", self.cell_size);
        let _ = writeln!(s, "rows {}", self.rows);
        let _ = writeln!(s, "cols {}", self.cols);
        for r in 0..self.rows {
            let row = &self.elevations[r * self.cols..(r + 1) * self.cols];
            let mut first = true;
            for z in row {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{z}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SceneError> {
        let bad = |m: &str| SceneError::Format(format!("height grid: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let mut header = |key: &str| -> Result<Vec<String>, SceneError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{key}` line")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(&format!("expected `{key}` line, got `{line}`")));
            }
            Ok(it.map(str::to_owned).collect())
        };
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let parse_u = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad count `{s}`")));

        let origin = header("origin")?;
        if origin.len() != 2 {
            return Err(bad("origin needs two values"));
        }
        let origin = [parse_f(&origin[0])?, parse_f(&origin[1])?];
        let cell = header("cell_size")?;
        let cell_size = parse_f(cell.first().ok_or_else(|| bad("cell_size missing value"))?)?;
        let rows = parse_u(header("rows")?.first().ok_or_else(|| bad("rows missing value"))?)?;
        let cols = parse_u(header("cols")?.first().ok_or_else(|| bad("cols missing value"))?)?;
        let mut elevations = Vec::with_capacity(rows * cols);
        for line in lines {
            for tok in line.split_whitespace() {
                elevations.push(parse_f(tok)?);
            }
        }
        HeightField::new(origin, cell_size, rows, cols, elevations)
    }
}

fn lattice_value(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let mut h = seed ^ 0x243F_6A88_85A3_08D3;
    for v in [octave as u64, ix as u64, iy as u64] {
        h ^= v.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 31)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 29;
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Single-octave value noise in `[0, 1)`.
fn value_noise(seed: u64, octave: u32, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (ix, iy) = (x0 as i64, y0 as i64);
    let tx = smoothstep(x - x0);
    let ty = smoothstep(y - y0);
    let v00 = lattice_value(seed, octave, ix, iy);
    let v10 = lattice_value(seed, octave, ix + 1, iy);
    let v01 = lattice_value(seed, octave, ix, iy + 1);
    let v11 = lattice_value(seed, octave, ix + 1, iy + 1);
    let a = v00 + (v10 - v00) * tx;
    let b = v01 + (v11 - v01) * tx;
    a + (b - a) * ty
}

const OCTAVES: u32 = 4;

/// Fractal value-noise terrain over `[0, w] x [0, h]`. Elevations lie in
/// `[0, relief_amplitude]`.
pub fn generate_terrain(seed: u64, extent: [f64; 2], cell_size: f64, relief_amplitude: f64) -> Result<HeightField, SceneError> {
    let [w, h] = extent;
    if !(w > 0.0 && h > 0.0) || !(cell_size > 0.0) {
        return Err(SceneError::InvalidParameter(format!(
            "terrain extent {w}x{h} and cell size {cell_size} must be positive"
        )));
    }
    if !(relief_amplitude >= 0.0) || !relief_amplitude.is_finite() {
        return Err(SceneError::InvalidParameter(format!(
            "relief amplitude must be non-negative, got {relief_amplitude}"
        )));
    }
    let cols = (w / cell_size).ceil() as usize + 1;
    let rows = (h / cell_size).ceil() as usize + 1;
    let base_wavelength = w.max(h) / 2.0;
    let weights: Vec<f64> = (0..OCTAVES).map(|o| 0.5f64.powi(o as i32)).collect();
    let total: f64 = weights.iter().sum();

    let mut elevations = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let x = c as f64 * cell_size;
            let y = r as f64 * cell_size;
            let mut n = 0.0;
            for (o, wgt) in weights.iter().enumerate() {
                let freq = (1u64 << o) as f64 / base_wavelength;
                n += wgt * value_noise(seed, o as u32, x * freq, y * freq);
            }
            elevations.push(relief_amplitude * (n / total).clamp(0.0, 1.0));
        }
    }
    HeightField::new([0.0, 0.0], cell_size, rows, cols, elevations)
}

/// Upper bound on the depth of a ditch or the height of a bump.
pub const MAX_DETAIL_DEPTH: f64 = 0.5;

/// Linear ground detail added to a height field.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundFeature {
    pub start: Vec2,
    pub end: Vec2,
    pub half_width: f64,
    /// Negative for ditches, positive for bumps.
    pub offset: f64,
}

/// Sculpts ditches and speed bumps into a copy of `hf`. Rates are features
/// per kilometre of mean terrain side length; any positive rate yields at
/// least one feature.
pub fn sculpt_ground_details(hf: &HeightField, seed: u64, ditch_rate: f64, bump_rate: f64) -> Result<HeightField, SceneError> {
    Ok(sculpt_with_features(hf, seed, ditch_rate, bump_rate)?.0)
}

/// As [`sculpt_ground_details`], also returning the features that were cut.
pub fn sculpt_with_features(
    hf: &HeightField,
    seed: u64,
    ditch_rate: f64,
    bump_rate: f64,
) -> Result<(HeightField, Vec<GroundFeature>), SceneError> {
    if !(ditch_rate >= 0.0) || !(bump_rate >= 0.0) {
        return Err(SceneError::InvalidParameter(format!(
            "sculpt rates must be non-negative, got ditch {ditch_rate}, bump {bump_rate}"
        )));
    }
    hf.validate()?;
    let ext = hf.extent();
    let side_km = 0.5 * (ext.width() + ext.height()) / 1000.0;
    let count = |rate: f64| -> usize {
        if rate > 0.0 {
            ((rate * side_km).round() as usize).max(1)
        } else {
            0
        }
    };
    let mut rng = rng_from_seed(seed);
    let mut features = Vec::new();
    let random_segment = |rng: &mut rand_chacha::ChaCha8Rng, len_lo: f64, len_hi: f64| {
        let c = Vec2::new(
            rng.random_range(ext.min[0]..=ext.max[0]),
            rng.random_range(ext.min[1]..=ext.max[1]),
        );
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let half = 0.5 * rng.random_range(len_lo..=len_hi);
        let d = Vec2::new(theta.cos(), theta.sin()) * half;
        (c - d, c + d)
    };
    for _ in 0..count(bump_rate) {
        let (start, end) = random_segment(&mut rng, 4.0, 8.0);
        let half_width = rng.random_range(0.3..=0.6f64).max(hf.cell_size);
        let offset = rng.random_range(0.05..=0.15);
        features.push(GroundFeature { start, end, half_width, offset });
    }
    for _ in 0..count(ditch_rate) {
        let (start, end) = random_segment(&mut rng, 10.0, 40.0);
        let half_width = rng.random_range(0.5..=1.5f64).max(hf.cell_size);
        let offset = -rng.random_range(0.2..=MAX_DETAIL_DEPTH);
        features.push(GroundFeature { start, end, half_width, offset });
    }

    let mut out = hf.clone();
    // Bumps first, then ditches, each as an envelope relative to the input so
    // overlapping features never exceed the depth bound.
    for pass_ditches in [false, true] {
        for f in features.iter().filter(|f| (f.offset < 0.0) == pass_ditches) {
            let reach = f.half_width;
            let (lo_x, hi_x) = (f.start.x.min(f.end.x) - reach, f.start.x.max(f.end.x) + reach);
            let (lo_y, hi_y) = (f.start.y.min(f.end.y) - reach, f.start.y.max(f.end.y) + reach);
            let c_lo = (((lo_x - hf.origin[0]) / hf.cell_size).floor().max(0.0)) as usize;
            let c_hi = (((hi_x - hf.origin[0]) / hf.cell_size).ceil().max(0.0) as usize).min(hf.cols - 1);
            let r_lo = (((lo_y - hf.origin[1]) / hf.cell_size).floor().max(0.0)) as usize;
            let r_hi = (((hi_y - hf.origin[1]) / hf.cell_size).ceil().max(0.0) as usize).min(hf.rows - 1);
            for r in r_lo..=r_hi {
                for c in c_lo..=c_hi {
                    let p = hf.node_xy(r, c);
                    let d = point_segment_distance(p, f.start, f.end);
                    if d >= reach {
                        continue;
                    }
                    let profile = 1.0 - (d / reach).powi(2);
                    let orig = hf.get(r, c);
                    let target = orig + f.offset * profile;
                    let z = &mut out.elevations[r * hf.cols + c];
                    if f.offset < 0.0 {
                        *z = z.min(target);
                    } else {
                        *z = z.max(target);
                    }
                }
            }
        }
    }
    Ok((out, features))
}
