//! Fixed-size RGB rasters and boolean masks.
//!
//! `Raster` carries the captured, baseline, and processed road images;
//! `Mask` marks road-surface pixels (the ROI). Both are row-major with
//! `(0,0)` at the top-left.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("raster dimensions must be positive, got {0}x{1}")]
    BadDimensions(u32, u32),
    #[error("pixel data length {got} does not match {expected} for the given dimensions")]
    DataSizeMismatch { expected: usize, got: usize },
}

/// Row-major RGB image, one byte per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Raster {
    /// Solid-color raster. Panics on zero dimensions.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut data = Vec::with_capacity(3 * width as usize * height as usize);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&rgb);
        }
        Raster { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions(width, height));
        }
        let expected = 3 * width as usize * height as usize;
        if data.len() != expected {
            return Err(RasterError::DataSizeMismatch { expected, got: data.len() });
        }
        Ok(Raster { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn same_dims(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        3 * (y as usize * self.width as usize + x as usize)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Raw RGB bytes, row-major.
    pub fn bytes(&self) -> &[u8] {
        &self.data
    }
}

/// Boolean raster; `true` marks a road-surface (ROI) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    cells: Vec<bool>,
}

impl Mask {
    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Mask { width, height, cells: vec![value; width as usize * height as usize] }
    }

    pub fn from_cells(width: u32, height: u32, cells: Vec<bool>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::BadDimensions(width, height));
        }
        let expected = width as usize * height as usize;
        if cells.len() != expected {
            return Err(RasterError::DataSizeMismatch { expected, got: cells.len() });
        }
        Ok(Mask { width, height, cells })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.cells[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.cells[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count_set(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn matches_raster(&self, raster: &Raster) -> bool {
        self.width == raster.width() && self.height == raster.height()
    }
}

/// Squared distance from point `(px,py)` to segment `(ax,ay)-(bx,by)`.
fn segment_dist2(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = bx - ax;
    let dy = by - ay;
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0) };
    let cx = ax + t * dx;
    let cy = ay + t * dy;
    (px - cx) * (px - cx) + (py - cy) * (py - cy)
}

/// Paint every pixel whose center lies within `half_width` of the polyline.
/// A half width of 1.5 gives the 3-pixel-wide stroke used by the virtual map.
pub fn draw_polyline(raster: &mut Raster, points: &[(f64, f64)], rgb: [u8; 3], half_width: f64) {
    let hw2 = half_width * half_width;
    let w = raster.width() as i64;
    let h = raster.height() as i64;
    for seg in points.windows(2) {
        let (ax, ay) = seg[0];
        let (bx, by) = seg[1];
        let pad = half_width + 1.0;
        let x0 = ((ax.min(bx) - pad).floor() as i64).max(0);
        let x1 = ((ax.max(bx) + pad).ceil() as i64).min(w - 1);
        let y0 = ((ay.min(by) - pad).floor() as i64).max(0);
        let y1 = ((ay.max(by) + pad).ceil() as i64).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if segment_dist2(x as f64, y as f64, ax, ay, bx, by) <= hw2 {
                    raster.set(x as u32, y as u32, rgb);
                }
            }
        }
    }
    if points.len() == 1 {
        // Degenerate polyline: a single dot.
        let (ax, ay) = points[0];
        let pad = half_width + 1.0;
        let x0 = ((ax - pad).floor() as i64).max(0);
        let x1 = ((ax + pad).ceil() as i64).min(w - 1);
        let y0 = ((ay - pad).floor() as i64).max(0);
        let y1 = ((ay + pad).ceil() as i64).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if segment_dist2(x as f64, y as f64, ax, ay, ax, ay) <= hw2 {
                    raster.set(x as u32, y as u32, rgb);
                }
            }
        }
    }
}

/// Pixels within `half_width` of any of the given polylines, computed by a
/// whole-canvas scan. Kept separate from `draw_polyline` as an independent
/// rasterization route for tests.
pub fn polyline_coverage(
    width: u32,
    height: u32,
    points: &[(f64, f64)],
    half_width: f64,
) -> Vec<(u32, u32)> {
    let hw2 = half_width * half_width;
    let mut out = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let covered = if points.len() == 1 {
                let (ax, ay) = points[0];
                segment_dist2(x as f64, y as f64, ax, ay, ax, ay) <= hw2
            } else {
                points.windows(2).any(|seg| {
                    segment_dist2(x as f64, y as f64, seg[0].0, seg[0].1, seg[1].0, seg[1].1) <= hw2
                })
            };
            if covered {
                out.push((x, y));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_roundtrip_get_set() {
        let mut r = Raster::filled(4, 3, [255, 255, 255]);
        r.set(2, 1, [1, 2, 3]);
        assert_eq!(r.get(2, 1), [1, 2, 3]);
        assert_eq!(r.get(0, 0), [255, 255, 255]);
        assert_eq!(r.bytes().len(), 36);
    }

    #[test]
    fn from_raw_validates_size() {
        assert_eq!(
            Raster::from_raw(2, 2, vec![0; 5]),
            Err(RasterError::DataSizeMismatch { expected: 12, got: 5 })
        );
        assert_eq!(Raster::from_raw(0, 2, vec![]), Err(RasterError::BadDimensions(0, 2)));
        assert!(Raster::from_raw(2, 2, vec![7; 12]).is_ok());
    }

    #[test]
    fn mask_counts_cells() {
        let mut m = Mask::filled(4, 4, false);
        assert_eq!(m.count_set(), 0);
        m.set(1, 1, true);
        m.set(2, 3, true);
        assert_eq!(m.count_set(), 2);
    }

    #[test]
    fn horizontal_stroke_is_three_pixels_wide() {
        let mut r = Raster::filled(16, 9, [255, 255, 255]);
        draw_polyline(&mut r, &[(2.0, 4.0), (13.0, 4.0)], [255, 0, 0], 1.5);
        for x in 2..=13 {
            assert_eq!(r.get(x, 3), [255, 0, 0]);
            assert_eq!(r.get(x, 4), [255, 0, 0]);
            assert_eq!(r.get(x, 5), [255, 0, 0]);
            assert_eq!(r.get(x, 2), [255, 255, 255]);
            assert_eq!(r.get(x, 6), [255, 255, 255]);
        }
    }

    #[test]
    fn draw_matches_coverage_scan() {
        let pts = [(1.0, 1.0), (12.0, 5.0), (12.0, 10.0)];
        let mut r = Raster::filled(16, 12, [255, 255, 255]);
        draw_polyline(&mut r, &pts, [0, 200, 0], 1.5);
        let cover = polyline_coverage(16, 12, &pts, 1.5);
        let mut painted = Vec::new();
        for y in 0..12 {
            for x in 0..16 {
                if r.get(x, y) == [0, 200, 0] {
                    painted.push((x, y));
                }
            }
        }
        assert_eq!(painted, cover);
    }
}
