use crate::error::{Error, Result};

/// Uniform pixel raster centred on the scene origin.
///
/// Pixel `i` sits at column `i % nx` and row `i / nx` (row-major). Rows run
/// along +y and columns along +x, so pixel `0` is the corner at
/// `(-extent_x/2, -extent_y/2)` shifted by half a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    pub nx: usize,
    pub ny: usize,
    pub extent_x: f64,
    pub extent_y: f64,
    /// Elevation of the image plane above ground. Recorded as metadata; the
    /// two-dimensional imaging kernel does not use it.
    pub plane_height: f64,
}

impl SceneGrid {
    pub fn new(nx: usize, ny: usize, extent_x: f64, extent_y: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!(
                "pixel counts must be positive, got {nx}x{ny}"
            )));
        }
        if !(extent_x.is_finite() && extent_x > 0.0 && extent_y.is_finite() && extent_y > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive and finite, got {extent_x} x {extent_y}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            extent_x,
            extent_y,
            plane_height: 0.0,
        })
    }

    pub fn with_plane_height(mut self, plane_height: f64) -> Self {
        self.plane_height = plane_height;
        self
    }

    /// Total pixel count `N = nx * ny`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel pitch `(dx, dy)` in meters.
    pub fn pixel_size(&self) -> (f64, f64) {
        (self.extent_x / self.nx as f64, self.extent_y / self.ny as f64)
    }

    pub fn x_coord(&self, ix: usize) -> f64 {
        let (dx, _) = self.pixel_size();
        -0.5 * self.extent_x + (ix as f64 + 0.5) * dx
    }

    pub fn y_coord(&self, iy: usize) -> f64 {
        let (_, dy) = self.pixel_size();
        -0.5 * self.extent_y + (iy as f64 + 0.5) * dy
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// `(ix, iy)` of pixel `i`.
    pub fn position(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    /// Center of pixel `i` in meters.
    pub fn pixel_coords(&self, i: usize) -> (f64, f64) {
        let (ix, iy) = self.position(i);
        (self.x_coord(ix), self.y_coord(iy))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x.abs() <= 0.5 * self.extent_x && y.abs() <= 0.5 * self.extent_y
    }

    /// Index of the pixel whose center is closest to `(x, y)`, or `None`
    /// when the point lies outside the grid extent.
    pub fn nearest_pixel(&self, x: f64, y: f64) -> Option<usize> {
        if !self.contains(x, y) {
            return None;
        }
        let (dx, dy) = self.pixel_size();
        let ix = ((x + 0.5 * self.extent_x) / dx).floor() as usize;
        let iy = ((y + 0.5 * self.extent_y) / dy).floor() as usize;
        Some(self.index(ix.min(self.nx - 1), iy.min(self.ny - 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(SceneGrid::new(0, 4, 1.0, 1.0).is_err());
        assert!(SceneGrid::new(4, 4, 0.0, 1.0).is_err());
        assert!(SceneGrid::new(4, 4, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn single_pixel_sits_at_origin() {
        let g = SceneGrid::new(1, 1, 3.0, 5.0).unwrap();
        assert_eq!(g.pixel_coords(0), (0.0, 0.0));
    }

    #[test]
    fn coordinates_are_symmetric_about_center() {
        let g = SceneGrid::new(7, 4, 7.0, 2.0).unwrap();
        for ix in 0..g.nx {
            assert!((g.x_coord(ix) + g.x_coord(g.nx - 1 - ix)).abs() < 1e-12);
        }
        for iy in 0..g.ny {
            assert!((g.y_coord(iy) + g.y_coord(g.ny - 1 - iy)).abs() < 1e-12);
        }
        assert!((g.x_coord(0) - (-3.5 + 0.5)).abs() < 1e-12);
        assert!((g.y_coord(3) - (1.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn row_major_ordering() {
        let g = SceneGrid::new(3, 2, 3.0, 2.0).unwrap();
        assert_eq!(g.position(4), (1, 1));
        assert_eq!(g.index(2, 1), 5);
        assert_eq!(g.pixel_coords(1), (0.0, -0.5));
    }

    #[test]
    fn nearest_pixel_snaps_to_centers() {
        let g = SceneGrid::new(4, 4, 4.0, 4.0).unwrap();
        for i in 0..g.len() {
            let (x, y) = g.pixel_coords(i);
            assert_eq!(g.nearest_pixel(x, y), Some(i));
            assert_eq!(g.nearest_pixel(x + 0.4, y - 0.4), Some(i));
        }
        assert_eq!(g.nearest_pixel(2.0, 2.0), Some(15));
        assert_eq!(g.nearest_pixel(2.1, 0.0), None);
    }
}
