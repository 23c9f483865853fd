//! Regular multi-band grids of cell values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundingBox, Point};

/// Row-major cells per band, bands stored one after another. Row 0 is the
/// northernmost row; `(x_origin, y_origin)` is the south-west corner. `NaN`
/// marks cells without data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub x_origin: f64,
    pub y_origin: f64,
    pub cellsize: f64,
    pub bands: usize,
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        x_origin: f64,
        y_origin: f64,
        cellsize: f64,
        bands: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let g = Self { ncols, nrows, x_origin, y_origin, cellsize, bands, values };
        g.validate()?;
        Ok(g)
    }

    /// Grid with every value set to `fill`.
    pub fn filled(
        ncols: usize,
        nrows: usize,
        x_origin: f64,
        y_origin: f64,
        cellsize: f64,
        bands: usize,
        fill: f64,
    ) -> Result<Self> {
        Self::new(ncols, nrows, x_origin, y_origin, cellsize, bands, vec![fill; ncols * nrows * bands])
    }

    /// Smallest grid of `cellsize` cells covering `bbox`, anchored at its
    /// south-west corner.
    pub fn covering(bbox: BoundingBox, cellsize: f64, bands: usize) -> Result<Self> {
        if !(cellsize > 0.0) {
            return Err(Error::InvalidGeometry("cellsize must be positive".into()));
        }
        let ncols = ((bbox.width() / cellsize) - 1e-9).ceil().max(1.0) as usize;
        let nrows = ((bbox.height() / cellsize) - 1e-9).ceil().max(1.0) as usize;
        Self::filled(ncols, nrows, bbox.xmin, bbox.ymin, cellsize, bands, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cellsize > 0.0) || !self.cellsize.is_finite() {
            return Err(Error::InvalidGeometry("cellsize must be positive".into()));
        }
        if !self.x_origin.is_finite() || !self.y_origin.is_finite() {
            return Err(Error::InvalidGeometry("raster origin must be finite".into()));
        }
        let expected = self.ncols * self.nrows * self.bands;
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.values.len(), context: "RasterGrid values" });
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox {
            xmin: self.x_origin,
            ymin: self.y_origin,
            xmax: self.x_origin + self.ncols as f64 * self.cellsize,
            ymax: self.y_origin + self.nrows as f64 * self.cellsize,
        }
    }

    /// Center of cell `index` (row-major within a band).
    pub fn cell_center(&self, index: usize) -> Point {
        let (r, c) = (index / self.ncols, index % self.ncols);
        Point::new(
            self.x_origin + (c as f64 + 0.5) * self.cellsize,
            self.y_origin + (self.nrows - r) as f64 * self.cellsize - 0.5 * self.cellsize,
        )
    }

    pub fn cell_centers(&self) -> Vec<Point> {
        (0..self.num_cells()).map(|i| self.cell_center(i)).collect()
    }

    /// Cell containing `p`; points on the outer east or north edge belong to
    /// the last column or first row.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let fx = (p.x - self.x_origin) / self.cellsize;
        let fy = (p.y - self.y_origin) / self.cellsize;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.ncols as f64 && fy <= self.nrows as f64) {
            return None;
        }
        let c = (fx as usize).min(self.ncols - 1);
        let from_south = (fy as usize).min(self.nrows - 1);
        Some((self.nrows - 1 - from_south) * self.ncols + c)
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.num_cells();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.num_cells();
        &mut self.values[b * n..(b + 1) * n]
    }

    /// Values of every band at one cell.
    pub fn cell_values(&self, index: usize) -> Vec<f64> {
        (0..self.bands).map(|b| self.band(b)[index]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_geometry() {
        let g = RasterGrid::filled(3, 2, 100.0, 200.0, 10.0, 1, 0.0).unwrap();
        assert_eq!(g.cell_center(0), Point::new(105.0, 215.0));
        assert_eq!(g.cell_center(5), Point::new(125.0, 205.0));
        assert_eq!(g.cell_of(Point::new(101.0, 219.0)), Some(0));
        assert_eq!(g.cell_of(Point::new(130.0, 200.0)), Some(5));
        assert_eq!(g.cell_of(Point::new(99.0, 205.0)), None);
        for i in 0..g.num_cells() {
            assert_eq!(g.cell_of(g.cell_center(i)), Some(i));
        }
    }

    #[test]
    fn value_count_is_checked() {
        assert!(RasterGrid::new(2, 2, 0.0, 0.0, 1.0, 1, vec![0.0; 3]).is_err());
    }
}
