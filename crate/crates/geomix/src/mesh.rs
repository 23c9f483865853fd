//! Triangulations of the study domain and barycentric projection onto them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar point in projected meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let b = Self { xmin, ymin, xmax, ymax };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.xmin, self.ymin, self.xmax, self.ymax].iter().all(|v| v.is_finite());
        if !finite || self.xmax <= self.xmin || self.ymax <= self.ymin {
            return Err(Error::InvalidGeometry(format!("degenerate bounding box {self:?}")));
        }
        Ok(())
    }

    /// Smallest box containing all points; `None` for an empty slice.
    pub fn around(points: &[Point]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Self { xmin: first.x, ymin: first.y, xmax: first.x, ymax: first.y };
        for p in points {
            b.xmin = b.xmin.min(p.x);
            b.ymin = b.ymin.min(p.y);
            b.xmax = b.xmax.max(p.x);
            b.ymax = b.ymax.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

/// Result of locating a point in a mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Inside { triangle: usize, weights: [f64; 3] },
    Outside,
}

/// Triangulation with counter-clockwise vertex triples.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    index: BucketIndex,
}

const BARY_EPS: f64 = 1e-12;

impl Mesh {
    /// Validates the triangles (indices in range, positive area; clockwise
    /// triples are reoriented) and builds the point-location index.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry("a mesh needs at least 3 vertices".into()));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidGeometry("a mesh needs at least one triangle".into()));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidGeometry(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
            let scale = a.distance(b).max(b.distance(c)).max(c.distance(a));
            if area2.abs() <= 2.0 * 1e-12 * scale * scale {
                return Err(Error::DegenerateTriangle { triangle: t, area: area2.abs() / 2.0 });
            }
            if area2 < 0.0 {
                tri.swap(1, 2);
            }
        }
        let index = BucketIndex::build(&vertices, &triangles);
        Ok(Self { vertices, triangles, index })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::around(&self.vertices).expect("mesh has vertices")
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                let [a, b, c] = t.map(|v| self.vertices[v]);
                [a.distance(b), b.distance(c), c.distance(a)]
            })
            .fold(0.0, f64::max)
    }

    /// Finds the containing triangle. Points on shared edges or vertices go
    /// to the lowest-indexed triangle that contains them.
    pub fn locate(&self, p: Point) -> Location {
        for &t in self.index.candidates(p) {
            if let Some(weights) = self.barycentric(t, p) {
                return Location::Inside { triangle: t, weights };
            }
        }
        Location::Outside
    }

    fn barycentric(&self, t: usize, p: Point) -> Option<[f64; 3]> {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        let l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
        let l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
        let mut w = [1.0 - l1 - l2, l1, l2];
        if w.iter().any(|&v| v < -BARY_EPS) {
            return None;
        }
        for v in &mut w {
            if v.abs() <= BARY_EPS {
                *v = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        Some(w)
    }

    /// Sparse barycentric projection of `points` onto the vertices.
    pub fn projection_matrix(&self, points: &[Point]) -> Result<ProjectionMatrix> {
        let mut rows = Vec::with_capacity(points.len());
        let mut weights = Vec::with_capacity(points.len());
        for (i, &p) in points.iter().enumerate() {
            match self.locate(p) {
                Location::Inside { triangle, weights: w } => {
                    rows.push(self.triangles[triangle]);
                    weights.push(w);
                }
                Location::Outside => return Err(Error::PointOutsideMesh { index: i, x: p.x, y: p.y }),
            }
        }
        Ok(ProjectionMatrix { ncols: self.vertices.len(), cols: rows, weights })
    }
}

/// Structured lattice of squares split into two triangles each, covering
/// `bbox` grown by `buffer` on every side.
///
/// Diagonals alternate in a checkerboard so that the triangulation has no
/// preferred direction.
pub fn build_mesh(bbox: BoundingBox, spacing: f64, buffer: f64) -> Result<Mesh> {
    bbox.validate()?;
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidGeometry(format!("spacing must be positive, got {spacing}")));
    }
    if !(buffer >= 0.0) || !buffer.is_finite() {
        return Err(Error::InvalidGeometry(format!("buffer must be non-negative, got {buffer}")));
    }
    let x0 = bbox.xmin - buffer;
    let y0 = bbox.ymin - buffer;
    let cells_x = ((bbox.width() + 2.0 * buffer) / spacing - 1e-9).ceil().max(1.0) as usize;
    let cells_y = ((bbox.height() + 2.0 * buffer) / spacing - 1e-9).ceil().max(1.0) as usize;
    let (nx, ny) = (cells_x + 1, cells_y + 1);

    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Point::new(x0 + i as f64 * spacing, y0 + j as f64 * spacing));
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut triangles = Vec::with_capacity(2 * cells_x * cells_y);
    for j in 0..cells_y {
        for i in 0..cells_x {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    Mesh::new(vertices, triangles)
}

/// Sparse `n x k` matrix whose row `i` holds the barycentric weights of point
/// `i` on the three vertices of its triangle.
#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    ncols: usize,
    cols: Vec<[usize; 3]>,
    weights: Vec<[f64; 3]>,
}

impl ProjectionMatrix {
    /// Builds from explicit rows; weights may be zero.
    pub fn from_rows(ncols: usize, cols: Vec<[usize; 3]>, weights: Vec<[f64; 3]>) -> Result<Self> {
        if cols.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: cols.len(),
                got: weights.len(),
                context: "ProjectionMatrix::from_rows",
            });
        }
        if cols.iter().flatten().any(|&c| c >= ncols) {
            return Err(Error::InvalidGeometry("projection column out of range".into()));
        }
        Ok(Self { ncols, cols, weights })
    }

    /// One unit weight per row, on vertex `targets[i]`.
    pub fn indicator(ncols: usize, targets: &[usize]) -> Result<Self> {
        let cols = targets.iter().map(|&t| [t, t, t]).collect();
        let weights = targets.iter().map(|_| [1.0, 0.0, 0.0]).collect();
        Self::from_rows(ncols, cols, weights)
    }

    pub fn nrows(&self) -> usize {
        self.cols.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> ([usize; 3], [f64; 3]) {
        (self.cols[i], self.weights[i])
    }

    /// Nonzero `(col, weight)` pairs of row `i`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cols[i].iter().zip(self.weights[i].iter()).filter(|(_, &w)| w != 0.0).map(|(&c, &w)| (c, w))
    }

    pub fn row_dot(&self, i: usize, w: &[f64]) -> f64 {
        let (c, a) = (self.cols[i], self.weights[i]);
        a[0] * w[c[0]] + a[1] * w[c[1]] + a[2] * w[c[2]]
    }

    pub fn mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: w.len(),
                context: "ProjectionMatrix::mul_vec",
            });
        }
        Ok((0..self.nrows()).map(|i| self.row_dot(i, w)).collect())
    }

    /// `A' v`, optionally restricted to a subset of rows.
    pub fn transpose_mul_vec(&self, v: &[f64], rows: Option<&[usize]>) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        let mut add = |i: usize, vi: f64| {
            let (c, a) = (self.cols[i], self.weights[i]);
            for t in 0..3 {
                out[c[t]] += a[t] * vi;
            }
        };
        match rows {
            Some(rows) => rows.iter().for_each(|&i| add(i, v[i])),
            None => (0..self.nrows()).for_each(|i| add(i, v[i])),
        }
        out
    }

    /// Keeps only the listed rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            ncols: self.ncols,
            cols: rows.iter().map(|&i| self.cols[i]).collect(),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            for t in 0..3 {
                m[(i, self.cols[i][t])] += self.weights[i][t];
            }
        }
        m
    }
}

/// Uniform grid of buckets listing the triangles whose bounding boxes touch
/// each bucket, in increasing triangle order.
#[derive(Clone, Debug)]
struct BucketIndex {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketIndex {
    fn build(vertices: &[Point], triangles: &[[usize; 3]]) -> Self {
        let bbox = BoundingBox::around(vertices).expect("vertices");
        let area = (bbox.width() * bbox.height()).max(f64::MIN_POSITIVE);
        let cell = (area / triangles.len() as f64).sqrt().max(1e-9) * 1.5;
        let nx = ((bbox.width() / cell).floor() as usize + 1).max(1);
        let ny = ((bbox.height() / cell).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let origin = Point::new(bbox.xmin, bbox.ymin);
        let clamp = |v: f64, n: usize| -> usize { (v.max(0.0) as usize).min(n - 1) };
        for (t, tri) in triangles.iter().enumerate() {
            let tb = BoundingBox::around(&tri.map(|v| vertices[v])).expect("triangle");
            let pad = cell * 1e-9;
            let i0 = clamp((tb.xmin - pad - origin.x) / cell, nx);
            let i1 = clamp((tb.xmax + pad - origin.x) / cell, nx);
            let j0 = clamp((tb.ymin - pad - origin.y) / cell, ny);
            let j1 = clamp((tb.ymax + pad - origin.y) / cell, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self { origin, cell, nx, ny, buckets }
    }

    fn candidates(&self, p: Point) -> &[usize] {
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        let tol = 1e-9;
        if !(fx >= -tol && fy >= -tol) || !fx.is_finite() || !fy.is_finite() {
            return &[];
        }
        let i = fx.max(0.0) as usize;
        let j = fy.max(0.0) as usize;
        if i >= self.nx || j >= self.ny {
            // Points on the far hull edge land one past the last bucket.
            if (i == self.nx && fx - self.nx as f64 <= tol) || (j == self.ny && fy - self.ny as f64 <= tol) {
                let i = i.min(self.nx - 1);
                let j = j.min(self.ny - 1);
                return &self.buckets[j * self.nx + i];
            }
            return &[];
        }
        &self.buckets[j * self.nx + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mesh() -> Mesh {
        build_mesh(BoundingBox::new(0.0, 0.0, 1000.0, 1000.0).unwrap(), 1000.0, 0.0).unwrap()
    }

    #[test]
    fn single_cell() {
        let m = unit_mesh();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.triangles().len(), 2);
        for t in 0..2 {
            assert!(m.triangle_area(t) > 0.0);
        }
    }

    #[test]
    fn paper_scale_vertex_count() {
        let b = BoundingBox::new(0.0, 0.0, 85_000.0, 115_000.0).unwrap();
        let m = build_mesh(b, 1000.0, 7000.0).unwrap();
        let expected = 100.0 * 130.0;
        let k = m.num_vertices() as f64;
        assert!((k - expected).abs() / expected < 0.05, "k = {k}");
        assert!(m.max_edge_length() <= 1000.0 * 2f64.sqrt() + 1e-9);
    }

    #[test]
    fn buffer_extends_hull() {
        let b = BoundingBox::new(0.0, 0.0, 85_000.0, 115_000.0).unwrap();
        let hull = build_mesh(b, 1000.0, 7000.0).unwrap().bounding_box();
        assert!(b.xmin - hull.xmin >= 7000.0 - 1e-9);
        assert!(b.ymin - hull.ymin >= 7000.0 - 1e-9);
        assert!(hull.xmax - b.xmax >= 7000.0 - 1e-9);
        assert!(hull.ymax - b.ymax >= 7000.0 - 1e-9);
    }

    #[test]
    fn invalid_geometry() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        assert!(matches!(build_mesh(b, 0.0, 0.0), Err(Error::InvalidGeometry(_))));
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn vertex_hit_has_unit_weight() {
        let m = unit_mesh();
        match m.locate(Point::new(1000.0, 0.0)) {
            Location::Inside { triangle, weights } => {
                let tri = m.triangles()[triangle];
                for t in 0..3 {
                    let expect = if tri[t] == 1 { 1.0 } else { 0.0 };
                    assert_eq!(weights[t], expect);
                }
            }
            Location::Outside => panic!("vertex should be inside"),
        }
    }

    #[test]
    fn centroid_has_equal_weights() {
        let m = unit_mesh();
        let tri = m.triangles()[0];
        let pts = tri.map(|v| m.vertices()[v]);
        let c = Point::new((pts[0].x + pts[1].x + pts[2].x) / 3.0, (pts[0].y + pts[1].y + pts[2].y) / 3.0);
        match m.locate(c) {
            Location::Inside { triangle, weights } => {
                assert_eq!(triangle, 0);
                for w in weights {
                    assert!((w - 1.0 / 3.0).abs() < 1e-12);
                }
            }
            Location::Outside => panic!(),
        }
    }

    #[test]
    fn shared_edge_goes_to_lowest_triangle() {
        let m = unit_mesh();
        // Diagonal from (0,0) to (1000,1000) is shared by both triangles.
        match m.locate(Point::new(500.0, 500.0)) {
            Location::Inside { triangle, weights } => {
                assert_eq!(triangle, 0);
                let mut nz: Vec<f64> = weights.iter().copied().filter(|&w| w != 0.0).collect();
                nz.sort_by(f64::total_cmp);
                assert_eq!(nz.len(), 2);
                assert!((nz[0] - 0.5).abs() < 1e-12 && (nz[1] - 0.5).abs() < 1e-12);
            }
            Location::Outside => panic!(),
        }
    }

    #[test]
    fn outside_points() {
        let m = unit_mesh();
        assert_eq!(m.locate(Point::new(-1.0, 500.0)), Location::Outside);
        assert_eq!(m.locate(Point::new(500.0, 1000.5)), Location::Outside);
        let err = m.projection_matrix(&[Point::new(10.0, 10.0), Point::new(2000.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::PointOutsideMesh { index: 1, .. }));
    }

    #[test]
    fn projection_at_vertices_is_identity_pattern() {
        let b = BoundingBox::new(0.0, 0.0, 3000.0, 2000.0).unwrap();
        let m = build_mesh(b, 1000.0, 0.0).unwrap();
        let a = m.projection_matrix(m.vertices()).unwrap();
        let dense = a.to_dense();
        for i in 0..m.num_vertices() {
            for j in 0..m.num_vertices() {
                assert_eq!(dense[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }
}
