//! Synthetic lidar-like sampling designs and responses with known truth.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::FootprintTable;
use crate::error::{Error, Result};
use crate::mesh::{BoundingBox, Mesh, Point};
use crate::mixture::logistic;
use crate::raster::RasterGrid;
use crate::spde::{MaternParams, SpdePrecision};

/// One orbit: a bundle of parallel ground tracks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    /// Track heading in degrees clockwise from north.
    pub azimuth: f64,
    /// A point on the central track (or between the two central tracks);
    /// footprints fall at integer multiples of the along-track spacing from
    /// it. Defaults to a point spread across the domain per orbit.
    #[serde(default)]
    pub anchor: Option<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub domain: BoundingBox,
    pub tracks_per_orbit: usize,
    pub along_track_spacing: f64,
    pub across_track_spacing: f64,
    pub orbits: Vec<OrbitSpec>,
    /// One Matérn field per covariate band.
    #[serde(default)]
    pub covariate_fields: Vec<MaternParams>,
    pub raster_cellsize: f64,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !(self.along_track_spacing > 0.0 && self.across_track_spacing > 0.0 && self.raster_cellsize > 0.0) {
            return Err(Error::ConfigInvalid("spacings and cellsize must be positive".into()));
        }
        if self.orbits.is_empty() || self.tracks_per_orbit == 0 {
            return Err(Error::ConfigInvalid("need at least one orbit with one track".into()));
        }
        for f in &self.covariate_fields {
            f.validate()?;
        }
        Ok(())
    }

    pub fn num_covariates(&self) -> usize {
        self.covariate_fields.len()
    }
}

/// Footprint geometry plus covariates and the raster they were read from.
#[derive(Clone, Debug)]
pub struct SimulatedDesign {
    pub coords: Vec<Point>,
    pub orbits: Vec<i64>,
    /// `n x p`, read from the raster cell under each footprint.
    pub covariates: DMatrix<f64>,
    pub raster: RasterGrid,
}

/// Footprints of all orbits clipped to the domain (boundary included).
pub fn footprint_geometry(spec: &DesignSpec) -> Result<(Vec<Point>, Vec<i64>)> {
    spec.validate()?;
    let d = spec.domain;
    let corners = [
        Point::new(d.xmin, d.ymin),
        Point::new(d.xmax, d.ymin),
        Point::new(d.xmin, d.ymax),
        Point::new(d.xmax, d.ymax),
    ];
    let n_orbits = spec.orbits.len();
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (o, orbit) in spec.orbits.iter().enumerate() {
        let az = orbit.azimuth.to_radians();
        let (dx, dy) = (az.sin(), az.cos());
        let (nx, ny) = (az.cos(), -az.sin());
        let anchor = orbit.anchor.unwrap_or_else(|| {
            Point::new(d.xmin + (o as f64 + 0.5) / n_orbits as f64 * d.width(), d.ymin + 0.5 * d.height())
        });
        let proj = |p: &Point| (p.x - anchor.x) * dx + (p.y - anchor.y) * dy;
        let smin = corners.iter().map(proj).fold(f64::INFINITY, f64::min);
        let smax = corners.iter().map(proj).fold(f64::NEG_INFINITY, f64::max);
        let step = spec.along_track_spacing;
        let first = (smin / step - 1e-9).ceil() as i64;
        let last = (smax / step + 1e-9).floor() as i64;
        let centre = (spec.tracks_per_orbit as f64 - 1.0) / 2.0;
        for t in 0..spec.tracks_per_orbit {
            let offset = (t as f64 - centre) * spec.across_track_spacing;
            for j in first..=last {
                let s = j as f64 * step;
                let p = Point::new(anchor.x + offset * nx + s * dx, anchor.y + offset * ny + s * dy);
                if d.contains(p) {
                    coords.push(p);
                    labels.push(o as i64);
                }
            }
        }
    }
    if coords.is_empty() {
        return Err(Error::EmptyDesign);
    }
    Ok((coords, labels))
}

/// Draw from the mesh GMRF `N(0, Q(theta)^{-1})`.
pub fn sample_field<R: Rng + ?Sized>(spde: &SpdePrecision, theta: MaternParams, rng: &mut R) -> Result<Vec<f64>> {
    let q = spde.precision(theta);
    let f = spde.symbolic().factorize(&q)?;
    f.sample(&vec![0.0; spde.dim()], rng)
}

/// Footprint geometry, covariate raster and footprint covariates.
///
/// Each band is a GMRF draw on `mesh` interpolated to the cell centers and
/// standardized to mean 0 and standard deviation 1 over the raster.
pub fn simulate_design<R: Rng + ?Sized>(spec: &DesignSpec, mesh: &Mesh, rng: &mut R) -> Result<SimulatedDesign> {
    let (coords, orbits) = footprint_geometry(spec)?;
    let p = spec.num_covariates();
    let mut raster = RasterGrid::covering(spec.domain, spec.raster_cellsize, p)?;
    if p > 0 {
        let spde = SpdePrecision::from_mesh(mesh)?;
        let a = mesh.projection_matrix(&raster.cell_centers())?;
        for (b, theta) in spec.covariate_fields.iter().enumerate() {
            let w = sample_field(&spde, *theta, rng)?;
            let mut v = a.mul_vec(&w)?;
            standardize(&mut v);
            raster.band_mut(b).copy_from_slice(&v);
        }
    }
    let mut covariates = DMatrix::zeros(coords.len(), p);
    for (i, c) in coords.iter().enumerate() {
        let cell =
            raster.cell_of(*c).ok_or_else(|| Error::InvalidGeometry(format!("footprint {i} outside the raster")))?;
        for b in 0..p {
            covariates[(i, b)] = raster.band(b)[cell];
        }
    }
    Ok(SimulatedDesign { coords, orbits, covariates, raster })
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

/// Parameters of one spatial regression. `theta.sigma2 = 0` turns the
/// spatial effect off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessTruth {
    pub mu: f64,
    pub beta: Vec<f64>,
    pub theta: MaternParams,
    pub tau2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthParams {
    Typical {
        process: ProcessTruth,
    },
    Mixture {
        /// Class 0 then class 1.
        classes: [ProcessTruth; 2],
        /// Membership field: `logit pi = mu + x'beta + eta`; `tau2` unused.
        membership: ProcessTruth,
    },
}

/// Everything that generated a simulated data set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruthRecord {
    pub params: TruthParams,
    /// Mesh effects of class 0 and class 1 (typical model: both the same
    /// field).
    pub w: [Vec<f64>; 2],
    pub w_z: Vec<f64>,
    /// Labels and class-1 probabilities at the footprints; all ones for the
    /// typical model.
    pub z: Vec<u8>,
    pub pi: Vec<f64>,
}

fn validate_process(p: &ProcessTruth, num_covariates: usize) -> Result<()> {
    if p.beta.len() != num_covariates {
        return Err(Error::DimensionMismatch { expected: num_covariates, got: p.beta.len(), context: "truth beta" });
    }
    if !(p.tau2 >= 0.0) || !(p.theta.sigma2 >= 0.0) || !(p.theta.phi > 0.0) {
        return Err(Error::InvalidParameter("truth variances must be non-negative".into()));
    }
    Ok(())
}

fn draw_effect<R: Rng + ?Sized>(spde: &SpdePrecision, theta: MaternParams, rng: &mut R) -> Result<Vec<f64>> {
    if theta.sigma2 == 0.0 {
        return Ok(vec![0.0; spde.dim()]);
    }
    sample_field(spde, theta, rng)
}

/// Responses at the design footprints drawn from the chosen model.
pub fn simulate_response<R: Rng + ?Sized>(
    design: &SimulatedDesign,
    mesh: &Mesh,
    truth: &TruthParams,
    rng: &mut R,
) -> Result<(FootprintTable, TruthRecord)> {
    let n = design.coords.len();
    let p = design.covariates.ncols();
    let spde = SpdePrecision::from_mesh(mesh)?;
    let a = mesh.projection_matrix(&design.coords)?;
    let linear = |pr: &ProcessTruth, w: &[f64]| -> Result<Vec<f64>> {
        let aw = a.mul_vec(w)?;
        Ok((0..n)
            .map(|i| pr.mu + (0..p).map(|j| design.covariates[(i, j)] * pr.beta[j]).sum::<f64>() + aw[i])
            .collect())
    };
    let noisy = |mean: f64, tau2: f64, rng: &mut R| -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        mean + tau2.sqrt() * e
    };

    let (response, record) = match truth {
        TruthParams::Typical { process } => {
            validate_process(process, p)?;
            let w = draw_effect(&spde, process.theta, rng)?;
            let mean = linear(process, &w)?;
            let y: Vec<f64> = mean.iter().map(|&m| noisy(m, process.tau2, rng)).collect();
            let record = TruthRecord {
                params: truth.clone(),
                w: [w.clone(), w],
                w_z: vec![0.0; spde.dim()],
                z: vec![1; n],
                pi: vec![1.0; n],
            };
            (y, record)
        }
        TruthParams::Mixture { classes, membership } => {
            for c in classes.iter().chain(std::iter::once(membership)) {
                validate_process(c, p)?;
            }
            let w0 = draw_effect(&spde, classes[0].theta, rng)?;
            let w1 = draw_effect(&spde, classes[1].theta, rng)?;
            let w_z = draw_effect(&spde, membership.theta, rng)?;
            let m0 = linear(&classes[0], &w0)?;
            let m1 = linear(&classes[1], &w1)?;
            let pi: Vec<f64> = linear(membership, &w_z)?.into_iter().map(logistic).collect();
            let z: Vec<u8> = pi.iter().map(|&q| u8::from(rng.random::<f64>() < q)).collect();
            let y =
                (0..n)
                    .map(|i| {
                        if z[i] == 1 {
                            noisy(m1[i], classes[1].tau2, rng)
                        } else {
                            noisy(m0[i], classes[0].tau2, rng)
                        }
                    })
                    .collect();
            let record = TruthRecord { params: truth.clone(), w: [w0, w1], w_z, z, pi };
            (y, record)
        }
    };
    let table = FootprintTable::new(
        (0..n as u64).collect(),
        design.coords.clone(),
        design.orbits.clone(),
        response,
        design.covariates.clone(),
    )?;
    Ok((table, record))
}
