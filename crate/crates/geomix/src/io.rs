//! Text and binary file formats: footprint tables, rasters, posterior draws.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Centering, FootprintTable};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::mixture::MixtureState;
use crate::raster::RasterGrid;
use crate::spde::MaternParams;
use crate::typical::{ChainDraws, FactorizationCounts, TypicalState};

/// Value written for missing raster cells.
pub const NODATA: f64 = -9999.0;

const REQUIRED_COLUMNS: [&str; 5] = ["id", "easting", "northing", "orbit", "response"];

/// Shortest-free decimal form with 17 significant digits; parses back to
/// the same bits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}

/// Band columns `band_1 .. band_p`, ordered by their number.
fn band_columns(headers: &csv::StringRecord) -> Vec<(usize, usize)> {
    let mut bands: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| h.strip_prefix("band_").and_then(|s| s.parse().ok()).map(|b| (b, col)))
        .collect();
    bands.sort_unstable();
    bands
}

/// Reads a comma-separated footprint table with header
/// `id,easting,northing,orbit,response,band_1,...,band_p`.
pub fn read_footprints(path: impl AsRef<Path>) -> Result<FootprintTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> =
        REQUIRED_COLUMNS.iter().filter(|c| position(c).is_none()).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::Schema { path: path.to_path_buf(), missing });
    }
    let cols: Vec<usize> = REQUIRED_COLUMNS.iter().map(|c| position(c).unwrap()).collect();
    let bands = band_columns(&headers);
    for (expected, (b, _)) in (1..).zip(&bands) {
        if *b != expected {
            return Err(Error::Schema { path: path.to_path_buf(), missing: vec![format!("band_{expected}")] });
        }
    }

    let (mut ids, mut coords, mut orbits, mut response, mut cov) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |col: usize, name: &str| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing value for `{name}`"),
            })
        };
        let number = |col: usize, name: &str| -> Result<f64> {
            let s = field(col, name)?;
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{name}` is not a finite number: {s:?}"),
            })
        };
        let integer = |col: usize, name: &str| -> Result<i64> {
            let s = field(col, name)?;
            s.parse::<i64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{name}` is not an integer: {s:?}"),
            })
        };
        let id = integer(cols[0], "id")?;
        ids.push(u64::try_from(id).map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("`id` must be non-negative: {id}"),
        })?);
        coords.push(Point::new(number(cols[1], "easting")?, number(cols[2], "northing")?));
        orbits.push(integer(cols[3], "orbit")?);
        response.push(number(cols[4], "response")?);
        for (b, col) in &bands {
            cov.push(number(*col, &format!("band_{b}"))?);
        }
    }
    let n = coords.len();
    let covariates = DMatrix::from_row_slice(n, bands.len(), &cov);
    FootprintTable::new(ids, coords, orbits, response, covariates)
}

pub fn write_footprints(table: &FootprintTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=table.num_covariates()).map(|b| format!("band_{b}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..table.len() {
        let mut row = vec![
            table.ids[i].to_string(),
            format_f64(table.coords[i].x),
            format_f64(table.coords[i].y),
            table.orbits[i].to_string(),
            format_f64(table.response[i]),
        ];
        row.extend(table.covariates.row(i).iter().map(|&v| format_f64(v)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const RASTER_KEYS: [&str; 6] = ["ncols", "nrows", "x_origin", "y_origin", "cellsize", "bands"];

/// Writes the header lines then one line per raster row, bands in order.
/// Missing cells are written as [`NODATA`].
pub fn write_raster(grid: &RasterGrid, path: impl AsRef<Path>) -> Result<()> {
    grid.validate()?;
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "ncols {}", grid.ncols).map_err(io)?;
    writeln!(w, "nrows {}", grid.nrows).map_err(io)?;
    writeln!(w, "x_origin {}", format_f64(grid.x_origin)).map_err(io)?;
    writeln!(w, "y_origin {}", format_f64(grid.y_origin)).map_err(io)?;
    writeln!(w, "cellsize {}", format_f64(grid.cellsize)).map_err(io)?;
    writeln!(w, "bands {}", grid.bands).map_err(io)?;
    writeln!(w, "nodata_value {}", format_f64(NODATA)).map_err(io)?;
    for row in grid.values.chunks(grid.ncols.max(1)) {
        let line: Vec<String> = row.iter().map(|&v| format_f64(if v.is_nan() { NODATA } else { v })).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the format of [`write_raster`]; the `nodata_value` line is
/// optional and no-data cells come back as `NaN`.
pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterGrid> {
    let path = path.as_ref();
    let header_err = |message: String| Error::Header { path: path.to_path_buf(), message };
    let mut lines = BufReader::new(open(path)?).lines();
    let mut header = [0.0f64; 6];
    for (slot, key) in header.iter_mut().zip(RASTER_KEYS) {
        let line =
            lines.next().ok_or_else(|| header_err(format!("missing `{key}`")))?.map_err(|e| Error::io(path, e))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(header_err(format!("expected `{key}`, found {line:?}")));
        }
        *slot = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| header_err(format!("bad value for `{key}`: {line:?}")))?;
    }
    let as_count = |v: f64, key: &str| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(header_err(format!("`{key}` must be a non-negative integer")))
        }
    };
    let ncols = as_count(header[0], "ncols")?;
    let nrows = as_count(header[1], "nrows")?;
    let bands = as_count(header[5], "bands")?;
    let mut nodata = NODATA;
    let mut values = Vec::with_capacity(ncols * nrows * bands);
    let mut first = true;
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if first && line.trim_start().starts_with("nodata_value") {
            nodata = line
                .split_whitespace()
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| header_err(format!("bad value for `nodata_value`: {line:?}")))?;
            first = false;
            continue;
        }
        first = false;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| header_err(format!("bad cell value {tok:?}")))?;
            values.push(if v == nodata { f64::NAN } else { v });
        }
    }
    let expected = ncols * nrows * bands;
    if values.len() != expected {
        return Err(Error::CountMismatch { path: path.to_path_buf(), expected, found: values.len() });
    }
    RasterGrid::new(ncols, nrows, header[2], header[3], header[4], bands, values).map_err(|e| header_err(e.to_string()))
}

const MATRIX_MAGIC: &[u8; 8] = b"GMXMAT01";

/// Binary matrix: magic, rows and columns as little-endian `u64`, then
/// row-major little-endian `f64` values.
pub fn write_matrix(rows: &[Vec<f64>], ncols: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    w.write_all(MATRIX_MAGIC).map_err(io)?;
    w.write_all(&(rows.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(ncols as u64).to_le_bytes()).map_err(io)?;
    for r in rows {
        if r.len() != ncols {
            return Err(Error::DimensionMismatch { expected: ncols, got: r.len(), context: "matrix row" });
        }
        for v in r {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::Header { path: path.to_path_buf(), message: message.to_string() };
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(bad("not a matrix file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
    let (nrows, ncols) = (word(8), word(16));
    let expected = nrows.checked_mul(ncols).ok_or_else(|| bad("matrix too large"))?;
    let found = (bytes.len() - 24) / 8;
    if found != expected || (bytes.len() - 24) % 8 != 0 {
        return Err(Error::CountMismatch { path: path.to_path_buf(), expected, found });
    }
    let values: Vec<f64> = bytes[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(if ncols == 0 { vec![Vec::new(); nrows] } else { values.chunks(ncols).map(<[f64]>::to_vec).collect() })
}

/// Chain bookkeeping stored next to the draw files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawsMeta {
    pub model: String,
    pub seed: u64,
    pub chain: u64,
    pub burn_in: usize,
    pub thin: usize,
    pub draws: usize,
    pub num_covariates: usize,
    pub mesh_vertices: usize,
    pub observations: usize,
    pub acceptance: Vec<f64>,
    pub centering: Centering,
}

fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
        message: e.message().to_string(),
    })
}

pub fn write_config<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    write_toml(value, path.as_ref())
}

pub fn read_config<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    read_toml(path.as_ref())
}

/// Columnar text table: a header line then one whitespace-free CSV row per
/// record.
fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("not a number: {s:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn column<'a>(
    header: &[String],
    rows: &'a [Vec<f64>],
    name: &str,
    path: &Path,
) -> Result<impl Iterator<Item = f64> + 'a> {
    let c = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema { path: path.to_path_buf(), missing: vec![name.to_string()] })?;
    Ok(rows.iter().map(move |r| r[c]))
}

fn iteration_of<S>(draws: &ChainDraws<S>, m: usize) -> usize {
    draws.burn_in + m * draws.thin
}

fn meta<S>(draws: &ChainDraws<S>, model: &str, p: usize, k: usize, n: usize) -> DrawsMeta {
    DrawsMeta {
        model: model.to_string(),
        seed: draws.seed,
        chain: draws.chain,
        burn_in: draws.burn_in,
        thin: draws.thin,
        draws: draws.len(),
        num_covariates: p,
        mesh_vertices: k,
        observations: n,
        acceptance: draws.acceptance.clone(),
        centering: draws.centering.clone(),
    }
}

fn write_factorizations<S>(draws: &ChainDraws<S>, dir: &Path) -> Result<()> {
    let header: Vec<String> =
        ["iteration", "conditional", "proposal", "newton", "laplace_mode"].iter().map(|s| s.to_string()).collect();
    write_table(
        &dir.join("factorizations.csv"),
        &header,
        draws.factorizations.iter().enumerate().map(|(it, c)| {
            [it, c.conditional, c.proposal, c.newton, c.laplace_mode].iter().map(|v| v.to_string()).collect()
        }),
    )
}

fn read_factorizations(dir: &Path) -> Result<Vec<FactorizationCounts>> {
    let path = dir.join("factorizations.csv");
    let (header, rows) = read_table(&path)?;
    let col = |name| -> Result<Vec<usize>> { Ok(column(&header, &rows, name, &path)?.map(|v| v as usize).collect()) };
    let (c, p, n, l) = (col("conditional")?, col("proposal")?, col("newton")?, col("laplace_mode")?);
    Ok((0..rows.len())
        .map(|i| FactorizationCounts { conditional: c[i], proposal: p[i], newton: n[i], laplace_mode: l[i] })
        .collect())
}

fn class_header(prefix: &str, p: usize) -> Vec<String> {
    let mut h = vec![format!("mu{prefix}")];
    h.extend((1..=p).map(|j| format!("beta{prefix}_{j}")));
    h.extend(["tau2", "sigma2", "phi"].iter().map(|s| format!("{s}{prefix}")));
    h
}

fn class_row(s: &TypicalState) -> Vec<String> {
    let mut r = vec![format_f64(s.mu)];
    r.extend(s.beta.iter().map(|&b| format_f64(b)));
    r.extend([s.tau2, s.theta.sigma2, s.theta.phi].iter().map(|&v| format_f64(v)));
    r
}

/// Writes `meta.toml`, `scalars.csv`, `factorizations.csv` and `w.bin`.
pub fn write_typical_draws(draws: &ChainDraws<TypicalState>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let p = draws.centering.means.len();
    let k = draws.states.first().map_or(0, |s| s.w.len());
    write_toml(&meta(draws, "typical", p, k, 0), &dir.join("meta.toml"))?;
    let mut header = vec!["iteration".to_string()];
    header.extend(class_header("", p));
    write_table(
        &dir.join("scalars.csv"),
        &header,
        draws.states.iter().enumerate().map(|(m, s)| {
            let mut r = vec![iteration_of(draws, m).to_string()];
            r.extend(class_row(s));
            r
        }),
    )?;
    write_factorizations(draws, dir)?;
    let w: Vec<Vec<f64>> = draws.states.iter().map(|s| s.w.clone()).collect();
    write_matrix(&w, k, dir.join("w.bin"))
}

fn read_class(
    header: &[String],
    rows: &[Vec<f64>],
    prefix: &str,
    p: usize,
    w: Vec<Vec<f64>>,
    path: &Path,
) -> Result<Vec<TypicalState>> {
    let col = |name: String| -> Result<Vec<f64>> { Ok(column(header, rows, &name, path)?.collect()) };
    let mu = col(format!("mu{prefix}"))?;
    let betas = (1..=p).map(|j| col(format!("beta{prefix}_{j}"))).collect::<Result<Vec<_>>>()?;
    let tau2 = col(format!("tau2{prefix}"))?;
    let sigma2 = col(format!("sigma2{prefix}"))?;
    let phi = col(format!("phi{prefix}"))?;
    if w.len() != rows.len() {
        return Err(Error::CountMismatch { path: path.to_path_buf(), expected: rows.len(), found: w.len() });
    }
    Ok(w.into_iter()
        .enumerate()
        .map(|(m, w)| TypicalState {
            mu: mu[m],
            beta: betas.iter().map(|b| b[m]).collect(),
            w,
            theta: MaternParams { sigma2: sigma2[m], phi: phi[m] },
            tau2: tau2[m],
        })
        .collect())
}

fn chain_draws<S>(meta: DrawsMeta, states: Vec<S>, factorizations: Vec<FactorizationCounts>) -> ChainDraws<S> {
    ChainDraws {
        states,
        seed: meta.seed,
        chain: meta.chain,
        burn_in: meta.burn_in,
        thin: meta.thin,
        centering: meta.centering,
        acceptance: meta.acceptance,
        factorizations,
    }
}

pub fn read_meta(dir: impl AsRef<Path>) -> Result<DrawsMeta> {
    read_toml(&dir.as_ref().join("meta.toml"))
}

pub fn read_typical_draws(dir: impl AsRef<Path>) -> Result<ChainDraws<TypicalState>> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let path = dir.join("scalars.csv");
    let (header, rows) = read_table(&path)?;
    let w = read_matrix(dir.join("w.bin"))?;
    let states = read_class(&header, &rows, "", meta.num_covariates, w, &path)?;
    Ok(chain_draws(meta, states, read_factorizations(dir)?))
}

/// Writes `meta.toml`, `scalars.csv`, `factorizations.csv`, the effect
/// matrices `w0.bin`, `w1.bin`, `wz.bin` and the label matrix `z.bin`.
pub fn write_mixture_draws(draws: &ChainDraws<MixtureState>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let p = draws.centering.means.len();
    let k = draws.states.first().map_or(0, |s| s.w_z.len());
    let n = draws.states.first().map_or(0, |s| s.z.len());
    write_toml(&meta(draws, "mixture", p, k, n), &dir.join("meta.toml"))?;
    let mut header = vec!["iteration".to_string()];
    header.extend(class_header("_0", p));
    header.extend(class_header("_1", p));
    header.push("mu_z".into());
    header.extend((1..=p).map(|j| format!("beta_z_{j}")));
    header.extend(["sigma2_z", "phi_z", "class1_count"].iter().map(|s| s.to_string()));
    write_table(
        &dir.join("scalars.csv"),
        &header,
        draws.states.iter().enumerate().map(|(m, s)| {
            let mut r = vec![iteration_of(draws, m).to_string()];
            r.extend(class_row(&s.classes[0]));
            r.extend(class_row(&s.classes[1]));
            r.push(format_f64(s.mu_z));
            r.extend(s.beta_z.iter().map(|&b| format_f64(b)));
            r.push(format_f64(s.theta_z.sigma2));
            r.push(format_f64(s.theta_z.phi));
            r.push(s.z.iter().map(|&z| usize::from(z)).sum::<usize>().to_string());
            r
        }),
    )?;
    write_factorizations(draws, dir)?;
    let grab = |f: &dyn Fn(&MixtureState) -> Vec<f64>| -> Vec<Vec<f64>> { draws.states.iter().map(f).collect() };
    write_matrix(&grab(&|s| s.classes[0].w.clone()), k, dir.join("w0.bin"))?;
    write_matrix(&grab(&|s| s.classes[1].w.clone()), k, dir.join("w1.bin"))?;
    write_matrix(&grab(&|s| s.w_z.clone()), k, dir.join("wz.bin"))?;
    write_matrix(&grab(&|s| s.z.iter().map(|&z| f64::from(z)).collect()), n, dir.join("z.bin"))
}

pub fn read_mixture_draws(dir: impl AsRef<Path>) -> Result<ChainDraws<MixtureState>> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let p = meta.num_covariates;
    let path = dir.join("scalars.csv");
    let (header, rows) = read_table(&path)?;
    let c0 = read_class(&header, &rows, "_0", p, read_matrix(dir.join("w0.bin"))?, &path)?;
    let c1 = read_class(&header, &rows, "_1", p, read_matrix(dir.join("w1.bin"))?, &path)?;
    let wz = read_matrix(dir.join("wz.bin"))?;
    let z = read_matrix(dir.join("z.bin"))?;
    let col = |name: String| -> Result<Vec<f64>> { Ok(column(&header, &rows, &name, &path)?.collect()) };
    let mu_z = col("mu_z".into())?;
    let beta_z = (1..=p).map(|j| col(format!("beta_z_{j}"))).collect::<Result<Vec<_>>>()?;
    let sigma2_z = col("sigma2_z".into())?;
    let phi_z = col("phi_z".into())?;
    if wz.len() != rows.len() || z.len() != rows.len() {
        return Err(Error::CountMismatch {
            path: dir.to_path_buf(),
            expected: rows.len(),
            found: wz.len().min(z.len()),
        });
    }
    let states = c0
        .into_iter()
        .zip(c1)
        .zip(wz.into_iter().zip(z))
        .enumerate()
        .map(|(m, ((c0, c1), (w_z, z)))| MixtureState {
            z: z.iter().map(|&v| u8::from(v != 0.0)).collect(),
            classes: [c0, c1],
            mu_z: mu_z[m],
            beta_z: beta_z.iter().map(|b| b[m]).collect(),
            w_z,
            theta_z: MaternParams { sigma2: sigma2_z[m], phi: phi_z[m] },
        })
        .collect();
    Ok(chain_draws(meta, states, read_factorizations(dir)?))
}

/// Directory of chain `c` below `out_dir`.
pub fn chain_dir(out_dir: &Path, chain: u64) -> PathBuf {
    out_dir.join(format!("chain_{chain}"))
}

/// Writes `name,value` rows.
pub fn write_key_values(rows: &[(String, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_table(
        path,
        &["name".to_string(), "value".to_string()],
        rows.iter().map(|(k, v)| vec![k.clone(), format_f64(*v)]),
    )
}

/// Writes a table of numeric columns.
pub fn write_columns(header: &[&str], columns: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = columns.first().map_or(0, Vec::len);
    write_table(
        path,
        &header.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        (0..n).map(|i| columns.iter().map(|c| format_f64(c[i])).collect()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
