//! Seeded synthetic datasets and CSV ingestion.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::seeds::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Uniform in the unit d-ball.
    Ball,
    /// Uniform in `[0, 1]^d`.
    Cube,
    /// Standard normal.
    Gaussian,
    /// Uniform on the unit sphere in `R^d`.
    Sphere,
    /// Equal-weight mixture of unit-covariance Gaussians.
    Gmm,
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Kind> {
        Ok(match s {
            "ball" => Kind::Ball,
            "cube" => Kind::Cube,
            "gaussian" => Kind::Gaussian,
            "sphere" => Kind::Sphere,
            "gmm" => Kind::Gmm,
            other => return Err(Error::UnknownKind(other.into())),
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Ball => "ball",
            Kind::Cube => "cube",
            Kind::Gaussian => "gaussian",
            Kind::Sphere => "sphere",
            Kind::Gmm => "gmm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub components: usize,
    /// Means are drawn uniformly from `[mean_low, mean_high]^d`.
    pub mean_low: f64,
    pub mean_high: f64,
    pub std_dev: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        GmmParams {
            components: 5,
            mean_low: 0.0,
            mean_high: 4.0,
            std_dev: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub gmm: GmmParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: PointSet,
    pub labels: Option<Vec<i64>>,
    pub name: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }
}

/// Echoes everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: Kind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub params: GenParams,
    pub generator: String,
}

impl DatasetManifest {
    pub fn new(kind: Kind, n: usize, d: usize, seed: u64, params: &GenParams) -> Self {
        DatasetManifest {
            kind,
            n,
            d,
            seed,
            params: params.clone(),
            generator: "chacha20".into(),
        }
    }
}

fn normal_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Nonzero standard normal direction scaled to unit length.
fn unit_vec<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, d);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn generate(kind: Kind, n: usize, d: usize, seed: u64, params: &GenParams) -> Result<Dataset> {
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if d < 1 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::Generation, 0);
    let mut coords = Vec::with_capacity(n * d);
    let mut labels = None;
    match kind {
        Kind::Cube => coords.extend((0..n * d).map(|_| rng.random::<f64>())),
        Kind::Gaussian => {
            for _ in 0..n {
                coords.extend(normal_vec(&mut rng, d));
            }
        }
        Kind::Sphere => {
            if d == 1 {
                warn!("a sphere in one dimension is the two-point set {{-1, 1}}");
            }
            for _ in 0..n {
                coords.extend(unit_vec(&mut rng, d));
            }
        }
        Kind::Ball => {
            for _ in 0..n {
                let u = unit_vec(&mut rng, d);
                let r = rng.random::<f64>().powf(1.0 / d as f64);
                coords.extend(u.into_iter().map(|x| x * r));
            }
        }
        Kind::Gmm => {
            let g = &params.gmm;
            let ordered = g.mean_low <= g.mean_high;
            if g.components < 1 || !ordered || g.std_dev.is_nan() || g.std_dev < 0.0 {
                return Err(Error::InvalidArgument(format!("bad mixture parameters {g:?}")));
            }
            let means: Vec<Vec<f64>> = (0..g.components)
                .map(|_| {
                    (0..d)
                        .map(|_| g.mean_low + (g.mean_high - g.mean_low) * rng.random::<f64>())
                        .collect()
                })
                .collect();
            let mut lab = Vec::with_capacity(n);
            for _ in 0..n {
                let c = rng.random_range(0..g.components);
                lab.push(c as i64);
                let z = normal_vec(&mut rng, d);
                coords.extend(means[c].iter().zip(z).map(|(m, z)| m + g.std_dev * z));
            }
            labels = Some(lab);
        }
    }
    Ok(Dataset {
        points: PointSet::new(d, coords)?,
        labels,
        name: format!("{d}d{kind}"),
        seed,
    })
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let to_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: e.to_string(),
    };
    w.write_record(&header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Writes `x0,...,x{d-1}[,label]` with shortest round-trip decimals.
pub fn save_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let d = ds.dim();
    let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    let rows = (0..ds.len()).map(|i| {
        let mut row: Vec<String> = ds.points.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(l) = &ds.labels {
            row.push(l[i].to_string());
        }
        row
    });
    write_rows(path, header, rows)
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut header = None;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let cells: Vec<String> = rec.iter().map(str::to_owned).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 && cells.iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(cells);
            continue;
        }
        rows.push((line, cells));
    }
    Ok(Table { header, rows })
}

fn parse_cell(path: &Path, line: usize, cell: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("`{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("`{cell}` is not finite"),
        });
    }
    Ok(v)
}

fn check_width(path: &Path, line: usize, cells: &[String], width: usize) -> Result<()> {
    if cells.len() != width {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("row {line} has {} fields, expected {width}", cells.len()),
        });
    }
    Ok(())
}

/// Numeric CSV with an optional header; a last header column named
/// `label` holds integer classes.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let table = read_table(path)?;
    let Some((_, first)) = table.rows.first() else {
        return Err(Error::InsufficientData { needed: 3, got: 0 });
    };
    let width = table.header.as_ref().map_or(first.len(), Vec::len);
    let labelled = table
        .header
        .as_ref()
        .is_some_and(|h| h.last().is_some_and(|c| c == "label"));
    let d = if labelled { width - 1 } else { width };
    if d == 0 {
        return Err(Error::InvalidArgument(format!("{} has no coordinate columns", path.display())));
    }
    let mut coords = Vec::with_capacity(table.rows.len() * d);
    let mut labels = Vec::new();
    for (line, cells) in &table.rows {
        check_width(path, *line, cells, width)?;
        for cell in &cells[..d] {
            coords.push(parse_cell(path, *line, cell)?);
        }
        if labelled {
            let l = &cells[d];
            labels.push(l.parse::<i64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                msg: format!("label `{l}` is not an integer"),
            })?);
        }
    }
    let points = PointSet::new(d, coords)?;
    if points.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: points.len() });
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    Ok(Dataset {
        points,
        labels: labelled.then_some(labels),
        name,
        seed: 0,
    })
}

/// Writes `id,c0,...,c{d-1}`, one row per object.
pub fn save_positions(path: &Path, positions: &PointSet) -> Result<()> {
    let header = std::iter::once("id".to_string())
        .chain((0..positions.dim()).map(|k| format!("c{k}")))
        .collect();
    let rows = positions.rows().enumerate().map(|(i, r)| {
        std::iter::once(i.to_string())
            .chain(r.iter().map(|v| format!("{v}")))
            .collect()
    });
    write_rows(path, header, rows)
}

/// Reads a file written by [`save_positions`]; ids must run `0..n` in order.
pub fn load_positions(path: &Path) -> Result<PointSet> {
    let table = read_table(path)?;
    let header = table.header.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "expected a header starting with `id`".into(),
    })?;
    if header.first().map(String::as_str) != Some("id") || header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected a header `id,c0,...`".into(),
        });
    }
    let width = header.len();
    let mut coords = Vec::with_capacity(table.rows.len() * (width - 1));
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        check_width(path, *line, cells, width)?;
        if cells[0].parse::<usize>().ok() != Some(i) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                msg: format!("expected id {i}, found `{}`", cells[0]),
            });
        }
        for cell in &cells[1..] {
            coords.push(parse_cell(path, *line, cell)?);
        }
    }
    PointSet::new(width - 1, coords)
}
