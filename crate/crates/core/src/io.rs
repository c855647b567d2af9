//! Plain-text file formats. Floats are written in Rust's shortest round-trip
//! notation, so every save/load pair is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{PointCloud, WeightedGraph};
use crate::samplets::{CoefficientKind, CoefficientTag};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a headerless or headed numeric CSV, returning `(line, fields)` rows.
fn read_csv_rows(path: &Path, header: Option<&[&str]>) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header.is_some())
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    if let Some(want) = header {
        let got = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .clone();
        if got.iter().ne(want.iter().copied()) {
            return Err(Error::parse(path, 1, format!("expected header `{}`", want.join(","))));
        }
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, k: usize) -> Result<T> {
    let raw = rec
        .get(k)
        .ok_or_else(|| Error::parse(path, line, format!("missing column {}", k + 1)))?;
    raw.parse()
        .map_err(|_| Error::parse(path, line, format!("cannot parse `{raw}` in column {}", k + 1)))
}

/// Point cloud CSV: one point per row, `d` columns, no header.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let rows = read_csv_rows(path, None)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::parse(path, 1, "point cloud file is empty"));
    };
    let d = first.len();
    let mut flat = Vec::with_capacity(rows.len() * d);
    for (line, rec) in &rows {
        if rec.len() != d {
            return Err(Error::parse(path, *line, format!("expected {d} columns, found {}", rec.len())));
        }
        for k in 0..d {
            let x: f64 = field(path, *line, rec, k)?;
            if !x.is_finite() {
                return Err(Error::parse(path, *line, "coordinates must be finite"));
            }
            flat.push(x);
        }
    }
    PointCloud::from_flat(d, flat)
}

pub fn save_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    for p in cloud.points() {
        w.write_record(p.iter().map(|&x| fmt_f64(x)))?;
    }
    finish(w, path)
}

/// Edge list: header `n m`, then one `u v w` line per edge with `u < v`.
pub fn save_graph(path: impl AsRef<Path>, graph: &WeightedGraph) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", graph.n(), graph.edge_count()).map_err(io)?;
    for (u, v, weight) in graph.edges() {
        writeln!(w, "{u} {v} {}", fmt_f64(weight)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    let path = path.as_ref();
    let mut lines = open(path)?.lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((i, line)) => Ok(Some((i + 1, line.map_err(|e| Error::io(path, e))?))),
        }
    };
    let Some((_, header)) = next()? else {
        return Err(Error::parse(path, 1, "graph file is empty"));
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(path, line, format!("cannot parse `{s}` as an integer")))
    };
    if head.len() != 2 {
        return Err(Error::parse(path, 1, "header must be `n m`"));
    }
    let (n, m) = (parse_usize(head[0], 1)?, parse_usize(head[1], 1)?);
    let mut edges = Vec::with_capacity(m);
    while let Some((line, text)) = next()? {
        if text.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(path, line, "edge lines must be `u v w`"));
        }
        let (u, v) = (parse_usize(parts[0], line)?, parse_usize(parts[1], line)?);
        let w: f64 = parts[2]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("cannot parse weight `{}`", parts[2])))?;
        if u >= v {
            return Err(Error::parse(path, line, "edges must be listed with u < v"));
        }
        edges.push((u, v, w));
    }
    if edges.len() != m {
        return Err(Error::parse(path, 1, format!("header announces {m} edges but {} were found", edges.len())));
    }
    WeightedGraph::from_edges(n, edges)
}

/// Partition CSV with header `vertex_id,patch_id`.
pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["vertex_id", "patch_id"])?;
    for (v, l) in labels.iter().enumerate() {
        w.write_record([v.to_string(), l.to_string()])?;
    }
    finish(w, path)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let rows = read_csv_rows(path, Some(&["vertex_id", "patch_id"]))?;
    let mut labels = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let v: usize = field(path, line, &rec, 0)?;
        if v != labels.len() {
            return Err(Error::parse(path, line, format!("expected vertex {} but found {v}", labels.len())));
        }
        labels.push(field(path, line, &rec, 1)?);
    }
    Ok(labels)
}

/// Embedding CSV with header `vertex_id,y_1,...,y_q`; one row per patch vertex.
pub fn save_embedding(path: impl AsRef<Path>, vertices: &[usize], coords: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["vertex_id".to_string()];
    header.extend((1..=coords.ncols()).map(|k| format!("y_{k}")));
    w.write_record(&header)?;
    for (i, &v) in vertices.iter().enumerate() {
        let mut row = vec![v.to_string()];
        row.extend(coords.row(i).iter().map(|&x| fmt_f64(x)));
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let path = path.as_ref();
    let mut first = String::new();
    open(path)?.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let q = first.trim().split(',').count().saturating_sub(1);
    let names: Vec<String> = std::iter::once("vertex_id".to_string())
        .chain((1..=q).map(|k| format!("y_{k}")))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows = read_csv_rows(path, Some(&header))?;
    let mut vertices = Vec::with_capacity(rows.len());
    let mut flat = Vec::with_capacity(rows.len() * q);
    for (line, rec) in &rows {
        if rec.len() != q + 1 {
            return Err(Error::parse(path, *line, format!("expected {} columns, found {}", q + 1, rec.len())));
        }
        vertices.push(field(path, *line, rec, 0)?);
        for k in 1..=q {
            flat.push(field(path, *line, rec, k)?);
        }
    }
    Ok((vertices, DMatrix::from_row_slice(rows.len(), q, &flat)))
}

/// Signal CSV with header `vertex_id,value`.
pub fn save_signal(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["vertex_id", "value"])?;
    for (v, &x) in values.iter().enumerate() {
        w.write_record([v.to_string(), fmt_f64(x)])?;
    }
    finish(w, path)
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let rows = read_csv_rows(path, Some(&["vertex_id", "value"]))?;
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let v: usize = field(path, line, &rec, 0)?;
        if v != values.len() {
            return Err(Error::parse(path, line, format!("expected vertex {} but found {v}", values.len())));
        }
        values.push(field(path, line, &rec, 1)?);
    }
    Ok(values)
}

const COEFF_HEADER: [&str; 6] = ["patch", "node_id", "level", "kind", "local_index", "value"];

/// Coefficient dump: one row per coefficient in forest layout.
pub fn save_coefficients(path: impl AsRef<Path>, tags: &[CoefficientTag], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(COEFF_HEADER)?;
    for (t, &x) in tags.iter().zip(values) {
        w.write_record([
            t.patch.to_string(),
            t.node.to_string(),
            t.level.to_string(),
            t.kind.as_str().to_string(),
            t.local_index.to_string(),
            fmt_f64(x),
        ])?;
    }
    finish(w, path)
}

pub fn load_coefficients(path: impl AsRef<Path>) -> Result<(Vec<CoefficientTag>, Vec<f64>)> {
    let path = path.as_ref();
    let rows = read_csv_rows(path, Some(&COEFF_HEADER))?;
    let mut tags = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let kind = match rec.get(3) {
            Some("scaling") => CoefficientKind::Scaling,
            Some("samplet") => CoefficientKind::Samplet,
            other => return Err(Error::parse(path, line, format!("unknown coefficient kind {other:?}"))),
        };
        tags.push(CoefficientTag {
            patch: field(path, line, &rec, 0)?,
            node: field(path, line, &rec, 1)?,
            level: field(path, line, &rec, 2)?,
            kind,
            local_index: field(path, line, &rec, 4)?,
        });
        values.push(field(path, line, &rec, 5)?);
    }
    Ok((tags, values))
}

/// Sparse coefficients: header `position,value`.
pub fn save_sparse(path: impl AsRef<Path>, kept: &[(usize, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["position", "value"])?;
    for &(k, x) in kept {
        w.write_record([k.to_string(), fmt_f64(x)])?;
    }
    finish(w, path)
}

pub fn load_sparse(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    let path = path.as_ref();
    let rows = read_csv_rows(path, Some(&["position", "value"]))?;
    rows.iter()
        .map(|(line, rec)| Ok((field(path, *line, rec, 0)?, field(path, *line, rec, 1)?)))
        .collect()
}

/// Writes rows of any serializable record type with a header.
pub fn save_records<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    finish(w, path)
}

/// Pretty JSON with a trailing newline.
pub fn save_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    serde_json::from_reader(open(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}
