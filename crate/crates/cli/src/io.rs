//! Flat-file formats and run manifests.
//!
//! All CSV files are headerless and comma-separated. Floats are written in
//! the shortest decimal form that parses back to the identical double, so
//! write-then-read round-trips are exact. Matrices are one row per line;
//! labels and weights are single columns; edge lists are `i,j,value` with
//! 0-based indices and `i < j`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use trimglasso_core::{EdgeSet, SampleSet, SymMatrix};

/// FNV-1a 64-bit content hash; the digest recorded in manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn file_digest(path: &Path) -> Result<u64> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(fnv1a64(&bytes))
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<()> {
    let p = m.dim();
    let mut out = String::new();
    for i in 0..p {
        for j in 0..p {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&m.get(i, j).to_string());
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let rows = read_float_rows(path)?;
    SymMatrix::from_rows(&rows)
        .map_err(|e| anyhow::anyhow!("{}: not a symmetric matrix ({e})", path.display()))
}

pub fn write_samples(path: &Path, s: &SampleSet) -> Result<()> {
    let mut out = String::new();
    for i in 0..s.n() {
        let row = s.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let rows = read_float_rows(path)?;
    if rows.is_empty() {
        bail!("{}: no rows", path.display());
    }
    let p = rows[0].len();
    SampleSet::from_rows(&rows, p)
        .map_err(|e| anyhow::anyhow!("{}: bad sample data ({e})", path.display()))
}

fn read_float_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{}: bad float {f:?}", path.display(), lineno + 1))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Single column of 0/1 flags.
pub fn write_labels(path: &Path, labels: &[bool]) -> Result<()> {
    let mut out = String::new();
    for &b in labels {
        out.push(if b { '1' } else { '0' });
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Single column of floats.
pub fn write_column(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::new();
    for v in values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Edge list `i,j,value` with `i < j`, taking values from the matrix.
pub fn write_edges(path: &Path, edges: &EdgeSet, values: &SymMatrix) -> Result<()> {
    let mut out = String::new();
    for (i, j) in edges.iter() {
        out.push_str(&format!("{i},{j},{}\n", values.get(i, j)));
    }
    write_atomic(path, &out)
}

/// Reads an edge list (`i,j[,value]` lines) as an edge set over `p` nodes.
pub fn read_edge_set(path: &Path, p: usize) -> Result<EdgeSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |part: Option<&str>| -> Result<usize> {
            part.with_context(|| format!("{}:{}: missing index", path.display(), lineno + 1))?
                .trim()
                .parse::<usize>()
                .with_context(|| format!("{}:{}: bad index", path.display(), lineno + 1))
        };
        let i = parse(parts.next())?;
        let j = parse(parts.next())?;
        pairs.push((i, j));
    }
    EdgeSet::from_pairs(p, pairs)
        .map_err(|e| anyhow::anyhow!("{}: bad edge list ({e})", path.display()))
}

/// Writes generic CSV rows (headerless).
pub fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Flat key=value text files (stationarity reports, best-cell summaries).
pub fn write_kv(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k}={v}\n"));
    }
    write_atomic(path, &out)
}

/// A run manifest: the command, its full parameter map, input/output file
/// digests, and the wall-clock duration. Written atomically alongside the
/// outputs; identical inputs and parameters reproduce identical output
/// digests.
pub struct RunManifest {
    command: String,
    params: BTreeMap<String, String>,
    inputs: Vec<(String, u64)>,
    outputs: Vec<(String, u64)>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            params: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.push((file_name(path), digest));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.outputs.push((file_name(path), digest));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("command={}\n", self.command));
        out.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
        for (k, v) in &self.params {
            out.push_str(&format!("param.{k}={v}\n"));
        }
        for (name, digest) in &self.inputs {
            out.push_str(&format!("input.{name}={digest:016x}\n"));
        }
        for (name, digest) in &self.outputs {
            out.push_str(&format!("output.{name}={digest:016x}\n"));
        }
        out.push_str(&format!(
            "duration_ms={}\n",
            self.started.elapsed().as_millis()
        ));
        write_atomic(path, &out)
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

/// Per-column z-score transform. Returns the standardized samples and the
/// (mean, sd) per column; columns with zero spread pass through unscaled.
/// The sd uses the n-1 normalization.
pub fn standardize(s: &SampleSet) -> (SampleSet, Vec<(f64, f64)>) {
    let n = s.n();
    let p = s.p();
    let mut stats = Vec::with_capacity(p);
    for j in 0..p {
        let mean = (0..n).map(|i| s.row(i)[j]).sum::<f64>() / n as f64;
        let var = if n > 1 {
            (0..n).map(|i| (s.row(i)[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        stats.push((mean, if sd > 0.0 { sd } else { 1.0 }));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            s.row(i)
                .iter()
                .enumerate()
                .map(|(j, &v)| (v - stats[j].0) / stats[j].1)
                .collect()
        })
        .collect();
    let out = SampleSet::from_rows(&rows, p).expect("standardized rows stay finite");
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_vectors() {
        // well-known FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn matrix_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = SymMatrix::from_rows(&[
            vec![1.0 / 3.0, -2.5e-17],
            vec![-2.5e-17, 9.007199254740993e15],
        ])
        .unwrap();
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn samples_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![vec![0.1, 0.2, -0.3], vec![1e-300, 2.0f64.powi(-52), 3.0]];
        let s = SampleSet::from_rows(&rows, 3).unwrap();
        write_samples(&path, &s).unwrap();
        let back = read_samples(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
        assert!(read_samples(&path).is_err());
        std::fs::write(&path, "1,2\nx,4\n").unwrap();
        assert!(read_samples(&path).is_err());
    }

    #[test]
    fn standardize_zero_mean_unit_sd() {
        let rows = vec![
            vec![1.0, 10.0],
            vec![2.0, 10.0],
            vec![3.0, 10.0],
            vec![6.0, 10.0],
        ];
        let s = SampleSet::from_rows(&rows, 2).unwrap();
        let (z, stats) = standardize(&s);
        let mean0: f64 = (0..4).map(|i| z.row(i)[0]).sum::<f64>() / 4.0;
        assert!(mean0.abs() < 1e-12);
        let var0: f64 = (0..4).map(|i| z.row(i)[0].powi(2)).sum::<f64>() / 3.0;
        assert!((var0 - 1.0).abs() < 1e-12);
        // constant column passes through with sd 1
        assert_eq!(stats[1].1, 1.0);
        assert_eq!(z.row(0)[1], 0.0);
    }

    #[test]
    fn manifest_format() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("x.csv");
        std::fs::write(&data, "1,2\n").unwrap();
        let mut m = RunManifest::new("fit");
        m.param("lambda", 0.25);
        m.input(&data).unwrap();
        m.output(&data).unwrap();
        let path = dir.path().join("manifest.txt");
        m.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("command=fit\n"));
        assert!(text.contains("param.lambda=0.25\n"));
        assert!(text.contains(&format!("input.x.csv={:016x}\n", fnv1a64(b"1,2\n"))));
        assert!(text.contains("duration_ms="));
    }
}
