//! Datasets: on-disk directory format and a stochastic block model generator.
//!
//! A dataset directory holds
//! - `graph.tsv`: one undirected edge `u<TAB>v` per line, 0-based;
//! - `features.csv` (one comma-separated row per node) or `features.bin`
//!   (`PASCAF1`, u64 n, u64 d, little-endian f32 row-major);
//! - `labels.csv`: one class index per line;
//! - `split.json`: `{"train": [..], "val": [..], "test": [..]}`.

use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Result, SgapError};
use crate::graph::{hex_digest, load_edge_list, ByteReader, GraphCSR};
use crate::matrix::Matrix;
use crate::model::Splits;

pub const FEATURES_MAGIC: &[u8; 7] = b"PASCAF1";

#[derive(Debug)]
pub struct Dataset {
    pub graph: GraphCSR,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub splits: Splits,
    pub num_classes: usize,
    fingerprint: OnceLock<String>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Dataset {
            graph: self.graph.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
            num_classes: self.num_classes,
            fingerprint: self.fingerprint.clone(),
        }
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.features.bitwise_eq(&other.features)
            && self.labels == other.labels
            && self.splits == other.splits
            && self.num_classes == other.num_classes
    }
}

impl Dataset {
    pub fn new(
        graph: GraphCSR,
        features: Matrix,
        labels: Vec<usize>,
        splits: Splits,
        num_classes: usize,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(SgapError::Validation(format!(
                "features have {} rows but the graph has {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(SgapError::Validation(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(SgapError::Validation(format!(
                "label {bad} >= num_classes {num_classes}"
            )));
        }
        if !features.is_finite() {
            return Err(SgapError::Validation("features contain NaN or infinity".into()));
        }
        splits.validate(n)?;
        Ok(Dataset {
            graph,
            features,
            labels,
            splits,
            num_classes,
            fingerprint: OnceLock::new(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    /// SHA-256 over graph and features; keys the propagation cache.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint.get_or_init(|| {
            let mut h = Sha256::new();
            h.update(self.graph.to_bytes());
            h.update((self.features.rows() as u64).to_le_bytes());
            h.update((self.features.cols() as u64).to_le_bytes());
            for v in self.features.as_slice() {
                h.update(v.to_le_bytes());
            }
            hex_digest(&h.finalize())
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Bin,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SgapError::io(path, e))
}

fn format_err(path: &Path, message: impl Into<String>) -> SgapError {
    SgapError::Format {
        path: path.into(),
        message: message.into(),
    }
}

pub fn parse_features_csv(text: &str, path: &Path) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Matrix::from_rows(&rows).map_err(|e| format_err(path, e.to_string()))
}

pub fn parse_features_bin(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let mut r = ByteReader::new(bytes);
    if r.take(7) != Some(&FEATURES_MAGIC[..]) {
        return Err(format_err(path, "bad magic, expected PASCAF1"));
    }
    let n = r.u64().ok_or_else(|| format_err(path, "truncated header"))? as usize;
    let d = r.u64().ok_or_else(|| format_err(path, "truncated header"))? as usize;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| format_err(path, "header overflow"))?;
    if Some(r.remaining()) != count.checked_mul(4) {
        return Err(format_err(path, "payload length does not match header"));
    }
    let data = (0..count).map(|_| r.f32().unwrap() as f64).collect();
    Matrix::from_vec(n, d, data)
}

pub fn features_to_bin(features: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(7 + 16 + 4 * features.as_slice().len());
    out.extend_from_slice(FEATURES_MAGIC);
    out.extend_from_slice(&(features.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(features.cols() as u64).to_le_bytes());
    for &v in features.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn features_to_csv(features: &Matrix) -> String {
    let mut s = String::new();
    for v in 0..features.rows() {
        let row: Vec<String> = features.row(v).iter().map(|x| format!("{x:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let labels_path = dir.join("labels.csv");
    let labels = read_text(&labels_path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| format_err(&labels_path, format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = labels.len();
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);

    let graph_path = dir.join("graph.tsv");
    let graph = load_edge_list(&read_text(&graph_path)?, n).map_err(|e| match e {
        SgapError::Parse { line, message } => format_err(&graph_path, format!("line {line}: {message}")),
        other => other,
    })?;

    let csv = dir.join("features.csv");
    let bin = dir.join("features.bin");
    let features = if csv.exists() {
        parse_features_csv(&read_text(&csv)?, &csv)?
    } else if bin.exists() {
        let bytes = std::fs::read(&bin).map_err(|e| SgapError::io(&bin, e))?;
        parse_features_bin(&bytes, &bin)?
    } else {
        return Err(SgapError::io(
            &csv,
            std::io::Error::new(std::io::ErrorKind::NotFound, "neither features.csv nor features.bin found"),
        ));
    };

    let split_path = dir.join("split.json");
    let splits: Splits = serde_json::from_str(&read_text(&split_path)?)
        .map_err(|e| format_err(&split_path, e.to_string()))?;
    Dataset::new(graph, features, labels, splits, num_classes)
}

pub fn save_dataset(dir: &Path, ds: &Dataset, format: FeatureFormat) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SgapError::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| SgapError::io(&p, e))
    };
    let mut edges = String::new();
    for u in 0..ds.graph.num_nodes() {
        for &v in ds.graph.neighbors(u) {
            if u < v {
                edges.push_str(&format!("{u}\t{v}\n"));
            }
        }
    }
    write("graph.tsv", edges.as_bytes())?;
    match format {
        FeatureFormat::Csv => write("features.csv", features_to_csv(&ds.features).as_bytes())?,
        FeatureFormat::Bin => write("features.bin", &features_to_bin(&ds.features))?,
    }
    let labels: String = ds.labels.iter().map(|y| format!("{y}\n")).collect();
    write("labels.csv", labels.as_bytes())?;
    write("split.json", serde_json::to_string(&ds.splits)?.as_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbmParams {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub d: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams {
            n: 400,
            blocks: 2,
            p_in: 0.05,
            p_out: 0.01,
            d: 8,
            noise: 1.0,
            seed: 0,
        }
    }
}

/// Block of node `v`: nodes are assigned to blocks in contiguous ranges.
pub fn sbm_block(v: usize, n: usize, blocks: usize) -> usize {
    v * blocks / n
}

/// Stochastic block model with Gaussian block-mean features and a 60/20/20
/// split. Labels are block ids. Deterministic per seed.
pub fn synth_sbm(p: &SbmParams) -> Result<Dataset> {
    let bad = |m: String| Err(SgapError::Parameter(m));
    if p.blocks == 0 || p.n < p.blocks {
        return bad(format!("need n >= blocks >= 1, got n={} blocks={}", p.n, p.blocks));
    }
    if !(0.0..=1.0).contains(&p.p_out) || !(0.0..=1.0).contains(&p.p_in) || p.p_in <= p.p_out {
        return bad(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
            p.p_in, p.p_out
        ));
    }
    if p.d == 0 {
        return bad("feature dimension must be positive".into());
    }
    if p.noise < 0.0 || !p.noise.is_finite() {
        return bad(format!("noise must be a finite non-negative number, got {}", p.noise));
    }
    let mut rng = crate::model_rng(p.seed, 7);
    let block: Vec<usize> = (0..p.n).map(|v| sbm_block(v, p.n, p.blocks)).collect();
    let mut edges = Vec::new();
    for u in 0..p.n {
        for v in (u + 1)..p.n {
            let prob = if block[u] == block[v] { p.p_in } else { p.p_out };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    let graph = GraphCSR::from_edges(p.n, edges)?;
    let means: Vec<Vec<f64>> = (0..p.blocks)
        .map(|_| (0..p.d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let features = Matrix::from_fn(p.n, p.d, |v, j| {
        let z: f64 = rng.sample(StandardNormal);
        means[block[v]][j] + p.noise * z
    });
    let mut order: Vec<usize> = (0..p.n).collect();
    order.shuffle(&mut rng);
    let n_train = p.n * 6 / 10;
    let n_val = p.n * 2 / 10;
    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Dataset::new(graph, features, block, splits, p.blocks)
}
