//! Compressed sparse row storage for simple undirected graphs.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, SgapError};

pub const GRAPH_MAGIC: &[u8; 6] = b"SGAPG1";

/// Undirected graph in CSR form. Every edge is stored in both directions.
///
/// `edge_weight == None` means unit weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphCSR {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    edge_weight: Option<Vec<f64>>,
}

impl GraphCSR {
    /// Builds a CSR from raw arrays, checking every structural invariant.
    pub fn from_parts(
        num_nodes: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        edge_weight: Option<Vec<f64>>,
    ) -> Result<Self> {
        let g = GraphCSR {
            num_nodes,
            row_ptr,
            col_idx,
            edge_weight,
        };
        g.validate()?;
        Ok(g)
    }

    /// Builds a symmetric, duplicate-free unit-weight graph from an edge list.
    /// Self-loops are dropped.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_nodes];
        for (u, v) in edges {
            for x in [u, v] {
                if x >= num_nodes {
                    return Err(SgapError::NodeRange {
                        index: x,
                        num_nodes,
                    });
                }
            }
            if u == v {
                continue;
            }
            adj[u].insert(v);
            adj[v].insert(u);
        }
        Ok(Self::from_adjacency(adj))
    }

    fn from_adjacency(adj: Vec<BTreeSet<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(adj.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &adj {
            col_idx.extend(row.iter().copied());
            row_ptr.push(col_idx.len());
        }
        GraphCSR {
            num_nodes: adj.len(),
            row_ptr,
            col_idx,
            edge_weight: None,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Stored (directed) entries; twice the undirected edge count for loop-free graphs.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn edge_weight(&self) -> Option<&[f64]> {
        self.edge_weight.as_deref()
    }

    pub fn is_weighted(&self) -> bool {
        self.edge_weight.is_some()
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    /// `(neighbor, weight)` pairs of row `v` in CSR order.
    pub fn row(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[v]..self.row_ptr[v + 1];
        let w = self.edge_weight.as_deref();
        range.map(move |e| (self.col_idx[e], w.map_or(1.0, |w| w[e])))
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let nb = self.neighbors(u);
        nb.binary_search(&v).ok().map(|pos| {
            self.edge_weight
                .as_ref()
                .map_or(1.0, |w| w[self.row_ptr[u] + pos])
        })
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.num_nodes).any(|v| self.neighbors(v).binary_search(&v).is_ok())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.row_ptr.len() != n + 1 {
            return Err(SgapError::Invariant(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                n + 1
            )));
        }
        if self.row_ptr[0] != 0 || self.row_ptr[n] != self.col_idx.len() {
            return Err(SgapError::Invariant("row_ptr endpoints".into()));
        }
        if self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(SgapError::Invariant("row_ptr must be non-decreasing".into()));
        }
        if let Some(w) = &self.edge_weight {
            if w.len() != self.col_idx.len() {
                return Err(SgapError::Invariant("edge_weight length".into()));
            }
            if w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(SgapError::Invariant(
                    "edge weights must be finite and non-negative".into(),
                ));
            }
        }
        for v in 0..n {
            let nb = self.neighbors(v);
            if let Some(&bad) = nb.iter().find(|&&u| u >= n) {
                return Err(SgapError::NodeRange {
                    index: bad,
                    num_nodes: n,
                });
            }
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SgapError::Invariant(format!(
                    "row {v} indices not strictly increasing"
                )));
            }
        }
        for v in 0..n {
            for (u, w) in self.row(v) {
                match self.weight(u, v) {
                    Some(back) if back == w => {}
                    _ => {
                        return Err(SgapError::Invariant(format!(
                            "edge ({v},{u}) has no symmetric counterpart of equal weight"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of connected components (isolated nodes count as components).
    pub fn num_components(&self) -> usize {
        let n = self.num_nodes;
        let mut seen = vec![false; n];
        let mut stack = Vec::new();
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    /// Serializes to the `SGAPG1` binary layout: magic, u64 num_nodes, u64 nnz,
    /// row_ptr (u64), col_idx (u64), weights (f64), all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.num_nodes;
        let nnz = self.nnz();
        let mut out = Vec::with_capacity(6 + 16 + 8 * (n + 1 + 2 * nnz));
        out.extend_from_slice(GRAPH_MAGIC);
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(nnz as u64).to_le_bytes());
        for &p in &self.row_ptr {
            out.extend_from_slice(&(p as u64).to_le_bytes());
        }
        for &c in &self.col_idx {
            out.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for e in 0..nnz {
            let w = self.edge_weight.as_ref().map_or(1.0, |w| w[e]);
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    /// Parses the `SGAPG1` layout. All-unit weights are read back as an
    /// unweighted graph.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| SgapError::Format {
            path: "<graph cache>".into(),
            message: m.to_string(),
        };
        let mut r = ByteReader::new(bytes);
        if r.take(6).ok_or_else(|| bad("truncated magic"))? != GRAPH_MAGIC {
            return Err(bad("bad magic"));
        }
        let n = r.u64().ok_or_else(|| bad("truncated header"))? as usize;
        let nnz = r.u64().ok_or_else(|| bad("truncated header"))? as usize;
        let expected = 8usize
            .checked_mul(n + 1 + 2 * nnz)
            .ok_or_else(|| bad("header overflow"))?;
        if r.remaining() != expected {
            return Err(bad("payload length does not match header"));
        }
        let row_ptr = (0..=n).map(|_| r.u64().unwrap() as usize).collect();
        let col_idx = (0..nnz).map(|_| r.u64().unwrap() as usize).collect();
        let weights: Vec<f64> = (0..nnz).map(|_| r.f64().unwrap()).collect();
        let edge_weight = if weights.iter().all(|&w| w == 1.0) {
            None
        } else {
            Some(weights)
        };
        GraphCSR::from_parts(n, row_ptr, col_idx, edge_weight)
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| SgapError::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| SgapError::io(path, e))
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| SgapError::io(path, e))?;
        Self::from_bytes(&buf).map_err(|e| match e {
            SgapError::Format { message, .. } => SgapError::Format {
                path: path.into(),
                message,
            },
            other => other,
        })
    }

    /// SHA-256 of the binary layout, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex_digest(&Sha256::digest(self.to_bytes()))
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parses a whitespace-separated `u v` edge list (0-based). Blank lines and
/// lines starting with `#` are ignored.
pub fn load_edge_list(text: &str, num_nodes: usize) -> Result<GraphCSR> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| SgapError::Parse {
                line: lineno + 1,
                message: "expected two node indices".into(),
            })?;
            tok.parse::<usize>().map_err(|e| SgapError::Parse {
                line: lineno + 1,
                message: format!("`{tok}`: {e}"),
            })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(SgapError::Parse {
                line: lineno + 1,
                message: "trailing tokens".into(),
            });
        }
        edges.push((u, v));
    }
    GraphCSR::from_edges(num_nodes, edges)
}

/// d̃_v = deg(v) + 1: degrees of the adjacency with self-connections added.
pub fn augmented_degrees(g: &GraphCSR) -> Vec<f64> {
    (0..g.num_nodes()).map(|v| g.degree(v) as f64 + 1.0).collect()
}

/// Reweights every edge `(u, v)` by `|N(u) ∩ N(v)|`, the number of triangles
/// containing it. Edges in no triangle keep a zero weight.
pub fn count_edge_triangles(g: &GraphCSR) -> Result<GraphCSR> {
    if g.has_self_loops() {
        return Err(SgapError::Invariant(
            "triangle counting requires a graph without self-loops".into(),
        ));
    }
    let mut weights = Vec::with_capacity(g.nnz());
    for u in 0..g.num_nodes() {
        let nu = g.neighbors(u);
        for &v in nu {
            weights.push(sorted_intersection_len(nu, g.neighbors(v)) as f64);
        }
    }
    Ok(GraphCSR {
        num_nodes: g.num_nodes,
        row_ptr: g.row_ptr.clone(),
        col_idx: g.col_idx.clone(),
        edge_weight: Some(weights),
    })
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
