//! K-step message propagation (the pre- and post-processing stages).
//!
//! Node rows are split into contiguous batches and computed on a dedicated
//! thread pool. Each output row reads only the previous step and is written
//! by exactly one task, so results are bitwise identical for every worker
//! count and batch size.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Result, SgapError};
use crate::graph::{hex_digest, ByteReader};
use crate::matrix::Matrix;
use crate::operator::PropagationOperator;

pub const STACK_MAGIC: &[u8; 6] = b"SGAPM1";
pub const CACHE_DIR_ENV: &str = "SGAP_CACHE_DIR";

/// Messages `m^0..=m^k` for every node; `steps[0]` is the unmodified input.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageStack {
    steps: Vec<Matrix>,
}

impl MessageStack {
    pub fn new(steps: Vec<Matrix>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| SgapError::Parameter("a message stack needs at least m^0".into()))?;
        let shape = first.shape();
        for (t, m) in steps.iter().enumerate() {
            if m.shape() != shape {
                return Err(SgapError::dim(
                    format!("{shape:?}"),
                    format!("step {t} shape {:?}", m.shape()),
                ));
            }
            if !m.is_finite() {
                return Err(SgapError::Numerical(format!("step {t} has non-finite entries")));
            }
        }
        Ok(MessageStack { steps })
    }

    pub fn steps(&self) -> &[Matrix] {
        &self.steps
    }

    pub fn step(&self, t: usize) -> &Matrix {
        &self.steps[t]
    }

    pub fn last(&self) -> &Matrix {
        self.steps.last().expect("stack is never empty")
    }

    /// Number of aggregation steps performed.
    pub fn k(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.steps[0].cols()
    }

    pub fn num_nodes(&self) -> usize {
        self.steps[0].rows()
    }

    /// The first `k + 1` steps.
    pub fn prefix(&self, k: usize) -> MessageStack {
        assert!(k <= self.k(), "prefix {k} longer than stack {}", self.k());
        MessageStack {
            steps: self.steps[..=k].to_vec(),
        }
    }

    /// Restricts every step to the given node rows.
    pub fn select_rows(&self, idx: &[usize]) -> MessageStack {
        MessageStack {
            steps: self.steps.iter().map(|m| m.select_rows(idx)).collect(),
        }
    }

    pub fn bitwise_eq(&self, other: &MessageStack) -> bool {
        self.steps.len() == other.steps.len()
            && self
                .steps
                .iter()
                .zip(&other.steps)
                .all(|(a, b)| a.bitwise_eq(b))
    }

    /// `SGAPM1` layout: magic, u64 n, u64 dim, u64 k, then `k + 1` row-major
    /// f64 matrices, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (n, d) = self.steps[0].shape();
        let mut out = Vec::with_capacity(6 + 24 + 8 * n * d * self.steps.len());
        out.extend_from_slice(STACK_MAGIC);
        for h in [n, d, self.k()] {
            out.extend_from_slice(&(h as u64).to_le_bytes());
        }
        for m in &self.steps {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| SgapError::Format {
            path: "<message stack>".into(),
            message: m.to_string(),
        };
        let mut r = ByteReader::new(bytes);
        if r.take(6) != Some(&STACK_MAGIC[..]) {
            return Err(bad("bad magic"));
        }
        let mut hdr = [0usize; 3];
        for h in hdr.iter_mut() {
            *h = r.u64().ok_or_else(|| bad("truncated header"))? as usize;
        }
        let [n, d, k] = hdr;
        let per = n.checked_mul(d).ok_or_else(|| bad("header overflow"))?;
        if Some(r.remaining()) != per.checked_mul(8 * (k + 1)) {
            return Err(bad("payload length does not match header"));
        }
        let steps = (0..=k)
            .map(|_| {
                let data = (0..per).map(|_| r.f64().unwrap()).collect();
                Matrix::from_vec(n, d, data)
            })
            .collect::<Result<Vec<_>>>()?;
        MessageStack::new(steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PropagateOptions {
    pub workers: usize,
    /// Rows per task; `None` picks `ceil(n / (4 * workers))`.
    pub batch_size: Option<usize>,
    /// Upper bound on the bytes held by the resulting stack.
    pub memory_budget: Option<usize>,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            workers: 1,
            batch_size: None,
            memory_budget: None,
        }
    }
}

impl PropagateOptions {
    pub fn with_workers(workers: usize) -> Self {
        PropagateOptions {
            workers,
            ..Default::default()
        }
    }
}

fn check_shapes(op: &PropagationOperator, m: &Matrix, what: &str) -> Result<()> {
    if m.rows() != op.num_nodes() {
        return Err(SgapError::dim(
            format!("{} rows ({what})", op.num_nodes()),
            m.rows(),
        ));
    }
    Ok(())
}

/// One aggregation step: `base · prev`, or `α·origin + (1−α)·base·prev` for PPR.
pub fn apply_step(op: &PropagationOperator, prev: &Matrix, origin: &Matrix) -> Result<Matrix> {
    check_shapes(op, prev, "prev")?;
    check_shapes(op, origin, "origin")?;
    if prev.cols() != origin.cols() {
        return Err(SgapError::dim(prev.cols(), origin.cols()));
    }
    let d = prev.cols();
    let mut out = Matrix::zeros(prev.rows(), d);
    if d > 0 {
        for (v, row) in out.as_mut_slice().chunks_mut(d).enumerate() {
            op.step_row(v, prev.as_slice(), origin.as_slice(), d, row);
        }
    }
    Ok(out)
}

/// Bytes needed to hold `k + 1` steps of an `n × d` message matrix.
pub fn stack_bytes(n: usize, d: usize, k: usize) -> usize {
    n.saturating_mul(d)
        .saturating_mul(k + 1)
        .saturating_mul(std::mem::size_of::<f64>())
}

pub fn propagate(
    op: &PropagationOperator,
    m0: &Matrix,
    k: usize,
    opts: PropagateOptions,
) -> Result<MessageStack> {
    check_shapes(op, m0, "m0")?;
    if opts.workers == 0 {
        return Err(SgapError::Parameter("workers must be at least 1".into()));
    }
    if opts.batch_size == Some(0) {
        return Err(SgapError::Parameter("batch_size must be at least 1".into()));
    }
    let (n, d) = m0.shape();
    let required = stack_bytes(n, d, k);
    if let Some(budget) = opts.memory_budget {
        if required > budget {
            return Err(SgapError::Resource { required, budget });
        }
    }
    let batch = opts
        .batch_size
        .unwrap_or_else(|| n.div_ceil(4 * opts.workers).max(1));

    let pool = if opts.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| SgapError::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut steps = Vec::with_capacity(k + 1);
    steps.push(m0.clone());
    for _ in 0..k {
        let prev = steps.last().unwrap();
        let mut out = Matrix::zeros(n, d);
        if d > 0 && n > 0 {
            let prev_s = prev.as_slice();
            let origin_s = m0.as_slice();
            let run_batch = |(b, chunk): (usize, &mut [f64])| {
                let first = b * batch;
                for (i, row) in chunk.chunks_mut(d).enumerate() {
                    op.step_row(first + i, prev_s, origin_s, d, row);
                }
            };
            match &pool {
                Some(pool) => pool.install(|| {
                    out.as_mut_slice()
                        .par_chunks_mut(batch * d)
                        .enumerate()
                        .for_each(run_batch)
                }),
                None => out
                    .as_mut_slice()
                    .chunks_mut(batch * d)
                    .enumerate()
                    .for_each(run_batch),
            }
        }
        steps.push(out);
    }
    MessageStack::new(steps)
}

/// Shares propagated stacks across evaluations. A stack computed for `k`
/// steps serves every request with `k' <= k`.
///
/// Entries are keyed by a caller-supplied source key (identifying graph and
/// input messages) plus the operator kind. When a directory is configured,
/// stacks are also persisted as `SGAPM1` files.
#[derive(Debug, Default)]
pub struct PropagationCache {
    entries: Mutex<HashMap<String, Arc<MessageStack>>>,
    dir: Option<PathBuf>,
    computed: AtomicUsize,
}

impl PropagationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        PropagationCache {
            dir: Some(dir.into()),
            ..Default::default()
        }
    }

    /// Uses `$SGAP_CACHE_DIR` for on-disk persistence when set.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::with_dir(PathBuf::from(d)),
            _ => Self::new(),
        }
    }

    /// How many stacks were actually propagated (cache misses).
    pub fn computations(&self) -> usize {
        self.computed.load(Ordering::SeqCst)
    }

    fn key(source_key: &str, op: &PropagationOperator) -> String {
        let row_norm = op.options().aug_na_row_normalized;
        let digest = Sha256::digest(format!("{source_key}|{}|{row_norm}", op.kind()).as_bytes());
        hex_digest(&digest)
    }

    pub fn get_or_compute(
        &self,
        source_key: &str,
        op: &PropagationOperator,
        m0: &Matrix,
        k: usize,
        opts: PropagateOptions,
    ) -> Result<MessageStack> {
        let key = Self::key(source_key, op);
        let mut entries = self.entries.lock().expect("cache mutex poisoned");
        if let Some(s) = entries.get(&key) {
            if s.k() >= k {
                return Ok(s.prefix(k));
            }
        }
        if let Some(s) = self.load_disk(&key) {
            if s.k() >= k && s.num_nodes() == m0.rows() && s.dim() == m0.cols() {
                let out = s.prefix(k);
                entries.insert(key, Arc::new(s));
                return Ok(out);
            }
        }
        let stack = propagate(op, m0, k, opts)?;
        self.computed.fetch_add(1, Ordering::SeqCst);
        if let Err(e) = self.store_disk(&key, &stack) {
            log::warn!("could not persist propagation cache: {e}");
        }
        entries.insert(key, Arc::new(stack.clone()));
        Ok(stack)
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.sgapm")))
    }

    fn load_disk(&self, key: &str) -> Option<MessageStack> {
        let path = self.path_for(key)?;
        let bytes = std::fs::read(&path).ok()?;
        MessageStack::from_bytes(&bytes).ok()
    }

    fn store_disk(&self, key: &str, stack: &MessageStack) -> Result<()> {
        let Some(path) = self.path_for(key) else {
            return Ok(());
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| SgapError::io(parent, e))?;
        }
        write_stack(&path, stack)
    }
}

pub fn write_stack(path: &Path, stack: &MessageStack) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| SgapError::io(path, e))?;
    f.write_all(&stack.to_bytes())
        .map_err(|e| SgapError::io(path, e))
}

pub fn read_stack(path: &Path) -> Result<MessageStack> {
    let bytes = std::fs::read(path).map_err(|e| SgapError::io(path, e))?;
    MessageStack::from_bytes(&bytes)
}
