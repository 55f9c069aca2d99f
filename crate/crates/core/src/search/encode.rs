use crate::error::{Result, SgapError};
use crate::pipeline::ArchitectureConfig;

pub const ENCODING_LEN: usize = 19;

/// Numeric embedding for the surrogates:
/// `[k_pre/10] ⊕ onehot5(ga_pre) ⊕ onehot6(ma) ⊕ [(k_trans−1)/9] ⊕ [k_post/10] ⊕ onehot5(ga_post)`,
/// where an unused aggregator encodes as all zeros.
pub fn encode(arch: &ArchitectureConfig) -> Result<Vec<f64>> {
    if !arch.is_canonical() {
        return Err(SgapError::Validation(format!("cannot encode non-canonical config {arch}")));
    }
    let mut v = vec![0.0; ENCODING_LEN];
    v[0] = arch.k_pre as f64 / 10.0;
    if let Some(i) = arch.ga_pre.choice_index() {
        v[1 + i] = 1.0;
    }
    v[6 + arch.ma.index()] = 1.0;
    v[12] = (arch.k_trans - 1) as f64 / 9.0;
    v[13] = arch.k_post as f64 / 10.0;
    if let Some(i) = arch.ga_post.choice_index() {
        v[14 + i] = 1.0;
    }
    Ok(v)
}
