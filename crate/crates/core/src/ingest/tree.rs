use crate::error::{KernetError, Result};

/// Fraction of trees in which two rows share a leaf. `leaves[i][t]` is the
/// leaf reached by row `i` in tree `t`.
pub fn tree_kernel_gram<L: Eq>(leaves: &[Vec<L>]) -> Result<Vec<Vec<f64>>> {
    let t = leaves.first().map(|r| r.len()).unwrap_or(0);
    if !leaves.is_empty() && t == 0 {
        return Err(KernetError::invalid("leaves", "need at least one tree"));
    }
    if let Some(bad) = leaves.iter().find(|r| r.len() != t) {
        return Err(KernetError::DimensionMismatch {
            expected: t,
            actual: bad.len(),
        });
    }
    let n = leaves.len();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        gram[i][i] = 1.0;
        for j in i + 1..n {
            let shared = leaves[i].iter().zip(&leaves[j]).filter(|(a, b)| a == b).count();
            let v = shared as f64 / t as f64;
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }
    Ok(gram)
}
