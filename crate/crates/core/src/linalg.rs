//! Sparse SPD solve for the condensed skeleton system.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};

use crate::error::{Error, Result};

/// Accumulates `(row, col, value)` entries; duplicates are summed in a fixed order.
#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Sorted, duplicate-free entries in column-major order.
    pub fn merged(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (r, c, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out
    }

    /// Largest `|A_ij − A_ji|` relative to the largest `|A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let merged = self.merged();
        let map: std::collections::HashMap<(usize, usize), f64> =
            merged.iter().map(|&(r, c, v)| ((r, c), v)).collect();
        let max = merged.iter().map(|e| e.2.abs()).fold(0.0, f64::max);
        let diff = merged
            .iter()
            .map(|&(r, c, v)| (v - map.get(&(c, r)).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        if max > 0.0 {
            diff / max
        } else {
            0.0
        }
    }

    /// Solves `A x = b` by sparse Cholesky.
    pub fn solve_spd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if n == 0 {
            return Ok(Vec::new());
        }
        faer::set_global_parallelism(Par::Seq);
        let triplets: Vec<Triplet<usize, usize, f64>> = self
            .merged()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|e| {
            Error::SkeletonSolve {
                dofs: n,
                detail: format!("assembly failed: {e:?}"),
            }
        })?;
        let llt = a.sp_cholesky(Side::Lower).map_err(|e| Error::SkeletonSolve {
            dofs: n,
            detail: format!(
                "Cholesky factorization failed ({e:?}); the condensed matrix is not positive definite"
            ),
        })?;
        let mut b = Mat::<f64>::zeros(n, 1);
        for (i, v) in rhs.iter().enumerate() {
            b[(i, 0)] = *v;
        }
        let x = llt.solve(&b);
        let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SkeletonSolve {
                dofs: n,
                detail: "solution contains non-finite values".into(),
            });
        }
        Ok(out)
    }
}
