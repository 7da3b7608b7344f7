//! Block layout of the decision variables across agents and the essential
//! communication structure the coupling rows induce.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Disjoint index blocks covering the primal coordinates `[0, n+m)` and the
/// dual coordinates `[0, p)`. Blocks are sorted index lists; contiguous
/// ranges are the common case but agents may own scattered coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockPartition {
    pub primal_blocks: Vec<Vec<usize>>,
    pub dual_blocks: Vec<Vec<usize>>,
}

fn check_cover(blocks: &[Vec<usize>], total: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; total];
    let mut count = 0usize;
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::Invalid(format!("{what} block {b} is empty")));
        }
        for w in block.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Invalid(format!("{what} block {b} not sorted")));
            }
        }
        for &i in block {
            if i >= total {
                return Err(Error::Invalid(format!(
                    "{what} block {b} index {i} out of range {total}"
                )));
            }
            if seen[i] {
                return Err(Error::Invalid(format!(
                    "{what} index {i} owned by two blocks"
                )));
            }
            seen[i] = true;
            count += 1;
        }
    }
    if count != total {
        return Err(Error::DimensionMismatch {
            what: format!("{what} blocks cover"),
            expected: total,
            found: count,
        });
    }
    Ok(())
}

impl BlockPartition {
    pub fn new(
        primal_blocks: Vec<Vec<usize>>,
        dual_blocks: Vec<Vec<usize>>,
        dim: usize,
        p: usize,
    ) -> Result<Self> {
        let part = Self {
            primal_blocks,
            dual_blocks,
        };
        part.validate(dim, p)?;
        Ok(part)
    }

    /// Balanced contiguous chunks: `n1` primal agents over `dim` coordinates
    /// and `n2` dual agents over `p` rows (sizes differ by at most one).
    /// `n2 = 0` is allowed only when `p = 0`.
    pub fn contiguous(dim: usize, n1: usize, p: usize, n2: usize) -> Result<Self> {
        fn chunks(total: usize, k: usize) -> Vec<Vec<usize>> {
            let mut out = Vec::with_capacity(k);
            let base = total / k;
            let extra = total % k;
            let mut start = 0;
            for i in 0..k {
                let len = base + usize::from(i < extra);
                out.push((start..start + len).collect());
                start += len;
            }
            out
        }
        if n1 == 0 || n1 > dim {
            return Err(Error::Invalid(format!(
                "need 1 <= n1 <= dim, got n1 = {n1}, dim = {dim}"
            )));
        }
        if p == 0 {
            if n2 != 0 {
                return Err(Error::Invalid("n2 must be 0 when p = 0".into()));
            }
            return Self::new(chunks(dim, n1), Vec::new(), dim, 0);
        }
        if n2 == 0 || n2 > p {
            return Err(Error::Invalid(format!(
                "need 1 <= n2 <= p, got n2 = {n2}, p = {p}"
            )));
        }
        Self::new(chunks(dim, n1), chunks(p, n2), dim, p)
    }

    pub fn validate(&self, dim: usize, p: usize) -> Result<()> {
        check_cover(&self.primal_blocks, dim, "primal")?;
        check_cover(&self.dual_blocks, p, "dual")?;
        Ok(())
    }

    pub fn n_primal(&self) -> usize {
        self.primal_blocks.len()
    }

    pub fn n_dual(&self) -> usize {
        self.dual_blocks.len()
    }

    /// Coordinate -> owning primal agent.
    pub fn col_owner(&self, dim: usize) -> Vec<usize> {
        let mut owner = vec![0usize; dim];
        for (i, block) in self.primal_blocks.iter().enumerate() {
            for &l in block {
                owner[l] = i;
            }
        }
        owner
    }

    /// Row -> owning dual agent.
    pub fn row_owner(&self, p: usize) -> Vec<usize> {
        let mut owner = vec![0usize; p];
        for (q, block) in self.dual_blocks.iter().enumerate() {
            for &j in block {
                owner[j] = q;
            }
        }
        owner
    }
}

/// Bipartite essential-neighbor structure between primal and dual agents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adjacency {
    /// Sorted `(primal, dual)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub primal_to_dual: Vec<Vec<usize>>,
    pub dual_to_primal: Vec<Vec<usize>>,
}

/// Edge `(i, q)` iff some row owned by dual agent `q` has a structural
/// nonzero in a column owned by primal agent `i`.
pub fn derive_essential_neighbors(a: &SparseMatrix, part: &BlockPartition) -> Adjacency {
    let col_owner = part.col_owner(a.ncols());
    let row_owner = part.row_owner(a.nrows());
    let mut set: BTreeSet<(usize, usize)> = BTreeSet::new();
    for j in 0..a.nrows() {
        let q = row_owner[j];
        let (cols, _) = a.row(j);
        for &l in cols {
            set.insert((col_owner[l], q));
        }
    }
    let edges: Vec<(usize, usize)> = set.into_iter().collect();
    let mut primal_to_dual = vec![Vec::new(); part.n_primal()];
    let mut dual_to_primal = vec![Vec::new(); part.n_dual()];
    for &(i, q) in &edges {
        primal_to_dual[i].push(q);
        dual_to_primal[q].push(i);
    }
    Adjacency {
        edges,
        primal_to_dual,
        dual_to_primal,
    }
}
