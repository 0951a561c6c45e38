//! Block-sparse matrices and the preconditioned GMRES solver.
//!
//! The Jacobian of the spatial residual is block-sparse on the element
//! adjacency graph (element-sized square blocks). GMRES is restarted and
//! right-preconditioned, so the reported residual is the true residual.
//! Block ILU(0) keeps the element-block sparsity pattern and eliminates in
//! element index order; block Jacobi inverts only the diagonal blocks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Block compressed-sparse-row matrix with square dense blocks.
pub struct BlockMatrix {
    /// Block rows (= elements).
    pub n: usize,
    /// Block size.
    pub bs: usize,
    pub row_ptr: Vec<usize>,
    /// Column indices, sorted within each row; each row contains its diagonal.
    pub col_idx: Vec<usize>,
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockMatrix {
    /// Builds a zero matrix from a per-row column pattern. Diagonal entries
    /// are inserted if absent; columns are sorted and deduplicated.
    pub fn from_pattern(mut pattern: Vec<Vec<usize>>, bs: usize) -> BlockMatrix {
        let n = pattern.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (r, cols) in pattern.iter_mut().enumerate() {
            cols.push(r);
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let blocks = (0..col_idx.len()).map(|_| DMatrix::zeros(bs, bs)).collect();
        BlockMatrix {
            n,
            bs,
            row_ptr,
            col_idx,
            blocks,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n * self.bs
    }

    fn find(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    pub fn block(&self, r: usize, c: usize) -> Option<&DMatrix<f64>> {
        self.find(r, c).map(|k| &self.blocks[k])
    }

    pub fn block_mut(&mut self, r: usize, c: usize) -> Option<&mut DMatrix<f64>> {
        self.find(r, c).map(move |k| &mut self.blocks[k])
    }

    /// Adds `v` to entry `(r_dof, c_dof)` in global dof indexing; the entry
    /// must lie inside the sparsity pattern.
    pub fn add_entry(&mut self, r_dof: usize, c_dof: usize, v: f64) {
        let (r, ri) = (r_dof / self.bs, r_dof % self.bs);
        let (c, ci) = (c_dof / self.bs, c_dof % self.bs);
        let k = self
            .find(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside sparsity pattern"));
        self.blocks[k][(ri, ci)] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.bs;
        y.fill(0.0);
        for r in 0..self.n {
            let yr = &mut y[r * bs..(r + 1) * bs];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let b = &self.blocks[k];
                let xc = &x[c * bs..(c + 1) * bs];
                for i in 0..bs {
                    let mut acc = 0.0;
                    for j in 0..bs {
                        acc += b[(i, j)] * xc[j];
                    }
                    yr[i] += acc;
                }
            }
        }
    }

    /// Explicit transpose (block structure transposed, blocks transposed).
    pub fn transpose(&self) -> BlockMatrix {
        let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                pattern[self.col_idx[k]].push(r);
            }
        }
        let mut out = BlockMatrix::from_pattern(pattern, self.bs);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                *out.block_mut(c, r).unwrap() = self.blocks[k].transpose();
            }
        }
        out
    }
}

/// Preconditioner application `out = M^{-1} x`.
pub trait PrecondOp {
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

pub struct IdentityPrecond;

impl PrecondOp for IdentityPrecond {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

pub struct BlockJacobi {
    bs: usize,
    inv: Vec<DMatrix<f64>>,
}

impl BlockJacobi {
    pub fn new(a: &BlockMatrix) -> Result<BlockJacobi> {
        let mut inv = Vec::with_capacity(a.n);
        for r in 0..a.n {
            let d = a
                .block(r, r)
                .expect("diagonal block missing")
                .clone()
                .try_inverse()
                .ok_or(Error::PrecondBreakdown { block: r })?;
            inv.push(d);
        }
        Ok(BlockJacobi { bs: a.bs, inv })
    }
}

impl PrecondOp for BlockJacobi {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let bs = self.bs;
        for (r, inv) in self.inv.iter().enumerate() {
            let xr = &x[r * bs..(r + 1) * bs];
            let o = &mut out[r * bs..(r + 1) * bs];
            for i in 0..bs {
                let mut acc = 0.0;
                for j in 0..bs {
                    acc += inv[(i, j)] * xr[j];
                }
                o[i] = acc;
            }
        }
    }
}

/// Block ILU(0): incomplete LU on the block pattern, natural ordering.
pub struct BlockIlu0 {
    n: usize,
    bs: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    blocks: Vec<DMatrix<f64>>,
    /// Inverses of the pivot blocks.
    pivot_inv: Vec<DMatrix<f64>>,
}

impl BlockIlu0 {
    pub fn new(a: &BlockMatrix) -> Result<BlockIlu0> {
        let n = a.n;
        let bs = a.bs;
        let row_ptr = a.row_ptr.clone();
        let col_idx = a.col_idx.clone();
        let mut blocks = a.blocks.clone();
        let mut pivot_inv: Vec<DMatrix<f64>> = Vec::with_capacity(n);

        let find = |r: usize, c: usize| -> Option<usize> {
            let lo = row_ptr[r];
            let hi = row_ptr[r + 1];
            col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
        };

        for i in 0..n {
            // eliminate with previously factored pivot rows
            for kk in row_ptr[i]..row_ptr[i + 1] {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let lik = &blocks[kk] * &pivot_inv[k];
                blocks[kk] = lik.clone();
                for jj in row_ptr[i]..row_ptr[i + 1] {
                    let j = col_idx[jj];
                    if j <= k {
                        continue;
                    }
                    if let Some(kj) = find(k, j) {
                        let update = &lik * &blocks[kj];
                        blocks[jj] -= update;
                    }
                }
            }
            let dk = find(i, i).expect("diagonal block missing");
            let inv = blocks[dk]
                .clone()
                .try_inverse()
                .ok_or(Error::PrecondBreakdown { block: i })?;
            pivot_inv.push(inv);
        }

        Ok(BlockIlu0 {
            n,
            bs,
            row_ptr,
            col_idx,
            blocks,
            pivot_inv,
        })
    }
}

impl PrecondOp for BlockIlu0 {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let bs = self.bs;
        // forward solve L y = x (unit block diagonal)
        out.copy_from_slice(x);
        for i in 0..self.n {
            for kk in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.col_idx[kk];
                if k >= i {
                    break;
                }
                let b = &self.blocks[kk];
                let (head, tail) = out.split_at_mut(i * bs);
                let yk = &head[k * bs..(k + 1) * bs];
                let yi = &mut tail[..bs];
                for r in 0..bs {
                    let mut acc = 0.0;
                    for c in 0..bs {
                        acc += b[(r, c)] * yk[c];
                    }
                    yi[r] -= acc;
                }
            }
        }
        // backward solve U z = y
        let mut tmp = vec![0.0; bs];
        for i in (0..self.n).rev() {
            tmp.copy_from_slice(&out[i * bs..(i + 1) * bs]);
            for kk in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[kk];
                if j <= i {
                    continue;
                }
                let b = &self.blocks[kk];
                let zj = &out[j * bs..(j + 1) * bs];
                for r in 0..bs {
                    let mut acc = 0.0;
                    for c in 0..bs {
                        acc += b[(r, c)] * zj[c];
                    }
                    tmp[r] -= acc;
                }
            }
            let inv = &self.pivot_inv[i];
            let o = &mut out[i * bs..(i + 1) * bs];
            for r in 0..bs {
                let mut acc = 0.0;
                for c in 0..bs {
                    acc += inv[(r, c)] * tmp[c];
                }
                o[r] = acc;
            }
        }
    }
}

/// Right-preconditioned restarted GMRES.
///
/// Solves `A x = b` to `|b - A x| <= tol_rel |b|`; returns the solution,
/// the achieved relative residual, and the iteration count.
pub fn gmres(
    a: &BlockMatrix,
    b: &[f64],
    precond: &dyn PrecondOp,
    tol_rel: f64,
    restart: usize,
    max_iters: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = a.n_rows();
    assert_eq!(b.len(), n);
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0.0, 0));
    }

    let mut total_iters = 0;
    let mut r = vec![0.0; n];
    let mut work = vec![0.0; n];

    loop {
        // r = b - A x
        a.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= tol_rel * bnorm {
            return Ok((x, beta / bnorm, total_iters));
        }
        if total_iters >= max_iters {
            return Err(Error::LinearSolve {
                residual: beta / bnorm,
                iters: total_iters,
            });
        }

        let m = restart.min(max_iters - total_iters).max(1);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|&y| y / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        let mut breakdown = false;

        for k in 0..m {
            // w = A M^{-1} v_k
            precond.apply(&v[k], &mut work);
            let mut w = vec![0.0; n];
            a.matvec(&work, &mut w);
            // modified Gram-Schmidt
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                for (we, ve) in w.iter_mut().zip(&v[i]) {
                    *we -= hik * ve;
                }
            }
            let hnext = norm(&w);
            h[k + 1][k] = hnext;
            total_iters += 1;
            k_used = k + 1;
            if hnext > 1e-300 {
                v.push(w.iter().map(|&y| y / hnext).collect());
            } else {
                breakdown = true;
            }
            // Givens rotations
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom < 1e-300 {
                breakdown = true;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
                h[k][k] = denom;
                h[k + 1][k] = 0.0;
                g[k + 1] = -sn[k] * g[k];
                g[k] *= cs[k];
            }
            if g[k + 1].abs() <= tol_rel * bnorm || breakdown {
                break;
            }
        }

        // back-substitute y from the triangular system
        let kk = k_used;
        let mut y = vec![0.0; kk];
        for i in (0..kk).rev() {
            let mut acc = g[i];
            for j in i + 1..kk {
                acc -= h[i][j] * y[j];
            }
            if h[i][i].abs() < 1e-300 {
                return Err(Error::LinearSolve {
                    residual: f64::INFINITY,
                    iters: total_iters,
                });
            }
            y[i] = acc / h[i][i];
        }
        // x += M^{-1} (V y)
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, ve) in update.iter_mut().zip(&v[j]) {
                *u += yj * ve;
            }
        }
        precond.apply(&update, &mut work);
        for i in 0..n {
            x[i] += work[i];
        }

        if breakdown {
            // re-check the true residual; a happy breakdown is convergence
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            let res = norm(&r) / bnorm;
            if res <= tol_rel {
                return Ok((x, res, total_iters));
            }
            return Err(Error::LinearSolve {
                residual: res,
                iters: total_iters,
            });
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
