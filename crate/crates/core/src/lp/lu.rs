//! Sparse LU factorization of a simplex basis, with solves against B and
//! B-transpose. Pivots are chosen column-minimum-degree first with a
//! threshold on magnitude, which keeps slack-heavy bases near linear cost.
//! A singular basis is not an error here: the dependent columns and the
//! rows left uncovered are reported so the caller can patch the basis.

/// Basis columns that could not be pivoted, plus the rows left uncovered.
/// Both lists are sorted and equally long, so the caller can pair each
/// dependent column with an unused row's slack.
pub(crate) struct Deficiency {
    pub bad_cols: Vec<usize>,
    pub free_rows: Vec<usize>,
}

#[derive(Clone)]
pub(crate) struct LuFactors {
    m: usize,
    prow: Vec<usize>,
    pcol: Vec<usize>,
    /// Row elimination multipliers per step: v[i] -= mult * v[prow[step]].
    lmul: Vec<Vec<(usize, f64)>>,
    udiag: Vec<f64>,
    /// Off-diagonal U entries of the step's pivot row, keyed by basis
    /// position of the later column.
    urows: Vec<Vec<(usize, f64)>>,
    /// Transposed view: entries of the step's pivot column, keyed by earlier
    /// step index.
    ucols: Vec<Vec<(usize, f64)>>,
}

impl LuFactors {
    pub fn identity(m: usize) -> Self {
        LuFactors {
            m,
            prow: (0..m).collect(),
            pcol: (0..m).collect(),
            lmul: vec![Vec::new(); m],
            udiag: vec![1.0; m],
            urows: vec![Vec::new(); m],
            ucols: vec![Vec::new(); m],
        }
    }

    /// Factors the basis given as `m` sparse columns of length `m`. Columns
    /// that prove structurally or numerically dependent are parked and
    /// reported back instead of aborting the elimination.
    pub fn factor(m: usize, basis_cols: &[Vec<(usize, f64)>]) -> Result<Self, Deficiency> {
        assert_eq!(basis_cols.len(), m);
        let mut wcols: Vec<Vec<(usize, f64)>> = basis_cols.to_vec();
        let mut rindex: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut colnnz: Vec<usize> = vec![0; m];
        let mut rnnz: Vec<usize> = vec![0; m];
        for (c, col) in wcols.iter().enumerate() {
            colnnz[c] = col.len();
            for &(r, _) in col {
                rindex[r].push(c);
                rnnz[r] += 1;
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut pos_of_col = vec![usize::MAX; m];

        let mut prow = Vec::with_capacity(m);
        let mut pcol = Vec::with_capacity(m);
        let mut lmul = Vec::with_capacity(m);
        let mut udiag = Vec::with_capacity(m);
        let mut urows_bypos: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut bad_cols: Vec<usize> = Vec::new();

        let mut dense = vec![0.0f64; m];
        let mut in_dense = vec![false; m];

        for _ in 0..m {
            let mut best_c = usize::MAX;
            let mut best_nnz = usize::MAX;
            for c in 0..m {
                if col_active[c] && colnnz[c] < best_nnz {
                    best_nnz = colnnz[c];
                    best_c = c;
                    if best_nnz <= 1 {
                        break;
                    }
                }
            }
            assert_ne!(best_c, usize::MAX);
            let c_star = best_c;

            let col = &wcols[c_star];
            let mut colmax = 0.0f64;
            for &(r, v) in col.iter() {
                if row_active[r] {
                    colmax = colmax.max(v.abs());
                }
            }
            if colmax < 1.0e-13 {
                // Empty, or cancelled to noise by the pivots made so far.
                col_active[c_star] = false;
                for &(r, _) in wcols[c_star].iter() {
                    if row_active[r] {
                        rnnz[r] -= 1;
                    }
                }
                bad_cols.push(c_star);
                continue;
            }
            let mut r_star = usize::MAX;
            let mut r_key = (usize::MAX, 0.0f64, usize::MAX);
            for &(r, v) in col.iter() {
                if row_active[r] && v.abs() >= 0.1 * colmax {
                    let key = (rnnz[r], -v.abs(), r);
                    if key.0 < r_key.0
                        || (key.0 == r_key.0 && (key.1 < r_key.1 || (key.1 == r_key.1 && key.2 < r_key.2)))
                    {
                        r_key = key;
                        r_star = r;
                    }
                }
            }
            let r_star = r_star;
            let mut pivot_val = 0.0;
            let mut mults: Vec<(usize, f64)> = Vec::new();
            for &(r, v) in wcols[c_star].iter() {
                if r == r_star {
                    pivot_val = v;
                } else if row_active[r] {
                    mults.push((r, v));
                }
            }
            for e in mults.iter_mut() {
                e.1 /= pivot_val;
            }

            col_active[c_star] = false;
            row_active[r_star] = false;
            pos_of_col[c_star] = prow.len();
            for &(r, _) in wcols[c_star].iter() {
                if row_active[r] {
                    rnnz[r] -= 1;
                }
            }

            // Turn row r_star entries into U entries and push updates into
            // the remaining columns.
            let mut urow: Vec<(usize, f64)> = Vec::new();
            let touched = std::mem::take(&mut rindex[r_star]);
            for c in touched {
                if !col_active[c] {
                    continue;
                }
                let mut u_val = None;
                {
                    let colc = &mut wcols[c];
                    let mut k = 0;
                    while k < colc.len() {
                        if colc[k].0 == r_star {
                            u_val = Some(colc[k].1);
                            colc.swap_remove(k);
                            break;
                        }
                        k += 1;
                    }
                }
                let u = match u_val {
                    Some(u) => u,
                    None => continue,
                };
                colnnz[c] -= 1;
                urow.push((c, u));
                if mults.is_empty() || u == 0.0 {
                    continue;
                }
                // Scatter the column, apply the rank-1 update, gather back.
                let mut pattern: Vec<usize> = Vec::with_capacity(wcols[c].len() + mults.len());
                for &(r, v) in wcols[c].iter() {
                    dense[r] = v;
                    in_dense[r] = true;
                    pattern.push(r);
                }
                for &(r, mv) in mults.iter() {
                    if in_dense[r] {
                        dense[r] -= mv * u;
                    } else {
                        dense[r] = -mv * u;
                        in_dense[r] = true;
                        pattern.push(r);
                        rindex[r].push(c);
                        rnnz[r] += 1;
                    }
                }
                let colc = &mut wcols[c];
                colc.clear();
                for r in pattern {
                    colc.push((r, dense[r]));
                    in_dense[r] = false;
                }
                colnnz[c] = colc.len();
            }

            prow.push(r_star);
            pcol.push(c_star);
            lmul.push(mults);
            udiag.push(pivot_val);
            urows_bypos.push(urow);
        }

        if !bad_cols.is_empty() {
            bad_cols.sort_unstable();
            let free_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
            return Err(Deficiency { bad_cols, free_rows });
        }

        // Remap U row entries from raw column index to basis position, and
        // build the transposed access path.
        let mut urows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut ucols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (s, urow) in urows_bypos.into_iter().enumerate() {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(urow.len());
            for (c, u) in urow {
                let t = pos_of_col[c];
                row.push((c, u));
                ucols[t].push((s, u));
            }
            urows.push(row);
        }

        Ok(LuFactors {
            m,
            prow,
            pcol,
            lmul,
            udiag,
            urows,
            ucols,
        })
    }

    /// Solves B x = v in place. Input is indexed by row; the result is
    /// indexed by basis position.
    pub fn ftran(&self, v: &mut [f64]) {
        for s in 0..self.m {
            let pivot = v[self.prow[s]];
            if pivot != 0.0 {
                for &(i, mult) in &self.lmul[s] {
                    v[i] -= mult * pivot;
                }
            }
        }
        let mut x = vec![0.0f64; self.m];
        for s in (0..self.m).rev() {
            let mut acc = v[self.prow[s]];
            for &(pos, u) in &self.urows[s] {
                if x[pos] != 0.0 {
                    acc -= u * x[pos];
                }
            }
            x[self.pcol[s]] = acc / self.udiag[s];
        }
        v.copy_from_slice(&x);
    }

    /// Solves B^T y = c in place. Input is indexed by basis position; the
    /// result is indexed by row.
    pub fn btran(&self, v: &mut [f64]) {
        let mut z = vec![0.0f64; self.m];
        for t in 0..self.m {
            let mut acc = v[self.pcol[t]];
            for &(s, u) in &self.ucols[t] {
                if z[s] != 0.0 {
                    acc -= u * z[s];
                }
            }
            z[t] = acc / self.udiag[t];
        }
        for i in v.iter_mut() {
            *i = 0.0;
        }
        for s in 0..self.m {
            v[self.prow[s]] = z[s];
        }
        for s in (0..self.m).rev() {
            let mut acc = v[self.prow[s]];
            if !self.lmul[s].is_empty() {
                for &(i, mult) in &self.lmul[s] {
                    acc -= mult * v[i];
                }
                v[self.prow[s]] = acc;
            }
        }
    }
}
