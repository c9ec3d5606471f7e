//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Pivots are chosen by a Markowitz search over the active submatrix
//! (lowest row and column counts first) with threshold partial pivoting.
//! Row eliminations are recorded as `L` columns; the pivot rows form `U`.
//! Basis changes after factorization are appended as eta columns.

const PIVOT_THRESHOLD: f64 = 0.1;
const DROP_TOL: f64 = 1e-14;
/// Candidates examined before settling on the best pivot seen.
const SEARCH_LIMIT: usize = 4;

/// Outcome of a factorization that met a structurally or numerically
/// singular basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Singular {
    /// Basis positions that could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot, one per position.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    /// Off-pivot entries of the transformed entering column.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct LuFactor {
    m: usize,
    /// Pivot row and basis position of step k.
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    diag: Vec<f64>,
    /// Multipliers of step k: (row, l).
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal entries of U row k: (basis position, value).
    u_rows: Vec<Vec<(usize, f64)>>,
    etas: Vec<Eta>,
}

/// Bucketed doubly linked lists keyed by nonzero count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
    active: Vec<bool>,
}

const NIL: usize = usize::MAX;

impl Buckets {
    fn new(counts: &[usize], max_count: usize) -> Self {
        let n = counts.len();
        let mut b = Buckets {
            head: vec![NIL; max_count + 2],
            next: vec![NIL; n],
            prev: vec![NIL; n],
            count: counts.to_vec(),
            active: vec![true; n],
        };
        for i in (0..n).rev() {
            b.link(i);
        }
        b
    }

    fn link(&mut self, i: usize) {
        let c = self.count[i].min(self.head.len() - 1);
        self.prev[i] = NIL;
        self.next[i] = self.head[c];
        if self.head[c] != NIL {
            self.prev[self.head[c]] = i;
        }
        self.head[c] = i;
    }

    fn unlink(&mut self, i: usize) {
        let c = self.count[i].min(self.head.len() - 1);
        if self.prev[i] != NIL {
            self.next[self.prev[i]] = self.next[i];
        } else {
            self.head[c] = self.next[i];
        }
        if self.next[i] != NIL {
            self.prev[self.next[i]] = self.prev[i];
        }
    }

    fn set(&mut self, i: usize, count: usize) {
        if !self.active[i] {
            return;
        }
        self.unlink(i);
        self.count[i] = count;
        self.link(i);
    }

    fn remove(&mut self, i: usize) {
        if self.active[i] {
            self.unlink(i);
            self.active[i] = false;
        }
    }
}

impl LuFactor {
    /// Factors the `m x m` basis whose columns are given sparsely.
    ///
    /// On singularity the factor of the nonsingular part is still returned
    /// together with the positions and rows that failed to pivot.
    pub fn factor(m: usize, columns: &[Vec<(usize, f64)>]) -> (LuFactor, Option<Singular>) {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v.abs() > DROP_TOL {
                    rows[i].push((j, v));
                    cols[j].push(i);
                }
            }
        }
        let row_counts: Vec<usize> = rows.iter().map(Vec::len).collect();
        let col_counts: Vec<usize> = cols.iter().map(Vec::len).collect();
        let mut row_b = Buckets::new(&row_counts, m);
        let mut col_b = Buckets::new(&col_counts, m);

        let mut lu = LuFactor {
            m,
            ..Default::default()
        };
        let mut work = vec![0.0; m];
        let mut mark = vec![false; m];
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];

        let entry = |rows: &Vec<Vec<(usize, f64)>>, i: usize, j: usize| -> f64 {
            rows[i]
                .iter()
                .find(|&&(c, _)| c == j)
                .map_or(0.0, |&(_, v)| v)
        };
        let col_max = |rows: &Vec<Vec<(usize, f64)>>, cols: &Vec<Vec<usize>>, j: usize| -> f64 {
            cols[j]
                .iter()
                .map(|&i| entry(rows, i, j).abs())
                .fold(0.0, f64::max)
        };

        for _step in 0..m {
            // Markowitz search
            let mut best: Option<(usize, usize, f64)> = None;
            let mut best_cost = usize::MAX;
            let mut examined = 0;
            'search: for c in 1..=m {
                let mut j = col_b.head.get(c).copied().unwrap_or(NIL);
                while j != NIL {
                    let cmax = col_max(&rows, &cols, j);
                    for &i in &cols[j] {
                        let v = entry(&rows, i, j);
                        if v.abs() >= PIVOT_THRESHOLD * cmax && v.abs() > DROP_TOL {
                            let cost = (rows[i].len() - 1) * (c - 1);
                            if cost < best_cost {
                                best_cost = cost;
                                best = Some((i, j, v));
                            }
                        }
                    }
                    examined += 1;
                    if best.is_some()
                        && (examined >= SEARCH_LIMIT || best_cost <= (c - 1) * (c - 1))
                    {
                        break 'search;
                    }
                    j = col_b.next[j];
                }
                let mut i = row_b.head.get(c).copied().unwrap_or(NIL);
                while i != NIL {
                    for &(j, v) in &rows[i] {
                        let cmax = col_max(&rows, &cols, j);
                        if v.abs() >= PIVOT_THRESHOLD * cmax && v.abs() > DROP_TOL {
                            let cost = (c - 1) * (cols[j].len() - 1);
                            if cost < best_cost {
                                best_cost = cost;
                                best = Some((i, j, v));
                            }
                        }
                    }
                    examined += 1;
                    if best.is_some() && (examined >= SEARCH_LIMIT || best_cost <= c * (c - 1)) {
                        break 'search;
                    }
                    i = row_b.next[i];
                }
            }
            let Some((p, q, piv)) = best else { break };

            // eliminate column q from the other rows
            let pivot_row: Vec<(usize, f64)> =
                rows[p].iter().copied().filter(|&(j, _)| j != q).collect();
            let others: Vec<usize> = cols[q].iter().copied().filter(|&i| i != p).collect();
            let mut lcol = Vec::with_capacity(others.len());
            for &i in &others {
                let a_iq = entry(&rows, i, q);
                let l = a_iq / piv;
                lcol.push((i, l));
                for &(j, v) in &rows[i] {
                    work[j] = v;
                    mark[j] = true;
                }
                work[q] = 0.0;
                for &(j, u) in &pivot_row {
                    if !mark[j] {
                        mark[j] = true;
                        work[j] = 0.0;
                        cols[j].push(i);
                    }
                    work[j] -= l * u;
                }
                let mut new_row = Vec::with_capacity(rows[i].len() + pivot_row.len());
                for &(j, _) in &rows[i] {
                    if j != q {
                        new_row.push(j);
                    }
                }
                for &(j, _) in &pivot_row {
                    if !rows[i].iter().any(|&(c, _)| c == j) {
                        new_row.push(j);
                    }
                }
                let mut packed = Vec::with_capacity(new_row.len());
                for j in new_row {
                    let v = work[j];
                    mark[j] = false;
                    work[j] = 0.0;
                    if v.abs() > DROP_TOL {
                        packed.push((j, v));
                    } else {
                        cols[j].retain(|&r| r != i);
                    }
                }
                mark[q] = false;
                rows[i] = packed;
                row_b.set(i, rows[i].len());
            }
            for &(j, _) in &pivot_row {
                cols[j].retain(|&r| r != p);
                col_b.set(j, cols[j].len());
            }
            cols[q].clear();
            rows[p].clear();
            row_b.remove(p);
            col_b.remove(q);
            row_done[p] = true;
            col_done[q] = true;

            lu.pivot_row.push(p);
            lu.pivot_pos.push(q);
            lu.diag.push(piv);
            lu.l_cols.push(lcol);
            lu.u_rows.push(pivot_row);
        }

        if lu.pivot_row.len() == m {
            return (lu, None);
        }
        let positions: Vec<usize> = (0..m).filter(|&j| !col_done[j]).collect();
        let free_rows: Vec<usize> = (0..m).filter(|&i| !row_done[i]).collect();
        (
            lu,
            Some(Singular {
                positions,
                rows: free_rows,
            }),
        )
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nonzeros(&self) -> usize {
        self.etas.iter().map(|e| e.entries.len() + 1).sum()
    }

    /// Solves `B z = a` in place: `a` is indexed by row on entry and by basis
    /// position on exit.
    pub fn ftran(&self, a: &mut [f64]) {
        let m = self.m;
        for k in 0..self.pivot_row.len() {
            let v = a[self.pivot_row[k]];
            if v != 0.0 {
                for &(i, l) in &self.l_cols[k] {
                    a[i] -= l * v;
                }
            }
        }
        let mut z = vec![0.0; m];
        for k in (0..self.pivot_row.len()).rev() {
            let mut v = a[self.pivot_row[k]];
            for &(j, u) in &self.u_rows[k] {
                v -= u * z[j];
            }
            z[self.pivot_pos[k]] = v / self.diag[k];
        }
        for eta in &self.etas {
            let vp = z[eta.pos] / eta.pivot;
            z[eta.pos] = vp;
            if vp != 0.0 {
                for &(i, a) in &eta.entries {
                    z[i] -= a * vp;
                }
            }
        }
        a.copy_from_slice(&z);
    }

    /// Solves `y^T B = c^T` in place: `c` is indexed by basis position on
    /// entry and by row on exit.
    pub fn btran(&self, c: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for &(i, a) in &eta.entries {
                v -= a * c[i];
            }
            c[eta.pos] = v / eta.pivot;
        }
        let mut w = vec![0.0; self.m];
        for k in 0..self.pivot_row.len() {
            let wk = c[self.pivot_pos[k]] / self.diag[k];
            w[self.pivot_row[k]] = wk;
            if wk != 0.0 {
                for &(j, u) in &self.u_rows[k] {
                    c[j] -= wk * u;
                }
            }
        }
        for k in (0..self.pivot_row.len()).rev() {
            let r = self.pivot_row[k];
            let mut v = w[r];
            for &(i, l) in &self.l_cols[k] {
                v -= l * w[i];
            }
            w[r] = v;
        }
        c.copy_from_slice(&w);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&i| a[i][j] != 0.0)
                    .map(|i| (i, a[i][j]))
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(z).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn sample() -> Vec<Vec<f64>> {
        vec![
            vec![4.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, -1.0, 2.0, 1.0],
            vec![2.0, 0.0, 0.0, 5.0],
        ]
    }

    #[test]
    fn ftran_and_btran_solve_the_system() {
        let a = sample();
        let (lu, sing) = LuFactor::factor(4, &dense_to_cols(&a));
        assert!(sing.is_none());
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let mut z = rhs.clone();
        lu.ftran(&mut z);
        for (x, y) in matvec(&a, &z).iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut y = rhs.clone();
        lu.btran(&mut y);
        let at: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| a[i][j]).collect()).collect();
        for (x, r) in matvec(&at, &y).iter().zip(&rhs) {
            assert!((x - r).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut a = sample();
        let (mut lu, _) = LuFactor::factor(4, &dense_to_cols(&a));
        let newcol = vec![0.0, 1.0, 1.0, -2.0];
        let mut alpha = newcol.clone();
        lu.ftran(&mut alpha);
        lu.update(2, &alpha);
        for i in 0..4 {
            a[i][2] = newcol[i];
        }
        let rhs = vec![-1.0, 0.5, 2.0, 1.0];
        let mut z = rhs.clone();
        lu.ftran(&mut z);
        for (x, y) in matvec(&a, &z).iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut y = rhs.clone();
        lu.btran(&mut y);
        let at: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| a[i][j]).collect()).collect();
        for (x, r) in matvec(&at, &y).iter().zip(&rhs) {
            assert!((x - r).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular_positions() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let (_, sing) = LuFactor::factor(3, &dense_to_cols(&a));
        let s = sing.expect("singular");
        assert_eq!(s.positions.len(), 1);
        assert_eq!(s.rows.len(), 1);
    }
}
