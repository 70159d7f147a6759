//! Dense matrices over an exact coefficient ring.
//!
//! The same type carries everything from tiny constant matrices over F_q to
//! the fully symbolic chart matrices, so determinants and rank computations
//! dispatch on the ring: Gaussian elimination over fields, fraction-free
//! (Bareiss) elimination over integral domains, and a division-free
//! subset-DP expansion over rings with zero divisors such as F_q[pi]/(pi^2).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::ring::{Ring, RingElem};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MatError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("minor size {k} exceeds matrix dimensions {rows}x{cols}")]
    KTooLarge { k: usize, rows: usize, cols: usize },
    #[error("operation requires a field, but the entry ring is not one")]
    NotAField,
    #[error("linear system is inconsistent")]
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat {
    ring: Ring,
    rows: usize,
    cols: usize,
    data: Vec<RingElem>,
}

impl Mat {
    pub fn zeros(ring: &Ring, rows: usize, cols: usize) -> Mat {
        Mat {
            ring: ring.clone(),
            rows,
            cols,
            data: vec![ring.zero(); rows * cols],
        }
    }

    pub fn identity(ring: &Ring, n: usize) -> Mat {
        let mut m = Mat::zeros(ring, n, n);
        for i in 0..n {
            m.set(i, i, ring.one());
        }
        m
    }

    pub fn from_fn(ring: &Ring, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> RingElem) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { ring: ring.clone(), rows, cols, data }
    }

    /// Build a matrix from integer entries.
    pub fn from_i64(ring: &Ring, rows: &[&[i64]]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Mat::from_fn(ring, r, c, |i, j| ring.from_i64(rows[i][j]))
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &RingElem {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: RingElem) {
        assert!(i < self.rows && j < self.cols, "index out of range");
        self.data[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|e| e.is_zero())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(&self.ring, self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn neg(&self) -> Mat {
        Mat::from_fn(&self.ring, self.rows, self.cols, |i, j| self.at(i, j).neg())
    }

    pub fn scale(&self, c: &RingElem) -> Mat {
        Mat::from_fn(&self.ring, self.rows, self.cols, |i, j| self.at(i, j).mul(c))
    }

    pub fn add_checked(&self, other: &Mat) -> Result<Mat, MatError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatError::ShapeMismatch(format!(
                "{}x{} + {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Mat::from_fn(&self.ring, self.rows, self.cols, |i, j| {
            self.at(i, j).add(other.at(i, j))
        }))
    }

    pub fn mul_checked(&self, other: &Mat) -> Result<Mat, MatError> {
        if self.cols != other.rows {
            return Err(MatError::ShapeMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(&self.ring, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let t = out.at(i, j).add(&a.mul(b));
                    out.set(i, j, t);
                }
            }
        }
        Ok(out)
    }

    // Block helpers following the row/column slicing conventions used
    // throughout the chart construction.

    pub fn top_rows(&self, k: usize) -> Mat {
        self.block(0, 0, k, self.cols)
    }

    pub fn bottom_rows(&self, k: usize) -> Mat {
        self.block(self.rows - k, 0, k, self.cols)
    }

    pub fn left_cols(&self, k: usize) -> Mat {
        self.block(0, 0, self.rows, k)
    }

    pub fn right_cols(&self, k: usize) -> Mat {
        self.block(0, self.cols - k, self.rows, k)
    }

    /// Single row as a 1xN matrix (0-based).
    pub fn row_mat(&self, i: usize) -> Mat {
        self.block(i, 0, 1, self.cols)
    }

    /// Single column as an Nx1 matrix (0-based).
    pub fn col_mat(&self, j: usize) -> Mat {
        self.block(0, j, self.rows, 1)
    }

    pub fn block(&self, r0: usize, c0: usize, h: usize, w: usize) -> Mat {
        assert!(r0 + h <= self.rows && c0 + w <= self.cols, "block out of range");
        Mat::from_fn(&self.ring, h, w, |i, j| self.at(r0 + i, c0 + j).clone())
    }

    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        Mat::from_fn(&self.ring, self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.at(i, j).clone()
            } else {
                other.at(i, j - self.cols).clone()
            }
        })
    }

    pub fn vstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "vstack col mismatch");
        Mat::from_fn(&self.ring, self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self.at(i, j).clone()
            } else {
                other.at(i - self.rows, j).clone()
            }
        })
    }

    /// Assemble a matrix from a grid of blocks. Within each block row all
    /// blocks must have the same height; column widths must agree across rows.
    pub fn from_blocks(ring: &Ring, grid: &[Vec<Mat>]) -> Mat {
        let mut rows_acc: Option<Mat> = None;
        for row in grid {
            let mut row_acc: Option<Mat> = None;
            for b in row {
                row_acc = Some(match row_acc {
                    None => b.clone(),
                    Some(acc) => acc.hstack(b),
                });
            }
            let row_mat = row_acc.unwrap_or_else(|| Mat::zeros(ring, 0, 0));
            rows_acc = Some(match rows_acc {
                None => row_mat,
                Some(acc) => acc.vstack(&row_mat),
            });
        }
        rows_acc.unwrap_or_else(|| Mat::zeros(ring, 0, 0))
    }

    /// Apply an entry-wise map.
    pub fn map(&self, target: &Ring, mut f: impl FnMut(&RingElem) -> RingElem) -> Mat {
        Mat::from_fn(target, self.rows, self.cols, |i, j| f(self.at(i, j)))
    }

    // ------------------------------------------------------------------
    // Determinants, rank, kernels
    // ------------------------------------------------------------------

    pub fn det(&self) -> Result<RingElem, MatError> {
        if self.rows != self.cols {
            return Err(MatError::NotSquare(self.rows, self.cols));
        }
        if self.rows == 0 {
            return Ok(self.ring.one());
        }
        if self.ring.is_field() {
            Ok(self.det_gauss())
        } else if self.ring.is_domain() {
            Ok(self.det_bareiss())
        } else {
            Ok(self.det_division_free())
        }
    }

    fn det_gauss(&self) -> RingElem {
        let n = self.rows;
        let mut m = self.clone();
        let mut det = self.ring.one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !m.at(r, col).is_zero());
            let Some(p) = pivot else {
                return self.ring.zero();
            };
            if p != col {
                m.swap_rows(p, col);
                det = det.neg();
            }
            let pv = m.at(col, col).clone();
            det = det.mul(&pv);
            let pinv = pv.inv().expect("field pivot must invert");
            for r in col + 1..n {
                if m.at(r, col).is_zero() {
                    continue;
                }
                let factor = m.at(r, col).mul(&pinv);
                for c in col..n {
                    let v = m.at(r, c).sub(&factor.mul(m.at(col, c)));
                    m.set(r, c, v);
                }
            }
        }
        det
    }

    /// Bareiss fraction-free elimination; every division is exact in an
    /// integral domain.
    fn det_bareiss(&self) -> RingElem {
        let n = self.rows;
        let mut m = self.clone();
        let mut sign = false;
        let mut prev = self.ring.one();
        for k in 0..n {
            let pivot = (k..n).find(|&r| !m.at(r, k).is_zero());
            let Some(p) = pivot else {
                return self.ring.zero();
            };
            if p != k {
                m.swap_rows(p, k);
                sign = !sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = m.at(i, j).mul(m.at(k, k)).sub(&m.at(i, k).mul(m.at(k, j)));
                    let v = num.exact_div(&prev).expect("Bareiss division must be exact");
                    m.set(i, j, v);
                }
                m.set(i, k, self.ring.zero());
            }
            prev = m.at(k, k).clone();
        }
        let d = m.at(n - 1, n - 1).clone();
        if sign {
            d.neg()
        } else {
            d
        }
    }

    /// Division-free determinant by dynamic programming over column subsets;
    /// valid over any commutative ring. O(2^n * n) ring operations.
    fn det_division_free(&self) -> RingElem {
        let n = self.rows;
        assert!(n <= 24, "division-free determinant limited to small sizes");
        let zero = self.ring.zero();
        // state[mask]: signed sum over ways to fill rows 0..popcount(mask)
        // using column set `mask`.
        let mut state = vec![zero.clone(); 1 << n];
        state[0] = self.ring.one();
        for row in 0..n {
            let mut next = vec![zero.clone(); 1 << n];
            for (mask, v) in state.iter().enumerate() {
                if (mask as u32).count_ones() as usize != row || v.is_zero() {
                    continue;
                }
                // Sign bookkeeping: expanding along rows in order, choosing
                // column j contributes (-1)^(number of chosen columns > j).
                for j in 0..n {
                    let bit = 1usize << j;
                    if mask & bit != 0 {
                        continue;
                    }
                    let a = self.at(row, j);
                    if a.is_zero() {
                        continue;
                    }
                    let higher = (mask >> (j + 1)).count_ones();
                    let term = v.mul(a);
                    let term = if higher % 2 == 1 { term.neg() } else { term };
                    next[mask | bit] = next[mask | bit].add(&term);
                }
            }
            state = next;
        }
        state[(1 << n) - 1].clone()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Reduced row echelon form with pivot columns. Field entries only.
    pub fn rref(&self) -> Result<(Mat, Vec<usize>), MatError> {
        if !self.ring.is_field() {
            return Err(MatError::NotAField);
        }
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.at(i, c).is_zero()) else {
                continue;
            };
            m.swap_rows(p, r);
            let inv = m.at(r, c).inv().expect("field pivot");
            for j in c..m.cols {
                let v = m.at(r, j).mul(&inv);
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i != r && !m.at(i, c).is_zero() {
                    let f = m.at(i, c).clone();
                    for j in c..m.cols {
                        let v = m.at(i, j).sub(&f.mul(m.at(r, j)));
                        m.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        Ok((m, pivots))
    }

    /// Exact rank over a field.
    pub fn rank(&self) -> Result<usize, MatError> {
        Ok(self.rref()?.1.len())
    }

    /// Rank over an integral domain (fraction-free); returns pivot row and
    /// column indices certifying a nonsingular submatrix of that size.
    pub fn rank_fraction_free(&self) -> Result<(usize, Vec<usize>, Vec<usize>), MatError> {
        if self.ring.is_field() {
            // Track pivots through plain elimination.
            return self.rank_with_pivots_field();
        }
        if !self.ring.is_domain() {
            return Err(MatError::NotAField);
        }
        let mut m = self.clone();
        let mut prev = self.ring.one();
        let mut row_idx: Vec<usize> = (0..self.rows).collect();
        let mut col_idx: Vec<usize> = (0..self.cols).collect();
        let mut pr = Vec::new();
        let mut pc = Vec::new();
        let mut k = 0;
        loop {
            if k == m.rows || k == m.cols {
                break;
            }
            // Find any nonzero pivot in the remaining block.
            let mut found = None;
            'outer: for i in k..m.rows {
                for j in k..m.cols {
                    if !m.at(i, j).is_zero() {
                        found = Some((i, j));
                        break 'outer;
                    }
                }
            }
            let Some((pi, pj)) = found else {
                break;
            };
            m.swap_rows(pi, k);
            row_idx.swap(pi, k);
            if pj != k {
                for i in 0..m.rows {
                    m.data.swap(i * m.cols + pj, i * m.cols + k);
                }
                col_idx.swap(pj, k);
            }
            for i in k + 1..m.rows {
                for j in k + 1..m.cols {
                    let num = m.at(i, j).mul(m.at(k, k)).sub(&m.at(i, k).mul(m.at(k, j)));
                    let v = num.exact_div(&prev).expect("Bareiss division must be exact");
                    m.set(i, j, v);
                }
                m.set(i, k, self.ring.zero());
            }
            prev = m.at(k, k).clone();
            pr.push(row_idx[k]);
            pc.push(col_idx[k]);
            k += 1;
        }
        pr.sort_unstable();
        pc.sort_unstable();
        Ok((k, pr, pc))
    }

    fn rank_with_pivots_field(&self) -> Result<(usize, Vec<usize>, Vec<usize>), MatError> {
        let mut m = self.clone();
        let mut row_idx: Vec<usize> = (0..self.rows).collect();
        let mut pr = Vec::new();
        let mut pc = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.at(i, c).is_zero()) else {
                continue;
            };
            m.swap_rows(p, r);
            row_idx.swap(p, r);
            let inv = m.at(r, c).inv().expect("field pivot");
            for i in r + 1..m.rows {
                if m.at(i, c).is_zero() {
                    continue;
                }
                let f = m.at(i, c).mul(&inv);
                for j in c..m.cols {
                    let v = m.at(i, j).sub(&f.mul(m.at(r, j)));
                    m.set(i, j, v);
                }
            }
            pr.push(row_idx[r]);
            pc.push(c);
            r += 1;
        }
        pr.sort_unstable();
        Ok((r, pr, pc))
    }

    /// Basis of the right kernel {x : Ax = 0}, as column vectors.
    pub fn kernel_basis(&self) -> Result<Vec<Mat>, MatError> {
        let (r, pivots) = self.rref()?;
        let mut basis = Vec::new();
        let pivot_set: Vec<Option<usize>> = {
            let mut v = vec![None; self.cols];
            for (row, &c) in pivots.iter().enumerate() {
                v[c] = Some(row);
            }
            v
        };
        for free in 0..self.cols {
            if pivot_set[free].is_some() {
                continue;
            }
            let mut x = Mat::zeros(&self.ring, self.cols, 1);
            x.set(free, 0, self.ring.one());
            for (col, slot) in pivot_set.iter().enumerate() {
                if let Some(row) = slot {
                    x.set(col, 0, r.at(*row, free).neg());
                }
            }
            basis.push(x);
        }
        Ok(basis)
    }

    /// Basis of the left kernel {y : yA = 0}, as row vectors.
    pub fn left_kernel_basis(&self) -> Result<Vec<Mat>, MatError> {
        Ok(self
            .transpose()
            .kernel_basis()?
            .into_iter()
            .map(|c| c.transpose())
            .collect())
    }

    /// Basis of the row space, as row vectors.
    pub fn row_space_basis(&self) -> Result<Vec<Mat>, MatError> {
        let (r, pivots) = self.rref()?;
        Ok((0..pivots.len()).map(|i| r.row_mat(i)).collect())
    }

    /// Solve Ax = b over a field. Returns a particular solution and a kernel
    /// basis, or `Inconsistent`.
    pub fn solve(&self, b: &Mat) -> Result<(Mat, Vec<Mat>), MatError> {
        if b.rows != self.rows || b.cols != 1 {
            return Err(MatError::ShapeMismatch("solve rhs".into()));
        }
        let aug = self.hstack(b);
        let (r, pivots) = aug.rref()?;
        if pivots.contains(&self.cols) {
            return Err(MatError::Inconsistent);
        }
        let mut x = Mat::zeros(&self.ring, self.cols, 1);
        for (row, &c) in pivots.iter().enumerate() {
            x.set(c, 0, r.at(row, self.cols).clone());
        }
        Ok((x, self.kernel_basis()?))
    }

    /// Do all k x k minors vanish? On failure, reports the row/column index
    /// sets of one nonzero minor.
    pub fn minors_vanish(&self, k: usize) -> Result<MinorsOutcome, MatError> {
        if k > self.rows || k > self.cols {
            return Err(MatError::KTooLarge { k, rows: self.rows, cols: self.cols });
        }
        if k == 0 {
            // The empty minor is 1.
            return Ok(MinorsOutcome::Witness { rows: vec![], cols: vec![], minor: self.ring.one() });
        }
        if self.ring.is_field() || self.ring.is_domain() {
            let (rank, pr, pc) = self.rank_fraction_free()?;
            if rank < k {
                return Ok(MinorsOutcome::AllZero);
            }
            let rows: Vec<usize> = pr[..k].to_vec();
            let cols: Vec<usize> = pc[..k].to_vec();
            let sub = self.submatrix(&rows, &cols);
            let minor = sub.det()?;
            debug_assert!(!minor.is_zero(), "pivot submatrix must be nonsingular");
            return Ok(MinorsOutcome::Witness { rows, cols, minor });
        }
        // Zero-divisor ring: enumerate minors directly.
        let mut row_sel = first_combination(k);
        loop {
            let mut col_sel = first_combination(k);
            loop {
                let sub = self.submatrix(&row_sel, &col_sel);
                let minor = sub.det_division_free();
                if !minor.is_zero() {
                    return Ok(MinorsOutcome::Witness { rows: row_sel, cols: col_sel, minor });
                }
                if !next_combination(&mut col_sel, self.cols) {
                    break;
                }
            }
            if !next_combination(&mut row_sel, self.rows) {
                break;
            }
        }
        Ok(MinorsOutcome::AllZero)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Mat {
        Mat::from_fn(&self.ring, rows.len(), cols.len(), |i, j| {
            self.at(rows[i], cols[j]).clone()
        })
    }

    /// Inverse over a field.
    pub fn inverse(&self) -> Result<Mat, MatError> {
        if self.rows != self.cols {
            return Err(MatError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let aug = self.hstack(&Mat::identity(&self.ring, n));
        let (r, pivots) = aug.rref()?;
        if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| i != c) {
            return Err(MatError::Inconsistent);
        }
        Ok(r.block(0, n, n, n))
    }

    /// Characteristic polynomial det(T*I - A), returned as an element of the
    /// univariate polynomial ring over the entry ring.
    pub fn char_poly(&self, t_ring: &Ring) -> Result<RingElem, MatError> {
        if self.rows != self.cols {
            return Err(MatError::NotSquare(self.rows, self.cols));
        }
        let t = t_ring.var_by_index(0);
        let n = self.rows;
        let m = Mat::from_fn(t_ring, n, n, |i, j| {
            let a = t_ring.const_poly(self.at(i, j)).neg();
            if i == j {
                t.add(&a)
            } else {
                a
            }
        });
        m.det()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinorsOutcome {
    AllZero,
    Witness { rows: Vec<usize>, cols: Vec<usize>, minor: RingElem },
}

impl MinorsOutcome {
    pub fn all_zero(&self) -> bool {
        matches!(self, MinorsOutcome::AllZero)
    }
}

fn first_combination(k: usize) -> Vec<usize> {
    (0..k).collect()
}

/// Advance a sorted k-subset of {0..n} in lexicographic order.
fn next_combination(sel: &mut [usize], n: usize) -> bool {
    let k = sel.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if sel[i] < n - k + i {
            sel[i] += 1;
            for j in i + 1..k {
                sel[j] = sel[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{}", self.at(i, j))).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        self.add_checked(rhs).expect("matrix addition shape mismatch")
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix subtraction shape mismatch");
        Mat::from_fn(&self.ring, self.rows, self.cols, |i, j| {
            self.at(i, j).sub(rhs.at(i, j))
        })
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        Mat::neg(self)
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.mul_checked(rhs).expect("matrix product shape mismatch")
    }
}
