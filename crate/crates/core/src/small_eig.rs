//! Dense factorizations for the small `k x k` matrices of the compact
//! representation: Cholesky, cyclic Jacobi, the Cholesky-reduced
//! generalized symmetric eigenproblem and a partially pivoted LU for
//! solves with the (indefinite) middle matrix.

use crate::error::EigError;

/// Relative pivot threshold for Cholesky.
pub const PIVOT_TOL: f64 = 1e-12;
/// Relative pivot threshold for LU.
pub const LU_PIVOT_TOL: f64 = 1e-14;

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SmallMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in 0..order {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged or not square.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let order = rows.len();
        let mut data = Vec::with_capacity(order * order);
        for r in rows {
            assert_eq!(r.len(), order, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { order, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.order).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.order, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.order, other.order);
        let k = self.order;
        let mut out = Self::zeros(k);
        for i in 0..k {
            for l in 0..k {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..k {
                    out.data[i * k + j] += a * other.data[l * k + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order);
        (0..self.order)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ v`
    pub fn tmatvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order);
        let mut out = vec![0.0; self.order];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.order).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= rel_tol * scale))
    }

    /// Replaces the matrix with `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.order {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            order: self.order,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Drops row and column `idx`.
    pub fn remove_row_col(&mut self, idx: usize) {
        let k = self.order;
        assert!(idx < k);
        let mut data = Vec::with_capacity((k - 1) * (k - 1));
        for i in (0..k).filter(|&i| i != idx) {
            for j in (0..k).filter(|&j| j != idx) {
                data.push(self.data[i * k + j]);
            }
        }
        self.order = k - 1;
        self.data = data;
    }

    /// Grows the matrix by one trailing row and column filled with `row`
    /// (length `order + 1`) and `col` (length `order`, excluding the corner).
    pub fn push_row_col(&mut self, row: &[f64], col: &[f64]) {
        let k = self.order;
        assert_eq!(row.len(), k + 1);
        assert_eq!(col.len(), k);
        let mut data = Vec::with_capacity((k + 1) * (k + 1));
        for (i, c) in col.iter().enumerate() {
            data.extend_from_slice(&self.data[i * k..(i + 1) * k]);
            data.push(*c);
        }
        data.extend_from_slice(row);
        self.order = k + 1;
        self.data = data;
    }
}

impl std::ops::Index<(usize, usize)> for SmallMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.order + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.order + j]
    }
}

/// Upper-triangular `R` with `T = RᵀR`.
pub fn cholesky(t: &SmallMatrix) -> Result<SmallMatrix, EigError> {
    let k = t.order();
    let max_diag = (0..k).fold(0.0f64, |m, i| m.max(t[(i, i)].abs()));
    let floor = PIVOT_TOL * max_diag;
    let mut r = SmallMatrix::zeros(k);
    for j in 0..k {
        let mut d = t[(j, j)];
        for l in 0..j {
            d -= r[(l, j)] * r[(l, j)];
        }
        if !(d > floor) || d <= 0.0 {
            return Err(EigError::NotPositiveDefinite { row: j, pivot: d });
        }
        let rjj = d.sqrt();
        r[(j, j)] = rjj;
        for i in j + 1..k {
            let mut v = t[(j, i)];
            for l in 0..j {
                v -= r[(l, j)] * r[(l, i)];
            }
            r[(j, i)] = v / rjj;
        }
    }
    Ok(r)
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn solve_upper(r: &SmallMatrix, b: &[f64]) -> Vec<f64> {
    let k = r.order();
    let mut x = b.to_vec();
    for i in (0..k).rev() {
        let mut v = x[i];
        for j in i + 1..k {
            v -= r[(i, j)] * x[j];
        }
        x[i] = v / r[(i, i)];
    }
    x
}

/// Solves `Rᵀ x = b` for upper-triangular `R`.
pub fn solve_upper_transpose(r: &SmallMatrix, b: &[f64]) -> Vec<f64> {
    let k = r.order();
    let mut x = b.to_vec();
    for i in 0..k {
        let mut v = x[i];
        for j in 0..i {
            v -= r[(j, i)] * x[j];
        }
        x[i] = v / r[(i, i)];
    }
    x
}

/// Symmetric eigendecomposition `A = Q diag(w) Qᵀ` by cyclic Jacobi
/// rotations. Eigenvalues are returned ascending with matching columns.
pub fn jacobi_eigh(a: &SmallMatrix) -> (SmallMatrix, Vec<f64>) {
    let k = a.order();
    let mut a = a.clone();
    a.symmetrize();
    let mut q = SmallMatrix::identity(k);
    let target = JACOBI_TOL * a.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..k {
            for r in p + 1..k {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- Jᵀ A J with J the (p, r) rotation
                for i in 0..k {
                    let aip = a[(i, p)];
                    let air = a[(i, r)];
                    a[(i, p)] = c * aip - s * air;
                    a[(i, r)] = s * aip + c * air;
                }
                for j in 0..k {
                    let apj = a[(p, j)];
                    let arj = a[(r, j)];
                    a[(p, j)] = c * apj - s * arj;
                    a[(r, j)] = s * apj + c * arj;
                }
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for i in 0..k {
                    let qip = q[(i, p)];
                    let qir = q[(i, r)];
                    q[(i, p)] = c * qip - s * qir;
                    q[(i, r)] = s * qip + c * qir;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let w = order.iter().map(|&i| a[(i, i)]).collect();
    let q_sorted = SmallMatrix::from_fn(k, |i, j| q[(i, order[j])]);
    (q_sorted, w)
}

/// Solution of `M v = λ T v` with `VᵀTV = I`, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedEig {
    pub vectors: SmallMatrix,
    pub values: Vec<f64>,
}

/// Reduces `M v = λ T v` to a standard problem through `T = RᵀR`.
pub fn generalized_eigh(m: &SmallMatrix, t: &SmallMatrix) -> Result<GeneralizedEig, EigError> {
    let k = m.order();
    if t.order() != k {
        return Err(EigError::Dimension {
            expected: k,
            got: t.order(),
        });
    }
    let r = cholesky(t)?;
    // X = R⁻ᵀ M, column by column
    let mut x = SmallMatrix::zeros(k);
    for j in 0..k {
        let col = solve_upper_transpose(&r, &m.column(j));
        for i in 0..k {
            x[(i, j)] = col[i];
        }
    }
    // C = X R⁻¹  <=>  Cᵀ = R⁻ᵀ Xᵀ
    let mut c = SmallMatrix::zeros(k);
    for i in 0..k {
        let row = solve_upper_transpose(&r, x.row(i));
        for j in 0..k {
            c[(i, j)] = row[j];
        }
    }
    c.symmetrize();
    let (q, values) = jacobi_eigh(&c);
    let mut vectors = SmallMatrix::zeros(k);
    for j in 0..k {
        let col = solve_upper(&r, &q.column(j));
        for i in 0..k {
            vectors[(i, j)] = col[i];
        }
    }
    Ok(GeneralizedEig { vectors, values })
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: SmallMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &SmallMatrix) -> Result<Self, EigError> {
        let k = a.order();
        let floor = LU_PIVOT_TOL * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..k).collect();
        for col in 0..k {
            let (piv, pmax) = (col..k)
                .map(|i| (i, lu[(i, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > floor) {
                return Err(EigError::Singular { row: col, pivot: pmax });
            }
            if piv != col {
                perm.swap(piv, col);
                for j in 0..k {
                    let tmp = lu[(piv, j)];
                    lu[(piv, j)] = lu[(col, j)];
                    lu[(col, j)] = tmp;
                }
            }
            let d = lu[(col, col)];
            for i in col + 1..k {
                let f = lu[(i, col)] / d;
                lu[(i, col)] = f;
                for j in col + 1..k {
                    let v = lu[(col, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.lu.order();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..k {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..k).rev() {
            for j in i + 1..k {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}
