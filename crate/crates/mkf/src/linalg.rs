//! Small dense linear algebra for state dimensions up to ~12: a row-major
//! matrix type, symmetric matrices with an exact-symmetry invariant, a cyclic
//! Jacobi eigendecomposition, and Cholesky-based SPD solves.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Outer product u vᵀ.
    pub fn outer(u: &[f64], v: &[f64]) -> Mat {
        let mut out = Mat::zeros(u.len(), v.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                out[(i, j)] = u[i] * v[j];
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric matrix with exact entry-wise symmetry enforced at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>, // full row-major storage
}

impl SymMatrix {
    /// Builds from full row-major entries; fails unless entries are finite and
    /// exactly symmetric.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} symmetric matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("non-finite matrix entry".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidSpec(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        SymMatrix::new(n, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            s.data[i * n + i] = 1.0;
        }
        s
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            s.data[i * n + i] = values[i];
        }
        s
    }

    /// Builds from `f(i, j)` evaluated only on i ≤ j and mirrored, so the
    /// result is exactly symmetric by construction.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                s.data[i * n + j] = v;
                s.data[j * n + i] = v;
            }
        }
        s
    }

    /// (M + Mᵀ)/2, exactly symmetric.
    pub fn symmetrized(m: &Mat) -> Self {
        assert_eq!(m.rows(), m.cols(), "symmetrized needs a square matrix");
        SymMatrix::from_fn(m.rows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_mat(&self) -> Mat {
        Mat {
            rows: self.n,
            cols: self.n,
            data: self.data.clone(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Eigendecomposition S = T diag(λ) Tᵀ with orthogonal T and eigenvalues in
/// descending order. Column signs follow a fixed convention (largest-magnitude
/// entry positive) so the output is deterministic.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub transform: Mat,
    pub lambdas: Vec<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 50;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn eig_sym(s: &SymMatrix) -> Result<EigenDecomposition> {
    let n = s.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            transform: Mat::zeros(0, 0),
            lambdas: vec![],
        });
    }
    let mut a = s.to_mat();
    let mut v = Mat::identity(n);
    let scale = s.max_abs().max(1.0);
    let tol = 1e-15 * scale;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = 0.5 * (a[(q, q)] - a[(p, p)]) / apq;
                // tan of the rotation angle, smaller root for stability
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                let tau = sn / (1.0 + c);

                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp - sn * (akq + tau * akp);
                        a[(p, k)] = a[(k, p)];
                        a[(k, q)] = akq + sn * (akp - tau * akq);
                        a[(q, k)] = a[(k, q)];
                    }
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp - sn * (vkq + tau * vkp);
                    v[(k, q)] = vkq + sn * (vkp - tau * vkq);
                }
            }
        }
    }
    if !converged {
        // final check after the last sweep
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off > tol {
            return Err(Error::EigNonConvergence(JACOBI_MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .partial_cmp(&a[(i, i)])
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });

    let mut transform = Mat::zeros(n, n);
    let mut lambdas = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        lambdas.push(a[(src, src)]);
        // sign convention: largest-magnitude entry of each eigenvector positive
        let mut best = 0;
        for k in 1..n {
            if v[(k, src)].abs() > v[(best, src)].abs() {
                best = k;
            }
        }
        let flip = if v[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            transform[(k, col)] = flip * v[(k, src)];
        }
    }
    Ok(EigenDecomposition { transform, lambdas })
}

/// Eigendecomposition of a covariance matrix: tiny negative eigenvalues from
/// floating point are clamped to zero, genuinely negative ones are an error.
pub fn eig_covariance(s: &SymMatrix) -> Result<EigenDecomposition> {
    let mut dec = eig_sym(s)?;
    let scale = s.max_abs().max(1.0);
    for lambda in &mut dec.lambdas {
        if *lambda < 0.0 {
            if *lambda < -1e-12 * scale {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: *lambda });
            }
            *lambda = 0.0;
        }
    }
    Ok(dec)
}

/// Solves S X = B for symmetric positive definite S via Cholesky.
pub fn solve_spd(s: &SymMatrix, b: &Mat) -> Result<Mat> {
    let n = s.dim();
    if b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve_spd: S is {n}x{n} but B has {} rows",
            b.rows()
        )));
    }
    // lower Cholesky factor
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s.get(i, j);
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite { context: "matrix" });
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    // forward then backward substitution, per column of B
    let mut x = Mat::zeros(n, b.cols());
    for col in 0..b.cols() {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[(i, col)];
            for k in 0..i {
                sum -= l[(i, k)] * y[k];
            }
            y[i] = sum / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    Ok(x)
}

/// Projects a symmetric matrix onto the PSD cone: eigenvalues in
/// `[-rel_tol·scale, 0)` are clamped to zero and the matrix reconstructed;
/// anything more negative is an error. Used by the filters to repair
/// covariances after subtraction steps.
pub fn psd_project(s: &SymMatrix, rel_tol: f64) -> Result<SymMatrix> {
    let dec = eig_sym(s)?;
    let scale = dec
        .lambdas
        .iter()
        .fold(0.0_f64, |acc, l| acc.max(l.abs()))
        .max(1.0);
    let mut clamped = dec.lambdas.clone();
    for l in &mut clamped {
        if *l < 0.0 {
            if *l < -rel_tol * scale {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: *l });
            }
            *l = 0.0;
        }
    }
    if clamped == dec.lambdas {
        return Ok(s.clone());
    }
    let n = s.dim();
    Ok(SymMatrix::from_fn(n, |i, j| {
        (0..n)
            .map(|k| dec.transform[(i, k)] * clamped[k] * dec.transform[(j, k)])
            .sum()
    }))
}
