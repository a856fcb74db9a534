//! Dense row-major matrices, the elementwise kernels used by the Lp updates,
//! and a cyclic Jacobi eigensolver for symmetric matrices.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense real matrix stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Rejects empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix shape {rows}x{cols} has an empty dimension"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has a non-finite entry".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != ncols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Matrix::new(rows.len(), ncols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let nrows = columns.first().map_or(0, |c| c.as_ref().len());
        if columns.iter().any(|c| c.as_ref().len() != nrows) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        let mut m = Matrix::zeros(nrows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            for (i, &x) in c.as_ref().iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        if nrows == 0 || columns.is_empty() {
            return Err(Error::InvalidInput("empty column set".into()));
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ * y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Accumulates `alpha * selfᵀ self` into `acc` (cols × cols).
    pub fn add_scaled_gram_to(&self, alpha: f64, acc: &mut Matrix) {
        debug_assert_eq!(acc.shape(), (self.cols, self.cols));
        let n = self.cols;
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..n {
                let ra = alpha * row[a];
                if ra == 0.0 {
                    continue;
                }
                let arow = &mut acc.data[a * n..(a + 1) * n];
                for (o, &rb) in arow.iter_mut().zip(row) {
                    *o += ra * rb;
                }
            }
        }
    }

    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        self.add_scaled_gram_to(1.0, &mut g);
        g
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * alpha).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exponent of an Lp norm: a positive real or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub fn is_infinite(self) -> bool {
        matches!(self, PNorm::Infinity)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            PNorm::Finite(p) if !(p > 0.0 && p.is_finite()) => Err(Error::InvalidParameter(
                format!("norm exponent must be positive, got {p}"),
            )),
            _ => Ok(()),
        }
    }

    /// Numeric value, with `f64::INFINITY` for the max norm.
    pub fn value(self) -> f64 {
        match self {
            PNorm::Finite(p) => p,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    pub fn from_value(p: f64) -> Self {
        if p.is_infinite() && p > 0.0 {
            PNorm::Infinity
        } else {
            PNorm::Finite(p)
        }
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(PNorm::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("not a norm exponent: {s:?}")))?;
        let p = PNorm::from_value(p);
        p.validate()?;
        Ok(p)
    }
}

/// `(Σ|v_i|^p)^(1/p)`, or `max|v_i|` for the infinity norm.
pub fn lp_norm(v: &[f64], p: PNorm) -> Result<f64> {
    p.validate()?;
    if v.is_empty() {
        return Err(Error::InvalidInput("norm of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("vector has a non-finite entry".into()));
    }
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let p = match p {
        PNorm::Infinity => return Ok(max),
        PNorm::Finite(p) => p,
    };
    if max == 0.0 {
        return Ok(0.0);
    }
    // scaled by the max entry so large exponents cannot overflow
    let sum: f64 = v.iter().map(|x| (x.abs() / max).powf(p)).sum();
    let root = if p == 2.0 { sum.sqrt() } else { sum.powf(1.0 / p) };
    Ok(max * root)
}

pub fn hadamard(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "hadamard product of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v).map(|(a, b)| a * b).collect())
}

/// Scalar sign with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn signum(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sign(x)).collect()
}

/// Scalar `|x|^e` with `0^0 = 1`.
#[inline]
pub fn abs_pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x.abs()
    } else {
        x.abs().powf(e)
    }
}

/// Elementwise `|v_i|^e`, with `0^0 = 1`. A zero entry raised to a negative
/// power is a singularity.
pub fn pow_abs(v: &[f64], e: f64) -> Result<Vec<f64>> {
    if e < 0.0 && v.contains(&0.0) {
        return Err(Error::Singularity(format!(
            "zero entry raised to negative power {e}"
        )));
    }
    Ok(v.iter().map(|&x| abs_pow(x, e)).collect())
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-12;
const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Top-`r` eigenpairs of a symmetric matrix.
///
/// Returns the eigenvectors as the columns of an `n × r` matrix and the
/// eigenvalues in descending order. Each eigenvector is signed so that its
/// largest-magnitude entry is positive (lowest index on ties).
///
/// Cyclic Jacobi rotations are applied until the off-diagonal Frobenius mass
/// drops below `1e-12 · ‖A‖_F`.
pub fn sym_eig(a: &Matrix, r: usize) -> Result<(Matrix, Vec<f64>)> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition of non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if r == 0 || r > n {
        return Err(Error::InvalidParameter(format!(
            "requested {r} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let scale = a.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_REL_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let mut m = a.clone();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_REL_TOL * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > threshold {
        return Err(Error::NoConvergence(format!(
            "Jacobi eigensolver exceeded {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));

    let mut vectors = Matrix::zeros(n, r);
    let mut values = Vec::with_capacity(r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        values.push(m[(idx, idx)]);
        let mut col = v.column(idx);
        let mut lead = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, x) in col.into_iter().enumerate() {
            vectors[(i, k)] = x;
        }
    }
    Ok((vectors, values))
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += m[(i, j)] * m[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// `m ← Jᵀ m J` and `v ← v J` for the plane rotation `J` acting on (p, q).
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
