//! Dense matrices over the polynomial ring, plus exact rank computation for
//! matrices evaluated at rational points.
//!
//! Sizes here are tiny (bundle ranks at desk scale), so determinants use
//! cofactor expansion and ranks use fraction-free Gaussian elimination over
//! the rationals.

use num::Zero;

use crate::exact::{Poly, Rational, Ring};

/// A rows × cols matrix with polynomial entries.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    ring: Ring,
    rows: usize,
    cols: usize,
    entries: Vec<Poly>,
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  [")?;
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.at(r, c))?;
            }
            writeln!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Zero matrix of the given shape.
    pub fn zero(ring: &Ring, rows: usize, cols: usize) -> Self {
        Matrix {
            ring: ring.clone(),
            rows,
            cols,
            entries: vec![ring.zero(); rows * cols],
        }
    }

    /// Identity matrix.
    pub fn identity(ring: &Ring, n: usize) -> Self {
        let mut m = Matrix::zero(ring, n, n);
        for i in 0..n {
            *m.at_mut(i, i) = ring.one();
        }
        m
    }

    /// Build from a row-major closure.
    pub fn from_fn(ring: &Ring, rows: usize, cols: usize, f: impl Fn(usize, usize) -> Poly) -> Self {
        let mut m = Matrix::zero(ring, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                *m.at_mut(r, c) = f(r, c);
            }
        }
        m
    }

    /// The base ring.
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry accessor.
    pub fn at(&self, r: usize, c: usize) -> &Poly {
        &self.entries[r * self.cols + c]
    }

    /// Mutable entry accessor.
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Poly {
        &mut self.entries[r * self.cols + c]
    }

    /// True when all entries vanish.
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    /// Matrix product.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix shape mismatch");
        Matrix::from_fn(&self.ring, self.rows, other.cols, |r, c| {
            let mut acc = self.ring.zero();
            for k in 0..self.cols {
                acc = acc.add(&self.at(r, k).mul(other.at(k, c)));
            }
            acc
        })
    }

    /// Sum.
    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Matrix::from_fn(&self.ring, self.rows, self.cols, |r, c| {
            self.at(r, c).add(other.at(r, c))
        })
    }

    /// Difference.
    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Matrix::from_fn(&self.ring, self.rows, self.cols, |r, c| {
            self.at(r, c).sub(other.at(r, c))
        })
    }

    /// Negation.
    pub fn neg(&self) -> Matrix {
        Matrix::from_fn(&self.ring, self.rows, self.cols, |r, c| self.at(r, c).neg())
    }

    /// Transpose.
    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(&self.ring, self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    /// Exact determinant by cofactor expansion (square matrices only).
    pub fn det(&self) -> Poly {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return self.ring.one();
        }
        if n == 1 {
            return self.at(0, 0).clone();
        }
        let mut acc = self.ring.zero();
        for c in 0..n {
            if self.at(0, c).is_zero() {
                continue;
            }
            let minor = Matrix::from_fn(&self.ring, n - 1, n - 1, |r2, c2| {
                self.at(r2 + 1, if c2 < c { c2 } else { c2 + 1 }).clone()
            });
            let term = self.at(0, c).mul(&minor.det());
            acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
        }
        acc
    }

    /// Exact inverse of a square matrix whose determinant is a nonzero
    /// constant (a unit of the polynomial ring), via the adjugate. Returns
    /// None when the determinant is zero or non-constant.
    pub fn inverse(&self) -> Option<Matrix> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let det = self.det();
        let c = det.as_constant()?;
        if c.is_zero() {
            return None;
        }
        let inv_det = Rational::from_integer(1.into()) / c;
        let out = Matrix::from_fn(&self.ring, n, n, |r, col| {
            // Adjugate: (i,j) cofactor transposed, so delete row `col` and
            // column `r` of the original.
            let minor = Matrix::from_fn(&self.ring, n - 1, n - 1, |r2, c2| {
                self.at(if r2 < col { r2 } else { r2 + 1 }, if c2 < r { c2 } else { c2 + 1 })
                    .clone()
            });
            let cof = minor.det();
            let signed = if (r + col) % 2 == 0 { cof } else { cof.neg() };
            signed.scale(&inv_det)
        });
        Some(out)
    }

    /// Evaluate every entry at a rational point.
    pub fn eval(&self, point: &[Rational]) -> Vec<Vec<Rational>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.at(r, c).eval(point)).collect())
            .collect()
    }

    /// Rank of the matrix evaluated at a rational point.
    pub fn rank_at(&self, point: &[Rational]) -> usize {
        rational_rank(self.eval(point))
    }
}

/// Rank of a rational matrix via Gaussian elimination.
pub fn rational_rank(mut m: Vec<Vec<Rational>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        // Find a pivot.
        let pivot = (row..rows).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else { continue };
        m.swap(row, p);
        let inv = m[row][col].clone();
        for c in col..cols {
            m[row][c] = &m[row][c] / &inv;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..cols {
                    let delta = &m[row][c] * &factor;
                    m[r][c] = &m[r][c] - &delta;
                }
            }
        }
        row += 1;
        rank += 1;
        if row == rows {
            break;
        }
    }
    rank
}

/// Solve M·x = b exactly over the rationals; returns None if inconsistent.
/// When the system is underdetermined, free variables are set to zero.
pub fn solve_rational(m: Vec<Vec<Rational>>, b: Vec<Rational>) -> Option<Vec<Rational>> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut aug: Vec<Vec<Rational>> = m
        .into_iter()
        .zip(b)
        .map(|(mut row, v)| {
            row.push(v);
            row
        })
        .collect();
    let mut pivots: Vec<Option<usize>> = vec![None; cols];
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| !aug[r][col].is_zero()) else { continue };
        aug.swap(row, p);
        let inv = aug[row][col].clone();
        for c in col..=cols {
            aug[row][c] = &aug[row][c] / &inv;
        }
        for r in 0..rows {
            if r != row && !aug[r][col].is_zero() {
                let factor = aug[r][col].clone();
                for c in col..=cols {
                    let delta = &aug[row][c] * &factor;
                    aug[r][c] = &aug[r][c] - &delta;
                }
            }
        }
        pivots[col] = Some(row);
        row += 1;
        if row == rows {
            break;
        }
    }
    // Inconsistency: a zero row with nonzero rhs.
    for r in row..rows {
        if aug[r][..cols].iter().all(Rational::is_zero) && !aug[r][cols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rational::zero(); cols];
    for col in 0..cols {
        if let Some(r) = pivots[col] {
            x[col] = aug[r][cols].clone();
        }
    }
    Some(x)
}

/// Exact inverse of a square rational matrix via Gauss–Jordan elimination.
pub fn rational_inverse(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut aug: Vec<Vec<Rational>> = (0..n)
        .map(|r| {
            let mut row = m[r].clone();
            assert_eq!(row.len(), n, "inverse of a non-square matrix");
            for c in 0..n {
                row.push(if r == c { Rational::from_integer(1.into()) } else { Rational::zero() });
            }
            row
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, p);
        let inv = aug[col][col].clone();
        for c in 0..2 * n {
            aug[col][c] = &aug[col][c] / &inv;
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let factor = aug[r][col].clone();
                for c in 0..2 * n {
                    let delta = &aug[col][c] * &factor;
                    aug[r][c] = &aug[r][c] - &delta;
                }
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Basis of the right null space of a rational matrix (rows × `cols`),
/// as column vectors.
pub fn rational_nullspace(m: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let rows = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| !a[r][col].is_zero()) else { continue };
        a.swap(row, p);
        let inv = a[row][col].clone();
        for c in col..cols {
            a[row][c] = &a[row][c] / &inv;
        }
        for r in 0..rows {
            if r != row && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..cols {
                    let delta = &a[row][c] * &factor;
                    a[r][c] = &a[r][c] - &delta;
                }
            }
        }
        pivot_of_col[col] = Some(row);
        row += 1;
        if row == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = vec![Rational::zero(); cols];
        v[free] = Rational::from_integer(1.into());
        for col in 0..cols {
            if let Some(r) = pivot_of_col[col] {
                v[col] = -a[r][free].clone();
            }
        }
        basis.push(v);
    }
    basis
}

/// Indices of a maximal independent set of rows of a rational matrix, in
/// increasing order.
pub fn independent_rows(m: &[Vec<Rational>]) -> Vec<usize> {
    let mut chosen: Vec<Vec<Rational>> = Vec::new();
    let mut idx = Vec::new();
    for (r, row) in m.iter().enumerate() {
        let mut candidate = chosen.clone();
        candidate.push(row.clone());
        if rational_rank(candidate.clone()) > chosen.len() {
            chosen = candidate;
            idx.push(r);
        }
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    #[test]
    fn det_and_rank() {
        let r = Ring::new(vec!["x"]);
        let x = r.var(0);
        // [[1, x], [0, x]] has det x; rank 2 away from x=0, rank 1 at x=0.
        let m = Matrix::from_fn(&r, 2, 2, |i, j| match (i, j) {
            (0, 0) => r.one(),
            (0, 1) | (1, 1) => x.clone(),
            _ => r.zero(),
        });
        assert_eq!(m.det(), x);
        assert_eq!(m.rank_at(&[q(1)]), 2);
        assert_eq!(m.rank_at(&[q(0)]), 1);
    }

    #[test]
    fn solve_small_system() {
        // x + y = 3, x − y = 1 → x = 2, y = 1.
        let m = vec![vec![q(1), q(1)], vec![q(1), q(-1)]];
        let sol = solve_rational(m, vec![q(3), q(1)]).unwrap();
        assert_eq!(sol, vec![q(2), q(1)]);
        // Inconsistent.
        let m = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        assert!(solve_rational(m, vec![q(1), q(3)]).is_none());
    }
}
