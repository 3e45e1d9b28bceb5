//! Linear algebra over GF(2^w): matrices, rank, Vandermonde construction,
//! and exactly-uniform sampling from affine solution spaces.
//!
//! The solver uses plain Gaussian elimination with first-nonzero pivoting.
//! `solve_affine_uniform` is the pre-image sampling workhorse: it draws the
//! free variables uniformly and back-substitutes, which is exactly uniform
//! over the affine solution set because that set is a coset of the kernel
//! and the free-variable assignment is a bijection onto the coset.

use rand::Rng;
use thiserror::Error;

use crate::gf::FieldCtx;

/// Errors raised by matrix construction and solving.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    /// Vandermonde points must be distinct.
    #[error("duplicate evaluation point 0x{0:x}")]
    DuplicatePoint(u64),
    /// Row/vector shape inconsistent with the matrix.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    /// The system has no solution.
    #[error("inconsistent system: row {row} reduces to 0 = nonzero")]
    Inconsistent { row: usize },
}

/// A dense rows x cols matrix over one field context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GfMatrix {
    ctx: FieldCtx,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl GfMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(ctx: FieldCtx, rows: usize, cols: usize) -> GfMatrix {
        GfMatrix { ctx, rows, cols, data: vec![0; rows * cols] }
    }

    /// Builds from row-major raw values.
    pub fn from_rows(ctx: FieldCtx, rows: &[Vec<u64>]) -> Result<GfMatrix, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::ShapeMismatch("ragged rows"));
        }
        Ok(GfMatrix {
            ctx,
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    /// Matrix rank via Gaussian elimination on a scratch copy.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            // First nonzero entry at or below the current rank row.
            let Some(pivot) = (rank..m.rows).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            m.swap_rows(rank, pivot);
            let inv = m.ctx.inv(m.get(rank, col)).expect("pivot nonzero");
            for c in col..m.cols {
                m.set(rank, c, m.ctx.mul(m.get(rank, c), inv));
            }
            for r in 0..m.rows {
                if r != rank && m.get(r, col) != 0 {
                    let f = m.get(r, col);
                    for c in col..m.cols {
                        let v = m.ctx.add(m.get(r, c), m.ctx.mul(f, m.get(rank, c)));
                        m.set(r, c, v);
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

/// The `points.len() x (degree + 1)` matrix with entry `points[i]^j`.
///
/// Distinct points give full row rank whenever `points.len() <= degree + 1`,
/// which is what makes constrained Reed-Solomon pre-image sampling exact.
pub fn vandermonde(ctx: FieldCtx, points: &[u64], degree: usize) -> Result<GfMatrix, LinalgError> {
    for (i, &p) in points.iter().enumerate() {
        if points[..i].contains(&p) {
            return Err(LinalgError::DuplicatePoint(p));
        }
    }
    let mut m = GfMatrix::zeros(ctx, points.len(), degree + 1);
    for (i, &p) in points.iter().enumerate() {
        let mut acc = 1u64;
        for j in 0..=degree {
            m.set(i, j, acc);
            acc = ctx.mul(acc, p);
        }
    }
    Ok(m)
}

/// Solution of an affine system, drawn uniformly from the solution set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSolution {
    /// One uniformly drawn solution vector.
    pub solution: Vec<u64>,
    /// Dimension of the kernel; the solution set has `2^(w * kernel_dim)`
    /// elements.
    pub kernel_dim: usize,
}

/// Draws a uniform solution of `mat * x = rhs` over the matrix's field.
///
/// Fails with [`LinalgError::Inconsistent`] when no solution exists. Free
/// columns (those without a pivot) are assigned independent uniform field
/// elements and the pivot variables are back-substituted, so the output is
/// exactly uniform over the affine solution space.
#[allow(clippy::needless_range_loop)] // row/column indices mirror the math
pub fn solve_affine_uniform(
    mat: &GfMatrix,
    rhs: &[u64],
    rng: &mut impl Rng,
) -> Result<AffineSolution, LinalgError> {
    if rhs.len() != mat.rows() {
        return Err(LinalgError::ShapeMismatch("rhs length != rows"));
    }
    let ctx = mat.ctx();
    let mut m = mat.clone();
    let mut b = rhs.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0usize;
    for col in 0..m.cols() {
        if rank == m.rows() {
            break;
        }
        let Some(p) = (rank..m.rows()).find(|&r| m.get(r, col) != 0) else {
            continue;
        };
        m.swap_rows(rank, p);
        b.swap(rank, p);
        let inv = ctx.inv(m.get(rank, col)).expect("pivot nonzero");
        for c in col..m.cols() {
            m.set(rank, c, ctx.mul(m.get(rank, c), inv));
        }
        b[rank] = ctx.mul(b[rank], inv);
        for r in 0..m.rows() {
            if r != rank && m.get(r, col) != 0 {
                let f = m.get(r, col);
                for c in col..m.cols() {
                    let v = ctx.add(m.get(r, c), ctx.mul(f, m.get(rank, c)));
                    m.set(r, c, v);
                }
                b[r] = ctx.add(b[r], ctx.mul(f, b[rank]));
            }
        }
        pivots.push((rank, col));
        rank += 1;
    }
    for r in rank..m.rows() {
        if b[r] != 0 {
            return Err(LinalgError::Inconsistent { row: r });
        }
    }

    let mask = if ctx.width() == 64 { u64::MAX } else { (1u64 << ctx.width()) - 1 };
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut x = vec![0u64; m.cols()];
    for col in 0..m.cols() {
        if !pivot_cols.contains(&col) {
            x[col] = rng.gen::<u64>() & mask;
        }
    }
    // Rows are fully reduced, so each pivot variable is rhs minus the free
    // columns' contribution on its row.
    for &(row, col) in &pivots {
        let mut v = b[row];
        for c in 0..m.cols() {
            if c != col && m.get(row, c) != 0 {
                v = ctx.add(v, ctx.mul(m.get(row, c), x[c]));
            }
        }
        x[col] = v;
    }
    Ok(AffineSolution { solution: x, kernel_dim: m.cols() - rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::collections::HashMap;

    fn gf(w: u32) -> FieldCtx {
        FieldCtx::new(w).unwrap()
    }

    #[test]
    fn vandermonde_rejects_duplicates() {
        let e = vandermonde(gf(3), &[1, 2, 1], 3).unwrap_err();
        assert_eq!(e, LinalgError::DuplicatePoint(1));
    }

    #[test]
    fn vandermonde_full_rank_all_point_subsets_gf8() {
        // Every subset of distinct points of GF(2^3) gives rank = #points,
        // using both the square shape and the widest (degree 7) shape.
        let f = gf(3);
        for mask in 1u32..256 {
            let points: Vec<u64> = (0..8u64).filter(|&p| mask >> p & 1 == 1).collect();
            let s = points.len();
            let sq = vandermonde(f, &points, s - 1).unwrap();
            assert_eq!(sq.rank(), s, "square, points {points:?}");
            let wide = vandermonde(f, &points, 7).unwrap();
            assert_eq!(wide.rank(), s, "wide, points {points:?}");
        }
    }

    #[test]
    fn rank_of_singular_matrix() {
        let f = gf(2);
        // Row 3 = row 1 + row 2, rows 1 and 2 independent.
        let m = GfMatrix::from_rows(f, &[vec![1, 2, 3], vec![1, 3, 2], vec![0, 1, 1]]).unwrap();
        assert_eq!(m.rank(), 2);
    }

    #[test]
    fn solve_finds_exact_solution_when_unique() {
        let f = gf(3);
        let m = vandermonde(f, &[1, 2, 5], 2).unwrap();
        // Evaluate p(x) = 3 + 4x + 6x^2 at the three points, then solve back.
        let coeffs = [3u64, 4, 6];
        let rhs: Vec<u64> = [1u64, 2, 5]
            .iter()
            .map(|&p| {
                let p2 = f.mul(p, p);
                f.add(coeffs[0], f.add(f.mul(coeffs[1], p), f.mul(coeffs[2], p2)))
            })
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let sol = solve_affine_uniform(&m, &rhs, &mut rng).unwrap();
        assert_eq!(sol.kernel_dim, 0);
        assert_eq!(sol.solution, coeffs);
    }

    #[test]
    fn solve_reports_inconsistency() {
        let f = gf(2);
        let m = GfMatrix::from_rows(f, &[vec![1, 1], vec![1, 1]]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let e = solve_affine_uniform(&m, &[1, 2], &mut rng).unwrap_err();
        assert!(matches!(e, LinalgError::Inconsistent { .. }));
    }

    #[test]
    fn solve_affine_uniform_is_uniform_on_solution_set() {
        // One Vandermonde row over GF(2^2), degree 2: kernel dim 2, so the
        // solution set has 16 elements. Check exact membership and a
        // chi-square fit against uniform over 10^4 seeded draws.
        let f = gf(2);
        let m = vandermonde(f, &[2], 2).unwrap();
        let rhs = [3u64];
        let eval = |x: &[u64]| {
            let p = 2u64;
            f.add(x[0], f.add(f.mul(x[1], p), f.mul(x[2], f.mul(p, p))))
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0xfeed);
        let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
        let draws = 10_000u64;
        for _ in 0..draws {
            let sol = solve_affine_uniform(&m, &rhs, &mut rng).unwrap();
            assert_eq!(sol.kernel_dim, 2);
            assert_eq!(eval(&sol.solution), 3);
            *counts.entry(sol.solution).or_default() += 1;
        }
        assert_eq!(counts.len(), 16);
        let expected = draws as f64 / 16.0;
        let stat: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // dof = 15; chi-square 0.99 quantile is 30.58.
        assert!(stat < 30.58, "chi-square statistic {stat} too large");
    }

    #[test]
    fn solve_works_over_gf2() {
        let f = gf(1);
        let m = GfMatrix::from_rows(f, &[vec![1, 0, 1], vec![0, 1, 1]]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..32 {
            let sol = solve_affine_uniform(&m, &[1, 0], &mut rng).unwrap();
            assert_eq!(sol.kernel_dim, 1);
            assert_eq!(sol.solution[0] ^ sol.solution[2], 1);
            assert_eq!(sol.solution[1] ^ sol.solution[2], 0);
        }
    }
}
