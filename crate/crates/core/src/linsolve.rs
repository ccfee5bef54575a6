//! Solvers for the implicit diffusion step `(I - c L) x = b`, where `L` is
//! the Neumann Laplacian of [`crate::grid::laplacian_neumann`].
//!
//! `L` is symmetric negative semidefinite under the quadrature inner product,
//! so the system matrix is symmetric positive definite for any `c >= 0` and
//! its row sums are all one; solving it preserves the discrete mass of the
//! right-hand side exactly (up to solver residual). 1D uses the Thomas
//! algorithm, 2D a matrix-free conjugate gradient with a fixed iteration
//! order for bit-reproducibility.

use crate::error::{Error, Result};
use crate::grid::{inner, laplacian_neumann, Field};

const CG_RELATIVE_TOLERANCE: f64 = 1e-14;

/// Solve `(I - c * laplacian_neumann) x = b` for `c >= 0`.
pub fn solve_diffusion(c: f64, b: &Field) -> Result<Field> {
    assert!(c >= 0.0 && c.is_finite(), "diffusion coefficient must be finite and >= 0");
    if c == 0.0 {
        return Ok(b.clone());
    }
    match b.grid().dim() {
        1 => Ok(solve_tridiagonal(c, b)),
        _ => solve_cg(c, b),
    }
}

/// Direct Thomas solve on the 1D tridiagonal system. The matrix is strictly
/// diagonally dominant, so no pivoting is needed.
fn solve_tridiagonal(c: f64, b: &Field) -> Field {
    let grid = b.grid();
    let n = grid.n(0);
    let r = c / (grid.h(0) * grid.h(0));
    // Row i: -r * x[i-1] + (1 + 2r) x[i] - r * x[i+1], with the reflected
    // ghost folding into the diagonal at both ends.
    let mut diag = vec![1.0 + 2.0 * r; n];
    diag[0] = 1.0 + r;
    diag[n - 1] = 1.0 + r;
    let off = -r;

    let mut rhs = b.values().to_vec();
    // Forward elimination.
    for i in 1..n {
        let m = off / diag[i - 1];
        diag[i] -= m * off;
        rhs[i] -= m * rhs[i - 1];
    }
    // Back substitution.
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - off * x[i + 1]) / diag[i];
    }
    Field::from_values(grid, x)
}

/// Matrix-free conjugate gradient for the 2D system.
fn solve_cg(c: f64, b: &Field) -> Result<Field> {
    let apply = |x: &Field| {
        let lap = laplacian_neumann(x);
        x.zip_with(&lap, |xi, li| xi - c * li)
    };
    let mut x = b.clone();
    let mut r = b.zip_with(&apply(&x), |bi, ax| bi - ax);
    let mut p = r.clone();
    let mut rs = inner(&r, &r);
    let b_norm = inner(b, b).sqrt().max(f64::MIN_POSITIVE);
    let max_iter = 40 * b.len().max(64);
    for _ in 0..max_iter {
        if rs.sqrt() <= CG_RELATIVE_TOLERANCE * b_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let denom = inner(&p, &ap);
        if denom <= 0.0 {
            break;
        }
        let alpha = rs / denom;
        x = x.zip_with(&p, |xi, pi| xi + alpha * pi);
        r = r.zip_with(&ap, |ri, api| ri - alpha * api);
        let rs_new = inner(&r, &r);
        let beta = rs_new / rs;
        p = r.zip_with(&p, |ri, pi| ri + beta * pi);
        rs = rs_new;
    }
    if rs.sqrt() <= CG_RELATIVE_TOLERANCE * b_norm {
        Ok(x)
    } else {
        Err(Error::SolveDiverged { iterations: max_iter, residual: rs.sqrt() / b_norm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_norm, max_norm, Grid};

    fn residual(c: f64, x: &Field, b: &Field) -> f64 {
        let lap = laplacian_neumann(x);
        let ax = x.zip_with(&lap, |xi, li| xi - c * li);
        max_norm(&ax.zip_with(b, |a, b| a - b))
    }

    #[test]
    fn constants_are_fixed_points() {
        // L annihilates constants, so (I - cL) c0 = c0 for any c.
        for grid in [Grid::line(1.0, 16), Grid::rectangle([1.0, 2.0], [8, 12])] {
            let b = Field::constant(grid, 2.5);
            let x = solve_diffusion(0.3, &b).unwrap();
            assert!(max_norm(&x.zip_with(&b, |a, b| a - b)) < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_solves_to_machine_precision() {
        let grid = Grid::line(1.0, 64);
        let b = crate::grid::tests::lcg_field(grid, 23);
        let x = solve_diffusion(1e-3, &b).unwrap();
        assert!(residual(1e-3, &x, &b) < 1e-13 * max_norm(&b).max(1.0));
    }

    #[test]
    fn cg_solves_2d() {
        let grid = Grid::rectangle([1.0, 1.0], [16, 16]);
        let b = crate::grid::tests::lcg_field(grid, 29);
        let c = 5e-3;
        let x = solve_diffusion(c, &b).unwrap();
        assert!(residual(c, &x, &b) < 1e-11 * l2_norm(&b).max(1.0));
    }

    #[test]
    fn solve_preserves_mass() {
        for grid in [Grid::line(1.0, 32), Grid::rectangle([1.0, 1.0], [12, 12])] {
            let b = crate::grid::tests::lcg_field(grid, 31).map(|v| v + 2.0);
            let x = solve_diffusion(2e-3, &b).unwrap();
            let drift = (crate::grid::integrate(&x) - crate::grid::integrate(&b)).abs();
            assert!(drift < 1e-12, "mass drift {drift}");
        }
    }
}
