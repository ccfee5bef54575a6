//! Uniform cell-centered grids and the spatial operators shared by all solvers.
//!
//! The domain is an interval (1D) or a rectangle (2D) discretized into cells
//! of constant spacing per axis. Fields sample a scalar at cell centers.
//! Boundary handling is everywhere the reflected-ghost convention: the ghost
//! value outside a face equals the cell value inside, so the discrete normal
//! derivative at every boundary face is exactly zero and flux sums telescope
//! to zero. Two consequences the rest of the crate relies on:
//!
//! * `laplacian_neumann` and `advective_div` integrate to zero over the
//!   domain up to roundoff (discrete divergence theorem), which makes mass
//!   conservation exact for flux-form updates;
//! * `laplacian_neumann` is symmetric under the quadrature inner product,
//!   so `I - dt*L` is symmetric positive definite and safe for CG.
//!
//! All reductions run in a fixed cell order, so results are reproducible
//! bit-for-bit regardless of how callers schedule their own work.

use crate::error::{Error, Result};

/// Uniform Cartesian mesh on an interval or rectangle.
///
/// Cells are indexed `ix + nx * iy`; cell centers sit at `(i + 1/2) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 2],
    extents: [f64; 2],
}

impl Grid {
    /// 1D interval `(0, extent)` with `n` cells.
    pub fn line(extent: f64, n: usize) -> Self {
        assert!(extent > 0.0 && n >= 3, "need extent > 0 and n >= 3");
        Self { dim: 1, n: [n, 1], extents: [extent, 1.0] }
    }

    /// 2D rectangle `(0, ex) x (0, ey)`.
    pub fn rectangle(extents: [f64; 2], n: [usize; 2]) -> Self {
        assert!(
            extents.iter().all(|&e| e > 0.0) && n.iter().all(|&k| k >= 3),
            "need positive extents and n >= 3 per axis"
        );
        Self { dim: 2, n, extents }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells along axis `a` (1 for the unused axis of a 1D grid).
    pub fn n(&self, a: usize) -> usize {
        self.n[a]
    }

    pub fn extent(&self, a: usize) -> f64 {
        self.extents[a]
    }

    /// Cell spacing along axis `a`.
    pub fn h(&self, a: usize) -> f64 {
        self.extents[a] / self.n[a] as f64
    }

    pub fn min_h(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn num_cells(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// |Omega|, the product of the extents.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.extent(a)).product()
    }

    /// Volume of one cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    /// Cell-center coordinate of cell `idx` (second component 0 in 1D).
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let ix = idx % self.n[0];
        let iy = idx / self.n[0];
        [(ix as f64 + 0.5) * self.h(0), if self.dim == 2 { (iy as f64 + 0.5) * self.h(1) } else { 0.0 }]
    }

    /// Indices of cells that touch the boundary.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let (nx, ny) = (self.n[0], self.n[1]);
        let mut out = Vec::new();
        for idx in 0..self.num_cells() {
            let ix = idx % nx;
            let iy = idx / nx;
            let on_x = ix == 0 || ix == nx - 1;
            let on_y = self.dim == 2 && (iy == 0 || iy == ny - 1);
            if on_x || on_y {
                out.push(idx);
            }
        }
        out
    }
}

/// Scalar sample on the cells of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.num_cells()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Build from raw cell values (length must match the grid).
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.num_cells(), "value count must match grid");
        let f = Self { grid, values };
        f.debug_check_finite();
        f
    }

    /// Sample `f(x, y)` at cell centers (`y` is 0 in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.num_cells())
            .map(|i| {
                let c = grid.center(i);
                f(c[0], c[1])
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cellwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Cellwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn debug_check_finite(&self) {
        debug_assert!(self.is_finite(), "field contains non-finite values");
    }
}

/// Axis geometry used by the stencil loops: neighbor offsets with reflection.
struct AxisIter {
    count: usize,
    stride: usize,
    lines: usize,
    line_stride: usize,
    h: f64,
}

fn axis_iter(grid: Grid, a: usize) -> AxisIter {
    let (nx, ny) = (grid.n(0), grid.n(1));
    if a == 0 {
        AxisIter { count: nx, stride: 1, lines: ny, line_stride: nx, h: grid.h(0) }
    } else {
        AxisIter { count: ny, stride: nx, lines: nx, line_stride: 1, h: grid.h(1) }
    }
}

/// Second-order Laplacian with reflected ghosts (homogeneous Neumann).
///
/// The output integrates to zero over the domain: every interior face flux
/// appears once with each sign and boundary faces carry none.
pub fn laplacian_neumann(f: &Field) -> Field {
    let grid = f.grid();
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for a in 0..grid.dim() {
        let ax = axis_iter(grid, a);
        let inv_h2 = 1.0 / (ax.h * ax.h);
        for line in 0..ax.lines {
            let base = line * ax.line_stride;
            for k in 0..ax.count {
                let i = base + k * ax.stride;
                let left = if k == 0 { v[i] } else { v[i - ax.stride] };
                let right = if k == ax.count - 1 { v[i] } else { v[i + ax.stride] };
                out[i] += (left - 2.0 * v[i] + right) * inv_h2;
            }
        }
    }
    Field::from_values(grid, out)
}

/// Cell-centered gradient, one field per axis.
///
/// Central differences in the interior; at boundary cells the reflected ghost
/// turns the stencil one-sided, consistent with a zero normal derivative at
/// the boundary face itself.
pub fn gradient(f: &Field) -> Vec<Field> {
    let grid = f.grid();
    let v = f.values();
    let mut out = Vec::with_capacity(grid.dim());
    for a in 0..grid.dim() {
        let ax = axis_iter(grid, a);
        let inv_2h = 1.0 / (2.0 * ax.h);
        let mut g = vec![0.0; v.len()];
        for line in 0..ax.lines {
            let base = line * ax.line_stride;
            for k in 0..ax.count {
                let i = base + k * ax.stride;
                let left = if k == 0 { v[i] } else { v[i - ax.stride] };
                let right = if k == ax.count - 1 { v[i] } else { v[i + ax.stride] };
                g[i] = (right - left) * inv_2h;
            }
        }
        out.push(Field::from_values(grid, g));
    }
    out
}

/// Face-value choice for the advected density in [`advective_div`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceAverage {
    /// Arithmetic mean of the two adjacent cells; second order, the default.
    #[default]
    Arithmetic,
    /// Donor-cell value selected by the sign of the face velocity.
    Upwind,
}

/// Conservative divergence of the chemotactic flux, `div(u grad w)`.
///
/// Face flux = (face value of `u`) x (central difference of `w` across the
/// face). Boundary faces carry zero flux, which together with the reflected
/// diffusive flux realizes the no-flux condition on the combined flux.
pub fn advective_div(u: &Field, w: &Field) -> Field {
    advective_div_with(u, w, FaceAverage::Arithmetic)
}

/// [`advective_div`] with an explicit face-average rule.
pub fn advective_div_with(u: &Field, w: &Field, avg: FaceAverage) -> Field {
    let grid = u.grid();
    assert_eq!(grid, w.grid(), "fields must share a grid");
    let uv = u.values();
    let wv = w.values();
    let mut out = vec![0.0; uv.len()];
    for a in 0..grid.dim() {
        let ax = axis_iter(grid, a);
        let inv_h = 1.0 / ax.h;
        for line in 0..ax.lines {
            let base = line * ax.line_stride;
            // Interior faces only; boundary faces contribute nothing.
            for k in 0..ax.count - 1 {
                let i = base + k * ax.stride;
                let j = i + ax.stride;
                let vel = (wv[j] - wv[i]) * inv_h;
                let face_u = match avg {
                    FaceAverage::Arithmetic => 0.5 * (uv[i] + uv[j]),
                    FaceAverage::Upwind => {
                        if vel > 0.0 {
                            uv[i]
                        } else {
                            uv[j]
                        }
                    }
                };
                let flux = face_u * vel;
                out[i] += flux * inv_h;
                out[j] -= flux * inv_h;
            }
        }
    }
    Field::from_values(grid, out)
}

/// Midpoint-rule integral over the domain; exact for constants and linears.
pub fn integrate(f: &Field) -> f64 {
    let cell = f.grid().cell_volume();
    f.values().iter().sum::<f64>() * cell
}

/// Quadrature inner product `sum f_i g_i * cell_volume`.
pub fn inner(f: &Field, g: &Field) -> f64 {
    assert_eq!(f.grid(), g.grid(), "fields must share a grid");
    let cell = f.grid().cell_volume();
    f.values().iter().zip(g.values()).map(|(&a, &b)| a * b).sum::<f64>() * cell
}

/// `L^p` norm for `p >= 1`; pass `f64::INFINITY` for the max norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_infinite() && p > 0.0 {
        return Ok(f.values().iter().fold(0.0_f64, |m, &v| m.max(v.abs())));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter { name: "p", message: format!("L^p norm needs p >= 1, got {p}") });
    }
    let cell = f.grid().cell_volume();
    let s: f64 = f.values().iter().map(|&v| v.abs().powf(p)).sum();
    Ok((s * cell).powf(1.0 / p))
}

/// `L^2` norm (the common case, infallible).
pub fn l2_norm(f: &Field) -> f64 {
    let cell = f.grid().cell_volume();
    let s: f64 = f.values().iter().map(|&v| v * v).sum();
    (s * cell).sqrt()
}

/// Max norm (infallible convenience).
pub fn max_norm(f: &Field) -> f64 {
    f.values().iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Deterministic pseudo-random field for operator identities.
    pub(crate) fn lcg_field(grid: Grid, seed: u64) -> Field {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        Field::from_values(grid, (0..grid.num_cells()).map(|_| next()).collect())
    }

    #[test]
    fn volume_matches_unit_integral() {
        for grid in [Grid::line(2.5, 17), Grid::rectangle([2.0, 1.0], [12, 7])] {
            let one = Field::constant(grid, 1.0);
            assert!((integrate(&one) - grid.volume()).abs() <= 1e-14 * grid.volume());
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = Grid::line(1.0, 16);
        let c = Field::constant(grid, 3.7);
        assert!(max_norm(&laplacian_neumann(&c)) == 0.0);
        assert!(gradient(&c).iter().all(|g| max_norm(g) == 0.0));
        // No chemical gradient and no density both give a zero flux divergence.
        let u = lcg_field(grid, 7);
        assert!(max_norm(&advective_div(&u, &c)) == 0.0);
        let zero = Field::zeros(grid);
        assert!(max_norm(&advective_div(&zero, &u)) == 0.0);
    }

    #[test]
    fn laplacian_of_cosine_is_second_order() {
        // -pi^2 cos(pi x) is the exact Laplacian; reflection is exact for the
        // even extension of cos(pi x) on (0,1), so the error is O(h^2)
        // everywhere including boundary cells.
        let err_at = |n: usize| {
            let grid = Grid::line(1.0, n);
            let f = Field::from_fn(grid, |x, _| (std::f64::consts::PI * x).cos());
            let lap = laplacian_neumann(&f);
            let exact =
                Field::from_fn(grid, |x, _| -std::f64::consts::PI.powi(2) * (std::f64::consts::PI * x).cos());
            lap.zip_with(&exact, |a, b| a - b).map(f64::abs).max()
        };
        let e64 = err_at(64);
        let e128 = err_at(128);
        assert!(e64 < 3e-3, "max error {e64}");
        let ratio = e64 / e128;
        assert!((3.4..4.6).contains(&ratio), "expected 4x error reduction, got {ratio}");
    }

    #[test]
    fn gradient_of_quadratic_is_exact_in_the_interior() {
        let grid = Grid::line(1.0, 32);
        let f = Field::from_fn(grid, |x, _| x * x);
        let g = &gradient(&f)[0];
        for i in 1..31 {
            let x = grid.center(i)[0];
            assert!((g.values()[i] - 2.0 * x).abs() < 1e-12);
        }
        // Boundary cells fall back to first order.
        assert!((g.values()[0] - 2.0 * grid.center(0)[0]).abs() < grid.h(0));
    }

    #[test]
    fn gradient_interior_is_second_order() {
        let err_at = |n: usize| {
            let grid = Grid::line(1.0, n);
            let f = Field::from_fn(grid, |x, _| (2.3 * x).sin());
            let g = &gradient(&f)[0];
            (n / 4..3 * n / 4)
                .map(|i| (g.values()[i] - 2.3 * (2.3 * grid.center(i)[0]).cos()).abs())
                .fold(0.0_f64, f64::max)
        };
        let ratio = err_at(64) / err_at(128);
        assert!((3.4..4.6).contains(&ratio), "expected 4x error reduction, got {ratio}");
    }

    #[test]
    fn boundary_face_gradient_vanishes_by_reflection() {
        // The discrete normal derivative at the boundary face is
        // (ghost - cell)/h = 0 for any field under reflection; spot-check via
        // the flux view: a cosine's advective flux through boundary faces is
        // zero because boundary faces are simply never touched.
        let grid = Grid::line(1.0, 16);
        let w = Field::from_fn(grid, |x, _| (std::f64::consts::PI * x).cos());
        let u = Field::constant(grid, 1.0);
        let div = advective_div(&u, &w);
        // Total flux balance: integral exactly telescopes to zero.
        assert!(integrate(&div).abs() < 1e-13);
    }

    #[test]
    fn discrete_divergence_theorem() {
        for grid in [Grid::line(1.0, 64), Grid::rectangle([2.0, 1.0], [24, 16])] {
            let f = lcg_field(grid, 11);
            let u = lcg_field(grid, 13).map(|v| v + 2.0);
            let w = lcg_field(grid, 17);
            let lap_int = integrate(&laplacian_neumann(&f)).abs();
            assert!(lap_int <= 1e-12 * max_norm(&f) / grid.min_h().powi(2) * grid.volume());
            let adv_int = integrate(&advective_div(&u, &w)).abs();
            let scale = max_norm(&u) * max_norm(&w) / grid.min_h();
            assert!(adv_int <= 1e-12 * scale.max(1.0));
            let advu_int = integrate(&advective_div_with(&u, &w, FaceAverage::Upwind)).abs();
            assert!(advu_int <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn laplacian_is_symmetric() {
        for grid in [Grid::line(1.0, 17), Grid::rectangle([1.5, 1.0], [9, 7])] {
            let f = lcg_field(grid, 3);
            let g = lcg_field(grid, 5);
            let lhs = inner(&laplacian_neumann(&f), &g);
            let rhs = inner(&f, &laplacian_neumann(&g));
            let scale = (max_norm(&f) * max_norm(&g) / grid.min_h().powi(2)).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-10 * scale, "asymmetry {}", (lhs - rhs).abs());
        }
    }

    #[test]
    fn integrate_examples() {
        let one = Field::constant(Grid::line(1.0, 10), 1.0);
        assert!((integrate(&one) - 1.0).abs() < 1e-15);
        let three = Field::constant(Grid::rectangle([2.0, 1.0], [8, 8]), 3.0);
        assert!((integrate(&three) - 6.0).abs() < 1e-14);
        // Midpoint rule is exact for linear integrands.
        let grid = Grid::line(1.0, 100);
        let x = Field::from_fn(grid, |x, _| x);
        assert!((integrate(&x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lp_norm_examples() {
        let grid = Grid::line(1.0, 10);
        assert!((lp_norm(&Field::constant(grid, 2.0), 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((lp_norm(&Field::constant(grid, -3.0), f64::INFINITY).unwrap() - 3.0).abs() < 1e-15);
        // Indicator of half the domain.
        let step = Field::from_fn(grid, |x, _| if x < 0.5 { 1.0 } else { 0.0 });
        assert!((lp_norm(&step, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(lp_norm(&step, 0.5).is_err());
    }

    proptest::proptest! {
        #[test]
        fn flux_divergences_integrate_to_zero(seed in 0u64..1000) {
            let grid = Grid::line(1.0, 32);
            let u = lcg_field(grid, seed).map(|v| v + 1.5);
            let w = lcg_field(grid, seed.wrapping_add(101));
            let total = integrate(&advective_div(&u, &w)).abs();
            let scale = (max_norm(&u) * max_norm(&w) / grid.min_h()).max(1.0);
            proptest::prop_assert!(total <= 1e-12 * scale);
        }
    }
}
