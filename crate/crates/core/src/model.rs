//! Core state types for the coupled system
//!
//! ```text
//! u_t = div(grad u - u grad w) + delta u (1 - u)
//! w_t = -w^beta u
//! ```
//!
//! with no flux of `u` through the boundary and initial data `u0 >= 0`,
//! `w0 > 0`. The change of variables `v = u e^{-w}` turns the coupled-flux
//! boundary condition into a plain homogeneous Neumann condition and is used
//! by the implicit solvers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid};

/// Model parameters. The diffusivity, sensitivity and degradation constants
/// are normalized to one; `delta` is the logistic rate and `beta >= 1` the
/// degradation exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parameters {
    delta: f64,
    beta: f64,
}

impl Parameters {
    pub fn new(delta: f64, beta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter { name: "delta", message: format!("must be finite and >= 0, got {delta}") });
        }
        if !(beta >= 1.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter { name: "beta", message: format!("must be finite and >= 1, got {beta}") });
        }
        Ok(Self { delta, beta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Instantaneous simulation state.
///
/// `uacc` holds the trapezoidal accumulation of `int_0^t u ds` per cell; the
/// closed-form update of `w` is a function of it, which is what keeps
/// `0 < w <= w0` and the pointwise monotonicity of `w` exact in the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub w: Field,
    pub t: f64,
    pub uacc: Field,
}

impl State {
    pub fn initial(init: &InitialData) -> Self {
        Self {
            u: init.u0.clone(),
            w: init.w0.clone(),
            t: 0.0,
            uacc: Field::zeros(init.u0.grid()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }
}

/// Initial data plus the certified lower bound `gamma` on `u0`.
///
/// `gamma` is supplied by the scenario author rather than inferred from the
/// samples, so the positivity floor `min{1, gamma} e^{-max w0}` stays a
/// prediction that the run is checked against. `gamma = 0` disables rate
/// predictions.
#[derive(Debug, Clone)]
pub struct InitialData {
    u0: Field,
    w0: Field,
    gamma: f64,
}

impl InitialData {
    pub fn new(u0: Field, w0: Field, gamma: f64) -> Result<Self> {
        if u0.grid() != w0.grid() {
            return Err(Error::GridMismatch("u0 and w0 live on different grids".into()));
        }
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter { name: "gamma", message: format!("must be >= 0, got {gamma}") });
        }
        if !u0.is_finite() || !w0.is_finite() {
            return Err(Error::Admissibility("initial fields contain non-finite values".into()));
        }
        if u0.min() < gamma {
            return Err(Error::Admissibility(format!(
                "gamma = {gamma} is not a lower bound: min u0 = {}",
                u0.min()
            )));
        }
        if w0.min() <= 0.0 {
            return Err(Error::Admissibility(format!("w0 must be strictly positive, min = {}", w0.min())));
        }
        Ok(Self { u0, w0, gamma })
    }

    pub fn u0(&self) -> &Field {
        &self.u0
    }

    pub fn w0(&self) -> &Field {
        &self.w0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grid(&self) -> Grid {
        self.u0.grid()
    }
}

/// `v = u e^{-w}` cellwise.
pub fn to_v(u: &Field, w: &Field) -> Field {
    u.zip_with(w, |u, w| u * (-w).exp())
}

/// `u = v e^{w}` cellwise, the inverse of [`to_v`].
pub fn from_v(v: &Field, w: &Field) -> Field {
    v.zip_with(w, |v, w| v * w.exp())
}

/// One item of the admissibility report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

/// Outcome of [`check_admissibility`].
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// min u0, required >= 0 (and >= gamma, validated at construction).
    pub u0_nonnegative: CheckItem,
    /// min w0, required > 0.
    pub w0_positive: CheckItem,
    /// Value of the energy functional at t = 0; must be finite.
    pub lyapunov_value: f64,
    pub lyapunov_finite: bool,
    /// Max over boundary cells of |du0/dn - u0 dw0/dn|, one-sided differences.
    pub compatibility_residual: f64,
    pub compatibility_tolerance: f64,
    pub compatibility_pass: bool,
    pub pass: bool,
}

/// Default tolerance for the boundary compatibility residual.
///
/// The residual is measured with first-order one-sided differences, so even
/// analytically compatible profiles (e.g. a cosine bump, whose normal
/// derivative vanishes at the boundary) leave an O(h) truncation footprint
/// when sampled at cell centers. The sqrt(h) term sits between that footprint
/// and the O(1) residual of genuinely incompatible data; the 1e-8 floor
/// covers exactly compatible discrete data such as constants.
pub fn default_compatibility_tolerance(init: &InitialData) -> f64 {
    let scale = 1.0 + grid::max_norm(init.u0()) * grid::max_norm(init.w0());
    let h_max = (0..init.grid().dim()).map(|a| init.grid().h(a)).fold(0.0_f64, f64::max);
    scale * (1e-8 + h_max.sqrt())
}

/// Validate initial data: sign conditions, finiteness of the energy
/// functional, and the discrete boundary compatibility residual.
pub fn check_admissibility(
    init: &InitialData,
    params: &Parameters,
    compatibility_tolerance: Option<f64>,
) -> AdmissibilityReport {
    let u0 = init.u0();
    let w0 = init.w0();
    let u0_min = u0.min();
    let w0_min = w0.min();

    let state = State::initial(init);
    let f_value = crate::diagnostics::lyapunov_f(&state, params).value;

    let tol = compatibility_tolerance.unwrap_or_else(|| default_compatibility_tolerance(init));
    let residual = compatibility_residual(u0, w0);

    let u0_ok = u0_min >= 0.0;
    let w0_ok = w0_min > 0.0;
    let f_ok = f_value.is_finite();
    let compat_ok = residual <= tol;
    AdmissibilityReport {
        u0_nonnegative: CheckItem { pass: u0_ok, measured: u0_min, threshold: 0.0 },
        w0_positive: CheckItem { pass: w0_ok, measured: w0_min, threshold: 0.0 },
        lyapunov_value: f_value,
        lyapunov_finite: f_ok,
        compatibility_residual: residual,
        compatibility_tolerance: tol,
        compatibility_pass: compat_ok,
        pass: u0_ok && w0_ok && f_ok && compat_ok,
    }
}

/// Max over boundary cells of |du/dn - u dw/dn| with first-order one-sided
/// differences pointing outward.
pub fn compatibility_residual(u0: &Field, w0: &Field) -> f64 {
    let grid = u0.grid();
    assert_eq!(grid, w0.grid(), "fields must share a grid");
    let (nx, ny) = (grid.n(0), grid.n(1));
    let uv = u0.values();
    let wv = w0.values();
    let mut worst = 0.0_f64;
    let mut visit = |cell: usize, inward: usize, h: f64| {
        // Outward normal derivative ~ (cell - inward_neighbor) / h.
        let du = (uv[cell] - uv[inward]) / h;
        let dw = (wv[cell] - wv[inward]) / h;
        worst = worst.max((du - uv[cell] * dw).abs());
    };
    for iy in 0..ny {
        visit(iy * nx, iy * nx + 1, grid.h(0));
        visit(iy * nx + nx - 1, iy * nx + nx - 2, grid.h(0));
    }
    if grid.dim() == 2 {
        for ix in 0..nx {
            visit(ix, ix + nx, grid.h(1));
            visit((ny - 1) * nx + ix, (ny - 2) * nx + ix, grid.h(1));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Field, Grid};

    fn params(delta: f64, beta: f64) -> Parameters {
        Parameters::new(delta, beta).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(Parameters::new(0.0, 1.0).is_ok());
        assert!(Parameters::new(-0.1, 1.0).is_err());
        assert!(Parameters::new(1.0, 0.5).is_err());
        assert!(Parameters::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn change_of_variables_examples() {
        let grid = Grid::line(1.0, 8);
        let one = Field::constant(grid, 1.0);
        let zero = Field::zeros(grid);
        assert_eq!(to_v(&one, &zero).values(), one.values());
        let e = Field::constant(grid, std::f64::consts::E);
        let v = to_v(&e, &one);
        assert!(v.values().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let u = from_v(&Field::constant(grid, 1.0), &Field::constant(grid, 2.0_f64.ln()));
        assert!(u.values().iter().all(|&x| (x - 2.0).abs() < 1e-15));
    }

    proptest::proptest! {
        #[test]
        fn round_trip_is_identity(seed in 0u64..500) {
            let grid = Grid::line(1.0, 16);
            let u = crate::grid::tests::lcg_field(grid, seed).map(|v| v.abs() * 3.0);
            let w = crate::grid::tests::lcg_field(grid, seed.wrapping_add(7)).map(|v| v.abs() + 0.1);
            let back = from_v(&to_v(&u, &w), &w);
            for (a, b) in back.values().iter().zip(u.values()) {
                proptest::prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn constant_data_is_admissible_with_expected_energy() {
        let grid = Grid::line(1.0, 32);
        let init = InitialData::new(Field::constant(grid, 1.0), Field::constant(grid, 1.0), 1.0).unwrap();
        let report = check_admissibility(&init, &params(1.0, 1.0), None);
        assert!(report.pass);
        assert_eq!(report.compatibility_residual, 0.0);
        // u ln u - u integrates to -|Omega| for u = 1.
        assert!((report.lyapunov_value + grid.volume()).abs() < 1e-12);
    }

    #[test]
    fn negative_cell_fails_nonnegativity() {
        let grid = Grid::line(1.0, 8);
        let mut vals = vec![1.0; 8];
        vals[3] = -0.25;
        let u0 = Field::from_values(grid, vals);
        let init = InitialData::new(u0, Field::constant(grid, 1.0), 0.0);
        // Construction already rejects it: gamma = 0 is not a lower bound.
        assert!(init.is_err());
    }

    #[test]
    fn cosine_bump_is_compatible_at_desk_resolution() {
        let grid = Grid::line(1.0, 64);
        let u0 = Field::from_fn(grid, |x, _| 1.0 + 0.5 * (std::f64::consts::PI * x).cos());
        let w0 = Field::constant(grid, 1.0);
        let init = InitialData::new(u0, w0, 0.5).unwrap();
        let report = check_admissibility(&init, &params(1.0, 1.0), None);
        assert!(report.compatibility_pass, "residual {} tol {}", report.compatibility_residual, report.compatibility_tolerance);
        // The analytic normal derivative vanishes; what remains is O(h) truncation.
        assert!(report.compatibility_residual <= std::f64::consts::PI.powi(2) * grid.h(0));
        assert!(report.pass);
    }

    #[test]
    fn sloped_profile_is_rejected() {
        let grid = Grid::line(1.0, 64);
        let u0 = Field::from_fn(grid, |x, _| 1.0 + x);
        let w0 = Field::constant(grid, 1.0);
        let init = InitialData::new(u0, w0, 0.0).unwrap();
        let report = check_admissibility(&init, &params(0.0, 1.0), None);
        assert!(!report.compatibility_pass);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = Field::constant(Grid::line(1.0, 8), 1.0);
        let b = Field::constant(Grid::line(1.0, 16), 1.0);
        assert!(InitialData::new(a, b, 0.0).is_err());
    }

    #[test]
    fn scaling_u0_scales_mass_and_keeps_compatibility() {
        let grid = Grid::line(1.0, 64);
        let w0 = Field::constant(grid, 2.0);
        for c in [0.5, 1.0, 4.0] {
            let u0 = Field::from_fn(grid, |x, _| c * (1.0 + 0.5 * (std::f64::consts::PI * x).cos()));
            let init = InitialData::new(u0.clone(), w0.clone(), 0.0).unwrap();
            let report = check_admissibility(&init, &params(0.0, 1.0), None);
            assert!(report.compatibility_pass, "c = {c}");
            assert!((integrate(&u0) - c).abs() < 1e-12 * c.max(1.0));
        }
    }
}
