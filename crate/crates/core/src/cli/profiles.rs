//! Named analytic initial profiles.
//!
//! Profiles are deliberately a small closed set instead of an expression
//! language: every profile has a known normal derivative at the walls, so the
//! boundary compatibility of a scenario is checkable before any compute.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// An analytic profile evaluated at cell centers.
///
/// * `constant`: `value` everywhere.
/// * `cosine-bump`: `base + amplitude * prod_axes cos(pi x_a / L_a)`; its
///   normal derivative vanishes on every wall.
/// * `gaussian-bump`: `base + amplitude * exp(-|x - center|^2 / (2 width^2))`
///   with `center` in relative coordinates (default the domain midpoint).
///   Only compatible to tolerance: the wall derivative is exponentially small
///   in the wall distance over `width`, and the admissibility gate measures
///   the leftover.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    CosineBump {
        base: f64,
        amplitude: f64,
    },
    GaussianBump {
        base: f64,
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

impl Profile {
    pub fn sample(&self, grid: Grid) -> Result<Field> {
        match self {
            Profile::Constant { value } => Ok(Field::constant(grid, *value)),
            Profile::CosineBump { base, amplitude } => Ok(Field::from_fn(grid, |x, y| {
                let mut bump = (std::f64::consts::PI * x / grid.extent(0)).cos();
                if grid.dim() == 2 {
                    bump *= (std::f64::consts::PI * y / grid.extent(1)).cos();
                }
                base + amplitude * bump
            })),
            Profile::GaussianBump { base, amplitude, width, center } => {
                if !(*width > 0.0) {
                    return Err(Error::Config("gaussian-bump width must be > 0".into()));
                }
                let c: Vec<f64> = match center {
                    Some(c) if c.len() == grid.dim() => {
                        c.iter().enumerate().map(|(a, rel)| rel * grid.extent(a)).collect()
                    }
                    Some(c) => {
                        return Err(Error::Config(format!(
                            "gaussian-bump center needs {} coordinates, got {}",
                            grid.dim(),
                            c.len()
                        )))
                    }
                    None => (0..grid.dim()).map(|a| 0.5 * grid.extent(a)).collect(),
                };
                let w2 = 2.0 * width * width;
                Ok(Field::from_fn(grid, |x, y| {
                    let mut r2 = (x - c[0]) * (x - c[0]);
                    if grid.dim() == 2 {
                        r2 += (y - c[1]) * (y - c[1]);
                    }
                    base + amplitude * (-r2 / w2).exp()
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::compatibility_residual;

    #[test]
    fn cosine_bump_matches_closed_form() {
        let grid = Grid::line(1.0, 64);
        let f = Profile::CosineBump { base: 1.0, amplitude: 0.5 }.sample(grid).unwrap();
        let x = grid.center(10)[0];
        assert!((f.values()[10] - (1.0 + 0.5 * (std::f64::consts::PI * x).cos())).abs() < 1e-15);
    }

    #[test]
    fn gaussian_bump_is_compatible_to_tolerance() {
        let grid = Grid::line(1.0, 64);
        let g = Profile::GaussianBump { base: 1.0, amplitude: 0.5, width: 0.08, center: None }
            .sample(grid)
            .unwrap();
        let w = Profile::Constant { value: 1.0 }.sample(grid).unwrap();
        // Wall distance is ~6 widths: the leftover normal derivative is tiny.
        assert!(compatibility_residual(&g, &w) < 1e-4);
    }

    #[test]
    fn two_dimensional_cosine_bump() {
        let grid = Grid::rectangle([2.0, 1.0], [16, 8]);
        let f = Profile::CosineBump { base: 1.0, amplitude: 0.25 }.sample(grid).unwrap();
        assert!(f.min() > 0.5 && f.max() < 1.5);
    }
}
