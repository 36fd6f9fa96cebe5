//! Positive vertex densities multiplying the time derivative in
//! `rho du/dt = Delta u`, together with the two lower-bound profiles the
//! uniqueness gates distinguish: bounded below by a constant, and vanishing
//! at infinity no faster than a power of the distance.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::PseudoMetric;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    /// `rho(x) >= rho0` everywhere.
    BoundedBelow { rho0: f64 },
    /// `rho(x) >= rho0 (d(x, x0) + k)^{-sigma}` with `k` above the jump size.
    Vanishing {
        rho0: f64,
        sigma: f64,
        k: f64,
        x0: usize,
    },
}

#[derive(Debug, Clone)]
pub struct DensityField {
    pub rho: Vec<f64>,
    pub profile: Option<DensityProfile>,
}

impl DensityField {
    pub fn new(rho: Vec<f64>, profile: Option<DensityProfile>) -> Result<Self> {
        if let Some((x, &v)) = rho.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::Precondition(format!(
                "density must be positive, rho[{x}] = {v}"
            )));
        }
        Ok(DensityField { rho, profile })
    }

    pub fn constant(g: &WeightedGraph, value: f64) -> Result<Self> {
        Self::new(
            vec![value; g.n()],
            Some(DensityProfile::BoundedBelow { rho0: value }),
        )
    }

    /// The exact borderline field `rho(x) = rho0 (d(x,x0) + k)^{-sigma}`.
    pub fn vanishing(
        g: &WeightedGraph,
        d: &PseudoMetric,
        x0: usize,
        rho0: f64,
        sigma: f64,
        k: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::range("sigma", sigma, "(0, inf)"));
        }
        if k <= d.jump_size() {
            return Err(Error::range("k", k, format!("({}, inf)", d.jump_size())));
        }
        let row = d.distances_from(x0);
        debug_assert_eq!(row.len(), g.n());
        let rho = row.iter().map(|&dd| rho0 * (dd + k).powf(-sigma)).collect();
        Self::new(
            rho,
            Some(DensityProfile::Vanishing {
                rho0,
                sigma,
                k,
                x0,
            }),
        )
    }

    /// Best constant lower bound available on the truncation.
    pub fn min_rho(&self) -> f64 {
        self.rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `rho0` for the bounded-below reading: the declared constant when the
    /// profile says so, otherwise the measured minimum.
    pub fn rho0_bounded(&self) -> f64 {
        match self.profile {
            Some(DensityProfile::BoundedBelow { rho0 }) => rho0,
            _ => self.min_rho(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProfileCheck {
    pub profile: DensityProfile,
    pub passed: bool,
    /// `(label, rho, required lower bound)` of the worst violation.
    pub witness: Option<(String, f64, f64)>,
}

/// Verifies the declared lower-bound profile vertexwise on the truncation.
pub fn density_profile_check(
    g: &WeightedGraph,
    d: &PseudoMetric,
    rho: &DensityField,
) -> Result<ProfileCheck> {
    let profile = rho
        .profile
        .ok_or_else(|| Error::Precondition("density declares no profile".into()))?;
    let tol = 1e-12;
    let mut witness: Option<(String, f64, f64)> = None;
    match profile {
        DensityProfile::BoundedBelow { rho0 } => {
            for x in 0..g.n() {
                if rho.rho[x] < rho0 * (1.0 - tol) {
                    witness = Some((g.label(x).to_string(), rho.rho[x], rho0));
                    break;
                }
            }
        }
        DensityProfile::Vanishing {
            rho0,
            sigma,
            k,
            x0,
        } => {
            if k <= d.jump_size() {
                return Err(Error::range("k", k, format!("({}, inf)", d.jump_size())));
            }
            let row = d.distances_from(x0);
            for x in 0..g.n() {
                let bound = rho0 * (row[x] + k).powf(-sigma);
                if rho.rho[x] < bound * (1.0 - tol) {
                    witness = Some((g.label(x).to_string(), rho.rho[x], bound));
                    break;
                }
            }
        }
    }
    Ok(ProfileCheck {
        profile,
        passed: witness.is_none(),
        witness,
    })
}

/// Radial weight `exp{-beta d log d}` whose weighted-space membership implies
/// the exponential growth condition. `d log d` is read as 0 at `d = 0`.
pub fn exp_log_weight(dist: f64, beta: f64) -> f64 {
    if dist <= 0.0 {
        1.0
    } else {
        (-beta * dist * dist.ln()).exp()
    }
}

/// Radial weight `(d + k)^{-beta}` whose weighted-space membership implies the
/// polynomial growth condition.
pub fn poly_weight(dist: f64, beta: f64, k: f64) -> f64 {
    (dist + k).powf(-beta)
}

/// Ball volumes `mu(B_R(x0))` for a radius sequence. Informational input to
/// the volume-growth remarks; carries no finite-radius guarantee.
pub fn ball_volumes(
    g: &WeightedGraph,
    d: &PseudoMetric,
    x0: usize,
    radii: &[f64],
) -> Vec<f64> {
    let row = d.distances_from(x0);
    radii
        .iter()
        .map(|&r| {
            (0..g.n())
                .filter(|&x| row[x] < r)
                .map(|x| g.mu(x))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;

    #[test]
    fn constant_density_passes_bounded_check() {
        let g = z_segment(10);
        let d = PseudoMetric::combinatorial(&g);
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let check = density_profile_check(&g, &d, &rho).unwrap();
        assert!(check.passed);
    }

    #[test]
    fn vanishing_profile_equality_case_passes() {
        let g = z_segment(20);
        let d = PseudoMetric::combinatorial(&g);
        let x0 = g.vertex("0").unwrap();
        let rho = DensityField::vanishing(&g, &d, x0, 1.0, 1.0, 2.0).unwrap();
        // rho(x) = (|x| + 2)^{-1} exactly
        let x3 = g.vertex("3").unwrap();
        assert!((rho.rho[x3] - 0.2).abs() < 1e-15);
        let check = density_profile_check(&g, &d, &rho).unwrap();
        assert!(check.passed);
    }

    #[test]
    fn too_fast_decay_fails_with_witness() {
        let g = z_segment(20);
        let d = PseudoMetric::combinatorial(&g);
        let x0 = g.vertex("0").unwrap();
        let row = d.distances_from(x0);
        let rho = DensityField::new(
            row.iter().map(|&dd| (dd + 2.0).powf(-3.0)).collect(),
            Some(DensityProfile::Vanishing {
                rho0: 1.0,
                sigma: 2.0,
                k: 2.0,
                x0,
            }),
        )
        .unwrap();
        let check = density_profile_check(&g, &d, &rho).unwrap();
        assert!(!check.passed);
        assert!(check.witness.is_some());
    }

    #[test]
    fn k_must_exceed_jump_size() {
        let g = z_segment(5);
        let d = PseudoMetric::combinatorial(&g);
        let x0 = g.vertex("0").unwrap();
        assert!(DensityField::vanishing(&g, &d, x0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn weights_behave_radially() {
        assert_eq!(exp_log_weight(0.0, 0.3), 1.0);
        assert!(exp_log_weight(10.0, 0.3) < exp_log_weight(5.0, 0.3));
        assert!((poly_weight(3.0, 1.0, 2.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ball_volumes_monotone() {
        let g = z_segment(30);
        let d = PseudoMetric::combinatorial(&g);
        let x0 = g.vertex("0").unwrap();
        let vols = ball_volumes(&g, &d, x0, &[1.0, 5.0, 10.0, 100.0]);
        assert_eq!(vols[0], 1.0);
        assert_eq!(vols[1], 9.0);
        assert!(vols.windows(2).all(|w| w[0] <= w[1]));
    }
}
