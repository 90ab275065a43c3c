//! Radar array layout, tag angular position and the orientation-to-incidence
//! mapping.
//!
//! Sign conventions: `psi` is the tag's polar angle seen from the array
//! (`atan(z2 / z1)`, tag in the `z1 > 0` half-plane), `phi` is the tag
//! orientation and `theta` the polar angle at which the radar signal hits the
//! LWA. They are linked by `theta = sgn(phi) pi/2 - psi - phi`.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radiation::RadiationTable;

/// Planar position (m).
pub type Point = [f64; 2];

/// Closed interval `[lo, hi]`; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

/// Full orientation range `[-pi/2, pi/2]`.
pub const FULL_RANGE: Interval = Interval {
    lo: -FRAC_PI_2,
    hi: FRAC_PI_2,
};

/// Orientations compatible with a tag angle: disjoint, ordered closed
/// sub-intervals of `[-pi/2, pi/2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleSet {
    pub intervals: Vec<Interval>,
}

impl FeasibleSet {
    pub fn contains(&self, phi: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(phi))
    }
}

/// Radar/tag configuration for one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Number of radar antennas M.
    pub antennas: usize,
    /// Element spacing d (m).
    pub spacing: f64,
    /// True tag position (m).
    pub z_true: Point,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// True orientation (rad).
    pub phi_true: f64,
    /// Azimuth of the radiation vector (rad).
    pub phi_az: f64,
}

impl Scene {
    /// Builds and validates a scene; rejects ground truths that violate the
    /// orientation/position constraint.
    pub fn new(
        antennas: usize,
        spacing: f64,
        z_true: Point,
        sigma: (f64, f64),
        phi_true: f64,
        phi_az: f64,
    ) -> Result<Self> {
        let scene = Self {
            antennas,
            spacing,
            z_true,
            sigma_x: sigma.0,
            sigma_y: sigma.1,
            phi_true,
            phi_az,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Tag at distance `range` and angle `psi` from the array origin.
    pub fn at_angle(
        antennas: usize,
        spacing: f64,
        range: f64,
        psi: f64,
        sigma: f64,
        phi_true: f64,
        phi_az: f64,
    ) -> Result<Self> {
        Self::new(
            antennas,
            spacing,
            [range * psi.cos(), range * psi.sin()],
            (sigma, sigma),
            phi_true,
            phi_az,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas < 1 {
            return Err(Error::Config("at least one radar antenna is required".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !(self.sigma_x >= 0.0 && self.sigma_y >= 0.0) {
            return Err(Error::Config("location-error std devs must be non-negative".into()));
        }
        if !(self.z_true[0].hypot(self.z_true[1]) > 0.0) {
            return Err(Error::Geometry("tag position must be away from the origin".into()));
        }
        incidence_angle(self.phi_true, self.z_true)?;
        Ok(())
    }

    pub fn psi_true(&self) -> f64 {
        tag_angle(self.z_true).expect("validated scene")
    }

    pub fn positions(&self) -> Vec<Point> {
        array_positions(self.antennas, self.spacing)
    }
}

/// Element positions `x_m = (0, (m-1) d)`.
pub fn array_positions(antennas: usize, spacing: f64) -> Vec<Point> {
    (0..antennas).map(|m| [0.0, m as f64 * spacing]).collect()
}

/// Tag polar angle `atan(z2 / z1)` for a tag in front of the array.
pub fn tag_angle(z: Point) -> Result<f64> {
    if z[0] == 0.0 && z[1] == 0.0 {
        return Err(Error::Domain("tag angle undefined at the origin".into()));
    }
    if !(z[0] > 0.0) {
        return Err(Error::Geometry(format!(
            "tag at ({}, {}) is outside the forward half-plane z1 > 0",
            z[0], z[1]
        )));
    }
    Ok((z[1] / z[0]).atan())
}

/// Orientation/position constraint: a negative orientation requires
/// `psi + phi <= 0` when `psi > 0`, and mirrored.
pub fn orientation_is_consistent(phi: f64, psi: f64) -> bool {
    if phi.abs() > FRAC_PI_2 + 1e-12 {
        return false;
    }
    !((psi > 0.0 && phi < 0.0 && psi + phi > 0.0) || (psi < 0.0 && phi > 0.0 && psi + phi < 0.0))
}

/// Branch sign used in the incidence-angle model. Zero orientation takes the
/// branch that keeps `|theta| <= pi/2`: `+1` for `psi >= 0`, `-1` otherwise.
pub fn orientation_sign(phi: f64, psi: f64) -> f64 {
    if phi > 0.0 {
        1.0
    } else if phi < 0.0 {
        -1.0
    } else if psi >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `sgn(phi) pi/2 - psi - phi` without validation. Estimators evaluate this
/// over whole search grids, where `|theta| > pi/2` is possible.
#[inline]
pub fn incidence_angle_unchecked(phi: f64, psi: f64) -> f64 {
    orientation_sign(phi, psi) * FRAC_PI_2 - psi - phi
}

/// Incidence polar angle for orientation `phi` and tag position `z`.
pub fn incidence_angle(phi: f64, z: Point) -> Result<f64> {
    let psi = tag_angle(z)?;
    if !orientation_is_consistent(phi, psi) {
        return Err(Error::Geometry(format!(
            "orientation {:.4} deg is incompatible with tag angle {:.4} deg",
            phi.to_degrees(),
            psi.to_degrees()
        )));
    }
    let theta = incidence_angle_unchecked(phi, psi);
    if theta.abs() > FRAC_PI_2 + 1e-9 {
        return Err(Error::Geometry(format!(
            "incidence angle {:.4} deg exceeds 90 deg",
            theta.to_degrees()
        )));
    }
    Ok(theta.clamp(-FRAC_PI_2, FRAC_PI_2))
}

/// Search space for the orientation given an estimated tag angle.
pub fn feasible_set(psi_hat: f64) -> FeasibleSet {
    let intervals = if psi_hat > 0.0 {
        vec![Interval::new(-FRAC_PI_2, -psi_hat), Interval::new(0.0, FRAC_PI_2)]
    } else if psi_hat < 0.0 {
        vec![Interval::new(-FRAC_PI_2, 0.0), Interval::new(-psi_hat, FRAC_PI_2)]
    } else {
        vec![FULL_RANGE]
    };
    FeasibleSet { intervals }
}

/// Orientation range resolvable by the frequency-scanned main lobes for one
/// sign branch, clipped to `[-pi/2, pi/2]`:
/// `[s pi/2 - psi - theta0_F - Theta_F/2, s pi/2 - psi - theta0_1 + Theta_1/2]`.
pub fn feasible_estimation_range(psi_hat: f64, sign_phi: f64, table: &RadiationTable) -> Interval {
    let last = table.subcarriers() - 1;
    let base = sign_phi.signum() * FRAC_PI_2 - psi_hat;
    Interval::new(
        base - table.theta0[last] - 0.5 * table.beamwidth[last],
        base - table.theta0[0] + 0.5 * table.beamwidth[0],
    )
    .intersect(&FULL_RANGE)
}

/// Whether `phi` lies in the resolvable range of its own sign branch.
pub fn in_feasible_band(phi: f64, psi: f64, table: &RadiationTable) -> bool {
    feasible_estimation_range(psi, orientation_sign(phi, psi), table).contains(phi)
}

/// Independent zero-mean Gaussian location error.
pub fn sample_location_error<R: Rng + ?Sized>(sigma_x: f64, sigma_y: f64, rng: &mut R) -> Point {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    [sigma_x * x, sigma_y * y]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiation::{subcarrier_frequencies, AntennaDesign, DEFAULT_GRID_SIZE};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn default_table(count: usize) -> RadiationTable {
        let freqs = subcarrier_frequencies(34e9, 54e9, count);
        RadiationTable::tabulate(&AntennaDesign::default(), &freqs, DEFAULT_GRID_SIZE, FRAC_PI_2).unwrap()
    }

    #[test]
    fn array_examples() {
        assert_eq!(array_positions(1, 0.5), vec![[0.0, 0.0]]);
        assert_eq!(array_positions(2, 1.0), vec![[0.0, 0.0], [0.0, 1.0]]);
        let d = 3e8 / 34e9;
        let p = array_positions(4, d);
        let ys: Vec<f64> = p.iter().map(|x| x[1]).collect();
        assert_eq!(ys, vec![0.0, d, 2.0 * d, 3.0 * d]);
        assert!((d - 8.824e-3).abs() < 1e-6);
    }

    #[test]
    fn tag_angle_examples() {
        assert_relative_eq!(tag_angle([1.0, 1.0]).unwrap(), std::f64::consts::FRAC_PI_4);
        assert_eq!(tag_angle([1.0, 0.0]).unwrap(), 0.0);
        let z = [20.0 * deg(60.0).cos(), 20.0 * deg(60.0).sin()];
        assert_relative_eq!(tag_angle(z).unwrap(), deg(60.0), max_relative = 1e-12);
        assert!(matches!(tag_angle([0.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(tag_angle([-1.0, 1.0]), Err(Error::Geometry(_))));
    }

    #[test]
    fn incidence_examples() {
        let at = |psi: f64| [20.0 * deg(psi).cos(), 20.0 * deg(psi).sin()];
        assert!(incidence_angle(deg(30.0), at(60.0)).unwrap().abs() < 1e-12);
        assert_relative_eq!(
            incidence_angle(deg(60.0), at(60.0)).unwrap(),
            deg(-30.0),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            incidence_angle(deg(-70.0), at(60.0)).unwrap(),
            deg(-80.0),
            epsilon = 1e-12
        );
        assert!(matches!(incidence_angle(deg(-30.0), at(60.0)), Err(Error::Geometry(_))));
        assert!(matches!(incidence_angle(deg(30.0), at(-60.0)), Err(Error::Geometry(_))));
        // zero orientation with a negative tag angle stays within range
        let theta = incidence_angle(0.0, at(-40.0)).unwrap();
        assert_relative_eq!(theta, deg(-50.0), epsilon = 1e-12);
    }

    #[test]
    fn feasible_set_examples() {
        let s = feasible_set(deg(60.0));
        assert_eq!(s.intervals.len(), 2);
        assert_relative_eq!(s.intervals[0].hi, deg(-60.0));
        assert_eq!(s.intervals[1], Interval::new(0.0, FRAC_PI_2));
        assert_eq!(feasible_set(0.0).intervals, vec![FULL_RANGE]);
        let s = feasible_set(deg(-30.0));
        assert_eq!(s.intervals[0], Interval::new(-FRAC_PI_2, 0.0));
        assert_relative_eq!(s.intervals[1].lo, deg(30.0));
        assert!(!s.contains(deg(15.0)));
        assert!(s.contains(deg(-15.0)));
    }

    #[test]
    fn estimation_range_examples() {
        let table = default_table(11);
        let r = feasible_estimation_range(deg(60.0), 1.0, &table);
        let expected_width = table.theta0[10] - table.theta0[0] + 0.5 * (table.beamwidth[0] + table.beamwidth[10]);
        assert_relative_eq!(r.width(), expected_width, epsilon = 1e-12);
        assert!((r.width().to_degrees() - 115.0).abs() < 1.0);
        assert!((r.hi.to_degrees() - 85.0).abs() < 0.1, "{}", r.hi.to_degrees());

        let single = RadiationTable::tabulate(&AntennaDesign::default(), &[44e9], 101, FRAC_PI_2).unwrap();
        let r = feasible_estimation_range(deg(60.0), 1.0, &single);
        assert_relative_eq!(r.width(), single.beamwidth[0], epsilon = 1e-12);

        // clipped to the full range
        let r = feasible_estimation_range(0.0, 1.0, &table);
        assert_eq!(r.hi, FRAC_PI_2);
    }

    #[test]
    fn location_error_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_location_error(0.0, 0.0, &mut rng), [0.0, 0.0]);
        let (sx, sy) = (0.1, 0.3);
        let n = 100_000;
        let draws: Vec<Point> = (0..n).map(|_| sample_location_error(sx, sy, &mut rng)).collect();
        let mean = |f: &dyn Fn(&Point) -> f64| draws.iter().map(f).sum::<f64>() / n as f64;
        let (mx, my) = (mean(&|p| p[0]), mean(&|p| p[1]));
        let vx = mean(&|p| (p[0] - mx).powi(2));
        let vy = mean(&|p| (p[1] - my).powi(2));
        let cxy = mean(&|p| (p[0] - mx) * (p[1] - my));
        assert!((vx / (sx * sx) - 1.0).abs() < 0.05);
        assert!((vy / (sy * sy) - 1.0).abs() < 0.05);
        assert!(cxy.abs() < 0.02 * sx * sy);
    }

    #[test]
    fn scene_rejects_invalid_ground_truth() {
        assert!(Scene::at_angle(4, 0.01, 20.0, deg(60.0), 0.1, deg(-30.0), FRAC_PI_2).is_err());
        assert!(Scene::at_angle(0, 0.01, 20.0, deg(60.0), 0.1, deg(30.0), FRAC_PI_2).is_err());
        let s = Scene::at_angle(4, 0.01, 20.0, deg(60.0), 0.1, deg(30.0), FRAC_PI_2).unwrap();
        assert_relative_eq!(s.psi_true(), deg(60.0), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn consistent_configurations_have_bounded_incidence(psi in -1.5f64..1.5, phi in -FRAC_PI_2..FRAC_PI_2) {
            let z = [psi.cos(), psi.sin()];
            match incidence_angle(phi, z) {
                Ok(theta) => {
                    prop_assert!(orientation_is_consistent(phi, psi));
                    prop_assert!(theta.abs() <= FRAC_PI_2);
                    // inverting the branch recovers phi
                    let s = orientation_sign(phi, psi);
                    prop_assert!((s * FRAC_PI_2 - psi - theta - phi).abs() < 1e-12);
                }
                Err(_) => prop_assert!(!orientation_is_consistent(phi, psi)),
            }
        }

        #[test]
        fn feasible_set_encodes_constraint(psi_hat in -1.5f64..1.5, phi in -FRAC_PI_2..FRAC_PI_2) {
            prop_assert_eq!(feasible_set(psi_hat).contains(phi), orientation_is_consistent(phi, psi_hat));
        }
    }
}
