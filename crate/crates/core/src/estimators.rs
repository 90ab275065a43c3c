//! Orientation estimators: exact MLE, perfect-location MLE (P-MLE),
//! Bessel-approximate MLE (A-MLE) and the radiation-pointing-angle estimator
//! (RPA).
//!
//! The three likelihood-based estimators share a brute-force search over an
//! `N`-point grid on `[-pi/2, pi/2]`, restricted to the feasible set of the
//! estimated tag angle. Ties go to the smallest `|phi|`, then to the positive
//! value.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{feasible_set, incidence_angle_unchecked, sample_location_error, tag_angle, Point};
use crate::radiation::RadiationTable;
use crate::rng::trial_rng;
use crate::signal::{channel_vector, inner, ObservationSet, SufficientStat};
use crate::special::{ln_bessel_i0, solve_unbiased_amplitude, FitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "mle")]
    Mle,
    #[serde(rename = "pmle", alias = "p-mle")]
    PMle,
    #[serde(rename = "amle", alias = "a-mle")]
    AMle,
    #[serde(rename = "rpa")]
    Rpa,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Mle, Self::PMle, Self::AMle, Self::Rpa];

    /// Lower-case identifier used in CSV headers and configs.
    pub fn id(self) -> &'static str {
        match self {
            Self::Mle => "mle",
            Self::PMle => "pmle",
            Self::AMle => "amle",
            Self::Rpa => "rpa",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mle => "MLE",
            Self::PMle => "P-MLE",
            Self::AMle => "A-MLE",
            Self::Rpa => "RPA",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mle" => Ok(Self::Mle),
            "pmle" => Ok(Self::PMle),
            "amle" => Ok(Self::AMle),
            "rpa" => Ok(Self::Rpa),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected mle, pmle, amle or rpa)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Search-grid size N over `[-pi/2, pi/2]`.
    pub grid_size: usize,
    /// Location-error draws Q for the MLE expectation.
    pub mc_samples: usize,
    pub fit_mode: FitMode,
    /// Seed of the MLE location-error draws; the same draws serve every
    /// grid point.
    pub mle_seed: u64,
    /// Keep the objective over the search grid in the report.
    pub record_curve: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            grid_size: 1000,
            mc_samples: 100,
            fit_mode: FitMode::Exact,
            mle_seed: 0,
            record_curve: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 2 {
            return Err(Error::Config(format!(
                "search grid needs at least 2 points, got {}",
                self.grid_size
            )));
        }
        if self.mc_samples < 1 {
            return Err(Error::Config("the MLE needs at least one location-error draw".into()));
        }
        Ok(())
    }

    /// Grid quantization step `pi / (N - 1)`.
    pub fn grid_step(&self) -> f64 {
        std::f64::consts::PI / (self.grid_size - 1) as f64
    }
}

/// Objective sampled over the feasible part of the search grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveCurve {
    pub phi: Vec<f64>,
    pub value: Vec<f64>,
}

impl ObjectiveCurve {
    /// Min-max normalized values in `[0, 1]`.
    pub fn normalized(&self) -> Vec<f64> {
        let lo = self.value.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        self.value
            .iter()
            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
            .collect()
    }

    /// Number of local maxima whose normalized value is at least `level`.
    pub fn count_peaks(&self, level: f64) -> usize {
        let y = self.normalized();
        let n = y.len();
        (0..n)
            .filter(|&g| {
                let left = g == 0 || y[g - 1] < y[g] || self.phi[g] - self.phi[g - 1] > 1.5 * self.step();
                let right = g + 1 == n || y[g + 1] <= y[g] || self.phi[g + 1] - self.phi[g] > 1.5 * self.step();
                left && right && y[g] >= level
            })
            .count()
    }

    fn step(&self) -> f64 {
        self.phi.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Per-subcarrier amplitude diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeEstimate {
    /// Unbiased estimate of `|delta'_i|`.
    pub delta_hat: f64,
    /// `delta_hat / (sqrt(gamma_i) ||h_i(z_hat)||^2)`, an estimate of `|R_i(theta)|^2`.
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RpaDiagnostics {
    pub profile: Vec<AmplitudeEstimate>,
    pub admissible: Vec<bool>,
    /// Zero-based index of the selected subcarrier.
    pub i_star: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub phi_hat: f64,
    pub curve: Option<ObjectiveCurve>,
    pub rpa: Option<RpaDiagnostics>,
}

/// Uniform search grid of `n` points on `[-pi/2, pi/2]`.
pub fn search_grid(n: usize) -> Vec<f64> {
    let step = std::f64::consts::PI / (n - 1) as f64;
    (0..n)
        .map(|g| {
            if g + 1 == n {
                FRAC_PI_2
            } else {
                -FRAC_PI_2 + g as f64 * step
            }
        })
        .collect()
}

/// Grid points inside the feasible set of `psi_hat`.
pub fn feasible_candidates(psi_hat: f64, n: usize) -> Result<Vec<f64>> {
    let set = feasible_set(psi_hat);
    let cands: Vec<f64> = search_grid(n).into_iter().filter(|&phi| set.contains(phi)).collect();
    if cands.is_empty() {
        return Err(Error::Config("no search-grid point lies in the feasible set".into()));
    }
    Ok(cands)
}

/// `true` if `(value, phi)` beats `(best_value, best_phi)` under the
/// tie-breaking rule.
fn better(value: f64, phi: f64, best_value: f64, best_phi: f64) -> bool {
    if value != best_value {
        return value > best_value;
    }
    let (a, b) = (phi.abs(), best_phi.abs());
    a < b || (a == b && phi > best_phi)
}

fn grid_search(kind: EstimatorKind, cands: Vec<f64>, values: Vec<f64>, record_curve: bool) -> EstimateReport {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (&phi, &v) in cands.iter().zip(&values) {
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if best.1.is_nan() || better(v, phi, best.0, best.1) {
            best = (v, phi);
        }
    }
    EstimateReport {
        estimator: kind,
        phi_hat: best.1,
        curve: record_curve.then_some(ObjectiveCurve {
            phi: cands,
            value: values,
        }),
        rpa: None,
    }
}

fn check_table(obs: &ObservationSet, table: &RadiationTable) -> Result<()> {
    if obs.subcarriers() != table.subcarriers() {
        return Err(Error::Config(format!(
            "observations cover {} subcarriers but the radiation table has {}",
            obs.subcarriers(),
            table.subcarriers()
        )));
    }
    Ok(())
}

/// Location-error draws and the per-draw link quantities used by the MLE.
#[derive(Debug, Clone)]
pub struct MleDraws {
    pub offsets: Vec<Point>,
    /// `psi(z_hat - dz_q)`.
    psi: Vec<f64>,
    /// `c[i][q] = sqrt(gamma_i) (w_i^H h_i(z_hat - dz_q))^2`.
    coupling: Vec<Vec<Complex64>>,
}

impl MleDraws {
    pub fn sample<R: Rng + ?Sized>(obs: &ObservationSet, q: usize, rng: &mut R) -> Result<Self> {
        let offsets: Vec<Point> = (0..q)
            .map(|_| sample_location_error(obs.sigma.0, obs.sigma.1, rng))
            .collect();
        Self::from_offsets(obs, offsets)
    }

    pub fn from_offsets(obs: &ObservationSet, offsets: Vec<Point>) -> Result<Self> {
        let mut psi = Vec::with_capacity(offsets.len());
        let mut coupling = vec![Vec::with_capacity(offsets.len()); obs.subcarriers()];
        for dz in &offsets {
            let z = [obs.z_hat[0] - dz[0], obs.z_hat[1] - dz[1]];
            psi.push(tag_angle(z)?);
            for (i, c) in coupling.iter_mut().enumerate() {
                let ip = inner(obs.precoder(i), &channel_vector(z, obs.frequencies[i], &obs.positions)?);
                c.push(obs.gamma[i].sqrt() * ip * ip);
            }
        }
        Ok(Self { offsets, psi, coupling })
    }
}

/// Exact log-likelihood at `phi`: the expectation over the location error is
/// replaced by the mean over the draws and evaluated per sample in log-sum-exp
/// form.
pub fn log_likelihood_exact(phi: f64, obs: &ObservationSet, table: &RadiationTable, draws: &MleDraws) -> f64 {
    let q = draws.psi.len();
    let ln_q = (q as f64).ln();
    let mut exponents = vec![0.0; q];
    let mut deltas = vec![Complex64::new(0.0, 0.0); q];
    let mut total = 0.0;
    for i in 0..obs.subcarriers() {
        for (d, (&psi, &c)) in deltas.iter_mut().zip(draws.psi.iter().zip(&draws.coupling[i])) {
            let r = table.gain(i, incidence_angle_unchecked(phi, psi));
            *d = c * r * r;
        }
        for (y, s) in obs.samples[i].iter().zip(&obs.pilots[i]) {
            let a = y.conj() * s;
            let b = s.norm_sqr();
            let mut max = f64::NEG_INFINITY;
            for (e, d) in exponents.iter_mut().zip(&deltas) {
                *e = 2.0 * (a * d).re - d.norm_sqr() * b;
                max = max.max(*e);
            }
            let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
            total += max + sum.ln() - ln_q;
        }
    }
    total
}

/// Exact MLE with `cfg.mc_samples` common location-error draws.
pub fn mle(obs: &ObservationSet, table: &RadiationTable, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    check_table(obs, table)?;
    let cands = feasible_candidates(obs.psi_hat()?, cfg.grid_size)?;
    let mut rng = trial_rng(cfg.mle_seed, "mle-location-draws", &[]);
    let draws = MleDraws::sample(obs, cfg.mc_samples, &mut rng)?;
    let values = cands
        .iter()
        .map(|&phi| log_likelihood_exact(phi, obs, table, &draws))
        .collect();
    Ok(grid_search(EstimatorKind::Mle, cands, values, cfg.record_curve))
}

/// P-MLE objective `sum_i v_i (2 Re{u_i delta'_i} - |delta'_i|^2)`.
pub fn p_mle_objective(
    phi: f64,
    psi_hat: f64,
    obs: &ObservationSet,
    stats: &[SufficientStat],
    table: &RadiationTable,
) -> f64 {
    stats
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let d = obs.delta_prime(i, phi, psi_hat, table);
            st.v * (2.0 * (st.u * d).re - d.norm_sqr())
        })
        .sum()
}

pub fn p_mle(obs: &ObservationSet, table: &RadiationTable, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    check_table(obs, table)?;
    let psi_hat = obs.psi_hat()?;
    let cands = feasible_candidates(psi_hat, cfg.grid_size)?;
    let stats = obs.sufficient_stats();
    let values = cands
        .iter()
        .map(|&phi| p_mle_objective(phi, psi_hat, obs, &stats, table))
        .collect();
    Ok(grid_search(EstimatorKind::PMle, cands, values, cfg.record_curve))
}

/// A-MLE objective `sum_i sum_k [ln I0(2 |s~| |s| |delta'|) - |delta'|^2 |s|^2]`.
pub fn a_mle_objective(
    phi: f64,
    psi_hat: f64,
    obs: &ObservationSet,
    table: &RadiationTable,
    mode: FitMode,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..obs.subcarriers() {
        let amp = obs.delta_prime(i, phi, psi_hat, table).norm();
        for (y, s) in obs.samples[i].iter().zip(&obs.pilots[i]) {
            let sn = s.norm();
            total += ln_bessel_i0(2.0 * y.norm() * sn * amp, mode)? - amp * amp * sn * sn;
        }
    }
    Ok(total)
}

pub fn a_mle(obs: &ObservationSet, table: &RadiationTable, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    check_table(obs, table)?;
    let psi_hat = obs.psi_hat()?;
    let cands = feasible_candidates(psi_hat, cfg.grid_size)?;
    let values = cands
        .iter()
        .map(|&phi| a_mle_objective(phi, psi_hat, obs, table, cfg.fit_mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(grid_search(EstimatorKind::AMle, cands, values, cfg.record_curve))
}

/// Unbiased amplitude and normalized gain per subcarrier.
pub fn amplitude_profile(obs: &ObservationSet, mode: FitMode) -> Result<Vec<AmplitudeEstimate>> {
    obs.sufficient_stats()
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let delta_hat = solve_unbiased_amplitude(st.u.norm(), st.v, mode)?;
            Ok(AmplitudeEstimate {
                delta_hat,
                kappa: delta_hat / (obs.gamma[i].sqrt() * obs.channel_gain(i)),
            })
        })
        .collect()
}

/// Orientation implied by a main-lobe angle `theta0` at tag angle `psi_hat`.
pub fn pointing_orientation(theta0: f64, psi_hat: f64) -> f64 {
    let positive = FRAC_PI_2 - psi_hat - theta0;
    let negative = -FRAC_PI_2 - psi_hat - theta0;
    let phi = if theta0 > -psi_hat {
        positive
    } else if theta0 < -psi_hat {
        negative
    } else {
        // Both branches reach a boundary; keep the feasible one, positive first.
        let set = feasible_set(psi_hat);
        if set.contains(positive) || !set.contains(negative) {
            positive
        } else {
            negative
        }
    };
    phi.clamp(-FRAC_PI_2, FRAC_PI_2)
}

pub fn rpa(obs: &ObservationSet, table: &RadiationTable, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    check_table(obs, table)?;
    let psi_hat = obs.psi_hat()?;
    let profile = amplitude_profile(obs, cfg.fit_mode)?;
    let admissible: Vec<bool> = table
        .theta0
        .iter()
        .map(|&t| t >= -FRAC_PI_2 - psi_hat && t <= FRAC_PI_2 - psi_hat)
        .collect();
    let mut i_star = None;
    for (i, p) in profile.iter().enumerate() {
        if admissible[i] && i_star.is_none_or(|j: usize| p.kappa > profile[j].kappa) {
            i_star = Some(i);
        }
    }
    let i_star = i_star.ok_or(Error::OutOfCoverage)?;
    Ok(EstimateReport {
        estimator: EstimatorKind::Rpa,
        phi_hat: pointing_orientation(table.theta0[i_star], psi_hat),
        curve: None,
        rpa: Some(RpaDiagnostics {
            profile,
            admissible,
            i_star,
        }),
    })
}

/// Runs the estimator selected by `kind`.
pub fn estimate(
    kind: EstimatorKind,
    obs: &ObservationSet,
    table: &RadiationTable,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    match kind {
        EstimatorKind::Mle => mle(obs, table, cfg),
        EstimatorKind::PMle => p_mle(obs, table, cfg),
        EstimatorKind::AMle => a_mle(obs, table, cfg),
        EstimatorKind::Rpa => rpa(obs, table, cfg),
    }
}
