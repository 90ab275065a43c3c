//! Statistical self-checks of the signal model and the amplitude estimator.
//!
//! Used by the CLI `selftest` command and by the integration tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{array_positions, sample_location_error, tag_angle, Point};
use crate::signal::{channel_vector, complex_normal, inner, precoder};
use crate::special::{bessel_i0, hyp1f1_mhalf, rice_variance, solve_unbiased_amplitude, FitMode};

/// One-sample Kolmogorov-Smirnov test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

impl KsResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Kolmogorov survival function `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `samples` against a continuous CDF, with the Stephens
/// small-sample correction of the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Config("KS test needs at least one sample".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d),
        samples: x.len(),
    })
}

/// Tag angle seen through a Gaussian location error, tested against the
/// small-error normal approximation `N(psi(z_hat), sigma^2 / |z_hat|^2)`.
pub fn tag_angle_distribution<R: Rng + ?Sized>(
    z_hat: Point,
    sigma: f64,
    draws: usize,
    rng: &mut R,
) -> Result<KsResult> {
    let psi = tag_angle(z_hat)?;
    let std = sigma / z_hat[0].hypot(z_hat[1]);
    let normal = Normal::new(psi, std).map_err(|e| Error::Config(e.to_string()))?;
    let samples = (0..draws)
        .map(|_| {
            let dz = sample_location_error(sigma, sigma, rng);
            tag_angle([z_hat[0] - dz[0], z_hat[1] - dz[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    ks_test(&samples, |x| normal.cdf(x))
}

/// Phase of `w^H h(z_hat - dz)` with `w` matched to `z_hat`, tested against
/// the uniform distribution on `[0, 2 pi)`.
pub fn precoded_phase_distribution<R: Rng + ?Sized>(
    z_hat: Point,
    sigma: f64,
    freq: f64,
    antennas: usize,
    spacing: f64,
    draws: usize,
    rng: &mut R,
) -> Result<KsResult> {
    let positions = array_positions(antennas, spacing);
    let w = precoder(&channel_vector(z_hat, freq, &positions)?)?;
    let samples = (0..draws)
        .map(|_| {
            let dz = sample_location_error(sigma, sigma, rng);
            let h = channel_vector([z_hat[0] - dz[0], z_hat[1] - dz[1]], freq, &positions)?;
            Ok(inner(&w, &h).arg().rem_euclid(2.0 * PI))
        })
        .collect::<Result<Vec<_>>>()?;
    ks_test(&samples, |x| (x / (2.0 * PI)).clamp(0.0, 1.0))
}

/// Draws `|u|` with `u ~ CN(amplitude, 1/v)`.
pub fn rice_draw<R: Rng + ?Sized>(amplitude: f64, v: f64, rng: &mut R) -> f64 {
    (Complex64::new(amplitude, 0.0) + complex_normal(rng) / v.sqrt()).norm()
}

/// Monte Carlo means of the unbiased and the plain `|u|` amplitude
/// estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasCheck {
    pub amplitude: f64,
    pub v: f64,
    pub mean_unbiased: f64,
    pub mean_naive: f64,
}

impl BiasCheck {
    pub fn relative_bias(&self) -> f64 {
        self.mean_unbiased / self.amplitude - 1.0
    }

    pub fn naive_relative_bias(&self) -> f64 {
        self.mean_naive / self.amplitude - 1.0
    }
}

pub fn amplitude_bias<R: Rng + ?Sized>(
    amplitude: f64,
    v: f64,
    draws: usize,
    mode: FitMode,
    rng: &mut R,
) -> Result<BiasCheck> {
    let mut unbiased = 0.0;
    let mut naive = 0.0;
    for _ in 0..draws {
        let u = rice_draw(amplitude, v, rng);
        naive += u;
        unbiased += solve_unbiased_amplitude(u, v, mode)?;
    }
    Ok(BiasCheck {
        amplitude,
        v,
        mean_unbiased: unbiased / draws as f64,
        mean_naive: naive / draws as f64,
    })
}

/// Empirical against closed-form variance of `|u|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceCheck {
    pub amplitude: f64,
    pub v: f64,
    pub empirical: f64,
    pub theoretical: f64,
}

impl VarianceCheck {
    pub fn relative_error(&self) -> f64 {
        self.empirical / self.theoretical - 1.0
    }
}

pub fn rice_variance_check<R: Rng + ?Sized>(
    amplitude: f64,
    v: f64,
    draws: usize,
    rng: &mut R,
) -> Result<VarianceCheck> {
    let samples: Vec<f64> = (0..draws).map(|_| rice_draw(amplitude, v, rng)).collect();
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    Ok(VarianceCheck {
        amplitude,
        v,
        empirical: var,
        theoretical: rice_variance(amplitude, v)?,
    })
}

/// Accuracy of the closed-form fits on a log-spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub hyp1f1_max_rel_error: f64,
    pub hyp1f1_worst_x: f64,
    pub i0_max_rel_error: f64,
    pub i0_mean_rel_error: f64,
    pub i0_worst_x: f64,
}

/// `points` log-spaced values in `[1e-4, x_max]` plus zero.
fn log_grid(x_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (1e-4f64.ln(), x_max.ln());
    std::iter::once(0.0)
        .chain((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()))
        .collect()
}

fn worst(grid: &[f64], err: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64, f64)> {
    let mut max = (0.0, 0.0);
    let mut sum = 0.0;
    for &x in grid {
        let e = err(x)?;
        sum += e;
        if e > max.0 {
            max = (e, x);
        }
    }
    Ok((max.0, max.1, sum / grid.len() as f64))
}

/// Measures the `1F1` fit on `[0, 1e4]` and the `I0` fit on `[0, 20]`.
pub fn fit_fidelity(points: usize) -> Result<FitReport> {
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let (h_max, h_x, _) = worst(&log_grid(1e4, points), |x| {
        Ok(rel(
            hyp1f1_mhalf(x, FitMode::CurveFit)?,
            hyp1f1_mhalf(x, FitMode::Exact)?,
        ))
    })?;
    let (i_max, i_x, i_mean) = worst(&log_grid(20.0, points), |x| {
        Ok(rel(bessel_i0(x, FitMode::CurveFit)?, bessel_i0(x, FitMode::Exact)?))
    })?;
    Ok(FitReport {
        hyp1f1_max_rel_error: h_max,
        hyp1f1_worst_x: h_x,
        i0_max_rel_error: i_max,
        i0_mean_rel_error: i_mean,
        i0_worst_x: i_x,
    })
}
