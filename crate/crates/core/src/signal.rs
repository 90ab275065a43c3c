//! Free-space channel, maximum-ratio precoding and two-way backscatter
//! observations.
//!
//! Observations are stored noise-normalized: each sample is
//! `s~_i[k] = delta_i s_i[k] + n_i[k]` with `n_i[k] ~ CN(0, 1)`, so the
//! per-subcarrier transmit SNR `gamma_i` is the only power knob.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    array_positions, incidence_angle, incidence_angle_unchecked, sample_location_error, tag_angle, Point, Scene,
};
use crate::radiation::{subcarrier_frequencies, RadiationTable};
use crate::wavelength;

/// Subcarrier layout, power split and pilot sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierPlan {
    pub frequencies: Vec<f64>,
    /// Total transmit SNR budget (dB), split evenly across subcarriers.
    pub gamma_total_db: f64,
    /// Pilot samples per subcarrier K.
    pub samples: usize,
    /// Sampling period Ts = 1 / (4 f_F).
    pub sampling_period: f64,
}

impl SubcarrierPlan {
    pub fn new(count: usize, f_first: f64, f_last: f64, gamma_total_db: f64, samples: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::Config(format!(
                "at least two subcarriers are required, got {count}"
            )));
        }
        if samples < 1 {
            return Err(Error::Config("at least one sample per subcarrier is required".into()));
        }
        if !(f_first > 0.0 && f_last > f_first) {
            return Err(Error::Config(format!("invalid band [{f_first}, {f_last}] Hz")));
        }
        if !gamma_total_db.is_finite() {
            return Err(Error::Config("transmit SNR must be finite".into()));
        }
        Ok(Self {
            frequencies: subcarrier_frequencies(f_first, f_last, count),
            gamma_total_db,
            samples,
            sampling_period: 1.0 / (4.0 * f_last),
        })
    }

    pub fn count(&self) -> usize {
        self.frequencies.len()
    }

    pub fn spacing(&self) -> f64 {
        (self.frequencies[self.count() - 1] - self.frequencies[0]) / (self.count() - 1) as f64
    }

    pub fn gamma_total(&self) -> f64 {
        10f64.powf(self.gamma_total_db / 10.0)
    }

    /// Per-subcarrier linear SNR `gamma_total / F`.
    pub fn gamma_per_subcarrier(&self) -> f64 {
        self.gamma_total() / self.count() as f64
    }

    /// Pure-tone pilot `s_i[k] = exp(2 pi j f_i Ts k)` (zero-based `i`, `k`).
    pub fn pilot(&self, i: usize, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * self.frequencies[i] * self.sampling_period * k as f64)
    }
}

/// Free-space LOS channel from every array element to `z` at frequency `f`.
pub fn channel_vector(z: Point, f: f64, positions: &[Point]) -> Result<Vec<Complex64>> {
    let lambda = wavelength(f);
    positions
        .iter()
        .map(|x| {
            let r = (x[0] - z[0]).hypot(x[1] - z[1]);
            if r == 0.0 {
                return Err(Error::Singularity(format!(
                    "tag coincides with array element at ({}, {})",
                    x[0], x[1]
                )));
            }
            Ok(Complex64::from_polar(lambda / (4.0 * PI * r), -2.0 * PI * r / lambda))
        })
        .collect()
}

/// Maximum-ratio transmit precoder `h / ||h||`.
pub fn precoder(h_hat: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = norm_sqr(h_hat).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Singularity("cannot precode a zero channel".into()));
    }
    Ok(h_hat.iter().map(|h| h / norm).collect())
}

/// `w^H h`.
pub fn inner(w: &[Complex64], h: &[Complex64]) -> Complex64 {
    w.iter().zip(h).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(h: &[Complex64]) -> f64 {
    h.iter().map(|x| x.norm_sqr()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// Unit-variance circularly-symmetric complex Gaussian noise.
    Unit,
    /// Noiseless observations.
    None,
}

/// Received samples plus everything the radar knows about the link.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub positions: Vec<Point>,
    pub frequencies: Vec<f64>,
    /// Per-subcarrier transmit SNR (linear).
    pub gamma: Vec<f64>,
    /// Estimated tag position known to the radar.
    pub z_hat: Point,
    /// Location-error standard deviations assumed by the radar.
    pub sigma: (f64, f64),
    /// `samples[i][k]` is the noise-normalized `s~_i[k]`.
    pub samples: Vec<Vec<Complex64>>,
    pub pilots: Vec<Vec<Complex64>>,
    /// Precoder per subcarrier, matched to the channel at `z_hat`.
    precoders: Vec<Vec<Complex64>>,
    /// `||h_i(z_hat)||^2` per subcarrier.
    channel_gains: Vec<f64>,
}

/// Sufficient statistic of one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientStat {
    pub u: Complex64,
    pub v: f64,
}

impl ObservationSet {
    /// Assembles an observation set and precomputes the precoders at `z_hat`.
    pub fn new(
        positions: Vec<Point>,
        frequencies: Vec<f64>,
        gamma: Vec<f64>,
        z_hat: Point,
        sigma: (f64, f64),
        samples: Vec<Vec<Complex64>>,
        pilots: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let f = frequencies.len();
        if gamma.len() != f || samples.len() != f || pilots.len() != f {
            return Err(Error::Config("observation dimensions are inconsistent".into()));
        }
        if samples
            .iter()
            .zip(&pilots)
            .any(|(s, p)| s.len() != p.len() || s.is_empty())
        {
            return Err(Error::Config(
                "samples and pilots must have matching, non-empty lengths".into(),
            ));
        }
        if gamma.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("transmit SNR must be positive".into()));
        }
        let mut precoders = Vec::with_capacity(f);
        let mut channel_gains = Vec::with_capacity(f);
        for &freq in &frequencies {
            let h = channel_vector(z_hat, freq, &positions)?;
            channel_gains.push(norm_sqr(&h));
            precoders.push(precoder(&h)?);
        }
        Ok(Self {
            positions,
            frequencies,
            gamma,
            z_hat,
            sigma,
            samples,
            pilots,
            precoders,
            channel_gains,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.frequencies.len()
    }

    pub fn psi_hat(&self) -> Result<f64> {
        tag_angle(self.z_hat)
    }

    /// `||h_i(z_hat)||^2`.
    pub fn channel_gain(&self, i: usize) -> f64 {
        self.channel_gains[i]
    }

    pub fn precoder(&self, i: usize) -> &[Complex64] {
        &self.precoders[i]
    }

    /// Noiseless amplitude `delta_i(phi, dz)` when the tag actually sits at
    /// `z_hat - dz`.
    pub fn delta(&self, i: usize, phi: f64, dz: Point, table: &RadiationTable) -> Result<Complex64> {
        let z = [self.z_hat[0] - dz[0], self.z_hat[1] - dz[1]];
        let psi = tag_angle(z)?;
        let h = channel_vector(z, self.frequencies[i], &self.positions)?;
        let ip = inner(&self.precoders[i], &h);
        let r = table.gain(i, incidence_angle_unchecked(phi, psi));
        Ok(self.gamma[i].sqrt() * ip * ip * r * r)
    }

    /// Perfect-location amplitude `delta'_i(phi) = sqrt(gamma_i) ||h_i||^2 R_i(theta)^2`.
    pub fn delta_prime(&self, i: usize, phi: f64, psi_hat: f64, table: &RadiationTable) -> Complex64 {
        let r = table.gain(i, incidence_angle_unchecked(phi, psi_hat));
        self.gamma[i].sqrt() * self.channel_gains[i] * r * r
    }

    /// `v_i = sum_k |s_i[k]|^2` and `u_i = (1/v_i) sum_k conj(s~_i[k]) s_i[k]`.
    pub fn sufficient_stats(&self) -> Vec<SufficientStat> {
        self.samples
            .iter()
            .zip(&self.pilots)
            .map(|(s, p)| {
                let v: f64 = p.iter().map(|x| x.norm_sqr()).sum();
                let acc: Complex64 = s.iter().zip(p).map(|(y, x)| y.conj() * x).sum();
                SufficientStat { u: acc / v, v }
            })
            .collect()
    }

    /// Flat CSV: `i,k,re_s,im_s,re_pilot,im_pilot` with one-based indices.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,k,re_s,im_s,re_pilot,im_pilot")?;
        for (i, (s, p)) in self.samples.iter().zip(&self.pilots).enumerate() {
            for (k, (y, x)) in s.iter().zip(p).enumerate() {
                writeln!(out, "{},{},{},{},{},{}", i + 1, k + 1, y.re, y.im, x.re, x.im)?;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`ObservationSet::sufficient_stats`].
pub fn sufficient_stats(obs: &ObservationSet) -> Vec<SufficientStat> {
    obs.sufficient_stats()
}

/// Draws `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Simulates one measurement. A single location error `dz` is drawn first and
/// shared by all subcarriers; the radar then knows `z_hat = z_true + dz` while
/// the physical channel runs through `z_true`.
pub fn synthesize<R: Rng + ?Sized>(
    scene: &Scene,
    plan: &SubcarrierPlan,
    table: &RadiationTable,
    noise: Noise,
    rng: &mut R,
) -> Result<ObservationSet> {
    if table.subcarriers() != plan.count() {
        return Err(Error::Config(format!(
            "radiation table has {} subcarriers, plan has {}",
            table.subcarriers(),
            plan.count()
        )));
    }
    let dz = sample_location_error(scene.sigma_x, scene.sigma_y, rng);
    let z_hat = [scene.z_true[0] + dz[0], scene.z_true[1] + dz[1]];
    tag_angle(z_hat)?;
    let theta = incidence_angle(scene.phi_true, scene.z_true)?;
    let positions = array_positions(scene.antennas, scene.spacing);
    let gamma = vec![plan.gamma_per_subcarrier(); plan.count()];

    let mut samples = Vec::with_capacity(plan.count());
    let mut pilots = Vec::with_capacity(plan.count());
    for (i, &f) in plan.frequencies.iter().enumerate() {
        let w = precoder(&channel_vector(z_hat, f, &positions)?)?;
        let ip = inner(&w, &channel_vector(scene.z_true, f, &positions)?);
        let r = table.gain(i, theta);
        let delta = gamma[i].sqrt() * ip * ip * r * r;
        let pilot: Vec<Complex64> = (0..plan.samples).map(|k| plan.pilot(i, k)).collect();
        let row = pilot
            .iter()
            .map(|&s| match noise {
                Noise::Unit => delta * s + complex_normal(rng),
                Noise::None => delta * s,
            })
            .collect();
        samples.push(row);
        pilots.push(pilot);
    }
    ObservationSet::new(
        positions,
        plan.frequencies.clone(),
        gamma,
        z_hat,
        (scene.sigma_x, scene.sigma_y),
        samples,
        pilots,
    )
}
