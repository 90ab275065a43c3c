//! Grating leaky-wave antenna radiation pattern and its per-subcarrier
//! tabulation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelength;

/// Default polar-angle grid resolution of a [`RadiationTable`].
pub const DEFAULT_GRID_SIZE: usize = 2001;

/// Geometry and material parameters of a grating LWA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaDesign {
    /// Antenna length L (m).
    pub length: f64,
    /// Antenna width w (m).
    pub width: f64,
    /// Grating period d' (m).
    pub grating_period: f64,
    /// Effective permittivity; the refraction index is its square root.
    pub eps_eff: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Normalized leakage rate `alpha * lambda` at the band centre.
    pub leakage_peak: f64,
    /// Normalized leakage rate `alpha * lambda` at the band edges.
    pub leakage_edge: f64,
}

impl Default for AntennaDesign {
    /// 5 cm x 1 cm grating LWA, d' = 2.1 mm, eps_eff = 12, 34-54 GHz.
    fn default() -> Self {
        Self {
            length: 0.05,
            width: 0.01,
            grating_period: 2.1e-3,
            eps_eff: 12.0,
            lambda_min: wavelength(54e9),
            lambda_max: wavelength(34e9),
            leakage_peak: 0.1,
            leakage_edge: 0.01,
        }
    }
}

/// Admissible grating-period interval for a design band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GratingCheck {
    pub lower: f64,
    pub upper: f64,
    pub passes: bool,
}

impl AntennaDesign {
    pub fn n_eff(&self) -> f64 {
        self.eps_eff.sqrt()
    }

    /// Validates the structural invariants: positive dimensions, `w > lambda`
    /// over the band, and a grating period inside the admissible interval.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("width", self.width),
            ("grating_period", self.grating_period),
            ("eps_eff", self.eps_eff),
            ("lambda_min", self.lambda_min),
            ("lambda_max", self.lambda_max),
            ("leakage_peak", self.leakage_peak),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Design(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.leakage_edge >= 0.0) || self.leakage_edge > self.leakage_peak {
            return Err(Error::Design(format!(
                "leakage_edge must lie in [0, leakage_peak], got {}",
                self.leakage_edge
            )));
        }
        if self.lambda_min > self.lambda_max {
            return Err(Error::Design(format!(
                "lambda_min {} exceeds lambda_max {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.width <= self.lambda_max {
            return Err(Error::Design(format!(
                "width w = {} m must exceed every band wavelength (lambda_max = {} m)",
                self.width, self.lambda_max
            )));
        }
        let check = validate_grating_period(self)?;
        if !check.passes {
            return Err(Error::GratingPeriod {
                lower: check.lower,
                upper: check.upper,
                grating_period: self.grating_period,
            });
        }
        Ok(())
    }

    fn check_band(&self, lambda: f64) -> Result<()> {
        // a few ulps of slack so band-edge frequencies round-trip
        let slack = 1e-12 * self.lambda_max;
        if !lambda.is_finite() || lambda < self.lambda_min - slack || lambda > self.lambda_max + slack {
            return Err(Error::Domain(format!(
                "wavelength {lambda} m outside design band [{}, {}] m",
                self.lambda_min, self.lambda_max
            )));
        }
        Ok(())
    }
}

/// Leakage rate alpha(lambda) in Np/m from the concave-quadratic model of
/// `alpha * lambda` (peak at the band centre, `leakage_edge` at both edges).
pub fn leakage_rate(lambda: f64, design: &AntennaDesign) -> Result<f64> {
    design.check_band(lambda)?;
    let centre = 0.5 * (design.lambda_min + design.lambda_max);
    let span = design.lambda_max - design.lambda_min;
    let normalized = if span > 0.0 {
        let curvature = 4.0 * (design.leakage_peak - design.leakage_edge) / (span * span);
        design.leakage_peak - curvature * (lambda - centre).powi(2)
    } else {
        design.leakage_peak
    };
    Ok(normalized / lambda)
}

/// Main-lobe pointing angle `asin(n_eff - lambda / d')`.
pub fn main_lobe_angle(lambda: f64, design: &AntennaDesign) -> Result<f64> {
    let arg = design.n_eff() - lambda / design.grating_period;
    if !(-1.0..=1.0).contains(&arg) {
        return Err(Error::Design(format!(
            "no real main-lobe angle at lambda = {lambda} m: n_eff - lambda/d' = {arg}"
        )));
    }
    Ok(arg.asin())
}

/// Half-power beamwidth `lambda / (L cos theta0)`.
pub fn half_power_beamwidth(lambda: f64, theta0: f64, design: &AntennaDesign) -> Result<f64> {
    let c = theta0.cos();
    if !(theta0.abs() < FRAC_PI_2) || c <= 1e-12 {
        return Err(Error::Singularity(format!(
            "beamwidth diverges for main-lobe angle {theta0} rad"
        )));
    }
    Ok(lambda / (design.length * c))
}

/// Radiation efficiency `1 - exp(-2 alpha L)`.
pub fn radiation_efficiency(lambda: f64, design: &AntennaDesign) -> Result<f64> {
    let alpha = leakage_rate(lambda, design)?;
    Ok(-(-2.0 * alpha * design.length).exp_m1())
}

/// Admissible grating-period interval `[lambda_max/(n+1), mu lambda_min/(n-1)]`
/// with `mu = 1` for `n_eff > 3` and `mu = 2` otherwise.
pub fn validate_grating_period(design: &AntennaDesign) -> Result<GratingCheck> {
    let n = design.n_eff();
    let mu = if n > 3.0 { 1.0 } else { 2.0 };
    let lower = design.lambda_max / (n + 1.0);
    let upper = if n > 1.0 {
        mu * design.lambda_min / (n - 1.0)
    } else {
        f64::NEG_INFINITY
    };
    if !(lower <= upper) {
        return Err(Error::InfeasibleDesign { lower, upper });
    }
    let d = design.grating_period;
    Ok(GratingCheck {
        lower,
        upper,
        passes: (lower..=upper).contains(&d),
    })
}

/// Directivity term. The leakage-aperture directivity is normalized by
/// `lambda^2` so that it is dimensionless.
fn directivity(lambda: f64, alpha: f64, theta0: f64, design: &AntennaDesign) -> f64 {
    64.0 * design.width / (alpha * PI * lambda * lambda) * (0.5 * alpha * design.length).tanh() * theta0.cos()
}

/// H-plane pattern. The 0/0 point at `2 w cos(phi) = lambda` is replaced by
/// its limit `sin^2(phi) pi^2 / 16`.
fn h_plane(phi_az: f64, lambda: f64, design: &AntennaDesign) -> f64 {
    let u = 2.0 * design.width * phi_az.cos() / lambda;
    let denom = 1.0 - u * u;
    let sin2 = phi_az.sin().powi(2);
    if denom.abs() < 1e-7 {
        return sin2 * PI * PI / 16.0;
    }
    sin2 * (0.5 * PI * u).cos().powi(2) / (denom * denom)
}

/// E-plane pattern; equals one at `sin(theta) sin(phi) = sin(theta0)`.
fn e_plane(theta: f64, phi_az: f64, lambda: f64, alpha: f64, theta0: f64, design: &AntennaDesign) -> f64 {
    let al = alpha * design.length;
    let decay = (-al).exp();
    let x = 2.0 * PI * design.length / lambda * (theta.sin() * phi_az.sin() - theta0.sin());
    let numerator = 1.0 - 2.0 * decay * x.cos() + decay * decay;
    let lead = al / -(-al).exp_m1();
    lead * lead * numerator / (al * al + x * x)
}

/// Far-field complex gain `R(theta, phi; lambda)`.
pub fn complex_gain(theta: f64, phi_az: f64, lambda: f64, design: &AntennaDesign) -> Result<Complex64> {
    if !(theta.abs() <= FRAC_PI_2 + 1e-12) {
        return Err(Error::Domain(format!("polar angle {theta} rad outside [-pi/2, pi/2]")));
    }
    if !(phi_az > 0.0 && phi_az < PI) {
        return Err(Error::Domain(format!("azimuth {phi_az} rad outside (0, pi)")));
    }
    let alpha = leakage_rate(lambda, design)?;
    let theta0 = main_lobe_angle(lambda, design)?;
    let power = directivity(lambda, alpha, theta0, design)
        * h_plane(phi_az, lambda, design)
        * e_plane(theta, phi_az, lambda, alpha, theta0, design);
    let beta = 2.0 * PI * design.n_eff() / lambda;
    Ok(Complex64::from_polar(
        power.max(0.0).sqrt(),
        beta * design.length * theta.cos(),
    ))
}

/// Per-subcarrier radiation pattern sampled on a uniform polar-angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiationTable {
    pub frequencies: Vec<f64>,
    theta_min: f64,
    theta_step: f64,
    grid_size: usize,
    /// `gains[i][g]` is `R_i(theta_g)`.
    pub gains: Vec<Vec<Complex64>>,
    /// Main-lobe pointing angle per subcarrier (rad).
    pub theta0: Vec<f64>,
    /// Half-power beamwidth per subcarrier (rad).
    pub beamwidth: Vec<f64>,
    /// Radiation efficiency per subcarrier (diagnostic).
    pub efficiency: Vec<f64>,
}

impl RadiationTable {
    /// Tabulates `R_i(theta)` for every subcarrier on a uniform grid over
    /// `[-pi/2, pi/2]`.
    pub fn tabulate(design: &AntennaDesign, frequencies: &[f64], grid_size: usize, phi_az: f64) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::Config(format!("grid_size must be >= 2, got {grid_size}")));
        }
        if frequencies.is_empty() {
            return Err(Error::Config("at least one frequency is required".into()));
        }
        design.validate()?;
        let theta_min = -FRAC_PI_2;
        let theta_step = PI / (grid_size - 1) as f64;
        let mut gains = Vec::with_capacity(frequencies.len());
        let mut theta0 = Vec::with_capacity(frequencies.len());
        let mut beamwidth = Vec::with_capacity(frequencies.len());
        let mut efficiency = Vec::with_capacity(frequencies.len());
        for &f in frequencies {
            let lambda = wavelength(f);
            let t0 = main_lobe_angle(lambda, design)?;
            theta0.push(t0);
            beamwidth.push(half_power_beamwidth(lambda, t0, design)?);
            efficiency.push(radiation_efficiency(lambda, design)?);
            let row = (0..grid_size)
                .map(|g| {
                    let theta = (theta_min + g as f64 * theta_step).clamp(-FRAC_PI_2, FRAC_PI_2);
                    complex_gain(theta, phi_az, lambda, design)
                })
                .collect::<Result<Vec<_>>>()?;
            gains.push(row);
        }
        Ok(Self {
            frequencies: frequencies.to_vec(),
            theta_min,
            theta_step,
            grid_size,
            gains,
            theta0,
            beamwidth,
            efficiency,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.frequencies.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn grid_step(&self) -> f64 {
        self.theta_step
    }

    pub fn theta_at(&self, g: usize) -> f64 {
        if g + 1 == self.grid_size {
            FRAC_PI_2
        } else {
            self.theta_min + g as f64 * self.theta_step
        }
    }

    pub fn theta_grid(&self) -> Vec<f64> {
        (0..self.grid_size).map(|g| self.theta_at(g)).collect()
    }

    /// `R_i(theta)` by linear interpolation of real and imaginary parts.
    /// Angles outside `[-pi/2, pi/2]` take the nearest endpoint value.
    pub fn gain(&self, i: usize, theta: f64) -> Complex64 {
        let row = &self.gains[i];
        let pos = (theta - self.theta_min) / self.theta_step;
        if !(pos > 0.0) {
            if pos < 0.0 {
                log::trace!("polar angle {theta} below table range, clamped");
            }
            return row[0];
        }
        let last = self.grid_size - 1;
        if pos >= last as f64 {
            if pos > last as f64 + 1e-9 {
                log::trace!("polar angle {theta} above table range, clamped");
            }
            return row[last];
        }
        let g = pos.floor() as usize;
        let t = pos - g as f64;
        row[g] * (1.0 - t) + row[g + 1] * t
    }

    /// Grid index of the largest `|R_i|`.
    pub fn argmax_index(&self, i: usize) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (g, r) in self.gains[i].iter().enumerate() {
            let val = r.norm_sqr();
            if val > best_val {
                best_val = val;
                best = g;
            }
        }
        best
    }

    /// Writes `theta_deg, |R_1|, arg R_1, ..., |R_F|, arg R_F`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("theta_deg");
        for i in 1..=self.subcarriers() {
            header.push_str(&format!(",abs_r_{i},arg_r_{i}"));
        }
        writeln!(out, "{header}")?;
        for g in 0..self.grid_size {
            let mut line = format!("{}", self.theta_at(g).to_degrees());
            for row in &self.gains {
                let r = row[g];
                line.push_str(&format!(",{},{}", r.norm(), r.arg()));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Writes the per-subcarrier summary: frequency, pointing angle,
    /// beamwidth and efficiency.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "subcarrier,freq_ghz,theta0_deg,beamwidth_deg,efficiency")?;
        for i in 0..self.subcarriers() {
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                self.frequencies[i] / 1e9,
                self.theta0[i].to_degrees(),
                self.beamwidth[i].to_degrees(),
                self.efficiency[i]
            )?;
        }
        Ok(())
    }
}

/// `F` equally spaced subcarriers from `f_first` to `f_last` (inclusive).
/// A single subcarrier sits at `f_first`.
pub fn subcarrier_frequencies(f_first: f64, f_last: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![f_first],
        _ => {
            let step = (f_last - f_first) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        f_last
                    } else {
                        f_first + i as f64 * step
                    }
                })
                .collect()
        }
    }
}
