//! Monte Carlo harness: sigma sweep, (psi, phi) heatmap, subcarrier-count
//! sweep and RPA coverage curves.
//!
//! Every trial draws from its own generator seeded by
//! `(master seed, experiment label, sweep indices, trial index)`, so results
//! do not depend on scheduling and reruns are bit-identical. Trials run on the
//! ambient rayon pool and are reduced in index order.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, EstimatorKind};
use crate::geometry::{feasible_estimation_range, in_feasible_band, orientation_is_consistent, Interval, Scene};
use crate::radiation::{AntennaDesign, RadiationTable, DEFAULT_GRID_SIZE};
use crate::rng::{derive_seed, trial_rng};
use crate::signal::{synthesize, Noise, SubcarrierPlan};
use crate::SPEED_OF_LIGHT;

/// Simulation defaults shared by every experiment. Angles in radians,
/// lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub design: AntennaDesign,
    pub antennas: usize,
    pub spacing: f64,
    /// Distance between the array origin and the tag.
    pub range: f64,
    /// Location-error standard deviation (both axes).
    pub sigma: f64,
    pub psi: f64,
    pub phi: f64,
    pub phi_az: f64,
    pub f_first: f64,
    pub f_last: f64,
    pub subcarriers: usize,
    pub samples: usize,
    pub gamma_total_db: f64,
    /// Polar-angle grid of the radiation table.
    pub table_grid: usize,
    pub estimator: EstimatorConfig,
    pub estimators: Vec<EstimatorKind>,
    pub trials: usize,
    pub seed: u64,
    /// `false` for noiseless observations.
    pub noise: bool,
    /// MLE runs only when `Q N F K M` does not exceed this.
    pub mle_budget: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            design: AntennaDesign::default(),
            antennas: 4,
            spacing: SPEED_OF_LIGHT / 34e9,
            range: 20.0,
            sigma: 0.1,
            psi: 60f64.to_radians(),
            phi: 30f64.to_radians(),
            phi_az: FRAC_PI_2,
            f_first: 34e9,
            f_last: 54e9,
            subcarriers: 11,
            samples: 20,
            gamma_total_db: 150.0,
            table_grid: DEFAULT_GRID_SIZE,
            estimator: EstimatorConfig::default(),
            estimators: EstimatorKind::ALL.to_vec(),
            trials: 20,
            seed: 1,
            noise: true,
            mle_budget: 2e8,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimator selected".into()));
        }
        if !(self.range > 0.0) {
            return Err(Error::Config(format!("range must be positive, got {}", self.range)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !(self.phi_az > 0.0 && self.phi_az < std::f64::consts::PI) {
            return Err(Error::Config("azimuth must lie in (0, pi)".into()));
        }
        self.estimator.validate()
    }

    /// Per-trial MLE cost `Q N F K M`.
    pub fn mle_cost(&self) -> f64 {
        (self.estimator.mc_samples * self.estimator.grid_size * self.subcarriers * self.samples * self.antennas) as f64
    }

    pub fn mle_allowed(&self) -> bool {
        self.mle_cost() <= self.mle_budget
    }

    pub fn with_subcarriers(&self, count: usize) -> Self {
        Self {
            subcarriers: count,
            ..self.clone()
        }
    }

    /// Builds the subcarrier plan and the radiation table.
    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let plan = SubcarrierPlan::new(
            self.subcarriers,
            self.f_first,
            self.f_last,
            self.gamma_total_db,
            self.samples,
        )?;
        let table = RadiationTable::tabulate(&self.design, &plan.frequencies, self.table_grid, self.phi_az)?;
        Ok(Prepared {
            spec: self.clone(),
            plan,
            table,
        })
    }
}

/// A spec with its plan and table built once for many trials.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ExperimentSpec,
    pub plan: SubcarrierPlan,
    pub table: RadiationTable,
}

/// Outcome of one synthesis evaluated by several estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub estimators: Vec<EstimatorKind>,
    /// Estimate per estimator (rad); `None` when RPA had no admissible
    /// subcarrier or the estimator was skipped.
    pub estimates: Vec<Option<f64>>,
    /// Absolute error per estimator (deg).
    pub errors: Vec<Option<f64>>,
    pub psi_hat: f64,
    pub uncovered: bool,
}

impl TrialOutcome {
    pub fn error(&self, kind: EstimatorKind) -> Option<f64> {
        self.estimators
            .iter()
            .position(|&k| k == kind)
            .and_then(|i| self.errors[i])
    }

    pub fn estimate(&self, kind: EstimatorKind) -> Option<f64> {
        self.estimators
            .iter()
            .position(|&k| k == kind)
            .and_then(|i| self.estimates[i])
    }
}

/// One synthesis at `(psi, phi)` followed by every estimator in `kinds` on
/// the same observations.
pub fn run_trial(
    prep: &Prepared,
    psi: f64,
    phi: f64,
    kinds: &[EstimatorKind],
    label: &str,
    path: &[u64],
) -> Result<TrialOutcome> {
    let spec = &prep.spec;
    let scene = Scene::at_angle(
        spec.antennas,
        spec.spacing,
        spec.range,
        psi,
        spec.sigma,
        phi,
        spec.phi_az,
    )?;
    let mut rng = trial_rng(spec.seed, label, path);
    let noise = if spec.noise { Noise::Unit } else { Noise::None };
    let obs = synthesize(&scene, &prep.plan, &prep.table, noise, &mut rng)?;
    let cfg = EstimatorConfig {
        mle_seed: derive_seed(spec.seed, &format!("{label}/mle"), path),
        record_curve: false,
        ..spec.estimator.clone()
    };
    let mut estimates = Vec::with_capacity(kinds.len());
    let mut uncovered = false;
    for &kind in kinds {
        match estimate(kind, &obs, &prep.table, &cfg) {
            Ok(report) => estimates.push(Some(report.phi_hat)),
            Err(Error::OutOfCoverage) => {
                uncovered = true;
                estimates.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let errors = estimates
        .iter()
        .map(|e| e.map(|p| (p - phi).abs().to_degrees()))
        .collect();
    Ok(TrialOutcome {
        estimators: kinds.to_vec(),
        estimates,
        errors,
        psi_hat: obs.psi_hat()?,
        uncovered,
    })
}

/// Mean of the smallest 75% of `values` (at least one value kept).
pub fn lower_q3_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Config("lower-Q3 mean of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let keep = ((0.75 * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted[..keep].iter().sum::<f64>() / keep as f64)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Per-estimator mean error over a batch of trials of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub mean_error: Vec<Option<f64>>,
    pub trials: usize,
    pub uncovered: usize,
}

fn reduce(kinds: &[EstimatorKind], outcomes: &[TrialOutcome]) -> PointStats {
    let mean_error = (0..kinds.len())
        .map(|e| {
            let errs: Vec<f64> = outcomes.iter().filter_map(|o| o.errors[e]).collect();
            mean(&errs)
        })
        .collect();
    PointStats {
        mean_error,
        trials: outcomes.len(),
        uncovered: outcomes.iter().filter(|o| o.uncovered).count(),
    }
}

/// Runs `trials` trials at every point and reduces them per point, in order.
fn run_points(
    prep: &Prepared,
    points: &[(f64, f64, Vec<EstimatorKind>, Vec<u64>)],
    label: &str,
) -> Result<Vec<PointStats>> {
    let trials = prep.spec.trials;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(p, t)| {
            let (psi, phi, kinds, path) = &points[p];
            let mut path = path.clone();
            path.push(t as u64);
            run_trial(prep, *psi, *phi, kinds, label, &path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(points
        .iter()
        .zip(outcomes.chunks(trials))
        .map(|((_, _, kinds, _), chunk)| reduce(kinds, chunk))
        .collect())
}

fn estimators_for(spec: &ExperimentSpec, mle: bool) -> Vec<EstimatorKind> {
    spec.estimators
        .iter()
        .copied()
        .filter(|&k| k != EstimatorKind::Mle || (mle && spec.mle_allowed()))
        .collect()
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Values of a column parsed as numbers; blanks become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c].parse().ok()).collect())
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn error_columns(kinds: &[EstimatorKind]) -> Vec<String> {
    kinds.iter().map(|k| format!("{}_deg", k.id())).collect()
}

/// Mean error versus location-error standard deviation, one block per
/// subcarrier count, at the spec's `(psi, phi)`.
pub fn sweep_sigma(spec: &ExperimentSpec, sigmas: &[f64], subcarriers: &[usize]) -> Result<CsvTable> {
    check_sorted(sigmas, "sigma values")?;
    let mut columns = vec!["subcarriers".to_string(), "sigma_cm".to_string()];
    columns.extend(error_columns(&spec.estimators));
    columns.extend(["trials".to_string(), "rpa_uncovered".to_string()]);
    let mut table = CsvTable::new(columns);
    for (fi, &count) in subcarriers.iter().enumerate() {
        let base = spec.with_subcarriers(count);
        let kinds_f = estimators_for(&base, true);
        let prep = base.prepare()?;
        for (si, &sigma) in sigmas.iter().enumerate() {
            let prep = Prepared {
                spec: ExperimentSpec {
                    sigma,
                    ..prep.spec.clone()
                },
                ..prep.clone()
            };
            let point = (spec.psi, spec.phi, kinds_f.clone(), vec![fi as u64, si as u64]);
            let stats = run_points(&prep, &[point], "sigma")?.remove(0);
            let mut row = vec![count.to_string(), fmt_num(sigma * 100.0)];
            row.extend(spread(&spec.estimators, &kinds_f, &stats.mean_error));
            row.extend([stats.trials.to_string(), stats.uncovered.to_string()]);
            table.rows.push(row);
        }
    }
    Ok(table)
}

/// Places per-estimator values of `run` into the column order of `all`.
fn spread(all: &[EstimatorKind], run: &[EstimatorKind], values: &[Option<f64>]) -> Vec<String> {
    all.iter()
        .map(|k| fmt_opt(run.iter().position(|r| r == k).and_then(|i| values[i])))
        .collect()
}

fn check_sorted(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(format!("{what} must be finite, non-empty and sorted")));
    }
    Ok(())
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// One heatmap cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatCell {
    pub psi: f64,
    pub phi: f64,
    pub feasible: bool,
    pub in_band: bool,
    /// Cell belongs to the sub-grid where the MLE runs.
    pub mle_cell: bool,
    pub stats: Option<PointStats>,
}

/// Region statistics of one estimator over a heatmap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatSummary {
    pub estimator: EstimatorKind,
    /// Lower-Q3 mean over in-band cells (deg).
    pub lower_q3: Option<f64>,
    /// Lower-Q3 mean over in-band cells of the MLE sub-grid (deg).
    pub lower_q3_subgrid: Option<f64>,
    pub mean_in_band: Option<f64>,
    pub mean_out_of_band: Option<f64>,
    pub cells_in_band: usize,
    pub cells_out_of_band: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub grid: usize,
    pub mle_stride: usize,
    pub estimators: Vec<EstimatorKind>,
    pub cells: Vec<HeatCell>,
}

impl Heatmap {
    fn cell_error(&self, cell: &HeatCell, kind: EstimatorKind) -> Option<f64> {
        let i = self.estimators.iter().position(|&k| k == kind)?;
        cell.stats.as_ref()?.mean_error.get(i).copied().flatten()
    }

    pub fn summary(&self) -> Vec<HeatSummary> {
        self.estimators
            .iter()
            .map(|&kind| {
                let collect = |pred: &dyn Fn(&HeatCell) -> bool| -> Vec<f64> {
                    self.cells
                        .iter()
                        .filter(|c| c.feasible && pred(c))
                        .filter_map(|c| self.cell_error(c, kind))
                        .collect()
                };
                let inside = collect(&|c| c.in_band);
                let outside = collect(&|c| !c.in_band);
                let sub = collect(&|c| c.in_band && c.mle_cell);
                HeatSummary {
                    estimator: kind,
                    lower_q3: lower_q3_mean(&inside).ok(),
                    lower_q3_subgrid: lower_q3_mean(&sub).ok(),
                    mean_in_band: mean(&inside),
                    mean_out_of_band: mean(&outside),
                    cells_in_band: inside.len(),
                    cells_out_of_band: outside.len(),
                }
            })
            .collect()
    }

    pub fn summary_for(&self, kind: EstimatorKind) -> Option<HeatSummary> {
        self.summary().into_iter().find(|s| s.estimator == kind)
    }

    /// `psi_deg, phi_deg, feasible, in_band, <estimator>_deg..., trials, rpa_uncovered`.
    pub fn to_csv(&self) -> CsvTable {
        let mut columns = vec![
            "psi_deg".to_string(),
            "phi_deg".into(),
            "feasible".into(),
            "in_band".into(),
        ];
        columns.extend(error_columns(&self.estimators));
        columns.extend(["trials".to_string(), "rpa_uncovered".into()]);
        let mut table = CsvTable::new(columns);
        for cell in &self.cells {
            let mut row = vec![
                fmt_num(cell.psi.to_degrees()),
                fmt_num(cell.phi.to_degrees()),
                (cell.feasible as u8).to_string(),
                (cell.in_band as u8).to_string(),
            ];
            row.extend(self.estimators.iter().map(|&k| fmt_opt(self.cell_error(cell, k))));
            match &cell.stats {
                Some(s) => row.extend([s.trials.to_string(), s.uncovered.to_string()]),
                None => row.extend(["0".to_string(), "0".to_string()]),
            }
            table.rows.push(row);
        }
        table
    }

    pub fn summary_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(
            [
                "estimator",
                "lower_q3_deg",
                "lower_q3_subgrid_deg",
                "mean_in_band_deg",
                "mean_out_of_band_deg",
                "cells_in_band",
                "cells_out_of_band",
            ]
            .map(String::from)
            .to_vec(),
        );
        for s in self.summary() {
            table.rows.push(vec![
                s.estimator.id().to_string(),
                fmt_opt(s.lower_q3),
                fmt_opt(s.lower_q3_subgrid),
                fmt_opt(s.mean_in_band),
                fmt_opt(s.mean_out_of_band),
                s.cells_in_band.to_string(),
                s.cells_out_of_band.to_string(),
            ]);
        }
        table
    }
}

/// Mean error over a `grid x grid` lattice of `(psi, phi)` in
/// `[-90, 90]` degrees. Cells violating the orientation constraint, and the
/// `psi = +-90` rows, are marked infeasible and skipped. The MLE only runs on
/// cells whose indices are multiples of `mle_stride`.
pub fn heatmap(spec: &ExperimentSpec, grid: usize, mle_stride: usize) -> Result<Heatmap> {
    if grid < 2 {
        return Err(Error::Config(format!("heatmap grid must be at least 2, got {grid}")));
    }
    let stride = mle_stride.max(1);
    let prep = spec.prepare()?;
    let angles = linspace(-FRAC_PI_2, FRAC_PI_2, grid);
    let mut cells = Vec::with_capacity(grid * grid);
    let mut points = Vec::new();
    let mut point_cell = Vec::new();
    for (a, &psi) in angles.iter().enumerate() {
        for (b, &phi) in angles.iter().enumerate() {
            let feasible = psi.abs() < FRAC_PI_2 - 1e-9 && orientation_is_consistent(phi, psi);
            let in_band = feasible && in_feasible_band(phi, psi, &prep.table);
            let mle_cell = a % stride == 0 && b % stride == 0;
            if feasible {
                let kinds = estimators_for(spec, mle_cell);
                if !kinds.is_empty() {
                    point_cell.push(cells.len());
                    points.push((psi, phi, kinds, vec![a as u64, b as u64]));
                }
            }
            cells.push(HeatCell {
                psi,
                phi,
                feasible,
                in_band,
                mle_cell,
                stats: None,
            });
        }
    }
    let stats = run_points(&prep, &points, "heatmap")?;
    // Re-index per-cell means onto the full estimator list.
    for ((c, s), (_, _, kinds, _)) in point_cell.into_iter().zip(stats).zip(&points) {
        let mean_error = spec
            .estimators
            .iter()
            .map(|k| kinds.iter().position(|r| r == k).and_then(|i| s.mean_error[i]))
            .collect();
        cells[c].stats = Some(PointStats { mean_error, ..s });
    }
    Ok(Heatmap {
        grid,
        mle_stride: stride,
        estimators: spec.estimators.clone(),
        cells,
    })
}

/// Orientations spread over the resolvable band at tag angle `psi`: both
/// sign branches, each restricted to its own half of the feasible set, with
/// points allotted in proportion to branch width.
pub fn band_orientations(psi: f64, table: &RadiationTable, count: usize) -> Vec<f64> {
    let pieces: Vec<Interval> = [1.0, -1.0]
        .iter()
        .map(|&sign| {
            let half = if sign > 0.0 {
                Interval::new(if psi < 0.0 { -psi } else { 0.0 }, FRAC_PI_2)
            } else {
                Interval::new(-FRAC_PI_2, if psi > 0.0 { -psi } else { 0.0 })
            };
            let mut piece = feasible_estimation_range(psi, sign, table).intersect(&half);
            // phi = 0 belongs to the branch fixed by the sign convention
            if sign < 0.0 && psi >= 0.0 && piece.hi >= 0.0 {
                piece.hi = -1e-12;
            }
            if sign > 0.0 && psi < 0.0 && piece.lo <= 0.0 {
                piece.lo = 1e-12;
            }
            piece
        })
        .filter(|p| !p.is_empty())
        .collect();
    let total: f64 = pieces.iter().map(Interval::width).sum();
    let mut out = Vec::new();
    for p in &pieces {
        let n = if total > 0.0 {
            ((count as f64 * p.width() / total).round() as usize).max(1)
        } else {
            1
        };
        out.extend(linspace(p.lo, p.hi, n));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Lower-Q3 mean error per estimator over band orientations at `spec.psi`.
fn band_metric(
    prep: &Prepared,
    kinds: &[EstimatorKind],
    points: usize,
    label: &str,
    path: &[u64],
) -> Result<BandMetric> {
    let phis = band_orientations(prep.spec.psi, &prep.table, points);
    let pts: Vec<_> = phis
        .iter()
        .enumerate()
        .map(|(p, &phi)| {
            let mut path = path.to_vec();
            path.push(p as u64);
            (prep.spec.psi, phi, kinds.to_vec(), path)
        })
        .collect();
    let stats = run_points(prep, &pts, label)?;
    let per_angle: Vec<Vec<f64>> = (0..kinds.len())
        .map(|e| stats.iter().filter_map(|s| s.mean_error[e]).collect())
        .collect();
    Ok(BandMetric {
        lower_q3: per_angle.iter().map(|v| lower_q3_mean(v).ok()).collect(),
        mean: per_angle.iter().map(|v| mean(v)).collect(),
        per_angle,
        points: phis.len(),
    })
}

struct BandMetric {
    lower_q3: Vec<Option<f64>>,
    mean: Vec<Option<f64>>,
    per_angle: Vec<Vec<f64>>,
    points: usize,
}

/// Minimizing subcarrier count for one `(K, estimator)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub samples: usize,
    pub estimator: EstimatorKind,
    pub subcarriers: usize,
    pub lower_q3: f64,
    /// The minimizer is not an endpoint of the swept range.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FSweep {
    pub table: CsvTable,
    pub optima: Vec<Optimum>,
}

/// Lower-Q3 band error versus subcarrier count for every sample count in
/// `samples`. The total transmit power is split evenly for every count.
pub fn sweep_f(spec: &ExperimentSpec, subcarriers: &[usize], samples: &[usize], band_points: usize) -> Result<FSweep> {
    if subcarriers.is_empty() || subcarriers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "subcarrier counts must be non-empty and strictly increasing".into(),
        ));
    }
    let kinds = estimators_for(spec, true);
    let mut columns = vec!["samples".to_string(), "subcarriers".into()];
    columns.extend(kinds.iter().map(|k| format!("{}_lower_q3_deg", k.id())));
    columns.extend(kinds.iter().map(|k| format!("{}_mean_deg", k.id())));
    columns.extend(["band_points".to_string(), "trials".into()]);
    let mut table = CsvTable::new(columns);
    let mut optima = Vec::new();
    for (ki, &k) in samples.iter().enumerate() {
        let mut curve: Vec<Vec<Option<f64>>> = vec![Vec::new(); kinds.len()];
        for (fi, &count) in subcarriers.iter().enumerate() {
            let s = ExperimentSpec {
                subcarriers: count,
                samples: k,
                ..spec.clone()
            };
            let run = estimators_for(&s, true);
            let prep = s.prepare()?;
            let m = band_metric(&prep, &run, band_points, "sweep-f", &[ki as u64, fi as u64])?;
            let lq3 = spread_values(&kinds, &run, &m.lower_q3);
            let means = spread_values(&kinds, &run, &m.mean);
            for (e, v) in lq3.iter().enumerate() {
                curve[e].push(*v);
            }
            let mut row = vec![k.to_string(), count.to_string()];
            row.extend(lq3.iter().map(|v| fmt_opt(*v)));
            row.extend(means.iter().map(|v| fmt_opt(*v)));
            row.extend([m.points.to_string(), spec.trials.to_string()]);
            table.rows.push(row);
        }
        for (e, &kind) in kinds.iter().enumerate() {
            let best = curve[e]
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| (i, v)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, v)) = best {
                optima.push(Optimum {
                    samples: k,
                    estimator: kind,
                    subcarriers: subcarriers[i],
                    lower_q3: v,
                    interior: i > 0 && i + 1 < subcarriers.len(),
                });
            }
        }
    }
    Ok(FSweep { table, optima })
}

fn spread_values(all: &[EstimatorKind], run: &[EstimatorKind], values: &[Option<f64>]) -> Vec<Option<f64>> {
    all.iter()
        .map(|k| run.iter().position(|r| r == k).and_then(|i| values[i]))
        .collect()
}

/// Transmit SNR budget and array size of one coverage curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub gamma_total_db: f64,
    pub antennas: usize,
}

/// Fraction of band orientations whose RPA mean error is at most each
/// target error, for every link budget and subcarrier count.
/// Columns: `gamma_db, antennas, subcarriers, target_deg, coverage`.
pub fn coverage_quantile(
    spec: &ExperimentSpec,
    subcarriers: &[usize],
    links: &[LinkBudget],
    targets_deg: &[f64],
    band_points: usize,
) -> Result<CsvTable> {
    check_sorted(targets_deg, "target errors")?;
    let mut table = CsvTable::new(
        ["gamma_db", "antennas", "subcarriers", "target_deg", "coverage"]
            .map(String::from)
            .to_vec(),
    );
    for (li, link) in links.iter().enumerate() {
        for (fi, &count) in subcarriers.iter().enumerate() {
            let s = ExperimentSpec {
                subcarriers: count,
                gamma_total_db: link.gamma_total_db,
                antennas: link.antennas,
                ..spec.clone()
            };
            let prep = s.prepare()?;
            let m = band_metric(
                &prep,
                &[EstimatorKind::Rpa],
                band_points,
                "coverage",
                &[li as u64, fi as u64],
            )?;
            let errors = &m.per_angle[0];
            for &target in targets_deg {
                let covered = errors.iter().filter(|&&e| e <= target).count();
                let frac = if errors.is_empty() {
                    0.0
                } else {
                    covered as f64 / errors.len() as f64
                };
                table.rows.push(vec![
                    fmt_num(link.gamma_total_db),
                    link.antennas.to_string(),
                    count.to_string(),
                    fmt_num(target),
                    fmt_num(frac),
                ]);
            }
        }
    }
    Ok(table)
}

/// Run manifest written beside each CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub spec: serde_json::Value,
    pub parameters: serde_json::Value,
    pub artifacts: Vec<String>,
    pub complete: bool,
    pub runtime_s: f64,
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, spec: serde_json::Value) -> Self {
        Self {
            tool: "lwa-orient".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            spec,
            parameters: serde_json::Value::Null,
            artifacts: Vec::new(),
            complete: false,
            runtime_s: 0.0,
            summary: serde_json::Value::Null,
        }
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
