//! Threshold calibration, detection-probability curves and false-alarm sweeps.
//!
//! Trial `t` of every experiment draws from its own RNG stream, derived from
//! the master seed, an experiment domain, a tag and `t`. Results are collected
//! in trial order, so they never depend on the worker count.

use std::str::FromStr;

use rayon::prelude::*;

use crate::detector::{evaluate_many, DetectorId};
use crate::error::{Error, Result};
use crate::rng::{stream_id, tag_for, Domain, RngStream};
use crate::scenario::{Environment, Hypothesis, Scenario, ScenarioConfig, SignalOrder};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Minimum expected number of exceedances in a calibration run.
pub const MIN_EXCEEDANCES: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSpec {
    pub detector: DetectorId,
    pub pfa: f64,
    pub trials: u32,
    pub master_seed: u64,
}

impl CalibrationSpec {
    /// Uses the default trial count `100 / pfa`.
    pub fn new(detector: DetectorId, pfa: f64, master_seed: u64) -> Self {
        Self {
            detector,
            pfa,
            trials: (100.0 / pfa).ceil() as u32,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_calibration(self.pfa, self.trials)
    }
}

fn validate_calibration(pfa: f64, trials: u32) -> Result<()> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::Config(format!("pfa = {pfa} must lie in (0, 1)")));
    }
    if pfa * trials as f64 + 1e-9 < MIN_EXCEEDANCES {
        return Err(Error::Config(format!(
            "pfa * trials = {} is below {MIN_EXCEEDANCES}",
            pfa * trials as f64
        )));
    }
    Ok(())
}

/// One calibrated threshold, bound to the scenario it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdRow {
    pub detector: DetectorId,
    pub scenario_hash: String,
    pub pfa: f64,
    pub eta: f64,
    pub trials: u32,
    pub master_seed: u64,
}

impl ThresholdRow {
    pub fn check_hash(&self, cfg: &ScenarioConfig) -> Result<()> {
        let found = cfg.scenario_hash();
        if found != self.scenario_hash {
            return Err(Error::ScenarioHashMismatch {
                expected: self.scenario_hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThresholdTable {
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    pub fn get(&self, detector: DetectorId) -> Option<&ThresholdRow> {
        self.rows.iter().find(|r| r.detector == detector)
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u32, trials: u32) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes >= trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// Midpoint between the `m`-th and `(m+1)`-th largest values, `m = round(pfa * len)`.
pub fn threshold_from_statistics(stats: &[f64], pfa: f64) -> Result<f64> {
    if stats.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite);
    }
    let m = (pfa * stats.len() as f64).round() as usize;
    if m == 0 || m >= stats.len() {
        return Err(Error::Config(format!(
            "pfa = {pfa} with {} trials leaves no order statistic to split",
            stats.len()
        )));
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let eta = 0.5 * (sorted[m - 1] + sorted[m]);
    if !eta.is_finite() {
        return Err(Error::Precondition(format!(
            "threshold is not finite: order statistics {} and {}",
            sorted[m - 1],
            sorted[m]
        )));
    }
    Ok(eta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdPoint {
    pub sinr_db: f64,
    pub pd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdCurve {
    pub detector: DetectorId,
    pub scenario_hash: String,
    pub env: Environment,
    pub order: SignalOrder,
    pub k_s: usize,
    pub master_seed: u64,
    pub points: Vec<PdPoint>,
}

impl PdCurve {
    pub fn pd(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.pd).collect()
    }
}

/// Parameter perturbed by a false-alarm sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    /// Clutter-to-noise ratio, dB.
    CnrDb,
    /// Secondary-to-primary power ratio, linear.
    Gamma,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::CnrDb => "cnr_db",
            SweepParam::Gamma => "gamma",
        }
    }

    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut out = cfg.clone();
        match self {
            SweepParam::CnrDb => out.cnr_db = value,
            SweepParam::Gamma => out.gamma = value,
        }
        out
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cnr_db" => Ok(SweepParam::CnrDb),
            "gamma" => Ok(SweepParam::Gamma),
            other => Err(Error::Config(format!(
                "sweep parameter must be cnr_db or gamma, got '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub pfa_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u32,
}

/// Parallel trial executor. The worker count affects speed only.
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0), ..., f(trials - 1)` in trial order.
    pub fn map_trials<T, F>(&self, trials: u32, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u32) -> T + Sync,
    {
        self.pool.install(|| (0..trials).into_par_iter().map(&f).collect())
    }

    /// Statistics of every detector on `trials` data sets. Row `i` holds
    /// detector `i`; a failure in any trial fails that detector.
    fn statistics(
        &self,
        ids: &[DetectorId],
        scenario: &Scenario,
        truth: Hypothesis,
        sinr_db: f64,
        trials: u32,
        stream: impl Fn(u32) -> RngStream + Sync,
    ) -> Vec<Result<Vec<f64>>> {
        let per_trial = self.map_trials(trials, |t| {
            let data = scenario.generate_dataset(truth, sinr_db, &stream(t));
            evaluate_many(ids, &data.z_p, &data.z_s, scenario.basis())
        });
        let mut out: Vec<Result<Vec<f64>>> =
            ids.iter().map(|_| Ok(Vec::with_capacity(trials as usize))).collect();
        for trial in per_trial {
            for (slot, value) in out.iter_mut().zip(trial) {
                if let Ok(values) = slot {
                    match value {
                        Ok(v) => values.push(v),
                        Err(e) => *slot = Err(e),
                    }
                }
            }
        }
        out
    }

    /// Calibrates every detector on one shared set of H0 trials.
    pub fn calibrate_many(
        &self,
        ids: &[DetectorId],
        cfg: &ScenarioConfig,
        pfa: f64,
        trials: u32,
        master_seed: u64,
    ) -> Vec<Result<ThresholdRow>> {
        if let Err(e) = validate_calibration(pfa, trials) {
            let msg = e.to_string();
            return ids.iter().map(|_| Err(Error::Config(msg.clone()))).collect();
        }
        let scenario = match Scenario::new(cfg) {
            Ok(s) => s,
            Err(e) => {
                let msg = e.to_string();
                return ids.iter().map(|_| Err(Error::Config(msg.clone()))).collect();
            }
        };
        let gates: Vec<Result<()>> = ids.iter().map(|d| d.check_preconditions(cfg)).collect();
        let runnable: Vec<DetectorId> = ids
            .iter()
            .zip(&gates)
            .filter(|(_, g)| g.is_ok())
            .map(|(&d, _)| d)
            .collect();
        let mut stats = self
            .statistics(&runnable, &scenario, Hypothesis::H0, 0.0, trials, |t| {
                RngStream::new(master_seed, stream_id(Domain::Calibration, 0, t))
            })
            .into_iter();
        let hash = cfg.scenario_hash();
        ids.iter()
            .zip(gates)
            .map(|(&detector, gate)| {
                gate?;
                let values = stats.next().expect("one result per runnable detector")?;
                Ok(ThresholdRow {
                    detector,
                    scenario_hash: hash.clone(),
                    pfa,
                    eta: threshold_from_statistics(&values, pfa)?,
                    trials,
                    master_seed,
                })
            })
            .collect()
    }

    pub fn calibrate_threshold(
        &self,
        spec: &CalibrationSpec,
        cfg: &ScenarioConfig,
    ) -> Result<ThresholdRow> {
        spec.validate()?;
        self.calibrate_many(&[spec.detector], cfg, spec.pfa, spec.trials, spec.master_seed)
            .pop()
            .expect("one row")
    }

    /// Detection curves for several calibrated detectors. At each grid point
    /// all detectors see the same trials.
    pub fn pd_curves(
        &self,
        rows: &[ThresholdRow],
        cfg: &ScenarioConfig,
        sinr_grid: &[f64],
        trials: u32,
        master_seed: u64,
    ) -> Vec<Result<PdCurve>> {
        let checked: Vec<Result<()>> = rows
            .iter()
            .map(|r| r.check_hash(cfg).and_then(|_| r.detector.check_preconditions(cfg)))
            .collect();
        if sinr_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return rows
                .iter()
                .map(|_| Err(Error::Config("SINR grid must be strictly ascending".into())))
                .collect();
        }
        let scenario = match Scenario::new(cfg) {
            Ok(s) => s,
            Err(e) => {
                let msg = e.to_string();
                return rows.iter().map(|_| Err(Error::Config(msg.clone()))).collect();
            }
        };
        let active: Vec<&ThresholdRow> = rows
            .iter()
            .zip(&checked)
            .filter(|(_, c)| c.is_ok())
            .map(|(r, _)| r)
            .collect();
        let ids: Vec<DetectorId> = active.iter().map(|r| r.detector).collect();

        let mut curves: Vec<Result<Vec<PdPoint>>> = active.iter().map(|_| Ok(Vec::new())).collect();
        for &sinr_db in sinr_grid {
            let tag = tag_for(sinr_db);
            let stats = self.statistics(&ids, &scenario, Hypothesis::H1, sinr_db, trials, |t| {
                RngStream::new(master_seed, stream_id(Domain::Detection, tag, t))
            });
            for ((curve, row), values) in curves.iter_mut().zip(&active).zip(stats) {
                let Ok(points) = curve else { continue };
                match values {
                    Ok(values) => {
                        let hits = values.iter().filter(|&&v| v > row.eta).count() as u32;
                        let (ci_low, ci_high) = wilson(hits, trials);
                        points.push(PdPoint {
                            sinr_db,
                            pd: if trials == 0 { 0.0 } else { hits as f64 / trials as f64 },
                            ci_low,
                            ci_high,
                            trials,
                        });
                    }
                    Err(e) => *curve = Err(e),
                }
            }
        }

        let mut curves = curves.into_iter();
        rows.iter()
            .zip(checked)
            .map(|(row, check)| {
                check?;
                Ok(PdCurve {
                    detector: row.detector,
                    scenario_hash: row.scenario_hash.clone(),
                    env: cfg.env,
                    order: cfg.order,
                    k_s: cfg.k_s,
                    master_seed,
                    points: curves.next().expect("one curve per active row")?,
                })
            })
            .collect()
    }

    pub fn pd_curve(
        &self,
        row: &ThresholdRow,
        cfg: &ScenarioConfig,
        sinr_grid: &[f64],
        trials: u32,
        master_seed: u64,
    ) -> Result<PdCurve> {
        self.pd_curves(std::slice::from_ref(row), cfg, sinr_grid, trials, master_seed)
            .pop()
            .expect("one curve")
    }

    pub fn estimate_pd(
        &self,
        row: &ThresholdRow,
        cfg: &ScenarioConfig,
        sinr_db: f64,
        trials: u32,
        master_seed: u64,
    ) -> Result<PdPoint> {
        let curve = self.pd_curve(row, cfg, &[sinr_db], trials, master_seed)?;
        Ok(curve.points[0])
    }

    /// False-alarm rate of fixed thresholds as one parameter is moved away
    /// from the calibration config. Every value reuses the same trial streams.
    pub fn pfa_sweep(
        &self,
        rows: &[ThresholdRow],
        cfg: &ScenarioConfig,
        param: SweepParam,
        values: &[f64],
        trials: u32,
        master_seed: u64,
    ) -> Vec<Result<Vec<SweepPoint>>> {
        let mut out: Vec<Result<Vec<SweepPoint>>> = rows
            .iter()
            .map(|r| {
                r.check_hash(cfg)
                    .and_then(|_| r.detector.check_preconditions(cfg))
                    .map(|_| Vec::new())
            })
            .collect();
        for &value in values {
            let swept = param.apply(cfg, value);
            let scenario = match Scenario::new(&swept) {
                Ok(s) => s,
                Err(e) => {
                    let msg = e.to_string();
                    for slot in out.iter_mut().filter(|s| s.is_ok()) {
                        *slot = Err(Error::Config(msg.clone()));
                    }
                    break;
                }
            };
            let active: Vec<usize> = (0..rows.len()).filter(|&i| out[i].is_ok()).collect();
            let ids: Vec<DetectorId> = active.iter().map(|&i| rows[i].detector).collect();
            let stats = self.statistics(&ids, &scenario, Hypothesis::H0, 0.0, trials, |t| {
                RngStream::new(master_seed, stream_id(Domain::FalseAlarm, 0, t))
            });
            for (&i, values) in active.iter().zip(stats) {
                match values {
                    Ok(v) => {
                        let hits = v.iter().filter(|&&s| s > rows[i].eta).count() as u32;
                        let (ci_low, ci_high) = wilson(hits, trials);
                        if let Ok(points) = &mut out[i] {
                            points.push(SweepPoint {
                                value,
                                pfa_hat: if trials == 0 { 0.0 } else { hits as f64 / trials as f64 },
                                ci_low,
                                ci_high,
                                trials,
                            });
                        }
                    }
                    Err(e) => out[i] = Err(e),
                }
            }
        }
        out
    }

    /// Empirical false-alarm rate on a fresh H0 batch at the calibration config.
    pub fn estimate_pfa(
        &self,
        row: &ThresholdRow,
        cfg: &ScenarioConfig,
        trials: u32,
        master_seed: u64,
    ) -> Result<SweepPoint> {
        let value = cfg.cnr_db;
        let mut res = self.pfa_sweep(
            std::slice::from_ref(row),
            cfg,
            SweepParam::CnrDb,
            &[value],
            trials,
            master_seed,
        );
        Ok(res.pop().expect("one sweep")?[0])
    }
}
