//! Command-line front end: INI run configs, CSV outputs and figure presets.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ini::{Ini, Properties};

use crate::detector::{self, DetectorId};
use crate::error::{Error, Result};
use crate::montecarlo::{PdCurve, Runner, SweepParam, SweepPoint, ThresholdRow};
use crate::scenario::{Environment, ScenarioConfig, SignalOrder};

pub const THRESHOLD_HEADER: &str = "detector,scenario_hash,pfa,eta,trials,seed";
pub const PD_HEADER: &str = "detector,env,order,subspace,K_S,sinr_db,pd,ci_low,ci_high,trials,seed";
pub const SWEEP_HEADER: &str = "detector,param,value,pfa_hat,trials,seed";

/// Fixed float format for every CSV field: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Inclusive SINR grid `start, start + step, ..., <= stop`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SinrGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_db > 0.0) || !self.start_db.is_finite() || !self.stop_db.is_finite() {
            return Err(Error::Config(format!(
                "SINR grid needs finite bounds and a positive step; got {:?}",
                self
            )));
        }
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let v = self.start_db + i as f64 * self.step_db;
            if v > self.stop_db + 1e-9 * self.step_db {
                break;
            }
            out.push(v);
            i += 1;
        }
        Ok(out)
    }
}

/// Everything a run needs besides the output paths.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub pfa: f64,
    pub calib_trials: u32,
    pub pd_trials: u32,
    pub master_seed: u64,
    pub detectors: Vec<DetectorId>,
    pub sinr: SinrGrid,
}

fn get_parsed<T: FromStr>(props: Option<&Properties>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let Some(props) = props else { return Ok(default) };
    let found = props.iter().find(|(k, _)| k.eq_ignore_ascii_case(key));
    match found {
        None => Ok(default),
        Some((_, v)) => v
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("bad value for '{key}': '{v}' ({e})"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = ScenarioConfig::default();
        let sc = ini.section(Some("scenario"));
        let scenario = ScenarioConfig {
            n: get_parsed(sc, "n", d.n)?,
            k_p: get_parsed(sc, "k_p", d.k_p)?,
            k_s: get_parsed(sc, "k_s", d.k_s)?,
            r: get_parsed(sc, "r", d.r)?,
            cnr_db: get_parsed(sc, "cnr_db", d.cnr_db)?,
            rho_c: get_parsed(sc, "rho_c", d.rho_c)?,
            gamma: get_parsed(sc, "gamma", d.gamma)?,
            theta_rad: get_parsed(sc, "theta_rad", d.theta_rad)?,
            phase_step: get_parsed(sc, "phase_step", d.phase_step)?,
            env: get_parsed(sc, "env", d.env)?,
            order: get_parsed(sc, "order", d.order)?,
        };
        scenario.validate()?;
        let mc = ini.section(Some("montecarlo"));
        let pfa: f64 = get_parsed(mc, "pfa", 1e-3)?;
        let calib_trials = get_parsed(mc, "calib_trials", (100.0 / pfa).ceil() as u32)?;
        let sinr = ini.section(Some("sinr"));
        let detectors = ini
            .general_section()
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case("detectors"))
            .map(|(_, v)| detector::parse_list(v))
            .transpose()?
            .unwrap_or_default();
        if detectors.is_empty() {
            return Err(Error::Config("no detectors listed".into()));
        }
        Ok(Self {
            scenario,
            pfa,
            calib_trials,
            pd_trials: get_parsed(mc, "pd_trials", 1000)?,
            master_seed: get_parsed(mc, "master_seed", 1)?,
            detectors,
            sinr: SinrGrid {
                start_db: get_parsed(sinr, "start_db", 0.0)?,
                stop_db: get_parsed(sinr, "stop_db", 30.0)?,
                step_db: get_parsed(sinr, "step_db", 2.0)?,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// INI text that parses back to `self`.
    pub fn to_ini(&self) -> String {
        let s = &self.scenario;
        let names: Vec<&str> = self.detectors.iter().map(|d| d.name()).collect();
        let mut out = String::new();
        let _ = writeln!(out, "detectors = {}", names.join(","));
        let _ = writeln!(out, "\n[scenario]");
        let _ = writeln!(out, "n = {}\nk_p = {}\nk_s = {}\nr = {}", s.n, s.k_p, s.k_s, s.r);
        let _ = writeln!(out, "cnr_db = {:?}\nrho_c = {:?}\ngamma = {:?}", s.cnr_db, s.rho_c, s.gamma);
        let _ = writeln!(out, "theta_rad = {:?}\nphase_step = {:?}", s.theta_rad, s.phase_step);
        let _ = writeln!(out, "env = {}\norder = {}", s.env, s.order);
        let _ = writeln!(out, "\n[montecarlo]");
        let _ = writeln!(out, "pfa = {:?}\ncalib_trials = {}", self.pfa, self.calib_trials);
        let _ = writeln!(out, "pd_trials = {}\nmaster_seed = {}", self.pd_trials, self.master_seed);
        let _ = writeln!(out, "\n[sinr]");
        let _ = writeln!(
            out,
            "start_db = {:?}\nstop_db = {:?}\nstep_db = {:?}",
            self.sinr.start_db, self.sinr.stop_db, self.sinr.step_db
        );
        out
    }
}

/// Error text made safe for a single CSV field.
fn error_field(e: &Error) -> String {
    format!("error: {}", e.to_string().replace([',', '"', '\n', '\r'], ";"))
}

fn parse_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Rows of a thresholds file, one per detector; failed calibrations carry the error text.
pub fn write_thresholds(rows: &[(DetectorId, Result<ThresholdRow>)], cfg: &RunConfig) -> String {
    let mut out = format!("{THRESHOLD_HEADER}\n");
    let hash = cfg.scenario.scenario_hash();
    for (id, row) in rows {
        let line = match row {
            Ok(r) => format!(
                "{},{},{},{},{},{}",
                r.detector,
                r.scenario_hash,
                fmt_f64(r.pfa),
                fmt_f64(r.eta),
                r.trials,
                r.master_seed
            ),
            Err(e) => format!(
                "{id},{hash},{},{},{},{}",
                fmt_f64(cfg.pfa),
                error_field(e),
                cfg.calib_trials,
                cfg.master_seed
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parsed thresholds file: usable rows and the detectors whose calibration failed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThresholdFile {
    pub rows: Vec<ThresholdRow>,
    pub failed: Vec<(DetectorId, String)>,
}

pub fn read_thresholds(path: &Path) -> Result<ThresholdFile> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(THRESHOLD_HEADER) {
        return Err(parse_err(path, format!("expected header '{THRESHOLD_HEADER}'")));
    }
    let mut file = ThresholdFile::default();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(path, format!("line {}: expected 6 fields", i + 2)));
        }
        let bad = |what: &str| parse_err(path, format!("line {}: bad {what}", i + 2));
        let detector: DetectorId = f[0].parse()?;
        if f[3].starts_with("error") {
            file.failed.push((detector, f[3].to_string()));
            continue;
        }
        file.rows.push(ThresholdRow {
            detector,
            scenario_hash: f[1].to_string(),
            pfa: f[2].parse().map_err(|_| bad("pfa"))?,
            eta: f[3].parse().map_err(|_| bad("eta"))?,
            trials: f[4].parse().map_err(|_| bad("trials"))?,
            master_seed: f[5].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(file)
}

pub fn write_pd(curves: &[(DetectorId, Result<PdCurve>)], cfg: &RunConfig) -> String {
    let mut out = format!("{PD_HEADER}\n");
    let s = &cfg.scenario;
    for (id, curve) in curves {
        let prefix = format!("{id},{},{},{},{}", s.env, s.order, id.subspace().as_str(), s.k_s);
        match curve {
            Ok(c) => {
                for p in &c.points {
                    let _ = writeln!(
                        out,
                        "{prefix},{},{},{},{},{},{}",
                        fmt_f64(p.sinr_db),
                        fmt_f64(p.pd),
                        fmt_f64(p.ci_low),
                        fmt_f64(p.ci_high),
                        p.trials,
                        c.master_seed
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(
                    out,
                    "{prefix},{},,,,{},{}",
                    error_field(e),
                    cfg.pd_trials,
                    cfg.master_seed
                );
            }
        }
    }
    out
}

pub fn write_sweep(
    results: &[(DetectorId, Result<Vec<SweepPoint>>)],
    param: SweepParam,
    trials: u32,
    seed: u64,
) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for (id, res) in results {
        match res {
            Ok(points) => {
                for p in points {
                    let _ = writeln!(
                        out,
                        "{id},{},{},{},{},{seed}",
                        param.as_str(),
                        fmt_f64(p.value),
                        fmt_f64(p.pfa_hat),
                        p.trials
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(out, "{id},{},{},,{trials},{seed}", param.as_str(), error_field(e));
            }
        }
    }
    out
}

/// Number of detectors that produced an error record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub failures: usize,
}

impl Outcome {
    fn merge(self, other: Outcome) -> Outcome {
        Outcome {
            failures: self.failures + other.failures,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn calibrate_rows(cfg: &RunConfig, runner: &Runner) -> Vec<(DetectorId, Result<ThresholdRow>)> {
    let rows = runner.calibrate_many(
        &cfg.detectors,
        &cfg.scenario,
        cfg.pfa,
        cfg.calib_trials,
        cfg.master_seed,
    );
    cfg.detectors.iter().copied().zip(rows).collect()
}

pub fn cmd_calibrate(cfg: &RunConfig, out: &Path, runner: &Runner) -> Result<Outcome> {
    let rows = calibrate_rows(cfg, runner);
    write_file(out, &write_thresholds(&rows, cfg))?;
    Ok(Outcome {
        failures: rows.iter().filter(|(_, r)| r.is_err()).count(),
    })
}

/// Threshold rows for the configured detectors. A row calibrated for another
/// scenario aborts the run; a missing or failed row becomes a per-detector error.
fn select_thresholds(
    cfg: &RunConfig,
    file: &ThresholdFile,
) -> Result<Vec<(DetectorId, Result<ThresholdRow>)>> {
    cfg.detectors
        .iter()
        .map(|&id| {
            if let Some(row) = file.rows.iter().find(|r| r.detector == id) {
                row.check_hash(&cfg.scenario)?;
                return Ok((id, Ok(row.clone())));
            }
            let reason = file
                .failed
                .iter()
                .find(|(d, _)| *d == id)
                .map_or_else(|| "no threshold for this detector".to_string(), |(_, m)| m.clone());
            Ok((id, Err(Error::Precondition(reason))))
        })
        .collect()
}

fn run_pd(
    cfg: &RunConfig,
    thresholds: Vec<(DetectorId, Result<ThresholdRow>)>,
    runner: &Runner,
) -> Result<Vec<(DetectorId, Result<PdCurve>)>> {
    let grid = cfg.sinr.points()?;
    let usable: Vec<ThresholdRow> = thresholds
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().cloned())
        .collect();
    let mut curves = runner
        .pd_curves(&usable, &cfg.scenario, &grid, cfg.pd_trials, cfg.master_seed)
        .into_iter();
    Ok(thresholds
        .into_iter()
        .map(|(id, row)| (id, row.and_then(|_| curves.next().expect("one curve per row"))))
        .collect())
}

pub fn cmd_pd(cfg: &RunConfig, thresholds: &Path, out: &Path, runner: &Runner) -> Result<Outcome> {
    let selected = select_thresholds(cfg, &read_thresholds(thresholds)?)?;
    let curves = run_pd(cfg, selected, runner)?;
    write_file(out, &write_pd(&curves, cfg))?;
    Ok(Outcome {
        failures: curves.iter().filter(|(_, c)| c.is_err()).count(),
    })
}

fn run_sweep(
    cfg: &RunConfig,
    thresholds: Vec<(DetectorId, Result<ThresholdRow>)>,
    param: SweepParam,
    values: &[f64],
    runner: &Runner,
) -> Vec<(DetectorId, Result<Vec<SweepPoint>>)> {
    let usable: Vec<ThresholdRow> = thresholds
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().cloned())
        .collect();
    let mut sweeps = runner
        .pfa_sweep(
            &usable,
            &cfg.scenario,
            param,
            values,
            cfg.calib_trials,
            cfg.master_seed,
        )
        .into_iter();
    thresholds
        .into_iter()
        .map(|(id, row)| (id, row.and_then(|_| sweeps.next().expect("one sweep per row"))))
        .collect()
}

pub fn cmd_pfa_sweep(
    cfg: &RunConfig,
    thresholds: &Path,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    runner: &Runner,
) -> Result<Outcome> {
    let selected = select_thresholds(cfg, &read_thresholds(thresholds)?)?;
    let res = run_sweep(cfg, selected, param, values, runner);
    write_file(out, &write_sweep(&res, param, cfg.calib_trials, cfg.master_seed))?;
    Ok(Outcome {
        failures: res.iter().filter(|(_, r)| r.is_err()).count(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    /// N = 8, K_P = 8, pfa = 1e-2, 1e4 calibration and 1e3 detection trials.
    Desk,
    /// N = 16, K_P = 16, pfa = 1e-3, 1e5 calibration and 1e3 detection trials.
    Paper,
}

/// What a figure preset runs.
#[derive(Clone, Debug, PartialEq)]
pub enum FigureJob {
    /// Detection curves for one config.
    Pd(RunConfig),
    /// False-alarm sweeps; one config per environment, all swept over `values`.
    Sweep {
        configs: Vec<RunConfig>,
        param: SweepParam,
        values: Vec<f64>,
    },
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Preset config for one figure.
pub fn figure_preset(id: &str, scale: Scale, seed: u64) -> Result<FigureJob> {
    use DetectorId::*;
    let (n, pfa, calib_trials) = match scale {
        Scale::Desk => (8, 1e-2, 10_000),
        Scale::Paper => (16, 1e-3, 100_000),
    };
    let base = |env: Environment, order: SignalOrder, k_s: usize, detectors: Vec<DetectorId>| RunConfig {
        scenario: ScenarioConfig {
            n,
            k_p: n,
            k_s,
            r: 2,
            gamma: 2.0,
            env,
            order,
            ..ScenarioConfig::default()
        },
        pfa,
        calib_trials,
        pd_trials: 1000,
        master_seed: seed,
        detectors,
        sinr: SinrGrid {
            start_db: 0.0,
            stop_db: 30.0,
            step_db: 1.0,
        },
    };
    let he = Environment::Homogeneous;
    let phe = Environment::PartiallyHomogeneous;
    let (first, second) = (SignalOrder::First, SignalOrder::Second);
    let fo_he = || vec![FoKsHe, FoUsHe, EpFoKsHe, EpFoUsHe];
    let fo_phe = || vec![FoKsPhe, FoUsPhe, EpFoKsPhe, EpFoUsPhe];
    let so_he = || vec![EpSoKsHe, EpSoUsHe];
    let so_phe = || vec![EpSoKsPhe, EpSoUsPhe];
    let job = match id {
        "1a" | "1b" => {
            let nominal_gamma = db_to_linear(3.0);
            let mk = |env, dets| {
                let mut c = base(env, first, 2 * n, dets);
                c.scenario.gamma = nominal_gamma;
                c
            };
            let configs = vec![mk(he, vec![FoKsHe, FoUsHe]), mk(phe, vec![FoKsPhe, FoUsPhe])];
            let (param, values) = if id == "1a" {
                (SweepParam::CnrDb, vec![10.0, 20.0, 30.0, 40.0])
            } else {
                (SweepParam::Gamma, [0.0, 1.5, 3.0, 4.5].iter().map(|&d| db_to_linear(d)).collect())
            };
            FigureJob::Sweep { configs, param, values }
        }
        "2" => FigureJob::Pd(base(he, first, 2 * n, fo_he())),
        "3" => FigureJob::Pd(base(he, first, 4 * n, fo_he())),
        "4" => FigureJob::Pd(base(phe, first, 2 * n, fo_phe())),
        "5" => FigureJob::Pd(base(phe, first, 4 * n, fo_phe())),
        "7" => FigureJob::Pd(base(he, second, 2 * n, so_he())),
        "8" => FigureJob::Pd(base(he, second, 4 * n, so_he())),
        "9" => FigureJob::Pd(base(phe, second, 2 * n, so_phe())),
        "10" => FigureJob::Pd(base(phe, second, 4 * n, so_phe())),
        "6" => return Err(Error::FigureOutOfScope(id.to_string())),
        other => {
            return Err(Error::Config(format!(
                "unknown figure '{other}'; expected one of 1a,1b,2,3,4,5,7,8,9,10"
            )))
        }
    };
    Ok(job)
}

/// Runs a figure preset and writes its config and CSV files into `out_dir`.
pub fn cmd_figure(
    id: &str,
    scale: Scale,
    seed: u64,
    out_dir: &Path,
    runner: &Runner,
) -> Result<(Outcome, Vec<PathBuf>)> {
    let job = figure_preset(id, scale, seed)?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: &str| -> Result<()> {
        let path = out_dir.join(name);
        write_file(&path, contents)?;
        written.push(path);
        Ok(())
    };
    let mut outcome = Outcome::default();
    match job {
        FigureJob::Pd(cfg) => {
            put(format!("fig{id}.ini"), &cfg.to_ini())?;
            let rows = calibrate_rows(&cfg, runner);
            put(format!("fig{id}_thresholds.csv"), &write_thresholds(&rows, &cfg))?;
            let curves = run_pd(&cfg, rows, runner)?;
            put(format!("fig{id}_pd.csv"), &write_pd(&curves, &cfg))?;
            outcome.failures = curves.iter().filter(|(_, c)| c.is_err()).count();
        }
        FigureJob::Sweep {
            configs,
            param,
            values,
        } => {
            for cfg in configs {
                let env = cfg.scenario.env;
                put(format!("fig{id}_{env}.ini"), &cfg.to_ini())?;
                let rows = calibrate_rows(&cfg, runner);
                put(format!("fig{id}_{env}_thresholds.csv"), &write_thresholds(&rows, &cfg))?;
                let res = run_sweep(&cfg, rows, param, &values, runner);
                put(
                    format!("fig{id}_{env}_sweep.csv"),
                    &write_sweep(&res, param, cfg.calib_trials, cfg.master_seed),
                )?;
                outcome = outcome.merge(Outcome {
                    failures: res.iter().filter(|(_, r)| r.is_err()).count(),
                });
            }
        }
    }
    Ok((outcome, written))
}

#[derive(Debug, Parser)]
#[command(name = "subdetect", version, about = "Adaptive subspace detectors and their Monte Carlo evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads; affects speed only, never results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate thresholds on H0 trials.
    Calibrate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection probability over the configured SINR grid.
    Pd {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// False-alarm rate of fixed thresholds as one scenario parameter varies.
    PfaSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        thresholds: PathBuf,
        /// cnr_db (dB) or gamma (linear).
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a figure preset.
    Figure {
        #[arg(long)]
        figure: String,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad sweep value '{t}'")))
        })
        .collect()
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let runner = Runner::new(workers)?;
    match cli.command {
        Command::Calibrate { cfg, out } => cmd_calibrate(&load_config(&cfg)?, &out, &runner),
        Command::Pd {
            cfg,
            thresholds,
            out,
        } => cmd_pd(&load_config(&cfg)?, &thresholds, &out, &runner),
        Command::PfaSweep {
            cfg,
            thresholds,
            param,
            values,
            out,
        } => cmd_pfa_sweep(
            &load_config(&cfg)?,
            &thresholds,
            param.parse()?,
            &parse_values(&values)?,
            &out,
            &runner,
        ),
        Command::Figure {
            figure,
            scale,
            seed,
            out,
        } => cmd_figure(&figure, scale, seed, &out, &runner).map(|(o, _)| o),
    }
}
