//! Simulation world: clutter covariance, signal subspace, steering vectors,
//! signal amplitudes, and primary/secondary data generation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matcore::{
    cholesky, hermitian_eig, sample_colored_gaussian, solve_lower, ComplexMatrix, HermitianMatrix,
};
use crate::rng::RngStream;

/// Default sector half-width: 2 degrees.
pub const DEFAULT_THETA_RAD: f64 = 2.0 * PI * (2.0 / 360.0);
pub const DEFAULT_PHASE_STEP: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Environment {
    /// Primary and secondary disturbance share one covariance.
    Homogeneous,
    /// Secondary covariance is the primary one scaled by an unknown gamma.
    PartiallyHomogeneous,
}

impl Environment {
    pub fn as_str(self) -> &'static str {
        match self {
            Environment::Homogeneous => "HE",
            Environment::PartiallyHomogeneous => "PHE",
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HE" => Ok(Environment::Homogeneous),
            "PHE" => Ok(Environment::PartiallyHomogeneous),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SignalOrder {
    /// Deterministic amplitudes (mean shift).
    First,
    /// Zero-mean Gaussian amplitudes.
    Second,
}

impl SignalOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalOrder::First => "first",
            SignalOrder::Second => "second",
        }
    }
}

impl fmt::Display for SignalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "first" | "fo" | "1" => Ok(SignalOrder::First),
            "second" | "so" | "2" => Ok(SignalOrder::Second),
            other => Err(Error::Config(format!("unknown signal order '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Every parameter of one simulated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Array / sample dimension.
    pub n: usize,
    /// Primary (test) columns.
    pub k_p: usize,
    /// Secondary (training) columns.
    pub k_s: usize,
    /// Signal subspace dimension.
    pub r: usize,
    /// Clutter-to-noise ratio, dB. `-inf` disables clutter.
    pub cnr_db: f64,
    /// One-lag clutter correlation.
    pub rho_c: f64,
    /// Secondary-to-primary power ratio (linear). Only used in PHE.
    pub gamma: f64,
    /// Sector half-width angle, radians.
    pub theta_rad: f64,
    /// Electrical-angle grid step, radians.
    pub phase_step: f64,
    pub env: Environment,
    pub order: SignalOrder,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 16,
            k_p: 16,
            k_s: 32,
            r: 2,
            cnr_db: 30.0,
            rho_c: 0.95,
            gamma: 2.0,
            theta_rad: DEFAULT_THETA_RAD,
            phase_step: DEFAULT_PHASE_STEP,
            env: Environment::Homogeneous,
            order: SignalOrder::First,
        }
    }
}

impl ScenarioConfig {
    /// Total sample count `K_P + K_S`.
    pub fn k(&self) -> usize {
        self.k_p + self.k_s
    }

    pub fn beta(&self) -> f64 {
        self.theta_rad.sin()
    }

    pub fn clutter_power(&self) -> f64 {
        10f64.powf(self.cnr_db / 10.0)
    }

    /// Power ratio actually applied to the secondary data.
    pub fn effective_gamma(&self) -> f64 {
        match self.env {
            Environment::Homogeneous => 1.0,
            Environment::PartiallyHomogeneous => self.gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return fail("N must be at least 1".into());
        }
        if self.k_p == 0 {
            return fail("K_P must be at least 1".into());
        }
        if self.k_s < self.n {
            return fail(format!("K_S = {} must be at least N = {}", self.k_s, self.n));
        }
        if self.r == 0 || self.r > self.n {
            return fail(format!("r = {} must lie in [1, N = {}]", self.r, self.n));
        }
        if !(self.rho_c >= 0.0 && self.rho_c < 1.0) {
            return fail(format!("rho_c = {} must lie in [0, 1)", self.rho_c));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return fail(format!("gamma = {} must be positive", self.gamma));
        }
        if self.cnr_db.is_nan() || self.cnr_db == f64::INFINITY {
            return fail(format!("cnr_db = {} must be finite or -inf", self.cnr_db));
        }
        let beta = self.beta();
        if !(beta > 0.0 && beta < 1.0) {
            return fail(format!("sin(theta) = {beta} must lie in (0, 1)"));
        }
        if !(self.phase_step > 0.0) {
            return fail("phase_step must be positive".into());
        }
        Ok(())
    }

    /// Short digest of every field that influences the generated data.
    pub fn scenario_hash(&self) -> String {
        let canon = format!(
            "N={};K_P={};K_S={};r={};cnr_db={:.16e};rho_c={:.16e};gamma={:.16e};theta_rad={:.16e};phase_step={:.16e};env={};order={}",
            self.n,
            self.k_p,
            self.k_s,
            self.r,
            self.cnr_db,
            self.rho_c,
            self.effective_gamma(),
            self.theta_rad,
            self.phase_step,
            self.env,
            self.order,
        );
        let digest = Sha256::digest(canon.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Orthonormal `N x r` basis of the signal subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis(ComplexMatrix);

impl SubspaceBasis {
    pub fn new(h: ComplexMatrix) -> Result<Self> {
        let r = h.ncols();
        let err = (h.adjoint() * &h - ComplexMatrix::identity(r, r)).norm();
        if err > 1e-10 {
            return Err(Error::Precondition(format!(
                "subspace basis is not orthonormal: |H^H H - I| = {err:e}"
            )));
        }
        Ok(Self(h))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Draws of the electrical angles and complex amplitudes for one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalDraw {
    pub phases: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub z_p: ComplexMatrix,
    pub z_s: ComplexMatrix,
    pub truth: Hypothesis,
    pub sinr_db: Option<f64>,
}

/// `R = I + sigma_c^2 M_c` with `M_c(i, j) = rho_c^{|i-j|}`.
pub fn clutter_covariance(n: usize, cnr_db: f64, rho_c: f64) -> HermitianMatrix {
    let sigma2 = 10f64.powf(cnr_db / 10.0);
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let lag = i.abs_diff(j) as i32;
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta + sigma2 * rho_c.powi(lag), 0.0)
    });
    HermitianMatrix::new(m).expect("clutter covariance is finite and square")
}

/// `v(phi) = N^{-1/2} [1, e^{j phi}, ..., e^{j (N-1) phi}]^T`.
pub fn steering_vector(n: usize, phi: f64) -> ComplexMatrix {
    let s = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, 1, |k, _| Complex64::from_polar(s, phi * k as f64))
}

/// Sector correlation `R_beta(m, n) = 2 beta pi sinc((n - m) beta)`, normalized sinc.
pub fn sector_correlation(n: usize, beta: f64) -> HermitianMatrix {
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let d = j as f64 - i as f64;
        let v = if i == j {
            2.0 * beta * PI
        } else {
            2.0 * (PI * d * beta).sin() / d
        };
        Complex64::new(v, 0.0)
    });
    HermitianMatrix::new(m).expect("sector correlation is finite and square")
}

/// The `r` dominant eigenvectors of the sector correlation, eigenvalue-descending.
pub fn sector_subspace(n: usize, r: usize, beta: f64) -> Result<SubspaceBasis> {
    if r == 0 || r > n {
        return Err(Error::Config(format!("r = {r} must lie in [1, N = {n}]")));
    }
    let eig = hermitian_eig(&sector_correlation(n, beta))?;
    let h = ComplexMatrix::from_fn(n, r, |i, j| eig.vectors[(i, n - 1 - j)]);
    SubspaceBasis::new(h)
}

/// Electrical-angle grid `-pi beta + k step`, `k = 0, 1, ...` while inside the sector.
pub fn phase_grid(beta: f64, step: f64) -> Vec<f64> {
    let lo = -PI * beta;
    let hi = PI * beta;
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let phi = lo + k as f64 * step;
        if phi > hi + 1e-12 {
            break;
        }
        grid.push(phi);
        k += 1;
    }
    grid
}

/// Precomputed scenario: covariance, its factors, the subspace and the angle grid.
#[derive(Clone, Debug)]
pub struct Scenario {
    cfg: ScenarioConfig,
    covariance: HermitianMatrix,
    chol: ComplexMatrix,
    basis: SubspaceBasis,
    grid: Vec<f64>,
}

impl Scenario {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let covariance = clutter_covariance(cfg.n, cfg.cnr_db, cfg.rho_c);
        let chol = cholesky(&covariance)?;
        let basis = sector_subspace(cfg.n, cfg.r, cfg.beta())?;
        let grid = phase_grid(cfg.beta(), cfg.phase_step);
        Ok(Self {
            cfg: cfg.clone(),
            covariance,
            chol,
            basis,
            grid,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn covariance(&self) -> &HermitianMatrix {
        &self.covariance
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn phase_grid(&self) -> &[f64] {
        &self.grid
    }

    /// `Tr(V^H R^{-1} V)` for steering vectors at the given angles.
    pub fn whitened_steering_energy(&self, phases: &[f64]) -> f64 {
        let n = self.cfg.n;
        let v = ComplexMatrix::from_fn(n, phases.len(), |k, i| {
            Complex64::from_polar(1.0 / (n as f64).sqrt(), phases[i] * k as f64)
        });
        // |L^{-1} V|_F^2 = Tr(V^H R^{-1} V)
        let w = solve_lower(&self.chol, &v);
        w.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn draw_signal(&self, sinr_db: f64, rng: &mut RngStream) -> SignalDraw {
        let phases: Vec<f64> = (0..self.cfg.k_p)
            .map(|_| self.grid[rng.index(self.grid.len())])
            .collect();
        let sinr = 10f64.powf(sinr_db / 10.0);
        let power = sinr / self.whitened_steering_energy(&phases);
        let amplitudes = match self.cfg.order {
            SignalOrder::First => {
                let mag = power.sqrt();
                (0..self.cfg.k_p)
                    .map(|_| Complex64::from_polar(mag, 2.0 * PI * rng.uniform()))
                    .collect()
            }
            SignalOrder::Second => {
                let sd = power.sqrt();
                (0..self.cfg.k_p).map(|_| rng.complex_normal() * sd).collect()
            }
        };
        SignalDraw { phases, amplitudes }
    }

    /// Primary and secondary data for one trial.
    ///
    /// The signal, primary noise and secondary noise come from separate lanes
    /// of `rng`, and secondary columns are drawn in order, so the first
    /// columns of `Z_S` do not depend on `K_S`.
    pub fn generate_dataset(
        &self,
        truth: Hypothesis,
        sinr_db: f64,
        rng: &RngStream,
    ) -> Dataset {
        let cfg = &self.cfg;
        let mut z_p = sample_colored_gaussian(&self.chol, cfg.k_p, &mut rng.lane(1));
        let z_s = sample_colored_gaussian(&self.chol, cfg.k_s, &mut rng.lane(2))
            .scale(cfg.effective_gamma().sqrt());
        if truth == Hypothesis::H1 {
            let draw = self.draw_signal(sinr_db, &mut rng.lane(0));
            for (i, (&phi, &alpha)) in draw.phases.iter().zip(&draw.amplitudes).enumerate() {
                let v = steering_vector(cfg.n, phi);
                for k in 0..cfg.n {
                    z_p[(k, i)] += alpha * v[(k, 0)];
                }
            }
        }
        Dataset {
            z_p,
            z_s,
            truth,
            sinr_db: (truth == Hypothesis::H1).then_some(sinr_db),
        }
    }
}
