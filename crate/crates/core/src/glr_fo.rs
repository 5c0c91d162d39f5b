//! First-order GLR statistics for known- and unknown-subspace signals in
//! homogeneous and partially-homogeneous disturbance.
//!
//! All four statistics are ratios of determinants (or of eigenvalue products)
//! and are evaluated in log space before the final exponentiation. The
//! partially-homogeneous variants need the ML estimate of the power ratio,
//! which is the unique minimizer of
//!
//! ```text
//! f(g) = g^a * prod_j (1/g + mu_j)
//! ```
//!
//! over `g > 0`. Setting `d log f / dg = 0` gives `sum_j 1 / (1 + g mu_j) = a`.
//! The left side falls monotonically from `len(mu)` to the number of zero
//! `mu_j`, so a positive root exists exactly when `zeros < a < len`.

use crate::error::{Error, Result};
use crate::matcore::{
    hermitian_eigenvalues, inv_sqrt, log_det_hpd, orthonormal_basis, ComplexMatrix,
    HermitianMatrix,
};
use crate::scenario::SubspaceBasis;

/// Eigenvalues below this fraction of the largest are treated as exact zeros.
pub const ZERO_EIGEN_RELATIVE: f64 = 1e-12;

/// ML estimate of the power ratio and the minimized objective `log f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaEstimate {
    pub gamma_hat: f64,
    pub objective_value: f64,
    pub iterations: usize,
}

/// `log f(g) = a log g + sum_j log(1/g + mu_j)`.
pub fn scale_objective(a: f64, mu: &[f64], gamma: f64) -> f64 {
    a * gamma.ln() + mu.iter().map(|&m| (1.0 / gamma + m).ln()).sum::<f64>()
}

fn stationary_residual(a: f64, mu: &[f64], log_gamma: f64) -> f64 {
    let g = log_gamma.exp();
    mu.iter().map(|&m| 1.0 / (1.0 + g * m)).sum::<f64>() - a
}

/// Unique positive root of `sum_j 1 / (1 + g mu_j) = a`.
pub fn gamma_root(a: f64, mu: &[f64]) -> Result<GammaEstimate> {
    let len = mu.len();
    let zeros = mu.iter().filter(|&&m| m <= 0.0).count();
    if !(a > zeros as f64 && a < len as f64) || mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::GammaRoot { a, len, zeros });
    }

    // Bracket in log space around 1 / mean(mu_j > 0).
    let positive: Vec<f64> = mu.iter().copied().filter(|&m| m > 0.0).collect();
    let mean = positive.iter().sum::<f64>() / positive.len() as f64;
    let centre = -mean.ln();
    let mut step = 1.0;
    let mut lo = centre - step;
    let mut hi = centre + step;
    let mut iterations = 0usize;
    while stationary_residual(a, mu, lo) <= 0.0 {
        step *= 2.0;
        lo = centre - step;
        iterations += 1;
    }
    step = 1.0;
    while stationary_residual(a, mu, hi) >= 0.0 {
        step *= 2.0;
        hi = centre + step;
        iterations += 1;
    }

    // Bisect until the bracket stops shrinking.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if stationary_residual(a, mu, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let log_gamma = if stationary_residual(a, mu, lo).abs() <= stationary_residual(a, mu, hi).abs() {
        lo
    } else {
        hi
    };
    let gamma_hat = log_gamma.exp();
    Ok(GammaEstimate {
        gamma_hat,
        objective_value: scale_objective(a, mu, gamma_hat),
        iterations,
    })
}

/// FO-KS-PHE requires `r < N` and `min(K_P, N - r) > N K_P / K`.
pub fn ks_phe_condition(n: usize, k_p: usize, k_s: usize, r: usize) -> Result<()> {
    let k = (k_p + k_s) as f64;
    let bound = (n * k_p) as f64 / k;
    if r >= n || (k_p.min(n - r) as f64) <= bound {
        return Err(Error::Precondition(format!(
            "FO-KS-PHE needs r < N and min(K_P, N-r) > N*K_P/K; got N={n}, K_P={k_p}, K={}, r={r} (bound {bound:.4})",
            k_p + k_s
        )));
    }
    Ok(())
}

/// FO-US-PHE requires `min(N, K_P) >= r + 1` and `min(N, K_P) > N K_P / K + r`.
pub fn us_phe_condition(n: usize, k_p: usize, k_s: usize, r: usize) -> Result<()> {
    let k = (k_p + k_s) as f64;
    let m = n.min(k_p);
    let bound = (n * k_p) as f64 / k + r as f64;
    if m < r + 1 || (m as f64) <= bound {
        return Err(Error::Precondition(format!(
            "FO-US-PHE needs min(N, K_P) >= r+1 and min(N, K_P) > N*K_P/K + r; got N={n}, K_P={k_p}, K={}, r={r} (bound {bound:.4})",
            k_p + k_s
        )));
    }
    Ok(())
}

/// Whitened data for the first-order GLR statistics, built on `S_S = Z_S Z_S^H`.
#[derive(Clone, Debug)]
pub struct GlrFoInput {
    n: usize,
    k_p: usize,
    k_s: usize,
    r: usize,
    basis: Option<SubspaceBasis>,
    /// `S_S^{-1/2}`
    whitener: HermitianMatrix,
    /// `S_S^{-1/2} Z_P`
    x: ComplexMatrix,
}

impl GlrFoInput {
    /// `basis` is required by the known-subspace statistics; `r` is the
    /// subspace dimension used by the unknown-subspace ones (taken from the
    /// basis when one is given).
    pub fn new(
        z_p: &ComplexMatrix,
        z_s: &ComplexMatrix,
        basis: Option<&SubspaceBasis>,
        r: usize,
    ) -> Result<Self> {
        let n = z_p.nrows();
        if z_s.nrows() != n {
            return Err(Error::Dimension(format!(
                "Z_P has {n} rows but Z_S has {}",
                z_s.nrows()
            )));
        }
        if z_s.ncols() < n {
            return Err(Error::Precondition(format!(
                "K_S = {} must be at least N = {n}",
                z_s.ncols()
            )));
        }
        if let Some(h) = basis {
            if h.dim() != n {
                return Err(Error::Dimension(format!(
                    "subspace basis has {} rows, data has {n}",
                    h.dim()
                )));
            }
        }
        let whitener = inv_sqrt(&HermitianMatrix::gram(z_s))?;
        let x = whitener.as_matrix() * z_p;
        Ok(Self {
            n,
            k_p: z_p.ncols(),
            k_s: z_s.ncols(),
            r: basis.map_or(r, SubspaceBasis::rank),
            basis: basis.cloned(),
            whitener,
            x,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_p(&self) -> usize {
        self.k_p
    }

    pub fn k_s(&self) -> usize {
        self.k_s
    }

    pub fn k(&self) -> usize {
        self.k_p + self.k_s
    }

    fn basis(&self) -> Result<&SubspaceBasis> {
        self.basis
            .as_ref()
            .ok_or_else(|| Error::Precondition("known-subspace statistic needs a basis H".into()))
    }

    /// `P_G^perp S_S^{-1/2} Z_P` with `G = S_S^{-1/2} H`.
    fn projected_out(&self) -> Result<ComplexMatrix> {
        let g = self.whitener.as_matrix() * self.basis()?.matrix();
        let (q, _) = orthonormal_basis(&g)?;
        Ok(&self.x - &q * (q.adjoint() * &self.x))
    }

    /// `M_0 = Z_P^H S_S^{-1} Z_P`
    fn m0(&self) -> HermitianMatrix {
        HermitianMatrix::gram(&self.x.adjoint())
    }

    fn m1(&self) -> Result<HermitianMatrix> {
        Ok(HermitianMatrix::gram(&self.projected_out()?.adjoint()))
    }

    /// Ascending eigenvalues of `S_S^{-1/2} Z_P Z_P^H S_S^{-1/2}`.
    fn whitened_gram_eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&HermitianMatrix::gram(&self.x)).map(clean_eigenvalues)
    }
}

/// Clamp negatives and snap relatively tiny eigenvalues to zero.
fn clean_eigenvalues(mut v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().cloned().fold(0.0, f64::max);
    for x in v.iter_mut() {
        if *x <= ZERO_EIGEN_RELATIVE * max {
            *x = 0.0;
        }
    }
    v
}

fn log_det_identity_plus(m: &HermitianMatrix) -> Result<f64> {
    let n = m.dim();
    let shifted = HermitianMatrix::new(m.as_matrix() + ComplexMatrix::identity(n, n))?;
    log_det_hpd(&shifted)
}

/// FO-KS-HE: `det[I + M_0] / det[I + M_1]`.
pub fn stat_fo_ks_he(input: &GlrFoInput) -> Result<f64> {
    let num = log_det_identity_plus(&input.m0())?;
    let den = log_det_identity_plus(&input.m1()?)?;
    Ok((num - den).exp())
}

/// FO-KS-PHE: ratio of the minimized scale objectives built on `M_0` and `M_1`.
pub fn stat_fo_ks_phe(input: &GlrFoInput) -> Result<f64> {
    ks_phe_condition(input.n, input.k_p, input.k_s, input.basis()?.rank())?;
    let a = (input.k_p * (input.k() - input.n)) as f64 / input.k() as f64;
    let mu0 = clean_eigenvalues(hermitian_eigenvalues(&input.m0())?);
    let mu1 = clean_eigenvalues(hermitian_eigenvalues(&input.m1()?)?);
    let g0 = gamma_root(a, &mu0)?;
    let g1 = gamma_root(a, &mu1)?;
    Ok((g0.objective_value - g1.objective_value).exp())
}

/// FO-US-HE: product of `1 + sigma_i^2` over the `r` largest whitened
/// eigenvalues, or the full determinant when `min(N, K_P) < r + 1`.
pub fn stat_fo_us_he(input: &GlrFoInput) -> Result<f64> {
    if input.n.min(input.k_p) > input.r {
        let sigma = input.whitened_gram_eigenvalues()?;
        let top = &sigma[input.n - input.r..];
        Ok(top.iter().map(|s| s.ln_1p()).sum::<f64>().exp())
    } else {
        Ok(log_det_identity_plus(&HermitianMatrix::gram(&input.x))?.exp())
    }
}

/// FO-US-HE product form over the `r` largest eigenvalues regardless of the
/// `min(N, K_P)` branch; used to cross-check the determinant branch.
pub fn fo_us_he_product(input: &GlrFoInput) -> Result<f64> {
    let sigma = input.whitened_gram_eigenvalues()?;
    let r = input.r.min(input.n);
    Ok(sigma[input.n - r..].iter().map(|s| s.ln_1p()).sum::<f64>().exp())
}

/// FO-US-PHE: scale objective over all whitened eigenvalues against the one
/// over the `N - r` smallest.
pub fn stat_fo_us_phe(input: &GlrFoInput) -> Result<f64> {
    let (n, r) = (input.n, input.r);
    us_phe_condition(n, input.k_p, input.k_s, r)?;
    let sigma = input.whitened_gram_eigenvalues()?;
    let a0 = n as f64 * (1.0 - input.k_p as f64 / input.k() as f64);
    let a1 = a0 - r as f64;
    let g0 = gamma_root(a0, &sigma)?;
    if r == 0 {
        return Ok(1.0);
    }
    let g1 = gamma_root(a1, &sigma[..n - r])?;
    Ok((g0.objective_value - g1.objective_value).exp())
}
