//! Estimate-and-plug detectors.
//!
//! Each statistic is the clairvoyant GLR with the disturbance covariance
//! replaced by the secondary-data SCM `S = (1/K_S) Z_S Z_S^H`. Eigenvalues in
//! this module are ordered descending.
//!
//! The two second-order partially-homogeneous detectors maximize a profile
//! likelihood in the scale `g` of the form
//!
//! ```text
//! p(g) = -K_P (N - m) log g - K_P sum_i log max(e_i / K_P, g)
//!        - T / g - sum_i e_i / max(e_i / K_P, g)
//! ```
//!
//! over `m` descending mode energies `e_i` and a residual energy `T`. Its
//! derivative is piecewise of the form `(c - K_P (N - k) g) / g^2` with `k` the
//! number of modes above `K_P g`, so each branch has at most one stationary
//! point in closed form.

use crate::error::{Error, Result};
use crate::matcore::{frob_sq, hermitian_eigenvalues, inv_sqrt, orthonormal_basis, ComplexMatrix, HermitianMatrix};
use crate::scenario::SubspaceBasis;

/// Relative cut below which eigenvalues do not count toward the numerical rank.
pub const RANK_RELATIVE: f64 = 1e-10;

/// Whitened data for the estimate-and-plug statistics.
#[derive(Clone, Debug)]
pub struct EpInput {
    n: usize,
    k_p: usize,
    r: usize,
    basis: Option<SubspaceBasis>,
    /// `S_{K_S}^{-1/2}`
    whitener: HermitianMatrix,
    /// `S_{K_S}^{-1/2} Z_P`
    x: ComplexMatrix,
}

impl EpInput {
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
        if let Some(h) = basis {
            if h.dim() != n {
                return Err(Error::Dimension(format!(
                    "subspace basis has {} rows, data has {n}",
                    h.dim()
                )));
            }
        }
        let k_s = z_s.ncols();
        if k_s == 0 {
            return Err(Error::Precondition("no secondary data".into()));
        }
        let scm = HermitianMatrix::gram(z_s).scale(1.0 / k_s as f64);
        let whitener = inv_sqrt(&scm)?;
        let x = whitener.as_matrix() * z_p;
        Ok(Self {
            n,
            k_p: z_p.ncols(),
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

    pub fn whitened_primary(&self) -> &ComplexMatrix {
        &self.x
    }

    pub fn whitener(&self) -> &HermitianMatrix {
        &self.whitener
    }

    /// Orthonormal basis of `<S^{-1/2} H>`.
    pub fn whitened_basis(&self) -> Result<ComplexMatrix> {
        let h = self
            .basis
            .as_ref()
            .ok_or_else(|| Error::Precondition("known-subspace statistic needs a basis H".into()))?;
        let g = self.whitener.as_matrix() * h.matrix();
        Ok(orthonormal_basis(&g)?.0)
    }

    /// `Tr[Z_P^H S^{-1} Z_P]`
    pub fn total_energy(&self) -> f64 {
        frob_sq(&self.x)
    }

    /// Descending eigenvalues of `S^{-1/2} Z_P Z_P^H S^{-1/2}`, negatives clamped.
    pub fn whitened_gram_eigenvalues(&self) -> Result<Vec<f64>> {
        let mut v = hermitian_eigenvalues(&HermitianMatrix::gram(&self.x))?;
        v.reverse();
        Ok(v.into_iter().map(|s| s.max(0.0)).collect())
    }

    /// Coordinates of the whitened primary data in the whitened subspace,
    /// `L^{-1} G^H S^{-1/2} Z_P`, and the energy left outside it.
    fn subspace_split(&self) -> Result<(ComplexMatrix, f64)> {
        let q = self.whitened_basis()?;
        let coords = q.adjoint() * &self.x;
        let residual = frob_sq(&(&self.x - &q * &coords));
        Ok((coords, residual))
    }

    /// Descending eigenvalues of `B = L^{-1} G^H S^{-1/2} Z_P Z_P^H S^{-1/2} G L^{-H}`.
    pub fn b_eigenvalues(&self) -> Result<Vec<f64>> {
        let (coords, _) = self.subspace_split()?;
        let mut v = hermitian_eigenvalues(&HermitianMatrix::gram(&coords))?;
        v.reverse();
        Ok(v.into_iter().map(|s| s.max(0.0)).collect())
    }
}

/// Leading entries above `RANK_RELATIVE` times the first one.
fn numerical_rank(desc: &[f64]) -> usize {
    match desc.first() {
        Some(&top) if top > 0.0 => desc.iter().take_while(|&&v| v > RANK_RELATIVE * top).count(),
        _ => 0,
    }
}

/// Eigenvalue shrinkage `max(raw_i / (K_P scale) - 1, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenShrinkage {
    pub raw: Vec<f64>,
    pub shrunk: Vec<f64>,
    pub kp: usize,
}

impl EigenShrinkage {
    pub fn new(raw: &[f64], kp: usize, scale: f64) -> Self {
        let shrunk = raw
            .iter()
            .map(|&v| (v / (kp as f64 * scale) - 1.0).max(0.0))
            .collect();
        Self {
            raw: raw.to_vec(),
            shrunk,
            kp,
        }
    }
}

/// Where a selected scale estimate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleBranch {
    /// Stationary point of the branch with `k` modes above `K_P g`.
    Stationary(usize),
    /// Breakpoint `e_i / K_P` (zero-based `i`).
    Breakpoint(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleChoice {
    pub gamma: f64,
    pub objective: f64,
    pub branch: ScaleBranch,
}

/// Piecewise scale profile shared by EP-SO-KS-PHE and EP-SO-US-PHE.
#[derive(Clone, Debug)]
pub struct ScaleProfile {
    /// Mode energies, descending.
    pub modes: Vec<f64>,
    /// Energy outside the modes.
    pub tail: f64,
    pub k_p: usize,
    pub n: usize,
}

impl ScaleProfile {
    pub fn objective(&self, gamma: f64) -> f64 {
        let kp = self.k_p as f64;
        let free = (self.n - self.modes.len()) as f64;
        let mut val = -kp * free * gamma.ln() - self.tail / gamma;
        for &e in &self.modes {
            let level = (e / kp).max(gamma);
            val -= kp * level.ln() + e / level;
        }
        val
    }

    /// Branch interval `[lower, upper)` for `k` active modes.
    fn interval(&self, k: usize) -> (f64, f64) {
        let kp = self.k_p as f64;
        let upper = if k == 0 { f64::INFINITY } else { self.modes[k - 1] / kp };
        let lower = if k == self.modes.len() { 0.0 } else { self.modes[k] / kp };
        (lower, upper)
    }

    /// Stationary points that fall inside their own branch, plus all breakpoints.
    pub fn candidates(&self) -> Vec<(f64, ScaleBranch)> {
        let kp = self.k_p as f64;
        let m = self.modes.len();
        let mut out = Vec::with_capacity(2 * m + 1);
        for k in 0..=m {
            if k >= self.n {
                continue;
            }
            let num = self.tail + self.modes[k..].iter().sum::<f64>();
            let gamma = num / (kp * (self.n - k) as f64);
            let (lo, hi) = self.interval(k);
            if gamma > 0.0 && gamma.is_finite() && lo <= gamma && gamma < hi {
                out.push((gamma, ScaleBranch::Stationary(k)));
            }
        }
        for (i, &e) in self.modes.iter().enumerate() {
            if e > 0.0 {
                out.push((e / kp, ScaleBranch::Breakpoint(i)));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Candidate with the largest profile value; the smaller scale wins ties.
    pub fn maximize(&self) -> Result<ScaleChoice> {
        let cands = self.candidates();
        let mut best: Option<ScaleChoice> = None;
        for &(gamma, branch) in &cands {
            let objective = self.objective(gamma);
            if best.is_none_or(|b| objective > b.objective) {
                best = Some(ScaleChoice {
                    gamma,
                    objective,
                    branch,
                });
            }
        }
        let best = best.ok_or(Error::ZeroPrimary)?;
        #[cfg(debug_assertions)]
        {
            if let ScaleBranch::Stationary(k) = best.branch {
                let (lo, hi) = self.interval(k);
                debug_assert!(lo <= best.gamma && best.gamma < hi);
            }
            for &(g, _) in &cands {
                debug_assert!(self.objective(g) <= best.objective);
            }
        }
        Ok(best)
    }
}

/// EP-FO-KS-HE: `Tr[Z_P^H S^{-1/2} P_{H_S} S^{-1/2} Z_P]`.
pub fn stat_ep_fo_ks_he(input: &EpInput) -> Result<f64> {
    let (coords, _) = input.subspace_split()?;
    Ok(frob_sq(&coords))
}

/// EP-FO-KS-PHE: total whitened energy over the energy outside `<H_S>`.
/// Data lying entirely inside the subspace gives `+inf`.
pub fn stat_ep_fo_ks_phe(input: &EpInput) -> Result<f64> {
    let total = input.total_energy();
    if total == 0.0 {
        return Err(Error::ZeroPrimary);
    }
    let (_, residual) = input.subspace_split()?;
    if residual <= RANK_RELATIVE * RANK_RELATIVE * total {
        return Ok(f64::INFINITY);
    }
    Ok(total / residual)
}

/// EP-FO-US-HE: sum of the `min(r, K_P)` largest whitened eigenvalues.
pub fn stat_ep_fo_us_he(input: &EpInput) -> Result<f64> {
    let sigma = input.whitened_gram_eigenvalues()?;
    Ok(sigma.iter().take(input.r.min(input.k_p)).sum())
}

/// EP-FO-US-PHE: EP-FO-US-HE normalized by the total whitened energy.
pub fn stat_ep_fo_us_phe(input: &EpInput) -> Result<f64> {
    let total = input.total_energy();
    if total == 0.0 {
        return Err(Error::ZeroPrimary);
    }
    Ok(stat_ep_fo_us_he(input)? / total)
}

/// EP-SO-KS-HE: `Tr[B] - K_P sum log(1 + l_i) - sum g_i / (1 + l_i)` over the
/// nonzero eigenvalues `g_i` of `B`, with `l_i = max(g_i / K_P - 1, 0)`.
pub fn stat_ep_so_ks_he(input: &EpInput) -> Result<f64> {
    let (coords, _) = input.subspace_split()?;
    let trace_b = frob_sq(&coords);
    let mut b = hermitian_eigenvalues(&HermitianMatrix::gram(&coords))?;
    b.reverse();
    let r_b = numerical_rank(&b);
    let shrink = EigenShrinkage::new(&b[..r_b], input.k_p, 1.0);
    let kp = input.k_p as f64;
    let mut stat = trace_b;
    for (&g, &l) in shrink.raw.iter().zip(&shrink.shrunk) {
        stat -= kp * l.ln_1p() + g / (1.0 + l);
    }
    Ok(stat)
}

/// Profile and selected scale for EP-SO-KS-PHE.
pub fn ep_so_ks_phe_scale(input: &EpInput) -> Result<(ScaleProfile, ScaleChoice)> {
    let (coords, residual) = input.subspace_split()?;
    let mut b = hermitian_eigenvalues(&HermitianMatrix::gram(&coords))?;
    b.reverse();
    let r_b = numerical_rank(&b);
    if r_b == 0 && residual == 0.0 {
        return Err(Error::ZeroPrimary);
    }
    let profile = ScaleProfile {
        modes: b[..r_b].to_vec(),
        tail: residual,
        k_p: input.k_p,
        n: input.n,
    };
    let choice = profile.maximize()?;
    Ok((profile, choice))
}

/// EP-SO-KS-PHE with the scale chosen by branch enumeration.
pub fn stat_ep_so_ks_phe(input: &EpInput) -> Result<f64> {
    let total = input.total_energy();
    if total == 0.0 {
        return Err(Error::ZeroPrimary);
    }
    let (profile, choice) = ep_so_ks_phe_scale(input)?;
    let kp = input.k_p as f64;
    let g = choice.gamma;
    let shrink = EigenShrinkage::new(&profile.modes, input.k_p, g);
    let mut stat = kp * input.n as f64 * (total.ln() - g.ln()) - profile.tail / g;
    for (&e, &d) in shrink.raw.iter().zip(&shrink.shrunk) {
        stat -= kp * d.ln_1p() + (e / g) / (1.0 + d);
    }
    Ok(stat)
}

/// EP-SO-US-HE: `Tr - K_P sum_{i<=r} log(1 + q_i) - sum_i s_i / (1 + q_i)`.
pub fn stat_ep_so_us_he(input: &EpInput) -> Result<f64> {
    let sigma = input.whitened_gram_eigenvalues()?;
    let r = input.r.min(sigma.len());
    let shrink = EigenShrinkage::new(&sigma[..r], input.k_p, 1.0);
    let kp = input.k_p as f64;
    let mut stat = input.total_energy();
    for (i, &s) in sigma.iter().enumerate() {
        let q = if i < r { shrink.shrunk[i] } else { 0.0 };
        stat -= kp * q.ln_1p() + s / (1.0 + q);
    }
    Ok(stat)
}

/// Profile, selected scale and numerical rank `r_0` for EP-SO-US-PHE.
pub fn ep_so_us_phe_scale(input: &EpInput) -> Result<(ScaleProfile, ScaleChoice, usize)> {
    let sigma = input.whitened_gram_eigenvalues()?;
    let r0 = numerical_rank(&sigma);
    if r0 == 0 {
        return Err(Error::ZeroPrimary);
    }
    let p = input.r.min(r0);
    let profile = ScaleProfile {
        modes: sigma[..p].to_vec(),
        tail: sigma[p..r0].iter().sum(),
        k_p: input.k_p,
        n: input.n,
    };
    let choice = profile.maximize()?;
    Ok((profile, choice, r0))
}

/// EP-SO-US-PHE, covering both the `r_0 <= r` and `r_0 > r` cases.
pub fn stat_ep_so_us_phe(input: &EpInput) -> Result<f64> {
    let total = input.total_energy();
    if total == 0.0 {
        return Err(Error::ZeroPrimary);
    }
    let (profile, choice, _) = ep_so_us_phe_scale(input)?;
    let kp = input.k_p as f64;
    let n = input.n as f64;
    let g = choice.gamma;
    let active = profile.modes.len();
    let mut stat = kp * n * total.ln() - kp * (n - active as f64) * g.ln();
    for &s in &profile.modes {
        let q = (s / kp - g).max(0.0);
        stat -= kp * (g + q).ln() + s / (g + q);
    }
    // sigma_{r+1..r_0} (empty when r_0 <= r)
    stat -= profile.tail / g;
    Ok(stat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::testutil::{random_basis, random_matrix, unit_secondary};
    use num_complex::Complex64;

    fn e1(n: usize) -> SubspaceBasis {
        SubspaceBasis::new(ComplexMatrix::from_fn(n, 1, |i, _| {
            Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)
        }))
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn ep_fo_ks_he_identity_whitening() {
        // Z_S = sqrt(2) I_2 with K_S = 2 gives S = I
        let z_s = ComplexMatrix::identity(2, 2) * Complex64::new(2f64.sqrt(), 0.0);
        let z_p = ComplexMatrix::from_fn(2, 1, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let inp = EpInput::new(&z_p, &z_s, Some(&e1(2)), 1).unwrap();
        assert!((stat_ep_fo_ks_he(&inp).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ep_ks_orthogonal_primary() {
        let z_s = unit_secondary(4);
        let mut rng = RngStream::new(40, 0);
        let mut z_p = random_matrix(4, 3, &mut rng);
        z_p.row_mut(0).fill(Complex64::new(0.0, 0.0));
        let inp = EpInput::new(&z_p, &z_s, Some(&e1(4)), 1).unwrap();
        assert!(stat_ep_fo_ks_he(&inp).unwrap().abs() < 1e-14);
        assert!((stat_ep_fo_ks_phe(&inp).unwrap() - 1.0).abs() < 1e-14);
        assert!(stat_ep_so_ks_he(&inp).unwrap().abs() < 1e-14);
        let (_, choice) = ep_so_ks_phe_scale(&inp).unwrap();
        let want = inp.total_energy() / (3.0 * 4.0);
        assert!(rel(choice.gamma, want) < 1e-12);
    }

    #[test]
    fn ep_fo_ks_phe_decomposition_and_scaling() {
        let mut rng = RngStream::new(41, 0);
        for _ in 0..20 {
            let z_p = random_matrix(6, 4, &mut rng);
            let z_s = random_matrix(6, 12, &mut rng);
            let h = random_basis(6, 2, &mut rng);
            let inp = EpInput::new(&z_p, &z_s, Some(&h), 2).unwrap();
            let (_, den) = inp.subspace_split().unwrap();
            let num = inp.total_energy();
            let he = stat_ep_fo_ks_he(&inp).unwrap();
            assert!(rel(num, he + den) < 1e-10);
            let phe = stat_ep_fo_ks_phe(&inp).unwrap();
            assert!(rel(phe * den, den + he) < 1e-8);
            assert!(phe >= 1.0);
            let inp3 = EpInput::new(&(&z_p * Complex64::new(3.0, 0.0)), &z_s, Some(&h), 2).unwrap();
            assert!(rel(stat_ep_fo_ks_phe(&inp3).unwrap(), phe) < 1e-13);
        }
    }

    #[test]
    fn ep_fo_ks_phe_inside_subspace_is_infinite() {
        let z_s = unit_secondary(3);
        let z_p = ComplexMatrix::from_fn(3, 2, |i, j| Complex64::new(if i == 0 { 1.0 + j as f64 } else { 0.0 }, 0.0));
        let inp = EpInput::new(&z_p, &z_s, Some(&e1(3)), 1).unwrap();
        assert_eq!(stat_ep_fo_ks_phe(&inp).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ep_fo_us_cases() {
        let mut rng = RngStream::new(42, 0);
        let z_p = random_matrix(5, 6, &mut rng);
        let z_s = random_matrix(5, 10, &mut rng);
        let inp = EpInput::new(&z_p, &z_s, None, 5).unwrap();
        assert!(rel(stat_ep_fo_us_he(&inp).unwrap(), inp.total_energy()) < 1e-12);

        let zero = EpInput::new(&ComplexMatrix::zeros(5, 3), &z_s, None, 2).unwrap();
        assert_eq!(stat_ep_fo_us_he(&zero).unwrap(), 0.0);
        assert!(matches!(stat_ep_fo_us_phe(&zero), Err(Error::ZeroPrimary)));

        let v = random_matrix(5, 1, &mut rng);
        let rank1 = &v * random_matrix(1, 4, &mut rng);
        for r in 1..=3 {
            let inp = EpInput::new(&rank1, &z_s, None, r).unwrap();
            assert!(rel(stat_ep_fo_us_he(&inp).unwrap(), inp.total_energy()) < 1e-10);
            assert!((stat_ep_fo_us_phe(&inp).unwrap() - 1.0).abs() < 1e-10);
        }

        let inp = EpInput::new(&z_p, &z_s, None, 2).unwrap();
        let s = stat_ep_fo_us_phe(&inp).unwrap();
        assert!(s > 0.0 && s < 1.0);
        let inp_c = EpInput::new(&(&z_p * Complex64::new(0.0, 4.0)), &z_s, None, 2).unwrap();
        assert!(rel(stat_ep_fo_us_phe(&inp_c).unwrap(), s) < 1e-12);
    }

    #[test]
    fn ep_so_ks_he_hand_value() {
        // N=2, K_P=1, S=I, H=e1, Z_P=e1: B=[1], lambda=0, statistic 1 - 0 - 1 = 0
        let z_s = ComplexMatrix::identity(2, 2) * Complex64::new(2f64.sqrt(), 0.0);
        let z_p = ComplexMatrix::from_fn(2, 1, |i, _| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let inp = EpInput::new(&z_p, &z_s, Some(&e1(2)), 1).unwrap();
        assert!(stat_ep_so_ks_he(&inp).unwrap().abs() < 1e-14);
        assert_eq!(inp.b_eigenvalues().unwrap().len(), 1);
    }

    #[test]
    fn ep_so_ks_he_nonnegative() {
        let mut rng = RngStream::new(43, 0);
        for _ in 0..20 {
            let z_p = random_matrix(6, 3, &mut rng) * Complex64::new(4.0, 0.0);
            let z_s = random_matrix(6, 12, &mut rng);
            let h = random_basis(6, 2, &mut rng);
            let inp = EpInput::new(&z_p, &z_s, Some(&h), 2).unwrap();
            assert!(stat_ep_so_ks_he(&inp).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn ep_so_us_he_hand_values() {
        // All whitened eigenvalues equal K_P: q = 0 and the statistic vanishes.
        let n = 4;
        let k_p = 4;
        let z_s = unit_secondary(n);
        let z_p = ComplexMatrix::identity(n, k_p) * Complex64::new((k_p as f64).sqrt(), 0.0);
        let inp = EpInput::new(&z_p, &z_s, None, 2).unwrap();
        assert!(stat_ep_so_us_he(&inp).unwrap().abs() < 1e-10);

        // one eigenvalue 2 K_P, the rest K_P / 2
        let mut z_p = ComplexMatrix::identity(n, k_p) * Complex64::new((k_p as f64 / 2.0).sqrt(), 0.0);
        z_p[(0, 0)] = Complex64::new((2.0 * k_p as f64).sqrt(), 0.0);
        let inp = EpInput::new(&z_p, &z_s, None, 1).unwrap();
        let kp = k_p as f64;
        let want = 2.0 * kp - kp * 2f64.ln() - kp;
        assert!((stat_ep_so_us_he(&inp).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn shrinkage_rule() {
        let s = EigenShrinkage::new(&[10.0, 6.0, 2.0], 4, 1.0);
        assert_eq!(s.shrunk, vec![1.5, 0.5, 0.0]);
        let s = EigenShrinkage::new(&[10.0, 6.0, 2.0], 4, 2.0);
        assert_eq!(s.shrunk, vec![0.25, 0.0, 0.0]);
        assert!(s.shrunk.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn profile_high_branch_when_modes_small() {
        // every mode below K_P * gamma_high: gamma = (T + sum e) / (K_P N)
        let p = ScaleProfile {
            modes: vec![3.0, 2.0],
            tail: 60.0,
            k_p: 4,
            n: 4,
        };
        let c = p.maximize().unwrap();
        assert_eq!(c.branch, ScaleBranch::Stationary(0));
        assert!(rel(c.gamma, 65.0 / 16.0) < 1e-14);
    }

    #[test]
    fn profile_flat_case_picks_smallest_breakpoint() {
        // r_0 = N <= r: profile constant below the smallest breakpoint, where
        // the last branch's stationary point coincides with that breakpoint
        let p = ScaleProfile {
            modes: vec![40.0, 20.0, 8.0],
            tail: 0.0,
            k_p: 4,
            n: 3,
        };
        let c = p.maximize().unwrap();
        assert!(rel(c.gamma, 2.0) < 1e-14);
        assert!(c.objective >= p.objective(1.0));
    }

    #[test]
    fn us_phe_high_branch_full_rank() {
        // K_P >= N, r = N - 1, equal eigenvalues: gamma = sum / (K_P N)
        let n = 4;
        let k_p = 8;
        let z_s = unit_secondary(n);
        let z_p = ComplexMatrix::from_fn(n, k_p, |i, j| {
            Complex64::new(if i == j % n { 1.0 } else { 0.0 }, 0.0)
        });
        let inp = EpInput::new(&z_p, &z_s, None, 3).unwrap();
        let (_, choice, r0) = ep_so_us_phe_scale(&inp).unwrap();
        assert_eq!(r0, n);
        let sigma = inp.whitened_gram_eigenvalues().unwrap();
        let want = sigma.iter().sum::<f64>() / (k_p * n) as f64;
        assert!(rel(choice.gamma, want) < 1e-12);
    }

    #[test]
    fn us_phe_r_covers_everything_reduces_to_modes_only() {
        let mut rng = RngStream::new(44, 0);
        let n = 4;
        let z_p = random_matrix(n, 6, &mut rng);
        let z_s = random_matrix(n, 8, &mut rng);
        let inp = EpInput::new(&z_p, &z_s, None, n).unwrap();
        let (profile, choice, r0) = ep_so_us_phe_scale(&inp).unwrap();
        assert_eq!(r0, n);
        assert_eq!(profile.tail, 0.0);
        let sigma = inp.whitened_gram_eigenvalues().unwrap();
        let kp = 6.0;
        let g = choice.gamma;
        let mut want = kp * n as f64 * inp.total_energy().ln();
        for &s in &sigma {
            let q = (s / kp - g).max(0.0);
            want -= kp * (g + q).ln() + s / (g + q);
        }
        assert!((stat_ep_so_us_phe(&inp).unwrap() - want).abs() < 1e-10 * want.abs());
    }

    #[test]
    fn zero_primary_errors() {
        let z_s = unit_secondary(3);
        let inp = EpInput::new(&ComplexMatrix::zeros(3, 2), &z_s, Some(&e1(3)), 1).unwrap();
        assert!(matches!(stat_ep_so_ks_phe(&inp), Err(Error::ZeroPrimary)));
        assert!(matches!(stat_ep_so_us_phe(&inp), Err(Error::ZeroPrimary)));
        assert!(matches!(stat_ep_fo_ks_phe(&inp), Err(Error::ZeroPrimary)));
    }
}
