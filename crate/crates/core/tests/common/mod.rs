//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the crate's solvers: projectors come from explicit
//! inverses, eigenvalues from nalgebra directly, and scale estimates from a
//! dense log grid refined by golden-section search.

#![allow(dead_code)]

use num_complex::Complex64;
use subdetect::matcore::ComplexMatrix;
use subdetect::rng::RngStream;
use subdetect::scenario::SubspaceBasis;

pub const GRID_POINTS: usize = 2000;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
}

/// Orthonormal basis by modified Gram-Schmidt.
pub fn random_basis(n: usize, r: usize, rng: &mut RngStream) -> SubspaceBasis {
    let mut q = random_matrix(n, r, rng);
    for j in 0..r {
        for i in 0..j {
            let qi = q.column(i).clone_owned();
            let proj = qi.dotc(&q.column(j));
            let mut cj = q.column_mut(j);
            cj -= &qi * proj;
        }
        let norm = q.column(j).norm();
        let mut cj = q.column_mut(j);
        cj /= Complex64::new(norm, 0.0);
    }
    SubspaceBasis::new(q).unwrap()
}

pub fn inverse(a: &ComplexMatrix) -> ComplexMatrix {
    a.clone().try_inverse().expect("invertible")
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn eig_desc(a: &ComplexMatrix) -> Vec<f64> {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

pub fn trace_re(a: &ComplexMatrix) -> f64 {
    a.trace().re
}

/// `H (H^H A H)^{-1} H^H A`, the `A`-orthogonal projector onto `<H>`.
pub fn weighted_projector(h: &ComplexMatrix, a: &ComplexMatrix) -> ComplexMatrix {
    h * inverse(&(h.adjoint() * a * h)) * h.adjoint() * a
}

pub fn scm(z_s: &ComplexMatrix) -> ComplexMatrix {
    z_s * z_s.adjoint() / Complex64::new(z_s.ncols() as f64, 0.0)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Golden-section search for the maximum of `f` on `[lo, hi]` in log space.
fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
    for _ in 0..200 {
        if hi - lo < 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2.exp());
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1.exp());
        }
    }
    // include the bracket ends so a maximum on the domain boundary is kept
    let mut best = 0.5 * (lo + hi);
    let mut fb = f(best.exp());
    for x in [lo, hi] {
        let fx = f(x.exp());
        if fx > fb {
            best = x;
            fb = fx;
        }
    }
    best.exp()
}

/// Maximizer of `f` over `[max(1e-4 scale, floor), 1e4 scale]`: the best of
/// `GRID_POINTS` log-spaced points, refined inside its neighbouring cells.
pub fn grid_argmax(f: &dyn Fn(f64) -> f64, scale: f64, floor: f64) -> f64 {
    let lo = (1e-4 * scale).max(floor).ln();
    let hi = (1e4 * scale).ln();
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let mut best = 0usize;
    let mut fb = f64::NEG_INFINITY;
    for i in 0..GRID_POINTS {
        let v = f((lo + i as f64 * step).exp());
        if v > fb {
            fb = v;
            best = i;
        }
    }
    let a = lo + best.saturating_sub(1) as f64 * step;
    let b = lo + (best + 1).min(GRID_POINTS - 1) as f64 * step;
    golden_max(f, a, b)
}

/// `log f(g) = a log g + sum log(1/g + mu)`, minimized by the GLR scale estimate.
pub fn glr_scale_log_objective(a: f64, mu: &[f64], g: f64) -> f64 {
    let mut v = a * g.ln();
    for &m in mu {
        v += (1.0 / g + m).ln();
    }
    v
}

pub fn glr_scale_oracle(a: f64, mu: &[f64]) -> f64 {
    let pos: Vec<f64> = mu.iter().copied().filter(|&m| m > 0.0).collect();
    let scale = pos.len() as f64 / pos.iter().sum::<f64>();
    grid_argmax(&|g| -glr_scale_log_objective(a, mu, g), scale, 0.0)
}

/// Known-subspace profile written with the shrinkage `delta_i(g)`:
/// `-K_P N log g - T/g - K_P sum log(1 + delta_i) - sum (b_i/g) / (1 + delta_i)`.
pub fn ks_profile(b: &[f64], t_perp: f64, k_p: usize, n: usize, g: f64) -> f64 {
    let kp = k_p as f64;
    let mut v = -kp * n as f64 * g.ln() - t_perp / g;
    for &bi in b {
        let d = (bi / (kp * g) - 1.0).max(0.0);
        v -= kp * d.ln_1p() + (bi / g) / (1.0 + d);
    }
    v
}

/// Unknown-subspace profile written with `q_i(g) = max(s_i/K_P - g, 0)` over
/// the `p` leading eigenvalues and the remaining nonzero ones as a white residual.
pub fn us_profile(sigma: &[f64], p: usize, r0: usize, k_p: usize, n: usize, g: f64) -> f64 {
    let kp = k_p as f64;
    let mut v = -kp * (n - p) as f64 * g.ln();
    for &s in &sigma[..p] {
        let q = (s / kp - g).max(0.0);
        v -= kp * (g + q).ln() + s / (g + q);
    }
    v - sigma[p..r0].iter().sum::<f64>() / g
}

pub fn numerical_rank(desc: &[f64]) -> usize {
    let top = desc[0];
    desc.iter().take_while(|&&v| v > 1e-10 * top).count()
}
