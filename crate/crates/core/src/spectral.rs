//! Norms, eigenvalue bounds, joint spectral radius brackets and minimal-norm
//! estimates for finite sets of complex matrices.
//!
//! Limits and infima are never reported as values, only as brackets
//! `[lower, upper]` with a description of what realizes each side.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::freeword::GroupElement;

pub type CMatrix = DMatrix<Complex64>;

/// Default product-set size cap.
pub const DEFAULT_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix set is empty")]
    Empty,
    #[error("matrix {index} has shape {rows}x{cols}, expected {d}x{d}")]
    Shape {
        index: usize,
        rows: usize,
        cols: usize,
        d: usize,
    },
    #[error("matrix {0} has a non-finite entry")]
    NonFinite(usize),
    #[error("product set of size {needed} exceeds cap {cap}")]
    CapExceeded { needed: u128, cap: usize },
    #[error("matrix {index} has determinant {det} (expected 1)")]
    NonUnimodular { index: usize, det: f64 },
    #[error("exponent must be at least 1")]
    ZeroExponent,
}

impl GroupElement for CMatrix {
    fn identity_like(&self) -> Self {
        CMatrix::identity(self.nrows(), self.ncols())
    }

    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn try_inverse(&self) -> Option<Self> {
        self.clone().try_inverse()
    }
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Row-major constructor from real entries.
pub fn from_real(d: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(d, d, entries.iter().map(|&x| Complex64::new(x, 0.0)))
}

/// Largest singular value.
pub fn opnorm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    if a.nrows() == 1 {
        return a[(0, 0)].norm();
    }
    a.singular_values().max()
}

/// Eigenvalues from a complex Schur form with the relative backward error
/// `|A - Q T Q*|_F / |A|_F` of the decomposition.
pub fn eigenvalues_checked(a: &CMatrix) -> (Vec<Complex64>, f64) {
    let d = a.nrows();
    if d == 1 {
        return (vec![a[(0, 0)]], 0.0);
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .unwrap_or_else(|| a.clone().schur());
    let (q, t) = schur.unpack();
    let eig: Vec<Complex64> = (0..d).map(|i| t[(i, i)]).collect();
    let recon = &q * &t * q.adjoint();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let residual = (a - recon).norm() / scale;
    (eig, residual)
}

pub fn eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    eigenvalues_checked(a).0
}

pub fn spectral_radius(a: &CMatrix) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn determinant(a: &CMatrix) -> Complex64 {
    a.determinant()
}

/// A finite set of `d x d` complex matrices.
#[derive(Clone, Debug)]
pub struct MatrixSet {
    d: usize,
    members: Vec<CMatrix>,
    symmetric: bool,
}

impl MatrixSet {
    pub fn new(members: Vec<CMatrix>) -> Result<Self, SpectralError> {
        let d = members.first().ok_or(SpectralError::Empty)?.nrows();
        for (index, m) in members.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(SpectralError::Shape {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    d,
                });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(SpectralError::NonFinite(index));
            }
        }
        let symmetric = is_closed_under_inverse(&members, 1e-9);
        Ok(MatrixSet {
            d,
            members,
            symmetric,
        })
    }

    /// Add the inverse of every invertible member not already present.
    pub fn symmetrized(&self) -> MatrixSet {
        let mut members = self.members.clone();
        for m in &self.members {
            if let Some(inv) = m.clone().try_inverse() {
                if !members.iter().any(|x| (x - &inv).norm() <= 1e-9 * (1.0 + inv.norm())) {
                    members.push(inv);
                }
            }
        }
        MatrixSet::new(members).expect("same shapes")
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn members(&self) -> &[CMatrix] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `max ||A||` over members.
    pub fn norm(&self) -> f64 {
        self.members.iter().map(opnorm).fold(0.0, f64::max)
    }

    /// `P F P^-1`.
    pub fn conjugated(&self, p: &CMatrix, p_inv: &CMatrix) -> MatrixSet {
        MatrixSet {
            d: self.d,
            members: self.members.iter().map(|m| p * m * p_inv).collect(),
            symmetric: self.symmetric,
        }
    }
}

fn is_closed_under_inverse(members: &[CMatrix], tol: f64) -> bool {
    members.iter().all(|m| match m.clone().try_inverse() {
        Some(inv) => members
            .iter()
            .any(|x| (x - &inv).norm() <= tol * (1.0 + inv.norm())),
        None => false,
    })
}

/// Largest eigenvalue modulus over the members.
pub fn lambda_max(f: &MatrixSet) -> f64 {
    f.members.iter().map(spectral_radius).fold(0.0, f64::max)
}

/// Largest eigenvalue modulus together with the worst Schur residual.
pub fn lambda_max_checked(f: &MatrixSet) -> (f64, f64) {
    f.members.iter().fold((0.0, 0.0), |(lam, res), m| {
        let (eig, r) = eigenvalues_checked(m);
        let l = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (lam.max(l), res.max(r))
    })
}

fn check_cap(base: usize, n: usize, cap: usize) -> Result<(), SpectralError> {
    let needed = (base as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > cap as u128 {
        return Err(SpectralError::CapExceeded { needed, cap });
    }
    Ok(())
}

/// All length-`n` products `A_{i_1} ... A_{i_n}` in lexicographic index
/// order. Floating-point products are not deduplicated.
pub fn product_set(f: &MatrixSet, n: usize, cap: usize) -> Result<MatrixSet, SpectralError> {
    if n == 0 {
        return Err(SpectralError::ZeroExponent);
    }
    check_cap(f.len(), n, cap)?;
    let mut current = f.members.clone();
    for _ in 1..n {
        current = extend_products(&current, &f.members);
    }
    Ok(MatrixSet {
        d: f.d,
        members: current,
        symmetric: f.symmetric,
    })
}

fn extend_products(prefixes: &[CMatrix], letters: &[CMatrix]) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(prefixes.len() * letters.len());
    for p in prefixes {
        for a in letters {
            out.push(p * a);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SpectralEstimate {
    pub lower: f64,
    pub upper: f64,
    pub lower_witness: String,
    pub upper_witness: String,
}

/// Per-depth data of a spectral radius bracket.
#[derive(Clone, Debug, Serialize)]
pub struct BracketRow {
    pub n: usize,
    pub products: usize,
    /// `Lambda(F^n)^(1/n)`
    pub lambda_root: f64,
    /// `||F^n||^(1/n)`
    pub norm_root: f64,
}

/// `lower = max_q Lambda(F^q)^(1/q)`, `upper = min_n ||F^n||^(1/n)` over
/// `q, n <= n_max`.
pub fn spectral_radius_bracket(f: &MatrixSet, n_max: usize, cap: usize) -> Result<SpectralEstimate, SpectralError> {
    Ok(spectral_radius_table(f, n_max, cap)?.0)
}

pub fn spectral_radius_table(
    f: &MatrixSet,
    n_max: usize,
    cap: usize,
) -> Result<(SpectralEstimate, Vec<BracketRow>), SpectralError> {
    if n_max == 0 {
        return Err(SpectralError::ZeroExponent);
    }
    check_cap(f.len(), n_max, cap)?;
    let mut rows = Vec::with_capacity(n_max);
    let mut current = f.members.clone();
    let mut est = SpectralEstimate {
        lower: 0.0,
        upper: f64::INFINITY,
        lower_witness: String::new(),
        upper_witness: String::new(),
    };
    for n in 1..=n_max {
        if n > 1 {
            current = extend_products(&current, &f.members);
        }
        let inv = 1.0 / n as f64;
        let lam = current.iter().map(spectral_radius).fold(0.0, f64::max);
        let nrm = current.iter().map(opnorm).fold(0.0, f64::max);
        let lr = lam.powf(inv);
        let nr = nrm.powf(inv);
        if lr > est.lower || n == 1 {
            est.lower = lr;
            est.lower_witness = format!("Lambda(F^{n})^(1/{n})");
        }
        if nr < est.upper {
            est.upper = nr;
            est.upper_witness = format!("||F^{n}||^(1/{n})");
        }
        rows.push(BracketRow {
            n,
            products: current.len(),
            lambda_root: lr,
            norm_root: nr,
        });
    }
    Ok((est, rows))
}

/// Options for [`minimal_norm_estimate`].
#[derive(Clone, Debug)]
pub struct MinNormOptions {
    /// Total objective evaluations.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Depth of the spectral radius bracket providing the lower side.
    pub bracket_depth: usize,
    pub cap: usize,
}

impl Default for MinNormOptions {
    fn default() -> Self {
        MinNormOptions {
            budget: 4000,
            restarts: 3,
            seed: 0,
            bracket_depth: 2,
            cap: 1 << 12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MinNormEstimate {
    pub estimate: SpectralEstimate,
    /// The positive-definite conjugator realizing the upper side, row-major
    /// `[re, im]` pairs.
    pub conjugator: Vec<[f64; 2]>,
    pub evaluations: usize,
}

/// Hermitian matrix from `d^2` real parameters: diagonal, then real and
/// imaginary parts of the strict upper triangle.
fn hermitian_from(params: &[f64], d: usize) -> CMatrix {
    let mut h = CMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        h[(i, i)] = Complex64::new(params[k], 0.0);
        k += 1;
    }
    for i in 0..d {
        for j in i + 1..d {
            let z = Complex64::new(params[k], params[k + 1]);
            k += 2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// `exp(S)` and `exp(-S)` for Hermitian `S`.
fn exp_pair(s: &CMatrix) -> (CMatrix, CMatrix) {
    let eig = s.clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let d = s.nrows();
    let mut pos = CMatrix::zeros(d, d);
    let mut neg = CMatrix::zeros(d, d);
    for i in 0..d {
        let l = eig.eigenvalues[i];
        pos[(i, i)] = Complex64::new(l.exp(), 0.0);
        neg[(i, i)] = Complex64::new((-l).exp(), 0.0);
    }
    (u * pos * u.adjoint(), u * neg * u.adjoint())
}

fn conj_norm(f: &MatrixSet, params: &[f64]) -> f64 {
    let s = hermitian_from(params, f.d);
    let (p, pi) = exp_pair(&s);
    f.members
        .iter()
        .map(|m| opnorm(&(&p * m * &pi)))
        .fold(0.0, f64::max)
}

/// Bracket for `E(F) = inf_P ||P F P^-1||`. The upper side is the best value
/// found by coordinate descent over `P = exp(S)`, `S` Hermitian, with random
/// restarts; the lower side is the spectral radius lower bracket, since
/// `Lambda <= R <= E`. Exhausting the budget returns the best value so far.
pub fn minimal_norm_estimate(f: &MatrixSet, opts: &MinNormOptions) -> Result<MinNormEstimate, SpectralError> {
    let d = f.d;
    let lower = spectral_radius_bracket(f, opts.bracket_depth.max(1), opts.cap)
        .or_else(|_| spectral_radius_bracket(f, 1, opts.cap))?;
    let dim = d * d;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_params = vec![0.0; dim];
    let mut best = conj_norm(f, &best_params);
    let mut evals = 1;
    let per_start = opts.budget / (opts.restarts + 1).max(1);
    for start in 0..=opts.restarts {
        if evals >= opts.budget {
            break;
        }
        let mut x: Vec<f64> = if start == 0 {
            vec![0.0; dim]
        } else {
            (0..dim)
                .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let mut fx = conj_norm(f, &x);
        evals += 1;
        let mut steps = vec![0.5; dim];
        let stop = (evals + per_start).min(opts.budget);
        while evals < stop {
            let mut improved = false;
            for i in 0..dim {
                if evals >= stop {
                    break;
                }
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += dir * steps[i];
                    let fy = conj_norm(f, &y);
                    evals += 1;
                    if fy < fx {
                        x = y;
                        fx = fy;
                        steps[i] *= 2.0;
                        improved = true;
                        break;
                    }
                }
                if !improved {
                    steps[i] *= 0.5;
                }
            }
            if steps.iter().all(|&s| s < 1e-10) {
                break;
            }
        }
        if fx < best {
            best = fx;
            best_params = x;
        }
    }
    let (p, _) = exp_pair(&hermitian_from(&best_params, d));
    let conjugator = p.transpose().iter().map(|z| [z.re, z.im]).collect();
    Ok(MinNormEstimate {
        estimate: SpectralEstimate {
            lower: lower.lower,
            upper: best,
            lower_witness: lower.lower_witness,
            upper_witness: "||P F P^-1|| at the reported conjugator".to_string(),
        },
        conjugator,
        evaluations: evals,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    /// The inequality holds for every value inside the brackets.
    CertifiedHolds,
    /// The brackets neither confirm nor refute the inequality.
    Consistent,
    /// The inequality fails for every value inside the brackets.
    CertifiedViolation,
}

#[derive(Clone, Debug, Serialize)]
pub struct BochiReport {
    pub c: f64,
    pub q_found: Option<usize>,
    /// `Lambda(F^q)^(1/q) - c * E_upper` at `q_found` (or the best q).
    pub margin: f64,
    pub status: CheckStatus,
    pub e_bracket: SpectralEstimate,
}

/// Looks for `q <= q_max` with `Lambda(F^q)^(1/q) >= c E(F)`.
pub fn bochi_check(
    f: &MatrixSet,
    q_max: usize,
    c: f64,
    opts: &MinNormOptions,
) -> Result<BochiReport, SpectralError> {
    let e = minimal_norm_estimate(f, opts)?.estimate;
    let mut current = f.members.clone();
    let mut best: Option<(usize, f64)> = None;
    let mut weak: Option<usize> = None;
    for q in 1..=q_max.max(1) {
        if q > 1 {
            if (current.len() as u128) * (f.len() as u128) > opts.cap.max(DEFAULT_CAP) as u128 {
                break;
            }
            current = extend_products(&current, &f.members);
        }
        let lam = current.iter().map(spectral_radius).fold(0.0, f64::max);
        let lhs = lam.powf(1.0 / q as f64);
        let margin = lhs - c * e.upper;
        if best.is_none_or(|(_, m)| margin > m) {
            best = Some((q, margin));
        }
        if margin >= 0.0 {
            return Ok(BochiReport {
                c,
                q_found: Some(q),
                margin,
                status: CheckStatus::CertifiedHolds,
                e_bracket: e,
            });
        }
        if weak.is_none() && lhs >= c * e.lower {
            weak = Some(q);
        }
    }
    let (q, margin) = best.unwrap();
    let status = if weak.is_some() {
        CheckStatus::Consistent
    } else {
        CheckStatus::CertifiedViolation
    };
    Ok(BochiReport {
        c,
        q_found: weak.or(Some(q)).filter(|_| weak.is_some()),
        margin,
        status,
        e_bracket: e,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub m: usize,
    pub exponent: f64,
    pub e_power: SpectralEstimate,
    pub e_base: SpectralEstimate,
    /// `E_lower(F^M) - E_upper(F)^exponent`
    pub margin: f64,
    pub status: CheckStatus,
}

/// Compares `E(F^M)` with `E(F)^sqrt(M / 4d)` for a unimodular set.
pub fn growth_check(f: &MatrixSet, m: usize, opts: &MinNormOptions) -> Result<GrowthReport, SpectralError> {
    if m == 0 {
        return Err(SpectralError::ZeroExponent);
    }
    for (index, a) in f.members.iter().enumerate() {
        let det = determinant(a);
        if (det - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(SpectralError::NonUnimodular {
                index,
                det: det.norm(),
            });
        }
    }
    let exponent = (m as f64 / (4.0 * f.d as f64)).sqrt();
    let fm = product_set(f, m, opts.cap.max(DEFAULT_CAP))?;
    let e_power = minimal_norm_estimate(&fm, opts)?.estimate;
    let e_base = minimal_norm_estimate(f, opts)?.estimate;
    let tol = 1e-9;
    let margin = e_power.lower - e_base.upper.powf(exponent);
    let status = if margin >= -tol {
        CheckStatus::CertifiedHolds
    } else if e_power.upper < e_base.lower.powf(exponent) - tol {
        CheckStatus::CertifiedViolation
    } else {
        CheckStatus::Consistent
    };
    Ok(GrowthReport {
        m,
        exponent,
        e_power,
        e_base,
        margin,
        status,
    })
}

/// Certified lower bound on `Lambda(X)` from `t = |Tr(X - I)|`:
/// `t / 2d` when `t > 2d`, `t / d - 1` when `d < t <= 2d`, else 0.
pub fn lambda_from_trace(x: &CMatrix) -> f64 {
    let d = x.nrows() as f64;
    let t = (trace(x) - Complex64::new(d, 0.0)).norm();
    trace_bound(t, d)
}

pub fn trace_bound(t: f64, d: f64) -> f64 {
    if t > 2.0 * d {
        t / (2.0 * d)
    } else if t > d {
        t / d - 1.0
    } else {
        0.0
    }
}

/// Standard complex Gaussian matrix.
pub fn gaussian_matrix(d: usize, rng: &mut impl Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ms: Vec<CMatrix>) -> MatrixSet {
        MatrixSet::new(ms).unwrap()
    }

    fn transvections() -> MatrixSet {
        set(vec![
            from_real(2, &[1.0, 1.0, 0.0, 1.0]),
            from_real(2, &[1.0, -1.0, 0.0, 1.0]),
            from_real(2, &[1.0, 0.0, 1.0, 1.0]),
            from_real(2, &[1.0, 0.0, -1.0, 1.0]),
        ])
    }

    #[test]
    fn opnorm_examples() {
        assert!((opnorm(&identity(3)) - 1.0).abs() < 1e-14);
        assert!((opnorm(&from_real(2, &[3.0, 0.0, 0.0, 0.5])) - 3.0).abs() < 1e-13);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        // singular values squared: eigenvalues (3 +- sqrt 5)/2 of A A^T
        let oracle = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((oracle - golden).abs() < 1e-15);
        let v = opnorm(&from_real(2, &[1.0, 1.0, 0.0, 1.0]));
        assert!((v - golden).abs() / golden < 1e-10);
    }

    #[test]
    fn lambda_examples() {
        assert!((lambda_max(&set(vec![identity(2)])) - 1.0).abs() < 1e-14);
        let c = set(vec![from_real(2, &[3.0, -1.0, 1.0, 0.0])]);
        assert!((lambda_max(&c) - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let u = set(vec![from_real(2, &[1.0, 1.0, 0.0, 1.0])]);
        assert!((lambda_max(&u) - 1.0).abs() < 1e-7);
        let (_, res) = lambda_max_checked(&c);
        assert!(res < 1e-12);
    }

    #[test]
    fn product_set_examples() {
        let id = set(vec![identity(2)]);
        assert_eq!(product_set(&id, 5, 100).unwrap().len(), 1);
        assert_eq!(product_set(&transvections(), 3, 1000).unwrap().len(), 64);
        assert!(matches!(
            product_set(&transvections(), 6, 1000),
            Err(SpectralError::CapExceeded { needed: 4096, cap: 1000 })
        ));
    }

    #[test]
    fn bracket_examples() {
        let diag = set(vec![from_real(2, &[2.0, 0.0, 0.0, 0.5])]);
        let b = spectral_radius_bracket(&diag, 3, DEFAULT_CAP).unwrap();
        assert!((b.lower - 2.0).abs() < 1e-12 && (b.upper - 2.0).abs() < 1e-12);
        let t = spectral_radius_bracket(&transvections(), 4, DEFAULT_CAP).unwrap();
        assert!(t.lower >= ((3.0 + 5f64.sqrt()) / 2.0).sqrt() - 1e-9);
        assert!(t.lower <= t.upper + 1e-8);
        let nil = set(vec![from_real(2, &[0.0, 1.0, 0.0, 0.0])]);
        let b = spectral_radius_bracket(&nil, 2, DEFAULT_CAP).unwrap();
        assert_eq!(b.upper, 0.0);
        assert_eq!(b.lower, 0.0);
    }

    #[test]
    fn minimal_norm_examples() {
        let opts = MinNormOptions::default();
        let diag = set(vec![from_real(2, &[2.0, 0.0, 0.0, 0.5])]);
        let e = minimal_norm_estimate(&diag, &opts).unwrap().estimate;
        assert!((e.lower - 2.0).abs() < 1e-12);
        assert!(e.upper >= 2.0 - 1e-12 && e.upper <= 2.0 + 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = crate::almostlaw::haar_unitary(3, &mut rng);
        let e = minimal_norm_estimate(&set(vec![u]), &opts).unwrap().estimate;
        assert!(e.upper <= 1.0 + 1e-6 && e.lower >= 1.0 - 1e-9);
        let t = set(vec![from_real(2, &[1.0, 100.0, 0.0, 1.0])]);
        let e = minimal_norm_estimate(&t, &opts).unwrap().estimate;
        assert!(e.upper < 1.01, "{}", e.upper);
    }

    #[test]
    fn bochi_examples() {
        let opts = MinNormOptions::default();
        let diag = set(vec![from_real(2, &[2.0, 0.0, 0.0, 0.5])]);
        let r = bochi_check(&diag, 10, 0.25, &opts).unwrap();
        assert_eq!(r.q_found, Some(1));
        assert_eq!(r.status, CheckStatus::CertifiedHolds);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = crate::almostlaw::haar_unitary(2, &mut rng);
        let b = crate::almostlaw::haar_unitary(2, &mut rng);
        let r = bochi_check(&set(vec![a, b]), 10, 0.25, &opts).unwrap();
        assert_eq!(r.q_found, Some(1));
    }

    #[test]
    fn growth_examples() {
        let opts = MinNormOptions::default();
        let r = growth_check(&set(vec![identity(2)]), 4, &opts).unwrap();
        assert_eq!(r.status, CheckStatus::CertifiedHolds);
        let r = growth_check(&transvections(), 4, &opts).unwrap();
        assert_ne!(r.status, CheckStatus::CertifiedViolation);
        let bad = set(vec![from_real(2, &[2.0, 0.0, 0.0, 1.0])]);
        assert!(matches!(
            growth_check(&bad, 2, &opts),
            Err(SpectralError::NonUnimodular { index: 0, .. })
        ));
    }

    #[test]
    fn trace_bound_examples() {
        let x = from_real(2, &[5.0, 0.0, 0.0, 5.0]);
        assert_eq!(lambda_from_trace(&x), 2.0);
        assert_eq!(lambda_from_trace(&identity(3)), 0.0);
    }

    #[test]
    fn symmetric_detection() {
        assert!(transvections().is_symmetric());
        let half = set(vec![from_real(2, &[1.0, 1.0, 0.0, 1.0])]);
        assert!(!half.is_symmetric());
        assert!(half.symmetrized().is_symmetric());
        assert_eq!(half.symmetrized().len(), 2);
    }

    fn arb_matrix(d: usize) -> impl Strategy<Value = CMatrix> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), d * d).prop_map(move |v| {
            CMatrix::from_row_iterator(d, d, v.into_iter().map(|(a, b)| Complex64::new(a, b)))
        })
    }

    fn arb_set() -> impl Strategy<Value = MatrixSet> {
        (2usize..4).prop_flat_map(|d| {
            prop::collection::vec(arb_matrix(d), 1..4).prop_map(|ms| MatrixSet::new(ms).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bracket_chain(f in arb_set()) {
            let (b, rows) = spectral_radius_table(&f, 3, DEFAULT_CAP).unwrap();
            let lam = lambda_max(&f);
            prop_assert!(lam <= b.lower + 1e-8);
            prop_assert!(b.lower <= b.upper + 1e-8);
            prop_assert!(b.upper <= f.norm() + 1e-8);
            // submultiplicativity of ||F^n||
            let norms: Vec<f64> = rows.iter().map(|r| r.norm_root.powi(r.n as i32)).collect();
            for m in 0..norms.len() {
                for n in 0..norms.len() {
                    if m + n + 1 < norms.len() {
                        prop_assert!(norms[m + n + 1] <= norms[m] * norms[n] * (1.0 + 1e-9) + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn conjugation_preserves_lambda(f in arb_set(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = f.dimension();
            // well-conditioned P = I + small perturbation
            let p = identity(d) + gaussian_matrix(d, &mut rng) * Complex64::new(0.2, 0.0);
            let pi = p.clone().try_inverse().unwrap();
            let g = f.conjugated(&p, &pi);
            prop_assert!((lambda_max(&g) - lambda_max(&f)).abs() <= 1e-6);
        }

        #[test]
        fn trace_lemma(x in arb_matrix(3), scale in 1.0f64..20.0) {
            let x = x * Complex64::new(scale, 0.0);
            prop_assert!(spectral_radius(&x) >= lambda_from_trace(&x) - 1e-9);
        }
    }
}
