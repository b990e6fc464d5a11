//! Complex roots of the defining polynomial with certified isolating disks.
//!
//! Roots are approximated by Aberth iteration in double precision. Each
//! approximation gets an inclusion radius from Smith's bound
//! `r_i = k |f(z_i)| / prod_{j != i} |z_i - z_j|`, evaluated in exact rational
//! arithmetic with outward rounding. When the disks are pairwise disjoint each
//! contains exactly one root. If they are not, centers are refined by
//! Aberth steps in rational arithmetic at growing binary precision.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::poly::ZPoly;
use super::FieldError;

pub const MAX_PRECISION_BITS: u32 = 4096;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Real,
    /// Upper half-plane member of a conjugate pair; represents the place.
    ComplexUpper,
    ComplexLower,
}

#[derive(Clone, Debug, Serialize)]
pub struct Embedding {
    /// 1-based position in the canonical order.
    pub index: usize,
    pub root: Complex64,
    /// Every point within `radius` of `root`, and only one root of `f`,
    /// lies in the certified disk.
    pub radius: f64,
    pub kind: EmbeddingKind,
    /// Index (1-based) of the complex conjugate embedding.
    pub conjugate: usize,
}

impl Embedding {
    /// Local degree of the place this embedding represents, and 0 for the
    /// lower member of a complex pair, so that summing over all embeddings
    /// counts each place once.
    pub fn n_v(&self) -> u32 {
        match self.kind {
            EmbeddingKind::Real => 1,
            EmbeddingKind::ComplexUpper => 2,
            EmbeddingKind::ComplexLower => 0,
        }
    }

    pub fn is_real(&self) -> bool {
        self.kind == EmbeddingKind::Real
    }

    pub fn represents_place(&self) -> bool {
        self.kind != EmbeddingKind::ComplexLower
    }
}

type CQ = (BigRational, BigRational);

fn cq_from(z: Complex64) -> CQ {
    (
        BigRational::from_float(z.re).unwrap(),
        BigRational::from_float(z.im).unwrap(),
    )
}

fn cq_to_c64(z: &CQ) -> Complex64 {
    Complex64::new(z.0.to_f64().unwrap(), z.1.to_f64().unwrap())
}

fn cq_mul(a: &CQ, b: &CQ) -> CQ {
    (&a.0 * &b.0 - &a.1 * &b.1, &a.0 * &b.1 + &a.1 * &b.0)
}

fn cq_abs2(a: &CQ) -> BigRational {
    &a.0 * &a.0 + &a.1 * &a.1
}

fn cq_eval(f: &ZPoly, z: &CQ) -> CQ {
    let mut acc: CQ = (BigRational::zero(), BigRational::zero());
    for c in f.coeffs().iter().rev() {
        acc = cq_mul(&acc, z);
        acc.0 += BigRational::from_integer(c.clone());
    }
    acc
}

fn cq_div(a: &CQ, b: &CQ) -> CQ {
    let d = cq_abs2(b);
    let conj = (b.0.clone(), -&b.1);
    let n = cq_mul(a, &conj);
    (n.0 / &d, n.1 / d)
}

fn c64_eval(f: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::zero();
    let mut dp = Complex64::zero();
    for &c in f.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Round to `bits` significant bits.
fn round_bits(q: &BigRational, bits: u32) -> BigRational {
    if q.is_zero() {
        return q.clone();
    }
    let num_bits = q.numer().bits() as i64;
    let den_bits = q.denom().bits() as i64;
    let shift = bits as i64 - (num_bits - den_bits);
    let scaled = if shift >= 0 {
        q * BigRational::from_integer(BigInt::one() << shift as u64)
    } else {
        q / BigRational::from_integer(BigInt::one() << (-shift) as u64)
    };
    let r = scaled.round();
    if shift >= 0 {
        r / BigRational::from_integer(BigInt::one() << shift as u64)
    } else {
        r * BigRational::from_integer(BigInt::one() << (-shift) as u64)
    }
}

fn f64_of(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::INFINITY)
}

/// Upper bound for `sqrt(q)` as an f64.
fn sqrt_up(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let mut s = f64_of(q).sqrt().max(f64::MIN_POSITIVE);
    loop {
        if !s.is_finite() {
            return f64::INFINITY;
        }
        let sq = BigRational::from_float(s).unwrap();
        if &(&sq * &sq) >= q {
            return s;
        }
        s = (s * (1.0 + 1e-15)).next_up();
    }
}

/// Lower bound for `sqrt(q)` as an f64.
fn sqrt_down(q: &BigRational) -> f64 {
    let mut s = f64_of(q).sqrt();
    if !s.is_finite() {
        s = f64::MAX;
    }
    loop {
        if s <= 0.0 {
            return 0.0;
        }
        let sq = BigRational::from_float(s).unwrap();
        if &(&sq * &sq) <= q {
            return s;
        }
        s = (s * (1.0 - 1e-15)).next_down();
    }
}

fn aberth(f: &ZPoly) -> Vec<Complex64> {
    let k = f.degree().unwrap();
    let c: Vec<f64> = f.coeffs().iter().map(|a| a.to_f64().unwrap()).collect();
    // Fujiwara bound on root moduli
    let radius = (0..k)
        .map(|i| c[i].abs().powf(1.0 / (k - i) as f64))
        .fold(0.0f64, f64::max)
        * 2.0
        + 1e-3;
    let mut z: Vec<Complex64> = (0..k)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / k as f64 + 0.4;
            Complex64::from_polar(radius * 0.5 + 0.1, t)
        })
        .collect();
    for _ in 0..2000 {
        let mut max_step = 0.0f64;
        for i in 0..k {
            let (p, dp) = c64_eval(&c, z[i]);
            if p == Complex64::zero() {
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| Complex64::one() / (z[i] - z[j]))
                .sum();
            let step = ratio / (Complex64::one() - ratio * s);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step < 1e-17 {
            break;
        }
    }
    z
}

/// Conjugate-symmetric centers: near-real roots get a zero imaginary part
/// and each upper root is paired with the nearest lower one.
fn symmetrize(z: &[Complex64]) -> Option<Vec<Complex64>> {
    let k = z.len();
    let scale = z.iter().map(|w| w.norm()).fold(1.0f64, f64::max);
    let tol = 1e-8 * scale;
    let mut out = vec![Complex64::zero(); k];
    let mut used = vec![false; k];
    for i in 0..k {
        if z[i].im.abs() <= tol {
            out[i] = Complex64::new(z[i].re, 0.0);
            used[i] = true;
        }
    }
    for i in 0..k {
        if used[i] || z[i].im < 0.0 {
            continue;
        }
        let target = z[i].conj();
        let j = (0..k)
            .filter(|&j| !used[j] && z[j].im < 0.0)
            .min_by(|&a, &b| (z[a] - target).norm().total_cmp(&(z[b] - target).norm()))?;
        used[i] = true;
        used[j] = true;
        let upper = Complex64::new((z[i].re + z[j].re) / 2.0, (z[i].im - z[j].im) / 2.0);
        out[i] = upper;
        out[j] = upper.conj();
    }
    used.iter().all(|&u| u).then_some(out)
}

struct Certified {
    radii: Vec<f64>,
}

fn certify(f: &ZPoly, centers: &[CQ]) -> Option<Certified> {
    let k = centers.len();
    let kf = k as f64;
    let mut dists = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = (&centers[i].0 - &centers[j].0, &centers[i].1 - &centers[j].1);
            let lo = sqrt_down(&cq_abs2(&d));
            if lo == 0.0 {
                return None;
            }
            dists[i][j] = lo;
            dists[j][i] = lo;
        }
    }
    let mut radii = Vec::with_capacity(k);
    for i in 0..k {
        let val_up = sqrt_up(&cq_abs2(&cq_eval(f, &centers[i])));
        let mut denom = 1.0f64;
        for (j, &d) in dists[i].iter().enumerate() {
            if j != i {
                denom = (denom * d).next_down();
            }
        }
        if denom <= 0.0 {
            return None;
        }
        radii.push(((kf * val_up).next_up() / denom).next_up());
    }
    for i in 0..k {
        for j in i + 1..k {
            if !((radii[i] + radii[j]).next_up() < dists[i][j]) {
                return None;
            }
        }
    }
    Some(Certified { radii })
}

/// Simultaneous Aberth steps in rational arithmetic, rounded to `bits`
/// significant bits, until the largest correction is below `2^-bits`
/// relative to the root scale.
fn aberth_refine(f: &ZPoly, centers: &[CQ], bits: u32) -> Vec<CQ> {
    let df = f.derivative();
    let k = centers.len();
    let mut z = centers.to_vec();
    let scale = z
        .iter()
        .map(|w| f64_of(&cq_abs2(w)).sqrt())
        .fold(1.0f64, f64::max);
    let tol = BigRational::from_float(scale).unwrap()
        * BigRational::new(BigInt::one(), BigInt::one() << bits);
    let tol2 = &tol * &tol;
    let one: CQ = (BigRational::one(), BigRational::zero());
    for _ in 0..(4 * bits as usize + 64) {
        let mut max_done = true;
        let mut next = z.clone();
        for i in 0..k {
            let fz = cq_eval(f, &z[i]);
            if cq_abs2(&fz).is_zero() {
                continue;
            }
            let dz = cq_eval(&df, &z[i]);
            if cq_abs2(&dz).is_zero() {
                continue;
            }
            let ratio = cq_div(&fz, &dz);
            let mut s: CQ = (BigRational::zero(), BigRational::zero());
            for j in (0..k).filter(|&j| j != i) {
                let d = (&z[i].0 - &z[j].0, &z[i].1 - &z[j].1);
                if cq_abs2(&d).is_zero() {
                    continue;
                }
                let inv = cq_div(&one, &d);
                s = (&s.0 + &inv.0, &s.1 + &inv.1);
            }
            let rs = cq_mul(&ratio, &s);
            let denom = (BigRational::one() - &rs.0, -&rs.1);
            let step = if cq_abs2(&denom).is_zero() {
                ratio
            } else {
                cq_div(&ratio, &denom)
            };
            if cq_abs2(&step) > tol2 {
                max_done = false;
            }
            next[i] = (
                round_bits(&(&z[i].0 - &step.0), bits + 8),
                round_bits(&(&z[i].1 - &step.1), bits + 8),
            );
        }
        z = next;
        if max_done {
            break;
        }
    }
    z
}

fn arg_key(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

/// Certified embeddings of `Q[x]/(f)` for monic squarefree `f`.
pub fn compute(f: &ZPoly, precision_bits: u32) -> Result<Vec<Embedding>, FieldError> {
    if precision_bits < 53 {
        return Err(FieldError::PrecisionTooLow(precision_bits));
    }
    let k = f.degree().unwrap_or(0);
    if k == 0 {
        return Err(FieldError::ConstantPolynomial);
    }
    if k == 1 {
        let root = -BigRational::from_integer(f.coeff(0));
        let r = root.to_f64().unwrap();
        let err = (BigRational::from_float(r).unwrap() - &root).abs();
        return Ok(vec![Embedding {
            index: 1,
            root: Complex64::new(r, 0.0),
            radius: f64_of(&err).next_up(),
            kind: EmbeddingKind::Real,
            conjugate: 1,
        }]);
    }
    let approx = aberth(f);
    let sym = symmetrize(&approx).ok_or(FieldError::RootSeparation(precision_bits))?;
    let mut centers: Vec<CQ> = sym.iter().map(|&z| cq_from(z)).collect();
    let mut bits = 53;
    let mut cert = if precision_bits <= 53 {
        certify(f, &centers)
    } else {
        None
    };
    while cert.is_none() {
        bits = if bits == 53 {
            precision_bits.max(106)
        } else {
            bits * 2
        };
        if bits > MAX_PRECISION_BITS {
            return Err(FieldError::RootSeparation(MAX_PRECISION_BITS));
        }
        centers = aberth_refine(f, &centers, bits);
        // restore exact conjugate symmetry after refinement
        for i in 0..k {
            if sym[i].im == 0.0 {
                centers[i].1 = BigRational::zero();
            }
        }
        for i in 0..k {
            if sym[i].im > 0.0 {
                if let Some(j) = (0..k).find(|&j| sym[j] == sym[i].conj()) {
                    centers[j] = (centers[i].0.clone(), -&centers[i].1);
                }
            }
        }
        cert = certify(f, &centers);
    }
    let radii = cert.unwrap().radii;

    let mut items: Vec<(Complex64, f64, EmbeddingKind)> = Vec::with_capacity(k);
    for i in 0..k {
        let root = cq_to_c64(&centers[i]);
        let drift = {
            let d = (
                BigRational::from_float(root.re).unwrap() - &centers[i].0,
                BigRational::from_float(root.im).unwrap() - &centers[i].1,
            );
            sqrt_up(&cq_abs2(&d))
        };
        let radius = (radii[i] + drift).next_up();
        let kind = if centers[i].1.is_zero() {
            EmbeddingKind::Real
        } else {
            // the disk must avoid the real axis to certify a non-real root
            if !(sqrt_down(&(&centers[i].1 * &centers[i].1)) > radii[i]) {
                return Err(FieldError::RootSeparation(bits));
            }
            if centers[i].1.is_positive() {
                EmbeddingKind::ComplexUpper
            } else {
                EmbeddingKind::ComplexLower
            }
        };
        items.push((root, radius, kind));
    }
    items.sort_by(|a, b| {
        let ra = a.2 == EmbeddingKind::Real;
        let rb = b.2 == EmbeddingKind::Real;
        rb.cmp(&ra).then_with(|| {
            if ra {
                a.0.re.total_cmp(&b.0.re)
            } else {
                arg_key(a.0).total_cmp(&arg_key(b.0))
            }
        })
    });
    let mut out: Vec<Embedding> = items
        .iter()
        .enumerate()
        .map(|(i, &(root, radius, kind))| Embedding {
            index: i + 1,
            root,
            radius,
            kind,
            conjugate: i + 1,
        })
        .collect();
    for i in 0..k {
        if out[i].kind != EmbeddingKind::Real {
            let target = out[i].root.conj();
            let j = (0..k)
                .filter(|&j| out[j].kind != EmbeddingKind::Real && j != i)
                .min_by(|&a, &b| {
                    (out[a].root - target)
                        .norm()
                        .total_cmp(&(out[b].root - target).norm())
                })
                .unwrap();
            out[i].conjugate = j + 1;
        }
    }
    Ok(out)
}

/// Value of a rational-coefficient polynomial at an embedding, with an
/// error bound covering both the root radius and floating-point rounding.
pub fn eval_with_error(c: &[f64], e: &Embedding) -> (Complex64, f64) {
    let z = e.root;
    let (v, _) = c64_eval(c, z);
    let rz = z.norm() + e.radius;
    let mut deriv_bound = 0.0;
    let mut mag = 0.0;
    for (j, &a) in c.iter().enumerate() {
        if j >= 1 {
            deriv_bound += j as f64 * a.abs() * rz.powi(j as i32 - 1);
        }
        mag += a.abs() * z.norm().powi(j as i32);
    }
    let rounding = 4.0 * (c.len() as f64 + 1.0) * f64::EPSILON * mag;
    (v, e.radius * deriv_bound + rounding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(c: &[i64]) -> ZPoly {
        ZPoly::from_ints(c)
    }

    #[test]
    fn sqrt_two() {
        let e = compute(&z(&[-2, 0, 1]), 53).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|x| x.is_real() && x.n_v() == 1));
        assert!((e[0].root.re + 2f64.sqrt()).abs() < 1e-14);
        assert!((e[1].root.re - 2f64.sqrt()).abs() < 1e-14);
        assert!(e[0].radius < 1e-12);
    }

    #[test]
    fn gaussian() {
        let e = compute(&z(&[1, 0, 1]), 53).unwrap();
        assert_eq!(e[0].kind, EmbeddingKind::ComplexUpper);
        assert_eq!(e[1].kind, EmbeddingKind::ComplexLower);
        assert!((e[0].root - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert_eq!(e[0].conjugate, 2);
        assert_eq!(e.iter().map(|x| x.n_v()).sum::<u32>(), 2);
    }

    #[test]
    fn cube_root_two() {
        let e = compute(&z(&[-2, 0, 0, 1]), 53).unwrap();
        assert!(e[0].is_real());
        assert!((e[0].root.re - 2f64.cbrt()).abs() < 1e-14);
        assert!((e[0].root.re - 1.259921).abs() < 1e-6);
        assert_eq!(e[1].kind, EmbeddingKind::ComplexUpper);
        assert_eq!(e[2].kind, EmbeddingKind::ComplexLower);
        assert_eq!(e.iter().map(|x| x.n_v()).sum::<u32>(), 3);
    }

    #[test]
    fn cyclotomic_five_order_by_argument() {
        let e = compute(&z(&[1, 1, 1, 1, 1]), 53).unwrap();
        let args: Vec<f64> = e.iter().map(|x| arg_key(x.root)).collect();
        assert!(args.windows(2).all(|w| w[0] < w[1]));
        for (j, x) in e.iter().enumerate() {
            let t = std::f64::consts::TAU * (j + 1) as f64 / 5.0;
            assert!((x.root - Complex64::from_polar(1.0, t)).norm() < 1e-13);
        }
    }

    #[test]
    fn close_roots_are_contained_and_refinable() {
        // roots 10^12 - 1 and 10^12 + 1, badly conditioned in double precision
        let f = ZPoly::new(vec![
            BigInt::from(10).pow(24) - 1,
            -BigInt::from(2) * BigInt::from(10).pow(12),
            BigInt::one(),
        ]);
        let coarse = compute(&f, 53).unwrap();
        assert!((coarse[0].root.re - (1e12 - 1.0)).abs() <= coarse[0].radius);
        assert!((coarse[1].root.re - (1e12 + 1.0)).abs() <= coarse[1].radius);
        let fine = compute(&f, 128).unwrap();
        assert!(fine.iter().all(|e| e.radius < 1e-3));
        assert!((fine[0].root.re - (1e12 - 1.0)).abs() < 1e-3);
    }

    #[test]
    fn higher_precision_shrinks_radius() {
        let e = compute(&z(&[-3, 0, 0, 1]), 200).unwrap();
        // the stored radius includes the f64 rounding of the center
        assert!(e.iter().all(|x| x.radius < 1e-14));
    }
}
