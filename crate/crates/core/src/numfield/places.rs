//! Non-archimedean places and normalized absolute values.
//!
//! Above a prime `p` with `f = prod g_i^{e_i} (mod p)` and `Z[a]` maximal at
//! `p` (Dedekind criterion), the places correspond to the `g_i`, with
//! ramification `e_i` and residue degree `deg g_i`. The local factor `F_i` of
//! `f` over `Z_p` is the Hensel lift of `g_i^{e_i}`. For `x = b(a) / D` the
//! local norm of `b(a)` is `Res(F_i, b)`, so
//! `w_v(x) = v_p(Res(F_i, b)) / (e_i f_i) - v_p(D)`, normalized so that
//! `w_v(p) = 1` and `|x|_v = p^{-w_v(x)}`. The resultant is known modulo
//! `p^N` when `F_i` is; `N` doubles until the valuation is below `N`.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::embeddings::Embedding;
use super::factor::multifactor_lift;
use super::field::{FieldElement, NumberField};
use super::modp::{self, FpPoly};
use super::poly::{resultant, ZPoly};
use super::rational::{format_rational, vp_int, vp_rational};
use super::{factor_integer, small_prime, FieldError};

/// Cap on p-adic working precision, in digits.
pub const MAX_PADIC_DIGITS: u32 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NonArchPlace {
    pub p: u64,
    /// Position of the residue factor in the canonical mod-p factorization.
    pub factor_index: usize,
    pub residue_degree: usize,
    pub ramification_index: usize,
    #[serde(skip)]
    residue_factor: FpPoly,
}

impl NonArchPlace {
    pub fn n_v(&self) -> usize {
        self.residue_degree * self.ramification_index
    }

    pub fn residue_factor(&self) -> &FpPoly {
        &self.residue_factor
    }

    pub fn label(&self) -> String {
        format!("p={}#{}", self.p, self.factor_index)
    }
}

#[derive(Clone, Debug)]
pub enum Place {
    Arch(Embedding),
    NonArch(NonArchPlace),
}

impl Place {
    pub fn n_v(&self) -> usize {
        match self {
            Place::Arch(e) => e.n_v() as usize,
            Place::NonArch(v) => v.n_v(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Place::Arch(e) => format!("inf#{}", e.index),
            Place::NonArch(v) => v.label(),
        }
    }
}

/// `|x|_v` with an absolute error bound; non-archimedean values are exact
/// through `valuation`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsValue {
    pub value: f64,
    pub error: f64,
    /// `w_v(x)` with `|x|_v = p^{-w_v(x)}`; `None` at archimedean places.
    pub valuation: Option<BigRational>,
}

impl AbsValue {
    pub fn ln(&self) -> f64 {
        self.value.ln()
    }
}

pub(crate) struct PadicData {
    places: Result<Vec<NonArchPlace>, FieldError>,
    lifted: Mutex<Option<(u32, Vec<ZPoly>)>>,
}

fn dedekind(f: &ZPoly, p: u64) -> Result<Vec<(FpPoly, usize)>, FieldError> {
    let fbar = FpPoly::from_zpoly(f, p);
    let fs = modp::factor(&fbar);
    let g = fs.iter().fold(ZPoly::one(), |acc, (gi, _)| acc.mul(&gi.to_zpoly()));
    let h = fs.iter().fold(ZPoly::one(), |acc, (gi, e)| {
        (1..*e).fold(acc, |a, _| a.mul(&gi.to_zpoly()))
    });
    let diff = f.sub(&g.mul(&h));
    let pb = BigInt::from(p);
    let big_f = ZPoly::new(diff.coeffs().iter().map(|c| c / &pb).collect());
    let gbar = FpPoly::from_zpoly(&g, p);
    let hbar = FpPoly::from_zpoly(&h, p);
    let d = FpPoly::from_zpoly(&big_f, p).gcd(&gbar).gcd(&hbar);
    if d.degree().unwrap_or(0) > 0 {
        return Err(FieldError::DedekindCriterionFails(p));
    }
    Ok(fs)
}

fn is_prime(p: u64) -> bool {
    num_prime::nt_funcs::is_prime64(p)
}

impl NumberField {
    fn padic(&self, p: u64) -> Result<Arc<PadicData>, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let mut cache = self.padic_cache().lock().unwrap();
        if let Some(d) = cache.get(&p) {
            return Ok(d.clone());
        }
        let places = dedekind(self.polynomial(), p).map(|fs| {
            fs.into_iter()
                .enumerate()
                .map(|(i, (g, e))| NonArchPlace {
                    p,
                    factor_index: i,
                    residue_degree: g.degree().unwrap(),
                    ramification_index: e,
                    residue_factor: g,
                })
                .collect()
        });
        let data = Arc::new(PadicData {
            places,
            lifted: Mutex::new(None),
        });
        cache.insert(p, data.clone());
        Ok(data)
    }

    /// Places above `p`, in canonical factor order.
    pub fn nonarch_places(&self, p: u64) -> Result<Vec<NonArchPlace>, FieldError> {
        self.padic(p)?.places.clone()
    }

    /// Local factors of `f` over `Z_p` modulo `p^digits`, one per place.
    fn local_factors(&self, p: u64, digits: u32) -> Result<Vec<ZPoly>, FieldError> {
        let data = self.padic(p)?;
        let places = data.places.clone()?;
        let mut lifted = data.lifted.lock().unwrap();
        if let Some((n, fs)) = lifted.as_ref() {
            if *n >= digits {
                let m = BigInt::from(p).pow(digits);
                return Ok(fs.iter().map(|g| g.mod_positive(&m)).collect());
            }
        }
        let powers: Vec<FpPoly> = places
            .iter()
            .map(|v| v.residue_factor.pow(v.ramification_index))
            .collect();
        let fs = multifactor_lift(self.polynomial(), &powers, p, digits);
        *lifted = Some((digits, fs.clone()));
        Ok(fs)
    }

    /// Normalized valuation `w_v(x)`, so that `|x|_v = p^{-w_v(x)}`.
    pub fn valuation(&self, x: &FieldElement, place: &NonArchPlace) -> Result<BigRational, FieldError> {
        if x.is_zero() {
            return Err(FieldError::ZeroElement);
        }
        if x.field() != self {
            return Err(FieldError::FieldMismatch);
        }
        let p = place.p;
        let (b, d) = x.integral_form();
        let vd = vp_int(&d, p) as i64;
        let ef = place.n_v() as i64;
        let places = self.nonarch_places(p)?;
        if places.len() == 1 {
            let r = resultant(self.polynomial(), &b);
            let v = vp_int(&r, p) as i64;
            return Ok(BigRational::new(v.into(), ef.into()) - BigRational::from_integer(vd.into()));
        }
        let mut digits = 16u32;
        loop {
            let fs = self.local_factors(p, digits)?;
            let m = BigInt::from(p).pow(digits);
            let r = resultant(&fs[place.factor_index], &b) % &m;
            if !r.is_zero() {
                let v = vp_int(&r, p);
                if v < digits as u64 {
                    return Ok(BigRational::new((v as i64).into(), ef.into())
                        - BigRational::from_integer(vd.into()));
                }
            }
            if digits >= MAX_PADIC_DIGITS {
                return Err(FieldError::PadicPrecisionCap(p));
            }
            digits *= 2;
        }
    }

    pub fn abs_value(&self, x: &FieldElement, place: &Place) -> Result<AbsValue, FieldError> {
        match place {
            Place::Arch(e) => {
                let (z, err) = x.embed(e);
                Ok(AbsValue {
                    value: z.norm(),
                    error: err,
                    valuation: None,
                })
            }
            Place::NonArch(v) => {
                let w = self.valuation(x, v)?;
                let value = (-w.to_f64().unwrap() * (v.p as f64).ln()).exp();
                Ok(AbsValue {
                    value,
                    error: 4.0 * f64::EPSILON * value,
                    valuation: Some(w),
                })
            }
        }
    }

    /// Archimedean places (one embedding per real place or conjugate pair).
    pub fn arch_places(&self) -> Result<Vec<Place>, FieldError> {
        Ok(self
            .embeddings()?
            .iter()
            .filter(|e| e.represents_place())
            .cloned()
            .map(Place::Arch)
            .collect())
    }

    /// Multiset of valuations of `x` at the places of `Q(x)` above `p`, each
    /// repeated by its local degree, from the Newton polygon of the minimal
    /// polynomial.
    pub fn valuation_multiset(&self, x: &FieldElement, p: u64) -> Result<Vec<BigRational>, FieldError> {
        if x.is_zero() {
            return Err(FieldError::ZeroElement);
        }
        let m = x.minpoly();
        let vals: Vec<Option<BigRational>> = m
            .coeffs()
            .iter()
            .map(|c| {
                (!c.is_zero()).then(|| BigRational::from_integer(vp_rational(c, p).into()))
            })
            .collect();
        Ok(newton_polygon_valuations(&vals))
    }

    /// Primes `p` where some `|x|_v` with `v | p` can differ from 1.
    pub fn support_primes(&self, x: &FieldElement) -> Result<BTreeSet<BigUint>, FieldError> {
        if x.is_zero() {
            return Err(FieldError::ZeroElement);
        }
        let (b, d) = x.integral_form();
        let nb = resultant(self.polynomial(), &b);
        let mut out: BTreeSet<BigUint> = factor_integer(d.magnitude())?.into_keys().collect();
        out.extend(factor_integer(nb.magnitude())?.into_keys());
        Ok(out)
    }

    /// Product formula diagnostics for nonzero `x`.
    pub fn product_formula_check(&self, x: &FieldElement) -> Result<ProductFormulaReport, FieldError> {
        if x.is_zero() {
            return Err(FieldError::ZeroElement);
        }
        let norm = x.norm();
        let num_f = factor_integer(norm.numer().magnitude())?;
        let den_f = factor_integer(norm.denom().magnitude())?;
        let mut product = norm.abs();
        for (p, e) in &num_f {
            product /= BigRational::from_integer(BigInt::from(p.clone()).pow(*e as u32));
        }
        for (p, e) in &den_f {
            product *= BigRational::from_integer(BigInt::from(p.clone()).pow(*e as u32));
        }
        let exact_defect = product - BigRational::one();

        let mut arch_sum = 0.0;
        let mut arch_err = 0.0;
        for place in self.arch_places()? {
            let a = self.abs_value(x, &place)?;
            arch_sum += place.n_v() as f64 * a.value.ln();
            arch_err += place.n_v() as f64 * a.error / a.value;
        }
        let mut nonarch_sum = 0.0;
        let mut primes = Vec::new();
        let mut unsupported = Vec::new();
        for pb in self.support_primes(x)? {
            let p = small_prime(&pb)?;
            let vp_norm = vp_rational(&norm, p);
            match self.nonarch_places(p) {
                Err(FieldError::DedekindCriterionFails(_)) => {
                    unsupported.push(p);
                    continue;
                }
                Err(e) => return Err(e),
                Ok(places) => {
                    let mut s = BigRational::zero();
                    for v in &places {
                        let w = self.valuation(x, v)?;
                        s += &w * BigRational::from_integer(v.n_v().into());
                    }
                    nonarch_sum -= s.to_f64().unwrap() * (p as f64).ln();
                    primes.push(PrimeCheck {
                        p,
                        vp_norm,
                        place_sum: format_rational(&s),
                        consistent: s == BigRational::from_integer(vp_norm.into()),
                    });
                }
            }
        }
        let numeric_defect = unsupported.is_empty().then_some(arch_sum + nonarch_sum);
        Ok(ProductFormulaReport {
            norm: format_rational(&norm),
            exact_defect_is_zero: exact_defect.is_zero(),
            exact_defect: format_rational(&exact_defect),
            numeric_defect,
            numeric_error_bound: arch_err,
            primes,
            unsupported_primes: unsupported,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimeCheck {
    pub p: u64,
    pub vp_norm: i64,
    /// `sum_{v | p} n_v w_v(x)`.
    pub place_sum: String,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductFormulaReport {
    pub norm: String,
    pub exact_defect: String,
    pub exact_defect_is_zero: bool,
    /// `sum_v n_v log|x|_v`, absent when some support prime is unsupported.
    pub numeric_defect: Option<f64>,
    pub numeric_error_bound: f64,
    pub primes: Vec<PrimeCheck>,
    pub unsupported_primes: Vec<u64>,
}

impl ProductFormulaReport {
    pub fn all_consistent(&self) -> bool {
        self.exact_defect_is_zero && self.primes.iter().all(|c| c.consistent)
    }
}

/// Root valuations from the lower Newton polygon of points `(i, vals[i])`,
/// with `None` marking zero coefficients. Roots at zero (infinite
/// valuation) are omitted. Sorted ascending.
pub fn newton_polygon_valuations(vals: &[Option<BigRational>]) -> Vec<BigRational> {
    let pts: Vec<(i64, &BigRational)> = vals
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_ref().map(|v| (i as i64, v)))
        .collect();
    if pts.len() < 2 {
        return Vec::new();
    }
    // lower convex hull, left to right
    let mut hull: Vec<(i64, &BigRational)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // remove middle point if it lies on or above segment from 1 to pt
            let lhs = (y2 - y1) * BigRational::from_integer((pt.0 - x1).into());
            let rhs = (pt.1 - y1) * BigRational::from_integer((x2 - x1).into());
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut out = Vec::new();
    for w in hull.windows(2) {
        let (x1, y1) = w[0];
        let (x2, y2) = w[1];
        let len = x2 - x1;
        let slope = (y2 - y1) / BigRational::from_integer(len.into());
        for _ in 0..len {
            out.push(-slope.clone());
        }
    }
    out.sort();
    out
}
