//! Weil heights of elements and matrices over a number field and brackets
//! for the normalized height of a finite matrix set.
//!
//! Non-archimedean contributions are exact rational multiples of `log p` and
//! are only evaluated at primes dividing an entry denominator; the
//! archimedean part is numeric with an error bound.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::{Arc, OnceLock};

use indexmap::IndexSet;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::freeword::GroupElement;
use crate::numfield::rational::format_rational;
use crate::numfield::{
    factor_integer, newton_polygon_valuations, small_prime, Embedding, FieldElement, FieldError,
    NonArchPlace, NumberField,
};
use crate::spectral::{self, CMatrix, SpectralEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeightError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("matrix has {found} entries, expected {expected}")]
    EntryCount { expected: usize, found: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("entries belong to different fields")]
    FieldMismatch,
    #[error("matrix set is empty")]
    Empty,
    #[error("matrix is singular")]
    Singular,
    #[error("unsupported prime {0}: Dedekind criterion fails")]
    UnsupportedPrime(u64),
    #[error("product set needs {needed} products, exceeding cap {cap}")]
    CapExceeded { needed: usize, cap: usize },
    #[error("powers must start at 1")]
    ZeroPower,
}

fn unsupported(e: FieldError) -> HeightError {
    match e {
        FieldError::DedekindCriterionFails(p) => HeightError::UnsupportedPrime(p),
        e => HeightError::Field(e),
    }
}

/// A `d x d` matrix with entries in a number field.
#[derive(Clone)]
pub struct MatrixOverK {
    field: NumberField,
    d: usize,
    entries: Vec<FieldElement>,
    primes: Arc<OnceLock<Result<BTreeSet<u64>, FieldError>>>,
}

impl PartialEq for MatrixOverK {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.entries == other.entries
    }
}

impl Eq for MatrixOverK {}

impl std::hash::Hash for MatrixOverK {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.d.hash(state);
        for e in &self.entries {
            e.coeffs().hash(state);
        }
    }
}

impl fmt::Debug for MatrixOverK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.d {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.d {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

impl Serialize for MatrixOverK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[FieldElement]> = self.entries.chunks(self.d).collect();
        rows.serialize(s)
    }
}

impl MatrixOverK {
    /// Row-major entries.
    pub fn new(field: &NumberField, d: usize, entries: Vec<FieldElement>) -> Result<Self, HeightError> {
        if entries.len() != d * d || d == 0 {
            return Err(HeightError::EntryCount {
                expected: d * d,
                found: entries.len(),
            });
        }
        if entries.iter().any(|e| e.field() != field) {
            return Err(HeightError::FieldMismatch);
        }
        Ok(Self::build(field.clone(), d, entries))
    }

    fn build(field: NumberField, d: usize, entries: Vec<FieldElement>) -> Self {
        MatrixOverK {
            field,
            d,
            entries,
            primes: Arc::new(OnceLock::new()),
        }
    }

    pub fn from_ints(field: &NumberField, d: usize, entries: &[i64]) -> Result<Self, HeightError> {
        Self::new(field, d, entries.iter().map(|&n| field.from_int(n)).collect())
    }

    pub fn identity(field: &NumberField, d: usize) -> Self {
        let entries = (0..d * d)
            .map(|i| if i / d == i % d { field.one() } else { field.zero() })
            .collect();
        Self::build(field.clone(), d, entries)
    }

    pub fn field(&self) -> &NumberField {
        &self.field
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &FieldElement {
        &self.entries[i * self.d + j]
    }

    pub fn entries(&self) -> &[FieldElement] {
        &self.entries
    }

    fn check(&self, o: &MatrixOverK) -> Result<(), HeightError> {
        if self.d != o.d {
            return Err(HeightError::Dimension(self.d, o.d));
        }
        if self.field != o.field {
            return Err(HeightError::FieldMismatch);
        }
        Ok(())
    }

    pub fn checked_mul(&self, o: &MatrixOverK) -> Result<MatrixOverK, HeightError> {
        self.check(o)?;
        let d = self.d;
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = self.field.zero();
                for l in 0..d {
                    let a = self.get(i, l);
                    let b = o.get(l, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                out.push(acc);
            }
        }
        Ok(Self::build(self.field.clone(), d, out))
    }

    pub fn checked_sub(&self, o: &MatrixOverK) -> Result<MatrixOverK, HeightError> {
        self.check(o)?;
        let entries = self.entries.iter().zip(&o.entries).map(|(a, b)| a - b).collect();
        Ok(Self::build(self.field.clone(), self.d, entries))
    }

    pub fn trace(&self) -> FieldElement {
        (0..self.d).fold(self.field.zero(), |acc, i| &acc + self.get(i, i))
    }

    /// Gaussian elimination returning the determinant and, when requested,
    /// the inverse.
    fn eliminate(&self, want_inverse: bool) -> Result<(FieldElement, Option<MatrixOverK>), HeightError> {
        let d = self.d;
        let mut a: Vec<Vec<FieldElement>> = self.entries.chunks(d).map(|r| r.to_vec()).collect();
        let mut inv: Vec<Vec<FieldElement>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { self.field.one() } else { self.field.zero() })
                    .collect()
            })
            .collect();
        let mut det = self.field.one();
        for col in 0..d {
            let Some(piv) = (col..d).find(|&r| !a[r][col].is_zero()) else {
                return Ok((self.field.zero(), None));
            };
            if piv != col {
                a.swap(piv, col);
                inv.swap(piv, col);
                det = -det;
            }
            det = &det * &a[col][col];
            let pinv = a[col][col].inverse()?;
            for j in 0..d {
                a[col][j] = &a[col][j] * &pinv;
                if want_inverse {
                    inv[col][j] = &inv[col][j] * &pinv;
                }
            }
            for r in 0..d {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let factor = a[r][col].clone();
                for j in 0..d {
                    let t = &factor * &a[col][j];
                    a[r][j] = &a[r][j] - &t;
                    if want_inverse {
                        let t = &factor * &inv[col][j];
                        inv[r][j] = &inv[r][j] - &t;
                    }
                }
            }
        }
        let inverse = want_inverse.then(|| Self::build(self.field.clone(), d, inv.concat()));
        Ok((det, inverse))
    }

    pub fn det(&self) -> FieldElement {
        self.eliminate(false).expect("nonzero pivots are invertible").0
    }

    pub fn inverse(&self) -> Result<MatrixOverK, HeightError> {
        self.eliminate(true)?.1.ok_or(HeightError::Singular)
    }

    /// Monic characteristic polynomial `det(tI - A)`, constant term first.
    pub fn charpoly(&self) -> Vec<FieldElement> {
        let d = self.d;
        let mut c = vec![self.field.zero(); d + 1];
        c[d] = self.field.one();
        let mut m = Self::build(self.field.clone(), d, vec![self.field.zero(); d * d]);
        for k in 1..=d {
            // M_k = A M_{k-1} + c_{d-k+1} I
            let mut next = self.checked_mul(&m).unwrap();
            for i in 0..d {
                let e = &next.entries[i * d + i] + &c[d - k + 1];
                next.entries[i * d + i] = e;
            }
            let t = self.checked_mul(&next).unwrap().trace();
            c[d - k] = -t.scale(&BigRational::new(1.into(), (k as i64).into()));
            m = next;
        }
        c
    }

    /// Primes `p` at which some entry can have `|a_ij|_v > 1`: the primes of
    /// the entry denominators in the power basis.
    pub fn denominator_primes(&self) -> Result<BTreeSet<u64>, HeightError> {
        self.primes
            .get_or_init(|| {
                let mut out = BTreeSet::new();
                for e in &self.entries {
                    if e.is_zero() {
                        continue;
                    }
                    let (_, d) = e.integral_form();
                    for p in factor_integer(d.magnitude())?.keys() {
                        out.insert(small_prime(p)?);
                    }
                }
                Ok(out)
            })
            .clone()
            .map_err(HeightError::Field)
    }

    /// Image under an embedding with a Frobenius-norm error bound.
    pub fn embed(&self, e: &Embedding) -> (CMatrix, f64) {
        let mut err2 = 0.0;
        let vals: Vec<Complex64> = self
            .entries
            .iter()
            .map(|x| {
                let (z, er) = x.embed(e);
                err2 += er * er;
                z
            })
            .collect();
        (CMatrix::from_row_slice(self.d, self.d, &vals), err2.sqrt())
    }

    /// Exact dedup key.
    fn key(&self) -> Vec<BigRational> {
        self.entries.iter().flat_map(|e| e.coeffs().iter().cloned()).collect()
    }
}

impl GroupElement for MatrixOverK {
    fn identity_like(&self) -> Self {
        MatrixOverK::identity(&self.field, self.d)
    }

    fn mul(&self, rhs: &Self) -> Self {
        self.checked_mul(rhs).expect("matrices over the same field and dimension")
    }

    fn try_inverse(&self) -> Option<Self> {
        self.inverse().ok()
    }
}

/// `||A||_v` at one place.
#[derive(Clone, Debug, Serialize)]
pub struct PlaceNorm {
    pub value: f64,
    pub log: f64,
    pub error: f64,
    /// Non-archimedean only: `-min_ij w_v(a_ij)`, so `log ||A||_v` is this
    /// rational times `log p`.
    pub log_p_multiple: Option<String>,
}

fn nonarch_norm_exact(a: &MatrixOverK, v: &NonArchPlace) -> Result<Option<BigRational>, HeightError> {
    let mut min: Option<BigRational> = None;
    for x in a.entries.iter().filter(|x| !x.is_zero()) {
        let w = a.field.valuation(x, v).map_err(unsupported)?;
        if min.as_ref().is_none_or(|m| w < *m) {
            min = Some(w);
        }
    }
    Ok(min.map(|m| -m))
}

/// Archimedean: largest singular value of the embedded matrix.
/// Non-archimedean: max entry absolute value, exact.
pub fn matrix_norm_at_place(a: &MatrixOverK, place: &crate::numfield::Place) -> Result<PlaceNorm, HeightError> {
    use crate::numfield::Place;
    match place {
        Place::Arch(e) => {
            let (m, err) = a.embed(e);
            let value = spectral::opnorm(&m);
            let error = err + 1e-14 * value;
            Ok(PlaceNorm {
                value,
                log: value.ln(),
                error,
                log_p_multiple: None,
            })
        }
        Place::NonArch(v) => {
            let lp = (v.p as f64).ln();
            match nonarch_norm_exact(a, v)? {
                None => Ok(PlaceNorm {
                    value: 0.0,
                    log: f64::NEG_INFINITY,
                    error: 0.0,
                    log_p_multiple: None,
                }),
                Some(m) => {
                    let log = m.to_f64().unwrap() * lp;
                    Ok(PlaceNorm {
                        value: log.exp(),
                        log,
                        error: 4.0 * f64::EPSILON * log.exp(),
                        log_p_multiple: Some(format_rational(&m)),
                    })
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PlaceTerm {
    pub place: String,
    pub n_v: usize,
    pub log_norm: Option<f64>,
    pub log_plus: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogPrimeTerm {
    pub p: u64,
    /// Rational coefficient of `log p`.
    pub coefficient: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightReport {
    pub degree: usize,
    /// `sum_{v | inf} n_v log+ ||A||_v`
    pub archimedean_sum: f64,
    pub archimedean_error: f64,
    /// `sum_{v finite} n_v log+ ||A||_v = sum_p c_p log p`
    pub nonarch_sum: f64,
    pub nonarch_exact: Vec<LogPrimeTerm>,
    pub total: f64,
    pub total_error: f64,
    pub places: Vec<PlaceTerm>,
}

fn log_plus_error(value: f64, error: f64) -> f64 {
    if value + error <= 1.0 {
        0.0
    } else if error >= value {
        f64::INFINITY
    } else {
        (value + error).ln() - (value - error).max(1.0).ln().min(value.ln())
    }
}

/// `h(A) = (1/k) sum_v n_v log+ ||A||_v`, embeddings at `precision_bits`.
pub fn height_matrix(a: &MatrixOverK, precision_bits: u32) -> Result<HeightReport, HeightError> {
    let k = a.field.degree();
    let mut places = Vec::new();
    let mut arch_sum = 0.0;
    let mut arch_err = 0.0;
    for e in a.field.embeddings_with_precision(precision_bits)?.iter() {
        if !e.represents_place() {
            continue;
        }
        let (m, err) = a.embed(e);
        let value = spectral::opnorm(&m);
        let error = err + 1e-14 * value;
        let nv = e.n_v() as usize;
        let lp = value.ln().max(0.0);
        arch_sum += nv as f64 * lp;
        arch_err += nv as f64 * log_plus_error(value, error);
        places.push(PlaceTerm {
            place: format!("inf#{}", e.index),
            n_v: nv,
            log_norm: value.is_finite().then(|| value.ln()).filter(|l| l.is_finite()),
            log_plus: lp,
        });
    }
    let (nonarch_sum, nonarch_exact, terms) = nonarch_height_terms(a)?;
    places.extend(terms);
    let total = (arch_sum + nonarch_sum) / k as f64;
    Ok(HeightReport {
        degree: k,
        archimedean_sum: arch_sum,
        archimedean_error: arch_err,
        nonarch_sum,
        nonarch_exact,
        total,
        total_error: arch_err / k as f64 + 1e-15 * nonarch_sum.abs(),
        places,
    })
}

type NonArchTerms = (f64, Vec<LogPrimeTerm>, Vec<PlaceTerm>);

fn nonarch_height_terms(a: &MatrixOverK) -> Result<NonArchTerms, HeightError> {
    let mut sum = 0.0;
    let mut exact = Vec::new();
    let mut terms = Vec::new();
    for p in a.denominator_primes()? {
        let places = a.field.nonarch_places(p).map_err(unsupported)?;
        let mut coeff = BigRational::zero();
        for v in &places {
            let m = nonarch_norm_exact(a, v)?;
            let lp = (p as f64).ln();
            let plus = m.clone().filter(|m| m.is_positive()).unwrap_or_else(BigRational::zero);
            coeff += &plus * BigRational::from_integer(BigInt::from(v.n_v()));
            terms.push(PlaceTerm {
                place: v.label(),
                n_v: v.n_v(),
                log_norm: m.as_ref().map(|m| m.to_f64().unwrap() * lp),
                log_plus: plus.to_f64().unwrap() * lp,
            });
        }
        sum += coeff.to_f64().unwrap() * (p as f64).ln();
        if !coeff.is_zero() {
            exact.push(LogPrimeTerm {
                p,
                coefficient: format_rational(&coeff),
            });
        }
    }
    Ok((sum, exact, terms))
}

/// Weil height of a nonzero element.
pub fn height_element(x: &FieldElement) -> Result<f64, HeightError> {
    if x.is_zero() {
        return Err(HeightError::Field(FieldError::ZeroElement));
    }
    let m = MatrixOverK::new(x.field(), 1, vec![x.clone()])?;
    Ok(height_matrix(&m, 53)?.total)
}

/// `(1/deg) log M(P)` for the primitive integer minimal polynomial `P` of
/// `x`, with roots from companion-matrix eigenvalues.
pub fn mahler_height(x: &FieldElement) -> f64 {
    let p = x.minpoly().primitive_part();
    let c: Vec<f64> = p.coeffs().iter().map(|a| a.to_f64().unwrap()).collect();
    let n = c.len() - 1;
    let lead = c[n];
    let mut log_m = lead.abs().ln();
    if n == 1 {
        log_m += (c[0] / lead).abs().ln().max(0.0);
        return log_m;
    }
    let mut comp = CMatrix::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        comp[(i, n - 1)] = Complex64::new(-c[i] / lead, 0.0);
    }
    for r in spectral::eigenvalues(&comp) {
        log_m += r.norm().ln().max(0.0);
    }
    log_m / n as f64
}

/// `max_{A in F} h(A)`.
pub fn height_set(f: &[MatrixOverK], precision_bits: u32) -> Result<f64, HeightError> {
    if f.is_empty() {
        return Err(HeightError::Empty);
    }
    let hs: Result<Vec<f64>, HeightError> =
        f.par_iter().map(|a| height_matrix(a, precision_bits).map(|r| r.total)).collect();
    Ok(hs?.into_iter().fold(0.0, f64::max))
}

fn check_set(f: &[MatrixOverK]) -> Result<(), HeightError> {
    let first = f.first().ok_or(HeightError::Empty)?;
    for a in f {
        first.check(a)?;
    }
    Ok(())
}

/// Distinct length-`n` products, `n >= 1`, in order of first appearance.
/// The cap bounds the number of products formed at each step.
pub fn exact_product_set(f: &[MatrixOverK], n: usize, cap: usize) -> Result<Vec<MatrixOverK>, HeightError> {
    if n == 0 {
        return Err(HeightError::ZeroPower);
    }
    check_set(f)?;
    let mut level = dedup(f.to_vec());
    for _ in 1..n {
        level = extend_exact(&level, f, cap)?;
    }
    Ok(level)
}

fn dedup(v: Vec<MatrixOverK>) -> Vec<MatrixOverK> {
    let mut seen: IndexSet<Vec<BigRational>> = IndexSet::new();
    v.into_iter().filter(|m| seen.insert(m.key())).collect()
}

fn extend_exact(level: &[MatrixOverK], f: &[MatrixOverK], cap: usize) -> Result<Vec<MatrixOverK>, HeightError> {
    let needed = level.len() * f.len();
    if needed > cap {
        return Err(HeightError::CapExceeded { needed, cap });
    }
    let prods: Vec<MatrixOverK> = level
        .par_iter()
        .flat_map_iter(|p| f.iter().map(move |a| p.checked_mul(a).unwrap()))
        .collect();
    Ok(dedup(prods))
}

/// `Lambda_v(A)` over all places where it can exceed 1, as
/// `(place label, n_v, log Lambda_v)`.
fn log_lambda_by_place(a: &MatrixOverK, precision_bits: u32) -> Result<Vec<(String, usize, f64)>, HeightError> {
    let mut out = Vec::new();
    for e in a.field.embeddings_with_precision(precision_bits)?.iter() {
        if !e.represents_place() {
            continue;
        }
        let (m, _) = a.embed(e);
        out.push((format!("inf#{}", e.index), e.n_v() as usize, spectral::spectral_radius(&m).ln()));
    }
    let primes = a.denominator_primes()?;
    if primes.is_empty() {
        return Ok(out);
    }
    let cp = a.charpoly();
    for p in primes {
        for v in a.field.nonarch_places(p).map_err(unsupported)? {
            let m = nonarch_log_lambda(&cp, &v, &a.field)?;
            out.push((v.label(), v.n_v(), m.map_or(f64::NEG_INFINITY, |m| m.to_f64().unwrap() * (p as f64).ln())));
        }
    }
    Ok(out)
}

/// `-min` root valuation of a polynomial over `K` at `v`, from its Newton
/// polygon, so that `log Lambda_v` is this times `log p`. `None` if every
/// root is zero.
pub fn nonarch_log_lambda(
    charpoly: &[FieldElement],
    v: &NonArchPlace,
    field: &NumberField,
) -> Result<Option<BigRational>, HeightError> {
    let vals: Result<Vec<Option<BigRational>>, HeightError> = charpoly
        .iter()
        .map(|c| {
            if c.is_zero() {
                Ok(None)
            } else {
                field.valuation(c, v).map(Some).map_err(unsupported)
            }
        })
        .collect();
    let roots = newton_polygon_valuations(&vals?);
    Ok(roots.first().map(|m| -m))
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightBracketRow {
    pub n: usize,
    pub products: usize,
    /// `h(F^n) / n`
    pub upper: f64,
    /// `(1/k) sum_v n_v log+ Lambda_v(F^n)^(1/n)`
    pub lower: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeightBracket {
    pub estimate: SpectralEstimate,
    pub rows: Vec<HeightBracketRow>,
}

/// Bracket for the normalized height: `upper = min_n h(F^n)/n` and
/// `lower = max_n (1/k) sum_v n_v log+ Lambda_v(F^n)^(1/n)` over
/// `1 <= n <= n_max`.
pub fn normalized_height_bracket(
    f: &[MatrixOverK],
    n_max: usize,
    cap: usize,
    precision_bits: u32,
) -> Result<HeightBracket, HeightError> {
    if n_max == 0 {
        return Err(HeightError::ZeroPower);
    }
    check_set(f)?;
    let k = f[0].field.degree() as f64;
    let mut level = dedup(f.to_vec());
    let mut rows = Vec::new();
    let mut est = SpectralEstimate {
        lower: 0.0,
        upper: f64::INFINITY,
        lower_witness: String::new(),
        upper_witness: String::new(),
    };
    for n in 1..=n_max {
        if n > 1 {
            level = extend_exact(&level, f, cap)?;
        }
        let per: Result<Vec<(f64, Vec<(String, usize, f64)>)>, HeightError> = level
            .par_iter()
            .map(|a| Ok((height_matrix(a, precision_bits)?.total, log_lambda_by_place(a, precision_bits)?)))
            .collect();
        let per = per?;
        let h = per.iter().map(|r| r.0).fold(0.0, f64::max);
        let lower = per
            .iter()
            .map(|(_, places)| {
                places
                    .iter()
                    .map(|(_, nv, l)| *nv as f64 * (l / n as f64).max(0.0))
                    .sum::<f64>()
                    / k
            })
            .fold(0.0, f64::max);
        let upper = h / n as f64;
        if upper < est.upper {
            est.upper = upper;
            est.upper_witness = format!("h(F^{n})/{n}");
        }
        if lower > est.lower || n == 1 {
            est.lower = lower;
            est.lower_witness = format!("max over F^{n} of sum_v log+ R_v(w)/{n}");
        }
        rows.push(HeightBracketRow {
            n,
            products: level.len(),
            upper,
            lower,
        });
    }
    Ok(HeightBracket { estimate: est, rows })
}
