use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::embeddings::{self, Embedding};
use super::factor;
use super::places::PadicData;
use super::poly::{resultant, QPoly, ZPoly};
use super::rational::format_rational;
use super::FieldError;

pub const MAX_DEGREE: usize = 8;

struct Inner {
    f: ZPoly,
    fq: QPoly,
    k: usize,
    discriminant: BigInt,
    embeddings: Mutex<BTreeMap<u32, Arc<Vec<Embedding>>>>,
    pub(super) padic: Mutex<BTreeMap<u64, Arc<PadicData>>>,
}

/// `Q[x]/(f)` for a monic irreducible integer polynomial `f`. Cheap to
/// clone; embeddings and place data are computed on first use and cached.
#[derive(Clone)]
pub struct NumberField {
    inner: Arc<Inner>,
}

impl fmt::Debug for NumberField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NumberField({})", self.inner.f)
    }
}

impl PartialEq for NumberField {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.f == other.inner.f
    }
}

impl Eq for NumberField {}

impl NumberField {
    /// Field defined by integer coefficients, constant term first.
    pub fn new(coefficients: &[BigInt]) -> Result<Self, FieldError> {
        let f = ZPoly::new(coefficients.to_vec());
        let k = match f.degree() {
            None | Some(0) => return Err(FieldError::ConstantPolynomial),
            Some(k) => k,
        };
        if !f.is_monic() {
            return Err(FieldError::NotMonic);
        }
        if k > MAX_DEGREE {
            return Err(FieldError::DegreeTooLarge(k));
        }
        let fs = factor::factor_monic(&f);
        if fs.len() != 1 || fs[0].1 != 1 {
            return Err(FieldError::Reducible(factor::format_factors(&fs)));
        }
        let sign = if (k * (k - 1) / 2) % 2 == 0 {
            BigInt::one()
        } else {
            -BigInt::one()
        };
        let discriminant = if k == 1 {
            BigInt::one()
        } else {
            sign * resultant(&f, &f.derivative())
        };
        Ok(NumberField {
            inner: Arc::new(Inner {
                fq: f.to_qpoly(),
                f,
                k,
                discriminant,
                embeddings: Mutex::new(BTreeMap::new()),
                padic: Mutex::new(BTreeMap::new()),
            }),
        })
    }

    pub fn from_ints(coefficients: &[i64]) -> Result<Self, FieldError> {
        let c: Vec<BigInt> = coefficients.iter().map(|&a| a.into()).collect();
        NumberField::new(&c)
    }

    /// Q itself, presented as `Q[x]/(x)`.
    pub fn rationals() -> Self {
        NumberField::from_ints(&[0, 1]).unwrap()
    }

    pub fn degree(&self) -> usize {
        self.inner.k
    }

    pub fn polynomial(&self) -> &ZPoly {
        &self.inner.f
    }

    pub(super) fn polynomial_q(&self) -> &QPoly {
        &self.inner.fq
    }

    pub fn discriminant(&self) -> &BigInt {
        &self.inner.discriminant
    }

    pub(super) fn padic_cache(&self) -> &Mutex<BTreeMap<u64, Arc<PadicData>>> {
        &self.inner.padic
    }

    /// Embeddings at 53 bits.
    pub fn embeddings(&self) -> Result<Arc<Vec<Embedding>>, FieldError> {
        self.embeddings_with_precision(53)
    }

    pub fn embeddings_with_precision(&self, bits: u32) -> Result<Arc<Vec<Embedding>>, FieldError> {
        let mut cache = self.inner.embeddings.lock().unwrap();
        if let Some(e) = cache.get(&bits) {
            return Ok(e.clone());
        }
        let e = Arc::new(embeddings::compute(&self.inner.f, bits)?);
        cache.insert(bits, e.clone());
        Ok(e)
    }

    /// Element with the given power-basis coefficients (missing high
    /// coefficients are zero).
    pub fn element(&self, coefficients: Vec<BigRational>) -> Result<FieldElement, FieldError> {
        if coefficients.len() > self.inner.k {
            return Err(FieldError::CoefficientCount {
                expected: self.inner.k,
                found: coefficients.len(),
            });
        }
        let mut c = coefficients;
        c.resize(self.inner.k, BigRational::zero());
        Ok(FieldElement {
            field: self.clone(),
            c,
        })
    }

    fn from_poly(&self, p: &QPoly) -> FieldElement {
        let r = if p.degree().unwrap_or(0) >= self.inner.k {
            p.rem(&self.inner.fq)
        } else {
            p.clone()
        };
        let mut c = r.coeffs().to_vec();
        c.resize(self.inner.k, BigRational::zero());
        FieldElement {
            field: self.clone(),
            c,
        }
    }

    pub fn zero(&self) -> FieldElement {
        self.from_rational(BigRational::zero())
    }

    pub fn one(&self) -> FieldElement {
        self.from_rational(BigRational::one())
    }

    pub fn from_int(&self, n: i64) -> FieldElement {
        self.from_rational(BigRational::from_integer(n.into()))
    }

    pub fn from_rational(&self, q: BigRational) -> FieldElement {
        self.from_poly(&QPoly::constant(q))
    }

    /// The class of `x`.
    pub fn generator(&self) -> FieldElement {
        self.from_poly(&QPoly::from_ints(&[0, 1]))
    }
}

/// An element of a [`NumberField`] in the power basis `1, a, ..., a^(k-1)`.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    field: NumberField,
    c: Vec<BigRational>,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FieldElement {
    /// Polynomial in `a`, the class of `x`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.poly().to_string();
        f.write_str(&s.replace('x', "a"))
    }
}

impl FieldElement {
    pub fn field(&self) -> &NumberField {
        &self.field
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.c
    }

    pub fn poly(&self) -> QPoly {
        QPoly::new(self.c.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(|x| x.is_zero())
    }

    /// Some(q) when the element lies in Q.
    pub fn as_rational(&self) -> Option<BigRational> {
        self.c[1..]
            .iter()
            .all(|x| x.is_zero())
            .then(|| self.c[0].clone())
    }

    fn check(&self, o: &FieldElement) {
        assert!(self.field == o.field, "elements belong to different fields");
    }

    pub fn checked_add(&self, o: &FieldElement) -> Result<FieldElement, FieldError> {
        if self.field != o.field {
            return Err(FieldError::FieldMismatch);
        }
        Ok(self + o)
    }

    pub fn inverse(&self) -> Result<FieldElement, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        let (g, s, _) = self.poly().ext_gcd(self.field.polynomial_q());
        debug_assert!(g == QPoly::one());
        Ok(self.field.from_poly(&s))
    }

    pub fn checked_div(&self, o: &FieldElement) -> Result<FieldElement, FieldError> {
        if self.field != o.field {
            return Err(FieldError::FieldMismatch);
        }
        Ok(self * &o.inverse()?)
    }

    pub fn pow(&self, e: i64) -> Result<FieldElement, FieldError> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let mut result = self.field.one();
        let mut b = base;
        let mut n = e.unsigned_abs();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &b;
            }
            b = &b * &b;
            n >>= 1;
        }
        Ok(result)
    }

    pub fn scale(&self, q: &BigRational) -> FieldElement {
        FieldElement {
            field: self.field.clone(),
            c: self.c.iter().map(|x| x * q).collect(),
        }
    }

    /// Matrix of multiplication by `self` on the power basis; column `j`
    /// holds the coordinates of `self * a^j`.
    pub fn multiplication_matrix(&self) -> Vec<Vec<BigRational>> {
        let k = self.field.degree();
        let mut m = vec![vec![BigRational::zero(); k]; k];
        let mut col = self.clone();
        let a = self.field.generator();
        for j in 0..k {
            for i in 0..k {
                m[i][j] = col.c[i].clone();
            }
            col = &col * &a;
        }
        m
    }

    /// Characteristic polynomial of the multiplication map.
    pub fn charpoly(&self) -> QPoly {
        charpoly_q(&self.multiplication_matrix())
    }

    pub fn norm(&self) -> BigRational {
        let cp = self.charpoly();
        let k = self.field.degree();
        let c0 = cp.coeff(0);
        if k % 2 == 0 {
            c0
        } else {
            -c0
        }
    }

    pub fn trace(&self) -> BigRational {
        let m = self.multiplication_matrix();
        (0..m.len()).fold(BigRational::zero(), |acc, i| acc + &m[i][i])
    }

    /// Monic minimal polynomial over Q.
    pub fn minpoly(&self) -> QPoly {
        let cp = self.charpoly();
        let g = cp.gcd(&cp.derivative());
        cp.divrem(&g).0.monic()
    }

    pub fn norm_trace_minpoly(&self) -> (BigRational, BigRational, QPoly) {
        (self.norm(), self.trace(), self.minpoly())
    }

    /// `(a, D)` with `self = a(alpha) / D`, `a` integral, `D > 0` minimal.
    pub fn integral_form(&self) -> (ZPoly, BigInt) {
        let d = self
            .c
            .iter()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let dq = BigRational::from_integer(d.clone());
        let a = ZPoly::new(self.c.iter().map(|x| (x * &dq).to_integer()).collect());
        (a, d)
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.c.iter().map(|x| x.to_f64().unwrap()).collect()
    }

    /// Image under an embedding together with an absolute error bound.
    pub fn embed(&self, e: &Embedding) -> (Complex64, f64) {
        embeddings::eval_with_error(&self.coeffs_f64(), e)
    }
}

/// Faddeev-LeVerrier characteristic polynomial `det(tI - M)`.
pub fn charpoly_q(m: &[Vec<BigRational>]) -> QPoly {
    let n = m.len();
    let mut coeffs = vec![BigRational::zero(); n + 1];
    coeffs[n] = BigRational::one();
    let mut mk = vec![vec![BigRational::zero(); n]; n];
    for k in 1..=n {
        // mk <- m * mk + c_{n-k+1} I
        let mut next = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = BigRational::zero();
                for l in 0..n {
                    if !m[i][l].is_zero() && !mk[l][j].is_zero() {
                        s += &m[i][l] * &mk[l][j];
                    }
                }
                next[i][j] = s;
            }
            next[i][i] += &coeffs[n - k + 1];
        }
        mk = next;
        let mut tr = BigRational::zero();
        for i in 0..n {
            for l in 0..n {
                if !m[i][l].is_zero() && !mk[l][i].is_zero() {
                    tr += &m[i][l] * &mk[l][i];
                }
            }
        }
        coeffs[n - k] = -tr / BigRational::from_integer(k.into());
    }
    QPoly::new(coeffs)
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: FieldElement) -> FieldElement {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: &FieldElement) -> FieldElement {
                (&self).$method(rhs)
            }
        }
        impl $tr<FieldElement> for &FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: FieldElement) -> FieldElement {
                self.$method(&rhs)
            }
        }
    };
}

impl Add<&FieldElement> for &FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: &FieldElement) -> FieldElement {
        self.check(rhs);
        FieldElement {
            field: self.field.clone(),
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&FieldElement> for &FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: &FieldElement) -> FieldElement {
        self.check(rhs);
        FieldElement {
            field: self.field.clone(),
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<&FieldElement> for &FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: &FieldElement) -> FieldElement {
        self.check(rhs);
        if let Some(q) = self.as_rational() {
            return rhs.scale(&q);
        }
        if let Some(q) = rhs.as_rational() {
            return self.scale(&q);
        }
        self.field.from_poly(&self.poly().mul(&rhs.poly()))
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement {
            field: self.field.clone(),
            c: self.c.iter().map(|a| -a).collect(),
        }
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl serde::Serialize for FieldElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.c.len()))?;
        for x in &self.c {
            seq.serialize_element(&format_rational(x))?;
        }
        seq.end()
    }
}

impl serde::Serialize for NumberField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let c: Vec<String> = self.inner.f.coeffs().iter().map(|a| a.to_string()).collect();
        serde::Serialize::serialize(&c, s)
    }
}

impl NumberField {
    pub fn is_rationals(&self) -> bool {
        self.inner.k == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn field_construction() {
        let k = NumberField::from_ints(&[-2, 0, 1]).unwrap();
        assert_eq!(k.degree(), 2);
        assert_eq!(k.discriminant(), &BigInt::from(8));
        let err = NumberField::from_ints(&[-4, 0, 1]).unwrap_err();
        assert_eq!(err.to_string(), "reducible: (x-2)(x+2)");
        assert_eq!(
            NumberField::from_ints(&[1, 2]).unwrap_err(),
            FieldError::NotMonic
        );
        let c = NumberField::from_ints(&[-2, 0, 0, 1]).unwrap();
        assert_eq!(c.discriminant(), &BigInt::from(-108));
    }

    #[test]
    fn arithmetic_in_q_sqrt2() {
        let k = NumberField::from_ints(&[-2, 0, 1]).unwrap();
        let r2 = k.generator();
        let a = &k.one() + &r2;
        let b = &k.one() - &r2;
        assert_eq!(&a * &b, k.from_int(-1));
        assert_eq!(&a + &k.zero(), a);
        assert_eq!(a.checked_div(&a).unwrap(), k.one());
        assert_eq!(a.inverse().unwrap(), -b.clone());
        assert_eq!(k.zero().inverse(), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn norm_trace_minpoly_examples() {
        let k = NumberField::from_ints(&[-2, 0, 1]).unwrap();
        let a = &k.one() + &k.generator();
        assert_eq!(
            a.multiplication_matrix(),
            vec![vec![q(1), q(2)], vec![q(1), q(1)]]
        );
        let (n, t, m) = a.norm_trace_minpoly();
        assert_eq!((n, t), (q(-1), q(2)));
        assert_eq!(m, QPoly::from_ints(&[-1, -2, 1]));
        let (n, t, m) = k.one().norm_trace_minpoly();
        assert_eq!((n, t, m), (q(1), q(2), QPoly::from_ints(&[-1, 1])));
        let (n, t, m) = k.generator().norm_trace_minpoly();
        assert_eq!((n, t, m), (q(-2), q(0), QPoly::from_ints(&[-2, 0, 1])));
    }

    #[test]
    fn minpoly_of_subfield_element() {
        // a^2 in Q(2^(1/4)) has minpoly t^2 - 2 and charpoly (t^2-2)^2
        let k = NumberField::from_ints(&[-2, 0, 0, 0, 1]).unwrap();
        let a2 = k.generator().pow(2).unwrap();
        assert_eq!(a2.minpoly(), QPoly::from_ints(&[-2, 0, 1]));
        assert_eq!(a2.norm(), q(4));
        assert_eq!(a2.trace(), q(0));
    }

    #[test]
    fn rationals_field() {
        let k = NumberField::rationals();
        let h = k.from_rational(BigRational::new(1.into(), 2.into()));
        assert_eq!(h.norm(), BigRational::new(1.into(), 2.into()));
        assert_eq!(h.minpoly(), QPoly::new(vec![BigRational::new((-1).into(), 2.into()), q(1)]));
    }
}
