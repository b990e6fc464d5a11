//! Dense univariate polynomials over Q and Z, coefficients stored constant
//! term first with no trailing zeros.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct QPoly {
    c: Vec<BigRational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ZPoly {
    c: Vec<BigInt>,
}

fn trim<T: Zero>(v: &mut Vec<T>) {
    while v.last().is_some_and(|x| x.is_zero()) {
        v.pop();
    }
}

impl QPoly {
    pub fn new(mut c: Vec<BigRational>) -> Self {
        trim(&mut c);
        QPoly { c }
    }

    pub fn zero() -> Self {
        QPoly { c: Vec::new() }
    }

    pub fn one() -> Self {
        QPoly::constant(BigRational::one())
    }

    pub fn constant(a: BigRational) -> Self {
        QPoly::new(vec![a])
    }

    /// `x - a`
    pub fn linear(a: BigRational) -> Self {
        QPoly::new(vec![-a, BigRational::one()])
    }

    pub fn from_ints(c: &[i64]) -> Self {
        QPoly::new(c.iter().map(|&x| BigRational::from_integer(x.into())).collect())
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.c.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn lead(&self) -> BigRational {
        self.c.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, o: &QPoly) -> QPoly {
        let n = self.c.len().max(o.c.len());
        QPoly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &QPoly) -> QPoly {
        let n = self.c.len().max(o.c.len());
        QPoly::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }

    pub fn neg(&self) -> QPoly {
        QPoly {
            c: self.c.iter().map(|x| -x).collect(),
        }
    }

    pub fn mul(&self, o: &QPoly) -> QPoly {
        if self.is_zero() || o.is_zero() {
            return QPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        QPoly::new(out)
    }

    pub fn scale(&self, s: &BigRational) -> QPoly {
        QPoly::new(self.c.iter().map(|x| x * s).collect())
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn divrem(&self, d: &QPoly) -> (QPoly, QPoly) {
        let dd = d.degree().expect("polynomial division by zero");
        let lead_inv = d.lead().recip();
        let mut r = self.c.clone();
        if r.len() <= dd {
            return (QPoly::zero(), self.clone());
        }
        let mut q = vec![BigRational::zero(); r.len() - dd];
        for i in (dd..r.len()).rev() {
            if r[i].is_zero() {
                continue;
            }
            let t = &r[i] * &lead_inv;
            for (j, dc) in d.c.iter().enumerate() {
                let idx = i - dd + j;
                r[idx] -= &t * dc;
            }
            q[i - dd] = t;
        }
        r.truncate(dd);
        (QPoly::new(q), QPoly::new(r))
    }

    pub fn rem(&self, d: &QPoly) -> QPoly {
        self.divrem(d).1
    }

    pub fn monic(&self) -> QPoly {
        if self.is_zero() {
            return QPoly::zero();
        }
        self.scale(&self.lead().recip())
    }

    /// Monic gcd (zero if both are zero).
    pub fn gcd(&self, o: &QPoly) -> QPoly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Returns `(g, s, t)` with `s*self + t*o = g`, `g` monic.
    pub fn ext_gcd(&self, o: &QPoly) -> (QPoly, QPoly, QPoly) {
        let (mut r0, mut r1) = (self.clone(), o.clone());
        let (mut s0, mut s1) = (QPoly::one(), QPoly::zero());
        let (mut t0, mut t1) = (QPoly::zero(), QPoly::one());
        while !r1.is_zero() {
            let (q, r) = r0.divrem(&r1);
            r0 = std::mem::replace(&mut r1, r);
            let s = s0.sub(&q.mul(&s1));
            s0 = std::mem::replace(&mut s1, s);
            let t = t0.sub(&q.mul(&t1));
            t0 = std::mem::replace(&mut t1, t);
        }
        if r0.is_zero() {
            return (r0, s0, t0);
        }
        let inv = r0.lead().recip();
        (r0.scale(&inv), s0.scale(&inv), t0.scale(&inv))
    }

    pub fn derivative(&self) -> QPoly {
        QPoly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| a * BigRational::from_integer(i.into()))
                .collect(),
        )
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.c
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, a| acc * x + a)
    }

    /// Content-normalized integer polynomial with positive leading coefficient.
    pub fn primitive_part(&self) -> ZPoly {
        if self.is_zero() {
            return ZPoly::zero();
        }
        let lcm = self
            .c
            .iter()
            .fold(BigInt::one(), |acc, a| acc.lcm(a.denom()));
        let ints: Vec<BigInt> = self
            .c
            .iter()
            .map(|a| (a * BigRational::from_integer(lcm.clone())).to_integer())
            .collect();
        ZPoly::new(ints).primitive()
    }
}

impl ZPoly {
    pub fn new(mut c: Vec<BigInt>) -> Self {
        trim(&mut c);
        ZPoly { c }
    }

    pub fn zero() -> Self {
        ZPoly { c: Vec::new() }
    }

    pub fn one() -> Self {
        ZPoly::new(vec![BigInt::one()])
    }

    pub fn from_ints(c: &[i64]) -> Self {
        ZPoly::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.c.get(i).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn lead(&self) -> BigInt {
        self.c.last().cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn is_monic(&self) -> bool {
        self.lead().is_one()
    }

    pub fn to_qpoly(&self) -> QPoly {
        QPoly::new(
            self.c
                .iter()
                .map(|a| BigRational::from_integer(a.clone()))
                .collect(),
        )
    }

    pub fn add(&self, o: &ZPoly) -> ZPoly {
        let n = self.c.len().max(o.c.len());
        ZPoly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &ZPoly) -> ZPoly {
        let n = self.c.len().max(o.c.len());
        ZPoly::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }

    pub fn mul(&self, o: &ZPoly) -> ZPoly {
        if self.is_zero() || o.is_zero() {
            return ZPoly::zero();
        }
        let mut out = vec![BigInt::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ZPoly::new(out)
    }

    pub fn scale(&self, s: &BigInt) -> ZPoly {
        ZPoly::new(self.c.iter().map(|x| x * s).collect())
    }

    pub fn content(&self) -> BigInt {
        self.c.iter().fold(BigInt::zero(), |g, a| g.gcd(a))
    }

    /// Divide out the content and make the leading coefficient positive.
    pub fn primitive(&self) -> ZPoly {
        if self.is_zero() {
            return ZPoly::zero();
        }
        let mut g = self.content();
        if self.lead().is_negative() {
            g = -g;
        }
        ZPoly::new(self.c.iter().map(|a| a / &g).collect())
    }

    /// Reduce coefficients into the symmetric range `(-m/2, m/2]`.
    pub fn mod_symmetric(&self, m: &BigInt) -> ZPoly {
        let half = m / 2;
        ZPoly::new(
            self.c
                .iter()
                .map(|a| {
                    let r = a.mod_floor(m);
                    if r > half {
                        r - m
                    } else {
                        r
                    }
                })
                .collect(),
        )
    }

    pub fn mod_positive(&self, m: &BigInt) -> ZPoly {
        ZPoly::new(self.c.iter().map(|a| a.mod_floor(m)).collect())
    }

    /// Division by a monic polynomial, exact over Z.
    pub fn divrem_monic(&self, d: &ZPoly) -> (ZPoly, ZPoly) {
        let dd = d.degree().expect("polynomial division by zero");
        assert!(d.is_monic(), "divisor must be monic");
        let mut r = self.c.clone();
        if r.len() <= dd {
            return (ZPoly::zero(), self.clone());
        }
        let mut q = vec![BigInt::zero(); r.len() - dd];
        for i in (dd..r.len()).rev() {
            if r[i].is_zero() {
                continue;
            }
            let t = r[i].clone();
            for (j, dc) in d.c.iter().enumerate() {
                r[i - dd + j] -= &t * dc;
            }
            q[i - dd] = t;
        }
        r.truncate(dd);
        (ZPoly::new(q), ZPoly::new(r))
    }

    /// Exact division over Z when the divisor divides `self`.
    pub fn exact_div(&self, d: &ZPoly) -> Option<ZPoly> {
        let dd = d.degree()?;
        let lead = d.lead();
        let mut r = self.c.clone();
        if r.len() <= dd {
            return if self.is_zero() { Some(ZPoly::zero()) } else { None };
        }
        let mut q = vec![BigInt::zero(); r.len() - dd];
        for i in (dd..r.len()).rev() {
            if r[i].is_zero() {
                continue;
            }
            let (t, rem) = r[i].div_rem(&lead);
            if !rem.is_zero() {
                return None;
            }
            for (j, dc) in d.c.iter().enumerate() {
                r[i - dd + j] -= &t * dc;
            }
            q[i - dd] = t;
        }
        if r.iter().take(dd).any(|x| !x.is_zero()) {
            return None;
        }
        Some(ZPoly::new(q))
    }

    pub fn derivative(&self) -> ZPoly {
        ZPoly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| a * BigInt::from(i))
                .collect(),
        )
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        self.c.iter().rev().fold(BigInt::zero(), |acc, a| acc * x + a)
    }

    /// Euclidean norm squared of the coefficient vector.
    pub fn norm2_squared(&self) -> BigInt {
        self.c.iter().map(|a| a * a).sum()
    }
}

/// Determinant of a square integer matrix by fraction-free elimination.
pub fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Resultant via the Sylvester determinant.
pub fn resultant(a: &ZPoly, b: &ZPoly) -> BigInt {
    let (Some(da), Some(db)) = (a.degree(), b.degree()) else {
        return BigInt::zero();
    };
    if da == 0 && db == 0 {
        return BigInt::one();
    }
    let n = da + db;
    let mut m = vec![vec![BigInt::zero(); n]; n];
    for (row, r) in m.iter_mut().enumerate().take(db) {
        for j in 0..=da {
            r[row + j] = a.c[da - j].clone();
        }
    }
    for row in 0..da {
        for j in 0..=db {
            m[db + row][row + j] = b.c[db - j].clone();
        }
    }
    bareiss_det(m)
}

fn write_poly<T: fmt::Display + Signed + One + PartialEq>(
    f: &mut fmt::Formatter<'_>,
    c: &[T],
    var: &str,
) -> fmt::Result {
    if c.is_empty() {
        return f.write_str("0");
    }
    let mut first = true;
    for (i, a) in c.iter().enumerate().rev() {
        if a.is_zero() {
            continue;
        }
        let neg = a.is_negative();
        let abs = a.abs();
        if first {
            if neg {
                f.write_str("-")?;
            }
        } else {
            f.write_str(if neg { " - " } else { " + " })?;
        }
        first = false;
        let unit = abs.is_one();
        match i {
            0 => write!(f, "{abs}")?,
            _ if unit => {}
            _ => write!(f, "{abs}*")?,
        }
        match i {
            0 => {}
            1 => f.write_str(var)?,
            _ => write!(f, "{var}^{i}")?,
        }
    }
    Ok(())
}

impl fmt::Display for QPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.c, "x")
    }
}

impl fmt::Display for ZPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.c, "x")
    }
}

impl ZPoly {
    /// Compact form used in factor lists: `x-2`, `x^2+1`.
    pub fn compact(&self) -> String {
        self.to_string().replace(' ', "")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn division_and_gcd() {
        let a = QPoly::from_ints(&[-1, 0, 1]);
        let b = QPoly::from_ints(&[-1, 1]);
        let (quo, r) = a.divrem(&b);
        assert_eq!(quo, QPoly::from_ints(&[1, 1]));
        assert!(r.is_zero());
        let g = a.gcd(&QPoly::from_ints(&[1, 2, 1]));
        assert_eq!(g, QPoly::from_ints(&[1, 1]));
    }

    #[test]
    fn ext_gcd_identity() {
        let a = QPoly::from_ints(&[-2, 0, 1]);
        let b = QPoly::from_ints(&[1, 1]);
        let (g, s, t) = a.ext_gcd(&b);
        assert_eq!(g, QPoly::one());
        assert_eq!(s.mul(&a).add(&t.mul(&b)), QPoly::one());
    }

    #[test]
    fn primitive_part_clears_denominators() {
        let p = QPoly::new(vec![q(1, 2), q(-1, 3)]);
        assert_eq!(p.primitive_part(), ZPoly::from_ints(&[-3, 2]));
    }

    #[test]
    fn resultant_matches_product_of_roots() {
        // Res(x^2 - 2, x - 3) = 3^2 - 2
        let a = ZPoly::from_ints(&[-2, 0, 1]);
        let b = ZPoly::from_ints(&[-3, 1]);
        assert_eq!(resultant(&a, &b), BigInt::from(7));
        // Res(x^2+1, x^2-2) = prod over roots of x^2+1 of (r^2-2) = 9
        let c = ZPoly::from_ints(&[1, 0, 1]);
        assert_eq!(resultant(&c, &a), BigInt::from(9));
    }

    #[test]
    fn display() {
        assert_eq!(ZPoly::from_ints(&[-2, 0, 1]).to_string(), "x^2 - 2");
        assert_eq!(ZPoly::from_ints(&[2, 1]).compact(), "x+2");
        assert_eq!(ZPoly::from_ints(&[0, -3, 0, 1]).to_string(), "x^3 - 3*x");
    }

    #[test]
    fn exact_division() {
        let a = ZPoly::from_ints(&[-4, 0, 1]);
        assert_eq!(
            a.exact_div(&ZPoly::from_ints(&[2, 1])),
            Some(ZPoly::from_ints(&[-2, 1]))
        );
        assert_eq!(a.exact_div(&ZPoly::from_ints(&[3, 1])), None);
    }
}
