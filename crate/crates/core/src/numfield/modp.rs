//! Polynomials over a prime field F_p with p < 2^64, and their complete
//! factorization (squarefree, distinct-degree, equal-degree splitting).

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::poly::ZPoly;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FpPoly {
    p: u64,
    c: Vec<u64>,
}

#[inline]
fn mulm(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

#[inline]
fn addm(a: u64, b: u64, p: u64) -> u64 {
    let (s, over) = a.overflowing_add(b);
    if over || s >= p {
        s.wrapping_sub(p)
    } else {
        s
    }
}

#[inline]
fn subm(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a.wrapping_sub(b).wrapping_add(p)
    }
}

pub fn powm(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mulm(r, a, p);
        }
        a = mulm(a, a, p);
        e >>= 1;
    }
    r
}

pub fn invm(a: u64, p: u64) -> u64 {
    assert!(a % p != 0, "inverse of zero mod p");
    powm(a, p - 2, p)
}

impl FpPoly {
    pub fn new(p: u64, mut c: Vec<u64>) -> Self {
        for x in c.iter_mut() {
            *x %= p;
        }
        while c.last() == Some(&0) {
            c.pop();
        }
        FpPoly { p, c }
    }

    pub fn zero(p: u64) -> Self {
        FpPoly { p, c: Vec::new() }
    }

    pub fn one(p: u64) -> Self {
        FpPoly::new(p, vec![1])
    }

    pub fn x(p: u64) -> Self {
        FpPoly::new(p, vec![0, 1])
    }

    pub fn from_zpoly(f: &ZPoly, p: u64) -> Self {
        let m = BigInt::from(p);
        let c = f
            .coeffs()
            .iter()
            .map(|a| {
                let r = ((a % &m) + &m) % &m;
                u64::try_from(r).unwrap()
            })
            .collect();
        FpPoly::new(p, c)
    }

    /// Lift to Z with coefficients in `[0, p)`.
    pub fn to_zpoly(&self) -> ZPoly {
        ZPoly::new(self.c.iter().map(|&a| BigInt::from(a)).collect())
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.c == [1]
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    fn deg_or_zero(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn lead(&self) -> u64 {
        self.c.last().copied().unwrap_or(0)
    }

    fn coeff(&self, i: usize) -> u64 {
        self.c.get(i).copied().unwrap_or(0)
    }

    pub fn add(&self, o: &FpPoly) -> FpPoly {
        let n = self.c.len().max(o.c.len());
        FpPoly::new(
            self.p,
            (0..n).map(|i| addm(self.coeff(i), o.coeff(i), self.p)).collect(),
        )
    }

    pub fn sub(&self, o: &FpPoly) -> FpPoly {
        let n = self.c.len().max(o.c.len());
        FpPoly::new(
            self.p,
            (0..n).map(|i| subm(self.coeff(i), o.coeff(i), self.p)).collect(),
        )
    }

    pub fn mul(&self, o: &FpPoly) -> FpPoly {
        if self.is_zero() || o.is_zero() {
            return FpPoly::zero(self.p);
        }
        let p = self.p;
        let mut out = vec![0u64; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate() {
                out[i + j] = addm(out[i + j], mulm(a, b, p), p);
            }
        }
        FpPoly::new(p, out)
    }

    pub fn scale(&self, s: u64) -> FpPoly {
        FpPoly::new(self.p, self.c.iter().map(|&a| mulm(a, s, self.p)).collect())
    }

    pub fn divrem(&self, d: &FpPoly) -> (FpPoly, FpPoly) {
        let p = self.p;
        let dd = d.degree().expect("polynomial division by zero");
        if self.c.len() <= dd {
            return (FpPoly::zero(p), self.clone());
        }
        let inv = invm(d.lead(), p);
        let mut r = self.c.clone();
        let mut q = vec![0u64; r.len() - dd];
        for i in (dd..r.len()).rev() {
            if r[i] == 0 {
                continue;
            }
            let t = mulm(r[i], inv, p);
            for (j, &dc) in d.c.iter().enumerate() {
                let idx = i - dd + j;
                r[idx] = subm(r[idx], mulm(t, dc, p), p);
            }
            q[i - dd] = t;
        }
        r.truncate(dd);
        (FpPoly::new(p, q), FpPoly::new(p, r))
    }

    pub fn rem(&self, d: &FpPoly) -> FpPoly {
        self.divrem(d).1
    }

    pub fn div_exact(&self, d: &FpPoly) -> FpPoly {
        let (q, r) = self.divrem(d);
        debug_assert!(r.is_zero());
        q
    }

    pub fn monic(&self) -> FpPoly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(invm(self.lead(), self.p))
    }

    pub fn gcd(&self, o: &FpPoly) -> FpPoly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `(g, s, t)` with `s*self + t*o = g` monic.
    pub fn ext_gcd(&self, o: &FpPoly) -> (FpPoly, FpPoly, FpPoly) {
        let p = self.p;
        let (mut r0, mut r1) = (self.clone(), o.clone());
        let (mut s0, mut s1) = (FpPoly::one(p), FpPoly::zero(p));
        let (mut t0, mut t1) = (FpPoly::zero(p), FpPoly::one(p));
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
        let inv = invm(r0.lead(), p);
        (r0.scale(inv), s0.scale(inv), t0.scale(inv))
    }

    pub fn derivative(&self) -> FpPoly {
        let p = self.p;
        FpPoly::new(
            p,
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &a)| mulm(a, (i as u64) % p, p))
                .collect(),
        )
    }

    /// `self^e mod m`.
    pub fn powmod(&self, e: &BigUint, m: &FpPoly) -> FpPoly {
        let mut result = FpPoly::one(self.p).rem(m);
        let base = self.rem(m);
        for i in (0..e.bits()).rev() {
            result = result.mul(&result).rem(m);
            if e.bit(i) {
                result = result.mul(&base).rem(m);
            }
        }
        result
    }

    pub fn pow(&self, e: usize) -> FpPoly {
        let mut r = FpPoly::one(self.p);
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    /// For `f(x) = g(x^p)`, returns `g` (Frobenius fixes F_p).
    fn pth_root(&self) -> FpPoly {
        let p = self.p as usize;
        FpPoly::new(self.p, self.c.iter().step_by(p).copied().collect())
    }

    pub fn is_squarefree(&self) -> bool {
        self.gcd(&self.derivative()).is_one()
    }
}

/// Squarefree decomposition of a monic polynomial: pairs `(g, m)` with
/// `f = prod g^m`, each `g` squarefree.
pub fn squarefree_decomposition(f: &FpPoly) -> Vec<(FpPoly, usize)> {
    let p = f.p;
    let mut out = Vec::new();
    if f.deg_or_zero() == 0 {
        return out;
    }
    let mut c = f.gcd(&f.derivative());
    let mut w = f.div_exact(&c);
    let mut i = 1;
    while !w.is_one() {
        let y = w.gcd(&c);
        let fac = w.div_exact(&y);
        if !fac.is_one() {
            out.push((fac, i));
        }
        i += 1;
        w = y;
        c = c.div_exact(&w);
    }
    if !c.is_one() {
        let root = c.pth_root();
        for (g, m) in squarefree_decomposition(&root) {
            out.push((g, m * p as usize));
        }
    }
    out
}

/// Distinct-degree factorization of a squarefree monic polynomial.
pub fn distinct_degree(f: &FpPoly) -> Vec<(FpPoly, usize)> {
    let p = f.p;
    let mut out = Vec::new();
    let mut f = f.clone();
    let x = FpPoly::x(p);
    let mut h = x.clone();
    let pb = BigUint::from(p);
    let mut i = 1;
    while f.deg_or_zero() >= 2 * i {
        h = h.powmod(&pb, &f);
        let g = h.sub(&x).gcd(&f);
        if !g.is_one() {
            f = f.div_exact(&g);
            h = h.rem(&f);
            out.push((g, i));
        }
        i += 1;
    }
    if f.deg_or_zero() > 0 {
        let d = f.deg_or_zero();
        out.push((f, d));
    }
    out
}

/// Split a product of distinct monic irreducibles all of degree `d`.
pub fn equal_degree(f: &FpPoly, d: usize, rng: &mut ChaCha8Rng) -> Vec<FpPoly> {
    let n = f.deg_or_zero();
    if n <= d {
        return vec![f.clone()];
    }
    let p = f.p;
    let exponent = if p == 2 {
        BigUint::zero()
    } else {
        (BigUint::from(p).pow(d as u32) - 1u32) / 2u32
    };
    loop {
        let a = FpPoly::new(p, (0..n).map(|_| rng.random_range(0..p)).collect());
        if a.deg_or_zero() == 0 {
            continue;
        }
        let b = if p == 2 {
            // absolute trace F_{2^d} -> F_2
            let mut t = a.clone();
            let mut s = a.clone();
            for _ in 1..d {
                t = t.mul(&t).rem(f);
                s = s.add(&t);
            }
            s
        } else {
            a.powmod(&exponent, f).sub(&FpPoly::one(p))
        };
        let g = b.gcd(f);
        let gd = g.deg_or_zero();
        if gd > 0 && gd < n {
            let mut out = equal_degree(&g, d, rng);
            out.extend(equal_degree(&f.div_exact(&g), d, rng));
            return out;
        }
    }
}

fn canonical_key(g: &FpPoly) -> (usize, Vec<u64>) {
    (g.c.len(), g.c.iter().rev().copied().collect())
}

/// Complete factorization into monic irreducibles with multiplicities,
/// ordered by degree then by coefficients (leading first).
pub fn factor(f: &FpPoly) -> Vec<(FpPoly, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ f.p);
    let monic = f.monic();
    let mut out = Vec::new();
    for (sqf, m) in squarefree_decomposition(&monic) {
        for (block, d) in distinct_degree(&sqf) {
            for g in equal_degree(&block, d, &mut rng) {
                out.push((g, m));
            }
        }
    }
    out.sort_by_key(|(g, _)| canonical_key(g));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64, c: &[u64]) -> FpPoly {
        FpPoly::new(p, c.to_vec())
    }

    fn product(fs: &[(FpPoly, usize)], p: u64) -> FpPoly {
        fs.iter()
            .fold(FpPoly::one(p), |acc, (g, m)| acc.mul(&g.pow(*m)))
    }

    #[test]
    fn x2_minus_2_mod_7_splits() {
        let f = fp(7, &[5, 0, 1]);
        let fs = factor(&f);
        assert_eq!(fs, vec![(fp(7, &[3, 1]), 1), (fp(7, &[4, 1]), 1)]);
    }

    #[test]
    fn x2_minus_2_mod_2_is_square() {
        let f = fp(2, &[0, 0, 1]);
        assert_eq!(factor(&f), vec![(fp(2, &[0, 1]), 2)]);
    }

    #[test]
    fn inert_and_mixed() {
        // x^2+1 irreducible mod 3
        assert_eq!(factor(&fp(3, &[1, 0, 1])), vec![(fp(3, &[1, 0, 1]), 1)]);
        // x^5 - x = x(x-1)(x-2)(x-3)(x-4) mod 5
        let fs = factor(&fp(5, &[0, 4, 0, 0, 0, 1]));
        assert_eq!(fs.len(), 5);
        assert!(fs.iter().all(|(g, m)| g.degree() == Some(1) && *m == 1));
    }

    #[test]
    fn factorization_reassembles() {
        for p in [2u64, 3, 5, 7, 11, 13, 101, 65537] {
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.random_range(1..9);
                let mut c: Vec<u64> = (0..n).map(|_| rng.random_range(0..p)).collect();
                c.push(1);
                let f = FpPoly::new(p, c);
                let fs = factor(&f);
                assert_eq!(product(&fs, p), f, "p={p} f={f:?}");
                for (g, _) in &fs {
                    assert_eq!(g.lead(), 1);
                    assert!(irreducible_by_brute(g));
                }
            }
        }
    }

    // no factor of degree <= deg/2 divides g, by checking x^{p^i} - x
    fn irreducible_by_brute(g: &FpPoly) -> bool {
        let n = g.deg_or_zero();
        let p = g.p;
        let x = FpPoly::x(p);
        let mut h = x.clone();
        for _ in 1..=n / 2 {
            h = h.powmod(&BigUint::from(p), g);
            if !h.sub(&x).gcd(g).is_one() {
                return false;
            }
        }
        true
    }

    #[test]
    fn trace_splitting_in_char_two() {
        // x^4 + x + 1... times x^2+x+1 over F_2
        let a = fp(2, &[1, 1, 0, 0, 1]);
        let b = fp(2, &[1, 1, 1]);
        let c = fp(2, &[1, 1, 0, 1]);
        let f = a.mul(&b).mul(&c);
        let fs = factor(&f);
        assert_eq!(fs.len(), 3);
        assert_eq!(product(&fs, 2), f);
    }
}
