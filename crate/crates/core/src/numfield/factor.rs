//! Hensel lifting of coprime factorizations modulo p, and Zassenhaus
//! factorization of monic integer polynomials.

use num_bigint::BigInt;
use num_traits::One;

use super::modp::{self, FpPoly};
use super::poly::ZPoly;

struct Lift {
    g: ZPoly,
    h: ZPoly,
    s: ZPoly,
    t: ZPoly,
}

/// One quadratic Hensel step from modulus `m` to `m^2`. Requires
/// `f = g h`, `s g + t h = 1` mod `m`, `h` monic, `deg s < deg h`,
/// `deg t < deg g`.
fn hensel_step(f: &ZPoly, l: &Lift, m: &BigInt) -> Lift {
    let m2 = m * m;
    let e = f.sub(&l.g.mul(&l.h)).mod_positive(&m2);
    let (q, r) = l.s.mul(&e).mod_positive(&m2).divrem_monic(&l.h);
    let g = l.g.add(&l.t.mul(&e)).add(&q.mul(&l.g)).mod_positive(&m2);
    let h = l.h.add(&r).mod_positive(&m2);
    let b = l
        .s
        .mul(&g)
        .add(&l.t.mul(&h))
        .sub(&ZPoly::one())
        .mod_positive(&m2);
    let (c, d) = l.s.mul(&b).mod_positive(&m2).divrem_monic(&h);
    let s = l.s.sub(&d).mod_positive(&m2);
    let t = l
        .t
        .sub(&l.t.mul(&b))
        .sub(&c.mul(&g))
        .mod_positive(&m2);
    Lift { g, h, s, t }
}

/// Lift `f = g0 h0 (mod p)` with monic coprime factors to modulus `p^n`.
/// The leading coefficient of `f` must be 1.
pub fn lift_pair(f: &ZPoly, g0: &FpPoly, h0: &FpPoly, p: u64, n: u32) -> (ZPoly, ZPoly) {
    let (gcd, s, t) = g0.ext_gcd(h0);
    assert!(gcd.is_one(), "Hensel lifting needs coprime factors");
    let pb = BigInt::from(p);
    let target = pb.pow(n);
    let mut l = Lift {
        g: g0.to_zpoly(),
        h: h0.to_zpoly(),
        s: s.to_zpoly(),
        t: t.to_zpoly(),
    };
    let mut m = pb;
    while m < target {
        l = hensel_step(f, &l, &m);
        m = &m * &m;
    }
    (l.g.mod_positive(&target), l.h.mod_positive(&target))
}

/// Lift a factorization of monic `f` into pairwise coprime monic factors
/// modulo `p` to modulus `p^n`, preserving the order of `factors`.
pub fn multifactor_lift(f: &ZPoly, factors: &[FpPoly], p: u64, n: u32) -> Vec<ZPoly> {
    let modulus = BigInt::from(p).pow(n);
    let mut out = Vec::with_capacity(factors.len());
    let mut rest = f.mod_positive(&modulus);
    for (i, g0) in factors.iter().enumerate() {
        if i + 1 == factors.len() {
            out.push(rest.clone());
            break;
        }
        let h0 = factors[i + 1..]
            .iter()
            .fold(FpPoly::one(p), |acc, g| acc.mul(g));
        let (g, h) = lift_pair(&rest, g0, &h0, p, n);
        out.push(g);
        rest = h;
    }
    out
}

fn small_primes() -> impl Iterator<Item = u64> {
    (2u64..).filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
}

fn mul_mod_all(fs: &[&ZPoly], m: &BigInt) -> ZPoly {
    fs.iter()
        .fold(ZPoly::one(), |acc, g| acc.mul(g).mod_positive(m))
}

fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if visit(&idx) {
            return;
        }
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Irreducible factors of a monic squarefree integer polynomial.
fn zassenhaus(f: &ZPoly) -> Vec<ZPoly> {
    let n = f.degree().unwrap_or(0);
    if n <= 1 {
        return vec![f.clone()];
    }
    let mut best: Option<(u64, Vec<FpPoly>)> = None;
    let mut good = 0;
    for p in small_primes() {
        let fp = FpPoly::from_zpoly(f, p);
        if !fp.is_squarefree() {
            continue;
        }
        let fs: Vec<FpPoly> = modp::factor(&fp).into_iter().map(|(g, _)| g).collect();
        if fs.len() == 1 {
            return vec![f.clone()];
        }
        if best.as_ref().is_none_or(|(_, b)| fs.len() < b.len()) {
            best = Some((p, fs));
        }
        good += 1;
        if good >= 5 {
            break;
        }
    }
    let (p, local) = best.expect("some prime keeps a squarefree polynomial squarefree");

    // Factor coefficients are bounded by 2^n |f|_2.
    let bound = (BigInt::one() << n) * (f.norm2_squared().sqrt() + 1u32);
    let pb = BigInt::from(p);
    let mut a = 1u32;
    let mut modulus = pb.clone();
    while modulus <= &bound * 2 {
        modulus *= &pb;
        a += 1;
    }
    let mut lifted = multifactor_lift(f, &local, p, a);
    let mut remaining = f.clone();
    let mut found = Vec::new();
    let mut s = 1;
    while 2 * s <= lifted.len() {
        let mut hit: Option<(Vec<usize>, ZPoly, ZPoly)> = None;
        for_each_subset(lifted.len(), s, |subset| {
            let picks: Vec<&ZPoly> = subset.iter().map(|&i| &lifted[i]).collect();
            let g = mul_mod_all(&picks, &modulus).mod_symmetric(&modulus);
            if let Some(q) = remaining.exact_div(&g) {
                hit = Some((subset.to_vec(), g, q));
                return true;
            }
            false
        });
        match hit {
            Some((subset, g, q)) => {
                found.push(g);
                remaining = q;
                for &i in subset.iter().rev() {
                    lifted.remove(i);
                }
            }
            None => s += 1,
        }
    }
    if remaining.degree().unwrap_or(0) > 0 {
        found.push(remaining);
    }
    found
}

/// Squarefree decomposition over Q of a monic integer polynomial.
fn squarefree_q(f: &ZPoly) -> Vec<(ZPoly, usize)> {
    let fq = f.to_qpoly();
    let mut out = Vec::new();
    let mut c = fq.gcd(&fq.derivative());
    let mut w = fq.divrem(&c).0;
    let mut i = 1;
    while w.degree().unwrap_or(0) > 0 {
        let y = w.gcd(&c);
        let fac = w.divrem(&y).0;
        if fac.degree().unwrap_or(0) > 0 {
            out.push((fac.monic().primitive_part(), i));
        }
        i += 1;
        c = c.divrem(&y).0;
        w = y;
    }
    out
}

/// Complete factorization of a monic integer polynomial into monic
/// irreducibles over Z, sorted by degree then coefficients.
pub fn factor_monic(f: &ZPoly) -> Vec<(ZPoly, usize)> {
    assert!(f.is_monic(), "factor_monic expects a monic polynomial");
    let mut out = Vec::new();
    for (g, m) in squarefree_q(f) {
        for h in zassenhaus(&g) {
            out.push((h, m));
        }
    }
    out.sort_by(|(a, _), (b, _)| {
        a.degree().cmp(&b.degree()).then_with(|| {
            let ka: Vec<&BigInt> = a.coeffs().iter().rev().collect();
            let kb: Vec<&BigInt> = b.coeffs().iter().rev().collect();
            ka.cmp(&kb)
        })
    });
    out
}

/// `(x-2)(x+2)` style rendering of a factor list.
pub fn format_factors(fs: &[(ZPoly, usize)]) -> String {
    fs.iter()
        .flat_map(|(g, m)| std::iter::repeat_n(format!("({})", g.compact()), *m))
        .collect()
}

pub fn is_irreducible(f: &ZPoly) -> bool {
    let fs = factor_monic(f);
    fs.len() == 1 && fs[0].1 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(c: &[i64]) -> ZPoly {
        ZPoly::from_ints(c)
    }

    fn reassemble(fs: &[(ZPoly, usize)]) -> ZPoly {
        fs.iter().fold(ZPoly::one(), |acc, (g, m)| {
            (0..*m).fold(acc, |a, _| a.mul(g))
        })
    }

    #[test]
    fn hensel_lift_x2_minus_2_mod_7() {
        let f = z(&[-2, 0, 1]);
        let g0 = FpPoly::new(7, vec![3, 1]);
        let h0 = FpPoly::new(7, vec![4, 1]);
        let (g, h) = lift_pair(&f, &g0, &h0, 7, 10);
        let m = BigInt::from(7).pow(10);
        assert_eq!(g.mul(&h).mod_positive(&m), f.mod_positive(&m));
    }

    #[test]
    fn difference_of_squares() {
        let fs = factor_monic(&z(&[-4, 0, 1]));
        assert_eq!(format_factors(&fs), "(x-2)(x+2)");
    }

    #[test]
    fn irreducible_examples() {
        assert!(is_irreducible(&z(&[-2, 0, 1])));
        assert!(is_irreducible(&z(&[1, 0, 1])));
        assert!(is_irreducible(&z(&[-2, 0, 0, 1])));
        assert!(is_irreducible(&z(&[1, 1, 1, 1, 1])));
        // x^4 + 1 splits modulo every prime but is irreducible
        assert!(is_irreducible(&z(&[1, 0, 0, 0, 1])));
        assert!(!is_irreducible(&z(&[0, 0, 1])));
    }

    #[test]
    fn swinnerton_dyer_like_and_products() {
        // x^4 - 10x^2 + 1 splits mod every prime
        assert!(is_irreducible(&z(&[1, 0, -10, 0, 1])));
        let a = z(&[1, 0, -10, 0, 1]);
        let b = z(&[-3, 1, 0, 1]);
        let prod = a.mul(&b).mul(&b);
        let fs = factor_monic(&prod);
        assert_eq!(reassemble(&fs), prod);
        assert_eq!(fs.len(), 2);
        assert!(fs.iter().any(|(g, m)| g == &b && *m == 2));
    }

    #[test]
    fn cyclotomic_product() {
        // x^8 - 1 = (x-1)(x+1)(x^2+1)(x^4+1)
        let fs = factor_monic(&z(&[-1, 0, 0, 0, 0, 0, 0, 0, 1]));
        assert_eq!(fs.len(), 4);
        assert_eq!(format_factors(&fs), "(x-1)(x+1)(x^2+1)(x^4+1)");
    }
}
