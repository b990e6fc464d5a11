//! Reduced words in finitely generated free groups and the word maps they
//! induce on any group whose elements implement [`GroupElement`].
//!
//! Words are always kept in freely reduced normal form. The text format uses
//! `x`, `y`, `z` for the first three generators and the upper-case letter for
//! the inverse, so the commutator `[x, y]` is written `xyXY`. The identity is
//! written `1`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

const ALPHABET: [char; 3] = ['x', 'y', 'z'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("generator index {index} out of range for rank {rank}")]
    GeneratorOutOfRange { index: usize, rank: usize },
    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("free group rank must be at least 1")]
    ZeroRank,
    #[error("invalid character {ch:?} at offset {offset} in word text")]
    InvalidCharacter { ch: char, offset: usize },
    #[error("text format supports rank at most 3, got {0}")]
    RankTooLargeForText(usize),
    #[error("element {0} is not invertible")]
    NonInvertible(usize),
}

/// A generator or its inverse.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    generator: u32,
    inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter {
            generator: generator as u32,
            inverse,
        }
    }

    /// Zero-based generator index.
    pub fn generator(self) -> usize {
        self.generator as usize
    }

    pub fn is_inverse(self) -> bool {
        self.inverse
    }

    /// `+1` for a generator, `-1` for an inverse.
    pub fn sign(self) -> i32 {
        if self.inverse {
            -1
        } else {
            1
        }
    }

    pub fn inverted(self) -> Self {
        Letter {
            generator: self.generator,
            inverse: !self.inverse,
        }
    }

    fn cancels(self, other: Letter) -> bool {
        self.generator == other.generator && self.inverse != other.inverse
    }
}

/// A freely reduced word in the free group of the given rank.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    rank: usize,
    letters: Vec<Letter>,
}

/// Free reduction of an arbitrary letter sequence.
pub fn reduce(rank: usize, letters: impl IntoIterator<Item = Letter>) -> Result<Word, WordError> {
    if rank == 0 {
        return Err(WordError::ZeroRank);
    }
    let mut stack: Vec<Letter> = Vec::new();
    for l in letters {
        if l.generator() >= rank {
            return Err(WordError::GeneratorOutOfRange {
                index: l.generator(),
                rank,
            });
        }
        push_reduced(&mut stack, l);
    }
    Ok(Word {
        rank,
        letters: stack,
    })
}

fn push_reduced(stack: &mut Vec<Letter>, l: Letter) {
    match stack.last() {
        Some(&top) if top.cancels(l) => {
            stack.pop();
        }
        _ => stack.push(l),
    }
}

impl Word {
    pub fn identity(rank: usize) -> Self {
        assert!(rank >= 1, "free group rank must be at least 1");
        Word {
            rank,
            letters: Vec::new(),
        }
    }

    pub fn generator(rank: usize, index: usize) -> Result<Self, WordError> {
        reduce(rank, [Letter::new(index, false)])
    }

    /// `x` in rank 2.
    pub fn x() -> Self {
        Word::generator(2, 0).unwrap()
    }

    /// `y` in rank 2.
    pub fn y() -> Self {
        Word::generator(2, 1).unwrap()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn inverse(&self) -> Word {
        Word {
            rank: self.rank,
            letters: self.letters.iter().rev().map(|l| l.inverted()).collect(),
        }
    }

    fn check_rank(&self, other: &Word) -> Result<(), WordError> {
        if self.rank != other.rank {
            return Err(WordError::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        Ok(())
    }

    /// Reduced product `self * other`.
    pub fn concat(&self, other: &Word) -> Result<Word, WordError> {
        self.check_rank(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Word) -> Word {
        let mut letters = Vec::with_capacity(self.len() + other.len());
        letters.extend_from_slice(&self.letters);
        for &l in &other.letters {
            push_reduced(&mut letters, l);
        }
        Word {
            rank: self.rank,
            letters,
        }
    }

    pub fn pow(&self, exponent: i64) -> Word {
        let base = if exponent < 0 {
            self.inverse()
        } else {
            self.clone()
        };
        let mut out = Word::identity(self.rank);
        for _ in 0..exponent.unsigned_abs() {
            out = out.mul_unchecked(&base);
        }
        out
    }

    /// `g w g^-1`.
    pub fn conjugate_by(&self, g: &Word) -> Result<Word, WordError> {
        Ok(g.concat(self)?.concat(&g.inverse())?)
    }

    /// Homomorphic image of `self` under `x_i -> images[i]`.
    pub fn substitute(&self, images: &[Word]) -> Result<Word, WordError> {
        if images.len() != self.rank {
            return Err(WordError::RankMismatch {
                expected: self.rank,
                found: images.len(),
            });
        }
        let target = images[0].rank;
        if let Some(bad) = images.iter().find(|w| w.rank != target) {
            return Err(WordError::RankMismatch {
                expected: target,
                found: bad.rank,
            });
        }
        evaluate(self, images)
    }

    /// Swap the first two generators (`w(x, y) -> w(y, x)`).
    pub fn swap_xy(&self) -> Word {
        assert!(self.rank >= 2);
        let letters = self
            .letters
            .iter()
            .map(|l| match l.generator() {
                0 => Letter::new(1, l.inverse),
                1 => Letter::new(0, l.inverse),
                _ => *l,
            })
            .collect();
        // Swapping generators maps reduced words to reduced words.
        Word {
            rank: self.rank,
            letters,
        }
    }

    pub fn exponent_sum(&self, generator: usize) -> i64 {
        self.letters
            .iter()
            .filter(|l| l.generator() == generator)
            .map(|l| l.sign() as i64)
            .sum()
    }

    /// Every generator has exponent sum zero, i.e. the word lies in the
    /// commutator subgroup. Such words ignore central factors.
    pub fn is_balanced(&self) -> bool {
        (0..self.rank).all(|g| self.exponent_sum(g) == 0)
    }

    /// Number of occurrences of `generator` or its inverse.
    pub fn occurrences(&self, generator: usize) -> usize {
        self.letters.iter().filter(|l| l.generator() == generator).count()
    }

    /// Parse the text format into a word of the given rank.
    pub fn parse(text: &str, rank: usize) -> Result<Word, WordError> {
        if rank == 0 {
            return Err(WordError::ZeroRank);
        }
        let body = text.trim();
        if body == "1" {
            return Ok(Word::identity(rank));
        }
        let mut letters = Vec::with_capacity(body.len());
        for (offset, ch) in body.char_indices() {
            let lower = ch.to_ascii_lowercase();
            let index = ALPHABET
                .iter()
                .position(|&a| a == lower)
                .ok_or(WordError::InvalidCharacter { ch, offset })?;
            letters.push(Letter::new(index, ch.is_ascii_uppercase()));
        }
        reduce(rank, letters)
    }

    pub fn commutator(u: &Word, v: &Word) -> Result<Word, WordError> {
        commutator(u, v)
    }
}

/// Reduced form of `u v u^-1 v^-1`.
pub fn commutator(u: &Word, v: &Word) -> Result<Word, WordError> {
    u.check_rank(v)?;
    Ok(u.mul_unchecked(v)
        .mul_unchecked(&u.inverse())
        .mul_unchecked(&v.inverse()))
}

impl FromStr for Word {
    type Err = WordError;

    /// Rank 2 unless `z` occurs, in which case rank 3.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rank = if s.contains(['z', 'Z']) { 3 } else { 2 };
        Word::parse(s, rank)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        for l in &self.letters {
            match ALPHABET.get(l.generator()) {
                Some(&c) if l.inverse => write!(f, "{}", c.to_ascii_uppercase())?,
                Some(&c) => write!(f, "{c}")?,
                None if l.inverse => write!(f, "(g{})^-1", l.generator() + 1)?,
                None => write!(f, "g{}", l.generator() + 1)?,
            }
        }
        Ok(())
    }
}

impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A group in which word maps can be evaluated. Elements carry enough
/// information (for instance their dimension) to produce an identity.
pub trait GroupElement: Clone {
    fn identity_like(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn try_inverse(&self) -> Option<Self>;
}

/// Evaluate the word map: substitute `elements[i]` for `x_i` and its inverse
/// for `x_i^-1`, multiplying left to right.
pub fn evaluate<G: GroupElement>(w: &Word, elements: &[G]) -> Result<G, WordError> {
    if elements.len() != w.rank {
        return Err(WordError::RankMismatch {
            expected: w.rank,
            found: elements.len(),
        });
    }
    let mut inverses: Vec<Option<G>> = vec![None; elements.len()];
    for l in w.letters.iter().filter(|l| l.inverse) {
        let g = l.generator();
        if inverses[g].is_none() {
            inverses[g] = Some(
                elements[g]
                    .try_inverse()
                    .ok_or(WordError::NonInvertible(g))?,
            );
        }
    }
    let mut acc = elements[0].identity_like();
    for l in &w.letters {
        let factor = if l.inverse {
            inverses[l.generator()].as_ref().unwrap()
        } else {
            &elements[l.generator()]
        };
        acc = acc.mul(factor);
    }
    Ok(acc)
}

impl GroupElement for Word {
    fn identity_like(&self) -> Self {
        Word::identity(self.rank)
    }

    fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rank, rhs.rank, "rank mismatch in free group product");
        self.mul_unchecked(rhs)
    }

    fn try_inverse(&self) -> Option<Self> {
        Some(self.inverse())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 2x2 matrices over Z/2^64 with determinant +-1.
    #[derive(Clone, Debug, PartialEq, Eq)]
    struct Gl2Z([i64; 4]);

    impl GroupElement for Gl2Z {
        fn identity_like(&self) -> Self {
            Gl2Z([1, 0, 0, 1])
        }
        fn mul(&self, r: &Self) -> Self {
            let [a, b, c, d] = self.0;
            let [e, f, g, h] = r.0;
            let m = |p: i64, q: i64, r: i64, s: i64| p.wrapping_mul(q).wrapping_add(r.wrapping_mul(s));
            Gl2Z([m(a, e, b, g), m(a, f, b, h), m(c, e, d, g), m(c, f, d, h)])
        }
        fn try_inverse(&self) -> Option<Self> {
            let [a, b, c, d] = self.0;
            match a.wrapping_mul(d).wrapping_sub(b.wrapping_mul(c)) {
                1 => Some(Gl2Z([d, b.wrapping_neg(), c.wrapping_neg(), a])),
                -1 => Some(Gl2Z([d.wrapping_neg(), b, c, a.wrapping_neg()])),
                _ => None,
            }
        }
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn stack_reduce_oracle(s: &str) -> String {
        let mut out: Vec<char> = Vec::new();
        for c in s.chars() {
            let inv = if c.is_ascii_uppercase() {
                c.to_ascii_lowercase()
            } else {
                c.to_ascii_uppercase()
            };
            if out.last() == Some(&inv) {
                out.pop();
            } else {
                out.push(c);
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn cancellation() {
        assert!(w("xX").is_identity());
        assert_eq!(w("xyYx"), w("xx"));
        assert_eq!(w("xyYx").len(), 2);
    }

    #[test]
    fn concatenated_commutators_reduce_to_length_eight() {
        // [x,y] [x^-1,y] = xyXY . XyxY
        let raw = "xyXYXyxY";
        assert_eq!(stack_reduce_oracle(raw).len(), 8);
        let a = w("xyXY");
        let b = w("XyxY");
        assert_eq!(a.concat(&b).unwrap().len(), 8);
    }

    #[test]
    fn commutator_examples() {
        let c = commutator(&Word::x(), &Word::y()).unwrap();
        assert_eq!(c.to_string(), "xyXY");
        assert!(commutator(&Word::x(), &Word::x()).unwrap().is_identity());
        let a = w("xyXY");
        let b = w("XyxY");
        let raw = format!("{a}{b}{}{}", a.inverse(), b.inverse());
        assert_eq!(raw.len(), 16);
        let expected = stack_reduce_oracle(&raw);
        assert_eq!(expected.len(), 14);
        assert_eq!(commutator(&a, &b).unwrap().to_string(), expected);
    }

    #[test]
    fn substitution_examples() {
        let xy = w("xy");
        assert_eq!(xy.substitute(&[Word::x(), Word::y()]).unwrap(), xy);
        let imgs = [w("xyXY"), w("XyxY")];
        assert_eq!(Word::x().substitute(&imgs).unwrap(), w("xyXY"));
        let wprime = w("xyXY").substitute(&imgs).unwrap();
        assert_eq!(wprime, commutator(&imgs[0], &imgs[1]).unwrap());
        assert_eq!(wprime.len(), 14);
    }

    #[test]
    fn evaluation_examples() {
        let a = Gl2Z([1, 1, 0, 1]);
        let b = Gl2Z([1, 0, 1, 1]);
        let id = Gl2Z([1, 0, 0, 1]);
        let c = w("xyXY");
        assert_eq!(evaluate(&c, &[id.clone(), id.clone()]).unwrap(), id);
        assert_eq!(
            evaluate(&c, &[a.clone(), b.clone()]).unwrap(),
            Gl2Z([3, -1, 1, 0])
        );
        assert_eq!(evaluate(&w("xX"), &[a.clone(), b.clone()]).unwrap(), id);
        let singular = Gl2Z([1, 1, 1, 1]);
        assert_eq!(
            evaluate(&w("X"), &[singular, b]),
            Err(WordError::NonInvertible(0))
        );
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(
            "xyq".parse::<Word>(),
            Err(WordError::InvalidCharacter { ch: 'q', offset: 2 })
        ));
        assert!(matches!(
            Word::parse("x y", 2),
            Err(WordError::InvalidCharacter { ch: ' ', .. })
        ));
        assert!(matches!(
            Word::parse("z", 2),
            Err(WordError::GeneratorOutOfRange { index: 2, rank: 2 })
        ));
        assert_eq!(Word::parse("1", 2).unwrap(), Word::identity(2));
        assert_eq!(Word::identity(2).to_string(), "1");
    }

    #[test]
    fn balanced_words() {
        assert!(w("xyXY").is_balanced());
        assert!(!w("xxy").is_balanced());
        assert_eq!(w("xyXY").swap_xy(), w("yxYX"));
    }

    fn arb_letters() -> impl Strategy<Value = Vec<Letter>> {
        prop::collection::vec((0usize..2, any::<bool>()), 0..40)
            .prop_map(|v| v.into_iter().map(|(g, i)| Letter::new(g, i)).collect())
    }

    fn arb_word() -> impl Strategy<Value = Word> {
        arb_letters().prop_map(|l| reduce(2, l).unwrap())
    }

    fn arb_gl2z() -> impl Strategy<Value = Gl2Z> {
        // products of elementary transvections stay in SL2(Z)
        prop::collection::vec((any::<bool>(), -2i64..=2), 1..4).prop_map(|steps| {
            let mut m = Gl2Z([1, 0, 0, 1]);
            for (upper, t) in steps {
                let e = if upper {
                    Gl2Z([1, t, 0, 1])
                } else {
                    Gl2Z([1, 0, t, 1])
                };
                m = m.mul(&e);
            }
            m
        })
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(letters in arb_letters()) {
            let once = reduce(2, letters).unwrap();
            let twice = reduce(2, once.letters().iter().copied()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn reduce_matches_stack_oracle(letters in arb_letters()) {
            let raw: String = letters.iter().map(|l| {
                let c = ALPHABET[l.generator()];
                if l.is_inverse() { c.to_ascii_uppercase() } else { c }
            }).collect();
            prop_assert_eq!(reduce(2, letters).unwrap().to_string().replace('1', ""), stack_reduce_oracle(&raw));
        }

        #[test]
        fn substitution_length_bound(word in arb_word(), a in arb_word(), b in arb_word()) {
            let out = word.substitute(&[a.clone(), b.clone()]).unwrap();
            prop_assert!(out.len() <= word.len() * a.len().max(b.len()));
        }

        #[test]
        fn text_round_trip(word in arb_word()) {
            prop_assert_eq!(Word::parse(&word.to_string(), 2).unwrap(), word);
        }

        #[test]
        fn homomorphism_law(u in arb_word(), v in arb_word(), a in arb_gl2z(), b in arb_gl2z()) {
            let els = [a, b];
            let uv = u.concat(&v).unwrap();
            let lhs = evaluate(&uv, &els).unwrap();
            let rhs = evaluate(&u, &els).unwrap().mul(&evaluate(&v, &els).unwrap());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn substitution_commutes_with_evaluation(word in arb_word(), i0 in arb_word(), i1 in arb_word(), a in arb_gl2z(), b in arb_gl2z()) {
            let els = [a, b];
            let lhs = evaluate(&word.substitute(&[i0.clone(), i1.clone()]).unwrap(), &els).unwrap();
            let imgs = [evaluate(&i0, &els).unwrap(), evaluate(&i1, &els).unwrap()];
            prop_assert_eq!(lhs, evaluate(&word, &imgs).unwrap());
        }

        #[test]
        fn commutator_substitution_preserves_nontriviality(word in arb_word()) {
            let imgs = [Word::parse("xyXY", 2).unwrap(), Word::parse("XyxY", 2).unwrap()];
            let image = word.substitute(&imgs).unwrap();
            prop_assert_eq!(image.is_identity(), word.is_identity());
        }
    }
}
