//! Almost laws on unitary groups: Haar sampling, word-map defects, search by
//! iterated commutators, amplification, empirical certification, rigorous
//! certification on SU(2) through finite nets, and the neighborhood check for
//! pairs of nearly unitary matrices.
//!
//! Search candidates are kept as expression trees compiled to straight-line
//! programs, so evaluating a word of many thousand letters costs only as much
//! as its tree.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::freeword::{self, Word, WordError};
use crate::spectral::{gaussian_matrix, opnorm, CMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("at least one sample is required")]
    NoSamples,
    #[error("word must be nontrivial")]
    TrivialWord,
    #[error("word must have rank 2, found rank {0}")]
    Rank(usize),
    #[error("input matrix is not invertible")]
    NonInvertible,
    #[error("matrices must be square of equal size")]
    Shape,
    #[error("net spacing {0} outside (0, 1/4]")]
    Spacing(f64),
    #[error("net of {needed} pairs exceeds cap {cap}")]
    NetCap { needed: u64, cap: u64 },
    #[error("target must lie in [0, 2), got {0}")]
    Target(f64),
    #[error("word is not certified as an {0}-almost law")]
    NotCertified(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Haar-distributed sample from `U(d)`.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    let qr = gaussian_matrix(d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Unitary sample number `index` of the stream `seed`, independent of how
/// many other samples are drawn.
fn indexed_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `||w(A, B) - I||`.
pub fn defect(w: &Word, a: &CMatrix, b: &CMatrix) -> Result<f64, LawError> {
    if w.rank() != 2 {
        return Err(LawError::Rank(w.rank()));
    }
    let d = a.nrows();
    if a.ncols() != d || b.nrows() != d || b.ncols() != d {
        return Err(LawError::Shape);
    }
    let v = freeword::evaluate(w, &[a.clone(), b.clone()]).map_err(|_| LawError::NonInvertible)?;
    Ok(opnorm(&(v - CMatrix::identity(d, d))))
}

/// `[w(x,y), w(y,x)]`, falling back to `[w, x w x^-1]` and then
/// `[w, y w y^-1]` when the previous choice reduces to the identity.
pub fn amplify(w: &Word) -> Result<Word, LawError> {
    if w.rank() != 2 {
        return Err(LawError::Rank(w.rank()));
    }
    if w.is_identity() {
        return Err(LawError::TrivialWord);
    }
    for partner in amplify_partners(w) {
        let c = freeword::commutator(w, &partner)?;
        if !c.is_identity() {
            return Ok(c);
        }
    }
    Err(LawError::TrivialWord)
}

fn amplify_partners(w: &Word) -> [Word; 3] {
    let x = Word::x();
    let y = Word::y();
    [
        w.swap_xy(),
        w.conjugate_by(&x).expect("rank 2"),
        w.conjugate_by(&y).expect("rank 2"),
    ]
}

// ---------------------------------------------------------------------------
// Expression trees and straight-line programs

#[derive(Debug)]
enum Expr {
    Word(Word),
    Comm(Arc<Expr>, Arc<Expr>),
    /// `g u g^-1` for generator `g`.
    Conj(usize, Arc<Expr>),
    /// `u(y, x)`.
    Swap(Arc<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Word(w) => write!(f, "{w}"),
            Expr::Comm(u, v) => write!(f, "[{u}, {v}]"),
            Expr::Conj(g, u) => write!(f, "{}({u}){}", ["x", "y"][*g], ["X", "Y"][*g]),
            Expr::Swap(u) => write!(f, "swap({u})"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Instr {
    One,
    Gen(usize),
    Inv(usize),
    Mul(usize, usize),
}

/// Straight-line program over two generators.
#[derive(Debug)]
struct Program {
    instrs: Vec<Instr>,
    output: usize,
    /// Letter count of the fully expanded, unreduced product.
    unfolded: f64,
}

struct Compiler {
    instrs: Vec<Instr>,
    unfolded: Vec<f64>,
    memo: HashMap<(usize, bool), usize>,
    gens: HashMap<(usize, bool), usize>,
}

impl Compiler {
    fn push(&mut self, i: Instr, unfolded: f64) -> usize {
        self.instrs.push(i);
        self.unfolded.push(unfolded);
        self.instrs.len() - 1
    }

    fn letter(&mut self, g: usize, inverse: bool) -> usize {
        if let Some(&i) = self.gens.get(&(g, inverse)) {
            return i;
        }
        let base = match self.gens.get(&(g, false)) {
            Some(&i) => i,
            None => {
                let i = self.push(Instr::Gen(g), 1.0);
                self.gens.insert((g, false), i);
                i
            }
        };
        if !inverse {
            return base;
        }
        let i = self.push(Instr::Inv(base), 1.0);
        self.gens.insert((g, true), i);
        i
    }

    fn mul(&mut self, a: usize, b: usize) -> usize {
        let u = self.unfolded[a] + self.unfolded[b];
        self.push(Instr::Mul(a, b), u)
    }

    fn inv(&mut self, a: usize) -> usize {
        let u = self.unfolded[a];
        self.push(Instr::Inv(a), u)
    }

    fn compile(&mut self, e: &Arc<Expr>, swapped: bool) -> usize {
        let key = (Arc::as_ptr(e) as usize, swapped);
        if let Some(&i) = self.memo.get(&key) {
            return i;
        }
        let out = match &**e {
            Expr::Word(w) => {
                if w.is_identity() {
                    self.push(Instr::One, 0.0)
                } else {
                    let mut acc: Option<usize> = None;
                    for l in w.letters() {
                        let g = if swapped { 1 - l.generator() } else { l.generator() };
                        let n = self.letter(g, l.is_inverse());
                        acc = Some(match acc {
                            None => n,
                            Some(a) => self.mul(a, n),
                        });
                    }
                    acc.unwrap()
                }
            }
            Expr::Comm(u, v) => {
                let a = self.compile(u, swapped);
                let b = self.compile(v, swapped);
                let ab = self.mul(a, b);
                let ai = self.inv(a);
                let bi = self.inv(b);
                let aibi = self.mul(ai, bi);
                self.mul(ab, aibi)
            }
            Expr::Conj(g, u) => {
                let g = if swapped { 1 - g } else { *g };
                let a = self.compile(u, swapped);
                let gn = self.letter(g, false);
                let gi = self.letter(g, true);
                let left = self.mul(gn, a);
                self.mul(left, gi)
            }
            Expr::Swap(u) => self.compile(u, !swapped),
        };
        self.memo.insert(key, out);
        out
    }
}

impl Program {
    fn new(e: &Arc<Expr>) -> Program {
        let mut c = Compiler {
            instrs: Vec::new(),
            unfolded: Vec::new(),
            memo: HashMap::new(),
            gens: HashMap::new(),
        };
        let output = c.compile(e, false);
        Program {
            unfolded: c.unfolded[output],
            instrs: c.instrs,
            output,
        }
    }

    /// Evaluation at unitary arguments, inverting by the adjoint.
    fn eval_unitary<M: Elem>(&self, a: &M, b: &M) -> M {
        let mut vals: Vec<M> = Vec::with_capacity(self.instrs.len());
        for ins in &self.instrs {
            let v = match *ins {
                Instr::One => a.identity_like(),
                Instr::Gen(0) => a.clone(),
                Instr::Gen(_) => b.clone(),
                Instr::Inv(i) => vals[i].adjoint(),
                Instr::Mul(i, j) => vals[i].mul(&vals[j]),
            };
            vals.push(v);
        }
        vals.swap_remove(self.output)
    }

    /// Evaluation at arbitrary invertible arguments given with their inverses.
    fn eval_general<M: Elem>(&self, a: (&M, &M), b: (&M, &M)) -> M {
        let mut vals: Vec<(M, M)> = Vec::with_capacity(self.instrs.len());
        for ins in &self.instrs {
            let v = match *ins {
                Instr::One => (a.0.identity_like(), a.0.identity_like()),
                Instr::Gen(0) => (a.0.clone(), a.1.clone()),
                Instr::Gen(_) => (b.0.clone(), b.1.clone()),
                Instr::Inv(i) => (vals[i].1.clone(), vals[i].0.clone()),
                Instr::Mul(i, j) => (vals[i].0.mul(&vals[j].0), vals[j].1.mul(&vals[i].1)),
            };
            vals.push(v);
        }
        vals.swap_remove(self.output).0
    }
}

/// A rank-2 word together with an expression tree producing it.
#[derive(Clone)]
pub struct Law {
    word: Word,
    expr: Arc<Expr>,
    program: Arc<Program>,
}

impl fmt::Debug for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Law")
            .field("length", &self.word.len())
            .field("expression", &self.expression())
            .finish()
    }
}

impl Law {
    fn from_expr(word: Word, expr: Arc<Expr>) -> Law {
        let program = Arc::new(Program::new(&expr));
        Law { word, expr, program }
    }

    pub fn from_word(word: Word) -> Result<Law, LawError> {
        if word.rank() != 2 {
            return Err(LawError::Rank(word.rank()));
        }
        let expr = Arc::new(Expr::Word(word.clone()));
        Ok(Law::from_expr(word, expr))
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_identity()
    }

    /// Bracket notation of the expression tree.
    pub fn expression(&self) -> String {
        self.expr.to_string()
    }

    /// Instruction count of the compiled program.
    pub fn program_size(&self) -> usize {
        self.program.instrs.len()
    }

    pub fn commutator(&self, other: &Law) -> Law {
        let word = freeword::commutator(&self.word, &other.word).expect("rank 2");
        Law::from_expr(word, Arc::new(Expr::Comm(self.expr.clone(), other.expr.clone())))
    }

    fn conjugated(&self, g: usize) -> Law {
        let gw = if g == 0 { Word::x() } else { Word::y() };
        let word = self.word.conjugate_by(&gw).expect("rank 2");
        Law::from_expr(word, Arc::new(Expr::Conj(g, self.expr.clone())))
    }

    fn swapped(&self) -> Law {
        Law::from_expr(self.word.swap_xy(), Arc::new(Expr::Swap(self.expr.clone())))
    }

    /// `[u, g u g^-1]`.
    pub fn contract(&self, g: usize) -> Law {
        self.commutator(&self.conjugated(g))
    }

    /// Same word as [`amplify`], keeping the tree.
    pub fn amplify(&self) -> Result<Law, LawError> {
        if self.word.is_identity() {
            return Err(LawError::TrivialWord);
        }
        for partner in [self.swapped(), self.conjugated(0), self.conjugated(1)] {
            let c = self.commutator(&partner);
            if !c.word.is_identity() {
                return Ok(c);
            }
        }
        Err(LawError::TrivialWord)
    }

    /// `||w(A, B) - I||` for unitary `A`, `B`.
    pub fn unitary_defect(&self, a: &CMatrix, b: &CMatrix) -> f64 {
        let v = self.program.eval_unitary(a, b);
        v.defect()
    }
}

// ---------------------------------------------------------------------------
// Group element backends

trait Elem: Clone + Send + Sync {
    fn from_cmatrix(m: &CMatrix) -> Self;
    fn identity_like(&self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn adjoint(&self) -> Self;
    /// `||M - I||`
    fn defect(&self) -> f64;
}

impl Elem for CMatrix {
    fn from_cmatrix(m: &CMatrix) -> Self {
        m.clone()
    }
    fn identity_like(&self) -> Self {
        CMatrix::identity(self.nrows(), self.ncols())
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn adjoint(&self) -> Self {
        nalgebra::Matrix::adjoint(self)
    }
    fn defect(&self) -> f64 {
        opnorm(&(self - CMatrix::identity(self.nrows(), self.ncols())))
    }
}

type M2 = Matrix2<Complex64>;

impl Elem for M2 {
    fn from_cmatrix(m: &CMatrix) -> Self {
        M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
    }
    fn identity_like(&self) -> Self {
        M2::identity()
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn adjoint(&self) -> Self {
        nalgebra::Matrix::adjoint(self)
    }
    fn defect(&self) -> f64 {
        norm2x2(&(self - M2::identity()))
    }
}

/// Largest singular value of a 2x2 complex matrix in closed form.
fn norm2x2(m: &M2) -> f64 {
    // largest eigenvalue of the Hermitian [[p, q], [conj q, r]] = M* M
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let p = a.norm_sqr() + c.norm_sqr();
    let r = b.norm_sqr() + d.norm_sqr();
    let q = a.conj() * b + c.conj() * d;
    let h = 0.5 * (p - r);
    (0.5 * (p + r) + (h * h + q.norm_sqr()).sqrt()).sqrt()
}

/// `[[a, b], [-conj b, conj a]]` in SU(2).
#[derive(Clone, Copy, Debug)]
struct Su2 {
    a: Complex64,
    b: Complex64,
}

impl Elem for Su2 {
    fn from_cmatrix(m: &CMatrix) -> Self {
        Su2 {
            a: m[(0, 0)],
            b: m[(0, 1)],
        }
    }
    fn identity_like(&self) -> Self {
        Su2 {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }
    fn mul(&self, o: &Self) -> Self {
        Su2 {
            a: self.a * o.a - self.b * o.b.conj(),
            b: self.a * o.b + self.b * o.a.conj(),
        }
    }
    fn adjoint(&self) -> Self {
        Su2 {
            a: self.a.conj(),
            b: -self.b,
        }
    }
    fn defect(&self) -> f64 {
        ((self.a - 1.0).norm_sqr() + self.b.norm_sqr()).sqrt()
    }
}

#[cfg(test)]
impl Su2 {
    fn to_cmatrix(self) -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[self.a, self.b, -self.b.conj(), self.a.conj()])
    }
}

fn comm_unitary<M: Elem>(u: &M, v: &M) -> M {
    u.mul(v).mul(&u.adjoint()).mul(&v.adjoint())
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GroupSpec {
    pub d: usize,
    pub group: String,
}

impl GroupSpec {
    fn unitary(d: usize) -> Self {
        GroupSpec {
            d,
            group: format!("U({d})"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertResult {
    pub word: Word,
    pub word_length: usize,
    pub group: GroupSpec,
    pub empirical_sup: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub rigorous_bound: Option<f64>,
    pub net_spacing: Option<f64>,
}

impl CertResult {
    /// The strongest available bound on the sup-defect.
    pub fn certified_bound(&self) -> f64 {
        self.rigorous_bound.unwrap_or(self.empirical_sup)
    }

    pub fn is_rigorous(&self) -> bool {
        self.rigorous_bound.is_some()
    }
}

fn haar_pair(d: usize, seed: u64, index: u64) -> (CMatrix, CMatrix) {
    let mut rng = indexed_rng(seed, index);
    let a = haar_unitary(d, &mut rng);
    let b = haar_unitary(d, &mut rng);
    (a, b)
}

fn empirical_max<M: Elem>(law: &Law, d: usize, samples: usize, seed: u64) -> f64 {
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (a, b) = haar_pair(d, seed, i);
            law.program
                .eval_unitary(&M::from_cmatrix(&a), &M::from_cmatrix(&b))
                .defect()
        })
        .reduce(|| 0.0, f64::max)
}

/// Max defect over `samples` Haar pairs in `U(d)`.
pub fn certify_empirical(law: &Law, d: usize, samples: usize, seed: u64) -> Result<CertResult, LawError> {
    if d == 0 {
        return Err(LawError::ZeroDimension);
    }
    if samples == 0 {
        return Err(LawError::NoSamples);
    }
    let sup = if d == 2 {
        empirical_max::<M2>(law, d, samples, seed)
    } else {
        empirical_max::<CMatrix>(law, d, samples, seed)
    };
    Ok(CertResult {
        word: law.word.clone(),
        word_length: law.len(),
        group: GroupSpec::unitary(d),
        empirical_sup: sup,
        sample_count: samples,
        seed,
        rigorous_bound: None,
        net_spacing: None,
    })
}

/// Default cap on the number of net pairs.
pub const DEFAULT_NET_CAP: u64 = 50_000_000;

struct Su2Net {
    thetas: Vec<f64>,
    /// Points `(a, b)` with `|a|^2 + b^2 = 1`, `b >= 0`.
    partners: Vec<Su2>,
}

/// Covering set for pairs in SU(2) up to simultaneous conjugation: every pair
/// is conjugate to `(diag(e^{it}, e^{-it}), B)` with `t` in `[0, pi]` and the
/// off-diagonal entry of `B` real and nonnegative, and each such pair lies
/// within `eta` in operator norm, in each coordinate, of a net pair.
fn su2_net(eta: f64) -> Su2Net {
    use std::f64::consts::{FRAC_PI_2, PI};
    let h = 2.0 * eta;
    let m = (PI / h).ceil() as usize;
    let thetas = (0..m).map(|j| ((j as f64 + 0.5) * h).min(PI)).collect();
    let rings = (FRAC_PI_2 / eta).ceil() as usize;
    let mut partners = Vec::new();
    for i in 0..rings {
        let phi = ((i as f64 + 0.5) * eta).min(FRAC_PI_2);
        let hi = ((i as f64 + 1.0) * eta).min(FRAC_PI_2);
        let count = ((2.0 * PI * hi.sin() / eta).ceil() as usize).max(1);
        for j in 0..count {
            let psi = 2.0 * PI * (j as f64 + 0.5) / count as f64;
            partners.push(Su2 {
                a: Complex64::from_polar(phi.sin(), psi),
                b: Complex64::new(phi.cos(), 0.0),
            });
        }
    }
    Su2Net { thetas, partners }
}

/// Number of pairs the net at spacing `eta` evaluates.
pub fn su2_net_size(eta: f64) -> u64 {
    let n = su2_net(eta);
    n.thetas.len() as u64 * n.partners.len() as u64
}

/// Rigorous sup-defect bound on `SU(2)`: the max over the net plus
/// `2 |w| eta`, plus a floating-point allowance.
pub fn certify_su2_net(law: &Law, eta: f64, pair_cap: u64) -> Result<CertResult, LawError> {
    if !(eta > 0.0 && eta <= 0.25) {
        return Err(LawError::Spacing(eta));
    }
    let net = su2_net(eta);
    let needed = net.thetas.len() as u64 * net.partners.len() as u64;
    if needed > pair_cap {
        return Err(LawError::NetCap {
            needed,
            cap: pair_cap,
        });
    }
    let sup = net
        .thetas
        .par_iter()
        .map(|&t| {
            let a = Su2 {
                a: Complex64::from_polar(1.0, t),
                b: Complex64::new(0.0, 0.0),
            };
            net.partners
                .iter()
                .map(|b| law.program.eval_unitary(&a, b).defect())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let rounding = 16.0 * f64::EPSILON * (law.program.unfolded + 4.0);
    let rigorous = sup + 2.0 * law.len() as f64 * eta + rounding;
    Ok(CertResult {
        word: law.word.clone(),
        word_length: law.len(),
        group: GroupSpec {
            d: 2,
            group: "SU(2)".into(),
        },
        empirical_sup: sup,
        sample_count: needed as usize,
        seed: 0,
        rigorous_bound: Some(rigorous),
        net_spacing: Some(eta),
    })
}

// ---------------------------------------------------------------------------
// Search

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Maximum number of candidate words examined.
    pub budget: usize,
    pub beam_width: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
    /// Exponent of the power mean used for ranking.
    pub p: f64,
    pub max_len: usize,
    pub leaf_power: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            budget: 20_000,
            beam_width: 16,
            train_samples: 1024,
            validation_samples: 16384,
            p: 16.0,
            max_len: 300_000,
            leaf_power: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub cert: CertResult,
    pub success: bool,
    pub target: f64,
    pub expression: String,
    pub train_power_mean: f64,
    pub examined: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub law: Law,
}

struct Candidate<M> {
    law: Law,
    depth: u32,
    score: f64,
    val_max: f64,
    values: Vec<M>,
}

struct Panel<M> {
    a: Vec<M>,
    b: Vec<M>,
    train: usize,
}

impl<M: Elem> Panel<M> {
    fn new(d: usize, seed: u64, train: usize, val: usize) -> Self {
        // training and validation pairs come from disjoint index ranges
        let pairs: Vec<(M, M)> = (0..(train + val) as u64)
            .into_par_iter()
            .map(|i| {
                let (a, b) = haar_pair(d, seed, i);
                (M::from_cmatrix(&a), M::from_cmatrix(&b))
            })
            .collect();
        let (a, b) = pairs.into_iter().unzip();
        Panel { a, b, train }
    }

    fn eval(&self, law: &Law, swapped: bool) -> Vec<M> {
        (0..self.a.len())
            .into_par_iter()
            .map(|i| {
                if swapped {
                    law.program.eval_unitary(&self.b[i], &self.a[i])
                } else {
                    law.program.eval_unitary(&self.a[i], &self.b[i])
                }
            })
            .collect()
    }
}

fn score_values<M: Elem>(values: &[M], train: usize, p: f64) -> (f64, f64) {
    let defects: Vec<f64> = values.par_iter().map(|v| v.defect()).collect();
    let pm = (defects[..train].iter().map(|d| d.powf(p)).sum::<f64>() / train as f64).powf(1.0 / p);
    let vmax = defects[train..].iter().cloned().fold(0.0, f64::max);
    (pm, vmax)
}

/// Beam search for a word with small max defect on `U(d)`.
///
/// Leaves are `x^k`, `y^k`, `(xy)^k` and `[x, y]`. Moves are the contractions
/// `[u, g u g^-1]` for `g` in `{x, y}` and commutators of two candidates that
/// have each been contracted at least once; each round also amplifies the
/// candidate with the best validation score. Candidates are
/// ranked by the power mean of their defect on a training panel; success is
/// judged by the max defect on a disjoint validation panel, which is what the
/// returned certificate reports.
pub fn search(d: usize, target: f64, seed: u64, opts: &SearchOptions) -> Result<SearchReport, LawError> {
    if d == 0 {
        return Err(LawError::ZeroDimension);
    }
    if !(0.0..2.0).contains(&target) {
        return Err(LawError::Target(target));
    }
    if d == 2 {
        search_with::<M2>(d, target, seed, opts)
    } else {
        search_with::<CMatrix>(d, target, seed, opts)
    }
}

fn search_with<M: Elem>(d: usize, target: f64, seed: u64, opts: &SearchOptions) -> Result<SearchReport, LawError> {
    let panel: Panel<M> = Panel::new(d, seed, opts.train_samples.max(1), opts.validation_samples.max(1));
    let mut seen: HashSet<Word> = HashSet::new();
    let mut examined = 0usize;
    let mut pool: Vec<Candidate<M>> = Vec::new();

    let make = |law: Law, depth: u32, values: Vec<M>| -> Candidate<M> {
        let (score, val_max) = score_values(&values, panel.train, opts.p);
        Candidate {
            law,
            depth,
            score,
            val_max,
            values,
        }
    };

    let mut leaves = Vec::new();
    for k in 1..=opts.leaf_power as i64 {
        leaves.push(Word::x().pow(k));
        leaves.push(Word::y().pow(k));
        leaves.push(Word::x().concat(&Word::y()).unwrap().pow(k));
    }
    leaves.push(freeword::commutator(&Word::x(), &Word::y()).unwrap());
    for w in leaves {
        examined += 1;
        if seen.insert(w.clone()) {
            let law = Law::from_word(w)?;
            let values = panel.eval(&law, false);
            pool.push(make(law, 0, values));
        }
    }

    let rank = |pool: &mut Vec<Candidate<M>>| {
        pool.sort_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.law.len().cmp(&b.law.len()))
        });
    };
    let mut best: (f64, f64, Law) = pool
        .iter()
        .map(|c| (c.val_max, c.score, c.law.clone()))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.2.len().cmp(&b.2.len())))
        .unwrap();
    rank(&mut pool);
    pool.truncate(opts.beam_width);

    let mut iterations = 0;
    while best.0 >= target && examined < opts.budget {
        iterations += 1;
        let mut fresh: Vec<Candidate<M>> = Vec::new();
        let mut consider = |law: Law, depth: u32, values: Option<Vec<M>>, fresh: &mut Vec<Candidate<M>>, examined: &mut usize| {
            if *examined >= opts.budget {
                return;
            }
            *examined += 1;
            if law.word.is_identity() || law.len() > opts.max_len || !seen.insert(law.word.clone()) {
                return;
            }
            let values = values.unwrap_or_else(|| panel.eval(&law, false));
            fresh.push(make(law, depth, values));
        };
        for c in &pool {
            for g in [1usize, 0] {
                let law = c.law.contract(g);
                let gv = if g == 0 { &panel.a } else { &panel.b };
                let values: Vec<M> = c
                    .values
                    .par_iter()
                    .zip(gv.par_iter())
                    .map(|(u, h)| comm_unitary(u, &h.mul(u).mul(&h.adjoint())))
                    .collect();
                consider(law, c.depth + 1, Some(values), &mut fresh, &mut examined);
            }
        }
        if let Ok(law) = best.2.amplify() {
            consider(law, 1, None, &mut fresh, &mut examined);
        }
        for i in 0..pool.len() {
            for j in i + 1..pool.len() {
                let (u, v) = (&pool[i], &pool[j]);
                if u.depth >= 1 && v.depth >= 1 {
                    let law = u.law.commutator(&v.law);
                    let values: Vec<M> = u
                        .values
                        .par_iter()
                        .zip(v.values.par_iter())
                        .map(|(p, q)| comm_unitary(p, q))
                        .collect();
                    consider(law, u.depth.min(v.depth), Some(values), &mut fresh, &mut examined);
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        for c in &fresh {
            if c.val_max < best.0 || (c.val_max == best.0 && c.law.len() < best.2.len()) {
                best = (c.val_max, c.score, c.law.clone());
            }
        }
        pool.extend(fresh);
        rank(&mut pool);
        pool.truncate(opts.beam_width);
    }

    let (val_max, score, law) = best;
    Ok(SearchReport {
        cert: CertResult {
            word: law.word.clone(),
            word_length: law.len(),
            group: GroupSpec::unitary(d),
            empirical_sup: val_max,
            sample_count: opts.validation_samples.max(1),
            seed,
            rigorous_bound: None,
            net_spacing: None,
        },
        success: val_max < target,
        target,
        expression: law.expression(),
        train_power_mean: score,
        examined,
        iterations,
        law,
    })
}

// ---------------------------------------------------------------------------
// Neighborhood check

#[derive(Clone, Debug, Serialize)]
pub struct ViolationWitness {
    /// Row-major `[re, im]` entries.
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighborhoodReport {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_defect: f64,
    pub violations: usize,
    pub passed: bool,
    pub witness: Option<ViolationWitness>,
}

fn entries(m: &CMatrix) -> Vec<[f64; 2]> {
    m.transpose().iter().map(|z| [z.re, z.im]).collect()
}

/// `U1 diag(e^t) U2` with `|t_i| < delta`, and its inverse.
fn near_unitary(d: usize, delta: f64, rng: &mut impl Rng) -> (CMatrix, CMatrix) {
    let u1 = haar_unitary(d, rng);
    let u2 = haar_unitary(d, rng);
    let t: Vec<f64> = (0..d)
        .map(|_| rng.random_range(-delta * (1.0 - f64::EPSILON)..delta))
        .collect();
    let dm = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        t.iter().map(|&s| Complex64::new(s.exp(), 0.0)),
    ));
    let di = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        t.iter().map(|&s| Complex64::new((-s).exp(), 0.0)),
    ));
    let a = &u1 * dm * &u2;
    let ai = u2.adjoint() * di * u1.adjoint();
    (a, ai)
}

/// Samples pairs with `||A||, ||A^-1||, ||B||, ||B^-1|| < e^delta`,
/// `delta = eps / (8 |w|)`, and checks `||w(A, B) - I|| < eps` on each.
/// The law must come with a certificate bounding its sup-defect by `eps / 2`.
pub fn neighborhood_check(
    law: &Law,
    cert: &CertResult,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<NeighborhoodReport, LawError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LawError::Epsilon(eps));
    }
    if law.is_empty() {
        return Err(LawError::TrivialWord);
    }
    if cert.word != law.word || cert.certified_bound() >= eps / 2.0 {
        return Err(LawError::NotCertified(eps / 2.0));
    }
    if trials == 0 {
        return Err(LawError::NoSamples);
    }
    let d = cert.group.d;
    let delta = eps / (8.0 * law.len() as f64);
    let results: Vec<(f64, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = indexed_rng(seed, i);
            let (a, ai) = near_unitary(d, delta, &mut rng);
            let (b, bi) = near_unitary(d, delta, &mut rng);
            let v = if d == 2 {
                let c = |m: &CMatrix| M2::from_cmatrix(m);
                law.program
                    .eval_general(((&c(&a)), (&c(&ai))), ((&c(&b)), (&c(&bi))))
                    .defect()
            } else {
                law.program.eval_general((&a, &ai), (&b, &bi)).defect()
            };
            (v, i as usize)
        })
        .collect();
    let max_defect = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let bad: Vec<&(f64, usize)> = results.iter().filter(|r| r.0 >= eps).collect();
    let witness = bad.first().map(|&&(v, i)| {
        let mut rng = indexed_rng(seed, i as u64);
        let (a, _) = near_unitary(d, delta, &mut rng);
        let (b, _) = near_unitary(d, delta, &mut rng);
        ViolationWitness {
            a: entries(&a),
            b: entries(&b),
            defect: v,
        }
    });
    Ok(NeighborhoodReport {
        epsilon: eps,
        delta,
        trials,
        seed,
        max_defect,
        violations: bad.len(),
        passed: bad.is_empty(),
        witness,
    })
}
