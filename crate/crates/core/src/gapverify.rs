//! Height-gap certificates for a symmetric finite set `F` of matrices over a
//! number field.
//!
//! The pipeline finds a witness pair in a power of `F`, forms the exact norm
//! `Q` of `alpha = Tr(w(A, B) - I)`, splits on the size of `|Q|` and reports a
//! lower bound for the normalized height together with the evidence used.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::almostlaw::CertResult;
use crate::freeword::{self, evaluate, GroupElement, Word, WordError};
use crate::heights::{
    exact_product_set, height_matrix, nonarch_log_lambda, normalized_height_bracket, HeightError, MatrixOverK,
};
use crate::numfield::rational::{format_rational, ln_abs_interval};
use crate::numfield::{small_prime, FieldElement, NumberField};
use crate::spectral::{self, bochi_check, minimal_norm_estimate, CheckStatus, MatrixSet, MinNormOptions, SpectralError};

/// Tolerance for the consistency assertions between independent routes.
pub const CROSSCHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GapError {
    #[error("no witness pair found in F^n for n <= {0}")]
    Inconclusive(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("matrix set is not closed under inverses; add them first")]
    NotSymmetric,
    #[error("member {0} is singular")]
    Singular(usize),
    #[error("analysis requested for the wrong case")]
    WrongCase,
    #[error("certified bound {bound} exceeds the height bracket upper value {upper}")]
    Crosscheck { bound: f64, upper: f64 },
    #[error("inequality step '{0}' failed numerically")]
    Chain(String),
    #[error("product formula check failed for alpha")]
    ProductFormula,
    #[error(transparent)]
    Height(#[from] HeightError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Field(#[from] crate::numfield::FieldError),
}

#[derive(Clone, Debug)]
pub struct GapConfig {
    pub epsilon: f64,
    /// Defaults to `1/(2d)`.
    pub c: Option<f64>,
    pub q_max: usize,
    pub n_search_max: usize,
    pub word: Word,
    /// Almost-law certificate for `word`, used to grade Case 1b.
    pub law_cert: Option<CertResult>,
    pub precision_bits: u32,
    /// Depth of the normalized-height bracket attached as crosscheck.
    pub bracket_n_max: usize,
    pub product_cap: usize,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            epsilon: 0.25,
            c: None,
            q_max: 10,
            n_search_max: 3,
            word: freeword::commutator(&Word::x(), &Word::y()).unwrap(),
            law_cert: None,
            precision_bits: 53,
            bracket_n_max: 4,
            product_cap: 1 << 16,
            seed: 0,
        }
    }
}

impl GapConfig {
    fn c_for(&self, d: usize) -> f64 {
        self.c.unwrap_or(1.0 / (2.0 * d as f64))
    }

    fn validate(&self, d: usize) -> Result<(), GapError> {
        let c = self.c_for(d);
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(GapError::Parameter(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(GapError::Parameter(format!("c must lie in (0, 1), got {c}")));
        }
        if self.word.is_identity() {
            return Err(GapError::Parameter("word is trivial".into()));
        }
        if self.word.rank() != 2 {
            return Err(GapError::Parameter("word must be in two letters".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Constants

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Constants {
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps_d: f64,
    #[serde(skip)]
    pub c: f64,
    /// The three expressions for `eps_d`.
    #[serde(skip)]
    pub identity: [f64; 3],
}

pub fn constants(d: usize, epsilon: f64, wlen: usize, n: usize, c: f64) -> Result<Constants, GapError> {
    if d == 0 || wlen == 0 || n == 0 {
        return Err(GapError::Parameter("d, word length and n must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(GapError::Parameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(GapError::Parameter(format!("c must lie in (0, 1), got {c}")));
    }
    let (df, wf, nf) = (d as f64, wlen as f64, n as f64);
    let l = (1.0 / epsilon).ln();
    let lc = (1.0 / c).ln();
    let l2d = (2.0 * df).ln();
    let l2de = (2.0 * df / epsilon).ln();
    let delta = epsilon / (8.0 * wf);
    let x = wf * delta * delta / (16.0 * df * lc);
    let eps2 = l / (l2de + x);
    // l - eps2 * l2de rewritten as eps2 * x, which avoids cancellation
    let eps1 = 0.5 * eps2 * x;
    let first = eps2 * delta * delta / (32.0 * nf * df * lc);
    let second = (-eps1 + (1.0 - eps2) * l - eps2 * l2d) / (nf * wf);
    let third = eps1 / (nf * wf);
    Ok(Constants {
        delta,
        eps1,
        eps2,
        eps_d: first,
        c,
        identity: [first, second, third],
    })
}

/// `1 / (n (d^2 wlen^2 + wlen))`
pub fn epsilon_d_order(d: usize, wlen: usize, n: usize) -> f64 {
    let (d, w, n) = (d as f64, wlen as f64, n as f64);
    1.0 / (n * (d * d * w * w + w))
}

// ---------------------------------------------------------------------------
// Witness

#[derive(Clone, Debug, Serialize)]
pub struct WitnessPair {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: MatrixOverK,
    #[serde(rename = "B")]
    pub b: MatrixOverK,
    pub n_prime: usize,
    /// `(A1, B1)` in `F^{n'}` with `A = [A1, B1]`, `B = [A1^-1, B1]`.
    pub base_pair: [MatrixOverK; 2],
    /// Position of `(A1, B1)` in the ordered list of pairs from `F^{n'}`.
    pub pair_index: usize,
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub pair: WitnessPair,
    /// `w(A, B)`
    pub value: MatrixOverK,
    pub alpha: FieldElement,
}

/// Adds missing inverses, keeping the original order first.
pub fn symmetrize(f: &[MatrixOverK]) -> Result<Vec<MatrixOverK>, GapError> {
    let mut out = f.to_vec();
    for (i, a) in f.iter().enumerate() {
        let inv = a.inverse().map_err(|_| GapError::Singular(i))?;
        if !out.contains(&inv) {
            out.push(inv);
        }
    }
    Ok(out)
}

pub fn is_symmetric(f: &[MatrixOverK]) -> Result<bool, GapError> {
    for (i, a) in f.iter().enumerate() {
        let inv = a.inverse().map_err(|_| GapError::Singular(i))?;
        if !f.contains(&inv) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn alpha_of(value: &MatrixOverK) -> FieldElement {
    let d = value.dimension() as i64;
    &value.trace() - &value.field().from_int(d)
}

/// First pair `(A1, B1)` of `F^{n'}`, in lexicographic order of the exact
/// product list, with `Tr(w'(A1, B1) - I) != 0`.
pub fn find_witness(f: &[MatrixOverK], w: &Word, n_search_max: usize, cap: usize) -> Result<Witness, GapError> {
    if f.is_empty() {
        return Err(HeightError::Empty.into());
    }
    if !is_symmetric(f)? {
        return Err(GapError::NotSymmetric);
    }
    for n_prime in 1..=n_search_max {
        let level = exact_product_set(f, n_prime, cap)?;
        let inverses: Vec<MatrixOverK> = level.iter().map(|a| a.inverse()).collect::<Result<_, _>>()?;
        let m = level.len();
        let found = (0..m * m).into_par_iter().find_map_first(|idx| {
            let (i, j) = (idx / m, idx % m);
            let (a1, b1) = (&level[i], &level[j]);
            let b1_inv = &inverses[j];
            let a = a1.mul(b1).mul(&inverses[i]).mul(b1_inv);
            let b = inverses[i].mul(b1).mul(a1).mul(b1_inv);
            let value = evaluate(w, &[a.clone(), b.clone()]).ok()?;
            let alpha = alpha_of(&value);
            (!alpha.is_zero()).then(|| (idx, a, b, value, alpha))
        });
        if let Some((idx, a, b, value, alpha)) = found {
            debug_assert!(a.det().is_one() && b.det().is_one());
            if !a.det().is_one() || !b.det().is_one() {
                return Err(GapError::Chain("det = 1".into()));
            }
            let (i, j) = (idx / m, idx % m);
            return Ok(Witness {
                pair: WitnessPair {
                    n: 4 * n_prime,
                    a,
                    b,
                    n_prime,
                    base_pair: [level[i].clone(), level[j].clone()],
                    pair_index: idx,
                },
                value,
                alpha,
            });
        }
    }
    Err(GapError::Inconclusive(n_search_max))
}

// ---------------------------------------------------------------------------
// Q

#[derive(Clone, Debug, Serialize)]
pub struct QReport {
    #[serde(serialize_with = "ser_rational")]
    pub q: BigRational,
    /// `Tr(sigma_i(w(A, B)) - I)` for every embedding, from the embedded
    /// matrix.
    pub factors: Vec<[f64; 2]>,
    pub numeric_product: [f64; 2],
    pub relative_error: f64,
}

fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

/// `Q = N(alpha)` exactly, with the embedding factors computed independently
/// from `sigma_i(w(A, B))`.
pub fn compute_q(value: &MatrixOverK, alpha: &FieldElement, precision_bits: u32) -> Result<QReport, GapError> {
    let q = alpha.norm();
    let d = value.dimension() as f64;
    let mut prod = Complex64::new(1.0, 0.0);
    let mut factors = Vec::new();
    for e in value.field().embeddings_with_precision(precision_bits)?.iter() {
        let (m, _) = value.embed(e);
        let t = spectral::trace(&m) - Complex64::new(d, 0.0);
        prod *= t;
        factors.push([t.re, t.im]);
    }
    let qf = q.to_f64().unwrap_or(f64::NAN);
    let relative_error = if qf.is_finite() && qf != 0.0 {
        (prod - Complex64::new(qf, 0.0)).norm() / qf.abs()
    } else {
        let (lo, hi) = ln_abs_interval(&q);
        (prod.norm().ln() - 0.5 * (lo + hi)).abs()
    };
    Ok(QReport {
        q,
        factors,
        numeric_product: [prod.re, prod.im],
        relative_error,
    })
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    Case1,
    Case2,
}

/// Case 1 iff `|Q| >= exp(-eps1 k)`; an interval straddling the boundary
/// counts as Case 1.
pub fn classify(q: &BigRational, eps1: f64, k: usize) -> Case {
    assert!(!q.is_zero(), "Q must be nonzero");
    let (_, hi) = ln_abs_interval(q);
    let threshold = -eps1 * k as f64;
    // shift the threshold outward by one ulp-scale margin
    let threshold = threshold - threshold.abs() * 4.0 * f64::EPSILON;
    if hi < threshold {
        Case::Case2
    } else {
        Case::Case1
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Soundness {
    Rigorous,
    ConditionalOnAlmostLaw,
    Empirical,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CasePartition {
    pub small: Vec<usize>,
    pub medium: Vec<usize>,
    pub large: Vec<usize>,
    pub epsilon: f64,
    pub two_d: f64,
}

impl CasePartition {
    /// Indices are 1-based embedding positions.
    pub fn from_moduli(moduli: &[f64], epsilon: f64, d: usize) -> Self {
        let two_d = 2.0 * d as f64;
        let mut p = CasePartition {
            small: vec![],
            medium: vec![],
            large: vec![],
            epsilon,
            two_d,
        };
        for (i, &t) in moduli.iter().enumerate() {
            if t < epsilon {
                p.small.push(i + 1);
            } else if t > two_d {
                p.large.push(i + 1);
            } else {
                p.medium.push(i + 1);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.small.len() + self.medium.len() + self.large.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainStep {
    pub step: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

fn step(name: &str, lhs: f64, rhs: f64) -> ChainStep {
    ChainStep {
        step: name.into(),
        lhs,
        rhs,
        margin: lhs - rhs,
    }
}

/// Inputs shared by both case analyses.
#[derive(Clone, Debug)]
pub struct CaseContext<'a> {
    pub witness: &'a Witness,
    pub q: &'a QReport,
    pub constants: Constants,
    pub wlen: usize,
    pub config: &'a GapConfig,
}

impl CaseContext<'_> {
    fn d(&self) -> usize {
        self.witness.value.dimension()
    }

    fn k(&self) -> usize {
        self.witness.value.field().degree()
    }

    fn n(&self) -> usize {
        self.witness.pair.n
    }

    fn moduli(&self) -> Vec<f64> {
        self.q.factors.iter().map(|[re, im]| re.hypot(*im)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Case1aReport {
    pub partition: CasePartition,
    pub threshold: f64,
    /// `(1/(n|w|k)) sum_{i in I_L} log Lambda(w(A_i, B_i))`
    pub direct_bound: f64,
    pub chain_bound: f64,
    pub chain: Vec<ChainStep>,
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TermCheck {
    pub embedding: usize,
    pub trace_modulus: f64,
    /// Bracket for `E(T_i)`, `T_i = {A_i^{+-1}, B_i^{+-1}}`.
    pub min_norm_lower: f64,
    pub min_norm_upper: f64,
    pub exp_delta: f64,
    pub status: CheckStatus,
    pub bochi: CheckStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlmostLawStatus {
    pub provided: bool,
    pub rigorous: bool,
    pub bound: Option<f64>,
    pub required: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Case1bReport {
    pub partition: CasePartition,
    pub threshold: f64,
    pub outside_small: usize,
    /// `max h(A^{+-1}), h(B^{+-1})` against `eps2 delta / 4`.
    pub height_witness: f64,
    pub height_target: f64,
    pub height_margin: f64,
    pub m_floor: u64,
    pub m_ceil: u64,
    /// `(1/(n M)) (log c + delta sqrt(M / 4d))` at `M = floor, ceil`.
    pub rate_floor: f64,
    pub rate_ceil: f64,
    pub rate_target: f64,
    pub terms: Vec<TermCheck>,
    pub almost_law: AlmostLawStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlaceCheck {
    pub place: String,
    pub n_v: usize,
    /// `log |alpha|_v` as a rational multiple of `log p`.
    pub log_alpha_multiple: String,
    pub log_alpha: f64,
    /// `log+ Lambda_v(w(A, B))` as a rational multiple of `log p`.
    pub log_plus_lambda_multiple: String,
    pub log_plus_lambda: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Case2Report {
    /// `sum_{v finite} n_v log |alpha|_v`, equal to `-log |Q|`.
    pub finite_sum: f64,
    pub product_formula_exact: bool,
    pub places: Vec<PlaceCheck>,
    /// `(1/(n|w|k)) sum_v n_v log+ Lambda_v(w(A, B))` over finite places.
    pub direct_bound: f64,
    pub chain_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Analysis {
    Case1a(Case1aReport),
    Case1b(Case1bReport),
    Case2(Case2Report),
}

impl Analysis {
    pub fn label(&self) -> &'static str {
        match self {
            Analysis::Case1a(_) => "1a",
            Analysis::Case1b(_) => "1b",
            Analysis::Case2(_) => "2",
        }
    }
}

pub fn case1_analyze(ctx: &CaseContext<'_>) -> Result<(Analysis, f64, Soundness), GapError> {
    if classify(&ctx.q.q, ctx.constants.eps1, ctx.k()) != Case::Case1 {
        return Err(GapError::WrongCase);
    }
    let c = &ctx.constants;
    let moduli = ctx.moduli();
    let partition = CasePartition::from_moduli(&moduli, ctx.config.epsilon, ctx.d());
    let threshold = (1.0 - c.eps2) * ctx.k() as f64;
    let (analysis, soundness) = if partition.small.len() as f64 > threshold {
        case1a(ctx, partition, threshold, &moduli)?
    } else {
        case1b(ctx, partition, threshold, &moduli)?
    };
    Ok((analysis, c.eps_d, soundness))
}

fn case1a(
    ctx: &CaseContext<'_>,
    partition: CasePartition,
    threshold: f64,
    moduli: &[f64],
) -> Result<(Analysis, Soundness), GapError> {
    let c = &ctx.constants;
    let (d, k, n, wl) = (ctx.d() as f64, ctx.k() as f64, ctx.n() as f64, ctx.wlen as f64);
    let l = (1.0 / ctx.config.epsilon).ln();
    let l2d = (2.0 * d).ln();
    let log_t = |i: usize| moduli[i - 1].ln();
    let embeddings = ctx.witness.value.field().embeddings_with_precision(ctx.config.precision_bits)?;
    let lambda: Vec<f64> = embeddings
        .iter()
        .map(|e| spectral::spectral_radius(&ctx.witness.value.embed(e).0))
        .collect();

    let outside: f64 = partition.medium.iter().chain(&partition.large).map(|&i| log_t(i)).sum();
    let large_t: f64 = partition.large.iter().map(|&i| log_t(i)).sum();
    let large_lambda: f64 = partition.large.iter().map(|&i| lambda[i - 1].ln()).sum();
    let ns = partition.small.len() as f64;
    let (nm, nl) = (partition.medium.len() as f64, partition.large.len() as f64);
    let base = -c.eps1 * k + (1.0 - c.eps2) * k * l;
    let chain = vec![
        step("sum_{i not in I_S} log|t_i| >= -eps1 k + |I_S| log(1/eps)", outside, -c.eps1 * k + ns * l),
        step("|I_S| > (1 - eps2) k", outside, base),
        step("sum_{I_L} log|t_i| >= previous - |I_M| log 2d", large_t, base - nm * l2d),
        step("sum_{I_L} log Lambda_i >= sum_{I_L} log|t_i| - |I_L| log 2d", large_lambda, large_t - nl * l2d),
        step("sum_{I_L} log Lambda_i > n|w|k eps_d", large_lambda, n * wl * k * c.eps_d),
    ];
    for s in &chain {
        if s.margin < -1e-9 * s.rhs.abs().max(1.0) {
            return Err(GapError::Chain(s.step.clone()));
        }
    }
    let direct_bound = large_lambda / (n * wl * k);
    Ok((
        Analysis::Case1a(Case1aReport {
            partition,
            threshold,
            direct_bound,
            chain_bound: c.eps_d,
            chain,
            lambda,
        }),
        Soundness::Rigorous,
    ))
}

fn almost_law_status(ctx: &CaseContext<'_>) -> AlmostLawStatus {
    let required = ctx.config.epsilon / 2.0;
    match &ctx.config.law_cert {
        None => AlmostLawStatus {
            provided: false,
            rigorous: false,
            bound: None,
            required,
            satisfied: false,
        },
        Some(cert) => {
            let bound = cert.certified_bound();
            let matches = cert.word == ctx.config.word && cert.group.d == ctx.d();
            AlmostLawStatus {
                provided: true,
                rigorous: cert.is_rigorous(),
                bound: Some(bound),
                required,
                satisfied: matches && bound < required,
            }
        }
    }
}

fn case1b(
    ctx: &CaseContext<'_>,
    partition: CasePartition,
    threshold: f64,
    moduli: &[f64],
) -> Result<(Analysis, Soundness), GapError> {
    let c = &ctx.constants;
    let (d, n) = (ctx.d(), ctx.n());
    let (df, nf) = (d as f64, n as f64);
    let pair = &ctx.witness.pair;
    let t_set = [pair.a.clone(), pair.a.inverse()?, pair.b.clone(), pair.b.inverse()?];

    let mut height_witness: f64 = 0.0;
    for m in &t_set {
        height_witness = height_witness.max(height_matrix(m, ctx.config.precision_bits)?.total);
    }
    let height_target = c.eps2 * c.delta / 4.0;

    let lc = (1.0 / c.c).ln();
    let m_star = 16.0 * df * lc * lc / (c.delta * c.delta);
    let rate = |m: f64| ((c.c).ln() + c.delta * (m / (4.0 * df)).sqrt()) / (nf * m);
    let m_floor = m_star.floor().max(1.0);
    let m_ceil = m_star.ceil().max(1.0);
    let rate_target = c.delta * c.delta / (32.0 * nf * df * lc);

    let exp_delta = c.delta.exp();
    let opts = MinNormOptions {
        seed: ctx.config.seed,
        ..MinNormOptions::default()
    };
    let embeddings = ctx.witness.value.field().embeddings_with_precision(ctx.config.precision_bits)?;
    let outside: Vec<usize> = partition.medium.iter().chain(&partition.large).copied().collect();
    let terms: Result<Vec<TermCheck>, GapError> = outside
        .par_iter()
        .map(|&i| {
            let e = &embeddings[i - 1];
            let set = MatrixSet::new(t_set.iter().map(|m| m.embed(e).0).collect())?;
            let est = minimal_norm_estimate(&set, &opts)?.estimate;
            let status = if est.lower >= exp_delta {
                CheckStatus::CertifiedHolds
            } else if est.upper < exp_delta {
                CheckStatus::CertifiedViolation
            } else {
                CheckStatus::Consistent
            };
            let bochi = bochi_check(&set, ctx.config.q_max, c.c, &opts)?.status;
            Ok(TermCheck {
                embedding: i,
                trace_modulus: moduli[i - 1],
                min_norm_lower: est.lower,
                min_norm_upper: est.upper,
                exp_delta,
                status,
                bochi,
            })
        })
        .collect();
    let almost_law = almost_law_status(ctx);
    let soundness = if almost_law.satisfied && almost_law.rigorous {
        Soundness::ConditionalOnAlmostLaw
    } else {
        Soundness::Empirical
    };
    Ok((
        Analysis::Case1b(Case1bReport {
            outside_small: outside.len(),
            partition,
            threshold,
            height_witness,
            height_target,
            height_margin: height_witness - height_target,
            m_floor: m_floor as u64,
            m_ceil: m_ceil as u64,
            rate_floor: rate(m_floor),
            rate_ceil: rate(m_ceil),
            rate_target,
            terms: terms?,
            almost_law,
        }),
        soundness,
    ))
}

/// Finite-place analysis for `|Q| < exp(-eps1 k)`. `value` is `w(A, B)` and
/// `alpha = Tr(value - I)`.
pub fn case2_analyze(
    value: &MatrixOverK,
    alpha: &FieldElement,
    n: usize,
    wlen: usize,
    constants: &Constants,
) -> Result<(Analysis, f64, Soundness), GapError> {
    let field = value.field();
    let k = field.degree();
    let q = alpha.norm();
    if classify(&q, constants.eps1, k) != Case::Case2 {
        return Err(GapError::WrongCase);
    }
    let mut places = Vec::new();
    let mut finite_sum = 0.0;
    let mut lambda_sum = 0.0;
    let mut exact = BigRational::one();
    let charpoly = value.charpoly();
    let mut primes: Vec<u64> = field
        .support_primes(alpha)?
        .iter()
        .map(small_prime)
        .collect::<Result<_, _>>()?;
    for p in value.denominator_primes()? {
        if !primes.contains(&p) {
            primes.push(p);
        }
    }
    primes.sort_unstable();
    let mut per_prime: BTreeMap<u64, BigRational> = BTreeMap::new();
    for &p in &primes {
        let lp = (p as f64).ln();
        for v in field.nonarch_places(p).map_err(HeightError::from)? {
            let log_alpha = -field.valuation(alpha, &v)?;
            let lam = nonarch_log_lambda(&charpoly, &v, field)?
                .filter(|m| m.is_positive())
                .unwrap_or_else(BigRational::zero);
            let nv = BigRational::from_integer(BigInt::from(v.n_v()));
            *per_prime.entry(p).or_insert_with(BigRational::zero) += &log_alpha * &nv;
            let la = log_alpha.to_f64().unwrap() * lp;
            let ll = lam.to_f64().unwrap() * lp;
            finite_sum += v.n_v() as f64 * la;
            lambda_sum += v.n_v() as f64 * ll;
            if log_alpha > lam {
                return Err(GapError::Chain(format!("log|alpha|_v <= log+ Lambda_v at {}", v.label())));
            }
            places.push(PlaceCheck {
                place: v.label(),
                n_v: v.n_v(),
                log_alpha_multiple: format_rational(&log_alpha),
                log_alpha: la,
                log_plus_lambda_multiple: format_rational(&lam),
                log_plus_lambda: ll,
                margin: ll - la,
            });
        }
    }
    for (p, e) in &per_prime {
        let e = e.to_integer().to_i32().ok_or(GapError::ProductFormula)?;
        exact *= BigRational::from_integer(BigInt::from(*p)).pow(e);
    }
    let product_formula_exact = exact == q.abs().recip();
    if !product_formula_exact {
        return Err(GapError::ProductFormula);
    }
    let scale = (n * wlen * k) as f64;
    let bound = constants.eps1 / (n * wlen) as f64;
    Ok((
        Analysis::Case2(Case2Report {
            finite_sum,
            product_formula_exact,
            places,
            direct_bound: lambda_sum / scale,
            chain_bound: bound,
        }),
        bound,
        Soundness::Rigorous,
    ))
}

// ---------------------------------------------------------------------------
// Certificate

#[derive(Clone, Debug, Serialize)]
pub struct Crosscheck {
    pub lower: f64,
    pub upper: f64,
    pub n_max: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub heightgap: &'static str,
    pub schema: u32,
}

pub fn versions() -> Versions {
    Versions {
        heightgap: env!("CARGO_PKG_VERSION"),
        schema: 1,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapCertificate {
    pub schema: u32,
    pub field: NumberField,
    pub d: usize,
    pub word: Word,
    pub witness: WitnessPair,
    pub alpha: FieldElement,
    #[serde(rename = "Q", serialize_with = "ser_rational")]
    pub q: BigRational,
    pub k: usize,
    pub q_factors: QReport,
    pub constants: Constants,
    pub case: String,
    pub bound: f64,
    pub soundness: Soundness,
    pub crosscheck: Crosscheck,
    pub versions: Versions,
    pub seed: u64,
    pub analysis: Analysis,
}

pub fn verify(f: &[MatrixOverK], config: &GapConfig) -> Result<GapCertificate, GapError> {
    let first = f.first().ok_or(HeightError::Empty)?;
    let d = first.dimension();
    config.validate(d)?;
    let witness = find_witness(f, &config.word, config.n_search_max, config.product_cap)?;
    let q = compute_q(&witness.value, &witness.alpha, config.precision_bits)?;
    if q.relative_error > CROSSCHECK_TOLERANCE {
        return Err(GapError::Chain(format!("numeric Q agrees with N(alpha) (error {})", q.relative_error)));
    }
    let wlen = config.word.len();
    let n = witness.pair.n;
    let consts = constants(d, config.epsilon, wlen, n, config.c_for(d))?;
    let k = first.field().degree();
    let (analysis, bound, soundness) = match classify(&q.q, consts.eps1, k) {
        Case::Case1 => case1_analyze(&CaseContext {
            witness: &witness,
            q: &q,
            constants: consts,
            wlen,
            config,
        })?,
        Case::Case2 => case2_analyze(&witness.value, &witness.alpha, n, wlen, &consts)?,
    };
    let bracket = normalized_height_bracket(f, config.bracket_n_max, config.product_cap, config.precision_bits)?;
    let crosscheck = Crosscheck {
        lower: bracket.estimate.lower,
        upper: bracket.estimate.upper,
        n_max: config.bracket_n_max,
    };
    if bound > crosscheck.upper + CROSSCHECK_TOLERANCE {
        return Err(GapError::Crosscheck {
            bound,
            upper: crosscheck.upper,
        });
    }
    Ok(GapCertificate {
        schema: 1,
        field: first.field().clone(),
        d,
        word: config.word.clone(),
        alpha: witness.alpha.clone(),
        q: q.q.clone(),
        k,
        witness: witness.pair,
        q_factors: q,
        constants: consts,
        case: analysis.label().into(),
        bound,
        soundness,
        crosscheck,
        versions: versions(),
        seed: config.seed,
        analysis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn transvections() -> Vec<MatrixOverK> {
        let k = NumberField::rationals();
        [[1, 1, 0, 1], [1, -1, 0, 1], [1, 0, 1, 1], [1, 0, -1, 1]]
            .iter()
            .map(|e| MatrixOverK::from_ints(&k, 2, e).unwrap())
            .collect()
    }

    fn commutator_word() -> Word {
        freeword::commutator(&Word::x(), &Word::y()).unwrap()
    }

    #[test]
    fn constants_identity_and_values() {
        let c = constants(2, 0.25, 4, 1, 0.25).unwrap();
        assert_eq!(c.delta, 1.0 / 128.0);
        let [a, b, e] = c.identity;
        assert!((a - b).abs() < 1e-12 && (a - e).abs() < 1e-12);
        assert!(c.eps2 < 1.0 && c.eps1 > 0.0);
        // closed form with all logs expanded
        let l = 4f64.ln();
        let lc = 4f64.ln();
        let delta: f64 = 1.0 / 128.0;
        let closed = delta * delta * l / (32.0 * 2.0 * 16f64.ln() * lc + 2.0 * 4.0 * delta * delta);
        assert!((c.eps_d - closed).abs() < 1e-15);
        // high-precision evaluation of the defining formulas
        assert!((c.eps2 - 0.499_999_007_527_899_930_8).abs() < 1e-15);
        assert!((c.eps1 / 1.375_858_475_894_746_233e-6 - 1.0).abs() < 1e-12);
        assert!((c.eps_d / 3.439_646_189_736_865_583e-7 - 1.0).abs() < 1e-12);
        assert!(constants(2, 1.0, 4, 1, 0.25).is_err());
        assert!(constants(2, 0.25, 0, 1, 0.25).is_err());
    }

    #[test]
    fn order_examples() {
        assert_eq!(epsilon_d_order(1, 1, 1), 0.5);
        assert_eq!(epsilon_d_order(2, 4, 1), 1.0 / 68.0);
    }

    #[test]
    fn eps_d_dominates_order() {
        // minimum of eps_d / order over the sweep, attained at d = 2, wlen = 64
        const C: f64 = 2.2e-5;
        for d in 2..=6 {
            for wlen in 4..=64 {
                for n in [1, 3, 16] {
                    let c = constants(d, 0.25, wlen, n, 1.0 / (2.0 * d as f64)).unwrap();
                    assert!(c.eps_d >= C * epsilon_d_order(d, wlen, n), "{d} {wlen} {n}");
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&q(16, 1), 0.01, 2), Case::Case1);
        assert_eq!(classify(&q(1, 1), 1e-9, 5), Case::Case1);
        let tiny = BigRational::new(BigInt::one(), BigInt::from(10).pow(100));
        assert_eq!(classify(&tiny, 0.05, 2), Case::Case2);
        // exactly on the boundary: |Q| = e^{-1} is not rational, so use a
        // threshold equal to -log 2 / k
        let e1 = 2f64.ln() / 2.0;
        assert_eq!(classify(&q(1, 2), e1, 2), Case::Case1);
    }

    #[test]
    fn transvection_witness() {
        let f = transvections();
        let w = find_witness(&f, &commutator_word(), 1, 1 << 12).unwrap();
        assert_eq!(w.pair.n_prime, 1);
        assert_eq!(w.pair.n, 4);
        assert!(w.pair.a.det().is_one() && w.pair.b.det().is_one());
        let [a1, b1] = &w.pair.base_pair;
        let direct = alpha_of(&evaluate(&commutator_word(), &[a1.clone(), b1.clone()]).unwrap());
        let expected = alpha_of(&evaluate(&commutator_word(), &[w.pair.a.clone(), w.pair.b.clone()]).unwrap());
        assert_eq!(expected, w.alpha);
        assert!(!w.alpha.is_zero());
        assert!(direct.as_rational().is_some());
    }

    #[test]
    fn direct_transvection_pair_q() {
        let f = transvections();
        let c = evaluate(&commutator_word(), &[f[0].clone(), f[2].clone()]).unwrap();
        let alpha = alpha_of(&c);
        assert_eq!(alpha.as_rational(), Some(q(1, 1)));
        let r = compute_q(&c, &alpha, 53).unwrap();
        assert_eq!(r.q, q(1, 1));
        assert!(r.relative_error < 1e-12);
    }

    #[test]
    fn sqrt2_worked_example() {
        let k = NumberField::from_ints(&[-2, 0, 1]).unwrap();
        let r2 = k.generator();
        let a = MatrixOverK::new(&k, 2, vec![k.one(), r2.clone(), k.zero(), k.one()]).unwrap();
        let b = MatrixOverK::new(&k, 2, vec![k.one(), k.zero(), r2, k.one()]).unwrap();
        let c = evaluate(&commutator_word(), &[a, b]).unwrap();
        assert_eq!(c.trace(), k.from_int(6));
        let alpha = alpha_of(&c);
        assert_eq!(alpha, k.from_int(4));
        let r = compute_q(&c, &alpha, 53).unwrap();
        assert_eq!(r.q, q(16, 1));
        assert!(r.factors.iter().all(|f| (f[0] - 4.0).abs() < 1e-12));
        assert_eq!(classify(&r.q, 0.01, 2), Case::Case1);
    }

    #[test]
    fn abelian_and_identity_inconclusive() {
        let qf = NumberField::rationals();
        let ab = vec![
            MatrixOverK::from_ints(&qf, 2, &[1, 1, 0, 1]).unwrap(),
            MatrixOverK::from_ints(&qf, 2, &[1, -1, 0, 1]).unwrap(),
        ];
        assert!(matches!(find_witness(&ab, &commutator_word(), 4, 1 << 16), Err(GapError::Inconclusive(4))));
        let id = vec![MatrixOverK::identity(&qf, 2)];
        assert!(matches!(find_witness(&id, &commutator_word(), 3, 1 << 16), Err(GapError::Inconclusive(3))));
        assert!(matches!(verify(&id, &GapConfig::default()), Err(GapError::Inconclusive(3))));
        let one = vec![ab[0].clone()];
        assert!(matches!(find_witness(&one, &commutator_word(), 3, 1 << 16), Err(GapError::NotSymmetric)));
        assert_eq!(symmetrize(&one).unwrap().len(), 2);
    }

    #[test]
    fn partition_thresholds() {
        let p = CasePartition::from_moduli(&[0.1, 0.1, 0.1, 1e6], 0.25, 2);
        assert_eq!(p.small, vec![1, 2, 3]);
        assert_eq!(p.large, vec![4]);
        assert!(p.medium.is_empty());
        let c = constants(2, 0.25, 4, 4, 0.25).unwrap();
        assert!((c.eps2 - 0.5).abs() < 1e-4);
        assert!((p.small.len() as f64) > (1.0 - c.eps2) * 4.0);
        let p = CasePartition::from_moduli(&[1.0], 0.25, 2);
        assert_eq!(p.medium, vec![1]);
    }

    #[test]
    fn transvection_certificate() {
        let cert = verify(&transvections(), &GapConfig::default()).unwrap();
        assert_eq!(cert.witness.n_prime, 1);
        assert!(cert.bound > 0.0);
        assert!(cert.bound <= cert.crosscheck.upper);
        assert!(cert.crosscheck.lower >= 0.4812 - 1e-4);
        assert_eq!(cert.k, 1);
        let json = serde_json::to_value(&cert).unwrap();
        for key in ["field", "d", "witness", "alpha", "Q", "constants", "case", "bound", "soundness", "crosscheck", "versions", "seed"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(json["witness"].get("A").is_some());
        assert!(json["constants"].get("eps_d").is_some());
    }

    #[test]
    fn case2_rational() {
        let qf = NumberField::rationals();
        let n = 1i64 << 40;
        let alpha = qf.from_rational(q(1, n));
        let one = qf.one();
        let w = MatrixOverK::new(&qf, 2, vec![&alpha + &one, qf.zero(), qf.zero(), one]).unwrap();
        let c = constants(2, 0.25, 4, 4, 0.25).unwrap();
        let (a, bound, s) = case2_analyze(&w, &alpha, 4, 4, &c).unwrap();
        assert_eq!(s, Soundness::Rigorous);
        assert_eq!(bound, c.eps1 / 16.0);
        let Analysis::Case2(r) = a else { panic!() };
        assert!(r.product_formula_exact);
        assert!((r.finite_sum - (n as f64).ln()).abs() < 1e-9);
        assert!(r.direct_bound >= bound);
        // |Q| >= 1 is refused
        let big = qf.from_int(3);
        let w = MatrixOverK::new(&qf, 2, vec![&big + &qf.one(), qf.zero(), qf.zero(), qf.one()]).unwrap();
        assert!(matches!(case2_analyze(&w, &big, 4, 4, &c), Err(GapError::WrongCase)));
    }

    #[test]
    fn case2_sqrt2() {
        let k = NumberField::from_ints(&[-2, 0, 1]).unwrap();
        let u = &k.one() + &k.generator();
        let alpha = u.pow(7).unwrap().scale(&q(1, 3 * 3 * 3 * 5 * 5 * 7 * 11 * 13));
        let w = MatrixOverK::new(&k, 2, vec![&alpha + &k.one(), k.zero(), k.zero(), k.one()]).unwrap();
        let c = constants(2, 0.25, 4, 4, 0.25).unwrap();
        let (a, bound, _) = case2_analyze(&w, &alpha, 4, 4, &c).unwrap();
        let Analysis::Case2(r) = a else { panic!() };
        assert!(r.places.iter().all(|p| p.margin >= 0.0));
        assert!(r.direct_bound >= bound);
        let qn = alpha.norm();
        let (lo, hi) = ln_abs_interval(&qn);
        assert!((r.finite_sum + 0.5 * (lo + hi)).abs() < 1e-9);
    }

    #[test]
    fn case1a_large_traces() {
        let qf = NumberField::rationals();
        // trace of w(A, B) - I is huge, so the single embedding is in I_L
        let w = MatrixOverK::from_ints(&qf, 2, &[1000, 1, -1, 0]).unwrap();
        let alpha = alpha_of(&w);
        let pair = WitnessPair {
            n: 4,
            a: w.clone(),
            b: w.clone(),
            n_prime: 1,
            base_pair: [w.clone(), w.clone()],
            pair_index: 0,
        };
        let witness = Witness {
            pair,
            value: w.clone(),
            alpha: alpha.clone(),
        };
        let qr = compute_q(&w, &alpha, 53).unwrap();
        // tiny epsilon forces eps2 small; use a large epsilon to exercise 1a
        let config = GapConfig {
            epsilon: 0.9,
            ..GapConfig::default()
        };
        let consts = constants(2, 0.9, 4, 4, 0.25).unwrap();
        let ctx = CaseContext {
            witness: &witness,
            q: &qr,
            constants: consts,
            wlen: 4,
            config: &config,
        };
        let (a, _, _) = case1_analyze(&ctx).unwrap();
        assert_eq!(a.label(), "1b");
        let Analysis::Case1b(r) = a else { panic!() };
        assert_eq!(r.partition.large, vec![1]);
        assert!(r.rate_floor >= r.rate_target && r.rate_ceil >= r.rate_target);
    }

    #[test]
    fn case1a_chain() {
        // u = cbrt2 - 1 is a unit; u^-3 is small at both complex embeddings
        // and large at the real one
        let k = NumberField::from_ints(&[-2, 0, 0, 1]).unwrap();
        let u = &k.generator() - &k.one();
        let t = u.pow(-3).unwrap();
        let w = MatrixOverK::new(&k, 2, vec![&t + &k.one(), k.zero(), k.zero(), k.one()]).unwrap();
        let alpha = alpha_of(&w);
        assert_eq!(alpha, t);
        let pair = WitnessPair {
            n: 4,
            a: w.clone(),
            b: w.clone(),
            n_prime: 1,
            base_pair: [w.clone(), w.clone()],
            pair_index: 0,
        };
        let witness = Witness {
            pair,
            value: w.clone(),
            alpha: alpha.clone(),
        };
        let qr = compute_q(&w, &alpha, 53).unwrap();
        assert_eq!(qr.q.abs(), q(1, 1));
        let config = GapConfig::default();
        let consts = constants(2, 0.25, 4, 4, 0.25).unwrap();
        let ctx = CaseContext {
            witness: &witness,
            q: &qr,
            constants: consts,
            wlen: 4,
            config: &config,
        };
        let (a, bound, s) = case1_analyze(&ctx).unwrap();
        let Analysis::Case1a(r) = a else { panic!("{a:?}") };
        assert_eq!(s, Soundness::Rigorous);
        assert_eq!(r.partition.small.len(), 2);
        assert_eq!(r.partition.large.len(), 1);
        assert!(r.direct_bound >= r.chain_bound - 1e-6);
        assert_eq!(bound, consts.eps_d);
        assert!(r.chain.iter().all(|s| s.margin >= -1e-9));
    }

    proptest! {
        #[test]
        fn identity_holds_on_grid(d in 2usize..7, e in prop::sample::select(vec![0.1, 0.25, 0.5]),
                                  wlen in 4usize..65, n in 1usize..17) {
            let c = constants(d, e, wlen, n, 1.0 / (2.0 * d as f64)).unwrap();
            let [a, b, x] = c.identity;
            prop_assert!((a - b).abs() < 1e-12 && (a - x).abs() < 1e-12);
            prop_assert!(c.eps2 < 1.0 && c.eps1 > 0.0 && c.eps_d > 0.0);
        }

        #[test]
        fn order_decreasing(d in 1usize..8, w in 1usize..30, n in 1usize..10) {
            let o = epsilon_d_order(d, w, n);
            prop_assert!(epsilon_d_order(d + 1, w, n) < o);
            prop_assert!(epsilon_d_order(d, w + 1, n) < o);
            prop_assert!(epsilon_d_order(d, w, n + 1) < o);
        }

        #[test]
        fn classify_deterministic(num in 1i64..1_000_000, den in 1i64..1_000_000, e1 in 0.001f64..2.0, k in 1usize..6) {
            let qq = q(num, den);
            let a = classify(&qq, e1, k);
            prop_assert_eq!(a, classify(&qq, e1, k));
            if qq >= BigRational::one() {
                prop_assert_eq!(a, Case::Case1);
            }
        }
    }
}
