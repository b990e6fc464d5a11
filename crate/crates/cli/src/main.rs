use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use heightgap::almostlaw::{
    certify_empirical, certify_su2_net, neighborhood_check, search, CertResult, GroupSpec, Law, SearchOptions,
    DEFAULT_NET_CAP,
};
use heightgap::freeword::Word;
use heightgap::gapverify::{self, constants, epsilon_d_order, versions, GapConfig, GapError};
use heightgap::heights::{height_matrix, height_set, normalized_height_bracket, MatrixOverK};
use heightgap::input::{parse_input, InputSpec};
use heightgap::spectral::{self, bochi_check, minimal_norm_estimate, spectral_radius_table, MatrixSet, MinNormOptions};

#[derive(Parser)]
#[command(name = "heightgap", version, about = "Heights, normalized-height brackets and gap certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Bits of precision for complex embeddings.
    #[arg(long, global = true)]
    precision_bits: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Add missing inverses to the matrix set.
    #[arg(long, global = true)]
    symmetrize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Weil height of every matrix and of the set.
    Heights { input: PathBuf },
    /// Two-sided bracket for the normalized height.
    NheightBracket {
        input: PathBuf,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
    },
    /// Joint spectral radius brackets and minimal-norm checks per embedding.
    Spectral {
        input: PathBuf,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        q_max: usize,
    },
    /// Search for a short-defect word on U(d).
    LawSearch {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Certify a word's sup-defect empirically, or on SU(2) with a net.
    LawCertify {
        #[command(flatten)]
        word: WordArgs,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Net spacing for a rigorous SU(2) bound.
        #[arg(long)]
        eta: Option<f64>,
        /// Also sample the e^delta neighborhood at this epsilon.
        #[arg(long)]
        neighborhood_eps: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Height-gap certificate for a symmetric matrix set.
    Gap {
        input: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[command(flatten)]
        word: WordArgs,
        /// Depth of the normalized-height bracket used as crosscheck.
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        /// Largest n' searched for a witness pair.
        #[arg(long, default_value_t = 3)]
        n_search: usize,
        #[arg(long, default_value_t = 10)]
        q_max: usize,
        #[arg(long)]
        c: Option<f64>,
    },
    /// The constants delta, eps1, eps2, eps_d.
    Constants {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 4)]
        wlen: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        c: Option<f64>,
    },
}

#[derive(Args, Clone)]
struct WordArgs {
    /// Word over x, y; capitals are inverses.
    #[arg(long, conflicts_with = "word_file")]
    word: Option<String>,
    /// File holding a word, or a JSON report from law-search or law-certify.
    #[arg(long)]
    word_file: Option<PathBuf>,
}

struct Outcome {
    report: Value,
    code: u8,
}

fn ok(report: Value) -> Result<Outcome> {
    Ok(Outcome { report, code: 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => match emit(&cli.common, &outcome.report) {
            Ok(()) => ExitCode::from(outcome.code),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn emit(common: &Common, report: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match &common.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let common = &cli.common;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    match &cli.command {
        Command::Heights { input } => cmd_heights(common, input),
        Command::NheightBracket { input, n_max } => cmd_bracket(common, input, *n_max),
        Command::Spectral { input, n_max, q_max } => cmd_spectral(common, input, *n_max, *q_max),
        Command::LawSearch { d, target, budget } => cmd_search(common, *d, *target, *budget),
        Command::LawCertify {
            word,
            d,
            samples,
            eta,
            neighborhood_eps,
            trials,
        } => cmd_certify(common, word, *d, *samples, *eta, *neighborhood_eps, *trials),
        Command::Gap {
            input,
            eps,
            word,
            n_max,
            n_search,
            q_max,
            c,
        } => cmd_gap(common, input, *eps, word, *n_max, *n_search, *q_max, *c),
        Command::Constants { d, eps, wlen, n, c } => cmd_constants(*d, *eps, *wlen, *n, *c),
    }
}

fn header(command: &str) -> Value {
    json!({ "schema": 1, "command": command, "versions": versions() })
}

fn with(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

struct Loaded {
    spec: InputSpec,
    set: Vec<MatrixOverK>,
    bits: u32,
    seed: u64,
}

fn load(common: &Common, path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = parse_input(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut set = spec.matrix_set();
    if common.symmetrize || spec.options.symmetrize {
        set = gapverify::symmetrize(&set)?;
    }
    Ok(Loaded {
        bits: common.precision_bits.unwrap_or(spec.options.precision_bits),
        seed: common.seed.unwrap_or(spec.options.seed),
        spec,
        set,
    })
}

fn cmd_heights(common: &Common, input: &Path) -> Result<Outcome> {
    let l = load(common, input)?;
    let mut per = Vec::new();
    for m in &l.spec.matrices {
        per.push(json!({ "name": m.name, "report": height_matrix(&m.matrix, l.bits)? }));
    }
    let set_height = height_set(&l.set, l.bits)?;
    ok(with(
        header("heights"),
        json!({ "field": l.spec.field, "d": l.spec.d, "matrices": per, "set_height": set_height }),
    ))
}

fn cmd_bracket(common: &Common, input: &Path, n_max: usize) -> Result<Outcome> {
    let l = load(common, input)?;
    let b = normalized_height_bracket(&l.set, n_max, l.spec.options.cap, l.bits)?;
    let columns = json!({
        "n": b.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        "products": b.rows.iter().map(|r| r.products).collect::<Vec<_>>(),
        "upper": b.rows.iter().map(|r| r.upper).collect::<Vec<_>>(),
        "lower": b.rows.iter().map(|r| r.lower).collect::<Vec<_>>(),
    });
    ok(with(
        header("nheight-bracket"),
        json!({ "field": l.spec.field, "d": l.spec.d, "n_max": n_max, "estimate": b.estimate, "columns": columns }),
    ))
}

fn cmd_spectral(common: &Common, input: &Path, n_max: usize, q_max: usize) -> Result<Outcome> {
    let l = load(common, input)?;
    let d = l.spec.d;
    let c = 1.0 / (2.0 * d as f64);
    let opts = MinNormOptions {
        seed: l.seed,
        ..MinNormOptions::default()
    };
    let mut per = Vec::new();
    for e in l.spec.field.embeddings_with_precision(l.bits)?.iter() {
        let set = MatrixSet::new(l.set.iter().map(|m| m.embed(e).0).collect())?;
        let (estimate, rows) = spectral_radius_table(&set, n_max, l.spec.options.cap.max(spectral::DEFAULT_CAP))?;
        let min_norm = minimal_norm_estimate(&set, &opts)?;
        let bochi = bochi_check(&set, q_max, c, &opts)?;
        per.push(json!({
            "embedding": e.index,
            "root": [e.root.re, e.root.im],
            "lambda_max": spectral::lambda_max(&set),
            "norm": set.norm(),
            "jsr": estimate,
            "columns": {
                "n": rows.iter().map(|r| r.n).collect::<Vec<_>>(),
                "lambda_root": rows.iter().map(|r| r.lambda_root).collect::<Vec<_>>(),
                "norm_root": rows.iter().map(|r| r.norm_root).collect::<Vec<_>>(),
            },
            "minimal_norm": min_norm.estimate,
            "bochi": bochi,
        }));
    }
    ok(with(
        header("spectral"),
        json!({ "field": l.spec.field, "d": d, "seed": l.seed, "embeddings": per }),
    ))
}

fn cmd_search(common: &Common, d: usize, target: f64, budget: Option<usize>) -> Result<Outcome> {
    let mut opts = SearchOptions::default();
    if let Some(b) = budget {
        opts.budget = b;
    }
    let seed = common.seed.unwrap_or(0);
    let r = search(d, target, seed, &opts)?;
    let code = if r.success { 0 } else { 2 };
    Ok(Outcome {
        report: with(header("law-search"), serde_json::to_value(&r)?),
        code,
    })
}

/// The word and, for a JSON certificate file, the certificate it carries.
fn read_word(args: &WordArgs) -> Result<(Word, Option<CertResult>)> {
    let text = match (&args.word, &args.word_file) {
        (Some(w), _) => return Ok((Word::parse(w, 2)?, None)),
        (None, Some(p)) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => return Ok((Word::parse("xyXY", 2)?, None)),
    };
    let trimmed = text.trim();
    if !trimmed.starts_with('{') {
        return Ok((Word::parse(trimmed, 2)?, None));
    }
    let v: Value = serde_json::from_str(trimmed).context("word file is not valid JSON")?;
    let cert = v.get("cert").unwrap_or(&v);
    let word_text = cert
        .get("word")
        .and_then(Value::as_str)
        .context("JSON word file has no \"word\" field")?;
    let word = Word::parse(word_text, 2)?;
    let group: Option<GroupSpec> = cert.get("group").and_then(|g| {
        Some(GroupSpec {
            d: g.get("d")?.as_u64()? as usize,
            group: g.get("group")?.as_str()?.to_string(),
        })
    });
    let parsed = group.and_then(|group| {
        Some(CertResult {
            word: word.clone(),
            word_length: word.len(),
            group,
            empirical_sup: cert.get("empirical_sup")?.as_f64()?,
            sample_count: cert.get("sample_count")?.as_u64()? as usize,
            seed: cert.get("seed")?.as_u64()?,
            rigorous_bound: cert.get("rigorous_bound").and_then(Value::as_f64),
            net_spacing: cert.get("net_spacing").and_then(Value::as_f64),
        })
    });
    Ok((word, parsed))
}

fn cmd_certify(
    common: &Common,
    args: &WordArgs,
    d: usize,
    samples: usize,
    eta: Option<f64>,
    neighborhood_eps: Option<f64>,
    trials: usize,
) -> Result<Outcome> {
    let (word, _) = read_word(args)?;
    let law = Law::from_word(word)?;
    let seed = common.seed.unwrap_or(0);
    let empirical = certify_empirical(&law, d, samples, seed)?;
    let rigorous = match eta {
        Some(eta) => {
            if d != 2 {
                bail!("net certification is only available for d = 2");
            }
            Some(certify_su2_net(&law, eta, DEFAULT_NET_CAP)?)
        }
        None => None,
    };
    let neighborhood = match neighborhood_eps {
        Some(eps) => Some(neighborhood_check(&law, &empirical, eps, trials, seed)?),
        None => None,
    };
    let cert = rigorous.clone().unwrap_or_else(|| empirical.clone());
    let code = match &neighborhood {
        Some(n) if !n.passed => 2,
        _ => 0,
    };
    Ok(Outcome {
        report: with(
            header("law-certify"),
            json!({ "cert": cert, "empirical": empirical, "neighborhood": neighborhood }),
        ),
        code,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_gap(
    common: &Common,
    input: &Path,
    eps: f64,
    args: &WordArgs,
    n_max: usize,
    n_search: usize,
    q_max: usize,
    c: Option<f64>,
) -> Result<Outcome> {
    let l = load(common, input)?;
    let (word, law_cert) = read_word(args)?;
    let config = GapConfig {
        epsilon: eps,
        c,
        q_max,
        n_search_max: n_search,
        word,
        law_cert,
        precision_bits: l.bits,
        bracket_n_max: n_max,
        product_cap: l.spec.options.cap,
        seed: l.seed,
    };
    match gapverify::verify(&l.set, &config) {
        Ok(cert) => ok(with(header("gap"), serde_json::to_value(&cert)?)),
        Err(GapError::Inconclusive(n)) => {
            let b = normalized_height_bracket(&l.set, n_max, l.spec.options.cap, l.bits)?;
            Ok(Outcome {
                report: with(
                    header("gap"),
                    json!({
                        "status": "inconclusive",
                        "n_search_max": n,
                        "word": config.word,
                        "crosscheck": { "lower": b.estimate.lower, "upper": b.estimate.upper, "n_max": n_max },
                        "seed": l.seed,
                    }),
                ),
                code: 2,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_constants(d: usize, eps: f64, wlen: usize, n: usize, c: Option<f64>) -> Result<Outcome> {
    let c = c.unwrap_or(1.0 / (2.0 * d as f64));
    let k = constants(d, eps, wlen, n, c)?;
    ok(with(
        header("constants"),
        json!({
            "d": d, "eps": eps, "wlen": wlen, "n": n, "c": c,
            "constants": k,
            "eps_d_expressions": k.identity,
            "eps_d_order": epsilon_d_order(d, wlen, n),
        }),
    ))
}
