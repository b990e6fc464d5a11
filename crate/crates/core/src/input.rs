//! JSON input documents describing a matrix set over a number field.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "field": [-2, 0, 1],
//!   "d": 2,
//!   "matrices": [
//!     {"name": "A", "entries": [[1, [0, 1]], [0, 1]]},
//!     {"name": "B", "entries": [[1, 0], ["1/2", 1]]}
//!   ],
//!   "options": {"symmetrize": true}
//! }
//! ```
//!
//! `field` lists the integer coefficients of a monic irreducible polynomial,
//! constant term first. An entry is a rational (integer or `"num/den"`
//! string) or an array of rationals giving coordinates in the power basis.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;
use thiserror::Error;

use crate::heights::{HeightError, MatrixOverK};
use crate::numfield::rational::parse_rational;
use crate::numfield::{FieldError, NumberField};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{message} at line {line} column {column}{}", path_suffix(.path))]
    Syntax {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("unsupported schema version {0}, expected {SCHEMA_VERSION}")]
    Schema(u32),
    #[error("no matrices given")]
    Empty,
    #[error("matrix {name:?}: {message}")]
    Dimension { name: String, message: String },
    #[error("matrix {name:?} entry ({row}, {col}): {message}")]
    Entry {
        name: String,
        row: usize,
        col: usize,
        message: String,
    },
    #[error("duplicate matrix name {0:?}")]
    DuplicateName(String),
    #[error("field polynomial: {0}")]
    Field(#[from] FieldError),
}

fn path_suffix(path: &str) -> String {
    if path.is_empty() || path == "." {
        String::new()
    } else {
        format!(" (at {path})")
    }
}

struct Rat(BigRational);

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a \"num/den\" string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
                Ok(Rat(BigRational::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
                Ok(Rat(BigRational::from_integer(v.into())))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
                parse_rational(v).map(Rat).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

struct Int(BigInt);

impl<'de> Deserialize<'de> for Int {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = Rat::deserialize(d)?.0;
        if r.is_integer() {
            Ok(Int(r.to_integer()))
        } else {
            Err(de::Error::custom(format!("expected an integer, got {r}")))
        }
    }
}

enum Entry {
    Scalar(BigRational),
    Coords(Vec<BigRational>),
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entry;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational or an array of rational coordinates")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Entry, E> {
                Ok(Entry::Scalar(BigRational::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Entry, E> {
                Ok(Entry::Scalar(BigRational::from_integer(v.into())))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Entry, E> {
                parse_rational(v).map(Entry::Scalar).map_err(E::custom)
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Entry, A::Error> {
                let mut out = Vec::new();
                while let Some(Rat(q)) = seq.next_element()? {
                    out.push(q);
                }
                Ok(Entry::Coords(out))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    name: String,
    entries: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InputOptions {
    pub symmetrize: bool,
    pub seed: u64,
    pub cap: usize,
    pub precision_bits: u32,
}

impl Default for InputOptions {
    fn default() -> Self {
        InputOptions {
            symmetrize: false,
            seed: 0,
            cap: 1 << 16,
            precision_bits: 53,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    schema: u32,
    field: Vec<Int>,
    d: usize,
    matrices: Vec<RawMatrix>,
    #[serde(default)]
    options: InputOptions,
}

#[derive(Debug, Clone)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: MatrixOverK,
}

#[derive(Debug, Clone)]
pub struct InputSpec {
    pub field: NumberField,
    pub d: usize,
    pub matrices: Vec<NamedMatrix>,
    pub options: InputOptions,
}

impl InputSpec {
    pub fn matrix_set(&self) -> Vec<MatrixOverK> {
        self.matrices.iter().map(|m| m.matrix.clone()).collect()
    }
}

pub fn parse_input(text: &str) -> Result<InputSpec, InputError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawInput = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        InputError::Syntax {
            line: inner.line(),
            column: inner.column(),
            path,
            message: strip_position(&inner.to_string()),
        }
    })?;
    de.end().map_err(|e| InputError::Syntax {
        line: e.line(),
        column: e.column(),
        path: String::new(),
        message: strip_position(&e.to_string()),
    })?;
    if raw.schema != SCHEMA_VERSION {
        return Err(InputError::Schema(raw.schema));
    }
    let coeffs: Vec<BigInt> = raw.field.into_iter().map(|i| i.0).collect();
    let field = NumberField::new(&coeffs)?;
    let k = field.degree();
    if raw.matrices.is_empty() {
        return Err(InputError::Empty);
    }
    let d = raw.d;
    let mut matrices: Vec<NamedMatrix> = Vec::with_capacity(raw.matrices.len());
    for m in raw.matrices {
        if matrices.iter().any(|o| o.name == m.name) {
            return Err(InputError::DuplicateName(m.name));
        }
        let dim_err = |message: String| InputError::Dimension {
            name: m.name.clone(),
            message,
        };
        if d == 0 {
            return Err(dim_err("d must be positive".into()));
        }
        if m.entries.len() != d {
            return Err(dim_err(format!("has {} rows, expected {d}", m.entries.len())));
        }
        let mut elems = Vec::with_capacity(d * d);
        for (row, r) in m.entries.into_iter().enumerate() {
            if r.len() != d {
                return Err(dim_err(format!("row {row} has {} columns, expected {d}", r.len())));
            }
            for (col, e) in r.into_iter().enumerate() {
                let x = match e {
                    Entry::Scalar(q) => field.from_rational(q),
                    Entry::Coords(c) => field.element(c).map_err(|e| InputError::Entry {
                        name: m.name.clone(),
                        row,
                        col,
                        message: match e {
                            FieldError::CoefficientCount { found, .. } => {
                                format!("{found} coordinates for a degree {k} field")
                            }
                            e => e.to_string(),
                        },
                    })?,
                };
                elems.push(x);
            }
        }
        let matrix = MatrixOverK::new(&field, d, elems).map_err(|e: HeightError| dim_err(e.to_string()))?;
        matrices.push(NamedMatrix { name: m.name, matrix });
    }
    Ok(InputSpec {
        field,
        d,
        matrices,
        options: raw.options,
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "schema": 1,
  "field": [-2, 0, 1],
  "d": 2,
  "matrices": [
    {"name": "A", "entries": [[1, [0, 1]], [0, 1]]},
    {"name": "B", "entries": [[1, 0], [[0, 1], 1]]}
  ]
}"#;

    #[test]
    fn minimal_document() {
        let s = parse_input(MINIMAL).unwrap();
        assert_eq!(s.d, 2);
        assert_eq!(s.field.degree(), 2);
        assert_eq!(s.matrices.len(), 2);
        assert_eq!(s.matrices[0].matrix.get(0, 1), &s.field.generator());
        assert_eq!(s.options, InputOptions::default());
    }

    #[test]
    fn zero_denominator() {
        let t = MINIMAL.replace("[[1, 0], [[0, 1], 1]]", "[[1, 0], [\"1/0\", 1]]");
        let e = parse_input(&t).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("zero denominator"), "{msg}");
        let InputError::Syntax { line, .. } = e else { panic!() };
        assert_eq!(line, 7);
    }

    #[test]
    fn dimension_mismatch() {
        let t = MINIMAL.replace("[[1, 0], [[0, 1], 1]]", "[[1, 0, 0], [0, 1, 0], [0, 0, 1]]");
        assert!(matches!(parse_input(&t), Err(InputError::Dimension { .. })));
        let t = MINIMAL.replace("[[1, 0], [[0, 1], 1]]", "[[1, 0], [[0, 1, 2], 1]]");
        assert!(matches!(parse_input(&t), Err(InputError::Entry { .. })));
    }

    #[test]
    fn reducible_field() {
        let t = MINIMAL.replace("[-2, 0, 1]", "[-4, 0, 1]");
        assert!(matches!(parse_input(&t), Err(InputError::Field(FieldError::Reducible(_)))));
    }

    #[test]
    fn unknown_keys_and_syntax() {
        let t = MINIMAL.replace("\"d\": 2", "\"d\": 2, \"extra\": true");
        let e = parse_input(&t).unwrap_err();
        assert!(e.to_string().contains("unknown field"), "{e}");
        let e = parse_input("{\"schema\": 1,\n  \"field\": [1, }").unwrap_err();
        let InputError::Syntax { line, column, .. } = e else { panic!() };
        assert_eq!((line, column), (2, 16));
        let t = MINIMAL.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(parse_input(&t), Err(InputError::Schema(2))));
        assert!(parse_input(&format!("{MINIMAL} x")).is_err());
    }

    #[test]
    fn options_and_rationals() {
        let t = MINIMAL
            .replace("[[1, 0], [[0, 1], 1]]", "[[\"-3/6\", 0], [0, \"2\"]]")
            .replace("  ]\n}", "  ],\n  \"options\": {\"symmetrize\": true, \"seed\": 9}\n}");
        let s = parse_input(&t).unwrap();
        assert!(s.options.symmetrize);
        assert_eq!(s.options.seed, 9);
        assert_eq!(
            s.matrices[1].matrix.get(0, 0).as_rational(),
            Some(BigRational::new((-1).into(), 2.into()))
        );
    }
}
