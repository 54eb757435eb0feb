//! Canonical text form: one term per line,
//! `q_num/q_den y_num/y_den coeff_num/coeff_den`, sorted by `(q, y)`.

use std::fmt::Write;

use super::PuiseuxSeries;
use crate::error::{Error, Result};
use crate::rational::{fmt_rational, parse_rational, Rational};

impl PuiseuxSeries {
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (a, b, c) in self.terms() {
            writeln!(
                out,
                "{} {} {}",
                fmt_rational(&a),
                fmt_rational(&b),
                fmt_rational(c)
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    /// Parse the canonical form; `order` is supplied out of band.
    pub fn from_canonical_text(text: &str, order: &Rational) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<_> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "line {}: expected 3 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            terms.push((
                parse_rational(fields[0])?,
                parse_rational(fields[1])?,
                parse_rational(fields[2])?,
            ));
        }
        Self::from_terms(terms, order)
    }

    /// JSON document `{"order": "p/q", "terms": [["a","b","c"], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "order": fmt_rational(&self.order()),
            "terms": self
                .terms()
                .map(|(a, b, c)| [fmt_rational(&a), fmt_rational(&b), fmt_rational(c)])
                .collect::<Vec<_>>(),
        })
    }
}
