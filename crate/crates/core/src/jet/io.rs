//! Plain-text serialization of jets.
//!
//! Format: a header line `jet n=<n> d=<d>` followed by one line per
//! nonzero coefficient, `l alpha_1 ... alpha_n value`, in canonical table
//! order. Values are printed with 17 significant digits so a round trip
//! reproduces every coefficient bit for bit.

use super::{Jet, JetError, MultiIndex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JetParseError {
    #[error("missing or malformed header, expected `jet n=<n> d=<d>`")]
    BadHeader,
    #[error("line {line}: expected component, {dim} exponents and a value")]
    BadLine { line: usize, dim: usize },
    #[error("line {line}: {source}")]
    BadCoefficient {
        line: usize,
        #[source]
        source: JetError,
    },
}

/// Render a jet in the plain-text exchange format.
pub fn render_jet(jet: &Jet) -> String {
    let mut out = format!("jet n={} d={}\n", jet.dim(), jet.degree());
    for (l, alpha, c) in jet.coefficients() {
        out.push_str(&format!("{} {} {:.16e}\n", l, alpha, c));
    }
    out
}

/// Parse the plain-text exchange format produced by [`render_jet`].
/// Blank lines and `#` comments are ignored.
pub fn parse_jet(text: &str) -> Result<Jet, JetParseError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (_, header) = lines.next().ok_or(JetParseError::BadHeader)?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("jet") {
        return Err(JetParseError::BadHeader);
    }
    let (mut n, mut d) = (None, None);
    for field in fields {
        if let Some(v) = field.strip_prefix("n=") {
            n = v.parse::<usize>().ok();
        } else if let Some(v) = field.strip_prefix("d=") {
            d = v.parse::<usize>().ok();
        } else {
            return Err(JetParseError::BadHeader);
        }
    }
    let (n, d) = match (n, d) {
        (Some(n), Some(d)) if n > 0 => (n, d),
        _ => return Err(JetParseError::BadHeader),
    };

    let mut jet = Jet::from_terms(n, d, &[]).expect("empty term list is always valid");
    for (idx, content) in lines {
        let line = idx + 1;
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() != n + 2 {
            return Err(JetParseError::BadLine { line, dim: n });
        }
        let l: usize = toks[0]
            .parse()
            .map_err(|_| JetParseError::BadLine { line, dim: n })?;
        let mut exps = Vec::with_capacity(n);
        for t in &toks[1..=n] {
            exps.push(
                t.parse::<u32>()
                    .map_err(|_| JetParseError::BadLine { line, dim: n })?,
            );
        }
        let value: f64 = toks[n + 1]
            .parse()
            .map_err(|_| JetParseError::BadLine { line, dim: n })?;
        jet.set_coefficient(l, MultiIndex::new(exps), value)
            .map_err(|source| JetParseError::BadCoefficient { line, source })?;
    }
    Ok(jet)
}
