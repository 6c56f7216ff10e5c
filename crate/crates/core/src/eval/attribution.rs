// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::head::ClassifierHead;
use super::metrics::correctness;
use crate::error::{IdaniError, Result};
use crate::repr_store::RepresentationSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenDelta {
    pub token: String,
    /// `(correct after − correct before) / support`.
    pub delta_rate: f64,
    /// Number of rows containing the token.
    pub support: usize,
}

/// Ranks tokens by how much the intervention improved the rows they occur in.
///
/// Each row's token string is split on whitespace; a word counts once per
/// row. Single-token rows therefore attribute to that token alone.
pub fn token_attribution(
    before: &[bool],
    after: &[bool],
    tokens: &[String],
    top_n: usize,
) -> Result<Vec<TokenDelta>> {
    if before.len() != after.len() || before.len() != tokens.len() {
        return Err(IdaniError::InvalidArgument(format!(
            "misaligned inputs: {} before, {} after, {} tokens",
            before.len(),
            after.len(),
            tokens.len()
        )));
    }
    // token -> (sum of after − before, support)
    let mut acc: BTreeMap<&str, (i64, usize)> = BTreeMap::new();
    let mut seen: Vec<&str> = Vec::new();
    for ((&b, &a), text) in before.iter().zip(after).zip(tokens) {
        seen.clear();
        for word in text.split_whitespace() {
            if seen.contains(&word) {
                continue;
            }
            seen.push(word);
            let e = acc.entry(word).or_default();
            e.0 += i64::from(a) - i64::from(b);
            e.1 += 1;
        }
    }
    let mut out: Vec<TokenDelta> = acc
        .into_iter()
        .map(|(token, (diff, support))| TokenDelta {
            token: token.to_string(),
            delta_rate: diff as f64 / support as f64,
            support,
        })
        .collect();
    out.sort_by(|x, y| {
        y.delta_rate
            .total_cmp(&x.delta_rate)
            .then(y.support.cmp(&x.support))
            .then_with(|| x.token.cmp(&y.token))
    });
    out.truncate(top_n);
    Ok(out)
}

/// Attribution between the original target set and its counterfactual,
/// restricted to labeled rows.
pub fn attribute_sets(
    head: &ClassifierHead,
    original: &RepresentationSet,
    counterfactual: &RepresentationSet,
    top_n: usize,
) -> Result<Vec<TokenDelta>> {
    let tokens = original.tokens().ok_or_else(|| {
        IdaniError::Validation(format!("set '{}' carries no tokens", original.domain()))
    })?;
    if counterfactual.n() != original.n() {
        return Err(IdaniError::DimensionMismatch {
            what: "counterfactual rows",
            expected: original.n(),
            got: counterfactual.n(),
        });
    }
    let before = correctness(head, original)?;
    let after = correctness(head, counterfactual)?;
    let mut b = Vec::new();
    let mut a = Vec::new();
    let mut t = Vec::new();
    for ((x, y), tok) in before.iter().zip(&after).zip(tokens) {
        if let (Some(x), Some(y)) = (x, y) {
            b.push(*x);
            a.push(*y);
            t.push(tok.clone());
        }
    }
    token_attribution(&b, &a, &t, top_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fully_fixed_token() {
        let r = token_attribution(
            &[false, false, false, true],
            &[true, true, true, true],
            &toks(&["sushi", "sushi", "sushi", "menu"]),
            10,
        )
        .unwrap();
        assert_eq!(r[0], TokenDelta { token: "sushi".into(), delta_rate: 1.0, support: 3 });
        assert_eq!(r[1], TokenDelta { token: "menu".into(), delta_rate: 0.0, support: 1 });
    }

    #[test]
    fn ordering_ties() {
        let r = token_attribution(
            &[false, false, false, true, true],
            &[true, true, true, true, true],
            &toks(&["b", "a", "a", "c", "d d"]),
            3,
        )
        .unwrap();
        let names: Vec<&str> = r.iter().map(|t| t.token.as_str()).collect();
        // a and b both rate 1.0; a has more support. c and d are 0.0, truncated.
        assert_eq!(names, vec!["a", "b", "c"]);
        let d = token_attribution(&[true], &[true], &toks(&["d d"]), 5).unwrap();
        assert_eq!(d[0].support, 1);
    }

    #[test]
    fn sentence_rows_split_words() {
        let r = token_attribution(
            &[false, true],
            &[true, true],
            &toks(&["the food was great", "the staff"]),
            10,
        )
        .unwrap();
        let the = r.iter().find(|t| t.token == "the").unwrap();
        assert_eq!((the.delta_rate, the.support), (0.5, 2));
    }

    #[test]
    fn misaligned_rejected() {
        assert!(token_attribution(&[true], &[true, false], &toks(&["a"]), 1).is_err());
    }
}
