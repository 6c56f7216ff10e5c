// SPDX-License-Identifier: MIT OR Apache-2.0

//! Representation sets: storage, validation and per-domain means.
//!
//! A [`RepresentationSet`] is an `n × d` row-major matrix where each row is
//! one example (or one token) taken from a model's hidden layer. Values are
//! kept as `f32`, the width models emit and the width used on disk; every
//! reduction over them is carried out in `f64`.
//!
//! Two on-disk layouts are supported:
//!
//! - **IDNR v1** (binary, little-endian): magic `IDNR`, `u16` version,
//!   `u16` flags (bit 0 labels, bit 1 tokens), `u32` n, `u32` d, `u16`
//!   domain-name length plus UTF-8 bytes, `n·d` `f32` row-major, then
//!   optionally `n` `i32` labels and `n` length-prefixed (`u16`) token strings.
//! - **CSV**: header `neuron_0,…,neuron_{d-1}[,label][,token]`, one row per
//!   example. The domain name is taken from the file stem.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{IdaniError, Result};

const MAGIC: &[u8; 4] = b"IDNR";
const VERSION: u16 = 1;
const FLAG_LABELS: u16 = 0b01;
const FLAG_TOKENS: u16 = 0b10;

/// Label value for rows without a gold label.
pub const UNLABELED: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// `.csv` selects CSV, anything else the binary layout.
    pub fn from_path(path: impl AsRef<Path>) -> Self {
        match path.as_ref().extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Binary => "idnr",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = IdaniError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "idnr" => Ok(Format::Binary),
            "csv" => Ok(Format::Csv),
            other => Err(IdaniError::InvalidArgument(format!(
                "unknown format '{other}' (expected binary or csv)"
            ))),
        }
    }
}

/// An immutable, validated `n × d` matrix of representations.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSet {
    domain: String,
    n: usize,
    d: usize,
    data: Vec<f32>,
    labels: Option<Vec<i32>>,
    tokens: Option<Vec<String>>,
}

impl RepresentationSet {
    /// Builds a set from row-major `data`, checking every invariant.
    pub fn new(
        domain: impl Into<String>,
        d: usize,
        data: Vec<f32>,
        labels: Option<Vec<i32>>,
        tokens: Option<Vec<String>>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(IdaniError::Validation("d must be at least 1".into()));
        }
        if data.is_empty() || data.len() % d != 0 {
            return Err(IdaniError::Validation(format!(
                "data length {} is not a positive multiple of d={d}",
                data.len()
            )));
        }
        let n = data.len() / d;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(IdaniError::Validation(format!(
                "non-finite value {} at row {}, column {}",
                data[pos],
                pos / d,
                pos % d
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(IdaniError::Validation(format!(
                    "{} labels for {n} rows",
                    labels.len()
                )));
            }
            if let Some(row) = labels.iter().position(|&l| l < UNLABELED) {
                return Err(IdaniError::Validation(format!(
                    "label {} out of range at row {row}",
                    labels[row]
                )));
            }
        }
        if let Some(tokens) = &tokens {
            if tokens.len() != n {
                return Err(IdaniError::Validation(format!(
                    "{} tokens for {n} rows",
                    tokens.len()
                )));
            }
        }
        Ok(Self {
            domain: domain.into(),
            n,
            d,
            data,
            labels,
            tokens,
        })
    }

    /// Convenience constructor from nested rows (values narrowed to `f32`).
    pub fn from_rows(domain: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(IdaniError::Validation(format!(
                "row {bad} has {} columns, expected {d}",
                rows[bad].len()
            )));
        }
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(domain, d, data, None, None)
    }

    pub fn with_labels(self, labels: Vec<i32>) -> Result<Self> {
        Self::new(self.domain, self.d, self.data, Some(labels), self.tokens)
    }

    pub fn with_tokens(self, tokens: Vec<String>) -> Result<Self> {
        Self::new(self.domain, self.d, self.data, self.labels, Some(tokens))
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn tokens(&self) -> Option<&[String]> {
        self.tokens.as_deref()
    }

    /// Checks that every label is `-1` or a valid class id below `n_classes`.
    pub fn check_labels(&self, n_classes: usize) -> Result<()> {
        if let Some(labels) = &self.labels {
            if let Some(row) = labels.iter().position(|&l| l >= n_classes as i32) {
                return Err(IdaniError::Validation(format!(
                    "label {} at row {row} exceeds class count {n_classes}",
                    labels[row]
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn into_parts(self) -> (String, usize, Vec<f32>, Option<Vec<i32>>, Option<Vec<String>>) {
        (self.domain, self.d, self.data, self.labels, self.tokens)
    }
}

/// Element-wise mean of one domain's representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVector {
    pub domain: String,
    pub d: usize,
    pub values: Vec<f64>,
}

impl MeanVector {
    pub fn new(domain: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(IdaniError::Validation("mean vector must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IdaniError::Validation("mean vector has non-finite entries".into()));
        }
        Ok(Self {
            domain: domain.into(),
            d: values.len(),
            values,
        })
    }
}

/// Column means using Neumaier-compensated summation in `f64`.
pub fn compute_mean(set: &RepresentationSet) -> MeanVector {
    let d = set.d();
    let mut sum = vec![0.0f64; d];
    let mut comp = vec![0.0f64; d];
    for row in set.rows() {
        for ((s, c), &x) in sum.iter_mut().zip(comp.iter_mut()).zip(row) {
            let x = f64::from(x);
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
    }
    let n = set.n() as f64;
    let values = sum.iter().zip(&comp).map(|(s, c)| (s + c) / n).collect();
    MeanVector {
        domain: set.domain().to_string(),
        d,
        values,
    }
}

pub fn load_set(path: impl AsRef<Path>, format: Format) -> Result<RepresentationSet> {
    let path = path.as_ref();
    match format {
        Format::Binary => {
            let bytes = fs::read(path).map_err(|e| IdaniError::io(path, e))?;
            decode_binary(&bytes)
        }
        Format::Csv => {
            let text = fs::read_to_string(path).map_err(|e| IdaniError::io(path, e))?;
            let domain = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("unknown");
            decode_csv(&text, domain)
        }
    }
}

pub fn save_set(set: &RepresentationSet, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Binary => encode_binary(set)?,
        Format::Csv => encode_csv(set)?.into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| IdaniError::io(path, e))
}

/// Serializes a set to IDNR v1 bytes.
pub fn encode_binary(set: &RepresentationSet) -> Result<Vec<u8>> {
    let n = u32::try_from(set.n())
        .map_err(|_| IdaniError::Validation("n does not fit in u32".into()))?;
    let d = u32::try_from(set.d())
        .map_err(|_| IdaniError::Validation("d does not fit in u32".into()))?;
    let mut flags = 0u16;
    if set.labels.is_some() {
        flags |= FLAG_LABELS;
    }
    if set.tokens.is_some() {
        flags |= FLAG_TOKENS;
    }

    let mut out = Vec::with_capacity(20 + set.domain.len() + set.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    put_str(&mut out, &set.domain, "domain name")?;
    for v in &set.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(labels) = &set.labels {
        for l in labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    if let Some(tokens) = &set.tokens {
        for t in tokens {
            put_str(&mut out, t, "token")?;
        }
    }
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| IdaniError::Validation(format!("{what} longer than 65535 bytes")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(IdaniError::Format(format!(
                "truncated file while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N, what)?);
        Ok(a)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| IdaniError::Format(format!("{what} is not valid UTF-8")))
    }
}

/// Parses IDNR v1 bytes and validates the result.
pub fn decode_binary(bytes: &[u8]) -> Result<RepresentationSet> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(IdaniError::Format(format!(
            "bad magic {:?}, expected \"IDNR\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(IdaniError::Format(format!("unsupported version {version}")));
    }
    let flags = cur.u16("flags")?;
    if flags & !(FLAG_LABELS | FLAG_TOKENS) != 0 {
        return Err(IdaniError::Format(format!("unknown flag bits {flags:#06x}")));
    }
    let n = cur.u32("n")? as usize;
    let d = cur.u32("d")? as usize;
    let domain = cur.string("domain name")?;

    let cells = n
        .checked_mul(d)
        .ok_or_else(|| IdaniError::Format("n·d overflows".into()))?;
    let payload = cur.take(
        cells
            .checked_mul(4)
            .ok_or_else(|| IdaniError::Format("payload size overflows".into()))?,
        "payload",
    )?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let labels = if flags & FLAG_LABELS != 0 {
        let raw = cur.take(n * 4, "labels")?;
        Some(
            raw.chunks_exact(4)
                .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    } else {
        None
    };
    let tokens = if flags & FLAG_TOKENS != 0 {
        Some(
            (0..n)
                .map(|_| cur.string("token"))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    if cur.pos != bytes.len() {
        return Err(IdaniError::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    if n == 0 || d == 0 {
        return Err(IdaniError::Validation(format!("empty set (n={n}, d={d})")));
    }
    RepresentationSet::new(domain, d, data, labels, tokens)
}

pub fn encode_csv(set: &RepresentationSet) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = (0..set.d).map(|i| format!("neuron_{i}")).collect();
    if set.labels.is_some() {
        header.push("label".into());
    }
    if set.tokens.is_some() {
        header.push("token".into());
    }
    let csv_err = |e: csv::Error| IdaniError::Format(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (i, row) in set.rows().enumerate() {
        // `{}` on f32 prints the shortest string that parses back to the same value.
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = &set.labels {
            rec.push(labels[i].to_string());
        }
        if let Some(tokens) = &set.tokens {
            rec.push(tokens[i].clone());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IdaniError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| IdaniError::Format(e.to_string()))
}

pub fn decode_csv(text: &str, domain: &str) -> Result<RepresentationSet> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| IdaniError::Format(format!("cannot read header: {e}")))?
        .clone();

    let mut d = 0;
    while header.get(d) == Some(format!("neuron_{d}").as_str()) {
        d += 1;
    }
    let mut rest = header.iter().skip(d);
    let mut has_labels = false;
    let mut has_tokens = false;
    let mut next = rest.next();
    if next == Some("label") {
        has_labels = true;
        next = rest.next();
    }
    if next == Some("token") {
        has_tokens = true;
        next = rest.next();
    }
    if let Some(col) = next {
        return Err(IdaniError::Format(format!(
            "unexpected header column '{col}' at position {}",
            header.iter().position(|h| h == col).unwrap_or(0)
        )));
    }
    if d == 0 {
        return Err(IdaniError::Format("header has no neuron_0 column".into()));
    }

    let mut data = Vec::new();
    let mut labels = has_labels.then(Vec::new);
    let mut tokens = has_tokens.then(Vec::new);
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| IdaniError::Format(format!("row {row}: {e}")))?;
        if rec.len() != header.len() {
            return Err(IdaniError::Format(format!(
                "row {row} has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        for col in 0..d {
            let field = rec[col].trim();
            let v: f32 = field.parse().map_err(|_| {
                IdaniError::Format(format!("row {row}, column {col}: cannot parse '{field}'"))
            })?;
            if !v.is_finite() {
                return Err(IdaniError::Validation(format!(
                    "non-finite value at row {row}, column {col}"
                )));
            }
            data.push(v);
        }
        if let Some(labels) = labels.as_mut() {
            let field = rec[d].trim();
            labels.push(field.parse().map_err(|_| {
                IdaniError::Format(format!("row {row}: cannot parse label '{field}'"))
            })?);
        }
        if let Some(tokens) = tokens.as_mut() {
            tokens.push(rec[header.len() - 1].to_string());
        }
    }
    if data.is_empty() {
        return Err(IdaniError::Validation("CSV has no data rows".into()));
    }
    RepresentationSet::new(domain, d, data, labels, tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[Vec<f64>]) -> RepresentationSet {
        RepresentationSet::from_rows("s", rows).unwrap()
    }

    #[test]
    fn csv_header_with_labels_parses() {
        let s = decode_csv("neuron_0,neuron_1,label\n1.0,2.0,0\n3.0,4.0,1\n", "x").unwrap();
        assert_eq!((s.n(), s.d()), (2, 2));
        assert_eq!(s.labels(), Some(&[0, 1][..]));
        assert_eq!(s.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn csv_tokens_with_commas_round_trip() {
        let s = set(&[vec![0.1, -2.5]])
            .with_tokens(vec!["a, \"quoted\" word".into()])
            .unwrap();
        let back = decode_csv(&encode_csv(&s).unwrap(), "s").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_rejects_unknown_column() {
        let err = decode_csv("neuron_0,foo\n1,2\n", "x").unwrap_err();
        assert!(matches!(err, IdaniError::Format(_)), "{err}");
    }

    #[test]
    fn csv_rejects_nan() {
        let err = decode_csv("neuron_0,neuron_1\n1,NaN\n", "x").unwrap_err();
        assert!(err.to_string().contains("row 0, column 1"), "{err}");
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode_binary(&set(&[vec![1.0]])).unwrap();
        bytes[..4].copy_from_slice(b"NOPE");
        assert!(matches!(decode_binary(&bytes), Err(IdaniError::Format(_))));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let bytes = encode_binary(&set(&[vec![1.0, 2.0]])).unwrap();
        let err = decode_binary(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, IdaniError::Format(_)));
    }

    #[test]
    fn binary_nan_reports_row_and_column() {
        let mut bytes = encode_binary(&set(&[vec![1.0, 2.0], vec![3.0, 4.0]])).unwrap();
        // header: 4 magic + 2 + 2 + 4 + 4 + 2 + len("s")
        let payload = 4 + 2 + 2 + 4 + 4 + 2 + 1;
        let off = payload + 3 * 4;
        bytes[off..off + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        let err = decode_binary(&bytes).unwrap_err();
        assert!(err.to_string().contains("row 1, column 1"), "{err}");
    }

    #[test]
    fn label_below_minus_one_rejected() {
        let err = set(&[vec![1.0]]).with_labels(vec![-2]).unwrap_err();
        assert!(matches!(err, IdaniError::Validation(_)));
        let ok = set(&[vec![1.0]]).with_labels(vec![1]).unwrap();
        assert!(ok.check_labels(2).is_ok());
        assert!(ok.check_labels(1).is_err());
    }

    #[test]
    fn token_flag_bit_set() {
        let s = set(&[vec![1.0]]).with_tokens(vec!["tok".into()]).unwrap();
        let bytes = encode_binary(&s).unwrap();
        let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
        assert_eq!(flags & FLAG_TOKENS, FLAG_TOKENS);
        assert_eq!(flags & FLAG_LABELS, 0);
    }

    #[test]
    fn mean_examples() {
        let m = compute_mean(&set(&[vec![1.0, 3.0], vec![3.0, 5.0]]));
        assert_eq!(m.values, vec![2.0, 4.0]);
        let m = compute_mean(&set(&[vec![7.0, -1.0]]));
        assert_eq!(m.values, vec![7.0, -1.0]);
        let m = compute_mean(&set(&[vec![1.0, 0.0], vec![-1.0, 0.0]]));
        assert_eq!(m.values, vec![0.0, 0.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(RepresentationSet::from_rows("x", &[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(RepresentationSet::from_rows("x", &[]).is_err());
    }
}
