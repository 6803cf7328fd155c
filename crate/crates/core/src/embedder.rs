//! Signed feature-hash embeddings of claim text.
//!
//! Features are lowercase word unigrams and character trigrams of the
//! whitespace-normalized text (padded with one space on each side). Each
//! feature is hashed with a seeded FNV-1a/fmix64 hash: the top bit gives the
//! sign and `hash % dim` the bucket. Counts are L2-normalized.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::ClaimSet;

pub const DEFAULT_DIM: usize = 256;

/// Published seed of the feature hash. Changing it changes every embedding.
pub const FEATURE_HASH_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

const BINARY_MAGIC: &[u8; 4] = b"DCMX";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row {row} is not unit-normalized (norm {norm})")]
    NotNormalized { row: usize, norm: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// 64-bit FNV-1a followed by the MurmurHash3 finalizer.
pub fn stable_hash64(bytes: &[u8], seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        let norm = l2_norm(&values);
        Self { values, norm }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(values: Vec<f64>) -> Self {
        Self::from_values(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let denom = l2_norm(a) * l2_norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

fn features(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out: Vec<String> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| format!("w:{w}"))
        .collect();
    let padded: Vec<char> = std::iter::once(' ')
        .chain(lower.split_whitespace().collect::<Vec<_>>().join(" ").chars())
        .chain(std::iter::once(' '))
        .collect();
    out.extend(padded.windows(3).map(|w| {
        let mut f = String::from("c:");
        f.extend(w);
        f
    }));
    out
}

pub fn embed(text: &str, dim: usize) -> Result<EmbeddingVector, EmbedError> {
    if dim == 0 {
        return Err(EmbedError::ZeroDimension);
    }
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let feats = features(text);
    let mut signed = vec![0.0f64; dim];
    let mut unsigned = vec![0.0f64; dim];
    for f in &feats {
        let h = stable_hash64(f.as_bytes(), FEATURE_HASH_SEED);
        let bucket = (h % dim as u64) as usize;
        signed[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        unsigned[bucket] += 1.0;
    }
    // Signed counts can cancel exactly on very short texts.
    let mut values = if signed.iter().any(|&x| x != 0.0) { signed } else { unsigned };
    let norm = l2_norm(&values);
    values.iter_mut().for_each(|x| *x /= norm);
    Ok(EmbeddingVector::from_values(values))
}

/// Row-major matrix of unit-norm corpus embeddings with aligned claim ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusMatrix {
    dim: usize,
    data: Vec<f64>,
    claim_ids: Vec<String>,
}

impl CorpusMatrix {
    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>, claim_ids: Vec<String>) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        if rows.is_empty() {
            return Err(EmbedError::EmptyCorpus);
        }
        if rows.len() != claim_ids.len() {
            return Err(EmbedError::DimensionMismatch {
                expected: rows.len(),
                got: claim_ids.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(EmbedError::DimensionMismatch { expected: dim, got: row.len() });
            }
            let norm = l2_norm(&row);
            if (norm - 1.0).abs() > 1e-9 {
                return Err(EmbedError::NotNormalized { row: i, norm });
            }
            data.extend(row);
        }
        Ok(Self { dim, data, claim_ids })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.claim_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn claim_ids(&self) -> &[String] {
        &self.claim_ids
    }

    /// Writes `d,n`, then one `id,v1,..,vd` line per row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        let io = |source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        };
        crate::io::atomic_write(path, |w| {
            writeln!(w, "{},{}", self.dim, self.n_rows())?;
            for (id, row) in self.claim_ids.iter().zip(self.rows()) {
                write!(w, "{}", csv_field(id))?;
                for v in row {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
        .map_err(io)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let fmt_err = |message: String| EmbedError::Format {
            path: path.to_path_buf(),
            message,
        };
        let file = File::open(path).map_err(|source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(BufReader::new(file));
        let mut records = reader.records();
        let header = records
            .next()
            .ok_or_else(|| fmt_err("missing header".into()))?
            .map_err(|e| fmt_err(e.to_string()))?;
        let parse_usize = |s: Option<&str>| -> Result<usize, EmbedError> {
            s.ok_or_else(|| fmt_err("short header".into()))?
                .trim()
                .parse()
                .map_err(|e| fmt_err(format!("bad header: {e}")))
        };
        let dim = parse_usize(header.get(0))?;
        let n = parse_usize(header.get(1))?;
        let mut rows = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for record in records {
            let record = record.map_err(|e| fmt_err(e.to_string()))?;
            let mut fields = record.iter();
            ids.push(fields.next().unwrap_or_default().to_string());
            let row = fields
                .map(|v| v.trim().parse::<f64>().map_err(|e| fmt_err(format!("row {}: {e}", rows.len()))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(fmt_err(format!("header declares {n} rows, found {}", rows.len())));
        }
        Self::from_rows(dim, rows, ids)
    }

    /// Little-endian binary: magic, version, d, n, row-major f64 values, then ids.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        crate::io::atomic_write(path, |w| {
            w.write_all(BINARY_MAGIC)?;
            w.write_all(&BINARY_VERSION.to_le_bytes())?;
            w.write_all(&(self.dim as u64).to_le_bytes())?;
            w.write_all(&(self.n_rows() as u64).to_le_bytes())?;
            for v in &self.data {
                w.write_all(&v.to_le_bytes())?;
            }
            for id in &self.claim_ids {
                w.write_all(&(id.len() as u32).to_le_bytes())?;
                w.write_all(id.as_bytes())?;
            }
            Ok(())
        })
        .map_err(|source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let fmt_err = |message: &str| EmbedError::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        let io = |source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != BINARY_MAGIC {
            return Err(fmt_err("not a corpus matrix file"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        if u32::from_le_bytes(b4) != BINARY_VERSION {
            return Err(fmt_err("unsupported version"));
        }
        r.read_exact(&mut b8).map_err(io)?;
        let dim = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8).map_err(io)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = Vec::with_capacity(dim);
            for _ in 0..dim {
                r.read_exact(&mut b8).map_err(io)?;
                row.push(f64::from_le_bytes(b8));
            }
            rows.push(row);
        }
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b4).map_err(io)?;
            let mut buf = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut buf).map_err(io)?;
            ids.push(String::from_utf8(buf).map_err(|_| fmt_err("id is not UTF-8"))?);
        }
        Self::from_rows(dim, rows, ids)
    }

    /// Picks the format from the extension: `.csv` or anything else as binary.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        if is_csv(path.as_ref()) {
            self.write_csv(path)
        } else {
            self.write_binary(path)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        if is_csv(path.as_ref()) {
            Self::read_csv(path)
        } else {
            Self::read_binary(path)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn embed_corpus(corpus: &ClaimSet, dim: usize) -> Result<CorpusMatrix, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for claim in corpus {
        rows.push(embed(&claim.text, dim)?.into_values());
    }
    let ids = corpus.iter().map(|c| c.id.clone()).collect();
    CorpusMatrix::from_rows(dim, rows, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::{Claim, ClaimSource};

    #[test]
    fn deterministic_and_unit() {
        let a = embed("abc", 64).unwrap();
        let b = embed("abc", 64).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert!((l2_norm(a.values()) - a.norm()).abs() < 1e-12);
    }

    #[test]
    fn case_insensitive() {
        assert_eq!(embed("The Earth", 32).unwrap(), embed("the earth", 32).unwrap());
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(embed("  \t", 64), Err(EmbedError::EmptyText)));
        assert!(matches!(embed("x", 0), Err(EmbedError::ZeroDimension)));
    }

    #[test]
    fn trigram_features_cover_padded_text() {
        let f = features("Ab  c");
        assert_eq!(f, vec!["w:ab", "w:c", "c: ab", "c:ab ", "c:b c", "c: c "]);
    }

    #[test]
    fn shared_words_give_partial_similarity() {
        let a = embed("paris is the capital of france", 64).unwrap();
        let b = embed("paris is the capital of germany", 64).unwrap();
        let c = cosine(a.values(), b.values());
        assert!(c > 0.0 && c < 1.0, "cosine {c}");
    }

    fn set(texts: &[&str]) -> ClaimSet {
        let claims = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Claim::new(format!("c{i}"), *t, None).unwrap())
            .collect();
        ClaimSet::new(claims, ClaimSource::Synthetic).unwrap()
    }

    #[test]
    fn corpus_rows_match_embed() {
        let corpus = set(&["one fact", "another fact", "one fact"]);
        let m = embed_corpus(&corpus, 32).unwrap();
        assert_eq!(m.n_rows(), 3);
        assert_eq!(m.row(0), embed("one fact", 32).unwrap().values());
        assert_eq!(m.row(0), m.row(2));
        assert_eq!(m.claim_ids(), ["c0", "c1", "c2"]);
    }

    #[test]
    fn single_claim_corpus() {
        let m = embed_corpus(&set(&["solo"]), 16).unwrap();
        assert_eq!((m.n_rows(), m.dim()), (1, 16));
    }

    #[test]
    fn empty_corpus_rejected() {
        let empty = ClaimSet::new(vec![], ClaimSource::Synthetic).unwrap();
        assert!(matches!(embed_corpus(&empty, 8), Err(EmbedError::EmptyCorpus)));
    }

    #[test]
    fn matrix_file_formats_roundtrip() {
        let m = embed_corpus(&set(&["a, quoted \"id\" text", "b", "c d e"]), 24).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["m.csv", "m.bin"] {
            let p = dir.path().join(name);
            m.save(&p).unwrap();
            assert_eq!(CorpusMatrix::load(&p).unwrap(), m);
        }
    }

    #[test]
    fn unnormalized_rows_rejected() {
        let err = CorpusMatrix::from_rows(2, vec![vec![1.0, 1.0]], vec!["x".into()]).unwrap_err();
        assert!(matches!(err, EmbedError::NotNormalized { row: 0, .. }));
    }
}
