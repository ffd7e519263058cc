use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid, Matrix};

pub const EMBEDDING_FILE: &str = "embedding.bin";
const MAGIC: &[u8; 4] = b"REKM";
const VERSION: u32 = 1;

/// Learned N×M node embedding with its id → row index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Matrix,
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkScore {
    pub source: String,
    pub destination: String,
    pub probability: f64,
}

impl EmbeddingMatrix {
    pub fn new(values: Matrix, ids: Vec<String>) -> Result<Self> {
        if values.rows() != ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} embedding rows for {} ids",
                values.rows(),
                ids.len()
            )));
        }
        if !values.is_finite() {
            return Err(Error::InvalidInput("embedding has non-finite entries".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate embedding id {id:?}")));
            }
        }
        Ok(Self { values, ids, index })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::node_not_found(id))
    }

    pub fn vector(&self, id: &str) -> Result<&[f64]> {
        Ok(self.values.row(self.row_of(id)?))
    }

    /// `sigmoid(z_i · z_j)` by row index.
    #[inline]
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        sigmoid(dot(self.values.row(i), self.values.row(j)))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.values.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.values.cols() as u64).to_le_bytes())?;
        for v in self.values.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        for id in &self.ids {
            let len = u32::try_from(id.len())
                .map_err(|_| Error::InvalidInput(format!("node id too long: {id:?}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: &str| Error::Format(format!("{EMBEDDING_FILE}: {msg}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(|_| bad("truncated header"))?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        let n = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("row count"))?;
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        let m = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("column count"))?;
        let total = n.checked_mul(m).ok_or_else(|| bad("matrix too large"))?;

        let mut data = Vec::with_capacity(total.min(1 << 24));
        for _ in 0..total {
            r.read_exact(&mut b8).map_err(|_| bad("truncated values"))?;
            data.push(f64::from_le_bytes(b8));
        }
        let mut ids = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            r.read_exact(&mut b4).map_err(|_| bad("truncated ids"))?;
            let mut buf = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut buf).map_err(|_| bad("truncated ids"))?;
            ids.push(String::from_utf8(buf).map_err(|_| bad("node id is not UTF-8"))?);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes"));
        }
        Self::new(Matrix::from_vec(n, m, data), ids)
    }
}

/// Link probability between two indexed nodes.
pub fn score_pair(embedding: &EmbeddingMatrix, u: &str, v: &str) -> Result<LinkScore> {
    let i = embedding.row_of(u)?;
    let j = embedding.row_of(v)?;
    Ok(LinkScore {
        source: u.to_owned(),
        destination: v.to_owned(),
        probability: embedding.probability(i, j),
    })
}

/// Descending probability, then ascending destination id.
pub(crate) fn ranking_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Scores `source` against `candidates` (every other node when `None`),
/// ranked by descending probability with ties broken by destination id.
pub fn score_all(
    embedding: &EmbeddingMatrix,
    source: &str,
    candidates: Option<&[&str]>,
) -> Result<Vec<LinkScore>> {
    let s = embedding.row_of(source)?;
    let rows: Vec<usize> = match candidates {
        Some(list) => list
            .iter()
            .map(|id| embedding.row_of(id))
            .collect::<Result<_>>()?,
        None => (0..embedding.len()).filter(|&j| j != s).collect(),
    };
    let mut scored: Vec<(f64, usize)> = rows
        .into_iter()
        .map(|j| (embedding.probability(s, j), j))
        .collect();
    scored.sort_by(|a, b| ranking_order((a.0, &embedding.ids[a.1]), (b.0, &embedding.ids[b.1])));
    Ok(scored
        .into_iter()
        .map(|(p, j)| LinkScore {
            source: source.to_owned(),
            destination: embedding.ids[j].clone(),
            probability: p,
        })
        .collect())
}
