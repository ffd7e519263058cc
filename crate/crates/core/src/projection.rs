//! Two-dimensional layout of the embedding for the projection view.
//!
//! The only method is PCA: mean-centre, find the top two principal directions
//! of the covariance by power iteration with deflation, and project. Each
//! direction is signed so its largest-magnitude loading is positive, which
//! makes layouts reproducible bit for bit.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gnn::EmbeddingMatrix;
use crate::linalg::{dot, Matrix};

pub const PROJECTION_FILE: &str = "projection.csv";
pub const PROJECTION_HEADER: [&str; 3] = ["id", "x", "y"];

/// Convergence threshold on the change of a unit direction between iterations.
pub const POWER_ITERATION_TOL: f64 = 1e-9;
const MAX_POWER_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    #[default]
    Pca,
}

impl ProjectionMethod {
    pub const ALL: [ProjectionMethod; 1] = [ProjectionMethod::Pca];

    pub fn name(self) -> &'static str {
        match self {
            ProjectionMethod::Pca => "pca",
        }
    }
}

impl fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let available: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidInput(format!(
                    "unknown projection method {s:?}; available: {}",
                    available.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    ids: Vec<String>,
    coords: Vec<[f64; 2]>,
    index: HashMap<String, usize>,
    pub method: ProjectionMethod,
    /// Share of the total variance captured by each axis. Not stored in
    /// `projection.csv`, so it reads back as zero.
    pub explained_variance: [f64; 2],
}

impl Projection2D {
    pub fn new(
        ids: Vec<String>,
        coords: Vec<[f64; 2]>,
        method: ProjectionMethod,
        explained_variance: [f64; 2],
    ) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} coordinates",
                ids.len(),
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinates for {:?}",
                ids[i]
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate projection id {id:?}")));
            }
        }
        Ok(Self {
            ids,
            coords,
            index,
            method,
            explained_variance,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<[f64; 2]> {
        self.index.get(id).map(|&i| self.coords[i])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(PROJECTION_HEADER)?;
        for (id, [x, y]) in self.ids.iter().zip(&self.coords) {
            out.write_record([id.as_str(), &x.to_string(), &y.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        if reader.headers()?.iter().ne(PROJECTION_HEADER) {
            return Err(Error::Ingest {
                source_name: PROJECTION_FILE,
                line: 1,
                message: format!("expected header `{}`", PROJECTION_HEADER.join(",")),
            });
        }
        let mut ids = Vec::new();
        let mut coords = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parse = |field: usize, name: &str| -> Result<f64> {
                record[field].parse().map_err(|e| Error::Ingest {
                    source_name: PROJECTION_FILE,
                    line,
                    message: format!("{name}: {e}"),
                })
            };
            coords.push([parse(1, "x")?, parse(2, "y")?]);
            ids.push(record[0].to_owned());
        }
        Self::new(ids, coords, ProjectionMethod::Pca, [0.0, 0.0])
    }
}

pub fn project(embedding: &EmbeddingMatrix, method: ProjectionMethod) -> Result<Projection2D> {
    match method {
        ProjectionMethod::Pca => {
            let pca = pca_2d(embedding.values())?;
            Projection2D::new(embedding.ids().to_vec(), pca.coords, method, pca.explained_variance)
        }
    }
}

/// Result of a two-component PCA over the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub coords: Vec<[f64; 2]>,
    /// Unit principal directions, one per output axis.
    pub components: [Vec<f64>; 2],
    /// Covariance eigenvalues (divided by `N - 1`) for the two directions.
    pub variances: [f64; 2],
    pub explained_variance: [f64; 2],
}

pub fn pca_2d(x: &Matrix) -> Result<Pca2> {
    let (n, m) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "projection needs at least 2 rows, got {n}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "projection needs at least 2 columns, got {m}"
        )));
    }
    let centered = center_columns(x);
    let mut cov = centered.transpose_matmul(&centered);
    let denom = (n - 1) as f64;
    cov.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
    let total: f64 = (0..m).map(|i| cov.get(i, i)).sum();

    let (v1, l1) = leading_eigenvector(&cov, &[]);
    let deflated = deflate(&cov, &v1, l1);
    let (v2, l2) = leading_eigenvector(&deflated, std::slice::from_ref(&v1));

    let coords = (0..n)
        .map(|r| [dot(centered.row(r), &v1), dot(centered.row(r), &v2)])
        .collect();
    let ratio = |l: f64| if total > 0.0 { (l / total).max(0.0) } else { 0.0 };
    Ok(Pca2 {
        coords,
        explained_variance: [ratio(l1), ratio(l2)],
        variances: [l1.max(0.0), l2.max(0.0)],
        components: [v1, v2],
    })
}

fn center_columns(x: &Matrix) -> Matrix {
    let (n, m) = (x.rows(), x.cols());
    let mut mean = vec![0.0; m];
    for r in 0..n {
        for (acc, &v) in mean.iter_mut().zip(x.row(r)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut out = x.clone();
    for r in 0..n {
        for (v, &mu) in out.row_mut(r).iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    out
}

fn deflate(cov: &Matrix, v: &[f64], lambda: f64) -> Matrix {
    let mut out = cov.clone();
    for i in 0..v.len() {
        for (j, &vj) in v.iter().enumerate() {
            out.set(i, j, out.get(i, j) - lambda * v[i] * vj);
        }
    }
    out
}

fn mul_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..a.rows()).map(|r| dot(a.row(r), v)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Removes the components along each of `basis` (unit vectors).
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, &bx)| *x -= p * bx);
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dominant eigenpair of a symmetric PSD matrix, restricted to the orthogonal
/// complement of `basis`. A numerically zero matrix yields the first unit
/// vector of the complement with eigenvalue zero.
fn leading_eigenvector(a: &Matrix, basis: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let m = a.rows();
    let scale = (0..m).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let fallback = || {
        let mut best = vec![0.0; m];
        let mut best_norm = -1.0;
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            orthogonalize(&mut e, basis);
            let norm = dot(&e, &e);
            if norm > best_norm + 1e-12 {
                best_norm = norm;
                best = e;
            }
        }
        normalize(&mut best);
        fix_sign(&mut best);
        best
    };

    // Start from the column with the largest diagonal entry: it has a
    // non-zero component along the dominant direction unless the matrix is
    // zero on the complement.
    let start = (0..m)
        .max_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)).then(j.cmp(&i)))
        .unwrap_or(0);
    let mut v: Vec<f64> = (0..m).map(|r| a.get(r, start)).collect();
    orthogonalize(&mut v, basis);
    if scale == 0.0 || normalize(&mut v) <= scale * 1e-12 {
        let v = fallback();
        let lambda = dot(&v, &mul_vec(a, &v));
        return (v, lambda);
    }
    fix_sign(&mut v);

    for _ in 0..MAX_POWER_ITERATIONS {
        let mut next = mul_vec(a, &v);
        orthogonalize(&mut next, basis);
        if normalize(&mut next) <= scale * 1e-12 {
            let v = fallback();
            let lambda = dot(&v, &mul_vec(a, &v));
            return (v, lambda);
        }
        fix_sign(&mut next);
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if change < POWER_ITERATION_TOL {
            break;
        }
    }
    let lambda = dot(&v, &mul_vec(a, &v));
    (v, lambda)
}
