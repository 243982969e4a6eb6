//! Gender subspace identification by PCA over definitional word pairs, and
//! projection onto / rejection from the fitted subspace.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// Centered vectors shorter than this carry no direction.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Word pairs that differ by definition along the attribute of interest,
/// ordered `(male, female)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitionalPairSet {
    pairs: Vec<(String, String)>,
    source: Option<PathBuf>,
}

impl DefinitionalPairSet {
    pub fn new<A: Into<String>, B: Into<String>>(pairs: impl IntoIterator<Item = (A, B)>) -> Result<Self> {
        let pairs: Vec<(String, String)> = pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        if pairs.is_empty() {
            return Err(Error::invalid("definitional pair set is empty"));
        }
        if let Some((a, _)) = pairs.iter().find(|(a, b)| a == b) {
            return Err(Error::invalid(format!("pair ({a:?}, {a:?}) has identical members")));
        }
        Ok(DefinitionalPairSet { pairs, source: None })
    }

    /// Parses a JSON array of two-element string arrays.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<Vec<String>> =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("pairs file: {e}")))?;
        let mut pairs = Vec::with_capacity(raw.len());
        for (i, p) in raw.into_iter().enumerate() {
            match <[String; 2]>::try_from(p) {
                Ok([a, b]) => pairs.push((a, b)),
                Err(p) => {
                    return Err(Error::invalid(format!(
                        "pairs file: entry {i} has {} members, expected 2",
                        p.len()
                    )))
                }
            }
        }
        Self::new(pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut set = Self::from_json(&text)?;
        set.source = Some(path.to_path_buf());
        Ok(set)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every token mentioned by the set, in pair order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().flat_map(|(a, b)| [a.as_str(), b.as_str()])
    }
}

/// An orthonormal basis for the bias direction(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderSubspace {
    pub dim: usize,
    pub k: usize,
    pub basis: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub fitted_from: usize,
}

impl GenderSubspace {
    /// Wraps an explicit basis after checking it is orthonormal within `1e-8`.
    pub fn from_basis(basis: Vec<Vec<f64>>) -> Result<Self> {
        let k = basis.len();
        let dim = basis.first().map_or(0, Vec::len);
        let g = GenderSubspace {
            dim,
            k,
            basis,
            explained_variance: vec![0.0; k],
            fitted_from: 0,
        };
        g.validate(1e-8)?;
        Ok(g)
    }

    pub fn direction(&self) -> &[f64] {
        &self.basis[0]
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.k == 0 || self.basis.len() != self.k || self.dim == 0 {
            return Err(Error::invalid("subspace must have at least one basis vector"));
        }
        if self.explained_variance.len() != self.k {
            return Err(Error::invalid("explained_variance length differs from k"));
        }
        for (i, b) in self.basis.iter().enumerate() {
            if b.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: b.len(),
                });
            }
            for (j, c) in self.basis.iter().enumerate().skip(i) {
                let want = if i == j { 1.0 } else { 0.0 };
                if (linalg::dot(b, c) - want).abs() > tol {
                    return Err(Error::invalid(format!("basis vectors {i} and {j} are not orthonormal")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("subspace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GenderSubspace =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("subspace file: {e}")))?;
        g.validate(1e-6)?;
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Coordinates of `v` along each basis vector.
    pub fn coordinates(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        Ok(self.basis.iter().map(|b| linalg::dot(v, b)).collect())
    }
}

/// Component of `v` inside the span of the basis.
pub fn project(v: &[f64], g: &GenderSubspace) -> Result<Vec<f64>> {
    let coords = g.coordinates(v)?;
    let mut out = vec![0.0; g.dim];
    for (c, b) in coords.iter().zip(&g.basis) {
        linalg::axpy(&mut out, *c, b);
    }
    Ok(out)
}

/// `v` minus its projection onto the subspace.
pub fn reject(v: &[f64], g: &GenderSubspace) -> Result<Vec<f64>> {
    let p = project(v, g)?;
    Ok(linalg::sub(v, &p))
}

/// Fits a `k`-dimensional subspace by PCA over pair-centered vectors.
///
/// Each resolvable pair `(a, b)` contributes `a − μ` and `b − μ` where
/// `μ = (a + b) / 2`. The basis is the top-`k` eigenvectors of `MᵀM`, and
/// `explained_variance` holds their eigenvalues divided by `trace(MᵀM)`.
/// The first basis vector is oriented so that `b − a` of the first resolved
/// pair has a non-negative coordinate along it; later vectors put their
/// largest-magnitude coordinate on the positive side.
pub fn fit_subspace(m: &EmbeddingMatrix, pairs: &DefinitionalPairSet, k: usize) -> Result<GenderSubspace> {
    let dim = m.dim();
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > dim {
        return Err(Error::KTooLarge { k, dim });
    }

    let mut rows = Vec::new();
    let mut first_difference = None;
    let mut used = 0;
    for (a, b) in pairs.pairs() {
        let (Some(va), Some(vb)) = (m.lookup(a), m.lookup(b)) else {
            warn!("definitional pair ({a}, {b}) not in vocabulary; dropped");
            continue;
        };
        used += 1;
        let half_diff: Vec<f64> = va.vec.iter().zip(vb.vec).map(|(x, y)| (x - y) / 2.0).collect();
        if first_difference.is_none() {
            first_difference = Some(linalg::sub(vb.vec, va.vec));
        }
        rows.push(half_diff.iter().map(|x| -x).collect::<Vec<_>>());
        rows.push(half_diff);
    }
    if used == 0 {
        return Err(Error::NoPairsResolvable);
    }
    rows.retain(|r| linalg::norm(r) >= DEGENERATE_NORM);
    if rows.is_empty() {
        return Err(Error::DegeneratePairs);
    }

    let (values, mut basis, total) = if rows.len() < dim {
        principal_axes_via_rows(&rows, dim, k)?
    } else {
        principal_axes_via_covariance(&rows, dim, k)?
    };

    let reference = first_difference.expect("at least one pair used");
    for (i, b) in basis.iter_mut().enumerate() {
        let flip = if i == 0 {
            linalg::dot(b, &reference) < 0.0
        } else {
            let (_, max) = b.iter().enumerate().fold(
                (0, 0.0f64),
                |acc, (j, x)| if x.abs() > acc.1.abs() { (j, *x) } else { acc },
            );
            max < 0.0
        };
        if flip {
            b.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let explained_variance = values.iter().map(|v| (v.max(0.0) / total).min(1.0)).collect();
    let g = GenderSubspace {
        dim,
        k,
        basis,
        explained_variance,
        fitted_from: used,
    };
    debug_assert!(g.validate(1e-8).is_ok());
    Ok(g)
}

/// Top-`k` eigenpairs of the `dim × dim` scatter matrix `MᵀM`.
pub(crate) fn principal_axes_via_covariance(
    rows: &[Vec<f64>],
    dim: usize,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    let scatter = SymMatrix::gram_columns(rows, dim);
    let total = scatter.trace();
    let eig = linalg::symmetric_eigen(&scatter)?;
    let basis = linalg::orthonormalize(&eig.vectors[..k]);
    Ok((eig.values[..k].to_vec(), basis, total))
}

/// Same axes through the smaller `n × n` Gram matrix `MMᵀ`: each right
/// singular vector is `Mᵀu / √λ` for an eigenpair `(λ, u)`. Directions beyond
/// the rank of `M` have eigenvalue zero and are completed from the standard
/// basis.
pub(crate) fn principal_axes_via_rows(
    rows: &[Vec<f64>],
    dim: usize,
    k: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    let gram = SymMatrix::gram_rows(rows);
    let total = gram.trace();
    let eig = linalg::symmetric_eigen(&gram)?;
    let floor = total * 1e-12;

    let mut values = Vec::with_capacity(k);
    let mut axes = Vec::with_capacity(k);
    for (lambda, u) in eig.values.iter().zip(&eig.vectors).take(k) {
        if *lambda <= floor {
            break;
        }
        let mut axis = vec![0.0; dim];
        for (coef, row) in u.iter().zip(rows) {
            linalg::axpy(&mut axis, *coef, row);
        }
        values.push(*lambda);
        axes.push(axis);
    }
    let mut basis = linalg::orthonormalize(&axes);
    let mut e = 0;
    while basis.len() < k && e < dim {
        let mut unit = vec![0.0; dim];
        unit[e] = 1.0;
        let mut candidate = basis.clone();
        candidate.push(unit);
        let extended = linalg::orthonormalize(&candidate);
        if extended.len() > basis.len() {
            basis = extended;
            values.push(0.0);
        }
        e += 1;
    }
    Ok((values, basis, total))
}
