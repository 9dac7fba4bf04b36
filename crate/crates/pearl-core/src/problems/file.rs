//! Self-describing problem files: JSON with a `kind` tag, generator metadata
//! (seed and spectrum bounds) where applicable, and matrices stored row-major
//! so instances replay byte-for-byte.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::problems::minimax::{MinimaxGeneratorMeta, QuadraticMinimaxGame};
use crate::problems::nplayer::{NPlayerGeneratorMeta, NPlayerQuadraticGame};
use crate::problems::robot::RobotControlGame;
use crate::problems::sine::SineNonCocoerciveGame;
use crate::problems::AnyProblem;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("malformed problem file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("inconsistent problem data: {0}")]
    Inconsistent(String),
}

type Rows = Vec<Vec<f64>>;

fn mat_to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn rows_to_mat(rows: &Rows) -> Result<DMatrix<f64>, ProblemFileError> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(ProblemFileError::Inconsistent("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(ProblemFileError::Inconsistent("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimaxFile {
    pub meta: Option<MinimaxGeneratorMeta>,
    pub batch_size: usize,
    pub a_mats: Vec<Rows>,
    pub b_mats: Vec<Rows>,
    pub c_mats: Vec<Rows>,
    pub a_vecs: Vec<Vec<f64>>,
    pub c_vecs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NPlayerFile {
    pub meta: Option<NPlayerGeneratorMeta>,
    pub n: usize,
    pub batch_size: usize,
    pub mu_certificate: f64,
    /// `a_mats[i][m]`
    pub a_mats: Vec<Vec<Rows>>,
    /// Upper-triangle coupling blocks `b_upper[k][m]` for pairs `(i, j)`,
    /// `i < j`, in lexicographic order; the lower blocks are `-B^T`.
    pub b_upper: Vec<Vec<Rows>>,
    pub a_vecs: Vec<Vec<Vec<f64>>>,
}

/// Tagged union of every problem kind the library can persist.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemFile {
    QuadMinimax(MinimaxFile),
    NplayerQuadratic(NPlayerFile),
    RobotControl(RobotControlGame),
    SineGame(SineNonCocoerciveGame),
}

impl ProblemFile {
    pub fn from_problem(problem: &AnyProblem) -> Self {
        match problem {
            AnyProblem::Minimax(g) => {
                let (a, b, c, av, cv) = g.samples();
                ProblemFile::QuadMinimax(MinimaxFile {
                    meta: g.meta().cloned(),
                    batch_size: g.batch_size(),
                    a_mats: a.iter().map(mat_to_rows).collect(),
                    b_mats: b.iter().map(mat_to_rows).collect(),
                    c_mats: c.iter().map(mat_to_rows).collect(),
                    a_vecs: av.iter().map(|v| v.as_slice().to_vec()).collect(),
                    c_vecs: cv.iter().map(|v| v.as_slice().to_vec()).collect(),
                })
            }
            AnyProblem::NPlayer(g) => {
                let n = g.players();
                let mut a_mats = Vec::with_capacity(n);
                let mut a_vecs = Vec::with_capacity(n);
                for i in 0..n {
                    let (mats, vecs) = g.own_samples(i);
                    a_mats.push(mats.iter().map(mat_to_rows).collect());
                    a_vecs.push(vecs.iter().map(|v| v.as_slice().to_vec()).collect());
                }
                let mut b_upper = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        b_upper.push(g.coupling_samples(i, j).iter().map(mat_to_rows).collect());
                    }
                }
                ProblemFile::NplayerQuadratic(NPlayerFile {
                    meta: g.meta().cloned(),
                    n,
                    batch_size: g.batch_size(),
                    mu_certificate: g.mu_certificate(),
                    a_mats,
                    b_upper,
                    a_vecs,
                })
            }
            AnyProblem::Robot(g) => ProblemFile::RobotControl(g.clone()),
            AnyProblem::Sine(g) => ProblemFile::SineGame(g.clone()),
        }
    }

    pub fn into_problem(self) -> Result<AnyProblem, ProblemFileError> {
        match self {
            ProblemFile::QuadMinimax(f) => {
                let a = f.a_mats.iter().map(rows_to_mat).collect::<Result<Vec<_>, _>>()?;
                let b = f.b_mats.iter().map(rows_to_mat).collect::<Result<Vec<_>, _>>()?;
                let c = f.c_mats.iter().map(rows_to_mat).collect::<Result<Vec<_>, _>>()?;
                let av = f.a_vecs.iter().map(|v| DVector::from_row_slice(v)).collect();
                let cv = f.c_vecs.iter().map(|v| DVector::from_row_slice(v)).collect();
                let mut game = QuadraticMinimaxGame::from_parts(a, b, c, av, cv)
                    .map_err(|e| ProblemFileError::Inconsistent(e.to_string()))?
                    .with_batch_size(f.batch_size)
                    .map_err(|e| ProblemFileError::Inconsistent(e.to_string()))?;
                if let Some(meta) = f.meta {
                    game = game.with_meta(meta);
                }
                Ok(AnyProblem::Minimax(game))
            }
            ProblemFile::NplayerQuadratic(f) => {
                let n = f.n;
                let mut a_mats = Vec::with_capacity(n);
                for per_m in &f.a_mats {
                    a_mats.push(per_m.iter().map(rows_to_mat).collect::<Result<Vec<_>, _>>()?);
                }
                let a_vecs: Vec<Vec<DVector<f64>>> = f
                    .a_vecs
                    .iter()
                    .map(|per_m| per_m.iter().map(|v| DVector::from_row_slice(v)).collect())
                    .collect();
                let mut b_mats = vec![vec![Vec::new(); n]; n];
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let upper = f
                            .b_upper
                            .get(k)
                            .ok_or_else(|| {
                                ProblemFileError::Inconsistent("missing coupling blocks".into())
                            })?
                            .iter()
                            .map(rows_to_mat)
                            .collect::<Result<Vec<_>, _>>()?;
                        b_mats[j][i] = upper.iter().map(|m| -m.transpose()).collect();
                        b_mats[i][j] = upper;
                        k += 1;
                    }
                }
                let mut game =
                    NPlayerQuadraticGame::from_parts(a_mats, b_mats, a_vecs, f.mu_certificate)
                        .map_err(|e| ProblemFileError::Inconsistent(e.to_string()))?
                        .with_batch_size(f.batch_size)
                        .map_err(|e| ProblemFileError::Inconsistent(e.to_string()))?;
                if let Some(meta) = f.meta {
                    game = game.with_meta(meta);
                }
                Ok(AnyProblem::NPlayer(game))
            }
            ProblemFile::RobotControl(g) => Ok(AnyProblem::Robot(
                g.validated().map_err(|e| ProblemFileError::Inconsistent(e.to_string()))?,
            )),
            ProblemFile::SineGame(g) => {
                let (mu, ell) = g.moduli();
                Ok(AnyProblem::Sine(
                    SineNonCocoerciveGame::new(mu, ell)
                        .map_err(|e| ProblemFileError::Inconsistent(e.to_string()))?,
                ))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem files always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemFileError> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical serialization; identifies the instance in run
    /// metadata.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
