//! JSON input documents and their conversion to library types.

use super::CliError;
use crate::gauge::{CollarConnection, CollarGrid};
use crate::hilbcx::FiniteHilbertComplex;
use crate::localsys::LocalSystem;
use crate::numlin::{CMatrix, C64};
use crate::simplicial::{split_input, Simplex, SimplicialComplex, SplitComplex};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Rows of `[re, im]` pairs.
pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_doc(m: &CMatrix) -> MatrixDoc {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_doc(doc: &MatrixDoc, rows: usize, cols: usize, what: &str) -> Result<CMatrix, CliError> {
    if doc.len() != rows || doc.iter().any(|r| r.len() != cols) {
        return Err(CliError::Malformed(format!("{what}: expected a {rows}x{cols} matrix")));
    }
    if doc.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Malformed(format!("{what}: non-finite entry")));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| C64::new(doc[i][j][0], doc[i][j][1])))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex: Option<ComplexDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_system: Option<LocalSystemDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collar: Option<CollarDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hilbert_complex: Option<HilbertDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Params>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDoc {
    /// Keyed by dimension: `"0"`, `"1"`, ...
    pub simplices: BTreeMap<String, Vec<Simplex>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitDoc {
    pub part1: Vec<Simplex>,
    pub part2: Vec<Simplex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSystemDoc {
    pub rank: usize,
    /// Keyed `"v-w"` with `v < w`; the matrix carries the fibre at `w` to the fibre at `v`.
    pub edges: BTreeMap<String, MatrixDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollarDoc {
    pub rank: usize,
    pub half_steps: usize,
    pub h: f64,
    #[serde(default)]
    pub y_shape: Vec<usize>,
    #[serde(default = "unit")]
    pub y_step: f64,
    /// One sample per `(x, site)`, `x` slowest.
    pub omega0: Vec<MatrixDoc>,
    /// One sample per `(x, site, direction)`, direction fastest.
    #[serde(default)]
    pub omega_tan: Vec<MatrixDoc>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertDoc {
    pub dims: Vec<usize>,
    /// `d_k : C^k → C^{k+1}` for `k < top`.
    pub differentials: Vec<MatrixDoc>,
}

/// Command-specific knobs; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdivisions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tops: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_scale: Option<f64>,
}

impl ComplexDoc {
    pub fn from_complex(k: &SimplicialComplex) -> Self {
        let top = k.dim().unwrap_or(0);
        let simplices = (0..=top).filter(|&d| k.count(d) > 0).map(|d| (d.to_string(), k.simplices(d).to_vec())).collect();
        Self { simplices }
    }

    pub fn to_complex(&self) -> Result<SimplicialComplex, CliError> {
        let mut by_dim: Vec<Vec<Simplex>> = Vec::new();
        for (key, list) in &self.simplices {
            let d: usize = key.parse().map_err(|_| CliError::Malformed(format!("simplex dimension key {key:?} is not an integer")))?;
            if by_dim.len() <= d {
                by_dim.resize_with(d + 1, Vec::new);
            }
            by_dim[d] = list.clone();
        }
        Ok(SimplicialComplex::from_simplices(by_dim)?)
    }
}

impl LocalSystemDoc {
    pub fn from_system(sys: &LocalSystem) -> Self {
        let edges = sys.edges().map(|(e, t)| (format!("{}-{}", e[0], e[1]), matrix_to_doc(t))).collect();
        Self { rank: sys.rank(), edges }
    }

    pub fn to_system(&self) -> Result<LocalSystem, CliError> {
        let mut sys = LocalSystem::new(self.rank);
        for (key, m) in &self.edges {
            let parsed: Option<(usize, usize)> = key.split_once('-').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            let (u, v) = parsed.ok_or_else(|| CliError::Malformed(format!("edge key {key:?} is not of the form \"v-w\"")))?;
            if u >= v {
                return Err(CliError::Malformed(format!("edge key {key:?} must be sorted")));
            }
            sys.set(u, v, matrix_from_doc(m, self.rank, self.rank, &format!("transport {key}"))?);
        }
        Ok(sys)
    }
}

impl CollarDoc {
    pub fn from_connection(conn: &CollarConnection) -> Self {
        let g = conn.grid();
        let mut omega0 = Vec::new();
        let mut omega_tan = Vec::new();
        for j in 0..g.nx() {
            for s in 0..g.sites() {
                omega0.push(matrix_to_doc(conn.omega0(j, s)));
                omega_tan.extend((0..g.directions()).map(|i| matrix_to_doc(conn.omega_tan(j, s, i))));
            }
        }
        Self { rank: conn.rank(), half_steps: g.half_steps, h: g.h, y_shape: g.y_shape.clone(), y_step: g.y_step, omega0, omega_tan }
    }

    pub fn to_connection(&self, tol: f64) -> Result<CollarConnection, CliError> {
        let grid = CollarGrid::new(self.half_steps, self.h, self.y_shape.clone(), self.y_step)?;
        let n = self.rank;
        let parse = |list: &[MatrixDoc], what: &str| -> Result<Vec<CMatrix>, CliError> {
            list.iter().enumerate().map(|(i, m)| matrix_from_doc(m, n, n, &format!("{what}[{i}]"))).collect()
        };
        Ok(CollarConnection::new(grid, n, parse(&self.omega0, "omega0")?, parse(&self.omega_tan, "omega_tan")?, tol)?)
    }
}

impl HilbertDoc {
    pub fn to_complex(&self, tol: f64) -> Result<FiniteHilbertComplex, CliError> {
        if self.dims.is_empty() || self.differentials.len() + 1 != self.dims.len() {
            return Err(CliError::Malformed(format!(
                "{} differentials for {} degrees",
                self.differentials.len(),
                self.dims.len()
            )));
        }
        let diffs = self
            .differentials
            .iter()
            .enumerate()
            .map(|(k, m)| matrix_from_doc(m, self.dims[k + 1], self.dims[k], &format!("differential {k}")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FiniteHilbertComplex::new(self.dims.clone(), diffs, tol)?)
    }
}

impl InputDocument {
    pub fn from_split(split: &SplitComplex, sys: &LocalSystem) -> Self {
        Self {
            complex: Some(ComplexDoc::from_complex(&split.total)),
            split: Some(SplitDoc {
                part1: split.part1.all_simplices().cloned().collect(),
                part2: split.part2.all_simplices().cloned().collect(),
            }),
            local_system: Some(LocalSystemDoc::from_system(sys)),
            ..Self::default()
        }
    }

    pub fn complex(&self) -> Result<SimplicialComplex, CliError> {
        self.complex.as_ref().ok_or_else(|| CliError::Malformed("missing \"complex\"".into()))?.to_complex()
    }

    /// The local system, or the trivial rank-1 system when absent.
    pub fn local_system(&self, k: &SimplicialComplex) -> Result<LocalSystem, CliError> {
        match &self.local_system {
            Some(doc) => doc.to_system(),
            None => Ok(LocalSystem::trivial(k, 1)),
        }
    }

    pub fn split(&self) -> Result<(SplitComplex, LocalSystem), CliError> {
        let total = self.complex()?;
        let doc = self.split.as_ref().ok_or_else(|| CliError::Malformed("missing \"split\"".into()))?;
        let sys = self.local_system(&total)?;
        let split = split_input(total, &doc.part1, &doc.part2)?;
        Ok((split, sys))
    }

    pub fn params(&self) -> Params {
        self.params.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localsys::circle_holonomy_system;
    use crate::simplicial::generators::split_circle;

    #[test]
    fn split_document_round_trip() {
        let s = split_circle(5, 2);
        let sys = circle_holonomy_system(&s.total, 0.3);
        let doc = InputDocument::from_split(&s, &sys);
        let text = serde_json::to_string(&doc).unwrap();
        let back: InputDocument = serde_json::from_str(&text).unwrap();
        let (s2, sys2) = back.split().unwrap();
        assert_eq!(s2, s);
        assert_eq!(sys2, sys);
    }

    #[test]
    fn malformed_pieces() {
        let bad_key = ComplexDoc { simplices: [("x".to_string(), vec![vec![0]])].into_iter().collect() };
        assert!(matches!(bad_key.to_complex(), Err(CliError::Malformed(_))));
        let unsorted = LocalSystemDoc { rank: 1, edges: [("2-1".to_string(), vec![vec![[1.0, 0.0]]])].into_iter().collect() };
        assert!(matches!(unsorted.to_system(), Err(CliError::Malformed(_))));
        let wrong_shape = LocalSystemDoc { rank: 2, edges: [("0-1".to_string(), vec![vec![[1.0, 0.0]]])].into_iter().collect() };
        assert!(matches!(wrong_shape.to_system(), Err(CliError::Malformed(_))));
        assert!(serde_json::from_str::<InputDocument>(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn hilbert_document() {
        let doc = HilbertDoc { dims: vec![1, 1], differentials: vec![vec![vec![[2.0, 0.0]]]] };
        let cx = doc.to_complex(1e-10).unwrap();
        assert!((cx.torsion(1e-10) - 2.0).abs() < 1e-12);
        let short = HilbertDoc { dims: vec![1, 1], differentials: vec![] };
        assert!(short.to_complex(1e-10).is_err());
    }
}
