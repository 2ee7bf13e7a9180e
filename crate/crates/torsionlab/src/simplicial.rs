//! Finite simplicial complexes with sorted vertex tuples, boundary matrices and split inputs.

use nalgebra::DMatrix;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Strictly increasing vertex tuple.
pub type Simplex = Vec<usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplicialError {
    #[error("face {face:?} of simplex {simplex:?} is missing")]
    MissingFace { simplex: Simplex, face: Simplex },
    #[error("simplex {0:?} listed twice")]
    DuplicateSimplex(Simplex),
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("degree {degree} out of range 1..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("not a subcomplex: {0}")]
    NotSubcomplex(String),
    #[error("parts do not cover the complex: {0:?} is in neither part")]
    CoverageGap(Simplex),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex {
    by_dim: Vec<Vec<Simplex>>,
    index: Vec<BTreeMap<Simplex, usize>>,
}

/// All codimension-one faces, `faces[i]` omitting position `i`.
pub fn faces(s: &[usize]) -> Vec<Simplex> {
    (0..s.len())
        .map(|i| s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect())
        .collect()
}

impl SimplicialComplex {
    /// Builds a complex from simplices grouped by dimension; tuples are sorted first.
    pub fn from_simplices(by_dim: Vec<Vec<Simplex>>) -> Result<Self, SimplicialError> {
        let mut sorted: Vec<Vec<Simplex>> = Vec::with_capacity(by_dim.len());
        for (k, list) in by_dim.into_iter().enumerate() {
            let mut seen = BTreeSet::new();
            let mut out = Vec::with_capacity(list.len());
            for mut s in list {
                if s.len() != k + 1 {
                    return Err(SimplicialError::MalformedDocument(format!(
                        "{:?} has {} vertices but is listed in dimension {}",
                        s,
                        s.len(),
                        k
                    )));
                }
                s.sort_unstable();
                if s.windows(2).any(|w| w[0] == w[1]) {
                    return Err(SimplicialError::MalformedDocument(format!("{:?} repeats a vertex", s)));
                }
                if !seen.insert(s.clone()) {
                    return Err(SimplicialError::DuplicateSimplex(s));
                }
                out.push(s);
            }
            out.sort();
            sorted.push(out);
        }
        while sorted.last().is_some_and(|l| l.is_empty()) {
            sorted.pop();
        }
        let index: Vec<BTreeMap<Simplex, usize>> = sorted
            .iter()
            .map(|l| l.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        for k in 1..sorted.len() {
            for s in &sorted[k] {
                for f in faces(s) {
                    if !index[k - 1].contains_key(&f) {
                        return Err(SimplicialError::MissingFace { simplex: s.clone(), face: f });
                    }
                }
            }
        }
        Ok(Self { by_dim: sorted, index })
    }

    /// Closure under faces of an arbitrary list of simplices.
    pub fn closure(simplices: &[Simplex]) -> Self {
        let mut sets: Vec<BTreeSet<Simplex>> = Vec::new();
        let mut stack: Vec<Simplex> = simplices
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                s
            })
            .filter(|s| !s.is_empty())
            .collect();
        while let Some(s) = stack.pop() {
            let k = s.len() - 1;
            if sets.len() <= k {
                sets.resize_with(k + 1, BTreeSet::new);
            }
            if sets[k].insert(s.clone()) && k > 0 {
                stack.extend(faces(&s));
            }
        }
        Self::from_simplices(sets.into_iter().map(|s| s.into_iter().collect()).collect())
            .expect("closure is face-closed")
    }

    /// Dimension, or `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        self.by_dim.len().checked_sub(1)
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.by_dim.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn vertex_count(&self) -> usize {
        self.count(0)
    }

    pub fn index_of(&self, s: &[usize]) -> Option<usize> {
        self.index.get(s.len().checked_sub(1)?)?.get(s).copied()
    }

    pub fn contains(&self, s: &[usize]) -> bool {
        self.index_of(s).is_some()
    }

    pub fn all_simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.by_dim.iter().flatten()
    }

    pub fn total_count(&self) -> usize {
        self.by_dim.iter().map(Vec::len).sum()
    }

    pub fn is_subcomplex_of(&self, other: &SimplicialComplex) -> bool {
        self.all_simplices().all(|s| other.contains(s))
    }

    /// Integer boundary matrix `∂_k`, rows indexed by (k-1)-simplices and columns by k-simplices.
    pub fn boundary_matrix(&self, k: usize) -> Result<DMatrix<i64>, SimplicialError> {
        let max = self.dim().unwrap_or(0);
        if k == 0 || k > max {
            return Err(SimplicialError::DegreeOutOfRange { degree: k, max });
        }
        let mut m = DMatrix::zeros(self.count(k - 1), self.count(k));
        for (col, s) in self.simplices(k).iter().enumerate() {
            for (i, f) in faces(s).iter().enumerate() {
                let row = self.index[k - 1][f];
                m[(row, col)] = if i % 2 == 0 { 1 } else { -1 };
            }
        }
        Ok(m)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.by_dim
            .iter()
            .enumerate()
            .map(|(k, l)| if k % 2 == 0 { l.len() as i64 } else { -(l.len() as i64) })
            .sum()
    }

    /// Subcomplex of the simplices satisfying `keep`; the caller guarantees face-closure.
    fn filtered(&self, keep: impl Fn(&Simplex) -> bool) -> Self {
        Self::from_simplices(self.by_dim.iter().map(|l| l.iter().filter(|s| keep(s)).cloned().collect()).collect())
            .expect("filter of a complex by a face-closed predicate")
    }
}

/// A complex `X = X1 ∪_W X2` with both parts and their intersection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitComplex {
    pub total: SimplicialComplex,
    pub part1: SimplicialComplex,
    pub part2: SimplicialComplex,
    pub interface: SimplicialComplex,
}

fn marker_complex(total: &SimplicialComplex, marker: &[Simplex], name: &str) -> Result<SimplicialComplex, SimplicialError> {
    let mut by_dim: Vec<Vec<Simplex>> = Vec::new();
    for s in marker {
        let mut s = s.clone();
        s.sort_unstable();
        if s.is_empty() || !total.contains(&s) {
            return Err(SimplicialError::NotSubcomplex(format!("{name} lists {s:?}, which is not in the complex")));
        }
        let k = s.len() - 1;
        if by_dim.len() <= k {
            by_dim.resize_with(k + 1, Vec::new);
        }
        if !by_dim[k].contains(&s) {
            by_dim[k].push(s);
        }
    }
    SimplicialComplex::from_simplices(by_dim).map_err(|e| match e {
        SimplicialError::MissingFace { simplex, face } => {
            SimplicialError::NotSubcomplex(format!("{name} contains {simplex:?} but not its face {face:?}"))
        }
        other => other,
    })
}

/// Validates two face-closed markers covering `total` and derives the interface.
pub fn split_input(total: SimplicialComplex, part1: &[Simplex], part2: &[Simplex]) -> Result<SplitComplex, SimplicialError> {
    let p1 = marker_complex(&total, part1, "part1")?;
    let p2 = marker_complex(&total, part2, "part2")?;
    if let Some(gap) = total.all_simplices().find(|s| !p1.contains(s) && !p2.contains(s)) {
        return Err(SimplicialError::CoverageGap(gap.clone()));
    }
    let interface = p1.filtered(|s| p2.contains(s));
    Ok(SplitComplex { total, part1: p1, part2: p2, interface })
}

/// Built-in fixtures.
pub mod generators {
    use super::*;

    fn edges_and_vertices(vertices: impl IntoIterator<Item = usize>, edges: Vec<[usize; 2]>) -> SimplicialComplex {
        SimplicialComplex::from_simplices(vec![
            vertices.into_iter().map(|v| vec![v]).collect(),
            edges.into_iter().map(|e| e.to_vec()).collect(),
        ])
        .expect("generator output is valid")
    }

    /// Circle with `n ≥ 3` edges on vertices `0..n`.
    pub fn circle(n: usize) -> SimplicialComplex {
        assert!(n >= 3, "a simplicial circle needs at least 3 edges");
        let mut edges: Vec<[usize; 2]> = (0..n - 1).map(|i| [i, i + 1]).collect();
        edges.push([0, n - 1]);
        edges_and_vertices(0..n, edges)
    }

    /// Interval with `n ≥ 1` edges on vertices `0..=n`.
    pub fn interval(n: usize) -> SimplicialComplex {
        assert!(n >= 1);
        edges_and_vertices(0..=n, (0..n).map(|i| [i, i + 1]).collect())
    }

    pub fn two_points() -> SimplicialComplex {
        SimplicialComplex::from_simplices(vec![vec![vec![0], vec![1]]]).expect("valid")
    }

    /// Circle with `n` edges split into the arc `0..=k` (k edges) and the complementary arc.
    pub fn split_circle(n: usize, k: usize) -> SplitComplex {
        assert!(k >= 1 && k < n);
        let total = circle(n);
        let arc1: Vec<Simplex> = (0..k).map(|i| vec![i, i + 1]).collect();
        let mut arc2: Vec<Simplex> = (k..n - 1).map(|i| vec![i, i + 1]).collect();
        arc2.push(vec![0, n - 1]);
        let p1 = SimplicialComplex::closure(&arc1);
        let p2 = SimplicialComplex::closure(&arc2);
        split_input(total, &p1.all_simplices().cloned().collect::<Vec<_>>(), &p2.all_simplices().cloned().collect::<Vec<_>>())
            .expect("valid split")
    }

    /// Interval with `n` edges split at vertex `k`.
    pub fn split_interval(n: usize, k: usize) -> SplitComplex {
        assert!(k <= n);
        let total = interval(n);
        let mut p1: Vec<Simplex> = (0..=k).map(|v| vec![v]).collect();
        p1.extend((0..k).map(|i| vec![i, i + 1]));
        let mut p2: Vec<Simplex> = (k..=n).map(|v| vec![v]).collect();
        p2.extend((k..n).map(|i| vec![i, i + 1]));
        split_input(total, &p1, &p2).expect("valid split")
    }

    /// Split whose second part is exactly the interface.
    pub fn degenerate_split(total: SimplicialComplex, interface: &[Simplex]) -> SplitComplex {
        let all: Vec<Simplex> = total.all_simplices().cloned().collect();
        let w: Vec<Simplex> = SimplicialComplex::closure(interface).all_simplices().cloned().collect();
        split_input(total, &all, &w).expect("valid degenerate split")
    }
}
