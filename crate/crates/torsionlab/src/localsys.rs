//! Unitary local systems on simplicial complexes and their twisted cochain differentials.
//!
//! Cochain values on a simplex live in the fibre over its least vertex. The
//! transport stored for the sorted edge `[u, v]` carries the fibre at `v` to the fibre at `u`.

use crate::numlin::{CMatrix, CVector, C64};
use crate::simplicial::{faces, Simplex, SimplicialComplex};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalSystemError {
    #[error("edge {0:?} has no transport matrix")]
    MissingEdge([usize; 2]),
    #[error("degree {degree} out of range (complex dimension {dim})")]
    DegreeOutOfRange { degree: usize, dim: usize },
    #[error("invalid local system: {0}")]
    InvalidSystem(String),
    #[error("not a subcomplex: {0}")]
    NotSubcomplex(String),
    #[error("pairing needs a one-dimensional complex, got dimension {0:?}")]
    WrongDimension(Option<usize>),
    #[error("supplied cycle is not closed (boundary norm {0})")]
    NotClosedCycle(f64),
}

/// Rank-`n` flat unitary transport data keyed by sorted edges.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSystem {
    rank: usize,
    transports: BTreeMap<[usize; 2], CMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub unitarity_defect: f64,
    pub holonomy_defect: f64,
    pub passed: bool,
}

impl LocalSystem {
    pub fn new(rank: usize) -> Self {
        Self { rank, transports: BTreeMap::new() }
    }

    /// Identity transport on every edge of `k`.
    pub fn trivial(k: &SimplicialComplex, rank: usize) -> Self {
        let mut sys = Self::new(rank);
        for e in k.simplices(1) {
            sys.set(e[0], e[1], CMatrix::identity(rank, rank));
        }
        sys
    }

    /// Stores the transport for the edge `{u, v}` oriented from `u` to `v`.
    pub fn set(&mut self, u: usize, v: usize, t: CMatrix) {
        if u < v {
            self.transports.insert([u, v], t);
        } else {
            let inv = t.try_inverse().expect("transport must be invertible");
            self.transports.insert([v, u], inv);
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn edges(&self) -> impl Iterator<Item = (&[usize; 2], &CMatrix)> {
        self.transports.iter()
    }

    /// Transport from `u` to `v` (fibre at `v` to fibre at `u`).
    pub fn transport(&self, u: usize, v: usize) -> Result<CMatrix, LocalSystemError> {
        if u < v {
            self.transports.get(&[u, v]).cloned().ok_or(LocalSystemError::MissingEdge([u, v]))
        } else {
            let t = self.transports.get(&[v, u]).ok_or(LocalSystemError::MissingEdge([v, u]))?;
            t.clone()
                .try_inverse()
                .ok_or_else(|| LocalSystemError::InvalidSystem(format!("transport on {:?} is singular", [v, u])))
        }
    }

    fn check_shapes(&self, k: &SimplicialComplex) -> Result<(), LocalSystemError> {
        for e in k.simplices(1) {
            let t = self.transports.get(&[e[0], e[1]]).ok_or(LocalSystemError::MissingEdge([e[0], e[1]]))?;
            if t.shape() != (self.rank, self.rank) {
                return Err(LocalSystemError::InvalidSystem(format!(
                    "transport on {:?} is {}x{}, expected {}x{}",
                    e,
                    t.nrows(),
                    t.ncols(),
                    self.rank,
                    self.rank
                )));
            }
        }
        Ok(())
    }
}

/// Measures unitarity of every transport and holonomy around every 2-simplex.
pub fn validate_local_system(k: &SimplicialComplex, sys: &LocalSystem, tol: f64) -> Result<ValidationReport, LocalSystemError> {
    sys.check_shapes(k)?;
    let n = sys.rank;
    let id = CMatrix::identity(n, n);
    let mut unitarity: f64 = 0.0;
    for e in k.simplices(1) {
        let t = &sys.transports[&[e[0], e[1]]];
        unitarity = unitarity.max((t.adjoint() * t - &id).norm());
    }
    let mut holonomy: f64 = 0.0;
    for s in k.simplices(2) {
        let t01 = &sys.transports[&[s[0], s[1]]];
        let t12 = &sys.transports[&[s[1], s[2]]];
        let t02 = &sys.transports[&[s[0], s[2]]];
        let loop_ = t01 * t12 * t02.adjoint();
        holonomy = holonomy.max((loop_ - &id).norm());
    }
    Ok(ValidationReport {
        unitarity_defect: unitarity,
        holonomy_defect: holonomy,
        passed: unitarity <= tol && holonomy <= tol,
    })
}

/// Validates and converts a failed report into `InvalidSystem`.
pub fn require_valid(k: &SimplicialComplex, sys: &LocalSystem, tol: f64) -> Result<(), LocalSystemError> {
    let r = validate_local_system(k, sys, tol)?;
    if r.passed {
        Ok(())
    } else {
        Err(LocalSystemError::InvalidSystem(format!(
            "unitarity defect {:.3e}, holonomy defect {:.3e}",
            r.unitarity_defect, r.holonomy_defect
        )))
    }
}

pub fn restrict_local_system(sys: &LocalSystem, sub: &SimplicialComplex) -> Result<LocalSystem, LocalSystemError> {
    let mut out = LocalSystem::new(sys.rank);
    for e in sub.simplices(1) {
        let t = sys
            .transports
            .get(&[e[0], e[1]])
            .ok_or_else(|| LocalSystemError::NotSubcomplex(format!("edge {:?} has no transport in the ambient system", e)))?;
        out.transports.insert([e[0], e[1]], t.clone());
    }
    Ok(out)
}

/// Twisted coboundary `d_k : C^k → C^{k+1}` in simplex-block coordinates.
pub fn twisted_coboundary(k: &SimplicialComplex, sys: &LocalSystem, degree: usize) -> Result<CMatrix, LocalSystemError> {
    let dim = k.dim().unwrap_or(0);
    if k.dim().is_none() || degree >= dim {
        return Err(LocalSystemError::DegreeOutOfRange { degree, dim });
    }
    sys.check_shapes(k)?;
    Ok(coboundary_unchecked(k, sys, degree))
}

/// Same as [`twisted_coboundary`] but returns a zero map outside the complex's degree range.
pub(crate) fn coboundary_unchecked(k: &SimplicialComplex, sys: &LocalSystem, degree: usize) -> CMatrix {
    let n = sys.rank;
    let mut d = CMatrix::zeros(n * k.count(degree + 1), n * k.count(degree));
    for (row, s) in k.simplices(degree + 1).iter().enumerate() {
        for (i, f) in faces(s).iter().enumerate() {
            let col = k.index_of(f).expect("faces are present");
            let block = if i == 0 {
                sys.transports[&[s[0], s[1]]].clone()
            } else if i % 2 == 0 {
                CMatrix::identity(n, n)
            } else {
                -CMatrix::identity(n, n)
            };
            d.view_mut((row * n, col * n), (n, n)).copy_from(&block);
        }
    }
    d
}

/// Restriction of degree-`degree` cochains from `k` to the subcomplex `sub`.
pub fn restriction_matrix(k: &SimplicialComplex, sub: &SimplicialComplex, rank: usize, degree: usize) -> Result<CMatrix, LocalSystemError> {
    let mut r = CMatrix::zeros(rank * sub.count(degree), rank * k.count(degree));
    for (row, s) in sub.simplices(degree).iter().enumerate() {
        let col = k
            .index_of(s)
            .ok_or_else(|| LocalSystemError::NotSubcomplex(format!("{:?} is not in the ambient complex", s)))?;
        r.view_mut((row * rank, col * rank), (rank, rank)).copy_from(&CMatrix::identity(rank, rank));
    }
    Ok(r)
}

/// `Σ_e coeff(e)·⟨f(e_0), g(e)⟩` over the edges of a one-dimensional complex.
pub fn poincare_pairing_dim1(
    k: &SimplicialComplex,
    sys: &LocalSystem,
    cycle: &[i64],
    f: &CVector,
    g: &CVector,
) -> Result<C64, LocalSystemError> {
    if k.dim() != Some(1) {
        return Err(LocalSystemError::WrongDimension(k.dim()));
    }
    let n = sys.rank;
    if cycle.len() != k.count(1) || f.len() != n * k.count(0) || g.len() != n * k.count(1) {
        return Err(LocalSystemError::InvalidSystem("cochain or cycle length does not match the complex".into()));
    }
    let boundary = k.boundary_matrix(1).expect("dimension one");
    let b = &boundary * nalgebra::DVector::from_column_slice(cycle);
    let defect = b.iter().map(|x| x.abs()).sum::<i64>();
    if defect != 0 {
        return Err(LocalSystemError::NotClosedCycle(defect as f64));
    }
    let mut total = C64::from(0.0);
    for (e, s) in k.simplices(1).iter().enumerate() {
        let v0 = k.index_of(&s[..1]).expect("vertex present");
        let fv = f.rows(v0 * n, n);
        let ge = g.rows(e * n, n);
        total += (fv.adjoint() * ge)[(0, 0)] * cycle[e] as f64;
    }
    Ok(total)
}

/// Rank-1 system on an `n`-edge circle with `e^{iθ}` on the edge `[0, 1]` and identity elsewhere.
pub fn circle_holonomy_system(k: &SimplicialComplex, theta: f64) -> LocalSystem {
    let mut sys = LocalSystem::trivial(k, 1);
    sys.set(0, 1, CMatrix::from_element(1, 1, C64::from_polar(1.0, theta)));
    sys
}

/// Orientation-coherent fundamental cycle of the circle generator: `+1` on `[i, i+1]`, `-1` on `[0, n-1]`.
pub fn circle_fundamental_cycle(k: &SimplicialComplex) -> Vec<i64> {
    let n = k.count(0);
    k.simplices(1).iter().map(|e: &Simplex| if e[0] == 0 && e[1] == n - 1 { -1 } else { 1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{c, kernel_basis, singular_values, DEFAULT_RANK_TOL};
    use crate::simplicial::generators::*;

    fn diag(a: f64, b: f64) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]))
    }

    #[test]
    fn trivial_system_has_no_defect() {
        let k = SimplicialComplex::closure(&[vec![0, 1, 2]]);
        let r = validate_local_system(&k, &LocalSystem::trivial(&k, 2), 1e-12).unwrap();
        assert_eq!((r.unitarity_defect, r.holonomy_defect, r.passed), (0.0, 0.0, true));
    }

    #[test]
    fn circle_phase_passes() {
        let k = circle(3);
        let r = validate_local_system(&k, &circle_holonomy_system(&k, 0.7), 1e-12).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn nonflat_triangle_fails() {
        let k = SimplicialComplex::closure(&[vec![0, 1, 2]]);
        let mut sys = LocalSystem::trivial(&k, 2);
        sys.set(0, 1, diag(-1.0, 1.0));
        let r = validate_local_system(&k, &sys, 1e-12).unwrap();
        assert!((r.holonomy_defect - 2.0).abs() < 1e-14);
        assert!(!r.passed);
    }

    #[test]
    fn missing_edge_reported() {
        let k = circle(3);
        let sys = LocalSystem::new(1);
        assert_eq!(validate_local_system(&k, &sys, 1e-12), Err(LocalSystemError::MissingEdge([0, 1])));
    }

    #[test]
    fn restriction_cases() {
        let k = circle(4);
        let sys = circle_holonomy_system(&k, 1.0);
        let point = SimplicialComplex::closure(&[vec![2]]);
        let r = restrict_local_system(&sys, &point).unwrap();
        assert_eq!((r.rank(), r.edges().count()), (1, 0));
        let s = split_circle(4, 2);
        assert_eq!(restrict_local_system(&sys, &s.interface).unwrap().edges().count(), 0);
        let arc = restrict_local_system(&sys, &s.part1).unwrap();
        assert_eq!(arc.transport(0, 1).unwrap(), sys.transport(0, 1).unwrap());
        let foreign = SimplicialComplex::closure(&[vec![0, 2]]);
        assert!(matches!(restrict_local_system(&sys, &foreign), Err(LocalSystemError::NotSubcomplex(_))));
    }

    #[test]
    fn trivial_coboundary_is_transposed_boundary() {
        let k = SimplicialComplex::closure(&[vec![0, 1, 2], vec![2, 3]]);
        let sys = LocalSystem::trivial(&k, 1);
        for deg in 0..2 {
            let d = twisted_coboundary(&k, &sys, deg).unwrap();
            let b = k.boundary_matrix(deg + 1).unwrap().transpose();
            assert_eq!(d, b.map(|x| c(x as f64, 0.0)));
        }
        assert!(matches!(twisted_coboundary(&k, &sys, 2), Err(LocalSystemError::DegreeOutOfRange { .. })));
    }

    #[test]
    fn twisted_circle_has_no_invariant_sections() {
        let k = circle(3);
        let d0 = twisted_coboundary(&k, &circle_holonomy_system(&k, 2.0), 0).unwrap();
        assert_eq!(kernel_basis(&d0, DEFAULT_RANK_TOL).len(), 0);
        let d0 = twisted_coboundary(&k, &LocalSystem::trivial(&k, 1), 0).unwrap();
        assert_eq!(kernel_basis(&d0, DEFAULT_RANK_TOL).len(), 1);
    }

    #[test]
    fn flat_triangle_d_squared_vanishes() {
        let k = SimplicialComplex::closure(&[vec![0, 1, 2]]);
        let mut sys = LocalSystem::new(2);
        let a = diag(-1.0, 1.0);
        let b = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        sys.set(0, 1, a.clone());
        sys.set(1, 2, b.clone());
        sys.set(0, 2, &a * &b);
        assert!(validate_local_system(&k, &sys, 1e-12).unwrap().passed);
        let dd = twisted_coboundary(&k, &sys, 1).unwrap() * twisted_coboundary(&k, &sys, 0).unwrap();
        assert!(dd.norm() < 1e-12);
    }

    #[test]
    fn pairing_examples() {
        let k = circle(3);
        let sys = LocalSystem::trivial(&k, 1);
        let cyc = circle_fundamental_cycle(&k);
        let f = CVector::from_element(3, c(1.0, 0.0));
        let mut g = CVector::zeros(3);
        g[0] = c(1.0, 0.0);
        assert!((poincare_pairing_dim1(&k, &sys, &cyc, &f, &g).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        let h = CVector::from_vec(vec![c(0.3, 1.0), c(-2.0, 0.5), c(1.0, 1.0)]);
        let dh = twisted_coboundary(&k, &sys, 0).unwrap() * h;
        assert!(poincare_pairing_dim1(&k, &sys, &cyc, &f, &dh).unwrap().norm() < 1e-14);
        assert!(matches!(
            poincare_pairing_dim1(&k, &sys, &[1, 1, 1], &f, &g),
            Err(LocalSystemError::NotClosedCycle(_))
        ));
    }

    #[test]
    fn gauge_trivial_system_matches_trivial_singular_values() {
        let k = circle(5);
        let gauges: Vec<CMatrix> = (0..5)
            .map(|v| {
                let t = 0.4 + v as f64;
                CMatrix::from_row_slice(2, 2, &[c(t.cos(), 0.0), c(0.0, t.sin()), c(0.0, t.sin()), c(t.cos(), 0.0)])
            })
            .collect();
        let mut sys = LocalSystem::new(2);
        for e in k.simplices(1) {
            sys.set(e[0], e[1], &gauges[e[0]] * gauges[e[1]].adjoint());
        }
        let twisted = singular_values(&twisted_coboundary(&k, &sys, 0).unwrap());
        let plain = singular_values(&twisted_coboundary(&k, &LocalSystem::trivial(&k, 2), 0).unwrap());
        for (a, b) in twisted.iter().zip(plain.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
