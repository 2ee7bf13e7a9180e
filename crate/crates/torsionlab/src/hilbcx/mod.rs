//! Finite Hilbert cochain complexes: Laplacians, torsion, harmonic cohomology and the
//! relative / absolute / split cochain complexes of a split simplicial complex.

mod les;
mod synth;

pub use les::*;
pub use synth::*;

use crate::localsys::{coboundary_unchecked, require_valid, LocalSystem, LocalSystemError};
use crate::numlin::{kernel_basis, singular_values, Basis, CMatrix, NumlinError, ABSOLUTE_ZERO, C64};
use crate::simplicial::{SimplicialComplex, SplitComplex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("differential d_{degree} has shape {got:?}, expected {expected:?}")]
    Shape { degree: usize, got: (usize, usize), expected: (usize, usize) },
    #[error("d∘d does not vanish after degree {degree} (norm {defect:.3e})")]
    NotAComplex { degree: usize, defect: f64 },
    #[error("degree {degree} out of range 0..={top}")]
    DegreeOutOfRange { degree: usize, top: usize },
    #[error("not a subcomplex: {0}")]
    NotSubcomplex(String),
    #[error("exactness failure: {0}")]
    ExactnessFailure(String),
    #[error("zig-zag lift breaks down at degree {degree} (residual {residual:.3e})")]
    ZigZagBreakdown { degree: usize, residual: f64 },
    #[error("infeasible dimension profile: {0}")]
    InfeasibleProfile(String),
    #[error("unknown lift strategy {0:?}")]
    UnknownLift(String),
    #[error(transparent)]
    LocalSystem(#[from] LocalSystemError),
    #[error(transparent)]
    Numlin(#[from] NumlinError),
}

/// Graded inner-product spaces in orthonormal coordinates with differentials `d_k : C^k → C^{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteHilbertComplex {
    dims: Vec<usize>,
    diffs: Vec<CMatrix>,
}

/// Harmonic representatives of one cohomology group.
#[derive(Clone, Debug, PartialEq)]
pub struct CohomologySpace {
    pub degree: usize,
    pub basis: Basis,
}

impl CohomologySpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

impl FiniteHilbertComplex {
    /// `diffs[k]` maps degree `k` to `k+1`; there are `dims.len() - 1` of them.
    pub fn new(dims: Vec<usize>, diffs: Vec<CMatrix>, tol: f64) -> Result<Self, HilbertError> {
        assert!(!dims.is_empty(), "a complex needs at least one degree");
        if diffs.len() + 1 != dims.len() {
            return Err(HilbertError::ExactnessFailure(format!(
                "{} differentials for {} degrees",
                diffs.len(),
                dims.len()
            )));
        }
        for (k, d) in diffs.iter().enumerate() {
            if d.shape() != (dims[k + 1], dims[k]) {
                return Err(HilbertError::Shape { degree: k, got: d.shape(), expected: (dims[k + 1], dims[k]) });
            }
        }
        for k in 0..diffs.len().saturating_sub(1) {
            let dd = &diffs[k + 1] * &diffs[k];
            let scale = diffs[k + 1].norm() * diffs[k].norm();
            let defect = dd.norm();
            if defect > tol.sqrt() * scale.max(1.0) * 1e-2 {
                return Err(HilbertError::NotAComplex { degree: k, defect });
            }
        }
        Ok(Self { dims, diffs })
    }

    pub fn zero(top: usize) -> Self {
        Self { dims: vec![0; top + 1], diffs: (0..top).map(|_| CMatrix::zeros(0, 0)).collect() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn top(&self) -> usize {
        self.dims.len() - 1
    }

    /// `d_k`, or a zero map at the ends of the complex.
    pub fn differential(&self, k: usize) -> CMatrix {
        match self.diffs.get(k) {
            Some(d) => d.clone(),
            None => CMatrix::zeros(0, self.dims.get(k).copied().unwrap_or(0)),
        }
    }

    fn incoming(&self, k: usize) -> CMatrix {
        if k == 0 {
            CMatrix::zeros(self.dims[0], 0)
        } else {
            self.diffs[k - 1].clone()
        }
    }

    /// `Δ_k = d_k* d_k + d_{k-1} d_{k-1}*`.
    pub fn laplacian(&self, k: usize) -> Result<CMatrix, HilbertError> {
        if k > self.top() {
            return Err(HilbertError::DegreeOutOfRange { degree: k, top: self.top() });
        }
        let out = self.differential(k);
        let inc = self.incoming(k);
        Ok(out.adjoint() * out + &inc * inc.adjoint())
    }

    /// Torsion from `log τ = ½ Σ_j (-1)^j j ζ'(0, Δ_j)` with `ζ'(0, Δ) = -Σ_{λ>0} log λ`.
    ///
    /// The nonzero spectrum of `Δ_j` is `σ(d_j)² ∪ σ(d_{j-1})²`; reading it off the singular
    /// values keeps small eigenvalues accurate and applies the same cutoff as [`crate::numlin::rank`].
    pub fn torsion(&self, tol: f64) -> f64 {
        let log_sv: Vec<Vec<f64>> = (0..self.top())
            .map(|k| {
                let sv = singular_values(&self.diffs[k]);
                let top = sv.first().copied().unwrap_or(0.0);
                sv.iter().filter(|&&s| s * s > tol * top * top && s > ABSOLUTE_ZERO).map(|s| s.ln()).collect()
            })
            .collect();
        let mut log_tau = 0.0;
        for j in 0..=self.top() {
            let outgoing = log_sv.get(j).map_or(0.0, |v| v.iter().sum::<f64>());
            let incoming = if j > 0 { log_sv[j - 1].iter().sum::<f64>() } else { 0.0 };
            let zeta_prime = -2.0 * (outgoing + incoming);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            log_tau += 0.5 * sign * j as f64 * zeta_prime;
        }
        log_tau.exp()
    }

    /// `ker d_k ∩ ker d_{k-1}*`, from the stacked operator rather than `Δ_k` so the
    /// threshold sees `σ` and not `σ²`.
    pub fn harmonic_cohomology(&self, k: usize, tol: f64) -> Result<CohomologySpace, HilbertError> {
        if k > self.top() {
            return Err(HilbertError::DegreeOutOfRange { degree: k, top: self.top() });
        }
        let out = self.differential(k);
        let inc = self.incoming(k).adjoint();
        let mut stacked = CMatrix::zeros(out.nrows() + inc.nrows(), self.dims[k]);
        stacked.rows_mut(0, out.nrows()).copy_from(&out);
        stacked.rows_mut(out.nrows(), inc.nrows()).copy_from(&inc);
        Ok(CohomologySpace { degree: k, basis: kernel_basis(&stacked, tol) })
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dims.iter().enumerate().map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum()
    }

    /// Applies unitaries `u_k` in every degree: `d_k ↦ u_{k+1} d_k u_k*`.
    pub fn conjugated(&self, unitaries: &[CMatrix]) -> Self {
        let diffs = self
            .diffs
            .iter()
            .enumerate()
            .map(|(k, d)| &unitaries[k + 1] * d * unitaries[k].adjoint())
            .collect();
        Self { dims: self.dims.clone(), diffs }
    }
}

/// A choice of weighted simplex blocks of an ambient complex, per degree.
///
/// Coordinates are orthonormal for the weighted inner product: the stored value on a
/// block of weight `w` is `√w` times the cochain value.
#[derive(Clone, Debug)]
pub(crate) struct CochainCoords {
    rank: usize,
    /// Per degree: (ambient simplex index, weight).
    blocks: Vec<Vec<(usize, f64)>>,
    ambient_counts: Vec<usize>,
}

impl CochainCoords {
    fn new(
        ambient: &SimplicialComplex,
        rank: usize,
        top: usize,
        select: impl Fn(&[usize]) -> Option<f64>,
    ) -> Self {
        let blocks = (0..=top)
            .map(|k| {
                ambient
                    .simplices(k)
                    .iter()
                    .enumerate()
                    .filter_map(|(i, s)| select(s).map(|w| (i, w)))
                    .collect()
            })
            .collect();
        Self { rank, blocks, ambient_counts: (0..=top).map(|k| ambient.count(k)).collect() }
    }

    fn dim(&self, k: usize) -> usize {
        self.rank * self.blocks[k].len()
    }

    /// Coordinates from ambient cochain values (`E`).
    fn restrict_from_ambient(&self, k: usize) -> CMatrix {
        let n = self.rank;
        let mut m = CMatrix::zeros(self.dim(k), n * self.ambient_counts[k]);
        for (row, &(idx, w)) in self.blocks[k].iter().enumerate() {
            m.view_mut((row * n, idx * n), (n, n)).copy_from(&(CMatrix::identity(n, n) * C64::from(w.sqrt())));
        }
        m
    }

    /// Ambient cochain values from coordinates (`J`), zero off the selection.
    fn to_ambient(&self, k: usize) -> CMatrix {
        let n = self.rank;
        let mut m = CMatrix::zeros(n * self.ambient_counts[k], self.dim(k));
        for (col, &(idx, w)) in self.blocks[k].iter().enumerate() {
            m.view_mut((idx * n, col * n), (n, n)).copy_from(&(CMatrix::identity(n, n) * C64::from(1.0 / w.sqrt())));
        }
        m
    }

    /// Map to `other` passing through ambient cochain values: `E_other J_self`.
    fn transfer(&self, other: &CochainCoords, k: usize) -> CMatrix {
        other.restrict_from_ambient(k) * self.to_ambient(k)
    }
}

/// Ambient differentials of the total complex together with coordinate systems on it.
pub(crate) struct AmbientCochains {
    top: usize,
    diffs: Vec<CMatrix>,
}

impl AmbientCochains {
    pub(crate) fn new(total: &SimplicialComplex, sys: &LocalSystem, top: usize) -> Self {
        let diffs = (0..top)
            .map(|k| {
                if total.dim().is_some_and(|d| k < d) {
                    coboundary_unchecked(total, sys, k)
                } else {
                    CMatrix::zeros(sys.rank() * total.count(k + 1), sys.rank() * total.count(k))
                }
            })
            .collect();
        Self { top, diffs }
    }

    fn complex(&self, coords: &CochainCoords, tol: f64) -> Result<FiniteHilbertComplex, HilbertError> {
        let dims = (0..=self.top).map(|k| coords.dim(k)).collect();
        let diffs = (0..self.top)
            .map(|k| coords.restrict_from_ambient(k + 1) * &self.diffs[k] * coords.to_ambient(k))
            .collect();
        FiniteHilbertComplex::new(dims, diffs, tol)
    }
}

fn top_degree(k: &SimplicialComplex) -> usize {
    k.dim().unwrap_or(0)
}

/// Twisted cochain complex `C^*(K, ρ)` with orthonormal simplex blocks.
pub fn build_twisted_complex(k: &SimplicialComplex, sys: &LocalSystem, tol: f64) -> Result<FiniteHilbertComplex, HilbertError> {
    require_valid(k, sys, tol.sqrt())?;
    let top = top_degree(k);
    let amb = AmbientCochains::new(k, sys, top);
    let coords = CochainCoords::new(k, sys.rank(), top, |_| Some(1.0));
    amb.complex(&coords, tol)
}

/// Relative complex `C^*(K, W, ρ)`: cochains vanishing on `W`.
pub fn build_relative_complex(
    k: &SimplicialComplex,
    w: &SimplicialComplex,
    sys: &LocalSystem,
    tol: f64,
) -> Result<FiniteHilbertComplex, HilbertError> {
    if !w.is_subcomplex_of(k) {
        return Err(HilbertError::NotSubcomplex("W is not contained in K".into()));
    }
    require_valid(k, sys, tol.sqrt())?;
    let top = top_degree(k);
    let amb = AmbientCochains::new(k, sys, top);
    let coords = CochainCoords::new(k, sys.rank(), top, |s| if w.contains(s) { None } else { Some(1.0) });
    amb.complex(&coords, tol)
}

/// The coordinate systems used by the split constructions, all over the total complex.
pub(crate) struct SplitCoords {
    pub(crate) amb: AmbientCochains,
    pub(crate) split: CochainCoords,
    pub(crate) rel1: CochainCoords,
    pub(crate) rel2: CochainCoords,
    pub(crate) rels: CochainCoords,
    pub(crate) abs1: CochainCoords,
    pub(crate) abs2: CochainCoords,
    pub(crate) interface: CochainCoords,
}

impl SplitCoords {
    pub(crate) fn new(split: &SplitComplex, sys: &LocalSystem, tol: f64) -> Result<Self, HilbertError> {
        require_valid(&split.total, sys, tol.sqrt())?;
        let top = top_degree(&split.total);
        let total = &split.total;
        let n = sys.rank();
        let (p1, p2, w) = (&split.part1, &split.part2, &split.interface);
        fn only(c: &SimplicialComplex) -> impl Fn(&[usize]) -> Option<f64> + '_ {
            move |s| c.contains(s).then_some(1.0)
        }
        Ok(Self {
            amb: AmbientCochains::new(total, sys, top),
            split: CochainCoords::new(total, n, top, |s| Some(if w.contains(s) { 2.0 } else { 1.0 })),
            rel1: CochainCoords::new(total, n, top, |s| (p1.contains(s) && !w.contains(s)).then_some(1.0)),
            rel2: CochainCoords::new(total, n, top, |s| (p2.contains(s) && !w.contains(s)).then_some(1.0)),
            rels: CochainCoords::new(total, n, top, |s| (!w.contains(s)).then_some(1.0)),
            abs1: CochainCoords::new(total, n, top, only(p1)),
            abs2: CochainCoords::new(total, n, top, only(p2)),
            interface: CochainCoords::new(total, n, top, only(w)),
        })
    }

    pub(crate) fn top(&self) -> usize {
        self.amb.top
    }
}

/// Split complex `C^*(X1 # X2, ρ)`: pairs agreeing on `W`, with the summed inner product.
///
/// Each `W` block is stored once; its coordinate is `√2` times the common value.
pub fn build_split_complex(split: &SplitComplex, sys: &LocalSystem, tol: f64) -> Result<FiniteHilbertComplex, HilbertError> {
    let sc = SplitCoords::new(split, sys, tol)?;
    sc.amb.complex(&sc.split, tol)
}

/// `0 → A →α B →β C → 0` with degreewise chain maps.
#[derive(Clone, Debug)]
pub struct ShortExactSequence {
    pub a: FiniteHilbertComplex,
    pub b: FiniteHilbertComplex,
    pub c: FiniteHilbertComplex,
    pub alpha: Vec<CMatrix>,
    pub beta: Vec<CMatrix>,
}

/// Residuals of a short exact sequence of complexes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SesResiduals {
    pub chain_map: f64,
    pub composition: f64,
    pub alpha_isometry: f64,
    pub rank_defect: usize,
}

impl ShortExactSequence {
    pub fn new(
        a: FiniteHilbertComplex,
        b: FiniteHilbertComplex,
        c: FiniteHilbertComplex,
        alpha: Vec<CMatrix>,
        beta: Vec<CMatrix>,
        tol: f64,
    ) -> Result<Self, HilbertError> {
        let ses = Self { a, b, c, alpha, beta };
        let r = ses.residuals(tol);
        let bound = 1e-10;
        if r.rank_defect != 0 || r.chain_map > bound || r.composition > bound {
            return Err(HilbertError::ExactnessFailure(format!("{r:?}")));
        }
        Ok(ses)
    }

    pub fn top(&self) -> usize {
        self.b.top()
    }

    pub fn residuals(&self, tol: f64) -> SesResiduals {
        let mut r = SesResiduals::default();
        for k in 0..=self.top() {
            let (al, be) = (&self.alpha[k], &self.beta[k]);
            r.composition = r.composition.max((be * al).norm());
            let ra = crate::numlin::rank(al, tol);
            let rb = crate::numlin::rank(be, tol);
            r.rank_defect += (self.a.dims()[k] - ra.min(self.a.dims()[k]))
                + (self.c.dims()[k] - rb.min(self.c.dims()[k]))
                + (self.b.dims()[k] as i64 - (ra + rb) as i64).unsigned_abs() as usize;
            let gram = al.adjoint() * al;
            r.alpha_isometry = r.alpha_isometry.max((gram - CMatrix::identity(al.ncols(), al.ncols())).norm());
            if k < self.top() {
                let lhs = self.b.differential(k) * al - &self.alpha[k + 1] * self.a.differential(k);
                let rhs = self.c.differential(k) * be - &self.beta[k + 1] * self.b.differential(k);
                r.chain_map = r.chain_map.max(lhs.norm()).max(rhs.norm());
            }
        }
        r
    }
}

/// The sequences `0 → C(X1,W) → C(X1#X2) → C(X2) → 0` and its mirror with the parts exchanged.
pub fn assemble_ses(split: &SplitComplex, sys: &LocalSystem, tol: f64) -> Result<(ShortExactSequence, ShortExactSequence), HilbertError> {
    let sc = SplitCoords::new(split, sys, tol)?;
    let top = sc.top();
    let b = sc.amb.complex(&sc.split, tol)?;
    let mk = |rel: &CochainCoords, abs: &CochainCoords| -> Result<ShortExactSequence, HilbertError> {
        let a = sc.amb.complex(rel, tol)?;
        let c = sc.amb.complex(abs, tol)?;
        let alpha = (0..=top).map(|k| rel.transfer(&sc.split, k)).collect();
        let beta = (0..=top).map(|k| sc.split.transfer(abs, k)).collect();
        ShortExactSequence::new(a, b.clone(), c, alpha, beta, tol)
    };
    Ok((mk(&sc.rel1, &sc.abs2)?, mk(&sc.rel2, &sc.abs1)?))
}

/// `0 → C(X1,W) ⊕ C(X2,W) → C(X1#X2) →β C(W) → 0` with `β(ω1, ω2) = (ω1|W + ω2|W)/√2`,
/// together with the section `θ(ω) = (ω, ω)/√2`.
pub fn assemble_interface_sequence(
    split: &SplitComplex,
    sys: &LocalSystem,
    tol: f64,
) -> Result<(ShortExactSequence, Vec<CMatrix>), HilbertError> {
    let sc = SplitCoords::new(split, sys, tol)?;
    let top = sc.top();
    let a = sc.amb.complex(&sc.rels, tol)?;
    let b = sc.amb.complex(&sc.split, tol)?;
    let c = sc.amb.complex(&sc.interface, tol)?;
    let root2 = C64::from(std::f64::consts::SQRT_2);
    let alpha = (0..=top).map(|k| sc.rels.transfer(&sc.split, k)).collect();
    let beta = (0..=top).map(|k| sc.split.transfer(&sc.interface, k) * root2).collect();
    let theta = (0..=top).map(|k| sc.interface.transfer(&sc.split, k) / root2).collect();
    Ok((ShortExactSequence::new(a, b, c, alpha, beta, tol)?, theta))
}
