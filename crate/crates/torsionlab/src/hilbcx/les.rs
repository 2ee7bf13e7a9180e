//! Long exact cohomology sequences, their torsion and the reordering sign ν.

use super::{CohomologySpace, HilbertError, ShortExactSequence};
use crate::numlin::{
    coimage_basis, coordinate_change_det, least_squares, orthogonal_complement, phase_corrected_bases, range_basis, rank, Basis, CMatrix,
};
use std::collections::BTreeMap;

/// Which tower a position of the sequence belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Cohomology of the subcomplex end `A` (relative cohomology of the first part).
    Rel,
    /// Cohomology of the middle complex (the split complex).
    Split,
    /// Cohomology of the quotient end `C` (absolute cohomology of the second part).
    Abs,
}

/// Exact sequence `… → H^k_rel → H^k_split → H^k_abs → H^{k+1}_rel → …` over degrees `0..=top`,
/// each space in orthonormal coordinates. Position `3k + i` holds degree `k` of the `i`-th tower.
#[derive(Clone, Debug, PartialEq)]
pub struct LongExactSequence {
    top: usize,
    dims: Vec<usize>,
    /// `maps[p]` goes from position `p` to position `p + 1`.
    maps: Vec<CMatrix>,
}

impl LongExactSequence {
    pub fn new(top: usize, dims: Vec<usize>, maps: Vec<CMatrix>, tol: f64) -> Result<Self, HilbertError> {
        let len = 3 * (top + 1);
        if dims.len() != len || maps.len() != len - 1 {
            return Err(HilbertError::ExactnessFailure(format!(
                "expected {} spaces and {} maps, got {} and {}",
                len,
                len - 1,
                dims.len(),
                maps.len()
            )));
        }
        for (p, f) in maps.iter().enumerate() {
            if f.shape() != (dims[p + 1], dims[p]) {
                return Err(HilbertError::ExactnessFailure(format!("map {p} has shape {:?}", f.shape())));
            }
        }
        let les = Self { top, dims, maps };
        let (composition, defect) = les.exactness_residuals(tol);
        if defect != 0 || composition > 1e-8 {
            return Err(HilbertError::ExactnessFailure(format!(
                "composition residual {composition:.3e}, rank defect {defect}"
            )));
        }
        Ok(les)
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().all(|&d| d == 0)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn maps(&self) -> &[CMatrix] {
        &self.maps
    }

    pub fn position(degree: usize, role: Role) -> usize {
        3 * degree
            + match role {
                Role::Rel => 0,
                Role::Split => 1,
                Role::Abs => 2,
            }
    }

    pub fn role(p: usize) -> (usize, Role) {
        let role = match p % 3 {
            0 => Role::Rel,
            1 => Role::Split,
            _ => Role::Abs,
        };
        (p / 3, role)
    }

    /// Dimensions of one tower, by degree.
    pub fn tower_dims(&self, role: Role) -> Vec<usize> {
        (0..=self.top).map(|k| self.dims[Self::position(k, role)]).collect()
    }

    /// Outgoing map at `p`, a zero map at the last position.
    pub fn outgoing(&self, p: usize) -> CMatrix {
        self.maps.get(p).cloned().unwrap_or_else(|| CMatrix::zeros(0, self.dims[p]))
    }

    pub fn incoming(&self, p: usize) -> CMatrix {
        if p == 0 {
            CMatrix::zeros(self.dims[0], 0)
        } else {
            self.maps[p - 1].clone()
        }
    }

    /// Ranks of the outgoing maps, by position.
    pub fn ranks(&self, tol: f64) -> Vec<usize> {
        (0..self.len()).map(|p| rank(&self.outgoing(p), tol)).collect()
    }

    /// Largest norm of a composition of consecutive maps, and the total rank defect.
    pub fn exactness_residuals(&self, tol: f64) -> (f64, usize) {
        let ranks = self.ranks(tol);
        let mut composition: f64 = 0.0;
        let mut defect = 0usize;
        for p in 0..self.len() {
            let inc = if p == 0 { 0 } else { ranks[p - 1] };
            defect += (self.dims[p] as i64 - (inc + ranks[p]) as i64).unsigned_abs() as usize;
            if p + 1 < self.maps.len() {
                composition = composition.max((&self.maps[p + 1] * &self.maps[p]).norm());
            }
        }
        (composition, defect)
    }

    /// Lift bases `(ker f_p)^⊥` paired with images, ordered `[lift, image]` at every position.
    pub fn defining_bases(&self, tol: f64) -> Vec<Basis> {
        let lifts: Vec<Basis> = (0..self.len()).map(|p| coimage_basis(&self.outgoing(p), tol)).collect();
        (0..self.len())
            .map(|p| {
                let image = if p == 0 { Basis::empty(self.dims[0]) } else { lifts[p - 1].mapped(&self.maps[p - 1]) };
                lifts[p].concat(&image)
            })
            .collect()
    }

    /// Orthonormal bases `[v, ṽ]` adapted to `(im f_{p-1})^⊥ ⊕ im f_{p-1}`, phase corrected against the defining bases.
    pub fn adapted_bases(&self, tol: f64) -> Result<Vec<Basis>, HilbertError> {
        let defining = self.defining_bases(tol);
        (0..self.len())
            .map(|p| {
                let image = range_basis(&self.incoming(p), tol);
                let complement = orthogonal_complement(&image, tol);
                let (v, w) = phase_corrected_bases(&complement, &image, &defining[p])?;
                Ok(v.concat(&w))
            })
            .collect()
    }

    /// The sequence as an acyclic Hilbert complex graded by position.
    pub fn as_complex(&self, tol: f64) -> Result<super::FiniteHilbertComplex, HilbertError> {
        super::FiniteHilbertComplex::new(self.dims.clone(), self.maps.clone(), tol)
    }
}

/// A way of choosing preimages under a surjective map.
pub trait LiftStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Returns `x` with `map · x = target` (columnwise), or the best attempt.
    fn lift(&self, map: &CMatrix, target: &CMatrix, tol: f64) -> CMatrix;
}

/// Minimum-norm least-squares preimages.
pub struct MinNormLift;

impl LiftStrategy for MinNormLift {
    fn name(&self) -> &'static str {
        "min-norm"
    }

    fn lift(&self, map: &CMatrix, target: &CMatrix, tol: f64) -> CMatrix {
        least_squares(map, target, tol)
    }
}

/// Basic solutions supported on a greedily chosen set of independent columns.
pub struct PivotedLift;

impl LiftStrategy for PivotedLift {
    fn name(&self) -> &'static str {
        "pivoted"
    }

    fn lift(&self, map: &CMatrix, target: &CMatrix, tol: f64) -> CMatrix {
        let mut chosen: Vec<usize> = Vec::new();
        let mut current = 0;
        for j in 0..map.ncols() {
            let mut trial = chosen.clone();
            trial.push(j);
            let sub = map.select_columns(trial.iter());
            let r = rank(&sub, tol);
            if r > current {
                current = r;
                chosen = trial;
            }
        }
        let sub = map.select_columns(chosen.iter());
        let partial = least_squares(&sub, target, tol);
        let mut out = CMatrix::zeros(map.ncols(), target.ncols());
        for (i, &j) in chosen.iter().enumerate() {
            out.set_row(j, &partial.row(i));
        }
        out
    }
}

/// Lift strategies selectable by name.
pub struct LiftRegistry {
    entries: BTreeMap<&'static str, Box<dyn LiftStrategy>>,
}

impl LiftRegistry {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(MinNormLift));
        r.register(Box::new(PivotedLift));
        r
    }

    pub fn register(&mut self, strategy: Box<dyn LiftStrategy>) {
        self.entries.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn LiftStrategy, HilbertError> {
        self.entries.get(name).map(|b| b.as_ref()).ok_or_else(|| HilbertError::UnknownLift(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

/// Long exact sequence in harmonic coordinates together with the harmonic bases used.
#[derive(Clone, Debug)]
pub struct HarmonicLes {
    pub les: LongExactSequence,
    /// Harmonic basis at every position.
    pub spaces: Vec<CohomologySpace>,
}

/// Extracts the long exact sequence of a short exact sequence of complexes.
///
/// Induced maps project chain-map images onto harmonics; connecting maps lift through `β`,
/// apply `d`, pull back through `α` and project.
pub fn long_exact_sequence(ses: &ShortExactSequence, lift: &dyn LiftStrategy, tol: f64) -> Result<HarmonicLes, HilbertError> {
    let top = ses.top();
    let mut spaces = Vec::with_capacity(3 * (top + 1));
    for k in 0..=top {
        spaces.push(ses.a.harmonic_cohomology(k, tol)?);
        spaces.push(ses.b.harmonic_cohomology(k, tol)?);
        spaces.push(ses.c.harmonic_cohomology(k, tol)?);
    }
    let mut maps = Vec::with_capacity(3 * (top + 1) - 1);
    let slack = 1e-8;
    for k in 0..=top {
        let (ha, hb, hc) = (&spaces[3 * k], &spaces[3 * k + 1], &spaces[3 * k + 2]);
        maps.push(hb.basis.matrix().adjoint() * &ses.alpha[k] * ha.basis.matrix());
        maps.push(hc.basis.matrix().adjoint() * &ses.beta[k] * hb.basis.matrix());
        if k < top {
            let h_next = &spaces[3 * (k + 1)];
            let target = hc.basis.matrix();
            let b = lift.lift(&ses.beta[k], target, tol);
            let lift_res = (&ses.beta[k] * &b - target).norm();
            if lift_res > slack * (1.0 + target.norm()) {
                return Err(HilbertError::ZigZagBreakdown { degree: k, residual: lift_res });
            }
            let db = ses.b.differential(k) * b;
            let a = least_squares(&ses.alpha[k + 1], &db, tol);
            let pull_res = (&ses.alpha[k + 1] * &a - &db).norm();
            if pull_res > slack * (1.0 + db.norm()) {
                return Err(HilbertError::ZigZagBreakdown { degree: k, residual: pull_res });
            }
            maps.push(h_next.basis.matrix().adjoint() * a);
        }
    }
    let dims = spaces.iter().map(CohomologySpace::dim).collect();
    let les = LongExactSequence::new(top, dims, maps, tol)?;
    Ok(HarmonicLes { les, spaces })
}

/// Torsion of an exact sequence from phase-corrected orthonormal bases:
/// `τ = Π_p [v_p, ṽ_p / lift_p, image_p]^{(-1)^p}`.
pub fn les_torsion(les: &LongExactSequence, tol: f64) -> Result<f64, HilbertError> {
    let defining = les.defining_bases(tol);
    let adapted = les.adapted_bases(tol)?;
    let mut log_tau = 0.0;
    let mut worst_phase: f64 = 0.0;
    for p in 0..les.len() {
        let det = coordinate_change_det(&adapted[p], &defining[p])?;
        worst_phase = worst_phase.max(det.im.abs() / det.norm());
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        log_tau += sign * det.re.ln();
    }
    if worst_phase > 1e-9 {
        return Err(HilbertError::ExactnessFailure(format!("coordinate change not real (phase {worst_phase:.3e})")));
    }
    Ok(log_tau.exp())
}

/// Torsion of the sequence viewed as an acyclic complex graded by position, via ζ'.
pub fn les_torsion_zeta(les: &LongExactSequence, tol: f64) -> Result<f64, HilbertError> {
    Ok(les.as_complex(tol)?.torsion(tol))
}

fn half_cancel(dim: i64, k: usize) -> i64 {
    let s = if k.is_multiple_of(2) { 1 } else { -1 };
    dim * (dim + s) / 2
}

/// The reordering sign ν of the canonical determinant-line isomorphism.
///
/// The last summand is read as `Σ_k dim H^k_split · Σ_{i<k} dim H^i_abs`.
pub fn nu_sign(les: &LongExactSequence, tol: f64) -> i64 {
    let top = les.top();
    let ranks = les.ranks(tol);
    let rel = les.tower_dims(Role::Rel);
    let split = les.tower_dims(Role::Split);
    let abs = les.tower_dims(Role::Abs);
    let partial = |v: &[usize], k: usize| v[..k].iter().sum::<usize>() as i64;
    let mut nu = 0i64;
    for k in 0..=top {
        let ia = ranks[3 * k] as i64;
        let ib = ranks[3 * k + 1] as i64;
        let id = ranks[3 * k + 2] as i64;
        nu += half_cancel(ia, k) + half_cancel(ib, k) + half_cancel(id, k);
        nu += rel[k] as i64 * partial(&split, k);
        nu += rel[k] as i64 * partial(&abs, k);
        nu += split[k] as i64 * partial(&abs, k);
    }
    nu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbcx::assemble_ses;
    use crate::localsys::{circle_holonomy_system, LocalSystem};
    use crate::numlin::c;
    use crate::simplicial::generators::*;

    const TOL: f64 = 1e-10;

    fn two_term(a: f64) -> LongExactSequence {
        // positions: rel^0 = C, split^0 = C, then zeros
        let mut dims = vec![0; 6];
        dims[0] = 1;
        dims[1] = 1;
        let mut maps: Vec<CMatrix> = (0..5).map(|p| CMatrix::zeros(dims[p + 1], dims[p])).collect();
        maps[0] = CMatrix::from_element(1, 1, c(a, 0.0));
        LongExactSequence::new(1, dims, maps, TOL).unwrap()
    }

    #[test]
    fn two_term_sequence_torsion() {
        let les = two_term(2.0);
        assert!((les_torsion(&les, TOL).unwrap() - 2.0).abs() < 1e-12);
        assert!((les_torsion_zeta(&les, TOL).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_isomorphisms_have_unit_torsion() {
        let les = two_term(1.0);
        assert!((les_torsion(&les, TOL).unwrap() - 1.0).abs() < 1e-12);
        let rot = two_term(-1.0);
        assert!((les_torsion(&rot, TOL).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nu_examples() {
        let zero = LongExactSequence::new(1, vec![0; 6], (0..5).map(|_| CMatrix::zeros(0, 0)).collect(), TOL).unwrap();
        assert_eq!(nu_sign(&zero, TOL), 0);
        // one isomorphism in degree 0: ν = ½·1·2 = 1 from im α*
        assert_eq!(nu_sign(&two_term(3.0), TOL), 1);
        // the same isomorphism in degree 1 contributes ½·1·0 = 0
        let mut dims = vec![0; 6];
        dims[3] = 1;
        dims[4] = 1;
        let mut maps: Vec<CMatrix> = (0..5).map(|p| CMatrix::zeros(dims[p + 1], dims[p])).collect();
        maps[3] = CMatrix::from_element(1, 1, c(3.0, 0.0));
        let les = LongExactSequence::new(1, dims, maps, TOL).unwrap();
        assert_eq!(nu_sign(&les, TOL), 0);
    }

    #[test]
    fn split_circle_les() {
        let s = split_circle(3, 1);
        let sys = LocalSystem::trivial(&s.total, 1);
        let (h, _) = assemble_ses(&s, &sys, TOL).unwrap();
        let hl = long_exact_sequence(&h, &MinNormLift, TOL).unwrap();
        // H_rel(arc1, S0) = (0, 1), H(circle) = (1, 1), H_abs(arc2) = (1, 0)
        assert_eq!(hl.les.dims(), &[0, 1, 1, 1, 1, 0]);
        // β*_0 is onto H^0 of the connected arc, so exactness forces δ*_0 = 0
        assert_eq!(rank(&hl.les.maps()[1], TOL), 1);
        assert!(hl.les.maps()[2].norm() < 1e-10);
        assert_eq!(rank(&hl.les.maps()[3], TOL), 1);
        let euler: i64 = hl.les.dims().iter().enumerate().map(|(p, &d)| if p % 2 == 0 { d as i64 } else { -(d as i64) }).sum();
        assert_eq!(euler, 0);
        let t = les_torsion(&hl.les, TOL).unwrap();
        let z = les_torsion_zeta(&hl.les, TOL).unwrap();
        assert!((t - z).abs() < 1e-10 * t);
    }

    #[test]
    fn acyclic_split_circle_les_is_connecting_iso() {
        let s = split_circle(4, 2);
        let sys = circle_holonomy_system(&s.total, 1.1);
        let (h, hp) = assemble_ses(&s, &sys, TOL).unwrap();
        for ses in [&h, &hp] {
            let hl = long_exact_sequence(ses, &MinNormLift, TOL).unwrap();
            // the twisted circle is acyclic but the arcs are contractible
            assert_eq!(hl.les.tower_dims(Role::Split), vec![0, 0]);
            assert_eq!(hl.les.dims(), &[0, 0, 1, 1, 0, 0]);
            assert_eq!(rank(&hl.les.maps()[2], TOL), 1);
        }
    }

    #[test]
    fn degenerate_split_les_is_isomorphism() {
        let total = circle(4);
        let s = degenerate_split(total.clone(), &[vec![2]]);
        let sys = LocalSystem::trivial(&total, 1);
        let (h, _) = assemble_ses(&s, &sys, TOL).unwrap();
        let hl = long_exact_sequence(&h, &MinNormLift, TOL).unwrap();
        // C(X2) = C(point): H^0 = C and δ^0 is injective, α*_1 is an isomorphism
        assert_eq!(hl.les.dims(), &[0, 1, 1, 1, 1, 0]);
        assert_eq!(rank(&hl.les.maps()[3], TOL), 1);
    }

    #[test]
    fn lift_strategies_agree() {
        let s = split_circle(5, 2);
        let sys = LocalSystem::trivial(&s.total, 2);
        let (h, _) = assemble_ses(&s, &sys, TOL).unwrap();
        let reg = LiftRegistry::builtin();
        let a = long_exact_sequence(&h, reg.get("min-norm").unwrap(), TOL).unwrap();
        let b = long_exact_sequence(&h, reg.get("pivoted").unwrap(), TOL).unwrap();
        for (x, y) in a.les.maps().iter().zip(b.les.maps()) {
            assert!((x - y).norm() < 1e-10);
        }
        assert!(reg.get("nope").is_err());
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["min-norm", "pivoted"]);
    }

    #[test]
    fn pivoted_lift_differs_from_min_norm() {
        let map = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let t = CMatrix::from_element(1, 1, c(2.0, 0.0));
        let p = PivotedLift.lift(&map, &t, TOL);
        let m = MinNormLift.lift(&map, &t, TOL);
        assert!((p[(0, 0)] - c(2.0, 0.0)).norm() < 1e-12 && p[(1, 0)].norm() < 1e-12);
        assert!((m[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
    }
}
