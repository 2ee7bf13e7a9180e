//! Determinant lines of graded spaces, stored symbolically as ordered bases with a scalar.
//!
//! Provides the fusion isomorphism with its Knudsen–Mumford sign, the action Φ of an exact
//! sequence on its determinant line, the induced maps Ψ and Ω, and refined torsion elements.

use crate::hilbcx::{nu_sign, DualityInstance, HilbertError, LongExactSequence, Role};
use crate::numlin::{coordinate_change_det, Basis, CMatrix, NumlinError, C64};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetLineError {
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("sign exponent {value} is not an even integer before halving")]
    NonIntegerSign { value: i64 },
    #[error("duality in degree {degree} is not an isomorphism")]
    NotIsomorphism { degree: usize },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("determinant-line elements must have a nonzero scalar")]
    ZeroScalar,
    #[error(transparent)]
    Numlin(#[from] NumlinError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// Exponent `(-1)^k` of degree `k` in `⊗_k det(V^k)^{(-1)^k}`.
pub fn graded_exponent(k: usize) -> i8 {
    if k.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn sign_of(parity: i64) -> f64 {
    if parity.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `scalar · ⊗_k [bases_k]^{exponents_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetLineElement {
    bases: Vec<Basis>,
    exponents: Vec<i8>,
    scalar: C64,
}

impl DetLineElement {
    pub fn new(bases: Vec<Basis>, exponents: Vec<i8>, scalar: C64) -> Result<Self, DetLineError> {
        if bases.len() != exponents.len() {
            return Err(DetLineError::DegreeMismatch(format!("{} bases for {} exponents", bases.len(), exponents.len())));
        }
        if exponents.iter().any(|&e| e != 1 && e != -1) {
            return Err(DetLineError::DegreeMismatch(format!("exponents must be ±1, got {exponents:?}")));
        }
        if let Some(k) = bases.iter().position(|b| b.len() != b.ambient_dim()) {
            return Err(DetLineError::BasisMismatch(format!(
                "degree {k}: {} vectors in a space of dimension {}",
                bases[k].len(),
                bases[k].ambient_dim()
            )));
        }
        if scalar == C64::from(0.0) {
            return Err(DetLineError::ZeroScalar);
        }
        Ok(Self { bases, exponents, scalar })
    }

    /// Element of `⊗_k det(V^k)^{(-1)^k}`.
    pub fn graded(bases: Vec<Basis>, scalar: C64) -> Result<Self, DetLineError> {
        let exponents = (0..bases.len()).map(graded_exponent).collect();
        Self::new(bases, exponents, scalar)
    }

    /// Standard bases with scalar one.
    pub fn standard(dims: &[usize]) -> Self {
        Self {
            bases: dims.iter().map(|&d| Basis::standard(d)).collect(),
            exponents: (0..dims.len()).map(graded_exponent).collect(),
            scalar: C64::from(1.0),
        }
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn exponents(&self) -> &[i8] {
        &self.exponents
    }

    pub fn scalar(&self) -> C64 {
        self.scalar
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(Basis::len).collect()
    }

    /// Knudsen–Mumford degree of the line, `Σ dim` mod 2.
    pub fn parity(&self) -> i64 {
        self.dims().iter().sum::<usize>() as i64 % 2
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { scalar: self.scalar * factor, ..self.clone() }
    }

    /// The scalar `λ` with `self = λ · other`.
    pub fn ratio_to(&self, other: &Self) -> Result<C64, DetLineError> {
        if self.exponents != other.exponents {
            return Err(DetLineError::DegreeMismatch(format!(
                "exponent patterns {:?} and {:?}",
                self.exponents, other.exponents
            )));
        }
        let mut value = self.scalar / other.scalar;
        for (k, (a, b)) in self.bases.iter().zip(&other.bases).enumerate() {
            if a.ambient_dim() != b.ambient_dim() {
                return Err(DetLineError::BasisMismatch(format!("degree {k}: ambient {} vs {}", a.ambient_dim(), b.ambient_dim())));
            }
            let det = coordinate_change_det(a, b)?;
            value *= if self.exponents[k] > 0 { det } else { det.inv() };
        }
        Ok(value)
    }
}

/// `Σ_{0≤k<i≤m} dim A^i · dim B^k`.
pub fn m_sign(dims_a: &[usize], dims_b: &[usize]) -> i64 {
    let mut total = 0i64;
    for (i, &a) in dims_a.iter().enumerate() {
        for &b in dims_b.iter().take(i) {
            total += (a * b) as i64;
        }
    }
    total
}

/// `½ Σ_{k<r} (h_rel^k + h_abs^k)(h_rel^k + h_abs^k + (-1)^{r-k})` with `r = (m+1)/2`.
pub fn r_sign(dims_rel: &[usize], dims_abs: &[usize], top: usize) -> Result<i64, DetLineError> {
    if top.is_multiple_of(2) {
        return Err(DetLineError::DegreeMismatch(format!("top degree {top} must be odd")));
    }
    if dims_rel.len() != top + 1 || dims_abs.len() != top + 1 {
        return Err(DetLineError::DegreeMismatch(format!(
            "towers of length {} and {} for top degree {top}",
            dims_rel.len(),
            dims_abs.len()
        )));
    }
    let r = top.div_ceil(2);
    let mut twice = 0i64;
    for k in 0..r {
        let x = (dims_rel[k] + dims_abs[k]) as i64;
        let s = if (r - k).is_multiple_of(2) { 1 } else { -1 };
        twice += x * (x + s);
    }
    if twice % 2 != 0 {
        return Err(DetLineError::NonIntegerSign { value: twice });
    }
    Ok(twice / 2)
}

fn stack(a: &Basis, b: &Basis) -> Basis {
    Basis::from_matrix(crate::numlin::block_diag(a.matrix(), b.matrix()))
}

/// `det(A) ⊗ det(B) → det(A ⊕ B)`: per-degree bases concatenated, sign `(-1)^M`.
pub fn fusion(x: &DetLineElement, y: &DetLineElement) -> Result<DetLineElement, DetLineError> {
    if x.exponents != y.exponents {
        return Err(DetLineError::DegreeMismatch(format!("exponent patterns {:?} and {:?}", x.exponents, y.exponents)));
    }
    let bases = x.bases.iter().zip(&y.bases).map(|(a, b)| stack(a, b)).collect();
    let sign = sign_of(m_sign(&x.dims(), &y.dims()));
    Ok(DetLineElement { bases, exponents: x.exponents.clone(), scalar: x.scalar * y.scalar * sign })
}

/// Inverse fusion, normalized so the second factor is the standard element of `B`.
pub fn unfuse(e: &DetLineElement, dims_a: &[usize], dims_b: &[usize]) -> Result<(DetLineElement, DetLineElement), DetLineError> {
    let (a, b) = (DetLineElement::standard(dims_a), DetLineElement::standard(dims_b));
    let reference = fusion(&a, &b)?;
    let lambda = e.ratio_to(&reference)?;
    Ok((a.scaled(lambda), b))
}

/// Refined torsion element built from bases `e_k` of the relative tower and dualities
/// `gamma[j] : rel^j → abs^{m-j}`. Degree `k` carries `[e_k, Γ e_{m-k}]`, scalar `(-1)^R`.
pub fn refined_torsion_element(e: &[Basis], gamma: &[CMatrix], top: usize) -> Result<DetLineElement, DetLineError> {
    if e.len() != top + 1 || gamma.len() != top + 1 {
        return Err(DetLineError::DegreeMismatch(format!("need {} degrees", top + 1)));
    }
    for (j, g) in gamma.iter().enumerate() {
        if g.ncols() != e[j].ambient_dim() || g.nrows() != g.ncols() || crate::numlin::rank(g, 1e-20) != g.ncols() {
            return Err(DetLineError::NotIsomorphism { degree: j });
        }
    }
    let rel_dims: Vec<usize> = e.iter().map(Basis::ambient_dim).collect();
    let abs_dims: Vec<usize> = (0..=top).map(|k| gamma[top - k].nrows()).collect();
    let bases = (0..=top).map(|k| stack(&e[k], &e[top - k].mapped(&gamma[top - k]))).collect();
    let sign = sign_of(r_sign(&rel_dims, &abs_dims, top)?);
    DetLineElement::graded(bases, C64::from(sign))
}

fn check_tower(les: &LongExactSequence, el: &DetLineElement, role: Role, what: &str) -> Result<(), DetLineError> {
    let expected = les.tower_dims(role);
    let got: Vec<usize> = el.bases.iter().map(Basis::ambient_dim).collect();
    if got != expected {
        return Err(DetLineError::BasisMismatch(format!("{what} lives in dims {got:?}, tower has {expected:?}")));
    }
    if el.exponents.iter().enumerate().any(|(k, &x)| x != graded_exponent(k)) {
        return Err(DetLineError::BasisMismatch(format!("{what} must carry the graded exponent pattern")));
    }
    Ok(())
}

/// `Φ(x ⊗ y ⊗ z^{-1})` for `x` over the rel tower, `y` over the abs tower and `z` over the split tower.
pub fn phi_action(les: &LongExactSequence, x: &DetLineElement, y: &DetLineElement, z: &DetLineElement, tol: f64) -> Result<C64, DetLineError> {
    check_tower(les, x, Role::Rel, "x")?;
    check_tower(les, y, Role::Abs, "y")?;
    check_tower(les, z, Role::Split, "z")?;
    let defining = les.defining_bases(tol);
    let mut value = C64::from(sign_of(nu_sign(les, tol))) * x.scalar * y.scalar / z.scalar;
    for (p, def) in defining.iter().enumerate() {
        let (k, role) = LongExactSequence::role(p);
        let basis = match role {
            Role::Rel => &x.bases[k],
            Role::Split => &z.bases[k],
            Role::Abs => &y.bases[k],
        };
        let det = coordinate_change_det(basis, def)?;
        value *= if p % 2 == 0 { det } else { det.inv() };
    }
    Ok(value)
}

/// Phase-corrected orthonormal element of one tower.
pub fn adapted_element(les: &LongExactSequence, role: Role, tol: f64) -> Result<DetLineElement, DetLineError> {
    let adapted = les.adapted_bases(tol)?;
    let bases = (0..=les.top()).map(|k| adapted[LongExactSequence::position(k, role)].clone()).collect();
    DetLineElement::graded(bases, C64::from(1.0))
}

/// `Ψ(x ⊗ y) = Φ(x ⊗ y ⊗ z^{-1}) · z`.
pub fn psi(les: &LongExactSequence, x: &DetLineElement, y: &DetLineElement, z: &DetLineElement, tol: f64) -> Result<DetLineElement, DetLineError> {
    let phi = phi_action(les, x, y, z, tol)?;
    Ok(z.scaled(phi))
}

/// Every sign entering the splitting formula.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SignLedger {
    pub nu: i64,
    pub nu_prime: i64,
    /// `R` for `M1`, `M2` and the glued space.
    pub r: [i64; 3],
    /// `M` for `M1`, `M2` and the glued space.
    pub m: [i64; 3],
    pub flip_sign: i64,
    /// `M1 + M2 − M_# + R1 + R2 − R + 1` mod 2.
    pub splitting_sign: i64,
}

impl SignLedger {
    pub fn new(nu: i64, nu_prime: i64, r: [i64; 3], m: [i64; 3], flip_sign: i64) -> Self {
        let splitting_sign = (m[0] + m[1] - m[2] + r[0] + r[1] - r[2] + 1).rem_euclid(2);
        Self { nu, nu_prime, r, m, flip_sign, splitting_sign }
    }
}

/// Sign ledger of a pair of sequences: `H` with towers `R1, S, A2` and `H'` with `R2, S, A1`.
pub fn sign_ledger(h: &LongExactSequence, hp: &LongExactSequence, tol: f64) -> Result<SignLedger, DetLineError> {
    let m = h.top();
    let (r1, a2) = (h.tower_dims(Role::Rel), h.tower_dims(Role::Abs));
    let (r2, a1) = (hp.tower_dims(Role::Rel), hp.tower_dims(Role::Abs));
    let s = h.tower_dims(Role::Split);
    Ok(SignLedger::new(
        nu_sign(h, tol),
        nu_sign(hp, tol),
        [r_sign(&r1, &a1, m)?, r_sign(&r2, &a2, m)?, r_sign(&s, &s, m)?],
        [m_sign(&r1, &a1), m_sign(&r2, &a2), m_sign(&s, &s)],
        flip_parity(&r2, &a1, &a2),
    ))
}

/// Parity of the reordering `x₁y₁x₂y₂ → x₁y₂x₂y₁` of lines over `R1, A1, R2, A2`.
fn flip_parity(r2: &[usize], a1: &[usize], a2: &[usize]) -> i64 {
    let (r2, a1, a2) = (tower_parity(r2), tower_parity(a1), tower_parity(a2));
    (a2 * r2 + a2 * a1 + a1 * r2) % 2
}

/// Result of `Ω(ρ₁ ⊗ ρ₂)`.
#[derive(Clone, Debug)]
pub struct OmegaOutcome {
    /// Element over `S ⊕ S` (split tower of `H` then of `H'`).
    pub element: DetLineElement,
    /// Parity of the reordering `x₁y₁x₂y₂ → x₁y₂x₂y₁`.
    pub flip_sign: i64,
}

fn tower_parity(d: &[usize]) -> i64 {
    d.iter().sum::<usize>() as i64 % 2
}

/// `Ω = μ ∘ (Ψ ⊗ Ψ') ∘ flip ∘ (μ^{-1} ⊗ μ^{-1})` applied to `ρ₁ ⊗ ρ₂`, where `ρ₁` lives over
/// `R1 ⊕ A1` and `ρ₂` over `R2 ⊕ A2`.
pub fn omega(inst: &DualityInstance, rho1: &DetLineElement, rho2: &DetLineElement, tol: f64) -> Result<OmegaOutcome, DetLineError> {
    let (h, hp) = (&inst.les_h, &inst.les_hprime);
    let r1 = h.tower_dims(Role::Rel);
    let a2 = h.tower_dims(Role::Abs);
    let r2 = hp.tower_dims(Role::Rel);
    let a1 = hp.tower_dims(Role::Abs);
    let (x1, y1) = unfuse(rho1, &r1, &a1)?;
    let (x2, y2) = unfuse(rho2, &r2, &a2)?;
    let flip_sign = flip_parity(&r2, &a1, &a2);
    let z = adapted_element(h, Role::Split, tol)?;
    let zp = adapted_element(hp, Role::Split, tol)?;
    let left = psi(h, &x1, &y2, &z, tol)?;
    let right = psi(hp, &x2, &y1, &zp, tol)?;
    let element = fusion(&left, &right)?.scaled(C64::from(sign_of(flip_sign)));
    Ok(OmegaOutcome { element, flip_sign })
}

/// Outcome of comparing `Ω(ρ_Γ ⊗ ρ_Γ)` with `ρ_Γ(#)` on a synthetic instance.
#[derive(Clone, Debug)]
pub struct SplittingReport {
    pub ratio: C64,
    pub tau_h: f64,
    pub ledger: SignLedger,
    /// 0 when the ratio is positive, 1 when negative.
    pub observed_sign: i64,
    /// `| |ratio| − τ(H)² | / τ(H)²`.
    pub magnitude_residual: f64,
    /// `|Im ratio| / |ratio|`.
    pub phase_residual: f64,
}

impl SplittingReport {
    pub fn sign_matches(&self) -> bool {
        self.observed_sign == self.ledger.splitting_sign
    }
}

/// Builds the three refined torsion elements from bases of `R1`, `R2` and `S` and compares.
pub fn splitting_report(
    inst: &DualityInstance,
    e_rel1: &[Basis],
    e_rel2: &[Basis],
    e_split: &[Basis],
    tol: f64,
) -> Result<SplittingReport, DetLineError> {
    let m = inst.top;
    let (h, hp) = (&inst.les_h, &inst.les_hprime);
    let gamma_rel2: Vec<CMatrix> = (0..=m).map(|k| inst.gamma_rel2(k)).collect();
    let rho1 = refined_torsion_element(e_rel1, &inst.gamma_rel1, m)?;
    let rho2 = refined_torsion_element(e_rel2, &gamma_rel2, m)?;
    let rho_sharp = refined_torsion_element(e_split, &inst.gamma_split, m)?;
    let out = omega(inst, &rho1, &rho2, tol)?;
    let ratio = out.element.ratio_to(&rho_sharp)?;
    let tau_h = crate::hilbcx::les_torsion(h, tol)?;

    let ledger = sign_ledger(h, hp, tol)?;
    debug_assert_eq!(ledger.flip_sign, out.flip_sign);
    let tau_sq = tau_h * tau_h;
    Ok(SplittingReport {
        ratio,
        tau_h,
        observed_sign: if ratio.re > 0.0 { 0 } else { 1 },
        magnitude_residual: (ratio.norm() - tau_sq).abs() / tau_sq,
        phase_residual: ratio.im.abs() / ratio.norm(),
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbcx::{generate_duality_instance, les_torsion, DimensionProfile};
    use crate::numlin::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-10;

    fn random_basis(rng: &mut impl Rng, n: usize) -> Basis {
        Basis::from_matrix(CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
    }

    fn random_element(rng: &mut impl Rng, dims: &[usize]) -> DetLineElement {
        let bases = dims.iter().map(|&d| random_basis(rng, d)).collect();
        DetLineElement::graded(bases, c(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn m_sign_examples() {
        assert_eq!(m_sign(&[0, 0], &[0, 0]), 0);
        assert_eq!(m_sign(&[0, 1], &[1, 0]), 1);
        assert_eq!(m_sign(&[1, 1], &[1, 1]), 1);
    }

    #[test]
    fn r_sign_examples() {
        assert_eq!(r_sign(&[0, 0], &[0, 0], 1).unwrap(), 0);
        assert_eq!(r_sign(&[1, 0], &[0, 0], 1).unwrap(), 0);
        assert_eq!(r_sign(&[1, 0], &[1, 0], 1).unwrap(), 1);
        assert!(r_sign(&[0; 3], &[0; 3], 2).is_err());
    }

    #[test]
    fn fusion_with_trivial_factor_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_element(&mut rng, &[2, 1, 3]);
        let y = DetLineElement::standard(&[0, 0, 0]);
        let f = fusion(&x, &y).unwrap();
        assert!((f.ratio_to(&x).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fusion_single_inversion() {
        let x = DetLineElement::standard(&[0, 1]);
        let y = DetLineElement::standard(&[1, 0]);
        assert_eq!(fusion(&x, &y).unwrap().scalar(), c(-1.0, 0.0));
        assert_eq!(fusion(&y, &x).unwrap().scalar(), c(1.0, 0.0));
    }

    #[test]
    fn fusion_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let dims: Vec<Vec<usize>> = (0..3).map(|_| (0..4).map(|_| rng.random_range(0..3)).collect()).collect();
            let x = random_element(&mut rng, &dims[0]);
            let y = random_element(&mut rng, &dims[1]);
            let z = random_element(&mut rng, &dims[2]);
            let left = fusion(&fusion(&x, &y).unwrap(), &z).unwrap();
            let right = fusion(&x, &fusion(&y, &z).unwrap()).unwrap();
            assert!((left.ratio_to(&right).unwrap() - c(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn unfuse_inverts_fusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_element(&mut rng, &[1, 2]);
        let y = random_element(&mut rng, &[2, 1]);
        let (a, b) = unfuse(&fusion(&x, &y).unwrap(), &[1, 2], &[2, 1]).unwrap();
        let lhs = a.ratio_to(&x).unwrap() * b.ratio_to(&y).unwrap();
        assert!((lhs - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn element_rejects_bad_input() {
        assert_eq!(DetLineElement::graded(vec![Basis::standard(1)], c(0.0, 0.0)), Err(DetLineError::ZeroScalar));
        assert!(DetLineElement::graded(vec![Basis::empty(2)], c(1.0, 0.0)).is_err());
        let x = DetLineElement::standard(&[1]);
        let y = DetLineElement::standard(&[1, 0]);
        assert!(fusion(&x, &y).is_err());
    }

    #[test]
    fn refined_element_trivial_and_one_dimensional() {
        let empty = vec![Basis::empty(0), Basis::empty(0)];
        let z = CMatrix::zeros(0, 0);
        let rho = refined_torsion_element(&empty, &[z.clone(), z], 1).unwrap();
        assert_eq!(rho.scalar(), c(1.0, 0.0));
        assert_eq!(rho.dims(), vec![0, 0]);

        // H^0_rel = C, H^1_rel = 0, Γ : H^0_rel → H^1_abs
        let g = CMatrix::from_element(1, 1, c(0.6, 0.8));
        let e = vec![Basis::standard(1), Basis::empty(0)];
        let rho = refined_torsion_element(&e, &[g.clone(), CMatrix::zeros(0, 0)], 1).unwrap();
        assert_eq!(rho.dims(), vec![1, 1]);
        assert_eq!(rho.scalar().norm(), 1.0);
        // e_0 ↦ 2 e_0 enters degree 0 and, through Γ, degree 1 with opposite exponent
        let e2 = vec![Basis::standard(1).scaled(c(2.0, 0.0)), Basis::empty(0)];
        let rho2 = refined_torsion_element(&e2, &[g, CMatrix::zeros(0, 0)], 1).unwrap();
        assert!((rho2.ratio_to(&rho).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn refined_element_is_basis_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = generate_duality_instance(5, 3, &DimensionProfile::Random { max_dim: 3 }).unwrap();
        let dims = inst.les_h.tower_dims(Role::Rel);
        let e: Vec<Basis> = dims.iter().map(|&d| random_basis(&mut rng, d)).collect();
        let f: Vec<Basis> = dims.iter().map(|&d| random_basis(&mut rng, d)).collect();
        let a = refined_torsion_element(&e, &inst.gamma_rel1, 3).unwrap();
        let b = refined_torsion_element(&f, &inst.gamma_rel1, 3).unwrap();
        assert!((a.ratio_to(&b).unwrap() - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn refined_element_rejects_singular_duality() {
        let e = vec![Basis::standard(1), Basis::empty(0)];
        let g = CMatrix::zeros(1, 1);
        assert_eq!(
            refined_torsion_element(&e, &[g, CMatrix::zeros(0, 0)], 1),
            Err(DetLineError::NotIsomorphism { degree: 0 })
        );
    }

    fn tower_element(les: &LongExactSequence, bases: &[Basis], role: Role) -> DetLineElement {
        let v = (0..=les.top()).map(|k| bases[LongExactSequence::position(k, role)].clone()).collect();
        DetLineElement::graded(v, c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn phi_on_defining_bases_is_nu_sign() {
        for seed in 0..10 {
            let inst = generate_duality_instance(seed, 1, &DimensionProfile::Random { max_dim: 3 }).unwrap();
            let les = &inst.les_h;
            let def = les.defining_bases(TOL);
            let (x, y, z) = (tower_element(les, &def, Role::Rel), tower_element(les, &def, Role::Abs), tower_element(les, &def, Role::Split));
            let phi = phi_action(les, &x, &y, &z, TOL).unwrap();
            let expected = sign_of(nu_sign(les, TOL));
            assert!((phi - c(expected, 0.0)).norm() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn phi_on_adapted_bases_is_signed_torsion() {
        for seed in 0..10 {
            let inst = generate_duality_instance(seed, 3, &DimensionProfile::Random { max_dim: 3 }).unwrap();
            let les = &inst.les_h;
            let x = adapted_element(les, Role::Rel, TOL).unwrap();
            let y = adapted_element(les, Role::Abs, TOL).unwrap();
            let z = adapted_element(les, Role::Split, TOL).unwrap();
            let phi = phi_action(les, &x, &y, &z, TOL).unwrap();
            let tau = les_torsion(les, TOL).unwrap();
            let expected = sign_of(nu_sign(les, TOL)) * tau;
            assert!((phi - c(expected, 0.0)).norm() < 1e-9 * tau, "seed {seed}");
        }
    }

    #[test]
    fn phi_scales_with_degree_parity() {
        let inst = generate_duality_instance(7, 1, &DimensionProfile::Ranks(vec![1, 0, 1, 0, 1, 0])).unwrap();
        let les = &inst.les_h;
        let x = adapted_element(les, Role::Rel, TOL).unwrap();
        let y = adapted_element(les, Role::Abs, TOL).unwrap();
        let z = adapted_element(les, Role::Split, TOL).unwrap();
        let base = phi_action(les, &x, &y, &z, TOL).unwrap();
        let factor = c(3.0, 0.0);
        // degree-1 rel vector sits at an odd position: exponent -1
        let mut xb = x.bases().to_vec();
        xb[1] = xb[1].scaled(factor);
        let x1 = DetLineElement::graded(xb, c(1.0, 0.0)).unwrap();
        let scaled = phi_action(les, &x1, &y, &z, TOL).unwrap();
        assert!((scaled / base - factor.inv()).norm() < 1e-12);
        // degree-0 split vector sits at position 1, again exponent -1
        let mut zb = z.bases().to_vec();
        zb[0] = zb[0].scaled(factor);
        let z1 = DetLineElement::graded(zb, c(1.0, 0.0)).unwrap();
        let scaled = phi_action(les, &x, &y, &z1, TOL).unwrap();
        assert!((scaled / base - factor.inv()).norm() < 1e-12);
        // degree-0 abs vector at position 2
        let mut yb = y.bases().to_vec();
        yb[0] = yb[0].scaled(factor);
        let y1 = DetLineElement::graded(yb, c(1.0, 0.0)).unwrap();
        let scaled = phi_action(les, &x, &y1, &z, TOL).unwrap();
        assert!((scaled / base - factor).norm() < 1e-12);
    }

    #[test]
    fn phi_rejects_wrong_tower() {
        let inst = generate_duality_instance(7, 1, &DimensionProfile::Ranks(vec![1, 0, 1, 0, 1, 0])).unwrap();
        let x = DetLineElement::standard(&[2, 1]);
        let y = adapted_element(&inst.les_h, Role::Abs, TOL).unwrap();
        let z = adapted_element(&inst.les_h, Role::Split, TOL).unwrap();
        assert!(matches!(phi_action(&inst.les_h, &x, &y, &z, TOL), Err(DetLineError::BasisMismatch(_))));
    }

    #[test]
    fn psi_is_independent_of_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let inst = generate_duality_instance(seed, 3, &DimensionProfile::Random { max_dim: 3 }).unwrap();
            let les = &inst.les_h;
            let x = random_element(&mut rng, &les.tower_dims(Role::Rel));
            let y = random_element(&mut rng, &les.tower_dims(Role::Abs));
            let z1 = random_element(&mut rng, &les.tower_dims(Role::Split));
            let z2 = random_element(&mut rng, &les.tower_dims(Role::Split));
            let a = psi(les, &x, &y, &z1, TOL).unwrap();
            let b = psi(les, &x, &y, &z2, TOL).unwrap();
            assert!((a.ratio_to(&b).unwrap() - c(1.0, 0.0)).norm() < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn psi_on_zero_sequence_is_scalar_multiplication() {
        let inst = generate_duality_instance(0, 1, &DimensionProfile::Ranks(vec![0; 6])).unwrap();
        let x = DetLineElement::standard(&[0, 0]).scaled(c(2.0, 0.0));
        let y = DetLineElement::standard(&[0, 0]).scaled(c(0.0, 3.0));
        let z = DetLineElement::standard(&[0, 0]);
        let out = psi(&inst.les_h, &x, &y, &z, TOL).unwrap();
        assert!((out.scalar() - c(0.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn omega_is_linear_in_each_argument() {
        let inst = generate_duality_instance(2, 1, &DimensionProfile::Random { max_dim: 3 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r1 = inst.les_h.tower_dims(Role::Rel);
        let r2 = inst.les_hprime.tower_dims(Role::Rel);
        let e1: Vec<Basis> = r1.iter().map(|&d| random_basis(&mut rng, d)).collect();
        let e2: Vec<Basis> = r2.iter().map(|&d| random_basis(&mut rng, d)).collect();
        let g2: Vec<CMatrix> = (0..=1).map(|k| inst.gamma_rel2(k)).collect();
        let rho1 = refined_torsion_element(&e1, &inst.gamma_rel1, 1).unwrap();
        let rho2 = refined_torsion_element(&e2, &g2, 1).unwrap();
        let a = omega(&inst, &rho1, &rho2, TOL).unwrap().element;
        let b = omega(&inst, &rho1.scaled(c(1.5, -2.0)), &rho2, TOL).unwrap().element;
        assert!((b.ratio_to(&a).unwrap() - c(1.5, -2.0)).norm() < 1e-10);
    }

    #[test]
    fn omega_on_trivial_cohomology() {
        let inst = generate_duality_instance(0, 1, &DimensionProfile::Ranks(vec![0; 6])).unwrap();
        let empty = vec![Basis::empty(0), Basis::empty(0)];
        let rep = splitting_report(&inst, &empty, &empty, &empty, TOL).unwrap();
        assert_eq!(rep.ratio, c(1.0, 0.0));
        assert_eq!(rep.ledger.splitting_sign, 1);
        assert_eq!(rep.ledger.flip_sign, 0);
    }

    #[test]
    fn splitting_ratio_magnitude_is_torsion_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for seed in 0..20 {
            let top = if seed % 2 == 0 { 1 } else { 3 };
            let inst = generate_duality_instance(seed, top, &DimensionProfile::Random { max_dim: 4 }).unwrap();
            let pick = |rng: &mut ChaCha8Rng, d: Vec<usize>| d.iter().map(|&n| random_basis(rng, n)).collect::<Vec<_>>();
            let e1 = pick(&mut rng, inst.les_h.tower_dims(Role::Rel));
            let e2 = pick(&mut rng, inst.les_hprime.tower_dims(Role::Rel));
            let es = pick(&mut rng, inst.les_h.tower_dims(Role::Split));
            let rep = splitting_report(&inst, &e1, &e2, &es, TOL).unwrap();
            assert!(rep.magnitude_residual < 1e-7, "seed {seed}: {}", rep.magnitude_residual);
            assert!(rep.phase_residual < 1e-7, "seed {seed}");
        }
    }
}
