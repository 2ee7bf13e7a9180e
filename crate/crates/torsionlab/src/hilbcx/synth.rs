//! Synthetic pairs of long exact sequences related by a unitary duality.

use super::{HilbertError, LongExactSequence, Role};
use crate::numlin::{CMatrix, C64};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// How to pick the ranks of the maps of the generated sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DimensionProfile {
    /// Rank of the map leaving each position; the last entry must be 0.
    Ranks(Vec<usize>),
    /// Rejection-sample ranks with every space of dimension at most `max_dim`.
    Random { max_dim: usize },
}

/// Sequences `H` and `H'` with dualities `Γ : H^k → H'^{m-k}` making the ladder commute.
///
/// Towers of `H`: rel = `R1`, split = `S`, abs = `A2`. Towers of `H'`: rel = `R2`, split = `S`, abs = `A1`.
#[derive(Clone, Debug)]
pub struct DualityInstance {
    pub seed: u64,
    pub top: usize,
    pub les_h: LongExactSequence,
    pub les_hprime: LongExactSequence,
    /// `S^k → S^{m-k}`, with `Γ^{(m-k)} = (Γ^{(k)})^{-1}`.
    pub gamma_split: Vec<CMatrix>,
    /// `R1^k → A1^{m-k}`.
    pub gamma_rel1: Vec<CMatrix>,
    /// `A2^k → R2^{m-k}`.
    pub gamma_abs2: Vec<CMatrix>,
}

pub(crate) fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let z = CMatrix::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let r = qr.r();
    let phases = DVector::from_iterator(n, (0..n).map(|i| {
        let d = r[(i, i)];
        if d.norm() > 0.0 { d / d.norm() } else { C64::from(1.0) }
    }));
    qr.q() * CMatrix::from_diagonal(&phases)
}

fn well_conditioned(rng: &mut impl Rng, r: usize) -> CMatrix {
    let u = random_unitary(rng, r);
    let v = random_unitary(rng, r);
    let s = DVector::from_iterator(r, (0..r).map(|_| C64::from(rng.random_range(0.1..10.0))));
    u * CMatrix::from_diagonal(&s) * v.adjoint()
}

fn dims_from_ranks(ranks: &[usize]) -> Vec<usize> {
    (0..ranks.len()).map(|j| if j > 0 { ranks[j - 1] } else { 0 } + ranks[j]).collect()
}

fn split_symmetric(dims: &[usize], top: usize) -> bool {
    (0..=top).all(|k| dims[3 * k + 1] == dims[3 * (top - k) + 1])
}

fn sample_ranks(rng: &mut impl Rng, top: usize, max_dim: usize) -> Vec<usize> {
    let len = 3 * (top + 1);
    loop {
        let mut ranks: Vec<usize> = (0..len).map(|_| rng.random_range(0..=max_dim)).collect();
        ranks[len - 1] = 0;
        let dims = dims_from_ranks(&ranks);
        if dims.iter().all(|&d| d <= max_dim) && split_symmetric(&dims, top) {
            return ranks;
        }
    }
}

/// Builds an exact sequence with prescribed ranks from random unitaries and well-conditioned blocks.
fn exact_maps(rng: &mut impl Rng, ranks: &[usize]) -> (Vec<usize>, Vec<CMatrix>) {
    let dims = dims_from_ranks(ranks);
    let frames: Vec<CMatrix> = dims.iter().map(|&d| random_unitary(rng, d)).collect();
    let mut maps = Vec::with_capacity(dims.len() - 1);
    for j in 0..dims.len() - 1 {
        let before = if j > 0 { ranks[j - 1] } else { 0 };
        let r = ranks[j];
        let block = well_conditioned(rng, r);
        let target = frames[j + 1].columns(0, r);
        let source = frames[j].columns(before, r);
        maps.push(target * block * source.adjoint());
    }
    (dims, maps)
}

pub fn generate_duality_instance(seed: u64, top: usize, profile: &DimensionProfile) -> Result<DualityInstance, HilbertError> {
    if top.is_multiple_of(2) {
        return Err(HilbertError::InfeasibleProfile(format!("top degree {top} must be odd")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = 3 * (top + 1);
    let ranks = match profile {
        DimensionProfile::Ranks(r) => {
            if r.len() != len || r[len - 1] != 0 {
                return Err(HilbertError::InfeasibleProfile(format!(
                    "need {len} ranks ending in 0, got {r:?}"
                )));
            }
            if !split_symmetric(&dims_from_ranks(r), top) {
                return Err(HilbertError::InfeasibleProfile("split tower dimensions are not symmetric under k ↦ m-k".into()));
            }
            r.clone()
        }
        DimensionProfile::Random { max_dim } => sample_ranks(&mut rng, top, *max_dim),
    };
    let (dims, maps) = exact_maps(&mut rng, &ranks);
    let les_h = LongExactSequence::new(top, dims.clone(), maps, 1e-10)?;
    let tower = |role| les_h.tower_dims(role);
    let (d_r1, d_s, d_a2) = (tower(Role::Rel), tower(Role::Split), tower(Role::Abs));

    let mut gamma_split = vec![CMatrix::zeros(0, 0); top + 1];
    for k in 0..=top / 2 {
        let g = random_unitary(&mut rng, d_s[k]);
        gamma_split[top - k] = g.adjoint();
        gamma_split[k] = g;
    }
    let gamma_rel1: Vec<CMatrix> = d_r1.iter().map(|&d| random_unitary(&mut rng, d)).collect();
    let gamma_abs2: Vec<CMatrix> = d_a2.iter().map(|&d| random_unitary(&mut rng, d)).collect();

    let at = |k: usize, role| les_h.maps()[LongExactSequence::position(k, role)].clone();
    let mut dims_p = vec![0; len];
    for j in 0..=top {
        dims_p[LongExactSequence::position(j, Role::Rel)] = d_a2[top - j];
        dims_p[LongExactSequence::position(j, Role::Split)] = d_s[j];
        dims_p[LongExactSequence::position(j, Role::Abs)] = d_r1[top - j];
    }
    let mut maps_p: Vec<CMatrix> = (0..len - 1).map(|p| CMatrix::zeros(dims_p[p + 1], dims_p[p])).collect();
    for k in 0..=top {
        let j = top - k;
        // β'_{m-k} : S^{m-k} → A1^{m-k}
        maps_p[LongExactSequence::position(j, Role::Split)] =
            (&gamma_split[k] * at(k, Role::Rel) * gamma_rel1[k].adjoint()).adjoint();
        // α'_{m-k} : R2^{m-k} → S^{m-k}
        maps_p[LongExactSequence::position(j, Role::Rel)] =
            (&gamma_abs2[k] * at(k, Role::Split) * gamma_split[k].adjoint()).adjoint();
        if k < top {
            // δ'_{m-k-1} : A1^{m-k-1} → R2^{m-k}
            maps_p[LongExactSequence::position(j - 1, Role::Abs)] =
                (&gamma_rel1[k + 1] * at(k, Role::Abs) * gamma_abs2[k].adjoint()).adjoint();
        }
    }
    let les_hprime = LongExactSequence::new(top, dims_p, maps_p, 1e-10)?;
    Ok(DualityInstance { seed, top, les_h, les_hprime, gamma_split, gamma_rel1, gamma_abs2 })
}

impl DualityInstance {
    /// `R2^k → A2^{m-k}`, inverse of `gamma_abs2` at `m - k`.
    pub fn gamma_rel2(&self, k: usize) -> CMatrix {
        self.gamma_abs2[self.top - k].adjoint()
    }

    /// `A1^k → R1^{m-k}`, inverse of `gamma_rel1` at `m - k`.
    pub fn gamma_abs1(&self, k: usize) -> CMatrix {
        self.gamma_rel1[self.top - k].adjoint()
    }

    /// Largest unitarity defect of the dualities.
    pub fn unitarity_residual(&self) -> f64 {
        self.gamma_split
            .iter()
            .chain(&self.gamma_rel1)
            .chain(&self.gamma_abs2)
            .map(|g| (g.adjoint() * g - CMatrix::identity(g.ncols(), g.ncols())).norm())
            .fold(0.0, f64::max)
    }

    /// Largest defect of the three kinds of ladder squares relating `H` to the adjoint of `H'`.
    pub fn commutation_residual(&self) -> f64 {
        let m = self.top;
        let h = |k, role| &self.les_h.maps()[LongExactSequence::position(k, role)];
        let hp = |k, role| &self.les_hprime.maps()[LongExactSequence::position(k, role)];
        let mut worst: f64 = 0.0;
        for k in 0..=m {
            let sq1 = &self.gamma_split[k] * h(k, Role::Rel) - hp(m - k, Role::Split).adjoint() * &self.gamma_rel1[k];
            let sq2 = &self.gamma_abs2[k] * h(k, Role::Split) - hp(m - k, Role::Rel).adjoint() * &self.gamma_split[k];
            worst = worst.max(sq1.norm()).max(sq2.norm());
            if k < m {
                let sq3 = &self.gamma_rel1[k + 1] * h(k, Role::Abs) - hp(m - k - 1, Role::Abs).adjoint() * &self.gamma_abs2[k];
                worst = worst.max(sq3.norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbcx::{les_torsion, les_torsion_zeta};

    #[test]
    fn zero_profile() {
        let inst = generate_duality_instance(0, 1, &DimensionProfile::Ranks(vec![0; 6])).unwrap();
        assert!(inst.les_h.is_empty() && inst.les_hprime.is_empty());
        assert_eq!(inst.commutation_residual(), 0.0);
        assert_eq!(les_torsion(&inst.les_h, 1e-10).unwrap(), 1.0);
    }

    #[test]
    fn all_lines_profile() {
        // every space C: ranks alternate 1,0 so each map is an iso or zero
        let inst = generate_duality_instance(3, 1, &DimensionProfile::Ranks(vec![1, 0, 1, 0, 1, 0])).unwrap();
        assert_eq!(inst.les_h.dims(), &[1, 1, 1, 1, 1, 1]);
        assert!(inst.commutation_residual() < 1e-12);
        let a = les_torsion(&inst.les_h, 1e-10).unwrap();
        let b = les_torsion(&inst.les_hprime, 1e-10).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn random_profiles_self_test() {
        for seed in 0..50 {
            let inst = generate_duality_instance(seed, 3, &DimensionProfile::Random { max_dim: 4 }).unwrap();
            assert!(inst.les_h.dims().iter().all(|&d| d <= 4));
            assert!(inst.commutation_residual() < 1e-10, "seed {seed}");
            assert!(inst.unitarity_residual() < 1e-12);
            let (comp, defect) = inst.les_hprime.exactness_residuals(1e-10);
            assert!(comp < 1e-10 && defect == 0);
            let t = les_torsion(&inst.les_h, 1e-10).unwrap();
            assert!((t - les_torsion_zeta(&inst.les_h, 1e-10).unwrap()).abs() < 1e-9 * t);
        }
    }

    #[test]
    fn infeasible_profiles() {
        assert!(generate_duality_instance(0, 2, &DimensionProfile::Random { max_dim: 2 }).is_err());
        assert!(generate_duality_instance(0, 1, &DimensionProfile::Ranks(vec![1; 6])).is_err());
        assert!(generate_duality_instance(0, 1, &DimensionProfile::Ranks(vec![0, 1, 0, 0, 0, 0])).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_duality_instance(11, 1, &DimensionProfile::Random { max_dim: 3 }).unwrap();
        let b = generate_duality_instance(11, 1, &DimensionProfile::Random { max_dim: 3 }).unwrap();
        assert_eq!(a.les_h, b.les_h);
        assert_eq!(a.les_hprime, b.les_hprime);
    }
}
