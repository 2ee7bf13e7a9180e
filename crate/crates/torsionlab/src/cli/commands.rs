use super::{CliError, Command, JobContext, Outcome};
use crate::detline::{adapted_element, phi_action, splitting_report};
use crate::gauge::{solve_temporal_gauge, transform_connection, verify_temporal, FlatnessCertificate};
use crate::gluelab::{unit_norm_inputs, verify_anticipation_isometries, verify_circle_cheeger_mueller, verify_comb_gluing_norms, verify_lesch};
use crate::hilbcx::{
    assemble_ses, build_twisted_complex, generate_duality_instance, les_torsion, les_torsion_zeta, long_exact_sequence, nu_sign,
    DimensionProfile, DualityInstance, LiftRegistry, LongExactSequence, Role,
};
use crate::numlin::{Basis, CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const SKEW_TOL: f64 = 1e-9;

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub struct TorsionCmd;

impl Command for TorsionCmd {
    fn name(&self) -> &'static str {
        "torsion"
    }
    fn about(&self) -> &'static str {
        "torsion of a Hilbert complex or a twisted simplicial complex"
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let doc = ctx.document()?;
        let cx = match &doc.hilbert_complex {
            Some(h) => h.to_complex(ctx.rank_tol)?,
            None => {
                let k = doc.complex()?;
                build_twisted_complex(&k, &doc.local_system(&k)?, ctx.rank_tol)?
            }
        };
        let torsion = cx.torsion(ctx.rank_tol);
        let cohomology = (0..=cx.top())
            .map(|k| cx.harmonic_cohomology(k, ctx.rank_tol).map(|s| s.dim()))
            .collect::<Result<Vec<_>, _>>()?;
        let chi_h: i64 = cohomology.iter().enumerate().map(|(k, &d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum();
        let mut out = Outcome::default();
        out.quantity("torsion", torsion);
        out.quantity("dims", cx.dims());
        out.quantity("cohomology_dims", &cohomology);
        out.quantity("euler_characteristic", cx.euler_characteristic());
        out.residual("euler_poincare", (cx.euler_characteristic() - chi_h).abs() as f64, ctx.tol);
        out.say(format!("{torsion:?}"));
        Ok(out)
    }
}

pub struct GlueCheck;

impl Command for GlueCheck {
    fn name(&self) -> &'static str {
        "glue-check"
    }
    fn about(&self) -> &'static str {
        "gluing identities, anticipation isometries and norm gluing on a split complex"
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let (split, sys) = ctx.document()?.split()?;
        let lesch = verify_lesch(&split, &sys, ctx.rank_tol)?;
        let antic = verify_anticipation_isometries(&split, &sys, ctx.rank_tol)?;
        let norms = verify_comb_gluing_norms(&split, &sys, &unit_norm_inputs(&split, &sys, ctx.rank_tol)?, ctx.rank_tol)?;

        let t = &lesch.torsions;
        let mut out = Outcome::default();
        out.quantity("tau_split", t.split);
        out.quantity("tau_rel1", t.rel1);
        out.quantity("tau_abs2", t.abs2);
        out.quantity("tau_rel2", t.rel2);
        out.quantity("tau_abs1", t.abs1);
        out.quantity("tau_h", t.les_h);
        out.quantity("tau_hprime", t.les_hprime);
        out.quantity("euler_chi_n", lesch.euler_chi_n);
        out.quantity("anomaly", lesch.anomaly);
        out.quantity("nu", lesch.nu);
        out.quantity("nu_prime", lesch.nu_prime);
        if let Some(signs) = &lesch.signs {
            out.quantity("sign_ledger", signs);
        }
        out.quantity("tau_interface", antic.tau_interface);
        out.quantity("complement_defect", antic.complement_defect);
        out.quantity("placement", norms.placement);
        out.quantity("norm_lhs", norms.lhs);
        out.quantity("norm_rhs", norms.rhs);
        out.quantity("norm_opposite_residual", norms.opposite_residual);

        out.residual("lesch", lesch.residuals.lesch, ctx.tol);
        out.residual("lesch_prime", lesch.residuals.lesch_prime, ctx.tol);
        out.residual("mirror", lesch.residuals.mirror, ctx.tol);
        out.residual("anticipation_beta_theta", antic.beta_theta, ctx.tol);
        out.residual("anticipation_theta_isometry", antic.theta_isometry, ctx.tol);
        out.residual("anticipation_orthogonality", antic.orthogonality, ctx.tol);
        out.residual("anticipation_multiplicativity", antic.multiplicativity, ctx.tol);
        out.residual("norm_gluing", norms.residual, ctx.tol);
        out.residual("norm_gluing_prime", norms.residual_prime, ctx.tol);
        if antic.complement_defect != 0 {
            out.failures.push(format!("interface complement has rank defect {}", antic.complement_defect));
        }

        out.say(format!("tau_split {:?}", t.split));
        out.say(format!("chi(N) {}  anomaly {:?}", lesch.euler_chi_n, lesch.anomaly));
        out.say(format!("lesch residual {:.3e}  primed {:.3e}", lesch.residuals.lesch, lesch.residuals.lesch_prime));
        out.say(format!("placement {}", serde_json::to_string(&norms.placement).unwrap_or_default()));
        Ok(out)
    }
}

pub struct LesCmd;

impl Command for LesCmd {
    fn name(&self) -> &'static str {
        "les"
    }
    fn about(&self) -> &'static str {
        "harmonic long exact sequences H and H' of a split complex and their torsion"
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let (split, sys) = ctx.document()?.split()?;
        let lifts = LiftRegistry::builtin();
        let lift_name = ctx.params().lift.unwrap_or_else(|| "min-norm".to_string());
        let lift = lifts.get(&lift_name)?;
        let (ses_h, ses_hp) = assemble_ses(&split, &sys, ctx.rank_tol)?;
        let mut out = Outcome::default();
        out.quantity("lift", &lift_name);
        for (label, ses) in [("h", &ses_h), ("hprime", &ses_hp)] {
            let r = ses.residuals(ctx.rank_tol);
            out.residual(format!("{label}_ses_chain_map"), r.chain_map, ctx.tol);
            out.residual(format!("{label}_ses_composition"), r.composition, ctx.tol);
            out.residual(format!("{label}_ses_alpha_isometry"), r.alpha_isometry, ctx.tol);
            if r.rank_defect != 0 {
                out.failures.push(format!("{label}: short sequence not exact (rank defect {})", r.rank_defect));
            }
            let les = long_exact_sequence(ses, lift, ctx.rank_tol)?.les;
            let (composition, defect) = les.exactness_residuals(ctx.rank_tol);
            if defect != 0 {
                out.failures.push(format!("{label}: long sequence not exact (rank defect {defect})"));
            }
            let tau = les_torsion(&les, ctx.rank_tol)?;
            let tau_zeta = les_torsion_zeta(&les, ctx.rank_tol)?;
            out.quantity(format!("{label}_dims"), les.dims());
            out.quantity(format!("{label}_ranks"), les.ranks(ctx.rank_tol));
            out.quantity(format!("tau_{label}"), tau);
            out.quantity(format!("tau_{label}_zeta"), tau_zeta);
            out.quantity(format!("nu_{label}"), nu_sign(&les, ctx.rank_tol));
            out.residual(format!("{label}_exactness"), composition, ctx.tol);
            out.residual(format!("{label}_product_vs_zeta"), relative_gap(tau, tau_zeta), ctx.tol);
            out.say(format!("tau({label}) {tau:?}  dims {:?}", les.dims()));
        }
        Ok(out)
    }
}

struct SynthParams {
    instances: usize,
    tops: Vec<usize>,
    max_dim: usize,
}

fn synth_params(ctx: &JobContext) -> Result<SynthParams, CliError> {
    let p = ctx.params();
    let tops = p.tops.unwrap_or_else(|| vec![1, 3]);
    if tops.is_empty() || tops.iter().any(|t| t % 2 == 0) {
        return Err(CliError::Malformed("tops must be a non-empty list of odd degrees".into()));
    }
    Ok(SynthParams { instances: p.instances.unwrap_or(100), tops, max_dim: p.max_dim.unwrap_or(4) })
}

fn synth_instances(ctx: &JobContext, sp: &SynthParams) -> Result<Vec<DualityInstance>, CliError> {
    (0..sp.instances)
        .into_par_iter()
        .map(|i| {
            let seed = ctx.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let top = sp.tops[i % sp.tops.len()];
            Ok(generate_duality_instance(seed, top, &DimensionProfile::Random { max_dim: sp.max_dim })?)
        })
        .collect()
}

fn random_bases(rng: &mut impl Rng, dims: &[usize]) -> Vec<Basis> {
    dims.iter()
        .map(|&n| Basis::from_matrix(CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))))
        .collect()
}

pub struct RefinedSplit;

impl Command for RefinedSplit {
    fn name(&self) -> &'static str {
        "refined-split"
    }
    fn about(&self) -> &'static str {
        "splitting of refined torsion elements on synthetic duality instances"
    }
    fn default_tol(&self) -> f64 {
        1e-7
    }
    fn needs_input(&self) -> bool {
        false
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let sp = synth_params(ctx)?;
        let instances = synth_instances(ctx, &sp)?;
        let reports = instances
            .par_iter()
            .map(|inst| {
                let mut rng = ChaCha8Rng::seed_from_u64(inst.seed ^ 0x5eed);
                let e_rel1 = random_bases(&mut rng, &inst.les_h.tower_dims(Role::Rel));
                let e_rel2 = random_bases(&mut rng, &inst.les_hprime.tower_dims(Role::Rel));
                let e_split = random_bases(&mut rng, &inst.les_h.tower_dims(Role::Split));
                let r = splitting_report(inst, &e_rel1, &e_rel2, &e_split, ctx.rank_tol)?;
                Ok((inst.seed, inst.les_h.ranks(ctx.rank_tol), inst.les_hprime.ranks(ctx.rank_tol), r))
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        let magnitude = reports.iter().map(|r| r.3.magnitude_residual).fold(0.0, f64::max);
        let phase = reports.iter().map(|r| r.3.phase_residual).fold(0.0, f64::max);
        let mismatched: Vec<u64> = reports.iter().filter(|r| !r.3.sign_matches()).map(|r| r.0).collect();
        // The sign gap should be a function of the rank profile alone.
        let mut gap_by_profile: BTreeMap<(Vec<usize>, Vec<usize>), i64> = BTreeMap::new();
        let mut profile_conflicts = 0usize;
        for (_, rh, rhp, r) in &reports {
            let gap = (r.observed_sign + r.ledger.splitting_sign) % 2;
            match gap_by_profile.insert((rh.clone(), rhp.clone()), gap) {
                Some(prev) if prev != gap => profile_conflicts += 1,
                _ => {}
            }
        }

        let mut out = Outcome::default();
        out.quantity("instances", reports.len());
        out.quantity("sign_matches", reports.len() - mismatched.len());
        out.quantity("sign_mismatches", mismatched.len());
        out.quantity("sign_mismatch_seeds", &mismatched);
        out.quantity("rank_profiles", gap_by_profile.len());
        out.quantity("sign_gap_profile_conflicts", profile_conflicts);
        out.residual("magnitude_vs_tau_squared", magnitude, ctx.tol);
        out.residual("ratio_phase", phase, ctx.tol);
        out.say(format!("instances {}  max |ratio|/tau^2 residual {magnitude:.3e}", reports.len()));
        out.say(format!("sign agrees with the closed-form exponent on {} of {}", reports.len() - mismatched.len(), reports.len()));
        Ok(out)
    }
}

pub struct SynthSuite;

fn phi_residual(les: &LongExactSequence, tol: f64) -> Result<(f64, f64), CliError> {
    let x = adapted_element(les, Role::Rel, tol)?;
    let y = adapted_element(les, Role::Abs, tol)?;
    let z = adapted_element(les, Role::Split, tol)?;
    let phi = phi_action(les, &x, &y, &z, tol)?;
    let tau = les_torsion(les, tol)?;
    let signed = if nu_sign(les, tol) % 2 == 0 { tau } else { -tau };
    Ok((tau, (phi - C64::new(signed, 0.0)).norm() / tau))
}

impl Command for SynthSuite {
    fn name(&self) -> &'static str {
        "synth-suite"
    }
    fn about(&self) -> &'static str {
        "duality, torsion equality and the canonical isomorphism on synthetic instances"
    }
    fn default_tol(&self) -> f64 {
        1e-8
    }
    fn needs_input(&self) -> bool {
        false
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let sp = synth_params(ctx)?;
        let instances = synth_instances(ctx, &sp)?;
        let rows = instances
            .par_iter()
            .map(|inst| {
                let (tau_h, phi_h) = phi_residual(&inst.les_h, ctx.rank_tol)?;
                let (tau_hp, phi_hp) = phi_residual(&inst.les_hprime, ctx.rank_tol)?;
                let exact_h = inst.les_h.exactness_residuals(ctx.rank_tol);
                let exact_hp = inst.les_hprime.exactness_residuals(ctx.rank_tol);
                Ok([
                    relative_gap(tau_h, tau_hp),
                    phi_h.max(phi_hp),
                    inst.commutation_residual(),
                    inst.unitarity_residual(),
                    exact_h.0.max(exact_hp.0),
                    (exact_h.1 + exact_hp.1) as f64,
                ])
            })
            .collect::<Result<Vec<[f64; 6]>, CliError>>()?;
        let worst = |i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
        let mut out = Outcome::default();
        out.quantity("instances", rows.len());
        out.quantity("tops", &sp.tops);
        out.quantity("max_dim", sp.max_dim);
        out.residual("tau_h_equals_tau_hprime", worst(0), ctx.tol);
        out.residual("phi_is_signed_torsion", worst(1), ctx.tol);
        out.residual("ladder_commutation", worst(2), ctx.tol);
        out.residual("duality_unitarity", worst(3), ctx.tol);
        out.residual("exactness", worst(4), ctx.tol);
        if worst(5) > 0.0 {
            out.failures.push("a generated sequence is not exact".into());
        }
        out.say(format!("instances {}  max tau(H)/tau(H') gap {:.3e}", rows.len(), worst(0)));
        Ok(out)
    }
}

pub struct GaugeCmd;

impl Command for GaugeCmd {
    fn name(&self) -> &'static str {
        "gauge"
    }
    fn about(&self) -> &'static str {
        "temporal gauge transform of a sampled collar connection"
    }
    fn default_tol(&self) -> f64 {
        1e-6
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let doc = ctx.document()?;
        let collar = doc.collar.as_ref().ok_or_else(|| CliError::Malformed("missing \"collar\"".into()))?;
        let conn = collar.to_connection(SKEW_TOL)?;
        let params = doc.params();
        let cert = FlatnessCertificate::sample(&conn, params.curvature_tol.unwrap_or(1e-4));
        let g = solve_temporal_gauge(&conn)?;
        let conn_g = transform_connection(&conn, &g)?;
        let report = verify_temporal(&conn_g, &cert, params.temporal_scale.unwrap_or(1.0))?;
        let mut out = Outcome::default();
        out.quantity("h", report.h);
        out.quantity("input_max_normal", conn.max_normal());
        out.quantity("input_max_curvature", cert.max_curvature);
        out.quantity("unitarity_drift", g.drift);
        out.quantity("threshold", report.threshold);
        out.residual("unitarity_drift", g.drift, ctx.tol);
        out.residual("temporal_normal", report.max_normal, report.threshold);
        out.residual("temporal_x_variation", report.max_x_variation, report.threshold);
        out.say(format!("max |w0| {:.3e}  max x-variation {:.3e}  threshold {:.3e}", report.max_normal, report.max_x_variation, report.threshold));
        Ok(out)
    }
}

pub struct CircleCm;

impl Command for CircleCm {
    fn name(&self) -> &'static str {
        "circle-cm"
    }
    fn about(&self) -> &'static str {
        "twisted circle torsion against 2|sin(theta/2)| across subdivisions"
    }
    fn default_tol(&self) -> f64 {
        1e-10
    }
    fn needs_input(&self) -> bool {
        false
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError> {
        let p = ctx.params();
        let thetas = p.thetas.unwrap_or_else(|| vec![PI, PI / 2.0, PI / 3.0, 2.0 * PI / 3.0]);
        let ns = p.subdivisions.unwrap_or_else(|| vec![3, 7, 20]);
        if ns.iter().any(|&n| n < 3) {
            return Err(CliError::Malformed("a circle needs at least 3 edges".into()));
        }
        let mut out = Outcome::default();
        out.quantity("subdivisions", &ns);
        let mut reports = Vec::new();
        for &theta in &thetas {
            let r = verify_circle_cheeger_mueller(theta, &ns, ctx.rank_tol)?;
            let key = format!("theta={theta:.6}");
            out.residual(format!("oracle[{key}]"), r.residual, ctx.tol);
            out.residual(format!("spread[{key}]"), r.spread, ctx.tol);
            out.say(format!("{key}  oracle {:?}  residual {:.3e}", r.oracle, r.residual));
            reports.push(r);
        }
        out.quantity("circles", &reports);
        Ok(out)
    }
}
