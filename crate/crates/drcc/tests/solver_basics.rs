//! End-to-end checks of the assembled relaxations and the interior-point
//! backend on the univariate Gaussian example.

use drcc::family::{DistributionFamily, FamilyKind};
use drcc::oracle;
use drcc::poly::{Block, Polynomial, VariableSpace};
use drcc::problem::{ProblemSpec, StokesCaps, Variant};
use drcc::sets::SemialgebraicSet;
use drcc::{build_base, build_stokes, extract_inner, solve, SolverSettings};

fn example1_spec() -> ProblemSpec {
    let space = VariableSpace::new(1, 1, 2).unwrap();
    let x = Polynomial::var(space, Block::X, 0).unwrap();
    let w = Polynomial::var(space, Block::Omega, 0).unwrap();
    let f = x.sub(&w).unwrap();
    let a_set =
        SemialgebraicSet::from_box(space, Block::Param, &[(-0.1, 0.1), (0.8, 1.0)]).unwrap();
    ProblemSpec {
        space,
        x_box: vec![(-1.0, 1.0)],
        omega_box: None,
        f_list: vec![f],
        family: Some(DistributionFamily {
            kind: FamilyKind::GaussianUnivariate { fixed_mean: None },
            param_set: a_set,
        }),
        ambiguity: None,
        epsilon: 0.3,
        degree: 8,
        variant: Variant::Base,
        stokes: StokesCaps::default(),
        seed: 7,
    }
}

#[test]
fn structural_counts_example1_d2() {
    let spec = example1_spec();
    let relax = build_base(&spec, 2).unwrap();
    let v = relax.block(drcc::relax::BlockLabel::V).unwrap();
    assert_eq!(v.len(), 35); // C(3+4,4)
    let y = relax.block(drcc::relax::BlockLabel::Y).unwrap();
    assert_eq!(y.len(), 15); // C(2+4,4)
    // coupling rows: all (α,β) with α+β ≤ 4 (Gaussian deg p_β = β)
    let couplings = relax
        .equalities
        .iter()
        .filter(|r| matches!(r.kind, drcc::relax::RowKind::Coupling { .. }))
        .count();
    assert_eq!(couplings, 15);
    // block sizes match C(v+order, order) for every PSD spec
    for psd in &relax.psd {
        let vdim = relax.blocks[psd.measure].var_blocks.len(); // blocks are 1D each here
        let _ = vdim;
        let nvars: usize = relax.blocks[psd.measure]
            .var_blocks
            .iter()
            .map(|b| relax.space.block_len(*b))
            .sum();
        let expect = drcc::poly::binomial((nvars as u32 + psd.order) as u64, psd.order as u64);
        assert_eq!(psd.dim() as u64, expect);
    }
    // d below d_min errors
    assert!(build_base(&spec, 0).is_err());
}

#[test]
fn trivial_caps() {
    // f ≡ −1: K = X×Ω, ρ_d = 1; f ≡ +1: K = ∅, ρ_d = 0
    let mut spec = example1_spec();
    let space = spec.space;
    spec.f_list = vec![Polynomial::constant(space, -1.0)];
    let relax = build_base(&spec, 2).unwrap();
    let res = solve(&relax, &SolverSettings::default()).unwrap();
    assert!(
        matches!(res.status, drcc::SolveStatus::Optimal | drcc::SolveStatus::NearOptimal),
        "{res:?}"
    );
    assert!((res.rho_d - 1.0).abs() < 1e-6, "rho = {}", res.rho_d);

    spec.f_list = vec![Polynomial::constant(space, 1.0)];
    let relax = build_base(&spec, 2).unwrap();
    let res = solve(&relax, &SolverSettings::default()).unwrap();
    assert!(
        matches!(res.status, drcc::SolveStatus::Optimal | drcc::SolveStatus::NearOptimal),
        "{res:?}"
    );
    assert!(res.rho_d.abs() < 1e-6, "rho = {}", res.rho_d);
}

#[test]
fn base_weak_duality_and_underestimation() {
    let spec = example1_spec();
    let relax = build_base(&spec, 3).unwrap();
    let res = solve(&relax, &SolverSettings::default()).unwrap();
    assert!(
        matches!(res.status, drcc::SolveStatus::Optimal | drcc::SolveStatus::NearOptimal),
        "{res:?}"
    );
    assert!(res.rho_d > -1e-6 && res.rho_d < 1.0 + 1e-6);

    // ∫_X w dλ = ρ_d (strong duality, computed from the Lebesgue moments)
    let lam = drcc::lebesgue_box_moments(&spec.x_box, 2 * relax.half_order).unwrap();
    let integral: f64 = res
        .dual_w
        .terms()
        .map(|(m, c)| {
            let key: Vec<u8> = (0..spec.space.n()).map(|i| m.exp(i)).collect();
            c * lam.get(&key).unwrap()
        })
        .sum();
    assert!(
        (integral - res.rho_d).abs() < 1e-5,
        "∫w dλ = {integral}, rho = {}",
        res.rho_d
    );

    // w ≥ κ̂ on a grid (closed-form oracle)
    let inner = extract_inner(&res, 0.3).unwrap();
    let mut min_gap = f64::INFINITY;
    for i in 0..=200 {
        let x = -1.0 + 2.0 * i as f64 / 200.0;
        let kappa = oracle::kappa_closed_form(&[x], &spec).unwrap();
        min_gap = min_gap.min(inner.value(&[x]) - kappa);
    }
    assert!(min_gap >= -1e-4, "min gap {min_gap}");

    // round-trip residuals of the returned moments
    let (eq, eig) = drcc::sdp::residuals(&relax, &res);
    assert!(eq < 1e-6, "equality residual {eq}");
    assert!(eig > -1e-6, "min eig {eig}");
}

#[test]
fn hierarchy_monotone_d2_to_d4() {
    let spec = example1_spec();
    let mut prev = f64::INFINITY;
    for d in 2..=4 {
        let relax = build_base(&spec, d).unwrap();
        let res = solve(&relax, &SolverSettings::default()).unwrap();
        assert!(
            matches!(res.status, drcc::SolveStatus::Optimal | drcc::SolveStatus::NearOptimal),
            "d={d} {res:?}"
        );
        assert!(
            res.rho_d <= prev + 1e-7,
            "d={d}: rho {} > prev {prev}",
            res.rho_d
        );
        prev = res.rho_d;
    }
}

#[test]
fn stokes_dominates_base() {
    let spec = example1_spec();
    for d in [2u32, 3] {
        let base = solve(&build_base(&spec, d).unwrap(), &SolverSettings::default()).unwrap();
        let stokes = solve(
            &build_stokes(&spec, d, None, None).unwrap(),
            &SolverSettings::default(),
        )
        .unwrap();
        assert!(
            stokes.rho_d <= base.rho_d + 1e-7,
            "d={d}: stokes {} vs base {}",
            stokes.rho_d,
            base.rho_d
        );
    }
}

#[test]
fn slater_witness_base_and_stokes() {
    let spec = example1_spec();
    for relax in [
        build_base(&spec, 2).unwrap(),
        build_stokes(&spec, 2, None, None).unwrap(),
    ] {
        let m = drcc::relax::witness::slater_witness(&relax).unwrap();
        let report = drcc::relax::witness::check_witness(&relax, &m);
        assert!(
            report.max_equality_violation < 1e-6,
            "eq violation {}",
            report.max_equality_violation
        );
        assert!(
            report.min_block_eigenvalue > -1e-6,
            "min eig {}",
            report.min_block_eigenvalue
        );
    }
}
