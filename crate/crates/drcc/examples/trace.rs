// scratch probe for solver behavior on Example 1
use drcc::family::{DistributionFamily, FamilyKind};
use drcc::poly::{Block, Polynomial, VariableSpace};
use drcc::problem::{ProblemSpec, StokesCaps, Variant};
use drcc::sets::SemialgebraicSet;
use drcc::*;

fn main() {
    let space = VariableSpace::new(1, 1, 2).unwrap();
    let x = Polynomial::var(space, Block::X, 0).unwrap();
    let w = Polynomial::var(space, Block::Omega, 0).unwrap();
    let f = x.sub(&w).unwrap();
    let a_set =
        SemialgebraicSet::from_box(space, Block::Param, &[(-0.1, 0.1), (0.8, 1.0)]).unwrap();
    let spec = ProblemSpec {
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
        variant: Variant::Stokes,
        stokes: StokesCaps::default(),
        seed: 7,
    };
    let args: Vec<String> = std::env::args().collect();
    let d: u32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4);
    let variant = args.get(2).cloned().unwrap_or_else(|| "stokes".into());
    let gamma: Option<u32> = args.get(3).map(|s| s.parse().unwrap());

    let t0 = std::time::Instant::now();
    let relax = match variant.as_str() {
        "base" => build_base(&spec, d).unwrap(),
        _ => build_stokes(&spec, d, None, gamma).unwrap(),
    };
    eprintln!(
        "d={d} {variant}: vars {} rows {} psd {} (assembled {:.2}s)",
        relax.num_vars,
        relax.equalities.len(),
        relax.psd.len(),
        t0.elapsed().as_secs_f64()
    );
    let t0 = std::time::Instant::now();
    let res = solve(&relax, &SolverSettings::default()).unwrap();
    eprintln!(
        "status {:?} rho {:.9} gap {:.2e} dinf {:.2e} iters {} ({:.2}s)",
        res.status,
        res.rho_d,
        res.gap,
        res.dual_infeas,
        res.iterations,
        t0.elapsed().as_secs_f64()
    );
    let inner = extract_inner(&res, 0.3).unwrap();
    let intervals = inner.intervals_1d(2001);
    eprintln!("inner intervals at eps=0.3: {intervals:?}");
    // underestimator check
    let mut min_gap = f64::INFINITY;
    for i in 0..=200 {
        let xv = -1.0 + 2.0 * i as f64 / 200.0;
        let kappa = oracle::kappa_closed_form(&[xv], &spec).unwrap();
        min_gap = min_gap.min(inner.value(&[xv]) - kappa);
    }
    eprintln!("min (w - kappa) on grid: {min_gap:.3e}");
}
