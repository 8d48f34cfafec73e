//! Ground-truth estimation of the worst-case probability
//! κ(x) = max_{a∈A} μ_a(K_x): closed-form corner evaluation for affine
//! Gaussian instances, grid/Monte-Carlo estimation otherwise, feasible-set
//! sweeps, and comparison metrics against an inner approximation.

use crate::family::FamilyKind;
use crate::poly::{Block, Polynomial};
use crate::problem::{ProblemSpec, Variant};
use crate::sdp::InnerApproximation;
use crate::special::{normal_interval, splitmix64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("constraint polynomial is not affine in ω")]
    NonAffine,
    #[error("closed-form oracle needs a univariate Gaussian family and a box A")]
    UnsupportedFamily,
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("the oracle does not support the moment-box ambiguity")]
    MomentBoxUnsupported,
    #[error(transparent)]
    Family(#[from] crate::family::FamilyError),
    #[error(transparent)]
    Poly(#[from] crate::poly::PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    ClosedForm,
    GridMc,
}

/// κ̂ over an X grid with per-point feasibility flags (feasible ⇔ κ̂ < ε,
/// boundary ties count as infeasible).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub grid: Vec<Vec<f64>>,
    pub kappa_hat: Vec<f64>,
    pub feasible: Vec<bool>,
    pub epsilon: f64,
    pub method: OracleMethod,
    pub x_steps: usize,
    pub a_steps: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Split f(x,·) = c(x)·ω + b(x); errors unless f is affine in the single ω.
fn affine_in_omega(f: &Polynomial, x: &[f64]) -> Result<(f64, f64), OracleError> {
    let space = *f.space();
    let os = space.block_start(Block::Omega);
    let mut point = vec![0.0; space.dim()];
    point[..x.len()].copy_from_slice(x);
    for (m, _) in f.terms() {
        if m.exp(os) > 1 {
            return Err(OracleError::NonAffine);
        }
    }
    let b = f.eval(&point)?;
    point[os] = 1.0;
    let c = f.eval(&point)? - b;
    Ok((c, b))
}

fn gaussian_corners(spec: &ProblemSpec) -> Result<Vec<(f64, f64)>, OracleError> {
    let family = spec.family.as_ref().ok_or(OracleError::UnsupportedFamily)?;
    let bounds = family
        .param_set
        .box_bounds()
        .ok_or(OracleError::UnsupportedFamily)?;
    match &family.kind {
        FamilyKind::GaussianUnivariate { fixed_mean: Some(c) } => {
            Ok(vec![(*c, bounds[0].0), (*c, bounds[0].1)])
        }
        FamilyKind::GaussianUnivariate { fixed_mean: None } => {
            let (alo, ahi) = bounds[0];
            let (slo, shi) = bounds[1];
            Ok(vec![
                (alo, slo),
                (alo, shi),
                (ahi, slo),
                (ahi, shi),
            ])
        }
        _ => Err(OracleError::UnsupportedFamily),
    }
}

/// Exact κ(x) for a single constraint affine in ω under a univariate
/// Gaussian family on a box A: K_x is a half-line and the Φ-expression is
/// monotone in (a, σ) on each side, so the max over A is attained at a
/// corner.
pub fn kappa_closed_form(x: &[f64], spec: &ProblemSpec) -> Result<f64, OracleError> {
    if spec.f_list.len() != 1 {
        return Err(OracleError::NonAffine);
    }
    let (c, b) = affine_in_omega(&spec.f_list[0], x)?;
    if c.abs() < 1e-300 {
        return Ok(if b <= 0.0 { 1.0 } else { 0.0 });
    }
    let t = -b / c;
    let corners = gaussian_corners(spec)?;
    let mut best = 0.0f64;
    for (mean, sd) in corners {
        let mass = if c > 0.0 {
            normal_interval(mean, sd, f64::NEG_INFINITY, t)
        } else {
            normal_interval(mean, sd, t, f64::INFINITY)
        };
        best = best.max(mass);
    }
    Ok(best)
}

/// Exact μ_a(K_x) for a union of half-lines (each f_j affine in ω) at one
/// Gaussian parameter.
fn union_mass_at(
    f_list: &[Polynomial],
    x: &[f64],
    mean: f64,
    sd: f64,
) -> Result<f64, OracleError> {
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for f in f_list {
        let (c, b) = affine_in_omega(f, x)?;
        if c.abs() < 1e-300 {
            if b <= 0.0 {
                return Ok(1.0);
            }
            continue;
        }
        let t = -b / c;
        if c > 0.0 {
            intervals.push((f64::NEG_INFINITY, t));
        } else {
            intervals.push((t, f64::INFINITY));
        }
    }
    if intervals.is_empty() {
        return Ok(0.0);
    }
    intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    Ok(merged
        .iter()
        .map(|&(lo, hi)| normal_interval(mean, sd, lo, hi))
        .sum())
}

fn a_grid(bounds: &[(f64, f64)], steps: usize) -> Vec<Vec<f64>> {
    let steps = steps.max(1);
    let mut pts: Vec<Vec<f64>> = vec![vec![]];
    for &(lo, hi) in bounds {
        let mut next = Vec::with_capacity(pts.len() * steps);
        for p in &pts {
            for i in 0..steps {
                let v = if steps == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (steps - 1) as f64
                };
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Closed-form-per-parameter κ̂(x) for joint constraints: exact union mass at
/// every point of an A grid, maximized over the grid (an under-estimate of
/// the continuous max, so certificates stay on the safe side).
pub fn kappa_union_closed_form(
    x: &[f64],
    spec: &ProblemSpec,
    a_steps: usize,
) -> Result<f64, OracleError> {
    let family = spec.family.as_ref().ok_or(OracleError::UnsupportedFamily)?;
    let bounds = family
        .param_set
        .box_bounds()
        .ok_or(OracleError::UnsupportedFamily)?
        .to_vec();
    if !matches!(family.kind, FamilyKind::GaussianUnivariate { .. }) {
        return Err(OracleError::UnsupportedFamily);
    }
    let mut best = 0.0f64;
    for a in a_grid(&bounds, a_steps) {
        let (mean, sd) = match &family.kind {
            FamilyKind::GaussianUnivariate { fixed_mean: Some(c) } => (*c, a[0]),
            _ => (a[0], a[1]),
        };
        best = best.max(union_mass_at(&spec.f_list, x, mean, sd)?);
    }
    Ok(best)
}

/// Monte-Carlo κ̂(x): max over an A grid of the empirical fraction of draws
/// with f_j(x, ω) ≤ 0 for some j.
pub fn kappa_grid_mc(
    x: &[f64],
    spec: &ProblemSpec,
    a_steps: usize,
    samples: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    if samples == 0 {
        return Err(OracleError::ZeroSamples);
    }
    let family = spec.family.as_ref().ok_or(OracleError::UnsupportedFamily)?;
    let bounds = family
        .param_set
        .box_bounds()
        .ok_or(OracleError::UnsupportedFamily)?
        .to_vec();
    let space = spec.space;
    let os = space.block_start(Block::Omega);
    let mut point = vec![0.0; space.dim()];
    point[..x.len()].copy_from_slice(x);
    let mut best = 0.0f64;
    for (ai, a) in a_grid(&bounds, a_steps).iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed, ai as u64));
        let mut hits = 0usize;
        for _ in 0..samples {
            let w = family.draw(a, &mut rng)?;
            point[os..os + space.p()].copy_from_slice(&w);
            let in_k = spec
                .f_list
                .iter()
                .any(|f| f.eval(&point).expect("dim") <= 0.0);
            if in_k {
                hits += 1;
            }
        }
        best = best.max(hits as f64 / samples as f64);
    }
    Ok(best)
}

fn x_grid(bounds: &[(f64, f64)], steps: usize) -> Vec<Vec<f64>> {
    a_grid(bounds, steps)
}

/// Per-grid-point worst-case probabilities and feasibility flags. Uses the
/// closed form whenever the family is univariate Gaussian and every f is
/// affine in ω; falls back to grid Monte Carlo otherwise.
pub fn feasible_set_oracle(
    spec: &ProblemSpec,
    epsilon: f64,
    x_steps: usize,
    a_steps: usize,
    samples: usize,
    seed: u64,
) -> Result<OracleEstimate, OracleError> {
    if spec.variant == Variant::MomentBox {
        return Err(OracleError::MomentBoxUnsupported);
    }
    let grid = x_grid(&spec.x_box, x_steps);
    let closed_form = spec.family.as_ref().is_some_and(|fam| {
        matches!(fam.kind, FamilyKind::GaussianUnivariate { .. })
            && fam.param_set.box_bounds().is_some()
            && spec.f_list.iter().all(|f| {
                let os = spec.space.block_start(Block::Omega);
                spec.space.p() == 1 && f.terms().all(|(m, _)| m.exp(os) <= 1)
            })
    });
    let kappa_hat: Result<Vec<f64>, OracleError> = grid
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            if closed_form {
                if spec.f_list.len() == 1 {
                    kappa_closed_form(x, spec)
                } else {
                    kappa_union_closed_form(x, spec, a_steps)
                }
            } else {
                kappa_grid_mc(x, spec, a_steps, samples, splitmix64(seed, i as u64))
            }
        })
        .collect();
    let kappa_hat = kappa_hat?;
    let feasible = kappa_hat.iter().map(|&k| k < epsilon).collect();
    Ok(OracleEstimate {
        grid,
        kappa_hat,
        feasible,
        epsilon,
        method: if closed_form {
            OracleMethod::ClosedForm
        } else {
            OracleMethod::GridMc
        },
        x_steps,
        a_steps,
        samples,
        seed,
    })
}

/// Coverage and violation counts of an inner approximation against the
/// oracle's feasible set, on the oracle's grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// |{x : member ∧ feasible}| / |{x : feasible}|.
    pub coverage_ratio: f64,
    /// Inner-member points the oracle deems infeasible.
    pub violations: usize,
    pub feasible_points: usize,
    pub member_points: usize,
    pub grid_points: usize,
    pub oracle_seconds: f64,
    pub compare_seconds: f64,
}

pub fn compare(inner: &InnerApproximation, oracle: &OracleEstimate) -> ComparisonReport {
    let t0 = std::time::Instant::now();
    let mut feasible_points = 0usize;
    let mut member_points = 0usize;
    let mut both = 0usize;
    let mut violations = 0usize;
    for (x, &feas) in oracle.grid.iter().zip(&oracle.feasible) {
        let member = inner.contains(x);
        if feas {
            feasible_points += 1;
        }
        if member {
            member_points += 1;
            if feas {
                both += 1;
            } else {
                violations += 1;
            }
        }
    }
    let coverage_ratio = if feasible_points == 0 {
        0.0
    } else {
        both as f64 / feasible_points as f64
    };
    ComparisonReport {
        coverage_ratio,
        violations,
        feasible_points,
        member_points,
        grid_points: oracle.grid.len(),
        oracle_seconds: 0.0,
        compare_seconds: t0.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::DistributionFamily;
    use crate::poly::VariableSpace;
    use crate::problem::StokesCaps;
    use crate::sets::SemialgebraicSet;

    pub(crate) fn example1_spec() -> ProblemSpec {
        let space = VariableSpace::new(1, 1, 2).unwrap();
        let x = Polynomial::var(space, Block::X, 0).unwrap();
        let w = Polynomial::var(space, Block::Omega, 0).unwrap();
        let f = x.sub(&w).unwrap();
        let a_set = SemialgebraicSet::from_box(space, Block::Param, &[(-0.1, 0.1), (0.8, 1.0)])
            .unwrap();
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
            variant: Variant::Stokes,
            stokes: StokesCaps::default(),
            seed: 7,
        }
    }

    #[test]
    fn closed_form_examples() {
        let spec = example1_spec();
        // worst-case safe probability at the true boundary is 0.70
        let kappa = kappa_closed_form(&[0.6244005127], &spec).unwrap();
        assert!((1.0 - kappa - 0.70).abs() < 1e-3, "kappa={kappa}");
        // x = 1: worst-case safe prob = Φ(0.9)
        let kappa = kappa_closed_form(&[1.0], &spec).unwrap();
        assert!((1.0 - kappa - 0.8159398746532405).abs() < 1e-3);
        // c(x) = 0, b = −1 ⇒ K_x = Ω
        let space = spec.space;
        let mut flat = spec.clone();
        flat.f_list = vec![Polynomial::constant(space, -1.0)];
        assert_eq!(kappa_closed_form(&[0.0], &flat).unwrap(), 1.0);
        // non-affine rejected
        let x = Polynomial::var(space, Block::X, 0).unwrap();
        let w = Polynomial::var(space, Block::Omega, 0).unwrap();
        let mut sq = spec.clone();
        sq.f_list = vec![w.mul(&w).unwrap().sub(&x).unwrap()];
        assert!(matches!(
            kappa_closed_form(&[0.0], &sq),
            Err(OracleError::NonAffine)
        ));
    }

    #[test]
    fn grid_mc_matches_closed_form() {
        let spec = example1_spec();
        let x = [0.9];
        let exact = kappa_closed_form(&x, &spec).unwrap();
        for (samples, tol) in [(1_000usize, 0.05), (10_000, 0.02)] {
            let est = kappa_grid_mc(&x, &spec, 21, samples, 42).unwrap();
            assert!(
                (est - exact).abs() <= 3.0 / (samples as f64).sqrt() + tol,
                "samples={samples} est={est} exact={exact}"
            );
        }
        // f ≡ −1 gives exactly 1.0
        let mut flat = spec.clone();
        flat.f_list = vec![Polynomial::constant(spec.space, -1.0)];
        assert_eq!(kappa_grid_mc(&[0.0], &flat, 3, 100, 1).unwrap(), 1.0);
        assert!(matches!(
            kappa_grid_mc(&[0.0], &spec, 3, 0, 1),
            Err(OracleError::ZeroSamples)
        ));
    }

    #[test]
    fn single_a_matches_tail_probability() {
        // A collapsed to one parameter: MC vs closed-form CDF
        let mut spec = example1_spec();
        let space = spec.space;
        let a_set =
            SemialgebraicSet::from_box(space, Block::Param, &[(-1e-9, 1e-9), (0.9, 0.9 + 1e-9)])
                .unwrap();
        spec.family = Some(DistributionFamily {
            kind: FamilyKind::GaussianUnivariate { fixed_mean: None },
            param_set: a_set,
        });
        let x = [0.5];
        let est = kappa_grid_mc(&x, &spec, 1, 1_000_000, 9).unwrap();
        let fam = spec.family.as_ref().unwrap();
        // K_x = {ω ≥ x}
        let exact = 1.0 - fam.tail_probability(&[0.0, 0.9], f64::NEG_INFINITY, 0.5).unwrap();
        assert!((est - exact).abs() < 0.005, "est={est} exact={exact}");
    }

    #[test]
    fn oracle_interval_and_nesting() {
        let spec = example1_spec();
        let est = feasible_set_oracle(&spec, 0.3, 2001, 1, 1, 7).unwrap();
        assert_eq!(est.method, OracleMethod::ClosedForm);
        // feasible set is [ℓ*, 1] with ℓ* = 0.6244 ± grid
        let first = est
            .grid
            .iter()
            .zip(&est.feasible)
            .find(|(_, &f)| f)
            .map(|(x, _)| x[0])
            .unwrap();
        assert!((first - 0.6244).abs() < 2e-3, "ℓ* = {first}");
        assert!(*est.feasible.last().unwrap());
        // nesting in ε on the shared grid
        let tight = feasible_set_oracle(&spec, 0.2, 2001, 1, 1, 7).unwrap();
        for (a, b) in tight.feasible.iter().zip(&est.feasible) {
            assert!(!a || *b);
        }
        // determinism
        let again = feasible_set_oracle(&spec, 0.3, 2001, 1, 1, 7).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn epsilon_near_one_accepts_everything() {
        let spec = example1_spec();
        let est = feasible_set_oracle(&spec, 0.999999, 101, 1, 1, 7).unwrap();
        assert!(est.feasible.iter().all(|&f| f));
    }
}
