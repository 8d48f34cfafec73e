//! Numerical Slater witness: strictly feasible moment vectors built from the
//! uniform mixture μ̂ = ∫_A μ_a dλ_A (Gaussian variants) or a uniform noise
//! measure with centered moments (moment-box variant). Used to certify that
//! an assembled relaxation is strictly feasible.

use super::*;
use crate::family::FamilyKind;
use crate::problem::Variant;
use crate::special::{gauss_legendre_on, gaussian_lower_moments};
use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};

#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub max_equality_violation: f64,
    pub min_block_eigenvalue: f64,
}

/// Evaluate the assembled equalities and PSD blocks on a full variable
/// vector.
pub fn check_witness(relax: &MomentRelaxation, m: &[f64]) -> WitnessReport {
    let mut max_eq = 0.0f64;
    for row in &relax.equalities {
        let v: f64 = row.terms.iter().map(|&(i, c)| c * m[i]).sum();
        max_eq = max_eq.max((v - row.rhs).abs());
    }
    let mut min_eig = f64::INFINITY;
    for psd in &relax.psd {
        let offset = relax.blocks[psd.measure].offset;
        let s = psd.dim();
        let dense = psd.dense(offset, m);
        let mat = Array2::from_shape_vec((s, s), dense).unwrap();
        if let Ok((eigs, _)) = mat.eigh(UPLO::Lower) {
            min_eig = min_eig.min(eigs.iter().cloned().fold(f64::INFINITY, f64::min));
        } else {
            min_eig = f64::NEG_INFINITY;
        }
    }
    WitnessReport {
        max_equality_violation: max_eq,
        min_block_eigenvalue: min_eig,
    }
}

/// Build the Slater witness for the relaxation's variant. Supports p = 1
/// (univariate noise) with a Gaussian family, and the moment-box variant
/// with p = 1.
pub fn slater_witness(relax: &MomentRelaxation) -> Result<Vec<f64>, RelaxError> {
    match relax.variant {
        Variant::Base | Variant::Stokes | Variant::Joint => gaussian_mixture_witness(relax),
        Variant::MomentBox => moment_box_witness(relax),
    }
}

const X_NODES: usize = 48;
const A_NODES: usize = 24;

/// {ω ∈ [lo, hi] : f(x, ω) ≤ 0} as a list of intervals, by dense sampling
/// plus bisection refinement.
fn omega_intervals(
    f: &Polynomial,
    space: &VariableSpace,
    x_point: &[f64],
    lo: f64,
    hi: f64,
) -> Vec<(f64, f64)> {
    let os = space.block_start(Block::Omega);
    let mut point = vec![0.0; space.dim()];
    point[..x_point.len()].copy_from_slice(x_point);
    let eval = |w: f64, point: &mut [f64]| {
        point[os] = w;
        f.eval(point).expect("dim")
    };
    let n = 2048;
    let ws: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let vals: Vec<f64> = ws.iter().map(|&w| eval(w, &mut point)).collect();
    let mut cuts = vec![lo];
    for i in 0..n {
        if vals[i] == 0.0 || vals[i].signum() != vals[i + 1].signum() {
            let (mut a, mut b) = (ws[i], ws[i + 1]);
            let (mut fa, _fb) = (vals[i], vals[i + 1]);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = eval(m, &mut point);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa.signum() == fm.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            cuts.push(0.5 * (a + b));
        }
    }
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for pair in cuts.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        if eval(mid, &mut point) <= 0.0 {
            match out.last_mut() {
                Some((_, e)) if *e == pair[0] => *e = pair[1],
                _ => out.push((pair[0], pair[1])),
            }
        }
    }
    out
}

fn gaussian_params(kind: &FamilyKind, a: &[f64]) -> (f64, f64) {
    match kind {
        FamilyKind::GaussianUnivariate { fixed_mean: Some(c) } => (*c, a[0]),
        FamilyKind::GaussianUnivariate { fixed_mean: None } => (a[0], a[1]),
        _ => unreachable!("validated upstream"),
    }
}

fn tensor_nodes(dim: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (x, w) = gauss_legendre_on(n, -1.0, 1.0);
    let mut pts: Vec<Vec<f64>> = vec![vec![]];
    let mut wts: Vec<f64> = vec![1.0];
    for _ in 0..dim {
        let mut np = Vec::with_capacity(pts.len() * n);
        let mut nw = Vec::with_capacity(pts.len() * n);
        for (p, pw) in pts.iter().zip(&wts) {
            for (xi, wi) in x.iter().zip(&w) {
                let mut q = p.clone();
                q.push(*xi);
                np.push(q);
                // normalize to the uniform probability measure on [−1,1]^dim
                nw.push(pw * wi / 2.0);
            }
        }
        pts = np;
        wts = nw;
    }
    (pts, wts)
}

fn gaussian_interval_moments(
    intervals: &[(f64, f64)],
    mean: f64,
    sd: f64,
    kmax: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    for &(lo, hi) in intervals {
        let upper = gaussian_lower_moments(hi, mean, sd, kmax);
        let lower = gaussian_lower_moments(lo, mean, sd, kmax);
        for k in 0..=kmax {
            out[k] += upper[k] - lower[k];
        }
    }
    out
}

fn gaussian_mixture_witness(relax: &MomentRelaxation) -> Result<Vec<f64>, RelaxError> {
    let space = relax.space;
    if space.p() != 1 {
        return Err(RelaxError::Family(crate::family::FamilyError::NoSampler));
    }
    let family = relax
        .problem
        .original
        .family
        .as_ref()
        .ok_or(ProblemError::MissingFamily(relax.variant))?;
    if !matches!(family.kind, FamilyKind::GaussianUnivariate { .. }) {
        return Err(RelaxError::Family(crate::family::FamilyError::NoSampler));
    }
    let two_d = 2 * relax.half_order;
    let kmax = two_d as usize;
    let scaled = &relax.problem;
    let s_f = scaled.f_list.len();

    // exact mixture moments m̂_β = ∫_A p̃_β dλ_A via the a-box moments
    let lambda_a = lebesgue_box_moments(&vec![(-1.0, 1.0); space.t()], two_d)?;
    let a0 = space.block_start(Block::Param);
    let mix: Vec<f64> = (0..=kmax)
        .map(|k| {
            let p = &scaled.moment_polys[&vec![k as u32]];
            p.terms()
                .map(|(m, c)| {
                    let key: Vec<u8> = (0..space.t()).map(|i| m.exp(a0 + i)).collect();
                    c * lambda_a.get(&key).unwrap()
                })
                .sum()
        })
        .collect();

    // quadrature window for ω: widest Gaussian support over the a-box
    let a_bounds = scaled
        .original
        .a_bounds()
        .expect("family parameter box required for the witness");
    let corners = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
        let mut best = f64::NEG_INFINITY;
        let k = a_bounds.len();
        for mask in 0..(1usize << k) {
            let pt: Vec<f64> = (0..k)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        a_bounds[i].1
                    } else {
                        a_bounds[i].0
                    }
                })
                .collect();
            best = best.max(f(&pt));
        }
        best
    };
    let kind = family.kind.clone();
    let w_hi = corners(&|a| {
        let (m, s) = gaussian_params(&kind, a);
        m + 14.0 * s
    });
    let w_lo = -corners(&|a| {
        let (m, s) = gaussian_params(&kind, a);
        -(m - 14.0 * s)
    });

    let (x_pts, x_wts) = tensor_nodes(space.n(), X_NODES);
    let (a_pts, a_wts) = tensor_nodes(space.t(), A_NODES);

    let mut m = vec![0.0; relax.num_vars];

    // v = λ ⊗ λ_A
    if let Some(v) = relax.block(BlockLabel::V) {
        for (i, mono) in v.monomials.iter().enumerate() {
            let xk: Vec<u8> = (0..space.n()).map(|k| mono.exp(k)).collect();
            let ak: Vec<u8> = (0..space.t()).map(|k| mono.exp(a0 + k)).collect();
            m[v.offset + i] = scaled.lambda.get(&xk).unwrap() * lambda_a.get(&ak).unwrap();
        }
    }

    let y_ids: Vec<usize> = relax
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| matches!(b.label, BlockLabel::Y | BlockLabel::YJ(_)))
        .map(|(i, _)| i)
        .collect();
    let os = space.block_start(Block::Omega);

    let gmax = two_d as usize;
    // per x-node inner integrals over A: for each y-block the mixture partial
    // moments, and for z1 the ã^γ-weighted versions
    let z1_id = relax
        .blocks
        .iter()
        .position(|b| b.label == BlockLabel::Z1);
    let gammas = enumerate_monomials(&space, &[Block::Param], two_d);

    for (xp, &wx) in x_pts.iter().zip(&x_wts) {
        // intervals per constraint
        let per_f: Vec<Vec<(f64, f64)>> = scaled
            .f_list
            .iter()
            .map(|f| omega_intervals(f, &space, xp, w_lo, w_hi))
            .collect();
        let mut inner: Vec<Vec<f64>> = vec![vec![0.0; kmax + 1]; s_f];
        let mut inner_gamma: Vec<Vec<f64>> = vec![vec![0.0; kmax + 1]; gammas.len()];
        for (ap, &wa) in a_pts.iter().zip(&a_wts) {
            let a_orig = scaled.a_map.to_original(ap);
            let (mean, sd) = gaussian_params(&family.kind, &a_orig);
            for (j, ints) in per_f.iter().enumerate() {
                let part = gaussian_interval_moments(ints, mean, sd, kmax);
                for k in 0..=kmax {
                    inner[j][k] += wa * part[k] / s_f as f64;
                }
                if j == 0 {
                    if let Some(_z) = z1_id {
                        for (gi, g) in gammas.iter().enumerate() {
                            if g.degree() as usize > gmax {
                                continue;
                            }
                            let apow: f64 = (0..space.t())
                                .map(|k| ap[k].powi(g.exp(a0 + k) as i32))
                                .product();
                            for k in 0..=kmax {
                                inner_gamma[gi][k] += wa * apow * part[k];
                            }
                        }
                    }
                }
            }
        }
        for (j, &yid) in y_ids.iter().enumerate() {
            let blk = &relax.blocks[yid];
            for (i, mono) in blk.monomials.iter().enumerate() {
                let xpow: f64 = (0..space.n()).map(|k| xp[k].powi(mono.exp(k) as i32)).product();
                let beta = mono.exp(os) as usize;
                m[blk.offset + i] += wx * xpow * inner[j][beta];
            }
        }
        if let Some(z) = z1_id {
            let blk = &relax.blocks[z];
            // map γ monomial → index in `gammas`
            for (i, mono) in blk.monomials.iter().enumerate() {
                let xpow: f64 = (0..space.n()).map(|k| xp[k].powi(mono.exp(k) as i32)).product();
                let beta = mono.exp(os) as usize;
                let gi = gammas
                    .iter()
                    .position(|g| (0..space.t()).all(|k| g.exp(a0 + k) == mono.exp(a0 + k)))
                    .unwrap();
                m[blk.offset + i] += wx * xpow * inner_gamma[gi][beta];
            }
        }
    }

    // u = λ⊗μ̂ − Σ_j φ_j
    if let Some(u) = relax.block(BlockLabel::U) {
        let u_off = u.offset;
        let totals: Vec<f64> = u
            .monomials
            .iter()
            .map(|mono| {
                let xk: Vec<u8> = (0..space.n()).map(|k| mono.exp(k)).collect();
                let beta = mono.exp(os) as usize;
                scaled.lambda.get(&xk).unwrap() * mix[beta]
            })
            .collect();
        let mut ysum = vec![0.0; u.monomials.len()];
        for &yid in &y_ids {
            let blk = &relax.blocks[yid];
            for (i, _) in blk.monomials.iter().enumerate() {
                ysum[i] += m[blk.offset + i];
            }
        }
        for i in 0..u.monomials.len() {
            m[u_off + i] = totals[i] - ysum[i];
        }
    }

    // z2 = v − z1 marginal on (x, a)
    if let (Some(z2), Some(z1i)) = (relax.block(BlockLabel::Z2), z1_id) {
        let z1b = &relax.blocks[z1i];
        let v = relax.block(BlockLabel::V).unwrap();
        let pairs: Vec<(usize, f64)> = z2
            .monomials
            .iter()
            .map(|mono| {
                let z1_val = m[z1b.global(mono).unwrap()];
                let v_val = m[v.global(mono).unwrap()];
                (z2.global(mono).unwrap(), v_val - z1_val)
            })
            .collect();
        for (g, val) in pairs {
            m[g] = val;
        }
    }

    Ok(m)
}

fn uniform_interval_moments(intervals: &[(f64, f64)], lo: f64, hi: f64, kmax: usize) -> Vec<f64> {
    let width = hi - lo;
    let mut out = vec![0.0; kmax + 1];
    for &(a, b) in intervals {
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            continue;
        }
        for (k, o) in out.iter_mut().enumerate() {
            let e = k as i32 + 1;
            *o += (b.powi(e) - a.powi(e)) / (e as f64 * width);
        }
    }
    out
}

fn moment_box_witness(relax: &MomentRelaxation) -> Result<Vec<f64>, RelaxError> {
    let space = relax.space;
    let amb = relax
        .problem
        .original
        .ambiguity
        .as_ref()
        .ok_or(ProblemError::MissingAmbiguity)?;
    if space.p() != 1 {
        return Err(RelaxError::Family(crate::family::FamilyError::NoSampler));
    }
    let two_d = 2 * relax.half_order;
    let kmax = two_d as usize;
    let scaled = &relax.problem;

    let m_hat = 0.5 * (amb.mean_box[0].0 + amb.mean_box[0].1);
    let sigma_hat = 0.5 * (amb.delta.0 + amb.delta.1);
    let var = sigma_hat - m_hat * m_hat;
    assert!(var > 0.0, "ambiguity center must have positive variance");
    let c = (3.0 * var).sqrt();
    let (w_lo, w_hi) = (m_hat - c, m_hat + c);

    let lambda_a = lebesgue_box_moments(&vec![(-1.0, 1.0); space.t()], two_d)?;
    let a0 = space.block_start(Block::Param);
    let os = space.block_start(Block::Omega);
    let full_u: Vec<f64> = uniform_interval_moments(&[(w_lo, w_hi)], w_lo, w_hi, kmax);

    let mut m = vec![0.0; relax.num_vars];

    if let Some(v) = relax.block(BlockLabel::V) {
        for (i, mono) in v.monomials.iter().enumerate() {
            let xk: Vec<u8> = (0..space.n()).map(|k| mono.exp(k)).collect();
            let ak: Vec<u8> = (0..space.t()).map(|k| mono.exp(a0 + k)).collect();
            m[v.offset + i] = scaled.lambda.get(&xk).unwrap() * lambda_a.get(&ak).unwrap();
        }
    }
    if let Some(mu) = relax.block(BlockLabel::Mu) {
        for (i, mono) in mu.monomials.iter().enumerate() {
            let xk: Vec<u8> = (0..space.n()).map(|k| mono.exp(k)).collect();
            let beta = mono.exp(os) as usize;
            m[mu.offset + i] = scaled.lambda.get(&xk).unwrap() * full_u[beta];
        }
    }

    let y = relax.block(BlockLabel::Y).unwrap();
    let y_off = y.offset;
    let (x_pts, x_wts) = tensor_nodes(space.n(), X_NODES);
    let f = &scaled.f_list[0];
    let mut y_vals = vec![0.0; y.monomials.len()];
    for (xp, &wx) in x_pts.iter().zip(&x_wts) {
        let ints = omega_intervals(f, &space, xp, w_lo, w_hi);
        let part = uniform_interval_moments(&ints, w_lo, w_hi, kmax);
        for (i, mono) in y.monomials.iter().enumerate() {
            let xpow: f64 = (0..space.n()).map(|k| xp[k].powi(mono.exp(k) as i32)).product();
            let beta = mono.exp(os) as usize;
            y_vals[i] += wx * xpow * part[beta];
        }
    }
    for (i, v) in y_vals.iter().enumerate() {
        m[y_off + i] = *v;
    }

    if let Some(nu) = relax.block(BlockLabel::Nu) {
        let mu = relax.block(BlockLabel::Mu).unwrap();
        let vals: Vec<(usize, f64)> = nu
            .monomials
            .iter()
            .map(|mono| {
                let mu_val = m[mu.global(mono).unwrap()];
                let y_val = m[y.global(mono).unwrap()];
                (nu.global(mono).unwrap(), mu_val - y_val)
            })
            .collect();
        for (g, val) in vals {
            m[g] = val;
        }
    }

    Ok(m)
}
