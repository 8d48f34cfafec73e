//! The four relaxation recipes. `build_base` and `build_union` are
//! independent transcriptions of the single-constraint and union displays;
//! structural equality of the two on one f is checked in the acceptance
//! suite.

use super::*;
use crate::family::FamilyKind;
use crate::poly::stokes_polynomial_gaussian;

fn x_exps(space: &VariableSpace, m: &Monomial) -> Vec<u8> {
    (0..space.n()).map(|i| m.exp(i)).collect()
}

fn omega_exps(space: &VariableSpace, m: &Monomial) -> Vec<u8> {
    let s = space.block_start(Block::Omega);
    (0..space.p()).map(|i| m.exp(s + i)).collect()
}

fn param_exps(space: &VariableSpace, m: &Monomial) -> Vec<u8> {
    let s = space.block_start(Block::Param);
    (0..space.t()).map(|i| m.exp(s + i)).collect()
}

fn check_order(scaled: &ScaledProblem, d: u32) -> Result<(), RelaxError> {
    let d_min = minimum_half_order(scaled);
    if d < d_min {
        return Err(RelaxError::BelowMinimumOrder { d, d_min });
    }
    Ok(())
}

/// Coupling rows L_{Σy+u}(x^α ω^β) = L_v(x^α p_β(a)) under both degree
/// filters, then the marginal pins L_v(x^α) = λ_α.
fn coupling_and_pins(
    asm: &mut Assembler,
    scaled: &ScaledProblem,
    y_ids: &[usize],
    u_id: usize,
    v_id: usize,
) -> Result<(), RelaxError> {
    let space = asm.space;
    let two_d = asm.two_d;
    let alphas = enumerate_monomials(&space, &[Block::X], two_d);
    let betas = enumerate_monomials(&space, &[Block::Omega], two_d);
    for alpha in &alphas {
        let da = alpha.degree();
        for beta in &betas {
            if da + beta.degree() > two_d {
                continue;
            }
            let bkey: Vec<u32> = omega_exps(&space, beta).iter().map(|&e| e as u32).collect();
            let p = scaled
                .moment_polys
                .get(&bkey)
                .ok_or_else(|| RelaxError::CoverageGap(bkey.clone()))?;
            if da + p.degree() > two_d {
                continue;
            }
            let mono_yu = alpha.mul(beta);
            let mut terms: Vec<(usize, Monomial, f64)> = Vec::new();
            for &y in y_ids {
                terms.push((y, mono_yu.clone(), 1.0));
            }
            terms.push((u_id, mono_yu.clone(), 1.0));
            for (m, c) in p.terms() {
                terms.push((v_id, alpha.mul(m), -c));
            }
            asm.add_row(
                RowKind::Coupling {
                    alpha: x_exps(&space, alpha),
                    beta: omega_exps(&space, beta),
                },
                &terms,
                0.0,
            );
        }
    }
    for alpha in &alphas {
        let key = x_exps(&space, alpha);
        let lam = scaled.lambda.get(&key).expect("lambda computed to 2d");
        asm.add_row(
            RowKind::LambdaPin {
                alpha: key,
                measure: BlockLabel::V,
            },
            &[(v_id, alpha.clone(), 1.0)],
            lam,
        );
    }
    Ok(())
}

/// The base relaxation: blocks y (on K), u (on X×Ω), v (on X×A), coupling
/// and marginal rows, and the localizer pattern of the single-constraint
/// display.
pub fn build_base(spec: &ProblemSpec, d: u32) -> Result<MomentRelaxation, RelaxError> {
    if spec.f_list.len() != 1 {
        return Err(RelaxError::NotSingleConstraint(spec.f_list.len()));
    }
    let scaled = scale_problem(spec, 2 * d)?;
    check_order(&scaled, d)?;
    let space = scaled.space;
    let mut asm = Assembler::new(space, 2 * d);
    let y = asm.add_block(BlockLabel::Y, vec![Block::X, Block::Omega]);
    let u = asm.add_block(BlockLabel::U, vec![Block::X, Block::Omega]);
    let v = asm.add_block(BlockLabel::V, vec![Block::X, Block::Param]);

    coupling_and_pins(&mut asm, &scaled, &[y], u, v)?;

    let minus_f = scaled.f_list[0].scale(-1.0);
    asm.add_measure_psd(y, d, &[minus_f], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(u, d, &[], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(v, d, &[], &[&scaled.x_set, &scaled.a_set]);

    let origin = asm.blocks[y].global(&Monomial::one(&space)).unwrap();
    let objective = vec![(origin, 1.0)];
    Ok(asm.finish(d, Variant::Base, objective, scaled))
}

/// The Stokes-augmented relaxation: base plus z¹ on K×A and z² on X×A with
/// the marginal ties and the Stokes rows L_{z¹}(x^α a^γ q_β) = 0.
pub fn build_stokes(
    spec: &ProblemSpec,
    d: u32,
    beta_max: Option<i64>,
    gamma_max: Option<u32>,
) -> Result<MomentRelaxation, RelaxError> {
    if spec.f_list.len() != 1 {
        return Err(RelaxError::NotSingleConstraint(spec.f_list.len()));
    }
    let family = spec
        .family
        .as_ref()
        .ok_or(ProblemError::MissingFamily(Variant::Stokes))?;
    let fixed_mean = match &family.kind {
        FamilyKind::GaussianUnivariate { fixed_mean } => *fixed_mean,
        _ => return Err(ProblemError::StokesFamily.into()),
    };
    let scaled = scale_problem(spec, 2 * d)?;
    check_order(&scaled, d)?;
    let space = scaled.space;
    let two_d = 2 * d;
    let mut asm = Assembler::new(space, two_d);
    let y = asm.add_block(BlockLabel::Y, vec![Block::X, Block::Omega]);
    let u = asm.add_block(BlockLabel::U, vec![Block::X, Block::Omega]);
    let v = asm.add_block(BlockLabel::V, vec![Block::X, Block::Param]);
    let z1 = asm.add_block(BlockLabel::Z1, vec![Block::X, Block::Omega, Block::Param]);
    let z2 = asm.add_block(BlockLabel::Z2, vec![Block::X, Block::Param]);

    coupling_and_pins(&mut asm, &scaled, &[y], u, v)?;

    // marginal ties of z¹ and z²
    let alphas = enumerate_monomials(&space, &[Block::X], two_d);
    let betas = enumerate_monomials(&space, &[Block::Omega], two_d);
    let gammas = enumerate_monomials(&space, &[Block::Param], two_d);
    for alpha in &alphas {
        let da = alpha.degree();
        for beta in &betas {
            if da + beta.degree() > two_d {
                continue;
            }
            let m = alpha.mul(beta);
            asm.add_row(
                RowKind::StokesTieOmega {
                    alpha: x_exps(&space, alpha),
                    beta: omega_exps(&space, beta),
                },
                &[(z1, m.clone(), 1.0), (y, m.clone(), -1.0)],
                0.0,
            );
        }
        for gamma in &gammas {
            if da + gamma.degree() > two_d {
                continue;
            }
            let m = alpha.mul(gamma);
            asm.add_row(
                RowKind::StokesTieParam {
                    alpha: x_exps(&space, alpha),
                    gamma: param_exps(&space, gamma),
                },
                &[(z1, m.clone(), 1.0), (z2, m.clone(), 1.0), (v, m.clone(), -1.0)],
                0.0,
            );
        }
    }

    // Stokes rows: the scaled integrand q̃_β built from the scaled f and the
    // family's (mean, σ) expressed in scaled a-symbols.
    let f_scaled = &scaled.f_list[0];
    let (mean_poly, sigma_poly) = match fixed_mean {
        Some(c) => {
            let s = scaled.a_map.scale[0];
            let c0 = scaled.a_map.shift[0];
            (
                Polynomial::constant(space, c),
                Polynomial::var(space, Block::Param, 0)?
                    .scale(s)
                    .add(&Polynomial::constant(space, c0))?,
            )
        }
        None => {
            let mk = |i: usize| -> Result<Polynomial, RelaxError> {
                Ok(Polynomial::var(space, Block::Param, i)?
                    .scale(scaled.a_map.scale[i])
                    .add(&Polynomial::constant(space, scaled.a_map.shift[i]))?)
            };
            (mk(0)?, mk(1)?)
        }
    };
    let beta_cap = beta_max.unwrap_or(two_d as i64 - f_scaled.degree() as i64 - 2);
    let gamma_cap = gamma_max.unwrap_or(2);
    if beta_cap >= 0 {
        for beta in 0..=(beta_cap as u32) {
            let q = stokes_polynomial_gaussian(f_scaled, beta, &mean_poly, &sigma_poly)?;
            if q.is_zero() {
                continue;
            }
            let dq = q.degree();
            if dq > two_d {
                continue;
            }
            for gamma in &gammas {
                let dg = gamma.degree();
                if dg > gamma_cap || dg + dq > two_d {
                    continue;
                }
                for alpha in &alphas {
                    if alpha.degree() + dg + dq > two_d {
                        continue;
                    }
                    let base = alpha.mul(gamma);
                    let terms: Vec<(usize, Monomial, f64)> = q
                        .terms()
                        .map(|(m, c)| (z1, base.mul(m), *c))
                        .collect();
                    asm.add_row(
                        RowKind::StokesRow {
                            alpha: x_exps(&space, alpha),
                            gamma: param_exps(&space, gamma),
                            beta,
                        },
                        &terms,
                        0.0,
                    );
                }
            }
        }
    }

    let minus_f = f_scaled.scale(-1.0);
    asm.add_measure_psd(y, d, &[minus_f.clone()], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(u, d, &[], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(v, d, &[], &[&scaled.x_set, &scaled.a_set]);
    asm.add_measure_psd(
        z1,
        d,
        &[minus_f],
        &[&scaled.x_set, &scaled.omega_set, &scaled.a_set],
    );
    asm.add_measure_psd(z2, d, &[], &[&scaled.x_set, &scaled.a_set]);

    let origin = asm.blocks[y].global(&Monomial::one(&space)).unwrap();
    let objective = vec![(origin, 1.0)];
    Ok(asm.finish(d, Variant::Stokes, objective, scaled))
}

/// Union-of-constraints relaxation (the joint display): one y^j block per
/// constraint with its own −f_j localizer, shared u and v. Accepts a single
/// constraint for structural comparison against `build_base`.
pub fn build_union(
    spec: &ProblemSpec,
    f_list: &[Polynomial],
    d: u32,
) -> Result<MomentRelaxation, RelaxError> {
    let mut adjusted = spec.clone();
    adjusted.f_list = f_list.to_vec();
    let scaled = scale_problem(&adjusted, 2 * d)?;
    check_order(&scaled, d)?;
    let space = scaled.space;
    let mut asm = Assembler::new(space, 2 * d);
    let y_ids: Vec<usize> = (0..f_list.len())
        .map(|j| asm.add_block(BlockLabel::YJ(j), vec![Block::X, Block::Omega]))
        .collect();
    let u = asm.add_block(BlockLabel::U, vec![Block::X, Block::Omega]);
    let v = asm.add_block(BlockLabel::V, vec![Block::X, Block::Param]);

    coupling_and_pins(&mut asm, &scaled, &y_ids, u, v)?;

    for (j, &yj) in y_ids.iter().enumerate() {
        let minus_fj = scaled.f_list[j].scale(-1.0);
        asm.add_measure_psd(yj, d, &[minus_fj], &[&scaled.x_set, &scaled.omega_set]);
    }
    asm.add_measure_psd(u, d, &[], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(v, d, &[], &[&scaled.x_set, &scaled.a_set]);

    let objective: Vec<(usize, f64)> = y_ids
        .iter()
        .map(|&yj| (asm.blocks[yj].global(&Monomial::one(&space)).unwrap(), 1.0))
        .collect();
    Ok(asm.finish(d, Variant::Joint, objective, scaled))
}

/// Joint chance-constraint relaxation; requires s_f ≥ 2.
pub fn build_joint(spec: &ProblemSpec, d: u32) -> Result<MomentRelaxation, RelaxError> {
    if spec.f_list.len() < 2 {
        return Err(RelaxError::SingleConstraintJoint);
    }
    build_union(spec, &spec.f_list.clone(), d)
}

/// Moment-box ambiguity relaxation: blocks φ (y, on K), ν and μ (on X×Ω),
/// ψ (v, on X×A); mass balance φ+ν=μ, both x-marginals pinned to λ, and the
/// first/second-moment couplings.
pub fn build_moment_box(spec: &ProblemSpec, d: u32) -> Result<MomentRelaxation, RelaxError> {
    if spec.f_list.len() != 1 {
        return Err(RelaxError::NotSingleConstraint(spec.f_list.len()));
    }
    let amb = spec
        .ambiguity
        .as_ref()
        .ok_or(ProblemError::MissingAmbiguity)?;
    if amb.noise_dim() > 3 {
        return Err(ProblemError::MomentBoxNoiseDim(amb.noise_dim()).into());
    }
    let scaled = scale_problem(spec, 2 * d)?;
    check_order(&scaled, d)?;
    let space = scaled.space;
    let two_d = 2 * d;
    let p = space.p();
    let mut asm = Assembler::new(space, two_d);
    let y = asm.add_block(BlockLabel::Y, vec![Block::X, Block::Omega]);
    let nu = asm.add_block(BlockLabel::Nu, vec![Block::X, Block::Omega]);
    let mu = asm.add_block(BlockLabel::Mu, vec![Block::X, Block::Omega]);
    let v = asm.add_block(BlockLabel::V, vec![Block::X, Block::Param]);

    let alphas = enumerate_monomials(&space, &[Block::X], two_d);
    let betas = enumerate_monomials(&space, &[Block::Omega], two_d);

    // φ + ν − μ = 0 momentwise
    for alpha in &alphas {
        let da = alpha.degree();
        for beta in &betas {
            if da + beta.degree() > two_d {
                continue;
            }
            let m = alpha.mul(beta);
            asm.add_row(
                RowKind::MassBalance {
                    alpha: x_exps(&space, alpha),
                    beta: omega_exps(&space, beta),
                },
                &[(y, m.clone(), 1.0), (nu, m.clone(), 1.0), (mu, m.clone(), -1.0)],
                0.0,
            );
        }
    }

    // both x-marginals pinned to λ
    for alpha in &alphas {
        let key = x_exps(&space, alpha);
        let lam = scaled.lambda.get(&key).expect("lambda to 2d");
        asm.add_row(
            RowKind::LambdaPin {
                alpha: key.clone(),
                measure: BlockLabel::Mu,
            },
            &[(mu, alpha.clone(), 1.0)],
            lam,
        );
        asm.add_row(
            RowKind::LambdaPin {
                alpha: key,
                measure: BlockLabel::V,
            },
            &[(v, alpha.clone(), 1.0)],
            lam,
        );
    }

    // moment couplings: ω_i against m_i, ω_iω_j against σ_ij, |α| ≤ 2d − 2
    let omega_var = |i: usize| Polynomial::var(space, Block::Omega, i).unwrap();
    let a_sym = |coord: usize| -> Result<Polynomial, RelaxError> {
        Ok(Polynomial::var(space, Block::Param, coord)?
            .scale(scaled.a_map.scale[coord])
            .add(&Polynomial::constant(space, scaled.a_map.shift[coord]))?)
    };
    for alpha in &alphas {
        if alpha.degree() > two_d.saturating_sub(2) {
            continue;
        }
        for i in 0..p {
            let wi = omega_var(i);
            let (wm, _) = wi.terms().next().map(|(m, c)| (m.clone(), *c)).unwrap();
            let mono = alpha.mul(&wm);
            let mut terms = vec![(y, mono.clone(), 1.0), (nu, mono.clone(), 1.0)];
            for (m, c) in a_sym(i)?.terms() {
                terms.push((v, alpha.mul(m), -c));
            }
            asm.add_row(
                RowKind::MomentCoupling {
                    alpha: x_exps(&space, alpha),
                    i,
                    j: None,
                },
                &terms,
                0.0,
            );
        }
        for i in 0..p {
            for j in i..p {
                let wij = omega_var(i).mul(&omega_var(j)).unwrap();
                let (wm, _) = wij.terms().next().map(|(m, c)| (m.clone(), *c)).unwrap();
                let mono = alpha.mul(&wm);
                let sigma_coord = p + i * p - i * i.saturating_sub(1) / 2 + (j - i);
                let mut terms = vec![(y, mono.clone(), 1.0), (nu, mono.clone(), 1.0)];
                for (m, c) in a_sym(sigma_coord)?.terms() {
                    terms.push((v, alpha.mul(m), -c));
                }
                asm.add_row(
                    RowKind::MomentCoupling {
                        alpha: x_exps(&space, alpha),
                        i,
                        j: Some(j),
                    },
                    &terms,
                    0.0,
                );
            }
        }
    }

    let minus_f = scaled.f_list[0].scale(-1.0);
    asm.add_measure_psd(y, d, &[minus_f], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(nu, d, &[], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(mu, d, &[], &[&scaled.x_set, &scaled.omega_set]);
    asm.add_measure_psd(v, d, &[], &[&scaled.x_set, &scaled.a_set]);

    let origin = asm.blocks[y].global(&Monomial::one(&space)).unwrap();
    let objective = vec![(origin, 1.0)];
    Ok(asm.finish(d, Variant::MomentBox, objective, scaled))
}
