//! Parametrized distribution families μ_a: polynomial moment maps
//! β ↦ p_β(a), seeded samplers, and closed-form CDFs where available.

use crate::poly::{binomial, Block, Monomial, Polynomial, VariableSpace};
use crate::sets::SemialgebraicSet;
use crate::special::{normal_interval, splitmix64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial as BinomialDist, Distribution, Exp, Normal, Poisson as PoissonDist};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("moment table has no entry for β = {0:?}")]
    UnsupportedBeta(Vec<u32>),
    #[error("parameter {0:?} lies outside the family's parameter set")]
    ParamOutsideSet(Vec<f64>),
    #[error("parameter vector has length {got}, family needs {expected}")]
    ParamDim { expected: usize, got: usize },
    #[error("family has no closed-form CDF")]
    NoClosedFormCdf,
    #[error("family has no sampler")]
    NoSampler,
    #[error("multivariate Gaussian moments implemented for |β| ≤ {cap}, requested {got}")]
    GaussianDegreeCap { cap: u32, got: u32 },
    #[error("space parameter block has {got} variables, family needs {expected}")]
    SpaceParamDim { expected: usize, got: usize },
    #[error("space noise block has {got} variables, family needs {expected}")]
    SpaceNoiseDim { expected: usize, got: usize },
    #[error(transparent)]
    Poly(#[from] crate::poly::PolyError),
    #[error(transparent)]
    Set(#[from] crate::sets::SetError),
}

/// One fixed measure, used as a component of a finite mixture list.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentMeasure {
    Gaussian { mean: f64, sd: f64 },
    Exponential { mean: f64 },
    Poisson { rate: f64 },
    Binomial { n: u64, prob: f64 },
}

impl ComponentMeasure {
    fn raw_moment(&self, beta: u32) -> f64 {
        match self {
            ComponentMeasure::Gaussian { mean, sd } => {
                crate::special::gaussian_full_moments(*mean, *sd, beta as usize)[beta as usize]
            }
            ComponentMeasure::Exponential { mean } => {
                mean.powi(beta as i32) * factorial(beta)
            }
            ComponentMeasure::Poisson { rate } => {
                let s2 = stirling2_row(beta);
                (0..=beta)
                    .map(|k| s2[k as usize] * rate.powi(k as i32))
                    .sum()
            }
            ComponentMeasure::Binomial { n, prob } => {
                let s2 = stirling2_row(beta);
                (0..=beta)
                    .map(|k| s2[k as usize] * falling(*n, k) * prob.powi(k as i32))
                    .sum()
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ComponentMeasure::Gaussian { mean, sd } => {
                Normal::new(*mean, *sd).unwrap().sample(rng)
            }
            ComponentMeasure::Exponential { mean } => Exp::new(1.0 / mean).unwrap().sample(rng),
            ComponentMeasure::Poisson { rate } => PoissonDist::new(*rate).unwrap().sample(rng),
            ComponentMeasure::Binomial { n, prob } => {
                BinomialDist::new(*n, *prob).unwrap().sample(rng) as f64
            }
        }
    }
}

/// Family kinds with polynomial moment maps (Assumption-1 instances).
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// Univariate Gaussian; a = (mean, deviation), or a = (deviation) when
    /// the mean is pinned.
    GaussianUnivariate { fixed_mean: Option<f64> },
    /// Multivariate Gaussian; a = (θ₁..θ_p, upper triangle of Σ row-major).
    GaussianMultivariate { p: usize },
    /// Product of exponentials with means a_i.
    Exponential { p: usize },
    /// Poisson with rate a.
    Poisson,
    /// Binomial(N, a).
    Binomial { n: u64 },
    /// Finite list of measures; a ∈ {1, …, κ} with p_β the Lagrange
    /// interpolant of the per-measure moments.
    FiniteList { components: Vec<ComponentMeasure> },
    /// User-supplied moment map: raw (exponents over a, coefficient) term
    /// lists per β.
    MomentTable {
        param_dim: usize,
        noise_dim: usize,
        entries: Vec<(Vec<u32>, Vec<(Vec<u8>, f64)>)>,
    },
}

/// A parametrized family μ_a together with its parameter set A.
#[derive(Debug, Clone)]
pub struct DistributionFamily {
    pub kind: FamilyKind,
    pub param_set: SemialgebraicSet,
}

/// One noise draw; reproducible given (a, seed_tag).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub value: Vec<f64>,
    pub seed_tag: u64,
}

impl DistributionFamily {
    pub fn param_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::GaussianUnivariate { fixed_mean } => {
                if fixed_mean.is_some() {
                    1
                } else {
                    2
                }
            }
            FamilyKind::GaussianMultivariate { p } => p + p * (p + 1) / 2,
            FamilyKind::Exponential { p } => *p,
            FamilyKind::Poisson | FamilyKind::Binomial { .. } | FamilyKind::FiniteList { .. } => 1,
            FamilyKind::MomentTable { param_dim, .. } => *param_dim,
        }
    }

    pub fn noise_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::GaussianUnivariate { .. }
            | FamilyKind::Poisson
            | FamilyKind::Binomial { .. }
            | FamilyKind::FiniteList { .. } => 1,
            FamilyKind::GaussianMultivariate { p } | FamilyKind::Exponential { p } => *p,
            FamilyKind::MomentTable { noise_dim, .. } => *noise_dim,
        }
    }

    fn check_space(&self, space: &VariableSpace) -> Result<(), FamilyError> {
        if space.t() != self.param_dim() {
            return Err(FamilyError::SpaceParamDim {
                expected: self.param_dim(),
                got: space.t(),
            });
        }
        if space.p() != self.noise_dim() {
            return Err(FamilyError::SpaceNoiseDim {
                expected: self.noise_dim(),
                got: space.p(),
            });
        }
        Ok(())
    }

    /// The exact moment polynomial p_β ∈ ℝ[a], embedded in the a-block of
    /// `space`.
    pub fn moment_polynomial(
        &self,
        space: &VariableSpace,
        beta: &[u32],
    ) -> Result<Polynomial, FamilyError> {
        self.check_space(space)?;
        if beta.len() != self.noise_dim() {
            return Err(FamilyError::ParamDim {
                expected: self.noise_dim(),
                got: beta.len(),
            });
        }
        match &self.kind {
            FamilyKind::GaussianUnivariate { fixed_mean } => {
                let sigma_idx = if fixed_mean.is_some() { 0 } else { 1 };
                let mean = match fixed_mean {
                    Some(c) => Polynomial::constant(*space, *c),
                    None => Polynomial::var(*space, Block::Param, 0)?,
                };
                let sigma = Polynomial::var(*space, Block::Param, sigma_idx)?;
                Ok(gaussian_moment_poly(space, beta[0], &mean, &sigma)?)
            }
            FamilyKind::GaussianMultivariate { p } => {
                gaussian_multivariate_moment(space, *p, beta)
            }
            FamilyKind::Exponential { .. } => {
                let mut poly = Polynomial::constant(*space, 1.0);
                for (i, &b) in beta.iter().enumerate() {
                    let a = Polynomial::var(*space, Block::Param, i)?;
                    let mut pw = Polynomial::constant(*space, factorial(b));
                    for _ in 0..b {
                        pw = pw.mul(&a)?;
                    }
                    poly = poly.mul(&pw)?;
                }
                Ok(poly)
            }
            FamilyKind::Poisson => {
                let a = Polynomial::var(*space, Block::Param, 0)?;
                let s2 = stirling2_row(beta[0]);
                let mut poly = Polynomial::zero(*space);
                let mut apow = Polynomial::constant(*space, 1.0);
                for (k, &c) in s2.iter().enumerate() {
                    if k > 0 {
                        apow = apow.mul(&a)?;
                    }
                    poly = poly.add(&apow.scale(c))?;
                }
                Ok(poly)
            }
            FamilyKind::Binomial { n } => {
                let a = Polynomial::var(*space, Block::Param, 0)?;
                let s2 = stirling2_row(beta[0]);
                let mut poly = Polynomial::zero(*space);
                let mut apow = Polynomial::constant(*space, 1.0);
                for (k, &c) in s2.iter().enumerate() {
                    if k > 0 {
                        apow = apow.mul(&a)?;
                    }
                    poly = poly.add(&apow.scale(c * falling(*n, k as u32)))?;
                }
                Ok(poly)
            }
            FamilyKind::FiniteList { components } => {
                let values: Vec<f64> = components.iter().map(|c| c.raw_moment(beta[0])).collect();
                lagrange_on_integers(space, &values)
            }
            FamilyKind::MomentTable { entries, .. } => {
                let entry = entries
                    .iter()
                    .find(|(b, _)| b.as_slice() == beta)
                    .ok_or_else(|| FamilyError::UnsupportedBeta(beta.to_vec()))?;
                let mut poly = Polynomial::zero(*space);
                let a0 = space.block_start(Block::Param);
                for (exps, coef) in &entry.1 {
                    let mut full = vec![0u8; space.dim()];
                    full[a0..a0 + exps.len()].copy_from_slice(exps);
                    poly.add_term(Monomial::from_exps(full), *coef);
                }
                Ok(poly)
            }
        }
    }

    /// i.i.d. draws from μ_a, deterministic for a fixed seed. Each sample
    /// carries the derived per-draw seed tag.
    pub fn sample(
        &self,
        a: &[f64],
        count: usize,
        seed: u64,
    ) -> Result<Vec<NoiseSample>, FamilyError> {
        if a.len() != self.param_dim() {
            return Err(FamilyError::ParamDim {
                expected: self.param_dim(),
                got: a.len(),
            });
        }
        if !self.param_set.contains(a, 1e-9)? {
            return Err(FamilyError::ParamOutsideSet(a.to_vec()));
        }
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let tag = splitmix64(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(tag);
            out.push(NoiseSample {
                value: self.draw(a, &mut rng)?,
                seed_tag: tag,
            });
        }
        Ok(out)
    }

    /// One draw with an externally supplied RNG (worker-independent seeding
    /// is the caller's job).
    pub fn draw(&self, a: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>, FamilyError> {
        match &self.kind {
            FamilyKind::GaussianUnivariate { fixed_mean } => {
                let (mean, sd) = match fixed_mean {
                    Some(c) => (*c, a[0]),
                    None => (a[0], a[1]),
                };
                Ok(vec![Normal::new(mean, sd).unwrap().sample(rng)])
            }
            FamilyKind::GaussianMultivariate { p } => {
                let (theta, chol) = gaussian_nd_params(*p, a);
                let z: Vec<f64> = (0..*p)
                    .map(|_| Normal::new(0.0, 1.0).unwrap().sample(rng))
                    .collect();
                let mut w = theta;
                for i in 0..*p {
                    for (j, zj) in z.iter().enumerate().take(i + 1) {
                        w[i] += chol[i][j] * zj;
                    }
                }
                Ok(w)
            }
            FamilyKind::Exponential { p } => Ok((0..*p)
                .map(|i| Exp::new(1.0 / a[i]).unwrap().sample(rng))
                .collect()),
            FamilyKind::Poisson => Ok(vec![PoissonDist::new(a[0]).unwrap().sample(rng)]),
            FamilyKind::Binomial { n } => {
                Ok(vec![BinomialDist::new(*n, a[0]).unwrap().sample(rng) as f64])
            }
            FamilyKind::FiniteList { components } => {
                let i = (a[0].round() as usize).clamp(1, components.len()) - 1;
                Ok(vec![components[i].sample(rng)])
            }
            FamilyKind::MomentTable { .. } => Err(FamilyError::NoSampler),
        }
    }

    /// Exact probability mass μ_a((lo, hi]) for families with closed-form
    /// CDFs (univariate Gaussian and exponential).
    pub fn tail_probability(&self, a: &[f64], lo: f64, hi: f64) -> Result<f64, FamilyError> {
        match &self.kind {
            FamilyKind::GaussianUnivariate { fixed_mean } => {
                let (mean, sd) = match fixed_mean {
                    Some(c) => (*c, a[0]),
                    None => (a[0], a[1]),
                };
                Ok(normal_interval(mean, sd, lo, hi))
            }
            FamilyKind::Exponential { p } if *p == 1 => {
                let cdf = |v: f64| {
                    if v == f64::INFINITY {
                        1.0
                    } else if v <= 0.0 {
                        0.0
                    } else {
                        1.0 - (-v / a[0]).exp()
                    }
                };
                Ok((cdf(hi) - cdf(lo)).max(0.0))
            }
            _ => Err(FamilyError::NoClosedFormCdf),
        }
    }
}

/// Gaussian raw-moment polynomial via the two-term recursion
/// m_k = mean·m_{k−1} + (k−1)·σ²·m_{k−2}, m₀ = 1.
pub fn gaussian_moment_poly(
    space: &VariableSpace,
    k: u32,
    mean: &Polynomial,
    sigma: &Polynomial,
) -> Result<Polynomial, crate::poly::PolyError> {
    let mut m_prev = Polynomial::constant(*space, 1.0);
    if k == 0 {
        return Ok(m_prev);
    }
    let mut m_cur = mean.clone();
    let sigma_sq = sigma.mul(sigma)?;
    for j in 2..=k {
        let next = mean
            .mul(&m_cur)?
            .add(&sigma_sq.mul(&m_prev)?.scale((j - 1) as f64))?;
        m_prev = m_cur;
        m_cur = next;
    }
    Ok(m_cur)
}

const GAUSSIAN_ND_CAP: u32 = 6;

/// Multivariate Gaussian raw moments by the binomial mean shift and Isserlis
/// expansion of the central moments (homogeneous polynomials in Σ).
fn gaussian_multivariate_moment(
    space: &VariableSpace,
    p: usize,
    beta: &[u32],
) -> Result<Polynomial, FamilyError> {
    let total: u32 = beta.iter().sum();
    if total > GAUSSIAN_ND_CAP {
        return Err(FamilyError::GaussianDegreeCap {
            cap: GAUSSIAN_ND_CAP,
            got: total,
        });
    }
    let theta: Vec<Polynomial> = (0..p)
        .map(|i| Polynomial::var(*space, Block::Param, i))
        .collect::<Result<_, _>>()?;
    let mut out = Polynomial::zero(*space);
    let mut gamma = vec![0u32; p];
    loop {
        // term: ∏ C(β_i, γ_i)·θ^{β−γ} · CM(γ)
        let mut coef = 1.0;
        for i in 0..p {
            coef *= binomial(beta[i] as u64, gamma[i] as u64) as f64;
        }
        let mut theta_pow = Polynomial::constant(*space, coef);
        for i in 0..p {
            for _ in 0..(beta[i] - gamma[i]) {
                theta_pow = theta_pow.mul(&theta[i])?;
            }
        }
        let cm = central_moment_isserlis(space, p, &gamma)?;
        out = out.add(&theta_pow.mul(&cm)?)?;

        // next γ ≤ β
        let mut carry = true;
        for i in 0..p {
            if carry {
                if gamma[i] < beta[i] {
                    gamma[i] += 1;
                    carry = false;
                } else {
                    gamma[i] = 0;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(out)
}

/// Central moment E[∏ c_i^{γ_i}] as a polynomial in the σ_{ij} symbols:
/// zero for odd |γ|, else the Isserlis sum over perfect matchings.
fn central_moment_isserlis(
    space: &VariableSpace,
    p: usize,
    gamma: &[u32],
) -> Result<Polynomial, FamilyError> {
    let total: u32 = gamma.iter().sum();
    if total == 0 {
        return Ok(Polynomial::constant(*space, 1.0));
    }
    if total % 2 == 1 {
        return Ok(Polynomial::zero(*space));
    }
    let sigma_var = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // upper triangle row-major offset after the p mean symbols
        let offset = i * p - i * (i.saturating_sub(1)) / 2 + (j - i);
        Polynomial::var(*space, Block::Param, p + offset)
    };
    let mut gamma = gamma.to_vec();
    let i = gamma.iter().position(|&g| g > 0).unwrap();
    gamma[i] -= 1;
    let mut out = Polynomial::zero(*space);
    for j in 0..p {
        if gamma[j] == 0 {
            continue;
        }
        let mult = gamma[j] as f64;
        let mut rest = gamma.clone();
        rest[j] -= 1;
        let sub = central_moment_isserlis(space, p, &rest)?;
        out = out.add(&sigma_var(i, j)?.mul(&sub)?.scale(mult))?;
    }
    Ok(out)
}

fn gaussian_nd_params(p: usize, a: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let theta = a[..p].to_vec();
    let mut sigma = vec![vec![0.0; p]; p];
    let mut k = p;
    for i in 0..p {
        for j in i..p {
            sigma[i][j] = a[k];
            sigma[j][i] = a[k];
            k += 1;
        }
    }
    // Cholesky, p ≤ 3
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = sigma[i][j];
            for m in 0..j {
                s -= l[i][m] * l[j][m];
            }
            if i == j {
                l[i][j] = s.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { s / l[j][j] } else { 0.0 };
            }
        }
    }
    (theta, l)
}

/// Degree-(κ−1) Lagrange interpolant through (i, values[i−1]), i = 1..κ,
/// in the single a-symbol.
fn lagrange_on_integers(
    space: &VariableSpace,
    values: &[f64],
) -> Result<Polynomial, FamilyError> {
    let kappa = values.len();
    let a = Polynomial::var(*space, Block::Param, 0)?;
    let mut out = Polynomial::zero(*space);
    for (idx, &v) in values.iter().enumerate() {
        let xi = (idx + 1) as f64;
        let mut basis = Polynomial::constant(*space, 1.0);
        for j in 0..kappa {
            if j == idx {
                continue;
            }
            let xj = (j + 1) as f64;
            let factor = a
                .sub(&Polynomial::constant(*space, xj))
                .unwrap()
                .scale(1.0 / (xi - xj));
            basis = basis.mul(&factor)?;
        }
        out = out.add(&basis.scale(v))?;
    }
    Ok(out)
}

fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|v| v as f64).product()
}

fn falling(n: u64, k: u32) -> f64 {
    (0..k as u64).map(|i| (n - i) as f64).product()
}

/// Row β of the Stirling-number-of-the-second-kind table, as f64.
fn stirling2_row(beta: u32) -> Vec<f64> {
    let mut row = vec![0u128; beta as usize + 1];
    row[0] = 1;
    for n in 1..=beta as usize {
        let mut next = vec![0u128; beta as usize + 1];
        for (k, &v) in row.iter().enumerate().take(n) {
            if v == 0 {
                continue;
            }
            next[k + 1] += v;
            next[k] += k as u128 * v;
        }
        row = next;
    }
    row.into_iter().map(|v| v as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::SemialgebraicSet;

    fn gaussian_family() -> DistributionFamily {
        let space = VariableSpace::new(1, 1, 2).unwrap();
        let a = SemialgebraicSet::from_box(space, Block::Param, &[(-0.1, 0.1), (0.8, 1.0)])
            .unwrap();
        DistributionFamily {
            kind: FamilyKind::GaussianUnivariate { fixed_mean: None },
            param_set: a,
        }
    }

    #[test]
    fn moment_poly_paper_values() {
        let space = VariableSpace::new(1, 1, 1).unwrap();
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &[(1.0, 2.0)]).unwrap();

        // Exponential: p₃ = 6a³
        let fam = DistributionFamily {
            kind: FamilyKind::Exponential { p: 1 },
            param_set: a_box.clone(),
        };
        let p3 = fam.moment_polynomial(&space, &[3]).unwrap();
        let v = p3.eval(&[0.0, 0.0, 2.0]).unwrap();
        assert!((v - 48.0).abs() < 1e-12);
        assert_eq!(p3.degree(), 3);

        // Poisson: p₂ = a² + a
        let fam = DistributionFamily {
            kind: FamilyKind::Poisson,
            param_set: a_box.clone(),
        };
        let p2 = fam.moment_polynomial(&space, &[2]).unwrap();
        assert!((p2.eval(&[0.0, 0.0, 3.0]).unwrap() - 12.0).abs() < 1e-12);

        // Binomial(N): p₁ = N·a; raw second moment Na(1−a) + N²a²
        let fam = DistributionFamily {
            kind: FamilyKind::Binomial { n: 10 },
            param_set: a_box,
        };
        let p1 = fam.moment_polynomial(&space, &[1]).unwrap();
        assert!((p1.eval(&[0.0, 0.0, 0.25]).unwrap() - 2.5).abs() < 1e-12);
        let p2 = fam.moment_polynomial(&space, &[2]).unwrap();
        let a = 0.25;
        let expect = 10.0 * a * (1.0 - a) + 100.0 * a * a;
        assert!((p2.eval(&[0.0, 0.0, a]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_second_moment() {
        let fam = gaussian_family();
        let space = VariableSpace::new(1, 1, 2).unwrap();
        // p₂ = a² + σ²
        let p2 = fam.moment_polynomial(&space, &[2]).unwrap();
        let v = p2.eval(&[0.0, 0.0, 0.1, 0.9]).unwrap();
        assert!((v - (0.01 + 0.81)).abs() < 1e-12);
        // moment_polynomial(0) ≡ 1
        let p0 = fam.moment_polynomial(&space, &[0]).unwrap();
        assert_eq!(p0, Polynomial::constant(space, 1.0));
        // degree ≤ |β|
        for k in 0..=10u32 {
            let p = fam.moment_polynomial(&space, &[k]).unwrap();
            assert!(p.degree() <= k);
        }
    }

    #[test]
    fn moment_zero_is_one_for_all_kinds() {
        let sp11 = VariableSpace::new(1, 1, 1).unwrap();
        let box1 = SemialgebraicSet::from_box(sp11, Block::Param, &[(0.5, 1.0)]).unwrap();
        let kinds = vec![
            FamilyKind::Exponential { p: 1 },
            FamilyKind::Poisson,
            FamilyKind::Binomial { n: 7 },
            FamilyKind::GaussianUnivariate {
                fixed_mean: Some(0.0),
            },
            FamilyKind::FiniteList {
                components: vec![
                    ComponentMeasure::Gaussian { mean: 0.0, sd: 1.0 },
                    ComponentMeasure::Exponential { mean: 2.0 },
                ],
            },
        ];
        for kind in kinds {
            let fam = DistributionFamily {
                kind,
                param_set: box1.clone(),
            };
            let p0 = fam.moment_polynomial(&sp11, &[0]).unwrap();
            assert_eq!(p0, Polynomial::constant(sp11, 1.0));
        }
    }

    #[test]
    fn gaussian_moments_vs_hermite_quadrature() {
        // ∫ ω^k dN(a, σ²) = (1/√π) ∫ (a + √2 σ t)^k e^{−t²} dt
        let fam = gaussian_family();
        let space = VariableSpace::new(1, 1, 2).unwrap();
        let (nodes, weights) = crate::special::gauss_hermite(20);
        for (a, sd) in [(0.05, 0.85), (-0.08, 0.97)] {
            for k in 0..=10u32 {
                let poly = fam.moment_polynomial(&space, &[k]).unwrap();
                let v = poly.eval(&[0.0, 0.0, a, sd]).unwrap();
                let q: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&t, &w)| w * (a + std::f64::consts::SQRT_2 * sd * t).powi(k as i32))
                    .sum::<f64>()
                    / std::f64::consts::PI.sqrt();
                let scale = 1.0f64.max(q.abs());
                assert!((v - q).abs() / scale < 1e-9, "k={k} poly={v} quad={q}");
            }
        }
    }

    #[test]
    fn exponential_moments_vs_laguerre_quadrature() {
        // ∫₀^∞ ω^k e^{−ω/a}/a dω = ∫₀^∞ (a u)^k e^{−u} du
        let space = VariableSpace::new(1, 1, 1).unwrap();
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &[(0.5, 3.0)]).unwrap();
        let fam = DistributionFamily {
            kind: FamilyKind::Exponential { p: 1 },
            param_set: a_box,
        };
        let (nodes, weights) = crate::special::gauss_laguerre(20);
        for a in [0.7, 2.4] {
            for k in 0..=10u32 {
                let poly = fam.moment_polynomial(&space, &[k]).unwrap();
                let v = poly.eval(&[0.0, 0.0, a]).unwrap();
                let q: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&u, &w)| w * (a * u).powi(k as i32))
                    .sum();
                assert!((v - q).abs() / 1.0f64.max(q) < 1e-9, "k={k} poly={v} quad={q}");
            }
        }
    }

    #[test]
    fn gaussian_even_central_moments_nonnegative() {
        let space = VariableSpace::new(1, 1, 1).unwrap();
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &[(0.4, 0.6)]).unwrap();
        let fam = DistributionFamily {
            kind: FamilyKind::GaussianUnivariate {
                fixed_mean: Some(0.0),
            },
            param_set: a_box,
        };
        for k in (0..=10u32).step_by(2) {
            let p = fam.moment_polynomial(&space, &[k]).unwrap();
            for i in 0..=20 {
                let sd = 0.4 + 0.2 * i as f64 / 20.0;
                assert!(p.eval(&[0.0, 0.0, sd]).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn multivariate_gaussian_isserlis_specializes() {
        // p = 2: E[(ω₁−θ₁)²(ω₂−θ₂)²] = σ₁₁σ₂₂ + 2σ₁₂²
        let space = VariableSpace::new(1, 2, 5).unwrap();
        let bounds = [(-0.1, 0.1), (-0.1, 0.1), (0.5, 1.5), (-0.2, 0.2), (0.5, 1.5)];
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &bounds).unwrap();
        let fam = DistributionFamily {
            kind: FamilyKind::GaussianMultivariate { p: 2 },
            param_set: a_box,
        };
        let p22 = fam.moment_polynomial(&space, &[2, 2]).unwrap();
        // at θ = 0: value is σ₁₁σ₂₂ + 2σ₁₂²
        let (s11, s12, s22) = (1.2, 0.1, 0.8);
        let v = p22.eval(&[0.0, 0.0, 0.0, 0.0, 0.0, s11, s12, s22]).unwrap();
        assert!((v - (s11 * s22 + 2.0 * s12 * s12)).abs() < 1e-12);
        // fourth marginal: E[ω₁⁴] at θ=0 is 3σ₁₁²
        let p40 = fam.moment_polynomial(&space, &[4, 0]).unwrap();
        let v = p40.eval(&[0.0, 0.0, 0.0, 0.0, 0.0, s11, s12, s22]).unwrap();
        assert!((v - 3.0 * s11 * s11).abs() < 1e-12);
        assert!(matches!(
            fam.moment_polynomial(&space, &[5, 3]),
            Err(FamilyError::GaussianDegreeCap { .. })
        ));
    }

    #[test]
    fn finite_list_interpolates_component_moments() {
        let space = VariableSpace::new(1, 1, 1).unwrap();
        let mut a_box =
            SemialgebraicSet::from_box(space, Block::Param, &[(1.0, 3.0)]).unwrap();
        // attach the finite-support equality ∏(a − i) = 0
        let a = Polynomial::var(space, Block::Param, 0).unwrap();
        let mut prod = Polynomial::constant(space, 1.0);
        for i in 1..=3 {
            prod = prod
                .mul(&a.sub(&Polynomial::constant(space, i as f64)).unwrap())
                .unwrap();
        }
        a_box = SemialgebraicSet::new(
            space,
            Block::Param,
            a_box.inequalities().to_vec(),
            vec![prod],
        )
        .unwrap();
        let comps = vec![
            ComponentMeasure::Gaussian { mean: 0.0, sd: 1.0 },
            ComponentMeasure::Exponential { mean: 2.0 },
            ComponentMeasure::Poisson { rate: 1.5 },
        ];
        let fam = DistributionFamily {
            kind: FamilyKind::FiniteList {
                components: comps.clone(),
            },
            param_set: a_box,
        };
        for beta in 0..=4u32 {
            let p = fam.moment_polynomial(&space, &[beta]).unwrap();
            assert!(p.degree() <= 2);
            for (i, c) in comps.iter().enumerate() {
                let v = p.eval(&[0.0, 0.0, (i + 1) as f64]).unwrap();
                let m = c.raw_moment(beta);
                assert!((v - m).abs() < 1e-9 * (1.0 + m.abs()), "β={beta} i={i}");
            }
        }
    }

    #[test]
    fn sampling_statistics() {
        let fam = gaussian_family();
        let draws = fam.sample(&[0.0, 1.0], 100_000, 7).unwrap();
        let mean: f64 = draws.iter().map(|s| s.value[0]).sum::<f64>() / draws.len() as f64;
        let var: f64 = draws
            .iter()
            .map(|s| (s.value[0] - mean).powi(2))
            .sum::<f64>()
            / draws.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");

        let space = VariableSpace::new(1, 1, 1).unwrap();
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &[(1.0, 3.0)]).unwrap();
        let exp_fam = DistributionFamily {
            kind: FamilyKind::Exponential { p: 1 },
            param_set: a_box,
        };
        let draws = exp_fam.sample(&[2.0], 100_000, 11).unwrap();
        let mean: f64 = draws.iter().map(|s| s.value[0]).sum::<f64>() / draws.len() as f64;
        assert!((mean - 2.0).abs() < 0.03, "mean {mean}");

        assert!(fam.sample(&[0.0, 1.0], 0, 3).unwrap().is_empty());
        assert!(matches!(
            fam.sample(&[0.5, 1.0], 10, 3),
            Err(FamilyError::ParamOutsideSet(_))
        ));
        // determinism
        let d1 = fam.sample(&[0.0, 0.9], 32, 5).unwrap();
        let d2 = fam.sample(&[0.0, 0.9], 32, 5).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn sampling_consistency_with_moment_map() {
        let fam = gaussian_family();
        let space = VariableSpace::new(1, 1, 2).unwrap();
        let a = [0.05, 0.9];
        let n = 1_000_000usize;
        let draws = fam.sample(&a, n, 99).unwrap();
        for beta in 1..=4u32 {
            let emp: f64 = draws
                .iter()
                .map(|s| s.value[0].powi(beta as i32))
                .sum::<f64>()
                / n as f64;
            let poly = fam.moment_polynomial(&space, &[beta]).unwrap();
            let expect = poly.eval(&[0.0, 0.0, a[0], a[1]]).unwrap();
            // standard error of the β-th power estimate
            let second = fam
                .moment_polynomial(&space, &[2 * beta])
                .unwrap()
                .eval(&[0.0, 0.0, a[0], a[1]])
                .unwrap();
            let se = ((second - expect * expect).max(0.0) / n as f64).sqrt();
            assert!(
                (emp - expect).abs() <= 4.0 * se + 1e-12,
                "β={beta} emp={emp} expect={expect} se={se}"
            );
        }
    }

    #[test]
    fn tail_probability_examples() {
        let fam = gaussian_family();
        assert!((fam.tail_probability(&[0.0, 1.0], f64::NEG_INFINITY, 0.0).unwrap() - 0.5).abs() < 1e-14);
        let p = fam
            .tail_probability(&[0.1, 1.0], f64::NEG_INFINITY, 0.6244005127)
            .unwrap();
        assert!((p - 0.70).abs() < 1e-3);

        let space = VariableSpace::new(1, 1, 1).unwrap();
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &[(0.5, 2.0)]).unwrap();
        let exp_fam = DistributionFamily {
            kind: FamilyKind::Exponential { p: 1 },
            param_set: a_box,
        };
        assert_eq!(
            exp_fam
                .tail_probability(&[1.0], f64::NEG_INFINITY, 0.0)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn poisson_binomial_moments_vs_summation() {
        let space = VariableSpace::new(1, 1, 1).unwrap();
        let a_box = SemialgebraicSet::from_box(space, Block::Param, &[(0.1, 4.0)]).unwrap();
        let fam = DistributionFamily {
            kind: FamilyKind::Poisson,
            param_set: a_box.clone(),
        };
        for a in [0.7, 2.3] {
            for beta in 0..=10u32 {
                let poly = fam.moment_polynomial(&space, &[beta]).unwrap();
                let v = poly.eval(&[0.0, 0.0, a]).unwrap();
                // direct summation, truncated once both the tail mass is
                // < 1e-14 and the running term is negligible
                let mut sum = 0.0;
                let mut pk = (-a).exp();
                let mut mass = 0.0;
                let mut k = 0u32;
                loop {
                    let term = (k as f64).powi(beta as i32) * pk;
                    sum += term;
                    mass += pk;
                    k += 1;
                    pk *= a / k as f64;
                    if (mass >= 1.0 - 1e-14 && term <= 1e-14 * sum.abs()) || k >= 2000 {
                        break;
                    }
                }
                assert!((v - sum).abs() / 1.0f64.max(sum) < 1e-9, "β={beta} a={a}");
            }
        }
        let nb = 12u64;
        let fam = DistributionFamily {
            kind: FamilyKind::Binomial { n: nb },
            param_set: a_box,
        };
        for a in [0.2, 0.65] {
            for beta in 0..=10u32 {
                let poly = fam.moment_polynomial(&space, &[beta]).unwrap();
                let v = poly.eval(&[0.0, 0.0, a]).unwrap();
                let sum: f64 = (0..=nb)
                    .map(|k| {
                        let c = binomial(nb, k) as f64;
                        (k as f64).powi(beta as i32)
                            * c
                            * a.powi(k as i32)
                            * (1.0 - a).powi((nb - k) as i32)
                    })
                    .sum();
                assert!((v - sum).abs() / 1.0f64.max(sum.abs()) < 1e-9, "β={beta} a={a}");
            }
        }
    }
}
