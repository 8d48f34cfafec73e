//! Problem descriptions: the decision box X, noise support Ω, family or
//! moment-box ambiguity over a, the constraint polynomial(s) f, and run
//! parameters. Also the affine box-to-[−1,1] scaling shared by assembly and
//! certificate extraction.

use crate::family::DistributionFamily;
use crate::poly::{Block, Polynomial, VariableSpace};
use crate::sets::{SemialgebraicSet, SetError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("epsilon must lie in (0,1), got {0}")]
    EpsilonRange(f64),
    #[error("degree must be an even integer ≥ 2, got {0}")]
    DegreeParity(u32),
    #[error("variant {variant:?} needs {expected} constraint polynomial(s), got {got}")]
    ConstraintCount {
        variant: Variant,
        expected: &'static str,
        got: usize,
    },
    #[error("variant {0:?} requires a distribution family")]
    MissingFamily(Variant),
    #[error("moment_box variant requires the moment-box ambiguity description")]
    MissingAmbiguity,
    #[error("moment_box ambiguity supports p ≤ 3, got p = {0}")]
    MomentBoxNoiseDim(usize),
    #[error("stokes variant requires a univariate Gaussian family")]
    StokesFamily,
    #[error("family noise dimension {family} does not match space p = {space}")]
    NoiseDimMismatch { family: usize, space: usize },
    #[error("family parameter dimension {family} does not match space t = {space}")]
    ParamDimMismatch { family: usize, space: usize },
    #[error("constraint polynomial must involve only (x, ω)")]
    ConstraintBlocks,
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Poly(#[from] crate::poly::PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Base,
    Stokes,
    Joint,
    MomentBox,
}

/// Truncation caps for the Stokes row family. `None` means the defaults:
/// beta_max = 2d − deg f − 2, gamma_max = 2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StokesCaps {
    pub beta_max: Option<i64>,
    pub gamma_max: Option<u32>,
}

/// First/second-moment ambiguity set of §-style: mean box and eigenvalue
/// bounds δ̲ ≤ Σ ≤ δ̄ (as principal-minor inequalities).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoxAmbiguity {
    pub mean_box: Vec<(f64, f64)>,
    pub delta: (f64, f64),
}

impl MomentBoxAmbiguity {
    pub fn noise_dim(&self) -> usize {
        self.mean_box.len()
    }

    pub fn param_dim(&self) -> usize {
        let p = self.noise_dim();
        p + p * (p + 1) / 2
    }

    /// Nominal per-coordinate bounds used for affine scaling: the mean box,
    /// then σ_ii ∈ [δ̲, δ̄] and σ_ij ∈ [−δ̄, δ̄] (upper triangle row-major).
    pub fn coordinate_bounds(&self) -> Vec<(f64, f64)> {
        let p = self.noise_dim();
        let (dlo, dhi) = self.delta;
        let mut out = self.mean_box.clone();
        for i in 0..p {
            for j in i..p {
                if i == j {
                    out.push((dlo, dhi));
                } else {
                    out.push((-dhi, dhi));
                }
            }
        }
        out
    }

    /// The ambiguity set as inequality polynomials over the a-block of
    /// `space`: mean-box sides, then principal-minor sums of Σ − δ̲I ⪰ 0 and
    /// δ̄I − Σ ⪰ 0.
    pub fn param_set(&self, space: VariableSpace) -> Result<SemialgebraicSet, ProblemError> {
        let p = self.noise_dim();
        let mut ineqs = Vec::new();
        for (i, &(lo, hi)) in self.mean_box.iter().enumerate() {
            let m = Polynomial::var(space, Block::Param, i)?;
            ineqs.push(Polynomial::constant(space, hi).sub(&m)?);
            ineqs.push(m.sub(&Polynomial::constant(space, lo))?);
        }
        let sigma = |i: usize, j: usize| -> Result<Polynomial, ProblemError> {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            let offset = i * p - i * i.saturating_sub(1) / 2 + (j - i);
            Ok(Polynomial::var(space, Block::Param, p + offset)?)
        };
        let (dlo, dhi) = self.delta;
        // B⁺ = Σ − δ̲I and B⁻ = δ̄I − Σ; emit the principal-minor sums
        // c₁(B), …, c_p(B) ≥ 0 of each (for p = 1 this is the δ box, for
        // p = 2 the trace and determinant bounds).
        for sign in [1.0f64, -1.0] {
            let shift = if sign > 0.0 { -dlo } else { dhi };
            let entry = |i: usize, j: usize| -> Result<Polynomial, ProblemError> {
                let base = sigma(i, j)?.scale(sign);
                if i == j {
                    Ok(base.add(&Polynomial::constant(space, shift))?)
                } else {
                    Ok(base)
                }
            };
            for k in 1..=p {
                ineqs.push(principal_minor_sum(space, p, k, &entry)?);
            }
        }
        Ok(SemialgebraicSet::new(space, Block::Param, ineqs, Vec::new())?)
    }
}

/// Σ of k×k principal minors of the symmetric matrix given entrywise.
fn principal_minor_sum(
    space: VariableSpace,
    p: usize,
    k: usize,
    entry: &dyn Fn(usize, usize) -> Result<Polynomial, ProblemError>,
) -> Result<Polynomial, ProblemError> {
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    pick(0, p, k, &mut cur, &mut subsets);
    let mut out = Polynomial::zero(space);
    for set in subsets {
        out = out.add(&determinant(space, &set, entry)?)?;
    }
    Ok(out)
}

fn pick(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..p {
        cur.push(i);
        pick(i + 1, p, k, cur, out);
        cur.pop();
    }
}

fn determinant(
    space: VariableSpace,
    idx: &[usize],
    entry: &dyn Fn(usize, usize) -> Result<Polynomial, ProblemError>,
) -> Result<Polynomial, ProblemError> {
    // Leibniz over k ≤ 3
    let k = idx.len();
    let perms: Vec<(Vec<usize>, f64)> = match k {
        1 => vec![(vec![0], 1.0)],
        2 => vec![(vec![0, 1], 1.0), (vec![1, 0], -1.0)],
        3 => vec![
            (vec![0, 1, 2], 1.0),
            (vec![1, 2, 0], 1.0),
            (vec![2, 0, 1], 1.0),
            (vec![2, 1, 0], -1.0),
            (vec![1, 0, 2], -1.0),
            (vec![0, 2, 1], -1.0),
        ],
        _ => unreachable!("p ≤ 3"),
    };
    let mut out = Polynomial::zero(space);
    for (perm, sign) in perms {
        let mut term = Polynomial::constant(space, sign);
        for (r, &c) in perm.iter().enumerate() {
            term = term.mul(&entry(idx[r], idx[c])?)?;
        }
        out = out.add(&term)?;
    }
    Ok(out)
}

/// A full problem instance in original (unscaled) coordinates.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub space: VariableSpace,
    /// X as a box (built-in Lebesgue moments); general X needs a user
    /// moment table through the config layer.
    pub x_box: Vec<(f64, f64)>,
    /// Ω as a box, or None for ℝ^p.
    pub omega_box: Option<Vec<(f64, f64)>>,
    pub f_list: Vec<Polynomial>,
    pub family: Option<DistributionFamily>,
    pub ambiguity: Option<MomentBoxAmbiguity>,
    pub epsilon: f64,
    /// Even bound on moment degrees (the certificate w_d has this degree);
    /// the relaxation half-order is degree/2.
    pub degree: u32,
    pub variant: Variant,
    pub stokes: StokesCaps,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn half_order(&self) -> u32 {
        self.degree / 2
    }

    /// Variant-specific preconditions, enforced at parse time.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ProblemError::EpsilonRange(self.epsilon));
        }
        if self.degree < 2 || self.degree % 2 != 0 {
            return Err(ProblemError::DegreeParity(self.degree));
        }
        for f in &self.f_list {
            let ok = f
                .terms()
                .all(|(m, _)| m.supported_on(&self.space, &[Block::X, Block::Omega]));
            if !ok {
                return Err(ProblemError::ConstraintBlocks);
            }
        }
        match self.variant {
            Variant::Base | Variant::Stokes => {
                if self.f_list.len() != 1 {
                    return Err(ProblemError::ConstraintCount {
                        variant: self.variant,
                        expected: "exactly 1",
                        got: self.f_list.len(),
                    });
                }
            }
            Variant::Joint => {
                if self.f_list.len() < 2 {
                    return Err(ProblemError::ConstraintCount {
                        variant: self.variant,
                        expected: "at least 2",
                        got: self.f_list.len(),
                    });
                }
            }
            Variant::MomentBox => {
                if self.f_list.len() != 1 {
                    return Err(ProblemError::ConstraintCount {
                        variant: self.variant,
                        expected: "exactly 1",
                        got: self.f_list.len(),
                    });
                }
                let amb = self
                    .ambiguity
                    .as_ref()
                    .ok_or(ProblemError::MissingAmbiguity)?;
                if amb.noise_dim() > 3 {
                    return Err(ProblemError::MomentBoxNoiseDim(amb.noise_dim()));
                }
                if amb.noise_dim() != self.space.p() {
                    return Err(ProblemError::NoiseDimMismatch {
                        family: amb.noise_dim(),
                        space: self.space.p(),
                    });
                }
                if amb.param_dim() != self.space.t() {
                    return Err(ProblemError::ParamDimMismatch {
                        family: amb.param_dim(),
                        space: self.space.t(),
                    });
                }
            }
        }
        if matches!(self.variant, Variant::Base | Variant::Stokes | Variant::Joint) {
            let family = self
                .family
                .as_ref()
                .ok_or(ProblemError::MissingFamily(self.variant))?;
            if family.noise_dim() != self.space.p() {
                return Err(ProblemError::NoiseDimMismatch {
                    family: family.noise_dim(),
                    space: self.space.p(),
                });
            }
            if family.param_dim() != self.space.t() {
                return Err(ProblemError::ParamDimMismatch {
                    family: family.param_dim(),
                    space: self.space.t(),
                });
            }
            if self.variant == Variant::Stokes {
                let gaussian1d = matches!(
                    family.kind,
                    crate::family::FamilyKind::GaussianUnivariate { .. }
                );
                if !gaussian1d || self.space.p() != 1 {
                    return Err(ProblemError::StokesFamily);
                }
            }
        }
        Ok(())
    }

    /// Nominal bounds for the a-block in original coordinates (the family's
    /// parameter box or the ambiguity coordinate bounds).
    pub fn a_bounds(&self) -> Option<Vec<(f64, f64)>> {
        if let Some(amb) = &self.ambiguity {
            return Some(amb.coordinate_bounds());
        }
        self.family
            .as_ref()
            .and_then(|f| f.param_set.box_bounds().map(|b| b.to_vec()))
    }
}

/// Per-coordinate affine map v = scale·ṽ + shift between scaled and original
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    /// Map a box onto [−1,1]^dim.
    pub fn from_box(bounds: &[(f64, f64)]) -> Self {
        let scale = bounds.iter().map(|&(lo, hi)| 0.5 * (hi - lo)).collect();
        let shift = bounds.iter().map(|&(lo, hi)| 0.5 * (hi + lo)).collect();
        Self { scale, shift }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Scaled → original.
    pub fn to_original(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(&v, (&s, &c))| s * v + c)
            .collect()
    }

    /// Original → scaled.
    pub fn to_scaled(&self, original: &[f64]) -> Vec<f64> {
        original
            .iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(&v, (&s, &c))| (v - c) / s)
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0) && self.shift.iter().all(|&c| c == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_round_trip() {
        let map = AffineMap::from_box(&[(-0.1, 0.1), (0.8, 1.0)]);
        let orig = vec![0.05, 0.93];
        let scaled = map.to_scaled(&orig);
        assert!(scaled.iter().all(|v| v.abs() <= 1.0));
        let back = map.to_original(&scaled);
        for (a, b) in orig.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn moment_box_p1_matches_box() {
        let amb = MomentBoxAmbiguity {
            mean_box: vec![(-0.1, 0.1)],
            delta: (0.64, 1.0),
        };
        assert_eq!(amb.param_dim(), 2);
        let space = VariableSpace::new(1, 1, 2).unwrap();
        let set = amb.param_set(space).unwrap();
        // m-box sides and δ̲ ≤ σ ≤ δ̄
        assert_eq!(set.inequalities().len(), 4);
        assert!(set.contains(&[0.0, 0.8], 0.0).unwrap());
        assert!(!set.contains(&[0.0, 0.5], 0.0).unwrap());
        assert!(!set.contains(&[0.2, 0.8], 0.0).unwrap());
    }

    #[test]
    fn moment_box_p2_matches_paper_display() {
        let amb = MomentBoxAmbiguity {
            mean_box: vec![(-0.1, 0.1), (-0.2, 0.2)],
            delta: (0.5, 1.5),
        };
        let space = VariableSpace::new(1, 2, 5).unwrap();
        let set = amb.param_set(space).unwrap();
        // 4 mean sides + trace pair + determinant pair
        assert_eq!(set.inequalities().len(), 8);
        let at = |m1: f64, m2: f64, s11: f64, s12: f64, s22: f64| {
            set.contains(&[m1, m2, s11, s12, s22], 1e-12).unwrap()
        };
        // Σ = I is inside
        assert!(at(0.0, 0.0, 1.0, 0.0, 1.0));
        // trace bound 2δ̲ ≤ σ11+σ22: fails for Σ = 0.4·I
        assert!(!at(0.0, 0.0, 0.4, 0.0, 0.4));
        // determinant bound (δ̄−σ11)(δ̄−σ22) − σ12² ≥ 0: fails for big σ12
        assert!(!at(0.0, 0.0, 1.0, 0.6, 1.0));
        // and the polynomials are exactly the display's dets at sample points
        let det_hi = set
            .inequalities()
            .iter()
            .filter(|g| g.degree() == 2)
            .count();
        assert_eq!(det_hi, 2);
    }

    #[test]
    fn validation_errors() {
        let space = VariableSpace::new(1, 1, 2).unwrap();
        let x = Polynomial::var(space, Block::X, 0).unwrap();
        let w = Polynomial::var(space, Block::Omega, 0).unwrap();
        let f = x.sub(&w).unwrap();
        let a_set = SemialgebraicSet::from_box(space, Block::Param, &[(-0.1, 0.1), (0.8, 1.0)])
            .unwrap();
        let family = DistributionFamily {
            kind: crate::family::FamilyKind::GaussianUnivariate { fixed_mean: None },
            param_set: a_set,
        };
        let mut spec = ProblemSpec {
            space,
            x_box: vec![(-1.0, 1.0)],
            omega_box: None,
            f_list: vec![f],
            family: Some(family),
            ambiguity: None,
            epsilon: 0.3,
            degree: 8,
            variant: Variant::Stokes,
            stokes: StokesCaps::default(),
            seed: 0,
        };
        assert!(spec.validate().is_ok());
        spec.epsilon = 1.5;
        assert!(matches!(spec.validate(), Err(ProblemError::EpsilonRange(_))));
        spec.epsilon = 0.3;
        spec.degree = 7;
        assert!(matches!(spec.validate(), Err(ProblemError::DegreeParity(_))));
        spec.degree = 8;
        spec.variant = Variant::Joint;
        assert!(matches!(
            spec.validate(),
            Err(ProblemError::ConstraintCount { .. })
        ));
    }
}
