//! Basic semialgebraic set descriptions for X, A, Ω and the constraint
//! region K, plus the Slater ball augmentation.

use crate::poly::{Block, PolyError, Polynomial, VariableSpace};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("point dimension {got} does not match block dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate box: lo {lo} ≥ hi {hi} in coordinate {coord}")]
    DegenerateBox { coord: usize, lo: f64, hi: f64 },
    #[error("constraint polynomial uses variables outside the declared block")]
    ForeignVariables,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A basic semialgebraic set over one variable block: inequalities g ≥ 0 and
/// equalities h = 0 (equalities are lowered to inequality pairs when the
/// relaxation is assembled).
#[derive(Debug, Clone, PartialEq)]
pub struct SemialgebraicSet {
    space: VariableSpace,
    block: Block,
    inequalities: Vec<Polynomial>,
    equalities: Vec<Polynomial>,
    ball_radius_sq: Option<f64>,
    /// Present when the set was built from a box; used for scaling and grids.
    box_bounds: Option<Vec<(f64, f64)>>,
}

impl SemialgebraicSet {
    pub fn new(
        space: VariableSpace,
        block: Block,
        inequalities: Vec<Polynomial>,
        equalities: Vec<Polynomial>,
    ) -> Result<Self, SetError> {
        for g in inequalities.iter().chain(&equalities) {
            let on_block = g
                .terms()
                .all(|(m, _)| m.supported_on(&space, &[block]));
            if !on_block {
                return Err(SetError::ForeignVariables);
            }
        }
        Ok(Self {
            space,
            block,
            inequalities,
            equalities,
            ball_radius_sq: None,
            box_bounds: None,
        })
    }

    /// Free set (no constraints), e.g. Ω = ℝ^p.
    pub fn free(space: VariableSpace, block: Block) -> Self {
        Self {
            space,
            block,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            ball_radius_sq: None,
            box_bounds: None,
        }
    }

    /// Box as paired linear inequalities hi − v ≥ 0, v − lo ≥ 0.
    pub fn from_box(
        space: VariableSpace,
        block: Block,
        bounds: &[(f64, f64)],
    ) -> Result<Self, SetError> {
        if bounds.len() != space.block_len(block) {
            return Err(SetError::DimensionMismatch {
                expected: space.block_len(block),
                got: bounds.len(),
            });
        }
        let mut ineqs = Vec::new();
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if lo >= hi {
                return Err(SetError::DegenerateBox { coord: i, lo, hi });
            }
            let v = Polynomial::var(space, block, i)?;
            ineqs.push(Polynomial::constant(space, hi).sub(&v)?);
            ineqs.push(v.sub(&Polynomial::constant(space, lo))?);
        }
        let mut set = Self::new(space, block, ineqs, Vec::new())?;
        set.box_bounds = Some(bounds.to_vec());
        Ok(set)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }
    pub fn block(&self) -> Block {
        self.block
    }
    pub fn inequalities(&self) -> &[Polynomial] {
        &self.inequalities
    }
    pub fn equalities(&self) -> &[Polynomial] {
        &self.equalities
    }
    pub fn ball_radius_sq(&self) -> Option<f64> {
        self.ball_radius_sq
    }
    pub fn box_bounds(&self) -> Option<&[(f64, f64)]> {
        self.box_bounds.as_deref()
    }

    pub fn is_free(&self) -> bool {
        self.inequalities.is_empty() && self.equalities.is_empty()
    }

    /// Exact ball radius for a box: Σ max(lo², hi²).
    pub fn auto_ball_radius(bounds: &[(f64, f64)]) -> f64 {
        bounds.iter().map(|&(lo, hi)| (lo * lo).max(hi * hi)).sum()
    }

    /// Dimension of the block this set constrains.
    pub fn dim(&self) -> usize {
        self.space.block_len(self.block)
    }

    /// True iff all inequalities are ≥ −tol and all |equalities| ≤ tol at
    /// `point` (coordinates of this set's block only).
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool, SetError> {
        if point.len() != self.dim() {
            return Err(SetError::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        let full = self.embed_point(point);
        for g in &self.inequalities {
            if g.eval(&full)? < -tol {
                return Ok(false);
            }
        }
        for h in &self.equalities {
            if h.eval(&full)?.abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn embed_point(&self, point: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.space.dim()];
        let start = self.space.block_start(self.block);
        full[start..start + point.len()].copy_from_slice(point);
        full
    }
}

/// Prepend the ball constraint M − ‖·‖² ≥ 0 unless an identical constraint is
/// already present. Idempotent.
pub fn augment_ball(set: &SemialgebraicSet, m: f64) -> SemialgebraicSet {
    let ball = Polynomial::constant(*set.space(), m)
        .sub(&Polynomial::norm_sq(*set.space(), set.block()))
        .expect("same space");
    let mut out = set.clone();
    if out.inequalities.iter().any(|g| g == &ball) {
        out.ball_radius_sq = Some(m);
        return out;
    }
    out.inequalities.insert(0, ball);
    out.ball_radius_sq = Some(m);
    out
}

/// The region K: with one f, K = {(x,ω) ∈ X×Ω : f ≤ 0}; with several,
/// K = ∪_j K^j.
#[derive(Debug, Clone)]
pub struct ConstraintRegion {
    pub x_set: SemialgebraicSet,
    pub omega_set: SemialgebraicSet,
    pub f_list: Vec<Polynomial>,
}

impl ConstraintRegion {
    /// Membership of (x, ω) in K = ∪_j {f_j ≤ 0} ∩ X×Ω.
    pub fn contains(&self, x: &[f64], omega: &[f64], tol: f64) -> Result<bool, SetError> {
        if !self.x_set.contains(x, tol)? || !self.omega_set.contains(omega, tol)? {
            return Ok(false);
        }
        let mut point = vec![0.0; self.x_set.space().dim()];
        point[..x.len()].copy_from_slice(x);
        let os = self.x_set.space().block_start(Block::Omega);
        point[os..os + omega.len()].copy_from_slice(omega);
        for f in &self.f_list {
            if f.eval(&point)? <= tol {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> VariableSpace {
        VariableSpace::new(2, 1, 2).unwrap()
    }

    #[test]
    fn box_membership() {
        let s = SemialgebraicSet::from_box(space(), Block::X, &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert!(s.contains(&[0.0, 0.0], 0.0).unwrap());
        assert!(!s.contains(&[1.1, 0.0], 0.0).unwrap());
        let a = SemialgebraicSet::from_box(space(), Block::Param, &[(-0.1, 0.1), (0.8, 1.0)])
            .unwrap();
        assert!(a.contains(&[0.0, 0.9], 0.0).unwrap());
    }

    #[test]
    fn ball_idempotent_and_dedup() {
        // X = [−1,1] described by g = 1 − x², M = 1: ball equals the box bound
        let sp = VariableSpace::new(1, 1, 0).unwrap();
        let x = Polynomial::var(sp, Block::X, 0).unwrap();
        let g = Polynomial::constant(sp, 1.0).sub(&x.mul(&x).unwrap()).unwrap();
        let set = SemialgebraicSet::new(sp, Block::X, vec![g], vec![]).unwrap();
        let once = augment_ball(&set, 1.0);
        assert_eq!(once.inequalities().len(), 1);
        let twice = augment_ball(&once, 1.0);
        assert_eq!(twice, once);
        assert_eq!(once.ball_radius_sq(), Some(1.0));
    }

    #[test]
    fn ball_added_for_param_box() {
        let a = SemialgebraicSet::from_box(space(), Block::Param, &[(-0.1, 0.1), (0.8, 1.0)])
            .unwrap();
        let m = SemialgebraicSet::auto_ball_radius(&[(-0.1, 0.1), (0.8, 1.0)]);
        assert!((m - 1.01).abs() < 1e-15);
        let set = augment_ball(&a, m);
        assert_eq!(set.inequalities().len(), 5);
        // ball at the corner (0.1, 1.0) is active: 1.01 − 0.01 − 1 = 0
        assert!(set.contains(&[0.1, 1.0], 1e-12).unwrap());
    }

    #[test]
    fn contains_agrees_with_interval_checks() {
        let bounds = [(-1.0, 1.0), (-0.5, 2.0)];
        let s = SemialgebraicSet::from_box(space(), Block::X, &bounds).unwrap();
        let mut rng = 0x12345u64;
        for _ in 0..10_000 {
            rng = crate::special::splitmix64(rng, 1);
            let u = (rng >> 11) as f64 / (1u64 << 53) as f64;
            rng = crate::special::splitmix64(rng, 2);
            let v = (rng >> 11) as f64 / (1u64 << 53) as f64;
            let pt = [u * 4.0 - 2.0, v * 4.0 - 2.0];
            let direct = (bounds[0].0..=bounds[0].1).contains(&pt[0])
                && (bounds[1].0..=bounds[1].1).contains(&pt[1]);
            assert_eq!(s.contains(&pt, 0.0).unwrap(), direct);
        }
    }
}
