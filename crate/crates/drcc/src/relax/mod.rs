//! Assembly of the degree-d moment-SDP relaxations: base, Stokes-augmented,
//! joint chance constraints, and the first/second-moment (moment-box)
//! ambiguity variant.
//!
//! Everything is assembled in scaled coordinates (x and a boxes mapped onto
//! [−1,1]) with the affine back-maps carried along for certificate
//! extraction.

mod builders;
pub mod witness;

pub use builders::{build_base, build_joint, build_moment_box, build_stokes, build_union};

use crate::family::FamilyError;
use crate::poly::{enumerate_monomials, Block, Monomial, PolyError, Polynomial, VariableSpace};
use crate::problem::{AffineMap, ProblemSpec, ProblemError, Variant};
use crate::sets::{augment_ball, SemialgebraicSet, SetError};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("relaxation half-order {d} is below d_min = {d_min}")]
    BelowMinimumOrder { d: u32, d_min: u32 },
    #[error("moment map has no usable entry for β = {0:?}")]
    CoverageGap(Vec<u32>),
    #[error("joint build needs at least two constraints; use build_base for a single f")]
    SingleConstraintJoint,
    #[error("builder requires exactly one constraint polynomial, got {0}")]
    NotSingleConstraint(usize),
    #[error("X is not a box and no Lebesgue moment table was supplied")]
    MissingLebesgue,
    #[error("degenerate box: lo {lo} ≥ hi {hi}")]
    DegenerateBox { lo: f64, hi: f64 },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Set(#[from] SetError),
}

/// Moments of the normalized Lebesgue measure on X, keyed by x-exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct LebesgueMoments {
    pub dim: usize,
    pub map: BTreeMap<Vec<u8>, f64>,
}

impl LebesgueMoments {
    pub fn get(&self, alpha: &[u8]) -> Option<f64> {
        self.map.get(alpha).copied()
    }
}

/// λ_α = ∏ᵢ (hiᵢ^{αᵢ+1} − loᵢ^{αᵢ+1}) / ((αᵢ+1)(hiᵢ − loᵢ)) for all
/// |α| ≤ max_degree.
pub fn lebesgue_box_moments(
    bounds: &[(f64, f64)],
    max_degree: u32,
) -> Result<LebesgueMoments, RelaxError> {
    for &(lo, hi) in bounds {
        if lo >= hi {
            return Err(RelaxError::DegenerateBox { lo, hi });
        }
    }
    let dim = bounds.len();
    let mut map = BTreeMap::new();
    let mut alpha = vec![0u8; dim];
    loop {
        let deg: u32 = alpha.iter().map(|&a| a as u32).sum();
        if deg <= max_degree {
            let lam: f64 = alpha
                .iter()
                .zip(bounds)
                .map(|(&a, &(lo, hi))| {
                    let k = a as i32 + 1;
                    (hi.powi(k) - lo.powi(k)) / (k as f64 * (hi - lo))
                })
                .product();
            map.insert(alpha.clone(), lam);
        }
        if !next_multi_index(&mut alpha, max_degree as u8) {
            break;
        }
    }
    Ok(LebesgueMoments { dim, map })
}

fn next_multi_index(alpha: &mut [u8], cap: u8) -> bool {
    for a in alpha.iter_mut() {
        if *a < cap {
            *a += 1;
            return true;
        }
        *a = 0;
    }
    false
}

/// Measure labels across all variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockLabel {
    /// φ on K (single constraint) …
    Y,
    /// … or on K^j in the joint variant.
    YJ(usize),
    /// Slack measure on X×Ω.
    U,
    /// ψ on X×A.
    V,
    /// Stokes measure ν on K×A.
    Z1,
    /// ψ − ν_{x,a} on X×A.
    Z2,
    /// Moment-box slack ν on X×Ω.
    Nu,
    /// Moment-box total μ on X×Ω.
    Mu,
}

/// One truncated moment sequence: all monomials of its variable blocks up to
/// degree 2d, plus the offset into the global variable vector.
#[derive(Debug, Clone)]
pub struct MeasureBlock {
    pub label: BlockLabel,
    pub var_blocks: Vec<Block>,
    pub monomials: Vec<Monomial>,
    pub index: HashMap<Monomial, usize>,
    pub offset: usize,
}

impl MeasureBlock {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn global(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).map(|i| self.offset + i)
    }
}

/// A moment or localizing matrix: entry (r,c) is
/// Σ_t g_t · seq[ m_r·m_c·κ_t ], stored through the distinct products
/// m_r·m_c ("sum monomials") so the solver can exploit the shared structure.
#[derive(Debug, Clone)]
pub struct PsdBlockSpec {
    pub measure: usize,
    pub multiplier: Polynomial,
    pub order: u32,
    pub row_monomials: Vec<Monomial>,
    pub sum_monomials: Vec<Monomial>,
    /// Upper-triangle cells (r ≤ c) grouped by sum-monomial id.
    pub cells_by_sum: Vec<Vec<(u32, u32)>>,
    pub term_coefs: Vec<f64>,
    /// [sum id][term] → block-local sequence index.
    pub vars_by_sum_term: Vec<Vec<usize>>,
}

impl PsdBlockSpec {
    pub fn dim(&self) -> usize {
        self.row_monomials.len()
    }

    /// Materialize the matrix at a full variable vector (row-major).
    pub fn dense(&self, offset: usize, m: &[f64]) -> Vec<f64> {
        let s = self.dim();
        let mut out = vec![0.0; s * s];
        for (sid, cells) in self.cells_by_sum.iter().enumerate() {
            let mut val = 0.0;
            for (t, &c) in self.term_coefs.iter().enumerate() {
                val += c * m[offset + self.vars_by_sum_term[sid][t]];
            }
            for &(r, c) in cells {
                out[r as usize * s + c as usize] = val;
                out[c as usize * s + r as usize] = val;
            }
        }
        out
    }
}

/// Provenance of an equality row; drives dual-certificate extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum RowKind {
    /// L_{y(+…)+u}(x^α ω^β) − L_v(x^α p_β(a)) = 0.
    Coupling { alpha: Vec<u8>, beta: Vec<u8> },
    /// L_◦(x^α) = λ_α; the w_d coefficients are these rows' multipliers.
    LambdaPin { alpha: Vec<u8>, measure: BlockLabel },
    /// L_{z¹}(x^α ω^β) = L_y(x^α ω^β).
    StokesTieOmega { alpha: Vec<u8>, beta: Vec<u8> },
    /// L_{z¹}(x^α a^γ) + L_{z²}(x^α a^γ) = L_v(x^α a^γ).
    StokesTieParam { alpha: Vec<u8>, gamma: Vec<u8> },
    /// L_{z¹}(x^α a^γ q_β) = 0.
    StokesRow {
        alpha: Vec<u8>,
        gamma: Vec<u8>,
        beta: u32,
    },
    /// φ + ν − μ = 0 momentwise (moment-box).
    MassBalance { alpha: Vec<u8>, beta: Vec<u8> },
    /// First/second-moment couplings of the moment-box variant.
    MomentCoupling {
        alpha: Vec<u8>,
        i: usize,
        j: Option<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct EqualityRow {
    pub kind: RowKind,
    /// (global variable index, coefficient), deduplicated and sorted.
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Scaled problem data: sets and polynomials in the scaled coordinates, the
/// affine back-maps, and the original spec.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub space: VariableSpace,
    pub x_set: SemialgebraicSet,
    pub omega_set: SemialgebraicSet,
    pub a_set: SemialgebraicSet,
    pub f_list: Vec<Polynomial>,
    pub lambda: LebesgueMoments,
    pub moment_polys: BTreeMap<Vec<u32>, Polynomial>,
    pub x_map: AffineMap,
    pub a_map: AffineMap,
    pub original: ProblemSpec,
}

/// The assembled SDP: measure blocks, PSD block specs, equality rows, and
/// the objective (y₀₀, or Σ_j y^j₀₀ for the joint variant).
#[derive(Debug, Clone)]
pub struct MomentRelaxation {
    pub half_order: u32,
    pub variant: Variant,
    pub space: VariableSpace,
    pub blocks: Vec<MeasureBlock>,
    pub psd: Vec<PsdBlockSpec>,
    pub equalities: Vec<EqualityRow>,
    pub objective: Vec<(usize, f64)>,
    pub num_vars: usize,
    pub problem: ScaledProblem,
}

impl MomentRelaxation {
    pub fn block(&self, label: BlockLabel) -> Option<&MeasureBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    /// Label-blind structural signature: block sizes, PSD cell structure and
    /// coefficients, and sorted equality rows. Two relaxations with equal
    /// signatures impose identical constraint matrices after relabeling.
    pub fn canonical_signature(&self) -> Vec<u64> {
        use std::hash::{Hash, Hasher};
        let mut sig = Vec::new();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.num_vars.hash(&mut h);
        for b in &self.blocks {
            b.monomials.len().hash(&mut h);
            b.var_blocks.hash(&mut h);
        }
        sig.push(h.finish());
        for p in &self.psd {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            p.measure.hash(&mut h);
            p.order.hash(&mut h);
            p.row_monomials.len().hash(&mut h);
            for (s, cells) in p.cells_by_sum.iter().enumerate() {
                s.hash(&mut h);
                cells.hash(&mut h);
            }
            for c in &p.term_coefs {
                c.to_bits().hash(&mut h);
            }
            p.vars_by_sum_term.hash(&mut h);
            sig.push(h.finish());
        }
        let mut rows: Vec<u64> = self
            .equalities
            .iter()
            .map(|r| {
                let mut h = std::collections::hash_map::DefaultHasher::new();
                for (i, c) in &r.terms {
                    i.hash(&mut h);
                    c.to_bits().hash(&mut h);
                }
                r.rhs.to_bits().hash(&mut h);
                h.finish()
            })
            .collect();
        rows.sort_unstable();
        sig.extend(rows);
        sig
    }
}

/// d_min: smallest half-order such that 2·d_min covers the largest degree
/// among the polynomials describing K, Ω and A.
pub fn minimum_half_order(scaled: &ScaledProblem) -> u32 {
    let mut max_deg = 1u32;
    for f in &scaled.f_list {
        max_deg = max_deg.max(f.degree());
    }
    for set in [&scaled.x_set, &scaled.omega_set, &scaled.a_set] {
        for g in set.inequalities().iter().chain(set.equalities()) {
            max_deg = max_deg.max(g.degree());
        }
    }
    max_deg.div_ceil(2)
}

/// Map the spec's boxes onto [−1,1], substitute f and the moment map, and
/// ball-augment the scaled X and A descriptions (ω is never rescaled; its
/// support is either ℝ^p or kept as given).
pub fn scale_problem(spec: &ProblemSpec, two_d: u32) -> Result<ScaledProblem, RelaxError> {
    let space = spec.space;
    let x_map = AffineMap::from_box(&spec.x_box);
    let a_map = match spec.a_bounds() {
        Some(bounds) if !bounds.is_empty() => AffineMap::from_box(&bounds),
        _ => AffineMap::identity(space.t()),
    };

    let mut maps = vec![(1.0, 0.0); space.dim()];
    for i in 0..space.n() {
        maps[i] = (x_map.scale[i], x_map.shift[i]);
    }
    for i in 0..space.t() {
        let v = space.block_start(Block::Param) + i;
        maps[v] = (a_map.scale[i], a_map.shift[i]);
    }

    let unit_box = vec![(-1.0, 1.0); space.n()];
    let x_set = augment_ball(
        &SemialgebraicSet::from_box(space, Block::X, &unit_box)?,
        space.n() as f64,
    );

    let omega_set = match &spec.omega_box {
        Some(bounds) => {
            let m = SemialgebraicSet::auto_ball_radius(bounds);
            augment_ball(
                &SemialgebraicSet::from_box(space, Block::Omega, bounds)?,
                m,
            )
        }
        None => SemialgebraicSet::free(space, Block::Omega),
    };

    let a_set = if let Some(amb) = &spec.ambiguity {
        let raw = amb.param_set(space)?;
        let ineqs = raw
            .inequalities()
            .iter()
            .map(|g| g.substitute_affine(&maps))
            .collect::<Result<Vec<_>, _>>()?;
        augment_ball(
            &SemialgebraicSet::new(space, Block::Param, ineqs, Vec::new())?,
            space.t() as f64,
        )
    } else if let Some(family) = &spec.family {
        let raw = &family.param_set;
        let ineqs = raw
            .inequalities()
            .iter()
            .map(|g| g.substitute_affine(&maps))
            .collect::<Result<Vec<_>, _>>()?;
        let eqs = raw
            .equalities()
            .iter()
            .map(|g| g.substitute_affine(&maps))
            .collect::<Result<Vec<_>, _>>()?;
        let m = if a_map.is_identity() {
            raw.ball_radius_sq()
                .unwrap_or_else(|| space.t() as f64)
        } else {
            space.t() as f64
        };
        augment_ball(&SemialgebraicSet::new(space, Block::Param, ineqs, eqs)?, m)
    } else {
        SemialgebraicSet::free(space, Block::Param)
    };

    let f_list = spec
        .f_list
        .iter()
        .map(|f| f.substitute_affine(&maps))
        .collect::<Result<Vec<_>, _>>()?;

    let lambda = lebesgue_box_moments(&vec![(-1.0, 1.0); space.n()], two_d)?;

    let mut moment_polys = BTreeMap::new();
    if let Some(family) = &spec.family {
        for beta_mono in enumerate_monomials(&space, &[Block::Omega], two_d) {
            let os = space.block_start(Block::Omega);
            let beta: Vec<u32> = (0..space.p())
                .map(|i| beta_mono.exp(os + i) as u32)
                .collect();
            let p = family.moment_polynomial(&space, &beta)?;
            let scaled = p.substitute_affine(&maps)?;
            moment_polys.insert(beta, scaled);
        }
    }

    Ok(ScaledProblem {
        space,
        x_set,
        omega_set,
        a_set,
        f_list,
        lambda,
        moment_polys,
        x_map,
        a_map,
        original: spec.clone(),
    })
}

/// Incremental relaxation assembler shared by the variant builders.
pub(crate) struct Assembler {
    pub space: VariableSpace,
    pub two_d: u32,
    pub blocks: Vec<MeasureBlock>,
    pub psd: Vec<PsdBlockSpec>,
    pub rows: Vec<EqualityRow>,
    pub num_vars: usize,
}

impl Assembler {
    pub fn new(space: VariableSpace, two_d: u32) -> Self {
        Self {
            space,
            two_d,
            blocks: Vec::new(),
            psd: Vec::new(),
            rows: Vec::new(),
            num_vars: 0,
        }
    }

    pub fn add_block(&mut self, label: BlockLabel, var_blocks: Vec<Block>) -> usize {
        let monomials = enumerate_monomials(&self.space, &var_blocks, self.two_d);
        let index = monomials
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let block = MeasureBlock {
            label,
            var_blocks,
            offset: self.num_vars,
            index,
            monomials,
        };
        self.num_vars += block.len();
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    /// Moment matrix (multiplier 1) of order d for `block`.
    pub fn add_moment_matrix(&mut self, block: usize, d: u32) {
        self.add_localizer(block, Polynomial::constant(self.space, 1.0), d);
    }

    /// Localizing matrix M_{d − ⌈deg g/2⌉}(g·seq).
    pub fn add_localizer(&mut self, block: usize, g: Polynomial, d: u32) {
        let dg = g.degree().div_ceil(2);
        let order = d.saturating_sub(dg);
        let mb = &self.blocks[block];
        let rows = enumerate_monomials(&self.space, &mb.var_blocks, order);
        let mut sum_index: HashMap<Monomial, usize> = HashMap::new();
        let mut sum_monomials = Vec::new();
        let mut cells_by_sum: Vec<Vec<(u32, u32)>> = Vec::new();
        for r in 0..rows.len() {
            for c in r..rows.len() {
                let s = rows[r].mul(&rows[c]);
                let id = *sum_index.entry(s.clone()).or_insert_with(|| {
                    sum_monomials.push(s.clone());
                    cells_by_sum.push(Vec::new());
                    sum_monomials.len() - 1
                });
                cells_by_sum[id].push((r as u32, c as u32));
            }
        }
        let term_coefs: Vec<f64> = g.terms().map(|(_, &c)| c).collect();
        let term_monos: Vec<Monomial> = g.terms().map(|(m, _)| m.clone()).collect();
        let vars_by_sum_term: Vec<Vec<usize>> = sum_monomials
            .iter()
            .map(|s| {
                term_monos
                    .iter()
                    .map(|t| {
                        *mb.index
                            .get(&s.mul(t))
                            .expect("localizer product within degree 2d")
                    })
                    .collect()
            })
            .collect();
        self.psd.push(PsdBlockSpec {
            measure: block,
            multiplier: g,
            order,
            row_monomials: rows,
            sum_monomials,
            cells_by_sum,
            term_coefs,
            vars_by_sum_term,
        });
    }

    /// Moment matrix plus localizers for every listed set (inequalities, and
    /// equalities lowered as (h, −h) pairs) and extra multipliers such as −f.
    pub fn add_measure_psd(
        &mut self,
        block: usize,
        d: u32,
        extra: &[Polynomial],
        sets: &[&SemialgebraicSet],
    ) {
        self.add_moment_matrix(block, d);
        for g in extra {
            self.add_localizer(block, g.clone(), d);
        }
        for set in sets {
            for g in set.inequalities() {
                self.add_localizer(block, g.clone(), d);
            }
            for h in set.equalities() {
                self.add_localizer(block, h.clone(), d);
                self.add_localizer(block, h.scale(-1.0), d);
            }
        }
    }

    /// Append an equality row; terms are (block id, monomial, coefficient).
    pub fn add_row(&mut self, kind: RowKind, terms: &[(usize, Monomial, f64)], rhs: f64) {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (b, m, c) in terms {
            let g = self.blocks[*b]
                .global(m)
                .expect("row monomial within block degree");
            *acc.entry(g).or_insert(0.0) += c;
        }
        let terms: Vec<(usize, f64)> = acc
            .into_iter()
            .filter(|(_, c)| c.abs() >= crate::poly::COEF_EPS)
            .collect();
        if terms.is_empty() && rhs == 0.0 {
            return;
        }
        self.rows.push(EqualityRow { kind, terms, rhs });
    }

    pub fn finish(
        self,
        half_order: u32,
        variant: Variant,
        objective: Vec<(usize, f64)>,
        problem: ScaledProblem,
    ) -> MomentRelaxation {
        MomentRelaxation {
            half_order,
            variant,
            space: self.space,
            blocks: self.blocks,
            psd: self.psd,
            equalities: self.rows,
            objective,
            num_vars: self.num_vars,
            problem,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebesgue_examples() {
        let lam = lebesgue_box_moments(&[(-1.0, 1.0)], 4).unwrap();
        assert!((lam.get(&[2]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(lam.get(&[1]).unwrap(), 0.0);
        let lam2 = lebesgue_box_moments(&[(-1.0, 1.0), (-1.0, 1.0)], 4).unwrap();
        assert!((lam2.get(&[2, 2]).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        // numeric cross-check on an asymmetric box
        let lam3 = lebesgue_box_moments(&[(0.25, 1.75)], 3).unwrap();
        let q = crate::special::adaptive_simpson(&|x: f64| x * x * x, 0.25, 1.75, 1e-13) / 1.5;
        assert!((lam3.get(&[3]).unwrap() - q).abs() < 1e-12);
        assert!(lebesgue_box_moments(&[(1.0, 1.0)], 2).is_err());
    }
}
