//! Sparse multivariate polynomials over the partitioned variable blocks
//! (x, ω, a), with graded-lexicographic monomial ordering shared by every
//! module that builds index maps.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const COEF_EPS: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable spaces differ: {0:?} vs {1:?}")]
    SpaceMismatch(VariableSpace, VariableSpace),
    #[error("invalid variable space: n={n}, p={p}, t={t} (need n ≥ 1, p ≥ 1)")]
    InvalidSpace { n: usize, p: usize, t: usize },
    #[error("variable index {index} out of range for block {block:?} (size {size})")]
    VariableOutOfRange {
        block: Block,
        index: usize,
        size: usize,
    },
    #[error("stokes polynomial requires univariate noise (p = 1), got p = {0}")]
    StokesNoiseDim(usize),
}

/// The three variable blocks: decisions x, noise ω, family parameters a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    X,
    Omega,
    Param,
}

/// Dimensions of the three blocks; immutable after creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableSpace {
    n: usize,
    p: usize,
    t: usize,
}

impl VariableSpace {
    pub fn new(n: usize, p: usize, t: usize) -> Result<Self, PolyError> {
        if n < 1 || p < 1 {
            return Err(PolyError::InvalidSpace { n, p, t });
        }
        Ok(Self { n, p, t })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn t(&self) -> usize {
        self.t
    }
    pub fn dim(&self) -> usize {
        self.n + self.p + self.t
    }

    pub fn block_len(&self, block: Block) -> usize {
        match block {
            Block::X => self.n,
            Block::Omega => self.p,
            Block::Param => self.t,
        }
    }

    pub fn block_start(&self, block: Block) -> usize {
        match block {
            Block::X => 0,
            Block::Omega => self.n,
            Block::Param => self.n + self.p,
        }
    }

    /// Global index of variable `i` within `block`.
    pub fn var(&self, block: Block, i: usize) -> Result<usize, PolyError> {
        let size = self.block_len(block);
        if i >= size {
            return Err(PolyError::VariableOutOfRange {
                block,
                index: i,
                size,
            });
        }
        Ok(self.block_start(block) + i)
    }

    /// Global variable indices covered by the listed blocks, in block order.
    pub fn block_indices(&self, blocks: &[Block]) -> Vec<usize> {
        let mut idx = Vec::new();
        for b in [Block::X, Block::Omega, Block::Param] {
            if blocks.contains(&b) {
                let s = self.block_start(b);
                idx.extend(s..s + self.block_len(b));
            }
        }
        idx
    }
}

/// Exponent vector over a full variable space, ordered (x…, ω…, a…).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    exps: Vec<u8>,
}

impl Monomial {
    pub fn one(space: &VariableSpace) -> Self {
        Self {
            exps: vec![0; space.dim()],
        }
    }

    pub fn from_exps(exps: Vec<u8>) -> Self {
        Self { exps }
    }

    pub fn exps(&self) -> &[u8] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum()
    }

    /// Total degree restricted to the given blocks.
    pub fn degree_in(&self, space: &VariableSpace, blocks: &[Block]) -> u32 {
        space
            .block_indices(blocks)
            .into_iter()
            .map(|i| self.exps[i] as u32)
            .sum()
    }

    pub fn exp(&self, var: usize) -> u8 {
        self.exps[var]
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let exps = self
            .exps
            .iter()
            .zip(&other.exps)
            .map(|(a, b)| a + b)
            .collect();
        Monomial { exps }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(point)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// True when every exponent outside the listed blocks is zero.
    pub fn supported_on(&self, space: &VariableSpace, blocks: &[Block]) -> bool {
        let allowed = space.block_indices(blocks);
        self.exps
            .iter()
            .enumerate()
            .all(|(i, &e)| e == 0 || allowed.contains(&i))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Graded lexicographic order with block order (x, ω, a): lower total degree
/// first, then the monomial with the larger exponent on the earliest
/// differing variable first (so x₁² < x₁x₂ < x₂² reads in listing order).
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let d0 = self.degree();
        let d1 = other.degree();
        if d0 != d1 {
            return d0.cmp(&d1);
        }
        for (a, b) in self.exps.iter().zip(&other.exps) {
            if a != b {
                return b.cmp(a);
            }
        }
        Ordering::Equal
    }
}

/// All monomials over the selected blocks with total degree ≤ `max_degree`,
/// in graded lexicographic order. Length is C(v + max_degree, max_degree)
/// where v is the total selected dimension.
pub fn enumerate_monomials(
    space: &VariableSpace,
    blocks: &[Block],
    max_degree: u32,
) -> Vec<Monomial> {
    let idx = space.block_indices(blocks);
    let mut out = Vec::with_capacity(binomial(idx.len() as u64 + max_degree as u64, max_degree as u64) as usize);
    let mut exps = vec![0u8; space.dim()];
    fill(space, &idx, 0, max_degree, &mut exps, &mut out);
    out.sort();
    out
}

fn fill(
    space: &VariableSpace,
    idx: &[usize],
    pos: usize,
    remaining: u32,
    exps: &mut Vec<u8>,
    out: &mut Vec<Monomial>,
) {
    if pos == idx.len() {
        out.push(Monomial::from_exps(exps.clone()));
        return;
    }
    for e in 0..=remaining {
        exps[idx[pos]] = e as u8;
        fill(space, idx, pos + 1, remaining - e, exps, out);
    }
    exps[idx[pos]] = 0;
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Sparse polynomial: map from monomial to coefficient, zero coefficients
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    space: VariableSpace,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(space: VariableSpace) -> Self {
        Self {
            space,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: VariableSpace, c: f64) -> Self {
        let mut p = Self::zero(space);
        p.add_term(Monomial::one(&space), c);
        p
    }

    /// The monomial for a single variable.
    pub fn var(space: VariableSpace, block: Block, i: usize) -> Result<Self, PolyError> {
        let v = space.var(block, i)?;
        let mut exps = vec![0u8; space.dim()];
        exps[v] = 1;
        let mut p = Self::zero(space);
        p.add_term(Monomial::from_exps(exps), 1.0);
        Ok(p)
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &f64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max total degree over terms; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.exps.len(), self.space.dim());
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                let v = e.get() + c;
                if v.abs() < COEF_EPS {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            Entry::Vacant(e) => {
                if c.abs() >= COEF_EPS {
                    e.insert(c);
                }
            }
        }
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        if self.space != other.space {
            return Err(PolyError::SpaceMismatch(self.space, other.space));
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.space);
        if s == 0.0 {
            return out;
        }
        for (m, c) in &self.terms {
            let v = c * s;
            if v.abs() >= COEF_EPS {
                out.terms.insert(m.clone(), v);
            }
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        if self.space != other.space {
            return Err(PolyError::SpaceMismatch(self.space, other.space));
        }
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                *terms.entry(m1.mul(m2)).or_insert(0.0) += c1 * c2;
            }
        }
        terms.retain(|_, c| c.abs() >= COEF_EPS);
        Ok(Polynomial {
            space: self.space,
            terms,
        })
    }

    pub fn mul_monomial(&self, m: &Monomial, c: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.space);
        for (m1, c1) in &self.terms {
            let v = c1 * c;
            if v.abs() >= COEF_EPS {
                out.terms.insert(m1.mul(m), v);
            }
        }
        out
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.space.dim() {
            return Err(PolyError::DimensionMismatch {
                expected: self.space.dim(),
                got: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(point)).sum())
    }

    /// Formal partial derivative w.r.t. a single variable.
    pub fn diff(&self, block: Block, i: usize) -> Result<Polynomial, PolyError> {
        let v = self.space.var(block, i)?;
        let mut out = Polynomial::zero(self.space);
        for (m, c) in &self.terms {
            let e = m.exps[v];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps.clone();
            exps[v] = e - 1;
            out.add_term(Monomial::from_exps(exps), c * e as f64);
        }
        Ok(out)
    }

    /// Substitute variable `i` by `scale·vᵢ + shift` for every variable,
    /// expanding binomially. Degrees are preserved when every scale is
    /// nonzero.
    pub fn substitute_affine(&self, maps: &[(f64, f64)]) -> Result<Polynomial, PolyError> {
        if maps.len() != self.space.dim() {
            return Err(PolyError::DimensionMismatch {
                expected: self.space.dim(),
                got: maps.len(),
            });
        }
        let mut out = Polynomial::zero(self.space);
        for (m, c) in &self.terms {
            // expand ∏ᵢ (sᵢ vᵢ + cᵢ)^{eᵢ}
            let mut partial: Vec<(Vec<u8>, f64)> = vec![(vec![0u8; self.space.dim()], *c)];
            for (v, &e) in m.exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let (s, sh) = maps[v];
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                for (exps, coef) in &partial {
                    for k in 0..=e {
                        let b = binomial(e as u64, k as u64) as f64;
                        let w = coef * b * s.powi(k as i32) * sh.powi((e - k) as i32);
                        if w == 0.0 {
                            continue;
                        }
                        let mut ex = exps.clone();
                        ex[v] += k;
                        next.push((ex, w));
                    }
                }
                partial = next;
            }
            for (exps, coef) in partial {
                out.add_term(Monomial::from_exps(exps), coef);
            }
        }
        Ok(out)
    }

    /// Σ over the squares of the listed block's variables.
    pub fn norm_sq(space: VariableSpace, block: Block) -> Polynomial {
        let mut p = Polynomial::zero(space);
        for i in 0..space.block_len(block) {
            let v = space.var(block, i).unwrap();
            let mut exps = vec![0u8; space.dim()];
            exps[v] = 2;
            p.add_term(Monomial::from_exps(exps), 1.0);
        }
        p
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:.6}")?;
            for (i, &e) in m.exps.iter().enumerate() {
                if e > 0 {
                    write!(f, "*v{i}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// The Stokes integrand for a univariate Gaussian family:
/// `q_β(x, ω, a) = σ²·∂(ω^β f)/∂ω − ω^β f·(ω − a)`, with `mean` and `sigma`
/// supplied as polynomials (symbols of the a-block, or constants when the
/// family pins them).
pub fn stokes_polynomial_gaussian(
    f: &Polynomial,
    beta: u32,
    mean: &Polynomial,
    sigma: &Polynomial,
) -> Result<Polynomial, PolyError> {
    let space = *f.space();
    if space.p() != 1 {
        return Err(PolyError::StokesNoiseDim(space.p()));
    }
    let omega = Polynomial::var(space, Block::Omega, 0)?;
    let mut omega_pow = Polynomial::constant(space, 1.0);
    for _ in 0..beta {
        omega_pow = omega_pow.mul(&omega)?;
    }
    let wf = omega_pow.mul(f)?;
    let dwf = wf.diff(Block::Omega, 0)?;
    let sigma_sq = sigma.mul(sigma)?;
    let first = sigma_sq.mul(&dwf)?;
    let second = wf.mul(&omega.sub(mean)?)?;
    first.sub(&second)
}

/// Spec form of the Stokes integrand: mean and deviation are the two symbols
/// of the a-block (t = 2, a = (a, σ)).
pub fn stokes_polynomial(f: &Polynomial, beta: u32) -> Result<Polynomial, PolyError> {
    let space = *f.space();
    if space.t() != 2 {
        return Err(PolyError::VariableOutOfRange {
            block: Block::Param,
            index: 1,
            size: space.t(),
        });
    }
    let mean = Polynomial::var(space, Block::Param, 0)?;
    let sigma = Polynomial::var(space, Block::Param, 1)?;
    stokes_polynomial_gaussian(f, beta, &mean, &sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space12() -> VariableSpace {
        VariableSpace::new(1, 1, 2).unwrap()
    }

    #[test]
    fn enumeration_matches_paper_example() {
        let space = VariableSpace::new(2, 1, 0).unwrap();
        let monos = enumerate_monomials(&space, &[Block::X], 2);
        let got: Vec<Vec<u8>> = monos.iter().map(|m| m.exps().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
            ]
        );
    }

    #[test]
    fn enumeration_degree_zero() {
        let space = space12();
        let monos = enumerate_monomials(&space, &[Block::X, Block::Omega, Block::Param], 0);
        assert_eq!(monos.len(), 1);
        assert_eq!(monos[0].degree(), 0);
    }

    #[test]
    fn enumeration_two_blocks() {
        let space = VariableSpace::new(1, 1, 0).unwrap();
        let monos = enumerate_monomials(&space, &[Block::X, Block::Omega], 3);
        assert_eq!(monos.len(), 10); // C(2+3,3)
    }

    #[test]
    fn enumeration_counts() {
        for v in 1..=5usize {
            let space = VariableSpace::new(v, 1, 0).unwrap();
            for d in 0..=14u32 {
                let monos = enumerate_monomials(&space, &[Block::X], d);
                assert_eq!(monos.len() as u64, binomial((v as u32 + d) as u64, d as u64));
            }
        }
    }

    #[test]
    fn eval_examples() {
        let space = VariableSpace::new(1, 1, 0).unwrap();
        let x = Polynomial::var(space, Block::X, 0).unwrap();
        let xsq = x.mul(&x).unwrap();
        assert_eq!(xsq.eval(&[3.0, 0.0]).unwrap(), 9.0);
        assert_eq!(Polynomial::zero(space).eval(&[5.0, 1.0]).unwrap(), 0.0);

        // f = 2ω x₂² − 2ω x₁² − 1 at (x₁,x₂,ω)=(0,1,1) → 1
        let s2 = VariableSpace::new(2, 1, 0).unwrap();
        let x1 = Polynomial::var(s2, Block::X, 0).unwrap();
        let x2 = Polynomial::var(s2, Block::X, 1).unwrap();
        let w = Polynomial::var(s2, Block::Omega, 0).unwrap();
        let f = w
            .mul(&x2.mul(&x2).unwrap())
            .unwrap()
            .scale(2.0)
            .sub(&w.mul(&x1.mul(&x1).unwrap()).unwrap().scale(2.0))
            .unwrap()
            .sub(&Polynomial::constant(s2, 1.0))
            .unwrap();
        assert_eq!(f.eval(&[0.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(
            f.eval(&[0.0, 1.0]).unwrap_err(),
            PolyError::DimensionMismatch {
                expected: 3,
                got: 2
            }
        );
    }

    #[test]
    fn diff_examples() {
        let space = VariableSpace::new(1, 1, 0).unwrap();
        let x = Polynomial::var(space, Block::X, 0).unwrap();
        let w = Polynomial::var(space, Block::Omega, 0).unwrap();
        let w3 = w.mul(&w).unwrap().mul(&w).unwrap();
        let d = w3.diff(Block::Omega, 0).unwrap();
        assert_eq!(d.eval(&[0.0, 2.0]).unwrap(), 12.0); // 3ω²
        let lin = w.sub(&x).unwrap().diff(Block::Omega, 0).unwrap();
        assert_eq!(lin, Polynomial::constant(space, 1.0));
        // d/dω (ω(x−ω)) = x − 2ω
        let g = w.mul(&x.sub(&w).unwrap()).unwrap();
        let dg = g.diff(Block::Omega, 0).unwrap();
        let expect = x.sub(&w.scale(2.0)).unwrap();
        assert_eq!(dg, expect);
    }

    #[test]
    fn stokes_examples() {
        // f = x − ω in (n=1, p=1, t=2)
        let space = space12();
        let x = Polynomial::var(space, Block::X, 0).unwrap();
        let w = Polynomial::var(space, Block::Omega, 0).unwrap();
        let a = Polynomial::var(space, Block::Param, 0).unwrap();
        let s = Polynomial::var(space, Block::Param, 1).unwrap();
        let f = x.sub(&w).unwrap();

        // β = 0: −σ² − (x−ω)(ω−a)
        let q0 = stokes_polynomial(&f, 0).unwrap();
        let expect0 = s
            .mul(&s)
            .unwrap()
            .scale(-1.0)
            .sub(&f.mul(&w.sub(&a).unwrap()).unwrap())
            .unwrap();
        assert_eq!(q0, expect0);

        // β = 1: σ²(x−2ω) − ω(x−ω)(ω−a)
        let q1 = stokes_polynomial(&f, 1).unwrap();
        let expect1 = s
            .mul(&s)
            .unwrap()
            .mul(&x.sub(&w.scale(2.0)).unwrap())
            .unwrap()
            .sub(&w.mul(&f).unwrap().mul(&w.sub(&a).unwrap()).unwrap())
            .unwrap();
        assert_eq!(q1, expect1);

        // zero polynomial stays zero
        let qz = stokes_polynomial(&Polynomial::zero(space), 3).unwrap();
        assert!(qz.is_zero());

        // degree of q_β for affine f is β + 2 (both displayed terms reach it)
        for beta in 0..=4u32 {
            let q = stokes_polynomial(&f, beta).unwrap();
            assert_eq!(q.degree(), beta + 2);
        }
    }

    #[test]
    fn substitute_affine_maps_box() {
        // p(a) = a² on a ∈ [0.8, 1.0]: a = 0.1·ã + 0.9
        let space = space12();
        let a = Polynomial::var(space, Block::Param, 0).unwrap();
        let p = a.mul(&a).unwrap();
        let mut maps = vec![(1.0, 0.0); space.dim()];
        maps[2] = (0.1, 0.9);
        let q = p.substitute_affine(&maps).unwrap();
        let v = q.eval(&[0.0, 0.0, -1.0, 0.0]).unwrap();
        assert!((v - 0.64).abs() < 1e-12);
        let v = q.eval(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn grlex_total_order(aexp in proptest::collection::vec(0u8..5, 4),
                             bexp in proptest::collection::vec(0u8..5, 4),
                             cexp in proptest::collection::vec(0u8..5, 4)) {
            let a = Monomial::from_exps(aexp);
            let b = Monomial::from_exps(bexp);
            let c = Monomial::from_exps(cexp);
            // trichotomy
            let eq = a == b;
            let lt = a < b;
            let gt = a > b;
            prop_assert_eq!(eq as u8 + lt as u8 + gt as u8, 1);
            // transitivity on the sampled triple
            if a <= b && b <= c {
                prop_assert!(a <= c);
            }
        }

        #[test]
        fn diff_matches_finite_differences(
            coefs in proptest::collection::vec(-2.0f64..2.0, 6),
            point in proptest::collection::vec(-1.0f64..1.0, 4),
            var in 0usize..4,
        ) {
            let space = VariableSpace::new(2, 1, 1).unwrap();
            let monos = enumerate_monomials(&space, &[Block::X, Block::Omega, Block::Param], 6);
            let mut f = Polynomial::zero(space);
            // pick a deterministic spread of degree ≤ 6 monomials
            for (i, c) in coefs.iter().enumerate() {
                let m = monos[(i * 13 + 7) % monos.len()].clone();
                f.add_term(m, *c);
            }
            let (block, bi) = match var {
                0 => (Block::X, 0),
                1 => (Block::X, 1),
                2 => (Block::Omega, 0),
                _ => (Block::Param, 0),
            };
            let df = f.diff(block, bi).unwrap();
            let h = 1e-6;
            let mut hi = point.clone();
            let mut lo = point.clone();
            let v = space.var(block, bi).unwrap();
            hi[v] += h;
            lo[v] -= h;
            let fd = (f.eval(&hi).unwrap() - f.eval(&lo).unwrap()) / (2.0 * h);
            let exact = df.eval(&point).unwrap();
            let scale = 1.0f64.max(exact.abs());
            prop_assert!((fd - exact).abs() / scale < 1e-6,
                "fd={} exact={}", fd, exact);
        }
    }
}
