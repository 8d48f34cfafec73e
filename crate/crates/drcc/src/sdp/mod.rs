//! Solver-neutral conic interface: convert an assembled relaxation into
//! block-SDP data, solve it with the interior-point backend, and extract the
//! dual certificate polynomials w_d (and h_d) plus the inner approximation.

pub mod ipm;

use crate::poly::{Block, Monomial, Polynomial};
use crate::relax::{BlockLabel, MomentRelaxation, RowKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("variable {0} appears in no PSD block and no pinning equality")]
    UncoveredVariable(usize),
    #[error("cannot extract certificates from a failed solve (status {0:?})")]
    FailedSolve(SolveStatus),
    #[error("epsilon must lie in (0,1), got {0}")]
    EpsilonRange(f64),
    #[error(transparent)]
    Poly(#[from] crate::poly::PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
    pub init_scale: f64,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iters: 120,
            init_scale: 100.0,
            verbose: false,
        }
    }
}

/// The conic problem together with the bookkeeping needed to map equality
/// multipliers back to certificate coefficients.
pub struct ConicProblem {
    pub data: ipm::ConicData,
    pub row_scales: Vec<f64>,
}

impl ConicProblem {
    /// Lossless conversion: every moment-sequence entry must appear in at
    /// least one PSD block or be pinned by an equality. Rows are normalized
    /// to unit max coefficient.
    pub fn from_relaxation(relax: &MomentRelaxation) -> Result<Self, SdpError> {
        let n = relax.num_vars;
        let mut covered = vec![false; n];
        let mut blocks = Vec::with_capacity(relax.psd.len());
        for psd in &relax.psd {
            let offset = relax.blocks[psd.measure].offset;
            let vars_by_sum_term: Vec<Vec<u32>> = psd
                .vars_by_sum_term
                .iter()
                .map(|terms| {
                    terms
                        .iter()
                        .map(|&v| {
                            covered[offset + v] = true;
                            (offset + v) as u32
                        })
                        .collect()
                })
                .collect();
            let oriented_by_sum: Vec<Vec<(u32, u32)>> = psd
                .cells_by_sum
                .iter()
                .map(|cells| {
                    let mut o = Vec::with_capacity(cells.len() * 2);
                    for &(r, c) in cells {
                        o.push((r, c));
                        if r != c {
                            o.push((c, r));
                        }
                    }
                    o
                })
                .collect();
            blocks.push(ipm::BlockData {
                dim: psd.dim(),
                cells_by_sum: psd.cells_by_sum.clone(),
                oriented_by_sum,
                term_coefs: psd.term_coefs.clone(),
                vars_by_sum_term,
            });
        }
        let mut rows = Vec::with_capacity(relax.equalities.len());
        let mut rhs = Vec::with_capacity(relax.equalities.len());
        let mut row_scales = Vec::with_capacity(relax.equalities.len());
        for eq in &relax.equalities {
            let scale = eq
                .terms
                .iter()
                .fold(0.0f64, |a, &(_, c)| a.max(c.abs()))
                .max(1e-300);
            let row: Vec<(u32, f64)> = eq
                .terms
                .iter()
                .map(|&(i, c)| {
                    if eq.terms.len() == 1 {
                        covered[i] = true;
                    }
                    (i as u32, c / scale)
                })
                .collect();
            rows.push(row);
            rhs.push(eq.rhs / scale);
            row_scales.push(scale);
        }
        if let Some(i) = covered.iter().position(|&c| !c) {
            return Err(SdpError::UncoveredVariable(i));
        }
        let mut c = vec![0.0; n];
        for &(i, v) in &relax.objective {
            c[i] = v;
        }
        Ok(Self {
            data: ipm::ConicData {
                num_vars: n,
                c,
                rows,
                rhs,
                blocks,
            },
            row_scales,
        })
    }
}

/// Solve outcome with certificates mapped back to original coordinates.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub rho_d: f64,
    /// Certificate polynomial w_d(x), original coordinates, degree ≤ 2d.
    pub dual_w: Polynomial,
    /// Dual polynomial h_d(x, ω), original coordinates.
    pub dual_h: Polynomial,
    /// Primal moment sequences (all blocks, assembly order).
    pub moments: Vec<f64>,
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub iterations: usize,
    /// Degree bound of w (2·half_order).
    pub degree: u32,
    pub half_order: u32,
    pub x_box: Vec<(f64, f64)>,
}

/// Solve the relaxation at the requested tolerances, with one automatic
/// re-solve at 1e−6 on numerical failure.
pub fn solve(relax: &MomentRelaxation, settings: &SolverSettings) -> Result<SolveResult, SdpError> {
    let conic = ConicProblem::from_relaxation(relax)?;
    let mut ipm_settings = ipm::IpmSettings {
        tol_gap: settings.tol_gap,
        tol_feas: settings.tol_feas,
        max_iters: settings.max_iters,
        init_scale: settings.init_scale,
        verbose: settings.verbose,
    };
    let mut res = ipm::solve(&conic.data, &ipm_settings);
    if res.status == ipm::IpmStatus::NumericalFailure {
        ipm_settings.tol_gap = ipm_settings.tol_gap.max(1e-6);
        ipm_settings.tol_feas = ipm_settings.tol_feas.max(1e-6);
        ipm_settings.init_scale *= 10.0;
        let retry = ipm::solve(&conic.data, &ipm_settings);
        let better = retry.rel_gap.max(retry.primal_infeas).max(retry.dual_infeas)
            < res.rel_gap.max(res.primal_infeas).max(res.dual_infeas);
        if retry.status != ipm::IpmStatus::NumericalFailure || better {
            res = retry;
        }
    }
    // classify against the originally requested tolerances
    let status = if res.rel_gap <= settings.tol_gap
        && res.primal_infeas <= settings.tol_feas
        && res.dual_infeas <= settings.tol_feas
    {
        SolveStatus::Optimal
    } else if res.rel_gap <= 1e-6 && res.primal_infeas <= 1e-6 && res.dual_infeas <= 1e-6 {
        SolveStatus::NearOptimal
    } else {
        SolveStatus::NumericalFailure
    };

    // multipliers in unscaled row units
    let nu: Vec<f64> = res
        .eq_multipliers
        .iter()
        .zip(&conic.row_scales)
        .map(|(v, s)| v / s)
        .collect();

    let space = relax.space;
    let mut w_scaled = Polynomial::zero(space);
    let mut h_scaled = Polynomial::zero(space);
    for (row, &m) in relax.equalities.iter().zip(&nu) {
        match &row.kind {
            RowKind::LambdaPin { alpha, .. } => {
                let mut exps = vec![0u8; space.dim()];
                exps[..space.n()].copy_from_slice(alpha);
                w_scaled.add_term(Monomial::from_exps(exps), m);
            }
            RowKind::Coupling { alpha, beta } => {
                let mut exps = vec![0u8; space.dim()];
                exps[..space.n()].copy_from_slice(alpha);
                let os = space.block_start(Block::Omega);
                exps[os..os + space.p()].copy_from_slice(beta);
                h_scaled.add_term(Monomial::from_exps(exps), m);
            }
            _ => {}
        }
    }
    // back to original coordinates: x = s·x̃ + c ⇒ x̃ = (x − c)/s
    let mut maps = vec![(1.0, 0.0); space.dim()];
    for i in 0..space.n() {
        let s = relax.problem.x_map.scale[i];
        let c = relax.problem.x_map.shift[i];
        maps[i] = (1.0 / s, -c / s);
    }
    let dual_w = w_scaled.substitute_affine(&maps)?;
    let dual_h = h_scaled.substitute_affine(&maps)?;

    Ok(SolveResult {
        status,
        rho_d: res.primal_objective,
        dual_w,
        dual_h,
        moments: res.x,
        gap: res.rel_gap,
        primal_infeas: res.primal_infeas,
        dual_infeas: res.dual_infeas,
        iterations: res.iterations,
        degree: 2 * relax.half_order,
        half_order: relax.half_order,
        x_box: relax.problem.original.x_box.clone(),
    })
}

/// The certified inner approximation {x ∈ X : w_d(x) < ε}.
#[derive(Debug, Clone)]
pub struct InnerApproximation {
    pub w: Polynomial,
    pub epsilon: f64,
    pub degree: u32,
    pub x_box: Vec<(f64, f64)>,
}

impl InnerApproximation {
    /// w_d at a decision point (coordinates of the x-block).
    pub fn value(&self, x: &[f64]) -> f64 {
        let space = *self.w.space();
        let mut point = vec![0.0; space.dim()];
        point[..x.len()].copy_from_slice(x);
        self.w.eval(&point).expect("dimension")
    }

    /// Membership: x ∈ X and w_d(x) < ε.
    pub fn contains(&self, x: &[f64]) -> bool {
        let in_box = x
            .iter()
            .zip(&self.x_box)
            .all(|(&v, &(lo, hi))| v >= lo && v <= hi);
        in_box && self.value(x) < self.epsilon
    }

    /// 1D sublevel intervals {x : w(x) < ε} ∩ X by a uniform scan with
    /// bisection-refined endpoints.
    pub fn intervals_1d(&self, grid: usize) -> Vec<(f64, f64)> {
        assert_eq!(self.x_box.len(), 1, "interval extraction is 1D reporting");
        let (lo, hi) = self.x_box[0];
        let g = |x: f64| self.value(&[x]) - self.epsilon;
        let n = grid.max(3) - 1;
        let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
        let mut cuts = vec![lo];
        for i in 0..n {
            if vals[i].signum() != vals[i + 1].signum() {
                let (mut a, mut b) = (xs[i], xs[i + 1]);
                let mut fa = vals[i];
                while b - a > 1e-6 {
                    let m = 0.5 * (a + b);
                    let fm = g(m);
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
        let mut out: Vec<(f64, f64)> = Vec::new();
        for pair in cuts.windows(2) {
            if g(0.5 * (pair[0] + pair[1])) < 0.0 {
                match out.last_mut() {
                    Some((_, e)) if *e == pair[0] => *e = pair[1],
                    _ => out.push((pair[0], pair[1])),
                }
            }
        }
        out
    }
}

/// Build the inner approximation from a successful solve.
pub fn extract_inner(result: &SolveResult, epsilon: f64) -> Result<InnerApproximation, SdpError> {
    if !matches!(
        result.status,
        SolveStatus::Optimal | SolveStatus::NearOptimal
    ) {
        return Err(SdpError::FailedSolve(result.status));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SdpError::EpsilonRange(epsilon));
    }
    Ok(InnerApproximation {
        w: result.dual_w.clone(),
        epsilon,
        degree: result.degree,
        x_box: result.x_box.clone(),
    })
}

/// Pointwise certificate check against oracle values of κ.
#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub min_gap: f64,
    pub violations: usize,
    pub tol: f64,
}

/// Reports min over the grid of w(x) − κ̂(x); entries below −tol are flagged.
pub fn certify_pointwise(
    inner: &InnerApproximation,
    oracle_values: &[(Vec<f64>, f64)],
    tol: f64,
) -> CertifyReport {
    let mut min_gap = f64::INFINITY;
    let mut violations = 0;
    for (x, kappa) in oracle_values {
        let gap = inner.value(x) - kappa;
        if gap < -tol {
            violations += 1;
        }
        min_gap = min_gap.min(gap);
    }
    CertifyReport {
        min_gap,
        violations,
        tol,
    }
}

// ---------------------------------------------------------------------------
// External JSON forms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTermJson {
    pub exps: Vec<u32>,
    pub coef: f64,
}

pub fn poly_to_json(p: &Polynomial) -> Vec<PolyTermJson> {
    p.terms()
        .map(|(m, c)| PolyTermJson {
            exps: m.exps().iter().map(|&e| e as u32).collect(),
            coef: *c,
        })
        .collect()
}

pub fn poly_from_json(
    space: crate::poly::VariableSpace,
    terms: &[PolyTermJson],
) -> Result<Polynomial, SdpError> {
    let mut p = Polynomial::zero(space);
    for t in terms {
        if t.exps.len() != space.dim() {
            return Err(SdpError::Poly(crate::poly::PolyError::DimensionMismatch {
                expected: space.dim(),
                got: t.exps.len(),
            }));
        }
        p.add_term(
            Monomial::from_exps(t.exps.iter().map(|&e| e as u8).collect()),
            t.coef,
        );
    }
    Ok(p)
}

/// Result JSON: {"status","rho_d","w","h","gap","degree", …}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultJson {
    pub status: SolveStatus,
    pub rho_d: f64,
    pub w: Vec<PolyTermJson>,
    pub h: Vec<PolyTermJson>,
    pub gap: f64,
    pub degree: u32,
    pub iterations: usize,
    pub space: (usize, usize, usize),
    pub x_box: Vec<(f64, f64)>,
    pub config_sha256: Option<String>,
}

impl ResultJson {
    pub fn from_result(result: &SolveResult, config_sha256: Option<String>) -> Self {
        let space = result.dual_w.space();
        Self {
            status: result.status,
            rho_d: result.rho_d,
            w: poly_to_json(&result.dual_w),
            h: poly_to_json(&result.dual_h),
            gap: result.gap,
            degree: result.degree,
            iterations: result.iterations,
            space: (space.n(), space.p(), space.t()),
            x_box: result.x_box.clone(),
            config_sha256,
        }
    }
}

/// Solver-neutral problem dump: block sizes, sparse equality triplets, and
/// objective indices, so any conic backend can consume the relaxation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDumpJson {
    pub num_vars: usize,
    pub measure_blocks: Vec<MeasureBlockJson>,
    pub psd_blocks: Vec<PsdBlockJson>,
    pub equalities: Vec<EqualityJson>,
    pub objective: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureBlockJson {
    pub label: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdBlockJson {
    pub dim: usize,
    /// (row, col, variable, coefficient) with row ≤ col.
    pub entries: Vec<(u32, u32, usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualityJson {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

pub fn problem_dump(relax: &MomentRelaxation) -> ProblemDumpJson {
    let measure_blocks = relax
        .blocks
        .iter()
        .map(|b| MeasureBlockJson {
            label: format!("{:?}", b.label),
            offset: b.offset,
            len: b.len(),
        })
        .collect();
    let psd_blocks = relax
        .psd
        .iter()
        .map(|p| {
            let offset = relax.blocks[p.measure].offset;
            let mut entries = Vec::new();
            for (sid, cells) in p.cells_by_sum.iter().enumerate() {
                for &(r, c) in cells {
                    for (t, &g) in p.term_coefs.iter().enumerate() {
                        entries.push((r, c, offset + p.vars_by_sum_term[sid][t], g));
                    }
                }
            }
            PsdBlockJson {
                dim: p.dim(),
                entries,
            }
        })
        .collect();
    let equalities = relax
        .equalities
        .iter()
        .map(|e| EqualityJson {
            terms: e.terms.clone(),
            rhs: e.rhs,
        })
        .collect();
    ProblemDumpJson {
        num_vars: relax.num_vars,
        measure_blocks,
        psd_blocks,
        equalities,
        objective: relax.objective.clone(),
    }
}

/// Residual diagnostics for the round-trip invariant: max equality violation
/// and min PSD eigenvalue of the returned moment vector.
pub fn residuals(relax: &MomentRelaxation, result: &SolveResult) -> (f64, f64) {
    let report = crate::relax::witness::check_witness(relax, &result.moments);
    (
        report.max_equality_violation,
        report.min_block_eigenvalue,
    )
}

/// Label of the measure block holding the objective mass (diagnostic).
pub fn objective_block(relax: &MomentRelaxation) -> BlockLabel {
    relax.blocks[0].label
}
