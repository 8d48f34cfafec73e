//! Primal-dual interior-point method for block-diagonal SDPs over free
//! moment variables:
//!
//!   maximize c'x   s.t.   Bx = b,   A_k(x) ⪰ 0  (k = 1..K),
//!
//! using the HKM direction with Mehrotra predictor-corrector and an
//! infeasible start. The Schur complement is formed over the moment
//! variables, exploiting the shared anti-diagonal cell structure of moment
//! and localizing matrices.

use ndarray::prelude::*;
use ndarray_linalg::{Cholesky, Diag, Eigh, SolveTriangular, UPLO};

#[derive(Debug, Clone)]
pub struct IpmSettings {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
    pub init_scale: f64,
    pub verbose: bool,
}

impl Default for IpmSettings {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    NearOptimal,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub status: IpmStatus,
    pub x: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub rel_gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub iterations: usize,
}

/// One PSD block: entry (r,c) = Σ_t g_t · x[vars[sum(r,c)][t]].
#[derive(Debug, Clone)]
pub struct BlockData {
    pub dim: usize,
    /// Upper-triangle cells per sum id.
    pub cells_by_sum: Vec<Vec<(u32, u32)>>,
    /// Both orientations per sum id, flattened (p, q) pairs.
    pub oriented_by_sum: Vec<Vec<(u32, u32)>>,
    pub term_coefs: Vec<f64>,
    /// [sum id][term] → global variable index.
    pub vars_by_sum_term: Vec<Vec<u32>>,
}

/// Solver-neutral data: dense objective, sparse equality rows, PSD blocks.
#[derive(Debug, Clone)]
pub struct ConicData {
    pub num_vars: usize,
    pub c: Vec<f64>,
    pub rows: Vec<Vec<(u32, f64)>>,
    pub rhs: Vec<f64>,
    pub blocks: Vec<BlockData>,
}

impl BlockData {
    fn materialize(&self, x: &[f64], out: &mut Array2<f64>) {
        out.fill(0.0);
        let s = self.dim;
        let flat = out.as_slice_mut().unwrap();
        for (sid, cells) in self.cells_by_sum.iter().enumerate() {
            let mut val = 0.0;
            for (t, &g) in self.term_coefs.iter().enumerate() {
                val += g * x[self.vars_by_sum_term[sid][t] as usize];
            }
            for &(r, c) in cells {
                flat[r as usize * s + c as usize] = val;
                flat[c as usize * s + r as usize] = val;
            }
        }
    }

    /// out += Aᵀ(M) for symmetric M.
    fn adjoint_accumulate(&self, m: &Array2<f64>, out: &mut [f64]) {
        let s = self.dim;
        let flat = m.as_slice().unwrap();
        for (sid, cells) in self.cells_by_sum.iter().enumerate() {
            let mut val = 0.0;
            for &(r, c) in cells {
                let e = flat[r as usize * s + c as usize];
                val += if r == c { e } else { 2.0 * e };
            }
            for (t, &g) in self.term_coefs.iter().enumerate() {
                out[self.vars_by_sum_term[sid][t] as usize] += g * val;
            }
        }
    }

    /// H += contributions tr(A_i Z A_j S⁻¹) through the sum-monomial kernel.
    fn schur_accumulate(&self, z: &Array2<f64>, si: &Array2<f64>, h: &mut Array2<f64>) {
        let s = self.dim;
        let nsum = self.cells_by_sum.len();
        let zf = z.as_slice().unwrap();
        let sif = si.as_slice().unwrap();
        // kernel: K[a,b] = Σ_{(p,q)∈or(a)} Σ_{(r,t)∈or(b)} Z[q,r]·Si[t,p]
        let mut kernel = vec![0.0f64; nsum * nsum];
        for a in 0..nsum {
            for &(p, q) in &self.oriented_by_sum[a] {
                let zrow = &zf[q as usize * s..(q as usize + 1) * s];
                let sirow = &sif[p as usize * s..(p as usize + 1) * s];
                for b in a..nsum {
                    let mut acc = 0.0;
                    for &(r, t) in &self.oriented_by_sum[b] {
                        acc += zrow[r as usize] * sirow[t as usize];
                    }
                    kernel[a * nsum + b] += acc;
                }
            }
        }
        let nt = self.term_coefs.len();
        for a in 0..nsum {
            for b in 0..nsum {
                let k = if a <= b {
                    kernel[a * nsum + b]
                } else {
                    kernel[b * nsum + a]
                };
                if k == 0.0 {
                    continue;
                }
                for ta in 0..nt {
                    let va = self.vars_by_sum_term[a][ta] as usize;
                    let ga = self.term_coefs[ta];
                    for tb in 0..nt {
                        let vb = self.vars_by_sum_term[b][tb] as usize;
                        h[[va, vb]] += ga * self.term_coefs[tb] * k;
                    }
                }
            }
        }
    }
}

fn sym(m: &Array2<f64>) -> Array2<f64> {
    0.5 * (m + &m.t())
}

/// Largest α with S + α·dS ⪰ 0, via λ_min(L⁻¹ dS L⁻ᵀ).
fn max_step(chol_l: &Array2<f64>, ds: &Array2<f64>) -> f64 {
    let y = chol_l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, ds)
        .expect("triangular solve");
    let w = chol_l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &y.t().to_owned())
        .expect("triangular solve");
    let w = sym(&w);
    match w.eigh(UPLO::Lower) {
        Ok((eigs, _)) => {
            let lmin = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            if lmin >= -1e-14 {
                f64::INFINITY
            } else {
                -1.0 / lmin
            }
        }
        Err(_) => 0.0,
    }
}

struct Kkt {
    chol_h: Array2<f64>,
    w: Array2<f64>,
    chol_schur: Array2<f64>,
}

impl Kkt {
    fn solve_once(&self, r1: &Array1<f64>, p: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let t1 = self
            .chol_h
            .solve_triangular(UPLO::Lower, Diag::NonUnit, r1)
            .expect("solve");
        let mut rhs = self.w.t().dot(&t1);
        rhs += p;
        let t2 = self
            .chol_schur
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &rhs)
            .expect("solve");
        let dnu = self
            .chol_schur
            .t()
            .to_owned()
            .solve_triangular(UPLO::Upper, Diag::NonUnit, &t2)
            .expect("solve");
        let t3 = &t1 - &self.w.dot(&dnu);
        let dx = self
            .chol_h
            .t()
            .to_owned()
            .solve_triangular(UPLO::Upper, Diag::NonUnit, &t3)
            .expect("solve");
        (dx, dnu)
    }

    /// Solve H dx + B'dν = r1, B dx = −p via the Schur factors, with two
    /// rounds of iterative refinement against the unregularized H.
    fn solve(
        &self,
        h: &Array2<f64>,
        bt: &Array2<f64>,
        r1: &Array1<f64>,
        p: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let (mut dx, mut dnu) = self.solve_once(r1, p);
        for _ in 0..2 {
            let res1 = r1 - &h.dot(&dx) - &bt.dot(&dnu);
            let res2 = -p - &bt.t().dot(&dx);
            let norm = res1.iter().chain(res2.iter()).fold(0.0f64, |a, &v| a.max(v.abs()));
            if norm < 1e-14 {
                break;
            }
            let (cx, cnu) = self.solve_once(&res1, &res2.mapv(|v| -v));
            dx += &cx;
            dnu += &cnu;
        }
        (dx, dnu)
    }
}

pub fn solve(data: &ConicData, settings: &IpmSettings) -> IpmResult {
    let n = data.num_vars;
    let m_rows = data.rows.len();
    let total_dim: f64 = data.blocks.iter().map(|b| b.dim as f64).sum();

    let xi = settings.init_scale;
    let mut x = Array1::<f64>::zeros(n);
    let mut nu = Array1::<f64>::zeros(m_rows);
    let mut s_mats: Vec<Array2<f64>> = data
        .blocks
        .iter()
        .map(|b| Array2::eye(b.dim) * xi)
        .collect();
    let mut z_mats: Vec<Array2<f64>> = data
        .blocks
        .iter()
        .map(|b| Array2::eye(b.dim) * xi)
        .collect();

    let c = Array1::from_vec(data.c.clone());
    let b_vec = Array1::from_vec(data.rhs.clone());
    let b_norm = 1.0 + b_vec.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let c_norm = 1.0 + c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));

    // dense B' once
    let mut bt = Array2::<f64>::zeros((n, m_rows));
    for (r, row) in data.rows.iter().enumerate() {
        for &(i, v) in row {
            bt[[i as usize, r]] = v;
        }
    }

    let b_apply = |x: &Array1<f64>| -> Array1<f64> {
        let mut out = Array1::zeros(m_rows);
        for (r, row) in data.rows.iter().enumerate() {
            out[r] = row.iter().map(|&(i, v)| v * x[i as usize]).sum();
        }
        out
    };
    let bt_apply = |nu: &Array1<f64>| -> Array1<f64> { bt.dot(nu) };

    let mut best: Option<(f64, IpmResult)> = None;
    let mut stall = 0usize;
    let mut a_of_x: Vec<Array2<f64>> = data
        .blocks
        .iter()
        .map(|b| Array2::zeros((b.dim, b.dim)))
        .collect();
    let mut h = Array2::<f64>::zeros((n, n));

    let mut iter = 0usize;
    while iter < settings.max_iters {
        iter += 1;

        for (b, out) in data.blocks.iter().zip(a_of_x.iter_mut()) {
            b.materialize(x.as_slice().unwrap(), out);
        }
        let p_res: Vec<Array2<f64>> = a_of_x
            .iter()
            .zip(&s_mats)
            .map(|(a, s)| a - s)
            .collect();
        let p_eq = &b_apply(&x) - &b_vec;

        // dual residual rd = c − B'ν + ΣAᵀ(Z)
        let mut atz = vec![0.0; n];
        for (blk, z) in data.blocks.iter().zip(&z_mats) {
            blk.adjoint_accumulate(z, &mut atz);
        }
        let rd = &c - &bt_apply(&nu) + &Array1::from_vec(atz);

        let gap_inner: f64 = s_mats
            .iter()
            .zip(&z_mats)
            .map(|(s, z)| (s * z).sum())
            .sum();
        let mu = gap_inner / total_dim;

        let pobj = c.dot(&x);
        let dobj = b_vec.dot(&nu);
        let rel_gap = (dobj - pobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let pinf_eq = p_eq.iter().fold(0.0f64, |a, &v| a.max(v.abs())) / b_norm;
        let pinf_cone = p_res
            .iter()
            .map(|m| m.iter().fold(0.0f64, |a, &v| a.max(v.abs())))
            .fold(0.0, f64::max)
            / (1.0 + xi);
        let pinf = pinf_eq.max(pinf_cone);
        let dinf = rd.iter().fold(0.0f64, |a, &v| a.max(v.abs())) / c_norm;

        if settings.verbose {
            eprintln!(
                "iter {iter:3}  mu {mu:9.2e}  gap {rel_gap:9.2e}  pinf {pinf:9.2e}  dinf {dinf:9.2e}  pobj {pobj:+.9}"
            );
        }

        let score = rel_gap.max(pinf).max(dinf);
        let candidate = IpmResult {
            status: IpmStatus::NumericalFailure,
            x: x.to_vec(),
            eq_multipliers: nu.to_vec(),
            primal_objective: pobj,
            dual_objective: dobj,
            rel_gap,
            primal_infeas: pinf,
            dual_infeas: dinf,
            iterations: iter,
        };
        if best.as_ref().map(|(s, _)| score < *s).unwrap_or(true) {
            best = Some((score, candidate));
            stall = 0;
        } else {
            stall += 1;
        }

        if rel_gap <= settings.tol_gap && pinf <= settings.tol_feas && dinf <= settings.tol_feas {
            break;
        }
        if !mu.is_finite() || mu > 1e16 || mu < 1e-14 || stall >= 8 {
            break;
        }

        // factorizations
        let chols: Vec<Option<Array2<f64>>> = s_mats
            .iter()
            .map(|s| s.cholesky(UPLO::Lower).ok())
            .collect();
        if chols.iter().any(|c| c.is_none()) {
            break;
        }
        let chols: Vec<Array2<f64>> = chols.into_iter().map(|c| c.unwrap()).collect();
        let s_invs: Vec<Array2<f64>> = chols
            .iter()
            .map(|l| {
                let eye = Array2::<f64>::eye(l.nrows());
                let y = l
                    .solve_triangular(UPLO::Lower, Diag::NonUnit, &eye)
                    .expect("solve");
                let inv = l
                    .t()
                    .to_owned()
                    .solve_triangular(UPLO::Upper, Diag::NonUnit, &y)
                    .expect("solve");
                sym(&inv)
            })
            .collect();

        h.fill(0.0);
        for ((blk, z), si) in data.blocks.iter().zip(&z_mats).zip(&s_invs) {
            blk.schur_accumulate(z, si, &mut h);
        }
        let hmax = h.diag().iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);

        let mut kkt = None;
        let mut jitter = 1e-13 * hmax;
        for _ in 0..4 {
            let mut h_reg = h.clone();
            for i in 0..n {
                h_reg[[i, i]] += jitter;
            }
            if let Ok(chol_h) = h_reg.cholesky(UPLO::Lower) {
                let w = chol_h
                    .solve_triangular(UPLO::Lower, Diag::NonUnit, &bt)
                    .expect("solve");
                let mut schur = w.t().dot(&w);
                let smax = schur.diag().iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
                let mut sj = 1e-13 * smax;
                for _ in 0..4 {
                    let mut s_reg = schur.clone();
                    for i in 0..m_rows {
                        s_reg[[i, i]] += sj;
                    }
                    if let Ok(chol_schur) = s_reg.cholesky(UPLO::Lower) {
                        kkt = Some(Kkt {
                            chol_h,
                            w,
                            chol_schur,
                        });
                        break;
                    }
                    sj *= 100.0;
                }
                if kkt.is_some() {
                    break;
                }
                let _ = schur.view_mut();
            }
            jitter *= 100.0;
        }
        let Some(kkt) = kkt else { break };

        // affine predictor (σ = 0)
        let mut r1 = &c - &bt_apply(&nu);
        {
            let mut acc = vec![0.0; n];
            for (((blk, z), si), pr) in data.blocks.iter().zip(&z_mats).zip(&s_invs).zip(&p_res) {
                let zpsi = sym(&z.dot(pr).dot(si));
                blk.adjoint_accumulate(&zpsi.mapv(|v| -v), &mut acc);
            }
            r1 += &Array1::from_vec(acc);
        }
        let (dx_a, _dnu_a) = kkt.solve(&h, &bt, &r1, &p_eq);
        let mut ds_a: Vec<Array2<f64>> = Vec::with_capacity(data.blocks.len());
        for ((blk, pr), tmp) in data.blocks.iter().zip(&p_res).zip(a_of_x.iter()) {
            let mut m = Array2::zeros((blk.dim, blk.dim));
            blk.materialize(dx_a.as_slice().unwrap(), &mut m);
            ds_a.push(&m + pr);
            let _ = tmp;
        }
        let dz_a: Vec<Array2<f64>> = data
            .blocks
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let zds = z_mats[k].dot(&ds_a[k]).dot(&s_invs[k]);
                -&z_mats[k] - sym(&zds)
            })
            .collect();

        let alpha_pa = s_mats
            .iter()
            .zip(&chols)
            .zip(&ds_a)
            .map(|((_, l), ds)| max_step(l, ds))
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let alpha_da = {
            let zl: Vec<Option<Array2<f64>>> = z_mats
                .iter()
                .map(|z| z.cholesky(UPLO::Lower).ok())
                .collect();
            if zl.iter().any(|c| c.is_none()) {
                break;
            }
            zl.into_iter()
                .map(Option::unwrap)
                .zip(&dz_a)
                .map(|(l, dz)| max_step(&l, dz))
                .fold(f64::INFINITY, f64::min)
                .min(1.0)
        };
        let mu_aff: f64 = s_mats
            .iter()
            .zip(&ds_a)
            .zip(z_mats.iter().zip(&dz_a))
            .map(|((s, ds), (z, dz))| {
                let sn = s + &(ds * alpha_pa);
                let zn = z + &(dz * alpha_da);
                (&sn * &zn).sum()
            })
            .sum::<f64>()
            / total_dim;
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-10, 0.99);

        // corrector
        let mut r1 = &c - &bt_apply(&nu);
        {
            let mut acc = vec![0.0; n];
            for (k, blk) in data.blocks.iter().enumerate() {
                let zpsi = sym(&z_mats[k].dot(&p_res[k]).dot(&s_invs[k]));
                let cross = sym(&dz_a[k].dot(&ds_a[k]).dot(&s_invs[k]));
                let t = &(&s_invs[k] * (sigma * mu)) - &zpsi - &cross;
                blk.adjoint_accumulate(&t, &mut acc);
            }
            r1 += &Array1::from_vec(acc);
        }
        let (dx, dnu) = kkt.solve(&h, &bt, &r1, &p_eq);
        let mut ds: Vec<Array2<f64>> = Vec::with_capacity(data.blocks.len());
        for (blk, pr) in data.blocks.iter().zip(&p_res) {
            let mut m = Array2::zeros((blk.dim, blk.dim));
            blk.materialize(dx.as_slice().unwrap(), &mut m);
            ds.push(&m + pr);
        }
        let dz: Vec<Array2<f64>> = data
            .blocks
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let zds = sym(&z_mats[k].dot(&ds[k]).dot(&s_invs[k]));
                let cross = sym(&dz_a[k].dot(&ds_a[k]).dot(&s_invs[k]));
                &(&s_invs[k] * (sigma * mu)) - &z_mats[k] - &zds - &cross
            })
            .collect();

        let tau = 0.99f64;
        let alpha_p = s_mats
            .iter()
            .zip(&chols)
            .zip(&ds)
            .map(|((_, l), d)| max_step(l, d))
            .fold(f64::INFINITY, f64::min)
            .min(1.0 / tau)
            * tau;
        let alpha_d = {
            let zl: Vec<Option<Array2<f64>>> = z_mats
                .iter()
                .map(|z| z.cholesky(UPLO::Lower).ok())
                .collect();
            if zl.iter().any(|c| c.is_none()) {
                break;
            }
            zl.into_iter()
                .map(Option::unwrap)
                .zip(&dz)
                .map(|(l, d)| max_step(&l, d))
                .fold(f64::INFINITY, f64::min)
                .min(1.0 / tau)
                * tau
        };
        let alpha_p = alpha_p.min(1.0);
        let alpha_d = alpha_d.min(1.0);
        if !alpha_p.is_finite() || !alpha_d.is_finite() || alpha_p <= 1e-10 || alpha_d <= 1e-10 {
            break;
        }

        x = &x + &(&dx * alpha_p);
        nu = &nu + &(&dnu * alpha_d);
        for k in 0..data.blocks.len() {
            s_mats[k] = &s_mats[k] + &(&ds[k] * alpha_p);
            z_mats[k] = &z_mats[k] + &(&dz[k] * alpha_d);
            s_mats[k] = sym(&s_mats[k]);
            z_mats[k] = sym(&z_mats[k]);
        }
    }

    let (_, mut result) = best.expect("at least one iterate");
    result.status = if result.rel_gap <= settings.tol_gap
        && result.primal_infeas <= settings.tol_feas
        && result.dual_infeas <= settings.tol_feas
    {
        IpmStatus::Optimal
    } else if result.rel_gap <= 1e-6 && result.primal_infeas <= 1e-6 && result.dual_infeas <= 1e-6
    {
        IpmStatus::NearOptimal
    } else {
        IpmStatus::NumericalFailure
    };
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max X₁₂ subject to X₁₁ = X₂₂ = 1, X ⪰ 0: optimum 1 at X = ones.
    #[test]
    fn tiny_sdp() {
        let data = ConicData {
            num_vars: 3, // x = (X11, X12, X22)
            c: vec![0.0, 1.0, 0.0],
            rows: vec![vec![(0, 1.0)], vec![(2, 1.0)]],
            rhs: vec![1.0, 1.0],
            blocks: vec![BlockData {
                dim: 2,
                cells_by_sum: vec![vec![(0, 0)], vec![(0, 1)], vec![(1, 1)]],
                oriented_by_sum: vec![vec![(0, 0)], vec![(0, 1), (1, 0)], vec![(1, 1)]],
                term_coefs: vec![1.0],
                vars_by_sum_term: vec![vec![0], vec![1], vec![2]],
            }],
        };
        let res = solve(&data, &IpmSettings::default());
        assert_eq!(res.status, IpmStatus::Optimal);
        assert!((res.primal_objective - 1.0).abs() < 1e-7, "{res:?}");
        assert!((res.x[1] - 1.0).abs() < 1e-6);
        // dual multipliers: max X12 st diag pinned: value = (ν1+ν2)/... b'ν = 1
        assert!((res.dual_objective - 1.0).abs() < 1e-7);
    }

    /// LP as diagonal SDP: max x₁ + x₂ s.t. x₁ + 2x₂ = 2, x ≥ 0 → optimum 2
    /// at (2, 0).
    #[test]
    fn diagonal_lp() {
        let data = ConicData {
            num_vars: 2,
            c: vec![1.0, 1.0],
            rows: vec![vec![(0, 1.0), (1, 2.0)]],
            rhs: vec![2.0],
            blocks: vec![BlockData {
                dim: 2,
                cells_by_sum: vec![vec![(0, 0)], vec![(1, 1)]],
                oriented_by_sum: vec![vec![(0, 0)], vec![(1, 1)]],
                term_coefs: vec![1.0],
                vars_by_sum_term: vec![vec![0], vec![1]],
            }],
        };
        let res = solve(&data, &IpmSettings::default());
        assert_eq!(res.status, IpmStatus::Optimal);
        assert!((res.primal_objective - 2.0).abs() < 1e-7, "{res:?}");
        assert!((res.x[0] - 2.0).abs() < 1e-6);
        assert!(res.x[1].abs() < 1e-6);
    }
}
