//! Shared numeric helpers: normal CDF, truncated Gaussian moments,
//! Gauss–Legendre nodes, and deterministic seed derivation.

use statrs::function::erf;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal PDF.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(N(mean, sd) ∈ (lo, hi]) with ±∞ endpoints allowed.
pub fn normal_interval(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let cdf = |v: f64| {
        if v == f64::INFINITY {
            1.0
        } else if v == f64::NEG_INFINITY {
            0.0
        } else {
            normal_cdf((v - mean) / sd)
        }
    };
    (cdf(hi) - cdf(lo)).max(0.0)
}

/// Lower standard-normal partial moments J_k(u) = ∫_{−∞}^{u} t^k φ(t) dt,
/// for k = 0..=kmax, via the recursion J_k = −u^{k−1} φ(u) + (k−1) J_{k−2}.
pub fn std_normal_partial_moments(u: f64, kmax: usize) -> Vec<f64> {
    let mut j = vec![0.0; kmax + 1];
    let phi = normal_pdf(u);
    j[0] = normal_cdf(u);
    if kmax >= 1 {
        j[1] = -phi;
    }
    for k in 2..=kmax {
        j[k] = -u.powi((k - 1) as i32) * phi + (k - 1) as f64 * j[k - 2];
    }
    j
}

/// ∫_{−∞}^{c} ω^k dN(mean, sd)(ω) for k = 0..=kmax, by the binomial shift
/// ω = mean + sd·t.
pub fn gaussian_lower_moments(c: f64, mean: f64, sd: f64, kmax: usize) -> Vec<f64> {
    let u = (c - mean) / sd;
    let j = std_normal_partial_moments(u, kmax);
    let mut out = vec![0.0; kmax + 1];
    for k in 0..=kmax {
        let mut acc = 0.0;
        for i in 0..=k {
            acc += crate::poly::binomial(k as u64, i as u64) as f64
                * mean.powi((k - i) as i32)
                * sd.powi(i as i32)
                * j[i];
        }
        out[k] = acc;
    }
    out
}

/// Full Gaussian raw moments E[ω^k], k = 0..=kmax.
pub fn gaussian_full_moments(mean: f64, sd: f64, kmax: usize) -> Vec<f64> {
    let mut m = vec![0.0; kmax + 1];
    m[0] = 1.0;
    if kmax >= 1 {
        m[1] = mean;
    }
    for k in 2..=kmax {
        m[k] = mean * m[k - 1] + (k - 1) as f64 * sd * sd * m[k - 2];
    }
    m
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes/weights mapped to [lo, hi].
pub fn gauss_legendre_on(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    (
        x.iter().map(|&v| c + h * v).collect(),
        w.iter().map(|&v| v * h).collect(),
    )
}

/// Golub–Welsch: nodes = eigenvalues of the Jacobi matrix, weights from the
/// first eigenvector components.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    use ndarray::Array2;
    use ndarray_linalg::{Eigh, UPLO};
    let n = diag.len();
    let mut j = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        j[[i, i]] = diag[i];
        if i + 1 < n {
            j[[i, i + 1]] = off[i];
            j[[i + 1, i]] = off[i];
        }
    }
    let (eigs, vecs) = j.eigh(UPLO::Lower).expect("symmetric tridiagonal");
    let nodes: Vec<f64> = eigs.to_vec();
    let weights: Vec<f64> = (0..n).map(|i| mu0 * vecs[[0, i]] * vecs[[0, i]]).collect();
    (nodes, weights)
}

/// Gauss–Hermite rule for ∫ f(t)·e^{−t²} dt, exact for polynomials of degree
/// ≤ 2n−1.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|i| (i as f64 / 2.0).sqrt()).collect();
    golub_welsch(&diag, &off, std::f64::consts::PI.sqrt())
}

/// Gauss–Laguerre rule for ∫₀^∞ f(u)·e^{−u} du, exact for polynomials of
/// degree ≤ 2n−1.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let diag: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64).collect();
    let off: Vec<f64> = (1..n).map(|i| i as f64).collect();
    golub_welsch(&diag, &off, 1.0)
}

/// SplitMix64 step, used to derive independent per-task seeds from
/// (seed, task index).
pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15));
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(_f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recur(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, m, fa, flm, fm);
        let right = simpson(f, m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recur(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recur(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(lo);
    let fb = f(hi);
    let fm = f(0.5 * (lo + hi));
    let whole = simpson(f, lo, hi, fa, fm, fb);
    recur(f, lo, hi, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_basics() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(0.5244005127080407) - 0.70).abs() < 1e-12);
    }

    #[test]
    fn partial_moments_match_quadrature() {
        let u = 0.7;
        let j = std_normal_partial_moments(u, 6);
        for k in 0..=6usize {
            let q = adaptive_simpson(&|t: f64| t.powi(k as i32) * normal_pdf(t), -40.0, u, 1e-13);
            assert!((j[k] - q).abs() < 1e-10, "k={k} j={} q={}", j[k], q);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polys() {
        let (x, w) = gauss_legendre_on(20, -1.0, 3.0);
        // ∫ t³ dt over [-1,3] = (81 − 1)/4 = 20
        let v: f64 = x.iter().zip(&w).map(|(&t, &wi)| t * t * t * wi).sum();
        assert!((v - 20.0).abs() < 1e-11);
    }

    #[test]
    fn splitmix_distinct() {
        let a = splitmix64(42, 0);
        let b = splitmix64(42, 1);
        assert_ne!(a, b);
        assert_eq!(a, splitmix64(42, 0));
    }
}
