//! Spectral measures of dense real symmetric matrices.
//!
//! Survival amplitudes only need the eigenvalues `E_j` and the weights
//! `|⟨v_j|ψ⟩|²` of the initial state, not the eigenvectors themselves. The
//! routine here reduces the matrix to tridiagonal form with Householder
//! reflectors and runs implicit QL on the tridiagonal matrix, applying every
//! transformation to the probe vectors instead of accumulating an eigenvector
//! matrix. That saves roughly two thirds of the work of a full
//! eigendecomposition.

use num_complex::Complex64;

use crate::{Error, Result};

/// Eigenvalues (ascending) and the summed squared projections of the probe
/// vectors on the corresponding eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SpectralMeasure {
    /// `Σ_j w_j e^{-i E_j t}`.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (&e, &w) in self.eigenvalues.iter().zip(&self.weights) {
            let (s, c) = (e * t).sin_cos();
            re += w * c;
            im -= w * s;
        }
        Complex64::new(re, im)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Spectral measure of the real symmetric `n × n` matrix stored row-major in
/// `lower` (only the lower triangle, diagonal included, is read; the buffer is
/// used as workspace).
pub fn symmetric_spectral_measure(lower: &mut [f64], n: usize, probes: &[&[f64]]) -> Result<SpectralMeasure> {
    if lower.len() != n * n {
        return Err(Error::InvalidArgument(format!("expected {} entries, got {}", n * n, lower.len())));
    }
    if probes.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidArgument("probe length does not match matrix".into()));
    }
    let mut work: Vec<Vec<f64>> = probes.iter().map(|p| p.to_vec()).collect();
    let (mut d, mut e) = tridiagonalize(lower, n, &mut work);
    tridiagonal_ql(&mut d, &mut e, &mut work)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&j| d[j]).collect();
    let weights = order.iter().map(|&j| work.iter().map(|u| u[j] * u[j]).sum()).collect();
    Ok(SpectralMeasure { eigenvalues, weights })
}

/// Spectral measure of a complex Hermitian matrix for one complex probe,
/// through the real embedding `[[A, -B], [B, A]]` of `H = A + iB`. Every
/// eigenvalue appears twice; the two weights of a pair add up to
/// `|⟨v_j|ψ⟩|²`, so amplitudes come out unchanged.
pub fn hermitian_spectral_measure(h: &nalgebra::DMatrix<Complex64>, probe: &[Complex64]) -> Result<SpectralMeasure> {
    let n = h.nrows();
    if h.ncols() != n || probe.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let m = 2 * n;
    let mut lower = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..=i {
            let z = h[(i, j)];
            lower[i * m + j] = z.re;
            lower[(i + n) * m + j + n] = z.re;
            // lower-left block B, including its (i, j > i) entries
            lower[(i + n) * m + j] = z.im;
            if j != i {
                lower[(j + n) * m + i] = -z.im;
            }
        }
    }
    let probe: Vec<f64> = probe.iter().map(|z| z.re).chain(probe.iter().map(|z| z.im)).collect();
    symmetric_spectral_measure(&mut lower, m, &[&probe])
}

/// Householder reduction to tridiagonal form working on the lower triangle.
/// Returns the diagonal and the subdiagonal (`e[k]` couples `k` and `k + 1`,
/// `e[n - 1] = 0`); each reflector is also applied to the probe vectors.
fn tridiagonalize(a: &mut [f64], n: usize, probes: &mut [Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let off = k + 1;
        for i in 0..m {
            v[i] = a[(off + i) * n + k];
        }
        let alpha = v[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
        d[k] = a[k * n + k];
        if alpha == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let beta = if v[0] >= 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let tau = 2.0 / v[..m].iter().map(|x| x * x).sum::<f64>();
        e[k] = beta;

        // p = A22 v from the lower triangle
        p[..m].fill(0.0);
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + off + i + 1];
            let vi = v[i];
            let (strict, diag) = row.split_at(i);
            let mut dot = diag[0] * vi;
            for ((pj, &aij), &vj) in p[..i].iter_mut().zip(strict).zip(&v[..i]) {
                dot += aij * vj;
                *pj += aij * vi;
            }
            p[i] += dot;
        }
        let mut pv = 0.0;
        for i in 0..m {
            p[i] *= tau;
            pv += p[i] * v[i];
        }
        let kk = 0.5 * tau * pv;
        for i in 0..m {
            p[i] -= kk * v[i];
        }
        // A22 -= v pᵀ + p vᵀ
        for i in 0..m {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + off + i + 1];
            for ((aij, &vj), &pj) in row.iter_mut().zip(&v[..=i]).zip(&p[..=i]) {
                *aij -= vi * pj + pi * vj;
            }
        }
        for w in probes.iter_mut() {
            let s = tau * v[..m].iter().zip(&w[off..]).map(|(a, b)| a * b).sum::<f64>();
            for (wi, &vi) in w[off..].iter_mut().zip(&v[..m]) {
                *wi -= s * vi;
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1) * n + n - 1];
    }
    (d, e)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (the classic `tqli` iteration). The rotations are applied to `probes`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], probes: &mut [Vec<f64>]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Eigensolver(format!("QL iteration did not converge for eigenvalue {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for u in probes.iter_mut() {
                    let f = u[i + 1];
                    u[i + 1] = s * u[i] + c * f;
                    u[i] = c * u[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &m + m.transpose()
    }

    fn measure_of(m: &DMatrix<f64>, probes: &[Vec<f64>]) -> SpectralMeasure {
        let n = m.nrows();
        let mut buf: Vec<f64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
        let refs: Vec<&[f64]> = probes.iter().map(|p| p.as_slice()).collect();
        symmetric_spectral_measure(&mut buf, n, &refs).unwrap()
    }

    #[test]
    fn matches_full_eigendecomposition() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (17, 4), (64, 5), (129, 6)] {
            let m = random_symmetric(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let got = measure_of(&m, &[a.clone(), b.clone()]);

            let eig = nalgebra::SymmetricEigen::new(m.clone());
            let mut pairs: Vec<(f64, f64)> = (0..n)
                .map(|j| {
                    let v = eig.eigenvectors.column(j);
                    let pa: f64 = v.iter().zip(&a).map(|(x, y)| x * y).sum();
                    let pb: f64 = v.iter().zip(&b).map(|(x, y)| x * y).sum();
                    (eig.eigenvalues[j], pa * pa + pb * pb)
                })
                .collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            for (j, (ev, w)) in pairs.iter().enumerate() {
                assert!((got.eigenvalues[j] - ev).abs() < 1e-10, "n={n} j={j}");
                assert!((got.weights[j] - w).abs() < 1e-10, "n={n} j={j}");
            }
            let norm2: f64 = a.iter().chain(&b).map(|x| x * x).sum();
            assert!((got.total_weight() - norm2).abs() < 1e-10 * norm2);
        }
    }

    #[test]
    fn diagonal_and_degenerate() {
        let mut m = DMatrix::<f64>::identity(6, 6) * 2.0;
        m[(5, 5)] = -1.0;
        let probe = vec![1.0; 6];
        let got = measure_of(&m, &[probe]);
        assert_eq!(got.eigenvalues, vec![-1.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
        assert!((got.weights[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_embedding() {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let h = &raw + raw.adjoint();
        let psi: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let got = hermitian_spectral_measure(&h, &psi).unwrap();

        let eig = nalgebra::SymmetricEigen::new(h.clone());
        for t in [0.0, 0.3, 1.7, 5.0] {
            let mut expect = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let v = eig.eigenvectors.column(j);
                let ov: Complex64 = v.iter().zip(&psi).map(|(x, y)| x.conj() * y).sum();
                expect += ov.norm_sqr() * Complex64::from_polar(1.0, -eig.eigenvalues[j] * t);
            }
            assert!((got.amplitude(t) - expect).norm() < 1e-10);
        }
    }
}
