//! Independent reference implementations used as test oracles. None of these
//! call into the library's numerics.

#![allow(dead_code)]

pub mod criteria;

use dlreg::numerics::DenseMatrix;
use dlreg::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Householder QR least squares; returns coefficients.
pub fn qr_least_squares(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let mut a: Vec<Vec<f64>> = x.to_vec();
    let mut b = y.to_vec();
    for k in 0..p {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (0..n).map(|i| if i < k { 0.0 } else { a[i][k] }).collect();
        v[k] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let s: f64 = (k..n).map(|i| v[i] * a[i][j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                a[i][j] -= s * v[i];
            }
        }
        let s: f64 = (k..n).map(|i| v[i] * b[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..n {
            b[i] -= s * v[i];
        }
    }
    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = ((k + 1)..p).map(|j| a[k][j] * beta[j]).sum();
        beta[k] = (b[k] - s) / a[k][k];
    }
    beta
}

/// Gauss-Jordan inverse of a small matrix.
pub fn inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..p).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.into_iter().map(|r| r[p..].to_vec()).collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum())
                .collect()
        })
        .collect()
}

/// Heteroskedasticity-robust (HC0) covariance of the OLS coefficients.
pub fn hc0_sandwich(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> Vec<Vec<f64>> {
    let p = beta.len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut meat = vec![vec![0.0; p]; p];
    for (row, &yi) in x.iter().zip(y) {
        let e = yi - row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        for a in 0..p {
            for b in 0..p {
                xtx[a][b] += row[a] * row[b];
                meat[a][b] += e * e * row[a] * row[b];
            }
        }
    }
    let inv = inverse(&xtx);
    matmul(&matmul(&inv, &meat), &inv)
}

/// Logistic regression by iteratively reweighted least squares.
pub fn irls_logit(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut info = vec![vec![0.0; p]; p];
        let mut score = vec![0.0; p];
        for (row, &yi) in x.iter().zip(y) {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            let w = mu * (1.0 - mu);
            for a in 0..p {
                score[a] += row[a] * (yi - mu);
                for b in 0..p {
                    info[a][b] += w * row[a] * row[b];
                }
            }
        }
        let inv = inverse(&info);
        let step: Vec<f64> = (0..p)
            .map(|a| (0..p).map(|b| inv[a][b] * score[b]).sum())
            .collect();
        for a in 0..p {
            beta[a] += step[a];
        }
        if step.iter().all(|s| s.abs() < 1e-14) {
            break;
        }
    }
    beta
}

/// Composite 5-point Gauss-Legendre rule on `panels` equal panels.
pub fn composite_gl5(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            X.iter()
                .zip(&W)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// `E(X | X ≤ d)` for `X ~ N(mu, s2)` by direct integration of the density.
pub fn truncated_mean_below_numeric(mu: f64, s2: f64, d: f64) -> f64 {
    let sd = s2.sqrt();
    let b = (d - mu) / sd;
    // integrate on the standardized scale, over the region holding the mass
    let (lo, hi) = if b < -4.0 {
        (b - 60.0 / -b, b)
    } else {
        (b.min(0.0) - 12.0, b)
    };
    // log-density relative to the upper end avoids underflow deep in the tail
    let dens = |z: f64| (-(z * z - hi * hi) / 2.0).exp();
    let num = composite_gl5(&|z| z * dens(z), lo, hi, 400);
    let den = composite_gl5(&dens, lo, hi, 400);
    mu + sd * num / den
}

/// Regularized upper incomplete gamma `Q(a, x)` by series / continued fraction.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    let ln_gamma_a = ln_gamma(a);
    if x < a + 1.0 {
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut k = a;
        for _ in 0..10_000 {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma_a).exp()
    } else {
        // Lentz
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma_a).exp() * h
    }
}

/// Lanczos approximation.
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn chi_square_upper(stat: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Random linear-model dataset; `delta` below every covariate value when
/// `uncensored` is set.
pub fn random_linear_dataset(seed: u64, n: usize, uncensored: bool) -> Dataset {
    let mut r = rng(seed);
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(2 * n);
    let mut z = Vec::with_capacity(2 * n);
    let beta = [
        0.5 + r.random::<f64>(),
        -1.0 + 2.0 * r.random::<f64>(),
        0.7,
        -0.4,
    ];
    for _ in 0..n {
        let z1 = normal(&mut r);
        let z2 = if r.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let xi = 1.0 + z1 + 0.5 * z2 + 0.5 * normal(&mut r);
        let u1 = normal(&mut r);
        let u2 = if r.random::<f64>() < 0.4 { 1.0 } else { 0.0 };
        // heteroskedastic errors so the robust sandwich differs from the model-based one
        let e = (0.5 + 0.5 * xi.abs()) * normal(&mut r);
        y.push(beta[0] + beta[1] * xi + beta[2] * u1 + beta[3] * u2 + e);
        x.push(xi);
        u.extend([u1, u2]);
        z.extend([z1, z2]);
    }
    let min_x = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = if uncensored { min_x - 1.0 } else { 0.8 };
    Dataset::from_values(
        y,
        x,
        DenseMatrix::from_row_major(n, 2, u).unwrap(),
        DenseMatrix::from_row_major(n, 2, z).unwrap(),
        delta,
    )
    .unwrap()
}

/// `|a - b| ≤ rel · max(|a|, |b|) + abs_floor`.
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs_floor
}
