//! Dense 2N x 2N reference for the walk operator, assembled term by term from
//! the operator definitions. Shared by integration tests; it never calls the
//! engine's stepping code.

#![allow(dead_code)]

use num_complex::Complex64;
use rogue_walk::PhaseField;

pub type Matrix = Vec<Vec<Complex64>>;

// basis ordering: |c, n> -> 2n + c with c = 0 (up), 1 (down)
fn idx(site: usize, down: bool) -> usize {
    2 * site + usize::from(down)
}

pub fn zeros(dim: usize) -> Matrix {
    vec![vec![Complex64::new(0.0, 0.0); dim]; dim]
}

pub fn identity(dim: usize) -> Matrix {
    let mut m = zeros(dim);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let dim = a.len();
    let mut out = zeros(dim);
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn adjoint(a: &Matrix) -> Matrix {
    let dim = a.len();
    let mut out = zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            out[j][i] = a[i][j].conj();
        }
    }
    out
}

/// Conditional shift: up n -> n+1, down n -> n-1, periodic.
pub fn shift(n: usize) -> Matrix {
    let mut s = zeros(2 * n);
    let one = Complex64::new(1.0, 0.0);
    for site in 0..n - 1 {
        s[idx(site + 1, false)][idx(site, false)] += one;
    }
    for site in 1..n {
        s[idx(site - 1, true)][idx(site, true)] += one;
    }
    s[idx(0, false)][idx(n - 1, false)] += one;
    s[idx(n - 1, true)][idx(0, true)] += one;
    s
}

/// Coin `cos|u><u| + sin|u><d| + sin|d><u| - cos|d><d|` on every site.
pub fn coin(n: usize, theta: f64) -> Matrix {
    let mut c = zeros(2 * n);
    let (co, si) = (
        Complex64::new(theta.cos(), 0.0),
        Complex64::new(theta.sin(), 0.0),
    );
    for site in 0..n {
        let (u, d) = (idx(site, false), idx(site, true));
        c[u][u] = co;
        c[u][d] = si;
        c[d][u] = si;
        c[d][d] = -co;
    }
    c
}

pub fn phase(field: &PhaseField) -> Matrix {
    let n = field.n_sites();
    let mut d = zeros(2 * n);
    for site in 0..n {
        d[idx(site, false)][idx(site, false)] = Complex64::from_polar(1.0, field.up_phases()[site]);
        d[idx(site, true)][idx(site, true)] = Complex64::from_polar(1.0, field.down_phases()[site]);
    }
    d
}

/// `S * C * D` as one dense matrix.
pub fn walk_operator(theta: f64, field: &PhaseField) -> Matrix {
    let n = field.n_sites();
    matmul(&shift(n), &matmul(&coin(n, theta), &phase(field)))
}

/// Interleaves up/down amplitudes into the dense basis.
pub fn to_dense(up: &[Complex64], down: &[Complex64]) -> Vec<Complex64> {
    up.iter().zip(down).flat_map(|(&a, &b)| [a, b]).collect()
}

/// Evolves the uniform initial vector `steps` times with the dense operator.
pub fn dense_evolution(theta: f64, field: &PhaseField, steps: usize) -> Vec<Complex64> {
    let n = field.n_sites();
    let amp = 1.0 / (2.0 * n as f64).sqrt();
    let mut v: Vec<Complex64> = (0..n)
        .flat_map(|_| [Complex64::new(amp, 0.0), Complex64::new(0.0, amp)])
        .collect();
    let u = walk_operator(theta, field);
    for _ in 0..steps {
        v = matvec(&u, &v);
    }
    v
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
