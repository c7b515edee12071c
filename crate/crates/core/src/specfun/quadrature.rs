use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Applies the rule to `f` on `[-1, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Number of Gauss–Legendre nodes per panel.
pub const PANEL_ORDER: usize = 16;

/// The 16-point rule shared by every panel discretization.
pub fn gl16() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER).expect("16 is a valid order"))
}

/// Gauss–Legendre rule of the given order, `1 <= order <= 64`.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if !(1..=64).contains(&order) {
        return Err(Error::Config(format!(
            "Gauss-Legendre order must be in 1..=64, got {order}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // i-th largest root, refined by Newton on the three-term recurrence.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for m in 1..n {
        let m = m as f64;
        let p2 = ((2.0 * m + 1.0) * x * p1 - m * p0) / (m + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `P_0(t), ..., P_nmax(t)`.
pub fn legendre_values(nmax: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(nmax + 1);
    p.push(1.0);
    if nmax >= 1 {
        p.push(t);
    }
    for m in 1..nmax {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0) * t * p[m] - mf * p[m - 1]) / (mf + 1.0);
        p.push(next);
    }
    p
}

/// Legendre functions of the second kind `Q_0..=Q_mmax` at real `x`, `|x| != 1`.
/// Inside `(-1, 1)` these are the Ferrers functions (forward recurrence is
/// stable there); outside, the minimal solution is obtained by backward
/// recurrence.
fn legendre_q(mmax: usize, x: f64) -> Vec<f64> {
    let mut q = vec![0.0; mmax + 1];
    if x.abs() < 1.0 {
        q[0] = x.atanh();
        if mmax >= 1 {
            q[1] = x * q[0] - 1.0;
        }
        for m in 1..mmax {
            let mf = m as f64;
            q[m + 1] = ((2.0 * mf + 1.0) * x * q[m] - mf * q[m - 1]) / (mf + 1.0);
        }
        return q;
    }
    let ax = x.abs();
    let rho = ax + (ax * ax - 1.0).sqrt();
    let extra = (43.0 / rho.ln()).ceil() as usize;
    let start = mmax + 2 + extra.min(100_000);
    let mut y_next = 0.0; // y_{m+1}
    let mut y = 1e-30; // y_m
    for m in (1..=start).rev() {
        let mf = m as f64;
        let y_prev = ((2.0 * mf + 1.0) * ax * y - (mf + 1.0) * y_next) / mf;
        y_next = y;
        y = y_prev;
        if m - 1 <= mmax {
            q[m - 1] = y;
        }
        if y.abs() > 1e200 {
            let s = 1e-200;
            y *= s;
            y_next *= s;
            for v in q.iter_mut() {
                *v *= s;
            }
        }
    }
    let scale = (1.0 / ax).atanh() / q[0];
    for (m, v) in q.iter_mut().enumerate() {
        *v *= scale;
        // Q_m(-x) = (-1)^(m+1) Q_m(x)
        if x < 0.0 && m % 2 == 0 {
            *v = -*v;
        }
    }
    q
}

/// Moments `∫_{-1}^{1} P_n(t) log|t - t0| dt` for `n = 0..=nmax`, `|t0| != 1`.
pub fn legendre_log_moments(nmax: usize, t0: f64) -> Vec<f64> {
    debug_assert!((t0.abs() - 1.0).abs() > 0.0);
    let q = legendre_q(nmax + 1, t0);
    let xlogx = |v: f64| if v == 0.0 { 0.0 } else { v * v.abs().ln() };
    let mut m = Vec::with_capacity(nmax + 1);
    m.push(xlogx(1.0 - t0) + xlogx(1.0 + t0) - 2.0);
    for n in 1..=nmax {
        m.push(2.0 / (2.0 * n as f64 + 1.0) * (q[n + 1] - q[n - 1]));
    }
    m
}

/// Weights `W_j` such that `∫_{-1}^{1} p(t) log|t - t0| dt = Σ_j W_j p(t_j)`
/// for every polynomial `p` of degree below the rule order.
pub fn log_product_weights(rule: &QuadratureRule, t0: f64) -> Vec<f64> {
    let n = rule.order;
    let moments = legendre_log_moments(n - 1, t0);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let p = legendre_values(n - 1, t);
            let s: f64 = (0..n)
                .map(|m| moments[m] * (2.0 * m as f64 + 1.0) * 0.5 * p[m])
                .sum();
            w * s
        })
        .collect()
}

/// Barycentric weights for polynomial interpolation through `nodes`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &xi)| xj - xi)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Matrix mapping values at `nodes` to values of the interpolating polynomial
/// at `targets`.
pub fn interpolation_matrix(nodes: &[f64], targets: &[f64]) -> DMatrix<f64> {
    let lam = barycentric_weights(nodes);
    let mut m = DMatrix::zeros(targets.len(), nodes.len());
    for (i, &t) in targets.iter().enumerate() {
        if let Some(j) = nodes.iter().position(|&x| x == t) {
            m[(i, j)] = 1.0;
            continue;
        }
        let terms: Vec<f64> = nodes.iter().zip(&lam).map(|(&x, &l)| l / (t - x)).collect();
        let denom: f64 = terms.iter().sum();
        for (j, v) in terms.into_iter().enumerate() {
            m[(i, j)] = v / denom;
        }
    }
    m
}

/// Spectral differentiation matrix: `D[i][j] = ℓ_j'(x_i)`.
pub fn differentiation_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let lam = barycentric_weights(nodes);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = lam[j] / lam[i] / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}
