//! Small numerical helpers: Gauss–Legendre rules, trapezoid sums, pairwise
//! reductions.

use std::sync::OnceLock;

use crate::Complex64;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let m = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + m * x);
        }
        s * m
    }

    pub fn integrate_c(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> Complex64) -> Complex64 {
        let c = 0.5 * (a + b);
        let m = 0.5 * (b - a);
        let mut s = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += f(c + m * x) * *w;
        }
        s * m
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Trapezoid integral of samples `y` over abscissae `t`.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    assert_eq!(t.len(), y.len());
    let mut s = 0.0;
    for i in 1..t.len() {
        s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    }
    s
}

/// Running trapezoid integral; first entry is zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(t.len(), y.len());
    let mut out = Vec::with_capacity(t.len());
    let mut s = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            s += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(s);
    }
    out
}

/// Linear interpolation of a running integral at time `x`.
pub fn interp_linear(t: &[f64], y: &[f64], x: f64) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    if x <= t[0] {
        return y[0];
    }
    if x >= t[t.len() - 1] {
        return y[y.len() - 1];
    }
    let i = t.partition_point(|&v| v <= x);
    let (t0, t1) = (t[i - 1], t[i]);
    let w = (x - t0) / (t1 - t0);
    y[i - 1] * (1.0 - w) + y[i] * w
}

/// Pairwise (tree) sum with a fixed reduction order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let t = [0.0, 0.5, 2.0];
        let y = [1.0, 2.0, 5.0];
        assert!((trapezoid(&t, &y) - 6.0).abs() < 1e-14);
        let c = cumulative_trapezoid(&t, &y);
        assert_eq!(c.len(), 3);
        assert!((interp_linear(&t, &c, 2.0) - 6.0).abs() < 1e-14);
    }
}
