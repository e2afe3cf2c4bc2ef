//! Fixed-order quadrature rules used to build product-integration weights.

use std::f64::consts::PI;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f(x)` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
            * r
    }
}

pub fn gauss_legendre_10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

pub fn gauss_legendre_20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

/// Gauss-Jacobi rule for the weight (1 - y)^a (1 + y)^b on [-1, 1], built by
/// the Golub-Welsch eigenvalue method.
pub struct GaussJacobi {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
        let ab = a + b;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        diag[0] = (b - a) / (ab + 2.0);
        for (k, d) in diag.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let s = 2.0 * kf + ab;
            *d = (b * b - a * a) / (s * (s + 2.0));
        }
        if n > 1 {
            off[0] = (4.0 * (1.0 + a) * (1.0 + b) / ((ab + 2.0).powi(2) * (ab + 3.0))).sqrt();
        }
        for (k, o) in off.iter_mut().enumerate().skip(1) {
            let kf = (k + 1) as f64;
            let s = 2.0 * kf + ab;
            *o = (4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
        }
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(m);
        let mu0 = (2f64).powf(ab + 1.0)
            * (ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0)).exp();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        GaussJacobi {
            a,
            b,
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// ∫_lo^hi (hi - x)^a (x - lo)^b s(x) dx for smooth `s`.
    pub fn integrate(&self, lo: f64, hi: f64, mut s: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * s(c + r * y))
            .sum();
        sum * r.powf(self.a + self.b + 1.0)
    }
}

fn ln_gamma(x: f64) -> f64 {
    crate::specialfn::ln_gamma(x).expect("positive argument")
}

type RuleCache = Mutex<HashMap<(u64, u64), Arc<GaussJacobi>>>;

/// Shared Gauss-Jacobi rules keyed by exponent bit patterns.
pub fn gauss_jacobi(a: f64, b: f64) -> Arc<GaussJacobi> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (a.to_bits(), b.to_bits());
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(GaussJacobi::new(16, a, b));
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(key, rule.clone());
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = gauss_legendre_10();
        let v = gl.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() / v < 1e-13);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_jacobi_endpoint_singularities() {
        // ∫_0^1 x^{-1/2} (1-x)^{-1/2} dx = π
        let gj = GaussJacobi::new(16, -0.5, -0.5);
        let v = gj.integrate(0.0, 1.0, |_| 1.0);
        assert!((v - PI).abs() < 1e-13, "{v}");
        // ∫_0^2 (2-x)^{-0.999} x dx = 2^{1.001}·B(0.001, 2)
        let gj = GaussJacobi::new(16, -0.999, 0.0);
        let v = gj.integrate(0.0, 2.0, |x| x);
        let exact = 2f64.powf(1.001) / (0.001 * 1.001);
        assert!((v - exact).abs() / exact < 1e-12, "{v} {exact}");
        // smooth factor: ∫_0^1 x^{-0.3} e^x dx = Σ 1/(k!(k+0.7))
        let gj = GaussJacobi::new(16, 0.0, -0.3);
        let v = gj.integrate(0.0, 1.0, f64::exp);
        let mut reference = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            reference += 1.0 / (fact * (k as f64 + 0.7));
        }
        assert!((v - reference).abs() < 1e-12, "{v} {reference}");
    }
}
