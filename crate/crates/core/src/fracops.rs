//! Left/right fractional integrals and derivatives on a uniform time grid.
//!
//! All integrals use product integration: the data are interpolated
//! piecewise-linearly and integrated exactly against the weakly singular
//! kernel. Series may carry a known algebraic weight `t^p (T - t)^q`
//! (see [`Weight`]); the weight is folded into the quadrature instead of
//! being sampled, which keeps fields such as `t^{α-1}` or `(T - t)^{α-1}`
//! representable on the grid.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::quad::{gauss_jacobi, gauss_legendre_10, gauss_legendre_20};
use crate::specialfn::{gamma, hyp2f1, rgamma};

/// Uniform grid `t_i = i·T/n_steps` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("T must be positive, got {horizon}")));
        }
        if n_steps < 2 {
            return Err(Error::InsufficientGrid(format!(
                "n_steps must be at least 2, got {n_steps}"
            )));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.step()
        }
    }

    /// Distance `T - t_i`, exact at the last node.
    pub fn to_end(&self, i: usize) -> f64 {
        (self.n_steps - i) as f64 * self.step()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    fn key(&self) -> (u64, usize) {
        (self.horizon.to_bits(), self.n_steps)
    }
}

/// Known algebraic factor `t^left · (T - t)^right` multiplying stored values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Weight {
    pub left: f64,
    pub right: f64,
}

impl Weight {
    pub const NONE: Weight = Weight {
        left: 0.0,
        right: 0.0,
    };

    pub fn new(left: f64, right: f64) -> Self {
        Weight { left, right }
    }

    pub fn is_none(&self) -> bool {
        self.left == 0.0 && self.right == 0.0
    }

    /// True when the factor is bounded on `[0, T]`.
    pub fn is_bounded(&self) -> bool {
        self.left >= 0.0 && self.right >= 0.0
    }

    pub fn mirrored(&self) -> Self {
        Weight {
            left: self.right,
            right: self.left,
        }
    }

    pub fn combine(&self, other: &Weight) -> Self {
        Weight {
            left: self.left + other.left,
            right: self.right + other.right,
        }
    }

    fn factor(&self, t: f64, to_end: f64) -> f64 {
        let mut w = 1.0;
        if self.left != 0.0 {
            w *= t.powf(self.left);
        }
        if self.right != 0.0 {
            w *= to_end.powf(self.right);
        }
        w
    }

    /// Value of the weight at node `i` of `grid`.
    pub fn at(&self, grid: &TimeGrid, i: usize) -> f64 {
        self.factor(grid.node(i), grid.to_end(i))
    }

    fn key(&self) -> (u64, u64) {
        (self.left.to_bits(), self.right.to_bits())
    }
}

/// Samples of `f(t) = weight(t) · values(t)` on a [`TimeGrid`].
///
/// Values at the two end nodes may be non-finite when they are outputs of
/// operators that blow up there; such nodes are boundary-unreliable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
    weight: Weight,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::weighted(grid, Weight::NONE, values)
    }

    pub fn weighted(grid: TimeGrid, weight: Weight, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("time series values must be finite".into()));
        }
        Ok(TimeSeries {
            grid,
            values,
            weight,
        })
    }

    pub(crate) fn raw(grid: TimeGrid, weight: Weight, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        TimeSeries {
            grid,
            values,
            weight,
        }
    }

    pub fn sample(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::raw(grid, Weight::NONE, vec![0.0; grid.len()])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    /// Stored values, without the weight factor.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        let w = self.weight.at(&self.grid, i);
        if self.values[i] == 0.0 {
            // an exact zero stays zero against an infinite weight
            return 0.0;
        }
        w * self.values[i]
    }

    /// Values with the weight multiplied in.
    pub fn materialize(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.value(i)).collect()
    }

    /// Same function with the weight folded into the values when it is bounded.
    pub fn unweighted(&self) -> Result<TimeSeries> {
        if self.weight.is_none() {
            return Ok(self.clone());
        }
        if !self.weight.is_bounded() {
            return Err(Error::SingularData(format!(
                "weight t^{} (T-t)^{} is unbounded",
                self.weight.left, self.weight.right
            )));
        }
        Ok(Self::raw(self.grid, Weight::NONE, self.materialize()))
    }

    pub fn mirrored(&self) -> TimeSeries {
        let mut values = self.values.clone();
        values.reverse();
        Self::raw(self.grid, self.weight.mirrored(), values)
    }

    pub fn scale(&self, c: f64) -> TimeSeries {
        Self::raw(
            self.grid,
            self.weight,
            self.values.iter().map(|v| v * c).collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    fn check_same_grid(&self, other: &TimeSeries) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Riemann-Liouville or Caputo left-sided time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FractionalKind {
    #[serde(alias = "RL", alias = "rl")]
    RiemannLiouville,
    #[serde(alias = "caputo")]
    Caputo,
}

impl FractionalKind {
    pub fn label(&self) -> &'static str {
        match self {
            FractionalKind::RiemannLiouville => "RL",
            FractionalKind::Caputo => "Caputo",
        }
    }
}

/// Derivative kind, order α ∈ (0, 2) \ {1} and horizon T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalSpec {
    pub kind: FractionalKind,
    pub alpha: f64,
    pub horizon: f64,
}

impl FractionalSpec {
    pub fn new(kind: FractionalKind, alpha: f64, horizon: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("T must be positive, got {horizon}")));
        }
        Ok(FractionalSpec {
            kind,
            alpha,
            horizon,
        })
    }

    /// n = ⌊α⌋ + 1.
    pub fn order(&self) -> usize {
        integer_order(self.alpha)
    }

    pub fn is_wave(&self) -> bool {
        self.alpha > 1.0
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) || alpha == 1.0 {
        return Err(Error::Parameter(format!(
            "alpha must lie in (0,2) and differ from 1, got {alpha}"
        )));
    }
    Ok(())
}

pub(crate) fn integer_order(alpha: f64) -> usize {
    alpha.floor() as usize + 1
}

// ---------------------------------------------------------------------------
// product-integration rules

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kernel {
    /// (t - τ)^{μ-1} / Γ(μ)
    Power { mu: f64 },
    /// (t - τ)^{1-α} ₂F₁(1, 1; 2-α; (t-τ)/(T-τ)) / Γ(2-α)
    Hypergeometric { alpha: f64 },
}

impl Kernel {
    fn key(&self) -> (u8, u64) {
        match self {
            Kernel::Power { mu } => (0, mu.to_bits()),
            Kernel::Hypergeometric { alpha } => (1, alpha.to_bits()),
        }
    }

    /// Algebraic exponent at gap = 0.
    fn exponent(&self) -> f64 {
        match self {
            Kernel::Power { mu } => mu - 1.0,
            Kernel::Hypergeometric { alpha } => 1.0 - alpha,
        }
    }

    /// Kernel divided by gap^exponent.
    fn smooth_part(&self, gap: f64, to_end_tau: f64) -> f64 {
        match *self {
            Kernel::Power { mu } => rgamma(mu),
            Kernel::Hypergeometric { alpha } => {
                let z = if to_end_tau > 0.0 { gap / to_end_tau } else { 0.0 };
                hyp2f1(1.0, 1.0, 2.0 - alpha, z).unwrap_or(f64::NAN) * rgamma(2.0 - alpha)
            }
        }
    }

    fn eval(&self, gap: f64, to_end_tau: f64) -> f64 {
        let e = self.exponent();
        let g = if e == 0.0 { 1.0 } else { gap.powf(e) };
        g * self.smooth_part(gap, to_end_tau)
    }
}

/// Lower-triangular weights: `I(t_i) = Σ_j rows[i][j] · values[j]`.
#[derive(Debug)]
pub(crate) struct ProductRule {
    pub(crate) rows: Vec<Vec<f64>>,
}

type RuleKey = ((u64, usize), (u8, u64), (u64, u64));

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<ProductRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<ProductRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn left_rule(grid: &TimeGrid, kernel: Kernel, weight: Weight) -> Arc<ProductRule> {
    let key = (grid.key(), kernel.key(), weight.key());
    if let Some(rule) = rule_cache().lock().expect("rule cache poisoned").get(&key) {
        return rule.clone();
    }
    let rule = Arc::new(match kernel {
        Kernel::Power { mu } if weight.is_none() => toeplitz_rule(grid, mu),
        _ => weighted_rule(grid, kernel, weight),
    });
    rule_cache()
        .lock()
        .expect("rule cache poisoned")
        .insert(key, rule.clone());
    rule
}

/// Unit-cell moments of the power kernel against the two hat functions:
/// `a[m] = ∫_m^{m+1} s^{μ-1}(s-m) ds`, `b[m] = ∫_m^{m+1} s^{μ-1}(m+1-s) ds`.
fn power_cell_moments(mu: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    let gl = gauss_legendre_10();
    let mut a = Vec::with_capacity(count);
    let mut b = Vec::with_capacity(count);
    for m in 0..count {
        if m == 0 {
            a.push(1.0 / (mu + 1.0));
            b.push(1.0 / mu - 1.0 / (mu + 1.0));
        } else {
            let mf = m as f64;
            a.push(gl.integrate(mf, mf + 1.0, |s| s.powf(mu - 1.0) * (s - mf)));
            b.push(gl.integrate(mf, mf + 1.0, |s| s.powf(mu - 1.0) * (mf + 1.0 - s)));
        }
    }
    (a, b)
}

fn toeplitz_rule(grid: &TimeGrid, mu: f64) -> ProductRule {
    let n = grid.n_steps();
    let scale = grid.step().powf(mu) * rgamma(mu);
    let (a, b) = power_cell_moments(mu, n);
    let rows = (0..=n)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    let mut w = 0.0;
                    // cell [t_j, t_{j+1}] sits at distance m = i-1-j from t_i
                    if j < i {
                        w += a[i - 1 - j];
                    }
                    // cell [t_{j-1}, t_j]
                    if j >= 1 {
                        w += b[i - j];
                    }
                    w * scale
                })
                .collect()
        })
        .collect();
    ProductRule { rows }
}

fn weighted_rule(grid: &TimeGrid, kernel: Kernel, weight: Weight) -> ProductRule {
    let n = grid.n_steps();
    let h = grid.step();
    let horizon = grid.horizon();
    let ke = kernel.exponent();
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(vec![0.0]);
    for i in 1..=n {
        let t_i = grid.node(i);
        let to_end_i = grid.to_end(i);
        let mut row = vec![0.0; i + 1];
        for j in 0..i {
            let lo = grid.node(j);
            let hi = grid.node(j + 1);
            let kernel_end = j + 1 == i;
            let weight_left_end = j == 0 && weight.left != 0.0;
            let weight_right_end = j + 1 == n && weight.right != 0.0;
            let e_right = if kernel_end { ke } else { 0.0 }
                + if weight_right_end { weight.right } else { 0.0 };
            let e_left = if weight_left_end { weight.left } else { 0.0 };
            if e_right <= -1.0 || e_left <= -1.0 {
                row.iter_mut().for_each(|w| *w = f64::NAN);
                break;
            }
            // smooth remainder of kernel·weight once the endpoint powers are divided out
            let smooth = |tau: f64| -> f64 {
                let gap = (t_i - tau).max(0.0);
                let to_end_tau = to_end_i + gap;
                let k = if kernel_end {
                    kernel.smooth_part(gap, to_end_tau)
                } else {
                    kernel.eval(gap, to_end_tau)
                };
                let mut w = k;
                if weight.left != 0.0 && !weight_left_end {
                    w *= tau.powf(weight.left);
                }
                if weight.right != 0.0 && !weight_right_end {
                    w *= (horizon - tau).powf(weight.right);
                }
                w
            };
            let (w_lo, w_hi) = if e_right != 0.0 || e_left != 0.0 {
                let rule = gauss_jacobi(e_right, e_left);
                let f_lo = rule.integrate(lo, hi, |tau| smooth(tau) * (hi - tau) / h);
                let f_hi = rule.integrate(lo, hi, |tau| smooth(tau) * (tau - lo) / h);
                (f_lo, f_hi)
            } else {
                let near = j + 2 >= i || j <= 1 || j + 2 >= n;
                let gl = if near { gauss_legendre_20() } else { gauss_legendre_10() };
                let f_lo = gl.integrate(lo, hi, |tau| smooth(tau) * (hi - tau) / h);
                let f_hi = gl.integrate(lo, hi, |tau| smooth(tau) * (tau - lo) / h);
                (f_lo, f_hi)
            };
            row[j] += w_lo;
            row[j + 1] += w_hi;
        }
        rows.push(row);
    }
    ProductRule { rows }
}

/// Rows of the left power-kernel rule for data carrying `weight`.
pub(crate) fn power_rule(grid: &TimeGrid, mu: f64, weight: Weight) -> Arc<ProductRule> {
    left_rule(grid, Kernel::Power { mu }, weight)
}

fn apply_rule(rule: &ProductRule, values: &[f64]) -> Vec<f64> {
    rule.rows
        .iter()
        .map(|row| row.iter().zip(values).map(|(w, v)| w * v).sum())
        .collect()
}

/// Left fractional integral `₀I^μ_t f` at every node.
///
/// When the data carry a weight whose singularity survives integration the
/// output keeps the reduced weight `t^{p+μ}` or `(T-t)^{q+μ}` and the end-node
/// value holds the coefficient of that power.
pub fn left_frac_integral(f: &TimeSeries, mu: f64) -> Result<TimeSeries> {
    if !(mu > 0.0) {
        return Err(Error::Domain {
            value: mu,
            domain: "mu > 0",
        });
    }
    Ok(integrate_with(f, Kernel::Power { mu }))
}

fn integrate_with(f: &TimeSeries, kernel: Kernel) -> TimeSeries {
    let grid = *f.grid();
    let w = f.weight();
    if f.is_zero() {
        return TimeSeries::zeros(grid);
    }
    let rule = left_rule(&grid, kernel, w);
    let mut out = apply_rule(&rule, f.values());
    let n = grid.n_steps();
    let mut out_weight = Weight::NONE;
    if let Kernel::Power { mu } = kernel {
        let lead = snap_zero(w.left + mu);
        if w.left != 0.0 && lead <= 0.0 {
            // coefficient of t^{p+μ} at t = 0
            let coef = f.values()[0] * grid.horizon().powf(w.right) * gamma_ratio(w.left, mu);
            if lead < 0.0 {
                out_weight.left = lead;
                for (i, v) in out.iter_mut().enumerate().skip(1) {
                    *v /= grid.node(i).powf(lead);
                }
            }
            out[0] = coef;
        }
        let tail = snap_zero(w.right + mu);
        if w.right != 0.0 && tail <= 0.0 {
            if tail < 0.0 {
                out_weight.right = tail;
                for (i, v) in out.iter_mut().enumerate().take(n) {
                    *v /= grid.to_end(i).powf(tail);
                }
                // I(t) ~ f(T)·T^p·Γ(-μ-q)/Γ(-q)·(T-t)^{μ+q} as t -> T
                out[n] = f.values()[n]
                    * grid.horizon().powf(w.left)
                    * gamma(-tail).unwrap_or(f64::NAN)
                    * rgamma(-w.right);
            } else {
                out[n] = f64::NAN;
            }
        }
    } else {
        out[n] = f64::NAN;
    }
    TimeSeries::raw(grid, out_weight, out)
}

fn snap_zero(e: f64) -> f64 {
    if e.abs() < 1e-12 {
        0.0
    } else {
        e
    }
}

/// Γ(p+1)/Γ(p+μ+1), the power-rule constant.
fn gamma_ratio(p: f64, mu: f64) -> f64 {
    gamma(p + 1.0).unwrap_or(f64::NAN) * rgamma(p + mu + 1.0)
}

/// Right fractional integral `ₜI^μ_T f` at every node.
pub fn right_frac_integral(f: &TimeSeries, mu: f64) -> Result<TimeSeries> {
    Ok(left_frac_integral(&f.mirrored(), mu)?.mirrored())
}

/// The modified integral `ᶠ₀I^{2-α}_t f` with the ₂F₁(1,1;2-α;·) kernel,
/// α ∈ (1, 2). The value at t = T is not defined (kernel blows up) and is NaN.
pub fn f_modified_integral(f: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Parameter(format!("alpha must lie in (1,2), got {alpha}")));
    }
    if f.weight().left + 2.0 - alpha <= 0.0 {
        return Err(Error::SingularData("left weight too strong for the modified integral".into()));
    }
    Ok(integrate_with(f, Kernel::Hypergeometric { alpha }))
}

// ---------------------------------------------------------------------------
// finite differences

pub(crate) fn diff1(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            d[0] = (v[1] - v[0]) / h;
            d[1] = d[0];
        }
        return d;
    }
    let ok = |i: usize| v[i].is_finite();
    let forward = |i: usize| (-3.0 * v[i] + 4.0 * v[i + 1] - v[i + 2]) / (2.0 * h);
    let backward = |i: usize| (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h);
    // ends: central difference against a cubic ghost value, so the leading
    // error matches the interior and differencing twice stays second order
    let forward3 = |i: usize| (-4.0 * v[i] + 7.0 * v[i + 1] - 4.0 * v[i + 2] + v[i + 3]) / (2.0 * h);
    let backward3 = |i: usize| (4.0 * v[i] - 7.0 * v[i - 1] + 4.0 * v[i - 2] - v[i - 3]) / (2.0 * h);
    let long = n >= 4 && v[..4].iter().chain(&v[n - 4..]).all(|x| x.is_finite());
    d[0] = if long { forward3(0) } else { forward(0) };
    for i in 1..n - 1 {
        d[i] = if ok(i - 1) && ok(i + 1) {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        } else if !ok(i - 1) && i + 2 < n {
            // non-finite end value: stay on the finite side
            forward(i)
        } else if i >= 2 {
            backward(i)
        } else {
            f64::NAN
        };
    }
    d[n - 1] = if long { backward3(n - 1) } else { backward(n - 1) };
    d
}

pub(crate) fn diff2(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    if n < 4 {
        if n == 3 {
            let c = (v[2] - 2.0 * v[1] + v[0]) / (h * h);
            d.iter_mut().for_each(|x| *x = c);
        }
        return d;
    }
    let h2 = h * h;
    d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2;
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
    }
    d[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2;
    d
}

/// First time derivative, applying the product rule to the weight.
pub fn time_derivative(f: &TimeSeries) -> TimeSeries {
    let grid = *f.grid();
    let h = grid.step();
    let r = f.values();
    let rt = diff1(r, h);
    let Weight { left: p, right: q } = f.weight();
    let n = grid.len();
    let (values, weight) = match (p != 0.0, q != 0.0) {
        (false, false) => (rt, Weight::NONE),
        (true, false) => (
            (0..n).map(|i| grid.node(i) * rt[i] + p * r[i]).collect(),
            Weight::new(p - 1.0, 0.0),
        ),
        (false, true) => (
            (0..n).map(|i| grid.to_end(i) * rt[i] - q * r[i]).collect(),
            Weight::new(0.0, q - 1.0),
        ),
        (true, true) => (
            (0..n)
                .map(|i| {
                    let t = grid.node(i);
                    let s = grid.to_end(i);
                    (p * s - q * t) * r[i] + t * s * rt[i]
                })
                .collect(),
            Weight::new(p - 1.0, q - 1.0),
        ),
    };
    TimeSeries::raw(grid, weight, values)
}

fn time_derivative_n(f: &TimeSeries, n: usize) -> TimeSeries {
    (0..n).fold(f.clone(), |acc, _| time_derivative(&acc))
}

fn check_grid_for_order(f: &TimeSeries, n: usize) -> Result<()> {
    if f.grid().n_steps() < 2 * n {
        return Err(Error::InsufficientGrid(format!(
            "derivative of integer part {n} needs at least {} steps",
            2 * n
        )));
    }
    Ok(())
}

/// Riemann-Liouville derivative `D^n ₀I^{n-α}_t f`; α may be any positive
/// non-integer (used with α-1 for the diffusion-wave catalog).
pub fn rl_left_derivative(f: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    check_positive_noninteger(alpha)?;
    let n = integer_order(alpha);
    check_grid_for_order(f, n)?;
    let integral = left_frac_integral(f, n as f64 - alpha)?;
    Ok(time_derivative_n(&integral, n))
}

/// Caputo derivative `₀I^{n-α}_t D^n f`.
///
/// For n = 1 this is the L1 scheme (difference quotients held constant on
/// each cell); for n = 2 the node values of `f''` are interpolated linearly.
pub fn caputo_left_derivative(f: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    check_positive_noninteger(alpha)?;
    let n = integer_order(alpha);
    check_grid_for_order(f, n)?;
    let f = f.unweighted()?;
    let grid = *f.grid();
    let h = grid.step();
    let mu = n as f64 - alpha;
    match n {
        1 => {
            let (a, b) = power_cell_moments(mu, grid.n_steps());
            let scale = h.powf(mu) * rgamma(mu);
            let v = f.values();
            let slopes: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]) / h).collect();
            let out = (0..grid.len())
                .map(|i| {
                    (0..i)
                        .map(|j| (a[i - 1 - j] + b[i - 1 - j]) * slopes[j])
                        .sum::<f64>()
                        * scale
                })
                .collect();
            Ok(TimeSeries::raw(grid, Weight::NONE, out))
        }
        _ => {
            let curvature = diff2(f.values(), h);
            left_frac_integral(&TimeSeries::raw(grid, Weight::NONE, curvature), mu)
        }
    }
}

/// Right Riemann-Liouville derivative `(-1)^n D^n ₜI^{n-α}_T f`.
pub fn rl_right_derivative(f: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    Ok(rl_left_derivative(&f.mirrored(), alpha)?.mirrored())
}

/// Right Caputo derivative `(-1)^n ₜI^{n-α}_T D^n f`.
pub fn caputo_right_derivative(f: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    Ok(caputo_left_derivative(&f.mirrored(), alpha)?.mirrored())
}

fn check_positive_noninteger(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || alpha == alpha.round() {
        return Err(Error::Parameter(format!(
            "derivative order must be a positive non-integer, got {alpha}"
        )));
    }
    Ok(())
}

/// Grünwald-Letnikov approximation of the Riemann-Liouville operator of
/// order `order` (negative orders give fractional integrals). First order
/// accurate; kept as an independent cross-check of the product rules.
pub fn grunwald_letnikov(f: &TimeSeries, order: f64) -> Result<TimeSeries> {
    let f = f.unweighted()?;
    let grid = *f.grid();
    let n = grid.len();
    let mut coef = vec![1.0; n];
    for k in 1..n {
        coef[k] = coef[k - 1] * (1.0 - (order + 1.0) / k as f64);
    }
    let scale = grid.step().powf(-order);
    let v = f.values();
    let out = (0..n)
        .map(|i| (0..=i).map(|k| coef[k] * v[i - k]).sum::<f64>() * scale)
        .collect();
    Ok(TimeSeries::raw(grid, Weight::NONE, out))
}

// ---------------------------------------------------------------------------
// J integral

/// Coefficients of the overlap densities ρ_pq of two unit hats, split at s = 0.
/// `NEG[p][q]` is the polynomial in z = s + 1 on s ∈ [-1, 0];
/// `POS[p][q]` the polynomial in s on [0, 1].
const RHO_NEG: [[[f64; 4]; 2]; 2] = [
    [[0.0, 0.0, 0.5, -1.0 / 6.0], [0.0, 0.0, 0.0, 1.0 / 6.0]],
    [[0.0, 1.0, -1.0, 1.0 / 6.0], [0.0, 0.0, 0.5, -1.0 / 6.0]],
];
const RHO_POS: [[[f64; 4]; 2]; 2] = [
    [[1.0 / 3.0, -0.5, 0.0, 1.0 / 6.0], [1.0 / 6.0, 0.5, -0.5, -1.0 / 6.0]],
    [[1.0 / 6.0, -0.5, 0.5, -1.0 / 6.0], [1.0 / 3.0, -0.5, 0.0, 1.0 / 6.0]],
];

fn poly(c: &[f64; 4], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

/// m_pq(d) = ∫∫_{[0,1]²} φ_p(x) ψ_q(y) (d + y - x)^{μ-1} dy dx for d >= 1.
fn j_cell_moments(mu: f64, d: usize) -> [[f64; 2]; 2] {
    let gl = gauss_legendre_20();
    let df = d as f64;
    let mut m = [[0.0; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            let neg = if d == 1 {
                RHO_NEG[p][q]
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c / (mu + k as f64))
                    .sum()
            } else {
                gl.integrate(0.0, 1.0, |z| poly(&RHO_NEG[p][q], z) * (z + df - 1.0).powf(mu - 1.0))
            };
            let pos = gl.integrate(0.0, 1.0, |s| poly(&RHO_POS[p][q], s) * (s + df).powf(mu - 1.0));
            m[p][q] = neg + pos;
        }
    }
    m
}

/// `J(f, g)(t) = 1/Γ(n-α) ∫_0^t ∫_t^T f(τ) g(μ) (μ - τ)^{n-α-1} dμ dτ` at every
/// node, exact for piecewise-linear f and g; O(N²) overall.
pub fn j_integral(f: &TimeSeries, g: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    f.check_same_grid(g)?;
    check_positive_noninteger(alpha)?;
    let grid = *f.grid();
    if f.is_zero() || g.is_zero() {
        return Ok(TimeSeries::zeros(grid));
    }
    if !f.weight().is_bounded() || !g.weight().is_bounded() {
        return j_integral_weighted(f, g, alpha);
    }
    let f = f.unweighted()?;
    let g = g.unweighted()?;
    let mu = integer_order(alpha) as f64 - alpha;
    let n = grid.n_steps();
    let h = grid.step();
    let scale = h.powf(mu + 1.0) * rgamma(mu);
    let moments: Vec<[[f64; 2]; 2]> = (0..n).map(|d| if d == 0 { [[0.0; 2]; 2] } else { j_cell_moments(mu, d) }).collect();
    let fv = f.values();
    let gv = g.values();
    let pair = |a: usize, b: usize| -> f64 {
        let m = &moments[b - a];
        let mut s = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                s += fv[a + p] * gv[b + q] * m[p][q];
            }
        }
        s * scale
    };
    let mut out = vec![0.0; n + 1];
    for i in 0..n {
        // J_{i+1} - J_i: gain pairs with a = i, lose pairs with b = i
        let gain: f64 = (i + 1..n).map(|b| pair(i, b)).sum();
        let loss: f64 = (0..i).map(|a| pair(a, i)).sum();
        out[i + 1] = out[i] + gain - loss;
    }
    Ok(TimeSeries::raw(grid, Weight::NONE, out))
}

/// `J` for singular data: integrates `J' = f·ₜI^μ_T g - g·₀I^μ_t f` from 0
/// with the weighted product rule.
fn j_integral_weighted(f: &TimeSeries, g: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    let mu = integer_order(alpha) as f64 - alpha;
    let a = product(f, &right_frac_integral(g, mu)?)?;
    let b = product(g, &left_frac_integral(f, mu)?)?;
    let rate = linear_combination(&[(1.0, &a), (-1.0, &b)])?;
    left_frac_integral(&rate, 1.0)
}

/// `Σ c_i f_i` expressed in the weakest common weight.
pub fn linear_combination(terms: &[(f64, &TimeSeries)]) -> Result<TimeSeries> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::Parameter("empty linear combination".into()));
    };
    let grid = *first.grid();
    let mut target = Weight::new(f64::INFINITY, f64::INFINITY);
    for (_, f) in terms {
        first.check_same_grid(f)?;
        if f.is_zero() {
            continue;
        }
        target.left = target.left.min(f.weight().left);
        target.right = target.right.min(f.weight().right);
    }
    if !target.left.is_finite() {
        return Ok(TimeSeries::zeros(grid));
    }
    target.left = snap_zero(target.left);
    target.right = snap_zero(target.right);
    let mut out = vec![0.0; grid.len()];
    for (c, f) in terms {
        if f.is_zero() || *c == 0.0 {
            continue;
        }
        let extra = Weight::new(f.weight().left - target.left, f.weight().right - target.right);
        for (i, o) in out.iter_mut().enumerate() {
            let v = f.values()[i];
            if v != 0.0 {
                *o += c * v * extra.at(&grid, i);
            }
        }
    }
    Ok(TimeSeries::raw(grid, target, out))
}

// ---------------------------------------------------------------------------

/// Pointwise product of two series on the same grid; weights multiply.
pub fn product(f: &TimeSeries, g: &TimeSeries) -> Result<TimeSeries> {
    f.check_same_grid(g)?;
    Ok(TimeSeries::raw(
        *f.grid(),
        f.weight().combine(&g.weight()),
        f.values().iter().zip(g.values()).map(|(a, b)| a * b).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(-1.0, 8).is_err());
        assert_eq!(grid(4).node(4), 1.0);
        assert!(FractionalSpec::new(FractionalKind::Caputo, 1.0, 1.0).is_err());
        assert_eq!(FractionalSpec::new(FractionalKind::Caputo, 1.5, 1.0).unwrap().order(), 2);
    }

    #[test]
    fn integral_power_rules() {
        let g = grid(64);
        let one = TimeSeries::sample(g, |_| 1.0).unwrap();
        let lin = TimeSeries::sample(g, |t| t).unwrap();
        let i1 = left_frac_integral(&one, 0.5).unwrap();
        assert_relative_eq!(i1.value(64), 1.0 / gamma(1.5).unwrap(), max_relative = 1e-13);
        let it = left_frac_integral(&lin, 0.5).unwrap();
        assert_relative_eq!(it.value(64), gamma(2.0).unwrap() / gamma(2.5).unwrap(), max_relative = 1e-13);
        assert!(left_frac_integral(&TimeSeries::zeros(g), 0.5).unwrap().is_zero());
        assert!(left_frac_integral(&one, 0.0).is_err());
    }

    #[test]
    fn right_integral_power_rule_and_endpoint() {
        let g = TimeGrid::new(2.0, 64).unwrap();
        let one = TimeSeries::sample(g, |_| 1.0).unwrap();
        let r = right_frac_integral(&one, 0.5).unwrap();
        for i in [0usize, 10, 40] {
            let t = g.node(i);
            assert_relative_eq!(r.value(i), (2.0 - t).sqrt() / gamma(1.5).unwrap(), max_relative = 1e-12);
        }
        assert_eq!(r.value(64), 0.0);
    }

    #[test]
    fn weighted_integral_matches_power_rule() {
        // t^{-1/2}: ₀I^{1/2} gives Γ(1/2) exactly
        let g = grid(32);
        let f = TimeSeries::weighted(g, Weight::new(-0.5, 0.0), vec![1.0; 33]).unwrap();
        let i = left_frac_integral(&f, 0.5).unwrap();
        for k in 0..=32 {
            assert_relative_eq!(i.value(k), std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        }
        // (T-t)^{-0.3} mirrored: ₜI^{0.6}_T gives Γ(0.7)/Γ(1.3)(T-t)^{0.3}
        let f = TimeSeries::weighted(g, Weight::new(0.0, -0.3), vec![1.0; 33]).unwrap();
        let r = right_frac_integral(&f, 0.6).unwrap();
        let c = gamma(0.7).unwrap() / gamma(1.3).unwrap();
        for k in [0usize, 5, 31] {
            assert_relative_eq!(r.value(k), c * (1.0 - g.node(k)).powf(0.3), max_relative = 1e-11);
        }
    }

    #[test]
    fn singular_output_keeps_weight() {
        // ₀I^{0.5}(1/(T-τ)) diverges like (T-t)^{-1/2}
        let g = grid(16);
        let f = TimeSeries::weighted(g, Weight::new(0.0, -1.0), vec![1.0; 17]).unwrap();
        let i = left_frac_integral(&f, 0.5).unwrap();
        assert_eq!(i.weight(), Weight::new(0.0, -0.5));
        assert!(i.values()[16].is_finite());
    }

    #[test]
    fn rl_derivative_power_rule() {
        let g = grid(256);
        let lin = TimeSeries::sample(g, |t| t).unwrap();
        let d = rl_left_derivative(&lin, 0.5).unwrap();
        assert_relative_eq!(d.value(128), 0.5f64.sqrt() / gamma(1.5).unwrap(), max_relative = 1e-5);
        assert!(rl_left_derivative(&TimeSeries::zeros(g), 0.5).unwrap().is_zero());
        let tiny = TimeSeries::sample(grid(2), |t| t).unwrap();
        assert!(matches!(rl_left_derivative(&tiny, 1.5), Err(Error::InsufficientGrid(_))));
    }

    #[test]
    fn caputo_derivative_power_rules() {
        let g = grid(256);
        let c = TimeSeries::sample(g, |_| 3.0).unwrap();
        assert!(caputo_left_derivative(&c, 0.5).unwrap().is_zero());
        assert!(caputo_left_derivative(&c, 1.5).unwrap().values().iter().all(|v| *v == 0.0));
        let lin = TimeSeries::sample(g, |t| t).unwrap();
        assert_relative_eq!(
            caputo_left_derivative(&lin, 0.5).unwrap().value(256),
            1.0 / gamma(1.5).unwrap(),
            max_relative = 1e-12
        );
        let sq = TimeSeries::sample(g, |t| t * t).unwrap();
        assert_relative_eq!(
            caputo_left_derivative(&sq, 1.5).unwrap().value(256),
            2.0 / gamma(1.5).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn right_derivatives_mirror_power_rules() {
        let g = grid(256);
        let c = TimeSeries::sample(g, |_| 2.0).unwrap();
        assert!(caputo_right_derivative(&c, 0.5).unwrap().is_zero());
        let f = TimeSeries::sample(g, |t| 1.0 - t).unwrap();
        let d = rl_right_derivative(&f, 0.5).unwrap();
        for k in [32usize, 128, 200] {
            let s = 1.0 - g.node(k);
            assert_relative_eq!(d.value(k), s.sqrt() / gamma(1.5).unwrap(), max_relative = 1e-4);
        }
        // (T-t)^{α-1} is annihilated
        let f = TimeSeries::weighted(g, Weight::new(0.0, -0.5), vec![1.0; 257]).unwrap();
        let d = rl_right_derivative(&f, 0.5).unwrap();
        for k in 1..240 {
            assert!(d.value(k).abs() < 1e-9, "{k} {}", d.value(k));
        }
    }

    #[test]
    fn grunwald_letnikov_cross_check() {
        let g = grid(512);
        let lin = TimeSeries::sample(g, |t| t).unwrap();
        let gl = grunwald_letnikov(&lin, 0.5).unwrap();
        let pi = rl_left_derivative(&lin, 0.5).unwrap();
        assert!((gl.value(512) - pi.value(512)).abs() < 5e-3);
    }

    #[test]
    fn j_integral_closed_form() {
        let g = TimeGrid::new(2.0, 64).unwrap();
        let one = TimeSeries::sample(g, |_| 1.0).unwrap();
        let j = j_integral(&one, &one, 0.5).unwrap();
        assert_eq!(j.value(0), 0.0);
        let expect = (2f64.powf(1.5) - 2.0) / gamma(2.5).unwrap();
        assert_relative_eq!(j.value(32), expect, max_relative = 1e-12);
        // general t: (T^{2-α} - (T-t)^{2-α} - t^{2-α})/Γ(3-α)
        let t = g.node(10);
        let e = (2f64.powf(1.5) - (2.0 - t).powf(1.5) - t.powf(1.5)) / gamma(2.5).unwrap();
        assert_relative_eq!(j.value(10), e, max_relative = 1e-12);
        assert!(j_integral(&TimeSeries::zeros(g), &one, 0.5).unwrap().is_zero());
        let other = TimeSeries::sample(grid(64), |_| 1.0).unwrap();
        assert!(matches!(j_integral(&one, &other, 0.5), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn f_modified_integral_basics() {
        let g = grid(64);
        let one = TimeSeries::sample(g, |_| 1.0).unwrap();
        let f = f_modified_integral(&one, 1.5).unwrap();
        assert_eq!(f.value(0), 0.0);
        assert!(f.value(64).is_nan());
        // oracle: extended-precision adaptive quadrature of the ₂F₁ kernel
        assert_relative_eq!(f.value(32), 1.424_541_629_460_615_5, max_relative = 1e-9);
        assert!(f_modified_integral(&TimeSeries::zeros(g), 1.5).unwrap().is_zero());
    }

    #[test]
    fn j_weighted_path_matches_pair_moments() {
        let g = grid(400);
        let f = TimeSeries::sample(g, |t| 1.0 + t * t).unwrap();
        let h = TimeSeries::sample(g, |t| (2.0 * t).cos()).unwrap();
        let exact = j_integral(&f, &h, 0.6).unwrap();
        let alt = j_integral_weighted(&f, &h, 0.6).unwrap();
        // the integrand has t^μ and (T-t)^μ corners; compare away from T
        for i in 0..380 {
            assert!((exact.value(i) - alt.value(i)).abs() < 2e-4, "node {i}");
        }
    }

}
