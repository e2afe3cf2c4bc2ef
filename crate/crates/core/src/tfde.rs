//! Nonlinear time-fractional diffusion `𝒟^α_t u = (k(u) u_x)_x`: problem data,
//! exact reference fields and an implicit finite-difference solver.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{
    caputo_left_derivative, diff1, diff2, integer_order, power_rule, rl_left_derivative,
    FractionalKind, FractionalSpec, TimeGrid, TimeSeries, Weight,
};
use crate::specialfn::{gamma, mittag_leffler, rgamma, SeriesControl};

/// Diffusivity `k(u)` with derivative `k'` and primitive `K` (`K' = k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Diffusivity {
    Constant { k0: f64 },
    /// `k = u^β`
    Power { beta: f64 },
    /// `k = e^u`
    Exponential,
}

impl Diffusivity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Diffusivity::Constant { k0 } if !(k0 > 0.0 && k0.is_finite()) => {
                Err(Error::Parameter(format!("constant diffusivity must be positive, got {k0}")))
            }
            Diffusivity::Power { beta } if beta == 0.0 || !beta.is_finite() => Err(
                Error::Parameter("power diffusivity needs a finite nonzero exponent".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Diffusivity::Constant { .. })
    }

    pub fn k(&self, u: f64) -> f64 {
        match *self {
            Diffusivity::Constant { k0 } => k0,
            Diffusivity::Power { beta } => u.powf(beta),
            Diffusivity::Exponential => u.exp(),
        }
    }

    pub fn k_prime(&self, u: f64) -> f64 {
        match *self {
            Diffusivity::Constant { .. } => 0.0,
            Diffusivity::Power { beta } => beta * u.powf(beta - 1.0),
            Diffusivity::Exponential => u.exp(),
        }
    }

    pub fn primitive(&self, u: f64) -> f64 {
        match *self {
            Diffusivity::Constant { k0 } => k0 * u,
            Diffusivity::Power { beta } if beta == -1.0 => u.ln(),
            Diffusivity::Power { beta } => u.powf(beta + 1.0) / (beta + 1.0),
            Diffusivity::Exponential => u.exp(),
        }
    }

    /// `K⁻¹(s)`, the positive branch for power families.
    pub fn primitive_inverse(&self, s: f64) -> Result<f64> {
        let out = match *self {
            Diffusivity::Constant { k0 } => s / k0,
            Diffusivity::Power { beta } if beta == -1.0 => s.exp(),
            Diffusivity::Power { beta } => {
                let base = (beta + 1.0) * s;
                if base < 0.0 || (base == 0.0 && beta + 1.0 < 0.0) {
                    return Err(Error::Range(format!(
                        "K(u) = u^{}/{} cannot take the value {s}",
                        beta + 1.0,
                        beta + 1.0
                    )));
                }
                base.powf(1.0 / (beta + 1.0))
            }
            Diffusivity::Exponential => {
                if s <= 0.0 {
                    return Err(Error::Range(format!("K(u) = e^u cannot take the value {s}")));
                }
                s.ln()
            }
        };
        Ok(out)
    }
}

/// Uniform space nodes on `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceGrid {
    x_lo: f64,
    x_hi: f64,
    n_x: usize,
}

impl SpaceGrid {
    pub fn new(x_lo: f64, x_hi: f64, n_x: usize) -> Result<Self> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::Parameter(format!("need x_lo < x_hi, got [{x_lo}, {x_hi}]")));
        }
        if n_x < 2 {
            return Err(Error::InsufficientGrid(format!("n_x must be at least 2, got {n_x}")));
        }
        Ok(SpaceGrid { x_lo, x_hi, n_x })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn len(&self) -> usize {
        self.n_x + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    pub fn step(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.n_x as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_x {
            self.x_hi
        } else {
            self.x_lo + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.node(k))
    }
}

/// Space-time field `u(t_i, x_k) = weight(t_i) · values[i, k]`.
///
/// The time weight lets singular-at-`t = 0` fields such as `t^{α-1} r(t, x)`
/// be stored through their regular part. Derived fields may hold non-finite
/// values on the first or last time row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    time: TimeGrid,
    space: SpaceGrid,
    weight: Weight,
    values: Array2<f64>,
}

impl GridFunction {
    pub fn new(time: TimeGrid, space: SpaceGrid, values: Array2<f64>) -> Result<Self> {
        Self::weighted(time, space, Weight::NONE, values)
    }

    pub fn weighted(
        time: TimeGrid,
        space: SpaceGrid,
        weight: Weight,
        values: Array2<f64>,
    ) -> Result<Self> {
        if values.dim() != (time.len(), space.len()) {
            return Err(Error::Shape(format!(
                "values {:?} for a {}x{} grid",
                values.dim(),
                time.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid values must be finite".into()));
        }
        Ok(GridFunction {
            time,
            space,
            weight,
            values,
        })
    }

    pub(crate) fn raw(time: TimeGrid, space: SpaceGrid, weight: Weight, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), (time.len(), space.len()));
        GridFunction {
            time,
            space,
            weight,
            values,
        }
    }

    pub fn from_fn(time: TimeGrid, space: SpaceGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((time.len(), space.len()), |(i, k)| {
            f(time.node(i), space.node(k))
        });
        Self::raw(time, space, Weight::NONE, values)
    }

    pub fn zeros(time: TimeGrid, space: SpaceGrid) -> Self {
        Self::raw(time, space, Weight::NONE, Array2::zeros((time.len(), space.len())))
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    /// Stored values, without the time weight.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.weight.at(&self.time, i) * self.values[(i, k)]
    }

    pub fn materialize(&self) -> Array2<f64> {
        let mut out = self.values.clone();
        if !self.weight.is_none() {
            for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
                let w = self.weight.at(&self.time, i);
                // an exact zero stays zero against an infinite weight
                row.mapv_inplace(|v| if v == 0.0 { 0.0 } else { v * w });
            }
        }
        out
    }

    /// Time history at space node `k`.
    pub fn column(&self, k: usize) -> TimeSeries {
        TimeSeries::raw(self.time, self.weight, self.values.column(k).to_vec())
    }

    pub fn columns(&self) -> Vec<TimeSeries> {
        (0..self.space.len()).map(|k| self.column(k)).collect()
    }

    /// Assemble a field from per-node time series sharing one grid and weight.
    pub fn from_columns(space: SpaceGrid, cols: &[TimeSeries]) -> Result<Self> {
        let first = cols
            .first()
            .ok_or_else(|| Error::Shape("no columns".into()))?;
        if cols.len() != space.len() {
            return Err(Error::Shape(format!("{} columns for {} x nodes", cols.len(), space.len())));
        }
        let time = *first.grid();
        let weight = first.weight();
        let mut values = Array2::zeros((time.len(), space.len()));
        for (k, c) in cols.iter().enumerate() {
            if *c.grid() != time || c.weight() != weight {
                return Err(Error::GridMismatch("columns disagree on grid or weight".into()));
            }
            values.column_mut(k).assign(&ndarray::ArrayView1::from(c.values()));
        }
        Ok(Self::raw(time, space, weight, values))
    }

    /// Apply `op` to every column in parallel; outputs must share a weight.
    pub fn map_columns(
        &self,
        op: impl Fn(&TimeSeries) -> Result<TimeSeries> + Sync,
    ) -> Result<GridFunction> {
        let cols: Vec<TimeSeries> = (0..self.space.len())
            .into_par_iter()
            .map(|k| op(&self.column(k)))
            .collect::<Result<_>>()?;
        Self::assemble(self.space, cols)
    }

    /// Stack columns, moving any with a stray weight onto the weight of the
    /// first nonzero column.
    pub(crate) fn assemble(space: SpaceGrid, cols: Vec<TimeSeries>) -> Result<GridFunction> {
        let weight = cols
            .iter()
            .find(|c| !c.is_zero())
            .unwrap_or(&cols[0])
            .weight();
        let cols: Vec<TimeSeries> = cols
            .into_iter()
            .map(|c| {
                if c.weight() == weight {
                    c
                } else {
                    // singular end coefficients of differently weighted columns are dropped
                    let mut v = c.materialize();
                    for (i, x) in v.iter_mut().enumerate() {
                        let w = weight.at(c.grid(), i);
                        *x = if *x == 0.0 {
                            0.0
                        } else if w != 0.0 {
                            *x / w
                        } else {
                            f64::NAN
                        };
                    }
                    TimeSeries::raw(*c.grid(), weight, v)
                }
            })
            .collect();
        Self::from_columns(space, &cols)
    }

    /// Same field with the weight folded into the values.
    pub fn unweighted(&self) -> GridFunction {
        Self::raw(self.time, self.space, Weight::NONE, self.materialize())
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if self.time != other.time || self.space != other.space {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let a = self.materialize();
        let b = other.materialize();
        Ok(a.iter()
            .zip(b.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }

    /// Values `f(i, k, value)` under the same weight.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> GridFunction {
        let mut values = self.values.clone();
        for ((i, k), v) in values.indexed_iter_mut() {
            *v = f(i, k, *v);
        }
        Self::raw(self.time, self.space, self.weight, values)
    }

    /// Reinterpret the stored values as the regular part under `weight`.
    pub fn with_weight(self, weight: Weight) -> GridFunction {
        GridFunction { weight, ..self }
    }

    /// Multiply by `t^d` by shifting the left weight exponent.
    pub fn with_left_shift(self, d: f64) -> GridFunction {
        let weight = Weight::new(self.weight.left + d, self.weight.right);
        self.with_weight(weight)
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        Self::raw(self.time, self.space, self.weight, self.values.mapv(|v| v * c))
    }

    /// Multiply by `f(t, x)`.
    pub fn mul_fn(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let (t, x) = (self.time, self.space);
        self.map_values(|i, k, v| v * f(t.node(i), x.node(k)))
    }

    /// Pointwise product; weights add.
    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(Self::raw(
            self.time,
            self.space,
            self.weight.combine(&other.weight),
            &self.values * &other.values,
        ))
    }

    /// Same field carried with a different weight factor. Moving to a larger
    /// exponent leaves non-finite values at the affected end row.
    pub fn reweight(&self, target: Weight) -> GridFunction {
        if target == self.weight {
            return self.clone();
        }
        let diff = Weight::new(self.weight.left - target.left, self.weight.right - target.right);
        let mut values = self.values.clone();
        for (i, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
            let w = diff.at(&self.time, i);
            row.mapv_inplace(|v| if v == 0.0 { 0.0 } else { v * w });
        }
        Self::raw(self.time, self.space, target, values)
    }

    /// `Σ c_j f_j` carried with the smallest exponents among the terms.
    pub fn linear_combination(terms: &[(f64, &GridFunction)]) -> Result<GridFunction> {
        let (_, first) = terms.first().ok_or_else(|| Error::Shape("empty combination".into()))?;
        let mut target = first.weight;
        for (_, f) in terms {
            first.check_same_grid(f)?;
            target.left = target.left.min(f.weight.left);
            target.right = target.right.min(f.weight.right);
        }
        let mut acc = Array2::zeros(first.values.dim());
        for (c, f) in terms {
            if *c != 0.0 {
                acc.scaled_add(*c, &f.reweight(target).values);
            }
        }
        Ok(Self::raw(first.time, first.space, target, acc))
    }

    /// First time derivative, exact on the weight factor.
    pub fn time_derivative(&self) -> GridFunction {
        let cols: Vec<TimeSeries> = self.columns().iter().map(crate::fracops::time_derivative).collect();
        Self::from_columns(self.space, &cols).expect("columns share grid and weight")
    }

    /// `∂_x` (order 1) or `∂_xx` (order 2) by central differences, one-sided at the ends.
    pub fn space_derivative(&self, order: usize) -> GridFunction {
        let dx = self.space.step();
        let mut values = self.values.clone();
        for mut row in values.axis_iter_mut(Axis(0)) {
            let r = row.to_vec();
            let d = if order == 1 { diff1(&r, dx) } else { diff2(&r, dx) };
            row.assign(&ndarray::Array1::from(d));
        }
        Self::raw(self.time, self.space, self.weight, values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.time != other.time || self.space != other.space {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// CSV layout: header row of x nodes, first column of t nodes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("t\\x".to_string()).chain(self.space.nodes().map(fmt_num));
        w.write_record(header).map_err(csv_err)?;
        let vals = self.materialize();
        for (i, row) in vals.axis_iter(Axis(0)).enumerate() {
            let rec = std::iter::once(fmt_num(self.time.node(i))).chain(row.iter().map(|v| fmt_num(*v)));
            w.write_record(rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a field written by [`GridFunction::write_csv`]; nodes must be uniform.
    pub fn read_csv<R: Read>(input: R) -> Result<GridFunction> {
        let mut r = csv::Reader::from_reader(input);
        let xs: Vec<f64> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .skip(1)
            .map(parse_num)
            .collect::<Result<_>>()?;
        let mut ts = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let mut it = rec.iter();
            ts.push(parse_num(it.next().unwrap_or(""))?);
            let row: Vec<f64> = it.map(parse_num).collect::<Result<_>>()?;
            if row.len() != xs.len() {
                return Err(Error::Shape(format!("row of {} values for {} x nodes", row.len(), xs.len())));
            }
            rows.extend(row);
        }
        if xs.len() < 3 || ts.len() < 3 {
            return Err(Error::InsufficientGrid("csv field needs at least 3x3 nodes".into()));
        }
        if ts[0].abs() > 1e-12 {
            return Err(Error::Parameter("time nodes must start at 0".into()));
        }
        let time = TimeGrid::new(*ts.last().unwrap_or(&0.0), ts.len() - 1)?;
        let space = SpaceGrid::new(xs[0], xs[xs.len() - 1], xs.len() - 1)?;
        check_uniform(&ts, |i| time.node(i))?;
        check_uniform(&xs, |k| space.node(k))?;
        let values = Array2::from_shape_vec((ts.len(), xs.len()), rows)
            .map_err(|e| Error::Shape(e.to_string()))?;
        GridFunction::new(time, space, values)
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parameter(format!("bad number {s:?}: {e}")))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn check_uniform(read: &[f64], node: impl Fn(usize) -> f64) -> Result<()> {
    let scale = read.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (i, v) in read.iter().enumerate() {
        if (v - node(i)).abs() > 1e-9 * scale {
            return Err(Error::Parameter(format!("nodes are not uniform near {v}")));
        }
    }
    Ok(())
}

/// Profile of one variable (initial data in x, boundary traces in t).
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn profile(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Profile {
    Arc::new(f)
}

/// Initial-boundary value problem for the nonlinear TFDE with Dirichlet data.
///
/// Caputo kinds take `u(0,x)` and, for α > 1, `u_t(0,x)`. Riemann-Liouville
/// kinds take integrated-type data: `₀I^{1-α}u(0,x)` for α < 1, and for α > 1
/// `₀I^{2-α}u(0,x)` (must vanish) together with `D ₀I^{2-α}u(0,x)`. Their
/// boundary traces are given for the regular part `t^{1-α}u`.
#[derive(Clone)]
pub struct TFDEProblem {
    pub spec: FractionalSpec,
    pub diffusivity: Diffusivity,
    pub x_lo: f64,
    pub x_hi: f64,
    pub initial: Profile,
    pub initial_rate: Option<Profile>,
    pub left_boundary: Profile,
    pub right_boundary: Profile,
}

impl fmt::Debug for TFDEProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TFDEProblem")
            .field("spec", &self.spec)
            .field("diffusivity", &self.diffusivity)
            .field("x_lo", &self.x_lo)
            .field("x_hi", &self.x_hi)
            .field("initial_rate", &self.initial_rate.is_some())
            .finish_non_exhaustive()
    }
}

impl TFDEProblem {
    pub fn validate(&self) -> Result<()> {
        self.diffusivity.validate()?;
        SpaceGrid::new(self.x_lo, self.x_hi, 2)?;
        match (self.spec.is_wave(), self.initial_rate.is_some()) {
            (true, false) => Err(Error::Parameter(
                "diffusion-wave problems need a second initial field".into(),
            )),
            (false, true) => Err(Error::Parameter(
                "subdiffusion problems take a single initial field".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn space_grid(&self, n_x: usize) -> Result<SpaceGrid> {
        SpaceGrid::new(self.x_lo, self.x_hi, n_x)
    }

    /// Time weight of solutions: `t^{α-1}` for Riemann-Liouville kinds.
    pub fn solution_weight(&self) -> Weight {
        solution_weight(&self.spec)
    }
}

pub(crate) fn solution_weight(spec: &FractionalSpec) -> Weight {
    match spec.kind {
        FractionalKind::RiemannLiouville => Weight::new(spec.alpha - 1.0, 0.0),
        FractionalKind::Caputo => Weight::NONE,
    }
}

fn check_grid_horizon(spec: &FractionalSpec, time: &TimeGrid) -> Result<()> {
    if (time.horizon() - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::GridMismatch(format!(
            "time grid horizon {} differs from T = {}",
            time.horizon(),
            spec.horizon
        )));
    }
    Ok(())
}

/// Separable solution of `𝒟^α_t u = u_xx`: `E_α(-λ²t^α) sin λx` (Caputo) or
/// `t^{α-1} E_{α,α}(-λ²t^α) sin λx` (Riemann-Liouville).
pub fn exact_linear_separable(
    spec: &FractionalSpec,
    lambda: f64,
    time: TimeGrid,
    space: SpaceGrid,
) -> Result<GridFunction> {
    if !(lambda > 0.0) {
        return Err(Error::Domain {
            value: lambda,
            domain: "lambda > 0",
        });
    }
    check_grid_horizon(spec, &time)?;
    let ctl = SeriesControl::new(2000, 1e-16, 1e-15)?;
    let beta = match spec.kind {
        FractionalKind::Caputo => 1.0,
        FractionalKind::RiemannLiouville => spec.alpha,
    };
    let temporal: Vec<f64> = time
        .nodes()
        .map(|t| mittag_leffler(spec.alpha, beta, -lambda * lambda * t.powf(spec.alpha), &ctl))
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_fn((time.len(), space.len()), |(i, k)| {
        temporal[i] * (lambda * space.node(k)).sin()
    });
    Ok(GridFunction::raw(time, space, solution_weight(spec), values))
}

/// `u = c t^{α-1}`, constant in x; annihilated by the Riemann-Liouville derivative.
pub fn exact_rl_power_mode(
    spec: &FractionalSpec,
    c: f64,
    time: TimeGrid,
    space: SpaceGrid,
) -> Result<GridFunction> {
    if spec.kind != FractionalKind::RiemannLiouville {
        return Err(Error::Parameter("power mode is a Riemann-Liouville solution".into()));
    }
    check_grid_horizon(spec, &time)?;
    let values = Array2::from_elem((time.len(), space.len()), c);
    Ok(GridFunction::raw(time, space, solution_weight(spec), values))
}

/// Time-independent solution `u = K⁻¹(a x + b)` of the Caputo problem.
pub fn exact_stationary_caputo(
    diffusivity: &Diffusivity,
    a: f64,
    b: f64,
    time: TimeGrid,
    space: SpaceGrid,
) -> Result<GridFunction> {
    diffusivity.validate()?;
    let profile: Vec<f64> = space
        .nodes()
        .map(|x| diffusivity.primitive_inverse(a * x + b))
        .collect::<Result<_>>()?;
    if profile.iter().any(|u| !u.is_finite()) {
        return Err(Error::Range("stationary profile is not finite".into()));
    }
    let values = Array2::from_shape_fn((time.len(), space.len()), |(_, k)| profile[k]);
    Ok(GridFunction::raw(time, space, Weight::NONE, values))
}

/// Problem whose exact solution is [`exact_linear_separable`] on `[x_lo, x_hi]`.
pub fn linear_separable_problem(spec: FractionalSpec, lambda: f64, x_lo: f64, x_hi: f64) -> TFDEProblem {
    let ctl = SeriesControl::default();
    let alpha = spec.alpha;
    let beta = match spec.kind {
        FractionalKind::Caputo => 1.0,
        FractionalKind::RiemannLiouville => alpha,
    };
    let trace = move |x: f64| {
        let s = (lambda * x).sin();
        move |t: f64| {
            mittag_leffler(alpha, beta, -lambda * lambda * t.powf(alpha), &ctl).unwrap_or(f64::NAN) * s
        }
    };
    let (initial, initial_rate): (Profile, Option<Profile>) = match (spec.kind, spec.is_wave()) {
        (FractionalKind::Caputo, false) => (profile(move |x| (lambda * x).sin()), None),
        (FractionalKind::Caputo, true) => (profile(move |x| (lambda * x).sin()), Some(profile(|_| 0.0))),
        // ₀I^{n-α}(t^{α-1} E_{α,α}) starts at 1 (α < 1) or has unit slope (α > 1)
        (FractionalKind::RiemannLiouville, false) => (profile(move |x| (lambda * x).sin()), None),
        (FractionalKind::RiemannLiouville, true) => (
            profile(|_| 0.0),
            Some(profile(move |x| (lambda * x).sin())),
        ),
    };
    TFDEProblem {
        spec,
        diffusivity: Diffusivity::Constant { k0: 1.0 },
        x_lo,
        x_hi,
        initial,
        initial_rate,
        left_boundary: Arc::new(trace(x_lo)),
        right_boundary: Arc::new(trace(x_hi)),
    }
}

// ---------------------------------------------------------------------------
// solver

/// Linear memory term of the time operator at step i: `coef · y_i + known[k]`.
enum Memory {
    /// L1 weights `c_m` for α < 1.
    CaputoSub { c: Vec<f64> },
    /// Weights `b_m` and scale for α > 1; the ghost value uses `u_t(0)`.
    CaputoWave { b: Vec<f64>, scale: f64 },
    /// Product-rule rows for `₀I^{n-α}(t^{α-1} r)`.
    Rl { rows: Arc<crate::fracops::ProductRule>, wave: bool, i0_scale: f64 },
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 50;

/// Implicit time stepping of the Dirichlet problem on `n_x` space cells.
///
/// Caputo kinds use the L1-type memory term on `u`; Riemann-Liouville kinds
/// step the regular part `r = t^{1-α}u` through the product-integrated
/// `₀I^{n-α}u`. Each step solves `(K(u))_xx` implicitly by Newton iteration.
pub fn solve_nonlinear(problem: &TFDEProblem, time: TimeGrid, n_x: usize) -> Result<GridFunction> {
    problem.validate()?;
    check_grid_horizon(&problem.spec, &time)?;
    let space = problem.space_grid(n_x)?;
    let spec = problem.spec;
    let alpha = spec.alpha;
    let n = time.n_steps();
    let h = time.step();
    let nxn = space.len();
    let weight = problem.solution_weight();
    let rl = spec.kind == FractionalKind::RiemannLiouville;

    let x: Vec<f64> = space.nodes().collect();
    let mut y = Array2::<f64>::zeros((n + 1, nxn));
    let rate: Vec<f64> = match &problem.initial_rate {
        Some(f) => x.iter().map(|&x| f(x)).collect(),
        None => vec![0.0; nxn],
    };
    let init: Vec<f64> = x.iter().map(|&x| (problem.initial)(x)).collect();
    if init.iter().chain(&rate).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("initial data must be finite".into()));
    }
    let memory = if rl {
        let mu = integer_order(alpha) as f64 - alpha;
        let rows = power_rule(&time, mu, weight);
        let g = gamma(alpha)?;
        if spec.is_wave() {
            if init.iter().any(|v| *v != 0.0) {
                return Err(Error::Parameter(
                    "nonzero ₀I^{2-α}u(0) needs the t^{α-2} branch, which is not supported".into(),
                ));
            }
            for k in 0..nxn {
                y[(0, k)] = rate[k] / g;
            }
        } else {
            for k in 0..nxn {
                y[(0, k)] = init[k] / g;
            }
        }
        Memory::Rl {
            rows,
            wave: spec.is_wave(),
            i0_scale: g,
        }
    } else {
        for k in 0..nxn {
            y[(0, k)] = init[k];
        }
        if spec.is_wave() {
            let mu = 2.0 - alpha;
            let b = (0..n).map(|m| ((m + 1) as f64).powf(mu) - (m as f64).powf(mu)).collect();
            Memory::CaputoWave {
                b,
                scale: h.powf(-alpha) * rgamma(3.0 - alpha),
            }
        } else {
            let mu = 1.0 - alpha;
            let scale = h.powf(-alpha) * rgamma(2.0 - alpha);
            let c = (0..n).map(|m| (((m + 1) as f64).powf(mu) - (m as f64).powf(mu)) * scale).collect();
            Memory::CaputoSub { c }
        }
    };

    // running ₀I^{n-α}u for the Riemann-Liouville kinds
    let mut integral = Array2::<f64>::zeros((n + 1, nxn));
    if let Memory::Rl { i0_scale, wave, .. } = &memory {
        if !wave {
            for k in 0..nxn {
                integral[(0, k)] = i0_scale * y[(0, k)];
            }
        }
    }

    let dx2 = space.step() * space.step();
    let diff = problem.diffusivity;
    for i in 1..=n {
        let t = time.node(i);
        let s = weight.at(&time, i);
        let (coef, known) = match &memory {
            Memory::CaputoSub { c } => {
                let mut known = vec![0.0; nxn];
                for (k, kn) in known.iter_mut().enumerate() {
                    let mut acc = -c[0] * y[(i - 1, k)];
                    for j in 0..i - 1 {
                        acc += c[i - 1 - j] * (y[(j + 1, k)] - y[(j, k)]);
                    }
                    *kn = acc;
                }
                (c[0], known)
            }
            Memory::CaputoWave { b, scale } => {
                let mut known = vec![0.0; nxn];
                for (k, kn) in known.iter_mut().enumerate() {
                    let at = |j: isize| -> f64 {
                        if j < 0 {
                            y[(0, k)] - h * rate[k]
                        } else {
                            y[(j as usize, k)]
                        }
                    };
                    let mut acc = b[0] * (-2.0 * at(i as isize - 1) + at(i as isize - 2));
                    for j in 0..i - 1 {
                        let j = j as isize;
                        acc += b[i - 1 - j as usize] * (at(j + 1) - 2.0 * at(j) + at(j - 1));
                    }
                    *kn = acc * scale;
                }
                (*scale * b[0], known)
            }
            Memory::Rl { rows, wave, i0_scale } => {
                let row = &rows.rows[i];
                let mut hist = vec![0.0; nxn];
                for (j, w) in row.iter().enumerate().take(i) {
                    let yj = y.row(j);
                    for (hk, v) in hist.iter_mut().zip(yj.iter()) {
                        *hk += w * v;
                    }
                }
                let wii = row[i];
                if !wave {
                    if i == 1 {
                        // I_1 - I_0 = ∫ s^{α-1} g(s) ds with g = t^{1-α} flux held at g_1
                        let theta = h.powf(alpha) / alpha * t.powf(1.0 - alpha);
                        let known = (0..nxn).map(|k| (hist[k] - integral[(0, k)]) / theta).collect();
                        (wii / theta, known)
                    } else {
                        // BDF2 on D_t I = flux; L-stable, so stiff boundary modes do not ring
                        let c = 1.0 / (2.0 * h);
                        let known = (0..nxn)
                            .map(|k| c * (3.0 * hist[k] - 4.0 * integral[(i - 1, k)] + integral[(i - 2, k)]))
                            .collect();
                        (3.0 * c * wii, known)
                    }
                } else {
                    let known: Vec<f64> = (0..nxn)
                        .map(|k| {
                            if i == 1 {
                                2.0 * (hist[k] - h * i0_scale * y[(0, k)]) / (h * h)
                            } else {
                                (hist[k] - 2.0 * integral[(i - 1, k)] + integral[(i - 2, k)]) / (h * h)
                            }
                        })
                        .collect();
                    let coef = if i == 1 { 2.0 * wii / (h * h) } else { wii / (h * h) };
                    (coef, known)
                }
            }
        };
        let left = (problem.left_boundary)(t);
        let right = (problem.right_boundary)(t);
        if !left.is_finite() || !right.is_finite() {
            return Err(Error::Solver {
                step: i,
                reason: "boundary data not finite".into(),
            });
        }
        let guess: Vec<f64> = y.row(i - 1).to_vec();
        let sol = newton_step(&diff, coef, &known, s, dx2, left, right, guess)
            .map_err(|reason| Error::Solver { step: i, reason })?;
        y.row_mut(i).assign(&ndarray::ArrayView1::from(&sol));
        if let Memory::Rl { rows, .. } = &memory {
            let row = &rows.rows[i];
            for k in 0..nxn {
                integral[(i, k)] = row.iter().enumerate().map(|(j, w)| w * y[(j, k)]).sum();
            }
        }
    }
    Ok(GridFunction::raw(time, space, weight, y))
}

/// Solve `coef·y_k + known_k - (K(s y))_xx = 0` on interior nodes.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    diff: &Diffusivity,
    coef: f64,
    known: &[f64],
    s: f64,
    dx2: f64,
    left: f64,
    right: f64,
    mut y: Vec<f64>,
) -> std::result::Result<Vec<f64>, String> {
    let m = y.len();
    y[0] = left;
    y[m - 1] = right;
    let residual = |y: &[f64]| -> Vec<f64> {
        let kv: Vec<f64> = y.iter().map(|v| diff.primitive(s * v)).collect();
        (1..m - 1)
            .map(|k| coef * y[k] + known[k] - (kv[k + 1] - 2.0 * kv[k] + kv[k - 1]) / dx2)
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut res = residual(&y);
    if res.iter().any(|v| !v.is_finite()) {
        return Err("diffusivity undefined on the iterate".into());
    }
    for _ in 0..NEWTON_MAX {
        // tridiagonal Jacobian
        let kd: Vec<f64> = y.iter().map(|v| diff.k(s * v) * s / dx2).collect();
        let mi = m - 2;
        let mut lower = vec![0.0; mi];
        let mut diag = vec![0.0; mi];
        let mut upper = vec![0.0; mi];
        for r in 0..mi {
            let k = r + 1;
            diag[r] = coef + 2.0 * kd[k];
            if r > 0 {
                lower[r] = -kd[k - 1];
            }
            if r + 1 < mi {
                upper[r] = -kd[k + 1];
            }
        }
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = thomas(&lower, &diag, &upper, &rhs).ok_or("singular Newton system")?;
        let r0 = norm(&res);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let mut trial = y.clone();
            for r in 0..mi {
                trial[r + 1] += lambda * delta[r];
            }
            let rt = residual(&trial);
            let nt = norm(&rt);
            if nt.is_finite() && (nt <= r0 || nt < 1e-14) {
                accepted = Some((trial, rt));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, rt)) = accepted else {
            return fixed_point(diff, coef, known, s, dx2, y);
        };
        let step = lambda * norm(&delta);
        y = trial;
        res = rt;
        let scale = 1.0 + norm(&y);
        if step <= NEWTON_TOL * scale {
            return Ok(y);
        }
    }
    fixed_point(diff, coef, known, s, dx2, y)
}

/// Damped lagged-diffusivity iteration used when Newton stalls.
fn fixed_point(
    diff: &Diffusivity,
    coef: f64,
    known: &[f64],
    s: f64,
    dx2: f64,
    mut y: Vec<f64>,
) -> std::result::Result<Vec<f64>, String> {
    let m = y.len();
    let mi = m - 2;
    for _ in 0..500 {
        // K(s y_{k+1}) - K(s y_k) ≈ k̄_{k+1/2} s (y_{k+1} - y_k), k̄ from secants
        let secant = |a: f64, b: f64| -> f64 {
            let (ua, ub) = (s * a, s * b);
            if (ub - ua).abs() > 1e-12 * (1.0 + ua.abs()) {
                (diff.primitive(ub) - diff.primitive(ua)) / (ub - ua)
            } else {
                diff.k(0.5 * (ua + ub))
            }
        };
        let kh: Vec<f64> = (0..m - 1).map(|k| secant(y[k], y[k + 1]) * s / dx2).collect();
        let mut lower = vec![0.0; mi];
        let mut diag = vec![0.0; mi];
        let mut upper = vec![0.0; mi];
        let mut rhs = vec![0.0; mi];
        for r in 0..mi {
            let k = r + 1;
            diag[r] = coef + kh[k - 1] + kh[k];
            rhs[r] = -known[k];
            if r > 0 {
                lower[r] = -kh[k - 1];
            } else {
                rhs[r] += kh[0] * y[0];
            }
            if r + 1 < mi {
                upper[r] = -kh[k];
            } else {
                rhs[r] += kh[m - 2] * y[m - 1];
            }
        }
        let next = thomas(&lower, &diag, &upper, &rhs).ok_or("singular fixed-point system")?;
        let mut change = 0.0f64;
        for r in 0..mi {
            let v = 0.5 * y[r + 1] + 0.5 * next[r];
            change = change.max((v - y[r + 1]).abs());
            y[r + 1] = v;
        }
        if !change.is_finite() {
            return Err("fixed-point iteration produced non-finite values".into());
        }
        let scale = 1.0 + y.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if change <= NEWTON_TOL * scale {
            return Ok(y);
        }
    }
    Err("nonlinear iteration did not converge".into())
}

/// Tridiagonal solve; `lower[0]` and `upper[last]` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return None;
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

// ---------------------------------------------------------------------------

/// Time-fractional derivative of `u` along every space node.
pub fn time_fractional_derivative(u: &GridFunction, spec: &FractionalSpec) -> Result<GridFunction> {
    check_grid_horizon(spec, u.time())?;
    let alpha = spec.alpha;
    match spec.kind {
        FractionalKind::Caputo => u.map_columns(|c| caputo_left_derivative(c, alpha)),
        FractionalKind::RiemannLiouville => u.map_columns(|c| rl_left_derivative(c, alpha)),
    }
}

/// Space derivatives `(u_x, u_xx)` of the materialized field, row by row.
pub(crate) fn space_derivatives(u: &Array2<f64>, dx: f64) -> (Array2<f64>, Array2<f64>) {
    let mut ux = Array2::zeros(u.dim());
    let mut uxx = Array2::zeros(u.dim());
    for (i, row) in u.axis_iter(Axis(0)).enumerate() {
        let r = row.to_vec();
        ux.row_mut(i).assign(&ndarray::Array1::from(diff1(&r, dx)));
        uxx.row_mut(i).assign(&ndarray::Array1::from(diff2(&r, dx)));
    }
    (ux, uxx)
}

/// Pointwise residual `𝒟^α_t u - k'(u) u_x² - k(u) u_xx`.
pub fn tfde_residual(u: &GridFunction, problem: &TFDEProblem) -> Result<GridFunction> {
    if (u.space().bounds().0 - problem.x_lo).abs() > 1e-12
        || (u.space().bounds().1 - problem.x_hi).abs() > 1e-12
    {
        return Err(Error::GridMismatch("field and problem disagree on the space domain".into()));
    }
    let dt = time_fractional_derivative(u, &problem.spec)?.materialize();
    let uu = u.materialize();
    let (ux, uxx) = space_derivatives(&uu, u.space().step());
    let d = problem.diffusivity;
    let mut res = Array2::zeros(uu.dim());
    ndarray::Zip::from(&mut res)
        .and(&dt)
        .and(&uu)
        .and(&ux)
        .and(&uxx)
        .for_each(|r, &dt, &u, &ux, &uxx| {
            *r = if u == 0.0 && ux == 0.0 && uxx == 0.0 {
                dt
            } else {
                dt - d.k_prime(u) * ux * ux - d.k(u) * uxx
            };
        });
    Ok(GridFunction::raw(*u.time(), *u.space(), Weight::NONE, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(kind: FractionalKind, alpha: f64) -> FractionalSpec {
        FractionalSpec::new(kind, alpha, 1.0).unwrap()
    }

    fn interior_max(r: &GridFunction, t_from: f64) -> f64 {
        let v = r.materialize();
        let (nt, nx) = v.dim();
        let mut m = 0.0f64;
        for i in 0..nt {
            if r.time().node(i) < t_from {
                continue;
            }
            for k in 1..nx - 1 {
                m = m.max(v[(i, k)].abs());
            }
        }
        m
    }

    #[test]
    fn diffusivity_primitive_matches_k() {
        for d in [
            Diffusivity::Constant { k0: 2.0 },
            Diffusivity::Power { beta: 1.0 },
            Diffusivity::Power { beta: -1.0 },
            Diffusivity::Power { beta: 0.4 },
            Diffusivity::Exponential,
        ] {
            for u in [0.3, 1.0, 2.5] {
                let e = 1e-5;
                let fd = (d.primitive(u + e) - d.primitive(u - e)) / (2.0 * e);
                assert!((fd - d.k(u)).abs() < 1e-8 * d.k(u).abs().max(1.0), "{d:?} {u}");
                let fdk = (d.k(u + e) - d.k(u - e)) / (2.0 * e);
                assert!((fdk - d.k_prime(u)).abs() < 1e-7 * d.k_prime(u).abs().max(1.0), "{d:?} {u}");
                let back = d.primitive_inverse(d.primitive(u)).unwrap();
                assert!((back - u).abs() < 1e-12);
            }
        }
        assert!(Diffusivity::Exponential.primitive_inverse(-1.0).is_err());
        assert!(Diffusivity::Power { beta: 1.0 }.primitive_inverse(-1.0).is_err());
        assert!(Diffusivity::Constant { k0: 0.0 }.validate().is_err());
    }

    #[test]
    fn separable_initial_values_and_domain() {
        let t = TimeGrid::new(1.0, 16).unwrap();
        let x = SpaceGrid::new(0.0, PI, 8).unwrap();
        let u = exact_linear_separable(&spec(FractionalKind::Caputo, 0.5), 1.0, t, x).unwrap();
        for k in 0..=8 {
            assert!((u.value(0, k) - x.node(k).sin()).abs() < 1e-15);
        }
        assert!(exact_linear_separable(&spec(FractionalKind::Caputo, 0.5), 0.0, t, x).is_err());
    }

    #[test]
    fn near_classical_limit_matches_heat_mode() {
        let t = TimeGrid::new(1.0, 16).unwrap();
        let x = SpaceGrid::new(0.0, PI, 8).unwrap();
        let u = exact_linear_separable(&spec(FractionalKind::Caputo, 0.999), 1.0, t, x).unwrap();
        let heat = GridFunction::from_fn(t, x, |t, x| (-t).exp() * x.sin());
        assert!(u.max_abs_diff(&heat).unwrap() < 2e-3);
    }

    #[test]
    fn stationary_solutions_have_zero_residual() {
        let t = TimeGrid::new(1.0, 64).unwrap();
        let x = SpaceGrid::new(0.0, 1.0, 32).unwrap();
        let d = Diffusivity::Power { beta: 1.0 };
        let u = exact_stationary_caputo(&d, 1.0, 0.5, t, x).unwrap();
        assert!((u.value(3, 32) - (2.0f64 * 1.5).sqrt()).abs() < 1e-14);
        let p = TFDEProblem {
            spec: spec(FractionalKind::Caputo, 0.5),
            diffusivity: d,
            x_lo: 0.0,
            x_hi: 1.0,
            initial: profile(|x| (2.0 * (x + 0.5)).sqrt()),
            initial_rate: None,
            left_boundary: profile(|_| 1.0),
            right_boundary: profile(|_| 3f64.sqrt()),
        };
        let r = tfde_residual(&u, &p).unwrap();
        // K(u) linear in x: central second differences of K vanish, the split form keeps O(dx²)
        assert!(interior_max(&r, 0.0) < 1e-3);
        let e = exact_stationary_caputo(&Diffusivity::Exponential, 1.0, 1.0, t, x).unwrap();
        assert!((e.value(0, 0) - 0.0).abs() < 1e-15);
        assert!(exact_stationary_caputo(&Diffusivity::Exponential, 1.0, -0.5, t, x).is_err());
    }

    #[test]
    fn solver_reproduces_linear_caputo_mode() {
        let s = spec(FractionalKind::Caputo, 0.5);
        let p = linear_separable_problem(s, 1.0, 0.0, PI);
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let t = TimeGrid::new(1.0, n).unwrap();
            let u = solve_nonlinear(&p, t, n).unwrap();
            let exact = exact_linear_separable(&s, 1.0, t, *u.space()).unwrap();
            errs.push(u.max_abs_diff(&exact).unwrap());
        }
        // non-smooth start (u - u0 ~ t^α) limits uniform-mesh L1 to order α
        assert!(errs[0] < 5e-2, "{errs:?}");
        assert!(errs[1] < errs[0] / 1.3, "{errs:?}");
    }

    #[test]
    fn solver_reproduces_other_linear_modes() {
        for (kind, alpha, tol) in [
            (FractionalKind::Caputo, 1.5, 2e-2),
            (FractionalKind::RiemannLiouville, 0.5, 5e-2),
            (FractionalKind::RiemannLiouville, 1.5, 5e-2),
        ] {
            let s = spec(kind, alpha);
            let p = linear_separable_problem(s, 1.0, 0.0, PI);
            let t = TimeGrid::new(1.0, 64).unwrap();
            let u = solve_nonlinear(&p, t, 32).unwrap();
            let exact = exact_linear_separable(&s, 1.0, t, *u.space()).unwrap();
            // compare away from the t = 0 singularity
            let a = u.materialize();
            let b = exact.materialize();
            let mut err = 0.0f64;
            for i in 6..=64 {
                for k in 0..=32 {
                    err = err.max((a[(i, k)] - b[(i, k)]).abs());
                }
            }
            assert!(err < tol, "{kind:?} {alpha}: {err}");
        }
    }

    #[test]
    fn solver_keeps_stationary_state() {
        let d = Diffusivity::Power { beta: 1.0 };
        let p = TFDEProblem {
            spec: spec(FractionalKind::Caputo, 0.5),
            diffusivity: d,
            x_lo: 0.0,
            x_hi: 1.0,
            initial: profile(|x| (2.0 * (x + 0.5)).sqrt()),
            initial_rate: None,
            left_boundary: profile(|_| 1.0),
            right_boundary: profile(|_| 3f64.sqrt()),
        };
        let t = TimeGrid::new(1.0, 32).unwrap();
        let u = solve_nonlinear(&p, t, 32).unwrap();
        let v = u.materialize();
        for i in 1..=32 {
            for k in 0..=32 {
                assert!((v[(i, k)] - v[(0, k)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn solver_zero_data_gives_zero() {
        let p = TFDEProblem {
            spec: spec(FractionalKind::RiemannLiouville, 0.5),
            diffusivity: Diffusivity::Power { beta: 2.0 },
            x_lo: 0.0,
            x_hi: 1.0,
            initial: profile(|_| 0.0),
            initial_rate: None,
            left_boundary: profile(|_| 0.0),
            right_boundary: profile(|_| 0.0),
        };
        let u = solve_nonlinear(&p, TimeGrid::new(1.0, 16).unwrap(), 8).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
        let mut bad = p.clone();
        bad.initial_rate = Some(profile(|_| 0.0));
        assert!(solve_nonlinear(&bad, TimeGrid::new(1.0, 16).unwrap(), 8).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = TimeGrid::new(1.0, 4).unwrap();
        let x = SpaceGrid::new(-1.0, 1.0, 4).unwrap();
        let u = GridFunction::from_fn(t, x, |t, x| t * x + 0.1);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, u);
        assert!(GridFunction::read_csv("t\\x,0,1\n0,1\n".as_bytes()).is_err());
    }
}
