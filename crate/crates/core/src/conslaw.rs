//! Conserved vectors: Noether construction, closed-form catalog, and the
//! divergence and flux-balance checks.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fracops::{
    f_modified_integral, j_integral, left_frac_integral, right_frac_integral, rl_left_derivative,
    rl_right_derivative, time_derivative, FractionalKind, FractionalSpec, TimeSeries, Weight,
};
use crate::specialfn::{phi_psi_wave, phi_sub, rgamma};
use crate::symcat::{
    adjoint_substitution, characteristic, list_symmetries, AdjointSubstitution, CatalogOptions,
    SubstitutionRegime, Symmetry, SymmetryId,
};
use crate::tfde::{time_fractional_derivative, Diffusivity, GridFunction};

/// Derivative type and α range of the linear equation.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearCase {
    RL_sub,
    RL_wave,
    Cap_sub,
    Cap_wave,
}

impl LinearCase {
    pub fn for_spec(spec: &FractionalSpec) -> Self {
        match (spec.kind, spec.is_wave()) {
            (FractionalKind::RiemannLiouville, false) => LinearCase::RL_sub,
            (FractionalKind::RiemannLiouville, true) => LinearCase::RL_wave,
            (FractionalKind::Caputo, false) => LinearCase::Cap_sub,
            (FractionalKind::Caputo, true) => LinearCase::Cap_wave,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LinearCase::RL_sub => "RL_sub",
            LinearCase::RL_wave => "RL_wave",
            LinearCase::Cap_sub => "Cap_sub",
            LinearCase::Cap_wave => "Cap_wave",
        }
    }

    const ALL: [LinearCase; 4] = [LinearCase::RL_sub, LinearCase::RL_wave, LinearCase::Cap_sub, LinearCase::Cap_wave];
}

/// Which linear conserved vector: the generic form for `W_i`, or the
/// rewritten forms available for the translation and scaling generators.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinearForm {
    X1,
    X2,
    X3,
    Xinf,
    X1_alt,
    X2_alt,
}

impl LinearForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearForm::X1 => "X1",
            LinearForm::X2 => "X2",
            LinearForm::X3 => "X3",
            LinearForm::Xinf => "Xinf",
            LinearForm::X1_alt => "X1_alt",
            LinearForm::X2_alt => "X2_alt",
        }
    }

    const ALL: [LinearForm; 6] = [
        LinearForm::X1,
        LinearForm::X2,
        LinearForm::X3,
        LinearForm::Xinf,
        LinearForm::X1_alt,
        LinearForm::X2_alt,
    ];
}

/// Where a conserved vector comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    TrivialRl,
    TrivialCaputo,
    Linear { case: LinearCase, form: LinearForm },
    /// `x ₀I^{1-α}u`, the subdiffusion vector for arbitrary k(u).
    NlRlSub,
    /// The two time-dependent subdiffusion vectors (1 or 2).
    NlRlSubT(u8),
    /// Riemann-Liouville diffusion-wave vectors 1 to 6.
    Table1(u8),
    /// Vector 6 with `2x ₀I^{3-α}u` as its last term.
    Table1V6Alt,
    /// Caputo subdiffusion vectors 1 to 4.
    Table3(u8),
    /// Caputo diffusion-wave vectors 1 to 6.
    Table5(u8),
    NoetherDerived {
        sym: SymmetryId,
        regime: SubstitutionRegime,
        constants: [f64; 4],
    },
}

impl Provenance {
    /// Every closed-form catalog entry.
    pub fn catalog() -> Vec<Provenance> {
        let mut out = vec![Provenance::TrivialRl, Provenance::TrivialCaputo];
        for case in LinearCase::ALL {
            for form in LinearForm::ALL {
                out.push(Provenance::Linear { case, form });
            }
        }
        out.extend([Provenance::NlRlSub, Provenance::NlRlSubT(1), Provenance::NlRlSubT(2)]);
        out.extend((1..=6).map(Provenance::Table1));
        out.push(Provenance::Table1V6Alt);
        out.extend((1..=4).map(Provenance::Table3));
        out.extend((1..=6).map(Provenance::Table5));
        out
    }

    /// Table vector number `n` of the regime's catalog table.
    pub fn table_vector(regime: SubstitutionRegime, n: u8) -> Option<Provenance> {
        match regime {
            SubstitutionRegime::RL_wave => Some(Provenance::Table1(n)),
            SubstitutionRegime::Caputo_sub => Some(Provenance::Table3(n)),
            SubstitutionRegime::Caputo_wave => Some(Provenance::Table5(n)),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::TrivialRl => write!(f, "Trivial_RL"),
            Provenance::TrivialCaputo => write!(f, "Trivial_Caputo"),
            Provenance::Linear { case, form } => write!(f, "Linear_{}_{}", case.as_str(), form.as_str()),
            Provenance::NlRlSub => write!(f, "NL_RL_sub"),
            Provenance::NlRlSubT(k) => write!(f, "NL_RL_sub_t{k}"),
            Provenance::Table1(k) => write!(f, "Table1_v{k}"),
            Provenance::Table1V6Alt => write!(f, "Table1_v6_alt"),
            Provenance::Table3(k) => write!(f, "Table3_v{k}"),
            Provenance::Table5(k) => write!(f, "Table5_v{k}"),
            Provenance::NoetherDerived { sym, regime, constants } => {
                let n = regime.n_constants();
                let c: Vec<String> = constants[..n].iter().map(|c| c.to_string()).collect();
                write!(f, "Noether_{}_{}_{}", sym.as_str(), regime.as_str(), c.join(";"))
            }
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Parameter(format!("unknown conserved vector id {s:?}"));
        match s {
            "CVSERL" => return Ok(Provenance::NlRlSub),
            "CVSERL1" => return Ok(Provenance::NlRlSubT(1)),
            "CVSERL2" => return Ok(Provenance::NlRlSubT(2)),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("Noether_") {
            return parse_noether(rest).ok_or_else(unknown);
        }
        Provenance::catalog()
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(unknown)
    }
}

fn parse_noether(rest: &str) -> Option<Provenance> {
    let (head, consts) = rest.rsplit_once('_')?;
    let sym = SymmetryId::ALL
        .into_iter()
        .filter(|id| head.starts_with(&format!("{}_", id.as_str())))
        .max_by_key(|id| id.as_str().len())?;
    let regime: SubstitutionRegime = head[sym.as_str().len() + 1..].parse().ok()?;
    let values: Vec<f64> = consts.split(';').map(|c| c.trim().parse()).collect::<std::result::Result<_, _>>().ok()?;
    if values.len() != regime.n_constants() {
        return None;
    }
    let mut constants = [0.0; 4];
    constants[..values.len()].copy_from_slice(&values);
    Some(Provenance::NoetherDerived { sym, regime, constants })
}

/// Everything a conserved vector needs besides the solution itself.
#[derive(Debug, Clone)]
pub struct VectorInputs {
    pub spec: FractionalSpec,
    pub diffusivity: Diffusivity,
    /// `v = φ` for the linear forms.
    pub substitution: Option<AdjointSubstitution>,
    /// `u(0, x)` at the space nodes; the grid's first row is used when absent.
    pub initial: Option<Vec<f64>>,
    /// `u_t(0, x)` at the space nodes; estimated from the grid when absent.
    pub initial_rate: Option<Vec<f64>>,
    /// Solution of the linear equation for `X_∞`.
    pub h: Option<GridFunction>,
}

impl VectorInputs {
    pub fn new(spec: FractionalSpec, diffusivity: Diffusivity) -> Self {
        VectorInputs {
            spec,
            diffusivity,
            substitution: None,
            initial: None,
            initial_rate: None,
            h: None,
        }
    }

    pub fn with_substitution(mut self, v: AdjointSubstitution) -> Self {
        self.substitution = Some(v);
        self
    }

    pub fn with_initial(mut self, u0: Vec<f64>, rate: Option<Vec<f64>>) -> Self {
        self.initial = Some(u0);
        self.initial_rate = rate;
        self
    }
}

/// A conserved vector that can be evaluated on solution fields.
#[derive(Debug, Clone)]
pub struct ConservedVectorEval {
    pub provenance: Provenance,
    pub inputs: VectorInputs,
}

/// The two components on a grid.
#[derive(Debug, Clone)]
pub struct VectorFields {
    pub ct: GridFunction,
    pub cx: GridFunction,
}

// ---------------------------------------------------------------------------
// field helpers

fn left_op(f: &GridFunction, order: f64) -> Result<GridFunction> {
    if order < 0.0 {
        f.map_columns(|c| left_frac_integral(c, -order))
    } else if order == 0.0 {
        Ok(f.clone())
    } else {
        f.map_columns(|c| rl_left_derivative(c, order))
    }
}

fn right_op(f: &GridFunction, order: f64) -> Result<GridFunction> {
    if order < 0.0 {
        f.map_columns(|c| right_frac_integral(c, -order))
    } else if order == 0.0 {
        Ok(f.clone())
    } else {
        f.map_columns(|c| rl_right_derivative(c, order))
    }
}

fn left_int(f: &GridFunction, mu: f64) -> Result<GridFunction> {
    left_op(f, -mu)
}

fn right_int(f: &GridFunction, mu: f64) -> Result<GridFunction> {
    right_op(f, -mu)
}

/// Column-wise `J(f, g)`.
fn j_field(f: &GridFunction, g: &GridFunction, alpha: f64) -> Result<GridFunction> {
    f.check_same_grid(g)?;
    if f.is_zero() || g.is_zero() {
        return Ok(GridFunction::zeros(*f.time(), *f.space()));
    }
    let cols: Vec<TimeSeries> = (0..f.space().len())
        .into_par_iter()
        .map(|k| j_integral(&f.column(k), &g.column(k), alpha))
        .collect::<Result<_>>()?;
    GridFunction::assemble(*f.space(), cols)
}

fn dt(f: &GridFunction) -> GridFunction {
    f.time_derivative()
}

fn dt_n(f: &GridFunction, n: usize) -> GridFunction {
    (0..n).fold(f.clone(), |acc, _| dt(&acc))
}

fn dx(f: &GridFunction) -> GridFunction {
    f.space_derivative(1)
}

fn times_t(f: &GridFunction) -> GridFunction {
    if f.weight().is_none() {
        f.mul_fn(|t, _| t)
    } else {
        f.clone().with_left_shift(1.0)
    }
}

fn times_x(f: &GridFunction) -> GridFunction {
    f.mul_fn(|_, x| x)
}

/// Multiply by `(T - t)^e`.
fn times_tail(f: &GridFunction, e: f64) -> GridFunction {
    let w = f.weight();
    f.clone().with_weight(Weight::new(w.left, w.right + e))
}

/// `D_t ₀I^m f`, without differencing when `m > 1`.
fn d_left_int(f: &GridFunction, m: f64) -> Result<GridFunction> {
    if m > 1.0 {
        left_int(f, m - 1.0)
    } else {
        Ok(dt(&left_int(f, m)?))
    }
}

/// `₀I^m [(T-t)^{-1} Dⁿ u]` for `n` = 1 or 2, by parts on `g = u - u(0) - t u_t(0)`
/// so the singular `Dⁿ u` of typical solutions is never differenced.
fn int_of_rate(u: &GridFunction, inputs: &VectorInputs, n: usize, m: f64) -> Result<GridFunction> {
    let u0 = initial_values(u, inputs)?;
    let u1 = if n == 2 { initial_rate(u, inputs)? } else { vec![0.0; u0.len()] };
    let time = *u.time();
    let g = u.unweighted().map_values(|i, k, v| v - u0[k] - time.node(i) * u1[k]);
    let w = |j: f64| times_tail(&g, -1.0 - j);
    // (T-t)^{-1} derivatives: w' = (T-t)^{-2}, w'' = 2 (T-t)^{-3}
    let first = comb(&[(1.0, &d_left_int(&w(0.0), m)?), (-1.0, &left_int(&w(1.0), m)?)]);
    if n == 1 {
        return first;
    }
    let inner = comb(&[(1.0, &d_left_int(&w(0.0), m)?), (-2.0, &left_int(&w(1.0), m)?)])?;
    comb(&[(1.0, &dt(&inner)), (2.0, &left_int(&w(2.0), m)?)])
}

fn mul(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    if f.is_zero() || g.is_zero() {
        return Ok(GridFunction::zeros(*f.time(), *f.space()));
    }
    f.mul(g)
}

fn comb(terms: &[(f64, &GridFunction)]) -> Result<GridFunction> {
    let nonzero: Vec<(f64, &GridFunction)> = terms.iter().copied().filter(|(c, f)| *c != 0.0 && !f.is_zero()).collect();
    if nonzero.is_empty() {
        let (_, f) = terms[0];
        return Ok(GridFunction::zeros(*f.time(), *f.space()));
    }
    GridFunction::linear_combination(&nonzero)
}

/// Pointwise map of the materialized field, with `0 ↦ 0` kept exact.
fn pointwise(fields: &[&GridFunction], f: impl Fn(&[f64]) -> f64) -> GridFunction {
    let first = fields[0];
    let mats: Vec<Array2<f64>> = fields.iter().map(|g| g.materialize()).collect();
    let mut out = Array2::zeros(first.values().dim());
    let mut buf = vec![0.0; fields.len()];
    for ((i, k), o) in out.indexed_iter_mut() {
        for (b, m) in buf.iter_mut().zip(&mats) {
            *b = m[(i, k)];
        }
        *o = f(&buf);
    }
    GridFunction::raw(*first.time(), *first.space(), Weight::NONE, out)
}

/// `k(u) u_x`, taken as `D_x K(u)` in the nonlinear case.
fn k_ux(u: &GridFunction, d: &Diffusivity) -> GridFunction {
    match *d {
        Diffusivity::Constant { k0 } => dx(u).scale(k0),
        _ => dx(&big_k(u, d)),
    }
}

/// `K(u)` with `K' = k`.
fn big_k(u: &GridFunction, d: &Diffusivity) -> GridFunction {
    match *d {
        Diffusivity::Constant { k0 } => u.scale(k0),
        _ => pointwise(&[u], |v| if v[0] == 0.0 && d.primitive(0.0) == 0.0 { 0.0 } else { d.primitive(v[0]) }),
    }
}

/// Field `f(t_i) g(x_k)` on the grid of `like`.
fn outer(like: &GridFunction, time: &[f64], space: &[f64]) -> GridFunction {
    GridFunction::zeros(*like.time(), *like.space()).map_values(|i, k, _| time[i] * space[k])
}

fn check_len(v: &[f64], like: &GridFunction, what: &str) -> Result<()> {
    if v.len() != like.space().len() {
        return Err(Error::Shape(format!("{what} has {} values for {} space nodes", v.len(), like.space().len())));
    }
    Ok(())
}

fn initial_values(u: &GridFunction, inputs: &VectorInputs) -> Result<Vec<f64>> {
    match &inputs.initial {
        Some(v) => {
            check_len(v, u, "u(0,x)")?;
            Ok(v.clone())
        }
        None => Ok(u.materialize().row(0).to_vec()),
    }
}

fn initial_rate(u: &GridFunction, inputs: &VectorInputs) -> Result<Vec<f64>> {
    match &inputs.initial_rate {
        Some(v) => {
            check_len(v, u, "u_t(0,x)")?;
            Ok(v.clone())
        }
        None => Ok(dt(u).materialize().row(0).to_vec()),
    }
}

// ---------------------------------------------------------------------------
// Lagrangian and Noether operators

/// `𝒟^α_t u - k'(u) u_x² - k(u) u_xx`, kept weighted in the linear case.
fn equation_residual(u: &GridFunction, spec: &FractionalSpec, d: &Diffusivity) -> Result<GridFunction> {
    let du = time_fractional_derivative(u, spec)?;
    if let Diffusivity::Constant { k0 } = *d {
        return comb(&[(1.0, &du), (-k0, &u.space_derivative(2))]);
    }
    // k'(u) u_x² + k(u) u_xx = D_xx K(u)
    comb(&[(1.0, &du), (-1.0, &big_k(u, d).space_derivative(2))])
}

/// `L = v [𝒟^α_t u - k'(u) u_x² - k(u) u_xx]`.
pub fn formal_lagrangian(
    u: &GridFunction,
    v: &GridFunction,
    diffusivity: &Diffusivity,
    spec: &FractionalSpec,
) -> Result<GridFunction> {
    u.check_same_grid(v)?;
    if v.is_zero() {
        return Ok(GridFunction::zeros(*u.time(), *u.space()));
    }
    mul(v, &equation_residual(u, spec, diffusivity)?)
}

/// The `(ξ⁰L, ξ¹L)` parts of the Noether components.
pub fn lagrangian_terms(
    sym: &Symmetry,
    u: &GridFunction,
    v: &GridFunction,
    spec: &FractionalSpec,
    diffusivity: &Diffusivity,
) -> Result<(GridFunction, GridFunction)> {
    let zeros = GridFunction::zeros(*u.time(), *u.space());
    let time_free = sym.is_time_free();
    let space_free = sym.is_space_free();
    if time_free && space_free {
        return Ok((zeros.clone(), zeros));
    }
    let l = formal_lagrangian(u, v, diffusivity, spec)?;
    let um = u.unweighted();
    let (t, x) = (*u.time(), *u.space());
    let part = |free: bool, xi: &dyn Fn(f64, f64, f64) -> f64| -> Result<GridFunction> {
        if free {
            return Ok(zeros.clone());
        }
        let field = um.map_values(|i, k, val| xi(t.node(i), x.node(k), val));
        mul(&field, &l)
    };
    Ok((
        part(time_free, &|t, x, u| sym.xi0(t, x, u))?,
        part(space_free, &|t, x, u| sym.xi1(t, x, u))?,
    ))
}

/// Time component of the Noether conserved vector, `ξ⁰L` included.
///
/// Riemann-Liouville: `ξ⁰L + Σ_k (-1)^k ₀D^{α-1-k}_t W · D^k_t v - (-1)^n J(W, D^n_t v)`;
/// Caputo: `ξ⁰L + Σ_k D^k_t W · ₜD^{α-1-k}_T v - J(D^n_t W, v)`.
pub fn noether_t(
    sym: &Symmetry,
    u: &GridFunction,
    v: &GridFunction,
    spec: &FractionalSpec,
    diffusivity: &Diffusivity,
) -> Result<GridFunction> {
    let (xi_l, _) = lagrangian_terms(sym, u, v, spec, diffusivity)?;
    let rest = noether_t_core(sym, u, v, spec)?;
    comb(&[(1.0, &xi_l), (1.0, &rest)])
}

/// [`noether_t`] without the `ξ⁰L` term.
pub fn noether_t_core(sym: &Symmetry, u: &GridFunction, v: &GridFunction, spec: &FractionalSpec) -> Result<GridFunction> {
    u.check_same_grid(v)?;
    let w = characteristic(sym, u)?;
    let alpha = spec.alpha;
    let n = spec.order();
    let mut terms: Vec<(f64, GridFunction)> = Vec::new();
    match spec.kind {
        FractionalKind::RiemannLiouville => {
            let mut dv = v.clone();
            for k in 0..n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                terms.push((sign, mul(&left_op(&w, alpha - 1.0 - k as f64)?, &dv)?));
                dv = dt(&dv);
            }
            let sign = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
            terms.push((sign, j_field(&w, &dv, alpha)?));
        }
        FractionalKind::Caputo => {
            let mut dw = w.clone();
            for k in 0..n {
                terms.push((1.0, mul(&dw, &right_op(v, alpha - 1.0 - k as f64)?)?));
                dw = dt(&dw);
            }
            terms.push((-1.0, j_field(&dw, v, alpha)?));
        }
    }
    let refs: Vec<(f64, &GridFunction)> = terms.iter().map(|(c, f)| (*c, f)).collect();
    comb(&refs)
}

/// Space component `ξ¹L + W (v_x k(u) - v k'(u) u_x) - v k(u) W_x`.
pub fn noether_x(
    sym: &Symmetry,
    u: &GridFunction,
    v: &GridFunction,
    spec: &FractionalSpec,
    diffusivity: &Diffusivity,
) -> Result<GridFunction> {
    let (_, xi_l) = lagrangian_terms(sym, u, v, spec, diffusivity)?;
    let rest = noether_x_core(sym, u, v, diffusivity)?;
    comb(&[(1.0, &xi_l), (1.0, &rest)])
}

/// [`noether_x`] without the `ξ¹L` term.
pub fn noether_x_core(sym: &Symmetry, u: &GridFunction, v: &GridFunction, diffusivity: &Diffusivity) -> Result<GridFunction> {
    u.check_same_grid(v)?;
    let w = characteristic(sym, u)?;
    let vx = dx(v);
    match *diffusivity {
        Diffusivity::Constant { k0 } => comb(&[(k0, &mul(&vx, &w)?), (-k0, &mul(v, &dx(&w))?)]),
        d => {
            // W (v_x k - v k' u_x) - v k W_x = k W v_x - v D_x(k W)
            let kw = pointwise(&[u, &w], |a| if a[1] == 0.0 { 0.0 } else { d.k(a[0]) * a[1] });
            comb(&[(1.0, &mul(&kw, &vx)?), (-1.0, &mul(v, &dx(&kw))?)])
        }
    }
}

// ---------------------------------------------------------------------------
// catalog

fn beta_of(d: &Diffusivity) -> f64 {
    match *d {
        Diffusivity::Power { beta } => beta,
        _ => 0.0,
    }
}

fn inadmissible(id: &Provenance, reason: impl Into<String>) -> Error {
    Error::Inadmissible {
        id: id.to_string(),
        reason: reason.into(),
    }
}

/// Build an evaluator after checking that `id` fits the derivative spec and
/// diffusivity in `inputs`.
pub fn catalog_vector(id: &Provenance, inputs: VectorInputs) -> Result<ConservedVectorEval> {
    check_admissible(id, &inputs)?;
    Ok(ConservedVectorEval {
        provenance: id.clone(),
        inputs,
    })
}

fn check_admissible(id: &Provenance, inputs: &VectorInputs) -> Result<()> {
    let spec = &inputs.spec;
    let rl = spec.kind == FractionalKind::RiemannLiouville;
    let wave = spec.is_wave();
    let need = |ok: bool, reason: &str| if ok { Ok(()) } else { Err(inadmissible(id, reason)) };
    inputs.diffusivity.validate()?;
    match id {
        Provenance::TrivialRl => need(rl, "needs the Riemann-Liouville derivative"),
        Provenance::TrivialCaputo => need(!rl, "needs the Caputo derivative"),
        Provenance::Linear { case, form } => {
            need(inputs.diffusivity.is_linear(), "linear vectors need a constant diffusivity")?;
            need(*case == LinearCase::for_spec(spec), "derivative kind or order does not match")?;
            need(inputs.substitution.is_some(), "linear vectors need an adjoint substitution")?;
            need(*form != LinearForm::Xinf || inputs.h.is_some(), "Xinf needs a solution h")
        }
        Provenance::NlRlSub => need(rl && !wave, "needs Riemann-Liouville subdiffusion"),
        Provenance::NlRlSubT(k) => {
            need(rl && !wave, "needs Riemann-Liouville subdiffusion")?;
            need(*k == 1 || *k == 2, "only vectors 1 and 2 exist")?;
            let target = 2.0 * spec.alpha / (1.0 - spec.alpha);
            let ok = matches!(inputs.diffusivity, Diffusivity::Power { beta } if (beta - target).abs() <= 1e-9 * (1.0 + target.abs()));
            need(*k == 1 || ok, "needs k = u^{2α/(1-α)}")
        }
        Provenance::Table1(k) => {
            need(rl && wave, "needs Riemann-Liouville diffusion-wave")?;
            need((1..=6).contains(k), "vectors 1 to 6")
        }
        Provenance::Table1V6Alt => need(rl && wave, "needs Riemann-Liouville diffusion-wave"),
        Provenance::Table3(k) => {
            need(!rl && !wave, "needs Caputo subdiffusion")?;
            need((1..=4).contains(k), "vectors 1 to 4")
        }
        Provenance::Table5(k) => {
            need(!rl && wave, "needs Caputo diffusion-wave")?;
            need((1..=6).contains(k), "vectors 1 to 6")
        }
        Provenance::NoetherDerived { sym, regime, constants } => {
            let opts = CatalogOptions { conditional_x4: true };
            let admitted = list_symmetries(spec.kind, spec.alpha, &inputs.diffusivity, opts);
            need(admitted.iter().any(|s| s.id == *sym), "symmetry not admitted")?;
            need(*sym != SymmetryId::Xinf || inputs.h.is_some(), "Xinf needs a solution h")?;
            adjoint_substitution(*regime, constants, spec).map(|_| ())
        }
    }
}

impl ConservedVectorEval {
    pub fn id(&self) -> String {
        self.provenance.to_string()
    }

    /// Evaluate `(Cᵗ, Cˣ)` on the solution `u`.
    pub fn evaluate(&self, u: &GridFunction) -> Result<VectorFields> {
        let inputs = &self.inputs;
        if (u.time().horizon() - inputs.spec.horizon).abs() > 1e-12 * inputs.spec.horizon {
            return Err(Error::GridMismatch("time grid horizon differs from the spec".into()));
        }
        match &self.provenance {
            Provenance::TrivialRl | Provenance::TrivialCaputo => trivial(u, inputs),
            Provenance::Linear { case, form } => linear(*case, *form, u, inputs),
            Provenance::NlRlSub | Provenance::NlRlSubT(_) => nl_rl_sub(&self.provenance, u, inputs),
            Provenance::Table1(_) | Provenance::Table1V6Alt => table1(&self.provenance, u, inputs),
            Provenance::Table3(k) => table3(*k, u, inputs),
            Provenance::Table5(k) => table5(*k, u, inputs),
            Provenance::NoetherDerived { sym, regime, constants } => {
                let spec = inputs.spec;
                let v = adjoint_substitution(*regime, constants, &spec)?.field(u);
                let sym = self.symmetry(*sym, u)?;
                Ok(VectorFields {
                    ct: noether_t(&sym, u, &v, &spec, &inputs.diffusivity)?,
                    cx: noether_x(&sym, u, &v, &spec, &inputs.diffusivity)?,
                })
            }
        }
    }

    fn symmetry(&self, id: SymmetryId, u: &GridFunction) -> Result<Symmetry> {
        let alpha = self.inputs.spec.alpha;
        if id == SymmetryId::Xinf {
            let h = self.inputs.h.clone().ok_or_else(|| inadmissible(&self.provenance, "Xinf needs h"))?;
            u.check_same_grid(&h)?;
            return Ok(Symmetry::with_h(alpha, h));
        }
        Ok(Symmetry::new(id, alpha, beta_of(&self.inputs.diffusivity)))
    }
}

fn trivial(u: &GridFunction, inputs: &VectorInputs) -> Result<VectorFields> {
    let spec = inputs.spec;
    let alpha = spec.alpha;
    let n = spec.order();
    let ct = match spec.kind {
        // D^{n-1} ₀I^{n-α} u = ₀D^{α-1} u
        FractionalKind::RiemannLiouville => left_op(u, alpha - 1.0)?,
        // ₀I^{2-α} u_t = ₀I^{1-α} (u - u(0)), which avoids differencing u
        FractionalKind::Caputo if n == 1 => {
            let u0 = initial_values(u, inputs)?;
            left_int(&u.unweighted().map_values(|_, k, v| v - u0[k]), 1.0 - alpha)?
        }
        FractionalKind::Caputo => left_int(&dt_n(u, n), n as f64 + 1.0 - alpha)?,
    };
    Ok(VectorFields {
        ct,
        cx: k_ux(u, &inputs.diffusivity).scale(-1.0),
    })
}

/// `W_i` of the linear generators.
fn linear_w(form: LinearForm, u: &GridFunction, inputs: &VectorInputs) -> Result<GridFunction> {
    let alpha = inputs.spec.alpha;
    match form {
        LinearForm::X1 | LinearForm::X1_alt => Ok(dx(u)),
        LinearForm::X2 | LinearForm::X2_alt => comb(&[(2.0, &times_t(&dt(u))), (alpha, &times_x(&dx(u)))]),
        LinearForm::X3 => Ok(u.clone()),
        LinearForm::Xinf => {
            let h = inputs.h.clone().ok_or_else(|| Error::Parameter("Xinf needs h".into()))?;
            u.check_same_grid(&h)?;
            Ok(h)
        }
    }
}

fn linear(case: LinearCase, form: LinearForm, u: &GridFunction, inputs: &VectorInputs) -> Result<VectorFields> {
    let spec = inputs.spec;
    let alpha = spec.alpha;
    let k0 = match inputs.diffusivity {
        Diffusivity::Constant { k0 } => k0,
        _ => return Err(Error::Parameter("linear vectors need a constant diffusivity".into())),
    };
    let sub = inputs
        .substitution
        .ok_or_else(|| Error::Parameter("linear vectors need an adjoint substitution".into()))?;
    let phi = sub.field(u);
    let (phi_t, phi_x) = (dt(&phi), dx(&phi));
    let phi_tt = dt(&phi_t);
    match form {
        LinearForm::X1_alt => return linear_x1_alt(case, u, &phi, k0, alpha),
        LinearForm::X2_alt => return linear_x2_alt(case, u, &phi, k0, &spec),
        _ => {}
    }
    let w = linear_w(form, u, inputs)?;
    let ct = match case {
        LinearCase::RL_sub => comb(&[
            (1.0, &mul(&phi, &left_int(&w, 1.0 - alpha)?)?),
            (1.0, &j_field(&w, &phi_t, alpha)?),
        ])?,
        LinearCase::RL_wave => comb(&[
            (1.0, &mul(&phi, &left_op(&w, alpha - 1.0)?)?),
            (-1.0, &mul(&phi_t, &left_int(&w, 2.0 - alpha)?)?),
            (-1.0, &j_field(&w, &phi_tt, alpha)?),
        ])?,
        LinearCase::Cap_sub => comb(&[
            (1.0, &mul(&w, &right_int(&phi, 1.0 - alpha)?)?),
            (-1.0, &j_field(&dt(&w), &phi, alpha)?),
        ])?,
        LinearCase::Cap_wave => {
            let wt = dt(&w);
            comb(&[
                (1.0, &mul(&w, &right_op(&phi, alpha - 1.0)?)?),
                (1.0, &mul(&wt, &right_int(&phi, 2.0 - alpha)?)?),
                (-1.0, &j_field(&dt(&wt), &phi, alpha)?),
            ])?
        }
    };
    let cx = comb(&[(k0, &mul(&phi_x, &w)?), (-k0, &mul(&phi, &dx(&w))?)])?;
    Ok(VectorFields { ct, cx })
}

fn linear_x1_alt(case: LinearCase, u: &GridFunction, phi: &GridFunction, k0: f64, alpha: f64) -> Result<VectorFields> {
    let phi_x = dx(phi);
    let phi_tx = dt(&phi_x);
    let ct = match case {
        LinearCase::RL_sub => comb(&[
            (1.0, &mul(&phi_x, &left_int(u, 1.0 - alpha)?)?),
            (1.0, &j_field(u, &phi_tx, alpha)?),
        ])?,
        LinearCase::RL_wave => comb(&[
            (1.0, &mul(&phi_x, &left_op(u, alpha - 1.0)?)?),
            (-1.0, &mul(&phi_tx, &left_int(u, 2.0 - alpha)?)?),
            (-1.0, &j_field(u, &dt(&phi_tx), alpha)?),
        ])?,
        LinearCase::Cap_sub => comb(&[
            (1.0, &mul(u, &right_int(&phi_x, 1.0 - alpha)?)?),
            (-1.0, &j_field(&dt(u), &phi_x, alpha)?),
        ])?,
        LinearCase::Cap_wave => {
            let ut = dt(u);
            comb(&[
                (1.0, &mul(u, &right_op(&phi_x, alpha - 1.0)?)?),
                (1.0, &mul(&ut, &right_int(&phi_x, 2.0 - alpha)?)?),
                (-1.0, &j_field(&dt(&ut), &phi_x, alpha)?),
            ])?
        }
    };
    let cx = comb(&[(-k0, &mul(&phi_x, &dx(u))?), (k0, &mul(&phi_x.space_derivative(1), u)?)])?;
    Ok(VectorFields { ct, cx })
}

/// `φ(T, x)` at the space nodes.
fn phi_at_end(phi: &GridFunction) -> Result<Vec<f64>> {
    let m = phi.materialize();
    let last = m.row(m.nrows() - 1).to_vec();
    if last.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularData("the substitution is unbounded at t = T".into()));
    }
    Ok(last)
}

fn linear_x2_alt(case: LinearCase, u: &GridFunction, phi: &GridFunction, k0: f64, spec: &FractionalSpec) -> Result<VectorFields> {
    let alpha = spec.alpha;
    let horizon = spec.horizon;
    let (phi_t, phi_x) = (dt(phi), dx(phi));
    let w = comb(&[(2.0, &times_t(&phi_t)), (alpha, &times_x(&phi_x))])?;
    let ct = match case {
        LinearCase::RL_sub => {
            let iu = left_int(u, 1.0 - alpha)?;
            let bracket = comb(&[(1.0, &mul(&phi_t, &iu)?), (-1.0, &mul(u, &right_int(&phi_t, 1.0 - alpha)?)?)])?;
            let inner = comb(&[(1.0, &times_t(&dt(u))), (-(alpha - 1.0), u)])?;
            comb(&[
                (1.0, &mul(&w, &iu)?),
                (-2.0, &times_t(&bracket)),
                (2.0, &j_field(&inner, &phi_t, alpha)?),
                (-alpha, &times_x(&j_field(u, &dt(&phi_x), alpha)?)),
            ])?
        }
        LinearCase::RL_wave => {
            let phi_tt = dt(&phi_t);
            let i2 = left_int(u, 2.0 - alpha)?;
            let bracket = comb(&[(1.0, &mul(&phi_tt, &i2)?), (-1.0, &mul(u, &right_int(&phi_tt, 2.0 - alpha)?)?)])?;
            let inner = comb(&[(1.0, &times_t(&dt(u))), (-(alpha - 1.0), u)])?;
            comb(&[
                (1.0, &mul(&w, &left_op(u, alpha - 1.0)?)?),
                (-1.0, &mul(&dt(&w), &i2)?),
                (2.0, &times_t(&bracket)),
                (2.0, &j_field(&inner, &phi_tt, alpha)?),
                (-alpha, &times_x(&j_field(u, &dt(&dt(&phi_x)), alpha)?)),
            ])?
        }
        LinearCase::Cap_sub => {
            let ut = dt(u);
            let end = end_term(u, phi, -2.0 * horizon * rgamma(1.0 - alpha), -alpha)?;
            let bracket = comb(&[
                (1.0, &mul(&ut, &right_int(phi, 1.0 - alpha)?)?),
                (-1.0, &mul(phi, &left_int(&ut, 1.0 - alpha)?)?),
            ])?;
            let inner = comb(&[(1.0, &times_t(&dt(&ut))), (-(alpha - 2.0), &ut)])?;
            comb(&[
                (1.0, &end),
                (1.0, &mul(u, &right_int(&w, 1.0 - alpha)?)?),
                (-2.0, &times_t(&bracket)),
                (2.0, &j_field(&inner, phi, alpha)?),
                (-alpha, &times_x(&j_field(&ut, &phi_x, alpha)?)),
            ])?
        }
        LinearCase::Cap_wave => {
            let ut = dt(u);
            let utt = dt(&ut);
            let end0 = end_term(u, phi, -2.0 * horizon * rgamma(1.0 - alpha), -alpha)?;
            let end1 = end_term(&ut, phi, -2.0 * horizon * rgamma(2.0 - alpha), 1.0 - alpha)?;
            let bracket = comb(&[
                (1.0, &mul(&utt, &right_int(phi, 2.0 - alpha)?)?),
                (-1.0, &mul(phi, &left_int(&utt, 2.0 - alpha)?)?),
            ])?;
            let inner = comb(&[(1.0, &times_t(&dt(&utt))), (-(alpha - 3.0), &utt)])?;
            comb(&[
                (1.0, &end0),
                (1.0, &end1),
                (1.0, &mul(&ut, &right_int(&w, 2.0 - alpha)?)?),
                (1.0, &mul(u, &right_op(&w, alpha - 1.0)?)?),
                (-2.0, &times_t(&bracket)),
                (2.0, &j_field(&inner, phi, alpha)?),
                (-alpha, &times_x(&j_field(&utt, &phi_x, alpha)?)),
            ])?
        }
    };
    let cx = comb(&[(-k0, &mul(&w, &dx(u))?), (k0, &mul(&dx(&w), u)?)])?;
    Ok(VectorFields { ct, cx })
}

/// `c · f(t,x) φ(T,x) (T-t)^e`.
fn end_term(f: &GridFunction, phi: &GridFunction, c: f64, e: f64) -> Result<GridFunction> {
    let end = phi_at_end(phi)?;
    let g = f.map_values(|_, k, v| c * v * end[k]);
    Ok(times_tail(&g, e))
}

fn nl_rl_sub(id: &Provenance, u: &GridFunction, inputs: &VectorInputs) -> Result<VectorFields> {
    let alpha = inputs.spec.alpha;
    let d = &inputs.diffusivity;
    let i1 = left_int(u, 1.0 - alpha)?;
    let kux = k_ux(u, d);
    match id {
        Provenance::NlRlSub => Ok(VectorFields {
            ct: times_x(&i1),
            cx: comb(&[(1.0, &big_k(u, d)), (-1.0, &times_x(&kux))])?,
        }),
        Provenance::NlRlSubT(k) => {
            let base = comb(&[(1.0, &times_t(&i1)), (-1.0, &left_int(u, 2.0 - alpha)?)])?;
            if *k == 1 {
                return Ok(VectorFields {
                    ct: base,
                    cx: times_t(&kux).scale(-1.0),
                });
            }
            let uk = pointwise(&[u], |v| if v[0] == 0.0 { 0.0 } else { v[0] * d.k(v[0]) });
            let cx = comb(&[((1.0 - alpha) / (1.0 + alpha), &uk), (-1.0, &times_x(&kux))])?;
            Ok(VectorFields {
                ct: times_x(&base),
                cx: times_t(&cx),
            })
        }
        _ => unreachable!("dispatched by provenance"),
    }
}

fn table1(id: &Provenance, u: &GridFunction, inputs: &VectorInputs) -> Result<VectorFields> {
    let alpha = inputs.spec.alpha;
    let d = &inputs.diffusivity;
    let dfrac = left_op(u, alpha - 1.0)?;
    let i2 = left_int(u, 2.0 - alpha)?;
    let kux = k_ux(u, d);
    let moment = comb(&[(1.0, &big_k(u, d)), (-1.0, &times_x(&kux))])?;
    let t_part = comb(&[(1.0, &times_t(&dfrac)), (-1.0, &i2)])?;
    let tt = |f: &GridFunction| times_t(&times_t(f));
    let quad = |last: &GridFunction| comb(&[(1.0, &tt(&dfrac)), (-2.0, &times_t(&i2)), (2.0, last)]);
    let (ct, cx) = match id {
        Provenance::Table1(1) => (dfrac.clone(), kux.scale(-1.0)),
        Provenance::Table1(2) => (t_part.clone(), times_t(&kux).scale(-1.0)),
        Provenance::Table1(3) => (times_x(&dfrac), moment.clone()),
        Provenance::Table1(4) => (times_x(&t_part), times_t(&moment)),
        Provenance::Table1(5) => (quad(&left_int(u, 3.0 - alpha)?)?, tt(&kux).scale(-1.0)),
        Provenance::Table1(6) => (times_x(&quad(&i2)?), tt(&moment)),
        Provenance::Table1V6Alt => (times_x(&quad(&left_int(u, 3.0 - alpha)?)?), tt(&moment)),
        _ => return Err(inadmissible(id, "no such vector")),
    };
    Ok(VectorFields { ct, cx })
}

/// Time factor sampled at the nodes; NaN where it is undefined.
fn time_profile(u: &GridFunction, f: impl Fn(f64) -> Result<f64>) -> Vec<f64> {
    u.time().nodes().map(|t| f(t).unwrap_or(f64::NAN)).collect()
}

fn table3(k: u8, u: &GridFunction, inputs: &VectorInputs) -> Result<VectorFields> {
    let spec = inputs.spec;
    let (alpha, horizon) = (spec.alpha, spec.horizon);
    let d = &inputs.diffusivity;
    let kux = k_ux(u, d);
    let moment = comb(&[(1.0, &big_k(u, d)), (-1.0, &times_x(&kux))])?;
    let b1 = || -> Result<GridFunction> {
        let u0 = initial_values(u, inputs)?;
        let phi = time_profile(u, |t| phi_sub(t, alpha, horizon));
        let tail = times_tail(&left_int(&times_tail(u, -1.0), 1.0 - alpha)?, alpha);
        comb(&[(1.0, &outer(u, &phi, &u0)), (1.0, &tail)])
    };
    let b2 = || -> Result<GridFunction> {
        Ok(times_tail(&int_of_rate(u, inputs, 1, 2.0 - alpha)?, alpha - 1.0))
    };
    let (ct, cx) = match k {
        1 => (b1()?, times_tail(&kux, alpha - 1.0).scale(-1.0)),
        2 => (b2()?, times_tail(&kux, alpha - 2.0).scale(-1.0)),
        3 => (times_x(&b1()?), times_tail(&moment, alpha - 1.0)),
        4 => (times_x(&b2()?), times_tail(&moment, alpha - 2.0)),
        _ => return Err(inadmissible(&Provenance::Table3(k), "no such vector")),
    };
    Ok(VectorFields { ct, cx })
}

fn table5(k: u8, u: &GridFunction, inputs: &VectorInputs) -> Result<VectorFields> {
    let spec = inputs.spec;
    let (alpha, horizon) = (spec.alpha, spec.horizon);
    let d = &inputs.diffusivity;
    let kux = k_ux(u, d);
    let moment = comb(&[(1.0, &big_k(u, d)), (-1.0, &times_x(&kux))])?;
    let ut = dt(u);
    let over = times_tail(&ut, -1.0);
    let a1 = || -> Result<GridFunction> {
        Ok(times_tail(&int_of_rate(u, inputs, 2, 3.0 - alpha)?, alpha - 2.0))
    };
    let a2 = || -> Result<GridFunction> {
        let rate = initial_rate(u, inputs)?;
        let phi = time_profile(u, |t| phi_psi_wave(t, alpha, horizon).map(|p| p.0));
        let tail = times_tail(&int_of_rate(u, inputs, 1, 2.0 - alpha)?, alpha - 1.0);
        comb(&[(1.0, &outer(u, &phi, &rate)), (1.0, &tail)])
    };
    let a3 = || -> Result<GridFunction> {
        let rate = initial_rate(u, inputs)?;
        let psi = time_profile(u, |t| phi_psi_wave(t, alpha, horizon).map(|p| p.1));
        let tail = times_tail(&over.map_columns(|c| f_modified_integral(c, alpha))?, alpha);
        comb(&[(1.0, &outer(u, &psi, &rate)), (1.0, &tail)])
    };
    let flux = |e: f64| times_tail(&kux, e).scale(-1.0);
    let (ct, cx) = match k {
        1 => (a1()?, flux(alpha - 3.0)),
        2 => (a2()?, flux(alpha - 2.0)),
        3 => (a3()?, flux(alpha - 1.0)),
        4 => (times_x(&a1()?), times_tail(&moment, alpha - 3.0)),
        5 => (times_x(&a2()?), times_tail(&moment, alpha - 2.0)),
        6 => (times_x(&a3()?), times_tail(&moment, alpha - 1.0)),
        _ => return Err(inadmissible(&Provenance::Table5(k), "no such vector")),
    };
    Ok(VectorFields { ct, cx })
}

// ---------------------------------------------------------------------------
// symmetry ↔ vector tables

/// One entry of a correspondence table.
#[derive(Debug, Clone, PartialEq)]
pub enum Correspondence {
    Vectors(Vec<Provenance>),
    /// The generator yields only a trivial vector for this constant.
    Zero,
    /// The pair does not appear in the regime's table.
    Unlisted,
}

type Column = (SymmetryId, &'static [&'static [u8]]);

// Entries are vector numbers per constant c1, c2, ...; an empty list is 0.
const RL_WAVE_TABLE: &[Column] = &[
    (SymmetryId::X1, &[&[], &[1], &[], &[2]]),
    (SymmetryId::X2, &[&[1], &[3], &[2], &[4]]),
    (SymmetryId::X3_pow, &[&[1], &[3], &[2], &[4]]),
    (SymmetryId::X4_pow43, &[&[3], &[], &[4], &[]]),
    (SymmetryId::X4_rl, &[&[2], &[4], &[5], &[6]]),
];

const CAPUTO_SUB_TABLE: &[Column] = &[
    (SymmetryId::X1, &[&[], &[1]]),
    (SymmetryId::X2, &[&[1, 2], &[3, 4]]),
    (SymmetryId::X3_pow, &[&[1], &[3]]),
    (SymmetryId::X3_exp, &[&[1], &[3]]),
    (SymmetryId::X4_pow43, &[&[3], &[]]),
];

const CAPUTO_WAVE_TABLE: &[Column] = &[
    (SymmetryId::X1, &[&[], &[], &[2], &[3]]),
    (SymmetryId::X2, &[&[1, 2], &[2, 3], &[4, 5], &[5, 6]]),
    (SymmetryId::X3_pow, &[&[2], &[3], &[5], &[6]]),
    (SymmetryId::X3_exp, &[&[2], &[3], &[5], &[6]]),
    (SymmetryId::X4_pow43, &[&[5], &[6], &[], &[]]),
    (SymmetryId::X4_rl, &[&[1, 2, 3], &[2, 3], &[4, 5, 6], &[5, 6]]),
];

fn rl_sub_entry(sym: SymmetryId, c: usize) -> Correspondence {
    use Correspondence::*;
    let one = |p: Provenance| Vectors(vec![p]);
    match (sym, c) {
        (SymmetryId::X1, 1) => Zero,
        (SymmetryId::X1, 2) => one(Provenance::TrivialRl),
        (SymmetryId::X2 | SymmetryId::X3_pow, 1) => one(Provenance::TrivialRl),
        (SymmetryId::X2 | SymmetryId::X3_pow, 2) => one(Provenance::NlRlSub),
        (SymmetryId::X4_pow43, 1) => one(Provenance::NlRlSub),
        (SymmetryId::X4_pow43, 2) => Zero,
        (SymmetryId::X4_rl, 1) => one(Provenance::NlRlSubT(1)),
        (SymmetryId::X4_rl, 2) => one(Provenance::NlRlSubT(2)),
        _ => Unlisted,
    }
}

/// Generators appearing in the regime's correspondence table, in column order.
pub fn table_symmetries(regime: SubstitutionRegime) -> Vec<SymmetryId> {
    match regime {
        SubstitutionRegime::RL_sub => vec![
            SymmetryId::X1,
            SymmetryId::X2,
            SymmetryId::X3_pow,
            SymmetryId::X4_pow43,
            SymmetryId::X4_rl,
        ],
        SubstitutionRegime::RL_wave => RL_WAVE_TABLE.iter().map(|c| c.0).collect(),
        SubstitutionRegime::Caputo_sub => CAPUTO_SUB_TABLE.iter().map(|c| c.0).collect(),
        SubstitutionRegime::Caputo_wave => CAPUTO_WAVE_TABLE.iter().map(|c| c.0).collect(),
        SubstitutionRegime::Linear_particular => Vec::new(),
    }
}

/// Conserved vectors produced by generator `sym` with substitution constant
/// `constant` (1-based) in `regime`.
pub fn correspondence(sym: SymmetryId, constant: usize, regime: SubstitutionRegime) -> Result<Correspondence> {
    let n = regime.n_constants();
    if constant == 0 || constant > n {
        return Err(Error::Parameter(format!(
            "{} has constants c1..c{n}, got c{constant}",
            regime.as_str()
        )));
    }
    let table = match regime {
        SubstitutionRegime::RL_sub => return Ok(rl_sub_entry(sym, constant)),
        SubstitutionRegime::RL_wave => RL_WAVE_TABLE,
        SubstitutionRegime::Caputo_sub => CAPUTO_SUB_TABLE,
        SubstitutionRegime::Caputo_wave => CAPUTO_WAVE_TABLE,
        SubstitutionRegime::Linear_particular => return Ok(Correspondence::Unlisted),
    };
    let Some((_, rows)) = table.iter().find(|(id, _)| *id == sym) else {
        return Ok(Correspondence::Unlisted);
    };
    let numbers = rows[constant - 1];
    if numbers.is_empty() {
        return Ok(Correspondence::Zero);
    }
    let vectors = numbers
        .iter()
        .map(|k| Provenance::table_vector(regime, *k).expect("table regimes have catalogs"))
        .collect();
    Ok(Correspondence::Vectors(vectors))
}

// ---------------------------------------------------------------------------
// residual checks

/// Exclusion windows for the residual norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Fraction of time nodes dropped at each of t = 0 and t = T (rounded
    /// up, at least one node).
    pub exclude_frac: f64,
    /// Nodes with t below this are dropped as well as t = 0.
    pub t_min: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            exclude_frac: 0.05,
            t_min: 0.0,
        }
    }
}

impl CheckOptions {
    /// First and last included time rows.
    fn rows(&self, n_steps: usize, h: f64) -> (usize, usize) {
        let drop_end = ((self.exclude_frac.max(0.0) * (n_steps + 1) as f64).ceil() as usize).max(1);
        let first = ((self.t_min / h - 1e-9).ceil() as usize).max(drop_end);
        (first, n_steps.saturating_sub(drop_end))
    }
}

/// Pointwise residual with its norms over the included nodes.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub provenance_id: String,
    pub kind: FractionalKind,
    pub alpha: f64,
    pub n_steps: usize,
    pub n_x: usize,
    /// Rows are time nodes; one column per space node (one column for flux balances).
    pub residual: Array2<f64>,
    pub included: Array2<bool>,
    pub linf: f64,
    pub l2: f64,
    pub excluded_nodes: usize,
    /// Included time window `[t_first, t_last]`.
    pub window: (f64, f64),
    pub convergence_ratio: Option<f64>,
}

impl ResidualReport {
    fn build(
        id: String,
        spec: &FractionalSpec,
        u: &GridFunction,
        residual: Array2<f64>,
        space_interior: bool,
        opts: &CheckOptions,
    ) -> Self {
        let time = u.time();
        let (first, last) = opts.rows(time.n_steps(), time.step());
        let ncols = residual.ncols();
        let mut included = Array2::from_elem(residual.dim(), false);
        for ((i, k), inc) in included.indexed_iter_mut() {
            let space_ok = !space_interior || (k > 0 && k + 1 < ncols);
            *inc = i >= first && i <= last && space_ok;
        }
        let cell = time.step() * if space_interior { u.space().step() } else { 1.0 };
        let mut linf: f64 = 0.0;
        let mut sum = 0.0;
        for (r, inc) in residual.iter().zip(included.iter()) {
            if *inc {
                // a non-finite residual inside the window poisons the norms
                let a = if r.is_finite() { r.abs() } else { f64::INFINITY };
                linf = linf.max(a);
                sum += a * a * cell;
            }
        }
        let excluded_nodes = included.iter().filter(|b| !**b).count();
        ResidualReport {
            provenance_id: id,
            kind: spec.kind,
            alpha: spec.alpha,
            n_steps: time.n_steps(),
            n_x: u.space().n_x(),
            residual,
            included,
            linf,
            l2: sum.sqrt(),
            excluded_nodes,
            window: (time.node(first.min(time.n_steps())), time.node(last)),
            convergence_ratio: None,
        }
    }

    /// Record `coarse.linf / self.linf` when `self` refines `coarse` by an
    /// integer factor in time.
    pub fn record_ratio(&mut self, coarse: &ResidualReport) -> Option<f64> {
        let nested = coarse.n_steps > 0
            && self.n_steps > coarse.n_steps
            && self.n_steps.is_multiple_of(coarse.n_steps)
            && self.n_x.is_multiple_of(coarse.n_x);
        self.convergence_ratio = if nested && self.linf > 0.0 {
            Some(coarse.linf / self.linf)
        } else {
            None
        };
        self.convergence_ratio
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "provenance_id",
        "kind",
        "alpha",
        "n_steps",
        "n_x",
        "Linf",
        "L2",
        "excluded_nodes",
        "convergence_ratio",
    ];

    pub fn csv_record(&self) -> [String; 9] {
        [
            self.provenance_id.clone(),
            self.kind.label().to_string(),
            self.alpha.to_string(),
            self.n_steps.to_string(),
            self.n_x.to_string(),
            format!("{:.10e}", self.linf),
            format!("{:.10e}", self.l2),
            self.excluded_nodes.to_string(),
            self.convergence_ratio.map(|r| format!("{r:.6}")).unwrap_or_default(),
        ]
    }
}

/// Write reports as CSV with a header row.
pub fn write_reports<W: Write>(reports: &[ResidualReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(ResidualReport::CSV_HEADER).map_err(io)?;
    for r in reports {
        w.write_record(r.csv_record()).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

impl VectorFields {
    /// `D_t Cᵗ + D_x Cˣ` at every node: analytic on the weights, central
    /// differences on the regular parts.
    pub fn divergence(&self) -> Result<Array2<f64>> {
        self.ct.check_same_grid(&self.cx)?;
        let dct = self.ct.time_derivative().materialize();
        let dcx = self.cx.space_derivative(1).materialize();
        Ok(dct + dcx)
    }

    /// `d/dt ∫ Cᵗ dx + Cˣ(x_hi) - Cˣ(x_lo)` at every time node.
    pub fn flux_balance(&self) -> Result<Array2<f64>> {
        self.ct.check_same_grid(&self.cx)?;
        let dxs = self.ct.space().step();
        let total: Vec<f64> = self
            .ct
            .values()
            .axis_iter(Axis(0))
            .map(|row| {
                let n = row.len();
                dxs * (row.sum() - 0.5 * (row[0] + row[n - 1]))
            })
            .collect();
        let series = TimeSeries::raw(*self.ct.time(), self.ct.weight(), total);
        let rate = time_derivative(&series).materialize();
        let cx = self.cx.materialize();
        let last = cx.ncols() - 1;
        let mut out = Array2::zeros((rate.len(), 1));
        for (i, r) in rate.iter().enumerate() {
            out[(i, 0)] = r + cx[(i, last)] - cx[(i, 0)];
        }
        Ok(out)
    }
}

/// Divergence residual of `cv` evaluated on `u`.
pub fn divergence_residual(cv: &ConservedVectorEval, u: &GridFunction, opts: &CheckOptions) -> Result<ResidualReport> {
    let fields = cv.evaluate(u)?;
    divergence_report(&fields, cv.id(), &cv.inputs.spec, u, opts)
}

/// Divergence report for fields built elsewhere.
pub fn divergence_report(
    fields: &VectorFields,
    id: String,
    spec: &FractionalSpec,
    u: &GridFunction,
    opts: &CheckOptions,
) -> Result<ResidualReport> {
    let r = fields.divergence()?;
    Ok(ResidualReport::build(id, spec, u, r, true, opts))
}

/// Integrated balance of `cv` over the space domain, per time node.
pub fn flux_balance(cv: &ConservedVectorEval, u: &GridFunction, opts: &CheckOptions) -> Result<ResidualReport> {
    let fields = cv.evaluate(u)?;
    flux_report(&fields, cv.id(), &cv.inputs.spec, u, opts)
}

pub fn flux_report(
    fields: &VectorFields,
    id: String,
    spec: &FractionalSpec,
    u: &GridFunction,
    opts: &CheckOptions,
) -> Result<ResidualReport> {
    let r = fields.flux_balance()?;
    Ok(ResidualReport::build(id, spec, u, r, false, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::TimeGrid;
    use crate::specialfn::gamma;
    use crate::tfde::{exact_linear_separable, exact_rl_power_mode, exact_stationary_caputo, SpaceGrid};
    use std::f64::consts::PI;

    fn spec(kind: FractionalKind, alpha: f64) -> FractionalSpec {
        FractionalSpec::new(kind, alpha, 1.0).unwrap()
    }

    fn eval(id: Provenance, inputs: VectorInputs, u: &GridFunction) -> VectorFields {
        catalog_vector(&id, inputs).unwrap().evaluate(u).unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for p in Provenance::catalog() {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        let n = Provenance::NoetherDerived {
            sym: SymmetryId::X3_pow,
            regime: SubstitutionRegime::Caputo_wave,
            constants: [1.0, 0.5, 0.0, -2.0],
        };
        assert_eq!(n.to_string().parse::<Provenance>().unwrap(), n);
        assert_eq!("CVSERL2".parse::<Provenance>().unwrap(), Provenance::NlRlSubT(2));
        assert!("Table7_v1".parse::<Provenance>().is_err());
    }

    #[test]
    fn table_lookups() {
        use Correspondence::*;
        assert_eq!(
            correspondence(SymmetryId::X1, 2, SubstitutionRegime::RL_wave).unwrap(),
            Vectors(vec![Provenance::Table1(1)])
        );
        assert_eq!(
            correspondence(SymmetryId::X2, 1, SubstitutionRegime::Caputo_sub).unwrap(),
            Vectors(vec![Provenance::Table3(1), Provenance::Table3(2)])
        );
        assert_eq!(correspondence(SymmetryId::X1, 1, SubstitutionRegime::Caputo_wave).unwrap(), Zero);
        assert_eq!(
            correspondence(SymmetryId::X4_rl, 2, SubstitutionRegime::RL_sub).unwrap(),
            Vectors(vec![Provenance::NlRlSubT(2)])
        );
        assert!(correspondence(SymmetryId::X1, 3, SubstitutionRegime::Caputo_sub).is_err());
    }

    #[test]
    fn admissibility() {
        let s = spec(FractionalKind::Caputo, 0.5);
        let lin = VectorInputs::new(s, Diffusivity::Constant { k0: 1.0 });
        assert!(catalog_vector(&Provenance::TrivialRl, lin.clone()).is_err());
        assert!(catalog_vector(&Provenance::Table5(1), lin.clone()).is_err());
        // linear forms need a substitution
        let id = Provenance::Linear {
            case: LinearCase::Cap_sub,
            form: LinearForm::X1,
        };
        assert!(matches!(catalog_vector(&id, lin), Err(Error::Inadmissible { .. })));
        let rl = spec(FractionalKind::RiemannLiouville, 0.5);
        let wrong = VectorInputs::new(rl, Diffusivity::Power { beta: 3.0 });
        assert!(catalog_vector(&Provenance::NlRlSubT(2), wrong).is_err());
        let right = VectorInputs::new(rl, Diffusivity::Power { beta: 2.0 });
        assert!(catalog_vector(&Provenance::NlRlSubT(2), right).is_ok());
    }

    #[test]
    fn trivial_rl_power_mode() {
        let s = spec(FractionalKind::RiemannLiouville, 0.5);
        let time = TimeGrid::new(1.0, 128).unwrap();
        let space = SpaceGrid::new(0.0, 1.0, 16).unwrap();
        let u = exact_rl_power_mode(&s, 2.0, time, space).unwrap();
        let inputs = VectorInputs::new(s, Diffusivity::Power { beta: 2.0 });
        let f = eval(Provenance::TrivialRl, inputs.clone(), &u);
        let ct = f.ct.materialize();
        let expected = 2.0 * gamma(0.5).unwrap();
        for i in 13..=128 {
            assert!((ct[(i, 3)] - expected).abs() < 1e-8);
        }
        let cx = f.cx.materialize();
        for (i, r) in cx.rows().into_iter().enumerate().skip(1) {
            // one-sided end stencils leave roundoff
            assert!(r.iter().all(|v| v.abs() < 1e-10), "{i} {r:?}");
        }
        let cv = catalog_vector(&Provenance::TrivialRl, inputs).unwrap();
        let opts = CheckOptions { t_min: 0.1, ..Default::default() };
        assert!(divergence_residual(&cv, &u, &opts).unwrap().linf < 1e-8);
        assert!(flux_balance(&cv, &u, &opts).unwrap().linf < 1e-8);
    }

    #[test]
    fn zero_solution_gives_zero_vectors() {
        let s = spec(FractionalKind::RiemannLiouville, 0.5);
        let time = TimeGrid::new(1.0, 32).unwrap();
        let space = SpaceGrid::new(0.0, 1.0, 8).unwrap();
        let u = GridFunction::zeros(time, space).with_weight(Weight::new(-0.5, 0.0));
        let inputs = VectorInputs::new(s, Diffusivity::Power { beta: 2.0 });
        let cv = catalog_vector(&Provenance::NlRlSubT(1), inputs).unwrap();
        let f = cv.evaluate(&u).unwrap();
        assert!(f.ct.is_zero() && f.cx.is_zero());
        assert_eq!(divergence_residual(&cv, &u, &CheckOptions::default()).unwrap().linf, 0.0);
    }

    fn stationary(alpha: f64, n: usize) -> (FractionalSpec, GridFunction) {
        let s = spec(FractionalKind::Caputo, alpha);
        let time = TimeGrid::new(1.0, n).unwrap();
        let space = SpaceGrid::new(0.0, 1.0, 20).unwrap();
        let u = exact_stationary_caputo(&Diffusivity::Power { beta: 1.0 }, 1.0, 0.5, time, space).unwrap();
        (s, u)
    }

    #[test]
    fn caputo_sub_table_on_stationary_solution() {
        let (s, u) = stationary(0.5, 512);
        let u0 = u.materialize().row(0).to_vec();
        let inputs = VectorInputs::new(s, Diffusivity::Power { beta: 1.0 }).with_initial(u0, None);
        for k in 1..=4 {
            let cv = catalog_vector(&Provenance::Table3(k), inputs.clone()).unwrap();
            let r = divergence_residual(&cv, &u, &CheckOptions::default()).unwrap();
            assert!(r.linf <= 1e-6, "Table3_v{k}: {}", r.linf);
        }
        // Cˣ of vector 1 is -(T-t)^{α-1} a with K(u) = a x + b
        let f = eval(Provenance::Table3(1), inputs, &u);
        let cx = f.cx.materialize();
        let t = u.time().node(100);
        assert!((cx[(100, 7)] + (1.0 - t).powf(-0.5)).abs() < 1e-9);
    }

    #[test]
    fn caputo_wave_table_on_stationary_solution() {
        let (s, u) = stationary(1.5, 256);
        let u0 = u.materialize().row(0).to_vec();
        let rate = vec![0.0; u0.len()];
        let inputs = VectorInputs::new(s, Diffusivity::Power { beta: 1.0 }).with_initial(u0, Some(rate));
        for k in 1..=6 {
            let cv = catalog_vector(&Provenance::Table5(k), inputs.clone()).unwrap();
            let r = divergence_residual(&cv, &u, &CheckOptions::default()).unwrap();
            assert!(r.linf <= 1e-5, "Table5_v{k}: {}", r.linf);
        }
    }

    #[test]
    fn noether_x_matches_table3_flux() {
        // X3_pow with v = (T-t)^{α-1}: W = 2u - x u_x, k W = 4K - a x, so
        // Cˣ = -v (k W)_x = -3 a v, three times the catalog Cˣ
        let (s, u) = stationary(0.5, 128);
        let d = Diffusivity::Power { beta: 1.0 };
        let v = adjoint_substitution(SubstitutionRegime::Caputo_sub, &[1.0], &s).unwrap().field(&u);
        let sym = Symmetry::new(SymmetryId::X3_pow, 0.5, 1.0);
        let cx = noether_x(&sym, &u, &v, &s, &d).unwrap().materialize();
        let inputs = VectorInputs::new(s, d).with_initial(u.materialize().row(0).to_vec(), None);
        let cat = eval(Provenance::Table3(1), inputs, &u).cx.materialize();
        for i in 1..120 {
            for k in 2..18 {
                // W carries a differenced u_x, so agreement is O(dx²)
                assert!((cx[(i, k)] - 3.0 * cat[(i, k)]).abs() < 2e-3 * cat[(i, k)].abs(), "({i},{k})");
            }
        }
    }

    #[test]
    fn noether_matches_linear_caputo_forms() {
        let s = spec(FractionalKind::Caputo, 0.5);
        let time = TimeGrid::new(1.0, 256).unwrap();
        let space = SpaceGrid::new(0.0, PI, 24).unwrap();
        let u = exact_linear_separable(&s, 1.0, time, space).unwrap();
        let d = Diffusivity::Constant { k0: 1.0 };
        let sub = adjoint_substitution(SubstitutionRegime::Linear_particular, &[1.0], &s).unwrap();
        let v = sub.field(&u);
        for (sid, form) in [(SymmetryId::X1, LinearForm::X1), (SymmetryId::X3_lin, LinearForm::X3)] {
            let sym = Symmetry::new(sid, 0.5, 0.0);
            let inputs = VectorInputs::new(s, d).with_substitution(sub);
            let cat = eval(Provenance::Linear { case: LinearCase::Cap_sub, form }, inputs, &u);
            let ct = noether_t(&sym, &u, &v, &s, &d).unwrap();
            let (_, xi1_l) = lagrangian_terms(&sym, &u, &v, &s, &d).unwrap();
            let cx = comb(&[(1.0, &noether_x(&sym, &u, &v, &s, &d).unwrap()), (-1.0, &xi1_l)]).unwrap();
            assert!(ct.max_abs_diff(&cat.ct).unwrap() <= 1e-6, "{sid}");
            assert!(cx.max_abs_diff(&cat.cx).unwrap() <= 1e-6, "{sid}");
        }
    }

    #[test]
    fn flux_balance_sees_injected_mismatch() {
        let (s, u) = stationary(0.5, 64);
        let inputs = VectorInputs::new(s, Diffusivity::Power { beta: 1.0 });
        let mut f = eval(Provenance::Table3(2), inputs, &u);
        let opts = CheckOptions::default();
        let base = flux_report(&f, "x".into(), &s, &u, &opts).unwrap().linf;
        let eps = 1e-3;
        let last = f.cx.space().n_x();
        f.cx = f.cx.unweighted().map_values(|_, k, v| if k == last { v + eps } else { v });
        let r = flux_report(&f, "x".into(), &s, &u, &opts).unwrap();
        assert!(base < 1e-8);
        assert!((r.linf - eps).abs() < 1e-8);
    }

    #[test]
    fn report_csv_and_ratio() {
        let s = spec(FractionalKind::Caputo, 0.5);
        let space = SpaceGrid::new(0.0, PI, 16).unwrap();
        let d = Diffusivity::Constant { k0: 1.0 };
        let mut reports = Vec::new();
        for n in [64, 128] {
            let u = exact_linear_separable(&s, 1.0, TimeGrid::new(1.0, n).unwrap(), space).unwrap();
            let cv = catalog_vector(&Provenance::TrivialCaputo, VectorInputs::new(s, d)).unwrap();
            reports.push(divergence_residual(&cv, &u, &CheckOptions::default()).unwrap());
        }
        let coarse = reports[0].clone();
        assert!(reports[1].record_ratio(&coarse).is_some());
        assert!(reports[0].convergence_ratio.is_none());
        let mut buf = Vec::new();
        write_reports(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "provenance_id,kind,alpha,n_steps,n_x,Linf,L2,excluded_nodes,convergence_ratio"
        );
        assert!(lines.next().unwrap().starts_with("Trivial_Caputo,Caputo,0.5,64,16,"));
    }
}
