//! Point symmetries admitted by the TFDE, their characteristics, and the
//! substitutions `v = φ(t, x)` that solve the adjoint equation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{caputo_right_derivative, rl_right_derivative, FractionalKind, FractionalSpec, Weight};
use crate::tfde::{Diffusivity, GridFunction};

const EXPONENT_TOL: f64 = 1e-12;

/// Generator names. `X1` and `X2` are stored with the orientation that gives
/// `W = u_x` and `W = 2t u_t + αx u_x`.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymmetryId {
    X1,
    X2,
    X3_lin,
    Xinf,
    X3_pow,
    X3_exp,
    X4_pow43,
    X4_rl,
}

impl SymmetryId {
    pub const ALL: [SymmetryId; 8] = [
        SymmetryId::X1,
        SymmetryId::X2,
        SymmetryId::X3_lin,
        SymmetryId::Xinf,
        SymmetryId::X3_pow,
        SymmetryId::X3_exp,
        SymmetryId::X4_pow43,
        SymmetryId::X4_rl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SymmetryId::X1 => "X1",
            SymmetryId::X2 => "X2",
            SymmetryId::X3_lin => "X3_lin",
            SymmetryId::Xinf => "Xinf",
            SymmetryId::X3_pow => "X3_pow",
            SymmetryId::X3_exp => "X3_exp",
            SymmetryId::X4_pow43 => "X4_pow43",
            SymmetryId::X4_rl => "X4_rl",
        }
    }
}

impl fmt::Display for SymmetryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SymmetryId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SymmetryId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown symmetry id {s:?}")))
    }
}

/// A point symmetry `ξ⁰ ∂_t + ξ¹ ∂_x + η ∂_u` with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetry {
    pub id: SymmetryId,
    pub alpha: f64,
    /// Exponent of `k = u^β` for `X3_pow`.
    pub beta: f64,
    /// Solution `h` of the linear equation for `Xinf`.
    pub h: Option<GridFunction>,
}

impl Symmetry {
    pub fn new(id: SymmetryId, alpha: f64, beta: f64) -> Self {
        Symmetry {
            id,
            alpha,
            beta,
            h: None,
        }
    }

    pub fn with_h(alpha: f64, h: GridFunction) -> Self {
        Symmetry {
            id: SymmetryId::Xinf,
            alpha,
            beta: 0.0,
            h: Some(h),
        }
    }

    pub fn xi0(&self, t: f64, _x: f64, _u: f64) -> f64 {
        match self.id {
            SymmetryId::X2 => -2.0 * t,
            SymmetryId::X4_rl => t * t,
            _ => 0.0,
        }
    }

    pub fn xi1(&self, _t: f64, x: f64, _u: f64) -> f64 {
        match self.id {
            SymmetryId::X1 => -1.0,
            SymmetryId::X2 => -self.alpha * x,
            SymmetryId::X3_pow => self.beta * x,
            SymmetryId::X3_exp => x,
            SymmetryId::X4_pow43 => x * x,
            _ => 0.0,
        }
    }

    /// η; for `Xinf` pass the value of h at the point.
    pub fn eta(&self, t: f64, x: f64, u: f64, h: f64) -> f64 {
        match self.id {
            SymmetryId::X3_lin => u,
            SymmetryId::Xinf => h,
            SymmetryId::X3_pow => 2.0 * u,
            SymmetryId::X3_exp => 2.0,
            SymmetryId::X4_pow43 => -3.0 * x * u,
            SymmetryId::X4_rl => (self.alpha - 1.0) * t * u,
            _ => 0.0,
        }
    }

    /// True when `ξ⁰` vanishes identically.
    pub fn is_time_free(&self) -> bool {
        !matches!(self.id, SymmetryId::X2 | SymmetryId::X4_rl)
    }

    /// True when `ξ¹` vanishes identically.
    pub fn is_space_free(&self) -> bool {
        matches!(self.id, SymmetryId::X3_lin | SymmetryId::Xinf | SymmetryId::X4_rl)
    }
}

/// Options for [`list_symmetries`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CatalogOptions {
    /// Include `X4_rl` for Caputo diffusion-wave problems with `u_t(0,x) = 0`.
    pub conditional_x4: bool,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXPONENT_TOL * (1.0 + b.abs())
}

/// Exponent β for which `X4_rl` is admitted: `-2α/(α-1)`.
pub fn x4_rl_beta(alpha: f64) -> f64 {
    -2.0 * alpha / (alpha - 1.0)
}

/// Generators admitted for the given derivative kind, order and diffusivity.
pub fn list_symmetries(
    kind: FractionalKind,
    alpha: f64,
    diffusivity: &Diffusivity,
    opts: CatalogOptions,
) -> Vec<Symmetry> {
    let mut out = vec![Symmetry::new(SymmetryId::X1, alpha, 0.0), Symmetry::new(SymmetryId::X2, alpha, 0.0)];
    match *diffusivity {
        Diffusivity::Constant { .. } => {
            out.push(Symmetry::new(SymmetryId::X3_lin, alpha, 0.0));
            out.push(Symmetry::new(SymmetryId::Xinf, alpha, 0.0));
        }
        Diffusivity::Power { beta } => {
            out.push(Symmetry::new(SymmetryId::X3_pow, alpha, beta));
            if close(beta, -4.0 / 3.0) {
                out.push(Symmetry::new(SymmetryId::X4_pow43, alpha, beta));
            }
            if close(beta, x4_rl_beta(alpha)) {
                let conditional = kind == FractionalKind::Caputo && alpha > 1.0 && opts.conditional_x4;
                if kind == FractionalKind::RiemannLiouville || conditional {
                    out.push(Symmetry::new(SymmetryId::X4_rl, alpha, beta));
                }
            }
        }
        Diffusivity::Exponential => {
            if kind == FractionalKind::Caputo {
                out.push(Symmetry::new(SymmetryId::X3_exp, alpha, 0.0));
            }
        }
    }
    out
}

/// Look up one admitted generator by id.
pub fn find_symmetry(
    id: SymmetryId,
    kind: FractionalKind,
    alpha: f64,
    diffusivity: &Diffusivity,
    opts: CatalogOptions,
) -> Result<Symmetry> {
    list_symmetries(kind, alpha, diffusivity, opts)
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| {
            Error::Parameter(format!(
                "{id} is not admitted for {} α={alpha} with {diffusivity:?}",
                kind.label()
            ))
        })
}

/// `W = η - ξ⁰ u_t - ξ¹ u_x` on the grid, carried in the weight of `u`
/// (one power of t higher for `X4_rl`).
pub fn characteristic(sym: &Symmetry, u: &GridFunction) -> Result<GridFunction> {
    let alpha = sym.alpha;
    let ux = u.space_derivative(1);
    // t·u_t carries the weight of u
    let t_ut = || -> Result<GridFunction> {
        if u.weight().right != 0.0 {
            return Err(Error::SingularData("u_t of a field weighted at t = T".into()));
        }
        let d = u.time_derivative();
        Ok(if u.weight().left != 0.0 {
            // (t^{p-1} v)·t = t^p v
            GridFunction::linear_combination(&[(1.0, &d)])?.with_left_shift(1.0)
        } else {
            d.mul_fn(|t, _| t)
        })
    };
    let w = match sym.id {
        SymmetryId::X1 => ux,
        SymmetryId::X2 => GridFunction::linear_combination(&[(2.0, &t_ut()?), (alpha, &ux.mul_fn(|_, x| x))])?,
        SymmetryId::X3_lin => u.clone(),
        SymmetryId::Xinf => {
            let h = sym
                .h
                .as_ref()
                .ok_or_else(|| Error::Parameter("Xinf needs a solution h of the linear equation".into()))?;
            u.check_same_grid(h)?;
            h.clone()
        }
        SymmetryId::X3_pow => GridFunction::linear_combination(&[(2.0, u), (-sym.beta, &ux.mul_fn(|_, x| x))])?,
        SymmetryId::X3_exp => {
            let two = GridFunction::from_fn(*u.time(), *u.space(), |_, _| 2.0);
            GridFunction::linear_combination(&[(1.0, &two), (-1.0, &ux.mul_fn(|_, x| x))])?
        }
        SymmetryId::X4_pow43 => GridFunction::linear_combination(&[
            (-3.0, &u.mul_fn(|_, x| x)),
            (-1.0, &ux.mul_fn(|_, x| x * x)),
        ])?,
        SymmetryId::X4_rl => {
            // (α-1) t u - t² u_t = t [(α-1) u - t u_t]
            let inner = GridFunction::linear_combination(&[(alpha - 1.0, u), (-1.0, &t_ut()?)])?;
            inner.with_left_shift(1.0)
        }
    };
    Ok(w)
}

/// Substitution families solving the adjoint equation.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubstitutionRegime {
    RL_sub,
    RL_wave,
    Caputo_sub,
    Caputo_wave,
    Linear_particular,
}

impl SubstitutionRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubstitutionRegime::RL_sub => "RL_sub",
            SubstitutionRegime::RL_wave => "RL_wave",
            SubstitutionRegime::Caputo_sub => "Caputo_sub",
            SubstitutionRegime::Caputo_wave => "Caputo_wave",
            SubstitutionRegime::Linear_particular => "Linear_particular",
        }
    }

    /// Number of free constants.
    pub fn n_constants(&self) -> usize {
        match self {
            SubstitutionRegime::RL_sub | SubstitutionRegime::Caputo_sub => 2,
            SubstitutionRegime::RL_wave | SubstitutionRegime::Caputo_wave => 4,
            SubstitutionRegime::Linear_particular => 1,
        }
    }

    /// Regime of the nonlinear substitution matching a derivative spec.
    pub fn for_spec(spec: &FractionalSpec) -> Self {
        match (spec.kind, spec.is_wave()) {
            (FractionalKind::RiemannLiouville, false) => SubstitutionRegime::RL_sub,
            (FractionalKind::RiemannLiouville, true) => SubstitutionRegime::RL_wave,
            (FractionalKind::Caputo, false) => SubstitutionRegime::Caputo_sub,
            (FractionalKind::Caputo, true) => SubstitutionRegime::Caputo_wave,
        }
    }
}

impl FromStr for SubstitutionRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            SubstitutionRegime::RL_sub,
            SubstitutionRegime::RL_wave,
            SubstitutionRegime::Caputo_sub,
            SubstitutionRegime::Caputo_wave,
            SubstitutionRegime::Linear_particular,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| Error::Parameter(format!("unknown substitution regime {s:?}")))
    }
}

/// `v = φ(t, x)` with constants `c1..c4` (unused ones are zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointSubstitution {
    pub regime: SubstitutionRegime,
    pub spec: FractionalSpec,
    pub c: [f64; 4],
}

/// Build a substitution, checking the regime against the derivative spec.
pub fn adjoint_substitution(
    regime: SubstitutionRegime,
    constants: &[f64],
    spec: &FractionalSpec,
) -> Result<AdjointSubstitution> {
    let want = regime.n_constants();
    if constants.len() > 4 || constants.iter().skip(want).any(|c| *c != 0.0) {
        return Err(Error::Parameter(format!(
            "{} takes {want} constant(s), got {constants:?}",
            regime.as_str()
        )));
    }
    if regime != SubstitutionRegime::Linear_particular && regime != SubstitutionRegime::for_spec(spec) {
        return Err(Error::Parameter(format!(
            "substitution {} does not match {} with α = {}",
            regime.as_str(),
            spec.kind.label(),
            spec.alpha
        )));
    }
    if constants.iter().any(|c| !c.is_finite()) {
        return Err(Error::Parameter("substitution constants must be finite".into()));
    }
    if constants.iter().all(|c| *c == 0.0) {
        return Err(Error::ZeroSubstitution);
    }
    let mut c = [0.0; 4];
    c[..constants.len()].copy_from_slice(constants);
    Ok(AdjointSubstitution { regime, spec: *spec, c })
}

impl AdjointSubstitution {
    /// Weight factor of `v`.
    pub fn weight(&self) -> Weight {
        let a = self.spec.alpha;
        match self.regime {
            SubstitutionRegime::Caputo_sub => Weight::new(0.0, a - 1.0),
            SubstitutionRegime::Caputo_wave => Weight::new(0.0, a - 2.0),
            SubstitutionRegime::Linear_particular if self.spec.kind == FractionalKind::RiemannLiouville => {
                Weight::new(a - 1.0, 0.0)
            }
            _ => Weight::NONE,
        }
    }

    /// Regular part of `v` (the factor multiplying [`Self::weight`]).
    pub fn regular(&self, t: f64, x: f64) -> f64 {
        let [c1, c2, c3, c4] = self.c;
        let horizon = self.spec.horizon;
        match self.regime {
            SubstitutionRegime::RL_sub | SubstitutionRegime::Caputo_sub => c1 + c2 * x,
            SubstitutionRegime::RL_wave => c1 + c2 * x + (c3 + c4 * x) * t,
            SubstitutionRegime::Caputo_wave => c1 + c3 * x + (horizon - t) * (c2 + c4 * x),
            SubstitutionRegime::Linear_particular => match self.spec.kind {
                FractionalKind::RiemannLiouville => c1 * x,
                FractionalKind::Caputo => c1 * t * x,
            },
        }
    }

    /// `v(t, x)`; infinite where the weight blows up.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let w = self.weight();
        let mut f = self.regular(t, x);
        if w.left != 0.0 {
            f *= t.powf(w.left);
        }
        if w.right != 0.0 {
            f *= (self.spec.horizon - t).powf(w.right);
        }
        f
    }

    /// `v` on the grid of `like`.
    pub fn field(&self, like: &GridFunction) -> GridFunction {
        let (time, space) = (*like.time(), *like.space());
        GridFunction::from_fn(time, space, |t, x| self.regular(t, x)).with_weight(self.weight())
    }
}

/// Residual of the adjoint equation `(𝒟^α_t)* v - k(u) v_xx`.
///
/// The adjoint of the left Riemann-Liouville derivative is the right Caputo
/// derivative and vice versa.
pub fn adjoint_residual(
    v: &GridFunction,
    u: &GridFunction,
    diffusivity: &Diffusivity,
    spec: &FractionalSpec,
) -> Result<GridFunction> {
    v.check_same_grid(u)?;
    let alpha = spec.alpha;
    let dv = match spec.kind {
        FractionalKind::RiemannLiouville => v.map_columns(|c| caputo_right_derivative(c, alpha))?,
        FractionalKind::Caputo => v.map_columns(|c| rl_right_derivative(c, alpha))?,
    };
    let vxx = v.space_derivative(2);
    let k = u.materialize().mapv(|u| diffusivity.k(u));
    let kvxx = if vxx.is_zero() {
        GridFunction::zeros(*v.time(), *v.space())
    } else {
        GridFunction::new(*v.time(), *v.space(), vxx.materialize() * &k)
            .unwrap_or_else(|_| vxx.unweighted().map_values(|i, kk, x| x * k[(i, kk)]))
    };
    GridFunction::linear_combination(&[(1.0, &dv), (-1.0, &kvxx)])
}
