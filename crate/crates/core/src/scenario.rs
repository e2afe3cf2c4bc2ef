//! Scenario configuration and the runners behind the `fraccons` binary.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! kind = "Caputo"
//! alpha = 0.5
//! T = 1.0
//! vectors = ["Trivial_Caputo"]
//!
//! [domain]
//! x_lo = 0.0
//! x_hi = 3.141592653589793
//!
//! [diffusivity]
//! family = "constant"
//! k0 = 1.0
//!
//! [solution]
//! source = "exact"
//! id = "linear_separable"
//! lambda = 1.0
//! ```

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conslaw::{
    catalog_vector, correspondence, divergence_report, flux_report, table_symmetries, write_reports, CheckOptions,
    Correspondence, Provenance, ResidualReport, VectorInputs,
};
use crate::error::{Error, Result};
use crate::fracops::{check_alpha, FractionalKind, FractionalSpec, TimeGrid};
use crate::symcat::{adjoint_substitution, list_symmetries, CatalogOptions, SubstitutionRegime};
use crate::tfde::{
    exact_linear_separable, exact_rl_power_mode, exact_stationary_caputo, profile, solve_nonlinear, Diffusivity,
    GridFunction, Profile, SpaceGrid, TFDEProblem,
};

/// Derivative kind as written in a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    RL,
    Caputo,
}

impl From<Kind> for FractionalKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::RL => FractionalKind::RiemannLiouville,
            Kind::Caputo => FractionalKind::Caputo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Space cells; `n_steps / 2` per grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
}

/// A function of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `Σ c_j s^j`
    Polynomial { coeffs: Vec<f64> },
    /// `scale (a + b s)^p`
    Power { scale: f64, a: f64, b: f64, p: f64 },
    /// `amplitude sin(λ s)`
    Sine { amplitude: f64, lambda: f64 },
}

impl ProfileSpec {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ProfileSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            ProfileSpec::Power { scale, a, b, p } => scale * (a + b * s).powf(*p),
            ProfileSpec::Sine { amplitude, lambda } => amplitude * (lambda * s).sin(),
        }
    }

    fn to_profile(&self) -> Profile {
        let me = self.clone();
        profile(move |s| me.eval(s))
    }
}

/// Where the solution field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionSource {
    Exact(ExactSolution),
    Solver {
        initial: ProfileSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_rate: Option<ProfileSpec>,
        left: ProfileSpec,
        right: ProfileSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExactSolution {
    /// Mittag-Leffler mode times `sin λx`; constant diffusivity.
    LinearSeparable { lambda: f64 },
    /// `c t^{α-1}` (Riemann-Liouville only).
    RlPowerMode { c: f64 },
    /// `K⁻¹(a x + b)` (Caputo only).
    StationaryCaputo { a: f64, b: f64 },
}

/// Adjoint substitution fed to the linear closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstitutionSpec {
    pub regime: SubstitutionRegime,
    pub constants: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Fraction of time nodes dropped at each end of the check window.
    pub exclude_frac: f64,
    /// Minimum accepted `L∞` ratio per grid refinement.
    pub threshold: f64,
    /// Reports with `L∞` at or below this pass regardless of their ratio.
    pub abs_tol: f64,
    /// Nodes with t below this are dropped as well.
    pub t_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exclude_frac: 0.05,
            threshold: 1.3,
            abs_tol: 1e-9,
            t_min: 0.0,
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}

fn default_grids() -> Vec<usize> {
    vec![64, 128, 256]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub alpha: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    #[serde(default)]
    pub vectors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub domain: Domain,
    pub diffusivity: Diffusivity,
    pub solution: SolutionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitution: Option<SubstitutionSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

/// Parse and validate a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn spec(&self) -> Result<FractionalSpec> {
        FractionalSpec::new(self.kind.into(), self.alpha, self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha).map_err(|e| invalid("alpha", e))?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("T", "must be positive and finite"));
        }
        if self.grids.is_empty() || self.grids.contains(&0) {
            return Err(invalid("grids", "need at least one positive grid size"));
        }
        if self.grids.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grids", "must be strictly increasing"));
        }
        let d = self.domain;
        if !(d.x_lo < d.x_hi) || !d.x_lo.is_finite() || !d.x_hi.is_finite() {
            return Err(invalid("domain", "need finite x_lo < x_hi"));
        }
        if let Some(n) = d.n_x {
            if n < 2 {
                return Err(invalid("domain.n_x", "need at least 2 cells"));
            }
        }
        self.diffusivity.validate().map_err(|e| invalid("diffusivity", e))?;
        let t = self.tolerances;
        if !(0.0..0.5).contains(&t.exclude_frac) {
            return Err(invalid("tolerances.exclude_frac", "must lie in [0, 0.5)"));
        }
        if !(t.threshold > 0.0) || !(t.abs_tol >= 0.0) || !(t.t_min >= 0.0) {
            return Err(invalid("tolerances", "threshold must be positive, abs_tol and t_min nonnegative"));
        }
        for (i, id) in self.vectors.iter().enumerate() {
            Provenance::from_str(id).map_err(|e| invalid(&format!("vectors[{i}]"), e))?;
        }
        if let Some(sub) = &self.substitution {
            adjoint_substitution(sub.regime, &sub.constants, &self.spec()?).map_err(|e| invalid("substitution", e))?;
        }
        match (&self.solution, self.kind) {
            (SolutionSource::Exact(ExactSolution::RlPowerMode { .. }), Kind::Caputo) => {
                Err(invalid("solution.id", "rl_power_mode needs kind = \"RL\""))
            }
            (SolutionSource::Exact(ExactSolution::StationaryCaputo { .. }), Kind::RL) => {
                Err(invalid("solution.id", "stationary_caputo needs kind = \"Caputo\""))
            }
            (SolutionSource::Exact(ExactSolution::LinearSeparable { lambda }), _) => {
                if !matches!(self.diffusivity, Diffusivity::Constant { k0 } if k0 == 1.0) {
                    return Err(invalid("diffusivity", "linear_separable needs constant k0 = 1"));
                }
                if !(*lambda > 0.0) {
                    return Err(invalid("solution.lambda", "must be positive"));
                }
                Ok(())
            }
            (SolutionSource::Solver { initial_rate, .. }, _) => {
                let wave = self.alpha > 1.0;
                if wave != initial_rate.is_some() {
                    return Err(invalid("solution.initial_rate", "required exactly when alpha > 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            exclude_frac: self.tolerances.exclude_frac,
            t_min: self.tolerances.t_min,
        }
    }

    fn n_x(&self, n_steps: usize) -> usize {
        self.domain.n_x.unwrap_or((n_steps / 2).max(2))
    }

    fn problem(&self) -> Result<Option<TFDEProblem>> {
        let SolutionSource::Solver {
            initial,
            initial_rate,
            left,
            right,
        } = &self.solution
        else {
            return Ok(None);
        };
        let problem = TFDEProblem {
            spec: self.spec()?,
            diffusivity: self.diffusivity,
            x_lo: self.domain.x_lo,
            x_hi: self.domain.x_hi,
            initial: initial.to_profile(),
            initial_rate: initial_rate.as_ref().map(ProfileSpec::to_profile),
            left_boundary: left.to_profile(),
            right_boundary: right.to_profile(),
        };
        problem.validate()?;
        Ok(Some(problem))
    }

    /// The solution field on `n_steps` time steps.
    pub fn solve(&self, n_steps: usize) -> Result<GridFunction> {
        let spec = self.spec()?;
        let time = TimeGrid::new(self.horizon, n_steps)?;
        let space = SpaceGrid::new(self.domain.x_lo, self.domain.x_hi, self.n_x(n_steps))?;
        match &self.solution {
            SolutionSource::Exact(ExactSolution::LinearSeparable { lambda }) => {
                exact_linear_separable(&spec, *lambda, time, space)
            }
            SolutionSource::Exact(ExactSolution::RlPowerMode { c }) => exact_rl_power_mode(&spec, *c, time, space),
            SolutionSource::Exact(ExactSolution::StationaryCaputo { a, b }) => {
                exact_stationary_caputo(&self.diffusivity, *a, *b, time, space)
            }
            SolutionSource::Solver { .. } => {
                let problem = self.problem()?.expect("solver source");
                solve_nonlinear(&problem, time, space.n_x())
            }
        }
    }

    /// Initial value and rate known from the solution source, on `space`.
    fn initial_data(&self, space: &SpaceGrid) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let nodes: Vec<f64> = space.nodes().collect();
        let zeros = || Some(vec![0.0; nodes.len()]);
        match (&self.solution, self.kind) {
            (SolutionSource::Exact(ExactSolution::LinearSeparable { lambda }), Kind::Caputo) => {
                (Some(nodes.iter().map(|x| (lambda * x).sin()).collect()), zeros())
            }
            (SolutionSource::Exact(ExactSolution::StationaryCaputo { .. }), _) => (None, zeros()),
            (
                SolutionSource::Solver {
                    initial, initial_rate, ..
                },
                Kind::Caputo,
            ) => (
                Some(nodes.iter().map(|&x| initial.eval(x)).collect()),
                initial_rate.as_ref().map(|r| nodes.iter().map(|&x| r.eval(x)).collect()),
            ),
            _ => (None, None),
        }
    }

    fn vector_inputs(&self, u: &GridFunction) -> Result<VectorInputs> {
        let mut inputs = VectorInputs::new(self.spec()?, self.diffusivity);
        if let Some(sub) = &self.substitution {
            inputs = inputs.with_substitution(adjoint_substitution(sub.regime, &sub.constants, &self.spec()?)?);
        }
        if let (Some(u0), rate) = self.initial_data(u.space()) {
            inputs = inputs.with_initial(u0, rate);
        } else if let (None, Some(rate)) = self.initial_data(u.space()) {
            inputs = inputs.with_initial(u.materialize().row(0).to_vec(), Some(rate));
        }
        Ok(inputs)
    }

    /// Selected vectors, ordered by id.
    pub fn selected(&self) -> Result<Vec<Provenance>> {
        let mut ids: Vec<Provenance> = self.vectors.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        ids.sort_by_key(|p| p.to_string());
        ids.dedup();
        Ok(ids)
    }
}

/// Outcome of [`run_verify`].
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    /// Divergence and flux-balance rows, ordered by (grid, vector id).
    pub reports: Vec<ResidualReport>,
    /// Ids of reports whose refinement ratio fell below the threshold.
    pub failures: Vec<String>,
}

/// Solve on every grid and check every selected vector.
pub fn run_verify(cfg: &ScenarioConfig) -> Result<VerifyOutcome> {
    let ids = cfg.selected()?;
    if ids.is_empty() {
        return Ok(VerifyOutcome {
            reports: Vec::new(),
            failures: Vec::new(),
        });
    }
    let spec = cfg.spec()?;
    let opts = cfg.check_options();
    let per_grid: Vec<Vec<ResidualReport>> = cfg
        .grids
        .par_iter()
        .map(|&n| -> Result<Vec<ResidualReport>> {
            let u = cfg.solve(n).map_err(|e| match e {
                Error::Solver { step, reason } => Error::Solver {
                    step,
                    reason: format!("grid {n}: {reason}"),
                },
                other => other,
            })?;
            let inputs = cfg.vector_inputs(&u)?;
            let mut out = Vec::with_capacity(2 * ids.len());
            for id in &ids {
                let cv = catalog_vector(id, inputs.clone())?;
                let fields = cv.evaluate(&u)?;
                out.push(divergence_report(&fields, cv.id(), &spec, &u, &opts)?);
                out.push(flux_report(&fields, format!("{}:flux", cv.id()), &spec, &u, &opts)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let tol = cfg.tolerances;
    let mut failures = Vec::new();
    for g in 1..per_grid.len() {
        let (done, rest) = per_grid.split_at(g);
        let coarse = &done[g - 1];
        for (fine, c) in rest[0].iter().zip(coarse) {
            let mut fine = fine.clone();
            let ratio = fine.record_ratio(c);
            let converged = fine.linf <= tol.abs_tol || ratio.is_some_and(|r| r >= tol.threshold);
            if !converged {
                failures.push(format!("{} at n_steps = {}", fine.provenance_id, fine.n_steps));
            }
        }
    }
    let mut reports: Vec<ResidualReport> = Vec::new();
    for (g, rows) in per_grid.iter().enumerate() {
        for (j, row) in rows.iter().enumerate() {
            let mut row = row.clone();
            if g > 0 {
                row.record_ratio(&per_grid[g - 1][j]);
            }
            reports.push(row);
        }
    }
    Ok(VerifyOutcome { reports, failures })
}

/// CSV body for `reports`.
pub fn reports_csv(reports: &[ResidualReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_reports(reports, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Solution CSV on the finest grid.
pub fn run_solve<W: Write>(cfg: &ScenarioConfig, out: W) -> Result<()> {
    let n = *cfg.grids.last().expect("validated grids are nonempty");
    cfg.solve(n)?.write_csv(out)
}

/// Admitted generators, substitutions and the correspondence table for a regime.
pub fn run_catalog(kind: Kind, alpha: f64, diffusivity: &Diffusivity) -> Result<String> {
    check_alpha(alpha)?;
    diffusivity.validate()?;
    let spec = FractionalSpec::new(kind.into(), alpha, 1.0)?;
    let regime = SubstitutionRegime::for_spec(&spec);
    let opts = CatalogOptions { conditional_x4: true };
    let mut s = String::new();
    let fk: FractionalKind = kind.into();
    let _ = writeln!(s, "{} alpha = {alpha}, diffusivity {diffusivity:?}", fk.label());
    let _ = writeln!(s, "symmetries:");
    for sym in list_symmetries(fk, alpha, diffusivity, opts) {
        let note = match sym.id {
            crate::symcat::SymmetryId::Xinf => " (needs a solution h of the equation)",
            crate::symcat::SymmetryId::X4_rl if fk == FractionalKind::Caputo => " (only when u_t(0, x) = 0)",
            _ => "",
        };
        let _ = writeln!(s, "  {}{note}", sym.id);
    }
    let _ = writeln!(s, "substitutions:");
    let _ = writeln!(s, "  {} ({} constants)", regime.as_str(), regime.n_constants());
    if diffusivity.is_linear() {
        let _ = writeln!(s, "  {} (1 constant)", SubstitutionRegime::Linear_particular.as_str());
    }
    let table = table_symmetries(regime);
    if table.is_empty() {
        let _ = writeln!(s, "no correspondence table for {}", regime.as_str());
        return Ok(s);
    }
    let admitted: Vec<_> = list_symmetries(fk, alpha, diffusivity, opts).into_iter().map(|s| s.id).collect();
    let _ = writeln!(s, "correspondence ({}):", regime.as_str());
    for sym in table {
        if !admitted.contains(&sym) && !diffusivity.is_linear() {
            continue;
        }
        let mut cells = Vec::new();
        for c in 1..=regime.n_constants() {
            let cell = match correspondence(sym, c, regime)? {
                Correspondence::Vectors(v) => v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("+"),
                Correspondence::Zero => "0".into(),
                Correspondence::Unlisted => "-".into(),
            };
            cells.push(format!("c{c}: {cell}"));
        }
        let _ = writeln!(s, "  {sym}: {}", cells.join(", "));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "Caputo"
alpha = 0.5
vectors = ["Trivial_Caputo"]

[domain]
x_lo = 0.0
x_hi = 3.141592653589793

[diffusivity]
family = "constant"
k0 = 1.0

[solution]
source = "exact"
id = "linear_separable"
lambda = 1.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.grids, vec![64, 128, 256]);
        assert_eq!(cfg.tolerances.exclude_frac, 0.05);
        assert_eq!(cfg.horizon, 1.0);
    }

    #[test]
    fn alpha_one_is_rejected() {
        let err = parse_config(&MINIMAL.replace("alpha = 0.5", "alpha = 1.0")).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn unknown_vector_id_names_the_key() {
        let err = parse_config(&MINIMAL.replace("Trivial_Caputo", "Table7_v1")).unwrap_err();
        assert!(err.to_string().contains("vectors[0]"), "{err}");
    }

    #[test]
    fn grids_must_increase() {
        let text = MINIMAL.replace("vectors =", "grids = [128, 64]\nvectors =");
        assert!(parse_config(&text).unwrap_err().to_string().contains("grids"));
    }

    #[test]
    fn parse_errors_carry_line_info() {
        let err = parse_config("kind = \"Caputo\"\nalpha = = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn empty_selection_is_an_empty_report() {
        let cfg = parse_config(&MINIMAL.replace("[\"Trivial_Caputo\"]", "[]")).unwrap();
        let out = run_verify(&cfg).unwrap();
        assert!(out.reports.is_empty() && out.failures.is_empty());
    }

    #[test]
    fn profile_shapes() {
        let p = ProfileSpec::Polynomial { coeffs: vec![1.0, 2.0, 3.0] };
        assert_eq!(p.eval(2.0), 17.0);
        let q = ProfileSpec::Power { scale: 2.0, a: 1.0, b: 7.0, p: 1.0 / 3.0 };
        assert!((q.eval(1.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn catalog_listing_for_caputo_power() {
        let s = run_catalog(Kind::Caputo, 0.5, &Diffusivity::Power { beta: 2.0 }).unwrap();
        for want in ["X1", "X2", "X3_pow", "Caputo_sub", "Table3_v1"] {
            assert!(s.contains(want), "{want} missing from\n{s}");
        }
        assert!(!s.contains("X4_pow43"));
    }

    #[test]
    fn catalog_listing_notes_xinf() {
        let s = run_catalog(Kind::RL, 0.5, &Diffusivity::Constant { k0: 1.0 }).unwrap();
        assert!(s.contains("Xinf (needs a solution h"), "{s}");
    }
}
