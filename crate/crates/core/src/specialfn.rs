//! Special functions used by the fractional kernels and by the closed-form
//! conserved vectors of the Caputo catalog.
//!
//! Everything here is real-argument and double precision. Truncated series
//! are controlled through [`SeriesControl`].

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
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

/// Truncation control for power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            max_terms: 500,
            abs_tol: 1e-14,
            rel_tol: 1e-12,
        }
    }
}

impl SeriesControl {
    pub fn new(max_terms: usize, abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let ctl = SeriesControl {
            max_terms,
            abs_tol,
            rel_tol,
        };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::Parameter("max_terms must be at least 1".into()));
        }
        if !(self.abs_tol >= 0.0 && self.rel_tol >= 0.0) {
            return Err(Error::Parameter("tolerances must be non-negative".into()));
        }
        if self.abs_tol == 0.0 && self.rel_tol == 0.0 {
            return Err(Error::Parameter(
                "at least one of abs_tol, rel_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    fn converged(&self, term: f64, sum: f64) -> bool {
        term.abs() <= self.abs_tol || term.abs() <= self.rel_tol * sum.abs()
    }
}

fn is_nonpositive_integer(z: f64) -> bool {
    z <= 0.0 && z == z.round()
}

/// Lanczos sum for z >= 0.5, returns (series, t) with t = z + g - 0.5.
fn lanczos_sum(z: f64) -> (f64, f64) {
    let x = z - 1.0;
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (a, x + LANCZOS_G + 0.5)
}

/// Γ(z) for real z that is not a non-positive integer.
pub fn gamma(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::Parameter("gamma of NaN".into()));
    }
    if is_nonpositive_integer(z) {
        return Err(Error::GammaPole(z));
    }
    Ok(gamma_unchecked(z))
}

fn gamma_unchecked(z: f64) -> f64 {
    if z < 0.5 {
        // reflection
        return PI / ((PI * z).sin() * gamma_unchecked(1.0 - z));
    }
    if z == z.round() && z <= 23.0 {
        // exact factorials
        let mut p = 1.0;
        let mut k = 2.0;
        while k < z {
            p *= k;
            k += 1.0;
        }
        return p;
    }
    if z > 140.0 {
        return ln_gamma_pos(z).exp();
    }
    let (a, t) = lanczos_sum(z);
    (2.0 * PI).sqrt() * t.powf(z - 0.5) * (-t).exp() * a
}

/// ln Γ(z) for z > 0.
pub fn ln_gamma(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain {
            value: z,
            domain: "(0, inf)",
        });
    }
    Ok(ln_gamma_pos(z))
}

fn ln_gamma_pos(z: f64) -> f64 {
    if z < 0.5 {
        return (PI / (PI * z).sin()).ln() - ln_gamma_pos(1.0 - z);
    }
    let (a, t) = lanczos_sum(z);
    0.5 * (2.0 * PI).ln() + (z - 0.5) * t.ln() - t + a.ln()
}

/// 1/Γ(z), an entire function: zero at the poles of Γ.
pub fn rgamma(z: f64) -> f64 {
    if is_nonpositive_integer(z) {
        return 0.0;
    }
    if z > 170.0 {
        return (-ln_gamma_pos(z)).exp();
    }
    1.0 / gamma_unchecked(z)
}

/// Mittag-Leffler function E_{α,β}(z) = Σ z^k / Γ(αk + β).
pub fn mittag_leffler(alpha: f64, beta: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    ctl.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    let compensated = z.abs() > 5.0;
    let ln_abs = z.abs().ln();
    let mut sum = 0.0;
    let mut carry = 0.0;
    let mut small_run = 0;
    for k in 0..ctl.max_terms {
        let arg = alpha * k as f64 + beta;
        let term = if is_nonpositive_integer(arg) {
            0.0
        } else if arg > 20.0 {
            let sign = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            sign * (k as f64 * ln_abs - ln_gamma_pos(arg)).exp()
        } else {
            z.powi(k as i32) * rgamma(arg)
        };
        if compensated {
            let y = term - carry;
            let t = sum + y;
            carry = (t - sum) - y;
            sum = t;
        } else {
            sum += term;
        }
        // terms eventually decrease monotonically; require two quiet terms
        if k > 0 && ctl.converged(term, sum) {
            small_run += 1;
            if small_run >= 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence {
        what: "mittag_leffler",
        terms: ctl.max_terms,
    })
}

/// Power series of ₂F₁ at z; `max_terms` bounds the work.
fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64, max_terms: usize) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 || term.abs() <= 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        what: "hyp2f1 series",
        terms: max_terms,
    })
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) for 0 <= z < 1.
///
/// Direct series for z <= 0.5, the z -> 1 - z connection formula above that.
/// When c - a - b is (numerically) an integer the connection formula is
/// degenerate and the direct series is summed instead.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::Parameter(format!(
            "c = {c} is a non-positive integer"
        )));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain {
            value: z,
            domain: "[0, 1)",
        });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let terminating = is_nonpositive_integer(a) || is_nonpositive_integer(b);
    if z <= 0.5 || terminating {
        return hyp2f1_series(a, b, c, z, 10_000);
    }
    let d = c - a - b;
    if (d - d.round()).abs() < 1e-9 {
        return hyp2f1_series(a, b, c, z, 2_000_000);
    }
    let w = 1.0 - z;
    let gc = gamma_unchecked(c);
    let first = if is_nonpositive_integer(d) {
        0.0
    } else {
        gc * gamma_unchecked(d) * rgamma(c - a) * rgamma(c - b)
            * hyp2f1_series(a, b, 1.0 - d, w, 10_000)?
    };
    let second = if is_nonpositive_integer(-d) {
        0.0
    } else {
        w.powf(d) * gc * gamma_unchecked(-d) * rgamma(a) * rgamma(b)
            * hyp2f1_series(c - a, c - b, 1.0 + d, w, 10_000)?
    };
    Ok(first + second)
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("T must be positive, got {horizon}")));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain {
            value: t,
            domain: "[0, T]",
        });
    }
    Ok(())
}

/// Kernel Φ(t) of the Caputo subdiffusion catalog, α ∈ (0, 1).
pub fn phi_sub(t: f64, alpha: f64, horizon: f64) -> Result<f64> {
    check_time(t, horizon)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let s = 1.0 - t / horizon;
    if s == 0.0 {
        return Ok(0.0);
    }
    let f = if s < 1.0 {
        hyp2f1(alpha, alpha, alpha + 1.0, s)?
    } else {
        // ₂F₁(a,b;c;1) = Γ(c)Γ(c-a-b)/(Γ(c-a)Γ(c-b)), c-a-b = 1-α > 0
        gamma_unchecked(alpha + 1.0) * gamma_unchecked(1.0 - alpha) * rgamma(1.0) * rgamma(1.0)
    };
    Ok(s.powf(alpha) * f / (alpha * gamma_unchecked(1.0 - alpha)))
}

/// Kernels (Φ(t), Ψ(t)) of the Caputo diffusion-wave catalog, α ∈ (1, 2).
pub fn phi_psi_wave(t: f64, alpha: f64, horizon: f64) -> Result<(f64, f64)> {
    check_time(t, horizon)?;
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::Parameter(format!("alpha must lie in (1,2), got {alpha}")));
    }
    let s = 1.0 - t / horizon;
    if s == 0.0 {
        return Ok((0.0, 0.0));
    }
    let g2 = gamma_unchecked(2.0 - alpha);
    let (f_phi, f_psi) = if s < 1.0 {
        (
            hyp2f1(alpha - 1.0, alpha - 1.0, alpha, s)?,
            hyp2f1(alpha - 1.0, alpha, alpha + 1.0, s)?,
        )
    } else {
        // Gauss summation at z = 1, both with c - a - b = 2 - α > 0
        (
            gamma_unchecked(alpha) * g2 * rgamma(1.0) * rgamma(1.0),
            gamma_unchecked(alpha + 1.0) * g2 * rgamma(2.0) * rgamma(1.0),
        )
    };
    let phi = s.powf(alpha - 1.0) * f_phi / ((alpha - 1.0) * g2);
    let psi = s.powf(alpha) * f_psi / (alpha * g2);
    Ok((phi, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_small_integers_and_half() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn gamma_poles_rejected() {
        for z in [0.0, -1.0, -2.0, -7.0] {
            assert!(matches!(gamma(z), Err(Error::GammaPole(_))));
        }
        assert_eq!(rgamma(-3.0), 0.0);
    }

    #[test]
    fn gamma_reference_values() {
        // high-precision reference values
        let refs = [
            (0.1, 9.513_507_698_668_731_285_8),
            (1.5, 0.886_226_925_452_758_013_65),
            (2.5, 1.329_340_388_179_137_020_5),
            (-0.5, -3.544_907_701_811_032_054_6),
            (10.3, 716_430.689_062_376_4),
        ];
        for (z, v) in refs {
            assert_relative_eq!(gamma(z).unwrap(), v, max_relative = 1e-13);
        }
        // 49! accumulated exactly enough in f64
        let mut fact = 1.0f64;
        for k in 1..50 {
            fact *= k as f64;
        }
        assert_relative_eq!(gamma(50.0).unwrap(), fact, max_relative = 1e-13);
        assert_relative_eq!(gamma(49.7).unwrap() * 49.7, gamma(50.7).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for z in [0.2, 1.0, 3.3, 17.5, 60.0] {
            assert_relative_eq!(ln_gamma(z).unwrap(), gamma(z).unwrap().ln(), max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn mittag_leffler_identities() {
        let ctl = SeriesControl::default();
        assert_relative_eq!(mittag_leffler(1.0, 1.0, 1.0, &ctl).unwrap(), std::f64::consts::E, max_relative = 1e-12);
        let c = mittag_leffler(2.0, 1.0, -(PI / 2.0).powi(2), &ctl).unwrap();
        assert!(c.abs() < 1e-10, "{c}");
        // E_{1/2,1}(1) = e·erfc(-1); frozen from an extended-precision evaluation
        assert_relative_eq!(
            mittag_leffler(0.5, 1.0, 1.0, &ctl).unwrap(),
            5.008_980_080_762_283_5,
            max_relative = 1e-12
        );
        assert_eq!(mittag_leffler(0.7, 1.0, 0.0, &ctl).unwrap(), 1.0);
    }

    #[test]
    fn mittag_leffler_oracle_kahan_series() {
        // independent oracle: compensated direct series with 200 terms
        let ctl = SeriesControl::default();
        for &(a, b, z) in &[(0.5f64, 1.0f64, 1.0f64), (0.5, 0.5, -0.8), (1.5, 1.5, -2.0), (0.8, 1.0, -3.0)] {
            let mut s = 0.0f64;
            let mut c = 0.0f64;
            for k in 0..200 {
                let term = z.powi(k) / gamma(a * k as f64 + b).unwrap_or(f64::INFINITY);
                let y = term - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            assert_relative_eq!(mittag_leffler(a, b, z, &ctl).unwrap(), s, max_relative = 1e-11, epsilon = 1e-13);
        }
    }

    #[test]
    fn mittag_leffler_reports_non_convergence() {
        let ctl = SeriesControl::new(3, 1e-14, 1e-14).unwrap();
        assert!(matches!(
            mittag_leffler(0.5, 1.0, 3.0, &ctl),
            Err(Error::NonConvergence { .. })
        ));
        assert!(SeriesControl::new(10, 0.0, 0.0).is_err());
        assert!(mittag_leffler(0.0, 1.0, 1.0, &ctl).is_err());
    }

    #[test]
    fn hyp2f1_values() {
        assert_eq!(hyp2f1(0.7, 0.7, 1.7, 0.0).unwrap(), 1.0);
        assert_relative_eq!(hyp2f1(1.0, 1.0, 2.0, 0.5).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-12);
        // oracle: 10^4-term series in 40-digit arithmetic
        assert_relative_eq!(
            hyp2f1(0.5, 0.5, 1.5, 0.9).unwrap(),
            1.316_609_847_527_586_0,
            max_relative = 1e-12
        );
        // ₂F₁(1,1;2;z) = -ln(1-z)/z on the transformed branch (degenerate path)
        let z = 0.93;
        assert_relative_eq!(hyp2f1(1.0, 1.0, 2.0, z).unwrap(), -(1.0 - z).ln() / z, max_relative = 1e-10);
        // ₂F₁(1/2,1/2;3/2;z²) = asin(z)/z on the connection-formula branch
        let x: f64 = 0.99;
        assert_relative_eq!(hyp2f1(0.5, 0.5, 1.5, x * x).unwrap(), x.asin() / x, max_relative = 1e-11);
    }

    #[test]
    fn hyp2f1_errors() {
        assert!(hyp2f1(1.0, 1.0, -2.0, 0.3).is_err());
        assert!(hyp2f1(1.0, 1.0, 2.0, 1.0).is_err());
        assert!(hyp2f1(1.0, 1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn phi_kernels() {
        assert_eq!(phi_sub(1.0, 0.5, 1.0).unwrap(), 0.0);
        assert_eq!(phi_psi_wave(2.0, 1.5, 2.0).unwrap(), (0.0, 0.0));
        assert!(phi_sub(1.5, 0.5, 1.0).is_err());
        // extended-precision references
        assert_relative_eq!(phi_sub(0.0, 0.5, 1.0).unwrap(), 1.772_453_850_905_516, max_relative = 1e-10);
        assert_relative_eq!(phi_sub(0.5, 0.5, 1.0).unwrap(), 0.886_226_925_452_758_0, max_relative = 1e-10);
        let (p, s) = phi_psi_wave(0.0, 1.5, 1.0).unwrap();
        assert_relative_eq!(p, 1.772_453_850_905_516, max_relative = 1e-10);
        assert_relative_eq!(s, 0.886_226_925_452_758_0, max_relative = 1e-10);
        let (p, s) = phi_psi_wave(0.25, 1.5, 2.0).unwrap();
        assert_relative_eq!(p, 1.364_694_716_615_964_2, max_relative = 1e-10);
        assert_relative_eq!(s, 0.495_759_192_012_924_4, max_relative = 1e-10);
    }

    #[test]
    fn phi_near_origin_continuous() {
        // connection formula just below s = 1 joins the Gauss-sum value at s = 1
        let a = phi_sub(0.0, 0.3, 1.0).unwrap();
        let b = phi_sub(1e-9, 0.3, 1.0).unwrap();
        assert!((a - b).abs() < 1e-6);
    }
}
