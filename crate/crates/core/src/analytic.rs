//! Exact solutions of the constant-coefficient reaction-diffusion problem
//!
//! ```text
//!   ∂C/∂t = De ∂²C/∂x² − k C,     x ∈ [−L, L], t ≥ 0
//!   C(±L, t) = C0,                 C(x, 0) = 0 for |x| < L
//! ```
//!
//! The closed-form solution is a cosine series over the odd modes
//! `ωₙ = (2n+1)π/2L`:
//!
//! ```text
//!   C(x,t) = C0 − (4 C0/π) Σₙ aₙ cos(ωₙ x) (k Ψₙ (pₙ − 1) + pₙ)
//!   aₙ = (−1)ⁿ/(2n+1),  Ψₙ = −1/(λₙ + k),  λₙ = De ωₙ²,  pₙ = exp(t/Ψₙ)
//! ```
//!
//! The per-mode factor splits as `k/(k+λₙ) + λₙ pₙ/(k+λₙ)`. The first part sums
//! to the hyperbolic-cosine steady profile and converges only algebraically, the
//! second decays exponentially in time. [`Summation::SteadySplit`] sums the first
//! part in closed form and the second term by term; [`Summation::Direct`] sums
//! the full factor literally and is kept as an independent route.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of the year used for every years-to-seconds conversion.
pub const SECONDS_PER_YEAR: f64 = 3.1536e7;

/// Reference points for the temperature dependence of the reaction rate, as
/// reported for sulfate attack: `(kelvin, value)`. The source quotes the values in
/// "mol/m3"; they are kept for documentation only and are not used by any model.
pub const REACTION_RATE_TEMPERATURE_REFERENCE: [(f64, f64); 2] = [(273.0, 25.0), (373.0, 10.0)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("point (x = {x}, t = {t}) lies outside the domain [-{half_thickness}, {half_thickness}] x [0, inf)")]
    OutOfDomain { x: f64, t: f64, half_thickness: f64 },
    #[error("series did not converge after {terms_used} terms (last term bound {tail_bound:e} x c0)")]
    NonConvergence { terms_used: usize, tail_bound: f64 },
    #[error("series value {value} lies outside [0, c0 = {c0}] beyond rounding tolerance")]
    OutOfBounds { value: f64, c0: f64 },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

/// Physical instance of the slab problem (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Effective diffusion coefficient, m²/s.
    pub de: f64,
    /// First-order reaction rate, 1/s.
    pub k: f64,
    /// Boundary concentration, mol/m³.
    pub c0: f64,
    /// Half-width `L` of the slab, m.
    pub half_thickness: f64,
}

impl ProblemSpec {
    pub fn new(de: f64, k: f64, c0: f64, half_thickness: f64) -> Result<Self, SeriesError> {
        let spec = Self {
            de,
            k,
            c0,
            half_thickness,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Sulfate-attack reference case: `c0 = 75.5 mol/m³`, `L = 0.05 m`,
    /// `De = 2.6e-9 m²/s`, `k = 2.125e-7 1/s`.
    pub fn baseline() -> Self {
        Self {
            de: 2.6e-9,
            k: 2.125e-7,
            c0: 75.5,
            half_thickness: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), SeriesError> {
        let bad = |what: &str| Err(SeriesError::InvalidSpec(what.to_string()));
        if !(self.de.is_finite() && self.de > 0.0) {
            return bad("diffusion coefficient must be positive and finite");
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return bad("reaction rate must be non-negative and finite");
        }
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            return bad("boundary concentration must be non-negative and finite");
        }
        if !(self.half_thickness.is_finite() && self.half_thickness > 0.0) {
            return bad("half thickness must be positive and finite");
        }
        Ok(())
    }

    /// Same problem with the reaction switched off.
    pub fn without_reaction(&self) -> Self {
        Self { k: 0.0, ..*self }
    }

    /// Decay rate `λₙ = De ωₙ²` of mode `n` under pure diffusion.
    pub fn mode_rate(&self, n: usize) -> f64 {
        let w = omega(n, self.half_thickness);
        self.de * w * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    /// Position, m.
    pub x: f64,
    /// Time, s.
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }

    pub fn in_years(x: f64, t_years: f64) -> Self {
        Self {
            x,
            t: t_years * SECONDS_PER_YEAR,
        }
    }

    fn check(&self, spec: &ProblemSpec) -> Result<(), SeriesError> {
        let ok = self.x.is_finite()
            && self.t.is_finite()
            && self.t >= 0.0
            && self.x.abs() <= spec.half_thickness;
        if ok {
            Ok(())
        } else {
            Err(SeriesError::OutOfDomain {
                x: self.x,
                t: self.t,
                half_thickness: spec.half_thickness,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Summation {
    /// Steady profile in closed form plus the exponentially decaying transient.
    #[default]
    SteadySplit,
    /// Literal term-by-term sum of the full per-mode factor.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub max_terms: usize,
    /// Early-exit threshold on the running term bound, as a fraction of `c0`.
    pub tail_tol: f64,
    pub summation: Summation,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            max_terms: 500,
            tail_tol: 1e-12,
            summation: Summation::SteadySplit,
        }
    }
}

impl SeriesOptions {
    pub fn with_max_terms(max_terms: usize) -> Self {
        Self {
            max_terms,
            ..Self::default()
        }
    }

    /// Generous term budget used when labelling arbitrary parameter draws.
    pub fn labelling() -> Self {
        Self::with_max_terms(20_000)
    }

    fn check(&self) -> Result<(), SeriesError> {
        if self.max_terms == 0 {
            return Err(SeriesError::InvalidOptions("max_terms must be at least 1".into()));
        }
        if !(self.tail_tol >= 0.0) {
            return Err(SeriesError::InvalidOptions("tail_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Coefficients of mode `n` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermCoefficients {
    pub a_n: f64,
    /// Wavenumber, 1/m.
    pub omega_n: f64,
    /// Time constant, s (always negative).
    pub psi_n: f64,
    /// Decay factor `exp(t/Ψₙ)` in `(0, 1]`.
    pub p: f64,
}

impl TermCoefficients {
    /// The per-mode weight `kΨₙ(p − 1) + p` for reaction rate `k`.
    pub fn factor(&self, k: f64) -> f64 {
        k * self.psi_n * (self.p - 1.0) + self.p
    }
}

fn omega(n: usize, half_thickness: f64) -> f64 {
    (2 * n + 1) as f64 * PI / (2.0 * half_thickness)
}

fn sign_coefficient(n: usize) -> f64 {
    let magnitude = 1.0 / (2 * n + 1) as f64;
    if n % 2 == 0 {
        magnitude
    } else {
        -magnitude
    }
}

pub fn series_terms(spec: &ProblemSpec, n: usize, t: f64) -> TermCoefficients {
    let l = spec.half_thickness;
    let odd = (2 * n + 1) as f64;
    let psi_n = 4.0 * l * l / (-spec.de * odd * odd * PI * PI - 4.0 * spec.k * l * l);
    TermCoefficients {
        a_n: sign_coefficient(n),
        omega_n: omega(n, l),
        psi_n,
        p: (t / psi_n).exp(),
    }
}

/// `cosh(m x)/cosh(m L)` with `m = √(k/De)`, evaluated without overflow.
fn steady_ratio(spec: &ProblemSpec, x: f64) -> f64 {
    if spec.k == 0.0 {
        return 1.0;
    }
    let m = (spec.k / spec.de).sqrt();
    let ax = x.abs();
    let l = spec.half_thickness;
    (m * (ax - l)).exp() * (1.0 + (-2.0 * m * ax).exp()) / (1.0 + (-2.0 * m * l).exp())
}

/// Solution of the reaction-diffusion problem at `pt`.
pub fn reaction_diffusion_series(
    spec: &ProblemSpec,
    pt: SpaceTimePoint,
    opts: &SeriesOptions,
) -> Result<f64, SeriesError> {
    spec.validate()?;
    pt.check(spec)?;
    opts.check()?;
    if pt.x.abs() == spec.half_thickness || spec.c0 == 0.0 {
        return Ok(spec.c0);
    }

    let x = pt.x;
    let t = pt.t;
    let ratio = match opts.summation {
        Summation::SteadySplit => {
            if t == 0.0 {
                // Every pₙ is 1, so the weights are all 1 and the cosine sum is the
                // square wave π/4 on the open interval.
                return Ok(0.0);
            }
            let transient = sum_modes(opts, |n| {
                let lambda = spec.mode_rate(n);
                let p = (-(lambda + spec.k) * t).exp();
                let weight = lambda * p / (spec.k + lambda);
                (sign_coefficient(n) * (omega(n, spec.half_thickness) * x).cos() * weight, weight)
            })?;
            steady_ratio(spec, x) - 4.0 / PI * transient
        }
        Summation::Direct => {
            let total = sum_modes(opts, |n| {
                let term = series_terms(spec, n, t);
                let weight = term.factor(spec.k);
                (term.a_n * (term.omega_n * x).cos() * weight, weight)
            })?;
            1.0 - 4.0 / PI * total
        }
    };
    bounded(spec.c0 * ratio, spec.c0)
}

/// Sums `term(n)` over modes until the magnitude bound `(4/π)|aₙ| weightₙ` falls
/// below the tail tolerance.
fn sum_modes<F>(opts: &SeriesOptions, term: F) -> Result<f64, SeriesError>
where
    F: Fn(usize) -> (f64, f64),
{
    let mut total = 0.0;
    let mut bound = f64::INFINITY;
    for n in 0..opts.max_terms {
        let (value, weight) = term(n);
        total += value;
        bound = 4.0 / PI * sign_coefficient(n).abs() * weight.abs();
        if bound < opts.tail_tol {
            return Ok(total);
        }
    }
    Err(SeriesError::NonConvergence {
        terms_used: opts.max_terms,
        tail_bound: bound,
    })
}

fn bounded(value: f64, c0: f64) -> Result<f64, SeriesError> {
    let slack = 1e-9 * c0;
    if !value.is_finite() || value < -slack || value > c0 + slack {
        return Err(SeriesError::OutOfBounds { value, c0 });
    }
    Ok(value.clamp(0.0, c0))
}

/// Solution with the reaction switched off (`k` of `spec` is ignored):
/// `C1 = C0 [1 − (4/π) Σ aₙ cos(ωₙ x) exp(−λₙ t)]`.
pub fn pure_diffusion_series(
    spec: &ProblemSpec,
    pt: SpaceTimePoint,
    opts: &SeriesOptions,
) -> Result<f64, SeriesError> {
    reaction_diffusion_series(&spec.without_reaction(), pt, opts)
}

/// Recovers the reaction-diffusion solution from the pure-diffusion solution `C1`:
///
/// ```text
///   C(x,t) = k ∫₀ᵗ C1(x,τ) e^(−kτ) dτ + C1(x,t) e^(−kt)
/// ```
///
/// The integral is taken with composite Simpson over `s = √τ`, which resolves the
/// `√τ` boundary layer of `C1` at early times. Odd step counts are rounded up.
pub fn danckwerts_transform(
    spec: &ProblemSpec,
    pt: SpaceTimePoint,
    quad_steps: usize,
    opts: &SeriesOptions,
) -> Result<f64, SeriesError> {
    if quad_steps < 8 {
        return Err(SeriesError::InvalidOptions("quad_steps must be at least 8".into()));
    }
    spec.validate()?;
    pt.check(spec)?;
    let c1_at = |tau: f64| pure_diffusion_series(spec, SpaceTimePoint::new(pt.x, tau), opts);

    let c1_now = c1_at(pt.t)?;
    if spec.k == 0.0 {
        return Ok(c1_now);
    }
    if pt.t == 0.0 {
        return Ok(c1_now);
    }

    let steps = quad_steps + quad_steps % 2;
    let s_end = pt.t.sqrt();
    let h = s_end / steps as f64;
    let integrand = |s: f64| -> Result<f64, SeriesError> {
        let tau = s * s;
        Ok(2.0 * s * c1_at(tau)? * (-spec.k * tau).exp())
    };
    let mut acc = integrand(0.0)? + integrand(s_end)?;
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h)?;
    }
    let integral = acc * h / 3.0;
    Ok(spec.k * integral + c1_now * (-spec.k * pt.t).exp())
}

/// Long-time limit `C0 cosh(√(k/De) x) / cosh(√(k/De) L)`; `C0` when `k = 0`.
///
/// `x` must lie in `[−L, L]`.
pub fn steady_state_profile(spec: &ProblemSpec, x: f64) -> f64 {
    if x.abs() >= spec.half_thickness {
        return spec.c0;
    }
    spec.c0 * steady_ratio(spec, x)
}

/// Well-mixed first-order decay `c_init · exp(−k t)`.
pub fn pure_reaction(c_init: f64, k: f64, t: f64) -> f64 {
    c_init * (-k * t).exp()
}
