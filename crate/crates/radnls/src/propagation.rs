//! Propagation observables: expectation series, γ-limits, propagation
//! estimate integrals and the exterior, dilation, smoothing and virial
//! diagnostics built on them.
//!
//! Observables are compositions `X = X₁X₂⋯X_k` of the factors below; the
//! expectation reported is that of `½(X + X*)`, i.e. `Re(Xφ, φ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoffs_weights::{morawetz_field, ArgMap};
use crate::dynamics::{eval_nonlinearity, Trajectory};
use crate::fit::{linear_fit, loglog_fit, tail_quartile, LineFit};
use crate::op_functions::{
    func_of_dilation, func_of_gamma_spectral, gamma_multiplier, mellin_forward, standard_flow,
    tanh_projection_multiplier, Direction, FlowMap, FlowSpectralOptions, LogGridSpec,
    SpectralMultiplierA, TanhProjection,
};
use crate::operators::{apply_dilation, apply_gamma, apply_laplacian};
use crate::quad::{cumulative_trapezoid, interp_linear, trapezoid};
use crate::radial_grid::{expectation_of, inner, norm, standard_weight, NormKind, RadialField};
use crate::{Complex64, Cutoff, Error, Result, VectorFieldKind};

const FOUR_PI: f64 = 4.0 * PI;

/// Desk-scale stand-ins for the large constants `M ≥ 100`, `t₀ = 100`.
pub const DESK_M: f64 = 20.0;
pub const DESK_T0: f64 = 10.0;

/// `t^e (ln t)^l`.
fn time_scale(t: f64, e: f64, l: f64) -> f64 {
    let mut s = t.powf(e);
    if l != 0.0 {
        s *= t.ln().powf(l);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// `F(⟨x⟩ / (t^α (ln t)^log))`.
    Space {
        cutoff: Cutoff,
        alpha: f64,
        #[serde(default)]
        log: f64,
    },
    /// `√(F F′)` of the same argument, taken pointwise.
    SpaceRootDerivative {
        cutoff: Cutoff,
        alpha: f64,
        #[serde(default)]
        log: f64,
    },
    /// `F′` of the same argument.
    SpaceDerivative { cutoff: Cutoff, alpha: f64 },
    /// `F(γ t^β (ln t)^log)`.
    GammaCutoff {
        cutoff: Cutoff,
        beta: f64,
        #[serde(default)]
        log: f64,
    },
    /// `F(A / t^ε)`.
    DilationCutoff { cutoff: Cutoff, eps: f64 },
    Tanh(TanhProjection),
    /// `⟨x⟩^power`.
    Weight { power: f64 },
    Gamma,
    Dilation,
    /// `|p|^power`.
    Momentum { power: f64 },
    /// `F(|p| t^β)`.
    MomentumCutoff { cutoff: Cutoff, beta: f64 },
}

impl Factor {
    fn needs_time(&self) -> bool {
        match self {
            Factor::Space { alpha, log, .. } | Factor::SpaceRootDerivative { alpha, log, .. } => {
                *alpha != 0.0 || *log != 0.0
            }
            Factor::SpaceDerivative { alpha, .. } => *alpha != 0.0,
            Factor::GammaCutoff { beta, log, .. } => *beta != 0.0 || *log != 0.0,
            Factor::DilationCutoff { eps, .. } => *eps != 0.0,
            Factor::MomentumCutoff { beta, .. } => *beta != 0.0,
            _ => false,
        }
    }

    pub fn apply(&self, f: &RadialField, t: f64) -> Result<RadialField> {
        if self.needs_time() && !(t > 0.0) {
            return Err(Error::invalid(format!("time-scaled factor needs t > 0, got t={t}")));
        }
        let w = standard_weight();
        Ok(match self {
            Factor::Space { cutoff, alpha, log } => {
                let s = time_scale(t, *alpha, *log);
                f.mul_profile(|r| cutoff.value(w.bracket(r) / s))
            }
            Factor::SpaceRootDerivative { cutoff, alpha, log } => {
                let s = time_scale(t, *alpha, *log);
                f.mul_profile(|r| root_derivative(cutoff, w.bracket(r) / s))
            }
            Factor::SpaceDerivative { cutoff, alpha } => {
                let s = t.powf(*alpha);
                f.mul_profile(|r| cutoff.d1(w.bracket(r) / s))
            }
            Factor::GammaCutoff { cutoff, beta, log } => {
                let tau = 1.0 / time_scale(t, *beta, *log);
                func_of_gamma_spectral(&standard_flow(), cutoff, tau, f)?
            }
            Factor::DilationCutoff { cutoff, eps } => {
                let s = t.powf(*eps);
                let m = SpectralMultiplierA::from_real(LogGridSpec::for_grid(&f.grid), |l| {
                    cutoff.value(l / s)
                });
                func_of_dilation(&m, f)?
            }
            Factor::Tanh(p) => {
                func_of_dilation(&tanh_projection_multiplier(p, LogGridSpec::for_grid(&f.grid)), f)?
            }
            Factor::Weight { power } => f.mul_profile(|r| w.bracket(r).powf(*power)),
            Factor::Gamma => apply_gamma(w, f),
            Factor::Dilation => apply_dilation(f),
            Factor::Momentum { power } => f.apply_real_multiplier(|k| k.powf(*power)),
            Factor::MomentumCutoff { cutoff, beta } => {
                let s = t.powf(*beta);
                f.apply_real_multiplier(|k| cutoff.value(k * s))
            }
        })
    }
}

fn root_derivative(c: &Cutoff, l: f64) -> f64 {
    let [v, d, _] = c.eval(l);
    (v * d).max(0.0).sqrt()
}

/// A labelled composition of factors, applied right to left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub label: String,
    pub factors: Vec<Factor>,
}

impl ObservableSpec {
    pub fn new(label: impl Into<String>, factors: Vec<Factor>) -> Self {
        Self {
            label: label.into(),
            factors,
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", Vec::new())
    }

    /// `F(⟨x⟩/t^α ≥ 1) γ F(⟨x⟩/t^α ≥ 1)`.
    pub fn gamma_sandwich(alpha: f64, cutoff: Cutoff) -> Self {
        let s = Factor::Space {
            cutoff,
            alpha,
            log: 0.0,
        };
        Self::new("FγF", vec![s.clone(), Factor::Gamma, s])
    }

    pub fn apply(&self, f: &RadialField, t: f64) -> Result<RadialField> {
        let mut g = f.clone();
        for fac in self.factors.iter().rev() {
            g = fac.apply(&g, t)?;
        }
        Ok(g)
    }
}

/// `(½(X + X*)f, f)` at time `t`.
pub fn expectation(obs: &ObservableSpec, f: &RadialField, t: f64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    Ok(expectation_of(&obs.apply(f, t)?, f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Running integral of `w(t)·value` when a weight was requested.
    pub running_integral: Option<Vec<f64>>,
}

/// Time weight applied before integrating a series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeWeight {
    One,
    Power { alpha: f64 },
    Inverse,
}

impl TimeWeight {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeWeight::One => 1.0,
            TimeWeight::Power { alpha } => t.powf(-alpha),
            TimeWeight::Inverse => 1.0 / t,
        }
    }
}

/// `⟨obs⟩_t` at every snapshot with `t ≥ t_from`, evaluated in parallel.
pub fn expectation_series(run: &Trajectory, obs: &ObservableSpec, t_from: f64) -> Result<ObservableSeries> {
    let snaps: Vec<&RadialField> = run.snapshots.iter().filter(|s| s.time_tag >= t_from).collect();
    let values = snaps
        .par_iter()
        .map(|s| expectation(obs, s, s.time_tag))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ObservableSeries {
        label: obs.label.clone(),
        times: snaps.iter().map(|s| s.time_tag).collect(),
        values,
        running_integral: None,
    })
}

impl ObservableSeries {
    pub fn with_running_integral(mut self, w: TimeWeight) -> Self {
        let y: Vec<f64> = self
            .times
            .iter()
            .zip(&self.values)
            .map(|(t, v)| w.value(*t) * v)
            .collect();
        self.running_integral = Some(cumulative_trapezoid(&self.times, &y));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Fitted power of `|⟨A⟩_t − Γ̂|` before the tail window.
    pub decay_rate: Option<f64>,
    /// `max − min` over the last quartile.
    pub tail_oscillation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaLimit {
    pub series: ObservableSeries,
    pub gamma_hat: f64,
    pub convergence: ConvergenceReport,
    /// `Γ̂ ≥ −(tail oscillation)`.
    pub non_negative: bool,
}

pub(crate) fn check_alpha_third(alpha: f64, what: &str) -> Result<()> {
    if !(alpha > 1.0 / 3.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "{what}: α={alpha} outside (1/3, 1) required by the γ-limit theorem"
        )));
    }
    Ok(())
}

/// Tail estimate of `lim ⟨FγF⟩_t`, `F = F(⟨x⟩/t^α ≥ 1)`.
pub fn gamma_limit_estimate(run: &Trajectory, alpha: f64, cutoff: Cutoff) -> Result<GammaLimit> {
    check_alpha_third(alpha, "γ-limit")?;
    let t_max = run.t_max();
    if !(t_max.powf(alpha) > 4.0) {
        return Err(Error::invalid(format!(
            "run too short: t_max^α = {:.3} must exceed 4",
            t_max.powf(alpha)
        )));
    }
    let obs = ObservableSpec::gamma_sandwich(alpha, cutoff);
    let series = expectation_series(run, &obs, f64::MIN_POSITIVE)?;
    let (gamma_hat, osc) = tail_quartile(&series.values);
    let start = (3 * series.values.len()) / 4;
    let dev: Vec<f64> = series.values[..start].iter().map(|v| v - gamma_hat).collect();
    let decay_rate = loglog_fit(&series.times[..start], &dev).map(|f| f.slope);
    Ok(GammaLimit {
        non_negative: gamma_hat >= -osc,
        series,
        gamma_hat,
        convergence: ConvergenceReport {
            decay_rate,
            tail_oscillation: osc,
        },
    })
}

/// Propagation-estimate presets with their parameter gates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset")]
pub enum Preset {
    #[serde(rename = "PE")]
    Pe { alpha: f64 },
    #[serde(rename = "PE-2")]
    Pe2 { alpha: f64, delta: f64 },
    #[serde(rename = "PE-3")]
    Pe3 { alpha: f64, delta: f64 },
    #[serde(rename = "PE-4V2")]
    Pe4v2 { alpha: f64, beta: f64, c0: f64 },
    #[serde(rename = "PE-5")]
    Pe5 { alpha: f64, c1: f64 },
    #[serde(rename = "PE-boundary")]
    PeBoundary { alpha: f64 },
    #[serde(rename = "Bab")]
    Bab { a: f64, b: f64, c: f64 },
    #[serde(rename = "PE-r2")]
    PeR2 { alpha: f64, beta: f64, m: f64 },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Pe { .. } => "PE",
            Preset::Pe2 { .. } => "PE-2",
            Preset::Pe3 { .. } => "PE-3",
            Preset::Pe4v2 { .. } => "PE-4V2",
            Preset::Pe5 { .. } => "PE-5",
            Preset::PeBoundary { .. } => "PE-boundary",
            Preset::Bab { .. } => "Bab",
            Preset::PeR2 { .. } => "PE-r2",
        }
    }

    /// Which case of the PE-4V2 gate the parameters satisfy, the most
    /// specific first.
    pub fn pe4_case(alpha: f64, beta: f64, c0: f64) -> Option<u8> {
        if !(c0 > 0.0) {
            return None;
        }
        if alpha > 0.5 && (alpha + beta - 1.0).abs() < 1e-12 && c0 > 0.5 * alpha {
            Some(3)
        } else if alpha > 0.5 && alpha < 1.0 && alpha + beta < 1.0 {
            Some(1)
        } else if alpha > 1.0 / 3.0 && alpha < 1.0 && beta > 0.0 && beta < alpha {
            Some(2)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(format!("{}: {m}", self.name())));
        match *self {
            Preset::Pe { alpha } => check_alpha_third(alpha, "PE"),
            Preset::Pe2 { alpha, delta } | Preset::Pe3 { alpha, delta } => {
                check_alpha_third(alpha, self.name())?;
                if !(delta > 0.0) {
                    return fail(format!("δ={delta} must be positive"));
                }
                Ok(())
            }
            Preset::Pe4v2 { alpha, beta, c0 } => match Self::pe4_case(alpha, beta, c0) {
                Some(_) => Ok(()),
                None => fail(format!(
                    "(α, β, c₀) = ({alpha}, {beta}, {c0}) matches none of case 1 \
                     (α ∈ (1/2,1), α+β < 1), case 2 (α ∈ (1/3,1), β ∈ (0,α)), \
                     case 3 (α > 1/2, α+β = 1, c₀ > α/2)"
                )),
            },
            Preset::Pe5 { alpha, c1 } => {
                if !(alpha > 0.5 && alpha < 1.0) {
                    return fail(format!("α={alpha} must lie in (1/2, 1) with β = 1 − α"));
                }
                if !(c1 > 0.0 && c1 < 0.25 * alpha) {
                    return fail(format!("c₁={c1} must lie in (0, α/4)"));
                }
                Ok(())
            }
            Preset::PeBoundary { alpha } => {
                if !(alpha > 0.5 && alpha < 1.0) {
                    return fail(format!("α={alpha} must lie in (1/2, 1) with β = 1 − α"));
                }
                Ok(())
            }
            Preset::Bab { a, b, c } => {
                let mut v = Vec::new();
                if !(3.0 * a - b > 1.0) {
                    v.push(format!("3a − b = {} must exceed 1", 3.0 * a - b));
                }
                if !(2.0 * a - 2.0 * b > 1.0) {
                    v.push(format!("2a − 2b = {} must exceed 1", 2.0 * a - 2.0 * b));
                }
                let s = a + b;
                let ok = (s < 0.0 && c > 0.0) || (s.abs() < 1e-12 && c > 0.25);
                if !ok {
                    v.push(format!("need a+b < 0 with c > 0, or a+b = 0 with c > 1/4 (a+b={s}, c={c})"));
                }
                if v.is_empty() {
                    Ok(())
                } else {
                    fail(v.join("; "))
                }
            }
            Preset::PeR2 { alpha, beta, m } => {
                if !(alpha > 0.5 && alpha < 1.0) {
                    return fail(format!("α={alpha} must lie in (1/2, 1)"));
                }
                if !(beta > 0.0 && beta <= 1.0 - alpha + 1e-12) {
                    return fail(format!("β={beta} must lie in (0, 1 − α]"));
                }
                if !(m >= 1.0) {
                    return fail(format!("M={m} must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Number of scaling terms `J₀`: the least `J` with `(3/4)^J < α/8`.
    pub fn boundary_terms(alpha: f64) -> u32 {
        let mut j = 0;
        while 0.75f64.powi(j as i32) >= alpha / 8.0 {
            j += 1;
        }
        j
    }

    fn terms(&self) -> Vec<Term> {
        let f1 = Cutoff::rising(1.0);
        match *self {
            Preset::Pe { alpha } => vec![Term::new(
                "t^-α <√(FF')γ²√(FF')>",
                Coef::Power(alpha),
                Space::root(f1, alpha),
                GammaFn::Poly { power: 2, abs: false },
            )],
            Preset::Pe2 { alpha, delta } => {
                let f2 = Cutoff::rising(delta);
                vec![
                    Term::new(
                        "t^-α <√(F1F1')γF2√(F1F1')>",
                        Coef::Power(alpha),
                        Space::root(f1, alpha),
                        GammaFn::cut(f2, 0.0).times_gamma(),
                    ),
                    Term::new(
                        "t^-1 <√(F1F1')F2√(F1F1')>",
                        Coef::Inverse,
                        Space::root(f1, alpha),
                        GammaFn::cut(f2, 0.0),
                    ),
                ]
            }
            Preset::Pe3 { alpha, delta } => {
                let f3 = Cutoff::rising(delta).with_arg(ArgMap::Negate);
                vec![
                    Term::new(
                        "t^-α |<F1γF3F1>|",
                        Coef::Power(alpha),
                        Space::value(f1, alpha),
                        GammaFn::cut(f3, 0.0).times_gamma(),
                    )
                    .absolute(),
                    Term::new("t^-α <F1F3F1>", Coef::Power(alpha), Space::value(f1, alpha), GammaFn::cut(f3, 0.0)),
                ]
            }
            Preset::Pe4v2 { alpha, beta, c0 } => {
                let f4 = Cutoff::rising(c0);
                vec![
                    Term::new(
                        "t^-α <√(F1F1')γF4√(F1F1')>",
                        Coef::Power(alpha),
                        Space::root(f1, alpha),
                        GammaFn::cut(f4, beta).times_gamma(),
                    ),
                    Term::new(
                        "t^-1 <F1F4'F1>",
                        Coef::Inverse,
                        Space::value(f1, alpha),
                        GammaFn::cut(f4, beta).derivative(),
                    ),
                ]
            }
            Preset::Pe5 { alpha, c1 } => {
                let beta = 1.0 - alpha;
                let f5 = Cutoff::falling(c1);
                let f51 = Cutoff::rising(c1).with_arg(ArgMap::Negate);
                vec![
                    Term::new(
                        "t^-α |<√(F1F1')γF51√(F1F1')>|",
                        Coef::Power(alpha),
                        Space::root(f1, alpha),
                        GammaFn::cut(f51, beta).times_gamma(),
                    )
                    .absolute(),
                    Term::new(
                        "t^-1 <√(F1F1')F5√(F1F1')>",
                        Coef::Inverse,
                        Space::root(f1, alpha),
                        GammaFn::cut(f5, beta),
                    ),
                    Term::new(
                        "t^-1 |<F1F5'γt^βF1>|",
                        Coef::Inverse,
                        Space::value(f1, alpha),
                        GammaFn::cut(f5, beta).derivative().times_scaled_gamma(),
                    )
                    .absolute(),
                ]
            }
            Preset::PeBoundary { alpha } => {
                let beta = 1.0 - alpha;
                let win = Cutoff::window(0.25 * alpha, 1.0).expect("α < 1 keeps the window ordered");
                vec![
                    Term::new(
                        "t^-1 <F~1 F2(γt^β) F~1>",
                        Coef::Inverse,
                        Space::value(win, alpha),
                        GammaFn::cut(Cutoff::rising(1.0), beta),
                    ),
                    Term::new(
                        "t^-1 <F1 F~2(γt^β) F1>",
                        Coef::Inverse,
                        Space::value(f1, alpha),
                        GammaFn::cut(win, beta),
                    ),
                ]
            }
            Preset::Bab { a, b, c } => {
                let f2 = Cutoff::rising(c);
                let g = GammaFn::cut(f2, 0.5).with_log(b);
                let tilde = g.clone().derivative().times_scaled_gamma().scaled(1.0 / c);
                let mut sp = Space::root(f1, 0.5);
                sp.log = a;
                let mut sv = Space::value(f1, 0.5);
                sv.log = a;
                vec![
                    Term::new("t^-1/2 (ln t)^-a <GγF2G>", Coef::PowerLog(0.5, a), sp, g.times_gamma()),
                    Term::new("t^-1 <F1 F~2 F1>", Coef::Inverse, sv, tilde),
                ]
            }
            Preset::PeR2 { alpha, beta, m } => {
                let f5 = Cutoff::rising(1.0).with_arg(ArgMap::Abs);
                let f5t = Cutoff::falling(m).with_arg(ArgMap::Abs);
                let make = |power: i32| GammaFn::Product {
                    power,
                    a: f5,
                    beta,
                    b: f5t,
                };
                vec![
                    Term::new("t^-α <G|γ|³F5F~5G>", Coef::Power(alpha), Space::root(f1, alpha), make(3)),
                    Term::new("t^-1 <Gγ²F5F~5G>", Coef::Inverse, Space::root(f1, alpha), make(2)),
                ]
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Coef {
    Power(f64),
    PowerLog(f64, f64),
    Inverse,
}

impl Coef {
    fn value(&self, t: f64) -> f64 {
        match *self {
            Coef::Power(a) => t.powf(-a),
            Coef::PowerLog(a, l) => 1.0 / time_scale(t, a, l),
            Coef::Inverse => 1.0 / t,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum SpaceKind {
    Value,
    Root,
}

#[derive(Clone, Copy, Debug)]
struct Space {
    cutoff: Cutoff,
    alpha: f64,
    log: f64,
    kind: SpaceKind,
}

impl Space {
    fn value(cutoff: Cutoff, alpha: f64) -> Self {
        Self {
            cutoff,
            alpha,
            log: 0.0,
            kind: SpaceKind::Value,
        }
    }

    fn root(cutoff: Cutoff, alpha: f64) -> Self {
        Self {
            kind: SpaceKind::Root,
            ..Self::value(cutoff, alpha)
        }
    }

    fn apply(&self, f: &RadialField, t: f64) -> RadialField {
        let s = time_scale(t, self.alpha, self.log);
        let w = standard_weight();
        match self.kind {
            SpaceKind::Value => f.mul_profile(|r| self.cutoff.value(w.bracket(r) / s)),
            SpaceKind::Root => f.mul_profile(|r| root_derivative(&self.cutoff, w.bracket(r) / s)),
        }
    }
}

/// Real function of `γ` used inside a sandwich.
#[derive(Clone, Debug)]
enum GammaFn {
    /// `γ^power` (or `|γ|^power`).
    Poly { power: i32, abs: bool },
    /// `scale · γ^gamma_power · (γ s)^scaled_power · F^{(deriv)}(γ s)`,
    /// `s = t^β (ln t)^log`.
    Cut {
        cutoff: Cutoff,
        beta: f64,
        log: f64,
        deriv: bool,
        gamma_power: i32,
        scaled_power: i32,
        scale: f64,
    },
    /// `|γ|^power · a(|γ| t^β) · b(γ)`.
    Product { power: i32, a: Cutoff, beta: f64, b: Cutoff },
}

impl GammaFn {
    fn cut(cutoff: Cutoff, beta: f64) -> Self {
        GammaFn::Cut {
            cutoff,
            beta,
            log: 0.0,
            deriv: false,
            gamma_power: 0,
            scaled_power: 0,
            scale: 1.0,
        }
    }

    fn with_log(mut self, l: f64) -> Self {
        if let GammaFn::Cut { log, .. } = &mut self {
            *log = l;
        }
        self
    }

    fn scaled(mut self, k: f64) -> Self {
        if let GammaFn::Cut { scale, .. } = &mut self {
            *scale *= k;
        }
        self
    }

    fn times_gamma(mut self) -> Self {
        if let GammaFn::Cut { gamma_power, .. } = &mut self {
            *gamma_power += 1;
        }
        self
    }

    fn times_scaled_gamma(mut self) -> Self {
        if let GammaFn::Cut { scaled_power, .. } = &mut self {
            *scaled_power += 1;
        }
        self
    }

    fn derivative(mut self) -> Self {
        if let GammaFn::Cut { deriv, .. } = &mut self {
            *deriv = true;
        }
        self
    }

    /// Returns `m(γ)` at time `t` and the scale on which it varies.
    fn at(&self, t: f64) -> (Box<dyn Fn(f64) -> f64 + Sync + '_>, f64) {
        match self {
            GammaFn::Poly { power, abs } => {
                let p = *power;
                let abs = *abs;
                (
                    Box::new(move |g: f64| if abs { g.abs().powi(p) } else { g.powi(p) }),
                    1.0,
                )
            }
            GammaFn::Cut {
                cutoff,
                beta,
                log,
                deriv,
                gamma_power,
                scaled_power,
                scale,
            } => {
                let s = time_scale(t, *beta, *log);
                let width = 0.5 * cutoff.a.min(if cutoff.b > 0.0 { cutoff.b } else { cutoff.a }) / s;
                (
                    Box::new(move |g: f64| {
                        let x = g * s;
                        let c = if *deriv { cutoff.d1(x) } else { cutoff.value(x) };
                        scale * g.powi(*gamma_power) * x.powi(*scaled_power) * c
                    }),
                    width,
                )
            }
            GammaFn::Product { power, a, beta, b } => {
                let s = t.powf(*beta);
                let width = (0.5 * a.a / s).min(0.5 * b.a);
                (
                    Box::new(move |g: f64| g.abs().powi(*power) * a.value(g * s) * b.value(g)),
                    width,
                )
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Term {
    label: &'static str,
    coef: Coef,
    space: Space,
    gamma: GammaFn,
    abs: bool,
}

impl Term {
    fn new(label: &'static str, coef: Coef, space: Space, gamma: GammaFn) -> Self {
        Self {
            label,
            coef,
            space,
            gamma,
            abs: false,
        }
    }

    fn absolute(mut self) -> Self {
        self.abs = true;
        self
    }

    /// `coef(t)·⟨S m(γ) S⟩_t`.
    fn eval(&self, fm: &FlowMap, f: &RadialField, t: f64) -> f64 {
        let s = self.space.apply(f, t);
        if s.is_zero() {
            return 0.0;
        }
        let (m, width) = self.gamma.at(t);
        let g = gamma_multiplier(fm, &s, m, width, &FlowSpectralOptions::default());
        let v = expectation_of(&g, &s);
        self.coef.value(t) * if self.abs { v.abs() } else { v }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub converged: bool,
    pub tail_ratio: f64,
    pub fitted_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationRecord {
    pub preset: Preset,
    pub t0: f64,
    pub times: Vec<f64>,
    pub integrand: Vec<f64>,
    pub components: Vec<(String, Vec<f64>)>,
    pub running_integral: Vec<f64>,
    /// `∫` over `[T/4, T/2]` and `[T/2, T]`.
    pub tail_increments: (f64, f64),
    pub verdict: Verdict,
    /// Set when `t₀` is below the large-time value `100`.
    pub scaled: bool,
    /// `J₀` for the boundary preset.
    pub boundary_terms: Option<u32>,
}

fn integral_between(t: &[f64], cum: &[f64], a: f64, b: f64) -> f64 {
    interp_linear(t, cum, b) - interp_linear(t, cum, a)
}

fn tail_verdict(times: &[f64], integrand: &[f64], cum: &[f64]) -> ((f64, f64), Verdict) {
    let t_end = *times.last().unwrap_or(&0.0);
    let i1 = integral_between(times, cum, 0.25 * t_end, 0.5 * t_end);
    let i2 = integral_between(times, cum, 0.5 * t_end, t_end);
    let ratio = if i1 == 0.0 && i2 == 0.0 {
        0.0
    } else if i1 == 0.0 {
        f64::INFINITY
    } else {
        (i2 / i1).abs()
    };
    let (tt, yy): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(integrand)
        .filter(|(t, _)| **t >= 0.25 * t_end)
        .map(|(t, y)| (*t, *y))
        .unzip();
    let fitted_exponent = loglog_fit(&tt, &yy).map(|f| f.slope);
    (
        (i1, i2),
        Verdict {
            converged: ratio < 1.0,
            tail_ratio: ratio,
            fitted_exponent,
        },
    )
}

/// Running trapezoid integral of a preset's integrand over snapshots with
/// `t ≥ t0`, and its dyadic tail increments.
pub fn propagation_integral(run: &Trajectory, preset: Preset, t0: f64) -> Result<PropagationRecord> {
    preset.validate()?;
    if matches!(preset, Preset::Bab { .. }) && !(t0 > 1.0) {
        return Err(Error::invalid("Bab: t₀ must exceed 1 so that ln t > 0"));
    }
    if !(t0 > 0.0) {
        return Err(Error::invalid(format!("t₀={t0} must be positive")));
    }
    let terms = preset.terms();
    let fm = standard_flow();
    let snaps: Vec<&RadialField> = run.snapshots.iter().filter(|s| s.time_tag >= t0).collect();
    if snaps.len() < 2 {
        return Err(Error::invalid(format!(
            "{}: fewer than two snapshots after t₀={t0}",
            preset.name()
        )));
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.time_tag).collect();
    let per_snap: Vec<Vec<f64>> = snaps
        .par_iter()
        .map(|s| terms.iter().map(|term| term.eval(&fm, s, s.time_tag)).collect())
        .collect();
    let integrand: Vec<f64> = per_snap.iter().map(|v| v.iter().sum()).collect();
    let components = terms
        .iter()
        .enumerate()
        .map(|(i, term)| (term.label.to_string(), per_snap.iter().map(|v| v[i]).collect()))
        .collect();
    let cum = cumulative_trapezoid(&times, &integrand);
    let (tail_increments, verdict) = tail_verdict(&times, &integrand, &cum);
    Ok(PropagationRecord {
        preset,
        t0,
        boundary_terms: match preset {
            Preset::PeBoundary { alpha } => Some(Preset::boundary_terms(alpha)),
            _ => None,
        },
        times,
        integrand,
        components,
        running_integral: cum,
        tail_increments,
        verdict,
        scaled: t0 < 100.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub times: Vec<f64>,
    /// `⟨F′γF′⟩_t`.
    pub series: Vec<f64>,
    /// Mean of `|⟨F′γF′⟩|` over the last quartile.
    pub tail_magnitude: f64,
    pub running_integral: Vec<f64>,
    /// Fitted power of `|∫_{t₀}^T ⟨F′γF′⟩|` in `T ≥ T_max/4`.
    pub growth_exponent: Option<f64>,
    /// `max_T |∫_{t₀}^T| / T^α`.
    pub fitted_constant: f64,
}

/// `⟨F′γF′⟩_t` with `F′ = F′(⟨x⟩/t^α)` and its time integral from `t0`.
pub fn boundary_limit_check(run: &Trajectory, alpha: f64, cutoff: Cutoff, t0: f64) -> Result<BoundaryCheck> {
    check_alpha_third(alpha, "boundary check")?;
    let d = Factor::SpaceDerivative { cutoff, alpha };
    let obs = ObservableSpec::new("F'γF'", vec![d.clone(), Factor::Gamma, d]);
    let s = expectation_series(run, &obs, t0.max(f64::MIN_POSITIVE))?;
    let cum = cumulative_trapezoid(&s.times, &s.values);
    let t_end = *s.times.last().unwrap_or(&0.0);
    let tail: Vec<f64> = s.values[(3 * s.values.len()) / 4..].iter().map(|v| v.abs()).collect();
    let tail_magnitude = if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let fitted_constant = s
        .times
        .iter()
        .zip(&cum)
        .map(|(t, c)| c.abs() / t.powf(alpha))
        .fold(0.0, f64::max);
    let (tt, cc): (Vec<f64>, Vec<f64>) = s
        .times
        .iter()
        .zip(&cum)
        .skip(1)
        .filter(|(t, _)| **t >= 0.25 * t_end)
        .map(|(t, c)| (*t, *c))
        .unzip();
    Ok(BoundaryCheck {
        growth_exponent: loglog_fit(&tt, &cc).map(|f| f.slope),
        times: s.times,
        series: s.values,
        tail_magnitude,
        running_integral: cum,
        fitted_constant,
    })
}

/// `⟨[−iΔ, X]⟩` for a time-independent observable given as a map.
fn commutator_expectation(f: &RadialField, x: impl Fn(&RadialField) -> RadialField) -> f64 {
    let a = apply_laplacian(&x(f));
    let b = x(&apply_laplacian(f));
    let c = f.with_u(
        a.u.iter()
            .zip(&b.u)
            .map(|(p, q)| Complex64::new(0.0, -1.0) * (p - q))
            .collect(),
    );
    expectation_of(&c, f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzWindow {
    pub t1: f64,
    pub t2: f64,
    /// `⟨F₁γF₁⟩_{t₂} − ⟨F₁γF₁⟩_{t₁}`.
    pub lhs: f64,
    /// `∫ (4/M)⟨√(F₁F₁′)γ²√(F₁F₁′)⟩`.
    pub leading: f64,
    /// Integral of the symmetrization/boundary remainder.
    pub boundary: f64,
    /// Same, multiplied by `M³`.
    pub boundary_scaled: f64,
    pub interaction: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Residual with the leading term alone on the right.
    pub leading_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzReport {
    pub m: f64,
    /// Set when `M < 100`.
    pub scaled: bool,
    pub times: Vec<f64>,
    pub windows: Vec<MorawetzWindow>,
    pub boundary_flag: bool,
}

/// Both sides of the exterior Morawetz identity for `F₁ = F₁(⟨x⟩/M ≥ 1)` over
/// each consecutive pair of `window_edges`.
pub fn exterior_morawetz(run: &Trajectory, m: f64, window_edges: &[f64]) -> Result<MorawetzReport> {
    if !(m >= 4.0) {
        return Err(Error::invalid(format!("M={m} must be at least 4")));
    }
    if window_edges.len() < 2 || window_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("window edges must be increasing, at least two"));
    }
    let (lo, hi) = (window_edges[0], window_edges[window_edges.len() - 1]);
    let snaps: Vec<&RadialField> = run
        .snapshots
        .iter()
        .filter(|s| s.time_tag >= lo - 1e-9 && s.time_tag <= hi + 1e-9)
        .collect();
    if snaps.len() < 3 {
        return Err(Error::invalid("Morawetz windows cover fewer than three snapshots"));
    }
    let boundary_flag = snaps.iter().any(|s| s.boundary_fraction() > run.boundary_tol);
    let w = standard_weight();
    let f1 = Cutoff::rising(1.0);
    let f1v: Vec<f64> = run.grid.r.iter().map(|&r| f1.value(w.bracket(r) / m)).collect();
    let g: Vec<f64> = run
        .grid
        .r
        .iter()
        .map(|&r| root_derivative(&f1, w.bracket(r) / m))
        .collect();
    let b_op = |f: &RadialField| apply_gamma(w, &f.mul_values(&f1v)).mul_values(&f1v);
    let spec = run.spec.clone();
    let rows: Vec<[f64; 4]> = snaps
        .par_iter()
        .map(|f| {
            let bf = b_op(f);
            let b = expectation_of(&bf, f);
            let gf = apply_gamma(w, &f.mul_values(&g));
            let leading = 4.0 / m * gf.mass();
            let exact = commutator_expectation(f, b_op);
            let inter = if spec.is_free() {
                Ok(0.0)
            } else {
                eval_nonlinearity(&spec, f, f.time_tag).and_then(|nf| inner(&nf, &bf).map(|z| 2.0 * z.im))
            }?;
            Ok([b, leading, exact - leading, inter])
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = snaps.iter().map(|s| s.time_tag).collect();
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
    let (bv, lead, bnd, inter) = (col(0), col(1), col(2), col(3));
    let cl = cumulative_trapezoid(&times, &lead);
    let cb = cumulative_trapezoid(&times, &bnd);
    let ci = cumulative_trapezoid(&times, &inter);
    let windows = window_edges
        .windows(2)
        .map(|e| {
            let (t1, t2) = (e[0], e[1]);
            let lhs = interp_linear(&times, &bv, t2) - interp_linear(&times, &bv, t1);
            let leading = integral_between(&times, &cl, t1, t2);
            let boundary = integral_between(&times, &cb, t1, t2);
            let interaction = integral_between(&times, &ci, t1, t2);
            let rhs = leading + boundary + interaction;
            let scale = lhs.abs().max(rhs.abs());
            let rel = |x: f64| if scale == 0.0 { 0.0 } else { x.abs() / scale };
            MorawetzWindow {
                t1,
                t2,
                lhs,
                leading,
                boundary,
                boundary_scaled: boundary * m.powi(3),
                interaction,
                rhs,
                residual: rel(lhs - rhs),
                leading_residual: rel(lhs - leading),
            }
        })
        .collect();
    Ok(MorawetzReport {
        m,
        scaled: m < 100.0,
        times,
        windows,
        boundary_flag,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationSeries {
    pub m: f64,
    pub r: f64,
    pub times: Vec<f64>,
    /// `⟨½(AP⁺ + P⁺A)⟩_t`.
    pub a_projected: Vec<f64>,
    /// `⟨p P⁺ p⟩_t`.
    pub p_projected: Vec<f64>,
    /// `|⟨AP⁺⟩_T − ⟨AP⁺⟩_0|`.
    pub growth: f64,
}

/// Log window reaching `10⁻⁴ r_max`, so profiles filling the origin fit.
fn wide_log_window(f: &RadialField) -> LogGridSpec {
    LogGridSpec {
        r_min: 1e-4 * f.grid.r_max(),
        r_max: f.grid.r_max(),
        n_log: 4 * f.grid.n(),
    }
}

fn mellin_weighted(f: &RadialField, m: impl Fn(f64) -> f64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let log = wide_log_window(f);
    let s = mellin_forward(f, log)?;
    let freq = log.frequencies();
    let n = s.spectrum.len() as f64;
    // discrete Parseval on the log grid
    let acc: f64 = s
        .spectrum
        .iter()
        .zip(&freq)
        .map(|(v, &l)| m(l) * v.norm_sqr())
        .sum();
    Ok(FOUR_PI * log.dt() * acc / n)
}

/// `⟨½(AP⁺_{M,R} + P⁺_{M,R}A)⟩_t` and `⟨pP⁺p⟩_t` along the run.
pub fn dilation_bound_series(run: &Trajectory, m: f64, r: f64) -> Result<DilationSeries> {
    let p = TanhProjection::new(m, r, Direction::Outgoing)?;
    let rows: Vec<(f64, f64)> = run
        .snapshots
        .par_iter()
        .map(|f| {
            let a = mellin_weighted(f, |l| l * p.value(l))?;
            let du = f.grid.derivative(&f.u);
            let psi = f.with_u(
                f.u.iter()
                    .zip(&du)
                    .zip(&f.grid.r)
                    .map(|((u, d), &r)| d - u / r)
                    .collect(),
            );
            let b = mellin_weighted(&psi, |l| p.value(l))?;
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let a_projected: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let growth = (a_projected[a_projected.len() - 1] - a_projected[0]).abs();
    Ok(DilationSeries {
        m,
        r,
        times: run.times(),
        p_projected: rows.iter().map(|r| r.1).collect(),
        a_projected,
        growth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationSweep {
    pub ms: Vec<f64>,
    pub growth: Vec<f64>,
    /// Slope of `log growth` against `log M`.
    pub slope: Option<f64>,
}

/// Growth of `⟨AP⁺⟩` across `M` values with `R = √M`.
pub fn dilation_bound_sweep(run: &Trajectory, ms: &[f64]) -> Result<DilationSweep> {
    let growth = ms
        .iter()
        .map(|&m| dilation_bound_series(run, m, m.sqrt()).map(|s| s.growth))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DilationSweep {
        slope: loglog_fit(ms, &growth).map(|f| f.slope),
        ms: ms.to_vec(),
        growth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub times: Vec<f64>,
    /// `∫|∇^{3/2}φ|² ρ dx` at each snapshot.
    pub density: Vec<f64>,
    pub value: f64,
    /// Fit of the running integral against elapsed time.
    pub linear_fit: Option<LineFit>,
    /// `value / (‖φ₀‖²_{H¹} · |window|)`.
    pub normalized: f64,
}

/// Space-time smoothing functional over `[t1, t2]` with the commutator
/// density of `kind`.
pub fn local_smoothing_functional(run: &Trajectory, kind: VectorFieldKind, window: (f64, f64)) -> Result<SmoothingReport> {
    kind.validate()?;
    let (t1, t2) = window;
    if !(t2 > t1) {
        return Err(Error::invalid(format!("window [{t1}, {t2}] is empty")));
    }
    let rho: Vec<f64> = run
        .grid
        .r
        .iter()
        .map(|&r| morawetz_field(kind, r).map(|m| m.leading_commutator_density))
        .collect::<Result<_>>()?;
    let snaps: Vec<&RadialField> = run
        .snapshots
        .iter()
        .filter(|s| s.time_tag >= t1 - 1e-9 && s.time_tag <= t2 + 1e-9)
        .collect();
    if snaps.len() < 2 {
        return Err(Error::invalid("smoothing window covers fewer than two snapshots"));
    }
    let density: Vec<f64> = snaps
        .par_iter()
        .map(|f| {
            let v = f.apply_real_multiplier(|k| k.powf(1.5));
            let s: f64 = v.u.iter().zip(&rho).map(|(v, w)| v.norm_sqr() * w).sum();
            FOUR_PI * f.grid.h * s
        })
        .collect();
    let times: Vec<f64> = snaps.iter().map(|s| s.time_tag).collect();
    let cum = cumulative_trapezoid(&times, &density);
    let value = *cum.last().unwrap_or(&0.0);
    let elapsed: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
    let h1 = norm(run.initial(), NormKind::H1)?;
    Ok(SmoothingReport {
        linear_fit: linear_fit(&elapsed[1..], &cum[1..]),
        normalized: if h1 == 0.0 { 0.0 } else { value / (h1 * h1 * (t2 - t1)) },
        value,
        times,
        density,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirialSeries {
    pub times: Vec<f64>,
    /// Centered difference of `⟨A⟩`.
    pub derivative: Vec<f64>,
    /// `2‖∇φ‖² − ∫ r ∂_r𝒩 |φ|²`.
    pub rhs: Vec<f64>,
    pub residual: Vec<f64>,
    /// RMS of the residual relative to the RMS of the right side.
    pub relative_rms: f64,
}

/// `2‖∇φ‖² − ∫ r ∂_r(𝒩(|φ(r)|, r)) |φ|² dx`, integrated by parts.
pub fn virial_rhs(run: &Trajectory, f: &RadialField) -> Result<f64> {
    let kin = 2.0 * f.kinetic();
    if run.spec.is_free() {
        return Ok(kin);
    }
    let du = f.grid.derivative(&f.u);
    let s: f64 = f
        .u
        .iter()
        .zip(&du)
        .zip(&f.grid.r)
        .map(|((u, d), &r)| {
            let n = run.spec.factor(u.norm() / r, r, f.time_tag);
            n * (u.norm_sqr() + 2.0 * r * (u.conj() * d).re)
        })
        .sum();
    Ok(kin + FOUR_PI * f.grid.h * s)
}

/// Virial identity `d/dt⟨A⟩ = 2‖∇φ‖² − ⟨r∂_r𝒩⟩` at interior snapshots.
pub fn virial_series(run: &Trajectory) -> Result<VirialSeries> {
    if !run.spec.is_autonomous() {
        return Err(Error::invalid(
            "virial series: time-dependent potentials add an explicit-t term, unsupported",
        ));
    }
    let s = &run.snapshots;
    if s.len() < 3 {
        return Err(Error::invalid("virial series needs at least 3 snapshots"));
    }
    let a: Vec<f64> = s
        .par_iter()
        .map(|f| expectation_of(&apply_dilation(f), f))
        .collect();
    let mut times = Vec::new();
    let mut derivative = Vec::new();
    let mut rhs = Vec::new();
    for k in 1..s.len() - 1 {
        times.push(s[k].time_tag);
        derivative.push((a[k + 1] - a[k - 1]) / (s[k + 1].time_tag - s[k - 1].time_tag));
        rhs.push(virial_rhs(run, &s[k])?);
    }
    let residual: Vec<f64> = derivative.iter().zip(&rhs).map(|(d, r)| d - r).collect();
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let scale = rms(&rhs);
    Ok(VirialSeries {
        relative_rms: if scale == 0.0 { rms(&residual) } else { rms(&residual) / scale },
        times,
        derivative,
        rhs,
        residual,
    })
}

/// `|⟨F₁[−iΔ, F₂(γ/τ)]F₁⟩|` and the unconstrained magnitude
/// `‖ΔF₂F₁f‖·‖F₁f‖ + ‖F₂ΔF₁f‖·‖F₁f‖`, for `F₁ = F₁(⟨x⟩/s ≥ 1)`.
pub fn delta_gamma_function_form(f: &RadialField, s: f64, f2: &Cutoff, tau: f64) -> Result<(f64, f64)> {
    let fm: Arc<FlowMap> = standard_flow();
    let w = standard_weight();
    let f1 = Cutoff::rising(1.0);
    let g = f.mul_profile(|r| f1.value(w.bracket(r) / s));
    if g.is_zero() {
        return Ok((0.0, 0.0));
    }
    let a = apply_laplacian(&func_of_gamma_spectral(&fm, f2, tau, &g)?);
    let b = func_of_gamma_spectral(&fm, f2, tau, &apply_laplacian(&g))?;
    let c = g.with_u(
        a.u.iter()
            .zip(&b.u)
            .map(|(p, q)| Complex64::new(0.0, -1.0) * (p - q))
            .collect(),
    );
    let form = inner(&c, &g)?.norm();
    let ng = g.mass().sqrt();
    let scale = (a.mass().sqrt() + b.mass().sqrt()) * ng;
    Ok((form, scale))
}

/// Integral of a uniformly weighted series between two times.
pub fn window_integral(times: &[f64], values: &[f64], t1: f64, t2: f64) -> f64 {
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t1 && **t <= t2)
        .map(|(a, b)| (*a, *b))
        .unzip();
    trapezoid(&t, &v)
}

/// Writes `t, value, running_integral` rows.
pub fn write_series_csv(path: &std::path::Path, label: &str, times: &[f64], values: &[f64], running: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let head = [
        "t".to_string(),
        format!("value[{label}]"),
        format!("running_integral[{label} dt]"),
    ];
    w.write_record(&head).map_err(|e| Error::io(path, e.into()))?;
    for ((t, v), c) in times.iter().zip(values).zip(running) {
        w.write_record(&[format!("{t:.17e}"), format!("{v:.17e}"), format!("{c:.17e}")])
            .map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl PropagationRecord {
    /// `<name>.csv` with the integrand and `<name>.json` with the verdict.
    pub fn write(&self, dir: &std::path::Path) -> Result<()> {
        let name = self.preset.name();
        write_series_csv(
            &dir.join(format!("{name}.csv")),
            name,
            &self.times,
            &self.integrand,
            &self.running_integral,
        )?;
        let path = dir.join(format!("{name}.json"));
        let body = serde_json::json!({
            "preset": self.preset,
            "t0": self.t0,
            "scaled": self.scaled,
            "tail_increments": self.tail_increments,
            "boundary_terms": self.boundary_terms,
            "verdict": self.verdict,
        });
        let text = serde_json::to_string_pretty(&body).map_err(|e| Error::format(&path, e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
