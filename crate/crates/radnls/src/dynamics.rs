//! Time evolution of `i∂tφ = −Δφ + 𝒩(|φ|,|x|,t)φ` by Strang splitting with an
//! exact sine-spectral drift, plus conservation and free-wave diagnostics.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quad::gl16;
use crate::radial_grid::{make_grid, norm, Grid, GridSpec, NormKind, RadialField};
use crate::{Complex64, Error, Result};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Time dependence of the external potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    #[default]
    Constant,
    /// `cos(ωt)`.
    Cosine { omega: f64 },
    /// `(1 + t)^{−rate}`.
    Decay { rate: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Cosine { omega } => (omega * t).cos(),
            TimeProfile::Decay { rate } => (1.0 + t).powf(-rate),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeProfile::Constant)
    }
}

/// `V(r,t) = amplitude·(1+r)^{−q}·profile(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub q: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub profile: TimeProfile,
}

impl PotentialTerm {
    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.amplitude * (1.0 + r).powf(-self.q) * self.profile.value(t)
    }
}

/// `W(r)f(|φ|)` with `W = amplitude·(1+r)^{−decay}` and `f(s) = s^power`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfTerm {
    pub amplitude: f64,
    pub decay: f64,
    pub power: f64,
}

impl WfTerm {
    pub fn weight(&self, r: f64) -> f64 {
        self.amplitude * (1.0 + r).powf(-self.decay)
    }
}

/// `𝒩φ = ±a|φ|^pφ − b|φ|^mφ/(1+|φ|^{m−n}) + Vφ + Wf(|φ|)φ`.
///
/// The power term is defocusing (`+a`) unless `focusing` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub focusing: bool,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default = "default_n")]
    pub n: f64,
    #[serde(default)]
    pub potential: Option<PotentialTerm>,
    #[serde(default)]
    pub wf_term: Option<WfTerm>,
}

fn default_p() -> f64 {
    2.0
}

fn default_m() -> f64 {
    3.0
}

fn default_n() -> f64 {
    1.0
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        Self::free()
    }
}

impl NonlinearitySpec {
    pub fn free() -> Self {
        Self {
            a: 0.0,
            p: default_p(),
            focusing: false,
            b: 0.0,
            m: default_m(),
            n: default_n(),
            potential: None,
            wf_term: None,
        }
    }

    pub fn power(a: f64, p: f64) -> Self {
        Self {
            a,
            p,
            ..Self::free()
        }
    }

    pub fn saturated(b: f64, m: f64, n: f64) -> Self {
        Self {
            b,
            m,
            n,
            ..Self::free()
        }
    }

    pub fn with_potential(mut self, v: PotentialTerm) -> Self {
        self.potential = Some(v);
        self
    }

    pub fn is_free(&self) -> bool {
        self.a == 0.0
            && self.b == 0.0
            && self.potential.is_none_or(|v| v.amplitude == 0.0)
            && self.wf_term.is_none_or(|w| w.amplitude == 0.0)
    }

    pub fn is_autonomous(&self) -> bool {
        self.potential.is_none_or(|v| v.profile.is_constant() || v.amplitude == 0.0)
    }

    /// Lists every violated parameter range.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [self.a, self.p, self.b, self.m, self.n];
        if finite.iter().any(|v| !v.is_finite()) {
            out.push("all couplings and exponents must be finite".to_string());
        }
        if self.a < 0.0 {
            out.push(format!("power coupling a={} must be nonnegative", self.a));
        }
        if self.b < 0.0 {
            out.push(format!("saturated coupling b={} must be nonnegative", self.b));
        }
        if self.a > 0.0 && !(self.p > 4.0 / 3.0 && self.p < 4.0) {
            out.push(format!("power exponent p={} outside (4/3, 4)", self.p));
        }
        if self.b > 0.0 {
            if !(self.m > 4.0 / 3.0) {
                out.push(format!("saturated exponent m={} must exceed 4/3", self.m));
            }
            if !(self.n < 4.0) {
                out.push(format!("saturated exponent n={} must be below 4", self.n));
            }
        }
        if let Some(v) = self.potential {
            if !(v.q > 1.0) || !v.amplitude.is_finite() {
                out.push(format!("potential decay q={} must exceed 1 with finite amplitude", v.q));
            }
            if let TimeProfile::Decay { rate } = v.profile {
                if !(rate >= 0.0) {
                    out.push(format!("potential time decay rate {rate} must be nonnegative"));
                }
            }
        }
        if let Some(w) = self.wf_term {
            if !w.amplitude.is_finite() || !(w.decay >= 0.0) || !(w.power > 0.0) {
                out.push("W·f term needs finite amplitude, decay ≥ 0 and power > 0".to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(v.join("; ")))
        }
    }

    /// Real local factor `𝒩(s, r, t)` at amplitude `s = |φ|`.
    pub fn factor(&self, s: f64, r: f64, t: f64) -> f64 {
        let mut v = 0.0;
        if self.a != 0.0 && s > 0.0 {
            let pw = self.a * s.powf(self.p);
            v += if self.focusing { -pw } else { pw };
        }
        if self.b != 0.0 && s > 0.0 {
            v -= self.b * saturated(s, self.m, self.n);
        }
        if let Some(pot) = self.potential {
            v += pot.value(r, t);
        }
        if let Some(w) = self.wf_term {
            if s > 0.0 {
                v += w.weight(r) * s.powf(w.power);
            }
        }
        v
    }

    /// `G(s, r, t) = ∫₀^{s²} 𝒩(√σ, r, t) dσ`.
    pub fn antiderivative(&self, s: f64, r: f64, t: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        let s2 = s * s;
        let mut g = 0.0;
        if self.a != 0.0 {
            let e = 0.5 * self.p + 1.0;
            let v = self.a * s2.powf(e) / e;
            g += if self.focusing { -v } else { v };
        }
        if self.b != 0.0 {
            // ∫₀^s 2x·x^m/(1+x^{m−n}) dx on four panels
            let (m, n) = (self.m, self.n);
            let rule = gl16();
            let mut acc = 0.0;
            for i in 0..4 {
                let lo = s * i as f64 / 4.0;
                let hi = s * (i + 1) as f64 / 4.0;
                acc += rule.integrate(lo, hi, |x| 2.0 * x * saturated(x, m, n));
            }
            g -= self.b * acc;
        }
        if let Some(pot) = self.potential {
            g += pot.value(r, t) * s2;
        }
        if let Some(w) = self.wf_term {
            let e = 0.5 * w.power + 1.0;
            g += w.weight(r) * s2.powf(e) / e;
        }
        g
    }
}

/// `x^m / (1 + x^{m−n})`, evaluated in a form that stays finite for large `x`.
fn saturated(x: f64, m: f64, n: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if m >= n && x > 1.0 {
        x.powf(n) / (x.powf(n - m) + 1.0)
    } else {
        x.powf(m) / (1.0 + x.powf(m - n))
    }
}

/// Pointwise `𝒩(φ)φ` at time `t`.
pub fn eval_nonlinearity(spec: &NonlinearitySpec, f: &RadialField, t: f64) -> Result<RadialField> {
    let u: Vec<Complex64> = f
        .u
        .iter()
        .zip(&f.grid.r)
        .map(|(u, &r)| u * spec.factor(u.norm() / r, r, t))
        .collect();
    if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::numerical("nonlinearity overflowed at extreme amplitude"));
    }
    Ok(f.with_u(u))
}

/// `e^{iΔt}f`: the exact free propagator for `i∂tφ = −Δφ`.
pub fn free_evolve(f: &RadialField, t: f64) -> RadialField {
    if t == 0.0 {
        return f.clone();
    }
    let mut out = f.apply_multiplier(|k| Complex64::from_polar(1.0, -k * k * t));
    out.time_tag = f.time_tag + t;
    out
}

/// Strang stepper with a cached drift multiplier.
pub struct Stepper {
    grid: Arc<Grid>,
    spec: NonlinearitySpec,
    dt: f64,
    drift: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: Arc<Grid>, spec: NonlinearitySpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step dt={dt} must be positive")));
        }
        let drift = grid
            .k
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -k * k * dt))
            .collect();
        Ok(Self {
            grid,
            spec,
            dt,
            drift,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    fn kick(&self, u: &mut [Complex64], t_mid: f64, tau: f64) {
        if self.spec.is_free() {
            return;
        }
        for (v, &r) in u.iter_mut().zip(&self.grid.r) {
            let nf = self.spec.factor(v.norm() / r, r, t_mid);
            *v *= Complex64::from_polar(1.0, -nf * tau);
        }
    }

    /// Advances `u` in place from time `t` to `t + dt`.
    pub fn advance(&self, u: &mut Vec<Complex64>, t: f64) -> Result<()> {
        let t_mid = t + 0.5 * self.dt;
        self.kick(u, t_mid, 0.5 * self.dt);
        let mut c = self.grid.sine_coeffs(u);
        for (c, d) in c.iter_mut().zip(&self.drift) {
            *c *= d;
        }
        *u = self.grid.from_sine_coeffs(&c);
        self.kick(u, t_mid, 0.5 * self.dt);
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite field after step ending at t={}",
                t + self.dt
            )));
        }
        Ok(())
    }
}

/// One Strang step of size `dt` starting at `state.time_tag`.
pub fn step(state: &RadialField, spec: &NonlinearitySpec, dt: f64) -> Result<RadialField> {
    let s = Stepper::new(state.grid.clone(), spec.clone(), dt)?;
    let mut u = state.u.clone();
    s.advance(&mut u, state.time_tag)?;
    let mut out = state.with_u(u);
    out.time_tag = state.time_tag + dt;
    Ok(out)
}

/// `E = ‖∇φ‖² + ∫G(|φ|, r, t)`, with `G` the antiderivative of `𝒩` in `|φ|²`.
pub fn energy(spec: &NonlinearitySpec, f: &RadialField, t: f64) -> f64 {
    let pot: f64 = f
        .u
        .iter()
        .zip(&f.grid.r)
        .map(|(u, &r)| spec.antiderivative(u.norm() / r, r, t) * r * r)
        .sum();
    f.kinetic() + FOUR_PI * f.grid.h * pot
}

/// `‖(x − 2pt)φ‖`, constant along free evolution.
pub fn pseudo_conformal(f: &RadialField, t: f64) -> f64 {
    let du = f.grid.derivative(&f.u);
    let s: f64 = f
        .u
        .iter()
        .zip(&du)
        .zip(&f.grid.r)
        .map(|((u, d), &r)| {
            let v = u * r + (d - u / r) * Complex64::new(0.0, 2.0 * t);
            v.norm_sqr()
        })
        .sum();
    (FOUR_PI * f.grid.h * s).sqrt()
}

/// `sup_{r≥1} r|φ(r)| / ‖φ‖_{H¹}`.
pub fn radial_sobolev_ratio(f: &RadialField) -> Result<f64> {
    let h1 = norm(f, NormKind::H1)?;
    if h1 == 0.0 {
        return Ok(0.0);
    }
    let sup = f
        .u
        .iter()
        .zip(&f.grid.r)
        .filter(|(_, &r)| r >= 1.0)
        .map(|(u, _)| u.norm())
        .fold(0.0, f64::max);
    Ok(sup / h1)
}

/// `‖φ(t)‖_{L⁶}`.
pub fn l6_norm(f: &RadialField) -> f64 {
    let s: f64 = f
        .u
        .iter()
        .zip(&f.grid.r)
        .map(|(u, &r)| (u.norm() / r).powi(6) * r * r)
        .sum();
    (FOUR_PI * f.grid.h * s).powf(1.0 / 6.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub spec: NonlinearitySpec,
    pub t_end: f64,
    /// Steps between stored snapshots.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Abort when `‖φ‖_{H¹}` exceeds this multiple of its initial value.
    #[serde(default = "default_h1_cap")]
    pub h1_cap: f64,
    /// Boundary mass fraction closing the validity window.
    #[serde(default = "default_boundary_tol")]
    pub boundary_tol: f64,
    /// Abort instead of recording when the validity window closes.
    #[serde(default)]
    pub abort_on_boundary: bool,
}

fn default_stride() -> usize {
    20
}

fn default_h1_cap() -> f64 {
    100.0
}

fn default_boundary_tol() -> f64 {
    1e-6
}

impl RunConfig {
    pub fn new(grid: GridSpec, spec: NonlinearitySpec, t_end: f64, stride: usize) -> Self {
        Self {
            grid,
            spec,
            t_end,
            stride,
            h1_cap: default_h1_cap(),
            boundary_tol: default_boundary_tol(),
            abort_on_boundary: false,
        }
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.grid.dt).round() as usize
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.grid.validate() {
            Err(Error::Invalid(m)) => out.push(m),
            Err(e) => out.push(e.to_string()),
            Ok(()) => {}
        }
        out.extend(self.spec.violations());
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            out.push(format!("final time T={} must be positive", self.t_end));
        } else if self.grid.dt > 0.0 {
            let s = self.t_end / self.grid.dt;
            if (s - s.round()).abs() > 1e-6 * s.max(1.0) {
                out.push(format!("T={} is not a multiple of dt={}", self.t_end, self.grid.dt));
            }
        }
        if self.stride == 0 {
            out.push("snapshot stride must be at least 1".to_string());
        }
        if !(self.h1_cap > 1.0) {
            out.push(format!("H¹ cap {} must exceed 1", self.h1_cap));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(v.join("; ")))
        }
    }
}

/// Time-ordered snapshots of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Arc<Grid>,
    pub spec: NonlinearitySpec,
    pub dt: f64,
    pub snapshots: Vec<RadialField>,
    /// Boundary mass fraction at each snapshot.
    pub boundary: Vec<f64>,
    /// Time of the first snapshot whose boundary fraction exceeded the
    /// configured tolerance.
    pub valid_until: Option<f64>,
    pub boundary_tol: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time_tag).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.mass()).collect()
    }

    pub fn initial(&self) -> &RadialField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &RadialField {
        &self.snapshots[self.snapshots.len() - 1]
    }

    pub fn t_max(&self) -> f64 {
        self.last().time_tag
    }

    /// Largest relative deviation of the mass from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.initial().mass();
        if m0 == 0.0 {
            return 0.0;
        }
        self.masses()
            .iter()
            .map(|m| (m - m0).abs() / m0)
            .fold(0.0, f64::max)
    }

    /// Snapshot nearest to time `t`.
    pub fn at(&self, t: f64) -> &RadialField {
        let i = self
            .snapshots
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.time_tag - t)
                    .abs()
                    .total_cmp(&(b.1.time_tag - t).abs())
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.snapshots[i]
    }

    /// Every `k`-th snapshot.
    pub fn thinned(&self, k: usize) -> Trajectory {
        let k = k.max(1);
        let pick = |i: usize| i.is_multiple_of(k);
        Trajectory {
            grid: self.grid.clone(),
            spec: self.spec.clone(),
            dt: self.dt,
            snapshots: self
                .snapshots
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, s)| s.clone())
                .collect(),
            boundary: self
                .boundary
                .iter()
                .enumerate()
                .filter(|(i, _)| pick(*i))
                .map(|(_, b)| *b)
                .collect(),
            valid_until: self.valid_until,
            boundary_tol: self.boundary_tol,
        }
    }

    /// Builds a trajectory from externally supplied snapshots.
    pub fn from_snapshots(spec: NonlinearitySpec, dt: f64, snapshots: Vec<RadialField>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::invalid("trajectory needs at least one snapshot"));
        }
        let grid = snapshots[0].grid.clone();
        for w in snapshots.windows(2) {
            if !(w[1].time_tag > w[0].time_tag) {
                return Err(Error::invalid("snapshot times must be strictly increasing"));
            }
            if !w[1].grid.same_as(&grid) {
                return Err(Error::invalid("snapshots live on different grids"));
            }
        }
        let boundary = snapshots.iter().map(|s| s.boundary_fraction()).collect();
        Ok(Self {
            grid,
            spec,
            dt,
            snapshots,
            boundary,
            valid_until: None,
            boundary_tol: default_boundary_tol(),
        })
    }

    /// One CSV per snapshot plus `manifest.json`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::with_capacity(self.snapshots.len());
        for (i, s) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{i:05}.csv");
            s.write_csv(&dir.join(&name))?;
            files.push(name);
        }
        let manifest = TrajectoryManifest {
            grid: self.grid.spec,
            spec: self.spec.clone(),
            dt: self.dt,
            times: self.times(),
            masses: self.masses(),
            boundary_fraction: self.boundary.clone(),
            valid_until: self.valid_until,
            files,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub grid: GridSpec,
    pub spec: NonlinearitySpec,
    pub dt: f64,
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    pub boundary_fraction: Vec<f64>,
    pub valid_until: Option<f64>,
    pub files: Vec<String>,
}

/// Evolves `f0` under `cfg`, storing a snapshot every `cfg.stride` steps.
pub fn simulate(f0: &RadialField, cfg: &RunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = make_grid(cfg.grid)?;
    if !f0.grid.same_as(&grid) {
        return Err(Error::invalid("initial field does not live on the configured grid"));
    }
    let stepper = Stepper::new(f0.grid.clone(), cfg.spec.clone(), cfg.dt())?;
    let steps = cfg.steps();
    let h1_0 = norm(f0, NormKind::H1)?;
    let mut u = f0.u.clone();
    let mut snaps = vec![RadialField::new(f0.grid.clone(), u.clone(), 0.0)?];
    let mut boundary = vec![f0.boundary_fraction()];
    let mut valid_until = None;
    for i in 0..steps {
        let t = i as f64 * cfg.dt();
        stepper.advance(&mut u, t)?;
        if (i + 1) % cfg.stride == 0 || i + 1 == steps {
            let snap = RadialField::new(f0.grid.clone(), u.clone(), (i + 1) as f64 * cfg.dt())?;
            let h1 = norm(&snap, NormKind::H1)?;
            if h1_0 > 0.0 && h1 > cfg.h1_cap * h1_0 {
                return Err(Error::numerical(format!(
                    "H¹ norm grew to {h1:.3e} (cap {:.1}× initial) at t={}",
                    cfg.h1_cap,
                    snap.time_tag
                )));
            }
            let b = snap.boundary_fraction();
            if b > cfg.boundary_tol && valid_until.is_none() {
                if cfg.abort_on_boundary {
                    return Err(Error::numerical(format!(
                        "boundary mass fraction {b:.2e} exceeded {} at t={}",
                        cfg.boundary_tol, snap.time_tag
                    )));
                }
                valid_until = Some(snap.time_tag);
            }
            boundary.push(b);
            snaps.push(snap);
        }
    }
    Ok(Trajectory {
        grid: f0.grid.clone(),
        spec: cfg.spec.clone(),
        dt: cfg.dt(),
        snapshots: snaps,
        boundary,
        valid_until,
        boundary_tol: cfg.boundary_tol,
    })
}

/// Exact free evolution of `f0` sampled at strictly increasing `times`.
pub fn free_trajectory(f0: &RadialField, times: &[f64]) -> Result<Trajectory> {
    let snaps: Vec<RadialField> = times
        .par_iter()
        .map(|&t| {
            let mut s = free_evolve(f0, t - f0.time_tag);
            s.time_tag = t;
            s
        })
        .collect();
    Trajectory::from_snapshots(NonlinearitySpec::free(), 0.0, snaps)
}

/// C^∞ spectral bump `exp(4a − a/x − a/(1−x))`, `x = (k−lo)/(hi−lo)`,
/// supported in `[lo, hi]` with peak one at the centre; `a = 2`.
pub fn band_profile(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    const A: f64 = 2.0;
    move |k: f64| {
        let x = (k - lo) / (hi - lo);
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            (A * (4.0 - 1.0 / x - 1.0 / (1.0 - x))).exp()
        }
    }
}

/// Restricts `f` to wavenumbers in `[lo, hi]` with [`band_profile`].
pub fn band_limit(f: &RadialField, lo: f64, hi: f64) -> Result<RadialField> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("band [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    Ok(f.apply_real_multiplier(band_profile(lo, hi)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityRow {
    pub t: f64,
    /// Mass fraction in `r ≤ v₁t`.
    pub interior: f64,
    /// Mass fraction in `r ≥ v₂t`.
    pub exterior: f64,
}

/// Free-wave cone masses for data with spectrum in `band`. Wavenumber `k`
/// travels at speed `2k`.
pub fn velocity_bound_scan(
    f0: &RadialField,
    band: (f64, f64),
    v1: f64,
    v2: f64,
    times: &[f64],
) -> Result<Vec<VelocityRow>> {
    let (lo, hi) = band;
    if !(v1 >= 0.0 && v1 < lo && v2 > hi) {
        return Err(Error::invalid(format!(
            "cone speeds v1={v1}, v2={v2} must bracket the band [{lo}, {hi}]"
        )));
    }
    let total = f0.mass();
    if total == 0.0 {
        return Err(Error::invalid("velocity scan needs a nonzero field"));
    }
    let outside = f0.spectral_expectation(|k| if k < lo || k > hi { 1.0 } else { 0.0 });
    if outside > 1e-12 * total {
        return Err(Error::invalid(format!(
            "initial data has spectral mass fraction {:.2e} outside the band",
            outside / total
        )));
    }
    let r_max = f0.grid.r_max();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        if v2 * t > 0.95 * r_max {
            return Err(Error::invalid(format!(
                "outer cone radius {} at t={t} leaves the grid",
                v2 * t
            )));
        }
        let ft = free_evolve(f0, t);
        rows.push(VelocityRow {
            t,
            interior: ft.mass_in(0.0, v1 * t) / total,
            exterior: ft.mass_in(v2 * t, f64::INFINITY) / total,
        });
    }
    Ok(rows)
}
