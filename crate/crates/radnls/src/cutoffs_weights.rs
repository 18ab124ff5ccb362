//! The smooth weight `⟨x⟩ = β(|x|)`, smooth characteristic functions and the
//! radial vector fields used in local smoothing functionals.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quad::GaussLegendre;
use crate::{Complex64, Error, Real, Result};

/// A nonnegative bump on `[1, 2]` with two derivatives available.
pub trait BumpProfile: Send + Sync {
    fn support(&self) -> (f64, f64);
    /// `[α, α′, α″]` at `x`.
    fn eval(&self, x: f64) -> [f64; 3];
}

/// `c·exp(−1/(x−1) − 1/(2−x))` normalized to unit mass.
#[derive(Clone, Debug)]
pub struct StandardBump {
    scale: f64,
}

impl StandardBump {
    pub fn new() -> Self {
        let raw = StandardBump { scale: 1.0 };
        let gl = GaussLegendre::new(12);
        let cells = 2000;
        let mut z = 0.0;
        for i in 0..cells {
            let a = 1.0 + i as f64 / cells as f64;
            let b = 1.0 + (i + 1) as f64 / cells as f64;
            z += gl.integrate(a, b, |x| raw.eval(x)[0]);
        }
        StandardBump { scale: 1.0 / z }
    }

    /// Bump with an arbitrary multiplicative constant (for contract tests).
    pub fn with_scale(scale: f64) -> Self {
        StandardBump { scale }
    }
}

impl Default for StandardBump {
    fn default() -> Self {
        Self::new()
    }
}

impl BumpProfile for StandardBump {
    fn support(&self) -> (f64, f64) {
        (1.0, 2.0)
    }

    fn eval(&self, x: f64) -> [f64; 3] {
        if x <= 1.0 || x >= 2.0 {
            return [0.0; 3];
        }
        let p = x - 1.0;
        let q = 2.0 - x;
        let psi = -1.0 / p - 1.0 / q;
        let d1 = 1.0 / (p * p) - 1.0 / (q * q);
        let d2 = -2.0 / (p * p * p) - 2.0 / (q * q * q);
        let a = self.scale * psi.exp();
        [a, a * d1, a * (d2 + d1 * d1)]
    }
}

const TABLE_STEP: f64 = 1e-4;

/// `β` with tabulated `β, β′` on `[1, 2]` and closed-form higher derivatives
/// from the bump.
#[derive(Clone)]
pub struct SmoothWeight<T: Real = f64> {
    bump: Arc<dyn BumpProfile>,
    beta: Vec<T>,
    dbeta: Vec<T>,
    /// Value of `β` on `[0, 1]`.
    pub c: T,
}

impl<T: Real> std::fmt::Debug for SmoothWeight<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothWeight")
            .field("c", &self.c)
            .field("nodes", &self.beta.len())
            .finish()
    }
}

/// Values of the weight and the derivative combinations entering commutators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDerivs<T> {
    pub g: T,
    pub g1: T,
    pub delta_g: T,
    pub delta2_g: T,
    pub radial_gij: T,
}

pub fn build_beta<T: Real>(bump: Arc<dyn BumpProfile>) -> Result<SmoothWeight<T>> {
    let (lo, hi) = bump.support();
    if lo < 1.0 || hi > 2.0 || lo >= hi {
        return Err(Error::invalid(format!(
            "bump support [{lo}, {hi}] must lie inside [1, 2]"
        )));
    }
    let cells = (1.0 / TABLE_STEP).round() as usize;
    let gl = GaussLegendre::new(8);
    let mut d1 = Vec::with_capacity(cells + 1);
    let mut b0 = Vec::with_capacity(cells + 1);
    let (mut acc1, mut acc0) = (0.0f64, 0.0f64);
    d1.push(0.0);
    b0.push(0.0);
    for i in 0..cells {
        let a = 1.0 + i as f64 * TABLE_STEP;
        let b = 1.0 + (i + 1) as f64 * TABLE_STEP;
        let mut neg = false;
        let m = gl.integrate(a, b, |x| {
            let v = bump.eval(x)[0];
            if v < 0.0 {
                neg = true;
            }
            v
        });
        if neg {
            return Err(Error::invalid("bump takes negative values"));
        }
        let tail = gl.integrate(a, b, |x| (b - x) * bump.eval(x)[0]);
        acc0 += TABLE_STEP * acc1 + tail;
        acc1 += m;
        d1.push(acc1);
        b0.push(acc0);
    }
    if (acc1 - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "bump integral {acc1} differs from 1 by more than 1e-10"
        )));
    }
    let c = 2.0 - acc0;
    Ok(SmoothWeight {
        bump,
        beta: b0.iter().map(|v| T::lit(v + c)).collect(),
        dbeta: d1.iter().map(|&v| T::lit(v)).collect(),
        c: T::lit(c),
    })
}

fn hermite<T: Real>(t: T, h: T, y0: T, y1: T, m0: T, m1: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = two * t3 - three * t2 + one;
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
}

impl<T: Real> SmoothWeight<T> {
    /// Weight built from [`StandardBump`].
    pub fn standard() -> Self {
        build_beta(Arc::new(StandardBump::new())).expect("standard bump is valid")
    }

    fn locate(&self, r: T) -> (usize, T) {
        let s = (r.as_f64() - 1.0) / TABLE_STEP;
        let last = self.beta.len() - 2;
        let i = (s.floor().max(0.0) as usize).min(last);
        (i, T::lit(s - i as f64))
    }

    fn bump_at(&self, r: T) -> [T; 3] {
        let v = self.bump.eval(r.as_f64());
        [T::lit(v[0]), T::lit(v[1]), T::lit(v[2])]
    }

    /// `β(r)`, i.e. `⟨x⟩` at `|x| = r`.
    pub fn beta(&self, r: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        if r <= one {
            return self.c;
        }
        if r >= two {
            return r;
        }
        let (i, t) = self.locate(r);
        hermite(
            t,
            T::lit(TABLE_STEP),
            self.beta[i],
            self.beta[i + 1],
            self.dbeta[i],
            self.dbeta[i + 1],
        )
    }

    /// Same as [`SmoothWeight::beta`].
    pub fn bracket(&self, r: T) -> T {
        self.beta(r)
    }

    pub fn d1(&self, r: T) -> T {
        if r <= T::one() {
            return T::zero();
        }
        if r >= T::lit(2.0) {
            return T::one();
        }
        let (i, t) = self.locate(r);
        let step = TABLE_STEP;
        let a0 = T::lit(self.bump.eval(1.0 + i as f64 * step)[0]);
        let a1 = T::lit(self.bump.eval(1.0 + (i + 1) as f64 * step)[0]);
        hermite(t, T::lit(step), self.dbeta[i], self.dbeta[i + 1], a0, a1)
    }

    pub fn d2(&self, r: T) -> T {
        self.bump_at(r)[0]
    }

    pub fn d3(&self, r: T) -> T {
        self.bump_at(r)[1]
    }

    pub fn d4(&self, r: T) -> T {
        self.bump_at(r)[2]
    }

    /// `Δg = (2/r)β′ + β″`.
    pub fn delta_g(&self, r: T) -> T {
        if r <= T::one() {
            return T::zero();
        }
        T::lit(2.0) / r * self.d1(r) + self.d2(r)
    }

    /// `Δ²g = (4/r)β‴ + β⁗`.
    pub fn delta2_g(&self, r: T) -> T {
        if r <= T::one() || r >= T::lit(2.0) {
            return T::zero();
        }
        T::lit(4.0) / r * self.d3(r) + self.d4(r)
    }
}

pub fn eval_weight_derivs<T: Real>(w: &SmoothWeight<T>, r: T) -> Result<WeightDerivs<T>> {
    if r < T::zero() || !r.is_finite() {
        return Err(Error::invalid(format!("radius {r} must be nonnegative")));
    }
    Ok(WeightDerivs {
        g: w.beta(r),
        g1: w.d1(r),
        delta_g: w.delta_g(r),
        delta2_g: w.delta2_g(r),
        radial_gij: w.d2(r),
    })
}

/// Derivatives of the alternative weight `⟨x⟩ = √(1+|x|²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketVariant<T> {
    pub g: T,
    pub delta_g: T,
    pub delta2_g: T,
}

pub fn eval_smooth_bracket_variant<T: Real>(r: T) -> BracketVariant<T> {
    let b = (T::one() + r * r).sqrt();
    BracketVariant {
        g: b,
        delta_g: T::lit(2.0) / b + T::one() / (b * b * b),
        delta2_g: -T::lit(15.0) / b.powi(7),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `F(λ ≥ a)`: 0 for `λ ≤ a/2`, 1 for `λ ≥ a`.
    Rising,
    /// `F(λ ≤ a) = 1 − F(λ ≥ a)`.
    Falling,
    /// `F(a ≤ λ ≤ b) = F(λ ≥ a) − F(λ ≥ b)`, `b > 4a`.
    Window,
}

/// How the argument is fed to the profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArgMap {
    #[default]
    Identity,
    /// Evaluate at `−λ` (e.g. `F(γ < −δ)`).
    Negate,
    /// Evaluate at `|λ|`.
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff<T: Real = f64> {
    pub kind: CutoffKind,
    pub a: T,
    pub b: T,
    #[serde(default)]
    pub arg: ArgMap,
    /// Odd smoothstep order (≥ 5).
    #[serde(default = "default_order")]
    pub order: u32,
}

fn default_order() -> u32 {
    7
}

pub fn smooth_char<T: Real>(kind: CutoffKind, a: T, b: Option<T>) -> Result<Cutoff<T>> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::invalid(format!("cutoff threshold a={a} must be positive")));
    }
    let b = match kind {
        CutoffKind::Window => {
            let b = b.ok_or_else(|| Error::invalid("window cutoff needs b"))?;
            if !(b > T::lit(4.0) * a) {
                return Err(Error::invalid(format!(
                    "window cutoff requires b > 4a (a={a}, b={b})"
                )));
            }
            b
        }
        _ => T::zero(),
    };
    Ok(Cutoff {
        kind,
        a,
        b,
        arg: ArgMap::Identity,
        order: 7,
    })
}

fn binom(n: u64, k: u64) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Smoothstep of order `2k+1` and two derivatives on `[0, 1]`.
pub fn smoothstep<T: Real>(order: u32, x: T) -> [T; 3] {
    if x <= T::zero() {
        return [T::zero(); 3];
    }
    if x >= T::one() {
        return [T::one(), T::zero(), T::zero()];
    }
    let k = ((order.max(5) - 1) / 2) as u64;
    let mut s = T::zero();
    for j in (0..=k).rev() {
        let c = binom(k + j, j) * binom(2 * k + 1, k - j) * if j % 2 == 0 { 1.0 } else { -1.0 };
        s = s * x + T::lit(c);
    }
    s *= x.powi(k as i32 + 1);
    let kk = T::lit(binom(2 * k + 1, k) * (k + 1) as f64);
    let y = T::one() - x;
    let d1 = kk * (x * y).powi(k as i32);
    let d2 = kk * T::lit(k as f64) * (x * y).powi(k as i32 - 1) * (T::one() - T::lit(2.0) * x);
    [s, d1, d2]
}

/// `j`-th derivative of the order-`2k+1` smoothstep at `x`.
pub fn smoothstep_derivative<T: Real>(order: u32, j: u32, x: T) -> T {
    if j == 0 {
        return smoothstep(order, x)[0];
    }
    if x <= T::zero() || x >= T::one() {
        return T::zero();
    }
    let k = ((order.max(5) - 1) / 2) as u64;
    let kk = binom(2 * k + 1, k) * (k + 1) as f64;
    // S′ = K Σ_i C(k,i)(−1)^i x^{k+i}; differentiate j−1 more times
    let mut acc = T::zero();
    for i in 0..=k {
        let p = k + i;
        let d = (j - 1) as u64;
        if d > p {
            continue;
        }
        let mut c = kk * binom(k, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
        for t in 0..d {
            c *= (p - t) as f64;
        }
        acc += T::lit(c) * x.powi((p - d) as i32);
    }
    acc
}

impl<T: Real> Cutoff<T> {
    pub fn rising(a: T) -> Self {
        smooth_char(CutoffKind::Rising, a, None).expect("positive threshold")
    }

    pub fn falling(a: T) -> Self {
        smooth_char(CutoffKind::Falling, a, None).expect("positive threshold")
    }

    pub fn window(a: T, b: T) -> Result<Self> {
        smooth_char(CutoffKind::Window, a, Some(b))
    }

    pub fn with_arg(mut self, arg: ArgMap) -> Self {
        self.arg = arg;
        self
    }

    pub fn with_order(mut self, order: u32) -> Result<Self> {
        if order < 5 || order.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "smoothstep order {order} must be odd and at least 5"
            )));
        }
        self.order = order;
        Ok(self)
    }

    fn rise(&self, a: T, l: T) -> [T; 3] {
        let two = T::lit(2.0);
        let x = two * l / a - T::one();
        let s = smoothstep(self.order, x);
        [s[0], s[1] * two / a, s[2] * (two / a) * (two / a)]
    }

    fn base(&self, l: T) -> [T; 3] {
        match self.kind {
            CutoffKind::Rising => self.rise(self.a, l),
            CutoffKind::Falling => {
                let r = self.rise(self.a, l);
                [T::one() - r[0], -r[1], -r[2]]
            }
            CutoffKind::Window => {
                let p = self.rise(self.a, l);
                let q = self.rise(self.b, l);
                [p[0] - q[0], p[1] - q[1], p[2] - q[2]]
            }
        }
    }

    /// `[F, F′, F″]` at `λ`.
    pub fn eval(&self, l: T) -> [T; 3] {
        match self.arg {
            ArgMap::Identity => self.base(l),
            ArgMap::Negate => {
                let v = self.base(-l);
                [v[0], -v[1], v[2]]
            }
            ArgMap::Abs => {
                let v = self.base(l.abs());
                let s = if l < T::zero() { -T::one() } else { T::one() };
                [v[0], s * v[1], v[2]]
            }
        }
    }

    pub fn value(&self, l: T) -> T {
        self.eval(l)[0]
    }

    pub fn d1(&self, l: T) -> T {
        self.eval(l)[1]
    }

    /// `d^j F/dλ^j` at `λ` for any `j ≥ 0`.
    pub fn derivative(&self, j: u32, l: T) -> T {
        let (x, sign) = match self.arg {
            ArgMap::Identity => (l, T::one()),
            ArgMap::Negate => (-l, if j.is_multiple_of(2) { T::one() } else { -T::one() }),
            ArgMap::Abs => {
                let neg = l < T::zero() && j % 2 == 1;
                (l.abs(), if neg { -T::one() } else { T::one() })
            }
        };
        let rise = |a: T| {
            let two = T::lit(2.0);
            let y = two * x / a - T::one();
            smoothstep_derivative(self.order, j, y) * (two / a).powi(j as i32)
        };
        let v = match self.kind {
            CutoffKind::Rising => rise(self.a),
            CutoffKind::Falling => {
                if j == 0 {
                    T::one() - rise(self.a)
                } else {
                    -rise(self.a)
                }
            }
            CutoffKind::Window => rise(self.a) - rise(self.b),
        };
        sign * v
    }

    /// Limits at `−∞` and `+∞`.
    pub fn limits(&self) -> (T, T) {
        let far = |l: T| self.value(l);
        let hi = match self.kind {
            CutoffKind::Window => self.b * T::lit(4.0),
            _ => self.a * T::lit(4.0),
        };
        (far(-hi), far(hi))
    }

    /// Intervals (in `λ`) containing the support of `F′`.
    pub fn derivative_support(&self) -> Vec<(T, T)> {
        let half = T::lit(0.5);
        let mut base = vec![(self.a * half, self.a)];
        if self.kind == CutoffKind::Window {
            base.push((self.b * half, self.b));
        }
        match self.arg {
            ArgMap::Identity => base,
            ArgMap::Negate => base.into_iter().map(|(l, h)| (-h, -l)).collect(),
            ArgMap::Abs => {
                let mut v: Vec<(T, T)> = base.iter().map(|&(l, h)| (-h, -l)).collect();
                v.extend(base);
                v
            }
        }
    }

    /// Cutoff with rescaled argument: `λ ↦ F(λ/c)`.
    pub fn rescaled(&self, c: T) -> Self {
        let mut out = *self;
        out.a = self.a * c;
        out.b = self.b * c;
        out
    }

    /// `(1/2π)∫F′(λ)e^{−iλs}dλ`, computed exactly on each polynomial
    /// transition piece.
    pub fn derivative_fourier(&self, s: f64) -> Complex64 {
        let k = ((self.order - 1) / 2) as u64;
        let kk = binom(2 * k + 1, k) * (k + 1) as f64;
        let mut total = Complex64::new(0.0, 0.0);
        let (a, b) = (self.a.as_f64(), self.b.as_f64());
        let mut pieces: Vec<(f64, f64)> = vec![(a, 1.0)];
        match self.kind {
            CutoffKind::Rising => {}
            CutoffKind::Falling => pieces[0].1 = -1.0,
            CutoffKind::Window => pieces.push((b, -1.0)),
        }
        for (thr, sign) in pieces {
            // rising piece on [thr/2, thr]: F′(λ) = S′(x)·(2/thr), x = 2λ/thr − 1
            let l0 = 0.5 * thr;
            let w = 0.5 * thr;
            let mut add = |ssign: f64, mirror: f64| {
                // substitute λ = mirror·(l0 + w x)
                let omega = s * w * mirror;
                let phase = Complex64::from_polar(1.0, -s * mirror * l0);
                let v = poly_fourier(k, kk, omega) * phase;
                total += v * (ssign / (2.0 * std::f64::consts::PI));
            };
            match self.arg {
                ArgMap::Identity => add(sign, 1.0),
                ArgMap::Negate => add(-sign, -1.0),
                ArgMap::Abs => {
                    add(sign, 1.0);
                    add(-sign, -1.0);
                }
            }
        }
        total
    }
}

/// `∫₀¹ K xᵏ(1−x)ᵏ e^{−iωx} dx`.
fn poly_fourier(k: u64, kk: f64, omega: f64) -> Complex64 {
    if omega.abs() <= 8.0 {
        let gl = crate::quad::gl16();
        let f = |x: f64| Complex64::from_polar(kk * (x * (1.0 - x)).powi(k as i32), -omega * x);
        return gl.integrate_c(0.0, 0.5, f) + gl.integrate_c(0.5, 1.0, f);
    }
    // coefficients of q(x) = K Σ C(k,i)(−1)^i x^{k+i}
    let deg = (2 * k) as usize;
    let mut coef = vec![0.0; deg + 1];
    for i in 0..=k {
        coef[(k + i) as usize] = kk * binom(k, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let e = Complex64::from_polar(1.0, -omega);
    let iw = Complex64::new(0.0, omega);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pw = iw;
    let mut fact = 1.0;
    for j in 0..=deg {
        if j > 0 {
            fact *= j as f64;
        }
        let at0 = coef[j] * fact;
        let mut at1 = 0.0;
        for (i, c) in coef.iter().enumerate().skip(j) {
            let mut f = 1.0;
            for t in 0..j {
                f *= (i - t) as f64;
            }
            at1 += c * f;
        }
        acc += (Complex64::new(at0, 0.0) - e * at1) / pw;
        pw *= iw;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorFieldKind<T: Real = f64> {
    Gamma0,
    SmoothedBeta,
    /// `g′(r) = r/√(r² + r^θ)`, `θ = 2 − ε`.
    SqrtSmoothed { theta: T },
    /// `A(x) = x·f(r)`, `f = (r^{1−ε}⟨r⟩^ε)^{−1}`.
    XfR { eps: T },
}

impl<T: Real> VectorFieldKind<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            VectorFieldKind::SqrtSmoothed { theta } if !(theta > T::one() && theta < T::lit(2.0)) => {
                Err(Error::invalid(format!("θ={theta} must lie in (1, 2)")))
            }
            VectorFieldKind::XfR { eps } if !(eps > T::zero() && eps < T::one()) => {
                Err(Error::invalid(format!("ε={eps} must lie in (0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzField<T> {
    pub f_radial: T,
    /// Radial commutator density acting on `|∂_r φ|²`.
    pub leading_commutator_density: T,
}

pub fn morawetz_field<T: Real>(kind: VectorFieldKind<T>, r: T) -> Result<MorawetzField<T>> {
    kind.validate()?;
    if r < T::zero() || !r.is_finite() {
        return Err(Error::invalid(format!("radius {r} must be nonnegative")));
    }
    let one = T::one();
    Ok(match kind {
        VectorFieldKind::Gamma0 => MorawetzField {
            f_radial: one,
            leading_commutator_density: T::zero(),
        },
        VectorFieldKind::SmoothedBeta => {
            let w = crate::radial_grid::standard_weight();
            let rf = r.as_f64();
            MorawetzField {
                f_radial: T::lit(w.d1(rf)),
                leading_commutator_density: T::lit(w.d2(rf)),
            }
        }
        VectorFieldKind::SqrtSmoothed { theta } => {
            let eps = T::lit(2.0) - theta;
            let half = T::lit(0.5);
            MorawetzField {
                f_radial: r / (r * r + r.powf(theta)).sqrt(),
                leading_commutator_density: half * eps * r.powf(-(one - half * eps))
                    * (r.powf(eps) + one).powf(-T::lit(1.5)),
            }
        }
        VectorFieldKind::XfR { eps } => {
            let b = (one + r * r).sqrt();
            MorawetzField {
                f_radial: one / (r.powf(one - eps) * b.powf(eps)),
                leading_commutator_density: eps / (r.powf(one - eps) * b.powf(T::lit(2.0) + eps)),
            }
        }
    })
}

fn write_rows(path: &Path, rows: impl Iterator<Item = [f64; 4]>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(f);
    let io = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["lambda", "value", "d1", "d2"]).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Cutoff samples on `[lo, hi]` as CSV (lambda, value, d1, d2).
pub fn write_cutoff_csv<T: Real>(c: &Cutoff<T>, lo: f64, hi: f64, n: usize, path: &Path) -> Result<()> {
    write_rows(
        path,
        (0..n).map(|i| {
            let l = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            let v = c.eval(T::lit(l));
            [l, v[0].as_f64(), v[1].as_f64(), v[2].as_f64()]
        }),
    )
}

/// Weight samples `β, β′, β″` on `[lo, hi]` as CSV.
pub fn write_weight_csv<T: Real>(w: &SmoothWeight<T>, lo: f64, hi: f64, n: usize, path: &Path) -> Result<()> {
    write_rows(
        path,
        (0..n).map(|i| {
            let l = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            let r = T::lit(l);
            [l, w.beta(r).as_f64(), w.d1(r).as_f64(), w.d2(r).as_f64()]
        }),
    )
}
