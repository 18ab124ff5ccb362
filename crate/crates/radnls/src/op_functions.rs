//! Functions of `γ` and of the dilation generator `A`.
//!
//! `γ` is handled through its flow `e^{iaγ}` (radial transport along
//! `β′∂_r`), either by quadrature of the Fourier representation or by a
//! spectral transform in the flow coordinate `y = B(r)`. `A` is diagonalized
//! on a logarithmic grid.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cutoffs_weights::{ArgMap, CutoffKind};
use crate::identity_lab::{function_of, spectral_norm, HermitianMatrix};
use crate::quad::{gl16, GaussLegendre};
use crate::radial_grid::{Grid, RadialField};
use crate::{Complex64, Cutoff, Error, Result, SmoothWeight};

const FOUR_PI: f64 = 4.0 * PI;
const TABLE_STEP: f64 = 1e-4;
/// Depth at which the tabulated `B` stops; below it the flow is frozen.
const B_FLOOR: f64 = -1e7;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Flow of the vector field `β′(r)∂_r`: `z(a, r) = B⁻¹(B(r) + a)`.
pub struct FlowMap {
    weight: Arc<SmoothWeight>,
    /// Ascending radii from the innermost tabulated node up to 2.
    r_tab: Vec<f64>,
    b_tab: Vec<f64>,
    gl: GaussLegendre,
    ymaps: Mutex<HashMap<(usize, u64, i64), Arc<YMap>>>,
}

impl std::fmt::Debug for FlowMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowMap")
            .field("r_lo", &self.r_tab[0])
            .field("b_lo", &self.b_tab[0])
            .finish()
    }
}

impl FlowMap {
    pub fn new(weight: Arc<SmoothWeight>) -> Self {
        let gl = GaussLegendre::new(8);
        let mut r_desc = vec![2.0];
        let mut b_desc = vec![0.0];
        let mut b = 0.0;
        let mut i = 1usize;
        loop {
            let hi = 2.0 - (i - 1) as f64 * TABLE_STEP;
            let lo = 2.0 - i as f64 * TABLE_STEP;
            if lo <= 1.0 {
                break;
            }
            let seg = gl.integrate(lo, hi, |s| 1.0 / weight.d1(s));
            if !seg.is_finite() {
                break;
            }
            b -= seg;
            r_desc.push(lo);
            b_desc.push(b);
            if b < B_FLOOR {
                break;
            }
            i += 1;
        }
        r_desc.reverse();
        b_desc.reverse();
        Self {
            weight,
            r_tab: r_desc,
            b_tab: b_desc,
            gl,
            ymaps: Mutex::new(HashMap::new()),
        }
    }

    pub fn weight(&self) -> &SmoothWeight {
        &self.weight
    }

    /// Innermost radius where `B` is tabulated.
    pub fn r_floor(&self) -> f64 {
        self.r_tab[0]
    }

    /// `B(r) = ∫₂^r ds/β′(s)`; `−∞` at or below the tabulated range.
    pub fn b(&self, r: f64) -> f64 {
        if r >= 2.0 {
            return r - 2.0;
        }
        if r < self.r_tab[0] {
            return f64::NEG_INFINITY;
        }
        let i = (((r - self.r_tab[0]) / TABLE_STEP).floor() as usize).min(self.r_tab.len() - 2);
        let r0 = self.r_tab[i];
        if r == r0 {
            return self.b_tab[i];
        }
        self.b_tab[i] + self.gl.integrate(r0, r, |s| 1.0 / self.weight.d1(s))
    }

    /// Inverse of `B`; saturates at the innermost tabulated radius.
    pub fn b_inv(&self, y: f64) -> f64 {
        if y >= 0.0 {
            return y + 2.0;
        }
        if y <= self.b_tab[0] {
            return self.r_tab[0];
        }
        let i = self.b_tab.partition_point(|&b| b <= y).clamp(1, self.b_tab.len() - 1) - 1;
        let (lo, hi) = (self.r_tab[i], self.r_tab[i + 1]);
        let (b0, b1) = (self.b_tab[i], self.b_tab[i + 1]);
        let mut r = lo + (hi - lo) * (y - b0) / (b1 - b0);
        for _ in 0..6 {
            let err = self.b(r) - y;
            let step = err * self.weight.d1(r);
            let next = (r - step).clamp(lo, hi);
            if (next - r).abs() <= 1e-15 * r {
                r = next;
                break;
            }
            r = next;
        }
        r
    }

    /// Transported radius `z(a, r)`.
    pub fn z(&self, a: f64, r: f64) -> f64 {
        if r <= 1.0 {
            return r;
        }
        if r >= 2.0 && r + a >= 2.0 {
            return r + a;
        }
        let b = self.b(r);
        if !b.is_finite() {
            return r;
        }
        self.b_inv(b + a)
    }
}

/// Shared flow for the standard weight.
pub fn standard_flow() -> Arc<FlowMap> {
    static FLOW: OnceLock<Arc<FlowMap>> = OnceLock::new();
    FLOW.get_or_init(|| Arc::new(FlowMap::new(Arc::new(SmoothWeight::standard()))))
        .clone()
}

pub fn flow_z(fm: &FlowMap, a: f64, r: f64) -> f64 {
    fm.z(a, r.max(0.0))
}

/// Adds `coef · (U(a)u)` into `out`.
fn transport_into(fm: &FlowMap, grid: &Grid, u: &[Complex64], a: f64, coef: Complex64, inner_b: f64, out: &mut [Complex64]) {
    let w = fm.weight();
    for (j, &r) in grid.r.iter().enumerate() {
        if r <= 1.0 {
            out[j] += coef * u[j];
            continue;
        }
        if r >= 2.0 && r + a >= 2.0 {
            out[j] += coef * grid.sample(u, r + a);
            continue;
        }
        let b = fm.b(r);
        if !b.is_finite() {
            out[j] += coef * u[j];
            continue;
        }
        let target = b + a;
        if target < inner_b {
            continue;
        }
        let z = fm.b_inv(target);
        let ratio = (w.d1(z) / w.d1(r)).sqrt();
        if ratio.is_finite() {
            out[j] += coef * grid.sample(u, z) * ratio;
        }
    }
}

/// `B` just below the innermost nonzero sample of `u`, used to skip
/// transports that only see zeros.
fn inner_support_b(fm: &FlowMap, grid: &Grid, u: &[Complex64]) -> f64 {
    let peak = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let first = u
        .iter()
        .position(|v| v.norm() > 1e-13 * peak)
        .unwrap_or(u.len());
    let r = (first as f64 - 8.0) * grid.h;
    if r <= 1.0 {
        f64::NEG_INFINITY
    } else {
        fm.b(r)
    }
}

#[derive(Clone, Debug)]
pub struct GroupOutput {
    pub field: RadialField,
    /// Relative mass lost through the outer boundary.
    pub lost_mass: f64,
    pub boundary_flag: bool,
}

/// `e^{iaγ} f`.
pub fn gamma_group(fm: &FlowMap, a: f64, f: &RadialField) -> RadialField {
    gamma_group_checked(fm, a, f).field
}

pub fn gamma_group_checked(fm: &FlowMap, a: f64, f: &RadialField) -> GroupOutput {
    let mut out = vec![zero(); f.u.len()];
    if a == 0.0 {
        out.copy_from_slice(&f.u);
    } else {
        let ib = inner_support_b(fm, &f.grid, &f.u);
        transport_into(fm, &f.grid, &f.u, a, Complex64::new(1.0, 0.0), ib, &mut out);
    }
    let field = f.with_u(out);
    let m0 = f.mass();
    let lost = if m0 > 0.0 { ((m0 - field.mass()) / m0).max(0.0) } else { 0.0 };
    let boundary_flag = lost > 1e-8 || field.boundary_flag();
    GroupOutput {
        field,
        lost_mass: lost,
        boundary_flag,
    }
}

/// Options for the Fourier-quadrature evaluation of `c(γ/τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Bound on `∫_{|s|>S} |ĉ(s)| ds`.
    pub tail_tol: f64,
    pub max_nodes: usize,
    /// Relative spectral amplitude below which the field's `γ`-content is ignored.
    pub spectral_floor: f64,
    /// Fixed window `S` (in `s`); chosen from `tail_tol` when absent.
    pub s_max: Option<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-8,
            max_nodes: 1 << 16,
            spectral_floor: 1e-7,
            s_max: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureReport {
    pub field: RadialField,
    pub nodes: usize,
    pub s_max: f64,
    pub ds: f64,
    /// Bound on the neglected tail of the representation.
    pub tail: f64,
}

fn pieces(c: &Cutoff) -> Vec<(f64, f64)> {
    // (transition width, multiplicity) per transition
    let mut w = vec![0.5 * c.a];
    if c.kind == CutoffKind::Window {
        w.push(0.5 * c.b);
    }
    let mult = if c.arg == ArgMap::Abs { 2.0 } else { 1.0 };
    w.into_iter().map(|w| (w, mult)).collect()
}

/// `(1/2π)|∫₀¹ S′(x) e^{−iωx} dx|` bound for large `ω`: `K k!/(π ω^{k+1})`.
fn asymptotic_coeff(order: u32) -> (f64, i32) {
    let k = ((order - 1) / 2) as i32;
    let mut kk = 1.0;
    for i in 0..k {
        kk *= (2 * k + 1 - i) as f64 / (i + 1) as f64;
    }
    kk *= (k + 1) as f64;
    let fact: f64 = (1..=k).map(|v| v as f64).product();
    (kk * fact / PI, k + 1)
}

/// `∫_{|s|>S} |ĉ′(s)|·|s|^{p} ds` for `p < k`, by quadrature over a finite
/// stretch plus the asymptotic bound beyond it.
fn weighted_tail(c: &Cutoff, s: f64, p: f64) -> f64 {
    let (coef, decay) = asymptotic_coeff(c.order);
    // rising(2) has a unit-width transition: |ĝ(ω)| = |P(ω)|/2π
    let unit = Cutoff::rising(2.0).with_order(c.order).expect("valid order");
    let gl = gl16();
    let mut total = 0.0;
    for (w, mult) in pieces(c) {
        let lo = w * s;
        let far = 8.0 * lo + 64.0;
        let panels = ((far - lo) / 2.0).ceil() as usize;
        let step = (far - lo) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let a = lo + i as f64 * step;
            acc += gl.integrate(a, a + step, |x| unit.derivative_fourier(x).norm() * x.powf(p));
        }
        let e = decay as f64 - p - 1.0;
        acc += coef * far.powf(-e) / e;
        // back from ω = w·s to s
        total += 2.0 * mult * acc * w.powf(-p - 1.0);
    }
    total
}

/// Tail of the Fourier representation of `c` beyond `|s| = S`.
pub fn representation_tail(c: &Cutoff, s: f64) -> f64 {
    weighted_tail(c, s, -1.0)
}

/// Upper estimate of the `γ` spectral radius of `f`.
pub fn gamma_spectral_bound(f: &RadialField, floor: f64) -> f64 {
    let c = f.sine_coeffs();
    let total: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut kmax = 0.0;
    for (v, &k) in c.iter().zip(&f.grid.k).rev() {
        acc += v.norm_sqr();
        if acc > floor * floor * total {
            kmax = k;
            break;
        }
    }
    1.05 * kmax + 0.5
}

/// `c(γ/τ) f` by quadrature of `c(λ) = ½(c(∞)+c(−∞)) + p.v.∫ĉ′(s)/(is) e^{iλs} ds`.
pub fn func_of_gamma(fm: &FlowMap, c: &Cutoff, tau: f64, f: &RadialField) -> Result<RadialField> {
    Ok(func_of_gamma_quadrature(fm, c, tau, f, &QuadratureOptions::default())?.field)
}

pub fn func_of_gamma_quadrature(
    fm: &FlowMap,
    c: &Cutoff,
    tau: f64,
    f: &RadialField,
    opts: &QuadratureOptions,
) -> Result<QuadratureReport> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau={tau} must be positive")));
    }
    let (lo, hi) = c.limits();
    let mean = 0.5 * (lo + hi);
    let lam = gamma_spectral_bound(f, opts.spectral_floor) / tau;
    let mu = c
        .derivative_support()
        .iter()
        .map(|&(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let ds = 2.0 * PI / (1.05 * (lam + mu));
    let s_max = match opts.s_max {
        Some(s) => s,
        None => {
            let mut s = 8.0 * ds;
            while representation_tail(c, s) > opts.tail_tol {
                s *= 1.25;
                if s / ds > opts.max_nodes as f64 {
                    break;
                }
            }
            s
        }
    };
    let tail = representation_tail(c, s_max);
    let half = (s_max / ds).ceil() as usize;
    if 2 * half > opts.max_nodes || tail > opts.tail_tol {
        return Err(Error::numerical(format!(
            "tail bound {tail:.3e} not reached with {} nodes (S={s_max:.1}, Δs={ds:.3e})",
            2 * half
        )));
    }
    let nodes: Vec<(f64, Complex64)> = (0..2 * half)
        .map(|i| {
            let s = (i as f64 - half as f64 + 0.5) * ds;
            let w = c.derivative_fourier(s) / Complex64::new(0.0, s) * ds;
            (s / tau, w)
        })
        .collect();
    let ib = inner_support_b(fm, &f.grid, &f.u);
    const CHUNK: usize = 32;
    let partial: Vec<Vec<Complex64>> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![zero(); f.u.len()];
            for &(a, w) in chunk {
                transport_into(fm, &f.grid, &f.u, a, w, ib, &mut acc);
            }
            acc
        })
        .collect();
    let mut u = tree_sum(&partial);
    for (o, v) in u.iter_mut().zip(&f.u) {
        *o += v * mean;
    }
    Ok(QuadratureReport {
        field: f.with_u(u),
        nodes: nodes.len(),
        s_max,
        ds,
        tail,
    })
}

fn tree_sum(parts: &[Vec<Complex64>]) -> Vec<Complex64> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        n => {
            let (a, b) = parts.split_at(n / 2);
            let mut l = tree_sum(a);
            let r = tree_sum(b);
            for (x, y) in l.iter_mut().zip(&r) {
                *x += y;
            }
            l
        }
    }
}

/// Options for the flow-coordinate spectral evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpectralOptions {
    /// Padding below the input support, in units of `1/(τ·width)`.
    pub pad: f64,
    /// Deepest flow coordinate represented.
    pub depth_cap: f64,
}

impl Default for FlowSpectralOptions {
    fn default() -> Self {
        Self {
            pad: 32.0,
            depth_cap: 4000.0,
        }
    }
}

/// Sampling tables for the uniform flow-coordinate grid `y_i = i·h − 2`.
struct YMap {
    i_lo: i64,
    /// For nodes with `y < 0`: `r(y_i)` and `√β′(r(y_i))`.
    r_in: Vec<f64>,
    s_in: Vec<f64>,
    /// For grid nodes in `(1, 2)`: fractional y-index and `√β′(r_j)`.
    back: Vec<(usize, f64, f64)>,
}

impl FlowMap {
    fn ymap(&self, grid: &Grid, depth: f64) -> Arc<YMap> {
        let h = grid.h;
        let i_lo = -((depth / h).ceil() as i64);
        let key = (grid.n(), grid.r_max().to_bits(), i_lo);
        if let Some(m) = self.ymaps.lock().expect("ymap cache").get(&key) {
            return m.clone();
        }
        let i2 = (2.0 / h).ceil() as i64;
        let w = self.weight();
        let (r_in, s_in): (Vec<f64>, Vec<f64>) = (i_lo..i2)
            .into_par_iter()
            .map(|i| {
                let y = i as f64 * h - 2.0;
                let r = self.b_inv(y);
                (r, w.d1(r).sqrt())
            })
            .unzip();
        let back = grid
            .r
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 1.0 && r < 2.0)
            .map(|(j, &r)| {
                let y = self.b(r);
                let pos = if y.is_finite() { (y + 2.0) / h - i_lo as f64 } else { f64::NEG_INFINITY };
                (j, pos, w.d1(r).sqrt())
            })
            .collect();
        let m = Arc::new(YMap {
            i_lo,
            r_in,
            s_in,
            back,
        });
        self.ymaps.lock().expect("ymap cache").insert(key, m.clone());
        m
    }
}

fn lagrange8(v: &[Complex64], pos: f64) -> Complex64 {
    let fl = pos.floor();
    let frac = pos - fl;
    let base = fl as isize;
    let at = |i: isize| -> Complex64 {
        if i < 0 || i as usize >= v.len() {
            zero()
        } else {
            v[i as usize]
        }
    };
    if frac == 0.0 {
        return at(base);
    }
    const W: [f64; 8] = [1.0, -7.0, 21.0, -35.0, 35.0, -21.0, 7.0, -1.0];
    let mut num = zero();
    let mut den = 0.0;
    for (m, w) in W.iter().enumerate() {
        let c = w / (frac + 3.0 - m as f64);
        num += at(base - 3 + m as isize) * c;
        den += c;
    }
    num / den
}

/// `m(γ) f` for a bounded function `m` of `γ`, via an FFT in the flow
/// coordinate `y = B(r)` where `γ = −i∂_y`. `width` is the smallest scale
/// (in `γ`) on which `m` varies and sets the padding below the support.
pub fn gamma_multiplier(
    fm: &FlowMap,
    f: &RadialField,
    m: impl Fn(f64) -> f64 + Sync,
    width: f64,
    opts: &FlowSpectralOptions,
) -> RadialField {
    let grid = &f.grid;
    let h = grid.h;
    let total = f.mass();
    if total == 0.0 {
        return f.clone();
    }
    // innermost radius carrying mass above 1e-14 of the total
    let mut acc = 0.0;
    let mut r_in = grid.r_max();
    for (v, &r) in f.u.iter().zip(&grid.r) {
        acc += v.norm_sqr() * FOUR_PI * h;
        if acc > 1e-14 * total {
            r_in = r;
            break;
        }
    }
    let y_in = if r_in > 1.0 { fm.b(r_in - 8.0 * h) } else { f64::NEG_INFINITY };
    let need = if y_in.is_finite() { (-y_in).max(0.0) } else { opts.depth_cap };
    let depth = (need + opts.pad / width.max(1e-12)).min(opts.depth_cap).max(2.0 + 8.0 * h);
    // quantize the depth so the sampling tables are reused
    let depth = 2f64.powf(depth.log2().ceil()).min(opts.depth_cap.max(2.0 + 8.0 * h));
    let ym = fm.ymap(grid, depth);
    let n = grid.n();
    let n_in = ym.r_in.len();
    let n_y = n_in + n - (n_in as i64 + ym.i_lo).max(0) as usize;
    // y-nodes: i = i_lo .. i_lo + n_y; exterior node i ↔ grid index i−1
    let len = (2 * n_y).next_power_of_two();
    let mut buf = vec![zero(); len];
    for (k, b) in buf.iter_mut().enumerate().take(n_y) {
        let i = ym.i_lo + k as i64;
        *b = if k < n_in {
            let r = ym.r_in[k];
            grid.sample(&f.u, r) * ym.s_in[k]
        } else {
            f.u[(i - 1) as usize]
        };
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let dk = 2.0 * PI / (len as f64 * h);
    let scale = 1.0 / len as f64;
    buf.par_iter_mut().enumerate().for_each(|(k, v)| {
        let kk = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 } * dk;
        *v *= m(kk) * scale;
    });
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = m(0.0);
    let mut out: Vec<Complex64> = f.u.iter().map(|v| v * c0).collect();
    for (j, o) in out.iter_mut().enumerate() {
        let r = grid.r[j];
        if r >= 2.0 {
            let k = (j as i64 + 1 - ym.i_lo) as usize;
            *o = if k < n_y { buf[k] } else { zero() };
        }
    }
    for &(j, pos, s) in &ym.back {
        if pos.is_finite() && pos >= 0.0 && s > 0.0 {
            out[j] = lagrange8(&buf[..n_y], pos) / s;
        }
    }
    f.with_u(out)
}

/// `c(γ/τ) f` through [`gamma_multiplier`].
pub fn func_of_gamma_spectral(fm: &FlowMap, c: &Cutoff, tau: f64, f: &RadialField) -> Result<RadialField> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau={tau} must be positive")));
    }
    let width = 0.5 * c.a * tau;
    Ok(gamma_multiplier(
        fm,
        f,
        |g| c.value(g / tau),
        width,
        &FlowSpectralOptions::default(),
    ))
}

/// Logarithmic grid `t = ln r` used to diagonalize `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_log: usize,
}

impl LogGridSpec {
    /// `[1e-3·r_max, r_max]` with `2n` points.
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            r_min: 1e-3 * grid.r_max(),
            r_max: grid.r_max(),
            n_log: 2 * grid.n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.n_log >= 16) {
            return Err(Error::invalid(format!("bad log grid {self:?}")));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.r_max / self.r_min).ln() / self.n_log as f64
    }

    /// Signed Mellin frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_log;
        let dl = 2.0 * PI / (n as f64 * self.dt());
        (0..n)
            .map(|k| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * dl)
            .collect()
    }
}

/// Samples of `m(λ)` on the Mellin frequency grid.
#[derive(Clone, Debug)]
pub struct SpectralMultiplierA {
    pub log: LogGridSpec,
    pub samples: Vec<Complex64>,
}

impl SpectralMultiplierA {
    pub fn from_fn(log: LogGridSpec, m: impl Fn(f64) -> Complex64) -> Self {
        let samples = log.frequencies().into_iter().map(m).collect();
        Self { log, samples }
    }

    pub fn from_real(log: LogGridSpec, m: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(log, |l| Complex64::new(m(l), 0.0))
    }

    pub fn sup(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `e^{3t/2}φ(e^t)` on the log grid and its spectrum.
#[derive(Clone, Debug)]
pub struct MellinSpectrum {
    pub log: LogGridSpec,
    pub samples: Vec<Complex64>,
    pub spectrum: Vec<Complex64>,
}

pub fn mellin_forward(f: &RadialField, log: LogGridSpec) -> Result<MellinSpectrum> {
    log.validate()?;
    let total = f.mass();
    if total > 0.0 {
        let inside = f.mass_in(log.r_min, log.r_max);
        if inside < (1.0 - 1e-6) * total {
            return Err(Error::invalid(format!(
                "only {:.8} of the mass lies in the log window [{}, {}]",
                inside / total,
                log.r_min,
                log.r_max
            )));
        }
    }
    let dt = log.dt();
    let t0 = log.r_min.ln();
    let samples: Vec<Complex64> = (0..log.n_log)
        .into_par_iter()
        .map(|i| {
            let r = (t0 + i as f64 * dt).exp();
            f.grid.sample(&f.u, r) * r.sqrt()
        })
        .collect();
    let mut spectrum = samples.clone();
    FftPlanner::<f64>::new()
        .plan_fft_forward(log.n_log)
        .process(&mut spectrum);
    Ok(MellinSpectrum {
        log,
        samples,
        spectrum,
    })
}

/// `4π ∫|e^{3t/2}φ(e^t)|² dt`, equal to the mass for fields inside the window.
pub fn mellin_norm_sq(s: &MellinSpectrum) -> f64 {
    FOUR_PI * s.log.dt() * s.samples.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

/// Band-limited reconstruction of the log-grid function at the grid radii.
fn mellin_back(grid: &Grid, log: LogGridSpec, spec: &[Complex64]) -> Vec<Complex64> {
    let n = log.n_log;
    let dt = log.dt();
    let t0 = log.r_min.ln();
    let period = n as f64 * dt;
    let inv = 1.0 / n as f64;
    grid.r
        .par_iter()
        .map(|&r| {
            if r < log.r_min || r >= log.r_max {
                return zero();
            }
            let x = 2.0 * PI * (r.ln() - t0) / period;
            let rho = Complex64::from_polar(1.0, x);
            let mut acc = spec[0];
            let mut pw = rho;
            for k in 1..n / 2 {
                acc += spec[k] * pw + spec[n - k] * pw.conj();
                pw *= rho;
            }
            // Nyquist term split symmetrically
            acc += spec[n / 2] * (0.5 * (pw + pw.conj()));
            acc * inv / r.sqrt()
        })
        .collect()
}

/// `m(A) f` via the log-grid Mellin transform.
pub fn func_of_dilation(m: &SpectralMultiplierA, f: &RadialField) -> Result<RadialField> {
    let mut s = mellin_forward(f, m.log)?;
    for (v, w) in s.spectrum.iter_mut().zip(&m.samples) {
        *v *= w;
    }
    let u = mellin_back(&f.grid, m.log, &s.spectrum);
    Ok(f.with_u(u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// `P_M^±(A) = ½(1 ± tanh((A ∓ M)/R))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TanhProjection {
    pub m: f64,
    pub r: f64,
    pub sign: Direction,
}

impl TanhProjection {
    pub fn new(m: f64, r: f64, sign: Direction) -> Result<Self> {
        if !(m.is_finite() && r.is_finite() && r >= 2.0 && r <= m) {
            return Err(Error::invalid(format!(
                "tanh projection needs 2 ≤ R ≤ M (M={m}, R={r})"
            )));
        }
        Ok(Self { m, r, sign })
    }

    /// Width `R = √M`.
    pub fn with_default_width(m: f64, sign: Direction) -> Result<Self> {
        Self::new(m, m.max(0.0).sqrt(), sign)
    }

    pub fn value(&self, l: f64) -> f64 {
        match self.sign {
            Direction::Outgoing => 0.5 * (1.0 + ((l - self.m) / self.r).tanh()),
            Direction::Incoming => 0.5 * (1.0 - ((l + self.m) / self.r).tanh()),
        }
    }
}

pub fn tanh_projection_multiplier(p: &TanhProjection, log: LogGridSpec) -> SpectralMultiplierA {
    SpectralMultiplierA::from_real(log, |l| p.value(l))
}

/// Band filter equal to 1 on `|λ| ≤ N/2` and 0 on `|λ| ≥ N`, with a
/// `C^∞` transition so its kernel in `t = ln r` decays faster than any power.
pub fn band_multiplier(n_band: f64, log: LogGridSpec) -> SpectralMultiplierA {
    let s = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    SpectralMultiplierA::from_real(log, |l| {
        let x = 2.0 * l.abs() / n_band - 1.0;
        let up = s(x) / (s(x) + s(1.0 - x));
        1.0 - up
    })
}

/// `‖P⁺_{M,R}(A)(fg)‖ / ‖fg‖` after band-limiting `f` and `g` to `|λ| ≤ N`.
/// The product is formed on the log grid, where the band-limited factors are
/// represented exactly.
pub fn highlow_leakage(n_band: f64, m: f64, r: f64, f: &RadialField, g: &RadialField) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::invalid("leakage of fields on different grids"));
    }
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    let p = TanhProjection::new(m, r, Direction::Outgoing)?;
    let log = LogGridSpec::for_grid(&f.grid);
    let band = band_multiplier(n_band, log);
    let n = log.n_log;
    let mut planner = FftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(n);
    let mut filtered = Vec::new();
    for h in [f, g] {
        let mut s = mellin_forward(h, log)?;
        let before: f64 = s.spectrum.iter().map(|v| v.norm_sqr()).sum();
        for (v, w) in s.spectrum.iter_mut().zip(&band.samples) {
            *v *= w / n as f64;
        }
        let after: f64 = s.spectrum.iter().map(|v| v.norm_sqr()).sum::<f64>() * (n * n) as f64;
        if after < 1e-3 * before {
            return Err(Error::invalid("band filter leaves less than 1e-3 of the mass"));
        }
        inv.process(&mut s.spectrum);
        filtered.push(s.spectrum);
    }
    let dt = log.dt();
    let t0 = log.r_min.ln();
    // e^{3t/2}(φ_f φ_g)(e^t) = v_f v_g e^{−3t/2}
    let mut prod: Vec<Complex64> = filtered[0]
        .iter()
        .zip(&filtered[1])
        .enumerate()
        .map(|(i, (a, b))| a * b * (-1.5 * (t0 + i as f64 * dt)).exp())
        .collect();
    planner.plan_fft_forward(n).process(&mut prod);
    let freqs = log.frequencies();
    let total: f64 = prod.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let out: f64 = prod
        .iter()
        .zip(&freqs)
        .map(|(v, &l)| v.norm_sqr() * p.value(l).powi(2))
        .sum();
    Ok((out / total).sqrt())
}

/// Relative difference between the Mellin spectrum of `fg` and the cyclic
/// convolution of the spectrum of `f` with the spectrum of `g` continued to
/// `λ − 3i/2`.
pub fn mellin_product_residual(f: &RadialField, g: &RadialField, log: LogGridSpec) -> Result<f64> {
    let sf = mellin_forward(f, log)?;
    let sg = mellin_forward(g, log)?;
    let prod = f.with_u(
        f.u.iter()
            .zip(&g.u)
            .zip(&f.grid.r)
            .map(|((a, b), r)| a * b / r)
            .collect(),
    );
    let sp = mellin_forward(&prod, log)?;
    let n = log.n_log;
    let dt = log.dt();
    let t0 = log.r_min.ln();
    // continued spectrum of g: transform of e^{−3t/2}·(e^{3t/2}φ_g)
    let mut shifted: Vec<Complex64> = sg
        .samples
        .iter()
        .enumerate()
        .map(|(i, v)| v * (-1.5 * (t0 + i as f64 * dt)).exp())
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut shifted);
    // cyclic convolution through the inverse transform
    let mut a = sf.spectrum.clone();
    let mut b = shifted;
    let inv = planner.plan_fft_inverse(n);
    inv.process(&mut a);
    inv.process(&mut b);
    let mut c: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y / (n as f64 * n as f64)).collect();
    planner.plan_fft_forward(n).process(&mut c);
    let num: f64 = c.iter().zip(&sp.spectrum).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = sp.spectrum.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// Terms of `[B, f(A)] = Σ_{k<n} (1/k!) f^{(k)}(A) ad_A^k(B) + R_n`.
#[derive(Clone, Debug)]
pub struct ExpansionReport {
    pub terms: Vec<DMatrix<Complex64>>,
    pub remainder: DMatrix<Complex64>,
    pub remainder_norm: f64,
    /// `(1/n!)‖ad_A^n(B)‖ ∫|f̂||s|^n ds`.
    pub bound: f64,
    pub ad_norm: f64,
    pub moment: f64,
    /// `bound − remainder_norm`.
    pub slack: f64,
}

/// `∫|f̂(s)||s|^n ds` for the decaying part of `c`.
pub fn fourier_moment(c: &Cutoff, n: u32) -> Result<f64> {
    let k = (c.order - 1) / 2;
    if n > k {
        return Err(Error::numerical(format!(
            "moment of order {n} diverges for a smoothstep of order {}",
            c.order
        )));
    }
    let p = n as f64 - 1.0;
    let mu = c
        .derivative_support()
        .iter()
        .map(|&(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let wmin = pieces(c).iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let far = 2000.0 / wmin;
    let panel = (PI / (2.0 * mu)).min(1.0 / wmin);
    let gl = gl16();
    let mut acc = 0.0;
    let mut lo = 0.0;
    while lo < far {
        let hi = (lo + panel).min(far);
        acc += gl.integrate(lo, hi, |s| {
            (c.derivative_fourier(s).norm() + c.derivative_fourier(-s).norm()) * s.powf(p)
        });
        lo = hi;
    }
    Ok(acc + weighted_tail(c, far, p))
}

pub fn commutator_expansion_matrix(
    b: &HermitianMatrix,
    a: &HermitianMatrix,
    c: &Cutoff,
    n: u32,
) -> Result<ExpansionReport> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::invalid("matrix dimensions differ"));
    }
    if d > 64 {
        return Err(Error::invalid(format!("dimension {d} exceeds 64")));
    }
    if n == 0 {
        return Err(Error::invalid("expansion order must be at least 1"));
    }
    let moment = fourier_moment(c, n)?;
    let am = &a.m;
    let bm = &b.m;
    let fa = function_of(a, |l| c.value(l));
    let exact = bm * &fa - &fa * bm;
    let mut ad = bm.clone();
    let mut terms = Vec::new();
    let mut sum = DMatrix::<Complex64>::zeros(d, d);
    let mut fact = 1.0;
    for kk in 1..n {
        ad = &ad * am - am * &ad;
        fact *= kk as f64;
        let fk = function_of(a, |l| c.derivative(kk, l));
        let t = (&fk * &ad).map(|v| v / fact);
        sum += &t;
        terms.push(t);
    }
    let ad_n = &ad * am - am * &ad;
    let fact_n = fact * n as f64;
    let remainder = exact - sum;
    let remainder_norm = spectral_norm(&remainder);
    let ad_norm = spectral_norm(&ad_n);
    let bound = ad_norm * moment / fact_n;
    Ok(ExpansionReport {
        terms,
        remainder,
        remainder_norm,
        bound,
        ad_norm,
        moment,
        slack: bound - remainder_norm,
    })
}

/// Matrix realization of `i[P², tanh(A/R)]` and `P·G(A)·P` with
/// `G(λ) = 2 sin(2/R)/(cosh(2λ/R) + cos(2/R))`, on a periodic grid in the
/// momentum log-variable `σ = ln|p|` of dimension `d` and length `span`.
#[derive(Clone, Debug)]
pub struct TanhCommutatorForms {
    pub lhs: DMatrix<Complex64>,
    pub rhs: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
}

pub fn tanh_commutator_forms(d: usize, r: f64, span: f64) -> Result<TanhCommutatorForms> {
    if !(2..=64).contains(&d) {
        return Err(Error::invalid(format!("dimension {d} outside [2, 64]")));
    }
    if !(r >= 2.0 && span > 0.0) {
        return Err(Error::invalid("need R ≥ 2 and a positive span"));
    }
    let ds = span / d as f64;
    let sigma: Vec<f64> = (0..d).map(|i| -0.5 * span + i as f64 * ds).collect();
    // A_σ = −i d/dσ = F* diag(κ) F; A = −A_σ on the momentum side
    let kappa: Vec<f64> = (0..d)
        .map(|k| {
            let kk = if k <= d / 2 { k as f64 } else { k as f64 - d as f64 };
            if d.is_multiple_of(2) && k == d / 2 {
                0.0
            } else {
                2.0 * PI * kk / span
            }
        })
        .collect();
    let fmat = DMatrix::from_fn(d, d, |k, j| {
        Complex64::from_polar(1.0 / (d as f64).sqrt(), -2.0 * PI * (k * j) as f64 / d as f64)
    });
    let fstar = fmat.adjoint();
    let fun = |g: &dyn Fn(f64) -> f64| {
        let diag = DMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(g(kappa[i]), 0.0) } else { zero() });
        &fstar * diag * &fmat
    };
    let t = fun(&|k: f64| (-k / r).tanh());
    let gmat = fun(&|k: f64| 2.0 * (2.0 / r).sin() / ((2.0 * k / r).cosh() + (2.0 / r).cos()));
    let p = DMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(sigma[i].exp(), 0.0) } else { zero() });
    let p2 = &p * &p;
    let lhs = (&p2 * &t - &t * &p2) * Complex64::new(0.0, 1.0);
    let rhs = &p * gmat * &p;
    Ok(TanhCommutatorForms { lhs, rhs, sigma })
}

/// `v* M v`.
pub fn quadratic_form(m: &DMatrix<Complex64>, v: &[Complex64]) -> Complex64 {
    let mut s = zero();
    for i in 0..v.len() {
        let mut row = zero();
        for j in 0..v.len() {
            row += m[(i, j)] * v[j];
        }
        s += v[i].conj() * row;
    }
    s
}
