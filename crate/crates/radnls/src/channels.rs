//! Free-channel extraction and the asymptotic decomposition diagnostics:
//! weakly bounded remainder, spreading rates, zero-frequency mass,
//! phase-space maps and self-similar rescaling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoffs_weights::smoothstep;
use crate::dynamics::{free_evolve, Trajectory};
use crate::fit::{loglog_fit, tail_quartile, LineFit};
use crate::op_functions::{
    func_of_dilation, gamma_multiplier, standard_flow, FlowSpectralOptions, LogGridSpec, SpectralMultiplierA,
};
use crate::operators::apply_dilation;
use crate::radial_grid::{inner, standard_weight, RadialField};
use crate::{Complex64, Cutoff, Error, Result};

/// Mass of `φ_wb` below which verdicts are suppressed.
pub const MEASUREMENT_FLOOR: f64 = 1e-3;

fn l2(f: &RadialField) -> f64 {
    f.mass().sqrt()
}

/// `‖p²(1+p²)^{-1/2} f‖`.
pub fn h1_surrogate(f: &RadialField) -> f64 {
    l2(&f.apply_real_multiplier(|k| k * k / (1.0 + k * k).sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyEntry {
    pub t_i: f64,
    pub t_j: f64,
    pub l2: f64,
    pub h1_surrogate: f64,
}

#[derive(Clone, Debug)]
pub struct ChannelResult {
    /// `ω` at the last sample time.
    pub omega: RadialField,
    /// `ω(t_k)` for every sample.
    pub samples: Vec<RadialField>,
    pub times: Vec<f64>,
    pub cauchy_table: Vec<CauchyEntry>,
    pub alpha0: f64,
    pub cutoff: Cutoff,
    /// `‖ω(t_{n-1}) − ω(t_n)‖ / ‖φ₀‖`.
    pub late_gap: f64,
    pub tolerance: f64,
    pub accepted: bool,
}

/// JSON view of a [`ChannelResult`] without the fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub times: Vec<f64>,
    pub alpha0: f64,
    pub cutoff: Cutoff,
    pub cauchy_table: Vec<CauchyEntry>,
    pub late_gap: f64,
    pub tolerance: f64,
    pub accepted: bool,
    pub omega_mass: f64,
    /// `(ω, |p|ω)`, the free-part value of the γ-limit.
    pub omega_momentum: f64,
}

impl ChannelResult {
    /// Distance between `ω(t_i)` and `ω(t_j)` when both were sampled.
    pub fn gap(&self, t_i: f64, t_j: f64) -> Option<&CauchyEntry> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        self.cauchy_table
            .iter()
            .find(|e| (close(e.t_i, t_i) && close(e.t_j, t_j)) || (close(e.t_i, t_j) && close(e.t_j, t_i)))
    }

    /// Geometric extrapolation `g_n q/(1−q)`, `q = g_n/g_{n−1}`, of the distance
    /// from `omega` to the limit, relative to `‖φ₀‖`.
    pub fn tail_bound(&self, run: &Trajectory) -> f64 {
        let n0 = l2(run.initial());
        let g: Vec<f64> = self.consecutive_gaps().iter().map(|e| e.l2).collect();
        if n0 == 0.0 || g.is_empty() {
            return 0.0;
        }
        if g.len() < 2 {
            return f64::INFINITY;
        }
        let (a, b) = (g[g.len() - 2], g[g.len() - 1]);
        if b == 0.0 {
            return 0.0;
        }
        let q = b / a;
        if q >= 1.0 {
            f64::INFINITY
        } else {
            b * q / (1.0 - q) / n0
        }
    }

    /// Gaps between consecutive samples.
    pub fn consecutive_gaps(&self) -> Vec<CauchyEntry> {
        self.times
            .windows(2)
            .filter_map(|w| self.gap(w[0], w[1]).cloned())
            .collect()
    }

    pub fn summary(&self) -> ChannelSummary {
        ChannelSummary {
            times: self.times.clone(),
            alpha0: self.alpha0,
            cutoff: self.cutoff,
            cauchy_table: self.cauchy_table.clone(),
            late_gap: self.late_gap,
            tolerance: self.tolerance,
            accepted: self.accepted,
            omega_mass: self.omega.mass(),
            omega_momentum: self.omega.spectral_expectation(|k| k),
        }
    }

    /// `omega.csv` and `cauchy_table.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.omega.write_csv(&dir.join("omega.csv"))?;
        let path = dir.join("cauchy_table.json");
        let text = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::format(&path, e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// `ω(t) = e^{-iΔt} F(⟨x⟩/t^{α₀} ≥ 1) φ(t)` at each sample time.
pub fn extract_free_channel(
    run: &Trajectory,
    alpha0: f64,
    cutoff: Cutoff,
    sample_times: &[f64],
    tolerance: f64,
) -> Result<ChannelResult> {
    if !(alpha0 > 0.5 && alpha0 < 1.0) {
        return Err(Error::invalid(format!("α₀={alpha0} must lie in (1/2, 1)")));
    }
    if sample_times.is_empty() || sample_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("sample times must be non-empty and strictly increasing"));
    }
    if !(sample_times[0] > 0.0) {
        return Err(Error::invalid("sample times must be positive"));
    }
    let w = standard_weight();
    let samples: Vec<RadialField> = sample_times
        .par_iter()
        .map(|&t| {
            let phi = run.at(t);
            let s = t.powf(alpha0);
            let cut = phi.mul_profile(|r| cutoff.value(w.bracket(r) / s));
            let mut om = free_evolve(&cut, -phi.time_tag);
            om.time_tag = 0.0;
            om
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..samples.len())
        .flat_map(|i| (i + 1..samples.len()).map(move |j| (i, j)))
        .collect();
    let cauchy_table = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = samples[i].sub(&samples[j]);
            CauchyEntry {
                t_i: sample_times[i],
                t_j: sample_times[j],
                l2: l2(&d),
                h1_surrogate: h1_surrogate(&d),
            }
        })
        .collect();
    let n0 = l2(run.initial());
    let late_gap = if samples.len() < 2 || n0 == 0.0 {
        0.0
    } else {
        l2(&samples[samples.len() - 1].sub(&samples[samples.len() - 2])) / n0
    };
    Ok(ChannelResult {
        omega: samples[samples.len() - 1].clone(),
        times: sample_times.to_vec(),
        samples,
        cauchy_table,
        alpha0,
        cutoff,
        late_gap,
        tolerance,
        accepted: late_gap <= tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub t: f64,
    /// `‖φ − e^{iΔt}ω − φ_wb‖`, zero by construction.
    pub residual: f64,
    /// `‖φ − F(⟨x⟩/t^{α₀} ≤ 1)φ − e^{iΔt}ω‖`.
    pub residual_d2: f64,
    pub wb_mass: f64,
    /// `‖F(⟨x⟩/t^α ≥ 1)φ_wb‖²`.
    pub wb_exterior_mass: f64,
    /// `⟨⟨x⟩⟩` of `φ_wb`, normalized by its mass.
    pub wb_mean_bracket: f64,
    /// `|(φ_wb, e^{iΔt}f_probe)|`.
    pub orthogonality: f64,
    /// `‖φ_wb‖² + ‖ω‖² − ‖φ(t)‖²`.
    pub mass_balance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub alpha: f64,
    pub rows: Vec<DecompositionRow>,
    pub exterior_fit: Option<LineFit>,
    pub bracket_fit: Option<LineFit>,
    pub orthogonality_fit: Option<LineFit>,
    /// Set when the tail mass of `φ_wb` is under [`MEASUREMENT_FLOOR`].
    pub below_floor: bool,
}

impl DecompositionReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `φ_wb(t) = φ(t) − e^{iΔt}ω` over the snapshots with `t ≥ t_from`.
pub fn weakly_bounded_part(run: &Trajectory, omega: &RadialField, t_from: f64) -> Vec<RadialField> {
    run.snapshots
        .par_iter()
        .filter(|s| s.time_tag >= t_from)
        .map(|s| {
            let mut wb = s.sub(&free_evolve(omega, s.time_tag));
            wb.time_tag = s.time_tag;
            wb
        })
        .collect()
}

/// Decomposition 1 metrics with exterior exponent `alpha` and an optional
/// free probe `f_probe` for the orthogonality series.
pub fn decompose(
    run: &Trajectory,
    channel: &ChannelResult,
    alpha: f64,
    probe: Option<&RadialField>,
    t_from: f64,
) -> Result<DecompositionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("shell exponent α={alpha} must lie in (0, 1)")));
    }
    if let Some(p) = probe {
        if !p.grid.same_as(&run.grid) {
            return Err(Error::invalid("probe lives on a different grid"));
        }
    }
    let w = standard_weight();
    let f1 = Cutoff::rising(1.0);
    let om_mass = channel.omega.mass();
    let rows = run
        .snapshots
        .par_iter()
        .filter(|s| s.time_tag >= t_from && s.time_tag > 0.0)
        .map(|phi| {
            let t = phi.time_tag;
            let free = free_evolve(&channel.omega, t);
            let wb = phi.sub(&free);
            let back = phi.sub(&free).sub(&wb);
            let s0 = t.powf(channel.alpha0);
            let d2 = phi
                .mul_profile(|r| channel.cutoff.value(w.bracket(r) / s0))
                .sub(&free);
            let m = wb.mass();
            let s = t.powf(alpha);
            let ext = wb.mul_profile(|r| f1.value(w.bracket(r) / s)).mass();
            let br = if m > 0.0 {
                wb.mul_profile(|r| w.bracket(r).sqrt()).mass() / m
            } else {
                0.0
            };
            let orth = match probe {
                Some(p) => inner(&wb, &free_evolve(p, t))?.norm(),
                None => 0.0,
            };
            Ok(DecompositionRow {
                t,
                residual: l2(&back),
                residual_d2: l2(&d2),
                wb_mass: m,
                wb_exterior_mass: ext,
                wb_mean_bracket: br,
                orthogonality: orth,
                mass_balance: m + om_mass - phi.mass(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let col = |f: fn(&DecompositionRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let tail = rows.len() - rows.len() / 4;
    let below_floor = rows.is_empty() || rows[tail.min(rows.len().saturating_sub(1))..].iter().any(|r| r.wb_mass < MEASUREMENT_FLOOR);
    Ok(DecompositionReport {
        alpha,
        exterior_fit: loglog_fit(&t, &col(|r| r.wb_exterior_mass)),
        bracket_fit: if below_floor { None } else { loglog_fit(&t, &col(|r| r.wb_mean_bracket)) },
        orthogonality_fit: probe.and_then(|_| loglog_fit(&t, &col(|r| r.orthogonality))),
        rows,
        below_floor,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadVerdict {
    Ballistic,
    WeaklyLocalized,
    Localized,
    Intermediate,
    BelowFloor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WlsReport {
    pub times: Vec<f64>,
    /// `⟨⟨x⟩⟩_t`, normalized by mass.
    pub mean_bracket: Vec<f64>,
    pub exponent: f64,
    /// Two standard errors of the exponent.
    pub band: f64,
    pub verdict: SpreadVerdict,
}

/// Growth exponent of `⟨⟨x⟩⟩_t` over fields at `t ∈ [t0, T]`, `T ≥ 4t₀`.
pub fn wls_diagnostics(fields: &[RadialField], t0: f64) -> Result<WlsReport> {
    let sel: Vec<&RadialField> = fields.iter().filter(|f| f.time_tag >= t0).collect();
    let t_end = sel.last().map(|f| f.time_tag).unwrap_or(0.0);
    if !(t0 > 0.0) || sel.len() < 3 || t_end < 4.0 * t0 {
        return Err(Error::invalid(format!(
            "span [{t0}, {t_end}] with {} fields is too short; need T ≥ 4t₀ and 3 fields",
            sel.len()
        )));
    }
    let w = standard_weight();
    let times: Vec<f64> = sel.iter().map(|f| f.time_tag).collect();
    let masses: Vec<f64> = sel.iter().map(|f| f.mass()).collect();
    let mean_bracket: Vec<f64> = sel
        .iter()
        .zip(&masses)
        .map(|(f, &m)| {
            if m > 0.0 {
                f.mul_profile(|r| w.bracket(r).sqrt()).mass() / m
            } else {
                0.0
            }
        })
        .collect();
    if masses.iter().any(|&m| m < MEASUREMENT_FLOOR) {
        return Ok(WlsReport {
            times,
            mean_bracket,
            exponent: f64::NAN,
            band: f64::NAN,
            verdict: SpreadVerdict::BelowFloor,
        });
    }
    let fit = loglog_fit(&times, &mean_bracket).ok_or_else(|| Error::numerical("growth fit failed"))?;
    let e = fit.slope;
    let verdict = if (e - 1.0).abs() <= 0.15 {
        SpreadVerdict::Ballistic
    } else if e.abs() <= 0.05 {
        SpreadVerdict::Localized
    } else if e <= 0.6 {
        SpreadVerdict::WeaklyLocalized
    } else {
        SpreadVerdict::Intermediate
    };
    Ok(WlsReport {
        times,
        mean_bracket,
        exponent: e,
        band: 2.0 * fit.slope_err,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroFrequencySeries {
    pub beta: f64,
    pub times: Vec<f64>,
    /// `⟨F(|p| t^β ≤ 1)⟩_t`.
    pub values: Vec<f64>,
    pub tail_mean: f64,
    pub tail_oscillation: f64,
    /// Reported only for `β > 2/3`.
    pub settled: Option<bool>,
}

/// Low-frequency mass `⟨F(|p| t^β ≤ 1)⟩_t` over the run.
pub fn zero_frequency_mass(run: &Trajectory, beta: f64, tolerance: f64) -> Result<ZeroFrequencySeries> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("β={beta} must be positive")));
    }
    let c = Cutoff::falling(1.0);
    let snaps: Vec<&RadialField> = run.snapshots.iter().filter(|s| s.time_tag > 0.0).collect();
    let values: Vec<f64> = snaps
        .par_iter()
        .map(|s| {
            let sc = s.time_tag.powf(beta);
            s.spectral_expectation(|k| c.value(k * sc))
        })
        .collect();
    let (tail_mean, tail_oscillation) = tail_quartile(&values);
    Ok(ZeroFrequencySeries {
        beta,
        times: snaps.iter().map(|s| s.time_tag).collect(),
        values,
        tail_mean,
        tail_oscillation,
        settled: (beta > 2.0 / 3.0).then_some(tail_oscillation <= tolerance),
    })
}

/// Operator whose spectrum the band lattice partitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Gamma,
    Dilation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrolocalLattice {
    /// Shell edges are `⟨x⟩ = t^{α_i}`, increasing.
    pub alphas: Vec<f64>,
    /// Band edges in the scaled variable `λ·t^{band_exp}`, increasing.
    pub band_edges: Vec<f64>,
    pub band_exp: f64,
    /// Width of each band transition in the scaled variable.
    pub band_width: f64,
    pub frame: Frame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrolocalMap {
    pub t: f64,
    /// `m[i][j] = ‖S_i B_j f‖²`.
    pub mass: Vec<Vec<f64>>,
    /// `‖S_i f‖²`.
    pub shell_mass: Vec<f64>,
    /// `max_i |Σ_j m[i][j] − ‖S_i f‖²| / ‖f‖²`.
    pub partition_error: f64,
}

/// Step from 0 to 1 across `[e − w/2, e + w/2]`.
fn step_at(x: f64, e: f64, w: f64) -> f64 {
    smoothstep(3, (x - e) / w + 0.5)[0]
}

/// Pieces `χ_i` of a smooth partition of unity with the given edges.
fn partition(x: f64, edges: &[f64], width: impl Fn(f64) -> f64) -> Vec<f64> {
    let h: Vec<f64> = edges.iter().map(|&e| step_at(x, e, width(e))).collect();
    let mut out = Vec::with_capacity(edges.len() + 1);
    let mut prev = 1.0;
    for hk in &h {
        out.push((prev - hk).max(0.0));
        prev = *hk;
    }
    out.push(prev);
    out
}

/// Phase-space mass table of `f` on a shell × band lattice.
pub fn microlocal_map(f: &RadialField, t: f64, lat: &MicrolocalLattice) -> Result<MicrolocalMap> {
    if !(t > 1.0) {
        return Err(Error::invalid(format!("t={t} must exceed 1")));
    }
    let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    if lat.alphas.is_empty() || !inc(&lat.alphas) || !inc(&lat.band_edges) || lat.band_edges.is_empty() {
        return Err(Error::invalid("shell exponents and band edges must be non-empty and increasing"));
    }
    let shells: Vec<f64> = lat.alphas.iter().map(|a| t.powf(*a)).collect();
    let (lo, hi) = (f.grid.h, 0.9 * f.grid.r_max());
    if shells.iter().any(|&s| s < 2.0 * lo || s > hi) {
        return Err(Error::invalid(format!(
            "shell radii {shells:?} leave the resolvable range [{}, {hi}]",
            2.0 * lo
        )));
    }
    let scale = t.powf(lat.band_exp);
    if !(lat.band_width > 0.0) || lat.band_width / scale < 1e-3 {
        return Err(Error::invalid("band transitions are narrower than the spectral resolution"));
    }
    let w = standard_weight();
    let shell_w = |e: f64| 0.5 * e;
    let shell_pieces: Vec<Vec<f64>> = (0..shells.len() + 1)
        .map(|i| {
            f.grid
                .r
                .iter()
                .map(|&r| partition(w.bracket(r), &shells, shell_w)[i].sqrt())
                .collect()
        })
        .collect();
    let nb = lat.band_edges.len() + 1;
    let fm = standard_flow();
    let bands = (0..nb)
        .into_par_iter()
        .map(|j| {
            let m = |l: f64| partition(l * scale, &lat.band_edges, |_| lat.band_width)[j].sqrt();
            Ok(match lat.frame {
                Frame::Gamma => gamma_multiplier(
                    &fm,
                    f,
                    m,
                    0.5 * lat.band_width / scale,
                    &FlowSpectralOptions::default(),
                ),
                Frame::Dilation => {
                    let mult = SpectralMultiplierA::from_real(LogGridSpec::for_grid(&f.grid), m);
                    func_of_dilation(&mult, f)?
                }
            })
        })
        .collect::<Result<Vec<RadialField>>>()?;
    let mass: Vec<Vec<f64>> = shell_pieces
        .iter()
        .map(|s| bands.iter().map(|b| b.mul_values(s).mass()).collect())
        .collect();
    let shell_mass: Vec<f64> = shell_pieces.iter().map(|s| f.mul_values(s).mass()).collect();
    let total = f.mass();
    let partition_error = if total == 0.0 {
        0.0
    } else {
        mass.iter()
            .zip(&shell_mass)
            .map(|(row, s)| (row.iter().sum::<f64>() - s).abs() / total)
            .fold(0.0, f64::max)
    };
    Ok(MicrolocalMap {
        t,
        mass,
        shell_mass,
        partition_error,
    })
}

/// Natural cubic spline through `(x_k, y_k)` on a uniform grid.
struct Spline {
    x0: f64,
    h: f64,
    y: Vec<Complex64>,
    m: Vec<Complex64>,
}

impl Spline {
    fn new(x0: f64, h: f64, y: Vec<Complex64>) -> Self {
        let n = y.len();
        let mut m = vec![Complex64::new(0.0, 0.0); n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![Complex64::new(0.0, 0.0); k];
            for i in 0..k {
                let rhs = (y[i + 2] - y[i + 1] * 2.0 + y[i]) * (6.0 / (h * h));
                if i == 0 {
                    c[i] = 1.0 / 4.0;
                    d[i] = rhs / 4.0;
                } else {
                    let den = 4.0 - c[i - 1];
                    c[i] = 1.0 / den;
                    d[i] = (rhs - d[i - 1]) / den;
                }
            }
            m[k] = d[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = d[i] - m[i + 2] * c[i];
            }
        }
        Self { x0, h, y, m }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let n = self.y.len();
        let s = (x - self.x0) / self.h;
        if s < 0.0 || s > (n - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = (s.floor() as usize).min(n - 2);
        let a = s - i as f64;
        let b = 1.0 - a;
        let h2 = self.h * self.h / 6.0;
        self.y[i] * b + self.y[i + 1] * a + (self.m[i] * (b * b * b - b) + self.m[i + 1] * (a * a * a - a)) * h2
    }
}

/// `(e^{iAa}f)(r) = e^{3a/2} f(e^a r)` by cubic resampling of `u = rφ`, and the
/// relative L² discrepancy against spectral evaluation on a subsample.
pub fn dilate(f: &RadialField, a: f64) -> (RadialField, f64) {
    if a == 0.0 {
        return (f.clone(), 0.0);
    }
    let g = &f.grid;
    let mut y = Vec::with_capacity(g.n() + 1);
    y.push(Complex64::new(0.0, 0.0));
    y.extend_from_slice(&f.u);
    let sp = Spline::new(0.0, g.h, y);
    let ea = a.exp();
    let pref = (0.5 * a).exp();
    let u: Vec<Complex64> = g.r.iter().map(|&r| sp.eval(ea * r) * pref).collect();
    let (mut num, mut den) = (0.0, 0.0);
    // probe half a cell off the targets, where interpolation is weakest
    for &r in g.r.iter().step_by(7) {
        let z = ea * r + 0.5 * g.h;
        if z >= g.r_max() {
            continue;
        }
        let exact = g.sample(&f.u, z);
        num += (sp.eval(z) - exact).norm_sqr();
        den += exact.norm_sqr();
    }
    let err = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    (f.with_u(u), err)
}

#[derive(Clone, Debug)]
pub struct SelfSimilarRecord {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub profiles: Vec<RadialField>,
    /// `(i, j, ‖P_i − P_j‖)`.
    pub pairwise_distances: Vec<(usize, usize, f64)>,
    pub resampling_error: f64,
    /// Some consecutive pair in the second half is within `tolerance`
    /// relative to the profile norm.
    pub settled: bool,
}

/// Window `F₁(|x| ∼ 1)F₂(|p| ≤ M)` applied to `U(α ln t)φ(t)`.
pub fn self_similar_profile(
    run: &Trajectory,
    alpha: f64,
    sample_times: &[f64],
    m: f64,
    tolerance: f64,
) -> Result<SelfSimilarRecord> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid(format!("α={alpha} must lie in (0, 1/2]")));
    }
    if sample_times.iter().any(|t| !(*t >= 1.0)) {
        return Err(Error::invalid("sample times must be at least 1"));
    }
    let win = Cutoff::window(0.25, 4.0)?;
    let fp = Cutoff::falling(m);
    let rows: Vec<(RadialField, f64)> = sample_times
        .par_iter()
        .map(|&t| {
            let phi = run.at(t);
            let (d, err) = dilate(phi, alpha * phi.time_tag.ln());
            let wd = d.apply_real_multiplier(|k| fp.value(k)).mul_profile(|r| win.value(r));
            (wd, err)
        })
        .collect();
    let resampling_error = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if resampling_error > 1e-6 {
        return Err(Error::numerical(format!(
            "resampling error {resampling_error:.2e} exceeds 1e-6; refine the grid"
        )));
    }
    let profiles: Vec<RadialField> = rows.into_iter().map(|r| r.0).collect();
    let n = profiles.len();
    let pairwise_distances: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(i, j)| (i, j, l2(&profiles[i].sub(&profiles[j]))))
        .collect();
    let scale = profiles.iter().map(l2).fold(0.0, f64::max);
    let settled = scale > 0.0
        && pairwise_distances
            .iter()
            .any(|&(i, j, d)| j == i + 1 && i >= n / 2 && d <= tolerance * scale);
    Ok(SelfSimilarRecord {
        alpha,
        times: sample_times.to_vec(),
        profiles,
        pairwise_distances,
        resampling_error,
        settled,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialWindow {
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_min: f64,
    pub min_value: f64,
    /// Times whose value is within `1e-9` of the window minimum.
    pub qualifying: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialBound {
    pub times: Vec<f64>,
    /// `‖Aφ_wb‖_{L²(|x| ≤ √t)}`.
    pub values: Vec<f64>,
    pub windows: Vec<SequentialWindow>,
    /// Slope of `log min` against `log t_min` across windows.
    pub slope: Option<f64>,
}

/// Dyadic-window minima of `‖Aφ_wb‖_{L²(|x| ≤ √t)}` on `[t0, T]`, with
/// `φ_wb = φ − e^{iΔt}ω` (or `φ` itself when `omega` is `None`).
pub fn sequential_a_bound(run: &Trajectory, omega: Option<&RadialField>, t0: f64) -> Result<SequentialBound> {
    let t_end = run.t_max();
    if !(t0 > 0.0) || t_end < 4.0 * t0 {
        return Err(Error::invalid(format!("span [{t0}, {t_end}] must satisfy T ≥ 4t₀ > 0")));
    }
    let fields: Vec<RadialField> = match omega {
        Some(om) => weakly_bounded_part(run, om, t0),
        None => run.snapshots.iter().filter(|s| s.time_tag >= t0).cloned().collect(),
    };
    let values: Vec<f64> = fields
        .par_iter()
        .map(|f| apply_dilation(f).mass_in(0.0, f.time_tag.sqrt()).sqrt())
        .collect();
    let times: Vec<f64> = fields.iter().map(|f| f.time_tag).collect();
    let mut windows = Vec::new();
    let mut lo = t0;
    while lo < t_end {
        let hi = (2.0 * lo).min(t_end);
        let idx: Vec<usize> = (0..times.len())
            .filter(|&k| times[k] >= lo && (times[k] < hi || (hi == t_end && times[k] <= hi)))
            .collect();
        if let Some(&best) = idx.iter().min_by(|a, b| values[**a].total_cmp(&values[**b])) {
            let mv = values[best];
            windows.push(SequentialWindow {
                t_lo: lo,
                t_hi: hi,
                t_min: times[best],
                min_value: mv,
                qualifying: idx
                    .iter()
                    .filter(|&&k| values[k] <= mv + 1e-9 * mv.abs().max(1e-300))
                    .map(|&k| times[k])
                    .collect(),
            });
        }
        lo = hi;
    }
    let tm: Vec<f64> = windows.iter().map(|w| w.t_min).collect();
    let mv: Vec<f64> = windows.iter().map(|w| w.min_value).collect();
    Ok(SequentialBound {
        slope: loglog_fit(&tm, &mv).map(|f| f.slope),
        times,
        values,
        windows,
    })
}
