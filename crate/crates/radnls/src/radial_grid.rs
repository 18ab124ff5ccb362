//! Uniform radial grid, reduced-form fields `u = r·φ`, sine-spectral
//! transforms and norms.
//!
//! Nodes are `r_j = j·h`, `j = 1..n`, `h = r_max/n`; the last node sits on the
//! Dirichlet boundary. The sine basis `sin(k_m r)`, `k_m = πm/r_max`,
//! `m = 1..n−1`, diagonalizes `∂_r²` on reduced fields.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cutoffs_weights::SmoothWeight;
use crate::{Complex64, Error, Result};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    0.005
}

impl GridSpec {
    pub fn new(r_max: f64, n: usize, dt: f64) -> Self {
        Self { r_max, n, dt }
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 || !self.n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid size n={} must be a power of two and at least 16",
                self.n
            )));
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(Error::invalid(format!(
                "grid radius r_max={} must be positive",
                self.r_max
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("time step dt={} must be positive", self.dt)));
        }
        Ok(())
    }
}

/// Precomputed radii, wavenumbers and the FFT plan of size `2n` backing the
/// sine and cosine transforms.
pub struct Grid {
    pub spec: GridSpec,
    pub h: f64,
    /// `r_j`, `j = 1..n`.
    pub r: Vec<f64>,
    /// `k_m`, `m = 1..n−1`.
    pub k: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("r_max", &self.spec.r_max)
            .field("n", &self.spec.n)
            .field("h", &self.h)
            .finish()
    }
}

pub fn make_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    spec.validate()?;
    let n = spec.n;
    let h = spec.h();
    let r = (1..=n).map(|j| j as f64 * h).collect();
    let k = (1..n)
        .map(|m| std::f64::consts::PI * m as f64 / spec.r_max)
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(2 * n);
    Ok(Arc::new(Grid {
        spec,
        h,
        r,
        k,
        fft,
    }))
}

impl Grid {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.spec.n == other.spec.n && self.spec.r_max == other.spec.r_max
    }

    /// Largest resolved wavenumber.
    pub fn k_max(&self) -> f64 {
        self.k[self.k.len() - 1]
    }

    fn odd_fft(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.spec.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for j in 1..n {
            buf[j] = x[j - 1];
            buf[2 * n - j] = -x[j - 1];
        }
        self.fft.process(&mut buf);
        buf
    }

    /// Sine coefficients `c_m` with `u_j = Σ_m c_m sin(πmj/n)`; the boundary
    /// sample `u_n` is dropped.
    pub fn sine_coeffs(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.spec.n;
        let buf = self.odd_fft(u);
        let s = Complex64::new(0.0, 1.0 / n as f64);
        (1..n).map(|m| buf[m] * s).collect()
    }

    /// Inverse of [`Grid::sine_coeffs`]; returns `n` samples with `u_n = 0`.
    pub fn from_sine_coeffs(&self, c: &[Complex64]) -> Vec<Complex64> {
        let n = self.spec.n;
        let buf = self.odd_fft(c);
        let s = Complex64::new(0.0, 0.5);
        let mut u: Vec<Complex64> = (1..n).map(|j| buf[j] * s).collect();
        u.push(Complex64::new(0.0, 0.0));
        u
    }

    /// `Σ_m a_m cos(πmj/n)` at `j = 1..n`.
    pub fn cosine_sum(&self, a: &[Complex64]) -> Vec<Complex64> {
        let n = self.spec.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        for m in 1..n {
            buf[m] = a[m - 1];
            buf[2 * n - m] = a[m - 1];
        }
        self.fft.process(&mut buf);
        (1..=n).map(|j| buf[j] * 0.5).collect()
    }

    /// Applies a sine-spectral multiplier `m(k)`.
    pub fn apply_multiplier(
        &self,
        u: &[Complex64],
        m: impl Fn(f64) -> Complex64,
    ) -> Vec<Complex64> {
        let mut c = self.sine_coeffs(u);
        for (cm, &k) in c.iter_mut().zip(&self.k) {
            *cm *= m(k);
        }
        self.from_sine_coeffs(&c)
    }

    /// Spectral `∂_r u` at the nodes.
    pub fn derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let c = self.sine_coeffs(u);
        let a: Vec<Complex64> = c.iter().zip(&self.k).map(|(c, k)| c * k).collect();
        self.cosine_sum(&a)
    }

    /// Spectral `∂_r² u`.
    pub fn second_derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.apply_multiplier(u, |k| Complex64::new(-k * k, 0.0))
    }

    /// Reduced sample `u(z)` at an arbitrary radius by 8-point Lagrange
    /// interpolation, with the odd extension `u(−r) = −u(r)` and zero beyond
    /// the boundary.
    pub fn sample(&self, u: &[Complex64], z: f64) -> Complex64 {
        let s = z / self.h;
        let n = self.spec.n as isize;
        if !s.is_finite() || s > (n + 4) as f64 || s < -((n + 4) as f64) {
            return Complex64::new(0.0, 0.0);
        }
        let node = |j: isize| -> Complex64 {
            if j == 0 || j.abs() > n {
                Complex64::new(0.0, 0.0)
            } else if j > 0 {
                u[(j - 1) as usize]
            } else {
                -u[(-j - 1) as usize]
            }
        };
        let fl = s.floor();
        let frac = s - fl;
        let base = fl as isize;
        if frac == 0.0 {
            return node(base);
        }
        const W: [f64; 8] = [1.0, -7.0, 21.0, -35.0, 35.0, -21.0, 7.0, -1.0];
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (m, w) in W.iter().enumerate() {
            let d = frac + 3.0 - m as f64;
            let c = w / d;
            num += node(base - 3 + m as isize) * c;
            den += c;
        }
        num / den
    }
}

/// Radial field stored as `u_j ≈ r_j·φ(r_j)`.
#[derive(Clone, Debug)]
pub struct RadialField {
    pub grid: Arc<Grid>,
    pub u: Vec<Complex64>,
    pub time_tag: f64,
}

impl RadialField {
    pub fn new(grid: Arc<Grid>, u: Vec<Complex64>, time_tag: f64) -> Result<Self> {
        if u.len() != grid.n() {
            return Err(Error::invalid(format!(
                "field has {} samples, grid has {}",
                u.len(),
                grid.n()
            )));
        }
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("field contains non-finite samples"));
        }
        Ok(Self { grid, u, time_tag })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n();
        Self {
            grid,
            u: vec![Complex64::new(0.0, 0.0); n],
            time_tag: 0.0,
        }
    }

    /// Samples `φ` on the grid; the boundary node is set to zero.
    pub fn from_phi(grid: Arc<Grid>, phi: impl Fn(f64) -> Complex64, time_tag: f64) -> Self {
        let n = grid.n();
        let mut u: Vec<Complex64> = grid.r.iter().map(|&r| phi(r) * r).collect();
        u[n - 1] = Complex64::new(0.0, 0.0);
        Self { grid, u, time_tag }
    }

    pub fn from_real_phi(grid: Arc<Grid>, phi: impl Fn(f64) -> f64) -> Self {
        Self::from_phi(grid, |r| Complex64::new(phi(r), 0.0), 0.0)
    }

    /// Same grid and time tag, new samples.
    pub fn with_u(&self, u: Vec<Complex64>) -> Self {
        debug_assert_eq!(u.len(), self.u.len());
        Self {
            grid: self.grid.clone(),
            u,
            time_tag: self.time_tag,
        }
    }

    pub fn phi(&self) -> Vec<Complex64> {
        self.u
            .iter()
            .zip(&self.grid.r)
            .map(|(u, r)| u / r)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().all(|v| v.norm_sqr() == 0.0)
    }

    /// `4π Σ|u_j|² h`.
    pub fn mass(&self) -> f64 {
        FOUR_PI * self.grid.h * self.u.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Mass carried by nodes with `r` in `[lo, hi]`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let s: f64 = self
            .u
            .iter()
            .zip(&self.grid.r)
            .filter(|(_, &r)| r >= lo && r <= hi)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        FOUR_PI * self.grid.h * s
    }

    /// Fraction of the mass held by the outermost 5% of the grid.
    pub fn boundary_fraction(&self) -> f64 {
        let total = self.mass();
        if total == 0.0 {
            return 0.0;
        }
        let cut = 0.95 * self.grid.r_max();
        self.mass_in(cut, f64::INFINITY) / total
    }

    /// Raised when the outer 5% of the grid holds more than `1e-8` of the mass.
    pub fn boundary_flag(&self) -> bool {
        self.boundary_fraction() > 1e-8
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.with_u(self.u.iter().map(|v| v * a).collect())
    }

    pub fn scale_re(&self, a: f64) -> Self {
        self.with_u(self.u.iter().map(|v| v * a).collect())
    }

    pub fn add(&self, other: &RadialField) -> Self {
        self.with_u(self.u.iter().zip(&other.u).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &RadialField) -> Self {
        self.with_u(self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect())
    }

    /// Pointwise multiplication by a real radial profile.
    pub fn mul_profile(&self, w: impl Fn(f64) -> f64) -> Self {
        self.with_u(
            self.u
                .iter()
                .zip(&self.grid.r)
                .map(|(v, &r)| v * w(r))
                .collect(),
        )
    }

    /// Pointwise multiplication by tabulated real values at the nodes.
    pub fn mul_values(&self, w: &[f64]) -> Self {
        self.with_u(self.u.iter().zip(w).map(|(v, w)| v * w).collect())
    }

    pub fn sine_coeffs(&self) -> Vec<Complex64> {
        self.grid.sine_coeffs(&self.u)
    }

    pub fn apply_multiplier(&self, m: impl Fn(f64) -> Complex64) -> Self {
        self.with_u(self.grid.apply_multiplier(&self.u, m))
    }

    pub fn apply_real_multiplier(&self, m: impl Fn(f64) -> f64) -> Self {
        self.apply_multiplier(|k| Complex64::new(m(k), 0.0))
    }

    /// `‖∇φ‖²` from the sine spectrum.
    pub fn kinetic(&self) -> f64 {
        let c = self.sine_coeffs();
        let s: f64 = c.iter().zip(&self.grid.k).map(|(c, k)| k * k * c.norm_sqr()).sum();
        FOUR_PI * 0.5 * self.grid.r_max() * s
    }

    /// `⟨m(|p|)⟩` for a real spectral weight.
    pub fn spectral_expectation(&self, m: impl Fn(f64) -> f64) -> f64 {
        let c = self.sine_coeffs();
        let s: f64 = c.iter().zip(&self.grid.k).map(|(c, &k)| m(k) * c.norm_sqr()).sum();
        FOUR_PI * 0.5 * self.grid.r_max() * s
    }

    /// `φ` evaluated at an arbitrary radius by interpolation of `u`.
    pub fn phi_at(&self, r: f64) -> Complex64 {
        if r <= 0.0 {
            let d = self.grid.sample(&self.u, self.grid.h * 1e-3);
            return d / (self.grid.h * 1e-3);
        }
        self.grid.sample(&self.u, r) / r
    }

    /// Writes the field as CSV: a `#` metadata line followed by `r,re_phi,im_phi`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(
            f,
            "# r_max={},n={},time_tag={}",
            self.grid.r_max(),
            self.grid.n(),
            self.time_tag
        )
        .map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(f);
        let io = |e: csv::Error| Error::format(path, e.to_string());
        w.write_record(["r", "re_phi", "im_phi"]).map_err(io)?;
        for (p, r) in self.phi().iter().zip(&self.grid.r) {
            w.write_record([r.to_string(), p.re.to_string(), p.im.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a field written by [`RadialField::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(f);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::format(path, "missing metadata line"))?;
        let mut r_max = None;
        let mut n = None;
        let mut t = 0.0;
        for kv in meta.trim().split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("bad metadata entry '{kv}'")))?;
            let bad = || Error::format(path, format!("bad value for {k}"));
            match k.trim() {
                "r_max" => r_max = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "n" => n = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                "time_tag" => t = v.trim().parse::<f64>().map_err(|_| bad())?,
                _ => {}
            }
        }
        let (r_max, n) = match (r_max, n) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::format(path, "metadata lacks r_max or n")),
        };
        let grid = make_grid(GridSpec::new(r_max, n, default_dt()))?;
        let mut rdr = csv::Reader::from_reader(reader);
        let mut u = Vec::with_capacity(n);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::format(path, format!("row {} column {}", i + 1, j)))
            };
            let r = parse(0)?;
            u.push(Complex64::new(parse(1)?, parse(2)?) * r);
        }
        if u.len() != n {
            return Err(Error::format(
                path,
                format!("expected {n} rows, found {}", u.len()),
            ));
        }
        RadialField::new(grid, u, t)
    }
}

/// Norms of a radial field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    H1,
    Hdot1,
    /// `(4π Σ ⟨r_j⟩^s |u_j|² h)^{1/2}` with the standard smooth weight.
    WeightedX(f64),
}

/// Shared default weight used by `WeightedX` norms and observables.
pub fn standard_weight() -> &'static SmoothWeight<f64> {
    static W: OnceLock<SmoothWeight<f64>> = OnceLock::new();
    W.get_or_init(SmoothWeight::standard)
}

pub fn norm(field: &RadialField, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::L2 => field.mass().sqrt(),
        NormKind::Hdot1 => field.kinetic().sqrt(),
        NormKind::H1 => (field.mass() + field.kinetic()).sqrt(),
        NormKind::WeightedX(s) => {
            if !(0.0..=2.0).contains(&s) {
                return Err(Error::invalid(format!("weight exponent s={s} outside [0,2]")));
            }
            let w = standard_weight();
            let acc: f64 = field
                .u
                .iter()
                .zip(&field.grid.r)
                .map(|(v, &r)| w.bracket(r).powf(s) * v.norm_sqr())
                .sum();
            (FOUR_PI * field.grid.h * acc).sqrt()
        }
    })
}

/// `4π Σ u_j·conj(v_j)·h`.
pub fn inner(f: &RadialField, g: &RadialField) -> Result<Complex64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::invalid("inner product of fields on different grids"));
    }
    let s: Complex64 = f.u.iter().zip(&g.u).map(|(a, b)| a * b.conj()).sum();
    Ok(s * (FOUR_PI * f.grid.h))
}

/// Real part of the quadratic form `(Xf, f)`; the real part of `(Xf,f)` is
/// the expectation of the symmetrized operator `½(X + X*)`.
pub fn expectation_of(xf: &RadialField, f: &RadialField) -> f64 {
    let s: f64 = xf
        .u
        .iter()
        .zip(&f.u)
        .map(|(a, b)| (a * b.conj()).re)
        .sum();
    s * FOUR_PI * f.grid.h
}
