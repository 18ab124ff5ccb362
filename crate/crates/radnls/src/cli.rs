//! Config-driven experiment runner behind the `radnls` binary.
//!
//! A run writes CSV series, `verdict.json` and `MANIFEST.json` (config hash,
//! library version, per-file sha256) into its output directory. Everything
//! written is a pure function of the config and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::extract_free_channel;
use crate::dynamics::{
    band_limit, energy, free_trajectory, pseudo_conformal, simulate, NonlinearitySpec, RunConfig, Trajectory,
};
use crate::identity_lab::{check_symmetrization, HermitianMatrix};
use crate::op_functions::{
    commutator_expansion_matrix, func_of_dilation, highlow_leakage, mellin_forward, mellin_norm_sq, LogGridSpec,
    SpectralMultiplierA,
};
use crate::propagation::{
    boundary_limit_check, check_alpha_third, exterior_morawetz, gamma_limit_estimate, propagation_integral,
    virial_series, write_series_csv, Preset,
};
use crate::radial_grid::{make_grid, GridSpec, RadialField};
use crate::{Complex64, Cutoff, Error, Result, VERSION};

const PRESETS: [(&str, &str); 4] = [
    ("example1", include_str!("../presets/example1.toml")),
    ("example2", include_str!("../presets/example2.toml")),
    ("example3", include_str!("../presets/example3.toml")),
    ("example4", include_str!("../presets/example4.toml")),
];

pub const MANIFEST: &str = "MANIFEST.json";
pub const VERDICT: &str = "verdict.json";

fn default_stride() -> usize {
    20
}

fn default_width() -> f64 {
    1.0
}

fn default_cutoff_a() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    0.1
}

/// Initial data `φ₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude·e^{−r²/2w²}·e^{ikr}` plus optional seeded noise.
    Gaussian {
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        k: f64,
        #[serde(default)]
        noise: f64,
    },
    /// The Gaussian above restricted to frequencies in `[lo, hi]`.
    BandLimited {
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        lo: f64,
        hi: f64,
    },
    /// `amplitude·s^{−3α/2}·e^{−(r/s^α)²/2}` with `s = t_ref`.
    SelfSimilar { amplitude: f64, alpha: f64, t_ref: f64 },
    /// A field written by `RadialField::write_csv`.
    File { path: PathBuf },
}

impl InitialData {
    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            InitialData::Gaussian { amplitude, width, k, noise } => {
                if !amplitude.is_finite() || !k.is_finite() {
                    out.push("initial data: amplitude and k must be finite".to_string());
                }
                if !(*width > 0.0) {
                    out.push(format!("initial data: width={width} must be positive"));
                }
                if !(*noise >= 0.0) {
                    out.push(format!("initial data: noise={noise} must be nonnegative"));
                }
            }
            InitialData::BandLimited { amplitude, width, lo, hi } => {
                if !amplitude.is_finite() || !(*width > 0.0) {
                    out.push("initial data: band-limited needs finite amplitude and positive width".to_string());
                }
                if !(*lo >= 0.0 && hi > lo) {
                    out.push(format!("initial data: band [{lo}, {hi}] must satisfy 0 ≤ lo < hi"));
                }
            }
            InitialData::SelfSimilar { amplitude, alpha, t_ref } => {
                if !amplitude.is_finite() || !(*alpha > 0.0 && *alpha < 1.0) || !(*t_ref > 0.0) {
                    out.push(format!(
                        "initial data: self-similar needs α in (0, 1) and t_ref > 0 (α={alpha}, t_ref={t_ref})"
                    ));
                }
            }
            InitialData::File { path } => {
                if !path.is_file() {
                    out.push(format!("initial data: file {} does not exist", path.display()));
                }
            }
        }
        out
    }

    pub fn build(&self, grid: GridSpec, seed: u64) -> Result<RadialField> {
        let g = make_grid(grid)?;
        match *self {
            InitialData::Gaussian { amplitude, width, k, noise } => {
                let bumps = noise_bumps(seed, noise, width);
                Ok(RadialField::from_phi(
                    g,
                    move |r| {
                        let base = Complex64::from_polar(amplitude * (-0.5 * (r / width).powi(2)).exp(), k * r);
                        bumps.iter().fold(base, |acc, &(c, s, z)| {
                            acc + z * (-0.5 * ((r - c) / s).powi(2)).exp()
                        })
                    },
                    0.0,
                ))
            }
            InitialData::BandLimited { amplitude, width, lo, hi } => {
                let f = RadialField::from_real_phi(g, move |r| amplitude * (-0.5 * (r / width).powi(2)).exp());
                band_limit(&f, lo, hi)
            }
            InitialData::SelfSimilar { amplitude, alpha, t_ref } => {
                let s = t_ref.powf(alpha);
                let c = amplitude * t_ref.powf(-1.5 * alpha);
                Ok(RadialField::from_real_phi(g, move |r| c * (-0.5 * (r / s).powi(2)).exp()))
            }
            InitialData::File { ref path } => {
                let mut f = RadialField::read_csv(path)?;
                if !f.grid.same_as(&g) {
                    return Err(Error::invalid(format!(
                        "initial data file {} is not on the configured grid",
                        path.display()
                    )));
                }
                f.time_tag = 0.0;
                Ok(f)
            }
        }
    }
}

/// Eight smooth Gaussian bumps with seeded centres, widths and complex
/// amplitudes of size `noise`.
fn noise_bumps(seed: u64, noise: f64, width: f64) -> Vec<(f64, f64, Complex64)> {
    if noise == 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..8)
        .map(|_| {
            let c = rng.random_range(0.0..3.0 * width);
            let s = rng.random_range(0.5 * width..1.5 * width);
            let z = Complex64::from_polar(noise * rng.random_range(0.0..1.0), rng.random_range(0.0..std::f64::consts::TAU));
            (c, s, z)
        })
        .collect()
}

/// An observable evaluated along the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableEntry {
    /// `⟨FγF⟩_t` with `F = F(⟨x⟩/t^α ≥ cutoff_a)` and its tail estimate.
    GammaLimit {
        alpha: f64,
        #[serde(default = "default_cutoff_a")]
        cutoff_a: f64,
    },
    Propagation { estimate: Preset, t0: f64 },
    /// Growth of `∫⟨F′γF′⟩` against `T^α`.
    Boundary {
        alpha: f64,
        #[serde(default = "default_cutoff_a")]
        cutoff_a: f64,
        t0: f64,
    },
    Virial,
    Morawetz { m: f64, window_edges: Vec<f64> },
}

impl ObservableEntry {
    fn violations(&self, t_end: f64) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                out.push(strip(&e));
            }
        };
        match self {
            ObservableEntry::GammaLimit { alpha, cutoff_a } => {
                push(check_alpha_third(*alpha, "gamma_limit"));
                push(check_cutoff_a(*cutoff_a));
                if t_end.powf(*alpha) <= 4.0 {
                    push(Err(Error::invalid(format!(
                        "gamma_limit: T^α = {:.3} must exceed 4",
                        t_end.powf(*alpha)
                    ))));
                }
            }
            ObservableEntry::Propagation { estimate, t0 } => {
                push(estimate.validate());
                if !(*t0 > 0.0 && *t0 < t_end) {
                    push(Err(Error::invalid(format!("{}: t₀={t0} must lie in (0, T)", estimate.name()))));
                }
            }
            ObservableEntry::Boundary { alpha, cutoff_a, t0 } => {
                push(check_alpha_third(*alpha, "boundary"));
                push(check_cutoff_a(*cutoff_a));
                if !(*t0 >= 0.0 && *t0 < t_end) {
                    push(Err(Error::invalid(format!("boundary: t₀={t0} must lie in [0, T)"))));
                }
            }
            ObservableEntry::Virial => {}
            ObservableEntry::Morawetz { m, window_edges } => {
                if !(*m >= 4.0) {
                    push(Err(Error::invalid(format!("morawetz: M={m} must be at least 4"))));
                }
                if window_edges.len() < 2
                    || window_edges.windows(2).any(|w| !(w[1] > w[0]))
                    || window_edges.iter().any(|&t| !(t >= 0.0 && t <= t_end))
                {
                    push(Err(Error::invalid("morawetz: window edges must increase inside [0, T]")));
                }
            }
        }
        out
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Invalid(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Free-channel extraction `ω(t) = e^{−iΔt}F(⟨x⟩/t^{α₀} ≥ cutoff_a)φ(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    pub alpha0: f64,
    #[serde(default = "default_cutoff_a")]
    pub cutoff_a: f64,
    pub sample_times: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub grid: GridSpec,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub spec: NonlinearitySpec,
    /// Exit with a numerical abort once mass reaches the outer boundary.
    #[serde(default)]
    pub abort_on_boundary: bool,
    pub initial: InitialData,
    #[serde(default)]
    pub observables: Vec<ObservableEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelBlock>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// One of the shipped configs `example1` … `example4`.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::invalid(format!("unknown preset {name:?}; known: {}", preset_names().join(", "))))?;
        Self::from_toml(text, Path::new(name))
    }

    pub fn run_config(&self) -> RunConfig {
        let mut rc = RunConfig::new(self.grid, self.spec.clone(), self.t_end, self.stride);
        rc.abort_on_boundary = self.abort_on_boundary;
        rc
    }

    /// Every violated gate across the run, the initial data, the observables
    /// and the channel block.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.run_config().violations();
        out.extend(self.initial.violations());
        for o in &self.observables {
            out.extend(o.violations(self.t_end));
        }
        if let Some(c) = &self.channel {
            if !(c.alpha0 > 0.5 && c.alpha0 < 1.0) {
                out.push(format!("channel: α₀={} outside (1/2, 1) required by the wave-operator theorem", c.alpha0));
            }
            if let Err(e) = check_cutoff_a(c.cutoff_a) {
                out.push(format!("channel: {}", strip(&e)));
            }
            if c.sample_times.len() < 2
                || c.sample_times.windows(2).any(|w| !(w[1] > w[0]))
                || c.sample_times.iter().any(|&t| !(t > 0.0 && t <= self.t_end))
            {
                out.push("channel: at least two increasing sample times in (0, T] required".to_string());
            }
            if !(c.tolerance > 0.0) {
                out.push(format!("channel: tolerance {} must be positive", c.tolerance));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{}: {}", self.name, v.join("; "))))
        }
    }

    /// Canonical TOML of the config without its output directory.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        toml::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

fn check_cutoff_a(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("cutoff threshold {a} must be positive")))
    }
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Freewave,
    Channels,
    Identities,
    Mellin,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Freewave => "freewave",
            Command::Channels => "channels",
            Command::Identities => "identities",
            Command::Mellin => "mellin",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: Command,
    pub name: String,
    pub seed: u64,
    pub config_sha256: Option<String>,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaVerdict {
    pub alpha: f64,
    pub gamma_hat: f64,
    pub non_negative: bool,
    pub tail_oscillation: f64,
    pub decay_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationVerdict {
    pub preset: String,
    pub t0: f64,
    pub tail_ratio: f64,
    pub converged: bool,
    pub fitted_exponent: Option<f64>,
    pub scaled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVerdict {
    pub alpha: f64,
    pub growth_exponent: Option<f64>,
    pub tail_magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorawetzVerdict {
    pub m: f64,
    pub scaled: bool,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelVerdict {
    pub alpha0: f64,
    /// `‖ω(t_i) − ω(t_{i+1})‖ / ‖φ₀‖` for consecutive sample times.
    pub cauchy_gaps: Vec<(f64, f64, f64)>,
    pub late_gap: f64,
    pub accepted: bool,
    pub omega_mass: f64,
    pub omega_momentum: f64,
}

/// Contents of `verdict.json` for trajectory commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub name: String,
    pub command: Command,
    pub t_end: f64,
    pub snapshots: usize,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub pseudo_conformal_drift: Option<f64>,
    pub valid_until: Option<f64>,
    pub gamma_limit: Vec<GammaVerdict>,
    pub propagation: Vec<PropagationVerdict>,
    pub boundary: Vec<BoundaryVerdict>,
    pub virial_relative_rms: Option<f64>,
    pub morawetz: Vec<MorawetzVerdict>,
    pub channel: Option<ChannelVerdict>,
}

/// Where a run put its artifacts.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(v).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
        w.write_record(header).map_err(|e| Error::io(&path, e.into()))?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))
                .map_err(|e| Error::io(&path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    fn finish(mut self, command: Command, name: &str, seed: u64, config_sha256: Option<String>) -> Result<RunOutcome> {
        self.files.sort();
        self.files.dedup();
        let files = self
            .files
            .iter()
            .map(|f| {
                let p = self.dir.join(f);
                let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
                Ok(FileEntry {
                    path: f.clone(),
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            version: VERSION.to_string(),
            command,
            name: name.to_string(),
            seed,
            config_sha256,
            files,
        };
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(RunOutcome { dir: self.dir, manifest })
    }
}

fn drift(v: &[f64]) -> f64 {
    let v0 = v.first().copied().unwrap_or(0.0);
    let scale = v0.abs().max(f64::MIN_POSITIVE);
    v.iter().map(|x| (x - v0).abs() / scale).fold(0.0, f64::max)
}

fn trajectory(cmd: Command, cfg: &ExperimentConfig) -> Result<Trajectory> {
    let f0 = cfg.initial.build(cfg.grid, cfg.seed)?;
    if cmd == Command::Freewave {
        let step = cfg.stride as f64 * cfg.grid.dt;
        let k = (cfg.t_end / step).round() as usize;
        let times: Vec<f64> = (0..=k).map(|i| (i as f64 * step).min(cfg.t_end)).collect();
        return free_trajectory(&f0, &times);
    }
    simulate(&f0, &cfg.run_config())
}

/// Runs a trajectory command (`simulate`, `freewave`, `channels`) and
/// writes its artifacts into `out`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    match cmd {
        Command::Identities => return run_identities(cfg.seed, 100, out),
        Command::Mellin => return run_mellin(out),
        _ => {}
    }
    cfg.validate()?;
    if cmd == Command::Channels && cfg.channel.is_none() {
        return Err(Error::invalid(format!("{}: channels needs a [channel] block", cfg.name)));
    }
    let run = trajectory(cmd, cfg)?;
    let mut art = Artifacts::new(out)?;
    art.text("config.toml", &cfg.canonical())?;

    let spec = run.spec.clone();
    let times = run.times();
    let masses = run.masses();
    let energies: Vec<f64> = run.snapshots.iter().map(|s| energy(&spec, s, s.time_tag)).collect();
    let m0 = masses[0].max(f64::MIN_POSITIVE);
    let pc: Option<Vec<f64>> =
        (cmd == Command::Freewave).then(|| run.snapshots.iter().map(|s| pseudo_conformal(s, s.time_tag)).collect());
    let rows: Vec<Vec<f64>> = (0..times.len())
        .map(|i| {
            let mut r = vec![times[i], masses[i], (masses[i] - masses[0]) / m0, energies[i], run.boundary[i]];
            if let Some(p) = &pc {
                r.push(p[i]);
            }
            r
        })
        .collect();
    let mut header = vec![
        "t",
        "mass[4π∫|φ|² dx]",
        "mass_drift[relative to t=0]",
        "energy[∫|∇φ|² + G(|φ|) dx]",
        "boundary_fraction[mass share near r_max]",
    ];
    if pc.is_some() {
        header.push("pseudo_conformal[‖(x−2pt)φ‖_L²]");
    }
    art.csv("conservation.csv", &header, &rows)?;

    let mut verdict = RunVerdict {
        name: cfg.name.clone(),
        command: cmd,
        t_end: run.t_max(),
        snapshots: run.snapshots.len(),
        mass_drift: run.mass_drift(),
        energy_drift: drift(&energies),
        pseudo_conformal_drift: pc.as_deref().map(drift),
        valid_until: run.valid_until,
        gamma_limit: Vec::new(),
        propagation: Vec::new(),
        boundary: Vec::new(),
        virial_relative_rms: None,
        morawetz: Vec::new(),
        channel: None,
    };

    if cmd != Command::Channels {
        for o in &cfg.observables {
            observe(o, &run, &mut art, &mut verdict)?;
        }
    }

    if let Some(c) = &cfg.channel {
        let ch = extract_free_channel(&run, c.alpha0, Cutoff::rising(c.cutoff_a), &c.sample_times, c.tolerance)?;
        let n0 = run.initial().mass().sqrt().max(f64::MIN_POSITIVE);
        let s = ch.summary();
        let cdir = art.dir.join("channel");
        fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
        ch.write(&cdir)?;
        art.files.push("channel/omega.csv".to_string());
        art.files.push("channel/cauchy_table.json".to_string());
        verdict.channel = Some(ChannelVerdict {
            alpha0: c.alpha0,
            cauchy_gaps: ch.consecutive_gaps().iter().map(|e| (e.t_i, e.t_j, e.l2 / n0)).collect(),
            late_gap: s.late_gap,
            accepted: s.accepted,
            omega_mass: s.omega_mass,
            omega_momentum: s.omega_momentum,
        });
    }

    art.json(VERDICT, &verdict)?;
    art.finish(cmd, &cfg.name, cfg.seed, Some(cfg.hash()))
}

fn observe(o: &ObservableEntry, run: &Trajectory, art: &mut Artifacts, v: &mut RunVerdict) -> Result<()> {
    match o {
        ObservableEntry::GammaLimit { alpha, cutoff_a } => {
            let g = gamma_limit_estimate(run, *alpha, Cutoff::rising(*cutoff_a))?;
            let name = format!("gamma_limit_a{alpha}.csv");
            let zeros = vec![0.0; g.series.times.len()];
            let running = g.series.running_integral.as_deref().unwrap_or(&zeros);
            let path = art.path(&name);
            write_series_csv(&path, &g.series.label, &g.series.times, &g.series.values, running)?;
            v.gamma_limit.push(GammaVerdict {
                alpha: *alpha,
                gamma_hat: g.gamma_hat,
                non_negative: g.non_negative,
                tail_oscillation: g.convergence.tail_oscillation,
                decay_rate: g.convergence.decay_rate,
            });
        }
        ObservableEntry::Propagation { estimate, t0 } => {
            let rec = propagation_integral(run, *estimate, *t0)?;
            rec.write(&art.dir)?;
            art.files.push(format!("{}.csv", estimate.name()));
            art.files.push(format!("{}.json", estimate.name()));
            v.propagation.push(PropagationVerdict {
                preset: estimate.name().to_string(),
                t0: *t0,
                tail_ratio: rec.verdict.tail_ratio,
                converged: rec.verdict.converged,
                fitted_exponent: rec.verdict.fitted_exponent,
                scaled: rec.scaled,
            });
        }
        ObservableEntry::Boundary { alpha, cutoff_a, t0 } => {
            let b = boundary_limit_check(run, *alpha, Cutoff::rising(*cutoff_a), *t0)?;
            let path = art.path(&format!("boundary_a{alpha}.csv"));
            write_series_csv(&path, "F'γF'", &b.times, &b.series, &b.running_integral)?;
            v.boundary.push(BoundaryVerdict {
                alpha: *alpha,
                growth_exponent: b.growth_exponent,
                tail_magnitude: b.tail_magnitude,
            });
        }
        ObservableEntry::Virial => {
            let s = virial_series(run)?;
            let rows: Vec<Vec<f64>> = (0..s.times.len())
                .map(|i| vec![s.times[i], s.derivative[i], s.rhs[i], s.residual[i]])
                .collect();
            art.csv(
                "virial.csv",
                &["t", "d/dt<A>[dilation, per unit t]", "rhs[2‖∇φ‖² − ∫r∂_r𝒩|φ|² dx]", "residual[absolute]"],
                &rows,
            )?;
            v.virial_relative_rms = Some(s.relative_rms);
        }
        ObservableEntry::Morawetz { m, window_edges } => {
            let rep = exterior_morawetz(run, *m, window_edges)?;
            let rows: Vec<Vec<f64>> = rep
                .windows
                .iter()
                .map(|w| vec![w.t1, w.t2, w.lhs, w.rhs, w.leading, w.boundary, w.interaction, w.residual])
                .collect();
            art.csv(
                &format!("morawetz_m{m}.csv"),
                &[
                    "t1",
                    "t2",
                    "lhs[<F1γF1> increment]",
                    "rhs[integrated, same units]",
                    "leading[(4/M)∫<√(F1F1')γ²√(F1F1')> dt]",
                    "boundary[integrated remainder]",
                    "interaction[integrated]",
                    "residual[relative]",
                ],
                &rows,
            )?;
            v.morawetz.push(MorawetzVerdict {
                m: *m,
                scaled: rep.scaled,
                max_residual: rep.windows.iter().map(|w| w.residual).fold(0.0, f64::max),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub seed: u64,
    pub dim: usize,
    pub symmetrization_max: f64,
    pub symmetrization_tolerance: f64,
    pub expansion_order: u32,
    pub expansion_remainder: f64,
    pub expansion_bound: f64,
    pub expansion_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuite {
    pub cases: Vec<IdentityCase>,
    pub symmetrization_worst: f64,
    pub expansion_violations: usize,
    pub min_slack: f64,
}

/// Symmetrization identities and the commutator-expansion remainder bound on
/// `cases` seeded Hermitian triples of dimension 8–16.
pub fn identity_suite(seed: u64, cases: usize) -> Result<IdentitySuite> {
    let cutoff = Cutoff::rising(1.0);
    let rows = (0..cases)
        .map(|i| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(3 * i as u64);
            let d = 8 + i % 9;
            let a = HermitianMatrix::random(d, s);
            let b = HermitianMatrix::random(d, s + 1);
            let c = a.polynomial(&[0.3, -0.5, 0.25]);
            let sym = check_symmetrization(&a, &b, &c)?;
            let n = 1 + (i % 3) as u32;
            let exp = commutator_expansion_matrix(&b, &a, &cutoff, n)?;
            Ok(IdentityCase {
                seed: s,
                dim: d,
                symmetrization_max: sym.max_residual(),
                symmetrization_tolerance: sym.tolerance,
                expansion_order: n,
                expansion_remainder: exp.remainder_norm,
                expansion_bound: exp.bound,
                expansion_slack: exp.slack,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentitySuite {
        symmetrization_worst: rows.iter().map(|r| r.symmetrization_max).fold(0.0, f64::max),
        expansion_violations: rows.iter().filter(|r| r.expansion_remainder > r.expansion_bound).count(),
        min_slack: rows.iter().map(|r| r.expansion_slack).fold(f64::INFINITY, f64::min),
        cases: rows,
    })
}

pub fn run_identities(seed: u64, cases: usize, out: &Path) -> Result<RunOutcome> {
    let suite = identity_suite(seed, cases)?;
    let mut art = Artifacts::new(out)?;
    let rows: Vec<Vec<f64>> = suite
        .cases
        .iter()
        .map(|c| {
            vec![
                c.seed as f64,
                c.dim as f64,
                c.symmetrization_max,
                c.symmetrization_tolerance,
                c.expansion_order as f64,
                c.expansion_remainder,
                c.expansion_bound,
                c.expansion_slack,
            ]
        })
        .collect();
    art.csv(
        "identities.csv",
        &[
            "seed",
            "dim",
            "symmetrization_max[Frobenius]",
            "symmetrization_tolerance[Frobenius]",
            "expansion_order",
            "expansion_remainder[spectral norm]",
            "expansion_bound[spectral norm]",
            "expansion_slack[bound − remainder]",
        ],
        &rows,
    )?;
    art.json(
        VERDICT,
        &serde_json::json!({
            "cases": suite.cases.len(),
            "symmetrization_worst": suite.symmetrization_worst,
            "expansion_violations": suite.expansion_violations,
            "min_slack": suite.min_slack,
        }),
    )?;
    art.finish(Command::Identities, "identities", seed, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MellinSuite {
    /// `‖F(A)f − f‖/‖f‖` for `F ≡ 1`.
    pub round_trip: f64,
    /// `|‖f̂‖ − ‖f‖| / ‖f‖`.
    pub unitarity: f64,
    /// Worst pointwise `|Af − λ₀f|/|λ₀f|` on the window interior.
    pub eigen_error: f64,
    /// `(M/N, leakage)` for `N = 32`, `R = √M`.
    pub leakage: Vec<(f64, f64)>,
}

fn smooth_step(x: f64) -> f64 {
    let s = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    s(x) / (s(x) + s(1.0 - x))
}

pub fn mellin_suite() -> Result<MellinSuite> {
    let g = make_grid(GridSpec::new(100.0, 2048, 0.01))?;
    let shell = RadialField::from_phi(
        g.clone(),
        |r| Complex64::from_polar((-(r.ln() - 2.5).powi(2) * 4.0).exp(), 0.3 * r),
        0.0,
    );
    let log = LogGridSpec::for_grid(&g);
    let id = SpectralMultiplierA::from_real(log, |_| 1.0);
    let n0 = shell.mass().sqrt();
    let back = func_of_dilation(&id, &shell)?;
    let round_trip = back.sub(&shell).mass().sqrt() / n0;
    let unitarity = (mellin_norm_sq(&mellin_forward(&shell, log)?).sqrt() - n0).abs() / n0;

    let g = make_grid(GridSpec::new(200.0, 4096, 0.01))?;
    let l0 = 3.0;
    let win = |r: f64| smooth_step((r.ln() - 1.0) / 1.5) * smooth_step((4.9 - r.ln()) / 1.0);
    let f = RadialField::from_phi(g.clone(), |r| Complex64::from_polar(win(r) * r.powf(-1.5), l0 * r.ln()), 0.0);
    let m = SpectralMultiplierA::from_real(LogGridSpec::for_grid(&g), |l| l);
    let af = func_of_dilation(&m, &f)?;
    let eigen_error = f
        .grid
        .r
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 2.5f64.exp() && r < 3.9f64.exp())
        .map(|(j, _)| (af.u[j] - f.u[j] * l0).norm() / (f.u[j] * l0).norm())
        .fold(0.0, f64::max);

    let g = make_grid(GridSpec::new(100.0, 2048, 0.01))?;
    let bump = RadialField::from_real_phi(g, |r| (-(r.ln() - 2.0).powi(2) * 4.0).exp());
    let n = 32.0;
    let leakage = [4.0, 8.0, 16.0]
        .iter()
        .map(|&k| highlow_leakage(n, k * n, (k * n).sqrt(), &bump, &bump).map(|l| (k, l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MellinSuite {
        round_trip,
        unitarity,
        eigen_error,
        leakage,
    })
}

pub fn run_mellin(out: &Path) -> Result<RunOutcome> {
    let s = mellin_suite()?;
    let mut art = Artifacts::new(out)?;
    let rows: Vec<Vec<f64>> = s.leakage.iter().map(|&(k, l)| vec![k, l]).collect();
    art.csv("mellin_leakage.csv", &["m_over_n[ratio]", "leakage[relative to ‖fg‖]"], &rows)?;
    art.json(VERDICT, &s)?;
    art.finish(Command::Mellin, "mellin", 0, None)
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory")));
    }
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

fn check_csv(path: &Path) -> Result<()> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let width = r.headers().map_err(|e| Error::format(path, e.to_string()))?.len();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::format(path, format!("row {} has {} fields, expected {width}", i + 1, rec.len())));
        }
        if let Some(bad) = rec.iter().find(|v| v.trim().parse::<f64>().is_err()) {
            return Err(Error::format(path, format!("row {}: {bad:?} is not a number", i + 1)));
        }
    }
    Ok(())
}

/// Verifies every file listed in the manifest and returns a one-page summary.
pub fn report(dir: &Path) -> Result<String> {
    let m = read_manifest(dir)?;
    for f in &m.files {
        let p = dir.join(&f.path);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if f.path.ends_with(".csv") {
            check_csv(&p)?;
        }
        if sha256_hex(&bytes) != f.sha256 {
            return Err(Error::format(&p, "contents do not match the manifest hash"));
        }
    }
    let vpath = dir.join(VERDICT);
    let vtext = fs::read_to_string(&vpath).map_err(|e| Error::io(&vpath, e))?;
    let mut s = String::new();
    let _ = writeln!(s, "run {} ({}), radnls {}", m.name, m.command.name(), m.version);
    if let Some(h) = &m.config_sha256 {
        let _ = writeln!(s, "config sha256 {h}, seed {}", m.seed);
    }
    let _ = writeln!(s, "{} files verified", m.files.len());
    match m.command {
        Command::Identities => {
            let v: serde_json::Value = serde_json::from_str(&vtext).map_err(|e| Error::format(&vpath, e.to_string()))?;
            let _ = writeln!(s, "identity cases: {}", v["cases"]);
            let _ = writeln!(s, "worst symmetrization residual: {}", v["symmetrization_worst"]);
            let _ = writeln!(s, "expansion bound violations: {}", v["expansion_violations"]);
            let _ = writeln!(s, "minimum expansion slack: {}", v["min_slack"]);
        }
        Command::Mellin => {
            let v: MellinSuite = serde_json::from_str(&vtext).map_err(|e| Error::format(&vpath, e.to_string()))?;
            let _ = writeln!(s, "Mellin round trip: {:.3e}", v.round_trip);
            let _ = writeln!(s, "dilation eigen error: {:.3e}", v.eigen_error);
            for (k, l) in &v.leakage {
                let _ = writeln!(s, "leakage M/N={k}: {l:.3e}");
            }
        }
        _ => {
            let v: RunVerdict = serde_json::from_str(&vtext).map_err(|e| Error::format(&vpath, e.to_string()))?;
            let _ = writeln!(s, "T = {}, {} snapshots", v.t_end, v.snapshots);
            let _ = writeln!(s, "mass drift: {:.3e}", v.mass_drift);
            let _ = writeln!(s, "energy drift: {:.3e}", v.energy_drift);
            if let Some(p) = v.pseudo_conformal_drift {
                let _ = writeln!(s, "pseudo-conformal drift: {p:.3e}");
            }
            match v.valid_until {
                Some(t) => {
                    let _ = writeln!(s, "boundary tolerance exceeded at t = {t}");
                }
                None => {
                    let _ = writeln!(s, "boundary mass within tolerance");
                }
            }
            for g in &v.gamma_limit {
                let _ = writeln!(
                    s,
                    "Γ_hat(α={}) = {:.6} ± {:.2e}, non-negative: {}, decay rate: {}",
                    g.alpha,
                    g.gamma_hat,
                    g.tail_oscillation,
                    g.non_negative,
                    fmt_opt(g.decay_rate)
                );
            }
            for p in &v.propagation {
                let _ = writeln!(
                    s,
                    "{} (t₀={}{}): tail ratio {:.3}, converged: {}, exponent: {}",
                    p.preset,
                    p.t0,
                    if p.scaled { ", scaled" } else { "" },
                    p.tail_ratio,
                    p.converged,
                    fmt_opt(p.fitted_exponent)
                );
            }
            for b in &v.boundary {
                let _ = writeln!(s, "boundary α={}: growth exponent {}", b.alpha, fmt_opt(b.growth_exponent));
            }
            if let Some(r) = v.virial_relative_rms {
                let _ = writeln!(s, "virial relative rms residual: {r:.3e}");
            }
            for w in &v.morawetz {
                let _ = writeln!(s, "Morawetz M={}: max residual {:.3e}", w.m, w.max_residual);
            }
            if let Some(c) = &v.channel {
                for (a, b, g) in &c.cauchy_gaps {
                    let _ = writeln!(s, "channel Cauchy gap ω({a})−ω({b}): {:.2}% of ‖φ₀‖", 100.0 * g);
                }
                let _ = writeln!(
                    s,
                    "channel α₀={}: late gap {:.3e}, accepted: {}, ‖ω‖² = {:.6}",
                    c.alpha0, c.late_gap, c.accepted, c.omega_mass
                );
            }
        }
    }
    Ok(s)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}
