//! Dense-matrix oracle for commutator and symmetrization identities, and
//! Heisenberg-derivative bookkeeping on trajectories.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{eval_nonlinearity, Trajectory};
use crate::op_functions::representation_tail;
use crate::operators::apply_laplacian;
use crate::radial_grid::{expectation_of, inner, RadialField};
use crate::{Complex64, Cutoff, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    pub m: CMatrix,
    pub seed: Option<u64>,
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

impl HermitianMatrix {
    /// Wraps `m` after checking `‖m − m*‖ ≤ 1e-14·max(1, ‖m‖)`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("matrix is not square"));
        }
        let dev = (&m - m.adjoint()).norm();
        if dev > 1e-14 * m.norm().max(1.0) {
            return Err(Error::invalid(format!("matrix is not Hermitian (deviation {dev:.3e})")));
        }
        Ok(Self { m, seed: None })
    }

    /// Gaussian unitary ensemble sample, Hermitized by averaging.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(d, d, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let m = (&g + g.adjoint()).map(|v| v * 0.5);
        Self { m, seed: Some(seed) }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: CMatrix::identity(d, d),
            seed: None,
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        Self {
            m: CMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::new(values[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
            seed: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            m: self.m.map(|v| v * s),
            seed: self.seed,
        }
    }

    /// `Σ_k c_k A^k`; commutes with `A`.
    pub fn polynomial(&self, coeffs: &[f64]) -> Self {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        let mut pw = CMatrix::identity(d, d);
        for &c in coeffs {
            out += pw.map(|v| v * c);
            pw = &pw * &self.m;
        }
        Self {
            m: (&out + out.adjoint()).map(|v| v * 0.5),
            seed: self.seed,
        }
    }

    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        let e = SymmetricEigen::new(self.m.clone());
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    }
}

/// `f(A)` by eigendecomposition.
pub fn function_of(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, v) = a.eigen();
    let d = vals.len();
    let mut scaled = v.clone();
    for j in 0..d {
        let fj = f(vals[j]);
        for i in 0..d {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * v.adjoint()
}

/// Frobenius residuals of the symmetrization identities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetrizationReport {
    /// `AB²A = BA²B + [[A,B],B]A + B[[A,B],A]`.
    pub ab2a: f64,
    /// `A²BC² = (AC)B(AC) + A²[B,C]C + AC[A,B]C`.
    pub a2bc2_expanded: f64,
    /// `A²B + BA² = 2ABA + [A,[A,B]]`.
    pub abba: f64,
    /// `ABC − CBA = A[B,C] + C[A,B]`.
    pub abc: f64,
    /// `A²BC² + C²BA² = 2(AC)B(AC) + R(A,B,C)`.
    pub a2bc2: f64,
    /// Each remainder term in nested form against its monomial expansion.
    pub remainder_terms: [f64; 4],
    pub scale: f64,
    /// `d²·1e-12·scale³`.
    pub tolerance: f64,
}

impl SymmetrizationReport {
    pub fn max_residual(&self) -> f64 {
        [self.ab2a, self.a2bc2_expanded, self.abba, self.abc, self.a2bc2]
            .into_iter()
            .chain(self.remainder_terms)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_residual() <= self.tolerance
    }
}

/// `R(A,B,C) = A[[A,B],C]C + C[[C,B],A]A + A[C,[C,B]]A + C[A,[A,B]]C`.
pub fn symmetrization_remainder(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> [CMatrix; 4] {
    [
        a * commutator(&commutator(a, b), c) * c,
        c * commutator(&commutator(c, b), a) * a,
        a * commutator(c, &commutator(c, b)) * a,
        c * commutator(a, &commutator(a, b)) * c,
    ]
}

fn remainder_monomials(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> [CMatrix; 4] {
    // [[X,B],Y] = XBY − BXY − YXB + YBX
    let nested = |x: &CMatrix, y: &CMatrix| x * b * y - b * x * y - y * x * b + y * b * x;
    // [X,[X,B]] = XXB − 2XBX + BXX
    let double = |x: &CMatrix| x * x * b - (x * b * x).map(|v| v * 2.0) + b * x * x;
    [
        a * nested(a, c) * c,
        c * nested(c, a) * a,
        a * double(c) * a,
        c * double(a) * c,
    ]
}

pub fn check_symmetrization(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    c: &HermitianMatrix,
) -> Result<SymmetrizationReport> {
    let d = a.dim();
    if b.dim() != d || c.dim() != d {
        return Err(Error::invalid("matrix dimensions differ"));
    }
    let (am, bm, cm) = (&a.m, &b.m, &c.m);
    let scale = spectral_norm(am).max(spectral_norm(bm)).max(spectral_norm(cm));
    let ac_comm = spectral_norm(&commutator(am, cm));
    if ac_comm > 1e-10 * scale.max(1.0).powi(2) {
        return Err(Error::invalid(format!(
            "[A,C] = 0 required; ‖[A,C]‖ = {ac_comm:.3e}"
        )));
    }
    let ab = commutator(am, bm);
    let a2 = am * am;
    let c2 = cm * cm;
    let acm = am * cm;
    let ab2a = (am * bm * bm * am - (bm * &a2 * bm + commutator(&ab, bm) * am + bm * commutator(&ab, am))).norm();
    let a2bc2_expanded = (&a2 * bm * &c2
        - (&acm * bm * &acm + &a2 * commutator(bm, cm) * cm + &acm * &ab * cm))
        .norm();
    let abba = (&a2 * bm + bm * &a2 - ((am * bm * am).map(|v| v * 2.0) + commutator(am, &ab))).norm();
    let abc = (am * bm * cm - cm * bm * am - (am * commutator(bm, cm) + cm * &ab)).norm();
    let terms = symmetrization_remainder(am, bm, cm);
    let r: CMatrix = terms.iter().fold(CMatrix::zeros(d, d), |acc, t| acc + t);
    let a2bc2 = (&a2 * bm * &c2 + &c2 * bm * &a2 - ((&acm * bm * &acm).map(|v| v * 2.0) + r)).norm();
    let mono = remainder_monomials(am, bm, cm);
    let mut remainder_terms = [0.0; 4];
    for i in 0..4 {
        remainder_terms[i] = (&terms[i] - &mono[i]).norm();
    }
    Ok(SymmetrizationReport {
        ab2a,
        a2bc2_expanded,
        abba,
        abc,
        a2bc2,
        remainder_terms,
        scale,
        tolerance: (d * d) as f64 * 1e-12 * scale.powi(3),
    })
}

/// Quadrature approximation of `f(a_i) − f(a_j)` from
/// `[f(A), B] = ∫f̂(s)∫₀^s e^{iuA} i[A,B] e^{i(s−u)A} du ds` in the
/// eigenbasis of `A`.
fn difference_quotient_table(c: &Cutoff, vals: &[f64], tail_tol: f64) -> Result<CMatrix> {
    let d = vals.len();
    let span = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mu = c
        .derivative_support()
        .iter()
        .map(|&(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let ds = 2.0 * std::f64::consts::PI / (1.05 * (span + mu));
    let mut s_max = 8.0 * ds;
    while representation_tail(c, s_max) > tail_tol {
        s_max *= 1.25;
        if s_max / ds > 1e6 {
            return Err(Error::numerical("double-commutator quadrature tail not reached"));
        }
    }
    let half = (s_max / ds).ceil() as usize;
    let gl = crate::quad::GaussLegendre::new(8);
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let (ai, aj) = (vals[i], vals[j]);
            let diff = ai - aj;
            // f̂(s) = mean·δ(s) + ĝ(s)/(is); the δ part drops out of the commutator
            let inner = |s0: f64, s1: f64| -> Complex64 {
                let panels = ((s1 - s0).abs() * diff.abs()).ceil().max(1.0) as usize;
                let w = (s1 - s0) / panels as f64;
                (0..panels)
                    .map(|p| {
                        gl.integrate_c(s0 + p as f64 * w, s0 + (p + 1) as f64 * w, |u| {
                            Complex64::from_polar(1.0, u * diff)
                        })
                    })
                    .sum()
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for sign in [1.0, -1.0] {
                // ∫₀^s e^{iu(a_i−a_j)} du, accumulated node to node
                let mut cum = Complex64::new(0.0, 0.0);
                let mut prev = 0.0;
                for k in 0..half {
                    let s = sign * (k as f64 + 0.5) * ds;
                    cum += inner(prev, s);
                    prev = s;
                    let fhat = c.derivative_fourier(s) / Complex64::new(0.0, s);
                    acc += fhat * ds * Complex64::from_polar(1.0, s * aj) * cum;
                }
            }
            out[(i, j)] = acc * Complex64::new(0.0, diff);
        }
    }
    Ok(out)
}

/// Relative Frobenius difference between `[f₁(A),[f₂(A),B]]` computed
/// directly and through the Fourier double-integral representation.
pub fn check_double_commutator(
    f1: &Cutoff,
    f2: &Cutoff,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::invalid("matrix dimensions differ"));
    }
    let f1a = function_of(a, |l| f1.value(l));
    let f2a = function_of(a, |l| f2.value(l));
    let direct = commutator(&f1a, &commutator(&f2a, &b.m));
    let (vals, v) = a.eigen();
    let q1 = difference_quotient_table(f1, &vals, 1e-7)?;
    let q2 = difference_quotient_table(f2, &vals, 1e-7)?;
    let bt = v.adjoint() * &b.m * &v;
    let rep_t = CMatrix::from_fn(d, d, |i, j| q1[(i, j)] * q2[(i, j)] * bt[(i, j)]);
    let rep = &v * rep_t * v.adjoint();
    let dn = direct.norm();
    let err = (&direct - &rep).norm();
    let scale = b.m.norm().max(1e-300);
    if dn <= 1e-12 * scale {
        return Ok(err / scale);
    }
    Ok(err / dn)
}

/// Record written for each matrix-oracle case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleFixture {
    pub case: String,
    pub seeds: Vec<u64>,
    pub dim: usize,
    pub residuals: Vec<(String, f64)>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergPoint {
    pub t: f64,
    /// Centered difference of `⟨A⟩`.
    pub derivative: f64,
    /// `⟨[−iΔ, A]⟩`.
    pub commutator: f64,
    /// `2 Im(Aφ, 𝒩φ)`.
    pub interaction: f64,
    pub residual: f64,
}

/// Heisenberg bookkeeping `d/dt⟨A⟩ = ⟨[−iΔ, A]⟩ + 2 Im(Aφ, 𝒩φ)` along a run,
/// for a time-independent symmetric observable `A`, at interior snapshots.
pub fn heisenberg_residual(
    run: &Trajectory,
    obs: impl Fn(&RadialField) -> Result<RadialField>,
) -> Result<Vec<HeisenbergPoint>> {
    let s = &run.snapshots;
    if s.len() < 3 {
        return Err(Error::invalid(format!(
            "Heisenberg residual needs at least 3 snapshots, got {}",
            s.len()
        )));
    }
    let expect: Vec<f64> = s
        .iter()
        .map(|f| obs(f).map(|af| expectation_of(&af, f)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(s.len() - 2);
    for k in 1..s.len() - 1 {
        let f = &s[k];
        let t = f.time_tag;
        let derivative = (expect[k + 1] - expect[k - 1]) / (s[k + 1].time_tag - s[k - 1].time_tag);
        let af = obs(f)?;
        let a_lap = obs(&apply_laplacian(f))?;
        let lap_a = apply_laplacian(&af);
        let comm = f.with_u(
            lap_a
                .u
                .iter()
                .zip(&a_lap.u)
                .map(|(x, y)| Complex64::new(0.0, -1.0) * (x - y))
                .collect(),
        );
        let commutator = expectation_of(&comm, f);
        let interaction = if run.spec.is_free() {
            0.0
        } else {
            let nf = eval_nonlinearity(&run.spec, f, t)?;
            2.0 * inner(&nf, &af)?.im
        };
        out.push(HeisenbergPoint {
            t,
            derivative,
            commutator,
            interaction,
            residual: (derivative - commutator - interaction).abs(),
        });
    }
    Ok(out)
}
