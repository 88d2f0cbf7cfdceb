//! One-dimensional model operators: kernels of line symbols, bulk densities,
//! finite sections on `[0, X]` and the Hilbert-Schmidt cross norm.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac_symbols::{superposition_spectrum, DiracLine};
use crate::entropy_functions::SpectralFunction;
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::quadrature::{integrate, integrate_local, partition, QuadOptions};
use crate::spin_algebra::{
    clifford_basis, frobenius_sq, hermitian_eigen, hermitian_spectrum, max_abs, SpinorMatrix,
};

/// Kernel integrals are truncated where the symbol tail is below this.
pub const KERNEL_TAIL_TOL: f64 = 1e-13;
/// Absolute tolerance of the kernel quadrature (before the `1/pi` factor).
pub const KERNEL_QUAD_TOL: f64 = 1e-12;
/// Eigenvalues of sections may leave `[0, 1]` by this much before counting as clipped.
pub const CLIP_TOL: f64 = 1e-8;
/// `|k(X/2)|_F / |k(0)|_F` above this means the section is too short.
pub const SECTION_DECAY_LIMIT: f64 = 0.1;

const DENSITY_LEVEL: f64 = 1e-40;
const ALIAS_LEVEL: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// A Hermitian 4x4 symbol on a line written as `A(t) = sum_c M_c g_c(t)` with
/// constant Hermitian `M_c` and real profiles `g_c` that are even or odd in `t`.
///
/// The split turns every matrix Fourier transform into a handful of scalar
/// cosine and sine transforms.
pub trait LineSymbol: Sync {
    fn terms(&self) -> Vec<(SpinorMatrix, Parity)>;

    /// Writes `g_c(t)` for `t > 0`.
    fn profiles(&self, t: f64, out: &mut [f64]);

    /// Upper bound on `int_T^inf max_c |g_c(t)| dt`.
    fn profile_tail(&self, t: f64) -> f64;

    /// A radius beyond which every `|g_c|` is below `level`.
    fn band_radius(&self, level: f64) -> f64;

    /// Points on `t > 0` where the profiles change character.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Length over which the kernel decays by a factor `e`.
    fn decay_length(&self) -> f64;

    /// Width of the kernel near the origin.
    fn kernel_width(&self) -> f64;

    /// A Hermitian involution commuting with the symbol at every `t`.
    fn reducing_involution(&self) -> Option<SpinorMatrix> {
        None
    }

    /// Spectrum of `sum_c M_c coeffs[c]`.
    fn combination_spectrum(&self, coeffs: &[f64]) -> Result<[f64; 4]> {
        hermitian_spectrum(&combine(&self.terms(), coeffs))
    }

    /// Spectrum of `sum_j A(ts[j])`, all `ts[j] != 0`.
    fn image_spectrum(&self, ts: &[f64]) -> Result<[f64; 4]> {
        let nc = self.terms().len();
        let mut g = vec![0.0; nc];
        let mut acc = vec![0.0; nc];
        for &t in ts {
            self.signed_profiles(t, &mut g);
            for c in 0..nc {
                acc[c] += g[c];
            }
        }
        self.combination_spectrum(&acc)
    }

    /// Signed profile values at any `t != 0`.
    fn signed_profiles(&self, t: f64, out: &mut [f64]) {
        self.profiles(t.abs(), out);
        if t < 0.0 {
            for (g, (_, parity)) in out.iter_mut().zip(self.terms()) {
                if parity == Parity::Odd {
                    *g = -*g;
                }
            }
        }
    }

    fn eval(&self, t: f64) -> SpinorMatrix {
        let terms = self.terms();
        let mut g = vec![0.0; terms.len()];
        self.signed_profiles(t, &mut g);
        combine(&terms, &g)
    }
}

fn combine(terms: &[(SpinorMatrix, Parity)], coeffs: &[f64]) -> SpinorMatrix {
    terms
        .iter()
        .zip(coeffs)
        .fold(SpinorMatrix::zeros(), |acc, ((m, _), &c)| {
            acc + m * Complex64::new(c, 0.0)
        })
}

impl LineSymbol for DiracLine {
    fn terms(&self) -> Vec<(SpinorMatrix, Parity)> {
        let b = clifford_basis();
        let half = Complex64::new(0.5, 0.0);
        let (sn, cs) = self.angle.sin_cos();
        let transverse = (b[0] * Complex64::new(cs, 0.0) + b[1] * Complex64::new(sn, 0.0)) * half;
        let mut terms = vec![
            (SpinorMatrix::identity() * half, Parity::Even),
            (b[2] * half, Parity::Odd),
        ];
        if self.s > 0.0 {
            terms.push((transverse, Parity::Even));
        }
        if self.params.rescaled_mass() > 0.0 {
            terms.push((-b[3] * half, Parity::Even));
        }
        terms
    }

    fn profiles(&self, t: f64, out: &mut [f64]) {
        let mu = self.params.rescaled_mass();
        let r = (self.s * self.s + t * t + mu * mu).sqrt();
        let phi = self.params.cutoff.evaluate(r);
        let w = if r > 0.0 { phi / r } else { 0.0 };
        out[0] = phi;
        out[1] = t * w;
        let mut k = 2;
        if self.s > 0.0 {
            out[k] = self.s * w;
            k += 1;
        }
        if mu > 0.0 {
            out[k] = mu * w;
        }
    }

    fn profile_tail(&self, t: f64) -> f64 {
        // every profile is bounded by phi(r) <= phi(|t|)
        self.params.cutoff.tail_integral(t, 1.0)
    }

    fn band_radius(&self, level: f64) -> f64 {
        self.params.cutoff.level_radius(level).max(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let g = self.gap();
        if g > 0.0 {
            vec![0.25 * g, g, 4.0 * g]
        } else {
            Vec::new()
        }
    }

    fn decay_length(&self) -> f64 {
        let g = self.gap();
        if g > 0.0 {
            1.0 / g + 1.0 / self.params.cutoff.scale
        } else {
            f64::INFINITY
        }
    }

    fn kernel_width(&self) -> f64 {
        // phi(r) ~ exp(-s/scale - t^2/(2 s scale)) for large s
        let g = self.gap();
        if g > 0.0 {
            1.0 / (2.0 * g * self.params.cutoff.scale).sqrt()
        } else {
            f64::INFINITY
        }
    }

    fn reducing_involution(&self) -> Option<SpinorMatrix> {
        let b = clifford_basis();
        let (sn, cs) = self.angle.sin_cos();
        let transverse = b[0] * Complex64::new(cs, 0.0) + b[1] * Complex64::new(sn, 0.0);
        Some(transverse * b[2] * b[3] * Complex64::new(0.0, 1.0))
    }

    fn image_spectrum(&self, ts: &[f64]) -> Result<[f64; 4]> {
        let points: Vec<[f64; 3]> = ts.iter().map(|&t| self.point(t)).collect();
        superposition_spectrum(&self.params, &points, 1.0)
    }

    fn combination_spectrum(&self, coeffs: &[f64]) -> Result<[f64; 4]> {
        // identity coefficient plus anticommuting Hermitian involutions
        let a0 = 0.5 * coeffs[0];
        let norm = 0.5 * coeffs[1..].iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok([a0 - norm, a0 - norm, a0 + norm, a0 + norm])
    }
}

/// Scalar test symbol `amplitude * exp(-t^2) * 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLine {
    pub amplitude: f64,
}

impl GaussianLine {
    pub fn unit() -> Self {
        Self { amplitude: 1.0 }
    }

    pub fn zero() -> Self {
        Self { amplitude: 0.0 }
    }
}

impl LineSymbol for GaussianLine {
    fn terms(&self) -> Vec<(SpinorMatrix, Parity)> {
        vec![(SpinorMatrix::identity(), Parity::Even)]
    }

    fn profiles(&self, t: f64, out: &mut [f64]) {
        out[0] = self.amplitude * (-t * t).exp();
    }

    fn profile_tail(&self, t: f64) -> f64 {
        let full = 0.5 * PI.sqrt();
        let bound = if t > 0.0 {
            full.min((-t * t).exp() / (2.0 * t))
        } else {
            full
        };
        self.amplitude.abs() * bound
    }

    fn band_radius(&self, level: f64) -> f64 {
        if self.amplitude.abs() <= level {
            0.0
        } else {
            (self.amplitude.abs() / level).ln().sqrt()
        }
    }

    fn decay_length(&self) -> f64 {
        2.0
    }

    fn kernel_width(&self) -> f64 {
        1.0
    }

    fn combination_spectrum(&self, coeffs: &[f64]) -> Result<[f64; 4]> {
        Ok([coeffs[0]; 4])
    }
}

fn tail_cutoff<S: LineSymbol + ?Sized>(line: &S, tol: f64) -> Result<f64> {
    if !line.profile_tail(0.0).is_finite() {
        return Err(Error::Accuracy(
            "symbol tail is not integrable; no finite kernel cutoff exists".into(),
        ));
    }
    if line.profile_tail(0.0) <= tol {
        return Ok(0.0);
    }
    let mut hi = line.band_radius(1e-3).max(1.0);
    while line.profile_tail(hi) > tol {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Accuracy(format!(
                "symbol tail bound stays above {tol:.1e} beyond t = 1e8"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if line.profile_tail(mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

enum Frequencies<'a> {
    Uniform { step: f64, count: usize },
    List(&'a [f64]),
}

impl Frequencies<'_> {
    fn len(&self) -> usize {
        match self {
            Self::Uniform { count, .. } => *count,
            Self::List(u) => u.len(),
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            Self::Uniform { step, count } => step.abs() * count.saturating_sub(1) as f64,
            Self::List(u) => u.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }
}

fn transform<S: LineSymbol + ?Sized>(line: &S, freqs: Frequencies) -> Result<Vec<SpinorMatrix>> {
    let terms = line.terms();
    let nc = terms.len();
    let nu = freqs.len();
    if nu == 0 {
        return Ok(Vec::new());
    }
    let cutoff = tail_cutoff(line, PI * KERNEL_TAIL_TOL)?;
    if cutoff == 0.0 {
        return Ok(vec![SpinorMatrix::zeros(); nu]);
    }
    let umax = freqs.max_abs();
    let mut width = cutoff / 8.0;
    if umax > 0.0 {
        width = width.min(PI / (2.0 * umax));
    }
    if cutoff / width > 5e6 {
        return Err(Error::Accuracy(format!(
            "kernel quadrature would need {:.1e} panels (cutoff {cutoff:.3e}, |u| up to {umax:.3e})",
            cutoff / width
        )));
    }
    let nodes = partition(0.0, cutoff, width, &line.breakpoints());
    let parity: Vec<Parity> = terms.iter().map(|(_, p)| *p).collect();
    let integrand = |t: f64, out: &mut [f64]| {
        let mut g = [0.0; 8];
        line.profiles(t, &mut g[..nc]);
        let mut put = |j: usize, z: Complex64| {
            for c in 0..nc {
                out[c * nu + j] = g[c]
                    * match parity[c] {
                        Parity::Even => z.re,
                        Parity::Odd => z.im,
                    };
            }
        };
        match &freqs {
            Frequencies::Uniform { step, .. } => {
                let w = Complex64::cis(step * t);
                let mut z = Complex64::new(1.0, 0.0);
                for j in 0..nu {
                    if j % 64 == 0 {
                        z = Complex64::cis(j as f64 * step * t);
                    }
                    put(j, z);
                    z *= w;
                }
            }
            Frequencies::List(us) => {
                for (j, &u) in us.iter().enumerate() {
                    put(j, Complex64::cis(u * t));
                }
            }
        }
    };
    let res = integrate_local(integrand, nc * nu, &nodes, KERNEL_QUAD_TOL, 40);
    if !res.converged {
        return Err(Error::Accuracy(format!(
            "kernel quadrature did not reach {KERNEL_QUAD_TOL:.0e} (estimated error {:.3e})",
            res.error
        )));
    }
    Ok((0..nu)
        .map(|j| {
            terms
                .iter()
                .enumerate()
                .fold(SpinorMatrix::zeros(), |acc, (c, (m, p))| {
                    let v = res.value[c * nu + j] / PI;
                    let z = match p {
                        Parity::Even => Complex64::new(v, 0.0),
                        Parity::Odd => Complex64::new(0.0, v),
                    };
                    acc + m * z
                })
        })
        .collect())
}

/// `k(u) = (2 pi)^{-1} int e^{iut} A(t) dt` by adaptive Gauss-Kronrod
/// quadrature on `[0, T]`, with `T` from the symbol tail bound and panels no
/// wider than a quarter period.
pub fn line_kernel<S: LineSymbol + ?Sized>(line: &S, u: f64) -> Result<SpinorMatrix> {
    Ok(transform(line, Frequencies::List(&[u]))?.remove(0))
}

/// Kernel at several points in one quadrature pass.
pub fn line_kernels<S: LineSymbol + ?Sized>(line: &S, us: &[f64]) -> Result<Vec<SpinorMatrix>> {
    transform(line, Frequencies::List(us))
}

/// `k(j dx)` for `j = 0..count`.
pub fn kernel_table<S: LineSymbol + ?Sized>(line: &S, dx: f64, count: usize) -> Result<Vec<SpinorMatrix>> {
    transform(line, Frequencies::Uniform { step: dx, count })
}

/// Cross-check of [`kernel_table`]: trapezoid rule on the band
/// `[-pi/dx, pi/dx)` with `fft_len` nodes, evaluated by one inverse FFT per
/// term. Agrees with the quadrature kernel up to the symbol size at the band
/// edge and the trapezoid error.
pub fn kernel_table_fft<S: LineSymbol + ?Sized>(
    line: &S,
    dx: f64,
    count: usize,
    fft_len: usize,
) -> Result<Vec<SpinorMatrix>> {
    if fft_len < 2 * count || !fft_len.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "fft length {fft_len} must be even and at least twice the table size {count}"
        )));
    }
    let terms = line.terms();
    let nc = terms.len();
    let dt = 2.0 * PI / (fft_len as f64 * dx);
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(fft_len);
    let mut columns = vec![vec![Complex64::new(0.0, 0.0); fft_len]; nc];
    let mut g = vec![0.0; nc];
    let half = fft_len as i64 / 2;
    for m in -half..half {
        let idx = m.rem_euclid(fft_len as i64) as usize;
        if m == 0 {
            line.profiles(0.0, &mut g);
            for (c, (_, p)) in terms.iter().enumerate() {
                // odd profiles average to zero across the jump
                let v = if *p == Parity::Odd { 0.0 } else { g[c] };
                columns[c][idx] = Complex64::new(v, 0.0);
            }
        } else {
            line.signed_profiles(m as f64 * dt, &mut g);
            for c in 0..nc {
                columns[c][idx] = Complex64::new(g[c], 0.0);
            }
        }
    }
    for col in columns.iter_mut() {
        fft.process(col);
    }
    let scale = dt / (2.0 * PI);
    Ok((0..count)
        .map(|j| {
            terms
                .iter()
                .enumerate()
                .fold(SpinorMatrix::zeros(), |acc, (c, (m, _))| acc + m * (columns[c][j] * scale))
        })
        .collect())
}

fn spectrum_trace<S: LineSymbol + ?Sized>(line: &S, f: &SpectralFunction, ts: &[f64]) -> Result<f64> {
    Ok(line
        .image_spectrum(ts)?
        .iter()
        .map(|&l| f.eval(l))
        .sum())
}

fn check_vanishing_at_zero(f: &SpectralFunction) -> Result<()> {
    if f.eval(0.0) != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bulk density needs f(0) = 0, got f(0) = {} for {}",
            f.eval(0.0),
            f.label()
        )));
    }
    Ok(())
}

/// `rho = (2 pi)^{-1} int tr f(A(t)) dt` over the whole line. Requires `f(0) = 0`.
pub fn density_rho<S: LineSymbol + ?Sized>(line: &S, f: &SpectralFunction) -> Result<f64> {
    check_vanishing_at_zero(f)?;
    let end = line.band_radius(DENSITY_LEVEL);
    if end == 0.0 {
        return Ok(0.0);
    }
    let core = line.band_radius(0.5).max(1e-3 * end);
    let mut nodes = partition(0.0, (4.0 * core).min(end), core / 4.0, &line.breakpoints());
    let mut x = *nodes.last().unwrap();
    while x < end {
        x = (2.0 * x).min(end);
        nodes.push(x);
    }
    let failed = std::sync::Mutex::new(None);
    let integrand = |t: f64| {
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            match spectrum_trace(line, f, &[sign * t]) {
                Ok(v) => total += v,
                Err(e) => {
                    failed.lock().unwrap().get_or_insert(e);
                }
            }
        }
        total
    };
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_panels: 100_000,
    };
    let r = integrate(|t, out: &mut [f64]| out[0] = integrand(t), 1, &nodes, opts);
    if let Some(e) = failed.into_inner().unwrap() {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::Accuracy(format!(
            "density quadrature did not converge (error {:.3e})",
            r.error
        )));
    }
    Ok(r.value[0] / (2.0 * PI))
}

/// Bulk density seen by a Nystrom section with spacing `dx`:
/// `(2 pi)^{-1} int_{-pi/dx}^{pi/dx} tr f(A_per(t)) dt` with the periodized
/// symbol `A_per(t) = sum_j A(t + 2 pi j / dx)`, which is the symbol of the
/// infinite block Toeplitz matrix `dx k((i - j) dx)`.
pub fn density_discrete<S: LineSymbol + ?Sized>(line: &S, f: &SpectralFunction, dx: f64) -> Result<f64> {
    check_vanishing_at_zero(f)?;
    let period = 2.0 * PI / dx;
    let reach = line.band_radius(ALIAS_LEVEL);
    let images = (reach / period + 1.0).ceil() as i64;
    if images > 10_000 {
        return Err(Error::Accuracy(format!(
            "periodized symbol needs {images} images; spacing {dx} too coarse for this cutoff"
        )));
    }
    let failed = std::sync::Mutex::new(None);
    let integrand = |t: f64, out: &mut [f64]| {
        let ts: Vec<f64> = (-images..=images)
            .map(|j| t + j as f64 * period)
            .filter(|&tj| tj != 0.0)
            .collect();
        out[0] = match spectrum_trace(line, f, &ts) {
            Ok(v) => v,
            Err(e) => {
                failed.lock().unwrap().get_or_insert(e);
                0.0
            }
        };
    };
    let half = 0.5 * period;
    let mut bps: Vec<f64> = line.breakpoints();
    bps.extend(line.breakpoints().iter().map(|b| -b));
    bps.push(0.0);
    let nodes = partition(-half, half, half / 8.0, &bps);
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_panels: 100_000,
    };
    let r = integrate(integrand, 1, &nodes, opts);
    if let Some(e) = failed.into_inner().unwrap() {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::Accuracy(format!(
            "discrete density quadrature did not converge (error {:.3e})",
            r.error
        )));
    }
    Ok(r.value[0] / (2.0 * PI))
}

/// Section geometry: `points` nodes `x_i = (i + 1/2) dx` on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionGeometry {
    pub length: f64,
    pub points: usize,
    pub dx: f64,
}

/// How to size a finite section. Unset length and point count are derived
/// from the symbol: `X = decay_lengths * decay_length` and
/// `dx = min(pi / band_radius(band_level), resolution * kernel_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionSpec {
    pub length: Option<f64>,
    pub points: Option<usize>,
    pub decay_lengths: f64,
    pub resolution: f64,
    pub band_level: f64,
    pub max_points: usize,
}

impl Default for SectionSpec {
    fn default() -> Self {
        Self {
            length: None,
            points: None,
            decay_lengths: 5.0,
            resolution: 0.15,
            band_level: 1e-7,
            max_points: 1000,
        }
    }
}

impl SectionSpec {
    pub fn resolve<S: LineSymbol + ?Sized>(&self, line: &S) -> Result<SectionGeometry> {
        let length = match self.length {
            Some(x) => x,
            None => self.decay_lengths * line.decay_length(),
        };
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "section length must be positive and finite, got {length} (the line may pass through the singular point)"
            )));
        }
        let points = match self.points {
            Some(n) => n,
            None => {
                let band = line.band_radius(self.band_level);
                let mut dx = self.resolution * line.kernel_width();
                if band > 0.0 {
                    dx = dx.min(PI / band);
                }
                if !dx.is_finite() {
                    dx = length / 16.0;
                }
                let n = (length / dx).ceil() as usize;
                n.max(8).div_ceil(2) * 2
            }
        };
        if points < 2 {
            return Err(Error::InvalidArgument(format!(
                "section needs at least two points, got {points}"
            )));
        }
        if points > self.max_points {
            return Err(Error::Size(format!(
                "section of length {length:.4} needs {points} points, above the limit {}; raise max_points or shorten the section",
                self.max_points
            )));
        }
        Ok(SectionGeometry {
            length,
            points,
            dx: length / points as f64,
        })
    }
}

/// Boundary trace of one spectral function on a finite section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub function: SpectralFunction,
    /// `tr f(C_X) - X rho`: the contribution of both section edges.
    pub value: f64,
    /// `|value(X) - value(X/2)|`.
    pub error: f64,
    pub bulk_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub geometry: SectionGeometry,
    pub traces: Vec<PairValue>,
    pub clipped: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub decay_ratio: f64,
}

/// Eigenvector basis of an involution, `-1` eigenvectors first.
fn involution_basis(omega: &SpinorMatrix) -> Result<SpinorMatrix> {
    let (u, d) = hermitian_eigen(omega)?;
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    if !(d[order[1]] < 0.0 && d[order[2]] > 0.0) {
        return Err(Error::Numerical(format!(
            "reducing involution does not split 2 + 2: eigenvalues {d:?}"
        )));
    }
    let mut v = SpinorMatrix::zeros();
    for (col, &k) in order.iter().enumerate() {
        v.set_column(col, &u.column(k));
    }
    Ok(v)
}

/// Eigenvalues of the Nystrom section built from `table[0..points]`.
pub fn section_eigenvalues(
    table: &[SpinorMatrix],
    points: usize,
    dx: f64,
    involution: Option<&SpinorMatrix>,
) -> Result<Vec<f64>> {
    let blocks: Vec<(usize, Vec<Vec<Complex64>>)> = match involution {
        Some(omega) => {
            let v = involution_basis(omega)?;
            let mut plus = Vec::with_capacity(points);
            let mut minus = Vec::with_capacity(points);
            let scale = table.iter().take(points).map(max_abs).fold(0.0, f64::max).max(1e-300);
            for k in &table[..points] {
                let b = v.adjoint() * k * v;
                let mut off = 0.0_f64;
                for r in 0..2 {
                    for c in 2..4 {
                        off = off.max(b[(r, c)].norm()).max(b[(c, r)].norm());
                    }
                }
                if off > 1e-12 * scale {
                    return Err(Error::Numerical(format!(
                        "kernel is not block diagonal in the involution basis (off-diagonal {off:.3e})"
                    )));
                }
                minus.push(vec![b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]]);
                plus.push(vec![b[(2, 2)], b[(2, 3)], b[(3, 2)], b[(3, 3)]]);
            }
            vec![(2, minus), (2, plus)]
        }
        None => vec![(
            4,
            table[..points]
                .iter()
                .map(|k| k.transpose().iter().copied().collect())
                .collect(),
        )],
    };
    let mut all = Vec::with_capacity(4 * points);
    for (b, entries) in blocks {
        let dim = b * points;
        let eig = hermitian_eigenvalues(dim, |i, j| {
            // lower triangle: i >= j, so the block offset is nonnegative
            let (bi, ri) = (i / b, i % b);
            let (bj, rj) = (j / b, j % b);
            let z = if bi >= bj {
                entries[bi - bj][ri * b + rj]
            } else {
                entries[bj - bi][rj * b + ri].conj()
            } * dx;
            faer::c64::new(z.re, z.im)
        })?;
        all.extend(eig);
    }
    all.sort_by(|a, b| a.total_cmp(b));
    Ok(all)
}

/// Finite-section boundary traces `tr f(C_X) - X rho_dx` for each function,
/// with an error estimate from the section of half length. Requires `f(0) = 0`.
pub fn finite_section_traces<S: LineSymbol + ?Sized>(
    line: &S,
    functions: &[SpectralFunction],
    spec: &SectionSpec,
) -> Result<SectionReport> {
    let geometry = spec.resolve(line)?;
    let SectionGeometry { points, dx, length } = geometry;
    let table = kernel_table(line, dx, points)?;
    let k0 = frobenius_sq(&table[0]).sqrt();
    let decay_ratio = if k0 > 0.0 {
        frobenius_sq(&table[points / 2]).sqrt() / k0
    } else {
        0.0
    };
    if decay_ratio > SECTION_DECAY_LIMIT {
        return Err(Error::SectionTooShort { ratio: decay_ratio });
    }
    let omega = line.reducing_involution();
    let half = points / 2;
    let (full, short) = rayon::join(
        || section_eigenvalues(&table, points, dx, omega.as_ref()),
        || section_eigenvalues(&table, half, dx, omega.as_ref()),
    );
    let (full, short) = (full?, short?);
    let clipped = full
        .iter()
        .filter(|&&l| !(-CLIP_TOL..=1.0 + CLIP_TOL).contains(&l))
        .count();
    if clipped * 100 > full.len() {
        return Err(Error::NumericalQuality {
            clipped,
            dim: full.len(),
            tol: CLIP_TOL,
        });
    }
    let min_eigenvalue = full.first().copied().unwrap_or(0.0);
    let max_eigenvalue = full.last().copied().unwrap_or(0.0);
    let mut traces = Vec::with_capacity(functions.len());
    for f in functions {
        let bulk = density_discrete(line, f, dx)?;
        let sum = |eigs: &[f64]| eigs.iter().map(|&l| f.eval(l.clamp(0.0, 1.0))).sum::<f64>();
        let value = sum(&full) - length * bulk;
        let value_half = sum(&short) - half as f64 * dx * bulk;
        traces.push(PairValue {
            function: *f,
            value,
            error: (value - value_half).abs(),
            bulk_density: bulk,
        });
    }
    Ok(SectionReport {
        geometry,
        traces,
        clipped,
        min_eigenvalue,
        max_eigenvalue,
        decay_ratio,
    })
}

/// Hilbert-Schmidt cross norm with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossNorm {
    pub value: f64,
    pub error: f64,
}

/// `int_0^inf u |k(u)|_F^2 du`: the squared Hilbert-Schmidt norm of the
/// half-line cross block `chi_- Op(A) chi_+`.
///
/// Panels of half a decay length are added until two successive panels
/// contribute less than `1e-11` of the total; the remaining tail is
/// extrapolated geometrically and counted as error.
pub fn hs_cross_norm<S: LineSymbol + ?Sized>(line: &S) -> Result<CrossNorm> {
    let width = 0.5 * line.decay_length();
    if !width.is_finite() {
        return Err(Error::InvalidArgument(
            "cross norm diverges for a line through the singular point".into(),
        ));
    }
    let panel = |a: f64, b: f64| -> Result<(f64, f64)> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut us = vec![c];
        for x in crate::quadrature::kronrod_nodes() {
            us.push(c - h * x);
            us.push(c + h * x);
        }
        let ks = line_kernels(line, &us)?;
        let vals: Vec<f64> = us.iter().zip(&ks).map(|(u, k)| u * frobenius_sq(k)).collect();
        Ok(crate::quadrature::kronrod_gauss_pair(&vals, h))
    };
    let mut total = 0.0;
    let mut error = 0.0;
    let mut history: Vec<f64> = Vec::new();
    let mut a = 0.0;
    let limit = 400.0 * width;
    loop {
        let b = a + width;
        // bisect until each piece is resolved
        let mut stack = vec![(a, b, 0u32)];
        let mut contrib = 0.0;
        while let Some((lo, hi, depth)) = stack.pop() {
            let (v, e) = panel(lo, hi)?;
            if e > 1e-12 * (1.0 + v.abs()) && depth < 20 {
                let mid = 0.5 * (lo + hi);
                stack.push((lo, mid, depth + 1));
                stack.push((mid, hi, depth + 1));
            } else {
                contrib += v;
                error += e;
            }
        }
        total += contrib;
        history.push(contrib);
        a = b;
        let n = history.len();
        // below this the integrand is quadrature noise in k(u)
        let floor = b * width * (4.0 * KERNEL_QUAD_TOL / PI).powi(2);
        let negligible = |c: f64| c.abs() <= (1e-11 * total.abs()).max(floor);
        if n >= 4 && negligible(history[n - 1]) && negligible(history[n - 2]) {
            break;
        }
        if a > limit {
            return Err(Error::Accuracy(format!(
                "cross-norm integrand has not decayed by u = {a:.3e}"
            )));
        }
    }
    let n = history.len();
    let (last, prev) = (history[n - 1], history[n - 2]);
    if prev != 0.0 {
        let q = last / prev;
        if q > 0.0 && q < 1.0 {
            let tail = last * q / (1.0 - q);
            total += tail;
            error += tail.abs();
        }
    }
    Ok(CrossNorm {
        value: total,
        error,
    })
}
