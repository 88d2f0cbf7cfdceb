//! Periodic cubic lattice discretization of the regularized Dirac projector,
//! region restrictions, entanglement entropies and the Schatten commutator
//! diagnostic.

use std::collections::HashSet;
use std::f64::consts::PI;

use faer::c64;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dirac_symbols::{momentum_symbol, superposition_spectrum, DiracParams};
use crate::entropy_functions::{RenyiOrder, SpectralFunction};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, HermitianMatrix};
use crate::spin_algebra::{hermitian_spectrum, SpinorMatrix};

/// Largest correlation matrix handled by the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 8192;
/// Eigenvalues of correlation matrices may leave `[0, 1]` by this much.
pub const CLIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusLattice {
    pub box_side: f64,
    pub points_per_dim: usize,
}

impl TorusLattice {
    pub fn new(box_side: f64, points_per_dim: usize) -> Result<Self> {
        if !(box_side.is_finite() && box_side > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box side must be positive, got {box_side}"
            )));
        }
        if points_per_dim < 2 || !points_per_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "points per dimension must be even and at least 2, got {points_per_dim}"
            )));
        }
        Ok(Self {
            box_side,
            points_per_dim,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.box_side / self.points_per_dim as f64
    }

    pub fn sites(&self) -> usize {
        self.points_per_dim.pow(3)
    }

    /// Momentum index folded to `[-N/2, N/2)`.
    pub fn fold(&self, n: usize) -> i64 {
        let n = n as i64;
        let half = self.points_per_dim as i64 / 2;
        if n >= half {
            n - self.points_per_dim as i64
        } else {
            n
        }
    }

    pub fn index(&self, site: [usize; 3]) -> usize {
        let n = self.points_per_dim;
        (site[0] * n + site[1]) * n + site[2]
    }

    /// Linear index of the periodic difference `a - b`.
    pub fn difference_index(&self, a: [usize; 3], b: [usize; 3]) -> usize {
        let n = self.points_per_dim;
        let d = |i: usize| (a[i] + n - b[i]) % n;
        (d(0) * n + d(1)) * n + d(2)
    }
}

/// Switches that relax the lattice preconditions. Relaxations are recorded
/// as warnings on the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeOptions {
    /// Permit `h > epsilon / 3`.
    pub allow_coarse: bool,
    pub margin_factor: f64,
    /// Permit regions closer to their periodic images than the margin rule.
    pub allow_small_margin: bool,
    /// Replace the cutoff by 1 (a sharp projector); massless only.
    pub sharp: bool,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            allow_coarse: false,
            margin_factor: 6.0,
            allow_small_margin: false,
            sharp: false,
        }
    }
}

/// Real-space kernel `K(x) = N^{-3} sum_k e^{ikx} P_grid(k)` on all sites,
/// together with the grid spectra.
#[derive(Debug, Clone)]
pub struct LatticeKernel {
    pub lattice: TorusLattice,
    pub params: DiracParams,
    pub options: LatticeOptions,
    fields: Vec<SpinorMatrix>,
    spectra: Vec<[f64; 4]>,
    symbols: Vec<SpinorMatrix>,
    pub warnings: Vec<String>,
}

fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // last axis is contiguous
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for stride in [n, n * n] {
        for base in 0..n * n * n {
            if (base / stride) % n != 0 {
                continue;
            }
            for (k, z) in line.iter_mut().enumerate() {
                *z = data[base + k * stride];
            }
            fft.process(&mut line);
            for (k, z) in line.iter().enumerate() {
                data[base + k * stride] = *z;
            }
        }
    }
}

fn fields_from_symbols(n: usize, symbols: &[SpinorMatrix]) -> Vec<SpinorMatrix> {
    let total = n * n * n;
    let columns: Vec<Vec<Complex64>> = (0..16)
        .into_par_iter()
        .map(|e| {
            let (r, c) = (e / 4, e % 4);
            let mut col: Vec<Complex64> = symbols.iter().map(|m| m[(r, c)]).collect();
            fft3(&mut col, n, true);
            col
        })
        .collect();
    let norm = 1.0 / total as f64;
    (0..total)
        .map(|x| {
            let mut m = SpinorMatrix::zeros();
            for e in 0..16 {
                m[(e / 4, e % 4)] = columns[e][x] * norm;
            }
            m
        })
        .collect()
}

impl LatticeKernel {
    pub fn build(params: &DiracParams, lattice: &TorusLattice, options: &LatticeOptions) -> Result<Self> {
        params.validate()?;
        let mut warnings = Vec::new();
        if options.sharp {
            if params.mass != 0.0 {
                return Err(Error::InvalidArgument(
                    "the sharp-projector mode is massless only".into(),
                ));
            }
        } else {
            if !(params.epsilon > 0.0) {
                return Err(Error::Precondition(
                    "lattice kernels need epsilon > 0 so the symbol is suppressed at the zone edge".into(),
                ));
            }
            let h = lattice.spacing();
            let limit = params.epsilon / 3.0;
            if h > limit * (1.0 + 1e-12) {
                if !options.allow_coarse {
                    return Err(Error::Resolution { spacing: h, limit });
                }
                warnings.push(format!(
                    "lattice spacing {h} exceeds epsilon/3 = {limit}; resolution rule overridden"
                ));
            }
        }
        let n = lattice.points_per_dim;
        let dk = 2.0 * PI / lattice.box_side;
        let sites: Vec<[usize; 3]> = (0..n)
            .flat_map(|a| (0..n).flat_map(move |b| (0..n).map(move |c| [a, b, c])))
            .collect();
        let per_site: Vec<(SpinorMatrix, [f64; 4])> = sites
            .par_iter()
            .map(|&idx| grid_symbol(params, lattice, options, dk, idx))
            .collect::<Result<_>>()?;
        let (symbols, spectra): (Vec<_>, Vec<_>) = per_site.into_iter().unzip();
        let fields = fields_from_symbols(n, &symbols);
        Ok(Self {
            lattice: *lattice,
            params: *params,
            options: *options,
            fields,
            spectra,
            symbols,
            warnings,
        })
    }

    /// Kernel from an arbitrary Hermitian grid symbol `k -> A(k)`, used for
    /// test symbols. The entropy density is computed from 4x4 eigensolves.
    pub fn from_symbol<F>(params: &DiracParams, lattice: &TorusLattice, symbol: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> SpinorMatrix + Sync,
    {
        let n = lattice.points_per_dim;
        let dk = 2.0 * PI / lattice.box_side;
        let symbols: Vec<SpinorMatrix> = (0..lattice.sites())
            .into_par_iter()
            .map(|i| {
                let idx = [i / (n * n), (i / n) % n, i % n];
                symbol(idx.map(|a| dk * lattice.fold(a) as f64))
            })
            .collect();
        let spectra = symbols.iter().map(hermitian_spectrum).collect::<Result<_>>()?;
        let fields = fields_from_symbols(n, &symbols);
        Ok(Self {
            lattice: *lattice,
            params: *params,
            options: LatticeOptions::default(),
            fields,
            spectra,
            symbols,
            warnings: Vec::new(),
        })
    }

    /// `K(x)` for the site offset with linear index `index`.
    pub fn field(&self, index: usize) -> &SpinorMatrix {
        &self.fields[index]
    }

    pub fn fields(&self) -> &[SpinorMatrix] {
        &self.fields
    }

    /// Grid symbol at momentum index `idx`.
    pub fn symbol(&self, idx: [usize; 3]) -> &SpinorMatrix {
        &self.symbols[self.lattice.index(idx)]
    }

    pub fn spectra(&self) -> &[[f64; 4]] {
        &self.spectra
    }

    /// `N^{-3} sum_k tr f(P_grid(k))`: the exact per-site bulk term.
    pub fn site_density(&self, f: &SpectralFunction) -> f64 {
        let total: f64 = self
            .spectra
            .iter()
            .map(|sp| sp.iter().map(|&l| f.eval(l)).sum::<f64>())
            .sum();
        total / self.spectra.len() as f64
    }

    /// Kernel of `Op(P_grid^2)`, needed for commutator norms.
    pub fn squared_fields(&self) -> Vec<SpinorMatrix> {
        let sq: Vec<SpinorMatrix> = self.symbols.iter().map(|m| m * m).collect();
        fields_from_symbols(self.lattice.points_per_dim, &sq)
    }
}

/// Grid symbol at a momentum index. Components at the Nyquist index `-N/2`
/// are averaged over both signs so the grid symbol keeps the cubic symmetry
/// of the continuum symbol. The massless symbol at `k = 0` takes the
/// convention value `phi(0) / 2` times the identity.
fn grid_symbol(
    params: &DiracParams,
    lattice: &TorusLattice,
    options: &LatticeOptions,
    dk: f64,
    idx: [usize; 3],
) -> Result<(SpinorMatrix, [f64; 4])> {
    let n = lattice.points_per_dim as i64;
    let folded = idx.map(|a| lattice.fold(a));
    let mut variants: Vec<[f64; 3]> = vec![[0.0; 3]];
    for axis in 0..3 {
        let k = dk * folded[axis] as f64;
        let nyquist = folded[axis] == -n / 2;
        let mut next = Vec::with_capacity(variants.len() * 2);
        for v in &variants {
            let mut a = *v;
            a[axis] = k;
            next.push(a);
            if nyquist {
                let mut b = *v;
                b[axis] = -k;
                next.push(b);
            }
        }
        variants = next;
    }
    let weight = 1.0 / variants.len() as f64;
    let scaled = if options.sharp {
        // phi = 1: evaluate with an infinitely wide cutoff
        DiracParams {
            epsilon: 0.0,
            ..*params
        }
    } else {
        *params
    };
    if variants.len() == 1 && variants[0] == [0.0; 3] && params.mass == 0.0 {
        let phi = if options.sharp { 1.0 } else { params.cutoff.evaluate(0.0) };
        return Ok((SpinorMatrix::identity() * Complex64::new(0.5 * phi, 0.0), [0.5 * phi; 4]));
    }
    let mut sym = SpinorMatrix::zeros();
    for k in &variants {
        sym += momentum_symbol(&scaled, *k, true)? * Complex64::new(weight, 0.0);
    }
    // the rescaled symbol at xi = eps k equals the regularized symbol at k
    let eps = scaled.epsilon;
    let points: Vec<[f64; 3]> = if eps > 0.0 {
        variants.iter().map(|k| k.map(|x| eps * x)).collect()
    } else {
        variants.clone()
    };
    let spec_params = if eps > 0.0 {
        scaled
    } else {
        // epsilon = 0 leaves phi(0) = 1 everywhere; emulate with an unbounded scale
        DiracParams {
            cutoff: scaled.cutoff.with_scale(f64::INFINITY),
            ..scaled
        }
    };
    let spectrum = if eps > 0.0 {
        superposition_spectrum(&spec_params, &points, weight)?
    } else {
        superposition_spectrum_unit(&points, params.mass, weight)
    };
    Ok((sym, spectrum))
}

fn superposition_spectrum_unit(points: &[[f64; 3]], mass: f64, weight: f64) -> [f64; 4] {
    // phi = 1 variant of superposition_spectrum
    let units: Vec<[f64; 4]> = points
        .iter()
        .map(|k| {
            let e = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + mass * mass).sqrt();
            [k[0] / e, k[1] / e, k[2] / e, -mass / e]
        })
        .collect();
    let a0 = 0.5 * weight * units.len() as f64;
    let mut c = [0.0; 4];
    for n in &units {
        for i in 0..4 {
            c[i] += 0.5 * weight * n[i];
        }
    }
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut gram = 0.0;
    for j in 0..units.len() {
        for k in (j + 1)..units.len() {
            let d2: f64 = (0..4).map(|i| (units[j][i] - units[k][i]).powi(2)).sum();
            gram += 0.25 * weight * weight * d2;
        }
    }
    let upper = a0 + norm;
    [gram / upper, gram / upper, upper, upper]
}

/// How a region is generated; sizes are physical lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionShape {
    Ball { radius: f64 },
    Cube { side: f64 },
    Voxels { sites: Vec<[usize; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: RegionShape,
    pub sites: Vec<[usize; 3]>,
    /// Analytic for balls and cubes, exposed voxel faces otherwise.
    pub boundary_area: f64,
}

impl Region {
    /// Cube of the given side, centered in the box. The side must be a whole
    /// number of lattice spacings.
    pub fn cube(lattice: &TorusLattice, side: f64) -> Result<Self> {
        let h = lattice.spacing();
        let k = (side / h).round();
        if !(side > 0.0) || (side / h - k).abs() > 1e-9 * (1.0 + k) || k < 1.0 {
            return Err(Error::InvalidRegion(format!(
                "cube side {side} is not a positive multiple of the spacing {h}"
            )));
        }
        let k = k as usize;
        let n = lattice.points_per_dim;
        if k > n {
            return Err(Error::InvalidRegion(format!(
                "cube of {k} sites does not fit a torus of {n} sites"
            )));
        }
        let start = (n - k) / 2;
        let sites = (start..start + k)
            .flat_map(|a| (start..start + k).flat_map(move |b| (start..start + k).map(move |c| [a, b, c])))
            .collect();
        Ok(Self {
            shape: RegionShape::Cube { side },
            sites,
            boundary_area: 6.0 * side * side,
        })
    }

    /// Sites whose positions lie within `radius` of the box center.
    pub fn ball(lattice: &TorusLattice, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidRegion(format!("ball radius must be positive, got {radius}")));
        }
        let n = lattice.points_per_dim;
        let h = lattice.spacing();
        let c = (n / 2) as f64;
        let mut sites = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let r2 = [a, b, d].iter().map(|&x| (x as f64 - c).powi(2)).sum::<f64>() * h * h;
                    if r2 <= radius * radius {
                        sites.push([a, b, d]);
                    }
                }
            }
        }
        if sites.is_empty() {
            return Err(Error::InvalidRegion(format!("ball of radius {radius} contains no sites")));
        }
        Ok(Self {
            shape: RegionShape::Ball { radius },
            sites,
            boundary_area: 4.0 * PI * radius * radius,
        })
    }

    pub fn voxels(lattice: &TorusLattice, sites: Vec<[usize; 3]>) -> Result<Self> {
        let n = lattice.points_per_dim;
        if sites.is_empty() {
            return Err(Error::InvalidRegion("empty voxel list".into()));
        }
        if sites.iter().any(|s| s.iter().any(|&x| x >= n)) {
            return Err(Error::InvalidRegion(format!("voxel outside the {n}^3 torus")));
        }
        let set: HashSet<[usize; 3]> = sites.iter().copied().collect();
        if set.len() != sites.len() {
            return Err(Error::InvalidRegion("duplicate voxels".into()));
        }
        let mut faces = 0usize;
        for s in &sites {
            for axis in 0..3 {
                for step in [1, n - 1] {
                    let mut t = *s;
                    t[axis] = (t[axis] + step) % n;
                    if !set.contains(&t) {
                        faces += 1;
                    }
                }
            }
        }
        let h = lattice.spacing();
        Ok(Self {
            shape: RegionShape::Voxels { sites: sites.clone() },
            sites,
            boundary_area: faces as f64 * h * h,
        })
    }

    /// Applies a site map (taken modulo the torus) and returns a voxel region.
    pub fn mapped<F>(&self, lattice: &TorusLattice, f: F) -> Result<Self>
    where
        F: Fn([i64; 3]) -> [i64; 3],
    {
        let n = lattice.points_per_dim as i64;
        let sites = self
            .sites
            .iter()
            .map(|s| f(s.map(|x| x as i64)).map(|x| x.rem_euclid(n) as usize))
            .collect();
        Self::voxels(lattice, sites)
    }

    /// Largest extent of the bounding box, in sites.
    pub fn extent(&self) -> usize {
        (0..3)
            .map(|axis| {
                let lo = self.sites.iter().map(|s| s[axis]).min().unwrap_or(0);
                let hi = self.sites.iter().map(|s| s[axis]).max().unwrap_or(0);
                hi - lo + 1
            })
            .max()
            .unwrap_or(0)
    }

    /// Checks that the region is separated from its periodic images by at
    /// least `2 * margin_factor` correlation lengths, where the correlation
    /// length is `max(epsilon, 1/m)` for `m > 0` and `epsilon` otherwise.
    pub fn check_margin(&self, kernel: &LatticeKernel) -> Result<Option<String>> {
        let p = &kernel.params;
        let h = kernel.lattice.spacing();
        let corr = if p.mass > 0.0 {
            p.epsilon.max(1.0 / p.mass)
        } else {
            p.epsilon.max(h)
        };
        let need = 2.0 * kernel.options.margin_factor * corr / h;
        let free = (kernel.lattice.points_per_dim - self.extent()) as f64;
        if free + 1e-9 < need {
            let msg = format!(
                "region spans {} of {} sites; the margin rule asks for {need:.1} free sites",
                self.extent(),
                kernel.lattice.points_per_dim
            );
            if kernel.options.allow_small_margin {
                return Ok(Some(msg));
            }
            return Err(Error::InvalidRegion(msg));
        }
        Ok(None)
    }
}

/// Restriction `chi K chi` of the lattice projector to a region.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub matrix: HermitianMatrix,
    pub sites: usize,
    pub warnings: Vec<String>,
}

fn dense_cap(dim: usize) -> Result<()> {
    if dim > MAX_DENSE_DIM {
        return Err(Error::Size(format!(
            "correlation matrix of dimension {dim} exceeds the dense limit {MAX_DENSE_DIM} ({} sites)",
            MAX_DENSE_DIM / 4
        )));
    }
    Ok(())
}

fn restricted(fields: &[SpinorMatrix], lattice: &TorusLattice, sites: &[[usize; 3]]) -> HermitianMatrix {
    let dim = 4 * sites.len();
    HermitianMatrix::from_fn(dim, |i, j| {
        let (a, b) = (i / 4, j / 4);
        fields[lattice.difference_index(sites[a], sites[b])][(i % 4, j % 4)]
    })
}

pub fn correlation_matrix(kernel: &LatticeKernel, region: &Region) -> Result<CorrelationMatrix> {
    if region.sites.is_empty() {
        return Err(Error::InvalidRegion("empty region".into()));
    }
    dense_cap(4 * region.sites.len())?;
    let mut warnings = kernel.warnings.clone();
    if let Some(w) = region.check_margin(kernel)? {
        warnings.push(w);
    }
    Ok(CorrelationMatrix {
        matrix: restricted(&kernel.fields, &kernel.lattice, &region.sites),
        sites: region.sites.len(),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub function: SpectralFunction,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub values: Vec<EntropyValue>,
    pub sites: usize,
    pub dim: usize,
    pub clipped: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// `tr f(C) - |region| rho_site(f)` for each function, from one eigensolve.
pub fn entropies(c: &CorrelationMatrix, functions: &[SpectralFunction], kernel: &LatticeKernel) -> Result<EntropyReport> {
    let eig = c.matrix.eigenvalues(1e-10)?;
    let dim = eig.len();
    let clipped = eig.iter().filter(|&&l| !(-CLIP_TOL..=1.0 + CLIP_TOL).contains(&l)).count();
    if clipped * 100 > dim {
        return Err(Error::NumericalQuality {
            clipped,
            dim,
            tol: CLIP_TOL,
        });
    }
    let values = functions
        .iter()
        .map(|f| {
            let sum: f64 = eig.iter().map(|&l| f.eval(l.clamp(0.0, 1.0))).sum();
            EntropyValue {
                function: *f,
                value: sum - c.sites as f64 * kernel.site_density(f),
            }
        })
        .collect();
    Ok(EntropyReport {
        values,
        sites: c.sites,
        dim,
        clipped,
        min_eigenvalue: eig.first().copied().unwrap_or(0.0),
        max_eigenvalue: eig.last().copied().unwrap_or(0.0),
    })
}

/// Renyi entanglement entropy `S_kappa` of the region behind `c`.
pub fn entanglement_entropy(c: &CorrelationMatrix, order: RenyiOrder, kernel: &LatticeKernel) -> Result<f64> {
    let r = entropies(c, &[SpectralFunction::Renyi { kappa: order }], kernel)?;
    Ok(r.values[0].value)
}

/// `sum_k s_k^sigma` over the singular values of `[Op, chi]`, which are those
/// of `chi K (1 - chi)` counted twice. Uses
/// `B B^* = chi K^2 chi - (chi K chi)^2`.
pub fn commutator_schatten_sum(
    kernel: &LatticeKernel,
    squared: &[SpinorMatrix],
    region: &Region,
    sigma: f64,
) -> Result<f64> {
    let dim = 4 * region.sites.len();
    dense_cap(dim)?;
    let c = restricted(&kernel.fields, &kernel.lattice, &region.sites);
    let c2 = restricted(squared, &kernel.lattice, &region.sites);
    let a = faer::Mat::<c64>::from_fn(dim, dim, |i, j| {
        let z = c.get(i, j);
        c64::new(z.re, z.im)
    });
    let prod = &a * &a;
    let eig = hermitian_eigenvalues(dim, |i, j| {
        let z = c2.get(i, j);
        c64::new(z.re, z.im) - prod[(i, j)]
    })?;
    Ok(2.0 * eig.iter().map(|&l| l.max(0.0).powf(0.5 * sigma)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchattenFit {
    pub sigma: f64,
    pub alphas: Vec<f64>,
    pub sums: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

/// Fits `log sum_k s_k^sigma` against `log alpha` with regions produced by
/// `region_at(alpha)`.
pub fn schatten_commutator_slope<F>(kernel: &LatticeKernel, sigma: f64, alphas: &[f64], region_at: F) -> Result<SchattenFit>
where
    F: Fn(f64) -> Result<Region> + Sync,
{
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    let distinct: HashSet<u64> = alphas.iter().map(|a| a.to_bits()).collect();
    if alphas.len() < 3 || distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "a slope fit needs at least 3 distinct alpha values, got {alphas:?}"
        )));
    }
    if alphas.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Fit("alpha values must be positive".into()));
    }
    let squared = kernel.squared_fields();
    let sums: Vec<f64> = alphas
        .par_iter()
        .map(|&a| commutator_schatten_sum(kernel, &squared, &region_at(a)?, sigma))
        .collect::<Result<_>>()?;
    if sums.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Fit(format!("nonpositive commutator sums {sums:?}")));
    }
    let x: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let y: Vec<f64> = sums.iter().map(|s| s.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SchattenFit {
        sigma,
        alphas: alphas.to_vec(),
        sums,
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac_symbols::CutoffSpec;
    use crate::entropy_functions::eta;
    use crate::spin_algebra::{frobenius_sq, hermitian_eigen, max_abs};

    fn params(m: f64, eps: f64) -> DiracParams {
        DiracParams::new(m, eps, CutoffSpec::exponential()).unwrap()
    }

    #[test]
    fn resolution_rule() {
        let lat = TorusLattice::new(8.0, 8).unwrap();
        let err = LatticeKernel::build(&params(0.0, 2.0), &lat, &LatticeOptions::default());
        assert!(matches!(err, Err(Error::Resolution { .. })));
        let opts = LatticeOptions {
            allow_coarse: true,
            ..LatticeOptions::default()
        };
        let k = LatticeKernel::build(&params(0.0, 2.0), &lat, &opts).unwrap();
        assert_eq!(k.warnings.len(), 1);
        assert!(matches!(
            LatticeKernel::build(&params(0.0, 0.0), &lat, &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn odd_or_tiny_lattice_rejected() {
        assert!(TorusLattice::new(1.0, 7).is_err());
        assert!(TorusLattice::new(-1.0, 8).is_err());
    }

    #[test]
    fn kernel_trace_and_parseval() {
        let lat = TorusLattice::new(4.0, 8).unwrap();
        let p = params(0.7, 1.5);
        let k = LatticeKernel::build(&p, &lat, &LatticeOptions::default()).unwrap();
        let total = lat.sites() as f64;
        let tr: f64 = k.spectra().iter().map(|s| s.iter().sum::<f64>()).sum::<f64>() / total;
        assert!((k.field(0).trace().re - tr).abs() < 1e-13);
        assert!(k.field(0).trace().im.abs() < 1e-15);
        let lhs: f64 = k.fields().iter().map(frobenius_sq).sum();
        let rhs: f64 = k.spectra().iter().map(|s| s.iter().map(|l| l * l).sum::<f64>()).sum::<f64>() / total;
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn kernel_is_adjoint_symmetric() {
        let lat = TorusLattice::new(4.0, 8).unwrap();
        let k = LatticeKernel::build(&params(0.0, 1.5), &lat, &LatticeOptions::default()).unwrap();
        for a in [[1, 0, 0], [2, 3, 5], [7, 1, 4]] {
            let b = a.map(|x: usize| (8 - x) % 8);
            let (ia, ib) = (lat.index(a), lat.index(b));
            assert!(max_abs(&(k.field(ia) - k.field(ib).adjoint())) < 1e-15);
        }
    }

    #[test]
    fn two_site_torus_matches_direct_sum() {
        // N = 2: eight momenta, direct evaluation of the inverse transform
        let lat = TorusLattice::new(1.0, 2).unwrap();
        let p = params(1.0, 2.0);
        let opts = LatticeOptions {
            allow_coarse: true,
            ..LatticeOptions::default()
        };
        let k = LatticeKernel::build(&p, &lat, &opts).unwrap();
        for x in 0..8usize {
            let xs = [x / 4, (x / 2) % 2, x % 2];
            let mut direct = SpinorMatrix::zeros();
            for n in 0..8usize {
                let ns = [n / 4, (n / 2) % 2, n % 2];
                let phase = (0..3).map(|i| ns[i] * xs[i]).sum::<usize>() % 2;
                let sign = if phase == 0 { 1.0 } else { -1.0 };
                direct += k.symbol(ns) * Complex64::new(sign / 8.0, 0.0);
            }
            assert!(max_abs(&(direct - k.field(lat.index(xs)))) < 1e-15);
        }
        // the Nyquist momentum (-pi, 0, 0) averages +-pi into a mass-only symbol
        let avg = k.symbol([1, 0, 0]);
        let k_pi = 2.0 * PI;
        let plus = momentum_symbol(&p, [k_pi, 0.0, 0.0], true).unwrap();
        let minus = momentum_symbol(&p, [-k_pi, 0.0, 0.0], true).unwrap();
        assert!(max_abs(&(avg - (plus + minus) * Complex64::new(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn grid_spectra_match_eigensolver() {
        let lat = TorusLattice::new(4.0, 8).unwrap();
        let k = LatticeKernel::build(&params(0.3, 1.5), &lat, &LatticeOptions::default()).unwrap();
        for idx in [[0, 0, 0], [4, 0, 0], [4, 4, 4], [1, 2, 4], [3, 5, 7]] {
            let (_, mut d) = hermitian_eigen(k.symbol(idx)).unwrap();
            d.sort_by(|a, b| a.total_cmp(b));
            let fast = k.spectra()[lat.index(idx)];
            for (a, b) in fast.iter().zip(&d) {
                assert!((a - b).abs() < 1e-14, "{idx:?}: {fast:?} vs {d:?}");
            }
        }
    }

    fn small() -> (TorusLattice, LatticeKernel) {
        let lat = TorusLattice::new(8.0, 8).unwrap();
        let opts = LatticeOptions {
            allow_small_margin: true,
            ..LatticeOptions::default()
        };
        let k = LatticeKernel::build(&params(0.0, 3.0), &lat, &opts).unwrap();
        (lat, k)
    }

    #[test]
    fn single_site_matches_momentum_average() {
        let lat = TorusLattice::new(8.0, 8).unwrap();
        let p = params(0.0, 0.5);
        let opts = LatticeOptions {
            allow_coarse: true,
            allow_small_margin: true,
            ..LatticeOptions::default()
        };
        let k = LatticeKernel::build(&p, &lat, &opts).unwrap();
        let region = Region::voxels(&lat, vec![[3, 3, 3]]).unwrap();
        let c = correlation_matrix(&k, &region).unwrap();
        let mut avg = SpinorMatrix::zeros();
        for n in 0..lat.sites() {
            let idx = [n / 64, (n / 8) % 8, n % 8];
            avg += k.symbol(idx);
        }
        avg /= Complex64::new(lat.sites() as f64, 0.0);
        let (_, d) = hermitian_eigen(&avg).unwrap();
        let f = RenyiOrder::von_neumann();
        let rho: f64 = k.spectra().iter().map(|s| s.iter().map(|&l| eta(f, l)).sum::<f64>()).sum::<f64>()
            / lat.sites() as f64;
        let expect: f64 = d.iter().map(|&l| eta(f, l)).sum::<f64>() - rho;
        let got = entanglement_entropy(&c, f, &k).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn full_torus_has_zero_entropy() {
        let (lat, k) = small();
        let all: Vec<[usize; 3]> = (0..lat.sites()).map(|n| [n / 64, (n / 8) % 8, n % 8]).collect();
        let region = Region::voxels(&lat, all).unwrap();
        let c = correlation_matrix(&k, &region).unwrap();
        // eta_kappa for kappa < 1 magnifies eigensolver noise on exact zeros
        for (kappa, tol) in [(0.5, 1e-5), (1.0, 1e-9), (2.0, 1e-9)] {
            let s = entanglement_entropy(&c, RenyiOrder::new(kappa).unwrap(), &k).unwrap();
            assert!(s.abs() < tol, "kappa {kappa}: {s}");
        }
    }

    #[test]
    fn sharp_projector_entropy_is_nonnegative() {
        let lat = TorusLattice::new(8.0, 8).unwrap();
        let opts = LatticeOptions {
            sharp: true,
            allow_small_margin: true,
            ..LatticeOptions::default()
        };
        let k = LatticeKernel::build(&params(0.0, 0.0), &lat, &opts).unwrap();
        // away from the zone edge the sharp grid symbol is a projector
        for idx in [[1, 2, 3], [0, 1, 0], [7, 7, 1]] {
            assert_eq!(k.spectra()[lat.index(idx)].map(|l| (l * 1e12).round() / 1e12), [0.0, 0.0, 1.0, 1.0]);
        }
        assert_eq!(k.spectra()[0], [0.5; 4]);
        let region = Region::cube(&lat, 2.0).unwrap();
        let c = correlation_matrix(&k, &region).unwrap();
        let s = entanglement_entropy(&c, RenyiOrder::von_neumann(), &k).unwrap();
        assert!(s > 0.0);
    }

    #[test]
    fn regions() {
        let lat = TorusLattice::new(10.0, 10).unwrap();
        let cube = Region::cube(&lat, 4.0).unwrap();
        assert_eq!(cube.sites.len(), 64);
        assert_eq!(cube.boundary_area, 96.0);
        assert_eq!(cube.extent(), 4);
        assert!(Region::cube(&lat, 2.5).is_err());
        let vox = Region::voxels(&lat, cube.sites.clone()).unwrap();
        assert_eq!(vox.boundary_area, 96.0);
        let ball = Region::ball(&lat, 2.0).unwrap();
        assert!(ball.sites.contains(&[5, 5, 5]) && ball.sites.contains(&[7, 5, 5]));
        assert!(!ball.sites.contains(&[7, 7, 5]));
        assert!(Region::voxels(&lat, vec![]).is_err());
    }

    #[test]
    fn margin_rule() {
        let lat = TorusLattice::new(12.0, 12).unwrap();
        let k = LatticeKernel::build(&params(0.0, 3.0), &lat, &LatticeOptions::default()).unwrap();
        let region = Region::cube(&lat, 4.0).unwrap();
        assert!(matches!(correlation_matrix(&k, &region), Err(Error::InvalidRegion(_))));
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let (lat, k) = small();
        let l_shape = Region::voxels(&lat, vec![[3, 3, 3], [4, 3, 3], [4, 4, 3], [3, 3, 4]]).unwrap();
        let base = {
            let c = correlation_matrix(&k, &l_shape).unwrap();
            entanglement_entropy(&c, RenyiOrder::von_neumann(), &k).unwrap()
        };
        let shifted = l_shape.mapped(&lat, |s| [s[0] + 2, s[1] - 1, s[2] + 3]).unwrap();
        let rotated = l_shape.mapped(&lat, |s| [-s[1], s[0], s[2]]).unwrap();
        let flipped = l_shape.mapped(&lat, |s| [s[2], s[0], s[1]]).unwrap();
        for r in [shifted, rotated, flipped] {
            let c = correlation_matrix(&k, &r).unwrap();
            let s = entanglement_entropy(&c, RenyiOrder::von_neumann(), &k).unwrap();
            assert!((s - base).abs() < 1e-9 * base.abs(), "{s} vs {base}");
        }
    }

    #[test]
    fn schatten_fit_needs_distinct_alphas() {
        let (lat, k) = small();
        let r = schatten_commutator_slope(&k, 0.9, &[2.0, 2.0, 2.0], |a| Region::cube(&lat, a));
        assert!(matches!(r, Err(Error::Fit(_))));
        let r = schatten_commutator_slope(&k, 0.9, &[1.0, 2.0], |a| Region::cube(&lat, a));
        assert!(matches!(r, Err(Error::Fit(_))));
    }
}
