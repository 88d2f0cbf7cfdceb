//! Analytic-oracle checks shared by the command-line `verify` and
//! `symbol-check` commands.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirac_symbols::{momentum_symbol, rotation_spin_matrix, DiracLine, DiracParams};
use crate::entropy_functions::{concavity_constant, eta, RenyiOrder, SpectralFunction};
use crate::error::Result;
use crate::spin_algebra::{hermitian_spectrum, hermiticity_defect, max_abs, SpinorMatrix};
use crate::widom_coefficient::{positivity_check, WidomResult};
use crate::wiener_hopf::{finite_section_traces, hs_cross_norm, line_kernel, GaussianLine, SectionSpec};

/// Outcome of one check: the worst observed deviation against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass: worst <= tolerance,
            worst,
            tolerance,
            detail,
        }
    }
}

fn random_momentum(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // log-uniform magnitude over six decades, uniform direction
    let r = 10f64.powf(rng.random_range(-3.0..3.0));
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let rho = (1.0 - z * z).sqrt();
    [r * rho * phi.cos(), r * rho * phi.sin(), r * z]
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(-PI..PI);
    match nalgebra::Unit::try_new(axis, 1e-6) {
        Some(a) => UnitQuaternion::from_axis_angle(&a, angle).to_rotation_matrix().into_inner(),
        None => Matrix3::identity(),
    }
}

/// Hermiticity, the spectrum `{0, 0, phi, phi}`, idempotence of the
/// unregularized symbol and rotation covariance `Q P(Rk) Q^* = P(k)`.
pub fn symbol_checks(params: &DiracParams, momenta: usize, rotations: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut herm, mut spec, mut idem) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..momenta {
        let k = random_momentum(&mut rng);
        let p = momentum_symbol(params, k, true)?;
        let bare = momentum_symbol(params, k, false)?;
        let e = (k.iter().map(|x| x * x).sum::<f64>() + params.mass * params.mass).sqrt();
        let phi = params.cutoff.evaluate(params.epsilon * e);
        herm = herm.max(hermiticity_defect(&p));
        let d = hermitian_spectrum(&p)?;
        for (a, b) in d.iter().zip([0.0, 0.0, phi, phi]) {
            spec = spec.max((a - b).abs());
        }
        idem = idem.max(max_abs(&(bare * bare - bare)));
    }
    let mut cov = 0.0f64;
    for _ in 0..rotations {
        let r = random_rotation(&mut rng);
        let q = rotation_spin_matrix(&r)?;
        for _ in 0..10 {
            let k = random_momentum(&mut rng);
            let rk = r * Vector3::from(k);
            let p = momentum_symbol(params, k, true)?;
            let prk = momentum_symbol(params, [rk[0], rk[1], rk[2]], true)?;
            cov = cov.max(max_abs(&(q * prk * q.adjoint() - p)));
        }
    }
    Ok(vec![
        Check::new("symbol hermiticity", herm, 1e-12, format!("{momenta} momenta")),
        Check::new("symbol spectrum {0,0,phi,phi}", spec, 1e-12, format!("{momenta} momenta")),
        Check::new("unregularized idempotence", idem, 1e-12, format!("{momenta} momenta")),
        Check::new("rotation covariance", cov, 1e-10, format!("{rotations} rotations x 10 momenta")),
    ])
}

/// `eta_kappa(1/2) = log 2`, `eta = 0` outside `(0, 1)` and `k0(1) = 4`.
pub fn entropy_fixtures() -> Result<Vec<Check>> {
    let mut half = 0.0f64;
    let mut outside = 0.0f64;
    for kappa in [0.3, 0.5, 1.0, 1.5, 2.0] {
        let order = RenyiOrder::new(kappa)?;
        half = half.max((eta(order, 0.5) - LN_2).abs());
        for t in [-1.0, -1e-3, 0.0, 1.0, 1.0 + 1e-3, 2.0] {
            outside = outside.max(eta(order, t).abs());
        }
    }
    let k0 = concavity_constant(RenyiOrder::von_neumann())?;
    Ok(vec![
        Check::new("eta(1/2) = log 2", half, 1e-12, "kappa in {0.3, 0.5, 1, 1.5, 2}".into()),
        Check::new("eta = 0 outside (0, 1)", outside, 0.0, String::new()),
        Check::new("k0(1) = 4", (k0 - 4.0).abs(), 0.0, format!("k0 = {k0}")),
    ])
}

/// `|m_pair(f0) + hs| / hs` on the Dirac line; `m_pair` of the quadratic
/// comparison function equals minus the squared cross norm.
pub fn f0_identity(params: &DiracParams, s_values: &[f64], section: &SectionSpec, tolerance: f64) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for &s in s_values {
        let line = DiracLine::new(*params, s)?;
        let report = finite_section_traces(&line, &[SpectralFunction::Quadratic], section)?;
        let hs = hs_cross_norm(&line)?.value;
        let gap = (report.traces[0].value + hs).abs() / hs;
        worst = worst.max(gap);
        detail.push(format!("s={s}: {gap:.2e}"));
    }
    Ok(Check::new("f0 identity", worst, tolerance, detail.join(", ")))
}

/// Closed forms for the scalar Gaussian symbol `exp(-t^2)`: kernel
/// `(2 sqrt(pi))^{-1} exp(-u^2/4)` and cross norm `1/pi`.
pub fn gaussian_fixtures(kernel_tol: f64, norm_tol: f64) -> Result<Vec<Check>> {
    let line = GaussianLine::unit();
    let mut worst = 0.0f64;
    for i in 0..=40 {
        let u = 0.25 * i as f64;
        let k = line_kernel(&line, u)?;
        let expect = (-u * u / 4.0).exp() / (2.0 * PI.sqrt());
        worst = worst.max(max_abs(&(k - SpinorMatrix::identity() * Complex64::new(expect, 0.0))));
    }
    let hs = hs_cross_norm(&line)?.value;
    Ok(vec![
        Check::new("gaussian kernel", worst, kernel_tol, "u in [0, 10]".into()),
        Check::new("gaussian cross norm", (hs - 1.0 / PI).abs(), norm_tol, format!("{hs}")),
    ])
}

/// `M > 0`, `M(f0) > 0` and `M >= k0 M(f0)` within the combined error.
pub fn positivity(results: &[WidomResult]) -> Result<Vec<Check>> {
    results
        .iter()
        .map(|r| {
            let p = positivity_check(r)?;
            Ok(Check {
                name: format!("positivity kappa={}", r.kappa),
                pass: p.passed,
                worst: -p.margin,
                tolerance: p.tolerance,
                detail: format!(
                    "M = {:.6e}, k0 = {:.4}, M(f0) = {:.6e}",
                    p.coefficient, p.k0, p.f0_coefficient
                ),
            })
        })
        .collect()
}
