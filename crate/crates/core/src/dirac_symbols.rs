//! Momentum-space symbols of the regularized Dirac projector, their
//! restriction to lines, cutoff functions and spin rotations.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_algebra::{clifford_basis, spin_generator, SpinorMatrix};

/// Cutoff family. All members satisfy `phi(0) = 1` and `0 <= phi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffKind {
    Exponential,
    Gaussian,
    Rational { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    #[serde(flatten)]
    pub kind: CutoffKind,
    /// Support scale: `phi(t) = base(t / scale)`.
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl CutoffSpec {
    pub fn exponential() -> Self {
        Self {
            kind: CutoffKind::Exponential,
            scale: 1.0,
        }
    }

    pub fn gaussian() -> Self {
        Self {
            kind: CutoffKind::Gaussian,
            scale: 1.0,
        }
    }

    pub fn rational(rho: f64) -> Result<Self> {
        let c = Self {
            kind: CutoffKind::Rational { rho },
            scale: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff scale must be positive, got {}",
                self.scale
            )));
        }
        if let CutoffKind::Rational { rho } = self.kind {
            if !(rho.is_finite() && rho > 3.0) {
                return Err(Error::InvalidArgument(format!(
                    "rational cutoff needs rho > 3, got {rho}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CutoffKind::Exponential => "exponential",
            CutoffKind::Gaussian => "gaussian",
            CutoffKind::Rational { .. } => "rational",
        }
    }

    /// `phi(t)` for `t >= 0`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let x = t.abs() / self.scale;
        match self.kind {
            CutoffKind::Exponential => (-x).exp(),
            CutoffKind::Gaussian => (-x * x).exp(),
            CutoffKind::Rational { rho } => (1.0 + x).powf(-rho),
        }
    }

    /// Upper bound on `int_T^inf phi(t)^p dt` for `T >= 0`, `p > 0`.
    /// Infinite when the integral diverges.
    pub fn tail_integral(&self, t: f64, p: f64) -> f64 {
        let x = t.max(0.0) / self.scale;
        let tail = match self.kind {
            CutoffKind::Exponential => (-p * x).exp() / p,
            CutoffKind::Gaussian => {
                // int_x^inf e^{-p y^2} dy <= min(sqrt(pi/(4p)), e^{-p x^2}/(2 p x))
                let full = 0.5 * (std::f64::consts::PI / p).sqrt();
                if x > 0.0 {
                    full.min((-p * x * x).exp() / (2.0 * p * x))
                } else {
                    full
                }
            }
            CutoffKind::Rational { rho } => {
                let q = rho * p;
                if q <= 1.0 {
                    f64::INFINITY
                } else {
                    (1.0 + x).powf(1.0 - q) / (q - 1.0)
                }
            }
        };
        tail * self.scale
    }

    /// Smallest `T` with `tail_integral(T, p) <= tol`, or an accuracy error.
    pub fn tail_cutoff(&self, tol: f64, p: f64) -> Result<f64> {
        if !(self.tail_integral(0.0, p).is_finite()) {
            return Err(Error::Accuracy(format!(
                "tail integral of phi^{p} diverges for the {} cutoff",
                self.name()
            )));
        }
        let mut hi = self.scale;
        let mut steps = 0;
        while self.tail_integral(hi, p) > tol {
            hi *= 2.0;
            steps += 1;
            if steps > 200 || !hi.is_finite() {
                return Err(Error::Accuracy(format!(
                    "no finite tail cutoff reaches {tol:.1e} for the {} cutoff",
                    self.name()
                )));
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.tail_integral(mid, p) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Smallest `r` with `phi(r) <= level`, for `0 < level < 1`.
    pub fn level_radius(&self, level: f64) -> f64 {
        let x = match self.kind {
            CutoffKind::Exponential => -level.ln(),
            CutoffKind::Gaussian => (-level.ln()).sqrt(),
            CutoffKind::Rational { rho } => level.powf(-1.0 / rho) - 1.0,
        };
        x * self.scale
    }
}

/// Mass, regularization length and cutoff, in units where the Compton-type
/// length scale is one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracParams {
    pub mass: f64,
    pub epsilon: f64,
    pub cutoff: CutoffSpec,
}

impl DiracParams {
    pub fn new(mass: f64, epsilon: f64, cutoff: CutoffSpec) -> Result<Self> {
        let p = Self {
            mass,
            epsilon,
            cutoff,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mass must be nonnegative, got {}",
                self.mass
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        self.cutoff.validate()
    }

    /// `epsilon * m`, the mass gap of the rescaled symbol.
    pub fn rescaled_mass(&self) -> f64 {
        self.epsilon * self.mass
    }
}

fn dirac_combination(v: [f64; 3], mass: f64, norm: f64, weight: f64) -> SpinorMatrix {
    let b = clifford_basis();
    let mut a = SpinorMatrix::identity();
    let inv = 1.0 / norm;
    for i in 0..3 {
        a += b[i] * Complex64::new(v[i] * inv, 0.0);
    }
    a -= b[3] * Complex64::new(mass * inv, 0.0);
    a * Complex64::new(0.5 * weight, 0.0)
}

/// `P(k) = (1 + (sum_b k_b gamma^b gamma^0 - m gamma^0) / sqrt(k^2 + m^2)) / 2`,
/// multiplied by `phi(epsilon sqrt(k^2 + m^2))` when `regularized`.
pub fn momentum_symbol(params: &DiracParams, k: [f64; 3], regularized: bool) -> Result<SpinorMatrix> {
    let energy = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + params.mass * params.mass).sqrt();
    if energy == 0.0 {
        return Err(Error::SingularPoint(k));
    }
    let weight = if regularized {
        params.cutoff.evaluate(params.epsilon * energy)
    } else {
        1.0
    };
    Ok(dirac_combination(k, params.mass, energy, weight))
}

/// `A^(eps)(xi) = P^(eps)(xi / eps)`, written so that `epsilon = 0` gives the
/// discontinuous limit symbol.
pub fn rescaled_symbol(params: &DiracParams, xi: [f64; 3]) -> Result<SpinorMatrix> {
    let mu = params.rescaled_mass();
    let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2] + mu * mu).sqrt();
    if r == 0.0 {
        return Err(Error::SingularPoint(xi));
    }
    Ok(dirac_combination(xi, mu, r, params.cutoff.evaluate(r)))
}

/// Spectrum of `weight * sum_j A^(eps)(xi_j)` for points off the singular set.
///
/// Each term is `phi_j (1 + n_j . Gamma) / 2` with a unit vector `n_j`, so the
/// small eigenvalue equals `weight^2 sum_{j<k} phi_j phi_k |n_j - n_k|^2 / 4`
/// divided by the large one. This avoids the cancellation in `a0 - |c|`,
/// which matters for `eta_kappa` with `kappa < 1` near zero.
pub fn superposition_spectrum(params: &DiracParams, points: &[[f64; 3]], weight: f64) -> Result<[f64; 4]> {
    let mu = params.rescaled_mass();
    let mut images: Vec<(f64, [f64; 4])> = Vec::with_capacity(points.len());
    for xi in points {
        let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2] + mu * mu).sqrt();
        if r == 0.0 {
            return Err(Error::SingularPoint(*xi));
        }
        let phi = weight * params.cutoff.evaluate(r);
        if phi > 0.0 {
            images.push((phi, [xi[0] / r, xi[1] / r, xi[2] / r, -mu / r]));
        }
    }
    let a0: f64 = 0.5 * images.iter().map(|(p, _)| p).sum::<f64>();
    let mut c = [0.0; 4];
    for (p, n) in &images {
        for i in 0..4 {
            c[i] += 0.5 * p * n[i];
        }
    }
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut gram = 0.0;
    for j in 0..images.len() {
        for k in (j + 1)..images.len() {
            let (pj, nj) = images[j];
            let (pk, nk) = images[k];
            let d2: f64 = (0..4).map(|i| (nj[i] - nk[i]).powi(2)).sum();
            gram += 0.25 * pj * pk * d2;
        }
    }
    let upper = a0 + norm;
    let lower = if upper > 0.0 { gram / upper } else { 0.0 };
    Ok([lower, lower, upper, upper])
}

/// Restriction of the rescaled symbol to the line `xi_hat + t e_3`, with the
/// transverse part `xi_hat = s (cos angle, sin angle, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracLine {
    pub s: f64,
    #[serde(default)]
    pub angle: f64,
    pub params: DiracParams,
}

impl DiracLine {
    pub fn new(params: DiracParams, s: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "transverse radius must be nonnegative, got {s}"
            )));
        }
        params.validate()?;
        Ok(Self {
            s,
            angle: 0.0,
            params,
        })
    }

    pub fn with_angle(mut self, angle: f64) -> Self {
        self.angle = angle;
        self
    }

    pub fn point(&self, t: f64) -> [f64; 3] {
        [self.s * self.angle.cos(), self.s * self.angle.sin(), t]
    }

    /// `sqrt(s^2 + (eps m)^2)`: distance of the line from the singular point.
    pub fn gap(&self) -> f64 {
        self.s.hypot(self.params.rescaled_mass())
    }
}

pub fn line_symbol(line: &DiracLine, t: f64) -> Result<SpinorMatrix> {
    rescaled_symbol(&line.params, line.point(t))
}

fn axis_rotation(axis: usize, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    match axis {
        1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        _ => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// Rotation about the z axis by `angle` (counterclockwise, active).
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    axis_rotation(3, angle)
}

/// Rotation about the y axis by `angle` (counterclockwise, active).
pub fn rotation_y(angle: f64) -> Matrix3<f64> {
    axis_rotation(1, angle)
}

/// ZYZ Euler angles `(alpha, beta, gamma)` with `R = Rz(alpha) Ry(beta) Rz(gamma)`.
pub fn euler_zyz(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let sin_beta = r[(0, 2)].hypot(r[(1, 2)]);
    let beta = sin_beta.atan2(r[(2, 2)]);
    if sin_beta > 1e-13 {
        let alpha = r[(1, 2)].atan2(r[(0, 2)]);
        let gamma = r[(2, 1)].atan2(-r[(2, 0)]);
        (alpha, beta, gamma)
    } else if r[(2, 2)] > 0.0 {
        (r[(1, 0)].atan2(r[(0, 0)]), 0.0, 0.0)
    } else {
        // Rz(a) Ry(pi) = Rz(a) diag(-1, 1, -1) diag(-1, 1, -1) Ry(pi)
        let m = r * Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0));
        (m[(1, 0)].atan2(m[(0, 0)]), std::f64::consts::PI, 0.0)
    }
}

fn spin_exponential(axis: usize, angle: f64) -> SpinorMatrix {
    // exp(i angle Sigma / 2) with Sigma^2 = 1
    let sigma = spin_generator(axis).unwrap();
    let (s, c) = (0.5 * angle).sin_cos();
    SpinorMatrix::identity() * Complex64::new(c, 0.0) + sigma * Complex64::new(0.0, s)
}

/// Unitary `Q` with `Q (sum_b (R v)_b gamma^b) Q^{-1} = sum_b v_b gamma^b` and
/// `Q gamma^0 Q^{-1} = gamma^0`. Normalized so that `Q(1) = 1`.
pub fn rotation_spin_matrix(r: &Matrix3<f64>) -> Result<SpinorMatrix> {
    let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !(orth <= 1e-10 && (det - 1.0).abs() <= 1e-10) {
        return Err(Error::Precondition(format!(
            "not a proper rotation: |R^T R - 1| = {orth:.3e}, det R = {det}"
        )));
    }
    let (alpha, beta, gamma) = euler_zyz(r);
    // Q(R1 R2) = Q(R2) Q(R1), and Q(Rz(a)) = exp(i a Sigma_z / 2)
    Ok(spin_exponential(3, gamma) * spin_exponential(2, beta) * spin_exponential(3, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::{gamma, hermitian_spectrum, max_abs};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(m: f64, eps: f64) -> DiracParams {
        DiracParams::new(m, eps, CutoffSpec::exponential()).unwrap()
    }

    fn slash(v: [f64; 3]) -> SpinorMatrix {
        (1..=3).fold(SpinorMatrix::zeros(), |acc, b| {
            acc + gamma(b).unwrap() * Complex64::new(v[b - 1], 0.0)
        })
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(CutoffSpec::exponential().evaluate(0.0), 1.0);
        assert_eq!(CutoffSpec::gaussian().evaluate(0.0), 1.0);
        assert_eq!(CutoffSpec::rational(4.0).unwrap().evaluate(0.0), 1.0);
        assert!((CutoffSpec::rational(4.0).unwrap().evaluate(1.0) - 1.0 / 16.0).abs() < 1e-16);
        assert!(CutoffSpec::rational(3.0).is_err());
    }

    #[test]
    fn tail_integral_exponential_exact() {
        let c = CutoffSpec::exponential().with_scale(2.0);
        // int_T^inf e^{-p t / 2} dt = (2/p) e^{-p T / 2}
        assert!((c.tail_integral(3.0, 1.5) - (2.0 / 1.5) * (-2.25f64).exp()).abs() < 1e-15);
        let t = c.tail_cutoff(1e-12, 1.0).unwrap();
        assert!(c.tail_integral(t, 1.0) <= 1e-12);
        assert!(c.tail_integral(0.99 * t, 1.0) > 1e-12);
    }

    #[test]
    fn level_radius_inverts_cutoff() {
        for c in [
            CutoffSpec::exponential(),
            CutoffSpec::gaussian().with_scale(0.5),
            CutoffSpec::rational(5.0).unwrap(),
        ] {
            let r = c.level_radius(1e-7);
            assert!((c.evaluate(r) - 1e-7).abs() < 1e-18, "{}", c.name());
        }
    }

    #[test]
    fn rest_frame_symbol() {
        let p = momentum_symbol(&params(1.0, 0.1), [0.0; 3], false).unwrap();
        let mut expect = SpinorMatrix::zeros();
        expect[(2, 2)] = Complex64::new(1.0, 0.0);
        expect[(3, 3)] = Complex64::new(1.0, 0.0);
        assert!(max_abs(&(p - expect)) < 1e-15);
    }

    #[test]
    fn singular_point_is_reported() {
        assert!(matches!(
            momentum_symbol(&params(0.0, 0.1), [0.0; 3], false),
            Err(Error::SingularPoint(_))
        ));
        assert!(matches!(
            rescaled_symbol(&params(1.0, 0.0), [0.0; 3]),
            Err(Error::SingularPoint(_))
        ));
    }

    #[test]
    fn projector_identities() {
        let p = momentum_symbol(&params(1.0, 0.1), [1.0, 2.0, 3.0], false).unwrap();
        assert!(max_abs(&(p * p - p)) < 1e-12);
        assert!((p.trace() - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn massless_symbol_is_epsilon_independent() {
        let xi = [0.3, -1.2, 0.7];
        let a0 = rescaled_symbol(&params(0.0, 0.0), xi).unwrap();
        for eps in [0.05, 0.2, 1.0] {
            assert_eq!(rescaled_symbol(&params(0.0, eps), xi).unwrap(), a0);
        }
    }

    #[test]
    fn limit_symbol_on_axis() {
        let a = rescaled_symbol(&params(0.0, 0.0), [0.0, 0.0, 1.0]).unwrap();
        let g = gamma(3).unwrap() * gamma(0).unwrap();
        let expect = (SpinorMatrix::identity() + g) * Complex64::new(0.5 * (-1.0f64).exp(), 0.0);
        assert!(max_abs(&(a - expect)) < 1e-16);
    }

    #[test]
    fn line_symbol_jump_at_origin() {
        let line = DiracLine::new(params(0.0, 0.0), 0.0).unwrap();
        let up = line_symbol(&line, 1e-100).unwrap();
        let down = line_symbol(&line, -1e-100).unwrap();
        let g = gamma(3).unwrap() * gamma(0).unwrap();
        assert!(max_abs(&(up - down - g)) < 1e-15);
        assert!(line_symbol(&line, 0.0).is_err());
    }

    #[test]
    fn line_symbol_decays_with_cutoff() {
        let line = DiracLine::new(params(1.0, 0.1), 1.0).unwrap();
        for t in [5.0, 10.0, 20.0, 40.0] {
            let a = line_symbol(&line, t).unwrap();
            let bound = 2f64.sqrt() * CutoffSpec::exponential().evaluate(t);
            assert!(crate::spin_algebra::frobenius_sq(&a).sqrt() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn z_rotation_matches_closed_form() {
        // with the active rotation convention the spin factor is
        // diag(e^{i theta/2}, e^{-i theta/2}, e^{i theta/2}, e^{-i theta/2})
        let theta = 0.83;
        let q = rotation_spin_matrix(&rotation_z(theta)).unwrap();
        let ph = Complex64::from_polar(1.0, 0.5 * theta);
        let expect = SpinorMatrix::from_diagonal(&nalgebra::Vector4::new(ph, ph.conj(), ph, ph.conj()));
        assert!(max_abs(&(q - expect)) < 1e-15);
        // the inverse rotation carries the opposite phases
        let qi = rotation_spin_matrix(&rotation_z(-theta)).unwrap();
        assert!((qi[(0, 0)] - Complex64::from_polar(1.0, -0.5 * theta)).norm() < 1e-15);
    }

    #[test]
    fn identity_rotation_is_identity() {
        let q = rotation_spin_matrix(&Matrix3::identity()).unwrap();
        assert!(max_abs(&(q - SpinorMatrix::identity())) < 1e-15);
    }

    #[test]
    fn rotation_precondition() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(matches!(rotation_spin_matrix(&r), Err(Error::Precondition(_))));
        let s = Matrix3::identity() * 1.001;
        assert!(rotation_spin_matrix(&s).is_err());
    }

    #[test]
    fn euler_angles_reconstruct_gimbal_cases() {
        for r in [
            rotation_z(1.1),
            rotation_y(std::f64::consts::PI) * rotation_z(0.4),
            rotation_z(0.3) * rotation_y(1e-15),
        ] {
            let (a, b, g) = euler_zyz(&r);
            let back = rotation_z(a) * rotation_y(b) * rotation_z(g);
            assert!((back - r).abs().max() < 1e-14);
        }
    }

    #[test]
    fn rotation_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g0 = gamma(0).unwrap();
        for _ in 0..50 {
            let r = crate::dirac_symbols::tests::random_rotation(&mut rng);
            let q = rotation_spin_matrix(&r).unwrap();
            assert!(max_abs(&(q * q.adjoint() - SpinorMatrix::identity())) < 1e-13);
            assert!((q.determinant() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(max_abs(&(q * g0 * q.adjoint() - g0)) < 1e-13);
            for _ in 0..20 {
                let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let rv = r * v;
                let lhs = q * slash([rv[0], rv[1], rv[2]]) * q.adjoint();
                assert!(max_abs(&(lhs - slash([v[0], v[1], v[2]]))) < 1e-12);
            }
        }
    }

    #[test]
    fn symbol_spectrum_is_zero_zero_phi_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(0.7, 0.3);
        for _ in 0..200 {
            let xi = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let a = rescaled_symbol(&p, xi).unwrap();
            let (_, d) = crate::spin_algebra::hermitian_eigen(&a).unwrap();
            let mut d = d;
            d.sort_by(|x, y| x.total_cmp(y));
            let r = (xi.iter().map(|x| x * x).sum::<f64>() + 0.21f64.powi(2)).sqrt();
            let phi = p.cutoff.evaluate(r);
            for (got, want) in d.iter().zip([0.0, 0.0, phi, phi]) {
                assert!((got - want).abs() < 1e-12);
            }
            assert_eq!(hermitian_spectrum(&a).unwrap().len(), 4);
        }
    }

    #[test]
    fn superposition_spectrum_matches_eigensolver() {
        let p = params(0.8, 0.5);
        let pts = [[0.3, -0.2, 1.0], [0.3, -0.2, -5.0], [-2.0, 0.1, 0.4]];
        let fast = superposition_spectrum(&p, &pts, 0.5).unwrap();
        let sum = pts.iter().fold(SpinorMatrix::zeros(), |acc, &xi| {
            acc + rescaled_symbol(&p, xi).unwrap() * Complex64::new(0.5, 0.0)
        });
        let (_, mut d) = crate::spin_algebra::hermitian_eigen(&sum).unwrap();
        d.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in fast.iter().zip(&d) {
            assert!((a - b).abs() < 1e-14, "{fast:?} vs {d:?}");
        }
        assert_eq!(superposition_spectrum(&p, &pts[..1], 1.0).unwrap()[0], 0.0);
    }

    pub(crate) fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        // uniform unit quaternion
        let mut q = [0.0f64; 4];
        loop {
            for x in q.iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
            let n = q.iter().map(|x| x * x).sum::<f64>();
            if n > 1e-3 && n <= 1.0 {
                let n = n.sqrt();
                q.iter_mut().for_each(|x| *x /= n);
                break;
            }
        }
        nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
            .to_rotation_matrix()
            .into_inner()
    }
}
