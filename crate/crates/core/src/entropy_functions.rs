//! Renyi entropy functions, their second-derivative bound and the quadratic
//! comparison function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this distance from 1 the von Neumann branch is used.
pub const KAPPA_SWITCH: f64 = 1e-6;

const K0_GRID: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RenyiOrder {
    kappa: f64,
}

impl RenyiOrder {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Renyi order must be positive and finite, got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }

    pub fn von_neumann() -> Self {
        Self { kappa: 1.0 }
    }

    pub fn kappa(self) -> f64 {
        self.kappa
    }

    pub fn is_von_neumann(self) -> bool {
        (self.kappa - 1.0).abs() < KAPPA_SWITCH
    }

    /// Holder exponent `min(kappa, 1)` of `eta_kappa` at the endpoints.
    pub fn holder_exponent(self) -> f64 {
        self.kappa.min(1.0)
    }
}

impl TryFrom<f64> for RenyiOrder {
    type Error = Error;
    fn try_from(kappa: f64) -> Result<Self> {
        Self::new(kappa)
    }
}

impl From<RenyiOrder> for f64 {
    fn from(order: RenyiOrder) -> f64 {
        order.kappa
    }
}

/// `eta_kappa(t)`, extended by zero outside `(0, 1)`.
pub fn eta(order: RenyiOrder, t: f64) -> f64 {
    if !(t > 0.0 && t < 1.0) {
        return 0.0;
    }
    // evaluate in terms of the smaller of t, 1-t so the result is exactly symmetric
    let u = t.min(1.0 - t);
    let v = 1.0 - u;
    if order.is_von_neumann() {
        return -u * u.ln() - v * (-u).ln_1p();
    }
    let k = order.kappa;
    // log(u^k + v^k) = k log v + log(1 + (u/v)^k)
    let log_sum = k * (-u).ln_1p() + (k * (u / v).ln()).exp().ln_1p();
    (log_sum / (1.0 - k)).max(0.0)
}

/// Second derivative of `eta_kappa` on `(0, 1)` from the closed form
/// `eta'' g^2 = -k (t^{k-2} + (1-t)^{k-2}) g - k^2/(1-k) (t^{k-1} - (1-t)^{k-1})^2`
/// with `g = t^k + (1-t)^k`.
pub fn eta_second_derivative(order: RenyiOrder, t: f64) -> f64 {
    let (a, b) = (t, 1.0 - t);
    if order.is_von_neumann() {
        return -1.0 / (a * b);
    }
    let k = order.kappa;
    let g = a.powf(k) + b.powf(k);
    let d = a.powf(k - 1.0) - b.powf(k - 1.0);
    let first = -k * (a.powf(k - 2.0) + b.powf(k - 2.0)) * g;
    let second = -k * k / (1.0 - k) * d * d;
    (first + second) / (g * g)
}

/// `k0 = -sup_{t in (0,1)} eta_kappa''(t)`.
///
/// The supremum is taken over a grid graded towards both endpoints and then
/// polished by golden-section search around the best node. The endpoint limit
/// of `eta''` is `-inf` for `kappa < 2` and `0` for `kappa = 2`.
pub fn concavity_constant(order: RenyiOrder) -> Result<f64> {
    let k = order.kappa;
    if k > 2.0 {
        return Err(Error::UnsupportedOrder {
            kappa: k,
            reason: "the quadratic lower bound is only available for kappa <= 2".into(),
        });
    }
    if order.is_von_neumann() {
        return Ok(4.0);
    }
    let f = |t: f64| eta_second_derivative(order, t);
    // t = (1 - cos(pi theta)) / 2 clusters nodes quadratically at 0 and 1
    let node = |i: usize| {
        let theta = i as f64 / K0_GRID as f64;
        0.5 * (1.0 - (std::f64::consts::PI * theta).cos())
    };
    let mut best = (f64::NEG_INFINITY, 1);
    for i in 1..K0_GRID {
        let v = f(node(i));
        if v > best.0 {
            best = (v, i);
        }
    }
    let (lo, hi) = (node(best.1 - 1), node(best.1 + 1));
    let sup = golden_max(&f, lo, hi).max(best.0);
    let endpoint = if (k - 2.0).abs() < KAPPA_SWITCH {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    Ok((-sup.max(endpoint)).max(0.0))
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// A real function applied spectrally to correlation operators.
///
/// `Quadratic` is `t^2 / 2`, the negative of the comparison function
/// `f0(t) = -t^2/2`. Working with the convex orientation keeps the sign of
/// every trace explicit: the boundary trace of `Quadratic` is minus the
/// Hilbert-Schmidt cross norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralFunction {
    Renyi { kappa: RenyiOrder },
    Quadratic,
}

impl SpectralFunction {
    pub fn renyi(kappa: f64) -> Result<Self> {
        Ok(Self::Renyi {
            kappa: RenyiOrder::new(kappa)?,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Renyi { kappa } => eta(*kappa, t),
            Self::Quadratic => 0.5 * t * t,
        }
    }

    /// Holder exponent at the spectral endpoints, used to size tails.
    pub fn holder_exponent(&self) -> f64 {
        match self {
            Self::Renyi { kappa } => kappa.holder_exponent(),
            Self::Quadratic => 2.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Renyi { kappa } => format!("eta_{}", kappa.kappa()),
            Self::Quadratic => "quadratic".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ord(k: f64) -> RenyiOrder {
        RenyiOrder::new(k).unwrap()
    }

    #[test]
    fn rejects_nonpositive_order() {
        assert!(RenyiOrder::new(0.0).is_err());
        assert!(RenyiOrder::new(-1.0).is_err());
        assert!(RenyiOrder::new(f64::NAN).is_err());
    }

    #[test]
    fn zero_outside_open_interval() {
        assert_eq!(eta(ord(0.5), -0.3), 0.0);
        assert_eq!(eta(ord(0.5), 1.0), 0.0);
        assert_eq!(eta(ord(0.5), 0.0), 0.0);
        assert_eq!(eta(ord(3.0), 7.0), 0.0);
    }

    #[test]
    fn half_gives_log_two() {
        for k in [0.3, 0.5, 1.0, 1.5, 2.0, 4.0] {
            assert!((eta(ord(k), 0.5) - 2f64.ln()).abs() < 1e-14, "kappa {k}");
        }
    }

    #[test]
    fn collision_entropy_value() {
        // -log(1/16 + 9/16)
        let expect = -(0.625f64).ln();
        assert!((eta(ord(2.0), 0.25) - expect).abs() < 1e-15);
        assert!((expect - 0.470_003_629_245_735_5).abs() < 1e-15);
    }

    #[test]
    fn von_neumann_matches_shannon() {
        let t: f64 = 0.2;
        let expect = -t * t.ln() - (1.0 - t) * (1.0 - t).ln();
        assert!((eta(ord(1.0), t) - expect).abs() < 1e-15);
    }

    #[test]
    fn kappa_continuity_at_one() {
        let grid: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        let mut prev = f64::INFINITY;
        for p in 3..=8 {
            let mut worst = 0.0_f64;
            for sign in [-1.0, 1.0] {
                let k = ord(1.0 + sign * 10f64.powi(-p));
                for &t in &grid {
                    worst = worst.max((eta(k, t) - eta(ord(1.0), t)).abs());
                }
            }
            assert!(worst <= prev, "10^-{p}: {worst} > {prev}");
            prev = worst;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn k0_von_neumann_is_four() {
        assert_eq!(concavity_constant(ord(1.0)).unwrap(), 4.0);
    }

    #[test]
    fn k0_collision_is_zero() {
        assert!(concavity_constant(ord(2.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn k0_rejects_large_order() {
        assert!(matches!(
            concavity_constant(ord(2.5)),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn k0_half_order_fixture() {
        // eta_1/2'' is maximal at t = 1/2 where it equals -4 kappa
        let k0 = concavity_constant(ord(0.5)).unwrap();
        assert!((k0 - 2.0).abs() < 1e-9, "k0 = {k0}");
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        for k in [0.4, 0.9, 1.3, 1.8] {
            let o = ord(k);
            for t in [0.1, 0.3, 0.5, 0.77] {
                let h = 1e-4;
                let fd = (eta(o, t + h) - 2.0 * eta(o, t) + eta(o, t - h)) / (h * h);
                let exact = eta_second_derivative(o, t);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "{k} {t}");
            }
        }
    }

    #[test]
    fn concavity_bound_holds_on_grid() {
        for k in [0.3, 0.7, 1.2, 1.7] {
            let o = ord(k);
            let k0 = concavity_constant(o).unwrap();
            let h = 1e-4;
            for i in 1..1000 {
                let t = i as f64 / 1000.0;
                if t - h <= 0.0 || t + h >= 1.0 {
                    continue;
                }
                let fd = (eta(o, t + h) - 2.0 * eta(o, t) + eta(o, t - h)) / (h * h);
                assert!(fd <= -k0 + 1e-6 * (1.0 + fd.abs()), "kappa {k} t {t}: {fd} vs {k0}");
            }
        }
    }

    proptest! {
        #[test]
        fn eta_symmetric(k in 0.05f64..5.0, t in -0.5f64..1.5) {
            let o = ord(k);
            let (a, b) = (eta(o, t), eta(o, 1.0 - t));
            // 1 - (1 - t) differs from t by one ulp of 1 - t
            prop_assert!((a - b).abs() <= 1e-13 * a.max(b), "{} vs {}", a, b);
        }

        #[test]
        fn eta_nonnegative(k in 0.05f64..5.0, t in -0.5f64..1.5) {
            prop_assert!(eta(ord(k), t) >= 0.0);
        }

        #[test]
        fn eta_bounded_by_log_two(k in 0.05f64..5.0, t in 0.0f64..1.0) {
            prop_assert!(eta(ord(k), t) <= 2f64.ln() + 1e-14);
        }
    }
}
