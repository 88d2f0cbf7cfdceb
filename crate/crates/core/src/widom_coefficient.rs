//! The area coefficient from transverse profiles of finite-section traces.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac_symbols::{CutoffSpec, DiracLine, DiracParams};
use crate::entropy_functions::{concavity_constant, RenyiOrder, SpectralFunction};
use crate::error::{Error, Result};
use crate::wiener_hopf::{finite_section_traces, SectionSpec};

/// Transverse grid and section settings. Radii are in units of the cutoff
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSpec {
    pub head_min: f64,
    pub head_max: f64,
    pub head_points: usize,
    pub tail_step: f64,
    /// The grid ends where `phi(s)^gamma` drops below this.
    pub tail_level: f64,
    /// Largest admissible share of the innermost or outermost panel.
    pub coverage_fraction: f64,
    pub max_head_refinements: usize,
    /// Direction of the transverse vector in the plane orthogonal to the normal.
    pub angle: f64,
    pub section: SectionSpec,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            head_min: 0.03,
            head_max: 0.3,
            head_points: 12,
            tail_step: 0.2,
            tail_level: 1e-10,
            coverage_fraction: 0.005,
            max_head_refinements: 3,
            angle: 0.0,
            section: SectionSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub s: f64,
    /// `m_pair(s)` per function, in the order requested.
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub params: DiracParams,
    pub functions: Vec<SpectralFunction>,
    pub points: Vec<ProfilePoint>,
}

impl Profile {
    /// `(s, m_pair, error)` triples for function `index`.
    pub fn series(&self, index: usize) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|p| [p.s, p.values[index], p.errors[index]])
            .collect()
    }
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (r * i as f64).exp()).collect()
}

fn profile_point(
    params: &DiracParams,
    functions: &[SpectralFunction],
    spec: &ProfileSpec,
    s: f64,
) -> Result<ProfilePoint> {
    let line = DiracLine::new(*params, s)?.with_angle(spec.angle);
    let report = finite_section_traces(&line, functions, &spec.section)?;
    Ok(ProfilePoint {
        s,
        values: report.traces.iter().map(|t| t.value).collect(),
        errors: report.traces.iter().map(|t| t.error).collect(),
        points: report.geometry.points,
    })
}

/// The grid radius beyond which `phi(s)^gamma < tail_level`.
pub fn profile_extent(cutoff: &CutoffSpec, functions: &[SpectralFunction], tail_level: f64) -> f64 {
    let gamma = functions
        .iter()
        .map(|f| f.holder_exponent())
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    cutoff.level_radius(tail_level.powf(1.0 / gamma))
}

/// Evaluates `m_pair(s)` for all `functions` on a grid with a log-spaced head
/// and a uniform tail. The head is extended downward while the innermost
/// trapezoid panel carries more than `coverage_fraction` of the running
/// integral of the first function.
pub fn m_profile(
    params: &DiracParams,
    functions: &[SpectralFunction],
    spec: &ProfileSpec,
) -> Result<Profile> {
    params.validate()?;
    if functions.is_empty() {
        return Err(Error::InvalidArgument("no spectral functions requested".into()));
    }
    if !(spec.head_min > 0.0 && spec.head_max > spec.head_min && spec.head_points >= 2 && spec.tail_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "profile grid needs 0 < head_min < head_max, head_points >= 2 and tail_step > 0, got {spec:?}"
        )));
    }
    let scale = params.cutoff.scale;
    let s_max = profile_extent(&params.cutoff, functions, spec.tail_level).max(spec.head_max * scale);
    let mut grid = geometric(spec.head_min * scale, spec.head_max * scale, spec.head_points);
    let step = spec.tail_step * scale;
    let mut s = spec.head_max * scale + step;
    while s < s_max + step {
        grid.push(s);
        s += step;
    }
    let eval = |grid: &[f64]| -> Result<Vec<ProfilePoint>> {
        grid.par_iter()
            .map(|&s| profile_point(params, functions, spec, s))
            .collect()
    };
    let mut points = eval(&grid)?;
    let ratio = (spec.head_max / spec.head_min).powf(1.0 / (spec.head_points - 1) as f64);
    for _ in 0..spec.max_head_refinements {
        let series: Vec<[f64; 3]> = points.iter().map(|p| [p.s, 0.5 * p.values[0], 0.0]).collect();
        if head_share(&series) <= spec.coverage_fraction {
            break;
        }
        let first = points[0].s;
        let extra: Vec<f64> = (1..=3).rev().map(|k| first / ratio.powi(k)).collect();
        let mut new = eval(&extra)?;
        new.append(&mut points);
        points = new;
    }
    Ok(Profile {
        params: *params,
        functions: functions.to_vec(),
        points,
    })
}

fn trapezoid(series: &[[f64; 3]]) -> f64 {
    let mut prev = (0.0, 0.0);
    let mut total = 0.0;
    for p in series {
        let y = p[0] * p[1];
        total += 0.5 * (p[0] - prev.0) * (y + prev.1);
        prev = (p[0], y);
    }
    total
}

fn head_share(series: &[[f64; 3]]) -> f64 {
    let total = trapezoid(series).abs();
    if total == 0.0 || series.is_empty() {
        return 0.0;
    }
    let p = series[0];
    (0.5 * p[0] * p[0] * p[1]).abs() / total
}

/// An integrated coefficient with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub error: f64,
}

/// `(2 pi)^{-1} int_0^inf M(s) s ds` from samples `(s, M(s), err)` with
/// increasing `s`, by the trapezoid rule with `M(0) s = 0` prepended.
///
/// The error is the Richardson estimate against the grid with every other
/// point dropped, plus the propagated point errors, plus the innermost panel
/// and an exponential tail estimate beyond the last point. A coverage error
/// is raised when either end carries more than `coverage_fraction` of the
/// integral.
pub fn integrate_mkappa(series: &[[f64; 3]], coverage_fraction: f64) -> Result<Coefficient> {
    if series.windows(2).any(|w| !(w[1][0] > w[0][0])) || series.first().is_some_and(|p| p[0] <= 0.0) {
        return Err(Error::InvalidArgument(
            "profile radii must be positive and strictly increasing".into(),
        ));
    }
    if series.len() < 3 {
        return Err(Error::Coverage(format!(
            "profile has {} points; at least 3 are needed",
            series.len()
        )));
    }
    let total = trapezoid(series);
    let coarse: Vec<[f64; 3]> = series
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == series.len() % 2 || *i == series.len() - 1)
        .map(|(_, p)| *p)
        .collect();
    let richardson = (total - trapezoid(&coarse)).abs() / 3.0;
    let mut propagated = 0.0;
    for (i, p) in series.iter().enumerate() {
        let left = if i == 0 { 0.0 } else { series[i - 1][0] };
        let right = series.get(i + 1).map_or(p[0], |q| q[0]);
        propagated += 0.5 * (right - left) * p[0] * p[2];
    }
    let head = (0.5 * series[0][0] * series[0][0] * series[0][1]).abs();
    let n = series.len();
    let (a, b) = (series[n - 2], series[n - 1]);
    let tail = {
        let (ya, yb) = (a[0] * a[1], b[0] * b[1]);
        if yb == 0.0 {
            0.0
        } else if ya != 0.0 && yb / ya > 0.0 && yb / ya < 1.0 {
            // y ~ exp(-lambda s) beyond the last point
            let lambda = (ya / yb).ln() / (b[0] - a[0]);
            (yb / lambda).abs()
        } else {
            f64::INFINITY
        }
    };
    let scale = total.abs();
    if scale > 0.0 {
        if head > coverage_fraction * scale {
            return Err(Error::Coverage(format!(
                "innermost panel carries {:.2}% of the integral (limit {:.2}%)",
                100.0 * head / scale,
                100.0 * coverage_fraction
            )));
        }
        if tail > coverage_fraction * scale {
            return Err(Error::Coverage(format!(
                "tail beyond s = {:.3} is estimated at {:.2}% of the integral (limit {:.2}%)",
                b[0],
                100.0 * tail / scale,
                100.0 * coverage_fraction
            )));
        }
    }
    let norm = 1.0 / (2.0 * PI);
    Ok(Coefficient {
        value: norm * total,
        error: norm * (richardson + propagated + head + tail),
    })
}

/// Halves pair values into one-edge values before integration.
fn one_edge(series: &[[f64; 3]]) -> Vec<[f64; 3]> {
    series
        .iter()
        .map(|p| [p[0], 0.5 * p[1], 0.5 * p[2]])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidomResult {
    pub kappa: f64,
    pub epsilon: f64,
    pub mass: f64,
    pub cutoff: CutoffSpec,
    /// `(s, m_pair(s), error)` for `eta_kappa`.
    pub m_profile: Vec<[f64; 3]>,
    pub coefficient: f64,
    pub coefficient_error: f64,
    /// Coefficient of the comparison function `f0(t) = -t^2/2`; nonnegative.
    pub f0_coefficient: f64,
    pub f0_error: f64,
    pub k0: Option<f64>,
    pub positivity_ok: bool,
}

/// Area coefficients for several Renyi orders from one shared profile.
///
/// The comparison coefficient is `-1` times the coefficient of
/// [`SpectralFunction::Quadratic`], i.e. half the transverse integral of the
/// cross norm.
pub fn compute_widom(params: &DiracParams, kappas: &[f64], spec: &ProfileSpec) -> Result<Vec<WidomResult>> {
    let orders: Vec<RenyiOrder> = kappas.iter().map(|&k| RenyiOrder::new(k)).collect::<Result<_>>()?;
    let mut functions: Vec<SpectralFunction> = orders.iter().map(|&k| SpectralFunction::Renyi { kappa: k }).collect();
    functions.push(SpectralFunction::Quadratic);
    let profile = m_profile(params, &functions, spec)?;
    let q = integrate_mkappa(&one_edge(&profile.series(orders.len())), spec.coverage_fraction)?;
    let (f0, f0_err) = (-q.value, q.error);
    orders
        .iter()
        .enumerate()
        .map(|(i, &order)| {
            let series = profile.series(i);
            let c = integrate_mkappa(&one_edge(&series), spec.coverage_fraction)?;
            let k0 = concavity_constant(order).ok();
            let mut result = WidomResult {
                kappa: order.kappa(),
                epsilon: params.epsilon,
                mass: params.mass,
                cutoff: params.cutoff,
                m_profile: series,
                coefficient: c.value,
                coefficient_error: c.error,
                f0_coefficient: f0,
                f0_error: f0_err,
                k0,
                positivity_ok: false,
            };
            result.positivity_ok = positivity_check(&result).map(|r| r.passed).unwrap_or(false);
            Ok(result)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub kappa: f64,
    pub k0: f64,
    pub coefficient: f64,
    pub f0_coefficient: f64,
    /// `coefficient - k0 * f0_coefficient`.
    pub margin: f64,
    /// Combined error allowed against the margin.
    pub tolerance: f64,
    pub positive: bool,
    pub f0_positive: bool,
    pub bound_holds: bool,
    pub passed: bool,
}

/// Checks `M > 0`, `M(f0) > 0` and `M >= k0 M(f0) - err` for `kappa in (0, 2]`.
pub fn positivity_check(result: &WidomResult) -> Result<PositivityReport> {
    let order = RenyiOrder::new(result.kappa)?;
    let k0 = concavity_constant(order)?;
    let margin = result.coefficient - k0 * result.f0_coefficient;
    let tolerance = result.coefficient_error + k0 * result.f0_error;
    let positive = result.coefficient > 0.0;
    let f0_positive = result.f0_coefficient > 0.0;
    let bound_holds = margin >= -tolerance;
    Ok(PositivityReport {
        kappa: result.kappa,
        k0,
        coefficient: result.coefficient,
        f0_coefficient: result.f0_coefficient,
        margin,
        tolerance,
        positive,
        f0_positive,
        bound_holds,
        passed: positive && f0_positive && bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_profile_integrates_to_zero() {
        let series: Vec<[f64; 3]> = (1..50).map(|i| [0.1 * i as f64, 0.0, 0.0]).collect();
        let c = integrate_mkappa(&series, 0.005).unwrap();
        assert_eq!(c.value, 0.0);
        assert_eq!(c.error, 0.0);
    }

    #[test]
    fn exponential_profile() {
        // (2 pi)^{-1} int_0^inf s e^{-s} ds = 1 / (2 pi)
        let mut s: Vec<f64> = geometric(0.01, 0.3, 12);
        let mut x = 0.35;
        while x < 40.0 {
            s.push(x);
            x += 0.05;
        }
        let series: Vec<[f64; 3]> = s.iter().map(|&s| [s, (-s).exp(), 0.0]).collect();
        let c = integrate_mkappa(&series, 0.005).unwrap();
        let exact = 1.0 / (2.0 * PI);
        assert!((c.value - exact).abs() < 1e-3 * exact);
        assert!((c.value - exact).abs() <= c.error);
    }

    #[test]
    fn truncated_tail_is_a_coverage_error() {
        let series: Vec<[f64; 3]> = (1..=20).map(|i| [0.1 * i as f64, (-0.1 * i as f64).exp(), 0.0]).collect();
        assert!(matches!(integrate_mkappa(&series, 0.005), Err(Error::Coverage(_))));
    }

    #[test]
    fn coarse_head_is_a_coverage_error() {
        let series: Vec<[f64; 3]> = (1..400).map(|i| [0.1 * i as f64, (-0.1 * i as f64).exp(), 0.0]).collect();
        // the first panel [0, 0.1] holds about 0.5% of the integral
        assert!(integrate_mkappa(&series, 0.001).is_err());
    }

    #[test]
    fn extent_follows_holder_exponent() {
        let c = CutoffSpec::exponential();
        let f1 = [SpectralFunction::renyi(1.0).unwrap()];
        let fh = [SpectralFunction::renyi(0.5).unwrap()];
        assert!((profile_extent(&c, &f1, 1e-10) - 10.0 * 10f64.ln()).abs() < 1e-12);
        assert!((profile_extent(&c, &fh, 1e-10) - 20.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn positivity_rejects_large_orders() {
        let r = WidomResult {
            kappa: 3.0,
            epsilon: 0.1,
            mass: 1.0,
            cutoff: CutoffSpec::exponential(),
            m_profile: vec![],
            coefficient: 1.0,
            coefficient_error: 0.0,
            f0_coefficient: 0.1,
            f0_error: 0.0,
            k0: None,
            positivity_ok: false,
        };
        assert!(matches!(positivity_check(&r), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn collision_bound_is_vacuous() {
        let r = WidomResult {
            kappa: 2.0,
            epsilon: 0.1,
            mass: 1.0,
            cutoff: CutoffSpec::exponential(),
            m_profile: vec![],
            coefficient: 0.3,
            coefficient_error: 0.01,
            f0_coefficient: 0.1,
            f0_error: 0.0,
            k0: None,
            positivity_ok: false,
        };
        let rep = positivity_check(&r).unwrap();
        assert!(rep.k0.abs() < 1e-12 && rep.bound_holds && rep.passed);
    }
}
