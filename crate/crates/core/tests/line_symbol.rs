use std::f64::consts::PI;

use dirac_ee::dirac_symbols::{CutoffSpec, DiracLine, DiracParams};
use dirac_ee::entropy_functions::SpectralFunction;
use dirac_ee::wiener_hopf::{density_rho, finite_section_traces, hs_cross_norm, line_kernel, GaussianLine, SectionSpec};

fn pair(line: &DiracLine, f: SpectralFunction) -> f64 {
    finite_section_traces(line, &[f], &SectionSpec::default()).unwrap().traces[0].value
}

#[test]
fn quadratic_trace_is_minus_cross_norm() {
    for (m, eps, cutoff, s) in [
        (1.0, 0.3, CutoffSpec::gaussian(), 1.5),
        (0.0, 1.0, CutoffSpec::rational(4.0).unwrap(), 0.8),
    ] {
        let p = DiracParams::new(m, eps, cutoff).unwrap();
        let line = DiracLine::new(p, s).unwrap();
        let hs = hs_cross_norm(&line).unwrap().value;
        let q = pair(&line, SpectralFunction::Quadratic);
        assert!((q + hs).abs() < 0.01 * hs, "{q} vs {hs}");
    }
}

#[test]
fn transverse_direction_does_not_matter() {
    let p = DiracParams::new(0.5, 1.0, CutoffSpec::exponential()).unwrap();
    let f = SpectralFunction::renyi(1.0).unwrap();
    let a = pair(&DiracLine::new(p, 0.7).unwrap(), f);
    let b = pair(&DiracLine::new(p, 0.7).unwrap().with_angle(1.1), f);
    assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
}

#[test]
fn cutoff_scale_rescales_the_transverse_radius() {
    // phi(r / lambda) on the line at lambda s is the scale-1 problem at s
    let base = DiracParams::new(0.0, 1.0, CutoffSpec::exponential()).unwrap();
    let wide = DiracParams::new(0.0, 1.0, CutoffSpec::exponential().with_scale(2.0)).unwrap();
    let f = SpectralFunction::renyi(1.0).unwrap();
    let a = pair(&DiracLine::new(base, 0.6).unwrap(), f);
    let b = pair(&DiracLine::new(wide, 1.2).unwrap(), f);
    assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
}

#[test]
fn renyi_order_continuity() {
    let p = DiracParams::new(0.0, 1.0, CutoffSpec::exponential()).unwrap();
    let line = DiracLine::new(p, 1.0).unwrap();
    let fs: Vec<SpectralFunction> = [1.0 - 1e-4, 1.0, 1.0 + 1e-4]
        .iter()
        .map(|&k| SpectralFunction::renyi(k).unwrap())
        .collect();
    let r = finite_section_traces(&line, &fs, &SectionSpec::default()).unwrap();
    let v: Vec<f64> = r.traces.iter().map(|t| t.value).collect();
    assert!((v[0] - v[1]).abs() < 1e-3 * v[1].abs() && (v[2] - v[1]).abs() < 1e-3 * v[1].abs(), "{v:?}");
    // eta_kappa decreases in kappa, and so does the pair trace here
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
}

#[test]
fn gaussian_closed_forms() {
    let line = GaussianLine::unit();
    for u in [0.0, 0.5, 1.7, 4.0] {
        let k = line_kernel(&line, u).unwrap();
        let expect = (-u * u / 4.0).exp() / (2.0 * PI.sqrt());
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expect } else { 0.0 };
                assert!((k[(i, j)].re - e).abs() < 1e-10 && k[(i, j)].im.abs() < 1e-10);
            }
        }
    }
    assert!((hs_cross_norm(&line).unwrap().value - 1.0 / PI).abs() < 1e-6);
    // rho(t^2/2) = (2 pi)^{-1} int 4 e^{-2t^2} / 2 dt = 1 / sqrt(2 pi)
    let rho = density_rho(&line, &SpectralFunction::Quadratic).unwrap();
    assert!((rho - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-10, "{rho}");
}
