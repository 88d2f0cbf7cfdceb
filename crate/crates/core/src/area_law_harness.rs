//! Region-size sweeps of lattice entropies, the quadratic area-law fit and
//! the comparison against the Widom coefficient.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac_symbols::DiracParams;
use crate::entropy_functions::{RenyiOrder, SpectralFunction};
use crate::error::{Error, Result};
use crate::lattice_model::{correlation_matrix, entropies, LatticeKernel, Region, MAX_DENSE_DIM};
use crate::widom_coefficient::WidomResult;

/// Default acceptance tolerance on the relative gap.
pub const DEFAULT_TOLERANCE: f64 = 0.20;
/// Relative fit residual above which the quadratic model is flagged.
pub const RESIDUAL_WARNING: f64 = 1e-3;

/// Unit region scaled by `L` at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Cube,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGenerator {
    pub kind: RegionKind,
    /// Side (cube) or radius (ball) of the unit region.
    pub size: f64,
}

impl RegionGenerator {
    /// Rasterizes `L` times the unit region on the kernel's lattice.
    pub fn at(&self, kernel: &LatticeKernel, l: f64) -> Result<Region> {
        match self.kind {
            RegionKind::Cube => Region::cube(&kernel.lattice, l * self.size),
            RegionKind::Ball => Region::ball(&kernel.lattice, l * self.size),
        }
    }

    /// Boundary area of the unit region.
    pub fn unit_area(&self) -> f64 {
        match self.kind {
            RegionKind::Cube => 6.0 * self.size * self.size,
            RegionKind::Ball => 4.0 * std::f64::consts::PI * self.size * self.size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l: f64,
    pub entropy: f64,
    pub clip_count: usize,
}

// Rows serialize as [L, S, clip_count].
impl SweepRow {
    fn as_tuple(&self) -> (f64, f64, usize) {
        (self.l, self.entropy, self.clip_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaFit {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    /// RMS residual relative to `max |S|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub params: DiracParams,
    pub order: RenyiOrder,
    pub region: RegionGenerator,
    pub rows: Vec<SweepRow>,
    pub fit: AreaFit,
    pub warnings: Vec<String>,
}

fn check_l_values(l_values: &[f64]) -> Result<()> {
    if l_values.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a sweep needs at least 3 L values, got {}",
            l_values.len()
        )));
    }
    if l_values.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("L values must be positive".into()));
    }
    if l_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "L values must be strictly increasing, got {l_values:?}"
        )));
    }
    Ok(())
}

/// Computes `S_kappa(L Lambda)` for every `L` on a fixed lattice.
pub fn run_sweep(
    kernel: &LatticeKernel,
    region: &RegionGenerator,
    l_values: &[f64],
    order: RenyiOrder,
) -> Result<SweepRecord> {
    Ok(run_sweeps(kernel, region, l_values, &[order])?.remove(0))
}

/// One sweep per Renyi order, sharing the eigensolve at each `L`.
pub fn run_sweeps(
    kernel: &LatticeKernel,
    region: &RegionGenerator,
    l_values: &[f64],
    orders: &[RenyiOrder],
) -> Result<Vec<SweepRecord>> {
    check_l_values(l_values)?;
    if orders.is_empty() {
        return Err(Error::InvalidArgument("no Renyi orders requested".into()));
    }
    let regions: Vec<Region> = l_values.iter().map(|&l| region.at(kernel, l)).collect::<Result<_>>()?;
    if let Some(i) = regions.iter().position(|r| 4 * r.sites.len() > MAX_DENSE_DIM) {
        let largest = regions[..i]
            .last()
            .map(|_| format!("; the largest admissible L in this sweep is {}", l_values[i - 1]))
            .unwrap_or_default();
        return Err(Error::Size(format!(
            "L = {} needs a {}-dimensional correlation matrix, above the dense limit {MAX_DENSE_DIM}{largest}",
            l_values[i],
            4 * regions[i].sites.len()
        )));
    }
    let functions: Vec<SpectralFunction> = orders.iter().map(|&kappa| SpectralFunction::Renyi { kappa }).collect();
    let results: Vec<(Vec<f64>, usize, Vec<String>)> = regions
        .par_iter()
        .map(|r| {
            let c = correlation_matrix(kernel, r)?;
            let rep = entropies(&c, &functions, kernel)?;
            Ok((rep.values.iter().map(|v| v.value).collect(), rep.clipped, c.warnings))
        })
        .collect::<Result<_>>()?;
    let mut shared: Vec<String> = Vec::new();
    for w in results.iter().flat_map(|(_, _, w)| w) {
        if !shared.contains(w) {
            shared.push(w.clone());
        }
    }
    orders
        .iter()
        .enumerate()
        .map(|(i, &order)| {
            let rows: Vec<SweepRow> = results
                .iter()
                .zip(l_values)
                .map(|((values, clipped, _), &l)| SweepRow {
                    l,
                    entropy: values[i],
                    clip_count: *clipped,
                })
                .collect();
            let ls: Vec<f64> = rows.iter().map(|r| r.l).collect();
            let ss: Vec<f64> = rows.iter().map(|r| r.entropy).collect();
            let fit = fit_area_coefficient(&ls, &ss)?;
            let mut warnings = shared.clone();
            if fit.residual > RESIDUAL_WARNING {
                warnings.push(format!(
                    "relative fit residual {:.2e} suggests structure beyond c2 L^2 + c1 L + c0 (check for an enhanced L^2 log L term)",
                    fit.residual
                ));
            }
            Ok(SweepRecord {
                params: kernel.params,
                order,
                region: *region,
                rows,
                fit,
                warnings,
            })
        })
        .collect()
}

/// Least-squares fit `S = c2 L^2 + c1 L + c0`.
pub fn fit_area_coefficient(l: &[f64], s: &[f64]) -> Result<AreaFit> {
    if l.len() != s.len() {
        return Err(Error::Fit("L and S have different lengths".into()));
    }
    if l.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", l.len())));
    }
    // centered and scaled monomials keep the design well conditioned
    let mean = l.iter().sum::<f64>() / l.len() as f64;
    let scale = l.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Fit("rank-deficient design: all L values coincide".into()));
    }
    let a = DMatrix::from_fn(l.len(), 3, |i, j| ((l[i] - mean) / scale).powi(j as i32));
    let b = DVector::from_column_slice(s);
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return Err(Error::Fit("rank-deficient design matrix".into()));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let (b0, b1, b2) = (x[0], x[1] / scale, x[2] / (scale * scale));
    // expand back to the monomial basis in L
    let c2 = b2;
    let c1 = b1 - 2.0 * b2 * mean;
    let c0 = b0 - b1 * mean + b2 * mean * mean;
    let r = &a * &x - &b;
    let rms = (r.norm_squared() / l.len() as f64).sqrt();
    let max = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(AreaFit {
        c2,
        c1,
        c0,
        residual: if max > 0.0 { rms / max } else { rms },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `eps^-2 M_kappa^(eps) vol_2(boundary of the unit region)`.
    pub prediction: f64,
    pub prediction_error: f64,
    pub relative_gap: f64,
    /// Coefficient error plus fit residual, relative to the prediction.
    pub combined_uncertainty: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Prediction for `c2` and the relative gap.
pub fn compare_report(record: &SweepRecord, widom: &WidomResult, tolerance: f64) -> Result<Comparison> {
    let p = &record.params;
    let mut mismatches = Vec::new();
    if !same(p.epsilon, widom.epsilon) {
        mismatches.push(format!("epsilon {} vs {}", p.epsilon, widom.epsilon));
    }
    if !same(p.mass, widom.mass) {
        mismatches.push(format!("mass {} vs {}", p.mass, widom.mass));
    }
    if p.cutoff != widom.cutoff {
        mismatches.push(format!("cutoff {} vs {}", p.cutoff.name(), widom.cutoff.name()));
    }
    if !same(record.order.kappa(), widom.kappa) {
        mismatches.push(format!("kappa {} vs {}", record.order.kappa(), widom.kappa));
    }
    if !mismatches.is_empty() {
        return Err(Error::Comparison(mismatches.join(", ")));
    }
    let factor = record.region.unit_area() / (p.epsilon * p.epsilon);
    let prediction = widom.coefficient * factor;
    let prediction_error = widom.coefficient_error * factor;
    let c2 = record.fit.c2;
    let (relative_gap, combined_uncertainty) = if prediction > 0.0 {
        (
            (c2 - prediction).abs() / prediction,
            prediction_error / prediction + record.fit.residual,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(Comparison {
        prediction,
        prediction_error,
        relative_gap,
        combined_uncertainty,
        tolerance,
        pass: relative_gap <= tolerance,
    })
}

/// Serialized sweep report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub params: DiracParams,
    pub kappa: RenyiOrder,
    pub region: RegionGenerator,
    pub rows: Vec<(f64, f64, usize)>,
    pub fit: AreaFit,
    pub prediction: Option<f64>,
    pub prediction_error: Option<f64>,
    pub relative_gap: Option<f64>,
    pub tolerance: f64,
    pub pass: Option<bool>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl SweepReport {
    pub fn new(record: &SweepRecord, comparison: Option<&Comparison>, tolerance: f64) -> Self {
        Self {
            params: record.params,
            kappa: record.order,
            region: record.region,
            rows: record.rows.iter().map(SweepRow::as_tuple).collect(),
            fit: record.fit,
            prediction: comparison.map(|c| c.prediction),
            prediction_error: comparison.map(|c| c.prediction_error),
            // infinite gaps are not representable in JSON
            relative_gap: comparison.map(|c| c.relative_gap).filter(|g| g.is_finite()),
            tolerance,
            pass: comparison.map(|c| c.pass),
            warnings: record.warnings.clone(),
            config_hash: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,S\n");
        for (l, s, _) in &self.rows {
            let _ = writeln!(out, "{l},{s}");
        }
        out
    }

    /// Static plot of `S` against `L^2` with the fitted curve.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 50.0);
        let xs: Vec<f64> = self.rows.iter().map(|r| r.0 * r.0).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.1).collect();
        let fit_at = |l: f64| self.fit.c2 * l * l + self.fit.c1 * l + self.fit.c0;
        let (lmin, lmax) = (
            self.rows.first().map_or(0.0, |r| r.0),
            self.rows.last().map_or(1.0, |r| r.0),
        );
        let curve: Vec<(f64, f64)> = (0..=64)
            .map(|i| {
                let l = lmin + (lmax - lmin) * i as f64 / 64.0;
                (l * l, fit_at(l))
            })
            .collect();
        let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let x1 = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let all_y = ys.iter().copied().chain(curve.iter().map(|c| c.1));
        let (y0, y1) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
        let px = |x: f64| pad + (x - x0) / span(x0, x1) * (w - 2.0 * pad);
        let py = |y: f64| h - pad - (y - y0) / span(y0, y1) * (h - 2.0 * pad);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
            h - pad,
            w - pad
        );
        let path: Vec<String> = curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="steelblue" fill="none" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        for (&x, &y) in xs.iter().zip(&ys) {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="firebrick"/>"#, px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">L^2</text>"#,
            w / 2.0,
            h - 15.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="15" y="{}" font-family="sans-serif" font-size="13" transform="rotate(-90 15 {})">S</text>"#,
            h / 2.0,
            h / 2.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="30" font-family="sans-serif" font-size="13">c2 = {:.5e}</text>"#,
            pad + 10.0,
            self.fit.c2
        );
        svg.push_str("</svg>\n");
        svg
    }

    /// Writes `<stem>.json`, `<stem>.csv` and `<stem>.svg` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (ext, body) in [("json", self.to_json()?), ("csv", self.to_csv()), ("svg", self.to_svg())] {
            let mut f = std::fs::File::create(dir.join(format!("{stem}.{ext}")))?;
            f.write_all(body.as_bytes())?;
        }
        Ok(())
    }
}
