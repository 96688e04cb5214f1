//! Brute-force check of the `H_β` condition.
//!
//! With `L(jω) = a + jb` and `C_R(jω) = a_R + j·b_R`,
//!
//! ```text
//! Re H(jω) = [β((a+½)² + b² − ¼) + ρ'(a_R·a + b_R·b + a_R)] / ((a+1)² + b²)
//! ```
//!
//! and `(β, ρ')` is feasible when this is strictly positive at every
//! frequency and in both limits `ω → 0`, `ω → ∞`. The frequency grid used
//! here is built from the corner frequencies of the loop and does not share
//! code with the NSV sweep, so the two can check each other.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::{self, LtiError, RationalTf};
use crate::nsv::{ClassificationReport, Verdict};
use crate::reset::ResetKind;
use crate::system::SystemDescription;

/// Relative margin for the strict positivity of `Re H`.
pub const STRICT_REL_MARGIN: f64 = 1e-9;
/// `|1 + L|²` at or below this is a closed-loop pole on the axis.
const AXIS_POLE_TOL: f64 = 1e-14;
pub const DEFAULT_POINTS_PER_DECADE: usize = 200;
/// Decades added on each side of the outermost corner frequencies.
pub const CORNER_MARGIN_DECADES: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HBetaError {
    #[error("1 + L(jω) vanishes at ω = {omega}: closed-loop pole on the imaginary axis")]
    ClosedLoopPoleOnAxis { omega: f64 },
    #[error("invalid scan range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// Multipliers `(β, ρ')` with `ρ' = ρ/C_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBetaPoint {
    pub beta: f64,
    pub rho_prime: f64,
}

impl HBetaPoint {
    pub fn new(beta: f64, rho_prime: f64) -> Self {
        Self { beta, rho_prime }
    }

    /// Unit vector at angle `theta` in the `(β, ρ')` plane.
    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.beta, c * self.rho_prime)
    }
}

/// `Re H(jω)` from the loop and reset-element responses.
pub fn re_h(l: Complex64, c_r: Complex64, p: HBetaPoint) -> Result<f64, HBetaError> {
    re_h_terms(l, c_r, p).map(|(v, _)| v)
}

/// `Re H` together with the magnitude scale of its two terms.
fn re_h_terms(l: Complex64, c_r: Complex64, p: HBetaPoint) -> Result<(f64, f64), HBetaError> {
    let (a, b) = (l.re, l.im);
    let (ar, br) = (c_r.re, c_r.im);
    let den = (a + 1.0) * (a + 1.0) + b * b;
    if den <= AXIS_POLE_TOL {
        return Err(HBetaError::ClosedLoopPoleOnAxis { omega: f64::NAN });
    }
    let circle = a * a + a + b * b;
    let cross = ar * a + br * b + ar;
    let beta_term = p.beta * circle;
    let rho_term = p.rho_prime * cross;
    Ok(((beta_term + rho_term) / den, (beta_term.abs() + rho_term.abs()) / den))
}

fn strictly_positive(value: f64, scale: f64) -> bool {
    value > STRICT_REL_MARGIN * scale
}

/// Precomputed frequency responses plus the data for the limit checks.
#[derive(Debug, Clone)]
pub struct HBetaProblem {
    pub label: String,
    omegas: Vec<f64>,
    l: Vec<Complex64>,
    c_r: Vec<Complex64>,
    kind: ResetKind,
    omega_r: f64,
    loop_origin_order: usize,
    relative_degree: i64,
    a_infinity: f64,
    /// Responses at a frequency far below every corner, for limits that are
    /// evaluated numerically.
    tiny: (Complex64, Complex64),
}

impl HBetaProblem {
    pub fn new(system: &SystemDescription, points_per_decade: usize) -> Result<Self, HBetaError> {
        let l = system.loop_tf();
        let c_r = system.reset_base_tf();
        let (lo, hi) = corner_span(&l)?;
        let omegas = oracle_grid(lo, hi, points_per_decade.max(2), l.origin_pole_order()? == 0);
        let mut lv = Vec::with_capacity(omegas.len());
        let mut cv = Vec::with_capacity(omegas.len());
        for &w in &omegas {
            let a = l.eval(w)?;
            let c = c_r.eval(w)?;
            if (a + 1.0).norm_sqr() <= AXIS_POLE_TOL {
                return Err(HBetaError::ClosedLoopPoleOnAxis { omega: w });
            }
            lv.push(a);
            cv.push(c);
        }
        let w_tiny = lo * 1e-8;
        Ok(Self {
            label: system.label.clone(),
            omegas,
            l: lv,
            c_r: cv,
            kind: system.reset().kind(),
            omega_r: system.reset().omega_r(),
            loop_origin_order: l.origin_pole_order()?,
            relative_degree: l.relative_degree(),
            a_infinity: -l.leading_ratio(),
            tiny: (l.eval(w_tiny)?, c_r.eval(w_tiny)?),
        })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// `lim ω²·Re L(jω)` for a relative-degree-two loop.
    pub fn a_infinity(&self) -> f64 {
        self.a_infinity
    }

    /// Checks `Re H` in the limits `ω → 0` and `ω → ∞`.
    pub fn limit_checks(&self, p: HBetaPoint) -> bool {
        let low = match (self.kind, self.loop_origin_order) {
            // finite at the origin: ω = 0 is on the grid
            (_, 0) => true,
            // Re H → β + ρ'/𝓛(0)
            (ResetKind::Pci, 1) => re_h_terms(self.tiny.0, self.tiny.1, p)
                .is_ok_and(|(v, s)| strictly_positive(v, s)),
            _ => strictly_positive(p.beta, p.beta.abs()),
        };
        let high = match self.kind {
            ResetKind::Pci => true,
            ResetKind::Gfore if self.relative_degree == 2 => {
                let wr2 = self.omega_r * self.omega_r;
                let (t1, t2) = (p.beta * self.a_infinity, p.rho_prime * wr2);
                strictly_positive(t1 + t2, t1.abs() + t2.abs())
            }
            ResetKind::Gfore => true,
        };
        low && high
    }

    /// Strict positivity of `Re H` on the grid and in both limits.
    pub fn feasible(&self, p: HBetaPoint) -> bool {
        if !(p.rho_prime > 0.0) || !p.beta.is_finite() || !p.rho_prime.is_finite() {
            return false;
        }
        self.l.iter().zip(&self.c_r).all(|(&l, &c)| {
            re_h_terms(l, c, p).is_ok_and(|(v, s)| strictly_positive(v, s))
        }) && self.limit_checks(p)
    }

    /// Smallest `Re H` over the grid.
    pub fn min_re_h(&self, p: HBetaPoint) -> Result<(f64, f64), HBetaError> {
        let mut best = (f64::NAN, f64::INFINITY);
        for ((&w, &l), &c) in self.omegas.iter().zip(&self.l).zip(&self.c_r) {
            let v = re_h(l, c, p).map_err(|_| HBetaError::ClosedLoopPoleOnAxis { omega: w })?;
            if v < best.1 {
                best = (w, v);
            }
        }
        Ok(best)
    }
}

/// Nonzero pole/zero magnitudes of `l`, widened by the corner margin.
fn corner_span(l: &RationalTf) -> Result<(f64, f64), HBetaError> {
    let mut mags: Vec<f64> = l
        .poles()?
        .into_iter()
        .chain(l.zeros()?)
        .map(|z| z.norm())
        .filter(|m| *m > 0.0)
        .collect();
    if mags.is_empty() {
        mags.push(1.0);
    }
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    let pad = 10f64.powf(CORNER_MARGIN_DECADES);
    Ok((lo / pad, hi * pad))
}

fn oracle_grid(lo: f64, hi: f64, per_decade: usize, include_zero: bool) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).ceil() as usize + 1;
    let mut w: Vec<f64> = Vec::with_capacity(n + 1);
    if include_zero {
        w.push(0.0);
    }
    let step = decades / (n - 1) as f64;
    w.extend((0..n).map(|k| lo * 10f64.powf(step * k as f64)));
    w
}

/// Bounds and resolution of the `(β, ρ')` scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub beta_min: f64,
    pub beta_max: f64,
    pub rho_max: f64,
    /// Grid points per axis.
    pub resolution: usize,
    /// Oracle frequency grid density.
    pub points_per_decade: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            beta_min: -10.0,
            beta_max: 10.0,
            rho_max: 100.0,
            resolution: 200,
            points_per_decade: DEFAULT_POINTS_PER_DECADE,
        }
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<(), HBetaError> {
        let finite = [self.beta_min, self.beta_max, self.rho_max].iter().all(|v| v.is_finite());
        if !finite || self.beta_max <= self.beta_min {
            return Err(HBetaError::InvalidRange("need finite beta_min < beta_max".into()));
        }
        if !(self.rho_max > 0.0) {
            return Err(HBetaError::InvalidRange("rho_max must be positive".into()));
        }
        if self.resolution < 2 {
            return Err(HBetaError::InvalidRange("resolution must be at least 2".into()));
        }
        Ok(())
    }

    pub fn betas(&self) -> Vec<f64> {
        let n = self.resolution;
        (0..n)
            .map(|k| self.beta_min + (self.beta_max - self.beta_min) * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Log-spaced over four decades ending at `rho_max`.
    pub fn rhos(&self) -> Vec<f64> {
        let n = self.resolution;
        let lo = self.rho_max * 1e-4;
        (0..n)
            .map(|k| lo * 10f64.powf(4.0 * k as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Feasible `ρ'/β` ratios for `β > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioInterval {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibleRegion {
    pub label: String,
    pub spec: ScanSpec,
    /// Grid cells that passed, in `β`-major order.
    pub feasible_points: Vec<HBetaPoint>,
    pub cells_tested: usize,
    /// Feasible ratio interval at `β = 1`, bisected to 1e−6 relative.
    pub ratio_interval: Option<RatioInterval>,
    /// Feasible directions of `(β, ρ')` as angles in degrees, `(0, 180)`.
    pub direction_interval: Option<(f64, f64)>,
    /// Non-contiguous feasible sets found by the 1-D scans.
    pub convexity_violations: Vec<String>,
    pub notes: Vec<String>,
    #[serde(skip)]
    flags: Vec<bool>,
}

impl FeasibleRegion {
    pub fn is_empty(&self) -> bool {
        self.feasible_points.is_empty() && self.direction_interval.is_none()
    }

    fn empty(label: &str, spec: ScanSpec, note: String) -> Self {
        Self {
            label: label.to_string(),
            spec,
            feasible_points: Vec::new(),
            cells_tested: 0,
            ratio_interval: None,
            direction_interval: None,
            convexity_violations: Vec::new(),
            notes: vec![note],
            flags: Vec::new(),
        }
    }

    /// `beta,rho_prime,feasible` for every scanned cell.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["beta", "rho_prime", "feasible"])?;
        let (betas, rhos) = (self.spec.betas(), self.spec.rhos());
        for (k, flag) in self.flags.iter().enumerate() {
            let (b, r) = (betas[k / rhos.len()], rhos[k % rhos.len()]);
            w.write_record([fmt_g(b), fmt_g(r), (*flag as u8).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_g(v: f64) -> String {
    format!("{v:.6e}")
}

/// Scans `(β, ρ')` over the configured grid and extracts ratio and
/// direction intervals.
pub fn scan(problem: &HBetaProblem, spec: &ScanSpec) -> Result<FeasibleRegion, HBetaError> {
    spec.validate()?;
    let betas = spec.betas();
    let rhos = spec.rhos();
    let flags: Vec<bool> = (0..betas.len() * rhos.len())
        .into_par_iter()
        .map(|k| problem.feasible(HBetaPoint::new(betas[k / rhos.len()], rhos[k % rhos.len()])))
        .collect();
    let feasible_points = flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .map(|(k, _)| HBetaPoint::new(betas[k / rhos.len()], rhos[k % rhos.len()]))
        .collect();

    let mut convexity_violations = Vec::new();
    let ratio_interval = ratio_interval(problem, &mut convexity_violations);
    let direction_interval = direction_interval(problem, &mut convexity_violations);

    Ok(FeasibleRegion {
        label: problem.label.clone(),
        spec: *spec,
        feasible_points,
        cells_tested: flags.len(),
        ratio_interval,
        direction_interval,
        convexity_violations,
        notes: Vec::new(),
        flags,
    })
}

/// Runs [`scan`] when the hypotheses on the base linear loop hold; an empty
/// region with a note otherwise.
pub fn scan_system(system: &SystemDescription, spec: &ScanSpec) -> Result<FeasibleRegion, HBetaError> {
    spec.validate()?;
    let l = system.loop_tf();
    if !lti::base_linear_closed_loop_stable(&l)? {
        return Ok(FeasibleRegion::empty(
            &system.label,
            *spec,
            "base linear closed loop is not stable; scan skipped".into(),
        ));
    }
    if l.has_pole_zero_cancellation(lti::ROOT_TOL)? {
        return Ok(FeasibleRegion::empty(
            &system.label,
            *spec,
            "open loop has a pole-zero cancellation; scan skipped".into(),
        ));
    }
    let problem = HBetaProblem::new(system, spec.points_per_decade)?;
    scan(&problem, spec)
}

/// Contiguous runs of `true`.
fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, flags.len() - 1));
    }
    out
}

/// Bisects the boundary between an infeasible `bad` and a feasible `good`.
fn bisect(mut good: f64, mut bad: f64, feasible: impl Fn(f64) -> bool, geometric: bool, rel: f64) -> f64 {
    for _ in 0..200 {
        if (good - bad).abs() <= rel * good.abs().max(bad.abs()) {
            break;
        }
        let mid = if geometric { (good * bad).sqrt() } else { 0.5 * (good + bad) };
        if feasible(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

const RATIO_SCAN_POINTS: usize = 4001;
const RATIO_SCAN_DECADES: (f64, f64) = (-4.0, 4.0);

fn ratio_interval(problem: &HBetaProblem, violations: &mut Vec<String>) -> Option<RatioInterval> {
    let (lo, hi) = RATIO_SCAN_DECADES;
    let ratios: Vec<f64> = (0..RATIO_SCAN_POINTS)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (RATIO_SCAN_POINTS - 1) as f64))
        .collect();
    let at = |r: f64| problem.feasible(HBetaPoint::new(1.0, r));
    let flags: Vec<bool> = ratios.par_iter().map(|&r| at(r)).collect();
    let rs = runs(&flags);
    if rs.len() > 1 {
        violations.push(format!("feasible ρ'/β set at β = 1 has {} separate pieces", rs.len()));
    }
    let (&(first, _), &(_, last)) = (rs.first()?, rs.last()?);
    let min = if first == 0 {
        ratios[0]
    } else {
        bisect(ratios[first], ratios[first - 1], at, true, 1e-6)
    };
    let max = if last == ratios.len() - 1 {
        ratios[last]
    } else {
        bisect(ratios[last], ratios[last + 1], at, true, 1e-6)
    };
    Some(RatioInterval { min, max })
}

const DIRECTION_SCAN_POINTS: usize = 18001;

fn direction_interval(problem: &HBetaProblem, violations: &mut Vec<String>) -> Option<(f64, f64)> {
    let n = DIRECTION_SCAN_POINTS;
    // open interval (0, π)
    let angles: Vec<f64> = (1..=n).map(|k| PI * k as f64 / (n + 1) as f64).collect();
    let at = |t: f64| problem.feasible(HBetaPoint::from_angle(t));
    let flags: Vec<bool> = angles.par_iter().map(|&t| at(t)).collect();
    let rs = runs(&flags);
    if rs.len() > 1 {
        violations.push(format!("feasible direction set has {} separate pieces", rs.len()));
    }
    let (&(first, _), &(_, last)) = (rs.first()?, rs.last()?);
    let lo = if first == 0 {
        angles[0]
    } else {
        bisect(angles[first], angles[first - 1], at, false, 1e-9)
    };
    let hi = if last == n - 1 {
        angles[last]
    } else {
        bisect(angles[last], angles[last + 1], at, false, 1e-9)
    };
    Some((lo.to_degrees(), hi.to_degrees()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CrossCheck {
    Consistent,
    Inconsistent { type_holds: bool, region_nonempty: bool },
    /// Hypotheses failed; the oracle says nothing about such loops.
    Skipped,
}

/// Compares the NSV classification with the oracle's feasible region.
pub fn cross_check(report: &ClassificationReport, region: &FeasibleRegion) -> CrossCheck {
    if report.verdict == Verdict::HypothesisFailed {
        return CrossCheck::Skipped;
    }
    let type_holds = report.type_i() || report.type_ii();
    let region_nonempty = !region.is_empty();
    if type_holds == region_nonempty {
        CrossCheck::Consistent
    } else {
        CrossCheck::Inconsistent {
            type_holds,
            region_nonempty,
        }
    }
}
