//! Nyquist Stability Vector analysis.
//!
//! For the base open loop `L = 𝓛·C_R` the vector
//!
//! ```text
//! N(ω) = [ |L(jω) + ½|² − ¼ ,  Re(L(jω)·conj C_R(jω)) + Re C_R(jω) ]
//! ```
//!
//! is swept over a log grid, closed off with its analytic `ω → 0` and
//! `ω → ∞` directions, and classified:
//!
//! * **Type I**: every angle lies in `(−π/2, π)` and the angular span is below `π`;
//! * **Type II**: `𝓛` has no pole at the origin, every angle lies in
//!   `(0, 3π/2)` and the span is below `π`.
//!
//! Each type is evaluated twice, once through the set/ratio conditions
//! (`ℳ`, `𝒬`, `ℐ₁..ℐ₄`, `δ`, `Ψ`) and once through the extremal angles, and
//! the two answers must agree.
//!
//! The first component is the signed squared distance of `L(jω)` from the
//! circle centred at `−½` with radius `½`: positive outside, zero on it,
//! negative inside. The second is the numerator that multiplies `ρ'` in
//! `Re H(jω)`; it uses `conj C_R`, which is what the expansion of
//! `Re[(βL + ρ'C_R)/(1 + L)]` produces.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::{self, LtiError, RationalTf};
use crate::reset::{ResetElement, ResetKind};
use crate::system::SystemDescription;

pub const DEFAULT_W_MIN: f64 = 1e-2;
pub const DEFAULT_W_MAX: f64 = 1e6;
pub const DEFAULT_POINTS: usize = 4000;
/// Endpoint angle must be within this many degrees of the analytic limit.
pub const LIMIT_MATCH_DEG: f64 = 1.0;
/// Decades the grid may grow by at each end while chasing a limit.
pub const MAX_EXTRA_DECADES: usize = 12;
/// Absolute margin for the strict inequalities of the type conditions.
pub const STRICT_MARGIN: f64 = 1e-9;
/// `|N|` below this fraction of its term magnitudes counts as a zero vector.
const ZERO_VECTOR_REL: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NsvError {
    #[error("Nyquist stability vector vanishes (ω = {omega:?}); its angle is undefined")]
    ZeroVector { omega: Option<f64> },
    #[error("loop transfer function has a pole on the grid at ω = {omega}")]
    PoleOnGrid { omega: f64 },
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("{which}: set conditions ({definition}) disagree with the angle test ({angle_test})")]
    InternalInconsistency {
        which: &'static str,
        definition: bool,
        angle_test: bool,
    },
    #[error("reset element has gamma = 1 (no reset); it is not a reset system")]
    LinearEquivalentReset,
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// Log-spaced frequency grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
    /// Grow the grid by decades until both endpoints match their limits.
    pub auto_extend: bool,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            w_min: DEFAULT_W_MIN,
            w_max: DEFAULT_W_MAX,
            points: DEFAULT_POINTS,
            auto_extend: true,
        }
    }
}

impl FrequencyGrid {
    pub fn new(w_min: f64, w_max: f64, points: usize) -> Result<Self, NsvError> {
        let g = Self {
            w_min,
            w_max,
            points,
            auto_extend: true,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn fixed(mut self) -> Self {
        self.auto_extend = false;
        self
    }

    pub fn validate(&self) -> Result<(), NsvError> {
        if !(self.w_min.is_finite() && self.w_max.is_finite() && self.w_min > 0.0) {
            return Err(NsvError::InvalidGrid("bounds must be finite and positive".into()));
        }
        if self.w_max <= self.w_min {
            return Err(NsvError::InvalidGrid("w_max must exceed w_min".into()));
        }
        if self.points < 2 || self.points_per_decade() < 2.0 {
            return Err(NsvError::InvalidGrid(
                "need at least two points and two points per decade".into(),
            ));
        }
        Ok(())
    }

    pub fn decades(&self) -> f64 {
        (self.w_max / self.w_min).log10()
    }

    pub fn points_per_decade(&self) -> f64 {
        (self.points - 1) as f64 / self.decades()
    }

    pub fn omegas(&self) -> Vec<f64> {
        log_space(self.w_min, self.w_max, self.points)
    }

    /// Same span, `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points: (self.points - 1) * factor + 1,
            ..*self
        }
    }
}

fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.log10(), b.log10());
    (0..n)
        .map(|k| {
            if k == 0 {
                a
            } else if k == n - 1 {
                b
            } else {
                10f64.powf(la + (lb - la) * k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// `(N_χ, N_Υ)` from the loop and reset-element frequency responses.
pub fn nsv_at(l: Complex64, c_r: Complex64) -> (f64, f64) {
    // |L + ½|² − ¼ without the cancellation for small |L|
    let chi = l.norm_sqr() + l.re;
    let upsilon = (l * c_r.conj()).re + c_r.re;
    (chi, upsilon)
}

/// Angle of `(χ, Υ)` wrapped into `[−π/2, 3π/2)`.
pub fn wrap_angle(chi: f64, upsilon: f64) -> Result<f64, NsvError> {
    if chi == 0.0 && upsilon == 0.0 {
        return Err(NsvError::ZeroVector { omega: None });
    }
    Ok(wrap_raw(upsilon.atan2(chi)))
}

fn wrap_raw(theta: f64) -> f64 {
    if theta < -FRAC_PI_2 {
        theta + 2.0 * PI
    } else {
        theta
    }
}

/// Scale of the terms making up `N`, used for the zero-vector test.
fn term_scale(l: Complex64, c_r: Complex64) -> f64 {
    let (ln, cn) = (l.norm(), c_r.norm());
    ln * ln + ln + ln * cn + cn
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NsvSample {
    pub omega: f64,
    pub chi: f64,
    pub upsilon: f64,
    /// `None` when the vector is numerically zero.
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitEnd {
    OmegaToZero,
    OmegaToInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitForm {
    /// `N_χ` grows faster than `N_Υ`: direction `(1, 0)`.
    ChiDominated,
    /// `N_Υ` dominates: direction `(0, 1)`.
    UpsilonDominated,
    /// Both components decay or grow at the same rate; fixed direction.
    Vector,
    /// `N` tends to a finite nonzero vector (evaluated at the endpoint itself).
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRecord {
    pub end: LimitEnd,
    pub form: LimitForm,
    /// Unit direction of the limit in the `χ–Υ` plane.
    pub chi: f64,
    pub upsilon: f64,
    pub direction: f64,
    /// Order of the origin pole of `L`.
    pub origin_pole_order: usize,
    /// `lim ω²·Re L(jω)` when `L` has relative degree two.
    pub a_infinity: Option<f64>,
}

impl LimitRecord {
    fn new(end: LimitEnd, form: LimitForm, chi: f64, upsilon: f64, n: usize) -> Result<Self, NsvError> {
        let norm = chi.hypot(upsilon);
        if norm == 0.0 || !norm.is_finite() {
            return Err(NsvError::ZeroVector { omega: None });
        }
        let (chi, upsilon) = (chi / norm, upsilon / norm);
        Ok(Self {
            end,
            form,
            chi,
            upsilon,
            direction: wrap_angle(chi, upsilon)?,
            origin_pole_order: n,
            a_infinity: None,
        })
    }
}

/// A polished zero of one NSV component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub omega: f64,
    /// Value of the other component at the crossing.
    pub other: f64,
}

/// Sampled NSV plus its limits and the polished zero sets of each component.
#[derive(Debug, Clone, Serialize)]
pub struct NsvCurve {
    pub samples: Vec<NsvSample>,
    /// Zeros of `N_χ` (the set `ℳ`).
    pub chi_crossings: Vec<Crossing>,
    /// Zeros of `N_Υ` (the set `𝒬`).
    pub upsilon_crossings: Vec<Crossing>,
    pub limit_low: LimitRecord,
    pub limit_high: LimitRecord,
    /// Grid actually used after auto-extension.
    pub grid: FrequencyGrid,
    pub notes: Vec<String>,
    #[serde(skip)]
    lcal: RationalTf,
    #[serde(skip)]
    c_r: RationalTf,
}

impl NsvCurve {
    /// Re-evaluates `(χ, Υ)` at an arbitrary frequency.
    pub fn eval_at(&self, omega: f64) -> Result<(f64, f64), NsvError> {
        eval_components(&self.lcal, &self.c_r, omega).map(|(c, u, _)| (c, u))
    }

    /// Every point the classification looks at: samples, polished crossings
    /// (with the vanishing component set to exactly zero) and both limits.
    pub fn analysis_points(&self) -> Vec<AnalysisPoint> {
        let mut pts: Vec<AnalysisPoint> = self
            .samples
            .iter()
            .map(|s| AnalysisPoint {
                omega: Some(s.omega),
                chi: s.chi,
                upsilon: s.upsilon,
                theta: s.theta,
            })
            .collect();
        for c in &self.chi_crossings {
            pts.push(AnalysisPoint::exact(Some(c.omega), 0.0, c.other));
        }
        for c in &self.upsilon_crossings {
            pts.push(AnalysisPoint::exact(Some(c.omega), c.other, 0.0));
        }
        pts.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
        let lo = &self.limit_low;
        let hi = &self.limit_high;
        pts.insert(0, AnalysisPoint::exact(None, lo.chi, lo.upsilon));
        pts.push(AnalysisPoint::exact(None, hi.chi, hi.upsilon));
        pts
    }

    /// First sample whose vector is numerically zero.
    pub fn zero_vector(&self) -> Option<f64> {
        self.samples.iter().find(|s| s.theta.is_none()).map(|s| s.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisPoint {
    /// `None` for the `ω → 0` / `ω → ∞` limits.
    pub omega: Option<f64>,
    pub chi: f64,
    pub upsilon: f64,
    pub theta: Option<f64>,
}

impl AnalysisPoint {
    fn exact(omega: Option<f64>, chi: f64, upsilon: f64) -> Self {
        Self {
            omega,
            chi,
            upsilon,
            theta: wrap_angle(chi, upsilon).ok(),
        }
    }
}

fn eval_components(lcal: &RationalTf, c_r: &RationalTf, omega: f64) -> Result<(f64, f64, f64), NsvError> {
    let lv = lcal.eval(omega).map_err(|_| NsvError::PoleOnGrid { omega })?;
    let cv = c_r.eval(omega).map_err(|_| NsvError::PoleOnGrid { omega })?;
    let l = lv * cv;
    let (chi, upsilon) = nsv_at(l, cv);
    Ok((chi, upsilon, term_scale(l, cv)))
}

fn sample_at(lcal: &RationalTf, c_r: &RationalTf, omega: f64) -> Result<NsvSample, NsvError> {
    let (chi, upsilon, scale) = eval_components(lcal, c_r, omega)?;
    let theta = if chi.hypot(upsilon) <= ZERO_VECTOR_REL * scale {
        None
    } else {
        wrap_angle(chi, upsilon).ok()
    };
    Ok(NsvSample {
        omega,
        chi,
        upsilon,
        theta,
    })
}

fn sample_all(lcal: &RationalTf, c_r: &RationalTf, omegas: &[f64]) -> Result<Vec<NsvSample>, NsvError> {
    omegas.par_iter().map(|&w| sample_at(lcal, c_r, w)).collect()
}

/// Analytic directions of `N` as `ω → 0` and `ω → ∞`.
pub fn limit_records(lcal: &RationalTf, reset: &ResetElement) -> Result<(LimitRecord, LimitRecord), NsvError> {
    let c_r = reset.base_tf();
    let l = lcal.series(&c_r);
    let n = l.origin_pole_order()?;
    let wr = reset.omega_r();

    let low = match (reset.kind(), n) {
        (_, 0) => {
            let lv = l.eval(0.0)?;
            let cv = c_r.eval(0.0)?;
            let (chi, upsilon) = nsv_at(lv, cv);
            LimitRecord::new(LimitEnd::OmegaToZero, LimitForm::Finite, chi, upsilon, 0)?
        }
        // L ≈ 𝓛(0)·ω_r/(jω): N_χ ≈ 𝓛(0)²ω_r²/ω² and N_Υ ≈ 𝓛(0)ω_r²/ω²
        (ResetKind::Pci, 1) => {
            let l0 = lcal.eval(0.0)?.re;
            LimitRecord::new(LimitEnd::OmegaToZero, LimitForm::Vector, 1.0, 1.0 / l0, 1)?
        }
        (_, n) => LimitRecord::new(LimitEnd::OmegaToZero, LimitForm::ChiDominated, 1.0, 0.0, n)?,
    };

    let rel = l.relative_degree();
    let high = match reset.kind() {
        ResetKind::Pci => LimitRecord::new(LimitEnd::OmegaToInfinity, LimitForm::UpsilonDominated, 0.0, 1.0, n)?,
        ResetKind::Gfore if rel == 2 => {
            // L ≈ c/(jω)² so ω²·Re L → −c, and ω²·Re C_R → ω_r²
            let a_inf = -l.leading_ratio();
            let mut rec = LimitRecord::new(LimitEnd::OmegaToInfinity, LimitForm::Vector, a_inf, wr * wr, n)?;
            rec.a_infinity = Some(a_inf);
            rec
        }
        ResetKind::Gfore if rel > 2 => {
            LimitRecord::new(LimitEnd::OmegaToInfinity, LimitForm::UpsilonDominated, 0.0, 1.0, n)?
        }
        ResetKind::Gfore => {
            // biproper 𝓛: N tends to the finite value at infinity
            let lv = Complex64::new(l.leading_ratio(), 0.0);
            let (chi, upsilon) = nsv_at(lv, Complex64::new(0.0, 0.0));
            LimitRecord::new(LimitEnd::OmegaToInfinity, LimitForm::Finite, chi, upsilon, n)?
        }
    };
    Ok((low, high))
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn endpoint_matches(sample: &NsvSample, limit: &LimitRecord) -> bool {
    sample
        .theta
        .is_some_and(|t| angle_gap(t, limit.direction) <= LIMIT_MATCH_DEG.to_radians())
}

/// Samples the NSV of `L = 𝓛·C_R` and polishes the zero crossings of both
/// components.
pub fn sweep(lcal: &RationalTf, reset: &ResetElement, grid: &FrequencyGrid) -> Result<NsvCurve, NsvError> {
    grid.validate()?;
    let c_r = reset.base_tf();
    let (limit_low, limit_high) = limit_records(lcal, reset)?;
    let mut notes = Vec::new();

    let mut grid = *grid;
    let mut samples = sample_all(lcal, &c_r, &grid.omegas())?;
    if grid.auto_extend {
        let per_decade = grid.points_per_decade().ceil() as usize;
        let mut extra = 0;
        while !endpoint_matches(&samples[0], &limit_low) && extra < MAX_EXTRA_DECADES {
            let lo = grid.w_min / 10.0;
            let mut ws = log_space(lo, grid.w_min, per_decade + 1);
            ws.pop();
            let mut new = sample_all(lcal, &c_r, &ws)?;
            new.append(&mut samples);
            samples = new;
            grid.w_min = lo;
            grid.points += per_decade;
            extra += 1;
        }
        if !endpoint_matches(&samples[0], &limit_low) {
            notes.push(format!(
                "low-frequency endpoint {:.3e} rad/s is still more than {LIMIT_MATCH_DEG} deg from the ω→0 limit",
                grid.w_min
            ));
        }
        extra = 0;
        while !endpoint_matches(samples.last().unwrap(), &limit_high) && extra < MAX_EXTRA_DECADES {
            let hi = grid.w_max * 10.0;
            let ws = log_space(grid.w_max, hi, per_decade + 1);
            let mut new = sample_all(lcal, &c_r, &ws[1..])?;
            samples.append(&mut new);
            grid.w_max = hi;
            grid.points += per_decade;
            extra += 1;
        }
        if !endpoint_matches(samples.last().unwrap(), &limit_high) {
            notes.push(format!(
                "high-frequency endpoint {:.3e} rad/s is still more than {LIMIT_MATCH_DEG} deg from the ω→∞ limit",
                grid.w_max
            ));
        }
    }

    let chi_crossings = polish_crossings(&samples, lcal, &c_r, |s| s.chi, Component::Chi)?;
    let upsilon_crossings = polish_crossings(&samples, lcal, &c_r, |s| s.upsilon, Component::Upsilon)?;

    Ok(NsvCurve {
        samples,
        chi_crossings,
        upsilon_crossings,
        limit_low,
        limit_high,
        grid,
        notes,
        lcal: lcal.clone(),
        c_r,
    })
}

/// Convenience wrapper over [`sweep`] for a full system description.
pub fn sweep_system(system: &SystemDescription, grid: &FrequencyGrid) -> Result<NsvCurve, NsvError> {
    sweep(&system.open_loop_linear(), system.reset(), grid)
}

#[derive(Clone, Copy)]
enum Component {
    Chi,
    Upsilon,
}

fn polish_crossings(
    samples: &[NsvSample],
    lcal: &RationalTf,
    c_r: &RationalTf,
    value: impl Fn(&NsvSample) -> f64,
    which: Component,
) -> Result<Vec<Crossing>, NsvError> {
    let pick = |w: f64| -> Result<(f64, f64), NsvError> {
        let (chi, up, _) = eval_components(lcal, c_r, w)?;
        Ok(match which {
            Component::Chi => (chi, up),
            Component::Upsilon => (up, chi),
        })
    };
    let mut out = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let v = value(s);
        if v == 0.0 {
            let (_, other) = pick(s.omega)?;
            out.push(Crossing { omega: s.omega, other });
            continue;
        }
        let Some(next) = samples.get(i + 1) else { break };
        let vn = value(next);
        if v * vn >= 0.0 {
            continue;
        }
        let (mut a, mut b) = (s.omega, next.omega);
        let mut fa = v;
        for _ in 0..200 {
            if b / a - 1.0 <= 1e-12 {
                break;
            }
            let m = (a * b).sqrt();
            let (fm, _) = pick(m)?;
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        let w = (a * b).sqrt();
        let (_, other) = pick(w)?;
        out.push(Crossing { omega: w, other });
    }
    Ok(out)
}

/// `(θ₁, θ₂)`: extremal NSV angles over the samples, the polished crossings
/// and both limit directions.
pub fn extremal_angles(curve: &NsvCurve) -> Result<(f64, f64), NsvError> {
    if let Some(omega) = curve.zero_vector() {
        return Err(NsvError::ZeroVector { omega: Some(omega) });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in curve.analysis_points() {
        let t = p.theta.ok_or(NsvError::ZeroVector { omega: p.omega })?;
        lo = lo.min(t);
        hi = hi.max(t);
    }
    Ok((lo, hi))
}

/// Open angular sector of a point, `None` on an axis.
fn quadrant(theta: f64) -> Option<usize> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Some(1)
    } else if theta > FRAC_PI_2 && theta < PI {
        Some(2)
    } else if theta > PI && theta < 1.5 * PI {
        Some(3)
    } else if theta > -FRAC_PI_2 && theta < 0.0 {
        Some(4)
    } else {
        None
    }
}

/// Frequency interval `[lo, hi]` in rad/s.
pub type Interval = (f64, f64);

/// Set-level description of the NSV used by the type conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetReport {
    /// `ℳ`: zeros of `N_χ`, rad/s.
    pub m_set: Vec<f64>,
    /// `𝒬`: zeros of `N_Υ`, rad/s.
    pub q_set: Vec<f64>,
    pub i1: Vec<Interval>,
    pub i2: Vec<Interval>,
    pub i3: Vec<Interval>,
    pub i4: Vec<Interval>,
    pub theta1: f64,
    pub theta2: f64,
    /// `max |N_Υ/N_χ|` over `ℐ₄`.
    pub delta1: Option<f64>,
    /// `min |N_Υ/N_χ|` over `ℐ₂`.
    pub psi1: Option<f64>,
    /// `max |N_Υ/N_χ|` over `ℐ₃`.
    pub delta2: Option<f64>,
    /// `min |N_Υ/N_χ|` over `ℐ₁`.
    pub psi2: Option<f64>,
    pub upsilon_positive_on_m: bool,
    pub chi_positive_on_q: bool,
    pub chi_negative_on_q: bool,
    pub upsilon_nonnegative: bool,
    pub chi_nonnegative: bool,
    pub chi_nonpositive: bool,
    pub i3_empty: bool,
    pub i4_empty: bool,
    /// Strict inequalities that hold by less than [`STRICT_MARGIN`].
    pub marginal: Vec<String>,
}

/// Computes `ℳ`, `𝒬`, the sector intervals, the ratios and the sign facts.
///
/// Conditions quantified over an empty set hold vacuously. The ratio
/// extrema run over every classified point in the open sector; the ratio
/// only blows up where `N_χ → 0`, which is a sector boundary that none of
/// the four extrema approaches from the side that matters.
pub fn classify_sets(curve: &NsvCurve) -> Result<SetReport, NsvError> {
    let (theta1, theta2) = extremal_angles(curve)?;
    let points = curve.analysis_points();
    let mut marginal = Vec::new();

    let on_m: Vec<&AnalysisPoint> = points.iter().filter(|p| p.chi == 0.0).collect();
    let on_q: Vec<&AnalysisPoint> = points.iter().filter(|p| p.upsilon == 0.0).collect();
    let upsilon_positive_on_m = on_m.iter().all(|p| p.upsilon > 0.0);
    let chi_positive_on_q = on_q.iter().all(|p| p.chi > 0.0);
    let chi_negative_on_q = on_q.iter().all(|p| p.chi < 0.0);
    for p in &on_m {
        if p.upsilon.abs() <= STRICT_MARGIN {
            marginal.push(format!("N_Υ = {:.3e} on ℳ at ω = {:?}", p.upsilon, p.omega));
        }
    }
    for p in &on_q {
        if p.chi.abs() <= STRICT_MARGIN {
            marginal.push(format!("N_χ = {:.3e} on 𝒬 at ω = {:?}", p.chi, p.omega));
        }
    }

    let mut ratios: [Vec<f64>; 4] = Default::default();
    for p in &points {
        if let Some(q) = p.theta.and_then(quadrant) {
            ratios[q - 1].push((p.upsilon / p.chi).abs());
        }
    }
    let max = |v: &Vec<f64>| v.iter().copied().reduce(f64::max);
    let min = |v: &Vec<f64>| v.iter().copied().reduce(f64::min);

    let [i1, i2, i3, i4] = sector_intervals(&points);

    Ok(SetReport {
        m_set: curve.chi_crossings.iter().map(|c| c.omega).collect(),
        q_set: curve.upsilon_crossings.iter().map(|c| c.omega).collect(),
        theta1,
        theta2,
        delta1: max(&ratios[3]),
        psi1: min(&ratios[1]),
        delta2: max(&ratios[2]),
        psi2: min(&ratios[0]),
        upsilon_positive_on_m,
        chi_positive_on_q,
        chi_negative_on_q,
        upsilon_nonnegative: points.iter().all(|p| p.upsilon >= 0.0),
        chi_nonnegative: points.iter().all(|p| p.chi >= 0.0),
        chi_nonpositive: points.iter().all(|p| p.chi <= 0.0),
        i3_empty: ratios[2].is_empty(),
        i4_empty: ratios[3].is_empty(),
        i1,
        i2,
        i3,
        i4,
        marginal,
    })
}

/// Groups consecutive finite-frequency points of the same open sector into
/// intervals bounded by the neighbouring axis crossings.
fn sector_intervals(points: &[AnalysisPoint]) -> [Vec<Interval>; 4] {
    let mut out: [Vec<Interval>; 4] = Default::default();
    let finite: Vec<&AnalysisPoint> = points.iter().filter(|p| p.omega.is_some()).collect();
    let mut i = 0;
    while i < finite.len() {
        let Some(q) = finite[i].theta.and_then(quadrant) else {
            i += 1;
            continue;
        };
        let start = if i > 0 { finite[i - 1].omega } else { finite[i].omega };
        let mut j = i;
        while j + 1 < finite.len() && finite[j + 1].theta.and_then(quadrant) == Some(q) {
            j += 1;
        }
        let end = finite.get(j + 1).unwrap_or(&finite[j]).omega;
        out[q - 1].push((start.unwrap(), end.unwrap()));
        i = j + 1;
    }
    out
}

/// Per-condition record for Type I.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeIEvidence {
    pub upsilon_positive_on_m: bool,
    pub chi_positive_on_q: bool,
    pub upsilon_nonnegative: bool,
    pub chi_nonnegative: bool,
    /// `ℐ₃ = ∅` and `δ₁ < Ψ₁`.
    pub ratio_condition: bool,
    /// Set-based verdict.
    pub definition: bool,
    /// `−π/2 < θ₁, θ₂ < π` and `θ₂ − θ₁ < π`.
    pub angle_test: bool,
    pub marginal: bool,
    pub holds: bool,
}

/// Per-condition record for Type II.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeIIEvidence {
    pub no_origin_pole: bool,
    pub upsilon_positive_on_m: bool,
    pub chi_negative_on_q: bool,
    pub upsilon_nonnegative: bool,
    pub chi_nonpositive: bool,
    /// `ℐ₄ = ∅` and `δ₂ < Ψ₂`.
    pub ratio_condition: bool,
    pub definition: bool,
    /// No origin pole, `0 < θ₁, θ₂ < 3π/2` and `θ₂ − θ₁ < π`.
    pub angle_test: bool,
    pub marginal: bool,
    pub holds: bool,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= STRICT_MARGIN
}

pub fn is_type_i(sets: &SetReport, curve: &NsvCurve) -> Result<TypeIEvidence, NsvError> {
    let delta1 = sets.delta1.unwrap_or(0.0);
    let psi1 = sets.psi1.unwrap_or(f64::INFINITY);
    let ratio_condition = sets.i3_empty && delta1 < psi1;
    let definition = sets.upsilon_positive_on_m
        && sets.chi_positive_on_q
        && (sets.upsilon_nonnegative || sets.chi_nonnegative || ratio_condition);

    let (t1, t2) = extremal_angles(curve)?;
    let inside = |t: f64| t > -FRAC_PI_2 && t < PI;
    let angle_test = inside(t1) && inside(t2) && t2 - t1 < PI;

    let marginal = !sets.marginal.is_empty()
        || near(t1, -FRAC_PI_2)
        || near(t2, PI)
        || near(t2 - t1, PI)
        || (sets.delta1.is_some() && sets.psi1.is_some() && (delta1 - psi1).abs() <= STRICT_MARGIN * psi1);

    if definition != angle_test && !marginal {
        return Err(NsvError::InternalInconsistency {
            which: "type I",
            definition,
            angle_test,
        });
    }
    Ok(TypeIEvidence {
        upsilon_positive_on_m: sets.upsilon_positive_on_m,
        chi_positive_on_q: sets.chi_positive_on_q,
        upsilon_nonnegative: sets.upsilon_nonnegative,
        chi_nonnegative: sets.chi_nonnegative,
        ratio_condition,
        definition,
        angle_test,
        marginal,
        holds: definition && angle_test,
    })
}

pub fn is_type_ii(sets: &SetReport, curve: &NsvCurve, lcal: &RationalTf) -> Result<TypeIIEvidence, NsvError> {
    let no_origin_pole = lcal.origin_pole_order()? == 0;
    let delta2 = sets.delta2.unwrap_or(0.0);
    let psi2 = sets.psi2.unwrap_or(f64::INFINITY);
    let ratio_condition = sets.i4_empty && delta2 < psi2;
    let definition = no_origin_pole
        && sets.upsilon_positive_on_m
        && sets.chi_negative_on_q
        && (sets.upsilon_nonnegative || sets.chi_nonpositive || ratio_condition);

    let (t1, t2) = extremal_angles(curve)?;
    let inside = |t: f64| t > 0.0 && t < 1.5 * PI;
    let angle_test = no_origin_pole && inside(t1) && inside(t2) && t2 - t1 < PI;

    let marginal = !sets.marginal.is_empty()
        || near(t1, 0.0)
        || near(t2, 1.5 * PI)
        || near(t2 - t1, PI)
        || (sets.delta2.is_some() && sets.psi2.is_some() && (delta2 - psi2).abs() <= STRICT_MARGIN * psi2);

    if definition != angle_test && !marginal {
        return Err(NsvError::InternalInconsistency {
            which: "type II",
            definition,
            angle_test,
        });
    }
    Ok(TypeIIEvidence {
        no_origin_pole,
        upsilon_positive_on_m: sets.upsilon_positive_on_m,
        chi_negative_on_q: sets.chi_negative_on_q,
        upsilon_nonnegative: sets.upsilon_nonnegative,
        chi_nonpositive: sets.chi_nonpositive,
        ratio_condition,
        definition,
        angle_test,
        marginal,
        holds: definition && angle_test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    UbibsStable,
    NotQuadraticallyStable,
    HypothesisFailed,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::UbibsStable => "UBIBS_STABLE",
            Verdict::NotQuadraticallyStable => "NOT_QUADRATICALLY_STABLE",
            Verdict::HypothesisFailed => "HYPOTHESIS_FAILED",
        })
    }
}

/// Hypotheses on the linear part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypotheses {
    pub base_linear_stable: bool,
    pub pole_zero_cancellation: bool,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.base_linear_stable && !self.pole_zero_cancellation
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub label: String,
    pub hypotheses: Hypotheses,
    /// Order of the origin pole of `𝓛 = C_L·G`.
    pub lcal_origin_pole_order: usize,
    pub sets: Option<SetReport>,
    pub type_i: Option<TypeIEvidence>,
    pub type_ii: Option<TypeIIEvidence>,
    pub limits: Option<[LimitRecord; 2]>,
    pub grid: FrequencyGrid,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl ClassificationReport {
    pub fn type_i(&self) -> bool {
        self.type_i.as_ref().is_some_and(|t| t.holds)
    }

    pub fn type_ii(&self) -> bool {
        self.type_ii.as_ref().is_some_and(|t| t.holds)
    }
}

/// Report plus the curve it was computed from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: ClassificationReport,
    pub curve: Option<NsvCurve>,
}

/// Runs the full frequency-domain test on a reset control system.
pub fn analyze(system: &SystemDescription, grid: &FrequencyGrid) -> Result<Analysis, NsvError> {
    if system.reset().is_linear_equivalent() {
        return Err(NsvError::LinearEquivalentReset);
    }
    let lcal = system.open_loop_linear();
    let l = system.loop_tf();
    let hypotheses = Hypotheses {
        base_linear_stable: lti::base_linear_closed_loop_stable(&l)?,
        pole_zero_cancellation: l.has_pole_zero_cancellation(lti::ROOT_TOL)?,
    };
    let lcal_origin_pole_order = lcal.origin_pole_order()?;
    let mut notes = Vec::new();

    if !hypotheses.hold() {
        if !hypotheses.base_linear_stable {
            notes.push("base linear closed loop is not stable".to_string());
        }
        if hypotheses.pole_zero_cancellation {
            notes.push("open loop L has a pole-zero cancellation".to_string());
        }
        return Ok(Analysis {
            report: ClassificationReport {
                label: system.label.clone(),
                hypotheses,
                lcal_origin_pole_order,
                sets: None,
                type_i: None,
                type_ii: None,
                limits: None,
                grid: *grid,
                verdict: Verdict::HypothesisFailed,
                notes,
            },
            curve: None,
        });
    }

    let curve = sweep(&lcal, system.reset(), grid)?;
    let sets = classify_sets(&curve)?;
    let type_i = is_type_i(&sets, &curve)?;
    let type_ii = is_type_ii(&sets, &curve, &lcal)?;
    notes.extend(curve.notes.iter().cloned());

    let certified = (type_i.holds && !type_i.marginal) || (type_ii.holds && !type_ii.marginal);
    let verdict = if certified {
        Verdict::UbibsStable
    } else {
        if type_i.holds || type_ii.holds {
            notes.push("marginal: type conditions hold only within the strictness margin".to_string());
        }
        Verdict::NotQuadraticallyStable
    };
    notes.extend(sets.marginal.iter().cloned());

    Ok(Analysis {
        report: ClassificationReport {
            label: system.label.clone(),
            hypotheses,
            lcal_origin_pole_order,
            limits: Some([curve.limit_low.clone(), curve.limit_high.clone()]),
            grid: curve.grid,
            sets: Some(sets),
            type_i: Some(type_i),
            type_ii: Some(type_ii),
            verdict,
            notes,
        },
        curve: Some(curve),
    })
}

/// The stability verdict alone.
pub fn theorem1_verdict(system: &SystemDescription, grid: &FrequencyGrid) -> Result<ClassificationReport, NsvError> {
    analyze(system, grid).map(|a| a.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::DemoSystem;
    use crate::reset::ResetElement;
    use proptest::prelude::*;

    fn tf(num: &[f64], den: &[f64]) -> RationalTf {
        RationalTf::new(num.to_vec(), den.to_vec()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn nsv_components() {
        assert_eq!(nsv_at(c(1.0, 0.0), c(1.0, 0.0)), (2.0, 2.0));
        let (chi, up) = nsv_at(c(0.0, 0.0), c(0.3, -0.7));
        assert_eq!(chi, 0.0);
        assert!((up - 0.3).abs() < 1e-15);
        // top of the circle, where N_Υ also vanishes for this C_R
        let (chi, up) = nsv_at(c(-0.5, 0.5), c(0.5, -0.5));
        assert!(chi.abs() < 1e-15 && up.abs() < 1e-15);
        assert!(matches!(wrap_angle(chi, up), Err(NsvError::ZeroVector { .. })));
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(1.0, 0.0).unwrap(), 0.0);
        assert!((wrap_angle(-1.0, -1.0).unwrap() - 1.25 * PI).abs() < 1e-15);
        assert_eq!(wrap_angle(0.0, -1.0).unwrap(), -FRAC_PI_2);
        assert!((wrap_angle(-1.0, 0.0).unwrap() - PI).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wrap_stays_in_range(x in -1e6f64..1e6, y in -1e6f64..1e6) {
            prop_assume!(x != 0.0 || y != 0.0);
            let t = wrap_angle(x, y).unwrap();
            prop_assert!((-FRAC_PI_2..1.5 * PI).contains(&t));
            prop_assert!((t.cos() * x.hypot(y) - x).abs() <= 1e-9 * x.hypot(y));
            prop_assert!((t.sin() * x.hypot(y) - y).abs() <= 1e-9 * x.hypot(y));
        }

        #[test]
        fn chi_sign_is_circle_membership(re in -3.0f64..2.0, im in -2.0f64..2.0) {
            let l = c(re, im);
            let dist = (l + 0.5).norm() - 0.5;
            prop_assume!(dist.abs() > 1e-12);
            let (chi, _) = nsv_at(l, c(1.0, 0.0));
            prop_assert_eq!(chi > 0.0, dist > 0.0);
        }
    }

    #[test]
    fn constant_loop_gain() {
        // L ≡ 0.5 with C_R a GFORE: take 𝓛 = 0.5·(s+1), so 𝓛·C_R = 0.5
        let lcal = tf(&[0.5, 0.5], &[1.0]);
        let reset = ResetElement::gfore(1.0, 0.0).unwrap();
        let c_r = reset.base_tf();
        for w in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            let (chi, up, _) = eval_components(&lcal, &c_r, w).unwrap();
            assert!((chi - 0.75).abs() < 1e-12);
            assert!(up > 0.0);
        }
    }

    fn demo_curve(demo: DemoSystem) -> NsvCurve {
        sweep_system(&demo.system(), &FrequencyGrid::default()).unwrap()
    }

    #[test]
    fn demo_c1_crossings_bracket_reference() {
        let curve = sweep_system(
            &DemoSystem::C1.system(),
            &FrequencyGrid::new(1.0, 1e5, 2000).unwrap().fixed(),
        )
        .unwrap();
        let m: Vec<f64> = curve.chi_crossings.iter().map(|c| c.omega).collect();
        assert_eq!(m.len(), 2);
        assert!((m[0] - 279.2).abs() < 0.5, "{m:?}");
        assert!((m[1] - 6945.0).abs() < 5.0, "{m:?}");
    }

    #[test]
    fn demo_limits() {
        let curve = demo_curve(DemoSystem::C1);
        assert_eq!(curve.limit_low.form, LimitForm::ChiDominated);
        assert_eq!(curve.limit_low.origin_pole_order, 1);
        assert_eq!(curve.limit_high.form, LimitForm::UpsilonDominated);
        // θ decreases monotonically towards 0⁺ as ω → 0
        let thetas: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&w| {
                let (x, y) = curve.eval_at(w).unwrap();
                wrap_angle(x, y).unwrap()
            })
            .collect();
        assert!(thetas[0] > thetas[1] && thetas[1] > thetas[2] && thetas[2] > 0.0, "{thetas:?}");
        assert!(thetas[2] < 1e-3);
        assert!(curve.notes.is_empty(), "{:?}", curve.notes);
    }

    #[test]
    fn pci_simple_pole_limit_matches_small_frequency_samples() {
        for l0 in [2.0, -0.7, 0.3] {
            let lcal = tf(&[l0], &[1.0, 0.5, 0.1]);
            let reset = ResetElement::pci(3.0, 0.0).unwrap();
            let (low, _) = limit_records(&lcal, &reset).unwrap();
            assert_eq!(low.form, LimitForm::Vector);
            let c_r = reset.base_tf();
            let (x, y, _) = eval_components(&lcal, &c_r, 1e-7).unwrap();
            let numeric = wrap_angle(x, y).unwrap();
            assert!(angle_gap(numeric, low.direction) < 1e-5, "{l0}: {numeric} vs {}", low.direction);
        }
    }

    #[test]
    fn gfore_relative_degree_two_limit() {
        let lcal = tf(&[3.0], &[2.0, 1.0]);
        let reset = ResetElement::gfore(4.0, 0.0).unwrap();
        let (_, high) = limit_records(&lcal, &reset).unwrap();
        assert_eq!(high.form, LimitForm::Vector);
        // L = 12/((s+2)(s+4)) → a∞ = −12
        assert!((high.a_infinity.unwrap() + 12.0).abs() < 1e-12);
        let c_r = reset.base_tf();
        let (x, y, _) = eval_components(&lcal, &c_r, 1e7).unwrap();
        assert!(angle_gap(wrap_angle(x, y).unwrap(), high.direction) < 1e-5);
    }

    #[test]
    fn extremal_angle_bounds_contain_every_sample() {
        for demo in DemoSystem::ALL {
            let curve = demo_curve(demo);
            let (t1, t2) = extremal_angles(&curve).unwrap();
            assert!(curve.samples.iter().all(|s| {
                let t = s.theta.unwrap();
                t >= t1 && t <= t2
            }));
        }
    }

    #[test]
    fn first_quadrant_curve_is_vacuous() {
        // PCI below the plant corner keeps the phase of L above −90°
        let sys = SystemDescription::new(
            "q1",
            tf(&[2.0], &[1.0, 1.0]),
            RationalTf::constant(1.0),
            ResetElement::pci(0.5, 0.0).unwrap(),
        )
        .unwrap();
        let curve = sweep_system(&sys, &FrequencyGrid::default()).unwrap();
        let sets = classify_sets(&curve).unwrap();
        assert!(sets.m_set.is_empty() && sets.q_set.is_empty());
        assert!(sets.delta1.is_none() && sets.psi1.is_none() && sets.delta2.is_none());
        assert!(sets.upsilon_positive_on_m && sets.chi_positive_on_q);
        assert!(sets.upsilon_nonnegative && sets.chi_nonnegative);
        let ti = is_type_i(&sets, &curve).unwrap();
        assert!(ti.holds && ti.upsilon_nonnegative);
    }

    #[test]
    fn demo_systems_are_type_i_not_type_ii() {
        for demo in DemoSystem::ALL {
            let sys = demo.system();
            let curve = sweep_system(&sys, &FrequencyGrid::default()).unwrap();
            let sets = classify_sets(&curve).unwrap();
            let t1 = is_type_i(&sets, &curve).unwrap();
            assert!(t1.holds && t1.ratio_condition && sets.i3_empty, "{demo}");
            let t2 = is_type_ii(&sets, &curve, &sys.open_loop_linear()).unwrap();
            assert!(!t2.holds && !t2.no_origin_pole, "{demo}");
        }
    }

    #[test]
    fn type_ii_paths_agree_on_double_lag() {
        let sys = SystemDescription::new(
            "double lag",
            tf(&[1.0], &[1.0, 2.0, 1.0]),
            RationalTf::constant(1.0),
            ResetElement::gfore(1.0, 0.0).unwrap(),
        )
        .unwrap();
        let curve = sweep_system(&sys, &FrequencyGrid::default()).unwrap();
        let sets = classify_sets(&curve).unwrap();
        let t2 = is_type_ii(&sets, &curve, &sys.open_loop_linear()).unwrap();
        assert_eq!(t2.definition, t2.angle_test);
        assert!(t2.no_origin_pole);
    }

    #[test]
    fn unstable_base_loop_fails_hypothesis() {
        let sys = SystemDescription::new(
            "unstable",
            tf(&[0.5], &[-1.0, 1.0]),
            RationalTf::constant(1.0),
            ResetElement::gfore(1.0, 0.0).unwrap(),
        )
        .unwrap();
        let report = theorem1_verdict(&sys, &FrequencyGrid::default()).unwrap();
        assert_eq!(report.verdict, Verdict::HypothesisFailed);
        assert!(!report.hypotheses.base_linear_stable);
    }

    #[test]
    fn span_beyond_pi_is_not_quadratically_stable() {
        // (1 + 8s)/(s(s+0.5)(s+1)(s+3)) with a slow GFORE: base loop stable,
        // θ₂ ≈ 184° (numpy reference), origin pole rules out Type II
        let den = crate::poly::mul(
            &crate::poly::mul(&[0.0, 1.0], &[0.5, 1.0]),
            &crate::poly::mul(&[1.0, 1.0], &[3.0, 1.0]),
        );
        let sys = SystemDescription::new(
            "lagged",
            tf(&[1.0, 8.0], &den),
            RationalTf::constant(1.0),
            ResetElement::gfore(0.3, 0.0).unwrap(),
        )
        .unwrap();
        let report = theorem1_verdict(&sys, &FrequencyGrid::default()).unwrap();
        assert!(report.hypotheses.hold());
        assert_eq!(report.verdict, Verdict::NotQuadraticallyStable);
        let sets = report.sets.unwrap();
        assert!((sets.theta2.to_degrees() - 183.92).abs() < 0.05, "{}", sets.theta2.to_degrees());
        assert!(!sets.i3_empty);
    }

    #[test]
    fn linear_equivalent_reset_is_rejected() {
        let sys = DemoSystem::C1.system();
        let sys = sys.clone().with_reset(sys.reset().with_gamma(1.0).unwrap());
        assert!(matches!(
            theorem1_verdict(&sys, &FrequencyGrid::default()),
            Err(NsvError::LinearEquivalentReset)
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(0.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(10.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(1e-3, 1e6, 10).is_err());
        let g = FrequencyGrid::new(1.0, 100.0, 5).unwrap();
        let w = g.omegas();
        assert_eq!(w.len(), 5);
        assert!(w.windows(2).all(|p| p[1] > p[0]));
        assert_eq!((w[0], w[4]), (1.0, 100.0));
    }
}
