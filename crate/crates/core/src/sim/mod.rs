//! Hybrid simulation of the closed reset loop.
//!
//! With `x = [x_r, ζ]`, `ζ` the state of a realization `(A, B, C)` of `𝓛`:
//!
//! ```text
//! ẋ = Ā x + B̄ r + B̄_d d          while e ≠ 0
//! x⁺ = Ā_ρ x                     when e = r − C̄ x crosses zero
//!
//! Ā = | A_r      −B_r C      |   B̄ = | B_r    |   B̄_d = | 0   |   C̄ = [0  C]
//!     | B C_r    A − B D_r C |        | B D_r  |          | B_d |
//! ```
//!
//! and `Ā_ρ = diag(γ, I)`.

mod rk;
mod signal;

use std::io::Write;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;
use thiserror::Error;

use crate::lti::{LtiError, RationalTf};
use crate::reset::{ResetElement, ResetMatrices};
use crate::system::SystemDescription;

pub use rk::Method;
pub use signal::Signal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("step size collapsed at t = {t}")]
    StepSizeCollapse { t: f64 },
    #[error("more than {cap} resets by t = {t}: Zeno behaviour")]
    ZenoDetected { cap: usize, t: f64 },
    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),
    #[error("disturbance input has {got} entries, realization has order {expected}")]
    DisturbanceDimension { expected: usize, got: usize },
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// Closed-loop matrices of the reset system.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub b_d: DVector<f64>,
    pub c: RowDVector<f64>,
    pub gamma: f64,
    pub reset: ResetMatrices,
}

impl ClosedLoopSystem {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `Ā_ρ = diag(γ, 1, …, 1)`.
    pub fn a_rho(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.order(), self.order());
        m[(0, 0)] = self.gamma;
        m
    }

    pub fn jump(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut x = x.clone();
        x[0] *= self.gamma;
        x
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(&x.transpose())
    }

    /// Reset element output `u_r = C_r x_r + D_r e`.
    pub fn reset_output(&self, x: &DVector<f64>, e: f64) -> f64 {
        self.reset.c_r * x[0] + self.reset.d_r * e
    }

    pub fn derivative(&self, x: &DVector<f64>, r: f64, d: f64) -> DVector<f64> {
        &self.a * x + &self.b * r + &self.b_d * d
    }

    /// Equilibrium of the flow for constant `r`, `d`; `None` if `Ā` is singular.
    pub fn steady_state(&self, r: f64, d: f64) -> Option<DVector<f64>> {
        let rhs = -(&self.b * r + &self.b_d * d);
        self.a.clone().lu().solve(&rhs)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }
}

/// Assembles the closed loop from the reset element and `𝓛 = C_L·G`.
pub fn assemble_parts(
    elem: &ResetElement,
    lcal: &RationalTf,
    disturbance_input: Option<&[f64]>,
) -> Result<ClosedLoopSystem, SimError> {
    if !lcal.is_strictly_proper() {
        return Err(LtiError::ImproperTransferFunction {
            num: lcal.num_degree(),
            den: lcal.den_degree(),
        }
        .into());
    }
    let ss = lcal.realize()?;
    let np = ss.order();
    let m = elem.matrices();
    let n = np + 1;

    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = m.a_r;
    for j in 0..np {
        a[(0, j + 1)] = -m.b_r * ss.c[j];
    }
    for i in 0..np {
        a[(i + 1, 0)] = ss.b[i] * m.c_r;
        for j in 0..np {
            a[(i + 1, j + 1)] = ss.a[(i, j)] - ss.b[i] * m.d_r * ss.c[j];
        }
    }
    let mut b = DVector::zeros(n);
    b[0] = m.b_r;
    for i in 0..np {
        b[i + 1] = ss.b[i] * m.d_r;
    }
    let mut b_d = DVector::zeros(n);
    match disturbance_input {
        Some(bd) if bd.len() != np => {
            return Err(SimError::DisturbanceDimension {
                expected: np,
                got: bd.len(),
            })
        }
        Some(bd) => b_d.rows_mut(1, np).copy_from_slice(bd),
        None => b_d.rows_mut(1, np).copy_from(&ss.b),
    }
    let mut c = RowDVector::zeros(n);
    c.columns_mut(1, np).copy_from(&ss.c);

    Ok(ClosedLoopSystem {
        a,
        b,
        b_d,
        c,
        gamma: elem.gamma(),
        reset: m,
    })
}

pub fn assemble(system: &SystemDescription) -> Result<ClosedLoopSystem, SimError> {
    assemble_parts(system.reset(), &system.open_loop_linear(), system.disturbance_input())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    #[serde(skip)]
    pub method: Method,
    /// Output sampling interval; resets are recorded in addition.
    pub sample_dt: f64,
    /// `|e|` must leave this band before the next reset is armed;
    /// `None` means `1e−9·(1 + sup|r|)`.
    pub leave_band: Option<f64>,
    /// Minimum time after a reset before re-arming regardless of `|e|`.
    pub dwell: f64,
    pub max_jumps: usize,
    /// Disable resets altogether.
    pub linear: bool,
    #[serde(skip)]
    pub x0: Option<DVector<f64>>,
}

impl SimOptions {
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            method: Method::Adaptive {
                rtol: 1e-10,
                atol: 1e-12,
                max_step: horizon / 100.0,
            },
            sample_dt: horizon / 2000.0,
            leave_band: None,
            dwell: 1e-7,
            max_jumps: 1_000_000,
            linear: false,
            x0: None,
        }
    }

    pub fn fixed_step(mut self, dt: f64) -> Self {
        self.method = Method::Fixed { dt };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetEvent {
    pub t: f64,
    pub e: f64,
    pub x_r_before: f64,
    pub x_r_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMeta {
    pub gamma: f64,
    pub horizon: f64,
    pub leave_band: f64,
    pub dwell: f64,
    pub max_jumps: usize,
    pub linear: bool,
    pub method: String,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Resets armed by the dwell timer while `|e|` never left the band.
    pub in_band_rearms: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    pub u_r: Vec<f64>,
    pub x_r: Vec<f64>,
    /// Marks rows recorded at a reset instant (post-jump state).
    pub reset: Vec<bool>,
    pub resets: Vec<ResetEvent>,
    pub meta: SimMeta,
}

impl SimTrace {
    pub fn reset_instants(&self) -> Vec<f64> {
        self.resets.iter().map(|r| r.t).collect()
    }

    pub fn max_state_norm(&self) -> f64 {
        self.states
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `t,y,e,u_r,x_r,reset`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "y", "e", "u_r", "x_r", "reset"])?;
        for k in 0..self.times.len() {
            w.write_record([
                format!("{:.6e}", self.times[k]),
                format!("{:.6e}", self.y[k]),
                format!("{:.6e}", self.e[k]),
                format!("{:.6e}", self.u_r[k]),
                format!("{:.6e}", self.x_r[k]),
                (self.reset[k] as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn push(&mut self, sys: &ClosedLoopSystem, t: f64, x: &DVector<f64>, r: f64, reset: bool) {
        if let Some(&last) = self.times.last() {
            if t <= last {
                // a reset that lands on a sample time replaces that row
                if reset && t == last {
                    self.pop();
                } else {
                    return;
                }
            }
        }
        let y = sys.output(x);
        let e = r - y;
        self.times.push(t);
        self.states.push(x.iter().copied().collect());
        self.y.push(y);
        self.e.push(e);
        self.u_r.push(sys.reset_output(x, e));
        self.x_r.push(x[0]);
        self.reset.push(reset);
    }

    fn pop(&mut self) {
        self.times.pop();
        self.states.pop();
        self.y.pop();
        self.e.pop();
        self.u_r.pop();
        self.x_r.pop();
        self.reset.pop();
    }
}

/// Reset trigger with the leave-band / dwell guard.
struct Trigger {
    band: f64,
    dwell: f64,
    /// Sign of `e` at the last armed check, `None` while disarmed.
    reference: Option<f64>,
    last_reset: f64,
    left_band: bool,
}

impl Trigger {
    /// Feeds `e(t)`; true when an armed trigger sees a sign change.
    fn crossed(&self, e: f64) -> bool {
        self.reference.is_some_and(|s| e * s <= 0.0)
    }

    fn observe(&mut self, t: f64, e: f64) {
        if e.abs() > self.band {
            self.left_band = true;
        }
        if self.reference.is_none() && e != 0.0 && (self.left_band || t - self.last_reset >= self.dwell) {
            self.reference = Some(e.signum());
        }
    }

    fn fire(&mut self, t: f64) {
        self.reference = None;
        self.last_reset = t;
        self.left_band = false;
    }
}

/// Simulates the hybrid loop over `[0, horizon]`.
pub fn simulate(
    sys: &ClosedLoopSystem,
    r: &Signal,
    d: &Signal,
    horizon: f64,
    opts: &SimOptions,
) -> Result<SimTrace, SimError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SimError::InvalidOptions("horizon must be positive".into()));
    }
    if !(opts.sample_dt > 0.0) {
        return Err(SimError::InvalidOptions("sample interval must be positive".into()));
    }
    r.validate().map_err(SimError::InvalidOptions)?;
    d.validate().map_err(SimError::InvalidOptions)?;
    let n = sys.order();
    let mut x = match &opts.x0 {
        Some(x0) if x0.len() != n => {
            return Err(SimError::InvalidOptions(format!("x0 needs {n} entries")));
        }
        Some(x0) => x0.clone(),
        None => DVector::zeros(n),
    };
    let band = opts.leave_band.unwrap_or(1e-9 * (1.0 + r.sup_norm(horizon)));
    let method_name = match opts.method {
        Method::Adaptive { rtol, atol, .. } => format!("dopri5 rtol={rtol:e} atol={atol:e}"),
        Method::Fixed { dt } => format!("rk4 dt={dt:e}"),
    };

    let mut stops: Vec<f64> = r.breakpoints(horizon);
    stops.extend(d.breakpoints(horizon));
    stops.push(horizon);
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();

    let f = |t: f64, x: &DVector<f64>| sys.derivative(x, r.value(t), d.value(t));
    let h0 = match opts.method {
        Method::Fixed { dt } => dt,
        Method::Adaptive { .. } => horizon * 1e-6,
    };
    let mut integrator = rk::Integrator::new(f, opts.method, h0);

    let mut trace = SimTrace {
        times: Vec::new(),
        states: Vec::new(),
        y: Vec::new(),
        e: Vec::new(),
        u_r: Vec::new(),
        x_r: Vec::new(),
        reset: Vec::new(),
        resets: Vec::new(),
        meta: SimMeta {
            gamma: sys.gamma,
            horizon,
            leave_band: band,
            dwell: opts.dwell,
            max_jumps: opts.max_jumps,
            linear: opts.linear,
            method: method_name,
            steps_accepted: 0,
            steps_rejected: 0,
            in_band_rearms: 0,
        },
    };
    let error = |t: f64, x: &DVector<f64>| r.value(t) - sys.output(x);

    let mut trigger = Trigger {
        band,
        dwell: opts.dwell,
        reference: None,
        last_reset: f64::NEG_INFINITY,
        left_band: true,
    };
    let mut t = 0.0;
    trigger.observe(t, error(t, &x));
    trace.push(sys, t, &x, r.value(t), false);
    let mut next_sample = 1usize;
    let sample_time = |k: usize| (k as f64 * opts.sample_dt).min(horizon);

    const SUBSAMPLES: usize = 8;
    let mut stop_idx = 0;
    while t < horizon {
        while stops[stop_idx] <= t {
            stop_idx += 1;
        }
        let t_stop = stops[stop_idx];
        let out = integrator
            .step(t, &x, t_stop)
            .ok_or(SimError::StepSizeCollapse { t })?;
        trace.meta.steps_accepted += 1;
        trace.meta.steps_rejected += out.rejected;
        let seg = &out.segment;

        // scan the step for an armed sign change of e
        let mut event = None;
        if !opts.linear {
            let (a, b) = (seg.t0(), out.t);
            let mut t_prev = a;
            for k in 1..=SUBSAMPLES {
                let tk = a + (b - a) * k as f64 / SUBSAMPLES as f64;
                let xk = if k == SUBSAMPLES { out.x.clone() } else { seg.eval(tk) };
                let ek = error(tk, &xk);
                if trigger.crossed(ek) {
                    event = Some(locate(seg, &error, &trigger, t_prev, tk, &out.x, out.t));
                    break;
                }
                trigger.observe(tk, ek);
                t_prev = tk;
            }
        }

        let t_end = event.as_ref().map_or(out.t, |(te, _)| *te);
        while next_sample < usize::MAX && sample_time(next_sample) <= t_end {
            let ts = sample_time(next_sample);
            let xs = if ts == out.t { out.x.clone() } else { seg.eval(ts) };
            trace.push(sys, ts, &xs, r.value(ts), false);
            if ts >= horizon {
                next_sample = usize::MAX;
                break;
            }
            next_sample += 1;
        }

        match event {
            Some((te, xe)) => {
                if trace.resets.len() >= opts.max_jumps {
                    return Err(SimError::ZenoDetected {
                        cap: opts.max_jumps,
                        t: te,
                    });
                }
                if !trigger.left_band {
                    trace.meta.in_band_rearms += 1;
                }
                let ee = error(te, &xe);
                let xj = sys.jump(&xe);
                trace.resets.push(ResetEvent {
                    t: te,
                    e: ee,
                    x_r_before: xe[0],
                    x_r_after: xj[0],
                });
                trace.push(sys, te, &xj, r.value(te), true);
                trigger.fire(te);
                integrator.invalidate();
                t = te;
                x = xj;
            }
            None => {
                t = out.t;
                x = out.x;
            }
        }
        if t_stop < horizon && t >= t_stop {
            // input discontinuity: derivative changes
            integrator.invalidate();
        }
    }
    if trace.times.last() != Some(&horizon) {
        trace.push(sys, horizon, &x, r.value(horizon), false);
    }
    Ok(trace)
}

/// Bisects the zero of `e` on `[lo, hi]` using the dense output.
fn locate(
    seg: &rk::Segment,
    error: &impl Fn(f64, &DVector<f64>) -> f64,
    trigger: &Trigger,
    mut lo: f64,
    mut hi: f64,
    x_end: &DVector<f64>,
    t_end: f64,
) -> (f64, DVector<f64>) {
    let at = |t: f64| if t == t_end { x_end.clone() } else { seg.eval(t) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if trigger.crossed(error(mid, &at(mid))) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // pick whichever end has the smaller |e|
    let (xl, xh) = (at(lo), at(hi));
    if error(lo, &xl).abs() < error(hi, &xh).abs() {
        (lo, xl)
    } else {
        (hi, xh)
    }
}

/// Unit step in `r`, no disturbance.
pub fn step_response(sys: &ClosedLoopSystem, horizon: f64) -> Result<SimTrace, SimError> {
    simulate(sys, &Signal::unit_step(), &Signal::Zero, horizon, &SimOptions::for_horizon(horizon))
}

/// True when the state norm never exceeds `bound`.
pub fn boundedness_check(trace: &SimTrace, bound: f64) -> bool {
    trace.max_state_norm() <= bound
}
