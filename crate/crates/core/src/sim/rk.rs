//! Dormand–Prince 5(4) with its fourth-order continuous extension, and a
//! classical RK4 fixed-step mode with cubic Hermite interpolation.

use nalgebra::DVector;

type Vector = DVector<f64>;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous interpolant over one accepted step.
#[derive(Debug, Clone)]
pub enum Segment {
    Dopri {
        t0: f64,
        h: f64,
        r: [Vector; 5],
    },
    Hermite {
        t0: f64,
        h: f64,
        x0: Vector,
        x1: Vector,
        f0: Vector,
        f1: Vector,
    },
}

impl Segment {
    pub fn t0(&self) -> f64 {
        match self {
            Segment::Dopri { t0, .. } | Segment::Hermite { t0, .. } => *t0,
        }
    }

    pub fn eval(&self, t: f64) -> Vector {
        match self {
            Segment::Dopri { t0, h, r } => {
                let th = (t - t0) / h;
                let th1 = 1.0 - th;
                &r[0] + (&r[1] + (&r[2] + (&r[3] + &r[4] * th1) * th) * th1) * th
            }
            Segment::Hermite { t0, h, x0, x1, f0, f1 } => {
                let s = (t - t0) / h;
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                x0 * h00 + f0 * (h10 * h) + x1 * h01 + f1 * (h11 * h)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Adaptive { rtol: f64, atol: f64, max_step: f64 },
    Fixed { dt: f64 },
}

pub struct StepOutcome {
    pub t: f64,
    pub x: Vector,
    pub segment: Segment,
    pub rejected: usize,
}

pub struct Integrator<F> {
    f: F,
    method: Method,
    h: f64,
    /// First-same-as-last derivative at the current point.
    k1: Option<Vector>,
}

impl<F: Fn(f64, &Vector) -> Vector> Integrator<F> {
    pub fn new(f: F, method: Method, h0: f64) -> Self {
        Self { f, method, h: h0, k1: None }
    }

    /// Forget the cached derivative after the state was changed externally.
    pub fn invalidate(&mut self) {
        self.k1 = None;
    }

    /// One accepted step from `(t, x)` not beyond `t_max`. `None` on step
    /// size collapse.
    pub fn step(&mut self, t: f64, x: &Vector, t_max: f64) -> Option<StepOutcome> {
        match self.method {
            Method::Fixed { dt } => Some(self.rk4(t, x, dt.min(t_max - t))),
            Method::Adaptive { rtol, atol, max_step } => self.dopri(t, x, t_max, rtol, atol, max_step),
        }
    }

    fn rk4(&mut self, t: f64, x: &Vector, h: f64) -> StepOutcome {
        let f = &self.f;
        let k1 = self.k1.take().unwrap_or_else(|| f(t, x));
        let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(x + &k3 * h));
        let x1 = x + (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        let f1 = f(t + h, &x1);
        self.k1 = Some(f1.clone());
        StepOutcome {
            t: t + h,
            x: x1.clone(),
            segment: Segment::Hermite {
                t0: t,
                h,
                x0: x.clone(),
                x1,
                f0: k1,
                f1,
            },
            rejected: 0,
        }
    }

    fn dopri(&mut self, t: f64, x: &Vector, t_max: f64, rtol: f64, atol: f64, max_step: f64) -> Option<StepOutcome> {
        let f = &self.f;
        let k1 = self.k1.take().unwrap_or_else(|| f(t, x));
        let mut rejected = 0;
        loop {
            let mut h = self.h.min(max_step);
            let last = t + h >= t_max;
            if last {
                h = t_max - t;
            }
            if h <= 1e-14 * t.abs().max(1e-3) {
                self.k1 = Some(k1);
                return None;
            }
            let k2 = f(t + C2 * h, &(x + &k1 * (h * A21)));
            let k3 = f(t + C3 * h, &(x + (&k1 * A31 + &k2 * A32) * h));
            let k4 = f(t + C4 * h, &(x + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
            let k5 = f(t + C5 * h, &(x + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
            let k6 = f(t + h, &(x + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
            let x1 = x + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
            let k7 = f(t + h, &x1);
            let err = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

            let n = x.len().max(1) as f64;
            let norm = (err
                .iter()
                .zip(x.iter().zip(x1.iter()))
                .map(|(e, (a, b))| {
                    let sc = atol + rtol * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / n)
                .sqrt();

            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            if norm <= 1.0 {
                let r2 = &x1 - x;
                let r3 = &k1 * h - &r2;
                let r4 = &r2 - &k7 * h - &r3;
                let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
                // keep the unclipped step for the next call when clipped to t_max
                if !last {
                    self.h = h * factor;
                }
                self.k1 = Some(k7);
                return Some(StepOutcome {
                    t: if last { t_max } else { t + h },
                    x: x1.clone(),
                    segment: Segment::Dopri {
                        t0: t,
                        h,
                        r: [x.clone(), r2, r3, r4, r5],
                    },
                    rejected,
                });
            }
            rejected += 1;
            self.h = h * factor.min(1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_accurate() {
        let f = |_t: f64, x: &Vector| -x;
        let method = Method::Adaptive {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1.0,
        };
        let mut it = Integrator::new(f, method, 1e-3);
        let (mut t, mut x) = (0.0, Vector::from_element(1, 1.0));
        while t < 2.0 {
            let out = it.step(t, &x, 2.0).unwrap();
            // dense output at the midpoint
            let mid = 0.5 * (out.segment.t0() + out.t);
            assert!((out.segment.eval(mid)[0] - (-mid).exp()).abs() < 1e-8);
            t = out.t;
            x = out.x;
        }
        assert!((x[0] - (-2.0f64).exp()).abs() < 1e-9);
        assert_eq!(t, 2.0);
    }

    #[test]
    fn rk4_oscillator() {
        let f = |_t: f64, x: &Vector| Vector::from_vec(vec![x[1], -x[0]]);
        let mut it = Integrator::new(f, Method::Fixed { dt: 1e-3 }, 1e-3);
        let (mut t, mut x) = (0.0, Vector::from_vec(vec![1.0, 0.0]));
        while t < 1.0 - 1e-12 {
            let out = it.step(t, &x, 1.0).unwrap();
            let mid = 0.5 * (out.segment.t0() + out.t);
            assert!((out.segment.eval(mid)[0] - mid.cos()).abs() < 1e-9);
            t = out.t;
            x = out.x;
        }
        assert!((x[0] - 1f64.cos()).abs() < 1e-11);
    }
}
