use serde::{Deserialize, Serialize};

/// Exogenous input `r(t)` or `d(t)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Signal {
    #[default]
    Zero,
    Step { amplitude: f64, t0: f64 },
    Ramp { slope: f64, t0: f64 },
    /// `amplitude·sin(2π·freq_hz·t)`.
    Sine { amplitude: f64, freq_hz: f64 },
    /// Value `values[k]` on `[times[k], times[k+1])`, zero before `times[0]`.
    PiecewiseConstant { times: Vec<f64>, values: Vec<f64> },
}

impl Signal {
    pub fn unit_step() -> Self {
        Signal::Step {
            amplitude: 1.0,
            t0: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Zero => 0.0,
            Signal::Step { amplitude, t0 } => {
                if t >= *t0 {
                    *amplitude
                } else {
                    0.0
                }
            }
            Signal::Ramp { slope, t0 } => slope * (t - t0).max(0.0),
            Signal::Sine { amplitude, freq_hz } => amplitude * (2.0 * std::f64::consts::PI * freq_hz * t).sin(),
            Signal::PiecewiseConstant { times, values } => match times.iter().rposition(|&tk| tk <= t) {
                Some(k) => values[k],
                None => 0.0,
            },
        }
    }

    /// Times in `(0, horizon)` where the signal or its derivative jumps.
    pub fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        let raw = match self {
            Signal::Step { t0, .. } | Signal::Ramp { t0, .. } => vec![*t0],
            Signal::PiecewiseConstant { times, .. } => times.clone(),
            _ => Vec::new(),
        };
        raw.into_iter().filter(|&t| t > 0.0 && t < horizon).collect()
    }

    /// `sup |s(t)|` over `[0, horizon]`.
    pub fn sup_norm(&self, horizon: f64) -> f64 {
        match self {
            Signal::Zero => 0.0,
            Signal::Step { amplitude, t0 } => {
                if *t0 <= horizon {
                    amplitude.abs()
                } else {
                    0.0
                }
            }
            Signal::Ramp { slope, t0 } => (slope * (horizon - t0).max(0.0)).abs(),
            Signal::Sine { amplitude, .. } => amplitude.abs(),
            Signal::PiecewiseConstant { times, values } => times
                .iter()
                .zip(values)
                .filter(|(t, _)| **t <= horizon)
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Signal::Zero => Ok(()),
            Signal::Step { amplitude, t0 } if finite(&[*amplitude, *t0]) => Ok(()),
            Signal::Ramp { slope, t0 } if finite(&[*slope, *t0]) => Ok(()),
            Signal::Sine { amplitude, freq_hz } if finite(&[*amplitude, *freq_hz]) => Ok(()),
            Signal::PiecewiseConstant { times, values } => {
                if times.len() != values.len() {
                    Err("piecewise-constant signal needs one value per time".into())
                } else if !finite(times) || !finite(values) || times.windows(2).any(|w| w[1] <= w[0]) {
                    Err("piecewise-constant times must be finite and increasing".into())
                } else {
                    Ok(())
                }
            }
            _ => Err("signal parameters must be finite".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let s = Signal::Step { amplitude: 2.0, t0: 0.5 };
        assert_eq!((s.value(0.4), s.value(0.5)), (0.0, 2.0));
        assert_eq!(Signal::Ramp { slope: 3.0, t0: 1.0 }.value(2.0), 3.0);
        let p = Signal::PiecewiseConstant {
            times: vec![0.0, 1.0],
            values: vec![1.0, -1.0],
        };
        assert_eq!((p.value(-1.0), p.value(0.5), p.value(3.0)), (0.0, 1.0, -1.0));
        assert_eq!(p.sup_norm(0.5), 1.0);
        assert!(Signal::Sine { amplitude: 1.0, freq_hz: 1.0 }.value(0.25) > 0.999);
    }

    #[test]
    fn breakpoints_inside_horizon() {
        assert!(Signal::unit_step().breakpoints(1.0).is_empty());
        assert_eq!(Signal::Step { amplitude: 1.0, t0: 0.3 }.breakpoints(1.0), vec![0.3]);
    }

    #[test]
    fn json_tagging() {
        let s: Signal = serde_json::from_str(r#"{"kind":"sine","amplitude":1.0,"freq_hz":5.0}"#).unwrap();
        assert_eq!(s, Signal::Sine { amplitude: 1.0, freq_hz: 5.0 });
        let bad = Signal::PiecewiseConstant {
            times: vec![1.0, 0.0],
            values: vec![0.0, 0.0],
        };
        assert!(bad.validate().is_err());
    }
}
