//! Built-in benchmark: a flexure-guided precision positioning stage under a
//! CgLp + PID controller, in five tunings C1..C5.
//!
//! The controller is
//!
//! ```text
//! C(s) = Kp · GFORE(d) · (s/ωc + 1)/(s/(10ωc) + 1)
//!           · (1 + ωc/(10s)) · (g·s/ωc + 1)/(s/(g·ωc) + 1) · 1/(s/(10ωc) + 1)
//! ```
//!
//! with `ωc = 200π` rad/s and the GFORE corner at `ωc/d`. Everything except
//! the GFORE is lumped into the linear controller `C_L`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::lti::RationalTf;
use crate::poly;
use crate::reset::ResetElement;
use crate::system::SystemDescription;

/// Design crossover frequency, rad/s.
pub const OMEGA_C: f64 = 200.0 * std::f64::consts::PI;

/// Tuning parameters of one controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuning {
    pub kp: f64,
    pub gamma: f64,
    pub d: f64,
    pub g: f64,
}

/// Values this benchmark is published with, in rad/s where applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub m_set: (f64, f64),
    pub q_set: (f64, f64),
    pub delta1: f64,
    pub psi1: f64,
    pub ratio_min: f64,
    /// `None` where the published entry is unreadable ("8.7.94" for C2).
    pub ratio_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DemoSystem {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl DemoSystem {
    pub const ALL: [DemoSystem; 5] = [Self::C1, Self::C2, Self::C3, Self::C4, Self::C5];

    pub fn tuning(self) -> Tuning {
        let (kp, gamma, d, g) = match self {
            Self::C1 => (0.070, 0.0, 1.44, 1.98),
            Self::C2 => (0.163, 0.2, 1.23, 2.12),
            Self::C3 => (0.201, 0.4, 1.11, 2.27),
            Self::C4 => (0.197, 0.6, 1.04, 2.43),
            Self::C5 => (0.183, 0.8, 1.01, 2.63),
        };
        Tuning { kp, gamma, d, g }
    }

    pub fn reference(self) -> Reference {
        let (m_set, q_set, delta1, psi1, ratio_min, ratio_max) = match self {
            Self::C1 => ((279.2, 6945.0), (80.9, 256.3), 0.11, 0.44, 2.24, Some(8.77)),
            Self::C2 => ((495.7, 7090.7), (80.7, 370.2), 0.12, 0.45, 2.19, None),
            Self::C3 => ((630.0, 7225.6), (81.2, 398.9), 0.14, 0.47, 2.12, Some(6.85)),
            Self::C4 => ((686.8, 7354.4), (81.8, 388.1), 0.18, 0.61, 1.63, Some(5.36)),
            Self::C5 => ((718.3, 7488.7), (82.6, 368.0), 0.34, 1.42, 0.7, Some(2.91)),
        };
        Reference {
            m_set,
            q_set,
            delta1,
            psi1,
            ratio_min,
            ratio_max,
        }
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn system(self) -> SystemDescription {
        let t = self.tuning();
        let reset = ResetElement::gfore_from_ratio(t.d, OMEGA_C, t.gamma)
            .expect("tabulated tuning is valid");
        SystemDescription::new(self.to_string(), plant(), linear_controller(t.kp, t.g), reset)
            .expect("demo plant is strictly proper")
    }
}

impl fmt::Display for DemoSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownDemo(pub String);

impl fmt::Display for UnknownDemo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown demo system `{}` (expected C1..C5)", self.0)
    }
}

impl std::error::Error for UnknownDemo {}

impl FromStr for DemoSystem {
    type Err = UnknownDemo;
    fn from_str(s: &str) -> Result<Self, UnknownDemo> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" | "L1" | "1" => Ok(Self::C1),
            "C2" | "L2" | "2" => Ok(Self::C2),
            "C3" | "L3" | "3" => Ok(Self::C3),
            "C4" | "L4" | "4" => Ok(Self::C4),
            "C5" | "L5" | "5" => Ok(Self::C5),
            _ => Err(UnknownDemo(s.to_string())),
        }
    }
}

/// Stage plus amplifier: `1.429e8 / (175.9 s² + 7738 s + 1.361e6)`.
pub fn plant() -> RationalTf {
    RationalTf::new(vec![1.429e8], vec![1.361e6, 7738.0, 175.9]).expect("finite")
}

/// First-order factor `(s/a + 1)` in ascending order.
fn lag(a: f64) -> Vec<f64> {
    vec![1.0, 1.0 / a]
}

/// Everything in the controller except the GFORE.
pub fn linear_controller(kp: f64, g: f64) -> RationalTf {
    let wc = OMEGA_C;
    let num = [lag(wc), vec![wc / 10.0, 1.0], lag(wc / g)]
        .iter()
        .fold(vec![kp], |acc, f| poly::mul(&acc, f));
    let den = [lag(10.0 * wc), vec![0.0, 1.0], lag(g * wc), lag(10.0 * wc)]
        .iter()
        .fold(vec![1.0], |acc, f| poly::mul(&acc, f));
    RationalTf::new(num, den).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn factored_form_matches_product_of_sections() {
        let t = DemoSystem::C3.tuning();
        let cl = linear_controller(t.kp, t.g);
        for w in [1.0, 63.0, 700.0, 5e3, 1e5] {
            let s = Complex64::new(0.0, w);
            let wc = OMEGA_C;
            let expected = t.kp * (s / wc + 1.0) / (s / (10.0 * wc) + 1.0)
                * (1.0 + wc / (10.0 * s))
                * (t.g * s / wc + 1.0)
                / (s / (t.g * wc) + 1.0)
                / (s / (10.0 * wc) + 1.0);
            let got = cl.eval(w).unwrap();
            assert!((got - expected).norm() < 1e-12 * expected.norm());
        }
    }

    #[test]
    fn open_loop_structure() {
        for demo in DemoSystem::ALL {
            let sys = demo.system();
            let lcal = sys.open_loop_linear();
            assert_eq!(lcal.den_degree(), 6);
            assert_eq!(lcal.relative_degree(), 3);
            assert_eq!(sys.loop_tf().relative_degree(), 4);
            assert_eq!(sys.reset().gamma(), demo.tuning().gamma);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("c4".parse::<DemoSystem>().unwrap(), DemoSystem::C4);
        assert_eq!("L2".parse::<DemoSystem>().unwrap(), DemoSystem::C2);
        assert!("C6".parse::<DemoSystem>().is_err());
        assert_eq!(DemoSystem::C5.to_string(), "C5");
    }
}
