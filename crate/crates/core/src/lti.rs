//! Real-coefficient rational transfer functions and their state-space
//! realizations.
//!
//! Coefficients are stored in **ascending** powers of `s`: `num[k]` multiplies
//! `s^k`. The same order is used by the JSON schema, so `{"num": [1], "den":
//! [1, 1]}` is `1/(s+1)`.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly;

/// Default relative tolerance for "root at the origin" and "matching roots".
pub const ROOT_TOL: f64 = 1e-7;

/// Relative floor below which `|den(jω)|` counts as a pole on the axis.
const POLE_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("denominator polynomial is identically zero")]
    ZeroDenominator,
    #[error("coefficient list `{0}` is empty or contains a non-finite value")]
    InvalidCoefficients(&'static str),
    #[error("transfer function has a pole at s = j{omega}")]
    PoleAtFrequency { omega: f64 },
    #[error("companion-matrix root finding did not converge")]
    RootFindingDiverged,
    #[error("numerator and denominator both vanish at s = 0")]
    AmbiguousOriginPole,
    #[error("transfer function is improper (deg num {num} > deg den {den})")]
    ImproperTransferFunction { num: usize, den: usize },
    #[error("feedback loop is ill-posed: 1 + L(s) has no finite characteristic polynomial of full degree")]
    IllPosedFeedback,
}

#[derive(Deserialize)]
struct RawTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawTf> for RationalTf {
    type Error = LtiError;
    fn try_from(raw: RawTf) -> Result<Self, LtiError> {
        RationalTf::new(raw.num, raw.den)
    }
}

/// `num(s) / den(s)` with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTf")]
pub struct RationalTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LtiError> {
        if num.is_empty() || num.iter().any(|c| !c.is_finite()) {
            return Err(LtiError::InvalidCoefficients("num"));
        }
        if den.is_empty() || den.iter().any(|c| !c.is_finite()) {
            return Err(LtiError::InvalidCoefficients("den"));
        }
        if poly::is_zero(&den) {
            return Err(LtiError::ZeroDenominator);
        }
        Ok(Self {
            num: poly::trim(num),
            den: poly::trim(den),
        })
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        poly::degree(&self.num)
    }

    pub fn den_degree(&self) -> usize {
        poly::degree(&self.den)
    }

    /// `deg den − deg num`; negative for improper transfer functions.
    pub fn relative_degree(&self) -> i64 {
        self.den_degree() as i64 - self.num_degree() as i64
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0 || poly::is_zero(&self.num)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree() >= 1 || poly::is_zero(&self.num)
    }

    /// Ratio of the highest-power coefficients, `lim s^r · tf(s)` for relative degree `r`.
    pub fn leading_ratio(&self) -> f64 {
        self.num[self.num_degree()] / self.den[self.den_degree()]
    }

    /// Evaluates the transfer function at an arbitrary complex point.
    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        if s.norm() > 1.0 {
            let z = 1.0 / s;
            let shift = self.num_degree() as i32 - self.den_degree() as i32;
            poly::eval_reversed(&self.num, z) / poly::eval_reversed(&self.den, z) * s.powi(shift)
        } else {
            poly::eval(&self.num, s) / poly::eval(&self.den, s)
        }
    }

    /// Frequency response at `s = jω`.
    ///
    /// For `ω > 1` both polynomials are evaluated in reversed form at `1/(jω)`
    /// so high-order terms cannot overflow.
    pub fn eval(&self, omega: f64) -> Result<Complex64, LtiError> {
        let s = Complex64::new(0.0, omega);
        let (n, d, d_bound) = if omega > 1.0 {
            let z = 1.0 / s;
            let shift = self.num_degree() as i32 - self.den_degree() as i32;
            let n = poly::eval_reversed(&self.num, z) * s.powi(shift);
            let d = poly::eval_reversed(&self.den, z);
            let bound = poly::magnitude_bound(&reverse(&self.den), 1.0 / omega);
            (n, d, bound)
        } else {
            let n = poly::eval(&self.num, s);
            let d = poly::eval(&self.den, s);
            (n, d, poly::magnitude_bound(&self.den, omega))
        };
        if d.norm() <= POLE_TOL * d_bound {
            return Err(LtiError::PoleAtFrequency { omega });
        }
        Ok(n / d)
    }

    /// Series connection `self · other`. Common factors are kept.
    pub fn series(&self, other: &RationalTf) -> RationalTf {
        RationalTf {
            num: poly::mul(&self.num, &other.num),
            den: poly::mul(&self.den, &other.den),
        }
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, LtiError> {
        poly::roots(&self.den).ok_or(LtiError::RootFindingDiverged)
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>, LtiError> {
        if poly::is_zero(&self.num) {
            return Ok(Vec::new());
        }
        poly::roots(&self.num).ok_or(LtiError::RootFindingDiverged)
    }

    /// Multiplicity `n` of the pole at `s = 0`, so that `tf = tf'(s)/s^n`
    /// with `tf'(0)` finite and nonzero.
    pub fn origin_pole_order(&self) -> Result<usize, LtiError> {
        self.origin_pole_order_with_tol(ROOT_TOL)
    }

    pub fn origin_pole_order_with_tol(&self, tol: f64) -> Result<usize, LtiError> {
        let n = poly::origin_multiplicity(&self.den, tol);
        if n > 0 && (poly::is_zero(&self.num) || poly::origin_multiplicity(&self.num, tol) > 0) {
            return Err(LtiError::AmbiguousOriginPole);
        }
        Ok(n)
    }

    /// True iff some zero coincides with some pole within `tol`, measured
    /// relative to the root magnitude (absolute below magnitude one).
    pub fn has_pole_zero_cancellation(&self, tol: f64) -> Result<bool, LtiError> {
        let zeros = self.zeros()?;
        let poles = self.poles()?;
        Ok(zeros.iter().any(|z| {
            poles
                .iter()
                .any(|p| (z - p).norm() <= tol * z.norm().max(p.norm()).max(1.0))
        }))
    }

    /// `den + num`: characteristic polynomial of the unity negative-feedback loop.
    pub fn closed_loop_characteristic(&self) -> Result<Vec<f64>, LtiError> {
        if !self.is_proper() {
            return Err(LtiError::ImproperTransferFunction {
                num: self.num_degree(),
                den: self.den_degree(),
            });
        }
        let ch = poly::add(&self.den, &self.num);
        if poly::degree(&ch) < self.den_degree() || poly::is_zero(&ch) {
            return Err(LtiError::IllPosedFeedback);
        }
        Ok(ch)
    }

    /// Controllable canonical realization with diagonal state scaling.
    ///
    /// `A` has `σ` on the superdiagonal and the scaled `−a₀ … −aₙ₋₁` (monic
    /// denominator) in its last row, `B = eₙ`, and `C` holds the scaled
    /// strictly proper remainder of the numerator.
    pub fn realize(&self) -> Result<StateSpace, LtiError> {
        if !self.is_proper() {
            return Err(LtiError::ImproperTransferFunction {
                num: self.num_degree(),
                den: self.den_degree(),
            });
        }
        let n = self.den_degree();
        let lead = self.den[n];
        let den: Vec<f64> = self.den[..=n].iter().map(|c| c / lead).collect();
        let mut num: Vec<f64> = (0..=n)
            .map(|k| self.num.get(k).copied().unwrap_or(0.0) / lead)
            .collect();
        let d = num[n];
        for k in 0..=n {
            num[k] -= d * den[k];
        }

        // state k is scaled by σ^(n−1−k), σ the geometric mean of the
        // nonzero pole magnitudes; keeps sI − A well conditioned near the poles
        let sigma = den
            .iter()
            .position(|c| *c != 0.0)
            .filter(|&k| k < n)
            .map(|k| den[k].abs().powf(1.0 / (n - k) as f64))
            .unwrap_or(1.0);
        let weight = |j: usize| sigma.powi((n - 1 - j) as i32);

        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = sigma;
        }
        if n > 0 {
            for j in 0..n {
                a[(n - 1, j)] = -den[j] / weight(j);
            }
        }
        let mut b = DVector::zeros(n);
        if n > 0 {
            b[n - 1] = 1.0;
        }
        let c = RowDVector::from_iterator(n, (0..n).map(|j| num[j] / weight(j)));
        Ok(StateSpace { a, b, c, d })
    }
}

fn reverse(p: &[f64]) -> Vec<f64> {
    let d = poly::degree(p);
    p[..=d].iter().rev().copied().collect()
}

/// Hypothesis (I) on the linear part: every root of `den_L + num_L` lies in
/// the open left half-plane.
pub fn base_linear_closed_loop_stable(l: &RationalTf) -> Result<bool, LtiError> {
    let ch = l.closed_loop_characteristic()?;
    let roots = poly::roots(&ch).ok_or(LtiError::RootFindingDiverged)?;
    Ok(roots.iter().all(|r| r.re < 0.0))
}

/// SISO state-space model `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (sI − A)⁻¹ B + D`; `None` when `sI − A` is singular.
    pub fn transfer_at(&self, s: Complex64) -> Option<Complex64> {
        let n = self.order();
        if n == 0 {
            return Some(Complex64::new(self.d, 0.0));
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m.lu().solve(&rhs)?;
        let y = self
            .c
            .iter()
            .zip(x.iter())
            .fold(Complex64::new(0.0, 0.0), |acc, (c, xi)| acc + xi * *c);
        Some(y + self.d)
    }

    pub fn freq_response(&self, omega: f64) -> Option<Complex64> {
        self.transfer_at(Complex64::new(0.0, omega))
    }
}
