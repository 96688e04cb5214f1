//! Dense real polynomials in ascending-power coefficient order.
//!
//! `p[k]` is the coefficient of `s^k`. These helpers back [`crate::lti`]
//! and are deliberately free functions over slices.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

/// Drops trailing (highest-power) coefficients that are exactly zero.
pub fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && p[p.len() - 1] == 0.0 {
        p.pop();
    }
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

pub fn degree(p: &[f64]) -> usize {
    p.iter().rposition(|&c| c != 0.0).unwrap_or(0)
}

pub fn is_zero(p: &[f64]) -> bool {
    p.iter().all(|&c| c == 0.0)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    trim(out)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0))
        .collect();
    trim(out)
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    trim(p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
}

/// Horner evaluation at a complex point.
pub fn eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Evaluates `z^deg · p(1/z)`, i.e. the reversed polynomial, at `z`.
pub fn eval_reversed(p: &[f64], z: Complex64) -> Complex64 {
    let d = degree(p);
    p[..=d]
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Sum of coefficient magnitudes weighted by `|s|^k`; scale for residual tests.
pub fn magnitude_bound(p: &[f64], s_abs: f64) -> f64 {
    p.iter()
        .rev()
        .fold(0.0, |acc, &c| acc * s_abs + c.abs())
}

pub fn inf_norm(p: &[f64]) -> f64 {
    p.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
}

/// Number of leading (lowest-power) coefficients that vanish relative to `tol·‖p‖∞`.
pub fn origin_multiplicity(p: &[f64], tol: f64) -> usize {
    let norm = inf_norm(p);
    if norm == 0.0 {
        return 0;
    }
    p.iter()
        .take(degree(p))
        .take_while(|c| c.abs() <= tol * norm)
        .count()
}

/// Roots of `p` from the eigenvalues of its companion matrix.
///
/// The variable is rescaled (`s = σz`) so the companion matrix is roughly
/// balanced, and each eigenvalue is polished by a few Newton steps on the
/// original polynomial. Exact zeros at the origin are split off first.
/// Returns `None` when the Schur iteration does not converge.
pub fn roots(p: &[f64]) -> Option<Vec<Complex64>> {
    let p = trim(p.to_vec());
    let n = degree(&p);
    if n == 0 {
        return Some(Vec::new());
    }
    let zeros_at_origin = p.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &p[zeros_at_origin..=n];
    let m = reduced.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    if m == 0 {
        return Some(out);
    }

    let lead = reduced[m];
    let sigma = (reduced[0].abs() / lead.abs()).powf(1.0 / m as f64);
    let sigma = if sigma.is_finite() && sigma > 0.0 { sigma } else { 1.0 };
    // monic polynomial in z = s / sigma
    let monic: Vec<f64> = reduced
        .iter()
        .enumerate()
        .map(|(k, c)| c / lead * sigma.powi(k as i32 - m as i32))
        .collect();

    let mut companion = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        companion[(i, m - 1)] = -monic[i];
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 10_000)?;
    let eig = schur.complex_eigenvalues();

    let dp = derivative(reduced);
    for z in eig.iter() {
        let mut r = z * sigma;
        let mut res = eval(reduced, r).norm();
        for _ in 0..4 {
            let d = eval(&dp, r);
            if d.norm() == 0.0 {
                break;
            }
            let cand = r - eval(reduced, r) / d;
            let cand_res = eval(reduced, cand).norm();
            if cand_res.is_finite() && cand_res < res {
                r = cand;
                res = cand_res;
            } else {
                break;
            }
        }
        if !r.re.is_finite() || !r.im.is_finite() {
            return None;
        }
        out.push(r);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn multiplies_and_trims() {
        assert_eq!(mul(&[1.0, 1.0], &[2.0, 1.0]), vec![2.0, 3.0, 1.0]);
        assert_eq!(trim(vec![1.0, 0.0, 0.0]), vec![1.0]);
        assert_eq!(add(&[1.0, 2.0], &[0.0, -2.0]), vec![1.0]);
    }

    #[test]
    fn roots_of_quadratic() {
        let r = sorted_re(roots(&[2.0, 3.0, 1.0]).unwrap());
        assert!((r[0] - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn roots_split_origin() {
        let r = roots(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|z| (z + 1.0).norm() < 1e-12));
    }

    #[test]
    fn reversed_evaluation_matches_direct() {
        let p = [3.0, -1.0, 0.5, 2.0];
        let s = Complex64::new(0.3, 7.0);
        let direct = eval(&p, s);
        let via_rev = eval_reversed(&p, 1.0 / s) * s.powi(3);
        assert!((direct - via_rev).norm() < 1e-10 * direct.norm());
    }
}
