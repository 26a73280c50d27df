//! Covariance intersection of pose hypotheses and the registration score used to rank them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VnbError};
use crate::scalar::Real;

pub const POSE_DIM: usize = 6;
pub type Mat6<T> = [[T; POSE_DIM]; POSE_DIM];

const MAX_CONDITION: f64 = 1e12;

/// Pose estimate (position + axis-angle) with its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseHypothesis<T> {
    pub pose: [T; POSE_DIM],
    pub covariance: Mat6<T>,
}

/// Lower-triangular Cholesky factor; rejects asymmetric, indefinite or ill-conditioned input.
pub fn cholesky<T: Real>(m: &Mat6<T>) -> Result<Mat6<T>> {
    let tol = T::lit(1e-9);
    for i in 0..POSE_DIM {
        for j in 0..i {
            let s = m[i][i].abs().max(m[j][j].abs()).max(T::one());
            if (m[i][j] - m[j][i]).abs() > tol * s {
                return Err(VnbError::NotSpd("matrix is not symmetric".into()));
            }
        }
    }
    let mut l = [[T::zero(); POSE_DIM]; POSE_DIM];
    for i in 0..POSE_DIM {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(VnbError::NotSpd(format!("non-positive pivot at row {i}")));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let diag: Vec<f64> = (0..POSE_DIM).map(|i| l[i][i].as_f64()).collect();
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if (hi / lo).powi(2) > MAX_CONDITION {
        return Err(VnbError::NotSpd("matrix is too ill-conditioned".into()));
    }
    Ok(l)
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse<T: Real>(m: &Mat6<T>) -> Result<Mat6<T>> {
    let l = cholesky(m)?;
    let mut inv = [[T::zero(); POSE_DIM]; POSE_DIM];
    for col in 0..POSE_DIM {
        let mut y = [T::zero(); POSE_DIM];
        for i in 0..POSE_DIM {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in (0..POSE_DIM).rev() {
            let mut s = y[i];
            for k in i + 1..POSE_DIM {
                s -= l[k][i] * inv[k][col];
            }
            inv[i][col] = s / l[i][i];
        }
    }
    for i in 0..POSE_DIM {
        for j in 0..i {
            let avg = (inv[i][j] + inv[j][i]) * T::lit(0.5);
            inv[i][j] = avg;
            inv[j][i] = avg;
        }
    }
    Ok(inv)
}

fn mat_vec<T: Real>(m: &Mat6<T>, v: &[T; POSE_DIM]) -> [T; POSE_DIM] {
    let mut out = [T::zero(); POSE_DIM];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
    }
    out
}

/// Covariance intersection: fused precision `ω Σ_a⁻¹ + (1 − ω) Σ_b⁻¹`.
pub fn covariance_intersect<T: Real>(a: &PoseHypothesis<T>, b: &PoseHypothesis<T>, omega: T) -> Result<PoseHypothesis<T>> {
    if !(omega >= T::zero() && omega <= T::one()) {
        return Err(invalid("omega must lie in [0, 1]"));
    }
    let pa = spd_inverse(&a.covariance)?;
    let pb = spd_inverse(&b.covariance)?;
    if omega == T::one() {
        return Ok(*a);
    }
    if omega == T::zero() {
        return Ok(*b);
    }
    let w = T::one() - omega;
    let mut precision = [[T::zero(); POSE_DIM]; POSE_DIM];
    for i in 0..POSE_DIM {
        for j in 0..POSE_DIM {
            precision[i][j] = omega * pa[i][j] + w * pb[i][j];
        }
    }
    let covariance = spd_inverse(&precision)?;
    let ia = mat_vec(&pa, &a.pose);
    let ib = mat_vec(&pb, &b.pose);
    let mut info = [T::zero(); POSE_DIM];
    for i in 0..POSE_DIM {
        info[i] = omega * ia[i] + w * ib[i];
    }
    Ok(PoseHypothesis { pose: mat_vec(&covariance, &info), covariance })
}

/// Registration fitness and residual for one candidate alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpScoreInputs<T> {
    pub fitness: T,
    pub rmse: T,
    pub lambda_s: T,
}

impl<T: Real> IcpScoreInputs<T> {
    pub fn new(fitness: T, rmse: T) -> Self {
        Self { fitness, rmse, lambda_s: T::lit(0.1) }
    }
}

/// `s = s_fit − λ_s e_rmse`.
pub fn icp_score<T: Real>(inputs: &IcpScoreInputs<T>) -> Result<T> {
    if !(inputs.fitness >= T::zero() && inputs.fitness <= T::one()) {
        return Err(invalid("fitness must lie in [0, 1]"));
    }
    if !(inputs.rmse >= T::zero()) {
        return Err(invalid("rmse must be non-negative"));
    }
    Ok(inputs.fitness - inputs.lambda_s * inputs.rmse)
}

/// Index of the highest-scoring candidate (first one on ties).
pub fn best_registration<T: Real>(candidates: &[IcpScoreInputs<T>]) -> Result<Option<usize>> {
    let mut best: Option<(usize, T)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let s = icp_score(c)?;
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    Ok(best.map(|(i, _)| i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: [f64; 6]) -> Mat6<f64> {
        let mut m = [[0.0; 6]; 6];
        for i in 0..6 {
            m[i][i] = d[i];
        }
        m
    }

    #[test]
    fn equal_information() {
        let cov = diag([1.0, 2.0, 3.0, 0.5, 0.1, 4.0]);
        let a = PoseHypothesis { pose: [1.0, 2.0, 3.0, 0.1, 0.2, 0.3], covariance: cov };
        let b = PoseHypothesis { pose: [3.0, 0.0, 1.0, 0.3, 0.0, 0.1], covariance: cov };
        let f = covariance_intersect(&a, &b, 0.5).unwrap();
        for i in 0..6 {
            assert!((f.pose[i] - 0.5 * (a.pose[i] + b.pose[i])).abs() < 1e-12);
            for j in 0..6 {
                assert!((f.covariance[i][j] - cov[i][j]).abs() < 1e-12);
            }
        }
        assert_eq!(covariance_intersect(&a, &b, 1.0).unwrap(), a);
    }

    #[test]
    fn rejects_non_spd() {
        let mut bad = diag([1.0; 6]);
        bad[2][2] = -1.0;
        let a = PoseHypothesis { pose: [0.0; 6], covariance: bad };
        let b = PoseHypothesis { pose: [0.0; 6], covariance: diag([1.0; 6]) };
        assert!(covariance_intersect(&a, &b, 0.5).is_err());
        let ill = PoseHypothesis { pose: [0.0; 6], covariance: diag([1.0, 1.0, 1.0, 1.0, 1.0, 1e-13]) };
        assert!(covariance_intersect(&ill, &b, 0.5).is_err());
    }

    #[test]
    fn icp_examples() {
        assert!((icp_score(&IcpScoreInputs::new(0.9_f64, 0.01)).unwrap() - 0.899).abs() < 1e-15);
        assert_eq!(icp_score(&IcpScoreInputs::new(0.7_f64, 0.0)).unwrap(), 0.7);
        let c = [IcpScoreInputs::new(0.5, 0.0), IcpScoreInputs::new(0.9, 0.5), IcpScoreInputs::new(0.9, 0.4)];
        assert_eq!(best_registration(&c).unwrap(), Some(2));
    }
}
