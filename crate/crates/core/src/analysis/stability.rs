use crate::error::{Error, Result};
use crate::numeric::{RealMat, RealVec};

/// Linearised weight dynamics of the two-step Toy Problem with weights
/// `(w1, w3) = F p` and the greedy policy, as in the critic
/// [`crate::critics::AnalyticForm::TwoStepMixed`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySystem {
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    /// Step-2 policy slope `∂π/∂x = -c2/(c2 + k)`.
    pub b: f64,
    pub d: RealMat,
    pub e: RealMat,
    pub f: RealMat,
    /// `Fᵀ D E D F`: dynamics under the greedy weighting.
    pub m_omega: RealMat,
    /// `Fᵀ E D F`: dynamics under the identity weighting.
    pub m_identity: RealMat,
}

/// Diagonal curvature matrix `diag(1/(2(k+c1)), 1/(2(k+c2)))`.
pub fn curvature_matrix(c1: f64, c2: f64, k: f64) -> RealMat {
    RealMat::diag(&[1.0 / (2.0 * (k + c1)), 1.0 / (2.0 * (k + c2))])
}

pub fn build_stability(lambda: f64, c1: f64, c2: f64, k: f64, f: &RealMat) -> Result<StabilitySystem> {
    if !(c1 > 0.0 && c2 > 0.0 && k >= 0.0) {
        return Err(Error::Argument(format!("need c1, c2 > 0 and k >= 0 (got {c1}, {c2}, {k})")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if f.rows() != 2 || f.cols() != 2 {
        return Err(Error::Argument("mixing matrix must be 2x2".into()));
    }
    let b = -c2 / (c2 + k);
    let d = curvature_matrix(c1, c2, k);
    let e = RealMat::from_row_major(
        2,
        2,
        &[
            k + lambda * (1.0 + b) * (b * (k + 1.0) + 1.0) - b * k,
            lambda * (k + 1.0) * (b + 1.0) - k,
            1.0 + b * (k + 1.0),
            k + 1.0,
        ],
    )?
    .scaled(-2.0);
    let ft = f.transpose();
    let edf = e.matmul(&d).matmul(f);
    Ok(StabilitySystem {
        lambda,
        c1,
        c2,
        k,
        b,
        m_omega: ft.matmul(&d).matmul(&edf),
        m_identity: ft.matmul(&edf),
        d,
        e,
        f: f.clone(),
    })
}

/// The two parameter sets that make the bootstrapped and the unbootstrapped
/// systems diverge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityPreset {
    /// `λ = 0`, `c1 = c2 = k = 0.01`, `F = D⁻¹[[10, 1], [-1, -1]]`.
    A,
    /// `λ = 1`, `c2 = k = 0.01`, `c1 = 0.99`, `F = D⁻¹[[-1, -1], [10, 1]]`.
    B,
}

impl StabilityPreset {
    /// `(λ, c1, c2, k, F)`.
    pub fn parameters(self) -> (f64, f64, f64, f64, RealMat) {
        let (lambda, c1, c2, k, raw) = match self {
            StabilityPreset::A => (0.0, 0.01, 0.01, 0.01, [10.0, 1.0, -1.0, -1.0]),
            StabilityPreset::B => (1.0, 0.99, 0.01, 0.01, [-1.0, -1.0, 10.0, 1.0]),
        };
        let d = curvature_matrix(c1, c2, k);
        let d_inv = RealMat::diag(&[1.0 / d[(0, 0)], 1.0 / d[(1, 1)]]);
        let f = d_inv.matmul(&RealMat::from_row_major(2, 2, &raw).expect("2x2"));
        (lambda, c1, c2, k, f)
    }

    /// The same mixing matrix evaluated at another `λ`.
    pub fn system(self, lambda: Option<f64>) -> StabilitySystem {
        let (l, c1, c2, k, f) = self.parameters();
        build_stability(lambda.unwrap_or(l), c1, c2, k, &f).expect("preset parameters are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            StabilityPreset::A => "a",
            StabilityPreset::B => "b",
        }
    }
}

/// All eigenvalues of a 2×2 matrix have negative real part.
pub fn is_stable(m: &RealMat) -> bool {
    m.trace() < 0.0 && m.det2() > 0.0
}

/// Largest real part over the eigenvalues of a 2×2 matrix.
pub fn leading_real_part(m: &RealMat) -> f64 {
    let half = 0.5 * m.trace();
    let disc = half * half - m.det2();
    if disc >= 0.0 {
        half + disc.sqrt()
    } else {
        half
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearOutcome {
    Diverged,
    Converged,
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRun {
    pub outcome: LinearOutcome,
    pub iterations: usize,
    /// `|p|` every `stride` iterations.
    pub norms: Vec<f64>,
}

/// Iterate `p ← p + α M p` until `|p|` leaves `[1e-12, 1e12]` or `steps` runs out.
pub fn simulate_linear(m: &RealMat, p0: &RealVec, alpha: f64, steps: usize) -> LinearRun {
    let stride = (steps / 1000).max(1);
    let mut p = p0.clone();
    let mut norms = vec![p.norm()];
    for it in 1..=steps {
        let dp = m.mul_vec(&p);
        p.axpy(alpha, &dp);
        let n = p.norm();
        if it % stride == 0 {
            norms.push(n);
        }
        if !(n <= 1e12) {
            norms.push(n);
            return LinearRun { outcome: LinearOutcome::Diverged, iterations: it, norms };
        }
        if n < 1e-12 {
            norms.push(n);
            return LinearRun { outcome: LinearOutcome::Converged, iterations: it, norms };
        }
    }
    LinearRun { outcome: LinearOutcome::Undecided, iterations: steps, norms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::{AnalyticCritic, AnalyticForm};
    use crate::learners::{vgl, OmegaMode};
    use crate::models::ToyProblem;
    use crate::numeric::SeededRng;
    use crate::targets::{compute_omega, compute_targets_g, greedy_rollout};

    #[test]
    fn bootstrapped_closed_form() {
        let (c1, c2, k) = (0.3, 0.7, 1.4);
        let s = build_stability(0.0, c1, c2, k, &RealMat::identity(2)).unwrap();
        let b = s.b;
        let expect = [k - b * k, -k, 1.0 + b * (k + 1.0), k + 1.0];
        for (i, v) in expect.iter().enumerate() {
            assert!((s.e.as_slice()[i] - (-2.0 * v)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_matches_generic_updates() {
        let mut rng = SeededRng::new(3);
        for _ in 0..20 {
            let (c1, c2, k) = (rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0), rng.uniform(0.0, 2.0));
            let lambda = rng.uniform(0.0, 1.0);
            let mix = [[rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)], [rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)]];
            let f = RealMat::from_row_major(2, 2, &[mix[0][0], mix[0][1], mix[1][0], mix[1][1]]).unwrap();
            let sys = build_stability(lambda, c1, c2, k, &f).unwrap();
            let p = RealVec::from_slice(&[rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)]);
            let c = AnalyticCritic::new(
                AnalyticForm::TwoStepMixed { c1, c2, mix },
                RealVec::from_slice(&[p[0], p[1], 0.0, 0.0]),
            )
            .unwrap();
            let m = ToyProblem::new(2, k).unwrap();
            let traj = greedy_rollout(&m, &c, &RealVec::scalar(0.0)).unwrap();
            let g = compute_targets_g(&traj, lambda).unwrap();
            let om = compute_omega(&traj).unwrap();
            let u = vgl(&traj, &g, Some(&om), OmegaMode::Greedy, 1.0).unwrap();
            let expect = sys.m_omega.mul_vec(&p);
            assert!((u.dw[0] - expect[0]).abs() < 1e-9 * expect.max_abs().max(1.0));
            assert!((u.dw[1] - expect[1]).abs() < 1e-9 * expect.max_abs().max(1.0));
            let u = vgl(&traj, &g, None, OmegaMode::Identity, 1.0).unwrap();
            let expect = sys.m_identity.mul_vec(&p);
            assert!((u.dw[0] - expect[0]).abs() < 1e-9 * expect.max_abs().max(1.0));
            assert!((u.dw[1] - expect[1]).abs() < 1e-9 * expect.max_abs().max(1.0));
        }
    }

    #[test]
    fn trivial_matrices() {
        assert!(is_stable(&RealMat::identity(2).scaled(-1.0)));
        assert!(!is_stable(&RealMat::from_row_major(2, 2, &[0.0, 1.0, -1.0, 0.0]).unwrap()));
    }

    #[test]
    fn stability_test_matches_eigenvalues() {
        let mut rng = SeededRng::new(8);
        for _ in 0..1000 {
            let m = RealMat::from_row_major(2, 2, &(0..4).map(|_| rng.uniform(-5.0, 5.0)).collect::<Vec<_>>()).unwrap();
            assert_eq!(is_stable(&m), leading_real_part(&m) < 0.0);
        }
    }

    #[test]
    fn divergence_pattern() {
        let a = StabilityPreset::A.system(None);
        assert!(!is_stable(&a.m_omega));
        assert!(!is_stable(&a.m_identity));
        let b = StabilityPreset::B.system(None);
        assert!(!is_stable(&b.m_identity));
        assert!(is_stable(&b.m_omega));
        assert!(is_stable(&StabilityPreset::A.system(Some(1.0)).m_omega));
    }

    #[test]
    fn linear_iteration_agrees_with_test() {
        for preset in [StabilityPreset::A, StabilityPreset::B] {
            for lambda in [0.0, 1.0] {
                let s = preset.system(Some(lambda));
                for m in [&s.m_omega, &s.m_identity] {
                    let alpha = 0.1 / m.max_abs();
                    let run = simulate_linear(m, &RealVec::from_slice(&[1.0, 0.3]), alpha, 20_000_000);
                    let expect = if is_stable(m) { LinearOutcome::Converged } else { LinearOutcome::Diverged };
                    assert_eq!(run.outcome, expect, "{preset:?} lambda {lambda}");
                }
            }
        }
    }

    #[test]
    fn negative_identity_converges() {
        let run = simulate_linear(&RealMat::identity(2).scaled(-1.0), &RealVec::from_slice(&[1.0, 1.0]), 1e-3, 100_000);
        assert_eq!(run.outcome, LinearOutcome::Converged);
    }
}
