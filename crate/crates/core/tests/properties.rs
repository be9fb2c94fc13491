use proptest::prelude::*;

use valgrad::analysis::{is_stable, leading_real_part, replay};
use valgrad::critics::{AnalyticCritic, Critic, InputActivation, MlpCritic};
use valgrad::learners::{rprop_apply, td_lambda, td_lambda_traces, vgl, OmegaMode, RpropConfig, RpropState};
use valgrad::models::{DiscreteModel, LunarLander, Squash, ToyProblem};
use valgrad::numeric::{fd_gradient, RealMat, RealVec, SeededRng};
use valgrad::policy::{greedy_action, numeric_greedy_action, PolicyKind};
use valgrad::targets::{compute_targets_g, compute_targets_v, greedy_rollout, return_gradients, rollout};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn toy_steps_move_and_charge(n in 1usize..5, k in 0.0f64..3.0, x in -10.0f64..10.0, a in -5.0f64..5.0) {
        let m = ToyProblem::new(n, k).unwrap();
        for t in 0..n {
            let (y, r) = m.toy_step(t, x, a).unwrap();
            prop_assert_eq!(y, x + a);
            prop_assert!(close(r, -k * a * a, 1e-12));
        }
        let (y, r) = m.toy_step(n, x, a).unwrap();
        prop_assert_eq!(y, x);
        prop_assert!(close(r, -x * x, 1e-12));
    }

    #[test]
    fn optimal_actions_beat_perturbations(n in 1usize..4, k in 0.1f64..3.0, x0 in -5.0f64..5.0, d in -1.0f64..1.0, at in 0usize..4) {
        let m = ToyProblem::new(n, k).unwrap();
        let mut x = x0;
        let mut actions = Vec::new();
        for t in 0..n {
            let a = m.optimal_action(t, x).unwrap();
            actions.push(a);
            x += a;
        }
        let best = m.total_reward(x0, &actions).unwrap();
        prop_assert!(close(best, m.optimal_value(0, x0).unwrap(), 1e-10));
        actions[at % n] += d;
        prop_assert!(m.total_reward(x0, &actions).unwrap() <= best + 1e-12);
    }

    #[test]
    fn greedy_closed_form_agrees_with_search(
        c1 in 0.05f64..2.0, c2 in 0.05f64..2.0, k in 0.05f64..2.0,
        w in prop::array::uniform4(-5.0f64..5.0), x in -3.0f64..3.0, t in 0usize..2,
    ) {
        let m = ToyProblem::new(2, k).unwrap();
        let c = AnalyticCritic::two_step(c1, c2, w);
        let x = RealVec::scalar(x);
        let a = greedy_action(&m, &c, t, &x).unwrap().action;
        prop_assume!(a.abs() < 9.0);
        let b = numeric_greedy_action(&m, &c, t, &x).unwrap();
        prop_assert!(close(a, b, 1e-6), "{} vs {}", a, b);
    }

    #[test]
    fn replay_reproduces_greedy_rewards(
        c1 in 0.05f64..2.0, c2 in 0.05f64..2.0, k in 0.0f64..2.0,
        w in prop::array::uniform4(-5.0f64..5.0), x0 in -3.0f64..3.0,
    ) {
        let m = ToyProblem::new(2, k).unwrap();
        let traj = greedy_rollout(&m, &AnalyticCritic::two_step(c1, c2, w), &RealVec::scalar(x0)).unwrap();
        let r = replay(&m, 0, &RealVec::scalar(x0), &traj.actions()).unwrap();
        prop_assert!(close(r, traj.total_reward(), 1e-12));
    }

    #[test]
    fn monte_carlo_targets_are_returns(
        c1 in 0.05f64..2.0, c2 in 0.05f64..2.0, k in 0.0f64..2.0,
        w in prop::array::uniform4(-5.0f64..5.0), x0 in -3.0f64..3.0,
    ) {
        let m = ToyProblem::new(2, k).unwrap();
        let traj = greedy_rollout(&m, &AnalyticCritic::two_step(c1, c2, w), &RealVec::scalar(x0)).unwrap();
        let v = compute_targets_v(&traj, 1.0).unwrap();
        let mut to_go = 0.0;
        for i in (0..traj.len()).rev() {
            to_go += traj.steps[i].reward;
            prop_assert!(close(v[i], to_go, 1e-12));
        }
        let g = compute_targets_g(&traj, 1.0).unwrap();
        let rg = return_gradients(&traj).unwrap();
        for (a, b) in g.iter().zip(&rg) {
            prop_assert!(close(a[0], b[0], 1e-12));
        }
    }

    #[test]
    fn value_gradient_update_vanishes_at_its_targets(
        c1 in 0.05f64..2.0, w1 in -5.0f64..5.0, x0 in -3.0f64..3.0, alpha in 0.001f64..1.0,
    ) {
        // one VGL step with α = 1 lands G exactly on the target; a second step is then zero
        let m = ToyProblem::new(1, 1.0).unwrap();
        let c = AnalyticCritic::one_step(c1, [w1, 0.0]);
        let traj = greedy_rollout(&m, &c, &RealVec::scalar(x0)).unwrap();
        let g = compute_targets_g(&traj, 1.0).unwrap();
        let u = vgl(&traj, &g, None, OmegaMode::Identity, alpha).unwrap();
        let full = vgl(&traj, &g, None, OmegaMode::Identity, 1.0).unwrap();
        prop_assert!(close(u.dw[0], alpha * full.dw[0], 1e-12));
        prop_assert_eq!(u.dw[1], 0.0);
    }

    #[test]
    fn td_views_agree(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let m = ToyProblem::new(3, 0.5).unwrap();
        let mut rng = SeededRng::new(seed);
        let w: RealVec = (0..6).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let c = AnalyticCritic::new(valgrad::critics::AnalyticForm::Linear { steps: 3 }, w).unwrap();
        let traj = rollout(&m, &c, PolicyKind::EpsilonGreedy(1.0), 0, &RealVec::scalar(rng.uniform(-5.0, 5.0)), &mut rng).unwrap();
        let a = td_lambda(&traj, &compute_targets_v(&traj, lambda).unwrap(), 0.1).unwrap().dw;
        let b = td_lambda_traces(&traj, lambda, 0.1).unwrap().dw;
        for j in 0..a.len() {
            prop_assert!(close(a[j], b[j], 1e-12));
        }
    }

    #[test]
    fn squash_is_bounded_monotone_and_log_slope_consistent(c in 0.001f64..2.0, z in -50.0f64..50.0, dz in 1e-6f64..1.0) {
        for s in [Squash::Tanh { c }, Squash::Unit { c }] {
            let (lo, hi) = s.range();
            let g = s.apply(z);
            prop_assert!(g >= lo && g <= hi);
            prop_assert!(s.apply(z + dz) >= g);
            let d = s.derivative(z);
            prop_assert!(d >= 0.0);
            let ld = s.log_derivative(z);
            prop_assert!(ld.is_finite());
            if d > 1e-300 {
                prop_assert!(close(ld, d.ln(), 1e-9));
            }
        }
    }

    #[test]
    fn mlp_gradient_matches_differences(seed in any::<u64>(), h in 0.5f64..100.0, v in -10.0f64..10.0, u in 0.0f64..50.0, identity in any::<bool>()) {
        let act = if identity { InputActivation::Identity } else { InputActivation::Sigmoid };
        let mut c = MlpCritic::lander(act);
        c.randomize(&mut SeededRng::new(seed));
        let x = RealVec::from_slice(&[h, v, u]);
        let b = c.eval(0, &x).unwrap();
        let fd = fd_gradient(|p| c.value(0, p).unwrap(), &x, 1e-6).unwrap();
        for j in 0..3 {
            prop_assert!((b.grad[j] - fd[j]).abs() <= 1e-5 * fd.max_abs().max(1.0), "{} vs {}", b.grad[j], fd[j]);
        }
        prop_assert_eq!(b.dv_dw.len(), c.num_weights());
    }

    #[test]
    fn lander_snapshot_round_trips(seed in any::<u64>()) {
        let mut c = MlpCritic::lander(InputActivation::Identity);
        c.randomize(&mut SeededRng::new(seed));
        let back = MlpCritic::from_snapshot(&c.snapshot()).unwrap();
        prop_assert_eq!(back.weights(), c.weights());
    }

    #[test]
    fn rprop_moves_against_nothing_but_the_sign(
        w in prop::collection::vec(-10.0f64..10.0, 1..8), seed in any::<u64>(), rounds in 1usize..20,
    ) {
        let n = w.len();
        let cfg = RpropConfig::default();
        let mut state = RpropState::new(n, cfg);
        let mut rng = SeededRng::new(seed);
        let mut w = RealVec::from_slice(&w);
        for _ in 0..rounds {
            let dir: RealVec = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let next = rprop_apply(&w, &dir, &mut state).unwrap();
            for j in 0..n {
                let moved = next[j] - w[j];
                prop_assert!(moved == 0.0 || moved.signum() == dir[j].signum());
                prop_assert!(state.steps[j] >= cfg.min_step && state.steps[j] <= cfg.max_step);
            }
            w = next;
        }
    }

    #[test]
    fn stability_agrees_with_leading_eigenvalue(m in prop::array::uniform4(-5.0f64..5.0)) {
        let m = RealMat::from_row_major(2, 2, &m).unwrap();
        let lead = leading_real_part(&m);
        prop_assume!(lead.abs() > 1e-9);
        prop_assert_eq!(is_stable(&m), lead < 0.0);
    }

    #[test]
    fn inverse_of_2x2(m in prop::array::uniform4(-5.0f64..5.0)) {
        let a = RealMat::from_row_major(2, 2, &m).unwrap();
        prop_assume!(a.det2().abs() > 1e-3);
        let p = a.matmul(&a.inverse2().unwrap());
        let id = RealMat::identity(2);
        prop_assert!(p.sub(&id).max_abs() < 1e-9);
    }

    #[test]
    fn lander_free_fall_keeps_energy_bookkeeping(h in 1.0f64..50.0, v in -5.0f64..5.0, u in 1.0f64..50.0) {
        use valgrad::models::ContinuousModel;
        let m = LunarLander::new(0.01).unwrap();
        let x = RealVec::from_slice(&[h, v, u]);
        let mid = m.fbar(&x, 0.5);
        let none = m.fbar(&x, 0.0);
        // thrust only changes velocity and fuel
        prop_assert_eq!(mid[0], none[0]);
        prop_assert!(mid[1] > none[1]);
        prop_assert!(mid[2] < none[2] || mid[2] == none[2] && u == 0.0);
    }
}

#[test]
fn rejects_invalid_problems() {
    assert!(ToyProblem::new(0, 1.0).is_err());
    assert!(ToyProblem::new(1, -1.0).is_err());
    assert!(ToyProblem::new(1, f64::NAN).is_err());
    assert!(LunarLander::new(0.0).is_err());
    let m = ToyProblem::new(1, 1.0).unwrap();
    assert!(m.step(5, &RealVec::scalar(0.0), 0.0).is_err());
}
