use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::models::{ContinuousModel, LunarLander};
use crate::numeric::RealVec;
use crate::targets::MAX_TIME;

pub const SHOOT_BRACKET: (f64, f64) = (-20.0, -1e-4);
pub const SHOOT_ITERATIONS: usize = 80;

/// Optimal lander trajectory from the adjoint closed form, in forward order.
///
/// `states` has one more entry than `actions`; the last is on the ground.
/// `adjoints[i]` is the costate at `states[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PontryaginSolution {
    pub v_final: f64,
    /// Height component of the costate, constant along the path.
    pub p_height: f64,
    pub states: Vec<RealVec>,
    pub actions: Vec<f64>,
    pub pres: Vec<f64>,
    pub dts: Vec<f64>,
    pub adjoints: Vec<RealVec>,
    pub total_reward: f64,
}

impl PontryaginSolution {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dts.iter().sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("t\tx0\tx1\tx2\ta\tpre\tp0\tp1\tp2\n");
        let mut t = 0.0;
        for (i, x) in self.states.iter().enumerate() {
            let (a, pre) = if i < self.actions.len() {
                (format!("{}", self.actions[i]), format!("{}", self.pres[i]))
            } else {
                (String::new(), String::new())
            };
            let p = &self.adjoints[i];
            let _ = writeln!(out, "{t}\t{}\t{}\t{}\t{a}\t{pre}\t{}\t{}\t{}", x[0], x[1], x[2], p[0], p[1], p[2]);
            if i < self.dts.len() {
                t += self.dts[i];
            }
        }
        out
    }
}

/// Backward path for one terminal velocity, newest state first.
struct Backward {
    /// `(h, v, pre)` at the start of each backward step, ground first.
    points: Vec<(f64, f64, f64)>,
    p_height: f64,
    /// Crossing of `h0`: index of the backward step that reaches it, the
    /// length of that step actually taken and the velocity at the crossing.
    crossing: Option<(usize, f64, f64)>,
}

fn shoot(model: &LunarLander, h0: f64, v_final: f64, dt: f64) -> Result<Backward> {
    let k_f = model.k_f;
    let pre_final = -k_f - 2.0 * v_final;
    let ground = RealVec::from_slice(&[0.0, v_final, 1.0]);
    let p_height = model.terminal_gradient(&ground, pre_final)?[0];
    let squash = model.squash();
    let cap = (MAX_TIME / dt).ceil() as usize;
    let (mut h, mut v) = (0.0, v_final);
    let mut points = vec![(h, v, pre_final)];
    for j in 1..=cap {
        // undo one forward Euler step whose action is taken at time-to-go j·dt
        let pre = pre_final + j as f64 * dt * p_height;
        let a = squash.apply(pre);
        let vp = v - dt * (a - model.k_g);
        let hp = h - dt * vp;
        points.push((hp, vp, pre));
        if let Some(s) = partial_step(h, v, a - model.k_g, h0, dt) {
            let v_start = v - s * (a - model.k_g);
            return Ok(Backward { points, p_height, crossing: Some((j, s, v_start)) });
        }
        if hp < h {
            // past the apex without reaching h0
            break;
        }
        h = hp;
        v = vp;
    }
    Ok(Backward { points, p_height, crossing: None })
}

/// Shortest `s ∈ (0, dt]` for which undoing a forward Euler step of length
/// `s` that ends at `(h, v)` starts at height `h0`.
fn partial_step(h: f64, v: f64, accel: f64, h0: f64, dt: f64) -> Option<f64> {
    // h_start(s) = h - s (v - s accel)
    let (qa, qb, qc) = (accel, -v, h - h0);
    if qc >= 0.0 {
        return Some(0.0);
    }
    let mut roots = Vec::with_capacity(2);
    if qa == 0.0 {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // stable pairing of the two roots
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                roots.push(qc / q);
            }
            roots.push(q / qa);
        }
    }
    roots.into_iter().filter(|s| *s > 0.0 && *s <= dt).fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))))
}

/// Velocity mismatch at the crossing; `+∞` when the path never climbs to `h0`.
fn mismatch(b: &Backward, v0: f64) -> f64 {
    match b.crossing {
        Some((_, _, v_start)) => v_start - v0,
        None => f64::INFINITY,
    }
}

/// Optimal trajectory from `(h0, v0, u0)` by shooting on the landing velocity.
///
/// Each step exactly undoes a forward Euler step, so replaying the actions
/// forwards reproduces the path. When the start sits at the apex of the
/// path its velocity can differ from `v0` by up to `Δt k_g`.
pub fn pontryagin_lander(model: &LunarLander, start: (f64, f64, f64), dt: f64) -> Result<PontryaginSolution> {
    let (h0, v0, u0) = start;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    if !(h0.is_finite() && v0.is_finite() && u0.is_finite()) {
        return Err(Error::Argument("start state must be finite".into()));
    }
    let x0 = RealVec::from_slice(&[h0, v0, u0]);
    if model.is_terminal(&x0) {
        return Ok(PontryaginSolution {
            v_final: v0,
            p_height: 0.0,
            states: vec![x0.clone()],
            actions: Vec::new(),
            pres: Vec::new(),
            dts: Vec::new(),
            adjoints: vec![RealVec::zeros(3)],
            total_reward: model.terminal_impulse(&x0),
        });
    }
    if v0 > 0.0 {
        return Err(Error::OracleInfeasible(format!("upward start velocity {v0} is not handled")));
    }
    let (mut lo, mut hi) = SHOOT_BRACKET;
    let r_lo = mismatch(&shoot(model, h0, lo, dt)?, v0);
    let r_hi = mismatch(&shoot(model, h0, hi, dt)?, v0);
    if !(r_lo < 0.0 && r_hi > 0.0) {
        return Err(Error::OracleInfeasible(format!(
            "no sign change over landing velocities [{lo}, {hi}] (mismatch {r_lo}, {r_hi})"
        )));
    }
    for _ in 0..SHOOT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mismatch(&shoot(model, h0, mid, dt)?, v0) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the steeper end always has a crossing
    let v_final = lo;
    let b = shoot(model, h0, v_final, dt)?;
    let (j, s, v_start) = b.crossing.ok_or_else(|| Error::OracleInfeasible("shooting lost its crossing".into()))?;
    assemble(model, &b, v_final, j, s, (h0, v_start, u0), dt)
}

fn assemble(
    model: &LunarLander,
    b: &Backward,
    v_final: f64,
    j: usize,
    first: f64,
    start: (f64, f64, f64),
    dt: f64,
) -> Result<PontryaginSolution> {
    let squash = model.squash();
    let (h0, v0, u0) = start;
    // forward order: a partial step from the start, then the grid back to the ground
    let mut dts = vec![first];
    let mut pres = vec![b.points[j].2];
    let mut hv = vec![(h0, v0)];
    for i in (1..j).rev() {
        dts.push(dt);
        pres.push(b.points[i].2);
        hv.push((b.points[i].0, b.points[i].1));
    }
    hv.push((0.0, v_final));
    let actions: Vec<f64> = pres.iter().map(|&z| squash.apply(z)).collect();
    let used: f64 = actions.iter().zip(&dts).map(|(a, d)| a * d).sum();
    let u_final = u0 - used;
    if u_final < 0.0 {
        return Err(Error::OracleInfeasible(format!("path needs {used} fuel, only {u0} available")));
    }
    let mut states = Vec::with_capacity(hv.len());
    let mut u = u0;
    for (i, &(h, v)) in hv.iter().enumerate() {
        states.push(RealVec::from_slice(&[h, v, u]));
        if i < actions.len() {
            u -= actions[i] * dts[i];
        }
    }
    let duration: f64 = dts.iter().sum();
    let mut adjoints = Vec::with_capacity(states.len());
    let mut elapsed = 0.0;
    for i in 0..states.len() {
        let to_go = duration - elapsed;
        adjoints.push(RealVec::from_slice(&[b.p_height, -2.0 * v_final + to_go * b.p_height, 0.0]));
        if i < dts.len() {
            elapsed += dts[i];
        }
    }
    let running: f64 = pres.iter().zip(&dts).map(|(&z, d)| model.reward_rate_at_pre(z) * d).sum();
    let terminal = states.last().expect("non-empty");
    Ok(PontryaginSolution {
        v_final,
        p_height: b.p_height,
        total_reward: running + model.terminal_impulse(terminal),
        states,
        actions,
        pres,
        dts,
        adjoints,
    })
}
