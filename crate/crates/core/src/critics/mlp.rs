use std::fmt::Write as _;
use std::path::Path;

use super::{check_len, Critic, CriticBundle};
use crate::error::{Error, Result};
use crate::numeric::{RealMat, RealVec, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputActivation {
    Sigmoid,
    Identity,
}

impl InputActivation {
    pub fn name(self) -> &'static str {
        match self {
            InputActivation::Sigmoid => "sigmoid",
            InputActivation::Identity => "identity",
        }
    }

    /// `(y, y', y'')` at `s`.
    fn eval(self, s: f64) -> (f64, f64, f64) {
        match self {
            InputActivation::Sigmoid => sigmoid3(s),
            InputActivation::Identity => (s, 1.0, 0.0),
        }
    }
}

fn sigmoid3(z: f64) -> (f64, f64, f64) {
    let s = 1.0 / (1.0 + (-z).exp());
    let d = s * (1.0 - s);
    (s, d, d * (1.0 - 2.0 * s))
}

/// One-hidden-layer perceptron value function with shortcut connections from
/// the input units straight to the linear output.
///
/// Weight layout: `W1` (hidden × input, row-major by hidden unit), hidden
/// biases, output weights, shortcut weights, output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCritic {
    n_in: usize,
    n_hidden: usize,
    input_scale: Vec<f64>,
    output_scale: f64,
    input_activation: InputActivation,
    weights: RealVec,
}

impl MlpCritic {
    pub const LANDER_INPUT_SCALE: [f64; 3] = [1.0 / 100.0, 1.0 / 10.0, 1.0 / 50.0];
    pub const LANDER_OUTPUT_SCALE: f64 = 100.0;
    pub const LANDER_HIDDEN: usize = 6;

    pub fn new(
        n_hidden: usize,
        input_scale: Vec<f64>,
        output_scale: f64,
        input_activation: InputActivation,
    ) -> Result<Self> {
        if input_scale.is_empty() || n_hidden == 0 {
            return Err(Error::Argument("network needs at least one input and one hidden unit".into()));
        }
        let n_in = input_scale.len();
        let n = n_hidden * n_in + 2 * n_hidden + n_in + 1;
        Ok(MlpCritic { n_in, n_hidden, input_scale, output_scale, input_activation, weights: RealVec::zeros(n) })
    }

    /// The 3-6-1 lander critic with all weights zero.
    pub fn lander(input_activation: InputActivation) -> Self {
        Self::new(
            Self::LANDER_HIDDEN,
            Self::LANDER_INPUT_SCALE.to_vec(),
            Self::LANDER_OUTPUT_SCALE,
            input_activation,
        )
        .expect("lander network shape is valid")
    }

    pub fn randomize(&mut self, rng: &mut SeededRng) {
        for w in self.weights.as_mut_slice() {
            *w = rng.uniform(-1.0, 1.0);
        }
    }

    pub fn input_activation(&self) -> InputActivation {
        self.input_activation
    }

    fn w1(&self, j: usize, i: usize) -> f64 {
        self.weights[j * self.n_in + i]
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let b1 = self.n_hidden * self.n_in;
        let w2 = b1 + self.n_hidden;
        let s = w2 + self.n_hidden;
        (b1, w2, s, s + self.n_in)
    }

    /// Mixed second derivatives `(∂G/∂w, ∂G/∂x)` at `x`.
    pub fn second_order(&self, x: &RealVec) -> Result<(RealMat, RealMat)> {
        let b = self.eval(0, x)?;
        Ok((b.dg_dw, b.dg_dx))
    }

    /// Plain-text snapshot: one header line, then one weight per line.
    pub fn snapshot(&self) -> String {
        let mut out = format!(
            "mlp inputs={} hidden={} weights={} input={} output_scale={}",
            self.n_in,
            self.n_hidden,
            self.weights.len(),
            self.input_activation.name(),
            self.output_scale
        );
        out.push_str(" scale=");
        let scales: Vec<String> = self.input_scale.iter().map(|s| s.to_string()).collect();
        out.push_str(&scales.join(","));
        out.push('\n');
        for w in self.weights.iter() {
            let _ = writeln!(out, "{w}");
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("mlp") {
            return Err(Error::Parse(format!("unrecognised snapshot header {header:?}")));
        }
        let (mut hidden, mut count, mut act, mut out_scale, mut scale) = (None, None, None, None, None);
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| Error::Parse(format!("bad header field {f:?}")))?;
            let num = |v: &str| v.parse::<f64>().map_err(|e| Error::Parse(format!("{k}: {e}")));
            match k {
                "inputs" => {}
                "hidden" => hidden = Some(num(v)? as usize),
                "weights" => count = Some(num(v)? as usize),
                "output_scale" => out_scale = Some(num(v)?),
                "scale" => scale = Some(v.split(',').map(num).collect::<Result<Vec<f64>>>()?),
                "input" => {
                    act = Some(match v {
                        "sigmoid" => InputActivation::Sigmoid,
                        "identity" => InputActivation::Identity,
                        _ => return Err(Error::Parse(format!("unknown input activation {v:?}"))),
                    })
                }
                _ => return Err(Error::Parse(format!("unknown header field {k:?}"))),
            }
        }
        let missing = || Error::Parse("snapshot header is incomplete".into());
        let mut net = Self::new(
            hidden.ok_or_else(missing)?,
            scale.ok_or_else(missing)?,
            out_scale.ok_or_else(missing)?,
            act.ok_or_else(missing)?,
        )?;
        let values: Vec<f64> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|e| Error::Parse(format!("weight {l:?}: {e}"))))
            .collect::<Result<_>>()?;
        if Some(values.len()) != count || values.len() != net.num_weights() {
            return Err(Error::Parse(format!(
                "snapshot holds {} weights, network needs {}",
                values.len(),
                net.num_weights()
            )));
        }
        net.set_weights(&RealVec::from(values))?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.snapshot())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_snapshot(&std::fs::read_to_string(path)?)
    }
}

impl Critic for MlpCritic {
    fn state_dim(&self) -> usize {
        self.n_in
    }

    fn num_weights(&self) -> usize {
        self.weights.len()
    }

    fn weights(&self) -> &RealVec {
        &self.weights
    }

    fn set_weights(&mut self, w: &RealVec) -> Result<()> {
        check_len(w, self.weights.len())?;
        self.weights = w.clone();
        Ok(())
    }

    fn eval(&self, _t: usize, x: &RealVec) -> Result<CriticBundle> {
        check_len(x, self.n_in)?;
        let (ni, nh) = (self.n_in, self.n_hidden);
        let (ob1, ow2, os, ob2) = self.offsets();
        let k = self.output_scale;
        let w = &self.weights;

        let mut y = vec![0.0; ni];
        let mut y1 = vec![0.0; ni];
        let mut y2 = vec![0.0; ni];
        for i in 0..ni {
            (y[i], y1[i], y2[i]) = self.input_activation.eval(x[i] * self.input_scale[i]);
        }
        let mut h = vec![0.0; nh];
        let mut h1 = vec![0.0; nh];
        let mut h2 = vec![0.0; nh];
        for j in 0..nh {
            let net = w[ob1 + j] + (0..ni).map(|i| self.w1(j, i) * y[i]).sum::<f64>();
            (h[j], h1[j], h2[j]) = sigmoid3(net);
        }
        let out = w[ob2] + (0..nh).map(|j| w[ow2 + j] * h[j]).sum::<f64>() + (0..ni).map(|i| w[os + i] * y[i]).sum::<f64>();

        // d_i = ∂out/∂y_i; G_i = k · scale_i · y'_i · d_i
        let d: Vec<f64> = (0..ni).map(|i| w[os + i] + (0..nh).map(|j| w[ow2 + j] * h1[j] * self.w1(j, i)).sum::<f64>()).collect();
        let gfac: Vec<f64> = (0..ni).map(|i| k * self.input_scale[i] * y1[i]).collect();
        let grad: RealVec = (0..ni).map(|i| gfac[i] * d[i]).collect();

        let mut dg_dx = RealMat::zeros(ni, ni);
        for i in 0..ni {
            for m in 0..ni {
                let cross: f64 = (0..nh).map(|j| w[ow2 + j] * h2[j] * self.w1(j, i) * self.w1(j, m)).sum();
                let mut v = gfac[i] * cross * y1[m] * self.input_scale[m];
                if i == m {
                    v += k * self.input_scale[i] * self.input_scale[i] * y2[i] * d[i];
                }
                dg_dx[(m, i)] = v;
            }
        }

        let n = w.len();
        let mut dv_dw = RealVec::zeros(n);
        let mut dg_dw = RealMat::zeros(n, ni);
        for j in 0..nh {
            let w2 = w[ow2 + j];
            for m in 0..ni {
                let row = j * ni + m;
                dv_dw[row] = k * w2 * h1[j] * y[m];
                for i in 0..ni {
                    let mut v = h2[j] * y[m] * self.w1(j, i);
                    if i == m {
                        v += h1[j];
                    }
                    dg_dw[(row, i)] = gfac[i] * w2 * v;
                }
            }
            dv_dw[ob1 + j] = k * w2 * h1[j];
            dv_dw[ow2 + j] = k * h[j];
            for i in 0..ni {
                dg_dw[(ob1 + j, i)] = gfac[i] * w2 * h2[j] * self.w1(j, i);
                dg_dw[(ow2 + j, i)] = gfac[i] * h1[j] * self.w1(j, i);
            }
        }
        for m in 0..ni {
            dv_dw[os + m] = k * y[m];
            dg_dw[(os + m, m)] = gfac[m];
        }
        dv_dw[ob2] = k;

        Ok(CriticBundle { value: k * out, grad, dv_dw, dg_dw, dg_dx })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{fd_gradient, fd_jacobian, max_rel_err, FD_STEP};

    fn random_net(seed: u64, act: InputActivation) -> MlpCritic {
        let mut net = MlpCritic::lander(act);
        net.randomize(&mut SeededRng::new(seed));
        net
    }

    fn random_state(rng: &mut SeededRng) -> RealVec {
        RealVec::from_slice(&[rng.uniform(0.0, 120.0), rng.uniform(-15.0, 5.0), rng.uniform(0.0, 60.0)])
    }

    #[test]
    fn lander_shape() {
        let net = MlpCritic::lander(InputActivation::Sigmoid);
        assert_eq!(net.num_weights(), 34);
    }

    #[test]
    fn zero_weights_give_flat_output() {
        let net = MlpCritic::lander(InputActivation::Sigmoid);
        let b = net.eval(0, &RealVec::from_slice(&[50.0, -3.0, 20.0])).unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.grad.as_slice(), &[0.0; 3]);
        let mut biased = net.clone();
        let mut w = RealVec::zeros(34);
        w[33] = 0.25;
        biased.set_weights(&w).unwrap();
        let b = biased.eval(0, &RealVec::from_slice(&[50.0, -3.0, 20.0])).unwrap();
        assert_eq!(b.value, 25.0);
        assert_eq!(b.grad.as_slice(), &[0.0; 3]);
    }

    #[test]
    fn shortcut_only_identity_network_has_zero_curvature() {
        let mut net = MlpCritic::lander(InputActivation::Identity);
        let mut w = RealVec::zeros(34);
        w[30] = 0.5;
        w[31] = -1.0;
        w[32] = 2.0;
        net.set_weights(&w).unwrap();
        let b = net.eval(0, &RealVec::from_slice(&[10.0, 1.0, 3.0])).unwrap();
        assert_eq!(b.dg_dx.max_abs(), 0.0);
    }

    #[test]
    fn bundle_matches_finite_differences() {
        let mut rng = SeededRng::new(11);
        for act in [InputActivation::Sigmoid, InputActivation::Identity] {
            for trial in 0..25 {
                let net = random_net(100 + trial, act);
                let x = random_state(&mut rng);
                let b = net.eval(0, &x).unwrap();

                let g = fd_gradient(|p| net.eval(0, p).unwrap().value, &x, FD_STEP).unwrap();
                assert!(max_rel_err(b.grad.as_slice(), g.as_slice()) < 1e-4);

                let w0 = net.weights().clone();
                let dvdw = fd_gradient(
                    |p| {
                        let mut n = net.clone();
                        n.set_weights(p).unwrap();
                        n.eval(0, &x).unwrap().value
                    },
                    &w0,
                    FD_STEP,
                )
                .unwrap();
                assert!(max_rel_err(b.dv_dw.as_slice(), dvdw.as_slice()) < 1e-4);

                let dgdw = fd_jacobian(
                    |p| {
                        let mut n = net.clone();
                        n.set_weights(p).unwrap();
                        n.eval(0, &x).unwrap().grad
                    },
                    &w0,
                    FD_STEP,
                )
                .unwrap();
                assert!(max_rel_err(b.dg_dw.as_slice(), dgdw.as_slice()) < 1e-4, "{act:?} trial {trial}");

                let dgdx = fd_jacobian(|p| net.eval(0, p).unwrap().grad, &x, FD_STEP).unwrap();
                assert!(max_rel_err(b.dg_dx.as_slice(), dgdx.as_slice()) < 1e-4);
            }
        }
    }

    #[test]
    fn finite_on_bounded_inputs() {
        let net = random_net(5, InputActivation::Sigmoid);
        for h in [-200.0, 0.0, 200.0] {
            for v in [-50.0, 0.0, 50.0] {
                for u in [-100.0, 0.0, 100.0] {
                    assert!(net.eval(0, &RealVec::from_slice(&[h, v, u])).unwrap().is_finite());
                }
            }
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let net = random_net(9, InputActivation::Sigmoid);
        let back = MlpCritic::from_snapshot(&net.snapshot()).unwrap();
        assert_eq!(back, net);
        assert!(MlpCritic::from_snapshot("mlp hidden=6\n").is_err());
        assert!(MlpCritic::from_snapshot("bogus\n1\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.txt");
        net.save(&p).unwrap();
        assert_eq!(MlpCritic::load(&p).unwrap(), net);
    }
}
