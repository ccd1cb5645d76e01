//! Q(s, a) = A(s)·(B(s) − a)² + C(s) with A < 0, so the greedy action is
//! B(s) in closed form and the state value is C(s).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{Action, Transition, STATE_DIM};
use crate::nn::{clip_global_norm, ForwardCache, GradientSet, Mlp, OutputHead};
use crate::{Error, Result};

/// Margin keeping A strictly negative.
pub const A_OFFSET: f64 = 1e-6;
/// Smallest admissible magnitude of the adaptive action bound, rad/s².
pub const BOUND_FLOOR: f64 = 0.01;

pub const A_HIDDEN: usize = 100;
pub const C_HIDDEN: usize = 100;
pub const B_HIDDEN: usize = 150;

/// How the scaled preliminary action is combined with the adaptive bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// `clamp(pre·sen, −m, m)`
    #[default]
    Symmetric,
    /// `max(pre·sen, m)`, the one-sided form.
    LiteralMax,
}

impl BoundMode {
    pub fn name(self) -> &'static str {
        match self {
            BoundMode::Symmetric => "symmetric",
            BoundMode::LiteralMax => "literal_max",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "symmetric" => Some(BoundMode::Symmetric),
            "literal_max" => Some(BoundMode::LiteralMax),
            _ => None,
        }
    }
}

/// Which branch of the bound produced B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundBranch {
    Interior,
    Upper,
    Lower,
}

/// Intermediates of the B head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BParts {
    /// Preliminary yaw acceleration.
    pub pre: f64,
    /// Sensitivity factor (> 0).
    pub sen: f64,
    /// Adaptive bound magnitude (>= [`BOUND_FLOOR`]).
    pub bound: f64,
    pub value: f64,
    pub branch: BoundBranch,
}

/// Names of the five networks, in checkpoint order.
pub const NET_NAMES: [&str; 5] = ["A", "C", "B_pre", "B_sen", "B_max"];

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticQ {
    pub a: Mlp,
    pub c: Mlp,
    pub b_pre: Mlp,
    pub b_sen: Mlp,
    pub b_max: Mlp,
    pub bound_mode: BoundMode,
}

pub(crate) fn with_flag(s: &[f64; STATE_DIM], terminal: bool) -> [f64; STATE_DIM + 1] {
    let mut x = [0.0; STATE_DIM + 1];
    x[..STATE_DIM].copy_from_slice(s);
    x[STATE_DIM] = if terminal { 1.0 } else { 0.0 };
    x
}

/// Layer sizes and heads of the five networks, in [`NET_NAMES`] order.
pub fn architecture() -> [(Vec<usize>, OutputHead); 5] {
    [
        (vec![STATE_DIM, A_HIDDEN, 1], OutputHead::NegSoftplus),
        (vec![STATE_DIM + 1, C_HIDDEN, 1], OutputHead::Linear),
        (vec![STATE_DIM, B_HIDDEN, 1], OutputHead::Linear),
        (vec![STATE_DIM, B_HIDDEN, 1], OutputHead::PosSoftplus),
        (vec![STATE_DIM, B_HIDDEN, 1], OutputHead::PosSoftplus),
    ]
}

impl QuadraticQ {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, bound_mode: BoundMode) -> Result<Self> {
        let [a, c, pre, sen, max] = architecture();
        Ok(Self {
            a: Mlp::new(&a.0, a.1, rng)?,
            c: Mlp::new(&c.0, c.1, rng)?,
            b_pre: Mlp::new(&pre.0, pre.1, rng)?,
            b_sen: Mlp::new(&sen.0, sen.1, rng)?,
            b_max: Mlp::new(&max.0, max.1, rng)?,
            bound_mode,
        })
    }

    pub fn from_nets(nets: [Mlp; 5], bound_mode: BoundMode) -> Result<Self> {
        for (net, (sizes, head)) in nets.iter().zip(architecture()) {
            if net.layer_sizes() != sizes || net.head() != head {
                return Err(Error::ShapeMismatch);
            }
        }
        let [a, c, b_pre, b_sen, b_max] = nets;
        Ok(Self {
            a,
            c,
            b_pre,
            b_sen,
            b_max,
            bound_mode,
        })
    }

    pub fn nets(&self) -> [&Mlp; 5] {
        [&self.a, &self.c, &self.b_pre, &self.b_sen, &self.b_max]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp; 5] {
        [
            &mut self.a,
            &mut self.c,
            &mut self.b_pre,
            &mut self.b_sen,
            &mut self.b_max,
        ]
    }

    /// A(s) ≤ −1e-6.
    pub fn a_coeff(&self, s: &[f64; STATE_DIM]) -> f64 {
        self.a.forward(s).expect("state dimension") - A_OFFSET
    }

    fn combine(&self, pre: f64, sen: f64, bound: f64) -> (f64, BoundBranch) {
        let v = pre * sen;
        match self.bound_mode {
            BoundMode::Symmetric if v > bound => (bound, BoundBranch::Upper),
            BoundMode::Symmetric if v < -bound => (-bound, BoundBranch::Lower),
            BoundMode::Symmetric => (v, BoundBranch::Interior),
            BoundMode::LiteralMax if v >= bound => (v, BoundBranch::Interior),
            BoundMode::LiteralMax => (bound, BoundBranch::Upper),
        }
    }

    pub fn compose_b(&self, s: &[f64; STATE_DIM]) -> BParts {
        let pre = self.b_pre.forward(s).expect("state dimension");
        let sen = self.b_sen.forward(s).expect("state dimension");
        let bound = self.b_max.forward(s).expect("state dimension") + BOUND_FLOOR;
        let (value, branch) = self.combine(pre, sen, bound);
        BParts {
            pre,
            sen,
            bound,
            value,
            branch,
        }
    }

    /// C(s ⊕ terminal): the maximum of Q over actions.
    pub fn state_value(&self, s: &[f64; STATE_DIM], terminal: bool) -> f64 {
        self.c.forward(&with_flag(s, terminal)).expect("state dimension")
    }

    pub fn q_value(&self, s: &[f64; STATE_DIM], a: f64, terminal: bool) -> f64 {
        let d = self.compose_b(s).value - a;
        self.a_coeff(s) * d * d + self.state_value(s, terminal)
    }

    /// argmaxₐ Q(s, a) = B(s), limited to the admissible action range.
    pub fn greedy_action(&self, s: &[f64; STATE_DIM]) -> Action {
        Action::new(self.compose_b(s).value)
    }

    /// Greedy action plus Gaussian noise of standard deviation `sigma`.
    pub fn explore_action<R: Rng + ?Sized>(&self, s: &[f64; STATE_DIM], sigma: f64, rng: &mut R) -> Action {
        let greedy = self.compose_b(s).value;
        if sigma == 0.0 {
            return Action::new(greedy);
        }
        let noise: f64 = rng.sample(StandardNormal);
        Action::new(greedy + sigma * noise)
    }

    /// Hard copy of every parameter of `online`.
    pub fn sync_from(&mut self, online: &QuadraticQ) {
        self.clone_from(online);
    }
}

/// Bootstrapped target: `r` for terminal transitions, otherwise
/// `r + γ·C_target(s′)`, the maximum of the target Q over actions.
pub fn td_target(target: &QuadraticQ, r: f64, s_next: &[f64; STATE_DIM], terminal: bool, gamma: f64) -> f64 {
    if terminal {
        r
    } else {
        r + gamma * target.state_value(s_next, false)
    }
}

/// Gradient sets for the five networks, in [`NET_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct QGradients {
    pub sets: [GradientSet; 5],
}

impl QGradients {
    pub fn zeros(q: &QuadraticQ) -> Self {
        Self {
            sets: q.nets().map(Mlp::zero_gradients),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.sets.iter().flat_map(GradientSet::flat).collect()
    }
}

/// Reusable forward caches for the five networks.
#[derive(Debug, Default)]
pub struct LossWorkspace {
    caches: [ForwardCache; 5],
}

/// Mean squared TD error over `batch` against precomputed `targets`, with
/// exact gradients with respect to every online parameter.
pub fn loss_and_gradients(
    q: &QuadraticQ,
    batch: &[&Transition],
    targets: &[f64],
    ws: &mut LossWorkspace,
) -> (f64, QGradients) {
    assert_eq!(batch.len(), targets.len());
    let mut grads = QGradients::zeros(q);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let [ca, cc, cp, cs, cm] = &mut ws.caches;
    for (t, &y) in batch.iter().zip(targets) {
        let s = t.s.normalized();
        let a_raw = q.a.forward_cached(&s, ca).expect("state dimension");
        let a_coeff = a_raw - A_OFFSET;
        let c = q.c.forward_cached(&with_flag(&s, t.terminal), cc).expect("state dimension");
        let pre = q.b_pre.forward_cached(&s, cp).expect("state dimension");
        let sen = q.b_sen.forward_cached(&s, cs).expect("state dimension");
        let bound = q.b_max.forward_cached(&s, cm).expect("state dimension") + BOUND_FLOOR;
        let (b, branch) = q.combine(pre, sen, bound);

        let d = b - t.a.yaw_accel();
        let err = a_coeff * d * d + c - y;
        loss += err * err / n;

        let dq = 2.0 * err / n;
        let db = dq * 2.0 * a_coeff * d;
        let [ga, gc, gp, gs, gm] = &mut grads.sets;
        q.a.backward(ca, dq * d * d, ga, false);
        q.c.backward(cc, dq, gc, false);
        match branch {
            BoundBranch::Interior => {
                q.b_pre.backward(cp, db * sen, gp, false);
                q.b_sen.backward(cs, db * pre, gs, false);
            }
            BoundBranch::Upper => {
                q.b_max.backward(cm, db, gm, false);
            }
            BoundBranch::Lower => {
                q.b_max.backward(cm, -db, gm, false);
            }
        }
    }
    (loss, grads)
}

/// Gradient-descent hyperparameters for one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub gamma: f64,
    pub alpha: f64,
    /// Joint gradient norm limit across all five networks.
    pub max_grad_norm: f64,
}

/// One TD update of `online` on `batch`; returns the loss before the update.
pub fn train_step(
    online: &mut QuadraticQ,
    target: &QuadraticQ,
    batch: &[&Transition],
    params: &UpdateParams,
    ws: &mut LossWorkspace,
) -> Result<f64> {
    let targets: Vec<f64> = batch
        .iter()
        .map(|t| td_target(target, t.r, &t.s_next.normalized(), t.terminal, params.gamma))
        .collect();
    let (loss, mut grads) = loss_and_gradients(online, batch, &targets, ws);
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: format!("TD loss ({loss})"),
        });
    }
    {
        let [g0, g1, g2, g3, g4] = &mut grads.sets;
        clip_global_norm(&mut [g0, g1, g2, g3, g4], params.max_grad_norm);
    }
    if let Some(bad) = grads.sets.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: format!("gradient of network {}", NET_NAMES[bad]),
        });
    }
    for (net, g) in online.nets_mut().into_iter().zip(&grads.sets) {
        net.sgd_step(g, params.alpha)?;
    }
    Ok(loss)
}
