//! Finite-difference checks of every network and of the full TD loss.

use rand::Rng;

use crate::dynamics::{Action, StateVector, Transition};
use crate::nn::{central_spreads, gradient_check, relative_error, softplus, Mlp, OutputHead};
use crate::qlearn::quadratic::{architecture, with_flag, BoundBranch, A_OFFSET, BOUND_FLOOR, NET_NAMES};
use crate::qlearn::{loss_and_gradients, BoundMode, LossWorkspace, QuadraticQ};
use crate::{stream_rng, Error, Result, Stream};

pub const NET_TOLERANCE: f64 = 1e-5;
pub const LOSS_TOLERANCE: f64 = 1e-4;
pub const NET_STEP: f64 = 1e-5;
pub const LOSS_STEP: f64 = 1e-6;
pub const LOSS_BATCH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Worst relative error per network, in [`NET_NAMES`] order.
    pub net_errors: Vec<(&'static str, &'static str, f64)>,
    /// Worst relative error of the batch-loss gradient.
    pub loss_error: f64,
    pub points: usize,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.net_errors.iter().all(|&(_, _, e)| e < NET_TOLERANCE) && self.loss_error < LOSS_TOLERANCE
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (name, head, err) in &self.net_errors {
            let verdict = if *err < NET_TOLERANCE { "ok" } else { "FAIL" };
            out.push_str(&format!("net {name:<6} ({head:<12}) max rel err {err:.3e}  {verdict}\n"));
        }
        let verdict = if self.loss_error < LOSS_TOLERANCE { "ok" } else { "FAIL" };
        out.push_str(&format!(
            "batch TD loss                max rel err {:.3e}  {verdict}\n",
            self.loss_error
        ));
        out
    }
}

/// A randomly initialized network with random biases as well, so the check
/// does not only see the zero-bias initialization.
fn random_net<R: Rng + ?Sized>(sizes: &[usize], head: OutputHead, rng: &mut R) -> Result<Mlp> {
    let mut net = Mlp::new(sizes, head, rng)?;
    for layer in net.layers_mut() {
        for b in &mut layer.biases {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    Ok(net)
}

fn random_state<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    StateVector::new(
        rng.random_range(15.0..35.0),
        rng.random_range(-2.0..1.5),
        rng.random_range(0.0..1000.0),
        rng.random_range(0.0..11.25),
        rng.random_range(-0.3..0.3),
        rng.random_range(0..3),
        3.75,
        0.0,
    )
}

/// Random batch whose B values sit at least `margin` inside the clamp.
pub fn interior_batch<R: Rng + ?Sized>(q: &QuadraticQ, rng: &mut R, margin: f64) -> Vec<Transition> {
    let mut batch = Vec::with_capacity(LOSS_BATCH);
    while batch.len() < LOSS_BATCH {
        let s = random_state(rng);
        let parts = q.compose_b(&s.normalized());
        if parts.branch != BoundBranch::Interior || parts.bound - (parts.pre * parts.sen).abs() < margin {
            continue;
        }
        batch.push(Transition {
            s,
            a: Action::new(rng.random_range(-0.5..0.5)),
            r: rng.random_range(-1.0..0.0),
            s_next: random_state(rng),
            terminal: rng.random_bool(0.3),
        });
    }
    batch
}

pub fn batch_loss(q: &QuadraticQ, batch: &[Transition], targets: &[f64]) -> f64 {
    let n = batch.len() as f64;
    batch
        .iter()
        .zip(targets)
        .map(|(t, y)| {
            let e = q.q_value(&t.s.normalized(), t.a.yaw_accel(), t.terminal) - y;
            e * e / n
        })
        .sum()
}

/// Central differences `(L(p+h) − L(p−h)) / 2h` of the batch loss for
/// every parameter of the five networks, in [`NET_NAMES`] order. Each
/// network's output change comes from [`central_spreads`] and the loss change
/// is assembled as `Σ ΔQ·(e⁺ + e⁻) / n`, so no two nearly equal losses are
/// subtracted. Every state must stay strictly inside the clamp at `p ± h`.
pub fn loss_central_differences(
    q: &QuadraticQ,
    batch: &[Transition],
    targets: &[f64],
    h: f64,
) -> Result<[Vec<f64>; 5]> {
    let mut sums: [Vec<f64>; 5] = std::array::from_fn(|k| vec![0.0; q.nets()[k].param_count()]);
    let n = batch.len() as f64;
    let off_branch = || Error::InvalidParam("loss check left the clamp interior".into());
    for (t, &y) in batch.iter().zip(targets) {
        let s = t.s.normalized();
        let s_flag = with_flag(&s, t.terminal);
        let act = t.a.yaw_accel();
        let coeff = q.a_coeff(&s);
        let c = q.c.forward(&s_flag)?;
        let parts = q.compose_b(&s);
        if parts.branch != BoundBranch::Interior {
            return Err(off_branch());
        }
        let (pre, sen, bound) = (parts.pre, parts.sen, parts.bound);
        let inside = |b: f64, m: f64| if b.abs() < m { Ok(()) } else { Err(off_branch()) };
        let q_at = |coeff: f64, b: f64, c: f64| coeff * (b - act) * (b - act) + c;
        // ΔQ for a change of B from `low` by `step`
        let b_change = |low: f64, step: f64| coeff * step * (2.0 * (low - act) + step);
        let mut add = |k: usize, i: usize, q_low: f64, dq: f64| {
            sums[k][i] += dq * ((q_low - y) + (q_low + dq - y)) / n;
        };

        let (spreads, _) = central_spreads(&q.a, &s, h)?;
        for (i, sp) in spreads.iter().enumerate() {
            let low = -softplus(sp.low) - A_OFFSET;
            let dq = OutputHead::NegSoftplus.difference(sp.low, sp.width) * (pre * sen - act).powi(2);
            add(0, i, q_at(low, pre * sen, c), dq);
        }
        let (spreads, _) = central_spreads(&q.c, &s_flag, h)?;
        for (i, sp) in spreads.iter().enumerate() {
            add(1, i, q_at(coeff, pre * sen, sp.low), sp.width);
        }
        let (spreads, _) = central_spreads(&q.b_pre, &s, h)?;
        for (i, sp) in spreads.iter().enumerate() {
            let (low, step) = (sp.low * sen, sp.width * sen);
            inside(low, bound)?;
            inside(low + step, bound)?;
            add(2, i, q_at(coeff, low, c), b_change(low, step));
        }
        let (spreads, _) = central_spreads(&q.b_sen, &s, h)?;
        for (i, sp) in spreads.iter().enumerate() {
            let low = pre * softplus(sp.low);
            let step = pre * OutputHead::PosSoftplus.difference(sp.low, sp.width);
            inside(low, bound)?;
            inside(low + step, bound)?;
            add(3, i, q_at(coeff, low, c), b_change(low, step));
        }
        let (spreads, _) = central_spreads(&q.b_max, &s, h)?;
        for (i, sp) in spreads.iter().enumerate() {
            inside(pre * sen, softplus(sp.low) + BOUND_FLOOR)?;
            inside(pre * sen, softplus(sp.low + sp.width) + BOUND_FLOOR)?;
            add(4, i, q_at(coeff, pre * sen, c), 0.0);
        }
    }
    for v in sums.iter_mut().flatten() {
        *v /= 2.0 * h;
    }
    Ok(sums)
}

/// Worst relative error between the analytic batch-loss gradient and
/// [`loss_central_differences`]. `per_net` limits how many coordinates of
/// each network are compared (all when `None`); they are drawn uniformly.
pub fn check_loss_gradient<R: Rng + ?Sized>(
    q: &QuadraticQ,
    batch: &[Transition],
    targets: &[f64],
    h: f64,
    per_net: Option<usize>,
    rng: &mut R,
) -> Result<f64> {
    let refs: Vec<&Transition> = batch.iter().collect();
    let (_, grads) = loss_and_gradients(q, &refs, targets, &mut LossWorkspace::default());
    let numeric = loss_central_differences(q, batch, targets, h)?;
    let mut worst = 0.0f64;
    for (k, numeric) in numeric.iter().enumerate() {
        let analytic = grads.sets[k].flat();
        let indices: Vec<usize> = match per_net {
            None => (0..analytic.len()).collect(),
            Some(m) => (0..m).map(|_| rng.random_range(0..analytic.len())).collect(),
        };
        for i in indices {
            worst = worst.max(relative_error(analytic[i], numeric[i]));
        }
    }
    Ok(worst)
}

/// Checks each of the five networks and the composite loss at `points`
/// independent random parameter points.
pub fn run_gradcheck(seed: u64, points: usize, per_net: Option<usize>) -> Result<GradcheckReport> {
    let mut rng = stream_rng(seed, Stream::Diagnostics);
    let mut net_errors = Vec::new();
    for (name, (sizes, head)) in NET_NAMES.iter().zip(architecture()) {
        let mut worst = 0.0f64;
        for _ in 0..points {
            let net = random_net(&sizes, head, &mut rng)?;
            worst = worst.max(gradient_check(&net, 1, NET_STEP, &mut rng)?);
        }
        net_errors.push((*name, head.name(), worst));
    }
    let mut loss_error = 0.0f64;
    for _ in 0..points {
        let q = QuadraticQ::new(&mut rng, BoundMode::Symmetric)?;
        let batch = interior_batch(&q, &mut rng, 1e-3);
        let targets: Vec<f64> = (0..batch.len()).map(|_| rng.random_range(-3.0..0.0)).collect();
        loss_error = loss_error.max(check_loss_gradient(&q, &batch, &targets, LOSS_STEP, per_net, &mut rng)?);
    }
    Ok(GradcheckReport {
        net_errors,
        loss_error,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let report = run_gradcheck(1, 2, Some(20)).unwrap();
        assert!(report.passed(), "{}", report.summary());
        assert_eq!(report.net_errors.len(), 5);
    }

    #[test]
    fn loss_oracle_matches_plain_differences_of_the_loss() {
        let mut rng = stream_rng(3, Stream::Diagnostics);
        for _ in 0..3 {
            let q = QuadraticQ::new(&mut rng, BoundMode::Symmetric).unwrap();
            let batch = interior_batch(&q, &mut rng, 1e-3);
            let targets: Vec<f64> = (0..batch.len()).map(|_| rng.random_range(-3.0..0.0)).collect();
            let oracle = loss_central_differences(&q, &batch, &targets, LOSS_STEP).unwrap();
            let mut probe = q.clone();
            for k in 0..5 {
                for _ in 0..40 {
                    let i = rng.random_range(0..oracle[k].len());
                    let base = *probe.nets_mut()[k].param_mut(i).unwrap();
                    *probe.nets_mut()[k].param_mut(i).unwrap() = base + LOSS_STEP;
                    let plus = batch_loss(&probe, &batch, &targets);
                    *probe.nets_mut()[k].param_mut(i).unwrap() = base - LOSS_STEP;
                    let minus = batch_loss(&probe, &batch, &targets);
                    *probe.nets_mut()[k].param_mut(i).unwrap() = base;
                    let plain = (plus - minus) / (2.0 * LOSS_STEP);
                    // plain differencing of an O(1) loss carries about 1e-9 of noise
                    assert!((plain - oracle[k][i]).abs() < 1e-7, "net {k} index {i}: {plain} vs {}", oracle[k][i]);
                }
            }
        }
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut rng = stream_rng(8, Stream::Diagnostics);
        let q = QuadraticQ::new(&mut rng, BoundMode::Symmetric).unwrap();
        let batch = interior_batch(&q, &mut rng, 1e-3);
        let targets = vec![-1.0; batch.len()];
        let oracle = loss_central_differences(&q, &batch, &targets, LOSS_STEP).unwrap();
        let refs: Vec<&Transition> = batch.iter().collect();
        let (_, grads) = loss_and_gradients(&q, &refs, &targets, &mut LossWorkspace::default());
        let analytic = grads.sets[2].flat();
        let i = (0..analytic.len()).max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs())).unwrap();
        assert!(relative_error(analytic[i], oracle[2][i]) < LOSS_TOLERANCE);
        assert!(relative_error(analytic[i] * (1.0 + 1e-3), oracle[2][i]) > LOSS_TOLERANCE);
    }
}
