//! Gradients through chains of inner SGD updates.
//!
//! An episode exposes a support loss and a query loss as functions of
//! parameter nodes. [`grad_through_updates`] runs the inner loop
//! `theta_j = theta_{j-1} - alpha * grad(support_loss)` for a fixed number
//! of steps, evaluates the query loss at the adapted parameters, and
//! differentiates it back to the *initial* parameters. In `Full` mode the
//! inner gradients are recorded on the tape, so the result is the exact
//! second-order meta-gradient; `FirstOrder` detaches the updates and
//! returns the query gradient at the adapted point.

use crate::autodiff::params::{ParamNodes, ParamSet};
use crate::autodiff::tape::{NodeId, Tape};
use crate::error::{Error, Result};

/// Whether meta-gradients differentiate through the inner updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MamlMode {
    #[default]
    Full,
    FirstOrder,
}

/// One meta-learning episode, seen by the differentiation engine as a
/// pair of loss builders over parameter nodes.
pub trait InnerLoopTask {
    /// Record the support loss at `params`.
    fn support_loss(&self, tape: &mut Tape, params: &ParamNodes) -> Result<NodeId>;

    /// Record the query loss. Query-side computation uses `params` (the
    /// post-update weights); support-derived state such as prototypes is
    /// rebuilt at `support_params` (the weights of the last support
    /// evaluation).
    fn query_loss(
        &self,
        tape: &mut Tape,
        params: &ParamNodes,
        support_params: &ParamNodes,
    ) -> Result<NodeId>;
}

fn updated_params(
    tape: &mut Tape,
    cur: &ParamNodes,
    grads: &[Option<NodeId>],
    alpha: f64,
) -> Result<ParamNodes> {
    let mut entries = Vec::with_capacity(cur.len());
    for ((name, id), g) in cur.iter().zip(grads) {
        let new = match g {
            Some(gid) => tape.lincomb(&[(1.0, id), (-alpha, *gid)])?,
            None => id,
        };
        entries.push((name.to_string(), new));
    }
    Ok(ParamNodes::from_pairs(entries))
}

fn diverged(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Diverged {
        step,
        source: Box::new(e),
    }
}

/// Run `steps >= 1` inner updates of the support loss starting at
/// `theta0`, evaluate the query loss at the adapted parameters, and
/// return `(query_loss, d(query_loss)/d(theta0))` in `Full` mode, or the
/// query gradient at the adapted parameters in `FirstOrder` mode.
pub fn grad_through_updates(
    task: &dyn InnerLoopTask,
    theta0: &ParamSet,
    alpha: f64,
    steps: usize,
    mode: MamlMode,
) -> Result<(f64, ParamSet)> {
    if steps == 0 {
        return Err(Error::Config("inner update chain needs steps >= 1".into()));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Config(format!("bad inner learning rate {alpha}")));
    }
    match mode {
        MamlMode::Full => {
            let mut tape = Tape::new();
            let origin = theta0.insert_as_params(&mut tape);
            let mut prev = origin.clone();
            let mut cur = origin.clone();
            for step in 1..=steps {
                let ls = task
                    .support_loss(&mut tape, &cur)
                    .map_err(diverged(step))?;
                let grads = tape.grad_nodes(ls, &cur.ids()).map_err(diverged(step))?;
                prev = cur;
                cur = updated_params(&mut tape, &prev, &grads, alpha)?;
            }
            let q = task.query_loss(&mut tape, &cur, &prev)?;
            let meta = tape.grad(q, &origin.ids())?;
            let query_loss = tape.value(q).scalar_value();
            let mut grad_set = theta0.zeros_like();
            let flat: Vec<f64> = meta.iter().flat_map(|t| t.data().to_vec()).collect();
            grad_set = grad_set.unflatten(&flat)?;
            Ok((query_loss, grad_set))
        }
        MamlMode::FirstOrder => {
            let (adapted, before_last) = adapt(task, theta0, alpha, steps)?;
            let mut tape = Tape::new();
            let cur = adapted.insert_as_params(&mut tape);
            let prev = before_last.insert_as_params(&mut tape);
            let q = task.query_loss(&mut tape, &cur, &prev)?;
            let meta = tape.grad(q, &cur.ids())?;
            let query_loss = tape.value(q).scalar_value();
            let flat: Vec<f64> = meta.iter().flat_map(|t| t.data().to_vec()).collect();
            let grad_set = theta0.zeros_like().unflatten(&flat)?;
            Ok((query_loss, grad_set))
        }
    }
}

/// Value-level inner adaptation: plain SGD on the support loss, no
/// meta-gradient bookkeeping. Returns the adapted parameters and those of
/// the step before (where support-side state like prototypes lives).
/// With `steps == 0` both are `theta0`.
pub fn adapt(
    task: &dyn InnerLoopTask,
    theta0: &ParamSet,
    alpha: f64,
    steps: usize,
) -> Result<(ParamSet, ParamSet)> {
    let mut cur = theta0.clone();
    let mut prev = theta0.clone();
    for step in 1..=steps {
        let mut tape = Tape::new();
        let nodes = cur.insert_as_params(&mut tape);
        let ls = task
            .support_loss(&mut tape, &nodes)
            .map_err(diverged(step))?;
        let grads = tape.grad(ls, &nodes.ids()).map_err(diverged(step))?;
        prev = cur.clone();
        let flat: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
        let gset = theta0.zeros_like().unflatten(&flat)?;
        cur.axpy(-alpha, &gset)?;
    }
    Ok((cur, prev))
}

/// Query-loss value at fixed parameters (no adaptation), used by the
/// zero-step ablation path.
pub fn query_loss_at(task: &dyn InnerLoopTask, theta: &ParamSet) -> Result<(f64, ParamSet)> {
    let mut tape = Tape::new();
    let nodes = theta.insert_as_params(&mut tape);
    let q = task.query_loss(&mut tape, &nodes, &nodes)?;
    let grads = tape.grad(q, &nodes.ids())?;
    let flat: Vec<f64> = grads.iter().flat_map(|t| t.data().to_vec()).collect();
    let grad_set = theta.zeros_like().unflatten(&flat)?;
    Ok((tape.value(q).scalar_value(), grad_set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{finite_diff_grad, rel_error};
    use crate::autodiff::tensor::Tensor;

    /// Scalar toy: support (theta - a)^2, query (theta - b)^2.
    struct Quadratic {
        a: f64,
        b: f64,
    }

    impl Quadratic {
        fn loss(&self, tape: &mut Tape, theta: NodeId, target: f64) -> Result<NodeId> {
            let t = tape.constant(Tensor::scalar(-target));
            let d = tape.add(theta, t)?;
            tape.pow(d, 2.0)
        }
    }

    impl InnerLoopTask for Quadratic {
        fn support_loss(&self, tape: &mut Tape, params: &ParamNodes) -> Result<NodeId> {
            self.loss(tape, params.get("theta").unwrap(), self.a)
        }
        fn query_loss(
            &self,
            tape: &mut Tape,
            params: &ParamNodes,
            _support_params: &ParamNodes,
        ) -> Result<NodeId> {
            self.loss(tape, params.get("theta").unwrap(), self.b)
        }
    }

    fn theta_set(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("theta", Tensor::scalar(v)).unwrap();
        p
    }

    #[test]
    fn one_step_meta_gradient_matches_closed_form() {
        let task = Quadratic { a: 1.5, b: -0.5 };
        let (theta0, alpha) = (0.7, 0.1);
        let (q, g) =
            grad_through_updates(&task, &theta_set(theta0), alpha, 1, MamlMode::Full).unwrap();
        let theta1 = (1.0 - 2.0 * alpha) * theta0 + 2.0 * alpha * task.a;
        assert!((q - (theta1 - task.b) * (theta1 - task.b)).abs() < 1e-12);
        let expect = 2.0 * (1.0 - 2.0 * alpha) * ((1.0 - 2.0 * alpha) * theta0
            + 2.0 * alpha * task.a
            - task.b);
        assert!(
            (g.get("theta").unwrap().scalar_value() - expect).abs() < 1e-12,
            "got {} want {}",
            g.get("theta").unwrap().scalar_value(),
            expect
        );
    }

    #[test]
    fn zero_inner_rate_reduces_to_plain_query_gradient() {
        let task = Quadratic { a: 3.0, b: 1.0 };
        let theta0 = 0.25;
        let (_, g) =
            grad_through_updates(&task, &theta_set(theta0), 0.0, 1, MamlMode::Full).unwrap();
        assert!((g.get("theta").unwrap().scalar_value() - 2.0 * (theta0 - task.b)).abs() < 1e-12);
    }

    #[test]
    fn full_meta_gradient_matches_finite_differences_of_the_procedure() {
        let task = Quadratic { a: -0.8, b: 2.0 };
        let (alpha, steps) = (0.15, 3);
        let (_, g) =
            grad_through_updates(&task, &theta_set(0.4), alpha, steps, MamlMode::Full).unwrap();
        let procedure = |x: &[f64]| {
            let (adapted, prev) = adapt(&task, &theta_set(x[0]), alpha, steps).unwrap();
            let mut tape = Tape::new();
            let cur = adapted.insert_as_params(&mut tape);
            let pn = prev.insert_as_params(&mut tape);
            let q = task.query_loss(&mut tape, &cur, &pn).unwrap();
            tape.value(q).scalar_value()
        };
        let fd = finite_diff_grad(procedure, &[0.4], 1e-6);
        let err = rel_error(&[g.get("theta").unwrap().scalar_value()], &fd, 1e-8);
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn first_order_equals_full_when_support_loss_is_linear() {
        // Support loss linear in theta: its gradient is constant, so the
        // inner update chain has no curvature to differentiate through.
        struct Linear;
        impl InnerLoopTask for Linear {
            fn support_loss(&self, tape: &mut Tape, params: &ParamNodes) -> Result<NodeId> {
                let theta = params.get("theta").unwrap();
                tape.lincomb(&[(3.0, theta)])
            }
            fn query_loss(
                &self,
                tape: &mut Tape,
                params: &ParamNodes,
                _s: &ParamNodes,
            ) -> Result<NodeId> {
                let theta = params.get("theta").unwrap();
                let sq = tape.mul(theta, theta)?;
                tape.lincomb(&[(0.5, sq)])
            }
        }
        let (qf, gf) =
            grad_through_updates(&Linear, &theta_set(1.2), 0.05, 1, MamlMode::Full).unwrap();
        let (qo, go) =
            grad_through_updates(&Linear, &theta_set(1.2), 0.05, 1, MamlMode::FirstOrder).unwrap();
        assert_eq!(qf.to_bits(), qo.to_bits());
        assert!(
            (gf.get("theta").unwrap().scalar_value() - go.get("theta").unwrap().scalar_value())
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn divergence_reports_the_failing_step() {
        // Support loss exp(theta^2) with a huge rate blows up quickly.
        struct Explosive;
        impl InnerLoopTask for Explosive {
            fn support_loss(&self, tape: &mut Tape, params: &ParamNodes) -> Result<NodeId> {
                let theta = params.get("theta").unwrap();
                let sq = tape.mul(theta, theta)?;
                tape.exp(sq)
            }
            fn query_loss(
                &self,
                tape: &mut Tape,
                params: &ParamNodes,
                _s: &ParamNodes,
            ) -> Result<NodeId> {
                let theta = params.get("theta").unwrap();
                tape.mul(theta, theta)
            }
        }
        let err = grad_through_updates(&Explosive, &theta_set(30.0), 1e6, 4, MamlMode::Full)
            .unwrap_err();
        match err {
            Error::Diverged { step, .. } => assert!(step >= 1 && step <= 4),
            other => panic!("expected divergence, got {other}"),
        }
    }

    #[test]
    fn zero_steps_is_rejected() {
        let task = Quadratic { a: 0.0, b: 0.0 };
        assert!(grad_through_updates(&task, &theta_set(0.0), 0.1, 0, MamlMode::Full).is_err());
    }
}
