//! Central finite-difference gradient checking.
//!
//! The numeric side only re-evaluates the forward pass, so it is independent
//! of every backward rule on the tape.

use super::{Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked_entries: usize,
    /// `(input index, flat entry, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Relative error with a floor on the denominator so that entries whose true
/// gradient is ~0 are compared absolutely at the `floor` scale.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Compares reverse-mode gradients of the scalar built by `f` against central
/// differences with step `eps`, for every entry of every input.
pub fn check<F>(inputs: &[Tensor], f: F, eps: f64) -> GradCheckReport
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |values: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).expect("finite scalar loss");

    let mut report = GradCheckReport { max_rel_error: 0.0, checked_entries: 0, worst: None };
    let mut work = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[i].rows(), inputs[i].cols()));
        for k in 0..inputs[i].len() {
            let orig = work[i].data()[k];
            work[i].data_mut()[k] = orig + eps;
            let fp = eval(&work);
            work[i].data_mut()[k] = orig - eps;
            let fm = eval(&work);
            work[i].data_mut()[k] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.data()[k];
            let err = relative_error(a, numeric, DEFAULT_FLOOR);
            report.checked_entries += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((i, k, a, numeric));
                }
            }
        }
    }
    report
}
