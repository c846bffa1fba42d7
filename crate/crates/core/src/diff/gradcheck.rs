//! Central finite-difference gradient checking.
//!
//! The numerical side only ever evaluates forward passes, so it is
//! independent of every backward rule it is compared against.

use crate::error::Result;
use crate::tensor::Array;

use super::{Graph, Var};

/// Denominator floor for the relative error, so that gradients that are
/// zero on both sides do not divide by zero.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (input, element) of the worst disagreement.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Smallest distance to a non-differentiable point seen in the graph.
    pub kink_margin: f64,
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// Compares the analytic gradient of the scalar built by `f` against central
/// differences with the given `step`, for every element of every input.
pub fn check<F>(inputs: &[Array<f64>], step: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |arrays: &[Array<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = arrays.iter().map(|a| g.constant(a.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).data()[0])
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|a| g.param(a.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let kink_margin = g.kink_margin();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        kink_margin,
    };
    let mut work = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = g.grad(*v).map(|a| a.data().to_vec()).unwrap_or_else(|| vec![0.0; inputs[i].len()]);
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + step;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - step;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = rel_err(analytic[j], numeric);
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = (i, j);
                report.analytic = analytic[j];
                report.numeric = numeric;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
