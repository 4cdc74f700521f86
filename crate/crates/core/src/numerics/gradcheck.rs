use serde::Serialize;

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use super::NumericsError;

/// One parameter element whose analytic and numeric derivatives disagree.
#[derive(Clone, Debug, Serialize)]
pub struct GradMismatch {
    pub param: usize,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub h: f64,
    pub tol: f64,
    pub checked: usize,
    /// Elements skipped because the central difference straddled a kink.
    pub excluded: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|a - n| / max(1, |a|, |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares reverse-mode gradients of `f` against central differences for
/// every element of every parameter.
///
/// `f` receives a fresh graph and one leaf per entry of `params` and must
/// return a scalar node. Elements whose `±h` evaluations take a different
/// branch at a relu/clamp/floor than the unperturbed evaluation are excluded
/// from the comparison.
pub fn grad_check<F, E>(f: F, params: &[Tensor<f64>], h: f64, tol: f64) -> Result<GradCheckReport, E>
where
    F: for<'a> Fn(&mut Graph<'a, f64>, &[NodeId]) -> Result<NodeId, E>,
    E: From<NumericsError>,
{
    let (analytic, base_sig) = {
        let mut g = Graph::new();
        let ids = params.iter().map(|p| g.param(p)).collect::<Result<Vec<_>, _>>()?;
        let root = f(&mut g, &ids)?;
        let grads = g.backward(root)?;
        (ids.iter().map(|id| grads.get(*id)).collect::<Vec<_>>(), g.kink_signature())
    };

    let eval = |work: &[Tensor<f64>]| -> Result<(f64, u64), E> {
        let mut g = Graph::new();
        let ids = work.iter().map(|p| g.param(p)).collect::<Result<Vec<_>, _>>()?;
        let root = f(&mut g, &ids)?;
        let v = g.value(root);
        if v.len() != 1 {
            return Err(NumericsError::NonScalarRoot(v.shape().to_vec()).into());
        }
        Ok((v.data()[0], g.kink_signature()))
    };

    let mut report = GradCheckReport {
        h,
        tol,
        checked: 0,
        excluded: 0,
        max_rel_err: 0.0,
        failures: Vec::new(),
    };
    let mut work = params.to_vec();
    for (pi, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = work[pi].data()[j];
            work[pi].data_mut()[j] = orig + h;
            let (plus, sig_plus) = eval(&work)?;
            work[pi].data_mut()[j] = orig - h;
            let (minus, sig_minus) = eval(&work)?;
            work[pi].data_mut()[j] = orig;
            if sig_plus != base_sig || sig_minus != base_sig {
                report.excluded += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[j];
            let rel_err = relative_error(a, numeric);
            report.checked += 1;
            report.max_rel_err = report.max_rel_err.max(rel_err);
            if rel_err > tol {
                report.failures.push(GradMismatch {
                    param: pi,
                    element: j,
                    analytic: a,
                    numeric,
                    rel_err,
                });
            }
        }
    }
    Ok(report)
}
