//! Central-difference gradient verification.

use super::tensor::{ParamSet, Tensor};
use super::NnError;

/// One checked parameter entry (the worst one is kept for diagnostics).
#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    pub param: String,
    /// Flat index within the parameter tensor.
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a gradient check over every entry of every parameter.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub checked: usize,
    /// Entries where both the analytic and numeric values sit at or below
    /// the 1e-8 floor. A central difference only resolves gradients down to
    /// its rounding noise, roughly `eps * |f| / (2h)`; below the floor both
    /// sides are indistinguishable from zero, so such entries are tallied
    /// here instead of contributing noise to `max_rel_err`.
    pub below_resolution: usize,
    pub worst: Option<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Compares analytic gradients against central finite differences.
///
/// `scalar_fn(params, with_grad)` must rebuild the scalar computation from
/// the current parameter values and return its value; when `with_grad` is
/// true it must additionally run the backward pass so analytic gradients
/// accumulate into `params`. The closure is called many times at perturbed
/// parameter values, so it must be a deterministic function of the parameter
/// values — any internal randomness (dropout masks, tie-break shuffles) has
/// to be frozen or re-seeded identically on every call.
///
/// For each entry the numeric estimate is `(f(θ+h) − f(θ−h)) / 2h` and the
/// relative error is `|a − n| / max(|a|, |n|, 1e-8)`.
///
/// Entries where both sides are at or below the 1e-8 denominator floor are
/// excluded from `max_rel_err` (see `GradCheckReport::below_resolution`):
/// a direction the loss provably does not depend on — e.g. a uniform score
/// shift under a pairwise loss — still produces a numeric estimate of order
/// `eps * |f| / (2h)` from forward-pass rounding alone, and dividing that
/// noise by the floor would mistake it for a gradient error.
///
/// Intended for 64-bit precision with dropout disabled; `h` must lie in
/// `[1e-7, 1e-4]`.
pub fn grad_check<SF>(
    params: &mut ParamSet<f64>,
    mut scalar_fn: SF,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NnError>
where
    SF: FnMut(&mut ParamSet<f64>, bool) -> Result<f64, NnError>,
{
    assert!(
        (1e-7..=1e-4).contains(&h),
        "step size h = {h} outside [1e-7, 1e-4]"
    );

    params.zero_grads();
    let base = scalar_fn(params, true)?;
    if !base.is_finite() {
        return Err(NnError::NonFiniteLoss {
            what: format!("grad_check base value = {base}"),
        });
    }
    let analytic: Vec<Tensor<f64>> = params.ids().map(|id| params.get(id).grad.clone()).collect();
    params.zero_grads();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        tolerance,
        checked: 0,
        below_resolution: 0,
        worst: None,
    };
    const FLOOR: f64 = 1e-8;

    let ids: Vec<_> = params.ids().collect();
    for (pi, id) in ids.iter().enumerate() {
        let entries = params.get(*id).value.len();
        for e in 0..entries {
            let orig = params.get(*id).value.data()[e];

            params.get_mut(*id).value.data_mut()[e] = orig + h;
            let f_plus = scalar_fn(params, false)?;
            params.get_mut(*id).value.data_mut()[e] = orig - h;
            let f_minus = scalar_fn(params, false)?;
            params.get_mut(*id).value.data_mut()[e] = orig;

            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(NnError::NonFiniteLoss {
                    what: format!(
                        "grad_check perturbation of {}[{e}]: f(+h)={f_plus}, f(-h)={f_minus}",
                        params.get(*id).name
                    ),
                });
            }

            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = analytic[pi].data()[e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            report.checked += 1;
            if a.abs() <= FLOOR && numeric.abs() <= FLOOR {
                report.below_resolution += 1;
                continue;
            }
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some(GradCheckEntry {
                    param: params.get(*id).name.clone(),
                    index: e,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Tape, Tensor};

    /// Central differences are exact (to rounding) for a linear function.
    #[test]
    fn linear_function_is_exact() {
        let mut params = ParamSet::<f64>::new();
        let x = params.register("x", Tensor::from_vec(3, 1, vec![0.5, -1.25, 2.0]));
        let report = grad_check(
            &mut params,
            |p, with_grad| {
                let mut t = Tape::new();
                let xv = t.param(p, x);
                let w = t.constant(Tensor::from_vec(1, 3, vec![2.0, -3.0, 0.5]));
                let y = t.matmul(w, xv)?;
                let value = t.value(y).item();
                if with_grad {
                    t.backward(y, p)?;
                }
                Ok(value)
            },
            1e-5,
            1e-10,
        )
        .unwrap();
        assert!(report.passed(), "linear check failed: {report:?}");
        assert_eq!(report.checked, 3);
    }

    #[test]
    fn non_finite_value_is_reported() {
        let mut params = ParamSet::<f64>::new();
        // log of a parameter that perturbation pushes negative.
        let x = params.register("x", Tensor::scalar(1e-6));
        let err = grad_check(
            &mut params,
            |p, with_grad| {
                let mut t = Tape::new();
                let xv = t.param(p, x);
                let y = t.log(xv);
                let s = t.reduce_sum(y);
                let value = t.value(s).item();
                if with_grad {
                    t.backward(s, p)?;
                }
                Ok(value)
            },
            1e-4,
            1e-4,
        )
        .unwrap_err();
        assert!(matches!(err, NnError::NonFiniteLoss { .. }));
    }
}
