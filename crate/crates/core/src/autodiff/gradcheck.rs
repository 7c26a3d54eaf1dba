use super::params::{Gradients, ParamId, ParamSet};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst component.
    pub worst: Option<(String, usize)>,
    pub components: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks every component of every parameter in `params`. `build` records a
/// scalar-valued graph over the parameters.
pub fn grad_check<F>(params: &ParamSet, build: F, epsilon: f64) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Tape<'a>, &'a ParamSet) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Contract(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let out = build(&mut tape, p)?;
        scalar_output(&tape, out)
    };

    let analytic = {
        let mut tape = Tape::new();
        let out = build(&mut tape, params)?;
        scalar_output(&tape, out)?;
        tape.backward(out)?
    };

    compare_gradients(params, &analytic, eval, epsilon)
}

/// Compares `analytic` against central differences of `eval` for every
/// component of `params`. Parameters absent from `analytic` count as having
/// zero gradient.
pub fn compare_gradients<F>(
    params: &ParamSet,
    analytic: &Gradients,
    eval: F,
    epsilon: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamSet) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Contract(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        components: 0,
    };
    for id in params.ids() {
        let n = params.get(id).len();
        for k in 0..n {
            let numeric = central_difference(&mut probe, id, k, epsilon, &eval)?;
            let a = analytic.get(id).map(|g| g.data()[k]).unwrap_or(0.0);
            let err = relative_error(a, numeric);
            report.components += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((params.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}

fn scalar_output(tape: &Tape<'_>, out: Var) -> Result<f64> {
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::Contract(format!(
            "gradient check needs a scalar function, got shape {:?}",
            v.shape()
        )));
    }
    Ok(v.data()[0])
}

fn central_difference(
    probe: &mut ParamSet,
    id: ParamId,
    k: usize,
    eps: f64,
    eval: &impl Fn(&ParamSet) -> Result<f64>,
) -> Result<f64> {
    let original = probe.get(id).data()[k];
    probe.get_mut(id).data_mut()[k] = original + eps;
    let plus = eval(probe)?;
    probe.get_mut(id).data_mut()[k] = original - eps;
    let minus = eval(probe)?;
    probe.get_mut(id).data_mut()[k] = original;
    Ok((plus - minus) / (2.0 * eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::NumArray;

    #[test]
    fn linear_function_has_only_roundoff_error() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", NumArray::vector(vec![0.5, -2.0, 3.25]));
        let r = grad_check(
            &ps,
            |t, p| {
                let wv = t.param(p, w);
                let c = t.constant(NumArray::vector(vec![1.5, 0.25, -4.0]));
                t.dot(wv, c)
            },
            1e-5,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-8, "{r:?}");
        assert_eq!(r.components, 3);
    }

    #[test]
    fn non_scalar_output_is_a_contract_error() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", NumArray::vector(vec![0.5, -2.0]));
        let r = grad_check(&ps, |t, p| Ok(t.param(p, w)), 1e-5);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn epsilon_range_enforced() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", NumArray::scalar(1.0));
        for eps in [1e-9, 1e-2] {
            let r = grad_check(&ps, |t, p| Ok(t.param(p, w)), eps);
            assert!(matches!(r, Err(Error::Contract(_))));
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
