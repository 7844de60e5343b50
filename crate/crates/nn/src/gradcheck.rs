use rand::Rng;

use crate::param::Module;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst probe.
    pub worst: Option<(String, usize)>,
    pub probes: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares analytic gradients with central differences at random entries.
///
/// `f(model, backward)` must return the scalar loss and, when `backward`
/// is true, accumulate its gradient into the model's parameters.
pub fn grad_check<T, M, F, R>(model: &mut M, mut f: F, h: f64, probes: usize, rng: &mut R) -> GradCheckReport
where
    T: Real,
    M: Module<T>,
    F: FnMut(&mut M, bool) -> T,
    R: Rng + ?Sized,
{
    model.zero_grad();
    f(model, true);
    let analytic: Vec<Vec<T>> = model.params().iter().map(|p| p.grad.clone()).collect();
    model.zero_grad();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        probes: 0,
    };
    let nonempty: Vec<usize> = (0..analytic.len()).filter(|&k| !analytic[k].is_empty()).collect();
    if nonempty.is_empty() {
        return report;
    }
    for _ in 0..probes {
        let k = nonempty[rng.gen_range(0..nonempty.len())];
        let i = rng.gen_range(0..analytic[k].len());
        let original = model.params()[k].value[i];
        model.params_mut()[k].value[i] = original + T::c(h);
        let plus = f(model, false).f64();
        model.params_mut()[k].value[i] = original - T::c(h);
        let minus = f(model, false).f64();
        model.params_mut()[k].value[i] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[k][i].f64(), numeric);
        report.probes += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((model.params()[k].name.clone(), i));
        }
    }
    model.zero_grad();
    report
}
