//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::ParamStore;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many parameter elements, drawn uniformly. `None` checks all.
    pub max_elements: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_elements: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Relative error `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of the scalar computed by `f` against
/// central differences `(f(w + eps) - f(w - eps)) / 2 eps` on trainable elements.
pub fn grad_check<F>(params: &ParamStore, f: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let grads = {
        let mut g = Graph::new(params);
        let loss = f(&mut g)?;
        g.backward(loss)?
    };

    let mut elements = Vec::new();
    for (id, p) in params.iter() {
        if p.trainable {
            elements.extend((0..p.value.len()).map(|i| (id, i)));
        }
    }
    if let Some(max) = opts.max_elements {
        if elements.len() > max {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut picked = sample(&mut rng, elements.len(), max).into_vec();
            picked.sort_unstable();
            elements = picked.into_iter().map(|i| elements[i]).collect();
        }
    }

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        Ok(g.value(loss).item())
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: elements.len(),
    };
    for (id, i) in elements {
        let orig = params.value(id).data()[i];
        probe.get_mut(id).value.data_mut()[i] = orig + opts.eps;
        let plus = eval(&probe)?;
        probe.get_mut(id).value.data_mut()[i] = orig - opts.eps;
        let minus = eval(&probe)?;
        probe.get_mut(id).value.data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * opts.eps);
        let analytic = grads.get(id).map_or(0.0, |g| g.data()[i]);
        let err = relative_error(analytic, numeric);
        if err > report.max_rel_error || report.worst_param.is_empty() {
            report.max_rel_error = err;
            report.worst_param = params.get(id).name.clone();
            report.worst_index = i;
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
