//! Central finite-difference verification of recorded backward rules.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub delta: f64,
    /// Coordinates sampled per parameter; `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
    /// Denominator floor for the relative error.
    pub floor: f64,
    /// A coordinate whose left and right one-sided slopes differ by more than
    /// `kink_tol * max(1, |slope|)` sits on a non-differentiable point (for
    /// example a max-pool tie) and is excluded.
    pub kink_tol: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            max_coords_per_param: Some(32),
            seed: 0,
            floor: 1e-6,
            kink_tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let v = g.value(out);
    if v.len() != 1 {
        return Err(Error::invalid("grad_check function must return a scalar"));
    }
    Ok(v.data()[0])
}

/// Compares analytic gradients of the scalar `f` against central differences
/// for every trainable parameter in `store`. Parameter values are restored
/// before returning.
pub fn grad_check<F>(store: &mut ParamStore, f: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let analytic = g.backward(out)?;
    let f0 = g.value(out).data()[0];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport::default();
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    for id in ids {
        let n = store.value(id).len();
        let grad = analytic
            .get(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; n]);
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = store.value(id).data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + opts.delta;
            let fp = eval(store, &f);
            store.get_mut(id).value.data_mut()[i] = orig - opts.delta;
            let fm = eval(store, &f);
            store.get_mut(id).value.data_mut()[i] = orig;
            let (fp, fm) = (fp?, fm?);

            let numeric = (fp - fm) / (2.0 * opts.delta);
            let right = (fp - f0) / opts.delta;
            let left = (f0 - fm) / opts.delta;
            if (right - left).abs() > opts.kink_tol * numeric.abs().max(1.0) {
                report.excluded += 1;
                continue;
            }
            let a = grad[i];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.get(id).name.clone(), i));
            }
        }
    }
    Ok(report)
}
