//! Central finite-difference gradient checker (f64 mode).
//!
//! The analytic path and the numeric path share only the graph-building
//! closure; the checker owns its own f64 copies of the parameters so
//! perturbations never round through f32.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::binding::Binding;
use super::param::ParamStore;
use super::tape::{NodeId, Tape};

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_tensor: Vec<TensorCheck>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error with a floor: near-zero gradients are measured absolutely
/// against floor * tol, which keeps central-difference truncation noise from
/// producing false failures.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2)
}

/// Check ∂loss/∂θ for every trainable tensor against central differences.
///
/// `build` must deterministically rebuild the same loss graph from the given
/// binding. At most `max_coords` coordinates per tensor are probed (all of
/// them when the tensor is small), chosen by the seeded RNG.
pub fn finite_diff_check<F>(
    store: &ParamStore,
    build: F,
    eps: f64,
    max_coords: usize,
    seed: u64,
) -> GradCheckReport
where
    F: Fn(&mut Tape<f64>, &Binding) -> NodeId,
{
    let base: Vec<Vec<f64>> = store
        .iter()
        .map(|p| p.values.iter().map(|&v| v as f64).collect())
        .collect();

    let eval = |values: &[Vec<f64>]| -> f64 {
        let mut tape = Tape::new();
        let binding = Binding::bind_values(store, values, &mut tape);
        let loss = build(&mut tape, &binding);
        tape.value(loss).item()
    };

    // analytic gradients
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new();
        let binding = Binding::bind_values(store, &base, &mut tape);
        let loss = build(&mut tape, &binding);
        tape.backward(loss).expect("gradcheck backward");
        store
            .ids()
            .map(|id| tape.grad(binding.node(id)).data.clone())
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_tensor = Vec::new();
    let mut overall: f64 = 0.0;
    let mut values = base.clone();
    for id in store.ids() {
        let p = store.get(id);
        if !p.trainable {
            continue;
        }
        let n = p.numel();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            (0..max_coords).map(|_| rng.gen_range(0..n)).collect()
        };
        let mut worst: f64 = 0.0;
        for &c in &coords {
            let orig = values[id][c];
            values[id][c] = orig + eps;
            let fp = eval(&values);
            values[id][c] = orig - eps;
            let fm = eval(&values);
            values[id][c] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            worst = worst.max(rel_err(analytic[id][c], numeric));
        }
        overall = overall.max(worst);
        per_tensor.push(TensorCheck {
            name: p.name.clone(),
            max_rel_err: worst,
            coords_checked: coords.len(),
        });
    }

    GradCheckReport { per_tensor, max_rel_err: overall }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::param::{ParamGroup, ParameterTensor};
    use crate::nn::tensor::Mat;

    fn store_with(values: &[f32]) -> ParamStore {
        let mut s = ParamStore::new();
        let mut p = ParameterTensor::new("x", 1, values.len(), ParamGroup::Other);
        p.values.copy_from_slice(values);
        s.add(p);
        s
    }

    #[test]
    fn linear_function_error_is_machine_level() {
        let s = store_with(&[0.3, -1.2, 2.0]);
        let report = finite_diff_check(
            &s,
            |tape, b| {
                let x = b.node(0);
                let c = tape.leaf(Mat::row_vec(vec![2.0, -1.0, 0.5]));
                let prod = tape.mul_elem(x, c);
                tape.sum_all(prod)
            },
            1e-3,
            16,
            1,
        );
        assert!(report.max_rel_err < 1e-9, "{report:?}");
    }

    #[test]
    fn quadratic_function_error_below_1e6() {
        let s = store_with(&[0.7, -0.4, 1.1, 0.2]);
        let report = finite_diff_check(
            &s,
            |tape, b| {
                let x = b.node(0);
                let sq = tape.mul_elem(x, x);
                tape.sum_all(sq)
            },
            1e-3,
            16,
            2,
        );
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn nonlinear_chain_passes_at_1e4() {
        let s = store_with(&[0.5, -0.8, 0.1, 1.4, -0.3]);
        let report = finite_diff_check(
            &s,
            |tape, b| {
                let x = b.node(0);
                let t = tape.tanh(x);
                let gl = tape.gelu(t);
                let sm = tape.softmax_rows(gl);
                let sq = tape.mul_elem(sm, gl);
                tape.sum_all(sq)
            },
            1e-3,
            16,
            3,
        );
        assert!(report.max_rel_err < 1e-4, "{report:?}");
    }
}
