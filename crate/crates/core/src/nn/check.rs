use std::rc::Rc;

use rand::Rng;

use super::tape::{Tape, Var};
use super::ParamStore;

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences for every trainable parameter entry. Returns the largest
/// relative error.
pub fn grad_check<F>(f: F, store: &mut ParamStore, eps: f64) -> f64
where
    F: Fn(&mut Tape, &ParamStore) -> Var,
{
    store.zero_grad();
    let mut tape = Tape::new();
    let out = f(&mut tape, store);
    tape.backward(out, store);
    let analytic: Vec<Vec<f64>> = store
        .iter()
        .map(|p| p.tensor.grad.clone().unwrap_or_else(|| vec![0.0; p.tensor.len()]))
        .collect();
    store.zero_grad();

    let eval = |store: &ParamStore| {
        let mut tape = Tape::new();
        let out = f(&mut tape, store);
        tape.scalar(out)
    };
    let mut worst = 0.0_f64;
    for pi in 0..store.len() {
        let id = super::ParamId(pi);
        if !store.get(id).trainable {
            continue;
        }
        for k in 0..store.get(id).tensor.len() {
            let orig = store.get(id).tensor.values[k];
            store.get_mut(id).tensor.values[k] = orig + eps;
            let plus = eval(store);
            store.get_mut(id).tensor.values[k] = orig - eps;
            let minus = eval(store);
            store.get_mut(id).tensor.values[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[pi][k], numeric));
        }
    }
    worst
}

/// Inverted dropout mask: kept entries are scaled by `1 / (1 − p)`.
pub fn dropout_mask<R: Rng>(len: usize, p: f64, rng: &mut R) -> Rc<Vec<f64>> {
    let keep = 1.0 - p;
    Rc::new(
        (0..len)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect(),
    )
}

/// Applies dropout when `p > 0`; identity otherwise.
pub fn dropout<R: Rng>(tape: &mut Tape, x: Var, p: f64, rng: Option<&mut R>) -> Var {
    match rng {
        Some(rng) if p > 0.0 => {
            let (r, c) = tape.dims(x);
            let mask = dropout_mask(r * c, p, rng);
            tape.mask_mul(x, mask)
        }
        _ => x,
    }
}
