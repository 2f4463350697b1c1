use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore};

/// When to shrink the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayPolicy {
    /// Decay after every epoch whose dev perplexity is not a new best.
    OnPlateau,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_policy: DecayPolicy,
    pub best_dev: Option<f64>,
}

impl Default for OptimizerState {
    fn default() -> Self {
        OptimizerState {
            learning_rate: 1.0,
            decay_factor: 0.8,
            decay_policy: DecayPolicy::OnPlateau,
            best_dev: None,
        }
    }
}

impl OptimizerState {
    pub fn new(learning_rate: f64) -> Self {
        OptimizerState {
            learning_rate,
            ..Self::default()
        }
    }

    /// Records a dev perplexity. Returns `true` when it is a new best;
    /// otherwise the learning rate decays under [`DecayPolicy::OnPlateau`].
    pub fn observe_dev(&mut self, perplexity: f64) -> bool {
        let improved = self.best_dev.map_or(true, |b| perplexity < b);
        if improved {
            self.best_dev = Some(perplexity);
        } else {
            self.decay();
        }
        improved
    }

    pub fn decay(&mut self) {
        if self.decay_policy == DecayPolicy::OnPlateau {
            self.learning_rate *= self.decay_factor;
        }
    }
}

/// Global-norm clipping. Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store
        .iter()
        .filter_map(|p| p.tensor.grad.as_ref())
        .flatten()
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        store.scale_grads(max_norm / norm);
    }
    norm
}

/// `p ← p − lr · g` for every trainable parameter, then clears gradients.
/// Parameters are left untouched if any gradient is non-finite.
pub fn sgd_update(store: &mut ParamStore, learning_rate: f64) -> Result<(), NnError> {
    for p in store.iter() {
        if let Some(g) = &p.tensor.grad {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
    }
    for p in store.iter_mut() {
        if !p.trainable {
            continue;
        }
        if let Some(g) = &p.tensor.grad {
            for (v, d) in p.tensor.values.iter_mut().zip(g) {
                *v -= learning_rate * d;
            }
        }
    }
    store.zero_grad();
    Ok(())
}
