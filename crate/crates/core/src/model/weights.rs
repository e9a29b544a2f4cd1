use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::NetworkPlan;
use crate::Error;

/// Weights for one layer, row-major over `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
    /// Per-weight prune flags, `true` meaning the weight was removed and must
    /// stay exactly zero through any further transformation.
    pub pruned: Option<Vec<bool>>,
}

impl WeightTensor {
    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, data: vec![0.0; n], pruned: None }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Force pruned positions to exact zero.
    pub fn enforce_prune_mask(&mut self) {
        if let Some(mask) = &self.pruned {
            for (v, &gone) in self.data.iter_mut().zip(mask) {
                if gone {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }
}

/// All weight tensors of a network, one per weight-bearing row of the plan,
/// in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBank {
    pub tensors: Vec<WeightTensor>,
}

impl WeightBank {
    /// All-zero bank shaped for `plan`.
    pub fn zeros(plan: &NetworkPlan) -> Self {
        let tensors = plan
            .weight_rows()
            .into_iter()
            .map(|i| WeightTensor::zeros(plan.rows[i].spec.weight_dims().expect("weight row")))
            .collect();
        Self { tensors }
    }

    /// Deterministic synthetic weights: zero-mean uniform scaled by fan-in,
    /// so activations keep a stable magnitude through the stack and stay in
    /// comfortable range for the 8-bit formats.
    pub fn synth(plan: &NetworkPlan, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bank = Self::zeros(plan);
        for (tensor, row) in bank.tensors.iter_mut().zip(plan.weight_rows()) {
            let spec = plan.rows[row].spec;
            let fan_in = spec.in_channels().max(1) * spec.effective_kernel().unwrap_or(1).max(1);
            let bound = (3.0 / fan_in as f64).sqrt();
            for v in tensor.data.iter_mut() {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        bank
    }

    /// Check that this bank matches the plan's weight rows.
    pub fn validate_for(&self, plan: &NetworkPlan) -> Result<(), Error> {
        let rows = plan.weight_rows();
        if rows.len() != self.tensors.len() {
            return Err(Error::Weights(format!(
                "bank has {} tensors, plan expects {}",
                self.tensors.len(),
                rows.len()
            )));
        }
        for (tensor, row) in self.tensors.iter().zip(rows) {
            let want = plan.rows[row].spec.weight_dims().expect("weight row");
            if tensor.dims != want {
                return Err(Error::Weights(format!(
                    "row {row} ({}) expects dims {want:?}, bank has {:?}",
                    plan.rows[row].describe(),
                    tensor.dims
                )));
            }
            if tensor.data.len() != tensor.dims.iter().product::<usize>() {
                return Err(Error::Weights(format!(
                    "row {row}: data length {} does not match dims {:?}",
                    tensor.data.len(),
                    tensor.dims
                )));
            }
            if let Some(mask) = &tensor.pruned {
                if mask.len() != tensor.data.len() {
                    return Err(Error::Weights(format!(
                        "row {row}: prune mask length {} does not match data length {}",
                        mask.len(),
                        tensor.data.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total scalar weights.
    pub fn weight_count(&self) -> u64 {
        self.tensors.iter().map(|t| t.len() as u64).sum()
    }

    /// Fraction of weights that are exactly zero.
    pub fn zero_fraction(&self) -> f64 {
        let total = self.weight_count();
        if total == 0 {
            return 0.0;
        }
        let nonzero: u64 = self.tensors.iter().map(|t| t.nonzero_count() as u64).sum();
        (total - nonzero) as f64 / total as f64
    }
}
