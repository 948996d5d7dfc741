//! Alternating optimisation: an Adam step on the strikes with the weights
//! frozen, then an exact least-squares refit of the weights with the new
//! strikes frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

use super::adam::{AdamParams, AdamState};
use super::network::{grad_strikes, init_strikes, loss, node_kinds, payoff_matrix};
use super::ols::fit_weights_ols;
use super::CompressedPortfolio;

/// Which observations the per-iteration weight refit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefitScope {
    /// The batch drawn for the strike step.
    Batch,
    /// The whole training set.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig<T> {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams<T>,
    /// Threshold on the change of the batch mean loss between iterations.
    pub stop_tol: T,
    /// Consecutive sub-threshold changes needed to stop.
    pub stop_patience: usize,
    pub early_stop: bool,
    pub refit: RefitScope,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainingConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 1000,
            adam: AdamParams::default(),
            stop_tol: T::lit(1e-8),
            stop_patience: 10,
            early_stop: true,
            refit: RefitScope::Batch,
            seed: 0,
        }
    }
}

impl<T: Scalar> TrainingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let AdamParams {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.adam;
        if self.epochs == 0 {
            return invalid("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return invalid("batch size must be at least 1");
        }
        if !(learning_rate > T::zero()) {
            return invalid("learning rate must be positive");
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b > T::zero() && b < T::one()) {
                return invalid(format!("{name} must lie in (0, 1)"));
            }
        }
        if !(epsilon > T::zero()) {
            return invalid("epsilon must be positive");
        }
        if !(self.stop_tol >= T::zero()) {
            return invalid("stop tolerance must be non-negative");
        }
        Ok(())
    }

    pub fn iterations_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

/// Input data for one horizon's network.
#[derive(Debug, Clone, Copy)]
pub struct TrainingProblem<'a, T> {
    pub spots: &'a [T],
    pub targets: &'a [T],
    /// Held-out `(spots, targets)` used for the per-epoch error trace.
    pub validation: Option<(&'a [T], &'a [T])>,
    pub n_calls: usize,
    pub n_puts: usize,
    pub initial_spot: T,
    pub horizon: T,
    pub tenor: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub mae: T,
    pub strikes: Vec<T>,
    pub weights: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace<T> {
    pub records: Vec<EpochRecord<T>>,
    pub iterations: usize,
    pub stopped_early: bool,
}

fn mean_abs_error<T: Scalar>(
    spots: &[T],
    targets: &[T],
    strikes: &[T],
    weights: &[T],
    kinds: &[crate::pricing::OptionKind],
) -> Result<T> {
    let x = payoff_matrix(spots, strikes, kinds)?;
    let fitted = x.mul_vec(weights);
    let mut acc = CompensatedSum::new();
    for (y, p) in targets.iter().zip(fitted) {
        acc.add((*y - p).abs());
    }
    Ok(acc.value() / T::from_usize_lossy(targets.len()))
}

/// Trains one compressed portfolio against `problem.targets`.
pub fn train<T: Scalar>(
    problem: &TrainingProblem<'_, T>,
    cfg: &TrainingConfig<T>,
) -> Result<(CompressedPortfolio<T>, TrainingTrace<T>)> {
    cfg.validate()?;
    let TrainingProblem { spots, targets, .. } = *problem;
    let n = spots.len();
    let m = problem.n_calls + problem.n_puts;
    if targets.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {n} spots",
            targets.len()
        )));
    }
    if n < m {
        return invalid(format!("need at least as many paths as nodes ({n} < {m})"));
    }
    if cfg.batch_size > n {
        return invalid(format!("batch size {} exceeds training set of {n}", cfg.batch_size));
    }
    if let Some((vs, vy)) = problem.validation {
        if vs.len() != vy.len() || vs.is_empty() {
            return Err(Error::DimensionMismatch(
                "validation spots and targets differ in length".into(),
            ));
        }
    }

    let kinds = node_kinds(problem.n_calls, problem.n_puts);
    let mut strikes = init_strikes(problem.n_calls, problem.n_puts, problem.initial_spot)?;
    let mut weights = fit_weights_ols(&payoff_matrix(spots, &strikes, &kinds)?, targets)?.weights;

    let mut adam = AdamState::new(m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_epoch = cfg.iterations_per_epoch(n);
    let bs = cfg.batch_size;
    let mut batch_spots = vec![T::zero(); bs];
    let mut batch_targets = vec![T::zero(); bs];
    let mut trace = TrainingTrace::default();
    let mut prev_mean_loss: Option<T> = None;
    let mut hits = 0usize;
    let (eval_spots, eval_targets) = problem.validation.unwrap_or((spots, targets));

    'epochs: for epoch in 1..=cfg.epochs {
        for _ in 0..per_epoch {
            for b in 0..bs {
                let j = rng.random_range(0..n);
                batch_spots[b] = spots[j];
                batch_targets[b] = targets[j];
            }
            let grad = grad_strikes(&batch_targets, &batch_spots, &strikes, &weights, &kinds)?;
            adam.step(&mut strikes, &grad, &cfg.adam);
            let xb = payoff_matrix(&batch_spots, &strikes, &kinds)?;
            weights = match cfg.refit {
                RefitScope::Batch => fit_weights_ols(&xb, &batch_targets)?.weights,
                RefitScope::Full => fit_weights_ols(&payoff_matrix(spots, &strikes, &kinds)?, targets)?.weights,
            };
            trace.iterations += 1;

            if cfg.early_stop {
                let mean_loss = loss(&batch_targets, &xb, &weights)? / T::from_usize_lossy(bs);
                if let Some(prev) = prev_mean_loss {
                    if (mean_loss - prev).abs() < cfg.stop_tol {
                        hits += 1;
                    } else {
                        hits = 0;
                    }
                }
                prev_mean_loss = Some(mean_loss);
                if hits >= cfg.stop_patience {
                    trace.stopped_early = true;
                    trace.records.push(EpochRecord {
                        epoch,
                        mae: mean_abs_error(eval_spots, eval_targets, &strikes, &weights, &kinds)?,
                        strikes: strikes.clone(),
                        weights: weights.clone(),
                    });
                    break 'epochs;
                }
            }
        }
        trace.records.push(EpochRecord {
            epoch,
            mae: mean_abs_error(eval_spots, eval_targets, &strikes, &weights, &kinds)?,
            strikes: strikes.clone(),
            weights: weights.clone(),
        });
    }

    // deliver the weights that are optimal on the full set for the final strikes
    let weights = fit_weights_ols(&payoff_matrix(spots, &strikes, &kinds)?, targets)?.weights;
    let compressed = CompressedPortfolio::new(strikes, weights, kinds, problem.horizon, problem.tenor)?;
    Ok((compressed, trace))
}
