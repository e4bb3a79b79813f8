//! Training procedures: plain empirical risk, adversarial training on
//! attacked batches, a mixed clean/attacked variant, feature-alignment
//! regularizers on the logits, and transport-alignment training that
//! penalizes the debiased entropic divergence between the clean and
//! attacked logit clouds.

use crate::attack::{derive_seed, pgd, AttackBudget};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::nn::{self, Batch, Classifier, GradientTape};
use crate::ot::{sinkhorn_divergence_value_grads, SinkhornSettings};
use crate::par::map_indexed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefenseKind {
    Standard,
    Madry,
    Mixed,
    Atda,
    Sat,
}

impl DefenseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DefenseKind::Standard => "standard",
            DefenseKind::Madry => "madry",
            DefenseKind::Mixed => "mixed",
            DefenseKind::Atda => "atda",
            DefenseKind::Sat => "sat",
        }
    }
}

/// Step schedule: `initial`, multiplied by `decay_factor` at each epoch
/// listed in `decay_epochs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay_factor: f64,
    pub decay_epochs: Vec<usize>,
}

impl LrSchedule {
    pub fn constant(initial: f64) -> Self {
        LrSchedule { initial, decay_factor: 1.0, decay_epochs: Vec::new() }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        let hits = self.decay_epochs.iter().filter(|&&e| e <= epoch).count() as i32;
        self.initial * self.decay_factor.powi(hits)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefenseConfig {
    pub kind: DefenseKind,
    /// Entropic regularization of the transport alignment term. Required
    /// for `sat`, rejected otherwise.
    pub sigma: Option<f64>,
    /// Weight on the transport alignment term.
    #[serde(default = "default_sat_weight")]
    pub sat_weight: f64,
    /// Training attack budget, in raw input units. Must be positive for
    /// every kind except `standard`.
    pub eps_train: f64,
    #[serde(default = "default_attack_steps")]
    pub attack_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub weight_decay: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

fn default_sat_weight() -> f64 {
    1.0
}

fn default_attack_steps() -> usize {
    7
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.sigma) {
            (DefenseKind::Sat, None) => {
                return Err(Error::InvalidInput("field sigma is required for kind sat".into()))
            }
            (DefenseKind::Sat, Some(s)) if !(s > 0.0) || !s.is_finite() => {
                return Err(Error::InvalidInput("field sigma must be positive and finite".into()))
            }
            (k, Some(_)) if k != DefenseKind::Sat => {
                return Err(Error::InvalidInput(format!(
                    "field sigma is only valid for kind sat, not {}",
                    k.as_str()
                )))
            }
            _ => {}
        }
        if self.kind != DefenseKind::Standard && !(self.eps_train > 0.0) {
            return Err(Error::InvalidInput(format!(
                "field eps_train must be positive for kind {}",
                self.kind.as_str()
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput("fields epochs and batch_size must be >= 1".into()));
        }
        if !(self.lr.initial > 0.0) || !(self.lr.decay_factor > 0.0) {
            return Err(Error::InvalidInput(
                "fields lr.initial and lr.decay_factor must be positive".into(),
            ));
        }
        if self.weight_decay < 0.0 || !self.sat_weight.is_finite() || self.sat_weight < 0.0 {
            return Err(Error::InvalidInput(
                "fields weight_decay and sat_weight must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLosses {
    pub classification: f64,
    pub alignment: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: DefenseKind,
    pub seed: u64,
    pub epoch_losses: Vec<EpochLosses>,
    pub wall_clock_seconds: f64,
}

/// Mean L1 distance between the per-coordinate means of two logit sets,
/// with its gradients with respect to both sets.
pub fn mmd_mean_loss(
    orig: &[Vec<f64>],
    adv: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (b, k) = check_clouds(orig, adv)?;
    let mean = |rows: &[Vec<f64>]| -> Vec<f64> {
        (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / b as f64).collect()
    };
    let (mo, ma) = (mean(orig), mean(adv));
    let loss = mo.iter().zip(&ma).map(|(o, a)| (o - a).abs()).sum::<f64>() / k as f64;
    // Subgradient convention: 0 at an exact tie.
    let sign = |d: f64| {
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let row: Vec<f64> = mo
        .iter()
        .zip(&ma)
        .map(|(o, a)| sign(o - a) / (k as f64 * b as f64))
        .collect();
    let d_orig = vec![row.clone(); b];
    let d_adv = vec![row.iter().map(|v| -v).collect::<Vec<f64>>(); b];
    Ok((loss, d_orig, d_adv))
}

/// Squared Frobenius distance between logit covariances, scaled by
/// 1/(4 K^2), with gradients. Covariances use the 1/(B-1) convention.
pub fn coral_loss(
    orig: &[Vec<f64>],
    adv: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (b, k) = check_clouds(orig, adv)?;
    if b < 2 {
        return Err(Error::InvalidInput("covariance alignment needs batches of >= 2".into()));
    }
    let center = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mean: Vec<f64> =
            (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / b as f64).collect();
        rows.iter().map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect()
    };
    let cov = |xc: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut c = vec![vec![0.0; k]; k];
        for row in xc {
            for i in 0..k {
                for j in 0..k {
                    c[i][j] += row[i] * row[j];
                }
            }
        }
        for r in c.iter_mut() {
            for v in r.iter_mut() {
                *v /= (b - 1) as f64;
            }
        }
        c
    };
    let (xo, xa) = (center(orig), center(adv));
    let (co, ca) = (cov(&xo), cov(&xa));
    let mut diff = vec![vec![0.0; k]; k];
    let mut loss = 0.0;
    for i in 0..k {
        for j in 0..k {
            diff[i][j] = co[i][j] - ca[i][j];
            loss += diff[i][j] * diff[i][j];
        }
    }
    loss /= 4.0 * (k * k) as f64;
    // d loss / dX = Xc * diff / (K^2 (B-1)); the centered product already
    // has zero column means, so no extra centering is needed.
    let scale = 1.0 / ((k * k) as f64 * (b - 1) as f64);
    let mat_grad = |xc: &[Vec<f64>], sign: f64| -> Vec<Vec<f64>> {
        xc.iter()
            .map(|row| {
                (0..k)
                    .map(|j| sign * scale * (0..k).map(|i| row[i] * diff[i][j]).sum::<f64>())
                    .collect()
            })
            .collect()
    };
    Ok((loss, mat_grad(&xo, 1.0), mat_grad(&xa, -1.0)))
}

/// Debiased entropic divergence between the two logit clouds viewed as
/// uniform discrete measures, with gradients on both clouds.
pub fn sat_alignment(
    orig: &[Vec<f64>],
    adv: &[Vec<f64>],
    sigma: f64,
    settings: SinkhornSettings,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    check_clouds(orig, adv)?;
    let mo = DiscreteMeasure::uniform(orig.to_vec())?;
    let ma = DiscreteMeasure::uniform(adv.to_vec())?;
    let (loss, d_orig, d_adv) = sinkhorn_divergence_value_grads(&mo, &ma, sigma, settings)?;
    Ok((loss, d_orig, d_adv))
}

fn check_clouds(orig: &[Vec<f64>], adv: &[Vec<f64>]) -> Result<(usize, usize)> {
    if orig.is_empty() || orig.len() != adv.len() {
        return Err(Error::InvalidInput("logit clouds must be nonempty and equal-sized".into()));
    }
    let k = orig[0].len();
    if orig.iter().chain(adv).any(|r| r.len() != k) {
        return Err(Error::InvalidInput("logit rows have mismatched widths".into()));
    }
    Ok((orig.len(), k))
}

pub fn accuracy(model: &Classifier, inputs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::InvalidInput("inputs and labels must match and be nonempty".into()));
    }
    let mut correct = 0usize;
    for (x, &y) in inputs.iter().zip(labels) {
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Train a fresh classifier on `data` under the configured procedure.
/// Fully deterministic given the config seed, including the attacks used
/// to build adversarial batches.
pub fn train(config: &DefenseConfig, data: &Dataset) -> Result<(Classifier, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let n = data.train_inputs.len();
    if n == 0 || n != data.train_labels.len() {
        return Err(Error::InvalidInput("dataset has no usable training split".into()));
    }
    let mut model = Classifier::mlp(
        data.feature_dim(),
        &config.hidden,
        data.num_classes,
        derive_seed(config.seed, 0),
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let budget = if config.kind == DefenseKind::Standard {
        None
    } else {
        Some(AttackBudget::bounded(config.eps_train, config.attack_steps)?)
    };
    let settings = SinkhornSettings::default();
    let mut attack_counter: u64 = 0;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.lr.at(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let mut class_sum = 0.0;
        let mut align_sum = 0.0;
        let mut batches = 0usize;

        for chunk in order.chunks(config.batch_size) {
            // Skip a trailing partial batch unless it is the only one.
            if chunk.len() < config.batch_size && batches > 0 {
                continue;
            }
            let inputs: Vec<Vec<f64>> =
                chunk.iter().map(|&i| data.train_inputs[i].clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.train_labels[i]).collect();
            let batch = Batch::new(inputs, labels)?;

            let (tape, class_loss, align_loss) = match config.kind {
                DefenseKind::Standard => {
                    let logits = model.forward(&batch.inputs)?;
                    let loss = nn::cross_entropy(&logits, &batch.labels)?;
                    (nn::backward_ce(&model, &batch, None)?, loss, 0.0)
                }
                _ => {
                    let budget = budget.as_ref().unwrap();
                    let base = attack_counter;
                    let adv_inputs: Vec<Vec<f64>> = {
                        let outcomes = map_indexed(batch.len(), |i| {
                            pgd(
                                &model,
                                &batch.inputs[i],
                                batch.labels[i],
                                budget,
                                derive_seed(config.seed, 2 + base + i as u64),
                            )
                        });
                        outcomes
                            .into_iter()
                            .map(|o| o.map(|out| out.adversarial))
                            .collect::<Result<_>>()?
                    };
                    attack_counter += batch.len() as u64;
                    let adv = Batch::new(adv_inputs, batch.labels.clone())?;
                    step_with_adversaries(&model, config, &batch, &adv, settings)?
                }
            };
            nn::sgd_step(&mut model, &tape, lr, config.weight_decay)?;
            class_sum += class_loss;
            align_sum += align_loss;
            batches += 1;
        }
        epoch_losses.push(EpochLosses {
            classification: class_sum / batches as f64,
            alignment: align_sum / batches as f64,
        });
    }

    let report = TrainReport {
        kind: config.kind,
        seed: config.seed,
        epoch_losses,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

fn step_with_adversaries(
    model: &Classifier,
    config: &DefenseConfig,
    clean: &Batch,
    adv: &Batch,
    settings: SinkhornSettings,
) -> Result<(GradientTape, f64, f64)> {
    match config.kind {
        DefenseKind::Madry => {
            let logits = model.forward(&adv.inputs)?;
            let loss = nn::cross_entropy(&logits, &adv.labels)?;
            Ok((nn::backward_ce(model, adv, None)?, loss, 0.0))
        }
        DefenseKind::Mixed | DefenseKind::Atda => {
            let logits_o = model.forward(&clean.inputs)?;
            let logits_a = model.forward(&adv.inputs)?;
            let ce_o = nn::cross_entropy(&logits_o, &clean.labels)?;
            let ce_a = nn::cross_entropy(&logits_a, &adv.labels)?;
            // Mean cross entropy over the concatenated 2B samples.
            let halve = |g: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                g.into_iter().map(|r| r.into_iter().map(|v| v * 0.5).collect()).collect()
            };
            let mut d_o = halve(nn::cross_entropy_logit_grad(&logits_o, &clean.labels)?);
            let mut d_a = halve(nn::cross_entropy_logit_grad(&logits_a, &adv.labels)?);
            let mut align = 0.0;
            if config.kind == DefenseKind::Atda {
                let (mmd, mo, ma) = mmd_mean_loss(&logits_o, &logits_a)?;
                let (coral, co, ca) = coral_loss(&logits_o, &logits_a)?;
                align = mmd + coral;
                add_into(&mut d_o, &mo);
                add_into(&mut d_o, &co);
                add_into(&mut d_a, &ma);
                add_into(&mut d_a, &ca);
            }
            let mut tape = nn::backward(model, &clean.inputs, &d_o)?;
            tape.add(&nn::backward(model, &adv.inputs, &d_a)?);
            Ok((tape, 0.5 * (ce_o + ce_a), align))
        }
        DefenseKind::Sat => {
            let sigma = config.sigma.unwrap();
            let logits_o = model.forward(&clean.inputs)?;
            let logits_a = model.forward(&adv.inputs)?;
            let ce = nn::cross_entropy(&logits_a, &adv.labels)?;
            let mut d_a = nn::cross_entropy_logit_grad(&logits_a, &adv.labels)?;
            // The alignment gradient needs converged marginals. At small
            // sigma the default iteration budget occasionally falls short,
            // so escalate the cap instead of aborting training; stubborn
            // batches are rare and the solver is cheap at this size.
            let mut result = sat_alignment(&logits_o, &logits_a, sigma, settings);
            for mult in [8, 64, 512] {
                match result {
                    Err(Error::NumericalFailure(_)) => {
                        let relaxed =
                            SinkhornSettings { max_iters: mult * settings.max_iters, ..settings };
                        result = sat_alignment(&logits_o, &logits_a, sigma, relaxed);
                    }
                    _ => break,
                }
            }
            let (div, mut d_o, grad_a) = result?;
            for row in d_o.iter_mut() {
                for v in row.iter_mut() {
                    *v *= config.sat_weight;
                }
            }
            for (dst, src) in d_a.iter_mut().zip(&grad_a) {
                for (x, y) in dst.iter_mut().zip(src) {
                    *x += config.sat_weight * y;
                }
            }
            let mut tape = nn::backward(model, &adv.inputs, &d_a)?;
            tape.add(&nn::backward(model, &clean.inputs, &d_o)?);
            Ok((tape, ce, config.sat_weight * div))
        }
        DefenseKind::Standard => unreachable!("standard training has no adversarial step"),
    }
}

fn add_into(dst: &mut [Vec<f64>], src: &[Vec<f64>]) {
    for (d, s) in dst.iter_mut().zip(src) {
        for (x, y) in d.iter_mut().zip(s) {
            *x += y;
        }
    }
}
