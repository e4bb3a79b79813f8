//! Bounded L-infinity PGD and a minimal-perturbation attack that binary
//! searches the PGD budget. Per-sample RNG streams are derived from a
//! global seed and the sample index, so parallel and serial sweeps agree
//! bit for bit.

use crate::error::{Error, Result};
use crate::nn::{self, Batch, Classifier};
use crate::par::map_indexed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bounded-attack parameters. Epsilon is in /255-normalized pixel units.
#[derive(Debug, Clone, Copy)]
pub struct AttackBudget {
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub random_init: bool,
}

impl AttackBudget {
    pub fn new(epsilon: f64, steps: usize, step_size: f64, random_init: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidInput(format!("epsilon {epsilon} outside [0,1]")));
        }
        if steps < 1 {
            return Err(Error::InvalidInput("steps must be >= 1".into()));
        }
        if !(step_size > 0.0) {
            return Err(Error::InvalidInput("step_size must be positive".into()));
        }
        if epsilon > 0.0 && step_size > epsilon {
            return Err(Error::InvalidInput(format!(
                "step_size {step_size} exceeds epsilon {epsilon}"
            )));
        }
        Ok(Self { epsilon, steps, step_size, random_init })
    }

    /// Standard step size: 2.5 * epsilon / steps, capped at epsilon.
    pub fn bounded(epsilon: f64, steps: usize) -> Result<Self> {
        let step = (2.5 * epsilon / steps.max(1) as f64).min(epsilon).max(f64::MIN_POSITIVE);
        Self::new(epsilon, steps, step, true)
    }

    /// Same budget at a different radius, rescaling the step size.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let step = (2.5 * epsilon / self.steps as f64).min(epsilon).max(f64::MIN_POSITIVE);
        Self::new(epsilon, self.steps, step, self.random_init)
    }
}

/// Result of attacking one sample.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub adversarial: Vec<f64>,
    /// Exact L-infinity norm of (adversarial - original); infinity when a
    /// minimal-perturbation search found nothing within its bound.
    pub perturbation_size: f64,
    /// True when the model mislabels the adversarial input.
    pub success: bool,
    /// Gradient evaluations spent.
    pub queries: usize,
}

/// Mix a global seed with a sample index into an independent stream seed.
pub fn derive_seed(global: u64, sample: u64) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = global ^ sample.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn clip(adv: &mut [f64], origin: &[f64], eps: f64) {
    for (a, &o) in adv.iter_mut().zip(origin) {
        *a = a.clamp(o - eps, o + eps).clamp(0.0, 1.0);
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// L-infinity PGD with signed-gradient steps and projection into the
/// epsilon ball intersected with the unit box.
pub fn pgd(
    model: &Classifier,
    x: &[f64],
    y: usize,
    budget: &AttackBudget,
    seed: u64,
) -> Result<AttackOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adv = x.to_vec();
    if budget.random_init && budget.epsilon > 0.0 {
        for a in adv.iter_mut() {
            *a += rng.gen_range(-budget.epsilon..=budget.epsilon);
        }
        clip(&mut adv, x, budget.epsilon);
    }
    let mut queries = 0;
    for _ in 0..budget.steps {
        let batch = Batch::new(vec![adv.clone()], vec![y])?;
        let tape = nn::backward_ce(model, &batch, None)?;
        queries += 1;
        let grad = &tape.input_grads[0];
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure("non-finite input gradient in pgd".into()));
        }
        for (a, g) in adv.iter_mut().zip(grad) {
            *a += budget.step_size * sign(*g);
        }
        clip(&mut adv, x, budget.epsilon);
    }
    let predicted = model.predict(&adv)?;
    Ok(AttackOutcome {
        perturbation_size: linf(&adv, x),
        success: predicted != y,
        adversarial: adv,
        queries,
    })
}

/// Smallest PGD budget within `eps_max` that fools the model, located by
/// binary search to width `resolution`. Every probe reuses the same RNG
/// seed, so the search is over a deterministic function of epsilon.
pub fn min_perturbation(
    model: &Classifier,
    x: &[f64],
    y: usize,
    eps_max: f64,
    resolution: f64,
    template: &AttackBudget,
    seed: u64,
) -> Result<AttackOutcome> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidInput("resolution must be positive".into()));
    }
    if eps_max > 1.0 {
        return Err(Error::InvalidInput("eps_max must be <= 1".into()));
    }
    let probe = |eps: f64| -> Result<AttackOutcome> {
        let budget = if eps > 0.0 {
            template.with_epsilon(eps)?
        } else {
            AttackBudget { epsilon: 0.0, steps: template.steps, ..*template }
        };
        pgd(model, x, y, &budget, seed)
    };

    let mut queries = 0;
    let at_zero = probe(0.0)?;
    queries += at_zero.queries;
    if at_zero.success {
        return Ok(AttackOutcome { queries, ..at_zero });
    }
    let at_max = probe(eps_max)?;
    queries += at_max.queries;
    if !at_max.success {
        return Ok(AttackOutcome {
            adversarial: x.to_vec(),
            perturbation_size: f64::INFINITY,
            success: false,
            queries,
        });
    }
    let mut lo = 0.0;
    let mut hi = eps_max;
    let mut best = at_max;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let out = probe(mid)?;
        queries += out.queries;
        if out.success {
            hi = mid;
            best = out;
        } else {
            lo = mid;
        }
    }
    Ok(AttackOutcome { queries, ..best })
}

/// Run the bounded attack at every budget in `epsilons` over a test set.
/// Parallel across samples; sample `i` uses seed `derive_seed(seed, i)`
/// at every budget, so outputs are ordered and reproducible.
pub fn sweep_bounded(
    model: &Classifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
    epsilons: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<AttackOutcome>)>> {
    check_test_set(inputs, labels)?;
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let outcomes = if eps == 0.0 {
            map_indexed(inputs.len(), |i| {
                let predicted = model.predict(&inputs[i])?;
                Ok(AttackOutcome {
                    adversarial: inputs[i].clone(),
                    perturbation_size: 0.0,
                    success: predicted != labels[i],
                    queries: 0,
                })
            })
        } else {
            let budget = AttackBudget::bounded(eps, steps)?;
            map_indexed(inputs.len(), |i| {
                pgd(model, &inputs[i], labels[i], &budget, derive_seed(seed, i as u64))
            })
        };
        out.push((eps, outcomes.into_iter().collect::<Result<_>>()?));
    }
    Ok(out)
}

/// Minimal-perturbation search over a test set, parallel across samples
/// with per-sample derived seeds.
pub fn sweep_min_perturbation(
    model: &Classifier,
    inputs: &[Vec<f64>],
    labels: &[usize],
    eps_max: f64,
    resolution: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<AttackOutcome>> {
    check_test_set(inputs, labels)?;
    let template = AttackBudget::bounded(eps_max, steps)?;
    map_indexed(inputs.len(), |i| {
        min_perturbation(
            model,
            &inputs[i],
            labels[i],
            eps_max,
            resolution,
            &template,
            derive_seed(seed, i as u64),
        )
    })
    .into_iter()
    .collect()
}

fn check_test_set(inputs: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::InvalidInput("inputs and labels must match and be nonempty".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};

    fn linear_two_class(w: Vec<f64>, bias: Vec<f64>, dim: usize) -> Classifier {
        Classifier {
            input_dim: dim,
            num_classes: 2,
            layers: vec![Layer {
                rows: 2,
                cols: dim,
                weights: w,
                bias,
                activation: Activation::Identity,
            }],
        }
    }

    #[test]
    fn zero_epsilon_returns_original() {
        let m = Classifier::mlp(3, &[4], 2, 1);
        let budget = AttackBudget { epsilon: 0.0, steps: 5, step_size: 0.1, random_init: true };
        let x = vec![0.4, 0.5, 0.6];
        let out = pgd(&m, &x, 0, &budget, 7).unwrap();
        assert_eq!(out.adversarial, x);
        assert_eq!(out.perturbation_size, 0.0);
    }

    #[test]
    fn budget_soundness_over_seeded_runs() {
        let m = Classifier::mlp(4, &[8], 3, 2);
        for run in 0..100u64 {
            let eps = 0.001 + 0.2 * (run as f64 % 10.0) / 10.0;
            let budget = AttackBudget::bounded(eps, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(run);
            let x: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
            let out = pgd(&m, &x, (run % 3) as usize, &budget, derive_seed(99, run)).unwrap();
            let norm: f64 =
                out.adversarial.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(norm <= eps + 1e-12, "run {run}: {norm} > {eps}");
            assert!(out.adversarial.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(out.perturbation_size, norm);
        }
    }

    #[test]
    fn one_step_matches_closed_form() {
        // Fixed linear model, no random init, one step of size epsilon:
        // x_adv = clip(x + eps * sign(grad)).
        let w = vec![1.5, -0.5, -1.0, 2.0];
        let m = linear_two_class(w.clone(), vec![0.1, -0.1], 2);
        let x = vec![0.5, 0.5];
        let y = 0;
        let eps = 8.0 / 255.0;
        let budget = AttackBudget::new(eps, 1, eps, false).unwrap();
        let out = pgd(&m, &x, y, &budget, 0).unwrap();
        // grad of CE wrt x = (softmax - onehot)^T W = p1 * (w_row1 - w_row0)
        let expect = [
            (x[0] + eps * sign(w[2] - w[0])).clamp(0.0, 1.0),
            (x[1] + eps * sign(w[3] - w[1])).clamp(0.0, 1.0),
        ];
        assert_eq!(out.adversarial[0], expect[0]);
        assert_eq!(out.adversarial[1], expect[1]);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = Classifier::mlp(3, &[6], 2, 3);
        let budget = AttackBudget::bounded(0.1, 7).unwrap();
        let x = vec![0.3, 0.6, 0.2];
        let a = pgd(&m, &x, 1, &budget, 555).unwrap();
        let b = pgd(&m, &x, 1, &budget, 555).unwrap();
        assert_eq!(a.adversarial, b.adversarial);
        assert_eq!(a.success, b.success);
    }

    #[test]
    fn success_rate_nondecreasing_in_epsilon() {
        let m = Classifier::mlp(2, &[8], 2, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<(Vec<f64>, usize)> =
            (0..40).map(|_| (vec![rng.gen(), rng.gen()], rng.gen_range(0..2))).collect();
        let mut prev = 0usize;
        for eps_int in [0.0, 2.0, 4.0, 8.0, 16.0, 30.0] {
            let eps = eps_int / 255.0;
            let successes = samples
                .iter()
                .enumerate()
                .filter(|(i, (x, y))| {
                    let budget = if eps > 0.0 {
                        AttackBudget::bounded(eps, 10).unwrap()
                    } else {
                        AttackBudget { epsilon: 0.0, steps: 10, step_size: 1e-9, random_init: false }
                    };
                    pgd(&m, x, *y, &budget, derive_seed(7, *i as u64)).unwrap().success
                })
                .count();
            assert!(successes >= prev, "success rate dropped at eps {eps_int}");
            prev = successes;
        }
    }

    #[test]
    fn min_perturbation_zero_for_misclassified() {
        let m = linear_two_class(vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 0.0], 2);
        // x with positive first coordinate is classified 0; ask for label 1.
        let x = vec![0.9, 0.5];
        let template = AttackBudget::bounded(0.1, 5).unwrap();
        let out = min_perturbation(&m, &x, 1, 0.2, 0.002, &template, 3).unwrap();
        assert!(out.success);
        assert_eq!(out.perturbation_size, 0.0);
    }

    #[test]
    fn min_perturbation_failure_sentinel() {
        // Model with an enormous margin; tiny eps_max cannot flip it.
        let m = linear_two_class(vec![100.0, 0.0, -100.0, 0.0], vec![0.0, 0.0], 2);
        let x = vec![0.9, 0.5];
        let template = AttackBudget::bounded(0.01, 5).unwrap();
        let out = min_perturbation(&m, &x, 0, 0.01, 0.001, &template, 3).unwrap();
        assert!(!out.success);
        assert!(out.perturbation_size.is_infinite());
    }

    #[test]
    fn min_perturbation_matches_linear_margin() {
        // For logits (w0 - w1) . x + (b0 - b1) = margin, the L-inf distance
        // to the boundary is margin / ||w0 - w1||_1.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let resolution = 0.5 / 255.0;
        for trial in 0..20 {
            let w: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = vec![0.5, 0.5];
            let dw = [w[0] - w[2], w[1] - w[3]];
            let margin_raw = dw[0] * x[0] + dw[1] * x[1];
            let y = if margin_raw > 0.0 { 0 } else { 1 };
            let margin = margin_raw.abs();
            let l1: f64 = dw.iter().map(|v| v.abs()).sum();
            if l1 < 0.3 {
                continue; // degenerate draw, distance outside the search range
            }
            let expected = margin / l1;
            if expected > 0.2 {
                continue;
            }
            let m = linear_two_class(w.clone(), vec![0.0, 0.0], 2);
            let template = AttackBudget::new(0.1, 20, 0.01, false).unwrap();
            let out =
                min_perturbation(&m, &x, y, 0.25, resolution, &template, trial as u64).unwrap();
            assert!(out.success, "trial {trial} found nothing, expected {expected}");
            assert!(
                (out.perturbation_size - expected).abs() <= 2.0 * resolution,
                "trial {trial}: got {} expected {expected}",
                out.perturbation_size
            );
        }
    }

    #[test]
    fn min_perturbation_nonincreasing_in_eps_max() {
        let m = linear_two_class(vec![0.8, -0.3, -0.8, 0.3], vec![0.0, 0.0], 2);
        let x = vec![0.6, 0.45];
        let template = AttackBudget::new(0.1, 20, 0.01, false).unwrap();
        let mut prev = f64::INFINITY;
        for eps_max in [0.05, 0.1, 0.2, 0.4] {
            let out = min_perturbation(&m, &x, 0, eps_max, 0.001, &template, 5).unwrap();
            let size = out.perturbation_size;
            assert!(size <= prev + 1e-12, "eps_max {eps_max}: {size} > {prev}");
            prev = size;
        }
    }
}
