//! Seeded synthetic datasets and a CIFAR-10 binary reader.
//!
//! All features land in [0,1]; the seed fully determines every byte of
//! the output.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub seed: u64,
    pub num_classes: usize,
    pub train_inputs: Vec<Vec<f64>>,
    pub train_labels: Vec<usize>,
    pub test_inputs: Vec<Vec<f64>>,
    pub test_labels: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn feature_dim(&self) -> usize {
        self.train_inputs[0].len()
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; keeps the stream layout independent of rand_distr.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two isotropic Gaussian blobs in 2-D, rescaled into [0,1]^2 with a
/// shared affine map so the Bayes error is preserved.
pub fn two_gaussians(
    n_per_class: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(separation > 0.0) || !(noise > 0.0) {
        return Err(Error::InvalidInput("separation and noise must be positive".into()));
    }
    if n_per_class == 0 {
        return Err(Error::InvalidInput("n_per_class must be >= 1".into()));
    }
    let mut warnings = Vec::new();
    if noise >= separation / 6.0 {
        warnings.push(format!(
            "noise {noise} >= separation/6 = {}; classes overlap substantially",
            separation / 6.0
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fixed map: raw x in [-sep/2 - 4n, sep/2 + 4n] -> [0,1], same scale on y.
    let half_range = separation / 2.0 + 4.0 * noise;
    let scale = 1.0 / (2.0 * half_range);
    let mut sample_split = |n: usize| {
        let mut inputs = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        for label in 0..2usize {
            let cx = if label == 0 { -separation / 2.0 } else { separation / 2.0 };
            for _ in 0..n {
                let x = cx + noise * gaussian(&mut rng);
                let y = noise * gaussian(&mut rng);
                inputs.push(vec![
                    ((x + half_range) * scale).clamp(0.0, 1.0),
                    ((y + half_range) * scale).clamp(0.0, 1.0),
                ]);
                labels.push(label);
            }
        }
        (inputs, labels)
    };
    let (train_inputs, train_labels) = sample_split(n_per_class);
    let (test_inputs, test_labels) = sample_split(n_per_class);
    Ok(Dataset {
        name: "two_gaussians".into(),
        seed,
        num_classes: 2,
        train_inputs,
        train_labels,
        test_inputs,
        test_labels,
        warnings,
    })
}

/// Interleaved half-circles in 2-D, rescaled into [0,1]^2.
pub fn two_moons(n_per_class: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidInput("n_per_class must be >= 1".into()));
    }
    if noise < 0.0 {
        return Err(Error::InvalidInput("noise must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample_split = |n: usize| {
        let mut inputs = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        for label in 0..2usize {
            for _ in 0..n {
                let t = rng.gen::<f64>() * std::f64::consts::PI;
                let (mut x, mut y) = if label == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                x += noise * gaussian(&mut rng);
                y += noise * gaussian(&mut rng);
                // Raw range is about [-1.3, 2.3] x [-0.8, 1.3]; one shared
                // scale keeps the geometry isotropic.
                inputs.push(vec![
                    ((x + 1.3) / 3.6).clamp(0.0, 1.0),
                    ((y + 0.8) / 3.6).clamp(0.0, 1.0),
                ]);
                labels.push(label);
            }
        }
        (inputs, labels)
    };
    let (train_inputs, train_labels) = sample_split(n_per_class);
    let (test_inputs, test_labels) = sample_split(n_per_class);
    Ok(Dataset {
        name: "two_moons".into(),
        seed,
        num_classes: 2,
        train_inputs,
        train_labels,
        test_inputs,
        test_labels,
        warnings: Vec::new(),
    })
}

pub const CIFAR_RECORD_BYTES: usize = 3073;
pub const CIFAR_PIXELS: usize = 3072;
pub const CIFAR_CLASSES: usize = 10;

/// Decode raw CIFAR-10 binary bytes: records of one label byte followed by
/// 3072 pixel bytes, pixels normalized to [0,1] by dividing by 255.
pub fn decode_cifar10_bytes(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_BYTES != 0 {
        return Err(Error::Format(format!(
            "file length {} is not a positive multiple of {CIFAR_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let mut inputs = Vec::with_capacity(bytes.len() / CIFAR_RECORD_BYTES);
    let mut labels = Vec::with_capacity(inputs.capacity());
    for record in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        let label = record[0] as usize;
        if label >= CIFAR_CLASSES {
            return Err(Error::Format(format!("label byte {label} out of range 0..=9")));
        }
        labels.push(label);
        inputs.push(record[1..].iter().map(|&b| b as f64 / 255.0).collect());
    }
    Ok((inputs, labels))
}

/// Load CIFAR-10 binary batch files and draw a seeded stratified subset:
/// `subset_per_class` training and `subset_per_class` test records per
/// class, disjoint by construction.
pub fn load_cifar10_binary(
    paths: &[impl AsRef<Path>],
    subset_per_class: usize,
    seed: u64,
) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::InvalidInput("no input files".into()));
    }
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let bytes = std::fs::read(path.as_ref())?;
        let (i, l) = decode_cifar10_bytes(&bytes)?;
        inputs.extend(i);
        labels.extend(l);
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); CIFAR_CLASSES];
    for (idx, &l) in labels.iter().enumerate() {
        per_class[l].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_inputs = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_inputs = Vec::new();
    let mut test_labels = Vec::new();
    for (class, indices) in per_class.iter_mut().enumerate() {
        if indices.len() < 2 * subset_per_class {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} records, need {} for the stratified subset",
                indices.len(),
                2 * subset_per_class
            )));
        }
        indices.shuffle(&mut rng);
        for &i in &indices[..subset_per_class] {
            train_inputs.push(inputs[i].clone());
            train_labels.push(class);
        }
        for &i in &indices[subset_per_class..2 * subset_per_class] {
            test_inputs.push(inputs[i].clone());
            test_labels.push(class);
        }
    }
    Ok(Dataset {
        name: "cifar10".into(),
        seed,
        num_classes: CIFAR_CLASSES,
        train_inputs,
        train_labels,
        test_inputs,
        test_labels,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussians_are_deterministic_and_bounded() {
        let a = two_gaussians(50, 0.4, 0.05, 9).unwrap();
        let b = two_gaussians(50, 0.4, 0.05, 9).unwrap();
        assert_eq!(a.train_inputs, b.train_inputs);
        assert_eq!(a.test_labels, b.test_labels);
        assert!(a.train_inputs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(a.train_labels.iter().filter(|&&l| l == 0).count(), 50);
        assert_eq!(a.train_labels.iter().filter(|&&l| l == 1).count(), 50);
    }

    #[test]
    fn gaussians_overlap_warning() {
        let d = two_gaussians(10, 0.3, 0.1, 1).unwrap();
        assert_eq!(d.warnings.len(), 1);
        let d = two_gaussians(10, 0.6, 0.05, 1).unwrap();
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn moons_deterministic_balanced() {
        let a = two_moons(40, 0.05, 3).unwrap();
        let b = two_moons(40, 0.05, 3).unwrap();
        assert_eq!(a.train_inputs, b.train_inputs);
        assert_eq!(a.test_inputs, b.test_inputs);
        assert_eq!(a.train_labels.iter().filter(|&&l| l == 1).count(), 40);
        assert!(a.train_inputs.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn cifar_decodes_zero_and_full_pixels() {
        let mut record = vec![0u8; CIFAR_RECORD_BYTES];
        record[0] = 3;
        record[1] = 255;
        let (inputs, labels) = decode_cifar10_bytes(&record).unwrap();
        assert_eq!(labels, vec![3]);
        assert_eq!(inputs[0][0], 1.0);
        assert!(inputs[0][1..].iter().all(|&v| v == 0.0));
        assert_eq!(inputs[0].len(), CIFAR_PIXELS);
    }

    #[test]
    fn cifar_rejects_malformed() {
        assert!(decode_cifar10_bytes(&[0u8; 100]).is_err());
        assert!(decode_cifar10_bytes(&[]).is_err());
        let mut record = vec![0u8; CIFAR_RECORD_BYTES];
        record[0] = 10;
        assert!(decode_cifar10_bytes(&record).is_err());
    }

    #[test]
    fn cifar_stratified_subset() {
        // Synthetic file: 4 records per class, stable pixel fill.
        let dir = std::env::temp_dir().join("robustot_cifar_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("batch.bin");
        let mut bytes = Vec::new();
        for class in 0..10u8 {
            for copy in 0..4u8 {
                bytes.push(class);
                bytes.extend(std::iter::repeat(class * 10 + copy).take(CIFAR_PIXELS));
            }
        }
        std::fs::write(&path, &bytes).unwrap();
        let d = load_cifar10_binary(&[&path], 2, 5).unwrap();
        assert_eq!(d.train_labels.len(), 20);
        assert_eq!(d.test_labels.len(), 20);
        for class in 0..10 {
            assert_eq!(d.train_labels.iter().filter(|&&l| l == class).count(), 2);
            assert_eq!(d.test_labels.iter().filter(|&&l| l == class).count(), 2);
        }
        // train/test records are disjoint byte patterns
        for t in &d.train_inputs {
            assert!(!d.test_inputs.contains(t));
        }
        assert!(load_cifar10_binary(&[&path], 3, 5).is_err());
        std::fs::remove_file(&path).ok();
    }
}
