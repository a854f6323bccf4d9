use serde::{Deserialize, Serialize};

/// Per-channel encoding statistics and label statistics of a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub enc_mean: Vec<f64>,
    pub enc_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

/// Channels with (near) constant value are centred but not scaled.
const MIN_STD: f64 = 1e-8;

fn floor_std(s: f64) -> f64 {
    if s > MIN_STD {
        s
    } else {
        1.0
    }
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { enc_mean: vec![0.0; dim], enc_std: vec![1.0; dim], y_mean: 0.0, y_std: 1.0 }
    }

    /// Population statistics; `rows` must be non-empty and equally long.
    pub fn fit<R: AsRef<[f32]>>(rows: &[R], labels: &[f64]) -> Self {
        assert!(!rows.is_empty() && !labels.is_empty(), "standardizer needs data");
        let dim = rows[0].as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, &x) in mean.iter_mut().zip(r.as_ref()) {
                *m += x as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, &x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *v += (x as f64 - m).powi(2);
            }
        }
        let enc_std = var.into_iter().map(|v| floor_std((v / n).sqrt())).collect();
        let ny = labels.len() as f64;
        let y_mean = labels.iter().sum::<f64>() / ny;
        let y_std = floor_std((labels.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / ny).sqrt());
        Standardizer { enc_mean: mean, enc_std, y_mean, y_std }
    }

    pub fn encoding(&self, x: &[f32]) -> Vec<f64> {
        x.iter()
            .zip(self.enc_mean.iter().zip(&self.enc_std))
            .map(|(&v, (m, s))| (v as f64 - m) / s)
            .collect()
    }

    pub fn label(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    pub fn unlabel(&self, z: f64) -> f64 {
        z * self.y_std + self.y_mean
    }
}
