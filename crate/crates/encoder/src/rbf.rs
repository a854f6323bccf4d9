use std::f64::consts::PI;

/// `0.5 (cos(π d / c) + 1)` inside the cutoff, 0 beyond.
pub fn cosine_envelope(dist: f64, cutoff: f64) -> f64 {
    if dist >= cutoff {
        0.0
    } else {
        0.5 * ((PI * dist / cutoff).cos() + 1.0)
    }
}

/// Gaussians centred on `k` points spread evenly over `[0, cutoff]` with
/// width `γ = (k / cutoff)²`, times the cosine envelope.
pub fn rbf_expand(dist: f64, k: usize, cutoff: f64) -> Vec<f64> {
    let env = cosine_envelope(dist, cutoff);
    let gamma = (k as f64 / cutoff).powi(2);
    (0..k)
        .map(|i| {
            let mu = if k == 1 { 0.0 } else { cutoff * i as f64 / (k - 1) as f64 };
            env * (-gamma * (dist - mu).powi(2)).exp()
        })
        .collect()
}
