use std::f64::consts::FRAC_PI_4;

/// Number of sinusoidal features: 6 frequencies times 8 phase shifts.
pub const SINUSOID_DIM: usize = 48;

/// `sin(x / freq + k·π/4)` for `freq ∈ 1..=6`, `k ∈ 0..8`, frequency-major.
pub fn sinusoidal_features(x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(SINUSOID_DIM);
    for freq in 1..=6 {
        for k in 0..8 {
            out.push((x / f64::from(freq) + f64::from(k) * FRAC_PI_4).sin());
        }
    }
    out
}

/// `[x_1 … x_d, x_1x_2, x_1x_3, …, x_{d−1}x_d]`.
pub fn pairwise_expansion(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = Vec::with_capacity(d + d * (d - 1) / 2);
    out.extend_from_slice(x);
    for i in 0..d {
        for j in i + 1..d {
            out.push(x[i] * x[j]);
        }
    }
    out
}
