//! Synthetic drifting streams with known `Pr(Y = 1 | X)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::features::{pairwise_expansion, sinusoidal_features};
use crate::error::{CalibError, Result};
use crate::prob::{logit, sigmoid};

pub const MULTI_DIM: usize = 10;

/// One generated point. `features` is what the base model sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    pub features: Vec<f64>,
    pub y: u8,
    pub truth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Cov1d,
    Label1d,
    Reg1d,
    CovMulti { drift: bool },
    LabelMulti { drift: bool },
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 5] = [
        SyntheticKind::Cov1d,
        SyntheticKind::Label1d,
        SyntheticKind::Reg1d,
        SyntheticKind::CovMulti { drift: true },
        SyntheticKind::LabelMulti { drift: true },
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Cov1d => "cov1d",
            SyntheticKind::Label1d => "label1d",
            SyntheticKind::Reg1d => "reg1d",
            SyntheticKind::CovMulti { drift: true } => "covmulti",
            SyntheticKind::CovMulti { drift: false } => "covmulti-iid",
            SyntheticKind::LabelMulti { drift: true } => "labelmulti",
            SyntheticKind::LabelMulti { drift: false } => "labelmulti-iid",
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        let iid = [
            SyntheticKind::CovMulti { drift: false },
            SyntheticKind::LabelMulti { drift: false },
        ];
        let name = s.trim().to_ascii_lowercase();
        SyntheticKind::ALL
            .into_iter()
            .chain(iid)
            .find(|k| k.name() == name)
            .ok_or_else(|| CalibError::Config(format!("unknown synthetic stream `{s}`")))
    }
}

/// 0.1 when `floor(x/5)` is even, 0.9 when odd.
pub fn stripe_truth(x: f64) -> f64 {
    if ((x / 5.0).floor() as i64).rem_euclid(2) == 0 {
        0.1
    } else {
        0.9
    }
}

/// Drifting stripe probability: both branches move linearly toward 0.5 as
/// `α = (t − 1)/5000` grows, clamped to `[0, 1]`.
pub fn reg_truth(x: f64, t: usize) -> f64 {
    let alpha = (t as f64 - 1.0) / 5000.0;
    let start = stripe_truth(x);
    (start * (1.0 - alpha) + 0.5 * alpha).clamp(0.0, 1.0)
}

/// Class prior `0.95(1 − α) + 0.05α`, `α = (t − 1)/6000`.
pub fn label1d_prior(t: usize) -> f64 {
    let alpha = (t as f64 - 1.0) / 6000.0;
    0.95 * (1.0 - alpha) + 0.05 * alpha
}

/// Posterior for `X | Y=0 ~ N(0,1)`, `X | Y=1 ~ N(2,1)`.
pub fn label1d_truth(x: f64, prior: f64) -> f64 {
    sigmoid(logit(prior).expect("prior in (0,1)") + 2.0 * x - 2.0).value()
}

/// Posterior for `X | Y=0 ~ N(0,I)`, `X | Y=1 ~ N(e_1,I)`.
pub fn labelmulti_truth(x1: f64, prior: f64) -> f64 {
    sigmoid(logit(prior).expect("prior in (0,1)") + x1 - 0.5).value()
}

/// `X_t ~ N((t − 1)/250, 4)`, the 4 read as a variance.
pub fn cov1d_covariate<R: Rng + ?Sized>(t: usize, rng: &mut R) -> f64 {
    Normal::new((t as f64 - 1.0) / 250.0, 2.0)
        .expect("finite")
        .sample(rng)
}

/// `X_t ~ N(0, 10)`, the 10 read as a variance.
pub fn reg1d_covariate<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Normal::new(0.0, 10f64.sqrt()).expect("finite").sample(rng)
}

/// Drift rate of the multivariate label prior `0.5 + δt`.
pub fn labelmulti_delta(drift: bool) -> f64 {
    if drift {
        0.4 / 6000.0
    } else {
        0.0
    }
}

/// Per-run randomness of the rotating-covariance stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMultiParams {
    pub v1: [f64; MULTI_DIM],
    pub v2: [f64; MULTI_DIM],
    pub w: Vec<f64>,
    pub delta: f64,
}

impl CovMultiParams {
    /// Draws orthonormal `v1`, `v2` by Gram-Schmidt and i.i.d. sign weights.
    /// With drift the principal direction turns by 180° over `total_len` points.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, drift: bool, total_len: usize) -> Self {
        let gauss = |rng: &mut R| -> [f64; MULTI_DIM] {
            std::array::from_fn(|_| rng.sample(StandardNormal))
        };
        let mut v1 = gauss(rng);
        let n1 = norm(&v1);
        v1.iter_mut().for_each(|v| *v /= n1);
        let mut v2 = gauss(rng);
        let proj: f64 = v1.iter().zip(&v2).map(|(a, b)| a * b).sum();
        v2.iter_mut().zip(&v1).for_each(|(b, a)| *b -= proj * a);
        let n2 = norm(&v2);
        v2.iter_mut().for_each(|v| *v /= n2);
        let w = (0..MULTI_DIM + MULTI_DIM * (MULTI_DIM - 1) / 2)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let delta = if drift { PI / total_len as f64 } else { 0.0 };
        Self { v1, v2, w, delta }
    }

    pub fn direction(&self, t: usize) -> [f64; MULTI_DIM] {
        let (s, c) = (self.delta * t as f64).sin_cos();
        std::array::from_fn(|i| self.v1[i] * c + self.v2[i] * s)
    }

    pub fn truth(&self, x: &[f64]) -> f64 {
        let z: f64 = pairwise_expansion(x)
            .iter()
            .zip(&self.w)
            .map(|(a, b)| a * b)
            .sum();
        sigmoid(z).value()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A stream generator, ready to draw any time index.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Cov1d,
    Label1d,
    Reg1d,
    CovMulti(CovMultiParams),
    LabelMulti { delta: f64 },
}

impl Generator {
    /// Draws any per-run parameters from `rng`; `total_len` is the full stream
    /// length including the training block.
    pub fn new<R: Rng + ?Sized>(kind: SyntheticKind, total_len: usize, rng: &mut R) -> Self {
        match kind {
            SyntheticKind::Cov1d => Generator::Cov1d,
            SyntheticKind::Label1d => Generator::Label1d,
            SyntheticKind::Reg1d => Generator::Reg1d,
            SyntheticKind::CovMulti { drift } => {
                Generator::CovMulti(CovMultiParams::draw(rng, drift, total_len))
            }
            SyntheticKind::LabelMulti { drift } => Generator::LabelMulti {
                delta: labelmulti_delta(drift),
            },
        }
    }

    /// Draws the point at 1-based time `t`.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Sample {
        let (features, truth, y) = match self {
            Generator::Cov1d => {
                let x = cov1d_covariate(t, rng);
                let truth = stripe_truth(x);
                (sinusoidal_features(x), truth, None)
            }
            Generator::Reg1d => {
                let x = reg1d_covariate(rng);
                (sinusoidal_features(x), reg_truth(x, t), None)
            }
            Generator::Label1d => {
                let prior = label1d_prior(t);
                let y = u8::from(rng.random_bool(prior));
                let x = 2.0 * f64::from(y) + rng.sample::<f64, _>(StandardNormal);
                (vec![x], label1d_truth(x, prior), Some(y))
            }
            Generator::CovMulti(params) => {
                let u = params.direction(t);
                let g: f64 = rng.sample(StandardNormal);
                let scale = 10f64.sqrt() * g;
                let x: Vec<f64> = (0..MULTI_DIM)
                    .map(|i| rng.sample::<f64, _>(StandardNormal) + scale * u[i])
                    .collect();
                let truth = params.truth(&x);
                (x, truth, None)
            }
            Generator::LabelMulti { delta } => {
                let prior = 0.5 + delta * t as f64;
                let y = u8::from(rng.random_bool(prior));
                let mut x: Vec<f64> = (0..MULTI_DIM).map(|_| rng.sample(StandardNormal)).collect();
                x[0] += f64::from(y);
                let truth = labelmulti_truth(x[0], prior);
                (x, truth, Some(y))
            }
        };
        let y = y.unwrap_or_else(|| u8::from(rng.random_bool(truth)));
        Sample {
            t,
            features,
            y,
            truth,
        }
    }

    /// Points `t = 1..=len`.
    pub fn run<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<Sample> {
        (1..=len).map(|t| self.sample(t, rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stripe_and_drift_fixtures() {
        assert_eq!(stripe_truth(2.0), 0.1);
        assert_eq!(stripe_truth(7.0), 0.9);
        assert_eq!(stripe_truth(-0.5), 0.9);
        assert_eq!(stripe_truth(-5.5), 0.1);
        assert_eq!(reg_truth(7.0, 1), 0.9);
        assert!((reg_truth(2.0, 5001) - 0.5).abs() < 1e-12);
        assert!((reg_truth(7.0, 5001) - 0.5).abs() < 1e-12);
        assert!((reg_truth(2.0, 6000) - (0.1 + 0.4 * 5999.0 / 5000.0)).abs() < 1e-12);
    }

    #[test]
    fn label_priors_and_posteriors() {
        assert!((label1d_prior(1) - 0.95).abs() < 1e-15);
        let end = 0.95 * (1.0 - 5999.0 / 6000.0) + 0.05 * (5999.0 / 6000.0);
        assert!((label1d_prior(6000) - end).abs() < 1e-15);
        assert!((label1d_truth(1.0, 0.5) - 0.5).abs() < 1e-15);
        assert!((0.5 + labelmulti_delta(true) * 6000.0 - 0.9).abs() < 1e-12);
        assert_eq!(labelmulti_delta(false), 0.0);
        assert!((labelmulti_truth(0.5, 0.5) - 0.5).abs() < 1e-15);
        // Bayes' rule against the raw Gaussian densities.
        let (x, prior) = (0.7, 0.3);
        let num = prior * (-(x - 2.0f64).powi(2) / 2.0).exp();
        let den = num + (1.0 - prior) * (-x * x / 2.0).exp();
        assert!((label1d_truth(x, prior) - num / den).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_covariate_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        for (t, mean, var) in [(1usize, 0.0, 4.0), (6000, 23.996, 4.0)] {
            let xs: Vec<f64> = (0..n).map(|_| cov1d_covariate(t, &mut rng)).collect();
            let (m, v) = moments(&xs);
            assert!((m - mean).abs() < 0.03, "t={t}: mean {m}");
            assert!((v - var).abs() < 0.1, "t={t}: var {v}");
        }
        let xs: Vec<f64> = (0..n).map(|_| reg1d_covariate(&mut rng)).collect();
        let (m, v) = moments(&xs);
        assert!(m.abs() < 0.05 && (v - 10.0).abs() < 0.2, "{m} {v}");
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
    }

    fn monte_carlo(gen: &Generator, t: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 100_000;
        let (mut ys, mut truths) = (0.0, 0.0);
        for _ in 0..n {
            let s = gen.sample(t, &mut rng);
            assert!((0.0..=1.0).contains(&s.truth));
            ys += f64::from(s.y);
            truths += s.truth;
        }
        (ys / n as f64, truths / n as f64)
    }

    #[test]
    fn outcomes_match_recorded_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in SyntheticKind::ALL {
            let gen = Generator::new(kind, 6000, &mut rng);
            for t in [1, 3000, 6000] {
                let (ybar, tbar) = monte_carlo(&gen, t, t as u64);
                assert!(
                    (ybar - tbar).abs() <= 0.01,
                    "{} t={t}: {ybar} vs {tbar}",
                    kind.name()
                );
            }
        }
    }

    #[test]
    fn label_streams_follow_their_priors() {
        let (ybar, _) = monte_carlo(&Generator::Label1d, 1, 10);
        assert!((ybar - 0.95).abs() <= 0.01);
        let (ybar, _) = monte_carlo(
            &Generator::LabelMulti {
                delta: 0.4 / 6000.0,
            },
            6000,
            11,
        );
        assert!((ybar - 0.9).abs() <= 0.01);
        let (ybar, _) = monte_carlo(&Generator::LabelMulti { delta: 0.0 }, 4000, 12);
        assert!((ybar - 0.5).abs() <= 0.01);
    }

    #[test]
    fn covmulti_covariance_matches_rank_one_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = CovMultiParams::draw(&mut rng, true, 6000);
        for t in [1, 6000] {
            assert!((norm(&params.direction(t)) - 1.0).abs() < 1e-12);
        }
        let dot: f64 = params.v1.iter().zip(&params.v2).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
        assert_eq!(params.w.len(), 55);
        // the first and last directions are (nearly) opposite
        let (u1, u_last) = (params.direction(0), params.direction(6000));
        let cos: f64 = u1.iter().zip(&u_last).map(|(a, b)| a * b).sum();
        assert!((cos + 1.0).abs() < 1e-12);

        let gen = Generator::CovMulti(params.clone());
        let t = 2500;
        let u = params.direction(t);
        let n = 100_000;
        let mut cov = [[0.0; MULTI_DIM]; MULTI_DIM];
        for _ in 0..n {
            let x = gen.sample(t, &mut rng).features;
            for i in 0..MULTI_DIM {
                for j in 0..MULTI_DIM {
                    cov[i][j] += x[i] * x[j];
                }
            }
        }
        for i in 0..MULTI_DIM {
            for j in 0..MULTI_DIM {
                let expected = f64::from(u8::from(i == j)) + 10.0 * u[i] * u[j];
                let got = cov[i][j] / n as f64;
                assert!(
                    (got - expected).abs() <= 0.15,
                    "({i},{j}) {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn iid_covmulti_has_fixed_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = CovMultiParams::draw(&mut rng, false, 6000);
        assert_eq!(params.direction(1), params.direction(5999));
    }

    #[test]
    fn generators_are_bit_reproducible() {
        for kind in SyntheticKind::ALL {
            let run = || {
                let mut rng = ChaCha8Rng::seed_from_u64(99);
                let gen = Generator::new(kind, 300, &mut rng);
                gen.run(300, &mut rng)
            };
            assert_eq!(run(), run());
        }
    }
}
