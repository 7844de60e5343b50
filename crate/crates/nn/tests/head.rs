use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lbgame_nn::*;

#[test]
fn zero_std_limit() {
    let s = squashed_from_noise(&[0.7, -0.3], &[-20.0, -50.0], &[1.3, -2.0]).unwrap();
    assert!((s.action[0] - 0.7f64.tanh()).abs() < 1e-8);
    assert!((s.action[1] - (-0.3f64).tanh()).abs() < 1e-8);
    assert_eq!(squashed_mean(&[0.7]), vec![0.7f64.tanh()]);
}

#[test]
fn symmetric_noise_pairs() {
    for xi in [0.1, 0.5, 1.7, 3.0] {
        let a = squashed_from_noise::<f64>(&[0.0], &[0.3], &[xi]).unwrap();
        let b = squashed_from_noise(&[0.0], &[0.3], &[-xi]).unwrap();
        assert!((a.log_prob - b.log_prob).abs() < 1e-12);
        assert!((a.action[0] + b.action[0]).abs() < 1e-15);
    }
}

#[test]
fn stable_log_det() {
    for u in [-30.0, -5.0, 0.0, 0.3, 5.0, 30.0f64] {
        let naive = (1.0 - u.tanh().powi(2)).ln();
        let stable = log_one_minus_tanh_sq(u);
        if naive.is_finite() {
            assert!((naive - stable).abs() < 1e-6 * (1.0 + naive.abs()), "{u}");
        }
        assert!(stable.is_finite());
    }
}

#[test]
fn entropy_matches_analytic() {
    let (m, ls) = (0.4f64, -0.5f64);
    let s = ls.exp();
    let mut r = ChaCha8Rng::seed_from_u64(42);
    let n = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..n {
        acc -= gaussian_head_sample(&[m], &[ls], &mut r).unwrap().log_prob;
    }
    let mc = acc / n as f64;
    let gauss = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s * s).ln();
    // E[ln(1 - tanh(u)^2)] by trapezoid quadrature over u ~ N(m, s²)
    let steps = 200_000;
    let (lo, hi) = (m - 12.0 * s, m + 12.0 * s);
    let du = (hi - lo) / steps as f64;
    let mut correction = 0.0;
    for k in 0..=steps {
        let u = lo + k as f64 * du;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        let pdf = (-(u - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        correction += w * pdf * (1.0 - u.tanh().powi(2)).ln() * du;
    }
    let analytic = gauss + correction;
    assert!((mc - analytic).abs() < 0.02 * analytic.abs(), "{mc} vs {analytic}");
}

struct HeadProbe {
    mean: Param<f64>,
    log_std: Param<f64>,
    noise: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
}

impl Module<f64> for HeadProbe {
    fn params(&self) -> Vec<&Param<f64>> {
        vec![&self.mean, &self.log_std]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        vec![&mut self.mean, &mut self.log_std]
    }
}

#[test]
fn head_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let n = 6;
        let mut probe = HeadProbe {
            mean: Param::from_values("mean", &[n], (0..n).map(|_| r.gen_range(-1.5..1.5)).collect()).unwrap(),
            log_std: Param::from_values("log_std", &[n], (0..n).map(|_| r.gen_range(-2.0..1.0)).collect()).unwrap(),
            noise: (0..n).map(|_| r.gen_range(-2.0..2.0)).collect(),
            weights: (0..n).map(|_| r.gen_range(-1.0..1.0)).collect(),
            alpha: 0.3,
        };
        let report = grad_check(
            &mut probe,
            |m, backward| {
                let s = squashed_from_noise(&m.mean.value, &m.log_std.value, &m.noise).unwrap();
                let q: f64 = s.action.iter().zip(&m.weights).map(|(a, w)| a * w).sum();
                let loss = m.alpha * s.log_prob - q;
                if backward {
                    let da: Vec<f64> = m.weights.iter().map(|w| -w).collect();
                    let (dm, dls) = squashed_backward(&s, &da, m.alpha).unwrap();
                    m.mean.grad = dm;
                    m.log_std.grad = dls;
                }
                loss
            },
            1e-5,
            20,
            &mut r,
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

#[test]
fn clamped_log_std_has_no_gradient() {
    let s = squashed_from_noise(&[0.1], &[5.0], &[0.5]).unwrap();
    let (_, dls) = squashed_backward(&s, &[1.0], 1.0).unwrap();
    assert_eq!(dls, vec![0.0]);
}

#[test]
fn sampling_is_seeded() {
    let mut a = ChaCha8Rng::seed_from_u64(5);
    let mut b = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x = gaussian_head_sample(&[0.1, 0.2], &[0.0, -1.0], &mut a).unwrap();
        let y = gaussian_head_sample(&[0.1, 0.2], &[0.0, -1.0], &mut b).unwrap();
        assert_eq!(x, y);
    }
}
