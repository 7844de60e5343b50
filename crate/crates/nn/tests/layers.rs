use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lbgame_nn::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

/// A layer plus its input as trainable tensors, so input gradients get checked too.
struct DenseProbe {
    layer: Dense<f64>,
    x: Param<f64>,
    target: Vec<f64>,
}

impl Module<f64> for DenseProbe {
    fn params(&self) -> Vec<&Param<f64>> {
        let mut v = self.layer.params();
        v.push(&self.x);
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        let mut v = self.layer.params_mut();
        v.push(&mut self.x);
        v
    }
}

#[test]
fn dense_identity() {
    let eye = vec![1.0, 0.0, 0.0, 1.0];
    let d = Dense::from_parts("d", 2, 2, eye, vec![0.0; 2]).unwrap();
    assert_eq!(d.forward(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
    assert!(d.forward(&[1.0]).is_err());
}

#[test]
fn dense_scalar_gradients() {
    let mut d = Dense::from_parts("d", 1, 1, vec![2.0], vec![1.0]).unwrap();
    assert_eq!(d.forward(&[3.0]).unwrap(), vec![7.0]);
    let dx = d.backward(&[3.0], &[1.0]).unwrap();
    assert_eq!(d.w.grad, vec![3.0]);
    assert_eq!(d.b.grad, vec![1.0]);
    assert_eq!(dx, vec![2.0]);
}

#[test]
fn dense_works_in_f32() {
    let d = Dense::<f32>::from_parts("d", 2, 1, vec![0.5, 0.25], vec![1.0]).unwrap();
    assert_eq!(d.forward(&[2.0, 4.0]).unwrap(), vec![3.0f32]);
}

#[test]
fn dense_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let mut probe = DenseProbe {
            layer: Dense::new("d", 7, 5, &mut r),
            x: Param::from_values("x", &[7], rand_vec(&mut r, 7, 1.0)).unwrap(),
            target: rand_vec(&mut r, 5, 1.0),
        };
        let report = grad_check(
            &mut probe,
            |m, backward| {
                let y = m.layer.forward(&m.x.value).unwrap();
                let act = Activation::Tanh.apply(&y);
                let loss: f64 = act.iter().zip(&m.target).map(|(a, t)| 0.5 * (a - t).powi(2)).sum();
                if backward {
                    let da: Vec<f64> = act.iter().zip(&m.target).map(|(a, t)| a - t).collect();
                    let dy = Activation::Tanh.backward(&y, &act, &da);
                    let x = m.x.value.clone();
                    let dx = m.layer.backward(&x, &dy).unwrap();
                    m.x.grad.iter_mut().zip(dx).for_each(|(g, d)| *g += d);
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

struct GruProbe {
    cell: GruCell<f64>,
    x: Vec<Param<f64>>,
    h0: Param<f64>,
    target: Vec<f64>,
}

impl Module<f64> for GruProbe {
    fn params(&self) -> Vec<&Param<f64>> {
        let mut v = self.cell.params();
        v.extend(self.x.iter());
        v.push(&self.h0);
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        let mut v = self.cell.params_mut();
        v.extend(self.x.iter_mut());
        v.push(&mut self.h0);
        v
    }
}

fn gru_sequence_loss(m: &mut GruProbe, backward: bool) -> f64 {
    let mut h = m.h0.value.clone();
    let mut caches = Vec::new();
    for x in &m.x {
        let (h2, c) = m.cell.forward(&x.value, &h).unwrap();
        caches.push(c);
        h = h2;
    }
    let loss: f64 = h.iter().zip(&m.target).map(|(a, t)| 0.5 * (a - t).powi(2)).sum();
    if backward {
        let mut dh: Vec<f64> = h.iter().zip(&m.target).map(|(a, t)| a - t).collect();
        for (t, c) in caches.iter().enumerate().rev() {
            let (dx, dprev) = m.cell.backward(c, &dh).unwrap();
            m.x[t].grad.iter_mut().zip(dx).for_each(|(g, d)| *g += d);
            dh = dprev;
        }
        m.h0.grad.iter_mut().zip(dh).for_each(|(g, d)| *g += d);
    }
    loss
}

#[test]
fn gru_zero_params() {
    let cell = GruCell::<f64>::zeros("g", 3, 4);
    let (h, c) = cell.forward(&[0.3, -0.2, 0.9], &[1.0; 4]).unwrap();
    assert_eq!(c.z, vec![0.5; 4]);
    assert_eq!(c.n, vec![0.0; 4]);
    assert_eq!(h, vec![0.5; 4]);
}

#[test]
fn gru_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(100 + seed);
        let mut probe = GruProbe {
            cell: GruCell::new("g", 5, 6, &mut r),
            x: (0..4)
                .map(|t| Param::from_values(format!("x{t}"), &[5], rand_vec(&mut r, 5, 1.0)).unwrap())
                .collect(),
            h0: Param::from_values("h0", &[6], rand_vec(&mut r, 6, 0.5)).unwrap(),
            target: rand_vec(&mut r, 6, 0.8),
        };
        for p in probe.cell.params_mut() {
            if p.name.contains(".b_") {
                p.value = rand_vec(&mut r, p.len(), 0.3);
            }
        }
        let report = grad_check(&mut probe, gru_sequence_loss, 1e-5, 60, &mut r);
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

#[test]
fn gru_orthogonal_recurrent_init() {
    let mut r = rng(7);
    let cell = GruCell::<f64>::new("g", 3, 5, &mut r);
    let cols = 8;
    for i in 0..5 {
        for j in 0..5 {
            let dot: f64 = (0..5)
                .map(|k| cell.w_h.value[i * cols + 3 + k] * cell.w_h.value[j * cols + 3 + k])
                .sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
    assert!(cell.b_z.value.iter().all(|&b| b == 0.0));
}

proptest! {
    #[test]
    fn gru_state_stays_bounded(seed in any::<u64>(), h in prop::collection::vec(-0.999f64..0.999, 4), x in prop::collection::vec(-10.0f64..10.0, 3)) {
        let mut r = rng(seed);
        let cell = GruCell::<f64>::new("g", 3, 4, &mut r);
        let (h2, _) = cell.forward(&x, &h).unwrap();
        prop_assert!(h2.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn double_soft_update(tau in 0.01f64..1.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let mut t1 = Dense::from_parts("d", 1, 1, vec![a], vec![a]).unwrap();
        let mut t2 = t1.clone();
        let src = Dense::from_parts("d", 1, 1, vec![b], vec![b]).unwrap();
        soft_update(&mut t1, &src, tau).unwrap();
        soft_update(&mut t1, &src, tau).unwrap();
        soft_update(&mut t2, &src, 1.0 - (1.0 - tau).powi(2)).unwrap();
        prop_assert!((t1.w.value[0] - t2.w.value[0]).abs() < 1e-12);
    }
}

#[test]
fn soft_update_examples() {
    let src = Dense::from_parts("d", 1, 1, vec![2.0], vec![2.0]).unwrap();
    let mut t = Dense::from_parts("d", 1, 1, vec![0.0], vec![0.0]).unwrap();
    soft_update(&mut t, &src, 1.0).unwrap();
    assert_eq!(t, src);
    let mut t = Dense::from_parts("d", 1, 1, vec![0.0], vec![0.0]).unwrap();
    soft_update(&mut t, &src, 0.5).unwrap();
    assert_eq!(t.w.value, vec![1.0]);
    let mut gap: f64 = 1.0;
    for _ in 0..10 {
        soft_update(&mut t, &src, 0.3).unwrap();
        let new_gap: f64 = src.w.value[0] - t.w.value[0];
        assert!((new_gap - 0.7 * gap).abs() < 1e-12);
        gap = new_gap;
    }
    assert!(soft_update(&mut t, &src, 0.0).is_err());
    let wrong = Dense::from_parts("d", 2, 1, vec![0.0; 2], vec![0.0]).unwrap();
    assert!(soft_update(&mut t, &wrong, 0.5).is_err());
}

#[test]
fn linear_grad_check_is_exact() {
    let mut r = rng(3);
    let mut d = Dense::<f64>::new("d", 4, 1, &mut r);
    let x = [0.5, -1.0, 2.0, 0.25];
    let report = grad_check(
        &mut d,
        |m, backward| {
            let y = m.forward(&x).unwrap()[0];
            if backward {
                m.backward(&x, &[1.0]).unwrap();
            }
            y
        },
        1e-5,
        20,
        &mut r,
    );
    assert!(report.max_rel_error < 1e-9, "{report:?}");
}
