use lbgame_core::{per_agent_vbf, ServerSpec};
use lbgame_marl::*;
use lbgame_nn::{Checkpoint, Module};
use lbgame_sim::rng::stream;
use lbgame_sim::{AppProfile, SimConfig, TrafficProfile};

fn topology(n: usize) -> Vec<ServerSpec> {
    (0..n)
        .map(|j| {
            let p = if j < n / 2 { 1 } else { 2 };
            ServerSpec::new(j, 1.0, p, p).unwrap()
        })
        .collect()
}

fn sim(n: usize, agents: usize, duration: f64) -> SimConfig {
    let cpus: u32 = topology(n).iter().map(|s| s.cpu_count).sum();
    let rate = 0.845 * cpus as f64;
    SimConfig::new(topology(n), agents, TrafficProfile::from_app(rate, AppProfile::PureCpu), duration)
}

fn light() -> SacConfig {
    SacConfig {
        hidden: 16,
        batch_size: 8,
        ..SacConfig::default()
    }
}

#[test]
fn untrained_eval_is_near_uniform() {
    let n = 8;
    let obs = sim(n, 2, 10.0).observation_dim();
    for seed in 0..100 {
        let l = AgentLearner::<f64>::new(0, obs, n, SacConfig::default(), seed).unwrap();
        let mut rng = stream(seed, "test", 0);
        let o: Vec<f64> = (0..obs).map(|k| ((k * 7 + seed as usize) % 5) as f64 * 0.3).collect();
        let out = l.act(0, &o, &vec![0.0; n], &l.initial_hidden(), ActMode::Eval, &mut rng).unwrap();
        for &w in out.action.weights() {
            assert!(w > 0.5 / n as f64 && w < 2.0 / n as f64, "seed {seed}: {w}");
        }
    }
}

#[test]
fn actions_live_on_the_simplex() {
    let n = 5;
    let obs = sim(n, 1, 10.0).observation_dim();
    let l = AgentLearner::<f64>::new(0, obs, n, light(), 9).unwrap();
    let mut rng = stream(9, "test", 0);
    let mut h = l.initial_hidden();
    let mut prev = vec![0.0; n];
    for t in 0..200 {
        let o: Vec<f64> = (0..obs).map(|k| ((t * 31 + k * 17) % 11) as f64 - 5.0).collect();
        let out = l.act(0, &o, &prev, &h, ActMode::Train, &mut rng).unwrap();
        let w = out.action.weights();
        assert!(w.iter().all(|&x| x > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(out.raw.iter().all(|r| r.abs() <= 1.0));
        h = out.hidden;
        prev = out.raw;
    }
}

#[test]
fn hidden_state_changes_actions() {
    let n = 4;
    let obs = sim(n, 1, 10.0).observation_dim();
    let mut differ = 0;
    for seed in 0..200 {
        let l = AgentLearner::<f64>::new(0, obs, n, light(), seed).unwrap();
        let mut rng = stream(seed, "test", 1);
        let o1: Vec<f64> = (0..obs).map(|k| (k % 3) as f64).collect();
        let o2: Vec<f64> = (0..obs).map(|k| (k % 4) as f64 * 0.5).collect();
        let a = l.act(0, &o1, &vec![0.0; n], &l.initial_hidden(), ActMode::Eval, &mut rng).unwrap();
        let b = l.act(0, &o2, &a.raw, &a.hidden, ActMode::Eval, &mut rng).unwrap();
        if a.action != b.action {
            differ += 1;
        }
    }
    assert!(differ as f64 / 200.0 > 0.99);
}

#[test]
fn non_finite_output_falls_back_to_uniform() {
    let n = 3;
    let mut l = AgentLearner::<f64>::new(0, 4, n, light(), 1).unwrap();
    l.actor.mean.b.value[1] = f64::NAN;
    let mut rng = stream(1, "test", 0);
    let out = l.act(0, &[0.0; 4], &[0.0; 3], &l.initial_hidden(), ActMode::Eval, &mut rng).unwrap();
    assert!(out.fallback);
    assert_eq!(out.action.weights(), &[1.0 / 3.0; 3]);
}

#[test]
fn updates_read_only_own_state() {
    let cfg = sim(4, 2, 20.0);
    let mut tc = TrainConfig::new(cfg.clone(), light(), 2, 5);
    tc.sac.updates_per_episode = 0;
    let out = train::<f64>(&tc).unwrap();
    let (mut a0, mut b0) = (out.learners[0].clone(), out.learners[0].clone());
    let mut other = out.learners[1].clone();
    assert!(!other.buffer.is_empty());
    // scramble everything that belongs to the other agent
    for t in 0..40 {
        let mut r = other.buffer.get(t % other.buffer.len()).unwrap().clone();
        r.reward = 1e6;
        other.buffer.push(r).unwrap();
    }
    for p in other.actor.params_mut() {
        p.value.iter_mut().for_each(|v| *v = 0.0);
    }
    let _ = other.update().unwrap();
    for _ in 0..3 {
        assert_eq!(a0.update().unwrap(), b0.update().unwrap());
    }
    assert_eq!(a0.actor, b0.actor);
}

#[test]
fn smoke_training_writes_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let mut tc = TrainConfig::new(sim(4, 2, 30.0), light(), 20, 3);
    tc.checkpoint_dir = Some(dir.path().to_path_buf());
    tc.config_hash = "smoke".into();
    let out = train::<f64>(&tc).unwrap();
    assert_eq!(out.curve.len(), 40);
    assert!(out.curve.iter().all(|r| r.critic_loss.is_finite() && r.actor_loss.is_finite() && r.alpha > 0.0));
    assert_eq!(out.episode_rewards[1].len(), 20);
    for i in 0..2 {
        let ck = Checkpoint::load(&checkpoint_path(dir.path(), i)).unwrap();
        ck.require_hash("smoke").unwrap();
        assert_eq!(ck.meta["episode"], "20");
        let mut fresh = AgentLearner::<f64>::new(i, out.learners[i].obs_dim, 4, light(), 99).unwrap();
        fresh.restore(&ck).unwrap();
        assert_eq!(fresh.actor, out.learners[i].actor);
        assert_eq!(fresh.critics, out.learners[i].critics);
        assert_eq!(fresh.alpha(), out.learners[i].alpha());
    }
    let csv_path = dir.path().join("curve.csv");
    write_learning_curve(&csv_path, &out.curve).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("episode,agent,mean_reward,actor_loss,critic_loss,alpha\n"));
    assert_eq!(text.lines().count(), 41);

    let again = train::<f64>(&TrainConfig { checkpoint_dir: None, ..tc }).unwrap();
    assert_eq!(again.curve, out.curve);
}

#[test]
fn restore_rejects_other_shapes() {
    let l = AgentLearner::<f64>::new(0, 10, 4, light(), 1).unwrap();
    let ck = l.checkpoint("h");
    let mut wrong = AgentLearner::<f64>::new(0, 10, 5, light(), 1).unwrap();
    assert!(wrong.restore(&ck).is_err());
}

#[test]
fn single_agent_reward_is_global_vbf() {
    let cfg = sim(4, 1, 20.0);
    let l = AgentLearner::<f64>::new(0, cfg.observation_dim(), 4, light(), 2).unwrap();
    let trace = evaluate_episode(&cfg, &[AgentChoice::Learned(&l)], ActMode::Train, 8).unwrap();
    for s in trace.agent_steps[0].iter().skip(1) {
        assert_eq!(s.reward, per_agent_vbf(&s.reward_input).unwrap());
    }
}

#[test]
fn ne_probe_contract() {
    let cfg = sim(4, 2, 8.0);
    let learners = new_learners::<f64>(&cfg, &light(), 4).unwrap();
    let devs = [
        Deviation::Lsq,
        Deviation::Sed,
        Deviation::Uniform,
        Deviation::Policy { label: "self", learners: &learners },
    ];
    let report = ne_gap_probe(&cfg, &learners, &devs, 30, 1, ActMode::Eval).unwrap();
    assert_eq!(report.estimates.len(), 8);
    for e in &report.estimates {
        assert_eq!(e.episodes, 30);
        assert!(e.half_width.is_finite() && e.half_width >= 0.0);
        if e.deviation == "self" {
            assert_eq!(e.mean_gain, 0.0);
            assert_eq!(e.half_width, 0.0);
        }
    }
    assert_eq!(report.gaps.len(), 2);
}

#[test]
fn half_width_matches_t_table() {
    let x: Vec<f64> = (0..30).map(|k| (k % 2) as f64).collect();
    let (m, hw) = mean_half_width(&x);
    assert!((m - 0.5).abs() < 1e-12);
    let sd = (30.0 * 0.25 / 29.0f64).sqrt();
    assert!((hw - 2.045_229_6 * sd / 30f64.sqrt()).abs() < 1e-6);
}
