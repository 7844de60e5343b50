mod common;

use lbgame_core::{fairness, ServerSpec};
use lbgame_sim::rng::stream;
use lbgame_sim::{
    generate_arrivals, run_episode, run_episode_with_arrivals, AgentPolicy, AppProfile,
    ArrivalSpec, PolicyKind, QueueKind, SimConfig, Stage, TaskStatus, TrafficProfile,
};
use rand::Rng;

const ALL_BASELINES: [PolicyKind; 5] = [
    PolicyKind::Ecmp,
    PolicyKind::Wcmp,
    PolicyKind::Lsq,
    PolicyKind::Sed,
    PolicyKind::Oracle,
];

#[test]
fn zero_traffic() {
    let cfg = common::table_config(AppProfile::PureCpu, 0.0);
    let tr = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Sed), 1).unwrap();
    assert!(tr.tasks.is_empty());
    assert_eq!(tr.ticks.len(), 121);
    assert!(tr.ticks.iter().all(|t| t.loads.as_slice().iter().all(|&l| l == 0.0)));
    assert_eq!(tr.potential(), 0.0);
}

#[test]
fn single_server_gets_everything() {
    let servers = vec![ServerSpec::new(0, 1.0, 2, 2).unwrap()];
    let cfg = SimConfig::new(servers, 1, TrafficProfile::from_app(1.5, AppProfile::Balanced), 20.0);
    for kind in ALL_BASELINES {
        let tr = run_episode(&cfg, &mut common::baselines(&cfg, kind), 4).unwrap();
        assert!(!tr.tasks.is_empty());
        assert!(tr.tasks.iter().all(|t| t.assigned_server == Some(0)));
    }
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = common::table_config(AppProfile::PureCpu, 10.0);
    cfg.tick = 0.0;
    assert!(run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Lsq), 0).is_err());
    let mut cfg = common::table_config(AppProfile::PureCpu, 10.0);
    assert!(cfg.schedule_capacity_change(3, 25.0, 0.0).is_err());
    assert!(cfg.schedule_capacity_change(9, 25.0, 0.5).is_err());
    let cfg = common::table_config(AppProfile::PureCpu, 10.0);
    assert!(run_episode(&cfg, &mut [AgentPolicy::Lsq], 0).is_err());
    assert!(run_episode(&cfg, &mut [AgentPolicy::Lsq, AgentPolicy::Sed(vec![1.0; 3])], 0).is_err());
}

#[test]
fn conservation_and_soundness_over_seeds() {
    for (i, app) in [AppProfile::PureCpu, AppProfile::CpuIntensive, AppProfile::IoIntensive]
        .into_iter()
        .enumerate()
    {
        let cfg = common::table_config(app, 10.14);
        for seed in 0..7u64 {
            let kind = ALL_BASELINES[(seed as usize + i) % ALL_BASELINES.len()];
            let tr = run_episode(&cfg, &mut common::baselines(&cfg, kind), seed).unwrap();
            assert_eq!(tr.conservation_failures, 0, "{app:?} seed {seed}");
            assert!(tr.end_counts.conserved());
            assert!(tr.final_counts.conserved());
            assert_eq!(tr.final_counts.in_flight(), 0);
            assert!(tr.ticks.iter().all(|t| t.counts.conserved()));
            assert!(tr.max_stage_work_error <= 1e-6, "{}", tr.max_stage_work_error);
            for t in &tr.tasks {
                let stamps = [t.t_assigned, t.t_first_service, t.t_server_done, t.t_completed];
                let mut last = t.arrival_time;
                for s in stamps.into_iter().flatten() {
                    assert!(s >= last);
                    last = s;
                }
            }
        }
    }
}

#[test]
fn queue_limits_hold_under_overload() {
    let cfg = common::table_config(AppProfile::PureCpu, 20.28);
    let tr = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Ecmp), 2).unwrap();
    assert!(tr.rejected() > 0);
    for (j, s) in cfg.servers.iter().enumerate() {
        assert!(tr.max_cpu_active[j] <= s.cpu_cap as usize);
        assert!(tr.max_backlog[j] <= cfg.backlog_capacity);
    }
    assert_eq!(tr.max_backlog.iter().max(), Some(&64));
    for t in tr.tasks.iter().filter(|t| t.status == TaskStatus::Rejected) {
        assert!((t.fct().unwrap() - 40.0).abs() < 1e-9);
    }
    assert_eq!(tr.fct_values().iter().filter(|&&f| f == 40.0).count(), tr.rejected());
    assert_eq!(tr.conservation_failures, 0);
}

#[test]
fn identical_runs_hash_identically() {
    let cfg = common::table_config(AppProfile::CpuIntensive, 10.14);
    for kind in ALL_BASELINES {
        let a = run_episode(&cfg, &mut common::baselines(&cfg, kind), 17).unwrap();
        let b = run_episode(&cfg, &mut common::baselines(&cfg, kind), 17).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a, b);
        let c = run_episode(&cfg, &mut common::baselines(&cfg, kind), 18).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}

#[test]
fn unit_capacity_factor_is_a_no_op() {
    let cfg = common::table_config(AppProfile::PureCpu, 10.14);
    let mut changed = cfg.clone();
    for j in 4..8 {
        changed.schedule_capacity_change(j, 25.0, 1.0).unwrap();
    }
    let a = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Sed), 3).unwrap();
    let b = run_episode(&changed, &mut common::baselines(&cfg, PolicyKind::Sed), 3).unwrap();
    assert_eq!(a.digest(), b.digest());
}

#[test]
fn halving_fast_group_raises_fct() {
    let cfg = common::table_config(AppProfile::PureCpu, 10.14);
    let mut slow = cfg.clone();
    for j in 4..8 {
        slow.schedule_capacity_change(j, 25.0, 0.5).unwrap();
    }
    let mut diffs: Vec<f64> = (0..10)
        .map(|seed| {
            let a = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Sed), seed).unwrap();
            let b = run_episode(&slow, &mut common::baselines(&cfg, PolicyKind::Sed), seed).unwrap();
            b.mean_fct().unwrap() - a.mean_fct().unwrap()
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    assert!((diffs[4] + diffs[5]) / 2.0 > 0.0, "{diffs:?}");
}

fn single_task_config(duration: f64) -> SimConfig {
    let servers = vec![ServerSpec::new(0, 1.0, 1, 1).unwrap()];
    let mut cfg = SimConfig::new(servers, 1, TrafficProfile::from_app(0.0, AppProfile::PureCpu), duration);
    cfg.latency = (0.0, 0.0);
    cfg
}

#[test]
fn capacity_change_on_idle_server_waits_for_work() {
    let mut cfg = single_task_config(10.0);
    cfg.schedule_capacity_change(0, 2.0, 0.5).unwrap();
    let arrivals = vec![vec![ArrivalSpec {
        time: 5.0,
        stages: vec![Stage { kind: QueueKind::Cpu, work: 1.0 }],
    }]];
    let tr = run_episode_with_arrivals(&cfg, &mut [AgentPolicy::Lsq], 0, arrivals).unwrap();
    let t = &tr.tasks[0];
    assert_eq!(t.t_first_service, Some(5.0));
    assert!((t.t_server_done.unwrap() - 7.0).abs() < 1e-12);
    assert!(tr.ticks.iter().filter(|s| s.time < 5.0).all(|s| s.loads.as_slice()[0] == 0.0));
}

#[test]
fn loads_snapshot_examples() {
    let cfg = single_task_config(4.0);
    let arrivals = vec![vec![ArrivalSpec {
        time: 0.25,
        stages: vec![Stage { kind: QueueKind::Cpu, work: 2.25 }],
    }]];
    let tr = run_episode_with_arrivals(&cfg, &mut [AgentPolicy::Lsq], 0, arrivals).unwrap();
    assert_eq!(tr.ticks[0].loads.as_slice(), &[0.0]);
    assert!((tr.ticks[1].loads.as_slice()[0] - 2.0).abs() < 1e-12);
    assert!((tr.ticks[1].per_agent.get(0, 0) - 2.0).abs() < 1e-12);
}

fn micro_instance(seed: u64) -> (SimConfig, Vec<Vec<ArrivalSpec>>) {
    let servers = vec![
        ServerSpec::new(0, 1.0, 1, 1).unwrap(),
        ServerSpec::new(1, 1.0, 2, 2).unwrap(),
        ServerSpec::new(2, 0.5, 1, 3).unwrap(),
    ];
    let mut cfg = SimConfig::new(servers, 2, TrafficProfile::from_app(0.0, AppProfile::PureCpu), 30.0);
    cfg.backlog_capacity = 2;
    let mut rng = stream(seed, "micro", 0);
    let mut arrivals = vec![Vec::new(), Vec::new()];
    for _ in 0..5 {
        let mut stages = vec![Stage { kind: QueueKind::Cpu, work: rng.gen_range(0.2..2.0) }];
        if rng.gen_bool(0.5) {
            stages.push(Stage { kind: QueueKind::Io, work: rng.gen_range(0.1..1.0) });
        }
        if rng.gen_bool(0.3) {
            stages.push(Stage { kind: QueueKind::Cpu, work: rng.gen_range(0.1..1.0) });
        }
        arrivals[rng.gen_range(0..2)].push(ArrivalSpec { time: rng.gen_range(0.0..0.4), stages });
    }
    for a in &mut arrivals {
        a.sort_by(|x, y| x.time.total_cmp(&y.time));
    }
    (cfg, arrivals)
}

#[test]
fn remaining_time_matches_replay() {
    for seed in 0..200 {
        let (cfg, arrivals) = micro_instance(seed);
        let kind = ALL_BASELINES[seed as usize % 5];
        let tr = run_episode_with_arrivals(&cfg, &mut common::baselines(&cfg, kind), seed, arrivals).unwrap();
        let snap = &tr.ticks[1];
        assert_eq!(snap.time, 0.5);
        for j in 0..3 {
            let last_done = tr
                .tasks
                .iter()
                .filter(|t| t.assigned_server == Some(j) && t.status != TaskStatus::Rejected)
                .filter_map(|t| t.t_server_done)
                .fold(0.5f64, f64::max);
            let replay = last_done - 0.5;
            let l = snap.loads.as_slice()[j];
            assert!((l - replay).abs() < 1e-9, "seed {seed} server {j}: {l} vs {replay}");
        }
        let sums = snap.per_agent.column_sums();
        for j in 0..3 {
            assert!((sums.as_slice()[j] - snap.loads.as_slice()[j]).abs() < 1e-9);
        }
    }
}

#[test]
fn oracle_micro_instances() {
    let kinds = [PolicyKind::Oracle, PolicyKind::Ecmp, PolicyKind::Wcmp, PolicyKind::Lsq, PolicyKind::Sed];
    let mut totals = [0.0; 5];
    for seed in 0..200 {
        let (cfg, arrivals) = micro_instance(seed);
        for (k, &kind) in kinds.iter().enumerate() {
            let tr = run_episode_with_arrivals(&cfg, &mut common::baselines(&cfg, kind), seed, arrivals.clone()).unwrap();
            totals[k] += tr.tasks.iter().filter_map(|t| t.t_server_done).fold(0.0, f64::max);
        }
    }
    for k in 1..5 {
        assert!(totals[0] <= totals[k], "{} beats oracle: {totals:?}", kinds[k].name());
    }
}

#[test]
fn observation_counts_match_local_queues() {
    let mut cfg = common::table_config(AppProfile::CpuIntensive, 10.14);
    cfg.record_observations = true;
    cfg.duration = 20.0;
    let tr = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Lsq), 5).unwrap();
    let dim = cfg.observation_dim();
    assert_eq!(dim, 101);
    for steps in &tr.agent_steps {
        for s in steps {
            let o = s.observation.as_ref().unwrap();
            assert_eq!(o.len(), dim);
            for j in 0..8 {
                let scaled = f64::from(s.q[j]) / f64::from(cfg.servers[j].cpu_cap);
                assert_eq!(o[j * 11], scaled);
            }
            assert_eq!(&o[93..], &[0.125; 8]);
        }
    }
    let first = tr.agent_steps[0][0].observation.as_ref().unwrap();
    assert!(first.iter().take(93).all(|&v| v == 0.0));
}

#[test]
fn reward_is_vbf_of_discounted_durations() {
    let cfg = common::table_config(AppProfile::PureCpu, 10.14);
    let tr = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Sed), 8).unwrap();
    for steps in &tr.agent_steps {
        assert_eq!(steps[0].reward, 0.0);
        for s in &steps[1..] {
            assert_eq!(s.reward, fairness::per_agent_vbf(&s.reward_input).unwrap());
        }
    }
}

#[test]
fn bounded_queues_under_stability() {
    let mut cfg = common::table_config(AppProfile::PureCpu, 10.14);
    cfg.duration = 300.0;
    for seed in 0..10 {
        let tr = run_episode(&cfg, &mut common::baselines(&cfg, PolicyKind::Sed), seed).unwrap();
        let [_, mid, last] = tr.resident_by_third;
        // 12 CPUs at 84.5% keep about 10 tasks resident
        assert!(last < 40.0 && last < 2.0 * mid + 10.0, "seed {seed}: {:?}", tr.resident_by_third);
    }
}

#[test]
fn halving_rates_never_helps() {
    let base = common::table_config(AppProfile::CpuIntensive, 6.0);
    let mut slow = base.clone();
    for s in &mut slow.servers {
        s.processing_rate *= 0.5;
    }
    for seed in 0..5 {
        let arrivals = generate_arrivals(&base.traffic, base.duration, base.agents, seed);
        for kind in ALL_BASELINES {
            let a = run_episode_with_arrivals(&base, &mut common::baselines(&base, kind), seed, arrivals.clone()).unwrap();
            let b = run_episode_with_arrivals(&slow, &mut common::baselines(&base, kind), seed, arrivals.clone()).unwrap();
            assert!(b.mean_fct().unwrap() >= a.mean_fct().unwrap(), "{} seed {seed}", kind.name());
        }
    }
}
