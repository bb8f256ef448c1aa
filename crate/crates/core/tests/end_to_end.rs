use swarmloc_core::extend::extend_swarm;
use swarmloc_core::sim::{generate_trajectories, synthesize_observations, ScenarioConfig};
use swarmloc_core::trilat::{default_tolerance, solve_constellation, Disambiguation, GaugeConvention};
use swarmloc_core::{euclidean_distance, Configuration, RobotId, Timestamp};

#[test]
fn noiseless_swarm_is_recovered_from_two_rounds() {
    for seed in 0..5u64 {
        let cfg = ScenarioConfig {
            n_robots: 12,
            n_steps: 1,
            seed,
            ..ScenarioConfig::default()
        };
        let traj = generate_trajectories(&cfg).unwrap();
        let rounds = synthesize_observations(&traj, &cfg).unwrap();
        let gauge = GaugeConvention::nearest(&rounds[0].distances, RobotId(0)).unwrap();
        let Ok(Disambiguation::Unique(r)) =
            solve_constellation(&rounds[0], &rounds[1], &gauge, default_tolerance(0.0))
        else {
            panic!("seed {seed}: constellation not unique");
        };
        let ext = extend_swarm(&r.before, &rounds[0]);
        assert!(ext.unresolved.is_empty(), "seed {seed}");

        let world = traj.positions_at_step(0);
        let truth = Configuration::from_world(
            RobotId(0),
            Timestamp(0.0),
            (0..12).map(|i| (RobotId::from(i), world[i])),
        )
        .unwrap();
        for id in truth.ids() {
            let est = ext.configuration.get(id).expect("placed");
            let err = euclidean_distance(est, truth.get(id).unwrap());
            assert!(err < 1e-6, "seed {seed} robot {id:?}: {err}");
        }
    }
}

#[test]
fn same_seed_same_observations() {
    let cfg = ScenarioConfig {
        n_robots: 6,
        n_steps: 3,
        sigma_distance: 0.1,
        seed: 42,
        ..ScenarioConfig::default()
    };
    let run = || {
        let traj = generate_trajectories(&cfg).unwrap();
        synthesize_observations(&traj, &cfg).unwrap()
    };
    assert_eq!(run(), run());
}
