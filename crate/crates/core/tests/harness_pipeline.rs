use bootstrap_bench::datagen::Method;
use bootstrap_bench::envs::EnvName;
use bootstrap_bench::harness::run::{self, CellStatus, CELLS_DIR, ERRORS_FILE, TABLE_FILE};
use bootstrap_bench::harness::{run_experiment, CellKey, ExperimentConfig, RunOptions};
use bootstrap_bench::metrics::{parse_csv, ErrorRow};
use bootstrap_bench::model::TrainConfig;
use bootstrap_bench::ns::NsConfig;

fn tiny_config(env: EnvName) -> ExperimentConfig {
    ExperimentConfig {
        methods: Method::ALL.to_vec(),
        budgets: vec![2],
        repetitions: 2,
        master_seed: 17,
        train: TrainConfig {
            epochs: 3,
            ensemble_size: 2,
            hidden: vec![8, 8],
            ..TrainConfig::default()
        },
        ns: NsConfig {
            population_size: 6,
            generations: 2,
            k_nearest: 3,
            archive_add_per_gen: 2,
            suite_size: 4,
            ..NsConfig::default()
        },
        ..ExperimentConfig::for_env(env)
    }
}

#[test]
fn one_step_errors_match_direct_predictions() {
    let config = tiny_config(EnvName::RedundantArm);
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config, &RunOptions { out_dir: dir.path().to_path_buf(), jobs: 2 }).unwrap();
    let rows: Vec<ErrorRow> =
        parse_csv(&std::fs::read_to_string(dir.path().join(ERRORS_FILE)).unwrap(), "errors").unwrap();

    let cell = CellKey {
        method: Method::Rarph,
        budget: 2,
        repetition: 1,
    };
    let suite = run::build_suite(&config).unwrap().suite();
    let model = run::train_cell(&config, &cell, &run::gather_cell(&config, &cell).unwrap()).unwrap();
    for (id, entry) in suite.iter().enumerate() {
        let first = &entry.episode.transitions[0];
        let predicted = model.predict_step(&first.state, &first.action).unwrap();
        let want = predicted
            .iter()
            .zip(&first.next_state)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            .sqrt();
        let row = rows
            .iter()
            .find(|r| {
                r.method == cell.method
                    && r.repetition == cell.repetition
                    && r.horizon == 1
                    && r.trajectory_id == id
            })
            .unwrap();
        assert!((row.error - want).abs() < 1e-12, "trajectory {id}: {} vs {want}", row.error);
    }
}

#[test]
fn interrupted_runs_resume_to_the_same_outputs() {
    let config = tiny_config(EnvName::RedundantArmNoWalls);
    let dir = tempfile::tempdir().unwrap();
    let options = RunOptions {
        out_dir: dir.path().to_path_buf(),
        jobs: 1,
    };
    let first = run_experiment(&config, &options).unwrap();
    assert!(!first.has_failures(), "{:?}", first.failures);
    let errors = std::fs::read(dir.path().join(ERRORS_FILE)).unwrap();
    let table = std::fs::read(dir.path().join(TABLE_FILE)).unwrap();

    // One cell lost, one cut short mid-write.
    let cells = dir.path().join(CELLS_DIR);
    std::fs::remove_file(cells.join("random_policy_b2_r0.json")).unwrap();
    std::fs::write(cells.join("random_actions_b2_r1.json"), b"{\"run_hash\":").unwrap();

    let second = run_experiment(&config, &options).unwrap();
    let status = |stem: &str| second.cells.iter().find(|c| c.cell.stem() == stem).unwrap().status;
    assert_eq!(status("random_policy_b2_r0"), CellStatus::Computed);
    assert_eq!(status("random_actions_b2_r1"), CellStatus::Computed);
    assert_eq!(status("rarph_b2_r0"), CellStatus::Resumed);
    assert_eq!(std::fs::read(dir.path().join(ERRORS_FILE)).unwrap(), errors);
    assert_eq!(std::fs::read(dir.path().join(TABLE_FILE)).unwrap(), table);

    // A different seed must not reuse the old cells.
    let reseeded = ExperimentConfig {
        master_seed: 18,
        ..config
    };
    let third = run_experiment(&reseeded, &options).unwrap();
    assert!(third.cells.iter().all(|c| c.status == CellStatus::Computed));
}
