use spme_core::{Grid, NoiseModel, Scheme, SchemeConfig};
use spme_harness::config::{ExperimentConfig, ExperimentKind};
use spme_harness::experiments::*;
use spme_harness::output;

fn small() -> ExperimentConfig {
    ExperimentConfig { j_list: vec![16, 32], n_list: vec![16, 32], samples: 4, ..Default::default() }
}

#[test]
fn deterministic_table_refines() {
    let t = run_convergence_det(&small()).unwrap();
    assert_eq!(t.cells.len(), 4);
    let coarse = t.get(16, 16).unwrap().error;
    let fine = t.get(32, 32).unwrap().error;
    assert!(fine < coarse, "{fine} !< {coarse}");
    assert!(t.cells.iter().all(|c| c.error > 0.0 && c.error_gauss > 0.0));
}

#[test]
fn vanishing_noise_recovers_the_deterministic_error() {
    let cfg = ExperimentConfig { sigma: 1e-7, ..small() };
    let det = deterministic_error(&cfg, 32, 32).unwrap();
    let st = stochastic_cell(&cfg, 32, 32).unwrap();
    assert_eq!(st.path_errors.len(), 4);
    for e in &st.path_errors {
        assert!((e - det.error).abs() < 1e-4 * det.error, "{e} vs {}", det.error);
    }
    assert_eq!(st.failures, 0);
}

#[test]
fn stochastic_paths_depend_only_on_seed() {
    let cfg = small();
    let a = stochastic_cell(&cfg, 16, 32).unwrap();
    let b = stochastic_cell(&cfg, 16, 32).unwrap();
    assert_eq!(a.path_errors, b.path_errors);
    let shifted = stochastic_cell(&ExperimentConfig { seed: 1, ..cfg }, 16, 32).unwrap();
    assert_eq!(a.path_errors[1..], shifted.path_errors[..3]);
}

#[test]
fn stochastic_rejects_unsupported_settings() {
    let cfg = ExperimentConfig { d: 2, ..small() };
    assert!(run_convergence_stoch(&cfg).is_err());
}

#[test]
fn support_rows_cover_every_step() {
    let cfg = ExperimentConfig { j_list: vec![32], n_list: vec![16], sigma: 0.0, ..small() };
    let rows = run_support_study(&cfg).unwrap();
    assert_eq!(rows.len(), 17);
    assert!(rows.windows(2).all(|w| w[1].radius >= w[0].radius));
    assert!(rows.iter().all(|r| r.left <= r.right));
    // the regularized delta occupies the two central cells
    assert!((rows[0].right - 3.0 / 32.0).abs() < 1e-12);
}

#[test]
fn zero_amplitude_spacetime_matches_deterministic_run() {
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::Spacetime,
        j_list: vec![16],
        n_list: vec![8],
        sigma0: 0.0,
        samples: 2,
        ..Default::default()
    };
    let runs = run_spacetime(&cfg).unwrap();
    let grid = Grid::new(1.5, 16, 1).unwrap();
    let det = Scheme::new(&grid, SchemeConfig::new(0.1, 8, 3.0)).unwrap().run_path(0).unwrap();
    for run in &runs {
        for (a, b) in run.trajectory.states().iter().zip(det.states()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
            }
        }
    }
    let noisy = run_spacetime(&ExperimentConfig { sigma0: 1.0 / 64.0, ..cfg }).unwrap();
    assert_ne!(noisy[0].trajectory.states()[8], noisy[1].trajectory.states()[8]);
}

#[test]
fn projection_study_has_both_targets() {
    let cfg = ExperimentConfig { d: 2, j_list: vec![8, 16, 32], ..Default::default() };
    let study = run_projection_study(&cfg).unwrap();
    assert_eq!(study.rows.len(), 6);
    let f = study.fit(ProjectionTarget::Barenblatt, false).unwrap();
    assert!(f.slope > 0.5);
}

#[test]
fn writers_produce_readable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_convergence_det(&small()).unwrap();
    let wide = dir.path().join("sub/wide.csv");
    output::write_convergence_wide(&wide, &t).unwrap();
    let mut rdr = csv::Reader::from_path(&wide).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["N\\J", "16", "32"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let v: f64 = rows[0][1].parse().unwrap();
    assert!((v - t.get(16, 16).unwrap().error).abs() <= 1e-5 * v);

    let grid = Grid::new(1.5, 8, 1).unwrap();
    let sc = SchemeConfig::new(0.1, 4, 3.0).with_noise(NoiseModel::Linear { amplitude: 1.0 });
    let traj = Scheme::new(&grid, sc).unwrap().run_path(3).unwrap();
    let path = dir.path().join("traj.csv");
    output::write_trajectory(&path, &traj).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 10);
    let last = rdr.records().last().unwrap().unwrap();
    let c1: f64 = last[2].parse().unwrap();
    assert_eq!(c1, traj.state(4).values()[0]);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "experiment = \"support\"\nJ = [64]\nN = [128]\nsigma = 0.5\nout = \"x\"\n").unwrap();
    let c = ExperimentConfig::from_file(&path).unwrap();
    assert_eq!(c.experiment, ExperimentKind::Support);
    assert_eq!(c.pairs(), vec![(64, 128)]);
    assert_eq!(c.sigma, 0.5);
    assert!(ExperimentConfig::from_file(&dir.path().join("missing.toml")).is_err());
}
