use crtwalk_harness::config::ExperimentConfig;
use crtwalk_harness::report::TrendReport;
use crtwalk_harness::trends::{marginal_ks_trend, run_a_hat_trend, run_tightness_suite};

fn raw_csv(r: &TrendReport) -> Vec<u8> {
    let mut buf = Vec::new();
    r.write_raw_csv(&mut buf).unwrap();
    buf
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n_list: vec![200, 400],
        k_list: vec![2, 4],
        seeds: 4,
        replicas: 50,
        master_size: 20_000,
        excursion_grid: 4000,
        h: 0.02,
        ..Default::default()
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = small();
    let runs: Vec<Vec<Vec<u8>>> = [1, 4]
        .into_iter()
        .map(|t| {
            with_threads(t, || {
                vec![
                    raw_csv(&run_tightness_suite(&ExperimentConfig { n_list: vec![400], ..cfg.clone() }).unwrap()),
                    raw_csv(&run_a_hat_trend(&cfg).unwrap()),
                    raw_csv(&marginal_ks_trend(&cfg).unwrap()),
                    raw_csv(&marginal_ks_trend(&ExperimentConfig { annealed: true, ..cfg.clone() }).unwrap()),
                ]
            })
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn verdicts_recompute_from_emitted_csv() {
    let report = run_tightness_suite(&ExperimentConfig { n_list: vec![400], ..small() }).unwrap();
    let back = report.with_raw_csv(&raw_csv(&report)[..]).unwrap();
    assert_eq!(back.verdicts(), report.verdicts());
}

#[test]
fn tightness_rejects_large_k() {
    let cfg = ExperimentConfig { n_list: vec![50], k_list: vec![8], ..small() };
    assert!(run_tightness_suite(&cfg).is_err());
}
