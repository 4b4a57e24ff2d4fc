use nmdyn::integrator::{EvolveOptions, Scheme};
use nmdyn::measures::{moment_report, push_forward, sample_measure, MeasureSpec};
use nmdyn::scenarios;
use nmdyn::verify::{run_suite, Suite, VerifyOptions};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn push_forward_is_independent_of_worker_count() {
    let sc = scenarios::reference().unwrap();
    let measure = MeasureSpec::Mixture(vec![
        (0.3, MeasureSpec::Dirac { center: sc.initial.clone() }),
        (0.7, scenarios::reference_gaussian_measure(&sc, 0.1, 0.02)),
    ]);
    let keep = EvolveOptions {
        sample_every: 5,
        keep_states: true,
    };
    let run = |threads| {
        pool(threads).install(|| {
            let e0 = sample_measure(&measure, 13, 99, sc.model.grid()).unwrap();
            let e = push_forward(&sc.model, &e0, 0.2, 0.02, Scheme::Strang, Some(keep)).unwrap();
            let mut csv = Vec::new();
            e.write_csv(&mut csv).unwrap();
            let report = serde_json::to_string(&moment_report(sc.model.grid(), &e).unwrap()).unwrap();
            (csv, report)
        })
    };
    assert_eq!(run(1), run(5));
}

#[test]
fn different_seeds_give_different_ensembles() {
    let sc = scenarios::reference().unwrap();
    let measure = scenarios::reference_gaussian_measure(&sc, 0.1, 0.02);
    let a = sample_measure(&measure, 4, 1, sc.model.grid()).unwrap();
    let b = sample_measure(&measure, 4, 2, sc.model.grid()).unwrap();
    assert_ne!(a.samples, b.samples);
    let again = sample_measure(&measure, 4, 1, sc.model.grid()).unwrap();
    assert_eq!(a.samples, again.samples);
}

#[test]
fn fast_suites_pass() {
    let options = VerifyOptions {
        draws: Some(25),
        ..VerifyOptions::default()
    };
    for suite in [Suite::Gauge, Suite::Quadrature, Suite::MvfiIdentity, Suite::FrameCovariance, Suite::LemmaBounds] {
        let report = run_suite(suite, &options).unwrap();
        assert!(report.passed, "{}", report.table());
    }
}

#[test]
fn suite_reports_are_reproducible() {
    let options = VerifyOptions::default();
    let a = serde_json::to_string(&run_suite(Suite::MvfiIdentity, &options).unwrap()).unwrap();
    let b = pool(3).install(|| serde_json::to_string(&run_suite(Suite::MvfiIdentity, &options).unwrap()).unwrap());
    assert_eq!(a, b);
}
