use fsde::catalog::{lookup, ProblemParams, CATALOG};
use fsde::harness::{coupled_squared_differences, measure, StudyConfig};
use fsde::{FractionalOrders, Method, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn statistic(rows: &[&Vec<f64>]) -> f64 {
    let n = rows[0].len();
    let p = rows.len() as f64;
    (0..n)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / p)
        .fold(0.0, f64::max)
        .sqrt()
}

#[test]
fn doubling_paths_moves_error_less_than_three_bootstrap_errors() {
    let problem = lookup("example1").unwrap().build(&ProblemParams::default()).unwrap();
    let orders = FractionalOrders::new(&[0.1, 0.2]).unwrap();
    let config = SolverConfig::new(Method::Fast, &orders);
    let rows = coupled_squared_differences(&problem, &config, 32, 800, 21).unwrap();
    let half: Vec<&Vec<f64>> = rows[..400].iter().collect();
    let all: Vec<&Vec<f64>> = rows.iter().collect();
    let e_half = statistic(&half);
    let e_all = statistic(&all);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let boots: Vec<f64> = (0..300)
        .map(|_| {
            let sample: Vec<&Vec<f64>> =
                (0..400).map(|_| half[rng.random_range(0..400)]).collect();
            statistic(&sample)
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let se = (boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boots.len() - 1) as f64)
        .sqrt();
    assert!(
        (e_all - e_half).abs() < 3.0 * se,
        "e400 {e_half:e} e800 {e_all:e} se {se:e}"
    );
}

#[test]
fn errors_decrease_with_resolution() {
    for entry in CATALOG {
        let problem = entry.build(&ProblemParams::default()).unwrap();
        let config = SolverConfig::new(Method::Fast, &entry.default_orders());
        let m = measure(&problem, &[config], &[16, 32, 64, 128], 400, 3, 0).unwrap();
        let errors = &m.methods[0].errors;
        let mut inversions = 0;
        for pair in errors.windows(2) {
            if pair[1].value >= pair[0].value {
                inversions += 1;
                let tol = 2.0 * (pair[0].std_err.powi(2) + pair[1].std_err.powi(2)).sqrt();
                assert!(pair[1].value - pair[0].value <= tol, "{}: {errors:?}", entry.id);
            }
        }
        assert!(inversions <= 1, "{}: {errors:?}", entry.id);
    }
}

#[test]
fn study_is_deterministic_and_bounded() {
    for entry in CATALOG {
        let mut config = StudyConfig::new(entry.id, entry.default_orders(), vec![16, 32]);
        config.path_count = 100;
        config.base_seed = 4;
        let a = fsde::harness::run_study(&config).unwrap();
        config.workers = 3;
        let b = fsde::harness::run_study(&config).unwrap();
        assert_eq!(a.methods, b.methods);
        for m in &a.methods {
            assert!(m.mean_square_final.iter().all(|v| v.is_finite() && *v < 100.0));
        }
    }
}
