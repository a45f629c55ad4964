//! Acceptance suite: one test per shipped criterion, each printing a
//! PASS line with the measured quantities (run with `--nocapture` to see
//! them on success).
//!
//! Heavy criteria hold a global lock so their runtime budgets are measured
//! against the machine, not against sibling tests.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use covsel::estimate::{Method, PrecisionEstimate, SolverOptions};
use covsel::glasso::{fit_glasso, kkt_residual};
use covsel::linalg::{edge_set, min_eigenvalue, sym_eigen, DEFAULT_EDGE_TOL};
use covsel::lvglasso::{fit_lvglasso, lvglasso_objective};
use covsel::mat::SymMat;
use covsel::select::{hard_threshold, threshold_for_edge_count};
use covsel::simulate::{
    chain_precision, latent_spec, marginal_precision, small_world_precision, LatentKnobs,
};
use covsel_cli::config::ExperimentConfig;
use covsel_cli::record::ResultRecord;
use covsel_cli::runner::run_experiment;

fn lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn load_shipped_config(name: &str) -> ExperimentConfig {
    let path = repo_path(&format!("configs/{name}"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    ExperimentConfig::from_json(&text).expect("shipped config is valid")
}

fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> Vec<ResultRecord> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("pool")
        .install(|| run_experiment(cfg).expect("experiment runs"))
}

fn mean_f1(records: &[ResultRecord], method: &str) -> f64 {
    let rows: Vec<&ResultRecord> = records.iter().filter(|r| r.method == method).collect();
    assert!(!rows.is_empty(), "no rows for {method}");
    rows.iter().map(|r| r.f1).sum::<f64>() / rows.len() as f64
}

fn replicate_f1(records: &[ResultRecord], method: &str, replicate: usize) -> f64 {
    records
        .iter()
        .find(|r| r.method == method && r.replicate == replicate)
        .unwrap_or_else(|| panic!("missing {method} replicate {replicate}"))
        .f1
}

fn random_spd(p: usize, seed: u64) -> SymMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    SymMat::symmetrized(&(a.transpose() * &a / p as f64 + DMatrix::identity(p, p))).unwrap()
}

#[test]
fn criterion_01_latent_base_ordering() {
    let _guard = lock();
    let mut cfg = load_shipped_config("latent_base.json");
    cfg.sample_sizes = vec![150];
    let start = Instant::now();
    let records = run_with_threads(&cfg, 4);
    let elapsed = start.elapsed();

    let (mg, mt, ml) =
        (mean_f1(&records, "glasso"), mean_f1(&records, "tglasso"), mean_f1(&records, "lvglasso"));
    assert!(mt > mg, "mean F1 tglasso {mt:.3} not above glasso {mg:.3}");
    assert!(mt > ml, "mean F1 tglasso {mt:.3} not above lvglasso {ml:.3}");

    let mut wins_glasso = 0;
    let mut wins_lv = 0;
    for rep in 0..cfg.replicates {
        let t = replicate_f1(&records, "tglasso", rep);
        if t > replicate_f1(&records, "glasso", rep) {
            wins_glasso += 1;
        }
        if t > replicate_f1(&records, "lvglasso", rep) {
            wins_lv += 1;
        }
    }
    assert!(wins_glasso >= 4, "tglasso beat glasso in only {wins_glasso}/5 replicates");
    assert!(wins_lv >= 4, "tglasso beat lvglasso in only {wins_lv}/5 replicates");
    assert!(elapsed.as_secs() <= 120, "runtime {elapsed:?} exceeded 120 s");

    // Oracle-count tuning never overshoots the true edge count.
    for r in &records {
        assert!(r.edges_selected <= 30, "{} selected {} edges", r.method, r.edges_selected);
    }
    println!(
        "criterion 1 (latent base ordering): PASS — mean F1 tglasso {mt:.3} vs glasso {mg:.3} \
         vs lvglasso {ml:.3}; margins positive in {wins_glasso}/5 and {wins_lv}/5; {elapsed:?}"
    );
}

#[test]
fn criterion_02_no_latent_improvement() {
    let _guard = lock();
    let cfg = load_shipped_config("no_latent_vary_n.json");
    let start = Instant::now();
    let records = run_with_threads(&cfg, 4);
    let elapsed = start.elapsed();

    let mut by_n = Vec::new();
    for &n in &cfg.sample_sizes {
        let rows: Vec<ResultRecord> = records.iter().filter(|r| r.n == n).cloned().collect();
        let mg = mean_f1(&rows, "glasso");
        let mt = mean_f1(&rows, "tglasso");
        assert!(mt >= mg, "n {n}: tglasso {mt:.3} below glasso {mg:.3}");
        by_n.push((n, mg, mt));
    }
    let t50 = by_n.iter().find(|x| x.0 == 50).unwrap().2;
    let t500 = by_n.iter().find(|x| x.0 == 500).unwrap().2;
    assert!(t500 > t50, "tglasso at n=500 ({t500:.3}) not above n=50 ({t50:.3})");
    assert!(elapsed.as_secs() <= 60, "runtime {elapsed:?} exceeded 60 s");
    println!(
        "criterion 2 (no-latent improvement): PASS — tglasso/glasso per n: {:?}; trend {t50:.3} -> {t500:.3}; {elapsed:?}",
        by_n.iter().map(|(n, g, t)| format!("n={n}: {t:.3} vs {g:.3}")).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_03_eta_knob_monotonicity() {
    let _guard = lock();
    let theta = small_world_precision(30, 2, 0.1, 1.0, 7).unwrap();
    let base = LatentKnobs {
        p_h: 5,
        oh_magnitude: 0.1,
        h_diag: 4.0,
        oh_sparsity: 0.0,
        h_sparsity: 0.0,
        h_offdiag_magnitude: 0.0,
    };

    let eta_at = |knobs: LatentKnobs| {
        let spec = latent_spec(&theta, &knobs, 7).unwrap();
        assert_eq!(spec.diagnostics.diagonal_repair, 0.0, "diagonal repair would confound the sweep");
        spec.eta
    };

    let ph: Vec<f64> = [5usize, 10, 20, 40]
        .iter()
        .map(|&p_h| eta_at(LatentKnobs { p_h, ..base }))
        .collect();
    assert!(
        ph.windows(2).all(|w| w[1] - w[0] > 1e-12),
        "eta not strictly increasing in p_h: {ph:?}"
    );

    let oh: Vec<f64> = [0.1, 0.2, 0.4]
        .iter()
        .map(|&m| eta_at(LatentKnobs { oh_magnitude: m, h_diag: 8.0, ..base }))
        .collect();
    assert!(
        oh.windows(2).all(|w| w[1] - w[0] > 1e-12),
        "eta not strictly increasing in oh_magnitude: {oh:?}"
    );

    let hd: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&h_diag| eta_at(LatentKnobs { h_diag, ..base }))
        .collect();
    assert!(
        hd.windows(2).all(|w| w[0] - w[1] > 1e-12),
        "eta not strictly decreasing in h_diag: {hd:?}"
    );

    println!(
        "criterion 3 (eta knob monotonicity): PASS — p_h {ph:?}, oh_magnitude {oh:?}, h_diag {hd:?}"
    );
}

#[test]
fn criterion_04_glasso_kkt_suite() {
    let _guard = lock();
    let start = Instant::now();
    let opts = SolverOptions::with_tol(1e-7);
    let sizes = [5usize, 10, 25];
    let mut fits = 0usize;
    let mut converged = 0usize;
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let p = sizes[seed as usize % sizes.len()];
        let sigma = random_spd(p, 1000 + seed);
        for lambda in [0.05, 0.1, 0.3] {
            let est = fit_glasso(&sigma, lambda, &opts).unwrap();
            fits += 1;
            if est.converged {
                converged += 1;
                let r = kkt_residual(&est, &sigma, lambda).unwrap();
                assert!(r <= 1e-4, "seed {seed} p {p} lambda {lambda}: residual {r:.3e}");
                worst = worst.max(r);
            }
        }
    }
    let rate = converged as f64 / fits as f64;
    assert!(rate >= 0.98, "only {converged}/{fits} fits converged");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() <= 30, "runtime {elapsed:?} exceeded 30 s");
    println!(
        "criterion 4 (glasso KKT suite): PASS — {converged}/{fits} converged, worst residual {worst:.2e}, {elapsed:?}"
    );
}

#[test]
fn criterion_05_clime_analytic_and_lp_oracle() {
    let _guard = lock();
    let opts = SolverOptions::default();
    let fit = covsel::clime::fit_clime(&SymMat::identity(10), 0.2, &opts).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            let want = if i == j { 0.8 } else { 0.0 };
            assert!(
                (fit.estimate.theta.get(i, j) - want).abs() <= 1e-6,
                "identity case entry ({i},{j}) = {}",
                fit.estimate.theta.get(i, j)
            );
        }
    }

    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let sigma = random_spd(3, 2000 + seed);
        let fit = covsel::clime::fit_clime(&sigma, 0.1, &opts).unwrap();
        for col in 0..3 {
            let lp = covsel_testkit::clime_column_vertex_objective(sigma.as_matrix(), 0.1, col)
                .expect("feasible LP");
            let diff = (fit.column_objective[col] - lp).abs();
            assert!(diff <= 1e-6, "seed {seed} col {col}: |{} - {lp}| = {diff:.3e}", fit.column_objective[col]);
            worst = worst.max(diff);
        }
    }
    println!(
        "criterion 5 (CLIME analytic + LP oracle): PASS — identity exact, 20 instances within {worst:.2e}"
    );
}

#[test]
fn criterion_06_schur_complement_oracle() {
    let _guard = lock();
    let mut worst_marginal: f64 = 0.0;
    let mut worst_eta: f64 = 0.0;
    for seed in 0..100u64 {
        let p_o = 4 + (seed as usize % 5); // 4..8
        let p_h = (seed as usize / 5) % 5; // 0..4
        let theta_o = if seed % 2 == 0 {
            small_world_precision(p_o, 2, 0.2, 0.8, seed).unwrap()
        } else {
            chain_precision(p_o, 0.9, 0.2).unwrap()
        };
        let knobs = LatentKnobs {
            p_h,
            oh_magnitude: 0.15,
            h_diag: 3.0,
            oh_sparsity: if seed % 3 == 0 { 0.3 } else { 0.0 },
            h_sparsity: 0.0,
            h_offdiag_magnitude: if seed % 4 == 0 { 0.2 } else { 0.0 },
        };
        let spec = latent_spec(&theta_o, &knobs, seed).unwrap();
        let marginal = marginal_precision(&spec).unwrap();
        let theta_oh = DMatrix::from_fn(spec.p_o, spec.p_h, |i, j| spec.theta_oh[i][j]);
        let oracle = covsel_testkit::marginal_precision_by_full_inversion(
            spec.theta_o.as_matrix(),
            &theta_oh,
            spec.theta_h.as_matrix(),
        );
        for i in 0..p_o {
            for j in 0..p_o {
                let d = (marginal.get(i, j) - oracle[(i, j)]).abs();
                assert!(d <= 1e-10, "seed {seed}: marginal mismatch {d:.3e} at ({i},{j})");
                worst_marginal = worst_marginal.max(d);
            }
        }
        // Independent eta: brute-force covariance difference off the oracle.
        let s_inv = spec.theta_o.as_matrix().clone().try_inverse().unwrap();
        let sigma_o_oracle = oracle.try_inverse().unwrap();
        let eta_oracle = (&sigma_o_oracle - &s_inv)
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        let d = (spec.eta - eta_oracle).abs();
        assert!(d <= 1e-10, "seed {seed}: eta mismatch {d:.3e}");
        worst_eta = worst_eta.max(d);
        // The library recomputation applies its own two-formula cross-check.
        let recomputed = covsel::simulate::eta(&spec).unwrap();
        assert!((recomputed - spec.eta).abs() <= 1e-12);
    }
    println!(
        "criterion 6 (Schur oracle): PASS — 100 specs, worst marginal diff {worst_marginal:.2e}, worst eta diff {worst_eta:.2e}"
    );
}

#[test]
fn criterion_07_threshold_algebra_properties() {
    let _guard = lock();
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for trial in 0..1000 {
        let p = rng.gen_range(3..9);
        // Quantized entries so exact ties and exact-threshold hits occur.
        let base = PrecisionEstimate {
            theta: SymMat::from_fn(p, |i, j| {
                if i == j {
                    1.0
                } else if rng.gen_bool(0.3) {
                    0.0
                } else {
                    (rng.gen_range(-5i32..=5) as f64) / 10.0
                }
            }),
            lambda: 0.1,
            method: Method::Glasso,
            iterations: 1,
            converged: true,
            objective: None,
        };

        // tau = 0 preserves the support exactly.
        let t0 = hard_threshold(&base, 0.0).unwrap();
        assert_eq!(t0.edges, edge_set(&base.theta, 0.0), "trial {trial}");
        assert_eq!(t0.theta_tilde, base.theta);

        // Nested supports along increasing tau.
        let tau_a = rng.gen_range(0.0..0.3);
        let tau_b = tau_a + rng.gen_range(0.0..0.3);
        let ta = hard_threshold(&base, tau_a).unwrap();
        let tb = hard_threshold(&base, tau_b).unwrap();
        assert!(tb.edges.is_subset(&ta.edges), "trial {trial}");

        // Strict boundary: an entry exactly equal to tau is zeroed.
        if let Some((i, j, v)) = base.theta.upper_triangle().find(|&(_, _, v)| v != 0.0) {
            let t = hard_threshold(&base, v.abs()).unwrap();
            assert_eq!(t.theta_tilde.get(i, j), 0.0, "trial {trial}: |entry| == tau survived");
            assert!(!t.edges.contains(i, j));
        }

        // threshold_for_edge_count: idempotence and no overshoot.
        let k = rng.gen_range(0..=p * (p - 1) / 2);
        let search = threshold_for_edge_count(&base, k).unwrap();
        assert!(search.estimate.edges.len() <= k, "trial {trial}: overshoot");
        let again = hard_threshold(&base, search.tau).unwrap();
        assert_eq!(again.edges, search.estimate.edges, "trial {trial}: not idempotent");
        let nonzero = base.theta.upper_triangle().filter(|&(_, _, v)| v != 0.0).count();
        if search.estimate.edges.len() < k.min(nonzero) {
            assert!(search.shortfall, "trial {trial}: undershoot not flagged");
        }
    }
    println!("criterion 7 (threshold algebra): PASS — 1000 random bases, all exact checks held");
}

#[test]
fn criterion_08_lvglasso_solver_validity() {
    let _guard = lock();
    let start = Instant::now();
    let opts = SolverOptions::default();

    // Constraint membership and descent on 20 base-design covariances.
    for seed in 0..20u64 {
        let theta = small_world_precision(30, 2, 0.1, 1.0, seed).unwrap();
        let knobs = LatentKnobs {
            p_h: 20,
            oh_magnitude: 0.2,
            h_diag: 9.0,
            oh_sparsity: 0.0,
            h_sparsity: 0.0,
            h_offdiag_magnitude: 0.0,
        };
        let spec = latent_spec(&theta, &knobs, seed).unwrap();
        let data = covsel::simulate::sample_mvn(&spec.sigma_o, 150, seed ^ 0x5eed).unwrap();
        let sigma = covsel::linalg::sample_covariance(&data, true).unwrap();
        let fit = fit_lvglasso(&sigma, 0.2, 1.0, &opts).unwrap();
        assert!(sym_eigen(&fit.l_hat).min() >= -1e-8, "seed {seed}: L not PSD");
        assert!(
            min_eigenvalue(&fit.s_hat.sub(&fit.l_hat).unwrap()) > 0.0,
            "seed {seed}: S - L not PD"
        );
        let p = sigma.dim();
        let s0 = SymMat::from_diagonal(&(0..p).map(|i| 2.0 / sigma.get(i, i)).collect::<Vec<_>>());
        let init = lvglasso_objective(&sigma, &s0, &SymMat::zeros(p), 0.2, 1.0).unwrap();
        let fin = fit.objective(&sigma).unwrap();
        assert!(fin <= init + 1e-8, "seed {seed}: objective rose from {init} to {fin}");
    }

    // Objective agreement with the long-horizon projected-subgradient oracle.
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let sigma = random_spd(4, 3000 + seed);
        let (lambda, gamma) = (0.2, 2.0);
        let fit = fit_lvglasso(&sigma, lambda, gamma, &SolverOptions::with_tol(1e-8)).unwrap();
        let obj = fit.objective(&sigma).unwrap();
        let oracle = covsel_testkit::lvglasso_subgradient_best(
            sigma.as_matrix(),
            lambda,
            gamma,
            1_000_000,
            0.1,
        );
        let diff = (obj - oracle).abs();
        assert!(diff <= 1e-3, "seed {seed}: |{obj} - {oracle}| = {diff:.3e}");
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 8 (lvglasso validity): PASS — 20 constraint checks, 5 oracle agreements within {worst:.2e}, {elapsed:?}"
    );
}

#[test]
fn criterion_09_data_driven_tuning() {
    let _guard = lock();
    let ebic_cfg = load_shipped_config("data_driven_ebic.json");
    let cv_cfg = load_shipped_config("data_driven_cv.json");
    let start = Instant::now();
    let ebic_records = run_with_threads(&ebic_cfg, 4);
    let cv_records = run_with_threads(&cv_cfg, 4);
    let elapsed = start.elapsed();

    let t_ebic = mean_f1(&ebic_records, "tglasso");
    let g_cv = mean_f1(&cv_records, "glasso");
    assert!(
        t_ebic >= g_cv,
        "EBIC-tuned tglasso {t_ebic:.3} below CV-tuned glasso {g_cv:.3}"
    );
    println!(
        "criterion 9 (data-driven tuning): PASS — EBIC tglasso {t_ebic:.3} >= CV glasso {g_cv:.3}; {elapsed:?}"
    );
}

#[test]
fn criterion_10_case_study_pipeline() {
    let _guard = lock();
    let loaded = covsel_cli::load_matrix_csv(&repo_path("data/demo_traces.csv")).unwrap();
    let labels = covsel_cli::io::load_labels(&repo_path("data/demo_labels.csv")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = load_shipped_config("case_study.json");
    let summary = covsel_cli::run_case_study(
        &loaded.data,
        loaded.column_names.as_deref(),
        Some(&labels),
        &cfg.methods,
        &cfg.tuning,
        out.path(),
    )
    .unwrap();

    assert_eq!(summary.methods.len(), 3, "all three methods must run");
    let mut shares = Vec::new();
    for m in &summary.methods {
        // Exports parse and round-trip to the same edge set.
        let text = std::fs::read_to_string(&m.export_path).unwrap();
        let graph = covsel_cli::GraphExport::from_json(&text).unwrap();
        let edges = graph.edge_set().unwrap();
        assert_eq!(edges.len(), m.edge_count, "{}: export disagrees with summary", m.method);
        let reparsed = covsel_cli::GraphExport::from_json(&graph.to_json()).unwrap();
        assert_eq!(reparsed.edge_set().unwrap(), edges, "{}: round trip", m.method);
        shares.push((m.method.clone(), m.edge_count, m.tuning_share));
        if m.method == "tglasso" {
            let base = m.base_edge_count.expect("thresholded method records its dense base");
            assert!(m.edge_count <= base, "thresholding added edges: {} > {base}", m.edge_count);
        }
    }

    // Frozen regression values for the shipped fixture (seeded once).
    let frozen: Vec<(&str, usize, Option<f64>)> = vec![
        ("glasso", 19, Some(0.5263157894736842)),
        ("tglasso", 14, Some(0.5714285714285714)),
        ("lvglasso", 10, Some(0.7)),
    ];
    for ((m, e, s), (fm, fe, fs)) in shares.iter().zip(frozen.iter()) {
        assert_eq!(m, fm);
        assert_eq!(e, fe, "{m}: edge count drifted from frozen fixture");
        assert_eq!(s, fs, "{m}: tuning share drifted from frozen fixture");
    }
    println!(
        "criterion 10 (case study pipeline): PASS — exports round-trip; shares {shares:?}"
    );
}

#[test]
fn criterion_11_determinism() {
    let _guard = lock();
    // Rerunning the criterion 1-2 configs reproduces the CSV bytes, modulo
    // the wall-clock runtime_ms column.
    let strip_runtime = |records: &[ResultRecord]| -> Vec<ResultRecord> {
        records
            .iter()
            .map(|r| ResultRecord { runtime_ms: 0, ..r.clone() })
            .collect()
    };
    let csv_bytes = |records: &[ResultRecord]| -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        covsel_cli::io::write_results_csv(records, &path).unwrap();
        std::fs::read(&path).unwrap()
    };

    let mut latent = load_shipped_config("latent_base.json");
    latent.sample_sizes = vec![150];
    let no_latent = load_shipped_config("no_latent_vary_n.json");

    for (name, cfg, threads_b) in
        [("latent_base@150", &latent, 1usize), ("no_latent_vary_n", &no_latent, 2)]
    {
        let a = run_with_threads(cfg, 4);
        let b = run_with_threads(cfg, threads_b);
        let (a, b) = (strip_runtime(&a), strip_runtime(&b));
        let (ba, bb) = (csv_bytes(&a), csv_bytes(&b));
        assert_eq!(ba, bb, "{name}: rerun changed result bytes");
        // f1 recomputes exactly from the stored confusion counts.
        for r in &a {
            let denom = r.tp as f64 + 0.5 * (r.fp + r.fn_) as f64;
            let expect = if r.tp == 0 {
                if r.fp + r.fn_ == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                r.tp as f64 / denom
            };
            assert_eq!(r.f1, expect, "{name}: f1 column inconsistent with counts");
        }
    }
    println!("criterion 11 (determinism): PASS — both configs byte-reproduce (runtime_ms masked), across thread counts");
}
