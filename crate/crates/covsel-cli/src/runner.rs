//! Config-driven experiment execution: ground-truth generation, sampling,
//! per-method fitting and tuning, and scoring against the true edge set.
//!
//! Determinism contract: records are computed independently per
//! (setting, replicate) task and sorted by (setting, replicate, method)
//! before emission, so thread count never changes output bytes. Seeds are
//! `base_seed + replicate`, folded with an FNV-1a hash of the setting tag.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use covsel::estimate::{PrecisionEstimate, SolverOptions};
use covsel::glasso::{fit_glasso, fit_glasso_path};
use covsel::linalg::{edge_set, sample_covariance, to_correlation, DEFAULT_EDGE_TOL};
use covsel::lvglasso::{fit_lvglasso, lv_edge_set};
use covsel::mat::{DataMatrix, EdgeSet, SymMat};
use covsel::metrics::{confusion, f1, tuning_share};
use covsel::neighborhood::{
    edge_strengths, fit_neighborhood, CombineRule, LassoPenalty, NeighborhoodFit,
};
use covsel::select::{
    default_lambda0, hard_threshold, kfold_cv_scores, select_by_ebic, tau_for_count,
    threshold_for_edge_count, CvMethod, EbicCandidate,
};
use covsel::simulate::{
    chain_precision, latent_spec, small_world_precision, GraphSpec, LatentKnobs, PD_MARGIN,
};

use crate::config::{
    Design, ExperimentConfig, GraphConfig, GraphKind, Knob, MethodName, TuningConfig, TuningMode,
};
use crate::io::GraphExport;
use crate::record::ResultRecord;
use crate::CliError;

/// Solver settings used for experiment fits; looser than library defaults
/// because edge supports stabilize well before the last digits do.
fn experiment_opts() -> SolverOptions {
    SolverOptions { tol: 1e-5, ..SolverOptions::default() }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// One point of the experiment grid.
#[derive(Clone, Debug)]
struct Setting {
    index: usize,
    knob_value: String,
    n: usize,
    p_o: usize,
    knobs: LatentKnobs,
}

fn format_knob(knob: Knob, v: f64) -> String {
    match knob {
        Knob::PO | Knob::PH => format!("{}", v as usize),
        _ => format!("{v}"),
    }
}

fn latent_knobs(cfg: &ExperimentConfig) -> LatentKnobs {
    LatentKnobs {
        p_h: cfg.latent.p_h,
        oh_magnitude: cfg.latent.oh_magnitude,
        h_diag: cfg.latent.h_diag,
        oh_sparsity: cfg.latent.oh_sparsity,
        h_sparsity: cfg.latent.h_sparsity,
        h_offdiag_magnitude: cfg.latent.h_offdiag_magnitude,
    }
}

fn build_settings(cfg: &ExperimentConfig) -> Result<Vec<Setting>, CliError> {
    let mut out = Vec::new();
    match cfg.design {
        Design::NoLatentVaryN => {
            for (i, &n) in cfg.sample_sizes.iter().enumerate() {
                out.push(Setting {
                    index: i,
                    knob_value: String::new(),
                    n,
                    p_o: cfg.graph.p_o,
                    knobs: LatentKnobs::none(),
                });
            }
        }
        Design::LatentBase | Design::DataDrivenTuning => {
            for (i, &n) in cfg.sample_sizes.iter().enumerate() {
                out.push(Setting {
                    index: i,
                    knob_value: String::new(),
                    n,
                    p_o: cfg.graph.p_o,
                    knobs: latent_knobs(cfg),
                });
            }
        }
        Design::NoLatentVaryP => {
            let sweep = cfg.sweep.as_ref().expect("validated");
            for (i, &v) in sweep.values.iter().enumerate() {
                out.push(Setting {
                    index: i,
                    knob_value: format_knob(sweep.knob, v),
                    n: cfg.sample_sizes[0],
                    p_o: v as usize,
                    knobs: LatentKnobs::none(),
                });
            }
        }
        Design::LatentHighdim => {
            let sweep = cfg.sweep.as_ref().expect("validated");
            for (i, &v) in sweep.values.iter().enumerate() {
                out.push(Setting {
                    index: i,
                    knob_value: format_knob(sweep.knob, v),
                    n: cfg.sample_sizes[0],
                    p_o: v as usize,
                    knobs: latent_knobs(cfg),
                });
            }
        }
        Design::LatentKnobSweep => {
            let sweep = cfg.sweep.as_ref().expect("validated");
            for (i, &v) in sweep.values.iter().enumerate() {
                let mut knobs = latent_knobs(cfg);
                match sweep.knob {
                    Knob::PH => knobs.p_h = v as usize,
                    Knob::OhMagnitude => knobs.oh_magnitude = v,
                    Knob::HDiag => knobs.h_diag = v,
                    Knob::OhSparsity => knobs.oh_sparsity = v,
                    Knob::HSparsity => knobs.h_sparsity = v,
                    Knob::PO => unreachable!("validated"),
                }
                out.push(Setting {
                    index: i,
                    knob_value: format_knob(sweep.knob, v),
                    n: cfg.sample_sizes[0],
                    p_o: cfg.graph.p_o,
                    knobs,
                });
            }
        }
        Design::CaseStudy => {
            return Err(CliError::Config(
                "case_study runs through the case-study entry point".into(),
            ))
        }
    }
    Ok(out)
}

fn spec_seed(cfg: &ExperimentConfig, setting: &Setting, replicate: usize) -> u64 {
    let tag = format!(
        "{}|knob={}|n={}|p_o={}",
        cfg.design, setting.knob_value, setting.n, setting.p_o
    );
    (cfg.base_seed.wrapping_add(replicate as u64)) ^ fnv1a64(tag.as_bytes())
}

/// Builds the ground truth for one setting.
pub fn build_spec(
    graph: &GraphConfig,
    p_o: usize,
    knobs: &LatentKnobs,
    seed: u64,
) -> Result<GraphSpec, CliError> {
    let theta_o = match graph.kind {
        GraphKind::SmallWorld => small_world_precision(p_o, graph.k, graph.beta, graph.weight, seed),
        GraphKind::Chain => chain_precision(p_o, graph.weight, PD_MARGIN),
    }
    .map_err(CliError::from_numeric)?;
    latent_spec(&theta_o, knobs, seed).map_err(CliError::from_numeric)
}

/// Builds the spec a `simulate` invocation emits (the config's graph and
/// latent blocks at the base seed).
pub fn spec_from_config(cfg: &ExperimentConfig) -> Result<GraphSpec, CliError> {
    build_spec(&cfg.graph, cfg.graph.p_o, &latent_knobs(cfg), cfg.base_seed)
}

/// Outcome of fitting and tuning one method on one dataset.
#[derive(Clone, Debug)]
struct Selected {
    edges: EdgeSet,
    lambda: f64,
    tau: Option<f64>,
    gamma: Option<f64>,
    converged: bool,
}

/// Strictly descending log-spaced grid from `max` down to `max * min_ratio`.
fn log_grid(max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|i| max * min_ratio.powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Finds a penalty whose selection count is as close to `target` as possible
/// without exceeding it: grid pass first, then geometric bisection between
/// the best grid point and the next denser one. `count_at` returns None when
/// the solver fails at that penalty (the point is skipped).
fn search_count_leq<F>(grid: &[f64], target: usize, rounds: usize, mut count_at: F) -> Option<f64>
where
    F: FnMut(f64) -> Option<usize>,
{
    let mut evaluated: Vec<(f64, usize)> = Vec::with_capacity(grid.len());
    for &lam in grid {
        if let Some(c) = count_at(lam) {
            evaluated.push((lam, c));
        }
    }
    if evaluated.is_empty() {
        return None;
    }
    // Best feasible point: count <= target, maximal count; first occurrence
    // wins ties so larger lambda is preferred.
    let mut best: Option<(f64, usize)> = None;
    let mut bracket_lo: Option<f64> = None;
    for &(lam, c) in &evaluated {
        if c <= target {
            if best.map_or(true, |(_, bc)| c > bc) {
                best = Some((lam, c));
            }
        } else if best.is_some() && bracket_lo.is_none() {
            bracket_lo = Some(lam);
        }
    }
    let (mut best_lam, mut best_count) = best?;
    if best_count == target {
        return Some(best_lam);
    }
    if let Some(mut lo) = bracket_lo {
        let mut hi = best_lam;
        for _ in 0..rounds {
            let mid = (lo * hi).sqrt();
            if !mid.is_finite() || mid <= 0.0 {
                break;
            }
            match count_at(mid) {
                Some(c) if c <= target => {
                    if c > best_count {
                        best_lam = mid;
                        best_count = c;
                    }
                    hi = mid;
                }
                Some(_) => lo = mid,
                None => break,
            }
            if best_count == target {
                break;
            }
        }
    }
    Some(best_lam)
}

/// Graphical lasso path that tolerates solver failures at small penalties by
/// truncating the grid.
fn robust_glasso_path(
    sigma: &SymMat,
    grid: &[f64],
    opts: &SolverOptions,
) -> Vec<PrecisionEstimate> {
    let mut len = grid.len();
    while len > 0 {
        match fit_glasso_path(sigma, &grid[..len], opts) {
            Ok(path) => return path,
            Err(_) => len /= 2,
        }
    }
    Vec::new()
}

fn glasso_oracle(sigma: &SymMat, target: usize, cfg: &TuningConfig, opts: &SolverOptions) -> Result<Selected, CliError> {
    let lam_max = sigma.max_abs_off_diagonal().max(1e-8) * 1.0000001;
    let grid = log_grid(lam_max, cfg.grids.lambda_count, cfg.grids.lambda_min_ratio);
    let path = robust_glasso_path(sigma, &grid, opts);
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for est in &path {
        counts.push((est.lambda, edge_set(&est.theta, DEFAULT_EDGE_TOL).len()));
    }
    let mut iter = counts.iter().copied();
    let lambda = search_count_leq(&grid[..counts.len()], target, 20, |lam| {
        // Grid points come from the warm-started path; bisection points are
        // cold fits.
        if let Some((glam, c)) = iter.next() {
            debug_assert_eq!(glam, lam);
            return Some(c);
        }
        fit_glasso(sigma, lam, opts).ok().map(|e| edge_set(&e.theta, DEFAULT_EDGE_TOL).len())
    })
    .ok_or_else(|| CliError::Numeric("graphical lasso failed across the whole grid".into()))?;
    let fit = fit_glasso(sigma, lambda, opts).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: edge_set(&fit.theta, DEFAULT_EDGE_TOL),
        lambda,
        tau: None,
        gamma: None,
        converged: fit.converged,
    })
}

fn tglasso_oracle(
    sigma: &SymMat,
    target: usize,
    n: usize,
    cfg: &TuningConfig,
    opts: &SolverOptions,
) -> Result<Selected, CliError> {
    let lambda0 = default_lambda0(n, sigma.dim(), cfg.lambda0_c);
    let base = fit_glasso(sigma, lambda0, opts).map_err(CliError::from_numeric)?;
    let converged = base.converged;
    let search = threshold_for_edge_count(&base, target).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: search.estimate.edges,
        lambda: lambda0,
        tau: Some(search.tau),
        gamma: None,
        converged,
    })
}

fn nbsel_fit(data: &DataMatrix, lambda: f64, opts: &SolverOptions) -> Option<NeighborhoodFit> {
    fit_neighborhood(data, &LassoPenalty::Common(lambda), CombineRule::And, opts).ok()
}

fn nbsel_oracle(
    data: &DataMatrix,
    target: usize,
    cfg: &TuningConfig,
    opts: &SolverOptions,
) -> Result<Selected, CliError> {
    let n = data.n();
    let corr = to_correlation(&sample_covariance(data, true).map_err(CliError::from_numeric)?)
        .map_err(CliError::from_numeric)?;
    let lam_max = 2.0 * n as f64 * corr.max_abs_off_diagonal().max(1e-8) * 1.0000001;
    let grid = log_grid(lam_max, cfg.grids.lambda_count, cfg.grids.lambda_min_ratio);
    let lambda = search_count_leq(&grid, target, 20, |lam| {
        nbsel_fit(data, lam, opts).map(|f| f.edges.len())
    })
    .ok_or_else(|| CliError::Numeric("neighborhood selection failed across the grid".into()))?;
    let fit = nbsel_fit(data, lambda, opts)
        .ok_or_else(|| CliError::Numeric("neighborhood selection failed at the chosen lambda".into()))?;
    Ok(Selected { edges: fit.edges, lambda, tau: None, gamma: None, converged: true })
}

fn tnbsel_oracle(
    data: &DataMatrix,
    target: usize,
    cfg: &TuningConfig,
    opts: &SolverOptions,
) -> Result<Selected, CliError> {
    let (n, p) = (data.n(), data.p());
    // The nodewise objective is unnormalized, so the sqrt(log p / n) scale
    // carries a 2n factor.
    let lambda0 = 2.0 * n as f64 * default_lambda0(n, p, cfg.lambda0_c);
    let fit = fit_neighborhood(data, &LassoPenalty::Common(lambda0), CombineRule::And, opts)
        .map_err(CliError::from_numeric)?;
    let strengths = edge_strengths(&fit.coef, CombineRule::And);
    let (tau, _) = tau_for_count(strengths.iter().map(|&(_, _, s)| s), target);
    let mut edges = EdgeSet::empty(p);
    for &(i, j, s) in &strengths {
        if s > tau {
            edges.insert(i, j).map_err(CliError::from_numeric)?;
        }
    }
    Ok(Selected { edges, lambda: lambda0, tau: Some(tau), gamma: None, converged: true })
}

fn clime_count(sigma: &SymMat, lambda: f64, opts: &SolverOptions) -> Option<usize> {
    covsel::clime::fit_clime(sigma, lambda, opts)
        .ok()
        .map(|f| edge_set(&f.estimate.theta, DEFAULT_EDGE_TOL).len())
}

fn clime_oracle(sigma: &SymMat, target: usize, cfg: &TuningConfig, opts: &SolverOptions) -> Result<Selected, CliError> {
    // The zero matrix is feasible per column once lambda >= 1.
    let grid = log_grid(1.0, cfg.grids.lambda_count, cfg.grids.lambda_min_ratio);
    let lambda = search_count_leq(&grid, target, 15, |lam| clime_count(sigma, lam, opts))
        .ok_or_else(|| CliError::Numeric("CLIME failed across the grid".into()))?;
    let fit = covsel::clime::fit_clime(sigma, lambda, opts).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: edge_set(&fit.estimate.theta, DEFAULT_EDGE_TOL),
        lambda,
        tau: None,
        gamma: None,
        converged: fit.estimate.converged,
    })
}

fn tclime_oracle(
    sigma: &SymMat,
    target: usize,
    n: usize,
    cfg: &TuningConfig,
    opts: &SolverOptions,
) -> Result<Selected, CliError> {
    let lambda0 = default_lambda0(n, sigma.dim(), cfg.lambda0_c).min(0.9);
    let fit = covsel::clime::fit_clime(sigma, lambda0, opts).map_err(CliError::from_numeric)?;
    let converged = fit.estimate.converged;
    let search = threshold_for_edge_count(&fit.estimate, target).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: search.estimate.edges,
        lambda: lambda0,
        tau: Some(search.tau),
        gamma: None,
        converged,
    })
}

fn lvglasso_count(sigma: &SymMat, lambda: f64, gamma: f64, opts: &SolverOptions) -> Option<usize> {
    fit_lvglasso(sigma, lambda, gamma, opts).ok().map(|f| lv_edge_set(&f, DEFAULT_EDGE_TOL).len())
}

fn lvglasso_oracle(
    sigma: &SymMat,
    target: usize,
    cfg: &TuningConfig,
    opts: &SolverOptions,
) -> Result<Selected, CliError> {
    let lam_count = (cfg.grids.lambda_count / 2).max(8);
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
    for &gamma in &cfg.grids.gamma {
        // Find a penalty that empties the support, then search below it.
        let mut lam_max = (sigma.max_abs_off_diagonal().max(0.1) / gamma).max(1e-4);
        for _ in 0..6 {
            match lvglasso_count(sigma, lam_max, gamma, opts) {
                Some(0) => break,
                _ => lam_max *= 2.0,
            }
        }
        let grid = log_grid(lam_max, lam_count, cfg.grids.lambda_min_ratio);
        if let Some(lambda) =
            search_count_leq(&grid, target, 12, |lam| lvglasso_count(sigma, lam, gamma, opts))
        {
            if let Some(count) = lvglasso_count(sigma, lambda, gamma, opts) {
                candidates.push((count, lambda, gamma));
            }
        }
    }
    // Larger count first, then larger lambda, then larger gamma.
    let best = candidates
        .into_iter()
        .filter(|&(c, _, _)| c <= target)
        .max_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        })
        .ok_or_else(|| CliError::Numeric("sparse-plus-low-rank tuning found no candidate".into()))?;
    let (_, lambda, gamma) = best;
    let fit = fit_lvglasso(sigma, lambda, gamma, opts).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: lv_edge_set(&fit, DEFAULT_EDGE_TOL),
        lambda,
        tau: None,
        gamma: Some(gamma),
        converged: fit.converged,
    })
}

fn glasso_ebic(sigma: &SymMat, n: usize, cfg: &TuningConfig, opts: &SolverOptions) -> Result<Selected, CliError> {
    let lam_max = sigma.max_abs_off_diagonal().max(1e-8) * 1.0000001;
    let grid = log_grid(lam_max, cfg.grids.lambda_count, cfg.grids.lambda_min_ratio);
    let path = robust_glasso_path(sigma, &grid, opts);
    if path.is_empty() {
        return Err(CliError::Numeric("graphical lasso failed across the whole grid".into()));
    }
    let candidates: Vec<EbicCandidate> = path
        .iter()
        .map(|est| EbicCandidate {
            lambda: est.lambda,
            tau: 0.0,
            theta: est.theta.clone(),
            edges: edge_set(&est.theta, DEFAULT_EDGE_TOL),
        })
        .collect();
    let idx = select_by_ebic(&candidates, sigma, n, cfg.gamma_ebic).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: candidates[idx].edges.clone(),
        lambda: candidates[idx].lambda,
        tau: None,
        gamma: None,
        converged: path[idx].converged,
    })
}

/// Threshold candidates for EBIC: the distinct magnitudes downsampled to the
/// configured budget, plus zero.
fn tau_candidates(base: &PrecisionEstimate, budget: usize) -> Vec<f64> {
    let mut mags: Vec<f64> = base
        .theta
        .upper_triangle()
        .map(|(_, _, v)| v.abs())
        .filter(|&m| m > 0.0)
        .collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    mags.dedup();
    let mut taus = vec![0.0];
    if mags.is_empty() {
        return taus;
    }
    let budget = budget.max(2);
    if mags.len() <= budget {
        taus.extend(mags.iter().copied());
    } else {
        for i in 0..budget {
            let idx = i * (mags.len() - 1) / (budget - 1);
            taus.push(mags[idx]);
        }
        taus.dedup();
    }
    taus
}

fn tglasso_ebic(sigma: &SymMat, n: usize, cfg: &TuningConfig, opts: &SolverOptions) -> Result<Selected, CliError> {
    let lambda0 = default_lambda0(n, sigma.dim(), cfg.lambda0_c);
    let base = fit_glasso(sigma, lambda0, opts).map_err(CliError::from_numeric)?;
    let converged = base.converged;
    let candidates: Vec<EbicCandidate> = tau_candidates(&base, cfg.grids.tau_count)
        .into_iter()
        .map(|tau| {
            let t = hard_threshold(&base, tau).expect("tau >= 0");
            EbicCandidate { lambda: lambda0, tau, theta: t.theta_tilde, edges: t.edges }
        })
        .collect();
    let idx = select_by_ebic(&candidates, sigma, n, cfg.gamma_ebic).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: candidates[idx].edges.clone(),
        lambda: lambda0,
        tau: Some(candidates[idx].tau),
        gamma: None,
        converged,
    })
}

fn lvglasso_ebic(sigma: &SymMat, n: usize, cfg: &TuningConfig, opts: &SolverOptions) -> Result<Selected, CliError> {
    use covsel::select::ebic_score;

    let p = sigma.dim() as f64;
    let lam_count = (cfg.grids.lambda_count / 2).max(8);
    // The likelihood lives at the marginal precision S - L, so the rank of L
    // must enter the model-size penalty (each latent factor costs about p
    // loadings); otherwise EBIC degenerates to an empty S with L absorbing
    // the whole graph. Rank is read at a relative cutoff because ADMM leaves
    // spurious tiny eigenvalues in L.
    let df_rank = |fit: &covsel::lvglasso::LatentDecomposition| {
        let eig = covsel::linalg::sym_eigen(&fit.l_hat);
        let cutoff = 1e-2 * eig.max().max(1e-12);
        eig.values.iter().filter(|&&v| v > cutoff).count() as f64 * p
    };
    let mut best: Option<(f64, f64, f64, Selected)> = None; // (score, tau_unused, lambda, sel)
    for &gamma in &cfg.grids.gamma {
        let lam_max = (sigma.max_abs_off_diagonal().max(0.1) / gamma).max(1e-4);
        for lambda in log_grid(lam_max, lam_count, cfg.grids.lambda_min_ratio) {
            let Ok(fit) = fit_lvglasso(sigma, lambda, gamma, opts) else { continue };
            let marginal = fit.s_hat.sub(&fit.l_hat).map_err(CliError::from_numeric)?;
            let edges = lv_edge_set(&fit, DEFAULT_EDGE_TOL);
            let Ok(base_score) = ebic_score(&edges, &marginal, sigma, n, cfg.gamma_ebic) else {
                continue;
            };
            let score = base_score
                + df_rank(&fit) * ((n as f64).ln() + 4.0 * cfg.gamma_ebic * p.ln());
            let sel = Selected {
                edges,
                lambda,
                tau: None,
                gamma: Some(gamma),
                converged: fit.converged,
            };
            let better = match &best {
                None => true,
                Some((bs, _, bl, _)) => score < *bs || (score == *bs && lambda > *bl),
            };
            if better {
                best = Some((score, 0.0, lambda, sel));
            }
        }
    }
    let (_, _, _, sel) =
        best.ok_or_else(|| CliError::Numeric("sparse-plus-low-rank EBIC grid produced no fit".into()))?;
    Ok(sel)
}

fn glasso_cv(
    data: &DataMatrix,
    sigma: &SymMat,
    cfg: &TuningConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<Selected, CliError> {
    let lam_max = sigma.max_abs_off_diagonal().max(1e-8) * 1.0000001;
    let grid = log_grid(lam_max, cfg.grids.lambda_count, cfg.grids.lambda_min_ratio);
    let scored = kfold_cv_scores(data, &grid, cfg.k, CvMethod::Glasso, opts, seed)
        .map_err(CliError::from_numeric)?;
    let &(lambda, _) = scored
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .expect("nonempty grid");
    let fit = fit_glasso(sigma, lambda, opts).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: edge_set(&fit.theta, DEFAULT_EDGE_TOL),
        lambda,
        tau: None,
        gamma: None,
        converged: fit.converged,
    })
}

fn lvglasso_cv(
    data: &DataMatrix,
    sigma: &SymMat,
    cfg: &TuningConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<Selected, CliError> {
    let lam_count = (cfg.grids.lambda_count / 2).max(8);
    let mut best: Option<(f64, f64, f64)> = None; // (score, lambda, gamma)
    for &gamma in &cfg.grids.gamma {
        let lam_max = (sigma.max_abs_off_diagonal().max(0.1) / gamma).max(1e-4);
        let grid = log_grid(lam_max, lam_count, cfg.grids.lambda_min_ratio);
        let Ok(scored) =
            kfold_cv_scores(data, &grid, cfg.k, CvMethod::Lvglasso { gamma }, opts, seed)
        else {
            continue;
        };
        for (lambda, score) in scored {
            let better = match best {
                None => true,
                Some((bs, bl, bg)) => {
                    score < bs
                        || (score == bs && (lambda > bl || (lambda == bl && gamma > bg)))
                }
            };
            if better {
                best = Some((score, lambda, gamma));
            }
        }
    }
    let (_, lambda, gamma) =
        best.ok_or_else(|| CliError::Numeric("cross-validation produced no lvglasso fit".into()))?;
    let fit = fit_lvglasso(sigma, lambda, gamma, opts).map_err(CliError::from_numeric)?;
    Ok(Selected {
        edges: lv_edge_set(&fit, DEFAULT_EDGE_TOL),
        lambda,
        tau: None,
        gamma: Some(gamma),
        converged: fit.converged,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_method(
    method: MethodName,
    mode: TuningMode,
    sigma: &SymMat,
    data: &DataMatrix,
    target: usize,
    n: usize,
    cfg: &TuningConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<Selected, CliError> {
    match mode {
        TuningMode::OracleCount => match method {
            MethodName::Glasso => glasso_oracle(sigma, target, cfg, opts),
            MethodName::Tglasso => tglasso_oracle(sigma, target, n, cfg, opts),
            MethodName::Nbsel => nbsel_oracle(data, target, cfg, opts),
            MethodName::Tnbsel => tnbsel_oracle(data, target, cfg, opts),
            MethodName::Clime => clime_oracle(sigma, target, cfg, opts),
            MethodName::Tclime => tclime_oracle(sigma, target, n, cfg, opts),
            MethodName::Lvglasso => lvglasso_oracle(sigma, target, cfg, opts),
        },
        TuningMode::Ebic => match method {
            MethodName::Glasso => glasso_ebic(sigma, n, cfg, opts),
            MethodName::Tglasso => tglasso_ebic(sigma, n, cfg, opts),
            MethodName::Lvglasso => lvglasso_ebic(sigma, n, cfg, opts),
            other => Err(CliError::Config(format!("EBIC tuning does not cover {other}"))),
        },
        TuningMode::Cv => match method {
            MethodName::Glasso => glasso_cv(data, sigma, cfg, opts, seed),
            MethodName::Lvglasso => lvglasso_cv(data, sigma, cfg, opts, seed),
            other => Err(CliError::Config(format!("cross-validation does not cover {other}"))),
        },
    }
}

/// Runs every (setting x replicate x method) cell of the experiment grid.
/// Deterministic given the config; never aborts on per-cell solver failures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>, CliError> {
    cfg.validate()?;
    let settings = build_settings(cfg)?;
    let opts = experiment_opts();

    let tasks: Vec<(usize, usize)> = settings
        .iter()
        .flat_map(|s| (0..cfg.replicates).map(move |r| (s.index, r)))
        .collect();

    let mut all: Vec<((usize, usize, usize), ResultRecord)> = tasks
        .par_iter()
        .map(|&(si, replicate)| -> Result<Vec<((usize, usize, usize), ResultRecord)>, CliError> {
            let setting = &settings[si];
            let seed = spec_seed(cfg, setting, replicate);
            let spec = build_spec(&cfg.graph, setting.p_o, &setting.knobs, seed)?;
            let data_seed = seed ^ fnv1a64(b"data");
            let data = covsel::simulate::sample_mvn(&spec.sigma_o, setting.n, data_seed)
                .map_err(CliError::from_numeric)?;
            let sigma_hat = sample_covariance(&data, true).map_err(CliError::from_numeric)?;
            let truth = spec.true_edges();
            let target = truth.len();

            let mut rows = Vec::with_capacity(cfg.methods.len());
            for (mi, &method) in cfg.methods.iter().enumerate() {
                let start = Instant::now();
                let outcome = run_method(
                    method,
                    cfg.tuning.mode,
                    &sigma_hat,
                    &data,
                    target,
                    setting.n,
                    &cfg.tuning,
                    &opts,
                    seed,
                );
                let runtime_ms = start.elapsed().as_millis() as u64;
                let selected = match outcome {
                    Ok(s) => s,
                    Err(CliError::Config(msg)) => return Err(CliError::Config(msg)),
                    Err(_) => Selected {
                        edges: EdgeSet::empty(setting.p_o),
                        lambda: f64::NAN,
                        tau: None,
                        gamma: None,
                        converged: false,
                    },
                };
                let c = confusion(&selected.edges, &truth).map_err(CliError::from_numeric)?;
                rows.push((
                    (si, replicate, mi),
                    ResultRecord {
                        design: cfg.design.to_string(),
                        method: method.to_string(),
                        knob_value: setting.knob_value.clone(),
                        n: setting.n,
                        p_o: setting.p_o,
                        p_h: setting.knobs.p_h,
                        replicate,
                        seed,
                        eta: spec.eta,
                        lambda: selected.lambda,
                        tau: selected.tau,
                        gamma: selected.gamma,
                        edges_selected: selected.edges.len(),
                        tp: c.tp,
                        fp: c.fp,
                        fn_: c.fn_,
                        f1: f1(&c),
                        runtime_ms,
                        converged: selected.converged,
                    },
                ));
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .flatten()
        .collect();

    all.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(all.into_iter().map(|(_, r)| r).collect())
}

/// Per-method summary of a case-study run.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct CaseMethodSummary {
    pub method: String,
    pub lambda: f64,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub edge_count: usize,
    /// Edge count of the dense base fit a thresholded method started from.
    pub base_edge_count: Option<usize>,
    /// Fraction of selected edges whose endpoints share a label; null when
    /// labels are absent or no edges were selected.
    pub tuning_share: Option<f64>,
    pub export_path: String,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct CaseStudySummary {
    pub n: usize,
    pub p: usize,
    pub labels_present: bool,
    pub methods: Vec<CaseMethodSummary>,
}

/// Fits the case-study methods on an ingested data matrix, exports one graph
/// document per method, and summarizes edge counts and label shares.
pub fn run_case_study(
    data: &DataMatrix,
    column_names: Option<&[String]>,
    labels: Option<&[String]>,
    methods: &[MethodName],
    tuning: &TuningConfig,
    out_dir: &Path,
) -> Result<CaseStudySummary, CliError> {
    let allowed = [MethodName::Glasso, MethodName::Tglasso, MethodName::Lvglasso];
    if methods.is_empty() {
        return Err(CliError::Config("case study needs at least one method".into()));
    }
    if let Some(m) = methods.iter().find(|m| !allowed.contains(m)) {
        return Err(CliError::Config(format!("case study supports glasso, tglasso, lvglasso; got {m}")));
    }
    if matches!(tuning.mode, TuningMode::OracleCount) {
        return Err(CliError::Config(
            "case study data has no oracle edge count; use ebic or cv tuning".into(),
        ));
    }
    let (n, p) = (data.n(), data.p());
    if let Some(l) = labels {
        if l.len() != p {
            return Err(CliError::Data(format!("{} labels for {p} variables", l.len())));
        }
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    // Fluorescence traces carry arbitrary per-neuron scales; fit on the
    // correlation matrix.
    let sigma = to_correlation(&sample_covariance(data, true).map_err(CliError::from_numeric)?)
        .map_err(CliError::from_numeric)?;
    let opts = experiment_opts();

    let node_labels: Option<Vec<String>> = labels
        .map(|l| l.to_vec())
        .or_else(|| column_names.map(|c| c.to_vec()));

    let mut summaries = Vec::new();
    for &method in methods {
        let (selected, weights, base_edge_count) = match (method, tuning.mode) {
            (MethodName::Glasso, TuningMode::Ebic) => {
                let s = glasso_ebic(&sigma, n, tuning, &opts)?;
                let fit = fit_glasso(&sigma, s.lambda, &opts).map_err(CliError::from_numeric)?;
                (s, fit.theta, None)
            }
            (MethodName::Glasso, TuningMode::Cv) => {
                let s = glasso_cv(data, &sigma, tuning, &opts, 0)?;
                let fit = fit_glasso(&sigma, s.lambda, &opts).map_err(CliError::from_numeric)?;
                (s, fit.theta, None)
            }
            (MethodName::Tglasso, TuningMode::Ebic) => {
                let s = tglasso_ebic(&sigma, n, tuning, &opts)?;
                let base = fit_glasso(&sigma, s.lambda, &opts).map_err(CliError::from_numeric)?;
                let base_count = edge_set(&base.theta, DEFAULT_EDGE_TOL).len();
                let t = hard_threshold(&base, s.tau.unwrap_or(0.0)).map_err(CliError::from_numeric)?;
                (s, t.theta_tilde, Some(base_count))
            }
            (MethodName::Lvglasso, TuningMode::Ebic) => {
                let s = lvglasso_ebic(&sigma, n, tuning, &opts)?;
                let fit = fit_lvglasso(&sigma, s.lambda, s.gamma.unwrap_or(1.0), &opts)
                    .map_err(CliError::from_numeric)?;
                (s, fit.s_hat.clone(), None)
            }
            (MethodName::Lvglasso, TuningMode::Cv) => {
                let s = lvglasso_cv(data, &sigma, tuning, &opts, 0)?;
                let fit = fit_lvglasso(&sigma, s.lambda, s.gamma.unwrap_or(1.0), &opts)
                    .map_err(CliError::from_numeric)?;
                (s, fit.s_hat.clone(), None)
            }
            (m, mode) => {
                return Err(CliError::Config(format!("{m} is not available under {mode:?} tuning")))
            }
        };

        let share = match labels {
            Some(l) => tuning_share(&selected.edges, l).map_err(CliError::from_numeric)?,
            None => None,
        };
        let export_path = out_dir.join(format!("{method}_graph.json"));
        GraphExport::new(&selected.edges, &weights, node_labels.as_deref())?
            .write(&export_path)?;
        summaries.push(CaseMethodSummary {
            method: method.to_string(),
            lambda: selected.lambda,
            tau: selected.tau,
            gamma: selected.gamma,
            edge_count: selected.edges.len(),
            base_edge_count,
            tuning_share: share,
            export_path: export_path.display().to_string(),
        });
    }

    let summary = CaseStudySummary { n, p, labels_present: labels.is_some(), methods: summaries };
    let path = out_dir.join("case_study_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes"))
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(summary)
}
