//! Experiment execution: the N_l sweep over the requested methods.

use std::time::Instant;

use leadsel_core::graph::{laplacian, Laplacian, NetworkGraph};
use leadsel_core::noise_corrupted::{
    self, evaluate_j, LeaderSelection,
};
use leadsel_core::noise_free::{self, evaluate_jf};
use leadsel_core::Error as CoreError;
use serde::Serialize;

use crate::config::{ExperimentConfig, Formulation, Method};
use crate::CliError;

/// Solver internals worth keeping next to each bound.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "solver")]
pub enum SolverDiagnostics {
    InteriorPoint {
        barrier_tau_final: f64,
        newton_iters: usize,
        duality_gap_estimate: f64,
    },
    Admm {
        converged: bool,
        outer_iterations: usize,
        yy_iterations_total: usize,
        rho_final: f64,
        pd_fallback: bool,
        lower_bound_psd_cross: Option<f64>,
        residual_primal_final: f64,
        residual_dual_final: f64,
    },
    Failed {
        message: String,
    },
}

/// One sweep point. Methods that were not requested stay `None`.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub nl: usize,
    pub lower_bound: Option<f64>,
    pub greedy_j: Option<f64>,
    pub swap_j: Option<f64>,
    /// `swap_j − lower_bound` when both ran.
    pub gap: Option<f64>,
    /// Smallest objective among the selection-producing methods that ran —
    /// the `upper` column of the CSV.
    pub upper: Option<f64>,
    pub degree_j: Option<f64>,
    pub exhaustive_j: Option<f64>,
    /// Steady-state total variance from simulation (≈ J/2 at the
    /// simulated selection).
    pub monte_carlo_variance: Option<f64>,
    /// The selection achieving `upper`.
    pub leader_set: Option<Vec<usize>>,
    pub leader_set_greedy: Option<Vec<usize>>,
    pub leader_set_swap: Option<Vec<usize>>,
    pub leader_set_degree: Option<Vec<usize>>,
    pub leader_set_exhaustive: Option<Vec<usize>>,
    pub swaps_used: Option<usize>,
    pub solver_diagnostics: Option<SolverDiagnostics>,
    pub wall_time_ms: f64,
}

impl ReportRow {
    fn empty(nl: usize) -> Self {
        ReportRow {
            nl,
            lower_bound: None,
            greedy_j: None,
            swap_j: None,
            gap: None,
            upper: None,
            degree_j: None,
            exhaustive_j: None,
            monte_carlo_variance: None,
            leader_set: None,
            leader_set_greedy: None,
            leader_set_swap: None,
            leader_set_degree: None,
            leader_set_exhaustive: None,
            swaps_used: None,
            solver_diagnostics: None,
            wall_time_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSummary {
    pub n: usize,
    pub edge_count: usize,
}

/// Full experiment result; serialized as the JSON sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub format_version: u32,
    pub formulation: Formulation,
    pub graph: GraphSummary,
    /// Node coordinates when the family embeds in the unit square —
    /// enough to draw placement figures from the sidecar alone.
    pub coords: Option<Vec<[f64; 2]>>,
    pub nl_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub rows: Vec<ReportRow>,
    /// Qualitative sweep diagnostic: whether `upper − lower` never
    /// increases along the N_l sweep (reported, not asserted).
    pub gap_monotone_decreasing: Option<bool>,
    /// True when any relaxation solve failed to converge; the process
    /// exits with code 3 after writing the report.
    pub any_nonconverged: bool,
}

fn config_error(e: CoreError) -> CliError {
    CliError::Config(e.to_string())
}

/// Runs the requested methods for every N_l (ascending). Solver
/// non-convergence is recorded in the row and flagged on the report rather
/// than aborting the sweep; hard errors (invalid sizes, budget overruns)
/// abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BoundsReport, CliError> {
    let graph = cfg.graph.build().map_err(config_error)?;
    let l = laplacian(&graph);
    let n = graph.n();

    let mut rows = Vec::new();
    let mut any_nonconverged = false;
    for nl in cfg.nl_sweep() {
        let row = match cfg.formulation {
            Formulation::NoiseCorrupted => run_nc_row(cfg, &graph, &l, nl)?,
            Formulation::NoiseFree => run_nf_row(cfg, &l, nl)?,
        };
        if matches!(
            row.solver_diagnostics,
            Some(SolverDiagnostics::Failed { .. })
                | Some(SolverDiagnostics::Admm { converged: false, .. })
        ) {
            any_nonconverged = true;
        }
        rows.push(row);
    }

    let gaps: Vec<f64> = rows
        .iter()
        .filter_map(|r| match (r.upper, r.lower_bound) {
            (Some(u), Some(lo)) => Some(u - lo),
            _ => None,
        })
        .collect();
    let gap_monotone_decreasing = if gaps.len() >= 2 {
        Some(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9))
    } else {
        None
    };

    Ok(BoundsReport {
        format_version: crate::config::FORMAT_VERSION,
        formulation: cfg.formulation,
        graph: GraphSummary { n, edge_count: graph.edges().len() },
        coords: graph.coords().map(|c| c.to_vec()),
        nl_values: cfg.nl_sweep(),
        methods: cfg.methods.clone(),
        rows,
        gap_monotone_decreasing,
        any_nonconverged,
    })
}

/// Track the best (smallest) upper bound and the selection achieving it.
struct UpperTracker {
    best: Option<(f64, Vec<usize>)>,
}

impl UpperTracker {
    fn new() -> Self {
        UpperTracker { best: None }
    }
    fn offer(&mut self, j: f64, set: Vec<usize>) {
        if self.best.as_ref().is_none_or(|(bj, _)| j < *bj) {
            self.best = Some((j, set));
        }
    }
}

fn run_nc_row(
    cfg: &ExperimentConfig,
    graph: &NetworkGraph,
    l: &Laplacian,
    nl: usize,
) -> Result<ReportRow, CliError> {
    let start = Instant::now();
    let n = l.n();
    let kappa = cfg.resolve_kappa(n);
    let mut row = ReportRow::empty(nl);
    let mut upper = UpperTracker::new();

    let wants = |m: Method| cfg.methods.contains(&m);

    // Swap starts from the greedy set, so greedy runs whenever either is
    // requested; its objective is reported in both cases.
    let greedy = if wants(Method::Greedy) || wants(Method::Swap) {
        let (sel, j) = noise_corrupted::greedy_select(l, &kappa, nl).map_err(config_error)?;
        row.greedy_j = Some(j);
        row.leader_set_greedy = Some(sel.leaders());
        upper.offer(j, sel.leaders());
        Some(sel)
    } else {
        None
    };

    if wants(Method::Swap) {
        let start_sel = greedy.as_ref().expect("greedy ran");
        let (sel, j, swaps) =
            noise_corrupted::swap_refine(l, start_sel, usize::MAX).map_err(config_error)?;
        row.swap_j = Some(j);
        row.swaps_used = Some(swaps);
        row.leader_set_swap = Some(sel.leaders());
        upper.offer(j, sel.leaders());
    }

    if wants(Method::Degree) {
        let set = noise_corrupted::degree_heuristic(l, nl).map_err(config_error)?;
        let sel = LeaderSelection::from_set(n, &set, kappa.clone()).map_err(config_error)?;
        let j = evaluate_j(l, &sel).map_err(config_error)?;
        row.degree_j = Some(j);
        row.leader_set_degree = Some(set.clone());
        upper.offer(j, set);
    }

    if wants(Method::Exhaustive) {
        let (sel, j) = noise_corrupted::exhaustive_search(l, &kappa, nl).map_err(config_error)?;
        row.exhaustive_j = Some(j);
        row.leader_set_exhaustive = Some(sel.leaders());
        upper.offer(j, sel.leaders());
    }

    if wants(Method::CrLower) {
        match noise_corrupted::cr1_lower_bound(l, &kappa, nl, &cfg.ipm.apply()) {
            Ok(sol) => {
                row.lower_bound = Some(sol.lower_bound);
                row.solver_diagnostics = Some(SolverDiagnostics::InteriorPoint {
                    barrier_tau_final: sol.barrier_tau_final,
                    newton_iters: sol.newton_iters,
                    duality_gap_estimate: sol.duality_gap_estimate,
                });
            }
            Err(e @ (CoreError::Solver(_) | CoreError::Singular(_))) => {
                row.solver_diagnostics =
                    Some(SolverDiagnostics::Failed { message: e.to_string() });
            }
            Err(e) => return Err(config_error(e)),
        }
    }

    if wants(Method::MonteCarlo) {
        let (_, set) = upper
            .best
            .clone()
            .expect("validation guarantees a selection-producing method");
        let sel = LeaderSelection::from_set(n, &set, kappa.clone()).map_err(config_error)?;
        let mc = &cfg.monte_carlo;
        let v = noise_corrupted::monte_carlo_variance(l, &sel, mc.horizon, mc.dt, mc.paths, mc.seed)
            .map_err(config_error)?;
        row.monte_carlo_variance = Some(v);
    }

    let _ = graph;
    if let Some((j, set)) = upper.best {
        row.upper = Some(j);
        row.leader_set = Some(set);
    }
    row.gap = match (row.swap_j, row.lower_bound) {
        (Some(u), Some(lo)) => Some(u - lo),
        _ => None,
    };
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}

fn run_nf_row(cfg: &ExperimentConfig, l: &Laplacian, nl: usize) -> Result<ReportRow, CliError> {
    let start = Instant::now();
    let mut row = ReportRow::empty(nl);
    let mut upper = UpperTracker::new();

    let wants = |m: Method| cfg.methods.contains(&m);

    let greedy = if wants(Method::Greedy) || wants(Method::Swap) {
        let (set, j) = noise_free::greedy_select_nf(l, nl).map_err(config_error)?;
        row.greedy_j = Some(j);
        row.leader_set_greedy = Some(set.clone());
        upper.offer(j, set.clone());
        Some(set)
    } else {
        None
    };

    if wants(Method::Swap) {
        let start_set = greedy.as_ref().expect("greedy ran");
        let (set, j, swaps) =
            noise_free::swap_refine_nf(l, start_set, usize::MAX).map_err(config_error)?;
        row.swap_j = Some(j);
        row.swaps_used = Some(swaps);
        row.leader_set_swap = Some(set.clone());
        upper.offer(j, set);
    }

    if wants(Method::Degree) {
        let set = noise_corrupted::degree_heuristic(l, nl).map_err(config_error)?;
        let j = evaluate_jf(l, &set).map_err(config_error)?;
        row.degree_j = Some(j);
        row.leader_set_degree = Some(set.clone());
        upper.offer(j, set);
    }

    if wants(Method::Exhaustive) {
        let (set, j) = noise_free::exhaustive_search_nf(l, nl).map_err(config_error)?;
        row.exhaustive_j = Some(j);
        row.leader_set_exhaustive = Some(set.clone());
        upper.offer(j, set);
    }

    if wants(Method::CrLower) {
        match noise_free::cr2_solve(l, nl, &cfg.admm.apply()) {
            Ok(sol) => {
                let (rp, rd) = sol.residual_history.last().copied().unwrap_or((f64::NAN, f64::NAN));
                row.lower_bound = Some(sol.lower_bound);
                row.solver_diagnostics = Some(SolverDiagnostics::Admm {
                    converged: sol.converged,
                    outer_iterations: sol.outer_iterations,
                    yy_iterations_total: sol.yy_iterations_total,
                    rho_final: sol.rho_final,
                    pd_fallback: sol.pd_fallback,
                    lower_bound_psd_cross: sol.lower_bound_psd_cross,
                    residual_primal_final: rp,
                    residual_dual_final: rd,
                });
            }
            Err(e @ (CoreError::Solver(_) | CoreError::Singular(_))) => {
                row.solver_diagnostics =
                    Some(SolverDiagnostics::Failed { message: e.to_string() });
            }
            Err(e) => return Err(config_error(e)),
        }
    }

    if let Some((j, set)) = upper.best {
        row.upper = Some(j);
        row.leader_set = Some(set);
    }
    row.gap = match (row.swap_j, row.lower_bound) {
        (Some(u), Some(lo)) => Some(u - lo),
        _ => None,
    };
    row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}
