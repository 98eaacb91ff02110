//! Noise-corrupted leader selection.
//!
//! Every node runs consensus on relative neighbor states; leaders
//! additionally feed back their own absolute state, measured through noise,
//! with per-node gains `κ`. The steady-state mean-square deviation is
//!
//! `J(x) = tr((L + Dκ Dx)⁻¹)`,
//!
//! where `x` is the Boolean leader indicator. Selecting the `N_l` leaders
//! minimizing `J` is combinatorial; this module brackets the optimum:
//!
//! * [`cr1_lower_bound`] relaxes `x ∈ {0,1}ⁿ` to `[0,1]ⁿ` and solves the
//!   resulting convex program with a log-barrier interior-point method
//!   whose Newton step eliminates the `𝟙ᵀx = N_l` constraint analytically,
//! * [`greedy_select`] + [`swap_refine`] build the upper bound, using the
//!   [`crate::lowrank`] kernels so each greedy round and each swap
//!   evaluation costs O(n) on top of a tracked inverse,
//! * [`exhaustive_search`] is the small-instance oracle and
//!   [`monte_carlo_variance`] validates the variance interpretation by
//!   simulating the stochastic dynamics directly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::Laplacian;
use crate::lowrank::{first_leader_inverse, swap_objective_delta};
use crate::{Error, Result};

/// Fraction-to-boundary factor: line searches stop at 99% of the distance
/// to the box boundary so iterates stay strictly interior.
const FRAC_TO_BOUNDARY: f64 = 0.99;

/// A swap is accepted only if it decreases J by more than this relative
/// amount, so float noise cannot drive an endless swap loop.
const SWAP_DECREASE_REL: f64 = 1e-12;

/// Accepted-swap cap is this multiple of n (a linear budget keeps the
/// refinement polynomial even on adversarial instances).
const SWAP_CAP_FACTOR: usize = 10;

/// Enumeration guard for the exhaustive oracle.
const EXHAUSTIVE_BUDGET: u64 = 1_000_000;

/// A Boolean leader assignment with per-node feedback gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSelection {
    x: Vec<bool>,
    kappa: Vec<f64>,
}

impl LeaderSelection {
    /// Validates `1 ≤ Σx < n` and `κ > 0`.
    pub fn new(x: Vec<bool>, kappa: Vec<f64>) -> Result<Self> {
        if x.len() != kappa.len() {
            return Err(Error::InvalidSelection(format!(
                "indicator length {} != gain length {}",
                x.len(),
                kappa.len()
            )));
        }
        // At least one leader is required for J to be finite. All-leader
        // selections are allowed for evaluation (the gain-limit identities
        // use them); the optimizers separately require N_l < n.
        let n_leaders = x.iter().filter(|&&b| b).count();
        if n_leaders == 0 {
            return Err(Error::InvalidSelection("no leaders selected".into()));
        }
        if let Some(i) = kappa.iter().position(|&k| !(k > 0.0)) {
            return Err(Error::InvalidSelection(format!(
                "gain at node {i} must be positive, got {}",
                kappa[i]
            )));
        }
        Ok(LeaderSelection { x, kappa })
    }

    /// Builds a selection from an explicit leader index set.
    pub fn from_set(n: usize, leaders: &[usize], kappa: Vec<f64>) -> Result<Self> {
        let mut x = vec![false; n];
        for &i in leaders {
            if i >= n {
                return Err(Error::InvalidSelection(format!("leader {i} out of range for n={n}")));
            }
            if x[i] {
                return Err(Error::InvalidSelection(format!("duplicate leader {i}")));
            }
            x[i] = true;
        }
        LeaderSelection::new(x, kappa)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn n_leaders(&self) -> usize {
        self.x.iter().filter(|&&b| b).count()
    }

    pub fn indicator(&self) -> &[bool] {
        &self.x
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Leader indices in ascending order.
    pub fn leaders(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&i| self.x[i]).collect()
    }

    pub fn is_leader(&self, i: usize) -> bool {
        self.x[i]
    }
}

/// `L + Dκ Dx` — positive definite whenever the graph is connected and at
/// least one leader exists.
fn modified_laplacian(l: &Laplacian, sel: &LeaderSelection) -> DMatrix<f64> {
    let mut m = l.matrix().clone();
    for i in 0..sel.n() {
        if sel.is_leader(i) {
            m[(i, i)] += sel.kappa()[i];
        }
    }
    m
}

/// Exact objective `J(x) = tr((L + Dκ Dx)⁻¹)`.
pub fn evaluate_j(l: &Laplacian, sel: &LeaderSelection) -> Result<f64> {
    if sel.n() != l.n() {
        return Err(Error::InvalidSelection(format!(
            "selection is over {} nodes, graph has {}",
            sel.n(),
            l.n()
        )));
    }
    let m = modified_laplacian(l, sel);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular("L + DκDx is not PD (no leader on some component?)".into()))?;
    Ok(chol.inverse().trace())
}

/// `J` through the leader/follower block partition:
///
/// `J = tr(L_f⁻¹) + tr(S⁻¹ (L₀L_f⁻¹)(L₀L_f⁻¹)ᵀ) + tr(S⁻¹)`,
/// `S = L_l + D_{κ_l} − L₀ L_f⁻¹ L₀ᵀ`.
///
/// An independent evaluation path (Schur complement of the follower block)
/// used to cross-check [`evaluate_j`]; it also exposes how the objective
/// splits into follower-only and leader-coupling terms, which is what makes
/// the large-gain limit `J → J_f` visible.
pub fn evaluate_j_schur(l: &Laplacian, sel: &LeaderSelection) -> Result<f64> {
    if sel.n() != l.n() {
        return Err(Error::InvalidSelection(format!(
            "selection is over {} nodes, graph has {}",
            sel.n(),
            l.n()
        )));
    }
    let leaders = sel.leaders();
    let followers: Vec<usize> = (0..sel.n()).filter(|&i| !sel.is_leader(i)).collect();
    let lm = l.matrix();
    let nl = leaders.len();
    let nf = followers.len();

    let mut l_f = DMatrix::zeros(nf, nf);
    for (a, &i) in followers.iter().enumerate() {
        for (b, &j) in followers.iter().enumerate() {
            l_f[(a, b)] = lm[(i, j)];
        }
    }
    let mut l_0 = DMatrix::zeros(nl, nf);
    for (a, &i) in leaders.iter().enumerate() {
        for (b, &j) in followers.iter().enumerate() {
            l_0[(a, b)] = lm[(i, j)];
        }
    }
    let mut s = DMatrix::zeros(nl, nl);
    for (a, &i) in leaders.iter().enumerate() {
        for (b, &j) in leaders.iter().enumerate() {
            s[(a, b)] = lm[(i, j)];
        }
        s[(a, a)] += sel.kappa()[i];
    }

    let lf_inv = l_f
        .cholesky()
        .ok_or_else(|| Error::Singular("grounded Laplacian not PD".into()))?
        .inverse();
    let m = &l_0 * &lf_inv; // L₀ L_f⁻¹, N_l × N_f
    s -= &m * l_0.transpose();
    let s_inv = s
        .cholesky()
        .ok_or_else(|| Error::Singular("Schur complement not PD".into()))?
        .inverse();
    let coupling = (&s_inv * (&m * m.transpose())).trace();
    Ok(lf_inv.trace() + coupling + s_inv.trace())
}

fn check_nl(n: usize, n_l: usize) -> Result<()> {
    if n_l == 0 || n_l >= n {
        return Err(Error::InvalidArgument(format!(
            "leader count must satisfy 1 <= N_l < n, got N_l={n_l}, n={n}"
        )));
    }
    Ok(())
}

fn check_kappa(n: usize, kappa: &[f64]) -> Result<()> {
    if kappa.len() != n {
        return Err(Error::InvalidArgument(format!(
            "gain vector length {} != n={n}",
            kappa.len()
        )));
    }
    if let Some(i) = kappa.iter().position(|&k| !(k > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "gain at node {i} must be positive, got {}",
            kappa[i]
        )));
    }
    Ok(())
}

/// Deterministic parallel argmin: smallest value wins, ties broken by the
/// lowest index. The reduction is associative, so the result does not
/// depend on thread scheduling.
fn argmin_by_index(values: impl IndexedParallelIterator<Item = f64>) -> Option<(usize, f64)> {
    values
        .enumerate()
        .map(|(i, v)| (i, v))
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
}

/// Greedy selection: one leader per round, each round picking the node
/// whose addition most decreases `J`.
///
/// The first pick scans `J₁ⁱ = tr(L†) + n(1/κᵢ + (L†)ᵢᵢ)` — O(1) per
/// candidate from the pseudo-inverse diagonal. Later rounds use the
/// Sherman–Morrison trace decrement
/// `J_{s+1}ⁱ = tr(L_s⁻¹) − κᵢ‖(L_s⁻¹)ᵢ‖² / (1 + κᵢ(L_s⁻¹)ᵢᵢ)` — O(n) per
/// candidate. Total O(n²·N_l + n³). Ties break to the lowest node index.
pub fn greedy_select(l: &Laplacian, kappa: &[f64], n_l: usize) -> Result<(LeaderSelection, f64)> {
    let n = l.n();
    check_nl(n, n_l)?;
    check_kappa(n, kappa)?;

    let l_dagger = crate::graph::pseudo_inverse(l)?;
    let tr_dagger = l_dagger.trace();
    let (first, _) = argmin_by_index(
        (0..n)
            .into_par_iter()
            .map(|i| tr_dagger + n as f64 * (1.0 / kappa[i] + l_dagger[(i, i)])),
    )
    .expect("n >= 2");

    let mut st = first_leader_inverse(l, &l_dagger, first, kappa[first])?;
    let mut is_leader = vec![false; n];
    is_leader[first] = true;

    for _ in 1..n_l {
        let b = st.inv();
        let trace = st.trace();
        let (best, _) = argmin_by_index((0..n).into_par_iter().map(|i| {
            if is_leader[i] {
                f64::INFINITY
            } else {
                let col = b.column(i);
                trace - kappa[i] * col.norm_squared() / (1.0 + kappa[i] * b[(i, i)])
            }
        }))
        .expect("candidates remain");
        st.rank1_add(best, kappa[best])?;
        is_leader[best] = true;
    }

    let sel = LeaderSelection::new(is_leader, kappa.to_vec())?;
    Ok((sel, st.trace()))
}

/// Swap refinement: first-improvement scans over (leader, follower) pairs
/// in row-major order, accepting any swap that decreases `J` by a relative
/// margin, restarting the scan after each acceptance.
///
/// Candidate objectives come from [`swap_objective_delta`] (O(n) each);
/// only accepted swaps pay the O(n²) in-place exchange
/// [`crate::lowrank::InverseState::apply_swap`]. Terminates when a full
/// scan finds no improvement, after `10·n` accepted swaps, or after
/// `max_sweeps` scans.
pub fn swap_refine(
    l: &Laplacian,
    sel: &LeaderSelection,
    max_sweeps: usize,
) -> Result<(LeaderSelection, f64, usize)> {
    let n = l.n();
    if sel.n() != n {
        return Err(Error::InvalidSelection(format!(
            "selection is over {} nodes, graph has {}",
            sel.n(),
            n
        )));
    }
    let kappa = sel.kappa();
    let mut is_leader: Vec<bool> = sel.indicator().to_vec();
    let mut st = crate::lowrank::InverseState::from_matrix(
        modified_laplacian(l, sel),
        crate::lowrank::Provenance::NoiseCorrupted,
    )?;

    let swap_cap = SWAP_CAP_FACTOR * n;
    let mut swaps_used = 0usize;
    let mut sweeps = 0usize;
    'outer: while sweeps < max_sweeps && swaps_used < swap_cap {
        sweeps += 1;
        let j_cur = st.trace();
        let leaders: Vec<usize> = (0..n).filter(|&i| is_leader[i]).collect();
        let followers: Vec<usize> = (0..n).filter(|&i| !is_leader[i]).collect();
        for &i in &leaders {
            for &j in &followers {
                let j_new = swap_objective_delta(&st, i, j, kappa[i], kappa[j])?;
                if j_new < j_cur - SWAP_DECREASE_REL * j_cur.abs() {
                    st.apply_swap(i, j, kappa[i], kappa[j])?;
                    is_leader[i] = false;
                    is_leader[j] = true;
                    swaps_used += 1;
                    continue 'outer;
                }
            }
        }
        break; // full scan, no improvement
    }

    let out = LeaderSelection::new(is_leader, kappa.to_vec())?;
    Ok((out, st.trace(), swaps_used))
}

/// Baseline: the `N_l` highest-degree nodes, ties to the lowest index.
pub fn degree_heuristic(l: &Laplacian, n_l: usize) -> Result<Vec<usize>> {
    let n = l.n();
    check_nl(n, n_l)?;
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort by descending degree keeps index order within ties.
    order.sort_by(|&a, &b| l.degree(b).partial_cmp(&l.degree(a)).unwrap());
    let mut picked = order[..n_l].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Options for the interior-point relaxation solver.
///
/// `gap_tol` is relative per node: the barrier loop stops once
/// `2n/τ < gap_tol·n`, i.e. the per-node duality-gap contribution of the
/// `2n` box constraints is below `gap_tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IpmOptions {
    pub tau0: f64,
    pub tau_growth: f64,
    pub gap_tol: f64,
    /// Newton stage ends when the decrement satisfies `λ²/2 ≤ newton_tol`.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub armijo_alpha: f64,
    pub backtrack_beta: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tau0: 1.0,
            tau_growth: 10.0,
            gap_tol: 1e-6,
            newton_tol: 1e-10,
            max_newton: 50,
            armijo_alpha: 0.01,
            backtrack_beta: 0.5,
        }
    }
}

impl IpmOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0) || !(self.tau_growth > 1.0) {
            return Err(Error::InvalidArgument(
                "need tau0 > 0 and tau_growth > 1".into(),
            ));
        }
        if !(self.gap_tol > 0.0) || !(self.newton_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.armijo_alpha > 0.0 && self.armijo_alpha < 0.5)
            || !(self.backtrack_beta > 0.0 && self.backtrack_beta < 1.0)
        {
            return Err(Error::InvalidArgument("invalid line-search constants".into()));
        }
        Ok(())
    }
}

/// Solution of the noise-corrupted convex relaxation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationSolutionNc {
    /// Relaxed minimizer in `[0,1]ⁿ` with `𝟙ᵀx = N_l`.
    pub x_star: Vec<f64>,
    /// `J(x*)` — a lower bound on the Boolean optimum up to the barrier
    /// slack below.
    pub lower_bound: f64,
    pub barrier_tau_final: f64,
    pub newton_iters: usize,
    /// `2n/τ` at exit: `lower_bound − duality_gap_estimate` is the fully
    /// certified bound.
    pub duality_gap_estimate: f64,
}

/// Pieces shared by the barrier value/gradient/Hessian at a point.
struct BarrierEval {
    value: f64,
    grad: DVector<f64>,
    hess: Option<DMatrix<f64>>,
}

fn barrier_eval(
    l: &Laplacian,
    kappa: &[f64],
    x: &DVector<f64>,
    tau: f64,
    want_hessian: bool,
) -> Result<BarrierEval> {
    let n = l.n();
    if x.iter().any(|&v| v <= 0.0 || v >= 1.0) {
        return Err(Error::InvalidArgument(
            "barrier requires a strictly interior point".into(),
        ));
    }
    let mut a = l.matrix().clone();
    for i in 0..n {
        a[(i, i)] += kappa[i] * x[i];
    }
    let a_inv = a
        .cholesky()
        .ok_or_else(|| Error::Singular("L + DκDx not PD at barrier point".into()))?
        .inverse();
    let mut value = tau * a_inv.trace();
    for i in 0..n {
        value -= x[i].ln() + (1.0 - x[i]).ln();
    }
    // A⁻² — full matrix needed by the Hessian, diagonal by the gradient.
    let a2 = &a_inv * &a_inv;
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        grad[i] = -tau * kappa[i] * a2[(i, i)] - 1.0 / x[i] + 1.0 / (1.0 - x[i]);
    }
    let hess = want_hessian.then(|| {
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = 2.0 * tau * kappa[i] * kappa[j] * a2[(i, j)] * a_inv[(i, j)];
            }
            h[(i, i)] += 1.0 / (x[i] * x[i]) + 1.0 / ((1.0 - x[i]) * (1.0 - x[i]));
        }
        h
    });
    Ok(BarrierEval { value, grad, hess })
}

/// Barrier objective `q(x) = τ·tr((L+DκDx)⁻¹) − Σᵢ (ln xᵢ + ln(1−xᵢ))`.
pub fn barrier_value(l: &Laplacian, kappa: &[f64], x: &DVector<f64>, tau: f64) -> Result<f64> {
    Ok(barrier_eval(l, kappa, x, tau, false)?.value)
}

/// `(∇q)ᵢ = −τκᵢ((L+DκDx)⁻²)ᵢᵢ − xᵢ⁻¹ + (1−xᵢ)⁻¹`.
pub fn barrier_gradient(
    l: &Laplacian,
    kappa: &[f64],
    x: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>> {
    Ok(barrier_eval(l, kappa, x, tau, false)?.grad)
}

/// `∇²q = 2τ (Dκ A⁻² Dκ) ∘ A⁻¹ + diag(xᵢ⁻² + (1−xᵢ)⁻²)` with `A = L+DκDx`.
pub fn barrier_hessian(
    l: &Laplacian,
    kappa: &[f64],
    x: &DVector<f64>,
    tau: f64,
) -> Result<DMatrix<f64>> {
    Ok(barrier_eval(l, kappa, x, tau, true)?.hess.unwrap())
}

/// Equality-eliminated Newton direction on the hyperplane `𝟙ᵀx = N_l`:
///
/// `x_nt = −H⁻¹g − δ H⁻¹𝟙`, `δ = −𝟙ᵀH⁻¹g / 𝟙ᵀH⁻¹𝟙`,
///
/// so `𝟙ᵀx_nt = 0` by construction. Returns the direction and the Newton
/// decrement `λ² = −gᵀ x_nt`.
pub fn newton_direction(
    l: &Laplacian,
    kappa: &[f64],
    x: &DVector<f64>,
    tau: f64,
) -> Result<(DVector<f64>, f64)> {
    let eval = barrier_eval(l, kappa, x, tau, true)?;
    newton_from_parts(&eval.grad, &eval.hess.unwrap())
}

fn newton_from_parts(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let n = g.len();
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("barrier Hessian not PD".into()))?;
    let hinv_g = chol.solve(g);
    let ones = DVector::from_element(n, 1.0);
    let hinv_ones = chol.solve(&ones);
    let delta = -ones.dot(&hinv_g) / ones.dot(&hinv_ones);
    let dir = -&hinv_g - &hinv_ones * delta;
    let lambda_sq = -g.dot(&dir);
    Ok((dir, lambda_sq))
}

/// Lower bound on the Boolean optimum via the convex relaxation, solved by
/// a log-barrier interior-point method.
///
/// Starts at the analytic center `x⁰ = (N_l/n)·𝟙` of the feasible slice
/// and follows the barrier path `τ ← tau_growth·τ`, taking damped Newton
/// steps (fraction-to-boundary cap + Armijo backtracking) until the
/// decrement test `λ²/2 ≤ newton_tol` passes at each stage. Stops once the
/// relative duality gap `2/τ` falls below `gap_tol` and reports `J(x*)`.
pub fn cr1_lower_bound(
    l: &Laplacian,
    kappa: &[f64],
    n_l: usize,
    opts: &IpmOptions,
) -> Result<RelaxationSolutionNc> {
    let n = l.n();
    check_nl(n, n_l)?;
    check_kappa(n, kappa)?;
    opts.validate()?;

    let mut x = DVector::from_element(n, n_l as f64 / n as f64);
    let mut tau = opts.tau0;
    let mut newton_iters = 0usize;

    loop {
        for _ in 0..opts.max_newton {
            let eval = barrier_eval(l, kappa, &x, tau, true)?;
            let (dir, lambda_sq) = newton_from_parts(&eval.grad, &eval.hess.unwrap())?;
            if lambda_sq / 2.0 <= opts.newton_tol {
                break;
            }
            let slope = eval.grad.dot(&dir);
            if slope >= 0.0 {
                return Err(Error::Solver(format!(
                    "Newton direction is not a descent direction (gᵀd = {slope:.3e})"
                )));
            }
            // Largest step keeping x strictly inside (0,1), shrunk by the
            // fraction-to-boundary factor.
            let mut s_max = 1.0f64;
            for i in 0..n {
                if dir[i] < 0.0 {
                    s_max = s_max.min(FRAC_TO_BOUNDARY * (-x[i] / dir[i]));
                } else if dir[i] > 0.0 {
                    s_max = s_max.min(FRAC_TO_BOUNDARY * ((1.0 - x[i]) / dir[i]));
                }
            }
            let mut s = s_max.min(1.0);
            let mut accepted = false;
            while s > 1e-16 {
                let cand = &x + &dir * s;
                if cand.iter().all(|&v| v > 0.0 && v < 1.0) {
                    if let Ok(val) = barrier_value(l, kappa, &cand, tau) {
                        if val <= eval.value + opts.armijo_alpha * s * slope {
                            x = cand;
                            accepted = true;
                            break;
                        }
                    }
                }
                s *= opts.backtrack_beta;
            }
            newton_iters += 1;
            if !accepted {
                return Err(Error::Solver(
                    "barrier line search failed to make progress".into(),
                ));
            }
        }
        if 2.0 / tau < opts.gap_tol {
            break;
        }
        tau *= opts.tau_growth;
    }

    // J(x*) at the final iterate.
    let mut a = l.matrix().clone();
    for i in 0..n {
        a[(i, i)] += kappa[i] * x[i];
    }
    let lower_bound = a
        .cholesky()
        .ok_or_else(|| Error::Singular("final iterate lost positive definiteness".into()))?
        .inverse()
        .trace();

    Ok(RelaxationSolutionNc {
        x_star: x.iter().copied().collect(),
        lower_bound,
        barrier_tau_final: tau,
        newton_iters,
        duality_gap_estimate: 2.0 * n as f64 / tau,
    })
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Exact optimum by enumeration — the small-instance oracle. Lexicographic
/// order plus strict improvement means ties resolve to the lowest index
/// set.
pub fn exhaustive_search(
    l: &Laplacian,
    kappa: &[f64],
    n_l: usize,
) -> Result<(LeaderSelection, f64)> {
    let n = l.n();
    check_nl(n, n_l)?;
    check_kappa(n, kappa)?;
    let count = binomial(n, n_l);
    if count > EXHAUSTIVE_BUDGET {
        return Err(Error::BudgetExceeded { n, k: n_l, budget: EXHAUSTIVE_BUDGET });
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut err = None;
    for_each_combination(n, n_l, |set| {
        if err.is_some() {
            return;
        }
        let sel = LeaderSelection::from_set(n, set, kappa.to_vec()).expect("valid set");
        match evaluate_j(l, &sel) {
            Ok(j) => {
                if best.as_ref().is_none_or(|(_, bj)| j < *bj) {
                    best = Some((set.to_vec(), j));
                }
            }
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let (set, j) = best.expect("at least one combination");
    Ok((LeaderSelection::from_set(n, &set, kappa.to_vec())?, j))
}

/// Steady-state variance estimate by direct simulation of
/// `ψ̇ = −(L + DκDx)ψ + w` with an Euler–Maruyama scheme; the stationary
/// value of `E‖ψ‖²` is `J/2`.
///
/// The step size must satisfy `dt·λ_max(A) < 0.5` (enforced) or the
/// discretization is unstable. The first 20% of each path is discarded as
/// burn-in; paths use decorrelated seeds derived from `seed` and are
/// averaged in path order, so the estimate is deterministic and
/// independent of thread count.
pub fn monte_carlo_variance(
    l: &Laplacian,
    sel: &LeaderSelection,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    if sel.n() != l.n() {
        return Err(Error::InvalidSelection(format!(
            "selection is over {} nodes, graph has {}",
            sel.n(),
            l.n()
        )));
    }
    if !(horizon > 0.0) || !(dt > 0.0) || n_paths == 0 {
        return Err(Error::InvalidArgument(
            "need horizon > 0, dt > 0, n_paths >= 1".into(),
        ));
    }
    let a = modified_laplacian(l, sel);
    let lambda_max = a
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if dt * lambda_max >= 0.5 {
        return Err(Error::StepSizeGuard(dt * lambda_max));
    }

    let n = l.n();
    let steps = (horizon / dt).ceil() as usize;
    let burn_in = steps / 5;
    if steps <= burn_in {
        return Err(Error::InvalidArgument("horizon too short for burn-in".into()));
    }
    let sqrt_dt = dt.sqrt();

    let path_means: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_add((p as u64).wrapping_mul(0x9E3779B97F4A7C15)));
            let mut psi = DVector::<f64>::zeros(n);
            let mut drift = DVector::<f64>::zeros(n);
            let mut acc = 0.0f64;
            for step in 0..steps {
                drift.gemv(-dt, &a, &psi, 0.0);
                for i in 0..n {
                    psi[i] += drift[i] + sqrt_dt * standard_normal(&mut rng);
                }
                if step >= burn_in {
                    acc += psi.norm_squared();
                }
            }
            acc / (steps - burn_in) as f64
        })
        .collect();

    Ok(path_means.iter().sum::<f64>() / n_paths as f64)
}

/// Box–Muller draw from N(0,1). Consumes exactly two uniforms per call so
/// the stream layout is stable.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_lattice, build_random_connected, laplacian, NetworkGraph};

    fn path(n: usize) -> Laplacian {
        let g = NetworkGraph::new(n, (0..n - 1).map(|i| (i, i + 1)).collect(), None).unwrap();
        laplacian(&g)
    }

    fn uniform_sel(n: usize, leaders: &[usize]) -> LeaderSelection {
        LeaderSelection::from_set(n, leaders, vec![1.0; n]).unwrap()
    }

    #[test]
    fn evaluate_j_hand_examples() {
        // 2-path, leader {0}: inverse is [[1,1],[1,2]], trace 3.
        assert!((evaluate_j(&path(2), &uniform_sel(2, &[0])).unwrap() - 3.0).abs() < 1e-12);
        // 3-path, middle leader: trace 5.
        assert!((evaluate_j(&path(3), &uniform_sel(3, &[1])).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_j_vanishes_as_gains_grow() {
        // All nodes leaders with growing uniform gains: J decreases toward 0.
        let l = path(3);
        let mut prev = f64::INFINITY;
        for kappa in [1e2, 1e4, 1e6] {
            let sel = LeaderSelection::new(vec![true; 3], vec![kappa; 3]).unwrap();
            let j = evaluate_j(&l, &sel).unwrap();
            assert!(j < prev);
            prev = j;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn schur_matches_direct() {
        let l = path(3);
        let sel = uniform_sel(3, &[1]);
        let direct = evaluate_j(&l, &sel).unwrap();
        let schur = evaluate_j_schur(&l, &sel).unwrap();
        assert!((direct - 5.0).abs() < 1e-12);
        assert!((schur - direct).abs() < 1e-9 * direct);

        // 2-path, leader {0}.
        let l2 = path(2);
        let sel2 = uniform_sel(2, &[0]);
        assert!((evaluate_j_schur(&l2, &sel2).unwrap() - 3.0).abs() < 1e-12);

        for seed in 0..20 {
            let g = build_random_connected(4 + (seed as usize % 9), 4, seed).unwrap();
            let l = laplacian(&g);
            let n = g.n();
            let kappa: Vec<f64> = (0..n).map(|i| 0.5 + (i as f64) * 0.3 % 2.0).collect();
            let leaders: Vec<usize> = (0..n).step_by(2).take(n / 2).collect();
            let sel = LeaderSelection::from_set(n, &leaders, kappa).unwrap();
            let a = evaluate_j(&l, &sel).unwrap();
            let b = evaluate_j_schur(&l, &sel).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs(), "mismatch {a} vs {b}");
        }
    }

    #[test]
    fn greedy_three_path_picks_middle() {
        let (sel, j) = greedy_select(&path(3), &[1.0; 3], 1).unwrap();
        assert_eq!(sel.leaders(), vec![1]);
        assert!((j - 5.0).abs() < 1e-10);
    }

    #[test]
    fn greedy_never_beats_exhaustive() {
        for seed in 0..15 {
            let g = build_random_connected(4 + (seed as usize % 7), 3, 1000 + seed).unwrap();
            let l = laplacian(&g);
            let n = g.n();
            let kappa = vec![1.0; n];
            for n_l in 1..n.min(4) {
                let (_, j_greedy) = greedy_select(&l, &kappa, n_l).unwrap();
                let (_, j_opt) = exhaustive_search(&l, &kappa, n_l).unwrap();
                assert!(
                    j_greedy >= j_opt - 1e-9,
                    "greedy {j_greedy} below optimum {j_opt}"
                );
            }
        }
    }

    #[test]
    fn greedy_objective_decreases_per_round() {
        let g = build_random_connected(10, 5, 42).unwrap();
        let l = laplacian(&g);
        let kappa = vec![1.0; 10];
        let mut prev = f64::INFINITY;
        for n_l in 1..6 {
            let (_, j) = greedy_select(&l, &kappa, n_l).unwrap();
            assert!(j < prev, "J must strictly decrease as leaders are added");
            prev = j;
        }
    }

    #[test]
    fn swap_moves_endpoint_to_middle() {
        let l = path(3);
        let start = uniform_sel(3, &[0]);
        assert!((evaluate_j(&l, &start).unwrap() - 6.0).abs() < 1e-10);
        let (sel, j, swaps) = swap_refine(&l, &start, usize::MAX).unwrap();
        assert_eq!(sel.leaders(), vec![1]);
        assert!((j - 5.0).abs() < 1e-10);
        assert_eq!(swaps, 1);
    }

    #[test]
    fn swap_fixed_point_uses_zero_swaps() {
        let l = path(3);
        let opt = uniform_sel(3, &[1]);
        let (sel, j, swaps) = swap_refine(&l, &opt, usize::MAX).unwrap();
        assert_eq!(swaps, 0);
        assert_eq!(sel.leaders(), vec![1]);
        assert!((j - 5.0).abs() < 1e-10);
    }

    #[test]
    fn degree_heuristic_examples() {
        assert_eq!(degree_heuristic(&path(3), 1).unwrap(), vec![1]);
        // Star: hub 0 with 4 spokes.
        let star = NetworkGraph::new(5, vec![(0, 1), (0, 2), (0, 3), (0, 4)], None).unwrap();
        assert_eq!(degree_heuristic(&laplacian(&star), 1).unwrap(), vec![0]);
        // 3×3 lattice: center (node 4) has degree 4.
        let l = laplacian(&build_lattice(3, 3).unwrap());
        assert_eq!(degree_heuristic(&l, 1).unwrap(), vec![4]);
    }

    #[test]
    fn cr1_two_path_splits_evenly() {
        let sol = cr1_lower_bound(&path(2), &[1.0; 2], 1, &IpmOptions::default()).unwrap();
        assert!((sol.x_star[0] - 0.5).abs() < 1e-6);
        assert!((sol.x_star[1] - 0.5).abs() < 1e-6);
        // J((½,½)) = tr([[1.5,−1],[−1,1.5]]⁻¹) = 3/1.25 = 2.4.
        assert!((sol.lower_bound - 2.4).abs() < 1e-6, "got {}", sol.lower_bound);
    }

    #[test]
    fn cr1_three_path_bounds_optimum() {
        let sol = cr1_lower_bound(&path(3), &[1.0; 3], 1, &IpmOptions::default()).unwrap();
        assert!(sol.lower_bound <= 5.0 + 1e-9);
        let sum: f64 = sol.x_star.iter().sum();
        assert!((sum - 1.0).abs() < 1e-8, "sum {sum}");
        assert!(sol.x_star.iter().all(|&v| (-1e-8..=1.0 + 1e-8).contains(&v)));
    }

    #[test]
    fn barrier_calculus_matches_finite_differences() {
        let g = build_random_connected(7, 4, 17).unwrap();
        let l = laplacian(&g);
        let kappa: Vec<f64> = (0..7).map(|i| 0.6 + 0.2 * i as f64).collect();
        let x = DVector::from_iterator(7, (0..7).map(|i| 0.2 + 0.08 * i as f64));
        let tau = 3.0;
        let h = 1e-5;

        let grad = barrier_gradient(&l, &kappa, &x, tau).unwrap();
        let hess = barrier_hessian(&l, &kappa, &x, tau).unwrap();
        for i in 0..7 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (barrier_value(&l, &kappa, &xp, tau).unwrap()
                - barrier_value(&l, &kappa, &xm, tau).unwrap())
                / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1.0),
                "gradient[{i}]: fd {fd} vs analytic {}",
                grad[i]
            );
            let gp = barrier_gradient(&l, &kappa, &xp, tau).unwrap();
            let gm = barrier_gradient(&l, &kappa, &xm, tau).unwrap();
            for j in 0..7 {
                let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                assert!(
                    (fd2 - hess[(j, i)]).abs() <= 1e-6 * hess[(j, i)].abs().max(1.0),
                    "hessian[{j},{i}]: fd {fd2} vs analytic {}",
                    hess[(j, i)]
                );
            }
        }
    }

    #[test]
    fn newton_direction_stays_on_hyperplane() {
        let g = build_random_connected(8, 5, 23).unwrap();
        let l = laplacian(&g);
        let kappa = vec![1.0; 8];
        let x = DVector::from_element(8, 3.0 / 8.0);
        let (dir, lambda_sq) = newton_direction(&l, &kappa, &x, 5.0).unwrap();
        assert!(dir.sum().abs() < 1e-9);
        assert!(lambda_sq >= 0.0);
    }

    #[test]
    fn exhaustive_small_cases() {
        let (sel, j) = exhaustive_search(&path(3), &[1.0; 3], 1).unwrap();
        assert_eq!(sel.leaders(), vec![1]);
        assert!((j - 5.0).abs() < 1e-12);

        // 2-path: symmetric tie, lowest index wins.
        let (sel2, j2) = exhaustive_search(&path(2), &[1.0; 2], 1).unwrap();
        assert_eq!(sel2.leaders(), vec![0]);
        assert!((j2 - 3.0).abs() < 1e-12);

        // 4-cycle: vertex-transitive, every single-leader J identical.
        let cyc = NetworkGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)], None).unwrap();
        let l = laplacian(&cyc);
        let js: Vec<f64> = (0..4)
            .map(|i| evaluate_j(&l, &uniform_sel(4, &[i])).unwrap())
            .collect();
        for j in &js[1..] {
            assert!((j - js[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn exhaustive_respects_budget() {
        let g = build_random_connected(40, 10, 3).unwrap();
        let l = laplacian(&g);
        assert!(matches!(
            exhaustive_search(&l, &vec![1.0; 40], 20),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn monte_carlo_two_path_near_half_j() {
        let l = path(2);
        let sel = uniform_sel(2, &[0]);
        // J = 3, so the stationary estimate should be ≈ 1.5.
        let est = monte_carlo_variance(&l, &sel, 2000.0, 0.01, 10, 7).unwrap();
        assert!((est - 1.5).abs() / 1.5 < 0.05, "estimate {est}");
    }

    #[test]
    fn monte_carlo_rejects_coarse_steps() {
        let l = path(2);
        let sel = uniform_sel(2, &[0]);
        assert!(matches!(
            monte_carlo_variance(&l, &sel, 10.0, 0.2, 1, 7),
            Err(Error::StepSizeGuard(_))
        ));
    }

    #[test]
    fn selection_validation() {
        assert!(LeaderSelection::new(vec![false, false], vec![1.0; 2]).is_err());
        assert!(LeaderSelection::new(vec![true, false], vec![1.0, 0.0]).is_err());
        assert!(LeaderSelection::from_set(3, &[0, 0], vec![1.0; 3]).is_err());
        assert!(LeaderSelection::from_set(3, &[3], vec![1.0; 3]).is_err());
        // All-leader selections are evaluable (used by gain-limit checks).
        assert!(LeaderSelection::new(vec![true, true], vec![1.0; 2]).is_ok());
    }
}
