//! Sensor-placement view of leader selection.
//!
//! Estimating node positions from relative (edge) measurements plus a few
//! absolute references is the same optimization problem in disguise: the
//! BLUE estimation-error covariance with unit relative noise and absolute
//! gains `κ` is exactly `(L + DκDx)⁻¹`, so minimizing total estimation
//! variance over absolute-sensor placements is noise-corrupted leader
//! selection. With perfect reference sensors the covariance collapses to
//! the inverse grounded Laplacian and the correspondence is with the
//! noise-free objective instead. This module builds the measurement
//! matrices and exposes both covariances so the equivalences are
//! executable, not just stated.

use nalgebra::{DMatrix, DVector};

use crate::graph::{laplacian, principal_submatrix, NetworkGraph};
use crate::noise_corrupted::LeaderSelection;
use crate::{Error, Result};

/// Tolerance for symmetry checks on user-supplied noise covariances.
const SYMMETRY_TOL: f64 = 1e-12;

/// A linear measurement setup: relative measurements along edges
/// (`y_r = E_rᵀψ + w_r`) and absolute measurements at selected nodes
/// (`y_a = E_aᵀψ + w_a`).
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    /// n×m incidence matrix; column per measured edge, entries ±1.
    e_r: DMatrix<f64>,
    /// n×k selector; column `eᵢ` per absolute measurement at node `i`.
    e_a: DMatrix<f64>,
    /// m×m relative-noise covariance.
    w_r: DMatrix<f64>,
    /// n×n absolute-noise covariance; only the rows/columns of selected
    /// nodes enter the estimate.
    w_a: DMatrix<f64>,
}

fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!("{name} must be square")));
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
            }
        }
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument(format!("{name} is not positive definite")));
    }
    Ok(())
}

impl MeasurementModel {
    pub fn new(
        e_r: DMatrix<f64>,
        e_a: DMatrix<f64>,
        w_r: DMatrix<f64>,
        w_a: DMatrix<f64>,
    ) -> Result<Self> {
        let n = e_r.nrows();
        let m = e_r.ncols();
        for c in 0..m {
            let sum: f64 = e_r.column(c).iter().sum();
            if sum.abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "relative-measurement column {c} does not sum to zero"
                )));
            }
        }
        if e_a.nrows() != n {
            return Err(Error::InvalidArgument(
                "absolute selector must have one row per node".into(),
            ));
        }
        for c in 0..e_a.ncols() {
            let col = e_a.column(c);
            let ones = col.iter().filter(|&&v| v == 1.0).count();
            let zeros = col.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != n {
                return Err(Error::InvalidArgument(format!(
                    "absolute selector column {c} is not a standard basis vector"
                )));
            }
        }
        if w_r.nrows() != m {
            return Err(Error::InvalidArgument(format!(
                "relative-noise covariance must be {m}x{m} (one per measurement)"
            )));
        }
        if w_a.nrows() != n {
            return Err(Error::InvalidArgument(format!(
                "absolute-noise covariance must be {n}x{n} (one row per node)"
            )));
        }
        check_spd(&w_r, "relative-noise covariance")?;
        check_spd(&w_a, "absolute-noise covariance")?;
        Ok(MeasurementModel { e_r, e_a, w_r, w_a })
    }

    /// The model whose estimation error reproduces the noise-corrupted
    /// leader-selection objective: unit relative noise on every edge,
    /// absolute sensors at the leaders with noise `1/κᵢ`.
    pub fn for_leader_selection(g: &NetworkGraph, sel: &LeaderSelection) -> Result<Self> {
        if sel.n() != g.n() {
            return Err(Error::InvalidArgument(format!(
                "selection over {} nodes does not match graph with n={}",
                sel.n(),
                g.n()
            )));
        }
        let n = g.n();
        let e_r = build_incidence(g);
        let leaders = sel.leaders();
        let mut e_a = DMatrix::zeros(n, leaders.len());
        for (c, &i) in leaders.iter().enumerate() {
            e_a[(i, c)] = 1.0;
        }
        let w_r = DMatrix::identity(e_r.ncols(), e_r.ncols());
        let w_a = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            sel.kappa().iter().map(|&k| 1.0 / k),
        ));
        MeasurementModel::new(e_r, e_a, w_r, w_a)
    }

    pub fn e_r(&self) -> &DMatrix<f64> {
        &self.e_r
    }

    pub fn e_a(&self) -> &DMatrix<f64> {
        &self.e_a
    }
}

/// Edge incidence matrix: one column per edge with +1 at the smaller
/// endpoint and −1 at the larger. The orientation is a free choice — every
/// covariance below depends only on `E_r E_rᵀ`, which equals the Laplacian
/// regardless.
pub fn build_incidence(g: &NetworkGraph) -> DMatrix<f64> {
    let n = g.n();
    let edges = g.edges();
    let mut e = DMatrix::zeros(n, edges.len());
    for (c, &(u, v)) in edges.iter().enumerate() {
        e[(u, c)] = 1.0;
        e[(v, c)] = -1.0;
    }
    e
}

/// BLUE estimation-error covariance
/// `Σ = (E_r W_r⁻¹ E_rᵀ + E_a (E_aᵀ W_a E_a)⁻¹ E_aᵀ)⁻¹`.
///
/// Without at least one absolute measurement the information matrix keeps
/// the consensus nullspace (`𝟙`) and the estimate is unidentifiable.
pub fn blue_error_covariance(model: &MeasurementModel) -> Result<DMatrix<f64>> {
    if model.e_a.ncols() == 0 {
        return Err(Error::Singular(
            "no absolute measurements: the translation mode 𝟙 is unobservable".into(),
        ));
    }
    let w_r_inv = model
        .w_r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("relative-noise covariance is not PD".into()))?
        .inverse();
    let inner = model.e_a.transpose() * &model.w_a * &model.e_a;
    let inner_inv = inner
        .cholesky()
        .ok_or_else(|| Error::Singular("absolute-noise block is not PD".into()))?
        .inverse();
    let info =
        &model.e_r * w_r_inv * model.e_r.transpose() + &model.e_a * inner_inv * model.e_a.transpose();
    info.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("information matrix is not PD".into()))
}

/// Error covariance with perfect reference sensors at `reference_set`:
/// the remaining nodes are estimated from relative measurements alone and
/// the covariance is the inverse grounded Laplacian — identical to the
/// noise-free leader-selection objective matrix.
pub fn reference_error_covariance(
    g: &NetworkGraph,
    reference_set: &[usize],
) -> Result<DMatrix<f64>> {
    if reference_set.is_empty() {
        return Err(Error::InvalidSelection(
            "need at least one reference sensor".into(),
        ));
    }
    let l = laplacian(g);
    let grounded = principal_submatrix(&l, reference_set)?;
    grounded
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("grounded Laplacian is not PD".into()))
}
