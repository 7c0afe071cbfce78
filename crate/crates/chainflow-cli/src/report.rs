//! Ratio evaluation: offline/online comparison against the proven
//! admission bound, plus residuals of the run's two core inequalities
//! recomputed from an online trace.

use chainflow::ace::{AceParams, TraceRecord};
use chainflow::offline::SolveResult;
use serde::Serialize;

/// Comparison of an online result against an offline one.
///
/// The problem maximizes admissions, so the ratio is reported as
/// offline/online (≥ 1 against an optimal offline result). `ratio` is
/// `None` when the online algorithm admitted nothing while offline did
/// (unbounded), and 1.0 when both admitted nothing.
///
/// `weight_bound_residual` is the worst step value of
/// `Σ_v w_v − 2ℓ·log2(μ)·|admitted|`; non-positive means the weight-growth
/// bound held throughout. `rejection_bound_residual` is
/// `|offline-only admissions|·ℓ − Σ_v w_v(final)`; non-positive means the
/// final weights pay for every request the online run missed. Both only
/// apply to uniform chain length ℓ; on mixed-length explicit instances
/// they may be positive by construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub online_objective: usize,
    pub offline_objective: usize,
    pub offline_optimal: bool,
    pub ratio: Option<f64>,
    pub ell: usize,
    pub mu: f64,
    pub bound: f64,
    pub bound_satisfied: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_bound_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_bound_residual: Option<f64>,
}

/// Offline/online ratio under the reporting conventions above; infinite is
/// expressed as `None`.
pub fn offline_online_ratio(online: usize, offline: usize) -> Option<f64> {
    match (online, offline) {
        (0, 0) => Some(1.0),
        (0, _) => None,
        (on, off) => Some(off as f64 / on as f64),
    }
}

pub fn build_report(
    online: &SolveResult,
    offline: &SolveResult,
    params: &AceParams,
    trace: Option<&[TraceRecord]>,
) -> RatioReport {
    let ratio = offline_online_ratio(online.objective, offline.objective);
    let bound = params.competitive_bound();
    let (weight_bound_residual, rejection_bound_residual) = match trace {
        None => (None, None),
        Some(records) => {
            let growth = 2.0 * params.ell as f64 * params.mu.log2();
            let worst = records
                .iter()
                .map(|r| r.total_weight - growth * r.admitted_count as f64)
                .fold(0.0f64, f64::max);
            let final_weight = records.last().map_or(0.0, |r| r.total_weight);
            let missed = offline
                .admitted
                .iter()
                .filter(|i| !online.admitted.contains(i))
                .count();
            (
                Some(worst),
                Some(missed as f64 * params.ell as f64 - final_weight),
            )
        }
    };
    RatioReport {
        online_objective: online.objective,
        offline_objective: offline.objective,
        offline_optimal: offline.optimal,
        ratio,
        ell: params.ell,
        mu: params.mu,
        bound,
        bound_satisfied: ratio.map(|r| r <= bound),
        weight_bound_residual,
        rejection_bound_residual,
    }
}
