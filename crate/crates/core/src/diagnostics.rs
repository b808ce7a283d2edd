//! State-norm traces of the shift recursion and side-by-side traces of the three filter kinds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{
    gcnn_filter_recursive, lssm_filter, rsn_filter, FilterActivations, GcnnFilterParams,
    LssmFilterParams, RsnFilterParams,
};
use crate::graph::{ShiftOperator, SHIFT_MAX_ITERS, SHIFT_TOL};
use crate::numerics::{dot, power_iteration, RealVector};

pub const EXPLODING_ABOVE: f64 = 1.05;
pub const VANISHING_BELOW: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateRegime {
    Exploding,
    Vanishing,
    Marginal,
}

impl StateRegime {
    pub fn classify(rate: f64) -> Self {
        if rate > EXPLODING_ABOVE {
            StateRegime::Exploding
        } else if rate < VANISHING_BELOW {
            StateRegime::Vanishing
        } else {
            StateRegime::Marginal
        }
    }
}

impl fmt::Display for StateRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateRegime::Exploding => "exploding",
            StateRegime::Vanishing => "vanishing",
            StateRegime::Marginal => "marginal",
        })
    }
}

/// Growth profile of `w_k = S w_{k-1}`, `w_0 = x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub order: usize,
    /// `||w_k||₂` for `k = 0..=K`.
    pub norms: Vec<f64>,
    /// Geometric mean of the last `⌈K/2⌉` successive norm ratios.
    pub growth_rate: f64,
    pub classification: StateRegime,
    pub spectral_radius: f64,
    /// `|<x, v₁>| / ||x||` with `v₁` the power-iteration dominant eigenvector.
    pub alignment: f64,
}

/// Geometric mean of the last `⌈K/2⌉` ratios `norms[k] / norms[k-1]`.
pub fn growth_rate(norms: &[f64]) -> f64 {
    let order = norms.len().saturating_sub(1);
    if order == 0 {
        return f64::NAN;
    }
    let window = order.div_ceil(2);
    let (start, end) = (norms[order - window], norms[order]);
    if start == 0.0 {
        return 0.0;
    }
    (end / start).powf(1.0 / window as f64)
}

pub fn state_norm_trace(s: &ShiftOperator, x: &[f64], order: usize) -> Result<StabilityReport> {
    if order == 0 {
        return Err(Error::invalid("state norm trace needs K >= 1"));
    }
    if x.len() != s.n() {
        return Err(Error::dims("graph signal length", s.n(), x.len()));
    }
    let mut w = RealVector(x.to_vec());
    let mut next = RealVector::zeros(x.len());
    let mut norms = Vec::with_capacity(order + 1);
    norms.push(w.norm2());
    for _ in 0..order {
        s.matrix().matvec_into(&w, &mut next);
        std::mem::swap(&mut w, &mut next);
        norms.push(w.norm2());
    }
    let rate = growth_rate(&norms);
    let dominant = power_iteration(s.matrix(), SHIFT_TOL, SHIFT_MAX_ITERS)?;
    let x_norm = norms[0];
    let alignment = if x_norm > 0.0 {
        dot(x, &dominant.vector).abs() / (x_norm * dominant.vector.norm2())
    } else {
        0.0
    };
    Ok(StabilityReport {
        order,
        norms,
        growth_rate: rate,
        classification: StateRegime::classify(rate),
        spectral_radius: dominant.magnitude,
        alignment,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub norm_gcnn: f64,
    pub norm_rsn: f64,
    pub norm_lssm: f64,
}

/// Per-shift state norms of the three filter kinds on the same `(S, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceComparison {
    pub rows: Vec<TraceRow>,
    pub activations: FilterActivations,
}

impl TraceComparison {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "norm_gcnn", "norm_rsn", "norm_lssm"])?;
        for r in &self.rows {
            w.serialize((r.k, r.norm_gcnn, r.norm_rsn, r.norm_lssm))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compare_filter_traces(
    s: &ShiftOperator,
    x: &[f64],
    gcnn: &GcnnFilterParams,
    rsn: &RsnFilterParams,
    lssm: &LssmFilterParams,
    acts: FilterActivations,
) -> Result<TraceComparison> {
    let order = gcnn.order();
    if rsn.order() != order || lssm.order() != order {
        return Err(Error::dims("filter orders", order, rsn.order().max(lssm.order())));
    }
    let (_, tg) = gcnn_filter_recursive(s, gcnn, x)?;
    let (_, tr) = rsn_filter(s, rsn, x, acts.state, acts.output)?;
    let (_, tl) = lssm_filter(s, lssm, x, acts.output)?;
    let rows = (0..=order)
        .map(|k| TraceRow {
            k,
            norm_gcnn: tg.state_norms[k],
            norm_rsn: tr.state_norms[k],
            norm_lssm: tl.state_norms[k],
        })
        .collect();
    Ok(TraceComparison {
        rows,
        activations: acts,
    })
}
