//! Per-feature-pair graph filters written as state-space recursions over graph shifts.
//!
//! Three kinds share one calling convention:
//!
//! * [`FilterKind::Gcnn`]: the linear convolution `y = Σ_k h_k S^k x`, evaluated either
//!   recursively (`w_k = S w_{k-1}`) or by explicit matrix powers.
//! * [`FilterKind::Rsn`]: recursive shift network, a nonlinear state update that re-injects
//!   the input at every shift.
//! * [`FilterKind::Lssm`]: long short shift memory, a gated update with an internal and a
//!   global memory per node.
//!
//! Every forward pass returns a [`FilterTrace`] with the intermediate states; the backward
//! passes consume it to produce exact vector-Jacobian products.

mod gcnn;
mod lssm;
mod rsn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ShiftOperator;
use crate::numerics::{Activation, RealVector};
use crate::rng::Rng;

pub use gcnn::{gcnn_filter_direct, gcnn_filter_recursive};
pub use lssm::lssm_filter;
pub use rsn::rsn_filter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Gcnn,
    Rsn,
    Lssm,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Gcnn, FilterKind::Rsn, FilterKind::Lssm];

    /// Stored scalars per filter of order `order`.
    pub fn param_len(self, order: usize) -> usize {
        match self {
            FilterKind::Gcnn => order + 1,
            FilterKind::Rsn => 4 * order + 2,
            FilterKind::Lssm => 10 * (order + 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Gcnn => "gcnn",
            FilterKind::Rsn => "rsn",
            FilterKind::Lssm => "lssm",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcnn" | "gnn" => Ok(FilterKind::Gcnn),
            "rsn" => Ok(FilterKind::Rsn),
            "lssm" => Ok(FilterKind::Lssm),
            other => Err(Error::invalid(format!("unknown filter kind '{other}'"))),
        }
    }
}

/// Taps `h_0..h_K` of the linear convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnnFilterParams {
    taps: Vec<f64>,
}

impl GcnnFilterParams {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("a linear filter needs at least one tap"));
        }
        Ok(GcnnFilterParams { taps })
    }

    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Scalar coefficients of a recursive shift network filter.
///
/// Layout: `[h_0yw, h_0yx]` followed by `[h_kww, h_kwx, h_kyw, h_kyx]` for `k = 1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct RsnFilterParams {
    order: usize,
    values: Vec<f64>,
}

/// Coefficient slots of one RSN shift.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RsnShift {
    pub ww: f64,
    pub wx: f64,
    pub yw: f64,
    pub yx: f64,
}

impl RsnFilterParams {
    pub fn new(order: usize, values: Vec<f64>) -> Result<Self> {
        check_len(FilterKind::Rsn, order, values.len())?;
        Ok(RsnFilterParams { order, values })
    }

    pub fn zeros(order: usize) -> Self {
        RsnFilterParams {
            order,
            values: vec![0.0; FilterKind::Rsn.param_len(order)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(h_0yw, h_0yx)`
    pub fn output0(&self) -> (f64, f64) {
        (self.values[0], self.values[1])
    }

    pub fn set_output0(&mut self, yw: f64, yx: f64) {
        self.values[0] = yw;
        self.values[1] = yx;
    }

    /// Coefficients of shift `k` in `1..=K`.
    pub fn shift(&self, k: usize) -> RsnShift {
        let b = rsn::shift_base(k);
        RsnShift {
            ww: self.values[b + rsn::WW],
            wx: self.values[b + rsn::WX],
            yw: self.values[b + rsn::YW],
            yx: self.values[b + rsn::YX],
        }
    }

    pub fn set_shift(&mut self, k: usize, c: RsnShift) {
        let b = rsn::shift_base(k);
        self.values[b + rsn::WW] = c.ww;
        self.values[b + rsn::WX] = c.wx;
        self.values[b + rsn::YW] = c.yw;
        self.values[b + rsn::YX] = c.yx;
    }
}

/// Scalar coefficients of a long short shift memory filter.
///
/// Ten scalars per shift `k = 0..=K` in the order
/// `[h_kcw, h_kcx, h_kfw, h_kfx, h_kuw, h_kux, h_kww, h_kwx, h_kyw, h_kyx]`.
/// At `k = 0` only the output pair is used; the gate slots are stored but inert.
#[derive(Clone, Debug, PartialEq)]
pub struct LssmFilterParams {
    order: usize,
    values: Vec<f64>,
}

/// Coefficient slots of one LSSM shift.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LssmShift {
    pub cw: f64,
    pub cx: f64,
    pub fw: f64,
    pub fx: f64,
    pub uw: f64,
    pub ux: f64,
    pub ww: f64,
    pub wx: f64,
    pub yw: f64,
    pub yx: f64,
}

impl LssmShift {
    fn from_slice(s: &[f64]) -> Self {
        LssmShift {
            cw: s[0],
            cx: s[1],
            fw: s[2],
            fx: s[3],
            uw: s[4],
            ux: s[5],
            ww: s[6],
            wx: s[7],
            yw: s[8],
            yx: s[9],
        }
    }

    fn to_array(self) -> [f64; 10] {
        [
            self.cw, self.cx, self.fw, self.fx, self.uw, self.ux, self.ww, self.wx, self.yw,
            self.yx,
        ]
    }
}

impl LssmFilterParams {
    pub fn new(order: usize, values: Vec<f64>) -> Result<Self> {
        check_len(FilterKind::Lssm, order, values.len())?;
        Ok(LssmFilterParams { order, values })
    }

    pub fn zeros(order: usize) -> Self {
        LssmFilterParams {
            order,
            values: vec![0.0; FilterKind::Lssm.param_len(order)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shift(&self, k: usize) -> LssmShift {
        LssmShift::from_slice(&self.values[10 * k..10 * k + 10])
    }

    pub fn set_shift(&mut self, k: usize, c: LssmShift) {
        self.values[10 * k..10 * k + 10].copy_from_slice(&c.to_array());
    }
}

fn check_len(kind: FilterKind, order: usize, got: usize) -> Result<()> {
    let expected = kind.param_len(order);
    if got != expected {
        return Err(Error::dims("filter parameter count", expected, got));
    }
    Ok(())
}

/// One filter's parameters, tagged by kind.
#[derive(Clone, Debug, PartialEq)]
pub enum FilterParams {
    Gcnn(GcnnFilterParams),
    Rsn(RsnFilterParams),
    Lssm(LssmFilterParams),
}

impl FilterParams {
    pub fn from_values(kind: FilterKind, order: usize, values: Vec<f64>) -> Result<Self> {
        check_len(kind, order, values.len())?;
        Ok(match kind {
            FilterKind::Gcnn => FilterParams::Gcnn(GcnnFilterParams { taps: values }),
            FilterKind::Rsn => FilterParams::Rsn(RsnFilterParams { order, values }),
            FilterKind::Lssm => FilterParams::Lssm(LssmFilterParams { order, values }),
        })
    }

    pub fn zeros(kind: FilterKind, order: usize) -> Self {
        Self::from_values(kind, order, vec![0.0; kind.param_len(order)])
            .expect("length matches by construction")
    }

    /// Each scalar uniform in `[-1/√(K+1), 1/√(K+1)]`.
    pub fn random(kind: FilterKind, order: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / ((order + 1) as f64).sqrt();
        let values = (0..kind.param_len(order))
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        Self::from_values(kind, order, values).expect("length matches by construction")
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            FilterParams::Gcnn(_) => FilterKind::Gcnn,
            FilterParams::Rsn(_) => FilterKind::Rsn,
            FilterParams::Lssm(_) => FilterKind::Lssm,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            FilterParams::Gcnn(p) => p.order(),
            FilterParams::Rsn(p) => p.order,
            FilterParams::Lssm(p) => p.order,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            FilterParams::Gcnn(p) => &p.taps,
            FilterParams::Rsn(p) => &p.values,
            FilterParams::Lssm(p) => &p.values,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            FilterParams::Gcnn(p) => &mut p.taps,
            FilterParams::Rsn(p) => &mut p.values,
            FilterParams::Lssm(p) => &mut p.values,
        }
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }
}

impl From<GcnnFilterParams> for FilterParams {
    fn from(p: GcnnFilterParams) -> Self {
        FilterParams::Gcnn(p)
    }
}

impl From<RsnFilterParams> for FilterParams {
    fn from(p: RsnFilterParams) -> Self {
        FilterParams::Rsn(p)
    }
}

impl From<LssmFilterParams> for FilterParams {
    fn from(p: LssmFilterParams) -> Self {
        FilterParams::Lssm(p)
    }
}

/// Inner nonlinearities of the nonlinear filters: `state` is σ_w (RSN only), `output` is σ_y.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterActivations {
    pub state: Activation,
    pub output: Activation,
}

impl FilterActivations {
    pub fn new(state: Activation, output: Activation) -> Self {
        FilterActivations { state, output }
    }

    pub fn identity() -> Self {
        Self::new(Activation::Identity, Activation::Identity)
    }
}

/// Gates and memories recorded by an LSSM forward pass. Gate vectors are indexed by
/// `k - 1` for `k = 1..=K`; `memories` holds `c_0..c_K`.
#[derive(Clone, Debug, Default)]
pub struct LssmTrace {
    pub candidates: Vec<RealVector>,
    pub memories: Vec<RealVector>,
    pub forget_gates: Vec<RealVector>,
    pub update_gates: Vec<RealVector>,
    pub state_gates: Vec<RealVector>,
}

/// Intermediate quantities of one filter evaluation.
#[derive(Clone, Debug, Default)]
pub struct FilterTrace {
    /// `w_0..w_K`.
    pub states: Vec<RealVector>,
    /// Instantaneous outputs `y_0..y_K`.
    pub outputs: Vec<RealVector>,
    /// `||w_k||₂` for `k = 0..=K`.
    pub state_norms: Vec<f64>,
    pub lssm: Option<LssmTrace>,
    // `S w_{k-1}` for k = 1..=K
    pub(crate) shifted: Vec<RealVector>,
    // RSN state pre-activations for k = 1..=K
    pub(crate) state_pre: Vec<RealVector>,
    // σ_y pre-activations of the instantaneous outputs, k = 0..=K
    pub(crate) output_pre: Vec<RealVector>,
    // pre-activation of the outer σ_y (the k-sum)
    pub(crate) sum_pre: RealVector,
}

impl FilterTrace {
    pub(crate) fn finish_norms(&mut self) {
        self.state_norms = self.states.iter().map(|w| w.norm2()).collect();
    }

    /// Every value fed to a nonlinearity `kind` during the forward pass. Used by gradient
    /// checks to stay clear of ReLU kinks.
    pub fn preactivations(&self, acts: FilterActivations) -> Vec<(Activation, &[f64])> {
        let mut out = Vec::new();
        for z in &self.state_pre {
            out.push((acts.state, z.as_slice()));
        }
        for a in &self.output_pre {
            out.push((acts.output, a.as_slice()));
        }
        if !self.sum_pre.is_empty() {
            out.push((acts.output, self.sum_pre.as_slice()));
        }
        out
    }
}

/// Gradients of `<upstream, y>` with respect to the filter parameters and input.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterGrad {
    pub params: Vec<f64>,
    pub x: RealVector,
}

pub(crate) fn check_signal(s: &ShiftOperator, x: &[f64]) -> Result<()> {
    if x.len() != s.n() {
        return Err(Error::dims("graph signal length", s.n(), x.len()));
    }
    Ok(())
}

/// Forward pass of any filter kind.
pub fn filter_forward(
    s: &ShiftOperator,
    p: &FilterParams,
    x: &[f64],
    acts: FilterActivations,
) -> Result<(RealVector, FilterTrace)> {
    match p {
        FilterParams::Gcnn(p) => gcnn_filter_recursive(s, p, x),
        FilterParams::Rsn(p) => rsn_filter(s, p, x, acts.state, acts.output),
        FilterParams::Lssm(p) => lssm_filter(s, p, x, acts.output),
    }
}

/// Backward pass through a trace produced by [`filter_forward`] with the same arguments.
pub fn filter_backward(
    s: &ShiftOperator,
    p: &FilterParams,
    x: &[f64],
    trace: &FilterTrace,
    acts: FilterActivations,
    upstream: &[f64],
) -> Result<FilterGrad> {
    check_signal(s, x)?;
    check_signal(s, upstream)?;
    if trace.states.len() != p.order() + 1 || trace.states.iter().any(|w| w.len() != s.n()) {
        return Err(Error::dims("filter trace", p.order() + 1, trace.states.len()));
    }
    Ok(match p {
        FilterParams::Gcnn(p) => gcnn::backward(s, p, trace, upstream),
        FilterParams::Rsn(p) => rsn::backward(s, p, x, trace, acts, upstream),
        FilterParams::Lssm(p) => lssm::backward(s, p, x, trace, acts.output, upstream),
    })
}

/// Vector-Jacobian product `(∂<upstream, y>/∂p, ∂<upstream, y>/∂x)`, recomputing the forward pass.
pub fn filter_vjp(
    s: &ShiftOperator,
    p: &FilterParams,
    x: &[f64],
    acts: FilterActivations,
    upstream: &[f64],
) -> Result<FilterGrad> {
    let (_, trace) = filter_forward(s, p, x, acts)?;
    filter_backward(s, p, x, &trace, acts, upstream)
}
