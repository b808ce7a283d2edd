use super::{check_signal, FilterActivations, FilterGrad, FilterTrace, RsnFilterParams};
use crate::error::Result;
use crate::graph::ShiftOperator;
use crate::numerics::{dot, Activation, RealVector};

pub(super) const WW: usize = 0;
pub(super) const WX: usize = 1;
pub(super) const YW: usize = 2;
pub(super) const YX: usize = 3;

/// Offset of the four coefficients of shift `k >= 1`.
#[inline]
pub(super) fn shift_base(k: usize) -> usize {
    debug_assert!(k >= 1);
    2 + 4 * (k - 1)
}

/// Recursive shift network filter.
///
/// ```text
/// w_0 = x,                y_0 = σ_y(h_0yw w_0 + h_0yx x)
/// w_k = σ_w(h_kww S w_{k-1} + h_kwx x)
/// y_k = σ_y(h_kyw w_k + h_kyx x)          k = 1..K
/// y   = σ_y(Σ_{k=0..K} y_k)
/// ```
pub fn rsn_filter(
    s: &ShiftOperator,
    p: &RsnFilterParams,
    x: &[f64],
    state_act: Activation,
    output_act: Activation,
) -> Result<(RealVector, FilterTrace)> {
    check_signal(s, x)?;
    let n = x.len();
    let order = p.order();
    let mut trace = FilterTrace {
        states: Vec::with_capacity(order + 1),
        outputs: Vec::with_capacity(order + 1),
        shifted: Vec::with_capacity(order),
        state_pre: Vec::with_capacity(order),
        output_pre: Vec::with_capacity(order + 1),
        ..Default::default()
    };

    let (yw0, yx0) = p.output0();
    let a0: RealVector = x.iter().map(|&xi| yw0 * xi + yx0 * xi).collect();
    let y0: RealVector = a0.iter().map(|&a| output_act.apply(a)).collect();
    let mut sum = y0.clone();
    trace.states.push(RealVector(x.to_vec()));
    trace.output_pre.push(a0);
    trace.outputs.push(y0);

    let vals = p.values();
    for k in 1..=order {
        let b = shift_base(k);
        let (hww, hwx, hyw, hyx) = (vals[b + WW], vals[b + WX], vals[b + YW], vals[b + YX]);
        let mut sw = RealVector::zeros(n);
        s.matrix().matvec_into(&trace.states[k - 1], &mut sw);
        let z: Vec<f64> = sw.iter().zip(x).map(|(&v, &xi)| hww * v + hwx * xi).collect();
        let w: Vec<f64> = z.iter().map(|&zi| state_act.apply(zi)).collect();
        let a: Vec<f64> = w.iter().zip(x).map(|(&wi, &xi)| hyw * wi + hyx * xi).collect();
        let y: Vec<f64> = a.iter().map(|&ai| output_act.apply(ai)).collect();
        for (acc, yi) in sum.iter_mut().zip(&y) {
            *acc += yi;
        }
        trace.shifted.push(sw);
        trace.state_pre.push(z.into());
        trace.states.push(w.into());
        trace.output_pre.push(a.into());
        trace.outputs.push(y.into());
    }

    let out = sum.iter().map(|&v| output_act.apply(v)).collect();
    trace.sum_pre = sum;
    trace.finish_norms();
    Ok((out, trace))
}

pub(super) fn backward(
    s: &ShiftOperator,
    p: &RsnFilterParams,
    x: &[f64],
    trace: &FilterTrace,
    acts: FilterActivations,
    upstream: &[f64],
) -> FilterGrad {
    let n = x.len();
    let order = p.order();
    let vals = p.values();
    let mut grad = vec![0.0; vals.len()];
    let mut xbar = RealVector::zeros(n);

    // through the outer σ_y
    let gsum: Vec<f64> = upstream
        .iter()
        .zip(trace.sum_pre.iter())
        .map(|(&g, &v)| g * acts.output.derivative(v))
        .collect();

    // adjoints of every instantaneous-output pre-activation; contributions to w̄_k
    let mut wbar: Vec<RealVector> = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let abar: Vec<f64> = gsum
            .iter()
            .zip(trace.output_pre[k].iter())
            .map(|(&g, &a)| g * acts.output.derivative(a))
            .collect();
        let (yw_idx, yx_idx) = if k == 0 {
            (0, 1)
        } else {
            (shift_base(k) + YW, shift_base(k) + YX)
        };
        grad[yw_idx] += dot(&abar, &trace.states[k]);
        grad[yx_idx] += dot(&abar, x);
        xbar.axpy(vals[yx_idx], &abar);
        wbar.push(RealVector(abar.iter().map(|a| vals[yw_idx] * a).collect()));
    }

    let mut tmp = RealVector::zeros(n);
    for k in (1..=order).rev() {
        let b = shift_base(k);
        let zbar: Vec<f64> = wbar[k]
            .iter()
            .zip(trace.state_pre[k - 1].iter())
            .map(|(&g, &z)| g * acts.state.derivative(z))
            .collect();
        grad[b + WW] += dot(&zbar, &trace.shifted[k - 1]);
        grad[b + WX] += dot(&zbar, x);
        xbar.axpy(vals[b + WX], &zbar);
        s.transpose().matvec_into(&zbar, &mut tmp);
        wbar[k - 1].axpy(vals[b + WW], &tmp);
    }
    // w_0 = x
    xbar.axpy(1.0, &wbar[0]);
    FilterGrad {
        params: grad,
        x: xbar,
    }
}
