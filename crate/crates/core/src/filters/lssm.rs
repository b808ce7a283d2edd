use super::{check_signal, FilterGrad, FilterTrace, LssmFilterParams, LssmTrace};
use crate::error::Result;
use crate::graph::ShiftOperator;
use crate::numerics::{dot, sigmoid, Activation, RealVector};

const CW: usize = 0;
const CX: usize = 1;
const FW: usize = 2;
const FX: usize = 3;
const UW: usize = 4;
const UX: usize = 5;
const WW: usize = 6;
const WX: usize = 7;
const YW: usize = 8;
const YX: usize = 9;

/// Long short shift memory filter.
///
/// For `k = 1..K`, with `v = S w_{k-1}`:
///
/// ```text
/// c̃_k = tanh(h_kcw v + h_kcx x)
/// γ_f = sigmoid(h_kfw v + h_kfx x)     forget
/// γ_u = sigmoid(h_kuw v + h_kux x)     update
/// γ_w = sigmoid(h_kww v + h_kwx x)     state
/// c_k = γ_f ∘ c_{k-1} + γ_u ∘ c̃_k
/// w_k = γ_w ∘ tanh(c_k)
/// y_k = σ_y(h_kyw w_k + h_kyx x)
/// ```
///
/// with `w_0 = x`, `c_0 = 0`, `y_0 = σ_y(h_0yw x + h_0yx x)` and `y = σ_y(Σ_{k=0..K} y_k)`.
pub fn lssm_filter(
    s: &ShiftOperator,
    p: &LssmFilterParams,
    x: &[f64],
    output_act: Activation,
) -> Result<(RealVector, FilterTrace)> {
    check_signal(s, x)?;
    let n = x.len();
    let order = p.order();
    let vals = p.values();
    let mut trace = FilterTrace {
        states: Vec::with_capacity(order + 1),
        outputs: Vec::with_capacity(order + 1),
        shifted: Vec::with_capacity(order),
        output_pre: Vec::with_capacity(order + 1),
        ..Default::default()
    };
    let mut mem = LssmTrace {
        candidates: Vec::with_capacity(order),
        memories: Vec::with_capacity(order + 1),
        forget_gates: Vec::with_capacity(order),
        update_gates: Vec::with_capacity(order),
        state_gates: Vec::with_capacity(order),
    };

    let (yw0, yx0) = (vals[YW], vals[YX]);
    let a0: RealVector = x.iter().map(|&xi| yw0 * xi + yx0 * xi).collect();
    let y0: RealVector = a0.iter().map(|&a| output_act.apply(a)).collect();
    let mut sum = y0.clone();
    trace.states.push(RealVector(x.to_vec()));
    trace.output_pre.push(a0);
    trace.outputs.push(y0);
    mem.memories.push(RealVector::zeros(n));

    for k in 1..=order {
        let h = &vals[10 * k..10 * k + 10];
        let mut v = RealVector::zeros(n);
        s.matrix().matvec_into(&trace.states[k - 1], &mut v);

        let mut cand = RealVector::zeros(n);
        let mut gf = RealVector::zeros(n);
        let mut gu = RealVector::zeros(n);
        let mut gw = RealVector::zeros(n);
        let mut c = RealVector::zeros(n);
        let mut w = RealVector::zeros(n);
        let mut a = RealVector::zeros(n);
        let mut y = RealVector::zeros(n);
        let c_prev = &mem.memories[k - 1];
        for i in 0..n {
            let (vi, xi) = (v[i], x[i]);
            cand[i] = (h[CW] * vi + h[CX] * xi).tanh();
            gf[i] = sigmoid(h[FW] * vi + h[FX] * xi);
            gu[i] = sigmoid(h[UW] * vi + h[UX] * xi);
            gw[i] = sigmoid(h[WW] * vi + h[WX] * xi);
            c[i] = gf[i] * c_prev[i] + gu[i] * cand[i];
            w[i] = gw[i] * c[i].tanh();
            a[i] = h[YW] * w[i] + h[YX] * xi;
            y[i] = output_act.apply(a[i]);
            sum[i] += y[i];
        }
        trace.shifted.push(v);
        trace.states.push(w);
        trace.output_pre.push(a);
        trace.outputs.push(y);
        mem.candidates.push(cand);
        mem.forget_gates.push(gf);
        mem.update_gates.push(gu);
        mem.state_gates.push(gw);
        mem.memories.push(c);
    }

    let out = sum.iter().map(|&v| output_act.apply(v)).collect();
    trace.sum_pre = sum;
    trace.lssm = Some(mem);
    trace.finish_norms();
    Ok((out, trace))
}

pub(super) fn backward(
    s: &ShiftOperator,
    p: &LssmFilterParams,
    x: &[f64],
    trace: &FilterTrace,
    output_act: Activation,
    upstream: &[f64],
) -> FilterGrad {
    let n = x.len();
    let order = p.order();
    let vals = p.values();
    let mem = trace
        .lssm
        .as_ref()
        .expect("LSSM backward needs an LSSM trace");
    let mut grad = vec![0.0; vals.len()];
    let mut xbar = RealVector::zeros(n);

    let gsum: Vec<f64> = upstream
        .iter()
        .zip(trace.sum_pre.iter())
        .map(|(&g, &v)| g * output_act.derivative(v))
        .collect();

    let mut wbar: Vec<RealVector> = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let abar: Vec<f64> = gsum
            .iter()
            .zip(trace.output_pre[k].iter())
            .map(|(&g, &a)| g * output_act.derivative(a))
            .collect();
        let b = 10 * k;
        grad[b + YW] += dot(&abar, &trace.states[k]);
        grad[b + YX] += dot(&abar, x);
        xbar.axpy(vals[b + YX], &abar);
        wbar.push(abar.iter().map(|a| vals[b + YW] * a).collect());
    }

    // adjoint of c_k, carried backwards through the forget gate
    let mut cbar = vec![0.0; n];
    let mut zc = vec![0.0; n];
    let mut zf = vec![0.0; n];
    let mut zu = vec![0.0; n];
    let mut zw = vec![0.0; n];
    let mut vbar = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for k in (1..=order).rev() {
        let j = k - 1;
        let h = &vals[10 * k..10 * k + 10];
        let (cand, gf, gu, gw) = (
            &mem.candidates[j],
            &mem.forget_gates[j],
            &mem.update_gates[j],
            &mem.state_gates[j],
        );
        let (c, c_prev) = (&mem.memories[k], &mem.memories[k - 1]);
        for i in 0..n {
            let wb = wbar[k][i];
            let tc = c[i].tanh();
            let gw_bar = wb * tc;
            let cb = cbar[i] + wb * gw[i] * (1.0 - tc * tc);
            let gf_bar = cb * c_prev[i];
            let gu_bar = cb * cand[i];
            let cand_bar = cb * gu[i];
            cbar[i] = cb * gf[i];
            zc[i] = cand_bar * (1.0 - cand[i] * cand[i]);
            zf[i] = gf_bar * gf[i] * (1.0 - gf[i]);
            zu[i] = gu_bar * gu[i] * (1.0 - gu[i]);
            zw[i] = gw_bar * gw[i] * (1.0 - gw[i]);
        }
        let v = &trace.shifted[j];
        let b = 10 * k;
        vbar.iter_mut().for_each(|e| *e = 0.0);
        for (z, w_idx, x_idx) in [(&zc, CW, CX), (&zf, FW, FX), (&zu, UW, UX), (&zw, WW, WX)] {
            grad[b + w_idx] += dot(z, v);
            grad[b + x_idx] += dot(z, x);
            for i in 0..n {
                vbar[i] += h[w_idx] * z[i];
                xbar[i] += h[x_idx] * z[i];
            }
        }
        s.transpose().matvec_into(&vbar, &mut tmp);
        wbar[k - 1].axpy(1.0, &tmp);
    }
    xbar.axpy(1.0, &wbar[0]);
    FilterGrad {
        params: grad,
        x: xbar,
    }
}
