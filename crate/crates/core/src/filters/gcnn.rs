use super::{check_signal, FilterGrad, FilterTrace, GcnnFilterParams};
use crate::error::Result;
use crate::graph::ShiftOperator;
use crate::numerics::{axpy, dot, RealMatrix, RealVector};

/// Linear convolution as the shift recursion `w_0 = x`, `w_k = S w_{k-1}`, `y = Σ_k h_k w_k`.
pub fn gcnn_filter_recursive(
    s: &ShiftOperator,
    p: &GcnnFilterParams,
    x: &[f64],
) -> Result<(RealVector, FilterTrace)> {
    check_signal(s, x)?;
    let n = x.len();
    let taps = p.taps();
    let mut trace = FilterTrace {
        states: Vec::with_capacity(taps.len()),
        outputs: Vec::with_capacity(taps.len()),
        ..Default::default()
    };
    let w0 = RealVector(x.to_vec());
    let mut y = w0.scaled(taps[0]);
    trace.outputs.push(y.clone());
    trace.states.push(w0);
    for &h in &taps[1..] {
        let mut w = RealVector::zeros(n);
        s.matrix().matvec_into(trace.states.last().unwrap(), &mut w);
        y.axpy(h, &w);
        trace.outputs.push(w.scaled(h));
        trace.states.push(w);
    }
    trace.finish_norms();
    Ok((y, trace))
}

/// Linear convolution `Σ_k h_k S^k x` evaluated with explicit dense matrix powers.
pub fn gcnn_filter_direct(s: &ShiftOperator, p: &GcnnFilterParams, x: &[f64]) -> Result<RealVector> {
    check_signal(s, x)?;
    let n = x.len();
    let mut power = RealMatrix::identity(n);
    let mut y = RealVector::zeros(n);
    for (k, &h) in p.taps().iter().enumerate() {
        if k > 0 {
            power = power.matmul(s.matrix())?;
        }
        y.axpy(h, &power.matvec(x)?);
    }
    Ok(y)
}

pub(super) fn backward(
    s: &ShiftOperator,
    p: &GcnnFilterParams,
    trace: &FilterTrace,
    upstream: &[f64],
) -> FilterGrad {
    let taps = p.taps();
    let n = upstream.len();
    let params = trace.states.iter().map(|w| dot(upstream, w)).collect();
    // adjoint recursion: w̄_K = h_K ḡ, w̄_{k-1} = h_{k-1} ḡ + Sᵀ w̄_k
    let mut wbar = RealVector::zeros(n);
    let mut tmp = RealVector::zeros(n);
    for k in (0..taps.len()).rev() {
        if k + 1 < taps.len() {
            s.transpose().matvec_into(&wbar, &mut tmp);
            std::mem::swap(&mut wbar, &mut tmp);
        }
        axpy(taps[k], upstream, &mut wbar);
    }
    FilterGrad { params, x: wbar }
}
