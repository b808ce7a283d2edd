//! Multi-feature filter-bank layers, layer stacks and the affine readout.
//!
//! A layer maps `F_in` node features to `F_out` through a bank of `F_out × F_in` filters,
//! `x_out^f = σ(Σ_g H^{fg}(S) x_in^g)`, with any [`FilterKind`] in place of `H`. After the last
//! layer the `N × F_L` feature matrix is flattened node-major (`index = node * F_L + feature`)
//! and mapped to `C` logits by a dense affine readout.
//!
//! The flat parameter vector lists, in order: every layer's banks (row-major over `(f, g)`,
//! each filter in its own layout), then the readout weights (row-major `C × N·F_L`), then the
//! readout bias.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{
    filter_backward, filter_forward, FilterActivations, FilterKind, FilterParams, FilterTrace,
};
use crate::graph::ShiftOperator;
use crate::numerics::{axpy, Activation, RealMatrix, RealVector};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub filter_kind: FilterKind,
    pub in_features: usize,
    pub out_features: usize,
    pub order: usize,
    /// σ wrapping the bank sum.
    pub activation: Activation,
    /// σ_w / σ_y inside nonlinear filters; ignored by the linear kind.
    pub filter_activations: FilterActivations,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 || self.out_features == 0 {
            return Err(Error::invalid("layers need at least one input and output feature"));
        }
        if self.filter_kind != FilterKind::Gcnn && self.order == 0 {
            return Err(Error::invalid(format!(
                "{} filters need order >= 1",
                self.filter_kind
            )));
        }
        Ok(())
    }

    pub fn bank_size(&self) -> usize {
        self.in_features * self.out_features
    }

    pub fn param_len(&self) -> usize {
        self.bank_size() * self.filter_kind.param_len(self.order)
    }

    /// Closed-form count `K·F²`, `4K·F²` or `10(K+1)·F²` by kind, with `F² = F_in·F_out`.
    pub fn closed_form_count(&self) -> usize {
        let k = self.order;
        self.bank_size()
            * match self.filter_kind {
                FilterKind::Gcnn => k,
                FilterKind::Rsn => 4 * k,
                FilterKind::Lssm => 10 * (k + 1),
            }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `banks[f * in_features + g]` maps input feature `g` to output feature `f`.
    pub banks: Vec<FilterParams>,
}

impl Layer {
    pub fn random(spec: LayerSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let banks = (0..spec.bank_size())
            .map(|_| FilterParams::random(spec.filter_kind, spec.order, rng))
            .collect();
        Ok(Layer { spec, banks })
    }

    pub fn zeros(spec: LayerSpec) -> Result<Self> {
        spec.validate()?;
        let banks = (0..spec.bank_size())
            .map(|_| FilterParams::zeros(spec.filter_kind, spec.order))
            .collect();
        Ok(Layer { spec, banks })
    }

    pub fn bank(&self, f: usize, g: usize) -> &FilterParams {
        &self.banks[f * self.spec.in_features + g]
    }

    pub fn bank_mut(&mut self, f: usize, g: usize) -> &mut FilterParams {
        &mut self.banks[f * self.spec.in_features + g]
    }
}

/// Intermediates of one layer evaluation.
#[derive(Clone, Debug)]
pub struct LayerCache {
    pub inputs: Vec<RealVector>,
    /// Bank sums before σ, one per output feature.
    pub pre: Vec<RealVector>,
    pub outputs: Vec<RealVector>,
    /// `traces[f * in_features + g]`.
    pub traces: Vec<FilterTrace>,
}

pub fn layer_forward(
    spec: &LayerSpec,
    banks: &[FilterParams],
    s: &ShiftOperator,
    x_in: &[RealVector],
) -> Result<(Vec<RealVector>, LayerCache)> {
    if x_in.len() != spec.in_features {
        return Err(Error::dims("layer input features", spec.in_features, x_in.len()));
    }
    if banks.len() != spec.bank_size() {
        return Err(Error::dims("filter bank size", spec.bank_size(), banks.len()));
    }
    let n = s.n();
    let mut traces = Vec::with_capacity(banks.len());
    let mut pre = Vec::with_capacity(spec.out_features);
    let mut outputs = Vec::with_capacity(spec.out_features);
    for f in 0..spec.out_features {
        let mut acc = RealVector::zeros(n);
        for (g, x) in x_in.iter().enumerate() {
            let bank = &banks[f * spec.in_features + g];
            let (y, trace) = filter_forward(s, bank, x, spec.filter_activations)?;
            axpy(1.0, &y, &mut acc);
            traces.push(trace);
        }
        outputs.push(acc.iter().map(|&v| spec.activation.apply(v)).collect());
        pre.push(acc);
    }
    let cache = LayerCache {
        inputs: x_in.to_vec(),
        pre,
        outputs: outputs.clone(),
        traces,
    };
    Ok((outputs, cache))
}

/// Returns the bank gradients (flat, bank order) and the gradient with respect to the inputs.
pub fn layer_backward(
    layer: &Layer,
    s: &ShiftOperator,
    cache: &LayerCache,
    grad_out: &[RealVector],
) -> Result<(Vec<f64>, Vec<RealVector>)> {
    let spec = &layer.spec;
    if grad_out.len() != spec.out_features || cache.pre.len() != spec.out_features {
        return Err(Error::dims("layer output gradient", spec.out_features, grad_out.len()));
    }
    if cache.inputs.len() != spec.in_features || cache.traces.len() != spec.bank_size() {
        return Err(Error::dims("layer cache", spec.bank_size(), cache.traces.len()));
    }
    let n = s.n();
    let mut grads = Vec::with_capacity(spec.param_len());
    let mut grad_in = vec![RealVector::zeros(n); spec.in_features];
    for f in 0..spec.out_features {
        let upstream: Vec<f64> = grad_out[f]
            .iter()
            .zip(cache.pre[f].iter())
            .map(|(&g, &z)| g * spec.activation.derivative(z))
            .collect();
        for g in 0..spec.in_features {
            let idx = f * spec.in_features + g;
            let fg = filter_backward(
                s,
                &layer.banks[idx],
                &cache.inputs[g],
                &cache.traces[idx],
                spec.filter_activations,
                &upstream,
            )?;
            grads.extend_from_slice(&fg.params);
            grad_in[g].axpy(1.0, &fg.x);
        }
    }
    Ok((grads, grad_in))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    /// `C × (N·F_L)`.
    pub weights: RealMatrix,
    pub bias: RealVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub nodes: usize,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("a model needs at least one layer"));
        }
        if self.nodes == 0 || self.classes == 0 {
            return Err(Error::invalid("node and class counts must be positive"));
        }
        if self.layers[0].in_features != 1 {
            return Err(Error::invalid("the first layer takes a single input feature"));
        }
        for spec in &self.layers {
            spec.validate()?;
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_features != pair[1].in_features {
                return Err(Error::invalid(format!(
                    "layer feature counts do not chain ({} -> {})",
                    pair[0].out_features, pair[1].in_features
                )));
            }
        }
        Ok(())
    }

    /// `L` identical layers with `features` channels each (the first takes one input feature).
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        nodes: usize,
        classes: usize,
        kind: FilterKind,
        layers: usize,
        features: usize,
        order: usize,
        activation: Activation,
        filter_activations: FilterActivations,
    ) -> Self {
        let layers = (0..layers)
            .map(|l| LayerSpec {
                filter_kind: kind,
                in_features: if l == 0 { 1 } else { features },
                out_features: features,
                order,
                activation,
                filter_activations,
            })
            .collect();
        ModelConfig {
            nodes,
            classes,
            layers,
        }
    }

    pub fn output_features(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_features)
    }

    pub fn readout_inputs(&self) -> usize {
        self.nodes * self.output_features()
    }

    pub fn param_len(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_len).sum::<usize>()
            + self.classes * (self.readout_inputs() + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
    readout: Readout,
}

/// Parameter counts: stored scalars vs. the closed-form per-layer counts
/// `K·F²` (linear), `4K·F²` (RSN), `10(K+1)·F²` (LSSM), with `F² = F_in·F_out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub literal: usize,
    pub closed_form: usize,
    pub readout: usize,
}

impl Model {
    /// Filter scalars uniform in `±1/√(K+1)`, readout weights uniform in `±1/√(N·F_L)`,
    /// readout bias zero.
    pub fn random(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layers
            .iter()
            .map(|spec| Layer::random(*spec, rng))
            .collect::<Result<Vec<_>>>()?;
        let fan_in = config.readout_inputs();
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights = RealMatrix::from_fn(config.classes, fan_in, |_, _| {
            rng.uniform_range(-bound, bound)
        });
        let bias = RealVector::zeros(config.classes);
        Ok(Model {
            config,
            layers,
            readout: Readout { weights, bias },
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layers
            .iter()
            .map(|spec| Layer::zeros(*spec))
            .collect::<Result<Vec<_>>>()?;
        let readout = Readout {
            weights: RealMatrix::zeros(config.classes, config.readout_inputs()),
            bias: RealVector::zeros(config.classes),
        };
        Ok(Model {
            config,
            layers,
            readout,
        })
    }

    pub fn from_params(config: ModelConfig, params: &[f64]) -> Result<Self> {
        let mut m = Model::zeros(config)?;
        m.set_params(params)?;
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    pub fn readout_mut(&mut self) -> &mut Readout {
        &mut self.readout
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn nodes(&self) -> usize {
        self.config.nodes
    }

    pub fn param_len(&self) -> usize {
        self.config.param_len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_len());
        for layer in &self.layers {
            for bank in &layer.banks {
                out.extend_from_slice(bank.values());
            }
        }
        out.extend_from_slice(self.readout.weights.data());
        out.extend_from_slice(&self.readout.bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_len() {
            return Err(Error::dims("flat parameter vector", self.param_len(), params.len()));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for bank in &mut layer.banks {
                let len = bank.len();
                bank.values_mut().copy_from_slice(&params[offset..offset + len]);
                offset += len;
            }
        }
        let w_len = self.readout.weights.rows() * self.readout.weights.cols();
        self.readout.weights = RealMatrix::from_row_major(
            self.readout.weights.rows(),
            self.readout.weights.cols(),
            params[offset..offset + w_len].to_vec(),
        )?;
        offset += w_len;
        self.readout.bias = RealVector(params[offset..].to_vec());
        Ok(())
    }

    pub fn param_count(&self) -> ParamCount {
        param_count(&self.config)
    }
}

pub fn param_count(config: &ModelConfig) -> ParamCount {
    ParamCount {
        literal: config.layers.iter().map(LayerSpec::param_len).sum(),
        closed_form: config.layers.iter().map(LayerSpec::closed_form_count).sum(),
        readout: config.classes * (config.readout_inputs() + 1),
    }
}

/// Everything [`model_backward`] needs from the forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
    /// Node-major flattened output of the last layer.
    pub features: RealVector,
}

impl ForwardCache {
    /// Smallest distance to zero of any value fed to a ReLU.
    pub fn min_relu_margin(&self, model: &Model) -> f64 {
        let mut margin = f64::INFINITY;
        let mut visit = |z: &[f64]| {
            for v in z {
                margin = margin.min(v.abs());
            }
        };
        for (layer, cache) in model.layers.iter().zip(&self.layers) {
            if layer.spec.activation == Activation::Relu {
                cache.pre.iter().for_each(|z| visit(z));
            }
            if layer.spec.filter_kind == FilterKind::Gcnn {
                continue;
            }
            for trace in &cache.traces {
                for (act, z) in trace.preactivations(layer.spec.filter_activations) {
                    if act == Activation::Relu {
                        visit(z);
                    }
                }
            }
        }
        margin
    }
}

/// Node features right before the readout, one vector per output feature.
pub fn model_features(m: &Model, s: &ShiftOperator, x: &[f64]) -> Result<Vec<RealVector>> {
    let (_, cache) = model_forward(m, s, x)?;
    Ok(cache.layers.into_iter().last().map(|c| c.outputs).unwrap_or_default())
}

pub fn model_forward(m: &Model, s: &ShiftOperator, x: &[f64]) -> Result<(RealVector, ForwardCache)> {
    let n = m.nodes();
    if x.len() != n || s.n() != n {
        return Err(Error::dims("model input signal", n, x.len()));
    }
    let mut feats = vec![RealVector(x.to_vec())];
    let mut caches = Vec::with_capacity(m.layers.len());
    for layer in &m.layers {
        let (out, cache) = layer_forward(&layer.spec, &layer.banks, s, &feats)?;
        caches.push(cache);
        feats = out;
    }
    let f_out = feats.len();
    let mut flat = RealVector::zeros(n * f_out);
    for (f, feat) in feats.iter().enumerate() {
        for (i, v) in feat.iter().enumerate() {
            flat[i * f_out + f] = *v;
        }
    }
    let w = &m.readout.weights;
    let mut logits = RealVector::zeros(m.classes());
    w.matvec_into(&flat, &mut logits);
    logits.axpy(1.0, &m.readout.bias);
    Ok((
        logits,
        ForwardCache {
            layers: caches,
            features: flat,
        },
    ))
}

/// Exact gradient of `<grad_logits, logits>` with respect to the flat parameter vector.
pub fn model_backward(
    m: &Model,
    s: &ShiftOperator,
    cache: &ForwardCache,
    grad_logits: &[f64],
) -> Result<Vec<f64>> {
    let n = m.nodes();
    let f_out = m.config.output_features();
    if grad_logits.len() != m.classes() {
        return Err(Error::dims("logit gradient", m.classes(), grad_logits.len()));
    }
    if cache.layers.len() != m.layers.len() || cache.features.len() != n * f_out {
        return Err(Error::dims("forward cache (stale?)", n * f_out, cache.features.len()));
    }
    let w = &m.readout.weights;
    let feat_len = w.cols();

    // readout: ∂W = g ⊗ features, ∂b = g, ∂features = Wᵀ g
    let mut w_grad = Vec::with_capacity(w.rows() * feat_len);
    let mut feat_grad = vec![0.0; feat_len];
    for (c, &g) in grad_logits.iter().enumerate() {
        w_grad.extend(cache.features.iter().map(|v| g * v));
        axpy(g, w.row(c), &mut feat_grad);
    }
    let mut grad_out: Vec<RealVector> = (0..f_out)
        .map(|f| (0..n).map(|i| feat_grad[i * f_out + f]).collect())
        .collect();

    let mut layer_grads: Vec<Vec<f64>> = Vec::with_capacity(m.layers.len());
    for (layer, lcache) in m.layers.iter().zip(&cache.layers).rev() {
        let (g, grad_in) = layer_backward(layer, s, lcache, &grad_out)?;
        layer_grads.push(g);
        grad_out = grad_in;
    }
    let mut flat = Vec::with_capacity(m.param_len());
    for g in layer_grads.into_iter().rev() {
        flat.extend(g);
    }
    flat.extend(w_grad);
    flat.extend_from_slice(grad_logits);
    debug_assert_eq!(flat.len(), m.param_len());
    Ok(flat)
}

pub fn model_logits(m: &Model, s: &ShiftOperator, x: &[f64]) -> Result<RealVector> {
    model_forward(m, s, x).map(|(l, _)| l)
}

/// On-disk checkpoint: model configuration, flat parameters and free-form metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn new(model: &Model, meta: serde_json::Value) -> Self {
        Checkpoint {
            config: model.config.clone(),
            params: model.params(),
            meta,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.config.clone(), &self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{gcnn_filter_direct, GcnnFilterParams};
    use crate::graph::{normalize_shift, permute_graph, permute_vector, sbm_generate};

    fn shift(n: usize, seed: u64) -> (crate::graph::Graph, ShiftOperator) {
        let g = sbm_generate(n, 2, 0.8, 0.3, &mut Rng::new(seed)).unwrap();
        let s = normalize_shift(&g).unwrap();
        (g, s)
    }

    fn random_signal(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()
    }

    fn gcnn_spec(fin: usize, fout: usize, order: usize, act: Activation) -> LayerSpec {
        LayerSpec {
            filter_kind: FilterKind::Gcnn,
            in_features: fin,
            out_features: fout,
            order,
            activation: act,
            filter_activations: FilterActivations::identity(),
        }
    }

    #[test]
    fn single_bank_layer_is_a_convolution() {
        let (_, s) = shift(10, 1);
        let mut rng = Rng::new(2);
        let spec = gcnn_spec(1, 1, 3, Activation::Identity);
        let layer = Layer::random(spec, &mut rng).unwrap();
        let x = RealVector(random_signal(&mut rng, 10));
        let (out, _) = layer_forward(&spec, &layer.banks, &s, std::slice::from_ref(&x)).unwrap();
        let FilterParams::Gcnn(p) = &layer.banks[0] else { unreachable!() };
        let direct = gcnn_filter_direct(&s, p, &x).unwrap();
        for i in 0..10 {
            assert!((out[0][i] - direct[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_banks_with_relu() {
        let (_, s) = shift(10, 3);
        for kind in FilterKind::ALL {
            let spec = LayerSpec {
                filter_kind: kind,
                in_features: 2,
                out_features: 3,
                order: 2,
                activation: Activation::Relu,
                filter_activations: FilterActivations::new(Activation::Tanh, Activation::Identity),
            };
            let layer = Layer::zeros(spec).unwrap();
            let mut rng = Rng::new(4);
            let x = vec![
                RealVector(random_signal(&mut rng, 10)),
                RealVector(random_signal(&mut rng, 10)),
            ];
            let (out, _) = layer_forward(&spec, &layer.banks, &s, &x).unwrap();
            assert!(out.iter().all(|f| f.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn two_input_superposition() {
        let (_, s) = shift(10, 5);
        let mut rng = Rng::new(6);
        let spec = gcnn_spec(2, 1, 3, Activation::Identity);
        let layer = Layer::random(spec, &mut rng).unwrap();
        let x1 = RealVector(random_signal(&mut rng, 10));
        let x2 = RealVector(random_signal(&mut rng, 10));
        let (out, _) = layer_forward(&spec, &layer.banks, &s, &[x1.clone(), x2.clone()]).unwrap();
        let FilterParams::Gcnn(h1) = layer.bank(0, 0) else { unreachable!() };
        let FilterParams::Gcnn(h2) = layer.bank(0, 1) else { unreachable!() };
        let y1 = gcnn_filter_direct(&s, h1, &x1).unwrap();
        let y2 = gcnn_filter_direct(&s, h2, &x2).unwrap();
        for i in 0..10 {
            assert!((out[0][i] - (y1[i] + y2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_layer_superposition_in_inputs() {
        let (_, s) = shift(10, 7);
        let mut rng = Rng::new(8);
        let spec = gcnn_spec(2, 3, 4, Activation::Identity);
        let layer = Layer::random(spec, &mut rng).unwrap();
        let u: Vec<RealVector> = (0..2).map(|_| RealVector(random_signal(&mut rng, 10))).collect();
        let v: Vec<RealVector> = (0..2).map(|_| RealVector(random_signal(&mut rng, 10))).collect();
        let (a, b) = (0.7, -1.3);
        let comb: Vec<RealVector> = u
            .iter()
            .zip(&v)
            .map(|(p, q)| p.iter().zip(q.iter()).map(|(x, y)| a * x + b * y).collect())
            .collect();
        let (yu, _) = layer_forward(&spec, &layer.banks, &s, &u).unwrap();
        let (yv, _) = layer_forward(&spec, &layer.banks, &s, &v).unwrap();
        let (yc, _) = layer_forward(&spec, &layer.banks, &s, &comb).unwrap();
        for f in 0..3 {
            for i in 0..10 {
                assert!((yc[f][i] - (a * yu[f][i] + b * yv[f][i])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_readout_gives_zero_logits() {
        let (_, s) = shift(10, 9);
        let cfg = ModelConfig::uniform(
            10,
            5,
            FilterKind::Rsn,
            1,
            2,
            2,
            Activation::Relu,
            FilterActivations::new(Activation::Relu, Activation::Relu),
        );
        let mut m = Model::random(cfg, &mut Rng::new(1)).unwrap();
        let r = m.readout_mut();
        r.weights = RealMatrix::zeros(5, 20);
        let x = random_signal(&mut Rng::new(2), 10);
        let logits = model_logits(&m, &s, &x).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn plumbing_identity_model() {
        let (_, s) = shift(6, 11);
        let cfg = ModelConfig {
            nodes: 6,
            classes: 3,
            layers: vec![gcnn_spec(1, 1, 0, Activation::Identity)],
        };
        let mut m = Model::zeros(cfg).unwrap();
        m.layers_mut()[0].banks[0] = GcnnFilterParams::new(vec![1.0]).unwrap().into();
        // select nodes 4, 0, 2
        m.readout_mut().weights =
            RealMatrix::from_fn(3, 6, |c, j| if [4, 0, 2][c] == j { 1.0 } else { 0.0 });
        let x = random_signal(&mut Rng::new(3), 6);
        let logits = model_logits(&m, &s, &x).unwrap();
        assert_eq!(logits.0, vec![x[4], x[0], x[2]]);
    }

    #[test]
    fn logits_match_composition_oracle() {
        let (_, s) = shift(10, 13);
        let cfg = ModelConfig::uniform(
            10,
            4,
            FilterKind::Gcnn,
            1,
            2,
            2,
            Activation::Tanh,
            FilterActivations::identity(),
        );
        let m = Model::random(cfg, &mut Rng::new(14)).unwrap();
        let x = random_signal(&mut Rng::new(15), 10);
        let logits = model_logits(&m, &s, &x).unwrap();
        // independent composition: direct filters, tanh, node-major flatten, affine map
        let layer = &m.layers()[0];
        let mut feats = vec![vec![0.0; 10]; 2];
        for (f, feat) in feats.iter_mut().enumerate() {
            let FilterParams::Gcnn(h) = layer.bank(f, 0) else { unreachable!() };
            let y = gcnn_filter_direct(&s, h, &x).unwrap();
            for i in 0..10 {
                feat[i] = y[i].tanh();
            }
        }
        let w = &m.readout().weights;
        for c in 0..4 {
            let mut acc = m.readout().bias[c];
            for i in 0..10 {
                for f in 0..2 {
                    acc += w.get(c, i * 2 + f) * feats[f][i];
                }
            }
            assert!((logits[c] - acc).abs() < 1e-12);
        }
    }

    fn two_layer(kind: FilterKind, seed: u64) -> Model {
        let cfg = ModelConfig::uniform(
            8,
            3,
            kind,
            2,
            2,
            2,
            Activation::Tanh,
            FilterActivations::new(Activation::Tanh, Activation::Tanh),
        );
        Model::random(cfg, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn zero_logit_gradient_gives_zero_parameter_gradient() {
        let (_, s) = shift(8, 16);
        for kind in FilterKind::ALL {
            let m = two_layer(kind, 1);
            let x = random_signal(&mut Rng::new(2), 8);
            let (_, cache) = model_forward(&m, &s, &x).unwrap();
            let g = model_backward(&m, &s, &cache, &[0.0; 3]).unwrap();
            assert_eq!(g.len(), m.param_len());
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn readout_gradient_is_outer_product() {
        let (_, s) = shift(8, 17);
        let m = two_layer(FilterKind::Lssm, 3);
        let x = random_signal(&mut Rng::new(4), 8);
        let (_, cache) = model_forward(&m, &s, &x).unwrap();
        let gl = [0.3, -1.2, 0.5];
        let g = model_backward(&m, &s, &cache, &gl).unwrap();
        let start = m.param_len() - 3 - 3 * 16;
        for c in 0..3 {
            for j in 0..16 {
                assert_eq!(g[start + c * 16 + j], gl[c] * cache.features[j]);
            }
        }
        assert_eq!(&g[m.param_len() - 3..], &gl);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let (_, s) = shift(8, 18);
        let one = Model::random(
            ModelConfig::uniform(
                8,
                3,
                FilterKind::Gcnn,
                1,
                2,
                2,
                Activation::Relu,
                FilterActivations::identity(),
            ),
            &mut Rng::new(1),
        )
        .unwrap();
        let two = two_layer(FilterKind::Gcnn, 2);
        let x = random_signal(&mut Rng::new(3), 8);
        let (_, cache) = model_forward(&one, &s, &x).unwrap();
        assert!(model_backward(&two, &s, &cache, &[1.0, 0.0, 0.0]).is_err());
        assert!(model_backward(&one, &s, &cache, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        for kind in FilterKind::ALL {
            let mut m = two_layer(kind, 5);
            let mut rng = Rng::new(6);
            let v: Vec<f64> = (0..m.param_len()).map(|_| rng.uniform_range(-9.0, 9.0)).collect();
            m.set_params(&v).unwrap();
            let back = m.params();
            assert_eq!(
                back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
            assert!(m.set_params(&v[1..]).is_err());
        }
    }

    #[test]
    fn closed_form_parameter_counts() {
        let count = |kind| {
            param_count(&ModelConfig {
                nodes: 50,
                classes: 5,
                layers: vec![LayerSpec {
                    filter_kind: kind,
                    in_features: 4,
                    out_features: 4,
                    order: 4,
                    activation: Activation::Relu,
                    filter_activations: FilterActivations::identity(),
                }],
            })
        };
        let g = count(FilterKind::Gcnn);
        assert_eq!((g.closed_form, g.literal), (64, 80));
        let r = count(FilterKind::Rsn);
        assert_eq!((r.closed_form, r.literal), (256, 16 * 18));
        let l = count(FilterKind::Lssm);
        assert_eq!((l.closed_form, l.literal), (800, 800));
        assert_eq!(l.readout, 5 * 201);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ModelConfig::uniform(
            8,
            3,
            FilterKind::Rsn,
            2,
            2,
            0,
            Activation::Relu,
            FilterActivations::identity(),
        );
        assert!(cfg.validate().is_err());
        cfg.layers[0].order = 2;
        cfg.layers[1].order = 2;
        cfg.layers[1].in_features = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pre_readout_features_are_equivariant() {
        let (g, s) = shift(8, 19);
        for kind in FilterKind::ALL {
            let m = two_layer(kind, 7);
            let mut rng = Rng::new(8);
            let perm = rng.permutation(8);
            let sp = normalize_shift(&permute_graph(&g, &perm).unwrap()).unwrap();
            let x = random_signal(&mut rng, 8);
            let xp = permute_vector(&x, &perm).unwrap();
            let f = model_features(&m, &s, &x).unwrap();
            let fp = model_features(&m, &sp, &xp).unwrap();
            for (a, b) in f.iter().zip(&fp) {
                let pa = permute_vector(a, &perm).unwrap();
                for i in 0..8 {
                    assert!((pa[i] - b[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = two_layer(FilterKind::Rsn, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        Checkpoint::new(&m, serde_json::json!({"seed": 9})).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().model().unwrap();
        assert_eq!(back, m);
    }
}
