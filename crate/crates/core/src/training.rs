//! Cross-entropy loss, ADAM, the deterministic mini-batch trainer and the
//! finite-difference gradient oracle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::filters::{FilterActivations, FilterKind};
use crate::graph::ShiftOperator;
use crate::models::{model_backward, model_forward, Model, ModelConfig};
use crate::numerics::{Activation, RealMatrix, RealVector};
use crate::rng::{Rng, Stage};

/// Denominator floor of [`rel_error`], equal to the default finite-difference step.
///
/// Central differences with step `h` carry a round-off error of about `ε_mach·|L| / h`
/// (≈ 1e-11 at `h = 1e-5`), so coordinates much smaller than `h` cannot be resolved to a
/// relative 1e-5; below the floor the comparison is effectively absolute.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

/// `|a − b| / max(|a|, |b|, REL_ERROR_FLOOR)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

pub fn softmax(logits: &[f64]) -> RealVector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: RealVector = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// `−log softmax(logits)[label]` and its gradient `softmax(logits) − onehot(label)`.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, RealVector) {
    assert!(label < logits.len(), "label {label} out of range");
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let loss = log_total - (logits[label] - max);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |b: f64| b > 0.0 && b < 1.0;
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(Error::invalid(format!(
                "ADAM betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("ADAM epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        OptimizerState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected ADAM update, applied in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::dims("ADAM gradient", params.len(), grads.len()));
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::dims("ADAM state", params.len(), state.m.len()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch; for epoch 0, the untrained loss on the training split.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Outcome of [`train`]. Epoch 0 is the untrained model.
///
/// `wall_clock_seconds` is not serialized so that reports of identical runs are identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_accuracy"])?;
        for e in &self.epochs {
            w.serialize((e.epoch, e.train_loss, e.val_accuracy))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub count: usize,
}

impl Evaluation {
    pub fn write_confusion_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let classes = self.confusion.len();
        let mut header = vec!["true".to_string()];
        header.extend((0..classes).map(|c| format!("pred_{c}")));
        w.write_record(&header)?;
        for (c, row) in self.confusion.iter().enumerate() {
            let mut rec = vec![c.to_string()];
            rec.extend(row.iter().map(usize::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_compatible(model: &Model, s: &ShiftOperator, ds: &Dataset) -> Result<()> {
    if ds.n != model.nodes() {
        return Err(Error::dims("dataset node count", model.nodes(), ds.n));
    }
    if s.n() != model.nodes() {
        return Err(Error::dims("shift operator", model.nodes(), s.n()));
    }
    if ds.classes != model.classes() {
        return Err(Error::dims("dataset class count", model.classes(), ds.classes));
    }
    Ok(())
}

/// Accuracy, mean loss and confusion counts of `model` on the given indices.
pub fn evaluate_indices(
    model: &Model,
    s: &ShiftOperator,
    ds: &Dataset,
    indices: &[usize],
) -> Result<Evaluation> {
    check_compatible(model, s, ds)?;
    let classes = model.classes();
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for &i in indices {
        let sample = &ds.samples[i];
        let (logits, _) = model_forward(model, s, &sample.signal)?;
        let pred = argmax(&logits);
        confusion[sample.label][pred] += 1;
        if pred == sample.label {
            correct += 1;
        }
        loss += cross_entropy(&logits, sample.label).0;
    }
    let count = indices.len();
    let denom = count.max(1) as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / denom,
        mean_loss: loss / denom,
        confusion,
        count,
    })
}

pub fn evaluate(model: &Model, s: &ShiftOperator, ds: &Dataset, split: Split) -> Result<Evaluation> {
    evaluate_indices(model, s, ds, ds.split(split))
}

/// Mean cross-entropy and its gradient over `batch`, reduced in ascending sample-index order.
pub fn batch_gradient(
    model: &Model,
    s: &ShiftOperator,
    ds: &Dataset,
    batch: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut order = batch.to_vec();
    order.sort_unstable();
    let mut grad = vec![0.0; model.param_len()];
    let mut loss = 0.0;
    for &i in &order {
        let sample = &ds.samples[i];
        let (logits, cache) = model_forward(model, s, &sample.signal)?;
        let (l, gl) = cross_entropy(&logits, sample.label);
        let g = model_backward(model, s, &cache, &gl)?;
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let scale = 1.0 / order.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Mini-batch ADAM on the training split.
///
/// The training indices are reshuffled every epoch from the shuffle stream of `cfg.seed`;
/// the last batch keeps its natural size. After every epoch the validation accuracy is
/// measured and the parameters with the best one (later epochs win ties, epoch 0 included)
/// are restored into `model` at the end.
pub fn train(
    model: &mut Model,
    s: &ShiftOperator,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_compatible(model, s, ds)?;
    if ds.splits.train.is_empty() {
        return Err(Error::invalid("the training split is empty"));
    }
    let start = Instant::now();
    let mut rng = Rng::for_stage(cfg.seed, Stage::Shuffle);
    let mut params = model.params();
    let mut state = OptimizerState::new(params.len());

    let initial_loss = evaluate(model, s, ds, Split::Train)?.mean_loss;
    let initial_val = evaluate(model, s, ds, Split::Val)?.accuracy;
    let mut epochs = vec![EpochRecord {
        epoch: 0,
        train_loss: initial_loss,
        val_accuracy: initial_val,
    }];
    let mut best = (0usize, initial_val, params.clone());

    let mut order = ds.splits.train.clone();
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grad) = batch_gradient(model, s, ds, batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericalAbort(format!(
                    "non-finite loss ({loss}) at epoch {epoch}, batch {b}; the state recursion \
                     may be exploding (shift spectral radius {:.6}) or the learning rate {} \
                     is too large",
                    s.spectral_radius_estimate(),
                    cfg.learning_rate
                )));
            }
            adam_step(&mut params, &grad, &mut state, cfg)?;
            model.set_params(&params)?;
            loss_sum += loss;
            batches += 1;
        }
        let val = evaluate(model, s, ds, Split::Val)?.accuracy;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_accuracy: val,
        });
        if val >= best.1 {
            best = (epoch, val, params.clone());
        }
    }

    model.set_params(&best.2)?;
    let test_accuracy = evaluate(model, s, ds, Split::Test)?.accuracy;
    Ok(TrainReport {
        config: *cfg,
        epochs,
        best_epoch: best.0,
        best_val_accuracy: best.1,
        test_accuracy,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Central differences `(f(p + h e_i) − f(p − h e_i)) / 2h`, one coordinate at a time.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], step: f64) -> Vec<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let plus = f(&p);
            p[i] = orig - step;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Gradient of the single-sample cross-entropy with respect to the flat parameters.
pub type GradientFn<'a> = dyn Fn(&Model, &ShiftOperator, &[f64], usize) -> Result<Vec<f64>> + 'a;

/// Reverse-mode gradient of the single-sample cross-entropy.
pub fn loss_gradient(model: &Model, s: &ShiftOperator, x: &[f64], label: usize) -> Result<Vec<f64>> {
    let (logits, cache) = model_forward(model, s, x)?;
    let (_, gl) = cross_entropy(&logits, label);
    model_backward(model, s, &cache, &gl)
}

/// Configuration of the finite-difference gradient suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub kinds: Vec<FilterKind>,
    pub nodes: usize,
    pub classes: usize,
    pub layers: Vec<usize>,
    pub orders: Vec<usize>,
    pub features: usize,
    /// Random instances per (kind, layers, order) combination.
    pub instances: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Instances whose ReLU inputs come closer than this to zero are redrawn.
    pub kink_margin: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            kinds: FilterKind::ALL.to_vec(),
            nodes: 8,
            classes: 3,
            layers: vec![1, 2],
            orders: vec![2, 3],
            features: 2,
            instances: 5,
            step: 1e-5,
            tolerance: 1e-5,
            kink_margin: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub kind: FilterKind,
    pub layers: usize,
    pub order: usize,
    pub activation: Activation,
    pub worst_rel_error: f64,
    pub worst_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub cases: Vec<GradcheckCase>,
    pub worst_rel_error: f64,
    pub redrawn: usize,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn worst_for(&self, kind: FilterKind) -> f64 {
        self.cases
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.worst_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn cases_for(&self, kind: FilterKind) -> usize {
        self.cases.iter().filter(|c| c.kind == kind).count()
    }
}

/// Dense symmetric random shift scaled to spectral radius at most about one.
fn gradcheck_shift(n: usize, rng: &mut Rng) -> Result<ShiftOperator> {
    let mut m = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.uniform_range(-1.0, 1.0) / (n as f64).sqrt();
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    ShiftOperator::unnormalized(m)
}

/// Compare `gradient` against central finite differences of the cross-entropy on random
/// small models. Instances alternate between a smooth (tanh) and a ReLU configuration;
/// ReLU instances too close to a kink are redrawn.
pub fn run_gradcheck(cfg: &GradcheckConfig, gradient: &GradientFn) -> Result<GradcheckReport> {
    let mut rng = Rng::for_stage(cfg.seed, Stage::Init);
    let mut cases = Vec::new();
    let mut redrawn = 0;
    for &kind in &cfg.kinds {
        for &layers in &cfg.layers {
            for &order in &cfg.orders {
                for inst in 0..cfg.instances {
                    let activation = if inst % 2 == 0 {
                        Activation::Tanh
                    } else {
                        Activation::Relu
                    };
                    let case = loop {
                        let acts = FilterActivations::new(activation, activation);
                        let mcfg = ModelConfig::uniform(
                            cfg.nodes,
                            cfg.classes,
                            kind,
                            layers,
                            cfg.features,
                            order,
                            activation,
                            acts,
                        );
                        let model = Model::random(mcfg, &mut rng)?;
                        let s = gradcheck_shift(cfg.nodes, &mut rng)?;
                        let x: Vec<f64> =
                            (0..cfg.nodes).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                        let label = rng.index(cfg.classes);
                        let (_, cache) = model_forward(&model, &s, &x)?;
                        if cache.min_relu_margin(&model) < cfg.kink_margin {
                            redrawn += 1;
                            continue;
                        }
                        let analytic = gradient(&model, &s, &x, label)?;
                        let params = model.params();
                        let mut probe = model.clone();
                        let numeric = finite_diff_grad(
                            |p| {
                                probe.set_params(p).expect("same length");
                                let (logits, _) =
                                    model_forward(&probe, &s, &x).expect("valid shapes");
                                cross_entropy(&logits, label).0
                            },
                            &params,
                            cfg.step,
                        );
                        let (worst_index, worst) = analytic
                            .iter()
                            .zip(&numeric)
                            .map(|(a, b)| rel_error(*a, *b))
                            .enumerate()
                            .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
                        break GradcheckCase {
                            kind,
                            layers,
                            order,
                            activation,
                            worst_rel_error: worst,
                            worst_index,
                        };
                    };
                    cases.push(case);
                }
            }
        }
    }
    let worst = cases.iter().map(|c| c.worst_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        config: cfg.clone(),
        cases,
        worst_rel_error: worst,
        redrawn,
        passed: worst < cfg.tolerance,
    })
}
