use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::DatasetRow;
use crate::error::{Error, Result};

/// Version written into serialized models.
pub const FORMAT_VERSION: u32 = 1;

/// Which column of a dataset row a network learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    FinalVoltage,
    AveragePower,
}

impl Target {
    pub fn of(self, row: &DatasetRow) -> f64 {
        match self {
            Target::FinalVoltage => row.v_final,
            Target::AveragePower => row.p_avg,
        }
    }
}

/// Feed-forward network with ReLU hidden layers and a sigmoid output scaled
/// to `[0, output_scale]`. Inputs are `(v, r_E)`, shifted and scaled per
/// feature before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format_version: u32,
    pub target: Target,
    /// Input width first, output width last.
    pub layer_widths: Vec<usize>,
    /// Row-major `out × in` matrix per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub output_scale: f64,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// Per-feature range of the training inputs.
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Upper end of the output range; `None` uses 1.25 times the largest
    /// training target.
    pub output_scale: Option<f64>,
    /// Denominator floor of the percentage error, in the target's unit.
    pub mape_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 5,
            hidden_width: 15,
            epochs: 300,
            batch_size: 32,
            learning_rate: 3e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            output_scale: None,
            mape_floor: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config { field: format!("train.{field}"), reason: reason.into() })
        };
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return bad("hidden_layers", "need at least one hidden layer of nonzero width");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be finite and > 0");
        }
        if !(self.adam_beta1 > 0.0 && self.adam_beta1 < 1.0) {
            return bad("adam_beta1", "must lie in (0, 1)");
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            return bad("adam_beta2", "must lie in (0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon", "must be > 0");
        }
        if let Some(s) = self.output_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad("output_scale", "must be finite and > 0");
            }
        }
        if !(self.mape_floor > 0.0) {
            return bad("mape_floor", "must be > 0");
        }
        Ok(())
    }
}

/// Percentage errors are fractions: 0.1 means 10 %.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_mape: f64,
    pub validation_mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_validation_mape: f64,
}

impl TrainReport {
    /// Validation error of each successive improvement.
    pub fn best_sequence(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for e in &self.epochs {
            if out.last().is_none_or(|b| e.validation_mape < *b) {
                out.push(e.validation_mape);
            }
        }
        out
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    pub fn predict(&self, v: f64, r_e: f64) -> f64 {
        self.predict_features(&[v, r_e])
    }

    pub fn predict_features(&self, input: &[f64]) -> f64 {
        let mut a: Vec<f64> = input
            .iter()
            .zip(self.input_mean.iter().zip(&self.input_scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let n_in = a.len();
            let mut z: Vec<f64> = b.clone();
            for (o, zo) in z.iter_mut().enumerate() {
                *zo += w[o * n_in..(o + 1) * n_in].iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        (self.output_scale * sigmoid(a[0])).clamp(0.0, self.output_scale)
    }

    /// Bound on `|Δ output| / max_j |Δ input_j|` from the infinity norms of
    /// the weight matrices.
    pub fn lipschitz_bound(&self) -> f64 {
        let mut bound = self.output_scale * 0.25;
        for (l, w) in self.weights.iter().enumerate() {
            let n_in = self.layer_widths[l];
            let rows = w.chunks(n_in).map(|r| {
                if l == 0 {
                    r.iter().zip(&self.input_scale).map(|(v, s)| v.abs() / s).sum::<f64>()
                } else {
                    r.iter().map(|v| v.abs()).sum::<f64>()
                }
            });
            bound *= rows.fold(0.0, f64::max);
        }
        bound
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Config { field: "model".into(), reason });
        if self.format_version != FORMAT_VERSION {
            return bad(format!("format version {} is not supported (expected {FORMAT_VERSION})", self.format_version));
        }
        let w = &self.layer_widths;
        if w.len() < 2 || w[0] != 2 || *w.last().unwrap() != 1 {
            return bad(format!("layer widths {w:?} must run from 2 inputs to 1 output"));
        }
        if self.weights.len() != w.len() - 1 || self.biases.len() != w.len() - 1 {
            return bad("layer count does not match the widths".into());
        }
        for l in 0..w.len() - 1 {
            if self.weights[l].len() != w[l] * w[l + 1] || self.biases[l].len() != w[l + 1] {
                return bad(format!("layer {l} shape does not match widths {} -> {}", w[l], w[l + 1]));
            }
        }
        if self.input_mean.len() != 2 || self.input_scale.len() != 2 || self.input_scale.iter().any(|s| !(*s > 0.0)) {
            return bad("input normalization must hold two features with positive scales".into());
        }
        if self.input_min.len() != 2 || self.input_max.len() != 2 {
            return bad("input range must hold two features".into());
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return bad("output_scale must be finite and > 0".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Mean absolute percentage error of `model` on `rows`.
pub fn mape(model: &MlpModel, rows: &[DatasetRow], floor: f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter()
        .map(|r| {
            let t = model.target.of(r);
            (model.predict(r.v_init, r.r_e) - t).abs() / t.abs().max(floor)
        })
        .sum::<f64>()
        / rows.len() as f64
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(shapes: &[Vec<f64>]) -> Self {
        Self {
            m: shapes.iter().map(|s| vec![0.0; s.len()]).collect(),
            v: shapes.iter().map(|s| vec![0.0; s.len()]).collect(),
            step: 0,
        }
    }
}

/// Parameters laid out as `[W0, b0, W1, b1, ...]`.
fn params_of(model: &MlpModel) -> Vec<Vec<f64>> {
    model.weights.iter().zip(&model.biases).flat_map(|(w, b)| [w.clone(), b.clone()]).collect()
}

fn set_params(model: &mut MlpModel, params: &[Vec<f64>]) {
    for (l, pair) in params.chunks(2).enumerate() {
        model.weights[l].clone_from(&pair[0]);
        model.biases[l].clone_from(&pair[1]);
    }
}

/// Adds the gradient of `|y − t| / den` for one sample into `grads`.
fn accumulate(model: &MlpModel, input: &[f64; 2], target: f64, den: f64, weight: f64, grads: &mut [Vec<f64>]) -> f64 {
    let layers = model.weights.len();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
    acts.push(
        input
            .iter()
            .zip(model.input_mean.iter().zip(&model.input_scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect(),
    );
    for l in 0..layers {
        let a = &acts[l];
        let n_in = a.len();
        let w = &model.weights[l];
        let mut z = model.biases[l].clone();
        for (o, zo) in z.iter_mut().enumerate() {
            *zo += w[o * n_in..(o + 1) * n_in].iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
        }
        if l + 1 < layers {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        acts.push(z);
    }
    let zl = acts[layers][0];
    let s = sigmoid(zl);
    let y = model.output_scale * s;
    let err = y - target;
    let loss = err.abs() / den;
    let dy = if err > 0.0 {
        weight / den
    } else if err < 0.0 {
        -weight / den
    } else {
        0.0
    };
    let mut delta = vec![dy * model.output_scale * s * (1.0 - s)];
    for l in (0..layers).rev() {
        let a = &acts[l];
        let n_in = a.len();
        {
            let (gw, rest) = grads[2 * l..].split_at_mut(1);
            let gw = &mut gw[0];
            let gb = &mut rest[0];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, ai) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(a) {
                    *g += d * ai;
                }
            }
        }
        if l == 0 {
            break;
        }
        let w = &model.weights[l];
        let mut prev = vec![0.0; n_in];
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                *p += d * wi;
            }
        }
        // ReLU derivative: the stored activation is zero where inactive
        for (p, ai) in prev.iter_mut().zip(a) {
            if *ai <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    loss
}

fn mean_and_scale(rows: &[DatasetRow], f: impl Fn(&DatasetRow) -> f64) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(&f).sum::<f64>() / n;
    let var = rows.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

/// Trains one network and keeps the weights of the epoch with the lowest
/// validation error (training error when `validation` is empty).
pub fn train(
    train_rows: &[DatasetRow],
    validation: &[DatasetRow],
    target: Target,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if train_rows.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    let targets: Vec<f64> = train_rows.iter().map(|r| target.of(r)).collect();
    if targets.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Domain("training targets must be finite and >= 0".into()));
    }
    let top = targets.iter().copied().fold(0.0, f64::max);
    let output_scale = match cfg.output_scale {
        Some(s) => s,
        None if top > 0.0 => 1.25 * top,
        None => 1.0,
    };
    let (mv, sv) = mean_and_scale(train_rows, |r| r.v_init);
    let (mr, sr) = mean_and_scale(train_rows, |r| r.r_e);

    let mut widths = vec![2];
    widths.extend(std::iter::repeat_n(cfg.hidden_width, cfg.hidden_layers));
    widths.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..widths.len() - 1 {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        // He initialization for ReLU layers, Glorot for the output
        let limit = if l + 2 < widths.len() {
            (6.0 / n_in as f64).sqrt()
        } else {
            (6.0 / (n_in + n_out) as f64).sqrt()
        };
        weights.push((0..n_in * n_out).map(|_| rng.random_range(-limit..limit)).collect());
        biases.push(vec![0.0; n_out]);
    }
    let mean_target = targets.iter().sum::<f64>() / targets.len() as f64;
    let frac = (mean_target / output_scale).clamp(1e-6, 1.0 - 1e-6);
    *biases.last_mut().unwrap() = vec![(frac / (1.0 - frac)).ln()];

    let mut model = MlpModel {
        format_version: FORMAT_VERSION,
        target,
        layer_widths: widths,
        weights,
        biases,
        output_scale,
        input_mean: vec![mv, mr],
        input_scale: vec![sv, sr],
        input_min: vec![
            train_rows.iter().map(|r| r.v_init).fold(f64::INFINITY, f64::min),
            train_rows.iter().map(|r| r.r_e).fold(f64::INFINITY, f64::min),
        ],
        input_max: vec![
            train_rows.iter().map(|r| r.v_init).fold(f64::NEG_INFINITY, f64::max),
            train_rows.iter().map(|r| r.r_e).fold(f64::NEG_INFINITY, f64::max),
        ],
    };

    let mut params = params_of(&model);
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..train_rows.len()).collect();
    let mut best: Option<(usize, f64, Vec<Vec<f64>>)> = None;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
            let weight = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                let r = &train_rows[i];
                let t = targets[i];
                loss += accumulate(&model, &[r.v_init, r.r_e], t, t.abs().max(cfg.mape_floor), weight, &mut grads);
            }
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Training { epoch, reason: "loss or gradient is not finite".into() });
            }
            adam.step += 1;
            let c1 = 1.0 - cfg.adam_beta1.powi(adam.step);
            let c2 = 1.0 - cfg.adam_beta2.powi(adam.step);
            for ((p, g), (m, v)) in params.iter_mut().zip(&grads).zip(adam.m.iter_mut().zip(adam.v.iter_mut())) {
                for j in 0..p.len() {
                    m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g[j];
                    v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g[j] * g[j];
                    p[j] -= cfg.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + cfg.adam_epsilon);
                }
            }
            set_params(&mut model, &params);
        }
        let train_mape = mape(&model, train_rows, cfg.mape_floor);
        if !train_mape.is_finite() {
            return Err(Error::Training { epoch, reason: "training error is not finite".into() });
        }
        let validation_mape = if validation.is_empty() { train_mape } else { mape(&model, validation, cfg.mape_floor) };
        epochs.push(EpochReport { epoch, train_mape, validation_mape });
        if best.as_ref().is_none_or(|b| validation_mape < b.1) {
            best = Some((epoch, validation_mape, params.clone()));
        }
    }
    let (best_epoch, best_validation_mape, best_params) = best.expect("at least one epoch");
    set_params(&mut model, &best_params);
    Ok((model, TrainReport { epochs, best_epoch, best_validation_mape }))
}
