//! Fully connected sequencer: maps the encoded (source, target) pair to 128
//! independent move bits, trained as multi-label classification with binary
//! cross-entropy and Adam.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::PairRecord;
use crate::model::{
    decode_sequence, encode_sequence, pair_features, Configuration, MoveSequence, PAIR_FEATURES, SEQUENCE_BITS,
};

/// Input, four hidden layers, output: five weight layers.
pub const DEFAULT_WIDTHS: [usize; 6] = [PAIR_FEATURES, 512, 512, 256, 256, SEQUENCE_BITS];

/// Probability clip used by the loss.
pub const BCE_EPS: f64 = 1e-7;

const MAGIC: &[u8; 4] = b"BSQM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    /// `weights[l]` has shape (fan_in, fan_out).
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, lr: 1e-3, beta1: 0.9, beta2: 0.999, adam_eps: 1e-8, batch: 64, seed: 0 }
    }
}

struct Cache {
    /// Layer inputs; `acts[0]` is the batch input, the last entry the sigmoid output.
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

struct Grads {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(widths: &[usize], seed: u64) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in widths.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-limit..=limit)));
            biases.push(Array1::zeros(w[1]));
        }
        Mlp { widths: widths.to_vec(), weights, biases }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        let weights = widths.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = widths.windows(2).map(|w| Array1::zeros(w[1])).collect();
        Mlp { widths: widths.to_vec(), weights, biases }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn forward_cached(&self, x: ArrayView2<f64>) -> Cache {
        let mut acts = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.weights.len());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(w) + b;
            let a = if l == last { z.mapv(sigmoid) } else { z.mapv(|v| v.max(0.0)) };
            pre.push(z);
            acts.push(a);
        }
        Cache { acts, pre }
    }

    /// Output probabilities for a batch of rows.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_cached(x).acts.pop().expect("output layer")
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.widths[0], "input width");
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row");
        self.forward_batch(x).into_raw_vec_and_offset().0
    }

    /// Mean BCE over a batch and backprop gradients.
    fn loss_and_grads(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Grads) {
        let cache = self.forward_cached(x);
        let out = cache.acts.last().expect("output");
        let n = x.nrows() as f64;
        let width = out.ncols() as f64;
        let loss = bce_matrix(out.view(), y) / n;

        // dL/dz for sigmoid + clipped BCE; zero where the clip is active
        let mut delta = Array2::zeros(out.raw_dim());
        Zip::from(&mut delta).and(out).and(y).for_each(|d, &p, &t| {
            *d = if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) { 0.0 } else { (p - t) / (width * n) };
        });

        let layers = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            gw[l] = cache.acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                Zip::from(&mut back).and(&cache.pre[l - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, Grads { weights: gw, biases: gb })
    }

    /// Trains on the first stored plan of each record and returns the mean
    /// loss of every epoch. An empty record set leaves the model untouched.
    pub fn train(&mut self, records: &[PairRecord], cfg: &TrainConfig) -> Vec<f64> {
        if records.is_empty() {
            return Vec::new();
        }
        let (x, y) = training_matrices(records);
        self.train_on(x.view(), y.view(), cfg)
    }

    pub fn train_on(&mut self, x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &TrainConfig) -> Vec<f64> {
        let n = x.nrows();
        if n == 0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut adam = Adam::new(self);
        let mut order: Vec<usize> = (0..n).collect();
        let mut curve = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(cfg.batch.max(1)) {
                let bx = x.select(Axis(0), chunk);
                let by = y.select(Axis(0), chunk);
                let (loss, grads) = self.loss_and_grads(bx.view(), by.view());
                total += loss * chunk.len() as f64;
                adam.step(self, &grads, cfg);
            }
            curve.push(total / n as f64);
        }
        curve
    }

    /// Mean BCE of the model over records (first plan as truth).
    pub fn loss_on(&self, records: &[PairRecord]) -> f64 {
        if records.is_empty() {
            return 0.0;
        }
        let (x, y) = training_matrices(records);
        bce_matrix(self.forward_batch(x.view()).view(), y.view()) / records.len() as f64
    }

    pub fn predict(&self, src: &Configuration, tgt: &Configuration) -> MoveSequence {
        decode_sequence(&self.forward(&pair_features(src, tgt)))
    }

    /// Batched [`Mlp::predict`].
    pub fn predict_many(&self, pairs: &[(Configuration, Configuration)]) -> Vec<MoveSequence> {
        if pairs.is_empty() {
            return Vec::new();
        }
        let mut x = Array2::zeros((pairs.len(), self.widths[0]));
        for (i, (s, t)) in pairs.iter().enumerate() {
            x.row_mut(i).assign(&Array1::from(pair_features(s, t).to_vec()));
        }
        let out = self.forward_batch(x.view());
        out.rows().into_iter().map(|r| decode_sequence(r.as_slice().expect("contiguous"))).collect()
    }

    /// Flat parameter accessors in layer order (weights row-major, then biases).
    fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            if idx < w.len() {
                let cols = w.ncols();
                return &mut w[[idx / cols, idx % cols]];
            }
            idx -= w.len();
            if idx < b.len() {
                return &mut b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        Ok(f.flush()?)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for &width in &self.widths {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        for (wt, b) in self.weights.iter().zip(&self.biases) {
            for v in wt.iter().chain(b.iter()) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MlpError> {
        Self::read_from(&mut io::BufReader::new(fs::File::open(path)?))
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, MlpError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MlpError::Format("wrong magic".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> io::Result<u32> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(MlpError::Format(format!("unsupported version {version}")));
        }
        let count = read_u32(r)? as usize;
        if !(2..=64).contains(&count) {
            return Err(MlpError::Format(format!("implausible layer count {count}")));
        }
        let widths = (0..count).map(|_| read_u32(r).map(|v| v as usize)).collect::<io::Result<Vec<_>>>()?;
        let mut model = Mlp::zeros(&widths);
        let mut f64buf = [0u8; 8];
        for (wt, b) in model.weights.iter_mut().zip(model.biases.iter_mut()) {
            for v in wt.iter_mut().chain(b.iter_mut()) {
                r.read_exact(&mut f64buf)?;
                *v = f64::from_le_bytes(f64buf);
            }
        }
        Ok(model)
    }
}

struct Adam {
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    fn new(model: &Mlp) -> Self {
        let zeros = || Grads {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: model.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        };
        Adam { t: 0, m: zeros(), v: zeros() }
    }

    fn step(&mut self, model: &mut Mlp, g: &Grads, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.lr, cfg.adam_eps);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..model.weights.len() {
            Zip::from(&mut model.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&g.weights[l])
                .for_each(update);
            Zip::from(&mut model.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&g.biases[l])
                .for_each(update);
        }
    }
}

/// Sum over rows of the per-row mean clipped BCE.
fn bce_matrix(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> f64 {
    let width = pred.ncols() as f64;
    let mut total = 0.0;
    Zip::from(pred).and(truth).for_each(|&p, &y| {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    });
    total / width
}

/// Mean binary cross-entropy over positions, predictions clipped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let p = ArrayView2::from_shape((1, pred.len()), pred).expect("row");
    let t = ArrayView2::from_shape((1, truth.len()), truth).expect("row");
    bce_matrix(p, t)
}

/// 128-bit training target of a record: its first plan, or all zeros.
pub fn target_bits(rec: &PairRecord) -> [f64; SEQUENCE_BITS] {
    rec.first_plan().map(|p| encode_sequence(p).to_reals()).unwrap_or([0.0; SEQUENCE_BITS])
}

pub fn training_matrices(records: &[PairRecord]) -> (Array2<f64>, Array2<f64>) {
    let mut x = Array2::zeros((records.len(), PAIR_FEATURES));
    let mut y = Array2::zeros((records.len(), SEQUENCE_BITS));
    for (i, r) in records.iter().enumerate() {
        x.row_mut(i).assign(&Array1::from(pair_features(&r.src, &r.tgt).to_vec()));
        y.row_mut(i).assign(&Array1::from(target_bits(r).to_vec()));
    }
    (x, y)
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parameter {index}: analytic {analytic:e} vs numeric {numeric:e} (relative error {rel_error:e})")]
pub struct GradCheckError {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because a perturbation crossed a ReLU kink.
    pub skipped: usize,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;
pub const GRAD_CHECK_TOL: f64 = 1e-4;
const KINK_MARGIN: f64 = 1e-6;
/// Floor of the relative-error denominator; below it differences are
/// dominated by floating-point cancellation in the loss.
const REL_FLOOR: f64 = 1e-6;

fn relu_pattern(model: &Mlp, x: ArrayView2<f64>) -> (Vec<bool>, bool) {
    let cache = model.forward_cached(x);
    let hidden = &cache.pre[..cache.pre.len() - 1];
    let pattern = hidden.iter().flat_map(|z| z.iter().map(|&v| v > 0.0)).collect();
    let near_kink = hidden.iter().flat_map(|z| z.iter()).any(|v| v.abs() < KINK_MARGIN);
    (pattern, near_kink)
}

/// Compares backprop gradients with central finite differences on every
/// parameter for one batch of samples.
pub fn grad_check(model: &Mlp, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<GradCheckReport, GradCheckError> {
    let (_, grads) = model.loss_and_grads(x, y);
    let analytic: Vec<f64> =
        grads.weights.iter().zip(&grads.biases).flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect();
    compare_gradients(model, x, y, &analytic)
}

fn compare_gradients(
    model: &Mlp,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    analytic: &[f64],
) -> Result<GradCheckReport, GradCheckError> {
    let (base_pattern, _) = relu_pattern(model, x);
    let loss_at = |m: &Mlp| bce_matrix(m.forward_batch(x).view(), y) / x.nrows() as f64;

    let mut probe = model.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for (index, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(index);
        *probe.param_mut(index) = orig + GRAD_CHECK_STEP;
        let (p_plus, kink_plus) = relu_pattern(&probe, x);
        let plus = loss_at(&probe);
        *probe.param_mut(index) = orig - GRAD_CHECK_STEP;
        let (p_minus, kink_minus) = relu_pattern(&probe, x);
        let minus = loss_at(&probe);
        *probe.param_mut(index) = orig;

        if p_plus != base_pattern || p_minus != base_pattern || kink_plus || kink_minus {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
        let rel_error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel_error > GRAD_CHECK_TOL {
            return Err(GradCheckError { index, analytic: a, numeric, rel_error });
        }
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(rel_error);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Horizon;

    fn small_batch(seed: u64, rows: usize, inputs: usize, outputs: usize) -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((rows, inputs), |_| rng.gen_range(0..2) as f64);
        let y = Array2::from_shape_fn((rows, outputs), |_| rng.gen_range(0..2) as f64);
        (x, y)
    }

    #[test]
    fn zero_model_outputs_one_half() {
        let m = Mlp::zeros(&DEFAULT_WIDTHS);
        let out = m.forward(&[1.0; PAIR_FEATURES]);
        assert_eq!(out.len(), SEQUENCE_BITS);
        assert!(out.iter().all(|&v| v == 0.5));
        assert!(m.predict(&Configuration::empty(), &Configuration::empty()).is_empty());
    }

    #[test]
    fn forward_is_deterministic() {
        let a = Mlp::new(&DEFAULT_WIDTHS, 9);
        let b = Mlp::new(&DEFAULT_WIDTHS, 9);
        let input: Vec<f64> = (0..PAIR_FEATURES).map(|i| (i % 2) as f64).collect();
        let out = a.forward(&input);
        assert_eq!(out, b.forward(&input));
        assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn bce_values() {
        let truth: Vec<f64> = (0..128).map(|i| (i % 3 == 0) as u8 as f64).collect();
        assert!(bce_loss(&truth, &truth) <= -(1.0 - BCE_EPS).ln() + 1e-15);
        assert!((bce_loss(&[0.5; 128], &truth) - 2f64.ln()).abs() < 1e-12);
        let wild: Vec<f64> = (0..128).map(|i| i as f64 / 127.0).collect();
        assert!(bce_loss(&wild, &truth) >= 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (x, y) = small_batch(1, 3, 6, 5);
        let m = Mlp::new(&[6, 8, 7, 5], 0);
        let report = grad_check(&m, x.view(), y.view()).unwrap();
        assert!(report.max_rel_error <= GRAD_CHECK_TOL);
        assert!(report.checked > report.skipped);

        let zero = Mlp::zeros(&[6, 4, 5]);
        let report = grad_check(&zero, x.view(), y.view()).unwrap();
        assert!(report.max_rel_error <= GRAD_CHECK_TOL);
    }

    #[test]
    fn grad_check_reports_the_offending_parameter() {
        let (x, y) = small_batch(2, 2, 4, 3);
        let m = Mlp::new(&[4, 3], 5);
        let (_, g) = m.loss_and_grads(x.view(), y.view());
        let mut analytic: Vec<f64> = g.weights[0].iter().chain(g.biases[0].iter()).copied().collect();
        assert_eq!(analytic.len(), m.param_count());
        analytic[7] += 0.1;
        let err = compare_gradients(&m, x.view(), y.view(), &analytic).unwrap_err();
        assert_eq!(err.index, 7);
        assert!(err.rel_error > GRAD_CHECK_TOL);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Mlp::new(&[5, 4, 3], 11);
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        assert_eq!(buf.len(), 4 + 4 + 4 + 3 * 4 + 8 * m.param_count());
        assert_eq!(Mlp::read_from(&mut &buf[..]).unwrap(), m);
        buf[0] = b'X';
        assert!(Mlp::read_from(&mut &buf[..]).is_err());
    }

    fn toy_records() -> Vec<PairRecord> {
        let pairs = [("R.G", "G.R"), ("R|G", "R.G"), ("B", "-"), ("R.G|B", "B.G.R"), ("Y|O", "O.Y"), ("P.R", "R|P")];
        pairs
            .iter()
            .map(|(s, t)| PairRecord::from_plan(s.parse().unwrap(), t.parse().unwrap(), Horizon::default(), None))
            .collect()
    }

    #[test]
    fn empty_training_set_leaves_model_unchanged() {
        let mut m = Mlp::new(&[PAIR_FEATURES, 8, SEQUENCE_BITS], 1);
        let before = m.clone();
        assert!(m.train(&[], &TrainConfig::default()).is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn overfits_a_handful_of_records() {
        let recs = toy_records();
        let mut m = Mlp::new(&[PAIR_FEATURES, 64, SEQUENCE_BITS], 3);
        let curve = m.train(&recs, &TrainConfig { epochs: 400, lr: 1e-2, batch: 8, ..TrainConfig::default() });
        assert!(curve.last().unwrap() < &0.01, "final loss {}", curve.last().unwrap());
        for r in &recs {
            assert_eq!(&m.predict(&r.src, &r.tgt), r.first_plan().unwrap());
        }
        let mut again = Mlp::new(&[PAIR_FEATURES, 64, SEQUENCE_BITS], 3);
        again.train(&recs, &TrainConfig { epochs: 400, lr: 1e-2, batch: 8, ..TrainConfig::default() });
        assert_eq!(again, m);
    }
}
