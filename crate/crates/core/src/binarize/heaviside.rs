use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::classifier::{InputKind, LinearClassifier, MomentumSgd, TrainConfig};
use crate::data::{BitMatrix, ClassId, RealMatrix};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Learned sign projection `b = [x W^T >= 0]` producing `f * d` bits.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavisideProjection {
    w: RealMatrix,
    factor: usize,
    ste_clip: f64,
}

impl HeavisideProjection {
    pub const DEFAULT_STE_CLIP: f64 = 1.0;

    /// Gaussian init with variance `1/d`.
    pub fn random(d: usize, factor: usize, rng: &mut SeededRng) -> Result<Self> {
        if d == 0 || factor == 0 {
            return Err(Error::InvalidParameter(
                "d and factor must be positive".into(),
            ));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let values = (0..factor * d * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Self::new(RealMatrix::from_vec(factor * d, d, values)?, factor)
    }

    pub fn new(w: RealMatrix, factor: usize) -> Result<Self> {
        if factor == 0 || w.n_rows() != factor * w.n_cols() {
            return Err(Error::shape(format!(
                "projection is {}x{}, expected ({factor}*d)x d",
                w.n_rows(),
                w.n_cols()
            )));
        }
        if w.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite projection weight".into(),
            ));
        }
        Ok(Self {
            w,
            factor,
            ste_clip: Self::DEFAULT_STE_CLIP,
        })
    }

    pub fn with_ste_clip(mut self, clip: f64) -> Result<Self> {
        if !(clip > 0.0) {
            return Err(Error::InvalidParameter("ste_clip must be positive".into()));
        }
        self.ste_clip = clip;
        Ok(self)
    }

    pub fn weights(&self) -> &RealMatrix {
        &self.w
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn d(&self) -> usize {
        self.w.n_cols()
    }

    pub fn width(&self) -> usize {
        self.w.n_rows()
    }

    pub fn ste_clip(&self) -> f64 {
        self.ste_clip
    }

    fn check_input(&self, x: &RealMatrix) -> Result<()> {
        if x.n_cols() != self.d() {
            return Err(Error::shape(format!(
                "input width {} does not match projection width {}",
                x.n_cols(),
                self.d()
            )));
        }
        Ok(())
    }

    /// Pre-activations `u = x W^T`.
    pub fn pre_activation(&self, x: &RealMatrix) -> Result<RealMatrix> {
        self.check_input(x)?;
        let mut u = RealMatrix::zeros(x.n_rows(), self.width());
        for i in 0..x.n_rows() {
            let xi = x.row(i);
            for (r, out) in u.row_mut(i).iter_mut().enumerate() {
                *out = self.w.row(r).iter().zip(xi).map(|(a, b)| a * b).sum();
            }
        }
        Ok(u)
    }
}

fn step(u: &RealMatrix) -> BitMatrix {
    let mut bits = BitMatrix::zeros(u.n_rows(), u.n_cols());
    for i in 0..u.n_rows() {
        for (j, &v) in u.row(i).iter().enumerate() {
            if v >= 0.0 {
                bits.set(i, j, true);
            }
        }
    }
    bits
}

pub fn heaviside_forward(x: &RealMatrix, proj: &HeavisideProjection) -> Result<BitMatrix> {
    Ok(step(&proj.pre_activation(x)?))
}

/// Straight-through backward pass: the step is treated as identity where
/// `|u| <= ste_clip` and as constant elsewhere. `upstream` is the gradient
/// with respect to the output bits. Returns `(grad_x, grad_w)`.
pub fn heaviside_backward(
    upstream: &RealMatrix,
    x: &RealMatrix,
    proj: &HeavisideProjection,
) -> Result<(RealMatrix, RealMatrix)> {
    let u = proj.pre_activation(x)?;
    if upstream.n_rows() != x.n_rows() || upstream.n_cols() != proj.width() {
        return Err(Error::shape(format!(
            "upstream gradient is {}x{}, expected {}x{}",
            upstream.n_rows(),
            upstream.n_cols(),
            x.n_rows(),
            proj.width()
        )));
    }
    Ok(backward_with(&u, upstream, x, proj))
}

fn backward_with(
    u: &RealMatrix,
    upstream: &RealMatrix,
    x: &RealMatrix,
    proj: &HeavisideProjection,
) -> (RealMatrix, RealMatrix) {
    let (d, width) = (proj.d(), proj.width());
    let mut grad_x = RealMatrix::zeros(x.n_rows(), d);
    let mut grad_w = RealMatrix::zeros(width, d);
    for i in 0..x.n_rows() {
        let xi = x.row(i);
        for r in 0..width {
            if u.get(i, r).abs() > proj.ste_clip {
                continue;
            }
            let g = upstream.get(i, r);
            if g == 0.0 {
                continue;
            }
            for (gw, &xv) in grad_w.row_mut(r).iter_mut().zip(xi) {
                *gw += g * xv;
            }
            for (gx, &wv) in grad_x.row_mut(i).iter_mut().zip(proj.w.row(r)) {
                *gx += g * wv;
            }
        }
    }
    (grad_x, grad_w)
}

#[derive(Debug, Clone)]
pub struct HeavisideFit {
    pub projection: HeavisideProjection,
    pub classifier: LinearClassifier,
    /// Mean cross-entropy per epoch.
    pub loss_trace: Vec<f64>,
}

/// Jointly trains the projection and a binary-input classifier head with
/// momentum SGD, backpropagating through the step with the straight-through
/// estimator.
pub fn train_heaviside(
    features: &RealMatrix,
    labels: &[ClassId],
    proj: &HeavisideProjection,
    clf: &LinearClassifier,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<HeavisideFit> {
    cfg.validate()?;
    if features.n_rows() == 0 {
        return Err(Error::EmptyInput("no rows to train the projection on"));
    }
    if labels.len() != features.n_rows() {
        return Err(Error::shape(format!(
            "{} labels for {} rows",
            labels.len(),
            features.n_rows()
        )));
    }
    if clf.input_kind() != InputKind::Binary || clf.input_dim() != proj.width() {
        return Err(Error::shape("classifier must take the projection's bits"));
    }
    proj.check_input(features)?;
    let targets = clf.targets(labels)?;

    let mut proj = proj.clone();
    let mut clf = clf.clone();
    let mut opt_p = MomentumSgd::new(proj.w.as_slice().len(), cfg.momentum);
    let mut opt_w = MomentumSgd::new(clf.weights().as_slice().len(), cfg.momentum);
    let mut opt_b = MomentumSgd::new(clf.n_classes(), cfg.momentum);
    let mut order: Vec<usize> = (0..features.n_rows()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = features.select_rows(chunk);
            let t: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let u = proj.pre_activation(&x)?;
            let signs = step(&u);
            let dense = clf.prepare_input(&crate::data::Embeddings::Binary(signs))?;
            let g = clf.loss_grad(&dense, &t, true);
            if !g.loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += g.loss * chunk.len() as f64;
            // classifier input is 2b - 1
            let mut upstream = g.grad_input.expect("requested input gradient");
            upstream.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0);
            let (_, grad_p) = backward_with(&u, &upstream, &x, &proj);

            let (w, b) = clf.params_mut();
            opt_w.step(w.as_mut_slice(), g.grad_w.as_slice(), lr);
            opt_b.step(b, &g.grad_b, lr);
            opt_p.step(proj.w.as_mut_slice(), grad_p.as_slice(), lr);
        }
        let mean = loss_sum / features.n_rows() as f64;
        if !mean.is_finite() || proj.w.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        loss_trace.push(mean);
    }
    Ok(HeavisideFit {
        projection: proj,
        classifier: clf,
        loss_trace,
    })
}
