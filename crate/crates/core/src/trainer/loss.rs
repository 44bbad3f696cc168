use super::{ProjectionModel, TrainSample};
use crate::embedding::SparseVec;
use crate::scalar::{dot, Scalar};

/// Temperature-scaled cosine `cos(a, b) / τ`.
pub fn phi<T: Scalar>(model: &ProjectionModel<T>, a: &[T], b: &[T]) -> T {
    crate::embedding::cosine_slices(a, b) / model.tau
}

/// `-log softmax(logits)[0]`: the positive logit comes first.
pub fn infonce_from_logits<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    lse - logits[0]
}

/// Dense gradient with the shape of `W`, plus the loss it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub loss: T,
    pub weights: Vec<T>,
}

/// Features of a sample, hashed once.
#[derive(Debug, Clone)]
pub(crate) struct Prepared<T> {
    pub anchor: SparseVec<T>,
    pub positive: SparseVec<T>,
    pub negatives: Vec<SparseVec<T>>,
}

pub(crate) fn prepare<T: Scalar>(model: &ProjectionModel<T>, s: &TrainSample, n_hard: usize) -> Prepared<T> {
    Prepared {
        anchor: model.features(&s.anchor),
        positive: model.features(&s.positive),
        negatives: s.negatives.iter().take(n_hard).map(|n| model.features(n)).collect(),
    }
}

/// Projected and normalized item, kept for the backward pass.
struct Encoded<'a, T> {
    x: &'a SparseVec<T>,
    norm: T,
    e: Vec<T>,
}

impl<'a, T: Scalar> Encoded<'a, T> {
    fn new(model: &ProjectionModel<T>, x: &'a SparseVec<T>) -> Self {
        let mut e = model.project(x);
        let norm = dot(&e, &e).sqrt();
        if norm > T::zero() {
            e.iter_mut().for_each(|v| *v /= norm);
        }
        Encoded { x, norm, e }
    }
}

/// Mean batch loss and, if `grad` is given, its gradient accumulated into
/// it. Each sample's candidates are its positive, its hard negatives and,
/// with `in_batch`, the other samples' positives.
pub(crate) fn batch_loss<T: Scalar>(model: &ProjectionModel<T>, batch: &[Prepared<T>], in_batch: bool, grad: Option<&mut [T]>) -> T {
    // item layout: per sample [anchor, positive, negatives...]
    let mut items: Vec<Encoded<T>> = Vec::new();
    let mut layout = Vec::with_capacity(batch.len());
    for s in batch {
        let start = items.len();
        items.push(Encoded::new(model, &s.anchor));
        items.push(Encoded::new(model, &s.positive));
        items.extend(s.negatives.iter().map(|x| Encoded::new(model, x)));
        layout.push(start);
    }
    let n = T::of_usize(batch.len());
    let inv_tau = T::one() / model.tau;
    let mut d_e: Vec<Vec<T>> = if grad.is_some() { items.iter().map(|it| vec![T::zero(); it.e.len()]).collect() } else { Vec::new() };
    let mut total = T::zero();
    for (i, s) in batch.iter().enumerate() {
        let a = layout[i];
        let mut cands: Vec<usize> = vec![a + 1];
        cands.extend((0..s.negatives.len()).map(|k| a + 2 + k));
        if in_batch {
            cands.extend(layout.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &b)| b + 1));
        }
        let logits: Vec<T> = cands.iter().map(|&c| dot(&items[a].e, &items[c].e) * inv_tau).collect();
        total += infonce_from_logits(&logits);
        if grad.is_none() {
            continue;
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        for (k, &c) in cands.iter().enumerate() {
            // dL/dlogit, scaled for the batch mean and the temperature
            let g = (exps[k] / z - if k == 0 { T::one() } else { T::zero() }) / n * inv_tau;
            if g == T::zero() {
                continue;
            }
            for d in 0..items[a].e.len() {
                let (ea, ec) = (items[a].e[d], items[c].e[d]);
                d_e[a][d] += g * ec;
                d_e[c][d] += g * ea;
            }
        }
    }
    if let Some(grad) = grad {
        let d_in = model.d_in;
        for (it, de) in items.iter().zip(&d_e) {
            if it.norm == T::zero() {
                continue;
            }
            // through e = u / |u|: du = (de - e (e . de)) / |u|
            let proj = dot(&it.e, de);
            for r in 0..it.e.len() {
                let du = (de[r] - it.e[r] * proj) / it.norm;
                if du == T::zero() {
                    continue;
                }
                let row = &mut grad[r * d_in..(r + 1) * d_in];
                for (&c, &v) in it.x.indices.iter().zip(&it.x.values) {
                    row[c as usize] += du * v;
                }
            }
        }
    }
    total / n
}

/// Mean InfoNCE loss of a batch.
pub fn infonce_loss<T: Scalar>(model: &ProjectionModel<T>, batch: &[TrainSample], in_batch: bool) -> T {
    let prepared: Vec<_> = batch.iter().map(|s| prepare(model, s, usize::MAX)).collect();
    batch_loss(model, &prepared, in_batch, None)
}

/// Analytic gradient of [`infonce_loss`] with respect to the weights.
pub fn loss_gradient<T: Scalar>(model: &ProjectionModel<T>, batch: &[TrainSample], in_batch: bool) -> Gradient<T> {
    let prepared: Vec<_> = batch.iter().map(|s| prepare(model, s, usize::MAX)).collect();
    let mut weights = vec![T::zero(); model.weights.len()];
    let loss = batch_loss(model, &prepared, in_batch, Some(&mut weights));
    Gradient { loss, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn model(d_in: usize, d_out: usize, tau: f64, seed: u64) -> ProjectionModel<f64> {
        ProjectionModel::random(d_in, d_out, tau, 7, seed)
    }

    fn words(rng: &mut crate::seed::Rng, n: usize) -> String {
        (0..n).map(|_| format!("w{}", rng.random_range(0..40))).collect::<Vec<_>>().join(" ")
    }

    fn random_batch(rng: &mut crate::seed::Rng, size: usize, negs: usize) -> Vec<TrainSample> {
        (0..size)
            .map(|_| TrainSample {
                anchor: words(rng, 6),
                positive: words(rng, 6),
                negatives: (0..negs).map(|_| words(rng, 5)).collect(),
            })
            .collect()
    }

    #[test]
    fn phi_cases() {
        let m = model(4, 2, 0.05, 0);
        assert!((phi(&m, &[0.6, 0.8], &[0.6, 0.8]) - 20.0).abs() < 1e-12);
        assert_eq!(phi(&m, &[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let m1 = model(4, 2, 1.0, 0);
        assert!((phi(&m1, &[1.0, 0.0], &[1.0, 1.0]) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn loss_hand_cases() {
        assert!((infonce_from_logits(&[0.3f64; 4]) - 4f64.ln()).abs() < 1e-12);
        // direct evaluation: -ln(e / (e + e^0.5 + e^0.2))
        let want = -(1f64.exp() / (1f64.exp() + 0.5f64.exp() + 0.2f64.exp())).ln();
        let got = infonce_from_logits(&[1.0f64, 0.5, 0.2]);
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.72070).abs() < 1e-5);
        let saturated = infonce_from_logits(&[10.0f64, -10.0, -10.0]);
        let want = (1.0 + 2.0 * (-20f64).exp()).ln();
        assert!((saturated - want).abs() < 1e-15);
        assert!(saturated > 0.0 && saturated < 1e-8);
    }

    #[test]
    fn adding_a_negative_never_lowers_loss() {
        let mut rng = crate::seed::rng(2);
        for _ in 0..200 {
            let mut logits: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            let before = infonce_from_logits(&logits);
            assert!(before >= 0.0);
            logits.push(rng.random_range(-5.0..5.0));
            assert!(infonce_from_logits(&logits) >= before);
        }
    }

    /// Central differences over every weight the batch touches.
    fn max_relative_error(m: &ProjectionModel<f64>, batch: &[TrainSample], in_batch: bool) -> f64 {
        let g = loss_gradient(m, batch, in_batch);
        let eps = 1e-4;
        let mut worst: f64 = 0.0;
        for w in 0..m.weights.len() {
            let mut plus = m.clone();
            plus.weights[w] += eps;
            let mut minus = m.clone();
            minus.weights[w] -= eps;
            let fd = (infonce_loss(&plus, batch, in_batch) - infonce_loss(&minus, batch, in_batch)) / (2.0 * eps);
            let an = g.weights[w];
            let err = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-6);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng(31);
        for trial in 0..20 {
            let m = model(16, 8, 0.5, trial);
            let batch = random_batch(&mut rng, 3, 3);
            let err = max_relative_error(&m, &batch, trial % 2 == 0);
            assert!(err < 1e-3, "trial {trial}: relative error {err}");
        }
    }

    #[test]
    fn saturated_positive_gives_vanishing_gradient() {
        // anchor and positive identical, negatives share no hashed bucket
        let m = ProjectionModel::<f64>::identity(256, 256, 0.01, 1);
        let s = TrainSample { anchor: "apple".into(), positive: "apple".into(), negatives: vec!["zebra".into()] };
        let fa = m.features(&s.anchor);
        let fn_ = m.features(&s.negatives[0]);
        assert_ne!(fa.indices, fn_.indices);
        let g = loss_gradient(&m, &[s], false);
        let norm = g.weights.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(g.loss < 1e-40 && norm < 1e-30, "loss {} norm {norm}", g.loss);
    }

    #[test]
    fn duplicated_sample_counts_twice() {
        let mut rng = crate::seed::rng(4);
        let m = model(16, 8, 0.2, 1);
        let b = random_batch(&mut rng, 2, 2);
        let g1 = loss_gradient(&m, &b[..1], false);
        let g2 = loss_gradient(&m, &b[1..], false);
        let dup = loss_gradient(&m, &[b[0].clone(), b[0].clone(), b[1].clone()], false);
        for w in 0..m.weights.len() {
            let want = (2.0 * g1.weights[w] + g2.weights[w]) / 3.0;
            assert!((dup.weights[w] - want).abs() < 1e-12);
        }
        assert!((dup.loss - (2.0 * g1.loss + g2.loss) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn loss_invariant_to_weight_scaling() {
        let mut rng = crate::seed::rng(5);
        let m = model(16, 8, 0.1, 2);
        let b = random_batch(&mut rng, 4, 3);
        let mut scaled = m.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= 3.7);
        assert!((infonce_loss(&m, &b, true) - infonce_loss(&scaled, &b, true)).abs() < 1e-10);
    }

    #[test]
    fn empty_text_has_zero_gradient_contribution() {
        let m = model(16, 8, 0.1, 3);
        let s = TrainSample { anchor: "".into(), positive: "a b".into(), negatives: vec!["c".into()] };
        let g = loss_gradient(&m, &[s], false);
        assert!((g.loss - 2f64.ln()).abs() < 1e-12);
        assert!(g.weights.iter().all(|&w| w == 0.0));
    }
}
