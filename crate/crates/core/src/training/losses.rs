//! Contrastive objectives over unit-norm window embeddings.
//!
//! Both losses return their value together with the gradient with respect to
//! the (already normalized) embeddings they were given.

use ndarray::{Array2, ArrayView2};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Array2<f64>,
}

/// Supervised contrastive loss. For anchor `i` with positive set `P(i)`:
///
/// ```text
/// L_i = −1/|P(i)| Σ_{p∈P(i)} log( exp(z_i·z_p/τ) / Σ_{a≠i} exp(z_i·z_a/τ) )
/// ```
///
/// averaged over anchors with at least one positive; others contribute 0.
pub fn supcon_loss(z: ArrayView2<f64>, labels: &[usize], tau: f64) -> Result<LossOutput> {
    check_tau(tau)?;
    let n = z.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} embeddings but {} labels",
            n,
            labels.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("supervised contrastive loss needs a batch of at least 2".into()));
    }
    let sim = z.dot(&z.t()) / tau;
    let mut grad_sim = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    let mut anchors = 0usize;
    for i in 0..n {
        let positives: Vec<usize> = (0..n).filter(|&p| p != i && labels[p] == labels[i]).collect();
        if positives.is_empty() {
            continue;
        }
        anchors += 1;
        let lse = log_sum_exp((0..n).filter(|&a| a != i).map(|a| sim[(i, a)]));
        let np = positives.len() as f64;
        total += positives.iter().map(|&p| lse - sim[(i, p)]).sum::<f64>() / np;
        for a in (0..n).filter(|&a| a != i) {
            grad_sim[(i, a)] += (sim[(i, a)] - lse).exp();
        }
        for &p in &positives {
            grad_sim[(i, p)] -= 1.0 / np;
        }
    }
    if anchors == 0 {
        return Ok(LossOutput {
            value: 0.0,
            grad: Array2::zeros(z.raw_dim()),
        });
    }
    let scale = 1.0 / (anchors as f64 * tau);
    grad_sim *= scale;
    // s_ia = z_i·z_a  ⇒  ∂/∂z_i += g_ia z_a, ∂/∂z_a += g_ia z_i
    let grad = grad_sim.dot(&z) + grad_sim.t().dot(&z);
    Ok(LossOutput {
        value: total / anchors as f64,
        grad,
    })
}

/// Picks, for every anchor, a random other member of the batch with the same
/// label (or `None` when there is none).
pub fn choose_positives<R: Rng + ?Sized>(labels: &[usize], rng: &mut R) -> Vec<Option<usize>> {
    (0..labels.len())
        .map(|i| {
            let same: Vec<usize> = (0..labels.len())
                .filter(|&j| j != i && labels[j] == labels[i])
                .collect();
            same.choose(rng).copied()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct HardNegativeOutput {
    pub value: f64,
    pub grad_clean: Array2<f64>,
    pub grad_distorted: Array2<f64>,
}

/// InfoNCE with one clean positive per anchor and the anchor's own distorted
/// variants as negatives:
///
/// ```text
/// L_i = −log( e^{z_i·z_p/τ} / (e^{z_i·z_p/τ} + Σ_{d∈D_i} e^{z_i·z_d/τ}) )
/// ```
///
/// `owners[r]` is the anchor that distorted row `r` was made from. The mean
/// runs over anchors with a positive and at least one negative.
pub fn hard_negative_loss(
    z_clean: ArrayView2<f64>,
    positives: &[Option<usize>],
    z_distorted: ArrayView2<f64>,
    owners: &[usize],
    tau: f64,
) -> Result<HardNegativeOutput> {
    check_tau(tau)?;
    let n = z_clean.nrows();
    if positives.len() != n || owners.len() != z_distorted.nrows() {
        return Err(Error::Shape(
            "positives must match clean rows and owners must match distorted rows".into(),
        ));
    }
    if let Some(&bad) = owners.iter().find(|&&o| o >= n) {
        return Err(Error::Shape(format!("distorted row owner {bad} out of range")));
    }
    let mut negatives: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, &o) in owners.iter().enumerate() {
        negatives[o].push(r);
    }
    let mut grad_clean = Array2::zeros(z_clean.raw_dim());
    let mut grad_distorted = Array2::zeros(z_distorted.raw_dim());
    let mut total = 0.0;
    let mut anchors = 0usize;
    let mut contributions = Vec::new();
    for i in 0..n {
        let Some(p) = positives[i] else { continue };
        if negatives[i].is_empty() {
            continue;
        }
        let zi = z_clean.row(i);
        let s_pos = zi.dot(&z_clean.row(p)) / tau;
        let s_neg: Vec<f64> = negatives[i]
            .iter()
            .map(|&r| zi.dot(&z_distorted.row(r)) / tau)
            .collect();
        let lse = log_sum_exp(std::iter::once(s_pos).chain(s_neg.iter().copied()));
        total += lse - s_pos;
        anchors += 1;
        contributions.push((i, p, s_pos, s_neg, lse));
    }
    if anchors == 0 {
        return Ok(HardNegativeOutput {
            value: 0.0,
            grad_clean,
            grad_distorted,
        });
    }
    let scale = 1.0 / (anchors as f64 * tau);
    for (i, p, s_pos, s_neg, lse) in contributions {
        let g_pos = ((s_pos - lse).exp() - 1.0) * scale;
        let zi = z_clean.row(i).to_owned();
        let zp = z_clean.row(p).to_owned();
        grad_clean.row_mut(i).scaled_add(g_pos, &zp);
        grad_clean.row_mut(p).scaled_add(g_pos, &zi);
        for (&r, s) in negatives[i].iter().zip(s_neg) {
            let g = (s - lse).exp() * scale;
            grad_clean.row_mut(i).scaled_add(g, &z_distorted.row(r));
            grad_distorted.row_mut(r).scaled_add(g, &zi);
        }
    }
    Ok(HardNegativeOutput {
        value: total / anchors as f64,
        grad_clean,
        grad_distorted,
    })
}

/// `L = L_supcon + λ · L_hard-negative`
pub fn total_loss(supcon: f64, hard_negative: f64, lambda: f64) -> f64 {
    supcon + lambda * hard_negative
}
