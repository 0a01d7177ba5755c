use crate::corpus::UNIT_TOLERANCE;
use crate::error::{Error, Result};
use crate::util;

/// Symmetric contrastive loss for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// `(i2t + t2i) / 2`.
    pub loss: f64,
    pub i2t: f64,
    pub t2i: f64,
    /// Gradient with respect to each text vector, taken through unit
    /// normalization (so it is tangent to the sphere at that vector).
    pub grad: Vec<Vec<f64>>,
}

fn check_unit(vectors: &[Vec<f64>], what: &str) -> Result<()> {
    for (i, v) in vectors.iter().enumerate() {
        let n = util::l2_norm(v);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidArgument(format!("{what} vector {i} has norm {n}, expected 1")));
        }
    }
    Ok(())
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Pair `k` (text k, image k) is the positive; every other in-batch item is a
/// negative. Similarities are dot products of unit vectors divided by `tau`.
pub fn contrastive_loss(text: &[Vec<f64>], image: &[Vec<f64>], tau: f64) -> Result<LossOutput> {
    let n = text.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("contrastive loss needs at least 2 pairs, got {n}")));
    }
    if image.len() != n {
        return Err(Error::InvalidArgument(format!("{n} text vectors but {} image vectors", image.len())));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    let d = image[0].len();
    if let Some(v) = text.iter().chain(image).find(|v| v.len() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            found: v.len(),
        });
    }
    check_unit(text, "text")?;
    check_unit(image, "image")?;

    // s[a][b]: text a against image b.
    let s: Vec<Vec<f64>> = text
        .iter()
        .map(|t| image.iter().map(|v| util::dot(t, v) / tau).collect())
        .collect();

    let row_lse: Vec<f64> = s.iter().map(|row| log_sum_exp(row.iter().copied())).collect();
    let col_lse: Vec<f64> = (0..n).map(|b| log_sum_exp(s.iter().map(move |row| row[b]))).collect();

    let t2i = (0..n).map(|k| row_lse[k] - s[k][k]).sum::<f64>() / n as f64;
    let i2t = (0..n).map(|k| col_lse[k] - s[k][k]).sum::<f64>() / n as f64;

    let scale = 0.5 / (n as f64 * tau);
    let grad = (0..n)
        .map(|a| {
            let mut g = vec![0.0; d];
            for b in 0..n {
                let p_row = (s[a][b] - row_lse[a]).exp();
                let p_col = (s[a][b] - col_lse[b]).exp();
                let target = if a == b { 2.0 } else { 0.0 };
                let coeff = (p_row + p_col - target) * scale;
                g.iter_mut().zip(&image[b]).for_each(|(gi, vi)| *gi += coeff * vi);
            }
            let radial = util::dot(&g, &text[a]);
            g.iter_mut().zip(&text[a]).for_each(|(gi, ui)| *gi -= radial * ui);
            g
        })
        .collect();

    Ok(LossOutput {
        loss: 0.5 * (i2t + t2i),
        i2t,
        t2i,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                v
            })
            .collect()
    }

    #[test]
    fn uniform_similarities_give_ln_n() {
        for n in [2usize, 8, 64] {
            let t = vec![vec![0.6, 0.8]; n];
            let v = vec![vec![1.0, 0.0]; n];
            let out = contrastive_loss(&t, &v, 0.07).unwrap();
            assert!((out.loss - (n as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_pairs_approach_zero() {
        let e = basis(4, 4);
        let hot = contrastive_loss(&e, &e, 1.0).unwrap().loss;
        let cold = contrastive_loss(&e, &e, 0.01).unwrap().loss;
        assert!(cold < 1e-30, "{cold}");
        assert!(hot > cold);
    }

    #[test]
    fn rejects_bad_input() {
        let e = basis(2, 2);
        assert!(contrastive_loss(&e[..1], &e[..1], 0.1).is_err());
        assert!(contrastive_loss(&e, &e, 0.0).is_err());
        assert!(contrastive_loss(&[vec![2.0, 0.0], vec![0.0, 1.0]], &e, 0.1).is_err());
    }

    #[test]
    fn gradient_is_tangent() {
        let t = vec![vec![0.6, 0.8, 0.0], vec![0.0, 0.6, 0.8], vec![0.8, 0.0, 0.6]];
        let v = basis(3, 3);
        let out = contrastive_loss(&t, &v, 0.3).unwrap();
        for (g, u) in out.grad.iter().zip(&t) {
            assert!(util::dot(g, u).abs() < 1e-12);
        }
    }
}
