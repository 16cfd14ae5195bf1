use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// `logits[i][j] = img[i] . txt[j] / temperature`.
pub fn similarity_matrix(img: ArrayView2<f64>, txt: ArrayView2<f64>, temperature: f64) -> Result<Array2<f64>> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    if img.dim() != txt.dim() {
        return Err(Error::Shape(format!(
            "image embeddings {:?} and text embeddings {:?} differ",
            img.dim(),
            txt.dim()
        )));
    }
    Ok(img.dot(&txt.t()) / temperature)
}

fn log_softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

fn check_square(logits: ArrayView2<f64>) -> Result<usize> {
    let (r, c) = logits.dim();
    if r != c || r == 0 {
        return Err(Error::Shape(format!("logits must be square and non-empty, got {r}x{c}")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            tensor: "logits".into(),
        });
    }
    Ok(r)
}

/// Mean of the row-wise (image to text) and column-wise (text to image)
/// cross-entropies with the diagonal as targets.
pub fn clip_contrastive_loss(logits: ArrayView2<f64>) -> Result<f64> {
    Ok(contrastive_loss_and_grad(logits)?.0)
}

/// Loss and its gradient with respect to the logits.
pub fn contrastive_loss_and_grad(logits: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    let b = check_square(logits)?;
    let row_lsm = log_softmax_rows(logits);
    let col_lsm = log_softmax_rows(logits.t()).reversed_axes();
    let row_ce: f64 = -row_lsm.diag().sum() / b as f64;
    let col_ce: f64 = -col_lsm.diag().sum() / b as f64;
    let loss = 0.5 * (row_ce + col_ce);

    let scale = 0.5 / b as f64;
    let mut grad = (row_lsm.mapv(f64::exp) + col_lsm.mapv(f64::exp)) * scale;
    grad.diag_mut().mapv_inplace(|g| g - 2.0 * scale);
    debug_assert_eq!(grad.len_of(Axis(0)), b);
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn identity_logits() {
        let x = Array2::<f64>::eye(3);
        assert_eq!(similarity_matrix(x.view(), x.view(), 1.0).unwrap(), x);
        let half = similarity_matrix(x.view(), x.view(), 0.5).unwrap();
        assert_eq!(half, x * 2.0);
    }

    #[test]
    fn hand_computed_dot_products() {
        let a = array![[0.6, 0.8], [1.0, 0.0]];
        let b = array![[0.0, 1.0], [0.8, -0.6]];
        let l = similarity_matrix(a.view(), b.view(), 1.0).unwrap();
        let expected = array![[0.8, 0.0], [0.0, 0.8]];
        for (x, y) in l.iter().zip(expected.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_inputs() {
        let x = Array2::<f64>::eye(2);
        assert!(similarity_matrix(x.view(), x.view(), 0.0).is_err());
        assert!(similarity_matrix(x.view(), Array2::eye(3).view(), 1.0).is_err());
        assert!(clip_contrastive_loss(Array2::zeros((2, 3)).view()).is_err());
    }

    #[test]
    fn single_pair_has_zero_loss() {
        assert_eq!(clip_contrastive_loss(array![[3.7]].view()).unwrap(), 0.0);
    }

    #[test]
    fn uniform_logits_give_ln_b() {
        let loss = clip_contrastive_loss(Array2::zeros((4, 4)).view()).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
    }
}
