use crate::error::Result;
use crate::numeric::exact_sum;
use crate::tensor::Tensor3;

/// Mean squared error over every element.
///
/// The sum is correctly rounded, so the loss depends only on the multiset of
/// `(pred, target)` pairs: shuffling both tensors by the same permutation
/// leaves it bit-identical.
pub fn mse_loss(pred: &Tensor3, target: &Tensor3) -> Result<f64> {
    pred.same_shape(target)?;
    let sum = exact_sum(pred.data().iter().zip(target.data()).map(|(p, t)| {
        let d = t - p;
        d * d
    }));
    Ok(sum / pred.len() as f64)
}

pub fn mse_grad(pred: &Tensor3, target: &Tensor3) -> Result<Tensor3> {
    pred.same_shape(target)?;
    let scale = 2.0 / pred.len() as f64;
    let data = pred.data().iter().zip(target.data()).map(|(p, t)| scale * (p - t)).collect();
    Tensor3::from_vec(pred.height(), pred.width(), pred.channels(), data)
}
