use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Mean squared error and its gradient `2(pred − target)/N`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    target.expect_dims("mse_loss", pred.dims())?;
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let mut grad = Tensor::zeros(pred.dims());
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p.to_f64_lossy() - t.to_f64_lossy();
        sum += d * d;
        *g = T::from_f64_lossy(2.0 * d / n);
    }
    Ok((sum / n, grad))
}
