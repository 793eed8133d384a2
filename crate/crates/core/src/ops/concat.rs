use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `a` occupies channels `[0, Ca)` and `b` occupies `[Ca, Ca + Cb)`.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (da, db) = (a.dims(), b.dims());
    if (da.batch, da.height, da.width) != (db.batch, db.height, db.width) {
        return Err(Error::shape("concat_channels", &a.shape(), &b.shape()));
    }
    let mut out = Tensor::zeros([da.batch, da.channels + db.channels, da.height, da.width]);
    let na = a.sample(0).len();
    for s in 0..da.batch {
        let dst = out.sample_mut(s);
        dst[..na].copy_from_slice(a.sample(s));
        dst[na..].copy_from_slice(b.sample(s));
    }
    Ok(out)
}

/// Inverse of [`concat_channels`]: channels `[0, at)` and `[at, C)`.
pub fn split_channels<T: Scalar>(t: &Tensor<T>, at: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let d = t.dims();
    if at > d.channels {
        return Err(Error::shape("split_channels", &t.shape(), &[at]));
    }
    let mut a = Tensor::zeros([d.batch, at, d.height, d.width]);
    let mut b = Tensor::zeros([d.batch, d.channels - at, d.height, d.width]);
    let na = at * d.plane();
    for s in 0..d.batch {
        let src = t.sample(s);
        a.sample_mut(s).copy_from_slice(&src[..na]);
        b.sample_mut(s).copy_from_slice(&src[na..]);
    }
    Ok((a, b))
}
