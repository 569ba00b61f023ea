//! Data-movement ops: permute and concatenation.

use crate::real::Real;
use crate::tensor::Tensor;

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Reorders axes: output axis `i` is input axis `perm[i]`.
pub fn permute_forward<R: Real>(x: &Tensor<R>, perm: &[usize]) -> Tensor<R> {
    let in_shape = x.shape();
    debug_assert_eq!(perm.len(), in_shape.len());
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let in_strides = strides(in_shape);
    let out_strides_for_in: Vec<usize> = {
        // stride of each INPUT axis in the OUTPUT layout
        let os = strides(&out_shape);
        let mut m = vec![0usize; in_shape.len()];
        for (out_axis, &in_axis) in perm.iter().enumerate() {
            m[in_axis] = os[out_axis];
        }
        m
    };
    let mut out = Tensor::zeros(&out_shape);
    let od = out.data_mut();
    let xd = x.data();
    let n = xd.len();
    let rank = in_shape.len();
    let mut idx = vec![0usize; rank];
    for (flat, &v) in xd.iter().enumerate().take(n) {
        let mut rem = flat;
        let mut out_pos = 0;
        for a in 0..rank {
            idx[a] = rem / in_strides[a];
            rem %= in_strides[a];
            out_pos += idx[a] * out_strides_for_in[a];
        }
        od[out_pos] = v;
    }
    out
}

pub fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Concatenates along `axis`; all other extents must match.
pub fn concat_forward<R: Real>(parts: &[&Tensor<R>], axis: usize) -> Tensor<R> {
    let first = parts[0].shape();
    let mut out_shape = first.to_vec();
    out_shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    let outer: usize = first[..axis].iter().product();
    let inner: usize = first[axis + 1..].iter().product();
    let mut out = Tensor::zeros(&out_shape);
    let total_axis = out_shape[axis];
    let od = out.data_mut();
    let mut offset = 0usize;
    for p in parts {
        let extent = p.shape()[axis];
        for o in 0..outer {
            let src = &p.data()[o * extent * inner..(o + 1) * extent * inner];
            let dst_base = (o * total_axis + offset) * inner;
            od[dst_base..dst_base + extent * inner].copy_from_slice(src);
        }
        offset += extent;
    }
    out
}

/// Splits `grad` back into per-part gradients matching `concat_forward`.
pub fn concat_backward<R: Real>(
    grad: &Tensor<R>,
    parts: &[&Tensor<R>],
    axis: usize,
) -> Vec<Tensor<R>> {
    let first = parts[0].shape();
    let outer: usize = first[..axis].iter().product();
    let inner: usize = first[axis + 1..].iter().product();
    let total_axis = grad.shape()[axis];
    let mut out = Vec::with_capacity(parts.len());
    let mut offset = 0usize;
    for p in parts {
        let extent = p.shape()[axis];
        let mut g = Tensor::zeros(&p.shape().to_vec());
        for o in 0..outer {
            let src_base = (o * total_axis + offset) * inner;
            g.data_mut()[o * extent * inner..(o + 1) * extent * inner]
                .copy_from_slice(&grad.data()[src_base..src_base + extent * inner]);
        }
        offset += extent;
        out.push(g);
    }
    out
}
