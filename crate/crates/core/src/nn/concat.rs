use crate::tensor::{Result, Tensor, TensorError};

/// Joins rank-1 tensors end to end, in argument order.
pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(TensorError::mismatch("concat", "no parts given"));
    }
    let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for (i, p) in parts.iter().enumerate() {
        if p.rank() != 1 {
            return Err(TensorError::rank(&format!("concat part {i}"), 1, p.rank()));
        }
        data.extend_from_slice(p.data());
    }
    Ok(Tensor::from_vec(data))
}

/// Slices an upstream gradient back into per-part gradients.
pub fn concat_backward(upstream: &Tensor, part_lengths: &[usize]) -> Result<Vec<Tensor>> {
    upstream.expect_rank("concat_backward", 1)?;
    let total: usize = part_lengths.iter().sum();
    if total != upstream.len() {
        return Err(TensorError::mismatch(
            "concat_backward",
            format!("parts sum to {total}, upstream has {}", upstream.len()),
        ));
    }
    let mut out = Vec::with_capacity(part_lengths.len());
    let mut start = 0;
    for &len in part_lengths {
        out.push(Tensor::new(&[len], upstream.data()[start..start + len].to_vec())?);
        start += len;
    }
    Ok(out)
}
