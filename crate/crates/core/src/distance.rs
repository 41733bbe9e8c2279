//! Euclidean distance kernels. Inputs are `f32`, accumulation is `f64`.

/// Squared L2 distance computed from the coordinate differences.
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

#[inline]
pub fn l2(a: &[f32], b: &[f32]) -> f64 {
    libm::sqrt(squared_l2(a, b))
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

#[inline]
pub fn squared_norm(a: &[f32]) -> f64 {
    dot(a, a)
}
