//! Small summary statistics shared by the harness and the checks.

/// One-sided 99% standard normal quantile.
pub const Z_99_ONE_SIDED: f64 = 2.326_347_874_040_841;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean of an autocorrelated series, from the spread
/// of `batches` contiguous batch means. Trailing samples that do not fill a
/// batch are dropped from the error estimate only.
pub fn batch_means_stderr(xs: &[f64], batches: usize) -> f64 {
    let batches = batches.max(2);
    let size = xs.len() / batches;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    (sample_variance(&means) / batches as f64).sqrt()
}

/// Linear-interpolation quantile (type 7) of an unsorted slice. NaN entries
/// sort last.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_quartiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.75), 4.0);
        assert!(median(&[]).is_nan());
        assert!(median(&[1.0, f64::INFINITY, f64::INFINITY]).is_infinite());
    }

    #[test]
    fn batch_means_on_iid_matches_naive() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, crate::rng::Stream::Gradients);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let naive = (sample_variance(&xs) / xs.len() as f64).sqrt();
        let bm = batch_means_stderr(&xs, 100);
        assert!(bm < 3.0 * naive && bm > naive / 3.0);
    }
}
