use crate::config::SseConfig;

/// `out[2i] = sin(s / w_i)`, `out[2i + 1] = cos(s / w_i)`.
pub fn sse_embed(s: f64, cfg: &SseConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(cfg.dim);
    for w in cfg.wavelengths() {
        let (sin, cos) = (s / w).sin_cos();
        out.push(sin);
        out.push(cos);
    }
    out
}

/// Bucket of a key-minus-query offset: exact for small offsets, then
/// logarithmic up to `max_distance`. Bidirectional buckets split the range
/// between keys before and after the query.
pub fn relative_position_bucket(relative: i64, bidirectional: bool, num_buckets: usize, max_distance: usize) -> usize {
    let mut buckets = num_buckets as i64;
    let mut base = 0;
    let n = if bidirectional {
        buckets /= 2;
        if relative > 0 {
            base = buckets;
        }
        relative.abs()
    } else {
        (-relative).max(0)
    };
    let max_exact = buckets / 2;
    if n < max_exact {
        return (base + n) as usize;
    }
    let scale = (buckets - max_exact) as f64 / (max_distance as f64 / max_exact as f64).ln();
    let large = max_exact + ((n as f64 / max_exact as f64).ln() * scale) as i64;
    (base + large.min(buckets - 1)) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_alternating() {
        let v = sse_embed(0.0, &SseConfig::default());
        for (i, x) in v.iter().enumerate() {
            assert_eq!(*x, if i % 2 == 0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn buckets() {
        assert_eq!(relative_position_bucket(0, true, 32, 128), 0);
        assert_eq!(relative_position_bucket(3, true, 32, 128), 19);
        assert_eq!(relative_position_bucket(-3, true, 32, 128), 3);
        assert_eq!(relative_position_bucket(500, true, 32, 128), 31);
        assert_eq!(relative_position_bucket(-500, true, 32, 128), 15);
        assert_eq!(relative_position_bucket(-5, false, 32, 128), 5);
        assert_eq!(relative_position_bucket(5, false, 32, 128), 0);
        assert_eq!(relative_position_bucket(-1000, false, 32, 128), 31);
        let mut last = 0;
        for d in 0..300 {
            let b = relative_position_bucket(-d, false, 32, 128);
            assert!(b >= last);
            last = b;
        }
    }
}
