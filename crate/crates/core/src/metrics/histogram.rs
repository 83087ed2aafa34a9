use super::MetricsError;

/// Uniform bins over `[lo, hi)`; values outside land in the edge bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<f64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins >= 1 && lo < hi, "histogram needs bins >= 1 and lo < hi");
        Self {
            lo,
            hi,
            counts: vec![0.0; bins],
        }
    }

    /// Bins for the integers `0..n`.
    pub fn categorical(n: usize) -> Self {
        Self::new(0.0, n as f64, n)
    }

    pub fn from_values(lo: f64, hi: f64, bins: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let mut h = Self::new(lo, hi, bins);
        for v in values {
            h.add(v);
        }
        h
    }

    pub fn bin_of(&self, value: f64) -> usize {
        let n = self.counts.len();
        let t = ((value - self.lo) / (self.hi - self.lo) * n as f64).floor();
        if t.is_nan() || t < 0.0 {
            0
        } else {
            (t as usize).min(n - 1)
        }
    }

    pub fn add(&mut self, value: f64) {
        let b = self.bin_of(value);
        self.counts[b] += 1.0;
    }

    pub fn add_index(&mut self, index: usize) {
        let b = index.min(self.counts.len() - 1);
        self.counts[b] += 1.0;
    }

    pub fn add_weight(&mut self, index: usize, weight: f64) {
        self.counts[index] += weight;
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Probability mass per bin, or `None` when nothing was counted.
    pub fn masses(&self) -> Option<Vec<f64>> {
        let t = self.total();
        (t > 0.0).then(|| self.counts.iter().map(|c| c / t).collect())
    }

    pub fn same_binning(&self, other: &Histogram) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.counts.len() == other.counts.len()
    }
}

fn kl_to_mid(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence with base-2 logarithms, in `[0, 1]`.
pub fn js_divergence(p: &Histogram, q: &Histogram) -> Result<f64, MetricsError> {
    if !p.same_binning(q) {
        return Err(MetricsError::BinningMismatch);
    }
    let (Some(pm), Some(qm)) = (p.masses(), q.masses()) else {
        return Err(MetricsError::EmptyHistogram);
    };
    Ok(js_masses(&pm, &qm))
}

pub(crate) fn js_masses(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl_to_mid(p, &m) + 0.5 * kl_to_mid(q, &m);
    js.clamp(0.0, 1.0)
}
