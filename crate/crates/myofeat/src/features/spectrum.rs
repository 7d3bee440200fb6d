//! One-sided periodogram used by the spectral descriptors.

use crate::dataio::SAMPLE_RATE_HZ;

/// One-sided power spectrum of a real window.
///
/// Bin `k` holds `|X_k|^2 / n` at frequency `k * fs / n`; bins run from DC
/// to the last index at or below Nyquist (`n/2`, inclusive). Powers are not
/// doubled, so the total over bins of a pure cosine of amplitude `A` at an
/// exact bin is `A^2 * n / 4` — half the signal's sum of squares.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Power per bin.
    pub power: Vec<f64>,
    /// Bin spacing in Hz.
    pub df: f64,
}

impl Spectrum {
    /// Center frequency of bin `k` in Hz.
    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Sum of `power * freq^m` over all bins.
    pub fn moment(&self, m: i32) -> f64 {
        self.power
            .iter()
            .enumerate()
            .map(|(k, &p)| p * self.freq(k).powi(m))
            .sum()
    }

    /// Sum of power over bins whose center lies in `[lo, hi)` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.power
            .iter()
            .enumerate()
            .filter(|&(k, _)| {
                let f = self.freq(k);
                f >= lo && f < hi
            })
            .map(|(_, &p)| p)
            .sum()
    }
}

/// Computes the one-sided periodogram of `samples` at the fixed acquisition
/// rate. Uses a direct transform with a precomputed twiddle table; window
/// lengths here are small enough that this costs well under a millisecond.
pub fn periodogram(samples: &[f64]) -> Spectrum {
    periodogram_at(samples, SAMPLE_RATE_HZ)
}

/// Periodogram with an explicit sample rate (for tests on synthetic grids).
pub fn periodogram_at(samples: &[f64], sample_rate_hz: f64) -> Spectrum {
    let n = samples.len();
    if n == 0 {
        return Spectrum {
            power: Vec::new(),
            df: 0.0,
        };
    }
    let bins = n / 2 + 1;
    // Exact twiddles: index (k*i) mod n avoids accumulating phase error.
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let cos_tab: Vec<f64> = (0..n).map(|i| (step * i as f64).cos()).collect();
    let sin_tab: Vec<f64> = (0..n).map(|i| (step * i as f64).sin()).collect();
    let mut power = Vec::with_capacity(bins);
    for k in 0..bins {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let idx = (k * i) % n;
            re += x * cos_tab[idx];
            im -= x * sin_tab[idx];
        }
        power.push((re * re + im * im) / n as f64);
    }
    Spectrum {
        power,
        df: sample_rate_hz / n as f64,
    }
}
