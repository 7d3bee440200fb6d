//! Implementations of the 56 extraction methods.
//!
//! All methods are pure functions of one channel of window samples. They
//! never return non-finite values: degenerate inputs (constant or all-zero
//! windows, empty spectra) map to zero by convention, except HIST which puts
//! every sample in its center bin.

use std::cell::OnceCell;
use std::f64::consts::PI;

use super::spectrum::{periodogram, Spectrum};
use super::{FeatureConfig, Method};

/// Per-channel evaluation context: caches differences and the periodogram so
/// evaluating the whole registry touches each derived series once.
pub(super) struct Ctx<'a> {
    x: &'a [f64],
    d1: Vec<f64>,
    d2: Vec<f64>,
    spectrum: OnceCell<Spectrum>,
}

impl<'a> Ctx<'a> {
    pub(super) fn new(x: &'a [f64]) -> Self {
        let d1: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
        Ctx {
            x,
            d1,
            d2,
            spectrum: OnceCell::new(),
        }
    }

    fn spec(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| periodogram(self.x))
    }
}

pub(super) fn compute(method: Method, ctx: &Ctx<'_>, cfg: &FeatureConfig) -> Vec<f64> {
    let x = ctx.x;
    let d1 = ctx.d1.as_slice();
    match method {
        // Signal amplitude and power.
        Method::Afb => vec![first_burst_amplitude(x)],
        Method::Damv => vec![mav(d1)],
        Method::Dasdv => vec![rms(d1)],
        Method::Dld => vec![log_detector(d1)],
        Method::Dtm => vec![abs_third_moment(d1)],
        Method::Dv => vec![v_order(d1, cfg.v_order)],
        Method::Dvarv => vec![var(d1)],
        Method::Iemg => vec![abs_sum(x)],
        Method::Ld => vec![log_detector(x)],
        Method::M2 => vec![sq_sum(d1)],
        Method::Mav => vec![mav(x)],
        Method::Max => vec![x.iter().fold(0.0f64, |m, &v| m.max(v.abs()))],
        Method::Mhw => hamming_segment_energies(x),
        Method::Mmav1 => vec![mmav1(x)],
        Method::Mmav2 => vec![mmav2(x)],
        Method::Mnp => {
            let s = ctx.spec();
            let bins = s.len().max(1) as f64;
            vec![s.moment(0) / bins]
        }
        Method::Mtw => trapezoid_segment_energies(x),
        Method::Rms => vec![rms(x)],
        Method::Sm => vec![ctx.spec().moment(2)],
        Method::Ssi => vec![sq_sum(x)],
        Method::Tm => vec![abs_third_moment(x)],
        Method::Ttp => vec![ctx.spec().moment(0)],
        Method::V => vec![v_order(x, cfg.v_order)],
        Method::Var => vec![var(x)],
        Method::Wl => vec![abs_sum(d1)],
        // Frequency information.
        Method::Fr => {
            let s = ctx.spec();
            let lo = s.band_power(cfg.fr_low_hz.0, cfg.fr_low_hz.1);
            let hi = s.band_power(cfg.fr_high_hz.0, cfg.fr_high_hz.1);
            vec![if hi > 0.0 { lo / hi } else { 0.0 }]
        }
        Method::Mdf => vec![median_frequency(ctx.spec())],
        Method::Mnf => {
            let s = ctx.spec();
            let m0 = s.moment(0);
            vec![if m0 > 0.0 { s.moment(1) / m0 } else { 0.0 }]
        }
        Method::Ssc => {
            let count = (1..x.len().saturating_sub(1))
                .filter(|&i| (x[i] - x[i - 1]) * (x[i] - x[i + 1]) > cfg.ssc_threshold)
                .count();
            vec![count as f64]
        }
        Method::Zc => {
            let count = x
                .windows(2)
                .filter(|w| w[0] * w[1] < 0.0 && (w[0] - w[1]).abs() >= cfg.zc_threshold)
                .count();
            vec![count as f64]
        }
        // Nonlinear complexity.
        Method::Apen => {
            let sd = pop_std(x);
            vec![if sd > 0.0 {
                approx_entropy(x, 2, 0.2 * sd)
            } else {
                0.0
            }]
        }
        Method::Bc => vec![box_count_fd(x)],
        Method::Katz => vec![katz_fd(x)],
        Method::Mfl => {
            let s = sq_sum(d1);
            vec![if s > 0.0 { s.sqrt().log10() } else { 0.0 }]
        }
        Method::Sampen => {
            let sd = pop_std(x);
            vec![if sd > 0.0 {
                sample_entropy(x, 2, 0.2 * sd)
            } else {
                0.0
            }]
        }
        Method::Wamp => {
            let count = d1.iter().filter(|d| d.abs() > cfg.wamp_threshold).count();
            vec![count as f64]
        }
        // Time-series modeling.
        Method::Ar => ar_coeffs(x, 4),
        Method::Cc => cepstral_from_ar(&ar_coeffs(x, 4)),
        Method::Dar => ar_coeffs(d1, 4),
        Method::Dcc => cepstral_from_ar(&ar_coeffs(d1, 4)),
        Method::Dfa => vec![dfa_alpha(x)],
        Method::Psr => vec![peak_spectrum_ratio(ctx.spec(), 5)],
        Method::Snr => {
            let s = ctx.spec();
            let band = (cfg.fr_low_hz.0, cfg.fr_high_hz.1);
            let inside = s.band_power(band.0, band.1);
            let outside = s.moment(0) - inside;
            vec![db_ratio(inside, outside)]
        }
        // Unique methods.
        Method::Ce => vec![hurst_exponent(x).map_or(0.0, |h| 2.0 * h + 1.0)],
        Method::Dpr => vec![density_peak_ratio(ctx.spec(), cfg)],
        Method::Hist => histogram3(x, cfg.hist_sigma_span).to_vec(),
        Method::Kurt => {
            let m2 = central_moment(x, 2);
            vec![if m2 > 0.0 {
                central_moment(x, 4) / (m2 * m2)
            } else {
                0.0
            }]
        }
        Method::Mavs => {
            let half = x.len() / 2;
            vec![mav(&x[half..]) - mav(&x[..half])]
        }
        Method::Ohm => {
            let s = ctx.spec();
            let (m0, m1, m2) = (s.moment(0), s.moment(1), s.moment(2));
            vec![if m0 > 0.0 && m1 > 0.0 {
                (m2 * m0).sqrt() / m1
            } else {
                0.0
            }]
        }
        Method::Pkf => {
            let s = ctx.spec();
            let k = argmax(&s.power).unwrap_or(0);
            vec![s.freq(k)]
        }
        Method::Psdfd => vec![box_count_fd(&ctx.spec().power)],
        Method::Skew => {
            let m2 = central_moment(x, 2);
            vec![if m2 > 0.0 {
                central_moment(x, 3) / m2.powf(1.5)
            } else {
                0.0
            }]
        }
        Method::Smr => {
            let s = ctx.spec();
            let signal = s.band_power(cfg.fr_low_hz.0, cfg.fr_high_hz.1);
            let artifact = s.band_power(0.0, cfg.fr_low_hz.0);
            vec![db_ratio(signal, artifact)]
        }
        Method::Tdpsd => tdpsd(ctx),
        Method::Vcf => {
            let s = ctx.spec();
            let m0 = s.moment(0);
            vec![if m0 > 0.0 {
                let mc = s.moment(1) / m0;
                s.moment(2) / m0 - mc * mc
            } else {
                0.0
            }]
        }
        Method::Vfd => vec![hurst_exponent(x).map_or(0.0, |h| 2.0 - h)],
    }
}

// --- scalar helpers ---

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn abs_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn sq_sum(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn mav(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        abs_sum(x) / x.len() as f64
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (sq_sum(x) / x.len() as f64).sqrt()
    }
}

/// Power variance convention: second raw moment over `n - 1`.
fn var(x: &[f64]) -> f64 {
    if x.len() < 2 {
        0.0
    } else {
        sq_sum(x) / (x.len() - 1) as f64
    }
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mu = mean(x);
    x.iter().map(|v| (v - mu).powi(k)).sum::<f64>() / x.len() as f64
}

fn pop_std(x: &[f64]) -> f64 {
    central_moment(x, 2).sqrt()
}

fn abs_third_moment(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|v| v.powi(3)).sum::<f64>() / x.len() as f64).abs()
    }
}

fn v_order(x: &[f64], v: f64) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        (x.iter().map(|s| s.abs().powf(v)).sum::<f64>() / x.len() as f64).powf(1.0 / v)
    }
}

/// Geometric mean of magnitudes; the epsilon keeps exact zeros finite.
fn log_detector(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v.abs() + 1e-12).ln()).sum();
    (s / x.len() as f64).exp()
}

fn mmav1(x: &[f64]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let s: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let pos = (i + 1) as f64;
            let w = if pos >= 0.25 * nf && pos <= 0.75 * nf {
                1.0
            } else {
                0.5
            };
            w * v.abs()
        })
        .sum();
    s / nf
}

fn mmav2(x: &[f64]) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let s: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let pos = (i + 1) as f64;
            let w = if pos < 0.25 * nf {
                4.0 * pos / nf
            } else if pos <= 0.75 * nf {
                1.0
            } else {
                4.0 * (nf - pos) / nf
            };
            w * v.abs()
        })
        .sum();
    s / nf
}

fn argmax(x: &[f64]) -> Option<usize> {
    if x.is_empty() {
        return None;
    }
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    let _ = x[best];
    Some(best)
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Least-squares slope of `ys` against `xs`; zero when the abscissa is flat.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn db_ratio(num: f64, den: f64) -> f64 {
    if num > 0.0 && den > 0.0 {
        10.0 * (num / den).log10()
    } else {
        0.0
    }
}

// --- windowed energies ---

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|j| 0.54 - 0.46 * (2.0 * PI * j as f64 / (len as f64 - 1.0)).cos())
        .collect()
}

/// Boundaries splitting `n` samples into three near-equal segments.
fn thirds(n: usize) -> [usize; 4] {
    let at = |k: usize| ((k * n) as f64 / 3.0).round() as usize;
    [0, at(1), at(2), n]
}

/// Energy of each third after multiplying by a Hamming window.
fn hamming_segment_energies(x: &[f64]) -> Vec<f64> {
    let b = thirds(x.len());
    (0..3)
        .map(|s| {
            let seg = &x[b[s]..b[s + 1]];
            let w = hamming(seg.len());
            seg.iter().zip(&w).map(|(v, wi)| (v * wi).powi(2)).sum()
        })
        .collect()
}

/// Trapezoid-weighted energy of each third: quarter-length linear ramps at
/// both ends of the segment, flat in between, applied to squared samples.
fn trapezoid_segment_energies(x: &[f64]) -> Vec<f64> {
    let b = thirds(x.len());
    (0..3)
        .map(|s| {
            let seg = &x[b[s]..b[s + 1]];
            let len = seg.len();
            if len == 0 {
                return 0.0;
            }
            let ramp = (len / 4).max(1) as f64;
            seg.iter()
                .enumerate()
                .map(|(j, v)| {
                    let up = (j + 1) as f64 / ramp;
                    let down = (len - j) as f64 / ramp;
                    up.min(down).min(1.0) * v * v
                })
                .sum()
        })
        .collect()
}

/// Amplitude of the first burst: the magnitude envelope is a Hamming-weighted
/// 31-sample moving average; the value at its first local maximum is
/// returned, falling back to the envelope peak when the envelope is monotone.
fn first_burst_amplitude(x: &[f64]) -> f64 {
    const M: usize = 31;
    let n = x.len();
    if n < M {
        return x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    }
    let w = hamming(M);
    let wsum: f64 = w.iter().sum();
    let h = M / 2;
    let env: Vec<f64> = (h..n - h)
        .map(|i| {
            w.iter()
                .enumerate()
                .map(|(j, wi)| wi * x[i + j - h].abs())
                .sum::<f64>()
                / wsum
        })
        .collect();
    for i in 1..env.len().saturating_sub(1) {
        if env[i] > env[i - 1] && env[i] >= env[i + 1] {
            return env[i];
        }
    }
    env.iter().fold(0.0f64, |m, &v| m.max(v))
}

// --- spectral helpers ---

/// Frequency below which half the total power lies, linearly interpolated
/// between bin centers.
fn median_frequency(s: &Spectrum) -> f64 {
    let total = s.moment(0);
    if total <= 0.0 {
        return 0.0;
    }
    let target = total / 2.0;
    let mut cum = 0.0;
    for (k, &p) in s.power.iter().enumerate() {
        let prev = cum;
        cum += p;
        if cum >= target {
            if k == 0 || p <= 0.0 {
                return s.freq(k);
            }
            return s.freq(k - 1) + s.df * (target - prev) / p;
        }
    }
    s.freq(s.len().saturating_sub(1))
}

/// Share of total power within `half_width` bins of the peak bin.
fn peak_spectrum_ratio(s: &Spectrum, half_width: usize) -> f64 {
    let total = s.moment(0);
    if total <= 0.0 {
        return 0.0;
    }
    let k0 = argmax(&s.power).unwrap_or(0);
    let lo = k0.saturating_sub(half_width);
    let hi = (k0 + half_width).min(s.len() - 1);
    let local: f64 = s.power[lo..=hi].iter().sum();
    local / total
}

/// Max/min ratio in dB of the 5-bin-smoothed density inside the analysis
/// band.
fn density_peak_ratio(s: &Spectrum, cfg: &FeatureConfig) -> f64 {
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    let smoothed: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(2);
            let hi = (k + 2).min(n - 1);
            s.power[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let band: Vec<f64> = (0..n)
        .filter(|&k| {
            let f = s.freq(k);
            f >= cfg.fr_low_hz.0 && f < cfg.fr_high_hz.1
        })
        .map(|k| smoothed[k])
        .collect();
    if band.is_empty() {
        return 0.0;
    }
    let (lo, hi) = min_max(&band);
    db_ratio(hi, lo)
}

// --- distribution ---

/// Three-bin histogram spanning `mean ± span * std`; samples beyond the span
/// are clamped into the edge bins, so counts always total the window length.
fn histogram3(x: &[f64], span: f64) -> [f64; 3] {
    let n = x.len() as f64;
    let mu = mean(x);
    let sd = pop_std(x);
    if sd <= 0.0 {
        return [0.0, n, 0.0];
    }
    let lo = mu - span * sd;
    let width = 2.0 * span * sd / 3.0;
    let mut bins = [0.0; 3];
    for &v in x {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(2);
        bins[b] += 1.0;
    }
    bins
}

// --- entropies ---

fn sample_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let n = x.len();
    if n <= m + 1 {
        return 0.0;
    }
    // Equal template sets for both lengths keep the ratio well defined.
    let t = n - m;
    let mut long_matches = 0u64;
    let mut short_matches = 0u64;
    for i in 0..t {
        for j in (i + 1)..t {
            let mut d = 0.0f64;
            for k in 0..m {
                d = d.max((x[i + k] - x[j + k]).abs());
            }
            if d <= r {
                short_matches += 1;
                if (x[i + m] - x[j + m]).abs() <= r {
                    long_matches += 1;
                }
            }
        }
    }
    if long_matches == 0 || short_matches == 0 {
        0.0
    } else {
        -((long_matches as f64) / (short_matches as f64)).ln()
    }
}

fn approx_entropy(x: &[f64], m: usize, r: f64) -> f64 {
    let n = x.len();
    if n <= m + 1 {
        return 0.0;
    }
    let phi = |m: usize| -> f64 {
        let t = n + 1 - m;
        let mut total = 0.0;
        for i in 0..t {
            let mut count = 0usize;
            for j in 0..t {
                let mut d = 0.0f64;
                for k in 0..m {
                    d = d.max((x[i + k] - x[j + k]).abs());
                }
                if d <= r {
                    count += 1;
                }
            }
            // Self-match keeps the count positive, so the log is finite.
            total += (count as f64 / t as f64).ln();
        }
        total / t as f64
    };
    phi(m) - phi(m + 1)
}

// --- fractal dimensions ---

/// Box-count dimension of the (time, value) curve normalized to the unit
/// square, over square grids of 2..64 cells per side.
fn box_count_fd(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let (lo, hi) = min_max(y);
    let range = hi - lo;
    if range <= 0.0 {
        return 0.0;
    }
    let mut ln_inv_s = Vec::with_capacity(6);
    let mut ln_boxes = Vec::with_capacity(6);
    for k in 1..=6u32 {
        let cols = 1usize << k;
        let mut col_min = vec![f64::INFINITY; cols];
        let mut col_max = vec![f64::NEG_INFINITY; cols];
        for (i, &v) in y.iter().enumerate() {
            let t = i as f64 / (n - 1) as f64;
            let c = ((t * cols as f64) as usize).min(cols - 1);
            let u = (v - lo) / range;
            col_min[c] = col_min[c].min(u);
            col_max[c] = col_max[c].max(u);
        }
        let cell = 1.0 / cols as f64;
        let mut boxes = 0usize;
        for c in 0..cols {
            if col_min[c].is_finite() {
                let bmin = ((col_min[c] / cell) as usize).min(cols - 1);
                let bmax = ((col_max[c] / cell) as usize).min(cols - 1);
                boxes += bmax - bmin + 1;
            }
        }
        ln_inv_s.push((cols as f64).ln());
        ln_boxes.push((boxes as f64).ln());
    }
    slope(&ln_inv_s, &ln_boxes)
}

fn katz_fd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let length: f64 = x
        .windows(2)
        .map(|w| {
            let dy = w[1] - w[0];
            (1.0 + dy * dy).sqrt()
        })
        .sum();
    let mut extent = 0.0f64;
    for (i, &v) in x.iter().enumerate().skip(1) {
        let dy = v - x[0];
        extent = extent.max(((i * i) as f64 + dy * dy).sqrt());
    }
    if length <= 0.0 || extent <= 0.0 {
        return 0.0;
    }
    let steps = (n - 1) as f64;
    let denom = steps.ln() + (extent / length).ln();
    if denom.abs() < 1e-12 {
        0.0
    } else {
        steps.ln() / denom
    }
}

/// Detrended fluctuation exponent: slope of log fluctuation against log box
/// size over eight geometric sizes between 4 and n/4.
fn dfa_alpha(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 16 {
        return 0.0;
    }
    let mu = mean(x);
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &v in x {
        acc += v - mu;
        profile.push(acc);
    }
    let ln_min = 4.0f64.ln();
    let ln_max = ((n / 4) as f64).ln();
    let mut sizes: Vec<usize> = (0..8)
        .map(|i| (ln_min + (ln_max - ln_min) * i as f64 / 7.0).exp().round() as usize)
        .collect();
    sizes.dedup();
    let mut ln_s = Vec::new();
    let mut ln_f = Vec::new();
    for &s in &sizes {
        let boxes = n / s;
        if boxes == 0 {
            continue;
        }
        let mut ssr = 0.0;
        for b in 0..boxes {
            ssr += line_residual_ss(&profile[b * s..(b + 1) * s]);
        }
        let f = (ssr / (boxes * s) as f64).sqrt();
        if f > 0.0 {
            ln_s.push((s as f64).ln());
            ln_f.push(f.ln());
        }
    }
    if ln_s.len() < 2 {
        return 0.0;
    }
    slope(&ln_s, &ln_f)
}

/// Sum of squared residuals of a least-squares line over local indices.
fn line_residual_ss(y: &[f64]) -> f64 {
    let len = y.len();
    if len < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = (0..len).map(|i| i as f64).collect();
    let b = slope(&xs, y);
    let a = mean(y) - b * mean(&xs);
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            let e = v - (a + b * i as f64);
            e * e
        })
        .sum()
}

/// Hurst estimate from the growth of lag-difference variance at lags
/// 1, 2, 4, 8. `None` when fewer than two lags have positive variance.
fn hurst_exponent(x: &[f64]) -> Option<f64> {
    let n = x.len();
    let mut ln_tau = Vec::new();
    let mut ln_v = Vec::new();
    for &tau in &[1usize, 2, 4, 8] {
        if n <= tau + 1 {
            continue;
        }
        let m = n - tau;
        let v = (0..m).map(|i| (x[i + tau] - x[i]).powi(2)).sum::<f64>() / m as f64;
        if v > 0.0 {
            ln_tau.push((tau as f64).ln());
            ln_v.push(v.ln());
        }
    }
    if ln_tau.len() < 2 {
        return None;
    }
    Some(slope(&ln_tau, &ln_v) / 2.0)
}

// --- parametric models ---

/// Order-`order` linear prediction coefficients from the biased
/// autocorrelation, in the convention `x_t ~ sum_k phi_k x_{t-k}`.
fn ar_coeffs(x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut a = vec![0.0; order];
    if n <= order {
        return a;
    }
    let mut r = vec![0.0; order + 1];
    for (k, rk) in r.iter_mut().enumerate() {
        *rk = x.iter().zip(&x[k..]).map(|(p, q)| p * q).sum::<f64>() / n as f64;
    }
    if r[0] <= 0.0 {
        return a;
    }
    let mut e = r[0];
    for m in 0..order {
        let mut acc = r[m + 1];
        for k in 0..m {
            acc -= a[k] * r[m - k];
        }
        let kappa = acc / e;
        let prev = a.clone();
        a[m] = kappa;
        for k in 0..m {
            a[k] = prev[k] - kappa * prev[m - 1 - k];
        }
        e *= 1.0 - kappa * kappa;
        if e <= f64::EPSILON * r[0] {
            break;
        }
    }
    a
}

/// Cepstral coefficients derived recursively from prediction coefficients:
/// `c_p = a_p + sum_{k<p} (k/p) c_k a_{p-k}`.
fn cepstral_from_ar(a: &[f64]) -> Vec<f64> {
    let p = a.len();
    let mut c = vec![0.0; p];
    for i in 0..p {
        let mut v = a[i];
        for k in 0..i {
            v += (k + 1) as f64 / (i + 1) as f64 * c[k] * a[i - 1 - k];
        }
        c[i] = v;
    }
    c
}

/// Six power-spectrum proxies computed purely in the time domain from the
/// root energies of the signal and its first two differences, each compressed
/// through `s -> s^0.1 / 0.1`.
fn tdpsd(ctx: &Ctx<'_>) -> Vec<f64> {
    let s0 = sq_sum(ctx.x);
    if s0 <= 0.0 {
        return vec![0.0; 6];
    }
    let compress = |s: f64| s.sqrt().powf(0.1) / 0.1;
    let m0 = compress(s0);
    let m2 = compress(sq_sum(&ctx.d1));
    let m4 = compress(sq_sum(&ctx.d2));
    let ln_pos = |v: f64| if v > 0.0 { v.ln() } else { 0.0 };
    let f1 = ln_pos(m0);
    let f2 = ln_pos((m0 - m2).abs());
    let f3 = ln_pos((m0 - m4).abs());
    let sparse_den = ((m0 - m2).abs() * (m0 - m4).abs()).sqrt();
    let f4 = if sparse_den > 0.0 {
        ln_pos(m0 / sparse_den)
    } else {
        0.0
    };
    let irregular_den = (m0 * m4).sqrt();
    let f5 = if irregular_den > 0.0 {
        ln_pos(m2 / irregular_den)
    } else {
        0.0
    };
    let wl1 = abs_sum(&ctx.d1);
    let wl2 = abs_sum(&ctx.d2);
    let f6 = if wl1 > 0.0 && wl2 > 0.0 {
        (wl1 / wl2).ln()
    } else {
        0.0
    };
    vec![f1, f2, f3, f4, f5, f6]
}
