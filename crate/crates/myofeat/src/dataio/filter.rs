//! Butterworth band-pass design and causal application.
//!
//! The analog low-pass prototype is mapped to a band-pass transfer function
//! and discretized with the bilinear transform; both corner frequencies are
//! prewarped so the digital -3 dB points land exactly on the requested
//! corners. The result is a cascade of biquad sections applied in a single
//! causal pass from zero initial state.

use super::{DataError, Recording};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Band-pass design parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Order of the low-pass prototype; the band-pass has twice as many poles.
    pub order: usize,
    pub sample_rate_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            low_hz: 20.0,
            high_hz: 495.0,
            order: 4,
            sample_rate_hz: super::SAMPLE_RATE_HZ,
        }
    }
}

/// One second-order section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Designed filter: a cascade of biquads with unity gain at the band center.
#[derive(Debug, Clone)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    spec: FilterSpec,
}

impl FilterSpec {
    pub fn design(&self) -> Result<BandpassFilter, DataError> {
        let fs = self.sample_rate_hz;
        if !(fs > 0.0) {
            return Err(DataError::FilterDesign(format!(
                "sample rate must be positive, got {fs}"
            )));
        }
        if self.order == 0 {
            return Err(DataError::FilterDesign("order must be >= 1".into()));
        }
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz && self.high_hz < fs / 2.0) {
            return Err(DataError::FilterDesign(format!(
                "need 0 < low ({}) < high ({}) < Nyquist ({})",
                self.low_hz,
                self.high_hz,
                fs / 2.0
            )));
        }

        // Prewarped analog corner frequencies (rad/s) for the bilinear map.
        let fs2 = 2.0 * fs;
        let wl = fs2 * (PI * self.low_hz / fs).tan();
        let wh = fs2 * (PI * self.high_hz / fs).tan();
        let w0 = (wl * wh).sqrt();
        let bw = wh - wl;

        let n = self.order;
        let mut sections = Vec::with_capacity(n);

        // Low-pass prototype poles on the unit circle, upper half-plane only;
        // each maps to two band-pass poles via s^2 - p*bw*s + w0^2 = 0 and
        // each of those stands for itself plus its conjugate.
        for k in 0..n / 2 {
            let theta = PI / 2.0 + PI * (2 * k + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            for s in bandpass_pole_pair(p, bw, w0) {
                let z = bilinear(s, fs2);
                sections.push(conjugate_pair_section(z)?);
            }
        }
        if n % 2 == 1 {
            // The real prototype pole at -1 maps to one conjugate (or real)
            // band-pass pole pair forming a single section.
            let [s1, s2] = bandpass_pole_pair(Complex64::new(-1.0, 0.0), bw, w0);
            let z1 = bilinear(s1, fs2);
            let z2 = bilinear(s2, fs2);
            if z1.im.abs() > 1e-12 {
                sections.push(conjugate_pair_section(z1)?);
            } else {
                sections.push(real_pair_section(z1.re, z2.re)?);
            }
        }

        let mut filter = BandpassFilter {
            sections,
            spec: *self,
        };

        // Normalize to unity gain at the (warped) geometric band center.
        let f_center = fs / PI * (w0 / fs2).atan();
        let g = filter.magnitude_at(f_center);
        if !(g.is_finite() && g > 0.0) {
            return Err(DataError::FilterDesign(
                "degenerate response at band center".into(),
            ));
        }
        for b in filter.sections[0].b.iter_mut() {
            *b /= g;
        }
        Ok(filter)
    }
}

/// Roots of `s^2 - p*bw*s + w0^2`, the band-pass images of prototype pole `p`.
fn bandpass_pole_pair(p: Complex64, bw: f64, w0: f64) -> [Complex64; 2] {
    let half = p * bw * 0.5;
    let disc = (half * half - Complex64::new(w0 * w0, 0.0)).sqrt();
    [half + disc, half - disc]
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (Complex64::new(fs2, 0.0) + s) / (Complex64::new(fs2, 0.0) - s)
}

/// Section with poles `z` and `conj(z)` and zeros at +1 and -1.
fn conjugate_pair_section(z: Complex64) -> Result<Biquad, DataError> {
    let radius = z.norm();
    if radius >= 1.0 {
        return Err(DataError::FilterDesign(format!(
            "unstable pole radius {radius} after discretization"
        )));
    }
    Ok(Biquad {
        b: [1.0, 0.0, -1.0],
        a: [-2.0 * z.re, radius * radius],
    })
}

/// Section with two real poles and zeros at +1 and -1.
fn real_pair_section(z1: f64, z2: f64) -> Result<Biquad, DataError> {
    if z1.abs() >= 1.0 || z2.abs() >= 1.0 {
        return Err(DataError::FilterDesign(format!(
            "unstable pole radius {} after discretization",
            z1.abs().max(z2.abs())
        )));
    }
    Ok(Biquad {
        b: [1.0, 0.0, -1.0],
        a: [-(z1 + z2), z1 * z2],
    })
}

impl BandpassFilter {
    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Causal single pass from zero state (transposed direct form II).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.apply_in_place(&mut y);
        y
    }

    pub fn apply_in_place(&self, y: &mut [f64]) {
        for s in &self.sections {
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for v in y.iter_mut() {
                let x = *v;
                let out = s.b[0] * x + d1;
                d1 = s.b[1] * x - s.a[0] * out + d2;
                d2 = s.b[2] * x - s.a[1] * out;
                *v = out;
            }
        }
    }

    /// Filters every channel of a recording independently.
    pub fn filter_recording(&self, rec: &Recording) -> Recording {
        let mut out = rec.clone();
        for mut row in out.samples.rows_mut() {
            let slice = row.as_slice_mut().expect("row-major recording");
            self.apply_in_place(slice);
        }
        out
    }

    /// Magnitude of the cascade's frequency response at `f_hz`.
    pub fn magnitude_at(&self, f_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / self.spec.sample_rate_hz;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &self.sections {
            let num = Complex64::new(s.b[0], 0.0) + z1 * s.b[1] + z2 * s.b[2];
            let den = Complex64::new(1.0, 0.0) + z1 * s.a[0] + z2 * s.a[1];
            h *= num / den;
        }
        h.norm()
    }
}
