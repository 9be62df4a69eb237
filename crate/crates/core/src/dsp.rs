//! Filter and window primitives shared by the audio ops, the defenses, and
//! the synthetic corpus generator: RBJ biquads, Butterworth cascades,
//! zero-phase filtering, Kaiser-windowed sinc interpolation.

use std::f64::consts::PI;

/// One second-order IIR section, normalized so a0 == 1.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// RBJ cookbook low-pass section with corner `fc` and quality `q`.
    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * PI * fc / fs;
        let (sin_w0, cos_w0) = w0.sin_cos();
        let alpha = sin_w0 / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 - cos_w0) / 2.0 / a0,
            b1: (1.0 - cos_w0) / a0,
            b2: (1.0 - cos_w0) / 2.0 / a0,
            a1: -2.0 * cos_w0 / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// RBJ cookbook high-pass section with corner `fc` and quality `q`.
    pub fn highpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * PI * fc / fs;
        let (sin_w0, cos_w0) = w0.sin_cos();
        let alpha = sin_w0 / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cos_w0) / 2.0 / a0,
            b1: -(1.0 + cos_w0) / a0,
            b2: (1.0 + cos_w0) / 2.0 / a0,
            a1: -2.0 * cos_w0 / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// RBJ cookbook constant-skirt band-pass section centered on `fc`.
    pub fn bandpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * PI * fc / fs;
        let (sin_w0, cos_w0) = w0.sin_cos();
        let alpha = sin_w0 / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: sin_w0 / 2.0 / a0,
            b1: 0.0,
            b2: -sin_w0 / 2.0 / a0,
            a1: -2.0 * cos_w0 / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// Causal single pass, direct form II transposed.
    pub fn run(&self, x: &[f64]) -> Vec<f64> {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut y = Vec::with_capacity(x.len());
        for &v in x {
            let out = self.b0 * v + s1;
            s1 = self.b1 * v - self.a1 * out + s2;
            s2 = self.b2 * v - self.a2 * out;
            y.push(out);
        }
        y
    }
}

/// Section quality factors realizing an even-order Butterworth response as a
/// cascade of identical-corner biquads: Q_k = 1 / (2 sin((2k-1)π / 2n)).
pub(crate) fn butterworth_qs(order: usize) -> Vec<f64> {
    assert!(order >= 2 && order % 2 == 0, "cascade needs an even order");
    let n = order as f64;
    (1..=order / 2)
        .map(|k| 1.0 / (2.0 * ((2 * k - 1) as f64 * PI / (2.0 * n)).sin()))
        .collect()
}

pub(crate) fn butterworth_lowpass(fc: f64, fs: f64, order: usize) -> Vec<Biquad> {
    butterworth_qs(order)
        .into_iter()
        .map(|q| Biquad::lowpass(fc, fs, q))
        .collect()
}

pub(crate) fn butterworth_highpass(fc: f64, fs: f64, order: usize) -> Vec<Biquad> {
    butterworth_qs(order)
        .into_iter()
        .map(|q| Biquad::highpass(fc, fs, q))
        .collect()
}

/// Causal single pass through a cascade of sections.
pub(crate) fn filt(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in sections {
        y = s.run(&y);
    }
    y
}

/// Zero-phase forward-backward pass: squares the magnitude response and
/// cancels the phase. No edge padding; callers measure away from edges.
pub(crate) fn filtfilt(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let mut y = filt(sections, x);
    y.reverse();
    y = filt(sections, &y);
    y.reverse();
    y
}

/// Zeroth-order modified Bessel function of the first kind, power series.
pub(crate) fn bessel_i0(z: f64) -> f64 {
    let half = z / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 1.0;
    loop {
        term *= (half / m) * (half / m);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        m += 1.0;
    }
}

/// Kaiser window evaluated at normalized position `x` in [-1, 1].
pub(crate) fn kaiser(x: f64, beta: f64) -> f64 {
    if x.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - x * x).sqrt()) / bessel_i0(beta)
}

/// Normalized sinc: sin(πx) / (πx).
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Root-mean-square of a slice; 0 for an empty slice.
pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
