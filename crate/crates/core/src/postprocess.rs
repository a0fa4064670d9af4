//! Frequency-domain analysis: spectra, resonance peaks, analytical cavity
//! modes and S-parameter extraction.

use crate::constants::C0;
use crate::error::{FdtdError, Result};
use crate::timeseries::TimeSeries;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// One-sided spectrum of each probe channel on a uniform frequency grid
/// from 0 to the Nyquist frequency `1/(2 dt)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freq: Vec<f64>,
    pub names: Vec<String>,
    pub amps: Vec<Vec<Complex64>>,
}

impl Spectrum {
    pub fn channel(&self, name: &str) -> Option<&[Complex64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.amps[i])
    }
}

fn next_pow2(n: usize) -> usize {
    let mut p = 1usize;
    while p < n {
        p <<= 1;
    }
    p
}

fn dft_padded(samples: &[f64], pad_len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(pad_len)
        .collect();
    FftPlanner::new().plan_fft_forward(pad_len).process(&mut buf);
    buf
}

/// Rectangular-window DFT with zero-padding to the next power of two at
/// least four times the sample count.
pub fn frequency_response(series: &TimeSeries) -> Result<Spectrum> {
    if series.len() < 2 {
        return Err(FdtdError::InvalidParameter(
            "spectrum needs at least 2 samples".into(),
        ));
    }
    let n_pad = next_pow2(4 * series.len());
    let df = 1.0 / (n_pad as f64 * series.dt);
    let n_keep = n_pad / 2 + 1;
    let freq: Vec<f64> = (0..n_keep).map(|i| i as f64 * df).collect();
    let amps = series
        .data
        .iter()
        .map(|ch| {
            let full = dft_padded(ch, n_pad);
            full[..n_keep].to_vec()
        })
        .collect();
    Ok(Spectrum {
        freq,
        names: series.names.clone(),
        amps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub frequency: f64,
    pub magnitude: f64,
}

/// Local maxima of the channel magnitude with prominence at least
/// `prominence * global_max`, refined by parabolic interpolation over three
/// bins. When more than `max_count` qualify the strongest are kept, so
/// window sidelobes of a dominant line cannot crowd out weaker resonances;
/// the result is ordered lowest frequency first.
pub fn find_resonances(
    freq: &[f64],
    amps: &[Complex64],
    prominence: f64,
    max_count: usize,
) -> Result<Vec<Resonance>> {
    if !(prominence > 0.0) {
        return Err(FdtdError::InvalidParameter(
            "prominence must be positive".into(),
        ));
    }
    let mag: Vec<f64> = amps.iter().map(|c| c.norm()).collect();
    let n = mag.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let global_max = mag.iter().fold(0.0f64, |a, &b| a.max(b));
    if global_max == 0.0 {
        return Ok(Vec::new());
    }
    let threshold = prominence * global_max;

    let mut peaks: Vec<Resonance> = Vec::new();
    for i in 1..n - 1 {
        if !(mag[i] > mag[i - 1] && mag[i] >= mag[i + 1]) {
            continue;
        }
        // prominence: height above the higher of the two bracketing valleys,
        // walking outward until a taller sample appears on each side
        let mut left_min = mag[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            left_min = left_min.min(mag[j]);
            if mag[j] > mag[i] {
                break;
            }
        }
        let mut right_min = mag[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            right_min = right_min.min(mag[j]);
            if mag[j] > mag[i] {
                break;
            }
        }
        let prom = mag[i] - left_min.max(right_min);
        if prom < threshold {
            continue;
        }
        // parabolic vertex through the three bins around the peak
        let (ym, y0, yp) = (mag[i - 1], mag[i], mag[i + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let delta = if denom.abs() > 0.0 {
            0.5 * (ym - yp) / denom
        } else {
            0.0
        };
        let df = freq[1] - freq[0];
        peaks.push(Resonance {
            frequency: freq[i] + delta.clamp(-0.5, 0.5) * df,
            magnitude: y0 - 0.25 * (ym - yp) * delta,
        });
    }
    peaks.sort_by(|a, b| b.magnitude.partial_cmp(&a.magnitude).unwrap());
    peaks.truncate(max_count);
    peaks.sort_by(|a, b| a.frequency.partial_cmp(&b.frequency).unwrap());
    Ok(peaks)
}

/// Analytical resonance frequencies of a rectangular PEC cavity filled with
/// a uniform dielectric: `f = c/(2 sqrt(eps_r)) * sqrt(sum (m_i/L_i)^2)`.
///
/// Admissible index tuples: 1-D `m >= 1`; 2-D TM `m, n >= 1`; 3-D at least
/// two indices nonzero. Degenerate frequencies are reported once.
pub fn analytical_cavity_modes(lengths: &[f64], eps_r: f64, count: usize) -> Result<Vec<f64>> {
    if lengths.is_empty() || lengths.len() > 3 {
        return Err(FdtdError::InvalidParameter(
            "expected 1 to 3 cavity lengths".into(),
        ));
    }
    if lengths.iter().any(|&l| !(l > 0.0)) || !(eps_r > 0.0) || count < 1 {
        return Err(FdtdError::InvalidParameter(
            "cavity lengths, eps_r and count must be positive".into(),
        ));
    }
    let scale = C0 / (2.0 * eps_r.sqrt());
    let bound = count + 4;
    let mut freqs: Vec<f64> = Vec::new();
    let idx_range = |_a: usize| 0..=bound;
    match lengths.len() {
        1 => {
            for m in 1..=bound {
                freqs.push(scale * m as f64 / lengths[0]);
            }
        }
        2 => {
            for m in 1..=bound {
                for n in 1..=bound {
                    let q = (m as f64 / lengths[0]).powi(2) + (n as f64 / lengths[1]).powi(2);
                    freqs.push(scale * q.sqrt());
                }
            }
        }
        _ => {
            for m in idx_range(0) {
                for n in idx_range(1) {
                    for p in idx_range(2) {
                        let nonzero = [m, n, p].iter().filter(|&&v| v > 0).count();
                        if nonzero < 2 {
                            continue;
                        }
                        let q = (m as f64 / lengths[0]).powi(2)
                            + (n as f64 / lengths[1]).powi(2)
                            + (p as f64 / lengths[2]).powi(2);
                        freqs.push(scale * q.sqrt());
                    }
                }
            }
        }
    }
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    freqs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * *b);
    freqs.truncate(count);
    if freqs.len() < count {
        return Err(FdtdError::InvalidParameter(format!(
            "mode enumeration bound too small for count {count}"
        )));
    }
    Ok(freqs)
}

/// Scattering ratios from a two-run extraction, reported only in the band
/// where the incident spectrum carries at least `1e-3` of its peak.
#[derive(Debug, Clone)]
pub struct SParams {
    pub freq: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
}

/// Valid-band cutoff relative to the incident spectrum peak.
const INCIDENT_FLOOR: f64 = 1e-3;

/// `S11 = (total1 - incident)/incident`, `S21 = transmitted2/incident`,
/// all transformed with the same padded rectangular-window DFT.
pub fn extract_s_params(
    incident: &TimeSeries,
    total_port1: &TimeSeries,
    transmitted_port2: &TimeSeries,
) -> Result<SParams> {
    let n = incident.len();
    for (label, ts) in [("total_port1", total_port1), ("transmitted_port2", transmitted_port2)] {
        if ts.len() != n {
            return Err(FdtdError::InvalidParameter(format!(
                "{label} has {} samples, incident has {n}",
                ts.len()
            )));
        }
        if (ts.dt - incident.dt).abs() > 1e-15 * incident.dt {
            return Err(FdtdError::InvalidParameter(format!(
                "{label} timestep differs from incident"
            )));
        }
    }
    if n < 2 {
        return Err(FdtdError::InvalidParameter(
            "S-parameter extraction needs at least 2 samples".into(),
        ));
    }
    let n_pad = next_pow2(4 * n);
    let inc = dft_padded(&incident.data[0], n_pad);
    let tot = dft_padded(&total_port1.data[0], n_pad);
    let trn = dft_padded(&transmitted_port2.data[0], n_pad);
    let peak = inc.iter().take(n_pad / 2 + 1).map(|c| c.norm()).fold(0.0f64, f64::max);
    if peak == 0.0 {
        return Err(FdtdError::DegenerateReference(
            "incident spectrum is identically zero".into(),
        ));
    }
    let df = 1.0 / (n_pad as f64 * incident.dt);
    let mut freq = Vec::new();
    let mut s11 = Vec::new();
    let mut s21 = Vec::new();
    for i in 0..=n_pad / 2 {
        if inc[i].norm() >= INCIDENT_FLOOR * peak {
            freq.push(i as f64 * df);
            s11.push((tot[i] - inc[i]) / inc[i]);
            s21.push(trn[i] / inc[i]);
        }
    }
    Ok(SParams { freq, s11, s21 })
}
