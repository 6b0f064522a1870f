//! Simulated microwave spectroscopy of the dressed pair.
//!
//! Sweeping the microwave detuning over the two-atom spectrum produces two
//! resonances: the single-flip line `|1,1⟩ → (|1,0⟩+|0,1⟩)/√2` at the
//! dressed single-atom shift, and the two-photon anti-blockade line
//! `|1,1⟩ → |0,0⟩` displaced by `J/2` (two photons share the shift `J`).
//! `J` is therefore *twice* the distance between the two fitted peak
//! centers — the same protocol an experiment uses, which makes the
//! round trip scan → fit → extract an end-to-end check of the dressing
//! model.

use rayon::prelude::*;
use serde::Serialize;

use crate::dressing::LaserDrive;
use crate::dynamics::{self, DecayChannels, MicrowaveDrive, PulseSegment, PulseSequence};
use crate::error::{Error, Result};
use crate::fit;
use crate::register::{Level, TwoAtomRegister};

/// Populations at the end of a fixed-duration pulse, per detuning.
#[derive(Clone, Debug)]
pub struct ScanResult {
    /// Microwave detuning grid in MHz.
    pub detunings: Vec<f64>,
    pub p11: Vec<f64>,
    pub p10: Vec<f64>,
    pub p01: Vec<f64>,
    pub p00: Vec<f64>,
}

impl ScanResult {
    /// `P_{1,0} + P_{0,1}` per grid point.
    pub fn p_single(&self) -> Vec<f64> {
        self.p10.iter().zip(&self.p01).map(|(a, b)| a + b).collect()
    }
}

/// A fitted Lorentzian line.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeakFit {
    /// Center in MHz.
    pub center: f64,
    /// Full width at half maximum in MHz, positive.
    pub fwhm: f64,
    /// Peak height above the offset, nonnegative.
    pub amplitude: f64,
    pub offset: f64,
    pub residual_norm: f64,
}

/// `J` extracted from the two fitted resonances.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JExtraction {
    /// `2·(two-photon center − single-flip center)`, MHz, signed.
    pub j: f64,
    pub single_peak: PeakFit,
    pub double_peak: PeakFit,
}

/// Sweep the microwave detuning: one dynamics run per grid point from
/// `|1,1⟩`, all with the same pulse time, decay off.
///
/// Grid points are independent and evaluated in parallel; results keep grid
/// order.
pub fn mw_scan(
    drive: &LaserDrive,
    u_dd: f64,
    mw_rabi: f64,
    pulse_time: f64,
    grid: &[f64],
) -> Result<ScanResult> {
    drive.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("detuning grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("detuning grid must be sorted".into()));
    }
    if !(pulse_time > 0.0) {
        return Err(Error::InvalidParameter("pulse_time must be positive".into()));
    }
    let initial = TwoAtomRegister::pure_product(Level::One, Level::One);
    let points: Vec<[f64; 4]> = grid
        .par_iter()
        .map(|&delta| -> Result<[f64; 4]> {
            let segment = PulseSegment {
                duration: pulse_time,
                microwave: Some(MicrowaveDrive::new(mw_rabi, delta, 0.0)?),
                dressing: Some(*drive),
                u_dd,
                decay: DecayChannels::none(),
            };
            let sequence = PulseSequence::new(vec![segment], 0)?;
            let traj = dynamics::run_sequence(&initial, &sequence, &[pulse_time])?;
            let q = &traj.qubit_populations()[0];
            Ok([q.p11, q.p10, q.p01, q.p00])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        detunings: grid.to_vec(),
        p11: points.iter().map(|p| p[0]).collect(),
        p10: points.iter().map(|p| p[1]).collect(),
        p01: points.iter().map(|p| p[2]).collect(),
        p00: points.iter().map(|p| p[3]).collect(),
    })
}

/// Lorentzian least-squares fit of one peak inside `window` (inclusive).
///
/// The window must contain at least 7 grid points and an interior local
/// maximum; the fit is initialized at the grid argmax.
pub fn fit_peak(x: &[f64], y: &[f64], window: (f64, f64)) -> Result<PeakFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("x and y lengths differ".into()));
    }
    let idx: Vec<usize> = (0..x.len())
        .filter(|&i| x[i] >= window.0 && x[i] <= window.1)
        .collect();
    if idx.len() < 7 {
        return Err(Error::InvalidParameter(format!(
            "fit window holds {} points; need at least 7",
            idx.len()
        )));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let argmax = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if argmax == 0 || argmax == ys.len() - 1 {
        return Err(Error::NoLocalMaximum);
    }

    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let amp0 = ys[argmax] - ymin;
    if amp0 <= 0.0 {
        return Err(Error::NoLocalMaximum);
    }
    // half-maximum width estimate, scanning out from the peak
    let half = ymin + amp0 / 2.0;
    let mut lo = xs[0];
    let mut hi = xs[xs.len() - 1];
    for i in (0..argmax).rev() {
        if ys[i] <= half {
            lo = xs[i];
            break;
        }
    }
    for i in argmax + 1..ys.len() {
        if ys[i] <= half {
            hi = xs[i];
            break;
        }
    }
    let fwhm0 = (hi - lo).max(2.0 * (xs[1] - xs[0]).abs()).max(1e-9);
    let p0 = [xs[argmax], fwhm0, amp0, ymin];
    let fit = fit::levenberg_marquardt(fit::lorentzian, &xs, &ys, &p0, &Default::default())?;
    let [center, fwhm, amplitude, offset] = [
        fit.params[0],
        fit.params[1].abs(), // the model is even in the width's sign
        fit.params[2],
        fit.params[3],
    ];
    if amplitude < 0.0 || !fwhm.is_finite() || fwhm == 0.0 {
        return Err(Error::NoLocalMaximum);
    }
    Ok(PeakFit {
        center,
        fwhm,
        amplitude,
        offset,
        residual_norm: fit.residual_norm,
    })
}

/// Peaks with smaller fitted height are treated as absent.
const MIN_PEAK_AMPLITUDE: f64 = 1e-4;

/// Extract `J` from a scan: locate the single-flip peak in the
/// `P_single` channel and the two-photon peak in the `P_{0,0}` channel,
/// fit each, and return twice their center difference (signed).
pub fn extract_j(scan: &ScanResult) -> Result<JExtraction> {
    let single = channel_peak(&scan.detunings, &scan.p_single(), "single-flip")?;
    let double = channel_peak(&scan.detunings, &scan.p00, "two-photon")?;
    Ok(JExtraction {
        j: 2.0 * (double.center - single.center),
        single_peak: single,
        double_peak: double,
    })
}

fn channel_peak(x: &[f64], y: &[f64], channel: &str) -> Result<PeakFit> {
    let missing = || Error::MissingPeak {
        channel: channel.to_string(),
    };
    let n = x.len();
    if n < 7 {
        return Err(missing());
    }
    let argmax = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if argmax == 0 || argmax == n - 1 {
        return Err(missing());
    }
    // window: three half-widths each side of the argmax, so the fit sees
    // the wings and the offset stays pinned
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let half = ymin + (y[argmax] - ymin) / 2.0;
    let left_cross = (0..argmax).rev().find(|&i| y[i] <= half).unwrap_or(0);
    let right_cross = (argmax + 1..n).find(|&i| y[i] <= half).unwrap_or(n - 1);
    let halfspan = (argmax - left_cross).max(right_cross - argmax).max(1);
    let lo = argmax.saturating_sub(3 * halfspan);
    let hi = (argmax + 3 * halfspan).min(n - 1);
    let (lo, hi) = widen_to_min_points(lo, hi, argmax, n);
    let peak = fit_peak(x, y, (x[lo], x[hi])).map_err(|e| match e {
        Error::NoLocalMaximum => missing(),
        other => other,
    })?;
    if peak.amplitude < MIN_PEAK_AMPLITUDE {
        return Err(missing());
    }
    Ok(peak)
}

fn widen_to_min_points(mut lo: usize, mut hi: usize, center: usize, n: usize) -> (usize, usize) {
    while hi - lo + 1 < 7 {
        if lo > 0 && (center - lo <= hi - center || hi == n - 1) {
            lo -= 1;
        } else if hi < n - 1 {
            hi += 1;
        } else {
            break;
        }
    }
    (lo, hi)
}
