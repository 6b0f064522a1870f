//! Least-squares fitting used by the simulated measurements: a small
//! Levenberg–Marquardt driver with numerical Jacobians, plus the three
//! model shapes the experiments need (Lorentzian peaks, exponential decay,
//! damped oscillations).

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LevMarOptions {
    pub max_iterations: usize,
    /// Convergence when every parameter moves by less than this relative
    /// amount in one accepted step.
    pub relative_tolerance: f64,
}

impl Default for LevMarOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn cost<M>(model: &M, x: &[f64], y: &[f64], p: &[f64]) -> f64
where
    M: Fn(f64, &[f64]) -> f64,
{
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = model(xi, p) - yi;
            r * r
        })
        .sum()
}

/// Levenberg–Marquardt minimization of `Σ (model(xᵢ, p) - yᵢ)²`.
pub fn levenberg_marquardt<M>(
    model: M,
    x: &[f64],
    y: &[f64],
    p0: &[f64],
    opts: &LevMarOptions,
) -> Result<FitResult>
where
    M: Fn(f64, &[f64]) -> f64,
{
    if x.len() != y.len() || x.len() < p0.len() {
        return Err(Error::InvalidParameter(
            "fit needs as many points as parameters".into(),
        ));
    }
    let np = p0.len();
    let mut p = p0.to_vec();
    let mut lambda = 1e-3;
    let mut current = cost(&model, x, y, &p);

    for iteration in 1..=opts.max_iterations {
        // numerical Jacobian (central differences) and gradient
        let mut jtj: Array2<f64> = Array2::zeros((np, np));
        let mut jtr: Array1<f64> = Array1::zeros(np);
        let mut jac = vec![vec![0.0; np]; x.len()];
        for j in 0..np {
            let h = 1e-6 * p[j].abs().max(1e-6);
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += h;
            pm[j] -= h;
            for (i, &xi) in x.iter().enumerate() {
                jac[i][j] = (model(xi, &pp) - model(xi, &pm)) / (2.0 * h);
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            let r = model(xi, &p) - y[i];
            for j in 0..np {
                jtr[j] += jac[i][j] * r;
                for k in 0..np {
                    jtj[[j, k]] += jac[i][j] * jac[i][k];
                }
            }
        }
        let diag_max = (0..np).map(|j| jtj[[j, j]]).fold(0.0f64, f64::max);

        // try damped steps until one reduces the cost
        let mut moved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for j in 0..np {
                a[[j, j]] += lambda * jtj[[j, j]].max(1e-12 * diag_max.max(1e-300));
            }
            let rhs = jtr.mapv(|v| -v);
            let Ok(step) = a.solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_cost = cost(&model, x, y, &trial);
            if trial_cost.is_finite() && trial_cost <= current {
                let rel_change = p
                    .iter()
                    .zip(trial.iter())
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1e-12))
                    .fold(0.0f64, f64::max);
                p = trial;
                current = trial_cost;
                lambda = (lambda / 3.0).max(1e-14);
                moved = true;
                if rel_change < opts.relative_tolerance {
                    return Ok(FitResult {
                        params: p,
                        residual_norm: current.sqrt(),
                        iterations: iteration,
                    });
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !moved {
            // cannot improve: already at a (numerical) minimum
            return Ok(FitResult {
                params: p,
                residual_norm: current.sqrt(),
                iterations: iteration,
            });
        }
    }
    Err(Error::FitDidNotConverge {
        iterations: opts.max_iterations,
        last: p,
    })
}

/// Lorentzian with parameters `[center, fwhm, amplitude, offset]`;
/// `amplitude` is the peak height above the offset.
pub fn lorentzian(x: f64, p: &[f64]) -> f64 {
    let hw = p[1] / 2.0;
    p[3] + p[2] * hw * hw / ((x - p[0]).powi(2) + hw * hw)
}

#[derive(Clone, Copy, Debug)]
pub struct ExponentialFit {
    pub amplitude: f64,
    /// Decay rate in 1/x-units; 0 for flat data.
    pub rate: f64,
    pub offset: f64,
    pub residual_norm: f64,
}

/// Fit `y = A·e^(-rate·t) + B`.
pub fn fit_exponential_decay(t: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(Error::InvalidParameter(
            "exponential fit needs at least 3 points".into(),
        ));
    }
    let (ymin, ymax) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if ymax - ymin <= 1e-12 * ymax.abs().max(1.0) {
        // flat data: zero rate, the τ = ∞ sentinel case for callers
        return Ok(ExponentialFit {
            amplitude: 0.0,
            rate: 0.0,
            offset: y.iter().sum::<f64>() / y.len() as f64,
            residual_norm: 0.0,
        });
    }
    let b0 = ymin;
    let a0 = y[0] - b0;
    let half = y
        .iter()
        .position(|&v| (v - b0).abs() <= a0.abs() / 2.0)
        .map(|i| t[i])
        .filter(|&th| th > t[0]);
    let span = t[t.len() - 1] - t[0];
    let k0 = match half {
        Some(th) => std::f64::consts::LN_2 / (th - t[0]),
        None => 1.0 / span.max(1e-12),
    };
    let model = |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp() + p[2];
    let fit = levenberg_marquardt(model, t, y, &[a0, k0, b0], &LevMarOptions::default())?;
    Ok(ExponentialFit {
        amplitude: fit.params[0],
        rate: fit.params[1],
        offset: fit.params[2],
        residual_norm: fit.residual_norm,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct OscillationFit {
    /// Oscillation frequency in cycles per x-unit.
    pub frequency: f64,
    /// Envelope decay rate, 1/x-units.
    pub decay_rate: f64,
    pub offset: f64,
    pub amp_cos: f64,
    pub amp_sin: f64,
    pub residual_norm: f64,
}

impl OscillationFit {
    pub fn amplitude(&self) -> f64 {
        self.amp_cos.hypot(self.amp_sin)
    }
}

/// Fit `y = offset + e^(-γt)·(b·cos 2πft + c·sin 2πft)`.
///
/// The frequency is located by a dense linear-least-squares scan before the
/// nonlinear refinement, so no starting guess is needed.
pub fn fit_oscillation(t: &[f64], y: &[f64]) -> Result<OscillationFit> {
    if t.len() != y.len() || t.len() < 8 {
        return Err(Error::InvalidParameter(
            "oscillation fit needs at least 8 points".into(),
        ));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(Error::InvalidParameter("time span must be positive".into()));
    }
    let dt_min = t
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let f_lo = 0.25 / span;
    let f_hi = 0.45 / dt_min.max(1e-12);
    let mut best = (f64::INFINITY, f_lo, [0.0f64; 3]);
    let nscan = 1600;
    for k in 0..=nscan {
        let f = f_lo + (f_hi - f_lo) * k as f64 / nscan as f64;
        if let Some((resid, coeff)) = harmonic_lsq(t, y, f) {
            if resid < best.0 {
                best = (resid, f, coeff);
            }
        }
    }
    let (_, f0, c0) = best;
    let model = |x: f64, p: &[f64]| {
        let phase = std::f64::consts::TAU * p[4] * x;
        p[0] + (-p[1] * x).exp() * (p[2] * phase.cos() + p[3] * phase.sin())
    };
    let p0 = [c0[0], 0.0, c0[1], c0[2], f0];
    let fit = levenberg_marquardt(model, t, y, &p0, &LevMarOptions::default())?;
    Ok(OscillationFit {
        frequency: fit.params[4].abs(),
        decay_rate: fit.params[1],
        offset: fit.params[0],
        amp_cos: fit.params[2],
        amp_sin: fit.params[3],
        residual_norm: fit.residual_norm,
    })
}

/// Linear LSQ of `y ≈ a + b cos 2πft + c sin 2πft` at fixed `f`.
/// Returns the residual sum of squares and `[a, b, c]`.
pub(crate) fn harmonic_lsq(t: &[f64], y: &[f64], f: f64) -> Option<(f64, [f64; 3])> {
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (&ti, &yi) in t.iter().zip(y) {
        let ph = std::f64::consts::TAU * f * ti;
        let row = [1.0, ph.cos(), ph.sin()];
        for j in 0..3 {
            aty[j] += row[j] * yi;
            for k in 0..3 {
                ata[j][k] += row[j] * row[k];
            }
        }
    }
    let a = Array2::from_shape_fn((3, 3), |(j, k)| ata[j][k]);
    let rhs = Array1::from(aty.to_vec());
    let sol = a.solve(&rhs).ok()?;
    let coeff = [sol[0], sol[1], sol[2]];
    let resid: f64 = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let ph = std::f64::consts::TAU * f * ti;
            let r = coeff[0] + coeff[1] * ph.cos() + coeff[2] * ph.sin() - yi;
            r * r
        })
        .sum();
    Some((resid, coeff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lorentzian_fit_recovers_itself() {
        let truth = [0.4, 0.2, 0.8, 0.05];
        let x: Vec<f64> = (0..81).map(|k| -0.6 + k as f64 * 0.025).collect();
        let y: Vec<f64> = x.iter().map(|&xi| lorentzian(xi, &truth)).collect();
        let fit = levenberg_marquardt(
            lorentzian,
            &x,
            &y,
            &[0.3, 0.3, 0.5, 0.0],
            &LevMarOptions::default(),
        )
        .unwrap();
        for (got, want) in fit.params.iter().zip(truth.iter()) {
            assert_relative_eq!(got, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn exponential_fit_recovers_rate() {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 1.5).collect();
        let y: Vec<f64> = t.iter().map(|&ti| 0.9 * (-ti / 10.0).exp() + 0.03).collect();
        let fit = fit_exponential_decay(&t, &y).unwrap();
        assert_relative_eq!(fit.rate, 0.1, max_relative = 1e-6);
        assert_relative_eq!(fit.amplitude, 0.9, max_relative = 1e-6);
        assert_relative_eq!(fit.offset, 0.03, max_relative = 1e-4);
    }

    #[test]
    fn exponential_fit_flat_data_reports_zero_rate() {
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y = vec![0.997; 10];
        let fit = fit_exponential_decay(&t, &y).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert_relative_eq!(fit.offset, 0.997);
    }

    #[test]
    fn oscillation_fit_finds_frequency_without_guess() {
        let f = 0.19647;
        let t: Vec<f64> = (0..240).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&ti| {
                0.5 + (-0.02 * ti).exp() * 0.46 * (std::f64::consts::TAU * f * ti).cos()
            })
            .collect();
        let fit = fit_oscillation(&t, &y).unwrap();
        assert_relative_eq!(fit.frequency, f, max_relative = 1e-6);
        assert_relative_eq!(fit.decay_rate, 0.02, max_relative = 1e-4);
        assert_relative_eq!(fit.amplitude(), 0.46, max_relative = 1e-5);
    }
}
