//! One function per subcommand: resolve the config into library calls,
//! run, and emit CSV + JSON.

use std::path::Path;

use serde::Serialize;
use spinflip::dressing::{
    dressed_ground_amplitude, j_finite_blockade, j_perfect_blockade, j_vs_r,
    single_atom_light_shift,
};
use spinflip::dynamics::{
    monte_carlo_register, monte_carlo_trajectories, sample_doppler_offsets,
    simulate_blockaded_rabi, simulate_lifetime, Trajectory,
};
use spinflip::entanglement::{
    fidelity_report, parity_scan, prepare_phi_plus, prepare_psi_plus_from, PhiPlusMethod,
};
use spinflip::fit;
use spinflip::measurement::{self, TrapParams};
use spinflip::register::basis_labels;
use spinflip::spectroscopy::{extract_j, mw_scan, PeakFit};
use spinflip::{BellTarget, LaserDrive, PairPotentialModel, TwoAtomRegister};

use crate::config::{BellTargetConfig, Config, PhiMethodConfig};
use crate::output::{num, out_file, write_csv, write_json, Summary};
use crate::CliError;

pub struct Context<'a> {
    pub out_dir: &'a Path,
    pub strict: bool,
}

fn summary<'a, T: Serialize>(cfg: &'a Config, ctx: &Context<'a>, command: &'a str, result: T) -> Summary<'a, T> {
    Summary {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        strict: ctx.strict,
        config: cfg,
        result,
    }
}

fn shifted(drive: &LaserDrive, delta: f64) -> LaserDrive {
    LaserDrive {
        detuning: drive.detuning + delta,
        ..*drive
    }
}

/// Doppler offsets for a Monte Carlo run: one zero-offset shot when the
/// noise is off.
fn doppler_offsets(cfg: &Config, drive: &LaserDrive, shots: usize) -> Result<Vec<f64>, CliError> {
    let sigma = cfg.noise.doppler_sigma(drive)?;
    if sigma == 0.0 {
        return Ok(vec![0.0]);
    }
    if shots == 0 {
        return Err(CliError::Config("shots must be ≥ 1".into()));
    }
    let seed = cfg.require_seed()?;
    Ok(sample_doppler_offsets(sigma, shots, seed))
}

// ---------------------------------------------------------------- jcurve

#[derive(Serialize)]
struct JcurveDriveResult {
    rabi_freq_mhz: f64,
    detuning_mhz: f64,
    plateau_j_mhz: f64,
    blockade_radius_um: Option<f64>,
}

pub fn jcurve(cfg: &Config, ctx: &Context) -> Result<(), CliError> {
    let jc = cfg
        .jcurve
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [jcurve] section".into()))?;
    if jc.drives.is_empty() {
        return Err(CliError::Config("jcurve.drives must not be empty".into()));
    }
    let model = cfg.potential()?;
    let r_grid = jc.r_grid_um.materialize("jcurve.r_grid_um")?;

    let mut rows = Vec::new();
    let mut drives = Vec::new();
    for (index, dc) in jc.drives.iter().enumerate() {
        let drive = dc.to_drive()?;
        let curve = j_vs_r(&drive, &model, &r_grid)?;
        for (r, j) in &curve {
            rows.push(vec![
                index.to_string(),
                num(drive.rabi_freq),
                num(drive.detuning),
                num(*r),
                num(*j),
            ]);
        }
        let blockade_radius_um = match model {
            PairPotentialModel::PerfectBlockade => None,
            _ => Some(
                model
                    .blockade_radius(&drive)
                    .map_err(CliError::Run)?,
            ),
        };
        drives.push(JcurveDriveResult {
            rabi_freq_mhz: drive.rabi_freq,
            detuning_mhz: drive.detuning,
            plateau_j_mhz: j_perfect_blockade(&drive)?,
            blockade_radius_um,
        });
    }
    write_csv(
        &out_file(ctx.out_dir, "jcurve.csv"),
        &["drive_index", "rabi_freq_mhz", "detuning_mhz", "r_um", "j_mhz"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct JcurveResult {
        drives: Vec<JcurveDriveResult>,
    }
    write_json(
        &out_file(ctx.out_dir, "jcurve.json"),
        &summary(cfg, ctx, "jcurve", JcurveResult { drives }),
    )
}

// ------------------------------------------------------------------ scan

#[derive(Serialize)]
struct ScanReport {
    separation_um: f64,
    u_dd_mhz: f64,
    pulse_time_us: f64,
    mw_rabi_mhz: f64,
    grid_step_mhz: f64,
    j_predicted_mhz: f64,
    j_extracted_mhz: f64,
    single_peak: PeakFit,
    double_peak: PeakFit,
    warnings: Vec<String>,
}

pub fn scan(cfg: &Config, ctx: &Context) -> Result<(), CliError> {
    let sc = cfg
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [scan] section".into()))?;
    let drive = cfg.drive()?;
    let mw_rabi = cfg.microwave_rabi()?;
    if mw_rabi <= 0.0 {
        return Err(CliError::Config(
            "scan needs microwave.rabi_freq_mhz > 0".into(),
        ));
    }
    let u_dd = cfg
        .potential
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [potential] section".into()))?
        .finite_u_dd(sc.separation_um)?;

    let j_predicted = j_finite_blockade(&drive, u_dd)?;
    let e1 = single_atom_light_shift(&drive)?;
    let (alpha, _) = dressed_ground_amplitude(&drive)?;
    let pulse_time = sc.pulse_time_us.unwrap_or(1.0 / (2.0 * alpha * mw_rabi));
    if !(pulse_time > 0.0) {
        return Err(CliError::Config("scan.pulse_time_us must be > 0".into()));
    }
    let grid = match &sc.detuning_grid_mhz {
        Some(g) => g.materialize("scan.detuning_grid_mhz")?,
        None => {
            // bracket both predicted lines: the single-flip resonance at
            // the dressed shift and the two-photon line at +J/2
            let width = j_predicted.abs().max(4.0 / pulse_time);
            let lo = e1 + j_predicted / 2.0 - 0.45 * width;
            let hi = e1 + 0.45 * width;
            let step = width / 24.0;
            let n = ((hi - lo) / step).ceil() as usize;
            (0..=n).map(|k| lo + k as f64 * step).collect()
        }
    };
    let grid_step = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };

    let scan_result = mw_scan(&drive, u_dd, mw_rabi, pulse_time, &grid)?;
    let extraction = extract_j(&scan_result)?;

    let mut warnings = Vec::new();
    if extraction.j.abs() > 0.0 && grid_step > extraction.j.abs() / 4.0 {
        warnings.push(format!(
            "grid too coarse: step {grid_step:.4} MHz exceeds |J|/4 = {:.4} MHz",
            extraction.j.abs() / 4.0
        ));
    }

    let p_single = scan_result.p_single();
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            vec![
                num(scan_result.detunings[i]),
                num(scan_result.p11[i]),
                num(scan_result.p10[i]),
                num(scan_result.p01[i]),
                num(scan_result.p00[i]),
                num(p_single[i]),
            ]
        })
        .collect();
    write_csv(
        &out_file(ctx.out_dir, "scan.csv"),
        &["detuning_mhz", "p11", "p10", "p01", "p00", "p_single"],
        &rows,
    )?;
    write_json(
        &out_file(ctx.out_dir, "scan.json"),
        &summary(
            cfg,
            ctx,
            "scan",
            ScanReport {
                separation_um: sc.separation_um,
                u_dd_mhz: u_dd,
                pulse_time_us: pulse_time,
                mw_rabi_mhz: mw_rabi,
                grid_step_mhz: grid_step,
                j_predicted_mhz: j_predicted,
                j_extracted_mhz: extraction.j,
                single_peak: extraction.single_peak,
                double_peak: extraction.double_peak,
                warnings,
            },
        ),
    )
}

// ------------------------------------------------------------------ rabi

#[derive(Serialize)]
struct RabiReport {
    separation_um: f64,
    u_dd_mhz: f64,
    doppler_sigma_mhz: f64,
    shots: usize,
    gamma_r_per_us: f64,
    two_atom_frequency_mhz: f64,
    single_atom_frequency_mhz: f64,
    enhancement: f64,
    max_p00: f64,
}

pub fn rabi(cfg: &Config, ctx: &Context) -> Result<(), CliError> {
    let rc = cfg
        .rabi
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [rabi] section".into()))?;
    let drive = cfg.drive()?;
    let mw_rabi = cfg.microwave_rabi()?;
    let gamma = cfg.noise.rydberg_decay_rate_per_us;
    let u_dd = cfg
        .potential
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [potential] section".into()))?
        .finite_u_dd(rc.separation_um)?;
    let times = rc.times_us.materialize("rabi.times_us")?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "rabi.times_us must be strictly increasing".into(),
        ));
    }
    let offsets = doppler_offsets(cfg, &drive, rc.shots)?;
    let sigma = cfg.noise.doppler_sigma(&drive)?;

    let run = |u: f64, grid: &[f64]| -> Result<Trajectory, CliError> {
        monte_carlo_trajectories(&offsets, |delta| {
            simulate_blockaded_rabi(&shifted(&drive, delta), u, mw_rabi, gamma, grid)
        })
        .map_err(CliError::Run)
    };
    let two_atom = run(u_dd, &times)?;

    // The frequency fit needs several oscillation periods regardless of the
    // plotted window, so it runs on its own grid.
    let (alpha, _) = dressed_ground_amplitude(&drive)?;
    let f_single_estimate = alpha * mw_rabi;
    let fit_span = if f_single_estimate > 0.0 {
        times.last().copied().unwrap_or(0.0).max(3.5 / f_single_estimate)
    } else {
        times.last().copied().unwrap_or(1.0)
    };
    let fit_times: Vec<f64> = (0..=480).map(|k| fit_span * k as f64 / 480.0).collect();
    let two_atom_fit = run(u_dd, &fit_times)?;
    let single_atom_fit = run(0.0, &fit_times)?;

    let contrast =
        |t: &Trajectory| -> Vec<f64> { t.p11().iter().zip(t.p00()).map(|(a, b)| a - b).collect() };
    let f_two = fit::fit_oscillation(&fit_times, &contrast(&two_atom_fit))?.frequency;
    let f_one = fit::fit_oscillation(&fit_times, &contrast(&single_atom_fit))?.frequency;
    let max_p00 = two_atom.p00().into_iter().fold(0.0f64, f64::max);

    let labels = basis_labels();
    let mut header: Vec<String> = vec!["time_us".into()];
    header.extend(labels.iter().map(|l| format!("pop_{l}")));
    header.extend(["p11", "p_single", "p00"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let qubit = two_atom.qubit_populations();
    let rows: Vec<Vec<String>> = two_atom
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![num(*t)];
            row.extend(two_atom.populations[i].iter().map(|p| num(*p)));
            row.push(num(qubit[i].p11));
            row.push(num(qubit[i].p_single()));
            row.push(num(qubit[i].p00));
            row
        })
        .collect();
    write_csv(&out_file(ctx.out_dir, "rabi.csv"), &header_refs, &rows)?;
    write_json(
        &out_file(ctx.out_dir, "rabi.json"),
        &summary(
            cfg,
            ctx,
            "rabi",
            RabiReport {
                separation_um: rc.separation_um,
                u_dd_mhz: u_dd,
                doppler_sigma_mhz: sigma,
                shots: offsets.len(),
                gamma_r_per_us: gamma,
                two_atom_frequency_mhz: f_two,
                single_atom_frequency_mhz: f_one,
                enhancement: f_two / f_one,
                max_p00,
            },
        ),
    )
}

// ------------------------------------------------------------------ bell

#[derive(Serialize)]
struct BellReport {
    separation_um: f64,
    u_dd_mhz: f64,
    j_mhz: f64,
    mw_rabi_mhz: f64,
    gamma_r_per_us: f64,
    pump_efficiency: f64,
    doppler_sigma_mhz: f64,
    shots: usize,
    reports: Vec<spinflip::FidelityReport>,
}

pub fn bell(cfg: &Config, ctx: &Context) -> Result<(), CliError> {
    let bc = cfg
        .bell
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [bell] section".into()))?;
    if bc.targets.is_empty() {
        return Err(CliError::Config("bell.targets must not be empty".into()));
    }
    let drive = cfg.drive()?;
    let mw_rabi = cfg.microwave_rabi()?;
    let gamma = cfg.noise.rydberg_decay_rate_per_us;
    let pump = cfg.noise.pump_efficiency;
    if !(0.0..=1.0).contains(&pump) {
        return Err(CliError::Config(
            "noise.pump_efficiency must be in [0, 1]".into(),
        ));
    }
    let u_dd = cfg
        .potential
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [potential] section".into()))?
        .finite_u_dd(bc.separation_um)?;
    let phases = bc.phase_grid_rad.materialize("bell.phase_grid_rad")?;
    let offsets = doppler_offsets(cfg, &drive, bc.shots)?;
    let sigma = cfg.noise.doppler_sigma(&drive)?;
    let j = j_finite_blockade(&drive, u_dd)?;
    let initial = measurement::prepare_initial(pump)?;
    let strict = ctx.strict;

    let psi_register = |delta: f64| -> spinflip::Result<TwoAtomRegister> {
        prepare_psi_plus_from(&initial, &shifted(&drive, delta), u_dd, mw_rabi, gamma, strict)
            .map(|prep| prep.register)
    };

    let mut reports = Vec::new();
    for target_cfg in &bc.targets {
        let target = target_cfg.to_target();
        let averaged = match (target_cfg, bc.phi_method) {
            (BellTargetConfig::PsiPlus, _) => monte_carlo_register(&offsets, psi_register)?,
            (BellTargetConfig::PhiPlus, PhiMethodConfig::GlobalHalfPi) => {
                monte_carlo_register(&offsets, |delta| {
                    prepare_phi_plus(&psi_register(delta)?, &PhiPlusMethod::default())
                })?
            }
            (BellTargetConfig::PhiPlus, PhiMethodConfig::TwoPhoton) => {
                monte_carlo_register(&offsets, |delta| {
                    prepare_phi_plus(
                        &initial,
                        &PhiPlusMethod::TwoPhoton {
                            drive: shifted(&drive, delta),
                            u_dd,
                            mw_rabi,
                            gamma_r: gamma,
                        },
                    )
                })?
            }
        };
        let before = measurement::detect(&averaged).conditional;
        let scan = parity_scan(&averaged, &phases);
        let report = fidelity_report(&scan, &before, target, Some(&averaged))?;

        let name = match target {
            BellTarget::PsiPlus => "bell_psi_plus.csv",
            BellTarget::PhiPlus => "bell_phi_plus.csv",
        };
        let rows: Vec<Vec<String>> = (0..phases.len())
            .map(|i| {
                let p = &scan.populations[i];
                vec![
                    num(scan.phases[i]),
                    num(scan.q[i]),
                    num(p.p11),
                    num(p.p10),
                    num(p.p01),
                    num(p.p00),
                    num(scan.survival[i]),
                ]
            })
            .collect();
        write_csv(
            &out_file(ctx.out_dir, name),
            &["phi_rad", "q", "p11", "p10", "p01", "p00", "survival"],
            &rows,
        )?;
        reports.push(report);
    }
    write_json(
        &out_file(ctx.out_dir, "bell.json"),
        &summary(
            cfg,
            ctx,
            "bell",
            BellReport {
                separation_um: bc.separation_um,
                u_dd_mhz: u_dd,
                j_mhz: j,
                mw_rabi_mhz: mw_rabi,
                gamma_r_per_us: gamma,
                pump_efficiency: pump,
                doppler_sigma_mhz: sigma,
                shots: offsets.len(),
                reports,
            },
        ),
    )
}

// -------------------------------------------------------------- lifetime

#[derive(Serialize)]
struct LifetimeReport {
    gamma_r_per_us: f64,
    tau_input_us: f64,
    tau_fit_us: Option<f64>,
    tau_infinite: bool,
    amplitude: f64,
    offset: f64,
    residual_norm: f64,
}

pub fn lifetime(cfg: &Config, ctx: &Context) -> Result<(), CliError> {
    let lc = cfg
        .lifetime
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [lifetime] section".into()))?;
    let drive = cfg.drive()?;
    if !(lc.tau_us > 0.0) {
        return Err(CliError::Config("lifetime.tau_us must be > 0".into()));
    }
    let gamma = 1.0 / lc.tau_us; // tau_us = inf encodes a decay-free run
    let delays = lc.delays_us.materialize("lifetime.delays_us")?;
    let points = simulate_lifetime(&drive, gamma, &delays)?;
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fitted = fit::fit_exponential_decay(&t, &y)?;
    let infinite = fitted.rate <= 1e-12;

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|(d, p)| vec![num(*d), num(*p)])
        .collect();
    write_csv(
        &out_file(ctx.out_dir, "lifetime.csv"),
        &["delay_us", "return_probability"],
        &rows,
    )?;
    write_json(
        &out_file(ctx.out_dir, "lifetime.json"),
        &summary(
            cfg,
            ctx,
            "lifetime",
            LifetimeReport {
                gamma_r_per_us: gamma,
                tau_input_us: lc.tau_us,
                tau_fit_us: (!infinite).then(|| 1.0 / fitted.rate),
                tau_infinite: infinite,
                amplitude: fitted.amplitude,
                offset: fitted.offset,
                residual_norm: fitted.residual_norm,
            },
        ),
    )
}

// ------------------------------------------------------------- recapture

#[derive(Serialize)]
struct RecaptureReport {
    trap: TrapParams,
    samples: usize,
    points: Vec<RecapturePoint>,
}

#[derive(Serialize)]
struct RecapturePoint {
    release_time_us: f64,
    probability: f64,
    std_error: f64,
}

pub fn recapture(cfg: &Config, ctx: &Context) -> Result<(), CliError> {
    let rc = cfg
        .recapture
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [recapture] section".into()))?;
    let seed = cfg.require_seed()?;
    let release_times = rc.release_times_us.materialize("recapture.release_times_us")?;
    let base = TrapParams {
        waist: rc.waist_um,
        depth_mk: rc.depth_mk,
        temperature_uk: rc.temperature_uk,
        release_time: 0.0,
        wavelength_nm: rc.wavelength_nm,
        mass_amu: rc.atom_mass_amu,
        ..TrapParams::default()
    };
    base.validate().map_err(|e| CliError::Config(format!("[recapture]: {e}")))?;

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &t in &release_times {
        let trap = TrapParams {
            release_time: t,
            ..base
        };
        let est = measurement::recapture_probability(&trap, rc.samples, seed)?;
        rows.push(vec![num(t), num(est.probability), num(est.std_error)]);
        points.push(RecapturePoint {
            release_time_us: t,
            probability: est.probability,
            std_error: est.std_error,
        });
    }
    write_csv(
        &out_file(ctx.out_dir, "recapture.csv"),
        &["release_time_us", "probability", "std_error"],
        &rows,
    )?;
    write_json(
        &out_file(ctx.out_dir, "recapture.json"),
        &summary(
            cfg,
            ctx,
            "recapture",
            RecaptureReport {
                trap: base,
                samples: rc.samples,
                points,
            },
        ),
    )
}
