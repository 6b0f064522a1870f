//! Open-system time evolution of the two-atom register under
//! piecewise-constant microwave and dressing drives.
//!
//! Each [`PulseSegment`] defines a time-independent Hamiltonian in the
//! doubly rotating frame (microwave frame on `|1⟩↔|0⟩`, optical frame on
//! `|0⟩↔|r⟩`) plus Rydberg decay channels. Within a segment the master
//! equation
//!
//! ```text
//! dρ/dt = -i·2π·[H, ρ] + Σ_k Γ_k (L_k ρ L_k† - ½{L_k†L_k, ρ})
//! ```
//!
//! is solved exactly: by eigendecomposition of `H` when every decay rate is
//! zero, and by eigendecomposition of the 256×256 Liouvillian otherwise.
//! Both decompositions are computed once per segment and reused for every
//! sample time. A fixed-step RK4 integrator of the same right-hand side is
//! kept as an independent cross-check ([`EvolutionMethod::RungeKutta`]).
//!
//! `H` is in MHz, times in µs, decay rates in µs⁻¹; the factor 2π in the
//! commutator converts ordinary frequencies to phase rates, while the
//! dissipator uses 1/e rates directly.

use ndarray::linalg::kron;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dressing::{single_atom_light_shift, LaserDrive};
use crate::error::{Error, Result};
use crate::linalg::{self, SpectralDecomposition};
use crate::register::{pair_index, Level, QubitPopulations, TwoAtomRegister, DIM};

/// Microwave (stimulated-Raman) drive on the clock transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicrowaveDrive {
    /// Ω_mw/2π in MHz.
    pub rabi_freq: f64,
    /// δ_mw in MHz, relative to the bare clock resonance.
    pub detuning: f64,
    /// Drive phase in rad.
    pub phase: f64,
}

impl MicrowaveDrive {
    pub fn new(rabi_freq: f64, detuning: f64, phase: f64) -> Result<Self> {
        if !(rabi_freq >= 0.0) || !detuning.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidParameter(
                "microwave drive needs rabi_freq ≥ 0 and finite detuning/phase".into(),
            ));
        }
        Ok(Self {
            rabi_freq,
            detuning,
            phase,
        })
    }
}

/// Rydberg decay description: total rate and branching fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayChannels {
    /// Γ_r = 1/τ_r in µs⁻¹.
    pub rydberg_decay_rate: f64,
    /// Fraction of decays returning to `|0⟩`.
    pub branch_to_zero: f64,
    /// Fraction of decays returning to `|1⟩`.
    pub branch_to_one: f64,
}

impl DecayChannels {
    /// Everything decays to the dark/lost level: conservative loss
    /// accounting for atoms that leave the trap from `|r⟩`.
    pub fn all_to_dark(rate: f64) -> Self {
        Self {
            rydberg_decay_rate: rate,
            branch_to_zero: 0.0,
            branch_to_one: 0.0,
        }
    }

    pub fn none() -> Self {
        Self::all_to_dark(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rydberg_decay_rate >= 0.0) {
            return Err(Error::InvalidParameter(
                "rydberg_decay_rate must be ≥ 0".into(),
            ));
        }
        if self.branch_to_zero < 0.0
            || self.branch_to_one < 0.0
            || self.branch_to_zero + self.branch_to_one > 1.0 + 1e-12
        {
            return Err(Error::InvalidParameter(
                "decay branching fractions must be ≥ 0 and sum to ≤ 1".into(),
            ));
        }
        Ok(())
    }

    fn channels(&self) -> Vec<(f64, Level)> {
        let to_dark = (1.0 - self.branch_to_zero - self.branch_to_one).max(0.0);
        [
            (to_dark, Level::Dark),
            (self.branch_to_zero, Level::Zero),
            (self.branch_to_one, Level::One),
        ]
        .into_iter()
        .map(|(f, l)| (f * self.rydberg_decay_rate, l))
        .filter(|(rate, _)| *rate > 0.0)
        .collect()
    }
}

/// One piecewise-constant slice of an experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSegment {
    /// Duration in µs, ≥ 0.
    pub duration: f64,
    pub microwave: Option<MicrowaveDrive>,
    pub dressing: Option<LaserDrive>,
    /// Pair shift of `|rr⟩` in MHz, fixed for the segment.
    pub u_dd: f64,
    pub decay: DecayChannels,
}

impl PulseSegment {
    /// A segment with no drives and no decay.
    pub fn idle(duration: f64) -> Self {
        Self {
            duration,
            microwave: None,
            dressing: None,
            u_dd: 0.0,
            decay: DecayChannels::none(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "segment duration must be ≥ 0, got {}",
                self.duration
            )));
        }
        if !self.u_dd.is_finite() {
            return Err(Error::InvalidParameter(
                "segment u_dd must be finite; the perfect-blockade sentinel \
                 cannot enter dynamics"
                    .into(),
            ));
        }
        if let Some(mw) = &self.microwave {
            MicrowaveDrive::new(mw.rabi_freq, mw.detuning, mw.phase)?;
        }
        if let Some(d) = &self.dressing {
            d.validate()?;
        }
        self.decay.validate()
    }
}

/// An ordered list of segments plus the RNG seed used by noise sampling.
#[derive(Clone, Debug)]
pub struct PulseSequence {
    pub segments: Vec<PulseSegment>,
    pub seed: u64,
}

impl PulseSequence {
    pub fn new(segments: Vec<PulseSegment>, seed: u64) -> Result<Self> {
        let seq = Self { segments, seed };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidParameter(
                "pulse sequence must contain at least one segment".into(),
            ));
        }
        for seg in &self.segments {
            seg.validate()?;
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// Single-atom 4×4 Hamiltonian of a segment, in MHz.
fn single_atom_hamiltonian(segment: &PulseSegment) -> Array2<C64> {
    let mut h: Array2<C64> = Array2::zeros((4, 4));
    let (one, zero, ryd) = (
        Level::One.index(),
        Level::Zero.index(),
        Level::Rydberg.index(),
    );
    if let Some(mw) = &segment.microwave {
        let c = C64::from_polar(mw.rabi_freq / 2.0, -mw.phase);
        h[[zero, one]] = c;
        h[[one, zero]] = c.conj();
        h[[zero, zero]] += C64::new(-mw.detuning, 0.0);
        // |r⟩ rides on top of |0⟩ in the microwave frame
        h[[ryd, ryd]] += C64::new(-mw.detuning, 0.0);
    }
    if let Some(d) = &segment.dressing {
        let c = C64::new(d.rabi_freq / 2.0, 0.0);
        h[[ryd, zero]] += c;
        h[[zero, ryd]] += c;
        h[[ryd, ryd]] += C64::new(-d.detuning, 0.0);
    }
    h
}

/// The 16×16 two-atom Hamiltonian of a segment, in MHz:
///
/// ```text
/// H/h = Σ_atoms [ (Ω_mw/2)(e^{-iφ}|0⟩⟨1| + h.c.) - δ_mw|0⟩⟨0|
///               + (Ω_L/2)(|r⟩⟨0| + h.c.) - (Δ_L + δ_mw)|r⟩⟨r| ]
///       + u_dd·|rr⟩⟨rr|
/// ```
///
/// `|d⟩` is uncoupled.
pub fn build_hamiltonian(segment: &PulseSegment) -> Array2<C64> {
    let h1 = single_atom_hamiltonian(segment);
    let eye: Array2<C64> = Array2::eye(4);
    let mut h = kron(&h1, &eye) + kron(&eye, &h1);
    let rr = pair_index(Level::Rydberg, Level::Rydberg);
    h[[rr, rr]] += C64::new(segment.u_dd, 0.0);
    h
}

/// Collapse operators `(rate, L)` of a segment, one per atom and branch.
fn collapse_operators(segment: &PulseSegment) -> Vec<(f64, Array2<C64>)> {
    let eye: Array2<C64> = Array2::eye(4);
    let mut ops = Vec::new();
    for (rate, target) in segment.decay.channels() {
        let mut l: Array2<C64> = Array2::zeros((4, 4));
        l[[target.index(), Level::Rydberg.index()]] = C64::new(1.0, 0.0);
        ops.push((rate, kron(&l, &eye)));
        ops.push((rate, kron(&eye, &l)));
    }
    ops
}

/// How a segment is integrated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvolutionMethod {
    /// Exact propagation via eigendecomposition (default).
    #[default]
    Exact,
    /// Fixed-step RK4 on the master-equation right-hand side, with
    /// `dt = 1/(50·max frequency)`. Kept as the independent cross-check.
    RungeKutta,
}

/// Exact propagator of one segment, cached for reuse across sample times.
pub enum Propagator {
    /// No decay: `ρ(t) = U ρ U†` with `U = V e^{-i2πEt} V†`.
    Unitary {
        energies: Array1<f64>,
        vectors: Array2<C64>,
    },
    /// With decay: spectral decomposition of the vectorized Liouvillian.
    Lindblad(SpectralDecomposition),
}

impl Propagator {
    pub fn new(segment: &PulseSegment) -> Result<Self> {
        segment.validate()?;
        let h = build_hamiltonian(segment);
        let collapse = collapse_operators(segment);
        if collapse.is_empty() {
            let (energies, vectors) = linalg::hermitian_eigen(&h)?;
            Ok(Propagator::Unitary { energies, vectors })
        } else {
            let m = liouvillian(&h, &collapse);
            Ok(Propagator::Lindblad(SpectralDecomposition::new(&m)?))
        }
    }

    /// Advance the register by `dt` µs.
    pub fn advance(&self, register: &mut TwoAtomRegister, dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let trace_before = register.trace();
        match self {
            Propagator::Unitary { energies, vectors } => {
                let u = linalg::unitary_at(energies, vectors, dt);
                register.apply_unitary(&u);
            }
            Propagator::Lindblad(sd) => {
                let rho = register.density_mut();
                let v: Array1<C64> = Array1::from_iter(rho.iter().copied());
                let out = sd.propagate(&v, dt);
                for (i, z) in out.iter().enumerate() {
                    rho[[i / DIM, i % DIM]] = *z;
                }
                hermitize(rho);
            }
        }
        let drift = (register.trace() - trace_before).abs();
        if drift > 1e-6 {
            return Err(Error::TraceDrift { drift, dt });
        }
        Ok(())
    }
}

/// Vectorized Lindblad generator with row-major stacking:
/// `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.
fn liouvillian(h: &Array2<C64>, collapse: &[(f64, Array2<C64>)]) -> Array2<C64> {
    let n = h.nrows();
    let eye: Array2<C64> = Array2::eye(n);
    let i2pi = C64::new(0.0, -std::f64::consts::TAU);
    let mut m = (kron(h, &eye) - kron(&eye, &h.t().to_owned())).mapv(|z| z * i2pi);
    for (rate, l) in collapse {
        let ldag_l = linalg::dagger(l).dot(l);
        let jump = kron(l, &l.mapv(|z| z.conj()));
        let anti = kron(&ldag_l, &eye) + kron(&eye, &ldag_l.t().to_owned());
        m = m + jump.mapv(|z| z * *rate) - anti.mapv(|z| z * (0.5 * rate));
    }
    m
}

fn hermitize(rho: &mut Array2<C64>) {
    let n = rho.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = (rho[[i, j]] + rho[[j, i]].conj()) / 2.0;
            rho[[i, j]] = avg;
            rho[[j, i]] = avg.conj();
        }
        rho[[i, i]] = C64::new(rho[[i, i]].re, 0.0);
    }
}

/// Fixed-step RK4 of the master equation, `dt = 1/(50·max frequency)`.
struct Rk4Engine {
    hamiltonian: Array2<C64>,
    collapse: Vec<(f64, Array2<C64>)>,
    dt_max: f64,
}

impl Rk4Engine {
    fn new(segment: &PulseSegment) -> Result<Self> {
        segment.validate()?;
        let hamiltonian = build_hamiltonian(segment);
        let collapse = collapse_operators(segment);
        let fmax = hamiltonian
            .iter()
            .map(|z| z.norm())
            .fold(segment.decay.rydberg_decay_rate, f64::max);
        let dt_max = if fmax > 0.0 { 1.0 / (50.0 * fmax) } else { f64::INFINITY };
        Ok(Self {
            hamiltonian,
            collapse,
            dt_max,
        })
    }

    fn rhs(&self, rho: &Array2<C64>) -> Array2<C64> {
        let i2pi = C64::new(0.0, -std::f64::consts::TAU);
        let comm = self.hamiltonian.dot(rho) - rho.dot(&self.hamiltonian);
        let mut out = comm.mapv(|z| z * i2pi);
        for (rate, l) in &self.collapse {
            let ldag = linalg::dagger(l);
            let jump = l.dot(rho).dot(&ldag);
            let ldag_l = ldag.dot(l);
            let anti = ldag_l.dot(rho) + rho.dot(&ldag_l);
            out = out + jump.mapv(|z| z * *rate) - anti.mapv(|z| z * (0.5 * rate));
        }
        out
    }

    fn advance(&self, register: &mut TwoAtomRegister, dt: f64) -> Result<()> {
        self.advance_with_step(register, dt, self.dt_max)
    }

    fn advance_with_step(&self, register: &mut TwoAtomRegister, dt: f64, dt_max: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let steps = if dt_max.is_finite() {
            (dt / dt_max).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = dt / steps as f64;
        let trace_before = register.trace();
        let rho = register.density_mut();
        for _ in 0..steps {
            let k1 = self.rhs(rho);
            let k2 = self.rhs(&(&*rho + &k1.mapv(|z| z * (h / 2.0))));
            let k3 = self.rhs(&(&*rho + &k2.mapv(|z| z * (h / 2.0))));
            let k4 = self.rhs(&(&*rho + &k3.mapv(|z| z * h)));
            *rho = &*rho
                + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        }
        hermitize(rho);
        let drift = (register.trace() - trace_before).abs();
        if drift > 1e-6 {
            return Err(Error::TraceDrift { drift, dt: h });
        }
        Ok(())
    }
}

enum Engine {
    Exact(Propagator),
    Rk4(Rk4Engine),
}

impl Engine {
    fn new(segment: &PulseSegment, method: EvolutionMethod) -> Result<Self> {
        match method {
            EvolutionMethod::Exact => Ok(Engine::Exact(Propagator::new(segment)?)),
            EvolutionMethod::RungeKutta => Ok(Engine::Rk4(Rk4Engine::new(segment)?)),
        }
    }

    fn advance(&self, register: &mut TwoAtomRegister, dt: f64) -> Result<()> {
        match self {
            Engine::Exact(p) => p.advance(register, dt),
            Engine::Rk4(e) => e.advance(register, dt),
        }
    }
}

/// Evolve the register through one full segment (exact method).
pub fn evolve(register: &mut TwoAtomRegister, segment: &PulseSegment) -> Result<()> {
    evolve_with(register, segment, EvolutionMethod::Exact)
}

/// Evolve the register through one full segment with an explicit method.
pub fn evolve_with(
    register: &mut TwoAtomRegister,
    segment: &PulseSegment,
    method: EvolutionMethod,
) -> Result<()> {
    Engine::new(segment, method)?.advance(register, segment.duration)
}

/// Populations versus time along a pulse sequence.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Populations of the 16 basis states at each time, in pair-index order.
    pub populations: Vec<[f64; DIM]>,
}

impl Trajectory {
    pub fn column(&self, a: Level, b: Level) -> Vec<f64> {
        let i = pair_index(a, b);
        self.populations.iter().map(|p| p[i]).collect()
    }

    pub fn qubit_populations(&self) -> Vec<QubitPopulations> {
        self.populations
            .iter()
            .map(|p| QubitPopulations {
                p11: p[pair_index(Level::One, Level::One)],
                p10: p[pair_index(Level::One, Level::Zero)],
                p01: p[pair_index(Level::Zero, Level::One)],
                p00: p[pair_index(Level::Zero, Level::Zero)],
            })
            .collect()
    }

    pub fn p11(&self) -> Vec<f64> {
        self.column(Level::One, Level::One)
    }

    pub fn p_single(&self) -> Vec<f64> {
        let p10 = self.column(Level::One, Level::Zero);
        let p01 = self.column(Level::Zero, Level::One);
        p10.iter().zip(&p01).map(|(a, b)| a + b).collect()
    }

    pub fn p00(&self) -> Vec<f64> {
        self.column(Level::Zero, Level::Zero)
    }
}

/// Run a sequence and sample populations at the requested times.
pub fn run_sequence(
    initial: &TwoAtomRegister,
    sequence: &PulseSequence,
    sample_times: &[f64],
) -> Result<Trajectory> {
    run_sequence_with(initial, sequence, sample_times, EvolutionMethod::Exact)
}

/// [`run_sequence`] with an explicit integration method.
pub fn run_sequence_with(
    initial: &TwoAtomRegister,
    sequence: &PulseSequence,
    sample_times: &[f64],
    method: EvolutionMethod,
) -> Result<Trajectory> {
    sequence.validate()?;
    let total = sequence.total_duration();
    let tol = 1e-9 * total.max(1.0);
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "sample times must be sorted ascending".into(),
        ));
    }
    if let (Some(&first), Some(&last)) = (sample_times.first(), sample_times.last()) {
        if first < 0.0 || last > total + tol {
            return Err(Error::InvalidParameter(format!(
                "sample times must lie within [0, {total}] µs"
            )));
        }
    }

    let mut register = initial.clone();
    let mut out = Trajectory {
        times: Vec::with_capacity(sample_times.len()),
        populations: Vec::with_capacity(sample_times.len()),
    };
    let mut record = |t: f64, reg: &TwoAtomRegister| -> Result<()> {
        let pops = reg.populations();
        let sum: f64 = pops.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::TraceDrift {
                drift: (sum - 1.0).abs(),
                dt: t,
            });
        }
        out.times.push(t);
        out.populations.push(pops);
        Ok(())
    };

    let mut cursor = 0.0; // absolute time of the register state
    let mut next_sample = 0usize;
    let mut seg_start = 0.0;
    for segment in &sequence.segments {
        let seg_end = seg_start + segment.duration;
        let engine = Engine::new(segment, method)?;
        while next_sample < sample_times.len() && sample_times[next_sample] <= seg_end + tol {
            let t = sample_times[next_sample].min(seg_end);
            engine.advance(&mut register, (t - cursor).max(0.0))?;
            cursor = t;
            record(sample_times[next_sample], &register)?;
            next_sample += 1;
        }
        engine.advance(&mut register, (seg_end - cursor).max(0.0))?;
        cursor = seg_end;
        seg_start = seg_end;
    }
    Ok(out)
}

/// Blockaded-Rabi experiment: both atoms start in `|1⟩`, the dressing and
/// microwave drives run concurrently, and the microwave sits on the dressed
/// single-flip resonance `δ_mw = ΔE⁽¹⁾/h`.
pub fn simulate_blockaded_rabi(
    drive: &LaserDrive,
    u_dd: f64,
    mw_rabi: f64,
    gamma_r: f64,
    times: &[f64],
) -> Result<Trajectory> {
    simulate_blockaded_rabi_with(drive, u_dd, mw_rabi, gamma_r, times, EvolutionMethod::Exact)
}

/// [`simulate_blockaded_rabi`] with an explicit integration method.
pub fn simulate_blockaded_rabi_with(
    drive: &LaserDrive,
    u_dd: f64,
    mw_rabi: f64,
    gamma_r: f64,
    times: &[f64],
    method: EvolutionMethod,
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("times must be nonempty".into()));
    }
    let delta_mw = single_atom_light_shift(drive)?;
    let segment = PulseSegment {
        duration: *times.last().unwrap(),
        microwave: Some(MicrowaveDrive::new(mw_rabi, delta_mw, 0.0)?),
        dressing: Some(*drive),
        u_dd,
        decay: DecayChannels::all_to_dark(gamma_r),
    };
    let sequence = PulseSequence::new(vec![segment], 0)?;
    let initial = TwoAtomRegister::pure_product(Level::One, Level::One);
    run_sequence_with(&initial, &sequence, times, method)
}

/// Two-π-pulse Rydberg lifetime experiment.
///
/// Atom 1 starts in `|0⟩` and is driven on the bare optical resonance; a π
/// pulse, a variable dark delay, and a second π pulse bracket the decay.
/// Atom 2 idles in `|1⟩`. Returns `(delay, ground-return probability)`.
pub fn simulate_lifetime(
    drive: &LaserDrive,
    gamma_r: f64,
    delays: &[f64],
) -> Result<Vec<(f64, f64)>> {
    drive.validate()?;
    if drive.rabi_freq <= 0.0 {
        return Err(Error::InvalidParameter(
            "the lifetime sequence needs a nonzero optical Rabi frequency".into(),
        ));
    }
    if delays.iter().any(|d| *d < 0.0) {
        return Err(Error::InvalidParameter("delays must be ≥ 0".into()));
    }
    let t_pi = 1.0 / (2.0 * drive.rabi_freq);
    let pulse = PulseSegment {
        duration: t_pi,
        microwave: None,
        dressing: Some(*drive),
        u_dd: 0.0,
        decay: DecayChannels::all_to_dark(gamma_r),
    };
    let dark = PulseSegment {
        duration: 0.0, // actual delay supplied per advance
        microwave: None,
        dressing: None,
        u_dd: 0.0,
        decay: DecayChannels::all_to_dark(gamma_r),
    };
    let pulse_prop = Propagator::new(&pulse)?;
    let dark_prop = Propagator::new(&dark)?;
    let initial = TwoAtomRegister::pure_product(Level::Zero, Level::One);
    delays
        .iter()
        .map(|&delay| {
            let mut reg = initial.clone();
            pulse_prop.advance(&mut reg, t_pi)?;
            dark_prop.advance(&mut reg, delay)?;
            pulse_prop.advance(&mut reg, t_pi)?;
            let ground: f64 = Level::ALL
                .iter()
                .map(|&b| reg.population(Level::Zero, b))
                .sum();
            Ok((delay, ground))
        })
        .collect()
}

/// Deterministic per-shot Doppler detuning offsets: one Gaussian draw per
/// shot from a ChaCha stream seeded by `seed`.
pub fn sample_doppler_offsets(sigma: f64, shots: usize, seed: u64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![0.0; shots];
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    (0..shots).map(|_| normal.sample(&mut rng)).collect()
}

/// Run one trajectory per detuning offset in parallel and average the
/// populations. Shots are merged in shot-index order, so the result is
/// byte-identical regardless of thread count.
pub fn monte_carlo_trajectories<F>(offsets: &[f64], run: F) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<Trajectory> + Sync,
{
    if offsets.is_empty() {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    let shots: Vec<Trajectory> = offsets
        .par_iter()
        .map(|&d| run(d))
        .collect::<Result<Vec<_>>>()?;
    let times = shots[0].times.clone();
    for s in &shots {
        if s.times != times {
            return Err(Error::InvalidParameter(
                "all shots must share one time grid".into(),
            ));
        }
    }
    let n = shots.len() as f64;
    let populations = (0..times.len())
        .map(|k| {
            std::array::from_fn(|i| shots.iter().map(|s| s.populations[k][i]).sum::<f64>() / n)
        })
        .collect();
    Ok(Trajectory { times, populations })
}

/// Run one register per detuning offset in parallel and average them.
/// Deterministic for a fixed seed regardless of thread count.
pub fn monte_carlo_register<F>(offsets: &[f64], run: F) -> Result<TwoAtomRegister>
where
    F: Fn(f64) -> Result<TwoAtomRegister> + Sync,
{
    if offsets.is_empty() {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    let shots: Vec<TwoAtomRegister> = offsets
        .par_iter()
        .map(|&d| run(d))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(f64, TwoAtomRegister)> = shots.into_iter().map(|r| (1.0, r)).collect();
    TwoAtomRegister::mixture(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig3_segment() -> PulseSegment {
        let drive = LaserDrive::new(4.3, 1.1).unwrap();
        PulseSegment {
            duration: 2.0,
            microwave: Some(MicrowaveDrive::new(0.176_776_695, 1.45, 0.0).unwrap()),
            dressing: Some(drive),
            u_dd: -50.0,
            decay: DecayChannels::all_to_dark(0.1),
        }
    }

    #[test]
    fn hamiltonian_with_all_drives_off_is_zero() {
        let h = build_hamiltonian(&PulseSegment::idle(1.0));
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn hamiltonian_u_dd_only_touches_rr() {
        let seg = PulseSegment {
            u_dd: -7.5,
            ..PulseSegment::idle(1.0)
        };
        let h = build_hamiltonian(&seg);
        let rr = pair_index(Level::Rydberg, Level::Rydberg);
        for ((i, j), z) in h.indexed_iter() {
            if (i, j) == (rr, rr) {
                assert_relative_eq!(z.re, -7.5);
            } else {
                assert_eq!(*z, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn microwave_only_spectrum_is_collective() {
        // At δ_mw = 0 the two-qubit block of Σ (Ω/2)σ_x^(i) has eigenvalues
        // {-Ω, 0, 0, +Ω}: the analytic 4×4 oracle for a collective rotation.
        let om = 0.7;
        let seg = PulseSegment {
            microwave: Some(MicrowaveDrive::new(om, 0.0, 0.0).unwrap()),
            ..PulseSegment::idle(1.0)
        };
        let h = build_hamiltonian(&seg);
        let qubit_idx = [
            pair_index(Level::One, Level::One),
            pair_index(Level::One, Level::Zero),
            pair_index(Level::Zero, Level::One),
            pair_index(Level::Zero, Level::Zero),
        ];
        let mut block: Array2<C64> = Array2::zeros((4, 4));
        for (a, &i) in qubit_idx.iter().enumerate() {
            for (b, &j) in qubit_idx.iter().enumerate() {
                block[[a, b]] = h[[i, j]];
            }
        }
        let (mut vals, _) = linalg::hermitian_eigen(&block).unwrap();
        vals.as_slice_mut().unwrap().sort_by(f64::total_cmp);
        let expected = [-om, 0.0, 0.0, om];
        for (got, want) in vals.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rotating_frame_gauge_invariance() {
        // Shifting δ_mw by +c and Δ_L by -c moves only the |0⟩ diagonals;
        // restoring those terms must reproduce the original Hamiltonian and
        // hence identical population trajectories.
        let c = 0.83;
        let mut base = fig3_segment();
        base.decay = DecayChannels::none();
        let mut shifted = base;
        let mw = base.microwave.unwrap();
        let dr = base.dressing.unwrap();
        shifted.microwave =
            Some(MicrowaveDrive::new(mw.rabi_freq, mw.detuning + c, mw.phase).unwrap());
        shifted.dressing = Some(LaserDrive {
            detuning: dr.detuning - c,
            ..dr
        });
        let eye: Array2<C64> = Array2::eye(4);
        let mut n0: Array2<C64> = Array2::zeros((4, 4));
        n0[[Level::Zero.index(), Level::Zero.index()]] = C64::new(1.0, 0.0);
        let compensation = (kron(&n0, &eye) + kron(&eye, &n0)).mapv(|z| z * c);
        let h_equiv = build_hamiltonian(&shifted) + &compensation;
        assert!(linalg::max_abs_diff(&h_equiv, &build_hamiltonian(&base)) < 1e-12);

        // evolve the register through the segment path and the compensated
        // Hamiltonian directly; populations must match
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let initial = TwoAtomRegister::pure_product(Level::One, Level::One);
        let seq = PulseSequence::new(vec![base], 0).unwrap();
        let traj = run_sequence(&initial, &seq, &times).unwrap();
        let (e, v) = linalg::hermitian_eigen(&h_equiv).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let u = linalg::unitary_at(&e, &v, t);
            let mut reg = initial.clone();
            reg.apply_unitary(&u);
            let pops = reg.populations();
            for i in 0..DIM {
                assert!(
                    (pops[i] - traj.populations[k][i]).abs() < 1e-8,
                    "t = {t}, state {i}"
                );
            }
        }
    }

    #[test]
    fn zero_hamiltonian_keeps_register_fixed() {
        let mut reg = TwoAtomRegister::pure_product(Level::One, Level::Zero);
        let before = reg.populations();
        evolve(&mut reg, &PulseSegment::idle(7.3)).unwrap();
        let after = reg.populations();
        for i in 0..DIM {
            assert!((before[i] - after[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_decay_is_exponential() {
        // |r,1⟩ with Γ = 0.1 µs⁻¹ all-to-dark for 10 µs: P_r = e⁻¹.
        let mut reg = TwoAtomRegister::pure_product(Level::Rydberg, Level::One);
        let seg = PulseSegment {
            duration: 10.0,
            decay: DecayChannels::all_to_dark(0.1),
            ..PulseSegment::idle(10.0)
        };
        evolve(&mut reg, &seg).unwrap();
        let pr: f64 = Level::ALL
            .iter()
            .map(|&b| reg.population(Level::Rydberg, b))
            .sum();
        assert!((pr - (-1.0f64).exp()).abs() < 1e-4, "P_r = {pr}");
        reg.check_physical().unwrap();
    }

    #[test]
    fn resonant_pi_pulse_transfers_fully() {
        // 2-level Rabi oracle: Ω_L = 4.3 on bare resonance, t = 1/(2Ω).
        let drive = LaserDrive::new(4.3, 0.0).unwrap();
        let seg = PulseSegment {
            duration: 1.0 / (2.0 * 4.3),
            dressing: Some(drive),
            ..PulseSegment::idle(0.0)
        };
        let mut reg = TwoAtomRegister::pure_product(Level::Zero, Level::One);
        evolve(&mut reg, &seg).unwrap();
        let pr = reg.population(Level::Rydberg, Level::One);
        assert!((pr - 1.0).abs() < 1e-6, "P_r = {pr}");
    }

    #[test]
    fn exact_and_rk4_agree_with_decay() {
        let seg = fig3_segment();
        let mut exact = TwoAtomRegister::pure_product(Level::One, Level::One);
        let mut rk4 = exact.clone();
        evolve_with(&mut exact, &seg, EvolutionMethod::Exact).unwrap();
        evolve_with(&mut rk4, &seg, EvolutionMethod::RungeKutta).unwrap();
        let (pa, pb) = (exact.populations(), rk4.populations());
        for i in 0..DIM {
            assert!(
                (pa[i] - pb[i]).abs() < 1e-6,
                "state {i}: exact {} vs rk4 {}",
                pa[i],
                pb[i]
            );
        }
    }

    #[test]
    fn rk4_step_halving_is_converged() {
        let seg = fig3_segment();
        let engine = Rk4Engine::new(&seg).unwrap();
        let mut a = TwoAtomRegister::pure_product(Level::One, Level::One);
        let mut b = a.clone();
        engine.advance_with_step(&mut a, seg.duration, engine.dt_max).unwrap();
        engine
            .advance_with_step(&mut b, seg.duration, engine.dt_max / 2.0)
            .unwrap();
        for i in 0..DIM {
            assert!(
                (a.populations()[i] - b.populations()[i]).abs() < 1e-7,
                "state {i} changed by {:.3e} on step halving",
                (a.populations()[i] - b.populations()[i]).abs()
            );
        }
    }

    #[test]
    fn unitary_evolution_preserves_purity_and_decay_preserves_physicality() {
        let mut seg = fig3_segment();
        seg.decay = DecayChannels::none();
        let mut reg = TwoAtomRegister::pure_product(Level::One, Level::One);
        evolve(&mut reg, &seg).unwrap();
        assert!((reg.purity() - 1.0).abs() < 1e-8);
        reg.check_physical().unwrap();

        let seg = fig3_segment();
        let mut reg = TwoAtomRegister::pure_product(Level::One, Level::One);
        evolve(&mut reg, &seg).unwrap();
        assert!((reg.trace() - 1.0).abs() < 1e-8);
        assert!(reg.hermiticity_error() < 1e-10);
        assert!(reg.min_eigenvalue().unwrap() > -1e-8);
        assert!(reg.purity() < 1.0);
    }

    #[test]
    fn run_sequence_constant_without_drives() {
        let initial = TwoAtomRegister::pure_product(Level::One, Level::One);
        let seq = PulseSequence::new(vec![PulseSegment::idle(5.0)], 0).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let traj = run_sequence(&initial, &seq, &times).unwrap();
        for p in traj.p11() {
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn run_sequence_validates_inputs() {
        let initial = TwoAtomRegister::pure_product(Level::One, Level::One);
        assert!(PulseSequence::new(vec![], 0).is_err());
        let seq = PulseSequence::new(vec![PulseSegment::idle(1.0)], 0).unwrap();
        assert!(run_sequence(&initial, &seq, &[0.5, 0.2]).is_err());
        assert!(run_sequence(&initial, &seq, &[0.5, 2.0]).is_err());
    }

    #[test]
    fn blockaded_rabi_initial_state_and_frozen_drive() {
        let drive = LaserDrive::new(4.3, 1.1).unwrap();
        let traj = simulate_blockaded_rabi(&drive, -168.0, 0.176_776_695, 0.0, &[0.0]).unwrap();
        assert!((traj.p11()[0] - 1.0).abs() < 1e-12);
        // mw_rabi = 0: nothing moves
        let times: Vec<f64> = (0..=8).map(|k| k as f64).collect();
        let traj = simulate_blockaded_rabi(&drive, -168.0, 0.0, 0.0, &times).unwrap();
        for p in traj.p11() {
            assert!((p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn blockaded_rabi_product_state_oracle_at_zero_interaction() {
        // With the dressing off and u_dd = 0 the atoms are independent:
        // P00(t) = sin⁴(π·Ω_mw·t), the tensor product of single-qubit Rabi
        // solutions.
        let drive = LaserDrive::new(0.0, 1.0).unwrap();
        let mw = 0.176_776_695;
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.08).collect();
        let traj = simulate_blockaded_rabi(&drive, 0.0, mw, 0.0, &times).unwrap();
        for (t, p00) in times.iter().zip(traj.p00()) {
            let expected = (std::f64::consts::PI * mw * t).sin().powi(4);
            assert!(
                (p00 - expected).abs() < 1e-6,
                "t = {t}: P00 = {p00}, oracle = {expected}"
            );
        }
    }

    #[test]
    fn blockade_limit_matches_projected_model() {
        // As |u_dd| → ∞ the dynamics approach a 15-dimensional model with
        // |rr⟩ projected out.
        let drive = LaserDrive::new(4.3, 1.1).unwrap();
        let mw = 0.176_776_695;
        let delta = single_atom_light_shift(&drive).unwrap();
        let times: Vec<f64> = (0..=160).map(|k| k as f64 * 0.05).collect();
        let traj = simulate_blockaded_rabi(&drive, -1e6, mw, 0.0, &times).unwrap();
        let max_p00 = traj.p00().into_iter().fold(0.0f64, f64::max);

        // projected oracle: drop row/column of |rr⟩ from the u_dd = 0
        // Hamiltonian and evolve the pure state directly
        let seg = PulseSegment {
            duration: *times.last().unwrap(),
            microwave: Some(MicrowaveDrive::new(mw, delta, 0.0).unwrap()),
            dressing: Some(drive),
            u_dd: 0.0,
            decay: DecayChannels::none(),
        };
        let h16 = build_hamiltonian(&seg);
        let rr = pair_index(Level::Rydberg, Level::Rydberg);
        let keep: Vec<usize> = (0..DIM).filter(|&i| i != rr).collect();
        let mut h15: Array2<C64> = Array2::zeros((15, 15));
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                h15[[a, b]] = h16[[i, j]];
            }
        }
        let (e, v) = linalg::hermitian_eigen(&h15).unwrap();
        let mut psi: Array1<C64> = Array1::zeros(15);
        psi[0] = C64::new(1.0, 0.0); // |1,1⟩ keeps index 0
        let p00_idx = keep
            .iter()
            .position(|&i| i == pair_index(Level::Zero, Level::Zero))
            .unwrap();
        let mut max_oracle = 0.0f64;
        for &t in &times {
            let u = linalg::unitary_at(&e, &v, t);
            let amp = u.dot(&psi)[p00_idx];
            max_oracle = max_oracle.max(amp.norm_sqr());
        }
        assert!(
            (max_p00 - max_oracle).abs() < 1e-4,
            "max P00 {max_p00} vs projected oracle {max_oracle}"
        );
    }

    #[test]
    fn lifetime_returns_to_ground_without_decay() {
        let drive = LaserDrive::new(4.3, 0.0).unwrap();
        let points = simulate_lifetime(&drive, 0.0, &[0.0, 5.0, 20.0]).unwrap();
        for (_, p) in points {
            assert!(p >= 0.999, "return probability {p}");
        }
    }

    #[test]
    fn doppler_offsets_are_deterministic() {
        let a = sample_doppler_offsets(0.111, 8, 42);
        let b = sample_doppler_offsets(0.111, 8, 42);
        assert_eq!(a, b);
        assert_eq!(sample_doppler_offsets(0.0, 3, 42), vec![0.0; 3]);
    }

    #[test]
    fn monte_carlo_average_is_thread_order_independent() {
        let drive = LaserDrive::new(4.3, 1.3).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.2).collect();
        let offsets = sample_doppler_offsets(0.111, 16, 7);
        let run = |d: f64| {
            let shifted = LaserDrive {
                detuning: drive.detuning + d,
                ..drive
            };
            simulate_blockaded_rabi(&shifted, -168.0, 0.17, 0.0, &times)
        };
        let avg1 = monte_carlo_trajectories(&offsets, run).unwrap();
        let avg2 = monte_carlo_trajectories(&offsets, run).unwrap();
        assert_eq!(avg1.populations, avg2.populations);
    }
}
