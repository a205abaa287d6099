//! Time-varying phasor calculus for balanced three-phase quantities.
//!
//! Three representations are provided:
//!
//! * **baseband** single-phase phasors `x(t) = Re{x_bb(t) e^{jω_s t}}`, valid only
//!   while the envelope stays strictly low-pass (bandwidth below `ω_s`);
//! * **space phasors** in a rotating d-q frame obtained through the Park
//!   transformation. This is an exact change of coordinates with no bandwidth
//!   restriction, and it is the representation every dynamic model in this
//!   crate is written in;
//! * **generalized averaging**: sliding-window Fourier coefficients
//!   `⟨x⟩_k(t)`, used here as a calculus and cross-checking utility only.
//!
//! Every phasor carries the [`Frame`] it is expressed in and arithmetic across
//! frames is rejected.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Synchronous speed of a 60 Hz system in electrical rad/s.
pub const OMEGA_S: f64 = 120.0 * PI;

const TWO_PI_3: f64 = 2.0 * PI / 3.0;

/// `α = e^{j2π/3}`.
pub fn alpha() -> Complex64 {
    Complex64::from_polar(1.0, TWO_PI_3)
}

/// Reference frame a [`Phasor`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// System-wide frame rotating at synchronous speed (D-Q).
    Synchronous,
    /// Stationary α-β frame.
    Stationary,
    /// Rotor q-d frame of machine `id`.
    Machine(usize),
    /// Control d-q frame of converter `id`.
    Converter(usize),
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Synchronous => write!(f, "DQ"),
            Frame::Stationary => write!(f, "alpha-beta"),
            Frame::Machine(i) => write!(f, "machine[{i}]"),
            Frame::Converter(i) => write!(f, "converter[{i}]"),
        }
    }
}

/// Complex quantity `re + j·im` tagged with its frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phasor {
    pub re: f64,
    pub im: f64,
    pub frame: Frame,
}

impl Phasor {
    pub fn new(re: f64, im: f64, frame: Frame) -> Self {
        Self { re, im, frame }
    }

    pub fn from_complex(z: Complex64, frame: Frame) -> Self {
        Self::new(z.re, z.im, frame)
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(0.0, 0.0, frame)
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn arg(&self) -> f64 {
        self.im.atan2(self.re)
    }

    fn require(&self, other: &Phasor) -> Result<()> {
        if self.frame == other.frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch {
                expected: self.frame,
                found: other.frame,
            })
        }
    }

    pub fn checked_add(self, other: Phasor) -> Result<Phasor> {
        self.require(&other)?;
        Ok(Phasor::from_complex(self.complex() + other.complex(), self.frame))
    }

    pub fn checked_sub(self, other: Phasor) -> Result<Phasor> {
        self.require(&other)?;
        Ok(Phasor::from_complex(self.complex() - other.complex(), self.frame))
    }

    /// Complex product; the result stays in `self`'s frame.
    pub fn checked_mul(self, other: Phasor) -> Result<Phasor> {
        self.require(&other)?;
        Ok(Phasor::from_complex(self.complex() * other.complex(), self.frame))
    }
}

impl Mul<f64> for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: f64) -> Phasor {
        Phasor::new(self.re * rhs, self.im * rhs, self.frame)
    }
}

/// Instantaneous values of the three phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePhaseSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhaseSample {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Balanced set `X cos(φ)`, `X cos(φ − 2π/3)`, `X cos(φ − 4π/3)`.
    pub fn balanced(amplitude: f64, phi: f64) -> Self {
        Self::new(
            amplitude * phi.cos(),
            amplitude * (phi - TWO_PI_3).cos(),
            amplitude * (phi - 2.0 * TWO_PI_3).cos(),
        )
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        (self.a + self.b + self.c).abs() <= tol
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }
}

impl Add for ThreePhaseSample {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

impl Sub for ThreePhaseSample {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c)
    }
}

impl Mul<f64> for ThreePhaseSample {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.a * k, self.b * k, self.c * k)
    }
}

/// Angle of a rotating frame. `rho` integrates `omega·ω_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAngle {
    pub frame: Frame,
    /// Electrical angle, rad.
    pub rho: f64,
    /// Instantaneous speed, pu of `ω_s`.
    pub omega: f64,
}

impl FrameAngle {
    pub fn new(frame: Frame, rho: f64, omega: f64) -> Self {
        Self { frame, rho, omega }
    }

    /// Synchronous D-Q frame at time `t`.
    pub fn synchronous(t: f64) -> Self {
        Self::new(Frame::Synchronous, OMEGA_S * t, 1.0)
    }

    /// Advances the angle by `dt` seconds at constant speed.
    pub fn advanced(&self, dt: f64, omega_s: f64) -> Self {
        Self::new(self.frame, self.rho + self.omega * omega_s * dt, self.omega)
    }
}

/// Park transformation `[1 j 0]·P(ρ)·x`, returning the d-q phasor and the
/// zero-sequence component.
pub fn park_transform(x: &ThreePhaseSample, angle: &FrameAngle) -> (Phasor, f64) {
    let r = angle.rho;
    let (ca, cb, cc) = (r.cos(), (r - TWO_PI_3).cos(), (r + TWO_PI_3).cos());
    let (sa, sb, sc) = (r.sin(), (r - TWO_PI_3).sin(), (r + TWO_PI_3).sin());
    let k = 2.0 / 3.0;
    let d = k * (ca * x.a + cb * x.b + cc * x.c);
    let q = -k * (sa * x.a + sb * x.b + sc * x.c);
    let zero = (x.a + x.b + x.c) / 3.0;
    (Phasor::new(d, q, angle.frame), zero)
}

/// Inverse Park transformation.
pub fn inverse_park(p: &Phasor, zero: f64, angle: &FrameAngle) -> Result<ThreePhaseSample> {
    if p.frame != angle.frame {
        return Err(Error::FrameMismatch {
            expected: angle.frame,
            found: p.frame,
        });
    }
    let r = angle.rho;
    let phase = |shift: f64| p.re * (r - shift).cos() - p.im * (r - shift).sin() + zero;
    Ok(ThreePhaseSample::new(
        phase(0.0),
        phase(TWO_PI_3),
        phase(-TWO_PI_3),
    ))
}

/// Space phasor `(2/3)[1 α α*]·x` in the stationary frame.
pub fn space_phasor(x: &ThreePhaseSample) -> Phasor {
    let a = alpha();
    let z = (Complex64::from(x.a) + a * x.b + a.conj() * x.c) * (2.0 / 3.0);
    Phasor::from_complex(z, Frame::Stationary)
}

/// Phase values of a zero-sum set recovered from its space phasor:
/// `Re{x̄}`, `Re{α* x̄}`, `Re{α x̄}`.
pub fn phases_from_space_phasor(p: &Phasor) -> ThreePhaseSample {
    let z = p.complex();
    let a = alpha();
    ThreePhaseSample::new(z.re, (a.conj() * z).re, (a * z).re)
}

/// Multiplies by `e^{jδ}` and retags the result as `target`.
pub fn rotate_frame(p: &Phasor, delta: f64, target: Frame) -> Phasor {
    Phasor::from_complex(p.complex() * Complex64::from_polar(1.0, delta), target)
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSamples {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl UniformSamples {
    pub fn from_fn(t0: f64, dt: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(t0 + i as f64 * dt)).collect();
        Self { t0, dt, values }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// Sliding-window Fourier coefficient `⟨x⟩_k(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierCoefficient {
    pub k: i32,
    pub value: Complex64,
    /// Window length, s.
    pub window: f64,
}

/// Sign of the exponential kernel used by [`sequence_coefficients`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelSign {
    /// `e^{-jkω_s τ}`, the same kernel as the scalar coefficient.
    #[default]
    Analysis,
    /// `e^{+jkω_s τ}`.
    Conjugate,
}

/// Positive-, negative- and zero-sequence coefficients of harmonic `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceCoefficients {
    pub k: i32,
    pub pos: Complex64,
    pub neg: Complex64,
    pub zero: Complex64,
}

/// Quadrature of `(1/T)∫_{t-T}^{t} g(τ) dτ` where `g(τ) = Σ_m w_m(τ)·x_m(τ)` and
/// the `x_m` are uniformly sampled. The regular part of the window uses the
/// trapezoidal rule with fourth-order Gregory end corrections; the fractional
/// interval at the window start uses 3-point Gauss-Legendre on a cubic
/// interpolant of the samples.
fn window_average<W>(channels: &[&UniformSamples], period: f64, t: f64, kernel: W) -> Result<Complex64>
where
    W: Fn(f64, &[f64]) -> Complex64,
{
    let s = channels[0];
    let dt = s.dt;
    let n = s.values.len();
    let end_f = (t - s.t0) / dt;
    let end = end_f.round();
    if (end_f - end).abs() > 1e-6 || end < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "window end t = {t} does not fall on a sample"
        )));
    }
    let end = end as usize;
    let full = (period / dt).floor() as usize;
    let frac = period / dt - full as f64;
    // Gregory corrections and the cubic interpolant need a few extra samples.
    let needed = full + 4;
    if end >= n || end + 1 < needed {
        return Err(Error::InsufficientWindow {
            needed,
            available: end.min(n.saturating_sub(1)) + 1,
        });
    }
    let start = end - full;
    let sample = |i: usize| -> Complex64 {
        let vals: Vec<f64> = channels.iter().map(|c| c.values[i]).collect();
        kernel(s.time(i), &vals)
    };
    let g: Vec<Complex64> = (start..=end).map(sample).collect();
    let m = g.len() - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    if m >= 6 {
        let w = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        for (i, gi) in g.iter().enumerate() {
            let wi = if i < 3 {
                w[i]
            } else if m - i < 3 {
                w[m - i]
            } else {
                1.0
            };
            acc += gi * wi;
        }
    } else {
        for (i, gi) in g.iter().enumerate() {
            let wi = if i == 0 || i == m { 0.5 } else { 1.0 };
            acc += gi * wi;
        }
    }
    acc *= dt;

    if frac > 1e-12 {
        // Fractional interval [t - T, t_start]; interpolate from the four
        // samples nearest to it.
        let a = s.time(start) - frac * dt;
        let base = start - 1;
        let nodes: Vec<f64> = (0..4).map(|j| s.time(base + j)).collect();
        let lagrange = |x: f64, c: &UniformSamples| -> f64 {
            let mut sum = 0.0;
            for j in 0..4 {
                let mut l = 1.0;
                for k in 0..4 {
                    if k != j {
                        l *= (x - nodes[k]) / (nodes[j] - nodes[k]);
                    }
                }
                sum += l * c.values[base + j];
            }
            sum
        };
        let half = 0.5 * frac * dt;
        let mid = a + half;
        let gl = [
            (-(0.6f64).sqrt(), 5.0 / 9.0),
            (0.0, 8.0 / 9.0),
            ((0.6f64).sqrt(), 5.0 / 9.0),
        ];
        for (xi, wi) in gl {
            let tau = mid + half * xi;
            let vals: Vec<f64> = channels.iter().map(|c| lagrange(tau, c)).collect();
            acc += kernel(tau, &vals) * (wi * half);
        }
    }
    Ok(acc / period)
}

/// `⟨x⟩_k(t) = (1/T)∫_{t-T}^{t} x(τ) e^{-jkω_sτ} dτ` with `ω_s = 2π/T`.
pub fn sliding_coefficient(
    samples: &UniformSamples,
    k: i32,
    period: f64,
    t: f64,
) -> Result<FourierCoefficient> {
    let w = 2.0 * PI / period;
    let value = window_average(&[samples], period, t, |tau, x| {
        Complex64::from_polar(x[0], -(k as f64) * w * tau)
    })?;
    Ok(FourierCoefficient {
        k,
        value,
        window: period,
    })
}

/// Dynamic sequence components `(1/T)∫ e^{∓jkω_sτ} 𝒯^H x(τ) dτ`.
pub fn sequence_coefficients(
    phases: [&UniformSamples; 3],
    k: i32,
    period: f64,
    t: f64,
    sign: KernelSign,
) -> Result<SequenceCoefficients> {
    let w = 2.0 * PI / period;
    let s = match sign {
        KernelSign::Analysis => -1.0,
        KernelSign::Conjugate => 1.0,
    };
    let a = alpha();
    let r3 = 1.0 / 3f64.sqrt();
    // Rows of 𝒯^H.
    let rows = [
        [Complex64::from(r3), a * r3, a.conj() * r3],
        [Complex64::from(r3), a.conj() * r3, a * r3],
        [Complex64::from(r3); 3],
    ];
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (o, row) in out.iter_mut().zip(rows.iter()) {
        *o = window_average(&phases, period, t, |tau, x| {
            let e = Complex64::from_polar(1.0, s * k as f64 * w * tau);
            e * (row[0] * x[0] + row[1] * x[1] + row[2] * x[2])
        })?;
    }
    Ok(SequenceCoefficients {
        k,
        pos: out[0],
        neg: out[1],
        zero: out[2],
    })
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Analytic modulated signal `X(t) cos(ω_s t + θ(t))` with known derivatives.
pub struct Envelope {
    amplitude: ScalarFn,
    amplitude_dot: ScalarFn,
    phase: ScalarFn,
    phase_dot: ScalarFn,
    /// Declared bandwidth of the envelope, rad/s.
    pub bandwidth: f64,
}

impl Envelope {
    pub fn new(
        amplitude: impl Fn(f64) -> f64 + Send + Sync + 'static,
        amplitude_dot: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phase: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phase_dot: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bandwidth: f64,
    ) -> Self {
        Self {
            amplitude: Box::new(amplitude),
            amplitude_dot: Box::new(amplitude_dot),
            phase: Box::new(phase),
            phase_dot: Box::new(phase_dot),
            bandwidth,
        }
    }

    pub fn constant(amplitude: f64, phase: f64) -> Self {
        Self::new(move |_| amplitude, |_| 0.0, move |_| phase, |_| 0.0, 0.0)
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        (self.amplitude)(t)
    }

    pub fn phase(&self, t: f64) -> f64 {
        (self.phase)(t)
    }

    /// `X(t) e^{jθ(t)}`.
    pub fn complex(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude(t), self.phase(t))
    }

    /// Envelope of `dx/dt`: `(Ẋ + jX(ω_s + θ̇)) e^{jθ}`.
    fn derivative_complex(&self, t: f64, omega_s: f64) -> Complex64 {
        let x = self.amplitude(t);
        Complex64::new((self.amplitude_dot)(t), x * (omega_s + (self.phase_dot)(t)))
            * Complex64::from_polar(1.0, self.phase(t))
    }

    /// Phase-`shift` signal value `X cos(ω_s t + θ − shift)`.
    fn value(&self, t: f64, omega_s: f64, shift: f64) -> f64 {
        self.amplitude(t) * (omega_s * t + self.phase(t) - shift).cos()
    }

    fn derivative(&self, t: f64, omega_s: f64, shift: f64) -> f64 {
        (self.derivative_complex(t, omega_s) * Complex64::from_polar(1.0, omega_s * t - shift)).re
    }
}

/// Single-phase baseband phasor, restricted to low-pass envelopes.
pub struct BasebandPhasor {
    envelope: Envelope,
    omega_s: f64,
}

impl BasebandPhasor {
    /// Refuses envelopes whose declared bandwidth reaches the carrier; the
    /// mapping to band-pass signals is only bijective and linear below it.
    pub fn new(envelope: Envelope, omega_s: f64) -> Result<Self> {
        if !(envelope.bandwidth < omega_s) {
            return Err(Error::NotLowPass {
                bandwidth: envelope.bandwidth,
                carrier: omega_s,
            });
        }
        Ok(Self { envelope, omega_s })
    }

    pub fn phasor(&self, t: f64) -> Complex64 {
        self.envelope.complex(t)
    }

    /// `Re{x_bb(t) e^{jω_s t}}`.
    pub fn signal(&self, t: f64) -> f64 {
        (self.phasor(t) * Complex64::from_polar(1.0, self.omega_s * t)).re
    }
}

/// Which derivative identity [`derivative_rule_residual`] checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// `Υ(dx/dt) = dx_bb/dt + jω_s x_bb`.
    Baseband,
    /// `Ῡ(dx/dt) = dx̄_bb/dt + jω(t) x̄_bb`.
    SpacePhasor,
    /// `⟨dx/dt⟩_k = d⟨x⟩_k/dt + jkω_s⟨x⟩_k`.
    GeneralizedAveraging { k: i32 },
}

/// Frame speed profile for the space-phasor identity: returns `(ρ(t), ω(t))`
/// with `ω` in rad/s.
pub type FrameProfile = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// Derivative-rule check setup.
pub struct DerivativeCheck<'a> {
    pub envelope: &'a Envelope,
    pub omega_s: f64,
    /// Frame angle/speed for the space-phasor identity; synchronous when `None`.
    pub frame: Option<&'a FrameProfile>,
    pub t_start: f64,
    pub t_end: f64,
    pub sample_rate: f64,
}

fn five_point<F: Fn(f64) -> Complex64>(f: F, t: f64, h: f64) -> Complex64 {
    (f(t - 2.0 * h) - f(t - h) * 8.0 + f(t + h) * 8.0 - f(t + 2.0 * h)) / (12.0 * h)
}

/// Maximum residual of the applicable derivative identity over the window.
/// Time derivatives of phasors are taken with a five-point central stencil
/// at the sampling step; the derivative of the physical signal is analytic.
pub fn derivative_rule_residual(rep: Representation, check: &DerivativeCheck<'_>) -> Result<f64> {
    let env = check.envelope;
    let ws = check.omega_s;
    let h = 1.0 / check.sample_rate;
    let n = ((check.t_end - check.t_start) / h).floor() as usize;
    let times = (0..=n).map(|i| check.t_start + i as f64 * h);
    let mut worst: f64 = 0.0;
    match rep {
        Representation::Baseband => {
            if !(env.bandwidth < ws) {
                return Err(Error::NotLowPass {
                    bandwidth: env.bandwidth,
                    carrier: ws,
                });
            }
            for t in times {
                let lhs = env.derivative_complex(t, ws);
                let rhs = five_point(|s| env.complex(s), t, h) + Complex64::i() * ws * env.complex(t);
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Representation::SpacePhasor => {
            let sync = move |t: f64| (ws * t, ws);
            let frame: &FrameProfile = match check.frame {
                Some(f) => f,
                None => &sync,
            };
            let shifts = [0.0, TWO_PI_3, 2.0 * TWO_PI_3];
            let xbb = |t: f64| {
                let (rho, _) = frame(t);
                let x = ThreePhaseSample::new(
                    env.value(t, ws, shifts[0]),
                    env.value(t, ws, shifts[1]),
                    env.value(t, ws, shifts[2]),
                );
                park_transform(&x, &FrameAngle::new(Frame::Synchronous, rho, 1.0))
                    .0
                    .complex()
            };
            for t in times {
                let (rho, omega) = frame(t);
                let dx = ThreePhaseSample::new(
                    env.derivative(t, ws, shifts[0]),
                    env.derivative(t, ws, shifts[1]),
                    env.derivative(t, ws, shifts[2]),
                );
                let lhs = park_transform(&dx, &FrameAngle::new(Frame::Synchronous, rho, 1.0))
                    .0
                    .complex();
                let rhs = five_point(xbb, t, h) + Complex64::i() * omega * xbb(t);
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Representation::GeneralizedAveraging { k } => {
            let period = 2.0 * PI / ws;
            // Samples cover one window before t_start plus the stencil margin.
            let t0 = check.t_start - period - 8.0 * h;
            let count = ((check.t_end + 4.0 * h - t0) / h).ceil() as usize + 1;
            let x = UniformSamples::from_fn(t0, h, count, |t| env.value(t, ws, 0.0));
            let dx = UniformSamples::from_fn(t0, h, count, |t| env.derivative(t, ws, 0.0));
            let idx_of = |t: f64| ((t - t0) / h).round() as usize;
            let coef = |s: &UniformSamples, i: usize| -> Result<Complex64> {
                Ok(sliding_coefficient(s, k, period, s.time(i))?.value)
            };
            let start = idx_of(check.t_start);
            for i in start..=start + n {
                let lhs = coef(&dx, i)?;
                let d = (coef(&x, i - 2)? - coef(&x, i - 1)? * 8.0 + coef(&x, i + 1)? * 8.0
                    - coef(&x, i + 2)?)
                    / (12.0 * h);
                let rhs = d + Complex64::i() * (k as f64) * ws * coef(&x, i)?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn sync(rho: f64) -> FrameAngle {
        FrameAngle::new(Frame::Synchronous, rho, 1.0)
    }

    #[test]
    fn aligned_balanced_set_maps_to_unit_d_axis() {
        let rho = 0.7;
        let (p, z) = park_transform(&ThreePhaseSample::balanced(1.0, rho), &sync(rho));
        assert!((p.re - 1.0).abs() < TOL && p.im.abs() < TOL && z.abs() < TOL);
    }

    #[test]
    fn modulated_set_in_synchronous_frame_gives_envelope() {
        let (x, theta, t) = (1.3, -0.4, 0.0123);
        let set = ThreePhaseSample::balanced(x, OMEGA_S * t + theta);
        let (p, _) = park_transform(&set, &FrameAngle::synchronous(t));
        let expected = Complex64::from_polar(x, theta);
        assert!((p.complex() - expected).norm() < TOL);
    }

    #[test]
    fn pure_zero_sequence() {
        let (p, z) = park_transform(&ThreePhaseSample::new(1.0, 1.0, 1.0), &sync(0.3));
        assert!(p.norm() < TOL);
        assert!((z - 1.0).abs() < TOL);
    }

    #[test]
    fn inverse_park_columns() {
        let x = inverse_park(&Phasor::new(1.0, 0.0, Frame::Synchronous), 0.0, &sync(0.0)).unwrap();
        assert!((x.a - 1.0).abs() < TOL && (x.b + 0.5).abs() < TOL && (x.c + 0.5).abs() < TOL);
        let z = inverse_park(&Phasor::zero(Frame::Synchronous), 0.25, &sync(1.0)).unwrap();
        assert!([z.a, z.b, z.c].iter().all(|v| (v - 0.25).abs() < TOL));
    }

    #[test]
    fn inverse_park_rejects_frame_mismatch() {
        let p = Phasor::new(1.0, 0.0, Frame::Machine(0));
        assert!(matches!(
            inverse_park(&p, 0.0, &sync(0.0)),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn space_phasor_of_single_phase() {
        let p = space_phasor(&ThreePhaseSample::new(1.0, 0.0, 0.0));
        assert!((p.re - 2.0 / 3.0).abs() < TOL && p.im.abs() < TOL);
        assert_eq!(p.frame, Frame::Stationary);
    }

    #[test]
    fn space_phasor_of_balanced_set() {
        let p = space_phasor(&ThreePhaseSample::balanced(2.0, 0.9));
        assert!((p.complex() - Complex64::from_polar(2.0, 0.9)).norm() < TOL);
    }

    #[test]
    fn rotation_examples() {
        let p = Phasor::new(1.0, 0.0, Frame::Machine(1));
        let r = rotate_frame(&p, PI / 2.0, Frame::Synchronous);
        assert!(r.re.abs() < TOL && (r.im - 1.0).abs() < TOL);
        assert_eq!(r.frame, Frame::Synchronous);
        let same = rotate_frame(&p, 0.0, Frame::Machine(1));
        assert_eq!(same, p);
    }

    #[test]
    fn phasor_arithmetic_checks_frames() {
        let a = Phasor::new(1.0, 2.0, Frame::Synchronous);
        let b = Phasor::new(0.5, 0.5, Frame::Converter(0));
        assert!(a.checked_add(b).is_err());
        assert!(a.checked_sub(a).unwrap().norm() < TOL);
        assert!(a.checked_mul(b).is_err());
    }

    #[test]
    fn constant_signal_has_dc_coefficient() {
        let s = UniformSamples::from_fn(0.0, 1e-4, 400, |_| 2.5);
        let c = sliding_coefficient(&s, 0, 1.0 / 60.0, s.time(399)).unwrap();
        assert!((c.value - Complex64::from(2.5)).norm() < 1e-12);
    }

    #[test]
    fn short_record_is_rejected() {
        let s = UniformSamples::from_fn(0.0, 1e-4, 100, |_| 1.0);
        assert!(matches!(
            sliding_coefficient(&s, 1, 1.0 / 60.0, s.time(99)),
            Err(Error::InsufficientWindow { .. })
        ));
    }

    #[test]
    fn zero_input_has_zero_sequences() {
        let s = UniformSamples::from_fn(0.0, 1e-4, 400, |_| 0.0);
        let c = sequence_coefficients([&s, &s, &s], 1, 1.0 / 60.0, s.time(399), KernelSign::Analysis)
            .unwrap();
        assert!(c.pos.norm() + c.neg.norm() + c.zero.norm() == 0.0);
    }

    #[test]
    fn baseband_refuses_wideband_envelope() {
        let env = Envelope::new(|_| 1.0, |_| 0.0, |_| 0.0, |_| 0.0, OMEGA_S);
        assert!(matches!(
            BasebandPhasor::new(env, OMEGA_S),
            Err(Error::NotLowPass { .. })
        ));
        let ok = BasebandPhasor::new(Envelope::constant(1.0, 0.2), OMEGA_S).unwrap();
        assert!((ok.signal(0.0) - 0.2f64.cos()).abs() < TOL);
    }
}
