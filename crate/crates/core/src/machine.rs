//! Sixth-order subtransient synchronous generator with static exciter,
//! droop governor and first-order turbine.
//!
//! Rotor equations are the two-axis subtransient model with states
//! `δ, ω, E'_q, E'_d, ψ_1d, ψ_2q` (no saturation). Internally the d-axis
//! lags q, so a rotor-frame pair `(x_d, x_q)` maps to the network as
//! `x_DQ = e^{jδ}(x_q − j x_d)`. Written with a leading d-axis (`x_d ← −x_d`)
//! this is the `x_DQ = e^{jδ}(x_q + j x_d)` composition used for the stator
//! current `i_sqd = i_sq + j i_sd`. [`machine_to_network`] and
//! [`network_to_machine`] are the only places that convention lives.
//!
//! Two stator treatments are provided:
//!
//! * quasistationary: stator and step-up transformer algebraic,
//!   `i = (E'' − v)/(R_g + R_s + j(L_g + L''))`;
//! * space-phasor: the combined transformer/armature current is a state,
//!   `(L_g + L'')/ω_s · di/dt = E − v − jω*(L_g + L'')i − (R_g + R_s)i` with the
//!   speed- and transformer-voltage source `E_q = ωE''_q − Ė''_d/ω_s`,
//!   `E_d = ωE''_d + Ė''_q/ω_s` (lagging-d signs). In the synchronous frame the
//!   rotor speed cancels out of the inductive term, so `ω* = 1` is exact.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DELTA: usize = 0;
pub const OMEGA: usize = 1;
pub const EQ1: usize = 2;
pub const ED1: usize = 3;
pub const PSI1D: usize = 4;
pub const PSI2Q: usize = 5;
pub const EFD: usize = 6;
pub const PGV: usize = 7;
pub const PM: usize = 8;
pub const IS_D: usize = 9;
pub const IS_Q: usize = 10;

/// States without the stator current.
pub const QPC_STATES: usize = 9;
/// States including the stator current (two reals).
pub const SPC_STATES: usize = 11;

const LABELS: [&str; SPC_STATES] = [
    "delta", "omega", "Eq1", "Ed1", "psi1d", "psi2q", "Efd", "Pgv", "Pm", "isD", "isQ",
];

/// Generator, exciter, governor and step-up transformer data. Electrical
/// values are per unit on the machine base unless converted with
/// [`SGParams::to_system_base`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGParams {
    pub rs: f64,
    pub xd: f64,
    pub xq: f64,
    pub xd1: f64,
    pub xq1: f64,
    pub xd2: f64,
    pub xq2: f64,
    pub xls: f64,
    pub td01: f64,
    pub tq01: f64,
    pub td02: f64,
    pub tq02: f64,
    /// Inertia constant, s.
    pub h: f64,
    pub d: f64,
    pub ka: f64,
    pub ta: f64,
    pub efd_min: f64,
    pub efd_max: f64,
    pub r_gov: f64,
    pub t_gov: f64,
    pub t_t: f64,
    /// Step-up transformer resistance.
    pub rg: f64,
    /// Step-up transformer leakage inductance.
    pub lg: f64,
}

impl SGParams {
    /// Two-area benchmark machine on its 900 MVA base, with a 0.15 pu
    /// step-up transformer, static exciter and 5% droop governor.
    pub fn two_area_benchmark(h: f64) -> Self {
        Self {
            rs: 0.0025,
            xd: 1.8,
            xq: 1.7,
            xd1: 0.3,
            xq1: 0.55,
            xd2: 0.25,
            xq2: 0.25,
            xls: 0.2,
            td01: 8.0,
            tq01: 0.4,
            td02: 0.03,
            tq02: 0.05,
            h,
            d: 0.0,
            ka: 200.0,
            ta: 0.01,
            efd_min: -5.0,
            efd_max: 5.0,
            r_gov: 0.05,
            t_gov: 0.2,
            t_t: 0.5,
            rg: 0.0,
            lg: 0.15,
        }
    }

    /// Rescales impedances, inertia, damping and droop from a machine rated
    /// `s_machine` to the system base `s_system`.
    pub fn to_system_base(&self, s_machine: f64, s_system: f64) -> Self {
        let z = s_system / s_machine;
        Self {
            rs: self.rs * z,
            xd: self.xd * z,
            xq: self.xq * z,
            xd1: self.xd1 * z,
            xq1: self.xq1 * z,
            xd2: self.xd2 * z,
            xq2: self.xq2 * z,
            xls: self.xls * z,
            h: self.h / z,
            d: self.d / z,
            r_gov: self.r_gov * z,
            rg: self.rg * z,
            lg: self.lg * z,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::InvalidArgument(format!("synchronous machine: {m}")));
        if !(self.xd >= self.xd1 && self.xd1 >= self.xd2 && self.xd2 > 0.0) {
            return err("need xd >= xd1 >= xd2 > 0");
        }
        if !(self.xq >= self.xq1 && self.xq1 >= self.xq2 && self.xq2 > 0.0) {
            return err("need xq >= xq1 >= xq2 > 0");
        }
        if !(self.xls < self.xd2 && self.xls < self.xq2 && self.xls >= 0.0) {
            return err("leakage reactance must lie below the subtransient reactances");
        }
        if (self.xd2 - self.xq2).abs() > 1e-3 * self.xd2 {
            return err("subtransient saliency is not modeled; xd2 and xq2 must match");
        }
        let times = [self.td01, self.tq01, self.td02, self.tq02, self.ta, self.t_gov, self.t_t];
        if times.iter().any(|&t| !(t > 0.0)) {
            return err("all time constants must be positive");
        }
        if !(self.h > 0.0) {
            return err("inertia must be positive");
        }
        if !(self.rs >= 0.0 && self.rg >= 0.0 && self.lg >= 0.0 && self.d >= 0.0) {
            return err("resistances, transformer reactance and damping must be non-negative");
        }
        if !(self.r_gov > 0.0 && self.ka > 0.0 && self.efd_max > self.efd_min) {
            return err("governor droop, exciter gain and exciter limits are inconsistent");
        }
        Ok(())
    }

    /// Combined armature and transformer impedance `R_g + R_s + j(L_g + L'')`.
    pub fn stator_impedance(&self) -> Complex64 {
        Complex64::new(self.rg + self.rs, self.lg + self.xd2)
    }

    fn kd(&self) -> (f64, f64) {
        let den = self.xd1 - self.xls;
        ((self.xd2 - self.xls) / den, (self.xd1 - self.xd2) / den)
    }

    fn kq(&self) -> (f64, f64) {
        let den = self.xq1 - self.xls;
        ((self.xq2 - self.xls) / den, (self.xq1 - self.xq2) / den)
    }
}

/// References back-solved at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SGSetpoints {
    pub v_ref: f64,
    pub p_ref: f64,
}

/// Rotor-frame `(x_d, x_q)` (lagging d) to the synchronous D-Q frame.
pub fn machine_to_network(d: f64, q: f64, delta: f64) -> Complex64 {
    Complex64::new(q, -d) * Complex64::from_polar(1.0, delta)
}

/// Synchronous D-Q frame to rotor-frame `(x_d, x_q)` (lagging d).
pub fn network_to_machine(z: Complex64, delta: f64) -> (f64, f64) {
    let w = z * Complex64::from_polar(1.0, -delta);
    (-w.im, w.re)
}

/// Subtransient EMFs `(E''_d, E''_q)`.
fn subtransient_emf(p: &SGParams, x: &[f64]) -> (f64, f64) {
    let (k1d, k2d) = p.kd();
    let (k1q, k2q) = p.kq();
    let eq2 = k1d * x[EQ1] + k2d * x[PSI1D];
    let ed2 = k1q * x[ED1] - k2q * x[PSI2Q];
    (ed2, eq2)
}

/// Rotor derivatives (`δ … ψ_2q`) for rotor-frame currents, plus the
/// electrical torque.
fn rotor_derivatives(p: &SGParams, x: &[f64], id: f64, iq: f64, omega_s: f64, dx: &mut [f64]) -> f64 {
    let (k1d, k2d) = p.kd();
    let (k1q, k2q) = p.kq();
    let (eq1, ed1, psi1d, psi2q) = (x[EQ1], x[ED1], x[PSI1D], x[PSI2Q]);
    let psi2d = k1d * eq1 + k2d * psi1d;
    let psi2q_flux = -k1q * ed1 + k2q * psi2q;
    let psid = -p.xd2 * id + psi2d;
    let psiq = -p.xq2 * iq + psi2q_flux;
    let te = psid * iq - psiq * id;

    let ad = p.xd1 - p.xls;
    let aq = p.xq1 - p.xls;
    dx[EQ1] = (-eq1 - (p.xd - p.xd1) * (id - k2d / ad * (psi1d + ad * id - eq1)) + x[EFD]) / p.td01;
    dx[PSI1D] = (-psi1d + eq1 - ad * id) / p.td02;
    dx[ED1] = (-ed1 + (p.xq - p.xq1) * (iq - k2q / aq * (psi2q + aq * iq + ed1))) / p.tq01;
    dx[PSI2Q] = (-psi2q - ed1 - aq * iq) / p.tq02;
    dx[DELTA] = omega_s * (x[OMEGA] - 1.0);
    dx[OMEGA] = (x[PM] - te - p.d * (x[OMEGA] - 1.0)) / (2.0 * p.h);
    te
}

/// Reference inputs to the excitation and speed-governing systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInputs {
    /// Terminal voltage magnitude.
    pub v_t: f64,
    pub omega: f64,
}

/// Control-state derivatives `(Ėfd, Ṗgv, Ṗm)`.
///
/// Static exciter `T_A·Ėfd = K_A(V_ref − |v_t|) − Efd` held inside its limits,
/// governor `T_gov·Ṗgv = P_ref − (ω − 1)/R − Pgv`, turbine `T_t·Ṗm = Pgv − Pm`.
pub fn exciter_governor_turbine(
    efd: f64,
    pgv: f64,
    pm: f64,
    inputs: ControlInputs,
    refs: &SGSetpoints,
    p: &SGParams,
) -> [f64; 3] {
    let mut defd = (p.ka * (refs.v_ref - inputs.v_t) - efd) / p.ta;
    if (efd >= p.efd_max && defd > 0.0) || (efd <= p.efd_min && defd < 0.0) {
        defd = 0.0;
    }
    let dpgv = (refs.p_ref - (inputs.omega - 1.0) / p.r_gov - pgv) / p.t_gov;
    let dpm = (pgv - pm) / p.t_t;
    [defd, dpgv, dpm]
}

/// Synchronous generator attached to a network node through its step-up
/// transformer.
#[derive(Debug, Clone)]
pub struct SynchronousMachine {
    pub name: String,
    /// Parameters on the system base.
    pub params: SGParams,
    pub setpoints: SGSetpoints,
    pub omega_s: f64,
}

impl SynchronousMachine {
    pub fn new(name: impl Into<String>, params: SGParams, omega_s: f64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            name: name.into(),
            params,
            setpoints: SGSetpoints::default(),
            omega_s,
        })
    }

    pub fn state_labels(&self, n: usize) -> Vec<String> {
        LABELS[..n]
            .iter()
            .map(|l| format!("{}.{l}", self.name))
            .collect()
    }

    /// Quasistationary derivatives; returns the injected current (D-Q).
    pub fn qpc_derivatives(&self, x: &[f64], v_n: Complex64, dx: &mut [f64]) -> Complex64 {
        let p = &self.params;
        let (ed2, eq2) = subtransient_emf(p, x);
        let e2 = machine_to_network(ed2, eq2, x[DELTA]);
        let i = (e2 - v_n) / p.stator_impedance();
        let (id, iq) = network_to_machine(i, x[DELTA]);
        rotor_derivatives(p, x, id, iq, self.omega_s, dx);
        let v_t = v_n + Complex64::new(p.rg, p.lg) * i;
        self.control_derivatives(x, v_t.norm(), dx);
        i
    }

    /// Norton equivalent `(y, i_src)` for the quasistationary network solve.
    pub fn norton(&self, x: &[f64]) -> (Complex64, Complex64) {
        let p = &self.params;
        let (ed2, eq2) = subtransient_emf(p, x);
        let z = p.stator_impedance();
        (z.inv(), machine_to_network(ed2, eq2, x[DELTA]) / z)
    }

    /// Space-phasor derivatives including the stator current state; returns
    /// the injected current (the stator current itself).
    pub fn spc_derivatives(&self, x: &[f64], v_n: Complex64, dx: &mut [f64]) -> Complex64 {
        let p = &self.params;
        let ws = self.omega_s;
        let i = Complex64::new(x[IS_D], x[IS_Q]);
        let (id, iq) = network_to_machine(i, x[DELTA]);
        rotor_derivatives(p, x, id, iq, ws, dx);

        let (k1d, k2d) = p.kd();
        let (k1q, k2q) = p.kq();
        let (ed2, eq2) = subtransient_emf(p, x);
        let deq2 = k1d * dx[EQ1] + k2d * dx[PSI1D];
        let ded2 = k1q * dx[ED1] - k2q * dx[PSI2Q];
        let w = x[OMEGA];
        let e_d = w * ed2 + deq2 / ws;
        let e_q = w * eq2 - ded2 / ws;
        let e = machine_to_network(e_d, e_q, x[DELTA]);

        let di = self.stator_current_derivative(e, v_n, i);
        dx[IS_D] = di.re;
        dx[IS_Q] = di.im;
        let v_t = v_n + Complex64::new(p.rg, p.lg) * i + di * (p.lg / ws);
        self.control_derivatives(x, v_t.norm(), dx);
        i
    }

    /// `di/dt` of the combined armature/transformer current for a given
    /// source voltage `e` (D-Q).
    pub fn stator_current_derivative(&self, e: Complex64, v_n: Complex64, i: Complex64) -> Complex64 {
        let z = self.params.stator_impedance();
        (e - v_n - Complex64::i() * z.im * i - z.re * i) * (self.omega_s / z.im)
    }

    fn control_derivatives(&self, x: &[f64], v_t: f64, dx: &mut [f64]) {
        let [a, b, c] = exciter_governor_turbine(
            x[EFD],
            x[PGV],
            x[PM],
            ControlInputs {
                v_t,
                omega: x[OMEGA],
            },
            &self.setpoints,
            &self.params,
        );
        dx[EFD] = a;
        dx[PGV] = b;
        dx[PM] = c;
    }

    /// Back-solves all states and references from the machine terminal
    /// voltage `v_t` and the current `i` it delivers (both D-Q). Returns the
    /// full 11-state vector; quasistationary models use the first nine.
    pub fn initialize(&mut self, v_t: Complex64, i: Complex64) -> Result<Vec<f64>> {
        let p = &self.params;
        let e_q_axis = v_t + Complex64::new(p.rs, p.xq) * i;
        let delta = e_q_axis.arg();
        let (id, iq) = network_to_machine(i, delta);
        let (vd, vq) = network_to_machine(v_t, delta);

        let ed1 = (p.xq - p.xq1) * iq;
        let psi2q = -ed1 - (p.xq1 - p.xls) * iq;
        let eq1 = vq + p.rs * iq + p.xd1 * id;
        let psi1d = eq1 - (p.xd1 - p.xls) * id;
        let efd = eq1 + (p.xd - p.xd1) * id;
        let te = (vd + p.rs * id) * id + (vq + p.rs * iq) * iq;
        if efd > p.efd_max || efd < p.efd_min {
            return Err(Error::Initialization {
                residual: efd,
                state: format!("{}.Efd (outside exciter limits)", self.name),
            });
        }
        self.setpoints = SGSetpoints {
            v_ref: v_t.norm() + efd / p.ka,
            p_ref: te,
        };
        Ok(vec![delta, 1.0, eq1, ed1, psi1d, psi2q, efd, te, te, i.re, i.im])
    }
}
