//! Droop-controlled grid-forming converter with a functional dc source.
//!
//! The dc side follows the reference-current law
//! `i_dc* = k_dc(v_dc* − v_dc) + G_c v_dc + P*/v_dc* + (P* − P_t)/v_dc*` through a
//! first-order source lag into the dc-link capacitor. The averaged bridge
//! applies the commanded voltage to an R-L-C filter, which reaches the grid
//! through an R-L step-up transformer. All ac quantities live in the converter
//! d-q frame whose angle relative to the synchronous frame is `δ_c`, driven by
//! power-frequency droop on the filtered capacitor output power.
//!
//! Control chain, outermost first:
//!
//! 1. droop: `ω_c = 1 + m_p(P* − x_P)`, `ẋ_P = ω_f(P − x_P)`;
//! 2. outer voltage loop (PI `K_p,ac`, `K_i,ac`): d-axis regulates the
//!    capacitor voltage magnitude, q-axis drives the PCC voltage onto the
//!    d-axis (`v_pcc,q → 0`);
//! 3. capacitor voltage loop (PI `K_p,v`, `K_i,v`) with output-current and
//!    `jω*C v_C` feedforward;
//! 4. filter current loop (PI `K_p,i`, `K_i,i`) with `v_C` and `jω*L i_f`
//!    feedforward.
//!
//! PI integrators are stored in output units and integrate in per-unit time:
//! `ẋ = ω_s K_i e`, `y = K_p e + x`. Plant equations use the actual frame speed `ω_c` in
//! their rotational terms; controller decoupling uses `ω* = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VDC: usize = 0;
pub const ISRC: usize = 1;
pub const IF_D: usize = 2;
pub const VC_D: usize = 4;
pub const IT_D: usize = 6;
pub const DELTA: usize = 8;
pub const XP: usize = 9;
pub const XO_D: usize = 10;
pub const XO_Q: usize = 11;
pub const XV_D: usize = 12;
pub const XI_D: usize = 14;

/// States with the transformer current as a state.
pub const SPC_STATES: usize = 16;
/// States with an algebraic transformer.
pub const QPC_STATES: usize = 14;

const LABELS: [&str; SPC_STATES] = [
    "v_dc", "i_src", "ifd", "ifq", "vcd", "vcq", "itd", "itq", "delta", "x_P", "xi_od", "xi_oq",
    "xi_vd", "xi_vq", "xi_id", "xi_iq",
];

/// Converter parameters on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GFCParams {
    /// Source lag, s.
    pub tau_c: f64,
    pub g_c: f64,
    pub c_c: f64,
    pub k_dc: f64,
    pub r: f64,
    pub l: f64,
    pub c: f64,
    pub r_on: f64,
    pub r_t: f64,
    pub l_t: f64,
    /// Power reference `P_c*`.
    pub p_ref: f64,
    pub kp_ac: f64,
    pub ki_ac: f64,
    pub kp_i: f64,
    pub ki_i: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    /// Droop gain, pu frequency per pu power.
    pub m_p: f64,
    /// Power measurement filter cutoff, rad/s.
    pub omega_f: f64,
    pub v_dc_ref: f64,
}

impl GFCParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_c", self.tau_c),
            ("g_c", self.g_c),
            ("c_c", self.c_c),
            ("k_dc", self.k_dc),
            ("l", self.l),
            ("c", self.c),
            ("l_t", self.l_t),
            ("kp_ac", self.kp_ac),
            ("ki_ac", self.ki_ac),
            ("kp_i", self.kp_i),
            ("ki_i", self.ki_i),
            ("kp_v", self.kp_v),
            ("ki_v", self.ki_v),
            ("m_p", self.m_p),
            ("omega_f", self.omega_f),
            ("v_dc_ref", self.v_dc_ref),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(format!("converter: {name} must be positive")));
        }
        if !(self.r >= 0.0 && self.r_on >= 0.0 && self.r_t >= 0.0) {
            return Err(Error::InvalidArgument("converter: resistances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn transformer_impedance(&self) -> Complex64 {
        Complex64::new(self.r_t, self.l_t)
    }
}

/// References back-solved at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GFCSetpoints {
    /// Capacitor voltage magnitude reference.
    pub v_mag: f64,
    /// Power reference used by the droop and dc-side laws.
    pub p_ref: f64,
}

/// dc-link and source-lag derivatives `(v̇_dc, i̇_src)` for terminal power
/// `p_t` and power reference `p_star`.
pub fn dc_side_derivatives(
    v_dc: f64,
    i_src: f64,
    p_t: f64,
    p_star: f64,
    p: &GFCParams,
    omega_s: f64,
) -> Result<(f64, f64)> {
    if !(v_dc > 0.0) {
        return Err(Error::InvalidArgument(format!("dc-link voltage collapsed to {v_dc}")));
    }
    Ok(dc_side_unchecked(v_dc, i_src, p_t, p_star, p, omega_s))
}

fn dc_reference_current(v_dc: f64, p_t: f64, p_star: f64, p: &GFCParams) -> f64 {
    p.k_dc * (p.v_dc_ref - v_dc) + p.g_c * v_dc + p_star / p.v_dc_ref + (p_star - p_t) / p.v_dc_ref
}

fn dc_side_unchecked(v_dc: f64, i_src: f64, p_t: f64, p_star: f64, p: &GFCParams, omega_s: f64) -> (f64, f64) {
    let i_ref = dc_reference_current(v_dc, p_t, p_star, p);
    let di = (i_ref - i_src) / p.tau_c;
    let dv = (i_src - p.g_c * v_dc - p_t / v_dc) * omega_s / p.c_c;
    (dv, di)
}

/// Measured quantities in the converter frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub v_c: Complex64,
    pub i_t: Complex64,
    pub v_pcc: Complex64,
}

impl Measurements {
    /// Power delivered by the filter capacitor node into the transformer.
    pub fn power(&self) -> f64 {
        (self.v_c * self.i_t.conj()).re
    }
}

/// Droop and outer-loop outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOutputs {
    /// Frame speed, pu.
    pub omega_c: f64,
    pub v_ref: Complex64,
    pub d_delta: f64,
    pub d_xp: f64,
    pub d_xo: Complex64,
}

pub fn droop_and_outer(
    x_p: f64,
    xi_outer: Complex64,
    m: &Measurements,
    p_star: f64,
    refs: &GFCSetpoints,
    p: &GFCParams,
    omega_s: f64,
) -> OuterOutputs {
    let omega_c = 1.0 + p.m_p * (p_star - x_p);
    let e = Complex64::new(refs.v_mag - m.v_c.norm(), -m.v_pcc.im);
    OuterOutputs {
        omega_c,
        v_ref: xi_outer + e * p.kp_ac,
        d_delta: omega_s * (omega_c - 1.0),
        d_xp: p.omega_f * (m.power() - x_p),
        d_xo: e * (p.ki_ac * omega_s),
    }
}

/// Inner-loop outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutputs {
    pub e_conv: Complex64,
    pub i_ref: Complex64,
    pub d_xv: Complex64,
    pub d_xi: Complex64,
}

pub fn inner_loops(
    v_ref: Complex64,
    m: &Measurements,
    i_f: Complex64,
    xi_v: Complex64,
    xi_i: Complex64,
    p: &GFCParams,
    omega_s: f64,
) -> InnerOutputs {
    let j = Complex64::i();
    let ev = v_ref - m.v_c;
    let i_ref = m.i_t + j * p.c * m.v_c + ev * p.kp_v + xi_v;
    let ei = i_ref - i_f;
    let e_conv = m.v_c + j * p.l * i_f + ei * p.kp_i + xi_i;
    InnerOutputs {
        e_conv,
        i_ref,
        d_xv: ev * (p.ki_v * omega_s),
        d_xi: ei * (p.ki_i * omega_s),
    }
}

/// Filter and transformer derivatives `(di_f, dv_C, di_t)` in the converter
/// frame rotating at `omega_c` (pu).
pub fn ac_side_derivatives(
    e_conv: Complex64,
    i_f: Complex64,
    m: &Measurements,
    omega_c: f64,
    p: &GFCParams,
    omega_s: f64,
) -> (Complex64, Complex64, Complex64) {
    let j = Complex64::i();
    let di_f = (e_conv - m.v_c - (p.r + p.r_on) * i_f - j * omega_c * p.l * i_f) * (omega_s / p.l);
    let dv_c = (i_f - m.i_t - j * omega_c * p.c * m.v_c) * (omega_s / p.c);
    let di_t = (m.v_c - m.v_pcc - p.r_t * m.i_t - j * omega_c * p.l_t * m.i_t) * (omega_s / p.l_t);
    (di_f, dv_c, di_t)
}

/// Power at the bridge terminals, `Re{e_conv · i_f*}`.
pub fn terminal_power(e_conv: Complex64, i_f: Complex64) -> f64 {
    (e_conv * i_f.conj()).re
}

/// Grid-forming converter attached to a network node through its transformer.
#[derive(Debug, Clone)]
pub struct GridFormingConverter {
    pub name: String,
    pub params: GFCParams,
    pub setpoints: GFCSetpoints,
    pub omega_s: f64,
}

fn c(x: &[f64], k: usize) -> Complex64 {
    Complex64::new(x[k], x[k + 1])
}

fn put(dx: &mut [f64], k: usize, z: Complex64) {
    dx[k] = z.re;
    dx[k + 1] = z.im;
}

/// Signals of interest evaluated along the way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterSignals {
    pub e_conv: Complex64,
    pub p_t: f64,
    pub omega_c: f64,
    pub i_t: Complex64,
    /// Injection into the network node, D-Q frame.
    pub injection: Complex64,
}

impl GridFormingConverter {
    pub fn new(name: impl Into<String>, params: GFCParams, omega_s: f64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            name: name.into(),
            setpoints: GFCSetpoints {
                v_mag: 1.0,
                p_ref: params.p_ref,
            },
            params,
            omega_s,
        })
    }

    pub fn state_labels(&self, spc: bool) -> Vec<String> {
        LABELS
            .iter()
            .enumerate()
            .filter(|(k, _)| spc || !(IT_D..IT_D + 2).contains(k))
            .map(|(_, l)| format!("{}.{l}", self.name))
            .collect()
    }

    /// Full 16-state derivatives given the transformer current `i_t` (converter
    /// frame) and the network node voltage (D-Q). `u` modulates the power
    /// reference.
    fn full_derivatives(&self, x: &[f64], i_t: Complex64, v_n: Complex64, u: f64, dx: &mut [f64]) -> ConverterSignals {
        let p = &self.params;
        let ws = self.omega_s;
        let rot = Complex64::from_polar(1.0, x[DELTA]);
        let m = Measurements {
            v_c: c(x, VC_D),
            i_t,
            v_pcc: v_n * rot.conj(),
        };
        let i_f = c(x, IF_D);
        let p_star = self.setpoints.p_ref + u;
        let outer = droop_and_outer(x[XP], c(x, XO_D), &m, p_star, &self.setpoints, p, ws);
        let inner = inner_loops(outer.v_ref, &m, i_f, c(x, XV_D), c(x, XI_D), p, ws);
        let (di_f, dv_c, di_t) = ac_side_derivatives(inner.e_conv, i_f, &m, outer.omega_c, p, ws);
        let p_t = terminal_power(inner.e_conv, i_f);
        let (dv_dc, di_src) = dc_side_unchecked(x[VDC], x[ISRC], p_t, p_star, p, ws);

        dx[VDC] = dv_dc;
        dx[ISRC] = di_src;
        put(dx, IF_D, di_f);
        put(dx, VC_D, dv_c);
        put(dx, IT_D, di_t);
        dx[DELTA] = outer.d_delta;
        dx[XP] = outer.d_xp;
        dx[XO_D] = outer.d_xo.re;
        dx[XO_Q] = outer.d_xo.im;
        put(dx, XV_D, inner.d_xv);
        put(dx, XI_D, inner.d_xi);
        ConverterSignals {
            e_conv: inner.e_conv,
            p_t,
            omega_c: outer.omega_c,
            i_t,
            injection: i_t * rot,
        }
    }

    /// Space-phasor derivatives (16 states); returns the signals including
    /// the D-Q injection.
    pub fn spc_derivatives(&self, x: &[f64], v_n: Complex64, u: f64, dx: &mut [f64]) -> ConverterSignals {
        self.full_derivatives(x, c(x, IT_D), v_n, u, dx)
    }

    /// Transformer current for the quasistationary model (converter frame).
    pub fn algebraic_transformer_current(&self, x_qpc: &[f64], v_n: Complex64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, x_qpc[DELTA - 2]);
        (c(x_qpc, VC_D) - v_n * rot.conj()) / self.params.transformer_impedance()
    }

    /// Quasistationary derivatives (14 states, no transformer current).
    pub fn qpc_derivatives(&self, x: &[f64], v_n: Complex64, u: f64, dx: &mut [f64]) -> ConverterSignals {
        let full = expand_qpc(x);
        let i_t = self.algebraic_transformer_current(x, v_n);
        let mut dfull = [0.0; SPC_STATES];
        let sig = self.full_derivatives(&full, i_t, v_n, u, &mut dfull);
        compress_into(&dfull, dx);
        sig
    }

    /// Norton equivalent `(y, i_src)` of the algebraic transformer (D-Q).
    pub fn norton(&self, x_qpc: &[f64]) -> (Complex64, Complex64) {
        let z = self.params.transformer_impedance();
        let rot = Complex64::from_polar(1.0, x_qpc[DELTA - 2]);
        (z.inv(), c(x_qpc, VC_D) * rot / z)
    }

    /// Back-solves the 16 states and the references from the capacitor-node
    /// voltage `v_c`, the current `i_t` it delivers into the transformer and
    /// the network node voltage `v_pcc` (all D-Q).
    pub fn initialize(&mut self, v_c: Complex64, i_t: Complex64, v_pcc: Complex64) -> Result<Vec<f64>> {
        let p = self.params.clone();
        let j = Complex64::i();
        let delta = v_pcc.arg();
        let back = Complex64::from_polar(1.0, -delta);
        let (v_c, i_t) = (v_c * back, i_t * back);
        let i_f = i_t + j * p.c * v_c;
        let e = v_c + Complex64::new(p.r + p.r_on, p.l) * i_f;
        let p_t = terminal_power(e, i_f);
        let p_meas = (v_c * i_t.conj()).re;
        self.setpoints = GFCSetpoints {
            v_mag: v_c.norm(),
            p_ref: p_meas,
        };

        // dc-link voltage: k(v* − v) + 2P*/v* − P_t/v* − P_t/v = 0.
        let f = |v: f64| p.k_dc * (p.v_dc_ref - v) + (2.0 * p_meas - p_t) / p.v_dc_ref - p_t / v;
        let df = |v: f64| -p.k_dc + p_t / (v * v);
        let mut v = p.v_dc_ref;
        for _ in 0..50 {
            let step = f(v) / df(v);
            v -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        if !(v > 0.0) || f(v).abs() > 1e-10 {
            return Err(Error::Initialization {
                residual: f(v),
                state: format!("{}.v_dc", self.name),
            });
        }
        let i_src = dc_reference_current(v, p_t, p_meas, &p);
        let xi_i = (p.r + p.r_on) * i_f;
        let mut x = vec![0.0; SPC_STATES];
        x[VDC] = v;
        x[ISRC] = i_src;
        put(&mut x, IF_D, i_f);
        put(&mut x, VC_D, v_c);
        put(&mut x, IT_D, i_t);
        x[DELTA] = delta;
        x[XP] = p_meas;
        x[XO_D] = v_c.re;
        x[XO_Q] = v_c.im;
        put(&mut x, XI_D, xi_i);
        Ok(x)
    }
}

/// Inserts a zero transformer current into a 14-state vector.
pub fn expand_qpc(x: &[f64]) -> [f64; SPC_STATES] {
    let mut full = [0.0; SPC_STATES];
    full[..IT_D].copy_from_slice(&x[..IT_D]);
    full[IT_D + 2..].copy_from_slice(&x[IT_D..QPC_STATES]);
    full
}

/// Drops the transformer current from a 16-state vector.
pub fn compress_into(full: &[f64], x: &mut [f64]) {
    x[..IT_D].copy_from_slice(&full[..IT_D]);
    x[IT_D..QPC_STATES].copy_from_slice(&full[IT_D + 2..]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::OMEGA_S;

    pub(crate) fn caption_params() -> GFCParams {
        GFCParams {
            tau_c: 0.05,
            g_c: 0.45,
            c_c: 325.73,
            k_dc: 1080.0,
            r: 5.5556e-5,
            l: 0.0042,
            c: 2.0358,
            r_on: 0.0,
            r_t: 0.002 / 9.0,
            l_t: 0.15 / 9.0,
            p_ref: 7.0,
            kp_ac: 0.001,
            ki_ac: 0.5,
            kp_i: 0.0411,
            ki_i: 1.7389e-4,
            kp_v: 9.36,
            ki_v: 0.0554,
            m_p: 0.05 / 9.0,
            omega_f: 10.0 * std::f64::consts::PI,
            v_dc_ref: 1.0,
        }
    }

    fn initialized() -> (GridFormingConverter, Vec<f64>, Complex64) {
        let mut g = GridFormingConverter::new("GFC", caption_params(), OMEGA_S).unwrap();
        let v_pcc = Complex64::from_polar(1.0, 0.1);
        let i_t = Complex64::from_polar(7.0, 0.05);
        let v_c = v_pcc + g.params.transformer_impedance() * i_t;
        let x = g.initialize(v_c, i_t, v_pcc).unwrap();
        (g, x, v_pcc)
    }

    #[test]
    fn dc_equilibrium_law() {
        let p = caption_params();
        let v = p.v_dc_ref;
        let i_ref = dc_reference_current(v, p.p_ref, p.p_ref, &p);
        assert!((i_ref - (p.g_c * v + p.p_ref / v)).abs() < 1e-12);
        let (dv, di) = dc_side_derivatives(v, i_ref, p.p_ref, p.p_ref, &p, OMEGA_S).unwrap();
        assert!(dv.abs() < 1e-12 && di.abs() < 1e-12);
        let dp = 0.3;
        let (dv, _) = dc_side_derivatives(v, i_ref, p.p_ref + dp, p.p_ref, &p, OMEGA_S).unwrap();
        assert!((dv - (-dp / (p.c_c / OMEGA_S * v))).abs() < 1e-9);
        assert!(dc_side_derivatives(0.0, 1.0, 1.0, 1.0, &p, OMEGA_S).is_err());
    }

    #[test]
    fn droop_arithmetic() {
        let mut p = caption_params();
        let refs = GFCSetpoints { v_mag: 1.0, p_ref: 7.0 };
        let m = Measurements {
            v_c: Complex64::new(1.0, 0.0),
            i_t: Complex64::new(7.0, 0.0),
            v_pcc: Complex64::new(1.0, 0.0),
        };
        let out = droop_and_outer(7.0, Complex64::new(1.0, 0.0), &m, 7.0, &refs, &p, OMEGA_S);
        assert_eq!(out.omega_c, 1.0);
        assert_eq!(out.d_delta, 0.0);
        p.m_p = 0.01;
        let out = droop_and_outer(8.0, Complex64::new(1.0, 0.0), &m, 7.0, &refs, &p, OMEGA_S);
        assert!((out.omega_c * OMEGA_S - OMEGA_S * 0.99).abs() < 1e-9);
    }

    #[test]
    fn inner_loops_reduce_to_feedforward() {
        let p = caption_params();
        let v_c = Complex64::new(1.02, 0.1);
        let i_t = Complex64::new(6.0, -1.0);
        let i_f = i_t + Complex64::i() * p.c * v_c;
        let m = Measurements { v_c, i_t, v_pcc: v_c };
        let out = inner_loops(v_c, &m, i_f, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), &p, OMEGA_S);
        assert!((out.e_conv - (v_c + Complex64::i() * p.l * i_f)).norm() < 1e-12);
        assert!(out.d_xv.norm() < 1e-12 && out.d_xi.norm() < 1e-12);
    }

    #[test]
    fn initialized_converter_is_stationary() {
        let (g, x, v_pcc) = initialized();
        let mut dx = vec![0.0; SPC_STATES];
        let sig = g.spc_derivatives(&x, v_pcc, 0.0, &mut dx);
        assert!(dx.iter().all(|d| d.abs() < 1e-8), "{dx:?}");
        // PCC voltage sits on the d-axis.
        let v_p = v_pcc * Complex64::from_polar(1.0, -x[DELTA]);
        assert!(v_p.im.abs() < 1e-12);
        assert_eq!(sig.omega_c, 1.0);
        // Steady-state phasor law across the filter inductor.
        let i_f = c(&x, IF_D);
        let v_c = c(&x, VC_D);
        let lhs = sig.e_conv - v_c;
        let rhs = Complex64::new(g.params.r + g.params.r_on, g.params.l) * i_f;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn qpc_variant_shares_equilibrium() {
        let (g, x, v_pcc) = initialized();
        let mut xq = vec![0.0; QPC_STATES];
        compress_into(&x, &mut xq);
        let mut dx = vec![0.0; QPC_STATES];
        let sig = g.qpc_derivatives(&xq, v_pcc, 0.0, &mut dx);
        assert!(dx.iter().all(|d| d.abs() < 1e-8), "{dx:?}");
        assert!((sig.i_t - c(&x, IT_D)).norm() < 1e-10);
        let (y, src) = g.norton(&xq);
        assert!((src - y * v_pcc - sig.injection).norm() < 1e-10);
    }

    #[test]
    fn bridge_power_matches_dc_draw() {
        let (g, x, v_pcc) = initialized();
        let mut dx = vec![0.0; SPC_STATES];
        let sig = g.spc_derivatives(&x, v_pcc, 0.0, &mut dx);
        let i_bridge = sig.p_t / x[VDC];
        assert!((x[VDC] * i_bridge - sig.p_t).abs() < 1e-12);
        let i_f = c(&x, IF_D);
        assert!((terminal_power(sig.e_conv, i_f) - sig.p_t).abs() < 1e-10);
    }

    #[test]
    fn labels_drop_transformer_current_in_qpc() {
        let (g, _, _) = initialized();
        assert_eq!(g.state_labels(true).len(), SPC_STATES);
        let q = g.state_labels(false);
        assert_eq!(q.len(), QPC_STATES);
        assert!(!q.iter().any(|l| l.ends_with("itd")));
    }
}
