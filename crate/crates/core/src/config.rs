//! Case files: TOML documents describing the network, devices, dispatch and
//! analysis settings. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfc::GFCParams;
use crate::machine::SGParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    /// System base, MVA.
    pub s_base: f64,
    /// Synchronous frequency, rad/s.
    pub omega_s: f64,
    pub network: NetworkConfig,
    #[serde(rename = "device")]
    pub devices: Vec<DeviceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_flow: Option<TieFlowConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub buses: Vec<String>,
    #[serde(rename = "line")]
    pub lines: Vec<LineConfig>,
    #[serde(rename = "load", default)]
    pub loads: Vec<LoadConfig>,
}

/// Line totals on the system base; `circuits` identical circuits in parallel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub from: String,
    pub to: String,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    #[serde(default = "one")]
    pub circuits: u32,
}

fn one() -> u32 {
    1
}

impl LineConfig {
    pub fn name(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }

    /// Equivalent `(R, L, C)` of the parallel circuits.
    pub fn equivalent(&self) -> (f64, f64, f64) {
        let n = f64::from(self.circuits);
        (self.r / n, self.x / n, self.b * n)
    }
}

/// Constant-impedance load specified by its consumption at 1 pu voltage, plus
/// shunt compensation `q_comp` (MVAr/base at 1 pu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub bus: String,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub q_comp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceRole {
    Slack,
    Pv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub name: String,
    /// Terminal bus behind the step-up transformer.
    pub terminal: String,
    /// Network bus the transformer connects to.
    pub bus: String,
    pub role: DeviceRole,
    /// Terminal voltage magnitude.
    pub v: f64,
    /// Active power for PV devices.
    #[serde(default)]
    pub p: f64,
    /// Terminal angle for the slack device, rad.
    #[serde(default)]
    pub angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gfc: Option<GFCParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sg: Option<SgConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgConfig {
    /// Machine rating, MVA; `params` are on this base.
    pub rating: f64,
    pub params: SGParams,
}

/// Adjusts one load's active power until the sending-end flow of the line
/// `from`→`to` equals `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieFlowConfig {
    pub from: String,
    pub to: String,
    pub target: f64,
    pub adjust_load: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Devices whose power reference is modulated by an input.
    pub inputs: Vec<String>,
    /// Output channels, `device.signal`.
    pub outputs: Vec<String>,
    pub sweep_f_min: f64,
    pub sweep_f_max: f64,
    pub sweep_points: usize,
    /// Modes above this frequency (Hz) are omitted from reports.
    pub report_f_max: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            sweep_f_min: 0.1,
            sweep_f_max: 200.0,
            sweep_points: 400,
            report_f_max: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Trapezoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    /// Store every n-th step.
    pub decimation: usize,
    pub disturbance: Option<PulseConfig>,
    /// Channel fitted by Prony analysis.
    pub prony_channel: String,
    pub prony_start: f64,
    pub prony_end: f64,
    pub prony_order: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 20e-6,
            t_end: 5.0,
            method: Method::Rk4,
            decimation: 10,
            disturbance: None,
            prony_channel: String::new(),
            prony_start: 0.5,
            prony_end: 1.5,
            prony_order: 0,
        }
    }
}

/// Rectangular pulse on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub input: String,
    pub magnitude: f64,
    pub start: f64,
    pub duration: f64,
}

impl CaseConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| Error::Config {
            path: origin.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("case configuration serializes")
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let buses = &self.network.buses;
        let known = |b: &str| buses.iter().any(|x| x == b);
        for l in &self.network.lines {
            if !known(&l.from) || !known(&l.to) {
                return Err(format!("line {} refers to an unknown bus", l.name()));
            }
            if l.circuits == 0 {
                return Err(format!("line {} has no circuits", l.name()));
            }
        }
        for ld in &self.network.loads {
            if !known(&ld.bus) {
                return Err(format!("load at unknown bus {}", ld.bus));
            }
        }
        let mut slack = 0;
        for d in &self.devices {
            if !known(&d.bus) {
                return Err(format!("device {} connects to unknown bus {}", d.name, d.bus));
            }
            if known(&d.terminal) || self.devices.iter().filter(|o| o.terminal == d.terminal).count() > 1 {
                return Err(format!("device {} needs its own terminal bus", d.name));
            }
            if d.gfc.is_some() == d.sg.is_some() {
                return Err(format!("device {} needs exactly one of [gfc] or [sg]", d.name));
            }
            slack += usize::from(d.role == DeviceRole::Slack);
        }
        if slack != 1 {
            return Err(format!("exactly one slack device required, found {slack}"));
        }
        if let Some(t) = &self.tie_flow {
            if !self.network.loads.iter().any(|l| l.bus == t.adjust_load) {
                return Err(format!("tie-flow adjustment names no load at bus {}", t.adjust_load));
            }
        }
        Ok(())
    }

    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.name == name)
    }
}
