//! Whole-system state-space models in either framework.
//!
//! State ordering: devices in declaration order, then (space-phasor only)
//! network branch currents, node voltages and load inductor currents.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::analysis::linearize::state_jacobian;
use crate::config::{CaseConfig, DeviceRole};
use crate::error::{Error, Result};
use crate::gfc::{self, GridFormingConverter};
use crate::machine::{self, SynchronousMachine};
use crate::network::{build_admittance, Branch, Load, SpcNetwork, Topology};
use crate::powerflow::{branch_flow, solve_power_flow, BusKind, PowerFlowResult};

const INIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Framework {
    /// Space-phasor network, stators and transformers.
    Spc,
    /// Quasistationary algebraic network.
    Qpc,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framework::Spc => "spc",
            Framework::Qpc => "qpc",
        })
    }
}

impl FromStr for Framework {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spc" => Ok(Framework::Spc),
            "qpc" => Ok(Framework::Qpc),
            other => Err(Error::InvalidArgument(format!("unknown framework {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Device {
    Sg(SynchronousMachine),
    Gfc(GridFormingConverter),
}

impl Device {
    pub fn name(&self) -> &str {
        match self {
            Device::Sg(m) => &m.name,
            Device::Gfc(g) => &g.name,
        }
    }

    pub fn n_states(&self, fw: Framework) -> usize {
        match (self, fw) {
            (Device::Sg(_), Framework::Spc) => machine::SPC_STATES,
            (Device::Sg(_), Framework::Qpc) => machine::QPC_STATES,
            (Device::Gfc(_), Framework::Spc) => gfc::SPC_STATES,
            (Device::Gfc(_), Framework::Qpc) => gfc::QPC_STATES,
        }
    }

    pub fn state_labels(&self, fw: Framework) -> Vec<String> {
        match self {
            Device::Sg(m) => m.state_labels(self.n_states(fw)),
            Device::Gfc(g) => g.state_labels(fw == Framework::Spc),
        }
    }

    fn norton(&self, x: &[f64]) -> (Complex64, Complex64) {
        match self {
            Device::Sg(m) => m.norton(x),
            Device::Gfc(g) => g.norton(x),
        }
    }
}

/// Observed signal.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    State(usize),
    /// Transformer current of a converter in its own frame; `q` selects the
    /// quadrature component.
    TransformerCurrent { device: usize, q: bool },
    BusVoltage { node: usize, part: VoltagePart },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoltagePart {
    D,
    Q,
    Magnitude,
}

struct QpcNetwork {
    lu: LU<Complex64, Dyn, Dyn>,
}

/// Immutable state-space model `ẋ = f(x, u)`, `y = g(x, u)`.
pub struct SystemModel {
    pub framework: Framework,
    pub devices: Vec<Device>,
    pub offsets: Vec<usize>,
    pub network: SpcNetwork,
    net_offset: usize,
    n_states: usize,
    qpc: Option<QpcNetwork>,
    /// Device index receiving each input.
    pub inputs: Vec<usize>,
    pub outputs: Vec<(String, Channel)>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("framework", &self.framework)
            .field("n_states", &self.n_states)
            .field("devices", &self.devices.len())
            .finish()
    }
}

/// Power-flow solution with bus names and the tie-flow bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowReport {
    /// Network buses followed by device terminal buses.
    pub buses: Vec<String>,
    pub result: PowerFlowResult,
    pub tie_flow: Option<f64>,
    /// Load whose active power was adjusted, and its final value.
    pub adjusted_load: Option<(String, f64)>,
}

impl PowerFlowReport {
    pub fn bus(&self, name: &str) -> Option<usize> {
        self.buses.iter().position(|b| b == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub power_flow: PowerFlowReport,
    /// `‖f(x0, u0)‖∞` after initialization.
    pub residual: f64,
}

fn transformer(d: &crate::config::DeviceConfig, s_base: f64) -> (f64, f64) {
    if let Some(g) = &d.gfc {
        (g.r_t, g.l_t)
    } else {
        let sg = d.sg.as_ref().expect("validated device");
        let p = sg.params.to_system_base(sg.rating, s_base);
        (p.rg, p.lg)
    }
}

/// Network topology with devices attached at their transformer buses, and
/// the load list (with `load_override` applied).
fn network_topology(cfg: &CaseConfig, load_override: Option<(usize, f64)>) -> Result<Topology> {
    let names = cfg.network.buses.clone();
    let idx = |b: &str| names.iter().position(|n| n == b).expect("validated bus");
    let branches = cfg
        .network
        .lines
        .iter()
        .map(|l| {
            let (r, x, b) = l.equivalent();
            Branch {
                name: l.name(),
                from: idx(&l.from),
                to: idx(&l.to),
                r,
                l: x,
                c: b,
            }
        })
        .collect();
    let loads = cfg
        .network
        .loads
        .iter()
        .enumerate()
        .map(|(k, ld)| {
            let p = match load_override {
                Some((j, p)) if j == k => p,
                _ => ld.p,
            };
            Load::from_power(idx(&ld.bus), p, ld.q, 1.0, ld.q_comp)
        })
        .collect();
    let device_nodes = cfg.devices.iter().map(|d| idx(&d.bus)).collect();
    Topology::new(names.clone(), branches, device_nodes, loads)
}

fn solve_case_flow(cfg: &CaseConfig, load_override: Option<(usize, f64)>) -> Result<(Vec<String>, PowerFlowResult)> {
    let topo = network_topology(cfg, load_override)?;
    let n_net = topo.n_nodes();
    let n = n_net + cfg.devices.len();
    let y_net = build_admittance(&topo)?.y;
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    y.view_mut((0, 0), (n_net, n_net)).copy_from(&y_net);
    let mut kinds = vec![BusKind::PQ { p: 0.0, q: 0.0 }; n];
    let mut buses = topo.node_names.clone();
    for (k, d) in cfg.devices.iter().enumerate() {
        let t = n_net + k;
        let b = topo.device_nodes[k];
        let (r, l) = transformer(d, cfg.s_base);
        let ys = Complex64::new(r, l).inv();
        y[(t, t)] += ys;
        y[(b, b)] += ys;
        y[(t, b)] -= ys;
        y[(b, t)] -= ys;
        kinds[t] = match d.role {
            DeviceRole::Slack => BusKind::Slack { v: d.v, theta: d.angle },
            DeviceRole::Pv => BusKind::PV { p: d.p, v: d.v },
        };
        buses.push(d.terminal.clone());
    }
    Ok((buses, solve_power_flow(&y, &kinds)?))
}

fn tie_flow_of(cfg: &CaseConfig, buses: &[String], pf: &PowerFlowResult) -> Option<f64> {
    let t = cfg.tie_flow.as_ref()?;
    let line = cfg
        .network
        .lines
        .iter()
        .find(|l| (l.from == t.from && l.to == t.to) || (l.from == t.to && l.to == t.from))?;
    let (r, x, b) = line.equivalent();
    let a = buses.iter().position(|n| *n == t.from)?;
    let z = buses.iter().position(|n| *n == t.to)?;
    Some(branch_flow(pf.v[a], pf.v[z], Complex64::new(r, x).inv(), Complex64::new(0.0, 0.5 * b)).re)
}

/// Solves the case power flow, adjusting the designated load until the tie
/// flow meets its target.
pub fn run_power_flow(cfg: &CaseConfig) -> Result<PowerFlowReport> {
    let Some(tie) = &cfg.tie_flow else {
        let (buses, result) = solve_case_flow(cfg, None)?;
        return Ok(PowerFlowReport {
            buses,
            result,
            tie_flow: None,
            adjusted_load: None,
        });
    };
    let tie_err = || Error::Topology(format!("tie line {}-{} not found", tie.from, tie.to));
    let k = cfg
        .network
        .loads
        .iter()
        .position(|l| l.bus == tie.adjust_load)
        .expect("validated load");
    let flow = |p: f64| -> Result<(f64, Vec<String>, PowerFlowResult)> {
        let (buses, pf) = solve_case_flow(cfg, Some((k, p)))?;
        let f = tie_flow_of(cfg, &buses, &pf).ok_or_else(tie_err)?;
        Ok((f, buses, pf))
    };
    // Secant on the load's active power.
    let mut p0 = cfg.network.loads[k].p;
    let (mut f0, mut buses, mut pf) = flow(p0)?;
    let mut p1 = p0 - (tie.target - f0);
    for _ in 0..30 {
        if (f0 - tie.target).abs() < 1e-9 {
            break;
        }
        let (f1, b1, pf1) = flow(p1)?;
        let slope = (f1 - f0) / (p1 - p0);
        (p0, f0, buses, pf) = (p1, f1, b1, pf1);
        if (f0 - tie.target).abs() < 1e-9 || slope == 0.0 {
            break;
        }
        p1 = p0 + (tie.target - f0) / slope;
    }
    if (f0 - tie.target).abs() > 1e-6 {
        return Err(Error::PowerFlowDiverged {
            iterations: 30,
            mismatch: f0 - tie.target,
        });
    }
    Ok(PowerFlowReport {
        buses,
        result: pf,
        tie_flow: Some(f0),
        adjusted_load: Some((tie.adjust_load.clone(), p0)),
    })
}

impl SystemModel {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn network_offset(&self) -> usize {
        self.net_offset
    }

    pub fn state_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.devices.iter().flat_map(|d| d.state_labels(self.framework)).collect();
        if self.framework == Framework::Spc {
            out.extend(self.network.state_labels());
        }
        out
    }

    pub fn input_labels(&self) -> Vec<String> {
        self.inputs.iter().map(|&d| format!("{}.u", self.devices[d].name())).collect()
    }

    pub fn output_labels(&self) -> Vec<String> {
        self.outputs.iter().map(|(n, _)| n.clone()).collect()
    }

    fn device_slice<'a>(&self, x: &'a [f64], k: usize) -> &'a [f64] {
        &x[self.offsets[k]..self.offsets[k] + self.devices[k].n_states(self.framework)]
    }

    fn input_of(&self, u: &[f64], device: usize) -> f64 {
        self.inputs
            .iter()
            .zip(u)
            .filter(|(&d, _)| d == device)
            .map(|(_, v)| *v)
            .sum()
    }

    /// Network node voltages (D-Q) for state `x`.
    pub fn node_voltages(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.network.topology.n_nodes();
        match &self.qpc {
            None => (0..n).map(|k| self.network.node_voltage(&x[self.net_offset..], k)).collect(),
            Some(q) => {
                let mut i = DVector::from_element(n, Complex64::new(0.0, 0.0));
                for (k, dev) in self.devices.iter().enumerate() {
                    let (_, src) = dev.norton(self.device_slice(x, k));
                    i[self.network.topology.device_nodes[k]] += src;
                }
                q.lu.solve(&i).expect("factorized at build").iter().copied().collect()
            }
        }
    }

    /// Device current injections into the network (D-Q) at `(x, u)`.
    pub fn injections(&self, x: &[f64], u: &[f64]) -> Vec<Complex64> {
        let mut dx = vec![0.0; self.n_states];
        self.device_step(x, u, &mut dx)
    }

    fn device_step(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Vec<Complex64> {
        let v = self.node_voltages(x);
        let nodes = &self.network.topology.device_nodes;
        let mut inj = Vec::with_capacity(self.devices.len());
        for (k, dev) in self.devices.iter().enumerate() {
            let o = self.offsets[k];
            let n = dev.n_states(self.framework);
            let xs = &x[o..o + n];
            let ds = &mut dx[o..o + n];
            let v_n = v[nodes[k]];
            let i = match (dev, self.framework) {
                (Device::Sg(m), Framework::Spc) => m.spc_derivatives(xs, v_n, ds),
                (Device::Sg(m), Framework::Qpc) => m.qpc_derivatives(xs, v_n, ds),
                (Device::Gfc(g), Framework::Spc) => g.spc_derivatives(xs, v_n, self.input_of(u, k), ds).injection,
                (Device::Gfc(g), Framework::Qpc) => g.qpc_derivatives(xs, v_n, self.input_of(u, k), ds).injection,
            };
            inj.push(i);
        }
        inj
    }

    /// Writes `f(x, u)` into `dx`.
    pub fn vector_field(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let inj = self.device_step(x, u, dx);
        if self.framework == Framework::Spc {
            let o = self.net_offset;
            self.network.derivatives_into(&x[o..], &inj, &mut dx[o..]);
        }
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_states];
        self.vector_field(x, u, &mut dx);
        dx
    }

    /// Output vector `y = g(x, u)`.
    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        let needs_v = self
            .outputs
            .iter()
            .any(|(_, c)| matches!(c, Channel::BusVoltage { .. }) || (self.framework == Framework::Qpc && matches!(c, Channel::TransformerCurrent { .. })));
        let v = if needs_v { self.node_voltages(x) } else { Vec::new() };
        self.outputs
            .iter()
            .map(|(_, c)| match *c {
                Channel::State(k) => x[k],
                Channel::TransformerCurrent { device, q } => {
                    let xs = self.device_slice(x, device);
                    let i = match self.framework {
                        Framework::Spc => Complex64::new(xs[gfc::IT_D], xs[gfc::IT_D + 1]),
                        Framework::Qpc => {
                            let Device::Gfc(g) = &self.devices[device] else { unreachable!() };
                            g.algebraic_transformer_current(xs, v[self.network.topology.device_nodes[device]])
                        }
                    };
                    if q { i.im } else { i.re }
                }
                Channel::BusVoltage { node, part } => match part {
                    VoltagePart::D => v[node].re,
                    VoltagePart::Q => v[node].im,
                    VoltagePart::Magnitude => v[node].norm(),
                },
            })
            .collect()
    }

    /// Resolves a channel name: `device.signal` (any state label, or `itd`/`itq`
    /// for converters) or `bus<name>.vD|vQ|vmag`.
    pub fn channel(&self, name: &str) -> Result<Channel> {
        let unknown = || Error::UnknownChannel(name.to_string());
        let (head, signal) = name.split_once('.').ok_or_else(unknown)?;
        if let Some(k) = self.devices.iter().position(|d| d.name() == head) {
            if let Device::Gfc(_) = self.devices[k] {
                if signal == "itd" || signal == "itq" {
                    return Ok(Channel::TransformerCurrent { device: k, q: signal == "itq" });
                }
            }
        }
        if let Some(bus) = head.strip_prefix("bus") {
            if let Some(node) = self.network.topology.node_names.iter().position(|n| n == bus) {
                let part = match signal {
                    "vD" => Some(VoltagePart::D),
                    "vQ" => Some(VoltagePart::Q),
                    "vmag" => Some(VoltagePart::Magnitude),
                    _ => None,
                };
                if let Some(part) = part {
                    return Ok(Channel::BusVoltage { node, part });
                }
            }
        }
        self.state_labels()
            .iter()
            .position(|l| l == name)
            .map(Channel::State)
            .ok_or_else(unknown)
    }

    /// Replaces the output list.
    pub fn set_outputs(&mut self, names: &[String]) -> Result<()> {
        self.outputs = names
            .iter()
            .map(|n| self.channel(n).map(|c| (n.clone(), c)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// First state whose value is physically inadmissible, if any.
    pub fn inadmissible(&self, x: &[f64]) -> Option<String> {
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Some(format!("non-finite state {}", self.state_labels()[k]));
        }
        for (k, dev) in self.devices.iter().enumerate() {
            if let Device::Gfc(g) = dev {
                let v = x[self.offsets[k] + gfc::VDC];
                if v <= 0.0 {
                    return Some(format!("{} dc-link voltage collapsed ({v:.3e})", g.name));
                }
            }
        }
        None
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Builds the model and its initialized operating point.
pub fn build(cfg: &CaseConfig, framework: Framework) -> Result<(SystemModel, OperatingPoint)> {
    let pf = run_power_flow(cfg)?;
    let load_override = pf.adjusted_load.as_ref().map(|(bus, p)| {
        let k = cfg.network.loads.iter().position(|l| &l.bus == bus).expect("validated load");
        (k, *p)
    });
    let topology = network_topology(cfg, load_override)?;
    let network = SpcNetwork::new(topology, cfg.omega_s)?;
    let n_net = network.topology.n_nodes();
    let res = &pf.result;

    let mut devices = Vec::new();
    let mut offsets = Vec::new();
    let mut x0 = Vec::new();
    for (k, d) in cfg.devices.iter().enumerate() {
        let t = n_net + k;
        let v_t = res.v[t];
        let i = res.current(t);
        let v_pcc = res.v[network.topology.device_nodes[k]];
        offsets.push(x0.len());
        let dev = if let Some(gp) = &d.gfc {
            let mut g = GridFormingConverter::new(d.name.clone(), gp.clone(), cfg.omega_s)?;
            let xs = g.initialize(v_t, i, v_pcc)?;
            match framework {
                Framework::Spc => x0.extend_from_slice(&xs),
                Framework::Qpc => {
                    let mut xq = vec![0.0; gfc::QPC_STATES];
                    gfc::compress_into(&xs, &mut xq);
                    x0.extend_from_slice(&xq);
                }
            }
            Device::Gfc(g)
        } else {
            let sg = d.sg.as_ref().expect("validated device");
            let params = sg.params.to_system_base(sg.rating, cfg.s_base);
            let mut m = SynchronousMachine::new(d.name.clone(), params, cfg.omega_s)?;
            let xs = m.initialize(v_t, i)?;
            let n = match framework {
                Framework::Spc => machine::SPC_STATES,
                Framework::Qpc => machine::QPC_STATES,
            };
            x0.extend_from_slice(&xs[..n]);
            Device::Sg(m)
        };
        devices.push(dev);
    }
    let net_offset = x0.len();
    let qpc = match framework {
        Framework::Spc => {
            let v: Vec<Complex64> = res.v[..n_net].to_vec();
            x0.extend(network.pack(&network.state_from_voltages(&v)));
            None
        }
        Framework::Qpc => {
            let mut y = build_admittance(&network.topology)?.y;
            for (k, dev) in devices.iter().enumerate() {
                let (yd, _) = dev.norton(&x0[offsets[k]..]);
                let node = network.topology.device_nodes[k];
                y[(node, node)] += yd;
            }
            let lu = y.lu();
            if !lu.is_invertible() {
                return Err(Error::Singular("quasistationary network"));
            }
            Some(QpcNetwork { lu })
        }
    };

    let inputs = cfg
        .analysis
        .inputs
        .iter()
        .map(|name| {
            let k = cfg
                .device_index(name)
                .ok_or_else(|| Error::InvalidArgument(format!("input device {name} not found")))?;
            if cfg.devices[k].gfc.is_none() {
                return Err(Error::InvalidArgument(format!("input device {name} is not a converter")));
            }
            Ok(k)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_states = x0.len();
    let mut model = SystemModel {
        framework,
        devices,
        offsets,
        network,
        net_offset,
        n_states,
        qpc,
        inputs,
        outputs: Vec::new(),
    };
    model.set_outputs(&cfg.analysis.outputs)?;
    let u0 = vec![0.0; model.n_inputs()];
    let (x0, residual) = refine(&model, x0, &u0)?;
    Ok((
        model,
        OperatingPoint {
            x0,
            u0,
            power_flow: pf,
            residual,
        },
    ))
}

/// Damped Newton on `f(x, u0) = 0` when the back-solved point misses the
/// tolerance. The Jacobian is singular along the common rotation, so steps
/// use a truncated pseudo-inverse.
fn refine(model: &SystemModel, mut x: Vec<f64>, u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut f = model.eval(&x, u);
    let mut norm = inf_norm(&f);
    for _ in 0..20 {
        if norm < INIT_TOLERANCE {
            return Ok((x, norm));
        }
        let a = state_jacobian(model, &x, u);
        let svd = a.svd(true, true);
        let step = svd
            .solve(&DVector::from_vec(f.clone()), 1e-10 * svd.singular_values.max())
            .map_err(|e| Error::Initialization {
                residual: norm,
                state: e.to_string(),
            })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
            let ft = model.eval(&trial, u);
            let nt = inf_norm(&ft);
            if nt < norm || lambda < 1e-4 {
                x = trial;
                f = ft;
                norm = nt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if norm < INIT_TOLERANCE {
        return Ok((x, norm));
    }
    let labels = model.state_labels();
    let worst = f
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| labels[k].clone())
        .unwrap_or_default();
    Err(Error::Initialization { residual: norm, state: worst })
}
