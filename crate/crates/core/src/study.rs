//! End-to-end case study: power flow, both frameworks' linearizations,
//! eigen and participation analysis, singular-value sweeps, and a nonlinear
//! run checked by Prony analysis.

use std::fmt::Write as _;

use crate::analysis::eigen::{mode_reports, ModeReport};
use crate::analysis::linearize::{linearize, LinearModel};
use crate::analysis::prony::{prony_auto, PronyFit};
use crate::analysis::sweep::{local_peaks, log_grid, nearest_index, sigma_max_sweep};
use crate::assembly::{build, Framework, OperatingPoint, SystemModel};
use crate::config::CaseConfig;
use crate::error::{Error, Result};
use crate::sim::{integrate, SimOptions, SimResult};

/// Prony order search ceiling and the energy left out of the suggested order.
pub const PRONY_MAX_ORDER: usize = 60;
pub const PRONY_MISSING_ENERGY: f64 = 1e-8;
/// Samples fed to Prony analysis are spaced at least this far apart, s.
pub const PRONY_SPACING: f64 = 1e-3;

/// Linearized model and its modes.
pub struct Analysis {
    pub model: SystemModel,
    pub op: OperatingPoint,
    pub linear: LinearModel,
    pub modes: Vec<ModeReport>,
}

impl Analysis {
    pub fn run(cfg: &CaseConfig, framework: Framework) -> Result<Self> {
        let (model, op) = build(cfg, framework)?;
        let linear = linearize(&model, &op.x0, &op.u0);
        let modes = mode_reports(&linear.a)?;
        Ok(Self { model, op, linear, modes })
    }

    pub fn unstable_pairs(&self) -> Vec<&ModeReport> {
        self.modes.iter().filter(|m| m.is_unstable() && m.is_oscillatory()).collect()
    }

    pub fn max_real_part(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda.re).fold(f64::MIN, f64::max)
    }

    /// Least-damped oscillatory mode (largest real part) with frequency in
    /// `band` Hz.
    pub fn critical_mode(&self, band: (f64, f64)) -> Option<&ModeReport> {
        self.modes
            .iter()
            .filter(|m| m.is_oscillatory() && m.f_hz >= band.0 && m.f_hz <= band.1)
            .max_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re))
    }

    /// State labels and participations of a mode, largest first.
    pub fn top_participants(&self, mode: &ModeReport, k: usize) -> Vec<(String, f64)> {
        crate::analysis::eigen::top_indices(&mode.participation, k)
            .into_iter()
            .map(|i| (self.linear.states[i].clone(), mode.participation[i]))
            .collect()
    }
}

/// Samples of `channel` in `[start, end]`, thinned to at least
/// [`PRONY_SPACING`], relative to `reference`. Returns the samples and their
/// spacing.
pub fn prony_window(sim: &SimResult, channel: usize, reference: f64, start: f64, end: f64) -> Result<(Vec<f64>, f64)> {
    if sim.time.len() < 2 {
        return Err(Error::InsufficientWindow { needed: 2, available: sim.time.len() });
    }
    let dt = sim.time[1] - sim.time[0];
    let stride = ((PRONY_SPACING / dt).round() as usize).max(1);
    let y: Vec<f64> = sim
        .time
        .iter()
        .enumerate()
        .filter(|(k, t)| **t >= start - 1e-12 && **t <= end + 1e-12 && k % stride == 0)
        .map(|(k, _)| sim.samples[k][channel] - reference)
        .collect();
    Ok((y, dt * stride as f64))
}

/// Nonlinear run of the case's simulation scenario and a Prony fit of its
/// configured channel.
pub struct TimeDomain {
    pub sim: SimResult,
    pub channel: String,
    pub fit: PronyFit,
}

pub fn time_domain(cfg: &CaseConfig, framework: Framework) -> Result<TimeDomain> {
    let (mut model, op) = build(cfg, framework)?;
    let s = &cfg.simulation;
    let channel = if s.prony_channel.is_empty() {
        cfg.analysis.outputs.first().cloned().ok_or_else(|| Error::InvalidArgument("no channel to fit".into()))?
    } else {
        s.prony_channel.clone()
    };
    model.set_outputs(std::slice::from_ref(&channel))?;
    let opts = SimOptions::from_config(s, &cfg.analysis.inputs)?;
    let sim = integrate(&model, &op.x0, &op.u0, &opts)?;
    let reference = model.outputs(&op.x0)[0];
    let end = s.prony_end.min(*sim.time.last().unwrap_or(&0.0));
    let (y, dt) = prony_window(&sim, 0, reference, s.prony_start, end)?;
    let fit = if s.prony_order > 0 {
        crate::analysis::prony::prony_fit(&y, dt, s.prony_order)?
    } else {
        prony_auto(&y, dt, PRONY_MAX_ORDER, PRONY_MISSING_ENERGY)?
    };
    Ok(TimeDomain { sim, channel, fit })
}

/// Singular-value sweep on the case grid.
pub fn sweep(cfg: &CaseConfig, lm: &LinearModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = &cfg.analysis;
    let grid = log_grid(a.sweep_f_min, a.sweep_f_max, a.sweep_points)?;
    let sigma = sigma_max_sweep(lm, &grid)?;
    Ok((grid, sigma))
}

/// Whether `sigma` has a local maximum within one grid step of `f`.
pub fn peak_near(grid: &[f64], sigma: &[f64], f: f64) -> Option<usize> {
    let k = nearest_index(grid, f);
    local_peaks(sigma).into_iter().find(|&p| p.abs_diff(k) <= 1)
}

/// Reference values printed beside the computed ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub f_hz: f64,
    pub zeta_pct: f64,
    pub band: (f64, f64),
}

pub fn reference_for(case: &str) -> Reference {
    match case {
        "case2" => Reference {
            f_hz: 43.33,
            zeta_pct: f64::NAN,
            band: (40.0, 47.0),
        },
        _ => Reference {
            f_hz: 43.135,
            zeta_pct: -2.11,
            band: (40.0, 46.0),
        },
    }
}

/// Everything the comparison report shows.
pub struct CaseStudy {
    pub name: String,
    pub spc: Analysis,
    pub qpc: Analysis,
    pub grid: Vec<f64>,
    pub sigma_spc: Vec<f64>,
    pub sigma_qpc: Vec<f64>,
    pub time_domain: Option<TimeDomain>,
    pub reference: Reference,
}

impl CaseStudy {
    pub fn run(cfg: &CaseConfig, with_simulation: bool) -> Result<Self> {
        let spc = Analysis::run(cfg, Framework::Spc)?;
        let qpc = Analysis::run(cfg, Framework::Qpc)?;
        let (grid, sigma_spc) = sweep(cfg, &spc.linear)?;
        let (_, sigma_qpc) = sweep(cfg, &qpc.linear)?;
        let time_domain = if with_simulation { Some(time_domain(cfg, Framework::Spc)?) } else { None };
        Ok(Self {
            name: cfg.name.clone(),
            reference: reference_for(&cfg.name),
            spc,
            qpc,
            grid,
            sigma_spc,
            sigma_qpc,
            time_domain,
        })
    }

    pub fn critical(&self) -> Option<&ModeReport> {
        self.spc.critical_mode((0.5 * self.reference.band.0, 1.5 * self.reference.band.1))
    }

    /// Markdown comparison table and diagnostics.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} : space-phasor versus quasistationary models\n", self.name);
        let _ = writeln!(s, "| approach | f (Hz) | zeta (%) |");
        let _ = writeln!(s, "|---|---|---|");
        match self.critical() {
            Some(m) => {
                let _ = writeln!(s, "| linearization, SPC | {:.3} | {:.2} |", m.f_hz, m.zeta_pct);
            }
            None => {
                let _ = writeln!(s, "| linearization, SPC | none | none |");
            }
        }
        let q = self.qpc.unstable_pairs();
        match q.first() {
            Some(m) => {
                let _ = writeln!(s, "| linearization, QPC | {:.3} | {:.2} |", m.f_hz, m.zeta_pct);
            }
            None => {
                let _ = writeln!(s, "| linearization, QPC | stable | stable |");
            }
        }
        if let (Some(td), Some(m)) = (&self.time_domain, self.critical()) {
            if let Some(p) = td.fit.nearest(m.f_hz) {
                let _ = writeln!(
                    s,
                    "| Prony, SPC simulation ({}) | {:.3} | {:.2} |",
                    td.channel,
                    p.frequency_hz(),
                    100.0 * p.damping_ratio()
                );
            }
        }
        let r = self.reference;
        let _ = writeln!(s, "| reference | {:.3} | {} |", r.f_hz, if r.zeta_pct.is_nan() { "n/a".into() } else { format!("{:.2}", r.zeta_pct) });
        let _ = writeln!(s);
        let _ = writeln!(s, "SPC: {} states, {} unstable oscillatory pair(s)", self.spc.model.n_states(), self.spc.unstable_pairs().len());
        for m in self.spc.unstable_pairs() {
            let _ = writeln!(s, "- {:.3} Hz, zeta {:.2} %, lambda {:.4}{:+.4}j", m.f_hz, m.zeta_pct, m.lambda.re, m.lambda.im);
        }
        let _ = writeln!(
            s,
            "QPC: {} states, max Re(lambda) = {:.3e}",
            self.qpc.model.n_states(),
            self.qpc.max_real_part()
        );
        if let Some(m) = self.critical() {
            let _ = writeln!(s, "\nLargest participations in the {:.3} Hz mode:\n", m.f_hz);
            for (label, p) in self.spc.top_participants(m, 8) {
                let _ = writeln!(s, "- {label}: {p:.3}");
            }
            let k = nearest_index(&self.grid, m.f_hz);
            let _ = writeln!(
                s,
                "\nsigma_max at {:.2} Hz: SPC {:.4e}, QPC {:.4e} (ratio {:.1}); SPC local peak nearby: {}",
                self.grid[k],
                self.sigma_spc[k],
                self.sigma_qpc[k],
                self.sigma_spc[k] / self.sigma_qpc[k],
                if peak_near(&self.grid, &self.sigma_spc, m.f_hz).is_some() { "yes" } else { "no" }
            );
        }
        if let Some(td) = &self.time_domain {
            for e in &td.sim.events {
                let _ = writeln!(s, "\nsimulation stopped at {:.4} s: {}", e.time, e.message);
            }
            let _ = writeln!(s, "Prony residual {:.2e} with {} modes", td.fit.residual, td.fit.modes.len());
        }
        s
    }
}
