//! Command-line front end. Every subcommand writes its artifacts into the
//! output directory and returns a process exit code: 0 on success, 2 for
//! configuration errors, 3 for numerical failures, 1 otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::eigen::top_indices;
use crate::analysis::linearize::{linearize, richardson_flags};
use crate::analysis::sweep::to_db;
use crate::assembly::{build, run_power_flow, Framework};
use crate::config::CaseConfig;
use crate::error::{Error, Result};
use crate::output::{num, Plot, Provenance, Series, Table};
use crate::sim::{integrate, SimOptions};
use crate::study::{self, Analysis, CaseStudy};

pub const CASE1: &str = include_str!("../cases/case1.cfg");
pub const CASE2: &str = include_str!("../cases/case2.cfg");

#[derive(Debug, Parser)]
#[command(name = "dqgrid", version, about = "Space-phasor and quasistationary small-signal studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameworkArg {
    Spc,
    Qpc,
}

impl From<FrameworkArg> for Framework {
    fn from(f: FrameworkArg) -> Self {
        match f {
            FrameworkArg::Spc => Framework::Spc,
            FrameworkArg::Qpc => Framework::Qpc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "spc")]
    pub framework: FrameworkArg,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Artifact formats to write.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,svg")]
    pub format: Vec<Format>,
    /// Accepted for interface stability; nothing is random.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the power flow.
    Powerflow {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured time-domain scenario.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the state-space matrices.
    Linearize {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Eigenvalues with frequency and damping.
    Eigs {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Participation factors and mode shape of one mode.
    Pfactors {
        config: PathBuf,
        /// Mode nearest this frequency (Hz); defaults to the least-damped
        /// oscillatory mode.
        #[arg(long)]
        freq: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Maximum singular value sweep.
    Sigma {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate and fit damped exponentials to the configured channel.
    Prony {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Both frameworks end to end for a shipped case (1 or 2) or a config.
    Casestudy {
        #[arg(value_parser = ["1", "2"])]
        case: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Skip the nonlinear simulation.
        #[arg(long)]
        no_sim: bool,
        #[command(flatten)]
        common: Common,
    },
}

struct Context {
    cfg: CaseConfig,
    prov: Provenance,
    common: Common,
}

impl Context {
    fn load(path: &Path, common: Common, command_line: &str) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text, &path.display().to_string(), common, command_line)
    }

    fn from_text(text: &str, origin: &str, common: Common, command_line: &str) -> Result<Self> {
        let cfg = CaseConfig::from_toml(text, origin)?;
        fs::create_dir_all(&common.out)?;
        Ok(Self {
            cfg,
            prov: Provenance::new(text, command_line),
            common,
        })
    }

    fn framework(&self) -> Framework {
        self.common.framework.into()
    }

    fn csv(&self, name: &str, t: &Table) -> Result<PathBuf> {
        let p = self.common.out.join(name);
        if self.common.format.contains(&Format::Csv) {
            t.write(&p, &self.prov)?;
        }
        Ok(p)
    }

    fn svg(&self, name: &str, plot: &Plot) -> Result<()> {
        if self.common.format.contains(&Format::Svg) {
            plot.write(&self.common.out.join(name), &self.prov)?;
        }
        Ok(())
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::UnknownChannel(_) | Error::Topology(_) | Error::InvalidArgument(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let command_line = args.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, &command_line) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command, command_line: &str) -> Result<String> {
    match cmd {
        Command::Powerflow { config, common } => powerflow(&Context::load(&config, common, command_line)?),
        Command::Simulate { config, common } => simulate(&Context::load(&config, common, command_line)?),
        Command::Linearize { config, common } => linearize_cmd(&Context::load(&config, common, command_line)?),
        Command::Eigs { config, common } => eigs(&Context::load(&config, common, command_line)?),
        Command::Pfactors { config, freq, common } => pfactors(&Context::load(&config, common, command_line)?, freq),
        Command::Sigma { config, common } => sigma(&Context::load(&config, common, command_line)?),
        Command::Prony { config, common } => prony(&Context::load(&config, common, command_line)?),
        Command::Casestudy {
            case,
            config,
            no_sim,
            common,
        } => {
            let ctx = match config {
                Some(p) => Context::load(&p, common, command_line)?,
                None => {
                    let text = if case == "1" { CASE1 } else { CASE2 };
                    Context::from_text(text, &format!("case{case}.cfg"), common, command_line)?
                }
            };
            casestudy(&ctx, !no_sim)
        }
    }
}

fn powerflow(ctx: &Context) -> Result<String> {
    let pf = run_power_flow(&ctx.cfg)?;
    let mut t = Table::new(["bus", "v_pu", "angle_deg", "p_pu", "q_pu"]);
    for (k, b) in pf.buses.iter().enumerate() {
        let r = &pf.result;
        t.push(vec![b.clone(), num(r.magnitude(k)), num(r.angle(k).to_degrees()), num(r.p[k]), num(r.q[k])]);
    }
    let p = ctx.csv("powerflow.csv", &t)?;
    let mut msg = format!("power flow converged in {} iterations -> {}", pf.result.iterations, p.display());
    if let Some(f) = pf.tie_flow {
        msg += &format!("\ntie flow {:.6} pu", f);
    }
    if let Some((bus, p)) = &pf.adjusted_load {
        msg += &format!("\nload at bus {bus} set to {p:.6} pu");
    }
    Ok(msg)
}

fn simulate(ctx: &Context) -> Result<String> {
    let (model, op) = build(&ctx.cfg, ctx.framework())?;
    let opts = SimOptions::from_config(&ctx.cfg.simulation, &ctx.cfg.analysis.inputs)?;
    let r = integrate(&model, &op.x0, &op.u0, &opts)?;
    let labels = model.output_labels();
    let mut t = Table::new(std::iter::once("t".to_string()).chain(labels.iter().cloned()));
    for (time, row) in r.time.iter().zip(&r.samples) {
        let mut cells = vec![num(*time)];
        cells.extend(row.iter().map(|v| num(*v)));
        t.push(cells);
    }
    let p = ctx.csv("simulation.csv", &t)?;
    let mut ev = Table::new(["t", "event"]);
    for e in &r.events {
        ev.push(vec![num(e.time), e.message.clone()]);
    }
    ctx.csv("events.csv", &ev)?;
    let series = (0..labels.len())
        .map(|k| Series {
            name: labels[k].clone(),
            x: r.time.clone(),
            y: r.channel(k),
        })
        .collect();
    ctx.svg(
        "simulation.svg",
        &Plot {
            title: format!("{} {} time-domain response", ctx.cfg.name, ctx.framework()),
            x_label: "time (s)".into(),
            y_label: "pu".into(),
            log_x: false,
            series,
        },
    )?;
    let mut msg = format!("{} samples -> {}", r.time.len(), p.display());
    for e in &r.events {
        msg += &format!("\nstopped at {:.4} s: {}", e.time, e.message);
    }
    Ok(msg)
}

fn matrix_table(m: &nalgebra::DMatrix<f64>, rows: &[String], cols: &[String]) -> Table {
    let mut t = Table::new(std::iter::once("row".to_string()).chain(cols.iter().cloned()));
    for (i, r) in rows.iter().enumerate() {
        let mut cells = vec![r.clone()];
        cells.extend((0..m.ncols()).map(|j| num(m[(i, j)])));
        t.push(cells);
    }
    t
}

fn linearize_cmd(ctx: &Context) -> Result<String> {
    let (model, op) = build(&ctx.cfg, ctx.framework())?;
    let lm = linearize(&model, &op.x0, &op.u0);
    ctx.csv("A.csv", &matrix_table(&lm.a, &lm.states, &lm.states))?;
    ctx.csv("B.csv", &matrix_table(&lm.b, &lm.states, &lm.inputs))?;
    ctx.csv("C.csv", &matrix_table(&lm.c, &lm.outputs, &lm.states))?;
    ctx.csv("D.csv", &matrix_table(&lm.d, &lm.outputs, &lm.inputs))?;
    let mut x0 = Table::new(["state", "x0"]);
    for (l, v) in lm.states.iter().zip(&op.x0) {
        x0.push(vec![l.clone(), num(*v)]);
    }
    ctx.csv("x0.csv", &x0)?;
    let flags = richardson_flags(&model, &op.x0, &op.u0);
    let mut ft = Table::new(["row", "column", "relative_change"]);
    for (i, j, r) in &flags {
        ft.push(vec![lm.states[*i].clone(), lm.states[*j].clone(), num(*r)]);
    }
    ctx.csv("richardson.csv", &ft)?;
    Ok(format!(
        "{} states, {} inputs, {} outputs; {} entries flagged by the step-halving check -> {}",
        lm.a.nrows(),
        lm.b.ncols(),
        lm.c.nrows(),
        flags.len(),
        ctx.common.out.display()
    ))
}

fn eigs(ctx: &Context) -> Result<String> {
    let an = Analysis::run(&ctx.cfg, ctx.framework())?;
    let mut t = Table::new(["mode", "re", "im", "f_hz", "zeta_pct", "unstable"]);
    for (k, m) in an.modes.iter().enumerate() {
        t.push(vec![
            k.to_string(),
            num(m.lambda.re),
            num(m.lambda.im),
            num(m.f_hz),
            num(m.zeta_pct),
            m.is_unstable().to_string(),
        ]);
    }
    let p = ctx.csv("modes.csv", &t)?;
    let mut msg = format!("{} modes -> {}", an.modes.len(), p.display());
    let unstable = an.unstable_pairs();
    if unstable.is_empty() {
        msg += &format!("\nno unstable oscillatory modes; max Re = {:.3e}", an.max_real_part());
    }
    for m in unstable {
        msg += &format!("\nunstable: {:.3} Hz, zeta {:.2} %", m.f_hz, m.zeta_pct);
    }
    Ok(msg)
}

fn pfactors(ctx: &Context, freq: Option<f64>) -> Result<String> {
    let an = Analysis::run(&ctx.cfg, ctx.framework())?;
    let mode = match freq {
        Some(f) => an
            .modes
            .iter()
            .filter(|m| m.is_oscillatory())
            .min_by(|a, b| (a.f_hz - f).abs().total_cmp(&(b.f_hz - f).abs())),
        None => an
            .modes
            .iter()
            .filter(|m| m.is_oscillatory())
            .min_by(|a, b| a.zeta_pct.total_cmp(&b.zeta_pct)),
    }
    .ok_or_else(|| Error::Eigen("no oscillatory mode".into()))?;
    let mut t = Table::new(["state", "participation", "shape_angle_deg"]);
    for k in top_indices(&mode.participation, mode.participation.len()) {
        t.push(vec![an.linear.states[k].clone(), num(mode.participation[k]), num(mode.shape_angle[k])]);
    }
    let p = ctx.csv("participation.csv", &t)?;
    let top: Vec<String> = an.top_participants(mode, 4).iter().map(|(l, v)| format!("{l} {v:.3}")).collect();
    Ok(format!(
        "mode {:.3} Hz, zeta {:.2} %: {} -> {}",
        mode.f_hz,
        mode.zeta_pct,
        top.join(", "),
        p.display()
    ))
}

fn sigma(ctx: &Context) -> Result<String> {
    let an = Analysis::run(&ctx.cfg, ctx.framework())?;
    let (grid, s) = study::sweep(&ctx.cfg, &an.linear)?;
    let mut t = Table::new(["f_hz", "sigma_max", "sigma_max_db"]);
    for (f, v) in grid.iter().zip(&s) {
        t.push_numbers(&[*f, *v, to_db(*v)]);
    }
    let p = ctx.csv("sigma.csv", &t)?;
    ctx.svg(
        "sigma.svg",
        &Plot {
            title: format!("{} {} maximum singular value", ctx.cfg.name, ctx.framework()),
            x_label: "frequency (Hz)".into(),
            y_label: "sigma_max (dB)".into(),
            log_x: true,
            series: vec![Series {
                name: ctx.framework().to_string(),
                x: grid.clone(),
                y: s.iter().map(|v| to_db(*v)).collect(),
            }],
        },
    )?;
    let (k, peak) = s
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))
        .unwrap_or((0, 0.0));
    Ok(format!("{} points, largest {:.4e} at {:.3} Hz -> {}", grid.len(), peak, grid[k], p.display()))
}

fn prony_table(fit: &crate::analysis::prony::PronyFit) -> Table {
    let mut t = Table::new(["amplitude", "sigma_per_s", "f_hz", "phase_rad", "zeta_pct"]);
    for m in &fit.modes {
        t.push_numbers(&[m.amplitude(), m.sigma(), m.frequency_hz(), m.phase(), 100.0 * m.damping_ratio()]);
    }
    t
}

fn prony(ctx: &Context) -> Result<String> {
    let td = study::time_domain(&ctx.cfg, ctx.framework())?;
    let p = ctx.csv("prony.csv", &prony_table(&td.fit))?;
    let lead = td
        .fit
        .modes
        .iter()
        .find(|m| m.frequency_hz() > 0.5)
        .map(|m| format!("{:.3} Hz, zeta {:.2} %", m.frequency_hz(), 100.0 * m.damping_ratio()))
        .unwrap_or_else(|| "no oscillatory mode".into());
    Ok(format!(
        "{} modes fitted to {} (residual {:.2e}); strongest oscillation {} -> {}",
        td.fit.modes.len(),
        td.channel,
        td.fit.residual,
        lead,
        p.display()
    ))
}

fn casestudy(ctx: &Context, with_sim: bool) -> Result<String> {
    let cs = CaseStudy::run(&ctx.cfg, with_sim)?;
    for (an, tag) in [(&cs.spc, "spc"), (&cs.qpc, "qpc")] {
        let mut t = Table::new(["mode", "re", "im", "f_hz", "zeta_pct", "unstable"]);
        for (k, m) in an.modes.iter().enumerate() {
            t.push(vec![
                k.to_string(),
                num(m.lambda.re),
                num(m.lambda.im),
                num(m.f_hz),
                num(m.zeta_pct),
                m.is_unstable().to_string(),
            ]);
        }
        ctx.csv(&format!("modes_{tag}.csv"), &t)?;
    }
    if let Some(m) = cs.critical() {
        let mut t = Table::new(["state", "participation", "shape_angle_deg"]);
        for k in top_indices(&m.participation, m.participation.len()) {
            t.push(vec![cs.spc.linear.states[k].clone(), num(m.participation[k]), num(m.shape_angle[k])]);
        }
        ctx.csv("participation_spc.csv", &t)?;
    }
    let mut t = Table::new(["f_hz", "sigma_spc", "sigma_spc_db", "sigma_qpc", "sigma_qpc_db"]);
    for k in 0..cs.grid.len() {
        t.push_numbers(&[cs.grid[k], cs.sigma_spc[k], to_db(cs.sigma_spc[k]), cs.sigma_qpc[k], to_db(cs.sigma_qpc[k])]);
    }
    ctx.csv("sigma.csv", &t)?;
    ctx.svg(
        "sigma.svg",
        &Plot {
            title: format!("{}: maximum singular value", cs.name),
            x_label: "frequency (Hz)".into(),
            y_label: "sigma_max (dB)".into(),
            log_x: true,
            series: vec![
                Series {
                    name: "SPC".into(),
                    x: cs.grid.clone(),
                    y: cs.sigma_spc.iter().map(|v| to_db(*v)).collect(),
                },
                Series {
                    name: "QPC".into(),
                    x: cs.grid.clone(),
                    y: cs.sigma_qpc.iter().map(|v| to_db(*v)).collect(),
                },
            ],
        },
    )?;
    if let Some(td) = &cs.time_domain {
        ctx.csv("prony.csv", &prony_table(&td.fit))?;
        let mut t = Table::new(["t", td.channel.as_str()]);
        for (time, row) in td.sim.time.iter().zip(&td.sim.samples) {
            t.push_numbers(&[*time, row[0]]);
        }
        ctx.csv("simulation.csv", &t)?;
        ctx.svg(
            "simulation.svg",
            &Plot {
                title: format!("{}: SPC response", cs.name),
                x_label: "time (s)".into(),
                y_label: format!("{} (pu)", td.channel),
                log_x: false,
                series: vec![Series {
                    name: td.channel.clone(),
                    x: td.sim.time.clone(),
                    y: td.sim.channel(0),
                }],
            },
        )?;
    }
    let report = cs.report();
    fs::write(ctx.common.out.join("report.md"), &report)?;
    Ok(report)
}
