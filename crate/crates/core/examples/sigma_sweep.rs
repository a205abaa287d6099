//! Maximum singular value of the input-output frequency response for both
//! frameworks, written as CSV and SVG.

use std::path::Path;

use dqgrid::analysis::sweep::to_db;
use dqgrid::assembly::Framework;
use dqgrid::cli::CASE1;
use dqgrid::config::CaseConfig;
use dqgrid::output::{Plot, Provenance, Series, Table};
use dqgrid::study::{peak_near, sweep, Analysis};

fn main() -> dqgrid::Result<()> {
    let cfg = CaseConfig::from_toml(CASE1, "case1.cfg")?;
    let spc = Analysis::run(&cfg, Framework::Spc)?;
    let qpc = Analysis::run(&cfg, Framework::Qpc)?;
    let (grid, s_spc) = sweep(&cfg, &spc.linear)?;
    let (_, s_qpc) = sweep(&cfg, &qpc.linear)?;

    if let Some(m) = spc.unstable_pairs().first() {
        match peak_near(&grid, &s_spc, m.f_hz) {
            Some(k) => println!(
                "SPC peak at {:.2} Hz: {:.1} dB, QPC there {:.1} dB",
                grid[k],
                to_db(s_spc[k]),
                to_db(s_qpc[k])
            ),
            None => println!("no SPC peak near {:.2} Hz", m.f_hz),
        }
    }

    let out = Path::new("out/sigma_sweep");
    std::fs::create_dir_all(out)?;
    let prov = Provenance::new(dqgrid::cli::CASE1, "cargo run --example sigma_sweep");
    let mut t = Table::new(["f_hz", "spc_db", "qpc_db"]);
    for k in 0..grid.len() {
        t.push_numbers(&[grid[k], to_db(s_spc[k]), to_db(s_qpc[k])]);
    }
    t.write(&out.join("sigma.csv"), &prov)?;
    let series = |name: &str, s: &[f64]| Series {
        name: name.into(),
        x: grid.clone(),
        y: s.iter().map(|v| to_db(*v)).collect(),
    };
    Plot {
        title: "maximum singular value".into(),
        x_label: "frequency (Hz)".into(),
        y_label: "sigma_max (dB)".into(),
        log_x: true,
        series: vec![series("SPC", &s_spc), series("QPC", &s_qpc)],
    }
    .write(&out.join("sigma.svg"), &prov)?;
    println!("wrote {}", out.display());
    Ok(())
}
