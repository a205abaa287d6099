//! Both shipped cases end to end; prints the comparison reports.

use dqgrid::cli::{CASE1, CASE2};
use dqgrid::config::CaseConfig;
use dqgrid::study::CaseStudy;

fn main() -> dqgrid::Result<()> {
    let with_sim = !std::env::args().any(|a| a == "--no-sim");
    for (text, origin) in [(CASE1, "case1.cfg"), (CASE2, "case2.cfg")] {
        let cfg = CaseConfig::from_toml(text, origin)?;
        let study = CaseStudy::run(&cfg, with_sim)?;
        println!("{}", study.report());
    }
    Ok(())
}
