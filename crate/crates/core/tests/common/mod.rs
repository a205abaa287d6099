#![allow(dead_code)]

use dqgrid::cli::{CASE1, CASE2};
use dqgrid::config::CaseConfig;

pub fn case1() -> CaseConfig {
    CaseConfig::from_toml(CASE1, "case1.cfg").unwrap()
}

pub fn case2() -> CaseConfig {
    CaseConfig::from_toml(CASE2, "case2.cfg").unwrap()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
