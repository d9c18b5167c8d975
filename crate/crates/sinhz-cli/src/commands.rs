use std::path::Path;
use std::time::Instant;

use sinhz::levelcurves::{build_extended_curve, flatten_curve_with, DEFAULT_DELTA, DEFAULT_DELTA_STAR};
use sinhz::pricing::price as price_request;
use sinhz::zinv::measure::benchmark_row;

use crate::config::Config;
use crate::output::{csv_table, json_num, num};
use crate::CliError;

pub const BENCHMARK_HEADER: [&str; 11] = [
    "n",
    "M",
    "eps",
    "N_trap_predicted",
    "N_trap_measured",
    "N_sinh_predicted",
    "N_sinh_measured",
    "K_predicted",
    "K_measured",
    "err_trap",
    "err_sinh",
];

pub const TRACE_HEADER: [&str; 5] = ["t", "re_xi", "im_xi", "im_psi_residual", "segment"];

pub fn price(path: &Path, eps: Option<f64>) -> Result<String, CliError> {
    let cfg = Config::load(path)?;
    let req = cfg.request(eps)?;
    let t = Instant::now();
    let r = price_request(&req).map_err(CliError::from_engine)?;
    let wall = t.elapsed().as_secs_f64();
    if !r.price.is_finite() {
        return Err(CliError::Numerical("engine returned a non-finite price".into()));
    }
    Ok(format!(
        "{{\"price\":{},\"achieved_error_estimate\":{},\"q_nodes_used\":{},\"inner_nodes_avg\":{},\"wall_time\":{},\"path\":\"{}\"}}\n",
        json_num(r.price),
        json_num(r.error_estimate),
        r.outer_nodes,
        json_num(r.inner_nodes as f64),
        json_num(wall),
        r.path
    ))
}

pub fn benchmark(path: &Path, eps: Option<f64>) -> Result<String, CliError> {
    let cfg = Config::load(path)?;
    let b = cfg
        .benchmark
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [benchmark] section".into()))?;
    if b.transform != "pole_at_one" {
        return Err(CliError::Config(format!("unknown benchmark transform '{}'", b.transform)));
    }
    let eps_list = match eps {
        Some(e) => vec![e],
        None => b.eps.clone(),
    };
    let mut rows = Vec::new();
    for &n in &b.n {
        for &m in &b.m {
            for &e in &eps_list {
                let r = benchmark_row(n, m, e).map_err(CliError::from_engine)?;
                let opt = |v: Option<usize>| v.map_or(String::new(), |k| k.to_string());
                rows.push(vec![
                    n.to_string(),
                    num(m),
                    num(e),
                    num(r.n_trap_predicted),
                    opt(r.n_trap_measured),
                    num(r.n_sinh_predicted),
                    opt(r.n_sinh_measured),
                    num(r.k_predicted),
                    r.k_measured.map_or(String::new(), num),
                    num(r.err_trap),
                    num(r.err_sinh),
                ]);
            }
        }
    }
    Ok(csv_table(&BENCHMARK_HEADER, &rows))
}

pub fn trace(path: &Path) -> Result<String, CliError> {
    let cfg = Config::load(path)?;
    let model = cfg.model()?;
    let e = &cfg.engine;
    let delta = e.delta.unwrap_or(DEFAULT_DELTA);
    let u = e.u.unwrap_or(0.0);
    let x_max = e.x_max.unwrap_or(100.0);
    let mut curve = build_extended_curve(&model, delta, u, x_max).map_err(CliError::from_engine)?;
    if let Some(xs) = e.flatten_at {
        curve = flatten_curve_with(&curve, xs, e.delta_star.unwrap_or(DEFAULT_DELTA_STAR))
            .map_err(CliError::from_engine)?;
    }
    let rows: Vec<Vec<String>> = curve
        .csv_rows()
        .iter()
        .map(|r| {
            let mut row: Vec<String> = r.iter().map(|v| num(*v)).collect();
            row.push(curve.segment(r[0]).as_str().to_string());
            row
        })
        .collect();
    Ok(csv_table(&TRACE_HEADER, &rows))
}
