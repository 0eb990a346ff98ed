use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crio_core::gm::{gm_optimize, reduced_crio_state, resource_table, resource_table_csv};
use crio_core::graphstate::{crio_state, phi_state};
use crio_core::povm::{
    case1_csv, case2_csv, enumerate_case1, enumerate_case2, format_angle, success_rate, CaseOneBlock,
    ControlPowerReport, TableRow,
};
use crio_core::protocol::{control_denial_report, run_crio, ControlDenialReport, RunMode};
use crio_core::qcore::StateExport;
use crio_core::{build_graph_state, crio_graph, CrioTopology, GmMode, GmOptions, Graph, ProtocolConfig, ProtocolResult, QuantumState, C64};
use serde::Serialize;

use crate::angle::{parse_angle, parse_axis, parse_groups};
use crate::report::{emit, envelope, header, Format};
use crate::{Common, Family, Table};

/// Whether every check of a command held.
pub struct Outcome {
    pub verified: bool,
}

fn finish(body: String, verified: bool, common: &Common) -> Result<Outcome> {
    emit(&body, common.out.as_deref())?;
    Ok(Outcome { verified })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct StateConfig {
    family: String,
    n: Option<usize>,
    groups: Option<Vec<usize>>,
    edges: Option<String>,
}

#[derive(Serialize)]
struct StateFile {
    graph: Option<String>,
    #[serde(flatten)]
    state: StateExport,
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::H3 => "h3",
        Family::H5 => "h5",
        Family::H2n1 => "h2n1",
        Family::Phi => "phi",
    }
}

fn need_n(n: Option<usize>, family: &str) -> Result<usize> {
    match n {
        Some(n) if n >= 1 => Ok(n),
        Some(_) => bail!("--n must be at least 1"),
        None => bail!("family `{family}` needs --n"),
    }
}

pub fn build_state(
    family: Option<Family>,
    n: Option<usize>,
    groups: Option<&str>,
    edges: Option<&Path>,
    common: &Common,
) -> Result<Outcome> {
    let groups = groups.map(parse_groups).transpose()?;
    let (config, graph, state) = match (family, edges) {
        (_, Some(path)) => {
            let g: Graph = read(path)?.parse()?;
            let text = g.to_string();
            let state = build_graph_state(&g);
            let config = StateConfig {
                family: "edges".into(),
                n: None,
                groups: None,
                edges: Some(text.clone()),
            };
            (config, Some(text), state)
        }
        (Some(Family::Phi), None) => {
            let n = need_n(n, "phi")?;
            let config = StateConfig {
                family: "phi".into(),
                n: Some(n),
                groups: None,
                edges: None,
            };
            (config, None, phi_state(n)?)
        }
        (Some(f), None) => {
            let n = match f {
                Family::H3 => 1,
                Family::H5 => 2,
                _ => need_n(n, "h2n1")?,
            };
            let topology = match &groups {
                Some(g) => CrioTopology::new(n, g.iter().copied())?,
                None => CrioTopology::full(n)?,
            };
            let g = crio_graph(&topology);
            let config = StateConfig {
                family: family_name(f).into(),
                n: Some(n),
                groups: groups.clone(),
                edges: None,
            };
            (config, Some(g.to_string()), build_graph_state(&g))
        }
        (None, None) => bail!("give a state family or --edges"),
    };
    let body = match common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let file = StateFile {
                graph,
                state: state.to_export(),
            };
            envelope("build-state", &config, true, &file)?
        }
        Format::Csv => header("build-state", &config) + &state.to_csv(),
        Format::Text => header("build-state", &config) + &ket_listing(&state),
    };
    finish(body, true, common)
}

fn ket_listing(state: &QuantumState) -> String {
    let n = state.num_qubits();
    let mut out = format!("{}\n", state.labels().join(","));
    for (i, a) in state.amplitudes().iter().enumerate() {
        if a.norm() > 1e-15 {
            let bits: String = (0..n).map(|k| if (i >> (n - 1 - k)) & 1 == 1 { '1' } else { '0' }).collect();
            // adding zero clears negative zeros
            let _ = writeln!(out, "{:+.6}{:+.6}i |{bits}⟩", a.re + 0.0, a.im + 0.0);
        }
    }
    out
}

pub struct ProtocolFlags {
    pub config: Option<PathBuf>,
    pub n: Option<usize>,
    pub axis: Vec<String>,
    pub alpha: Vec<String>,
    pub groups: Option<String>,
    pub mode: Option<String>,
    pub permitted: Option<bool>,
}

/// Target state used for every group unless a config file says otherwise.
pub const DEFAULT_TARGET: [C64; 2] = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];

fn per_group<T: Clone>(values: Vec<T>, n: usize, what: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); n]),
        len if len == n => Ok(values),
        len => bail!("{len} values for --{what}, expected 1 or {n}"),
    }
}

fn protocol_config(flags: ProtocolFlags, seed: Option<u64>) -> Result<ProtocolConfig> {
    let mut cfg = match &flags.config {
        Some(path) => serde_json::from_str::<ProtocolConfig>(&read(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => {
            let n = flags.n.unwrap_or(1);
            ProtocolConfig::new(
                n,
                vec![crio_core::PauliAxis::Z; n],
                vec![FRAC_PI_4; n],
                vec![DEFAULT_TARGET; n],
            )
        }
    };
    if let Some(n) = flags.n {
        if n != cfg.n {
            cfg.n = n;
            cfg.axes = vec![cfg.axes.first().copied().unwrap_or(crio_core::PauliAxis::Z); n];
            cfg.betas = vec![cfg.betas.first().copied().unwrap_or(FRAC_PI_4); n];
            cfg.target_states = vec![cfg.target_states.first().copied().unwrap_or(DEFAULT_TARGET); n];
        }
    }
    if !flags.axis.is_empty() {
        let axes = flags.axis.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>>>()?;
        cfg.axes = per_group(axes, cfg.n, "axis")?;
    }
    if !flags.alpha.is_empty() {
        let betas = flags.alpha.iter().map(|a| parse_angle(a)).collect::<Result<Vec<_>>>()?;
        cfg.betas = per_group(betas, cfg.n, "alpha")?;
    }
    if let Some(g) = &flags.groups {
        cfg.controlled_groups = Some(parse_groups(g)?);
    }
    if let Some(m) = &flags.mode {
        cfg.mode = if m == "sample" { RunMode::Sample } else { RunMode::Enumerate };
    }
    if let Some(p) = flags.permitted {
        cfg.permitted = p;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct ProtocolSummary {
    branches: usize,
    total_probability: f64,
    min_fidelity: f64,
    mean_fidelity: f64,
    succeeded: bool,
}

#[derive(Serialize)]
struct ProtocolReport<'a> {
    summary: ProtocolSummary,
    denial: Option<ControlDenialReport>,
    run: &'a ProtocolResult,
}

pub fn run_protocol(flags: ProtocolFlags, common: &Common) -> Result<Outcome> {
    let cfg = protocol_config(flags, common.seed)?;
    let result = run_crio(&cfg)?;
    let summary = ProtocolSummary {
        branches: result.branches.len(),
        total_probability: result.total_probability(),
        min_fidelity: result.min_fidelity(),
        mean_fidelity: result.mean_fidelity(),
        succeeded: result.succeeded(crio_core::PIPELINE_TOL),
    };
    // without permission the check is that no guessed bit completes the run
    let denial = if cfg.permitted {
        None
    } else {
        Some(control_denial_report(cfg.n, cfg.axes.clone(), cfg.betas.clone(), cfg.target_states.clone())?)
    };
    let verified = match &denial {
        None => summary.succeeded,
        Some(d) => d.blocked,
    };
    let body = match common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let report = ProtocolReport {
                summary,
                denial,
                run: &result,
            };
            envelope("run-protocol", &cfg, verified, &report)?
        }
        Format::Csv => {
            let mut out = header("run-protocol", &cfg) + "bits,probability,fidelity\n";
            for b in &result.branches {
                let _ = writeln!(out, "{},{:.15},{:.15}", b.bits, b.probability, b.fidelity);
            }
            out
        }
        Format::Text => {
            let mut out = header("run-protocol", &cfg);
            let _ = writeln!(
                out,
                "N={} permitted={} branches={} total_probability={:.12}\nmin_fidelity={:.12} mean_fidelity={:.12}",
                cfg.n, cfg.permitted, summary.branches, summary.total_probability, summary.min_fidelity, summary.mean_fidelity
            );
            if let Some(d) = &denial {
                let _ = writeln!(
                    out,
                    "purity_without_controller={:.12} best_guessed_min_fidelity={:.12} blocked={}",
                    d.purity, d.best_min_fidelity, d.blocked
                );
            }
            let _ = writeln!(out, "verified={verified}");
            out
        }
    };
    finish(body, verified, common)
}

#[derive(Serialize)]
struct GmConfig {
    state_id: String,
    n: usize,
    mode: String,
    restarts: usize,
    seed: u64,
    state_sha256: Option<String>,
}

pub fn gm(
    family: Option<Family>,
    n: Option<usize>,
    state: Option<&Path>,
    mode: Option<&str>,
    restarts: usize,
    common: &Common,
) -> Result<Outcome> {
    let mode_name = mode.unwrap_or("nonneg");
    let gm_mode = if mode_name == "general" { GmMode::General } else { GmMode::Nonneg };
    let (state_id, n, psi, digest) = match (family, state) {
        (_, Some(path)) => {
            let text = read(path)?;
            let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            // accept a bare export or a build-state report
            let inner = v.get("result").cloned().unwrap_or(v);
            let export: StateExport = serde_json::from_value(inner).context("state JSON needs labels and amplitudes")?;
            let psi = QuantumState::try_from(export)?;
            let digest = crate::report::config_hash(&psi.to_export());
            ("file".to_string(), 0, psi, Some(digest))
        }
        (Some(Family::Phi), None) => {
            let n = need_n(n, "phi")?;
            (format!("phi_{}", 2 * n), n, phi_state(n)?, None)
        }
        (Some(f), None) => {
            let n = match f {
                Family::H3 => 1,
                Family::H5 => 2,
                _ => need_n(n, "h2n1")?,
            };
            // the signed state is locally equivalent to a non-negative one
            let psi = if gm_mode == GmMode::Nonneg { reduced_crio_state(n)? } else { crio_state(n)? };
            (format!("h_{}", 2 * n + 1), n, psi, None)
        }
        (None, None) => bail!("give a state family or --state"),
    };
    let options = GmOptions {
        mode: gm_mode,
        restarts,
        seed: common.seed.unwrap_or(0),
        ..GmOptions::default()
    };
    let config = GmConfig {
        state_id: state_id.clone(),
        n,
        mode: mode_name.into(),
        restarts,
        seed: options.seed,
        state_sha256: digest,
    };
    let result = gm_optimize(&psi, &options)?;
    let report = result.report(&state_id, n);
    let verified = result.converged;
    let body = match common.format.unwrap_or(Format::Json) {
        Format::Json => envelope("gm", &config, verified, &report)?,
        Format::Csv => {
            header("gm", &config)
                + "state_id,N,lambda_sq,G,converged\n"
                + &format!("{},{},{:.15},{:.15},{}\n", report.state_id, report.n, report.lambda_sq, report.g, report.converged)
        }
        Format::Text => {
            header("gm", &config)
                + &format!(
                    "{}: lambda^2={:.12} G={:.12} converged={}\nargmax thetas: {}\n",
                    report.state_id,
                    report.lambda_sq,
                    report.g,
                    report.converged,
                    report.argmax_thetas.iter().map(|t| format!("{t:.9}")).collect::<Vec<_>>().join(" ")
                )
        }
    };
    finish(body, verified, common)
}

#[derive(Serialize)]
struct PowerConfig {
    alphas: Vec<f64>,
}

fn branch_names(r: &ControlPowerReport) -> String {
    r.favorable_branches
        .iter()
        .map(|(j, k)| format!("M{j}N{k}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn control_power(alpha: Option<&str>, sweep: Option<usize>, common: &Common) -> Result<Outcome> {
    let alphas: Vec<f64> = match (alpha, sweep) {
        (Some(a), _) => vec![parse_angle(a)?],
        (None, Some(0)) => bail!("--sweep needs at least one point"),
        (None, Some(k)) => (0..k).map(|i| TAU * i as f64 / k as f64).collect(),
        (None, None) => bail!("give --alpha or --sweep"),
    };
    let reports: Vec<ControlPowerReport> = alphas.iter().map(|&a| success_rate(a)).collect();
    let verified = reports.iter().all(|r| r.success_rate == 0.25 || r.success_rate == 0.5);
    let config = PowerConfig { alphas };
    let body = match common.format.unwrap_or(Format::Json) {
        Format::Json if reports.len() == 1 => envelope("control-power", &config, verified, &reports[0])?,
        Format::Json => envelope("control-power", &config, verified, &reports)?,
        Format::Csv | Format::Text => {
            let mut out = header("control-power", &config) + "target_alpha,success_rate,favorable_branches\n";
            for r in &reports {
                let _ = writeln!(out, "{},{},{}", format_angle(r.target_alpha), r.success_rate, branch_names(r));
            }
            out
        }
    };
    finish(body, verified, common)
}

pub struct TableFlags {
    pub n: Option<usize>,
    pub theta1: Option<String>,
    pub phi1: Option<String>,
    pub omega1: Option<String>,
    pub omega2: Option<String>,
    pub lambda1: Option<String>,
}

#[derive(Serialize)]
struct TableConfig {
    table: Table,
    n: usize,
    theta1: f64,
    phi1: f64,
    omega1: f64,
    omega2: f64,
    lambda1: f64,
    restarts: usize,
    seed: u64,
}

fn angle_or(s: &Option<String>, default: f64) -> Result<f64> {
    s.as_deref().map(parse_angle).transpose().map(|v| v.unwrap_or(default))
}

pub fn reproduce_tables(table: Table, flags: TableFlags, common: &Common) -> Result<Outcome> {
    let config = TableConfig {
        table,
        n: flags.n.unwrap_or(3),
        theta1: angle_or(&flags.theta1, FRAC_PI_8)?,
        phi1: angle_or(&flags.phi1, 0.0)?,
        omega1: angle_or(&flags.omega1, 0.0)?,
        omega2: angle_or(&flags.omega2, 0.0)?,
        lambda1: angle_or(&flags.lambda1, FRAC_PI_8)?,
        restarts: 64,
        seed: common.seed.unwrap_or(0),
    };
    let format = common.format.unwrap_or(Format::Csv);
    let (csv, json, verified) = match table {
        Table::Resource => {
            let options = GmOptions {
                restarts: config.restarts,
                seed: config.seed,
                ..GmOptions::default()
            };
            let rows = resource_table(config.n, &options)?;
            let ok = rows.iter().all(|r| (r.gm - (r.systems / 2) as f64).abs() < 1e-6);
            (resource_table_csv(&rows), serde_json::to_value(&rows)?, ok)
        }
        Table::Diagonal | Table::OffDiagonal => {
            let rows: Vec<TableRow> = if table == Table::Diagonal {
                let mut rows = Vec::new();
                for block in [CaseOneBlock::ZeroFirst, CaseOneBlock::ZeroSecond] {
                    rows.extend(enumerate_case1(config.theta1, config.phi1, config.omega1, config.omega2, block)?);
                }
                rows
            } else {
                let mut rows = enumerate_case2(FRAC_PI_4)?;
                if (config.lambda1 - FRAC_PI_4).abs() > 1e-12 {
                    rows.extend(enumerate_case2(config.lambda1)?);
                }
                rows
            };
            let ok = rows.iter().all(|r| r.realized.realizable && !r.realized.alphas.is_empty());
            let csv = if table == Table::Diagonal { case1_csv(&rows) } else { case2_csv(&rows) };
            (csv, serde_json::to_value(&rows)?, ok)
        }
    };
    let body = match format {
        Format::Json => envelope("reproduce-tables", &config, verified, &json)?,
        Format::Csv | Format::Text => header("reproduce-tables", &config) + &csv,
    };
    finish(body, verified, common)
}
