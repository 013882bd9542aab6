use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::verify::run_all;
use crate::analysis::{
    hs_residual_report, ks_delta_from, ks_flow_series, ks_functional_h, ks_spectral_side_excluding, spectral_data_gsmp,
    GrowthFit, KsReport, SpectralSide,
};
use crate::error::{Error, Result};
use crate::flow::{extract_jacobi, flow_j_fast, flow_run, FlowTrace};
use crate::gsmp::{assemble_v_of_a, assemble_window, GsmpWindow};
use crate::io::{csv, fmt17, to_json_pretty};
use crate::isospectral::{base_point, sample_torus, IsoPoint};
use crate::spectral_sets::{solve_potential, verify_potential, PotentialReport, PotentialV};
use crate::workbench::Perturbation;

/// Largest violation of `E = V^{-1}([-2, 2])` accepted for a certified potential.
pub const POTENTIAL_TOL: f64 = 1e-9;

/// Overall result of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Every certification passed.
    Certified,
    /// Output was written but some certification failed.
    Partial,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Certified => 0,
            Status::Partial => 2,
        }
    }

    fn and(self, other: Status) -> Status {
        if self == Status::Certified && other == Status::Certified {
            Status::Certified
        } else {
            Status::Partial
        }
    }
}

/// Output directory plus the list of files written to it.
#[derive(Debug)]
pub struct RunArtifacts {
    out_dir: PathBuf,
    files: Vec<String>,
    /// Human-readable progress lines; never written to files.
    pub log: Vec<String>,
}

impl RunArtifacts {
    pub fn new(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
        Ok(RunArtifacts { out_dir: out_dir.to_path_buf(), files: Vec::new(), log: Vec::new() })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Writes the config echo and `manifest.json`, which lists every file of
    /// the run including itself.
    pub fn finish(&mut self, command: &str, config: &ExperimentConfig, status: Status) -> Result<()> {
        self.write("config.json", &to_json_pretty(config)?)?;
        let mut files = self.files.clone();
        files.push("manifest.json".into());
        files.sort();
        files.dedup();
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            status,
            seed: config.seed,
            perturbation: &config.perturbation,
            files: &files,
        };
        self.write("manifest.json", &to_json_pretty(&manifest)?)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    status: Status,
    seed: u64,
    perturbation: &'a Perturbation,
    files: &'a [String],
}

fn solve(cfg: &ExperimentConfig) -> Result<(PotentialV, PotentialReport)> {
    let v = solve_potential(&cfg.intervals, cfg.potential_tol, cfg.potential_max_iter)?;
    let report = verify_potential(&v, &cfg.intervals, 2000);
    Ok((v, report))
}

fn potential_ok(r: &PotentialReport) -> bool {
    r.max_violation <= POTENTIAL_TOL && r.edge_residual <= POTENTIAL_TOL
}

/// Solves for the potential and writes `potential.json` and `potential_report.json`.
pub fn cmd_potential(cfg: &ExperimentConfig, art: &mut RunArtifacts) -> Result<Status> {
    let (v, report) = solve(cfg)?;
    art.write("potential.json", &to_json_pretty(&v)?)?;
    art.write("potential_report.json", &to_json_pretty(&report)?)?;
    art.log.push(format!(
        "potential: genus {}, lambda0 = {}, max violation {:e}",
        v.genus(),
        fmt17(v.lambda0),
        report.max_violation
    ));
    Ok(if potential_ok(&report) { Status::Certified } else { Status::Partial })
}

#[derive(Serialize)]
struct TorusReport<'a> {
    requested: usize,
    certified: usize,
    magic_deviation: &'a [f64],
    margin: &'a [f64],
    failures: &'a [String],
}

/// Samples the isospectral torus and writes the certified points.
pub fn cmd_torus(cfg: &ExperimentConfig, art: &mut RunArtifacts) -> Result<Status> {
    let (v, report) = solve(cfg)?;
    let sample = sample_torus(&v, cfg.torus_samples, cfg.seed, cfg.iso_tol)?;
    let g = v.genus();
    art.write("torus_points.json", &to_json_pretty(&sample.points)?)?;
    let mut header: Vec<String> = (0..=g).map(|i| format!("p{i}")).collect();
    header.extend((0..=g).map(|i| format!("q{i}")));
    header.extend(["residual", "magic_deviation", "margin"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = sample.points.iter().enumerate().map(|(i, pt)| {
        let mut r = pt.p.clone();
        r.extend(&pt.q);
        r.extend([pt.residual, sample.magic_deviation[i], sample.margin[i]]);
        r
    });
    art.write("torus.csv", &csv(&header, rows))?;
    let tr = TorusReport {
        requested: cfg.torus_samples,
        certified: sample.points.len(),
        magic_deviation: &sample.magic_deviation,
        margin: &sample.margin,
        failures: &sample.failures,
    };
    art.write("torus_report.json", &to_json_pretty(&tr)?)?;
    for f in &sample.failures {
        art.log.push(format!("torus: {f}"));
    }
    art.log.push(format!("torus: {} of {} points certified", sample.points.len(), cfg.torus_samples));
    let ok = !sample.points.is_empty() && potential_ok(&report);
    Ok(if ok { Status::Certified } else { Status::Partial })
}

fn start_point(cfg: &ExperimentConfig, v: &PotentialV) -> Result<IsoPoint> {
    if cfg.torus_point == 0 {
        return base_point(v);
    }
    let s = sample_torus(v, cfg.torus_samples, cfg.seed, cfg.iso_tol)?;
    s.points.get(cfg.torus_point).cloned().ok_or_else(|| {
        Error::InvalidArgument(format!("torus point {} not certified ({} available)", cfg.torus_point, s.points.len()))
    })
}

/// The perturbed window on `[window_lo, window_lo + blocks)`.
fn start_window(cfg: &ExperimentConfig, v: &PotentialV, pt: &IsoPoint, blocks: usize) -> Result<GsmpWindow> {
    let w = GsmpWindow::new(v.pole_positions(), cfg.window_lo, vec![pt.pair(); blocks])?;
    cfg.perturbation.apply_certified(&w)
}

fn flow_blocks(cfg: &ExperimentConfig) -> usize {
    cfg.flow_steps + cfg.window_margin
}

#[derive(Serialize)]
struct FlowReport<'a> {
    steps_requested: usize,
    steps_completed: usize,
    stopped: Option<&'a crate::flow::FlowStop>,
    max_discrepancy: Option<f64>,
}

fn write_flow(trace: &FlowTrace, cfg: &ExperimentConfig, art: &mut RunArtifacts) -> Result<()> {
    let mut buf = Vec::new();
    trace.write_json_lines(&mut buf)?;
    art.write("flow_trace.jsonl", &String::from_utf8(buf).expect("JSON is UTF-8"))?;
    if trace.steps() > 0 {
        art.write("jacobi.csv", &extract_jacobi(trace)?.to_csv())?;
    }
    let report = FlowReport {
        steps_requested: cfg.flow_steps,
        steps_completed: trace.steps(),
        stopped: trace.stopped.as_ref(),
        max_discrepancy: trace.discrepancies.iter().copied().reduce(f64::max),
    };
    art.write("flow_report.json", &to_json_pretty(&report)?)
}

fn run_flow(cfg: &ExperimentConfig, v: &PotentialV) -> Result<(GsmpWindow, FlowTrace)> {
    let pt = start_point(cfg, v)?;
    let w = start_window(cfg, v, &pt, flow_blocks(cfg))?;
    let trace = flow_run(&w, cfg.flow_steps, cfg.flow_mode())?;
    Ok((w, trace))
}

/// Runs the flow and writes the trace, the extracted Jacobi coefficients and
/// the assembled start matrix.
pub fn cmd_flow(cfg: &ExperimentConfig, art: &mut RunArtifacts) -> Result<Status> {
    let (v, report) = solve(cfg)?;
    let (w, trace) = run_flow(cfg, &v)?;
    let m = assemble_window(&w, w.lo(), w.hi())?;
    let mut buf = Vec::new();
    m.write_coo(&mut buf)?;
    art.write("start_matrix.coo", &String::from_utf8(buf).expect("ASCII"))?;
    write_flow(&trace, cfg, art)?;
    match &trace.stopped {
        Some(s) => art.log.push(format!("flow: stopped at step {}: {}", s.step, s.reason)),
        None => art.log.push(format!("flow: {} steps completed", trace.steps())),
    }
    let ok = trace.stopped.is_none() && potential_ok(&report);
    Ok(if ok { Status::Certified } else { Status::Partial })
}

/// Blocks of the initial window over which `H_+` and the HS residual are reported.
const REPORT_BLOCKS: i64 = 60;

fn spectral_sides(cfg: &ExperimentConfig, v: &PotentialV, pt: &IsoPoint) -> Result<Vec<(SpectralSide, String)>> {
    let bs = v.genus() + 1;
    cfg.truncations
        .par_iter()
        .map(|&n| {
            let blocks = n.div_ceil(bs) + (-cfg.window_lo) as usize + 1;
            let w = start_window(cfg, v, pt, blocks)?;
            let data = spectral_data_gsmp(&w, n)?;
            let side = ks_spectral_side_excluding(
                &data,
                &cfg.intervals,
                cfg.eps_for(n),
                cfg.edge_delta_for(n),
                &v.pole_positions(),
            )?;
            Ok((side, data.to_csv()))
        })
        .collect()
}

/// Runs the flow and writes the Killip-Simon report with plot-ready CSVs.
pub fn cmd_ks_report(cfg: &ExperimentConfig, art: &mut RunArtifacts) -> Result<Status> {
    let (v, report) = solve(cfg)?;
    let pt = start_point(cfg, &v)?;
    let w = start_window(cfg, &v, &pt, flow_blocks(cfg))?;
    let trace = flow_run(&w, cfg.flow_steps, cfg.flow_mode())?;
    let series = ks_flow_series(&trace, &v)?;

    let k = REPORT_BLOCKS.min(w.hi() - 5);
    let va = assemble_v_of_a(&w, &v, -1, k + 1)?;
    let h_plus = ks_functional_h(&va, 0, k)?;
    let hs_blocks = hs_residual_report(&va, 0, k)?;
    let telescoping = match cfg.perturbation {
        Perturbation::PowerDecay { .. } => None,
        _ => {
            let next = flow_j_fast(&w)?;
            let hb = ks_functional_h(&assemble_v_of_a(&next, &v, -1, k + 1)?, 0, k)?;
            Some((h_plus.total() - hb.total() - ks_delta_from(&next, &v)?).abs())
        }
    };
    let sides = spectral_sides(cfg, &v, &pt)?;
    for (side, data) in &sides {
        art.write(&format!("spectral_{}.csv", side.n), data)?;
    }
    let spectral_side: Vec<SpectralSide> = sides.into_iter().map(|s| s.0).collect();
    let growth: BTreeMap<String, GrowthFit> = series.growth();
    let ks = KsReport {
        genus: v.genus(),
        steps: trace.steps(),
        h_plus,
        hs_blocks,
        flow: series,
        growth,
        telescoping,
        spectral_side,
    };
    art.write("ks_report.json", &to_json_pretty(&ks)?)?;

    let mut header = vec!["n", "delta_h_plus", "hs_residual"];
    header.extend(ks.flow.families.keys().map(String::as_str));
    let rows = (0..ks.steps).map(|i| {
        let mut r = vec![i as f64, ks.flow.delta.partial[i], ks.flow.hs.partial[i]];
        r.extend(ks.flow.families.values().map(|f| f.partial[i]));
        r
    });
    art.write("ks_partial_sums.csv", &csv(&header, rows))?;
    let rows = ks.spectral_side.iter().map(|s| vec![s.n as f64, s.eps, s.edge_delta, s.ac_term, s.ev_term]);
    art.write("ks_spectral.csv", &csv(&["n", "eps", "edge_delta", "ac_term", "ev_term"], rows))?;

    for (name, g) in &ks.growth {
        art.log.push(format!(
            "ks-report: {name}: total {}, tail growth {:.3e}, {}",
            fmt17(g.total),
            g.relative_growth_tail,
            if g.bounded() { "bounded" } else if g.divergent() { "growing" } else { "undetermined" }
        ));
    }
    if let Some(s) = &trace.stopped {
        art.log.push(format!("ks-report: flow stopped at step {}: {}", s.step, s.reason));
    }
    let ok = trace.stopped.is_none() && potential_ok(&report);
    Ok(if ok { Status::Certified } else { Status::Partial })
}

/// Runs the acceptance checks and writes `verify.json`.
pub fn cmd_verify(art: &mut RunArtifacts) -> Result<Status> {
    let results = run_all();
    let mut status = Status::Certified;
    for r in &results {
        art.log.push(r.line());
        status = status.and(if r.passed { Status::Certified } else { Status::Partial });
    }
    art.write("verify.json", &to_json_pretty(&results)?)?;
    Ok(status)
}
