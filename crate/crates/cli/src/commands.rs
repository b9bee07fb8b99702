use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use penalty_flow::config::RunConfig;
use penalty_flow::diagnostics::{
    check_lemma_fej1, check_lemma_fej4, choose_lemma_constants, convergence_report, t1_threshold, DiagnosticsReport,
    MIN_REPORT_HORIZON,
};
use penalty_flow::discrete::{compare_with_euler, iterate};
use penalty_flow::dynamics::{integrate, read_trajectory_csv, ProblemInstance, Trajectory};
use penalty_flow::operators::PenaltyKind;
use penalty_flow::problems::NamedInstance;
use penalty_flow::schedules::{classify, HfitzStatus, HypothesisReport, Schedule};

use crate::Status;

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunConfig::from_json(&text)?)
}

fn resolve(out_dir: &Path, configured: Option<&PathBuf>, default: &str) -> PathBuf {
    match configured {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => out_dir.join(p),
        None => out_dir.join(default),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

/// Schedule classification; (H_fitz) has no gap formula for linear penalties.
fn hypotheses(s: &Schedule, pr: &ProblemInstance) -> Result<HypothesisReport> {
    let mut report = classify(s, pr.mu())?;
    if matches!(pr.b().kind(), PenaltyKind::LinearPsd(_)) {
        report.hfitz_distsq_ok = HfitzStatus::Unverified;
        report.hfitz_criterion = "no Fitzpatrick gap formula for a linear penalty".into();
    }
    Ok(report)
}

fn report_failures(report: &HypothesisReport) -> bool {
    let failures = report.failures();
    for f in &failures {
        eprintln!("{f}");
    }
    !failures.is_empty()
}

fn diagnostics(named: &NamedInstance, s: &Schedule, tr: &Trajectory) -> Result<DiagnosticsReport> {
    let pr = &named.instance;
    let gp = &named.certificate;
    let t_end = *tr.times.last().context("empty trajectory")?;
    let fej1 = check_lemma_fej1(tr, gp, pr, None)?;
    let c = choose_lemma_constants(s, pr.mu())?;
    let t1 = t1_threshold(s, pr.eta(), c.b, c.t0)?;
    let fej4 = if t_end >= t1 { Some(check_lemma_fej4(tr, gp, pr, &c, t1, None)?) } else { None };
    let conv = if t_end >= MIN_REPORT_HORIZON {
        Some(convergence_report(tr, &named.solution, &gp.z)?)
    } else {
        None
    };
    Ok(DiagnosticsReport::new(Some(&fej1), fej4.as_ref(), conv.as_ref()))
}

pub fn run(config: &Path, out_dir: &Path) -> Result<Status> {
    let cfg = load(config)?;
    let named = cfg.instance()?;
    let s = cfg.schedule()?;
    let pr = &named.instance;
    let hyp = hypotheses(&s, pr)?;
    if report_failures(&hyp) {
        return Ok(Status::HypothesisFailure);
    }
    if hyp.hfitz_distsq_ok == HfitzStatus::Unverified {
        eprintln!("warning: H_fitz cannot be verified for this penalty");
    }

    let x0 = cfg.start(pr.dim())?;
    let opts = cfg.integrate_options(Some(named.certificate.z.clone()));
    let tr = integrate(pr, &s, &x0, cfg.integrator.t_end, &opts)?;

    let csv_path = resolve(out_dir, cfg.outputs.trajectory_csv.as_ref(), "trajectory.csv");
    let mut w = create(&csv_path)?;
    tr.write_csv(&mut w)?;
    w.flush()?;
    println!("trajectory: {}", csv_path.display());

    let report_path = resolve(out_dir, cfg.outputs.report_json.as_ref(), "report.json");
    write_text(&report_path, &diagnostics(&named, &s, &tr)?.to_json())?;
    println!("report: {}", report_path.display());

    if let Some(d) = &cfg.discrete {
        let h = if d.use_h1 { 1.0 } else { cfg.integrator.h_max };
        let (lambdas, betas): (Vec<f64>, Vec<f64>) =
            (0..d.n).map(|n| (s.lambda(n as f64 * h), s.beta(n as f64 * h))).unzip();
        let discrete = iterate(pr, &lambdas, &betas, &vec![h; d.n], &x0, d.n)?;
        let path = resolve(out_dir, cfg.outputs.discrete_csv.as_ref(), "discrete.csv");
        let mut w = create(&path)?;
        discrete.write_csv(&mut w)?;
        w.flush()?;
        println!("discrete: {}", path.display());
    }
    Ok(Status::Ok)
}

pub fn check(config: &Path) -> Result<Status> {
    let cfg = load(config)?;
    let named = cfg.instance()?;
    let hyp = hypotheses(&cfg.schedule()?, &named.instance)?;
    println!("{}", serde_json::to_string_pretty(&hyp)?);
    Ok(if report_failures(&hyp) {
        Status::HypothesisFailure
    } else if hyp.hfitz_distsq_ok == HfitzStatus::Unverified {
        Status::Unverifiable
    } else {
        Status::Ok
    })
}

pub fn compare_discrete(config: &Path, out_dir: &Path, n: usize, lambda_shift: usize) -> Result<Status> {
    let cfg = load(config)?;
    let named = cfg.instance()?;
    let pr = &named.instance;
    let x0 = cfg.start(pr.dim())?;
    let cmp = compare_with_euler(pr, &cfg.schedule()?, &x0, n, lambda_shift)?;
    if let Some(p) = cfg.outputs.discrete_csv.as_ref() {
        let path = resolve(out_dir, Some(p), "discrete.csv");
        let mut w = create(&path)?;
        cmp.run.write_csv(&mut w)?;
        w.flush()?;
    }
    let summary = json!({
        "steps": cmp.steps,
        "max_discrepancy": cmp.max_discrepancy,
        "tolerance": cmp.tolerance,
        "passed": cmp.passed(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if cmp.passed() { Status::Ok } else { Status::Error })
}

pub fn diagnose(config: &Path, trajectory: &Path, out_dir: &Path) -> Result<Status> {
    let cfg = load(config)?;
    let named = cfg.instance()?;
    let s = cfg.schedule()?;
    let f = File::open(trajectory).with_context(|| format!("opening {}", trajectory.display()))?;
    let csv = read_trajectory_csv(BufReader::new(f))?;
    let tr = Trajectory::from_nodes(&named.instance, &s, csv.times, csv.states, Some(named.certificate.z.clone()))?;
    let json = diagnostics(&named, &s, &tr)?.to_json();
    if let Some(p) = cfg.outputs.report_json.as_ref() {
        write_text(&resolve(out_dir, Some(p), "report.json"), &json)?;
    }
    println!("{json}");
    Ok(Status::Ok)
}
