//! The four subcommands. Work is split into cells, one per (metric, p), which
//! run on a bounded pool and write only their own files; the summary is
//! assembled afterwards in cell order.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use pgreen_core::geometry::PParam;
use pgreen_core::green::{asymptotics_check, level_grid, solve_green, GreenProfile};
use pgreen_core::monotonicity::{
    rigidity_diagnostics, CheckContext, ClaimId, ClaimRegistry, MonotonicityReport, Status,
};
use pgreen_core::regularized::{
    almost_monotonicity_study, convergence_study, cross_validate, kato_check, AnnulusProblem, SolverRegistry,
};
use pgreen_core::table::fmt_float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Green,
    Regularize,
    Check,
    Sweep,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Green => "green",
            Command::Regularize => "regularize",
            Command::Check => "check",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub tol_scale: f64,
    /// Worker count; rayon's default when `None`.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub metric: String,
    pub p: f64,
    pub check: String,
    pub status: String,
    pub worst_margin: Option<f64>,
    pub violations: usize,
    pub line: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageError {
    pub metric: String,
    pub p: f64,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub config: String,
    pub seed: u64,
    pub tol_scale: f64,
    pub entries: Vec<SummaryEntry>,
    pub errors: Vec<StageError>,
    pub exit_code: i32,
}

impl Summary {
    /// One line per entry and per error.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.iter().map(|e| e.line.clone()).collect();
        for e in &self.errors {
            out.push(format!("error {} p={} [{}]: {}", e.metric, fmt_float(e.p), e.stage, e.message));
        }
        out
    }
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, Default)]
struct SweepRow {
    metric: String,
    p: f64,
    eps: Option<f64>,
    claim: String,
    status: String,
    worst_margin: Option<f64>,
    violations: Option<usize>,
    c0_error: Option<f64>,
    c1_error: Option<f64>,
    flux_spread: Option<f64>,
    kato_samples: Option<usize>,
    kato_violations: Option<usize>,
    error: String,
}

const SWEEP_HEADER: &str =
    "metric_id,p,eps,claim,status,worst_margin,violations,c0_error,c1_error,flux_spread,kato_samples,kato_violations,error";

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn opt_u(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepRow {
    fn to_csv(&self) -> String {
        [
            csv_text(&self.metric),
            fmt_float(self.p),
            opt_f(self.eps),
            self.claim.clone(),
            self.status.clone(),
            opt_f(self.worst_margin),
            opt_u(self.violations),
            opt_f(self.c0_error),
            opt_f(self.c1_error),
            opt_f(self.flux_spread),
            opt_u(self.kato_samples),
            opt_u(self.kato_violations),
            csv_text(&self.error),
        ]
        .join(",")
    }
}

#[derive(Debug, Default)]
struct CellOutput {
    entries: Vec<SummaryEntry>,
    errors: Vec<StageError>,
    rows: Vec<SweepRow>,
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    opts: &'a RunOptions,
    index: usize,
    metric_index: usize,
    p: f64,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-._".contains(c) { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
        writeln!(w)
    })
}

/// Log-spaced levels, each interior level shifted by a seeded random
/// fraction of the spacing.
pub fn jittered_levels(range: (f64, f64), count: usize, margin: f64, jitter: f64, seed: u64) -> pgreen_core::Result<Vec<f64>> {
    let mut levels = level_grid(range, count, margin)?;
    if jitter > 0.0 {
        let step = (levels[count - 1] / levels[0]).ln() / (count - 1) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in levels.iter_mut().take(count - 1).skip(1) {
            let shift: f64 = rng.random_range(-jitter..=jitter);
            *t *= (shift * step).exp();
        }
    }
    Ok(levels)
}

impl Cell<'_> {
    fn metric_id(&self) -> String {
        self.cfg.metrics[self.metric_index].id()
    }

    fn tag(&self) -> String {
        format!("{}_p{}", sanitize(&self.metric_id()), fmt_float(self.p))
    }

    fn path(&self, name: String) -> PathBuf {
        self.opts.out.join(name)
    }

    fn error(&self, out: &mut CellOutput, stage: &str, message: String) {
        out.errors.push(StageError {
            metric: self.metric_id(),
            p: self.p,
            stage: stage.to_string(),
            message,
        });
    }

    fn levels(&self, profile: &GreenProfile) -> pgreen_core::Result<Vec<f64>> {
        let spec = self.cfg.levels;
        // Each cell gets its own stream so results do not depend on scheduling.
        let seed = self.opts.seed ^ (self.index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        jittered_levels(profile.level_range(), spec.count, spec.margin, spec.jitter, seed)
    }

    fn green(&self, out: &mut CellOutput) -> Option<GreenProfile> {
        let metric = match self.cfg.metrics[self.metric_index].build() {
            Ok(m) => m,
            Err(e) => {
                self.error(out, "metric", e.to_string());
                return None;
            }
        };
        let p = PParam::new(self.p, self.cfg.smooth_override).expect("validated with the config");
        match solve_green(&metric, p, self.cfg.grid.into()) {
            Ok(g) => Some(g),
            Err(e) => {
                self.error(out, "green", e.to_string());
                None
            }
        }
    }

    fn run_green(&self, out: &mut CellOutput) -> Option<GreenProfile> {
        let g = self.green(out)?;
        let tag = self.tag();
        if let Err(e) = write_file(&self.path(format!("green_{tag}.csv")), |w| g.write_csv(w)) {
            self.error(out, "output", e);
        }
        match self.levels(&g) {
            Ok(levels) => {
                let res = write_file(&self.path(format!("levels_{tag}.csv")), |w| {
                    writeln!(w, "t,r_t,F,F_closed_form,area,flux,M")?;
                    for &t in &levels {
                        let lf = g.level_functionals(t).map_err(io::Error::other)?;
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{}",
                            fmt_float(lf.t),
                            fmt_float(lf.r_t),
                            fmt_float(lf.f),
                            fmt_float(lf.f_closed_form),
                            fmt_float(lf.area),
                            fmt_float(lf.flux),
                            fmt_float(lf.monotone_quantity)
                        )?;
                    }
                    Ok(())
                });
                if let Err(e) = res {
                    self.error(out, "levels", e);
                }
            }
            Err(e) => self.error(out, "levels", e.to_string()),
        }
        match asymptotics_check(&g) {
            Ok(table) => {
                let res = write_file(&self.path(format!("asymptotics_{tag}.csv")), |w| {
                    writeln!(w, "r,value_dev,gradient_dev,hessian_dev")?;
                    for row in &table.rows {
                        writeln!(
                            w,
                            "{},{},{},{}",
                            fmt_float(row.r),
                            fmt_float(row.value_dev),
                            fmt_float(row.gradient_dev),
                            fmt_float(row.hessian_dev)
                        )?;
                    }
                    Ok(())
                });
                if let Err(e) = res {
                    self.error(out, "asymptotics", e);
                }
            }
            Err(e) => self.error(out, "asymptotics", e.to_string()),
        }
        Some(g)
    }

    fn entry_for(&self, report: &MonotonicityReport, file: String) -> SummaryEntry {
        let status = report.status.as_str();
        let line = match (&report.status, &report.note) {
            (Status::Recorded, _) => format!(
                "{} {} p={}: out-of-hypothesis: recorded only (worst margin {})",
                report.claim,
                self.metric_id(),
                fmt_float(self.p),
                fmt_float(report.worst_margin)
            ),
            (_, Some(note)) => format!(
                "{} {} p={}: {status} (worst margin {}; {note})",
                report.claim,
                self.metric_id(),
                fmt_float(self.p),
                fmt_float(report.worst_margin)
            ),
            (_, None) => format!(
                "{} {} p={}: {status} (worst margin {})",
                report.claim,
                self.metric_id(),
                fmt_float(self.p),
                fmt_float(report.worst_margin)
            ),
        };
        SummaryEntry {
            metric: self.metric_id(),
            p: self.p,
            check: report.claim.to_string(),
            status: status.to_string(),
            worst_margin: Some(report.worst_margin),
            violations: report.violations.len(),
            line,
            report: Some(file),
        }
    }

    fn run_claims(&self, g: &GreenProfile, out: &mut CellOutput) {
        if self.cfg.claims.is_empty() {
            return;
        }
        let fail_all = |out: &mut CellOutput, stage: &str, msg: String| {
            self.error(out, stage, msg.clone());
            for &claim in &self.cfg.claims {
                out.rows.push(SweepRow {
                    metric: self.metric_id(),
                    p: self.p,
                    claim: claim.to_string(),
                    status: "error".into(),
                    error: msg.clone(),
                    ..Default::default()
                });
            }
        };
        let tolerances = self.cfg.tolerances.scaled(self.opts.tol_scale);
        let ctx = match CheckContext::for_profile(g, tolerances) {
            Ok(c) => c,
            Err(e) => return fail_all(out, "certify", e.to_string()),
        };
        let ctx = match self.cfg.lambda_beta(self.p) {
            Ok(lb) => ctx.with_lambda_beta(lb),
            Err(e) => return fail_all(out, "lambda_beta", e.to_string()),
        };
        let levels = match self.levels(g) {
            Ok(l) => l,
            Err(e) => return fail_all(out, "levels", e.to_string()),
        };
        let registry = ClaimRegistry::builtin();
        let tag = self.tag();
        for &claim in &self.cfg.claims {
            match registry.check(claim, g, &levels, &ctx) {
                Ok(report) => {
                    let file = format!("{claim}_{tag}.report.json");
                    if let Err(e) = write_json(&self.path(file.clone()), &report) {
                        self.error(out, "output", e);
                    }
                    out.entries.push(self.entry_for(&report, file));
                    out.rows.push(SweepRow {
                        metric: self.metric_id(),
                        p: self.p,
                        claim: claim.to_string(),
                        status: report.status.as_str().into(),
                        worst_margin: Some(report.worst_margin),
                        violations: Some(report.violations.len()),
                        ..Default::default()
                    });
                    if claim == ClaimId::Rigid {
                        self.write_rigidity(g, &levels, &ctx, out);
                    }
                }
                Err(e) => {
                    self.error(out, &format!("check:{claim}"), e.to_string());
                    out.rows.push(SweepRow {
                        metric: self.metric_id(),
                        p: self.p,
                        claim: claim.to_string(),
                        status: "error".into(),
                        error: e.to_string(),
                        ..Default::default()
                    });
                }
            }
        }
    }

    fn write_rigidity(&self, g: &GreenProfile, levels: &[f64], ctx: &CheckContext, out: &mut CellOutput) {
        let res = rigidity_diagnostics(g, levels, ctx).map_err(|e| e.to_string()).and_then(|rig| {
            write_file(&self.path(format!("rigidity_{}.csv", self.tag())), |w| {
                writeln!(w, "t,r_t,gradient_ratio,hessian_ratio,area_ratio,log_slope,q_hessian_rad,q_hessian_tan")?;
                for row in &rig.levels {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        fmt_float(row.t),
                        fmt_float(row.r_t),
                        fmt_float(row.gradient_ratio),
                        fmt_float(row.hessian_ratio),
                        fmt_float(row.area_ratio),
                        fmt_float(row.log_slope),
                        fmt_float(row.q_hessian[0]),
                        fmt_float(row.q_hessian[1])
                    )?;
                }
                Ok(())
            })
        });
        if let Err(e) = res {
            self.error(out, "rigidity", e);
        }
    }

    /// Convergence table over the ε schedule, with Kato counts per ε.
    fn run_convergence(&self, g: &GreenProfile, out: &mut CellOutput) {
        if self.cfg.eps.is_empty() {
            return;
        }
        let [r_a, r_b] = self.cfg.annulus;
        let mut schedule = self.cfg.eps.clone();
        schedule.sort_by(|a, b| b.total_cmp(a));
        schedule.dedup();
        let table = match convergence_study(g.metric(), g.p(), &schedule, (r_a, r_b)) {
            Ok(t) => t,
            Err(e) => {
                self.error(out, "convergence", e.to_string());
                for &eps in &schedule {
                    out.rows.push(SweepRow {
                        metric: self.metric_id(),
                        p: self.p,
                        eps: Some(eps),
                        status: "error".into(),
                        error: e.to_string(),
                        ..Default::default()
                    });
                }
                return;
            }
        };
        let res = write_file(&self.path(format!("convergence_{}.csv", self.tag())), |w| {
            writeln!(w, "eps,c0_error,c1_error,c_flux,flux_spread")?;
            for row in &table.rows {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_float(row.eps),
                    fmt_float(row.c0_error),
                    fmt_float(row.c1_error),
                    fmt_float(row.c_flux),
                    fmt_float(row.flux_spread)
                )?;
            }
            Ok(())
        });
        if let Err(e) = res {
            self.error(out, "output", e);
        }
        for row in &table.rows {
            let kato = self.kato_counts(g, row.eps);
            let (kato_samples, kato_violations, error) = match kato {
                Ok((n, v)) => (Some(n), Some(v), String::new()),
                Err(e) => {
                    self.error(out, "kato", e.clone());
                    (None, None, e)
                }
            };
            let status = match kato_violations {
                Some(0) => "pass",
                Some(_) => "fail",
                None => "error",
            };
            out.rows.push(SweepRow {
                metric: self.metric_id(),
                p: self.p,
                eps: Some(row.eps),
                claim: String::new(),
                status: status.into(),
                c0_error: Some(row.c0_error),
                c1_error: Some(row.c1_error),
                flux_spread: Some(row.flux_spread),
                kato_samples,
                kato_violations,
                error,
                ..Default::default()
            });
        }
    }

    fn kato_counts(&self, g: &GreenProfile, eps: f64) -> Result<(usize, usize), String> {
        let [r_a, r_b] = self.cfg.annulus;
        let problem = AnnulusProblem::from_green(g, eps, r_a, r_b).map_err(|e| e.to_string())?;
        let solver = SolverRegistry::builtin().get(&self.cfg.solver.name).map_err(|e| e.to_string())?;
        let prof = solver.solve(&problem, self.cfg.solver.resolution).map_err(|e| e.to_string())?;
        let samples = kato_check(&prof, prof.slope_radii()).map_err(|e| e.to_string())?;
        Ok((samples.len(), samples.iter().filter(|s| s.violated()).count()))
    }

    fn run_regularize(&self, g: &GreenProfile, out: &mut CellOutput) {
        let [r_a, r_b] = self.cfg.annulus;
        let tag = self.tag();
        let solver = match SolverRegistry::builtin().get(&self.cfg.solver.name) {
            Ok(s) => s,
            Err(e) => return self.error(out, "solver", e.to_string()),
        };
        let lb = match self.cfg.lambda_beta(self.p) {
            Ok(lb) => lb,
            Err(e) => return self.error(out, "lambda_beta", e.to_string()),
        };
        let mut schedule = self.cfg.eps.clone();
        schedule.sort_by(|a, b| b.total_cmp(a));
        schedule.dedup();
        let mut kato_total = 0usize;
        let mut kato_bad = 0usize;
        for &eps in &schedule {
            let stage = format!("regularize:eps={}", fmt_float(eps));
            let prof = match AnnulusProblem::from_green(g, eps, r_a, r_b)
                .and_then(|prob| solver.solve(&prob, self.cfg.solver.resolution))
            {
                Ok(p) => p,
                Err(e) => {
                    self.error(out, &stage, e.to_string());
                    continue;
                }
            };
            if let Err(e) = write_file(&self.path(format!("regularized_{tag}_eps{}.csv", fmt_float(eps))), |w| {
                prof.write_csv(w)
            }) {
                self.error(out, "output", e);
            }
            match kato_check(&prof, prof.slope_radii()) {
                Ok(samples) => {
                    kato_total += samples.len();
                    kato_bad += samples.iter().filter(|s| s.violated()).count();
                }
                Err(e) => self.error(out, &stage, e.to_string()),
            }
        }
        if !schedule.is_empty() {
            let tol = self.cfg.tolerances.scaled(self.opts.tol_scale).margin;
            match almost_monotonicity_study(g.metric(), g.p(), &schedule, (r_a, r_b), (lb.lambda, lb.beta), tol) {
                Ok(table) => {
                    let res = write_file(&self.path(format!("almost_{tag}.csv")), |w| {
                        writeln!(w, "eps,excess,raw_excess,max_abs_e,term_scale,pairs")?;
                        for row in &table.rows {
                            writeln!(
                                w,
                                "{},{},{},{},{},{}",
                                fmt_float(row.eps),
                                fmt_float(row.excess),
                                fmt_float(row.raw_excess),
                                fmt_float(row.max_abs_e),
                                fmt_float(row.term_scale),
                                row.pairs
                            )?;
                        }
                        Ok(())
                    });
                    if let Err(e) = res {
                        self.error(out, "output", e);
                    }
                }
                Err(e) => self.error(out, "almost_monotonicity", e.to_string()),
            }
        }
        if !schedule.is_empty() {
            let status = if kato_bad == 0 { "pass" } else { "fail" };
            out.entries.push(SummaryEntry {
                metric: self.metric_id(),
                p: self.p,
                check: "kato".into(),
                status: status.into(),
                worst_margin: None,
                violations: kato_bad,
                line: format!(
                    "kato {} p={}: {status} ({kato_bad} violations in {kato_total} samples)",
                    self.metric_id(),
                    fmt_float(self.p)
                ),
                report: None,
            });
        }
        self.run_convergence(g, out);

        if !self.cfg.solver.cross_validation.is_empty() {
            let res = schedule
                .iter()
                .map(|&eps| {
                    let prob = AnnulusProblem::from_green(g, eps, r_a, r_b)?;
                    Ok((eps, cross_validate(&prob, &self.cfg.solver.cross_validation)?))
                })
                .collect::<pgreen_core::Result<Vec<_>>>();
            match res {
                Ok(tables) => {
                    let res = write_file(&self.path(format!("crossval_{tag}.csv")), |w| {
                        writeln!(w, "eps,n_cells,gap,ratio")?;
                        for (eps, cv) in &tables {
                            for (k, &(n, gap)) in cv.rows.iter().enumerate() {
                                let ratio = if k == 0 { None } else { Some(cv.ratios[k - 1]) };
                                writeln!(w, "{},{n},{},{}", fmt_float(*eps), fmt_float(gap), opt_f(ratio))?;
                            }
                        }
                        Ok(())
                    });
                    if let Err(e) = res {
                        self.error(out, "output", e);
                    }
                }
                Err(e) => self.error(out, "cross_validation", e.to_string()),
            }
        }
    }

    fn run(&self, command: Command) -> CellOutput {
        let mut out = CellOutput::default();
        match command {
            Command::Green => {
                self.run_green(&mut out);
            }
            Command::Regularize => {
                if let Some(g) = self.green(&mut out) {
                    self.run_regularize(&g, &mut out);
                }
            }
            Command::Check => {
                if let Some(g) = self.green(&mut out) {
                    self.run_claims(&g, &mut out);
                }
            }
            Command::Sweep => match self.run_green(&mut out) {
                Some(g) => {
                    self.run_claims(&g, &mut out);
                    self.run_convergence(&g, &mut out);
                }
                None => {
                    let msg = out.errors.last().map(|e| e.message.clone()).unwrap_or_default();
                    let claims: Vec<String> = if self.cfg.claims.is_empty() {
                        vec![String::new()]
                    } else {
                        self.cfg.claims.iter().map(|c| c.to_string()).collect()
                    };
                    for claim in claims {
                        out.rows.push(SweepRow {
                            metric: self.metric_id(),
                            p: self.p,
                            claim,
                            status: "error".into(),
                            error: msg.clone(),
                            ..Default::default()
                        });
                    }
                }
            },
        }
        out
    }
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

/// Run a subcommand; files go to `opts.out`, which is created if needed.
pub fn run(command: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Summary, String> {
    fs::create_dir_all(&opts.out).map_err(|e| format!("{}: {e}", opts.out.display()))?;
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(format!("--tol-scale must be positive and finite, got {}", opts.tol_scale));
    }
    let cells: Vec<Cell> = (0..cfg.metrics.len())
        .flat_map(|m| cfg.p.iter().map(move |&p| (m, p)))
        .enumerate()
        .map(|(index, (metric_index, p))| Cell {
            cfg,
            opts,
            index,
            metric_index,
            p,
        })
        .collect();
    let pool = build_pool(opts.workers)?;
    let outputs: Vec<CellOutput> = pool.install(|| cells.par_iter().map(|c| c.run(command)).collect());

    let mut entries = Vec::new();
    let mut errors = Vec::new();
    let mut rows = Vec::new();
    for o in outputs {
        entries.extend(o.entries);
        errors.extend(o.errors);
        rows.extend(o.rows);
    }
    if command == Command::Sweep {
        write_file(&opts.out.join("sweep.csv"), |w| {
            writeln!(w, "{SWEEP_HEADER}")?;
            for row in &rows {
                writeln!(w, "{}", row.to_csv())?;
            }
            Ok(())
        })?;
    }
    let failed = entries.iter().any(|e| e.status == Status::Fail.as_str());
    let exit_code = if failed || !errors.is_empty() { 1 } else { 0 };
    let summary = Summary {
        command: command.as_str().to_string(),
        config: cfg.name.clone(),
        seed: opts.seed,
        tol_scale: opts.tol_scale,
        entries,
        errors,
        exit_code,
    };
    write_json(&opts.out.join("summary.json"), &summary)?;
    Ok(summary)
}
