//! Batch command-line interface: a TOML config in, CSV/JSON (and optional
//! SVG) reports out.

pub mod config;
pub mod svg;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{tilde_recurrence_sandwich, CertifiedIfs};
use crate::recurrence::counterexample::{cond2_check, ConstructedRate, Count};
use crate::recurrence::experiment::run_experiment;
use crate::recurrence::rate::{threshold_real_dd, RateFunction, RateKind, ThresholdParams};
use crate::recurrence::series::{convergence_series_with, series_eps_for_threshold, LEVEL_CAP, SERIES_TOL};
use crate::sampling::{geometric_checkpoints, ks_distance_normal, sample_trial, stat_batch, write_stat_csv, SamplePlan};
use crate::thermo::{build_bernoulli, BernoulliSpec, GibbsModel};

use config::{load, LoadedConfig};
use svg::{line_plot, Series};

#[derive(Parser, Debug)]
#[command(
    name = "gibbsrec",
    version,
    about = "Quantitative recurrence experiments for Gibbs measures on shifts of finite type"
)]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// worker threads; results do not depend on it
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// output directory (default: `output.dir` or `out/` next to the config)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// also write SVG plots
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Model report: pressure, entropy, variance, constants, matrices
    Gibbs,
    /// Table of the two threshold rate functions
    Threshold,
    /// Convergence diagnostics of the recurrence series
    Series,
    /// Monte Carlo recurrence experiment
    Recur,
    /// The prescribed-preimage construction and its traces
    Counterexample,
    /// IFS certification and the recurrence sandwich
    Ifs,
    /// CLT and LIL statistics of sampled sequences
    Stats,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gibbs => "gibbs",
            Command::Threshold => "threshold",
            Command::Series => "series",
            Command::Recur => "recur",
            Command::Counterexample => "counterexample",
            Command::Ifs => "ifs",
            Command::Stats => "stats",
        }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config: &'a config::RunConfig,
    result: T,
}

struct Ctx {
    cfg: LoadedConfig,
    out: PathBuf,
    workers: usize,
    svg: bool,
    written: Vec<PathBuf>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        self.written.push(p);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, cmd: Command, result: T) -> Result<()> {
        let r = Report {
            command: cmd.name(),
            config: &self.cfg.config,
            result,
        };
        let mut s = serde_json::to_string_pretty(&r)?;
        s.push('\n');
        self.write_text(&format!("{}.json", cmd.name()), &s)
    }

    fn csv_writer(&mut self, name: &str) -> Result<csv::Writer<std::fs::File>> {
        let p = self.path(name);
        let w = csv::Writer::from_path(&p)?;
        self.written.push(p);
        Ok(w)
    }

    fn svg(&mut self, name: &str, body: String) -> Result<()> {
        if self.svg {
            self.write_text(name, &body)?;
        }
        Ok(())
    }
}

/// Run one command; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = load(path)?;
    let out = match (&cli.out, &cfg.config.output.dir) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => cfg.base.join("out"),
    };
    std::fs::create_dir_all(&out)?;
    let svg = cli.svg || cfg.config.output.svg;
    let mut ctx = Ctx {
        cfg,
        out,
        workers: cli.workers.max(1),
        svg,
        written: Vec::new(),
    };
    match cli.command {
        Command::Gibbs => cmd_gibbs(&mut ctx)?,
        Command::Threshold => cmd_threshold(&mut ctx)?,
        Command::Series => cmd_series(&mut ctx)?,
        Command::Recur => cmd_recur(&mut ctx)?,
        Command::Counterexample => cmd_counterexample(&mut ctx)?,
        Command::Ifs => cmd_ifs(&mut ctx)?,
        Command::Stats => cmd_stats(&mut ctx)?,
    }
    Ok(ctx.written)
}

/// Entry point for the binary: parses arguments, runs, and maps errors to
/// exit codes with a JSON reason line on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            let line = serde_json::json!({ "reason": e.reason(), "message": e.to_string() });
            eprintln!("{line}");
            e.exit_code()
        }
    }
}

#[derive(Serialize)]
struct GibbsResult {
    recoded: bool,
    #[serde(flatten)]
    report: crate::thermo::GibbsReport,
}

fn cmd_gibbs(ctx: &mut Ctx) -> Result<()> {
    let built = ctx.cfg.model()?;
    let report = built.model.report();
    let cohomologous = report.cohomologous;
    ctx.write_json(
        Command::Gibbs,
        GibbsResult {
            recoded: built.recoded,
            report,
        },
    )?;
    if cohomologous {
        return Err(Error::Cohomologous {
            variance: built.model.rho_mu,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct SpotCheck {
    n: u64,
    psi_minus: u64,
    psi_plus: u64,
    minus_real: f64,
    plus_real: f64,
}

fn cmd_threshold(ctx: &mut Ctx) -> Result<()> {
    let t = ctx
        .cfg
        .config
        .threshold
        .clone()
        .ok_or_else(|| Error::Config("missing [threshold] section".into()))?;
    let plus = RateFunction::plus(t.h, t.rho, t.eps)?;
    let minus = RateFunction::minus(t.h, t.rho, t.eps)?;
    let mut rows: Vec<u64> = (1..=t.n_max.unwrap_or(0)).collect();
    rows.extend(t.n.iter().copied());
    if rows.is_empty() {
        return Err(Error::Config("threshold: give n_max or n".into()));
    }
    let mut w = ctx.csv_writer("threshold.csv")?;
    w.write_record(["n", "psi_minus", "psi_plus"])?;
    let mut pts_m = Vec::new();
    let mut pts_p = Vec::new();
    for &n in &rows {
        let (m, p) = (minus.eval(n)?, plus.eval(n)?);
        w.write_record([n.to_string(), m.to_string(), p.to_string()])?;
        pts_m.push((n as f64, m as f64));
        pts_p.push((n as f64, p as f64));
    }
    w.flush()?;
    let params = ThresholdParams::new(t.h, t.rho, t.eps)?;
    let spot: Vec<SpotCheck> = t
        .n
        .iter()
        .map(|&n| {
            let mr = threshold_real_dd(n, &params, -1.0);
            let pr = threshold_real_dd(n, &params, 1.0);
            SpotCheck {
                n,
                psi_minus: mr.floor().to_f64() as u64,
                psi_plus: pr.floor().to_f64() as u64,
                minus_real: mr.to_f64(),
                plus_real: pr.to_f64(),
            }
        })
        .collect();
    ctx.write_json(Command::Threshold, serde_json::json!({ "rows": rows.len(), "high_precision": spot }))?;
    let plot = line_plot(
        "threshold rates",
        "n",
        "psi(n)",
        &[
            Series {
                label: "psi_minus".into(),
                points: pts_m,
            },
            Series {
                label: "psi_plus".into(),
                points: pts_p,
            },
        ],
        true,
    );
    ctx.svg("threshold.svg", plot)
}

/// `(h, rho)` from the rate section, else from the model.
fn entropy_variance(ctx: &Ctx, model: Option<&GibbsModel>) -> Result<(f64, f64)> {
    let rc = ctx.cfg.rate_config()?;
    match (rc.h, rc.rho, model) {
        (Some(h), Some(rho), _) => Ok((h, rho)),
        (h, rho, Some(m)) => Ok((h.unwrap_or(m.h_mu), rho.unwrap_or(m.rho_mu))),
        _ => Err(Error::Config("give rate.h and rate.rho or a [model] section".into())),
    }
}

fn optional_model(ctx: &Ctx) -> Result<Option<Arc<GibbsModel>>> {
    match &ctx.cfg.config.model {
        Some(m) => Ok(Some(m.build()?.model)),
        None => Ok(None),
    }
}

fn cmd_series(ctx: &mut Ctx) -> Result<()> {
    let sc = ctx
        .cfg
        .config
        .series
        .clone()
        .ok_or_else(|| Error::Config("missing [series] section".into()))?;
    let model = optional_model(ctx)?;
    let psi = ctx.cfg.rate(model.as_deref())?;
    let (h, rho) = entropy_variance(ctx, model.as_deref())?;
    let rate_eps = ctx.cfg.rate_config()?.eps;
    let eps = match (sc.eps, psi.kind(), rate_eps) {
        (Some(e), _, _) => e,
        (None, RateKind::Plus, Some(e)) => series_eps_for_threshold(e),
        (None, _, Some(e)) => e,
        (None, _, None) => return Err(Error::Config("series: give eps".into())),
    };
    let report = convergence_series_with(&psi, h, rho, eps, sc.n, sc.tolerance.unwrap_or(SERIES_TOL), LEVEL_CAP)?;
    let mut w = ctx.csv_writer("series.csv")?;
    w.write_record(["m", "partial_sum"])?;
    for (m, s) in &report.partial_sums {
        w.write_record([m.to_string(), s.to_string()])?;
    }
    w.flush()?;
    let plot = line_plot(
        "partial sums",
        "m",
        "S_m",
        &[Series {
            label: report.rate.clone(),
            points: report.partial_sums.iter().map(|&(m, s)| (m as f64, s)).collect(),
        }],
        true,
    );
    ctx.write_json(Command::Series, &report)?;
    ctx.svg("series.svg", plot)
}

fn cmd_recur(ctx: &mut Ctx) -> Result<()> {
    let model = ctx.cfg.model()?.model;
    let psi = ctx.cfg.rate(Some(&model))?;
    let e = ctx.cfg.experiment()?.clone();
    let windows = ctx.cfg.windows()?;
    let plan = SamplePlan::new(model, e.length, e.trials, ctx.cfg.config.seed)?;
    let s = run_experiment(&psi, &plan, &windows, ctx.workers)?;
    let mut w = ctx.csv_writer("recur_windows.csv")?;
    w.write_record(["lo", "hi", "trials_with_hit", "hit_fraction", "mean_events", "undecidable"])?;
    for ws in &s.windows {
        w.write_record([
            ws.lo.to_string(),
            ws.hi.to_string(),
            ws.trials_with_hit.to_string(),
            ws.hit_fraction.to_string(),
            ws.mean_events.to_string(),
            ws.undecidable.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = ctx.csv_writer("recur_trials.csv")?;
    w.write_record(["trial", "events", "undecidable", "last_event"])?;
    for t in &s.per_trial {
        w.write_record([
            t.trial.to_string(),
            t.events.to_string(),
            t.undecidable.to_string(),
            t.last_event.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let mut w = ctx.csv_writer("recur_histogram.csv")?;
    w.write_record(["events", "trials"])?;
    for (k, v) in &s.histogram {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    let plot = line_plot(
        "hit fraction by window",
        "window end",
        "fraction of trials",
        &[Series {
            label: s.rate.clone(),
            points: s.windows.iter().map(|w| (w.hi as f64, w.hit_fraction)).collect(),
        }],
        true,
    );
    ctx.write_json(
        Command::Recur,
        serde_json::json!({
            "rate": s.rate,
            "length": s.length,
            "trials": s.trials,
            "master_seed": s.master_seed,
            "mean_events": s.mean_events(),
            "windows": s.windows,
            "histogram": s.histogram,
        }),
    )?;
    ctx.svg("recur.svg", plot)
}

#[derive(Serialize)]
struct CountCheck {
    checked_up_to: u64,
    levels_checked: u64,
    mismatches: u64,
}

fn cmd_counterexample(ctx: &mut Ctx) -> Result<()> {
    let cc = ctx
        .cfg
        .config
        .counterexample
        .clone()
        .ok_or_else(|| Error::Config("missing [counterexample] section".into()))?;
    let (h, rho) = match (cc.h, cc.rho) {
        (Some(h), Some(rho)) => (h, rho),
        (h, rho) => {
            let m = ctx.cfg.model()?.model;
            (h.unwrap_or(m.h_mu), rho.unwrap_or(m.rho_mu))
        }
    };
    let c = Arc::new(ConstructedRate::build(cc.g, h, rho, cc.horizon)?);
    // direct count of psi over its exact range
    let top = c.max_argument().min(cc.count_check);
    let mut counts = vec![0u64; c.exact_levels() as usize + 2];
    for m in 1..=top {
        counts[c.psi(m)? as usize] += 1;
    }
    let (mut levels_checked, mut mismatches) = (0, 0);
    for n in 1..=c.exact_levels() {
        if c.prefix_sum(n + 1).is_some_and(|s| s <= top) {
            levels_checked += 1;
            if Count::Exact(counts[n as usize]) != c.count(n)? {
                mismatches += 1;
            }
        }
    }
    let mut w = ctx.csv_writer("counterexample_levels.csv")?;
    w.write_record(["n", "a_n", "prefix_sum", "in_g", "certified"])?;
    for n in 1..=c.exact_levels() {
        let Count::Exact(a) = c.count(n)? else { unreachable!() };
        w.write_record([
            n.to_string(),
            a.to_string(),
            c.prefix_sum(n).unwrap_or(0).to_string(),
            c.is_in_g(n).to_string(),
            c.level_certified(n).unwrap_or(false).to_string(),
        ])?;
    }
    w.flush()?;
    let trace = c.divergence_trace();
    let mut w = ctx.csv_writer("counterexample_trace.csv")?;
    w.write_record(["k", "n_k", "term", "running_sum", "exact"])?;
    for t in &trace {
        w.write_record([
            t.k.to_string(),
            t.n_k.to_string(),
            t.term.to_string(),
            t.running_sum.to_string(),
            t.exact.to_string(),
        ])?;
    }
    w.flush()?;
    let nk: Vec<u64> = c.g_set.iter().filter_map(|e| e.n).collect();
    let psi = RateFunction::constructed(c.clone());
    let cond2 = cond2_check(&psi, &nk, &cc.g, h, rho, cc.escape, 0)?;
    let plot = line_plot(
        "divergence trace along n_k",
        "k",
        "running sum",
        &[Series {
            label: "running sum".into(),
            points: trace.iter().map(|t| (t.k as f64, t.running_sum)).collect(),
        }],
        false,
    );
    ctx.write_json(
        Command::Counterexample,
        serde_json::json!({
            "h": h,
            "rho": rho,
            "exact_levels": c.exact_levels(),
            "max_argument": c.max_argument(),
            "initial_segment_end": c.initial_segment_end(),
            "all_certified": c.all_certified(),
            "g_set": c.g_set,
            "count_check": CountCheck { checked_up_to: top, levels_checked, mismatches },
            "boundary_check": c.verify_inversion().map_or_else(
                |n| serde_json::json!({ "verified": false, "failed_level": n }),
                |n| serde_json::json!({ "verified": true, "levels": n }),
            ),
            "divergence_trace": trace,
            "cond2": cond2,
        }),
    )?;
    ctx.svg("counterexample.svg", plot)
}

#[derive(Serialize)]
struct WordSummary {
    word: usize,
    certified: usize,
    possible: usize,
    included: bool,
    numeric_ok: bool,
}

fn cmd_ifs(ctx: &mut Ctx) -> Result<()> {
    let (spec, ic) = ctx.cfg.ifs_spec()?;
    let ic = ic.clone();
    let ifs = CertifiedIfs::certify(spec, ic.depth)?;
    let model = match optional_model(ctx)? {
        Some(m) => m,
        None => {
            let k = ifs.k();
            Arc::new(build_bernoulli(&BernoulliSpec::new(vec![1.0 / k as f64; k])?)?)
        }
    };
    if model.k() != ifs.k() || !model.sft.is_full_shift() {
        return Err(Error::Config("ifs: the model must be a full shift on one symbol per map".into()));
    }
    let psi = ctx.cfg.rate(Some(&model))?;
    let seed = ctx.cfg.config.seed;
    let words = ic.words.max(1);
    let reports = crate::sampling::par_trials(ctx.workers, words, |t| {
        let w = sample_trial(&model, ic.length, seed, t as u64)?;
        tilde_recurrence_sandwich(&w, &psi, &ifs, ic.lo, ic.hi)
    })?;
    let mut w = ctx.csv_writer("sandwich.csv")?;
    w.write_record(["word", "n", "required", "certified", "possible", "distance", "allowance"])?;
    let flag = |e: crate::recurrence::EventStatus| match e {
        crate::recurrence::EventStatus::Satisfied => "1",
        crate::recurrence::EventStatus::NotSatisfied => "0",
        crate::recurrence::EventStatus::Undecidable => "undecidable",
    };
    for (i, rep) in reports.iter().enumerate() {
        for r in &rep.rows {
            w.write_record([
                i.to_string(),
                r.n.to_string(),
                r.required.to_string(),
                flag(r.certified).to_string(),
                flag(r.possible).to_string(),
                r.distance.map(|d| d.to_string()).unwrap_or_default(),
                r.allowance.map(|d| d.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    let summaries: Vec<WordSummary> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| WordSummary {
            word: i,
            certified: r.certified_events().len(),
            possible: r.possible_events().len(),
            included: r.included,
            numeric_ok: r.numeric_ok,
        })
        .collect();
    let plot = line_plot(
        "sandwich event counts per word",
        "word",
        "events",
        &[
            Series {
                label: "certified".into(),
                points: summaries.iter().map(|s| (s.word as f64, s.certified as f64)).collect(),
            },
            Series {
                label: "possible".into(),
                points: summaries.iter().map(|s| (s.word as f64, s.possible as f64)).collect(),
            },
        ],
        false,
    );
    ctx.write_json(
        Command::Ifs,
        serde_json::json!({
            "geometry": ifs,
            "n_valid": ifs.n_is_valid(),
            "rate": psi.describe(),
            "all_included": summaries.iter().all(|s| s.included),
            "all_numeric_ok": summaries.iter().all(|s| s.numeric_ok),
            "words": summaries,
        }),
    )?;
    ctx.svg("ifs.svg", plot)
}

fn cmd_stats(ctx: &mut Ctx) -> Result<()> {
    let sc = ctx
        .cfg
        .config
        .stats
        .clone()
        .ok_or_else(|| Error::Config("missing [stats] section".into()))?;
    let model = ctx.cfg.model()?.model;
    let plan = SamplePlan::new(model, sc.length, sc.trials, ctx.cfg.config.seed)?;
    let cps = if sc.checkpoints.is_empty() {
        geometric_checkpoints(sc.length)
    } else {
        sc.checkpoints.clone()
    };
    let series = stat_batch(&plan, &cps, ctx.workers)?;
    let path = ctx.path("stats.csv");
    write_stat_csv(&series, std::fs::File::create(&path)?)?;
    ctx.written.push(path);
    let last = cps.len() - 1;
    let clt_last: Vec<f64> = series.iter().map(|s| s.clt[last]).collect();
    let ks = ks_distance_normal(&clt_last)?;
    let plot = line_plot(
        "CLT statistic",
        "n",
        "clt_stat",
        &series
            .iter()
            .take(6)
            .map(|s| Series {
                label: format!("trial {}", s.trial),
                points: s.checkpoints.iter().zip(&s.clt).map(|(&n, &v)| (n as f64, v)).collect(),
            })
            .collect::<Vec<_>>(),
        true,
    );
    ctx.write_json(
        Command::Stats,
        serde_json::json!({
            "checkpoints": cps,
            "ks_distance_at_last_checkpoint": ks,
        }),
    )?;
    ctx.svg("stats.svg", plot)
}

/// Default location of the bundled fixtures.
pub fn fixtures_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}
