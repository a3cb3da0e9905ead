//! Command-line front end: experiment selection or custom model files,
//! scheme sweeps, CSV / plot-data emission and a line-oriented summary
//! report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;

use crate::diagnostics::{
    classify_pair, extract_traces, interior_entropy_residual, Classification,
};
use crate::error::{Error, Result};
use crate::flux_models::{FluidParams, FluxFunction, MobilityCurve, RockModel};
use crate::numerical_fluxes::Scheme;
use crate::reference::{
    self, entropy_interface_traces, fine_mesh_oracle, l1_distance, ExperimentSpec, Profile,
};
use crate::solver::{self, PiecewiseConstant, RunResult, SchemeConfig};

/// Format with 12 significant digits in plain decimal, trailing zeros
/// trimmed. Deterministic, so identical configs yield byte-identical files.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let prec = (11 - exp).clamp(0, 17) as usize;
    let s = format!("{v:.prec$}");
    let trimmed = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        &s
    };
    trimmed.to_string()
}

#[derive(Parser, Debug)]
#[command(
    name = "heteroflux",
    about = "Finite volume schemes for two-phase flow across a rock-type interface"
)]
struct Cli {
    /// Benchmark experiment id (1-5); omit when using --model.
    #[arg(long)]
    experiment: Option<u8>,

    /// Custom model file ("section.key = value" format).
    #[arg(long)]
    model: Option<PathBuf>,

    /// Comma-separated scheme list out of ers,um,av.
    #[arg(long, default_value = "ers,um,av")]
    scheme: String,

    /// Mesh width (default: experiment registry value).
    #[arg(long)]
    h: Option<f64>,

    /// CFL ratio dt/h (default: experiment registry value).
    #[arg(long)]
    lambda: Option<f64>,

    /// Final time (default: last registry snapshot time).
    #[arg(long)]
    t: Option<f64>,

    /// Extra snapshot times, comma-separated.
    #[arg(long)]
    snapshots: Option<String>,

    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,

    /// Skip the fine-mesh oracle column and oracle-based report fields.
    #[arg(long)]
    no_oracle: bool,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub spec: ExperimentSpec,
    pub schemes: Vec<Scheme>,
    pub h: f64,
    pub lambda: f64,
    pub snapshot_times: Vec<f64>,
    pub out_dir: PathBuf,
    pub with_oracle: bool,
}

/// Parse CLI arguments (or a custom model file) into a validated config.
pub fn parse_config<I, T>(args: I) -> Result<CliConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::config(e.to_string()))?;

    let mut schemes = Vec::new();
    for part in cli.scheme.split(',').filter(|p| !p.trim().is_empty()) {
        let s = Scheme::parse(part)
            .ok_or_else(|| Error::config(format!("unknown scheme '{part}' (ers, um, av)")))?;
        if !schemes.contains(&s) {
            schemes.push(s);
        }
    }

    let mut spec = match (&cli.experiment, &cli.model) {
        (Some(id), None) => reference::experiment(*id)?,
        (None, Some(path)) => parse_model_file(path)?,
        (Some(_), Some(_)) => {
            return Err(Error::config("--experiment and --model are mutually exclusive"))
        }
        (None, None) => return Err(Error::config("one of --experiment or --model is required")),
    };
    // a custom model has no registry oracle
    let with_oracle = !cli.no_oracle && spec.id != 0;

    let h = cli.h.unwrap_or(spec.default_h);
    if !(h > 0.0) {
        return Err(Error::config(format!("mesh width must be > 0, got {h}")));
    }
    let lambda = cli.lambda.unwrap_or(spec.lambda);
    if !(lambda > 0.0) {
        return Err(Error::config(format!("lambda must be > 0, got {lambda}")));
    }
    spec.lambda = lambda;

    let mut times: Vec<f64> = Vec::new();
    if let Some(list) = &cli.snapshots {
        for part in list.split(',').filter(|p| !p.trim().is_empty()) {
            let t: f64 = part
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad snapshot time '{part}'")))?;
            times.push(t);
        }
    }
    if let Some(t) = cli.t {
        times.push(t);
    }
    if times.is_empty() {
        times = spec.snapshot_times.clone();
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if times.iter().any(|t| *t < 0.0) {
        return Err(Error::config("snapshot times must be >= 0"));
    }

    // CFL pre-check: reject before any stepping, naming the scheme and M
    for &scheme in &schemes {
        let m = solver::compute_cfl_constant(&spec.flux_set(scheme), 100)?;
        if lambda * m > 1.0 {
            return Err(Error::CflViolation {
                scheme: scheme.name().to_string(),
                lambda,
                m,
                max_lambda: 1.0 / m,
            });
        }
    }

    Ok(CliConfig {
        spec,
        schemes,
        h,
        lambda,
        snapshot_times: times,
        out_dir: cli.out,
        with_oracle,
    })
}

fn parse_f64(line_no: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::config_at(line_no, format!("expected a number, got '{s}'")))
}

fn parse_curve(line_no: usize, value: &str) -> Result<MobilityCurve> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    match tokens.first() {
        Some(&"power") => {
            if tokens.len() < 3 {
                return Err(Error::config_at(line_no, "power needs: power <coeff> <exponent> [decreasing]"));
            }
            let coeff = parse_f64(line_no, tokens[1])?;
            let exponent = parse_f64(line_no, tokens[2])?;
            match tokens.get(3) {
                None => Ok(MobilityCurve::power(coeff, exponent)),
                Some(&"decreasing") => Ok(MobilityCurve::power_decreasing(coeff, exponent)),
                Some(other) => {
                    Err(Error::config_at(line_no, format!("unexpected token '{other}'")))
                }
            }
        }
        Some(&"piecewise") => {
            let mut points = Vec::new();
            for tok in &tokens[1..] {
                let inner = tok
                    .strip_prefix('(')
                    .and_then(|t| t.strip_suffix(')'))
                    .ok_or_else(|| {
                        Error::config_at(line_no, format!("expected (s,value) pair, got '{tok}'"))
                    })?;
                let (a, b) = inner.split_once(',').ok_or_else(|| {
                    Error::config_at(line_no, format!("expected (s,value) pair, got '{tok}'"))
                })?;
                points.push((parse_f64(line_no, a)?, parse_f64(line_no, b)?));
            }
            if points.len() < 2 {
                return Err(Error::config_at(line_no, "piecewise needs at least two points"));
            }
            Ok(MobilityCurve::piecewise_linear(points))
        }
        Some(&"poly") => {
            let coeffs: Result<Vec<f64>> =
                tokens[1..].iter().map(|t| parse_f64(line_no, t)).collect();
            let coeffs = coeffs?;
            if coeffs.is_empty() {
                return Err(Error::config_at(line_no, "poly needs at least one coefficient"));
            }
            Ok(MobilityCurve::poly(coeffs))
        }
        _ => Err(Error::config_at(
            line_no,
            format!("unknown curve kind in '{value}' (power | piecewise | poly)"),
        )),
    }
}

/// Parse the line-oriented "section.key = value" model format into a custom
/// ExperimentSpec (id 0). See the README for the grammar.
pub fn parse_model_file(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config_at(line_no, format!("expected 'section.key = value', got '{line}'")))?;
        let key = key.trim().to_string();
        if !key.contains('.') {
            return Err(Error::config_at(line_no, format!("key '{key}' must be 'section.key'")));
        }
        entries.insert(key, (line_no, value.trim().to_string()));
    }

    let take = |entries: &mut BTreeMap<String, (usize, String)>, key: &str| entries.remove(key);
    let take_f64 = |entries: &mut BTreeMap<String, (usize, String)>, key: &str, default: f64| -> Result<f64> {
        match entries.remove(key) {
            Some((ln, v)) => parse_f64(ln, &v),
            None => Ok(default),
        }
    };

    let mut e = entries;
    let rock_for = |e: &mut BTreeMap<String, (usize, String)>, side: &str| -> Result<RockModel> {
        let k1 = take(e, &format!("{side}.k1"))
            .ok_or_else(|| Error::config(format!("missing {side}.k1")))?;
        let k2 = take(e, &format!("{side}.k2"))
            .ok_or_else(|| Error::config(format!("missing {side}.k2")))?;
        let k1 = parse_curve(k1.0, &k1.1)?;
        let k2 = parse_curve(k2.0, &k2.1)?;
        let porosity = take_f64(e, &format!("{side}.porosity"), 1.0)?;
        let permeability = take_f64(e, &format!("{side}.permeability"), 1.0)?;
        RockModel::new(porosity, permeability, k1, k2)
    };

    let left = rock_for(&mut e, "left")?;
    let right = rock_for(&mut e, "right")?;
    let fluid = FluidParams {
        g1: take_f64(&mut e, "fluid.g1", 1.0)?,
        g2: take_f64(&mut e, "fluid.g2", 1.0)?,
        q: take_f64(&mut e, "fluid.q", 0.0)?,
    };

    let initial = match (take(&mut e, "init.constant"), take(&mut e, "init.left"), take(&mut e, "init.right")) {
        (Some((ln, v)), None, None) => PiecewiseConstant::constant(parse_f64(ln, &v)?)?,
        (None, Some((ln_l, l)), Some((ln_r, r))) => {
            PiecewiseConstant::riemann(parse_f64(ln_l, &l)?, parse_f64(ln_r, &r)?)?
        }
        (None, None, None) => {
            return Err(Error::config("missing initial data: init.constant or init.left/init.right"))
        }
        _ => return Err(Error::config("give either init.constant or both init.left and init.right")),
    };

    let half_width = take_f64(&mut e, "domain.half_width", 5.0)?;
    let default_h = take_f64(&mut e, "domain.h", 0.1)?;
    let lambda = take_f64(&mut e, "domain.lambda", 0.125)?;
    let t_end = take_f64(&mut e, "domain.t_end", 1.0)?;

    if let Some((key, (ln, _))) = e.iter().next() {
        return Err(Error::config_at(*ln, format!("unknown key '{key}'")));
    }

    let flux_left = FluxFunction::new(left, fluid)?;
    let flux_right = FluxFunction::new(right, fluid)?;
    let s_l = initial.eval(-1.0);
    let s_r = initial.eval(1.0);
    let (tl, tr, _) = entropy_interface_traces(&flux_left, &flux_right, s_l, s_r)?;

    Ok(ExperimentSpec {
        id: 0,
        flux_left,
        flux_right,
        fluid,
        initial,
        default_h,
        lambda,
        snapshot_times: vec![t_end],
        half_width,
        traces_paper: (tl, tr),
        traces_derived: (tl, tr),
        trace_note: None,
    })
}

/// One scheme's worth of report fields.
#[derive(Debug, Clone)]
pub struct SchemeReport {
    pub scheme: Scheme,
    pub trace_left: f64,
    pub trace_right: f64,
    pub rh_residual: f64,
    /// Fraction of post-transient steps classified undercompressive.
    pub undercompressive_fraction: f64,
    pub layer_height_left: f64,
    pub layer_height_right: f64,
    pub layer_width_left: usize,
    pub layer_width_right: usize,
    pub l1_to_oracle: Option<f64>,
    pub max_entropy_residual: f64,
    pub entropy_violations: usize,
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub experiment: u8,
    pub h: f64,
    pub lambda: f64,
    pub times: Vec<f64>,
    pub expected_traces: (f64, f64),
    pub trace_note: Option<&'static str>,
    pub schemes: Vec<SchemeReport>,
}

/// Sampled interior entropy check: step the scheme manually and evaluate the
/// Crandall-Majda residuals every 10th step (capped at 300 steps).
fn entropy_verdict(spec: &ExperimentSpec, scheme: Scheme, h: f64, t_end: f64) -> Result<(f64, usize)> {
    let grid = spec.grid(h)?;
    let fs = spec.flux_set(scheme);
    let cfg = SchemeConfig::new(scheme, spec.lambda, t_end, vec![]);
    let mut state = solver::project_initial_data(&spec.initial, &grid)?;
    let constants: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let total_steps = ((t_end / (spec.lambda * h)).ceil() as usize).min(300);
    let mut max_res: f64 = 0.0;
    let mut violations = 0;
    for step_idx in 0..total_steps {
        let next = solver::step(&state, &cfg, &fs, &grid)?;
        if step_idx % 10 == 0 {
            let rep =
                interior_entropy_residual(&state, &next, &grid, &fs, spec.lambda, &constants)?;
            max_res = max_res.max(rep.max_interior_residual);
            violations += rep.cells_violating;
        }
        state = next;
    }
    Ok((max_res, violations))
}

fn scheme_report(
    spec: &ExperimentSpec,
    scheme: Scheme,
    result: &RunResult,
    oracle: Option<&Profile>,
) -> Result<SchemeReport> {
    let traces = extract_traces(result, 1);
    let rh = (spec.flux_left.eval(traces.s_left) - spec.flux_right.eval(traces.s_right)).abs();

    let transient = result.log.len() / 10;
    let post = &result.log[transient.min(result.log.len())..];
    let uc = post
        .iter()
        .filter(|r| {
            classify_pair(r.s_left, r.s_right, spec.flux_left.theta, spec.flux_right.theta)
                == Classification::Undercompressive
        })
        .count();
    let uc_fraction = if post.is_empty() { 0.0 } else { uc as f64 / post.len() as f64 };

    let l1 = match oracle {
        Some(p) => {
            let cells = result.snapshots.last().unwrap().1.clone();
            let profile = Profile::from_cells(result.grid.clone(), cells);
            Some(l1_distance(&profile, p))
        }
        None => None,
    };

    let t_end = result.config.t_end;
    let (max_res, violations) = entropy_verdict(spec, scheme, result.grid.h, t_end)?;

    Ok(SchemeReport {
        scheme,
        trace_left: traces.s_left,
        trace_right: traces.s_right,
        rh_residual: rh,
        undercompressive_fraction: uc_fraction,
        layer_height_left: traces.left_layer.height,
        layer_height_right: traces.right_layer.height,
        layer_width_left: traces.left_layer.width,
        layer_width_right: traces.right_layer.width,
        l1_to_oracle: l1,
        max_entropy_residual: max_res,
        entropy_violations: violations,
    })
}

fn config_echo(cfg: &CliConfig) -> String {
    let scheme_names: Vec<&str> = cfg.schemes.iter().map(|s| s.name()).collect();
    format!(
        "# heteroflux v{}\n# experiment={} schemes={} h={} lambda={} times={}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.spec.id,
        scheme_names.join(","),
        fmt_sig(cfg.h),
        fmt_sig(cfg.lambda),
        cfg.snapshot_times.iter().map(|t| fmt_sig(*t)).collect::<Vec<_>>().join(","),
    )
}

fn snapshot_csv(cfg: &CliConfig, result: &RunResult, t: f64, cells: &[f64]) -> String {
    let mut out = config_echo(cfg);
    let _ = writeln!(out, "# snapshot t={}", fmt_sig(t));
    out.push_str("x,S\n");
    for (i, v) in cells.iter().enumerate() {
        let x = result.grid.cell_center(result.grid.j_of(i));
        let _ = writeln!(out, "{},{}", fmt_sig(x), fmt_sig(*v));
    }
    out
}

fn diagnostics_csv(cfg: &CliConfig, spec: &ExperimentSpec, result: &RunResult) -> String {
    let mut out = config_echo(cfg);
    out.push_str("step,time,dt,l1_increment,min,max,s_left,s_right,interface_flux,classification\n");
    for (i, r) in result.log.iter().enumerate() {
        let class = match classify_pair(r.s_left, r.s_right, spec.flux_left.theta, spec.flux_right.theta)
        {
            Classification::Compressive => "compressive",
            Classification::Undercompressive => "undercompressive",
            Classification::BoundaryCase => "boundary_case",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            fmt_sig(r.time),
            fmt_sig(r.dt),
            fmt_sig(r.l1_increment),
            fmt_sig(r.min),
            fmt_sig(r.max),
            fmt_sig(r.s_left),
            fmt_sig(r.s_right),
            fmt_sig(r.interface_flux),
            class
        );
    }
    out
}

/// Plot-data file for one snapshot time: x plus one column per scheme and
/// the oracle; missing schemes stay blank. Header-only when no scheme ran.
pub fn emit_plotdata(
    cfg: &CliConfig,
    t: f64,
    results: &[(Scheme, &RunResult)],
    oracle: Option<&Profile>,
) -> String {
    let mut out = config_echo(cfg);
    out.push_str("x,S_ers,S_um,S_av,S_oracle\n");
    let Some((_, first)) = results.first() else {
        return out;
    };
    let grid = &first.grid;
    let column = |scheme: Scheme| -> Option<&RunResult> {
        results.iter().find(|(s, _)| *s == scheme).map(|(_, r)| *r)
    };
    let cells_at = |r: &RunResult| -> Option<Vec<f64>> {
        r.snapshots
            .iter()
            .find(|(st, _)| (st - t).abs() < 1e-9)
            .map(|(_, c)| c.clone())
    };
    let cols: Vec<Option<Vec<f64>>> = [Scheme::Ers, Scheme::Um, Scheme::Av]
        .into_iter()
        .map(|s| column(s).and_then(cells_at))
        .collect();
    for i in 0..grid.n_cells() {
        let x = grid.cell_center(grid.j_of(i));
        let mut row = fmt_sig(x);
        for col in &cols {
            row.push(',');
            if let Some(c) = col {
                row.push_str(&fmt_sig(c[i]));
            }
        }
        row.push(',');
        if let Some(p) = oracle {
            row.push_str(&fmt_sig(p.eval(x)));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn summary_text(cfg: &CliConfig, summary: &ReportSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment: {}", summary.experiment);
    let _ = writeln!(out, "h: {}", fmt_sig(summary.h));
    let _ = writeln!(out, "lambda: {}", fmt_sig(summary.lambda));
    let _ = writeln!(
        out,
        "snapshot_times: {}",
        summary.times.iter().map(|t| fmt_sig(*t)).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "expected_traces: {},{}",
        fmt_sig(summary.expected_traces.0),
        fmt_sig(summary.expected_traces.1)
    );
    if let Some(note) = summary.trace_note {
        let _ = writeln!(out, "trace_note: {note}");
    }
    let _ = writeln!(out, "oracle: {}", if cfg.with_oracle { "enabled" } else { "disabled" });
    for s in &summary.schemes {
        let p = s.scheme.name();
        let _ = writeln!(out, "{p}.trace_left: {}", fmt_sig(s.trace_left));
        let _ = writeln!(out, "{p}.trace_right: {}", fmt_sig(s.trace_right));
        let _ = writeln!(out, "{p}.rh_residual: {}", fmt_sig(s.rh_residual));
        let _ = writeln!(
            out,
            "{p}.undercompressive_fraction: {}",
            fmt_sig(s.undercompressive_fraction)
        );
        let _ = writeln!(out, "{p}.layer_height_left: {}", fmt_sig(s.layer_height_left));
        let _ = writeln!(out, "{p}.layer_height_right: {}", fmt_sig(s.layer_height_right));
        let _ = writeln!(out, "{p}.layer_width_left: {}", s.layer_width_left);
        let _ = writeln!(out, "{p}.layer_width_right: {}", s.layer_width_right);
        if let Some(l1) = s.l1_to_oracle {
            let _ = writeln!(out, "{p}.l1_to_oracle: {}", fmt_sig(l1));
        }
        let _ = writeln!(out, "{p}.max_entropy_residual: {}", fmt_sig(s.max_entropy_residual));
        let _ = writeln!(out, "{p}.entropy_violations: {}", s.entropy_violations);
    }
    out
}

/// Run every selected scheme, assemble the report, and emit all files.
/// Output is composed fully in memory first so a failed run leaves no
/// partial files behind.
pub fn run_experiment(cfg: &CliConfig) -> Result<ReportSummary> {
    let t_end = cfg.snapshot_times.iter().cloned().fold(0.0, f64::max);
    let results: Vec<(Scheme, RunResult)> = cfg
        .schemes
        .par_iter()
        .map(|&scheme| -> Result<(Scheme, RunResult)> {
            let grid = cfg.spec.grid(cfg.h)?;
            let run_cfg =
                SchemeConfig::new(scheme, cfg.lambda, t_end, cfg.snapshot_times.clone());
            let r = solver::run(&run_cfg, &cfg.spec.flux_set(scheme), &cfg.spec.initial, &grid)?;
            Ok((scheme, r))
        })
        .collect::<Result<Vec<_>>>()?;

    let oracles: Vec<Option<Profile>> = if cfg.with_oracle {
        cfg.snapshot_times
            .par_iter()
            .map(|&t| fine_mesh_oracle(&cfg.spec, t).map(Some))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; cfg.snapshot_times.len()]
    };
    let final_oracle = oracles.last().and_then(|o| o.as_ref());

    let mut reports = Vec::new();
    for (scheme, result) in &results {
        reports.push(scheme_report(&cfg.spec, *scheme, result, final_oracle)?);
    }
    let summary = ReportSummary {
        experiment: cfg.spec.id,
        h: cfg.h,
        lambda: cfg.lambda,
        times: cfg.snapshot_times.clone(),
        expected_traces: cfg.spec.traces_derived,
        trace_note: cfg.spec.trace_note,
        schemes: reports,
    };

    // compose every file, then flush; delete everything written on failure
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let tag = |t: f64| fmt_sig(t).replace('.', "p");
    for (scheme, result) in &results {
        for (t, cells) in &result.snapshots {
            let name = format!(
                "exp{}_{}_h{}_t{}.csv",
                cfg.spec.id,
                scheme.name(),
                tag(cfg.h),
                tag(*t)
            );
            files.push((cfg.out_dir.join(name), snapshot_csv(cfg, result, *t, cells)));
        }
        let name = format!("exp{}_{}_h{}_diagnostics.csv", cfg.spec.id, scheme.name(), tag(cfg.h));
        files.push((cfg.out_dir.join(name), diagnostics_csv(cfg, &cfg.spec, result)));
    }
    let refs: Vec<(Scheme, &RunResult)> = results.iter().map(|(s, r)| (*s, r)).collect();
    for (i, &t) in cfg.snapshot_times.iter().enumerate() {
        let name = format!("exp{}_plot_h{}_t{}.csv", cfg.spec.id, tag(cfg.h), tag(t));
        files.push((
            cfg.out_dir.join(name),
            emit_plotdata(cfg, t, &refs, oracles[i].as_ref()),
        ));
    }
    files.push((
        cfg.out_dir.join(format!("exp{}_h{}_summary.txt", cfg.spec.id, tag(cfg.h))),
        summary_text(cfg, &summary),
    ));

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (path, content) in &files {
        if let Err(e) = std::fs::write(path, content) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e.into());
        }
        written.push(path.clone());
    }

    Ok(summary)
}

/// Process entry point: parse args, run, map errors to exit codes.
pub fn main_entry() -> i32 {
    let cfg = match parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run_experiment(&cfg) {
        Ok(summary) => {
            // echo the summary to stdout as well
            print!("{}", summary_text(&cfg, &summary));
            if let Some(note) = cfg.spec.trace_note {
                eprintln!("note: {note}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_args(extra: &[&str]) -> Vec<String> {
        let mut v = vec!["heteroflux".to_string()];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    }

    #[test]
    fn fmt_sig_examples() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(-0.35), "-0.35");
        assert_eq!(fmt_sig(12.0), "12");
        assert_eq!(fmt_sig(1e-4), "0.0001");
    }

    #[test]
    fn parse_experiment_flags() {
        let cfg = parse_config(base_args(&[
            "--experiment", "1", "--scheme", "ers,um,av", "--h", "0.1", "--lambda", "0.125",
            "--t", "1.5",
        ]))
        .unwrap();
        assert_eq!(cfg.spec.id, 1);
        assert_eq!(cfg.schemes, vec![Scheme::Ers, Scheme::Um, Scheme::Av]);
        assert_eq!(cfg.h, 0.1);
        assert_eq!(cfg.lambda, 0.125);
        assert_eq!(cfg.snapshot_times, vec![1.5]);
    }

    #[test]
    fn registry_defaults_fill_in() {
        let cfg = parse_config(base_args(&["--experiment", "2"])).unwrap();
        assert_eq!(cfg.h, 0.1);
        assert_eq!(cfg.lambda, 0.125);
        assert_eq!(cfg.snapshot_times, vec![1.5, 3.0]);
    }

    #[test]
    fn config_errors() {
        assert_eq!(parse_config(base_args(&[])).unwrap_err().exit_code(), 2);
        assert_eq!(
            parse_config(base_args(&["--experiment", "7"])).unwrap_err().exit_code(),
            2
        );
        assert_eq!(
            parse_config(base_args(&["--experiment", "1", "--scheme", "foo"]))
                .unwrap_err()
                .exit_code(),
            2
        );
        // CFL failure names the scheme and M
        let err = parse_config(base_args(&["--experiment", "5", "--lambda", "0.5"])).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let msg = format!("{err}");
        assert!(msg.contains("ers") && msg.contains("M ="), "{msg}");
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cfg");
        std::fs::write(
            &path,
            "\
# symmetric single-rock model
left.k1 = power 1.0 1
left.k2 = power 1.0 1 decreasing
right.k1 = power 1.0 1
right.k2 = power 1.0 1 decreasing
fluid.g1 = 2
fluid.g2 = 1
init.left = 0.65
init.right = 0.35
domain.half_width = 2
domain.t_end = 0.5
",
        )
        .unwrap();
        let spec = parse_model_file(&path).unwrap();
        assert_eq!(spec.id, 0);
        assert!((spec.flux_left.eval(0.5) - 0.25).abs() < 1e-12);
        assert_eq!(spec.initial.eval(-1.0), 0.65);
        assert_eq!(spec.snapshot_times, vec![0.5]);
    }

    #[test]
    fn model_file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "left.k1 = power 1.0 1\nleft.k2 = wedge 3\n").unwrap();
        let err = parse_model_file(&path).unwrap_err();
        assert!(format!("{err}").contains("line 2"), "{err}");

        std::fs::write(&path, "nonsense\n").unwrap();
        assert!(parse_model_file(&path).is_err());
    }

    #[test]
    fn run_experiment_emits_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(base_args(&[
            "--experiment", "1", "--h", "0.1", "--t", "0.5", "--no-oracle", "--out",
            dir.path().to_str().unwrap(),
        ]))
        .unwrap();
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.schemes.len(), 3);
        for scheme in ["ers", "um", "av"] {
            assert!(dir.path().join(format!("exp1_{scheme}_h0p1_t0p5.csv")).exists());
            assert!(dir.path().join(format!("exp1_{scheme}_h0p1_diagnostics.csv")).exists());
        }
        assert!(dir.path().join("exp1_plot_h0p1_t0p5.csv").exists());
        assert!(dir.path().join("exp1_h0p1_summary.txt").exists());

        // determinism: a second identical run produces identical bytes
        let plot1 = std::fs::read(dir.path().join("exp1_plot_h0p1_t0p5.csv")).unwrap();
        run_experiment(&cfg).unwrap();
        let plot2 = std::fs::read(dir.path().join("exp1_plot_h0p1_t0p5.csv")).unwrap();
        assert_eq!(plot1, plot2);
    }

    #[test]
    fn exp1_um_spurious_right_wave_in_plotdata() {
        // UM shows nonconstant values past the interface on x > 0
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(base_args(&[
            "--experiment", "1", "--h", "0.1", "--t", "0.5", "--no-oracle", "--out",
            dir.path().to_str().unwrap(),
        ]))
        .unwrap();
        run_experiment(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("exp1_plot_h0p1_t0p5.csv")).unwrap();
        let mut um_wave_cells = 0;
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('x')) {
            let cols: Vec<&str> = line.split(',').collect();
            let x: f64 = cols[0].parse().unwrap();
            // skip the near-interface boundary-layer cells themselves
            if x > 0.15 {
                let um: f64 = cols[2].parse().unwrap();
                if (um - 0.35).abs() > 0.01 {
                    um_wave_cells += 1;
                }
            }
        }
        assert!(um_wave_cells > 0, "expected a spurious UM wave on x > 0");
    }

    #[test]
    fn custom_single_rock_schemes_agree() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cfg");
        std::fs::write(
            &path,
            "\
left.k1 = power 1.0 1
left.k2 = power 1.0 1 decreasing
right.k1 = power 1.0 1
right.k2 = power 1.0 1 decreasing
fluid.g1 = 2
fluid.g2 = 1
init.left = 0.8
init.right = 0.2
domain.half_width = 2
domain.t_end = 0.5
",
        )
        .unwrap();
        let cfg = parse_config(base_args(&[
            "--model",
            path.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ]))
        .unwrap();
        run_experiment(&cfg).unwrap();
        let text =
            std::fs::read_to_string(dir.path().join("out/exp0_plot_h0p1_t0p5.csv")).unwrap();
        // AV with fL = fR is plain Godunov; UM differs only by O(h) smearing
        // near the shock, so compare in L1
        let mut l1_um = 0.0;
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('x')) {
            let cols: Vec<&str> = line.split(',').collect();
            let ers: f64 = cols[1].parse().unwrap();
            let um: f64 = cols[2].parse().unwrap();
            let av: f64 = cols[3].parse().unwrap();
            assert!((ers - av).abs() < 1e-9);
            l1_um += (ers - um).abs() * 0.1;
        }
        assert!(l1_um < 0.1, "L1(ers, um) = {l1_um}");
    }
}
