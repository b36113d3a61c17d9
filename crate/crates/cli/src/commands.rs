use crate::output::{json_pretty, num, Run, Table};
use crate::*;
use anyhow::{bail, Result};
use loadshare::estimation::{
    fit_with_selection, Anchor, FitConfig, FitResult, KnotBinning, MethodChoice, Selection,
    StatsOptions,
};
use loadshare::gof::{aic, ks_pvalue_mc, CdfAnchor, GofConfig};
use loadshare::io::{self, DataFormat};
use loadshare::reliability::{mttf, reliability_table, write_reliability_csv};
use loadshare::rng::stream;
use loadshare::simlab::{
    run_performance_study, run_robustness_study, ParentProcess, RobustnessConfig, StudyConfig, StudyGrid,
};
use loadshare::uncertainty::{
    asymptotic_ci, bootstrap, observed_information, simulate_data, BootstrapConfig, IntervalSet, Resampling,
};
use loadshare::{GridPolicy, LoadShareData, PlaModel};
use serde_json::{json, Value};
use std::path::Path;

/// Bad flag values that clap cannot check (exit 1).
#[derive(Debug)]
pub struct UsageError(pub String);

/// Warnings promoted to errors by `--strict` (exit 3).
#[derive(Debug)]
pub struct StrictError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for StrictError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for StrictError {}

fn expect_len(values: &[f64], n: usize, flag: &str) -> Result<()> {
    if values.len() != n {
        bail!(UsageError(format!("--{flag} takes {n} comma-separated values, got {}", values.len())));
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(c) => cmd_fit(cli, c),
        Command::Ci(c) => cmd_ci(cli, c),
        Command::Gof(c) => cmd_gof(cli, c),
        Command::Reliability(c) => cmd_reliability(cli, c),
        Command::Simulate(c) => match &c.study {
            Study::Performance(a) => cmd_performance(cli, a),
            Study::Robustness(a) => cmd_robustness(cli, a),
            Study::Data(a) => cmd_draw(cli, a),
        },
    }
}

fn load_data(run: &mut Run, args: &DataArgs) -> Result<LoadShareData> {
    let bytes = run.read_input(&args.input)?;
    let format = match args.format {
        Format::RawComponents => DataFormat::RawComponents,
        Format::StageGaps => DataFormat::StageGaps,
    };
    Ok(io::read(&bytes[..], format)?)
}

fn parse_knots(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|stage| {
            stage
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| UsageError(format!("bad knot value {s:?} in --knots")).into())
                })
                .collect()
        })
        .collect()
}

fn fit_config(args: &ModelArgs, components: usize) -> Result<FitConfig> {
    let grid = match (&args.knots, args.pieces) {
        (Some(text), pieces) => {
            let rows = parse_knots(text)?;
            if rows.len() != components || rows.iter().any(|r| r.len() + 1 != pieces) {
                bail!(UsageError(format!(
                    "--knots must give {} interior knot(s) for each of {components} stages",
                    pieces.saturating_sub(1)
                )));
            }
            GridPolicy::Interior(rows)
        }
        (None, 0) => bail!(UsageError("--pieces must be at least 1".into())),
        (None, 1) => GridPolicy::Interior(vec![Vec::new(); components]),
        (None, 2) => GridPolicy::Select { p1: args.select_knot[0], p2: args.select_knot[1] },
        (None, _) => bail!(UsageError("more than two pieces need explicit --knots".into())),
    };
    Ok(FitConfig {
        grid,
        anchor: match args.anchor {
            AnchorArg::Min => Anchor::Minimum,
            AnchorArg::Zero => Anchor::Zero,
        },
        stats: StatsOptions {
            binning: match args.binning {
                BinningArg::Lower => KnotBinning::Lower,
                BinningArg::Upper => KnotBinning::Upper,
            },
            ..StatsOptions::default()
        },
        method: match args.method {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Numeric => MethodChoice::Numeric,
            MethodArg::ClosedForm => MethodChoice::ClosedForm,
        },
        ..FitConfig::default()
    })
}

fn fit_data(
    cli: &Cli,
    data: &LoadShareData,
    args: &ModelArgs,
) -> Result<(FitConfig, FitResult, Option<Selection>)> {
    expect_len(&args.select_knot, 2, "select-knot")?;
    let cfg = fit_config(args, data.components())?;
    let (fit, selection) = fit_with_selection(data, &cfg)?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    if cli.strict && !fit.warnings.is_empty() {
        bail!(StrictError(format!("{} fit warning(s) under --strict", fit.warnings.len())));
    }
    Ok((cfg, fit, selection))
}

fn model_value(model: &PlaModel) -> Result<Value> {
    Ok(serde_json::from_str(&model.to_json())?)
}

fn fit_report(data: &LoadShareData, fit: &FitResult, selection: Option<&Selection>) -> Result<Value> {
    let estimates: serde_json::Map<String, Value> =
        fit.parameter_names().into_iter().zip(fit.theta()).map(|(k, v)| (k, json!(v))).collect();
    let selection = selection.map(|s| {
        json!({
            "chosen": s.chosen,
            "candidates": s.trace,
        })
    });
    let jj = data.components();
    Ok(json!({
        "n": data.n(),
        "components": jj,
        "pieces": fit.model.pieces(),
        "estimates": estimates,
        "loglik": fit.loglik_full,
        "aic": aic(fit),
        "method": fit.method,
        "converged": fit.converged,
        "score_norm": fit.score_norm,
        "warnings": fit.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "data": {
            "mean": (0..jj).map(|j| data.mean(j)).collect::<Vec<_>>(),
            "sd": (0..jj).map(|j| data.sd(j)).collect::<Vec<_>>(),
        },
        "selection": selection,
        "model": model_value(&fit.model)?,
    }))
}

fn qq_table(data: &LoadShareData, model: &PlaModel) -> Result<Table> {
    let mut t = Table::new(&["stage", "i", "p", "observed", "model"]);
    let n = data.n();
    for j in 0..data.components() {
        let mut ys = data.stage(j).to_vec();
        ys.sort_by(f64::total_cmp);
        for (i, y) in ys.iter().enumerate() {
            let p = (i as f64 + 0.5) / n as f64;
            let q = model.quantile(j, p)?;
            t.row([j.to_string(), (i + 1).to_string(), num(p), num(*y), num(q)]);
        }
    }
    Ok(t)
}

fn curve_table(data: &LoadShareData, model: &PlaModel, points: usize) -> Result<Table> {
    let mut t = Table::new(&[
        "stage",
        "t",
        "stage_sf",
        "empirical_stage_sf",
        "component_chf",
        "empirical_component_chf",
    ]);
    let jj = data.components();
    let points = points.max(2);
    for j in 0..jj {
        let ys = data.stage(j);
        let hi = 1.1 * data.max(j);
        let tau0 = model.grid().stage(j)[0];
        let share = (jj - j) as f64;
        for i in 0..points {
            let x = hi * i as f64 / (points - 1) as f64;
            let sf = model.stage_sf(j, x)?;
            let chf = if x <= tau0 { 0.0 } else { model.cum_hazard(j, x)? };
            let esf = ys.iter().filter(|&&y| y > x).count() as f64 / ys.len() as f64;
            let echf = if esf > 0.0 { (0.0 - esf.ln()) / share } else { f64::NAN };
            t.row([j.to_string(), num(x), num(sf), num(esf), num(chf), num(echf)]);
        }
    }
    Ok(t)
}

fn cmd_fit(cli: &Cli, c: &FitCmd) -> Result<()> {
    let mut run = Run::new("fit", c.out.as_deref())?;
    let data = load_data(&mut run, &c.data)?;
    let (_, fit, selection) = fit_data(cli, &data, &c.model)?;
    let report = json_pretty(&fit_report(&data, &fit, selection.as_ref())?)?;
    run.write("fit.json", &report)?;
    run.write("model.json", fit.model.to_json().as_bytes())?;
    run.write("qq.csv", &qq_table(&data, &fit.model)?.into_bytes())?;
    run.write("curves.csv", &curve_table(&data, &fit.model, c.curve_points)?.into_bytes())?;
    print!("{}", String::from_utf8(report)?);
    run.finish(cli.seed, cli)
}

fn interval_rows(sets: &[IntervalSet]) -> Table {
    let mut t = Table::new(&["method", "parameter", "estimate", "lower", "upper", "se", "bias"]);
    for s in sets {
        let method = serde_json::to_value(s.method).ok().and_then(|v| v.as_str().map(String::from));
        for iv in &s.intervals {
            t.row([
                method.clone().unwrap_or_default(),
                iv.name.clone(),
                num(iv.estimate),
                num(iv.lower),
                num(iv.upper),
                num(iv.se),
                iv.bias.map(num).unwrap_or_default(),
            ]);
        }
    }
    t
}

fn cmd_ci(cli: &Cli, c: &CiCmd) -> Result<()> {
    let mut run = Run::new("ci", c.out.as_deref())?;
    let data = load_data(&mut run, &c.data)?;
    let (cfg, fit, _) = fit_data(cli, &data, &c.model)?;
    let mut sets = Vec::new();
    if matches!(c.interval, CiMethod::Asymptotic | CiMethod::All) {
        let info = observed_information(&fit.stats, fit.model.params())?;
        sets.push(asymptotic_ci(&fit, &info, c.level)?);
    }
    if c.interval != CiMethod::Asymptotic {
        let bc = BootstrapConfig {
            replicates: c.replicates,
            level: c.level,
            seed: cli.seed,
            scheme: match c.scheme {
                SchemeArg::Parametric => Resampling::Parametric,
                SchemeArg::Nonparametric => Resampling::Nonparametric,
            },
            fit: cfg,
            ..BootstrapConfig::default()
        };
        let boot = bootstrap(&data, &fit, &bc)?;
        if boot.failed > 0 {
            eprintln!("warning: {} of {} bootstrap refits failed", boot.failed, c.replicates);
        }
        let mut raw = Vec::new();
        boot.write_csv(&fit.parameter_names(), &mut raw)?;
        run.write("bootstrap_replicates.csv", &raw)?;
        if matches!(c.interval, CiMethod::BootNormal | CiMethod::All) {
            sets.push(boot.normal);
        }
        if matches!(c.interval, CiMethod::BootPercentile | CiMethod::All) {
            sets.push(boot.percentile);
        }
    }
    if c.truncate {
        sets.iter_mut().for_each(IntervalSet::truncate_support);
    }
    run.write("intervals.csv", &interval_rows(&sets).into_bytes())?;
    let report = json_pretty(&sets)?;
    run.write("intervals.json", &report)?;
    print!("{}", String::from_utf8(report)?);
    run.finish(cli.seed, cli)
}

fn cmd_gof(cli: &Cli, c: &GofCmd) -> Result<()> {
    let mut run = Run::new("gof", c.out.as_deref())?;
    let data = load_data(&mut run, &c.data)?;
    let (cfg, fit, _) = fit_data(cli, &data, &c.model)?;
    let gc = GofConfig {
        replicates: c.replicates,
        seed: cli.seed,
        refit: !c.no_refit,
        fit: cfg,
        anchor: match c.ks_anchor {
            KsAnchorArg::GridStart => CdfAnchor::GridStart,
            KsAnchorArg::Origin => CdfAnchor::Origin,
        },
        ..GofConfig::default()
    };
    let report = ks_pvalue_mc(&data, &fit, &gc)?;
    let text = report.to_json();
    run.write("gof.json", text.as_bytes())?;
    print!("{text}");
    run.finish(cli.seed, cli)
}

fn load_model(run: &mut Run, path: &Path) -> Result<PlaModel> {
    let bytes = run.read_input(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| loadshare::Error::Parse(e.to_string()))?;
    let value: Value = serde_json::from_str(text).map_err(|e| loadshare::Error::Parse(e.to_string()))?;
    match value.get("model") {
        Some(inner) => Ok(PlaModel::from_json(&inner.to_string())?),
        None => Ok(PlaModel::from_json(text)?),
    }
}

fn cmd_reliability(cli: &Cli, c: &ReliabilityCmd) -> Result<()> {
    let mut run = Run::new("reliability", c.out.as_deref())?;
    let model = load_model(&mut run, &c.model)?;
    let ordering = model.params().ordering_warnings();
    for w in &ordering {
        eprintln!("warning: {w}");
    }
    if cli.strict && !ordering.is_empty() {
        bail!(StrictError("model multipliers are not ordered".into()));
    }
    let mut quantiles = Vec::new();
    for j in 0..model.components() {
        for &p in &c.quantiles {
            quantiles.push(json!({ "stage": j, "p": p, "value": model.quantile(j, p)? }));
        }
    }
    let rows = reliability_table(&model, &c.t0, c.reps, cli.seed)?;
    let mut csv = Vec::new();
    write_reliability_csv(&rows, &mut csv)?;
    run.write("reliability.csv", &csv)?;
    let report = json_pretty(&json!({
        "mttf": mttf(&model),
        "quantiles": quantiles,
        "mission": rows,
    }))?;
    run.write("reliability.json", &report)?;
    print!("{}", String::from_utf8(report)?);
    run.finish(cli.seed, cli)
}

fn cmd_performance(cli: &Cli, a: &PerformanceArgs) -> Result<()> {
    expect_len(&a.slopes, 2, "slopes")?;
    expect_len(&a.select_knot, 2, "select-knot")?;
    let mut run = Run::new("simulate performance", a.out.as_deref())?;
    let mut cfg = StudyConfig::new(a.n, a.reps, [a.slopes[0], a.slopes[1]], a.gamma, cli.seed);
    cfg.level = a.level;
    cfg.bootstrap = a.bootstrap;
    cfg.grid = match a.grid {
        StudyGridArg::Select => StudyGrid::Select { p1: a.select_knot[0], p2: a.select_knot[1] },
        StudyGridArg::TrueKnots => StudyGrid::TrueKnots,
    };
    let table = run_performance_study(&cfg)?;
    if table.failed > 0 {
        eprintln!("warning: {} of {} replicates failed to fit", table.failed, a.reps);
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    run.write("performance.csv", &csv)?;
    let report = json_pretty(&table)?;
    run.write("performance.json", &report)?;
    print!("{}", String::from_utf8(report)?);
    run.finish(cli.seed, cli)
}

fn cmd_robustness(cli: &Cli, a: &RobustnessArgs) -> Result<()> {
    expect_len(&a.weibull, 3, "weibull")?;
    expect_len(&a.quadratic, 4, "quadratic")?;
    expect_len(&a.select_knot, 2, "select-knot")?;
    let mut run = Run::new("simulate robustness", a.out.as_deref())?;
    let (parent, label) = match a.parent {
        ParentArg::Weibull => (ParentProcess::weibull(a.weibull[0], a.weibull[1], a.weibull[2])?, "weibull"),
        ParentArg::Quadratic => (
            ParentProcess::quadratic(a.quadratic[0], a.quadratic[1], a.quadratic[2], a.quadratic[3])?,
            "quadratic",
        ),
    };
    let cfg = RobustnessConfig { n: a.n, reps: a.reps, seed: cli.seed, p1: a.select_knot[0], p2: a.select_knot[1] };
    let table = run_robustness_study(&parent, &cfg)?;
    if table.failed > 0 {
        eprintln!("warning: {} of {} replicates failed to fit", table.failed, a.reps);
    }
    let mut csv = Vec::new();
    table.write_csv(label, &mut csv)?;
    run.write("robustness.csv", &csv)?;
    let report = json_pretty(&table)?;
    run.write("robustness.json", &report)?;
    print!("{}", String::from_utf8(report)?);
    run.finish(cli.seed, cli)
}

fn cmd_draw(cli: &Cli, a: &DataDrawArgs) -> Result<()> {
    let mut run = Run::new("simulate data", None)?;
    let model = load_model(&mut run, &a.model)?;
    let data = simulate_data(&model, a.n, &mut stream(cli.seed, 0))?;
    let mut csv = Vec::new();
    io::write_stage_gaps(&data, &mut csv)?;
    match &a.out {
        Some(path) => std::fs::write(path, &csv)
            .map_err(|e| loadshare::Error::Io(format!("{}: {e}", path.display())))?,
        None => print!("{}", String::from_utf8(csv)?),
    }
    Ok(())
}
