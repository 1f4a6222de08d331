use pickfreeze::asymptotics::{asymptotic_ci, gamma_s, gamma_t};
use pickfreeze::berry_esseen::{be_moments, coverage_curve};
use pickfreeze::concentration::{deviation_curve, BoundSource, Variant};
use pickfreeze::config::{ConfigFile, DesignConfig};
use pickfreeze::estimators::{estimate_full_info, estimate_s, estimate_t, estimate_tilde_s, EstimatorKind, MeanMode};
use pickfreeze::hypothesis::{
    example1_t1_power, power_curve, rejection_rate, NullCov, StatKind, TestProblem, TestSetup,
};
use pickfreeze::models::{
    breguet_model, example1, example2, ishigami_model, AnalyticModel, BreguetConstants, ModelKind,
};
use pickfreeze::sampling::{format_subset, generate_pick_freeze, parse_subset, Design};
use pickfreeze::special::norm_quantile;
use pickfreeze::{Error, Result};
use serde_json::json;

use crate::args::{BerryArgs, ConcentrationArgs, EstimateArgs, ModelArgs, PowerArgs, TestArgs};
use crate::output::{num, opt, Table};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct Resolved {
    model: AnalyticModel,
    design: Option<DesignConfig>,
}

fn named_model(name: &str, lambda1: Option<f64>) -> Result<AnalyticModel> {
    let l1 = lambda1.unwrap_or(0.0);
    match name {
        "ishigami" => Ok(ishigami_model(false)),
        "ishigami-centered" => Ok(ishigami_model(true)),
        "example1" => example1(l1),
        "example2" => example2(l1),
        "breguet" => breguet_model(BreguetConstants::default(), None),
        other => Err(config_err(format!(
            "unknown model `{other}` (ishigami, ishigami-centered, example1, example2, breguet)"
        ))),
    }
}

fn resolve(args: &ModelArgs) -> Result<Resolved> {
    match &args.model_config {
        Some(path) => {
            let cfg = ConfigFile::load(path)?;
            Ok(Resolved {
                model: cfg.model.build()?,
                design: cfg.design,
            })
        }
        None => Ok(Resolved {
            model: named_model(&args.model, args.lambda1)?,
            design: None,
        }),
    }
}

fn parse_subsets(flags: &[String]) -> Result<Vec<Vec<usize>>> {
    flags.iter().map(|s| parse_subset(s)).collect()
}

/// Inclusive `start:stop:step` grid, rounded to 12 decimals.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| config_err(format!("bad grid `{text}`: expected start:stop:step")))?;
    let [start, stop, step] = parts[..] else {
        return Err(config_err(format!("bad grid `{text}`: expected start:stop:step")));
    };
    if step <= 0.0 || stop < start || !step.is_finite() || !start.is_finite() || !stop.is_finite() {
        return Err(config_err(format!(
            "bad grid `{text}`: need step > 0 and stop >= start"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(config_err(format!("grid `{text}` has {count} points")));
    }
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn sizes(flags: &[usize], default: &[usize]) -> Vec<usize> {
    if flags.is_empty() {
        default.to_vec()
    } else {
        flags.to_vec()
    }
}

fn single_subset(flags: &[String], design: &Option<DesignConfig>) -> Result<Vec<usize>> {
    let mut u = parse_subsets(flags)?;
    if u.is_empty() {
        u = design.as_ref().map(|d| d.u.clone()).unwrap_or_default();
    }
    match u.len() {
        0 => Ok(vec![1]),
        1 => Ok(u.remove(0)),
        k => Err(config_err(format!("this command takes one subset, got {k}"))),
    }
}

fn default_problem(model: &AnalyticModel) -> Option<TestProblem> {
    match model.kind {
        ModelKind::Example1 { .. } => TestProblem::new(vec![vec![1], vec![2]], vec![], vec![]).ok(),
        ModelKind::Example2 { .. } => {
            TestProblem::new(vec![vec![1]], vec![vec![1, 2], vec![1, 3]], vec![vec![2], vec![3]]).ok()
        }
        _ => None,
    }
}

fn problem(u: &[String], v: &[String], w: &[String], r: &Resolved) -> Result<TestProblem> {
    if !u.is_empty() || !v.is_empty() || !w.is_empty() {
        return TestProblem::new(parse_subsets(u)?, parse_subsets(v)?, parse_subsets(w)?);
    }
    if let Some(d) = &r.design {
        return d.problem();
    }
    default_problem(&r.model).ok_or_else(|| config_err("no design given: pass --u (and --v/--w)"))
}

fn stat_kind(name: &str, a: &[f64], dim: usize) -> Result<StatKind> {
    if name.eq_ignore_ascii_case("linear") {
        Ok(StatKind::Linear(if a.is_empty() { vec![1.0; dim] } else { a.to_vec() }))
    } else {
        if !a.is_empty() {
            return Err(config_err("--A applies to the linear statistic only"));
        }
        name.parse()
    }
}

fn test_estimator(name: &str) -> Result<EstimatorKind> {
    match name.parse::<EstimatorKind>()? {
        k @ (EstimatorKind::S | EstimatorKind::T) => Ok(k),
        k => Err(config_err(format!("tests use the S or T estimator, got {k}"))),
    }
}

pub fn estimate(args: &EstimateArgs) -> Result<Table> {
    let c = &args.common;
    let r = resolve(&c.model)?;
    let kind: EstimatorKind = args.estimator.parse()?;
    let p = r.model.spec.dim();
    let mut subsets = parse_subsets(&c.u)?;
    if subsets.is_empty() {
        subsets = r.design.as_ref().map(|d| d.u.clone()).unwrap_or_default();
    }
    let design = if subsets.is_empty() {
        Design::singletons(p)?
    } else {
        Design::new(subsets)?
    };
    let mean_mode = args.mean.map_or(MeanMode::Estimated, MeanMode::Known);
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::Parameter(format!("level must lie in (0,1), got {}", args.level)));
    }

    let mut table = Table::new(&["subset", "estimator", "value", "ci_low", "ci_high", "n", "seed"]);
    for n in sizes(&c.n, &[10_000]) {
        let sample = generate_pick_freeze(&r.model.spec, &design, n, c.seed)?;
        let rows: Vec<(f64, Option<(f64, f64)>)> = match kind {
            EstimatorKind::S | EstimatorKind::T => {
                let est = if kind == EstimatorKind::S {
                    estimate_s(&sample)?
                } else {
                    estimate_t(&sample)?
                };
                let gamma = if kind == EstimatorKind::S {
                    gamma_s(&sample, &est)?
                } else {
                    gamma_t(&sample, &est)?
                };
                let ci = asymptotic_ci(&est, &gamma, args.level)?;
                est.values
                    .iter()
                    .zip(ci)
                    .map(|(&v, i)| (v, Some((i.low, i.high))))
                    .collect()
            }
            EstimatorKind::FullInfo => estimate_full_info(&sample)?
                .values
                .into_iter()
                .map(|v| (v, None))
                .collect(),
            EstimatorKind::TildeS => {
                let z = norm_quantile(0.5 * (1.0 + args.level))?;
                (0..design.len())
                    .map(|j| {
                        let sub = sample.select(&[j])?;
                        let v = estimate_tilde_s(&sub, mean_mode)?.values[0];
                        let m = be_moments(&sub, 0.0, mean_mode)?;
                        let h = z * (m.sigma2 / n as f64).sqrt();
                        Ok((v, Some((v - h, v + h))))
                    })
                    .collect::<Result<_>>()?
            }
        };
        for (subset, (value, ci)) in design.subsets().iter().zip(rows) {
            table.push(vec![
                json!(format_subset(subset)),
                json!(kind.to_string()),
                num(value),
                opt(ci.map(|c| c.0)),
                opt(ci.map(|c| c.1)),
                json!(n),
                json!(c.seed),
            ]);
        }
    }
    Ok(table)
}

pub fn test(args: &TestArgs) -> Result<Table> {
    let c = &args.common;
    let r = resolve(&c.model)?;
    let problem = problem(&c.u, &args.v, &args.w, &r)?;
    let kind = stat_kind(&args.stat, &args.a, problem.dim())?;
    let shift = args.shift.unwrap_or(0.0);
    let setup = TestSetup {
        problem,
        estimator: test_estimator(&args.estimator)?,
        kind,
        null: args.sigma0.map_or(NullCov::PlugIn, |sigma0| NullCov::Iid { sigma0 }),
        alpha: args.alpha,
        shift,
    };
    let stat = setup.kind.to_string();
    let ns = sizes(&c.n, &[1000]);
    match args.reps {
        None => {
            let mut table = Table::new(&["n", "stat", "statistic", "threshold", "alpha", "reject"]);
            for n in ns {
                let t = setup.run(&r.model.spec, n, c.seed)?;
                table.push(vec![
                    json!(n),
                    json!(stat),
                    num(t.statistic),
                    num(t.threshold),
                    num(t.alpha),
                    json!(t.reject),
                ]);
            }
            Ok(table)
        }
        Some(reps) => {
            let mut table = Table::new(&["n", "stat", "alpha", "reps", "rejection_rate", "mc_stderr"]);
            for n in ns {
                let rate = rejection_rate(&setup, &r.model.spec, n, reps, c.seed)?;
                table.push(vec![
                    json!(n),
                    json!(stat),
                    num(args.alpha),
                    json!(reps),
                    num(rate.rate),
                    num(rate.stderr),
                ]);
            }
            Ok(table)
        }
    }
}

pub fn power(args: &PowerArgs) -> Result<Table> {
    let c = &args.common;
    let r = resolve(&c.model)?;
    let first = matches!(r.model.kind, ModelKind::Example1 { .. });
    let second = matches!(r.model.kind, ModelKind::Example2 { .. });
    let family = move |l1: f64| -> Result<_> {
        match (first, second) {
            (true, _) => example1(l1).map(|m| m.spec),
            (_, true) => example2(l1).map(|m| m.spec),
            _ => Err(config_err("power sweeps need the example1 or example2 model")),
        }
    };
    family(0.0)?;
    let problem = problem(&c.u, &args.v, &args.w, &r)?;
    let stat = stat_kind(&args.stat, &args.a, problem.dim())?;
    let estimator = test_estimator(&args.estimator)?;
    let null_sigma = if first { 3f64.sqrt() } else { 1.0 };
    let sigma0 = args.sigma0.unwrap_or(null_sigma);
    let null = if args.plug_in {
        NullCov::PlugIn
    } else {
        NullCov::Iid { sigma0 }
    };
    let closed = first
        && stat == StatKind::T1
        && estimator == EstimatorKind::S
        && !args.plug_in
        && (sigma0 - null_sigma).abs() < 1e-12
        && Some(&problem) == default_problem(&r.model).as_ref();
    let grid = parse_grid(&args.grid)?;
    let alpha = args.alpha;
    let setup = TestSetup {
        problem,
        estimator,
        kind: stat,
        null,
        alpha,
        shift: 0.0,
    };
    let closed_fn = move |l1: f64, n: usize| example1_t1_power(l1, n, alpha);
    let rows = power_curve(
        family,
        &setup,
        &grid,
        &sizes(&c.n, &[100, 500, 1000]),
        args.reps,
        c.seed,
        if closed { Some(&closed_fn) } else { None },
    )?;
    let mut table = Table::new(&["parameter", "n", "power", "closed_form_power", "mc_stderr"]);
    for row in rows {
        table.push(vec![
            num(row.parameter),
            json!(row.n),
            num(row.power),
            opt(row.closed_form_power),
            num(row.mc_stderr),
        ]);
    }
    Ok(table)
}

pub fn concentration(args: &ConcentrationArgs) -> Result<Table> {
    let c = &args.common;
    let r = resolve(&c.model)?;
    let u = single_subset(&c.u, &r.design)?;
    let variants = match args.variant.as_str() {
        "both" => vec![Variant::S, Variant::T],
        other => vec![other.parse()?],
    };
    let b = match args.b.as_deref() {
        Some("estimate") => BoundSource::Estimate,
        Some(text) => BoundSource::Known(
            text.parse()
                .map_err(|_| config_err(format!("bad --b `{text}`: a number or `estimate`")))?,
        ),
        None => r.model.bound.map_or(BoundSource::Estimate, BoundSource::Known),
    };
    let ys = parse_grid(&args.grid)?;
    let rows = deviation_curve(
        &r.model.spec,
        &u,
        &variants,
        &sizes(&c.n, &[1000, 4000, 8000, 12000]),
        &ys,
        b,
        c.seed,
    )?;
    let mut table = Table::new(&[
        "variant", "side", "n", "y", "bound", "term1", "term2", "term3", "term4", "term5",
    ]);
    table.note("subset", json!(format_subset(&u)));
    table.note(
        "b",
        match b {
            BoundSource::Known(v) => num(v),
            BoundSource::Estimate => json!("estimate"),
        },
    );
    for row in rows {
        let mut cells = vec![
            json!(row.variant.to_string()),
            json!(row.side.to_string()),
            json!(row.n),
            num(row.y),
            num(row.bound),
        ];
        cells.extend(row.terms.iter().map(|t| opt(*t)));
        table.push(cells);
    }
    Ok(table)
}

pub fn berry(args: &BerryArgs) -> Result<Table> {
    let c = &args.common;
    let r = resolve(&c.model)?;
    let u = single_subset(&c.u, &r.design)?;
    let mean_mode = args.mean.or(r.model.mean).map_or(MeanMode::Estimated, MeanMode::Known);
    let reference = args.reference.or_else(|| r.model.known_index(&u));
    let rows = coverage_curve(
        &r.model.spec,
        &u,
        &sizes(&c.n, &[1000, 3000, 10_000, 30_000, 100_000]),
        args.level,
        mean_mode,
        reference,
        args.reps,
        c.seed,
    )?;
    let mut table = Table::new(&["n", "L", "U", "empirical_coverage", "coverage_stderr", "mu3", "sigma2"]);
    table.note("subset", json!(format_subset(&u)));
    table.note(
        "mean",
        match mean_mode {
            MeanMode::Known(m) => num(m),
            MeanMode::Estimated => json!("estimated"),
        },
    );
    table.note("reference", opt(reference));
    for row in rows {
        table.push(vec![
            json!(row.n),
            num(row.low),
            num(row.high),
            num(row.empirical_coverage),
            num(row.coverage_stderr),
            num(row.mu3),
            num(row.sigma2),
        ]);
    }
    Ok(table)
}
