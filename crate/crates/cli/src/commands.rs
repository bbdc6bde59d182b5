use pentagram_core::biphoton::{plan_trials, simulate_counts, sweep, write_sweep_csv};
use pentagram_core::geom::{correlation_form, gram_max, kcbs_spin_form, kcbs_sum, leg_rates};
use pentagram_core::hv::certify::RAY_LIMIT;
use pentagram_core::hv::cone::ConeSummary;
use pentagram_core::hv::scalar::format_rational;
use pentagram_core::hv::{
    enumerate_extremal_rays, is_extremal, lp_feasible, marginals_from_state, ray_expectation,
    Scalar,
};
use pentagram_core::repro::{self, Outcome};
use pentagram_core::search::{detection_scan, optimize_pentagram, DETECTION_TOL};
use pentagram_core::spin::Direction;
use pentagram_core::{AnyModel, Mode, RayFunction, SearchConfig, SpinState, Verdict};
use serde_json::{json, Value};

use crate::input;
use crate::output::{self, Sink};
use crate::{Biphoton, Cli, CliError, Command, Format, ModeArg};

const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INDETERMINATE: u8 = 4;

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Internal(e.to_string()))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eval { .. } => "eval",
        Command::Certify { .. } => "certify",
        Command::Cone { .. } => "cone",
        Command::Ray { .. } => "ray",
        Command::Search { .. } => "search",
        Command::Biphoton { action } => match action {
            Biphoton::Plan { .. } => "biphoton-plan",
            Biphoton::Simulate { .. } => "biphoton-simulate",
            Biphoton::Sweep { .. } => "biphoton-sweep",
        },
        Command::Repro { .. } => "repro",
    }
}

fn require_seed(cli: &Cli, what: &str) -> Result<u64, CliError> {
    cli.global
        .seed
        .ok_or_else(|| CliError::Input(format!("{what} is stochastic and needs --seed")))
}

pub fn run(cli: &Cli) -> Result<u8, CliError> {
    let g = &cli.global;
    let sink = Sink::new(g.output.clone(), g.output_dir.clone(), command_name(&cli.command), g.format);
    let (text, code) = match &cli.command {
        Command::Eval { input } => eval(cli, input)?,
        Command::Certify { input, structure } => certify(cli, input, structure.as_deref())?,
        Command::Cone { structure, input } => cone(cli, structure.as_deref(), input.as_deref())?,
        Command::Ray { input } => ray(cli, input)?,
        Command::Search {
            input,
            concurrence,
            grid,
            restarts,
        } => search(cli, input.as_deref(), *concurrence, grid.as_deref(), *restarts)?,
        Command::Biphoton { action } => biphoton(cli, action)?,
        Command::Repro { criterion } => repro_table(cli, criterion)?,
    };
    sink.write(&text)?;
    Ok(code)
}

fn eval(cli: &Cli, source: &str) -> Result<(String, u8), CliError> {
    let doc = input::load(source)?;
    let normalize = cli.global.normalize;
    let psi = input::state(
        doc.get("state").ok_or_else(|| CliError::Input("eval: missing \"state\"".into()))?,
        normalize,
    )?;
    let p = input::pentagram(doc.get("pentagram").unwrap_or(&json!("regular")), normalize)?;
    let k = kcbs_sum(&p, &psi);
    let (g, dir) = gram_max(&p);
    let rates = leg_rates(&p, &psi);
    let verdict = if k > 2.0 + DETECTION_TOL { "violates" } else { "classical-compatible" };
    let report = json!({
        "state": to_value(&psi)?,
        "pentagram": to_value(&p)?,
        "k": k,
        "spin_form": kcbs_spin_form(&p, &psi),
        "correlation_form": correlation_form(&p, &psi),
        "leg_rates": rates,
        "gram_max": g,
        "gram_direction": to_value(&dir)?,
        "verdict": verdict,
    });
    let text = match cli.global.format {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let mut row = report.clone();
            for (i, r) in rates.iter().enumerate() {
                row[format!("rate{}", i + 1)] = json!(r);
            }
            output::csv_objects(
                &["k", "spin_form", "correlation_form", "gram_max", "rate1", "rate2", "rate3", "rate4", "rate5", "verdict"],
                &[row],
            )?
        }
    };
    Ok((text, 0))
}

/// Model from a certify input: marginal tables, a previous report's
/// "model", a state on a pentagram, or a joint distribution.
fn certify_model(cli: &Cli, doc: &Value, structure: Option<&str>) -> Result<AnyModel, CliError> {
    if doc.get("tables").is_some() {
        return Ok(AnyModel::from_json(doc)?);
    }
    if let Some(m) = doc.get("model") {
        return Ok(AnyModel::from_json(m)?);
    }
    if let Some(st) = doc.get("state") {
        let psi = input::state(st, cli.global.normalize)?;
        let p = input::pentagram(doc.get("pentagram").unwrap_or(&json!("regular")), cli.global.normalize)?;
        return Ok(AnyModel::Float(marginals_from_state(&p, &psi)));
    }
    if doc.get("weights").is_some() {
        let s = input::structure(structure, Some(doc))?;
        return Ok(AnyModel::from_joint_json(doc, &s)?);
    }
    Err(CliError::Input(
        "certify: expected marginal tables, a state (with pentagram) or joint weights".into(),
    ))
}

fn certify(cli: &Cli, source: &str, structure: Option<&str>) -> Result<(String, u8), CliError> {
    let doc = input::load(source)?;
    let model = certify_model(cli, &doc, structure)?;
    let s = model.structure().clone();
    let mode = match cli.global.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Float => Mode::Float,
    };
    let cert = lp_feasible(&model, mode, cli.global.tol)?;
    let code = match cert.verdict {
        Verdict::Feasible => 0,
        Verdict::Infeasible => EXIT_INFEASIBLE,
        Verdict::Indeterminate => EXIT_INDETERMINATE,
    };
    let mut report = cert.to_json(&s);
    report["mode"] = json!(match mode {
        Mode::Exact => "exact",
        Mode::Float => "float",
    });
    report["model"] = model.to_json();
    let text = match cli.global.format {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let row = json!({
                "verdict": report["verdict"],
                "margin": report["margin"],
                "rounding": report.get("rounding").cloned().unwrap_or(Value::Null),
                "expectation": report.pointer("/violated/expectation").cloned().unwrap_or(Value::Null),
            });
            output::csv_objects(&["verdict", "margin", "rounding", "expectation"], &[row])?
        }
    };
    Ok((text, code))
}

fn cone(cli: &Cli, name: Option<&str>, source: Option<&str>) -> Result<(String, u8), CliError> {
    let doc = source.map(input::load).transpose()?;
    let s = input::structure(name, doc.as_ref())?;
    if s.n() > RAY_LIMIT {
        return Err(CliError::Input(format!(
            "structure with {} observables exceeds the enumeration limit of {RAY_LIMIT}",
            s.n()
        )));
    }
    let summary = ConeSummary::new(enumerate_extremal_rays(&s)?);
    let text = match cli.global.format {
        Format::Json => output::json(&summary.to_json(&s))?,
        Format::Csv => {
            let mut header = vec!["class".to_string()];
            header.extend((0..s.monomials().len()).map(|k| s.monomial_name(k)));
            let rows: Vec<Vec<String>> = summary
                .rays
                .iter()
                .map(|r| {
                    let mut row = vec![r.class().as_str().to_string()];
                    row.extend(r.coefficients().iter().map(|c| c.to_string()));
                    row
                })
                .collect();
            output::csv(&header, &rows)?
        }
    };
    Ok((text, 0))
}

fn ray(cli: &Cli, source: &str) -> Result<(String, u8), CliError> {
    let doc = input::load(source)?;
    let (ray_v, model_v) = if let Some(r) = doc.get("ray") {
        (r, doc.get("model"))
    } else if let Some(r) = doc.pointer("/violated/ray") {
        (r, doc.get("model"))
    } else {
        (&doc, None)
    };
    let model = model_v.map(AnyModel::from_json).transpose()?;
    let ray = RayFunction::from_json(ray_v, model.as_ref().map(AnyModel::structure))?;
    let min_value = ray.values().iter().min().map(|v| v.to_string());
    let mut report = json!({
        "ray": ray.to_json(),
        "extremal": is_extremal(&ray),
        "min_value": min_value,
        "zero_set_size": ray.zero_set().len(),
    });
    if let Some(m) = &model {
        match m {
            AnyModel::Exact(m) => {
                let e = ray_expectation(&ray, m)?;
                report["expectation"] = json!(e.to_f64_lossy());
                report["expectation_exact"] = json!(format_rational(&e));
            }
            AnyModel::Float(m) => {
                report["expectation"] = json!(ray_expectation(&ray, m)?);
            }
        }
        report["model"] = m.to_json();
    }
    let text = match cli.global.format {
        Format::Json => output::json(&report)?,
        Format::Csv => output::csv_objects(
            &["extremal", "min_value", "zero_set_size", "expectation"],
            &[json!({
                "extremal": report["extremal"],
                "min_value": report["min_value"],
                "zero_set_size": report["zero_set_size"],
                "expectation": report.get("expectation").cloned().unwrap_or(Value::Null),
            })],
        )?,
    };
    Ok((text, 0))
}

fn search(
    cli: &Cli,
    source: Option<&str>,
    concurrence: Option<f64>,
    grid: Option<&str>,
    restarts: Option<usize>,
) -> Result<(String, u8), CliError> {
    let doc = source.map(input::load).transpose()?;
    let config_v = doc.as_ref().and_then(|d| d.get("config"));
    let mut cfg: SearchConfig = match config_v {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| CliError::Input(format!("search config: {e}")))?,
        None => SearchConfig::default(),
    };
    match (cli.global.seed, config_v.and_then(|v| v.get("seed"))) {
        (Some(s), _) => cfg.seed = s,
        (None, Some(_)) => {}
        (None, None) => return Err(CliError::Input("search is stochastic and needs --seed (or config.seed)".into())),
    }
    if let Some(r) = restarts {
        cfg.restarts = r;
    }
    cfg.validate()?;

    if let Some(grid) = grid {
        let values = input::number_list(grid, "--grid")?;
        let rows = detection_scan(&values, &cfg)?;
        let rows_v: Vec<Value> = rows.iter().map(to_value).collect::<Result<_, _>>()?;
        let text = match cli.global.format {
            Format::Json => output::json(&json!({"config": to_value(&cfg)?, "rows": rows_v}))?,
            Format::Csv => output::csv_objects(&["c", "k", "violated", "flagged"], &rows_v)?,
        };
        return Ok((text, 0));
    }

    let psi = match (concurrence, &doc) {
        (Some(c), _) => SpinState::with_concurrence(c)?,
        (None, Some(d)) => input::state(
            d.get("state").ok_or_else(|| CliError::Input("search: missing \"state\"".into()))?,
            cli.global.normalize,
        )?,
        (None, None) => {
            return Err(CliError::Input("search needs --input, --concurrence or --grid".into()))
        }
    };
    let result = optimize_pentagram(&psi, &cfg)?;
    let mut report = to_value(&result)?;
    report["state"] = to_value(&psi)?;
    report["config"] = to_value(&cfg)?;
    let text = match cli.global.format {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let rows: Vec<Value> = result.restarts.iter().map(to_value).collect::<Result<_, _>>()?;
            output::csv_objects(&["index", "k", "iterations"], &rows)?
        }
    };
    Ok((text, 0))
}

fn biphoton(cli: &Cli, action: &Biphoton) -> Result<(String, u8), CliError> {
    let format = cli.global.format;
    let text = match action {
        Biphoton::Plan {
            rate,
            threshold,
            confidence,
        } => {
            let plan = to_value(&plan_trials(*rate, *threshold, *confidence)?)?;
            match format {
                Format::Json => output::json(&plan)?,
                Format::Csv => output::csv_objects(
                    &["true_rate", "threshold", "confidence", "trials", "wrong_side", "stable_trials"],
                    &[plan],
                )?,
            }
        }
        Biphoton::Simulate {
            rate,
            trials,
            confidence,
        } => {
            let seed = require_seed(cli, "biphoton simulate")?;
            let mut r = to_value(&simulate_counts(*rate, *trials, seed, *confidence)?)?;
            match format {
                Format::Json => output::json(&r)?,
                Format::Csv => {
                    r["ci_low"] = r["ci"][0].clone();
                    r["ci_high"] = r["ci"][1].clone();
                    output::csv_objects(
                        &["rate", "trials", "seed", "coincidences", "estimate", "confidence", "ci_low", "ci_high"],
                        &[r],
                    )?
                }
            }
        }
        Biphoton::Sweep {
            axis,
            angles,
            trials,
            confidence,
            visibility,
        } => {
            let seed = require_seed(cli, "biphoton sweep")?;
            let a = input::number_list(axis, "--axis")?;
            let a: [f64; 3] = a
                .try_into()
                .map_err(|_| CliError::Input("--axis needs three components".into()))?;
            let p = Direction::parse(a, cli.global.normalize)?;
            let angles = input::number_list(angles, "--angles")?;
            let rows = sweep(&p, &angles, *trials, seed, *confidence, *visibility)?;
            match format {
                Format::Json => output::json(&json!({
                    "axis": to_value(&p)?,
                    "trials": trials,
                    "seed": seed,
                    "confidence": confidence,
                    "visibility": visibility,
                    "rows": to_value(&rows)?,
                }))?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_sweep_csv(&rows, &mut buf)?;
                    String::from_utf8(buf).map_err(|e| CliError::Internal(e.to_string()))?
                }
            }
        }
    };
    Ok((text, 0))
}

fn repro_table(cli: &Cli, only: &[u8]) -> Result<(String, u8), CliError> {
    let ids: Vec<u8> = if only.is_empty() { (1..=11).collect() } else { only.to_vec() };
    let mut outcomes: Vec<Outcome> = Vec::new();
    for id in ids {
        let o = repro::criterion(id).ok_or_else(|| CliError::Input(format!("no criterion {id}")))?;
        eprintln!(
            "{:>2} {:<30} {} ({:.2} s) {}",
            o.id,
            o.title,
            if o.passed { "PASS" } else { "FAIL" },
            o.seconds,
            o.detail
        );
        outcomes.push(o);
    }
    let all = outcomes.iter().all(|o| o.passed);
    let rows: Vec<Value> = outcomes.iter().map(to_value).collect::<Result<_, _>>()?;
    let text = match cli.global.format {
        Format::Json => output::json(&json!({"passed": all, "criteria": rows}))?,
        Format::Csv => output::csv_objects(&["id", "title", "passed", "seconds", "detail"], &rows)?,
    };
    Ok((text, if all { 0 } else { 1 }))
}
