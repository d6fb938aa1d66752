//! Scenario runners. Each turns a validated scenario into a report of
//! tables, guards and checks; the caller decides where it is written.

use crate::config::{
    DensityOracle, DensityScenario, ExperimentConfig, LambdaChoice, MollifyScenario,
    NeumannScenario, ResolventScenario, Scenario, SimulateScenario,
};
use crate::output::{write_json, write_report, Check, ScenarioReport, Summary, Table};
use anyhow::{Context, Result};
use levy_core::approx::{mollify_study, truncation_error};
use levy_core::density::{fractional_apply, invert, InversionSpec};
use levy_core::kernel::KernelOperator;
use levy_core::lattice::LatticeField;
use levy_core::perturb::{find_lambda0, ContractionCurve, Perturbation};
use levy_core::resolvent::{
    gamma_ceiling, holder_moduli, ModulusProbe, SpaceTimeFunction, SpectralGenerator,
};
use levy_core::simulate::{
    dynkin_residual, estimate_v, mc_vs_neumann, Sampler, SamplerModel, SpaceTimeTrig,
    TrigPolynomial,
};
use serde_json::json;
use std::path::Path;

/// Runs one scenario. Numerical failures (a guard tripping inside the
/// library, a contraction constant that is too large) become a failed
/// report rather than an error, so the remaining scenarios still run.
pub fn run_scenario(scenario: &Scenario) -> ScenarioReport {
    let config = serde_json::to_value(scenario).unwrap_or_default();
    let mut report = ScenarioReport::new(scenario.name(), scenario.kind(), config);
    let outcome = match scenario {
        Scenario::Density(s) => run_density(s, &mut report),
        Scenario::Resolvent(s) => run_resolvent(s, &mut report),
        Scenario::Neumann(s) => run_neumann(s, &mut report),
        Scenario::Mollify(s) => run_mollify(s, &mut report),
        Scenario::Simulate(s) => run_simulate(s, &mut report),
    };
    if let Err(e) = outcome {
        report.fail(format!("{e:#}"));
    }
    report.finish()
}

/// Runs every scenario in order and writes the artefacts to `out`. An
/// empty scenario list writes nothing.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ScenarioReport>> {
    let mut reports = Vec::new();
    for scenario in &cfg.scenarios {
        let report = run_scenario(scenario);
        write_report(out, &report)?;
        reports.push(report);
    }
    if !reports.is_empty() {
        write_json(
            &out.join("summary.json"),
            &Summary::from_reports(&cfg.name, &reports),
        )?;
    }
    Ok(reports)
}

fn run_density(s: &DensityScenario, report: &mut ScenarioReport) -> Result<()> {
    let triple = s.triple.build()?;
    let dim = triple.dim();
    let mut spec = InversionSpec::new(s.lattice.grid(dim)?);
    if let Some(tol) = s.boundary_tol {
        spec = spec.with_boundary_tol(tol);
    }
    if s.fixed_extent {
        spec = spec.fixed_extent();
    }
    report.guard("tail_tol", spec.tail_tol);
    report.guard("boundary_tol", spec.boundary_tol);
    let inv = invert(&triple, s.t, s.multiplier, &spec)?;
    let d = &inv.diagnostics;
    report.guard("tail", d.tail);
    report.guard("boundary_ratio", d.boundary_ratio);
    report.guard("padding", d.padding as f64);
    report.guard("mass", d.mass);
    report.guard("ringing", d.ringing);
    report.guard("imag_residual", d.imag_residual);

    let field = inv.window();
    // a symmetric α = 1 law with Re ψ(u) = c|u| is Cauchy with scale c t
    let scale = s.t * triple.exponent(&[1.0]).re;
    let oracle = |x: &[f64]| scale / (std::f64::consts::PI * (scale * scale + x[0] * x[0]));
    let mut columns: Vec<&str> = ["x", "y", "z"][..dim].to_vec();
    columns.push("value");
    if s.oracle.is_some() {
        columns.extend(["oracle", "abs_error", "tolerance"]);
    }
    let mut table = Table::new(&columns);
    let mut worst: f64 = 0.0;
    for i in 0..field.grid.len() {
        let x = field.grid.position(i);
        if x.iter().any(|c| c.abs() > s.window) {
            continue;
        }
        let v = field.values[i];
        let mut row = x.clone();
        row.push(v);
        if let Some(DensityOracle::Cauchy) = s.oracle {
            let o = oracle(&x);
            worst = worst.max((v - o).abs());
            row.extend([o, (v - o).abs(), s.tolerance]);
        }
        table.push(row);
    }
    if s.oracle.is_some() {
        report.check(Check::below("oracle_sup_error", worst, s.tolerance));
    }
    let norms: Vec<_> = s
        .lr_norms
        .iter()
        .map(|&r| inv.field.lr_norm(r).map(|v| json!({ "r": r, "norm": v })))
        .collect::<levy_core::Result<_>>()?;
    report.results = json!({ "diagnostics": d, "lr_norms": norms, "rows": table.rows.len() });
    report.tables.push(table);
    Ok(())
}

fn run_resolvent(s: &ResolventScenario, report: &mut ScenarioReport) -> Result<()> {
    let triple = s.triple.build()?;
    let dim = triple.dim();
    let alpha = triple.stable().alpha();
    let mut lambdas = s.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let mut moduli = Table::new(&[
        "lambda",
        "delta",
        "C_lambda_measured",
        "C_lambda_fractional",
        "C_lambda_ceiling",
        "c4",
        "argmax_z",
        "at_edge",
        "saturated",
    ]);
    let probe = ModulusProbe::new(dim);
    let norm_spec = InversionSpec::new(s.norm_lattice.grid(dim)?);
    for &delta in &s.deltas {
        let c4 = fractional_apply(&triple, delta, 1.0, &norm_spec)?
            .field
            .lr_norm(1.0)?;
        let mut prev = f64::INFINITY;
        for m in holder_moduli(&triple, &lambdas, delta, false, &probe)? {
            let ceiling = gamma_ceiling(c4, delta, alpha, m.lambda);
            moduli.push(vec![
                m.lambda,
                delta,
                m.difference,
                m.fractional,
                ceiling,
                c4,
                m.argmax_z,
                m.at_edge as u8 as f64,
                m.saturated as f64,
            ]);
            let tag = format!("delta={delta},lambda={}", m.lambda);
            report.check(Check::at_most(
                format!("C_lambda<=ceiling[{tag}]"),
                m.difference,
                ceiling,
            ));
            report.check(Check::holds(
                format!("interior_maximiser[{tag}]"),
                !m.at_edge,
            ));
            if prev.is_finite() {
                report.check(Check::below(
                    format!("C_lambda_decreasing[{tag}]"),
                    m.difference,
                    prev,
                ));
            }
            prev = m.difference;
        }
    }
    if !moduli.rows.is_empty() {
        report.tables.push(moduli);
    }

    if let (Some(lattice), Some(source)) = (&s.lattice, &s.source) {
        let grid = lattice.grid(dim)?;
        let g = source.build(grid)?;
        let gen = SpectralGenerator::new(&triple, grid)?;
        let one = SpaceTimeFunction::frozen(LatticeField::from_fn(grid, |_| 1.0));
        let mut table = Table::named(
            "equation",
            &[
                "lambda",
                "constant_error",
                "sup_ratio",
                "residual",
                "residual_tol",
                "g_sup",
            ],
        );
        for &lambda in &lambdas {
            let r1 = gen.apply_r(lambda, &one, 0.0)?;
            let constant_error = r1
                .values
                .iter()
                .map(|v| (v - 1.0 / lambda).abs())
                .fold(0.0, f64::max);
            let rg = gen.resolve(lambda, &g)?;
            let sup_ratio = rg.sup_norm() * lambda / g.sup_norm().max(f64::MIN_POSITIVE);
            let residual = gen.identity_residual(lambda, &g, s.residual_dt)?;
            table.push(vec![
                lambda,
                constant_error,
                sup_ratio,
                residual,
                s.residual_tol,
                g.sup_norm(),
            ]);
            report.check(Check::at_most(
                format!("R_lambda_1=1/lambda[lambda={lambda}]"),
                constant_error,
                1e-8,
            ));
            report.check(Check::at_most(
                format!("lambda|R_lambda g|/|g|<=1[lambda={lambda}]"),
                sup_ratio,
                1.0 + 1e-8,
            ));
            report.check(Check::below(
                format!("equation_residual[lambda={lambda}]"),
                residual,
                s.residual_tol,
            ));
        }
        report.tables.push(table);
    }
    report.guard("alpha", alpha);
    Ok(())
}

fn run_neumann(s: &NeumannScenario, report: &mut ScenarioReport) -> Result<()> {
    let triple = s.triple.build()?;
    let dim = triple.dim();
    let model = s.kernel.build()?;
    let curve = ContractionCurve::measure(&triple, &model, &ModulusProbe::new(dim))?;
    report.guard("B_M", curve.b_m);
    report.guard("delta", curve.delta());
    let mut results = serde_json::Map::new();
    let lambda = match s.lambda {
        LambdaChoice::Fixed { value } => value,
        LambdaChoice::Auto {
            factor,
            log2_lo,
            log2_hi,
        } => {
            let grid: Vec<f64> = (log2_lo..=log2_hi).map(|j| 2f64.powi(j)).collect();
            let l0 = find_lambda0(|l| curve.k(l), &grid)?;
            results.insert("lambda0".into(), json!(l0));
            factor * l0.lambda0
        }
    };
    let k = curve.k(lambda)?;
    let m = curve.modulus(lambda)?;
    report.guard("lambda", lambda);
    report.guard("k_lambda", k);
    results.insert("modulus".into(), json!(m));
    report.check(Check::below("k_lambda<1/2", k, 0.5));
    report.check(Check::holds("interior_maximiser", !m.at_edge));
    if k >= 0.5 {
        results.insert(
            "diagnostic".into(),
            json!(format!(
                "contraction fails: k_lambda = {k:.6} >= 1/2 at lambda = {lambda}; the series is not formed. \
                 Increase lambda (k_lambda decreases in lambda) or reduce B_M = {:.4}.",
                curve.b_m
            )),
        );
        report.results = serde_json::Value::Object(results);
        return Ok(());
    }

    let grid = s.lattice.grid(dim)?;
    let g = s.source.build(grid)?;
    let pert = Perturbation::new(&triple, &model, grid)?;
    let series = pert.neumann(lambda, &g, k, s.series_tol)?;
    let residual = pert.series_residual(&series, &g, 1e-4)?;
    let mut trace = Table::new(&[
        "i",
        "term_sup_norm",
        "source_sup_norm",
        "term_ratio",
        "source_ratio",
        "ratio_bound",
    ]);
    for i in 0..series.term_norms.len() {
        let ratio = |v: &[f64]| {
            if i == 0 || v[i - 1] == 0.0 {
                f64::NAN
            } else {
                v[i] / v[i - 1]
            }
        };
        trace.push(vec![
            i as f64,
            series.term_norms[i],
            series.source_norms[i],
            ratio(&series.term_norms),
            ratio(&series.source_norms),
            k + 0.02,
        ]);
        if i > 0 {
            report.check(Check::at_most(
                format!("term_ratio[{i}]"),
                ratio(&series.term_norms),
                k + 0.02,
            ));
            report.check(Check::at_most(
                format!("source_ratio[{i}]"),
                ratio(&series.source_norms),
                k + 0.02,
            ));
        }
    }
    let value_sup = series.value.sup_norm();
    let g_sup = g.sup_norm();
    report.check(Check::at_most(
        "|G_lambda g|<=2|g|/lambda",
        value_sup,
        2.0 * g_sup / lambda,
    ));
    report.guard("truncation_bound", series.truncation_bound);
    report.guard("series_residual", residual);
    results.insert(
        "series".into(),
        json!({
            "terms": series.term_norms.len(),
            "value_sup": value_sup,
            "g_sup": g_sup,
            "truncation_bound": series.truncation_bound,
            "residual": residual,
        }),
    );
    report.results = serde_json::Value::Object(results);
    report.tables.push(trace);
    Ok(())
}

fn run_mollify(s: &MollifyScenario, report: &mut ScenarioReport) -> Result<()> {
    let model = s.kernel.build()?;
    let grid = s.lattice.grid(model.dim)?;
    let compensated = s.alpha > 1.0;
    report.guard("B_M", model.beta_moment_bound());
    report.guard("f_C2", s.test_function.c_norm(2));
    report.guard("f_C3", s.test_function.c_norm(3));
    let mut results = serde_json::Map::new();
    if !s.ns.is_empty() {
        let (rows, slope) = mollify_study(&s.test_function, &model, compensated, &s.ns, grid)?;
        let mut table = Table::new(&["n", "measured_sup", "bound"]);
        for r in &rows {
            table.push(vec![r.n, r.measured, r.bound]);
            report.check(Check::at_most(
                format!("mollify[n={}]", r.n),
                r.measured,
                r.bound,
            ));
        }
        if let Some(max) = s.max_slope {
            report.check(Check::at_most("mollify_slope", slope, max));
        }
        results.insert("slope".into(), json!(slope));
        report.tables.push(table);
    }
    if !s.deltas.is_empty() {
        let mut table = Table::named(
            "truncation",
            &["delta_cut", "measured_sup", "bound", "rate_bound"],
        );
        for &d in &s.deltas {
            let r = truncation_error(&s.test_function, &model, s.alpha, d, grid)?;
            table.push(vec![r.delta_cut, r.measured, r.bound, r.rate_bound]);
            report.check(Check::at_most(
                format!("truncation[delta={d}]"),
                r.measured,
                r.bound,
            ));
        }
        report.tables.push(table);
    }
    report.results = serde_json::Value::Object(results);
    Ok(())
}

fn run_simulate(s: &SimulateScenario, report: &mut ScenarioReport) -> Result<()> {
    let triple = s.triple.build()?;
    let dim = triple.dim();
    let alpha = triple.stable().alpha();
    let kernel = s.kernel.as_ref().map(|k| k.build()).transpose()?;
    let model = SamplerModel::from_triple(&triple);
    let fine = Sampler::new(model.clone(), kernel.clone(), s.dt, s.scheme, s.seed)?;
    let coarse = Sampler::new(
        model,
        kernel.clone(),
        2.0 * s.dt,
        s.scheme,
        s.seed.wrapping_add(1),
    )?;
    report.guard("dt", s.dt);
    report.guard("jump_prob_per_step", fine.rate_bound() * s.dt);
    report.guard("jump_prob_limit", 0.1);
    let mut results = serde_json::Map::new();
    let horizon = s.source.horizon;
    let t0 = 0.0;

    // the source is evaluated as the trigonometric polynomial it is on the lattice
    let grid = match &s.lattice {
        Some(l) => l.grid(dim)?,
        None => levy_core::lattice::Grid::new(dim, 512, 8.0 * std::f64::consts::PI)?,
    };
    let g = s.source.build(grid)?;
    let trig = SpaceTimeTrig::new(&g, 1e-13);
    let g_sup = g.sup_norm();
    let est = |sampler: &Sampler| {
        estimate_v(
            sampler,
            s.paths,
            t0,
            &s.start,
            horizon,
            s.lambda,
            |t, v| trig.eval(t, v),
            g_sup,
        )
    };
    let (vf, vc) = (est(&fine)?, est(&coarse)?);
    let mut table = Table::new(&[
        "dt",
        "paths",
        "mean",
        "stderr",
        "horizon_bias",
        "richardson",
    ]);
    let richardson = (vf.mean - vc.mean).abs();
    table.push(vec![
        s.dt,
        s.paths as f64,
        vf.mean,
        vf.stderr,
        0.0,
        richardson,
    ]);
    table.push(vec![
        2.0 * s.dt,
        s.paths as f64,
        vc.mean,
        vc.stderr,
        0.0,
        richardson,
    ]);
    report.tables.push(table);

    if s.compare_neumann {
        let kernel_model = kernel
            .clone()
            .unwrap_or_else(|| levy_core::kernel::JumpKernelModel::zero(dim, alpha / 2.0));
        let curve = ContractionCurve::measure(&triple, &kernel_model, &ModulusProbe::new(dim))?;
        let k = curve.k(s.lambda)?;
        report.guard("k_lambda", k);
        report.check(Check::below("k_lambda<1/2", k, 0.5));
        if k < 0.5 {
            let pert = Perturbation::new(&triple, &kernel_model, grid)?;
            let series = pert.neumann(s.lambda, &g, k, 1e-9)?;
            let residual = pert.series_residual(&series, &g, 1e-4)?;
            let systematic = match s.kernel.as_ref().and_then(|k| k.delta_cut) {
                Some(d) => {
                    d.powf(alpha - kernel_model.beta) * kernel_model.beta_moment_bound() * g_sup
                        / s.lambda
                }
                None => 0.0,
            };
            let cv = mc_vs_neumann(
                &series, residual, &fine, &coarse, s.paths, t0, &s.start, &g, systematic,
            )?;
            report.check(Check::at_most("|MC-Neumann|", cv.difference, cv.allowance));
            let mut t = Table::named(
                "comparison",
                &[
                    "lambda",
                    "k_lambda",
                    "paths",
                    "mc_mean",
                    "mc_stderr",
                    "mc_coarse_mean",
                    "neumann",
                    "neumann_truncation",
                    "neumann_discretization",
                    "richardson",
                    "horizon_bias",
                    "truncation_systematic",
                    "difference",
                    "allowance",
                ],
            );
            t.push(vec![
                cv.lambda,
                cv.k_lambda,
                cv.paths as f64,
                cv.mc_mean,
                cv.mc_stderr,
                cv.mc_coarse_mean,
                cv.neumann,
                cv.neumann_truncation,
                cv.neumann_discretization,
                cv.richardson,
                cv.horizon_bias,
                cv.truncation_systematic,
                cv.difference,
                cv.allowance,
            ]);
            report.tables.push(t);
            results.insert("comparison".into(), json!(cv));
        }
    }

    if !s.dynkin.is_empty() {
        let gen = SpectralGenerator::new(&triple, grid)?;
        let k_op = kernel
            .as_ref()
            .map(|m| KernelOperator::new(m, grid, alpha > 1.0))
            .transpose()?;
        let mut t = Table::named(
            "dynkin",
            &["function", "lhs", "rhs", "residual", "stderr", "allowance"],
        );
        for (i, f) in s.dynkin.iter().enumerate() {
            let field = f.field(grid);
            let mut gf = gen.apply_generator(&field);
            if let Some(op) = &k_op {
                gf = gf.add(&op.apply(&field)?)?;
            }
            let (fp, gp) = (
                TrigPolynomial::from_field(&field, 1e-13),
                TrigPolynomial::from_field(&gf, 1e-13),
            );
            let rf = dynkin_residual(&fine, s.paths, t0, &s.start, horizon, &fp, &gp, 0.0)?;
            let rc = dynkin_residual(&coarse, s.paths, t0, &s.start, horizon, &fp, &gp, 0.0)?;
            let r = rf.with_allowance((rf.residual - rc.residual).abs());
            t.push(vec![
                i as f64,
                r.lhs,
                r.rhs,
                r.residual,
                r.stderr,
                r.allowance,
            ]);
            report.check(Check::at_most(
                format!("dynkin[{i}]"),
                r.residual.abs(),
                3.0 * r.stderr + r.allowance,
            ));
        }
        report.tables.push(t);
    }

    if s.record_paths > 0 {
        let mut columns = vec!["path", "t"];
        columns.extend(&["x", "y", "z"][..dim]);
        let mut t = Table::named("paths", &columns);
        for p in 0..s.record_paths {
            let sample = fine.sample_path(p as u64, t0, &s.start, horizon)?;
            for (j, state) in sample.states.iter().enumerate() {
                let mut row = vec![p as f64, t0 + j as f64 * s.dt];
                row.extend(state);
                t.push(row);
            }
        }
        report.tables.push(t);
    }
    results.insert("estimate".into(), json!({ "fine": vf, "coarse": vc }));
    report.results = serde_json::Value::Object(results);
    Ok(())
}

/// Loads every `*.json` config under `paths` (files or directories, sorted).
pub fn collect_configs(
    paths: &[std::path::PathBuf],
) -> Result<Vec<(std::path::PathBuf, ExperimentConfig)>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<_> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files
        .into_iter()
        .map(|f| ExperimentConfig::load(&f).map(|c| (f, c)))
        .collect()
}
