use std::fs;
use std::path::{Path, PathBuf};

use expvar_core::blockpca::{
    certify_pca_optimality, find_parasitic_up, solve_weighted, AscentOptions, BlockPcaSolution,
    Init, MaximizerKind, SolveOptions,
};
use expvar_core::expvar::{
    basis_for, normalized_var, optimal_projected_var, projected_var, projected_var_weighted,
    projections, report_with, subspace_var, BasisRule, Components, Definition, FixedPointOptions,
    Loadings, ReportOptions, Weights,
};
use expvar_core::linalg::{is_signed_permutation_of, DataMatrix};
use expvar_core::report::{ranking_to_json, run_pev_curves, run_ranking, ExperimentConfig, Metadata};
use expvar_core::witness::{
    default_normalized_counterexample, orthogonal_components_anomaly, orthogonal_loadings_anomaly, Witness,
};
use expvar_core::{Error, PartialResult};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::io::{emit, matrix_csv, matrix_json, num, pretty, read_matrix, vector_json};
use crate::{
    Cli, CliError, Command, ComputeArgs, DemoArgs, DemoName, ExperimentArgs, ExperimentKind, Format, Method,
    SolveArgs,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Compute(args) => compute(args, cli.format.unwrap_or(Format::Json), out),
        Command::Solve(args) => solve(args, cli.seed.unwrap_or(0), cli.format.unwrap_or(Format::Json), out),
        Command::Experiment(args) => experiment(args, cli.seed, cli.format, out),
        Command::Demo(args) => {
            if cli.format == Some(Format::Csv) {
                return Err(CliError::Input("demo output is JSON only".into()));
            }
            demo(args, cli.seed.unwrap_or(0), out)
        }
    }
}

fn definition_of(method: Method) -> Option<Definition> {
    match method {
        Method::All => None,
        Method::Subsp => Some(Definition::Subspace),
        Method::QrNorm => Some(Definition::QrNorm),
        Method::UpNorm => Some(Definition::UpNorm),
        Method::QrProj => Some(Definition::QrProj),
        Method::UpProj => Some(Definition::UpProj),
        Method::Optproj => Some(Definition::OptProj),
    }
}

/// Value of one definition, exactly as the library computes it.
pub fn single_value(
    a: &DataMatrix,
    z: &Loadings,
    def: Definition,
    weights: Option<&Weights>,
    qr_rule: BasisRule,
) -> Result<f64, CliError> {
    let value = match (def, weights) {
        (Definition::Subspace, None) => subspace_var(a, z)?,
        (Definition::QrNorm, None) => normalized_var(a, z, qr_rule)?,
        (Definition::UpNorm, None) => normalized_var(a, z, BasisRule::Up)?,
        (Definition::QrProj, None) => projected_var(a, z, qr_rule)?,
        (Definition::UpProj, None) => projected_var(a, z, BasisRule::Up)?,
        (Definition::QrProj, Some(w)) => projected_var_weighted(a, z, qr_rule, w)?,
        (Definition::UpProj, Some(w)) => projected_var_weighted(a, z, BasisRule::Up, w)?,
        (Definition::OptProj, w) => optimal_projected_var(a, z, w, FixedPointOptions::default())?.value,
        (_, Some(_)) => {
            return Err(CliError::Input(
                "--weights applies to the projected definitions only (optproj, qr-proj, up-proj)".into(),
            ))
        }
    };
    Ok(value)
}

fn compute(args: &ComputeArgs, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let a = DataMatrix::new(read_matrix(&args.data)?)?;
    let zm = read_matrix(&args.loadings)?;
    if zm.nrows() != a.p() {
        return Err(CliError::Input(format!(
            "InvalidInput: Z has {} rows but A has {} columns",
            zm.nrows(),
            a.p()
        )));
    }
    let z = if args.normalize { Loadings::normalized(zm)? } else { Loadings::new(zm)? };
    let weights = args.weights.clone().map(Weights::new).transpose()?;
    let qr_rule = if args.no_pivot { BasisRule::QrUnpivoted } else { BasisRule::Qr };
    let comps = Components::new(&a, &z)?;
    let total_a = a.total_variance();

    // (definition, value, pev)
    let rows: Vec<(Definition, f64, Option<f64>)> = match definition_of(args.method) {
        None => {
            if weights.is_some() {
                return Err(CliError::Input("--weights needs a single projected --method".into()));
            }
            let opts = ReportOptions {
                qr_pivot: !args.no_pivot,
                fixed_point: FixedPointOptions::default(),
            };
            let r = report_with(&a, &z, opts)?;
            Definition::ALL.iter().map(|&d| (d, r.value(d), Some(r.pev(d)))).collect()
        }
        Some(def) => {
            let v = single_value(&a, &z, def, weights.as_ref(), qr_rule)?;
            let pev = weights.is_none().then(|| v / total_a);
            vec![(def, v, pev)]
        }
    };

    let text = match format {
        Format::Csv => {
            let mut s = String::from("definition,value,pev\n");
            for (d, v, pev) in &rows {
                let pev = pev.map(expvar_core::report::format_sig).unwrap_or_default();
                s.push_str(&format!("{},{},{}\n", d.short_name(), expvar_core::report::format_sig(*v), pev));
            }
            s
        }
        Format::Json => {
            let results: Vec<Value> = rows
                .iter()
                .map(|(d, v, pev)| json!({"definition": d.short_name(), "value": num(*v), "pev": pev.map(num)}))
                .collect();
            let mut obj = Map::new();
            obj.insert("n".into(), json!(a.n()));
            obj.insert("p".into(), json!(a.p()));
            obj.insert("m".into(), json!(z.m()));
            if let Some(w) = &weights {
                obj.insert("weights".into(), vector_json(w.values()));
            }
            obj.insert("qr_pivot".into(), json!(!args.no_pivot));
            obj.insert("results".into(), Value::Array(results));
            obj.insert("total_var_y".into(), num(comps.total_variance()));
            obj.insert("total_var_a".into(), num(total_a));
            obj.insert("pca_bound".into(), num(a.svd().pca_bound(z.m())));
            pretty(&Value::Object(obj))
        }
    };
    emit(out, &text)
}

fn parse_weights(arg: &str, m: usize) -> Result<Weights, CliError> {
    match arg {
        "decreasing" => Ok(Weights::decreasing(m)),
        "constant" => Ok(Weights::ones(m)),
        list => {
            let mu = list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Input(format!("--weights: '{s}' is not a number")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if mu.len() != m {
                return Err(CliError::Input(format!("--weights has {} entries for m = {m}", mu.len())));
            }
            Ok(Weights::new(mu)?)
        }
    }
}

fn solution_json(a: &DataMatrix, sol: &BlockPcaSolution, weights: &Weights) -> Value {
    let mut obj = Map::new();
    obj.insert("m".into(), json!(sol.z_star.ncols()));
    obj.insert("weights".into(), vector_json(weights.values()));
    obj.insert("z_star".into(), matrix_json(&sol.z_star));
    obj.insert("objective".into(), num(sol.objective));
    obj.insert("optimum".into(), num(sol.optimum));
    obj.insert("matched_svd".into(), json!(sol.matched_svd));
    obj.insert("converged".into(), json!(sol.converged));
    obj.insert("iterations".into(), json!(sol.iterations));
    obj.insert("degenerate_spectrum".into(), json!(sol.degenerate_spectrum));
    if let Ok(z) = Loadings::new(sol.z_star.clone()) {
        if let Ok(c) = certify_pca_optimality(a, &z) {
            obj.insert("pca_optimal".into(), json!(c.is_pca_optimal));
        }
    }
    let mut notes = Vec::new();
    if !weights.is_strictly_decreasing() {
        notes.push(
            "weights are not strictly decreasing: V_m is one solution among many, \
             so matched_svd may be false at an optimal point",
        );
    }
    if sol.degenerate_spectrum {
        notes.push("tied singular values: the principal loadings are not unique");
    }
    if !notes.is_empty() {
        obj.insert("note".into(), json!(notes.join("; ")));
    }
    Value::Object(obj)
}

fn solve(args: &SolveArgs, seed: u64, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let a = DataMatrix::new(read_matrix(&args.data)?)?;
    if args.m == 0 || args.m > a.rank() {
        return Err(CliError::Input(format!(
            "InvalidInput: m = {} must lie in 1..={} (the rank of A)",
            args.m,
            a.rank()
        )));
    }
    let weights = parse_weights(&args.weights, args.m)?;
    let opts = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SolveOptions::default()
    };
    let (sol, failure) = match solve_weighted(&a, args.m, &weights, opts, Init::Random { seed }) {
        Ok(sol) => (sol, None),
        Err(Error::NonConverged {
            iterations,
            objective,
            partial: PartialResult::Solution(sol),
        }) => (
            *sol,
            Some(CliError::NonConverged(format!(
                "no stationary point after {iterations} iterations (objective {objective})"
            ))),
        ),
        Err(e) => return Err(e.into()),
    };
    let text = match format {
        Format::Json => pretty(&solution_json(&a, &sol, &weights)),
        Format::Csv => matrix_csv(&sol.z_star),
    };
    emit(out, &text)?;
    failure.map_or(Ok(()), Err)
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn experiment(args: &ExperimentArgs, seed: Option<u64>, format: Option<Format>, out: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = Some(t);
    }
    let scheme = cfg.scheme()?;
    match args.kind {
        ExperimentKind::PevCurves => {
            let grid = cfg.grid()?;
            let trials = cfg.curve_trials();
            let table = run_pev_curves(&scheme, &grid, trials)?;
            let mut meta = Metadata::new(&scheme, &grid, trials);
            meta.missing = Some(table.missing.clone());
            match format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    emit(out, &table.to_csv())?;
                    match out {
                        Some(path) => fs::write(sidecar(path), meta.to_json())
                            .map_err(|e| CliError::Input(format!("{}: {e}", sidecar(path).display())))?,
                        None => eprint!("{}", meta.to_json()),
                    }
                }
                Format::Json => {
                    let rows: Vec<Value> = table
                        .rows
                        .iter()
                        .map(|r| {
                            json!({
                                "scheme": r.scheme.as_str(),
                                "lambda": num(r.lambda),
                                "definition": r.definition.short_name(),
                                "mean_pev": num(r.mean_pev),
                                "sd_pev": num(r.sd_pev),
                                "trials": r.trials,
                            })
                        })
                        .collect();
                    emit(out, &pretty(&json!({"metadata": meta, "rows": rows})))?;
                }
            }
        }
        ExperimentKind::Ranking => {
            if format == Some(Format::Csv) {
                return Err(CliError::Input("ranking output is JSON only".into()));
            }
            let grid = cfg.ranking_grid()?;
            let trials = cfg.ranking_trials();
            let run = run_ranking(&scheme, &grid, trials, &cfg.epsilons(), cfg.max_pairs())?;
            let mut meta = Metadata::new(&scheme, &grid, trials);
            meta.missing = Some(run.missing.clone());
            emit(out, &ranking_to_json(&run.reports, &meta))?;
        }
    }
    Ok(())
}

fn diag(values: &[f64]) -> Result<DataMatrix, CliError> {
    Ok(DataMatrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))?)
}

fn witness_json(w: &Witness, relation: &str, holds: bool) -> Value {
    let y = w.a.values() * w.z.matrix();
    json!({
        "a": matrix_json(w.a.values()),
        "z": matrix_json(w.z.matrix()),
        "y": matrix_json(&y),
        "value": num(w.value),
        "total_var_y": num(w.total_var_y),
        "max_component_correlation": num(w.max_component_correlation),
        "max_loading_cosine": num(w.max_loading_cosine),
        "relation": relation,
        "holds": holds,
    })
}

fn demo(args: &DemoArgs, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let doc = match args.name {
        DemoName::Parasitic => {
            let a = diag(&[3.0, 2.0])?;
            let search = find_parasitic_up(&a, 2, AscentOptions::default(), 20, seed)?;
            let svd_hits = search.runs.iter().filter(|r| r.kind == MaximizerKind::Svd).count();
            let z = search.parasitic.first().ok_or_else(|| {
                CliError::Witness(format!("no parasitic maximizer in {} restarts", search.runs.len()))
            })?;
            let y = a.values() * z.matrix();
            let x = basis_for(&y, BasisRule::Up)?.x;
            let d = projections(&y, &x);
            let objective = d.norm_squared();
            let equal = (d[0] - d[1]).abs() <= 1e-6;
            let at_max = (objective - search.pca_bound).abs() <= 1e-6;
            let not_svd = !is_signed_permutation_of(z.matrix(), &a.svd().v_m(2), 1e-6);
            if !(equal && at_max && not_svd) {
                return Err(CliError::Witness("parasitic candidate failed verification".into()));
            }
            json!({
                "demo": "parasitic",
                "a": matrix_json(a.values()),
                "z_sharp": matrix_json(z.matrix()),
                "y": matrix_json(&y),
                "projections": vector_json(d.as_slice()),
                "objective": num(objective),
                "pca_bound": num(search.pca_bound),
                "relation": "<y_1,x_1> = <y_2,x_2>, UPprojVar = sigma_1^2 + sigma_2^2, Z# not a signed permutation of V_2",
                "holds": true,
                "restarts": search.runs.len(),
                "svd_endpoints": svd_hits,
                "parasitic_endpoints": search.parasitic.len(),
            })
        }
        DemoName::CounterexampleNorm => {
            let mut witnesses = Vec::new();
            for (rule, name) in [(BasisRule::Qr, "QRnormVar"), (BasisRule::Up, "UPnormVar")] {
                let w = default_normalized_counterexample(rule, seed)?
                    .ok_or_else(|| CliError::Witness(format!("no {name} > ||Y||_F^2 within the search budget")))?;
                let holds = w.value > w.total_var_y;
                if !holds {
                    return Err(CliError::Witness(format!("{name} witness failed verification")));
                }
                let mut entry = witness_json(&w, &format!("{name} > ||Y||_F^2"), holds);
                entry["definition"] = json!(name);
                witnesses.push(entry);
            }
            json!({"demo": "counterexample-norm", "witnesses": witnesses})
        }
        DemoName::AnomalySubspace => {
            let a = diag(&[4.0, 3.0, 2.0, 1.0])?;
            let loadings = orthogonal_loadings_anomaly(&a, 2, seed)?;
            let holds_a = (loadings.value - loadings.total_var_y).abs() <= 1e-10 * loadings.total_var_y
                && loadings.max_component_correlation > 1e-3;
            let comps = orthogonal_components_anomaly(&a, 2, seed)?;
            let holds_b = comps.value > comps.total_var_y && comps.max_component_correlation < 1e-10;
            if !(holds_a && holds_b) {
                return Err(CliError::Witness("subspace anomaly failed verification".into()));
            }
            json!({
                "demo": "anomaly-subspace",
                "orthogonal_loadings": witness_json(
                    &loadings,
                    "subspVar = ||Y||_F^2 with orthogonal loadings and correlated components",
                    holds_a,
                ),
                "orthogonal_components": witness_json(
                    &comps,
                    "subspVar > ||Y||_F^2 with orthogonal components and correlated loadings",
                    holds_b,
                ),
            })
        }
    };
    emit(out, &pretty(&doc))
}
