//! Subcommand implementations: each writes CSVs plus a manifest echoing the
//! resolved configuration into the output directory.

use crate::config::{ExperimentConfig, StationarySection};
use crate::CliError;
use asd::bounds::{concentration_bound, run_coupling, topological_bound, BoundInputs, CutChoice};
use asd::graph::{draw_initial_states, extract_statistics, write_edge_list, write_label_map};
use asd::meanfield::{
    find_stationary, integrate, map_basins, MeanFieldState, OdeConfig, PhiMode, Stability,
    StationarySearch,
};
use asd::simulate::{run_asd, run_ensemble, SimConfig};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_manifest(cfg: &ExperimentConfig, command: &str) -> Result<(), CliError> {
    let doc = serde_json::json!({ "command": command, "config": cfg });
    write_file(
        &cfg.out,
        "manifest.json",
        &serde_json::to_string_pretty(&doc).expect("config serializes"),
    )
}

fn fmt(v: f64) -> String {
    // stable full-precision float formatting for reproducible files
    let mut s = format!("{v:.12}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    s
}

pub fn generate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let kernel = cfg.kernel()?;
    let states = kernel.state_set();
    let (g, ids) = cfg.build_graph(&cfg.graph, cfg.seed)?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
    write_edge_list(&g, &cfg.out.join("graph.edges"), ids.as_deref())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_label_map(&g, &cfg.out.join("labels.tsv"), ids.as_deref())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let rule = cfg.initial_rule(g.labels().len(), &states)?;
    let stats = extract_statistics(&g, &states, &rule);
    write_file(&cfg.out, "stats.json", &stats.to_json())?;
    println!(
        "generated {} nodes, {} edges -> {}",
        g.n(),
        g.edge_count(),
        cfg.out.display()
    );
    Ok(())
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let section = cfg
        .sim
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"sim\" section".into()))?;
    if !(section.horizon > 0.0 && section.dt > 0.0 && section.runs >= 1) {
        return Err(CliError::Config(
            "sim horizon, dt must be positive and runs >= 1".into(),
        ));
    }
    let kernel = cfg.kernel()?;
    let states = kernel.state_set();
    let (g, _) = cfg.build_graph(&cfg.graph, cfg.seed)?;
    let rule = cfg.initial_rule(g.labels().len(), &states)?;
    let sim = SimConfig::new(section.horizon, section.dt, section.runs, cfg.seed);
    let g = std::sync::Arc::new(g);
    let labels = g.labels().clone();

    if section.runs == 1 {
        let initial = draw_initial_states(&g, &rule, states.len(), cfg.seed.wrapping_add(1));
        let sample = run_asd(&g, &kernel, &initial, &sim, 0);
        let mut csv = String::from("run_id,t,class,state,fraction,zeta_fraction\n");
        for (ti, &t) in sample.times.iter().enumerate() {
            for a in 0..sample.num_labels {
                for x in 0..sample.num_states {
                    let _ = writeln!(
                        csv,
                        "0,{},{},{},{},{}",
                        fmt(t),
                        labels.name(a),
                        states.name(x),
                        fmt(sample.y_at(ti, a, x)),
                        fmt(sample.zeta_at(ti, a, x)),
                    );
                }
            }
        }
        write_file(&cfg.out, "trajectory.csv", &csv)?;
    }

    let summary = run_ensemble(
        |run| {
            let initial = draw_initial_states(
                &g,
                &rule,
                states.len(),
                cfg.seed.wrapping_add(1).wrapping_add(run as u64),
            );
            (g.clone(), initial)
        },
        &kernel,
        &sim,
    );
    let mut csv = String::from("t,class,state,mean,min,max\n");
    for (ti, &t) in summary.times.iter().enumerate() {
        for a in 0..summary.num_labels {
            for x in 0..summary.num_states {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    fmt(t),
                    labels.name(a),
                    states.name(x),
                    fmt(summary.at(&summary.mean, ti, a, x)),
                    fmt(summary.at(&summary.min, ti, a, x)),
                    fmt(summary.at(&summary.max, ti, a, x)),
                );
            }
        }
    }
    write_file(&cfg.out, "ensemble.csv", &csv)?;
    println!(
        "simulated {} run(s) to t={} -> {}",
        section.runs,
        section.horizon,
        cfg.out.display()
    );
    Ok(())
}

pub fn ode(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let section = cfg
        .ode
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"ode\" section".into()))?;
    if !(section.horizon > 0.0 && section.h > 0.0) {
        return Err(CliError::Config("ode horizon and h must be positive".into()));
    }
    let kernel = cfg.kernel()?;
    let states = kernel.state_set();
    let stats = cfg.statistics()?;
    let na = stats.labels().len();
    let rows = cfg.initial_rows(na, &states)?;
    let init = MeanFieldState::from_class_distributions(&rows, na);
    let mut ode_cfg = OdeConfig::new(section.horizon);
    ode_cfg.h = section.h;
    ode_cfg.record_every = section.record_every;
    ode_cfg.phi_mode = PhiMode::Auto {
        samples: 200_000,
        seed: cfg.seed,
    };
    let traj = integrate(&stats, &kernel, &init, &ode_cfg)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut csv = String::from("t,class,state,fraction\n");
    let mut zcsv = String::from("t,class,parent,state,fraction\n");
    for (ti, &t) in traj.times.iter().enumerate() {
        let state = &traj.states[ti];
        for a in 0..na {
            for x in 0..states.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt(t),
                    stats.labels().name(a),
                    states.name(x),
                    fmt(state.y_col(a)[x]),
                );
            }
            for b in 0..na {
                for x in 0..states.len() {
                    let _ = writeln!(
                        zcsv,
                        "{},{},{},{},{}",
                        fmt(t),
                        stats.labels().name(a),
                        stats.labels().name(b),
                        states.name(x),
                        fmt(state.zeta_col(a, b)[x]),
                    );
                }
            }
        }
    }
    write_file(&cfg.out, "ode.csv", &csv)?;
    write_file(&cfg.out, "ode_zeta.csv", &zcsv)?;
    println!(
        "integrated to t={} ({} recorded states) -> {}",
        section.horizon,
        traj.times.len(),
        cfg.out.display()
    );
    Ok(())
}

fn search_from(section: &StationarySection, seed: u64) -> StationarySearch {
    StationarySearch {
        grid: section.grid,
        max_seeds: section.max_seeds,
        tol: section.tol,
        tol_eig: section.tol_eig,
        phi_mode: PhiMode::Exact,
        seed,
    }
}

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
        Stability::Marginal => "marginal",
    }
}

pub fn stationary(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let section = cfg.stationary.clone().unwrap_or_default();
    let kernel = cfg.kernel()?;
    let states = kernel.state_set();
    let stats = cfg.statistics()?;
    let na = stats.labels().len();
    let report = find_stationary(&stats, &kernel, &search_from(&section, cfg.seed))
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut csv = String::from(
        "point_id,residual,max_re_eigenvalue,stability,kind,class,parent,state,value\n",
    );
    for (id, p) in report.points.iter().enumerate() {
        let meta = format!(
            "{id},{},{},{}",
            fmt(p.residual),
            fmt(p.max_re_eigenvalue),
            stability_name(p.stability)
        );
        for a in 0..na {
            for x in 0..states.len() {
                let _ = writeln!(
                    csv,
                    "{meta},y,{},,{},{}",
                    stats.labels().name(a),
                    states.name(x),
                    fmt(p.state.y_col(a)[x]),
                );
            }
            for b in 0..na {
                for x in 0..states.len() {
                    let _ = writeln!(
                        csv,
                        "{meta},zeta,{},{},{},{}",
                        stats.labels().name(a),
                        stats.labels().name(b),
                        states.name(x),
                        fmt(p.state.zeta_col(a, b)[x]),
                    );
                }
            }
        }
    }
    write_file(&cfg.out, "stationary.csv", &csv)?;
    println!(
        "found {} stationary point(s), {} failed seed(s) -> {}",
        report.points.len(),
        report.failed_seeds,
        cfg.out.display()
    );
    Ok(())
}

pub fn basins(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let section = cfg
        .basins
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"basins\" section".into()))?;
    let kernel = cfg.kernel()?;
    let states = kernel.state_set();
    let stats = cfg.statistics()?;
    let na = stats.labels().len();
    let search = cfg.stationary.clone().unwrap_or_default();
    let report = find_stationary(&stats, &kernel, &search_from(&search, cfg.seed))
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut inits = Vec::with_capacity(section.inits.len());
    for rows in &section.inits {
        if rows.len() != na || rows.iter().any(|r| r.len() != states.len()) {
            return Err(CliError::Config(
                "each basins init needs one row per class over the kernel's states".into(),
            ));
        }
        inits.push(MeanFieldState::from_class_distributions(rows, na));
    }
    let ode_cfg = OdeConfig::new(section.horizon);
    let labels = map_basins(&stats, &kernel, &report, &inits, &ode_cfg, section.tol)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut csv = String::from("init_id,point_id\n");
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(p) => {
                let _ = writeln!(csv, "{i},{p}");
            }
            None => {
                let _ = writeln!(csv, "{i},undecided");
            }
        }
    }
    write_file(&cfg.out, "basins.csv", &csv)?;
    println!(
        "mapped {} start(s) onto {} stationary point(s) -> {}",
        inits.len(),
        report.points.len(),
        cfg.out.display()
    );
    Ok(())
}

pub fn bounds(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let section = cfg
        .bounds
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"bounds\" section".into()))?;
    if section.ns.is_empty() || section.trials == 0 {
        return Err(CliError::Config("bounds needs ns and trials".into()));
    }
    let stats = cfg.statistics()?;
    let mut csv = String::from("n,t,trials,value\n");
    let mut terms = String::from("n,from_class,to_class,cut,tail_point,tail_upper,pairing,cross,total\n");
    for &n in &section.ns {
        let bound = topological_bound(
            &stats,
            n,
            section.t,
            section.trials,
            cfg.seed,
            &CutChoice::Optimize {
                max_exponent: section.max_exponent,
            },
        );
        let _ = writeln!(csv, "{n},{},{},{}", fmt(section.t), section.trials, fmt(bound.value));
        for term in &bound.terms {
            let _ = writeln!(
                terms,
                "{n},{},{},{},{},{},{},{},{}",
                stats.labels().name(term.b),
                stats.labels().name(term.a),
                fmt(term.cut),
                fmt(term.tail_point),
                fmt(term.tail_upper),
                fmt(term.pairing),
                fmt(term.cross),
                fmt(term.total()),
            );
        }
    }
    write_file(&cfg.out, "bounds.csv", &csv)?;
    write_file(&cfg.out, "bound_terms.csv", &terms)?;

    if let Some(conc) = &section.concentration {
        let mut ccsv =
            String::from("n,t1,t2,t3,t4,t5,t6,total\n");
        for &n in &section.ns {
            let inputs = BoundInputs {
                eta: conc.eta,
                epsilon: conc.epsilon,
                s: conc.s,
                x: conc.x,
                n,
                t: section.t,
                mean_degree: stats.mean_degree(),
                delta_sum: conc.delta_sum,
            };
            let b = concentration_bound(&inputs, conc.s);
            let _ = writeln!(
                ccsv,
                "{n},{},{},{},{},{},{},{}",
                fmt(b.terms[0]),
                fmt(b.terms[1]),
                fmt(b.terms[2]),
                fmt(b.terms[3]),
                fmt(b.terms[4]),
                fmt(b.terms[5]),
                fmt(b.total),
            );
        }
        write_file(&cfg.out, "concentration.csv", &ccsv)?;
    }
    println!("evaluated bounds at {:?} -> {}", section.ns, cfg.out.display());
    Ok(())
}

pub fn couple(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let section = cfg
        .couple
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"couple\" section".into()))?;
    if section.ns.is_empty() || section.trials == 0 {
        return Err(CliError::Config("couple needs ns and trials".into()));
    }
    let mut csv = String::from("n,trials,diverged,rate,b1_failures,b2_failures,implication_violations\n");
    for &n in &section.ns {
        let spec = cfg.graph.resized(n)?;
        let rows: Vec<(bool, bool, bool)> = (0..section.trials)
            .into_par_iter()
            .map(|trace| -> Result<(bool, bool, bool), CliError> {
                let seed = cfg
                    .seed
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add((n as u64) << 32 | trace as u64);
                let (g, _) = cfg.build_graph(&spec, seed)?;
                let trace = run_coupling(&g, section.t, seed);
                Ok((trace.b1, trace.b2, trace.equal))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let diverged = rows.iter().filter(|r| !r.2).count();
        let b1f = rows.iter().filter(|r| !r.0).count();
        let b2f = rows.iter().filter(|r| !r.1).count();
        let violations = rows.iter().filter(|r| r.0 && r.1 && !r.2).count();
        let _ = writeln!(
            csv,
            "{n},{},{diverged},{},{b1f},{b2f},{violations}",
            section.trials,
            fmt(diverged as f64 / section.trials as f64),
        );
    }
    write_file(&cfg.out, "couple.csv", &csv)?;
    println!("coupled at {:?} -> {}", section.ns, cfg.out.display());
    Ok(())
}
