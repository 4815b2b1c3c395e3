//! One function per subcommand. Each returns a deterministic JSON result and,
//! where the subcommand has one, a CSV rendering of the same data.

use std::fmt::Write as _;
use std::fs;

use fiid_core::gaussian::{emulate_on_graph, TreeBlockFactor};
use fiid_core::graph::{girth, random_regular, tree_like_report};
use fiid_core::math::{
    bisection_bound, block_factor_correlation, cghv_correlation, edge_cut_bound, sign_flip_probability, spectral_radius,
};
use fiid_core::obstruction::{
    log_growth_slope, mc_exact_report, sphere_sum_stats, BallSampler, GaussianBlock, IidSpins, MarkovCluster,
    MarkovDirect,
};
use fiid_core::partition::{bisection_heuristic, edge_cut_experiment, BisectionRun, CutResult};
use fiid_core::processes::{
    sample_iid_spins, sample_matching_list, sample_mc_cluster, sample_mc_direct, sample_perfect_matching,
    sample_proper_coloring, UniformLabelField,
};
use fiid_core::rng::{derive_substream, substream_rng};
use fiid_core::{BlockFactorSpec, BlockSign, CutMode, Graph, MarkovParams, TreeBall};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;
use crate::SCHEMA_VERSION;

/// Substream of the master seed that generates graphs.
const GRAPH_STREAM: u64 = 0;
/// Substream of the master seed that drives the experiment itself.
const RUN_STREAM: u64 = 1;

/// Result of one experiment, before the runtime section is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub result: Value,
    /// Per-sample records emitted ahead of the report, as JSON lines.
    pub records: Vec<Value>,
    pub csv: String,
}

fn outcome(result: Value, csv: String) -> Outcome {
    Outcome { result, records: Vec::new(), csv }
}

pub fn run_command(command: &Command, seed: u64) -> Result<Outcome, CliError> {
    match command {
        Command::VerifyFormulas(a) => verify_formulas(a),
        Command::GenGraph(a) => gen_graph(a, seed),
        Command::SampleProcess(a) => sample_process(a, seed),
        Command::GaussField(a) => gauss_field(a, seed),
        Command::Obstruct(a) => obstruct(a, seed),
        Command::Bisect(a) => bisect(a, seed),
        Command::Edgecut(a) => edgecut(a, seed),
        Command::Replay(_) => Err(CliError::Validation("a replayed report cannot itself be a replay".into())),
    }
}

fn verify_formulas(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let d = a.d;
    let rho = spectral_radius(d)?;
    let min = bisection_bound(d, CutMode::Min)?;
    let max = bisection_bound(d, CutMode::Max)?;
    let corr = block_factor_correlation(d, a.radius)?;
    let rows: Vec<(String, f64)> = vec![
        ("spectral_radius".into(), rho),
        ("bisection_bound_min".into(), min),
        ("bisection_bound_max".into(), max),
        ("bisection_bound_sum".into(), min + max),
        ("sign_flip_probability_at_minus_rho".into(), sign_flip_probability(-rho)?),
        (format!("block_factor_correlation_n{}", a.radius), corr),
        (format!("edge_cut_bound_n{}", a.radius), edge_cut_bound(d, a.radius)?),
        ("cghv_correlation_n1".into(), cghv_correlation(d, 1)?),
    ];
    let mut csv = String::from("name,value\n");
    for (name, value) in &rows {
        writeln!(csv, "{name},{value}").unwrap();
    }
    let table: Vec<Value> = rows
        .iter()
        .map(|(name, value)| json!({ "name": name, "value": value, "rounded": format!("{value:.7}") }))
        .collect();
    Ok(outcome(json!({ "d": d, "radius": a.radius, "rows": table }), csv))
}

struct LoadedGraph {
    graph: Graph,
    source: Value,
}

fn load_graph(src: &GraphSource, d: u32, seed: u64) -> Result<LoadedGraph, CliError> {
    if let Some(path) = &src.graph_file {
        let text = fs::read_to_string(path)?;
        let graph = Graph::parse_edge_list(&text)?;
        return Ok(LoadedGraph { graph, source: json!({ "kind": "file", "path": path }) });
    }
    let Some(n) = src.n else {
        return Err(CliError::Validation("either --n or --graph-file is required".into()));
    };
    let graph_seed = derive_substream(seed, GRAPH_STREAM);
    let graph = random_regular(n, d as usize, graph_seed)?;
    Ok(LoadedGraph { graph, source: json!({ "kind": "random-regular", "n": n, "d": d, "graph_seed": graph_seed }) })
}

fn graph_summary(g: &Graph) -> Value {
    json!({
        "vertices": g.vertex_count(),
        "edges": g.edge_count(),
        "average_degree": g.average_degree(),
        "girth": girth(g),
    })
}

fn gen_graph(a: &GenGraphArgs, seed: u64) -> Result<Outcome, CliError> {
    let graph_seed = derive_substream(seed, GRAPH_STREAM);
    let g = random_regular(a.n, a.d as usize, graph_seed)?;
    let edges: Vec<[usize; 2]> = g.edges().map(|(u, v)| [u, v]).collect();
    let result = json!({
        "graph": graph_summary(&g),
        "graph_seed": graph_seed,
        "tree_like_fraction_r2": tree_like_report(&g, 2, a.d as usize).fraction,
        "edge_list": edges,
    });
    Ok(outcome(result, g.to_edge_list()))
}

fn markov(d: u32, theta: Option<f64>) -> Result<MarkovParams, CliError> {
    let theta = theta.ok_or_else(|| CliError::Validation("--theta is required for Markov-chain processes".into()))?;
    Ok(MarkovParams::new(d, theta)?)
}

fn sample_process(a: &SampleArgs, seed: u64) -> Result<Outcome, CliError> {
    let ball = TreeBall::new(a.d, a.radius)?;
    let params = match a.process {
        ProcessKind::McDirect | ProcessKind::McCluster => Some(markov(a.d, a.theta)?),
        _ => None,
    };
    let run_seed = derive_substream(seed, RUN_STREAM);
    let samples: Vec<(Value, Vec<i64>)> = (0..a.replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream_rng(run_seed, i as u64);
            Ok(match a.process {
                ProcessKind::Iid => spins(sample_iid_spins(&ball, &mut rng).values),
                ProcessKind::McDirect => spins(sample_mc_direct(&ball, params.as_ref().unwrap(), &mut rng).values),
                ProcessKind::McCluster => {
                    let labels = UniformLabelField::sample(&ball, &mut rng);
                    spins(sample_mc_cluster(&ball, params.as_ref().unwrap(), &labels).values)
                }
                ProcessKind::PerfectMatching => {
                    let m = sample_perfect_matching(&ball, &mut rng)?;
                    m.validate(&ball)?;
                    let flat = m.in_matching.iter().map(|&b| i64::from(b)).collect();
                    (json!({ "in_matching": m.in_matching }), flat)
                }
                ProcessKind::Coloring => {
                    let c = sample_proper_coloring(&ball, &mut rng)?;
                    c.validate(&ball)?;
                    let flat = c.color.iter().map(|&x| i64::from(x)).collect();
                    (json!({ "color": c.color }), flat)
                }
                ProcessKind::MatchingList => {
                    let labels = UniformLabelField::sample(&ball, &mut rng);
                    let list = sample_matching_list(&ball, &labels, &mut rng)?;
                    list.validate(&ball)?;
                    // P_1..P_{d-2} take labels 1..d-2, the two pair classes d-1 and d
                    let flat = (0..ball.edge_count())
                        .map(|e| match list.matchings.iter().position(|p| p.in_matching[e]) {
                            Some(i) => i as i64 + 1,
                            None => i64::from(a.d) - 2 + i64::from(list.q_class(e).unwrap_or(0)),
                        })
                        .collect();
                    (serde_json::to_value(&list).unwrap(), flat)
                }
            })
        })
        .collect::<Result<_, CliError>>()?;

    let name = serde_json::to_value(a.process).unwrap();
    let params_json = json!({ "d": a.d, "radius": a.radius, "theta": a.theta });
    let mut csv = String::from("sample,index,value\n");
    let mut records = Vec::with_capacity(samples.len());
    for (i, (config, flat)) in samples.into_iter().enumerate() {
        for (j, v) in flat.iter().enumerate() {
            writeln!(csv, "{i},{j},{v}").unwrap();
        }
        records.push(json!({
            "schema_version": SCHEMA_VERSION,
            "kind": "sample",
            "process": name,
            "params": params_json,
            "seed": seed,
            "sample_seed": derive_substream(run_seed, i as u64),
            "index": i,
            "config": config,
        }));
    }
    let result = json!({
        "process": name,
        "samples": a.replicas,
        "vertex_count": ball.vertex_count(),
        "edge_count": ball.edge_count(),
    });
    Ok(Outcome { result, records, csv })
}

fn spins(values: Vec<i8>) -> (Value, Vec<i64>) {
    let flat = values.iter().map(|&s| i64::from(s)).collect();
    (json!({ "spins": values }), flat)
}

fn block_sign(sign: SignArg) -> BlockSign {
    match sign {
        SignArg::Plus => BlockSign::Plus,
        SignArg::Minus => BlockSign::Minus,
    }
}

fn gauss_field(a: &GaussArgs, seed: u64) -> Result<Outcome, CliError> {
    let spec = BlockFactorSpec::new(a.d, a.radius, block_sign(a.sign))?;
    let run_seed = derive_substream(seed, RUN_STREAM);
    let (field, domain) = if a.graph.graph_file.is_some() || a.graph.n.is_some() {
        let loaded = load_graph(&a.graph, a.d, seed)?;
        let field = emulate_on_graph(&loaded.graph, &spec, run_seed);
        (field, json!({ "kind": "graph", "source": loaded.source, "graph": graph_summary(&loaded.graph) }))
    } else {
        let radius = a.ball_radius.unwrap_or(a.radius + 2);
        let ball = TreeBall::new(a.d, radius)?;
        let field = TreeBlockFactor::new(&ball, &spec)?.sample(&mut substream_rng(run_seed, 0));
        (field, json!({ "kind": "tree-ball", "radius": radius }))
    };
    let mut csv = String::from("vertex,value,defined\n");
    for (v, (x, def)) in field.values.iter().zip(&field.defined_mask).enumerate() {
        writeln!(csv, "{v},{x},{}", u8::from(*def)).unwrap();
    }
    let result = json!({
        "block_factor": {
            "d": a.d,
            "n": a.radius,
            "sign": spec.sign(),
            "normalization": spec.normalization(),
            "neighbor_correlation": spec.neighbor_correlation(),
        },
        "domain": domain,
        "run_seed": run_seed,
        "defined_count": field.defined_count(),
        "values": field.values,
        "defined": field.defined_mask,
    });
    Ok(outcome(result, csv))
}

fn obstruct(a: &ObstructArgs, seed: u64) -> Result<Outcome, CliError> {
    if a.min_radius > a.radius {
        return Err(CliError::Validation(format!("--min-radius {} exceeds --radius {}", a.min_radius, a.radius)));
    }
    let n_values: Vec<u32> = (a.min_radius..=a.radius).collect();
    let run_seed = derive_substream(seed, RUN_STREAM);
    let report = match a.process {
        ObstructProcess::McExact => mc_exact_report(a.d, markov(a.d, a.theta)?.theta(), &n_values)?,
        process => {
            let reach = match process {
                ObstructProcess::Gauss | ObstructProcess::GaussSign => a.block_radius.saturating_sub(1),
                _ => 0,
            };
            let ball = TreeBall::new(a.d, a.radius + reach)?;
            let sampler: Box<dyn BallSampler> = match process {
                ObstructProcess::Iid => Box::new(IidSpins),
                ObstructProcess::McDirect => Box::new(MarkovDirect(markov(a.d, a.theta)?)),
                ObstructProcess::McCluster => Box::new(MarkovCluster(markov(a.d, a.theta)?)),
                ObstructProcess::Gauss | ObstructProcess::GaussSign => {
                    let spec = BlockFactorSpec::new(a.d, a.block_radius, BlockSign::Minus)?;
                    Box::new(GaussianBlock::new(&ball, spec, process == ObstructProcess::GaussSign)?)
                }
                ObstructProcess::McExact => unreachable!(),
            };
            sphere_sum_stats(sampler.as_ref(), &ball, &n_values, a.replicas, run_seed)?
        }
    };
    let (slope, slope_se) = log_growth_slope(&report);
    let mut csv = String::from("n,var_ratio,var_ratio_se,root_corr,root_corr_se\n");
    for (i, n) in report.n_values.iter().enumerate() {
        writeln!(
            csv,
            "{n},{},{},{},{}",
            report.var_ratio[i], report.var_ratio_se[i], report.root_corr[i], report.root_corr_se[i]
        )
        .unwrap();
    }
    let mut result = serde_json::to_value(&report)?;
    let map = result.as_object_mut().unwrap();
    map.insert("log_growth_slope".into(), json!(slope));
    map.insert("log_growth_slope_se".into(), json!(slope_se));
    map.insert("run_seed".into(), json!(run_seed));
    Ok(outcome(result, csv))
}

fn stage(c: &CutResult) -> Value {
    json!({ "cut_size": c.cut_size, "fraction": c.fraction, "balance_defect": c.balance_defect })
}

fn bisection_json(run: &BisectionRun, mode: CutMode, run_seed: u64) -> Value {
    json!({
        "mode": mode,
        "run_seed": run_seed,
        "raw": stage(&run.raw),
        "rebalanced": stage(&run.rebalanced),
        "improved": stage(&run.improved),
        "predicted_raw_fraction": run.predicted_raw_fraction,
        "asymptotic_bound": run.asymptotic_bound,
        "tree_like_fraction": run.tree_like_fraction,
        "tree_like_edge_fraction": run.tree_like_edge_fraction,
        "warnings": run.warnings,
    })
}

fn bisect(a: &BisectArgs, seed: u64) -> Result<Outcome, CliError> {
    let loaded = load_graph(&a.graph, a.d, seed)?;
    let modes: &[CutMode] = match a.mode {
        ModeArg::Min => &[CutMode::Min],
        ModeArg::Max => &[CutMode::Max],
        ModeArg::Both => &[CutMode::Min, CutMode::Max],
    };
    let base = derive_substream(seed, RUN_STREAM);
    let mut runs = Vec::new();
    let mut csv =
        String::from("mode,stage,cut_size,fraction,balance_defect,predicted_raw_fraction,tree_like_edge_fraction\n");
    for &mode in modes {
        // each mode has its own stream so single-mode runs match the combined one
        let run_seed = derive_substream(base, mode as u64);
        let run = bisection_heuristic(&loaded.graph, a.d, a.radius, mode, run_seed, a.max_passes)?;
        for c in [&run.raw, &run.rebalanced, &run.improved] {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                mode.as_str(),
                serde_json::to_value(c.stage)?.as_str().unwrap(),
                c.cut_size,
                c.fraction,
                c.balance_defect,
                run.predicted_raw_fraction,
                run.tree_like_edge_fraction
            )
            .unwrap();
        }
        runs.push(bisection_json(&run, mode, run_seed));
    }
    let result = json!({
        "source": loaded.source,
        "graph": graph_summary(&loaded.graph),
        "radius": a.radius,
        "runs": runs,
    });
    Ok(outcome(result, csv))
}

fn edgecut(a: &EdgecutArgs, seed: u64) -> Result<Outcome, CliError> {
    let corr = block_factor_correlation(a.d, a.radius)?;
    let bound = sign_flip_probability(corr)?;
    let required_girth = 2 * a.radius + 1;
    let note = format!("girth ≥ {required_girth} required");
    let theory = json!({
        "correlation": corr,
        "bound": bound,
        "bound_rounded": format!("{bound:.4}"),
        "required_girth": required_girth,
        "note": note,
    });
    if a.bound_only {
        let csv = format!("name,value\ncorrelation,{corr}\nbound,{bound}\nrequired_girth,{required_girth}\n");
        return Ok(outcome(json!({ "d": a.d, "radius": a.radius, "theory": theory }), csv));
    }
    let loaded = load_graph(&a.graph, a.d, seed)?;
    let run_seed = derive_substream(seed, RUN_STREAM);
    let sample = edge_cut_experiment(&loaded.graph, a.d, a.radius, a.replicas, run_seed)?;
    let mut csv = String::from("edge,u,v,frequency,defined\n");
    for (i, ((u, v), (f, def))) in
        loaded.graph.edges().zip(sample.per_edge_frequency.iter().zip(&sample.defined_edges)).enumerate()
    {
        writeln!(csv, "{i},{u},{v},{f},{}", u8::from(*def)).unwrap();
    }
    let defined: Vec<f64> =
        sample.per_edge_frequency.iter().zip(&sample.defined_edges).filter(|(_, &d)| d).map(|(&f, _)| f).collect();
    let mean_defined = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let result = json!({
        "d": a.d,
        "radius": a.radius,
        "source": loaded.source,
        "graph": graph_summary(&loaded.graph),
        "run_seed": run_seed,
        "theory": theory,
        "replicas": sample.replicas,
        "girth_sufficient": sample.girth_sufficient,
        "defined_edge_count": defined.len(),
        "min_defined_frequency": sample.min_defined_frequency,
        "mean_defined_frequency": mean_defined,
        "per_edge_frequency": sample.per_edge_frequency,
        "defined_edges": sample.defined_edges,
    });
    Ok(outcome(result, csv))
}
