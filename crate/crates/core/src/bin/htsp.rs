use clap::{Args, Parser, Subcommand, ValueEnum};
use htsp::harness::generate::{generate, Family};
use htsp::harness::oracle::oracle_check;
use htsp::harness::stats::StatReport;
use htsp::harness::suites::{optimum_for, run_suite, ExperimentConfig, InstanceSource, Suite};
use htsp::hierarchy::{build_cactus, build_hierarchy};
use htsp::instance::{Instance, ParseMode};
use htsp::ojoin::{odd_vertices, run_trial, CostModel, EalDetector, EalEstimates, JoinPlan, TrialRow};
use htsp::params::{optimize, SearchConfig};
use htsp::pipeline::{Pipeline, SamplerChoice};
use htsp::rational::{format_rational, to_f64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "htsp", version, about = "Tree-plus-join tours for half-integral TSP instances")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    trials: u64,
    #[arg(long, global = true, value_enum, default_value_t = SamplerArg::Mix)]
    sampler: SamplerArg,
    /// Probability of the maximum-entropy sampler per degree piece under `mix`.
    #[arg(long, global = true, default_value_t = 0.471496)]
    mix_lambda: f64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Include the shifted point of every degree piece in sample output.
    #[arg(long, global = true)]
    dump_shift: bool,
    /// Generate unit costs instead of metric ones.
    #[arg(long, global = true)]
    unit_costs: bool,
    /// Trials of the EAL calibration pass before join runs.
    #[arg(long, global = true, default_value_t = 100_000)]
    calibration: u64,
}

#[derive(Copy, Clone, ValueEnum)]
enum SamplerArg {
    Mi,
    Maxent,
    Mix,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Emit an instance of a generator family, e.g. `nested:2`.
    Generate { family: String },
    /// Check an instance file.
    Validate {
        instance: PathBuf,
        /// Do not require vertices 0, 1, 2 to form the root triple.
        #[arg(long)]
        lenient: bool,
    },
    /// Relabel a vertex with two doubled edges as the root triple.
    Normalize { instance: PathBuf },
    /// Print the cut hierarchy.
    Hierarchy { instance: PathBuf },
    /// Print the cactus of the minimum cuts.
    Cactus { instance: PathBuf },
    /// Sample root trees.
    Sample { instance: PathBuf },
    /// Sample trees and build their fractional joins.
    Join { instance: PathBuf },
    /// Build tours from tree plus minimum join.
    Tour {
        instance: PathBuf,
        /// Keep repeated vertices of the Euler walk.
        #[arg(long)]
        no_shortcut: bool,
    },
    /// Run statistical suites on an instance file or a generated instance.
    Stats {
        instance: Option<PathBuf>,
        /// Generator family used when no instance file is given.
        #[arg(long, conflicts_with = "instance")]
        family: Option<String>,
        #[arg(long, default_value = "all")]
        suite: String,
        /// Also write per-trial join rows to this CSV file.
        #[arg(long)]
        trial_csv: Option<PathBuf>,
    },
    /// Optimise the reduction parameters.
    OptimizeParams,
    /// Exact checks by enumeration on a small instance.
    Oracle { instance: PathBuf },
}

type Failure = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

impl Global {
    fn choice(&self) -> SamplerChoice {
        match self.sampler {
            SamplerArg::Mi => SamplerChoice::MatroidIntersection,
            SamplerArg::Maxent => SamplerChoice::MaxEntropy,
            SamplerArg::Mix => SamplerChoice::Mix(self.mix_lambda),
        }
    }

    fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn emit_json(&self, value: &serde_json::Value) -> Result<(), Failure> {
        self.emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
    }
}

fn load(path: &PathBuf, mode: ParseMode) -> Result<Instance, Failure> {
    Ok(Instance::parse(&std::fs::read_to_string(path)?, mode)?)
}

fn execute(cli: &Cli) -> Result<ExitCode, Failure> {
    let g = &cli.global;
    if !(0.0..=1.0).contains(&g.mix_lambda) {
        return Err(format!("--mix-lambda {} outside [0, 1]", g.mix_lambda).into());
    }
    match &cli.command {
        Command::Generate { family } => {
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            g.emit(&generate(&Family::parse(family)?, g.unit_costs, &mut rng)?.serialize())?;
        }
        Command::Validate { instance, lenient } => {
            let mode = if *lenient { ParseMode::Lenient } else { ParseMode::Strict };
            let inst = load(instance, mode)?;
            g.emit(&format!(
                "valid: {} vertices, {} edges, c(x) = {}\n",
                inst.vertex_count(),
                inst.edge_count(),
                format_rational(&inst.lp_cost())
            ))?;
        }
        Command::Normalize { instance } => {
            let inst = load(instance, ParseMode::Lenient)?;
            let normal = inst.normalized().ok_or("no vertex has two doubled edges to distinct neighbours")?;
            g.emit(&normal.serialize())?;
        }
        Command::Hierarchy { instance } => {
            let h = build_hierarchy(&load(instance, ParseMode::Strict)?)?;
            match g.format {
                Format::Json => g.emit_json(&serde_json::to_value(&h)?)?,
                Format::Csv => {
                    let mut out = String::from("node,kind,parent,children,label\n");
                    for node in h.nodes() {
                        let children: Vec<String> = node.children.iter().map(|c| c.to_string()).collect();
                        let label: Vec<String> = node.label.iter().map(|v| v.to_string()).collect();
                        let parent = node.parent.map_or(String::new(), |p| p.to_string());
                        writeln!(out, "{},{:?},{},{},{}", node.id, node.kind, parent, children.join(";"), label.join(";"))?;
                    }
                    g.emit(&out)?;
                }
            }
        }
        Command::Cactus { instance } => {
            let cactus = build_cactus(&build_hierarchy(&load(instance, ParseMode::Strict)?)?);
            match g.format {
                Format::Json => g.emit_json(&serde_json::to_value(&cactus)?)?,
                Format::Csv => {
                    let mut out = String::from("edge,u,v,cycle\n");
                    for (c, cycle) in cactus.cycles.iter().enumerate() {
                        for &e in cycle {
                            let (u, v) = cactus.edges[e];
                            writeln!(out, "{e},{u},{v},{c}")?;
                        }
                    }
                    g.emit(&out)?;
                }
            }
        }
        Command::Sample { instance } => {
            let inst = load(instance, ParseMode::Strict)?;
            let pipeline = Pipeline::new(&inst)?;
            let mut out = String::from(if g.dump_shift { "trial,seed,edges,shifts\n" } else { "trial,seed,edges\n" });
            let mut records = Vec::new();
            for trial in 0..g.trials {
                let mut sample = pipeline.sample(g.choice(), g.seed, trial)?;
                if !g.dump_shift {
                    sample.pieces.iter_mut().for_each(|p| p.shift = None);
                }
                let edges: Vec<String> = sample.edges.iter().map(|e| e.0.to_string()).collect();
                write!(out, "{trial},{},{}", g.seed, edges.join(";"))?;
                if g.dump_shift {
                    let shifts: Vec<String> = sample
                        .pieces
                        .iter()
                        .filter_map(|p| p.shift.as_ref().map(|s| (p.node, s)))
                        .map(|(node, s)| {
                            let values: Vec<String> = s.y.iter().map(|(id, t)| format!("{}={}/3", id.0, t.0)).collect();
                            format!("{node}:{}", values.join(" "))
                        })
                        .collect();
                    write!(out, ",{}", shifts.join("|"))?;
                }
                out.push('\n');
                records.push(json!({ "trial": trial, "seed": g.seed, "sample": sample }));
            }
            match g.format {
                Format::Json => g.emit_json(&json!(records))?,
                Format::Csv => g.emit(&out)?,
            }
        }
        Command::Join { instance } => join_or_tour(g, instance, true, false)?,
        Command::Tour { instance, no_shortcut } => join_or_tour(g, instance, !no_shortcut, true)?,
        Command::Stats { instance, family, suite, trial_csv } => {
            let source = match (instance, family) {
                (Some(path), _) => InstanceSource::File(path.clone()),
                (None, Some(family)) => InstanceSource::Family { family: Family::parse(family)?, seed: g.seed },
                (None, None) => return Err("stats needs an instance file or --family".into()),
            };
            let mut cfg = ExperimentConfig::new(source, g.choice(), g.trials, g.seed, Suite::parse(suite)?);
            cfg.calibration_trials = g.calibration;
            cfg.unit_costs = g.unit_costs;
            cfg.keep_rows = trial_csv.is_some();
            let output = run_suite(&cfg)?;
            if let (Some(path), Some(csv)) = (trial_csv, &output.trial_csv) {
                std::fs::write(path, csv)?;
            }
            emit_report(g, &output.report)?;
            summarize(&output.instance, &output.report);
            if !output.report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::OptimizeParams => {
            let start = std::time::Instant::now();
            let optimum = optimize(SearchConfig::default());
            let elapsed = start.elapsed().as_secs_f64();
            let p = &optimum.params;
            let binding: Vec<&str> = optimum.binding.iter().map(|c| c.name()).collect();
            let values = [
                ("lambda", &p.lambda),
                ("tau", &p.tau),
                ("gamma", &p.gamma),
                ("beta", &p.beta),
                ("delta", &optimum.delta),
                ("epsilon", &optimum.epsilon()),
            ];
            match g.format {
                Format::Json => {
                    let mut map = serde_json::Map::new();
                    for (name, value) in values {
                        map.insert(name.into(), json!({ "exact": format_rational(value), "value": to_f64(value) }));
                    }
                    map.insert("binding".into(), json!(binding));
                    map.insert("seconds".into(), json!(elapsed));
                    g.emit_json(&serde_json::Value::Object(map))?;
                }
                Format::Csv => {
                    let mut out = String::from("name,value,exact\n");
                    for (name, value) in values {
                        writeln!(out, "{name},{:.8},{}", to_f64(value), format_rational(value))?;
                    }
                    writeln!(out, "binding,{},", binding.join(";"))?;
                    writeln!(out, "seconds,{elapsed:.4},")?;
                    g.emit(&out)?;
                }
            }
        }
        Command::Oracle { instance } => {
            let inst = load(instance, ParseMode::Strict)?;
            let report = oracle_check(&Pipeline::new(&inst)?)?;
            emit_report(g, &report)?;
            summarize(&instance.display().to_string(), &report);
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_report(g: &Global, report: &StatReport) -> Result<(), Failure> {
    match g.format {
        Format::Json => g.emit(&format!("{}\n", report.to_json())),
        Format::Csv => g.emit(&report.to_csv()),
    }
}

fn summarize(name: &str, report: &StatReport) {
    let failing = report.failing().count();
    eprintln!("{name}: {} rows, {failing} failing, {} trials without a result", report.rows.len(), report.failed_trials());
    for row in report.failing() {
        eprintln!("  FAIL {} estimate {:.6} bound {:.6} se {:.2e}", row.name, row.estimate, row.bound, row.std_error);
    }
}

fn join_or_tour(g: &Global, path: &PathBuf, shortcut: bool, tours: bool) -> Result<(), Failure> {
    let inst = load(path, ParseMode::Strict)?;
    let pipeline = Pipeline::new(&inst)?;
    let (choice, optimum) = optimum_for(g.choice());
    let detector = EalDetector::new(&pipeline);
    let estimates = EalEstimates::calibrate(&detector, choice, g.calibration, g.seed);
    let plan = JoinPlan::new(&pipeline, optimum.params, &estimates)?;
    let costs = CostModel::new(&inst)?;
    let mut csv = format!("{}\n", TrialRow::HEADER);
    let mut records = Vec::new();
    for trial in 0..g.trials {
        match run_trial(&plan, &costs, choice, g.seed, trial, shortcut) {
            Ok(outcome) => {
                writeln!(csv, "{}", outcome.row.csv())?;
                if g.format == Format::Json {
                    let mut record = json!({ "row": outcome.row });
                    if tours {
                        let odd = odd_vertices(&inst, &outcome.sample.edges);
                        let (_, join) = costs.min_join(&odd)?;
                        let walk: Vec<_> = outcome.sample.edges.iter().chain(&join).copied().collect();
                        record["tour"] = json!(costs.tour(&walk, shortcut).order);
                        record["join_edges"] = json!(join);
                    } else {
                        let z: Vec<String> = outcome.join.values().iter().map(format_rational).collect();
                        record["tree"] = json!(outcome.sample.edges);
                        record["z"] = json!(z);
                        record["eal"] = json!(outcome.join.eal);
                        record["charges"] = json!(outcome.join.charges);
                    }
                    records.push(record);
                }
            }
            Err(e) => eprintln!("trial {trial}: {e}"),
        }
    }
    match g.format {
        Format::Json => g.emit_json(&json!(records)),
        Format::Csv => g.emit(&csv),
    }
}
