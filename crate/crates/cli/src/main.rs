use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use mlgp::allocator::{
    budget_allocation, interpolation_bound_surrogate, level_count_for_precision, precision_allocation,
    truncation_bound, BudgetProblem, DesignStructure, PrecisionProblem,
};
use mlgp::bench::{
    asymptotics_study, budget_sweep, design_params, parse_key_values, write_sweep_csv, BenchConfig, BenchResult,
    Study,
};
use mlgp::lowdisc::{build_nested_design, build_prefix_design, write_levels_csv, DomainBox};
use mlgp::{Error, Result};

/// Nested multi-fidelity GP designs: allocation, point sets, benchmarks.
#[derive(Parser, Debug)]
#[command(name = "mlgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Allocate samples per level for a budget or a target precision.
    Design(DesignArgs),
    /// Emit the nested Halton points of a structure as CSV.
    Points(PointsArgs),
    /// Run a simulation study and write results.csv / results.json.
    Bench(BenchArgs),
    /// Cost-versus-accuracy curves and fitted log-log slopes.
    Asymptotics(AsymptoticsArgs),
}

/// Model and cost flags shared by every subcommand. They override `--config`.
#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// `key = value` config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    levels: Option<usize>,
    /// Per-level variance decay λ².
    #[arg(long, conflicts_with = "lambda")]
    lambda_sq: Option<f64>,
    /// λ itself; squared on input.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lengthscale: Option<f64>,
    /// Unit cube of this dimension, unless --domain is given.
    #[arg(long)]
    dim: Option<usize>,
    /// Box as lo:hi[,lo:hi...].
    #[arg(long)]
    domain: Option<String>,
    /// Per-level cost growth a.
    #[arg(long)]
    cost_ratio: Option<f64>,
    /// Cost of one level-0 sample.
    #[arg(long)]
    cost_base: Option<f64>,
    /// Sample-count ratio r of the geometric baseline.
    #[arg(long)]
    decay_ratio: Option<f64>,
    /// Constant p of the interpolation bound.
    #[arg(long)]
    p_const: Option<f64>,
    /// Skip the non-increasing-counts constraint.
    #[arg(long)]
    allow_non_nested: bool,
}

impl ModelArgs {
    fn entries(&self) -> Vec<(usize, String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push((0, key.to_string(), v));
            }
        };
        push("levels", self.levels.map(|v| v.to_string()));
        push("lambda_sq", self.lambda_sq.map(|v| v.to_string()));
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("sigma_sq", self.sigma_sq.map(|v| v.to_string()));
        push("nu", self.nu.map(|v| v.to_string()));
        push("lengthscale", self.lengthscale.map(|v| v.to_string()));
        push("domain", self.domain.clone());
        push("dim", self.dim.map(|v| v.to_string()));
        push("cost_ratio", self.cost_ratio.map(|v| v.to_string()));
        push("cost_base", self.cost_base.map(|v| v.to_string()));
        push("decay_ratio", self.decay_ratio.map(|v| v.to_string()));
        push("p_const", self.p_const.map(|v| v.to_string()));
        if self.allow_non_nested {
            push("allow_non_nested", Some("true".into()));
        }
        out
    }

    /// Config file first, then flags, then `extra` entries.
    fn resolve(&self, extra: Vec<(usize, String, String)>) -> Result<BenchConfig> {
        let mut cfg = BenchConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)?;
            cfg.apply(&parse_key_values(&text)?)?;
        }
        let mut entries = self.entries();
        entries.extend(extra);
        cfg.apply(&entries)?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["budget", "epsilon"]))]
struct DesignArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fixed-budget mode.
    #[arg(long)]
    budget: Option<f64>,
    /// Target precision mode; the number of levels is chosen automatically.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    json: bool,
    /// Also write the structure as JSON to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PointsArgs {
    /// Per-level counts, e.g. 20,7,3.
    #[arg(long)]
    structure: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    allow_non_nested: bool,
    /// CSV file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    budget: Option<f64>,
    /// Comma-separated budgets for a sweep written to sweep.csv.
    #[arg(long)]
    budgets: Option<String>,
    /// Comma-separated: mlgp, geometric, single, nlhd.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long, env = "MLGP_SEED")]
    seed: Option<u64>,
    /// λ² assumed when computing designs.
    #[arg(long)]
    design_lambda_sq: Option<f64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
    /// Print the full result JSON instead of the summary table.
    #[arg(long)]
    json: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AsymptoticsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    epsilon_min: Option<f64>,
    #[arg(long)]
    epsilon_max: Option<f64>,
    #[arg(long)]
    epsilon_points: Option<usize>,
    #[arg(long)]
    json: bool,
    /// CSV file; stdout when omitted, with the summary on stderr.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Six significant digits.
fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{x:.5e}").parse::<f64>().map_or_else(|_| x.to_string(), |v| v.to_string())
}

fn entry(key: &str, value: impl ToString) -> (usize, String, String) {
    (0, key.to_string(), value.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn design(args: DesignArgs) -> Result<()> {
    let extra = args.budget.map(|b| entry("budget", b)).into_iter().collect();
    let cfg = args.model.resolve(extra)?;
    let model = cfg.design_model()?;
    let cost = cfg.cost_model()?;
    let mut params = design_params(&cfg);

    let (structure, truncation, epsilon) = match args.epsilon {
        Some(eps) => {
            let prob = PrecisionProblem::new(eps, model.clone(), cost, cfg.p_const)?;
            let k = level_count_for_precision(&prob);
            params["levels"] = json!(k);
            params.as_object_mut().expect("params object").remove("budget");
            (precision_allocation(&prob), truncation_bound(&model, k), Some(eps))
        }
        None => {
            let prob = BudgetProblem::new(cfg.budget, model.clone(), cost)?.with_monotone(!cfg.allow_non_nested);
            (budget_allocation(&prob), truncation_bound(&model, cfg.levels), None)
        }
    };
    let interpolation = interpolation_bound_surrogate(&structure.counts, &model, cfg.p_const);

    let mut doc = structure.to_json(params);
    let obj = doc.as_object_mut().expect("structure json is an object");
    obj.insert("levels".into(), json!(structure.levels()));
    obj.insert("interpolation_bound".into(), json!(interpolation));
    obj.insert("truncation_bound".into(), json!(truncation));
    obj.insert("p_const".into(), json!(cfg.p_const));
    if let Some(eps) = epsilon {
        obj.insert("epsilon".into(), json!(eps));
    }
    if let Some(path) = &args.out {
        let mut f = create(path)?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        writeln!(f)?;
        f.flush()?;
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
        return Ok(());
    }
    print_structure(&mut out, &structure)?;
    if let Some(eps) = epsilon {
        writeln!(out, "epsilon              {}", sig6(eps))?;
    }
    writeln!(out, "levels (K)           {}", structure.levels())?;
    writeln!(out, "interpolation bound  {}", sig6(interpolation))?;
    writeln!(out, "truncation bound     {}", sig6(truncation))?;
    Ok(())
}

fn print_structure<W: Write>(out: &mut W, s: &DesignStructure) -> Result<()> {
    let counts: Vec<String> = s.counts.iter().map(usize::to_string).collect();
    writeln!(out, "structure            {}", counts.join(","))?;
    writeln!(out, "{:<6} {:>10} {:>14}", "level", "count", "cost")?;
    for (i, (n, c)) in s.counts.iter().zip(&s.costs_per_level).enumerate() {
        writeln!(out, "{i:<6} {n:>10} {:>14}", sig6(*c))?;
    }
    writeln!(out, "total cost           {}", sig6(s.total_cost))?;
    Ok(())
}

fn parse_counts(text: &str) -> Result<Vec<usize>> {
    let counts: Vec<usize> = text
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::invalid("structure", format!("`{s}` is not a count")))
        })
        .collect::<Result<_>>()?;
    if counts.is_empty() || counts.iter().all(|&n| n == 0) {
        return Err(Error::invalid("structure", "needs at least one positive count"));
    }
    Ok(counts)
}

fn points(args: PointsArgs) -> Result<()> {
    let counts = parse_counts(&args.structure)?;
    let domain = match (&args.domain, args.dim) {
        (Some(text), dim) => {
            let b = DomainBox::parse(text)?;
            if dim.is_some_and(|d| d != b.dim()) {
                return Err(Error::invalid("dim", "disagrees with --domain"));
            }
            b
        }
        (None, d) => DomainBox::unit(d.unwrap_or(1))?,
    };
    let monotone = counts.windows(2).all(|w| w[1] <= w[0]);
    let levels = if monotone || !args.allow_non_nested {
        build_nested_design(&counts, &domain)?.levels().to_vec()
    } else {
        build_prefix_design(&counts, &domain)
    };
    match &args.out {
        Some(path) => {
            let mut f = create(path)?;
            write_levels_csv(&levels, &mut f)?;
            f.flush()?;
        }
        None => write_levels_csv(&levels, io::stdout().lock())?,
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(b) = args.budget {
        extra.push(entry("budget", b));
    }
    if let Some(b) = &args.budgets {
        extra.push(entry("budgets", b));
    }
    if let Some(m) = &args.methods {
        extra.push(entry("methods", m));
    }
    if let Some(r) = args.replications {
        extra.push(entry("replications", r));
    }
    if let Some(n) = args.n_test {
        extra.push(entry("n_test", n));
    }
    if let Some(s) = args.seed {
        extra.push(entry("seed", s));
    }
    if let Some(l) = args.design_lambda_sq {
        extra.push(entry("design_lambda_sq", l));
    }
    let cfg = args.model.resolve(extra)?;
    cfg.validate()?;
    if args.threads == Some(0) {
        return Err(Error::invalid("threads", "must be at least 1"));
    }

    let result = Study::new(&cfg)?.run(args.threads)?;
    fs::create_dir_all(&args.out)?;
    let mut csv = create(&args.out.join("results.csv"))?;
    result.write_csv(&mut csv)?;
    csv.flush()?;
    let mut js = create(&args.out.join("results.json"))?;
    result.write_json(&mut js)?;
    js.flush()?;

    let sweep = if cfg.budgets.is_empty() {
        None
    } else {
        let rows = budget_sweep(&cfg, &cfg.budgets, args.threads)?;
        let mut f = create(&args.out.join("sweep.csv"))?;
        write_sweep_csv(&rows, &mut f)?;
        f.flush()?;
        Some(rows)
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    if args.json {
        result.write_json(&mut out)?;
        writeln!(out)?;
        return Ok(());
    }
    print_summary(&mut out, &result)?;
    if let Some(rows) = sweep {
        writeln!(out)?;
        writeln!(out, "{:>12} {:<10} {:>12}", "budget", "method", "mean_rmse")?;
        for r in rows {
            writeln!(out, "{:>12} {:<10} {:>12}", sig6(r.budget), r.method.name(), sig6(r.mean_rmse))?;
        }
    }
    Ok(())
}

fn print_summary<W: Write>(out: &mut W, result: &BenchResult) -> Result<()> {
    writeln!(
        out,
        "seed {} | {} replications",
        result.seed,
        result.seeds.len()
    )?;
    writeln!(out, "{:<10} {:<20} {:>12} {:>12}", "method", "structure", "total_cost", "mean_rmse")?;
    for m in &result.methods {
        writeln!(
            out,
            "{:<10} {:<20} {:>12} {:>12}",
            m.method.name(),
            m.structure.counts_label(),
            sig6(m.structure.total_cost),
            sig6(m.mean_rmse)
        )?;
    }
    if let Some(best) = result.best() {
        writeln!(out, "lowest mean rmse: {best}")?;
    }
    Ok(())
}

fn asymptotics(args: AsymptoticsArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(v) = args.epsilon_min {
        extra.push(entry("epsilon_min", v));
    }
    if let Some(v) = args.epsilon_max {
        extra.push(entry("epsilon_max", v));
    }
    if let Some(v) = args.epsilon_points {
        extra.push(entry("epsilon_points", v));
    }
    let cfg = args.model.resolve(extra)?;
    let report = asymptotics_study(&cfg)?;

    let write_csv = |w: &mut dyn Write| -> Result<()> {
        writeln!(w, "epsilon,cost_mlgp,cost_single")?;
        for r in &report.rows {
            let single = r.single_cost.map(|c| c.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{single}", r.epsilon, r.mlgp_cost)?;
        }
        Ok(())
    };

    if args.json {
        let doc: Value = serde_json::to_value(&report)?;
        serde_json::to_writer_pretty(io::stdout().lock(), &doc)?;
        println!();
        if let Some(path) = &args.out {
            let mut f = create(path)?;
            write_csv(&mut f)?;
            f.flush()?;
        }
        return Ok(());
    }

    let summary = format!(
        "regime          {}\nalpha           {}\nbeta            {}\nmlgp slope      {} (predicted {})\nsingle slope    {} (predicted {})\n",
        report.regime.label(),
        sig6(report.alpha),
        sig6(report.beta),
        sig6(report.mlgp_slope),
        sig6(report.predicted_mlgp_slope),
        sig6(report.single_slope),
        sig6(report.predicted_single_slope),
    );
    match &args.out {
        Some(path) => {
            let mut f = create(path)?;
            write_csv(&mut f)?;
            f.flush()?;
            print!("{summary}");
        }
        None => {
            write_csv(&mut io::stdout().lock())?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else if matches!(err, Error::Io(_)) {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Design(a) => design(a),
        Command::Points(a) => points(a),
        Command::Bench(a) => bench(a),
        Command::Asymptotics(a) => asymptotics(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Config { line: 0, message } => eprintln!("error: {message}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
