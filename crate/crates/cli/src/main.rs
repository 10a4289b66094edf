use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyperclust::ahc::{Linkage, Partition};
use hyperclust::pipeline::{
    bench, bench_csv, cluster_failures, summarise, summary_csv, ClusterConfig, Clustering,
    StopRule, Subject,
};
use hyperclust::sbfl::{cluster_rankings, evaluate_rankings, rankings_csv, Cutoff, FlReport};
use hyperclust::synthgen::{generate, GenSpec, SuiteSpec};
use hyperclust::{
    load_coverage, load_ground_truth, CoverageFormat, CoverageMatrix, Error, GroundTruth, Metric,
    Technique, TieBreak,
};
use serde::Serialize;

const THREADS_VAR: &str = "HYPERCLUST_THREADS";

#[derive(Parser)]
#[command(
    name = "hyperclust",
    version,
    about = "Cluster failing tests and evaluate the clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise distances between failing tests.
    Distance(DistanceArgs),
    /// Hierarchical clustering of the failing tests.
    Cluster(ClusterArgs),
    /// Score a partition against the known faults.
    Eval(EvalArgs),
    /// Parallel fault localisation over the clusters of a partition.
    Fl(FlArgs),
    /// Generate synthetic subjects from a spec file.
    Gen(GenArgs),
    /// Cluster, score and localise in one run.
    Pipeline(PipelineArgs),
    /// Score a grid of configurations over a directory of subjects.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Coverage matrix (JSON or CSV).
    coverage: PathBuf,
    /// Coverage format; guessed from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for CoverageFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => CoverageFormat::Json,
            Format::Csv => CoverageFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Stop {
    Elbow,
    Threshold,
    Fixed,
}

#[derive(Args)]
struct ClusterOpts {
    #[arg(long, default_value = "hdist")]
    metric: Metric,
    #[arg(long, default_value = "avg")]
    linkage: Linkage,
    #[arg(long, value_enum, default_value = "elbow")]
    stop: Stop,
    /// Number of clusters for `--stop fixed`.
    #[arg(long)]
    k: Option<usize>,
    /// Cut height for `--stop threshold`.
    #[arg(long)]
    theta: Option<f64>,
}

impl ClusterOpts {
    fn stop_rule(&self) -> Result<StopRule, Error> {
        stop_rule(self.stop, self.k, self.theta)
    }

    fn config(&self) -> Result<ClusterConfig, Error> {
        let config = ClusterConfig {
            metric: self.metric,
            linkage: self.linkage,
            stop: self.stop_rule()?,
        };
        config.validate()?;
        Ok(config)
    }
}

fn stop_rule(stop: Stop, k: Option<usize>, theta: Option<f64>) -> Result<StopRule, Error> {
    let unused = |flag: &str, rule: &str| {
        Error::InvalidArgument(format!("{flag} has no effect with --stop {rule}"))
    };
    match (stop, k, theta) {
        (Stop::Elbow, None, None) => Ok(StopRule::Elbow),
        (Stop::Elbow, Some(_), _) => Err(unused("--k", "elbow")),
        (Stop::Elbow, _, Some(_)) => Err(unused("--theta", "elbow")),
        (Stop::Threshold, None, Some(theta)) => Ok(StopRule::Threshold(theta)),
        (Stop::Threshold, Some(_), _) => Err(unused("--k", "threshold")),
        (Stop::Threshold, None, None) => Err(Error::InvalidArgument(
            "--stop threshold needs --theta".into(),
        )),
        (Stop::Fixed, Some(k), None) => Ok(StopRule::Fixed(k)),
        (Stop::Fixed, _, Some(_)) => Err(unused("--theta", "fixed")),
        (Stop::Fixed, None, None) => Err(Error::InvalidArgument("--stop fixed needs --k".into())),
    }
}

#[derive(Args)]
struct FlOpts {
    #[arg(long = "fl", default_value = "ochiai")]
    technique: Technique,
    #[arg(long, default_value = "max")]
    tiebreak: TieBreak,
    /// Ranking cutoffs, comma separated; `inf` means no cutoff.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10,inf")]
    topn: Vec<Cutoff>,
}

#[derive(Args)]
struct DistanceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "hdist")]
    metric: Metric,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cluster: ClusterOpts,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Partition JSON (`{"clusters": [[...], ...]}`).
    #[arg(long)]
    partition: PathBuf,
    /// Ground-truth JSON.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct FlArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    fl: FlOpts,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// A single-subject spec or a suite spec (JSON).
    spec: PathBuf,
    /// Overrides the seed in the spec file.
    #[arg(long)]
    seed: Option<u64>,
    /// Coverage output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Ground truth; enables scoring and fault localisation.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    cluster: ClusterOpts,
    #[command(flatten)]
    fl: FlOpts,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory with one subdirectory per subject, each holding a coverage
    /// file (`coverage.json` or `coverage.csv`) and `ground_truth.json`.
    subjects: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "hdist")]
    metric: Vec<Metric>,
    #[arg(long, value_delimiter = ',', default_value = "avg")]
    linkage: Vec<Linkage>,
    #[arg(long, value_enum, default_value = "elbow")]
    stop: Stop,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Io(_) | Error::Parse { .. } | Error::Validation(_) => 2,
        Error::Invariant(_) => 3,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidArgument(format!("{THREADS_VAR} must be a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Distance(a) => cmd_distance(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Fl(a) => cmd_fl(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output serialises");
    text.push('\n');
    text
}

fn guess_format(path: &Path) -> CoverageFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => CoverageFormat::Csv,
        _ => CoverageFormat::Json,
    }
}

fn load_input(input: &InputArgs) -> Result<CoverageMatrix, Error> {
    let format = input
        .format
        .map_or_else(|| guess_format(&input.coverage), CoverageFormat::from);
    let text = read(&input.coverage)?;
    Ok(load_coverage(text.as_bytes(), format)?.matrix)
}

fn load_truth(path: &Path, cov: &CoverageMatrix) -> Result<GroundTruth, Error> {
    let gt = load_ground_truth(read(path)?.as_bytes())?;
    gt.validate_against(cov)?;
    Ok(gt)
}

fn cmd_distance(a: DistanceArgs) -> Result<(), Error> {
    let cov = load_input(&a.input)?;
    let d = hyperclust::distance_matrix(&cov, a.metric)?;
    write(&a.out, "distances.csv", &d.to_csv())?;
    write(&a.out, "distances.json", &d.to_json())?;
    println!("{} failing tests, metric {}", d.len(), a.metric);
    Ok(())
}

fn write_clustering(out: &Path, c: &Clustering) -> Result<(), Error> {
    if let Some(d) = &c.distances {
        write(out, "distances.csv", &d.to_csv())?;
        write(out, "distances.json", &d.to_json())?;
    }
    if let Some(dg) = &c.dendrogram {
        write(out, "dendrogram.json", &dg.to_json())?;
        write(out, "dendrogram.dot", &dg.to_dot())?;
        write(out, "mdist.csv", &dg.mdist_csv())?;
    }
    write(out, "partition.json", &c.partition.to_json())
}

fn cmd_cluster(a: ClusterArgs) -> Result<(), Error> {
    let config = a.cluster.config()?;
    let cov = load_input(&a.input)?;
    let c = cluster_failures(&cov, &config)?;
    write_clustering(&a.out, &c)?;
    println!("k={}", c.k);
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Error> {
    let p = Partition::from_json(&read(&a.partition)?)?;
    let gt = load_ground_truth(read(&a.truth)?.as_bytes())?;
    let s = hyperclust::score(&p, &gt)?;
    write(&a.out, "score.json", &to_json(&s))?;
    print_score(&s);
    Ok(())
}

fn print_score(s: &hyperclust::ClusterScore) {
    use hyperclust::format::sig6;
    println!(
        "k={} c={} h={} m={} nmi={} perfect={}",
        s.k,
        s.c,
        sig6(s.homogeneity),
        sig6(s.completeness),
        sig6(s.nmi),
        s.perfect
    );
}

#[derive(Serialize)]
struct FlDoc<'a> {
    reports: &'a [FlReport],
}

fn run_fl(
    out: &Path,
    cov: &CoverageMatrix,
    partition: &Partition,
    gt: &GroundTruth,
    opts: &FlOpts,
) -> Result<(), Error> {
    let rankings = cluster_rankings(cov, partition, opts.technique, opts.tiebreak)?;
    let reports = opts
        .topn
        .iter()
        .map(|&n| evaluate_rankings(&rankings, partition, gt, opts.technique, n))
        .collect::<Result<Vec<_>, _>>()?;
    write(
        out,
        "fl_report.json",
        &to_json(&FlDoc { reports: &reports }),
    )?;
    write(
        out,
        "rankings.csv",
        &rankings_csv(&rankings, cov.components()),
    )?;
    for r in &reports {
        println!(
            "n={} t-wef={} found={}/{} redundant={}",
            r.cutoff,
            r.t_wef,
            r.found_faults.len(),
            gt.fault_count(),
            r.redundant_rankings
        );
    }
    Ok(())
}

fn cmd_fl(a: FlArgs) -> Result<(), Error> {
    let cov = load_input(&a.input)?;
    let partition = Partition::from_json(&read(&a.partition)?)?;
    let gt = load_truth(&a.truth, &cov)?;
    run_fl(&a.out, &cov, &partition, &gt, &a.fl)
}

fn write_subject(dir: &Path, spec: &GenSpec, format: Format) -> Result<(), Error> {
    let g = generate(spec)?;
    match format {
        Format::Json => write(dir, "coverage.json", &g.coverage.to_json())?,
        Format::Csv => write(dir, "coverage.csv", &g.coverage.to_csv())?,
    }
    write(dir, "ground_truth.json", &g.ground_truth.to_json())
}

fn cmd_gen(a: GenArgs) -> Result<(), Error> {
    let text = read(&a.spec)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("subjects").is_some() {
        let mut suite = SuiteSpec::from_json(&text)?;
        if let Some(seed) = a.seed {
            suite.seed = seed;
        }
        let specs = suite.subject_specs()?;
        for (name, spec) in &specs {
            write_subject(&a.out.join(name), spec, a.format)?;
        }
        println!("{} subjects", specs.len());
    } else {
        let mut spec = GenSpec::from_json(&text)?;
        if let Some(seed) = a.seed {
            spec.seed = seed;
        }
        write_subject(&a.out, &spec, a.format)?;
        println!("1 subject");
    }
    Ok(())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<(), Error> {
    let config = a.cluster.config()?;
    let cov = load_input(&a.input)?;
    let gt = a
        .truth
        .as_deref()
        .map(|p| load_truth(p, &cov))
        .transpose()?;
    let c = cluster_failures(&cov, &config)?;
    write_clustering(&a.out, &c)?;
    println!("k={}", c.k);
    if let Some(gt) = gt {
        let s = hyperclust::score(&c.partition, &gt)?;
        write(&a.out, "score.json", &to_json(&s))?;
        print_score(&s);
        run_fl(&a.out, &cov, &c.partition, &gt, &a.fl)?;
    }
    Ok(())
}

fn load_subject(dir: &Path) -> Result<Subject, Error> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (path, format) = [
        ("coverage.json", CoverageFormat::Json),
        ("coverage.csv", CoverageFormat::Csv),
    ]
    .into_iter()
    .map(|(f, fmt)| (dir.join(f), fmt))
    .find(|(p, _)| p.is_file())
    .ok_or_else(|| Error::Validation(format!("subject `{name}` has no coverage file")))?;
    let coverage = load_coverage(read(&path)?.as_bytes(), format)?.matrix;
    let ground_truth = load_truth(&dir.join("ground_truth.json"), &coverage)?;
    Ok(Subject {
        name,
        coverage,
        ground_truth,
    })
}

fn cmd_bench(a: BenchArgs) -> Result<(), Error> {
    let stop = stop_rule(a.stop, a.k, a.theta)?;
    let configs: Vec<ClusterConfig> = a
        .metric
        .iter()
        .flat_map(|&metric| {
            a.linkage.iter().map(move |&linkage| ClusterConfig {
                metric,
                linkage,
                stop,
            })
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&a.subjects)
        .map_err(|e| Error::Validation(format!("cannot list {}: {e}", a.subjects.display())))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    dirs.retain(|p| p.is_dir());
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Validation(format!(
            "no subject directories under {}",
            a.subjects.display()
        )));
    }
    let subjects = dirs
        .iter()
        .map(|d| load_subject(d))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = bench(&subjects, &configs)?;
    let summary = summarise(&rows);
    write(&a.out, "bench.csv", &bench_csv(&rows))?;
    write(&a.out, "summary.csv", &summary_csv(&summary))?;
    for s in &summary {
        println!(
            "{} {} {}: nmi={} perfect={}",
            s.metric,
            s.linkage,
            s.stop,
            hyperclust::format::sig6(s.mean_nmi),
            hyperclust::format::sig6(s.perfect_ratio)
        );
    }
    Ok(())
}
