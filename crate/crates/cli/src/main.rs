use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use anyhow::Context as _;
use clap::{Parser, Subcommand, ValueEnum};
use tempfile::NamedTempFile;

use hcmon::adaptation::DryRunHandle;
use hcmon::compiler::{compile, emit_plan, load_plan, MonitorSpec};
use hcmon::diag::{has_errors, Diagnostic};
use hcmon::dsml::syntax::parse_document;
use hcmon::dsml::{parse_model, validate_model, ModelKind, SourceModel};
use hcmon::engine::{Baselines, EngineConfig, Monitor, Pipeline, Sinks};
use hcmon::harness::{self, parse_scenario, EvaluationReport, Mutation, ScenarioConfig};
use hcmon::par::ExecutionMode;
use hcmon::weaver::{detect_conflicts, weave, WovenModel};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_MODEL: u8 = 2;
const EXIT_VIOLATIONS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hcmon",
    version,
    about = "Monitor human-centric requirements of ML components"
)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sequential,
    Parallel,
}

impl From<Mode> for ExecutionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sequential => ExecutionMode::Sequential,
            Mode::Parallel => ExecutionMode::Parallel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check model or scenario files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Weave the five model files and report cross-model findings.
    Weave {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Print the trace chain of a requirement.
        #[arg(long, value_name = "REQUIREMENT")]
        trace: Option<String>,
    },
    /// Compile the five model files into a monitor plan.
    Compile {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Plan file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monitor an event stream against a plan.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Event file; stdin when neither this nor --listen is given.
        #[arg(long, conflicts_with = "listen")]
        events: Option<PathBuf>,
        /// Accept newline-delimited events over TCP at this address.
        #[arg(long, value_name = "ADDR")]
        listen: Option<String>,
        /// With --listen, stop after the first connection closes.
        #[arg(long, requires = "listen")]
        once: bool,
        /// Violation records; stdout when absent.
        #[arg(long)]
        violations: Option<PathBuf>,
        /// Alert records; stderr when absent.
        #[arg(long)]
        alerts: Option<PathBuf>,
        /// Adaptation audit log.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Every metric result.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Write the runtime model here when the run ends.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Resume from a snapshot taken with the same plan.
        #[arg(long)]
        restore: Option<PathBuf>,
        /// Consecutive violating evaluations before a violation is emitted.
        #[arg(long, default_value_t = 3)]
        hysteresis: u32,
        #[arg(long, value_enum, default_value = "sequential")]
        mode: Mode,
    },
    /// Generate a simulated event stream.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Mutation such as `bias(groupB,0.5)@10000+5000`; repeatable.
        #[arg(long = "mutate", value_name = "MUTATION")]
        mutate: Vec<String>,
        /// Mutation file whose mutations are all applied.
        #[arg(long)]
        mutations: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-events")]
        n_events: Option<u64>,
        /// Event file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ground-truth record file; defaults to `<out>.truth.jsonl`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Score detection of each mutation in closed-loop simulated runs.
    Evaluate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Mutation file; each mutation is evaluated on its own.
        #[arg(long)]
        mutations: Option<PathBuf>,
        #[arg(long = "mutate", value_name = "MUTATION")]
        mutate: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-events")]
        n_events: Option<u64>,
        #[arg(long)]
        grace: Option<u64>,
        #[arg(long, default_value_t = 3)]
        hysteresis: u32,
        /// Machine-readable report records.
        #[arg(long)]
        report: Option<PathBuf>,
        /// How cases are scheduled.
        #[arg(long, value_enum, default_value = "parallel")]
        mode: Mode,
    },
    /// Print the table of a saved evaluation report.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

/// A failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: Option<String>,
}

impl Failure {
    fn model(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MODEL,
            message: Some(message.into()),
        }
    }

    /// Diagnostics were already printed.
    fn reported() -> Self {
        Self {
            code: EXIT_MODEL,
            message: None,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::model(format!("{e:#}"))
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let outcome = match cli.command {
        Command::Validate { paths } => cmd_validate(&paths),
        Command::Weave { paths, trace } => cmd_weave(&paths, trace.as_deref()),
        Command::Compile { paths, out } => cmd_compile(&paths, out.as_deref()),
        Command::Run {
            plan,
            events,
            listen,
            once,
            violations,
            alerts,
            audit,
            results,
            snapshot,
            restore,
            hysteresis,
            mode,
        } => cmd_run(RunArgs {
            plan,
            events,
            listen,
            once,
            violations,
            alerts,
            audit,
            results,
            snapshot,
            restore,
            config: EngineConfig {
                hysteresis,
                mode: mode.into(),
                ..EngineConfig::default()
            },
        }),
        Command::Simulate {
            scenario,
            mutate,
            mutations,
            seed,
            n_events,
            out,
            truth,
        } => cmd_simulate(
            &scenario,
            &mutate,
            mutations.as_deref(),
            seed,
            n_events,
            out.as_deref(),
            truth,
        ),
        Command::Evaluate {
            plan,
            scenario,
            mutations,
            mutate,
            seed,
            n_events,
            grace,
            hysteresis,
            report,
            mode,
        } => cmd_evaluate(EvaluateArgs {
            plan,
            scenario,
            mutations,
            mutate,
            seed,
            n_events,
            grace,
            hysteresis,
            report,
            mode: mode.into(),
        }),
        Command::Report { input } => cmd_report(&input),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if let Some(m) = f.message {
                eprintln!("error: {m}");
            }
            ExitCode::from(f.code)
        }
    }
}

/// Output file written through a temporary sibling and renamed into place
/// on success, so readers never observe a partial file.
struct AtomicFile {
    writer: BufWriter<NamedTempFile>,
    path: PathBuf,
}

impl AtomicFile {
    fn create(path: &Path) -> anyhow::Result<Self> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut builder = tempfile::Builder::new();
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            builder.permissions(fs::Permissions::from_mode(0o644));
        }
        let tmp: NamedTempFile = builder
            .tempfile_in(dir)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(Self {
            writer: BufWriter::new(tmp),
            path: path.to_path_buf(),
        })
    }

    fn commit(self) -> anyhow::Result<()> {
        let tmp = self.writer.into_inner().map_err(|e| e.into_error())?;
        tmp.persist(&self.path)
            .with_context(|| format!("cannot write {}", self.path.display()))?;
        Ok(())
    }
}

impl Write for AtomicFile {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.writer.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = AtomicFile::create(path)?;
    f.write_all(text.as_bytes())?;
    f.commit()
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::model(format!("cannot read {}: {e}", path.display())))
}

fn print_diagnostics(file: &str, diags: &[Diagnostic]) {
    let mut sorted: Vec<&Diagnostic> = diags.iter().collect();
    sorted.sort_by_key(|d| (d.location.line, d.location.column));
    for d in sorted {
        eprintln!("{}", d.render(file));
    }
}

/// Parses and validates one model file, printing its diagnostics.
fn load_model(path: &Path) -> Result<(SourceModel, bool), Failure> {
    let text = read(path)?;
    let file = path.display().to_string();
    match parse_model(&text, None) {
        Ok(model) => {
            let diags = validate_model(&model);
            print_diagnostics(&file, &diags);
            Ok((model, has_errors(&diags)))
        }
        Err(diags) => {
            print_diagnostics(&file, &diags);
            Err(Failure::reported())
        }
    }
}

fn cmd_validate(paths: &[PathBuf]) -> Outcome {
    let mut failed = false;
    for path in paths {
        let text = read(path)?;
        let file = path.display().to_string();
        let is_scenario = parse_document(&text).is_ok_and(|d| d.kind == "scenario");
        if is_scenario {
            if let Err(d) = parse_scenario(&text) {
                print_diagnostics(&file, &[d]);
                failed = true;
            }
            continue;
        }
        match load_model(path) {
            Ok((_, errors)) => failed |= errors,
            Err(f) if f.message.is_none() => failed = true,
            Err(f) => return Err(f),
        }
    }
    Ok(if failed { EXIT_MODEL } else { EXIT_OK })
}

/// Loads, validates and weaves the five model files. Returns the woven
/// model and, per kind, the file it came from.
fn load_woven(paths: &[PathBuf]) -> Result<(WovenModel, Vec<String>), Failure> {
    let mut models = Vec::new();
    let mut files = vec!["-".to_string(); ModelKind::ALL.len()];
    let mut failed = false;
    for path in paths {
        match load_model(path) {
            Ok((model, errors)) => {
                failed |= errors;
                files[model.kind.index()] = path.display().to_string();
                models.push(model);
            }
            Err(f) if f.message.is_none() => failed = true,
            Err(f) => return Err(f),
        }
    }
    if failed {
        return Err(Failure::reported());
    }
    let print = |diags: &[Diagnostic]| {
        for (i, file) in files.iter().enumerate() {
            let mine: Vec<Diagnostic> = diags
                .iter()
                .filter(|d| d.model.map(ModelKind::index) == Some(i))
                .cloned()
                .collect();
            print_diagnostics(file, &mine);
        }
        let unplaced: Vec<Diagnostic> = diags
            .iter()
            .filter(|d| d.model.is_none())
            .cloned()
            .collect();
        print_diagnostics("-", &unplaced);
    };
    let woven = match weave(&models) {
        Ok(w) => w,
        Err(diags) => {
            print(&diags);
            return Err(Failure::reported());
        }
    };
    print(&woven.diagnostics);
    if !woven.is_compilable() {
        return Err(Failure::reported());
    }
    let conflicts = detect_conflicts(&woven);
    print(&conflicts);
    if has_errors(&conflicts) {
        return Err(Failure::reported());
    }
    Ok((woven, files))
}

fn cmd_weave(paths: &[PathBuf], trace: Option<&str>) -> Outcome {
    let (woven, _) = load_woven(paths)?;
    let mut out = io::stdout().lock();
    match trace {
        Some(req) => {
            let chain = woven
                .trace(req)
                .map_err(|e| Failure::model(e.to_string()))?;
            let _ = out.write_all(woven.render_trace(&chain).as_bytes());
        }
        None => {
            for e in &woven.edges {
                let _ = writeln!(
                    out,
                    "{} {} {}",
                    woven.node(e.from).qualified,
                    e.kind,
                    woven.node(e.to).qualified
                );
            }
        }
    }
    Ok(EXIT_OK)
}

fn normalized(p: &Path) -> Vec<Component<'_>> {
    let mut out: Vec<Component<'_>> = Vec::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir if matches!(out.last(), Some(Component::Normal(_))) => {
                out.pop();
            }
            c => out.push(c),
        }
    }
    out
}

/// `target` expressed relative to directory `base`, both taken as absolute.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let (t, b) = (normalized(target), normalized(base));
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c.as_os_str());
    }
    rel
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn to_slashes(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn cmd_compile(paths: &[PathBuf], out: Option<&Path>) -> Outcome {
    let (woven, files) = load_woven(paths)?;
    let mut spec = compile(&woven).map_err(|diags| {
        print_diagnostics(&files[ModelKind::Tech.index()], &diags);
        Failure::reported()
    })?;
    // Baselines are written relative to the context model; plans refer to
    // them relative to the plan file.
    let context_dir =
        std::path::absolute(parent_dir(Path::new(&files[ModelKind::Context.index()])))
            .context("cannot resolve the context model directory")?;
    let plan_dir = std::path::absolute(out.map_or_else(|| PathBuf::from("."), parent_dir))
        .context("cannot resolve the plan directory")?;
    for e in &mut spec.evaluators {
        if let Some(b) = &e.baseline {
            if Path::new(b).is_relative() {
                e.baseline = Some(to_slashes(&relative_to(&context_dir.join(b), &plan_dir)));
            }
        }
    }
    let text = emit_plan(&spec);
    match out {
        Some(path) => write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn load_spec(plan: &Path) -> Result<(Arc<MonitorSpec>, Baselines), Failure> {
    let text = read(plan)?;
    let spec = load_plan(&text).map_err(|diags| {
        print_diagnostics(&plan.display().to_string(), &diags);
        Failure::reported()
    })?;
    let baselines =
        Baselines::load(&spec, &parent_dir(plan)).map_err(|e| Failure::model(e.to_string()))?;
    Ok((Arc::new(spec), baselines))
}

struct RunArgs {
    plan: PathBuf,
    events: Option<PathBuf>,
    listen: Option<String>,
    once: bool,
    violations: Option<PathBuf>,
    alerts: Option<PathBuf>,
    audit: Option<PathBuf>,
    results: Option<PathBuf>,
    snapshot: Option<PathBuf>,
    restore: Option<PathBuf>,
    config: EngineConfig,
}

enum Sink {
    Std(Box<dyn Write>),
    File(AtomicFile),
}

impl Sink {
    fn open(path: Option<&Path>, default: impl FnOnce() -> Box<dyn Write>) -> anyhow::Result<Self> {
        Ok(match path {
            Some(p) => Sink::File(AtomicFile::create(p)?),
            None => Sink::Std(default()),
        })
    }

    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Std(w) => w.as_mut(),
            Sink::File(f) => f,
        }
    }

    fn commit(self) -> anyhow::Result<()> {
        match self {
            Sink::Std(mut w) => Ok(w.flush()?),
            Sink::File(f) => f.commit(),
        }
    }
}

/// Spawns a thread that forwards input lines; the channel closes at end of
/// input so the main loop can poll for an interrupt in between.
fn spawn_source(args: &RunArgs) -> Result<mpsc::Receiver<io::Result<String>>, Failure> {
    let (tx, rx) = mpsc::sync_channel::<io::Result<String>>(4096);
    let forward =
        move |reader: Box<dyn BufRead>, tx: &mpsc::SyncSender<io::Result<String>>| -> bool {
            for line in reader.lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    return false;
                }
            }
            true
        };
    if let Some(addr) = &args.listen {
        let listener = TcpListener::bind(addr)
            .map_err(|e| Failure::model(format!("cannot listen on {addr}: {e}")))?;
        if let Ok(local) = listener.local_addr() {
            log::info!("listening on {local}");
        }
        let once = args.once;
        thread::spawn(move || {
            for conn in listener.incoming() {
                match conn {
                    Ok(stream) => {
                        log::info!("connection from {:?}", stream.peer_addr().ok());
                        if !forward(Box::new(BufReader::new(stream)), &tx) || once {
                            return;
                        }
                    }
                    Err(e) => log::warn!("failed connection: {e}"),
                }
            }
        });
    } else {
        let reader: Box<dyn BufRead + Send> = match &args.events {
            Some(p) => {
                Box::new(BufReader::new(fs::File::open(p).map_err(|e| {
                    Failure::model(format!("cannot read {}: {e}", p.display()))
                })?))
            }
            None => Box::new(BufReader::new(io::stdin())),
        };
        thread::spawn(move || {
            forward(reader, &tx);
        });
    }
    Ok(rx)
}

fn cmd_run(args: RunArgs) -> Outcome {
    let (spec, baselines) = load_spec(&args.plan)?;
    let monitor = match &args.restore {
        Some(path) => Monitor::restore(spec, &baselines, args.config, &read(path)?)
            .map_err(|e| Failure::model(e.to_string()))?,
        None => Monitor::new(spec, &baselines, args.config),
    };
    let mut pipeline = Pipeline::new(monitor);
    let mut handle = DryRunHandle::default();

    let mut violations = Sink::open(args.violations.as_deref(), || {
        Box::new(BufWriter::new(io::stdout()))
    })?;
    let mut alerts = Sink::open(args.alerts.as_deref(), || Box::new(io::stderr()))?;
    let mut audit = Sink::open(args.audit.as_deref(), || Box::new(io::sink()))?;
    let mut results = args
        .results
        .as_deref()
        .map(|p| AtomicFile::create(p))
        .transpose()?;

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        let _ = ctrlc::set_handler(move || {
            if stop.swap(true, Ordering::SeqCst) {
                std::process::exit(130);
            }
        });
    }
    let rx = spawn_source(&args)?;
    {
        let mut sinks = Sinks {
            violations: violations.writer(),
            alerts: alerts.writer(),
            audit: audit.writer(),
            results: results.as_mut().map(|r| r as &mut dyn Write),
        };
        loop {
            if stop.load(Ordering::SeqCst) {
                log::info!("interrupted; flushing");
                break;
            }
            let line = match rx.recv_timeout(Duration::from_millis(100)) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    log::error!("input failed: {e}");
                    break;
                }
                Err(mpsc::RecvTimeoutError::Timeout) => continue,
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
            };
            if line.trim().is_empty() {
                continue;
            }
            let step = pipeline.feed_line(&line, &mut handle);
            sinks.write(&step).context("cannot write output")?;
        }
        sinks.flush().context("cannot write output")?;
    }
    violations.commit()?;
    alerts.commit()?;
    audit.commit()?;
    if let Some(r) = results {
        r.commit()?;
    }
    if let Some(path) = &args.snapshot {
        write_atomic(path, &pipeline.monitor.snapshot())?;
    }
    let summary = pipeline.summary();
    eprintln!(
        "summary {}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(if summary.violations > 0 {
        EXIT_VIOLATIONS
    } else {
        EXIT_OK
    })
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = read(path)?;
    let file = parse_scenario(&text).map_err(|d| {
        print_diagnostics(&path.display().to_string(), &[d]);
        Failure::reported()
    })?;
    file.config.ok_or_else(|| {
        Failure::model(format!(
            "{} declares no settings or components",
            path.display()
        ))
    })
}

fn load_mutations(file: Option<&Path>, inline: &[String]) -> Result<Vec<Mutation>, Failure> {
    let mut out = Vec::new();
    if let Some(path) = file {
        let text = read(path)?;
        let parsed = parse_scenario(&text).map_err(|d| {
            print_diagnostics(&path.display().to_string(), &[d]);
            Failure::reported()
        })?;
        out.extend(parsed.mutations);
    }
    for m in inline {
        out.push(m.parse::<Mutation>().map_err(|e| Failure {
            code: EXIT_USAGE,
            message: Some(e),
        })?);
    }
    Ok(out)
}

fn cmd_simulate(
    scenario: &Path,
    mutate: &[String],
    mutations: Option<&Path>,
    seed: Option<u64>,
    n_events: Option<u64>,
    out: Option<&Path>,
    truth: Option<PathBuf>,
) -> Outcome {
    let mut config = load_scenario(scenario)?;
    config.seed = seed.unwrap_or(config.seed);
    config.n_events = n_events.unwrap_or(config.n_events);
    let mutations = load_mutations(mutations, mutate)?;
    let sim =
        harness::Simulator::new(&config, &mutations).map_err(|e| Failure::model(e.to_string()))?;
    let ground_truth = sim.truth();
    let mut sink = Sink::open(out, || Box::new(BufWriter::new(io::stdout())))?;
    for ev in sim {
        let w = sink.writer();
        w.write_all(ev.to_line().as_bytes())
            .context("cannot write events")?;
        w.write_all(b"\n").context("cannot write events")?;
    }
    sink.commit()?;
    let truth =
        truth.or_else(|| out.map(|o| PathBuf::from(format!("{}.truth.jsonl", o.display()))));
    if let Some(path) = truth {
        write_atomic(&path, &ground_truth.to_lines())?;
    }
    Ok(EXIT_OK)
}

struct EvaluateArgs {
    plan: PathBuf,
    scenario: PathBuf,
    mutations: Option<PathBuf>,
    mutate: Vec<String>,
    seed: Option<u64>,
    n_events: Option<u64>,
    grace: Option<u64>,
    hysteresis: u32,
    report: Option<PathBuf>,
    mode: ExecutionMode,
}

fn cmd_evaluate(args: EvaluateArgs) -> Outcome {
    let (spec, baselines) = load_spec(&args.plan)?;
    let mut config = load_scenario(&args.scenario)?;
    config.seed = args.seed.unwrap_or(config.seed);
    config.n_events = args.n_events.unwrap_or(config.n_events);
    config.grace = args.grace.unwrap_or(config.grace);
    let mutations = load_mutations(args.mutations.as_deref(), &args.mutate)?;
    let engine = EngineConfig {
        hysteresis: args.hysteresis,
        ..EngineConfig::default()
    };
    let report = harness::evaluate(spec, &baselines, engine, &config, &mutations, args.mode)
        .map_err(|e| Failure::model(e.to_string()))?;
    print!("{}", report.table());
    if let Some(path) = &args.report {
        write_atomic(path, &report.to_lines())?;
    }
    Ok(EXIT_OK)
}

fn cmd_report(input: &Path) -> Outcome {
    let text = read(input)?;
    let report = EvaluationReport::from_lines(&text)
        .map_err(|e| Failure::model(format!("{}: {e}", input.display())))?;
    print!("{}", report.table());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(
            relative_to(Path::new("/a/models/b/x.jsonl"), Path::new("/a/out")),
            PathBuf::from("../models/b/x.jsonl")
        );
        assert_eq!(
            relative_to(Path::new("/a/b/./x"), Path::new("/a/b")),
            PathBuf::from("x")
        );
        assert_eq!(
            relative_to(Path::new("/a/c/../b/x"), Path::new("/a/b")),
            PathBuf::from("x")
        );
    }
}
