//! Command-line front end. Exit status: 0 ok, 1 usage error, 2 runtime failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anchorbench::agents::{Condition, PolicyParams, Role};
use anchorbench::catalog::Catalog;
use anchorbench::experiment::{
    analyze_experiment, plan_experiment, resurvey_session, run_experiment, survey_experiment, AdapterKind, AgentSource,
    AgentSpec, ChatMode, ChatSpec, ExperimentConfig, Resources, RunOptions,
};
use anchorbench::store::ExperimentStore;
use anchorbench::survey::SurveyPolicy;
use anchorbench::transport::{BackendConfig, Scalar};

#[derive(Parser)]
#[command(name = "anchorbench", version, about = "Anchoring-effect negotiation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a catalog file and print a summary.
    Validate { catalog: PathBuf },
    /// Write the experiment manifest and session plan.
    Plan(PlanArgs),
    /// Run pending sessions; completed ones are skipped.
    Run(RunArgs),
    /// Administer the questionnaire to finished sessions.
    Survey(SurveyArgs),
    /// Write condition tables and test results.
    Analyze {
        #[arg(long)]
        dir: PathBuf,
        /// Report directory (default: <dir>/report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ask one agent the questionnaire repeatedly about a stored session.
    Resurvey(ResurveyArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    catalog: PathBuf,
    /// Experiment directory.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value = "experiment")]
    id: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    per_product: u32,
    #[arg(long, value_delimiter = ',', default_value = "baseline,seller_anchor,seller_anchor_buyer_informed")]
    conditions: Vec<Condition>,
    #[arg(long, default_value_t = 20)]
    t_max: usize,
    /// Adjectives per trait dimension.
    #[arg(long = "adjectives", default_value_t = 3)]
    n_adjectives: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::AcceptedOnly)]
    survey_policy: PolicyArg,
    #[command(flatten)]
    backends: BackendArgs,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Run at most this many pending sessions.
    #[arg(long)]
    limit: Option<usize>,
    #[command(flatten)]
    backends: BackendArgs,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct SurveyArgs {
    #[arg(long)]
    dir: PathBuf,
    #[command(flatten)]
    backends: BackendArgs,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct ResurveyArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    session: String,
    #[arg(long, default_value = "buyer")]
    role: Role,
    #[arg(long, default_value_t = 10)]
    times: usize,
    #[command(flatten)]
    backends: BackendArgs,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    AcceptedOnly,
    All,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BackendKind {
    Scripted,
    Http,
    Record,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdapterArg {
    Openai,
    Messages,
}

#[derive(Args)]
struct ResourceArgs {
    /// Directory of prompt templates replacing the builtin ones.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    questionnaire: Option<PathBuf>,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Scripted)]
    seller_backend: BackendKind,
    #[arg(long, value_enum, default_value_t = BackendKind::Scripted)]
    buyer_backend: BackendKind,
    #[arg(long, default_value = "gpt-4o")]
    seller_model: String,
    #[arg(long, default_value = "gpt-4o")]
    buyer_model: String,
    #[arg(long, value_enum, default_value_t = AdapterArg::Openai)]
    adapter: AdapterArg,
    #[arg(long, default_value = "https://api.openai.com")]
    base_url: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "ANCHORBENCH_API_KEY")]
    api_key_env: String,
    /// Fixture file for record/replay backends (seller and buyer share it).
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Sent as `reasoning_effort` on buyer requests.
    #[arg(long)]
    reasoning_effort: Option<String>,
    #[arg(long, default_value_t = 60)]
    rate_limit: u32,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Scripted seller anchor multiplier.
    #[arg(long)]
    anchor_multiplier: Option<f64>,
    /// Scripted buyer susceptibility coefficient.
    #[arg(long)]
    susceptibility: Option<f64>,
}

impl BackendArgs {
    fn spec(&self, role: Role) -> Result<AgentSpec, String> {
        let (kind, model) = match role {
            Role::Seller => (self.seller_backend, &self.seller_model),
            Role::Buyer => (self.buyer_backend, &self.buyer_model),
        };
        if kind == BackendKind::Scripted {
            let mut params = PolicyParams::default();
            if let Some(m) = self.anchor_multiplier {
                params.anchor_multiplier = m;
            }
            if let Some(c) = self.susceptibility {
                params.susceptibility_coeff = c;
            }
            params.validate()?;
            return Ok(AgentSpec::Scripted(params));
        }
        let fixture = || {
            self.fixture
                .clone()
                .ok_or_else(|| "--fixture is required for record and replay backends".to_string())
        };
        let mode = match kind {
            BackendKind::Http => ChatMode::Http,
            BackendKind::Record => ChatMode::Record(fixture()?),
            _ => ChatMode::Replay(fixture()?),
        };
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} is outside [0, 2]", self.temperature));
        }
        let mut extra_params = BTreeMap::new();
        if let (Role::Buyer, Some(effort)) = (role, &self.reasoning_effort) {
            extra_params.insert("reasoning_effort".to_string(), Scalar::Text(effort.clone()));
        }
        let config = BackendConfig {
            base_url: self.base_url.clone(),
            auth_env_var: self.api_key_env.clone(),
            rate_limit_per_minute: self.rate_limit,
            timeout: Duration::from_secs(self.timeout_secs),
            ..BackendConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(AgentSpec::Chat(ChatSpec {
            mode,
            adapter: match self.adapter {
                AdapterArg::Openai => AdapterKind::OpenaiChat,
                AdapterArg::Messages => AdapterKind::Messages,
            },
            config,
            model_id: model.clone(),
            temperature: self.temperature,
            extra_params,
        }))
    }

    fn specs(&self) -> Result<(AgentSpec, AgentSpec), String> {
        Ok((self.spec(Role::Seller)?, self.spec(Role::Buyer)?))
    }
}

impl ResourceArgs {
    fn load(&self) -> Result<Resources, String> {
        Resources::load(self.templates.as_deref(), self.lexicon.as_deref(), self.questionnaire.as_deref())
            .map_err(|e| e.to_string())
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage<E: ToString>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime<E: ToString>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn sources(backends: &BackendArgs) -> Result<(AgentSource, AgentSource), Failure> {
    let (s, b) = backends.specs().map_err(usage)?;
    Ok((
        AgentSource::from_spec(&s).map_err(runtime)?,
        AgentSource::from_spec(&b).map_err(runtime)?,
    ))
}

fn open_checked(dir: &Path, resources: &Resources) -> Result<(), Failure> {
    let (_, manifest) = ExperimentStore::open(dir).map_err(runtime)?;
    resources.check(&manifest).map_err(usage)
}

fn report_failures(failed: &[(String, String)]) -> Result<(), Failure> {
    if failed.is_empty() {
        return Ok(());
    }
    for (id, msg) in failed {
        eprintln!("failed {id}: {msg}");
    }
    Err(Failure::Runtime(format!("{} session(s) failed", failed.len())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { catalog } => {
            let c = Catalog::load(&catalog).map_err(usage)?;
            println!("{}: {} scenarios ok", catalog.display(), c.len());
        }
        Command::Plan(a) => {
            let (seller, buyer) = a.backends.specs().map_err(usage)?;
            let resources = a.resources.load().map_err(usage)?;
            let catalog = Catalog::load(&a.catalog).map_err(usage)?;
            let config = ExperimentConfig {
                experiment_id: a.id,
                seed: a.seed,
                conditions: a.conditions,
                per_product: a.per_product,
                t_max: a.t_max,
                n_adjectives: a.n_adjectives,
                survey_policy: match a.survey_policy {
                    PolicyArg::AcceptedOnly => SurveyPolicy::AcceptedOnly,
                    PolicyArg::All => SurveyPolicy::All,
                },
                seller,
                buyer,
            };
            let manifest = plan_experiment(&catalog, &config, &resources).map_err(usage)?;
            ExperimentStore::create(&a.dir, &manifest).map_err(runtime)?;
            println!("planned {} sessions in {}", manifest.plan.len(), a.dir.display());
        }
        Command::Run(a) => {
            let resources = a.resources.load().map_err(usage)?;
            if a.concurrency == 0 {
                return Err(usage("--concurrency must be positive"));
            }
            open_checked(&a.dir, &resources)?;
            let (seller, buyer) = sources(&a.backends)?;
            let options = RunOptions {
                concurrency: a.concurrency,
                limit: a.limit,
            };
            let s = run_experiment(&a.dir, &seller, &buyer, &resources, options).map_err(runtime)?;
            println!(
                "completed {} skipped {} failed {} remaining {}",
                s.completed,
                s.skipped,
                s.failed.len(),
                s.remaining
            );
            report_failures(&s.failed)?;
        }
        Command::Survey(a) => {
            let resources = a.resources.load().map_err(usage)?;
            open_checked(&a.dir, &resources)?;
            let (seller, buyer) = sources(&a.backends)?;
            let s = survey_experiment(&a.dir, &seller, &buyer, &resources).map_err(runtime)?;
            println!(
                "administered {} already done {} not eligible {} failed {}",
                s.administered,
                s.already_done,
                s.not_eligible,
                s.failed.len()
            );
            report_failures(&s.failed)?;
        }
        Command::Analyze { dir, out } => {
            let out = out.unwrap_or_else(|| dir.join("report"));
            let report = analyze_experiment(&dir, &out).map_err(runtime)?;
            print!("{}", report.to_text());
        }
        Command::Resurvey(a) => {
            let resources = a.resources.load().map_err(usage)?;
            if a.times == 0 {
                return Err(usage("--times must be positive"));
            }
            let (seller, buyer) = sources(&a.backends)?;
            let source = if a.role == Role::Seller { &seller } else { &buyer };
            let r = resurvey_session(&a.dir, &a.session, a.role, source, &resources, a.times).map_err(runtime)?;
            println!("item\tmean\tsd");
            for i in &r.items {
                let sd = i.sd.map_or("-".to_string(), |v| format!("{v:.3}"));
                println!("{}\t{:.3}\t{}", i.item, i.mean, sd);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
