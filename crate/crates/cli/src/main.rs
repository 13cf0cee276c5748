//! Command-line front end for the amalgam engine.
//!
//! Every subcommand resolves a factor system (a built-in preset or a
//! key-value description file), runs one engine operation, prints a short
//! human-readable summary, and — with `--json PATH` — writes a structured
//! report embedding the fully resolved configuration, so the report alone
//! reproduces the run.
//!
//! Exit codes: 0 for success (including Trivial verdicts and Certified
//! sets), 1 for negative outcomes (Nontrivial, Violated, failed checks),
//! 2 for usage or validation errors.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use amalgam_core::{
    assemble_step, build_r0, build_rn, build_topology_base, check_c_prime, compute_pieces,
    parse_amalgam_word, parse_factor_word, replay, verify_step, BallReport, CPrimeOutcome,
    Factor, FactorSystem, Lambda, PieceReport, Solver, StepPresentation, StepReport, Strategy,
    SymmetrizedSet, TopologyBase, Verdict,
};
use amalgam_core::cancellation::{parse_ratio, ratio_string};

use config::ResolvedConfig;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "amalgam",
    version,
    about = "Normal forms, small-cancellation certificates, and word-problem verdicts \
             in free products with amalgamation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Freely reduce a word of one factor group
    Reduce(ReduceCmd),
    /// Canonical normal form of a word of the amalgam
    NormalForm(NormalFormCmd),
    /// Piece analysis of a relator set (reports only; always exits 0)
    Pieces(PiecesCmd),
    /// Certify the small-cancellation bound: exit 0 Certified, 1 Violated
    CheckCc(CheckCcCmd),
    /// Decide membership in the relator set's normal closure: exit 0 Trivial, 1 Nontrivial
    Dehn(DehnCmd),
    /// Bounded verification of the one-relator quotient step
    VerifyStep(VerifyStepCmd),
    /// Build and certify the descending normal-subgroup chain
    TopologyBase(TopologyBaseCmd),
    /// One-shot summary: lengths, certificate, ball check, step, chain
    Report(ReportCmd),
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Cmd::Reduce(cmd) => run_reduce(cmd),
        Cmd::NormalForm(cmd) => run_normal_form(cmd),
        Cmd::Pieces(cmd) => run_pieces(cmd),
        Cmd::CheckCc(cmd) => run_check_cc(cmd),
        Cmd::Dehn(cmd) => run_dehn(cmd),
        Cmd::VerifyStep(cmd) => run_verify_step(cmd),
        Cmd::TopologyBase(cmd) => run_topology_base(cmd),
        Cmd::Report(cmd) => run_report(cmd),
    }
}

// ---------------------------------------------------------------------------
// Shared argument groups and helpers.
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct SystemArgs {
    /// Built-in system: `amalgam-h1` (cyclic shared subgroup) or
    /// `amalgam-h0` (trivial shared subgroup)
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Flat key-value system description file
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SystemArgs {
    fn resolve(&self) -> Result<(FactorSystem, String)> {
        if let Some(path) = &self.config {
            Ok((config::load_file(path)?, format!("file:{}", path.display())))
        } else {
            let name = self.preset.as_deref().unwrap_or("amalgam-h1");
            Ok((config::preset(name)?, format!("preset:{name}")))
        }
    }
}

#[derive(Args, Debug)]
struct SetArgs {
    /// Relator scale parameter
    #[arg(long, default_value_t = 80)]
    cap: usize,
    /// Relator family stages, comma separated; stage 0 is the seed
    /// relator. Pass an empty string to use only explicit --relator words
    #[arg(long, default_value = "0")]
    stages: String,
    /// Extra relator given as a word (repeatable)
    #[arg(long = "relator")]
    relators: Vec<String>,
    /// Small-cancellation threshold as a ratio `p/q`
    #[arg(long, default_value = "1/10", value_parser = lambda_value)]
    lambda: Lambda,
}

impl SetArgs {
    fn stage_list(&self) -> Result<Vec<usize>> {
        self.stages
            .split(',')
            .filter(|part| !part.trim().is_empty())
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|e| anyhow!("--stages `{part}`: {e}"))
            })
            .collect()
    }
}

fn lambda_value(text: &str) -> Result<Lambda, String> {
    parse_ratio(text).ok_or_else(|| format!("expected a positive ratio `p/q`, got `{text}`"))
}

fn build_set(sys: &FactorSystem, args: &SetArgs) -> Result<SymmetrizedSet> {
    if args.cap < 2 {
        bail!("--cap must be at least 2");
    }
    let mut relators = Vec::new();
    for k in args.stage_list()? {
        relators.push(if k == 0 {
            build_r0(sys, args.cap)
        } else {
            build_rn(sys, args.cap, k)
        });
    }
    for src in &args.relators {
        relators.push(parse_amalgam_word(sys, src).map_err(|e| anyhow!("--relator `{src}`: {e}"))?);
    }
    if relators.is_empty() {
        bail!("empty relator set: give --stages and/or --relator");
    }
    SymmetrizedSet::symmetrize(sys, &relators).map_err(|e| anyhow!("relator set rejected: {e}"))
}

fn set_params(cfg: &mut ResolvedConfig, args: &SetArgs) {
    cfg.param("cap", args.cap as u64);
    let stages = args.stage_list().unwrap_or_default();
    cfg.param(
        "stages",
        stages.iter().map(|&k| k as u64).collect::<Vec<u64>>(),
    );
    if !args.relators.is_empty() {
        cfg.param("relators", args.relators.clone());
    }
    cfg.param("lambda", ratio_string(args.lambda));
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    version: &'static str,
    command: &'static str,
    config: &'a ResolvedConfig,
    report: &'a T,
}

fn emit<T: Serialize>(
    json: Option<&PathBuf>,
    command: &'static str,
    cfg: &ResolvedConfig,
    report: &T,
) -> Result<()> {
    if let Some(path) = json {
        let envelope = Envelope {
            schema: 1,
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
            report,
        };
        let mut text = serde_json::to_string_pretty(&envelope).context("serializing report")?;
        text.push('\n');
        std::fs::write(path, text)
            .with_context(|| format!("writing report to `{}`", path.display()))?;
    }
    Ok(())
}

fn print_piece_report(report: &PieceReport) {
    println!(
        "relators: {} (bases {}, representatives {})",
        report.relator_count, report.base_count, report.representative_count
    );
    println!(
        "relator lengths: {}..{}",
        report.min_relator_length, report.max_relator_length
    );
    println!("max piece length: {}", report.max_piece_length);
    println!(
        "achieved ratio: {} (threshold {})",
        report.achieved_lambda, report.lambda
    );
    println!("certified: {}", report.certified);
}

// ---------------------------------------------------------------------------
// reduce / normal-form
// ---------------------------------------------------------------------------

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FactorArg {
    #[value(name = "K", alias = "k")]
    K,
    #[value(name = "L", alias = "l")]
    L,
}

impl From<FactorArg> for Factor {
    fn from(f: FactorArg) -> Factor {
        match f {
            FactorArg::K => Factor::K,
            FactorArg::L => Factor::L,
        }
    }
}

#[derive(Args, Debug)]
struct ReduceCmd {
    #[command(flatten)]
    system: SystemArgs,
    /// Which factor group the word lives in
    #[arg(long, value_enum, default_value = "K")]
    factor: FactorArg,
    /// The word, in the standard grammar
    #[arg(long)]
    word: String,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReduceReport {
    input: String,
    reduced: String,
    weight: usize,
    shared: bool,
}

fn run_reduce(cmd: ReduceCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let factor: Factor = cmd.factor.into();
    let word =
        parse_factor_word(&sys, factor, &cmd.word).map_err(|e| anyhow!("--word: {e}"))?;
    println!("{}", word.display(&sys));
    println!("weight {}", word.weight());
    let mut cfg = ResolvedConfig::new(&sys, source);
    cfg.param("factor", factor.to_string());
    cfg.param("word", cmd.word.clone());
    let report = ReduceReport {
        input: cmd.word,
        reduced: word.display(&sys),
        weight: word.weight(),
        shared: sys.in_h(&word),
    };
    emit(cmd.json.as_ref(), "reduce", &cfg, &report)?;
    Ok(0)
}

#[derive(Args, Debug)]
struct NormalFormCmd {
    #[command(flatten)]
    system: SystemArgs,
    /// The word, in the standard grammar
    #[arg(long)]
    word: String,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct NormalFormReport {
    input: String,
    normal_form: String,
    length: usize,
    identity: bool,
}

fn run_normal_form(cmd: NormalFormCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let word = parse_amalgam_word(&sys, &cmd.word).map_err(|e| anyhow!("--word: {e}"))?;
    println!("{}", word.display(&sys));
    println!("length {}", word.len());
    let mut cfg = ResolvedConfig::new(&sys, source);
    cfg.param("word", cmd.word.clone());
    let report = NormalFormReport {
        input: cmd.word,
        normal_form: word.display(&sys),
        length: word.len(),
        identity: word.is_identity(),
    };
    emit(cmd.json.as_ref(), "normal-form", &cfg, &report)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// pieces / check-cc
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct PiecesCmd {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    set: SetArgs,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

fn run_pieces(cmd: PiecesCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let set = build_set(&sys, &cmd.set)?;
    let report = compute_pieces(&sys, &set, cmd.set.lambda);
    print_piece_report(&report);
    let mut cfg = ResolvedConfig::new(&sys, source);
    set_params(&mut cfg, &cmd.set);
    emit(cmd.json.as_ref(), "pieces", &cfg, &report)?;
    Ok(0)
}

#[derive(Args, Debug)]
struct CheckCcCmd {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    set: SetArgs,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

fn run_check_cc(cmd: CheckCcCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let set = build_set(&sys, &cmd.set)?;
    let outcome = check_c_prime(&sys, &set, cmd.set.lambda);
    let mut cfg = ResolvedConfig::new(&sys, source);
    set_params(&mut cfg, &cmd.set);
    match outcome {
        CPrimeOutcome::Certified(report) => {
            println!("Certified at {}", report.lambda);
            print_piece_report(&report);
            emit(cmd.json.as_ref(), "check-cc", &cfg, &report)?;
            Ok(0)
        }
        CPrimeOutcome::Violated(report) => {
            println!("Violated at {}", report.lambda);
            print_piece_report(&report);
            emit(cmd.json.as_ref(), "check-cc", &cfg, &report)?;
            Ok(1)
        }
    }
}

// ---------------------------------------------------------------------------
// dehn
// ---------------------------------------------------------------------------

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StrategyArg {
    /// Always rewrite the leftmost best fragment
    Leftmost,
    /// Choose uniformly among all above-half fragments (seeded)
    Random,
}

#[derive(Args, Debug)]
struct DehnCmd {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    set: SetArgs,
    /// The word to decide, in the standard grammar
    #[arg(long)]
    word: String,
    /// Rewrite selection strategy
    #[arg(long, value_enum, default_value = "leftmost")]
    strategy: StrategyArg,
    /// Seed for the random strategy
    #[arg(long, default_value_t = 0x5EED)]
    seed: u64,
    /// Write the JSON verdict (with trace) here
    #[arg(long)]
    json: Option<PathBuf>,
}

fn run_dehn(cmd: DehnCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let set = build_set(&sys, &cmd.set)?;
    let solver = Solver::new(&sys, set, cmd.set.lambda).map_err(|e| anyhow!("{e}"))?;
    let word = parse_amalgam_word(&sys, &cmd.word).map_err(|e| anyhow!("--word: {e}"))?;
    let strategy = match cmd.strategy {
        StrategyArg::Leftmost => Strategy::Leftmost,
        StrategyArg::Random => Strategy::Random(cmd.seed),
    };
    let verdict = solver.membership_with_strategy(&word, strategy);
    let mut cfg = ResolvedConfig::new(&sys, source);
    set_params(&mut cfg, &cmd.set);
    cfg.param("word", cmd.word.clone());
    cfg.param("strategy", format!("{:?}", cmd.strategy).to_lowercase());
    if matches!(cmd.strategy, StrategyArg::Random) {
        cfg.param("seed", cmd.seed);
    }
    match &verdict {
        Verdict::Trivial(trace) => {
            // Re-derive the trace before reporting it; a trace that does not
            // replay is an internal error, not a verdict.
            replay(&sys, solver.set(), &word, trace)
                .map_err(|e| anyhow!("internal: trace failed to replay: {e}"))?;
            println!("Trivial after {} rewrites (trace replayed)", trace.steps.len());
            emit(cmd.json.as_ref(), "dehn", &cfg, &verdict)?;
            Ok(0)
        }
        Verdict::Nontrivial(report) => {
            println!(
                "Nontrivial: residual length {} after {} rewrites, max fragment {}",
                report.residual_length, report.steps_taken, report.max_fragment_ratio
            );
            emit(cmd.json.as_ref(), "dehn", &cfg, &verdict)?;
            Ok(1)
        }
    }
}

// ---------------------------------------------------------------------------
// verify-step / topology-base / report
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct StepArgs {
    /// Relator scale parameter
    #[arg(long, default_value_t = 80)]
    cap: usize,
    /// Small-cancellation threshold as a ratio `p/q`
    #[arg(long, default_value = "1/10", value_parser = lambda_value)]
    lambda: Lambda,
    /// Step head word hₙ (in the first factor); the step installs
    /// h := hₙ⁻¹·x. Without it, the system's own designated h is used.
    #[arg(long)]
    head: Option<String>,
}

impl StepArgs {
    fn build(&self, sys: &FactorSystem) -> Result<StepPresentation> {
        let step = match &self.head {
            Some(src) => {
                let h_n = parse_factor_word(sys, Factor::K, src)
                    .map_err(|e| anyhow!("--head: {e}"))?;
                assemble_step(sys, &h_n, self.cap)
            }
            None => StepPresentation::from_system(sys, self.cap),
        };
        step.map_err(|e| anyhow!("{e}"))
    }

    fn params(&self, cfg: &mut ResolvedConfig, step: &StepPresentation) {
        cfg.param("cap", self.cap as u64);
        cfg.param("lambda", ratio_string(self.lambda));
        if let Some(head) = &self.head {
            cfg.param("head", head.clone());
        }
        cfg.param("h_installed", step.h_elem.display(&step.system));
    }
}

#[derive(Args, Debug)]
struct VerifyStepCmd {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    step: StepArgs,
    /// Ball radius for the embedding/intersection/malnormality checks
    #[arg(long, default_value_t = 2)]
    radius: usize,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

fn print_step_report(report: &StepReport) {
    println!(
        "relator length: {} (< {}: {})",
        report.relator_length, report.length_bound, report.length_bound_ok
    );
    println!(
        "certificate: max piece {} at threshold {} -> certified {}",
        report.certificate.max_piece_length, report.lambda, report.certificate.certified
    );
    println!(
        "embedding: {} factor words to radius {} nontrivial: {}",
        report.embedding.words_checked, report.radius, report.embedding.all_nontrivial
    );
    println!(
        "intersection: {} cross-factor pairs ok: {}",
        report.intersection_pairs_checked, report.intersection_ok
    );
    println!(
        "malnormality: {} samples ok: {}",
        report.malnormality_samples, report.malnormality_ok
    );
}

fn run_verify_step(cmd: VerifyStepCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let step = cmd.step.build(&sys)?;
    let report = verify_step(&step, cmd.radius, cmd.step.lambda).map_err(|e| anyhow!("{e}"))?;
    print_step_report(&report);
    let ok = report.all_ok();
    println!("verify-step: {}", if ok { "all checks passed" } else { "FAILED" });
    let mut cfg = ResolvedConfig::new(&sys, source);
    cmd.step.params(&mut cfg, &step);
    cfg.param("radius", cmd.radius as u64);
    emit(cmd.json.as_ref(), "verify-step", &cfg, &report)?;
    Ok(u8::from(!ok))
}

#[derive(Args, Debug)]
struct TopologyBaseCmd {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    step: StepArgs,
    /// How many chain levels to certify
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Longest selected relator stage allowed, in letters
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    /// Write the JSON report here
    #[arg(long, visible_alias = "out")]
    json: Option<PathBuf>,
}

fn print_topology_base(base: &TopologyBase) {
    println!(
        "chain: {} levels at cap {} (threshold {})",
        base.count, base.cap, base.lambda
    );
    for level in &base.levels {
        let own = if level.own_level.vacuous {
            "nontrivial (vacuous: no stage reaches it)".to_string()
        } else {
            format!(
                "nontrivial {} (max fragment {})",
                level.own_level.verdict_nontrivial, level.own_level.max_fragment_ratio
            )
        };
        let descent = match &level.descent {
            None => "- (last level)".to_string(),
            Some(d) => format!(
                "certified {} nontrivial {} own-level-trivial {}",
                d.certificate.certified, d.verdict_nontrivial, d.trivial_at_own_level
            ),
        };
        println!(
            "level {}: g = {} (len {}), k = {}, |r| = {}, own: {}, descent: {}",
            level.n, level.element, level.element_length, level.k, level.relator_length, own,
            descent
        );
    }
}

fn run_topology_base(cmd: TopologyBaseCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let step = cmd.step.build(&sys)?;
    let base = build_topology_base(&step, cmd.count, cmd.step.lambda, cmd.budget)
        .map_err(|e| anyhow!("{e}"))?;
    print_topology_base(&base);
    let ok = base.all_ok();
    println!("topology-base: {}", if ok { "all certificates hold" } else { "FAILED" });
    let mut cfg = ResolvedConfig::new(&sys, source);
    cmd.step.params(&mut cfg, &step);
    cfg.param("count", cmd.count as u64);
    cfg.param("budget", cmd.budget as u64);
    emit(cmd.json.as_ref(), "topology-base", &cfg, &base)?;
    Ok(u8::from(!ok))
}

#[derive(Args, Debug)]
struct ReportCmd {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    step: StepArgs,
    /// Ball radius for the step checks
    #[arg(long, default_value_t = 2)]
    radius: usize,
    /// Chain levels to certify
    #[arg(long, default_value_t = 3)]
    count: usize,
    /// Longest selected relator stage allowed, in letters
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    /// Write the JSON report here
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Serialize)]
struct SummaryReport {
    relator_length: usize,
    representative_count: usize,
    certificate: PieceReport,
    ball: BallReport,
    step: StepReport,
    chain: TopologyBase,
}

fn run_report(cmd: ReportCmd) -> Result<u8> {
    let (sys, source) = cmd.system.resolve()?;
    let step = cmd.step.build(&sys)?;
    let seed = SymmetrizedSet::symmetrize(&step.system, &[step.relator.clone()])
        .map_err(|e| anyhow!("relator set rejected: {e}"))?;
    let representative_count = seed.representative_count(&step.system);
    let certificate = match check_c_prime(&step.system, &seed, cmd.step.lambda) {
        CPrimeOutcome::Certified(r) | CPrimeOutcome::Violated(r) => r,
    };
    let solver =
        Solver::new(&step.system, seed, cmd.step.lambda).map_err(|e| anyhow!("{e}"))?;
    let ball = solver.ball_injectivity(cmd.radius);
    let step_report = verify_step(&step, cmd.radius, cmd.step.lambda).map_err(|e| anyhow!("{e}"))?;
    let chain = build_topology_base(&step, cmd.count, cmd.step.lambda, cmd.budget)
        .map_err(|e| anyhow!("{e}"))?;

    println!(
        "seed relator: {} letters, {} representatives",
        step.relator.len(),
        representative_count
    );
    print_piece_report(&certificate);
    println!(
        "ball: {} factor words to radius {} nontrivial: {}",
        ball.words_checked, cmd.radius, ball.all_nontrivial
    );
    print_step_report(&step_report);
    print_topology_base(&chain);

    let ok = certificate.certified && ball.all_nontrivial && step_report.all_ok() && chain.all_ok();
    println!("report: {}", if ok { "all checks passed" } else { "FAILED" });

    let mut cfg = ResolvedConfig::new(&sys, source);
    cmd.step.params(&mut cfg, &step);
    cfg.param("radius", cmd.radius as u64);
    cfg.param("count", cmd.count as u64);
    cfg.param("budget", cmd.budget as u64);
    let report = SummaryReport {
        relator_length: step.relator.len(),
        representative_count,
        certificate,
        ball,
        step: step_report,
        chain,
    };
    emit(cmd.json.as_ref(), "report", &cfg, &report)?;
    Ok(u8::from(!ok))
}
