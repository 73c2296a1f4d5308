//! Command-line front end: environment generation, chain analysis, exact
//! solving, alignment verdicts, loss/bound evaluation, Q-learning runs, and
//! one-shot scenario reproductions.
//!
//! Exit codes: 0 success, 2 validation/precondition error, 3 infeasible
//! enumeration, 4 convergence failure, 1 anything else.

mod manifest;

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use manifest::{manifest_path, write_manifest, ManifestBuilder};
use mdpalign::{
    bellman_loss_with_form, check_alignment, eval_discounted, gen_constant_chain,
    gen_deterrent_mdp, gen_lure_mdp, greedy_policy, loss_gamma_derivatives_with_form,
    negative_reward_nonopposition_bound, positive_reward_alignment_bound, q_learning, run_scenario,
    set_terminal_value, suboptimality_bound, taylor_residual_with_form, value_iteration,
    AgentConfig, BoundInputs, EpisodeStats, Error, GenConfig, Mdp, Objective, QTable, ResidualForm,
    ScenarioKind, StateActionDistribution, DEFAULT_ENUM_CAP,
};

#[derive(Parser)]
#[command(
    name = "mdpalign",
    version,
    about = "Exact finite-MDP analysis of discounted vs total-reward objectives"
)]
struct Cli {
    /// Seed for seeded commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory for file outputs and the run manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Output format where tabular output is supported.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Lure,
    Deterrent,
    Chain,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Discounted,
    Total,
}

#[derive(Clone, Copy, ValueEnum)]
enum AutoBound {
    Thm2,
    Thm3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig3,
    Fig4,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResidualFormArg {
    PerSuccessor,
    MeanInside,
}

impl From<ResidualFormArg> for ResidualForm {
    fn from(v: ResidualFormArg) -> Self {
        match v {
            ResidualFormArg::PerSuccessor => ResidualForm::PerSuccessor,
            ResidualFormArg::MeanInside => ResidualForm::MeanInside,
        }
    }
}

#[derive(Args)]
struct GenOpts {
    /// Which environment family to generate.
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Write the MDP file here (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n_states: usize,
    #[arg(long, default_value_t = 1)]
    n_terminal: usize,
    #[arg(long, default_value_t = 3)]
    n_actions: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 500)]
    max_traj: usize,
    /// Chain length (chain kind only).
    #[arg(long, default_value_t = 5)]
    chain_len: usize,
    /// Constant reward (chain kind only).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    chain_reward: f64,
    /// Second action self-loops (true) or steps back (false); chain kind only.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    chain_branch: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark MDP and write it as JSON.
    Gen(GenOpts),
    /// Chain structure report: episodicity, accessibility, delta.
    Analyze {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        enum_cap: u64,
    },
    /// Value iteration, greedy policy, and optionally the brute-force
    /// enumeration report.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Discounted)]
        objective: ObjectiveArg,
        /// Evaluate every deterministic policy and report argmax/argmin.
        #[arg(long)]
        enumerate: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000_000)]
        max_iter: usize,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        enum_cap: u64,
    },
    /// Alignment verdict at a terminal value, either given or derived from a
    /// sufficient-condition threshold.
    Align {
        #[arg(long)]
        mdp: PathBuf,
        /// Terminal value to test.
        #[arg(
            long = "C",
            value_name = "VAL",
            conflicts_with = "auto",
            allow_hyphen_values = true
        )]
        c: Option<f64>,
        /// Derive the terminal value from a threshold (scaled by --factor).
        #[arg(long, value_enum)]
        auto: Option<AutoBound>,
        /// Safety factor applied to the threshold magnitude.
        #[arg(long, default_value_t = 10.0 / 9.0)]
        factor: f64,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        enum_cap: u64,
    },
    /// Evaluate the closed-form suboptimality bound.
    Bound {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long = "Z")]
        z: f64,
        #[arg(long = "H")]
        horizon: usize,
        #[arg(long)]
        conc: f64,
        #[arg(long)]
        barron: f64,
    },
    /// Bellman loss of a Q-table under the uniform state-action weighting,
    /// with its exact discount derivatives.
    Loss {
        #[arg(long)]
        mdp: PathBuf,
        /// Q-table JSON: {"q": [[...]], "gamma": g}.
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = ResidualFormArg::PerSuccessor)]
        residual_form: ResidualFormArg,
    },
    /// Tabular Q-learning; writes per-episode curves as CSV.
    Train {
        #[arg(long)]
        mdp: PathBuf,
        /// Terminal value used both in the environment and as the bootstrap.
        #[arg(long = "C", allow_hyphen_values = true)]
        c: f64,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        eps0: f64,
        #[arg(long, default_value_t = 300)]
        eps_halve_every: usize,
        #[arg(long, default_value_t = 500)]
        cap: usize,
    },
    /// Print the built-in example's state-value tables at terminal values 0
    /// and 2/gamma.
    Example1 {
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
    },
    /// One-shot scenario reproduction: per-seed training curves and a
    /// summary verdict.
    Repro {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2, 3, 4])]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 4000)]
        episodes: usize,
        #[arg(long, default_value_t = 100)]
        eval_episodes: usize,
        #[arg(long, default_value_t = 10.0 / 9.0)]
        factor: f64,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        enum_cap: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Validation(_)
            | Error::Shape(_)
            | Error::InvalidGamma(_)
            | Error::NonFinite { .. }
            | Error::InvalidArgument(_)
            | Error::BoundPrecondition(_)
            | Error::Json(_),
        ) => 2,
        Some(Error::EnumerationInfeasible { .. } | Error::DeltaEmpty) => 3,
        Some(Error::Convergence { .. }) => 4,
        _ => 1,
    }
}

fn load_mdp(path: &Path) -> anyhow::Result<Mdp> {
    mdpalign::load(path).with_context(|| format!("loading MDP from {}", path.display()))
}

fn emit(value: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Print a report to stdout; when an out-dir is set, also persist it as
/// `<command>.json` next to a manifest.
fn emit_report(
    command: &str,
    config: serde_json::Value,
    report: &serde_json::Value,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let target = dir.join(format!("{command}.json"));
        std::fs::write(&target, serde_json::to_string_pretty(report)?)?;
        let mut builder = ManifestBuilder::new(command, config);
        builder.output(&target);
        write_manifest(&dir.join("manifest.json"), &builder.finish())?;
    }
    emit(report)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(opts) => cmd_gen(&cli.seed, cli.out_dir.as_deref(), opts),
        Command::Analyze { mdp, enum_cap } => cmd_analyze(&mdp, enum_cap, cli.out_dir.as_deref()),
        Command::Solve {
            mdp,
            objective,
            enumerate,
            tol,
            max_iter,
            enum_cap,
        } => cmd_solve(
            &mdp,
            objective,
            enumerate,
            tol,
            max_iter,
            enum_cap,
            cli.out_dir.as_deref(),
        ),
        Command::Align {
            mdp,
            c,
            auto,
            factor,
            enum_cap,
        } => cmd_align(&mdp, c, auto, factor, enum_cap, cli.out_dir.as_deref()),
        Command::Bound {
            m,
            gamma,
            z,
            horizon,
            conc,
            barron,
        } => {
            let inputs = BoundInputs::new(m, gamma, z, horizon, conc, barron)?;
            let report = json!({
                "inputs": inputs,
                "bound": suboptimality_bound(&inputs),
            });
            emit_report(
                "bound",
                json!({"inputs": inputs}),
                &report,
                cli.out_dir.as_deref(),
            )
        }
        Command::Loss {
            mdp,
            q,
            gamma,
            residual_form,
        } => cmd_loss(
            &mdp,
            &q,
            gamma,
            residual_form.into(),
            cli.out_dir.as_deref(),
        ),
        Command::Train {
            mdp,
            c,
            episodes,
            out,
            alpha,
            eps0,
            eps_halve_every,
            cap,
        } => cmd_train(
            &mdp,
            c,
            episodes,
            &out,
            alpha,
            eps0,
            eps_halve_every,
            cap,
            cli.seed,
            cli.out_dir.as_deref(),
        ),
        Command::Example1 { gamma } => cmd_example1(gamma, cli.format, cli.out_dir.as_deref()),
        Command::Repro {
            figure,
            seeds,
            episodes,
            eval_episodes,
            factor,
            enum_cap,
        } => cmd_repro(
            figure,
            &seeds,
            episodes,
            eval_episodes,
            factor,
            enum_cap,
            cli.out_dir.as_deref(),
        ),
    }
}

fn cmd_gen(seed: &u64, out_dir: Option<&Path>, opts: GenOpts) -> anyhow::Result<()> {
    let cfg = GenConfig {
        n_states: opts.n_states,
        n_terminal: opts.n_terminal,
        n_actions: opts.n_actions,
        gamma: opts.gamma,
        seed: *seed,
        max_traj: opts.max_traj,
    };
    let (mdp, config_echo) = match opts.kind {
        GenKind::Lure => (gen_lure_mdp(&cfg)?, json!({"kind": "lure", "config": cfg})),
        GenKind::Deterrent => (
            gen_deterrent_mdp(&cfg)?,
            json!({"kind": "deterrent", "config": cfg}),
        ),
        GenKind::Chain => (
            gen_constant_chain(
                opts.chain_len,
                opts.chain_reward,
                opts.gamma,
                opts.chain_branch,
            )?,
            json!({
                "kind": "chain",
                "n": opts.chain_len,
                "reward": opts.chain_reward,
                "gamma": opts.gamma,
                "branch": opts.chain_branch,
            }),
        ),
    };
    let json_text = mdpalign::to_json_string(&mdp)?;
    let mut builder = ManifestBuilder::new("gen", config_echo);
    builder.seed(*seed);
    match (&opts.out, out_dir) {
        (Some(path), dir) => {
            let target = match dir {
                Some(d) => {
                    std::fs::create_dir_all(d)?;
                    d.join(path)
                }
                None => path.clone(),
            };
            std::fs::write(&target, &json_text)?;
            builder.output(&target);
            if let Some(mpath) = manifest_path(dir, Some(&target)) {
                write_manifest(&mpath, &builder.finish())?;
            }
            println!("{}", target.display());
        }
        (None, _) => println!("{json_text}"),
    }
    Ok(())
}

fn cmd_analyze(path: &Path, enum_cap: u64, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let mdp = load_mdp(path)?;
    let episodicity = mdpalign::is_episodic(&mdp);
    let access = mdpalign::check_accessibility(&mdp);
    let (delta, witnesses, delta_note) = match mdpalign::compute_delta(&mdp, enum_cap) {
        Ok(result) => {
            let witnesses: Vec<serde_json::Value> = result
                .witnesses
                .iter()
                .map(|(pi, s, t)| json!({"policy": pi, "from": s, "terminal": t}))
                .collect();
            (Some(result.delta), witnesses, serde_json::Value::Null)
        }
        Err(Error::DeltaEmpty) => (
            None,
            Vec::new(),
            json!("no policy reaches a terminal state within |S|-1 steps"),
        ),
        Err(other) => return Err(other.into()),
    };
    let report = json!({
        "episodic": episodicity.episodic,
        "horizon": episodicity.horizon,
        "witness_cycle": episodicity.witness_cycle,
        "accessibility": access,
        "delta": delta,
        "delta_note": delta_note,
        "witnesses": witnesses,
    });
    emit_report(
        "analyze",
        json!({"mdp": path, "enum_cap": enum_cap}),
        &report,
        out_dir,
    )
}

fn cmd_solve(
    path: &Path,
    objective: ObjectiveArg,
    enumerate: bool,
    tol: f64,
    max_iter: usize,
    enum_cap: u64,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let mdp = load_mdp(path)?;
    let q = value_iteration(&mdp, tol, max_iter)?;
    let greedy = greedy_policy(&mdp, &q);
    let greedy_values = eval_discounted(&mdp, &greedy)?;
    let mut report = json!({
        "q_table": q,
        "greedy_policy": greedy,
        "greedy_values": greedy_values,
        "argmax": serde_json::Value::Null,
        "argmin": serde_json::Value::Null,
        "values": serde_json::Value::Null,
    });
    if enumerate {
        let obj = match objective {
            ObjectiveArg::Discounted => Objective::Discounted,
            ObjectiveArg::Total => Objective::Total,
        };
        let set = mdpalign::enumerate_policy_report(&mdp, obj, enum_cap)?;
        report["objective"] = json!(set.objective);
        report["argmax"] = json!(set.argmax);
        report["argmin"] = json!(set.argmin);
        report["values"] = json!(set.values);
        report["policies"] = json!(set.policies);
        report["undefined_policies"] = json!(set.undefined_policies);
        report["no_uniform_argmax"] = json!(set.no_uniform_argmax);
        report["no_uniform_argmin"] = json!(set.no_uniform_argmin);
    }
    let config = json!({
        "mdp": path, "enumerate": enumerate, "tol": tol,
        "max_iter": max_iter, "enum_cap": enum_cap,
    });
    emit_report("solve", config, &report, out_dir)
}

fn cmd_align(
    path: &Path,
    c: Option<f64>,
    auto: Option<AutoBound>,
    factor: f64,
    enum_cap: u64,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let mdp = load_mdp(path)?;
    let (terminal_value, bound_json) = match (c, auto) {
        (Some(value), None) => (value, serde_json::Value::Null),
        (None, Some(which)) => {
            let bound = match which {
                AutoBound::Thm2 => positive_reward_alignment_bound(&mdp, enum_cap)?,
                AutoBound::Thm3 => negative_reward_nonopposition_bound(&mdp, enum_cap)?,
            };
            (factor * bound.threshold, json!(bound))
        }
        _ => {
            return Err(
                Error::InvalidArgument("exactly one of --C or --auto is required".into()).into(),
            )
        }
    };
    let verdict = check_alignment(&mdp, terminal_value, enum_cap)?;
    let report = json!({
        "bound": bound_json,
        "factor": factor,
        "terminal_value": terminal_value,
        "verdict": verdict,
    });
    let config = json!({"mdp": path, "factor": factor, "enum_cap": enum_cap});
    emit_report("align", config, &report, out_dir)
}

fn cmd_loss(
    path: &Path,
    q_path: &Path,
    gamma: f64,
    form: ResidualForm,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let mdp = load_mdp(path)?;
    let text =
        std::fs::read_to_string(q_path).with_context(|| format!("reading {}", q_path.display()))?;
    // Accept either the full {"q": ..., "gamma": ...} form or a bare matrix.
    let q: QTable = match serde_json::from_str(&text) {
        Ok(q) => q,
        Err(_) => {
            let matrix: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(Error::from)?;
            QTable { q: matrix, gamma }
        }
    };
    let dist = StateActionDistribution::uniform(&mdp);
    let loss = bellman_loss_with_form(&mdp, &q, &dist, gamma, form)?;
    let (d1, d2) = loss_gamma_derivatives_with_form(&mdp, &q, &dist, gamma, form)?;
    let residual = taylor_residual_with_form(&mdp, &q, &dist, gamma, form)?;
    let report = json!({
        "gamma_eval": gamma,
        "residual_form": form,
        "loss": loss,
        "derivative1": d1,
        "derivative2": d2,
        "taylor_residual": residual,
    });
    let config = json!({"mdp": path, "q": q_path, "gamma": gamma, "residual_form": form});
    emit_report("loss", config, &report, out_dir)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    path: &Path,
    c: f64,
    episodes: usize,
    out: &Path,
    alpha: f64,
    eps0: f64,
    eps_halve_every: usize,
    cap: usize,
    seed: u64,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let mdp = load_mdp(path)?;
    let env = set_terminal_value(&mdp, c)?;
    let agent = AgentConfig {
        alpha,
        gamma: env.gamma(),
        eps0,
        eps_halve_every,
        episodes,
        cap,
        terminal_value: c,
        seed,
    };
    let (q, stats) = q_learning(&env, &agent);
    let greedy = greedy_policy(&env, &q);

    let target = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            d.join(out)
        }
        None => out.to_path_buf(),
    };
    std::fs::write(&target, curves_csv(&stats))?;
    let mut builder = ManifestBuilder::new(
        "train",
        json!({
            "mdp": path,
            "agent": agent,
        }),
    );
    builder.seed(seed);
    builder.output(&target);
    if let Some(mpath) = manifest_path(out_dir, Some(&target)) {
        write_manifest(&mpath, &builder.finish())?;
    }
    emit(&json!({
        "out": target,
        "episodes": stats.episodes(),
        "mean_reward": stats.mean_reward(),
        "mean_length": stats.mean_length(),
        "greedy_policy": greedy,
        "q_table": q,
    }))
}

fn curves_csv(stats: &EpisodeStats) -> String {
    let mut csv = String::from("episode,total_reward,traj_len,epsilon\n");
    for i in 0..stats.episodes() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            i, stats.total_rewards[i], stats.lengths[i], stats.epsilons[i]
        ));
    }
    csv
}

fn cmd_example1(gamma: f64, format: Format, out_dir: Option<&Path>) -> anyhow::Result<()> {
    let policies: [[usize; 2]; 4] = [[0, 0], [0, 1], [1, 0], [1, 1]];
    let mut tables = Vec::new();
    for c in [0.0, 2.0 / gamma] {
        let mdp = mdpalign::build_example1(gamma, c)?;
        let mut rows = Vec::new();
        for actions in policies {
            let pi = mdpalign::DeterministicPolicy::new(&mdp, actions.to_vec())?;
            let v_gamma = eval_discounted(&mdp, &pi)?;
            let v_total = mdpalign::eval_total(&mdp, &pi)?;
            rows.push(json!({
                "policy": actions,
                "v_gamma": [v_gamma[0], v_gamma[1]],
                "v_total": [v_total[0], v_total[1]],
            }));
        }
        tables.push(json!({"terminal_value": c, "rows": rows}));
    }
    match format {
        Format::Json => emit_report(
            "example1",
            json!({"gamma": gamma}),
            &json!({"gamma": gamma, "tables": tables}),
            out_dir,
        ),
        Format::Csv => {
            let mut csv = String::from(
                "terminal_value,pi_s1,pi_s2,v_gamma_s1,v_gamma_s2,v_total_s1,v_total_s2\n",
            );
            for table in &tables {
                let c = table["terminal_value"].as_f64().unwrap();
                for row in table["rows"].as_array().unwrap() {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        c,
                        row["policy"][0],
                        row["policy"][1],
                        row["v_gamma"][0],
                        row["v_gamma"][1],
                        row["v_total"][0],
                        row["v_total"][1],
                    ));
                }
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(dir)?;
                let target = dir.join("example1.csv");
                std::fs::write(&target, &csv)?;
                let mut builder = ManifestBuilder::new("example1", json!({"gamma": gamma}));
                builder.output(&target);
                write_manifest(&dir.join("manifest.json"), &builder.finish())?;
            }
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_repro(
    figure: Figure,
    seeds: &[u64],
    episodes: usize,
    eval_episodes: usize,
    factor: f64,
    enum_cap: u64,
    out_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let (kind, name) = match figure {
        Figure::Fig3 => (ScenarioKind::Lure, "fig3"),
        Figure::Fig4 => (ScenarioKind::Deterrent, "fig4"),
    };
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("repro-{name}")));
    std::fs::create_dir_all(&dir)?;
    let base = GenConfig::default();
    let cap = base.max_traj as f64;

    let mut builder = ManifestBuilder::new(
        "repro",
        json!({
            "figure": name,
            "seeds": seeds,
            "episodes": episodes,
            "eval_episodes": eval_episodes,
            "factor": factor,
            "config": base,
        }),
    );
    let mut per_seed = Vec::new();
    let mut zero_lengths = Vec::new();
    let mut aligned_lengths = Vec::new();
    for &seed in seeds {
        builder.seed(seed);
        let out = run_scenario(kind, &base, seed, episodes, eval_episodes, factor, enum_cap)?;
        for (label, run) in [("zero", &out.zero), ("aligned", &out.aligned)] {
            let path = dir.join(format!("{name}_seed{seed}_{label}.csv"));
            std::fs::write(&path, curves_csv(&run.training))?;
            builder.output(&path);
        }
        zero_lengths.push(out.zero.eval.mean_length());
        aligned_lengths.push(out.aligned.eval.mean_length());
        per_seed.push(json!({
            "seed": seed,
            "aligned_terminal_value": out.aligned_terminal_value,
            "bound": out.bound,
            "zero": {
                "mean_reward": out.zero.eval.mean_reward(),
                "mean_length": out.zero.eval.mean_length(),
                "greedy_policy": out.zero.greedy,
            },
            "aligned": {
                "mean_reward": out.aligned.eval.mean_reward(),
                "mean_length": out.aligned.eval.mean_length(),
                "greedy_policy": out.aligned.greedy,
            },
        }));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    let zero_mean = mean(&zero_lengths);
    let aligned_mean = mean(&aligned_lengths);
    // The aligned runs should hit the cap for the lure scenario and escape
    // well under it for the deterrent scenario; terminal value zero flips
    // both.
    let as_expected = match kind {
        ScenarioKind::Lure => aligned_mean == cap && zero_mean < cap,
        ScenarioKind::Deterrent => aligned_mean < cap && zero_mean == cap,
    };
    let summary = json!({
        "figure": name,
        "per_seed": per_seed,
        "zero_mean_length": zero_mean,
        "aligned_mean_length": aligned_mean,
        "cap": cap,
        "as_expected": as_expected,
    });
    let summary_path = dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    builder.output(&summary_path);
    write_manifest(&dir.join("manifest.json"), &builder.finish())?;
    emit(&summary)
}
