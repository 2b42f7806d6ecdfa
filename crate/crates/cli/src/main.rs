//! `fc`: command-line front end for FC model checking, evaluation, language
//! enumeration, optimization, translation, Datalog, and spanners.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fc_core::bridges::{
    check_fc_realization, check_foeq_realization, fc_to_c_guarded, fc_to_foeq, foeq_to_fc,
    parse_foeq,
};
use fc_core::datalog::{eval_program_in, parse_program_with, to_lfp, Strategy};
use fc_core::eval::{eval_relation, BottomUpEngine, Engine, EvalConfig, EvalStats, NaiveEngine};
use fc_core::patternopt::{make_nice, optimize, standard_graph, treewidth};
use fc_core::relation::{Relation, Substitution};
use fc_core::spanner::{eval_spanner_with, parse_spanner};
use fc_core::syntax::{free_vars, width};
use fc_core::{parse, Alphabet, FactorIndex, FactorRef, Formula, Word};

type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "fc", version, about = "Model checking and evaluation for FC formulas over words")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: Format,
    /// Include wall-clock time in the report (makes output nondeterministic).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineChoice {
    Naive,
    Bottomup,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Foeq,
    Fc,
    CGuarded,
}

#[derive(Args)]
struct WordArgs {
    /// The input word, inline or as `@file`.
    #[arg(long)]
    word: String,
    /// Reject words with letters outside this alphabet.
    #[arg(long)]
    alphabet: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether a substitution satisfies a formula.
    Check {
        #[command(flatten)]
        word: WordArgs,
        /// Formula, inline or as `@file`.
        #[arg(long)]
        formula: String,
        /// Evaluation engine; `both` runs both and fails if they disagree.
        #[arg(long, value_enum, default_value = "bottomup")]
        engine: EngineChoice,
        /// Value of a free variable, as `x=value`; repeatable.
        #[arg(long = "bind", value_name = "VAR=VALUE")]
        bindings: Vec<String>,
    },
    /// Compute the relation a formula defines on a word.
    Eval {
        #[command(flatten)]
        word: WordArgs,
        /// Formula, inline or as `@file`.
        #[arg(long)]
        formula: String,
        /// Evaluation engine; `both` runs both and fails if they disagree.
        #[arg(long, value_enum, default_value = "bottomup")]
        engine: EngineChoice,
    },
    /// List the words up to a length that satisfy a sentence.
    Lang {
        /// Sentence, inline or as `@file`.
        #[arg(long)]
        formula: String,
        /// Longest word to enumerate.
        #[arg(long, default_value_t = 6)]
        max_len: usize,
        /// Letters to build words from.
        #[arg(long, default_value = "ab")]
        alphabet: String,
        /// Evaluation engine; `both` runs both and fails if they disagree.
        #[arg(long, value_enum, default_value = "bottomup")]
        engine: EngineChoice,
    },
    /// Rewrite existentially quantified word equations to lower width.
    Optimize {
        /// Formula, inline or as `@file`.
        #[arg(long)]
        formula: String,
        /// Check that the output defines the same relations on all words up to this length.
        #[arg(long, value_name = "N")]
        verify: Option<usize>,
        /// Alphabet for `--verify`.
        #[arg(long, default_value = "ab")]
        alphabet: String,
    },
    /// Translate between FC, FO[Eq], and guarded C.
    Convert {
        /// Input formula; FO[Eq] syntax when the target is `fc`.
        #[arg(long)]
        formula: String,
        /// Target language.
        #[arg(long, value_enum)]
        to: Target,
        /// Check the translation on all words up to this length.
        #[arg(long, value_name = "N")]
        verify: Option<usize>,
        /// Alphabet for `--verify`.
        #[arg(long, default_value = "ab")]
        alphabet: String,
    },
    /// Run an FC-Datalog program on a word.
    Datalog {
        /// Program text, inline or as `@file`.
        program: String,
        #[command(flatten)]
        word: WordArgs,
        /// Use semi-naive rounds instead of naive ones.
        #[arg(long)]
        semi_naive: bool,
        /// Allow regular constraints in rule bodies.
        #[arg(long)]
        constraints: bool,
        /// Print the equivalent lfp formula instead of evaluating.
        #[arg(long)]
        to_lfp: bool,
    },
    /// Evaluate a spanner expression on a word.
    Spanner {
        /// Expression script, inline or as `@file`.
        expr: String,
        #[command(flatten)]
        word: WordArgs,
        /// Evaluation engine; `both` runs both and fails if they disagree.
        #[arg(long, value_enum, default_value = "bottomup")]
        engine: EngineChoice,
    },
    /// Standard graph and treewidth of a pattern.
    Pattern {
        /// Pattern such as `x1 x1 "a" x2`.
        pattern: String,
        /// Print only the treewidth.
        #[arg(long)]
        treewidth: bool,
    },
}

/// A command result: JSON payload plus its text rendering.
struct Report {
    payload: Value,
    text: String,
    stats: Option<EvalStats>,
}

impl Report {
    fn new(payload: Value, text: impl Into<String>) -> Self {
        Self {
            payload,
            text: text.into(),
            stats: None,
        }
    }

    fn with_stats(mut self, stats: EvalStats) -> Self {
        self.stats = Some(stats);
        self
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match run(&cli.command) {
        Ok(report) => {
            match cli.format {
                Format::Json => {
                    let mut out = json!({ "result": report.payload });
                    if let Some(s) = &report.stats {
                        out["stats"] = serde_json::to_value(s).expect("stats serialize");
                    }
                    if cli.timing {
                        out["wall_ms"] = json!(started.elapsed().as_secs_f64() * 1000.0);
                    }
                    println!("{}", serde_json::to_string_pretty(&out).expect("json output"));
                }
                Format::Text => {
                    println!("{}", report.text.trim_end());
                    if cli.timing {
                        println!("# {:.3} ms", started.elapsed().as_secs_f64() * 1000.0);
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: &Command) -> CliResult<Report> {
    match cmd {
        Command::Check {
            word,
            formula,
            engine,
            bindings,
        } => cmd_check(&read_word(word)?, &parse(&read_arg(formula)?)?, *engine, bindings),
        Command::Eval {
            word,
            formula,
            engine,
        } => cmd_eval(&read_word(word)?, &parse(&read_arg(formula)?)?, *engine),
        Command::Lang {
            formula,
            max_len,
            alphabet,
            engine,
        } => cmd_lang(&parse(&read_arg(formula)?)?, *max_len, &Alphabet::parse(alphabet)?, *engine),
        Command::Optimize {
            formula,
            verify,
            alphabet,
        } => cmd_optimize(&parse(&read_arg(formula)?)?, *verify, &Alphabet::parse(alphabet)?),
        Command::Convert {
            formula,
            to,
            verify,
            alphabet,
        } => cmd_convert(&read_arg(formula)?, *to, *verify, &Alphabet::parse(alphabet)?),
        Command::Datalog {
            program,
            word,
            semi_naive,
            constraints,
            to_lfp,
        } => cmd_datalog(&read_arg(program)?, word, *semi_naive, *constraints, *to_lfp),
        Command::Spanner { expr, word, engine } => {
            cmd_spanner(&read_arg(expr)?, &read_word(word)?, *engine)
        }
        Command::Pattern { pattern, treewidth } => cmd_pattern(pattern, *treewidth),
    }
}

/// `@path` reads the file (dropping one trailing newline); anything else is literal.
fn read_arg(arg: &str) -> CliResult<String> {
    match arg.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            let text = text.strip_suffix('\n').unwrap_or(&text);
            Ok(text.strip_suffix('\r').unwrap_or(text).to_string())
        }
        None => Ok(arg.to_string()),
    }
}

fn read_word(args: &WordArgs) -> CliResult<Word> {
    let text = read_arg(&args.word)?;
    Ok(match &args.alphabet {
        Some(a) => Word::over(&text, &Alphabet::parse(a)?)?,
        None => Word::new(&text),
    })
}

fn engines(choice: EngineChoice) -> Vec<Engine> {
    match choice {
        EngineChoice::Naive => vec![Engine::Naive],
        EngineChoice::Bottomup => vec![Engine::BottomUp],
        EngineChoice::Both => vec![Engine::Naive, Engine::BottomUp],
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Naive => "naive",
        Engine::BottomUp => "bottomup",
    }
}

/// Evaluates with each selected engine, failing if they disagree. Stats come
/// from the last engine run.
fn relation_with(
    f: &Formula,
    idx: &FactorIndex,
    choice: EngineChoice,
) -> CliResult<(Relation, EvalStats)> {
    let mut out: Option<(Relation, EvalStats)> = None;
    for e in engines(choice) {
        let (r, s) = eval_relation(f, idx, e, EvalConfig::default())?;
        if let Some((prev, _)) = &out {
            if *prev != r {
                return Err(format!("engines disagree on `{f}` over {:?}", idx.word().to_string()).into());
            }
        }
        out = Some((r, s));
    }
    Ok(out.expect("at least one engine"))
}

fn factor_json(idx: &FactorIndex, f: FactorRef) -> Value {
    json!({ "start": f.start, "len": f.len, "word": idx.text(f) })
}

fn relation_json(idx: &FactorIndex, r: &Relation) -> Value {
    let rows: Vec<Value> = r
        .rows()
        .iter()
        .map(|row| Value::Array(row.iter().map(|&f| factor_json(idx, f)).collect()))
        .collect();
    json!({ "variables": r.scheme(), "rows": rows })
}

fn cmd_check(w: &Word, f: &Formula, choice: EngineChoice, binds: &[String]) -> CliResult<Report> {
    let mut sigma = Substitution::new(w.clone());
    for b in binds {
        let (var, value) = b
            .split_once('=')
            .ok_or_else(|| format!("binding `{b}` is not of the form VAR=VALUE"))?;
        sigma = sigma.bind(var.trim(), value);
    }
    for v in free_vars(f) {
        if !sigma.bindings.contains_key(&v) {
            return Err(format!("variable `{v}` is free in the formula but has no value (use --bind)").into());
        }
    }
    let idx = FactorIndex::new(w.clone());
    let (resolved, bad) = sigma.resolve(&idx);
    let warnings: Vec<String> = bad
        .iter()
        .map(|v| format!("value {:?} of `{v}` is not a factor of the word", sigma.bindings[v].to_string()))
        .collect();
    let mut verdict: Option<bool> = None;
    let mut stats = EvalStats::default();
    if warnings.is_empty() {
        for e in engines(choice) {
            let holds = match e {
                Engine::Naive => {
                    let mut eng = NaiveEngine::new(&idx, EvalConfig::default());
                    let h = eng.holds(f, &resolved)?;
                    stats = eng.stats().clone();
                    h
                }
                Engine::BottomUp => {
                    let mut eng = BottomUpEngine::new(&idx, EvalConfig::default());
                    let h = eng.holds(f, &resolved)?;
                    stats = eng.stats().clone();
                    h
                }
            };
            if verdict.is_some_and(|v| v != holds) {
                return Err(format!("engines disagree on `{f}`").into());
            }
            verdict = Some(holds);
        }
    }
    let holds = verdict.unwrap_or(false);
    let mut text = holds.to_string();
    for warning in &warnings {
        text.push_str(&format!("\nwarning: {warning}"));
    }
    Ok(Report::new(json!({ "holds": holds, "warnings": warnings }), text).with_stats(stats))
}

fn cmd_eval(w: &Word, f: &Formula, choice: EngineChoice) -> CliResult<Report> {
    let idx = FactorIndex::new(w.clone());
    let (r, stats) = relation_with(f, &idx, choice)?;
    let text = r.display(&idx).to_string();
    Ok(Report::new(relation_json(&idx, &r), text).with_stats(stats))
}

fn cmd_lang(f: &Formula, max_len: usize, alphabet: &Alphabet, choice: EngineChoice) -> CliResult<Report> {
    let free = free_vars(f);
    if !free.is_empty() {
        let names: Vec<_> = free.into_iter().collect();
        return Err(format!("the formula is not a sentence; free variables: {}", names.join(", ")).into());
    }
    let mut words = Vec::new();
    let mut stats = EvalStats::default();
    for w in alphabet.words_up_to(max_len) {
        let idx = FactorIndex::new(w.clone());
        let (r, s) = relation_with(f, &idx, choice)?;
        stats.max_rows = stats.max_rows.max(s.max_rows);
        stats.tables += s.tables;
        stats.stages += s.stages;
        if !r.is_empty() {
            words.push(w.to_string());
        }
    }
    words.sort();
    let text = words
        .iter()
        .map(|w| if w.is_empty() { "ε".to_string() } else { w.clone() })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Report::new(json!({ "words": words }), text).with_stats(stats))
}

/// Compares `⟦a⟧(w)` and `⟦b⟧(w)` on every word up to `max_len`; returns the
/// first word where they differ.
fn first_difference(a: &Formula, b: &Formula, alphabet: &Alphabet, max_len: usize) -> CliResult<Option<Word>> {
    for w in alphabet.words_up_to(max_len) {
        let idx = FactorIndex::new(w.clone());
        let (ra, _) = eval_relation(a, &idx, Engine::BottomUp, EvalConfig::default())?;
        let (rb, _) = eval_relation(b, &idx, Engine::BottomUp, EvalConfig::default())?;
        if ra != rb {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

fn verified_note(verify: Option<usize>, failure: Option<Word>) -> CliResult<String> {
    match (verify, failure) {
        (None, _) => Ok(String::new()),
        (Some(_), Some(w)) => Err(format!("verification failed on {:?}", w.to_string()).into()),
        (Some(n), None) => Ok(format!("\n# verified on all words up to length {n}")),
    }
}

fn cmd_optimize(f: &Formula, verify: Option<usize>, alphabet: &Alphabet) -> CliResult<Report> {
    let (out, rewrites) = optimize(f);
    let failure = match verify {
        Some(n) => first_difference(f, &out, alphabet, n)?,
        None => None,
    };
    let note = verified_note(verify, failure)?;
    let (before, after) = (width(f), width(&out));
    let mut text = format!("{out}\n# width {before} -> {after}");
    if rewrites == 0 {
        text.push_str(" (no-op)");
    }
    text.push_str(&note);
    let payload = json!({
        "formula": out.to_string(),
        "width_before": before,
        "width_after": after,
        "rewrites": rewrites,
        "changed": rewrites > 0,
        "verified_up_to": verify,
    });
    Ok(Report::new(payload, text))
}

fn cmd_convert(input: &str, target: Target, verify: Option<usize>, alphabet: &Alphabet) -> CliResult<Report> {
    let (output, before, after, failure) = match target {
        Target::Foeq => {
            let f = parse(input)?;
            let g = fc_to_foeq(&f)?;
            let mut failure = None;
            if let Some(n) = verify {
                for w in alphabet.words_up_to(n) {
                    if !check_fc_realization(&f, &g, &w)? {
                        failure = Some(w);
                        break;
                    }
                }
            }
            (g.to_string(), width(&f), g.width(), failure)
        }
        Target::Fc => {
            let f = parse_foeq(input)?;
            let g = foeq_to_fc(&f, alphabet);
            let mut failure = None;
            if let Some(n) = verify {
                for w in alphabet.words_up_to(n) {
                    if !check_foeq_realization(&f, &g, &w)? {
                        failure = Some(w);
                        break;
                    }
                }
            }
            (g.to_string(), f.width(), width(&g), failure)
        }
        Target::CGuarded => {
            let f = parse(input)?;
            let g = fc_to_c_guarded(&f)?;
            let failure = match verify {
                Some(n) => first_difference(&f, &g, alphabet, n)?,
                None => None,
            };
            (g.to_string(), width(&f), width(&g), failure)
        }
    };
    let note = verified_note(verify, failure)?;
    let text = format!("{output}\n# width {before} -> {after}{note}");
    let payload = json!({
        "formula": output,
        "width_before": before,
        "width_after": after,
        "verified_up_to": verify,
    });
    Ok(Report::new(payload, text))
}

fn cmd_datalog(
    text: &str,
    word: &WordArgs,
    semi_naive: bool,
    constraints: bool,
    lfp: bool,
) -> CliResult<Report> {
    let program = parse_program_with(text, constraints)?;
    if lfp {
        let (f, args) = to_lfp(&program);
        let payload = json!({ "formula": f.to_string(), "answer_variables": args });
        return Ok(Report::new(payload, f.to_string()));
    }
    let w = read_word(word)?;
    let idx = FactorIndex::new(w);
    let strategy = if semi_naive {
        Strategy::SemiNaive
    } else {
        Strategy::Naive
    };
    let result = eval_program_in(&program, &idx, strategy, EvalConfig::default())?;
    let mut relations = BTreeMap::new();
    let mut text = String::new();
    for (name, tuples) in &result.relations {
        let rows: Vec<Value> = tuples
            .iter()
            .map(|t| Value::Array(t.iter().map(|&f| factor_json(&idx, f)).collect()))
            .collect();
        let arity = program.arities.get(name).copied().unwrap_or(0);
        relations.insert(name.clone(), json!({ "arity": arity, "rows": rows }));
        let shown: Vec<String> = tuples
            .iter()
            .map(|t| {
                let vals: Vec<String> = t.iter().map(|&f| format!("{:?}", idx.text(f))).collect();
                format!("({})", vals.join(", "))
            })
            .collect();
        text.push_str(&format!("{name} = {{{}}}\n", shown.join(", ")));
    }
    let payload = json!({ "rounds": result.rounds, "relations": relations });
    Ok(Report::new(payload, text))
}

fn cmd_spanner(text: &str, w: &Word, choice: EngineChoice) -> CliResult<Report> {
    let expr = parse_spanner(text)?;
    let vars: Vec<String> = expr.variables()?.into_iter().collect();
    let mut result = None;
    for e in engines(choice) {
        let tuples = eval_spanner_with(&expr, w, e, EvalConfig::default())?;
        if result.as_ref().is_some_and(|prev| *prev != tuples) {
            return Err(format!("engines disagree on the spanner (last: {})", engine_name(e)).into());
        }
        result = Some(tuples);
    }
    let tuples = result.expect("at least one engine");
    let rows: Vec<Value> = tuples
        .iter()
        .map(|t| Value::Array(vars.iter().map(|v| json!([t[v].start, t[v].end])).collect()))
        .collect();
    let lines: Vec<String> = tuples
        .iter()
        .map(|t| {
            let cells: Vec<String> = vars.iter().map(|v| format!("{v}={}", t[v])).collect();
            if cells.is_empty() {
                "()".to_string()
            } else {
                cells.join(" ")
            }
        })
        .collect();
    Ok(Report::new(json!({ "variables": vars, "tuples": rows }), lines.join("\n")))
}

fn cmd_pattern(text: &str, only_width: bool) -> CliResult<Report> {
    let f = parse(&format!("u = {text}"))?;
    let Formula::Eq(eq) = f else {
        return Err(format!("`{text}` is not a pattern").into());
    };
    let sg = standard_graph(&eq.rhs)?;
    let tw = treewidth(&sg.graph);
    if only_width {
        return Ok(Report::new(json!(tw.width), tw.width.to_string()));
    }
    let nice = make_nice(&tw.decomposition)?;
    let positions: Vec<String> = sg.positions.iter().map(|t| eq_term(t)).collect();
    let bags: Vec<BTreeSet<usize>> = tw.decomposition.bags.clone();
    let payload = json!({
        "pattern": eq.rhs.to_string(),
        "positions": positions,
        "edges": sg.graph.edges(),
        "treewidth": tw.width,
        "exact": tw.exact,
        "bags": bags,
        "tree_edges": tw.decomposition.edges,
        "nice_nodes": nice.nodes.len(),
    });
    let text = format!(
        "pattern: {}\npositions: {}\nedges: {:?}\ntreewidth: {}{}\nbags: {:?}",
        eq.rhs,
        positions.join(" "),
        sg.graph.edges(),
        tw.width,
        if tw.exact { "" } else { " (upper bound)" },
        bags
    );
    Ok(Report::new(payload, text))
}

fn eq_term(t: &fc_core::Term) -> String {
    match t {
        fc_core::Term::Var(v) => v.clone(),
        other => fc_core::Pattern::from_terms([other.clone()]).to_string(),
    }
}
