//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use fc_core::bridges::{eval_foeq, fc_to_c_guarded, fc_to_foeq, foeq_to_fc, parse_foeq, Assignment};
use fc_core::datalog::{accepts, parse_program, to_lfp};
use fc_core::eval::{eval_relation, Engine, EvalConfig};
use fc_core::fixpoint::stages;
use fc_core::patternopt::{decompose_equation, standard_graph, treewidth};
use fc_core::regexlang::{simple_to_fc, Regex};
use fc_core::spanner::{compile_algebra, eval_spanner, parse_spanner};
use fc_core::syntax::{classify, free_vars, width, Formula};
use fc_core::{parse, Alphabet, FactorIndex, Word};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

fn oracle_equivalence() -> Outcome {
    let cases = corpus();
    ensure!(cases.len() >= 30, "corpus has only {} formulas", cases.len());
    let words = ab().words_up_to(6);
    for c in &cases {
        let f = c.formula();
        for w in &words {
            let naive = eval_values(&f, w, Engine::Naive);
            let fast = eval_values(&f, w, Engine::BottomUp);
            ensure!(naive == fast, "{} differs on {:?}", c.name, text(w));
        }
    }
    Ok(format!("{} formulas x {} words", cases.len(), words.len()))
}

pub const ABC_PROGRAM: &str = r#"
Ans() <- u = x y z, E(x, y, z).
E(x, y, z) <- x = "", y = "", z = "".
E(x, y, z) <- x = xh "a", y = yh "b", z = zh "c", E(xh, yh, zh).
"#;

fn is_anbncn(s: &str) -> bool {
    let n = s.len() / 3;
    s.len() % 3 == 0 && s == format!("{}{}{}", "a".repeat(n), "b".repeat(n), "c".repeat(n))
}

fn datalog_abc() -> Outcome {
    let p = parse_program(ABC_PROGRAM).map_err(|e| e.to_string())?;
    let (lfp, args) = to_lfp(&p);
    ensure!(args.is_empty(), "answer arity should be 0");
    let words = Alphabet::parse("abc").unwrap().words_up_to(9);
    let mut accepted = 0;
    for w in &words {
        let got = accepts(&p, w).map_err(|e| e.to_string())?;
        let s = text(w);
        ensure!(got == is_anbncn(&s), "program wrong on {s:?}");
        ensure!(holds(&lfp, w, Engine::BottomUp) == got, "lfp translation wrong on {s:?}");
        accepted += usize::from(got);
    }
    ensure!(accepted == 4, "accepted {accepted} words, expected 4");
    Ok(format!("{} words, 4 accepted", words.len()))
}

/// Loopless digraphs on `n` nodes, one per isomorphism class.
fn digraph_classes(n: usize) -> Vec<Vec<(usize, usize)>> {
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let index = |a: usize, b: usize| slots.iter().position(|&s| s == (a, b)).unwrap();
    let mut perms: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &perms {
            for v in (0..n).filter(|v| !p.contains(v)) {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        perms = next;
    }
    let maps: Vec<Vec<usize>> = perms
        .iter()
        .map(|p| slots.iter().map(|&(a, b)| index(p[a], p[b])).collect())
        .collect();
    let mut out = Vec::new();
    'masks: for mask in 0u32..(1 << slots.len()) {
        for m in &maps {
            let mut image = 0u32;
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                image |= 1 << m[i];
                bits &= bits - 1;
            }
            if image < mask {
                continue 'masks;
            }
        }
        out.push((0..slots.len()).filter(|i| mask >> i & 1 == 1).map(|i| slots[i]).collect());
    }
    out
}

fn closures() -> Outcome {
    let pal = parse(PALINDROME).unwrap();
    let words = ab().words_up_to(8);
    for w in &words {
        ensure!(
            holds(&pal, w, Engine::BottomUp) == is_palindrome(w.symbols()),
            "palindrome sentence wrong on {:?}",
            text(w)
        );
    }
    let reach = parse(REACH).unwrap();
    let mut graphs = 0;
    for n in 1..=5 {
        for edges in digraph_classes(n) {
            let (w, names) = encode_graph(n, &edges);
            let got = eval_values(&reach, &w, Engine::BottomUp);
            for a in 0..n {
                let want = reachable(n, &edges, a);
                for b in 0..n {
                    let pair = vec![names[a].clone(), names[b].clone()];
                    ensure!(
                        got.contains(&pair) == want.contains(&b),
                        "reachability {a} -> {b} wrong for {edges:?}"
                    );
                }
            }
            graphs += 1;
        }
    }
    Ok(format!("{} words, {graphs} graphs up to isomorphism", words.len()))
}

fn is_anbn(s: &str) -> bool {
    let n = s.len() / 2;
    s.len() % 2 == 0 && s == format!("{}{}", "a".repeat(n), "b".repeat(n))
}

fn fixed_points() -> Outcome {
    let lfp = parse(&an_bn("lfp")).unwrap();
    let pfp = parse(&an_bn("pfp")).unwrap();
    let op = parse(&format!("lfp[x, y, R : {EQUAL_LENGTH_BODY}](x, y)")).unwrap();
    let pop = parse(&format!("pfp[x, y, R : {EQUAL_LENGTH_BODY}](x, y)")).unwrap();
    let words = ab().words_up_to(10);
    let mut worst = 0.0f64;
    for w in &words {
        let s = text(w);
        ensure!(holds(&lfp, w, Engine::BottomUp) == is_anbn(&s), "lfp sentence wrong on {s:?}");
        let idx = FactorIndex::new(w.clone());
        let it = stages(&op, &idx, Engine::BottomUp, EvalConfig::default(), &Default::default())
            .map_err(|e| e.to_string())?;
        ensure!(it.converged, "no fixed point on {s:?}");
        let c = it.stages.iter().position(|r| *r == it.result).unwrap();
        let bound = idx.factor_count().pow(2);
        ensure!(c <= bound, "{c} stages on {s:?}, bound {bound}");
        worst = worst.max(c as f64 / bound as f64);
        if w.len() <= 4 {
            ensure!(holds(&pfp, w, Engine::BottomUp) == is_anbn(&s), "pfp sentence wrong on {s:?}");
            ensure!(
                eval_values(&op, w, Engine::BottomUp) == eval_values(&pop, w, Engine::BottomUp),
                "pfp and lfp operators differ on {s:?}"
            );
        }
    }
    Ok(format!("{} words, worst stages/|Fac|^2 = {worst:.3}", words.len()))
}

const PATTERNS: &[&str] = &[
    "x x",
    "x y x y",
    "x y y x",
    "x x x",
    "x \"a\" y \"b\" x y",
    "x y z x y z",
    "x y x z y z",
    "x1 x2 x1 x3 x2 x3",
    "x y z z y x",
    "x \"ab\" x",
    "x y \"a\" y x",
    "x1 x1 x2 x2 x3 x3",
];

fn sentence_for(alpha: &str) -> Formula {
    let vars: BTreeSet<&str> = alpha.split_whitespace().filter(|t| !t.starts_with('"')).collect();
    let vars: Vec<&str> = vars.into_iter().collect();
    parse(&format!("exists {}: u = {alpha}", vars.join(", "))).unwrap()
}

fn open_for(alpha: &str) -> Formula {
    let vars: BTreeSet<&str> = alpha.split_whitespace().filter(|t| !t.starts_with('"')).collect();
    let vars: Vec<&str> = vars.into_iter().collect();
    parse(&format!("exists {}: v = {alpha}", vars.join(", "))).unwrap()
}

fn squares(n: usize) -> String {
    (1..=n).map(|i| format!("x{i} x{i}")).collect::<Vec<_>>().join(" ")
}

fn pattern_pipeline() -> Outcome {
    let words = ab().words_up_to(6);
    let mut checked = 0;
    for alpha in PATTERNS {
        let f = sentence_for(alpha);
        let Formula::Exists(..) = &f else { unreachable!() };
        let (_, eq) = peel(&f);
        let tw = treewidth(&standard_graph(&eq).map_err(|e| e.to_string())?.graph);
        if !tw.exact || tw.width > 3 {
            continue;
        }
        let items = pattern_items(alpha);
        for g in [f, open_for(alpha)] {
            let psi = decompose_equation(&g).map_err(|e| e.to_string())?;
            let bound = 2 * tw.width + 2 + free_vars(&g).len();
            ensure!(width(&psi) <= bound, "{alpha}: width {} > {bound}", width(&psi));
            for w in &words {
                let got = eval_values(&psi, w, Engine::BottomUp);
                ensure!(got == eval_values(&g, w, Engine::BottomUp), "{alpha}: differs on {:?}", text(w));
                let free = free_vars(&g);
                if free.is_empty() {
                    let want = pattern_matches(&items, w.symbols());
                    ensure!(!got.is_empty() == want, "{alpha}: oracle differs on {:?}", text(w));
                } else {
                    let idx = FactorIndex::new(w.clone());
                    let want: BTreeSet<Vec<String>> = idx
                        .factors()
                        .iter()
                        .map(|&f| idx.text(f))
                        .filter(|y| pattern_matches(&items, &y.chars().collect::<Vec<_>>()))
                        .map(|y| vec![y])
                        .collect();
                    ensure!(got == want, "{alpha}: oracle differs on {:?}", text(w));
                }
            }
            checked += 1;
        }
    }
    for n in 1..=8 {
        let f = sentence_for(&squares(n));
        let psi = decompose_equation(&f).map_err(|e| e.to_string())?;
        ensure!(width(&psi) <= 4, "alpha_{n}: width {}", width(&psi));
        if n <= 3 {
            for w in &words {
                ensure!(
                    holds(&psi, w, Engine::BottomUp) == pattern_matches(&pattern_items(&squares(n)), w.symbols()),
                    "alpha_{n} differs on {:?}",
                    text(w)
                );
            }
        }
    }
    Ok(format!("{checked} decompositions, alpha_1..alpha_8 width <= 4"))
}

fn peel(f: &Formula) -> (Vec<String>, fc_core::Pattern) {
    let mut vars = Vec::new();
    let mut cur = f;
    while let Formula::Exists(v, b) = cur {
        vars.push(v.clone());
        cur = b;
    }
    let Formula::Eq(eq) = cur else { panic!("not an equation: {cur}") };
    (vars, eq.rhs.clone())
}

/// (our regex syntax, the same language for the `regex` crate)
const SIMPLE: &[(&str, &str)] = &[
    ("\\0", "[^\\s\\S]"),
    ("()", ""),
    ("a", "a"),
    ("(ab)*", "(ab)*"),
    ("a*", "a*"),
    ("S*", "[abc]*"),
    ("(abc)*S*", "(abc)*[abc]*"),
    ("ab*a", "ab*a"),
    ("(ab)*|ba*", "(ab)*|ba*"),
    ("aS*b", "a[abc]*b"),
    ("c*(ab)*S", "c*(ab)*[abc]"),
];

fn simple_regexes() -> Outcome {
    let sigma = Alphabet::parse("abc").unwrap();
    let words = sigma.words_up_to(8);
    for (ours, theirs) in SIMPLE {
        let r = Regex::parse(ours).map_err(|e| e.to_string())?;
        let f = simple_to_fc(&r, "x", &sigma).map_err(|e| e.to_string())?;
        ensure!(classify(&f).is_ep(), "{ours}: translation is not existential-positive");
        let oracle = regex::Regex::new(&format!("^(?:{theirs})$")).unwrap();
        for w in &words {
            let idx = FactorIndex::new(w.clone());
            let want: BTreeSet<Vec<String>> = idx
                .factors()
                .iter()
                .map(|&f| idx.text(f))
                .filter(|v| oracle.is_match(v))
                .map(|v| vec![v])
                .collect();
            let (rel, _) = eval_relation(&f, &idx, Engine::BottomUp, EvalConfig::default())
                .map_err(|e| e.to_string())?;
            ensure!(values(&rel, &idx) == want, "{ours} wrong on {:?}", text(w));
        }
    }
    Ok(format!("{} regexes x {} words", SIMPLE.len(), words.len()))
}

fn bridges() -> Outcome {
    let sigma = ab();
    let words = sigma.words_up_to(5);
    let mut sentences = 0;
    let mut open = 0;
    for c in corpus() {
        let phi = c.formula();
        if !classify(&phi).is_plain_fc() {
            continue;
        }
        let k = width(&phi);
        let fo = fc_to_foeq(&phi).map_err(|e| e.to_string())?;
        ensure!(fo.width() <= 2 * k + 3, "{}: FO width {} > {}", c.name, fo.width(), 2 * k + 3);
        let back = foeq_to_fc(&fo, &sigma);
        ensure!(width(&back) <= fo.width() + 1, "{}: FC width {} > {}", c.name, width(&back), fo.width() + 1);
        if free_vars(&phi).is_empty() {
            for w in &words {
                let want = holds(&phi, w, Engine::BottomUp);
                let via_fo = eval_foeq(&fo, w, &Assignment::new()).map_err(|e| e.to_string())?;
                ensure!(via_fo == want, "{}: FO[Eq] differs on {:?}", c.name, text(w));
                ensure!(holds(&back, w, Engine::BottomUp) == want, "{}: round trip differs on {:?}", c.name, text(w));
            }
            sentences += 1;
        } else {
            open += 1;
        }
        let guarded = fc_to_c_guarded(&phi).map_err(|e| e.to_string())?;
        for w in ab().words_up_to(6) {
            ensure!(
                eval_values(&guarded, &w, Engine::BottomUp) == eval_values(&phi, &w, Engine::BottomUp),
                "{}: guarded form differs on {:?}",
                c.name,
                text(&w)
            );
        }
    }
    let ww = foeq_to_fc(&parse_foeq("exists x: Eq(min, x, x, max)").unwrap(), &sigma);
    for w in sigma.words_up_to(8) {
        let s = w.symbols();
        let square = s.len() % 2 == 0 && s[..s.len() / 2] == s[s.len() / 2..];
        ensure!(holds(&ww, &w, Engine::BottomUp) == square, "ww sentence wrong on {:?}", text(&w));
    }
    Ok(format!("{sentences} sentences round-tripped, {open} open formulas guarded"))
}

fn spanner_scripts() -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for (p, q) in [("banana", "papaya"), ("ab", "ba")] {
        let alpha = |v: &str| format!("/S*({v}{{{p}}}|{v}{{{q}}})S*/");
        let beta = "/S*x{S*}S*y{S*}S*/".to_string();
        let rho1 = format!("join (join {} {}) {beta}", alpha("x"), alpha("y"));
        out.push((alpha("x"), true));
        out.push((beta.clone(), true));
        out.push((rho1.clone(), true));
        out.push((format!("eqsel x y ({rho1})"), true));
    }
    out.push(("diff /S*x{a}S*/ /S*x{a}b S*/".to_string(), false));
    out
}

fn spanners() -> Outcome {
    let sigma = Alphabet::parse("ab#").unwrap();
    let words = sigma.words_up_to(8);
    let scripts = spanner_scripts();
    for (script, core) in &scripts {
        let e = parse_spanner(script).map_err(|e| e.to_string())?;
        if *core {
            let f = compile_algebra(&e).map_err(|e| e.to_string())?;
            ensure!(classify(&f).is_ep(), "{script}: compiled formula is not existential-positive");
        }
        for w in &words {
            let got = eval_spanner(&e, w).map_err(|e| e.to_string())?;
            ensure!(got == spanner_oracle(&e, w), "{script} differs on {:?}", text(w));
        }
    }
    Ok(format!("{} spanners x {} words", scripts.len(), words.len()))
}

fn performance() -> Outcome {
    use rand::{Rng, SeedableRng};
    let f = parse("exists x: u = x x").unwrap();
    let wd = width(&f) as u32;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let random: String = (0..2000).map(|_| if rng.gen_bool(0.5) { 'a' } else { 'b' }).collect();
    let mut report = Vec::new();
    for (label, s, want) in [("(ab)^1000", "ab".repeat(1000), true), ("random", random, false)] {
        let start = Instant::now();
        let idx = FactorIndex::new(Word::new(&s));
        let (rel, stats) = eval_relation(&f, &idx, Engine::BottomUp, EvalConfig::default())
            .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        ensure!(!rel.is_empty() == want, "{label}: wrong answer");
        ensure!(secs < 5.0, "{label}: took {secs:.2}s");
        let bound = idx.factor_count().pow(wd);
        ensure!(stats.max_rows <= bound, "{label}: {} rows > {bound}", stats.max_rows);
        report.push(format!("{label} {secs:.3}s, max rows {}/{bound}", stats.max_rows));
    }
    Ok(report.join("; "))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("datalog a^n b^n c^n", datalog_abc),
        ("closure operators", closures),
        ("fixed points", fixed_points),
        ("pattern decomposition", pattern_pipeline),
        ("simple regexes", simple_regexes),
        ("bridges", bridges),
        ("spanners", spanners),
        ("performance", performance),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name}: {why} [{secs:.1}s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
