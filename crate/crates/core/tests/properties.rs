mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use fc_core::datalog::{eval_program_in, parse_program, Strategy as Rounds};
use fc_core::eval::{Engine, EvalConfig};
use fc_core::patternopt::{make_nice, optimize, standard_graph, treewidth, Graph};
use fc_core::relation::Relation;
use fc_core::spanner::{eval_spanner, parse_spanner};
use fc_core::syntax::{free_vars, width};
use fc_core::{parse, FactorIndex, FactorRef, Word};

use common::*;

fn word(alphabet: &'static str, max: usize) -> impl Strategy<Value = String> {
    let letters: Vec<char> = alphabet.chars().collect();
    prop::collection::vec(prop::sample::select(letters), 0..=max).prop_map(|v| v.into_iter().collect())
}

fn var() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["x", "y", "z"])
}

fn term() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["x", "y", "z", "\"a\"", "\"b\"", "\"ab\""])
}

fn atom() -> impl Strategy<Value = String> {
    let lhs = prop::sample::select(vec!["u", "x", "y", "z"]);
    prop_oneof![
        4 => (lhs, prop::collection::vec(term(), 0..=3)).prop_map(|(l, ts)| {
            if ts.is_empty() {
                format!("{l} = \"\"")
            } else {
                format!("{l} = {}", ts.join(" "))
            }
        }),
        1 => var().prop_map(|v| format!("{v} in /a*b/")),
    ]
}

/// Small random FC[REG] formulas over x, y, z.
fn formula() -> impl Strategy<Value = String> {
    atom().prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} & {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} | {b})")),
            inner.clone().prop_map(|a| format!("!({a})")),
            (var(), inner.clone()).prop_map(|(v, a)| format!("(exists {v}: {a})")),
            (var(), inner).prop_map(|(v, a)| format!("(forall {v}: {a})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(200) })]

    #[test]
    fn engines_agree_on_random_formulas(f in formula(), w in word("ab", 5)) {
        let f = parse(&f).unwrap();
        let w = Word::new(&w);
        prop_assert_eq!(eval_values(&f, &w, Engine::Naive), eval_values(&f, &w, Engine::BottomUp));
    }

    #[test]
    fn printing_then_parsing_is_identity(f in formula()) {
        let f = parse(&f).unwrap();
        prop_assert_eq!(parse(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn relation_schemes_follow_free_variables(f in formula(), w in word("ab", 4)) {
        let f = parse(&f).unwrap();
        let idx = FactorIndex::new(Word::new(&w));
        let (r, _) = fc_core::eval::eval_relation(&f, &idx, Engine::BottomUp, EvalConfig::default()).unwrap();
        let scheme: BTreeSet<String> = r.scheme().iter().cloned().collect();
        prop_assert_eq!(scheme, free_vars(&f));
        let rows = r.rows().to_vec();
        prop_assert!(rows.windows(2).all(|p| p[0] < p[1]), "rows must be sorted and distinct");
        for row in &rows {
            for &f in row {
                prop_assert_eq!(idx.canonicalize(f), f);
            }
        }
    }

    #[test]
    fn canonical_factors_compare_by_content((w, a, b) in word("ab", 10).prop_flat_map(|w| {
        let n = w.len();
        let factor = (1..=n + 1).prop_flat_map(move |s| (Just(s), 0..=n + 1 - s));
        (Just(w), factor.clone(), factor)
    })) {
        let idx = FactorIndex::new(Word::new(&w));
        let (fa, fb) = (FactorRef::new(a.0, a.1), FactorRef::new(b.0, b.1));
        let same = w[a.0 - 1..a.0 - 1 + a.1] == w[b.0 - 1..b.0 - 1 + b.1];
        prop_assert_eq!(idx.factor_eq(fa, fb), same);
        prop_assert_eq!(idx.canonicalize(fa) == idx.canonicalize(fb), same);
        prop_assert_eq!(idx.text(idx.canonicalize(fa)), w[a.0 - 1..a.0 - 1 + a.1].to_string());
    }

    #[test]
    fn join_matches_nested_loops(w in word("ab", 4), m in 0usize..40, k in 0usize..40) {
        let idx = FactorIndex::new(Word::new(&w));
        let fac = idx.factors().to_vec();
        let pick = |seed: usize, n: usize| -> Vec<Vec<FactorRef>> {
            (0..n).map(|i| vec![fac[(seed + i * 7) % fac.len()], fac[(seed * 3 + i) % fac.len()]]).collect()
        };
        let r = Relation::from_rows(&["x", "y"], pick(m, m % 9));
        let s = Relation::from_rows(&["y", "z"], pick(k, k % 9));
        let joined = r.join(&s);
        let mut want = BTreeSet::new();
        for a in r.rows() {
            for b in s.rows() {
                if a[1] == b[0] {
                    want.insert(vec![a[0], a[1], b[1]]);
                }
            }
        }
        prop_assert_eq!(joined.scheme(), &["x".to_string(), "y".into(), "z".into()][..]);
        prop_assert_eq!(joined.rows().iter().cloned().collect::<BTreeSet<_>>(), want);
    }

    #[test]
    fn tree_decompositions_are_valid(n in 1usize..10, edges in prop::collection::vec((0usize..10, 0usize..10), 0..20)) {
        let edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a % n + 1, b % n + 1))
            .filter(|(a, b)| a != b)
            .collect();
        let g = Graph::from_edges(n, &edges);
        let tw = treewidth(&g);
        prop_assert!(tw.exact);
        tw.decomposition.validate(&g).unwrap();
        prop_assert_eq!(tw.decomposition.width(), tw.width);
        let nice = make_nice(&tw.decomposition).unwrap();
        nice.validate(&g).unwrap();
        prop_assert_eq!(nice.width(), tw.width);
    }

    #[test]
    fn optimizing_patterns_preserves_relations(
        items in prop::collection::vec(prop::sample::select(vec!["x1", "x2", "x3", "\"a\""]), 1..7),
        w in word("ab", 5),
    ) {
        let vars: BTreeSet<&str> = items.iter().copied().filter(|t| !t.starts_with('"')).collect();
        prop_assume!(!vars.is_empty());
        let vars: Vec<&str> = vars.into_iter().collect();
        let f = parse(&format!("exists {}: y = {}", vars.join(", "), items.join(" "))).unwrap();
        let (g, _) = optimize(&f);
        prop_assert!(width(&g) <= width(&f));
        let w = Word::new(&w);
        prop_assert_eq!(eval_values(&g, &w, Engine::BottomUp), eval_values(&f, &w, Engine::BottomUp));
        let alpha = pattern_items(&items.join(" "));
        let sg = standard_graph(&parse(&format!("u = {}", items.join(" "))).map(|f| match f {
            fc_core::Formula::Eq(eq) => eq.rhs,
            _ => unreachable!(),
        }).unwrap()).unwrap();
        prop_assert_eq!(sg.positions.len(), alpha.len());
    }

    #[test]
    fn datalog_strategies_agree(w in word("abc", 7)) {
        let p = parse_program(
            "Ans() <- u = x y z, E(x, y, z).\n\
             E(x, y, z) <- x = \"\", y = \"\", z = \"\".\n\
             E(x, y, z) <- x = xh \"a\", y = yh \"b\", z = zh \"c\", E(xh, yh, zh).\n\
             P(x) <- x = \"\".\n\
             P(x) <- x = \"a\" y \"a\", P(y).\n\
             P(x) <- x = \"b\" y \"b\", P(y).\n",
        ).unwrap();
        let idx = FactorIndex::new(Word::new(&w));
        let naive = eval_program_in(&p, &idx, Rounds::Naive, EvalConfig::default()).unwrap();
        let semi = eval_program_in(&p, &idx, Rounds::SemiNaive, EvalConfig::default()).unwrap();
        prop_assert_eq!(&naive.relations, &semi.relations);
        let palindromes: BTreeSet<String> = naive.relations["P"].iter().map(|t| idx.text(t[0])).collect();
        let want: BTreeSet<String> = idx
            .factors()
            .iter()
            .map(|&f| idx.text(f))
            .filter(|s| {
                let c: Vec<char> = s.chars().collect();
                is_palindrome(&c) && c.len() % 2 == 0 && !c.contains(&'c')
            })
            .collect();
        prop_assert_eq!(palindromes, want);
    }

    #[test]
    fn spanners_match_brute_force(w in word("ab#", 10)) {
        for script in [
            "/S*x{a S*}#y{S*b}S*/",
            "union /S*x{ab}S*/ /x{b*}S*/",
            "project {x} (join /S*x{S*}#S*/ /S*x{a*}S*/)",
            "diff /S*x{S}S*/ /S*x{a}S*/",
        ] {
            let e = parse_spanner(script).unwrap();
            let w = Word::new(&w);
            prop_assert_eq!(eval_spanner(&e, &w).unwrap(), spanner_oracle(&e, &w), "{}", script);
        }
    }
}
