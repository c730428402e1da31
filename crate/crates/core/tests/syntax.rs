//! Parser and printer: error reporting and print/parse round trips.

mod common;

use proptest::prelude::*;
use smoothppl::syntax::{parse_program, parse_program_with, ParseOptions, SyntaxError};

#[test]
fn corpus_round_trips() {
    for (name, p) in common::full_corpus() {
        let printed = p.to_string();
        let q = parse_program(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert!(p.alpha_eq(&q), "{name}");
        assert_eq!(printed, q.to_string(), "{name}");
    }
}

#[test]
fn errors_carry_positions() {
    match parse_program("(program (params)\n  (body (add 1)))") {
        Err(SyntaxError::Malformed { pos, .. }) => assert_eq!((pos.line, pos.col), (2, 9)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_program("(program (params) (body (sample gamma)))"),
        Err(SyntaxError::UnknownDistribution { .. })
    ));
    assert!(matches!(parse_program("(program (params) (body y))"), Err(SyntaxError::UnboundVariable { .. })));
    assert!(matches!(
        parse_program("(program (params (t real)) (body (sigma t)))"),
        Err(SyntaxError::ReservedInternal { .. })
    ));
    assert!(parse_program_with("(program (params (t real)) (body (sigma t)))", ParseOptions { internal: true }).is_ok());
    assert!(matches!(parse_program("(program (params) (body 1)"), Err(SyntaxError::Malformed { .. })));
}

#[test]
fn const_forms_and_comments() {
    let a = parse_program("; leading comment\n(program (params) (body (const 2.5)))").unwrap();
    let b = parse_program("(program (params) (body 2.5)) ; trailing").unwrap();
    assert!(a.alpha_eq(&b));
}

#[test]
fn binders_are_renamed_apart() {
    let p = parse_program("(program (params (x real)) (body (app (lam x (app (lam x x) x)) x)))").unwrap();
    let q = parse_program("(program (params (x real)) (body (app (lam a (app (lam b b) a)) x)))").unwrap();
    assert!(p.alpha_eq(&q));
    let r = parse_program("(program (params (x real)) (body (app (lam a (app (lam b a) a)) x)))").unwrap();
    assert!(!p.alpha_eq(&r));
}

/// Random well-scoped terms over two parameters; `depth` bounds nesting.
fn term(depth: u32, vars: Vec<String>) -> BoxedStrategy<String> {
    let mut leaves: Vec<BoxedStrategy<String>> = vec![
        (-5.0f64..5.0).prop_map(|c| format!("{c}")).boxed(),
        Just("theta".to_string()).boxed(),
        Just("sd".to_string()).boxed(),
        prop_oneof![Just("normal"), Just("exponential"), Just("logistic"), Just("cauchy")]
            .prop_map(|d| format!("(sample {d})"))
            .boxed(),
    ];
    if !vars.is_empty() {
        leaves.push(proptest::sample::select(vars.clone()).boxed());
    }
    let leaf = proptest::strategy::Union::new(leaves).boxed();
    if depth == 0 {
        return leaf;
    }
    let sub = term(depth - 1, vars.clone());
    let name = format!("v{depth}");
    let mut inner = vars;
    inner.push(name.clone());
    let under = term(depth - 1, inner);
    prop_oneof![
        2 => leaf,
        1 => (sub.clone(), sub.clone()).prop_map(|(a, b)| format!("(add {a} {b})")),
        1 => (sub.clone(), sub.clone()).prop_map(|(a, b)| format!("(mul {a} {b})")),
        1 => sub.clone().prop_map(|a| format!("(neg {a})")),
        1 => sub.clone().prop_map(|a| format!("(exp {a})")),
        1 => (sub.clone(), sub.clone(), sub.clone()).prop_map(|(g, a, b)| format!("(if {g} {a} {b})")),
        1 => (under.clone(), sub.clone()).prop_map(move |(body, arg)| format!("(app (lam {name} {body}) {arg})")),
        1 => sub.clone().prop_map(|a| format!("(transform normal (lam s (add (mul s sd) {a})))")),
        1 => (1u32..4, sub).prop_map(|(n, a)| format!("(times {n} {a})")),
    ]
    .boxed()
}

proptest! {
    #[test]
    fn print_parse_round_trip(body in term(4, Vec::new())) {
        let src = format!("(program (params (theta real) (sd preal)) (body {body}))");
        let p = parse_program(&src).unwrap();
        let printed = p.to_string();
        let q = parse_program(&printed).unwrap();
        prop_assert!(p.alpha_eq(&q), "{}", printed);
        prop_assert_eq!(printed, q.to_string());
    }
}
