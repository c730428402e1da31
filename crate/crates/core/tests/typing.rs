//! Typing judgements for the corpus under every system, against a golden
//! file, plus the erasure property.

mod common;

use smoothppl::types::{check_poly, check_sgd, check_unif, infer_program_basic, Annotation, Judgement, TypeError};

fn render<A>(r: Result<Judgement<A>, TypeError>) -> String
where
    Judgement<A>: std::fmt::Display,
{
    match r {
        Ok(j) => j.to_string().replace('\n', " | "),
        Err(e) => format!("rejected: {} (rule {} at {})", e.kind, e.rule, e.path),
    }
}

fn typing_report() -> String {
    let mut out = String::new();
    for (name, p) in common::full_corpus() {
        out.push_str(&format!("== {name}\n"));
        out.push_str(&format!("basic: {}\n", render(infer_program_basic(&p))));
        out.push_str(&format!("poly: {}\n", render::<Annotation>(check_poly(&p))));
        out.push_str(&format!("sgd: {}\n", render::<Annotation>(check_sgd(&p))));
        out.push_str(&format!("unif: {}\n", render::<Annotation>(check_unif(&p))));
    }
    out
}

#[test]
fn corpus_matches_golden() {
    let path = common::corpus_dir().join("typing.golden");
    let actual = typing_report();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).expect("golden file; run with UPDATE_GOLDEN=1 to create");
    assert_eq!(actual, expected);
}

#[test]
fn annotated_systems_erase_to_basic() {
    for (name, p) in common::full_corpus() {
        for (sys, r) in [("poly", check_poly(&p)), ("sgd", check_sgd(&p)), ("unif", check_unif(&p))] {
            if let Ok(j) = r {
                let basic =
                    infer_program_basic(&p).unwrap_or_else(|e| panic!("{name}: {sys} accepts, basic rejects: {e}"));
                assert_eq!(j.trace, basic.trace, "{name} under {sys}");
                assert_eq!(j.ty.erase(), basic.ty, "{name} under {sys}");
            }
        }
    }
}
