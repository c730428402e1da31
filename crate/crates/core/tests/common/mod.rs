//! Helpers shared by the integration tests: the program corpus and seeded inputs.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothppl::harness::{builtin, BUILTIN_NAMES};
use smoothppl::syntax::{parse_program, BaseType, Dist, Program};
use smoothppl::types::infer_program_basic;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("corpus")
}

/// Corpus files, sorted by name.
pub fn corpus_files() -> Vec<(String, Program)> {
    let mut entries: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "sp"))
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let src = std::fs::read_to_string(&p).expect("readable corpus file");
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let prog = parse_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, prog)
        })
        .collect()
}

/// Corpus files plus the built-in models.
pub fn full_corpus() -> Vec<(String, Program)> {
    let mut all = corpus_files();
    for name in BUILTIN_NAMES {
        all.push((format!("builtin:{name}"), builtin(name).unwrap().model.program));
    }
    all
}

/// Programs accepted by the basic system, with their trace types.
pub fn typable_corpus() -> Vec<(String, Program, Vec<Dist>)> {
    full_corpus().into_iter().filter_map(|(n, p)| infer_program_basic(&p).ok().map(|j| (n, p, j.trace.0))).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A parameter vector inside the program's domain.
pub fn random_theta(p: &Program, rng: &mut ChaCha8Rng) -> Vec<f64> {
    p.params
        .iter()
        .map(|d| match d.base {
            BaseType::Real => rng.random_range(-2.0..2.0),
            BaseType::PosReal => rng.random_range(0.2..3.0),
        })
        .collect()
}

pub fn random_trace(dists: &[Dist], rng: &mut ChaCha8Rng) -> Vec<f64> {
    dists.iter().map(|d| d.draw(rng)).collect()
}
