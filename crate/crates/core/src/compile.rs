//! Source-to-source smoothing of first-order programs.
//!
//! Each conditional `if L M N` becomes
//! `(app (lam %wK (add (mul (sigma (neg %wK)) M) (mul (sigma %wK) N))) L)`,
//! so the guard is still evaluated first and every branch still draws.

use std::fmt;

use thiserror::Error;

use crate::syntax::{Program, Term, UnOp};
use crate::types::{first_order, infer_program_basic, TypeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("program is ill-typed: {0}")]
    Type(#[from] TypeError),
    #[error("program is not first-order; only programs without function-typed binders, arguments or conditionals can be compiled")]
    NotFirstOrder,
}

/// A conditional-free program whose `sigma` nodes need an accuracy coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledProgram {
    pub program: Program,
}

impl fmt::Display for CompiledProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.program.fmt(f)
    }
}

/// Whether every binder, application argument and conditional has base type.
pub fn is_first_order(p: &Program) -> bool {
    first_order(p)
}

/// Number of nodes each compiled conditional adds.
pub const NODES_PER_CONDITIONAL: usize = 9;

pub fn smooth_compile(p: &Program) -> Result<CompiledProgram, CompileError> {
    infer_program_basic(p)?;
    if !is_first_order(p) {
        return Err(CompileError::NotFirstOrder);
    }
    let mut counter = 0usize;
    let body = rewrite(&p.body, &mut counter);
    Ok(CompiledProgram { program: Program { params: p.params.clone(), body } })
}

fn rewrite(t: &Term, counter: &mut usize) -> Term {
    match t {
        Term::If(g, m, n) => {
            let w = format!("%w{counter}");
            *counter += 1;
            let g = rewrite(g, counter);
            let m = rewrite(m, counter);
            let n = rewrite(n, counter);
            let var = || Term::Var(w.clone());
            let blend = Term::add(
                Term::mul(Term::unary(UnOp::Sigma, Term::neg(var())), m),
                Term::mul(Term::unary(UnOp::Sigma, var()), n),
            );
            Term::app(Term::lam(&w, blend), g)
        }
        _ => t.map_children(|c| rewrite(c, counter)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, parse_program_with, ParseOptions};

    #[test]
    fn single_conditional() {
        let p = parse_program("(program (params (x real)) (body (if x (sample normal) 0)))").unwrap();
        let c = smooth_compile(&p).unwrap();
        assert_eq!(
            c.to_string(),
            "(program (params (x real)) (body (app (lam %w0 (add (mul (sigma (neg %w0)) (sample normal)) (mul (sigma %w0) 0.0))) x)))"
        );
        assert_eq!(c.program.body.node_count(), p.body.node_count() + NODES_PER_CONDITIONAL);
        let again = parse_program_with(&c.to_string(), ParseOptions { internal: true }).unwrap();
        assert!(again.alpha_eq(&c.program));
    }

    #[test]
    fn rejects_higher_order() {
        let p = parse_program("(program (params (x real)) (body (app (if x (lam y y) (lam y 1)) x)))").unwrap();
        assert_eq!(smooth_compile(&p).unwrap_err(), CompileError::NotFirstOrder);
    }

    #[test]
    fn preserves_trace_type() {
        let p = parse_program(
            "(program (params (t real)) (body (if (sample normal) (if (sample logistic) t 1) (add (sample exponential) t))))",
        )
        .unwrap();
        let c = smooth_compile(&p).unwrap();
        assert!(!c.program.body.contains_if());
        assert_eq!(infer_program_basic(&c.program).unwrap().trace, infer_program_basic(&p).unwrap().trace);
        assert_eq!(c.program.body.node_count(), p.body.node_count() + 2 * NODES_PER_CONDITIONAL);
    }
}
