//! Pretty-printing back to the concrete syntax.

use std::fmt::{self, Write};

use super::term::{BinOp, ParamDecl, Program, SurfaceAnn, SurfaceType, Term};

impl fmt::Display for SurfaceAnn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut fields = Vec::new();
        if let Some(e) = self.e {
            fields.push(format!("e={e}"));
        }
        if let Some(g) = self.g {
            fields.push(format!("g={g}"));
        }
        if let Some(deps) = &self.deps {
            let d: Vec<String> = deps.iter().map(|k| format!("s{k}")).collect();
            fields.push(format!("deps={{{}}}", d.join(",")));
        }
        write!(f, "{{{}}}", fields.join(","))
    }
}

impl fmt::Display for SurfaceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceType::Base(b, ann) if ann.is_empty() => f.write_str(b.keyword()),
            SurfaceType::Base(b, ann) => write!(f, "{}@{ann}", b.keyword()),
            SurfaceType::Fun(a, trace, r) if trace.is_empty() => write!(f, "(fun {a} {r})"),
            SurfaceType::Fun(a, trace, r) => {
                write!(f, "(fun {a} (trace")?;
                for d in trace {
                    write!(f, " {d}")?;
                }
                write!(f, ") {r})")
            }
        }
    }
}

/// Renders a constant so that it parses back to the same bits.
pub fn format_number(r: f64) -> String {
    let s = format!("{r:?}");
    if s.contains('e') || s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

pub(crate) fn write_term(out: &mut String, t: &Term, params: &[ParamDecl]) {
    let w = |out: &mut String, s: &str| out.push_str(s);
    match t {
        Term::Var(x) => w(out, x),
        Term::Param(i) => match params.get(*i) {
            Some(p) => w(out, &p.name),
            None => {
                let _ = write!(out, "p{i}");
            }
        },
        Term::Const(r) => w(out, &format_number(*r)),
        Term::Unary(op, a) => {
            let _ = write!(out, "({} ", op.keyword());
            write_term(out, a, params);
            w(out, ")");
        }
        Term::Binary(op, a, b) => {
            let _ = write!(out, "({} ", op.keyword());
            write_term(out, a, params);
            w(out, " ");
            write_term(out, b, params);
            w(out, ")");
        }
        Term::If(g, m, n) => {
            w(out, "(if ");
            write_term(out, g, params);
            w(out, " ");
            write_term(out, m, params);
            w(out, " ");
            write_term(out, n, params);
            w(out, ")");
        }
        Term::Sample(d) => {
            let _ = write!(out, "(sample {d})");
        }
        Term::Transform(d, tf) => {
            let _ = write!(out, "(transform {d} ");
            write_term(out, tf, params);
            w(out, ")");
        }
        Term::Lam(x, hint, body) => {
            match hint {
                Some(h) => {
                    let _ = write!(out, "(lam ({x} {h}) ");
                }
                None => {
                    let _ = write!(out, "(lam {x} ");
                }
            }
            write_term(out, body, params);
            w(out, ")");
        }
        Term::App(f, a) => {
            w(out, "(app ");
            write_term(out, f, params);
            w(out, " ");
            write_term(out, a, params);
            w(out, ")");
        }
        Term::Repeat(BinOp::Add, k, m) => {
            let _ = write!(out, "(times {k} ");
            write_term(out, m, params);
            w(out, ")");
        }
        Term::Repeat(BinOp::Mul, k, m) => {
            w(out, "(pow ");
            write_term(out, m, params);
            let _ = write!(out, " {k})");
        }
    }
}

impl Term {
    /// Renders the term, printing parameters by their declared names.
    pub fn to_source(&self, params: &[ParamDecl]) -> String {
        let mut s = String::new();
        write_term(&mut s, self, params);
        s
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_source(&[]))
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(program (params")?;
        for p in &self.params {
            write!(f, " ({} {})", p.name, p.base.keyword())?;
        }
        write!(f, ") (body {}))", self.body.to_source(&self.params))
    }
}
