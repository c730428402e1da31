//! S-expression reader and the conversion from s-expressions to terms.
//!
//! Binders are renamed apart while parsing so that every `lam` in a parsed
//! program binds a distinct name.

use std::collections::BTreeSet;

use thiserror::Error;

use super::term::{fresh_name, BaseType, BinOp, ParamDecl, Program, SurfaceAnn, SurfaceType, Term, UnOp};
use super::Dist;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntaxError {
    #[error("syntax error at {}:{}: {msg}", pos.line, pos.col)]
    Malformed { pos: Pos, msg: String },
    #[error("reserved internal form `{name}` at {}:{}", pos.line, pos.col)]
    ReservedInternal { pos: Pos, name: String },
    #[error("unknown distribution `{name}` at {}:{}", pos.line, pos.col)]
    UnknownDistribution { pos: Pos, name: String },
    #[error("unbound variable `{name}` at {}:{}", pos.line, pos.col)]
    UnboundVariable { pos: Pos, name: String },
}

fn malformed<T>(pos: Pos, msg: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError::Malformed { pos, msg: msg.into() })
}

#[derive(Clone, Debug)]
enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }
}

fn read_all(text: &str) -> Result<Vec<SExpr>, SyntaxError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = vec![(Vec::new(), Pos { line: 1, col: 1 })];
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let here = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((Vec::new(), here));
            }
            ')' => {
                chars.next();
                col += 1;
                if stack.len() == 1 {
                    return malformed(here, "unexpected `)`");
                }
                let (items, start) = stack.pop().expect("non-empty stack");
                stack.last_mut().expect("outer list").0.push(SExpr::List(items, start));
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                    col += 1;
                }
                stack.last_mut().expect("outer list").0.push(SExpr::Atom(atom, here));
            }
        }
    }
    if stack.len() > 1 {
        let (_, start) = stack.pop().expect("unclosed list");
        return malformed(start, "unclosed `(`");
    }
    Ok(stack.pop().expect("top level").0)
}

fn read_one(text: &str) -> Result<SExpr, SyntaxError> {
    let mut items = read_all(text)?;
    match items.len() {
        0 => malformed(Pos { line: 1, col: 1 }, "empty input"),
        1 => Ok(items.pop().expect("one item")),
        _ => malformed(items[1].pos(), "trailing input after the first expression"),
    }
}

/// Parser settings.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Accept `sigma` nodes and `%w` binders emitted by the smoothing compiler.
    pub internal: bool,
}

pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    parse_program_with(text, ParseOptions::default())
}

pub fn parse_program_with(text: &str, opts: ParseOptions) -> Result<Program, SyntaxError> {
    let sexpr = read_one(text)?;
    let mut b = Builder::new(opts, false, &sexpr);
    b.program(&sexpr)
}

/// Parses a bare term; identifiers that are not bound are free variables.
pub fn parse_term(text: &str) -> Result<Term, SyntaxError> {
    parse_term_with(text, ParseOptions::default())
}

pub fn parse_term_with(text: &str, opts: ParseOptions) -> Result<Term, SyntaxError> {
    let sexpr = read_one(text)?;
    let mut b = Builder::new(opts, true, &sexpr);
    b.term(&sexpr)
}

/// Parses a binder type such as `preal` or `(fun real (trace normal) real)`.
pub fn parse_surface_type(text: &str) -> Result<SurfaceType, SyntaxError> {
    let sexpr = read_one(text)?;
    surface_type(&sexpr)
}

struct Builder {
    opts: ParseOptions,
    free_as_var: bool,
    params: Vec<ParamDecl>,
    scope: Vec<(String, String)>,
    /// Every atom in the input plus every generated name.
    used: BTreeSet<String>,
    binders: BTreeSet<String>,
}

fn collect_atoms(s: &SExpr, out: &mut BTreeSet<String>) {
    match s {
        SExpr::Atom(a, _) => {
            out.insert(a.clone());
        }
        SExpr::List(items, _) => items.iter().for_each(|i| collect_atoms(i, out)),
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic()) && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_internal_ident(s: &str) -> bool {
    s.strip_prefix("%w").is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
}

fn looks_numeric(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    body.starts_with(|c: char| c.is_ascii_digit() || c == '.')
}

fn parse_number(s: &str, pos: Pos) -> Result<f64, SyntaxError> {
    let valid_chars = s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    match s.parse::<f64>() {
        Ok(v) if valid_chars && v.is_finite() => Ok(v),
        _ => malformed(pos, format!("malformed number `{s}`")),
    }
}

fn atom<'a>(s: &'a SExpr, what: &str) -> Result<(&'a str, Pos), SyntaxError> {
    match s {
        SExpr::Atom(a, p) => Ok((a, *p)),
        SExpr::List(_, p) => malformed(*p, format!("expected {what}, found a list")),
    }
}

fn dist(s: &SExpr) -> Result<Dist, SyntaxError> {
    let (name, pos) = atom(s, "a distribution name")?;
    Dist::from_name(name).ok_or_else(|| SyntaxError::UnknownDistribution { pos, name: name.to_string() })
}

fn pos_int(s: &SExpr) -> Result<u32, SyntaxError> {
    let (a, pos) = atom(s, "a positive integer")?;
    match a.parse::<u32>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => malformed(pos, format!("expected a positive integer, found `{a}`")),
    }
}

fn surface_type(s: &SExpr) -> Result<SurfaceType, SyntaxError> {
    match s {
        SExpr::Atom(a, pos) => {
            let (base, ann) = match a.split_once('@') {
                Some((b, ann)) => (b, Some(ann)),
                None => (a.as_str(), None),
            };
            let base = match base {
                "real" => BaseType::Real,
                "preal" => BaseType::PosReal,
                other => return malformed(*pos, format!("unknown type `{other}`")),
            };
            let ann = match ann {
                Some(text) => surface_ann(text, *pos)?,
                None => SurfaceAnn::default(),
            };
            Ok(SurfaceType::Base(base, ann))
        }
        SExpr::List(items, pos) => {
            let head = items.first().map(|h| atom(h, "`fun`")).transpose()?;
            if head.map(|h| h.0) != Some("fun") {
                return malformed(*pos, "expected `(fun ARG RESULT)` or `(fun ARG (trace ...) RESULT)`");
            }
            match items.len() {
                3 => Ok(SurfaceType::Fun(
                    Box::new(surface_type(&items[1])?),
                    Vec::new(),
                    Box::new(surface_type(&items[2])?),
                )),
                4 => {
                    let trace = match &items[2] {
                        SExpr::List(ds, p) => {
                            if ds.first().map(|d| atom(d, "`trace`")).transpose()?.map(|d| d.0) != Some("trace") {
                                return malformed(*p, "expected `(trace DIST ...)`");
                            }
                            ds[1..].iter().map(dist).collect::<Result<Vec<_>, _>>()?
                        }
                        other => return malformed(other.pos(), "expected `(trace DIST ...)`"),
                    };
                    Ok(SurfaceType::Fun(Box::new(surface_type(&items[1])?), trace, Box::new(surface_type(&items[3])?)))
                }
                _ => malformed(*pos, "`fun` expects 2 or 3 arguments"),
            }
        }
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts.into_iter().filter(|p| !p.is_empty()).collect()
}

fn surface_ann(text: &str, pos: Pos) -> Result<SurfaceAnn, SyntaxError> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| SyntaxError::Malformed { pos, msg: format!("malformed annotation `{text}`") })?;
    let mut ann = SurfaceAnn::default();
    for field in split_top_level(inner) {
        let Some((key, value)) = field.split_once('=') else {
            return malformed(pos, format!("malformed annotation field `{field}`"));
        };
        match key {
            "e" => {
                ann.e = Some(match value {
                    "0" => 0,
                    "1" => 1,
                    _ => return malformed(pos, format!("annotation e must be 0 or 1, found `{value}`")),
                })
            }
            "g" => {
                ann.g = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return malformed(pos, format!("annotation g must be true or false, found `{value}`")),
                })
            }
            "deps" => {
                let Some(list) = value.strip_prefix('{').and_then(|v| v.strip_suffix('}')) else {
                    return malformed(pos, format!("malformed dependency set `{value}`"));
                };
                let mut deps = Vec::new();
                for slot in list.split(',').filter(|s| !s.is_empty()) {
                    match slot.strip_prefix('s').and_then(|n| n.parse::<usize>().ok()) {
                        Some(n) if n >= 1 => deps.push(n),
                        _ => return malformed(pos, format!("malformed trace slot `{slot}`")),
                    }
                }
                deps.sort_unstable();
                deps.dedup();
                ann.deps = Some(deps);
            }
            _ => return malformed(pos, format!("unknown annotation field `{key}`")),
        }
    }
    Ok(ann)
}

impl Builder {
    fn new(opts: ParseOptions, free_as_var: bool, root: &SExpr) -> Builder {
        let mut used = BTreeSet::new();
        collect_atoms(root, &mut used);
        Builder { opts, free_as_var, params: Vec::new(), scope: Vec::new(), used, binders: BTreeSet::new() }
    }

    fn program(&mut self, s: &SExpr) -> Result<Program, SyntaxError> {
        let SExpr::List(items, pos) = s else {
            return malformed(s.pos(), "expected `(program (params ...) (body ...))`");
        };
        if items.len() != 3 || atom(&items[0], "`program`").map(|a| a.0) != Ok("program") {
            return malformed(*pos, "expected `(program (params ...) (body ...))`");
        }
        let param_items = self.section(&items[1], "params")?;
        for decl in param_items {
            let SExpr::List(parts, p) = decl else {
                return malformed(decl.pos(), "expected `(NAME real|preal)`");
            };
            if parts.len() != 2 {
                return malformed(*p, "expected `(NAME real|preal)`");
            }
            let (name, npos) = atom(&parts[0], "a parameter name")?;
            self.check_ident(name, npos)?;
            let (ty, tpos) = atom(&parts[1], "`real` or `preal`")?;
            let base = match ty {
                "real" => BaseType::Real,
                "preal" => BaseType::PosReal,
                _ => return malformed(tpos, format!("expected `real` or `preal`, found `{ty}`")),
            };
            if self.params.iter().any(|q| q.name == name) {
                return malformed(npos, format!("duplicate parameter `{name}`"));
            }
            self.params.push(ParamDecl { name: name.to_string(), base });
        }
        let body_items = self.section(&items[2], "body")?;
        if body_items.len() != 1 {
            return malformed(items[2].pos(), "`body` expects exactly one term");
        }
        let body = self.term(&body_items[0])?;
        Ok(Program { params: std::mem::take(&mut self.params), body })
    }

    fn section<'s>(&self, s: &'s SExpr, name: &str) -> Result<&'s [SExpr], SyntaxError> {
        match s {
            SExpr::List(items, _) if matches!(items.first(), Some(SExpr::Atom(a, _)) if a == name) => Ok(&items[1..]),
            _ => malformed(s.pos(), format!("expected `({name} ...)`")),
        }
    }

    fn check_ident(&self, name: &str, pos: Pos) -> Result<(), SyntaxError> {
        if is_ident(name) {
            Ok(())
        } else if is_internal_ident(name) || name.starts_with('%') {
            if self.opts.internal && is_internal_ident(name) {
                Ok(())
            } else {
                Err(SyntaxError::ReservedInternal { pos, name: name.to_string() })
            }
        } else {
            malformed(pos, format!("invalid identifier `{name}`"))
        }
    }

    fn bind(&mut self, name: &str) -> String {
        let clash = self.binders.contains(name) || self.params.iter().any(|p| p.name == name);
        let unique = if clash {
            let mut taken = self.used.clone();
            taken.extend(self.params.iter().map(|p| p.name.clone()));
            fresh_name(name, &taken)
        } else {
            name.to_string()
        };
        self.used.insert(unique.clone());
        self.binders.insert(unique.clone());
        unique
    }

    fn term(&mut self, s: &SExpr) -> Result<Term, SyntaxError> {
        match s {
            SExpr::Atom(a, pos) => self.atom_term(a, *pos),
            SExpr::List(items, pos) => {
                let Some(head) = items.first() else {
                    return malformed(*pos, "empty form");
                };
                let (head, hpos) = atom(head, "a form keyword")?;
                let args = &items[1..];
                let arity = |n: usize| -> Result<(), SyntaxError> {
                    if args.len() == n {
                        Ok(())
                    } else {
                        malformed(*pos, format!("`{head}` expects {n} argument(s), got {}", args.len()))
                    }
                };
                let un_op = match head {
                    "neg" => Some(UnOp::Neg),
                    "inv" => Some(UnOp::Inv),
                    "exp" => Some(UnOp::Exp),
                    "log" => Some(UnOp::Log),
                    "sigma" if self.opts.internal => Some(UnOp::Sigma),
                    "sigma" => return Err(SyntaxError::ReservedInternal { pos: hpos, name: "sigma".into() }),
                    _ => None,
                };
                if let Some(op) = un_op {
                    arity(1)?;
                    return Ok(Term::Unary(op, Box::new(self.term(&args[0])?)));
                }
                match head {
                    "const" => {
                        arity(1)?;
                        let (n, npos) = atom(&args[0], "a number")?;
                        Ok(Term::Const(parse_number(n, npos)?))
                    }
                    "add" | "mul" => {
                        arity(2)?;
                        let op = if head == "add" { BinOp::Add } else { BinOp::Mul };
                        let l = self.term(&args[0])?;
                        let r = self.term(&args[1])?;
                        Ok(Term::Binary(op, Box::new(l), Box::new(r)))
                    }
                    "if" => {
                        arity(3)?;
                        let g = self.term(&args[0])?;
                        let m = self.term(&args[1])?;
                        let n = self.term(&args[2])?;
                        Ok(Term::if_(g, m, n))
                    }
                    "sample" => {
                        arity(1)?;
                        Ok(Term::Sample(dist(&args[0])?))
                    }
                    "transform" => {
                        arity(2)?;
                        let d = dist(&args[0])?;
                        Ok(Term::Transform(d, Box::new(self.term(&args[1])?)))
                    }
                    "lam" => {
                        arity(2)?;
                        let (name, npos, hint) = match &args[0] {
                            SExpr::Atom(a, p) => (a.as_str(), *p, None),
                            SExpr::List(parts, p) if parts.len() == 2 => {
                                let (a, ap) = atom(&parts[0], "a binder name")?;
                                (a, ap, Some(surface_type(&parts[1])?))
                            }
                            other => return malformed(other.pos(), "expected `NAME` or `(NAME TYPE)` binder"),
                        };
                        self.check_ident(name, npos)?;
                        let unique = self.bind(name);
                        self.scope.push((name.to_string(), unique.clone()));
                        let body = self.term(&args[1]);
                        self.scope.pop();
                        Ok(Term::Lam(unique, hint, Box::new(body?)))
                    }
                    "app" => {
                        arity(2)?;
                        let f = self.term(&args[0])?;
                        let a = self.term(&args[1])?;
                        Ok(Term::app(f, a))
                    }
                    "times" => {
                        arity(2)?;
                        let k = pos_int(&args[0])?;
                        Ok(Term::Repeat(BinOp::Add, k, Box::new(self.term(&args[1])?)))
                    }
                    "pow" => {
                        arity(2)?;
                        let m = self.term(&args[0])?;
                        let k = pos_int(&args[1])?;
                        Ok(Term::Repeat(BinOp::Mul, k, Box::new(m)))
                    }
                    other => malformed(hpos, format!("unknown form `{other}`")),
                }
            }
        }
    }

    fn atom_term(&mut self, a: &str, pos: Pos) -> Result<Term, SyntaxError> {
        if looks_numeric(a) {
            return Ok(Term::Const(parse_number(a, pos)?));
        }
        self.check_ident(a, pos)?;
        if let Some((_, unique)) = self.scope.iter().rev().find(|(src, _)| src == a) {
            return Ok(Term::Var(unique.clone()));
        }
        if let Some(i) = self.params.iter().position(|p| p.name == a) {
            return Ok(Term::Param(i));
        }
        if self.free_as_var {
            Ok(Term::Var(a.to_string()))
        } else {
            Err(SyntaxError::UnboundVariable { pos, name: a.to_string() })
        }
    }
}
