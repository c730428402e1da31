//! Built-in benchmark models.

use thiserror::Error;

use crate::estimate::{EstimateError, Model, Sense};
use crate::syntax::{parse_program, SyntaxError};

pub const BUILTIN_NAMES: [&str; 6] = ["example1", "prop2", "ex0g", "nconv", "textmsg-mini", "xornet-mini"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuiltinError {
    #[error("unknown model `{0}`; available: example1, prop2, ex0g, nconv, textmsg-mini, xornet-mini")]
    Unknown(String),
    #[error("built-in source failed to parse: {0}")]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Model(#[from] EstimateError),
}

/// A model with the starting point and learning rate used by the experiments.
#[derive(Clone, Debug)]
pub struct BuiltinModel {
    pub model: Model,
    pub source: String,
    pub theta0: Vec<f64>,
    pub learning_rate: f64,
}

/// Density of N(x | m, s) written in the language, applied to three arguments.
fn normal_density(x: &str, m: &str, s: &str) -> String {
    format!(
        "(app (app (app (lam x (lam m (lam sd (mul (inv (mul 2.5066282746310002 sd)) \
         (exp (mul -0.5 (pow (mul (add x (neg m)) (inv sd)) 2))))))) {x}) {m}) {s})"
    )
}

const EXAMPLE1: &str = "(program (params (theta real))
  (body (app (lam z (add (mul -0.5 (pow theta 2)) (if z 0 1)))
             (transform normal (lam s (add s theta))))))";

const EX0G: &str = "(program (params (theta real))
  (body (if 0 (add (mul theta theta) 1) (mul (add theta -1) (add theta -1)))))";

const NCONV: &str = "(program (params (theta real))
  (body (if (transform normal (lam s (add s theta))) 0 1)))";

fn prop2_source() -> String {
    let elbo = format!(
        "(app (lam z (add (add (log {}) (if z (log {}) (log {}))) (neg (log {}))))
              (transform normal (lam s (add s theta))))",
        normal_density("z", "0", "1"),
        normal_density("0", "-2", "1"),
        normal_density("0", "5", "1"),
        normal_density("z", "theta", "1"),
    );
    format!("(program (params (theta real)) (body (neg {elbo})))")
}

const TEXT_COUNTS: [u32; 5] = [13, 24, 8, 24, 7];

/// Change-point model for daily message counts: rate `r1` before the
/// change day `tau`, `r2` after, Gaussian likelihood with sd 5 and
/// mean-field Gaussian guides. The body is the negated ELBO up to constants.
fn textmsg_source() -> String {
    let sq = |x: String, scale: f64| format!("(pow (mul (add {x}) {scale}) 2)");
    let mut terms = Vec::new();
    for (i, k) in TEXT_COUNTS.iter().enumerate() {
        let day = i + 1;
        let ll = |r: &str| format!("(mul -0.5 {})", sq(format!("{k} (neg {r})"), 0.2));
        terms.push(format!("(if (add tau -{day}) {} {})", ll("r2"), ll("r1")));
    }
    terms.push(format!("(mul -0.5 {})", sq("r1 -15".into(), 0.1)));
    terms.push(format!("(mul -0.5 {})", sq("r2 -15".into(), 0.1)));
    terms.push(format!("(mul -0.5 {})", sq("tau -3".into(), 0.5)));
    terms.push("(add (log sr1) (add (log sr2) (log stau)))".into());
    let mut elbo = terms.pop().expect("non-empty");
    while let Some(t) = terms.pop() {
        elbo = format!("(add {t} {elbo})");
    }
    let guide = |sd: &str, mean: &str| format!("(transform normal (lam s (add (mul s {sd}) {mean})))");
    format!(
        "(program (params (mr1 real) (sr1 preal) (mr2 real) (sr2 preal) (mtau real) (stau preal))
  (body (app (lam r1 (app (lam r2 (app (lam tau (neg {elbo})) {})) {})) {})))",
        guide("stau", "mtau"),
        guide("sr2", "mr2"),
        guide("sr1", "mr1"),
    )
}

const XOR_POINTS: [(u8, u8, u8); 4] = [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)];

/// 2-2-1 network of step units with Gaussian weight guides (fixed sd 0.5)
/// fitted to XOR. The body is a squared-error loss plus a weight penalty.
fn xornet_source() -> String {
    let step = |a: String| format!("(if {a} 0 1)");
    let unit = |wa: &str, wb: &str, bias: &str, xa: String, xb: String| {
        step(format!("(add (add (mul {wa} {xa}) (mul {wb} {xb})) {bias})"))
    };
    let mut terms = Vec::new();
    for (x1, x2, y) in XOR_POINTS {
        let h1 = unit("w1", "w2", "w3", x1.to_string(), x2.to_string());
        let h2 = unit("w4", "w5", "w6", x1.to_string(), x2.to_string());
        let out = unit("w7", "w8", "w9", h1, h2);
        terms.push(format!("(mul 5 (pow (add {out} -{y}) 2))"));
    }
    let penalty = (1..=9).map(|j| format!("(pow w{j} 2)")).reduce(|a, b| format!("(add {a} {b})")).expect("9 weights");
    terms.push(format!("(mul 0.05 {penalty})"));
    let mut loss = terms.pop().expect("non-empty");
    while let Some(t) = terms.pop() {
        loss = format!("(add {t} {loss})");
    }
    let mut body = loss;
    for j in (1..=9).rev() {
        body = format!("(app (lam w{j} {body}) (transform normal (lam s (add (mul s 0.5) mu{j}))))");
    }
    let params: Vec<String> = (1..=9).map(|j| format!("(mu{j} real)")).collect();
    format!("(program (params {}) (body {body}))", params.join(" "))
}

pub fn builtin(name: &str) -> Result<BuiltinModel, BuiltinError> {
    let (source, sense, theta0, lr) = match name {
        "example1" => (EXAMPLE1.to_string(), Sense::Maximize, vec![1.0], 0.001),
        "prop2" => (prop2_source(), Sense::Minimize, vec![0.0], 0.001),
        "ex0g" => (EX0G.to_string(), Sense::Minimize, vec![0.0], 0.001),
        "nconv" => (NCONV.to_string(), Sense::Minimize, vec![0.0], 0.001),
        "textmsg-mini" => (textmsg_source(), Sense::Minimize, vec![15.0, 3.0, 15.0, 3.0, 3.0, 1.0], 0.01),
        "xornet-mini" => {
            (xornet_source(), Sense::Minimize, vec![0.1, -0.2, 0.05, 0.2, 0.1, -0.1, 0.3, -0.2, 0.0], 0.01)
        }
        other => return Err(BuiltinError::Unknown(other.to_string())),
    };
    let program = parse_program(&source)?;
    let model = Model::new(name, program, sense)?;
    Ok(BuiltinModel { model, source, theta0, learning_rate: lr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Dist;
    use crate::types::{check_sgd, check_unif};

    #[test]
    fn all_builtins_construct() {
        for name in BUILTIN_NAMES {
            let b = builtin(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(b.theta0.len(), b.model.dim(), "{name}");
            assert!(b.model.domain.contains(&b.theta0), "{name}");
        }
        assert!(matches!(builtin("nope"), Err(BuiltinError::Unknown(_))));
    }

    #[test]
    fn trace_types() {
        assert!(builtin("ex0g").unwrap().model.trace_type().is_empty());
        assert_eq!(builtin("prop2").unwrap().model.trace_type(), &[Dist::Normal]);
        assert_eq!(builtin("textmsg-mini").unwrap().model.trace_type().len(), 3);
        assert_eq!(builtin("xornet-mini").unwrap().model.trace_type().len(), 9);
    }

    #[test]
    fn typing_of_builtins() {
        for name in ["example1", "prop2", "ex0g", "nconv", "textmsg-mini", "xornet-mini"] {
            let b = builtin(name).unwrap();
            check_sgd(&b.model.program).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for name in ["example1", "prop2", "nconv"] {
            let b = builtin(name).unwrap();
            check_unif(&b.model.program).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(check_unif(&builtin("ex0g").unwrap().model.program).is_err());
        for name in BUILTIN_NAMES {
            assert!(builtin(name).unwrap().model.score_supported(), "{name}");
        }
    }
}
