//! Surface syntax: terms, distributions, parsing and printing.

mod dist;
mod parse;
mod print;
mod term;

pub use dist::Dist;
pub use parse::{
    parse_program, parse_program_with, parse_surface_type, parse_term, parse_term_with, ParseOptions, Pos, SyntaxError,
};
pub use print::format_number;
pub use term::{fresh_name, BaseType, BinOp, ParamDecl, Program, SubstError, SurfaceAnn, SurfaceType, Term, UnOp};
