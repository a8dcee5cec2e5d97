//! Expression AST, text parser, and canonicalization for
//! mixed-trigonometric-polynomial expressions over named random variables.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = factor { "*" factor } ;
//! factor  = "-" factor | primary [ "^" integer ] ;
//! primary = number | ident | ("cos" | "sin") "(" expr ")" | "(" expr ")" ;
//! ident   = letter | "_" , { letter | digit | "_" } ;
//! number  = digit { digit } [ "." digit { digit } ] [ ("e"|"E") ["+"|"-"] digit { digit } ] ;
//! ```
//!
//! `^` binds tighter than `*`, `*` tighter than `+`. Exponents must be
//! nonnegative integers. Arguments of `cos`/`sin` must be affine combinations
//! of variables and constants; anything else is rejected at construction.

mod ast;
mod compiled;
pub(crate) mod flatten;
mod parser;

pub use ast::MomentExpr;
pub use compiled::CompiledExpr;
pub use flatten::{
    flatten, flatten_with_cap, multiply_flattened, FactorPowers, MonomialTerm, DEFAULT_TERM_CAP,
};
pub use parser::parse;
