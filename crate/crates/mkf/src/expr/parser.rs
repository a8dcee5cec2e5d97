use crate::error::{Error, Result};
use crate::expr::MomentExpr;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '+' => out.push(Spanned { tok: Tok::Plus, line: tline, col: tcol }),
            '-' => out.push(Spanned { tok: Tok::Minus, line: tline, col: tcol }),
            '*' => out.push(Spanned { tok: Tok::Star, line: tline, col: tcol }),
            '^' => out.push(Spanned { tok: Tok::Caret, line: tline, col: tcol }),
            '(' => out.push(Spanned { tok: Tok::LParen, line: tline, col: tcol }),
            ')' => out.push(Spanned { tok: Tok::RParen, line: tline, col: tcol }),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(err(tline, tcol, "expected digits after decimal point"));
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(tline, tcol, format!("invalid number `{text}`")))?;
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Num(value, text),
                    line: tline,
                    col: tcol,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Ident(name),
                    line: tline,
                    col: tcol,
                });
                continue;
            }
            other => return Err(err(tline, tcol, format!("unexpected character `{other}`"))),
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .unwrap_or((self.end_line, self.end_col))
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<MomentExpr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.next();
                    terms.push(self.term()?.neg());
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            MomentExpr::Add(terms)
        })
    }

    fn term(&mut self) -> Result<MomentExpr> {
        let mut factors = vec![self.factor()?];
        while matches!(self.peek(), Some(Tok::Star)) {
            self.next();
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            MomentExpr::Mul(factors)
        })
    }

    fn factor(&mut self) -> Result<MomentExpr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(self.factor()?.neg());
        }
        let base = self.primary()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            let (line, col) = self.here();
            match self.next() {
                Some(Spanned {
                    tok: Tok::Num(value, text),
                    ..
                }) => {
                    if text.contains('.') || text.contains('e') || text.contains('E') {
                        return Err(err(line, col, format!("exponent `{text}` is not an integer")));
                    }
                    let n = value as u32;
                    if n as f64 != value {
                        return Err(err(line, col, format!("exponent `{text}` is out of range")));
                    }
                    return Ok(MomentExpr::Pow(Box::new(base), n));
                }
                _ => return Err(err(line, col, "expected a nonnegative integer exponent")),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<MomentExpr> {
        let (line, col) = self.here();
        match self.next() {
            Some(Spanned {
                tok: Tok::Num(value, _),
                ..
            }) => Ok(MomentExpr::Constant(value)),
            Some(Spanned {
                tok: Tok::Ident(name),
                ..
            }) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.next();
                    let arg = self.expr()?;
                    let (cline, ccol) = self.here();
                    match self.next() {
                        Some(Spanned { tok: Tok::RParen, .. }) => {}
                        _ => return Err(err(cline, ccol, "expected `)`")),
                    }
                    match name.as_str() {
                        "cos" => MomentExpr::cos(arg),
                        "sin" => MomentExpr::sin(arg),
                        other => Err(err(line, col, format!("unknown function `{other}`"))),
                    }
                } else {
                    Ok(MomentExpr::Var(name))
                }
            }
            Some(Spanned { tok: Tok::LParen, .. }) => {
                let inner = self.expr()?;
                let (cline, ccol) = self.here();
                match self.next() {
                    Some(Spanned { tok: Tok::RParen, .. }) => Ok(inner),
                    _ => Err(err(cline, ccol, "expected `)`")),
                }
            }
            Some(s) => Err(err(s.line, s.col, format!("unexpected token {:?}", s.tok))),
            None => Err(err(line, col, "unexpected end of input")),
        }
    }
}

/// Parses an expression from text. See the module docs for the grammar.
pub fn parse(text: &str) -> Result<MomentExpr> {
    let toks = lex(text)?;
    let end_line = text.lines().count().max(1);
    let end_col = text.lines().last().map_or(1, |l| l.chars().count() + 1);
    let mut p = Parser {
        toks,
        pos: 0,
        end_line,
        end_col,
    };
    let e = p.expr()?;
    if let Some(s) = p.toks.get(p.pos) {
        return Err(err(s.line, s.col, format!("unexpected token {:?}", s.tok)));
    }
    Ok(e)
}
