use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Expression tree for mixed-trigonometric-polynomial functions: sums and
/// products of variables, nonnegative integer powers, and sin/cos of affine
/// arguments.
#[derive(Clone, Debug, PartialEq)]
pub enum MomentExpr {
    Constant(f64),
    Var(String),
    Add(Vec<MomentExpr>),
    Mul(Vec<MomentExpr>),
    Pow(Box<MomentExpr>, u32),
    Cos(Box<MomentExpr>),
    Sin(Box<MomentExpr>),
}

impl MomentExpr {
    pub fn constant(c: f64) -> Self {
        MomentExpr::Constant(c)
    }

    pub fn var(name: impl Into<String>) -> Self {
        MomentExpr::Var(name.into())
    }

    /// Cosine of an affine argument; rejects anything else.
    pub fn cos(arg: MomentExpr) -> Result<Self> {
        if arg.as_affine().is_none() {
            return Err(Error::NonAffineTrigArg(arg.to_string()));
        }
        Ok(MomentExpr::Cos(Box::new(arg)))
    }

    /// Sine of an affine argument; rejects anything else.
    pub fn sin(arg: MomentExpr) -> Result<Self> {
        if arg.as_affine().is_none() {
            return Err(Error::NonAffineTrigArg(arg.to_string()));
        }
        Ok(MomentExpr::Sin(Box::new(arg)))
    }

    /// Sum with light constant folding; zero terms are dropped.
    pub fn sum(items: Vec<MomentExpr>) -> Self {
        let mut constant = 0.0;
        let mut rest = Vec::new();
        for item in items {
            match item {
                MomentExpr::Constant(c) => constant += c,
                MomentExpr::Add(children) => {
                    for child in children {
                        match child {
                            MomentExpr::Constant(c) => constant += c,
                            other => rest.push(other),
                        }
                    }
                }
                other => rest.push(other),
            }
        }
        if constant != 0.0 || rest.is_empty() {
            rest.push(MomentExpr::Constant(constant));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            MomentExpr::Add(rest)
        }
    }

    /// Product with light constant folding; a zero factor collapses the whole
    /// product.
    pub fn product(items: Vec<MomentExpr>) -> Self {
        let mut constant = 1.0;
        let mut rest = Vec::new();
        for item in items {
            match item {
                MomentExpr::Constant(c) => constant *= c,
                MomentExpr::Mul(children) => {
                    for child in children {
                        match child {
                            MomentExpr::Constant(c) => constant *= c,
                            other => rest.push(other),
                        }
                    }
                }
                other => rest.push(other),
            }
        }
        if constant == 0.0 {
            return MomentExpr::Constant(0.0);
        }
        if constant != 1.0 || rest.is_empty() {
            rest.insert(0, MomentExpr::Constant(constant));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            MomentExpr::Mul(rest)
        }
    }

    pub fn pow(base: MomentExpr, exponent: u32) -> Self {
        match exponent {
            0 => MomentExpr::Constant(1.0),
            1 => base,
            _ => MomentExpr::Pow(Box::new(base), exponent),
        }
    }

    pub fn neg(self) -> Self {
        match self {
            MomentExpr::Constant(c) => MomentExpr::Constant(-c),
            other => MomentExpr::product(vec![MomentExpr::Constant(-1.0), other]),
        }
    }

    pub fn sub(lhs: MomentExpr, rhs: MomentExpr) -> Self {
        MomentExpr::sum(vec![lhs, rhs.neg()])
    }

    /// All variable names referenced by the expression.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            MomentExpr::Constant(_) => {}
            MomentExpr::Var(name) => {
                out.insert(name.clone());
            }
            MomentExpr::Add(children) | MomentExpr::Mul(children) => {
                for child in children {
                    child.collect_vars(out);
                }
            }
            MomentExpr::Pow(base, _) => base.collect_vars(out),
            MomentExpr::Cos(arg) | MomentExpr::Sin(arg) => arg.collect_vars(out),
        }
    }

    /// Interprets the expression as Σ aᵢ·varᵢ + b, if it is affine.
    /// Zero-coefficient variables are dropped.
    pub fn as_affine(&self) -> Option<(BTreeMap<String, f64>, f64)> {
        match self {
            MomentExpr::Constant(c) => Some((BTreeMap::new(), *c)),
            MomentExpr::Var(name) => {
                let mut m = BTreeMap::new();
                m.insert(name.clone(), 1.0);
                Some((m, 0.0))
            }
            MomentExpr::Add(children) => {
                let mut coeffs = BTreeMap::new();
                let mut offset = 0.0;
                for child in children {
                    let (m, b) = child.as_affine()?;
                    offset += b;
                    for (name, a) in m {
                        *coeffs.entry(name).or_insert(0.0) += a;
                    }
                }
                coeffs.retain(|_, a| *a != 0.0);
                Some((coeffs, offset))
            }
            MomentExpr::Mul(children) => {
                let mut scale = 1.0;
                let mut linear: Option<(BTreeMap<String, f64>, f64)> = None;
                for child in children {
                    let (m, b) = child.as_affine()?;
                    if m.is_empty() {
                        scale *= b;
                    } else if linear.is_none() {
                        linear = Some((m, b));
                    } else {
                        return None; // product of two variable-bearing factors
                    }
                }
                match linear {
                    None => Some((BTreeMap::new(), scale)),
                    Some((mut m, b)) => {
                        for a in m.values_mut() {
                            *a *= scale;
                        }
                        m.retain(|_, a| *a != 0.0);
                        Some((m, b * scale))
                    }
                }
            }
            MomentExpr::Pow(base, n) => match n {
                0 => Some((BTreeMap::new(), 1.0)),
                1 => base.as_affine(),
                _ => {
                    let (m, b) = base.as_affine()?;
                    if m.is_empty() {
                        Some((BTreeMap::new(), b.powi(*n as i32)))
                    } else {
                        None
                    }
                }
            },
            MomentExpr::Cos(_) | MomentExpr::Sin(_) => None,
        }
    }

    /// Pointwise evaluation with an environment of variable values.
    pub fn eval(&self, env: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            MomentExpr::Constant(c) => Ok(*c),
            MomentExpr::Var(name) => env
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownVariable(name.clone())),
            MomentExpr::Add(children) => {
                let mut acc = 0.0;
                for child in children {
                    acc += child.eval(env)?;
                }
                Ok(acc)
            }
            MomentExpr::Mul(children) => {
                let mut acc = 1.0;
                for child in children {
                    acc *= child.eval(env)?;
                }
                Ok(acc)
            }
            MomentExpr::Pow(base, n) => Ok(base.eval(env)?.powi(*n as i32)),
            MomentExpr::Cos(arg) => Ok(arg.eval(env)?.cos()),
            MomentExpr::Sin(arg) => Ok(arg.eval(env)?.sin()),
        }
    }

    /// Replaces variables by expressions. Trig arguments are re-validated,
    /// so substituting a nonlinear expression into cos/sin fails.
    pub fn substitute(&self, map: &BTreeMap<String, MomentExpr>) -> Result<MomentExpr> {
        Ok(match self {
            MomentExpr::Constant(c) => MomentExpr::Constant(*c),
            MomentExpr::Var(name) => match map.get(name) {
                Some(repl) => repl.clone(),
                None => MomentExpr::Var(name.clone()),
            },
            MomentExpr::Add(children) => MomentExpr::Add(
                children
                    .iter()
                    .map(|c| c.substitute(map))
                    .collect::<Result<_>>()?,
            ),
            MomentExpr::Mul(children) => MomentExpr::Mul(
                children
                    .iter()
                    .map(|c| c.substitute(map))
                    .collect::<Result<_>>()?,
            ),
            MomentExpr::Pow(base, n) => MomentExpr::Pow(Box::new(base.substitute(map)?), *n),
            MomentExpr::Cos(arg) => MomentExpr::cos(arg.substitute(map)?)?,
            MomentExpr::Sin(arg) => MomentExpr::sin(arg.substitute(map)?)?,
        })
    }

    /// Symbolic partial derivative with respect to `var`. Because trig
    /// arguments are affine, the result stays inside the grammar.
    pub fn differentiate(&self, var: &str) -> MomentExpr {
        match self {
            MomentExpr::Constant(_) => MomentExpr::Constant(0.0),
            MomentExpr::Var(name) => {
                MomentExpr::Constant(if name == var { 1.0 } else { 0.0 })
            }
            MomentExpr::Add(children) => {
                MomentExpr::sum(children.iter().map(|c| c.differentiate(var)).collect())
            }
            MomentExpr::Mul(children) => {
                let mut terms = Vec::new();
                for (i, child) in children.iter().enumerate() {
                    let d = child.differentiate(var);
                    if d == MomentExpr::Constant(0.0) {
                        continue;
                    }
                    let mut factors = vec![d];
                    for (j, other) in children.iter().enumerate() {
                        if i != j {
                            factors.push(other.clone());
                        }
                    }
                    terms.push(MomentExpr::product(factors));
                }
                MomentExpr::sum(terms)
            }
            MomentExpr::Pow(base, n) => {
                if *n == 0 {
                    return MomentExpr::Constant(0.0);
                }
                let d = base.differentiate(var);
                MomentExpr::product(vec![
                    MomentExpr::Constant(*n as f64),
                    MomentExpr::pow((**base).clone(), n - 1),
                    d,
                ])
            }
            MomentExpr::Cos(arg) => {
                let d = arg.differentiate(var);
                MomentExpr::product(vec![
                    d.neg(),
                    MomentExpr::Sin(Box::new((**arg).clone())),
                ])
            }
            MomentExpr::Sin(arg) => {
                let d = arg.differentiate(var);
                MomentExpr::product(vec![d, MomentExpr::Cos(Box::new((**arg).clone()))])
            }
        }
    }

    /// Canonical structural form: nested sums/products flattened, singletons
    /// collapsed, trivial powers removed. `parse(print(e))` returns exactly
    /// this form.
    pub fn canonicalize(&self) -> MomentExpr {
        match self {
            MomentExpr::Constant(c) => MomentExpr::Constant(*c),
            MomentExpr::Var(name) => MomentExpr::Var(name.clone()),
            MomentExpr::Add(children) => {
                let mut flat = Vec::new();
                for child in children {
                    match child.canonicalize() {
                        MomentExpr::Add(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                match flat.len() {
                    0 => MomentExpr::Constant(0.0),
                    1 => flat.pop().unwrap(),
                    _ => MomentExpr::Add(flat),
                }
            }
            MomentExpr::Mul(children) => {
                let mut flat = Vec::new();
                for child in children {
                    match child.canonicalize() {
                        MomentExpr::Mul(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                match flat.len() {
                    0 => MomentExpr::Constant(1.0),
                    1 => flat.pop().unwrap(),
                    _ => MomentExpr::Mul(flat),
                }
            }
            MomentExpr::Pow(base, n) => match n {
                0 => MomentExpr::Constant(1.0),
                1 => base.canonicalize(),
                _ => MomentExpr::Pow(Box::new(base.canonicalize()), *n),
            },
            MomentExpr::Cos(arg) => MomentExpr::Cos(Box::new(arg.canonicalize())),
            MomentExpr::Sin(arg) => MomentExpr::Sin(Box::new(arg.canonicalize())),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            MomentExpr::Add(_) => 1,
            MomentExpr::Mul(_) => 2,
            // a negative literal re-parses through unary minus, which binds
            // like a factor; give it Mul precedence so it never needs parens
            // inside products but does as a Pow base
            MomentExpr::Constant(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 2,
            MomentExpr::Pow(..) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let needs_parens = self.precedence() < min_prec;
        if needs_parens {
            write!(f, "(")?;
        }
        match self {
            MomentExpr::Constant(c) => write!(f, "{c}")?,
            MomentExpr::Var(name) => write!(f, "{name}")?,
            MomentExpr::Add(children) => {
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    child.fmt_prec(f, 2)?;
                }
            }
            MomentExpr::Mul(children) => {
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    child.fmt_prec(f, 3)?;
                }
            }
            MomentExpr::Pow(base, n) => {
                base.fmt_prec(f, 4)?;
                write!(f, "^{n}")?;
            }
            MomentExpr::Cos(arg) => {
                write!(f, "cos(")?;
                arg.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
            MomentExpr::Sin(arg) => {
                write!(f, "sin(")?;
                arg.fmt_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if needs_parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for MomentExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
