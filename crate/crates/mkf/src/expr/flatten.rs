//! Canonical flattening of expressions into sums of per-variable
//! mixed-trigonometric-polynomial monomials.
//!
//! The pipeline distributes products over sums, expands integer powers,
//! rewrites trig of multi-variable affine arguments through the angle-addition
//! identities, and reduces products of trig factors of the same variable at
//! different argument scales through the product-to-sum identities, until
//! every term is a product of factors of the form
//! (c·v)^p cos^a(c·v) sin^b(c·v) with one scale c per variable.
//!
//! Internally variables are interned to integer ids and terms are sorted
//! vectors; the hot product loops never touch strings or tree maps. The
//! crate-internal [`RawTerms`] form exposes that representation to the
//! expectation engine so batched moment evaluation can stay in the interned
//! domain.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::MomentExpr;

/// Default cap on the number of working terms during expansion. Growth is
/// exponential in dimension × order, so blowing past this is a user error.
pub const DEFAULT_TERM_CAP: usize = 1_000_000;

/// Exponents and argument scale of one variable inside a monomial:
/// (c·v)^{poly} cos^{cos}(c·v) sin^{sin}(c·v).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorPowers {
    pub poly_power: u32,
    pub cos_power: u32,
    pub sin_power: u32,
    pub arg_scale: f64,
}

/// One term of a flattened expression: coefficient times a product of
/// per-variable factors, keyed by variable name.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialTerm {
    pub coefficient: f64,
    pub factors: BTreeMap<String, FactorPowers>,
}

impl MonomialTerm {
    /// Pointwise value at a variable assignment.
    pub fn evaluate(&self, env: &BTreeMap<String, f64>) -> Result<f64> {
        let mut acc = self.coefficient;
        for (name, f) in &self.factors {
            let x = *env
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            let scaled = f.arg_scale * x;
            acc *= scaled.powi(f.poly_power as i32)
                * scaled.cos().powi(f.cos_power as i32)
                * scaled.sin().powi(f.sin_power as i32);
        }
        Ok(acc)
    }

    /// Rebuilds the term as an expression tree.
    pub fn to_expr(&self) -> MomentExpr {
        let mut factors = vec![MomentExpr::Constant(self.coefficient)];
        for (name, f) in &self.factors {
            let scaled = if f.arg_scale == 1.0 {
                MomentExpr::var(name.clone())
            } else {
                MomentExpr::product(vec![
                    MomentExpr::Constant(f.arg_scale),
                    MomentExpr::var(name.clone()),
                ])
            };
            if f.poly_power > 0 {
                factors.push(MomentExpr::pow(scaled.clone(), f.poly_power));
            }
            if f.cos_power > 0 {
                let c = MomentExpr::cos(scaled.clone()).expect("affine by construction");
                factors.push(MomentExpr::pow(c, f.cos_power));
            }
            if f.sin_power > 0 {
                let s = MomentExpr::sin(scaled.clone()).expect("affine by construction");
                factors.push(MomentExpr::pow(s, f.sin_power));
            }
        }
        MomentExpr::product(factors)
    }
}

/// Variable-name interner shared across the raw-term operations of one
/// evaluation context.
#[derive(Default)]
pub(crate) struct VarTable {
    names: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl VarTable {
    pub(crate) fn new() -> Self {
        VarTable::default()
    }

    pub(crate) fn intern(&mut self, name: &str) -> u32 {
        if let Some(id) = self.ids.get(name) {
            return *id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub(crate) fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.names.len()
    }
}

/// One trig factor group: cos^cos · sin^sin of (scale · var), scale > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
struct TrigEntry {
    var: u32,
    scale_bits: u64,
    cos: u32,
    sin: u32,
}

/// Working term over interned variables; `poly` and `trig` are sorted by
/// variable (and scale) so products are linear merges.
#[derive(Clone, Debug, Default)]
struct WTerm {
    coeff: f64,
    poly: Vec<(u32, u32)>,
    trig: Vec<TrigEntry>,
}

#[derive(Clone, Copy, PartialEq)]
enum TrigKind {
    Cos,
    Sin,
}

impl WTerm {
    fn unit(coeff: f64) -> Self {
        WTerm {
            coeff,
            ..Default::default()
        }
    }

    /// Multiplies in one cos/sin factor of `scale · var`, normalizing the
    /// scale sign (cos is even, sin is odd) and eliminating zero scales.
    fn push_trig(&mut self, var: u32, kind: TrigKind, scale: f64) {
        if scale == 0.0 {
            if kind == TrigKind::Sin {
                self.coeff = 0.0;
            }
            return;
        }
        let mut s = scale;
        if s < 0.0 {
            s = -s;
            if kind == TrigKind::Sin {
                self.coeff = -self.coeff;
            }
        }
        let bits = s.to_bits();
        let pos = self
            .trig
            .binary_search_by(|e| (e.var, e.scale_bits).cmp(&(var, bits)));
        match pos {
            Ok(i) => match kind {
                TrigKind::Cos => self.trig[i].cos += 1,
                TrigKind::Sin => self.trig[i].sin += 1,
            },
            Err(i) => self.trig.insert(
                i,
                TrigEntry {
                    var,
                    scale_bits: bits,
                    cos: (kind == TrigKind::Cos) as u32,
                    sin: (kind == TrigKind::Sin) as u32,
                },
            ),
        }
    }

    /// Index of the first variable carrying trig factors at two or more
    /// distinct scales.
    fn multiscale_at(&self) -> Option<usize> {
        self.trig
            .windows(2)
            .position(|w| w[0].var == w[1].var)
    }

    fn key_cmp(&self, other: &WTerm) -> std::cmp::Ordering {
        self.poly.cmp(&other.poly).then_with(|| {
            let a = self
                .trig
                .iter()
                .map(|e| (e.var, e.scale_bits, e.cos, e.sin));
            let b = other
                .trig
                .iter()
                .map(|e| (e.var, e.scale_bits, e.cos, e.sin));
            a.cmp(b)
        })
    }

    fn same_key(&self, other: &WTerm) -> bool {
        self.poly == other.poly && self.trig == other.trig
    }
}

/// Rewrites products of trig factors of one variable at distinct scales via
/// product-to-sum until each variable carries a single scale, pushing the
/// fully reduced terms into `out`. Each application removes one trig unit, so
/// this terminates.
fn resolve(t: WTerm, out: &mut Vec<WTerm>, cap: usize) -> Result<()> {
    if t.coeff == 0.0 {
        return Ok(());
    }
    let Some(i) = t.multiscale_at() else {
        if out.len() >= cap {
            return Err(Error::TermCapExceeded { cap });
        }
        out.push(t);
        return Ok(());
    };
    let mut base = t;
    let var = base.trig[i].var;
    let (bits1, bits2) = (base.trig[i].scale_bits, base.trig[i + 1].scale_bits);
    let take = |e: &mut TrigEntry| -> TrigKind {
        if e.cos > 0 {
            e.cos -= 1;
            TrigKind::Cos
        } else {
            e.sin -= 1;
            TrigKind::Sin
        }
    };
    let k1 = take(&mut base.trig[i]);
    let k2 = take(&mut base.trig[i + 1]);
    base.trig.retain(|e| e.cos > 0 || e.sin > 0);
    let s1 = f64::from_bits(bits1);
    let s2 = f64::from_bits(bits2);
    base.coeff *= 0.5;

    // (sign, kind, scale) pairs for the two product-to-sum output terms
    let parts: [(f64, TrigKind, f64); 2] = match (k1, k2) {
        (TrigKind::Cos, TrigKind::Cos) => {
            [(1.0, TrigKind::Cos, s1 - s2), (1.0, TrigKind::Cos, s1 + s2)]
        }
        (TrigKind::Sin, TrigKind::Sin) => {
            [(1.0, TrigKind::Cos, s1 - s2), (-1.0, TrigKind::Cos, s1 + s2)]
        }
        (TrigKind::Sin, TrigKind::Cos) => {
            [(1.0, TrigKind::Sin, s1 + s2), (1.0, TrigKind::Sin, s1 - s2)]
        }
        (TrigKind::Cos, TrigKind::Sin) => {
            [(1.0, TrigKind::Sin, s1 + s2), (-1.0, TrigKind::Sin, s1 - s2)]
        }
    };
    for (sign, kind, scale) in parts {
        let mut next = base.clone();
        next.coeff *= sign;
        next.push_trig(var, kind, scale);
        resolve(next, out, cap)?;
    }
    Ok(())
}

fn mul_terms(a: &WTerm, b: &WTerm, out: &mut Vec<WTerm>, cap: usize) -> Result<()> {
    let coeff = a.coeff * b.coeff;
    if coeff == 0.0 {
        return Ok(());
    }
    // linear merges of the sorted factor vectors
    let mut poly = Vec::with_capacity(a.poly.len() + b.poly.len());
    let (mut i, mut j) = (0, 0);
    while i < a.poly.len() || j < b.poly.len() {
        if j >= b.poly.len() || (i < a.poly.len() && a.poly[i].0 < b.poly[j].0) {
            poly.push(a.poly[i]);
            i += 1;
        } else if i >= a.poly.len() || b.poly[j].0 < a.poly[i].0 {
            poly.push(b.poly[j]);
            j += 1;
        } else {
            poly.push((a.poly[i].0, a.poly[i].1 + b.poly[j].1));
            i += 1;
            j += 1;
        }
    }
    let mut trig = Vec::with_capacity(a.trig.len() + b.trig.len());
    let (mut i, mut j) = (0, 0);
    while i < a.trig.len() || j < b.trig.len() {
        let pick_a = if j >= b.trig.len() {
            true
        } else if i >= a.trig.len() {
            false
        } else {
            let ka = (a.trig[i].var, a.trig[i].scale_bits);
            let kb = (b.trig[j].var, b.trig[j].scale_bits);
            if ka == kb {
                trig.push(TrigEntry {
                    var: a.trig[i].var,
                    scale_bits: a.trig[i].scale_bits,
                    cos: a.trig[i].cos + b.trig[j].cos,
                    sin: a.trig[i].sin + b.trig[j].sin,
                });
                i += 1;
                j += 1;
                continue;
            }
            ka < kb
        };
        if pick_a {
            trig.push(a.trig[i]);
            i += 1;
        } else {
            trig.push(b.trig[j]);
            j += 1;
        }
    }
    resolve(WTerm { coeff, poly, trig }, out, cap)
}

fn merge(mut terms: Vec<WTerm>) -> Vec<WTerm> {
    terms.retain(|t| t.coeff != 0.0);
    terms.sort_by(|a, b| a.key_cmp(b));
    let mut out: Vec<WTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.same_key(&t) => last.coeff += t.coeff,
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coeff != 0.0);
    out
}

fn multiply_lists(a: &[WTerm], b: &[WTerm], cap: usize) -> Result<Vec<WTerm>> {
    let mut out = Vec::new();
    for ta in a {
        for tb in b {
            mul_terms(ta, tb, &mut out, cap)?;
        }
    }
    Ok(merge(out))
}

/// Expands cos/sin of an affine argument into single-variable trig factors
/// via angle addition; the constant offset becomes cos/sin constant factors.
fn trig_split(
    kind: TrigKind,
    coeffs: &[(u32, f64)],
    offset: f64,
    cap: usize,
) -> Result<Vec<WTerm>> {
    if coeffs.is_empty() {
        let value = match kind {
            TrigKind::Cos => offset.cos(),
            TrigKind::Sin => offset.sin(),
        };
        return Ok(vec![WTerm::unit(value)]);
    }
    let (var, scale) = coeffs[0];
    let rest = &coeffs[1..];
    let mut cos_unit = WTerm::unit(1.0);
    cos_unit.push_trig(var, TrigKind::Cos, scale);
    let mut sin_unit = WTerm::unit(1.0);
    sin_unit.push_trig(var, TrigKind::Sin, scale);

    let rest_cos = trig_split(TrigKind::Cos, rest, offset, cap)?;
    let rest_sin = trig_split(TrigKind::Sin, rest, offset, cap)?;

    let mut out = Vec::new();
    match kind {
        TrigKind::Cos => {
            // cos(A + R) = cos A cos R - sin A sin R
            out.extend(multiply_lists(&[cos_unit], &rest_cos, cap)?);
            let mut neg = multiply_lists(&[sin_unit], &rest_sin, cap)?;
            for t in &mut neg {
                t.coeff = -t.coeff;
            }
            out.extend(neg);
        }
        TrigKind::Sin => {
            // sin(A + R) = sin A cos R + cos A sin R
            out.extend(multiply_lists(&[sin_unit], &rest_cos, cap)?);
            out.extend(multiply_lists(&[cos_unit], &rest_sin, cap)?);
        }
    }
    Ok(merge(out))
}

fn normalize(e: &MomentExpr, cap: usize, table: &mut VarTable) -> Result<Vec<WTerm>> {
    match e {
        MomentExpr::Constant(c) => Ok(if *c == 0.0 {
            vec![]
        } else {
            vec![WTerm::unit(*c)]
        }),
        MomentExpr::Var(name) => {
            let mut t = WTerm::unit(1.0);
            t.poly.push((table.intern(name), 1));
            Ok(vec![t])
        }
        MomentExpr::Add(children) => {
            let mut out = Vec::new();
            for child in children {
                out.extend(normalize(child, cap, table)?);
                if out.len() > cap {
                    return Err(Error::TermCapExceeded { cap });
                }
            }
            Ok(merge(out))
        }
        MomentExpr::Mul(children) => {
            let mut acc = vec![WTerm::unit(1.0)];
            for child in children {
                let terms = normalize(child, cap, table)?;
                acc = multiply_lists(&acc, &terms, cap)?;
            }
            Ok(acc)
        }
        MomentExpr::Pow(base, n) => {
            let mut acc = vec![WTerm::unit(1.0)];
            if *n == 0 {
                return Ok(acc);
            }
            let terms = normalize(base, cap, table)?;
            for _ in 0..*n {
                acc = multiply_lists(&acc, &terms, cap)?;
            }
            Ok(acc)
        }
        MomentExpr::Cos(arg) | MomentExpr::Sin(arg) => {
            let (coeffs, offset) = arg
                .as_affine()
                .ok_or_else(|| Error::NonAffineTrigArg(arg.to_string()))?;
            let coeffs: Vec<(u32, f64)> = coeffs
                .into_iter()
                .map(|(name, a)| (table.intern(&name), a))
                .collect();
            let kind = if matches!(e, MomentExpr::Cos(_)) {
                TrigKind::Cos
            } else {
                TrigKind::Sin
            };
            trig_split(kind, &coeffs, offset, cap)
        }
    }
}

/// Flattened terms in the interned domain, bound to the [`VarTable`] used
/// to produce them.
#[derive(Clone, Debug)]
pub(crate) struct RawTerms(Vec<WTerm>);

impl RawTerms {
    pub(crate) fn len(&self) -> usize {
        self.0.len()
    }

    /// Σ over terms of coeff · Π factor_value(var, powers). The per-variable
    /// powers passed to the callback describe E[(c·v)^p cos^a(c·v) sin^b(c·v)]
    /// with the polynomial scale correction already folded into the running
    /// coefficient.
    pub(crate) fn accumulate<F>(&self, factor_value: &mut F) -> Result<f64>
    where
        F: FnMut(u32, FactorPowers) -> Result<f64>,
    {
        let mut total = 0.0;
        for t in &self.0 {
            let mut value = t.coeff;
            let mut pi = 0usize;
            let mut ti = 0usize;
            while value != 0.0 && (pi < t.poly.len() || ti < t.trig.len()) {
                let pv = t.poly.get(pi).map(|(v, _)| *v);
                let tv = t.trig.get(ti).map(|e| e.var);
                let (var, poly_power, trig) = match (pv, tv) {
                    (Some(a), Some(b)) if a == b => {
                        let p = t.poly[pi].1;
                        let e = t.trig[ti];
                        pi += 1;
                        ti += 1;
                        (a, p, Some(e))
                    }
                    (Some(a), Some(b)) if a < b => {
                        let p = t.poly[pi].1;
                        pi += 1;
                        (a, p, None)
                    }
                    (Some(_), Some(b)) => {
                        let e = t.trig[ti];
                        ti += 1;
                        (b, 0, Some(e))
                    }
                    (Some(a), None) => {
                        let p = t.poly[pi].1;
                        pi += 1;
                        (a, p, None)
                    }
                    (None, Some(b)) => {
                        let e = t.trig[ti];
                        ti += 1;
                        (b, 0, Some(e))
                    }
                    (None, None) => unreachable!(),
                };
                let powers = match trig {
                    Some(e) => {
                        let scale = f64::from_bits(e.scale_bits);
                        if poly_power > 0 && scale != 1.0 {
                            value /= scale.powi(poly_power as i32);
                        }
                        FactorPowers {
                            poly_power,
                            cos_power: e.cos,
                            sin_power: e.sin,
                            arg_scale: scale,
                        }
                    }
                    None => FactorPowers {
                        poly_power,
                        cos_power: 0,
                        sin_power: 0,
                        arg_scale: 1.0,
                    },
                };
                value *= factor_value(var, powers)?;
            }
            total += value;
        }
        Ok(total)
    }
}

/// Flattens into the interned domain against a shared variable table.
pub(crate) fn flatten_raw(
    e: &MomentExpr,
    cap: usize,
    table: &mut VarTable,
) -> Result<RawTerms> {
    Ok(RawTerms(merge(normalize(e, cap, table)?)))
}

/// Product of two raw term lists from the same variable table.
pub(crate) fn multiply_raw(a: &RawTerms, b: &RawTerms, cap: usize) -> Result<RawTerms> {
    Ok(RawTerms(multiply_lists(&a.0, &b.0, cap)?))
}

fn finalize(wterms: Vec<WTerm>, table: &VarTable) -> Vec<MonomialTerm> {
    let wterms = merge(wterms);
    let mut out = Vec::with_capacity(wterms.len());
    for w in wterms {
        let mut coefficient = w.coeff;
        let mut factors: BTreeMap<String, FactorPowers> = BTreeMap::new();
        for (var, p) in &w.poly {
            factors.insert(
                table.name(*var).to_string(),
                FactorPowers {
                    poly_power: *p,
                    cos_power: 0,
                    sin_power: 0,
                    arg_scale: 1.0,
                },
            );
        }
        for e in &w.trig {
            let scale = f64::from_bits(e.scale_bits);
            let entry = factors
                .entry(table.name(e.var).to_string())
                .or_insert(FactorPowers {
                    poly_power: 0,
                    cos_power: 0,
                    sin_power: 0,
                    arg_scale: scale,
                });
            debug_assert!(
                entry.cos_power == 0 && entry.sin_power == 0,
                "one scale per variable after reduction"
            );
            entry.cos_power = e.cos;
            entry.sin_power = e.sin;
            entry.arg_scale = scale;
            // fold the polynomial part onto the trig scale:
            // v^p = (c·v)^p / c^p
            if entry.poly_power > 0 && scale != 1.0 {
                coefficient /= scale.powi(entry.poly_power as i32);
            }
        }
        out.push(MonomialTerm {
            coefficient,
            factors,
        });
    }
    out.sort_by(|a, b| {
        let ka: Vec<_> = a
            .factors
            .iter()
            .map(|(v, f)| {
                (
                    v.clone(),
                    f.poly_power,
                    f.cos_power,
                    f.sin_power,
                    f.arg_scale.to_bits(),
                )
            })
            .collect();
        let kb: Vec<_> = b
            .factors
            .iter()
            .map(|(v, f)| {
                (
                    v.clone(),
                    f.poly_power,
                    f.cos_power,
                    f.sin_power,
                    f.arg_scale.to_bits(),
                )
            })
            .collect();
        ka.cmp(&kb)
    });
    out
}

fn to_wterm(term: &MonomialTerm, table: &mut VarTable) -> WTerm {
    let mut t = WTerm::unit(term.coefficient);
    for (var, f) in &term.factors {
        let id = table.intern(var);
        if f.poly_power > 0 {
            // undo the scale folding: coeff·(c·v)^p = (coeff·c^p)·v^p
            if f.arg_scale != 1.0 {
                t.coeff *= f.arg_scale.powi(f.poly_power as i32);
            }
            let pos = t.poly.binary_search_by(|(v, _)| v.cmp(&id));
            match pos {
                Ok(i) => t.poly[i].1 += f.poly_power,
                Err(i) => t.poly.insert(i, (id, f.poly_power)),
            }
        }
        if f.cos_power > 0 || f.sin_power > 0 {
            let bits = f.arg_scale.to_bits();
            let pos = t
                .trig
                .binary_search_by(|e| (e.var, e.scale_bits).cmp(&(id, bits)));
            match pos {
                Ok(i) => {
                    t.trig[i].cos += f.cos_power;
                    t.trig[i].sin += f.sin_power;
                }
                Err(i) => t.trig.insert(
                    i,
                    TrigEntry {
                        var: id,
                        scale_bits: bits,
                        cos: f.cos_power,
                        sin: f.sin_power,
                    },
                ),
            }
        }
    }
    t
}

/// Flattens with the default term cap.
pub fn flatten(e: &MomentExpr) -> Result<Vec<MonomialTerm>> {
    flatten_with_cap(e, DEFAULT_TERM_CAP)
}

/// Flattens an expression into a canonical, deterministically ordered list of
/// monomial terms whose sum is pointwise equal to the input.
pub fn flatten_with_cap(e: &MomentExpr, cap: usize) -> Result<Vec<MonomialTerm>> {
    let mut table = VarTable::new();
    let wterms = normalize(e, cap, &mut table)?;
    Ok(finalize(wterms, &table))
}

/// Product of two already-flattened expressions as a flattened term list.
/// Equivalent to flattening their product expression, but skips re-expanding
/// the factors.
pub fn multiply_flattened(
    a: &[MonomialTerm],
    b: &[MonomialTerm],
    cap: usize,
) -> Result<Vec<MonomialTerm>> {
    let mut table = VarTable::new();
    let wa: Vec<WTerm> = a.iter().map(|t| to_wterm(t, &mut table)).collect();
    let wb: Vec<WTerm> = b.iter().map(|t| to_wterm(t, &mut table)).collect();
    let product = multiply_lists(&wa, &wb, cap)?;
    Ok(finalize(product, &table))
}
