use crate::error::{Error, Result};
use crate::expr::MomentExpr;

/// Expression compiled to a postfix program over a fixed variable ordering.
/// Used on hot paths (Monte Carlo sampling, simulation, sigma points) where
/// tree-walking with name lookups is too slow.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    max_stack: usize,
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Load(u32),
    AddN(u32),
    MulN(u32),
    Pow(u32),
    Cos,
    Sin,
}

impl CompiledExpr {
    /// Compiles against a variable ordering; `values[i]` at evaluation time
    /// is the value of `vars[i]`.
    pub fn compile(e: &MomentExpr, vars: &[String]) -> Result<Self> {
        let mut ops = Vec::new();
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        emit(e, vars, &mut ops, &mut depth, &mut max_stack)?;
        Ok(CompiledExpr { ops, max_stack })
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval_with(values, &mut stack)
    }

    /// Evaluation with a caller-provided stack buffer to avoid per-call
    /// allocation in tight loops.
    pub fn eval_with(&self, values: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Load(i) => stack.push(values[*i as usize]),
                Op::AddN(n) => {
                    let at = stack.len() - *n as usize;
                    let mut acc = 0.0;
                    for v in stack.drain(at..) {
                        acc += v;
                    }
                    stack.push(acc);
                }
                Op::MulN(n) => {
                    let at = stack.len() - *n as usize;
                    let mut acc = 1.0;
                    for v in stack.drain(at..) {
                        acc *= v;
                    }
                    stack.push(acc);
                }
                Op::Pow(n) => {
                    let x = stack.last_mut().expect("stack underflow");
                    *x = x.powi(*n as i32);
                }
                Op::Cos => {
                    let x = stack.last_mut().expect("stack underflow");
                    *x = x.cos();
                }
                Op::Sin => {
                    let x = stack.last_mut().expect("stack underflow");
                    *x = x.sin();
                }
            }
        }
        stack.pop().expect("empty program")
    }
}

fn emit(
    e: &MomentExpr,
    vars: &[String],
    ops: &mut Vec<Op>,
    depth: &mut usize,
    max_stack: &mut usize,
) -> Result<()> {
    match e {
        MomentExpr::Constant(c) => {
            ops.push(Op::Const(*c));
            *depth += 1;
        }
        MomentExpr::Var(name) => {
            let idx = vars
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            ops.push(Op::Load(idx as u32));
            *depth += 1;
        }
        MomentExpr::Add(children) => {
            for child in children {
                emit(child, vars, ops, depth, max_stack)?;
            }
            ops.push(Op::AddN(children.len() as u32));
            *depth -= children.len() - 1;
        }
        MomentExpr::Mul(children) => {
            for child in children {
                emit(child, vars, ops, depth, max_stack)?;
            }
            ops.push(Op::MulN(children.len() as u32));
            *depth -= children.len() - 1;
        }
        MomentExpr::Pow(base, n) => {
            emit(base, vars, ops, depth, max_stack)?;
            ops.push(Op::Pow(*n));
        }
        MomentExpr::Cos(arg) => {
            emit(arg, vars, ops, depth, max_stack)?;
            ops.push(Op::Cos);
        }
        MomentExpr::Sin(arg) => {
            emit(arg, vars, ops, depth, max_stack)?;
            ops.push(Op::Sin);
        }
    }
    *max_stack = (*max_stack).max(*depth);
    Ok(())
}
