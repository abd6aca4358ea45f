//! Loop-level form: one loop nest per statement, reductions accumulated into
//! zero-initialised scalar temporaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, ExprKind};
use super::infer::{Intent, Kind, Shape, TypedProgram, VarInfo};
use super::interp::{expected_shape, initial_state, Bindings, Extents, Tensor};
use super::{KernelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IrExpr {
    /// Element of a parameter or scratch array; scalars use an empty index.
    Load {
        buffer: String,
        index: Vec<String>,
    },
    Temp(String),
    Const(f64),
    Add(Box<IrExpr>, Box<IrExpr>),
    Mul(Box<IrExpr>, Box<IrExpr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IrStmt {
    Loop {
        var: String,
        extent: String,
        body: Vec<IrStmt>,
    },
    /// Declares a temporary set to zero.
    Zero {
        temp: String,
    },
    Accumulate {
        temp: String,
        value: IrExpr,
    },
    Store {
        buffer: String,
        index: Vec<String>,
        value: IrExpr,
    },
}

/// Code for one source statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopNest {
    pub source: String,
    /// Scratch array used when the target is read at other positions.
    pub scratch: Option<(String, Vec<String>)>,
    pub body: Vec<IrStmt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopIr {
    pub name: String,
    pub dims: Vec<String>,
    pub params: Vec<VarInfo>,
    pub nests: Vec<LoopNest>,
}

impl LoopIr {
    pub fn param(&self, name: &str) -> Option<&VarInfo> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Loop depth of each nest.
    pub fn depths(&self) -> Vec<usize> {
        fn depth(body: &[IrStmt]) -> usize {
            body.iter()
                .map(|s| match s {
                    IrStmt::Loop { body, .. } => 1 + depth(body),
                    _ => 0,
                })
                .max()
                .unwrap_or(0)
        }
        self.nests.iter().map(|n| depth(&n.body)).collect()
    }
}

struct Lowerer<'a> {
    typed: &'a TypedProgram,
    temps: usize,
    reductions: usize,
}

impl Lowerer<'_> {
    fn load(&self, name: &str, idx: &[String]) -> IrExpr {
        IrExpr::Load { buffer: name.to_string(), index: idx.to_vec() }
    }

    /// Element `idx` of `e`, pushing any reduction loops it needs onto `pre`.
    fn elem(&mut self, e: &Expr, idx: &[String], pre: &mut Vec<IrStmt>) -> IrExpr {
        match &e.kind {
            ExprKind::Var(v) => {
                let n = self.typed.var(v).expect("typed variable").dims.len();
                self.load(v, &idx[..n.min(idx.len())])
            }
            ExprKind::Number(x) => IrExpr::Const(*x),
            ExprKind::Transpose(a) => match self.typed.shape_of(a) {
                Shape::Matrix(..) => self.elem(a, &[idx[1].clone(), idx[0].clone()], pre),
                _ => self.elem(a, idx, pre),
            },
            ExprKind::Binary(BinOp::Add, a, b) => {
                let x = self.elem(a, idx, pre);
                let y = self.elem(b, idx, pre);
                IrExpr::Add(Box::new(x), Box::new(y))
            }
            ExprKind::Binary(BinOp::Mul, a, b) => {
                let (sa, sb) = (self.typed.shape_of(a), self.typed.shape_of(b));
                let mul = |x, y| IrExpr::Mul(Box::new(x), Box::new(y));
                match (&sa, &sb) {
                    (Shape::Scalar, _) => {
                        let x = self.elem(a, &[], pre);
                        let y = self.elem(b, idx, pre);
                        mul(x, y)
                    }
                    (_, Shape::Scalar) => {
                        let x = self.elem(a, idx, pre);
                        let y = self.elem(b, &[], pre);
                        mul(x, y)
                    }
                    (Shape::Col(_), Shape::Row(_)) => {
                        let x = self.elem(a, &idx[..1], pre);
                        let y = self.elem(b, &idx[1..2], pre);
                        mul(x, y)
                    }
                    _ => {
                        let (extent, ia, ib): (String, Vec<String>, Vec<String>);
                        let k = format!("k{}", self.reductions);
                        self.reductions += 1;
                        match (&sa, &sb) {
                            (Shape::Matrix(_, n), Shape::Col(_)) => {
                                extent = n.clone();
                                ia = vec![idx[0].clone(), k.clone()];
                                ib = vec![k.clone()];
                            }
                            (Shape::Row(n), Shape::Matrix(..)) => {
                                extent = n.clone();
                                ia = vec![k.clone()];
                                ib = vec![k.clone(), idx[0].clone()];
                            }
                            (Shape::Row(n), Shape::Col(_)) => {
                                extent = n.clone();
                                ia = vec![k.clone()];
                                ib = vec![k.clone()];
                            }
                            (Shape::Matrix(_, n), Shape::Matrix(..)) => {
                                extent = n.clone();
                                ia = vec![idx[0].clone(), k.clone()];
                                ib = vec![k.clone(), idx[1].clone()];
                            }
                            _ => unreachable!("product typed by inference"),
                        }
                        let temp = format!("t{}", self.temps);
                        self.temps += 1;
                        let mut body = Vec::new();
                        let x = self.elem(a, &ia, &mut body);
                        let y = self.elem(b, &ib, &mut body);
                        body.push(IrStmt::Accumulate { temp: temp.clone(), value: mul(x, y) });
                        pre.push(IrStmt::Zero { temp: temp.clone() });
                        pre.push(IrStmt::Loop { var: k, extent, body });
                        IrExpr::Temp(temp)
                    }
                }
            }
        }
    }
}

/// True when `target` is read at positions other than the element being
/// written: under a reduction or through a matrix transpose.
fn reads_across(e: &Expr, target: &str, typed: &TypedProgram, across: bool) -> bool {
    match &e.kind {
        ExprKind::Var(v) => across && v == target,
        ExprKind::Number(_) => false,
        ExprKind::Transpose(a) => {
            let flips = matches!(typed.shape_of(a), Shape::Matrix(..));
            reads_across(a, target, typed, across || flips)
        }
        ExprKind::Binary(BinOp::Add, a, b) => {
            reads_across(a, target, typed, across) || reads_across(b, target, typed, across)
        }
        ExprKind::Binary(BinOp::Mul, a, b) => {
            let elementwise = matches!(
                (typed.shape_of(a), typed.shape_of(b)),
                (Shape::Scalar, _) | (_, Shape::Scalar) | (Shape::Col(_), Shape::Row(_))
            );
            // A scalar factor is evaluated whole, so a vector target read
            // inside it is read across.
            let inner = |x: &Expr| across || !elementwise || matches!(typed.shape_of(x), Shape::Scalar);
            reads_across(a, target, typed, inner(a)) || reads_across(b, target, typed, inner(b))
        }
    }
}

fn loops(dims: &[String], vars: &[String], inner: Vec<IrStmt>) -> Vec<IrStmt> {
    dims.iter()
        .zip(vars)
        .rev()
        .fold(inner, |body, (d, v)| vec![IrStmt::Loop { var: v.clone(), extent: d.clone(), body }])
}

/// Lowers every statement into its own loop nest.
pub fn lower(typed: &TypedProgram) -> LoopIr {
    let mut lw = Lowerer { typed, temps: 0, reductions: 0 };
    let mut nests = Vec::new();
    for (s, st) in typed.program.statements.iter().enumerate() {
        let target = typed.var(&st.target).expect("typed target");
        let idx: Vec<String> = (0..target.dims.len()).map(|i| format!("i{i}")).collect();
        let scalar_target = target.kind == Kind::Scalar;
        let scratch = (!scalar_target && reads_across(&st.expr, &st.target, typed, false))
            .then(|| (format!("scratch{s}"), target.dims.clone()));
        let dest = scratch.as_ref().map_or(st.target.clone(), |(n, _)| n.clone());
        let mut inner = Vec::new();
        let value = lw.elem(&st.expr, &idx, &mut inner);
        inner.push(IrStmt::Store { buffer: dest.clone(), index: idx.clone(), value });
        let mut body = loops(&target.dims, &idx, inner);
        if scratch.is_some() {
            let copy = IrStmt::Store {
                buffer: st.target.clone(),
                index: idx.clone(),
                value: IrExpr::Load { buffer: dest, index: idx.clone() },
            };
            body.extend(loops(&target.dims, &idx, vec![copy]));
        }
        nests.push(LoopNest { source: st.to_string(), scratch, body });
    }
    LoopIr { name: typed.program.name.clone(), dims: typed.dims.clone(), params: typed.vars.clone(), nests }
}

struct Checker<'a> {
    ir: &'a LoopIr,
    written: BTreeSet<String>,
    scratch: BTreeMap<String, usize>,
}

impl Checker<'_> {
    fn arity(&self, buffer: &str) -> Result<usize> {
        if let Some(p) = self.ir.param(buffer) {
            return Ok(p.dims.len());
        }
        self.scratch.get(buffer).copied().ok_or_else(|| KernelError::InvalidIr(format!("unknown array `{buffer}`")))
    }

    fn expr(&self, e: &IrExpr, loops: &[String], temps: &BTreeSet<String>) -> Result<()> {
        match e {
            IrExpr::Load { buffer, index } => {
                if self.arity(buffer)? != index.len() {
                    return Err(KernelError::InvalidIr(format!("`{buffer}` indexed with {} subscripts", index.len())));
                }
                if let Some(i) = index.iter().find(|i| !loops.contains(i)) {
                    return Err(KernelError::InvalidIr(format!("index `{i}` outside its loop")));
                }
                let readable = match self.ir.param(buffer) {
                    Some(p) => p.intent != Intent::Out || self.written.contains(buffer),
                    None => self.written.contains(buffer),
                };
                if !readable {
                    return Err(KernelError::InvalidIr(format!("`{buffer}` read before it is written")));
                }
                Ok(())
            }
            IrExpr::Temp(t) if !temps.contains(t) => {
                Err(KernelError::InvalidIr(format!("temporary `{t}` used before zeroing")))
            }
            IrExpr::Temp(_) | IrExpr::Const(_) => Ok(()),
            IrExpr::Add(a, b) | IrExpr::Mul(a, b) => {
                self.expr(a, loops, temps)?;
                self.expr(b, loops, temps)
            }
        }
    }

    fn block(&mut self, body: &[IrStmt], loops: &mut Vec<String>, temps: &mut BTreeSet<String>) -> Result<()> {
        let outer_temps = temps.clone();
        for s in body {
            match s {
                IrStmt::Loop { var, extent, body } => {
                    if !self.ir.dims.contains(extent) {
                        return Err(KernelError::InvalidIr(format!("unknown extent `{extent}`")));
                    }
                    if loops.contains(var) {
                        return Err(KernelError::InvalidIr(format!("loop variable `{var}` reused")));
                    }
                    loops.push(var.clone());
                    self.block(body, loops, temps)?;
                    loops.pop();
                }
                IrStmt::Zero { temp } => {
                    temps.insert(temp.clone());
                }
                IrStmt::Accumulate { temp, value } => {
                    if !temps.contains(temp) {
                        return Err(KernelError::InvalidIr(format!("temporary `{temp}` accumulated before zeroing")));
                    }
                    self.expr(value, loops, temps)?;
                }
                IrStmt::Store { buffer, index, value } => {
                    self.expr(value, loops, temps)?;
                    if self.ir.param(buffer).is_some_and(|p| p.intent == Intent::In) {
                        return Err(KernelError::InvalidIr(format!("`{buffer}` has intent in but is written")));
                    }
                    if self.arity(buffer)? != index.len() {
                        return Err(KernelError::InvalidIr(format!(
                            "`{buffer}` indexed with {} subscripts",
                            index.len()
                        )));
                    }
                    if let Some(i) = index.iter().find(|i| !loops.contains(i)) {
                        return Err(KernelError::InvalidIr(format!("index `{i}` outside its loop")));
                    }
                    self.written.insert(buffer.clone());
                }
            }
        }
        *temps = outer_temps;
        Ok(())
    }
}

/// Checks def-use order, subscripts and intents: every array read is an
/// input or already written, `in` parameters are never written and every
/// `out` or `inout` parameter is written.
pub fn validate_ir(ir: &LoopIr) -> Result<()> {
    let mut c = Checker { ir, written: BTreeSet::new(), scratch: BTreeMap::new() };
    for nest in &ir.nests {
        if let Some((name, dims)) = &nest.scratch {
            if let Some(d) = dims.iter().find(|d| !ir.dims.contains(d)) {
                return Err(KernelError::InvalidIr(format!("unknown extent `{d}`")));
            }
            c.scratch.insert(name.clone(), dims.len());
        }
        c.block(&nest.body, &mut Vec::new(), &mut BTreeSet::new())?;
        if let Some((name, _)) = &nest.scratch {
            c.scratch.remove(name);
            c.written.remove(name);
        }
    }
    for p in &ir.params {
        if p.intent != Intent::In && !c.written.contains(&p.name) {
            return Err(KernelError::InvalidIr(format!("`{}` has intent {} but is never written", p.name, p.intent)));
        }
    }
    Ok(())
}

struct Machine<'a> {
    extents: &'a Extents,
    arrays: BTreeMap<String, Tensor>,
    temps: BTreeMap<String, f64>,
    loops: BTreeMap<String, usize>,
}

impl Machine<'_> {
    fn offset(&self, t: &Tensor, index: &[String]) -> usize {
        let ix: Vec<usize> = index.iter().map(|v| self.loops[v]).collect();
        match ix.len() {
            0 => 0,
            1 => ix[0],
            _ => ix[0] + ix[1] * t.shape[0],
        }
    }

    fn eval(&self, e: &IrExpr) -> f64 {
        match e {
            IrExpr::Load { buffer, index } => {
                let t = &self.arrays[buffer];
                t.data[self.offset(t, index)]
            }
            IrExpr::Temp(t) => self.temps[t],
            IrExpr::Const(x) => *x,
            IrExpr::Add(a, b) => self.eval(a) + self.eval(b),
            IrExpr::Mul(a, b) => self.eval(a) * self.eval(b),
        }
    }

    fn run(&mut self, body: &[IrStmt]) {
        for s in body {
            match s {
                IrStmt::Loop { var, extent, body } => {
                    for i in 0..self.extents[extent] {
                        self.loops.insert(var.clone(), i);
                        self.run(body);
                    }
                    self.loops.remove(var);
                }
                IrStmt::Zero { temp } => {
                    self.temps.insert(temp.clone(), 0.0);
                }
                IrStmt::Accumulate { temp, value } => {
                    let v = self.eval(value);
                    *self.temps.get_mut(temp).expect("zeroed temporary") += v;
                }
                IrStmt::Store { buffer, index, value } => {
                    let v = self.eval(value);
                    let t = &self.arrays[buffer];
                    let at = self.offset(t, index);
                    self.arrays.get_mut(buffer).expect("array").data[at] = v;
                }
            }
        }
    }
}

/// Executes the loop nests element by element. Returns the final value of
/// every parameter.
pub fn interpret_ir(ir: &LoopIr, typed: &TypedProgram, bindings: &Bindings, extents: &Extents) -> Result<Bindings> {
    validate_ir(ir)?;
    let arrays = initial_state(typed, bindings, extents)?;
    let mut m = Machine { extents, arrays, temps: BTreeMap::new(), loops: BTreeMap::new() };
    for nest in &ir.nests {
        if let Some((name, dims)) = &nest.scratch {
            let info = VarInfo {
                name: name.clone(),
                kind: Kind::Matrix,
                orientation: None,
                intent: Intent::Out,
                dims: dims.clone(),
            };
            m.arrays.insert(name.clone(), Tensor::zeros(expected_shape(&info, extents)?));
        }
        m.run(&nest.body);
        if let Some((name, _)) = &nest.scratch {
            m.arrays.remove(name);
        }
    }
    Ok(m.arrays)
}
