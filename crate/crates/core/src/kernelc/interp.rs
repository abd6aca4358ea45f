//! Dense reference interpreter over the syntax tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, ExprKind};
use super::infer::{Intent, TypedProgram, VarInfo};
use super::{KernelError, Result};

/// Dense column-major array. A scalar has an empty shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn scalar(x: f64) -> Self {
        Tensor { shape: vec![], data: vec![x] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    /// Builds a matrix from row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = vec![0.0; r * c];
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, x) in row.iter().enumerate() {
                data[i + j * r] = *x;
            }
        }
        Tensor { shape: vec![r, c], data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    /// Column-major element `(i, j)`; vectors ignore `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match self.shape.len() {
            0 => self.data[0],
            1 => self.data[i],
            _ => self.data[i + j * self.shape[0]],
        }
    }

    /// Largest elementwise difference, scaled by `max(1, |a|)`.
    pub fn max_rel_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max)
    }
}

pub type Bindings = BTreeMap<String, Tensor>;
pub type Extents = BTreeMap<String, usize>;

pub(crate) fn expected_shape(v: &VarInfo, extents: &Extents) -> Result<Vec<usize>> {
    v.dims.iter().map(|d| extents.get(d).copied().ok_or_else(|| KernelError::MissingExtent(d.clone()))).collect()
}

/// Reads dimension sizes off the bound arrays.
pub fn extents_from_bindings(typed: &TypedProgram, bindings: &Bindings) -> Result<Extents> {
    let mut extents = Extents::new();
    for v in &typed.vars {
        let Some(t) = bindings.get(&v.name) else { continue };
        if t.shape.len() != v.dims.len() {
            return Err(KernelError::ExtentMismatch {
                name: v.name.clone(),
                expected: vec![0; v.dims.len()],
                found: t.shape.clone(),
            });
        }
        for (d, &n) in v.dims.iter().zip(&t.shape) {
            if let Some(&old) = extents.get(d) {
                if old != n {
                    let expected = v.dims.iter().map(|d| extents.get(d).copied().unwrap_or(n)).collect();
                    return Err(KernelError::ExtentMismatch { name: v.name.clone(), expected, found: t.shape.clone() });
                }
            }
            extents.insert(d.clone(), n);
        }
    }
    if let Some(missing) = typed.dims.iter().find(|d| !extents.contains_key(*d)) {
        return Err(KernelError::MissingExtent(missing.clone()));
    }
    Ok(extents)
}

/// Checks the bindings and builds the starting state: bound values for
/// `in` and `inout` variables, zeros for `out` variables.
pub(crate) fn initial_state(typed: &TypedProgram, bindings: &Bindings, extents: &Extents) -> Result<Bindings> {
    let mut state = Bindings::new();
    for v in &typed.vars {
        let shape = expected_shape(v, extents)?;
        match (v.intent, bindings.get(&v.name)) {
            (Intent::Out, Some(t)) | (Intent::In | Intent::InOut, Some(t)) if t.shape != shape => {
                return Err(KernelError::ExtentMismatch {
                    name: v.name.clone(),
                    expected: shape,
                    found: t.shape.clone(),
                })
            }
            (Intent::Out, _) => {
                state.insert(v.name.clone(), Tensor::zeros(shape));
            }
            (_, Some(t)) => {
                if t.data.len() != shape.iter().product::<usize>() {
                    return Err(KernelError::ExtentMismatch {
                        name: v.name.clone(),
                        expected: shape,
                        found: t.shape.clone(),
                    });
                }
                state.insert(v.name.clone(), t.clone());
            }
            (_, None) => return Err(KernelError::MissingBinding(v.name.clone())),
        }
    }
    Ok(state)
}

#[derive(Debug, Clone)]
enum Val {
    S(f64),
    V { row: bool, data: Vec<f64> },
    M { rows: usize, cols: usize, data: Vec<f64> },
}

fn to_val(t: &Tensor, v: &VarInfo) -> Val {
    match t.shape.len() {
        0 => Val::S(t.data[0]),
        1 => Val::V { row: v.orientation == Some(super::Orientation::Row), data: t.data.clone() },
        _ => Val::M { rows: t.shape[0], cols: t.shape[1], data: t.data.clone() },
    }
}

fn to_tensor(v: Val) -> Tensor {
    match v {
        Val::S(x) => Tensor::scalar(x),
        Val::V { data, .. } => Tensor::vector(data),
        Val::M { rows, cols, data } => Tensor { shape: vec![rows, cols], data },
    }
}

fn scale(s: f64, v: Val, left: bool) -> Val {
    let f = |x: f64| if left { s * x } else { x * s };
    match v {
        Val::S(x) => Val::S(f(x)),
        Val::V { row, data } => Val::V { row, data: data.into_iter().map(f).collect() },
        Val::M { rows, cols, data } => Val::M { rows, cols, data: data.into_iter().map(f).collect() },
    }
}

fn eval(e: &Expr, typed: &TypedProgram, state: &Bindings) -> Val {
    match &e.kind {
        ExprKind::Var(name) => to_val(&state[name], typed.var(name).expect("typed variable")),
        ExprKind::Number(x) => Val::S(*x),
        ExprKind::Transpose(a) => match eval(a, typed, state) {
            Val::V { row, data } => Val::V { row: !row, data },
            Val::M { rows, cols, data } => {
                let mut t = vec![0.0; data.len()];
                for i in 0..rows {
                    for j in 0..cols {
                        t[j + i * cols] = data[i + j * rows];
                    }
                }
                Val::M { rows: cols, cols: rows, data: t }
            }
            s => s,
        },
        ExprKind::Binary(BinOp::Add, a, b) => match (eval(a, typed, state), eval(b, typed, state)) {
            (Val::S(x), Val::S(y)) => Val::S(x + y),
            (Val::V { row, data: x }, Val::V { data: y, .. }) => {
                Val::V { row, data: x.iter().zip(&y).map(|(a, b)| a + b).collect() }
            }
            (Val::M { rows, cols, data: x }, Val::M { data: y, .. }) => {
                Val::M { rows, cols, data: x.iter().zip(&y).map(|(a, b)| a + b).collect() }
            }
            _ => unreachable!("sum typed by inference"),
        },
        ExprKind::Binary(BinOp::Mul, a, b) => match (eval(a, typed, state), eval(b, typed, state)) {
            (Val::S(s), v) => scale(s, v, true),
            (v, Val::S(s)) => scale(s, v, false),
            (Val::M { rows, cols, data: m }, Val::V { data: x, .. }) => {
                let y = (0..rows)
                    .map(|i| {
                        let mut acc = 0.0;
                        for k in 0..cols {
                            acc += m[i + k * rows] * x[k];
                        }
                        acc
                    })
                    .collect();
                Val::V { row: false, data: y }
            }
            (Val::V { data: x, .. }, Val::M { rows, cols, data: m }) => {
                let y = (0..cols)
                    .map(|j| {
                        let mut acc = 0.0;
                        for k in 0..rows {
                            acc += x[k] * m[k + j * rows];
                        }
                        acc
                    })
                    .collect();
                Val::V { row: true, data: y }
            }
            (Val::V { row: false, data: u }, Val::V { row: true, data: v }) => {
                let (r, c) = (u.len(), v.len());
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        data[i + j * r] = u[i] * v[j];
                    }
                }
                Val::M { rows: r, cols: c, data }
            }
            (Val::V { data: u, .. }, Val::V { data: v, .. }) => {
                let mut acc = 0.0;
                for k in 0..u.len() {
                    acc += u[k] * v[k];
                }
                Val::S(acc)
            }
            (Val::M { rows: r, cols: n, data: a }, Val::M { cols: c, data: b, .. }) => {
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += a[i + k * r] * b[k + j * n];
                        }
                        data[i + j * r] = acc;
                    }
                }
                Val::M { rows: r, cols: c, data }
            }
        },
    }
}

/// Runs the statements in order over whole arrays. Returns the final value
/// of every variable.
pub fn interpret_ast(typed: &TypedProgram, bindings: &Bindings, extents: &Extents) -> Result<Bindings> {
    let mut state = initial_state(typed, bindings, extents)?;
    for st in &typed.program.statements {
        let v = to_tensor(eval(&st.expr, typed, &state));
        state.insert(st.target.clone(), v);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelc::{infer, parse_kernel, Seeds};

    #[test]
    fn scaled_matrix_vector_product() {
        let p = parse_kernel("kernel k\nw = a * (B * x)\n").unwrap();
        let seeds: Seeds = [("x".to_string(), "column".parse().unwrap())].into_iter().collect();
        let t = infer(&p, &seeds).unwrap();
        let bindings: Bindings = [
            ("B".to_string(), Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]])),
            ("x".to_string(), Tensor::vector(vec![1.0, 1.0])),
            ("a".to_string(), Tensor::scalar(2.0)),
        ]
        .into_iter()
        .collect();
        let ext = extents_from_bindings(&t, &bindings).unwrap();
        let out = interpret_ast(&t, &bindings, &ext).unwrap();
        assert_eq!(out["w"], Tensor::vector(vec![2.0, 4.0]));
    }

    #[test]
    fn binding_errors() {
        let p = parse_kernel("kernel k\ny = A * x\n").unwrap();
        let seeds: Seeds = [("x".to_string(), "column".parse().unwrap())].into_iter().collect();
        let t = infer(&p, &seeds).unwrap();
        let a = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b: Bindings = [("A".to_string(), a.clone())].into_iter().collect();
        let ext = extents_from_bindings(&t, &b).unwrap();
        assert_eq!(interpret_ast(&t, &b, &ext), Err(KernelError::MissingBinding("x".into())));
        let b: Bindings = [("A".to_string(), a), ("x".to_string(), Tensor::vector(vec![1.0; 3]))].into_iter().collect();
        assert!(matches!(extents_from_bindings(&t, &b), Err(KernelError::ExtentMismatch { .. })));
        let ext: Extents = [("m".to_string(), 2), ("n".to_string(), 2)].into_iter().collect();
        assert!(matches!(interpret_ast(&t, &b, &ext), Err(KernelError::ExtentMismatch { .. })));
    }
}
