//! C source and parameter manifest for a lowered kernel.
//!
//! Passing conventions:
//! - every dimension symbol is an `int` parameter, listed first;
//! - then the variables in order of first appearance;
//! - `in` scalars are passed by value, `out` and `inout` scalars by pointer;
//! - arrays are `double *`, `const` when the intent is `in`;
//! - matrices are column-major with leading dimension equal to the row count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::infer::{Intent, Kind, Orientation, VarInfo};
use super::ir::{IrExpr, IrStmt, LoopIr};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    pub intent: Intent,
    pub dims: Vec<String>,
    pub c_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterManifest {
    pub kernel: String,
    pub dims: Vec<String>,
    pub parameters: Vec<ManifestEntry>,
}

fn c_type(v: &VarInfo) -> &'static str {
    match (v.kind, v.intent) {
        (Kind::Scalar, Intent::In) => "double",
        (Kind::Scalar, _) => "double *",
        (_, Intent::In) => "const double *",
        _ => "double *",
    }
}

/// Parameters in call order, dimensions excluded.
pub fn manifest(ir: &LoopIr) -> ParameterManifest {
    ParameterManifest {
        kernel: ir.name.clone(),
        dims: ir.dims.clone(),
        parameters: ir
            .params
            .iter()
            .map(|p| ManifestEntry {
                name: p.name.clone(),
                kind: p.kind,
                orientation: p.orientation,
                intent: p.intent,
                dims: p.dims.clone(),
                c_type: c_type(p).trim_end().to_string(),
            })
            .collect(),
    }
}

pub fn manifest_json(ir: &LoopIr) -> String {
    let mut s = serde_json::to_string_pretty(&manifest(ir)).expect("manifest serialises");
    s.push('\n');
    s
}

struct Emitter<'a> {
    ir: &'a LoopIr,
    scratch: Option<(&'a str, &'a [String])>,
    out: String,
}

impl Emitter<'_> {
    fn access(&self, buffer: &str, index: &[String]) -> String {
        let dims: &[String] = match self.ir.param(buffer) {
            Some(p) => &p.dims,
            None => self.scratch.map(|(_, d)| d).unwrap_or(&[]),
        };
        match index {
            [] => match self.ir.param(buffer) {
                Some(p) if p.intent != Intent::In => format!("*{buffer}"),
                _ => buffer.to_string(),
            },
            [i] => format!("{buffer}[{i}]"),
            [i, j, ..] => format!("{buffer}[{i} + {j} * {}]", dims[0]),
        }
    }

    fn expr(&self, e: &IrExpr, parent: u8) -> String {
        match e {
            IrExpr::Load { buffer, index } => self.access(buffer, index),
            IrExpr::Temp(t) => t.clone(),
            IrExpr::Const(x) => {
                let s = format!("{x:?}");
                if s.contains(['.', 'e', 'E']) {
                    s
                } else {
                    format!("{s}.0")
                }
            }
            IrExpr::Add(a, b) => {
                let s = format!("{} + {}", self.expr(a, 1), self.expr(b, 2));
                if parent > 1 {
                    format!("({s})")
                } else {
                    s
                }
            }
            IrExpr::Mul(a, b) => format!("{} * {}", self.expr(a, 2), self.expr(b, 3)),
        }
    }

    fn block(&mut self, body: &[IrStmt], depth: usize) {
        let pad = "    ".repeat(depth);
        for s in body {
            match s {
                IrStmt::Loop { var, extent, body } => {
                    let _ = writeln!(self.out, "{pad}for (int {var} = 0; {var} < {extent}; ++{var}) {{");
                    self.block(body, depth + 1);
                    let _ = writeln!(self.out, "{pad}}}");
                }
                IrStmt::Zero { temp } => {
                    let _ = writeln!(self.out, "{pad}double {temp} = 0.0;");
                }
                IrStmt::Accumulate { temp, value } => {
                    let v = self.expr(value, 0);
                    let _ = writeln!(self.out, "{pad}{temp} += {v};");
                }
                IrStmt::Store { buffer, index, value } => {
                    let v = self.expr(value, 0);
                    let a = self.access(buffer, index);
                    let _ = writeln!(self.out, "{pad}{a} = {v};");
                }
            }
        }
    }
}

/// One C procedure named after the kernel, with naive loops in statement
/// order.
pub fn emit_c(ir: &LoopIr) -> String {
    let mut e = Emitter { ir, scratch: None, out: String::new() };
    let uses_scratch = ir.nests.iter().any(|n| n.scratch.is_some());
    let _ = writeln!(e.out, "/*");
    let _ = writeln!(e.out, " * Kernel {}:", ir.name);
    for n in &ir.nests {
        let _ = writeln!(e.out, " *   {}", n.source);
    }
    let _ = writeln!(e.out, " *");
    let _ = writeln!(e.out, " * Dimensions come first. Matrices are column-major with leading");
    let _ = writeln!(e.out, " * dimension equal to their row count. Scalars with intent out or");
    let _ = writeln!(e.out, " * inout are passed by pointer.");
    let _ = writeln!(e.out, " *");
    for p in &ir.params {
        let shape = match (p.kind, p.orientation) {
            (Kind::Vector, Some(o)) => format!("{o} vector"),
            (k, _) => k.to_string(),
        };
        let dims = if p.dims.is_empty() { String::new() } else { format!(" ({})", p.dims.join(" x ")) };
        let _ = writeln!(e.out, " *   {:<8} {:<5} {shape}{dims}", p.name, p.intent.as_str());
    }
    let _ = writeln!(e.out, " */");
    if uses_scratch {
        let _ = writeln!(e.out, "#include <stdlib.h>\n");
    }
    let mut params: Vec<String> = ir.dims.iter().map(|d| format!("int {d}")).collect();
    for p in &ir.params {
        let ty = c_type(p);
        let sep = if ty.ends_with('*') { "" } else { " " };
        params.push(format!("{ty}{sep}{}", p.name));
    }
    let _ = writeln!(e.out, "void {}({})\n{{", ir.name, params.join(", "));
    for (i, nest) in ir.nests.iter().enumerate() {
        if i > 0 {
            e.out.push('\n');
        }
        let _ = writeln!(e.out, "    /* {} */", nest.source);
        e.scratch = nest.scratch.as_ref().map(|(n, d)| (n.as_str(), d.as_slice()));
        if let Some((name, dims)) = e.scratch {
            let size: Vec<String> = dims.iter().map(|d| format!("(size_t){d}")).collect();
            let _ = writeln!(e.out, "    {{");
            let _ = writeln!(e.out, "        double *{name} = malloc(sizeof(double) * {});", size.join(" * "));
            let _ = writeln!(e.out, "        if ({name} == NULL) abort();");
            e.block(&nest.body, 2);
            let _ = writeln!(e.out, "        free({name});");
            let _ = writeln!(e.out, "    }}");
        } else {
            e.block(&nest.body, 1);
        }
    }
    e.out.push_str("}\n");
    e.out
}
