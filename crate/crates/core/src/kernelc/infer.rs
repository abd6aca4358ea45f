//! Kind, orientation, dimension and intent inference.
//!
//! Every variable takes one of four types: scalar, row vector, column vector
//! or matrix. The search enumerates all assignments that type every
//! statement, honouring seeds, and keeps the cheapest. Costs come from
//! naming hints only:
//!
//! | first letter | matrix | column | row | scalar |
//! |--------------|--------|--------|-----|--------|
//! | uppercase    | 0      | 2      | 2   | 2      |
//! | lowercase    | 2      | 0      | 1   | 1      |
//!
//! plus 2 for each transpose applied to a scalar. If several assignments
//! tie, the variables they disagree on are reported.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, Expr, ExprKind, KernelProgram};
use super::{KernelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Scalar,
    Vector,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Row,
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    In,
    Out,
    InOut,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Scalar => "scalar",
            Kind::Vector => "vector",
            Kind::Matrix => "matrix",
        }
    }
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Row => "row",
            Orientation::Column => "column",
        }
    }
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::In => "in",
            Intent::Out => "out",
            Intent::InOut => "inout",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// User-fixed facts about one variable. Any field left empty is inferred.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
}

pub type Seeds = BTreeMap<String, Seed>;

impl Seed {
    pub fn kind(kind: Kind) -> Self {
        Seed { kind: Some(kind), ..Seed::default() }
    }

    pub fn vector(orientation: Orientation) -> Self {
        Seed { kind: Some(Kind::Vector), orientation: Some(orientation), intent: None }
    }

    fn allows(&self, ty: Ty) -> bool {
        let kind_ok = self.kind.is_none_or(|k| k == ty.kind());
        let orient_ok = self.orientation.is_none_or(|o| Some(o) == ty.orientation());
        kind_ok && orient_ok
    }
}

/// Parses words such as `vector,column`, `scalar` or `matrix:inout`,
/// separated by commas, colons or spaces. `row` and `column` imply a vector.
impl FromStr for Seed {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || KernelError::BadSeed(s.to_string());
        let mut seed = Seed::default();
        let mut words = 0;
        for w in s.split([',', ':', ' ', '+']).filter(|w| !w.is_empty()) {
            words += 1;
            let w = w.to_ascii_lowercase();
            let (kind, orientation, intent) = match w.as_str() {
                "scalar" => (Some(Kind::Scalar), None, None),
                "vector" => (Some(Kind::Vector), None, None),
                "matrix" => (Some(Kind::Matrix), None, None),
                "row" => (Some(Kind::Vector), Some(Orientation::Row), None),
                "column" | "col" => (Some(Kind::Vector), Some(Orientation::Column), None),
                "in" => (None, None, Some(Intent::In)),
                "out" => (None, None, Some(Intent::Out)),
                "inout" => (None, None, Some(Intent::InOut)),
                _ => return Err(bad()),
            };
            if let Some(k) = kind {
                if seed.kind.is_some_and(|old| old != k) {
                    return Err(bad());
                }
                seed.kind = Some(k);
            }
            if let Some(o) = orientation {
                if seed.orientation.is_some_and(|old| old != o) {
                    return Err(bad());
                }
                seed.orientation = Some(o);
            }
            if let Some(i) = intent {
                if seed.intent.is_some_and(|old| old != i) {
                    return Err(bad());
                }
                seed.intent = Some(i);
            }
        }
        if words == 0 {
            return Err(bad());
        }
        Ok(seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarInfo {
    pub name: String,
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
    pub intent: Intent,
    /// Dimension symbols: none for a scalar, the length for a vector, rows
    /// then columns for a matrix.
    pub dims: Vec<String>,
}

impl VarInfo {
    pub(crate) fn shape(&self) -> Shape {
        match (self.kind, self.orientation) {
            (Kind::Scalar, _) => Shape::Scalar,
            (Kind::Vector, Some(Orientation::Row)) => Shape::Row(self.dims[0].clone()),
            (Kind::Vector, _) => Shape::Col(self.dims[0].clone()),
            (Kind::Matrix, _) => Shape::Matrix(self.dims[0].clone(), self.dims[1].clone()),
        }
    }
}

/// A program with every variable typed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedProgram {
    pub program: KernelProgram,
    /// Variables in order of first appearance.
    pub vars: Vec<VarInfo>,
    /// Dimension symbols in order of first appearance.
    pub dims: Vec<String>,
}

/// Shape of a value with symbolic dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Shape {
    Scalar,
    Row(String),
    Col(String),
    Matrix(String, String),
}

impl TypedProgram {
    pub fn var(&self, name: &str) -> Option<&VarInfo> {
        self.vars.iter().find(|v| v.name == name)
    }

    /// Shape of an expression. The expression must come from the program.
    pub(crate) fn shape_of(&self, e: &Expr) -> Shape {
        match &e.kind {
            ExprKind::Var(v) => self.var(v).expect("typed variable").shape(),
            ExprKind::Number(_) => Shape::Scalar,
            ExprKind::Transpose(a) => match self.shape_of(a) {
                Shape::Row(n) => Shape::Col(n),
                Shape::Col(n) => Shape::Row(n),
                Shape::Matrix(r, c) => Shape::Matrix(c, r),
                Shape::Scalar => Shape::Scalar,
            },
            ExprKind::Binary(BinOp::Add, a, _) => self.shape_of(a),
            ExprKind::Binary(BinOp::Mul, a, b) => match (self.shape_of(a), self.shape_of(b)) {
                (Shape::Scalar, s) | (s, Shape::Scalar) => s,
                (Shape::Matrix(r, _), Shape::Col(_)) => Shape::Col(r),
                (Shape::Row(_), Shape::Matrix(_, c)) => Shape::Row(c),
                (Shape::Col(r), Shape::Row(c)) => Shape::Matrix(r, c),
                (Shape::Row(_), Shape::Col(_)) => Shape::Scalar,
                (Shape::Matrix(r, _), Shape::Matrix(_, c)) => Shape::Matrix(r, c),
                (a, b) => unreachable!("untyped product {a:?} * {b:?}"),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ty {
    Scalar,
    Row,
    Col,
    Matrix,
}

const TYS: [Ty; 4] = [Ty::Scalar, Ty::Col, Ty::Row, Ty::Matrix];

impl Ty {
    fn kind(self) -> Kind {
        match self {
            Ty::Scalar => Kind::Scalar,
            Ty::Row | Ty::Col => Kind::Vector,
            Ty::Matrix => Kind::Matrix,
        }
    }

    fn orientation(self) -> Option<Orientation> {
        match self {
            Ty::Row => Some(Orientation::Row),
            Ty::Col => Some(Orientation::Column),
            _ => None,
        }
    }

    fn rank(self) -> u32 {
        match self {
            Ty::Scalar => 0,
            Ty::Row | Ty::Col => 1,
            Ty::Matrix => 2,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Ty::Scalar => "scalar",
            Ty::Row => "row vector",
            Ty::Col => "column vector",
            Ty::Matrix => "matrix",
        }
    }
}

fn hint_miss(name: &str, ty: Ty) -> u32 {
    match (name.chars().next(), ty) {
        (Some(c), Ty::Matrix) if c.is_ascii_uppercase() => 0,
        (Some(c), _) if c.is_ascii_uppercase() => 2,
        (Some(c), Ty::Col) if c.is_ascii_lowercase() => 0,
        (Some(c), Ty::Matrix) if c.is_ascii_lowercase() => 2,
        (Some(c), _) if c.is_ascii_lowercase() => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ExprCost {
    scalar_transposes: u32,
}

type TypeFailure = (super::ast::Pos, String);

fn type_expr(e: &Expr, lookup: &impl Fn(&str) -> Ty, cost: &mut ExprCost) -> std::result::Result<Ty, TypeFailure> {
    match &e.kind {
        ExprKind::Var(v) => Ok(lookup(v)),
        ExprKind::Number(_) => Ok(Ty::Scalar),
        ExprKind::Transpose(a) => Ok(match type_expr(a, lookup, cost)? {
            Ty::Row => Ty::Col,
            Ty::Col => Ty::Row,
            Ty::Scalar => {
                cost.scalar_transposes += 2;
                Ty::Scalar
            }
            Ty::Matrix => Ty::Matrix,
        }),
        ExprKind::Binary(op, a, b) => {
            let ta = type_expr(a, lookup, cost)?;
            let tb = type_expr(b, lookup, cost)?;
            let out = match op {
                BinOp::Add if ta == tb => Some(ta),
                BinOp::Add => None,
                BinOp::Mul => match (ta, tb) {
                    (Ty::Scalar, t) | (t, Ty::Scalar) => Some(t),
                    (Ty::Matrix, Ty::Col) => Some(Ty::Col),
                    (Ty::Row, Ty::Matrix) => Some(Ty::Row),
                    (Ty::Col, Ty::Row) => Some(Ty::Matrix),
                    (Ty::Matrix, Ty::Matrix) => Some(Ty::Matrix),
                    (Ty::Row, Ty::Col) => Some(Ty::Scalar),
                    _ => None,
                },
            };
            out.ok_or_else(|| {
                let sym = if *op == BinOp::Add { '+' } else { '*' };
                (e.pos, format!("cannot compute {} {sym} {} in `{e}`", ta.describe(), tb.describe()))
            })
        }
    }
}

struct Search<'a> {
    program: &'a KernelProgram,
    vars: Vec<String>,
    allowed: Vec<Vec<Ty>>,
    /// Statements to check once variable `i` is assigned.
    checks: Vec<Vec<usize>>,
    assignment: Vec<Ty>,
    best: Option<u32>,
    solutions: Vec<Vec<Ty>>,
    nodes: u64,
}

const NODE_LIMIT: u64 = 4_000_000;

impl Search<'_> {
    fn index(&self, name: &str) -> usize {
        self.vars.iter().position(|v| v == name).expect("known variable")
    }

    fn check(&self, s: usize) -> Option<ExprCost> {
        let st = &self.program.statements[s];
        let lookup = |n: &str| self.assignment[self.index(n)];
        let mut cost = ExprCost::default();
        let ty = type_expr(&st.expr, &lookup, &mut cost).ok()?;
        (ty == lookup(&st.target)).then_some(cost)
    }

    fn run(&mut self, depth: usize, score: u32) {
        self.nodes += 1;
        if self.nodes > NODE_LIMIT {
            return;
        }
        if self.best.is_some_and(|b| score > b) {
            return;
        }
        if depth == self.vars.len() {
            if self.best != Some(score) {
                self.solutions.clear();
            }
            self.best = Some(score);
            self.solutions.push(self.assignment.clone());
            return;
        }
        for ty in self.allowed[depth].clone() {
            self.assignment[depth] = ty;
            let mut s = score + hint_miss(&self.vars[depth], ty);
            let mut ok = true;
            for &st in &self.checks[depth] {
                match self.check(st) {
                    Some(c) => s += c.scalar_transposes,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.run(depth + 1, s);
            }
        }
    }
}

/// Solves the statements `..count`, returning every best assignment over the
/// variables those statements use.
fn solve(program: &KernelProgram, count: usize, seeds: &Seeds) -> (Vec<String>, Vec<Vec<Ty>>, bool) {
    let prefix = KernelProgram { name: program.name.clone(), statements: program.statements[..count].to_vec() };
    let vars = prefix.variables();
    let allowed: Vec<Vec<Ty>> = vars
        .iter()
        .map(|v| {
            let seed = seeds.get(v).copied().unwrap_or_default();
            let mut tys: Vec<Ty> = TYS.into_iter().filter(|t| seed.allows(*t)).collect();
            tys.sort_by_key(|t| (hint_miss(v, *t), t.rank()));
            tys
        })
        .collect();
    let mut checks = vec![Vec::new(); vars.len()];
    for (i, st) in prefix.statements.iter().enumerate() {
        let last = st
            .expr
            .vars()
            .into_iter()
            .chain([st.target.as_str()])
            .map(|n| vars.iter().position(|v| v == n).expect("known variable"))
            .max()
            .expect("statement has a target");
        checks[last].push(i);
    }
    let n = vars.len();
    let mut search = Search {
        program: &prefix,
        vars,
        allowed,
        checks,
        assignment: vec![Ty::Scalar; n],
        best: None,
        solutions: Vec::new(),
        nodes: 0,
    };
    search.run(0, 0);
    let exhausted = search.nodes > NODE_LIMIT;
    (search.vars, search.solutions, exhausted)
}

/// Explains why statement `s` has no typing, given a best typing of the
/// statements before it.
fn conflict(program: &KernelProgram, s: usize, seeds: &Seeds) -> KernelError {
    let (prev_vars, prev, _) = solve(program, s, seeds);
    let st = &program.statements[s];
    let fixed: BTreeMap<&str, Ty> = match prev.first() {
        Some(sol) => prev_vars.iter().map(String::as_str).zip(sol.iter().copied()).collect(),
        None => BTreeMap::new(),
    };
    let lookup = |n: &str| {
        fixed.get(n).copied().unwrap_or_else(|| {
            let seed = seeds.get(n).copied().unwrap_or_default();
            TYS.into_iter()
                .filter(|t| seed.allows(*t))
                .min_by_key(|t| (hint_miss(n, *t), t.rank()))
                .unwrap_or(Ty::Scalar)
        })
    };
    let mut cost = ExprCost::default();
    let (pos, message) = match type_expr(&st.expr, &lookup, &mut cost) {
        Err(failure) => failure,
        Ok(ty) => {
            let target = lookup(&st.target);
            if ty == target {
                (st.expr.pos, format!("no consistent types for `{st}`"))
            } else {
                (st.target_pos, format!("cannot assign a {} to {} `{}`", ty.describe(), target.describe(), st.target))
            }
        }
    };
    KernelError::TypeConflict { line: pos.line, column: pos.column, message }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn add(&mut self) -> usize {
        self.0.push(self.0.len());
        self.0.len() - 1
    }

    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0[x] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.0[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum DShape {
    Scalar,
    Row(usize),
    Col(usize),
    Matrix(usize, usize),
}

fn unify_shape(uf: &mut UnionFind, a: DShape, b: DShape) {
    match (a, b) {
        (DShape::Row(x) | DShape::Col(x), DShape::Row(y) | DShape::Col(y)) => uf.union(x, y),
        (DShape::Matrix(r1, c1), DShape::Matrix(r2, c2)) => {
            uf.union(r1, r2);
            uf.union(c1, c2);
        }
        _ => {}
    }
}

fn dim_shape(e: &Expr, shapes: &BTreeMap<String, DShape>, uf: &mut UnionFind) -> DShape {
    match &e.kind {
        ExprKind::Var(v) => shapes[v],
        ExprKind::Number(_) => DShape::Scalar,
        ExprKind::Transpose(a) => match dim_shape(a, shapes, uf) {
            DShape::Row(n) => DShape::Col(n),
            DShape::Col(n) => DShape::Row(n),
            DShape::Matrix(r, c) => DShape::Matrix(c, r),
            DShape::Scalar => DShape::Scalar,
        },
        ExprKind::Binary(BinOp::Add, a, b) => {
            let (sa, sb) = (dim_shape(a, shapes, uf), dim_shape(b, shapes, uf));
            unify_shape(uf, sa, sb);
            sa
        }
        ExprKind::Binary(BinOp::Mul, a, b) => {
            let (sa, sb) = (dim_shape(a, shapes, uf), dim_shape(b, shapes, uf));
            match (sa, sb) {
                (DShape::Scalar, s) | (s, DShape::Scalar) => s,
                (DShape::Matrix(r, k1), DShape::Col(k2)) => {
                    uf.union(k1, k2);
                    DShape::Col(r)
                }
                (DShape::Row(k1), DShape::Matrix(k2, c)) => {
                    uf.union(k1, k2);
                    DShape::Row(c)
                }
                (DShape::Col(r), DShape::Row(c)) => DShape::Matrix(r, c),
                (DShape::Row(k1), DShape::Col(k2)) => {
                    uf.union(k1, k2);
                    DShape::Scalar
                }
                (DShape::Matrix(r, k1), DShape::Matrix(k2, c)) => {
                    uf.union(k1, k2);
                    DShape::Matrix(r, c)
                }
                _ => unreachable!("product typed by the search"),
            }
        }
    }
}

const DIM_NAMES: [&str; 8] = ["m", "n", "p", "q", "r", "s", "t", "k"];

/// Intent from usage: read before any write gives `in` or `inout`, written
/// before any read gives `out`.
fn usage_intent(program: &KernelProgram, name: &str) -> Intent {
    let mut written = false;
    for st in &program.statements {
        if st.expr.vars().contains(&name) {
            return if program.statements.iter().any(|s| s.target == name) { Intent::InOut } else { Intent::In };
        }
        if st.target == name {
            written = true;
            break;
        }
    }
    debug_assert!(written);
    Intent::Out
}

/// Types every variable of `program`, taking `seeds` as fixed facts.
pub fn infer(program: &KernelProgram, seeds: &Seeds) -> Result<TypedProgram> {
    let names = program.variables();
    if let Some(unknown) = seeds.keys().find(|k| !names.contains(k)) {
        return Err(KernelError::UnknownSeedVariable(unknown.clone()));
    }
    for (name, seed) in seeds {
        if seed.kind.is_some_and(|k| k != Kind::Vector) && seed.orientation.is_some() {
            return Err(KernelError::BadSeed(format!("{name}: orientation on a non-vector")));
        }
    }
    let (vars, solutions, exhausted) = solve(program, program.statements.len(), seeds);
    if exhausted {
        return Err(KernelError::Ambiguous(names.into_iter().filter(|n| !seeds.contains_key(n)).collect()));
    }
    if solutions.is_empty() {
        let failing = (1..=program.statements.len())
            .find(|&k| solve(program, k, seeds).1.is_empty())
            .expect("the full program has no solution");
        return Err(conflict(program, failing - 1, seeds));
    }
    if solutions.len() > 1 {
        let differing = (0..vars.len())
            .filter(|&i| solutions.iter().any(|s| s[i] != solutions[0][i]))
            .map(|i| vars[i].clone())
            .collect();
        return Err(KernelError::Ambiguous(differing));
    }
    let types: BTreeMap<&str, Ty> = vars.iter().map(String::as_str).zip(solutions[0].iter().copied()).collect();

    let mut uf = UnionFind(Vec::new());
    let mut shapes = BTreeMap::new();
    for name in &names {
        let shape = match types[name.as_str()] {
            Ty::Scalar => DShape::Scalar,
            Ty::Row => DShape::Row(uf.add()),
            Ty::Col => DShape::Col(uf.add()),
            Ty::Matrix => DShape::Matrix(uf.add(), uf.add()),
        };
        shapes.insert(name.clone(), shape);
    }
    for st in &program.statements {
        let rhs = dim_shape(&st.expr, &shapes, &mut uf);
        unify_shape(&mut uf, shapes[&st.target], rhs);
    }
    let mut class_names: BTreeMap<usize, String> = BTreeMap::new();
    let mut dims = Vec::new();
    let mut fresh =
        DIM_NAMES.iter().map(|s| s.to_string()).chain((1..).map(|i| format!("n{i}"))).filter(|d| !names.contains(d));
    let mut dim_name = |uf: &mut UnionFind, id: usize| -> String {
        let root = uf.find(id);
        class_names
            .entry(root)
            .or_insert_with(|| {
                let d = fresh.next().expect("unbounded names");
                dims.push(d.clone());
                d
            })
            .clone()
    };

    let mut infos = Vec::new();
    for name in &names {
        let ty = types[name.as_str()];
        let dims = match shapes[name] {
            DShape::Scalar => vec![],
            DShape::Row(n) | DShape::Col(n) => vec![dim_name(&mut uf, n)],
            DShape::Matrix(r, c) => vec![dim_name(&mut uf, r), dim_name(&mut uf, c)],
        };
        let used = usage_intent(program, name);
        let intent = match seeds.get(name).and_then(|s| s.intent) {
            None => used,
            Some(Intent::InOut) => Intent::InOut,
            Some(i) if i == used => i,
            Some(i) => return Err(KernelError::IntentConflict { name: name.clone(), intent: i.to_string() }),
        };
        infos.push(VarInfo { name: name.clone(), kind: ty.kind(), orientation: ty.orientation(), intent, dims });
    }
    Ok(TypedProgram { program: program.clone(), vars: infos, dims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelc::parse_kernel;

    const FIG5: &str = "kernel gemver\nB = A + u1 * v1' + u2 * v2'\nx = b * (B' * y) + z\nw = a * (B * x)\n";

    fn typed(src: &str, seeds: &[(&str, &str)]) -> Result<TypedProgram> {
        let seeds = seeds.iter().map(|(k, v)| (k.to_string(), v.parse().unwrap())).collect();
        infer(&parse_kernel(src).unwrap(), &seeds)
    }

    fn roles(t: &TypedProgram) -> BTreeMap<&str, (Kind, Option<Orientation>, Intent)> {
        t.vars.iter().map(|v| (v.name.as_str(), (v.kind, v.orientation, v.intent))).collect()
    }

    #[test]
    fn figure_roles_without_seeds() {
        let t = typed(FIG5, &[]).unwrap();
        let r = roles(&t);
        use Intent::*;
        use Kind::*;
        let col = Some(Orientation::Column);
        let expected = [
            ("A", (Matrix, None, In)),
            ("B", (Matrix, None, Out)),
            ("u1", (Vector, col, In)),
            ("u2", (Vector, col, In)),
            ("v1", (Vector, col, In)),
            ("v2", (Vector, col, In)),
            ("w", (Vector, col, Out)),
            ("x", (Vector, col, Out)),
            ("y", (Vector, col, In)),
            ("z", (Vector, col, In)),
            ("a", (Scalar, None, In)),
            ("b", (Scalar, None, In)),
        ];
        assert_eq!(r, expected.into_iter().collect());
        let dims: BTreeMap<&str, Vec<String>> = t.vars.iter().map(|v| (v.name.as_str(), v.dims.clone())).collect();
        assert_eq!(dims["A"], ["m", "n"]);
        assert_eq!(dims["B"], ["m", "n"]);
        assert_eq!(dims["u1"], ["m"]);
        assert_eq!(dims["v2"], ["n"]);
        assert_eq!(dims["y"], ["m"]);
        assert_eq!(dims["x"], ["n"]);
        assert_eq!(dims["w"], ["m"]);
        assert_eq!(t.dims, ["m", "n"]);
    }

    #[test]
    fn seeds_propagate() {
        let t = typed("kernel k\ny = x\n", &[("x", "column")]).unwrap();
        assert_eq!(t.var("y").unwrap().orientation, Some(Orientation::Column));
        assert_eq!(t.var("y").unwrap().dims, t.var("x").unwrap().dims);
        let t = typed("kernel k\ny = x\n", &[("x", "row")]).unwrap();
        assert_eq!(t.var("y").unwrap().orientation, Some(Orientation::Row));
    }

    #[test]
    fn vectors_default_to_columns() {
        let t = typed("kernel k\ny = x\n", &[]).unwrap();
        assert_eq!(t.var("y").unwrap().orientation, Some(Orientation::Column));
    }

    #[test]
    fn ties_are_reported() {
        match typed("kernel k\nc = a * b\n", &[]) {
            Err(KernelError::Ambiguous(vars)) => assert_eq!(vars, ["a", "b"]),
            other => panic!("{other:?}"),
        }
        let t = typed("kernel k\nc = a * b\n", &[("a", "scalar")]).unwrap();
        assert_eq!(t.var("c").unwrap().kind, Kind::Vector);
    }

    #[test]
    fn scaled_dot_product() {
        let t = typed("kernel k\ny = a * x + y\ns = x' * y\n", &[]).unwrap();
        assert_eq!(t.var("a").unwrap().kind, Kind::Scalar);
        assert_eq!(t.var("s").unwrap().kind, Kind::Scalar);
        assert_eq!(t.var("y").unwrap().orientation, Some(Orientation::Column));
        assert_eq!(t.var("y").unwrap().intent, Intent::InOut);
    }

    #[test]
    fn seeds_override_hints() {
        let t = typed("kernel k\ny = A * x\n", &[("A", "scalar"), ("x", "column")]).unwrap();
        assert_eq!(t.var("A").unwrap().kind, Kind::Scalar);
        let t = typed("kernel k\nw = a * (B * x)\n", &[("a", "row"), ("x", "column")]).unwrap();
        assert_eq!(t.var("w").unwrap().kind, Kind::Scalar);
    }

    #[test]
    fn dot_product() {
        let t = typed("kernel dot\nr = x' * y\n", &[]).unwrap();
        assert_eq!(t.var("r").unwrap().kind, Kind::Scalar);
        assert_eq!(t.var("x").unwrap().orientation, Some(Orientation::Column));
        assert_eq!(t.var("x").unwrap().dims, t.var("y").unwrap().dims);
    }

    #[test]
    fn conflicts() {
        match typed("kernel k\nw = x + A\n", &[("x", "column"), ("A", "matrix")]) {
            Err(KernelError::TypeConflict { line, column, message }) => {
                assert_eq!((line, column), (2, 7));
                assert!(message.contains("column vector + matrix"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match typed("kernel k\nB = u * v\n", &[("u", "column"), ("v", "column")]) {
            Err(KernelError::TypeConflict { line: 2, column: 7, message }) => {
                assert!(message.contains("column vector * column vector"), "{message}")
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            typed("kernel k\nB = a + A\n", &[("a", "scalar"), ("A", "matrix")]),
            Err(KernelError::TypeConflict { .. })
        ));
        match typed("kernel k\ny = x\nx = A\n", &[("x", "column"), ("A", "matrix")]) {
            Err(KernelError::TypeConflict { line: 3, column: 1, message }) => {
                assert!(message.contains("cannot assign a matrix to column vector `x`"), "{message}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn intents() {
        let t = typed("kernel k\nx = x + y\nz = x\n", &[("y", "column")]).unwrap();
        assert_eq!(t.var("x").unwrap().intent, Intent::InOut);
        assert_eq!(t.var("y").unwrap().intent, Intent::In);
        assert_eq!(t.var("z").unwrap().intent, Intent::Out);
        let t = typed(FIG5, &[("B", "inout")]).unwrap();
        assert_eq!(t.var("B").unwrap().intent, Intent::InOut);
        assert!(matches!(typed(FIG5, &[("B", "in")]), Err(KernelError::IntentConflict { .. })));
        assert!(matches!(typed(FIG5, &[("A", "out")]), Err(KernelError::IntentConflict { .. })));
    }

    #[test]
    fn seed_parsing() {
        assert_eq!("vector,column".parse::<Seed>().unwrap(), Seed::vector(Orientation::Column));
        assert_eq!("row".parse::<Seed>().unwrap(), Seed::vector(Orientation::Row));
        assert_eq!(
            "matrix:inout".parse::<Seed>().unwrap(),
            Seed { kind: Some(Kind::Matrix), orientation: None, intent: Some(Intent::InOut) }
        );
        for bad in ["", "tensor", "row,column", "in,out", "scalar,matrix"] {
            assert!(bad.parse::<Seed>().is_err(), "{bad}");
        }
        assert!(matches!(typed("kernel k\ny = x\n", &[("q", "scalar")]), Err(KernelError::UnknownSeedVariable(_))));
        let odd: Seeds =
            [("x".to_string(), Seed { kind: Some(Kind::Scalar), orientation: Some(Orientation::Row), intent: None })]
                .into();
        assert!(matches!(infer(&parse_kernel("kernel k\ny = x\n").unwrap(), &odd), Err(KernelError::BadSeed(_))));
    }

    #[test]
    fn dimension_names_skip_variables() {
        let t = typed("kernel k\nn = A * m\n", &[]).unwrap();
        assert_eq!(t.var("A").unwrap().dims, ["p", "q"]);
    }
}
