use std::collections::BTreeMap;
use std::sync::Arc;

use super::engine::{item, render, Context};
use super::{CodegenError, Language, Result, TemplateStore};
use crate::taxonomy::{ElementType, Intent, ParamKind, ParameterSpec, Precision, RoutineRecord, Taxonomy};

/// Where the diagonal of a stored matrix sits in column `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagRow {
    /// Row `j` (full storage).
    Column,
    /// A fixed row for every column (band storage), 1-based.
    Row(String),
}

/// How an input array is filled before the call.
#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    /// `x(i, j) = 1 / (i + j)`, then `shift` is added on the diagonal.
    Matrix { name: String, rows: String, cols: String, diag: DiagRow, shift: String },
    /// Packed triangle of order `order`: `x(k) = 1 / (k + 1)`, then `order` is
    /// added on the diagonal entries.
    Packed { name: String, len: String, order: String, upper: bool },
    /// Every element set to `value`.
    Constant { name: String, dims: Vec<String>, value: f64 },
}

/// Language-independent plan for a routine driver.
#[derive(Debug, Clone)]
pub struct DriverPlan<'a> {
    pub routine: &'a RoutineRecord,
    pub program_name: String,
    /// Scalar inputs and the expressions they are set to, dependencies first.
    pub scalar_inits: Vec<(&'a ParameterSpec, String)>,
    pub arrays: Vec<&'a ParameterSpec>,
    pub fills: Vec<Fill>,
    pub matrix_dims: Vec<(String, String)>,
}

fn identifiers(expr: &str) -> impl Iterator<Item = &str> {
    expr.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| t.chars().next().is_some_and(|c| c.is_ascii_alphabetic()))
}

fn default_value(p: &ParameterSpec) -> &'static str {
    match p.kind {
        ParamKind::Character => "N",
        ParamKind::RealScalar | ParamKind::ComplexScalar => "1.0",
        _ => "1",
    }
}

fn upper_triangle(r: &RoutineRecord) -> bool {
    r.parameters.iter().find(|p| p.name == "UPLO").and_then(|p| p.value.as_deref()) != Some("L")
}

fn band_diagonal(r: &RoutineRecord) -> String {
    let has = |n: &str| r.parameters.iter().any(|p| p.name == n);
    if has("KL") && has("KU") {
        "KL+KU+1".into()
    } else if has("KD") && upper_triangle(r) {
        "KD+1".into()
    } else {
        "1".into()
    }
}

fn fill_for(r: &RoutineRecord, p: &ParameterSpec) -> Fill {
    let name = p.name.clone();
    let dims = p.dims.clone();
    if p.element_type(r) == ElementType::Integer || p.element_type(r) == ElementType::Character {
        return Fill::Constant { name, dims, value: 1.0 };
    }
    match (p.kind, r.storage.as_str()) {
        (ParamKind::Array2d, _) if p.name == "B" => Fill::Constant { name, dims, value: 1.0 },
        (ParamKind::Array2d, storage) if dims.len() == 2 => {
            let diag = if storage == "band" { DiagRow::Row(band_diagonal(r)) } else { DiagRow::Column };
            Fill::Matrix { name, rows: dims[0].clone(), cols: dims[1].clone(), diag, shift: "N".into() }
        }
        (ParamKind::Array1d, "packed") if dims.len() == 1 => {
            Fill::Packed { name, len: dims[0].clone(), order: "N".into(), upper: upper_triangle(r) }
        }
        (ParamKind::Array1d, "tridiagonal") if p.name == "D" => Fill::Constant { name, dims, value: 4.0 },
        _ => Fill::Constant { name, dims, value: 1.0 },
    }
}

/// Orders scalar inputs so each value only refers to parameters set before it.
fn order_scalars(r: &RoutineRecord) -> Result<Vec<(&ParameterSpec, String)>> {
    let pending: Vec<(&ParameterSpec, String)> = r
        .parameters
        .iter()
        .filter(|p| !p.is_array() && p.intent != Intent::Out)
        .map(|p| (p, p.value.clone().unwrap_or_else(|| default_value(p).to_string())))
        .collect();
    let names: Vec<&str> = pending.iter().map(|(p, _)| p.name.as_str()).collect();
    let mut done: Vec<&str> = Vec::new();
    let mut out = Vec::new();
    while out.len() < pending.len() {
        let next = pending.iter().find(|(p, v)| {
            !done.contains(&p.name.as_str())
                && (p.kind == ParamKind::Character
                    || identifiers(v).all(|id| !names.contains(&id) || done.contains(&id)))
        });
        let Some((p, v)) = next else {
            return Err(CodegenError::CyclicValues(r.name.clone()));
        };
        done.push(&p.name);
        out.push((*p, v.clone()));
    }
    Ok(out)
}

/// Works out declarations, initial values and fills for a routine driver.
pub fn analyze_routine(r: &RoutineRecord) -> Result<DriverPlan<'_>> {
    let scalar_inits = order_scalars(r)?;
    let arrays: Vec<&ParameterSpec> = r.parameters.iter().filter(|p| p.is_array()).collect();
    let fills = arrays.iter().filter(|p| p.intent != Intent::Out).map(|p| fill_for(r, p)).collect();
    let mut sizing: Vec<&str> = arrays.iter().flat_map(|p| p.dims.iter().flat_map(|d| identifiers(d))).collect();
    sizing.sort();
    sizing.dedup();
    let matrix_dims = scalar_inits
        .iter()
        .filter(|(p, _)| p.kind == ParamKind::Integer && sizing.contains(&p.name.as_str()))
        .map(|(p, v)| (p.name.clone(), v.clone()))
        .collect();
    Ok(DriverPlan {
        routine: r,
        program_name: format!("{}_driver", r.name.to_lowercase()),
        scalar_inits,
        arrays,
        fills,
        matrix_dims,
    })
}

/// Joins items with `, `, starting a continuation line before `width` is
/// exceeded.
fn wrap_list(items: &[String], width: usize, break_with: &str) -> String {
    let mut out = String::new();
    let mut line = 0;
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
            if line + it.len() + 2 > width {
                out.push_str(break_with);
                line = 0;
            } else {
                out.push(' ');
                line += 1;
            }
        }
        out.push_str(it);
        line += it.len() + 1;
    }
    out
}

/// Language-specific pieces of a routine driver.
pub trait LanguageBackend: Send + Sync {
    fn language(&self) -> Language;
    fn declaration(&self, r: &RoutineRecord, p: &ParameterSpec) -> String;
    fn assignment(&self, r: &RoutineRecord, p: &ParameterSpec, value: &str) -> String;
    fn allocation(&self, p: &ParameterSpec) -> String;
    fn fill(&self, r: &RoutineRecord, fill: &Fill) -> String;
    fn call_args(&self, r: &RoutineRecord) -> String;
    fn symbol(&self, r: &RoutineRecord) -> String;
    fn prototype(&self, r: &RoutineRecord) -> String;
    fn precision_kind(&self, r: &RoutineRecord) -> String;
}

pub struct Fortran90Backend;

impl Fortran90Backend {
    fn type_name(r: &RoutineRecord, p: &ParameterSpec) -> &'static str {
        match p.element_type(r) {
            ElementType::Integer => "integer",
            ElementType::Real => "real(wp)",
            ElementType::Complex => "complex(wp)",
            ElementType::Character => "character",
        }
    }
}

impl LanguageBackend for Fortran90Backend {
    fn language(&self) -> Language {
        Language::Fortran90
    }

    fn declaration(&self, r: &RoutineRecord, p: &ParameterSpec) -> String {
        let ty = Self::type_name(r, p);
        match p.kind {
            ParamKind::Array1d => format!("  {ty}, allocatable :: {}(:)", p.name),
            ParamKind::Array2d => format!("  {ty}, allocatable :: {}(:, :)", p.name),
            _ => format!("  {ty} :: {}", p.name),
        }
    }

    fn assignment(&self, _r: &RoutineRecord, p: &ParameterSpec, value: &str) -> String {
        match p.kind {
            ParamKind::Character => format!("    {} = '{value}'", p.name),
            ParamKind::RealScalar => format!("    {} = real({value}, wp)", p.name),
            ParamKind::ComplexScalar => format!("    {} = cmplx({value}, 0, wp)", p.name),
            _ => format!("    {} = {value}", p.name),
        }
    }

    fn allocation(&self, p: &ParameterSpec) -> String {
        format!("    allocate({}({}))", p.name, p.dims.join(", "))
    }

    fn fill(&self, r: &RoutineRecord, fill: &Fill) -> String {
        match fill {
            Fill::Matrix { name, rows, cols, diag, shift } => {
                let (row, guard) = match diag {
                    DiagRow::Column => ("j".to_string(), format!("j <= {rows}")),
                    DiagRow::Row(e) => (e.clone(), format!("{e} <= {rows}")),
                };
                format!(
                    "    do j = 1, {cols}\n      do i = 1, {rows}\n        {name}(i, j) = 1.0_wp / real(i + j, wp)\n      end do\n      if ({guard}) then\n        {name}({row}, j) = {name}({row}, j) + real({shift}, wp)\n      end if\n    end do"
                )
            }
            Fill::Packed { name, len, order, upper } => {
                let pos = if *upper { "j*(j+1)/2".to_string() } else { format!("j + (j-1)*(2*{order}-j)/2") };
                format!(
                    "    do i = 1, {len}\n      {name}(i) = 1.0_wp / real(i + 1, wp)\n    end do\n    do j = 1, {order}\n      {name}({pos}) = {name}({pos}) + real({order}, wp)\n    end do"
                )
            }
            Fill::Constant { name, value, .. } => {
                let p = r.parameters.iter().find(|p| &p.name == name);
                match p.map(|p| p.element_type(r)) {
                    Some(ElementType::Integer) => format!("    {name} = {}", *value as i64),
                    _ => format!("    {name} = {value:?}_wp"),
                }
            }
        }
    }

    fn call_args(&self, r: &RoutineRecord) -> String {
        let names: Vec<String> = r.parameters.iter().map(|p| p.name.clone()).collect();
        wrap_list(&names, 60, " &\n        ")
    }

    fn symbol(&self, r: &RoutineRecord) -> String {
        r.name.clone()
    }

    fn prototype(&self, _r: &RoutineRecord) -> String {
        String::new()
    }

    fn precision_kind(&self, r: &RoutineRecord) -> String {
        match r.precision {
            Precision::Single => "kind(1.0e0)".into(),
            Precision::Double => "kind(1.0d0)".into(),
        }
    }
}

pub struct CBackend;

impl CBackend {
    fn type_name(r: &RoutineRecord, p: &ParameterSpec) -> &'static str {
        match (p.element_type(r), r.precision) {
            (ElementType::Integer, _) => "int",
            (ElementType::Character, _) => "char",
            (ElementType::Real, Precision::Double) => "double",
            (ElementType::Real, Precision::Single) => "float",
            (ElementType::Complex, Precision::Double) => "double _Complex",
            (ElementType::Complex, Precision::Single) => "float _Complex",
        }
    }

    fn extent(dims: &[String]) -> String {
        dims.iter().map(|d| format!("(size_t)({d})")).collect::<Vec<_>>().join(" * ")
    }
}

impl LanguageBackend for CBackend {
    fn language(&self) -> Language {
        Language::C
    }

    fn declaration(&self, r: &RoutineRecord, p: &ParameterSpec) -> String {
        let ty = Self::type_name(r, p);
        if p.is_array() {
            format!("static {ty} *{};", p.name)
        } else {
            format!("static {ty} {};", p.name)
        }
    }

    fn assignment(&self, _r: &RoutineRecord, p: &ParameterSpec, value: &str) -> String {
        match p.kind {
            ParamKind::Character => format!("    {} = '{value}';", p.name),
            _ => format!("    {} = {value};", p.name),
        }
    }

    fn allocation(&self, p: &ParameterSpec) -> String {
        format!("    {} = xcalloc({}, sizeof *{});", p.name, Self::extent(&p.dims), p.name)
    }

    fn fill(&self, _r: &RoutineRecord, fill: &Fill) -> String {
        match fill {
            Fill::Matrix { name, rows, cols, diag, shift } => {
                let row = match diag {
                    DiagRow::Column => "j".to_string(),
                    DiagRow::Row(e) => format!("({e}) - 1"),
                };
                format!(
                    "    for (int j = 0; j < {cols}; ++j) {{\n        for (int i = 0; i < {rows}; ++i)\n            {name}[i + (size_t)j * ({rows})] = 1.0 / (i + j + 2);\n        if ({row} < {rows})\n            {name}[{row} + (size_t)j * ({rows})] += {shift};\n    }}"
                )
            }
            Fill::Packed { name, len, order, upper } => {
                let pos = if *upper {
                    "(size_t)(j + 1) * (j + 2) / 2 - 1".to_string()
                } else {
                    format!("(size_t)j * (2 * ({order}) - j + 1) / 2")
                };
                format!(
                    "    for (int i = 0; i < {len}; ++i)\n        {name}[i] = 1.0 / (i + 2);\n    for (int j = 0; j < {order}; ++j)\n        {name}[{pos}] += {order};"
                )
            }
            Fill::Constant { name, dims, value } => {
                format!("    for (size_t k = 0; k < {}; ++k)\n        {name}[k] = {value:?};", Self::extent(dims))
            }
        }
    }

    fn call_args(&self, r: &RoutineRecord) -> String {
        let mut args: Vec<String> =
            r.parameters.iter().map(|p| if p.is_array() { p.name.clone() } else { format!("&{}", p.name) }).collect();
        args.extend(r.parameters.iter().filter(|p| p.kind == ParamKind::Character).map(|_| "1".to_string()));
        wrap_list(&args, 64, "\n        ")
    }

    fn symbol(&self, r: &RoutineRecord) -> String {
        format!("{}_", r.name.to_lowercase())
    }

    fn prototype(&self, r: &RoutineRecord) -> String {
        let mut args: Vec<String> =
            r.parameters.iter().map(|p| format!("{} *{}", Self::type_name(r, p), p.name)).collect();
        args.extend(
            r.parameters.iter().filter(|p| p.kind == ParamKind::Character).map(|p| format!("size_t {}_len", p.name)),
        );
        wrap_list(&args, 64, "\n    ")
    }

    fn precision_kind(&self, _r: &RoutineRecord) -> String {
        String::new()
    }
}

/// Language backends by target language.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<Language, Arc<dyn LanguageBackend>>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self { backends: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Fortran90Backend));
        r.register(Arc::new(CBackend));
        r
    }

    pub fn register(&mut self, backend: Arc<dyn LanguageBackend>) {
        self.backends.insert(backend.language(), backend);
    }

    pub fn get(&self, language: Language) -> Option<&dyn LanguageBackend> {
        self.backends.get(&language).map(|b| b.as_ref())
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Text up to the first `. ` followed by a capital letter, capped at 72 chars.
fn first_sentence(text: &str) -> String {
    let end = text
        .match_indices(". ")
        .map(|(i, _)| i)
        .find(|&i| text[i + 2..].chars().next().is_some_and(char::is_uppercase))
        .unwrap_or(text.len());
    let s = text[..end].trim_end_matches('.');
    if s.chars().count() > 72 {
        let cut: String = s.chars().take(69).collect();
        format!("{}...", cut.trim_end())
    } else {
        s.to_string()
    }
}

/// Template context for a routine driver.
pub(crate) fn routine_context(plan: &DriverPlan<'_>, backend: &dyn LanguageBackend, category: &str) -> Context {
    let r = plan.routine;
    let lines = |v: Vec<String>| v.join("\n");
    let mut ctx = Context::new();
    ctx.set("routine_name", r.name.clone())
        .set("description", r.description.clone())
        .set("category", category)
        .set("program_name", plan.program_name.clone())
        .set("precision_kind", backend.precision_kind(r))
        .set("param_decls", lines(r.parameters.iter().map(|p| backend.declaration(r, p)).collect()))
        .set("scalar_inits", lines(plan.scalar_inits.iter().map(|(p, v)| backend.assignment(r, p, v)).collect()))
        .set("allocations", lines(plan.arrays.iter().map(|p| backend.allocation(p)).collect()))
        .set("array_inits", lines(plan.fills.iter().map(|f| backend.fill(r, f)).collect()))
        .set("call_args", backend.call_args(r))
        .set("symbol", backend.symbol(r))
        .set("prototype", backend.prototype(r))
        .set("matrix_dims", plan.matrix_dims.iter().map(|(n, v)| format!("{n} = {v}")).collect::<Vec<_>>().join(", "))
        .set_list(
            "params",
            r.parameters
                .iter()
                .map(|p| {
                    item([
                        ("name", p.name.clone()),
                        ("kind", format!("{:?}", p.kind).to_lowercase()),
                        ("intent", p.intent.as_str().to_string()),
                        ("summary", first_sentence(&p.description)),
                    ])
                })
                .collect(),
        );
    ctx
}

/// Renders the driver for one routine from a given store and backend set.
pub(crate) fn render_routine_with(
    store: &TemplateStore,
    backends: &BackendRegistry,
    routine: &RoutineRecord,
    language: Language,
) -> Result<String> {
    let base = store.base(&routine.problem_class, language)?;
    let backend = backends
        .get(language)
        .ok_or_else(|| CodegenError::NoTemplate { category: routine.problem_class.clone(), language })?;
    let plan = analyze_routine(routine)?;
    render(&base.id, &base.body, &routine_context(&plan, backend, &base.category))
}

/// Complete driver program for a routine, from the bundled templates.
pub fn render_routine_template(taxonomy: &Taxonomy, routine_id: &str, language: Language) -> Result<String> {
    let routine = taxonomy.routine(routine_id)?;
    render_routine_with(&TemplateStore::bundled(), &BackendRegistry::standard(), routine, language)
}
