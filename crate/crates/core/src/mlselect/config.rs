use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MlError, Result};

pub const LINEAR_METHODS: &[&str] = &["cg", "cgs", "bicg", "bicgstab", "gmres", "fgmres", "tfqmr"];
pub const EIGEN_METHODS: &[&str] =
    &["power", "subspace", "arnoldi", "lanczos", "krylovschur", "generalized_davidson", "jacobi_davidson"];
pub const PRECONDITIONERS: &[&str] = &["ilu(k)", "jacobi", "block_jacobi", "sor", "asm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Linear,
    Eigen,
}

/// A solver method with an optional preconditioner and named parameters.
///
/// The text form is `method`, `method+preconditioner` or either of those
/// followed by `[key=value,...]`, e.g. `gmres+ilu(k)[levels=1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolverConfig {
    pub method: String,
    pub preconditioner: Option<String>,
    pub extra: BTreeMap<String, String>,
}

impl SolverConfig {
    pub fn new(method: &str, preconditioner: Option<&str>) -> Result<Self> {
        let kind = if LINEAR_METHODS.contains(&method) {
            ProblemKind::Linear
        } else if EIGEN_METHODS.contains(&method) {
            ProblemKind::Eigen
        } else {
            return Err(MlError::UnknownMethod(method.to_string()));
        };
        if let Some(pc) = preconditioner {
            if kind == ProblemKind::Eigen || !PRECONDITIONERS.contains(&pc) {
                return Err(MlError::UnknownPreconditioner(pc.to_string()));
            }
        }
        Ok(Self {
            method: method.to_string(),
            preconditioner: preconditioner.map(str::to_string),
            extra: BTreeMap::new(),
        })
    }

    pub fn with_extra(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn kind(&self) -> ProblemKind {
        if EIGEN_METHODS.contains(&self.method.as_str()) {
            ProblemKind::Eigen
        } else {
            ProblemKind::Linear
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Preconditioner text with the bracketed parameters, as stored in corpus files.
    pub fn preconditioner_label(&self) -> String {
        let mut s = self.preconditioner.clone().unwrap_or_default();
        s.push_str(&self.extra_suffix());
        s
    }

    fn extra_suffix(&self) -> String {
        if self.extra.is_empty() {
            return String::new();
        }
        let parts: Vec<String> = self.extra.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("[{}]", parts.join(","))
    }

    /// Command-line options for PETSc (linear) or SLEPc (eigen) programs.
    pub fn petsc_options(&self) -> Vec<String> {
        match self.kind() {
            ProblemKind::Eigen => vec![format!("-eps_type {}", slepc_name(&self.method))],
            ProblemKind::Linear => {
                let mut out = vec![format!("-ksp_type {}", petsc_ksp_name(&self.method))];
                match self.preconditioner.as_deref() {
                    Some(pc) => {
                        out.push(format!("-pc_type {}", petsc_pc_name(pc)));
                        if pc == "ilu(k)" {
                            let levels = self.extra.get("levels").map(String::as_str).unwrap_or("0");
                            out.push(format!("-pc_factor_levels {levels}"));
                        }
                    }
                    None => out.push("-pc_type none".to_string()),
                }
                out
            }
        }
    }
}

fn petsc_ksp_name(method: &str) -> &str {
    match method {
        "bicgstab" => "bcgs",
        m => m,
    }
}

fn petsc_pc_name(pc: &str) -> &str {
    match pc {
        "ilu(k)" => "ilu",
        "block_jacobi" => "bjacobi",
        p => p,
    }
}

fn slepc_name(method: &str) -> &str {
    match method {
        "generalized_davidson" => "gd",
        "jacobi_davidson" => "jd",
        m => m,
    }
}

impl fmt::Display for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.method)?;
        if let Some(pc) = &self.preconditioner {
            write!(f, "+{pc}")?;
        }
        f.write_str(&self.extra_suffix())
    }
}

impl FromStr for SolverConfig {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || MlError::BadLabel(s.to_string());
        let s = s.trim();
        let (head, extra) = match s.find('[') {
            Some(i) => {
                let inner = s[i + 1..].strip_suffix(']').ok_or_else(bad)?;
                (&s[..i], Some(inner))
            }
            None => (s, None),
        };
        let (method, pc) = match head.split_once('+') {
            Some((m, p)) => (m, Some(p)),
            None => (head, None),
        };
        let mut config = SolverConfig::new(method, pc)?;
        if let Some(inner) = extra {
            for pair in inner.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = pair.split_once('=').ok_or_else(bad)?;
                config.extra.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(config)
    }
}

impl Serialize for SolverConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SolverConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
