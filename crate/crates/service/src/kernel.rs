//! Script-to-C compilation shared by the HTTP handler and the CLI.

use std::collections::BTreeMap;

use lighthouse_core::kernelc::{
    emit_c, infer, lower, manifest, manifest_json, parse_kernel, validate_ir, KernelError, ParameterManifest, Seed,
    Seeds,
};
use serde::Deserialize;

/// A seed given either as text (`"column"`, `"matrix:inout"`) or as fields.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Text(String),
    Fields(Seed),
}

impl SeedSpec {
    pub fn resolve(&self) -> Result<Seed, KernelError> {
        match self {
            SeedSpec::Text(s) => s.parse(),
            SeedSpec::Fields(s) => Ok(*s),
        }
    }
}

pub fn resolve_seeds(specs: &BTreeMap<String, SeedSpec>) -> Result<Seeds, KernelError> {
    specs.iter().map(|(k, v)| Ok((k.clone(), v.resolve()?))).collect()
}

/// Parses `name=spec` command-line seeds.
pub fn parse_seed_arg(arg: &str) -> Result<(String, Seed), KernelError> {
    let (name, spec) = arg.split_once('=').ok_or_else(|| KernelError::BadSeed(arg.to_string()))?;
    Ok((name.trim().to_string(), spec.parse()?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledKernel {
    pub name: String,
    pub source: String,
    pub manifest: ParameterManifest,
    pub manifest_json: String,
}

impl CompiledKernel {
    pub fn source_file(&self) -> String {
        format!("{}.c", self.name)
    }

    pub fn manifest_file(&self) -> String {
        format!("{}.json", self.name)
    }
}

pub fn compile_kernel(text: &str, seeds: &Seeds) -> Result<CompiledKernel, KernelError> {
    let program = parse_kernel(text)?;
    let typed = infer(&program, seeds)?;
    let ir = lower(&typed);
    validate_ir(&ir)?;
    Ok(CompiledKernel {
        name: ir.name.clone(),
        source: emit_c(&ir),
        manifest: manifest(&ir),
        manifest_json: manifest_json(&ir),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_field_seeds_agree() {
        let text: BTreeMap<String, SeedSpec> = serde_json::from_str(r#"{"x": "column"}"#).unwrap();
        let fields: BTreeMap<String, SeedSpec> =
            serde_json::from_str(r#"{"x": {"kind": "vector", "orientation": "column"}}"#).unwrap();
        assert_eq!(resolve_seeds(&text).unwrap(), resolve_seeds(&fields).unwrap());
        assert_eq!(parse_seed_arg("x=column").unwrap().0, "x");
        assert!(parse_seed_arg("x").is_err());
    }

    #[test]
    fn compiles_a_scaled_matvec() {
        let seeds = resolve_seeds(&[("x".to_string(), SeedSpec::Text("column".into()))].into()).unwrap();
        let k = compile_kernel("kernel scale\nw = a * (B * x)\n", &seeds).unwrap();
        assert_eq!(k.source_file(), "scale.c");
        assert!(k.source.contains("void scale("));
        assert_eq!(k.manifest.parameters.len(), 4);
    }
}
