#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use lighthouse_service::{Config, Recommender, Server, SCHEMA_HEADER};
use reqwest::multipart::{Form, Part};
use serde_json::{json, Value};
use tempfile::TempDir;

pub struct Harness {
    pub server: Server,
    pub client: reqwest::Client,
    pub data: TempDir,
}

/// A live instance on a free local port with its own data directory.
pub async fn start(tweak: impl FnOnce(&mut Config)) -> Harness {
    let data = tempfile::tempdir().unwrap();
    let mut config = Config::new(data.path());
    config.addr = "127.0.0.1:0".parse().unwrap();
    tweak(&mut config);
    let server = Server::start(config, Recommender::bundled().unwrap()).await.unwrap();
    Harness { server, client: reqwest::Client::new(), data }
}

impl Harness {
    pub fn url(&self, path: &str) -> String {
        self.server.url(path)
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        decode(r).await
    }

    pub async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        decode(r).await
    }

    pub async fn upload(&self, filename: &str, bytes: Vec<u8>) -> (u16, Value) {
        let form = Form::new().part("file", Part::bytes(bytes).file_name(filename.to_string()));
        let r = self.client.post(self.url("/api/matrix")).multipart(form).send().await.unwrap();
        decode(r).await
    }

    pub fn uploads_dir(&self) -> PathBuf {
        self.data.path().join("uploads")
    }

    pub fn downloads_dir(&self) -> PathBuf {
        self.data.path().join("downloads")
    }
}

/// Status and JSON body; checks the schema header and the body's version.
pub async fn decode(r: reqwest::Response) -> (u16, Value) {
    let status = r.status().as_u16();
    assert_eq!(r.headers().get(SCHEMA_HEADER).map(|v| v.to_str().unwrap()), Some("1"));
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["schema_version"], json!(1), "{v}");
    if status >= 400 {
        check_schema("ErrorResponse", &v);
        assert_eq!(v["error"]["status"], json!(status));
    }
    (status, v)
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

pub fn core_golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn openapi() -> &'static Value {
    static DOC: OnceLock<Value> = OnceLock::new();
    DOC.get_or_init(|| serde_json::from_str(lighthouse_service::api::OPENAPI).unwrap())
}

/// Validates `value` against a named schema of the published document.
pub fn check_schema(name: &str, value: &Value) {
    let doc = openapi();
    assert!(doc["components"]["schemas"].get(name).is_some(), "no schema {name}");
    let schema = json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$ref": format!("#/components/schemas/{name}"),
        "components": doc["components"],
    });
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{value:#}");
}

/// Option keys of the guided LAPACK search that end at DGBSV.
pub const DGBSV_KEYS: [&str; 6] = ["linear_solve", "ax_b", "real", "general", "band", "double"];

pub fn files_in(dir: &Path) -> Vec<PathBuf> {
    match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().path()).collect(),
        Err(_) => Vec::new(),
    }
}
