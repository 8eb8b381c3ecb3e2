mod common;

use common::*;
use serde_json::{json, Value};
use stabkit_cli::file::{Model, SystemKind};
use stabkit_cli::SystemFile;

/// Rewrites every number as f64 so `2` and `2.0` compare equal.
fn normalize(v: &Value) -> Value {
    match v {
        Value::Number(n) => json!(n.as_f64().unwrap()),
        Value::Array(a) => Value::Array(a.iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), normalize(v))).collect()),
        other => other.clone(),
    }
}

#[test]
fn gallery_files_satisfy_the_schema() {
    let v = validator("system.schema.json");
    for path in gallery_files() {
        let errors = schema_errors(&v, &read_json(&path));
        assert!(errors.is_empty(), "{}: {errors:?}", path.display());
    }
}

#[test]
fn gallery_files_round_trip() {
    for path in gallery_files() {
        let original = read_json(&path);
        let file = SystemFile::load(&path).unwrap();
        let back = serde_json::to_value(&file).unwrap();
        assert_eq!(normalize(&back), normalize(&original), "{}", path.display());
        let again: SystemFile = serde_json::from_value(back).unwrap();
        assert_eq!(again, file);
    }
}

#[test]
fn gallery_files_build_the_model_their_kind_names() {
    for path in gallery_files() {
        let file = SystemFile::load(&path).unwrap();
        let model = file.build().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let ok = match (file.kind, &model) {
            (SystemKind::Periodic, Model::Periodic(_)) | (SystemKind::Discrete, Model::Discrete(_)) => true,
            (SystemKind::Delay, Model::Continuous(s)) => !s.delays.is_empty(),
            (SystemKind::Linear | SystemKind::Nonlinear, Model::Continuous(s)) => s.delays.is_empty(),
            _ => false,
        };
        assert!(ok, "{}: kind {:?} built {model:?}", path.display(), file.kind);
        let dim = match &model {
            Model::Continuous(s) => s.dim,
            Model::Periodic(p) => p.dim(),
            Model::Discrete(d) => d.dim,
        };
        assert_eq!(dim, file.dimension, "{}", path.display());
    }
}

/// Documents the schema rejects, paired with whether the loader's own checks
/// should reject them as well. The two must agree on every case.
fn malformed() -> Vec<(&'static str, Value)> {
    vec![
        ("missing kind", json!({"name": "x", "dimension": 1, "matrix": [[1]]})),
        (
            "unknown kind",
            json!({"name": "x", "kind": "hybrid", "dimension": 1, "matrix": [[1]]}),
        ),
        (
            "zero dimension",
            json!({"name": "x", "kind": "linear", "dimension": 0, "matrix": [[1]]}),
        ),
        (
            "extra field",
            json!({"name": "x", "kind": "linear", "dimension": 1, "matrix": [[1]], "colour": 1}),
        ),
        (
            "linear without matrix",
            json!({"name": "x", "kind": "linear", "dimension": 1}),
        ),
        (
            "linear with equations",
            json!({"name": "x", "kind": "linear", "dimension": 1, "matrix": [[1]], "equations": ["x1"]}),
        ),
        (
            "nonlinear with matrix",
            json!({"name": "x", "kind": "nonlinear", "dimension": 1, "matrix": [[1]], "equations": ["x1"]}),
        ),
        (
            "delay without delays",
            json!({"name": "x", "kind": "delay", "dimension": 1, "matrix": [[1]]}),
        ),
        (
            "delay with empty delays",
            json!({"name": "x", "kind": "delay", "dimension": 1, "matrix": [[1]], "delays": []}),
        ),
        (
            "negative lag",
            json!({"name": "x", "kind": "delay", "dimension": 1, "matrix": [[1]], "delays": [{"lag": -1, "matrix": [[1]]}]}),
        ),
        (
            "periodic without period",
            json!({"name": "x", "kind": "periodic", "dimension": 1, "matrix": [[1]]}),
        ),
        (
            "zero period",
            json!({"name": "x", "kind": "periodic", "dimension": 1, "matrix": [[1]], "period": 0}),
        ),
        (
            "discrete with input",
            json!({"name": "x", "kind": "discrete", "dimension": 1, "equations": ["x1"], "input": {"b": [[1]], "u": [1]}}),
        ),
        (
            "boolean entry",
            json!({"name": "x", "kind": "linear", "dimension": 1, "matrix": [[true]]}),
        ),
        (
            "string param",
            json!({"name": "x", "kind": "nonlinear", "dimension": 1, "equations": ["a*x1"], "params": {"a": "1"}}),
        ),
    ]
}

#[test]
fn schema_and_loader_reject_the_same_documents() {
    let v = validator("system.schema.json");
    for (what, doc) in malformed() {
        assert!(!v.is_valid(&doc), "schema accepted {what}");
        let loaded = serde_json::from_value::<SystemFile>(doc)
            .map_err(|e| e.to_string())
            .and_then(|f| f.validate().map_err(|e| e.0));
        assert!(loaded.is_err(), "loader accepted {what}");
    }
}

#[test]
fn loader_catches_what_the_schema_cannot() {
    // Shapes and expressions are checked only when the file is built.
    let cases = [
        json!({"name": "x", "kind": "linear", "dimension": 2, "matrix": [[1, 0]]}),
        json!({"name": "x", "kind": "nonlinear", "dimension": 1, "equations": ["x1", "x1"]}),
        json!({"name": "x", "kind": "nonlinear", "dimension": 1, "equations": ["x2"]}),
        json!({"name": "x", "kind": "nonlinear", "dimension": 1, "equations": ["x1 +"]}),
        json!({"name": "x", "kind": "nonlinear", "dimension": 1, "equations": ["b*x1"]}),
        json!({"name": "x", "kind": "delay", "dimension": 1, "matrix": [["x1"]], "delays": [{"lag": 1, "matrix": [[1]]}]}),
    ];
    let v = validator("system.schema.json");
    for doc in cases {
        assert!(v.is_valid(&doc), "{doc}");
        let file: SystemFile = serde_json::from_value(doc.clone()).unwrap();
        assert!(file.build().is_err(), "{doc}");
    }
}
