use erasure_core::config::RunConfig;
use serde_json::{Map, Value};

fn schema() -> Value {
    serde_json::from_str(include_str!("../../../config.schema.json")).unwrap()
}

/// Object holding every default listed in the schema.
fn defaults(node: &Value) -> Value {
    let mut out = Map::new();
    for (key, prop) in node["properties"].as_object().unwrap() {
        let value = match prop.get("default") {
            Some(v) => v.clone(),
            None => defaults(prop),
        };
        out.insert(key.clone(), value);
    }
    Value::Object(out)
}

#[test]
fn schema_defaults_match_the_parser() {
    let doc = defaults(&schema());
    let parsed = RunConfig::from_json_str(&doc.to_string()).unwrap();
    assert_eq!(parsed, RunConfig::default());
}

#[test]
fn schema_is_closed_everywhere() {
    fn walk(node: &Value, path: &str) {
        if node.get("properties").is_some() {
            assert_eq!(node["additionalProperties"], false, "{path}");
            for (key, prop) in node["properties"].as_object().unwrap() {
                walk(prop, &format!("{path}.{key}"));
            }
        }
    }
    walk(&schema(), "$");
}
