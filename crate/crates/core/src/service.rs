//! Transport-independent request handling for the HTTP API.
//!
//! [`ApiSession::handle`] maps a method, path and JSON body to a status code
//! and JSON body. Numbers shown to people are rounded to six significant
//! digits; each has a companion `*_exact` field with the full value.
//!
//! | route              | body                                              |
//! |--------------------|---------------------------------------------------|
//! | `GET /health`      |                                                   |
//! | `POST /predict`    | `{case: {feature: value}, id?}`                   |
//! | `POST /explain`    | `{case, id?, mode?: exact\|mc, samples?, seed?}`  |
//! | `POST /whatif`     | `{base_case, target_case, ordering?: [feature]}`  |
//! | `GET /curves/{f}`  |                                                   |

use std::sync::Mutex;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::dataset::{Case, Label};
use crate::error::Error;
use crate::explain::{
    local_function_curve, Explainer, ShapleyMode, ShapleyResult, DEFAULT_PERMUTATIONS, EXACT_LIMIT, SUBSET_NOTE,
};
use crate::model::{Prediction, TrainedModel};

/// Samples of `/curves/{feature}`.
pub const CURVE_POINTS: usize = 201;
/// Permutations used to rank features when `/whatif` gets no ordering and
/// the model is too wide for exact Shapley values.
pub const WHATIF_RANKING_PERMUTATIONS: usize = 1000;
const LOG_CAPACITY: usize = 1000;

/// Rounds to six significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
}

impl ApiResponse {
    fn ok(body: Value) -> Self {
        ApiResponse { status: 200, body }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        ApiResponse { status, body: json!({ "error": message.into() }) }
    }
}

#[derive(Debug)]
struct ApiError {
    status: u16,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: 400, message: message.into() }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError { status: 422, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownFeature(_) | Error::InvalidParameter(_) | Error::TooManyFeatures { .. } => 400,
            Error::UnknownCase(_) => 404,
            _ => 500,
        };
        ApiError { status, message: e.to_string() }
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// A loaded model serving read-only requests.
#[derive(Debug)]
pub struct ApiSession {
    model: TrainedModel,
    workers: usize,
    log: Mutex<Vec<String>>,
}

impl ApiSession {
    pub fn new(model: TrainedModel, workers: usize) -> Self {
        ApiSession { model, workers: workers.max(1), log: Mutex::new(Vec::new()) }
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    /// The most recent requests as `METHOD path status`.
    pub fn request_log(&self) -> Vec<String> {
        self.log.lock().map(|l| l.clone()).unwrap_or_default()
    }

    fn explainer(&self) -> Explainer<'_> {
        Explainer::new(&self.model).with_workers(self.workers)
    }

    /// Routes one request.
    pub fn handle(&self, method: &str, path: &str, body: &[u8]) -> ApiResponse {
        let path = path.split('?').next().unwrap_or("").trim_end_matches('/');
        let response = match (method, path) {
            ("GET", "/health") => ApiResponse::ok(self.health()),
            ("POST", "/predict") => self.respond(body, |v| self.predict(v)),
            ("POST", "/explain") => self.respond(body, |v| self.explain(v)),
            ("POST", "/whatif") => self.respond(body, |v| self.whatif(v)),
            ("GET", p) if p.starts_with("/curves/") => match self.curve(&p["/curves/".len()..]) {
                Ok(v) => ApiResponse::ok(v),
                Err(e) => ApiResponse::error(e.status, e.message),
            },
            (_, "/health" | "/predict" | "/explain" | "/whatif") => ApiResponse::error(405, "method not allowed"),
            _ => ApiResponse::error(404, format!("no route for {path}")),
        };
        if let Ok(mut log) = self.log.lock() {
            if log.len() == LOG_CAPACITY {
                log.remove(0);
            }
            log.push(format!("{method} {path} {}", response.status));
        }
        response
    }

    fn respond(&self, body: &[u8], f: impl FnOnce(&Value) -> ApiResult<Value>) -> ApiResponse {
        let parsed = if body.iter().all(u8::is_ascii_whitespace) {
            Err(ApiError::bad_request("empty request body"))
        } else {
            serde_json::from_slice::<Value>(body).map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))
        };
        match parsed.and_then(|v| {
            if v.is_object() {
                f(&v)
            } else {
                Err(ApiError::bad_request("request body must be a JSON object"))
            }
        }) {
            Ok(v) => ApiResponse::ok(v),
            Err(e) => ApiResponse::error(e.status, e.message),
        }
    }

    pub fn health(&self) -> Value {
        let m = &self.model;
        json!({
            "status": "ok",
            "variant": m.variant(),
            "k": m.k,
            "metric": m.training.metric,
            "cv_score": round6(m.cv_score),
            "cv_score_exact": m.cv_score,
            "scoring": m.scoring,
            "references": m.references().len(),
            "baseline": m.baseline(),
            "probability_weights": m.probability.is_some(),
            "features": (0..m.n_features())
                .map(|j| json!({ "name": m.schema.name(j), "description": m.schema.description(j) }))
                .collect::<Vec<_>>(),
        })
    }

    /// Builds a case from a `{feature: value}` object. Unknown keys are a
    /// 400; values that are neither numbers, numeric strings, null nor a
    /// missing marker are a 422.
    fn parse_case(&self, value: Option<&Value>, id: &str, field: &str) -> ApiResult<Case> {
        let map = match value {
            Some(Value::Object(m)) => m,
            Some(_) => return Err(ApiError::bad_request(format!("`{field}` must be an object of feature values"))),
            None => return Err(ApiError::bad_request(format!("missing `{field}`"))),
        };
        let schema = &self.model.schema;
        let mut features = vec![None; schema.len()];
        for (key, v) in map {
            let j = schema.position(key).ok_or_else(|| ApiError::bad_request(format!("unknown feature `{key}`")))?;
            features[j] = match v {
                Value::Null => None,
                Value::Number(n) => Some(n.as_f64().ok_or_else(|| ApiError::unprocessable(format!("`{key}` is out of range")))?),
                Value::String(s) if crate::dataset::MISSING_SENTINELS.contains(&s.trim()) => None,
                Value::String(s) => match s.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => Some(x),
                    _ => return Err(ApiError::unprocessable(format!("`{key}` is not numeric: {s:?}"))),
                },
                other => return Err(ApiError::unprocessable(format!("`{key}` is not numeric: {other}"))),
            };
        }
        let label = None::<Label>;
        Ok(Case { id: id.to_string(), features, label, period: None })
    }

    fn case_id(body: &Value, key: &str, default: &str) -> String {
        body.get(key).and_then(Value::as_str).unwrap_or(default).to_string()
    }

    fn feature_list(&self, value: &Value) -> ApiResult<Vec<usize>> {
        let items = value.as_array().ok_or_else(|| ApiError::bad_request("`ordering` must be a list of features"))?;
        items
            .iter()
            .map(|item| {
                let key = match item {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    _ => return Err(ApiError::bad_request("ordering entries must be feature names")),
                };
                self.model
                    .schema
                    .position(&key)
                    .ok_or_else(|| ApiError::bad_request(format!("unknown feature `{key}`")))
            })
            .collect()
    }

    pub fn prediction_json(&self, p: &Prediction) -> Value {
        json!({
            "id": p.id,
            "label": p.label,
            "label_name": p.label.to_string(),
            "probability": round6(p.probability),
            "probability_exact": p.probability,
            "k": self.model.k,
            "neighbors": p.neighbors.iter().map(|n| json!({
                "id": self.model.references()[n.index].id,
                "label": n.label,
                "similarity": round6(n.similarity),
                "similarity_exact": n.similarity,
            })).collect::<Vec<_>>(),
        })
    }

    fn predict(&self, body: &Value) -> ApiResult<Value> {
        let id = Self::case_id(body, "id", "query");
        let case = self.parse_case(body.get("case"), &id, "case")?;
        let p = self.model.predict_case(&case, false)?;
        Ok(self.prediction_json(&p))
    }

    fn shapley_json(&self, s: &ShapleyResult) -> Value {
        let schema = &self.model.schema;
        let mut order: Vec<usize> = (0..s.values.len()).collect();
        order.sort_by(|&a, &b| s.values[b].abs().total_cmp(&s.values[a].abs()).then(a.cmp(&b)));
        let (mode, samples, seed) = match s.mode {
            ShapleyMode::Exact => ("exact", None, None),
            ShapleyMode::MonteCarlo { samples, seed } => ("mc", Some(samples), Some(seed)),
        };
        json!({
            "mode": mode,
            "samples": samples,
            "seed": seed,
            "baseline": round6(s.baseline),
            "baseline_exact": s.baseline,
            "full": round6(s.full),
            "full_exact": s.full,
            "residual": s.residual,
            "values": order.iter().map(|&j| json!({
                "feature": schema.name(j),
                "description": schema.description(j),
                "phi": round6(s.values[j]),
                "phi_exact": s.values[j],
                "std_error": s.std_errors[j],
            })).collect::<Vec<_>>(),
        })
    }

    fn explain(&self, body: &Value) -> ApiResult<Value> {
        let id = Self::case_id(body, "id", "query");
        let case = self.parse_case(body.get("case"), &id, "case")?;
        let l = self.model.n_features();
        let seed = body.get("seed").map(|v| v.as_u64().ok_or_else(|| ApiError::bad_request("`seed` must be a non-negative integer"))).transpose()?.unwrap_or(0);
        let samples = body
            .get("samples")
            .map(|v| v.as_u64().filter(|n| *n >= 1).ok_or_else(|| ApiError::bad_request("`samples` must be a positive integer")))
            .transpose()?
            .map_or(DEFAULT_PERMUTATIONS, |n| n as usize);
        let mode = match body.get("mode").map(|m| m.as_str()) {
            None if l <= EXACT_LIMIT => ShapleyMode::Exact,
            None => ShapleyMode::MonteCarlo { samples, seed },
            Some(Some("exact")) => ShapleyMode::Exact,
            Some(Some("mc" | "monte_carlo")) => ShapleyMode::MonteCarlo { samples, seed },
            Some(other) => return Err(ApiError::bad_request(format!("unknown mode {}", other.map_or("(non-string)".into(), |s| format!("`{s}`"))))),
        };
        let ex = self.explainer();
        let report = ex.report(&case, Some(mode), None)?;
        let prediction = self.model.predict_case(&case, false)?;
        let mut out = match self.prediction_json(&prediction) {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        out.insert("shapley".into(), self.shapley_json(report.shapley.as_ref().expect("requested")));
        out.insert("relevance".into(), to_value(&report.relevance));
        out.insert("neighbor_table".into(), to_value(&report.neighbors));
        out.insert("note".into(), Value::String(SUBSET_NOTE.into()));
        Ok(Value::Object(out))
    }

    fn whatif(&self, body: &Value) -> ApiResult<Value> {
        let base = self.parse_case(body.get("base_case"), &Self::case_id(body, "base_id", "base"), "base_case")?;
        let target = self.parse_case(body.get("target_case"), &Self::case_id(body, "target_id", "target"), "target_case")?;
        let ex = self.explainer();
        let ordering = match body.get("ordering") {
            Some(Value::Null) | None => {
                let l = self.model.n_features();
                let s = if l <= EXACT_LIMIT {
                    ex.shapley_exact(&base)?
                } else {
                    ex.shapley_mc(&base, WHATIF_RANKING_PERMUTATIONS, 0)?
                };
                let mut order: Vec<usize> = (0..l).collect();
                order.sort_by(|&a, &b| s.values[b].abs().total_cmp(&s.values[a].abs()).then(a.cmp(&b)));
                order
            }
            Some(v) => self.feature_list(v)?,
        };
        let mut seen = vec![false; self.model.n_features()];
        for &j in &ordering {
            if std::mem::replace(&mut seen[j], true) {
                return Err(ApiError::bad_request(format!("feature `{}` repeated in ordering", self.model.schema.name(j))));
            }
        }
        let t = ex.whatif_accumulate(&base, &target, &ordering)?;
        Ok(json!({
            "base_id": t.base_id,
            "target_id": t.target_id,
            "steps": t.steps.iter().map(|s| json!({
                "feature": s.name,
                "value": s.value,
                "probability": round6(s.probability),
                "probability_exact": s.probability,
            })).collect::<Vec<_>>(),
        }))
    }

    fn curve(&self, key: &str) -> ApiResult<Value> {
        let key = percent_decode(key);
        let j = self
            .model
            .schema
            .position(&key)
            .ok_or_else(|| ApiError { status: 404, message: format!("unknown feature `{key}`") })?;
        let (a, b) = self.model.similarity.exponents(j);
        let points = local_function_curve(&self.model, j, CURVE_POINTS)?;
        Ok(json!({
            "feature": self.model.schema.name(j),
            "description": self.model.schema.description(j),
            "a": a,
            "b": b,
            "points": points.iter().map(|(d, s)| json!({
                "diff": d,
                "similarity": round6(*s),
                "similarity_exact": s,
            })).collect::<Vec<_>>(),
        }))
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Decodes `%XX` escapes in a path segment.
fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(b) = std::str::from_utf8(&bytes[i + 1..i + 3]).map_err(|_| ()).and_then(|h| u8::from_str_radix(h, 16).map_err(|_| ())) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::toy_model;

    fn session(k: usize) -> ApiSession {
        ApiSession::new(toy_model(k), 1)
    }

    #[test]
    fn health_and_routing() {
        let s = session(3);
        let r = s.handle("GET", "/health", b"");
        assert_eq!(r.status, 200);
        assert_eq!(r.body["k"], 3);
        assert_eq!(r.body["features"].as_array().unwrap().len(), 2);
        assert_eq!(s.handle("GET", "/nope", b"").status, 404);
        assert_eq!(s.handle("GET", "/predict", b"").status, 405);
        assert_eq!(s.request_log().len(), 3);
    }

    #[test]
    fn predict_contract() {
        let s = session(1);
        let r = s.handle("POST", "/predict", br#"{"case": {"VAR1": 8.0, "VAR2": 9.0}}"#);
        assert_eq!(r.status, 200, "{}", r.body);
        assert_eq!(r.body["neighbors"][0]["id"], "R3");
        assert_eq!(r.body["neighbors"][0]["similarity_exact"], 1.0);
        assert_eq!(r.body["label"], 1);
        assert_eq!(s.handle("POST", "/predict", b"").status, 400);
        assert_eq!(s.handle("POST", "/predict", br#"{"case": {"VAR9": 1}}"#).status, 400);
        assert_eq!(s.handle("POST", "/predict", br#"{"case": {"VAR1": "abc"}}"#).status, 422);
        assert_eq!(s.handle("POST", "/predict", br#"{"case": {"VAR1": "-", "VAR2": null}}"#).status, 200);
    }

    #[test]
    fn explain_modes() {
        let s = session(3);
        let body = br#"{"case": {"VAR1": 4.0, "VAR2": 6.0}, "mode": "exact"}"#;
        let r = s.handle("POST", "/explain", body);
        assert_eq!(r.status, 200, "{}", r.body);
        assert!(r.body["shapley"]["residual"].as_f64().unwrap().abs() < 1e-9);
        let mc = br#"{"case": {"VAR1": 4.0, "VAR2": 6.0}, "mode": "mc", "samples": 50, "seed": 3}"#;
        assert_eq!(s.handle("POST", "/explain", mc).body, s.handle("POST", "/explain", mc).body);
        assert_eq!(s.handle("POST", "/explain", br#"{"case": {}, "mode": "fast"}"#).status, 400);
    }

    #[test]
    fn whatif_contract() {
        let s = session(3);
        let body = br#"{"base_case": {"VAR1": 1, "VAR2": 1}, "target_case": {"VAR1": 9, "VAR2": 9}, "ordering": []}"#;
        let r = s.handle("POST", "/whatif", body);
        assert_eq!(r.body["steps"].as_array().unwrap().len(), 1);
        let dup = br#"{"base_case": {}, "target_case": {}, "ordering": ["VAR1", "VAR1"]}"#;
        assert_eq!(s.handle("POST", "/whatif", dup).status, 400);
        let full = br#"{"base_case": {"VAR1": 1, "VAR2": 1}, "target_case": {"VAR1": 9, "VAR2": 9}}"#;
        let r = s.handle("POST", "/whatif", full);
        assert_eq!(r.body["steps"].as_array().unwrap().len(), 3);
        let target = s.handle("POST", "/predict", br#"{"case": {"VAR1": 9, "VAR2": 9}}"#);
        assert_eq!(r.body["steps"][2]["probability_exact"], target.body["probability_exact"]);
    }

    #[test]
    fn curves() {
        let s = session(3);
        let r = s.handle("GET", "/curves/VAR1", b"");
        let pts = r.body["points"].as_array().unwrap();
        assert_eq!(pts.len(), CURVE_POINTS);
        assert_eq!(pts[100]["similarity_exact"], 1.0);
        assert_eq!(s.handle("GET", "/curves/VAR99", b"").status, 404);
    }

    #[test]
    fn rounding() {
        assert_eq!(round6(0.123456789), 0.123457);
        assert_eq!(round6(123456789.0), 123457000.0);
        assert_eq!(round6(0.0), 0.0);
        assert_eq!(percent_decode("Net%20income"), "Net income");
    }
}
