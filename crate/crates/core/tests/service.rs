use std::collections::BTreeMap;

use acbr::dataset::{fit_scaler, synth_generate, SynthConfig};
use acbr::metrics::Metric;
use acbr::model::TrainingSummary;
use acbr::service::ApiSession;
use acbr::training::{design, TrainingConfig};
use acbr::weighting::ScoringMethod;
use acbr::{Dataset, FeatureSchema, GlobalWeights, LocalParams, SimilarityModel, TrainedModel, Variant};
use serde_json::{json, Value};

fn trained() -> (TrainedModel, Dataset) {
    let mut synth = SynthConfig::asymmetric_benchmark();
    synth.solvent = 80;
    synth.insolvent = 80;
    let data = synth_generate(&synth, 21).unwrap();
    let config = TrainingConfig { methods: vec![ScoringMethod::Anova], swarm: 4, iterations: 3, workers: 2, ..Default::default() };
    (design(&data, Variant::Acbr, &config).unwrap(), data)
}

fn case_body(model: &TrainedModel, features: &[Option<f64>]) -> Value {
    let map: serde_json::Map<String, Value> = features
        .iter()
        .enumerate()
        .map(|(j, v)| (model.schema.name(j).to_string(), v.map_or(Value::Null, Value::from)))
        .collect();
    Value::Object(map)
}

/// Financial-schema model with hand-set exponents; the first feature has
/// a = 2.12 and b = 5.53.
fn financial_model(k: usize) -> TrainedModel {
    let schema = FeatureSchema::financial();
    let l = schema.len();
    let cases = synth_generate(&SynthConfig::new(l, 20, 20, 1.0), 4).unwrap().cases;
    let data = Dataset::new(schema.clone(), cases, "fixture").unwrap();
    let mut a = vec![1.0; l];
    let mut b = vec![1.0; l];
    a[0] = 2.12;
    b[0] = 5.53;
    let similarity = SimilarityModel::acbr(GlobalWeights::uniform(l), LocalParams::new(a, b).unwrap()).unwrap();
    let summary = TrainingSummary {
        metric: Metric::Accuracy,
        folds: 5,
        seed: 0,
        k_scores: vec![],
        ewcbr_score: 0.0,
        candidates: vec![],
        log: vec![],
    };
    TrainedModel::new(schema, fit_scaler(&data).unwrap(), similarity, k, None, 0.0, BTreeMap::new(), None, summary, data.cases)
        .unwrap()
}

#[test]
fn health_reports_schema_and_k() {
    let s = ApiSession::new(financial_model(9), 1);
    let h = s.handle("GET", "/health", b"");
    assert_eq!(h.body["k"], 9);
    assert_eq!(h.body["features"].as_array().unwrap().len(), 28);
    assert_eq!(h.body["features"][15]["description"], "Sales");
}

#[test]
fn curve_fixture() {
    let s = ApiSession::new(financial_model(3), 1);
    let r = s.handle("GET", "/curves/VAR1", b"");
    let points = r.body["points"].as_array().unwrap();
    let at = |i: usize| points[i]["similarity_exact"].as_f64().unwrap();
    assert_eq!(points[100]["diff"], 0.0);
    assert_eq!(at(100), 1.0);
    // reference 0.25 below the query uses a, 0.25 above uses b
    assert!((at(75) - 0.54).abs() < 0.01, "{}", at(75));
    assert!((at(125) - 0.20).abs() < 0.01, "{}", at(125));
    assert_eq!(s.handle("GET", "/curves/Accounts%20payable%20(A.P.)", b"").body["feature"], "VAR15");
    assert_eq!(s.handle("GET", "/curves/VAR29", b"").status, 404);
    let tent = s.handle("GET", "/curves/VAR2", b"");
    assert_eq!(tent.body["points"][75]["similarity_exact"], 0.75);
    assert_eq!(s.handle("GET", "/curves/Inventories", b"").body["feature"], "VAR2");
}

#[test]
fn reference_case_with_one_neighbor() {
    let model = financial_model(1);
    let reference = model.references()[7].clone();
    let s = ApiSession::new(model, 1);
    let body = json!({ "case": case_body(s.model(), &reference.features) }).to_string();
    let r = s.handle("POST", "/predict", body.as_bytes());
    assert_eq!(r.status, 200);
    assert_eq!(r.body["neighbors"][0]["id"], reference.id.as_str());
    // uniform weights of 1/28 sum to one only up to rounding
    assert!((r.body["neighbors"][0]["similarity_exact"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let p = r.body["probability_exact"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
}

#[test]
fn concurrent_requests_match_serial_execution() {
    let (model, data) = trained();
    let session = ApiSession::new(model, 2);
    let requests: Vec<(&str, String, String)> = data
        .cases
        .iter()
        .take(24)
        .enumerate()
        .map(|(i, c)| {
            let case = case_body(session.model(), &c.features);
            match i % 4 {
                0 => ("POST", "/predict".to_string(), json!({ "case": case }).to_string()),
                1 => ("POST", "/explain".to_string(), json!({ "case": case, "mode": "mc", "samples": 200, "seed": i }).to_string()),
                2 => {
                    let target = case_body(session.model(), &data.cases[i + 40].features);
                    ("POST", "/whatif".to_string(), json!({ "base_case": case, "target_case": target }).to_string())
                }
                _ => ("GET", format!("/curves/VAR{}", i % 8 + 1), String::new()),
            }
        })
        .collect();
    let serial: Vec<_> = requests.iter().map(|(m, p, b)| session.handle(m, p, b.as_bytes())).collect();
    let concurrent: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = requests
            .iter()
            .rev()
            .map(|(m, p, b)| scope.spawn(|| session.handle(m, p, b.as_bytes())))
            .collect();
        let mut out: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        out.reverse();
        out
    });
    assert!(serial.iter().all(|r| r.status == 200));
    assert_eq!(serial, concurrent);
}

#[test]
fn explain_monte_carlo_agrees_with_exact() {
    let (model, data) = trained();
    let session = ApiSession::new(model, 2);
    let case = case_body(session.model(), &data.cases[3].features);
    let exact = session.handle("POST", "/explain", json!({ "case": case, "mode": "exact" }).to_string().as_bytes());
    let mc = session.handle("POST", "/explain", json!({ "case": case, "mode": "mc", "samples": 4000, "seed": 1 }).to_string().as_bytes());
    let by_feature = |r: &Value| -> BTreeMap<String, (f64, f64)> {
        r["shapley"]["values"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| (v["feature"].as_str().unwrap().to_string(), (v["phi_exact"].as_f64().unwrap(), v["std_error"].as_f64().unwrap())))
            .collect()
    };
    let (e, m) = (by_feature(&exact.body), by_feature(&mc.body));
    assert_eq!(e.len(), 8);
    for (feature, (phi, _)) in &e {
        let (est, se) = m[feature];
        assert!((est - phi).abs() <= 3.0 * se + 1e-12, "{feature}: {est} vs {phi} (se {se})");
    }
}

#[test]
fn saved_model_serves_identical_answers() {
    let (model, data) = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = TrainedModel::load(&path).unwrap();
    assert_eq!(loaded.to_json().unwrap(), model.to_json().unwrap());
    for c in data.cases.iter().take(20) {
        assert_eq!(loaded.predict_proba(c).unwrap().to_bits(), model.predict_proba(c).unwrap().to_bits());
    }
}
