//! WebAssembly front end for `www/index.html`.
//!
//! The page trains a small model on synthetic data when it loads, then
//! drives three panels: a local similarity curve explorer, prediction with
//! Shapley attributions for an editable case, and a what-if trajectory
//! between two reference cases. Requests go through the same
//! [`ApiSession`] that backs the HTTP server, so responses have the server's
//! JSON shape.

use acbr::dataset::{synth_generate, SynthConfig};
use acbr::retrieval::default_k_grid;
use acbr::service::ApiSession;
use acbr::similarity::local_sim_asym;
use acbr::training::{design, TrainingConfig};
use acbr::weighting::ScoringMethod;
use acbr::{TrainedModel, Variant};
use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::*;

/// Similarity at `points` evenly spaced differences `c - q` in `[-1, 1]`
/// for exponents `a` (reference below the query) and `b` (above).
#[wasm_bindgen]
pub fn similarity_curve(a: f64, b: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let diff = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            local_sim_asym(0.0, diff, a, b, 1.0)
        })
        .collect()
}

/// Settings for the model trained in the browser: four skewed features, a
/// short exponent search and no parallelism.
pub fn demo_config(seed: u64) -> TrainingConfig {
    TrainingConfig {
        methods: vec![ScoringMethod::Anova],
        swarm: 8,
        iterations: 8,
        k_grid: default_k_grid().into_iter().filter(|&k| k <= 15).collect(),
        seed,
        workers: 1,
        ..TrainingConfig::default()
    }
}

pub fn demo_model(seed: u64) -> acbr::Result<TrainedModel> {
    let mut synth = SynthConfig::asymmetric_benchmark();
    synth.solvent = 120;
    synth.insolvent = 120;
    synth.skew.truncate(4);
    synth.coefficients.truncate(4);
    let data = synth_generate(&synth, seed)?;
    design(&data, Variant::Acbr, &demo_config(seed))
}

#[wasm_bindgen]
pub struct DemoEngine {
    session: ApiSession,
}

#[wasm_bindgen]
impl DemoEngine {
    /// Trains the demo model.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<DemoEngine, String> {
        demo_model(u64::from(seed)).map(DemoEngine::with_model).map_err(|e| e.to_string())
    }

    /// Loads a model file produced by `acbr train`.
    pub fn from_model_json(json: &str) -> Result<DemoEngine, String> {
        TrainedModel::from_json(json).map(DemoEngine::with_model).map_err(|e| e.to_string())
    }

    pub fn health(&self) -> String {
        self.session.health().to_string()
    }

    pub fn reference_count(&self) -> usize {
        self.session.model().references().len()
    }

    /// Reference case `index` as `{id, label, case: {feature: value}}`.
    pub fn reference(&self, index: usize) -> String {
        let model = self.session.model();
        let Some(case) = model.references().get(index) else {
            return Value::Null.to_string();
        };
        let features: Map<String, Value> = case
            .features
            .iter()
            .enumerate()
            .map(|(j, v)| (model.schema.name(j).to_string(), v.map_or(Value::Null, Value::from)))
            .collect();
        json!({ "id": case.id, "label": case.label.map(|l| l.as_u8()), "case": features }).to_string()
    }

    /// `POST /predict`; returns `{status, body}`.
    pub fn predict(&self, request: &str) -> String {
        self.call("POST", "/predict", request)
    }

    /// `POST /explain`; returns `{status, body}`.
    pub fn explain(&self, request: &str) -> String {
        self.call("POST", "/explain", request)
    }

    /// `POST /whatif`; returns `{status, body}`.
    pub fn whatif(&self, request: &str) -> String {
        self.call("POST", "/whatif", request)
    }
}

impl DemoEngine {
    pub fn with_model(model: TrainedModel) -> Self {
        DemoEngine { session: ApiSession::new(model, 1) }
    }

    pub fn session(&self) -> &ApiSession {
        &self.session
    }

    fn call(&self, method: &str, path: &str, request: &str) -> String {
        let r = self.session.handle(method, path, request.as_bytes());
        json!({ "status": r.status, "body": r.body }).to_string()
    }
}
