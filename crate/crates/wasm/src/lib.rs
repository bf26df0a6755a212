//! WebAssembly bindings for the static demo page in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(err: miniformer::Error) -> JsError {
    JsError::new(&err.to_string())
}

#[wasm_bindgen(js_name = positionalEncoding)]
pub fn positional_encoding(len: usize, d_model: usize) -> Result<Vec<f64>, JsError> {
    demo::positional_encoding_matrix(len, d_model).map_err(js)
}

#[wasm_bindgen]
pub fn score(hyp: &str, reference: &str) -> Result<String, JsError> {
    demo::score_texts(hyp, reference).map_err(js)
}

#[wasm_bindgen]
pub struct Decoded(demo::Decoded);

#[wasm_bindgen]
impl Decoded {
    pub fn source(&self) -> Vec<String> {
        self.0.source.clone()
    }

    pub fn output(&self) -> Vec<String> {
        self.0.output.clone()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }

    pub fn steps(&self) -> usize {
        self.0.steps
    }
}

#[wasm_bindgen]
pub struct CopyModel(demo::CopyModel);

#[wasm_bindgen]
impl CopyModel {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<CopyModel, JsError> {
        demo::CopyModel::new(seed.into()).map(CopyModel).map_err(js)
    }

    #[wasm_bindgen(js_name = trainEpoch)]
    pub fn train_epoch(&mut self) -> Result<f64, JsError> {
        self.0.train_epoch().map_err(js)
    }

    pub fn epochs(&self) -> usize {
        self.0.epochs()
    }

    pub fn words(&self) -> Vec<String> {
        self.0.words()
    }

    pub fn decode(&self, input: &str) -> Result<Decoded, JsError> {
        self.0.decode(input).map(Decoded).map_err(js)
    }
}
