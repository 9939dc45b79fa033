use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    fit_linear, fit_standardizer, fit_svr, fit_tree, LinearModel, Matrix, MlError, Standardizer,
    SvrHyper, SvrModel, TreeHyper, TreeModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Re,
    Im,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Re, Target::Im];

    pub fn name(self) -> &'static str {
        match self {
            Target::Re => "re",
            Target::Im => "im",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Lr,
    Svr,
    Dtr,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Lr, ModelFamily::Svr, ModelFamily::Dtr];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Lr => "lr",
            ModelFamily::Svr => "svr",
            ModelFamily::Dtr => "dtr",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" => Ok(ModelFamily::Lr),
            "svr" => Ok(ModelFamily::Svr),
            "dtr" => Ok(ModelFamily::Dtr),
            other => Err(format!(
                "unknown model family '{other}' (expected lr, svr or dtr)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub svr: SvrHyper,
    pub tree: TreeHyper,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Svr(SvrModel),
    Tree(TreeModel),
}

impl Model {
    pub fn family(&self) -> ModelFamily {
        match self {
            Model::Linear(_) => ModelFamily::Lr,
            Model::Svr(_) => ModelFamily::Svr,
            Model::Tree(_) => ModelFamily::Dtr,
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => m.predict_row(x),
            Model::Svr(m) => m.predict_row(x),
            Model::Tree(m) => m.predict_row(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMeta {
    pub n_train: usize,
    pub n_features: usize,
    pub dropped_features: Vec<usize>,
    pub rank_deficient: bool,
    pub svr_iterations: Option<usize>,
    pub svr_kkt_violation: Option<f64>,
    pub support_vectors: Option<usize>,
    pub tree_leaves: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPredictor {
    pub target: Target,
    pub standardizer: Standardizer,
    pub model: Model,
    pub hyper: Hyper,
    pub train_meta: TrainMeta,
}

pub fn fit_predictor(
    family: ModelFamily,
    target: Target,
    x_raw: &Matrix,
    y: &[f64],
    hyper: &Hyper,
) -> Result<TrainedPredictor, MlError> {
    let standardizer = fit_standardizer(x_raw)?;
    let x = standardizer.transform(x_raw)?;
    let mut meta = TrainMeta {
        n_train: x.rows(),
        n_features: x.cols(),
        dropped_features: standardizer.dropped(),
        rank_deficient: false,
        svr_iterations: None,
        svr_kkt_violation: None,
        support_vectors: None,
        tree_leaves: None,
    };
    let model = match family {
        ModelFamily::Lr => {
            let m = fit_linear(&x, y)?;
            meta.rank_deficient = m.rank_deficient;
            Model::Linear(m)
        }
        ModelFamily::Svr => {
            let m = fit_svr(&x, y, &hyper.svr)?;
            meta.svr_iterations = Some(m.iterations);
            meta.svr_kkt_violation = Some(m.kkt_violation);
            meta.support_vectors = Some(m.dual_coeffs.len());
            Model::Svr(m)
        }
        ModelFamily::Dtr => {
            let m = fit_tree(&x, y, &hyper.tree)?;
            meta.tree_leaves = Some(m.leaf_count());
            Model::Tree(m)
        }
    };
    Ok(TrainedPredictor {
        target,
        standardizer,
        model,
        hyper: *hyper,
        train_meta: meta,
    })
}

pub fn predict(p: &TrainedPredictor, x_raw: &Matrix) -> Result<Vec<f64>, MlError> {
    let x = p.standardizer.transform(x_raw)?;
    Ok(x.iter_rows().map(|r| p.model.predict_row(r)).collect())
}

impl TrainedPredictor {
    pub fn family(&self) -> ModelFamily {
        self.model.family()
    }

    pub fn to_value(&self) -> Result<Value, MlError> {
        let (kind, parameters, hyper) = match &self.model {
            Model::Linear(m) => ("lr", serde_json::to_value(m)?, Value::Null),
            Model::Svr(m) => (
                "svr",
                serde_json::to_value(m)?,
                serde_json::to_value(self.hyper.svr)?,
            ),
            Model::Tree(m) => (
                "dtr",
                serde_json::to_value(m)?,
                serde_json::to_value(self.hyper.tree)?,
            ),
        };
        Ok(json!({
            "type": kind,
            "target": self.target,
            "standardizer": self.standardizer,
            "parameters": parameters,
            "hyper": hyper,
            "train_meta": self.train_meta,
        }))
    }

    pub fn to_json(&self) -> Result<String, MlError> {
        let mut s = serde_json::to_string_pretty(&self.to_value()?)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, MlError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            #[serde(rename = "type")]
            kind: ModelFamily,
            target: Target,
            standardizer: Standardizer,
            parameters: Value,
            hyper: Value,
            train_meta: TrainMeta,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let mut hyper = Hyper::default();
        let model = match doc.kind {
            ModelFamily::Lr => Model::Linear(serde_json::from_value(doc.parameters)?),
            ModelFamily::Svr => {
                hyper.svr = serde_json::from_value(doc.hyper)?;
                Model::Svr(serde_json::from_value(doc.parameters)?)
            }
            ModelFamily::Dtr => {
                hyper.tree = serde_json::from_value(doc.hyper)?;
                Model::Tree(serde_json::from_value(doc.parameters)?)
            }
        };
        let expected = doc.standardizer.n_features();
        let got = match &model {
            Model::Linear(m) => m.weights.len(),
            Model::Svr(m) => m.support_vectors.first().map_or(expected, |v| v.len()),
            Model::Tree(m) => m
                .nodes
                .iter()
                .filter_map(|n| match n {
                    super::Node::Split { feature, .. } => Some(feature + 1),
                    _ => None,
                })
                .max()
                .map_or(expected, |f| f.max(expected)),
        };
        if got != expected {
            return Err(MlError::Dimension { expected, got });
        }
        Ok(Self {
            target: doc.target,
            standardizer: doc.standardizer,
            model,
            hyper,
            train_meta: doc.train_meta,
        })
    }
}
