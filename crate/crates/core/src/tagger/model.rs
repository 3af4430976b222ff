use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureTemplate};
use super::inference::Lattice;
use super::TaggerError;
use crate::corpus::Tag;

const MODEL_FORMAT: &str = "cemine-crf";
const MODEL_VERSION: u32 = 1;
pub(crate) const LABELS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaggerMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epoch_losses: Vec<f64>,
}

/// Linear-chain CRF over the label order `[C, E, O]`.
///
/// Emission weights are stored per feature string as a 3-vector indexed by
/// label; features unseen at training time contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    templates: Vec<FeatureTemplate>,
    features: IndexMap<String, usize>,
    pub(crate) emission: Vec<[f64; LABELS]>,
    /// `transition[from][to]`.
    pub transition: [[f64; LABELS]; LABELS],
    pub start: [f64; LABELS],
    pub stop: [f64; LABELS],
    pub metadata: TaggerMetadata,
}

impl CrfModel {
    /// An all-zero model with an empty feature table.
    pub fn new(templates: Vec<FeatureTemplate>) -> Self {
        Self {
            templates,
            features: IndexMap::new(),
            emission: Vec::new(),
            transition: [[0.0; LABELS]; LABELS],
            start: [0.0; LABELS],
            stop: [0.0; LABELS],
            metadata: TaggerMetadata::default(),
        }
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.keys().map(String::as_str)
    }

    pub(crate) fn feature_id(&self, name: &str) -> Option<usize> {
        self.features.get(name).copied()
    }

    /// Registers `name` (if new) and returns its row.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.features.get(name) {
            return id;
        }
        let id = self.features.len();
        self.features.insert(name.to_owned(), id);
        self.emission.push([0.0; LABELS]);
        id
    }

    pub fn weight(&self, feature: &str, tag: Tag) -> f64 {
        self.feature_id(feature)
            .map(|id| self.emission[id][tag.index()])
            .unwrap_or(0.0)
    }

    pub fn set_weight(&mut self, feature: &str, tag: Tag, value: f64) {
        let id = self.intern(feature);
        self.emission[id][tag.index()] = value;
    }

    pub fn set_transition(&mut self, from: Tag, to: Tag, value: f64) {
        self.transition[from.index()][to.index()] = value;
    }

    /// Known feature rows active at each position of `tokens`.
    pub fn feature_ids(&self, tokens: &[String]) -> Vec<Vec<usize>> {
        extract_features(&self.templates, tokens)
            .into_iter()
            .map(|fs| fs.iter().filter_map(|f| self.feature_id(f)).collect())
            .collect()
    }

    pub(crate) fn lattice_from_ids(&self, ids: &[Vec<usize>]) -> Lattice {
        let emissions = ids
            .iter()
            .map(|row| {
                let mut e = [0.0; LABELS];
                for &id in row {
                    for (acc, w) in e.iter_mut().zip(&self.emission[id]) {
                        *acc += w;
                    }
                }
                e
            })
            .collect();
        Lattice {
            emissions,
            transition: self.transition,
            start: self.start,
            stop: self.stop,
        }
    }

    /// Score lattice of `tokens` under this model.
    pub fn lattice(&self, tokens: &[String]) -> Lattice {
        self.lattice_from_ids(&self.feature_ids(tokens))
    }

    /// Number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.emission.len() * LABELS + LABELS * LABELS + 2 * LABELS
    }

    /// Parameters in a fixed order: emission rows, transition rows, start, stop.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend(self.emission.iter().flatten());
        out.extend(self.transition.iter().flatten());
        out.extend(self.start);
        out.extend(self.stop);
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count(), "parameter vector length");
        let mut it = params.iter().copied();
        for row in &mut self.emission {
            for w in row {
                *w = it.next().unwrap();
            }
        }
        for row in &mut self.transition {
            for w in row {
                *w = it.next().unwrap();
            }
        }
        for w in self.start.iter_mut().chain(self.stop.iter_mut()) {
            *w = it.next().unwrap();
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.parameters().iter().map(|w| w * w).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            labels: Tag::ALL.to_vec(),
            templates: self.templates.clone(),
            features: self.features.keys().cloned().collect(),
            emission: self.emission.clone(),
            transition: self.transition,
            start: self.start,
            stop: self.stop,
            metadata: self.metadata.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TaggerError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(TaggerError::BadModelFile(format!("{} v{}", file.format, file.version)));
        }
        if file.labels != Tag::ALL {
            return Err(TaggerError::BadModelFile("label order must be C, E, O".into()));
        }
        if file.features.len() != file.emission.len() {
            return Err(TaggerError::BadModelFile("feature table and emission rows differ in length".into()));
        }
        let features: IndexMap<String, usize> = file
            .features
            .into_iter()
            .enumerate()
            .map(|(i, f)| (f, i))
            .collect();
        if features.len() != file.emission.len() {
            return Err(TaggerError::BadModelFile("duplicate feature names".into()));
        }
        let model = Self {
            templates: file.templates,
            features,
            emission: file.emission,
            transition: file.transition,
            start: file.start,
            stop: file.stop,
            metadata: file.metadata,
        };
        if model.parameters().iter().any(|w| !w.is_finite()) {
            return Err(TaggerError::BadModelFile("non-finite weight".into()));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    labels: Vec<Tag>,
    templates: Vec<FeatureTemplate>,
    features: Vec<String>,
    emission: Vec<[f64; LABELS]>,
    transition: [[f64; LABELS]; LABELS],
    start: [f64; LABELS],
    stop: [f64; LABELS],
    metadata: TaggerMetadata,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_round_trip() {
        let mut m = CrfModel::new(FeatureTemplate::default_set());
        m.set_weight("bias", Tag::E, 1.5);
        m.set_weight("lw=radar", Tag::C, -2.0);
        m.set_transition(Tag::C, Tag::E, 0.25);
        m.start[2] = 3.0;
        m.stop[0] = -1.0;
        let p = m.parameters();
        assert_eq!(p.len(), m.parameter_count());
        let mut other = m.clone();
        other.set_parameters(&vec![0.0; p.len()]);
        other.set_parameters(&p);
        assert_eq!(other, m);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut m = CrfModel::new(FeatureTemplate::default_set());
        m.set_weight("bias", Tag::O, 0.1);
        m.set_transition(Tag::E, Tag::E, 0.7);
        let text = m.to_json();
        assert_eq!(CrfModel::from_json(&text).unwrap(), m);
        let relabeled = text.replace("[\"C\",\"E\",\"O\"]", "[\"O\",\"E\",\"C\"]");
        assert!(matches!(CrfModel::from_json(&relabeled), Err(TaggerError::BadModelFile(_))));
    }

    #[test]
    fn unknown_features_contribute_nothing() {
        let mut m = CrfModel::new(vec![FeatureTemplate::Lower]);
        m.set_weight("lw=radar", Tag::C, 2.0);
        let lattice = m.lattice(&["radar".to_string(), "unseen".to_string()]);
        assert_eq!(lattice.emissions, vec![[2.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
    }
}
