//! Corpus representation, tokenization, dataset ingestion, and synthetic
//! clickthrough-corpus generation.
//!
//! Datasets are JSON lines, one query per line:
//! `{"query_id": str, "source": {field: text, ...}, "docs": [{"doc_id": str,
//! "target": {field: text, ...}, "features": [num, ...], "label": num}, ...]}`

mod subword;
mod synthetic;
mod vocab;

pub use subword::{
    SubwordVocabulary, SUB_CLS_ID, SUB_MASK_ID, SUB_PAD_ID, SUB_RESERVED, SUB_UNK_ID,
};
pub use synthetic::{generate_synthetic_corpus, pretraining_sentences, SyntheticCorpus, SyntheticSpec};
pub use vocab::{tokenize_words, WordVocabulary, PAD_ID, UNK_ID, WORD_RESERVED};

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invariant violation for query {query_id}: {rule}")]
    Invariant { query_id: String, rule: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// One named text field of a query or document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldText {
    pub name: String,
    pub text: String,
}

impl FieldText {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        FieldText { name: name.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub target_fields: Vec<FieldText>,
    pub features: Vec<f32>,
    /// Graded relevance in [0, 1]; clickthrough data uses click = 1.
    pub label: f32,
}

impl Document {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.target_fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.text.as_str())
    }
}

/// One query with its source fields, candidate documents, and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingExample {
    pub query_id: String,
    pub source_fields: Vec<FieldText>,
    pub documents: Vec<Document>,
}

impl RankingExample {
    pub fn source(&self, name: &str) -> Option<&str> {
        self.source_fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.text.as_str())
    }

    pub fn labels(&self) -> Vec<f32> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |rule: &str| {
            Err(DataError::Invariant { query_id: self.query_id.clone(), rule: rule.to_string() })
        };
        if self.source_fields.is_empty() {
            return fail("at least one source field required");
        }
        if self.documents.is_empty() {
            return fail("at least one document required");
        }
        for f in &self.source_fields {
            if f.name.is_empty() {
                return fail("source field name must be non-empty");
            }
        }
        let first_names: BTreeSet<&str> = self.documents[0]
            .target_fields
            .iter()
            .map(|f| f.name.as_str())
            .collect();
        let feat_len = self.documents[0].features.len();
        for d in &self.documents {
            for f in &d.target_fields {
                if f.name.is_empty() {
                    return fail("target field name must be non-empty");
                }
            }
            let names: BTreeSet<&str> = d.target_fields.iter().map(|f| f.name.as_str()).collect();
            if names != first_names {
                return fail("all documents must carry the same set of target field names");
            }
            if d.features.len() != feat_len {
                return fail("all documents must carry the same traditional-feature count");
            }
            if d.features.iter().any(|v| !v.is_finite()) {
                return fail("feature values must be finite");
            }
            if !d.label.is_finite() {
                return fail("label must be finite");
            }
            if !(0.0..=1.0).contains(&d.label) {
                return fail("label must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

// Wire structs mirror the JSONL schema; serde_json's preserve_order keeps
// field order stable through round-trips.
#[derive(Serialize, Deserialize)]
struct WireDoc {
    doc_id: String,
    target: serde_json::Map<String, serde_json::Value>,
    features: Vec<f64>,
    label: f64,
}

#[derive(Serialize, Deserialize)]
struct WireExample {
    query_id: String,
    source: serde_json::Map<String, serde_json::Value>,
    docs: Vec<WireDoc>,
}

fn fields_from_map(
    map: &serde_json::Map<String, serde_json::Value>,
    line: usize,
) -> Result<Vec<FieldText>, DataError> {
    map.iter()
        .map(|(k, v)| match v.as_str() {
            Some(s) => Ok(FieldText::new(k.clone(), s)),
            None => Err(DataError::Parse {
                line,
                message: format!("field {k:?} must be a string"),
            }),
        })
        .collect()
}

fn example_from_wire(wire: WireExample, line: usize) -> Result<RankingExample, DataError> {
    let source_fields = fields_from_map(&wire.source, line)?;
    let documents = wire
        .docs
        .into_iter()
        .map(|d| {
            Ok(Document {
                doc_id: d.doc_id,
                target_fields: fields_from_map(&d.target, line)?,
                features: d.features.iter().map(|&v| v as f32).collect(),
                label: d.label as f32,
            })
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let example = RankingExample { query_id: wire.query_id, source_fields, documents };
    example.validate()?;
    Ok(example)
}

fn wire_from_example(ex: &RankingExample) -> WireExample {
    let to_map = |fields: &[FieldText]| {
        fields
            .iter()
            .map(|f| (f.name.clone(), serde_json::Value::String(f.text.clone())))
            .collect()
    };
    WireExample {
        query_id: ex.query_id.clone(),
        source: to_map(&ex.source_fields),
        docs: ex
            .documents
            .iter()
            .map(|d| WireDoc {
                doc_id: d.doc_id.clone(),
                target: to_map(&d.target_fields),
                features: d.features.iter().map(|&v| v as f64).collect(),
                label: d.label as f64,
            })
            .collect(),
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<RankingExample>, DataError> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireExample = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(example_from_wire(wire, i + 1)?);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, examples: &[RankingExample]) -> Result<(), DataError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ex in examples {
        let wire = wire_from_example(ex);
        serde_json::to_writer(&mut f, &wire).map_err(|e| DataError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Every text field of every example, for vocabulary building.
pub fn all_texts(examples: &[RankingExample]) -> Vec<&str> {
    let mut out = Vec::new();
    for ex in examples {
        for f in &ex.source_fields {
            out.push(f.text.as_str());
        }
        for d in &ex.documents {
            for f in &d.target_fields {
                out.push(f.text.as_str());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(query_id: &str) -> RankingExample {
        RankingExample {
            query_id: query_id.to_string(),
            source_fields: vec![FieldText::new("query", "cloud computing")],
            documents: vec![
                Document {
                    doc_id: "d1".into(),
                    target_fields: vec![
                        FieldText::new("title", "cloud engineer"),
                        FieldText::new("body", "works on cloud computing"),
                    ],
                    features: vec![0.5, 1.0],
                    label: 1.0,
                },
                Document {
                    doc_id: "d2".into(),
                    target_fields: vec![
                        FieldText::new("title", "chef"),
                        FieldText::new("body", ""),
                    ],
                    features: vec![-0.25, 2.0],
                    label: 0.0,
                },
            ],
        }
    }

    #[test]
    fn roundtrip_two_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.jsonl");
        let data = vec![example("q1"), example("q2")];
        write_dataset(&p, &data).unwrap();
        let loaded = load_dataset(&p).unwrap();
        assert_eq!(loaded, data);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(load_dataset(&p).unwrap().is_empty());
    }

    #[test]
    fn unequal_feature_counts_rejected() {
        let mut ex = example("q1");
        ex.documents[1].features = vec![1.0];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        // write through the wire structs directly so validation happens on load
        let wire = wire_from_example(&ex);
        std::fs::write(&p, format!("{}\n", serde_json::to_string(&wire).unwrap())).unwrap();
        let err = load_dataset(&p).unwrap_err();
        match err {
            DataError::Invariant { query_id, rule } => {
                assert_eq!(query_id, "q1");
                assert!(rule.contains("feature count"), "{rule}");
            }
            other => panic!("expected invariant error, got {other}"),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&wire_from_example(&example("q1"))).unwrap();
        std::fs::write(&p, format!("{good}\nnot json\n")).unwrap();
        match load_dataset(&p).unwrap_err() {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn mismatched_target_fields_rejected() {
        let mut ex = example("qx");
        ex.documents[1].target_fields = vec![FieldText::new("title", "chef")];
        assert!(matches!(ex.validate(), Err(DataError::Invariant { .. })));
    }

    #[test]
    fn label_out_of_range_rejected() {
        let mut ex = example("qy");
        ex.documents[0].label = 1.5;
        assert!(matches!(ex.validate(), Err(DataError::Invariant { .. })));
    }

    proptest::proptest! {
        #[test]
        fn dataset_roundtrip_property(
            texts in proptest::collection::vec("[a-z ]{0,12}", 4),
            feats in proptest::collection::vec(-100.0f32..100.0, 3),
            label in 0.0f32..=1.0,
        ) {
            let ex = RankingExample {
                query_id: "q".into(),
                source_fields: vec![FieldText::new("query", texts[0].clone())],
                documents: vec![
                    Document {
                        doc_id: "a".into(),
                        target_fields: vec![
                            FieldText::new("title", texts[1].clone()),
                            FieldText::new("body", texts[2].clone()),
                        ],
                        features: feats.clone(),
                        label,
                    },
                    Document {
                        doc_id: "b".into(),
                        target_fields: vec![
                            FieldText::new("title", texts[3].clone()),
                            FieldText::new("body", String::new()),
                        ],
                        features: feats,
                        label: 0.0,
                    },
                ],
            };
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("prop.jsonl");
            write_dataset(&p, std::slice::from_ref(&ex)).unwrap();
            let loaded = load_dataset(&p).unwrap();
            proptest::prop_assert_eq!(loaded, vec![ex]);
        }
    }
}
