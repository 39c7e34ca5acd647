//! Deterministic synthetic clickthrough corpus.
//!
//! The generator builds a topic-partitioned vocabulary of pronounceable
//! words. Each query samples Zipf-distributed words from one topic; its
//! clicked document embeds the query verbatim (strictly maximal query-term
//! overlap) plus on-topic filler, while distractors carry at most one query
//! word scattered into mostly off-topic filler. With probability `noise` the
//! click is reassigned to a random distractor. Feature 0 correlates with the
//! click; the remaining features are noise at wildly different scales.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Document, FieldText, RankingExample};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub vocab_size: usize,
    pub num_topics: usize,
    pub train_queries: usize,
    pub dev_queries: usize,
    pub test_queries: usize,
    pub docs_per_query: usize,
    pub source_fields: usize,
    pub target_fields: usize,
    pub num_features: usize,
    pub noise: f64,
    pub query_len: usize,
    pub field_len: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            vocab_size: 1200,
            num_topics: 12,
            train_queries: 2000,
            dev_queries: 400,
            test_queries: 400,
            docs_per_query: 10,
            source_fields: 1,
            target_fields: 2,
            num_features: 4,
            noise: 0.1,
            query_len: 3,
            field_len: 9,
        }
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn syllable(i: usize) -> String {
    let c = CONSONANTS[i / VOWELS.len()] as char;
    let v = VOWELS[i % VOWELS.len()] as char;
    format!("{c}{v}")
}

/// Deterministic pronounceable word list; index i < 70^3 maps to a unique
/// two- or three-syllable word.
pub fn synthetic_word(i: usize) -> String {
    let n = CONSONANTS.len() * VOWELS.len(); // 70 syllables
    if i < n * n {
        format!("{}{}", syllable(i / n), syllable(i % n))
    } else {
        let j = i - n * n;
        format!("{}{}{}", syllable(j / (n * n)), syllable((j / n) % n), syllable(j % n))
    }
}

pub const SOURCE_FIELD_POOL: &[&str] = &["query", "context", "profile", "headline"];
pub const TARGET_FIELD_POOL: &[&str] = &["title", "body", "summary", "detail"];

pub fn source_field_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            SOURCE_FIELD_POOL
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("source{i}"))
        })
        .collect()
}

pub fn target_field_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            TARGET_FIELD_POOL
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("target{i}"))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub train: Vec<RankingExample>,
    pub dev: Vec<RankingExample>,
    pub test: Vec<RankingExample>,
}

struct TopicSampler {
    /// word indices per topic, plus cumulative Zipf weights
    topics: Vec<(Vec<usize>, Vec<f64>)>,
}

impl TopicSampler {
    fn new(vocab_size: usize, num_topics: usize) -> Self {
        let mut topics = vec![(Vec::new(), Vec::new()); num_topics];
        for w in 0..vocab_size {
            let t = w * num_topics / vocab_size;
            topics[t].0.push(w);
        }
        for (words, cum) in topics.iter_mut() {
            let mut acc = 0.0;
            for r in 0..words.len() {
                acc += 1.0 / ((r + 1) as f64).powf(1.1);
                cum.push(acc);
            }
        }
        TopicSampler { topics }
    }

    fn sample(&self, topic: usize, rng: &mut ChaCha8Rng) -> usize {
        let (words, cum) = &self.topics[topic];
        let total = *cum.last().unwrap();
        let u = rng.gen::<f64>() * total;
        let idx = cum.partition_point(|&c| c < u).min(words.len() - 1);
        words[idx]
    }

    /// Sample avoiding the given word indices.
    fn sample_excluding(&self, topic: usize, exclude: &[usize], rng: &mut ChaCha8Rng) -> usize {
        for _ in 0..64 {
            let w = self.sample(topic, rng);
            if !exclude.contains(&w) {
                return w;
            }
        }
        // topic nearly covered by exclusions; fall back to a linear scan
        self.topics[topic]
            .0
            .iter()
            .copied()
            .find(|w| !exclude.contains(w))
            .unwrap_or_else(|| self.topics[topic].0[0])
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn validate(spec: &SyntheticSpec) -> Result<(), DataError> {
    let bad = |m: &str| Err(DataError::InvalidSpec(m.to_string()));
    if spec.vocab_size == 0 || spec.num_topics == 0 {
        return bad("vocab_size and num_topics must be positive");
    }
    if spec.vocab_size < spec.num_topics {
        return bad("vocab_size must be at least num_topics");
    }
    if spec.vocab_size > 343_000 {
        return bad("vocab_size exceeds the generated word list");
    }
    if spec.docs_per_query == 0 {
        return bad("docs_per_query must be positive");
    }
    if spec.source_fields == 0 || spec.target_fields == 0 {
        return bad("field counts must be positive");
    }
    if spec.num_features == 0 {
        return bad("num_features must be positive");
    }
    if spec.query_len == 0 || spec.field_len == 0 {
        return bad("query_len and field_len must be positive");
    }
    if !(0.0..1.0).contains(&spec.noise) {
        return bad("noise must lie in [0, 1)");
    }
    if spec.query_len > spec.vocab_size / spec.num_topics {
        return bad("query_len exceeds words available per topic");
    }
    Ok(())
}

fn feature_vector(label: f32, count: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    // (offset, scale) cycle; index 0 is the label-correlated feature
    const NOISE_PARAMS: &[(f64, f64)] = &[(0.0, 1.0), (1000.0, 300.0), (-2500.0, 5000.0), (0.5, 0.01)];
    (0..count)
        .map(|i| {
            if i == 0 {
                (2.0 * label as f64 + normal(rng)) as f32
            } else {
                let (off, scale) = NOISE_PARAMS[(i - 1) % NOISE_PARAMS.len()];
                (off + scale * normal(rng)) as f32
            }
        })
        .collect()
}

fn generate_split(
    spec: &SyntheticSpec,
    sampler: &TopicSampler,
    prefix: &str,
    queries: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<RankingExample> {
    let src_names = source_field_names(spec.source_fields);
    let tgt_names = target_field_names(spec.target_fields);
    let mut out = Vec::with_capacity(queries);

    for qi in 0..queries {
        let topic = rng.gen_range(0..spec.num_topics);
        let mut query_words: Vec<usize> = Vec::with_capacity(spec.query_len);
        while query_words.len() < spec.query_len {
            let w = sampler.sample_excluding(topic, &query_words, rng);
            query_words.push(w);
        }
        let query_text = query_words
            .iter()
            .map(|&w| synthetic_word(w))
            .collect::<Vec<_>>()
            .join(" ");

        // every source field repeats the query intent; extra fields add filler
        let source_fields: Vec<FieldText> = src_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                if i == 0 {
                    FieldText::new(name.clone(), query_text.clone())
                } else {
                    let extra: Vec<String> = (0..3)
                        .map(|_| synthetic_word(sampler.sample(topic, rng)))
                        .collect();
                    FieldText::new(name.clone(), extra.join(" "))
                }
            })
            .collect();

        // relevant document: query embedded verbatim in one field
        let query_field = rng.gen_range(0..spec.target_fields);
        let relevant_fields: Vec<FieldText> = tgt_names
            .iter()
            .enumerate()
            .map(|(fi, name)| {
                if fi == query_field {
                    let filler = spec.field_len.saturating_sub(spec.query_len);
                    let before = rng.gen_range(0..=filler);
                    let mut words: Vec<String> = (0..before)
                        .map(|_| synthetic_word(sampler.sample(topic, rng)))
                        .collect();
                    words.extend(query_words.iter().map(|&w| synthetic_word(w)));
                    words.extend(
                        (0..filler - before).map(|_| synthetic_word(sampler.sample(topic, rng))),
                    );
                    FieldText::new(name.clone(), words.join(" "))
                } else {
                    let words: Vec<String> = (0..spec.field_len)
                        .map(|_| synthetic_word(sampler.sample(topic, rng)))
                        .collect();
                    FieldText::new(name.clone(), words.join(" "))
                }
            })
            .collect();

        // distractors: off-topic filler, at most one scattered query word
        let mut docs_fields: Vec<Vec<FieldText>> = vec![relevant_fields];
        for _ in 1..spec.docs_per_query {
            let d_topic = rng.gen_range(0..spec.num_topics);
            let overlap = if spec.query_len >= 2 && rng.gen_bool(0.4) { 1 } else { 0 };
            let mut fields: Vec<FieldText> = tgt_names
                .iter()
                .map(|name| {
                    let words: Vec<String> = (0..spec.field_len)
                        .map(|_| {
                            synthetic_word(sampler.sample_excluding(d_topic, &query_words, rng))
                        })
                        .collect();
                    FieldText::new(name.clone(), words.join(" "))
                })
                .collect();
            for _ in 0..overlap {
                let w = query_words[rng.gen_range(0..query_words.len())];
                let fi = rng.gen_range(0..fields.len());
                let mut words: Vec<&str> = fields[fi].text.split(' ').collect();
                let word = synthetic_word(w);
                let pos = rng.gen_range(0..=words.len());
                words.insert(pos, &word);
                fields[fi].text = words.join(" ");
            }
            docs_fields.push(fields);
        }

        // relevant doc is index 0 before the shuffle; pick the click, then
        // shuffle positions so order never leaks the label
        let clicked_doc = if docs_fields.len() == 1 || !rng.gen_bool(spec.noise) {
            0
        } else {
            rng.gen_range(1..docs_fields.len())
        };
        let mut order: Vec<usize> = (0..docs_fields.len()).collect();
        order.shuffle(rng);

        let mut documents = Vec::with_capacity(docs_fields.len());
        for (pos, &orig) in order.iter().enumerate() {
            let label = if orig == clicked_doc { 1.0 } else { 0.0 };
            documents.push(Document {
                doc_id: format!("{prefix}-q{qi}-d{pos}"),
                target_fields: docs_fields[orig].clone(),
                features: feature_vector(label, spec.num_features, rng),
                label,
            });
        }

        out.push(RankingExample {
            query_id: format!("{prefix}-q{qi}"),
            source_fields,
            documents,
        });
    }
    out
}

/// Deterministic given the seed; each query has exactly one clicked document.
pub fn generate_synthetic_corpus(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<SyntheticCorpus, DataError> {
    validate(spec)?;
    let sampler = TopicSampler::new(spec.vocab_size, spec.num_topics);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = generate_split(spec, &sampler, "tr", spec.train_queries, &mut rng);
    let dev = generate_split(spec, &sampler, "dv", spec.dev_queries, &mut rng);
    let test = generate_split(spec, &sampler, "te", spec.test_queries, &mut rng);
    Ok(SyntheticCorpus { train, dev, test })
}

/// Topic-coherent sentences over the same vocabulary distribution, for
/// masked-language-model pretraining.
pub fn pretraining_sentences(spec: &SyntheticSpec, count: usize, seed: u64) -> Vec<String> {
    let sampler = TopicSampler::new(spec.vocab_size, spec.num_topics);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let topic = rng.gen_range(0..spec.num_topics);
            let len = rng.gen_range(6..=12);
            (0..len)
                .map(|_| synthetic_word(sampler.sample(topic, &mut rng)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
