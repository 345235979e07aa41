//! Mapping free-text policy output onto the skill catalog.

use crate::http::{EndpointConfig, HttpError, JsonClient};
use crate::world::{Skill, VERBS};
use indexmap::IndexMap;
use serde_json::json;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Mutex;

pub const UNKNOWN_VERB: &str = "unknown";
const MARKERS: [&str; 2] = ["next skill:", "revised skill:"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAction {
    pub verb: String,
    pub noun_phrase: Vec<String>,
    pub raw: String,
    /// The extracted action line as written, before normalization.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("output could not be parsed into a skill")]
    MalformedOutput,
}

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("skill catalog is empty")]
    EmptyCatalog,
    #[error("similarity provider failed: {0}")]
    Similarity(#[from] HttpError),
}

fn tokens(s: &str) -> Vec<String> {
    s.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Takes the text after the last "Next skill:" (or "Revised skill:") marker,
/// up to the end of that line.
pub fn parse_output(raw: &str) -> Result<ParsedAction, ParseError> {
    let lower = raw.to_lowercase();
    let cut = MARKERS
        .iter()
        .filter_map(|m| lower.rfind(m).map(|i| i + m.len()))
        .max();
    // Lowercasing can change byte offsets for non-ASCII text; fall back to the whole string.
    let tail = match cut {
        Some(i) if lower.len() == raw.len() => &raw[i..],
        _ => raw,
    };
    let line = tail
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let toks = tokens(line);
    let Some(first) = toks.first() else {
        return Err(ParseError::MalformedOutput);
    };
    let verb = if VERBS.contains(&first.as_str()) {
        first.clone()
    } else {
        UNKNOWN_VERB.to_string()
    };
    let noun_phrase = toks[1..].to_vec();
    if verb == UNKNOWN_VERB && noun_phrase.is_empty() {
        // Nothing to match on, e.g. the "none" sentinel.
        return Err(ParseError::MalformedOutput);
    }
    Ok(ParsedAction {
        verb,
        noun_phrase,
        raw: raw.to_string(),
        text: line.to_string(),
    })
}

/// Similarity in [0, 1]; 1 for identical inputs; symmetric.
pub trait SimilarityProvider: Send + Sync {
    fn score(&self, a: &str, b: &str) -> Result<f64, HttpError>;
}

fn normalize_with(synonyms: &IndexMap<String, String>, s: &str) -> Vec<String> {
    tokens(s)
        .into_iter()
        .flat_map(|t| match synonyms.get(&t) {
            Some(c) => tokens(c),
            None => vec![t],
        })
        .collect()
}

fn dice_sets(a: &HashSet<&str>, b: &HashSet<&str>) -> Option<f64> {
    if a.is_empty() && b.is_empty() {
        return None;
    }
    let inter = a.intersection(b).count();
    Some(2.0 * inter as f64 / (a.len() + b.len()) as f64)
}

fn trigrams(s: &str) -> HashMap<[char; 3], usize> {
    let chars: Vec<char> = s.chars().collect();
    let mut m = HashMap::new();
    for w in chars.windows(3) {
        *m.entry([w[0], w[1], w[2]]).or_insert(0) += 1;
    }
    m
}

fn dice_multisets(a: &HashMap<[char; 3], usize>, b: &HashMap<[char; 3], usize>) -> Option<f64> {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    if na + nb == 0 {
        return None;
    }
    let inter: usize = a.iter().map(|(k, &c)| c.min(b.get(k).copied().unwrap_or(0))).sum();
    Some(2.0 * inter as f64 / (na + nb) as f64)
}

/// 0.5 * Dice(word sets) + 0.5 * Dice(character trigram multisets),
/// after lowercasing and synonym normalization.
#[derive(Debug, Clone, Default)]
pub struct LexicalSimilarity {
    pub synonyms: IndexMap<String, String>,
}

impl LexicalSimilarity {
    pub fn new(synonyms: IndexMap<String, String>) -> Self {
        LexicalSimilarity { synonyms }
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        let ta = normalize_with(&self.synonyms, a);
        let tb = normalize_with(&self.synonyms, b);
        let (ja, jb) = (ta.join(" "), tb.join(" "));
        let same = if ja == jb { 1.0 } else { 0.0 };
        let wa: HashSet<&str> = ta.iter().map(String::as_str).collect();
        let wb: HashSet<&str> = tb.iter().map(String::as_str).collect();
        let w = dice_sets(&wa, &wb).unwrap_or(same);
        let c = dice_multisets(&trigrams(&ja), &trigrams(&jb)).unwrap_or(same);
        0.5 * w + 0.5 * c
    }
}

pub fn lexical_similarity(a: &str, b: &str) -> f64 {
    LexicalSimilarity::default().similarity(a, b)
}

impl SimilarityProvider for LexicalSimilarity {
    fn score(&self, a: &str, b: &str) -> Result<f64, HttpError> {
        Ok(self.similarity(a, b))
    }
}

/// Cosine similarity of vectors from an OpenAI-compatible `/embeddings`
/// endpoint, mapped to [0, 1] as (1 + cos) / 2. Vectors are cached per text.
pub struct RemoteEmbedding {
    client: JsonClient,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl RemoteEmbedding {
    pub fn new(config: EndpointConfig) -> Result<Self, HttpError> {
        Ok(RemoteEmbedding {
            client: JsonClient::new(config)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, HttpError> {
        let missing: Vec<&str> = {
            let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            texts.iter().copied().filter(|t| !cache.contains_key(*t)).collect()
        };
        if !missing.is_empty() {
            let body = json!({"model": self.client.config.model, "input": missing});
            let (resp, _) = self.client.post("embeddings", &body)?;
            let data = resp["data"].as_array().cloned().unwrap_or_default();
            if data.len() != missing.len() {
                return Err(HttpError::Exhausted {
                    url: "embeddings".into(),
                    attempts: 1,
                    last: format!("expected {} embeddings, got {}", missing.len(), data.len()),
                });
            }
            let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
            for (i, d) in data.iter().enumerate() {
                let idx = d["index"].as_u64().map(|x| x as usize).unwrap_or(i);
                let v: Vec<f64> = d["embedding"]
                    .as_array()
                    .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                    .unwrap_or_default();
                if let Some(t) = missing.get(idx) {
                    cache.insert(t.to_string(), v);
                }
            }
        }
        let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        Ok(texts.iter().map(|t| cache.get(*t).cloned().unwrap_or_default()).collect())
    }
}

impl SimilarityProvider for RemoteEmbedding {
    fn score(&self, a: &str, b: &str) -> Result<f64, HttpError> {
        if a == b {
            return Ok(1.0);
        }
        let v = self.embed(&[a, b])?;
        let dot: f64 = v[0].iter().zip(&v[1]).map(|(x, y)| x * y).sum();
        let na: f64 = v[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = v[1].iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Ok(0.0);
        }
        Ok(((1.0 + dot / (na * nb)) / 2.0).clamp(0.0, 1.0))
    }
}

/// Noun normalization against a fixed catalog vocabulary.
pub struct Normalizer<'a> {
    synonyms: &'a IndexMap<String, String>,
    vocab: HashSet<String>,
}

impl<'a> Normalizer<'a> {
    pub fn new(catalog: &[Skill], synonyms: &'a IndexMap<String, String>) -> Self {
        let mut vocab = HashSet::new();
        for s in catalog {
            vocab.extend(tokens(&s.description));
            for r in s.preconditions.iter().chain(&s.produces) {
                vocab.extend(tokens(&r.item));
            }
        }
        Normalizer { synonyms, vocab }
    }

    /// Synonym mapping, then plural stripping when the singular is a catalog word.
    pub fn token(&self, t: &str) -> Vec<String> {
        if let Some(c) = self.synonyms.get(t) {
            return tokens(c);
        }
        if !self.vocab.contains(t) {
            if let Some(stem) = t.strip_suffix('s') {
                if self.vocab.contains(stem) {
                    return vec![stem.to_string()];
                }
                if let Some(c) = self.synonyms.get(stem) {
                    return tokens(c);
                }
            }
        }
        vec![t.to_string()]
    }

    pub fn nouns(&self, words: &[String]) -> BTreeSet<String> {
        words.iter().flat_map(|w| self.token(w)).collect()
    }

    pub fn description_nouns(&self, description: &str) -> BTreeSet<String> {
        let toks = tokens(description);
        self.nouns(toks.get(1..).unwrap_or(&[]))
    }
}

/// Noun matching first, similarity second. Returns the catalog index.
pub fn retrieve(
    parsed: &ParsedAction,
    catalog: &[Skill],
    synonyms: &IndexMap<String, String>,
    sim: &dyn SimilarityProvider,
) -> Result<usize, RetrievalError> {
    if catalog.is_empty() {
        return Err(RetrievalError::EmptyCatalog);
    }
    let norm = Normalizer::new(catalog, synonyms);
    let wanted = norm.nouns(&parsed.noun_phrase);
    let candidates: Vec<usize> = (0..catalog.len())
        .filter(|&i| !norm.description_nouns(&catalog[i].description).is_disjoint(&wanted))
        .collect();
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let pool: Vec<usize> = if candidates.is_empty() {
        (0..catalog.len()).collect()
    } else {
        candidates
    };
    let query = tokens(&parsed.text).join(" ");
    let mut best: Option<(f64, usize)> = None;
    for i in pool {
        let s = sim.score(&query, &catalog[i].description)?;
        best = match best {
            None => Some((s, i)),
            Some((bs, bi)) => {
                if s > bs || (s == bs && catalog[i].description < catalog[bi].description) {
                    Some((s, i))
                } else {
                    Some((bs, bi))
                }
            }
        };
    }
    Ok(best.map(|b| b.1).expect("pool is non-empty"))
}
