//! Claims, FEVER-format ingestion, and synthetic fact worlds.
//!
//! A synthetic world is a table mapping every `(entity, relation)` pair to
//! exactly one true object. Entities are grouped into classes; members of a
//! class share a name stem and share their true object for each relation, so
//! the set of true claims has regular structure that held-out truths follow
//! and object-slot corruptions break.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TEMPLATE: &str = "{s} {r} {o}.";

#[derive(Debug, Error)]
pub enum ClaimError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate claim id `{0}`")]
    DuplicateId(String),
    #[error("no usable claims (skipped {skipped} lines)")]
    NoUsableClaims { skipped: usize },
    #[error("claim `{id}` has empty text")]
    EmptyText { id: String },
    #[error("invalid template `{template}`: {reason}")]
    Template { template: String, reason: String },
    #[error("invalid world config: {0}")]
    InvalidWorld(String),
    #[error("claim `{0}` has no triple annotation")]
    MissingTriple(String),
    #[error("no alternative object for relation `{0}`")]
    NoAlternative(String),
    #[error("max_per_label must be positive")]
    ZeroSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "SUPPORTS")]
    Supported,
    #[serde(rename = "REFUTES")]
    Refuted,
}

impl Label {
    pub fn as_fever(self) -> &'static str {
        match self {
            Label::Supported => "SUPPORTS",
            Label::Refuted => "REFUTES",
        }
    }

    pub fn is_supported(self) -> bool {
        self == Label::Supported
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_fever())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
    pub triple: Option<Triple>,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Result<Self, ClaimError> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ClaimError::EmptyText { id });
        }
        Ok(Self {
            id,
            text,
            label,
            triple: None,
        })
    }

    pub fn with_triple(mut self, triple: Triple) -> Self {
        self.triple = Some(triple);
        self
    }
}

/// Slot-template for single-token `{s} {r} {o}` sentences.
#[derive(Debug, Clone)]
pub struct Template {
    raw: String,
    pattern: Regex,
    // capture group index (1-based) for subject, relation, object
    groups: [usize; 3],
}

impl Template {
    pub fn new(raw: &str) -> Result<Self, ClaimError> {
        let err = |reason: &str| ClaimError::Template {
            template: raw.to_string(),
            reason: reason.to_string(),
        };
        let mut positions = Vec::with_capacity(3);
        for slot in ["{s}", "{r}", "{o}"] {
            let found: Vec<_> = raw.match_indices(slot).collect();
            match found.len() {
                0 => return Err(err(&format!("missing slot {slot}"))),
                1 => positions.push((found[0].0, slot)),
                _ => return Err(err(&format!("slot {slot} appears more than once"))),
            }
        }
        positions.sort_by_key(|(pos, _)| *pos);

        let mut pattern = String::from("^");
        let mut groups = [0usize; 3];
        let mut cursor = 0;
        for (group, (pos, slot)) in positions.iter().enumerate() {
            pattern.push_str(&regex::escape(&raw[cursor..*pos]));
            pattern.push_str(r"(\S+)");
            let which = match *slot {
                "{s}" => 0,
                "{r}" => 1,
                _ => 2,
            };
            groups[which] = group + 1;
            cursor = pos + slot.len();
        }
        pattern.push_str(&regex::escape(&raw[cursor..]));
        pattern.push('$');
        let pattern = Regex::new(&pattern).map_err(|e| err(&e.to_string()))?;
        Ok(Self {
            raw: raw.to_string(),
            pattern,
            groups,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn render(&self, triple: &Triple) -> String {
        self.raw
            .replace("{s}", &triple.subject)
            .replace("{r}", &triple.relation)
            .replace("{o}", &triple.object)
    }

    pub fn parse(&self, text: &str) -> Option<Triple> {
        let caps = self.pattern.captures(text.trim())?;
        let get = |i: usize| caps.get(self.groups[i]).map(|m| m.as_str().to_string());
        Some(Triple {
            subject: get(0)?,
            relation: get(1)?,
            object: get(2)?,
        })
    }
}

impl PartialEq for Template {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Template::new(&raw).map_err(serde::de::Error::custom)
    }
}

impl Default for Template {
    fn default() -> Self {
        Template::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimSource {
    FeverFile,
    Synthetic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub supported: usize,
    pub refuted: usize,
    pub unlabeled: usize,
}

impl LabelCounts {
    fn tally(claims: &[Claim]) -> Self {
        let mut counts = LabelCounts::default();
        for claim in claims {
            match claim.label {
                Some(Label::Supported) => counts.supported += 1,
                Some(Label::Refuted) => counts.refuted += 1,
                None => counts.unlabeled += 1,
            }
        }
        counts
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.supported, self.refuted, self.unlabeled)
    }
}

/// An ordered, id-unique collection of claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimSet {
    claims: Vec<Claim>,
    source: ClaimSource,
    counts: LabelCounts,
    skipped: usize,
}

impl ClaimSet {
    pub fn new(claims: Vec<Claim>, source: ClaimSource) -> Result<Self, ClaimError> {
        let mut seen = HashSet::with_capacity(claims.len());
        for claim in &claims {
            if claim.text.trim().is_empty() {
                return Err(ClaimError::EmptyText { id: claim.id.clone() });
            }
            if !seen.insert(claim.id.as_str()) {
                return Err(ClaimError::DuplicateId(claim.id.clone()));
            }
        }
        let counts = LabelCounts::tally(&claims);
        Ok(Self {
            claims,
            source,
            counts,
            skipped: 0,
        })
    }

    pub fn claims(&self) -> &[Claim] {
        &self.claims
    }

    pub fn source(&self) -> ClaimSource {
        self.source
    }

    pub fn counts(&self) -> LabelCounts {
        self.counts
    }

    /// Lines dropped during ingestion because their label was not binary.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Claim> {
        self.claims.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.id == id)
    }

    /// Writes one FEVER-style JSON object per claim.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for claim in &self.claims {
            let line = FeverRecordOut {
                id: &claim.id,
                claim: &claim.text,
                label: claim.label,
                triple: claim.triple.as_ref(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

impl<'a> IntoIterator for &'a ClaimSet {
    type Item = &'a Claim;
    type IntoIter = std::slice::Iter<'a, Claim>;

    fn into_iter(self) -> Self::IntoIter {
        self.claims.iter()
    }
}

#[derive(Serialize)]
struct FeverRecordOut<'a> {
    id: &'a str,
    claim: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    triple: Option<&'a Triple>,
}

#[derive(Deserialize)]
struct FeverRecordIn {
    id: serde_json::Value,
    claim: String,
    label: String,
    #[serde(default)]
    triple: Option<Triple>,
}

/// Loads a FEVER-format JSONL file, keeping only SUPPORTS / REFUTES lines.
///
/// With `max_per_label = Some(k)` each class is uniformly subsampled to
/// `min(k, available)` claims using `seed`; retained claims keep file order.
pub fn load_fever_jsonl(path: impl AsRef<Path>, max_per_label: Option<usize>, seed: u64) -> Result<ClaimSet, ClaimError> {
    let path = path.as_ref();
    if max_per_label == Some(0) {
        return Err(ClaimError::ZeroSample);
    }
    let io_err = |source| ClaimError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);

    let mut claims = Vec::new();
    let mut seen = HashSet::new();
    let mut skipped = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FeverRecordIn = serde_json::from_str(&line).map_err(|e| ClaimError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        let label = match record.label.as_str() {
            "SUPPORTS" => Label::Supported,
            "REFUTES" => Label::Refuted,
            _ => {
                skipped += 1;
                continue;
            }
        };
        let id = match record.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
            other => {
                return Err(ClaimError::Malformed {
                    line: lineno,
                    message: format!("id must be a string or integer, got {other}"),
                })
            }
        };
        if record.claim.trim().is_empty() {
            return Err(ClaimError::Malformed {
                line: lineno,
                message: "empty claim text".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(ClaimError::DuplicateId(id));
        }
        let mut claim = Claim::new(id, record.claim, Some(label))?;
        claim.triple = record.triple;
        claims.push(claim);
    }

    if claims.is_empty() {
        return Err(ClaimError::NoUsableClaims { skipped });
    }

    if let Some(k) = max_per_label {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = BTreeSet::new();
        for label in [Label::Supported, Label::Refuted] {
            let members: Vec<usize> = (0..claims.len()).filter(|&i| claims[i].label == Some(label)).collect();
            if members.len() <= k {
                keep.extend(members);
            } else {
                keep.extend(index::sample(&mut rng, members.len(), k).into_iter().map(|j| members[j]));
            }
        }
        claims = claims
            .into_iter()
            .enumerate()
            .filter_map(|(i, c)| keep.contains(&i).then_some(c))
            .collect();
    }

    let mut set = ClaimSet::new(claims, ClaimSource::FeverFile)?;
    set.skipped = skipped;
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_objects_per_relation: usize,
    pub template: String,
    pub corpus_fraction: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_entities: 50,
            n_relations: 5,
            n_objects_per_relation: 4,
            template: DEFAULT_TEMPLATE.to_string(),
            corpus_fraction: 0.8,
            seed: 42,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<Template, ClaimError> {
        if self.n_entities == 0 || self.n_relations == 0 {
            return Err(ClaimError::InvalidWorld("entity and relation counts must be positive".into()));
        }
        if self.n_objects_per_relation < 2 {
            return Err(ClaimError::InvalidWorld("need at least 2 objects per relation".into()));
        }
        if !(self.corpus_fraction > 0.0 && self.corpus_fraction < 1.0) {
            return Err(ClaimError::InvalidWorld(format!(
                "corpus_fraction must lie in (0, 1), got {}",
                self.corpus_fraction
            )));
        }
        let template = Template::new(&self.template)?;
        let (corpus, held_out) = self.split_sizes();
        if corpus == 0 || held_out == 0 {
            return Err(ClaimError::InvalidWorld(format!(
                "{} true claims cannot be split into a non-empty corpus and test set at fraction {}",
                self.n_entities * self.n_relations,
                self.corpus_fraction
            )));
        }
        Ok(template)
    }

    fn split_sizes(&self) -> (usize, usize) {
        let total = self.n_entities * self.n_relations;
        let corpus = ((self.corpus_fraction * total as f64).round() as usize).min(total);
        (corpus, total - corpus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub class: usize,
}

/// Ground-truth relation table of a synthetic world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub entities: Vec<Entity>,
    pub relations: Vec<String>,
    /// `objects[r]` lists the admissible objects of relation `r`.
    pub objects: Vec<Vec<String>>,
    /// `truth[e][r]` indexes into `objects[r]`.
    pub truth: Vec<Vec<usize>>,
    template: Template,
}

impl World {
    pub fn template(&self) -> &Template {
        &self.template
    }

    fn relation_index(&self, relation: &str) -> Option<usize> {
        self.relations.iter().position(|r| r == relation)
    }

    pub fn objects_for(&self, relation: &str) -> Option<&[String]> {
        self.relation_index(relation).map(|r| self.objects[r].as_slice())
    }

    pub fn true_object(&self, subject: &str, relation: &str) -> Option<&str> {
        let r = self.relation_index(relation)?;
        let e = self.entities.iter().position(|e| e.name == subject)?;
        Some(self.objects[r][self.truth[e][r]].as_str())
    }

    pub fn true_triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.entities.iter().enumerate().flat_map(move |(e, entity)| {
            self.relations.iter().enumerate().map(move |(r, relation)| {
                Triple::new(entity.name.clone(), relation.clone(), self.objects[r][self.truth[e][r]].clone())
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub world: World,
    pub truth_corpus: ClaimSet,
    pub test_set: ClaimSet,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

struct NameGen<'a> {
    rng: &'a mut ChaCha8Rng,
    seen: HashSet<String>,
}

impl NameGen<'_> {
    fn word(&mut self, min_syllables: usize, max_syllables: usize) -> String {
        let mut max = max_syllables;
        loop {
            for _ in 0..64 {
                let n = self.rng.random_range(min_syllables..=max);
                let mut w = String::with_capacity(2 * n);
                for _ in 0..n {
                    w.push(CONSONANTS[self.rng.random_range(0..CONSONANTS.len())] as char);
                    w.push(VOWELS[self.rng.random_range(0..VOWELS.len())] as char);
                }
                if self.seen.insert(w.clone()) {
                    return w;
                }
            }
            max += 1;
        }
    }
}

/// Builds a synthetic world and splits its true claims into a truth corpus
/// and a balanced test set (held-out truths plus corruptions of corpus claims).
pub fn generate_world(config: &WorldConfig) -> Result<SyntheticWorld, ClaimError> {
    let template = config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_classes = config.n_objects_per_relation.min(config.n_entities);

    let (stems, relations, entity_names, objects) = {
        let mut names = NameGen {
            rng: &mut rng,
            seen: HashSet::new(),
        };
        let stems: Vec<String> = (0..n_classes).map(|_| names.word(4, 4)).collect();
        let relations: Vec<String> = (0..config.n_relations).map(|_| names.word(2, 3)).collect();
        let entity_names: Vec<String> = (0..config.n_entities)
            .map(|i| format!("{}-{}", stems[i % n_classes], names.word(1, 3)))
            .collect();
        let objects: Vec<Vec<String>> = (0..config.n_relations)
            .map(|_| (0..config.n_objects_per_relation).map(|_| names.word(1, 3)).collect())
            .collect();
        (stems, relations, entity_names, objects)
    };
    debug_assert_eq!(stems.len(), n_classes);

    // per relation: class -> true object index
    let class_objects: Vec<Vec<usize>> = (0..config.n_relations)
        .map(|_| {
            let mut perm: Vec<usize> = (0..config.n_objects_per_relation).collect();
            perm.shuffle(&mut rng);
            perm.truncate(n_classes);
            perm
        })
        .collect();

    let entities: Vec<Entity> = entity_names
        .into_iter()
        .enumerate()
        .map(|(i, name)| Entity { name, class: i % n_classes })
        .collect();
    let truth: Vec<Vec<usize>> = entities
        .iter()
        .map(|e| (0..config.n_relations).map(|r| class_objects[r][e.class]).collect())
        .collect();
    let world = World {
        entities,
        relations,
        objects,
        truth,
        template,
    };

    let true_claims: Vec<Claim> = world
        .true_triples()
        .enumerate()
        .map(|(k, triple)| {
            let (e, r) = (k / config.n_relations, k % config.n_relations);
            Claim {
                id: format!("e{e}-r{r}"),
                text: world.template.render(&triple),
                label: Some(Label::Supported),
                triple: Some(triple),
            }
        })
        .collect();

    let (n_corpus, n_held_out) = config.split_sizes();
    let mut order: Vec<usize> = (0..true_claims.len()).collect();
    order.shuffle(&mut rng);
    let mut corpus_idx = order[..n_corpus].to_vec();
    let mut held_idx = order[n_corpus..].to_vec();
    corpus_idx.sort_unstable();
    held_idx.sort_unstable();

    let corpus_claims: Vec<Claim> = corpus_idx.iter().map(|&i| true_claims[i].clone()).collect();
    let mut test_claims: Vec<Claim> = held_idx.iter().map(|&i| true_claims[i].clone()).collect();

    let mut sources: Vec<usize> = (0..corpus_claims.len()).collect();
    sources.shuffle(&mut rng);
    for k in 0..n_held_out {
        let source = &corpus_claims[sources[k % sources.len()]];
        let mut corrupted = corrupt_claim(source, &world, &mut rng)?;
        let round = k / sources.len();
        if round > 0 {
            corrupted.id = format!("{}{}", corrupted.id, round);
        }
        test_claims.push(corrupted);
    }

    Ok(SyntheticWorld {
        truth_corpus: ClaimSet::new(corpus_claims, ClaimSource::Synthetic)?,
        test_set: ClaimSet::new(test_claims, ClaimSource::Synthetic)?,
        world,
    })
}

/// Replaces the object of a triple-annotated claim with a uniformly chosen
/// different object of the same relation.
pub fn corrupt_claim<R: Rng + ?Sized>(claim: &Claim, world: &World, rng: &mut R) -> Result<Claim, ClaimError> {
    let triple = claim.triple.as_ref().ok_or_else(|| ClaimError::MissingTriple(claim.id.clone()))?;
    let candidates: Vec<&String> = world
        .objects_for(&triple.relation)
        .ok_or_else(|| ClaimError::NoAlternative(triple.relation.clone()))?
        .iter()
        .filter(|o| **o != triple.object)
        .collect();
    if candidates.is_empty() {
        return Err(ClaimError::NoAlternative(triple.relation.clone()));
    }
    let object = candidates[rng.random_range(0..candidates.len())].clone();
    let corrupted = Triple {
        object,
        ..triple.clone()
    };
    Ok(Claim {
        id: format!("{}-false", claim.id),
        text: world.template.render(&corrupted),
        label: Some(Label::Refuted),
        triple: Some(corrupted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fever_file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn template_roundtrip() {
        let t = Template::default();
        let triple = Triple::new("E1", "r1", "A");
        assert_eq!(t.render(&triple), "E1 r1 A.");
        assert_eq!(t.parse("E1 r1 A."), Some(triple));
        assert_eq!(t.parse("This is a true statement"), None);
    }

    #[test]
    fn template_slot_order_is_free() {
        let t = Template::new("{o} is the {r} of {s}").unwrap();
        let triple = Triple::new("france", "capital", "paris");
        let text = t.render(&triple);
        assert_eq!(text, "paris is the capital of france");
        assert_eq!(t.parse(&text), Some(triple));
    }

    #[test]
    fn template_missing_slot() {
        assert!(matches!(Template::new("{s} {r}."), Err(ClaimError::Template { .. })));
        assert!(matches!(Template::new("{s} {r} {o} {o}"), Err(ClaimError::Template { .. })));
    }

    #[test]
    fn subsample_per_label() {
        let f = fever_file(&[
            r#"{"id": 1, "claim": "a", "label": "SUPPORTS"}"#,
            r#"{"id": 2, "claim": "b", "label": "SUPPORTS"}"#,
            r#"{"id": 3, "claim": "c", "label": "SUPPORTS"}"#,
            r#"{"id": "x4", "claim": "d", "label": "REFUTES"}"#,
            r#"{"id": 5, "claim": "e", "label": "REFUTES", "evidence": []}"#,
        ]);
        let set = load_fever_jsonl(f.path(), Some(2), 7).unwrap();
        assert_eq!(set.counts().as_tuple(), (2, 2, 0));
        let again = load_fever_jsonl(f.path(), Some(2), 7).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn nei_lines_are_skipped() {
        let f = fever_file(&[
            r#"{"id": 1, "claim": "a", "label": "SUPPORTS"}"#,
            r#"{"id": 2, "claim": "b", "label": "NOT ENOUGH INFO"}"#,
            r#"{"id": 3, "claim": "c", "label": "SUPPORTS"}"#,
            r#"{"id": 4, "claim": "d", "label": "REFUTES"}"#,
            r#"{"id": 5, "claim": "e", "label": "REFUTES"}"#,
        ]);
        let set = load_fever_jsonl(f.path(), None, 0).unwrap();
        assert_eq!(set.counts().as_tuple(), (2, 2, 0));
        assert_eq!(set.skipped(), 1);
        assert_eq!(set.source(), ClaimSource::FeverFile);
    }

    #[test]
    fn loader_errors() {
        assert!(matches!(
            load_fever_jsonl("/nonexistent/fever.jsonl", None, 0),
            Err(ClaimError::Io { .. })
        ));

        let f = fever_file(&[r#"{"id": 1, "claim": "a", "label": "SUPPORTS"}"#, "{not json"]);
        match load_fever_jsonl(f.path(), None, 0) {
            Err(ClaimError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed, got {other:?}"),
        }

        let f = fever_file(&[
            r#"{"id": 1, "claim": "a", "label": "SUPPORTS"}"#,
            r#"{"id": "1", "claim": "b", "label": "REFUTES"}"#,
        ]);
        assert!(matches!(load_fever_jsonl(f.path(), None, 0), Err(ClaimError::DuplicateId(_))));

        let f = fever_file(&[r#"{"id": 1, "claim": "a", "label": "NOT ENOUGH INFO"}"#]);
        assert!(matches!(
            load_fever_jsonl(f.path(), None, 0),
            Err(ClaimError::NoUsableClaims { skipped: 1 })
        ));
    }

    #[test]
    fn claim_rejects_blank_text() {
        assert!(Claim::new("a", "   ", None).is_err());
        let dup = vec![
            Claim::new("a", "x", None).unwrap(),
            Claim::new("a", "y", None).unwrap(),
        ];
        assert!(matches!(ClaimSet::new(dup, ClaimSource::Synthetic), Err(ClaimError::DuplicateId(_))));
    }

    #[test]
    fn tiny_world_counts() {
        let config = WorldConfig {
            n_entities: 2,
            n_relations: 1,
            n_objects_per_relation: 2,
            corpus_fraction: 0.5,
            ..WorldConfig::default()
        };
        let w = generate_world(&config).unwrap();
        assert_eq!(w.truth_corpus.len(), 1);
        assert_eq!(w.test_set.counts().as_tuple(), (1, 1, 0));
    }

    #[test]
    fn world_errors() {
        let bad = WorldConfig {
            n_objects_per_relation: 1,
            ..WorldConfig::default()
        };
        assert!(generate_world(&bad).is_err());
        let bad = WorldConfig {
            template: "{s} and {o}".into(),
            ..WorldConfig::default()
        };
        assert!(matches!(generate_world(&bad), Err(ClaimError::Template { .. })));
        let bad = WorldConfig {
            n_entities: 1,
            n_relations: 1,
            ..WorldConfig::default()
        };
        assert!(matches!(generate_world(&bad), Err(ClaimError::InvalidWorld(_))));
    }

    #[test]
    fn corruption_with_single_alternative() {
        let config = WorldConfig {
            n_entities: 4,
            n_relations: 2,
            n_objects_per_relation: 2,
            ..WorldConfig::default()
        };
        let w = generate_world(&config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for claim in w.truth_corpus.iter() {
            let t = claim.triple.as_ref().unwrap();
            let other: Vec<_> = w.world.objects_for(&t.relation).unwrap().iter().filter(|o| **o != t.object).collect();
            for _ in 0..5 {
                let c = corrupt_claim(claim, &w.world, &mut rng).unwrap();
                let ct = c.triple.as_ref().unwrap();
                assert_eq!(&ct.object, other[0]);
                assert_eq!((&ct.subject, &ct.relation), (&t.subject, &t.relation));
                assert_eq!(c.label, Some(Label::Refuted));
                assert_eq!(c.text, w.world.template().render(ct));
                assert_ne!(c.id, claim.id);
            }
        }
    }

    #[test]
    fn corruption_needs_triple() {
        let w = generate_world(&WorldConfig::default()).unwrap();
        let plain = Claim::new("p", "no triple here", None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(corrupt_claim(&plain, &w.world, &mut rng), Err(ClaimError::MissingTriple(_))));
    }

    #[test]
    fn jsonl_export_reloads() {
        let w = generate_world(&WorldConfig::default()).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        w.test_set.write_jsonl(&mut f).unwrap();
        let back = load_fever_jsonl(f.path(), None, 0).unwrap();
        assert_eq!(back.claims(), w.test_set.claims());
    }
}
