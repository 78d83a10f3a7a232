//! Deterministic generator of templated pseudo-clinical text with known
//! entity annotations.
//!
//! Each label has a lexicon made of a Zipf-weighted head (real-looking names
//! followed by generated ones) and a long uniform tail of generated names.
//! Tail names are individually rare, so in any realistic raw corpus most of
//! them fall below an embedding vocabulary's frequency cut-off and can only
//! be recognized from context.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Dataset, Document, EntitySpan};
use crate::rng::{self, Rng};

/// Span counts per sentence in the reference clinical dataset
/// (4212 sentences: 1194 chemical, 929 disease, 1922 symptom, 290 dosage).
const REFERENCE_SENTENCES: f64 = 4212.0;
const REFERENCE_COUNTS: [(&str, f64); 4] = [
    ("CHEMICAL", 1194.0),
    ("DISEASE", 929.0),
    ("SYMPTOM", 1922.0),
    ("DOSAGE", 290.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Clinical notes with all four target labels.
    Clinical,
    /// Biomedical abstract sentences; only CHEMICAL and DISEASE templates exist.
    Biomedical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSpec {
    /// Zipf-weighted frequent entries per label.
    pub head: usize,
    /// Uniformly drawn rare entries per label.
    pub tail: usize,
    /// Probability that a mention is drawn from the tail.
    pub tail_share: f64,
    /// Lexicons built from the same spec are identical regardless of the
    /// corpus seed, which is what lets two domains share entity names.
    pub seed: u64,
}

impl Default for LexiconSpec {
    fn default() -> Self {
        LexiconSpec {
            head: 150,
            tail: 2000,
            tail_share: 0.2,
            seed: 0x1e71c0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub documents: usize,
    /// Unannotated sentences for embedding training and pretraining.
    pub raw_sentences: usize,
    /// Requested number of annotated spans per label.
    pub mentions: Vec<(String, usize)>,
    pub domain: Domain,
    pub lexicon: LexiconSpec,
    pub id_prefix: String,
    pub seed: u64,
}

impl SynthSpec {
    /// Clinical-domain spec whose per-label span counts follow the reference
    /// dataset's proportions, scaled by `density` spans per reference rate.
    pub fn clinical(documents: usize, raw_sentences: usize, density: f64, seed: u64) -> Self {
        SynthSpec {
            documents,
            raw_sentences,
            mentions: REFERENCE_COUNTS
                .iter()
                .map(|(l, c)| {
                    let n = libm::round(documents as f64 * c / REFERENCE_SENTENCES * density) as usize;
                    (l.to_string(), n)
                })
                .collect(),
            domain: Domain::Clinical,
            lexicon: LexiconSpec::default(),
            id_prefix: "doc".into(),
            seed,
        }
    }

    /// Source-domain spec with only CHEMICAL and DISEASE mentions.
    pub fn biomedical(documents: usize, raw_sentences: usize, per_doc: f64, seed: u64) -> Self {
        let n = libm::round(documents as f64 * per_doc / 2.0) as usize;
        SynthSpec {
            documents,
            raw_sentences,
            mentions: vec![("CHEMICAL".into(), n), ("DISEASE".into(), n)],
            domain: Domain::Biomedical,
            lexicon: LexiconSpec::default(),
            id_prefix: "src".into(),
            seed,
        }
    }

    fn mention_rates(&self) -> Vec<(String, f64)> {
        let docs = self.documents.max(1) as f64;
        self.mentions
            .iter()
            .map(|(l, n)| (l.clone(), *n as f64 / docs))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub raw: Vec<String>,
    pub dataset: Dataset,
}

/// Generate the raw sentence corpus and the annotated dataset for `spec`.
///
/// Annotated span counts equal `spec.mentions` exactly for every label the
/// domain has templates for; raw sentences use the same per-sentence rates.
pub fn generate_synthetic_corpus(spec: &SynthSpec) -> crate::Result<SynthCorpus> {
    if spec.documents == 0 {
        return Err(crate::Error::InvalidConfig("at least one document is required".into()));
    }
    if !(0.0..=1.0).contains(&spec.lexicon.tail_share) {
        return Err(crate::Error::InvalidConfig("tail_share must lie in [0, 1]".into()));
    }
    let lexicon = Lexicon::build(&spec.lexicon);
    let templates = Templates::for_domain(spec.domain);
    for (label, n) in &spec.mentions {
        if *n > 0 && !templates.has(label) {
            return Err(crate::Error::InvalidConfig(format!(
                "no templates for label {label} in this domain"
            )));
        }
    }

    let mut rng = rng::derive(spec.seed, 1);
    let demands: Vec<(String, usize)> = spec.mentions.clone();
    let docs = assemble(spec.documents, &demands, &lexicon, &templates, &mut rng);
    let documents = docs
        .into_iter()
        .enumerate()
        .map(|(i, (text, spans))| Document::new(format!("{}{:05}", spec.id_prefix, i), text, spans))
        .collect::<crate::Result<Vec<_>>>()?;
    let label_set: BTreeSet<String> = spec.mentions.iter().map(|(l, _)| l.clone()).collect();
    let dataset = Dataset::new(documents, label_set)?;

    let mut raw_rng = rng::derive(spec.seed, 2);
    let raw_demands: Vec<(String, usize)> = spec
        .mention_rates()
        .into_iter()
        .map(|(l, r)| (l, libm::round(r * spec.raw_sentences as f64) as usize))
        .collect();
    let raw = assemble(spec.raw_sentences, &raw_demands, &lexicon, &templates, &mut raw_rng)
        .into_iter()
        .map(|(text, _)| text)
        .collect();
    Ok(SynthCorpus { raw, dataset })
}

fn assemble(
    count: usize,
    demands: &[(String, usize)],
    lexicon: &Lexicon,
    templates: &Templates,
    rng: &mut Rng,
) -> Vec<(String, Vec<EntitySpan>)> {
    if count == 0 {
        return Vec::new();
    }
    let mut per_doc: Vec<Vec<&str>> = vec![Vec::new(); count];
    for (label, n) in demands {
        for _ in 0..*n {
            per_doc[rng.random_range(0..count)].push(label.as_str());
        }
    }
    per_doc
        .into_iter()
        .map(|labels| {
            let mut clauses: Vec<(String, Option<(usize, usize, String)>)> = Vec::new();
            for label in labels {
                let template = *templates.pick(label, rng);
                let mention = lexicon.draw(label, rng);
                let (pre, post) = template.split_once("{}").unwrap_or((template, ""));
                let start = pre.chars().count();
                let end = start + mention.chars().count();
                clauses.push((format!("{pre}{mention}{post}"), Some((start, end, label.to_string()))));
            }
            if clauses.is_empty() || rng.random::<f64>() < 0.25 {
                let filler = *templates.filler.choose(rng).expect("filler templates");
                clauses.push((filler.to_string(), None));
            }
            clauses.shuffle(rng);

            let mut text = String::new();
            let mut offset = 0;
            let mut spans = Vec::new();
            for (i, (clause, span)) in clauses.into_iter().enumerate() {
                if i > 0 {
                    let sep = *[", ", "; ", " and "].choose(rng).expect("separators");
                    text.push_str(sep);
                    offset += sep.chars().count();
                }
                if let Some((s, e, label)) = span {
                    spans.push(EntitySpan::new(offset + s, offset + e, label));
                }
                offset += clause.chars().count();
                text.push_str(&clause);
            }
            text.push('.');
            (capitalize_first(&text), spans)
        })
        .collect()
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_lowercase() && c.to_uppercase().count() == 1 => {
            let mut out: String = c.to_uppercase().collect();
            out.extend(chars);
            out
        }
        _ => s.to_string(),
    }
}

struct Templates {
    by_label: BTreeMap<&'static str, &'static [&'static str]>,
    filler: &'static [&'static str],
}

impl Templates {
    fn for_domain(domain: Domain) -> Self {
        let mut by_label = BTreeMap::new();
        match domain {
            Domain::Clinical => {
                by_label.insert("CHEMICAL", CLINICAL_CHEMICAL);
                by_label.insert("DISEASE", CLINICAL_DISEASE);
                by_label.insert("SYMPTOM", CLINICAL_SYMPTOM);
                by_label.insert("DOSAGE", CLINICAL_DOSAGE);
                Templates { by_label, filler: CLINICAL_FILLER }
            }
            Domain::Biomedical => {
                by_label.insert("CHEMICAL", BIOMEDICAL_CHEMICAL);
                by_label.insert("DISEASE", BIOMEDICAL_DISEASE);
                Templates { by_label, filler: BIOMEDICAL_FILLER }
            }
        }
    }

    fn has(&self, label: &str) -> bool {
        self.by_label.contains_key(label)
    }

    fn pick(&self, label: &str, rng: &mut Rng) -> &&'static str {
        self.by_label[label].choose(rng).expect("non-empty template list")
    }
}

const CLINICAL_CHEMICAL: &[&str] = &[
    "started on {}",
    "continue {}",
    "prescribed {}",
    "allergic to {}",
    "{} was discontinued",
    "currently taking {}",
    "tolerating {} well",
    "{} was held overnight",
    "refill {}",
    "switched to {}",
];
const CLINICAL_DISEASE: &[&str] = &[
    "history of {}",
    "diagnosed with {}",
    "known case of {}",
    "{} remains stable",
    "family history of {}",
    "rule out {}",
    "admitted for {}",
    "followed for {}",
];
const CLINICAL_SYMPTOM: &[&str] = &[
    "complains of {}",
    "reports {}",
    "presented with {}",
    "denies {}",
    "{} since yesterday",
    "experiencing {} at night",
    "noted {} after meals",
    "worsening {}",
];
const CLINICAL_DOSAGE: &[&str] = &[
    "dose increased to {}",
    "take {} twice daily",
    "{} at bedtime",
    "reduce to {}",
    "give {} every six hours",
    "maintain {} per day",
];
const CLINICAL_FILLER: &[&str] = &[
    "vitals are stable",
    "follow up in two weeks",
    "patient is alert and oriented",
    "no acute distress",
    "labs are pending",
    "plan discussed with family",
    "will reassess tomorrow",
    "ambulating without assistance",
];
const BIOMEDICAL_CHEMICAL: &[&str] = &[
    "treatment with {} was evaluated",
    "the effect of {} was assessed",
    "rats received {}",
    "administration of {} in mice",
    "exposure to {} increased risk",
    "{} was given orally",
    "patients treated with {}",
    "levels of {} were measured",
];
const BIOMEDICAL_DISEASE: &[&str] = &[
    "incidence of {} increased",
    "a case of {} is reported",
    "{} was observed after exposure",
    "risk factors for {}",
    "animal model of {}",
    "patients with {}",
    "{} developed in two subjects",
    "progression of {} was slowed",
];
const BIOMEDICAL_FILLER: &[&str] = &[
    "results were statistically significant",
    "data were analyzed retrospectively",
    "the study was approved",
    "no adverse events were recorded",
    "samples were collected weekly",
];

const KNOWN_CHEMICALS: &[&str] = &[
    "aspirin", "ibuprofen", "metformin", "lisinopril", "atorvastatin", "amoxicillin", "omeprazole",
    "warfarin", "heparin", "insulin", "prednisone", "furosemide", "amlodipine", "gabapentin",
    "levothyroxine", "losartan", "simvastatin", "paracetamol", "morphine", "diclofenac",
    "ciprofloxacin", "doxycycline", "clopidogrel", "albuterol", "cetirizine", "naproxen",
    "tramadol", "sertraline", "fluoxetine", "citalopram",
];
const KNOWN_DISEASES: &[&str] = &[
    "diabetes", "hypertension", "asthma", "pneumonia", "migraine", "arthritis", "epilepsy",
    "anemia", "hepatitis", "tuberculosis", "psoriasis", "gout", "lupus", "sepsis", "bronchitis",
    "heart failure", "kidney disease", "atrial fibrillation", "chronic kidney disease",
    "coronary artery disease", "multiple sclerosis", "hypothyroidism", "osteoporosis",
    "cirrhosis", "pancreatitis", "type 2 diabetes",
];
const KNOWN_SYMPTOMS: &[&str] = &[
    "fever", "headache", "nausea", "vomiting", "dizziness", "fatigue", "rash", "cough",
    "chest pain", "shortness of breath", "abdominal pain", "blurred vision", "insomnia",
    "palpitations", "dry mouth", "night sweats", "weight loss", "loss of appetite", "swelling",
    "itching", "chills", "tremor", "constipation", "diarrhea", "confusion", "numbness",
];
const BODY_PARTS: &[&str] = &[
    "knee", "neck", "back", "shoulder", "hip", "ankle", "wrist", "jaw", "ear", "eye", "throat",
    "calf", "elbow", "foot", "hand", "chest", "groin", "flank", "scalp", "thigh",
];
const SENSATIONS: &[&str] = &[
    "pain", "stiffness", "soreness", "tingling", "cramps", "weakness", "burning", "tenderness",
    "discomfort", "aching",
];
const DOSE_NUMBERS: &[&str] = &[
    "1", "2", "2.5", "5", "10", "12.5", "20", "25", "40", "50", "75", "100", "125", "150", "200",
    "250", "300", "400", "500", "1000",
];
const DOSE_UNITS: &[&str] = &[
    "mg", "mcg", "g", "ml", "units", "mg/kg", "mg/day", "tablets", "puffs", "drops",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z", "cl", "pr", "tr", "fl",
    "gl", "br", "k", "h", "x", "st", "dr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "eo", "y"];
const CHEMICAL_SUFFIXES: &[&str] = &[
    "in", "ol", "ide", "ate", "ine", "mab", "pril", "statin", "azole", "cillin", "profen",
    "oxacin", "sartan", "olol", "dipine",
];
const DISEASE_SUFFIXES: &[&str] = &["itis", "osis", "emia", "oma", "pathy", "iasis"];
const SYMPTOM_SUFFIXES: &[&str] = &["algia", "esthesia", "opia", "pnea", "uria", "phagia", "rrhea"];

/// One label's weighted vocabulary of surface forms.
struct LabelLexicon {
    head: Vec<String>,
    head_cdf: Vec<f64>,
    tail: Vec<String>,
    tail_share: f64,
    /// Probability that a drawn name is capitalized.
    capitalize: f64,
}

struct Lexicon {
    labels: BTreeMap<&'static str, LabelLexicon>,
}

impl Lexicon {
    fn build(spec: &LexiconSpec) -> Self {
        let mut rng = rng::derive(spec.seed, 0);
        let mut used: BTreeSet<String> = BTreeSet::new();
        for list in [KNOWN_CHEMICALS, KNOWN_DISEASES, KNOWN_SYMPTOMS] {
            used.extend(list.iter().map(|s| s.to_string()));
        }
        let mut labels = BTreeMap::new();

        let chem_head = fill(KNOWN_CHEMICALS, spec.head, &mut used, &mut rng, |r| root(r, 2) + pick(r, CHEMICAL_SUFFIXES));
        let chem_tail = fill(&[], spec.tail, &mut used, &mut rng, |r| root(r, 3) + pick(r, CHEMICAL_SUFFIXES));
        labels.insert("CHEMICAL", LabelLexicon::new(chem_head, chem_tail, spec.tail_share, 0.5));

        let disease = |r: &mut Rng| -> String {
            let base = root(r, 2);
            match r.random_range(0..4) {
                0 => format!("{base} syndrome"),
                1 => format!("{base} disease"),
                2 => format!("chronic {base}{}", pick(r, DISEASE_SUFFIXES)),
                _ => base + pick(r, DISEASE_SUFFIXES),
            }
        };
        let dis_head = fill(KNOWN_DISEASES, spec.head, &mut used, &mut rng, disease);
        let dis_tail = fill(&[], spec.tail, &mut used, &mut rng, disease);
        labels.insert("DISEASE", LabelLexicon::new(dis_head, dis_tail, spec.tail_share, 0.1));

        let mut symptom_seed: Vec<String> = KNOWN_SYMPTOMS.iter().map(|s| s.to_string()).collect();
        for part in BODY_PARTS {
            for feel in SENSATIONS {
                let combo = format!("{part} {feel}");
                if !KNOWN_SYMPTOMS.contains(&combo.as_str()) {
                    symptom_seed.push(combo);
                }
            }
        }
        symptom_seed.shuffle(&mut rng);
        // The well-known symptoms lead the head so they carry the Zipf mass.
        symptom_seed.sort_by_key(|s| !KNOWN_SYMPTOMS.contains(&s.as_str()));
        let sym_head = fill_owned(symptom_seed, spec.head, &mut used, &mut rng, |r| {
            root(r, 2) + pick(r, SYMPTOM_SUFFIXES)
        });
        let sym_tail = fill(&[], spec.tail, &mut used, &mut rng, |r| root(r, 3) + pick(r, SYMPTOM_SUFFIXES));
        labels.insert("SYMPTOM", LabelLexicon::new(sym_head, sym_tail, spec.tail_share, 0.1));

        let mut doses = Vec::new();
        for n in DOSE_NUMBERS {
            for u in DOSE_UNITS {
                doses.push(format!("{n} {u}"));
            }
        }
        doses.shuffle(&mut rng);
        labels.insert("DOSAGE", LabelLexicon::new(doses, Vec::new(), 0.0, 0.0));

        Lexicon { labels }
    }

    fn draw(&self, label: &str, rng: &mut Rng) -> String {
        let lex = &self.labels[label];
        let name = if !lex.tail.is_empty() && rng.random::<f64>() < lex.tail_share {
            lex.tail.choose(rng).expect("tail").clone()
        } else {
            let u = rng.random::<f64>();
            let i = lex.head_cdf.partition_point(|&c| c < u).min(lex.head.len() - 1);
            lex.head[i].clone()
        };
        if rng.random::<f64>() < lex.capitalize {
            capitalize_first(&name)
        } else {
            name
        }
    }
}

impl LabelLexicon {
    fn new(head: Vec<String>, tail: Vec<String>, tail_share: f64, capitalize: f64) -> Self {
        let weights: Vec<f64> = (0..head.len()).map(|r| 1.0 / libm::pow(r as f64 + 1.0, 0.8)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let head_cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        LabelLexicon {
            head,
            head_cdf,
            tail,
            tail_share,
            capitalize,
        }
    }
}

fn pick(rng: &mut Rng, list: &[&'static str]) -> &'static str {
    list.choose(rng).expect("non-empty list")
}

fn root(rng: &mut Rng, syllables: usize) -> String {
    let mut s = String::new();
    for _ in 0..syllables {
        s.push_str(ONSETS.choose(rng).expect("onsets"));
        s.push_str(VOWELS.choose(rng).expect("vowels"));
    }
    s
}

fn fill(
    known: &[&str],
    size: usize,
    used: &mut BTreeSet<String>,
    rng: &mut Rng,
    make: impl FnMut(&mut Rng) -> String,
) -> Vec<String> {
    let seed: Vec<String> = known.iter().map(|s| s.to_string()).collect();
    fill_owned(seed, size, used, rng, make)
}

fn fill_owned(
    seed: Vec<String>,
    size: usize,
    used: &mut BTreeSet<String>,
    rng: &mut Rng,
    mut make: impl FnMut(&mut Rng) -> String,
) -> Vec<String> {
    let mut out: Vec<String> = seed.into_iter().take(size).collect();
    while out.len() < size {
        let candidate = make(rng);
        if used.insert(candidate.clone()) {
            out.push(candidate);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset_stats;

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec::clinical(100, 50, 1.0, 7);
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dataset.len(), 100);
        assert_eq!(a.raw.len(), 50);
        let other = generate_synthetic_corpus(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.dataset, other.dataset);
    }

    #[test]
    fn labels_are_the_target_set() {
        let corpus = generate_synthetic_corpus(&SynthSpec::clinical(200, 0, 2.0, 1)).unwrap();
        for span in corpus.dataset.documents.iter().flat_map(|d| &d.spans) {
            assert!(crate::corpus::TARGET_LABELS.contains(&span.label.as_str()));
        }
    }

    #[test]
    fn requested_counts_are_met() {
        let spec = SynthSpec::clinical(4212, 0, 1.0, 3);
        let stats = dataset_stats(&generate_synthetic_corpus(&spec).unwrap().dataset);
        assert_eq!(stats.documents, 4212);
        for (label, n) in REFERENCE_COUNTS {
            assert_eq!(stats.count(label), n as usize, "{label}");
        }
    }

    #[test]
    fn biomedical_has_no_symptom_templates() {
        let mut spec = SynthSpec::biomedical(10, 0, 1.0, 1);
        spec.mentions.push(("SYMPTOM".into(), 3));
        assert!(generate_synthetic_corpus(&spec).is_err());
    }

    #[test]
    fn zero_documents_rejected() {
        assert!(generate_synthetic_corpus(&SynthSpec::clinical(0, 10, 1.0, 1)).is_err());
    }

    #[test]
    fn lexicons_do_not_collide_across_labels() {
        let lex = Lexicon::build(&LexiconSpec::default());
        let mut seen = BTreeSet::new();
        for l in lex.labels.values() {
            for name in l.head.iter().chain(&l.tail) {
                assert!(seen.insert(name.clone()), "{name}");
            }
        }
    }
}
