//! Concept/variant lexicon: loading, validation, and multiword matching.
//!
//! A lexicon groups competing word variants under concepts (lexical
//! variables). Matching runs over normalized token streams: greedy
//! longest-match, left to right, non-overlapping, so nested forms like
//! "scotch" inside "cinta scotch" resolve to the longer phrase.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// The inventory transcribed from the bundled Varilex-derived appendix.
pub const BUNDLED_LEXICON: &str = include_str!("../data/varilex.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("concept {concept_id} has {count} variant(s) after dedup; at least 2 required")]
    TooFewVariants { concept_id: String, count: usize },
    #[error("duplicate concept id {0}")]
    DuplicateConcept(String),
    #[error("surface form collisions:\n{}", format_collisions(.0))]
    SurfaceCollisions(Vec<Collision>),
    #[error("lexicon has no concepts")]
    Empty,
}

/// A normalized surface form claimed by two distinct (concept, variant) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collision {
    pub form: String,
    pub first: (String, String),
    pub second: (String, String),
}

fn format_collisions(collisions: &[Collision]) -> String {
    collisions
        .iter()
        .map(|c| {
            format!(
                "  \"{}\": ({}, {}) vs ({}, {})",
                c.form, c.first.0, c.first.1, c.second.0, c.second.1
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Folding flags applied by [`normalize_text`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizationConfig {
    /// Fold acute accents and diaeresis (á→a … ü→u). ñ is always preserved;
    /// folding it would merge distinct Spanish words. Defaults to on because
    /// informal text frequently omits accents.
    pub fold_diacritics: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            fold_diacritics: true,
        }
    }
}

fn fold_char(c: char) -> char {
    match c {
        'á' => 'a',
        'é' => 'e',
        'í' => 'i',
        'ó' => 'o',
        'ú' | 'ü' => 'u',
        _ => c,
    }
}

/// Compose, lowercase, and split into maximal letter/digit runs.
pub fn normalize_text(raw: &str, config: &NormalizationConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in raw.nfc().flat_map(char::to_lowercase) {
        let c = if config.fold_diacritics { fold_char(c) } else { c };
        if c.is_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Stable identifier for a canonical form: always-folded tokens joined by '-',
/// independent of the runtime folding config.
pub fn slug(canonical: &str) -> String {
    normalize_text(canonical, &NormalizationConfig { fold_diacritics: true }).join("-")
}

/// One competing form of a concept.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub variant_id: String,
    /// Canonical form as written in the lexicon file (for display and corpus
    /// generation).
    pub canonical: String,
    /// Normalized token sequences: the canonical form plus any expansions.
    pub surface_forms: Vec<Vec<String>>,
}

/// A lexical variable: a meaning realized by competing variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub concept_id: String,
    pub gloss: String,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub concepts: Vec<Concept>,
    pub normalization: NormalizationConfig,
}

/// Load-time statistics and warnings.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub concepts: usize,
    /// Variant lines as listed in the file, before any dedup.
    pub raw_variant_entries: usize,
    /// Distinct variants per concept, summed.
    pub dedup_variant_entries: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub normalization: NormalizationConfig,
    /// Downgrade cross-concept surface collisions to warnings; the earliest
    /// definition wins at match time.
    pub allow_collisions: bool,
}

impl Lexicon {
    pub fn load(path: &Path) -> Result<(Lexicon, LoadReport), LexiconError> {
        Self::load_with(path, &LoadOptions::default())
    }

    pub fn load_with(path: &Path, opts: &LoadOptions) -> Result<(Lexicon, LoadReport), LexiconError> {
        let file = File::open(path)?;
        Self::from_reader(BufReader::new(file), opts)
    }

    /// The bundled appendix inventory (46 concepts).
    pub fn bundled() -> (Lexicon, LoadReport) {
        Self::from_reader(BUNDLED_LEXICON.as_bytes(), &LoadOptions::default())
            .expect("bundled lexicon is valid")
    }

    pub fn from_reader(
        reader: impl BufRead,
        opts: &LoadOptions,
    ) -> Result<(Lexicon, LoadReport), LexiconError> {
        let mut report = LoadReport::default();
        let mut concepts: Vec<Concept> = Vec::new();
        let mut concept_ids: HashMap<String, ()> = HashMap::new();

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let kind = fields.next().unwrap_or_default();
            match kind {
                "concept" => {
                    let concept_id = fields.next().unwrap_or_default().trim().to_string();
                    let gloss = fields.next().unwrap_or_default().trim().to_string();
                    if concept_id.is_empty() {
                        return Err(LexiconError::Parse {
                            line: line_no,
                            message: "concept line missing id field".into(),
                        });
                    }
                    if !valid_concept_id(&concept_id) {
                        return Err(LexiconError::Parse {
                            line: line_no,
                            message: format!(
                                "concept id {concept_id:?} must be a letter followed by digits"
                            ),
                        });
                    }
                    if concept_ids.insert(concept_id.clone(), ()).is_some() {
                        return Err(LexiconError::DuplicateConcept(concept_id));
                    }
                    concepts.push(Concept {
                        concept_id,
                        gloss,
                        variants: Vec::new(),
                    });
                }
                "variant" => {
                    let canonical = fields.next().unwrap_or_default().trim().to_string();
                    let expansions = fields.next().unwrap_or_default();
                    if canonical.is_empty() {
                        return Err(LexiconError::Parse {
                            line: line_no,
                            message: "variant line missing canonical form".into(),
                        });
                    }
                    let concept = concepts.last_mut().ok_or_else(|| LexiconError::Parse {
                        line: line_no,
                        message: "variant line before any concept line".into(),
                    })?;
                    let variant_id = slug(&canonical);
                    if variant_id.is_empty() {
                        return Err(LexiconError::Parse {
                            line: line_no,
                            message: format!("canonical form {canonical:?} has no tokens"),
                        });
                    }
                    report.raw_variant_entries += 1;

                    let mut forms: Vec<Vec<String>> = Vec::new();
                    let mut push_form = |raw: &str, forms: &mut Vec<Vec<String>>| {
                        let toks = normalize_text(raw, &opts.normalization);
                        // duplicates inside one variant dedupe silently
                        if !toks.is_empty() && !forms.contains(&toks) {
                            forms.push(toks);
                        }
                    };
                    push_form(&canonical, &mut forms);
                    for exp in expansions.split(';').filter(|e| !e.trim().is_empty()) {
                        push_form(exp.trim(), &mut forms);
                    }

                    if let Some(existing) = concept
                        .variants
                        .iter_mut()
                        .find(|v| v.variant_id == variant_id)
                    {
                        report.warnings.push(format!(
                            "line {line_no}: duplicate variant {variant_id:?} in concept {}; entries merged",
                            concept.concept_id
                        ));
                        for f in forms {
                            if !existing.surface_forms.contains(&f) {
                                existing.surface_forms.push(f);
                            }
                        }
                    } else {
                        concept.variants.push(Variant {
                            variant_id,
                            canonical,
                            surface_forms: forms,
                        });
                    }
                }
                other => {
                    return Err(LexiconError::Parse {
                        line: line_no,
                        message: format!("unknown line kind {other:?}"),
                    });
                }
            }
        }

        if concepts.is_empty() {
            return Err(LexiconError::Empty);
        }
        for concept in &concepts {
            if concept.variants.len() < 2 {
                return Err(LexiconError::TooFewVariants {
                    concept_id: concept.concept_id.clone(),
                    count: concept.variants.len(),
                });
            }
        }

        // collision check: a normalized form must resolve to one (concept, variant)
        let mut seen: HashMap<String, (String, String)> = HashMap::new();
        let mut collisions = Vec::new();
        for concept in &concepts {
            for variant in &concept.variants {
                for form in &variant.surface_forms {
                    let key = form.join(" ");
                    let pair = (concept.concept_id.clone(), variant.variant_id.clone());
                    match seen.get(&key) {
                        Some(first) if *first != pair => collisions.push(Collision {
                            form: key.clone(),
                            first: first.clone(),
                            second: pair,
                        }),
                        Some(_) => {}
                        None => {
                            seen.insert(key, pair);
                        }
                    }
                }
            }
        }
        if !collisions.is_empty() {
            if opts.allow_collisions {
                for c in &collisions {
                    report.warnings.push(format!(
                        "surface collision on \"{}\": keeping ({}, {}), ignoring ({}, {})",
                        c.form, c.first.0, c.first.1, c.second.0, c.second.1
                    ));
                }
            } else {
                return Err(LexiconError::SurfaceCollisions(collisions));
            }
        }

        report.concepts = concepts.len();
        report.dedup_variant_entries = concepts.iter().map(|c| c.variants.len()).sum();
        Ok((
            Lexicon {
                concepts,
                normalization: opts.normalization,
            },
            report,
        ))
    }

    pub fn concept(&self, concept_id: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.concept_id == concept_id)
    }

    /// Content digest over ids, surface forms, and normalization flags.
    /// Counts tables record it so merges can check they share a lexicon.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update([self.normalization.fold_diacritics as u8]);
        for concept in &self.concepts {
            hasher.update(concept.concept_id.as_bytes());
            hasher.update([0]);
            for variant in &concept.variants {
                hasher.update(variant.variant_id.as_bytes());
                hasher.update([1]);
                for form in &variant.surface_forms {
                    hasher.update(form.join(" ").as_bytes());
                    hasher.update([2]);
                }
            }
        }
        hasher.finalize().into()
    }
}

fn valid_concept_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.clone().count() >= 1
        && chars.all(|c| c.is_ascii_digit())
}

/// One variant occurrence in a text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit<'m> {
    pub concept_id: &'m str,
    pub variant_id: &'m str,
    /// Token index range in the normalized token stream.
    pub span: Range<usize>,
    /// Column index in the lexicon's feature space (see `FeatureSpace`).
    pub feature: u32,
}

#[derive(Debug, Clone)]
struct Pattern {
    tokens: Vec<u32>,
    feature: u32,
}

/// Immutable multiword matcher over normalized token streams.
///
/// Candidate patterns are indexed by first token; at each position the
/// longest candidate that matches wins and the scan resumes after it, so hits
/// never overlap. Shareable across threads.
pub struct Matcher {
    token_ids: HashMap<String, u32>,
    by_first: HashMap<u32, Vec<Pattern>>,
    /// (concept_id, variant_id) per feature, lexicographically sorted —
    /// the column order of the dominance matrix.
    features: Vec<(String, String)>,
    concept_of_feature: Vec<u32>,
    concept_ids: Vec<String>,
    normalization: NormalizationConfig,
    lexicon_digest: [u8; 32],
}

impl fmt::Debug for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Matcher")
            .field("features", &self.features.len())
            .field("tokens", &self.token_ids.len())
            .finish()
    }
}

impl Matcher {
    pub fn build(lexicon: &Lexicon) -> Matcher {
        let mut features: Vec<(String, String)> = lexicon
            .concepts
            .iter()
            .flat_map(|c| {
                c.variants
                    .iter()
                    .map(|v| (c.concept_id.clone(), v.variant_id.clone()))
            })
            .collect();
        features.sort();

        let mut concept_ids: Vec<String> =
            lexicon.concepts.iter().map(|c| c.concept_id.clone()).collect();
        concept_ids.sort();
        let concept_idx: HashMap<&str, u32> = concept_ids
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();
        let feature_idx: HashMap<(&str, &str), u32> = features
            .iter()
            .enumerate()
            .map(|(i, (c, v))| ((c.as_str(), v.as_str()), i as u32))
            .collect();
        let concept_of_feature = features
            .iter()
            .map(|(c, _)| concept_idx[c.as_str()])
            .collect();

        let mut token_ids: HashMap<String, u32> = HashMap::new();
        let mut by_first: HashMap<u32, Vec<Pattern>> = HashMap::new();
        for concept in &lexicon.concepts {
            for variant in &concept.variants {
                let feature =
                    feature_idx[&(concept.concept_id.as_str(), variant.variant_id.as_str())];
                for form in &variant.surface_forms {
                    let tokens: Vec<u32> = form
                        .iter()
                        .map(|t| {
                            let next = token_ids.len() as u32;
                            *token_ids.entry(t.clone()).or_insert(next)
                        })
                        .collect();
                    by_first
                        .entry(tokens[0])
                        .or_default()
                        .push(Pattern { tokens, feature });
                }
            }
        }
        // longest first so the greedy scan takes the longest candidate
        for patterns in by_first.values_mut() {
            patterns.sort_by(|a, b| {
                b.tokens
                    .len()
                    .cmp(&a.tokens.len())
                    .then(a.feature.cmp(&b.feature))
            });
        }

        Matcher {
            token_ids,
            by_first,
            features,
            concept_of_feature,
            concept_ids,
            normalization: lexicon.normalization,
            lexicon_digest: lexicon.digest(),
        }
    }

    pub fn match_text(&self, raw: &str) -> Vec<Hit<'_>> {
        self.match_tokens(&normalize_text(raw, &self.normalization))
    }

    pub fn match_tokens(&self, tokens: &[String]) -> Vec<Hit<'_>> {
        let ids: Vec<Option<u32>> = tokens
            .iter()
            .map(|t| self.token_ids.get(t).copied())
            .collect();
        let mut hits = Vec::new();
        let mut i = 0;
        while i < ids.len() {
            let Some(first) = ids[i] else {
                i += 1;
                continue;
            };
            let Some(candidates) = self.by_first.get(&first) else {
                i += 1;
                continue;
            };
            let matched = candidates.iter().find(|p| {
                p.tokens.len() <= ids.len() - i
                    && p.tokens
                        .iter()
                        .zip(&ids[i..i + p.tokens.len()])
                        .all(|(want, got)| Some(*want) == *got)
            });
            match matched {
                Some(p) => {
                    let (concept_id, variant_id) = &self.features[p.feature as usize];
                    hits.push(Hit {
                        concept_id,
                        variant_id,
                        span: i..i + p.tokens.len(),
                        feature: p.feature,
                    });
                    i += p.tokens.len();
                }
                None => i += 1,
            }
        }
        hits
    }

    /// Feature columns: (concept_id, variant_id), lexicographically sorted.
    pub fn features(&self) -> &[(String, String)] {
        &self.features
    }

    pub fn concept_ids(&self) -> &[String] {
        &self.concept_ids
    }

    pub fn concept_of_feature(&self, feature: u32) -> u32 {
        self.concept_of_feature[feature as usize]
    }

    pub fn normalization(&self) -> &NormalizationConfig {
        &self.normalization
    }

    pub fn lexicon_digest(&self) -> [u8; 32] {
        self.lexicon_digest
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini_lexicon() -> Lexicon {
        let input = "\
# test inventory
concept\tC182\tcold
variant\tgripa
variant\tgripe
variant\tresfrío
concept\tE007\tcellophane tape
variant\tcinta scotch
variant\tscotch
variant\tcelo
concept\tF125\tmiss
variant\techar de menos\techo de menos;echamos de menos
variant\textrañar
";
        Lexicon::from_reader(input.as_bytes(), &LoadOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn normalize_lowercases_and_tokenizes() {
        let cfg = NormalizationConfig::default();
        assert_eq!(normalize_text("Gripa fuerte", &cfg), ["gripa", "fuerte"]);
    }

    #[test]
    fn normalize_folds_accents_when_on() {
        let cfg = NormalizationConfig::default();
        assert_eq!(normalize_text("resfrío", &cfg), ["resfrio"]);
        assert_eq!(normalize_text("pingüino", &cfg), ["pinguino"]);
        let off = NormalizationConfig { fold_diacritics: false };
        assert_eq!(normalize_text("resfrío", &off), ["resfrío"]);
    }

    #[test]
    fn normalize_preserves_enye() {
        let cfg = NormalizationConfig::default();
        assert_eq!(normalize_text("el año pasado", &cfg), ["el", "año", "pasado"]);
    }

    #[test]
    fn normalize_composes_decomposed_input() {
        let cfg = NormalizationConfig { fold_diacritics: false };
        // "año" with combining tilde, "é" with combining acute
        assert_eq!(normalize_text("an\u{0303}o cafe\u{0301}", &cfg), ["año", "café"]);
        let fold = NormalizationConfig::default();
        assert_eq!(normalize_text("an\u{0303}o cafe\u{0301}", &fold), ["año", "cafe"]);
    }

    #[test]
    fn normalize_empty_input_yields_empty_sequence() {
        assert!(normalize_text("", &NormalizationConfig::default()).is_empty());
        assert!(normalize_text("¡¿ --- !?", &NormalizationConfig::default()).is_empty());
    }

    #[test]
    fn slug_is_fold_stable() {
        assert_eq!(slug("cinta scotch"), "cinta-scotch");
        assert_eq!(slug("echar de menos"), "echar-de-menos");
        assert_eq!(slug("resfrío"), "resfrio");
        assert_eq!(slug("extrañar"), "extrañar");
    }

    #[test]
    fn bundled_lexicon_loads_with_expected_shape() {
        let (lexicon, report) = Lexicon::bundled();
        assert_eq!(report.concepts, 46);
        assert_eq!(report.raw_variant_entries, 268);
        assert_eq!(report.dedup_variant_entries, 264);
        assert_eq!(report.warnings.len(), 4);
        assert!(lexicon.concept("C182").is_some());
        assert!(lexicon.concept("F125").is_some());
    }

    #[test]
    fn appendix_duplicate_dedupes_with_warning() {
        let input = "\
concept\tE020\tinterview
variant\tentrevistar
variant\treportear
variant\tentrevistar
";
        let (lexicon, report) =
            Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(lexicon.concepts[0].variants.len(), 2);
        assert_eq!(report.raw_variant_entries, 3);
        assert_eq!(report.dedup_variant_entries, 2);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn cross_concept_collision_is_hard_error() {
        let input = "\
concept\tC182\tcold
variant\tgripa
variant\tgripe
concept\tC999\tother
variant\tgripa
variant\tzeta
";
        let err = Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()).unwrap_err();
        match err {
            LexiconError::SurfaceCollisions(collisions) => {
                assert_eq!(collisions.len(), 1);
                assert_eq!(collisions[0].form, "gripa");
            }
            other => panic!("expected collision error, got {other:?}"),
        }
    }

    #[test]
    fn collision_override_keeps_first_definition() {
        let input = "\
concept\tC182\tcold
variant\tgripa
variant\tgripe
concept\tC999\tother
variant\tgripa
variant\tzeta
";
        let opts = LoadOptions { allow_collisions: true, ..Default::default() };
        let (lexicon, report) = Lexicon::from_reader(input.as_bytes(), &opts).unwrap();
        assert_eq!(report.warnings.len(), 1);
        let matcher = Matcher::build(&lexicon);
        let hits = matcher.match_text("gripa");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].concept_id, "C182");
    }

    #[test]
    fn single_variant_concept_rejected() {
        let input = "concept\tC001\tfans\nvariant\thinchas\n";
        assert!(matches!(
            Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()),
            Err(LexiconError::TooFewVariants { .. })
        ));
    }

    #[test]
    fn parse_error_reports_line_number() {
        let input = "concept\tC182\tcold\nvariant\tgripa\nwat\tx\n";
        match Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()) {
            Err(LexiconError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn variant_before_concept_rejected() {
        let input = "variant\tgripa\n";
        assert!(matches!(
            Lexicon::from_reader(input.as_bytes(), &LoadOptions::default()),
            Err(LexiconError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn matcher_hits_single_surface_form() {
        let matcher = Matcher::build(&mini_lexicon());
        let hits = matcher.match_text("tengo mucha gripa hoy");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].concept_id, "C182");
        assert_eq!(hits[0].variant_id, "gripa");
        assert_eq!(hits[0].span, 2..3);
    }

    #[test]
    fn longest_match_wins_over_nested_form() {
        let matcher = Matcher::build(&mini_lexicon());
        let hits = matcher.match_text("compré cinta scotch ayer");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].concept_id, "E007");
        assert_eq!(hits[0].variant_id, "cinta-scotch");
    }

    #[test]
    fn no_lexicon_form_no_hits() {
        let matcher = Matcher::build(&mini_lexicon());
        assert!(matcher.match_text("hola mundo").is_empty());
    }

    #[test]
    fn expansions_match_and_map_to_variant() {
        let matcher = Matcher::build(&mini_lexicon());
        let hits = matcher.match_text("te echo de menos");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].variant_id, "echar-de-menos");
    }

    #[test]
    fn every_occurrence_counts() {
        let matcher = Matcher::build(&mini_lexicon());
        let hits = matcher.match_text("gripa o gripe, gripa al fin");
        let ids: Vec<&str> = hits.iter().map(|h| h.variant_id).collect();
        assert_eq!(ids, ["gripa", "gripe", "gripa"]);
    }

    #[test]
    fn partial_token_does_not_match() {
        let matcher = Matcher::build(&mini_lexicon());
        // "scotchs" is a different token; "cinta" alone is not a form
        assert!(matcher.match_text("compré cinta scotchs").is_empty());
    }

    #[test]
    fn hits_never_overlap_and_are_ordered() {
        let matcher = Matcher::build(&mini_lexicon());
        let text = "celo y cinta scotch y scotch; extrañar es echar de menos";
        let hits = matcher.match_text(text);
        for pair in hits.windows(2) {
            assert!(pair[0].span.end <= pair[1].span.start);
        }
        assert_eq!(hits.len(), 5);
    }

    #[test]
    fn rebuilt_matcher_is_behaviorally_identical() {
        let lexicon = mini_lexicon();
        let a = Matcher::build(&lexicon);
        let b = Matcher::build(&lexicon);
        let texts = [
            "tengo gripa y scotch",
            "cinta scotch",
            "extrañar echar de menos celo",
            "nada aquí",
        ];
        for text in texts {
            let ha: Vec<_> = a.match_text(text);
            let hb: Vec<_> = b.match_text(text);
            assert_eq!(ha, hb);
        }
        assert_eq!(a.features(), b.features());
    }

    #[test]
    fn digest_tracks_content() {
        let a = mini_lexicon();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.concepts[0].variants[0].surface_forms.push(vec!["flu".into()]);
        assert_ne!(a.digest(), b.digest());
    }
}
