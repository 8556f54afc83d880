//! IPA segmentation and post-adjustment normalization.
//!
//! A segment is one base letter plus everything that attaches to it:
//! combining marks and spacing modifier letters follow their base, stress
//! marks and the syllable break precede it, and a tie bar binds the next
//! base into the same segment (`t͡ʃ`). Segment text is kept in NFC so equal
//! sounds compare equal as strings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub const PRIMARY_STRESS: char = '\u{02C8}';
pub const SECONDARY_STRESS: char = '\u{02CC}';
pub const SYLLABLE_BREAK: char = '.';

/// Voice quality marks removed when `strip_voqs` is on: breathy voice
/// (U+0324) and creaky voice (U+0330), the two phonation diacritics G2P
/// tools emit for voice quality rather than segment identity.
pub const VOQS_MARKS: [char; 2] = ['\u{0324}', '\u{0330}'];

const TIE_BARS: [char; 2] = ['\u{0361}', '\u{035C}'];

#[derive(Debug, Error, PartialEq)]
pub enum IpaError {
    #[error("character {ch:?} at offset {offset} has no base segment to attach to")]
    DanglingMark { offset: usize, ch: char },
    #[error("no IPA segment in {0:?}")]
    NoSegment(String),
    #[error("expected a single IPA segment, found {count} in {text:?}")]
    NotSingleSegment { text: String, count: usize },
    #[error("policy line {line}: {message}")]
    Policy { line: usize, message: String },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One normalized IPA segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Phoneme(String);

impl Phoneme {
    /// Parses text that must hold exactly one segment.
    pub fn parse(text: &str) -> Result<Self, IpaError> {
        let mut seq = tokenize_ipa(text)?;
        match seq.0.len() {
            1 => Ok(seq.0.pop().unwrap()),
            0 => Err(IpaError::NoSegment(text.to_string())),
            count => Err(IpaError::NotSingleSegment {
                text: text.to_string(),
                count,
            }),
        }
    }

    fn from_raw(raw: &str) -> Self {
        Phoneme(raw.nfc().collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Phoneme {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl FromStr for Phoneme {
    type Err = IpaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phoneme::parse(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PhonemeSequence(pub Vec<Phoneme>);

impl PhonemeSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Phoneme> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Phoneme] {
        &self.0
    }
}

impl fmt::Display for PhonemeSequence {
    /// Space-separated segments.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(p.as_str())?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a PhonemeSequence {
    type Item = &'a Phoneme;
    type IntoIter = std::slice::Iter<'a, Phoneme>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl FromIterator<Phoneme> for PhonemeSequence {
    fn from_iter<I: IntoIterator<Item = Phoneme>>(iter: I) -> Self {
        PhonemeSequence(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Separator,
    Prefix,
    Tie,
    Attaching,
    Base,
}

fn is_modifier_letter(c: char) -> bool {
    matches!(c,
        '\u{02B0}'..='\u{02FF}'
        | '\u{1D2C}'..='\u{1D6A}'
        | '\u{1D78}'
        | '\u{1D9B}'..='\u{1DBF}'
        | '\u{2070}'..='\u{209F}'
        | '\u{A700}'..='\u{A721}')
}

fn classify(c: char) -> CharClass {
    if c.is_whitespace() || matches!(c, '|' | '\u{2016}' | '\u{203F}') {
        CharClass::Separator
    } else if c == PRIMARY_STRESS || c == SECONDARY_STRESS || c == SYLLABLE_BREAK {
        CharClass::Prefix
    } else if TIE_BARS.contains(&c) {
        CharClass::Tie
    } else if is_combining_mark(c) || is_modifier_letter(c) {
        CharClass::Attaching
    } else {
        CharClass::Base
    }
}

/// Splits an IPA string into segments.
///
/// Whitespace and prosodic group bars separate segments and are dropped.
/// A combining mark or modifier letter with no preceding base is an error
/// carrying its character offset.
pub fn tokenize_ipa(s: &str) -> Result<PhonemeSequence, IpaError> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut prefix = String::new();
    let mut tie_open = false;

    for (offset, c) in s.chars().enumerate() {
        match classify(c) {
            CharClass::Separator => {
                if !current.is_empty() {
                    out.push(Phoneme::from_raw(&current));
                    current.clear();
                }
                tie_open = false;
            }
            CharClass::Prefix => prefix.push(c),
            CharClass::Tie | CharClass::Attaching => {
                if current.is_empty() {
                    return Err(IpaError::DanglingMark { offset, ch: c });
                }
                current.push(c);
                tie_open = classify(c) == CharClass::Tie;
            }
            CharClass::Base => {
                if tie_open && prefix.is_empty() {
                    current.push(c);
                } else {
                    if !current.is_empty() {
                        out.push(Phoneme::from_raw(&current));
                    }
                    current = std::mem::take(&mut prefix);
                    current.push(c);
                }
                tie_open = false;
            }
        }
    }
    if !current.is_empty() {
        current.push_str(&prefix);
        out.push(Phoneme::from_raw(&current));
    } else if !prefix.is_empty() {
        match out.last_mut() {
            // trailing prosodic marks stay with the last segment
            Some(last) => *last = Phoneme::from_raw(&format!("{}{}", last.0, prefix)),
            None => {
                let offset = s.chars().count() - prefix.chars().count();
                return Err(IpaError::DanglingMark {
                    offset,
                    ch: prefix.chars().next().unwrap(),
                });
            }
        }
    }
    Ok(PhonemeSequence(out))
}

/// Post-adjustment rules applied to every tokenized sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationPolicy {
    strip_stress: bool,
    strip_voqs: bool,
    strip_diacritics: BTreeSet<char>,
    merge_pairs: BTreeMap<Phoneme, Phoneme>,
}

impl Default for NormalizationPolicy {
    /// Strips stress, VoQS and syllable breaks, and merges the palatalized
    /// sibilants into their postalveolar counterparts (sʲ → ʃ, zʲ → ʒ).
    fn default() -> Self {
        let merges = [("s\u{02B2}", "\u{0283}"), ("z\u{02B2}", "\u{0292}")];
        NormalizationPolicy::new(
            true,
            true,
            [SYLLABLE_BREAK],
            merges.iter().map(|(s, t)| (s.to_string(), t.to_string())),
        )
        .expect("default policy is valid")
    }
}

impl NormalizationPolicy {
    /// Validates and builds a policy.
    ///
    /// Stripped characters must be non-base marks other than tie bars, and
    /// merge targets must be single segments that are neither merge sources
    /// nor altered by stripping, which makes `normalize` idempotent.
    pub fn new(
        strip_stress: bool,
        strip_voqs: bool,
        strip_diacritics: impl IntoIterator<Item = char>,
        merge_pairs: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, IpaError> {
        let strip_diacritics: BTreeSet<char> = strip_diacritics.into_iter().collect();
        for &c in &strip_diacritics {
            match classify(c) {
                CharClass::Prefix | CharClass::Attaching => {}
                CharClass::Tie => {
                    return Err(IpaError::InvalidPolicy(format!(
                        "tie bar U+{:04X} cannot be stripped",
                        c as u32
                    )))
                }
                _ => {
                    return Err(IpaError::InvalidPolicy(format!(
                        "U+{:04X} is not a diacritic or modifier",
                        c as u32
                    )))
                }
            }
        }
        let mut policy = NormalizationPolicy {
            strip_stress,
            strip_voqs,
            strip_diacritics,
            merge_pairs: BTreeMap::new(),
        };

        let mut merges = BTreeMap::new();
        for (src, dst) in merge_pairs {
            let src = policy.strip(&Phoneme::parse(&src)?);
            let dst_raw = Phoneme::parse(&dst)?;
            let dst = policy.strip(&dst_raw);
            if dst != dst_raw {
                return Err(IpaError::InvalidPolicy(format!(
                    "merge target '{dst_raw}' contains stripped marks"
                )));
            }
            if src == dst {
                continue;
            }
            if let Some(prev) = merges.insert(src.clone(), dst.clone()) {
                if prev != dst {
                    return Err(IpaError::InvalidPolicy(format!(
                        "'{src}' merges to both '{prev}' and '{dst}'"
                    )));
                }
            }
        }
        if let Some(dst) = merges.values().find(|d| merges.contains_key(*d)) {
            return Err(IpaError::InvalidPolicy(format!(
                "merge target '{dst}' is also a merge source"
            )));
        }
        policy.merge_pairs = merges;
        Ok(policy)
    }

    /// A policy that leaves segments untouched.
    pub fn identity() -> Self {
        NormalizationPolicy {
            strip_stress: false,
            strip_voqs: false,
            strip_diacritics: BTreeSet::new(),
            merge_pairs: BTreeMap::new(),
        }
    }

    pub fn strip_stress(&self) -> bool {
        self.strip_stress
    }

    pub fn strip_voqs(&self) -> bool {
        self.strip_voqs
    }

    pub fn strip_diacritics(&self) -> &BTreeSet<char> {
        &self.strip_diacritics
    }

    pub fn merge_pairs(&self) -> &BTreeMap<Phoneme, Phoneme> {
        &self.merge_pairs
    }

    fn is_stripped(&self, c: char) -> bool {
        (self.strip_stress && (c == PRIMARY_STRESS || c == SECONDARY_STRESS))
            || (self.strip_voqs && VOQS_MARKS.contains(&c))
            || self.strip_diacritics.contains(&c)
    }

    fn strip(&self, p: &Phoneme) -> Phoneme {
        if !p.0.nfd().any(|c| self.is_stripped(c)) {
            return p.clone();
        }
        let kept: String = p.0.nfd().filter(|&c| !self.is_stripped(c)).collect();
        Phoneme(kept.nfc().collect())
    }

    /// Strips configured marks from each segment, then applies the merge table once.
    pub fn normalize(&self, seq: &PhonemeSequence) -> PhonemeSequence {
        seq.iter()
            .map(|p| {
                let stripped = self.strip(p);
                match self.merge_pairs.get(&stripped) {
                    Some(target) => target.clone(),
                    None => stripped,
                }
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IpaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IpaError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses the policy file format:
    ///
    /// ```text
    /// strip_stress = true
    /// strip_voqs = true
    /// strip_diacritics = . U+0303
    /// [merge]
    /// sʲ<TAB>ʃ
    /// ```
    ///
    /// Keys left out take their default values; a `[merge]` section, when
    /// present, replaces the default merge table.
    pub fn parse(text: &str) -> Result<Self, IpaError> {
        let defaults = NormalizationPolicy::default();
        let mut strip_stress = defaults.strip_stress;
        let mut strip_voqs = defaults.strip_voqs;
        let mut strip_diacritics = defaults.strip_diacritics.clone();
        let mut merges: Option<Vec<(String, String)>> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| IpaError::Policy { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed.starts_with('[') {
                if trimmed == "[merge]" {
                    merges.get_or_insert_with(Vec::new);
                    continue;
                }
                return Err(err(format!("unknown section {trimmed}")));
            }
            if let Some(pairs) = merges.as_mut() {
                let mut fields = raw.split('\t').map(str::trim);
                match (fields.next(), fields.next(), fields.next()) {
                    (Some(s), Some(t), None) if !s.is_empty() && !t.is_empty() => {
                        pairs.push((s.to_string(), t.to_string()))
                    }
                    _ => return Err(err("merge lines must be 'source<TAB>target'".into())),
                }
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found {trimmed:?}")))?;
            let value = value.trim();
            match key.trim() {
                "strip_stress" => strip_stress = parse_bool(value).map_err(err)?,
                "strip_voqs" => strip_voqs = parse_bool(value).map_err(err)?,
                "strip_diacritics" => {
                    strip_diacritics = value
                        .split_whitespace()
                        .map(parse_char)
                        .collect::<Result<_, _>>()
                        .map_err(err)?;
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        let merges = merges.unwrap_or_else(|| {
            defaults
                .merge_pairs
                .iter()
                .map(|(s, t)| (s.0.clone(), t.0.clone()))
                .collect()
        });
        NormalizationPolicy::new(strip_stress, strip_voqs, strip_diacritics, merges)
    }

    /// Serializes to the policy file format; `parse(to_file_string())` round-trips.
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "strip_stress = {}\nstrip_voqs = {}\nstrip_diacritics =",
            self.strip_stress, self.strip_voqs
        );
        for c in &self.strip_diacritics {
            out.push_str(&format!(" U+{:04X}", *c as u32));
        }
        out.push_str("\n[merge]\n");
        for (s, t) in &self.merge_pairs {
            out.push_str(&format!("{s}\t{t}\n"));
        }
        out
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, found '{v}'")),
    }
}

fn parse_char(token: &str) -> Result<char, String> {
    if let Some(hex) = token
        .strip_prefix("U+")
        .or_else(|| token.strip_prefix("u+"))
    {
        return u32::from_str_radix(hex, 16)
            .ok()
            .and_then(char::from_u32)
            .ok_or_else(|| format!("invalid code point '{token}'"));
    }
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(format!("expected one character or U+XXXX, found '{token}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(s: &str) -> Vec<String> {
        tokenize_ipa(s)
            .unwrap()
            .iter()
            .map(|p| p.as_str().to_string())
            .collect()
    }

    #[test]
    fn modifiers_and_length_attach() {
        assert_eq!(segs("tʲaː"), ["tʲ", "aː"]);
        assert_eq!(segs("kʰa pʼ"), ["kʰ", "a", "pʼ"]);
    }

    #[test]
    fn tie_bar_binds_two_bases() {
        assert_eq!(segs("t͡ʃa"), ["t͡ʃ", "a"]);
        assert_eq!(segs("d͜ʒ"), ["d͜ʒ"]);
        // whitespace closes a pending tie
        assert_eq!(segs("t͡ ʃ"), ["t͡", "ʃ"]);
    }

    #[test]
    fn stress_attaches_forward() {
        assert_eq!(segs("ˈsʲum"), ["ˈsʲ", "u", "m"]);
        assert_eq!(segs("a.ˌba"), ["a", ".ˌb", "a"]);
        assert_eq!(segs("aˈ"), ["aˈ"]);
    }

    #[test]
    fn leading_mark_is_an_error() {
        assert_eq!(
            tokenize_ipa("\u{0303}a"),
            Err(IpaError::DanglingMark {
                offset: 0,
                ch: '\u{0303}'
            })
        );
        assert_eq!(
            tokenize_ipa("a ʲb"),
            Err(IpaError::DanglingMark {
                offset: 2, ch: 'ʲ'
            })
        );
        assert!(tokenize_ipa("ˈ").is_err());
    }

    #[test]
    fn segments_are_nfc() {
        let decomposed = tokenize_ipa("a\u{0303}").unwrap();
        let composed = tokenize_ipa("\u{00E3}").unwrap();
        assert_eq!(decomposed, composed);
    }

    #[test]
    fn default_policy_strips_stress_and_merges() {
        let p = NormalizationPolicy::default();
        let out = p.normalize(&tokenize_ipa("ˈsʲum").unwrap());
        assert_eq!(out.to_string(), "ʃ u m");
        let z = p.normalize(&tokenize_ipa("zʲ").unwrap());
        assert_eq!(z.to_string(), "ʒ");
        assert_eq!(
            p.normalize(&PhonemeSequence::default()),
            PhonemeSequence::default()
        );
    }

    #[test]
    fn length_kept_voqs_removed() {
        let p = NormalizationPolicy::default();
        let out = p.normalize(&tokenize_ipa("aː a\u{0324} e\u{0330}").unwrap());
        assert_eq!(out.to_string(), "aː a e");
        let keep = NormalizationPolicy::new(false, false, [], []).unwrap();
        assert_eq!(
            keep.normalize(&tokenize_ipa("ˈa\u{0324}").unwrap())
                .to_string(),
            "ˈa\u{0324}"
        );
    }

    #[test]
    fn unknown_modifiers_are_retained() {
        let p = NormalizationPolicy::default();
        assert_eq!(p.normalize(&tokenize_ipa("kʷ").unwrap()).to_string(), "kʷ");
    }

    #[test]
    fn invalid_policies_rejected() {
        let chain = vec![("a".to_string(), "b".to_string()), ("b".into(), "c".into())];
        assert!(NormalizationPolicy::new(true, true, [], chain).is_err());
        assert!(NormalizationPolicy::new(true, true, ['x'], []).is_err());
        assert!(NormalizationPolicy::new(true, true, ['\u{0361}'], []).is_err());
        let stripped_target = vec![("a".to_string(), "ˈb".to_string())];
        assert!(NormalizationPolicy::new(true, true, [], stripped_target).is_err());
    }

    #[test]
    fn policy_file_round_trip() {
        let text = "# test\nstrip_stress = false\nstrip_diacritics = . U+0303\n[merge]\nsʲ\tʃ\n";
        let p = NormalizationPolicy::parse(text).unwrap();
        assert!(!p.strip_stress());
        assert!(p.strip_voqs());
        assert!(p.strip_diacritics().contains(&'\u{0303}'));
        assert_eq!(p.merge_pairs().len(), 1);
        assert_eq!(NormalizationPolicy::parse(&p.to_file_string()).unwrap(), p);
        assert_eq!(
            NormalizationPolicy::parse("").unwrap(),
            NormalizationPolicy::default()
        );
    }

    #[test]
    fn policy_file_errors_name_line() {
        match NormalizationPolicy::parse("strip_stress = maybe\n") {
            Err(IpaError::Policy { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match NormalizationPolicy::parse("[merge]\nsʲ ʃ\n") {
            Err(IpaError::Policy { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
