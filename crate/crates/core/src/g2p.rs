//! Table-driven grapheme-to-phoneme transduction.
//!
//! Rules are matched greedily left to right: at each position the longest
//! grapheme whose contexts match wins, then the higher priority, then the
//! earlier rule in file order.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::ipa::{tokenize_ipa, IpaError, NormalizationPolicy, PhonemeSequence};

#[derive(Debug, Error)]
pub enum G2pError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("rule line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule line {line}: duplicate rule for grapheme '{grapheme}' with the same contexts")]
    DuplicateRule { line: usize, grapheme: String },
    #[error("ruleset '{0}' has no rules")]
    Empty(String),
    #[error("unmatched grapheme {grapheme:?} at offset {offset}")]
    Unmatched { offset: usize, grapheme: char },
    #[error("rule output at offset {offset} is not valid IPA: {source}")]
    Output { offset: usize, source: IpaError },
}

/// What to do with a character no rule covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnmatchedMode {
    #[default]
    Error,
    Skip,
    Passthrough,
}

impl FromStr for UnmatchedMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(Self::Error),
            "skip" => Ok(Self::Skip),
            "passthrough" => Ok(Self::Passthrough),
            _ => Err(format!("unknown unmatched-grapheme mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ContextItem {
    /// Text edge or whitespace.
    Boundary,
    Char(char),
    Class {
        negated: bool,
        chars: BTreeSet<char>,
    },
}

impl ContextItem {
    fn matches(&self, c: Option<char>) -> bool {
        match (self, c) {
            (ContextItem::Boundary, None) => true,
            (ContextItem::Boundary, Some(c)) => c.is_whitespace(),
            (ContextItem::Char(want), Some(c)) => *want == c,
            (ContextItem::Class { negated, chars }, Some(c)) => {
                !c.is_whitespace() && chars.contains(&c) != *negated
            }
            _ => false,
        }
    }
}

/// A context pattern: a sequence of literal characters, classes like
/// `[aeiou]` or `[^aeiou]`, and `#` for a word boundary. Left contexts must
/// end immediately before the grapheme; right contexts start immediately
/// after it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Context {
    items: Vec<ContextItem>,
    source: String,
}

impl Context {
    pub fn parse(pattern: &str) -> Result<Self, String> {
        let mut items = Vec::new();
        let mut chars = pattern.chars();
        while let Some(c) = chars.next() {
            match c {
                '#' => items.push(ContextItem::Boundary),
                '[' => {
                    let mut set = BTreeSet::new();
                    let mut negated = false;
                    let mut closed = false;
                    let mut first = true;
                    for c in chars.by_ref() {
                        match c {
                            ']' => {
                                closed = true;
                                break;
                            }
                            '^' if first => negated = true,
                            c => {
                                set.insert(c);
                            }
                        }
                        first = false;
                    }
                    if !closed {
                        return Err(format!("unclosed class in context '{pattern}'"));
                    }
                    if set.is_empty() {
                        return Err(format!("empty class in context '{pattern}'"));
                    }
                    items.push(ContextItem::Class {
                        negated,
                        chars: set,
                    });
                }
                ']' => return Err(format!("stray ']' in context '{pattern}'")),
                c if c.is_whitespace() => {
                    return Err(format!("whitespace in context '{pattern}'; use '#'"))
                }
                c => items.push(ContextItem::Char(c)),
            }
        }
        Ok(Context {
            items,
            source: pattern.to_string(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn lowercased(&self) -> Self {
        let fold = |c: char| c.to_lowercase().next().unwrap_or(c);
        let items = self
            .items
            .iter()
            .map(|item| match item {
                ContextItem::Char(c) => ContextItem::Char(fold(*c)),
                ContextItem::Class { negated, chars } => ContextItem::Class {
                    negated: *negated,
                    chars: chars.iter().map(|&c| fold(c)).collect(),
                },
                ContextItem::Boundary => ContextItem::Boundary,
            })
            .collect();
        Context {
            items,
            source: self.source.clone(),
        }
    }

    fn matches_before(&self, text: &[char], end: usize) -> bool {
        let mut pos = end as isize;
        for item in self.items.iter().rev() {
            let c = (pos > 0).then(|| text[pos as usize - 1]);
            if !item.matches(c) {
                return false;
            }
            if c.is_some() {
                pos -= 1;
            }
        }
        true
    }

    fn matches_after(&self, text: &[char], start: usize) -> bool {
        let mut pos = start;
        for item in &self.items {
            let c = text.get(pos).copied();
            if !item.matches(c) {
                return false;
            }
            if c.is_some() {
                pos += 1;
            }
        }
        true
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct G2pRule {
    pub grapheme: String,
    pub output: String,
    pub left: Context,
    pub right: Context,
    pub priority: i32,
}

impl G2pRule {
    pub fn new(grapheme: &str, output: &str) -> Self {
        G2pRule {
            grapheme: grapheme.to_string(),
            output: output.to_string(),
            left: Context::default(),
            right: Context::default(),
            priority: 0,
        }
    }
}

/// One step of the greedy left-to-right segmentation of the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch {
    /// Character offset into the original (un-normalized) text.
    pub offset: usize,
    /// Character offset into the preprocessed text.
    pub start: usize,
    pub len: usize,
    /// Index of the applied rule, `None` for an unmatched character.
    pub rule: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Ruleset {
    pub language_code: String,
    rules: Vec<G2pRule>,
    /// Rule graphemes as char vectors, kept aligned with `rules`.
    graphemes: Vec<Vec<char>>,
    case_fold: bool,
    punctuation_strip: bool,
    protected: HashSet<char>,
}

impl Ruleset {
    pub fn new(
        language_code: impl Into<String>,
        rules: Vec<G2pRule>,
        case_fold: bool,
        punctuation_strip: bool,
    ) -> Result<Self, G2pError> {
        let language_code = language_code.into();
        if rules.is_empty() {
            return Err(G2pError::Empty(language_code));
        }
        let mut seen = HashSet::new();
        let mut graphemes = Vec::with_capacity(rules.len());
        let mut normalized = Vec::with_capacity(rules.len());
        for (idx, mut rule) in rules.into_iter().enumerate() {
            if rule.grapheme.is_empty() {
                return Err(G2pError::Parse {
                    line: idx + 1,
                    message: "empty grapheme".into(),
                });
            }
            rule.grapheme = prepare(&rule.grapheme, case_fold);
            if case_fold {
                rule.left = rule.left.lowercased();
                rule.right = rule.right.lowercased();
            }
            let key = (rule.grapheme.clone(), rule.left.clone(), rule.right.clone());
            if !seen.insert(key) {
                return Err(G2pError::DuplicateRule {
                    line: idx + 1,
                    grapheme: rule.grapheme,
                });
            }
            graphemes.push(rule.grapheme.chars().collect());
            normalized.push(rule);
        }
        let protected = normalized.iter().flat_map(|r| r.grapheme.chars()).collect();
        Ok(Ruleset {
            language_code,
            rules: normalized,
            graphemes,
            case_fold,
            punctuation_strip,
            protected,
        })
    }

    pub fn rules(&self) -> &[G2pRule] {
        &self.rules
    }

    pub fn case_fold(&self) -> bool {
        self.case_fold
    }

    pub fn punctuation_strip(&self) -> bool {
        self.punctuation_strip
    }

    /// Loads a rule file; the language code defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, G2pError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| G2pError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, &stem)
    }

    /// Parses `grapheme<TAB>ipa<TAB>left<TAB>right<TAB>priority` lines.
    ///
    /// Lines starting with `#` are comments, except `#!key = value`
    /// directives setting `lang`, `case_fold` and `punctuation_strip`.
    pub fn parse(text: &str, default_code: &str) -> Result<Self, G2pError> {
        let mut code = default_code.to_string();
        let mut case_fold = true;
        let mut punctuation_strip = true;
        let mut rules = Vec::new();
        let mut lines = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let perr = |message: String| G2pError::Parse { line, message };
            if let Some(directive) = raw.strip_prefix("#!") {
                let (k, v) = directive
                    .split_once('=')
                    .ok_or_else(|| perr(format!("malformed directive {raw:?}")))?;
                let v = v.trim();
                let flag = || match v {
                    "true" => Ok(true),
                    "false" => Ok(false),
                    _ => Err(perr(format!("expected true/false, found '{v}'"))),
                };
                match k.trim() {
                    "lang" => code = v.to_string(),
                    "case_fold" => case_fold = flag()?,
                    "punctuation_strip" => punctuation_strip = flag()?,
                    other => return Err(perr(format!("unknown directive '{other}'"))),
                }
                continue;
            }
            if raw.starts_with('#') || raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() > 5 {
                return Err(perr(format!(
                    "expected at most 5 fields, found {}",
                    fields.len()
                )));
            }
            let field = |i: usize| fields.get(i).map_or("", |f| f.trim());
            let grapheme = field(0);
            if grapheme.is_empty() {
                return Err(perr("empty grapheme".into()));
            }
            let priority = match field(4) {
                "" => 0,
                p => p
                    .parse()
                    .map_err(|_| perr(format!("invalid priority '{p}'")))?,
            };
            rules.push(G2pRule {
                grapheme: grapheme.to_string(),
                output: field(1).to_string(),
                left: Context::parse(field(2)).map_err(perr)?,
                right: Context::parse(field(3)).map_err(perr)?,
                priority,
            });
            lines.push(line);
        }
        Ruleset::new(code, rules, case_fold, punctuation_strip).map_err(|e| match e {
            // report file lines rather than rule indices
            G2pError::DuplicateRule { line, grapheme } => G2pError::DuplicateRule {
                line: lines[line - 1],
                grapheme,
            },
            G2pError::Parse { line, message } => G2pError::Parse {
                line: lines[line - 1],
                message,
            },
            other => other,
        })
    }

    /// Applies case folding and punctuation stripping. Returns the prepared
    /// characters and, for each, its offset in the original text.
    fn preprocess(&self, text: &str) -> (Vec<char>, Vec<usize>) {
        let mut chars = Vec::new();
        let mut offsets = Vec::new();
        for (offset, c) in text.nfc().enumerate() {
            let keep = |c: char| {
                !self.punctuation_strip
                    || self.protected.contains(&c)
                    || c.is_alphabetic()
                    || c.is_whitespace()
                    || is_combining_mark(c)
            };
            if self.case_fold {
                for lc in c.to_lowercase() {
                    if keep(lc) {
                        chars.push(lc);
                        offsets.push(offset);
                    }
                }
            } else if keep(c) {
                chars.push(c);
                offsets.push(offset);
            }
        }
        (chars, offsets)
    }

    fn best_rule_at(&self, text: &[char], pos: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (idx, g) in self.graphemes.iter().enumerate() {
            let end = pos + g.len();
            if end > text.len() || text[pos..end] != g[..] {
                continue;
            }
            let rule = &self.rules[idx];
            if !rule.left.matches_before(text, pos) || !rule.right.matches_after(text, end) {
                continue;
            }
            best = match best {
                Some(b)
                    if (self.graphemes[b].len(), self.rules[b].priority)
                        >= (g.len(), rule.priority) =>
                {
                    Some(b)
                }
                _ => Some(idx),
            };
        }
        best
    }

    /// Greedy segmentation of `text` into rule applications. Whitespace is
    /// skipped and never appears in the result.
    pub fn segment(&self, text: &str) -> Vec<RuleMatch> {
        let (chars, offsets) = self.preprocess(text);
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            if chars[pos].is_whitespace() {
                pos += 1;
                continue;
            }
            let (len, rule) = match self.best_rule_at(&chars, pos) {
                Some(idx) => (self.graphemes[idx].len(), Some(idx)),
                None => (1, None),
            };
            out.push(RuleMatch {
                offset: offsets[pos],
                start: pos,
                len,
                rule,
            });
            pos += len;
        }
        out
    }

    /// Converts orthographic text to a normalized phoneme sequence.
    pub fn transliterate(
        &self,
        text: &str,
        policy: &NormalizationPolicy,
        mode: UnmatchedMode,
    ) -> Result<PhonemeSequence, G2pError> {
        let (chars, _) = self.preprocess(text);
        let mut phonemes = Vec::new();
        let mut word = String::new();
        let mut word_start = 0;
        let mut last_end = 0;

        let mut flush = |word: &mut String, offset: usize| -> Result<(), G2pError> {
            if !word.is_empty() {
                let seq =
                    tokenize_ipa(word).map_err(|source| G2pError::Output { offset, source })?;
                phonemes.extend(seq.0);
                word.clear();
            }
            Ok(())
        };

        for m in self.segment(text) {
            if m.start != last_end && chars[last_end..m.start].iter().any(|c| c.is_whitespace()) {
                flush(&mut word, word_start)?;
            }
            if word.is_empty() {
                word_start = m.offset;
            }
            last_end = m.start + m.len;
            match m.rule {
                Some(idx) => word.push_str(&self.rules[idx].output),
                None => match mode {
                    UnmatchedMode::Error => {
                        return Err(G2pError::Unmatched {
                            offset: m.offset,
                            grapheme: chars[m.start],
                        })
                    }
                    UnmatchedMode::Skip => {}
                    UnmatchedMode::Passthrough => word.push(chars[m.start]),
                },
            }
        }
        flush(&mut word, word_start)?;
        Ok(policy.normalize(&PhonemeSequence(phonemes)))
    }
}

fn prepare(s: &str, case_fold: bool) -> String {
    let nfc: String = s.nfc().collect();
    if case_fold {
        nfc.to_lowercase()
    } else {
        nfc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Ruleset {
        Ruleset::parse("ch\tt͡ʃ\nc\tk\nh\th\na\ta\n", "toy").unwrap()
    }

    fn run(rs: &Ruleset, text: &str, mode: UnmatchedMode) -> Result<String, G2pError> {
        rs.transliterate(text, &NormalizationPolicy::identity(), mode)
            .map(|s| s.to_string())
    }

    #[test]
    fn longest_match_wins() {
        assert_eq!(run(&toy(), "cha", UnmatchedMode::Error).unwrap(), "t͡ʃ a");
        assert_eq!(run(&toy(), "", UnmatchedMode::Error).unwrap(), "");
    }

    #[test]
    fn unmatched_modes() {
        let rs = toy();
        assert_eq!(run(&rs, "q", UnmatchedMode::Skip).unwrap(), "");
        match run(&rs, "q", UnmatchedMode::Error) {
            Err(G2pError::Unmatched { offset, grapheme }) => {
                assert_eq!(offset, 0);
                assert_eq!(grapheme, 'q');
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            run(&rs, "aqa", UnmatchedMode::Passthrough).unwrap(),
            "a q a"
        );
    }

    #[test]
    fn case_fold_and_punctuation() {
        let rs = toy();
        assert_eq!(
            run(&rs, "Cha, ha!", UnmatchedMode::Error).unwrap(),
            "t͡ʃ a h a"
        );
        assert_eq!(run(&rs, "a1a", UnmatchedMode::Error).unwrap(), "a a");
        let strict = Ruleset::parse(
            "#!case_fold = false\n#!punctuation_strip = false\na\ta\n",
            "x",
        )
        .unwrap();
        assert!(run(&strict, "A", UnmatchedMode::Error).is_err());
        assert!(run(&strict, "a,", UnmatchedMode::Error).is_err());
    }

    #[test]
    fn priority_breaks_ties_then_order() {
        let rs = Ruleset::parse("a\te\t\t\t\na\to\t#\t\t5\n", "x").unwrap();
        assert_eq!(run(&rs, "a a", UnmatchedMode::Error).unwrap(), "o o");
        let rs = Ruleset::parse("a\te\t\t\t\na\to\t#\t\t\n", "x").unwrap();
        // same length, same priority: earlier rule
        assert_eq!(run(&rs, "a", UnmatchedMode::Error).unwrap(), "e");
    }

    #[test]
    fn contexts() {
        let rules = "k\tk\nk\tx\t[aeiou]\t\t1\nk\tq\t\t#\t2\na\ta\ni\ti\n";
        let rs = Ruleset::parse(rules, "x").unwrap();
        assert_eq!(run(&rs, "ka", UnmatchedMode::Error).unwrap(), "k a");
        assert_eq!(run(&rs, "aka", UnmatchedMode::Error).unwrap(), "a x a");
        assert_eq!(run(&rs, "ik", UnmatchedMode::Error).unwrap(), "i q");
        let neg = Ruleset::parse("n\tn\nn\tŋ\t\t[^aeiou]\t1\na\ta\ng\tg\n", "x").unwrap();
        assert_eq!(
            run(&neg, "nga na", UnmatchedMode::Error).unwrap(),
            "ŋ g a n a"
        );
        assert_eq!(run(&neg, "an", UnmatchedMode::Error).unwrap(), "a n");
    }

    #[test]
    fn silent_letters_and_multi_segment_output() {
        let rs = Ruleset::parse("h\t\nx\tks\na\ta\n", "x").unwrap();
        assert_eq!(run(&rs, "haxa", UnmatchedMode::Error).unwrap(), "a k s a");
    }

    #[test]
    fn output_attaches_within_word_only() {
        let rs = Ruleset::parse("a\ta\n'\tʼ\n", "x").unwrap();
        assert_eq!(run(&rs, "a'", UnmatchedMode::Error).unwrap(), "aʼ");
        assert!(matches!(
            run(&rs, "a '", UnmatchedMode::Error),
            Err(G2pError::Output { offset: 2, .. })
        ));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            Ruleset::parse("# nothing\n", "x"),
            Err(G2pError::Empty(_))
        ));
        match Ruleset::parse("a\ta\n\nb\tb\na\te\n", "x") {
            Err(G2pError::DuplicateRule { line, grapheme }) => {
                assert_eq!(line, 4);
                assert_eq!(grapheme, "a");
            }
            other => panic!("{other:?}"),
        }
        // same grapheme, different context is fine
        assert_eq!(
            Ruleset::parse("a\ta\na\te\t#\n", "x")
                .unwrap()
                .rules()
                .len(),
            2
        );
        assert!(matches!(
            Ruleset::parse("a\ta\t[b\n", "x"),
            Err(G2pError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Ruleset::parse("a\ta\t\t\tx\n", "x"),
            Err(G2pError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn directives() {
        let rs = Ruleset::parse("#!lang = tt\na\ta\n", "file").unwrap();
        assert_eq!(rs.language_code, "tt");
        assert_eq!(toy().language_code, "toy");
        assert_eq!(toy().rules().len(), 4);
    }
}
