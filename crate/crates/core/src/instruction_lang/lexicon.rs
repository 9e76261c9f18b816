use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::read_to_string;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Det,
    Adj,
    Noun,
    Pron,
    Verb,
    Adp,
    Adv,
    Conj,
    Part,
    Num,
}

impl Tag {
    pub fn parse(s: &str) -> Option<Tag> {
        Some(match s {
            "DET" => Tag::Det,
            "ADJ" => Tag::Adj,
            "NOUN" => Tag::Noun,
            "PRON" => Tag::Pron,
            "VERB" => Tag::Verb,
            "ADP" => Tag::Adp,
            "ADV" => Tag::Adv,
            "CONJ" => Tag::Conj,
            "PART" => Tag::Part,
            "NUM" => Tag::Num,
            _ => return None,
        })
    }
}

/// Token to possible part-of-speech tags.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    tags: HashMap<String, Vec<Tag>>,
}

const BUILTIN: &str = include_str!("../../data/lexicon.tsv");

impl Lexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped lexicon parses")
    }

    /// Lines of `token<TAB>TAG[|TAG...]`; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tags = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tok, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid("lexicon", format!("line {}: expected token<TAB>tag", n + 1)))?;
            let parsed = tag
                .split('|')
                .map(|t| Tag::parse(t.trim()).ok_or_else(|| Error::invalid("lexicon", format!("line {}: unknown tag {t:?}", n + 1))))
                .collect::<Result<Vec<_>>>()?;
            tags.insert(tok.trim().to_lowercase(), parsed);
        }
        Ok(Lexicon { tags })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    pub fn insert(&mut self, token: &str, tags: Vec<Tag>) {
        self.tags.insert(token.to_lowercase(), tags);
    }

    /// Unknown tokens have no tags.
    pub fn tags(&self, token: &str) -> &[Tag] {
        self.tags.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn has(&self, token: &str, tag: Tag) -> bool {
        self.tags(token).contains(&tag)
    }

    /// Sorted tokens.
    pub fn tokens(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.tags.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_vocabulary() {
        let l = Lexicon::builtin();
        assert!(l.len() > 300);
        assert!(l.has("box", Tag::Noun));
        assert_eq!(l.tags("left"), &[Tag::Adj, Tag::Noun, Tag::Adv]);
        assert!(l.tags("zzz").is_empty());
    }

    #[test]
    fn bad_lines_rejected() {
        assert!(Lexicon::parse("box NOUN").is_err());
        assert!(Lexicon::parse("box\tNOUNISH").is_err());
    }
}
