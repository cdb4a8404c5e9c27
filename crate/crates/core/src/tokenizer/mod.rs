//! Entity-aware scientific tokenizer.
//!
//! Prose is segmented with byte-pair merges learned from a corpus. Molecules
//! and protein sequences are wrapped in identifier tokens and encoded one atom
//! or residue per token, using reserved ids that BPE never touches.
//!
//! Corpus files mark entities inline with the identifier strings themselves,
//! e.g. `glycine is [START_MOL]C(C(=O)O)N[END_MOL]`.

mod bpe;
mod codec;
pub mod tables;
mod vocab;

use serde::{Deserialize, Serialize};

pub use bpe::train_bpe;
pub use codec::{decode, encode, encode_entity, encode_marked};
pub use vocab::{Identifiers, ReservedTables, Token, Vocabulary};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Molecule,
    Protein,
}

impl EntityKind {
    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Molecule => "molecule",
            EntityKind::Protein => "protein",
        }
    }
}

/// An entity inside a [`Document`]. `start..end` is a byte range of the
/// document text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub kind: EntityKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Plain text plus explicitly supplied entity spans.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub text: String,
    pub spans: Vec<EntitySpan>,
}

impl Document {
    pub fn prose(text: impl Into<String>) -> Self {
        Document {
            text: text.into(),
            spans: Vec::new(),
        }
    }

    /// Adds a span covering `text[start..end]`.
    pub fn with_span(mut self, kind: EntityKind, start: usize, end: usize) -> Self {
        let text = self.text[start..end].to_string();
        self.spans.push(EntitySpan {
            kind,
            text,
            start,
            end,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev_end = 0;
        for s in &self.spans {
            if s.start < prev_end || s.end < s.start || s.end > self.text.len() {
                return Err(Error::Markup(format!(
                    "span {}..{} overlaps, is out of order, or leaves the document",
                    s.start, s.end
                )));
            }
            if self.text.get(s.start..s.end) != Some(s.text.as_str()) {
                return Err(Error::Markup(format!(
                    "span {}..{} text does not match the document",
                    s.start, s.end
                )));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    /// Alternating prose and entity segments in document order.
    pub(crate) fn segments(&self) -> Vec<Segment<'_>> {
        let mut out = Vec::new();
        let mut pos = 0;
        for s in &self.spans {
            if s.start > pos {
                out.push(Segment::Prose(&self.text[pos..s.start]));
            }
            out.push(Segment::Entity(s));
            pos = s.end;
        }
        if pos < self.text.len() {
            out.push(Segment::Prose(&self.text[pos..]));
        }
        out
    }

    /// Parses the inline corpus format, stripping identifier strings into
    /// spans. Unbalanced or nested identifiers are rejected.
    pub fn parse_marked(marked: &str, ids: &Identifiers) -> Result<Self> {
        let markers = [
            (ids.mol_open.as_str(), ids.mol_close.as_str(), EntityKind::Molecule),
            (ids.prot_open.as_str(), ids.prot_close.as_str(), EntityKind::Protein),
        ];
        let mut doc = Document::default();
        let mut rest = marked;
        let mut consumed = 0;
        loop {
            let next = markers
                .iter()
                .flat_map(|(o, c, k)| {
                    [
                        rest.find(o).map(|p| (p, *o, Some((*c, *k)))),
                        rest.find(c).map(|p| (p, *c, None)),
                    ]
                })
                .flatten()
                .min_by_key(|(p, m, _)| (*p, std::cmp::Reverse(m.len())));
            let Some((pos, marker, open)) = next else {
                doc.text.push_str(rest);
                break;
            };
            let Some((close, kind)) = open else {
                return Err(Error::Markup(format!(
                    "closing identifier {marker} at byte {} without an opening one",
                    consumed + pos
                )));
            };
            doc.text.push_str(&rest[..pos]);
            let body_start = pos + marker.len();
            let body = &rest[body_start..];
            let Some(end) = body.find(close) else {
                return Err(Error::Markup(format!(
                    "identifier {marker} at byte {} is never closed",
                    consumed + pos
                )));
            };
            let inner = &body[..end];
            if let Some(nested) = ids.all().iter().find(|m| inner.contains(**m)) {
                return Err(Error::Markup(format!(
                    "identifier {nested} nested inside {} span",
                    kind.name()
                )));
            }
            let start = doc.text.len();
            doc.text.push_str(inner);
            doc.spans.push(EntitySpan {
                kind,
                text: inner.to_string(),
                start,
                end: doc.text.len(),
            });
            let advance = body_start + end + close.len();
            consumed += advance;
            rest = &rest[advance..];
        }
        Ok(doc)
    }

    /// Inverse of [`Document::parse_marked`].
    pub fn to_marked(&self, ids: &Identifiers) -> String {
        let mut out = String::new();
        for seg in self.segments() {
            match seg {
                Segment::Prose(p) => out.push_str(p),
                Segment::Entity(s) => {
                    let (o, c) = match s.kind {
                        EntityKind::Molecule => (&ids.mol_open, &ids.mol_close),
                        EntityKind::Protein => (&ids.prot_open, &ids.prot_close),
                    };
                    out.push_str(o);
                    out.push_str(&s.text);
                    out.push_str(c);
                }
            }
        }
        out
    }
}

pub(crate) enum Segment<'a> {
    Prose(&'a str),
    Entity(&'a EntitySpan),
}

/// Token ids for one document.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        TokenSequence { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
