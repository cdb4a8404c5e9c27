use super::bpe::{encode_unit, pretokenize};
use super::vocab::{Token, Vocabulary};
use super::{Document, EntityKind, EntitySpan, Segment, TokenSequence};
use crate::error::{Error, Result};

/// Encodes one entity: the opening identifier, one token per atom, symbol or
/// residue, then the closing identifier.
///
/// Error offsets are byte positions in the enclosing document.
///
/// Molecules match atoms longest-first (so `Cl` beats `C`) and fall back to
/// single-character molecule symbols. Proteins map strictly one residue per
/// character.
pub fn encode_entity(span: &EntitySpan, vocab: &Vocabulary) -> Result<TokenSequence> {
    if span.text.is_empty() {
        return Err(Error::Markup(format!("empty {} span at byte {}", span.kind.name(), span.start)));
    }
    let ids = vocab.identifiers();
    let (open, close) = match span.kind {
        EntityKind::Molecule => (&ids.mol_open, &ids.mol_close),
        EntityKind::Protein => (&ids.prot_open, &ids.prot_close),
    };
    let mut out = vec![vocab.special_id(open).expect("identifier in vocabulary")];
    let (offsets, chars): (Vec<usize>, Vec<char>) = span.text.char_indices().unzip();
    let mut i = 0;
    while i < chars.len() {
        let unrepresentable = || Error::Unrepresentable {
            kind: span.kind.name(),
            offset: span.start + offsets[i],
            ch: chars[i],
        };
        match span.kind {
            EntityKind::Protein => {
                out.push(vocab.amino_id(chars[i]).ok_or_else(unrepresentable)?);
                i += 1;
            }
            EntityKind::Molecule => {
                let longest = vocab.max_atom_chars().min(chars.len() - i);
                let atom = (1..=longest).rev().find_map(|n| {
                    let s: String = chars[i..i + n].iter().collect();
                    vocab.atom_id(&s).map(|id| (id, n))
                });
                match atom {
                    Some((id, n)) => {
                        out.push(id);
                        i += n;
                    }
                    None => {
                        out.push(vocab.mol_symbol_id(chars[i]).ok_or_else(unrepresentable)?);
                        i += 1;
                    }
                }
            }
        }
    }
    out.push(vocab.special_id(close).expect("identifier in vocabulary"));
    Ok(TokenSequence::new(out))
}

/// Encodes prose with BPE and entity spans with [`encode_entity`], in
/// document order. Prose never fails: unknown characters become byte tokens.
pub fn encode(doc: &Document, vocab: &Vocabulary) -> Result<TokenSequence> {
    doc.validate()?;
    let mut ids = Vec::new();
    for seg in doc.segments() {
        match seg {
            Segment::Prose(p) => {
                for unit in pretokenize(p) {
                    encode_unit(vocab, unit, &mut ids);
                }
            }
            Segment::Entity(span) => ids.extend(encode_entity(span, vocab)?.ids),
        }
    }
    Ok(TokenSequence::new(ids))
}

/// Parses the inline corpus format and encodes it.
pub fn encode_marked(text: &str, vocab: &Vocabulary) -> Result<TokenSequence> {
    encode(&Document::parse_marked(text, vocab.identifiers())?, vocab)
}

/// Renders ids back to text. Identifier tokens render as their own strings,
/// so `decode(encode(doc))` reproduces the marked-up form of `doc`.
pub fn decode(seq: &TokenSequence, vocab: &Vocabulary) -> Result<String> {
    let mut out = String::new();
    let mut bytes: Vec<u8> = Vec::new();
    let flush = |bytes: &mut Vec<u8>, out: &mut String| {
        if !bytes.is_empty() {
            out.push_str(&String::from_utf8_lossy(bytes));
            bytes.clear();
        }
    };
    for &id in &seq.ids {
        match vocab.token(id).ok_or(Error::UnknownId(id))? {
            Token::Byte(b) => bytes.push(*b),
            tok => {
                flush(&mut bytes, &mut out);
                out.push_str(&tok.surface());
            }
        }
    }
    flush(&mut bytes, &mut out);
    Ok(out)
}
