use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tables;
use crate::error::{Error, Result};

pub const VOCAB_FORMAT: &str = "scidfm-vocab";
pub const VOCAB_VERSION: u32 = 1;

/// Identifier strings that wrap entity spans and separate documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identifiers {
    pub end_of_doc: String,
    pub mol_open: String,
    pub mol_close: String,
    pub prot_open: String,
    pub prot_close: String,
}

impl Default for Identifiers {
    fn default() -> Self {
        Identifiers {
            end_of_doc: "[EOD]".into(),
            mol_open: "[START_MOL]".into(),
            mol_close: "[END_MOL]".into(),
            prot_open: "[START_PROT]".into(),
            prot_close: "[END_PROT]".into(),
        }
    }
}

impl Identifiers {
    pub fn all(&self) -> [&str; 5] {
        [
            &self.end_of_doc,
            &self.mol_open,
            &self.mol_close,
            &self.prot_open,
            &self.prot_close,
        ]
    }
}

/// A single vocabulary entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Special(String),
    /// Fallback for prose characters outside the learned alphabet.
    Byte(u8),
    Atom(String),
    /// Bond, branch, ring or bracket character inside a molecule span.
    MolSymbol(char),
    Amino(char),
    /// Learned prose unit: a single character or the result of a merge.
    Piece(String),
}

impl Token {
    fn kind(&self) -> &'static str {
        match self {
            Token::Special(_) => "special",
            Token::Byte(_) => "byte",
            Token::Atom(_) => "atom",
            Token::MolSymbol(_) => "mol",
            Token::Amino(_) => "amino",
            Token::Piece(_) => "piece",
        }
    }

    /// Text this token contributes when decoded (bytes excepted).
    pub fn surface(&self) -> String {
        match self {
            Token::Special(s) | Token::Atom(s) | Token::Piece(s) => s.clone(),
            Token::Byte(b) => format!("<0x{b:02X}>"),
            Token::MolSymbol(c) | Token::Amino(c) => c.to_string(),
        }
    }

    pub fn is_reserved(&self) -> bool {
        !matches!(self, Token::Piece(_))
    }
}

/// Tables of reserved entity tokens. Configurable through the vocabulary file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservedTables {
    pub identifiers: Identifiers,
    pub atoms: Vec<String>,
    pub mol_symbols: Vec<char>,
    pub aminos: Vec<char>,
}

impl Default for ReservedTables {
    fn default() -> Self {
        ReservedTables {
            identifiers: Identifiers::default(),
            atoms: tables::default_atoms(),
            mol_symbols: tables::MOLECULE_SYMBOLS.to_vec(),
            aminos: tables::AMINO_ACIDS.to_vec(),
        }
    }
}

impl ReservedTables {
    pub fn count(&self) -> usize {
        self.identifiers.all().len() + 256 + self.atoms.len() + self.mol_symbols.len() + self.aminos.len()
    }
}

/// Immutable token table with BPE merges.
///
/// Id layout: identifiers, 256 byte fallbacks, atoms, molecule symbols,
/// amino acids, prose alphabet, merge results.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tables: ReservedTables,
    tokens: Vec<Token>,
    merges: Vec<(u32, u32)>,
    merge_rank: HashMap<(u32, u32), (usize, u32)>,
    special_ids: HashMap<String, u32>,
    byte_ids: [u32; 256],
    atom_ids: HashMap<String, u32>,
    mol_ids: HashMap<char, u32>,
    amino_ids: HashMap<char, u32>,
    piece_ids: HashMap<String, u32>,
    max_atom_chars: usize,
}

impl Vocabulary {
    /// Builds the vocabulary from reserved tables, a prose alphabet and an
    /// ordered merge list whose pairs refer to ids in the final layout.
    pub(crate) fn assemble(
        tables: ReservedTables,
        alphabet: &[char],
        merges: Vec<(u32, u32)>,
    ) -> Result<Self> {
        let mut tokens: Vec<Token> = Vec::new();
        tokens.extend(tables.identifiers.all().iter().map(|s| Token::Special(s.to_string())));
        tokens.extend((0..=255u8).map(Token::Byte));
        tokens.extend(tables.atoms.iter().cloned().map(Token::Atom));
        tokens.extend(tables.mol_symbols.iter().copied().map(Token::MolSymbol));
        tokens.extend(tables.aminos.iter().copied().map(Token::Amino));
        tokens.extend(alphabet.iter().map(|c| Token::Piece(c.to_string())));
        let mut vocab = Vocabulary {
            tables,
            tokens,
            merges: Vec::new(),
            merge_rank: HashMap::new(),
            special_ids: HashMap::new(),
            byte_ids: [0; 256],
            atom_ids: HashMap::new(),
            mol_ids: HashMap::new(),
            amino_ids: HashMap::new(),
            piece_ids: HashMap::new(),
            max_atom_chars: 1,
        };
        vocab.index()?;
        for (l, r) in merges {
            vocab.push_merge(l, r)?;
        }
        Ok(vocab)
    }

    pub(crate) fn push_merge(&mut self, left: u32, right: u32) -> Result<u32> {
        let text = match (self.tokens.get(left as usize), self.tokens.get(right as usize)) {
            (Some(Token::Piece(a)), Some(Token::Piece(b))) => format!("{a}{b}"),
            _ => {
                return Err(Error::Invalid(format!(
                    "merge ({left}, {right}) does not join two prose pieces"
                )))
            }
        };
        let id = match self.piece_ids.get(&text) {
            Some(&id) => id,
            None => {
                let id = self.tokens.len() as u32;
                self.tokens.push(Token::Piece(text.clone()));
                self.piece_ids.insert(text, id);
                id
            }
        };
        let rank = self.merges.len();
        self.merges.push((left, right));
        self.merge_rank.entry((left, right)).or_insert((rank, id));
        Ok(id)
    }

    fn index(&mut self) -> Result<()> {
        for (id, tok) in self.tokens.iter().enumerate() {
            let id = id as u32;
            let fresh = match tok {
                Token::Special(s) => self.special_ids.insert(s.clone(), id).is_none(),
                Token::Byte(b) => {
                    self.byte_ids[*b as usize] = id;
                    true
                }
                Token::Atom(s) => {
                    self.max_atom_chars = self.max_atom_chars.max(s.chars().count());
                    self.atom_ids.insert(s.clone(), id).is_none()
                }
                Token::MolSymbol(c) => self.mol_ids.insert(*c, id).is_none(),
                Token::Amino(c) => self.amino_ids.insert(*c, id).is_none(),
                Token::Piece(s) => self.piece_ids.insert(s.clone(), id).is_none(),
            };
            if !fresh {
                return Err(Error::Invalid(format!("duplicate token {tok:?}")));
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn reserved_count(&self) -> usize {
        self.tables.count()
    }

    pub fn tables(&self) -> &ReservedTables {
        &self.tables
    }

    pub fn identifiers(&self) -> &Identifiers {
        &self.tables.identifiers
    }

    pub fn token(&self, id: u32) -> Option<&Token> {
        self.tokens.get(id as usize)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    /// Rank and result id of a merge, if learned.
    pub fn merge(&self, left: u32, right: u32) -> Option<(usize, u32)> {
        self.merge_rank.get(&(left, right)).copied()
    }

    pub fn special_id(&self, name: &str) -> Option<u32> {
        self.special_ids.get(name).copied()
    }

    pub fn end_of_doc_id(&self) -> u32 {
        self.special_ids[&self.tables.identifiers.end_of_doc]
    }

    pub fn byte_id(&self, b: u8) -> u32 {
        self.byte_ids[b as usize]
    }

    pub fn atom_id(&self, symbol: &str) -> Option<u32> {
        self.atom_ids.get(symbol).copied()
    }

    pub fn mol_symbol_id(&self, c: char) -> Option<u32> {
        self.mol_ids.get(&c).copied()
    }

    pub fn amino_id(&self, c: char) -> Option<u32> {
        self.amino_ids.get(&c).copied()
    }

    pub fn piece_id(&self, text: &str) -> Option<u32> {
        self.piece_ids.get(text).copied()
    }

    pub(crate) fn max_atom_chars(&self) -> usize {
        self.max_atom_chars
    }

    pub fn to_json(&self) -> Result<String> {
        let file = VocabFile {
            format: VOCAB_FORMAT.into(),
            version: VOCAB_VERSION,
            size: self.size(),
            identifiers: self.tables.identifiers.clone(),
            atoms: self.tables.atoms.clone(),
            mol_symbols: self.tables.mol_symbols.iter().map(|c| c.to_string()).collect(),
            aminos: self.tables.aminos.iter().map(|c| c.to_string()).collect(),
            merges: self.merges.clone(),
            tokens: self
                .tokens
                .iter()
                .enumerate()
                .map(|(id, t)| TokenRecord {
                    id: id as u32,
                    kind: t.kind().into(),
                    text: t.surface(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(s)?;
        if file.format != VOCAB_FORMAT || file.version != VOCAB_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported vocabulary format {} v{}",
                file.format, file.version
            )));
        }
        let single = |xs: &[String], what: &str| -> Result<Vec<char>> {
            xs.iter()
                .map(|s| {
                    let mut it = s.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => Ok(c),
                        _ => Err(Error::Invalid(format!("{what} entry {s:?} is not one character"))),
                    }
                })
                .collect()
        };
        let tables = ReservedTables {
            identifiers: file.identifiers,
            atoms: file.atoms,
            mol_symbols: single(&file.mol_symbols, "molecule symbol")?,
            aminos: single(&file.aminos, "amino acid")?,
        };
        let n_reserved = tables.count();
        let mut alphabet = Vec::new();
        for rec in file.tokens.iter().skip(n_reserved) {
            let mut it = rec.text.chars();
            match (rec.kind.as_str(), it.next(), it.next()) {
                ("piece", Some(c), None) => alphabet.push(c),
                _ => break,
            }
        }
        let vocab = Vocabulary::assemble(tables, &alphabet, file.merges)?;
        if vocab.size() != file.size || vocab.size() != file.tokens.len() {
            return Err(Error::Invalid(format!(
                "vocabulary declares {} tokens but rebuilds to {}",
                file.size,
                vocab.size()
            )));
        }
        for (rec, (id, tok)) in file.tokens.iter().zip(vocab.tokens.iter().enumerate()) {
            if rec.id as usize != id || rec.kind != tok.kind() || rec.text != tok.surface() {
                return Err(Error::Invalid(format!(
                    "token record {} ({} {:?}) disagrees with rebuilt table",
                    rec.id, rec.kind, rec.text
                )));
            }
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Vocabulary::from_json(&s).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format: String,
    version: u32,
    size: usize,
    identifiers: Identifiers,
    atoms: Vec<String>,
    mol_symbols: Vec<String>,
    aminos: Vec<String>,
    merges: Vec<(u32, u32)>,
    tokens: Vec<TokenRecord>,
}

#[derive(Serialize, Deserialize)]
struct TokenRecord {
    id: u32,
    kind: String,
    text: String,
}
