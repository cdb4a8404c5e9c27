//! Deterministic synthetic corpora for smoke tests and the expert-choice
//! experiments.
//!
//! Prose domains draw sentences from small domain word lists; molecule and
//! protein documents are wrapped entity spans in the inline markup understood
//! by [`Document::parse_marked`](crate::tokenizer::Document::parse_marked).

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tokenizer::Identifiers;

/// Repeats `unit` until the text is `len` characters long (truncating the
/// last repetition).
pub fn pattern_text(unit: &str, len: usize) -> String {
    unit.chars().cycle().take(len).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Math,
    Physics,
    Chemistry,
    Biology,
    Molecule,
    Protein,
}

impl Domain {
    pub const ALL: [Domain; 6] = [
        Domain::Math,
        Domain::Physics,
        Domain::Chemistry,
        Domain::Biology,
        Domain::Molecule,
        Domain::Protein,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Domain::Math => "math",
            Domain::Physics => "physics",
            Domain::Chemistry => "chemistry",
            Domain::Biology => "biology",
            Domain::Molecule => "molecule",
            Domain::Protein => "protein",
        }
    }

    pub fn from_label(s: &str) -> Option<Domain> {
        Domain::ALL.into_iter().find(|d| d.label() == s)
    }

    fn words(self) -> &'static [&'static str] {
        match self {
            Domain::Math => &[
                "theorem", "lemma", "proof", "integral", "prime", "group", "ring", "field", "matrix", "vector",
                "limit", "series", "bounded", "convex", "metric", "space", "function", "derivative", "equation",
                "polynomial",
            ],
            Domain::Physics => &[
                "energy", "momentum", "field", "quantum", "particle", "photon", "wave", "mass", "velocity", "force",
                "spin", "entropy", "plasma", "lattice", "gravity", "relativity", "laser", "electron", "magnetic",
                "thermal",
            ],
            Domain::Chemistry => &[
                "reaction", "catalyst", "solvent", "bond", "ion", "acid", "base", "oxidation", "reduction", "yield",
                "compound", "synthesis", "ligand", "polymer", "crystal", "molar", "titration", "alkene", "ester",
                "salt",
            ],
            Domain::Biology => &[
                "cell", "gene", "protein", "enzyme", "tissue", "membrane", "receptor", "mutation", "species",
                "neuron", "pathway", "expression", "genome", "organism", "immune", "virus", "bacteria", "signal",
                "kinase", "growth",
            ],
            Domain::Molecule | Domain::Protein => &[],
        }
    }
}

const GLUE: [&str; 12] = ["the", "of", "a", "is", "we", "and", "in", "with", "for", "this", "that", "to"];
const ATOMS: [&str; 8] = ["C", "C", "C", "N", "O", "S", "Cl", "F"];
const RESIDUES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

fn sentence(domain: Domain, rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(6..12);
    let words: Vec<&str> = (0..n)
        .map(|_| {
            if rng.random_bool(0.4) {
                *GLUE.choose(rng).expect("non-empty")
            } else {
                *domain.words().choose(rng).expect("non-empty")
            }
        })
        .collect();
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// A random, loosely SMILES-shaped string: an atom chain with occasional
/// branches, double bonds and one ring closure.
pub fn random_smiles(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(4..14);
    let mut s = String::new();
    let mut open = 0;
    let ring = rng.random_bool(0.3);
    for i in 0..n {
        if i > 0 && rng.random_bool(0.15) {
            s.push('=');
        }
        s.push_str(ATOMS.choose(rng).expect("non-empty"));
        if ring && (i == 1 || i == n - 1) {
            s.push('1');
        }
        if i + 2 < n && rng.random_bool(0.2) {
            s.push('(');
            open += 1;
        } else if open > 0 && rng.random_bool(0.4) {
            s.push(')');
            open -= 1;
        }
    }
    s.extend(std::iter::repeat_n(')', open));
    s
}

pub fn random_protein(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(20..60);
    (0..n).map(|_| *RESIDUES.choose(rng).expect("non-empty") as char).collect()
}

/// One document of `domain` in the inline markup format.
pub fn domain_document(domain: Domain, ids: &Identifiers, rng: &mut ChaCha8Rng) -> String {
    match domain {
        Domain::Molecule => format!("{}{}{}", ids.mol_open, random_smiles(rng), ids.mol_close),
        Domain::Protein => format!("{}{}{}", ids.prot_open, random_protein(rng), ids.prot_close),
        _ => {
            let n = rng.random_range(2..5);
            let mut parts: Vec<String> = (0..n).map(|_| sentence(domain, rng)).collect();
            if domain == Domain::Chemistry && rng.random_bool(0.3) {
                parts.push(format!("The product is {}{}{}.", ids.mol_open, random_smiles(rng), ids.mol_close));
            }
            parts.join(" ")
        }
    }
}

/// A labeled document in the inline markup format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub label: String,
    pub text: String,
}

/// `per_label` documents for each domain, grouped by domain in the given
/// order. Each domain has its own random stream derived from `seed`, so
/// adding a domain does not change the others' documents.
pub fn labeled_corpus(domains: &[Domain], per_label: usize, seed: u64) -> Vec<LabeledText> {
    let ids = Identifiers::default();
    let mut out = Vec::with_capacity(domains.len() * per_label);
    for &d in domains {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(d as u64 + 1)));
        for _ in 0..per_label {
            out.push(LabeledText {
                label: d.label().to_string(),
                text: domain_document(d, &ids, &mut rng),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{Document, EntityKind};

    #[test]
    fn pattern_repeats_and_truncates() {
        assert_eq!(pattern_text("ab", 5), "ababa");
        assert_eq!(pattern_text("ab", 0), "");
    }

    #[test]
    fn documents_parse_and_carry_the_right_spans() {
        let ids = Identifiers::default();
        for doc in labeled_corpus(&Domain::ALL, 20, 3) {
            let parsed = Document::parse_marked(&doc.text, &ids).unwrap();
            match doc.label.as_str() {
                "molecule" => {
                    assert_eq!(parsed.spans.len(), 1);
                    assert_eq!(parsed.spans[0].kind, EntityKind::Molecule);
                }
                "protein" => assert_eq!(parsed.spans[0].kind, EntityKind::Protein),
                "chemistry" => {}
                _ => assert!(parsed.spans.is_empty()),
            }
            assert!(!parsed.text.is_empty());
        }
    }

    #[test]
    fn corpus_is_deterministic_and_domains_independent() {
        let a = labeled_corpus(&[Domain::Math, Domain::Protein], 5, 1);
        let b = labeled_corpus(&[Domain::Protein], 5, 1);
        assert_eq!(a, labeled_corpus(&[Domain::Math, Domain::Protein], 5, 1));
        assert_eq!(&a[5..], &b[..]);
        assert_eq!(Domain::from_label("biology"), Some(Domain::Biology));
    }

    #[test]
    fn smiles_parentheses_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let s = random_smiles(&mut rng);
            let mut depth = 0i32;
            for c in s.chars() {
                depth += match c {
                    '(' => 1,
                    ')' => -1,
                    _ => 0,
                };
                assert!(depth >= 0, "{s}");
            }
            assert_eq!(depth, 0, "{s}");
        }
    }
}
