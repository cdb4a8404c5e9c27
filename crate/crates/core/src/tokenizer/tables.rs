//! Reserved symbol tables for entity spans.

/// All 118 element symbols, ordered by atomic number.
pub const ELEMENTS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Lowercase aromatic atoms as written in SMILES.
pub const AROMATIC: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];

/// Bonds, branches, ring closures, charges and bracket syntax inside molecule spans.
pub const MOLECULE_SYMBOLS: [char; 26] = [
    '(', ')', '[', ']', '=', '#', '-', '+', '\\', '/', '@', '.', '%', ':', '*', '$', '0', '1', '2',
    '3', '4', '5', '6', '7', '8', '9',
];

/// The 20 standard residues plus selenocysteine, pyrrolysine and the
/// ambiguity codes B, Z and X.
pub const AMINO_ACIDS: [char; 25] = [
    'A', 'R', 'N', 'D', 'C', 'Q', 'E', 'G', 'H', 'I', 'L', 'K', 'M', 'F', 'P', 'S', 'T', 'W', 'Y',
    'V', 'U', 'O', 'B', 'Z', 'X',
];

/// Default atom table: element symbols followed by aromatic forms.
pub fn default_atoms() -> Vec<String> {
    ELEMENTS
        .iter()
        .chain(AROMATIC.iter())
        .map(|s| s.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn tables_are_well_formed() {
        let atoms = default_atoms();
        let uniq: HashSet<_> = atoms.iter().collect();
        assert_eq!(uniq.len(), atoms.len());
        assert!(atoms.iter().all(|a| (1..=2).contains(&a.chars().count())));
        let aminos: HashSet<_> = AMINO_ACIDS.iter().collect();
        assert_eq!(aminos.len(), AMINO_ACIDS.len());
        assert!(MOLECULE_SYMBOLS.iter().all(|c| !c.is_alphabetic()));
    }
}
