use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// The four binary personality dimensions. Each axis has a "first" letter
/// (label 0) and a "second" letter (label 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MbtiAxis {
    EI,
    SN,
    TF,
    JP,
}

impl MbtiAxis {
    pub const ALL: [MbtiAxis; 4] = [MbtiAxis::EI, MbtiAxis::SN, MbtiAxis::TF, MbtiAxis::JP];

    /// Letters in the order they appear in a type code: `[label 0, label 1]`.
    pub fn letters(self) -> [char; 2] {
        match self {
            MbtiAxis::EI => ['I', 'E'],
            MbtiAxis::SN => ['N', 'S'],
            MbtiAxis::TF => ['T', 'F'],
            MbtiAxis::JP => ['J', 'P'],
        }
    }

    fn position(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MbtiAxis::EI => "EI",
            MbtiAxis::SN => "SN",
            MbtiAxis::TF => "TF",
            MbtiAxis::JP => "JP",
        }
    }
}

impl fmt::Display for MbtiAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Splits a type code such as `"INTP"` into one letter per axis.
/// Case-insensitive; anything other than `[IE][NS][TF][JP]` is rejected.
pub fn mbti_axis_labels(code: &str) -> Result<BTreeMap<MbtiAxis, char>, CorpusError> {
    let chars: Vec<char> = code
        .trim()
        .chars()
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if chars.len() != 4 {
        return Err(CorpusError::InvalidMbti(code.to_string()));
    }
    let mut out = BTreeMap::new();
    for axis in MbtiAxis::ALL {
        let c = chars[axis.position()];
        if !axis.letters().contains(&c) {
            return Err(CorpusError::InvalidMbti(code.to_string()));
        }
        out.insert(axis, c);
    }
    Ok(out)
}

/// Inverse of [`mbti_axis_labels`].
pub fn mbti_from_axes(labels: &BTreeMap<MbtiAxis, char>) -> Result<String, CorpusError> {
    let mut code = String::with_capacity(4);
    for axis in MbtiAxis::ALL {
        match labels.get(&axis) {
            Some(&c) if axis.letters().contains(&c) => code.push(c),
            _ => return Err(CorpusError::InvalidMbti(format!("{labels:?}"))),
        }
    }
    Ok(code)
}

/// All 16 codes in a fixed order (axis-major, label 0 before label 1).
pub fn all_mbti_types() -> Vec<String> {
    (0..16u8)
        .map(|bits| {
            MbtiAxis::ALL
                .iter()
                .enumerate()
                .map(|(i, axis)| axis.letters()[usize::from((bits >> (3 - i)) & 1)])
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn table_examples() {
        let intp = mbti_axis_labels("INTP").unwrap();
        assert_eq!(intp.values().collect::<String>(), "INTP");
        assert_eq!(intp[&MbtiAxis::SN], 'N');
        let esfj = mbti_axis_labels("esfj").unwrap();
        assert_eq!(esfj[&MbtiAxis::EI], 'E');
        assert_eq!(esfj[&MbtiAxis::JP], 'J');
        assert!(mbti_axis_labels("XXXX").is_err());
        assert!(mbti_axis_labels("INT").is_err());
        assert!(mbti_axis_labels("NITP").is_err());
    }

    #[test]
    fn sixteen_codes_sixteen_label_maps() {
        let codes = all_mbti_types();
        assert_eq!(codes.iter().collect::<BTreeSet<_>>().len(), 16);
        let maps: BTreeSet<_> = codes.iter().map(|c| mbti_axis_labels(c).unwrap()).collect();
        assert_eq!(maps.len(), 16);
        for c in &codes {
            assert_eq!(&mbti_from_axes(&mbti_axis_labels(c).unwrap()).unwrap(), c);
        }
    }

    proptest! {
        #[test]
        fn only_valid_codes_parse(code in "[A-Z]{4}") {
            let valid = all_mbti_types().contains(&code);
            prop_assert_eq!(mbti_axis_labels(&code).is_ok(), valid);
        }
    }
}
