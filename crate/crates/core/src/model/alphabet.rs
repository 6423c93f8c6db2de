//! Finite label sets for signals and messages.
//!
//! Message labels are exact rationals so that sum-based rules (the quantizer
//! family) can be evaluated without floating point. Centered alphabets hold
//! {(-m+1)/2, ..., (m-1)/2} in unit steps; indexed alphabets hold {1, ..., m}.

use std::fmt;

use num_rational::Rational64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    Indexed,
    Centered,
    Binary,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    mode: LabelMode,
    labels: Vec<Rational64>,
}

impl Alphabet {
    /// Labels 1..=m.
    pub fn indexed(m: usize) -> Result<Self> {
        check_size(m)?;
        let labels = (1..=m as i64).map(Rational64::from_integer).collect();
        Ok(Alphabet {
            mode: LabelMode::Indexed,
            labels,
        })
    }

    /// Labels (-m+1)/2, (-m+3)/2, ..., (m-1)/2; symmetric about 0, spaced 1.
    pub fn centered(m: usize) -> Result<Self> {
        check_size(m)?;
        let labels = (0..m as i64)
            .map(|i| Rational64::new(2 * i - (m as i64 - 1), 2))
            .collect();
        Ok(Alphabet {
            mode: LabelMode::Centered,
            labels,
        })
    }

    /// Labels {0, 1}; used for binary messages, binary signals, and root
    /// decisions.
    pub fn binary() -> Self {
        Alphabet {
            mode: LabelMode::Binary,
            labels: vec![Rational64::from_integer(0), Rational64::from_integer(1)],
        }
    }

    /// Arbitrary strictly increasing label list.
    pub fn custom(labels: Vec<Rational64>) -> Result<Self> {
        check_size(labels.len())?;
        if !labels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "alphabet labels must be strictly increasing".into(),
            ));
        }
        Ok(Alphabet {
            mode: LabelMode::Custom,
            labels,
        })
    }

    /// Labels 0..n-1; used for anonymous signal alphabets.
    pub fn integers(n: usize) -> Result<Self> {
        Self::custom((0..n as i64).map(Rational64::from_integer).collect())
    }

    /// Parses label strings like "-1", "3", or "1/2".
    pub fn parse_custom(labels: &[String]) -> Result<Self> {
        let parsed: std::result::Result<Vec<Rational64>, _> =
            labels.iter().map(|s| s.parse()).collect();
        Self::custom(parsed.map_err(|e| Error::Parse(format!("bad alphabet label: {e}")))?)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn label(&self, index: usize) -> Rational64 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[Rational64] {
        &self.labels
    }

    pub fn label_name(&self, index: usize) -> String {
        self.labels[index].to_string()
    }

    pub fn label_names(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.to_string()).collect()
    }

    pub fn index_of(&self, label: Rational64) -> Option<usize> {
        self.labels.iter().position(|l| *l == label)
    }

    pub fn is_centered_form(&self) -> bool {
        self.labels == Self::centered(self.len()).expect("size checked").labels
    }

    pub fn is_indexed_form(&self) -> bool {
        self.labels == Self::indexed(self.len()).expect("size checked").labels
    }

    pub fn is_binary_form(&self) -> bool {
        self.labels == Self::binary().labels
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label_names().join(", "))
    }
}

fn check_size(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "alphabet needs at least 2 labels, got {m}"
        )));
    }
    Ok(())
}
