use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GmlError;

/// The three tuple families.
///
/// Operator order:
/// - tetrablock: `[A, B, P]`
/// - g333: `[T1, .., T7]`
/// - g312: `[S1, S2, S3, S~1, S~2]`
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Tetrablock,
    G333,
    G312,
}

pub const ALL_KINDS: [Kind; 3] = [Kind::Tetrablock, Kind::G333, Kind::G312];

impl Kind {
    pub fn arity(self) -> usize {
        match self {
            Kind::Tetrablock => 3,
            Kind::G333 => 7,
            Kind::G312 => 5,
        }
    }

    /// Index of the distinguished contraction (P, T7, S3).
    pub fn distinguished(self) -> usize {
        match self {
            Kind::Tetrablock | Kind::G312 => 2,
            Kind::G333 => 6,
        }
    }

    /// Indices of the operators that carry a fundamental operator, in storage order.
    pub fn op_indices(self) -> Vec<usize> {
        let d = self.distinguished();
        (0..self.arity()).filter(|&i| i != d).collect()
    }

    /// Number of fundamental operators.
    pub fn num_fundamental(self) -> usize {
        self.arity() - 1
    }

    /// Partner of tuple index `i` in the fundamental equations.
    pub fn partner(self, i: usize) -> usize {
        match self {
            Kind::Tetrablock => 1 - i,
            Kind::G333 => 5 - i,
            Kind::G312 => match i {
                0 => 4,
                1 => 3,
                3 => 1,
                4 => 0,
                _ => panic!("S3 has no partner"),
            },
        }
    }

    /// Position in the fundamental list of tuple index `i`.
    pub fn slot(self, i: usize) -> usize {
        let d = self.distinguished();
        assert!(i != d && i < self.arity(), "index {i} carries no fundamental operator");
        if i < d {
            i
        } else {
            i - 1
        }
    }

    /// Partner map on fundamental slots.
    pub fn partner_slot(self, k: usize) -> usize {
        let i = self.op_indices()[k];
        self.slot(self.partner(i))
    }

    /// Size of the generating matrix and its block structure.
    pub fn matrix_size(self) -> usize {
        match self {
            Kind::Tetrablock => 2,
            _ => 3,
        }
    }

    pub fn block_sizes(self) -> Vec<usize> {
        match self {
            Kind::Tetrablock => vec![1, 1],
            Kind::G333 => vec![1, 1, 1],
            Kind::G312 => vec![1, 2],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Tetrablock => "tetrablock",
            Kind::G333 => "g333",
            Kind::G312 => "g312",
        }
    }

    pub fn op_names(self) -> &'static [&'static str] {
        match self {
            Kind::Tetrablock => &["A", "B", "P"],
            Kind::G333 => &["T1", "T2", "T3", "T4", "T5", "T6", "T7"],
            Kind::G312 => &["S1", "S2", "S3", "S~1", "S~2"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = GmlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tetrablock" => Ok(Kind::Tetrablock),
            "g333" => Ok(Kind::G333),
            "g312" => Ok(Kind::G312),
            other => Err(GmlError::InvalidInput(format!("unknown kind `{other}` (expected tetrablock, g333, g312)"))),
        }
    }
}
