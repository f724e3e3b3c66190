use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// One of the fifteen registered genres.
///
/// The canonical spelling is the compact one (`hiphop`, `bigroom`);
/// spaced and hyphenated variants are accepted as aliases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Genre {
    House,
    Edm,
    Classic,
    Chill,
    Lofi,
    Nightcore,
    Anime,
    Pop,
    Rock,
    Instrumental,
    TropicalHouse,
    Jazz,
    RnB,
    HipHop,
    BigRoom,
}

impl Genre {
    /// Registry order (largest training share first).
    pub const ALL: [Genre; 15] = [
        Genre::House,
        Genre::Edm,
        Genre::Classic,
        Genre::Chill,
        Genre::Lofi,
        Genre::Nightcore,
        Genre::Anime,
        Genre::Pop,
        Genre::Rock,
        Genre::Instrumental,
        Genre::TropicalHouse,
        Genre::Jazz,
        Genre::RnB,
        Genre::HipHop,
        Genre::BigRoom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Genre::House => "house",
            Genre::Edm => "edm",
            Genre::Classic => "classic",
            Genre::Chill => "chill",
            Genre::Lofi => "lofi",
            Genre::Nightcore => "nightcore",
            Genre::Anime => "anime",
            Genre::Pop => "pop",
            Genre::Rock => "rock",
            Genre::Instrumental => "instrumental",
            Genre::TropicalHouse => "tropical house",
            Genre::Jazz => "jazz",
            Genre::RnB => "r&b",
            Genre::HipHop => "hiphop",
            Genre::BigRoom => "bigroom",
        }
    }
}

/// Resolve a free-form genre name to the registry.
pub fn canonicalize_genre(raw: &str) -> Result<Genre, DatasetError> {
    let folded = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    if folded.is_empty() {
        return Err(DatasetError::UnknownGenre(raw.to_string()));
    }
    if let Some(g) = Genre::ALL.iter().find(|g| g.as_str() == folded) {
        return Ok(*g);
    }
    let genre = match folded.as_str() {
        "hip hop" | "hip-hop" => Genre::HipHop,
        "big room" | "big-room" => Genre::BigRoom,
        "tropical-house" | "tropicalhouse" => Genre::TropicalHouse,
        "rnb" | "r & b" | "r and b" | "r'n'b" => Genre::RnB,
        "lo-fi" | "lo fi" => Genre::Lofi,
        "classical" => Genre::Classic,
        _ => return Err(DatasetError::UnknownGenre(raw.to_string())),
    };
    Ok(genre)
}

impl FromStr for Genre {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        canonicalize_genre(s)
    }
}

impl TryFrom<String> for Genre {
    type Error = DatasetError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        canonicalize_genre(&value)
    }
}

impl From<Genre> for String {
    fn from(g: Genre) -> Self {
        g.as_str().to_string()
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
