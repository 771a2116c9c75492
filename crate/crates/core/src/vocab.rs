//! Closed symbolic vocabulary shared by observation attributes and captions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const MASK_TOKEN: &str = "[mask]";

/// Relation tokens used by caption templates.
pub const RELATION_TOKENS: [&str; 3] = ["near", "in", "beside"];

pub const DEFAULT_ROOM_TYPES: [&str; 8] = [
    "bedroom",
    "bathroom",
    "kitchen",
    "living_room",
    "hallway",
    "office",
    "dining_room",
    "laundry",
];

pub const DEFAULT_OBJECTS: [&str; 16] = [
    "lamp", "bed", "sofa", "table", "chair", "sink", "tv", "plant", "shelf", "mirror", "rug",
    "painting", "cabinet", "desk", "toilet", "stove",
];

pub const DEFAULT_COLORS: [&str; 8] =
    ["red", "blue", "green", "white", "black", "yellow", "gray", "brown"];

/// The attribute vocabulary an environment draws its observations from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeVocabulary {
    pub room_types: Vec<String>,
    pub objects: Vec<String>,
    pub colors: Vec<String>,
}

impl Default for AttributeVocabulary {
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            room_types: own(&DEFAULT_ROOM_TYPES),
            objects: own(&DEFAULT_OBJECTS),
            colors: own(&DEFAULT_COLORS),
        }
    }
}

pub(crate) fn is_valid_token(token: &str) -> bool {
    !token.is_empty()
        && token
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Token table for captions: attributes, relation words and the mask token.
/// Indices are stable for a given attribute vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(attributes: &AttributeVocabulary) -> Self {
        let mut tokens: Vec<String> = Vec::new();
        let mut push = |t: &str| {
            if !tokens.iter().any(|x| x == t) {
                tokens.push(t.to_string());
            }
        };
        for t in attributes
            .room_types
            .iter()
            .chain(&attributes.objects)
            .chain(&attributes.colors)
        {
            push(t);
        }
        for t in RELATION_TOKENS {
            push(t);
        }
        push(MASK_TOKEN);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }

    /// Rebuilds a vocabulary from an explicit token list (checkpoint order).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, String> {
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err("duplicate vocabulary token".into());
        }
        if !index.contains_key(MASK_TOKEN) {
            return Err("vocabulary lacks the mask token".into());
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn mask_id(&self) -> usize {
        self.index[MASK_TOKEN]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new(&AttributeVocabulary::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vocabulary_is_closed_and_indexed() {
        let v = Vocabulary::default();
        assert_eq!(v.len(), 8 + 16 + 8 + 3 + 1);
        assert_eq!(v.token(v.id("lamp").unwrap()), "lamp");
        assert_eq!(v.token(v.mask_id()), MASK_TOKEN);
        assert!(!v.contains("unicorn"));
    }

    #[test]
    fn token_charset() {
        assert!(is_valid_token("living_room"));
        assert!(!is_valid_token("Living Room"));
        assert!(!is_valid_token(""));
    }
}
