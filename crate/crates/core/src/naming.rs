//! Turning BPMN ids and labels into PDDL identifiers.

use std::collections::HashSet;

/// How a raw string is turned into an identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdStyle {
    /// Element ids keep their casing; `-` is allowed.
    Element,
    /// Human labels (task names) are lowercased and only `[a-z0-9_]` survive.
    Label,
}

/// Maps `raw` onto a PDDL identifier. Identifiers must start with a letter,
/// so anything else gains an `n` prefix.
pub fn sanitize_id(raw: &str, style: IdStyle) -> String {
    let mut out: String = raw
        .trim()
        .chars()
        .map(|c| match style {
            IdStyle::Element if c.is_ascii_alphanumeric() || c == '_' || c == '-' => c,
            IdStyle::Label if c.is_ascii_alphanumeric() || c == '_' => c.to_ascii_lowercase(),
            _ => '_',
        })
        .collect();
    if out.is_empty() {
        out.push('_');
    }
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert(0, 'n');
    }
    out
}

/// Hands out unique identifiers. PDDL names are case-insensitive, so two
/// names differing only in case collide; later ones get `_2`, `_3`, ...
#[derive(Debug, Default, Clone)]
pub struct NameTable {
    taken: HashSet<String>,
}

impl NameTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks `name` as used without returning a variant of it.
    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_ascii_lowercase());
    }

    pub fn is_taken(&self, name: &str) -> bool {
        self.taken.contains(&name.to_ascii_lowercase())
    }

    pub fn unique(&mut self, base: String) -> String {
        if self.taken.insert(base.to_ascii_lowercase()) {
            return base;
        }
        (2..)
            .map(|k| format!("{base}_{k}"))
            .find(|cand| self.taken.insert(cand.to_ascii_lowercase()))
            .expect("unbounded suffix search")
    }

    pub fn sanitize(&mut self, raw: &str, style: IdStyle) -> String {
        self.unique(sanitize_id(raw, style))
    }
}
