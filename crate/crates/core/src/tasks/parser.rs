//! Closed instruction grammar: rendering and exact parsing.

use crate::classes::{LargeClass, ObjectClass, SmallClass};
use crate::world::InteractionKind;

use super::SubgoalKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("instruction outside the grammar: `{0}`")]
    OutOfGrammar(String),
    #[error("unknown object noun `{0}`")]
    UnknownNoun(String),
    #[error("expected a navigation instruction, got `{0}`")]
    NotNavigation(String),
}

/// Navigation phrasings; `{}` is the object noun.
pub const NAV_TEMPLATES: [&str; 5] = [
    "go to the {}",
    "walk to the {}",
    "turn left and head to the {}",
    "turn right and head to the {}",
    "turn around and head to the {}",
];

const NAV_PREFIXES: [&str; 5] =
    ["go to the ", "walk to the ", "turn left and head to the ", "turn right and head to the ", "turn around and head to the "];

/// Extra names accepted for large classes.
const ALIASES: [(&str, LargeClass); 4] = [
    ("table", LargeClass::DiningTable),
    ("stove", LargeClass::StoveBurner),
    ("counter top", LargeClass::Countertop),
    ("couch", LargeClass::Sofa),
];

pub fn render_navigation(template: usize, noun: LargeClass) -> String {
    NAV_TEMPLATES[template % NAV_TEMPLATES.len()].replace("{}", noun.display_name())
}

/// Renders one interaction instruction. `source` is only used for pick-up.
pub fn render_interaction(kind: InteractionKind, target: ObjectClass, source: Option<LargeClass>, item: Option<SmallClass>) -> String {
    let t = target.display_name();
    match kind {
        InteractionKind::PickUp => match source {
            Some(s) => format!("pick up the {t} from the {}", s.display_name()),
            None => format!("pick up the {t}"),
        },
        InteractionKind::Put => {
            let prep = match target.as_large() {
                Some(c) if c.is_articulated() => "in",
                _ => "on",
            };
            match item {
                Some(i) => format!("put the {} {prep} the {t}", i.display_name()),
                None => format!("put it {prep} the {t}"),
            }
        }
        InteractionKind::Open => format!("open the {t}"),
        InteractionKind::Close => format!("close the {t}"),
        InteractionKind::Slice => format!("slice the {t}"),
        InteractionKind::ToggleOn => format!("turn on the {t}"),
        InteractionKind::ToggleOff => format!("turn off the {t}"),
    }
}

fn normalise(s: &str) -> String {
    s.trim().trim_end_matches('.').trim().to_lowercase()
}

/// Looks a noun phrase up in the class lexicon.
pub fn lookup_noun(noun: &str) -> Result<ObjectClass, ParseError> {
    let noun = noun.trim();
    for &c in LargeClass::ALL {
        if noun == c.display_name() || noun == c.key() {
            return Ok(c.into());
        }
    }
    for &c in SmallClass::ALL {
        if noun == c.display_name() || noun == c.key() {
            return Ok(c.into());
        }
    }
    ALIASES
        .iter()
        .find(|(a, _)| *a == noun)
        .map(|(_, c)| (*c).into())
        .ok_or_else(|| ParseError::UnknownNoun(noun.to_string()))
}

fn lookup_large(noun: &str) -> Result<LargeClass, ParseError> {
    lookup_noun(noun)?.as_large().ok_or_else(|| ParseError::UnknownNoun(noun.to_string()))
}

fn nav_noun(s: &str) -> Option<&str> {
    NAV_PREFIXES.iter().find_map(|p| s.strip_prefix(p))
}

pub fn parse_subgoal_kind(instruction: &str) -> Result<SubgoalKind, ParseError> {
    let s = normalise(instruction);
    if nav_noun(&s).is_some() {
        return Ok(SubgoalKind::Navigation);
    }
    parse_interaction(&s).map(|_| SubgoalKind::Interaction)
}

/// Parsed interaction instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedInteraction {
    pub kind: InteractionKind,
    pub target: ObjectClass,
    /// Source receptacle named in a pick-up.
    pub container: Option<LargeClass>,
    /// Item named in a put.
    pub item: Option<SmallClass>,
}

pub fn parse_interaction(instruction: &str) -> Result<ParsedInteraction, ParseError> {
    let s = normalise(instruction);
    let simple = |kind, rest: &str| -> Result<ParsedInteraction, ParseError> {
        Ok(ParsedInteraction { kind, target: lookup_noun(rest)?, container: None, item: None })
    };
    if let Some(rest) = s.strip_prefix("pick up the ") {
        let (obj, src) = match rest.split_once(" from the ") {
            Some((o, c)) => (o, Some(lookup_large(c)?)),
            None => (rest, None),
        };
        return Ok(ParsedInteraction { kind: InteractionKind::PickUp, target: lookup_noun(obj)?, container: src, item: None });
    }
    if let Some(rest) = s.strip_prefix("put ") {
        let split = rest.split_once(" in the ").or_else(|| rest.split_once(" on the "));
        let Some((item, dest)) = split else { return Err(ParseError::OutOfGrammar(s)) };
        let item = match item.strip_prefix("the ") {
            Some(n) => lookup_noun(n)?.as_small(),
            None if item == "it" => None,
            None => return Err(ParseError::OutOfGrammar(s)),
        };
        return Ok(ParsedInteraction {
            kind: InteractionKind::Put,
            target: lookup_large(dest)?.into(),
            container: None,
            item,
        });
    }
    let table: [(&str, InteractionKind); 5] = [
        ("open the ", InteractionKind::Open),
        ("close the ", InteractionKind::Close),
        ("slice the ", InteractionKind::Slice),
        ("turn on the ", InteractionKind::ToggleOn),
        ("turn off the ", InteractionKind::ToggleOff),
    ];
    for (prefix, kind) in table {
        if let Some(rest) = s.strip_prefix(prefix) {
            return simple(kind, rest);
        }
    }
    Err(ParseError::OutOfGrammar(s))
}

/// Target and container of a navigation subgoal. The following
/// instruction refines the target when it handles a small object.
pub fn parse_targets(nav_instruction: &str, next_instruction: Option<&str>) -> Result<(ObjectClass, Option<LargeClass>), ParseError> {
    let s = normalise(nav_instruction);
    let noun = nav_noun(&s).ok_or_else(|| ParseError::NotNavigation(s.clone()))?;
    let nav = lookup_noun(noun)?;
    if let Some(next) = next_instruction {
        if let Ok(p) = parse_interaction(next) {
            if matches!(p.kind, InteractionKind::PickUp | InteractionKind::Slice) && !p.target.is_large() {
                return Ok((p.target, nav.as_large()));
            }
        }
    }
    Ok((nav, None))
}
