//! Action augmentation: periodic full turns and the horizon zigzag.

use crate::world::Action;

/// Injected turns after every second forward move.
pub const TURNS_PER_SWEEP: usize = 4;
pub const MOVES_PER_SWEEP: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sequence already contains a look action at position {0}")]
pub struct MalformedInput(pub usize);

/// Inserts a full turn of right rotations after every second `MoveAhead`.
pub fn inject_rotations(raw: &[Action]) -> Vec<Action> {
    let mut out = Vec::with_capacity(raw.len() * 2);
    let mut moves = 0;
    for &a in raw {
        out.push(a);
        if a == Action::MoveAhead {
            moves += 1;
            if moves % MOVES_PER_SWEEP == 0 {
                out.extend([Action::RotateRight; TURNS_PER_SWEEP]);
            }
        }
    }
    out
}

/// Surrounds every action with alternating look pairs, opening with a
/// `LookDown, LookUp, LookUp` prefix.
pub fn zigzag(seq: &[Action]) -> Result<Vec<Action>, MalformedInput> {
    if let Some(i) = seq.iter().position(|a| a.is_look()) {
        return Err(MalformedInput(i));
    }
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    let mut z = Zigzag::default();
    let mut out = z.prefix().to_vec();
    for &a in seq {
        out.push(a);
        out.extend(z.next_pair());
    }
    Ok(out)
}

/// Online zigzag state.
#[derive(Debug, Clone, Default)]
pub struct Zigzag {
    pairs: usize,
}

impl Zigzag {
    pub fn prefix(&self) -> [Action; 3] {
        [Action::LookDown, Action::LookUp, Action::LookUp]
    }

    pub fn next_pair(&mut self) -> [Action; 2] {
        let a = if self.pairs.is_multiple_of(2) { Action::LookDown } else { Action::LookUp };
        self.pairs += 1;
        [a, a]
    }
}

/// Expands raw exploration actions into executed ones as they arrive.
/// Each entry carries whether it was injected.
#[derive(Debug, Clone, Default)]
pub struct Augmenter {
    zigzag: Zigzag,
    started: bool,
    moves: usize,
}

impl Augmenter {
    pub fn expand(&mut self, raw: Action) -> Vec<(Action, bool)> {
        let mut out = Vec::new();
        if !self.started {
            self.started = true;
            out.extend(self.zigzag.prefix().map(|a| (a, true)));
        }
        let push = |out: &mut Vec<(Action, bool)>, a, injected, z: &mut Zigzag| {
            out.push((a, injected));
            out.extend(z.next_pair().map(|l| (l, true)));
        };
        push(&mut out, raw, false, &mut self.zigzag);
        if raw == Action::MoveAhead {
            self.moves += 1;
            if self.moves.is_multiple_of(MOVES_PER_SWEEP) {
                for _ in 0..TURNS_PER_SWEEP {
                    push(&mut out, Action::RotateRight, true, &mut self.zigzag);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn parse(s: &str) -> Vec<Action> {
        s.split(", ")
            .map(|t| match t {
                "Move" => Action::MoveAhead,
                "Right" => Action::RotateRight,
                "Left" => Action::RotateLeft,
                "Up" => Action::LookUp,
                "Down" => Action::LookDown,
                _ => panic!("{t}"),
            })
            .collect()
    }

    const GOLDEN: &str = "Down, Up, Up, Move, Down, Down, Right, Up, Up, Move, Down, Down, Right, Up, Up, Right, \
                          Down, Down, Right, Up, Up, Right, Down, Down, Move, Up, Up, Left, Down, Down";

    #[test]
    fn rotation_injection_examples() {
        let raw = parse("Move, Right, Move, Move, Left");
        assert_eq!(inject_rotations(&raw), parse("Move, Right, Move, Right, Right, Right, Right, Move, Left"));
        assert_eq!(inject_rotations(&parse("Move")), parse("Move"));
        assert!(inject_rotations(&[]).is_empty());
    }

    #[test]
    fn zigzag_golden() {
        let raw = parse("Move, Right, Move, Move, Left");
        let z = zigzag(&inject_rotations(&raw)).unwrap();
        assert_eq!(z, parse(GOLDEN));
        assert_eq!(z.len(), 30);
        assert_eq!(zigzag(&parse("Move")).unwrap(), parse("Down, Up, Up, Move, Down, Down"));
        assert!(zigzag(&[]).unwrap().is_empty());
        assert_eq!(zigzag(&parse("Move, Up")), Err(MalformedInput(1)));
    }

    #[test]
    fn online_matches_offline() {
        let raw = parse("Move, Right, Move, Move, Left");
        let mut aug = Augmenter::default();
        let online: Vec<_> = raw.iter().flat_map(|&a| aug.expand(a)).collect();
        assert_eq!(online.iter().map(|&(a, _)| a).collect::<Vec<_>>(), parse(GOLDEN));
        let kept: Vec<_> = online.iter().filter(|&&(_, inj)| !inj).map(|&(a, _)| a).collect();
        assert_eq!(kept, raw);
    }

    fn nav_action() -> impl Strategy<Value = Action> {
        prop_oneof![Just(Action::MoveAhead), Just(Action::RotateLeft), Just(Action::RotateRight)]
    }

    proptest! {
        #[test]
        fn zigzag_triples(seq in prop::collection::vec(nav_action(), 1..=100)) {
            prop_assert_eq!(zigzag(&seq).unwrap().len(), 3 * seq.len() + 3);
        }

        #[test]
        fn augmentation_strips_back(seq in prop::collection::vec(nav_action(), 0..60)) {
            let mut aug = Augmenter::default();
            let online: Vec<_> = seq.iter().flat_map(|&a| aug.expand(a)).collect();
            let offline = zigzag(&inject_rotations(&seq)).unwrap();
            prop_assert_eq!(online.iter().map(|&(a, _)| a).collect::<Vec<_>>(), offline);
            let kept: Vec<_> = online.iter().filter(|&&(_, inj)| !inj).map(|&(a, _)| a).collect();
            prop_assert_eq!(kept, seq);
        }
    }
}
