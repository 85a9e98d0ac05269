//! Background knowledge of the blocks domain: which moves are legal and the
//! deterministic transition function from one configuration to the next.
//!
//! Rules enforced:
//! - a block can only be moved while it stands in the scene; blocks that went
//!   out never come back and no block enters from outside,
//! - only free blocks (nothing on top) can be moved,
//! - a block can only be placed on a free block,
//! - blocks that are not moved keep their location,
//! - one move per time step.

use thiserror::Error;

use crate::model::{Action, Color, Configuration, Destination, MoveSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum TransitionError {
    #[error("subject is not in the scene")]
    SubjectMissing,
    #[error("subject has been moved out and cannot be moved again")]
    SubjectOut,
    #[error("subject has a block on top of it")]
    SubjectNotFree,
    #[error("destination block is not in the scene")]
    DestMissing,
    #[error("destination block has been moved out")]
    DestOut,
    #[error("destination block has a block on top of it")]
    DestNotFree,
    #[error("a block cannot be placed on itself")]
    SelfMove,
}

/// True iff `x` is the top block of some stack.
pub fn is_free(cfg: &Configuration, x: Color) -> bool {
    cfg.stacks().iter().any(|s| s.last() == Some(&x))
}

pub fn is_legal(cfg: &Configuration, action: Action) -> Result<(), TransitionError> {
    let Action { subject, dest } = action;
    if dest == Destination::Block(subject) {
        return Err(TransitionError::SelfMove);
    }
    if cfg.is_out(subject) {
        return Err(TransitionError::SubjectOut);
    }
    if cfg.position(subject).is_none() {
        return Err(TransitionError::SubjectMissing);
    }
    if !is_free(cfg, subject) {
        return Err(TransitionError::SubjectNotFree);
    }
    if let Destination::Block(y) = dest {
        if cfg.is_out(y) {
            return Err(TransitionError::DestOut);
        }
        if cfg.position(y).is_none() {
            return Err(TransitionError::DestMissing);
        }
        if !is_free(cfg, y) {
            return Err(TransitionError::DestNotFree);
        }
    }
    Ok(())
}

/// All legal actions in deterministic order: subject by id, then destination
/// (blocks by id, table, out). Moving a block that already sits alone on
/// the table to the table is left out.
pub fn legal_moves(cfg: &Configuration) -> Vec<Action> {
    let tops: Vec<(Color, bool)> =
        cfg.stacks().iter().map(|s| (*s.last().expect("stacks are non-empty"), s.len() == 1)).collect();
    let mut subjects = tops.clone();
    subjects.sort();
    let mut dests: Vec<Color> = tops.iter().map(|&(c, _)| c).collect();
    dests.sort();

    let mut out = Vec::with_capacity(subjects.len() * (subjects.len() + 1));
    for &(x, alone) in &subjects {
        for &y in &dests {
            if y != x {
                out.push(Action::new(x, Destination::Block(y)));
            }
        }
        if !alone {
            out.push(Action::new(x, Destination::Table));
        }
        out.push(Action::new(x, Destination::Out));
    }
    out
}

/// One step of the transition function.
pub fn apply(cfg: &Configuration, action: Action) -> Result<Configuration, TransitionError> {
    is_legal(cfg, action)?;
    let mut stacks: Vec<Vec<Color>> = cfg.stacks().to_vec();
    let mut out = cfg.out().clone();
    let (from, _) = cfg.position(action.subject).expect("legality checked");
    stacks[from].pop();
    if stacks[from].is_empty() {
        stacks.remove(from);
    }
    match action.dest {
        Destination::Block(y) => {
            let stack = stacks.iter_mut().find(|s| s.last() == Some(&y)).expect("legality checked");
            stack.push(action.subject);
        }
        Destination::Table => stacks.push(vec![action.subject]),
        Destination::Out => {
            out.insert(action.subject);
        }
    }
    Ok(Configuration::from_parts_unchecked(stacks, out))
}

/// Failure of a sequence replay: the zero-based step and its reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("step {step}: {error}")]
pub struct RunError {
    pub step: usize,
    pub error: TransitionError,
}

/// Left fold of [`apply`] over the sequence.
pub fn run(cfg: &Configuration, seq: &MoveSequence) -> Result<Configuration, RunError> {
    run_actions(cfg, seq.actions())
}

pub fn run_actions<I: IntoIterator<Item = Action>>(cfg: &Configuration, actions: I) -> Result<Configuration, RunError> {
    let mut cur = cfg.clone();
    for (step, a) in actions.into_iter().enumerate() {
        cur = apply(&cur, a).map_err(|error| RunError { step, error })?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Color::*;
    use crate::model::Destination::{Block, Out, Table};

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn freedom() {
        let c = cfg("R.G");
        assert!(is_free(&c, G));
        assert!(!is_free(&c, R));
        assert!(!is_free(&cfg("B;out=R"), R));
        assert!(is_free(&cfg("B"), B));
        assert!(!is_free(&cfg("B"), P));
    }

    #[test]
    fn legality_errors() {
        assert_eq!(is_legal(&cfg("R.G|B"), Action::new(G, Block(B))), Ok(()));
        assert_eq!(is_legal(&cfg("R.G"), Action::new(R, Table)), Err(TransitionError::SubjectNotFree));
        assert_eq!(is_legal(&cfg("B;out=R"), Action::new(R, Block(B))), Err(TransitionError::SubjectOut));
        assert_eq!(is_legal(&cfg("B"), Action::new(P, Out)), Err(TransitionError::SubjectMissing));
        assert_eq!(is_legal(&cfg("B;out=R"), Action::new(B, Block(R))), Err(TransitionError::DestOut));
        assert_eq!(is_legal(&cfg("B"), Action::new(B, Block(G))), Err(TransitionError::DestMissing));
        assert_eq!(is_legal(&cfg("R.G|B"), Action::new(B, Block(R))), Err(TransitionError::DestNotFree));
        assert_eq!(is_legal(&cfg("B"), Action::new(B, Block(B))), Err(TransitionError::SelfMove));
    }

    /// Brute force over all 6 x 8 candidate pairs.
    fn brute_force_moves(c: &Configuration) -> Vec<Action> {
        let mut v = Vec::new();
        for x in Color::ALL {
            for d in Destination::ALL {
                let a = Action::new(x, d);
                let noop = d == Table && c.stacks().iter().any(|s| s == &vec![x]);
                if is_legal(c, a).is_ok() && !noop {
                    v.push(a);
                }
            }
        }
        v
    }

    #[test]
    fn legal_move_examples() {
        assert_eq!(
            legal_moves(&cfg("R|G")),
            vec![Action::new(R, Block(G)), Action::new(R, Out), Action::new(G, Block(R)), Action::new(G, Out)]
        );
        assert_eq!(legal_moves(&cfg("R|G")), brute_force_moves(&cfg("R|G")));
        assert!(legal_moves(&Configuration::empty()).is_empty());
        let tall = legal_moves(&cfg("R.G.B.Y.O"));
        assert!(!tall.is_empty() && tall.iter().all(|a| a.subject == O));
        for s in ["R.G|B", "P|O.Y|B;out=R", "G.R|Y|B.O", "-;out=P"] {
            assert_eq!(legal_moves(&cfg(s)), brute_force_moves(&cfg(s)), "{s}");
        }
    }

    #[test]
    fn apply_examples() {
        assert_eq!(apply(&cfg("R.G|B"), Action::new(G, Block(B))).unwrap(), cfg("R|B.G"));
        assert_eq!(apply(&cfg("R|G"), Action::new(R, Out)).unwrap(), cfg("G;out=R"));
        assert_eq!(apply(&cfg("R.G"), Action::new(R, Block(G))), Err(TransitionError::SubjectNotFree));
        assert_eq!(apply(&cfg("R.G|B"), Action::new(G, Table)).unwrap(), cfg("R|B|G"));
    }

    #[test]
    fn run_examples() {
        let c = cfg("R.G|B");
        assert_eq!(run(&c, &MoveSequence::empty()).unwrap(), c);
        let s = MoveSequence::from_actions([Action::new(G, Table), Action::new(B, Block(R))]);
        let stepwise = apply(&apply(&c, Action::new(G, Table)).unwrap(), Action::new(B, Block(R))).unwrap();
        assert_eq!(run(&c, &s).unwrap(), stepwise);
        let bad = MoveSequence::from_actions([Action::new(G, Out), Action::new(G, Table)]);
        assert_eq!(run(&c, &bad), Err(RunError { step: 1, error: TransitionError::SubjectOut }));
    }
}
