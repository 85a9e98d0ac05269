//! Rule induction for move effects.
//!
//! Transitions `(cfg, move, next)` are turned into ground examples of the
//! location facts that hold (positives) or fail (negatives) after the move.
//! A greedy cover over an exhaustively enumerated clause space then selects
//! effect clauses such as `on(X,Y,t+1) :- move(X,Y,t).` Inertia and move
//! legality are fixed background knowledge, never learned: every block other
//! than the moved one keeps its location. The learned theory plus that
//! background gives a transition model, and planning with it is the same
//! layered search the exact planner runs.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::logic::{is_legal, TransitionError};
use crate::model::{Action, Color, Configuration, Destination};
use crate::planner::{self, Horizon, PlanResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    On,
    OnTable,
    Out,
    Free,
    Move,
    MoveTable,
    MoveOut,
}

impl Predicate {
    pub const ALL: [Predicate; 7] = [
        Predicate::On,
        Predicate::OnTable,
        Predicate::Out,
        Predicate::Free,
        Predicate::Move,
        Predicate::MoveTable,
        Predicate::MoveOut,
    ];

    /// Location fluents that may appear in clause heads.
    pub const HEADS: [Predicate; 3] = [Predicate::On, Predicate::OnTable, Predicate::Out];

    pub fn arity(self) -> usize {
        match self {
            Predicate::On | Predicate::Move => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predicate::On => "on",
            Predicate::OnTable => "ontable",
            Predicate::Out => "out",
            Predicate::Free => "free",
            Predicate::Move => "move",
            Predicate::MoveTable => "move_table",
            Predicate::MoveOut => "move_out",
        }
    }

    fn from_name(s: &str) -> Option<Predicate> {
        Predicate::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
}

/// Predicate applied to variables. Whether it refers to time `t` or `t+1`
/// follows from its position: heads are `t+1`, bodies `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub pred: Predicate,
    pub args: [Var; 2],
}

impl Literal {
    pub fn unary(pred: Predicate, a: Var) -> Self {
        debug_assert_eq!(pred.arity(), 1);
        Literal { pred, args: [a, a] }
    }

    pub fn binary(pred: Predicate, a: Var, b: Var) -> Self {
        debug_assert_eq!(pred.arity(), 2);
        Literal { pred, args: [a, b] }
    }

    pub fn vars(&self) -> &[Var] {
        &self.args[..self.pred.arity()]
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, time: &str) -> fmt::Result {
        write!(f, "{}(", self.pred.name())?;
        for v in self.vars() {
            write!(f, "{v:?},")?;
        }
        write!(f, "{time})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub head: Literal,
    pub body: Vec<Literal>,
}

impl Clause {
    /// Every head variable occurs in the body.
    pub fn is_range_restricted(&self) -> bool {
        self.head.vars().iter().all(|v| self.body.iter().any(|l| l.vars().contains(v)))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.head.fmt_at(f, "t+1")?;
        f.write_str(" :- ")?;
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            l.fmt_at(f, "t")?;
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ClauseParseError(String);

fn parse_literal(text: &str, expect_time: &str) -> Result<Literal, ClauseParseError> {
    let err = || ClauseParseError(format!("bad literal {text:?}"));
    let (name, rest) = text.trim().split_once('(').ok_or_else(err)?;
    let args = rest.strip_suffix(')').ok_or_else(err)?;
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let pred = Predicate::from_name(name.trim()).ok_or_else(err)?;
    if parts.len() != pred.arity() + 1 || parts[pred.arity()] != expect_time {
        return Err(err());
    }
    let var = |s: &str| match s {
        "X" => Ok(Var::X),
        "Y" => Ok(Var::Y),
        _ => Err(err()),
    };
    Ok(if pred.arity() == 2 {
        Literal::binary(pred, var(parts[0])?, var(parts[1])?)
    } else {
        Literal::unary(pred, var(parts[0])?)
    })
}

/// Splits on commas that are not inside parentheses.
fn split_literals(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl FromStr for Clause {
    type Err = ClauseParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().strip_suffix('.').ok_or_else(|| ClauseParseError("clause must end with '.'".into()))?;
        let (head, body) = s.split_once(":-").ok_or_else(|| ClauseParseError("missing ':-'".into()))?;
        let head = parse_literal(head, "t+1")?;
        if !Predicate::HEADS.contains(&head.pred) {
            return Err(ClauseParseError(format!("{} cannot be a head", head.pred.name())));
        }
        let body = split_literals(body).into_iter().map(|l| parse_literal(l, "t")).collect::<Result<Vec<_>, _>>()?;
        let clause = Clause { head, body };
        if !clause.is_range_restricted() {
            return Err(ClauseParseError("head variable missing from body".into()));
        }
        Ok(clause)
    }
}

/// Ground atom over colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub pred: Predicate,
    pub args: [Color; 2],
}

impl Fact {
    pub fn unary(pred: Predicate, a: Color) -> Self {
        Fact { pred, args: [a, a] }
    }

    pub fn binary(pred: Predicate, a: Color, b: Color) -> Self {
        Fact { pred, args: [a, b] }
    }

    /// The block whose location a head fact describes.
    pub fn subject(&self) -> Color {
        self.args[0]
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pred.arity() == 2 {
            write!(f, "{}({},{})", self.pred.name(), self.args[0], self.args[1])
        } else {
            write!(f, "{}({})", self.pred.name(), self.args[0])
        }
    }
}

/// Facts true at one time step, including the action atom, as lookup tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    blocks: Vec<Color>,
    binary: [[[bool; 6]; 6]; 2],
    unary: [[bool; 6]; 5],
}

fn unary_slot(p: Predicate) -> usize {
    match p {
        Predicate::OnTable => 0,
        Predicate::Out => 1,
        Predicate::Free => 2,
        Predicate::MoveTable => 3,
        Predicate::MoveOut => 4,
        _ => unreachable!("binary predicate"),
    }
}

impl State {
    pub fn new(cfg: &Configuration, action: Action) -> Self {
        let mut st = State { blocks: Vec::new(), binary: [[[false; 6]; 6]; 2], unary: [[false; 6]; 5] };
        for stack in cfg.stacks() {
            for (h, &c) in stack.iter().enumerate() {
                st.blocks.push(c);
                if h == 0 {
                    st.set(Fact::unary(Predicate::OnTable, c));
                } else {
                    st.set(Fact::binary(Predicate::On, c, stack[h - 1]));
                }
            }
            st.set(Fact::unary(Predicate::Free, *stack.last().expect("non-empty")));
        }
        for &c in cfg.out() {
            st.blocks.push(c);
            st.set(Fact::unary(Predicate::Out, c));
        }
        st.blocks.sort();
        st.set(action_fact(action));
        st
    }

    fn set(&mut self, f: Fact) {
        match f.pred {
            Predicate::On => self.binary[0][f.args[0].index()][f.args[1].index()] = true,
            Predicate::Move => self.binary[1][f.args[0].index()][f.args[1].index()] = true,
            p => self.unary[unary_slot(p)][f.args[0].index()] = true,
        }
    }

    pub fn holds(&self, f: Fact) -> bool {
        match f.pred {
            Predicate::On => self.binary[0][f.args[0].index()][f.args[1].index()],
            Predicate::Move => self.binary[1][f.args[0].index()][f.args[1].index()],
            p => self.unary[unary_slot(p)][f.args[0].index()],
        }
    }

    pub fn blocks(&self) -> &[Color] {
        &self.blocks
    }

    fn ground(&self, lit: &Literal, x: Color, y: Option<Color>) -> Option<Fact> {
        let bind = |v: Var| match v {
            Var::X => Some(x),
            Var::Y => y,
        };
        Some(Fact { pred: lit.pred, args: [bind(lit.args[0])?, bind(lit.args[1])?] })
    }

    fn body_holds(&self, clause: &Clause, x: Color, y: Option<Color>) -> bool {
        clause.body.iter().all(|l| self.ground(l, x, y).is_some_and(|f| self.holds(f)))
    }

    /// Whether `clause` derives `head` in this state. Variables range over the
    /// blocks of the scene and distinct variables bind distinct blocks.
    pub fn derives(&self, clause: &Clause, head: Fact) -> bool {
        if clause.head.pred != head.pred {
            return false;
        }
        let x = head.args[0];
        if head.pred.arity() == 2 {
            let y = head.args[1];
            return x != y && self.body_holds(clause, x, Some(y));
        }
        let uses_y = clause.body.iter().any(|l| l.vars().contains(&Var::Y));
        if uses_y {
            self.blocks.iter().any(|&y| y != x && self.body_holds(clause, x, Some(y)))
        } else {
            self.body_holds(clause, x, None)
        }
    }

    /// All head atoms the clause derives in this state.
    pub fn consequences(&self, clause: &Clause) -> Vec<Fact> {
        let mut out = Vec::new();
        for &x in &self.blocks {
            if clause.head.pred.arity() == 2 {
                for &y in &self.blocks {
                    let f = Fact::binary(clause.head.pred, x, y);
                    if self.derives(clause, f) {
                        out.push(f);
                    }
                }
            } else {
                let f = Fact::unary(clause.head.pred, x);
                if self.derives(clause, f) {
                    out.push(f);
                }
            }
        }
        out
    }
}

pub fn action_fact(a: Action) -> Fact {
    match a.dest {
        Destination::Block(y) => Fact::binary(Predicate::Move, a.subject, y),
        Destination::Table => Fact::unary(Predicate::MoveTable, a.subject),
        Destination::Out => Fact::unary(Predicate::MoveOut, a.subject),
    }
}

/// Location facts (`on`, `ontable`, `out`) of a configuration.
pub fn location_facts(cfg: &Configuration) -> Vec<Fact> {
    let mut out = Vec::new();
    for stack in cfg.stacks() {
        for (h, &c) in stack.iter().enumerate() {
            out.push(if h == 0 {
                Fact::unary(Predicate::OnTable, c)
            } else {
                Fact::binary(Predicate::On, c, stack[h - 1])
            });
        }
    }
    out.extend(cfg.out().iter().map(|&c| Fact::unary(Predicate::Out, c)));
    out.sort();
    out
}

/// Every head atom that could be asked about in a scene with these blocks.
pub fn groundable_heads(blocks: &[Color]) -> Vec<Fact> {
    let mut out = Vec::new();
    for &x in blocks {
        for &y in blocks {
            if x != y {
                out.push(Fact::binary(Predicate::On, x, y));
            }
        }
        out.push(Fact::unary(Predicate::OnTable, x));
        out.push(Fact::unary(Predicate::Out, x));
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    /// Location facts that held before the move.
    pub before: Vec<Fact>,
}

/// Positive and negative ground examples; each refers to a transition by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExampleSet {
    pub transitions: Vec<Transition>,
    pub positives: Vec<(usize, Fact)>,
    pub negatives: Vec<(usize, Fact)>,
}

impl ExampleSet {
    /// Background inertia: a fact about a block other than the moved one
    /// that already held before the move.
    pub fn background_entails(&self, idx: usize, fact: Fact) -> bool {
        let tr = &self.transitions[idx];
        fact.subject() != tr.action.subject && tr.before.binary_search(&fact).is_ok()
    }
}

/// Builds examples from observed transitions: every groundable head atom
/// after the move is positive if it holds in `next` and negative otherwise.
pub fn make_examples(transitions: &[(Configuration, Action, Configuration)]) -> ExampleSet {
    let mut set = ExampleSet::default();
    for (i, (cfg, action, next)) in transitions.iter().enumerate() {
        let state = State::new(cfg, *action);
        let truth = location_facts(next);
        for head in groundable_heads(state.blocks()) {
            if truth.binary_search(&head).is_ok() {
                set.positives.push((i, head));
            } else {
                set.negatives.push((i, head));
            }
        }
        set.transitions.push(Transition { state, action: *action, before: location_facts(cfg) });
    }
    set
}

/// All range-restricted clauses with a location head and 1..=`max_body` body
/// literals. Head variables are fixed (`X`, or `X,Y` for `on`), so clauses
/// equal up to renaming appear once. Shorter bodies come first.
pub fn enumerate_clauses(max_body: usize) -> Vec<Clause> {
    let mut literals = Vec::new();
    for p in Predicate::ALL {
        if p.arity() == 2 {
            literals.push(Literal::binary(p, Var::X, Var::Y));
            literals.push(Literal::binary(p, Var::Y, Var::X));
        } else {
            literals.push(Literal::unary(p, Var::X));
            literals.push(Literal::unary(p, Var::Y));
        }
    }
    let heads = [
        Literal::binary(Predicate::On, Var::X, Var::Y),
        Literal::unary(Predicate::OnTable, Var::X),
        Literal::unary(Predicate::Out, Var::X),
    ];
    let mut bodies: Vec<Vec<Literal>> = Vec::new();
    for size in 1..=max_body {
        let mut idx: Vec<usize> = (0..size).collect();
        if size > literals.len() {
            break;
        }
        loop {
            bodies.push(idx.iter().map(|&i| literals[i]).collect());
            // next combination
            let mut k = size;
            while k > 0 && idx[k - 1] == literals.len() - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for j in k..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    let mut out = Vec::new();
    for head in heads {
        for body in &bodies {
            let c = Clause { head, body: body.clone() };
            if c.is_range_restricted() {
                out.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Theory {
    pub clauses: Vec<Clause>,
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("no positive examples to learn from")]
    NoPositives,
    #[error("{} positive examples left uncovered", uncovered.len())]
    Incomplete { theory: Theory, uncovered: Vec<(usize, Fact)> },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Greedy cover: repeatedly adds the clause covering the most positives not
/// yet explained (by background inertia or chosen clauses) among clauses
/// covering no negative; ties go to the earlier clause.
pub fn induce(examples: &ExampleSet) -> Result<Theory, IlpError> {
    induce_from(examples, &enumerate_clauses(2))
}

pub fn induce_from(examples: &ExampleSet, candidates: &[Clause]) -> Result<Theory, IlpError> {
    if examples.positives.is_empty() {
        return Err(IlpError::NoPositives);
    }
    let targets: Vec<(usize, Fact)> =
        examples.positives.iter().copied().filter(|&(i, f)| !examples.background_entails(i, f)).collect();

    // coverage of each consistent candidate, as indices into `targets`
    let coverage: Vec<Option<Vec<usize>>> = candidates
        .par_iter()
        .map(|c| {
            let consistent = examples.negatives.iter().all(|&(i, f)| !examples.transitions[i].state.derives(c, f));
            consistent.then(|| {
                targets
                    .iter()
                    .enumerate()
                    .filter(|(_, &(i, f))| examples.transitions[i].state.derives(c, f))
                    .map(|(k, _)| k)
                    .collect()
            })
        })
        .collect();

    let mut covered = vec![false; targets.len()];
    let mut left = targets.len();
    let mut theory = Theory::default();
    while left > 0 {
        let best = coverage
            .iter()
            .enumerate()
            .filter_map(|(ci, cov)| cov.as_ref().map(|cov| (ci, cov.iter().filter(|&&k| !covered[k]).count())))
            .filter(|&(_, n)| n > 0)
            .fold(None, |best: Option<(usize, usize)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((ci, _)) = best else {
            let uncovered = targets.iter().zip(&covered).filter(|(_, &c)| !c).map(|(&t, _)| t).collect();
            return Err(IlpError::Incomplete { theory, uncovered });
        };
        for &k in coverage[ci].as_ref().expect("consistent") {
            if !covered[k] {
                covered[k] = true;
                left -= 1;
            }
        }
        theory.clauses.push(candidates[ci].clone());
    }
    Ok(theory)
}

/// Checks that theory plus background entails every positive and no negative.
/// Examples by transition index.
pub type Examples = Vec<(usize, Fact)>;

/// Positives the theory misses and negatives it wrongly entails.
pub fn check_entailment(theory: &Theory, examples: &ExampleSet) -> (Examples, Examples) {
    let derived = |i: usize, f: Fact| {
        examples.background_entails(i, f) || theory.clauses.iter().any(|c| examples.transitions[i].state.derives(c, f))
    };
    let missed = examples.positives.iter().copied().filter(|&(i, f)| !derived(i, f)).collect();
    let wrong = examples.negatives.iter().copied().filter(|&(i, f)| derived(i, f)).collect();
    (missed, wrong)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("move violates background knowledge: {0}")]
    Illegal(TransitionError),
    #[error("derived facts are inconsistent: {0}")]
    Inconsistent(String),
}

/// Next configuration under the theory: derived effects plus the inertia of
/// every block except the moved one, reassembled into stacks. Surviving
/// stacks keep their order; a block that moved to the table starts a new
/// rightmost stack.
pub fn predict_next(theory: &Theory, cfg: &Configuration, action: Action) -> Result<Configuration, PredictError> {
    is_legal(cfg, action).map_err(PredictError::Illegal)?;
    let state = State::new(cfg, action);
    let derived: Vec<Fact> = theory.clauses.iter().flat_map(|c| state.consequences(c)).collect();
    let overridden: Vec<Color> = derived.iter().map(Fact::subject).collect();

    // one location per block
    let mut location: [Option<Fact>; 6] = [None; 6];
    let carried =
        location_facts(cfg).into_iter().filter(|f| f.subject() != action.subject && !overridden.contains(&f.subject()));
    for f in carried.chain(derived.iter().copied()) {
        let slot = &mut location[f.subject().index()];
        match slot {
            Some(prev) if *prev != f => {
                return Err(PredictError::Inconsistent(format!("{prev} and {f} both hold")));
            }
            _ => *slot = Some(f),
        }
    }

    let mut out = std::collections::BTreeSet::new();
    let mut bottoms = Vec::new();
    let mut above: [Option<Color>; 6] = [None; 6];
    for &b in state.blocks() {
        match location[b.index()] {
            None => return Err(PredictError::Inconsistent(format!("block {b} has no location"))),
            Some(f) => match f.pred {
                Predicate::Out => {
                    out.insert(b);
                }
                Predicate::OnTable => bottoms.push(b),
                Predicate::On => {
                    let below = f.args[1];
                    if !state.blocks().contains(&below) {
                        return Err(PredictError::Inconsistent(format!("{f} names a block not in the scene")));
                    }
                    if let Some(other) = above[below.index()].replace(b) {
                        return Err(PredictError::Inconsistent(format!("{other} and {b} are both on {below}")));
                    }
                }
                _ => unreachable!("location facts only"),
            },
        }
    }

    let original_stack = |c: Color| cfg.position(c).map_or(usize::MAX, |(s, _)| s);
    bottoms.sort_by_key(|&b| (b == action.subject, original_stack(b)));
    let mut stacks = Vec::new();
    let mut placed = 0;
    for b in bottoms {
        let mut stack = vec![b];
        while let Some(next) = above[stack.last().expect("non-empty").index()] {
            if stack.len() > state.blocks().len() {
                break;
            }
            stack.push(next);
        }
        placed += stack.len();
        stacks.push(stack);
    }
    if placed + out.len() != state.blocks().len() {
        return Err(PredictError::Inconsistent("blocks stacked in a cycle or on out blocks".into()));
    }
    Configuration::new(stacks, out).map_err(|e| PredictError::Inconsistent(e.to_string()))
}

/// Exact minimal-plan search using the theory as transition model.
pub fn plan_with_theory(
    theory: &Theory,
    src: &Configuration,
    tgt: &Configuration,
    horizon: Horizon,
    cap: Option<usize>,
) -> Result<PlanResult, PredictError> {
    planner::plan_with(src, tgt, horizon, cap, |c, a| predict_next(theory, c, a))
}

pub fn write_theory<W: Write>(mut w: W, theory: &Theory) -> io::Result<()> {
    write!(w, "{theory}")?;
    w.flush()
}

pub fn save_theory(path: &Path, theory: &Theory) -> Result<(), IlpError> {
    Ok(write_theory(fs::File::create(path)?, theory)?)
}

pub fn read_theory<R: BufRead>(r: R) -> Result<Theory, IlpError> {
    let mut theory = Theory::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        theory.clauses.push(t.parse().map_err(|e: ClauseParseError| IlpError::Parse { line: i + 1, msg: e.0 })?);
    }
    Ok(theory)
}

pub fn load_theory(path: &Path) -> Result<Theory, IlpError> {
    read_theory(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{apply, legal_moves};
    use crate::model::Color::*;
    use crate::model::Destination::{Block, Out, Table};

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    fn transition(s: &str, a: Action) -> (Configuration, Action, Configuration) {
        let c = cfg(s);
        let n = apply(&c, a).unwrap();
        (c, a, n)
    }

    fn effect_theory() -> Theory {
        let text = "on(X,Y,t+1) :- move(X,Y,t).\nontable(X,t+1) :- move_table(X,t).\nout(X,t+1) :- move_out(X,t).\n";
        read_theory(text.as_bytes()).unwrap()
    }

    #[test]
    fn examples_read_off_the_next_state() {
        let ex = make_examples(&[transition("R|G", Action::new(R, Block(G)))]);
        assert!(ex.positives.contains(&(0, Fact::binary(Predicate::On, R, G))));
        assert!(ex.negatives.contains(&(0, Fact::unary(Predicate::OnTable, R))));
        let ex = make_examples(&[transition("R|G", Action::new(R, Out))]);
        assert!(ex.positives.contains(&(0, Fact::unary(Predicate::Out, R))));
        let empty = make_examples(&[]);
        assert!(empty.positives.is_empty() && empty.negatives.is_empty());
        assert!(matches!(induce(&empty), Err(IlpError::NoPositives)));
    }

    #[test]
    fn clause_space() {
        let clauses = enumerate_clauses(2);
        let eq8: Clause = "on(X,Y,t+1) :- move(X,Y,t).".parse().unwrap();
        assert!(clauses.contains(&eq8));
        assert!(clauses.contains(&"ontable(X,t+1) :- move_table(X,t).".parse().unwrap()));
        assert!(clauses.iter().all(Clause::is_range_restricted));
        let unrestricted = Clause {
            head: Literal::binary(Predicate::On, Var::X, Var::Y),
            body: vec![Literal::unary(Predicate::Free, Var::X)],
        };
        assert!(!clauses.contains(&unrestricted));
        assert!("on(X,Y,t+1) :- free(X,t).".parse::<Clause>().is_err());
        let mut sorted = clauses.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), clauses.len());
        assert!(enumerate_clauses(1).iter().all(|c| c.body.len() == 1));
    }

    #[test]
    fn clause_text_round_trip() {
        for c in enumerate_clauses(2) {
            assert_eq!(c.to_string().parse::<Clause>().unwrap(), c);
        }
        assert_eq!(
            "on(X,Y,t+1) :- move(X,Y,t), free(Y,t).".parse::<Clause>().unwrap().to_string(),
            "on(X,Y,t+1) :- move(X,Y,t), free(Y,t)."
        );
    }

    #[test]
    fn single_transition_is_covered() {
        let ex = make_examples(&[transition("R|G", Action::new(R, Block(G)))]);
        let theory = induce(&ex).unwrap();
        let (missed, wrong) = check_entailment(&theory, &ex);
        assert!(missed.is_empty() && wrong.is_empty());
    }

    #[test]
    fn empty_theory_leaves_the_subject_nowhere() {
        let r = predict_next(&Theory::default(), &cfg("R|G"), Action::new(R, Block(G)));
        assert!(matches!(r, Err(PredictError::Inconsistent(m)) if m.contains("no location")));
        let r = predict_next(&effect_theory(), &cfg("R.G"), Action::new(R, Out));
        assert_eq!(r, Err(PredictError::Illegal(TransitionError::SubjectNotFree)));
    }

    #[test]
    fn effect_theory_matches_the_engine() {
        let theory = effect_theory();
        for s in ["R|G", "R.G|B", "R.G.B.Y.O", "P|O.Y|B;out=R", "G.R|Y|B.O", "B;out=R.G"] {
            let c = cfg(s);
            for a in legal_moves(&c) {
                assert_eq!(predict_next(&theory, &c, a).unwrap(), apply(&c, a).unwrap(), "{s} {a}");
            }
        }
        let after = predict_next(&theory, &cfg("R|G"), Action::new(R, Block(G))).unwrap();
        assert_eq!(after, cfg("G.R"));
    }

    #[test]
    fn wrong_theory_is_caught_as_inconsistent() {
        let bad: Theory = read_theory("on(X,Y,t+1) :- free(X,t), free(Y,t).\n".as_bytes()).unwrap();
        assert!(matches!(predict_next(&bad, &cfg("R|G|B"), Action::new(R, Table)), Err(PredictError::Inconsistent(_))));
    }

    #[test]
    fn theory_file_errors_name_the_line() {
        let text = "% effects\non(X,Y,t+1) :- move(X,Y,t).\nfree(X,t+1) :- move_out(X,t).\n";
        match read_theory(text.as_bytes()) {
            Err(IlpError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let mut buf = Vec::new();
        write_theory(&mut buf, &effect_theory()).unwrap();
        assert_eq!(read_theory(&buf[..]).unwrap(), effect_theory());
    }
}
