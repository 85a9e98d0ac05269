//! Exact planner: reachability and enumeration of every minimal-length move
//! sequence between two configurations.
//!
//! Search is a layered breadth-first search over relationally canonical
//! states. Each state remembers the edges that reach it from the previous
//! layer, so once the first goal layer is found every shortest action
//! sequence can be read off the layered graph.

use std::collections::{HashMap, HashSet};
use std::convert::Infallible;
use std::fmt;

use crate::logic::{self, legal_moves};
use crate::model::{canonical, Action, CanonicalKey, CanonicalMode, Configuration, MoveSequence, MAX_MOVES};

/// Search depth limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Bounded(usize),
    Unbounded,
}

impl Horizon {
    fn allows(self, depth: usize) -> bool {
        match self {
            Horizon::Bounded(h) => depth <= h,
            Horizon::Unbounded => true,
        }
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::Bounded(MAX_MOVES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanStatus {
    NoSequence,
    Plans,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub min_length: Option<usize>,
    /// Distinct plans in lexicographic order of their actions.
    pub plans: Vec<MoveSequence>,
    /// Set when a plan cap cut the enumeration short.
    pub truncated: bool,
}

impl PlanResult {
    pub fn none() -> Self {
        PlanResult { status: PlanStatus::NoSequence, min_length: None, plans: Vec::new(), truncated: false }
    }

    pub fn first(&self) -> Option<&MoveSequence> {
        self.plans.first()
    }
}

impl fmt::Display for PlanResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.min_length {
            None => writeln!(f, "no sequence"),
            Some(len) => {
                writeln!(f, "min_length {len}")?;
                writeln!(f, "plans {}{}", self.plans.len(), if self.truncated { " (truncated)" } else { "" })?;
                for p in &self.plans {
                    writeln!(f, "{}", if p.is_empty() { "[]".to_string() } else { p.to_string() })?;
                }
                Ok(())
            }
        }
    }
}

/// A target can only be reached when every block it stands up is standing
/// in the source; out sets are not compared.
pub fn reachable(src: &Configuration, tgt: &Configuration) -> bool {
    tgt.stack_mask() & !src.stack_mask() == 0
}

/// Layered search graph from one source.
struct Layers {
    states: Vec<Configuration>,
    depth: Vec<usize>,
    /// Edges into the next layer: (action, successor index).
    forward: Vec<Vec<(Action, usize)>>,
    goals: Vec<usize>,
}

fn search<E>(
    src: &Configuration,
    tgt: &Configuration,
    horizon: Horizon,
    step: &mut dyn FnMut(&Configuration, Action) -> Result<Configuration, E>,
) -> Result<Layers, E> {
    let goal_key = tgt.stacks_key();
    let mut layers = Layers { states: vec![src.clone()], depth: vec![0], forward: vec![Vec::new()], goals: Vec::new() };
    let mut index: HashMap<CanonicalKey, usize> = HashMap::new();
    index.insert(canonical(src, CanonicalMode::Relational), 0);
    let mut frontier = vec![0usize];
    let mut d = 0;
    loop {
        layers.goals = frontier.iter().copied().filter(|&i| layers.states[i].stacks_key() == goal_key).collect();
        if !layers.goals.is_empty() || frontier.is_empty() || !horizon.allows(d + 1) {
            return Ok(layers);
        }
        let mut next = Vec::new();
        for &i in &frontier {
            let cur = layers.states[i].clone();
            for a in legal_moves(&cur) {
                let succ = step(&cur, a)?;
                let key = canonical(&succ, CanonicalMode::Relational);
                let j = match index.get(&key) {
                    Some(&j) => j,
                    None => {
                        let j = layers.states.len();
                        index.insert(key, j);
                        layers.states.push(succ);
                        layers.depth.push(d + 1);
                        layers.forward.push(Vec::new());
                        next.push(j);
                        j
                    }
                };
                if layers.depth[j] == d + 1 {
                    layers.forward[i].push((a, j));
                }
            }
        }
        frontier = next;
        d += 1;
    }
}

/// Enumerates shortest plans in lexicographic order, stopping after `cap`.
fn enumerate(layers: &Layers, cap: Option<usize>) -> (Vec<MoveSequence>, bool) {
    // states from which some goal is reachable along layer edges
    let n = layers.states.len();
    let mut useful = vec![false; n];
    for &g in &layers.goals {
        useful[g] = true;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(layers.depth[i]));
    for &i in &order {
        if !useful[i] && layers.forward[i].iter().any(|&(_, j)| useful[j]) {
            useful[i] = true;
        }
    }

    let goal_depth = layers.depth[layers.goals[0]];
    let mut plans = Vec::new();
    let mut path = Vec::with_capacity(goal_depth);
    let mut truncated = false;
    walk(layers, &useful, 0, goal_depth, &mut path, &mut plans, cap, &mut truncated);
    (plans, truncated)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    layers: &Layers,
    useful: &[bool],
    state: usize,
    goal_depth: usize,
    path: &mut Vec<Action>,
    plans: &mut Vec<MoveSequence>,
    cap: Option<usize>,
    truncated: &mut bool,
) {
    if *truncated {
        return;
    }
    if path.len() == goal_depth {
        if cap.is_some_and(|c| plans.len() >= c) {
            *truncated = true;
            return;
        }
        plans.push(MoveSequence::from_actions(path.iter().copied()));
        return;
    }
    for &(a, j) in &layers.forward[state] {
        if useful[j] {
            path.push(a);
            walk(layers, useful, j, goal_depth, path, plans, cap, truncated);
            path.pop();
        }
    }
}

/// Planning with an arbitrary transition function; the action set still
/// comes from the background legality rules.
pub fn plan_with<E>(
    src: &Configuration,
    tgt: &Configuration,
    horizon: Horizon,
    cap: Option<usize>,
    mut step: impl FnMut(&Configuration, Action) -> Result<Configuration, E>,
) -> Result<PlanResult, E> {
    if !reachable(src, tgt) {
        return Ok(PlanResult::none());
    }
    let layers = search(src, tgt, horizon, &mut step)?;
    if layers.goals.is_empty() {
        return Ok(PlanResult::none());
    }
    let min_length = layers.depth[layers.goals[0]];
    let (plans, truncated) = enumerate(&layers, cap);
    Ok(PlanResult { status: PlanStatus::Plans, min_length: Some(min_length), plans, truncated })
}

fn engine_step(cfg: &Configuration, a: Action) -> Result<Configuration, Infallible> {
    Ok(logic::apply(cfg, a).expect("legal_moves only yields legal actions"))
}

/// Every minimal-length plan from `src` to `tgt`.
pub fn plan(src: &Configuration, tgt: &Configuration, horizon: Horizon) -> PlanResult {
    plan_capped(src, tgt, horizon, None)
}

/// As [`plan`], keeping only the first `cap` plans in lexicographic order.
pub fn plan_capped(src: &Configuration, tgt: &Configuration, horizon: Horizon, cap: Option<usize>) -> PlanResult {
    match plan_with(src, tgt, horizon, cap, engine_step) {
        Ok(r) => r,
        Err(never) => match never {},
    }
}

/// Length of the shortest plan without materializing plans.
pub fn min_plan_length(src: &Configuration, tgt: &Configuration, horizon: Horizon) -> Option<usize> {
    if !reachable(src, tgt) {
        return None;
    }
    let layers = match search(src, tgt, horizon, &mut engine_step) {
        Ok(l) => l,
        Err(never) => match never {},
    };
    layers.goals.first().map(|&g| layers.depth[g])
}

/// Minimal distance from `src` to every reachable arrangement of standing
/// blocks, keyed by [`Configuration::stacks_key`]. Each arrangement
/// corresponds to exactly one state since the out set is implied by it.
pub fn distances(src: &Configuration, horizon: Horizon) -> HashMap<CanonicalKey, usize> {
    let mut dist = HashMap::new();
    let mut frontier = vec![src.clone()];
    let mut seen = HashSet::new();
    seen.insert(canonical(src, CanonicalMode::Relational));
    let mut d = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for cfg in &frontier {
            dist.entry(cfg.stacks_key()).or_insert(d);
            if !horizon.allows(d + 1) {
                continue;
            }
            for a in legal_moves(cfg) {
                let succ = logic::apply(cfg, a).expect("legal");
                if seen.insert(canonical(&succ, CanonicalMode::Relational)) {
                    next.push(succ);
                }
            }
        }
        frontier = next;
        d += 1;
    }
    dist
}
