//! Goal-conditioned tabular Q-learning over (current configuration, target)
//! states with the legal moves as actions.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logic::{apply, legal_moves};
use crate::model::{
    canonical, parse_config, Action, CanonicalKey, CanonicalMode, Configuration, MoveSequence, MAX_MOVES,
};
use crate::planner::reachable;

pub const GOAL_REWARD: f64 = 1.0;
pub const STEP_REWARD: f64 = -0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct QParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub horizon: usize,
}

impl Default for QParams {
    fn default() -> Self {
        QParams { alpha: 0.1, gamma: 0.9, epsilon_start: 1.0, epsilon_end: 0.05, horizon: MAX_MOVES }
    }
}

impl QParams {
    /// Linear decay from start to end over the run.
    pub fn epsilon(&self, episode: usize, episodes: usize) -> f64 {
        if episodes <= 1 {
            return self.epsilon_end;
        }
        let frac = episode as f64 / (episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Largest |Q| the rewards allow.
    pub fn q_bound(&self) -> f64 {
        (GOAL_REWARD + STEP_REWARD.abs() * self.horizon as f64) / (1.0 - self.gamma)
    }
}

/// +1 on reaching the target (stacks compared relationally), a small
/// step cost otherwise.
pub fn reward(next: &Configuration, target: &Configuration) -> f64 {
    if next.same_stacks(target) {
        GOAL_REWARD
    } else {
        STEP_REWARD
    }
}

type StateKey = (CanonicalKey, CanonicalKey);

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    state: Configuration,
    target: Configuration,
    /// Legal actions of `state` in [`legal_moves`] order.
    values: Vec<(Action, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QTable {
    entries: HashMap<StateKey, Entry>,
}

#[derive(Debug, Error)]
pub enum QTableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn key(state: &Configuration, target: &Configuration) -> StateKey {
    (canonical(state, CanonicalMode::Relational), target.stacks_key())
}

fn greedy(values: &[(Action, f64)]) -> Option<(Action, f64)> {
    let mut best: Option<(Action, f64)> = None;
    for &(a, q) in values {
        if best.is_none_or(|(_, b)| q > b) {
            best = Some((a, q));
        }
    }
    best
}

impl QTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn entry(&mut self, state: &Configuration, target: &Configuration) -> &mut Entry {
        self.entries.entry(key(state, target)).or_insert_with(|| Entry {
            state: state.canonicalized(),
            target: target.without_out().canonicalized(),
            values: legal_moves(state).into_iter().map(|a| (a, 0.0)).collect(),
        })
    }

    /// Q-values known for a state, in action order.
    pub fn values(&self, state: &Configuration, target: &Configuration) -> Option<&[(Action, f64)]> {
        self.entries.get(&key(state, target)).map(|e| e.values.as_slice())
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.values().flat_map(|e| e.values.iter().map(|&(_, q)| q))
    }

    /// Runs `episodes` epsilon-greedy episodes, cycling through the pairs in
    /// a freshly shuffled order on every pass. Pairs whose source already
    /// matches the target, or that cannot reach it, are skipped.
    pub fn train(pairs: &[(Configuration, Configuration)], episodes: usize, params: &QParams, seed: u64) -> QTable {
        let mut table = QTable::default();
        table.train_more(pairs, episodes, params, seed);
        table
    }

    pub fn train_more(
        &mut self,
        pairs: &[(Configuration, Configuration)],
        episodes: usize,
        params: &QParams,
        seed: u64,
    ) {
        let usable: Vec<&(Configuration, Configuration)> =
            pairs.iter().filter(|(s, t)| reachable(s, t) && !s.same_stacks(t)).collect();
        if usable.is_empty() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..usable.len()).collect();
        for ep in 0..episodes {
            if ep % usable.len() == 0 {
                order.shuffle(&mut rng);
            }
            let (src, tgt) = usable[order[ep % usable.len()]];
            let eps = params.epsilon(ep, episodes);
            self.episode(src, tgt, eps, params, &mut rng);
        }
    }

    fn episode(&mut self, src: &Configuration, tgt: &Configuration, eps: f64, params: &QParams, rng: &mut ChaCha8Rng) {
        let mut cur = src.clone();
        for _ in 0..params.horizon {
            if cur.block_count() == 0 {
                return;
            }
            let values = &self.entry(&cur, tgt).values;
            let idx = if rng.gen_bool(eps) {
                rng.gen_range(0..values.len())
            } else {
                let (a, _) = greedy(values).expect("non-empty");
                values.iter().position(|&(b, _)| b == a).expect("present")
            };
            let action = values[idx].0;
            let next = apply(&cur, action).expect("legal by construction");
            let r = reward(&next, tgt);
            let done = r == GOAL_REWARD;
            let target_value = if done || next.block_count() == 0 {
                r
            } else {
                let best = greedy(&self.entry(&next, tgt).values).map_or(0.0, |(_, q)| q);
                r + params.gamma * best
            };
            let q = &mut self.entry(&cur, tgt).values[idx].1;
            *q += params.alpha * (target_value - *q);
            if done {
                return;
            }
            cur = next;
        }
    }

    /// Greedy policy execution. `None` when a state on the way was never
    /// seen or the target is not reached within the horizon.
    pub fn rollout(&self, src: &Configuration, tgt: &Configuration, horizon: usize) -> Option<MoveSequence> {
        if src.same_stacks(tgt) {
            return Some(MoveSequence::empty());
        }
        let mut cur = src.clone();
        let mut actions = Vec::new();
        for _ in 0..horizon {
            let (a, _) = greedy(self.values(&cur, tgt)?)?;
            cur = apply(&cur, a).expect("table holds legal actions only");
            actions.push(a);
            if cur.same_stacks(tgt) {
                return Some(MoveSequence::from_actions(actions));
            }
        }
        None
    }

    /// `state-key<TAB>action<TAB>q` lines; the state key is the current
    /// configuration and the target joined by `>`.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut entries: Vec<&Entry> = self.entries.values().collect();
        entries.sort_by_key(|e| (e.state.to_string(), e.target.to_string()));
        writeln!(w, "# state>target\taction\tq")?;
        for e in entries {
            for (a, q) in &e.values {
                writeln!(w, "{}>{}\t{}\t{}", e.state, e.target, a, q)?;
            }
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), QTableError> {
        Ok(self.write_to(BufWriter::new(fs::File::create(path)?))?)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<QTable, QTableError> {
        let mut table = QTable::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| QTableError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let (s, t) = fields[0].split_once('>').ok_or_else(|| err("state key needs '>'".into()))?;
            let state = parse_config(s).map_err(|e| err(e.to_string()))?;
            let target = parse_config(t).map_err(|e| err(e.to_string()))?;
            let action: Action = fields[1].parse().map_err(|e: crate::model::ParseError| err(e.msg))?;
            let q: f64 = fields[2].parse().map_err(|_| err(format!("bad q-value {:?}", fields[2])))?;
            if !q.is_finite() {
                return Err(err("q-value must be finite".into()));
            }
            let entry = table.entry(&state, &target);
            match entry.values.iter_mut().find(|(a, _)| *a == action) {
                Some(slot) => slot.1 = q,
                None => return Err(err(format!("action {action} is not legal in {state}"))),
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<QTable, QTableError> {
        QTable::read_from(BufReader::new(fs::File::open(path)?))
    }
}
