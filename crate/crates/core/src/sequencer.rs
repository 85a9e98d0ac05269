//! The three learned sequencers behind one prediction interface.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::PairRecord;
use crate::ilp::{self, IlpError, Theory};
use crate::logic::apply;
use crate::mlp::{Mlp, TrainConfig, DEFAULT_WIDTHS};
use crate::model::{Action, Configuration, MoveSequence};
use crate::planner::Horizon;
use crate::qlearn::{QParams, QTable};

/// A sequencer's answer for one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prediction {
    NoSequence,
    Sequence(MoveSequence),
}

impl Prediction {
    pub fn sequence(&self) -> Option<&MoveSequence> {
        match self {
            Prediction::NoSequence => None,
            Prediction::Sequence(s) => Some(s),
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::NoSequence => f.write_str("none"),
            Prediction::Sequence(s) if s.is_empty() => f.write_str("(empty)"),
            Prediction::Sequence(s) => write!(f, "{s}"),
        }
    }
}

pub trait Sequencer: Send + Sync {
    fn predict(&self, src: &Configuration, tgt: &Configuration) -> Prediction;

    fn predict_all(&self, pairs: &[(Configuration, Configuration)]) -> Vec<Prediction> {
        pairs.iter().map(|(s, t)| self.predict(s, t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mlp,
    Q,
    Ilp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mlp, Method::Q, Method::Ilp];

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Mlp => "FC",
            Method::Q => "QL",
            Method::Ilp => "ILP",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mlp => "mlp",
            Method::Q => "q",
            Method::Ilp => "ilp",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(Method::Mlp),
            "q" => Ok(Method::Q),
            "ilp" => Ok(Method::Ilp),
            _ => Err(format!("unknown method {s:?} (expected mlp, q or ilp)")),
        }
    }
}

/// Decoded network output. An empty decode for a pair whose stacks differ
/// reads as "no sequence".
impl Sequencer for Mlp {
    fn predict(&self, src: &Configuration, tgt: &Configuration) -> Prediction {
        mlp_prediction(src, tgt, Mlp::predict(self, src, tgt))
    }

    fn predict_all(&self, pairs: &[(Configuration, Configuration)]) -> Vec<Prediction> {
        let decoded = self.predict_many(pairs);
        pairs.iter().zip(decoded).map(|((s, t), seq)| mlp_prediction(s, t, seq)).collect()
    }
}

fn mlp_prediction(src: &Configuration, tgt: &Configuration, seq: MoveSequence) -> Prediction {
    if seq.is_empty() && !src.same_stacks(tgt) {
        Prediction::NoSequence
    } else {
        Prediction::Sequence(seq)
    }
}

#[derive(Debug, Clone)]
pub struct QSequencer {
    pub table: QTable,
    pub horizon: usize,
}

impl Sequencer for QSequencer {
    fn predict(&self, src: &Configuration, tgt: &Configuration) -> Prediction {
        self.table.rollout(src, tgt, self.horizon).map_or(Prediction::NoSequence, Prediction::Sequence)
    }
}

#[derive(Debug, Clone)]
pub struct IlpSequencer {
    pub theory: Theory,
    pub horizon: Horizon,
}

impl Sequencer for IlpSequencer {
    /// First minimal plan under the theory. A theory that cannot predict some
    /// transition yields no sequence for the pair.
    fn predict(&self, src: &Configuration, tgt: &Configuration) -> Prediction {
        match ilp::plan_with_theory(&self.theory, src, tgt, self.horizon, Some(1)) {
            Ok(r) => r.first().cloned().map_or(Prediction::NoSequence, Prediction::Sequence),
            Err(e) => {
                log::debug!("theory failed on {src} -> {tgt}: {e}");
                Prediction::NoSequence
            }
        }
    }
}

/// Hyperparameters for training any of the three methods.
#[derive(Debug, Clone)]
pub struct MethodParams {
    pub mlp_widths: Vec<usize>,
    pub mlp: TrainConfig,
    pub q: QParams,
    /// Q-learning episodes per training pair.
    pub q_episodes_per_pair: usize,
    /// Most transitions handed to rule induction.
    pub ilp_max_transitions: usize,
    pub ilp_horizon: Horizon,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            mlp_widths: DEFAULT_WIDTHS.to_vec(),
            mlp: TrainConfig::default(),
            q: QParams::default(),
            q_episodes_per_pair: 50,
            ilp_max_transitions: 2000,
            ilp_horizon: Horizon::Unbounded,
        }
    }
}

/// Every distinct transition along the stored plans, in first-seen order.
pub fn plan_transitions(records: &[PairRecord]) -> Vec<(Configuration, Action, Configuration)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for rec in records {
        for plan in &rec.plans {
            let mut cur = rec.src.clone();
            for a in plan.actions() {
                let next = apply(&cur, a).expect("stored plans replay");
                if seen.insert((cur.to_string(), a)) {
                    out.push((cur.clone(), a, next.clone()));
                }
                cur = next;
            }
        }
    }
    out
}

/// Induces a theory from the plan transitions of `records`, sampling down to
/// the configured maximum.
pub fn induce_from_records(records: &[PairRecord], params: &MethodParams, seed: u64) -> Result<Theory, IlpError> {
    let mut transitions = plan_transitions(records);
    if transitions.len() > params.ilp_max_transitions {
        transitions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        transitions.truncate(params.ilp_max_transitions);
    }
    let examples = ilp::make_examples(&transitions);
    ilp::induce(&examples)
}

/// Trains `method` on `records` and returns it behind the common interface.
pub fn train_method(
    method: Method,
    records: &[PairRecord],
    params: &MethodParams,
    seed: u64,
) -> Result<Box<dyn Sequencer>, IlpError> {
    Ok(match method {
        Method::Mlp => {
            let mut model = Mlp::new(&params.mlp_widths, seed);
            model.train(records, &TrainConfig { seed, ..params.mlp.clone() });
            Box::new(model)
        }
        Method::Q => {
            let pairs: Vec<_> = records.iter().map(|r| (r.src.clone(), r.tgt.clone())).collect();
            let table = QTable::train(&pairs, params.q_episodes_per_pair * pairs.len(), &params.q, seed);
            Box::new(QSequencer { table, horizon: params.q.horizon })
        }
        Method::Ilp => {
            let theory = induce_from_records(records, params, seed)?;
            Box::new(IlpSequencer { theory, horizon: params.ilp_horizon })
        }
    })
}
