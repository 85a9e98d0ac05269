//! Configuration enumeration, ⟨source, target, all minimal plans⟩ record
//! generation, length-stratified splits and recognition-noise emulation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::logic::{self, legal_moves};
use crate::model::{
    parse_config, CanonicalMode, Color, Configuration, Destination, MoveSequence, ParseError, MAX_BLOCKS, MAX_MOVES,
};
use crate::planner::{self, distances, plan_capped, reachable, Horizon};

/// Minimal plan length of a pair, or no permissible sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NoSequence,
    Length(usize),
}

impl Label {
    /// `none, 0, 1, ..., 8`.
    pub fn all() -> Vec<Label> {
        std::iter::once(Label::NoSequence).chain((0..=MAX_MOVES).map(Label::Length)).collect()
    }

    pub fn length(self) -> Option<usize> {
        match self {
            Label::NoSequence => None,
            Label::Length(l) => Some(l),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::NoSequence => f.write_str("none"),
            Label::Length(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for Label {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            return Ok(Label::NoSequence);
        }
        s.parse().map(Label::Length).map_err(|_| ParseError::new(0, format!("bad label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub src: Configuration,
    pub tgt: Configuration,
    /// Minimal plans in lexicographic order; empty for [`Label::NoSequence`].
    pub plans: Vec<MoveSequence>,
    pub label: Label,
    /// More minimal plans exist than were stored.
    pub truncated: bool,
}

impl PairRecord {
    /// Plans the pair and builds its record.
    pub fn from_plan(src: Configuration, tgt: Configuration, horizon: Horizon, max_plans: Option<usize>) -> Self {
        let result = plan_capped(&src, &tgt, horizon, max_plans);
        let label = result.min_length.map_or(Label::NoSequence, Label::Length);
        PairRecord { src, tgt, plans: result.plans, label, truncated: result.truncated }
    }

    /// Checks the record invariants and replays every plan.
    pub fn verify(&self) -> Result<(), String> {
        match self.label {
            Label::NoSequence => {
                if !self.plans.is_empty() {
                    return Err("no-sequence record carries plans".into());
                }
            }
            Label::Length(l) => {
                if self.plans.is_empty() {
                    return Err(format!("length-{l} record has no plans"));
                }
                for p in &self.plans {
                    if p.len() != l {
                        return Err(format!("plan {p} has length {} instead of {l}", p.len()));
                    }
                    let end = logic::run(&self.src, p).map_err(|e| format!("plan {p}: {e}"))?;
                    if !end.same_stacks(&self.tgt) {
                        return Err(format!("plan {p} ends in {end}, not {}", self.tgt));
                    }
                }
            }
        }
        Ok(())
    }

    /// The canonical training target: the lexicographically first plan.
    pub fn first_plan(&self) -> Option<&MoveSequence> {
        self.plans.first()
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("quotas not met after {draws} source draws; achieved {achieved:?}")]
    QuotaInfeasible { draws: usize, achieved: BTreeMap<Label, usize> },
    #[error("generated record failed verification: {0}")]
    Verification(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Every configuration with at most `max_blocks` standing blocks and an
/// empty out set, once per canonical class of `mode`.
///
/// Order: block count, then color subset, then permutation, then the cut
/// points splitting the permutation into stacks.
pub fn enumerate_configs(max_blocks: usize, mode: CanonicalMode) -> Vec<Configuration> {
    assert!(max_blocks <= MAX_BLOCKS, "at most {MAX_BLOCKS} blocks");
    let mut out = Vec::new();
    for k in 0..=max_blocks {
        for subset in combinations(Color::ALL.len(), k) {
            let colors: Vec<Color> = subset.iter().map(|&i| Color::ALL[i]).collect();
            for perm in permutations(&colors) {
                let cuts = if k == 0 { 1 } else { 1usize << (k - 1) };
                for mask in 0..cuts {
                    let mut stacks: Vec<Vec<Color>> = Vec::new();
                    let mut cur = Vec::new();
                    for (i, &c) in perm.iter().enumerate() {
                        cur.push(c);
                        if i + 1 < k && mask & (1 << i) != 0 {
                            stacks.push(std::mem::take(&mut cur));
                        }
                    }
                    if !cur.is_empty() {
                        stacks.push(cur);
                    }
                    if mode == CanonicalMode::Relational && !stacks.windows(2).all(|w| w[0] <= w[1]) {
                        continue;
                    }
                    out.push(Configuration::from_stacks(stacks).expect("valid by construction"));
                }
            }
        }
    }
    out
}

/// Record count per label, `none` first.
pub type Quotas = BTreeMap<Label, usize>;

/// Equal quota for every label in `none, 0..8`.
pub fn uniform_quotas(per_label: usize) -> Quotas {
    Label::all().into_iter().map(|l| (l, per_label)).collect()
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub horizon: Horizon,
    pub max_plans: Option<usize>,
    /// Source draws before giving up on unmet quotas.
    pub max_draws: usize,
    /// Worker threads for planning; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { horizon: Horizon::default(), max_plans: Some(200), max_draws: 200_000, jobs: None }
    }
}

/// Samples pairs until every label quota is met.
///
/// Each round draws a source uniformly, computes its distance to every
/// candidate target and, for each label still short of its quota, takes one
/// unused target of that label uniformly at random. The selected pairs are
/// then planned (in parallel) and every stored plan is replayed.
pub fn make_pairs(
    configs: &[Configuration],
    quotas: &Quotas,
    seed: u64,
    opts: &GenOptions,
) -> Result<Vec<PairRecord>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: BTreeMap<Label, usize> = quotas.iter().filter(|(_, &n)| n > 0).map(|(&l, &n)| (l, n)).collect();
    let mut achieved: BTreeMap<Label, usize> = quotas.keys().map(|&l| (l, 0)).collect();
    let keys: Vec<_> = configs.iter().map(Configuration::stacks_key).collect();
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut pairs: Vec<(usize, usize, Label)> = Vec::new();
    let mut draws = 0;

    while !remaining.is_empty() {
        if draws >= opts.max_draws || configs.is_empty() {
            return Err(DatasetError::QuotaInfeasible { draws, achieved });
        }
        draws += 1;
        let i = rng.gen_range(0..configs.len());
        let src = &configs[i];
        let dist = distances(src, opts.horizon);
        let mut by_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for (j, tgt) in configs.iter().enumerate() {
            let label = if !reachable(src, tgt) {
                Label::NoSequence
            } else {
                match dist.get(&keys[j]) {
                    Some(&d) => Label::Length(d),
                    None => continue,
                }
            };
            if remaining.contains_key(&label) && !used.contains(&(i, j)) {
                by_label.entry(label).or_default().push(j);
            }
        }
        for (label, candidates) in by_label {
            let j = *candidates.choose(&mut rng).expect("non-empty");
            used.insert((i, j));
            pairs.push((i, j, label));
            *achieved.get_mut(&label).expect("quota label") += 1;
            let left = remaining.get_mut(&label).expect("quota label");
            *left -= 1;
            if *left == 0 {
                remaining.remove(&label);
            }
        }
    }

    let build = || {
        pairs
            .par_iter()
            .map(|&(i, j, label)| {
                let rec = PairRecord::from_plan(configs[i].clone(), configs[j].clone(), opts.horizon, opts.max_plans);
                if rec.label != label {
                    return Err(DatasetError::Verification(format!(
                        "{} -> {}: expected label {label}, planner found {}",
                        rec.src, rec.tgt, rec.label
                    )));
                }
                rec.verify().map_err(DatasetError::Verification)?;
                Ok(rec)
            })
            .collect::<Result<Vec<_>, _>>()
    };
    match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| DatasetError::Io(io::Error::other(e)))?
            .install(build),
        None => build(),
    }
}

/// Every ordered pair over `configs`, planned.
pub fn all_pairs(configs: &[Configuration], horizon: Horizon, max_plans: Option<usize>) -> Vec<PairRecord> {
    configs
        .par_iter()
        .flat_map_iter(|src| {
            configs.iter().map(move |tgt| PairRecord::from_plan(src.clone(), tgt.clone(), horizon, max_plans))
        })
        .collect()
}

/// Re-plans the pair and checks the stored label is still minimal.
pub fn confirm_minimal(rec: &PairRecord, horizon: Horizon) -> bool {
    planner::min_plan_length(&rec.src, &rec.tgt, horizon) == rec.label.length()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub ell: usize,
    /// Labels `none` and `0..=ell`.
    pub train: Vec<PairRecord>,
    /// Labels `ell+1..`.
    pub test: Vec<PairRecord>,
}

pub fn split_by_length(records: &[PairRecord], ell: usize) -> SplitSpec {
    assert!((1..MAX_MOVES).contains(&ell), "split length must be in 1..{MAX_MOVES}");
    let (train, test) = records.iter().cloned().partition(|r| match r.label {
        Label::NoSequence => true,
        Label::Length(l) => l <= ell,
    });
    SplitSpec { ell, train, test }
}

/// With probability `p`, applies one validity-preserving corruption:
/// recoloring a standing block with an unused color, or moving a free block
/// onto another block or the table. Scenes with nothing to corrupt come back
/// unchanged.
pub fn perturb_config<R: Rng + ?Sized>(cfg: &Configuration, p: f64, rng: &mut R) -> Configuration {
    assert!((0.0..=1.0).contains(&p), "probability out of range");
    if cfg.block_count() == 0 || !rng.gen_bool(p) {
        return cfg.clone();
    }
    let used = cfg.stack_mask() | cfg.out_mask();
    let unused: Vec<Color> = Color::ALL.into_iter().filter(|c| used & (1 << c.index()) == 0).collect();
    let relocations: Vec<_> = legal_moves(cfg).into_iter().filter(|a| a.dest != Destination::Out).collect();

    let recolor = match (unused.is_empty(), relocations.is_empty()) {
        (true, true) => return cfg.clone(),
        (false, true) => true,
        (true, false) => false,
        (false, false) => rng.gen_bool(0.5),
    };
    if recolor {
        let blocks: Vec<Color> = cfg.stacks().iter().flatten().copied().collect();
        let victim = *blocks.choose(rng).expect("non-empty scene");
        let fresh = *unused.choose(rng).expect("checked");
        let stacks =
            cfg.stacks().iter().map(|s| s.iter().map(|&c| if c == victim { fresh } else { c }).collect()).collect();
        Configuration::new(stacks, cfg.out().clone()).expect("recoloring keeps validity")
    } else {
        let a = *relocations.choose(rng).expect("checked");
        logic::apply(cfg, a).expect("legal relocation")
    }
}

fn format_plans(rec: &PairRecord) -> String {
    rec.plans.iter().map(MoveSequence::to_string).collect::<Vec<_>>().join(";")
}

pub fn format_record(rec: &PairRecord) -> String {
    let mut line = format!("{}\t{}\t{}\t{}", rec.src, rec.tgt, rec.label, format_plans(rec));
    if rec.truncated {
        line.push_str("\ttruncated");
    }
    line
}

pub fn parse_record(line: &str) -> Result<PairRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(4..=5).contains(&fields.len()) {
        return Err(format!("expected 4 or 5 tab-separated fields, found {}", fields.len()));
    }
    let src = parse_config(fields[0]).map_err(|e| format!("source: {e}"))?;
    let tgt = parse_config(fields[1]).map_err(|e| format!("target: {e}"))?;
    let label: Label = fields[2].parse().map_err(|e: ParseError| e.msg)?;
    let plans = match label {
        Label::NoSequence | Label::Length(0) => {
            if !fields[3].is_empty() {
                return Err(format!("label {label} takes an empty plan field"));
            }
            if label == Label::NoSequence {
                Vec::new()
            } else {
                vec![MoveSequence::empty()]
            }
        }
        Label::Length(_) => fields[3]
            .split(';')
            .map(|p| p.parse::<MoveSequence>().map_err(|e| format!("plan {p:?}: {e}")))
            .collect::<Result<_, _>>()?,
    };
    let truncated = match fields.get(4) {
        None => false,
        Some(&"truncated") => true,
        Some(other) => return Err(format!("unknown flag {other:?}")),
    };
    Ok(PairRecord { src, tgt, plans, label, truncated })
}

pub const RECORD_HEADER: &str = "# src\ttgt\tlabel\tplans";

pub fn write_records_to<W: Write>(mut w: W, records: &[PairRecord]) -> io::Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(w, "{}", format_record(r))?;
    }
    w.flush()
}

pub fn write_records(path: &Path, records: &[PairRecord]) -> Result<(), DatasetError> {
    Ok(write_records_to(BufWriter::new(fs::File::create(path)?), records)?)
}

pub fn read_records_from<R: BufRead>(r: R) -> Result<Vec<PairRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_record(&line).map_err(|msg| DatasetError::Parse { line: i + 1, msg })?);
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<PairRecord>, DatasetError> {
    read_records_from(BufReader::new(fs::File::open(path)?))
}

/// Label histogram.
pub fn histogram(records: &[PairRecord]) -> BTreeMap<Label, usize> {
    let mut h = BTreeMap::new();
    for r in records {
        *h.entry(r.label).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::canonical;

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    /// Independent enumeration: insert blocks one at a time at every
    /// possible position and deduplicate by grid key.
    fn grid_configs_by_insertion(k: usize) -> HashSet<crate::model::CanonicalKey> {
        let mut level: Vec<Vec<Vec<Color>>> = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for stacks in &level {
                let present: Vec<Color> = stacks.iter().flatten().copied().collect();
                for c in Color::ALL.into_iter().filter(|c| !present.contains(c)) {
                    for i in 0..stacks.len() {
                        let mut s = stacks.clone();
                        s[i].push(c);
                        next.push(s);
                    }
                    for i in 0..=stacks.len() {
                        let mut s = stacks.clone();
                        s.insert(i, vec![c]);
                        next.push(s);
                    }
                }
            }
            level = next;
        }
        level.into_iter().map(|s| canonical(&Configuration::from_stacks(s).unwrap(), CanonicalMode::Grid)).collect()
    }

    #[test]
    fn grid_counts_match_closed_form() {
        let all = enumerate_configs(4, CanonicalMode::Grid);
        for k in 0..=4 {
            let ours: Vec<_> = all.iter().filter(|c| c.block_count() == k).collect();
            let oracle = grid_configs_by_insertion(k);
            let closed = if k == 0 { 1 } else { (binom(6, k) * (1..=k).product::<usize>()) << (k - 1) };
            assert_eq!(oracle.len(), closed, "k={k}");
            assert_eq!(ours.len(), closed, "k={k}");
            let keys: HashSet<_> = ours.iter().map(|c| canonical(c, CanonicalMode::Grid)).collect();
            assert_eq!(keys, oracle);
        }
        assert_eq!(enumerate_configs(0, CanonicalMode::Grid), vec![Configuration::empty()]);
        assert_eq!(enumerate_configs(1, CanonicalMode::Grid).len(), 7);
    }

    #[test]
    fn relational_enumeration_is_one_per_class() {
        let rel = enumerate_configs(5, CanonicalMode::Relational);
        let keys: HashSet<_> = rel.iter().map(|c| canonical(c, CanonicalMode::Relational)).collect();
        assert_eq!(keys.len(), rel.len());
        let grid_classes: HashSet<_> =
            enumerate_configs(5, CanonicalMode::Grid).iter().map(|c| canonical(c, CanonicalMode::Relational)).collect();
        assert_eq!(keys, grid_classes);
        // sum over k of C(6,k) times the number of ways to arrange k labelled
        // blocks into unordered stacks (1, 1, 3, 13, 73, 501)
        assert_eq!(rel.len(), 1 + 6 + 15 * 3 + 20 * 13 + 15 * 73 + 6 * 501);
    }

    #[test]
    fn quotas_are_met_exactly() {
        let configs = enumerate_configs(3, CanonicalMode::Relational);
        let mut quotas = Quotas::new();
        quotas.insert(Label::NoSequence, 5);
        quotas.insert(Label::Length(0), 4);
        quotas.insert(Label::Length(2), 6);
        let recs = make_pairs(&configs, &quotas, 7, &GenOptions::default()).unwrap();
        assert_eq!(histogram(&recs), quotas);
        for r in &recs {
            r.verify().unwrap();
            match r.label {
                Label::Length(0) => assert!(r.src.same_stacks(&r.tgt)),
                Label::NoSequence => assert!(!reachable(&r.src, &r.tgt)),
                _ => {}
            }
        }
        let again = make_pairs(&configs, &quotas, 7, &GenOptions::default()).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn infeasible_quota_reports_progress() {
        let configs = enumerate_configs(1, CanonicalMode::Relational);
        let mut quotas = Quotas::new();
        quotas.insert(Label::Length(1), 2);
        quotas.insert(Label::Length(5), 1);
        let opts = GenOptions { max_draws: 50, ..GenOptions::default() };
        match make_pairs(&configs, &quotas, 1, &opts) {
            Err(DatasetError::QuotaInfeasible { achieved, .. }) => {
                assert_eq!(achieved[&Label::Length(1)], 2);
                assert_eq!(achieved[&Label::Length(5)], 0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    fn record(src: &str, tgt: &str) -> PairRecord {
        PairRecord::from_plan(cfg(src), cfg(tgt), Horizon::default(), None)
    }

    #[test]
    fn splits() {
        let recs = vec![
            record("R", "G"),
            record("R", "R"),
            record("R|G", "G;out=R"),
            record("R.G", "G.R"),
            record("R.G.B", "B.G.R"),
            record("R.G|B.Y", "Y.B.G.R"),
        ];
        let s = split_by_length(&recs, 1);
        assert!(s.train.iter().all(|r| r.label.length().is_none_or(|l| l <= 1)));
        assert!(s.test.iter().all(|r| r.label.length().is_some_and(|l| l >= 2)));
        assert_eq!(s.train.len() + s.test.len(), recs.len());
        assert!(s.train.iter().any(|r| r.label == Label::NoSequence));
        let s = split_by_length(&recs, 3);
        assert!(s.test.iter().all(|r| r.label.length().unwrap() >= 4));
    }

    #[test]
    fn perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cfg("R.G|B");
        assert_eq!(perturb_config(&c, 0.0, &mut rng), c);
        assert_eq!(perturb_config(&Configuration::empty(), 1.0, &mut rng), Configuration::empty());
        for _ in 0..50 {
            let single = perturb_config(&cfg("R"), 1.0, &mut rng);
            assert_eq!(single.block_count(), 1);
            assert_ne!(single, cfg("R"));
            let p = perturb_config(&c, 1.0, &mut rng);
            assert_ne!(canonical(&p, CanonicalMode::Relational), canonical(&c, CanonicalMode::Relational));
        }
    }

    #[test]
    fn record_file_round_trip() {
        let recs = vec![record("R", "G"), record("R", "R"), record("R.G|B.Y", "Y.B.G.R"), record("R|G|B", "-")];
        let mut buf = Vec::new();
        write_records_to(&mut buf, &recs).unwrap();
        let back = read_records_from(&buf[..]).unwrap();
        assert_eq!(back, recs);
        assert!(read_records_from(&b""[..]).unwrap().is_empty());

        let bad = format!("{RECORD_HEADER}\nR\tG\tnone\t\nR\tR\t0\tmove(R,G,0)\n");
        match read_records_from(bad.as_bytes()) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let line = "R|G\tG.R\t1\tmove(R,G,0)";
        assert_eq!(parse_record(line).unwrap().plans.len(), 1);
        let truncated = format!("{line}\ttruncated");
        assert!(parse_record(&truncated).unwrap().truncated);
    }
}
