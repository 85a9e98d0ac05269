//! Sequence metrics, report files and the train-short/test-long benchmark.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{perturb_config, split_by_length, Label, PairRecord};
use crate::ilp::IlpError;
use crate::logic::run;
use crate::model::{Action, MAX_MOVES};
use crate::sequencer::{train_method, Method, MethodParams, Prediction};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {records} records")]
    LengthMismatch { predictions: usize, records: usize },
    #[error(transparent)]
    Training(#[from] IlpError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Slot count for step-level accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlaMode {
    /// Eight slots, short sequences padded with no-op slots.
    #[default]
    Padded,
    /// As many slots as the longer of prediction and truth.
    MaxLen,
}

fn check_lengths(predictions: &[Prediction], records: &[PairRecord]) -> Result<(), EvalError> {
    if predictions.len() != records.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), records: records.len() });
    }
    Ok(())
}

/// True when the prediction replays from the source to the target. Claiming
/// "no sequence" is valid exactly for records that have none.
pub fn semantic_valid(prediction: &Prediction, rec: &PairRecord) -> bool {
    match prediction {
        Prediction::NoSequence => rec.label == Label::NoSequence,
        Prediction::Sequence(s) => run(&rec.src, s).is_ok_and(|end| end.same_stacks(&rec.tgt)),
    }
}

/// Whether the prediction equals one of the record's minimal plans. When
/// the stored set was truncated, any valid plan of minimal length counts,
/// since it belongs to the full set.
pub fn is_match(prediction: &Prediction, rec: &PairRecord) -> bool {
    match prediction {
        Prediction::NoSequence => rec.label == Label::NoSequence,
        Prediction::Sequence(s) => {
            rec.plans.contains(s)
                || (rec.truncated && rec.label == Label::Length(s.len()) && semantic_valid(prediction, rec))
        }
    }
}

fn slots(p: &Prediction) -> Vec<Action> {
    p.sequence().map(|s| s.actions().collect()).unwrap_or_default()
}

fn slot_score(pred: &[Action], truth: &[Action], mode: SlaMode) -> f64 {
    let len = match mode {
        SlaMode::Padded => MAX_MOVES.max(pred.len()).max(truth.len()),
        SlaMode::MaxLen => pred.len().max(truth.len()),
    };
    if len == 0 {
        return 1.0;
    }
    let same = (0..len).filter(|&i| pred.get(i) == truth.get(i)).count();
    same as f64 / len as f64
}

/// Best per-slot agreement with any stored plan, in `[0, 1]`.
pub fn record_sla(prediction: &Prediction, rec: &PairRecord, mode: SlaMode) -> f64 {
    if is_match(prediction, rec) {
        return 1.0;
    }
    let pred = slots(prediction);
    if rec.plans.is_empty() {
        return slot_score(&pred, &[], mode);
    }
    rec.plans.iter().map(|p| slot_score(&pred, &p.actions().collect::<Vec<_>>(), mode)).fold(0.0, f64::max)
}

fn percent(hits: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * hits / n as f64
    }
}

/// Full-sequence accuracy, in percent.
pub fn fsa(predictions: &[Prediction], records: &[PairRecord]) -> Result<f64, EvalError> {
    check_lengths(predictions, records)?;
    let hits = predictions.iter().zip(records).filter(|(p, r)| is_match(p, r)).count();
    Ok(percent(hits as f64, records.len()))
}

/// Step-level accuracy, in percent.
pub fn sla(predictions: &[Prediction], records: &[PairRecord], mode: SlaMode) -> Result<f64, EvalError> {
    check_lengths(predictions, records)?;
    let total: f64 = predictions.iter().zip(records).map(|(p, r)| record_sla(p, r, mode)).sum();
    Ok(percent(total, records.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthStats {
    pub n: usize,
    pub fsa: f64,
    pub sla: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub n: usize,
    pub fsa: f64,
    pub sla: f64,
    pub validity: f64,
    pub per_length: BTreeMap<Label, LengthStats>,
}

pub fn evaluate(
    method: &str,
    dataset: &str,
    predictions: &[Prediction],
    records: &[PairRecord],
    mode: SlaMode,
) -> Result<EvalReport, EvalError> {
    check_lengths(predictions, records)?;
    let mut groups: BTreeMap<Label, (usize, f64, f64)> = BTreeMap::new();
    let (mut hits, mut steps, mut valid) = (0.0, 0.0, 0.0);
    for (p, r) in predictions.iter().zip(records) {
        let m = if is_match(p, r) { 1.0 } else { 0.0 };
        let s = record_sla(p, r, mode);
        hits += m;
        steps += s;
        if semantic_valid(p, r) {
            valid += 1.0;
        }
        let g = groups.entry(r.label).or_default();
        g.0 += 1;
        g.1 += m;
        g.2 += s;
    }
    let n = records.len();
    Ok(EvalReport {
        method: method.to_string(),
        dataset: dataset.to_string(),
        n,
        fsa: percent(hits, n),
        sla: percent(steps, n),
        validity: percent(valid, n),
        per_length: groups
            .into_iter()
            .map(|(l, (k, h, s))| (l, LengthStats { n: k, fsa: percent(h, k), sla: percent(s, k) }))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
}

pub const REPORT_HEADER: &str = "method\tdataset\tn\tfsa\tsla\tvalidity\tper_length";

fn format_lengths(per_length: &BTreeMap<Label, LengthStats>) -> String {
    let parts: Vec<String> = per_length.iter().map(|(l, s)| format!("{l}:{}/{}/{}", s.n, s.fsa, s.sla)).collect();
    parts.join(";")
}

fn parse_lengths(s: &str) -> Result<BTreeMap<Label, LengthStats>, String> {
    let mut out = BTreeMap::new();
    for part in s.split(';').filter(|p| !p.is_empty()) {
        let (label, rest) = part.split_once(':').ok_or_else(|| format!("bad length entry {part:?}"))?;
        let f: Vec<&str> = rest.split('/').collect();
        if f.len() != 3 {
            return Err(format!("bad length entry {part:?}"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        out.insert(
            label.parse().map_err(|e| format!("{e}"))?,
            LengthStats { n: f[0].parse().map_err(|e| format!("{e}"))?, fsa: num(f[1])?, sla: num(f[2])? },
        );
    }
    Ok(out)
}

/// Serializes reports. TSV keeps full precision for exact re-reading; the
/// markdown table rounds to two decimals.
pub fn render_reports(reports: &[EvalReport], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Tsv => {
            out.push_str(REPORT_HEADER);
            out.push('\n');
            for r in reports {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.method,
                    r.dataset,
                    r.n,
                    r.fsa,
                    r.sla,
                    r.validity,
                    format_lengths(&r.per_length)
                );
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Method | FSA | SLA |\n|---|---:|---:|\n");
            for r in reports {
                let _ = writeln!(out, "| {} | {:.2} | {:.2} |", r.method, r.fsa, r.sla);
            }
        }
    }
    out
}

pub fn write_reports(reports: &[EvalReport], path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    Ok(fs::write(path, render_reports(reports, format))?)
}

pub fn read_reports_from<R: BufRead>(r: R) -> Result<Vec<EvalReport>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line == REPORT_HEADER {
            continue;
        }
        let err = |msg: String| EvalError::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
        out.push(EvalReport {
            method: f[0].to_string(),
            dataset: f[1].to_string(),
            n: f[2].parse().map_err(|e| err(format!("{e}")))?,
            fsa: num(f[3])?,
            sla: num(f[4])?,
            validity: num(f[5])?,
            per_length: parse_lengths(f[6]).map_err(err)?,
        });
    }
    Ok(out)
}

pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>, EvalError> {
    read_reports_from(BufReader::new(fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InductionRow {
    pub ell: usize,
    pub train: usize,
    pub test: usize,
    pub fsa: f64,
    pub sla: f64,
}

/// Trains on records of length at most `ell` (plus no-sequence records) and
/// scores on the longer ones, for every `ell` in `ells`. With `noise > 0`
/// both sides of every test pair go through [`perturb_config`] while the
/// ground truth stays that of the clean pair. Splits with an empty side
/// are skipped.
pub fn induction_benchmark(
    method: Method,
    records: &[PairRecord],
    ells: &[usize],
    noise: f64,
    params: &MethodParams,
    seed: u64,
) -> Result<Vec<InductionRow>, EvalError> {
    let mut rows = Vec::new();
    for &ell in ells {
        let split = split_by_length(records, ell);
        if split.test.is_empty() || split.train.is_empty() {
            log::info!("{method} ell={ell}: empty split side, skipped");
            continue;
        }
        let model = train_method(method, &split.train, params, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000 ^ ell as u64);
        let inputs: Vec<_> = split
            .test
            .iter()
            .map(|r| (perturb_config(&r.src, noise, &mut rng), perturb_config(&r.tgt, noise, &mut rng)))
            .collect();
        let preds = model.predict_all(&inputs);
        let row = InductionRow {
            ell,
            train: split.train.len(),
            test: split.test.len(),
            fsa: fsa(&preds, &split.test)?,
            sla: sla(&preds, &split.test, SlaMode::Padded)?,
        };
        log::info!("{method} ell={ell}: train {} test {} fsa {:.2} sla {:.2}", row.train, row.test, row.fsa, row.sla);
        rows.push(row);
    }
    Ok(rows)
}

pub fn render_induction(method: Method, rows: &[InductionRow]) -> String {
    let mut out = String::from("method\tell\ttrain\ttest\tfsa\tsla\n");
    for r in rows {
        let _ = writeln!(out, "{method}\t{}\t{}\t{}\t{:.2}\t{:.2}", r.ell, r.train, r.test, r.fsa, r.sla);
    }
    out
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Color::*, Destination, MoveSequence};
    use crate::planner::Horizon;

    fn rec(src: &str, tgt: &str) -> PairRecord {
        PairRecord::from_plan(src.parse().unwrap(), tgt.parse().unwrap(), Horizon::default(), None)
    }

    fn seq(s: &str) -> Prediction {
        Prediction::Sequence(s.parse().unwrap())
    }

    fn sample() -> Vec<PairRecord> {
        vec![rec("R|G", "G.R"), rec("R.G", "G.R"), rec("R", "G"), rec("R.G|B", "B.G.R"), rec("Y", "Y")]
    }

    #[test]
    fn stored_plans_score_full_marks() {
        let records = sample();
        let preds: Vec<_> = records
            .iter()
            .map(|r| r.first_plan().cloned().map_or(Prediction::NoSequence, Prediction::Sequence))
            .collect();
        assert_eq!(fsa(&preds, &records).unwrap(), 100.0);
        assert_eq!(sla(&preds, &records, SlaMode::Padded).unwrap(), 100.0);
        // every stored plan, not just the first
        for r in &records {
            for p in &r.plans {
                assert!(is_match(&Prediction::Sequence(p.clone()), r));
            }
        }
    }

    #[test]
    fn empty_predictions_miss_nonzero_lengths() {
        let records: Vec<_> = sample().into_iter().filter(|r| r.label.length().is_some_and(|l| l > 0)).collect();
        let preds = vec![Prediction::Sequence(MoveSequence::empty()); records.len()];
        assert_eq!(fsa(&preds, &records).unwrap(), 0.0);
        assert!(matches!(fsa(&preds[1..], &records), Err(EvalError::LengthMismatch { .. })));
        assert!(records.iter().all(|r| !semantic_valid(&Prediction::Sequence(MoveSequence::empty()), r)));
    }

    #[test]
    fn longer_valid_plan_is_valid_but_not_a_match() {
        let r = rec("R|G", "G.R");
        // detour through the table, then the real move
        let detour = seq("move(R,table,0),move(R,G,1)");
        assert!(semantic_valid(&detour, &r));
        assert!(!is_match(&detour, &r));
        let report = evaluate("x", "d", &[detour], std::slice::from_ref(&r), SlaMode::Padded).unwrap();
        assert_eq!((report.fsa, report.validity), (0.0, 100.0));
    }

    #[test]
    fn padded_slot_arithmetic() {
        // a two-move truth: B onto R, then G onto B
        let rec2 = rec("R|G|B", "R.B.G");
        assert_eq!(rec2.plans.len(), 1);
        let first = seq("move(B,R,0),move(Y,table,1)");
        assert_eq!(record_sla(&first, &rec2, SlaMode::Padded), 0.875);
        assert_eq!(record_sla(&first, &rec2, SlaMode::MaxLen), 0.5);
        let exact = Prediction::Sequence(rec2.plans[0].clone());
        assert_eq!(record_sla(&exact, &rec2, SlaMode::Padded), 1.0);
    }

    #[test]
    fn no_sequence_conventions() {
        let none = rec("R", "G");
        assert!(is_match(&Prediction::NoSequence, &none));
        assert!(semantic_valid(&Prediction::NoSequence, &none));
        assert_eq!(record_sla(&Prediction::NoSequence, &none, SlaMode::Padded), 1.0);
        let some = rec("R|G", "G.R");
        assert!(!is_match(&Prediction::NoSequence, &some));
        assert_eq!(record_sla(&Prediction::NoSequence, &some, SlaMode::Padded), 0.875);
        let wrong = Prediction::Sequence(MoveSequence::from_actions([Action::new(R, Destination::Out)]));
        assert!(!is_match(&wrong, &none));
    }

    #[test]
    fn reports_render_and_round_trip() {
        let records = sample();
        let preds: Vec<_> = records
            .iter()
            .map(|r| r.first_plan().cloned().map_or(Prediction::NoSequence, Prediction::Sequence))
            .collect();
        let mut report = evaluate("ILP", "sample", &preds, &records, SlaMode::Padded).unwrap();
        let md = render_reports(std::slice::from_ref(&report), ReportFormat::Markdown);
        assert!(md.contains("| ILP | 100.00 | 100.00 |"), "{md}");
        report.sla = 100.0 / 3.0;
        let tsv = render_reports(std::slice::from_ref(&report), ReportFormat::Tsv);
        assert_eq!(read_reports_from(tsv.as_bytes()).unwrap(), vec![report.clone()]);
        assert_eq!(render_reports(&[], ReportFormat::Tsv), format!("{REPORT_HEADER}\n"));
        assert_eq!(render_reports(&[], ReportFormat::Markdown).lines().count(), 2);
        assert!(matches!(read_reports_from("a\tb\n".as_bytes()), Err(EvalError::Parse { line: 1, .. })));
    }

    #[test]
    fn per_length_breakdown() {
        let records = sample();
        let preds = vec![Prediction::NoSequence; records.len()];
        let report = evaluate("FC", "sample", &preds, &records, SlaMode::Padded).unwrap();
        assert_eq!(report.per_length[&Label::NoSequence].fsa, 100.0);
        assert_eq!(report.per_length[&Label::Length(1)].n, 1);
        assert_eq!(report.fsa, 20.0);
        assert!(report.sla >= report.fsa && report.validity >= report.fsa);
    }

    #[test]
    fn rank_correlation() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]), None);
        // ties use averaged ranks: [1.5,1.5,3] vs [1,2,3]
        let rho = spearman(&[0.0, 0.0, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((rho - 0.8660254037844387).abs() < 1e-12);
    }
}
