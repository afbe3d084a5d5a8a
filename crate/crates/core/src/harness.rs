//! Evaluation harness: runs conditions over a corpus into an append-only
//! ledger, computes metrics from the closed ledger, renders reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BaselineMode};
use crate::corpus::Corpus;
use crate::kb::ClinicalModel;
use crate::pipeline::{run_pipeline, Condition, PipelineResult, Stage};
use crate::types::{NliItem, ReasoningFamily, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionKind {
    Carenli,
    OraclePlanner,
    ForcedFamily(ReasoningFamily),
    AgnosticCot,
    AgnosticDirect,
}

impl ConditionKind {
    pub fn is_baseline(self) -> bool {
        matches!(self, ConditionKind::AgnosticCot | ConditionKind::AgnosticDirect)
    }

    fn pipeline_condition(self) -> Option<Condition> {
        match self {
            ConditionKind::Carenli => Some(Condition::Carenli),
            ConditionKind::OraclePlanner => Some(Condition::OraclePlanner),
            ConditionKind::ForcedFamily(f) => Some(Condition::ForcedFamily(f)),
            _ => None,
        }
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionKind::Carenli => f.write_str("carenli"),
            ConditionKind::OraclePlanner => f.write_str("oracle"),
            ConditionKind::ForcedFamily(fam) => write!(f, "forced:{}", fam.as_str()),
            ConditionKind::AgnosticCot => f.write_str(BaselineMode::AgnosticCot.as_str()),
            ConditionKind::AgnosticDirect => f.write_str(BaselineMode::AgnosticDirect.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown condition `{0}` (expected carenli, oracle, forced:<family>, agnostic-cot or agnostic-direct)")]
pub struct UnknownCondition(pub String);

impl FromStr for ConditionKind {
    type Err = UnknownCondition;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "carenli" => Ok(ConditionKind::Carenli),
            "oracle" | "oracle-planner" | "oracle_planner" => Ok(ConditionKind::OraclePlanner),
            "agnostic-cot" | "agnostic_cot" | "cot" => Ok(ConditionKind::AgnosticCot),
            "agnostic-direct" | "agnostic_direct" | "direct" => Ok(ConditionKind::AgnosticDirect),
            _ => lower
                .strip_prefix("forced:")
                .and_then(|f| f.parse().ok())
                .map(ConditionKind::ForcedFamily)
                .ok_or_else(|| UnknownCondition(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub runs: usize,
}

impl ConditionSpec {
    pub fn new(kind: ConditionKind, runs: usize) -> Self {
        Self { kind, runs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Pipeline(Box<PipelineResult>),
    Baseline { verdict: Verdict, reply: String },
    Error { stage: Stage, message: String, exhausted: bool },
}

/// One attempt of one item. Gold labels ride along so metrics never need
/// the corpus again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub backend: String,
    pub condition: String,
    pub run: usize,
    pub item_id: String,
    pub gold_family: Option<ReasoningFamily>,
    pub gold_verdict: Option<Verdict>,
    pub outcome: Outcome,
}

impl LedgerEntry {
    pub fn final_verdict(&self) -> Option<Verdict> {
        match &self.outcome {
            Outcome::Pipeline(r) => Some(r.final_verdict),
            Outcome::Baseline { verdict, .. } => Some(*verdict),
            Outcome::Error { .. } => None,
        }
    }

    pub fn routed_family(&self) -> Option<ReasoningFamily> {
        match &self.outcome {
            Outcome::Pipeline(r) => Some(r.routing.family),
            _ => None,
        }
    }

    pub fn is_exhaustion(&self) -> bool {
        matches!(self.outcome, Outcome::Error { exhausted: true, .. })
    }

    fn correct(&self) -> bool {
        self.gold_verdict.is_some() && self.final_verdict() == self.gold_verdict
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("condition needs at least one run")]
    NoRuns,
    #[error("{0} needs a remote or replay backend")]
    BaselineOnMock(ConditionKind),
    #[error("ledger: {0}")]
    Io(#[from] std::io::Error),
    #[error("ledger line {line}: {message}")]
    Ledger { line: usize, message: String },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the machine's parallelism.
    pub workers: usize,
}

/// Writes entries strictly in attempt order, as soon as the prefix is complete.
struct OrderedWriter<W: Write> {
    out: Option<W>,
    next: usize,
    pending: BTreeMap<usize, LedgerEntry>,
    done: Vec<LedgerEntry>,
}

impl<W: Write> OrderedWriter<W> {
    fn push(&mut self, idx: usize, entry: LedgerEntry) -> std::io::Result<()> {
        self.pending.insert(idx, entry);
        while let Some(e) = self.pending.remove(&self.next) {
            if let Some(out) = &mut self.out {
                serde_json::to_writer(&mut *out, &e).map_err(std::io::Error::other)?;
                out.write_all(b"\n")?;
                out.flush()?;
            }
            self.done.push(e);
            self.next += 1;
        }
        Ok(())
    }
}

fn attempt(
    item: &NliItem,
    run: usize,
    spec: &ConditionSpec,
    model: &ClinicalModel,
    backend: &dyn Backend,
) -> LedgerEntry {
    let outcome = match spec.kind.pipeline_condition() {
        Some(cond) => match run_pipeline(item, model, cond, backend) {
            Ok(r) => Outcome::Pipeline(Box::new(r)),
            Err(e) => Outcome::Error {
                stage: e.stage,
                exhausted: e.is_backend_exhaustion(),
                message: e.kind.to_string(),
            },
        },
        None => {
            let mode = match spec.kind {
                ConditionKind::AgnosticCot => BaselineMode::AgnosticCot,
                _ => BaselineMode::AgnosticDirect,
            };
            match backend.run_baseline(item, mode) {
                Ok((verdict, reply)) => Outcome::Baseline { verdict, reply },
                Err(e) => Outcome::Error {
                    stage: Stage::Baseline,
                    exhausted: e.is_exhaustion(),
                    message: e.to_string(),
                },
            }
        }
    };
    LedgerEntry {
        backend: backend.label(),
        condition: spec.kind.to_string(),
        run,
        item_id: item.id.clone(),
        gold_family: item.gold_family,
        gold_verdict: item.gold_verdict,
        outcome,
    }
}

/// Attempts every item `runs` times on a bounded worker pool. A single
/// writer appends each entry to `ledger` (when given) in attempt order
/// before the call returns; per-item failures are recorded, not raised.
pub fn run_condition(
    corpus: &Corpus,
    spec: &ConditionSpec,
    model: &ClinicalModel,
    backend: &dyn Backend,
    ledger: Option<&mut dyn Write>,
    options: &RunOptions,
) -> Result<Vec<LedgerEntry>, HarnessError> {
    if spec.runs == 0 {
        return Err(HarnessError::NoRuns);
    }
    if spec.kind.is_baseline() && backend.is_mock() {
        return Err(HarnessError::BaselineOnMock(spec.kind));
    }
    let n_items = corpus.items.len();
    let total = n_items * spec.runs;
    let workers = match options.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .clamp(1, total.max(1));

    let next = AtomicUsize::new(0);
    let mut writer = OrderedWriter {
        out: ledger,
        next: 0,
        pending: BTreeMap::new(),
        done: Vec::with_capacity(total),
    };
    let (tx, rx) = mpsc::channel::<(usize, LedgerEntry)>();
    std::thread::scope(|scope| -> Result<(), HarnessError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= total {
                    break;
                }
                let (run, i) = (idx / n_items, idx % n_items);
                let entry = attempt(&corpus.items[i], run + 1, spec, model, backend);
                if tx.send((idx, entry)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (idx, entry) in rx {
            if let Err(e) = writer.push(idx, entry) {
                // Stop handing out work; workers drain and exit.
                next.store(total, Ordering::SeqCst);
                return Err(e.into());
            }
        }
        Ok(())
    })?;
    Ok(writer.done)
}

pub fn append_ledger(path: impl AsRef<Path>, entries: &[LedgerEntry]) -> std::io::Result<()> {
    let mut out = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
    for e in entries {
        serde_json::to_writer(&mut out, e).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn load_ledger(path: impl AsRef<Path>) -> Result<Vec<LedgerEntry>, HarnessError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Ledger {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_ledgers(paths: &[impl AsRef<Path>]) -> Result<Vec<LedgerEntry>, HarnessError> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(load_ledger(p)?);
    }
    Ok(all)
}

pub fn write_ledger(path: impl AsRef<Path>, entries: &[LedgerEntry]) -> std::io::Result<()> {
    if path.as_ref().exists() {
        fs::remove_file(&path)?;
    }
    append_ledger(path, entries)
}

// ---- metrics ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyMetrics {
    pub attempts: usize,
    pub accuracy: f64,
    /// Accuracy of each run, in run order.
    pub per_run_accuracy: Vec<f64>,
    /// Routed family equals gold; `None` for baselines.
    pub routing_accuracy: Option<f64>,
    pub per_run_routing_accuracy: Vec<f64>,
    /// Flagged invalid exactly when the initial verdict was wrong.
    pub verifier_accuracy: Option<f64>,
    /// Percent of items whose refined verdict differs from the initial one.
    pub delta: Option<f64>,
    /// Percent of changed items that became correct; `None` when Δ = 0.
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SplitAccuracy {
    pub routed_correctly: usize,
    pub accuracy_when_correct: Option<f64>,
    pub routed_incorrectly: usize,
    pub accuracy_when_incorrect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub backend: String,
    pub condition: String,
    pub runs: usize,
    pub per_family: BTreeMap<ReasoningFamily, FamilyMetrics>,
    /// Gold family (row) × routed family (column), in `ReasoningFamily::ALL` order.
    pub confusion: [[usize; 4]; 4],
    /// Attempts per gold family that never reached routing (errors, baselines).
    pub unrouted: [usize; 4],
    pub split: SplitAccuracy,
    pub error_counts: BTreeMap<Stage, usize>,
}

impl GroupMetrics {
    pub fn confusion_row_sum(&self, family: ReasoningFamily) -> usize {
        self.confusion[family.index()].iter().sum::<usize>() + self.unrouted[family.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoReport {
    /// Over (configuration, family) cells: routing accuracy vs accuracy.
    pub overall: Option<f64>,
    /// Over (configuration, run) cells within each family.
    pub per_family: BTreeMap<ReasoningFamily, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub groups: Vec<GroupMetrics>,
    pub rho: RhoReport,
}

impl MetricsReport {
    pub fn group(&self, condition: &str) -> Option<&GroupMetrics> {
        self.groups.iter().find(|g| g.condition == condition)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("ledger is empty")]
    EmptyLedger,
}

fn frac(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn family_metrics(entries: &[&LedgerEntry], runs: &[usize], is_pipeline_condition: bool) -> FamilyMetrics {
    let attempts = entries.len();
    let correct = entries.iter().filter(|e| e.correct()).count();
    let per_run = |f: &dyn Fn(&LedgerEntry) -> bool| -> Vec<f64> {
        runs.iter()
            .map(|&r| {
                let in_run: Vec<_> = entries.iter().filter(|e| e.run == r).collect();
                frac(in_run.iter().filter(|e| f(e)).count(), in_run.len()).unwrap_or(0.0)
            })
            .collect()
    };
    let routed_ok = |e: &LedgerEntry| e.gold_family.is_some() && e.routed_family() == e.gold_family;
    let results: Vec<&PipelineResult> = entries
        .iter()
        .filter_map(|e| match &e.outcome {
            Outcome::Pipeline(r) => Some(r.as_ref()),
            _ => None,
        })
        .collect();
    let golds: Vec<Option<Verdict>> = entries
        .iter()
        .filter(|e| matches!(e.outcome, Outcome::Pipeline(_)))
        .map(|e| e.gold_verdict)
        .collect();
    let verifier_ok = results
        .iter()
        .zip(&golds)
        .filter(|(r, g)| (!r.verifier_report.valid) == (Some(r.initial_verdict) != **g))
        .count();
    let changed: Vec<(&&PipelineResult, &Option<Verdict>)> = results
        .iter()
        .zip(&golds)
        .filter(|(r, _)| r.final_verdict != r.initial_verdict)
        .collect();
    let gained = changed.iter().filter(|(r, g)| Some(r.final_verdict) == **g).count();

    FamilyMetrics {
        attempts,
        accuracy: frac(correct, attempts).unwrap_or(0.0),
        per_run_accuracy: per_run(&|e| e.correct()),
        routing_accuracy: if is_pipeline_condition {
            frac(entries.iter().filter(|e| routed_ok(e)).count(), attempts)
        } else {
            None
        },
        per_run_routing_accuracy: if is_pipeline_condition { per_run(&routed_ok) } else { vec![] },
        verifier_accuracy: frac(verifier_ok, results.len()),
        delta: frac(changed.len(), results.len()).map(|d| d * 100.0),
        gain: frac(gained, changed.len()).map(|g| g * 100.0),
    }
}

/// Groups by (backend, condition) in first-seen order. Pure in the ledger.
pub fn compute_metrics(ledger: &[LedgerEntry]) -> Result<MetricsReport, MetricsError> {
    if ledger.is_empty() {
        return Err(MetricsError::EmptyLedger);
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut by_group: HashMap<(String, String), Vec<&LedgerEntry>> = HashMap::new();
    for e in ledger {
        let key = (e.backend.clone(), e.condition.clone());
        if !by_group.contains_key(&key) {
            order.push(key.clone());
        }
        by_group.entry(key).or_default().push(e);
    }

    let mut groups = Vec::new();
    for key in order {
        let entries = &by_group[&key];
        let mut runs: Vec<usize> = entries.iter().map(|e| e.run).collect();
        runs.sort_unstable();
        runs.dedup();

        let is_pipeline = key
            .1
            .parse::<ConditionKind>()
            .map_or(true, |k| !k.is_baseline());
        let mut per_family = BTreeMap::new();
        for f in ReasoningFamily::ALL {
            let fam: Vec<&LedgerEntry> = entries.iter().copied().filter(|e| e.gold_family == Some(f)).collect();
            if !fam.is_empty() {
                per_family.insert(f, family_metrics(&fam, &runs, is_pipeline));
            }
        }

        let mut confusion = [[0usize; 4]; 4];
        let mut unrouted = [0usize; 4];
        let mut split = SplitAccuracy::default();
        let (mut ok_when_right, mut ok_when_wrong) = (0, 0);
        let mut error_counts = BTreeMap::new();
        for e in entries {
            if let Outcome::Error { stage, .. } = &e.outcome {
                *error_counts.entry(*stage).or_insert(0) += 1;
            }
            let Some(gold) = e.gold_family else { continue };
            match e.routed_family() {
                Some(routed) => {
                    confusion[gold.index()][routed.index()] += 1;
                    if routed == gold {
                        split.routed_correctly += 1;
                        ok_when_right += e.correct() as usize;
                    } else {
                        split.routed_incorrectly += 1;
                        ok_when_wrong += e.correct() as usize;
                    }
                }
                None => unrouted[gold.index()] += 1,
            }
        }
        split.accuracy_when_correct = frac(ok_when_right, split.routed_correctly);
        split.accuracy_when_incorrect = frac(ok_when_wrong, split.routed_incorrectly);

        groups.push(GroupMetrics {
            backend: key.0,
            condition: key.1,
            runs: runs.len(),
            per_family,
            confusion,
            unrouted,
            split,
            error_counts,
        });
    }

    let rho = rho_report(&groups);
    Ok(MetricsReport { groups, rho })
}

fn rho_report(groups: &[GroupMetrics]) -> RhoReport {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for g in groups {
        for m in g.per_family.values() {
            if let Some(r) = m.routing_accuracy {
                xs.push(r);
                ys.push(m.accuracy);
            }
        }
    }
    let overall = spearman_rho(&xs, &ys).ok();
    let per_family = ReasoningFamily::ALL
        .iter()
        .map(|&f| {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for g in groups {
                if let Some(m) = g.per_family.get(&f) {
                    xs.extend(&m.per_run_routing_accuracy);
                    if !m.per_run_routing_accuracy.is_empty() {
                        ys.extend(&m.per_run_accuracy);
                    }
                }
            }
            (f, spearman_rho(&xs, &ys).ok())
        })
        .collect();
    RhoReport { overall, per_family }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RhoError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooShort,
    #[error("a constant series has no rank correlation")]
    DegenerateInput,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Σ(t³ − t)/12 over tie groups.
fn tie_correction(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        total += (t * t * t - t) / 12.0;
    }
    total
}

/// Spearman's ρ with the tie-corrected rank-difference formula.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, RhoError> {
    if x.len() != y.len() {
        return Err(RhoError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(RhoError::TooShort);
    }
    let nf = n as f64;
    let base = (nf * nf * nf - nf) / 12.0;
    let sx = base - tie_correction(x);
    let sy = base - tie_correction(y);
    if sx <= 0.0 || sy <= 0.0 {
        return Err(RhoError::DegenerateInput);
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(((sx + sy - d2) / (2.0 * (sx * sy).sqrt())).clamp(-1.0, 1.0))
}

// ---- reports ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (markdown or csv)")),
        }
    }
}

/// Metrics emitted per (group, family) in CSV, in this order.
pub const CSV_METRICS: [&str; 5] = ["accuracy", "routing_accuracy", "verifier_accuracy", "delta", "gain"];

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}", v * 100.0))
}

fn one_dp(x: Option<f64>, missing: &str) -> String {
    x.map_or_else(|| missing.to_string(), |v| format!("{v:.1}"))
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

fn family_table(
    out: &mut String,
    title: &str,
    report: &MetricsReport,
    cell: impl Fn(&FamilyMetrics) -> String,
) {
    out.push_str(&format!("## {title}\n\n| Backend | Condition |"));
    for f in ReasoningFamily::ALL {
        out.push_str(&format!(" {} |", f.title()));
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---:|".repeat(4));
    out.push('\n');
    for g in &report.groups {
        out.push_str(&format!("| {} | {} |", g.backend, g.condition));
        for f in ReasoningFamily::ALL {
            let c = g.per_family.get(&f).map_or_else(|| "".to_string(), &cell);
            out.push_str(&format!(" {c} |"));
        }
        out.push('\n');
    }
    out.push('\n');
}

fn render_markdown(report: &MetricsReport) -> String {
    let mut out = String::from("# Evaluation report\n\n");
    family_table(&mut out, "Accuracy (%)", report, |m| {
        let runs = m.per_run_accuracy.iter().map(|a| format!("{:.1}", a * 100.0)).collect::<Vec<_>>();
        if runs.len() > 1 {
            format!("{:.1} ({})", m.accuracy * 100.0, runs.join("/"))
        } else {
            format!("{:.1}", m.accuracy * 100.0)
        }
    });
    family_table(&mut out, "Routing accuracy (%)", report, |m| pct(m.routing_accuracy));
    family_table(&mut out, "Verifier accuracy (%)", report, |m| pct(m.verifier_accuracy));
    family_table(&mut out, "Mind change: Δ (%) / gain (%)", report, |m| {
        format!("{} / {}", one_dp(m.delta, "n/a"), one_dp(m.gain, "--"))
    });

    out.push_str("## Routing confusion (gold × routed)\n\n");
    for g in &report.groups {
        if g.confusion.iter().flatten().all(|&c| c == 0) {
            continue;
        }
        out.push_str(&format!("### {} / {}\n\n| Gold \\ Routed |", g.backend, g.condition));
        for f in ReasoningFamily::ALL {
            out.push_str(&format!(" {} |", f.title()));
        }
        out.push_str(" Unrouted |\n|---|");
        out.push_str(&"---:|".repeat(5));
        out.push('\n');
        for f in ReasoningFamily::ALL {
            out.push_str(&format!("| {} |", f.title()));
            for c in g.confusion[f.index()] {
                out.push_str(&format!(" {c} |"));
            }
            out.push_str(&format!(" {} |\n", g.unrouted[f.index()]));
        }
        out.push('\n');
    }

    out.push_str("## Accuracy by routing correctness (%)\n\n| Backend | Condition | Routed correctly | Routed incorrectly |\n|---|---|---:|---:|\n");
    for g in &report.groups {
        let s = g.split;
        out.push_str(&format!(
            "| {} | {} | {} (n={}) | {} (n={}) |\n",
            g.backend,
            g.condition,
            pct(s.accuracy_when_correct),
            s.routed_correctly,
            pct(s.accuracy_when_incorrect),
            s.routed_incorrectly
        ));
    }
    out.push('\n');

    out.push_str("## Spearman ρ (routing accuracy vs accuracy)\n\n| Scope | ρ |\n|---|---:|\n");
    let rho = |r: Option<f64>| r.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}"));
    out.push_str(&format!("| overall | {} |\n", rho(report.rho.overall)));
    for (f, r) in &report.rho.per_family {
        out.push_str(&format!("| {} | {} |\n", f.title(), rho(*r)));
    }
    out.push('\n');

    let errors: Vec<_> = report.groups.iter().filter(|g| !g.error_counts.is_empty()).collect();
    if !errors.is_empty() {
        out.push_str("## Pipeline errors\n\n| Backend | Condition | Stage | Count |\n|---|---|---|---:|\n");
        for g in errors {
            for (stage, n) in &g.error_counts {
                out.push_str(&format!("| {} | {} | {} | {} |\n", g.backend, g.condition, stage, n));
            }
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per (backend, condition, family, metric). Fractions are in
/// [0, 1]; Δ and gain are percentages; undefined gain is `--`, metrics that
/// do not apply are `NA`.
fn render_csv(report: &MetricsReport) -> String {
    let mut out = String::from("backend,condition,family,metric,value\n");
    for g in &report.groups {
        for f in ReasoningFamily::ALL {
            let Some(m) = g.per_family.get(&f) else { continue };
            for metric in CSV_METRICS {
                let value = match metric {
                    "accuracy" => Some(m.accuracy),
                    "routing_accuracy" => m.routing_accuracy,
                    "verifier_accuracy" => m.verifier_accuracy,
                    "delta" => m.delta,
                    _ => m.gain,
                };
                let text = match (metric, value) {
                    (_, Some(v)) => format!("{v}"),
                    ("gain", None) if m.delta.is_some() => "--".to_string(),
                    _ => "NA".to_string(),
                };
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_field(&g.backend),
                    csv_field(&g.condition),
                    f.as_str(),
                    metric,
                    text
                ));
            }
        }
    }
    out
}
