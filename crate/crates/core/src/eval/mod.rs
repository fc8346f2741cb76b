//! Metrics, significance testing, threshold sweeps, ablations, error
//! propagation, production recall and the cost model.

mod runs;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use runs::{
    ablation_matrix, error_propagation_report, gap_pairs, AblationRow, AblationTable, AblationToggles, Attribution,
    ErrorCategory, ErrorPropagation, ExtractionMode,
};

use crate::error::{Error, Result};
use crate::gap::{classify_gap, GapClass, GapConfig};
use crate::Execution;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub item_id: String,
    pub gold: GapClass,
    pub predicted: GapClass,
}

impl LabeledPair {
    pub fn new(item_id: impl Into<String>, gold: GapClass, predicted: GapClass) -> Self {
        Self {
            item_id: item_id.into(),
            gold,
            predicted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: GapClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
    /// No gold items of this class; recall is reported as 0.
    pub zero_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`, classes in [`GapClass::ALL`] order.
    pub confusion: [[usize; 3]; 3],
    pub total: usize,
}

fn class_index(c: GapClass) -> usize {
    GapClass::ALL.iter().position(|x| *x == c).expect("closed enum")
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One-vs-rest precision, recall and F1 per class plus unweighted macro
/// means. A class absent from both gold and predictions is left out of the
/// macro means.
pub fn classification_metrics(pairs: &[LabeledPair]) -> Result<MetricsTable> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("labeled pairs"));
    }
    let mut confusion = [[0usize; 3]; 3];
    for p in pairs {
        confusion[class_index(p.gold)][class_index(p.predicted)] += 1;
    }
    let mut per_class = Vec::new();
    let (mut sp, mut sr, mut sf, mut n) = (0.0, 0.0, 0.0, 0usize);
    for (i, class) in GapClass::ALL.iter().enumerate() {
        let tp = confusion[i][i];
        let support: usize = confusion[i].iter().sum();
        let predicted: usize = (0..3).map(|g| confusion[g][i]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = harmonic(precision, recall);
        if support > 0 || predicted > 0 {
            sp += precision;
            sr += recall;
            sf += f1;
            n += 1;
        }
        per_class.push(ClassMetrics {
            class: *class,
            precision,
            recall,
            f1,
            support,
            predicted,
            zero_support: support == 0,
        });
    }
    let trace: usize = (0..3).map(|i| confusion[i][i]).sum();
    let n = n.max(1) as f64;
    Ok(MetricsTable {
        per_class,
        macro_precision: sp / n,
        macro_recall: sr / n,
        macro_f1: sf / n,
        accuracy: ratio(trace, pairs.len()),
        confusion,
        total: pairs.len(),
    })
}

impl MetricsTable {
    pub fn class(&self, c: GapClass) -> &ClassMetrics {
        &self.per_class[class_index(c)]
    }

    /// Aligned text table, values in percent.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>9} {:>9} {:>8}",
            "class", "precision", "recall", "f1", "support"
        );
        for c in &self.per_class {
            let _ = writeln!(
                s,
                "{:<12} {:>9.1} {:>9.1} {:>9.1} {:>8}{}",
                c.class.label(),
                100.0 * c.precision,
                100.0 * c.recall,
                100.0 * c.f1,
                c.support,
                if c.zero_support { "  (no support)" } else { "" }
            );
        }
        let _ = writeln!(
            s,
            "{:<12} {:>9.1} {:>9.1} {:>9.1} {:>8}",
            "macro avg",
            100.0 * self.macro_precision,
            100.0 * self.macro_recall,
            100.0 * self.macro_f1,
            self.total
        );
        let _ = writeln!(s, "accuracy {:.1}", 100.0 * self.accuracy);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// `mean(a) - mean(b)` on the original items.
    pub delta_observed: f64,
    pub p_value: f64,
    pub n_resamples: usize,
    pub seed: u64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;
const BOOTSTRAP_BLOCK: usize = 500;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One-sided paired bootstrap of "A beats B": the p-value is the share of
/// resamples in which B's mean is at least A's. Resamples are drawn in
/// fixed blocks, each from its own seeded stream, so the result does not
/// depend on the execution mode.
pub fn paired_bootstrap(a: &[f64], b: &[f64], n: usize, seed: u64, exec: Execution) -> Result<BootstrapResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("bootstrap scores"));
    }
    if n < 1000 {
        return Err(Error::InvalidConfig(format!(
            "at least 1000 resamples required, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = diffs.len();
    let blocks = n.div_ceil(BOOTSTRAP_BLOCK);
    let hits: usize = exec
        .map_range(blocks, |blk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(blk as u64);
            let todo = BOOTSTRAP_BLOCK.min(n - blk * BOOTSTRAP_BLOCK);
            (0..todo)
                .filter(|_| {
                    let s: f64 = (0..m).map(|_| diffs[rng.gen_range(0..m)]).sum();
                    s <= 0.0
                })
                .count()
        })
        .into_iter()
        .sum();
    Ok(BootstrapResult {
        delta_observed: mean(a) - mean(b),
        p_value: hits as f64 / n as f64,
        n_resamples: n,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: String,
    pub alignment: f64,
    pub gold: GapClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Items classified as anything but Compliant.
    pub flagged: usize,
    pub metrics: MetricsTable,
}

/// Reclassify every item at each `delta` (with `delta_full` fixed).
pub fn threshold_sweep(items: &[ScoredItem], deltas: &[f64], cfg: &GapConfig) -> Result<Vec<SweepRow>> {
    if deltas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("deltas must be sorted ascending".into()));
    }
    deltas
        .iter()
        .map(|&d| {
            let c = cfg.with_delta(d);
            let pairs: Vec<LabeledPair> = items
                .iter()
                .map(|it| LabeledPair::new(it.item_id.clone(), it.gold, classify_gap(it.alignment, &c)))
                .collect();
            Ok(SweepRow {
                delta: d,
                flagged: pairs.iter().filter(|p| p.predicted != GapClass::Compliant).count(),
                metrics: classification_metrics(&pairs)?,
            })
        })
        .collect()
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>8} {:>9} {:>9} {:>9}",
        "delta", "flagged", "macro_p", "macro_r", "macro_f1"
    );
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{:>6.2} {:>8} {:>9.1} {:>9.1} {:>9.1}",
            r.delta,
            r.flagged,
            100.0 * m.macro_precision,
            100.0 * m.macro_recall,
            100.0 * m.macro_f1
        );
    }
    s
}

/// System recall corrected for the manual process missing gaps itself:
/// `caught / (caught + missed / manual_recall)`.
pub fn estimate_production_recall(caught: u64, missed: u64, manual_recall: f64) -> Result<f64> {
    if !(manual_recall > 0.0 && manual_recall <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "manual recall {manual_recall} outside (0, 1]"
        )));
    }
    let denom = caught as f64 + missed as f64 / manual_recall;
    if denom == 0.0 {
        return Err(Error::EmptyInput("caught and missed counts"));
    }
    Ok(caught as f64 / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPhase {
    pub name: String,
    pub infra_monthly: f64,
    pub analyst_monthly: f64,
    pub docs_per_month: u64,
}

impl CostPhase {
    pub fn new(name: &str, infra_monthly: f64, analyst_monthly: f64, docs_per_month: u64) -> Self {
        Self {
            name: name.into(),
            infra_monthly,
            analyst_monthly,
            docs_per_month,
        }
    }

    pub fn total(&self) -> f64 {
        self.infra_monthly + self.analyst_monthly
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub name: String,
    pub total: f64,
    /// Fractional change against the baseline total.
    pub delta_pct: f64,
    /// Infrastructure cost per processed document.
    pub per_doc: f64,
}

pub fn cost_model(phases: &[CostPhase], baseline: &CostPhase) -> Result<Vec<CostRow>> {
    if baseline.analyst_monthly.is_nan() || baseline.analyst_monthly <= 0.0 {
        return Err(Error::InvalidConfig("baseline analyst cost must be positive".into()));
    }
    let base = baseline.total();
    phases
        .iter()
        .map(|p| {
            if p.infra_monthly < 0.0 || p.analyst_monthly < 0.0 {
                return Err(Error::InvalidConfig(format!("negative cost in phase {}", p.name)));
            }
            if p.docs_per_month == 0 {
                return Err(Error::InvalidConfig(format!("phase {} processes no documents", p.name)));
            }
            Ok(CostRow {
                name: p.name.clone(),
                total: p.total(),
                delta_pct: (p.total() - base) / base,
                per_doc: p.infra_monthly / p.docs_per_month as f64,
            })
        })
        .collect()
}

/// Deployment cost inputs: manual baseline and three phases at 2,400
/// documents a month.
pub fn reference_cost_phases() -> (CostPhase, Vec<CostPhase>) {
    (
        CostPhase::new("Manual (baseline)", 0.0, 45_000.0, 2_400),
        vec![
            CostPhase::new("Phase 2", 11_200.0, 37_000.0, 2_400),
            CostPhase::new("Phase 3", 11_200.0, 22_000.0, 2_400),
            CostPhase::new("Phase 4", 11_200.0, 9_000.0, 2_400),
        ],
    )
}

pub fn render_costs(rows: &[CostRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>10} {:>7} {:>9}", "phase", "total", "delta", "per_doc");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<20} {:>10.0} {:>+6.0}% {:>9.2}",
            r.name,
            r.total,
            100.0 * r.delta_pct,
            r.per_doc
        );
    }
    s
}

#[cfg(test)]
mod tests;
