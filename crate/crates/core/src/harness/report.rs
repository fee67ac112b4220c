use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::sparse::ModalitySelection;

/// Columns of an evaluation: each single modality and their fusion.
pub const DECISION_KINDS: [&str; 3] = ["image", "depth", "fused"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn record(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as usize;
    }

    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub sample_id: String,
    pub true_label: String,
    pub tag: String,
    /// Person indices predicted by image only, depth only and fusion;
    /// `None` when that decision was not computed or had no votes.
    pub predicted: [Option<usize>; 3],
    /// Fused scores over persons; empty without a fused decision.
    pub fused_scores: Vec<f64>,
    pub image_patches: usize,
    pub depth_patches: usize,
}

/// Rank-1 results of one evaluation run. Apart from `seconds` everything
/// here is a deterministic function of models, gallery and probes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub persons: Vec<String>,
    pub selection: ModalitySelection,
    pub extractor: String,
    pub queries: Vec<QueryResult>,
    pub seconds: f64,
}

fn fmt_rate(a: Option<&Accuracy>) -> String {
    a.map(|a| format!("{:.6}", a.rate())).unwrap_or_default()
}

impl EvalReport {
    /// Which of image / depth / fused this run produced.
    pub fn computed(&self) -> [bool; 3] {
        match self.selection {
            ModalitySelection::Image => [true, false, false],
            ModalitySelection::Depth => [false, true, false],
            ModalitySelection::Both => [true, true, true],
        }
    }

    /// Index into [`DECISION_KINDS`] of the decision the selection stands
    /// for: fusion for both modalities, otherwise the single one.
    pub fn primary(&self) -> usize {
        match self.selection {
            ModalitySelection::Image => 0,
            ModalitySelection::Depth => 1,
            ModalitySelection::Both => 2,
        }
    }

    fn is_correct(&self, q: &QueryResult, kind: usize) -> bool {
        q.predicted[kind].is_some_and(|p| self.persons[p] == q.true_label)
    }

    pub fn overall(&self) -> [Accuracy; 3] {
        let mut acc = [Accuracy::default(); 3];
        for q in &self.queries {
            for (k, a) in acc.iter_mut().enumerate() {
                a.record(self.is_correct(q, k));
            }
        }
        acc
    }

    pub fn per_tag(&self) -> BTreeMap<String, [Accuracy; 3]> {
        let mut map: BTreeMap<String, [Accuracy; 3]> = BTreeMap::new();
        for q in &self.queries {
            let slot = map.entry(q.tag.clone()).or_default();
            for (k, a) in slot.iter_mut().enumerate() {
                a.record(self.is_correct(q, k));
            }
        }
        map
    }

    pub fn rank1(&self) -> f64 {
        self.overall()[self.primary()].rate()
    }

    /// Counts of (true person, predicted person) for the primary decision;
    /// the extra last column counts probes without a decision.
    pub fn confusion(&self) -> Vec<Vec<usize>> {
        let n = self.persons.len();
        let mut m = vec![vec![0; n + 1]; n];
        for q in &self.queries {
            if let Some(t) = self.persons.iter().position(|p| *p == q.true_label) {
                m[t][q.predicted[self.primary()].unwrap_or(n)] += 1;
            }
        }
        m
    }

    pub fn decisions_csv(&self) -> String {
        let mut out = String::from("sample_id,true_label,tag,image_pred,depth_pred,fused_pred,correct,image_patches,depth_patches");
        for p in &self.persons {
            write!(out, ",score_{p}").unwrap();
        }
        out.push('\n');
        for q in &self.queries {
            let name = |k: usize| q.predicted[k].map(|p| self.persons[p].clone()).unwrap_or_default();
            write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                q.sample_id,
                q.true_label,
                q.tag,
                name(0),
                name(1),
                name(2),
                self.is_correct(q, self.primary()) as u8,
                q.image_patches,
                q.depth_patches
            )
            .unwrap();
            for i in 0..self.persons.len() {
                match q.fused_scores.get(i) {
                    Some(s) => write!(out, ",{s:.6}").unwrap(),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let computed = self.computed();
        let mut out = String::from("scope,count,image,depth,fused\n");
        let row = |out: &mut String, scope: &str, acc: &[Accuracy; 3]| {
            let cell = |k: usize| fmt_rate(computed[k].then_some(&acc[k]));
            writeln!(out, "{scope},{},{},{},{}", acc[0].total, cell(0), cell(1), cell(2)).unwrap();
        };
        row(&mut out, "overall", &self.overall());
        for (tag, acc) in self.per_tag() {
            row(&mut out, &format!("tag:{tag}"), &acc);
        }
        out
    }

    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true_label");
        for p in &self.persons {
            write!(out, ",{p}").unwrap();
        }
        out.push_str(",none\n");
        for (p, row) in self.persons.iter().zip(self.confusion()) {
            out.push_str(p);
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable rank-1 table in the layout of a per-variation
    /// results table.
    pub fn summary_table(&self) -> String {
        let computed = self.computed();
        let mut out = format!("{:<16}{:>7}", "variation", "probes");
        for (k, name) in DECISION_KINDS.iter().enumerate() {
            if computed[k] {
                write!(out, "{name:>10}").unwrap();
            }
        }
        out.push('\n');
        let line = |out: &mut String, scope: &str, acc: &[Accuracy; 3]| {
            write!(out, "{scope:<16}{:>7}", acc[0].total).unwrap();
            for k in 0..3 {
                if computed[k] {
                    write!(out, "{:>9.2}%", 100.0 * acc[k].rate()).unwrap();
                }
            }
            out.push('\n');
        };
        for (tag, acc) in self.per_tag() {
            line(&mut out, &tag, &acc);
        }
        line(&mut out, "average", &self.overall());
        out
    }
}
