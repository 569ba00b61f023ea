//! Parameter accounting and structural reports.

use fdfnet_nn::params::ParamStore;
use fdfnet_nn::real::Real;

/// One line of the per-layer report.
#[derive(Debug, Clone)]
pub struct ParamLine {
    pub name: String,
    pub shape: Vec<usize>,
    pub count: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone)]
pub struct ParamReport {
    pub lines: Vec<ParamLine>,
}

impl ParamReport {
    /// Exact count of trainable scalars (running-stat buffers excluded).
    pub fn total(&self) -> usize {
        self.lines.iter().filter(|l| l.trainable).map(|l| l.count).sum()
    }

    /// Trainable scalars under a name prefix.
    pub fn total_for_prefix(&self, prefix: &str) -> usize {
        self.lines
            .iter()
            .filter(|l| l.trainable && l.name.starts_with(prefix))
            .map(|l| l.count)
            .sum()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let tag = if l.trainable { "" } else { "  (buffer)" };
            out.push_str(&format!("{:<28} {:>12?} {:>10}{}\n", l.name, l.shape, l.count, tag));
        }
        out.push_str(&format!("total trainable parameters: {}\n", self.total()));
        out
    }
}

/// Per-layer shapes and counts for every registered tensor.
pub fn count_parameters<R: Real>(ps: &ParamStore<R>) -> ParamReport {
    let lines = ps
        .iter()
        .map(|(_, p)| ParamLine {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            count: p.value.numel(),
            trainable: p.trainable,
        })
        .collect();
    ParamReport { lines }
}
