use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Nearest-item retrieval on an integer grid with a held-out band of
/// columns. Training and seen-test instances use only columns outside the
/// band; unseen-test instances place the query inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalTask {
    pub height: usize,
    pub width: usize,
    /// Held-out columns `[start, end)`.
    pub held_out: (usize, usize),
    pub items: usize,
    pub train_instances: usize,
    /// Instances in each of the seen and unseen test splits.
    pub test_instances: usize,
    /// Resample instances whose nearest item is tied.
    pub reject_ties: bool,
}

impl RetrievalTask {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.held_out;
        if self.height == 0 || self.width == 0 || a >= b || b > self.width {
            return Err(Error::Config(format!(
                "held-out columns [{a}, {b}) must be a nonempty band inside width {}",
                self.width
            )));
        }
        let train_cells = self.height * (self.width - (b - a));
        if train_cells == 0 {
            return Err(Error::Degenerate("the held-out band covers the whole grid".into()));
        }
        if self.items == 0 || train_cells < self.items + 1 {
            return Err(Error::Degenerate(format!(
                "{train_cells} training cells cannot hold {} items and a query",
                self.items
            )));
        }
        if self.train_instances == 0 || self.test_instances == 0 {
            return Err(Error::Config("instance counts must be positive".into()));
        }
        Ok(())
    }

    fn in_band(&self, col: usize) -> bool {
        (self.held_out.0..self.held_out.1).contains(&col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    /// `(row, col)` of each item.
    pub items: Vec<[usize; 2]>,
    pub query: [usize; 2],
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalDataset {
    pub train: Vec<Instance>,
    pub seen_test: Vec<Instance>,
    pub unseen_test: Vec<Instance>,
}

fn dist2(a: [usize; 2], b: [usize; 2]) -> usize {
    let dy = a[0].abs_diff(b[0]);
    let dx = a[1].abs_diff(b[1]);
    dy * dy + dx * dx
}

/// Index of the item closest to `query` in Euclidean distance; the lowest
/// index wins ties. Returns the index and whether a tie occurred.
pub fn nearest_item(query: [usize; 2], items: &[[usize; 2]]) -> (usize, bool) {
    let d: Vec<usize> = items.iter().map(|&p| dist2(query, p)).collect();
    let best = (0..d.len()).min_by_key(|&i| (d[i], i)).unwrap_or(0);
    let tied = d.iter().filter(|&&v| v == d[best]).count() > 1;
    (best, tied)
}

fn draw_instance(
    task: &RetrievalTask,
    train_cells: &[[usize; 2]],
    band_cells: &[[usize; 2]],
    unseen: bool,
    rng: &mut SeededRng,
) -> Instance {
    loop {
        let mut picks: Vec<[usize; 2]> = Vec::with_capacity(task.items + 1);
        while picks.len() < task.items {
            let c = train_cells[rng.below(train_cells.len())];
            if !picks.contains(&c) {
                picks.push(c);
            }
        }
        let query = loop {
            let c = if unseen {
                band_cells[rng.below(band_cells.len())]
            } else {
                train_cells[rng.below(train_cells.len())]
            };
            if !picks.contains(&c) {
                break c;
            }
        };
        let (label, tied) = nearest_item(query, &picks);
        if !(tied && task.reject_ties) {
            return Instance {
                items: picks,
                query,
                label,
            };
        }
    }
}

pub fn generate_retrieval_task(task: &RetrievalTask, rng: &mut SeededRng) -> Result<RetrievalDataset> {
    task.validate()?;
    let mut train_cells = Vec::new();
    let mut band_cells = Vec::new();
    for r in 0..task.height {
        for c in 0..task.width {
            if task.in_band(c) {
                band_cells.push([r, c]);
            } else {
                train_cells.push([r, c]);
            }
        }
    }
    let split = |n: usize, unseen: bool, stream: u64| {
        let mut r = rng.fork(stream);
        (0..n)
            .map(|_| draw_instance(task, &train_cells, &band_cells, unseen, &mut r))
            .collect()
    };
    Ok(RetrievalDataset {
        train: split(task.train_instances, false, 1),
        seen_test: split(task.test_instances, false, 2),
        unseen_test: split(task.test_instances, true, 3),
    })
}

/// One row per instance: `split,label,query_row,query_col,item0_row,item0_col,...`.
pub fn write_instances_csv(data: &RetrievalDataset, mut w: impl Write) -> Result<()> {
    let items = data.train.first().map_or(0, |i| i.items.len());
    let mut header = vec![
        "split".to_string(),
        "label".into(),
        "query_row".into(),
        "query_col".into(),
    ];
    for k in 0..items {
        header.push(format!("item{k}_row"));
        header.push(format!("item{k}_col"));
    }
    writeln!(w, "{}", header.join(","))?;
    for (name, split) in [
        ("train", &data.train),
        ("seen", &data.seen_test),
        ("unseen", &data.unseen_test),
    ] {
        for inst in split {
            let mut row = vec![
                name.to_string(),
                inst.label.to_string(),
                inst.query[0].to_string(),
                inst.query[1].to_string(),
            ];
            for p in &inst.items {
                row.push(p[0].to_string());
                row.push(p[1].to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}
