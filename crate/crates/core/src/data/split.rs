use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::RatingsDataset;
use crate::error::{Error, Result};

pub const DEFAULT_CORE_SIZE: usize = 50;
pub const DEFAULT_TRAIN_SIZE: usize = 700;

/// Partition of the items into the initial graph, cold-start items with
/// revealed attachments, and held-out cold-start items. Dense item ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColdStartSplit {
    pub core_items: Vec<usize>,
    pub train_items: Vec<usize>,
    pub test_items: Vec<usize>,
}

pub fn make_cold_start_split(
    d: &RatingsDataset,
    core_size: usize,
    train_size: usize,
    seed: u64,
) -> Result<ColdStartSplit> {
    let n = d.item_count();
    if core_size + train_size > n {
        return Err(Error::InvalidArgument(format!(
            "core {core_size} + train {train_size} exceeds {n} items"
        )));
    }
    let mut items: Vec<usize> = (0..n).collect();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_items = items.split_off(core_size + train_size);
    let train_items = items.split_off(core_size);
    Ok(ColdStartSplit {
        core_items: items,
        train_items,
        test_items,
    })
}

const SECTIONS: [&str; 3] = ["core", "train", "test"];

impl ColdStartSplit {
    /// Three `[section]` blocks listing raw item ids, one per line.
    pub fn write_manifest<W: Write>(&self, d: &RatingsDataset, mut out: W) -> Result<()> {
        for (name, items) in SECTIONS.iter().zip([&self.core_items, &self.train_items, &self.test_items]) {
            writeln!(out, "[{name}]")?;
            for &i in items {
                writeln!(out, "{}", d.raw_item_id(i))?;
            }
        }
        Ok(())
    }

    pub fn read_manifest<R: BufRead>(d: &RatingsDataset, input: R) -> Result<Self> {
        let mut lists: [Vec<usize>; 3] = Default::default();
        let mut current: Option<usize> = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = Some(SECTIONS.iter().position(|s| *s == name).ok_or(Error::Parse {
                    line: lineno,
                    msg: format!("unknown section {name:?}"),
                })?);
                continue;
            }
            let section = current.ok_or(Error::Parse {
                line: lineno,
                msg: "item id before any section header".into(),
            })?;
            let raw: u32 = t.parse().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad item id {t:?}: {e}"),
            })?;
            let item = d.item_index(raw).ok_or(Error::Parse {
                line: lineno,
                msg: format!("item {raw} not in dataset"),
            })?;
            lists[section].push(item);
        }
        let [core_items, train_items, test_items] = lists;
        Ok(Self { core_items, train_items, test_items })
    }
}
