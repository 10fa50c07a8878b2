//! Explicit-feedback rating data: MovieLens-style loading, count filtering,
//! item-item similarity graphs and cold-start item splits.

mod knn;
mod split;

pub use knn::{attachment_from_ratings, build_knn_item_graph, ItemVectors};
pub use split::{make_cold_start_split, ColdStartSplit, DEFAULT_CORE_SIZE, DEFAULT_TRAIN_SIZE};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// One rating with dense 0-based user and item indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Ratings with dense ids. Raw ids are kept in ascending order, so dense
/// index `k` is the `k`-th smallest raw id.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsDataset {
    user_ids: Vec<u32>,
    item_ids: Vec<u32>,
    ratings: Vec<Rating>,
}

impl RatingsDataset {
    /// Build from `(raw user, raw item, rating)` triples. Ratings must be
    /// whole numbers 1 to 5 and each (user, item) pair may appear once.
    pub fn from_raw<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32, u8)>,
    {
        let triples: Vec<(u32, u32, u8)> = triples.into_iter().collect();
        let mut seen = HashSet::with_capacity(triples.len());
        for (k, &(u, i, r)) in triples.iter().enumerate() {
            if !(1..=5).contains(&r) {
                return Err(Error::InvalidArgument(format!(
                    "rating {r} for user {u}, item {i} outside 1..=5"
                )));
            }
            if !seen.insert((u, i)) {
                return Err(Error::DuplicateRating { user: u, item: i, line: k + 1 });
            }
        }
        Ok(Self::from_checked(&triples))
    }

    fn from_checked(triples: &[(u32, u32, u8)]) -> Self {
        let dense = |ids: BTreeMap<u32, usize>| -> (Vec<u32>, HashMap<u32, usize>) {
            let list: Vec<u32> = ids.into_keys().collect();
            let index = list.iter().enumerate().map(|(k, &id)| (id, k)).collect();
            (list, index)
        };
        let (user_ids, uidx) = dense(triples.iter().map(|t| (t.0, 0)).collect());
        let (item_ids, iidx) = dense(triples.iter().map(|t| (t.1, 0)).collect());
        let ratings = triples
            .iter()
            .map(|&(u, i, r)| Rating {
                user: uidx[&u],
                item: iidx[&i],
                value: r as f64,
            })
            .collect();
        Self { user_ids, item_ids, ratings }
    }

    pub fn user_count(&self) -> usize {
        self.user_ids.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_ids.len()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn raw_user_id(&self, user: usize) -> u32 {
        self.user_ids[user]
    }

    pub fn raw_item_id(&self, item: usize) -> u32 {
        self.item_ids[item]
    }

    pub fn user_index(&self, raw: u32) -> Option<usize> {
        self.user_ids.binary_search(&raw).ok()
    }

    pub fn item_index(&self, raw: u32) -> Option<usize> {
        self.item_ids.binary_search(&raw).ok()
    }

    /// Per-user `(item, rating)` lists sorted by item.
    pub fn by_user(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.user_count()];
        for r in &self.ratings {
            out[r.user].push((r.item, r.value));
        }
        for list in &mut out {
            list.sort_by_key(|e| e.0);
        }
        out
    }

    /// Per-item `(user, rating)` lists sorted by user.
    pub fn by_item(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.item_count()];
        for r in &self.ratings {
            out[r.item].push((r.user, r.value));
        }
        for list in &mut out {
            list.sort_by_key(|e| e.0);
        }
        out
    }

    fn raw_triples(&self) -> impl Iterator<Item = (u32, u32, u8)> + '_ {
        self.ratings
            .iter()
            .map(|r| (self.user_ids[r.user], self.item_ids[r.item], r.value as u8))
    }
}

/// Read `user<TAB>item<TAB>rating<TAB>timestamp` lines.
pub fn read_movielens<R: BufRead>(input: R) -> Result<RatingsDataset> {
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let num = |s: &str, what: &str| {
            s.trim().parse::<u32>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad {what} {s:?}: {e}"),
            })
        };
        let user = num(fields[0], "user id")?;
        let item = num(fields[1], "item id")?;
        let rating = num(fields[2], "rating")?;
        if !(1..=5).contains(&rating) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("rating {rating} outside 1..=5"),
            });
        }
        num(fields[3], "timestamp")?;
        if !seen.insert((user, item)) {
            return Err(Error::DuplicateRating { user, item, line: lineno });
        }
        triples.push((user, item, rating as u8));
    }
    Ok(RatingsDataset::from_checked(&triples))
}

pub fn load_movielens(path: impl AsRef<Path>) -> Result<RatingsDataset> {
    read_movielens(BufReader::new(File::open(path)?))
}

/// Drop users and items with fewer than `min_count` ratings, repeating
/// until no count falls below the threshold, then reindex densely.
pub fn filter_min_ratings(d: &RatingsDataset, min_count: usize) -> RatingsDataset {
    let mut triples: Vec<(u32, u32, u8)> = d.raw_triples().collect();
    loop {
        let mut users: HashMap<u32, usize> = HashMap::new();
        let mut items: HashMap<u32, usize> = HashMap::new();
        for &(u, i, _) in &triples {
            *users.entry(u).or_default() += 1;
            *items.entry(i).or_default() += 1;
        }
        let before = triples.len();
        triples.retain(|(u, i, _)| users[u] >= min_count && items[i] >= min_count);
        if triples.len() == before {
            break;
        }
    }
    RatingsDataset::from_checked(&triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_one_line() {
        let d = read_movielens("196\t242\t3\t881250949\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
        let r = d.ratings()[0];
        assert_eq!((d.raw_user_id(r.user), d.raw_item_id(r.item), r.value), (196, 242, 3.0));
    }

    #[test]
    fn empty_input() {
        let d = read_movielens("".as_bytes()).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.user_count(), 0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "1\t2\t3\t4\n1\t3\t9\t4\n";
        assert!(matches!(read_movielens(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = "1\t2\t3\t4\n1\t3\t4\n";
        assert!(matches!(read_movielens(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = "1\t2\t3\t4\n2\t2\t3\t4\n1\t2\t5\t4\n";
        assert!(matches!(
            read_movielens(text.as_bytes()),
            Err(Error::DuplicateRating { user: 1, item: 2, line: 3 })
        ));
    }

    #[test]
    fn dense_ids_follow_raw_order() {
        let d = RatingsDataset::from_raw([(50, 7, 4), (3, 9, 1), (50, 9, 2)]).unwrap();
        assert_eq!(d.user_index(3), Some(0));
        assert_eq!(d.user_index(50), Some(1));
        assert_eq!(d.item_index(9), Some(1));
        assert_eq!(d.item_index(8), None);
        assert_eq!(d.by_user()[1], vec![(0, 4.0), (1, 2.0)]);
        assert!(RatingsDataset::from_raw([(1, 1, 0)]).is_err());
        assert!(RatingsDataset::from_raw([(1, 1, 2), (1, 1, 3)]).is_err());
    }

    fn grid(users: u32, items: u32) -> Vec<(u32, u32, u8)> {
        (0..users)
            .flat_map(|u| (0..items).map(move |i| (u, i, (1 + (u + i) % 5) as u8)))
            .collect()
    }

    #[test]
    fn filter_examples() {
        let mut t = grid(4, 4);
        // Item 9 has a single rating; user 9 has a single rating.
        t.push((0, 9, 5));
        t.push((9, 0, 5));
        let d = RatingsDataset::from_raw(t).unwrap();
        assert_eq!(filter_min_ratings(&d, 0), d);
        let f = filter_min_ratings(&d, 2);
        assert_eq!((f.user_count(), f.item_count(), f.len()), (4, 4, 16));
        assert_eq!(filter_min_ratings(&f, 2), f);
    }

    #[test]
    fn filter_cascades() {
        // Removing item 2 leaves user 1 with a single rating.
        let d = RatingsDataset::from_raw([(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 0, 1), (2, 1, 1)]).unwrap();
        let f = filter_min_ratings(&d, 2);
        assert_eq!(f.user_index(1), None);
        assert_eq!(f.len(), 4);
        assert_eq!(filter_min_ratings(&f, 2), f);
    }
}
