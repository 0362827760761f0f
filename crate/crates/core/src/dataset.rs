//! Ranked image sets, pairwise training tuples and set-level splits.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// One target image, its generated candidates and the human's strict ordering
/// of them (most similar first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankedSet {
    pub set_id: String,
    pub target_id: String,
    pub images: Vec<String>,
    pub human_order: Vec<String>,
}

impl RankedSet {
    pub fn new(
        set_id: impl Into<String>,
        target_id: impl Into<String>,
        images: Vec<String>,
        human_order: Vec<String>,
    ) -> Result<Self> {
        let set = Self {
            set_id: set_id.into(),
            target_id: target_id.into(),
            images,
            human_order,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.set_id;
        if self.images.len() < 2 {
            return Err(Error::Validation(format!("set `{id}` has fewer than 2 images")));
        }
        let mut seen = HashSet::with_capacity(self.images.len());
        for img in &self.images {
            if !seen.insert(img.as_str()) {
                return Err(Error::Validation(format!("set `{id}` lists image `{img}` twice")));
            }
        }
        if self.human_order.len() != self.images.len() {
            return Err(Error::Validation(format!(
                "set `{id}`: human_order has {} entries but the set has {} images",
                self.human_order.len(),
                self.images.len()
            )));
        }
        let mut ranked = HashSet::with_capacity(self.human_order.len());
        for img in &self.human_order {
            if !seen.contains(img.as_str()) {
                return Err(Error::Validation(format!(
                    "set `{id}`: human_order names unknown image `{img}`"
                )));
            }
            if !ranked.insert(img.as_str()) {
                return Err(Error::Validation(format!(
                    "set `{id}`: image `{img}` is ranked twice (ties are not allowed)"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Human rank (1 = most similar) of every image, in `images` order.
    pub fn human_ranks(&self) -> Vec<f64> {
        let pos: HashMap<&str, usize> = self
            .human_order
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i + 1))
            .collect();
        self.images.iter().map(|id| pos[id.as_str()] as f64).collect()
    }
}

/// `pos_id` was ranked more similar to the set's target than `neg_id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTuple {
    pub set_id: String,
    pub pos_id: String,
    pub neg_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScheme {
    /// Every unordered pair, `n(n-1)/2` tuples.
    #[default]
    AllPairs,
    /// Consecutive ranks only, `n-1` tuples.
    Adjacent,
}

impl std::str::FromStr for PairScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_pairs" | "all-pairs" => Ok(PairScheme::AllPairs),
            "adjacent" => Ok(PairScheme::Adjacent),
            other => Err(Error::InvalidArgument(format!(
                "unknown pair scheme `{other}` (expected all_pairs or adjacent)"
            ))),
        }
    }
}

impl std::fmt::Display for PairScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairScheme::AllPairs => "all_pairs",
            PairScheme::Adjacent => "adjacent",
        })
    }
}

/// Tuples are ordered lexicographically by (rank of pos, rank of neg).
pub fn build_pairs(set: &RankedSet, scheme: PairScheme) -> Vec<PairTuple> {
    let order = &set.human_order;
    let tuple = |i: usize, j: usize| PairTuple {
        set_id: set.set_id.clone(),
        pos_id: order[i].clone(),
        neg_id: order[j].clone(),
    };
    match scheme {
        PairScheme::AllPairs => (0..order.len())
            .flat_map(|i| (i + 1..order.len()).map(move |j| (i, j)))
            .map(|(i, j)| tuple(i, j))
            .collect(),
        PairScheme::Adjacent => (1..order.len()).map(|j| tuple(j - 1, j)).collect(),
    }
}

pub fn build_all_pairs(sets: &[RankedSet], scheme: PairScheme) -> Vec<PairTuple> {
    sets.iter().flat_map(|s| build_pairs(s, scheme)).collect()
}

/// Parses line-delimited ranking records, validating each and rejecting
/// duplicate set ids. Errors carry the 1-based line number.
pub fn parse_rankings(text: &str, location: &str) -> Result<Vec<RankedSet>> {
    let mut sets = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let set: RankedSet =
            serde_json::from_str(line).map_err(|e| Error::parse_at(location, lineno, e.to_string()))?;
        set.validate().map_err(|e| match e {
            Error::Validation(m) => Error::parse_at(location, lineno, m),
            other => other,
        })?;
        if !ids.insert(set.set_id.clone()) {
            return Err(Error::parse_at(
                location,
                lineno,
                format!("duplicate set_id `{}`", set.set_id),
            ));
        }
        sets.push(set);
    }
    Ok(sets)
}

pub fn load_rankings(path: impl AsRef<Path>) -> Result<Vec<RankedSet>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rankings(&text, &path.display().to_string())
}

pub fn write_rankings(sets: &[RankedSet], path: impl AsRef<Path>) -> Result<()> {
    write_lines(sets, path.as_ref())
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PairTuple>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| Error::parse_at(path.display().to_string(), i + 1, e.to_string()))
        })
        .collect()
}

pub fn write_pairs(pairs: &[PairTuple], path: impl AsRef<Path>) -> Result<()> {
    write_lines(pairs, path.as_ref())
}

fn write_lines<T: Serialize>(records: &[T], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Set-level train/validation partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_set_ids: Vec<String>,
    pub val_set_ids: Vec<String>,
}

/// Sorts set ids, shuffles them with [`SplitMix64`] seeded by `seed`, and cuts
/// the first `round(train_fraction * n)` into the training partition.
pub fn split_sets(sets: &[RankedSet], train_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if sets.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least 2 sets are needed for a split, got {}",
            sets.len()
        )));
    }
    let mut ids: Vec<String> = sets.iter().map(|s| s.set_id.clone()).collect();
    ids.sort();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        return Err(Error::Validation("duplicate set ids in split input".into()));
    }
    let n = ids.len();
    let cut = (train_fraction * n as f64).round() as usize;
    if cut == 0 || cut == n {
        return Err(Error::InvalidArgument(format!(
            "train_fraction {train_fraction} over {n} sets leaves an empty partition"
        )));
    }
    SplitMix64::new(seed).shuffle(&mut ids);
    let val_set_ids = ids.split_off(cut);
    Ok(SplitPlan {
        seed,
        train_fraction,
        train_set_ids: ids,
        val_set_ids,
    })
}

impl SplitPlan {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: SplitPlan = serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: Some(path.display().to_string()),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let train: HashSet<&String> = plan.train_set_ids.iter().collect();
        if let Some(dup) = plan.val_set_ids.iter().find(|id| train.contains(id)) {
            return Err(Error::Validation(format!(
                "set `{dup}` appears in both train and validation partitions"
            )));
        }
        Ok(plan)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("split serializes") + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Selects the named sets, failing on ids absent from `sets`.
    pub fn select<'a>(&self, sets: &'a [RankedSet], ids: &[String]) -> Result<Vec<&'a RankedSet>> {
        let by_id: HashMap<&str, &RankedSet> = sets.iter().map(|s| (s.set_id.as_str(), s)).collect();
        ids.iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("split references unknown set `{id}`")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn set(id: &str, order: &[&str]) -> RankedSet {
        let mut images = ids(order);
        images.sort();
        RankedSet::new(id, format!("t-{id}"), images, ids(order)).unwrap()
    }

    fn pair(p: &str, n: &str) -> (String, String) {
        (p.to_string(), n.to_string())
    }

    fn as_pairs(v: &[PairTuple]) -> Vec<(String, String)> {
        v.iter().map(|t| (t.pos_id.clone(), t.neg_id.clone())).collect()
    }

    #[test]
    fn all_pairs_of_three() {
        let s = set("s", &["A", "B", "C"]);
        assert_eq!(
            as_pairs(&build_pairs(&s, PairScheme::AllPairs)),
            vec![pair("A", "B"), pair("A", "C"), pair("B", "C")]
        );
    }

    #[test]
    fn ten_images_give_45_pairs() {
        let order: Vec<String> = (0..10).map(|i| format!("i{i}")).collect();
        let refs: Vec<&str> = order.iter().map(String::as_str).collect();
        assert_eq!(build_pairs(&set("s", &refs), PairScheme::AllPairs).len(), 45);
        assert_eq!(build_pairs(&set("s", &refs), PairScheme::Adjacent).len(), 9);
    }

    #[test]
    fn adjacent_of_four() {
        let s = set("s", &["A", "B", "C", "D"]);
        assert_eq!(
            as_pairs(&build_pairs(&s, PairScheme::Adjacent)),
            vec![pair("A", "B"), pair("B", "C"), pair("C", "D")]
        );
    }

    #[test]
    fn all_pairs_closed_under_transitivity() {
        let s = set("s", &["E", "A", "D", "B", "C"]);
        let pairs: HashSet<(String, String)> = as_pairs(&build_pairs(&s, PairScheme::AllPairs)).into_iter().collect();
        for (a, b) in &pairs {
            for (b2, c) in &pairs {
                if b == b2 {
                    assert!(pairs.contains(&(a.clone(), c.clone())));
                }
            }
        }
    }

    #[test]
    fn human_ranks_follow_image_order() {
        let s = RankedSet::new("s", "t", ids(&["A", "B", "C", "D"]), ids(&["A", "D", "B", "C"])).unwrap();
        assert_eq!(s.human_ranks(), vec![1.0, 3.0, 4.0, 2.0]);
    }

    #[test]
    fn parse_two_sets() {
        let text = concat!(
            r#"{"set_id":"a","target_id":"ta","images":["x","y"],"human_order":["y","x"]}"#,
            "\n",
            r#"{"set_id":"b","target_id":"tb","images":["x","y","z"],"human_order":["z","x","y"]}"#,
            "\n"
        );
        let sets = parse_rankings(text, "mem").unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[1].set_id, "b");
    }

    #[test]
    fn omitted_image_is_rejected_with_set_id() {
        let text = r#"{"set_id":"broken","target_id":"t","images":["x","y","z"],"human_order":["z","x"]}"#;
        let err = parse_rankings(text, "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("broken") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn tied_ranks_rejected() {
        let text = r#"{"set_id":"s","target_id":"t","images":["x","y"],"human_order":["x","x"]}"#;
        assert!(parse_rankings(text, "mem").is_err());
    }

    #[test]
    fn duplicate_set_id_rejected() {
        let rec = r#"{"set_id":"s","target_id":"t","images":["x","y"],"human_order":["x","y"]}"#;
        let err = parse_rankings(&format!("{rec}\n{rec}\n"), "mem").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn rankings_round_trip() {
        let sets = vec![set("a", &["q", "p"]), set("b", &["m", "n", "o"])];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        write_rankings(&sets, &path).unwrap();
        assert_eq!(load_rankings(&path).unwrap(), sets);
    }

    fn many_sets(n: usize) -> Vec<RankedSet> {
        (0..n).map(|i| set(&format!("set{i:03}"), &["a", "b"])).collect()
    }

    #[test]
    fn seventy_thirty_of_ten() {
        let plan = split_sets(&many_sets(10), 0.7, 3).unwrap();
        assert_eq!(plan.train_set_ids.len(), 7);
        assert_eq!(plan.val_set_ids.len(), 3);
    }

    #[test]
    fn split_is_deterministic_and_order_independent() {
        let sets = many_sets(25);
        let a = split_sets(&sets, 0.7, 11).unwrap();
        let mut rev = sets.clone();
        rev.reverse();
        assert_eq!(a, split_sets(&sets, 0.7, 11).unwrap());
        assert_eq!(a, split_sets(&rev, 0.7, 11).unwrap());
    }

    #[test]
    fn split_partitions_for_many_seeds() {
        let sets = many_sets(13);
        for seed in 0..1000 {
            let plan = split_sets(&sets, 0.7, seed).unwrap();
            let train: HashSet<&String> = plan.train_set_ids.iter().collect();
            assert!(plan.val_set_ids.iter().all(|id| !train.contains(id)));
            assert_eq!(plan.train_set_ids.len() + plan.val_set_ids.len(), 13);
            assert_eq!(plan.train_set_ids.len(), 9);
        }
    }

    #[test]
    fn degenerate_fraction_rejected() {
        assert!(split_sets(&many_sets(2), 0.1, 0).is_err());
        assert!(split_sets(&many_sets(10), 1.0, 0).is_err());
        assert!(split_sets(&many_sets(1), 0.5, 0).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let plan = split_sets(&many_sets(10), 0.7, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.json");
        plan.save(&path).unwrap();
        assert_eq!(SplitPlan::load(&path).unwrap(), plan);
    }
}
