use std::fmt;
use std::ops::{Add, Range};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{react, ProductRecord, Reaction, ReactantSets};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub ethers: u64,
    pub esters: u64,
    pub total: u64,
}

impl Counts {
    pub fn new(ethers: u64, esters: u64) -> Self {
        Counts {
            ethers,
            esters,
            total: ethers + esters,
        }
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, rhs: Counts) -> Counts {
        Counts::new(self.ethers + rhs.ethers, self.esters + rhs.esters)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    CountOnly,
    Stream,
}

/// Shard `index` of `count` (zero-based), partitioning the alcohol range
/// into contiguous blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub index: usize,
    pub count: usize,
}

impl Shard {
    pub const WHOLE: Shard = Shard { index: 0, count: 1 };

    pub fn range(&self, n: usize) -> Range<usize> {
        let start = n * self.index / self.count;
        let end = n * (self.index + 1) / self.count;
        start..end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shard must look like k/n with 1 <= k <= n: {0:?}")]
pub struct ShardParseError(pub String);

/// Parses the one-based `k/n` form used on the command line.
impl FromStr for Shard {
    type Err = ShardParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ShardParseError(s.to_string());
        let (k, n) = s.split_once('/').ok_or_else(err)?;
        let k: usize = k.trim().parse().map_err(|_| err())?;
        let n: usize = n.trim().parse().map_err(|_| err())?;
        if n == 0 || k == 0 || k > n {
            return Err(err());
        }
        Ok(Shard { index: k - 1, count: n })
    }
}

impl fmt::Display for Shard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.index + 1, self.count)
    }
}

/// Position of the next pair to emit, in (reaction, alcohol, partner)
/// lexicographic order with ethers before esters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Checkpoint {
    pub reaction: Reaction,
    pub i: usize,
    pub j: usize,
}

/// Counts for library sizes alone, with no self-pairs.
pub fn count_from_sizes(alcohols: u64, chlorides: u64, acids: u64) -> Counts {
    Counts::new(alcohols * chlorides, alcohols * acids)
}

/// Products a shard would emit, computed in O(n + m) without building any.
pub fn count_products(sets: &ReactantSets, shard: Shard) -> Counts {
    let range = shard.range(sets.alcohols.len());
    let count = |reaction: Reaction| {
        let partners = sets.partners(reaction).len() as u64;
        let skipped = sets.self_pairs(reaction)[range.clone()]
            .iter()
            .filter(|p| p.is_some())
            .count() as u64;
        range.len() as u64 * partners - skipped
    };
    Counts::new(count(Reaction::Ether), count(Reaction::Ester))
}

/// Lazy, resumable product sequence for one shard.
pub struct ProductStream<'a> {
    sets: &'a ReactantSets,
    range: Range<usize>,
    next: Option<Checkpoint>,
    self_pairs: [Vec<Option<usize>>; 2],
}

impl<'a> ProductStream<'a> {
    pub fn new(sets: &'a ReactantSets, shard: Shard) -> Self {
        let range = shard.range(sets.alcohols.len());
        let start = Checkpoint {
            reaction: Reaction::Ether,
            i: range.start,
            j: 0,
        };
        let mut stream = ProductStream {
            sets,
            range,
            next: Some(start),
            self_pairs: [sets.self_pairs(Reaction::Ether), sets.self_pairs(Reaction::Ester)],
        };
        stream.next = stream.normalize(start);
        stream
    }

    /// Continues from `checkpoint` (the next pair to emit).
    pub fn resume(sets: &'a ReactantSets, shard: Shard, checkpoint: Checkpoint) -> Self {
        let mut stream = ProductStream::new(sets, shard);
        let start = Checkpoint {
            i: checkpoint.i.max(stream.range.start),
            ..checkpoint
        };
        stream.next = stream.normalize(start);
        stream
    }

    /// The next pair this stream will emit; `None` once exhausted.
    pub fn checkpoint(&self) -> Option<Checkpoint> {
        self.next
    }

    // first valid position at or after `at`
    fn normalize(&self, mut at: Checkpoint) -> Option<Checkpoint> {
        loop {
            let partners = self.sets.partners(at.reaction).len();
            if at.i >= self.range.end || partners == 0 {
                match at.reaction {
                    Reaction::Ether => {
                        at = Checkpoint {
                            reaction: Reaction::Ester,
                            i: self.range.start,
                            j: 0,
                        };
                        continue;
                    }
                    Reaction::Ester => return None,
                }
            }
            if at.j >= partners {
                at.i += 1;
                at.j = 0;
                continue;
            }
            let slot = match at.reaction {
                Reaction::Ether => 0,
                Reaction::Ester => 1,
            };
            if self.self_pairs[slot][at.i] == Some(at.j) {
                at.j += 1;
                continue;
            }
            return Some(at);
        }
    }
}

impl Iterator for ProductStream<'_> {
    type Item = ProductRecord;

    fn next(&mut self) -> Option<ProductRecord> {
        let at = self.next?;
        let alcohol = &self.sets.alcohols[at.i].graph;
        let partner = &self.sets.partners(at.reaction)[at.j].graph;
        let made = react(at.reaction, alcohol, partner).expect("reactant sets hold only reactive molecules");
        self.next = self.normalize(Checkpoint { j: at.j + 1, ..at });
        Some(ProductRecord {
            product: made.product,
            reaction: at.reaction,
            parents: (at.i, at.j),
            site_choice: made.site_choice,
        })
    }
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct SinkError(pub String);

pub trait ProductSink {
    fn accept(&mut self, record: &ProductRecord) -> Result<(), SinkError>;
}

/// Collects records in memory.
#[derive(Debug, Default)]
pub struct VecSink(pub Vec<ProductRecord>);

impl ProductSink for VecSink {
    fn accept(&mut self, record: &ProductRecord) -> Result<(), SinkError> {
        self.0.push(record.clone());
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EnumerateError {
    /// The sink refused a record; `checkpoint` points at that record so a
    /// resumed run retries it, and `emitted` counts what was accepted.
    #[error("sink failed at {checkpoint:?}: {source}")]
    SinkFailure {
        checkpoint: Checkpoint,
        emitted: Counts,
        source: SinkError,
    },
}

/// Counts a shard, or streams its products into `sink` starting from
/// `resume` when given.
pub fn enumerate(
    sets: &ReactantSets,
    mode: Mode,
    shard: Shard,
    resume: Option<Checkpoint>,
    sink: &mut dyn ProductSink,
) -> Result<Counts, EnumerateError> {
    if mode == Mode::CountOnly {
        return Ok(count_products(sets, shard));
    }
    let mut stream = match resume {
        Some(c) => ProductStream::resume(sets, shard, c),
        None => ProductStream::new(sets, shard),
    };
    let (mut ethers, mut esters) = (0, 0);
    while let Some(at) = stream.checkpoint() {
        let record = stream.next().expect("checkpoint implies a record");
        if let Err(source) = sink.accept(&record) {
            return Err(EnumerateError::SinkFailure {
                checkpoint: at,
                emitted: Counts::new(ethers, esters),
                source,
            });
        }
        match record.reaction {
            Reaction::Ether => ethers += 1,
            Reaction::Ester => esters += 1,
        }
    }
    Ok(Counts::new(ethers, esters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{parse_smiles, write_smiles};
    use crate::reactor::Reactant;

    fn sets(alcohols: &[&str], chlorides: &[&str], acids: &[&str]) -> ReactantSets {
        let list = |xs: &[&str]| {
            xs.iter()
                .enumerate()
                .map(|(i, s)| Reactant::new(format!("r{i}"), parse_smiles(s).unwrap()))
                .collect()
        };
        ReactantSets {
            alcohols: list(alcohols),
            chlorides: list(chlorides),
            acids: list(acids),
        }
    }

    #[test]
    fn arithmetic_counts() {
        let s = sets(&["CO", "CCO", "CCCO"], &["CCl", "CCCl"], &[]);
        assert_eq!(count_products(&s, Shard::WHOLE), Counts::new(6, 0));
        let empty = sets(&[], &["CCl"], &["CC(=O)O"]);
        assert_eq!(count_products(&empty, Shard::WHOLE), Counts::new(0, 0));
        assert_eq!(ProductStream::new(&empty, Shard::WHOLE).count(), 0);
    }

    #[test]
    fn library_scale_counts() {
        let c = count_from_sizes(44_707, 10_719, 46_016);
        assert_eq!(c.ethers, 479_214_333);
        assert_eq!(c.esters, 2_057_237_312);
        assert_eq!(c.total, 2_536_451_645);
    }

    #[test]
    fn stream_order_and_count() {
        let s = sets(&["CO", "CCO"], &["CCl", "CCCl"], &["CC(=O)O"]);
        let recs: Vec<_> = ProductStream::new(&s, Shard::WHOLE).collect();
        let order: Vec<_> = recs.iter().map(|r| (r.reaction, r.parents)).collect();
        assert_eq!(
            order,
            vec![
                (Reaction::Ether, (0, 0)),
                (Reaction::Ether, (0, 1)),
                (Reaction::Ether, (1, 0)),
                (Reaction::Ether, (1, 1)),
                (Reaction::Ester, (0, 0)),
                (Reaction::Ester, (1, 0)),
            ]
        );
        assert_eq!(count_products(&s, Shard::WHOLE).total, recs.len() as u64);
    }

    #[test]
    fn self_pairs_are_skipped() {
        let s = sets(&["CO", "OCCCl"], &["OCCCl", "CCl"], &[]);
        let recs: Vec<_> = ProductStream::new(&s, Shard::WHOLE).collect();
        assert_eq!(recs.len(), 3);
        assert!(!recs.iter().any(|r| r.parents == (1, 0)));
        assert_eq!(count_products(&s, Shard::WHOLE), Counts::new(3, 0));
    }

    #[test]
    fn shards_partition_the_stream() {
        let s = sets(&["CO", "CCO", "CCCO", "CCCCO", "OCC(C)C"], &["CCl", "CCCl"], &["CC(=O)O", "OC(=O)CC"]);
        let whole: Vec<String> = ProductStream::new(&s, Shard::WHOLE).map(|r| write_smiles(&r.product)).collect();
        let mut joined = Vec::new();
        let mut total = Counts::default();
        for index in 0..3 {
            let shard = Shard { index, count: 3 };
            total = total + count_products(&s, shard);
            joined.extend(ProductStream::new(&s, shard).map(|r| (r.reaction, r.parents, write_smiles(&r.product))));
        }
        joined.sort();
        let mut expected: Vec<_> = ProductStream::new(&s, Shard::WHOLE)
            .map(|r| (r.reaction, r.parents, write_smiles(&r.product)))
            .collect();
        expected.sort();
        assert_eq!(joined, expected);
        assert_eq!(total.total, whole.len() as u64);
    }

    struct Failing {
        limit: usize,
        seen: Vec<ProductRecord>,
    }

    impl ProductSink for Failing {
        fn accept(&mut self, record: &ProductRecord) -> Result<(), SinkError> {
            if self.seen.len() == self.limit {
                return Err(SinkError("disk full".into()));
            }
            self.seen.push(record.clone());
            Ok(())
        }
    }

    #[test]
    fn resume_after_sink_failure_is_exactly_once() {
        let s = sets(&["CO", "CCO", "CCCO"], &["CCl", "CCCl"], &["CC(=O)O"]);
        let mut failing = Failing { limit: 4, seen: Vec::new() };
        let err = enumerate(&s, Mode::Stream, Shard::WHOLE, None, &mut failing).unwrap_err();
        let EnumerateError::SinkFailure { checkpoint, emitted, .. } = err;
        assert_eq!(emitted.total, 4);
        let mut rest = VecSink::default();
        let counts = enumerate(&s, Mode::Stream, Shard::WHOLE, Some(checkpoint), &mut rest).unwrap();
        assert_eq!(emitted.total + counts.total, 9);
        let mut all: Vec<_> = failing.seen.iter().map(|r| (r.reaction, r.parents)).collect();
        all.extend(rest.0.iter().map(|r| (r.reaction, r.parents)));
        let expected: Vec<_> = ProductStream::new(&s, Shard::WHOLE).map(|r| (r.reaction, r.parents)).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn shard_parsing() {
        assert_eq!("2/4".parse::<Shard>().unwrap(), Shard { index: 1, count: 4 });
        assert!("0/4".parse::<Shard>().is_err());
        assert!("5/4".parse::<Shard>().is_err());
        assert!("x".parse::<Shard>().is_err());
        assert_eq!(Shard { index: 1, count: 4 }.to_string(), "2/4");
    }
}
