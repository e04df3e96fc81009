use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};

use crate::error::{Error, Result};
use crate::extractor::{DatasetSplit, Record};
use crate::rng::Rng;

/// N-way K-shot protocol with Q queries per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Protocol {
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
    pub episodes: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            way: 5,
            shot: 1,
            queries: 15,
            episodes: 600,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.way == 0 || self.shot == 0 || self.queries == 0 || self.episodes == 0 {
            return Err(Error::Config(format!("protocol fields must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Checks the split can supply every episode.
    pub fn check_feasible(&self, split: &DatasetSplit) -> Result<()> {
        self.validate()?;
        let classes = split.classes();
        let rich = classes
            .iter()
            .filter(|&&c| split.of_class(c).len() >= self.shot + self.queries)
            .count();
        if rich < self.way {
            return Err(Error::Infeasible(format!(
                "{}-way {}-shot with {} queries needs {} classes of at least {} instances; split has {rich} of {}",
                self.way,
                self.shot,
                self.queries,
                self.way,
                self.shot + self.queries,
                classes.len()
            )));
        }
        Ok(())
    }
}

/// One sampled task. Records keep every level so support instances can be
/// augmented; classifiers only see the last level.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub queries: usize,
    /// Chosen classes in draw order.
    pub classes: Vec<u32>,
    pub support: Vec<Record>,
    pub query: Vec<Record>,
}

impl Episode {
    pub fn check(&self) -> Result<()> {
        let distinct: BTreeSet<u32> = self.classes.iter().copied().collect();
        if distinct.len() != self.way {
            return Err(Error::Contract("episode classes are not distinct".into()));
        }
        for &c in &self.classes {
            let s = self.support.iter().filter(|r| r.class == c).count();
            if s != self.shot {
                return Err(Error::Contract(format!("class {c} has {s} support instances")));
            }
        }
        if self.query.iter().any(|r| !distinct.contains(&r.class)) {
            return Err(Error::Contract("query class outside the support classes".into()));
        }
        let sid: BTreeSet<u64> = self.support.iter().map(|r| r.id).collect();
        if self.query.iter().any(|r| sid.contains(&r.id)) {
            return Err(Error::Contract("support and query share an instance".into()));
        }
        Ok(())
    }
}

/// Uniform classes without replacement, then uniform instances without
/// replacement within each class.
pub fn sample_episode(split: &DatasetSplit, way: usize, shot: usize, queries: usize, rng: &mut Rng) -> Result<Episode> {
    let eligible: Vec<u32> = split
        .classes()
        .into_iter()
        .filter(|&c| split.of_class(c).len() >= shot + queries)
        .collect();
    if way == 0 || shot == 0 || eligible.len() < way {
        return Err(Error::Infeasible(format!(
            "cannot draw {way}-way {shot}-shot {queries}-query episodes: {} eligible classes",
            eligible.len()
        )));
    }
    let classes: Vec<u32> = eligible.choose_multiple(rng, way).copied().collect();
    let mut support = Vec::with_capacity(way * shot);
    let mut query = Vec::with_capacity(way * queries);
    for &c in &classes {
        let mut members = split.of_class(c);
        let (picked, _) = members.partial_shuffle(rng, shot + queries);
        support.extend(picked[..shot].iter().map(|&r| r.clone()));
        query.extend(picked[shot..].iter().map(|&r| r.clone()));
    }
    let ep = Episode {
        way,
        shot,
        queries,
        classes,
        support,
        query,
    };
    ep.check()?;
    Ok(ep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{MultiLevelFeature, SplitRole};
    use crate::rng::from_seed;

    fn split(classes: u32, per: u64) -> DatasetSplit {
        let records = (0..classes)
            .flat_map(|c| {
                (0..per).map(move |i| Record {
                    id: c as u64 * 1000 + i,
                    class: c,
                    feature: MultiLevelFeature::new(vec![vec![c as f64, i as f64]]).unwrap(),
                })
            })
            .collect();
        DatasetSplit::new(SplitRole::Novel, vec![2], records).unwrap()
    }

    #[test]
    fn counts() {
        let s = split(7, 20);
        let ep = sample_episode(&s, 5, 1, 15, &mut from_seed(1)).unwrap();
        assert_eq!(ep.support.len(), 5);
        assert_eq!(ep.query.len(), 75);
        let all = sample_episode(&s, 7, 2, 3, &mut from_seed(2)).unwrap();
        let mut cl = all.classes.clone();
        cl.sort();
        assert_eq!(cl, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn infeasible() {
        let s = split(4, 10);
        assert!(matches!(
            sample_episode(&s, 5, 1, 1, &mut from_seed(0)),
            Err(Error::Infeasible(_))
        ));
        assert!(sample_episode(&s, 2, 5, 6, &mut from_seed(0)).is_err());
        let p = Protocol {
            way: 4,
            shot: 5,
            queries: 6,
            episodes: 1,
        };
        assert!(p.check_feasible(&s).is_err());
    }
}
