use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{tag, Seed};
use crate::rost::Rost;
use crate::samplers::rpc::RostSource;

/// A set of ROSt replicas, either materialized or generated on demand.
///
/// Generated replica `i` is `source.sample(seed.path(&[REPLICA, i]))`, so
/// it never depends on how the work is scheduled.
#[derive(Clone, Copy)]
pub enum Replicas<'a> {
    Slice(&'a [Rost]),
    Generated {
        source: &'a dyn RostSource,
        count: usize,
        seed: Seed,
    },
}

impl<'a> Replicas<'a> {
    pub fn generated(source: &'a dyn RostSource, count: usize, seed: Seed) -> Self {
        Replicas::Generated {
            source,
            count,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Replicas::Slice(s) => s.len(),
            Replicas::Generated { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Result<Cow<'a, Rost>> {
        match *self {
            Replicas::Slice(s) => Ok(Cow::Borrowed(&s[i])),
            Replicas::Generated { source, seed, .. } => Ok(Cow::Owned(
                source.sample(seed.path(&[tag::REPLICA, i as u64]))?,
            )),
        }
    }

    /// Checks that there is at least one replica and all share one dimension.
    pub fn check(&self) -> Result<usize> {
        match *self {
            Replicas::Slice(s) => {
                let n = s.first().ok_or_else(|| Error::invalid("no replicas"))?.dim();
                if let Some(bad) = s.iter().find(|r| r.dim() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: bad.dim(),
                    });
                }
                Ok(n)
            }
            Replicas::Generated { source, count, .. } => {
                if count == 0 {
                    return Err(Error::invalid("no replicas"));
                }
                Ok(source.dim())
            }
        }
    }

    /// Applies `f` to every replica in parallel; results are in replica order.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &Rost) -> Result<T> + Sync + Send,
    {
        self.check()?;
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let rost = self.get(i)?;
                f(i, &rost)
            })
            .collect()
    }
}

/// Runs `f(i)` for `i` in `0..count` in parallel, collecting in index order.
pub fn par_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}
