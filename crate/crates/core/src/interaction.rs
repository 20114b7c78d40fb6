use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::indices::IndexSpec;

/// Where an entry's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Proxy,
    ProxyMsr,
    MsrOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub value: f64,
    pub provenance: Provenance,
}

/// Interaction values for a set of target coalitions, all of one width.
#[derive(Debug, Clone)]
pub struct InteractionVector {
    pub index: IndexSpec,
    n: usize,
    entries: BTreeMap<Coalition, Entry>,
}

impl InteractionVector {
    pub fn new(index: IndexSpec, n: usize) -> Self {
        Self {
            index,
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, target: Coalition, value: f64, provenance: Provenance) -> Result<()> {
        if target.width() != self.n {
            return Err(Error::WidthMismatch {
                expected: self.n,
                got: target.width(),
            });
        }
        if self.index.family.is_faithful() && target.len() > self.index.max_order {
            return Err(Error::InvalidIndex(format!(
                "faithful index holds orders up to {}, got {}",
                self.index.max_order,
                target.len()
            )));
        }
        self.entries.insert(target, Entry { value, provenance });
        Ok(())
    }

    pub fn get(&self, target: &Coalition) -> Option<f64> {
        self.entries.get(target).map(|e| e.value)
    }

    pub fn entry(&self, target: &Coalition) -> Option<&Entry> {
        self.entries.get(target)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Coalition, &Entry)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Coalition> {
        self.entries.keys()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.values().map(|e| e.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest absolute difference to `other` over shared keys; errors if key sets differ.
    pub fn max_abs_diff(&self, other: &InteractionVector) -> Result<f64> {
        self.check_keys(other)?;
        Ok(self
            .entries
            .iter()
            .map(|(k, e)| (e.value - other.entries[k].value).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_keys(&self, other: &InteractionVector) -> Result<()> {
        if self.entries.len() != other.entries.len() || self.entries.keys().any(|k| !other.entries.contains_key(k)) {
            return Err(Error::KeyMismatch(format!(
                "{} keys vs {} keys",
                self.entries.len(),
                other.entries.len()
            )));
        }
        Ok(())
    }

    /// Writes `subset,value` rows in canonical key order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["subset", "value"])?;
        for (k, e) in &self.entries {
            w.write_record([k.to_bits(), format!("{}", e.value)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks targets against the index and the player count.
pub fn validate_targets(index: &IndexSpec, n: usize, targets: &[Coalition]) -> Result<()> {
    index.validate()?;
    for t in targets {
        if t.width() != n {
            return Err(Error::WidthMismatch {
                expected: n,
                got: t.width(),
            });
        }
        index.validate_order(t.len())?;
    }
    Ok(())
}
