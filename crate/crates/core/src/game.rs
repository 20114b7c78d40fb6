//! Value functions `ν: 2^N → ℝ`.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::trees::{NodeEnsemble, TreeEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameKind {
    SyntheticMoebius,
    Constant,
    Unanimity,
    InterventionalTree,
    Tree,
    Residual,
    Table,
    Custom,
}

/// A deterministic cooperative game.
pub trait Game: Send + Sync {
    fn n_players(&self) -> usize;

    fn kind(&self) -> GameKind;

    /// `ν(T)`, assuming `T` already has the right width.
    fn value(&self, coalition: &Coalition) -> Result<f64>;

    /// `ν(T)` after checking the width of `T`.
    fn evaluate(&self, coalition: &Coalition) -> Result<f64> {
        if coalition.width() != self.n_players() {
            return Err(Error::WidthMismatch {
                expected: self.n_players(),
                got: coalition.width(),
            });
        }
        self.value(coalition)
    }

    /// The game as a tree ensemble, when it is one. Lets truth providers
    /// use exact extraction instead of enumeration.
    fn as_tree_ensemble(&self) -> Option<&TreeEnsemble> {
        None
    }
}

impl<G: Game + ?Sized> Game for &G {
    fn n_players(&self) -> usize {
        (**self).n_players()
    }
    fn kind(&self) -> GameKind {
        (**self).kind()
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        (**self).value(coalition)
    }
    fn as_tree_ensemble(&self) -> Option<&TreeEnsemble> {
        (**self).as_tree_ensemble()
    }
}

impl<G: Game + ?Sized> Game for Box<G> {
    fn n_players(&self) -> usize {
        (**self).n_players()
    }
    fn kind(&self) -> GameKind {
        (**self).kind()
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        (**self).value(coalition)
    }
    fn as_tree_ensemble(&self) -> Option<&TreeEnsemble> {
        (**self).as_tree_ensemble()
    }
}

#[derive(Debug, Clone)]
pub struct ConstantGame {
    pub n: usize,
    pub value: f64,
}

impl Game for ConstantGame {
    fn n_players(&self) -> usize {
        self.n
    }
    fn kind(&self) -> GameKind {
        GameKind::Constant
    }
    fn value(&self, _: &Coalition) -> Result<f64> {
        Ok(self.value)
    }
}

/// `u_R(T) = 1[R ⊆ T]`.
#[derive(Debug, Clone)]
pub struct UnanimityGame {
    pub carrier: Coalition,
}

impl UnanimityGame {
    pub fn new(carrier: Coalition) -> Self {
        Self { carrier }
    }
}

impl Game for UnanimityGame {
    fn n_players(&self) -> usize {
        self.carrier.width()
    }
    fn kind(&self) -> GameKind {
        GameKind::Unanimity
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        Ok(if self.carrier.is_subset(coalition) { 1.0 } else { 0.0 })
    }
}

/// A game given by its Möbius coefficients: `ν(T) = Σ_{R ⊆ T} m_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusGame {
    n: usize,
    coefficients: BTreeMap<Coalition, f64>,
}

impl MoebiusGame {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn from_coefficients<I: IntoIterator<Item = (Coalition, f64)>>(n: usize, coefficients: I) -> Result<Self> {
        let mut g = Self::new(n);
        for (c, v) in coefficients {
            g.add_term(c, v)?;
        }
        Ok(g)
    }

    /// Adds `value` to `m_R`.
    pub fn add_term(&mut self, carrier: Coalition, value: f64) -> Result<()> {
        if carrier.width() != self.n {
            return Err(Error::WidthMismatch {
                expected: self.n,
                got: carrier.width(),
            });
        }
        *self.coefficients.entry(carrier).or_insert(0.0) += value;
        Ok(())
    }

    pub fn coefficient(&self, carrier: &Coalition) -> f64 {
        self.coefficients.get(carrier).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &BTreeMap<Coalition, f64> {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// A random sparse game: `terms` distinct carriers of size `1..=max_order`
    /// with standard-normal-ish coefficients, plus a random constant term.
    pub fn random_sparse<R: Rng + ?Sized>(n: usize, terms: usize, max_order: usize, rng: &mut R) -> Self {
        let mut g = Self::new(n);
        g.coefficients.insert(Coalition::empty(n), rng.gen_range(-1.0..1.0));
        let max_order = max_order.min(n).max(1);
        let mut attempts = 0;
        while g.coefficients.len() < terms + 1 && attempts < 100 * (terms + 1) {
            attempts += 1;
            let size = rng.gen_range(1..=max_order);
            let players = rand::seq::index::sample(rng, n, size);
            let carrier = Coalition::from_players(n, players.iter());
            if g.coefficients.contains_key(&carrier) {
                continue;
            }
            let magnitude: f64 = rng.gen_range(0.2..2.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            g.coefficients.insert(carrier, sign * magnitude);
        }
        g
    }

    /// Loads coefficients from a `coalition,value` CSV.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let rows = read_coalition_csv(std::fs::File::open(path)?)?;
        let n = rows
            .first()
            .map(|(c, _)| c.width())
            .ok_or_else(|| Error::Parse("no coefficient rows".into()))?;
        Self::from_coefficients(n, rows)
    }
}

impl Game for MoebiusGame {
    fn n_players(&self) -> usize {
        self.n
    }
    fn kind(&self) -> GameKind {
        GameKind::SyntheticMoebius
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (carrier, &m) in &self.coefficients {
            if carrier.is_subset(coalition) {
                acc.add(m);
            }
        }
        Ok(acc.value())
    }
}

/// A recorded table of values. Unrecorded coalitions are an error.
#[derive(Debug, Clone)]
pub struct TableGame {
    n: usize,
    values: HashMap<Coalition, f64>,
}

impl TableGame {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            values: HashMap::new(),
        }
    }

    pub fn from_rows<I: IntoIterator<Item = (Coalition, f64)>>(n: usize, rows: I) -> Result<Self> {
        let mut t = Self::new(n);
        for (c, v) in rows {
            t.record(c, v)?;
        }
        Ok(t)
    }

    pub fn record(&mut self, coalition: Coalition, value: f64) -> Result<()> {
        if coalition.width() != self.n {
            return Err(Error::WidthMismatch {
                expected: self.n,
                got: coalition.width(),
            });
        }
        self.values.insert(coalition, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Reads a `coalition,value` CSV with 0/1 coalition strings.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let rows = read_coalition_csv(reader)?;
        let n = rows
            .first()
            .map(|(c, _)| c.width())
            .ok_or_else(|| Error::Parse("table has no rows".into()))?;
        Self::from_rows(n, rows)
    }
}

impl Game for TableGame {
    fn n_players(&self) -> usize {
        self.n
    }
    fn kind(&self) -> GameKind {
        GameKind::Table
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        self.values
            .get(coalition)
            .copied()
            .ok_or_else(|| Error::MissingCoalition(coalition.clone()))
    }
}

impl Game for TreeEnsemble {
    fn n_players(&self) -> usize {
        self.n
    }
    fn kind(&self) -> GameKind {
        GameKind::Tree
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        Ok(self.predict(coalition))
    }
    fn as_tree_ensemble(&self) -> Option<&TreeEnsemble> {
        Some(self)
    }
}

/// Explains a model at `point` against a fixed background set: `ν(S)` is the
/// mean prediction over background rows with the features in `S` replaced by
/// the explained point's values.
#[derive(Debug, Clone)]
pub struct InterventionalGame {
    model: NodeEnsemble,
    point: Vec<f64>,
    background: Vec<Vec<f64>>,
}

impl InterventionalGame {
    pub const DEFAULT_BACKGROUND: usize = 50;

    pub fn new(model: NodeEnsemble, point: Vec<f64>, background: Vec<Vec<f64>>) -> Result<Self> {
        let n = point.len();
        if n != model.n {
            return Err(Error::Precondition(format!(
                "explained point has {n} features, model expects {}",
                model.n
            )));
        }
        if background.is_empty() {
            return Err(Error::Precondition("background set is empty".into()));
        }
        if let Some(bad) = background.iter().find(|b| b.len() != n) {
            return Err(Error::Precondition(format!(
                "background row has {} features, expected {n}",
                bad.len()
            )));
        }
        Ok(Self {
            model,
            point,
            background,
        })
    }
}

impl Game for InterventionalGame {
    fn n_players(&self) -> usize {
        self.point.len()
    }
    fn kind(&self) -> GameKind {
        GameKind::InterventionalTree
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        let mut z = vec![0.0; self.point.len()];
        let mut acc = CompensatedSum::new();
        for b in &self.background {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = if coalition.contains(j) { self.point[j] } else { b[j] };
            }
            acc.add(self.model.predict_features(&z));
        }
        Ok(acc.value() / self.background.len() as f64)
    }
}

/// Wraps an arbitrary closure.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&Coalition) -> f64 + Send + Sync> FnGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&Coalition) -> f64 + Send + Sync> Game for FnGame<F> {
    fn n_players(&self) -> usize {
        self.n
    }
    fn kind(&self) -> GameKind {
        GameKind::Custom
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        Ok((self.f)(coalition))
    }
}

/// Counts every evaluation of the wrapped game.
pub struct CountingGame<G> {
    inner: G,
    calls: AtomicU64,
}

impl<G: Game> CountingGame<G> {
    pub fn new(inner: G) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn into_inner(self) -> G {
        self.inner
    }
}

impl<G: Game> Game for CountingGame<G> {
    fn n_players(&self) -> usize {
        self.inner.n_players()
    }
    fn kind(&self) -> GameKind {
        self.inner.kind()
    }
    fn value(&self, coalition: &Coalition) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(coalition)
    }
    fn as_tree_ensemble(&self) -> Option<&TreeEnsemble> {
        self.inner.as_tree_ensemble()
    }
}

pub(crate) fn read_coalition_csv<R: Read>(reader: R) -> Result<Vec<(Coalition, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "coalition" || &headers[1] != "value" {
        return Err(Error::Parse(format!(
            "expected header `coalition,value`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut width = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let c = Coalition::parse_bits(&record[0])?;
        let v: f64 = record[1]
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: bad value {:?}: {e}", line + 2, &record[1])))?;
        match width {
            None => width = Some(c.width()),
            Some(w) if w != c.width() => {
                return Err(Error::Parse(format!(
                    "row {}: coalition width {} differs from {w}",
                    line + 2,
                    c.width()
                )))
            }
            _ => {}
        }
        rows.push((c, v));
    }
    Ok(rows)
}
