//! Typed relational data model with set semantics.
//!
//! Every relation in the engine (the instance under assessment, contextual
//! data, legal contextual instances, quality versions and intermediate
//! Datalog relations) is an [`Instance`] entry: a named set of [`Tuple`]s.

mod io;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;

use crate::error::{Error, Result};

pub use io::{load_facts, load_relation, parse_cell, relation_path, write_facts, write_relation};

/// A single domain value.
///
/// `Null` compares equal to itself for storage purposes (so set semantics
/// collapse duplicate rows), but never *unifies*: see [`Value::unifies`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Str(String),
    Num(Decimal),
    /// Minutes since midnight, `0..=1439`.
    Time(u16),
    /// Opaque date tag such as `Sep/5`; equality only.
    Date(String),
    Null,
}

impl Value {
    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    pub fn date(s: impl Into<String>) -> Self {
        Value::Date(s.into())
    }

    /// Parses a decimal literal. Panics on malformed input; intended for
    /// tests and fixtures.
    pub fn num(s: &str) -> Self {
        Value::Num(Decimal::from_str(s).expect("decimal literal"))
    }

    /// Parses an `HH:MM` literal. Panics on malformed input.
    pub fn time(s: &str) -> Self {
        Value::Time(parse_time(s).expect("time literal"))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn kind(&self) -> Option<Kind> {
        match self {
            Value::Str(_) => Some(Kind::Str),
            Value::Num(_) => Some(Kind::Num),
            Value::Time(_) => Some(Kind::Time),
            Value::Date(_) => Some(Kind::Date),
            Value::Null => None,
        }
    }

    /// Join-unification: equal values, neither of them Null.
    pub fn unifies(&self, other: &Value) -> bool {
        !self.is_null() && !other.is_null() && self == other
    }

    /// Ordering used by comparison built-ins. Defined only between two
    /// numbers or two times.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => Some(a.cmp(b)),
            (Value::Time(a), Value::Time(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Rendering used in CSV cells and report rows.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Str(s) | Value::Date(s) => s.clone(),
            Value::Num(d) => d.to_string(),
            Value::Time(m) => format_time(*m),
            Value::Null => String::new(),
        }
    }
}

/// Renders values the way the rule language writes constants.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Value::Num(d) => write!(f, "{d}"),
            Value::Time(m) => f.write_str(&format_time(*m)),
            Value::Date(s) if is_date_tag(s) => f.write_str(s),
            Value::Date(s) => write!(f, "d\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Value::Null => f.write_str("null"),
        }
    }
}

/// Parses `H:MM` or `HH:MM` into minutes since midnight.
pub fn parse_time(s: &str) -> Option<u16> {
    let (h, m) = s.split_once(':')?;
    if h.is_empty() || h.len() > 2 || m.len() != 2 {
        return None;
    }
    if !h.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let h: u16 = h.parse().ok()?;
    let m: u16 = m.parse().ok()?;
    (h < 24 && m < 60).then_some(h * 60 + m)
}

pub fn format_time(minutes: u16) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

/// Whether `s` is written bare as a date tag in rules (`Sep/5`).
pub(crate) fn is_date_tag(s: &str) -> bool {
    let Some((a, b)) = s.split_once('/') else {
        return false;
    };
    a.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        && a.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !b.is_empty()
        && b.chars().all(|c| c.is_ascii_alphanumeric())
}

/// Attribute kinds. `Str` columns are dynamically kinded: cells that parse
/// as decimals are stored as numbers, so a column may mix `38.2` and
/// `110/70`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Str,
    Num,
    Time,
    Date,
}

impl Kind {
    pub fn admits(self, value: &Value) -> bool {
        match (self, value) {
            (_, Value::Null) => true,
            (Kind::Str, Value::Str(_) | Value::Num(_)) => true,
            (Kind::Num, Value::Num(_)) => true,
            (Kind::Time, Value::Time(_)) => true,
            (Kind::Date, Value::Date(_)) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Str => "str",
            Kind::Num => "num",
            Kind::Time => "time",
            Kind::Date => "date",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "str" => Ok(Kind::Str),
            "num" => Ok(Kind::Num),
            "time" => Ok(Kind::Time),
            "date" => Ok(Kind::Date),
            other => Err(Error::Type(format!("unknown attribute kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeSignature {
    pub name: String,
    pub kind: Kind,
}

impl AttributeSignature {
    pub fn new(name: impl Into<String>, kind: Kind) -> Self {
        AttributeSignature {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationSignature {
    pub name: String,
    pub attributes: Vec<AttributeSignature>,
}

impl RelationSignature {
    /// Builds a signature, checking arity and attribute-name uniqueness.
    pub fn new(name: impl Into<String>, attributes: Vec<AttributeSignature>) -> Result<Self> {
        let name = name.into();
        if attributes.is_empty() {
            return Err(Error::SchemaMismatch(format!("relation `{name}` has arity 0")));
        }
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "relation `{name}` declares attribute `{}` twice",
                    a.name
                )));
            }
        }
        Ok(RelationSignature { name, attributes })
    }

    /// Shorthand for tests: `("TempNoon", &[("patient", Kind::Str), ...])`.
    pub fn of(name: &str, attributes: &[(&str, Kind)]) -> Self {
        Self::new(
            name,
            attributes
                .iter()
                .map(|(n, k)| AttributeSignature::new(*n, *k))
                .collect(),
        )
        .expect("valid signature")
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    /// Same attributes under a different relation name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        RelationSignature {
            name: name.into(),
            attributes: self.attributes.clone(),
        }
    }

    pub fn check(&self, tuple: &Tuple) -> Result<()> {
        if tuple.arity() != self.arity() {
            return Err(Error::SchemaMismatch(format!(
                "tuple of arity {} for relation `{}` of arity {}",
                tuple.arity(),
                self.name,
                self.arity()
            )));
        }
        for (a, v) in self.attributes.iter().zip(tuple.iter()) {
            if !a.kind.admits(v) {
                return Err(Error::SchemaMismatch(format!(
                    "value {v} does not fit attribute `{}: {}` of `{}`",
                    a.name, a.kind, self.name
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for RelationSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.attributes.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", a.name, a.kind)?;
        }
        f.write_str(")")
    }
}

/// A ground tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple(Vec<Value>);

impl Tuple {
    pub fn new(values: Vec<Value>) -> Self {
        Tuple(values)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn into_values(self) -> Vec<Value> {
        self.0
    }

    pub fn is_all_null(&self) -> bool {
        self.0.iter().all(Value::is_null)
    }

    pub fn to_cells(&self) -> Vec<String> {
        self.0.iter().map(Value::to_cell).collect()
    }
}

impl std::ops::Deref for Tuple {
    type Target = [Value];

    fn deref(&self) -> &[Value] {
        &self.0
    }
}

impl From<Vec<Value>> for Tuple {
    fn from(values: Vec<Value>) -> Self {
        Tuple(values)
    }
}

impl FromIterator<Value> for Tuple {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        Tuple(iter.into_iter().collect())
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Named relations of ground tuples.
///
/// Signatures are optional per relation: declared relations are
/// type-checked on [`Instance::insert_checked`], derived relations carry
/// none. Equality treats an absent relation and an empty one alike.
#[derive(Debug, Clone, Default)]
pub struct Instance {
    relations: BTreeMap<String, BTreeSet<Tuple>>,
    signatures: BTreeMap<String, RelationSignature>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        if self.signatures != other.signatures {
            return false;
        }
        let names: BTreeSet<&String> = self.relations.keys().chain(other.relations.keys()).collect();
        names.into_iter().all(|n| self.tuples(n) == other.tuples(n))
    }
}

impl Eq for Instance {}

static EMPTY: BTreeSet<Tuple> = BTreeSet::new();

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    /// An instance declaring every signature, with empty relations.
    pub fn with_schema<'a>(schema: impl IntoIterator<Item = &'a RelationSignature>) -> Self {
        let mut inst = Instance::new();
        for sig in schema {
            inst.declare(sig.clone());
        }
        inst
    }

    pub fn declare(&mut self, sig: RelationSignature) {
        self.relations.entry(sig.name.clone()).or_default();
        self.signatures.insert(sig.name.clone(), sig);
    }

    pub fn signature(&self, name: &str) -> Option<&RelationSignature> {
        self.signatures.get(name)
    }

    pub fn signatures(&self) -> impl Iterator<Item = &RelationSignature> {
        self.signatures.values()
    }

    /// Inserts without type checking. Returns whether the tuple was new.
    pub fn insert(&mut self, name: &str, tuple: Tuple) -> bool {
        match self.relations.get_mut(name) {
            Some(set) => set.insert(tuple),
            None => self
                .relations
                .entry(name.to_string())
                .or_default()
                .insert(tuple),
        }
    }

    /// Inserts after checking the tuple against the relation's declared
    /// signature, if any.
    pub fn insert_checked(&mut self, name: &str, tuple: Tuple) -> Result<bool> {
        if let Some(sig) = self.signatures.get(name) {
            sig.check(&tuple)?;
        }
        Ok(self.insert(name, tuple))
    }

    pub fn extend_relation(&mut self, name: &str, tuples: impl IntoIterator<Item = Tuple>) {
        let set = self.relations.entry(name.to_string()).or_default();
        set.extend(tuples);
    }

    pub fn contains(&self, name: &str, tuple: &Tuple) -> bool {
        self.relations.get(name).is_some_and(|s| s.contains(tuple))
    }

    pub fn relation(&self, name: &str) -> Option<&BTreeSet<Tuple>> {
        self.relations.get(name)
    }

    /// The relation's tuples, empty when the relation is absent.
    pub fn tuples(&self, name: &str) -> &BTreeSet<Tuple> {
        self.relations.get(name).unwrap_or(&EMPTY)
    }

    pub fn has_relation(&self, name: &str) -> bool {
        self.relations.contains_key(name) || self.signatures.contains_key(name)
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn relation_len(&self, name: &str) -> usize {
        self.tuples(name).len()
    }

    /// Total number of tuples over all relations.
    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds every relation and signature of `other`.
    pub fn union_with(&mut self, other: &Instance) {
        for (name, sig) in &other.signatures {
            self.signatures
                .entry(name.clone())
                .or_insert_with(|| sig.clone());
        }
        for (name, tuples) in &other.relations {
            self.extend_relation(name, tuples.iter().cloned());
        }
    }

    /// Keeps only the named relations (and their signatures).
    pub fn restrict<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Instance {
        let mut out = Instance::new();
        for name in names {
            if let Some(sig) = self.signatures.get(name) {
                out.declare(sig.clone());
            }
            out.extend_relation(name, self.tuples(name).iter().cloned());
        }
        out
    }

    /// Relation-wise containment over the relations of `self`.
    pub fn is_subset_of(&self, other: &Instance) -> bool {
        self.relations
            .iter()
            .all(|(name, tuples)| tuples.is_subset(other.tuples(name)))
    }

    /// Renames a relation, keeping its signature attributes.
    pub fn rename_relation(&mut self, from: &str, to: &str) {
        if let Some(tuples) = self.relations.remove(from) {
            self.extend_relation(to, tuples);
        }
        if let Some(sig) = self.signatures.remove(from) {
            self.signatures.insert(to.to_string(), sig.renamed(to));
        }
    }
}

/// `|a.R △ b.R|`.
pub fn symmetric_difference(a: &Instance, b: &Instance, relation: &str) -> Result<usize> {
    if let (Some(sa), Some(sb)) = (a.signature(relation), b.signature(relation)) {
        if sa.attributes != sb.attributes {
            return Err(Error::SchemaMismatch(format!(
                "relation `{relation}` has signature {sa} in one instance and {sb} in the other"
            )));
        }
    }
    let (ta, tb) = (a.tuples(relation), b.tuples(relation));
    Ok(ta.symmetric_difference(tb).count())
}
