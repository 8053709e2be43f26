//! Binding-restricted external sources.
//!
//! An external predicate `#E` declares which argument positions are inputs
//! (`b`) and which are outputs (`f`). A source is only ever asked about
//! ground inputs, one input tuple at a time; answers are memoized and every
//! request is recorded in a [`CallLog`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use crate::datalog::{Atom, Rule, Term};
use crate::error::{Error, Result};
use crate::magic::Adornment;
use crate::relmodel::{load_relation, Instance, RelationSignature, Tuple, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalDecl {
    pub name: String,
    pub signature: RelationSignature,
    pub binding: Adornment,
}

impl ExternalDecl {
    pub fn new(signature: RelationSignature, binding: Adornment) -> Result<Self> {
        if binding.len() != signature.arity() {
            return Err(Error::SchemaMismatch(format!(
                "binding pattern `{binding}` has length {} but `{}` has arity {}",
                binding.len(),
                signature.name,
                signature.arity()
            )));
        }
        Ok(ExternalDecl {
            name: signature.name.clone(),
            signature,
            binding,
        })
    }

    pub fn input_positions(&self) -> Vec<usize> {
        self.binding.bound_positions()
    }

    pub fn output_positions(&self) -> Vec<usize> {
        (0..self.binding.len())
            .filter(|&i| !self.binding[i].is_bound())
            .collect()
    }
}

impl fmt::Display for ExternalDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} binding \"{}\"", self.signature, self.binding)
    }
}

/// Host callback: input values to output rows, or an error message.
pub type Callback = Box<dyn FnMut(&[Value]) -> std::result::Result<Vec<Vec<Value>>, String> + Send>;

/// How a source answers requests.
pub enum Resolver {
    /// Exact-match lookup on the input columns of a CSV-backed table.
    Table { path: PathBuf, rows: Vec<Tuple> },
    Procedural(Callback),
}

impl fmt::Debug for Resolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolver::Table { path, rows } => f
                .debug_struct("Table")
                .field("path", path)
                .field("rows", &rows.len())
                .finish(),
            Resolver::Procedural(_) => f.write_str("Procedural"),
        }
    }
}

impl Resolver {
    /// Loads a table whose header matches the declaration's signature.
    pub fn table(path: &Path, decl: &ExternalDecl) -> Result<Resolver> {
        if !path.is_file() {
            return Err(Error::MissingRelation {
                relation: decl.name.clone(),
                path: path.to_path_buf(),
            });
        }
        let mut inst = Instance::new();
        load_relation(&mut inst, path, &decl.signature)?;
        Ok(Resolver::Table {
            path: path.to_path_buf(),
            rows: inst.tuples(&decl.name).iter().cloned().collect(),
        })
    }

    /// A table given in memory.
    pub fn rows(rows: impl IntoIterator<Item = Tuple>) -> Resolver {
        Resolver::Table {
            path: PathBuf::new(),
            rows: rows.into_iter().collect(),
        }
    }

    pub fn procedural<F>(f: F) -> Resolver
    where
        F: FnMut(&[Value]) -> std::result::Result<Vec<Vec<Value>>, String> + Send + 'static,
    {
        Resolver::Procedural(Box::new(f))
    }

    fn resolve(&mut self, decl: &ExternalDecl, inputs: &[Value]) -> std::result::Result<Vec<Tuple>, String> {
        let ins = decl.input_positions();
        let outs = decl.output_positions();
        match self {
            Resolver::Table { rows, .. } => {
                let found: BTreeSet<Tuple> = rows
                    .iter()
                    .filter(|r| ins.iter().zip(inputs).all(|(&i, v)| r[i].unifies(v)))
                    .map(|r| outs.iter().map(|&i| r[i].clone()).collect())
                    .collect();
                if found.is_empty() && !outs.is_empty() {
                    return Ok(vec![Tuple::new(vec![Value::Null; outs.len()])]);
                }
                Ok(found.into_iter().collect())
            }
            Resolver::Procedural(f) => {
                let rows = f(inputs)?;
                let mut found = BTreeSet::new();
                for r in rows {
                    if r.len() != outs.len() {
                        return Err(format!(
                            "returned a row of {} values for {} output positions",
                            r.len(),
                            outs.len()
                        ));
                    }
                    found.insert(Tuple::new(r));
                }
                Ok(found.into_iter().collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallEntry {
    pub seq: u64,
    pub source: String,
    pub inputs: Vec<Value>,
    pub outputs: Vec<Tuple>,
    pub cached: bool,
}

impl fmt::Display for CallEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = |vs: &[Value]| vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
        let outs: Vec<String> = self
            .outputs
            .iter()
            .map(|t| if t.is_all_null() && t.arity() > 0 { "null".to_string() } else { cells(t) })
            .collect();
        write!(f, "#{} get{}[{}; {}]", self.seq, self.source, cells(&self.inputs), outs.join(" | "))?;
        if self.cached {
            f.write_str(" (cached)")?;
        }
        Ok(())
    }
}

/// Ordered record of every request made to external sources.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallLog {
    pub entries: Vec<CallEntry>,
}

impl CallLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Requests that reached a resolver.
    pub fn underlying_calls(&self) -> usize {
        self.entries.iter().filter(|e| !e.cached).count()
    }

    pub fn for_source<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a CallEntry> + 'a {
        self.entries.iter().filter(move |e| e.source == source)
    }
}

struct Source {
    decl: ExternalDecl,
    resolver: Resolver,
}

/// Registered external sources with their cache and call log.
pub struct Registry {
    sources: BTreeMap<String, Source>,
    cache: HashMap<(String, Vec<Value>), Vec<Tuple>>,
    log: CallLog,
    memoize: bool,
}

impl Default for Registry {
    fn default() -> Self {
        Registry {
            sources: BTreeMap::new(),
            cache: HashMap::new(),
            log: CallLog::default(),
            memoize: true,
        }
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("sources", &self.sources.keys().collect::<Vec<_>>())
            .field("calls", &self.log.len())
            .finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, decl: ExternalDecl, resolver: Resolver) -> Result<()> {
        if self.sources.contains_key(&decl.name) {
            return Err(Error::DuplicateSource(decl.name));
        }
        self.sources.insert(decl.name.clone(), Source { decl, resolver });
        Ok(())
    }

    pub fn decl(&self, name: &str) -> Option<&ExternalDecl> {
        self.sources.get(name).map(|s| &s.decl)
    }

    pub fn decls(&self) -> impl Iterator<Item = &ExternalDecl> {
        self.sources.values().map(|s| &s.decl)
    }

    pub fn set_memoize(&mut self, on: bool) {
        self.memoize = on;
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }

    /// Clears the cache and the log, keeping the registered sources.
    pub fn reset(&mut self) {
        self.cache.clear();
        self.log = CallLog::default();
    }

    /// Asks `name` about ground `inputs` (the values of its `b` positions).
    /// Returns output rows over the `f` positions; a single all-Null row
    /// means the source is undefined for these inputs.
    pub fn invoke(&mut self, name: &str, inputs: &[Value]) -> Result<Vec<Tuple>> {
        let source = self
            .sources
            .get_mut(name)
            .ok_or_else(|| Error::UnknownSource(name.to_string()))?;
        let ins = source.decl.input_positions();
        if inputs.len() != ins.len() {
            return Err(Error::ArityMismatch {
                predicate: name.to_string(),
                expected: ins.len(),
                found: inputs.len(),
            });
        }
        if let Some(i) = inputs.iter().position(Value::is_null) {
            return Err(Error::BindingViolation {
                predicate: name.to_string(),
                position: ins[i] + 1,
            });
        }
        let seq = self.log.entries.len() as u64 + 1;
        let key = (name.to_string(), inputs.to_vec());
        if self.memoize {
            if let Some(outputs) = self.cache.get(&key) {
                self.log.entries.push(CallEntry {
                    seq,
                    source: name.to_string(),
                    inputs: inputs.to_vec(),
                    outputs: outputs.clone(),
                    cached: true,
                });
                return Ok(outputs.clone());
            }
        }
        match source.resolver.resolve(&source.decl, inputs) {
            Ok(outputs) => {
                self.log.entries.push(CallEntry {
                    seq,
                    source: name.to_string(),
                    inputs: inputs.to_vec(),
                    outputs: outputs.clone(),
                    cached: false,
                });
                if self.memoize {
                    self.cache.insert(key, outputs.clone());
                }
                Ok(outputs)
            }
            Err(message) => Err(Error::ResolverFailure {
                source_name: name.to_string(),
                message,
                log: Box::new(self.log.clone()),
            }),
        }
    }
}

/// Input-guardedness: every input variable of every external atom occurs
/// in an earlier body atom, other than as an input of another external.
pub fn check_input_guarded(rule: &Rule, externals: &BTreeMap<String, ExternalDecl>) -> bool {
    let mut guarded: BTreeSet<&str> = BTreeSet::new();
    for atom in &rule.body {
        match atom {
            Atom::Rel(r) => match externals.get(&r.predicate) {
                Some(decl) => {
                    for (t, b) in r.terms.iter().zip(decl.binding.iter()) {
                        if let Term::Var(v) = t {
                            if b.is_bound() && !guarded.contains(v.as_str()) {
                                return false;
                            }
                        }
                    }
                    for (t, b) in r.terms.iter().zip(decl.binding.iter()) {
                        if let (Term::Var(v), false) = (t, b.is_bound()) {
                            guarded.insert(v);
                        }
                    }
                }
                None if r.is_external() => return false,
                None => guarded.extend(r.variables()),
            },
            Atom::Builtin { .. } => {
                if let Some((v, _)) = atom.constant_equality() {
                    guarded.insert(v);
                }
            }
        }
    }
    true
}

/// The input relation of the first external atom of `rule`: the join of
/// the atoms before it, projected onto its input variables. The result is
/// the relation `input` of `prefix` extended by that projection.
pub fn derive_input_relation(rule: &Rule, prefix: &Instance, externals: &BTreeMap<String, ExternalDecl>) -> Result<Instance> {
    let Some(pos) = rule.body.iter().position(|a| a.as_rel().is_some_and(|r| r.is_external())) else {
        return Err(Error::Type(format!(
            "rule for `{}` has no external atom",
            rule.head.predicate
        )));
    };
    let ext = rule.body[pos].as_rel().expect("relational atom");
    let decl = externals
        .get(&ext.predicate)
        .ok_or_else(|| Error::UnknownSource(ext.predicate.clone()))?;
    let inputs: Vec<Term> = decl
        .input_positions()
        .into_iter()
        .map(|i| ext.terms[i].clone())
        .collect();
    let head = crate::datalog::RelAtom::new("input", inputs);
    let input_rule = Rule::new(head, rule.body[..pos].to_vec());
    let program = crate::datalog::Program::new(vec![input_rule])?;
    let out = crate::datalog::evaluate(&program, prefix)?;
    Ok(out.restrict(["input"]))
}
