//! Contextual systems: the source schema under assessment, a contextual
//! schema holding nickname copies of the source relations, quality
//! predicates, external sources, and the mappings between them.

mod dqx;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

pub use dqx::{load_system, parse_system};

use crate::datalog::{evaluate, evaluate_with, Program, Rule};
use crate::error::{Error, Result};
use crate::extsrc::{ExternalDecl, Registry, Resolver};
use crate::magic::Adornment;
use crate::relmodel::{load_facts, load_relation, Instance, RelationSignature};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mapping {
    /// `R'` holds exactly `R(D)`.
    Copy { source: String, nickname: String },
    /// `R(D) ⊆ R'`.
    OpenGav { source: String, nickname: String },
    /// A source relation seen as a view over contextual relations.
    Footprint(Rule),
    /// The quality version `R'_P` of source relation `source`.
    QualityView { source: String, rule: Rule },
    /// A contextual quality predicate.
    CqpDef(Rule),
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mapping::Copy { source, nickname } => write!(f, "copy {source} -> {nickname}."),
            Mapping::OpenGav { source, nickname } => write!(f, "open {source} -> {nickname}."),
            Mapping::Footprint(r) => write!(f, "footprint {r}"),
            Mapping::QualityView { source, rule } => write!(f, "{source}: {rule}"),
            Mapping::CqpDef(r) => write!(f, "{r}"),
        }
    }
}

/// An external predicate together with where its answers come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSource {
    pub decl: ExternalDecl,
    /// CSV backing the source; `None` when a host resolver is attached.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextualSystem {
    pub source_schema: Vec<RelationSignature>,
    /// Declared contextual relations plus nicknames.
    pub contextual_schema: Vec<RelationSignature>,
    pub quality_predicates: BTreeSet<String>,
    pub external_predicates: Vec<ExternalSource>,
    pub mappings: Vec<Mapping>,
    /// Derived contextual predicates defined over contextual relations.
    pub context_views: Vec<Rule>,
    pub contextual_data: Instance,
    pub closed_context_relations: BTreeSet<String>,
}

pub fn nickname_of(source: &str) -> String {
    format!("{source}'")
}

impl ContextualSystem {
    pub fn source(&self, name: &str) -> Option<&RelationSignature> {
        self.source_schema.iter().find(|s| s.name == name)
    }

    pub fn contextual(&self, name: &str) -> Option<&RelationSignature> {
        self.contextual_schema.iter().find(|s| s.name == name)
    }

    /// Source relation to nickname, for Copy and OpenGav mappings.
    pub fn nicknames(&self) -> BTreeMap<String, String> {
        self.mappings
            .iter()
            .filter_map(|m| match m {
                Mapping::Copy { source, nickname } | Mapping::OpenGav { source, nickname } => {
                    Some((source.clone(), nickname.clone()))
                }
                _ => None,
            })
            .collect()
    }

    pub fn open_nicknames(&self) -> BTreeSet<String> {
        self.mappings
            .iter()
            .filter_map(|m| match m {
                Mapping::OpenGav { nickname, .. } => Some(nickname.clone()),
                _ => None,
            })
            .collect()
    }

    /// Source relation to the predicate naming its quality version.
    pub fn quality_nicknames(&self) -> BTreeMap<String, String> {
        self.quality_views()
            .map(|(s, r)| (s.to_string(), r.head.predicate.clone()))
            .collect()
    }

    pub fn quality_views(&self) -> impl Iterator<Item = (&str, &Rule)> {
        self.mappings.iter().filter_map(|m| match m {
            Mapping::QualityView { source, rule } => Some((source.as_str(), rule)),
            _ => None,
        })
    }

    pub fn cqps(&self) -> impl Iterator<Item = &Rule> {
        self.mappings.iter().filter_map(|m| match m {
            Mapping::CqpDef(r) => Some(r),
            _ => None,
        })
    }

    pub fn footprints(&self) -> impl Iterator<Item = &Rule> {
        self.mappings.iter().filter_map(|m| match m {
            Mapping::Footprint(r) => Some(r),
            _ => None,
        })
    }

    /// Context views, CQPs and quality views, in that order.
    pub fn rules(&self) -> Vec<Rule> {
        self.context_views
            .iter()
            .chain(self.cqps())
            .chain(self.quality_views().map(|(_, r)| r))
            .cloned()
            .collect()
    }

    /// The rules the quality views depend on, quality views included.
    pub fn quality_program(&self) -> Result<Program> {
        let all = Program::new(self.rules())?;
        let mut keep = BTreeSet::new();
        for (_, r) in self.quality_views() {
            keep.extend(all.reachable_from(&r.head.predicate));
        }
        Program::new(all.rules.into_iter().filter(|r| keep.contains(&r.head.predicate)).collect())
    }

    pub fn decls(&self) -> BTreeMap<String, ExternalDecl> {
        self.external_predicates
            .iter()
            .map(|e| (e.decl.name.clone(), e.decl.clone()))
            .collect()
    }

    pub fn bindings(&self) -> BTreeMap<String, Adornment> {
        self.external_predicates
            .iter()
            .map(|e| (e.decl.name.clone(), e.decl.binding.clone()))
            .collect()
    }

    /// A registry with a table-backed resolver for every external source
    /// that names a table. An unreadable table is a resolver failure.
    pub fn registry(&self) -> Result<Registry> {
        let mut reg = Registry::new();
        for e in &self.external_predicates {
            if let Some(path) = &e.table {
                let resolver = Resolver::table(path, &e.decl).map_err(|err| Error::ResolverFailure {
                    source_name: e.decl.name.clone(),
                    message: err.to_string(),
                    log: Box::default(),
                })?;
                reg.register(e.decl.clone(), resolver)?;
            }
        }
        Ok(reg)
    }

    /// Contextual predicate names: declared relations and context views.
    pub fn contextual_predicates(&self) -> BTreeSet<&str> {
        self.contextual_schema
            .iter()
            .map(|s| s.name.as_str())
            .chain(self.context_views.iter().map(|r| r.head.predicate.as_str()))
            .collect()
    }

    /// Checks the structural invariants of the system.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidSystem(m));
        let nicknames = self.nicknames();
        for sig in &self.source_schema {
            let count = self
                .mappings
                .iter()
                .filter(|m| matches!(m, Mapping::Copy { source, .. } | Mapping::OpenGav { source, .. } if source == &sig.name))
                .count();
            if count != 1 {
                return invalid(format!(
                    "source relation `{}` needs exactly one copy or open mapping, found {count}",
                    sig.name
                ));
            }
            let nick = &nicknames[&sig.name];
            match self.contextual(nick) {
                Some(n) if n.attributes == sig.attributes => {}
                _ => {
                    return invalid(format!(
                        "nickname `{nick}` must have the signature of `{}`",
                        sig.name
                    ))
                }
            }
            if !self.quality_views().any(|(s, _)| s == sig.name) {
                return invalid(format!("source relation `{}` has no quality view", sig.name));
            }
        }
        for m in &self.mappings {
            if let Mapping::Copy { source, .. } | Mapping::OpenGav { source, .. } = m {
                if self.source(source).is_none() {
                    return invalid(format!("mapping from unknown source relation `{source}`"));
                }
            }
        }
        let c = self.contextual_predicates();
        let p: BTreeSet<&str> = self.cqps().map(|r| r.head.predicate.as_str()).collect();
        let e: BTreeSet<&str> = self.external_predicates.iter().map(|x| x.decl.name.as_str()).collect();
        for (source, rule) in self.quality_views() {
            let Some(sig) = self.source(source) else {
                return invalid(format!("quality view for unknown source relation `{source}`"));
            };
            if rule.head.arity() != sig.arity() {
                return invalid(format!(
                    "quality view `{}` has arity {} but `{source}` has arity {}",
                    rule.head.predicate,
                    rule.head.arity(),
                    sig.arity()
                ));
            }
            if let Some(a) = rule.rel_atoms().find(|a| !c.contains(a.predicate.as_str()) && !p.contains(a.predicate.as_str())) {
                return invalid(format!(
                    "quality view `{}` mentions `{}`, which is neither contextual nor a quality predicate",
                    rule.head.predicate, a.predicate
                ));
            }
        }
        for rule in self.cqps() {
            if let Some(a) = rule.rel_atoms().find(|a| !c.contains(a.predicate.as_str()) && !e.contains(a.predicate.as_str())) {
                return invalid(format!(
                    "quality predicate `{}` mentions `{}`, which is neither contextual nor external",
                    rule.head.predicate, a.predicate
                ));
            }
        }
        for rule in &self.context_views {
            if let Some(a) = rule.rel_atoms().find(|a| !c.contains(a.predicate.as_str())) {
                return invalid(format!(
                    "context view `{}` mentions non-contextual `{}`",
                    rule.head.predicate, a.predicate
                ));
            }
        }
        for name in &self.closed_context_relations {
            if self.contextual(name).is_none() {
                return invalid(format!("closed relation `{name}` is not in the contextual schema"));
            }
        }
        for rule in self.footprints() {
            if self.source(&rule.head.predicate).is_none() && !nicknames.values().any(|n| n == &rule.head.predicate) {
                return invalid(format!(
                    "footprint head `{}` is neither a source relation nor a nickname",
                    rule.head.predicate
                ));
            }
        }
        Program::new(self.rules())?;
        Ok(())
    }

    /// Reads the source relations (required) and contextual base relations
    /// (optional, missing files are empty) from `dir`. Returns the instance
    /// under assessment; contextual files are added to `contextual_data`.
    pub fn load_data(&mut self, dir: &Path) -> Result<Instance> {
        let d = load_facts(dir, &self.source_schema)?;
        let nicknames: BTreeSet<String> = self.nicknames().into_values().collect();
        for sig in &self.contextual_schema {
            self.contextual_data.declare(sig.clone());
            if nicknames.contains(&sig.name) {
                continue;
            }
            let path = crate::relmodel::relation_path(dir, &sig.name);
            if path.is_file() {
                load_relation(&mut self.contextual_data, &path, sig)?;
            }
        }
        Ok(d)
    }
}

/// Contextual data extended with every nickname extension `R'(D) := R(D)`.
pub fn lift(system: &ContextualSystem, d: &Instance) -> Result<Instance> {
    let mut out = system.contextual_data.clone();
    for (source, nickname) in system.nicknames() {
        let sig = system
            .source(&source)
            .ok_or_else(|| Error::InvalidSystem(format!("unknown source relation `{source}`")))?;
        if let Some(found) = d.signature(&source) {
            if found.attributes != sig.attributes {
                return Err(Error::SchemaMismatch(format!(
                    "instance has {found} but the system declares {sig}"
                )));
            }
        }
        out.declare(sig.renamed(nickname.clone()));
        for t in d.tuples(&source) {
            out.insert_checked(&nickname, t.clone())?;
        }
    }
    Ok(out)
}

fn quality_from(system: &ContextualSystem, evaluated: &Instance) -> Instance {
    let mut out = Instance::with_schema(&system.source_schema);
    for (source, rule) in system.quality_views() {
        out.extend_relation(source, evaluated.tuples(&rule.head.predicate).iter().cloned());
    }
    out
}

/// Evaluates context views, CQPs and quality views over `contextual`;
/// relation `R` of the result is the extension of `R'_P`.
pub fn quality_instance(system: &ContextualSystem, contextual: &Instance) -> Result<Instance> {
    Ok(quality_from(system, &evaluate(&system.quality_program()?, contextual)?))
}

/// As [`quality_instance`], resolving external atoms through `registry`.
pub fn quality_instance_with(system: &ContextualSystem, contextual: &Instance, registry: &mut Registry) -> Result<Instance> {
    Ok(quality_from(system, &evaluate_with(&system.quality_program()?, contextual, registry)?))
}

/// A system whose contextual schema is one exact nickname per source
/// relation; quality views are left to the caller.
pub fn create_nickname_context(source_schema: &[RelationSignature]) -> ContextualSystem {
    let mut system = ContextualSystem {
        source_schema: source_schema.to_vec(),
        ..Default::default()
    };
    for sig in source_schema {
        let nickname = nickname_of(&sig.name);
        system.contextual_schema.push(sig.renamed(nickname.clone()));
        system.mappings.push(Mapping::Copy {
            source: sig.name.clone(),
            nickname,
        });
    }
    system
}
