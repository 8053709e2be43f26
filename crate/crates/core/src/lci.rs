//! Legal contextual instances.
//!
//! A contextual instance is legal when it contains the partial contextual
//! data, holds the lifted source data in the nicknames (exactly for copy
//! mappings, as a subset for open ones), satisfies the inverted footprints,
//! keeps closed relations at their given extension, and gives every derived
//! predicate its defined extension.

use std::collections::{BTreeMap, BTreeSet};

use crate::context::{lift, ContextualSystem, Mapping};
use crate::datalog::{evaluate, evaluate_with, Atom, Program, Query, RelAtom, Rule, Term};
use crate::error::{Error, Result};
use crate::extsrc::Registry;
use crate::relmodel::{Instance, RelationSignature, Tuple, Value};
use crate::unfold::qua_rewrite;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LciSpec {
    pub system: ContextualSystem,
    pub open_nicknames: BTreeSet<String>,
    pub partial_instance: Instance,
}

impl LciSpec {
    /// Open nicknames from the system's open mappings, partial data from
    /// its contextual data.
    pub fn new(system: ContextualSystem) -> Self {
        LciSpec {
            open_nicknames: system.open_nicknames(),
            partial_instance: system.contextual_data.clone(),
            system,
        }
    }

    fn exact_nicknames(&self) -> BTreeMap<String, String> {
        self.system
            .mappings
            .iter()
            .filter_map(|m| match m {
                Mapping::Copy { source, nickname } if !self.open_nicknames.contains(nickname) => {
                    Some((nickname.clone(), source.clone()))
                }
                _ => None,
            })
            .collect()
    }

    /// Base relations an LCI may extend beyond the forced tuples.
    fn open_relations(&self) -> Vec<&RelationSignature> {
        let exact = self.exact_nicknames();
        self.system
            .contextual_schema
            .iter()
            .filter(|s| !self.system.closed_context_relations.contains(&s.name) && !exact.contains_key(&s.name))
            .collect()
    }

    fn inverse(&self) -> Result<Vec<Rule>> {
        let footprints: Vec<Rule> = self.system.footprints().cloned().collect();
        inverse_rules(&footprints, &self.system.nicknames())
    }
}

/// Inverts footprint views: for `R(x̄) :- B1, ..., Bk, φ` emits
/// `Bi :- R'(x̄), φ'` per relational atom, where `R'` is `R`'s nickname
/// (from `nicknames`, else `R` itself) and `φ'` keeps the built-ins over
/// recoverable variables. A variable is recoverable if it occurs in `x̄` or
/// is equated to a constant by `φ`.
pub fn inverse_rules(footprints: &[Rule], nicknames: &BTreeMap<String, String>) -> Result<Vec<Rule>> {
    let mut out = Vec::new();
    for view in footprints {
        let mut known: BTreeSet<&str> = view.head.variables().collect();
        known.extend(view.body.iter().filter_map(|a| a.constant_equality().map(|(v, _)| v)));
        let name = nicknames
            .get(&view.head.predicate)
            .cloned()
            .unwrap_or_else(|| view.head.predicate.clone());
        let mut body = vec![Atom::Rel(RelAtom::new(name, view.head.terms.clone()))];
        body.extend(
            view.body
                .iter()
                .filter(|a| a.is_builtin() && a.variables().iter().all(|v| known.contains(v)))
                .cloned(),
        );
        for atom in view.rel_atoms() {
            if let Some(v) = atom.variables().find(|v| !known.contains(v)) {
                return Err(Error::UninvertibleView {
                    view: view.head.predicate.clone(),
                    atom: atom.to_string(),
                    variable: v.to_string(),
                });
            }
            out.push(Rule::new(atom.clone(), body.clone()));
        }
    }
    Ok(out)
}

fn base_instance(spec: &LciSpec, d: &Instance) -> Result<Instance> {
    let mut sys = spec.system.clone();
    sys.contextual_data = spec.partial_instance.clone();
    let mut base = lift(&sys, d)?;
    for sig in &spec.system.contextual_schema {
        if base.signature(&sig.name).is_none() {
            base.declare(sig.clone());
        }
    }
    for (nickname, source) in spec.exact_nicknames() {
        if base.tuples(&nickname) != d.tuples(&source) {
            return Err(Error::NoLegalInstance(format!(
                "partial data for exact nickname `{nickname}` goes beyond `{source}`"
            )));
        }
    }
    Ok(base)
}

/// Adds the consequences of the inverse rules; fails if they reach beyond
/// the fixed extension of a closed or exact relation.
fn close_inverse(spec: &LciSpec, inverse: &[Rule], inst: &mut Instance) -> Result<()> {
    if inverse.is_empty() {
        return Ok(());
    }
    let fixed: BTreeSet<String> = spec
        .system
        .closed_context_relations
        .iter()
        .cloned()
        .chain(spec.exact_nicknames().into_keys())
        .collect();
    let derived = evaluate(&Program::new(inverse.to_vec())?, inst)?;
    for rule in inverse {
        let p = &rule.head.predicate;
        for t in derived.tuples(p) {
            if !inst.contains(p, t) {
                if fixed.contains(p) {
                    return Err(Error::NoLegalInstance(format!(
                        "inverse rule forces {p}{t} into a closed relation"
                    )));
                }
                inst.insert_checked(p, t.clone())?;
            }
        }
    }
    Ok(())
}

fn derive(spec: &LciSpec, inst: &Instance, registry: Option<&mut Registry>) -> Result<Instance> {
    let program = Program::new(spec.system.rules())?;
    match registry {
        Some(r) => evaluate_with(&program, inst, r),
        None => evaluate(&program, inst),
    }
}

/// The smallest legal contextual instance, derived predicates included.
pub fn minimal_lci(spec: &LciSpec, d: &Instance) -> Result<Instance> {
    minimal_lci_inner(spec, d, None)
}

/// As [`minimal_lci`], resolving external atoms through `registry`.
pub fn minimal_lci_with(spec: &LciSpec, d: &Instance, registry: &mut Registry) -> Result<Instance> {
    minimal_lci_inner(spec, d, Some(registry))
}

fn minimal_lci_inner(spec: &LciSpec, d: &Instance, registry: Option<&mut Registry>) -> Result<Instance> {
    let mut inst = base_instance(spec, d)?;
    close_inverse(spec, &spec.inverse()?, &mut inst)?;
    derive(spec, &inst, registry)
}

/// Certain quality answers of a union of conjunctive queries: the
/// nickname-substituted query evaluated on the minimal LCI.
pub fn quality_answers_certain(query: &Query, spec: &LciSpec, d: &Instance) -> Result<BTreeSet<Tuple>> {
    let imin = minimal_lci(spec, d)?;
    certain_on(query, spec, &imin)
}

/// As [`quality_answers_certain`], resolving external atoms through
/// `registry`.
pub fn quality_answers_certain_with(
    query: &Query,
    spec: &LciSpec,
    d: &Instance,
    registry: &mut Registry,
) -> Result<BTreeSet<Tuple>> {
    let imin = minimal_lci_with(spec, d, registry)?;
    certain_on(query, spec, &imin)
}

fn certain_on(query: &Query, spec: &LciSpec, lci: &Instance) -> Result<BTreeSet<Tuple>> {
    let (_, trace) = qua_rewrite(query, &spec.system, false)?;
    let substituted = &trace.stages[0].1;
    Ok(evaluate(&substituted.program, lci)?.tuples(&query.answer).clone())
}

/// The nickname-substituted query evaluated on one contextual instance.
pub fn answers_on(query: &Query, spec: &LciSpec, lci: &Instance) -> Result<BTreeSet<Tuple>> {
    certain_on(query, spec, lci)
}

fn rule_constants(rules: &[Rule], out: &mut BTreeSet<Value>) {
    for r in rules {
        let terms = r.head.terms.iter().chain(r.body.iter().flat_map(|a| match a {
            Atom::Rel(x) => x.terms.iter().collect::<Vec<_>>(),
            Atom::Builtin { left, right, .. } => vec![left, right],
        }));
        for t in terms {
            if let Term::Const(v) = t {
                out.insert(v.clone());
            }
        }
    }
}

pub const MAX_DOMAIN: usize = 12;
pub const MAX_FREE_TUPLES: usize = 20;

/// Every LCI whose tuples draw from the active domain, padded with fresh
/// text constants `~1`, `~2`, ... up to `domain_bound` values. Results are
/// sorted.
pub fn enumerate_lcis_bounded(spec: &LciSpec, d: &Instance, domain_bound: usize) -> Result<Vec<Instance>> {
    let mut domain: BTreeSet<Value> = BTreeSet::new();
    for inst in [d, &spec.partial_instance] {
        for name in inst.relation_names() {
            for t in inst.tuples(name) {
                domain.extend(t.iter().filter(|v| !v.is_null()).cloned());
            }
        }
    }
    let mut rules = spec.system.rules();
    rules.extend(spec.system.footprints().cloned());
    rule_constants(&rules, &mut domain);
    if domain_bound > MAX_DOMAIN || domain.len() > domain_bound {
        return Err(Error::DomainTooLarge(format!(
            "active domain has {} values, bound is {domain_bound} (at most {MAX_DOMAIN})",
            domain.len()
        )));
    }
    let mut fresh = 1;
    while domain.len() < domain_bound {
        domain.insert(Value::Str(format!("~{fresh}")));
        fresh += 1;
    }
    let domain: Vec<Value> = domain.into_iter().collect();

    let base = match base_instance(spec, d) {
        Ok(b) => b,
        Err(Error::NoLegalInstance(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut free: Vec<(String, Tuple)> = Vec::new();
    for sig in spec.open_relations() {
        for t in tuples_over(sig, &domain) {
            if !base.contains(&sig.name, &t) {
                free.push((sig.name.clone(), t));
            }
        }
        if free.len() > MAX_FREE_TUPLES {
            return Err(Error::DomainTooLarge(format!(
                "more than {MAX_FREE_TUPLES} candidate tuples over a domain of {domain_bound}"
            )));
        }
    }
    let inverse = spec.inverse()?;
    let inverse_program = if inverse.is_empty() {
        None
    } else {
        Some(Program::new(inverse.clone())?)
    };
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << free.len()) {
        let mut inst = base.clone();
        for (i, (name, t)) in free.iter().enumerate() {
            if mask & (1 << i) != 0 {
                inst.insert(name, t.clone());
            }
        }
        if let Some(p) = &inverse_program {
            let derived = evaluate(p, &inst)?;
            let closed = inverse.iter().all(|r| {
                let h = &r.head.predicate;
                derived.tuples(h).iter().all(|t| inst.contains(h, t))
            });
            if !closed {
                continue;
            }
        }
        out.push(derive(spec, &inst, None)?);
    }
    out.sort_by_key(canonical);
    Ok(out)
}

fn canonical(inst: &Instance) -> Vec<(String, Vec<Tuple>)> {
    inst.relation_names()
        .map(|n| (n.to_string(), inst.tuples(n).iter().cloned().collect()))
        .collect()
}

fn tuples_over(sig: &RelationSignature, domain: &[Value]) -> Vec<Tuple> {
    let columns: Vec<Vec<&Value>> = sig
        .attributes
        .iter()
        .map(|a| domain.iter().filter(|v| a.kind.admits(v)).collect())
        .collect();
    let mut out = vec![Vec::new()];
    for col in columns {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Value>| {
                col.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((*v).clone());
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Tuple::new).collect()
}
