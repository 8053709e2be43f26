//! Quality unfolding: rewrites a query over the source schema into a query
//! over the contextual schema, quality predicates and external sources.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::context::{lift, ContextualSystem};
use crate::datalog::{evaluate_with, unfold_into, Atom, Program, Query, RelAtom, Rule};
use crate::error::{Error, Result};
use crate::extsrc::Registry;
use crate::relmodel::{Instance, Tuple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    NicknameSubstitution,
    ViewUnfold,
    CqpUnfold,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::NicknameSubstitution => "nickname-substitution",
            Stage::ViewUnfold => "view-unfold",
            Stage::CqpUnfold => "cqp-unfold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteTrace {
    pub stages: Vec<(Stage, Query)>,
}

impl fmt::Display for RewriteTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (stage, q) in &self.stages {
            writeln!(f, "% {stage}")?;
            write!(f, "{q}")?;
        }
        Ok(())
    }
}

fn substitute(query: &Query, system: &ContextualSystem) -> Result<Query> {
    if let Some(r) = query.program.rules.iter().find(|r| r.head.predicate != query.answer) {
        return Err(Error::NonConjunctiveQuery(format!(
            "intermediate predicate `{}`; only unions of conjunctive queries over the source schema are rewritten",
            r.head.predicate
        )));
    }
    let quality = system.quality_nicknames();
    let mut rules = Vec::new();
    for rule in query.answer_rules() {
        let mut body = Vec::with_capacity(rule.body.len());
        for atom in &rule.body {
            match atom {
                Atom::Rel(r) => {
                    if system.source(&r.predicate).is_none() {
                        return Err(Error::UnknownPredicate(r.predicate.clone()));
                    }
                    let name = quality
                        .get(&r.predicate)
                        .ok_or_else(|| Error::MissingViewDefinition(format!("{}'_P", r.predicate)))?;
                    body.push(Atom::Rel(RelAtom::new(name.clone(), r.terms.clone())));
                }
                b => body.push(b.clone()),
            }
        }
        rules.push(Rule::new(rule.head.clone(), body));
    }
    Query::new(query.answer.clone(), Program::new(rules)?)
}

/// Predicates among `rules`' heads whose definitions reach an external atom.
fn external_dependent(rules: &[Rule]) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = BTreeSet::new();
    loop {
        let before = out.len();
        for r in rules {
            if r.rel_atoms().any(|a| a.is_external() || out.contains(&a.predicate)) {
                out.insert(r.head.predicate.clone());
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

/// Adds to `query` the system's rule definitions (context views, CQPs,
/// quality views) that its answer rules depend on, so that it evaluates
/// over contextual relations and external sources.
pub fn close_query(query: &Query, system: &ContextualSystem) -> Result<Query> {
    let own: BTreeSet<&str> = query.program.defined_predicates();
    let mut rules = query.program.rules.clone();
    let extra: Vec<Rule> = system
        .context_views
        .iter()
        .chain(system.cqps())
        .chain(system.quality_views().map(|(_, r)| r))
        .filter(|r| !own.contains(r.head.predicate.as_str()))
        .cloned()
        .collect();
    rules.extend(extra);
    let full = Program::new(rules)?;
    let keep = full.reachable_from(&query.answer);
    let rules = full
        .rules
        .into_iter()
        .filter(|r| keep.contains(&r.head.predicate))
        .collect();
    Query::new(query.answer.clone(), Program::new(rules)?)
}

/// Rewrites `query` in up to three stages: source relations to quality
/// nicknames, quality views unfolded, then (if `unfold_cqps`) quality
/// predicates and context views unfolded, except those reaching an
/// external predicate. The returned query carries the definitions of every
/// predicate left folded.
pub fn qua_rewrite(query: &Query, system: &ContextualSystem, unfold_cqps: bool) -> Result<(Query, RewriteTrace)> {
    let q1 = substitute(query, system)?;
    let mut trace = RewriteTrace {
        stages: vec![(Stage::NicknameSubstitution, q1.clone())],
    };

    let views: Vec<Rule> = system.quality_views().map(|(_, r)| r.clone()).collect();
    let mut base: BTreeSet<String> = system.contextual_predicates().into_iter().map(str::to_string).collect();
    base.extend(system.cqps().map(|r| r.head.predicate.clone()));
    let q2 = unfold_into(&q1, &views, &base)?;
    trace.stages.push((Stage::ViewUnfold, q2.clone()));
    if !unfold_cqps {
        return Ok((q2, trace));
    }

    let defs: Vec<Rule> = system.context_views.iter().chain(system.cqps()).cloned().collect();
    let folded = external_dependent(&defs);
    let unfoldable: Vec<Rule> = defs
        .iter()
        .filter(|r| !folded.contains(&r.head.predicate))
        .cloned()
        .collect();
    let mut base: BTreeSet<String> = system.contextual_schema.iter().map(|s| s.name.clone()).collect();
    base.extend(folded);
    let q3 = close_query(&unfold_into(&q2, &unfoldable, &base)?, system)?;
    trace.stages.push((Stage::CqpUnfold, q3.clone()));
    Ok((q3, trace))
}

/// Quality answers by unfolding: the rewritten query evaluated over the
/// lifted instance, external atoms resolved through `registry`.
pub fn answer_with_context(
    query: &Query,
    system: &ContextualSystem,
    d: &Instance,
    registry: &mut Registry,
) -> Result<BTreeSet<Tuple>> {
    let (rewritten, _) = qua_rewrite(query, system, true)?;
    let contextual = lift(system, d)?;
    let out = evaluate_with(&rewritten.program, &contextual, registry)?;
    Ok(out.tuples(&query.answer).clone())
}

/// `Ans_R(x̄) :- R(x̄)` for every source relation, keyed by relation.
pub fn relation_queries(system: &ContextualSystem) -> Result<BTreeMap<String, Query>> {
    system
        .source_schema
        .iter()
        .map(|sig| {
            let vars: Vec<String> = (1..=sig.arity()).map(|i| format!("x{i}")).collect();
            let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
            let answer = format!("Ans_{}", sig.name);
            let rule = Rule::new(RelAtom::vars(answer.clone(), &vars), vec![Atom::Rel(RelAtom::vars(sig.name.clone(), &vars))]);
            Ok((sig.name.clone(), Query::new(answer, Program::new(vec![rule])?)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::parse_system;
    use crate::datalog::{evaluate, parse_query};
    use std::path::Path;

    const SYSTEM: &str = r#"
source { R(a: str, b: num). }
context { K(a: str). E(a: str, b: str). }
external { #X(a: str -> b: str) binding "bf". }
mapping { copy R. }
cqp {
  Good(a) :- K(a).
  Far(a) :- E(a, z), #X(z, w).
}
quality { R: R'_P(a, b) :- R'(a, b), Good(a), b > 1. }
"#;

    fn system() -> ContextualSystem {
        parse_system(SYSTEM, Path::new(".")).unwrap()
    }

    #[test]
    fn three_stages() {
        let q = parse_query("Ans(a) :- R(a, b), b < 9.").unwrap();
        let (out, trace) = qua_rewrite(&q, &system(), true).unwrap();
        let stages: Vec<String> = trace.stages.iter().map(|(s, q)| format!("{s}: {q}")).collect();
        assert_eq!(
            stages,
            vec![
                "nickname-substitution: Ans(a) :- R'_P(a, b), b < 9.\n",
                "view-unfold: Ans(a) :- R'(a, b), Good(a), b > 1, b < 9.\n",
                "cqp-unfold: Ans(a) :- R'(a, b), K(a), b > 1, b < 9.\n",
            ]
        );
        assert_eq!(out, trace.stages[2].1);
    }

    #[test]
    fn stage_two_only_without_cqp_unfolding() {
        let q = parse_query("Ans(a) :- R(a, b).").unwrap();
        let (out, trace) = qua_rewrite(&q, &system(), false).unwrap();
        assert_eq!(trace.stages.len(), 2);
        assert_eq!(out.to_string(), "Ans(a) :- R'(a, b), Good(a), b > 1.\n");
    }

    #[test]
    fn external_cqp_stays_folded_with_definition() {
        let text = SYSTEM.replace("Good(a), b > 1", "Far(a), b > 1");
        let sys = parse_system(&text, Path::new(".")).unwrap();
        let q = parse_query("Ans(a) :- R(a, b).").unwrap();
        let (out, _) = qua_rewrite(&q, &sys, true).unwrap();
        assert_eq!(
            out.to_string(),
            "Ans(a) :- R'(a, b), Far(a), b > 1.\nFar(a) :- E(a, z), #X(z, w).\n"
        );
    }

    #[test]
    fn non_source_predicates_are_rejected() {
        let q = parse_query("Ans(a) :- K(a).").unwrap();
        assert!(matches!(qua_rewrite(&q, &system(), true), Err(Error::UnknownPredicate(p)) if p == "K"));
        let q = parse_query("Ans(a) :- V(a). V(a) :- R(a, b).").unwrap();
        assert!(matches!(qua_rewrite(&q, &system(), true), Err(Error::NonConjunctiveQuery(_))));
    }

    #[test]
    fn stage_three_is_a_fixpoint() {
        let sys = system();
        let q = parse_query("Ans(a) :- R(a, b).").unwrap();
        let (out, _) = qua_rewrite(&q, &sys, true).unwrap();
        let base: BTreeSet<String> = sys.contextual_schema.iter().map(|s| s.name.clone()).collect();
        let again = unfold_into(&out, &sys.rules(), &base).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn answers_from_empty_instance() {
        let sys = system();
        let q = parse_query("Ans(a) :- R(a, b).").unwrap();
        let mut reg = Registry::new();
        assert!(answer_with_context(&q, &sys, &Instance::new(), &mut reg).unwrap().is_empty());
    }

    #[test]
    fn relation_query_answers_are_the_quality_relation() {
        let sys = system();
        let mut d = Instance::new();
        let mut ctx = sys.contextual_data.clone();
        use crate::relmodel::Value;
        for (a, b) in [("x", "1"), ("x", "2"), ("y", "5")] {
            d.insert("R", Tuple::new(vec![Value::str(a), Value::num(b)]));
        }
        ctx.insert("K", Tuple::new(vec![Value::str("x")]));
        let mut sys = sys;
        sys.contextual_data = ctx;
        let qs = relation_queries(&sys).unwrap();
        let mut reg = Registry::new();
        let ans = answer_with_context(&qs["R"], &sys, &d, &mut reg).unwrap();
        let lifted = lift(&sys, &d).unwrap();
        let quality = crate::context::quality_instance(&sys, &lifted).unwrap();
        assert_eq!(&ans, quality.tuples("R"));
        assert_eq!(ans.len(), 1);
        let direct = evaluate(&qs["R"].program, &d).unwrap();
        assert!(ans.is_subset(direct.tuples("Ans_R")));
    }
}
