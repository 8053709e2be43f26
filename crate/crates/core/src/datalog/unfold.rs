//! View unfolding by most general unifiers.

use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Program, Query, RelAtom, Rule, Term};
use crate::error::{Error, Result};

/// Variable bindings produced by unification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: impl Into<String>, term: Term) {
        self.0.insert(var.into(), term);
    }

    pub fn resolve(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        while let Term::Var(v) = &cur {
            match self.0.get(v) {
                Some(next) if next != &cur => cur = next.clone(),
                _ => break,
            }
        }
        cur
    }

    /// Unifies `a` with `b`, binding variables of `a` in preference.
    pub fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let (a, b) = (self.resolve(a), self.resolve(b));
        if a == b {
            return true;
        }
        match (&a, &b) {
            (Term::Var(x), _) => {
                self.0.insert(x.clone(), b);
                true
            }
            (_, Term::Var(y)) => {
                self.0.insert(y.clone(), a);
                true
            }
            _ => false,
        }
    }

    pub fn apply_atom(&self, atom: &RelAtom) -> RelAtom {
        RelAtom::new(
            atom.predicate.clone(),
            atom.terms.iter().map(|t| self.resolve(t)).collect(),
        )
    }

    pub fn apply(&self, atom: &Atom) -> Atom {
        match atom {
            Atom::Rel(r) => Atom::Rel(self.apply_atom(r)),
            Atom::Builtin { op, left, right } => Atom::builtin(*op, self.resolve(left), self.resolve(right)),
        }
    }

    pub fn apply_rule(&self, rule: &Rule) -> Rule {
        Rule::new(
            self.apply_atom(&rule.head),
            rule.body.iter().map(|a| self.apply(a)).collect(),
        )
    }
}

/// Renames the variables of `rule` that occur in `avoid` to `<name>_<n>`,
/// drawing `n` from `counter`.
pub fn rename_apart(rule: &Rule, avoid: &BTreeSet<String>, counter: &mut usize) -> Rule {
    let own: BTreeSet<String> = rule.variables().into_iter().collect();
    let mut sub = Substitution::new();
    let mut taken: BTreeSet<String> = avoid.union(&own).cloned().collect();
    for v in own.iter().filter(|v| avoid.contains(*v)) {
        let fresh = loop {
            *counter += 1;
            let name = format!("{v}_{counter}");
            if !taken.contains(&name) {
                break name;
            }
        };
        taken.insert(fresh.clone());
        sub.bind(v.clone(), Term::Var(fresh));
    }
    sub.apply_rule(rule)
}

fn unfold_rule(
    rule: Rule,
    defs: &BTreeMap<&str, Vec<&Rule>>,
    counter: &mut usize,
    out: &mut Vec<Rule>,
) {
    let target = rule.body.iter().position(|a| {
        a.as_rel()
            .is_some_and(|r| defs.contains_key(r.predicate.as_str()))
    });
    let Some(i) = target else {
        if !out.contains(&rule) {
            out.push(rule);
        }
        return;
    };
    let Atom::Rel(atom) = &rule.body[i] else {
        unreachable!()
    };
    let avoid: BTreeSet<String> = rule.variables().into_iter().collect();
    for def in &defs[atom.predicate.as_str()] {
        let view = rename_apart(def, &avoid, counter);
        let mut sub = Substitution::new();
        let unifiable = view
            .head
            .terms
            .iter()
            .zip(&atom.terms)
            .all(|(a, b)| sub.unify(a, b));
        if !unifiable || view.head.arity() != atom.arity() {
            continue;
        }
        let mut body: Vec<Atom> = rule.body[..i].to_vec();
        body.extend(view.body.iter().cloned());
        body.extend(rule.body[i + 1..].iter().cloned());
        let next = sub.apply_rule(&Rule::new(rule.head.clone(), body));
        unfold_rule(next, defs, counter, out);
    }
}

/// Unfolds every view predicate in the query until its body mentions only
/// predicates of `base` or external predicates.
///
/// Definitions come from `views` and from the query's own non-answer rules.
/// A remaining body predicate outside `base` raises
/// [`Error::MissingViewDefinition`].
pub fn unfold_into(query: &Query, views: &[Rule], base: &BTreeSet<String>) -> Result<Query> {
    let mut defs: BTreeMap<&str, Vec<&Rule>> = BTreeMap::new();
    let own = query
        .program
        .rules
        .iter()
        .filter(|r| r.head.predicate != query.answer);
    for rule in views.iter().chain(own) {
        defs.entry(rule.head.predicate.as_str()).or_default().push(rule);
    }
    let mut counter = 0;
    let mut out = Vec::new();
    for rule in query.answer_rules() {
        unfold_rule(rule.clone(), &defs, &mut counter, &mut out);
    }
    for rule in &out {
        for atom in rule.rel_atoms() {
            if !atom.is_external() && !base.contains(&atom.predicate) {
                return Err(Error::MissingViewDefinition(atom.predicate.clone()));
            }
        }
    }
    Query::new(query.answer.clone(), Program::new(out)?)
}

/// Unfolds `views` into `query`; the base is every predicate used but not
/// defined by the query or the views.
pub fn unfold(query: &Query, views: &[Rule]) -> Result<Query> {
    let defined: BTreeSet<&str> = views
        .iter()
        .chain(&query.program.rules)
        .map(|r| r.head.predicate.as_str())
        .collect();
    let base: BTreeSet<String> = views
        .iter()
        .chain(&query.program.rules)
        .flat_map(Rule::rel_atoms)
        .map(|a| a.predicate.as_str())
        .filter(|p| !defined.contains(p))
        .map(str::to_string)
        .collect();
    unfold_into(query, views, &base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::{evaluate, parse_query, parse_rules};
    use crate::relmodel::{Instance, Tuple, Value};

    #[test]
    fn unfolds_quality_view_with_original_names() {
        let q = parse_query("Ans(p, v) :- TempNoon'_P(p, v, t, d), d = Sep/5.").unwrap();
        let views = parse_rules(
            "TempNoon'_P(p, v, t, d) :- M(p, v, t, d, i), 11:30 <= t, t <= 12:30, Valid(v), Oral(p, d, t), Certified(p, d, t).",
        )
        .unwrap();
        let u = unfold(&q, &views).unwrap();
        assert_eq!(u.program.rules.len(), 1);
        assert_eq!(
            u.program.rules[0].to_string(),
            "Ans(p, v) :- M(p, v, t, d, i), 11:30 <= t, t <= 12:30, Valid(v), Oral(p, d, t), Certified(p, d, t), d = Sep/5."
        );
    }

    #[test]
    fn empty_views_leave_query_unchanged() {
        let q = parse_query("Ans(p) :- R(p, x).").unwrap();
        assert_eq!(unfold(&q, &[]).unwrap(), q);
    }

    #[test]
    fn two_definitions_give_a_union() {
        let q = parse_query("Ans(x) :- V(x, y), E(y).").unwrap();
        let views = parse_rules("V(a, b) :- A(a, b). V(a, b) :- B(b, a).").unwrap();
        let u = unfold(&q, &views).unwrap();
        let text: Vec<String> = u.program.rules.iter().map(|r| r.to_string()).collect();
        assert_eq!(text, vec!["Ans(x) :- A(x, y), E(y).", "Ans(x) :- B(y, x), E(y)."]);
    }

    #[test]
    fn capture_is_avoided() {
        let q = parse_query("Ans(x, y) :- V(x), W(y).").unwrap();
        let views = parse_rules("V(a) :- E(a, y).").unwrap();
        let u = unfold(&q, &views).unwrap();
        assert_eq!(u.program.rules[0].to_string(), "Ans(x, y) :- E(x, y_1), W(y).");
    }

    #[test]
    fn constant_clash_drops_combination() {
        let q = parse_query("Ans(x) :- V(x, 1).").unwrap();
        let views = parse_rules("V(a, 2) :- E(a). V(a, b) :- F(a, b).").unwrap();
        let u = unfold(&q, &views).unwrap();
        let text: Vec<String> = u.program.rules.iter().map(|r| r.to_string()).collect();
        assert_eq!(text, vec!["Ans(x) :- F(x, 1)."]);
    }

    #[test]
    fn view_head_constant_propagates() {
        let q = parse_query("Ans(x, z) :- V(x, z).").unwrap();
        let views = parse_rules("V(a, \"k\") :- E(a).").unwrap();
        let u = unfold(&q, &views).unwrap();
        assert_eq!(u.program.rules[0].to_string(), "Ans(x, \"k\") :- E(x).");
    }

    #[test]
    fn nested_views_unfold_fully() {
        let q = parse_query("Ans(x) :- A(x).").unwrap();
        let views = parse_rules("A(x) :- B(x, y), C(y). B(u, v) :- E(u, v). C(w) :- F(w).").unwrap();
        let u = unfold(&q, &views).unwrap();
        assert_eq!(u.program.rules[0].to_string(), "Ans(x) :- E(x, y), F(y).");
    }

    #[test]
    fn missing_definition_against_base() {
        let q = parse_query("Ans(x) :- V(x).").unwrap();
        let base = BTreeSet::from(["E".to_string()]);
        let err = unfold_into(&q, &parse_rules("W(x) :- E(x).").unwrap(), &base).unwrap_err();
        assert!(matches!(err, Error::MissingViewDefinition(p) if p == "V"));
    }

    #[test]
    fn unfolding_preserves_answers_on_example() {
        let q = parse_query("Ans(x) :- V(x, y), y != 2.").unwrap();
        let views = parse_rules("V(a, b) :- E(a, b). V(a, a) :- F(a).").unwrap();
        let mut edb = Instance::new();
        for (a, b) in [(1, 2), (1, 3), (2, 2)] {
            edb.insert("E", Tuple::new(vec![Value::num(&a.to_string()), Value::num(&b.to_string())]));
        }
        edb.insert("F", Tuple::new(vec![Value::num("2")]));
        edb.insert("F", Tuple::new(vec![Value::num("5")]));
        let mut all = q.program.rules.clone();
        all.extend(views.clone());
        let direct = evaluate(&Program::new(all).unwrap(), &edb).unwrap();
        let unfolded = evaluate(&unfold(&q, &views).unwrap().program, &edb).unwrap();
        assert_eq!(direct.tuples("Ans"), unfolded.tuples("Ans"));
        assert_eq!(direct.relation_len("Ans"), 2);
    }
}
