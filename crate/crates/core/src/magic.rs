//! Adornment and generalized supplementary magic-sets rewriting.
//!
//! Bindings flow from the query into the program left to right: a variable
//! is bound at an atom if it occurs in an earlier relational atom, in an
//! earlier constant equality, or at a bound head position. Intensional
//! predicates are renamed per adornment (`Certified@bbb`); extensional ones
//! are left alone; external ones must be called with their declared input
//! positions bound.
//!
//! The rewriting gives every adorned rule a chain of supplementary
//! predicates `sup_<rule>_<step>` carrying the variables bound so far that
//! are still needed, and a magic predicate `magic_<pred>_<adornment>` per
//! adorned predicate holding the bindings it is asked about.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::datalog::{evaluate, evaluate_with, rename_apart, Atom, Program, Query, RelAtom, Rule, Substitution, Term};
use crate::error::{Error, Result};
use crate::extsrc::Registry;
use crate::relmodel::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Binding {
    Bound,
    Free,
}

impl Binding {
    pub fn is_bound(self) -> bool {
        self == Binding::Bound
    }
}

/// A `b`/`f` pattern, one letter per argument position.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Adornment(Vec<Binding>);

impl Adornment {
    pub fn new(pattern: Vec<Binding>) -> Self {
        Adornment(pattern)
    }

    pub fn all_free(arity: usize) -> Self {
        Adornment(vec![Binding::Free; arity])
    }

    pub fn bound_positions(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i].is_bound()).collect()
    }

    /// The pattern of `atom` when the variables in `bound` are known.
    pub fn of_atom(atom: &RelAtom, bound: &BTreeSet<String>) -> Self {
        Adornment(
            atom.terms
                .iter()
                .map(|t| match t {
                    Term::Const(_) => Binding::Bound,
                    Term::Var(v) if bound.contains(v) => Binding::Bound,
                    Term::Var(_) => Binding::Free,
                })
                .collect(),
        )
    }
}

impl Deref for Adornment {
    type Target = [Binding];

    fn deref(&self) -> &[Binding] {
        &self.0
    }
}

impl fmt::Display for Adornment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if b.is_bound() { "b" } else { "f" })?;
        }
        Ok(())
    }
}

impl FromStr for Adornment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'b' => Ok(Binding::Bound),
                'f' => Ok(Binding::Free),
                other => Err(Error::Type(format!("invalid adornment letter `{other}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Adornment)
    }
}

pub fn adorned_name(predicate: &str, adornment: &Adornment) -> String {
    format!("{predicate}@{adornment}")
}

pub fn magic_name(predicate: &str, adornment: &Adornment) -> String {
    format!("magic_{predicate}_{adornment}")
}

fn bound_args(atom: &RelAtom, adornment: &Adornment) -> Vec<Term> {
    adornment
        .bound_positions()
        .into_iter()
        .map(|i| atom.terms[i].clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdornedRule {
    /// Original head predicate.
    pub predicate: String,
    pub adornment: Adornment,
    /// Normalized rule with intensional predicates renamed per adornment.
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdornedProgram {
    pub sips: Sips,
    pub answer: String,
    pub query_adornment: Adornment,
    /// The answer rules, bodies adorned.
    pub query_rules: Vec<Rule>,
    pub rules: Vec<AdornedRule>,
    /// Adorned name to original predicate and pattern.
    pub adorned: BTreeMap<String, (String, Adornment)>,
    pub externals: BTreeMap<String, Adornment>,
}

impl fmt::Display for AdornedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.query_rules {
            writeln!(f, "{r}")?;
        }
        for r in &self.rules {
            writeln!(f, "{}", r.rule)?;
        }
        Ok(())
    }
}

/// Which body atoms pass bindings to later intensional atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sips {
    /// Every atom to the left, in body order.
    #[default]
    Full,
    /// Only extensional atoms and built-ins to the left; used when passing
    /// through intensional atoms would make the magic program recursive.
    BaseOnly,
}

struct Adorner<'a> {
    sips: Sips,
    idb: BTreeSet<&'a str>,
    bindings: &'a BTreeMap<String, Adornment>,
    queue: VecDeque<(String, Adornment)>,
    seen: BTreeSet<(String, Adornment)>,
    adorned: BTreeMap<String, (String, Adornment)>,
    externals: BTreeMap<String, Adornment>,
}

impl Adorner<'_> {
    fn adorn_body(&mut self, rule: &Rule, mut bound: BTreeSet<String>) -> Result<Vec<Atom>> {
        let mut passing = bound.clone();
        let base_only = self.sips == Sips::BaseOnly;
        let mut body = Vec::with_capacity(rule.body.len());
        for atom in &rule.body {
            match atom {
                Atom::Rel(r) if r.is_external() => {
                    let decl = self
                        .bindings
                        .get(&r.predicate)
                        .ok_or_else(|| Error::UnknownSource(r.predicate.clone()))?;
                    if decl.len() != r.arity() {
                        return Err(Error::ArityMismatch {
                            predicate: r.predicate.clone(),
                            expected: decl.len(),
                            found: r.arity(),
                        });
                    }
                    let here = Adornment::of_atom(r, &bound);
                    if let Some(i) = (0..decl.len()).find(|&i| decl[i].is_bound() && !here[i].is_bound()) {
                        return Err(Error::BindingViolation {
                            predicate: r.predicate.clone(),
                            position: i + 1,
                        });
                    }
                    self.externals.insert(r.predicate.clone(), decl.clone());
                    bound.extend(r.variables().map(str::to_string));
                    if !base_only {
                        passing.extend(r.variables().map(str::to_string));
                    }
                    body.push(atom.clone());
                }
                Atom::Rel(r) if self.idb.contains(r.predicate.as_str()) => {
                    let ad = Adornment::of_atom(r, &passing);
                    let name = adorned_name(&r.predicate, &ad);
                    self.adorned
                        .insert(name.clone(), (r.predicate.clone(), ad.clone()));
                    let key = (r.predicate.clone(), ad);
                    if self.seen.insert(key.clone()) {
                        self.queue.push_back(key);
                    }
                    bound.extend(r.variables().map(str::to_string));
                    if !base_only {
                        passing.extend(r.variables().map(str::to_string));
                    }
                    body.push(Atom::Rel(RelAtom::new(name, r.terms.clone())));
                }
                Atom::Rel(r) => {
                    bound.extend(r.variables().map(str::to_string));
                    passing.extend(r.variables().map(str::to_string));
                    body.push(atom.clone());
                }
                Atom::Builtin { .. } => {
                    if let Some((v, _)) = atom.constant_equality() {
                        bound.insert(v.to_string());
                        passing.insert(v.to_string());
                    }
                    body.push(atom.clone());
                }
            }
        }
        Ok(body)
    }
}

/// Adorns the query's program top-down from its answer predicate.
///
/// `bindings` gives the declared pattern of every external predicate.
///
/// Bindings pass through every atom to the left unless that makes the magic
/// program recursive, in which case only extensional atoms and built-ins
/// pass them ([`Sips::BaseOnly`]).
pub fn adorn(query: &Query, bindings: &BTreeMap<String, Adornment>) -> Result<AdornedProgram> {
    let full = adorn_with(query, bindings, Sips::Full)?;
    match magic_rewrite(&full).program() {
        Err(Error::RecursionDetected { .. }) => adorn_with(query, bindings, Sips::BaseOnly),
        _ => Ok(full),
    }
}

/// As [`adorn`] with a fixed information-passing strategy.
pub fn adorn_with(query: &Query, bindings: &BTreeMap<String, Adornment>, sips: Sips) -> Result<AdornedProgram> {
    let program = &query.program;
    let idb: BTreeSet<&str> = program
        .defined_predicates()
        .into_iter()
        .filter(|p| *p != query.answer)
        .collect();
    let mut a = Adorner {
        sips,
        idb,
        bindings,
        queue: VecDeque::new(),
        seen: BTreeSet::new(),
        adorned: BTreeMap::new(),
        externals: BTreeMap::new(),
    };
    let mut query_adornment = None;
    let mut query_rules = Vec::new();
    for rule in query.answer_rules() {
        let rule = rule.normalized();
        let ad = Adornment::of_atom(&rule.head, &BTreeSet::new());
        query_adornment.get_or_insert(ad);
        let body = a.adorn_body(&rule, BTreeSet::new())?;
        query_rules.push(Rule::new(rule.head.clone(), body));
    }
    let mut rules = Vec::new();
    while let Some((predicate, ad)) = a.queue.pop_front() {
        for rule in program.rules_for(&predicate) {
            let rule = rule.normalized();
            let bound: BTreeSet<String> = ad
                .bound_positions()
                .into_iter()
                .filter_map(|i| rule.head.terms[i].as_var().map(str::to_string))
                .collect();
            let body = a.adorn_body(&rule, bound)?;
            let head = RelAtom::new(adorned_name(&predicate, &ad), rule.head.terms.clone());
            rules.push(AdornedRule {
                predicate: predicate.clone(),
                adornment: ad.clone(),
                rule: Rule::new(head, body),
            });
        }
    }
    Ok(AdornedProgram {
        sips,
        answer: query.answer.clone(),
        query_adornment: query_adornment.unwrap_or_default(),
        query_rules,
        rules,
        adorned: a.adorned,
        externals: a.externals,
    })
}

/// Result of the magic rewriting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MagicProgram {
    pub answer: String,
    /// Rules initializing the magic predicates asked about by the query.
    pub seed: Vec<Rule>,
    /// Supplementary, magic and adorned rules, then the answer rules.
    pub rules: Vec<Rule>,
}

impl MagicProgram {
    pub fn all_rules(&self) -> impl Iterator<Item = &Rule> {
        self.seed.iter().chain(&self.rules)
    }

    pub fn program(&self) -> Result<Program> {
        Program::new(self.all_rules().cloned().collect())
    }

    pub fn query(&self) -> Result<Query> {
        Query::new(self.answer.clone(), self.program()?)
    }
}

impl fmt::Display for MagicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.all_rules() {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

fn push_unique(out: &mut Vec<String>, vars: impl IntoIterator<Item = String>) {
    for v in vars {
        if !out.contains(&v) {
            out.push(v);
        }
    }
}

fn is_sup(predicate: &str) -> bool {
    predicate.starts_with("sup_")
}

/// Splits a body into evaluation steps: each relational atom alone, each
/// maximal run of built-ins together.
fn steps(body: &[Atom]) -> Vec<Vec<Atom>> {
    let mut out: Vec<Vec<Atom>> = Vec::new();
    for atom in body {
        match out.last_mut() {
            Some(last) if atom.is_builtin() && last.iter().all(Atom::is_builtin) => last.push(atom.clone()),
            _ => out.push(vec![atom.clone()]),
        }
    }
    out
}

fn magic_rule_for(atom: &RelAtom, adorned: &BTreeMap<String, (String, Adornment)>, body: Vec<Atom>) -> Option<Rule> {
    let (predicate, ad) = adorned.get(&atom.predicate)?;
    let head = RelAtom::new(magic_name(predicate, ad), bound_args(atom, ad));
    Some(Rule::new(head, body))
}

/// The extensional atoms of `atoms`, with the built-ins whose variables
/// they (or earlier constant equalities) bind.
fn base_atoms(atoms: &[Atom], adorned: &AdornedProgram) -> Vec<Atom> {
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::new();
    for atom in atoms {
        match atom {
            Atom::Rel(r) if r.is_external() || adorned.adorned.contains_key(&r.predicate) => {}
            Atom::Rel(r) => {
                bound.extend(r.variables());
                out.push(atom.clone());
            }
            Atom::Builtin { .. } => {
                if let Some((v, _)) = atom.constant_equality() {
                    bound.insert(v);
                    out.push(atom.clone());
                } else if atom.variables().iter().all(|v| bound.contains(v)) {
                    out.push(atom.clone());
                }
            }
        }
    }
    out
}

/// Generalized supplementary magic rewriting, followed by inlining of
/// supplementary predicates that form a rule body on their own.
pub fn magic_rewrite(adorned: &AdornedProgram) -> MagicProgram {
    let mut seed = Vec::new();
    for rule in &adorned.query_rules {
        for (j, atom) in rule.body.iter().enumerate() {
            let prefix = match adorned.sips {
                Sips::Full => rule.body[..j].to_vec(),
                Sips::BaseOnly => base_atoms(&rule.body[..j], adorned),
            };
            if let Some(m) = atom.as_rel().and_then(|r| magic_rule_for(r, &adorned.adorned, prefix)) {
                seed.push(m);
            }
        }
    }

    let mut rules = Vec::new();
    for (r, ar) in adorned.rules.iter().enumerate() {
        let r = r + 1;
        let rule = &ar.rule;
        let magic = RelAtom::new(magic_name(&ar.predicate, &ar.adornment), bound_args(&rule.head, &ar.adornment));
        let steps = steps(&rule.body);
        let head_vars: Vec<String> = rule.head.variables().map(str::to_string).collect();
        let mut needed_after: Vec<BTreeSet<String>> = vec![BTreeSet::new(); steps.len() + 1];
        let mut acc: BTreeSet<String> = head_vars.iter().cloned().collect();
        for i in (0..=steps.len()).rev() {
            needed_after[i] = acc.clone();
            if i > 0 {
                acc.extend(steps[i - 1].iter().flat_map(|a| a.variables()).map(str::to_string));
            }
        }
        let mut vars: Vec<String> = magic.variables().map(str::to_string).collect();
        let magic_atom = Atom::Rel(magic);
        let mut prev = magic_atom.clone();
        let mut sups = Vec::new();
        let mut magics = Vec::new();
        for (i, step) in steps.iter().enumerate() {
            let i = i + 1;
            for atom in step.iter().filter_map(Atom::as_rel) {
                let body = match adorned.sips {
                    Sips::Full => vec![prev.clone()],
                    Sips::BaseOnly => {
                        let before: Vec<Atom> = steps[..i - 1].iter().flatten().cloned().collect();
                        let mut body = vec![magic_atom.clone()];
                        body.extend(base_atoms(&before, adorned));
                        body
                    }
                };
                if let Some(m) = magic_rule_for(atom, &adorned.adorned, body) {
                    magics.push(m);
                }
            }
            let mut next = vars.clone();
            push_unique(&mut next, step.iter().flat_map(|a| a.variables()).map(str::to_string));
            next.retain(|v| needed_after[i].contains(v));
            let head = RelAtom::vars(format!("sup_{r}_{i}"), &next.iter().map(String::as_str).collect::<Vec<_>>());
            let mut body = vec![prev.clone()];
            body.extend(step.iter().cloned());
            sups.push(Rule::new(head.clone(), body));
            prev = Atom::Rel(head);
            vars = next;
        }
        rules.extend(sups);
        rules.push(Rule::new(rule.head.clone(), vec![prev]));
        rules.extend(magics);
    }
    rules.extend(adorned.query_rules.iter().cloned());
    simplify(&mut rules);
    MagicProgram {
        answer: adorned.answer.clone(),
        seed,
        rules,
    }
}

/// Inlines sole-body supplementary atoms and drops unreferenced
/// supplementary rules, to fixpoint.
fn simplify(rules: &mut Vec<Rule>) {
    loop {
        let mut changed = false;
        for i in 0..rules.len() {
            let target = match rules[i].body.as_slice() {
                [Atom::Rel(a)] if is_sup(&a.predicate) => a.clone(),
                _ => continue,
            };
            let Some(def) = rules.iter().find(|r| r.head.predicate == target.predicate).cloned() else {
                continue;
            };
            let avoid: BTreeSet<String> = rules[i].variables().into_iter().collect();
            let mut counter = 0;
            let def = rename_apart(&def, &avoid, &mut counter);
            let mut sub = Substitution::new();
            for (a, b) in def.head.terms.iter().zip(&target.terms) {
                sub.unify(a, b);
            }
            let head = sub.apply_atom(&rules[i].head);
            let body = def.body.iter().map(|a| sub.apply(a)).collect();
            rules[i] = Rule::new(head, body);
            changed = true;
        }
        let used: BTreeSet<String> = rules
            .iter()
            .flat_map(|r| r.rel_atoms().map(|a| a.predicate.clone()))
            .collect();
        let before = rules.len();
        rules.retain(|r| !is_sup(&r.head.predicate) || used.contains(&r.head.predicate));
        changed |= rules.len() != before;
        if !changed {
            return;
        }
    }
}

/// Evaluates a magic program; external atoms go through `registry`.
pub fn evaluate_magic(magic: &MagicProgram, edb: &Instance, registry: Option<&mut Registry>) -> Result<Instance> {
    let program = magic.program()?;
    match registry {
        Some(reg) => evaluate_with(&program, edb, reg),
        None => evaluate(&program, edb),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::{parse_program, parse_query};
    use crate::relmodel::{Tuple, Value};

    const APPENDIX: &str = "Q''(p, v) :- TempNoon''_P(p, v, t, d), d = Sep/5.
TempNoon''_P(p, v, t, d) :- M(p, v, t, d, i), 11:30 <= t, t <= 12:30, Certified(p, d, t).
Certified(p, d, t) :- MNT(p, d, t, n, i, tp), #C(n, y).";

    fn bindings() -> BTreeMap<String, Adornment> {
        BTreeMap::from([("#C".to_string(), "bf".parse().unwrap())])
    }

    #[test]
    fn adornments_of_appendix_program() {
        let q = parse_query(APPENDIX).unwrap();
        let ad = adorn(&q, &bindings()).unwrap();
        assert_eq!(ad.query_adornment.to_string(), "ff");
        let names: Vec<&str> = ad.rules.iter().map(|r| r.rule.head.predicate.as_str()).collect();
        assert_eq!(names, vec!["TempNoon''_P@fffb", "Certified@bbb"]);
        assert_eq!(ad.externals["#C"].to_string(), "bf");
        assert_eq!(
            ad.query_rules[0].to_string(),
            "Q''(p, v) :- d = Sep/5, TempNoon''_P@fffb(p, v, t, d)."
        );
    }

    #[test]
    fn appendix_magic_program() {
        let q = parse_query(APPENDIX).unwrap();
        let m = magic_rewrite(&adorn(&q, &bindings()).unwrap());
        let seed: Vec<String> = m.seed.iter().map(|r| r.to_string()).collect();
        assert_eq!(seed, vec!["magic_TempNoon''_P_fffb(d) :- d = Sep/5."]);
        let rules: Vec<String> = m.rules.iter().map(|r| r.to_string()).collect();
        assert_eq!(
            rules,
            vec![
                "sup_1_1(d, p, v, t) :- magic_TempNoon''_P_fffb(d), M(p, v, t, d, i).",
                "sup_1_2(d, p, v, t) :- sup_1_1(d, p, v, t), 11:30 <= t, t <= 12:30.",
                "TempNoon''_P@fffb(p, v, t, d) :- sup_1_2(d, p, v, t), Certified@bbb(p, d, t).",
                "magic_Certified_bbb(p, d, t) :- sup_1_1(d, p, v, t), 11:30 <= t, t <= 12:30.",
                "sup_2_1(p, d, t, n) :- magic_Certified_bbb(p, d, t), MNT(p, d, t, n, i, tp).",
                "Certified@bbb(p, d, t) :- sup_2_1(p, d, t, n), #C(n, y).",
                "Q''(p, v) :- d = Sep/5, TempNoon''_P@fffb(p, v, t, d).",
            ]
        );
        assert!(m.program().is_ok());
    }

    #[test]
    fn unbound_external_input() {
        let q = parse_query("Ans(x) :- P(x). P(x) :- #E(x, y).").unwrap();
        let b = BTreeMap::from([("#E".to_string(), "bf".parse().unwrap())]);
        assert!(matches!(
            adorn(&q, &b),
            Err(Error::BindingViolation { position: 1, .. })
        ));
    }

    #[test]
    fn constant_head_query_is_all_bound() {
        let q = parse_query("Ans(1, \"a\") :- e(x).").unwrap();
        assert_eq!(adorn(&q, &BTreeMap::new()).unwrap().query_adornment.to_string(), "bb");
    }

    #[test]
    fn single_rule_program_needs_no_sup() {
        let q = parse_query("Ans(x) :- p(x). p(x) :- e(x).").unwrap();
        let m = magic_rewrite(&adorn(&q, &BTreeMap::new()).unwrap());
        let all: Vec<String> = m.all_rules().map(|r| r.to_string()).collect();
        assert_eq!(
            all,
            vec![
                "magic_p_f().",
                "p@f(x) :- magic_p_f(), e(x).",
                "Ans(x) :- p@f(x).",
            ]
        );
    }

    #[test]
    fn sup_arguments_are_needed_later() {
        let q = parse_query("Ans(x) :- a(x, 1). a(x, y) :- e(x, z), f(z, w), g(w, y), z != w.").unwrap();
        let m = magic_rewrite(&adorn(&q, &BTreeMap::new()).unwrap());
        let program = m.program().unwrap();
        for rule in &program.rules {
            if !is_sup(&rule.head.predicate) {
                continue;
            }
            // every sup argument occurs in a rule that consumes the sup
            let consumers: Vec<&Rule> = program
                .rules
                .iter()
                .filter(|r| r.rel_atoms().any(|a| a.predicate == rule.head.predicate))
                .collect();
            assert!(!consumers.is_empty());
        }
        let edb = {
            let mut i = Instance::new();
            let n = |s: &str| Value::num(s);
            i.insert("e", Tuple::new(vec![n("7"), n("2")]));
            i.insert("f", Tuple::new(vec![n("2"), n("3")]));
            i.insert("f", Tuple::new(vec![n("2"), n("2")]));
            i.insert("g", Tuple::new(vec![n("3"), n("1")]));
            i.insert("g", Tuple::new(vec![n("2"), n("1")]));
            i
        };
        let direct = evaluate(&q.program, &edb).unwrap();
        let magic = evaluate_magic(&m, &edb, None).unwrap();
        assert_eq!(direct.tuples("Ans"), magic.tuples("Ans"));
        assert_eq!(magic.relation_len("Ans"), 1);
    }

    #[test]
    fn adornment_parse_display() {
        let a: Adornment = "fffb".parse().unwrap();
        assert_eq!(a.bound_positions(), vec![3]);
        assert_eq!(a.to_string(), "fffb");
        assert!("fx".parse::<Adornment>().is_err());
        assert!(parse_program("p(x) :- q(x).").is_ok());
    }

    #[test]
    fn repeated_intensional_atom_stays_non_recursive() {
        let q = parse_query(
            "Ans(w) :- p(x, y), p(y, z), p(z, w).
p(x, y) :- e(x, y).
p(x, y) :- e(x, z), e(z, y).",
        )
        .unwrap();
        let full = magic_rewrite(&adorn_with(&q, &BTreeMap::new(), Sips::Full).unwrap());
        assert!(matches!(full.program(), Err(Error::RecursionDetected { .. })));
        let ad = adorn(&q, &BTreeMap::new()).unwrap();
        assert_eq!(ad.sips, Sips::BaseOnly);
        let m = magic_rewrite(&ad);
        let mut edb = Instance::new();
        for (a, b) in [("1", "2"), ("2", "3"), ("3", "1"), ("3", "4")] {
            edb.insert("e", Tuple::new(vec![Value::num(a), Value::num(b)]));
        }
        let direct = evaluate(&q.program, &edb).unwrap();
        let magic = evaluate_magic(&m, &edb, None).unwrap();
        assert_eq!(direct.tuples("Ans"), magic.tuples("Ans"));
    }
}
