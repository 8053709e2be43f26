//! Non-recursive Datalog with comparison built-ins.
//!
//! Programs are parsed from a small rule language, checked for safety,
//! recursion and arity, and evaluated bottom-up over an [`Instance`].
//! Mappings, views, queries and rewritten programs all share this
//! representation.

mod eval;
mod parse;
mod unfold;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::relmodel::Value;

pub use eval::{evaluate, evaluate_naive, evaluate_with};
pub(crate) use parse::{Tok, TokenStream};
pub use parse::{parse_atom, parse_program, parse_query, parse_rules};
pub use unfold::{rename_apart, unfold, unfold_into, Substitution};

/// A rule term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    /// Applies the operator. Null never satisfies a comparison, and the
    /// ordering operators hold only between two numbers or two times.
    pub fn holds(self, left: &Value, right: &Value) -> bool {
        use std::cmp::Ordering::*;
        if left.is_null() || right.is_null() {
            return false;
        }
        match self {
            CmpOp::Eq => left == right,
            CmpOp::Ne => left != right,
            _ => match left.compare(right) {
                None => false,
                Some(o) => match self {
                    CmpOp::Lt => o == Less,
                    CmpOp::Le => o != Greater,
                    CmpOp::Gt => o == Greater,
                    CmpOp::Ge => o != Less,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                },
            },
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

/// A relational atom `pred(t1, ..., tn)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelAtom {
    pub predicate: String,
    pub terms: Vec<Term>,
}

impl RelAtom {
    pub fn new(predicate: impl Into<String>, terms: Vec<Term>) -> Self {
        RelAtom {
            predicate: predicate.into(),
            terms,
        }
    }

    /// An atom whose arguments are all variables.
    pub fn vars(predicate: impl Into<String>, vars: &[&str]) -> Self {
        Self::new(predicate, vars.iter().map(|v| Term::var(*v)).collect())
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }

    pub fn is_external(&self) -> bool {
        is_external_name(&self.predicate)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for RelAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// External predicates are written with a leading `#`.
pub fn is_external_name(predicate: &str) -> bool {
    predicate.starts_with('#')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Rel(RelAtom),
    Builtin { op: CmpOp, left: Term, right: Term },
}

impl Atom {
    pub fn rel(predicate: impl Into<String>, terms: Vec<Term>) -> Self {
        Atom::Rel(RelAtom::new(predicate, terms))
    }

    pub fn builtin(op: CmpOp, left: Term, right: Term) -> Self {
        Atom::Builtin { op, left, right }
    }

    pub fn as_rel(&self) -> Option<&RelAtom> {
        match self {
            Atom::Rel(r) => Some(r),
            Atom::Builtin { .. } => None,
        }
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self, Atom::Builtin { .. })
    }

    pub fn variables(&self) -> Vec<&str> {
        match self {
            Atom::Rel(r) => r.variables().collect(),
            Atom::Builtin { left, right, .. } => {
                [left, right].into_iter().filter_map(Term::as_var).collect()
            }
        }
    }

    /// `x = c` or `c = x`: the variable and the constant.
    pub fn constant_equality(&self) -> Option<(&str, &Value)> {
        match self {
            Atom::Builtin {
                op: CmpOp::Eq,
                left: Term::Var(v),
                right: Term::Const(c),
            }
            | Atom::Builtin {
                op: CmpOp::Eq,
                left: Term::Const(c),
                right: Term::Var(v),
            } => Some((v, c)),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Rel(r) => write!(f, "{r}"),
            Atom::Builtin { op, left, right } => write!(f, "{left} {op} {right}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub head: RelAtom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn new(head: RelAtom, body: Vec<Atom>) -> Self {
        Rule { head, body }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn rel_atoms(&self) -> impl Iterator<Item = &RelAtom> {
        self.body.iter().filter_map(Atom::as_rel)
    }

    /// All variables, in order of first appearance (head first).
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let head = self.head.variables();
        let body = self.body.iter().flat_map(Atom::variables);
        for v in head.chain(body) {
            if seen.insert(v) {
                out.push(v.to_string());
            }
        }
        out
    }

    /// Variables a left-to-right evaluation can bind: those of relational
    /// atoms, closed under `x = c` and `x = y` with `y` bound.
    pub fn bindable_variables(&self) -> BTreeSet<&str> {
        let mut bound: BTreeSet<&str> = self.rel_atoms().flat_map(RelAtom::variables).collect();
        loop {
            let before = bound.len();
            for atom in &self.body {
                if let Atom::Builtin {
                    op: CmpOp::Eq,
                    left,
                    right,
                } = atom
                {
                    match (left, right) {
                        (Term::Var(x), Term::Const(_)) | (Term::Const(_), Term::Var(x)) => {
                            bound.insert(x);
                        }
                        (Term::Var(x), Term::Var(y)) => {
                            if bound.contains(x.as_str()) {
                                bound.insert(y);
                            } else if bound.contains(y.as_str()) {
                                bound.insert(x);
                            }
                        }
                        _ => {}
                    }
                }
            }
            if bound.len() == before {
                return bound;
            }
        }
    }

    /// Safety: every variable of the head and of every built-in is bindable.
    pub fn check_safety(&self) -> Result<()> {
        let bound = self.bindable_variables();
        let builtin_vars = self
            .body
            .iter()
            .filter(|a| a.is_builtin())
            .flat_map(Atom::variables);
        for v in self.head.variables().chain(builtin_vars) {
            if !bound.contains(v) {
                return Err(Error::SafetyViolation {
                    predicate: self.head.predicate.clone(),
                    variable: v.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Ordering built-ins over text constants are type errors.
    pub fn check_builtin_types(&self) -> Result<()> {
        for atom in &self.body {
            if let Atom::Builtin { op, left, right } = atom {
                if !op.is_ordering() {
                    continue;
                }
                for t in [left, right] {
                    if let Term::Const(c @ (Value::Str(_) | Value::Date(_))) = t {
                        return Err(Error::Type(format!(
                            "`{atom}` in a rule for `{}` orders the non-orderable constant {c}",
                            self.head.predicate
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Body in evaluation order: constant equalities first, then the
    /// relational atoms in their written order, each remaining built-in
    /// placed right after the earliest point where it can be evaluated.
    /// Built-ins that never become evaluable go last.
    pub fn normalized(&self) -> Rule {
        let mut body = Vec::with_capacity(self.body.len());
        let mut pending = Vec::new();
        let mut bound: BTreeSet<String> = BTreeSet::new();
        for atom in &self.body {
            if let Some((v, _)) = atom.constant_equality() {
                bound.insert(v.to_string());
                body.push(atom.clone());
            } else if atom.is_builtin() {
                pending.push(atom.clone());
            }
        }
        flush_builtins(&mut body, &mut pending, &mut bound);
        for atom in &self.body {
            if let Atom::Rel(r) = atom {
                body.push(atom.clone());
                bound.extend(r.variables().map(str::to_string));
                flush_builtins(&mut body, &mut pending, &mut bound);
            }
        }
        body.extend(pending);
        Rule::new(self.head.clone(), body)
    }
}

/// Whether a built-in can run with `bound` variables, and the variable it
/// binds if it is an equality with exactly one unbound variable side.
pub(crate) fn builtin_readiness<'a>(
    atom: &'a Atom,
    bound: &BTreeSet<String>,
) -> Option<Option<&'a str>> {
    let Atom::Builtin { op, left, right } = atom else {
        return None;
    };
    let ready = |t: &Term| match t {
        Term::Const(_) => true,
        Term::Var(v) => bound.contains(v),
    };
    match (ready(left), ready(right)) {
        (true, true) => Some(None),
        (false, true) if *op == CmpOp::Eq => Some(left.as_var()),
        (true, false) if *op == CmpOp::Eq => Some(right.as_var()),
        _ => None,
    }
}

fn flush_builtins(body: &mut Vec<Atom>, pending: &mut Vec<Atom>, bound: &mut BTreeSet<String>) {
    loop {
        let Some(i) = pending
            .iter()
            .position(|a| builtin_readiness(a, bound).is_some())
        else {
            return;
        };
        let atom = pending.remove(i);
        if let Some(Some(v)) = builtin_readiness(&atom, bound) {
            bound.insert(v.to_string());
        }
        body.push(atom);
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        f.write_str(".")
    }
}

/// A checked, non-recursive rule set.
///
/// `edb` holds the predicates used in bodies without being defined by any
/// rule; `externals` the `#`-prefixed ones, which are resolved through an
/// external-source registry at evaluation time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub edb: BTreeSet<String>,
    pub externals: BTreeSet<String>,
}

impl Program {
    /// Builds and checks a program, inferring its extensional predicates.
    pub fn new(rules: Vec<Rule>) -> Result<Program> {
        let defined: BTreeSet<&str> = rules.iter().map(|r| r.head.predicate.as_str()).collect();
        let mut edb = BTreeSet::new();
        let mut externals = BTreeSet::new();
        for rule in &rules {
            if rule.head.is_external() {
                return Err(Error::Type(format!(
                    "external predicate `{}` cannot be defined by a rule",
                    rule.head.predicate
                )));
            }
            for atom in rule.rel_atoms() {
                if atom.is_external() {
                    externals.insert(atom.predicate.clone());
                } else if !defined.contains(atom.predicate.as_str()) {
                    edb.insert(atom.predicate.clone());
                }
            }
        }
        let program = Program {
            rules,
            edb,
            externals,
        };
        program.check()?;
        Ok(program)
    }

    /// Safety, built-in typing, arity consistency and non-recursion.
    pub fn check(&self) -> Result<()> {
        for rule in &self.rules {
            rule.check_safety()?;
            rule.check_builtin_types()?;
        }
        self.arities()?;
        if let Some(cycle) = self.find_cycle() {
            return Err(Error::RecursionDetected { cycle });
        }
        Ok(())
    }

    /// Arity of every predicate mentioned, checking consistency.
    pub fn arities(&self) -> Result<BTreeMap<String, usize>> {
        let mut arities = BTreeMap::new();
        let atoms = self
            .rules
            .iter()
            .flat_map(|r| std::iter::once(&r.head).chain(r.rel_atoms()));
        for atom in atoms {
            match arities.get(&atom.predicate) {
                Some(&n) if n != atom.arity() => {
                    return Err(Error::ArityMismatch {
                        predicate: atom.predicate.clone(),
                        expected: n,
                        found: atom.arity(),
                    })
                }
                Some(_) => {}
                None => {
                    arities.insert(atom.predicate.clone(), atom.arity());
                }
            }
        }
        Ok(arities)
    }

    pub fn defined_predicates(&self) -> BTreeSet<&str> {
        self.rules.iter().map(|r| r.head.predicate.as_str()).collect()
    }

    pub fn rules_for<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| r.head.predicate == predicate)
    }

    /// Head predicate to the predicates its rules use.
    pub fn dependencies(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for rule in &self.rules {
            let entry = deps.entry(rule.head.predicate.as_str()).or_default();
            entry.extend(rule.rel_atoms().map(|a| a.predicate.as_str()));
        }
        deps
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        let deps = self.dependencies();
        // 0 unvisited, 1 on stack, 2 done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        let mut stack: Vec<&str> = Vec::new();
        fn visit<'a>(
            p: &'a str,
            deps: &BTreeMap<&'a str, BTreeSet<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            match state.get(p).copied().unwrap_or(0) {
                1 => {
                    let start = stack.iter().position(|q| *q == p).unwrap_or(0);
                    let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(p.to_string());
                    return Some(cycle);
                }
                2 => return None,
                _ => {}
            }
            state.insert(p, 1);
            stack.push(p);
            if let Some(next) = deps.get(p) {
                for q in next {
                    if let Some(c) = visit(q, deps, state, stack) {
                        return Some(c);
                    }
                }
            }
            stack.pop();
            state.insert(p, 2);
            None
        }
        for p in deps.keys() {
            if let Some(c) = visit(p, &deps, &mut state, &mut stack) {
                return Some(c);
            }
        }
        None
    }

    /// Intensional predicates in dependency order (dependencies first).
    pub fn topological_order(&self) -> Vec<String> {
        let deps = self.dependencies();
        let mut done: BTreeSet<&str> = BTreeSet::new();
        let mut order = Vec::new();
        fn visit<'a>(
            p: &'a str,
            deps: &BTreeMap<&'a str, BTreeSet<&'a str>>,
            done: &mut BTreeSet<&'a str>,
            order: &mut Vec<String>,
        ) {
            if !deps.contains_key(p) || !done.insert(p) {
                return;
            }
            for q in &deps[p] {
                visit(q, deps, done, order);
            }
            order.push(p.to_string());
        }
        for rule in &self.rules {
            visit(&rule.head.predicate, &deps, &mut done, &mut order);
        }
        order
    }

    /// Predicates reachable from `root` through rule bodies, `root` included.
    pub fn reachable_from(&self, root: &str) -> BTreeSet<String> {
        let deps = self.dependencies();
        let mut seen = BTreeSet::new();
        let mut todo = vec![root];
        while let Some(p) = todo.pop() {
            if seen.insert(p.to_string()) {
                if let Some(next) = deps.get(p) {
                    todo.extend(next.iter().copied());
                }
            }
        }
        seen
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// A program with a distinguished answer predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub answer: String,
    pub program: Program,
}

impl Query {
    /// A query may have no answer rules at all (an unsatisfiable union).
    pub fn new(answer: impl Into<String>, program: Program) -> Result<Query> {
        let answer = answer.into();
        let used_in_body = program
            .rules
            .iter()
            .flat_map(Rule::rel_atoms)
            .any(|a| a.predicate == answer);
        if used_in_body {
            return Err(Error::Type(format!(
                "answer predicate `{answer}` must not occur in a rule body"
            )));
        }
        Ok(Query { answer, program })
    }

    /// The rules defining the answer predicate.
    pub fn answer_rules(&self) -> impl Iterator<Item = &Rule> {
        self.program.rules_for(&self.answer)
    }

    pub fn answer_arity(&self) -> usize {
        self.answer_rules().next().map_or(0, |r| r.head.arity())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.program)
    }
}
