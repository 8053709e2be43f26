//! Bottom-up evaluation.
//!
//! Each rule is compiled once into a left-to-right plan over variable
//! slots. Relational atoms are joined through hash indexes on their bound
//! positions; built-ins filter, or bind when they are an equality with one
//! unbound side; external atoms gather their distinct input tuples from the
//! rows computed so far and fetch outputs through the [`Registry`].
//!
//! Programs are non-recursive, so the predicates are evaluated stratum by
//! stratum in dependency order and every rule fires exactly once, over
//! complete input relations. [`evaluate_naive`] is the textbook fixpoint
//! iteration and serves as an oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Atom, CmpOp, Program, Rule, Term};
use crate::error::{Error, Result};
use crate::extsrc::Registry;
use crate::relmodel::{Instance, Tuple, Value};

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Value),
}

#[derive(Debug, Clone)]
enum Arg {
    /// Constant or variable bound before the atom.
    Key(Slot),
    /// First occurrence of a variable.
    Bind(usize),
    /// Repeated occurrence of a variable bound earlier in the same atom.
    Same(usize),
}

#[derive(Debug)]
enum Step {
    Scan {
        predicate: String,
        args: Vec<Arg>,
    },
    Filter {
        op: CmpOp,
        left: Slot,
        right: Slot,
    },
    Assign {
        var: usize,
        from: Slot,
    },
    External {
        predicate: String,
        inputs: Vec<Slot>,
        outputs: Vec<Arg>,
    },
}

#[derive(Debug)]
struct Plan {
    head_predicate: String,
    head: Vec<Slot>,
    nvars: usize,
    steps: Vec<Step>,
}

type Row = Vec<Value>;

fn compile(rule: &Rule, registry: Option<&Registry>) -> Result<Plan> {
    let rule = rule.normalized();
    let mut slots: BTreeMap<String, usize> = BTreeMap::new();
    for v in rule.variables() {
        let n = slots.len();
        slots.insert(v, n);
    }
    let mut bound = vec![false; slots.len()];
    let slot = |t: &Term| match t {
        Term::Var(v) => Slot::Var(slots[v]),
        Term::Const(c) => Slot::Const(c.clone()),
    };
    let is_ready = |s: &Slot, bound: &[bool]| match s {
        Slot::Const(_) => true,
        Slot::Var(i) => bound[*i],
    };
    let atom_args = |terms: &[Term], bound: &mut Vec<bool>| -> Vec<Arg> {
        let mut args = Vec::with_capacity(terms.len());
        let mut local = Vec::new();
        for t in terms {
            let s = slot(t);
            args.push(match s {
                Slot::Var(i) if bound[i] => Arg::Key(Slot::Var(i)),
                Slot::Var(i) if local.contains(&i) => Arg::Same(i),
                Slot::Var(i) => {
                    local.push(i);
                    Arg::Bind(i)
                }
                c => Arg::Key(c),
            });
        }
        for i in local {
            bound[i] = true;
        }
        args
    };

    let mut steps = Vec::with_capacity(rule.body.len());
    for atom in &rule.body {
        match atom {
            Atom::Rel(r) if r.is_external() => {
                let decl = registry
                    .and_then(|reg| reg.decl(&r.predicate))
                    .ok_or_else(|| Error::UnknownSource(r.predicate.clone()))?;
                if decl.signature.arity() != r.arity() {
                    return Err(Error::ArityMismatch {
                        predicate: r.predicate.clone(),
                        expected: decl.signature.arity(),
                        found: r.arity(),
                    });
                }
                let mut inputs = Vec::new();
                let mut out_terms = Vec::new();
                for (pos, (t, b)) in r.terms.iter().zip(decl.binding.iter()).enumerate() {
                    if b.is_bound() {
                        let s = slot(t);
                        if !is_ready(&s, &bound) {
                            return Err(Error::BindingViolation {
                                predicate: r.predicate.clone(),
                                position: pos + 1,
                            });
                        }
                        inputs.push(s);
                    } else {
                        out_terms.push(t.clone());
                    }
                }
                let outputs = atom_args(&out_terms, &mut bound);
                steps.push(Step::External {
                    predicate: r.predicate.clone(),
                    inputs,
                    outputs,
                });
            }
            Atom::Rel(r) => {
                let args = atom_args(&r.terms, &mut bound);
                steps.push(Step::Scan {
                    predicate: r.predicate.clone(),
                    args,
                });
            }
            Atom::Builtin { op, left, right } => {
                let (l, rt) = (slot(left), slot(right));
                match (is_ready(&l, &bound), is_ready(&rt, &bound)) {
                    (true, true) => steps.push(Step::Filter {
                        op: *op,
                        left: l,
                        right: rt,
                    }),
                    (false, true) if *op == CmpOp::Eq => {
                        let Slot::Var(var) = l else { unreachable!() };
                        bound[var] = true;
                        steps.push(Step::Assign { var, from: rt });
                    }
                    (true, false) if *op == CmpOp::Eq => {
                        let Slot::Var(var) = rt else { unreachable!() };
                        bound[var] = true;
                        steps.push(Step::Assign { var, from: l });
                    }
                    _ => {
                        return Err(Error::UnboundBuiltin {
                            predicate: rule.head.predicate.clone(),
                            atom: atom.to_string(),
                        })
                    }
                }
            }
        }
    }
    let head: Vec<Slot> = rule.head.terms.iter().map(slot).collect();
    for s in &head {
        if !is_ready(s, &bound) {
            let Slot::Var(i) = s else { unreachable!() };
            let name = slots.iter().find(|(_, v)| *v == i).map(|(k, _)| k.clone());
            return Err(Error::SafetyViolation {
                predicate: rule.head.predicate.clone(),
                variable: name.unwrap_or_default(),
            });
        }
    }
    Ok(Plan {
        head_predicate: rule.head.predicate.clone(),
        head,
        nvars: slots.len(),
        steps,
    })
}

fn value<'a>(row: &'a Row, s: &'a Slot) -> &'a Value {
    match s {
        Slot::Var(i) => &row[*i],
        Slot::Const(c) => c,
    }
}

/// Joins `rows` with `tuples` along `args`.
fn join(rows: Vec<Row>, tuples: &BTreeSet<Tuple>, args: &[Arg]) -> Vec<Row> {
    if rows.is_empty() || tuples.is_empty() {
        return Vec::new();
    }
    let key_pos: Vec<usize> = args
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, Arg::Key(_)))
        .map(|(i, _)| i)
        .collect();
    let mut index: HashMap<Vec<&Value>, Vec<&Tuple>> = HashMap::new();
    for t in tuples {
        if t.arity() != args.len() {
            continue;
        }
        let key: Vec<&Value> = key_pos.iter().map(|&i| &t[i]).collect();
        if key.iter().any(|v| v.is_null()) {
            continue;
        }
        index.entry(key).or_default().push(t);
    }
    let mut out = Vec::new();
    for row in rows {
        let key: Vec<&Value> = key_pos
            .iter()
            .map(|&i| match &args[i] {
                Arg::Key(s) => value(&row, s),
                _ => unreachable!(),
            })
            .collect();
        let Some(matches) = index.get(&key) else {
            continue;
        };
        'tuples: for t in matches {
            let mut next = row.clone();
            for (a, v) in args.iter().zip(t.iter()) {
                match a {
                    Arg::Key(_) => {}
                    Arg::Bind(i) => next[*i] = v.clone(),
                    Arg::Same(i) => {
                        if !next[*i].unifies(v) {
                            continue 'tuples;
                        }
                    }
                }
            }
            out.push(next);
        }
    }
    out
}

/// Extends `row` with one output tuple of an external call, if it matches.
fn match_outputs(row: &Row, args: &[Arg], output: &Tuple) -> Option<Row> {
    let mut next = row.clone();
    for (a, v) in args.iter().zip(output.iter()) {
        match a {
            Arg::Key(s) => {
                if !value(row, s).unifies(v) {
                    return None;
                }
            }
            Arg::Bind(i) => next[*i] = v.clone(),
            Arg::Same(i) => {
                if !next[*i].unifies(v) {
                    return None;
                }
            }
        }
    }
    Some(next)
}

fn run(plan: &Plan, inst: &Instance, mut registry: Option<&mut Registry>) -> Result<BTreeSet<Tuple>> {
    let mut rows: Vec<Row> = vec![vec![Value::Null; plan.nvars]];
    for step in &plan.steps {
        if rows.is_empty() {
            break;
        }
        rows = match step {
            Step::Scan { predicate, args } => join(rows, inst.tuples(predicate), args),
            Step::Filter { op, left, right } => rows
                .into_iter()
                .filter(|r| op.holds(value(r, left), value(r, right)))
                .collect(),
            Step::Assign { var, from } => rows
                .into_iter()
                .filter_map(|mut r| {
                    let v = value(&r, from).clone();
                    if v.is_null() {
                        return None;
                    }
                    r[*var] = v;
                    Some(r)
                })
                .collect(),
            Step::External {
                predicate,
                inputs,
                outputs,
            } => {
                let reg = registry
                    .as_deref_mut()
                    .ok_or_else(|| Error::UnknownSource(predicate.clone()))?;
                let calls: BTreeSet<Vec<Value>> = rows
                    .iter()
                    .map(|r| inputs.iter().map(|s| value(r, s).clone()).collect::<Vec<_>>())
                    .filter(|inp| inp.iter().all(|v| !v.is_null()))
                    .collect();
                let mut answers: HashMap<Vec<Value>, Vec<Tuple>> = HashMap::new();
                for input in calls {
                    let out = reg.invoke(predicate, &input)?;
                    answers.insert(input, out);
                }
                let mut next = Vec::new();
                for r in rows {
                    let input: Vec<Value> = inputs.iter().map(|s| value(&r, s).clone()).collect();
                    let Some(outs) = answers.get(&input) else {
                        continue;
                    };
                    for o in outs.iter().filter(|o| !o.is_all_null() || o.arity() == 0) {
                        if let Some(n) = match_outputs(&r, outputs, o) {
                            next.push(n);
                        }
                    }
                }
                next
            }
        };
    }
    Ok(rows
        .iter()
        .map(|r| plan.head.iter().map(|s| value(r, s).clone()).collect())
        .collect())
}

fn evaluate_inner(program: &Program, edb: &Instance, mut registry: Option<&mut Registry>) -> Result<Instance> {
    let mut plans: BTreeMap<&str, Vec<Plan>> = BTreeMap::new();
    for rule in &program.rules {
        let plan = compile(rule, registry.as_deref())?;
        plans.entry(rule.head.predicate.as_str()).or_default().push(plan);
    }
    let mut inst = edb.clone();
    for predicate in program.topological_order() {
        let Some(ps) = plans.get(predicate.as_str()) else {
            continue;
        };
        let mut derived = BTreeSet::new();
        for plan in ps {
            derived.extend(run(plan, &inst, registry.as_deref_mut())?);
        }
        inst.extend_relation(&predicate, derived);
    }
    Ok(inst)
}

/// Evaluates a program without external predicates.
pub fn evaluate(program: &Program, edb: &Instance) -> Result<Instance> {
    evaluate_inner(program, edb, None)
}

/// Evaluates a program, resolving external atoms through `registry`.
pub fn evaluate_with(program: &Program, edb: &Instance, registry: &mut Registry) -> Result<Instance> {
    evaluate_inner(program, edb, Some(registry))
}

/// Naive fixpoint iteration: every rule is re-applied to the whole current
/// instance until nothing changes.
pub fn evaluate_naive(program: &Program, edb: &Instance) -> Result<Instance> {
    let plans = program
        .rules
        .iter()
        .map(|r| compile(r, None))
        .collect::<Result<Vec<_>>>()?;
    let mut inst = edb.clone();
    loop {
        let mut changed = false;
        for plan in &plans {
            for t in run(plan, &inst, None)? {
                changed |= inst.insert(&plan.head_predicate, t);
            }
        }
        if !changed {
            return Ok(inst);
        }
    }
}
