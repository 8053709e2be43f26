//! Random program and system generators shared by the property suites.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use dqctx_core::context::{parse_system, ContextualSystem};
use dqctx_core::datalog::{evaluate, evaluate_naive, parse_query, unfold, Query};
use dqctx_core::error::Error;
use dqctx_core::lci::{answers_on, enumerate_lcis_bounded, minimal_lci, quality_answers_certain, LciSpec};
use dqctx_core::magic::{adorn, evaluate_magic, magic_rewrite};
use dqctx_core::relmodel::{Instance, Tuple, Value};
use dqctx_core::unfold::answer_with_context;
use proptest::test_runner::TestCaseError;

/// Reads small choices off a byte string.
pub struct Genes<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Genes<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Genes { bytes, at: 0 }
    }

    pub fn pick(&mut self, n: usize) -> usize {
        let b = self.bytes.get(self.at).copied().unwrap_or(0);
        self.at += 1;
        b as usize % n
    }

    pub fn chance(&mut self, num: usize, den: usize) -> bool {
        self.pick(den) < num
    }
}

const VARS: [&str; 3] = ["x", "y", "z"];
const CONSTS: [&str; 4] = ["1", "2", "3", "4"];
const OPS: [&str; 6] = ["=", "!=", "<", "<=", ">", ">="];

/// A non-recursive program over EDB `e/2`, `f/1` with IDB `p` (optional)
/// and answer `Ans`: at most 5 rules, 4 predicates, 4 constants.
pub fn program_text(g: &mut Genes) -> String {
    let mut preds: Vec<(String, usize)> = vec![("e".into(), 2), ("f".into(), 1)];
    let mut idb: Vec<(String, usize, usize)> = Vec::new();
    if g.chance(2, 3) {
        idb.push(("p".into(), 1 + g.pick(2), 1 + g.pick(2)));
    }
    let ans_rules = 1 + g.pick(5 - idb.iter().map(|i| i.2).sum::<usize>()).min(2);
    idb.push(("Ans".into(), 1 + g.pick(2), ans_rules));
    let mut blocks = Vec::new();
    for (name, arity, count) in idb {
        let mut block = String::new();
        for _ in 0..count {
            block.push_str(&rule_text(g, &name, arity, &preds));
            block.push('\n');
        }
        blocks.push(block);
        preds.push((name, arity));
    }
    // the query's answer predicate is the head of its first rule
    blocks.reverse();
    blocks.concat()
}

fn rule_text(g: &mut Genes, head: &str, arity: usize, preds: &[(String, usize)]) -> String {
    let mut body = Vec::new();
    let mut bound: Vec<&str> = Vec::new();
    for _ in 0..1 + g.pick(3) {
        let (p, n) = &preds[g.pick(preds.len())];
        let terms: Vec<&str> = (0..*n)
            .map(|_| {
                if g.chance(3, 4) {
                    let v = VARS[g.pick(VARS.len())];
                    if !bound.contains(&v) {
                        bound.push(v);
                    }
                    v
                } else {
                    CONSTS[g.pick(CONSTS.len())]
                }
            })
            .collect();
        body.push(format!("{p}({})", terms.join(", ")));
    }
    if !bound.is_empty() && g.chance(1, 2) {
        let left = bound[g.pick(bound.len())];
        let right = if g.chance(1, 2) {
            bound[g.pick(bound.len())]
        } else {
            CONSTS[g.pick(CONSTS.len())]
        };
        body.push(format!("{left} {} {right}", OPS[g.pick(OPS.len())]));
    }
    let head_terms: Vec<&str> = (0..arity)
        .map(|_| {
            if bound.is_empty() || g.chance(1, 6) {
                CONSTS[g.pick(CONSTS.len())]
            } else {
                bound[g.pick(bound.len())]
            }
        })
        .collect();
    format!("{head}({}) :- {}.", head_terms.join(", "), body.join(", "))
}

fn num(s: &str) -> Value {
    Value::num(s)
}

pub fn edb(g: &mut Genes) -> Instance {
    let mut d = Instance::new();
    for _ in 0..g.pick(8) {
        let t = Tuple::new(vec![num(CONSTS[g.pick(4)]), num(CONSTS[g.pick(4)])]);
        d.insert("e", t);
    }
    for _ in 0..g.pick(4) {
        d.insert("f", Tuple::new(vec![num(CONSTS[g.pick(4)])]));
    }
    d
}

fn answers(q: &Query, inst: &Instance) -> BTreeSet<Tuple> {
    inst.tuples(&q.answer).clone()
}

fn fail(e: Error, context: &str) -> TestCaseError {
    TestCaseError::fail(format!("{e}\n{context}"))
}

/// Magic, unfolded and naive evaluation all give the direct answers.
pub fn check_rewrites(program: &[u8], data: &[u8]) -> Result<(), TestCaseError> {
    let text = program_text(&mut Genes::new(program));
    let q = parse_query(&text).map_err(|e| fail(e, &text))?;
    let d = edb(&mut Genes::new(data));
    let direct = answers(&q, &evaluate(&q.program, &d).map_err(|e| fail(e, &text))?);

    let naive = answers(&q, &evaluate_naive(&q.program, &d).map_err(|e| fail(e, &text))?);
    proptest::prop_assert_eq!(&naive, &direct, "naive vs semi-naive on\n{}", text);

    let unfolded = unfold(&q, &[]).map_err(|e| fail(e, &text))?;
    let via_unfold = answers(&q, &evaluate(&unfolded.program, &d).map_err(|e| fail(e, &text))?);
    proptest::prop_assert_eq!(&via_unfold, &direct, "unfolding\n{}", text);

    let magic = magic_rewrite(&adorn(&q, &Default::default()).map_err(|e| fail(e, &text))?);
    let via_magic = evaluate_magic(&magic, &d, None).map_err(|e| fail(e, &format!("{magic}from\n{text}")))?;
    proptest::prop_assert_eq!(&answers(&q, &via_magic), &direct, "magic program\n{}\nfrom\n{}", magic, text);
    Ok(())
}

/// A system with source `R` (unary, or binary when exact), contextual `K`,
/// optional footprint and CQP. Every quality view keeps the nickname atom.
pub fn lci_system(g: &mut Genes) -> (String, bool) {
    let binary = g.chance(1, 4);
    let open_source = !binary && g.chance(1, 2);
    let open_k = g.chance(1, 2);
    let mut s = String::new();
    if binary {
        s.push_str("source { R(a: num, b: num). }\n");
    } else {
        s.push_str("source { R(a: num). }\n");
    }
    s.push_str("context { K(a: num).");
    if open_k {
        s.push_str(" open K.");
    }
    s.push_str(" }\nmapping { ");
    s.push_str(if open_source { "open R. " } else { "copy R. " });
    if !binary && g.chance(1, 2) {
        s.push_str(if g.chance(1, 2) {
            "footprint R(x) :- K(x). "
        } else {
            "footprint R(x) :- K(x), x != 1. "
        });
    }
    s.push_str("}\n");
    let guard = match g.pick(3) {
        0 => "K(x)",
        1 => "Good(x)",
        _ => "x != 2",
    };
    if guard == "Good(x)" {
        s.push_str("cqp { Good(x) :- K(x), x != 1. }\n");
    }
    if binary {
        s.push_str(&format!("quality {{ R: R'_P(x, y) :- R'(x, y), {guard}. }}\n"));
    } else {
        s.push_str(&format!("quality {{ R: R'_P(x) :- R'(x), {guard}. }}\n"));
    }
    (s, binary)
}

pub fn lci_query(g: &mut Genes, binary: bool) -> String {
    let qs: &[&str] = if binary {
        &["Ans(x) :- R(x, y).", "Ans(x, z) :- R(x, y), R(y, z).", "Ans(y) :- R(x, y), x < y."]
    } else {
        &["Ans(x) :- R(x).", "Ans(x) :- R(x), x != 3.", "Ans(x, y) :- R(x), R(y), x < y.", "Ans() :- R(1)."]
    };
    qs[g.pick(qs.len())].to_string()
}

pub fn small_instance(g: &mut Genes, rel: &str, arity: usize) -> Instance {
    let mut i = Instance::new();
    for _ in 0..g.pick(3) {
        let t = (0..arity).map(|_| num(CONSTS[g.pick(3)])).collect();
        i.insert(rel, Tuple::new(t));
    }
    i
}

struct Case {
    text: String,
    system: ContextualSystem,
    query: Query,
    d: Instance,
}

fn lci_case(genes: &[u8]) -> Case {
    let g = &mut Genes::new(genes);
    let (text, binary) = lci_system(g);
    let mut system = parse_system(&text, Path::new(".")).expect("generated system parses");
    let query = parse_query(&lci_query(g, binary)).expect("generated query parses");
    let d = small_instance(g, "R", if binary { 2 } else { 1 });
    system.contextual_data.union_with(&small_instance(g, "K", 1));
    Case { text, system, query, d }
}

/// Certain answers equal the intersection over every bounded LCI.
pub fn check_certain(genes: &[u8]) -> Result<(), TestCaseError> {
    let Case { text, system, query, d } = lci_case(genes);
    let spec = LciSpec::new(system);
    let lcis = enumerate_lcis_bounded(&spec, &d, 4).map_err(|e| fail(e, &text))?;
    match minimal_lci(&spec, &d) {
        Err(Error::NoLegalInstance(_)) => {
            proptest::prop_assert!(lcis.is_empty(), "{}", text);
        }
        Err(e) => return Err(fail(e, &text)),
        Ok(_) => {
            proptest::prop_assert!(!lcis.is_empty(), "{}", text);
            let certain = quality_answers_certain(&query, &spec, &d).map_err(|e| fail(e, &text))?;
            let mut inter: Option<BTreeSet<Tuple>> = None;
            for inst in &lcis {
                let a = answers_on(&query, &spec, inst).map_err(|e| fail(e, &text))?;
                inter = Some(match inter {
                    None => a,
                    Some(s) => s.intersection(&a).cloned().collect(),
                });
            }
            proptest::prop_assert_eq!(inter.unwrap_or_default(), certain, "{}", text);
        }
    }
    Ok(())
}

/// Quality answers of a monotone query are among its plain answers.
pub fn check_containment(genes: &[u8]) -> Result<(), TestCaseError> {
    let Case { text, system, query, d } = lci_case(genes);
    contained(&query, &system, &d).map_err(|e| fail(e, &text))?
        .then_some(())
        .ok_or_else(|| TestCaseError::fail(format!("quality answers escape plain answers\n{text}")))
}

/// Whether the quality answers to `query` are a subset of its answers on `d`.
pub fn contained(query: &Query, system: &ContextualSystem, d: &Instance) -> Result<bool, Error> {
    let mut reg = system.registry()?;
    let quality = answer_with_context(query, system, d, &mut reg)?;
    let plain = evaluate(&query.program, d)?;
    Ok(quality.is_subset(plain.tuples(&query.answer)))
}

/// A conjunctive query over `TempNoon(patient, value, time, date)` with
/// random projections and selections.
pub fn temp_noon_query(g: &mut Genes) -> String {
    let head = ["p", "v", "t", "d"];
    let mut out: Vec<&str> = head.iter().copied().filter(|_| g.chance(1, 2)).collect();
    if out.is_empty() {
        out.push("p");
    }
    let mut body = vec!["TempNoon(p, v, t, d)".to_string()];
    if g.chance(1, 2) {
        body.push(format!("d = Sep/{}", 5 + g.pick(3)));
    }
    if g.chance(1, 2) {
        body.push(format!("t {} 12:{:02}", ["<", "<=", ">", ">="][g.pick(4)], g.pick(4) * 15));
    }
    if g.chance(1, 2) {
        body.push(format!("v {} 38.{}", ["<", ">="][g.pick(2)], g.pick(10)));
    }
    if g.chance(1, 3) {
        body.push("TempNoon(p, w, s, d)".to_string());
    }
    format!("Ans({}) :- {}.", out.join(", "), body.join(", "))
}
