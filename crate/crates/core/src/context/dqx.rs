//! The `.dqx` system description format.
//!
//! ```text
//! source   { TempNoon(patient: str, value: num, time: time, date: date). }
//! context  { S(date: date, shift: str, nurse: str).  open M.  MNT(...) :- ... . }
//! external { #C(nurse: str -> year: num) binding "bf" table "certs.csv". }
//! mapping  { copy TempNoon -> TempNoon'.  footprint TempNoon(...) :- ... . }
//! cqp      { Oral(p, d, t) :- MNT(p, d, t, n, i, tp), tp = "Oral". }
//! quality  { TempNoon: TempNoon'_P(p, v, t, d) :- ... . }
//! ```
//!
//! Contextual relations are closed unless declared `open`. Nicknames named
//! in `copy`/`open` mappings are declared automatically with the source
//! signature; `copy R.` names the nickname `R'`. Table paths are relative
//! to the system file.

use std::path::Path;

use super::{nickname_of, ContextualSystem, ExternalSource, Mapping};
use crate::datalog::{Tok, TokenStream};
use crate::error::{Error, Result};
use crate::extsrc::ExternalDecl;
use crate::magic::{Adornment, Binding};
use crate::relmodel::{AttributeSignature, Kind, RelationSignature};

fn attributes(ts: &mut TokenStream, out: &mut Vec<AttributeSignature>) -> Result<()> {
    loop {
        let name = ts.ident()?;
        ts.expect(Tok::Colon)?;
        let kind: Kind = ts
            .ident()?
            .parse()
            .map_err(|_| ts.error("expected one of str, num, time, date"))?;
        out.push(AttributeSignature::new(name, kind));
        if !ts.eat(&Tok::Comma) {
            return Ok(());
        }
    }
}

fn signature(ts: &mut TokenStream) -> Result<RelationSignature> {
    let name = ts.ident()?;
    ts.expect(Tok::LParen)?;
    let mut attrs = Vec::new();
    attributes(ts, &mut attrs)?;
    ts.expect(Tok::RParen)?;
    RelationSignature::new(name, attrs)
}

fn external(ts: &mut TokenStream, base: &Path) -> Result<ExternalSource> {
    let name = ts.ident()?;
    if !name.starts_with('#') {
        return Err(ts.error(format!("external predicate `{name}` must start with `#`")));
    }
    ts.expect(Tok::LParen)?;
    let mut attrs = Vec::new();
    let mut split = None;
    if *ts.peek() != Tok::Implies {
        attributes(ts, &mut attrs)?;
    }
    if ts.eat(&Tok::Implies) {
        split = Some(attrs.len());
        if *ts.peek() != Tok::RParen {
            attributes(ts, &mut attrs)?;
        }
    }
    ts.expect(Tok::RParen)?;
    let sig = RelationSignature::new(name, attrs)?;
    let from_arrow = split.map(|k| {
        Adornment::new(
            (0..sig.arity())
                .map(|i| if i < k { Binding::Bound } else { Binding::Free })
                .collect(),
        )
    });
    let mut binding = None;
    let mut table = None;
    loop {
        match ts.peek().clone() {
            Tok::Ident(k) if k == "binding" => {
                ts.next();
                let text = ts.string()?;
                binding = Some(text.parse::<Adornment>().map_err(|e| ts.error(e.to_string()))?);
            }
            Tok::Ident(k) if k == "table" => {
                ts.next();
                table = Some(base.join(ts.string()?));
            }
            _ => break,
        }
    }
    ts.expect(Tok::Dot)?;
    let binding = match (binding, from_arrow) {
        (Some(b), Some(a)) if a != b => {
            return Err(ts.error(format!(
                "binding \"{b}\" disagrees with the input/output split \"{a}\" of `{}`",
                sig.name
            )))
        }
        (Some(b), _) => b,
        (None, Some(a)) => a,
        (None, None) => return Err(ts.error(format!("external `{}` needs `->` or a binding", sig.name))),
    };
    Ok(ExternalSource {
        decl: ExternalDecl::new(sig, binding)?,
        table,
    })
}

fn nickname_mapping(ts: &mut TokenStream) -> Result<(String, String)> {
    let source = ts.ident()?;
    let nickname = if ts.eat(&Tok::Implies) {
        ts.ident()?
    } else {
        nickname_of(&source)
    };
    ts.expect(Tok::Dot)?;
    Ok((source, nickname))
}

const SECTIONS: [&str; 6] = ["source", "context", "external", "mapping", "cqp", "quality"];

fn keyword(ts: &TokenStream) -> Option<String> {
    match (ts.peek(), ts.peek_at(1)) {
        (Tok::Ident(k), Tok::Ident(_)) => Some(k.clone()),
        _ => None,
    }
}

/// Parses a system description. Relative table paths resolve against
/// `base`. The result is validated.
pub fn parse_system(text: &str, base: &Path) -> Result<ContextualSystem> {
    let mut ts = TokenStream::new(text)?;
    let mut sys = ContextualSystem::default();
    let mut declared_context = Vec::new();
    let mut open = Vec::new();
    while !ts.at_eof() {
        if !matches!(ts.peek(), Tok::Ident(s) if SECTIONS.contains(&s.as_str())) {
            return Err(ts.error(format!("expected a section ({}), found {}", SECTIONS.join(", "), ts.peek())));
        }
        let section = ts.ident()?;
        ts.expect(Tok::LBrace)?;
        while !ts.eat(&Tok::RBrace) {
            if ts.at_eof() {
                return Err(ts.error(format!("unterminated section `{section}`")));
            }
            match section.as_str() {
                "source" => {
                    sys.source_schema.push(signature(&mut ts)?);
                    ts.expect(Tok::Dot)?;
                }
                "context" => match keyword(&ts).as_deref() {
                    Some(k @ ("open" | "closed")) => {
                        ts.next();
                        let name = ts.ident()?;
                        ts.expect(Tok::Dot)?;
                        if k == "open" {
                            open.push(name);
                        }
                    }
                    Some(k) => return Err(ts.error(format!("unknown context keyword `{k}`"))),
                    None if matches!(ts.peek_at(3), Tok::Colon) => {
                        declared_context.push(signature(&mut ts)?);
                        ts.expect(Tok::Dot)?;
                    }
                    None => sys.context_views.push(ts.rule()?),
                },
                "external" => sys.external_predicates.push(external(&mut ts, base)?),
                "mapping" => match keyword(&ts).as_deref() {
                    Some("copy") => {
                        ts.next();
                        let (source, nickname) = nickname_mapping(&mut ts)?;
                        sys.mappings.push(Mapping::Copy { source, nickname });
                    }
                    Some("open") => {
                        ts.next();
                        let (source, nickname) = nickname_mapping(&mut ts)?;
                        sys.mappings.push(Mapping::OpenGav { source, nickname });
                    }
                    Some("footprint") => {
                        ts.next();
                        sys.mappings.push(Mapping::Footprint(ts.rule()?));
                    }
                    _ => return Err(ts.error("expected `copy`, `open` or `footprint`")),
                },
                "cqp" => {
                    let rule = ts.rule()?;
                    sys.quality_predicates.insert(rule.head.predicate.clone());
                    sys.mappings.push(Mapping::CqpDef(rule));
                }
                "quality" => {
                    let source = ts.ident()?;
                    ts.expect(Tok::Colon)?;
                    let rule = ts.rule()?;
                    sys.mappings.push(Mapping::QualityView { source, rule });
                }
                _ => unreachable!(),
            }
        }
    }
    for name in &open {
        if !declared_context.iter().any(|s| &s.name == name) {
            return Err(Error::InvalidSystem(format!("`open {name}` names no contextual relation")));
        }
    }
    sys.closed_context_relations = declared_context
        .iter()
        .map(|s| s.name.clone())
        .filter(|n| !open.contains(n))
        .collect();
    sys.contextual_schema = declared_context;
    for (source, nickname) in sys.nicknames() {
        if sys.contextual(&nickname).is_none() {
            if let Some(sig) = sys.source(&source) {
                let sig = sig.renamed(nickname);
                sys.contextual_schema.push(sig);
            }
        }
    }
    sys.validate()?;
    Ok(sys)
}

/// Reads and parses a system file.
pub fn load_system(path: &Path) -> Result<ContextualSystem> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_system(&text, path.parent().unwrap_or(Path::new(".")))
}
