//! JSON encoding of verdicts and traces, and replay of reports.

use std::collections::BTreeMap;

use polykar::linear::{LinStep, LinTrace, LinearSystem};
use polykar::rewrite::{Direction, Redex, Step, StringSystem, Trace, TraceKind};
use polykar::verdict::{Budget, Status};
use polykar::{Coef, Polygraph};
use serde_json::{json, Map, Value};

pub fn verdict(status: Status, budget: &Budget, note: &str) -> Value {
    json!({ "status": status, "budget": budget, "note": note })
}

fn kind_str(k: TraceKind) -> &'static str {
    match k {
        TraceKind::Reduction => "reduction",
        TraceKind::Derivation => "derivation",
    }
}

fn dir_str(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    }
}

pub fn set_trace(pg: &Polygraph, t: &Trace) -> Value {
    let steps: Vec<Value> = t
        .steps
        .iter()
        .map(|s| {
            json!({
                "rule": pg.rules[s.redex.rule].name,
                "left": pg.show_word(&s.redex.left),
                "right": pg.show_word(&s.redex.right),
                "direction": dir_str(s.direction),
            })
        })
        .collect();
    json!({
        "system": pg.name,
        "source": pg.show_word(&t.source),
        "target": pg.show_word(&t.target),
        "kind": kind_str(t.kind),
        "steps": steps,
    })
}

pub fn lin_trace(pg: &Polygraph, t: &LinTrace) -> Value {
    let steps: Vec<Value> = t
        .steps
        .iter()
        .map(|(s, d)| {
            json!({
                "rule": pg.rules[s.rule].name,
                "left": pg.show_word(&s.left),
                "right": pg.show_word(&s.right),
                "coef": s.coef.to_string(),
                "remainder": pg.show_lin(&s.remainder),
                "direction": dir_str(*d),
            })
        })
        .collect();
    json!({
        "system": pg.name,
        "linear": true,
        "from": pg.objects[t.source.src()],
        "to": pg.objects[t.source.tgt()],
        "source": pg.show_lin(&t.source),
        "target": pg.show_lin(&t.target),
        "kind": kind_str(t.kind),
        "steps": steps,
    })
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a str, String> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| format!("missing string field `{key}`"))
}

fn kind_of(v: &Value) -> Result<TraceKind, String> {
    match field(v, "kind")? {
        "reduction" => Ok(TraceKind::Reduction),
        "derivation" => Ok(TraceKind::Derivation),
        k => Err(format!("unknown trace kind `{k}`")),
    }
}

fn dir_of(v: &Value) -> Result<Direction, String> {
    match field(v, "direction")? {
        "forward" => Ok(Direction::Forward),
        "backward" => Ok(Direction::Backward),
        d => Err(format!("unknown direction `{d}`")),
    }
}

fn steps_of(v: &Value) -> Result<&Vec<Value>, String> {
    v.get("steps").and_then(Value::as_array).ok_or_else(|| "missing `steps`".to_string())
}

pub fn decode_set_trace(pg: &Polygraph, v: &Value) -> Result<Trace, String> {
    let word = |s: &str| pg.parse_word(s).map_err(|e| e.to_string());
    let mut steps = Vec::new();
    for s in steps_of(v)? {
        let rule = pg.rule(field(s, "rule")?).ok_or_else(|| format!("unknown rule `{}`", field(s, "rule").unwrap_or("")))?;
        let left = word(field(s, "left")?)?;
        let right = word(field(s, "right")?)?;
        steps.push(Step { redex: Redex { rule, position: left.len(), left, right }, direction: dir_of(s)? });
    }
    Ok(Trace { source: word(field(v, "source")?)?, target: word(field(v, "target")?)?, steps, kind: kind_of(v)? })
}

pub fn decode_lin_trace(pg: &Polygraph, v: &Value) -> Result<LinTrace, String> {
    let word = |s: &str| pg.parse_word(s).map_err(|e| e.to_string());
    let obj = |k: &str| -> Result<usize, String> {
        let name = field(v, k)?;
        pg.object(name).ok_or_else(|| format!("unknown 0-cell `{name}`"))
    };
    let ends = Some((obj("from")?, obj("to")?));
    let mut steps = Vec::new();
    for s in steps_of(v)? {
        let rule = pg.rule(field(s, "rule")?).ok_or_else(|| format!("unknown rule `{}`", field(s, "rule").unwrap_or("")))?;
        let left = word(field(s, "left")?)?;
        let right = word(field(s, "right")?)?;
        let e = (left.src(), right.tgt());
        let coef: Coef = field(s, "coef")?.parse().map_err(|_| "bad coefficient".to_string())?;
        let remainder = pg.parse_lin(field(s, "remainder")?, Some(e)).map_err(|e| e.to_string())?;
        steps.push((LinStep { rule, left, right, coef, remainder }, dir_of(s)?));
    }
    let lin = |s: &str| pg.parse_lin(s, ends).map_err(|e| e.to_string());
    let source = lin(field(v, "source")?)?;
    let target = lin(field(v, "target")?)?;
    Ok(LinTrace { source, target, steps, kind: kind_of(v)? })
}

/// Replays every trace found anywhere in `report`. Systems are looked up by
/// name among `known` and the report's own `polygraphs` table.
pub fn verify(known: &[Polygraph], report: &Value) -> Result<usize, String> {
    let mut systems: BTreeMap<String, Polygraph> = known.iter().map(|p| (p.name.clone(), p.clone())).collect();
    if let Some(Value::Object(table)) = report.get("polygraphs") {
        for (name, text) in table {
            let text = text.as_str().ok_or("polygraph entries must be DSL strings")?;
            let pg = Polygraph::parse(text).map_err(|r| format!("{name}: {r}"))?;
            systems.insert(name.clone(), pg);
        }
    }
    let mut count = 0;
    walk(report, &systems, &mut count)?;
    Ok(count)
}

fn walk(v: &Value, systems: &BTreeMap<String, Polygraph>, count: &mut usize) -> Result<(), String> {
    match v {
        Value::Object(m) if m.contains_key("steps") && m.contains_key("system") => {
            replay_one(m, systems)?;
            *count += 1;
            Ok(())
        }
        Value::Object(m) => m.values().try_for_each(|x| walk(x, systems, count)),
        Value::Array(xs) => xs.iter().try_for_each(|x| walk(x, systems, count)),
        _ => Ok(()),
    }
}

fn replay_one(m: &Map<String, Value>, systems: &BTreeMap<String, Polygraph>) -> Result<(), String> {
    let v = Value::Object(m.clone());
    let name = field(&v, "system")?;
    let pg = systems.get(name).ok_or_else(|| format!("unknown system `{name}`"))?;
    let context = |e: String| format!("trace from `{}` in `{name}`: {e}", field(&v, "source").unwrap_or("?"));
    if m.get("linear").and_then(Value::as_bool).unwrap_or(false) {
        let sys = LinearSystem::from_polygraph(pg).map_err(|e| e.to_string())?;
        decode_lin_trace(pg, &v).and_then(|t| t.replay(&sys)).map(|_| ()).map_err(context)
    } else {
        let sys = StringSystem::from_polygraph(pg).map_err(|e| e.to_string())?;
        decode_set_trace(pg, &v).and_then(|t| t.replay(&sys)).map(|_| ()).map_err(context)
    }
}
