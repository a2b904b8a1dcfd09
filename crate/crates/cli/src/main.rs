//! `polykar`: command-line front end for the polygraph rewriting toolkit.

mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polykar::decat::{
    self, build_decat, find_direct_sum_proofs, find_iso_proofs, find_zero_objects, grothendieck_group, krull_schmidt_check,
    show_classes, DecatSystem, DirectSumProof, IsoProof, KsWitness, ZeroObject, ZeroProof,
};
use polykar::karoubi::{
    build_karoubi, enumerate_idempotents, solve_idempotents_linear, verify_idempotent, Cell, IdempotencyProof, IdempotentCert,
    KaroubiEnvelope, SplitProof,
};
use polykar::linear::LinearSystem;
use polykar::rewrite::{kb_complete, CoherenceCell, ReductionOrder, Strategy, StringSystem};
use polykar::verdict::{Budget, Status};
use polykar::{LinComb, Polygraph};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "polykar", version, about = "Rewriting toolkit for polygraphs and linear polygraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for parallel searches.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Step budget for normalization.
    #[arg(long, global = true, env = "POLYKAR_DEFAULT_BUDGET", default_value_t = 10_000)]
    budget: usize,
    /// Exit code used for NO verdicts.
    #[arg(long, global = true, default_value_t = 1)]
    no_exit: u8,
    /// Replay every trace of a JSON report produced earlier, instead of
    /// running the analysis.
    #[arg(long, global = true, value_name = "REPORT")]
    verify: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Leftmost,
    Rightmost,
}

#[derive(Args, Clone)]
struct OrderArg {
    /// `lenlex`, `lenlex:<generators, lowest first>` or `weights:<w1,w2,...>`.
    #[arg(long, default_value = "lenlex")]
    order: String,
}

#[derive(Args, Clone)]
struct IdempotentSource {
    /// Report written by `idempotents --format json`.
    #[arg(long, value_name = "REPORT")]
    idempotents: Option<PathBuf>,
    /// An idempotent given directly; may be repeated.
    #[arg(long = "cell")]
    cells: Vec<String>,
    /// Comma-separated names for the new 0-cells (default E1, E2, ...).
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Search depth when re-certifying idempotents.
    #[arg(long, default_value_t = 8)]
    depth: usize,
}

#[derive(Args, Clone)]
struct ProofBounds {
    #[arg(long, default_value_t = decat::DEFAULT_WORD_BOUND)]
    word_bound: usize,
    #[arg(long, default_value_t = decat::DEFAULT_DEPTH)]
    depth: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check a polygraph file and list every problem found.
    Validate { file: PathBuf },
    /// Rewrite a cell to normal form.
    Normalize {
        file: PathBuf,
        #[arg(long)]
        cell: Option<String>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Leftmost)]
        strategy: StrategyArg,
    },
    /// List critical branchings.
    Branchings { file: PathBuf },
    /// Decide confluence.
    Confluence {
        file: PathBuf,
        #[command(flatten)]
        order: OrderArg,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Look for a termination certificate.
    Termination {
        file: PathBuf,
        #[command(flatten)]
        order: OrderArg,
    },
    /// Quasi-termination of the region reachable from seed cells.
    Quasi {
        file: PathBuf,
        /// Seed cell; may be repeated (default: every left-hand side).
        #[arg(long = "seed")]
        seeds: Vec<String>,
        /// Also report the quasi-normal forms of this word.
        #[arg(long)]
        cell: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Knuth-Bendix completion.
    Complete {
        file: PathBuf,
        #[command(flatten)]
        order: OrderArg,
        #[arg(long, default_value_t = 64)]
        max_rules: usize,
        #[arg(long, default_value_t = 16)]
        max_rounds: usize,
    },
    /// Find idempotents (words up to a length, or combinations up to a height).
    Idempotents {
        file: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_len: usize,
        #[arg(long, default_value_t = 2)]
        height: i64,
        #[arg(long, default_value_t = 16)]
        basis_bound: usize,
        /// Check one candidate instead of searching.
        #[arg(long)]
        cell: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Present the Karoubi envelope for a set of idempotents.
    Karoubi {
        file: PathBuf,
        #[command(flatten)]
        source: IdempotentSource,
    },
    /// Lift a Squier coherence basis to the Karoubi envelope.
    Lift {
        file: PathBuf,
        #[command(flatten)]
        source: IdempotentSource,
        #[arg(long, default_value_t = 1)]
        size_bound: usize,
    },
    /// Grothendieck decategorification of a linear polygraph.
    Decat {
        file: PathBuf,
        #[command(flatten)]
        bounds: ProofBounds,
        /// Use the proofs of an earlier `decat --format json` report.
        #[arg(long, value_name = "REPORT")]
        proofs: Option<PathBuf>,
    },
    /// Uniqueness of direct-sum decompositions.
    KrullSchmidt {
        file: PathBuf,
        #[command(flatten)]
        bounds: ProofBounds,
    },
    /// Rank and torsion of the Grothendieck group.
    Group {
        file: PathBuf,
        #[command(flatten)]
        bounds: ProofBounds,
    },
}

struct Out {
    text: String,
    json: Value,
    status: Option<Status>,
}

impl Out {
    fn new(text: String, json: Value) -> Self {
        Out { text, json, status: None }
    }

    fn with_status(mut self, s: Status) -> Self {
        self.status = Some(s);
        self
    }
}

enum Fail {
    /// Usage, input or precondition error.
    Input(String),
    /// A report whose witnesses do not replay.
    Rejected(String),
}

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail::Input(e.to_string())
    }
}

type Res<T> = Result<T, Fail>;

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Res<Polygraph> {
    Polygraph::parse(&read(path)?).map_err(|r| Fail::Input(format!("{}:\n{r}", path.display())))
}

fn read_json(path: &Path) -> Res<Value> {
    serde_json::from_str(&read(path)?).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))
}

fn parse_order(pg: &Polygraph, spec: &str) -> Res<ReductionOrder> {
    let n = pg.arrows.len();
    match spec.split_once(':') {
        None if spec == "lenlex" => Ok(ReductionOrder::lenlex(n)),
        Some(("lenlex", list)) => {
            let ids = list
                .split(',')
                .map(|s| pg.arrow(s.trim()).ok_or_else(|| Fail::Input(format!("unknown 1-cell `{}`", s.trim()))))
                .collect::<Res<Vec<_>>>()?;
            Ok(ReductionOrder::with_precedence(n, &ids))
        }
        Some(("weights", list)) => {
            let ws = list.split(',').map(|s| s.trim().parse::<i64>()).collect::<Result<Vec<_>, _>>()?;
            if ws.len() != n {
                return Err(Fail::Input(format!("expected {n} weights")));
            }
            Ok(ReductionOrder::weights(ws)?)
        }
        _ => Err(Fail::Input(format!("unknown order `{spec}`"))),
    }
}

fn verdict_line(label: &str, status: Status, budget: &Budget, note: &str) -> String {
    let mut s = format!("{label}: {status} ({budget})");
    if !note.is_empty() {
        let _ = write!(s, "\n  {note}");
    }
    s
}

fn polygraphs_table(pgs: &[&Polygraph]) -> Value {
    let mut m = serde_json::Map::new();
    for p in pgs {
        m.insert(p.name.clone(), Value::String(p.to_string()));
    }
    Value::Object(m)
}

fn validate(file: &Path) -> Res<Out> {
    let text = read(file)?;
    match Polygraph::parse(&text) {
        Ok(pg) => {
            let counts = json!({
                "0-cells": pg.objects.len(),
                "1-cells": pg.arrows.len(),
                "2-cells": pg.rules.len(),
                "higher": pg.higher.len(),
            });
            let text = format!(
                "ok: {} ({} 0-cells, {} 1-cells, {} 2-cells, {} higher cells)",
                pg.name,
                pg.objects.len(),
                pg.arrows.len(),
                pg.rules.len(),
                pg.higher.len()
            );
            Ok(Out::new(text, json!({ "valid": true, "name": pg.name, "cells": counts })))
        }
        Err(r) => {
            let issues: Vec<Value> =
                r.issues.iter().map(|i| json!({ "kind": i.kind.to_string(), "cell": i.cell, "detail": i.detail })).collect();
            let out = Out::new(r.to_string(), json!({ "valid": false, "issues": issues }));
            // a malformed file is an input error, but the report is still printed
            Ok(Out { status: Some(Status::Unknown), ..out })
        }
    }
}

fn normalize(pg: &Polygraph, cell: &str, strategy: StrategyArg, budget: usize) -> Res<Out> {
    if pg.is_linear() {
        let sys = LinearSystem::from_polygraph(pg)?;
        let x = pg.parse_lin(cell, None)?;
        return Ok(match sys.lin_normalize(&x, budget) {
            Ok((nf, t)) => Out::new(
                pg.show_lin(&nf),
                json!({ "input": pg.show_lin(&x), "normal_form": pg.show_lin(&nf), "trace": report::lin_trace(pg, &t) }),
            )
            .with_status(Status::Yes),
            Err(e) => Out::new(
                format!("UNKNOWN: {e}"),
                json!({ "input": pg.show_lin(&x), "status": Status::Unknown, "partial": report::lin_trace(pg, &e.partial) }),
            )
            .with_status(Status::Unknown),
        });
    }
    let sys = StringSystem::from_polygraph(pg)?;
    let w = pg.parse_word(cell)?;
    let strategy = match strategy {
        StrategyArg::Leftmost => Strategy::Leftmost,
        StrategyArg::Rightmost => Strategy::Rightmost,
    };
    Ok(match sys.normalize(&w, strategy, budget) {
        Ok((nf, t)) => Out::new(
            pg.show_word(&nf),
            json!({ "input": pg.show_word(&w), "normal_form": pg.show_word(&nf), "trace": report::set_trace(pg, &t) }),
        )
        .with_status(Status::Yes),
        Err(e) => Out::new(
            format!("UNKNOWN: {e}"),
            json!({ "input": pg.show_word(&w), "status": Status::Unknown, "partial": report::set_trace(pg, &e.partial) }),
        )
        .with_status(Status::Unknown),
    })
}

fn branchings(pg: &Polygraph) -> Res<Out> {
    let bs = if pg.is_linear() {
        LinearSystem::from_polygraph(pg)?.lin_critical_branchings()
    } else {
        StringSystem::from_polygraph(pg)?.critical_branchings()
    };
    let mut text = format!("{} critical branchings", bs.len());
    let mut items = Vec::new();
    for b in &bs {
        let (ra, rb) = (&pg.rules[b.a.rule].name, &pg.rules[b.b.rule].name);
        let _ = write!(text, "\n  {}: {ra} at {}, {rb} at {}", pg.show_word(&b.overlap), b.a.position, b.b.position);
        items.push(json!({
            "overlap": pg.show_word(&b.overlap),
            "a": { "rule": ra, "position": b.a.position },
            "b": { "rule": rb, "position": b.b.position },
        }));
    }
    Ok(Out::new(text, json!({ "branchings": items })))
}

fn confluence(pg: &Polygraph, order: &str, depth: usize) -> Res<Out> {
    let mut joins = Vec::new();
    let (status, budget, note) = if pg.is_linear() {
        let v = LinearSystem::from_polygraph(pg)?.lin_confluence(depth);
        for j in v.witness.iter().flatten() {
            joins.push(json!({
                "overlap": pg.show_word(&j.branching.overlap),
                "joined": j.joined,
                "left": report::lin_trace(pg, &j.left),
                "right": report::lin_trace(pg, &j.right),
            }));
        }
        (v.status, v.budget, v.note)
    } else {
        let order = parse_order(pg, order)?;
        let v = StringSystem::from_polygraph(pg)?.check_confluence(&order, depth);
        for j in v.witness.iter().flatten() {
            joins.push(json!({
                "overlap": pg.show_word(&j.branching.overlap),
                "joined": j.joined,
                "left": report::set_trace(pg, &j.left),
                "right": report::set_trace(pg, &j.right),
            }));
        }
        (v.status, v.budget, v.note)
    };
    let mut text = verdict_line("confluence", status, &budget, &note);
    for j in &joins {
        let _ = write!(
            text,
            "\n  {}: {} / {}{}",
            j["overlap"].as_str().unwrap_or(""),
            j["left"]["target"].as_str().unwrap_or(""),
            j["right"]["target"].as_str().unwrap_or(""),
            if j["joined"].as_bool() == Some(true) { "" } else { "  (not joined)" }
        );
    }
    let json = json!({ "verdict": report::verdict(status, &budget, &note), "joins": joins, "polygraphs": polygraphs_table(&[pg]) });
    Ok(Out::new(text, json).with_status(status))
}

fn termination(pg: &Polygraph, order: &str) -> Res<Out> {
    if pg.is_linear() {
        let sys = LinearSystem::from_polygraph(pg)?;
        let (status, note) = if sys.deglex_decreasing() {
            (Status::Yes, "every rule decreases in deglex")
        } else {
            (Status::Unknown, "some rule does not decrease in deglex")
        };
        let b = Budget::default();
        return Ok(Out::new(verdict_line("termination", status, &b, note), json!({ "verdict": report::verdict(status, &b, note) }))
            .with_status(status));
    }
    let order = parse_order(pg, order)?;
    let v = StringSystem::from_polygraph(pg)?.check_termination(&order);
    let mut text = verdict_line("termination", v.status, &v.budget, &v.note);
    let mut rules = Vec::new();
    for (name, ord) in v.witness.iter().flatten() {
        let rel = match ord {
            std::cmp::Ordering::Greater => ">",
            std::cmp::Ordering::Equal => "=",
            std::cmp::Ordering::Less => "<",
        };
        let _ = write!(text, "\n  {name}: lhs {rel} rhs");
        rules.push(json!({ "rule": name, "lhs_vs_rhs": rel }));
    }
    Ok(Out::new(text, json!({ "verdict": report::verdict(v.status, &v.budget, &v.note), "rules": rules })).with_status(v.status))
}

fn quasi(pg: &Polygraph, seeds: &[String], cell: Option<&str>, depth: usize) -> Res<Out> {
    let (status, budget, note, witness) = if pg.is_linear() {
        let sys = LinearSystem::from_polygraph(pg)?;
        let seeds: Vec<LinComb> = if seeds.is_empty() {
            sys.rules.iter().map(|r| LinComb::from_word(&r.lhs)).collect()
        } else {
            seeds.iter().map(|s| pg.parse_lin(s, None)).collect::<Result<_, _>>()?
        };
        let v = sys.lin_quasi_termination_region(&seeds, depth)?;
        (v.status, v.budget, v.note, v.witness.map(|t| report::lin_trace(pg, &t)))
    } else {
        let sys = StringSystem::from_polygraph(pg)?;
        let seeds: Vec<polykar::Word> = if seeds.is_empty() {
            sys.rules.iter().map(|r| r.lhs.clone()).collect()
        } else {
            seeds.iter().map(|s| pg.parse_word(s)).collect::<Result<_, _>>()?
        };
        let v = sys.quasi_termination_region(&seeds, depth)?;
        (v.status, v.budget, v.note, v.witness.map(|t| report::set_trace(pg, &t)))
    };
    let mut text = verdict_line("quasi-termination", status, &budget, &note);
    if let Some(w) = &witness {
        let _ = write!(text, "\n  witness: {} ->* {}", w["source"].as_str().unwrap_or(""), w["target"].as_str().unwrap_or(""));
    }
    let mut json = json!({ "verdict": report::verdict(status, &budget, &note), "witness": witness, "polygraphs": polygraphs_table(&[pg]) });
    if let Some(c) = cell {
        if pg.is_linear() {
            return Err(Fail::Input("quasi-normal forms are computed for words of set-level polygraphs".into()));
        }
        let sys = StringSystem::from_polygraph(pg)?;
        let w = pg.parse_word(c)?;
        let (qnf, v) = sys.quasi_normal_forms(&w, depth);
        let shown: Vec<String> = qnf.iter().map(|x| pg.show_word(x)).collect();
        let _ = write!(text, "\nquasi-normal forms of {c}: {} [{}]", shown.join(", "), v.status);
        json["quasi_normal_forms"] = json!({ "cell": c, "forms": shown, "complete": v.status });
    }
    Ok(Out::new(text, json).with_status(status))
}

fn complete(pg: &Polygraph, order: &str, max_rules: usize, max_rounds: usize) -> Res<Out> {
    let order = parse_order(pg, order)?;
    let c = kb_complete(pg, &order, max_rules, max_rounds)?;
    let v = &c.verdict;
    let text = format!("{}\n{}", verdict_line("completion", v.status, &v.budget, &v.note), c.polygraph.to_string().trim_end());
    let witnesses: Vec<Value> = c
        .polygraph
        .rules
        .iter()
        .zip(&c.witnesses)
        .map(|(r, t)| json!({ "rule": r.name, "derivation": report::set_trace(pg, t) }))
        .collect();
    let json = json!({
        "verdict": report::verdict(v.status, &v.budget, &v.note),
        "completed": c.polygraph.to_string(),
        "witnesses": witnesses,
        "polygraphs": polygraphs_table(&[pg]),
    });
    Ok(Out::new(text, json).with_status(v.status))
}

fn cell_json(pg: &Polygraph, cert: &IdempotentCert) -> Value {
    let proof = match &cert.proof {
        IdempotencyProof::Set(t) => json!({ "derivation": report::set_trace(pg, t) }),
        IdempotencyProof::Lin(a, b) => json!({ "square": report::lin_trace(pg, a), "cell": report::lin_trace(pg, b) }),
    };
    json!({
        "cell": cert.cell.show(pg),
        "object": pg.objects[cert.cell.src()],
        "linear": matches!(cert.cell, Cell::Lin(_)),
        "proof": proof,
    })
}

fn parse_cell(pg: &Polygraph, text: &str, object: Option<&str>) -> Res<Cell> {
    if pg.is_linear() {
        let ends = match object {
            Some(o) => {
                let id = pg.object(o).ok_or_else(|| Fail::Input(format!("unknown 0-cell `{o}`")))?;
                Some((id, id))
            }
            None => None,
        };
        Ok(Cell::Lin(pg.parse_lin(text, ends)?))
    } else {
        Ok(Cell::Word(pg.parse_word(text)?))
    }
}

fn idempotents(pg: &Polygraph, max_len: usize, height: i64, basis_bound: usize, cell: Option<&str>, depth: usize) -> Res<Out> {
    if let Some(c) = cell {
        let e = parse_cell(pg, c, None)?;
        let v = verify_idempotent(pg, &e, depth)?;
        let text = verdict_line(&format!("idempotent {}", e.show(pg)), v.status, &v.budget, &v.note);
        let certs: Vec<Value> = v.witness.iter().map(|c| cell_json(pg, c)).collect();
        let json = json!({
            "verdict": report::verdict(v.status, &v.budget, &v.note),
            "idempotents": certs,
            "polygraphs": polygraphs_table(&[pg]),
        });
        return Ok(Out::new(text, json).with_status(v.status));
    }
    let certs = if pg.is_linear() { solve_idempotents_linear(pg, basis_bound, height)? } else { enumerate_idempotents(pg, max_len)? };
    let bound = if pg.is_linear() { json!({ "height": height }) } else { json!({ "max_len": max_len }) };
    let text = if certs.is_empty() {
        "none found within bound".to_string()
    } else {
        certs.iter().map(|c| c.cell.show(pg)).collect::<Vec<_>>().join("\n")
    };
    let json = json!({
        "bound": bound,
        "idempotents": certs.iter().map(|c| cell_json(pg, c)).collect::<Vec<_>>(),
        "polygraphs": polygraphs_table(&[pg]),
    });
    Ok(Out::new(text, json))
}

/// Idempotents from a report or the command line, re-certified against `pg`.
fn certified(pg: &Polygraph, src: &IdempotentSource) -> Res<Vec<(String, IdempotentCert)>> {
    let mut cells = Vec::new();
    if let Some(path) = &src.idempotents {
        let r = read_json(path)?;
        let list = r.get("idempotents").and_then(Value::as_array).ok_or_else(|| Fail::Input("report has no `idempotents`".into()))?;
        for item in list {
            let text = item.get("cell").and_then(Value::as_str).ok_or_else(|| Fail::Input("idempotent without `cell`".into()))?;
            cells.push(parse_cell(pg, text, item.get("object").and_then(Value::as_str))?);
        }
    }
    for c in &src.cells {
        cells.push(parse_cell(pg, c, None)?);
    }
    if cells.is_empty() {
        return Err(Fail::Input("no idempotents given (use --idempotents or --cell)".into()));
    }
    if !src.labels.is_empty() && src.labels.len() != cells.len() {
        return Err(Fail::Input(format!("{} labels for {} idempotents", src.labels.len(), cells.len())));
    }
    let mut out = Vec::new();
    for (k, e) in cells.into_iter().enumerate() {
        let v = verify_idempotent(pg, &e, src.depth)?;
        let cert = v.witness.ok_or_else(|| Fail::Input(format!("`{}` is not certified idempotent ({})", e.show(pg), v.status)))?;
        let label = src.labels.get(k).cloned().unwrap_or_else(|| format!("E{}", k + 1));
        out.push((label, cert));
    }
    Ok(out)
}

fn split_json(env: &KaroubiEnvelope) -> Res<Vec<Value>> {
    let k = &env.polygraph;
    let mut out = Vec::new();
    for s in &env.splits {
        let w = env.split_witness(&s.cert.cell)?;
        let proof = |p: &SplitProof| match p {
            SplitProof::Set(t) => report::set_trace(k, t),
            SplitProof::Lin(t) => report::lin_trace(k, t),
        };
        out.push(json!({
            "label": s.label,
            "idempotent": cell_json(&env.base, &s.cert),
            "p": k.show_word(&w.p),
            "i": k.show_word(&w.i),
            "pi": proof(&w.proof_pi),
            "iota": proof(&w.proof_ip),
        }));
    }
    Ok(out)
}

fn karoubi(pg: &Polygraph, src: &IdempotentSource) -> Res<Out> {
    let env = build_karoubi(pg, &certified(pg, src)?)?;
    let json = json!({
        "karoubi": env.polygraph.to_string(),
        "splits": split_json(&env)?,
        "polygraphs": polygraphs_table(&[pg, &env.polygraph]),
    });
    Ok(Out::new(env.polygraph.to_string().trim_end().to_string(), json))
}

fn lift(pg: &Polygraph, src: &IdempotentSource, size_bound: usize) -> Res<Out> {
    let env = build_karoubi(pg, &certified(pg, src)?)?;
    let basis: Vec<CoherenceCell> = if pg.is_linear() {
        LinearSystem::from_polygraph(pg)?.lin_squier_basis()?
    } else {
        StringSystem::from_polygraph(pg)?.squier_basis(pg, &ReductionOrder::lenlex(pg.arrows.len()))?
    };
    let lifted = env.lift_coherence(&basis, size_bound)?;
    let k = &env.polygraph;
    let mut text = String::from("basis:");
    for b in &basis {
        let _ = write!(text, "\n  {}", b.show(pg));
    }
    let _ = write!(text, "\nlifted ({} cells):", lifted.len());
    let mut cells = Vec::new();
    for l in &lifted {
        let (a, b) = l.cell.labels(k);
        let _ = write!(text, "\n  {}  [from {}{}]", l.cell.show(k), l.basis, if l.verified { "" } else { ", not verified" });
        cells.push(json!({
            "name": l.cell.name,
            "source": k.show_expr(&l.cell.source),
            "target": k.show_expr(&l.cell.target),
            "labels": [a, b],
            "basis": l.basis,
            "verified": l.verified,
        }));
    }
    let status = if lifted.iter().all(|l| l.verified) { Status::Yes } else { Status::Unknown };
    let json = json!({
        "basis": basis.iter().map(|b| b.show(pg)).collect::<Vec<_>>(),
        "lifted": cells,
        "karoubi": k.to_string(),
    });
    Ok(Out::new(text, json).with_status(status))
}

fn join_json(pg: &Polygraph, j: &decat::Join) -> Value {
    json!([report::lin_trace(pg, &j.0), report::lin_trace(pg, &j.1)])
}

struct Proofs {
    isos: Vec<IsoProof>,
    sums: Vec<DirectSumProof>,
    zeros: Vec<ZeroObject>,
}

fn search_proofs(pg: &Polygraph, b: &ProofBounds) -> Res<Proofs> {
    Ok(Proofs {
        isos: find_iso_proofs(pg, b.word_bound, b.depth)?,
        sums: find_direct_sum_proofs(pg, b.word_bound, b.depth)?,
        zeros: find_zero_objects(pg, b.word_bound, b.depth)?,
    })
}

/// Proofs listed in an earlier report; their equations are re-derived.
fn proofs_from_report(pg: &Polygraph, r: &Value, depth: usize) -> Res<Proofs> {
    let sys = LinearSystem::from_polygraph(pg)?;
    let s = |v: &Value, k: &str| -> Res<String> {
        v.get(k).and_then(Value::as_str).map(str::to_string).ok_or_else(|| Fail::Input(format!("proof without `{k}`")))
    };
    let obj = |name: &str| pg.object(name).ok_or_else(|| Fail::Input(format!("unknown 0-cell `{name}`")));
    let join = |x: &LinComb, y: &LinComb| -> Res<decat::Join> {
        let v = sys.lin_joinable(x, y, depth);
        v.witness.filter(|_| v.status == Status::Yes).ok_or_else(|| Fail::Input("a listed proof does not check".into()))
    };
    let arr = |k: &str| r.get(k).and_then(Value::as_array).cloned().unwrap_or_default();
    let mut out = Proofs { isos: Vec::new(), sums: Vec::new(), zeros: Vec::new() };
    for p in arr("iso_proofs") {
        let (u, v) = (obj(&s(&p, "u")?)?, obj(&s(&p, "v")?)?);
        let (a_u, a_v) = (pg.parse_word(&s(&p, "a_u")?)?, pg.parse_word(&s(&p, "a_v")?)?);
        let alpha_u = join(&LinComb::from_word(&a_u.compose(&a_v)?), &LinComb::identity(u))?;
        let alpha_v = join(&LinComb::from_word(&a_v.compose(&a_u)?), &LinComb::identity(v))?;
        out.isos.push(IsoProof { u, v, a_u, a_v, alpha_u, alpha_v });
    }
    for p in arr("direct_sum_proofs") {
        let (a, b, c) = (obj(&s(&p, "a")?)?, obj(&s(&p, "b")?)?, obj(&s(&p, "c")?)?);
        let w = |k: &str, from, to| -> Res<LinComb> { Ok(pg.parse_lin(&s(&p, k)?, Some((from, to)))?) };
        let (p_b, i_b, p_c, i_c) = (w("p_b", a, b)?, w("i_b", b, a)?, w("p_c", a, c)?, w("i_c", c, a)?);
        let sum = p_b.compose(&i_b)?.add(&p_c.compose(&i_c)?)?;
        let alpha_a = join(&sum, &LinComb::identity(a))?;
        let alpha_b = join(&i_b.compose(&p_b)?, &LinComb::identity(b))?;
        let alpha_c = join(&i_c.compose(&p_c)?, &LinComb::identity(c))?;
        out.sums.push(DirectSumProof { a, b, c, p_b, i_b, p_c, i_c, alpha_a, alpha_b, alpha_c });
    }
    let listed: Vec<String> = arr("zero_objects").iter().filter_map(|z| z.get("object").and_then(Value::as_str).map(str::to_string)).collect();
    if !listed.is_empty() {
        let found = find_zero_objects(pg, decat::DEFAULT_WORD_BOUND, depth)?;
        for name in listed {
            let z = obj(&name)?;
            let proof = found.iter().find(|f| f.object == z).ok_or_else(|| Fail::Input(format!("`{name}` is not certified zero")))?;
            out.zeros.push(proof.clone());
        }
    }
    Ok(out)
}

fn proofs_json(pg: &Polygraph, p: &Proofs) -> Value {
    let isos: Vec<Value> = p
        .isos
        .iter()
        .map(|x| {
            json!({
                "u": pg.objects[x.u], "v": pg.objects[x.v],
                "a_u": pg.show_word(&x.a_u), "a_v": pg.show_word(&x.a_v),
                "alpha_u": join_json(pg, &x.alpha_u), "alpha_v": join_json(pg, &x.alpha_v),
            })
        })
        .collect();
    let sums: Vec<Value> = p
        .sums
        .iter()
        .map(|x| {
            json!({
                "a": pg.objects[x.a], "b": pg.objects[x.b], "c": pg.objects[x.c],
                "p_b": pg.show_lin(&x.p_b), "i_b": pg.show_lin(&x.i_b),
                "p_c": pg.show_lin(&x.p_c), "i_c": pg.show_lin(&x.i_c),
                "alpha_a": join_json(pg, &x.alpha_a), "alpha_b": join_json(pg, &x.alpha_b), "alpha_c": join_json(pg, &x.alpha_c),
                "degenerate": x.is_degenerate() || x.has_zero_witness(),
            })
        })
        .collect();
    let zeros: Vec<Value> = p
        .zeros
        .iter()
        .map(|z| {
            let proof = match &z.proof {
                ZeroProof::Reduces(t) => json!({ "reduces": report::lin_trace(pg, t) }),
                ZeroProof::Retract { f, g, fg, gf } => json!({
                    "f": pg.show_word(f), "g": pg.show_word(g), "fg": join_json(pg, fg), "gf": join_json(pg, gf),
                }),
            };
            json!({ "object": pg.objects[z.object], "proof": proof })
        })
        .collect();
    json!({ "iso_proofs": isos, "direct_sum_proofs": sums, "zero_objects": zeros })
}

fn decat_cmd(pg: &Polygraph, bounds: &ProofBounds, proofs: Option<&Path>) -> Res<Out> {
    pg.require_linear()?;
    let p = match proofs {
        Some(path) => proofs_from_report(pg, &read_json(path)?, bounds.depth)?,
        None => search_proofs(pg, bounds)?,
    };
    let k = build_decat(pg, &p.isos, &p.sums, &p.zeros)?;
    let mut text = String::new();
    let _ = writeln!(text, "# word bound {}, depth {}", bounds.word_bound, bounds.depth);
    if p.isos.is_empty() && p.sums.is_empty() && p.zeros.is_empty() {
        let _ = writeln!(text, "# no proofs found within bound");
    }
    for x in &p.isos {
        let _ = writeln!(text, "# iso: {}", x.show(pg));
    }
    for x in &p.sums {
        let _ = writeln!(text, "# direct sum: {}", x.show(pg));
    }
    for z in &p.zeros {
        let _ = writeln!(text, "# zero object: {}", pg.objects[z.object]);
    }
    let _ = write!(text, "{k}");
    let mut json = proofs_json(pg, &p);
    json["bounds"] = json!({ "word_bound": bounds.word_bound, "depth": bounds.depth });
    json["decat"] = Value::String(k.to_string());
    json["rules"] = json!(k.rules.iter().map(|r| k.show_rule(r)).collect::<Vec<_>>());
    json["polygraphs"] = polygraphs_table(&[pg]);
    Ok(Out::new(text.trim_end().to_string(), json))
}

/// A decategorified system given directly, or computed from a linear polygraph.
fn decat_input(pg: &Polygraph, bounds: &ProofBounds) -> Res<DecatSystem> {
    match DecatSystem::from_polygraph(pg) {
        Ok(k) => Ok(k),
        Err(_) => Ok(decat::decategorify(pg, bounds.word_bound, bounds.depth)?),
    }
}

fn krull_schmidt(pg: &Polygraph, bounds: &ProofBounds) -> Res<Out> {
    let k = decat_input(pg, bounds)?;
    let v = krull_schmidt_check(&k, bounds.depth)?;
    let kp = k.to_polygraph().ok();
    let trace = |t: &polykar::linear::LinTrace| kp.as_ref().map(|p| report::lin_trace(p, t));
    let mut text = verdict_line("krull-schmidt", v.status, &v.budget, &v.note);
    let witness = match &v.witness {
        Some(KsWitness::Decompositions { left, right }) => {
            let (l, r) = (show_classes(&k, &left.target), show_classes(&k, &right.target));
            let _ = write!(text, "\n  {} ->* {}\n  {} ->* {}", show_classes(&k, &left.source), l, show_classes(&k, &right.source), r);
            json!({ "decompositions": [l, r], "left": trace(left), "right": trace(right) })
        }
        Some(KsWitness::Growth(t)) => {
            let _ = write!(text, "\n  {} ->* {}", show_classes(&k, &t.source), show_classes(&k, &t.target));
            json!({ "growth": trace(t) })
        }
        Some(KsWitness::Joins(js)) => json!({ "joins": js.len() }),
        None => Value::Null,
    };
    let mut json = json!({ "verdict": report::verdict(v.status, &v.budget, &v.note), "witness": witness });
    if let Some(p) = &kp {
        json["polygraphs"] = polygraphs_table(&[p]);
    }
    Ok(Out::new(text, json).with_status(v.status))
}

fn group(pg: &Polygraph, bounds: &ProofBounds) -> Res<Out> {
    let k = decat_input(pg, bounds)?;
    let g = grothendieck_group(&k);
    let json = json!({
        "rank": g.rank,
        "torsion": g.torsion.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "invariant_factors": g.smith.invariant_factors().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "generators": k.generators.iter().map(|x| format!("[{x}]")).collect::<Vec<_>>(),
        "relations": k.rules.iter().map(|r| k.show_rule(r)).collect::<Vec<_>>(),
    });
    Ok(Out::new(g.to_string(), json))
}

fn file_of(c: &Command) -> &Path {
    match c {
        Command::Validate { file }
        | Command::Normalize { file, .. }
        | Command::Branchings { file }
        | Command::Confluence { file, .. }
        | Command::Termination { file, .. }
        | Command::Quasi { file, .. }
        | Command::Complete { file, .. }
        | Command::Idempotents { file, .. }
        | Command::Karoubi { file, .. }
        | Command::Lift { file, .. }
        | Command::Decat { file, .. }
        | Command::KrullSchmidt { file, .. }
        | Command::Group { file, .. } => file,
    }
}

fn check_bounds(cli: &Cli) -> Res<()> {
    let mut bounds = vec![("budget", cli.budget)];
    match &cli.command {
        Command::Confluence { depth, .. } | Command::Quasi { depth, .. } => bounds.push(("depth", *depth)),
        Command::Complete { max_rules, max_rounds, .. } => bounds.extend([("max-rules", *max_rules), ("max-rounds", *max_rounds)]),
        Command::Idempotents { max_len, height, basis_bound, depth, .. } => {
            bounds.extend([("max-len", *max_len), ("height", (*height).max(0) as usize), ("basis-bound", *basis_bound), ("depth", *depth)])
        }
        Command::Karoubi { source, .. } => bounds.push(("depth", source.depth)),
        Command::Lift { source, size_bound, .. } => bounds.extend([("depth", source.depth), ("size-bound", *size_bound)]),
        Command::Decat { bounds: b, .. } | Command::KrullSchmidt { bounds: b, .. } | Command::Group { bounds: b, .. } => {
            bounds.extend([("word-bound", b.word_bound), ("depth", b.depth)])
        }
        _ => {}
    }
    match bounds.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(Fail::Input(format!("--{name} must be positive"))),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Res<Out> {
    check_bounds(cli)?;
    if let Some(path) = &cli.verify {
        let pg = load(file_of(&cli.command))?;
        let r = read_json(path)?;
        let n = report::verify(&[pg], &r).map_err(Fail::Rejected)?;
        return Ok(Out::new(format!("verified {n} traces"), json!({ "verified": n })).with_status(Status::Yes));
    }
    if let Command::Validate { file } = &cli.command {
        return validate(file);
    }
    let pg = load(file_of(&cli.command))?;
    match &cli.command {
        Command::Validate { .. } => unreachable!(),
        Command::Normalize { cell, strategy, .. } => {
            let cell = cell.as_deref().ok_or_else(|| Fail::Input("normalize needs --cell".into()))?;
            normalize(&pg, cell, *strategy, cli.budget)
        }
        Command::Branchings { .. } => branchings(&pg),
        Command::Confluence { order, depth, .. } => confluence(&pg, &order.order, *depth),
        Command::Termination { order, .. } => termination(&pg, &order.order),
        Command::Quasi { seeds, cell, depth, .. } => quasi(&pg, seeds, cell.as_deref(), *depth),
        Command::Complete { order, max_rules, max_rounds, .. } => complete(&pg, &order.order, *max_rules, *max_rounds),
        Command::Idempotents { max_len, height, basis_bound, cell, depth, .. } => {
            idempotents(&pg, *max_len, *height, *basis_bound, cell.as_deref(), *depth)
        }
        Command::Karoubi { source, .. } => karoubi(&pg, source),
        Command::Lift { source, size_bound, .. } => lift(&pg, source, *size_bound),
        Command::Decat { bounds, proofs, .. } => decat_cmd(&pg, bounds, proofs.as_deref()),
        Command::KrullSchmidt { bounds, .. } => krull_schmidt(&pg, bounds),
        Command::Group { bounds, .. } => group(&pg, bounds),
    }
}

fn emit(cli: &Cli, body: &str) -> Result<(), String> {
    match &cli.output {
        Some(path) => std::fs::write(path, format!("{body}\n")).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{body}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.to_string()),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("polykar: {e}");
            return ExitCode::from(2);
        }
    }
    let validating = matches!(cli.command, Command::Validate { .. }) && cli.verify.is_none();
    match run(&cli) {
        Ok(out) => {
            let body = match cli.format {
                Format::Text => out.text.clone(),
                Format::Json => serde_json::to_string_pretty(&out.json).expect("reports are valid JSON"),
            };
            if let Err(e) = emit(&cli, &body) {
                eprintln!("polykar: {e}");
                return ExitCode::from(2);
            }
            match out.status {
                Some(Status::Unknown) if validating => ExitCode::from(2),
                Some(Status::No) => ExitCode::from(cli.no_exit),
                Some(Status::Unknown) => ExitCode::from(3),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(Fail::Input(m)) => {
            eprintln!("polykar: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Rejected(m)) => {
            eprintln!("polykar: verification failed: {m}");
            ExitCode::from(cli.no_exit)
        }
    }
}
