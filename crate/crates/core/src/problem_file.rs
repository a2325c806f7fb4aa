//! TOML problem files.
//!
//! ```toml
//! [problem]
//! kind = "variational"      # or "control" (then `m` is required)
//! n = 1
//! tau = 1
//! t1 = 0
//! t2 = 3
//!
//! [lagrangian]
//! expr = "(dq1 + dq1_tau)^2"
//!
//! [dynamics]                # control problems only
//! q1 = "u1 - q1_tau"
//!
//! [prehistory]
//! q1 = [{ from = -1, to = 0, expr = "-t" }]
//!
//! [terminal]                # variational problems only, optional
//! q1 = 2
//!
//! [generators]              # optional
//! eta = "1"
//! xi1 = "0"                 # also accepted: xi_1; likewise rho1, sigma1
//! ```
//!
//! Errors carry the 1-based line and column of the offending key or value.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Range;

use serde::Deserialize;
use toml::Spanned;

use crate::problem::{
    ControlProblem, GeneratorSet, Prehistory, PrehistoryPiece, Problem, VariationalProblem, Violation,
};
use crate::symexpr::{parse, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileErrorKind {
    /// Malformed TOML, a missing or unknown key, or a malformed expression.
    Syntax,
    UnknownIdentifier,
    /// The parsed problem violates a problem invariant.
    Invalid,
}

impl FileErrorKind {
    pub fn category(self) -> &'static str {
        match self {
            FileErrorKind::Syntax => "syntax",
            FileErrorKind::UnknownIdentifier => "unknown-identifier",
            FileErrorKind::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileError {
    pub kind: FileErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for FileError {}

/// A parsed problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: Problem,
    pub generators: Option<GeneratorSet>,
}

type Keyed<V> = Spanned<BTreeMap<Spanned<String>, Spanned<V>>>;
/// Generator expressions by component, with the span of their key.
type Components = Vec<(usize, Range<usize>, Expr)>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    problem: Spanned<RawHeader>,
    lagrangian: Spanned<RawLagrangian>,
    dynamics: Option<Keyed<String>>,
    prehistory: Keyed<Vec<Spanned<RawPiece>>>,
    terminal: Option<Keyed<f64>>,
    generators: Option<Keyed<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    kind: Spanned<String>,
    n: Spanned<usize>,
    m: Option<Spanned<usize>>,
    tau: Spanned<f64>,
    t1: Spanned<f64>,
    t2: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLagrangian {
    expr: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    from: Spanned<f64>,
    to: Spanned<f64>,
    expr: Spanned<String>,
}

struct Ctx<'a> {
    text: &'a str,
    /// Violation field name to source span.
    spans: HashMap<String, Range<usize>>,
}

impl Ctx<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn error(&self, kind: FileErrorKind, offset: usize, message: impl Into<String>) -> FileError {
        let (line, column) = self.position(offset);
        FileError { kind, line, column, message: message.into() }
    }

    fn expr(&mut self, field: &str, s: &Spanned<String>) -> Result<Expr, FileError> {
        self.spans.insert(field.to_string(), s.span());
        parse(s.get_ref()).map_err(|e| {
            let kind = if e.message.starts_with("unknown identifier") {
                FileErrorKind::UnknownIdentifier
            } else {
                FileErrorKind::Syntax
            };
            // +1 skips the opening quote of a basic string
            self.error(kind, s.span().start + 1 + e.offset, format!("{field}: {}", e.message))
        })
    }

    fn violation(&self, v: &Violation) -> FileError {
        let mut field = v.field.as_str();
        let offset = loop {
            if let Some(span) = self.spans.get(field) {
                break span.start;
            }
            match field.rfind('.') {
                Some(at) => field = &field[..at],
                None => break 0,
            }
        };
        self.error(FileErrorKind::Invalid, offset, v.to_string())
    }
}

/// Index of a per-component key such as `q2`, `xi2` or `xi_2`.
fn component_key(key: &str, prefix: &str) -> Option<usize> {
    let rest = key.strip_prefix(prefix)?;
    let digits = rest.strip_prefix('_').unwrap_or(rest);
    if digits.is_empty() || digits.starts_with('0') || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Collect `prefix<i>` entries into a dense vector of length `len`.
fn components<T: Clone>(
    ctx: &Ctx<'_>,
    entries: Vec<(usize, Range<usize>, T)>,
    len: usize,
    section: &str,
    prefix: &str,
) -> Result<Vec<T>, FileError> {
    let mut out: Vec<Option<T>> = vec![None; len];
    for (i, span, v) in entries {
        if i == 0 || i > len {
            return Err(ctx.error(
                FileErrorKind::Invalid,
                span.start,
                format!("{section}: `{prefix}{i}` exceeds dimension {len}"),
            ));
        }
        if out[i - 1].is_some() {
            return Err(ctx.error(FileErrorKind::Syntax, span.start, format!("{section}: duplicate `{prefix}{i}`")));
        }
        out[i - 1] = Some(v);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| ctx.error(FileErrorKind::Invalid, 0, format!("{section}: missing `{prefix}{}`", i + 1)))
        })
        .collect()
}

/// Parse and validate a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemFile, FileError> {
    let mut ctx = Ctx { text, spans: HashMap::new() };
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        ctx.error(FileErrorKind::Syntax, offset, e.message().trim_end().to_string())
    })?;

    let header = raw.problem.get_ref();
    ctx.spans.insert("problem".into(), raw.problem.span());
    for (name, span) in [
        ("problem.n", header.n.span()),
        ("problem.tau", header.tau.span()),
        ("problem.t1", header.t1.span()),
        ("problem.t2", header.t2.span()),
    ] {
        ctx.spans.insert(name.into(), span);
    }
    let n = *header.n.get_ref();
    let (tau, t1, t2) = (*header.tau.get_ref(), *header.t1.get_ref(), *header.t2.get_ref());
    let control = match header.kind.get_ref().as_str() {
        "variational" => false,
        "control" => true,
        other => {
            return Err(ctx.error(
                FileErrorKind::Syntax,
                header.kind.span().start,
                format!("problem.kind: expected \"variational\" or \"control\", found \"{other}\""),
            ))
        }
    };
    let lagrangian = ctx.expr("lagrangian", &raw.lagrangian.get_ref().expr)?;

    ctx.spans.insert("prehistory".into(), raw.prehistory.span());
    let mut pre_entries = Vec::new();
    for (key, pieces) in raw.prehistory.get_ref() {
        let i = component_key(key.get_ref(), "q").ok_or_else(|| {
            ctx.error(FileErrorKind::Syntax, key.span().start, format!("prehistory: unknown key `{}`", key.get_ref()))
        })?;
        let field = format!("prehistory.q{i}");
        ctx.spans.insert(field.clone(), key.span());
        let mut list = Vec::new();
        for piece in pieces.get_ref() {
            let p = piece.get_ref();
            list.push(PrehistoryPiece {
                from: *p.from.get_ref(),
                to: *p.to.get_ref(),
                expr: ctx.expr(&field, &p.expr)?,
            });
        }
        pre_entries.push((i, key.span(), list));
    }
    let prehistory = Prehistory::new(components(&ctx, pre_entries, n, "prehistory", "q")?);

    let problem = if control {
        let m = header.m.as_ref().ok_or_else(|| {
            ctx.error(FileErrorKind::Syntax, raw.problem.span().start, "problem.m: required for control problems")
        })?;
        ctx.spans.insert("problem.m".into(), m.span());
        if let Some(term) = &raw.terminal {
            return Err(ctx.error(
                FileErrorKind::Syntax,
                term.span().start,
                "terminal: not supported for control problems",
            ));
        }
        let dynamics = raw.dynamics.as_ref().ok_or_else(|| {
            ctx.error(FileErrorKind::Syntax, raw.problem.span().start, "dynamics: required for control problems")
        })?;
        ctx.spans.insert("dynamics".into(), dynamics.span());
        let mut entries = Vec::new();
        for (key, value) in dynamics.get_ref() {
            let i = component_key(key.get_ref(), "q").ok_or_else(|| {
                ctx.error(FileErrorKind::Syntax, key.span().start, format!("dynamics: unknown key `{}`", key.get_ref()))
            })?;
            entries.push((i, key.span(), ctx.expr(&format!("dynamics.q{i}"), value)?));
        }
        Problem::Control(ControlProblem {
            n,
            m: *m.get_ref(),
            cost: lagrangian,
            dynamics: components(&ctx, entries, n, "dynamics", "q")?,
            tau,
            t1,
            t2,
            prehistory,
        })
    } else {
        if let Some(m) = &header.m {
            return Err(ctx.error(
                FileErrorKind::Syntax,
                m.span().start,
                "problem.m: only allowed for control problems",
            ));
        }
        if let Some(d) = &raw.dynamics {
            return Err(ctx.error(
                FileErrorKind::Syntax,
                d.span().start,
                "dynamics: only allowed for control problems",
            ));
        }
        let terminal = match &raw.terminal {
            None => None,
            Some(term) => {
                ctx.spans.insert("terminal".into(), term.span());
                let mut entries = Vec::new();
                for (key, value) in term.get_ref() {
                    let i = component_key(key.get_ref(), "q").ok_or_else(|| {
                        ctx.error(
                            FileErrorKind::Syntax,
                            key.span().start,
                            format!("terminal: unknown key `{}`", key.get_ref()),
                        )
                    })?;
                    entries.push((i, value.span(), *value.get_ref()));
                }
                Some(components(&ctx, entries, n, "terminal", "q")?)
            }
        };
        Problem::Variational(VariationalProblem { n, lagrangian, tau, t1, t2, prehistory, terminal })
    };

    if let Some(v) = problem.validate().first() {
        return Err(ctx.violation(v));
    }

    let generators = match &raw.generators {
        None => None,
        Some(g) => Some(parse_generators(&mut ctx, g, &problem)?),
    };
    Ok(ProblemFile { problem, generators })
}

fn parse_generators(ctx: &mut Ctx<'_>, table: &Keyed<String>, problem: &Problem) -> Result<GeneratorSet, FileError> {
    ctx.spans.insert("generators".into(), table.span());
    let (n, m) = match problem {
        Problem::Variational(p) => (p.n, 0),
        Problem::Control(p) => (p.n, p.m),
    };
    let mut eta = None;
    let mut groups: [(&str, Components); 3] = [("xi", vec![]), ("rho", vec![]), ("sigma", vec![])];
    for (key, value) in table.get_ref() {
        let name = key.get_ref().as_str();
        if name == "eta" {
            eta = Some(ctx.expr("generators.eta", value)?);
            continue;
        }
        let Some((prefix, list, i)) =
            groups.iter_mut().find_map(|(prefix, list)| component_key(name, prefix).map(|i| (*prefix, list, i)))
        else {
            return Err(ctx.error(
                FileErrorKind::Syntax,
                key.span().start,
                format!("generators: unknown key `{name}`"),
            ));
        };
        let field = format!("generators.{prefix}{i}");
        ctx.spans.insert(field.clone(), key.span());
        list.push((i, key.span(), ctx.expr(&field, value)?));
    }
    let [(_, xi), (_, rho), (_, sigma)] = groups;
    let optional = |list: Components, len: usize, prefix: &str| {
        if list.is_empty() {
            Ok(None)
        } else {
            components(ctx, list, len, "generators", prefix).map(Some)
        }
    };
    let rho = optional(rho, m, "rho")?;
    let sigma = optional(sigma, n, "sigma")?;
    let xi = if xi.is_empty() { vec![Expr::zero(); n] } else { components(ctx, xi, n, "generators", "xi")? };
    let g = GeneratorSet { eta: eta.unwrap_or_else(Expr::zero), xi, rho, sigma };
    if let Some(v) = g.validate_for(problem).first() {
        return Err(ctx.violation(v));
    }
    Ok(g)
}

/// Render a problem (and generators) in the file format.
pub fn render_problem(file: &ProblemFile) -> String {
    use toml::{Table, Value};
    let table = |pairs: Vec<(String, Value)>| Value::Table(pairs.into_iter().collect::<Table>());
    let (kind, n, m, tau, t1, t2, l, pre) = match &file.problem {
        Problem::Variational(p) => ("variational", p.n, None, p.tau, p.t1, p.t2, &p.lagrangian, &p.prehistory),
        Problem::Control(p) => ("control", p.n, Some(p.m), p.tau, p.t1, p.t2, &p.cost, &p.prehistory),
    };
    let mut header = vec![
        ("kind".to_string(), Value::from(kind)),
        ("n".to_string(), Value::from(n as i64)),
        ("tau".to_string(), Value::from(tau)),
        ("t1".to_string(), Value::from(t1)),
        ("t2".to_string(), Value::from(t2)),
    ];
    if let Some(m) = m {
        header.push(("m".to_string(), Value::from(m as i64)));
    }
    let mut doc = vec![
        ("problem".to_string(), table(header)),
        ("lagrangian".to_string(), table(vec![("expr".to_string(), Value::from(l.to_string()))])),
    ];
    let pieces = pre
        .components()
        .iter()
        .enumerate()
        .map(|(i, list)| {
            let arr = list
                .iter()
                .map(|p| {
                    table(vec![
                        ("from".to_string(), Value::from(p.from)),
                        ("to".to_string(), Value::from(p.to)),
                        ("expr".to_string(), Value::from(p.expr.to_string())),
                    ])
                })
                .collect::<Vec<_>>();
            (format!("q{}", i + 1), Value::Array(arr))
        })
        .collect();
    doc.push(("prehistory".to_string(), table(pieces)));
    match &file.problem {
        Problem::Variational(p) => {
            if let Some(term) = &p.terminal {
                let vals = term.iter().enumerate().map(|(i, v)| (format!("q{}", i + 1), Value::from(*v))).collect();
                doc.push(("terminal".to_string(), table(vals)));
            }
        }
        Problem::Control(p) => {
            let vals = p
                .dynamics
                .iter()
                .enumerate()
                .map(|(i, e)| (format!("q{}", i + 1), Value::from(e.to_string())))
                .collect();
            doc.push(("dynamics".to_string(), table(vals)));
        }
    }
    if let Some(g) = &file.generators {
        let mut vals = vec![("eta".to_string(), Value::from(g.eta.to_string()))];
        let lists = [("xi", Some(&g.xi)), ("rho", g.rho.as_ref()), ("sigma", g.sigma.as_ref())];
        for (prefix, list) in lists {
            for (i, e) in list.into_iter().flatten().enumerate() {
                vals.push((format!("{prefix}{}", i + 1), Value::from(e.to_string())));
            }
        }
        doc.push(("generators".to_string(), table(vals)));
    }
    let Value::Table(t) = table(doc) else { unreachable!() };
    toml::to_string(&t).expect("problem tables serialize")
}
