//! CSV reading and writing. Numbers are written with 17 significant digits.

use std::io::Write;
use std::path::Path;

use delay_noether::problem::{Grid, Trajectory};

use crate::error::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Buffered CSV rows, written out in one go.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|s| s.as_ref())).expect("in-memory write");
        Table { writer }
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: impl IntoIterator<Item = S>) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn save(self, path: &Path) -> Result<(), CliError> {
        let bytes = self.into_bytes();
        std::fs::File::create(path).and_then(|mut f| f.write_all(&bytes)).map_err(|e| CliError::io(path, e))
    }
}

/// `t,q1,...,qn`, one row per grid node.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let n = traj.n();
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("q{i}"))).collect();
    let mut table = Table::new(&header);
    for (j, q) in traj.states().iter().enumerate() {
        table.row(std::iter::once(num(traj.grid().time(j))).chain(q.iter().map(|&v| num(v))));
    }
    table
}

/// Columns of a trajectory file, by role.
#[derive(Debug, Default)]
pub struct Columns {
    pub t: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub u: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
}

fn parse_cell(path: &Path, line: u64, name: &str, cell: &str) -> Result<Option<f64>, CliError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|_| {
        CliError::input("syntax", format!("{}: line {line}, column `{name}`: not a number: {cell}", path.display()))
    })
}

/// Read a trajectory CSV with header `t,q1..qn[,u1..um][,p1..pn]`. Empty
/// cells are allowed only in `u` and `p` columns.
pub fn read_columns(path: &Path, n: usize, m: usize) -> Result<Columns, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let position = |name: &str| header.iter().position(|h| h.trim() == name);
    let t_col =
        position("t").ok_or_else(|| CliError::input("invalid", format!("{}: missing column `t`", path.display())))?;
    let names = |prefix: &'static str, count: usize| (1..=count).map(move |i| format!("{prefix}{i}"));
    let q_cols: Vec<(String, usize)> = names("q", n)
        .map(|name| {
            position(&name)
                .map(|c| (name.clone(), c))
                .ok_or_else(|| CliError::input("invalid", format!("{}: missing column `{name}`", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let optional = |prefix: &'static str, count: usize| -> Vec<(String, usize)> {
        names(prefix, count).filter_map(|name| position(&name).map(|c| (name, c))).collect()
    };
    let u_cols = optional("u", m);
    let p_cols = optional("p", n);

    let mut out = Columns::default();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input("syntax", format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |(name, c): &(String, usize)| parse_cell(path, line, name, record.get(*c).unwrap_or(""));
        let required = |col: &(String, usize)| {
            cell(col)?.ok_or_else(|| {
                CliError::input("invalid", format!("{}: line {line}, column `{}` is empty", path.display(), col.0))
            })
        };
        out.t.push(required(&("t".to_string(), t_col))?);
        out.q.push(q_cols.iter().map(required).collect::<Result<_, _>>()?);
        if !u_cols.is_empty() {
            out.u.push(u_cols.iter().map(cell).collect::<Result<_, _>>()?);
        }
        if !p_cols.is_empty() {
            out.p.push(p_cols.iter().map(cell).collect::<Result<_, _>>()?);
        }
    }
    if out.u.first().is_some_and(|r| r.len() != m) {
        return Err(CliError::input("invalid", format!("{}: expected columns u1..u{m}", path.display())));
    }
    if out.p.first().is_some_and(|r| r.len() != n) {
        return Err(CliError::input("invalid", format!("{}: expected columns p1..p{n}", path.display())));
    }
    Ok(out)
}

/// The grid through the `t` column: nodes `t₁−τ, …, t₂`, uniformly spaced.
pub fn grid_for(path: &Path, t: &[f64], tau: f64, t1: f64, t2: f64) -> Result<Grid, CliError> {
    if t.len() < 2 {
        return Err(CliError::input("invalid", format!("{}: need at least two rows", path.display())));
    }
    let h = (t2 - t1 + tau) / (t.len() - 1) as f64;
    let grid = Grid::new(tau, t1, t2, h)
        .map_err(|e| CliError::input("invalid", format!("{}: {} rows: {e}", path.display(), t.len())))?;
    let scale = t1.abs().max(t2.abs()).max(1.0);
    for (j, &tj) in t.iter().enumerate() {
        if (tj - grid.time(j)).abs() > 1e-9 * scale {
            return Err(CliError::input(
                "invalid",
                format!(
                    "{}: row {} has t = {tj}, expected {} on a uniform grid over [t1 - tau, t2]",
                    path.display(),
                    j + 1,
                    grid.time(j)
                ),
            ));
        }
    }
    Ok(grid)
}

/// Rows of `cols` as complete vectors; `what` names the column group in
/// errors.
pub fn complete(path: &Path, rows: &[Vec<Option<f64>>], first: usize, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(j, row)| {
            row.iter().copied().collect::<Option<Vec<f64>>>().ok_or_else(|| {
                CliError::input(
                    "invalid",
                    format!("{}: row {} has an empty {what} value", path.display(), first + j + 1),
                )
            })
        })
        .collect()
}
