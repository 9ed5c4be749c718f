use std::fmt::Write as _;

use super::dp::{GridStrategy, ValueFunction};
use crate::error::{Error, Result};
use crate::problem::FiniteScenario;

pub const TABLE_FORMAT_VERSION: u32 = 1;
pub const TABLE_COLUMNS: &str = "t,grid_index,xhat,value,control";

/// Header fields of a value table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableHeader {
    pub format_version: u32,
    pub scenario_hash: String,
    pub grid: String,
    pub delta: f64,
    pub beta: f64,
    pub tool: String,
}

/// One row: `V_t(point; x̂)` and its argmin (empty at `t = T`).
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub t: usize,
    pub grid_index: usize,
    pub x_hat: String,
    pub value: f64,
    pub control: Option<String>,
}

/// Versioned CSV of a value function and its strategy; states and controls
/// are written by label.
pub fn write_value_table(
    scenario: &FiniteScenario,
    values: &ValueFunction,
    strategy: &GridStrategy,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# value_table v{TABLE_FORMAT_VERSION}");
    let _ = writeln!(out, "# scenario_hash={}", strategy.scenario_hash());
    let _ = writeln!(
        out,
        "# grid={} delta={} beta={} tool={}",
        strategy.grid().kind(),
        strategy.grid().delta(),
        strategy.beta(),
        crate::TOOL_VERSION
    );
    let _ = writeln!(out, "{TABLE_COLUMNS}");
    for t in 0..=values.horizon() {
        for point in 0..values.len(t) {
            for (x_hat, value) in values.slices(t, point).iter().enumerate() {
                let control = if t < values.horizon() {
                    scenario.controls()[strategy.control_at(t, point, x_hat)].as_str()
                } else {
                    ""
                };
                let _ = writeln!(
                    out,
                    "{t},{point},{},{value},{control}",
                    scenario.states()[x_hat]
                );
            }
        }
    }
    out
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_value_table(text: &str) -> Result<(TableHeader, Vec<TableRow>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(0, format!("missing {what}")));

    let (n, first) = next("format line")?;
    let format_version = first
        .strip_prefix("# value_table v")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad(n, "not a value table"))?;
    if format_version != TABLE_FORMAT_VERSION {
        return Err(bad(n, format!("unsupported table version {format_version}")));
    }
    let (n, hash_line) = next("scenario hash")?;
    let scenario_hash = hash_line
        .strip_prefix("# scenario_hash=")
        .ok_or_else(|| bad(n, "expected `# scenario_hash=`"))?
        .to_string();
    let (n, grid_line) = next("grid line")?;
    let fields = grid_line
        .strip_prefix("# ")
        .ok_or_else(|| bad(n, "expected grid metadata"))?;
    let field = |key: &str| -> Result<&str> {
        let start = fields
            .find(&format!("{key}="))
            .ok_or_else(|| bad(n, format!("missing `{key}=`")))?
            + key.len()
            + 1;
        let rest = &fields[start..];
        Ok(if key == "tool" {
            rest
        } else {
            rest.split(' ').next().unwrap_or("")
        })
    };
    let number = |key: &str| -> Result<f64> {
        field(key)?
            .parse()
            .map_err(|_| bad(n, format!("`{key}` is not a number")))
    };
    let header = TableHeader {
        format_version,
        scenario_hash,
        grid: field("grid")?.to_string(),
        delta: number("delta")?,
        beta: number("beta")?,
        tool: field("tool")?.to_string(),
    };
    let (n, columns) = next("column header")?;
    if columns != TABLE_COLUMNS {
        return Err(bad(n, format!("expected columns `{TABLE_COLUMNS}`")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(bad(n, "expected 5 columns"));
        }
        let parse_usize =
            |s: &str| s.parse::<usize>().map_err(|_| bad(n, format!("bad integer {s:?}")));
        rows.push(TableRow {
            t: parse_usize(cells[0])?,
            grid_index: parse_usize(cells[1])?,
            x_hat: cells[2].to_string(),
            value: cells[3]
                .parse()
                .map_err(|_| bad(n, format!("bad value {:?}", cells[3])))?,
            control: (!cells[4].is_empty()).then(|| cells[4].to_string()),
        });
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::problem::ActualKernel;
    use crate::solver::{dp_solve, BeliefGrid};
    use crate::scenarios::builtin_discrete_toy;

    #[test]
    fn table_round_trip() {
        let s = builtin_discrete_toy();
        let view = s.model_view();
        let kernel = ActualKernel::exact(&s);
        let grid = Arc::new(BeliefGrid::reachable(&view, &kernel).unwrap());
        let (values, strategy) = dp_solve(&view, &kernel, grid).unwrap();
        let strategy = strategy.as_grid().unwrap();
        let text = write_value_table(&s, &values, strategy);
        let (header, rows) = read_value_table(&text).unwrap();
        assert_eq!(header.scenario_hash, s.model_view().scenario_hash());
        assert_eq!(header.grid, "exact");
        assert_eq!(header.beta, 1.0);
        assert_eq!(header.tool, crate::TOOL_VERSION);
        let expected: usize = (0..=2).map(|t| values.len(t) * 2).sum();
        assert_eq!(rows.len(), expected);
        for row in &rows {
            let x_hat = s.state_index(&row.x_hat).unwrap();
            assert_eq!(row.value, values.value(row.t, row.grid_index, x_hat));
            assert_eq!(row.control.is_none(), row.t == 2);
        }
    }

    #[test]
    fn rejects_other_versions() {
        let err = read_value_table("# value_table v9\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
