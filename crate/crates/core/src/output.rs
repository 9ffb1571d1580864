//! Plot-ready profile files.
//!
//! A profile CSV starts with one `# `-prefixed line holding a JSON object of
//! metadata, followed by a header row and comma-separated data rows with LF
//! line endings.

use std::fmt::Write as _;

use serde_json::Value;

use crate::pde::Field;

/// Writes `x` plus one column per field. All fields must share a grid.
pub fn profiles_csv(meta: &Value, columns: &[(&str, &Field)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {meta}");
    out.push('x');
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let Some((_, first)) = columns.first() else {
        return out;
    };
    for (i, x) in first.grid.xs().enumerate() {
        let _ = write!(out, "{x}");
        for (_, f) in columns {
            let _ = write!(out, ",{}", f.values[i]);
        }
        out.push('\n');
    }
    out
}

/// Splits a profile CSV into its metadata and numeric rows.
pub fn parse_profiles_csv(text: &str) -> Option<(Value, Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let meta: Value = serde_json::from_str(lines.next()?.strip_prefix("# ")?).ok()?;
    let header: Vec<String> = lines.next()?.split(',').map(str::to_owned).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.parse().ok())
                .collect::<Option<Vec<f64>>>()
        })
        .collect::<Option<Vec<_>>>()?;
    Some((meta, header, rows))
}
